//! Acceptance checks. Each criterion prints one PASS or FAIL line; the
//! binary exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use residue_core::backends::bigfloat::BigFloat;
use residue_core::backends::{run_backend, BackendId, RunOptions};
use residue_core::eft::{div_err, sqrt_err, two_prod, two_sum, ulp_of};
use residue_core::lang::{OpId, Trace};
use residue_core::par::{self, Schedule};
use residue_core::report::{
    bundled_corpus, compute_warnings, corpus_entry, evaluate, oracle_check, oracle_warnings, score, DiffKind,
    EntryReport, EvalConfig, Subject,
};
use residue_core::ro::{load_state, repo_drive, save_state, DriverConfig, RunState};

/// Scoring band, in powers of two around the warning threshold.
const MARGIN: i32 = 2;
const CRIT1_TIME: Duration = Duration::from_secs(1);
const CRIT3_TIME: Duration = Duration::from_secs(30);
const EFT_CASES: usize = 100_000;
const DIV_SQRT_CASES: usize = 10_000;
const TRUTH_BITS: u32 = 256;
const ORACLE_BITS: u32 = 512;
const STATE_CASES: usize = 1000;
/// Ops making up the argument reduction in sin-reduce.
const REDUCTION_OPS: u64 = 7;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eval_cfg() -> EvalConfig {
    EvalConfig {
        margin: Some(MARGIN),
        ..EvalConfig::default()
    }
}

/// Standard subjects over the whole corpus, shared by criteria 4 and 5.
fn corpus_reports() -> &'static [EntryReport] {
    static REPORTS: OnceLock<Vec<EntryReport>> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let cfg = eval_cfg();
        bundled_corpus()
            .iter()
            .map(|e| {
                evaluate(e.name, e.source, &e.program(), &e.input_vectors(), &Subject::standard(), &cfg)
                    .expect("corpus evaluates")
            })
            .collect()
    })
}

fn total(report: &EntryReport, subject: &str) -> usize {
    report.subject(subject).expect("subject present").card.total()
}

/// Value as printed with sixteen fractional digits and read back.
fn reparse(v: f64) -> f64 {
    format!("{v:.16e}").parse().unwrap()
}

/// Seventeen significant digits with the last one dropped.
fn truncated16(v: f64) -> String {
    let s = format!("{v:.16e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    format!("{}e{exp}", &mantissa[..mantissa.len() - 1])
}

fn diff_roots() -> Outcome {
    let e = corpus_entry("diff-roots").unwrap();
    let p = e.program();
    let start = Instant::now();
    let r = repo_drive(&p, e.source, &[1e99], &DriverConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = [
        "1.0000000000000000e+00",
        "1.3144752779492117e+32",
        "1.3144752779492117e+32",
        "1.5811388300841897e-50",
        "2.5000000000000000e-100",
    ];
    let got: Vec<f64> = r.outcome.residues.iter().map(|r| r.value).collect();
    let mut bad = Vec::new();
    for (i, (g, want)) in got.iter().zip(expected).enumerate() {
        let want: f64 = want.parse().unwrap();
        if reparse(*g).to_bits() != want.to_bits() {
            bad.push(format!("op {i}: {g:.16e} != {want:.16e}"));
        }
    }
    if got.len() != expected.len() {
        bad.push(format!("{} residues", got.len()));
    }
    let display: Vec<String> = got.iter().map(|&v| truncated16(v)).collect();
    let display_ok = display
        .iter()
        .zip(expected)
        .all(|(d, want)| *d == truncated16(want.parse().unwrap()));
    println!(
        "  criterion 1 (display truncated to 16 significant digits): {} [{}]",
        if display_ok { "match" } else { "differs" },
        display.join(", ")
    );
    let detail = format!(
        "executions {} (want 3), {:.3}s (limit {}s){}",
        r.executions,
        elapsed.as_secs_f64(),
        CRIT1_TIME.as_secs(),
        if bad.is_empty() {
            String::new()
        } else {
            format!(", residues: {}", bad.join("; "))
        }
    );
    check(r.executions == 3 && elapsed < CRIT1_TIME && bad.is_empty(), detail)
}

fn ro_off_false_negatives() -> Outcome {
    let e = corpus_entry("diff-roots").unwrap();
    let p = e.program();
    let cfg = eval_cfg();
    let x = [1e99];
    let run = run_backend(&p, &x, BackendId::Repo, &RunOptions::default()).map_err(|e| e.to_string())?;
    let test = compute_warnings(&run.trace, &cfg.warn);
    let truth = oracle_warnings(&p, &x, &cfg).map_err(|e| e.to_string())?;
    let card = score(&test, &truth, None).map_err(|e| e.to_string())?;
    let fn_ops: Vec<u64> = card
        .diffs
        .iter()
        .filter(|d| d.kind == DiffKind::FalseNegative)
        .map(|d| d.op_id.0)
        .collect();
    check(
        card.false_positives == 0 && card.false_negatives == 2 && fn_ops == [3, 4],
        format!("FP {} FN {} at ops {:?}", card.false_positives, card.false_negatives, fn_ops),
    )
}

/// Normal doubles with a uniform exponent in `[-ex, ex]` and random sign.
fn normals(rng: &mut SplitMix64, ex: i32, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let e = (rng.next_u64() % (2 * ex as u64 + 1)) as i32 - ex;
            let s = rng.next_u64() >> 63;
            f64::from_bits((s << 63) | (((e + 1023) as u64) << 52) | (rng.next_u64() >> 12))
        })
        .collect()
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64_exact(x)
}

fn within_ulp(got: f64, truth: f64) -> bool {
    if truth == 0.0 {
        got == 0.0
    } else {
        (got - truth).abs() <= ulp_of(truth)
    }
}

fn eft_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::seed_from_u64(0xE7F);
    let xs = normals(&mut rng, 60, EFT_CASES);
    let ys = normals(&mut rng, 60, EFT_CASES);
    let mut failures = 0usize;
    for (&a, &b) in xs.iter().zip(&ys) {
        let s = two_sum(a, b);
        if q(s.result) + q(s.mu) != q(a) + q(b) {
            failures += 1;
        }
        let p = two_prod(a, b);
        if q(p.result) + q(p.mu) != q(a) * q(b) {
            failures += 1;
        }
    }

    let mut approx = 0usize;
    for (&x, &y) in xs.iter().zip(&ys).take(DIV_SQRT_CASES) {
        let qt = x / y;
        let truth = big(x)
            .div(&big(y), TRUTH_BITS)
            .and_then(|r| r.ok())
            .and_then(|t| t.sub(&big(qt), TRUTH_BITS).ok())
            .map(|d| d.to_f64());
        if !truth.is_some_and(|t| within_ulp(div_err(x, y, qt), t)) {
            approx += 1;
        }
        let x = x.abs();
        let s = x.sqrt();
        let truth = big(x)
            .sqrt(TRUTH_BITS)
            .and_then(|r| r.ok())
            .and_then(|t| t.sub(&big(s), TRUTH_BITS).ok())
            .map(|d| d.to_f64());
        if !truth.is_some_and(|t| within_ulp(sqrt_err(x, s), t)) {
            approx += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        failures == 0 && approx == 0 && elapsed < CRIT3_TIME,
        format!(
            "{EFT_CASES} sum/prod cases, {failures} inexact; {DIV_SQRT_CASES} div/sqrt cases, {approx} beyond 1 ulp; {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            CRIT3_TIME.as_secs()
        ),
    )
}

fn corpus_ordering() -> Outcome {
    let reports = corpus_reports();
    let (mut repo, mut fixed, mut buggy) = (0, 0, 0);
    let mut rows = Vec::new();
    for r in reports {
        let t = (total(r, "repo+ro"), total(r, "eftsan-fixed"), total(r, "eftsan-buggy"));
        repo += t.0;
        fixed += t.1;
        buggy += t.2;
        rows.push(format!("{} {}/{}/{}", r.name, t.0, t.1, t.2));
    }
    let strict = |name: &str| {
        reports
            .iter()
            .find(|r| r.name == name)
            .is_some_and(|r| total(r, "repo+ro") < total(r, "eftsan-fixed"))
    };
    let ok = repo <= fixed && fixed <= buggy && repo == 0 && strict("cancel-mul") && strict("sin-reduce");
    check(
        ok,
        format!(
            "false reports repo+ro {repo}, eftsan-fixed {fixed}, eftsan-buggy {buggy} ({})",
            rows.join(", ")
        ),
    )
}

fn ro_never_hurts() -> Outcome {
    let mut problems = Vec::new();
    let mut rows = Vec::new();
    for r in corpus_reports() {
        let s = r.subject("repo+ro").unwrap();
        let initial = s.initial.as_ref().unwrap().total();
        let last = s.card.total();
        if initial > 0 {
            rows.push(format!("{} {initial}->{last}", r.name));
            if last > initial {
                problems.push(format!("{} got worse", r.name));
            }
        }
        if s.max_executions > 20 {
            problems.push(format!("{} used {} executions", r.name, s.max_executions));
        }
        if matches!(r.name.as_str(), "diff-roots" | "cancel-mul") && last != 0 {
            problems.push(format!("{} left {last} false reports", r.name));
        }
        if r.name == "diff-roots" && (s.max_executions != 3 || s.executions != 3 * r.inputs as u64) {
            problems.push(format!(
                "diff-roots executions max {} total {}",
                s.max_executions, s.executions
            ));
        }
    }
    check(
        problems.is_empty(),
        format!("{}{}", rows.join(", "), if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }),
    )
}

fn oracle_stability() -> Outcome {
    let cfg = EvalConfig::default();
    let mut unstable = Vec::new();
    let mut residues = 0;
    for e in bundled_corpus() {
        let c = oracle_check(e.name, &e.program(), &e.input_vectors(), ORACLE_BITS, &cfg).map_err(|e| e.to_string())?;
        residues += c.residue_mismatches;
        if !c.stable() {
            unstable.push(format!("{} ({} inputs)", e.name, c.warning_mismatches.len()));
        }
    }
    check(
        unstable.is_empty(),
        format!(
            "{ORACLE_BITS} vs {} bits: warning sets {}; {residues} residues differ in the last bits",
            2 * ORACLE_BITS,
            if unstable.is_empty() { "identical".to_string() } else { format!("differ on {}", unstable.join(", ")) }
        ),
    )
}

fn same(a: &Trace, b: &Trace) -> bool {
    a.len() == b.len() && a.same_actuals(b)
}

fn isolation() -> Outcome {
    let backends = [
        BackendId::Repo,
        BackendId::EftsanFixed,
        BackendId::EftsanBuggy,
        BackendId::ORACLE,
        BackendId::DoubleDouble,
    ];
    let opts = RunOptions::default();
    let dcfg = DriverConfig::default();
    let mut runs = 0usize;
    let mut broken = Vec::new();
    for e in bundled_corpus() {
        let p = e.program();
        let inputs = e.input_vectors();
        let per_input = par::map(Schedule::Parallel, &inputs, |x| {
            let base = run_backend(&p, x, BackendId::Repo, &opts).unwrap();
            let mut ok = true;
            for b in backends {
                let r = run_backend(&p, x, b, &opts).unwrap();
                ok &= r.output.to_bits() == base.output.to_bits() && same(&r.trace, &base.trace);
            }
            let d = repo_drive(&p, e.source, x, &dcfg).unwrap();
            for out in [&d.initial, &d.outcome] {
                ok &= out.output.to_bits() == base.output.to_bits() && same(&out.trace, &base.trace);
            }
            ok
        });
        runs += inputs.len() * (backends.len() + 2);
        let bad = per_input.iter().filter(|ok| !**ok).count();
        if bad > 0 {
            broken.push(format!("{} ({bad} inputs)", e.name));
        }
    }
    check(
        broken.is_empty(),
        format!(
            "{runs} runs compared against the machine trace{}",
            if broken.is_empty() { String::new() } else { format!("; actuals differ on {}", broken.join(", ")) }
        ),
    )
}

fn reduction_false_positives(round_trick: bool) -> Result<usize, String> {
    let e = corpus_entry("sin-reduce").unwrap();
    let cfg = EvalConfig {
        round_trick,
        ..eval_cfg()
    };
    let r = evaluate(
        e.name,
        e.source,
        &e.program(),
        &e.input_vectors(),
        &[Subject::with_ro(BackendId::Repo)],
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    Ok(r.subjects[0]
        .card
        .diffs
        .iter()
        .filter(|d| d.kind == DiffKind::FalsePositive && d.op_id < OpId(REDUCTION_OPS))
        .count())
}

fn rounding_trick() -> Outcome {
    let on = reduction_false_positives(true)?;
    let off = reduction_false_positives(false)?;
    check(
        on == 0 && off >= 1,
        format!("false positives in the reduction: detection on {on}, off {off}"),
    )
}

fn random_state(rng: &mut SplitMix64, i: usize) -> RunState {
    let mut s = RunState::new(format!("{:016x}", rng.next_u64()));
    s.run_count = if i.is_multiple_of(7) { u64::MAX } else { rng.next_u64() % 1000 };
    let ids = |rng: &mut SplitMix64| {
        let n = rng.next_u64() % 12;
        (0..n).map(|_| OpId(rng.next_u64() % 5000)).collect::<Vec<_>>()
    };
    s.silent_ops.extend(ids(rng));
    s.probe_ops.extend(ids(rng));
    s.max_err_ops.extend(ids(rng));
    s.snd_err_ops.extend(ids(rng));
    for id in ids(rng) {
        s.temp_res_override.insert(id, f64::from_bits(rng.next_u64()));
    }
    for id in ids(rng) {
        s.res_override.insert(id, f64::from_bits(rng.next_u64()));
    }
    s
}

fn state_round_trip() -> Outcome {
    let mut rng = SplitMix64::seed_from_u64(0x57A7E);
    let mut failures = 0;
    for i in 0..STATE_CASES {
        let text = save_state(&random_state(&mut rng, i));
        match load_state(&text) {
            Ok(s) if save_state(&s) == text => {}
            _ => failures += 1,
        }
    }
    check(failures == 0, format!("{STATE_CASES} random states, {failures} not byte-identical after save/load/save"))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, diff_roots),
        (2, ro_off_false_negatives),
        (3, eft_exactness),
        (4, corpus_ordering),
        (5, ro_never_hurts),
        (6, oracle_stability),
        (7, isolation),
        (8, rounding_trick),
        (9, state_round_trip),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {n}: PASS {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("criterion {n}: FAIL {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {n}: FAIL panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
