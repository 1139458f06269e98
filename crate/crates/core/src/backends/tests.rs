use super::*;
use crate::lang::{parse_program, FpOp};

const DIFF_ROOTS: &str = include_str!("../../corpus/diff-roots.fpk");

fn prog(src: &str) -> Program {
    parse_program(src).unwrap()
}

fn residues(run: &BackendRun) -> Vec<f64> {
    run.trace.records.iter().map(|r| r.residue).collect()
}

fn run(p: &Program, x: &[f64], b: BackendId) -> BackendRun {
    run_backend(p, x, b, &RunOptions::default()).unwrap()
}

#[test]
fn backend_ids_round_trip() {
    for b in [
        BackendId::Repo,
        BackendId::EftsanFixed,
        BackendId::EftsanBuggy,
        BackendId::Oracle(1024),
        BackendId::DoubleDouble,
    ] {
        assert_eq!(b.to_string().parse::<BackendId>(), Ok(b));
    }
    assert_eq!("oracle".parse(), Ok(BackendId::ORACLE));
    assert_eq!("double-double".parse(), Ok(BackendId::DoubleDouble));
    assert_eq!("oracle:64".parse::<BackendId>(), Err(BackendParseError::Precision(64)));
    assert!(matches!("mpfr".parse::<BackendId>(), Err(BackendParseError::Unknown(_))));
}

#[test]
fn diff_roots_repo_first_run() {
    let p = prog(DIFF_ROOTS);
    let r = run(&p, &[1e99], BackendId::Repo);
    let e = residues(&r);
    assert_eq!(e[0], 1.0);
    assert_eq!(e[1], 1.3144752779492117e32);
    assert_eq!(e[2], 1.3144752779492117e32);
    assert_eq!(e[3], 0.0);
    assert_eq!(e[4], 0.0);
    assert!(r.residues[2].is_absorbed);
    assert!(r.residues[3].is_zero && r.residues[3].is_absorbed);
    assert_eq!(
        r.absorptions,
        vec![AbsorptionRecord {
            ix: Some(OpId(2)),
            jx: Some(OpId(0)),
            iy: Some(OpId(1)),
            jy: None,
            k: OpId(3),
        }]
    );
}

#[test]
fn diff_roots_oracle_matches_ideal_values() {
    let p = prog(DIFF_ROOTS);
    let e = residues(&run(&p, &[1e99], BackendId::ORACLE));
    assert_eq!(e[0], 1.0);
    assert_eq!(format!("{:.8e}", e[1]), "1.31447528e32");
    assert_eq!(e[2], e[1]);
    assert_eq!(e[3], 1.5811388300841897e-50);
    // The ideal square is a hair below 2.5e-100.
    assert!(e[4] <= 2.5e-100 && e[4] > 2.4999999999999e-100);
}

#[test]
fn diff_roots_double_double_loses_y() {
    // 106 bits cannot hold 1e99 + 1 next to the roots' tails: the shadow of
    // y cancels to zero, unlike the oracle's.
    let p = prog(DIFF_ROOTS);
    let e = residues(&run(&p, &[1e99], BackendId::DoubleDouble));
    assert_eq!(e[0], 1.0);
    assert_eq!(e[3], 0.0);
}

#[test]
fn overridden_first_order_product_is_zero() {
    let p = prog(DIFF_ROOTS);
    let ro = RoControls {
        overrides: [(OpId(3), 1.5811388300841897e-50)].into_iter().collect(),
        ..RoControls::default()
    };
    let opts = RunOptions {
        ro: Some(&ro),
        ..RunOptions::default()
    };
    let repo = run_backend(&p, &[1e99], BackendId::Repo, &opts).unwrap();
    let fixed = run_backend(&p, &[1e99], BackendId::EftsanFixed, &opts).unwrap();
    assert_eq!(repo.residues[4].value, 2.5000000000000006e-100);
    assert_eq!(fixed.residues[4].value, 0.0);
}

#[test]
fn silencing_and_probing() {
    let p = prog(DIFF_ROOTS);
    let ro = RoControls {
        silent: [OpId(1), OpId(2)].into_iter().collect(),
        probe: [OpId(3)].into_iter().collect(),
        ..RoControls::default()
    };
    let opts = RunOptions {
        ro: Some(&ro),
        ..RunOptions::default()
    };
    let r = run_backend(&p, &[1e99], BackendId::Repo, &opts).unwrap();
    assert_eq!(r.residues[1].value, 0.0);
    assert_eq!(r.residues[3].value, 1.5811388300841897e-50);
    assert_eq!(r.temp_overrides.get(&OpId(3)), Some(&1.5811388300841897e-50));
    assert!(r.absorptions.is_empty());
}

#[test]
fn oracle_precision_is_stable() {
    let p = prog(DIFF_ROOTS);
    for x in [1e99, 1e9, 3.0, 12345.678] {
        let hi = residues(&run(&p, &[x], BackendId::Oracle(1024)));
        assert_eq!(residues(&run(&p, &[x], BackendId::Oracle(512))), hi);
    }
    let hi = residues(&run(&p, &[1e9], BackendId::Oracle(1024)));
    assert_eq!(residues(&run(&p, &[1e9], BackendId::Oracle(128))), hi);
}

const MIXED: &str = "
(define (g x y)
  (let* ([s (- x y)]
         [q (/ s (+ y 0.3))]
         [m (* q (- x 0.7))]
         [r (sqrt (fabs m))]
         [c (cast32to64 (cast64to32 (+ r x)))]
         [t (- (+ c 6755399441055744) 6755399441055744)])
    (while (< i 4) ((i 0 (+ i 1)) (acc t (+ (* acc 0.5) (neg q))))
      (- acc y))))
";

fn random_pairs(n: usize) -> Vec<[f64; 2]> {
    use rand_core::{RngCore, SeedableRng};
    let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(7);
    (0..n)
        .map(|_| {
            let mut draw = || {
                let m = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                let e = (rng.next_u64() % 40) as i32 - 20;
                let s = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + m) * 2f64.powi(e)
            };
            [draw(), draw()]
        })
        .collect()
}

#[test]
fn backends_never_change_actual_values() {
    let p = prog(MIXED);
    let all = [
        BackendId::Repo,
        BackendId::EftsanFixed,
        BackendId::EftsanBuggy,
        BackendId::Oracle(256),
        BackendId::DoubleDouble,
    ];
    for xy in random_pairs(50) {
        let base = run(&p, &xy, BackendId::Repo);
        for b in all {
            let r = run(&p, &xy, b);
            assert_eq!(r.output.to_bits(), base.output.to_bits());
            assert!(r.trace.same_actuals(&base.trace), "{b} at {xy:?}");
        }
    }
}

#[test]
fn baselines_differ_only_at_their_op_classes() {
    let p = prog(MIXED);
    for xy in random_pairs(200) {
        let repo = run(&p, &xy, BackendId::Repo);
        let fixed = run(&p, &xy, BackendId::EftsanFixed);
        let buggy = run(&p, &xy, BackendId::EftsanBuggy);
        // Compare the residue each op introduces or amplifies locally, not
        // downstream effects: the first differing op must be of the right class.
        let first = |a: &BackendRun, b: &BackendRun| {
            a.residues
                .iter()
                .zip(&b.residues)
                .position(|(x, y)| x.value.to_bits() != y.value.to_bits())
                .map(|i| a.trace.records[i].op)
        };
        if let Some(op) = first(&buggy, &fixed) {
            assert!(matches!(op, FpOp::Sub | FpOp::Div), "{op} at {xy:?}");
        }
        if let Some(op) = first(&repo, &fixed) {
            assert!(
                matches!(
                    op,
                    FpOp::Mul | FpOp::Fabs | FpOp::Sqrt | FpOp::Cast64To32 | FpOp::Sub
                ),
                "{op} at {xy:?}"
            );
        }
    }
}

#[test]
fn double_double_accumulation_tracks_oracle() {
    let src = "(define (acc x) (while (< i 1000000) ((i 0 (+ i 1)) (s 0 (+ s x))) s))";
    let p = prog(src);
    let dd = run(&p, &[0.1], BackendId::DoubleDouble);
    let or = run(&p, &[0.1], BackendId::Oracle(256));
    let sum = dd.output.abs();
    for (a, b) in dd.trace.records.iter().zip(&or.trace.records) {
        if a.op == FpOp::Add && a.args()[1] == 0.1 {
            assert!((a.residue - b.residue).abs() <= sum * 2f64.powi(-53));
        }
    }
}

#[test]
fn poisoning_propagates() {
    let p = prog("(define (f x) (- (* x x) (* x x)))");
    for b in [BackendId::Repo, BackendId::ORACLE, BackendId::DoubleDouble] {
        let e = residues(&run(&p, &[1e300], b));
        assert!(e.iter().all(|v| v.is_nan()), "{b}: {e:?}");
    }
}

#[test]
fn timing_is_reported_on_request() {
    let p = prog(DIFF_ROOTS);
    let opts = RunOptions {
        timing: true,
        ..RunOptions::default()
    };
    let r = run_backend(&p, &[2.0], BackendId::Repo, &opts).unwrap();
    assert!(r.hook_time.is_some());
    assert!(run(&p, &[2.0], BackendId::Repo).hook_time.is_none());
}
