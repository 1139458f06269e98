//! Human-readable renderings. The structured form of every report is its
//! JSON serialization.

use std::fmt::Write;

use super::eval::{EntryReport, OracleCheck};
use super::run::RunReport;
use super::warnings::{DiffKind, ScoreCard};

fn ulps(n: f64) -> String {
    if n.is_infinite() {
        "inf".to_string()
    } else if n.is_nan() {
        "poisoned".to_string()
    } else if n == 0.0 {
        "0".to_string()
    } else {
        format!("2^{:.1}", n.log2())
    }
}

fn card_line(card: &ScoreCard) -> String {
    format!(
        "FP {} FN {} (excluded {})",
        card.false_positives, card.false_negatives, card.excluded
    )
}

pub fn render_run(r: &RunReport) -> String {
    let mut s = String::new();
    let ro = if r.ro { "on" } else { "off" };
    let _ = writeln!(s, "program {}  backend {}  ro {}  oracle {}", r.program, r.backend, ro, r.oracle);
    for run in &r.runs {
        let xs: Vec<String> = run.inputs.iter().map(|x| format!("{x:e}")).collect();
        let _ = writeln!(
            s,
            "input {} [{}]  output {:e}  executions {}{}",
            run.index,
            xs.join(", "),
            run.output,
            run.executions,
            if run.truncated { " (cap reached)" } else { "" }
        );
        for w in &run.warnings {
            let _ = writeln!(
                s,
                "  warning op {} ({})  actual {:e}  residue {:e}  ulps {}",
                w.op_id.0,
                w.op,
                w.actual,
                w.residue,
                ulps(w.ulp_count)
            );
        }
        for d in &run.score.diffs {
            let kind = match d.kind {
                DiffKind::FalsePositive => "false positive",
                DiffKind::FalseNegative => "false negative",
            };
            let _ = writeln!(
                s,
                "  {kind} op {} ({})  ulps {} vs oracle {}",
                d.op_id.0,
                d.op,
                ulps(d.test_ulps),
                ulps(d.truth_ulps)
            );
        }
        if let Some(t) = run.hook_time {
            let _ = writeln!(s, "  hook time {:.3} ms", t.as_secs_f64() * 1e3);
        }
    }
    let _ = writeln!(
        s,
        "total {}  executions {}",
        card_line(&r.total),
        r.executions
    );
    s
}

pub fn render_entry(r: &EntryReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{}: {} inputs, {} oracle warnings ({})",
        r.name, r.inputs, r.oracle_warnings, r.oracle
    );
    for sub in &r.subjects {
        let _ = write!(s, "  {:<14} {}  warnings {}", sub.subject, card_line(&sub.card), sub.warnings);
        if let Some(init) = &sub.initial {
            let _ = write!(
                s,
                "  first run FP {} FN {}  executions max {}",
                init.false_positives, init.false_negatives, sub.max_executions
            );
        }
        if let Some(t) = sub.hook_time {
            let _ = write!(s, "  hook {:.3} ms", t.as_secs_f64() * 1e3);
        }
        s.push('\n');
    }
    s
}

/// One row per entry, one column per subject: false positives/negatives.
pub fn render_summary(reports: &[EntryReport]) -> String {
    let mut s = String::new();
    let Some(first) = reports.first() else {
        return s;
    };
    let _ = write!(s, "{:<14}", "entry");
    for sub in &first.subjects {
        let _ = write!(s, " {:>16}", sub.subject);
    }
    s.push('\n');
    let mut totals = vec![0usize; first.subjects.len()];
    for r in reports {
        let _ = write!(s, "{:<14}", r.name);
        for (i, sub) in r.subjects.iter().enumerate() {
            let cell = format!("{}/{}", sub.card.false_positives, sub.card.false_negatives);
            let _ = write!(s, " {cell:>16}");
            totals[i] += sub.card.total();
        }
        s.push('\n');
    }
    let _ = write!(s, "{:<14}", "total");
    for t in totals {
        let _ = write!(s, " {t:>16}");
    }
    s.push('\n');
    s
}

pub fn render_oracle_check(c: &OracleCheck) -> String {
    let mut s = format!(
        "{}: oracle:{} vs oracle:{} on {} inputs: ",
        c.name,
        c.bits,
        2 * c.bits,
        c.inputs
    );
    if c.stable() {
        s.push_str("warnings identical");
    } else {
        let _ = write!(s, "warnings differ on {} inputs", c.warning_mismatches.len());
    }
    let _ = writeln!(s, ", {} residues differ", c.residue_mismatches);
    for (i, ops) in &c.warning_mismatches {
        let ids: Vec<String> = ops.iter().map(|o| o.0.to_string()).collect();
        let _ = writeln!(s, "  input {i}: ops {}", ids.join(" "));
    }
    s
}
