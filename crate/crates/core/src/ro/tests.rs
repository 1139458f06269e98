use super::*;
use crate::lang::parse_program;

const DIFF_ROOTS: &str = include_str!("../../corpus/diff-roots.fpk");

fn values(out: &RunOutcome) -> Vec<f64> {
    out.residues.iter().map(|r| r.value).collect()
}

#[test]
fn diff_roots_takes_three_executions() {
    let p = parse_program(DIFF_ROOTS).unwrap();
    let r = repo_drive(&p, DIFF_ROOTS, &[1e99], &DriverConfig::default()).unwrap();
    assert_eq!(r.executions, 3);
    assert_eq!(r.phases, 1);
    assert!(!r.truncated);
    assert_eq!(
        values(&r.outcome),
        vec![
            1.0,
            1.3144752779492117e32,
            1.3144752779492117e32,
            1.5811388300841897e-50,
            2.5000000000000006e-100
        ]
    );
    assert_eq!(r.state.res_override.get(&OpId(3)), Some(&1.5811388300841897e-50));
    assert!(r.outcome.absorptions.is_empty());
    assert_eq!(r.initial.warnings.len(), 0);
    let warned: Vec<OpId> = r.outcome.warnings.ids().collect();
    assert_eq!(warned, vec![OpId(3), OpId(4)]);
}

#[test]
fn silenced_run_probes_the_detecting_op() {
    let p = parse_program(DIFF_ROOTS).unwrap();
    let cfg = DriverConfig::default();
    let mut state = RunState::new("k");
    state.silent_ops.extend([OpId(1), OpId(2)]);
    state.probe_ops.insert(OpId(3));
    let out = execute_run(&p, &[1e99], &mut state, &cfg).unwrap();
    let e = values(&out);
    assert_eq!(e[1], 0.0);
    assert_eq!(e[2], 1.5811388300841897e-50);
    assert_eq!(out.temp_res_override.get(&OpId(3)), Some(&1.5811388300841897e-50));
    assert_eq!(state.run_count, 1);
}

#[test]
fn resolve_stops_when_probes_are_clean() {
    let p = parse_program(DIFF_ROOTS).unwrap();
    let cfg = DriverConfig::default();
    let mut session = Session::new(&p, &[1e99], &cfg).unwrap();
    let mut state = RunState::new("k");
    state.silent_ops.extend([OpId(1), OpId(2)]);
    state.probe_ops.insert(OpId(3));
    let (temp, cut) = session.resolve(&mut state, 19).unwrap();
    assert!(!cut);
    assert_eq!(session.executions, 1);
    assert_eq!(temp.len(), 1);
}

#[test]
fn no_absorption_means_one_execution() {
    let src = "(define (f x) (* (+ x 1) 3))";
    let p = parse_program(src).unwrap();
    let r = repo_drive(&p, src, &[0.1], &DriverConfig::default()).unwrap();
    assert_eq!((r.executions, r.phases), (1, 0));
    assert_eq!(r.initial, r.outcome);
}

#[test]
fn duplicated_cancellations_resolve_together() {
    let src = "(define (f x) (let* ([b (sqrt x)] [c (sqrt (+ x 1))]) (+ (- c b) (- c b))))";
    let p = parse_program(src).unwrap();
    let r = repo_drive(&p, src, &[1e99], &DriverConfig::default()).unwrap();
    assert_eq!(r.initial.absorptions.len(), 2);
    assert_eq!(r.executions, 3);
    assert_eq!(r.outcome.residues.last().unwrap().value, 2.0 * 1.5811388300841897e-50);
}

#[test]
fn cap_bounds_executions() {
    let p = parse_program(DIFF_ROOTS).unwrap();
    for cap in 1..=3 {
        let cfg = DriverConfig {
            cap,
            ..DriverConfig::default()
        };
        let r = repo_drive(&p, DIFF_ROOTS, &[1e99], &cfg).unwrap();
        assert!(r.executions <= cap);
        assert_eq!(r.truncated, cap < 3);
        if cap < 3 {
            assert_eq!(r.outcome, r.initial);
        }
    }
}

#[test]
fn sessions_reject_divergent_traces() {
    let p = parse_program(DIFF_ROOTS).unwrap();
    let cfg = DriverConfig::default();
    let mut session = Session::new(&p, &[1e99], &cfg).unwrap();
    session.reference = Some(vec![FpOp::Add, FpOp::Sqrt, FpOp::Sqrt, FpOp::Add]);
    let err = session.execute(&mut RunState::new("k")).unwrap_err();
    assert!(matches!(err, RoError::Nondeterminism { op: 3, .. }), "{err}");
}

#[test]
fn shadow_backends_cannot_drive() {
    let p = parse_program(DIFF_ROOTS).unwrap();
    let cfg = DriverConfig {
        backend: BackendId::ORACLE,
        ..DriverConfig::default()
    };
    assert!(matches!(
        repo_drive(&p, DIFF_ROOTS, &[1e99], &cfg),
        Err(RoError::Backend(_))
    ));
}

#[test]
fn state_is_persisted_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = parse_program(DIFF_ROOTS).unwrap();
    let cfg = DriverConfig {
        state_dir: Some((dir.path().to_path_buf(), "diff-roots".into())),
        ..DriverConfig::default()
    };
    let r = repo_drive(&p, DIFF_ROOTS, &[1e99], &cfg).unwrap();
    let path = state_path(dir.path(), "diff-roots", &r.state.input_key);
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("resdbg-state v1\n"));
    assert!(text.contains("runs 3\n"));
    assert!(text.contains("override 3 3597A9B873C4B28B\n"));
    assert_eq!(load_state(&text).unwrap().res_override, r.state.res_override);
}
