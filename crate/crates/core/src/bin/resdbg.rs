use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use residue_core::backends::BackendId;
use residue_core::lang::{generate_inputs, parse_input_file, parse_literal, parse_program, InputSpec, Program};
use residue_core::par::Schedule;
use residue_core::report::{
    bundled_corpus, corpus_entry, evaluate, oracle_check, render_entry, render_oracle_check, render_run,
    render_summary, run_program, EvalConfig, Subject, WarnConfig, ZeroActual,
};
use residue_core::residue::EngineConfig;
use residue_core::ro::DEFAULT_CAP;

#[derive(Debug, Parser)]
#[command(name = "resdbg", version, about = "Residue-based floating-point debugger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one program under one backend and score it against the oracle.
    Run(RunArgs),
    /// Score two backends against the oracle on the same program.
    Compare(CompareArgs),
    /// Run every bundled corpus entry under the standard backends.
    Corpus(CorpusArgs),
    /// Check that the oracle's warnings are stable when precision doubles.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ZeroUlp {
    Infinite,
    MinSubnormal,
}

#[derive(Debug, Args)]
struct Common {
    /// Warn at or above 2^E ulps.
    #[arg(long, value_name = "E", default_value_t = 45)]
    warn_ulps: i32,
    /// Condition ratio above which a residue counts as zero.
    #[arg(long, value_name = "R", default_value_t = 2f64.powi(40))]
    cond_threshold: f64,
    /// Ulp distance for a residue to count as absorbed.
    #[arg(long, value_name = "N", default_value_t = 4.0)]
    absorb_ulps: f64,
    /// How a nonzero residue on a zero value is measured.
    #[arg(long, value_enum, default_value_t = ZeroUlp::Infinite)]
    zero_ulp: ZeroUlp,
    /// Rounding-trick recognition in the residue engine.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    round_trick: Switch,
    /// Ground-truth backend.
    #[arg(long, default_value = "oracle:512")]
    oracle: BackendId,
    /// Skip ops whose oracle ulp count is within 2^M of the threshold.
    #[arg(long, value_name = "M")]
    margin: Option<i32>,
    /// Maximum executions per input when re-executing.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_CAP)]
    max_reexec: u32,
    /// Persist re-execution state under DIR/<program>/<inputKey>.v1.
    #[arg(long, value_name = "DIR")]
    state_dir: Option<PathBuf>,
    /// Write the structured (JSON) report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Measure time spent in the residue hook.
    #[arg(long)]
    emit_timing: bool,
    /// Exit with status 1 on any false report.
    #[arg(long)]
    strict: bool,
    /// Run inputs on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn eval_config(&self) -> Result<EvalConfig, String> {
        let engine = EngineConfig {
            cond_threshold: self.cond_threshold,
            absorb_ulps: self.absorb_ulps,
            warn_ulps: self.warn_ulps,
            ..EngineConfig::default()
        };
        engine.validate().map_err(|e| e.to_string())?;
        if self.max_reexec == 0 {
            return Err("--max-reexec must be at least 1".into());
        }
        Ok(EvalConfig {
            engine,
            warn: WarnConfig {
                warn_ulps: self.warn_ulps,
                zero_actual: match self.zero_ulp {
                    ZeroUlp::Infinite => ZeroActual::Infinite,
                    ZeroUlp::MinSubnormal => ZeroActual::MinSubnormal,
                },
            },
            round_trick: self.round_trick.on(),
            oracle: self.oracle,
            margin: self.margin,
            cap: self.max_reexec,
            state_dir: self.state_dir.clone(),
            timing: self.emit_timing,
            schedule: if self.sequential {
                Schedule::Sequential
            } else {
                Schedule::Parallel
            },
        })
    }
}

#[derive(Debug, Args)]
struct Source {
    /// Program file, or the name of a bundled corpus entry.
    program: Option<String>,
    /// Bundled corpus entry (alternative to PROGRAM).
    #[arg(long, conflicts_with = "program")]
    corpus: Option<String>,
    /// Inputs: `x=1e99,y=2`, an input file, or omitted for the entry's
    /// seeded inputs.
    #[arg(long, value_name = "INPUTS")]
    inputs: Option<String>,
    /// Seeded input specification (JSON).
    #[arg(long, value_name = "FILE", conflicts_with = "inputs")]
    input_spec: Option<PathBuf>,
    /// Use only the first N input vectors.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "repo")]
    backend: BackendId,
    /// Re-execution (engine backends only).
    #[arg(long, value_enum, default_value_t = Switch::On)]
    ro: Switch,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    a: BackendId,
    #[arg(long)]
    b: BackendId,
    /// Re-execution for the `repo` backend.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    ro: Switch,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Restrict to these entries.
    #[arg(long = "only", value_name = "NAME")]
    only: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    source: Source,
    /// Lower precision; compared against twice this.
    #[arg(long, default_value_t = 512)]
    bits: u32,
    /// Check every bundled entry.
    #[arg(long, conflicts_with_all = ["program", "corpus"])]
    all: bool,
    #[command(flatten)]
    common: Common,
}

struct Loaded {
    name: String,
    source: String,
    program: Program,
    inputs: Vec<Vec<f64>>,
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn inline_inputs(text: &str, program: &Program) -> Result<Vec<Vec<f64>>, String> {
    let params = program.params();
    let mut v = vec![None; params.len()];
    for (i, item) in text.split(',').enumerate() {
        let (slot, value) = match item.split_once('=') {
            Some((name, value)) => {
                let slot = params
                    .iter()
                    .position(|p| p == name.trim())
                    .ok_or_else(|| format!("no parameter named '{}'", name.trim()))?;
                (slot, value)
            }
            None => (i, item),
        };
        let x = parse_literal(value.trim()).ok_or_else(|| format!("bad number '{}'", value.trim()))?;
        *v.get_mut(slot).ok_or("too many inputs")? = Some(x);
    }
    let v: Option<Vec<f64>> = v.into_iter().collect();
    v.map(|v| vec![v]).ok_or_else(|| format!("expected values for {}", params.join(", ")))
}

fn load(src: &Source) -> Result<Loaded, String> {
    let entry = match (&src.corpus, &src.program) {
        (Some(name), _) => Some(corpus_entry(name).ok_or_else(|| format!("no corpus entry '{name}'"))?),
        (None, Some(p)) if !Path::new(p).exists() => {
            let name = p.strip_suffix(".fpk").unwrap_or(p);
            Some(corpus_entry(name).ok_or_else(|| format!("{p}: no such file or corpus entry"))?)
        }
        (None, Some(_)) => None,
        (None, None) => return Err("give a PROGRAM or --corpus NAME".into()),
    };
    let (name, source, spec) = match &entry {
        Some(e) => (e.name.to_string(), e.source.to_string(), Some(e.inputs.clone())),
        None => {
            let path = Path::new(src.program.as_deref().unwrap());
            let name = path.file_stem().map_or("program".into(), |s| s.to_string_lossy().into_owned());
            (name, read(path)?, None)
        }
    };
    let program = parse_program(&source).map_err(|e| format!("{name}: {e}"))?;
    let mut inputs = if let Some(text) = &src.inputs {
        if Path::new(text).exists() {
            parse_input_file(&read(Path::new(text))?).map_err(|e| e.to_string())?
        } else {
            inline_inputs(text, &program)?
        }
    } else if let Some(path) = &src.input_spec {
        let spec: InputSpec = serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        generate_inputs(&spec).map_err(|e| e.to_string())?
    } else if let Some(spec) = spec {
        generate_inputs(&spec).map_err(|e| e.to_string())?
    } else {
        return Err("no inputs: pass --inputs or --input-spec".into());
    };
    if let Some(n) = src.limit {
        inputs.truncate(n);
    }
    if let Some(bad) = inputs.iter().find(|v| v.len() != program.params().len()) {
        return Err(format!(
            "{name} takes {} inputs, got {}",
            program.params().len(),
            bad.len()
        ));
    }
    Ok(Loaded {
        name,
        source,
        program,
        inputs,
    })
}

fn write_report<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), String> {
    if let Some(path) = path {
        let json = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        fs::write(path, json + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn status(strict: bool, false_reports: usize) -> ExitCode {
    if strict && false_reports > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn subject(backend: BackendId, ro: bool) -> Subject {
    Subject {
        backend,
        ro: ro && backend == BackendId::Repo,
    }
}

fn run(cmd: Command) -> Result<ExitCode, String> {
    match cmd {
        Command::Run(a) => {
            let cfg = a.common.eval_config()?;
            let l = load(&a.source)?;
            let r = run_program(&l.name, &l.source, &l.program, &l.inputs, a.backend, a.ro.on(), &cfg)
                .map_err(|e| e.to_string())?;
            print!("{}", render_run(&r));
            write_report(&a.common.report, &r)?;
            Ok(status(a.common.strict, r.false_reports()))
        }
        Command::Compare(a) => {
            let cfg = a.common.eval_config()?;
            let l = load(&a.source)?;
            let subjects = [subject(a.a, a.ro.on()), subject(a.b, a.ro.on())];
            let r = evaluate(&l.name, &l.source, &l.program, &l.inputs, &subjects, &cfg).map_err(|e| e.to_string())?;
            print!("{}", render_entry(&r));
            let (ta, tb) = (r.subjects[0].card.total(), r.subjects[1].card.total());
            let verdict = match ta.cmp(&tb) {
                std::cmp::Ordering::Less => format!("{} has fewer false reports ({ta} < {tb})", subjects[0]),
                std::cmp::Ordering::Greater => format!("{} has fewer false reports ({tb} < {ta})", subjects[1]),
                std::cmp::Ordering::Equal => format!("tie ({ta} false reports each)"),
            };
            println!("{verdict}");
            write_report(&a.common.report, &r)?;
            Ok(status(a.common.strict, ta + tb))
        }
        Command::Corpus(a) => {
            let cfg = a.common.eval_config()?;
            let entries: Vec<_> = bundled_corpus()
                .into_iter()
                .filter(|e| a.only.is_empty() || a.only.iter().any(|n| n == e.name))
                .collect();
            if entries.is_empty() {
                return Err("no matching corpus entries".into());
            }
            let mut reports = Vec::new();
            for e in &entries {
                let r = evaluate(e.name, e.source, &e.program(), &e.input_vectors(), &Subject::standard(), &cfg)
                    .map_err(|err| format!("{}: {err}", e.name))?;
                print!("{}", render_entry(&r));
                reports.push(r);
            }
            println!();
            print!("{}", render_summary(&reports));
            write_report(&a.common.report, &reports)?;
            let total = reports.iter().flat_map(|r| &r.subjects).map(|s| s.card.total()).sum();
            Ok(status(a.common.strict, total))
        }
        Command::OracleCheck(a) => {
            let cfg = a.common.eval_config()?;
            let loaded = if a.all {
                bundled_corpus()
                    .into_iter()
                    .map(|e| Loaded {
                        name: e.name.to_string(),
                        source: e.source.to_string(),
                        program: e.program(),
                        inputs: e.input_vectors(),
                    })
                    .collect()
            } else {
                vec![load(&a.source)?]
            };
            let mut checks = Vec::new();
            for l in &loaded {
                let c = oracle_check(&l.name, &l.program, &l.inputs, a.bits, &cfg).map_err(|e| e.to_string())?;
                print!("{}", render_oracle_check(&c));
                checks.push(c);
            }
            write_report(&a.common.report, &checks)?;
            let unstable = checks.iter().filter(|c| !c.stable()).count();
            Ok(if unstable > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("resdbg: {e}");
            ExitCode::from(2)
        }
    }
}
