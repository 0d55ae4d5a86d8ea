use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use orbitlab::harness::{emit_report, run_scenario_value, Format, Report};
use orbitlab::Error;

/// Scenario runner for the orbitlab constructions.
#[derive(Parser)]
#[command(name = "orbitlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    /// json, csv or text.
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: Format,
    /// Write `<scenario>.<ext>` files here instead of stdout.
    #[arg(long, env = "ORBITLAB_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Compare the JSON report with a stored one; a mismatch fails the run.
    #[arg(long, value_name = "EXPECTED_FILE")]
    check: Option<PathBuf>,
    /// rational or float.
    #[arg(long, default_value = "rational")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files.
    Run {
        #[arg(long = "scenario", value_name = "FILE", required = true)]
        scenarios: Vec<PathBuf>,
        /// Scenarios run in parallel on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: Format,
        #[arg(long, env = "ORBITLAB_OUT_DIR")]
        out_dir: Option<PathBuf>,
        #[arg(long, value_name = "EXPECTED_FILE")]
        check: Option<PathBuf>,
    },
    /// Back-and-forth construction of J with J(A) = B.
    Transport {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        disk: PathBuf,
        #[arg(long)]
        stages: usize,
        #[arg(long, default_value = "geometric:1/2")]
        eps_schedule: String,
        #[arg(long)]
        window: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Interleaved triangularization against the coordinate functionals.
    Triangularize {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        funcs: Option<PathBuf>,
        #[arg(long)]
        stages: usize,
        #[arg(long)]
        window: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Disks from null sequences and common disks of two nets.
    Disks {
        #[arg(long, value_name = "FILE", conflicts_with = "common")]
        from_null_seq: Option<PathBuf>,
        /// Vectors whose gauges are reported.
        #[arg(long, value_name = "FILE")]
        query: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        common: Option<Vec<PathBuf>>,
        #[arg(long, requires = "common")]
        targets: Option<PathBuf>,
        #[arg(long, requires = "common")]
        eps: Option<String>,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Shift operators, transitivity witnesses and the non-orbit refuter.
    Hypercyclic {
        #[command(subcommand)]
        action: HyperAction,
    },
}

#[derive(Subcommand)]
enum HyperAction {
    BuildShift {
        #[arg(long)]
        window: usize,
        #[arg(long)]
        us: Option<PathBuf>,
        #[arg(long)]
        p: Option<PathBuf>,
        #[arg(long)]
        disk: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[command(flatten)]
        out: Output,
    },
    Witness {
        #[arg(long)]
        window: usize,
        /// Operator JSON; defaults to I plus the weighted backward shift.
        #[arg(long)]
        t: Option<PathBuf>,
        #[arg(long)]
        p: Option<PathBuf>,
        /// JSON list of [x, y] pairs; random pairs from the seed otherwise.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value = "1/1000")]
        eps: String,
        #[arg(long, default_value_t = 64)]
        max_n: usize,
        #[command(flatten)]
        out: Output,
    },
    Refute {
        #[arg(long)]
        window: usize,
        #[arg(long)]
        b: Option<PathBuf>,
        /// JSON list of {"t": operator, "x": vector}; random candidates otherwise.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[command(flatten)]
        out: Output,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Usage, IO and schema problems; exit code 2.
type Failure = String;

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn opt_json(path: &Option<PathBuf>) -> Result<Option<Value>, Failure> {
    path.as_deref().map(read_json).transpose()
}

fn max_index(vectors: &Value) -> usize {
    let mut best = 0;
    let mut visit = |s: &str| {
        if let Some((i, _)) = s.split_once(':') {
            best = best.max(i.trim().parse().unwrap_or(0));
        }
    };
    fn walk(v: &Value, f: &mut dyn FnMut(&str)) {
        match v {
            Value::String(s) => f(s),
            Value::Array(xs) => xs.iter().for_each(|x| walk(x, f)),
            Value::Object(m) => m.values().for_each(|x| walk(x, f)),
            _ => {}
        }
    }
    walk(vectors, &mut visit);
    best
}

fn scenario(name: &str, out: &Output, window: usize, task: Value) -> Value {
    json!({ "name": name, "mode": out.mode, "window": window, "seed": out.seed, "task": task })
}

fn insert_opt(task: &mut Value, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        task[key] = v;
    }
}

fn run_one(doc: &Value) -> Result<Report, Failure> {
    run_scenario_value(doc).map_err(|e| format!("{}: {e}", e.code_name()))
}

fn deliver(report: &Report, format: Format, out_dir: Option<&Path>, check: Option<&Path>) -> Result<bool, Failure> {
    let mut passed = report.passed();
    if let Some(path) = check {
        let expected = read_json(path)?;
        let actual = serde_json::to_value(report).expect("report serializes");
        if expected != actual {
            eprintln!("{}: report differs from {}", report.scenario, path.display());
            passed = false;
        }
    }
    let bytes = emit_report(report, format);
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let file = dir.join(format!("{}.{}", report.scenario, format.extension()));
            fs::write(&file, &bytes).map_err(|e| format!("{}: {e}", file.display()))?;
            eprintln!("wrote {}", file.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes).map_err(|e| e.to_string())?;
        }
    }
    Ok(passed)
}

fn single(name: &str, out: &Output, window: usize, task: Value) -> Result<bool, Failure> {
    let report = run_one(&scenario(name, out, window, task))?;
    deliver(&report, out.format, out.out_dir.as_deref(), out.check.as_deref())
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Run { scenarios, jobs, format, out_dir, check } => {
            if check.is_some() && scenarios.len() != 1 {
                return Err("--check takes exactly one --scenario".to_string());
            }
            let docs: Vec<Value> = scenarios.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| e.to_string())?;
            let reports: Vec<Result<Report, Failure>> = pool.install(|| docs.par_iter().map(run_one).collect());
            let mut passed = true;
            for r in reports {
                passed &= deliver(&r?, format, out_dir.as_deref(), check.as_deref())?;
            }
            Ok(passed)
        }
        Command::Transport { a, b, p, disk, stages, eps_schedule, window, out } => {
            let (a, b) = (read_json(&a)?, read_json(&b)?);
            let window = window.unwrap_or_else(|| max_index(&a).max(max_index(&b)).max(1));
            let task = json!({
                "kind": "transport", "a": a, "b": b, "p": read_json(&p)?, "disk": read_json(&disk)?,
                "stages": stages, "eps_schedule": eps_schedule,
            });
            single("transport", &out, window, task)
        }
        Command::Triangularize { basis, funcs, stages, window, out } => {
            let basis = read_json(&basis)?;
            let window = window.unwrap_or_else(|| max_index(&basis).max(1));
            let mut task = json!({ "kind": "triangularize", "basis": basis, "stages": stages });
            insert_opt(&mut task, "funcs", opt_json(&funcs)?);
            single("triangularize", &out, window, task)
        }
        Command::Disks { from_null_seq, query, common, targets, eps, rounds, out } => {
            let queries = opt_json(&query)?.unwrap_or_else(|| json!([]));
            let task = match (from_null_seq, common) {
                (Some(seq), None) => {
                    json!({ "kind": "disk", "op": "null_sequence", "sequence": read_json(&seq)?, "queries": queries })
                }
                (None, Some(files)) => {
                    let targets = targets.ok_or_else(|| "--common needs --targets".to_string())?;
                    let eps = eps.ok_or_else(|| "--common needs --eps".to_string())?;
                    json!({
                        "kind": "disk", "op": "common", "a": read_json(&files[0])?, "b": read_json(&files[1])?,
                        "targets": read_json(&targets)?, "eps": eps, "rounds": rounds,
                    })
                }
                _ => return Err("give --from-null-seq FILE or --common A B".to_string()),
            };
            let window = max_index(&task).max(1);
            single("disks", &out, window, task)
        }
        Command::Hypercyclic { action } => match action {
            HyperAction::BuildShift { window, us, p, disk, samples, out } => {
                let mut task = json!({ "kind": "hypercyclic", "action": "build_shift", "samples": samples });
                insert_opt(&mut task, "us", opt_json(&us)?);
                insert_opt(&mut task, "p", opt_json(&p)?);
                insert_opt(&mut task, "disk", opt_json(&disk)?);
                single("build_shift", &out, window, task)
            }
            HyperAction::Witness { window, t, p, pairs, eps, max_n, out } => {
                let mut task = json!({ "kind": "hypercyclic", "action": "witness", "eps": eps, "max_n": max_n });
                insert_opt(&mut task, "t", opt_json(&t)?);
                insert_opt(&mut task, "p", opt_json(&p)?);
                insert_opt(&mut task, "pairs", opt_json(&pairs)?);
                single("witness", &out, window, task)
            }
            HyperAction::Refute { window, b, candidates, horizon, out } => {
                let mut task = json!({ "kind": "refute", "horizon": horizon });
                insert_opt(&mut task, "b", opt_json(&b)?);
                insert_opt(&mut task, "candidates", opt_json(&candidates)?);
                single("refute", &out, window, task)
            }
        },
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("orbitlab: {msg}");
            ExitCode::from(2)
        }
    }
}
