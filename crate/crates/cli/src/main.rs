//! `advisor`: train, sweep, evaluate and summarize runs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use advisor_core::diffcore::load_checkpoint;
use advisor_core::envs::{task_by_id, TaskSpec};
use advisor_core::evalharness::{
    build_report, evaluate_policy, read_run_record, run_training, sample_hps, write_run_record, HarnessConfig,
    HpSample, Metric, NetPolicy, RunRecord, TrainOptions,
};
use advisor_core::experts::{read_demonstrations, record_demonstrations, write_demonstrations, Demonstration};
use advisor_core::learners::{LearnError, MethodId, NetSpec};

#[derive(Parser)]
#[command(name = "advisor", version, about = "Imitation-gap experiments: ADVISOR, PPO and imitation baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its record.
    Train(RunArgs),
    /// Train `--n` runs of one method with independently sampled hyperparameters.
    Sweep(RunArgs),
    /// Evaluate a checkpoint on the validation episodes.
    Eval(EvalArgs),
    /// Fold run records into expected-max curves (one report per task).
    Report(ReportArgs),
    /// Record expert demonstrations.
    Demos(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (default: $ADVISOR_OUT, then the config, then `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of runs (sweep).
    #[arg(long)]
    n: Option<usize>,
    /// Concurrent runs (sweep).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    stage_split: Option<f64>,
    #[arg(long)]
    validation_episodes: Option<u64>,
    /// Demonstration file for demo-based methods.
    #[arg(long)]
    demos: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the task stored in the checkpoint.
    #[arg(long)]
    task: Option<String>,
    /// Experiment seed; defaults to the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validation episodes.
    #[arg(long, default_value_t = 200)]
    n: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Record files or directories (searched recursively for *.jsonl).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, default_value = "reward")]
    metric: String,
    /// Directory for `<task>.report.json`; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    task: String,
    /// Episodes to record.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a, false),
        Command::Sweep(a) => train(a, true),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
        Command::Demos(a) => demos(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn lookup_task(id: &str) -> Result<TaskSpec> {
    task_by_id(id).map_err(|e| anyhow!("{e}"))
}

fn lookup_method(id: &str) -> Result<MethodId> {
    id.parse::<MethodId>().map_err(|e: LearnError| anyhow!("{e}"))
}

/// Filename-safe method tag.
fn method_slug(m: MethodId) -> String {
    m.as_str().replace('→', "-to-").replace('+', "-plus-")
}

fn task_slug(id: &str) -> String {
    id.replace('@', "_")
}

struct Plan {
    task: TaskSpec,
    method: MethodId,
    steps: u64,
    seed: u64,
    n: usize,
    jobs: usize,
    out: PathBuf,
    fixed: HarnessConfig,
    opts: TrainOptions,
}

fn plan(a: RunArgs, sweep: bool) -> Result<Plan> {
    let mut cfg = match &a.config {
        Some(p) => HarnessConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => HarnessConfig::default(),
    };
    let task_id = a.task.or(cfg.task.clone()).ok_or_else(|| anyhow!("--task is required"))?;
    let method_id = a.method.or(cfg.method.clone()).ok_or_else(|| anyhow!("--method is required"))?;
    let task = lookup_task(&task_id)?;
    let method = lookup_method(&method_id)?;
    let steps = a.steps.or(cfg.steps).ok_or_else(|| anyhow!("--steps is required"))?;
    if let Some(v) = a.lr {
        cfg.hps.lr = Some(v);
    }
    if let Some(v) = a.alpha {
        cfg.hps.alpha = Some(v);
    }
    if let Some(v) = a.stage_split {
        cfg.hps.stage_split = Some(v);
    }
    if let Some(v) = a.validation_episodes {
        cfg.validation_episodes = v;
    }
    let demos = match a.demos.or(cfg.demos.clone()) {
        Some(p) => Some(load_demos(&p)?),
        None => None,
    };
    let out = cfg.out_root(a.out.as_deref());
    Ok(Plan {
        task,
        method,
        steps,
        seed: a.seed.unwrap_or(cfg.seed),
        n: if sweep { a.n.unwrap_or(cfg.n) } else { 1 },
        jobs: a.jobs.unwrap_or(cfg.jobs).max(1),
        out,
        opts: TrainOptions {
            validation_episodes: cfg.validation_episodes,
            demo_episodes: cfg.demo_episodes,
            demos,
            checkpoint: None,
            verbose: !a.quiet,
        },
        fixed: cfg,
    })
}

fn load_demos(path: &Path) -> Result<Demonstration> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    Ok(read_demonstrations(&mut f)?)
}

/// Sampled hyperparameters with any fixed values from the config or flags
/// laid over them. Fixed values for fields the method does not search are
/// ignored.
fn hps_for(p: &Plan, sample_seed: u64) -> HpSample {
    let mut h = sample_hps(p.method, sample_seed);
    let f = &p.fixed.hps;
    if let Some(lr) = f.lr {
        h.lr = lr;
    }
    if p.method.searches_alpha() {
        h.alpha = f.alpha.or(h.alpha);
    }
    if p.method.searches_stage_split() {
        h.stage_split = f.stage_split.or(h.stage_split);
    }
    h
}

fn write_record(dir: &Path, rec: &RunRecord) -> Result<PathBuf> {
    let path = dir.join(format!("{}-seed{}.jsonl", method_slug(rec.method), rec.seed));
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_run_record(&mut w, rec)?;
    w.flush()?;
    Ok(path)
}

fn train(a: RunArgs, sweep: bool) -> Result<()> {
    let p = plan(a, sweep)?;
    if p.n == 0 {
        bail!("--n must be positive");
    }
    let dir = p.out.join(task_slug(&p.task.id));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let run_one = |i: usize| -> Result<()> {
        let seed = p.seed + i as u64;
        let hps = hps_for(&p, seed);
        let mut opts = p.opts.clone();
        if p.fixed.save_checkpoint {
            opts.checkpoint = Some(dir.join(format!("{}-seed{seed}.ckpt", method_slug(p.method))));
        }
        let out = run_training(&p.task, p.method, &hps, p.steps, seed, &opts)?;
        let path = write_record(&dir, &out.record)?;
        let best = out.record.validation.iter().map(|v| v.reward).fold(f64::NEG_INFINITY, f64::max);
        println!("{}  best reward {best:+.4}  ({:.1}s)", path.display(), out.record.wall_clock_secs);
        Ok(())
    };
    std::thread::scope(|s| {
        for _ in 0..p.jobs.min(p.n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= p.n {
                    break;
                }
                if let Err(e) = run_one(i) {
                    failures.lock().unwrap().push(format!("run {i}: {e:#}"));
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        bail!("{}", failures.join("\n"));
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint).with_context(|| format!("reading {}", a.checkpoint.display()))?;
    let task_id = match a.task {
        Some(t) => t,
        None => ck.metadata["task"]
            .as_str()
            .ok_or_else(|| anyhow!("checkpoint has no task; pass --task"))?
            .to_string(),
    };
    let task = lookup_task(&task_id)?;
    let seed = a.seed.or(ck.metadata["seed"].as_u64()).unwrap_or(0);
    let spec = NetSpec::for_task(&task)?;
    spec.check_params(&ck.params)?;
    let mut policy = NetPolicy::new(&spec, &ck.params)?;
    let m = evaluate_policy(&mut policy, &task, seed, a.n)?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    Ok(())
}

fn collect_records(paths: &[PathBuf], out: &mut Vec<PathBuf>) -> Result<()> {
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            collect_records(&entries, out)?;
        } else if p.extension().is_some_and(|e| e == "jsonl") || paths.len() == 1 {
            out.push(p.clone());
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let mut files = Vec::new();
    collect_records(&a.runs, &mut files)?;
    if files.is_empty() {
        bail!("no run records found");
    }
    let mut by_task: std::collections::BTreeMap<String, Vec<RunRecord>> = Default::default();
    for f in &files {
        let rec = read_run_record(BufReader::new(File::open(f)?)).with_context(|| format!("reading {}", f.display()))?;
        by_task.entry(rec.task.clone()).or_default().push(rec);
    }
    for (task, recs) in by_task {
        let rep = build_report(&recs, metric, a.seed)?;
        let json = serde_json::to_string_pretty(&rep)?;
        match &a.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.report.json", task_slug(&task)));
                fs::write(&path, json + "\n")?;
                println!("{}", path.display());
            }
            None => println!("{json}"),
        }
    }
    Ok(())
}

fn demos(a: DemoArgs) -> Result<()> {
    let task = lookup_task(&a.task)?;
    let demo = record_demonstrations(&task, a.n, a.seed)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    write_demonstrations(&mut w, &demo)?;
    w.flush()?;
    println!("{}  {} episodes, {} steps", a.out.display(), demo.episodes.len(), demo.num_steps());
    Ok(())
}
