//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scalegnn_core::models::precompute_hops;
use scalegnn_core::sbm::{generate_sbm, SyntheticSpec};

use crate::bundle::{self, load_bundle, parse_norm_tag, save_bundle};
use crate::config::{parse_pairs, RunConfig};
use crate::error::{io_err, Error};
use crate::harness::{bench, hp_search, run_trial, BenchPreset, TrialResult};
use crate::import::{import_csv, CsvSources};
use crate::methods::Method;
use crate::output::{read_trials, OutputDir};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SCALEGNN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "scalegnn", version, about = "Scalable GNN training and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (the bundle directory for `gen` and `import`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Hyperparameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Propagation stages of the ensembling trainer.
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Accept values outside the search-space candidates.
    #[arg(long)]
    allow_off_grid: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a stochastic-block-model bundle.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        p_in: Option<f64>,
        #[arg(long)]
        p_out: Option<f64>,
        #[arg(long)]
        feature_dim: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value = "sbm")]
        name: String,
    },
    /// Write a hop cache for a bundle.
    Precompute {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "sym")]
        norm: String,
    },
    /// Train one configuration.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Greedy hyperparameter search.
    Hpsearch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated subset of axes to search.
        #[arg(long, value_delimiter = ',')]
        axes: Vec<String>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Throughput and activation-memory preset.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        timed_epochs: Option<usize>,
    },
    /// Summarize trials.jsonl files.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        trials: Vec<PathBuf>,
    },
    /// Convert CSV files into a bundle.
    Import {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        directed: bool,
        #[arg(long, default_value = "imported")]
        name: String,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method {s} (expected one of {})", names.join(", "))
    })
}

/// Usage problems exit with 2, runtime failures with 1.
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            e => Failure::Runtime(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn file_pairs(common: &Common) -> CliResult<Vec<(String, String)>> {
    match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok(parse_pairs(&text)?)
        }
        None => Ok(Vec::new()),
    }
}

fn resolve_run(common: &Common, run: &RunArgs) -> CliResult<RunConfig> {
    let mut pairs = file_pairs(common)?;
    if let Some(m) = run.method {
        pairs.retain(|(k, _)| k != "method");
        pairs.insert(0, ("method".into(), m.name().into()));
    }
    let push = |pairs: &mut Vec<(String, String)>, k: &str, v: String| pairs.push((k.to_string(), v));
    if let Some(b) = &run.bundle {
        push(&mut pairs, "bundle", b.display().to_string());
    }
    if let Some(s) = common.seed {
        push(&mut pairs, "seed", s.to_string());
    }
    if let Some(o) = &common.out {
        push(&mut pairs, "out", o.display().to_string());
    }
    if let Some(s) = run.stages {
        push(&mut pairs, "stages", s.to_string());
    }
    if let Some(e) = run.epochs {
        push(&mut pairs, "epochs", e.to_string());
    }
    if let Some(r) = run.repeats {
        push(&mut pairs, "repeats", r.to_string());
    }
    if run.allow_off_grid {
        push(&mut pairs, "allow_off_grid", "true".into());
    }
    for kv in &run.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set {kv}: expected KEY=VALUE")))?;
        push(&mut pairs, k.trim(), v.trim().to_string());
    }
    if !pairs.iter().any(|(k, _)| k == "method") {
        return usage("no method given (use --method or a config file)");
    }
    Ok(RunConfig::from_pairs(&pairs, None)?)
}

fn out_dir(config: &RunConfig, default: &str) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn bundle_of(config: &RunConfig) -> CliResult<PathBuf> {
    config
        .bundle
        .clone()
        .ok_or_else(|| Failure::Usage("no bundle given (use --bundle or bundle = ... in the config)".into()))
}

fn set_spec(spec: &mut SyntheticSpec, key: &str, value: &str) -> CliResult<()> {
    let f = || value.parse::<f64>().map_err(|_| Failure::Usage(format!("{key} = {value}: not a number")));
    let u = || value.parse::<usize>().map_err(|_| Failure::Usage(format!("{key} = {value}: not an integer")));
    match key {
        "num_nodes" => spec.num_nodes = u()?,
        "num_classes" => spec.num_classes = u()?,
        "p_in" => spec.p_in = f()?,
        "p_out" => spec.p_out = f()?,
        "feature_dim" => spec.feature_dim = u()?,
        "mean_separation" => spec.mean_separation = f()?,
        "noise" => spec.noise = f()?,
        "train_frac" => spec.train_frac = f()?,
        "val_frac" => spec.val_frac = f()?,
        "test_frac" => spec.test_frac = f()?,
        "seed" => spec.seed = u()? as u64,
        "name" => {}
        _ => return usage(format!("unknown generator key {key}")),
    }
    Ok(())
}

fn write_trial_outputs(dir: &OutputDir, trial: &TrialResult) -> CliResult<()> {
    dir.append_trial(trial)?;
    dir.write_curve(trial)?;
    Ok(())
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Gen {
            common,
            nodes,
            classes,
            p_in,
            p_out,
            feature_dim,
            noise,
            name,
        } => {
            let mut spec = SyntheticSpec::fixture(0);
            for (k, v) in file_pairs(&common)? {
                set_spec(&mut spec, &k, &v)?;
            }
            spec.seed = common.seed.unwrap_or(spec.seed);
            spec.num_nodes = nodes.unwrap_or(spec.num_nodes);
            spec.num_classes = classes.unwrap_or(spec.num_classes);
            spec.p_in = p_in.unwrap_or(spec.p_in);
            spec.p_out = p_out.unwrap_or(spec.p_out);
            spec.feature_dim = feature_dim.unwrap_or(spec.feature_dim);
            spec.noise = noise.unwrap_or(spec.noise);
            let Some(out) = common.out else {
                return usage("gen needs --out <bundle dir>");
            };
            let data = generate_sbm(&spec).map_err(Error::from)?;
            let m = save_bundle(&out, &name, &data)?;
            println!("wrote {} ({} nodes, {} edges)", out.display(), m.num_nodes, m.num_edges);
        }
        Command::Precompute { common, bundle: dir, k, norm } => {
            let spec = parse_norm_tag(&norm).ok_or_else(|| Failure::Usage(format!("unknown norm {norm}")))?;
            let data = load_bundle(&dir)?;
            let hops = precompute_hops(&spec.apply(&data.graph), &data.features, k, None).map_err(Error::from)?;
            let target = common.out.unwrap_or(dir);
            let path = bundle::save_hops(&target, &hops)?;
            println!("wrote {}", path.display());
        }
        Command::Train { common, run } => {
            let config = resolve_run(&common, &run)?;
            let bundle_dir = bundle_of(&config)?;
            let data = load_bundle(&bundle_dir)?;
            let dir = OutputDir::open(&out_dir(&config, "runs"))?;
            dir.write_text("config.resolved", &config.to_text())?;
            let trial = run_trial(&config, &data, Some(&bundle_dir), 0)?;
            write_trial_outputs(&dir, &trial)?;
            println!(
                "{}: val {:.4} test {:.4} ({} epochs)",
                trial.method,
                trial.val_acc,
                trial.test_acc,
                trial.curve.len()
            );
        }
        Command::Hpsearch { common, run, axes, budget } => {
            let config = resolve_run(&common, &run)?;
            let bundle_dir = bundle_of(&config)?;
            let data = load_bundle(&bundle_dir)?;
            let mut space = config.method.space();
            if !axes.is_empty() {
                for a in &axes {
                    if space.axis(a).is_none() {
                        return usage(format!("{} has no axis {a}", config.method.name()));
                    }
                }
                let names: Vec<&str> = axes.iter().map(String::as_str).collect();
                space = space.restrict(&names).map_err(Error::from)?;
            }
            let dir = OutputDir::open(&out_dir(&config, "search"))?;
            dir.write_text("config.resolved", &config.to_text())?;
            let log = hp_search(&config, &space, &data, Some(&bundle_dir), budget)?;
            for t in &log.trials {
                write_trial_outputs(&dir, t)?;
            }
            dir.write_json("search_log.json", &log)?;
            println!(
                "{}: {} trials, best val {:.4}{}",
                log.method,
                log.trials.len(),
                log.best_val_acc,
                if log.complete { "" } else { " (budget exhausted)" }
            );
        }
        Command::Bench {
            common,
            bundle: dir,
            methods,
            hidden,
            layers,
            batch_size,
            timed_epochs,
        } => {
            let mut preset = BenchPreset::default();
            for (k, v) in file_pairs(&common)? {
                let bad = || Failure::Usage(format!("{k} = {v}: not an integer"));
                match k.as_str() {
                    "methods" => preset.methods = v.split(',').map(|s| s.trim().to_string()).collect(),
                    "hidden" => preset.hidden = v.parse().map_err(|_| bad())?,
                    "layers" => preset.layers = v.parse().map_err(|_| bad())?,
                    "batch_size" => preset.batch_size = v.parse().map_err(|_| bad())?,
                    "warmup_epochs" => preset.warmup_epochs = v.parse().map_err(|_| bad())?,
                    "timed_epochs" => preset.timed_epochs = v.parse().map_err(|_| bad())?,
                    _ => return usage(format!("unknown bench key {k}")),
                }
            }
            if !methods.is_empty() {
                preset.methods = methods;
            }
            for m in &preset.methods {
                parse_method(m).map_err(Failure::Usage)?;
            }
            preset.hidden = hidden.unwrap_or(preset.hidden);
            preset.layers = layers.unwrap_or(preset.layers);
            preset.batch_size = batch_size.unwrap_or(preset.batch_size);
            preset.timed_epochs = timed_epochs.unwrap_or(preset.timed_epochs);
            let data = load_bundle(&dir)?;
            let out = OutputDir::open(&common.out.unwrap_or_else(|| PathBuf::from("bench")))?;
            let report = bench(&preset, &data, Some(&dir), common.seed.unwrap_or(0))?;
            out.write_json("bench_report.json", &report)?;
            for e in &report.entries {
                println!("{:<12} {:>10.1} it/s {:>10.4} s/epoch", e.method, e.iters_per_sec, e.epoch_seconds);
            }
        }
        Command::Report { common, trials } => {
            let mut all = Vec::new();
            for p in &trials {
                all.extend(read_trials(p)?);
            }
            let table = report_table(&all);
            print!("{table}");
            if let Some(o) = common.out {
                let dir = OutputDir::open(&o)?;
                dir.write_text("report.md", &table)?;
            }
        }
        Command::Import {
            common,
            edges,
            features,
            labels,
            splits,
            directed,
            name,
        } => {
            let Some(out) = common.out else {
                return usage("import needs --out <bundle dir>");
            };
            let data = import_csv(&CsvSources {
                edges: &edges,
                features: &features,
                labels: &labels,
                splits: &splits,
                symmetrize: !directed,
            })?;
            let m = save_bundle(&out, &name, &data)?;
            println!("wrote {} ({} nodes, {} edges)", out.display(), m.num_nodes, m.num_edges);
        }
    }
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Markdown table of per-method means and standard deviations.
pub fn report_table(trials: &[TrialResult]) -> String {
    let mut methods: Vec<&str> = trials.iter().map(|t| t.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let mut s = String::from("| method | trials | val acc | test acc | it/s | peak act. bytes |\n|---|---|---|---|---|---|\n");
    for m in methods {
        let ts: Vec<&TrialResult> = trials.iter().filter(|t| t.method == m).collect();
        let (vm, vs) = mean_std(&ts.iter().map(|t| t.val_acc).collect::<Vec<_>>());
        let (tm, tsd) = mean_std(&ts.iter().map(|t| t.test_acc).collect::<Vec<_>>());
        let (im, _) = mean_std(&ts.iter().map(|t| t.iters_per_sec).collect::<Vec<_>>());
        let peak = ts.iter().map(|t| t.peak_activation_bytes).max().unwrap_or(0);
        s.push_str(&format!(
            "| {m} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} | {:.1} | {peak} |\n",
            ts.len(),
            100.0 * vm,
            100.0 * vs,
            100.0 * tm,
            100.0 * tsd,
            im
        ));
    }
    s
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool that already exists is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

