mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use monorank::letordata::{normalize_query_level, synth_generate, write_letor};
use monorank::mrtrain::{evaluate_model, sweep};
use monorank::{Dataset, MetricReport, Model, TrainTrace, Trainer};

use config::RunConfig;

/// Exit status when a run stops at its outer iteration cap and
/// `require_convergence` is set.
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "monorank", version, about = "Learning to rank by monotone retargeting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write model.json and trace.csv.
    Train(RunArgs),
    /// Score a test file and write metrics.csv.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train once per C, keep the best by validation MAP.
    Sweep(RunArgs),
    /// Write a synthetic dataset in LETOR format.
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        docs: Option<usize>,
        #[arg(long)]
        features: Option<usize>,
        #[arg(long)]
        levels: Option<u32>,
        #[arg(long)]
        noise: Option<f64>,
        /// Also write a held-out file drawn from the same planted scorer.
        #[arg(long, requires = "test_queries")]
        test_out: Option<PathBuf>,
        #[arg(long, requires = "test_out")]
        test_queries: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// Flat key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["squared", "kl", "gi"])]
    divergence: Option<String>,
    #[arg(long, value_parser = ["true", "false"])]
    normalized: Option<String>,
    #[arg(long, value_parser = ["dualmap", "inner", "simplex"])]
    retarget: Option<String>,
    #[arg(long, value_parser = ["mr", "baseline"])]
    trainer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Regularization strength.
    #[arg(short = 'C', long = "C")]
    c: Option<f64>,
    /// Comma-separated C values for `sweep`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    vali: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated metric cutoffs; empty for ERR and MAP only.
    #[arg(long)]
    cutoffs: Option<String>,
    /// Exit with status 3 if training stops at max_outer.
    #[arg(long)]
    require_convergence: bool,
    /// Any config key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        let flags = [
            ("divergence", self.divergence.clone()),
            ("normalized", self.normalized.clone()),
            ("retarget", self.retarget.clone()),
            ("trainer", self.trainer.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("C", self.c.map(|v| v.to_string())),
            ("grid", self.grid.clone()),
            ("max_outer", self.max_outer.map(|v| v.to_string())),
            ("train", path_str(&self.train)),
            ("vali", path_str(&self.vali)),
            ("test", path_str(&self.test)),
            ("out_dir", path_str(&self.out_dir)),
            ("cutoffs", self.cutoffs.clone()),
            ("require_convergence", self.require_convergence.then(|| "true".to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got '{kv}'");
            };
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

fn load_data(path: &Path, cfg: &RunConfig) -> Result<Dataset> {
    let ds = Dataset::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(if cfg.query_norm { normalize_query_level(&ds).0 } else { ds })
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref().with_context(|| format!("no {what} file given (--{what} or {what}= in the config)"))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_outputs(cfg: &RunConfig, model: &Model, trace: &TrainTrace) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    model.save(cfg.out_dir.join("model.json"))?;
    trace.write_csv(create(&cfg.out_dir, "trace.csv")?)?;
    Ok(())
}

fn print_report(report: &MetricReport) {
    println!("{:<12} {:>10}", "metric", "value");
    for (n, v) in report.cutoffs.iter().zip(&report.ndcg) {
        println!("{:<12} {v:>10.4}", format!("NDCG@{n}"));
    }
    for (n, v) in report.cutoffs.iter().zip(&report.precision) {
        println!("{:<12} {v:>10.4}", format!("P@{n}"));
    }
    println!("{:<12} {:>10.4}", "NDCG", report.ndcg_full);
    println!("{:<12} {:>10.4}", "ERR", report.err);
    println!("{:<12} {:>10.4}", "MAP", report.map);
    println!(
        "{} queries ({} without gain skipped in NDCG, {} without relevant documents skipped in MAP)",
        report.num_queries, report.flagged_ndcg, report.flagged_map
    );
}

/// Reports how training ended and picks the exit status.
fn finish(cfg: &RunConfig, trace: &TrainTrace) -> ExitCode {
    println!("final objective: {:.12e}", trace.final_objective());
    println!("outer iterations: {}", trace.iterations.len());
    if trace.converged {
        return ExitCode::SUCCESS;
    }
    eprintln!("note: stopped at max_outer = {} before the objective settled", cfg.train.max_outer);
    if cfg.require_convergence {
        ExitCode::from(EXIT_NOT_CONVERGED)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_train(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let config = cfg.resolved()?;
    let data = match &cfg.train_path {
        Some(path) => load_data(path, &cfg)?,
        None => synth_generate(&cfg.synth)?.0,
    };
    let (model, trace) = cfg.trainer.train_lenient(&config, &data)?;
    write_outputs(&cfg, &model, &trace)?;
    Ok(finish(&cfg, &trace))
}

fn cmd_eval(model_path: &Path, args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    if cfg.cutoffs.contains(&0) {
        bail!("metric cutoffs must be at least 1");
    }
    let model = Model::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let test = load_data(required(&cfg.test_path, "test")?, &cfg)?;
    let report = evaluate_model(&model, &test, &cfg.cutoffs)?;
    report.write_csv(create(&cfg.out_dir, "metrics.csv")?)?;
    print_report(&report);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let config = cfg.resolved()?;
    let train = load_data(required(&cfg.train_path, "train")?, &cfg)?;
    let vali = load_data(required(&cfg.vali_path, "vali")?, &cfg)?;
    let outcome = sweep(&config, &cfg.grid, cfg.trainer, &train, &vali)?;
    outcome.write_csv(create(&cfg.out_dir, "sweep.csv")?)?;
    write_outputs(&cfg, &outcome.model, &outcome.trace)?;
    for row in &outcome.rows {
        println!("C = {:<8e} validation MAP {:.4}", row.c, row.vali_map);
    }
    println!("selected C = {:e}", outcome.rows[outcome.best].c);
    if let Some(path) = &cfg.test_path {
        let report = evaluate_model(&outcome.model, &load_data(path, &cfg)?, &cfg.cutoffs)?;
        report.write_csv(create(&cfg.out_dir, "metrics.csv")?)?;
        print_report(&report);
    }
    if cfg.trainer == Trainer::Mr && !outcome.trace.converged && cfg.require_convergence {
        eprintln!("note: the selected run stopped at max_outer = {}", cfg.train.max_outer);
        return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_dataset(data: &Dataset, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_letor(data, BufWriter::new(file))?;
    println!("wrote {} queries, {} documents to {}", data.num_queries(), data.num_documents(), out.display());
    Ok(())
}

fn cmd_gen_synth(out: &Path, sizes: [Option<String>; 5], held_out: Option<(&Path, usize)>, args: &RunArgs) -> Result<ExitCode> {
    let mut cfg = args.resolve()?;
    for (key, value) in ["synth_queries", "synth_docs", "synth_features", "synth_levels", "synth_noise"].iter().zip(sizes) {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    let n = cfg.synth.n_queries;
    let mut synth = cfg.synth.clone();
    synth.n_queries += held_out.map_or(0, |(_, k)| k);
    let (data, _) = synth_generate(&synth)?;
    match held_out {
        Some((test_out, _)) => {
            let (train, test) = data.split_at(n)?;
            write_dataset(&train, out)?;
            write_dataset(&test, test_out)?;
        }
        None => write_dataset(&data, out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval { model, run } => cmd_eval(model, run),
        Command::Sweep(args) => cmd_sweep(args),
        Command::GenSynth { out, queries, docs, features, levels, noise, test_out, test_queries, run } => {
            let sizes = [
                queries.map(|v| v.to_string()),
                docs.map(|v| v.to_string()),
                features.map(|v| v.to_string()),
                levels.map(|v| v.to_string()),
                noise.map(|v| v.to_string()),
            ];
            let held_out = test_out.as_deref().zip(*test_queries);
            cmd_gen_synth(out, sizes, held_out, run)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
