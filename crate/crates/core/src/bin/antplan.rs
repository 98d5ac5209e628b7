use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use antplan::anticipate::{self, Dataset, EstimatorModel, OracleConfig, TrainConfig};
use antplan::harness::{self, render_snapshot, DeploymentConfig, EstimatorSource, Variant};
use antplan::scenario::{Domain, LoadOptions, Scenario};
use antplan::Result;

#[derive(Parser)]
#[command(name = "antplan", version, about = "Anticipatory task and motion planning on persistent 2D worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run planner variants over random task sequences.
    Run(RunArgs),
    /// Oracle-labelled training data.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train or evaluate the learned estimator.
    Model {
        #[command(subcommand)]
        command: ModelCommand,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    domain: Domain,
    /// Comma-separated: myopic, anttamp, prep-myopic, prep-anttamp, or all.
    #[arg(long, default_value = "myopic,anttamp")]
    variant: String,
    /// zero, oracle or model:<path>
    #[arg(long, default_value = "oracle")]
    estimator: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    prep_iters: Option<usize>,
    /// Object counts cycled over trials, e.g. `3-10`.
    #[arg(long)]
    objects: Option<String>,
    #[arg(long)]
    samples_per_task: Option<usize>,
    /// Write start and end SVG snapshots of every trial.
    #[arg(long)]
    snapshots: bool,
}

#[derive(Subcommand)]
enum DatasetCommand {
    Gen {
        #[arg(long)]
        domain: Domain,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        samples_per_task: usize,
    },
}

#[derive(Subcommand)]
enum ModelCommand {
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || antplan::Error::Scenario(format!("bad object range `{s}`; expected N or LO-HI"));
    match s.split_once('-') {
        Some((a, b)) => {
            let (lo, hi) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if lo == 0 || lo > hi {
                return Err(bad());
            }
            Ok((lo, hi))
        }
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let variants: Vec<Variant> = if args.variant == "all" {
        Variant::ALL.to_vec()
    } else {
        args.variant.split(',').map(|v| v.trim().parse()).collect::<Result<_>>()?
    };
    let estimator: EstimatorSource = args.estimator.parse()?;
    let mut records = Vec::new();
    for variant in variants {
        let mut cfg = DeploymentConfig::defaults(args.domain, variant);
        cfg.scenario = args.scenario.clone();
        cfg.estimator = estimator.clone();
        cfg.seed = args.seed;
        cfg.n_trials = args.trials.unwrap_or(cfg.n_trials);
        cfg.sequence_length = args.tasks.unwrap_or(cfg.sequence_length);
        cfg.n_candidates = args.candidates.unwrap_or(cfg.n_candidates);
        cfg.prep_iterations = args.prep_iters.unwrap_or(cfg.prep_iterations);
        cfg.object_counts = args.objects.as_deref().map(parse_range).transpose()?;
        if let Some(k) = args.samples_per_task {
            cfg.oracle.samples_per_task = k;
        }
        log::info!("running {variant}: {} trials x {} tasks", cfg.n_trials, cfg.sequence_length);
        let recs = harness::run_deployment(&cfg)?;
        if args.snapshots {
            std::fs::create_dir_all(&args.out)?;
            for r in &recs {
                let scn = cfg.load_scenario(cfg.objects_for(r.trial))?;
                render_snapshot(&scn, &r.start, args.out.join(format!("snap_{variant}_{:03}_initial.svg", r.trial)))?;
                render_snapshot(&scn, &r.terminal, args.out.join(format!("snap_{variant}_{:03}_final.svg", r.trial)))?;
            }
        }
        for r in recs.iter().filter(|r| r.error.is_some()) {
            log::warn!("{variant} trial {}: {}", r.trial, r.error.as_deref().unwrap_or_default());
        }
        records.extend(recs);
    }
    let summary = harness::write_results(&args.out, &records)?;
    for v in &summary.variants {
        println!(
            "{:<13} trials {:>3}  tasks {:>5}  mean cost/task {:>10.3}  slope {:>8.3}",
            v.variant.to_string(),
            v.trials,
            v.tasks,
            v.mean_cost_per_task,
            v.slope
        );
    }
    for (v, pct) in &summary.improvement_over_myopic_pct {
        println!("{v} vs myopic: {pct:.1}%");
    }
    Ok(())
}

fn dataset(cmd: DatasetCommand) -> Result<()> {
    let DatasetCommand::Gen { domain, n, seed, out, scenario, samples_per_task } = cmd;
    let scn = match scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::builtin(domain, &LoadOptions::default())?,
    };
    let oracle = OracleConfig { samples_per_task, ..Default::default() };
    let d = anticipate::generate_dataset(&scn, n, seed, &oracle)?;
    d.write_jsonl(&out)?;
    println!("wrote {} records to {}", d.len(), out.display());
    Ok(())
}

fn model(cmd: ModelCommand) -> Result<()> {
    match cmd {
        ModelCommand::Train { data, out, epochs, lr, batch, hidden, seed } => {
            let d = Dataset::read_jsonl(&data)?;
            let cfg = TrainConfig { learning_rate: lr, batch_size: batch, epochs, hidden, seed, ..Default::default() };
            let (m, report) = anticipate::train(&d, &cfg)?;
            for e in &report.epochs {
                println!("epoch {:>3}  train MAE {:>10.4}  validation MAE {:>10.4}", e.epoch, e.train_loss, e.validation_loss);
            }
            m.save(&out)?;
            println!("saved {} parameters to {}", m.parameter_count(), out.display());
        }
        ModelCommand::Eval { model, data } => {
            let m = EstimatorModel::load(&model)?;
            let d = Dataset::read_jsonl(&data)?;
            let mut pred = Vec::with_capacity(d.len());
            for r in &d.records {
                pred.push(m.predict(&r.graph)?);
            }
            let labels: Vec<f64> = d.records.iter().map(|r| r.label).collect();
            let mae = pred.iter().zip(&labels).map(|(p, l)| (p - l).abs()).sum::<f64>() / labels.len().max(1) as f64;
            println!("records {}  MAE {:.4}  Spearman {:.4}", labels.len(), mae, anticipate::spearman(&pred, &labels));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Dataset { command } => dataset(command),
        Command::Model { command } => model(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
