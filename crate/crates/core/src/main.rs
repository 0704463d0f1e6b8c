use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mpqml::circuit::LayoutKind;
use mpqml::config::{DatasetSource, OptimizerConfig, RunConfig, TaskKind};
use mpqml::data::{dataset_to_csv, synth_dataset, SynthSpec};
use mpqml::runner::{configure_threads, run};
use mpqml::selftest::run_selftest;
use mpqml::tasks::ProbabilityMode;
use mpqml::training::{GainDecay, SpsaConfig};
use mpqml::{Error, Result};

/// Multi-photon linear-optics simulator and trainer.
#[derive(Parser, Debug)]
#[command(name = "mpqml", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// DQFIM rank versus the number of trainable phases.
    CapacityK(CapacityArgs),
    /// DQFIM rank versus the training-set size.
    CapacityL(CapacityArgs),
    /// Learn a Haar-random target unitary from Fock probes.
    TrainUnitary(UnitaryArgs),
    /// Metric learning on vowel-style feature vectors.
    TrainMetric(MetricArgs),
    /// Replay a resolved config file as-is.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset utilities.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Independent numerical checks of the simulator.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Write a synthetic 7-class, 12-feature dataset as CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 37)]
        per_class: usize,
        #[arg(long, default_value_t = 1.5)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config; flags given on the command line override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate probabilities from this many samples instead of exactly.
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Layout {
    Clements,
    Staircase,
}

impl From<Layout> for LayoutKind {
    fn from(l: Layout) -> Self {
        match l {
            Layout::Clements => LayoutKind::Clements,
            Layout::Staircase => LayoutKind::Staircase,
        }
    }
}

#[derive(Args, Debug)]
struct CapacityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Training-set size for K scans.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    l_values: Option<Vec<usize>>,
    /// Random parameter draws per point; the maximum rank is reported.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, value_enum)]
    layout: Option<Layout>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerKind {
    Spsa,
    Adam,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerKind>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// SPSA step gain `a`.
    #[arg(long)]
    spsa_a: Option<f64>,
    /// SPSA perturbation gain `c`.
    #[arg(long)]
    spsa_c: Option<f64>,
    /// Use the decaying SPSA gain schedule.
    #[arg(long)]
    spsa_decay: bool,
}

#[derive(Args, Debug)]
struct UnitaryArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of probe states.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
}

#[derive(Args, Debug)]
struct MetricArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    n: Option<usize>,
    /// Feature CSV (label first, 12 features); synthetic data otherwise.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<usize>>,
}

fn base_config(common: &Common, task: TaskKind) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            if cfg.task != task {
                return Err(Error::InvalidConfig(format!(
                    "{} describes task '{}', not '{}'",
                    path.display(),
                    cfg.task.name(),
                    task.name()
                )));
            }
            cfg
        }
        None => RunConfig::new(task, 0),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(shots) = common.shots {
        cfg.mode = ProbabilityMode::Shots(shots);
    }
    Ok(cfg)
}

fn apply_training(opt: &mut OptimizerConfig, args: &TrainArgs, spsa_defaults: SpsaConfig) {
    let epochs = args.epochs.unwrap_or(opt.max_epochs());
    match args.optimizer {
        Some(OptimizerKind::Adam) if !matches!(opt, OptimizerConfig::Adam { .. }) => {
            *opt = OptimizerConfig::adam_default(epochs);
        }
        Some(OptimizerKind::Spsa) if !matches!(opt, OptimizerConfig::Spsa { .. }) => {
            *opt = OptimizerConfig::Spsa {
                a: spsa_defaults.a,
                c: spsa_defaults.c,
                max_epochs: epochs,
                decay: None,
            };
        }
        _ => {}
    }
    opt.set_max_epochs(epochs);
    match opt {
        OptimizerConfig::Adam { lr, .. } => {
            if let Some(v) = args.lr {
                *lr = v;
            }
        }
        OptimizerConfig::Spsa { a, c, decay, .. } => {
            if let Some(v) = args.spsa_a {
                *a = v;
            }
            if let Some(v) = args.spsa_c {
                *c = v;
            }
            if args.spsa_decay {
                *decay = Some(GainDecay::default());
            }
        }
    }
}

fn capacity(args: &CapacityArgs, task: TaskKind) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common, task)?;
    let c = &mut cfg.capacity;
    if let Some(v) = args.m {
        c.m = v;
    }
    if let Some(v) = args.n {
        c.n = v;
    }
    if let Some(v) = args.l {
        c.l = v;
    }
    if let Some(v) = &args.k_values {
        c.k_values = v.clone();
    }
    if let Some(v) = &args.l_values {
        c.l_values = v.clone();
    }
    if let Some(v) = args.samples {
        c.theta_samples = v;
    }
    if let Some(v) = args.rel_tol {
        c.rel_tol = v;
    }
    if let Some(v) = args.layout {
        c.layout = v.into();
    }
    Ok(cfg)
}

fn unitary(args: &UnitaryArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common, TaskKind::TrainUnitary)?;
    let u = &mut cfg.unitary;
    if let Some(v) = args.m {
        u.m = v;
    }
    if let Some(v) = args.n {
        u.n = v;
    }
    if let Some(v) = args.l {
        u.probes = v;
    }
    if let Some(v) = args.layers {
        u.layers = v;
    }
    if let Some(v) = args.train.repeats {
        u.repeats = v;
    }
    apply_training(&mut u.optimizer, &args.train, SpsaConfig::unitary_defaults(0, 0));
    Ok(cfg)
}

fn metric(args: &MetricArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common, TaskKind::TrainMetric)?;
    let c = &mut cfg.metric;
    if let Some(v) = args.n {
        c.n = v;
    }
    if let Some(v) = args.train.repeats {
        c.repeats = v;
    }
    if let Some(v) = &args.snapshots {
        c.snapshots = v.clone();
    }
    if let Some(path) = &args.dataset {
        c.dataset = DatasetSource::Csv { path: path.clone() };
    } else if let DatasetSource::Synthetic {
        per_class,
        separation,
        seed,
    } = &mut c.dataset
    {
        if let Some(v) = args.per_class {
            *per_class = v;
        }
        if let Some(v) = args.separation {
            *separation = v;
        }
        if let Some(v) = args.data_seed {
            *seed = v;
        }
    }
    apply_training(&mut c.optimizer, &args.train, SpsaConfig::metric_defaults(0, 0));
    Ok(cfg)
}

fn execute(cfg: &RunConfig, out: &Path) -> Result<()> {
    let summary = run(cfg, out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::CapacityK(a) => execute(&capacity(&a, TaskKind::CapacityScanK)?, &a.common.out)?,
        Command::CapacityL(a) => execute(&capacity(&a, TaskKind::CapacityScanL)?, &a.common.out)?,
        Command::TrainUnitary(a) => execute(&unitary(&a)?, &a.common.out)?,
        Command::TrainMetric(a) => execute(&metric(&a)?, &a.common.out)?,
        Command::Run { config, out } => execute(&RunConfig::load(&config)?, &out)?,
        Command::Dataset {
            command:
                DatasetCommand::Synth {
                    out,
                    per_class,
                    separation,
                    seed,
                },
        } => {
            let ds = synth_dataset(&SynthSpec {
                per_class,
                separation,
                seed,
                ..SynthSpec::default()
            })?;
            std::fs::write(&out, dataset_to_csv(&ds)?).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            println!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::Selftest { seed } => {
            let checks = run_selftest(seed)?;
            for c in &checks {
                println!(
                    "{} {}: deviation {:e} (tolerance {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.deviation,
                    c.tolerance
                );
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::ConfigParse { .. } => "config_parse",
        Error::InvalidConfig(_) => "invalid_config",
        Error::Dataset(_) | Error::Csv(_) => "dataset",
        Error::NonFinite { .. } => "non_finite",
        _ => "numerical",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let report = json!({"error": error_kind(&e), "message": e.to_string()});
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
