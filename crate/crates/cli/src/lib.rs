//! Command-line front end: one subcommand per pipeline step.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use lidal::harness::ProtocolConfig;
use lidal::scene::io::read_file;
use lidal::{EngineConfig, Error, Result};

use crate::config::RunConfig;

/// Generates one optional `--key VALUE` flag per configuration key.
macro_rules! overrides {
    ($($field:ident => $key:literal : $help:literal),* $(,)?) => {
        #[derive(Debug, Clone, Default, Args)]
        pub struct Overrides {
            $(
                #[arg(long, global = true, value_name = "VALUE", help = $help)]
                pub $field: Option<String>,
            )*
        }

        impl Overrides {
            /// `(key, value)` for every flag given on the command line.
            pub fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push(($key, v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

overrides! {
    classes => "classes": "Number of semantic classes",
    runs => "runs": "Augmented inference runs per frame",
    n_nei => "n_nei": "Neighbouring frames searched for correspondences",
    t_p => "t_p": "Correspondence distance threshold in meters",
    k => "k": "Regions per frame",
    rho => "rho": "Relative region size tolerance",
    t_r => "t_r": "Region overlap radius in meters",
    x_init => "x_init": "Fraction of points labeled initially",
    x_active => "x_active": "Fraction of points labeled per round",
    rounds => "rounds": "Active learning rounds",
    pseudo_target => "pseudo_target": "Fraction of points pseudo-labeled per round",
    seed => "seed": "Master random seed",
    order => "order": "Selection order: fd_fe or fe_fd",
    pseudo_strategy => "pseudo_strategy": "Pseudo-label strategy: s1, s2 or s3",
    root => "root": "Sequence directory with points/, poses.txt, labels/ and probs/",
    state => "state": "Dataset state directory (default <out>/state)",
    out => "out": "Output directory (default: the sequence directory)",
    round => "round": "Round number written into selection records",
    strategy => "strategy": "Baseline name, or a comma-separated list for simulate",
    features => "features": "Frame feature file for the core-set baseline",
    pred => "pred": "Directory of predicted .label files",
    gt => "gt": "Directory of ground-truth .label files",
    ignore => "ignore": "Class left out of mIoU, or none",
    frames => "frames": "Synthetic scene frames",
    points => "points": "Synthetic points per frame",
    alpha => "alpha": "Mock predictor accuracy at zero coverage",
    beta => "beta": "Mock predictor range noise per meter",
    gamma => "gamma": "Mock predictor viewpoint flip rate",
    sigma => "sigma": "Mock predictor per-run jitter",
    patch_size => "patch_size": "Mock predictor noise patch edge in meters",
    predictor => "predictor": "External predictor command used instead of the mock",
}

#[derive(Debug, Parser)]
#[command(name = "lidal", version, about = "Inter-frame uncertainty active learning for LiDAR sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Log more to standard error; repeat for debug output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Split every frame into size-balanced regions.
    Divide,
    /// Compute inter-frame divergence and entropy for points and regions.
    Score,
    /// Pick regions for annotation and record the labels.
    SelectActive {
        /// Mark picks as labeled without reading ground truth.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Pick regions for pseudo-labeling.
    SelectPseudo,
    /// Run one round of a baseline strategy.
    Baseline {
        /// Mark picks as labeled without reading ground truth.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Compute mIoU between two directories of .label files.
    Miou,
    /// Run the closed loop on a synthetic scene.
    Simulate,
    /// Check a dataset state for consistency.
    Audit,
}

/// Merges defaults, the configuration file and command-line flags.
pub fn run_config(cli: &Cli) -> Result<RunConfig> {
    let engine = match cli.command {
        Command::Simulate => ProtocolConfig::desk(0).engine,
        _ => EngineConfig::default(),
    };
    let mut cfg = RunConfig::new(engine);
    if let Some(path) = &cli.config {
        let text = String::from_utf8(read_file(path)?)
            .map_err(|_| Error::Validation(format!("{}: not valid UTF-8", path.display())))?;
        cfg.apply_text(path, &text)?;
    }
    for (key, value) in cli.overrides.pairs() {
        cfg.set(key, value)
            .map_err(|e| Error::Config(format!("--{}: {e}", key.replace('_', "-"))))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads {n}: {e}")))?;
    }
    let cfg = run_config(cli)?;
    match &cli.command {
        Command::Divide => commands::divide(&cfg),
        Command::Score => commands::score(&cfg),
        Command::SelectActive { no_oracle } => commands::select_active(&cfg, !no_oracle),
        Command::SelectPseudo => commands::select_pseudo(&cfg),
        Command::Baseline { no_oracle } => commands::baseline(&cfg, !no_oracle),
        Command::Miou => commands::miou(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Audit => commands::audit(&cfg),
    }
}

/// Exit status of an error: 2 for unreadable or malformed files, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        2
    } else {
        1
    }
}
