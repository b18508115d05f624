use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use diffprog_core::graph::{self, MaskSpec};
use diffprog_experiments::{
    demo, guided_decision, run, run_experiment_suite, AttnScope, EdgeSpec, Hyperparams, ModelConfig, ModelKind,
    Optimizer, RunSpec, SuiteSpec,
};

#[derive(Parser)]
#[command(
    name = "diffprog",
    version,
    about = "Node classification experiments on citation graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print statistics of a dataset directory.
    Stats { dir: PathBuf },
    /// Train one model and report test accuracy.
    Train(TrainArgs),
    /// Run every cell of a suite spec and write a CSV table.
    Suite {
        #[arg(long)]
        spec: PathBuf,
        /// Dataset directory.
        #[arg(long, default_value = "data/citeseer")]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print shortest-path tables for a recurrent or attention program.
    Paths {
        #[arg(long, value_parser = ["rnn", "attention"])]
        demo: String,
    },
    /// Buy, hold or sell from two predicted trends.
    Decide {
        #[arg(long, allow_hyphen_values = true)]
        p1: f64,
        #[arg(long, allow_hyphen_values = true)]
        p2: f64,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long, default_value = "data/citeseer")]
    data: PathBuf,
    #[arg(long, value_parser = parse::<ModelKind>)]
    model: ModelKind,
    #[arg(long, default_value = "train", value_parser = parse::<MaskSpec>)]
    mask: MaskSpec,
    #[arg(long, default_value = "none", value_parser = parse::<EdgeSpec>)]
    edges: EdgeSpec,
    #[arg(long, value_parser = parse::<AttnScope>)]
    attn_scope: Option<AttnScope>,
    /// Comma-separated hidden widths; defaults depend on the model.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    #[arg(long, default_value = "adam", value_parser = ["adam", "sgd"])]
    optimizer: String,
    /// Where to write the JSON report; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn load(dir: &Path) -> Result<graph::CitationGraph> {
    graph::load(dir).with_context(|| format!("loading dataset from {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = ModelConfig::new(args.model);
    if let Some(h) = args.hidden {
        config.hidden_dims = h;
    }
    if let Some(s) = args.attn_scope {
        config.attn_scope = s;
    }
    if let Some(d) = args.dropout {
        config.dropout_rate = d;
    }
    let hyper = Hyperparams {
        optimizer: if args.optimizer == "sgd" {
            Optimizer::Sgd
        } else {
            Optimizer::Adam
        },
        lr: args.lr,
        weight_decay: args.weight_decay,
        epochs: args.epochs,
        seed: args.seed,
    };
    let g = load(&args.data)?;
    let report = run(
        &RunSpec {
            config,
            mask: args.mask,
            edges: args.edges,
            hyper,
        },
        &g,
    )?;
    eprintln!(
        "{} mask={} edges={} seed={} params={} test_accuracy={:.4}",
        report.config.kind, report.mask, report.edges, report.seed, report.param_count, report.test_accuracy
    );
    match args.out {
        Some(path) => serde_json::to_writer_pretty(create(&path)?, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        match cli.command {
            Command::Stats { dir } => {
                let g = load(&dir)?;
                print!("{}", graph::stats(&g));
            }
            Command::Train(args) => train(args)?,
            Command::Suite { spec, data, out } => {
                let spec = SuiteSpec::from_path(&spec)?;
                let g = load(&data)?;
                eprintln!("running {} training runs", spec.runs());
                let table = run_experiment_suite(&spec, &g)?;
                match out {
                    Some(path) => table.write_csv(create(&path)?)?,
                    None => table.write_csv(io::stdout().lock())?,
                }
            }
            Command::Paths { demo } => print!("{}", demo::render(&demo)?),
            Command::Decide { p1, p2 } => println!("{}", guided_decision(p1, p2)?),
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
