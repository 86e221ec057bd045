use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use vpip::corpus::SynthStatus;
use vpip::pipeline::{self, Layout, ModelSource, RunConfig};

#[derive(Parser)]
#[command(name = "vpip", version, about = "Visual task prompt-based image processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run config ("vpip-config/1"); omitted keys come from the profile.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config leaf, e.g. `--set train.max_steps=50`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the synthetic corpus from a directory of clean images.
    Synth(ConfigArgs),
    /// Train (or resume training) the model on the corpus.
    Train(ConfigArgs),
    /// Adapt a checkpoint to a task from a few pairs.
    Finetune(ConfigArgs),
    /// Score a checkpoint on the corpus and write JSON/CSV reports.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Score a stub that returns ground truth instead of a checkpoint.
        #[arg(long, conflicts_with = "identity")]
        oracle_stub: bool,
        /// Score a stub that returns its input unchanged.
        #[arg(long)]
        identity: bool,
    },
    /// Apply a checkpoint to one image, guided by a prompt pair.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        prompt_source: PathBuf,
        #[arg(long)]
        prompt_target: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Print the PSNR of the output against this image.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Print a saved evaluation report as a table.
    Report {
        /// Path to report.json.
        report: PathBuf,
    },
}

fn load(args: &ConfigArgs) -> Result<(RunConfig, Layout)> {
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides).context("loading run config")?;
    let layout = Layout::from_env(&cfg);
    Ok((cfg, layout))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => {
            let (cfg, layout) = load(&args)?;
            let out = pipeline::cmd_synth(&cfg, &layout).context("synth failed")?;
            match out.status {
                SynthStatus::Unchanged => println!("corpus unchanged"),
                SynthStatus::Created => println!("corpus created ({} entries)", out.entries),
                SynthStatus::Replaced => println!("corpus replaced ({} entries)", out.entries),
            }
            println!("{}", out.manifest.display());
        }
        Command::Train(args) => {
            let (cfg, layout) = load(&args)?;
            let out = pipeline::cmd_train(&cfg, &layout, |rec| {
                if rec.step % 50 == 0 {
                    info!("{}", rec.log_line());
                }
            })
            .context("train failed")?;
            if let Some(s) = out.resumed_from {
                println!("resumed from step {s}");
            }
            println!("trained to step {}", out.final_step);
            println!("{}", out.checkpoint.display());
        }
        Command::Finetune(args) => {
            let (cfg, layout) = load(&args)?;
            let out = pipeline::cmd_finetune(&cfg, &layout).context("finetune failed")?;
            let last = out.epoch_losses.last().copied().unwrap_or(f64::NAN);
            println!(
                "fine-tuned for {} epochs{}, final loss {last:.5}",
                out.epoch_losses.len(),
                if out.stopped_early { " (early stop)" } else { "" }
            );
            println!("{}", out.checkpoint.display());
        }
        Command::Eval { config, oracle_stub, identity } => {
            let (cfg, layout) = load(&config)?;
            let source = if oracle_stub {
                ModelSource::OracleStub
            } else if identity {
                ModelSource::Identity
            } else {
                ModelSource::Checkpoint
            };
            let out = pipeline::cmd_eval(&cfg, &layout, source).context("eval failed")?;
            print!("{}", pipeline::render_report(&out.report));
            println!("{}", out.json.display());
            println!("{}", out.csv.display());
        }
        Command::Infer { checkpoint, input, prompt_source, prompt_target, out, ground_truth } => {
            let psnr = pipeline::cmd_infer(&checkpoint, &input, &prompt_source, &prompt_target, &out, ground_truth.as_deref())
                .context("infer failed")?;
            if let Some(p) = psnr {
                println!("psnr {p:.3} dB");
            }
            println!("{}", out.display());
        }
        Command::Report { report } => {
            let r = pipeline::load_report(&report).with_context(|| format!("reading {}", report.display()))?;
            print!("{}", pipeline::render_report(&r));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
