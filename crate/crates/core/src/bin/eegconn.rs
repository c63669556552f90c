use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eegconn::error::{Error, Result};
use eegconn::pipeline::{
    cmd_evaluate, cmd_extract, cmd_report, cmd_rnn, cmd_synth, cmd_temporal, write_run_manifest,
    FileConfig, Overrides, RunConfig,
};

/// Band decomposition, connectivity features, Fisher selection, SVM
/// leave-one-out evaluation, temporal interval scans and a recurrent
/// baseline, over a manifest-described dataset.
#[derive(Parser)]
#[command(name = "eegconn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for run artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Dataset directory (holding manifest.json).
    #[arg(long)]
    dataset: Option<PathBuf>,

    /// Bands to process (e.g. --bands gamma beta).
    #[arg(long, num_args = 1..)]
    bands: Option<Vec<String>>,

    /// Feature types to process (de, pearson, coherence, plv).
    #[arg(long, num_args = 1..)]
    measures: Option<Vec<String>>,

    /// Interval grid: `start:end` pairs (end may be `end`) separated by
    /// commas, or the literal `canonical`.
    #[arg(long)]
    intervals: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        /// Preset: desk, ramped or null.
        #[arg(long, default_value = "desk")]
        preset: String,
    },
    /// Extract per-window feature tables to CSV.
    Extract(PipelineArgs),
    /// Band accuracy table, selection sweep and fusion reports.
    Evaluate(PipelineArgs),
    /// Sliding-interval accuracy scan with grid exports.
    Temporal(PipelineArgs),
    /// Recurrent baseline and the SVM comparison table.
    Rnn(PipelineArgs),
    /// Collate generated reports into report.md.
    Report,
}

fn resolve(cli: &Cli, args: &PipelineArgs) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    RunConfig::resolve(
        file,
        Overrides {
            dataset: args.dataset.clone(),
            out: cli.out.clone(),
            seed: cli.seed,
            jobs: cli.jobs,
            bands: args.bands.clone(),
            measures: args.measures.clone(),
            intervals: args.intervals.clone(),
        },
    )
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // ignore failure: the global pool can only be set once
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { preset } => {
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::InvalidArgument("synth needs --out".into()))?;
            let manifest = cmd_synth(preset, cli.seed.unwrap_or(0), &out)?;
            eprintln!(
                "wrote {} trials to {}",
                manifest.trials.len(),
                out.display()
            );
        }
        Command::Extract(args) => {
            let cfg = resolve(&cli, args)?;
            set_jobs(cfg.jobs);
            write_run_manifest(&cfg, cli.config.as_deref())?;
            let paths = cmd_extract(&cfg)?;
            eprintln!("extracted {} feature tables", paths.len());
        }
        Command::Evaluate(args) => {
            let cfg = resolve(&cli, args)?;
            set_jobs(cfg.jobs);
            write_run_manifest(&cfg, cli.config.as_deref())?;
            cmd_evaluate(&cfg)?;
            eprintln!(
                "evaluation reports under {}",
                cfg.out_dir.join("reports").display()
            );
        }
        Command::Temporal(args) => {
            let cfg = resolve(&cli, args)?;
            set_jobs(cfg.jobs);
            write_run_manifest(&cfg, cli.config.as_deref())?;
            cmd_temporal(&cfg)?;
            eprintln!(
                "temporal reports under {}",
                cfg.out_dir.join("reports").display()
            );
        }
        Command::Rnn(args) => {
            let cfg = resolve(&cli, args)?;
            set_jobs(cfg.jobs);
            write_run_manifest(&cfg, cli.config.as_deref())?;
            cmd_rnn(&cfg)?;
            eprintln!(
                "recurrent reports under {}",
                cfg.out_dir.join("reports").display()
            );
        }
        Command::Report => {
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::InvalidArgument("report needs --out".into()))?;
            let path = cmd_report(&out)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
