use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgAction, Parser, Subcommand};
use insectsound::commands::{cmd_augment, cmd_evaluate, cmd_extract, cmd_project, cmd_segment, cmd_synth_fixture};
use insectsound::config::{ConfigLayer, RunConfig};
use insectsound::fixture::FixtureParams;

#[derive(Parser)]
#[command(name = "insectsound", version)]
#[command(about = "Insect sound classification: segmentation, augmentation, MFCC features and evaluation")]
struct Cli {
    /// TOML file with default settings; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(flatten)]
    settings: ConfigLayer,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut the manifest's segments into fixed-length instances
    Segment,
    /// Write pitch-shifted and time-stretched variants of every stored instance
    Augment,
    /// Export MFCC features of the stored instances as CSV
    Extract,
    /// Train and score every model on every fold; exits with 2 if any cell failed
    Evaluate,
    /// Write t-SNE plot data grouped by class and by clip
    Project {
        /// Also project the augmented instances
        #[arg(long)]
        augmented: bool,
    },
    /// Generate the synthetic four-species dataset and its manifest
    SynthFixture {
        /// Destination directory (default: <output-dir>/fixture)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        clips_per_class: u32,
        /// Minimum voiced seconds per clip
        #[arg(long, default_value_t = 4.5)]
        voiced_seconds: f64,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => ConfigLayer::load(p)?,
        None => ConfigLayer::default(),
    };
    let cfg = RunConfig::resolve(file.merge(cli.settings))?;
    match cli.command {
        Command::Segment => {
            let s = cmd_segment(&cfg)?;
            println!(
                "{} instances of {} samples in {} ({} segments discarded)",
                s.instances,
                s.window_samples,
                cfg.store.display(),
                s.discarded.len()
            );
            for (class, n) in &s.instances_per_class {
                println!("  {class}: {n}");
            }
        }
        Command::Augment => println!("augmented store: {}", cmd_augment(&cfg)?.display()),
        Command::Extract => println!("features: {}", cmd_extract(&cfg)?.display()),
        Command::Evaluate => {
            let report = cmd_evaluate(&cfg)?;
            println!("{:<17} {:>4} {:>4} {:>9} {:>9} {:>7}", "model", "k", "i", "before", "after", "delta");
            let pct = |v: Option<f64>| v.map_or("-".to_string(), |a| format!("{:.3}", a));
            for a in report.averages.iter().filter(|a| !a.augmented) {
                let d = report
                    .deltas
                    .iter()
                    .find(|d| d.model == a.model && d.top_k == a.top_k && d.balanced_i == a.balanced_i);
                println!(
                    "{:<17} {:>4} {:>4} {:>9} {:>9} {:>7}",
                    a.model.to_string(),
                    a.top_k.to_string(),
                    a.balanced_i,
                    pct(a.mean_accuracy),
                    pct(d.and_then(|d| d.after)),
                    d.and_then(|d| d.delta).map_or("-".into(), |v| format!("{v:+.3}")),
                );
            }
            let failed = report.failed_cells();
            println!("report: {}", cfg.output_dir.display());
            if failed > 0 {
                eprintln!("{failed} of {} cells failed; see report.json for reasons", report.cells.len());
                return Ok(ExitCode::from(2));
            }
        }
        Command::Project { augmented } => {
            for f in cmd_project(&cfg, augmented)?.files {
                println!("{}", f.display());
            }
        }
        Command::SynthFixture {
            out,
            clips_per_class,
            voiced_seconds,
        } => {
            let dir = out.unwrap_or_else(|| cfg.output_dir.join("fixture"));
            let params = FixtureParams {
                seed: cfg.seed,
                sample_rate: cfg.sample_rate,
                clips_per_class,
                voiced_seconds,
            };
            let manifest = cmd_synth_fixture(&dir, &params).with_context(|| format!("writing {}", dir.display()))?;
            println!("{}", manifest.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
