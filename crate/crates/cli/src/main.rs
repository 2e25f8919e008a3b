use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use wmseg_cli::cmd;
use wmseg_cli::config::PhantomLayout;
use wmseg_cli::{CliError, PipelineConfig, Result};

/// White-matter bundle segmentation pipeline.
#[derive(Parser)]
#[command(name = "wmseg", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `paths.data_root` (and WMSEG_DATA_ROOT).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,
    /// Overrides `paths.output_root` (and WMSEG_OUTPUT_ROOT).
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,
    /// Any config key, as `section.key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort under the data root.
    GeneratePhantom {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_layout)]
        layout: Option<PhantomLayout>,
        /// Also write synthetic TractSeg outputs.
        #[arg(long)]
        tractseg: bool,
    },
    /// Resample, normalize and binarize the data root into the output root.
    Preprocess {
        #[arg(long)]
        voxel_size: Option<f64>,
    },
    /// Subject-level k-fold cross-validation with per-fold checkpoints.
    Train {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        base_width: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Predict masks for new subjects with a trained checkpoint.
    Infer {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score predictions against references; optionally compare a second method.
    Evaluate {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        references: Option<PathBuf>,
        /// Second method's subject directories.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Merge TractSeg outputs into expert-equivalent bundles.
    Merge {
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long = "assemble-60")]
        assemble_60: bool,
    },
    /// Wilcoxon tests with FDR correction and Cohen's d between two tables.
    CompareStats {
        #[arg(long)]
        a: Option<PathBuf>,
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long)]
        effect_a: Option<PathBuf>,
        #[arg(long)]
        effect_b: Option<PathBuf>,
    },
    /// Box plot and effect-size heatmap as SVG.
    Report {
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        metrics_b: Option<PathBuf>,
        #[arg(long)]
        comparison: Option<PathBuf>,
        #[arg(long)]
        effect_sizes: Option<PathBuf>,
    },
}

fn parse_layout(s: &str) -> std::result::Result<PhantomLayout, String> {
    match s {
        "tubes" => Ok(PhantomLayout::Tubes),
        "expert" => Ok(PhantomLayout::Expert),
        _ => Err(format!("unknown layout `{s}` (tubes, expert)")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GeneratePhantom { .. } => "generate-phantom",
            Command::Preprocess { .. } => "preprocess",
            Command::Train { .. } => "train",
            Command::Infer { .. } => "infer",
            Command::Evaluate { .. } => "evaluate",
            Command::Merge { .. } => "merge",
            Command::CompareStats { .. } => "compare-stats",
            Command::Report { .. } => "report",
        }
    }

    /// Flags that shadow config keys.
    fn apply(&self, cfg: &mut PipelineConfig) {
        match self {
            Command::GeneratePhantom {
                n,
                seed,
                layout,
                tractseg,
            } => {
                set(&mut cfg.phantom.n_subjects, *n);
                set(&mut cfg.phantom.seed, *seed);
                set(&mut cfg.phantom.layout, *layout);
                cfg.phantom.tractseg |= tractseg;
            }
            Command::Preprocess { voxel_size } => set(&mut cfg.preprocess.voxel_size, *voxel_size),
            Command::Train {
                k,
                max_epochs,
                base_width,
                batch_size,
            } => {
                set(&mut cfg.training.k, *k);
                set(&mut cfg.training.max_epochs, *max_epochs);
                set(&mut cfg.model.base_width, *base_width);
                set(&mut cfg.training.batch_size, *batch_size);
            }
            _ => {}
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn print<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    // A closed pipe on stdout is not a failure of the command.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::resolve(cli.config.as_deref(), |k| std::env::var(k).ok())?;
    cfg.apply_overrides(&cli.sets)?;
    set(&mut cfg.paths.data_root, cli.data_root);
    set(&mut cfg.paths.output_root, cli.output_root);
    cli.command.apply(&mut cfg);
    cfg.validate()?;
    let argv: Vec<String> = std::env::args().collect();
    cfg.persist(cli.command.name(), &argv.join(" "))?;

    match cli.command {
        Command::GeneratePhantom { .. } => print(&cmd::generate_phantom(&cfg)?),
        Command::Preprocess { .. } => print(&cmd::preprocess(&cfg)?),
        Command::Train { .. } => {
            let mut err = std::io::stderr();
            let progress: Option<&mut dyn std::io::Write> =
                if cli.quiet { None } else { Some(&mut err) };
            print(&cmd::train(&cfg, progress)?)
        }
        Command::Infer { checkpoint, input } => {
            print(&cmd::infer(&cfg, &cmd::InferArgs { checkpoint, input })?)
        }
        Command::Evaluate {
            predictions,
            references,
            compare,
        } => print(&cmd::evaluate(
            &cfg,
            &cmd::EvaluateArgs {
                predictions,
                references,
                compare,
            },
        )?),
        Command::Merge {
            rules,
            input,
            assemble_60,
        } => print(&cmd::merge(
            &cfg,
            &cmd::MergeArgs {
                rules,
                input,
                assemble_60,
            },
        )?),
        Command::CompareStats {
            a,
            b,
            effect_a,
            effect_b,
        } => print(&cmd::compare_stats(
            &cfg,
            &cmd::CompareArgs {
                a,
                b,
                effect_a,
                effect_b,
            },
        )?),
        Command::Report {
            metrics,
            metrics_b,
            comparison,
            effect_sizes,
        } => print(&cmd::report(
            &cfg,
            &cmd::ReportArgs {
                metrics,
                metrics_b,
                comparison,
                effect_sizes,
            },
        )?),
    }
    Ok(())
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), one_line(&error_chain(&e)));
            ExitCode::FAILURE
        }
    }
}

fn error_chain(e: &CliError) -> String {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        let m = s.to_string();
        if !msg.contains(&m) {
            msg.push_str(": ");
            msg.push_str(&m);
        }
        src = s.source();
    }
    msg
}
