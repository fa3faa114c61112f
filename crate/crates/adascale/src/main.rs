//! Benchmark CLI: corpus generation, optimal-scale label generation,
//! regressor training, single-policy runs, and multi-policy comparison.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 malformed
//! input file. All randomness flows from --seed; identical invocations
//! produce byte-identical output files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adascale::io::{
    load_corpus, load_labels, load_profile, read_text, save_corpus, save_labels, write_text,
    EngineProfile, IoError,
};
use adascale::pipeline::{
    compare_policies, generate_scale_labels, run_policy, train_regressor, PipelineError,
    PolicyKind, PolicySpec,
};
use adascale::regressor::{Pooling, RegressorConfig, RegressorModel, TrainerState};
use adascale::scalecodec::ScaleSet;
use adascale::simdet::generate_corpus;
use adascale::LossConfig;

#[derive(Parser)]
#[command(name = "adascale", version, about = "Adaptive input-scale detection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic video corpus (JSON-Lines, one frame per line).
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        /// Number of snippets; overrides the profile's generator setting.
        #[arg(long)]
        snippets: Option<usize>,
        /// Frames per snippet; overrides the profile's generator setting.
        #[arg(long)]
        frames: Option<usize>,
        /// Number of object classes; overrides the profile's generator setting.
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional profile JSON with a "generator" section.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Compute optimal-scale labels for a corpus over a scale set.
    GenLabels {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Comma-separated scale set, e.g. 600,480,360,240,128.
        #[arg(long, value_parser = parse_scales)]
        scales: ScaleSet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the scale regressor on a label file.
    Train {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 2)]
        epochs: u32,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        /// Epoch position after which the learning rate decays once.
        #[arg(long, default_value_t = 1.3)]
        decay_epoch: f64,
        #[arg(long, default_value_t = 0.1)]
        decay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        batch_size: usize,
        /// Branch kernel sizes, comma-separated odd integers.
        #[arg(long, default_value = "1,3", value_delimiter = ',')]
        kernels: Vec<usize>,
        /// Output channels per branch.
        #[arg(long, default_value_t = 96)]
        branch_width: usize,
        #[arg(long, default_value = "average")]
        pooling: String,
    },
    /// Run one scale policy over a corpus and write an evaluation report.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// fixed:M, random, adascale, or multiscale.
        #[arg(long)]
        policy: String,
        /// Trained model JSON (required for adascale).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_parser = parse_scales)]
        scales: ScaleSet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run several policies over several seeds and write a comparison table.
    Compare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Comma-separated policy list, e.g. fixed:600,random,adascale.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<String>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Trained model JSON (required when policies include adascale).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Scale set shared by all policies; defaults to the model's set when
        /// a model is given, else 600,480,360,240,128.
        #[arg(long, value_parser = parse_scales)]
        scales: Option<ScaleSet>,
        /// Directory for per-policy precision-recall CSV files.
        #[arg(long)]
        prcurves: Option<PathBuf>,
        /// Directory for per-policy scale-histogram CSV files.
        #[arg(long)]
        hist: Option<PathBuf>,
    },
}

fn parse_scales(s: &str) -> Result<ScaleSet, String> {
    let scales: Vec<u32> = s
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    ScaleSet::new(scales).map_err(|e| e.to_string())
}

/// Errors that map onto the documented exit codes.
enum CliError {
    /// Exit code 2: invalid arguments or configuration.
    Config(String),
    /// Exit code 3: malformed or unreadable input file.
    Input(String),
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn load_profile_or_default(path: Option<&PathBuf>) -> Result<EngineProfile, CliError> {
    match path {
        Some(p) => Ok(load_profile(p)?),
        None => Ok(EngineProfile::default()),
    }
}

fn load_model(path: &std::path::Path) -> Result<RegressorModel, CliError> {
    let text = read_text(path)?;
    RegressorModel::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenCorpus {
            out,
            snippets,
            frames,
            classes,
            seed,
            profile,
        } => {
            let mut cfg = load_profile_or_default(profile.as_ref())?.generator;
            if let Some(n) = snippets {
                cfg.snippets = n;
            }
            if let Some(n) = frames {
                cfg.frames_per_snippet = n;
            }
            if let Some(n) = classes {
                cfg.classes = n;
            }
            let corpus = generate_corpus(&cfg, seed).map_err(|e| CliError::Config(e.to_string()))?;
            save_corpus(&out, &corpus)?;
            println!(
                "wrote {} snippets x {} frames to {}",
                cfg.snippets,
                cfg.frames_per_snippet,
                out.display()
            );
            Ok(())
        }
        Command::GenLabels {
            corpus,
            profile,
            scales,
            seed,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let profile = load_profile(&profile)?;
            let labels = generate_scale_labels(
                &corpus,
                &profile.detector,
                &scales,
                &LossConfig::default(),
                seed,
            )?;
            save_labels(&out, &labels)?;
            println!("wrote {} labels to {}", labels.len(), out.display());
            Ok(())
        }
        Command::Train {
            labels,
            epochs,
            lr,
            decay_epoch,
            decay,
            seed,
            out,
            batch_size,
            kernels,
            branch_width,
            pooling,
        } => {
            if epochs == 0 || batch_size == 0 {
                return Err(CliError::Config("epochs and batch size must be >= 1".into()));
            }
            if kernels.is_empty() || kernels.iter().any(|k| k % 2 == 0) {
                return Err(CliError::Config("kernel sizes must be odd".into()));
            }
            if !(lr.is_finite() && lr >= 0.0 && decay.is_finite() && decay_epoch.is_finite()) {
                return Err(CliError::Config("invalid schedule parameters".into()));
            }
            let pooling = match pooling.as_str() {
                "average" => Pooling::Average,
                "max" => Pooling::Max,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown pooling {other:?} (expected average or max)"
                    )))
                }
            };
            let labels = load_labels(&labels)?;
            let in_channels = labels
                .first()
                .map(|l| l.features.channels)
                .ok_or_else(|| CliError::Input("label file is empty".into()))?;
            let config = RegressorConfig {
                in_channels,
                branches: kernels.iter().map(|&k| (k, branch_width)).collect(),
                pooling,
            };
            let trainer = TrainerState {
                initial_lr: lr,
                decay_factor: decay,
                decay_epoch,
                epochs,
                batch_size,
                seed,
            };
            let (model, losses, held_out) = train_regressor(&labels, &config, &trainer)?;
            let json = model
                .to_json()
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_text(&out, &format!("{json}\n"))?;
            let final_loss = losses.last().copied().unwrap_or(f64::NAN);
            match held_out {
                Some(mse) => println!(
                    "trained {} steps, final batch loss {final_loss:.6}, held-out mse {mse:.6}",
                    losses.len()
                ),
                None => println!(
                    "trained {} steps, final batch loss {final_loss:.6}, no held-out split",
                    losses.len()
                ),
            }
            Ok(())
        }
        Command::Run {
            corpus,
            profile,
            policy,
            model,
            scales,
            seed,
            report,
        } => {
            let corpus = load_corpus(&corpus)?;
            let profile = load_profile(&profile)?;
            let policy = PolicySpec::parse(&policy, &scales)?;
            let model = match &model {
                Some(p) => Some(load_model(p)?),
                None => None,
            };
            let out = run_policy(&corpus, &profile.detector, &policy, model.as_ref(), seed)?;
            let json = serde_json::to_string_pretty(&out.report)
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_text(&report, &format!("{json}\n"))?;
            println!(
                "{policy}: mAP {:.4}, workload {:.0}, tp {}, fp {}",
                out.report.map, out.report.total_workload, out.report.tp_total, out.report.fp_total
            );
            Ok(())
        }
        Command::Compare {
            corpus,
            profile,
            policies,
            seeds,
            out,
            model,
            scales,
            prcurves,
            hist,
        } => {
            if policies.len() < 2 {
                return Err(CliError::Config("need at least two policies".into()));
            }
            if seeds.is_empty() {
                return Err(CliError::Config("need at least one seed".into()));
            }
            let corpus = load_corpus(&corpus)?;
            let profile = load_profile(&profile)?;
            let model = match &model {
                Some(p) => Some(load_model(p)?),
                None => None,
            };
            let scales = scales
                .or_else(|| model.as_ref().map(|m| m.scale_set.clone()))
                .unwrap_or_else(ScaleSet::reg_default);
            let policies = policies
                .iter()
                .map(|p| PolicySpec::parse(p, &scales))
                .collect::<Result<Vec<_>, _>>()?;
            if policies.iter().any(|p| p.kind == PolicyKind::Adascale) && model.is_none() {
                return Err(CliError::Config(
                    "adascale policy requires --model".into(),
                ));
            }
            let table = compare_policies(&corpus, &profile.detector, &policies, model.as_ref(), &seeds)?;
            write_text(&out, &table.to_csv())?;
            if let Some(dir) = &prcurves {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
                for (name, reports) in &table.reports {
                    for (report, seed) in reports.iter().zip(&seeds) {
                        let path = dir.join(format!("{}_seed{}.csv", name.replace(':', "_"), seed));
                        write_text(&path, &report.pr_csv())?;
                    }
                }
            }
            if let Some(dir) = &hist {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
                for (name, reports) in &table.reports {
                    for (report, seed) in reports.iter().zip(&seeds) {
                        let path = dir.join(format!("{}_seed{}.csv", name.replace(':', "_"), seed));
                        write_text(&path, &report.histogram_csv())?;
                    }
                }
            }
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}
