use anyhow::Context;
use clap::{Parser, Subcommand};
use std::io::Write;
use ssv_cli::config::{Ctx, PipelineConfig};
use ssv_cli::stages::{ae, corpus, featurize, mine, pipeline, scoring, siamese};
use ssv_cli::{fragments, CliError};
use ssv_core::eval::FusionWeights;
use std::path::PathBuf;

/// Self-supervised speaker verification: corpus synthesis, feature
/// extraction, cosine-space mining, autoencoder and siamese training,
/// scoring, and fusion — each as a separate deterministic stage.
#[derive(Debug, Parser)]
#[command(name = "ssv", version, about, max_term_width = 100)]
struct Cli {
    /// JSON config file; unset fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run directory; overrides `paths.root` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Master seed; overrides the config and the SSV_SEED variable.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Encoder profile ("full" or "tiny"); overrides the config.
    #[arg(long, global = true)]
    profile: Option<String>,

    /// Worker threads for the parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Render the synthetic corpus: wavs, manifests, vectors, trials.
    SynthCorpus,
    /// Compute log-mel features for every manifest utterance.
    Featurize,
    /// Mine client/impostor pairs and triplets in cosine space.
    Mine,
    /// Train the nearest-neighbor autoencoder on the training vectors.
    TrainAe,
    /// Map all corpus vectors through the trained autoencoder.
    ExtractAe,
    /// Train the double-branch (pair classifier) siamese network.
    TrainDouble,
    /// Train the triple-branch (triplet margin) siamese network.
    TrainTriple,
    /// Embed the evaluation utterances with the triple-branch encoder.
    ExtractEmbeddings,
    /// Score the trial list with one system.
    Score {
        /// s1 (ae-vectors), s2 (double-branch), s3 (embeddings), or
        /// ivector (raw reference vectors).
        #[arg(long)]
        system: String,
    },
    /// Compute EER and minimum DCF for a score file.
    Evaluate {
        /// Score file ("enroll test score" lines).
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        /// Labeled trial list; defaults to the run's own.
        #[arg(long, value_name = "FILE")]
        trials: Option<PathBuf>,
        /// Metrics output; defaults to eval/metrics_<system>.json.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Fuse the three systems' score files into one.
    Fuse {
        /// Weight on s1 within the s1/s2 group (requires --beta).
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        /// Weight on the s1/s2 group against s3 (requires --alpha).
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
        /// Read weights from a JSON file instead of flags or tuning.
        #[arg(long, value_name = "FILE", conflicts_with = "alpha")]
        weights_file: Option<PathBuf>,
        /// Min-max normalize each system before fusing.
        #[arg(long)]
        normalize: bool,
    },
    /// Grid-search fusion weights on the labeled trial list.
    TuneFusion {
        /// Grid resolution in (0, 1]; defaults to the config value.
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Verify every layer and model gradient against finite differences.
    Gradcheck,
    /// Run all stages in order, ending with the summary table.
    Pipeline {
        /// Print the stage plan without running anything.
        #[arg(long)]
        dry_run: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(e.exit_code());
        }
    }
}

fn effective_config(cli: &Cli) -> ssv_cli::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        cfg.paths.root = dir.clone();
    }
    // seed precedence: flag, then environment, then config file
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    } else if let Ok(text) = std::env::var("SSV_SEED") {
        cfg.seed = text
            .parse()
            .with_context(|| format!("SSV_SEED must be an integer, got {text:?}"))?;
    }
    if let Some(profile) = &cli.profile {
        cfg.profile = profile.clone();
    }
    // subcommand overrides belong in the config *before* it is digested
    if let Cmd::TuneFusion {
        grid_step: Some(step),
    } = &cli.cmd
    {
        cfg.eval.grid_step = *step;
    }
    if let Cmd::Fuse {
        normalize: true, ..
    } = &cli.cmd
    {
        cfg.eval.normalize = true;
    }
    cfg.encoder_profile()?; // fail fast on unknown profile names
    Ok(cfg)
}

fn run(cli: Cli) -> ssv_cli::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the thread pool")?;
    }
    let ctx = Ctx::new(effective_config(&cli)?);

    match &cli.cmd {
        Cmd::SynthCorpus => report_line(corpus::run(&ctx)?),
        Cmd::Featurize => report_line(featurize::run(&ctx)?),
        Cmd::Mine => report_line(mine::run(&ctx)?),
        Cmd::TrainAe => report_line(ae::train(&ctx)?),
        Cmd::ExtractAe => report_line(ae::extract(&ctx)?),
        Cmd::TrainDouble => report_line(siamese::train_double(&ctx)?),
        Cmd::TrainTriple => report_line(siamese::train_triple(&ctx)?),
        Cmd::ExtractEmbeddings => report_line(siamese::extract_embeddings(&ctx)?),
        Cmd::Score { system } => report_line(scoring::score(&ctx, system)?),
        Cmd::Evaluate { scores, trials, out } => report_line(scoring::evaluate(
            &ctx,
            scores,
            trials.as_deref(),
            out.as_deref(),
        )?),
        Cmd::Fuse {
            alpha,
            beta,
            weights_file,
            normalize,
        } => {
            let flag_weights = match (alpha, beta) {
                (Some(a), Some(b)) => Some(FusionWeights::new(*a, *b).map_err(ssv_cli::invalid)?),
                _ => None,
            };
            report_line(scoring::fuse(
                &ctx,
                flag_weights,
                weights_file.as_deref(),
                Some(*normalize || ctx.cfg.eval.normalize),
            )?)
        }
        Cmd::TuneFusion { .. } => report_line(scoring::tune(&ctx)?),
        Cmd::Gradcheck => gradcheck()?,
        Cmd::Pipeline { dry_run } => {
            if *dry_run {
                for stage in pipeline::plan() {
                    emit(stage);
                }
            } else {
                pipeline::run(&ctx, |line| emit(line))?;
            }
        }
    }
    Ok(())
}

/// Prints a line, swallowing broken pipes (e.g. `ssv ... | head`).
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn report_line(report: ssv_cli::artifact::RunReport) {
    let mut parts = vec![format!("{}: ok in {} ms", report.stage, report.wall_ms)];
    for (key, value) in &report.counters {
        parts.push(format!("{key}={value}"));
    }
    emit(&parts.join("  "));
}

fn gradcheck() -> ssv_cli::Result<()> {
    let results = fragments::run_battery().map_err(ssv_cli::invalid)?;
    let mut failed = 0usize;
    for r in &results {
        emit(&format!(
            "{:<30} {}  max_rel_err={:.3e}  coords={}",
            r.name,
            if r.outcome.passed { "pass" } else { "FAIL" },
            r.outcome.max_rel_err,
            r.outcome.coords_checked
        ));
        if !r.outcome.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Invalid(anyhow::anyhow!(
            "{failed} of {} gradient checks failed",
            results.len()
        )));
    }
    emit(&format!("all {} gradient checks passed", results.len()));
    Ok(())
}
