//! `pipeline`: every stage in dependency order, one command.
//!
//! Corpus -> features -> mining -> autoencoder -> both siamese models ->
//! scores for the three systems -> tuned fusion -> metrics -> summary.
//! The first failing stage aborts the run; stages that already ran keep
//! their artifacts, so a fixed config can resume by running the remaining
//! subcommands by hand.

use crate::artifact::RunReport;
use crate::config::Ctx;
use crate::stages::{ae, corpus, featurize, mine, scoring, siamese};
use crate::Result;
use anyhow::Context;
use serde::{Deserialize, Serialize};
use ssv_core::eval::MetricsReport;

/// One row of the final summary table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub system: String,
    pub eer: f64,
    pub min_dcf: f64,
}

/// Stage names in execution order, as shown by `--dry-run`.
pub fn plan() -> Vec<&'static str> {
    vec![
        "synth-corpus",
        "featurize",
        "mine",
        "train-ae",
        "extract-ae",
        "train-double",
        "train-triple",
        "extract-embeddings",
        "score-s1",
        "score-s2",
        "score-s3",
        "tune-fusion",
        "fuse",
        "evaluate-s1",
        "evaluate-s2",
        "evaluate-s3",
        "evaluate-fusion",
        "summary",
    ]
}

/// Runs the whole pipeline, logging one line per stage through `log`.
pub fn run(ctx: &Ctx, mut log: impl FnMut(&str)) -> Result<Vec<SummaryRow>> {
    let mut step = |name: &str, report: Result<RunReport>| -> Result<()> {
        let report = report?;
        log(&format!("{name}: done in {} ms", report.wall_ms));
        Ok(())
    };

    step("synth-corpus", corpus::run(ctx))?;
    step("featurize", featurize::run(ctx))?;
    step("mine", mine::run(ctx))?;
    step("train-ae", ae::train(ctx))?;
    step("extract-ae", ae::extract(ctx))?;
    step("train-double", siamese::train_double(ctx))?;
    step("train-triple", siamese::train_triple(ctx))?;
    step("extract-embeddings", siamese::extract_embeddings(ctx))?;
    for s in ["s1", "s2", "s3"] {
        step(&format!("score-{s}"), scoring::score(ctx, s))?;
    }
    step("tune-fusion", scoring::tune(ctx))?;
    step("fuse", scoring::fuse(ctx, None, None, None))?;
    for s in ["s1", "s2", "s3", "fusion"] {
        step(
            &format!("evaluate-{s}"),
            scoring::evaluate(ctx, &ctx.cfg.score_file(s), None, None),
        )?;
    }

    let rows = summarize(ctx)?;
    for row in &rows {
        log(&format!(
            "{:<10} eer {:.4}  min_dcf {:.4}",
            row.system, row.eer, row.min_dcf
        ));
    }
    Ok(rows)
}

/// Collects the four metrics files into `summary.json`: one row each for
/// System-1, System-2, System-3, and the fusion.
pub fn summarize(ctx: &Ctx) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for (file, display) in [
        ("s1", "System-1"),
        ("s2", "System-2"),
        ("s3", "System-3"),
        ("fusion", "Fusion"),
    ] {
        let path = ctx.cfg.metrics_file(file);
        crate::require_file(&path)?;
        let metrics: MetricsReport = serde_json::from_str(
            &std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?,
        )
        .with_context(|| format!("parsing {}", path.display()))?;
        rows.push(SummaryRow {
            system: display.to_string(),
            eer: metrics.eer,
            min_dcf: metrics.min_dcf,
        });
    }
    let json = serde_json::to_string_pretty(&rows).expect("summary serializes");
    std::fs::write(ctx.cfg.summary_file(), json + "\n")
        .with_context(|| format!("writing {}", ctx.cfg.summary_file().display()))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_plan_names_all_stages_in_dependency_order() {
        let p = plan();
        assert_eq!(p.len(), 18);
        assert_eq!(p.first(), Some(&"synth-corpus"));
        assert_eq!(p.last(), Some(&"summary"));
        let fuse_at = p.iter().position(|s| *s == "fuse").unwrap();
        let tune_at = p.iter().position(|s| *s == "tune-fusion").unwrap();
        assert!(tune_at < fuse_at, "fusion weights must be tuned first");
    }
}
