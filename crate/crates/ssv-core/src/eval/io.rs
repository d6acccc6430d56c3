//! Plain-text trial and score lists, and the metrics report JSON.
//!
//! Trial lines are `<label> <enroll> <test>` with label `1` (target) or
//! `0` (nontarget), or just `<enroll> <test>` for unlabeled lists.  A
//! file must commit to one of the two shapes.  Score lines are
//! `<enroll> <test> <score>` with the score printed to six decimals.

use super::types::{MetricsReport, ScoreSet, Trial};
use super::EvalError;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn bad(path: &Path, line: usize, detail: impl Into<String>) -> EvalError {
    EvalError::BadRecord {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

/// Reads a trial list; blank lines are skipped, labels must be uniform.
pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>, EvalError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut trials = Vec::new();
    let mut labeled: Option<bool> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let trial = match fields.as_slice() {
            [] => continue,
            [enroll, test] => Trial::unlabeled(*enroll, *test),
            [label, enroll, test] => {
                let label = match *label {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(bad(path, lineno, format!("label must be 0 or 1, got '{other}'")))
                    }
                };
                Trial::labeled(*enroll, *test, label)
            }
            _ => {
                return Err(bad(
                    path,
                    lineno,
                    format!("expected 2 or 3 fields, got {}", fields.len()),
                ))
            }
        };
        let has_label = trial.label.is_some();
        match labeled {
            None => labeled = Some(has_label),
            Some(expected) if expected != has_label => {
                return Err(bad(path, lineno, "mixed labeled and unlabeled lines"))
            }
            _ => {}
        }
        trials.push(trial);
    }
    if trials.is_empty() {
        return Err(EvalError::EmptyInput(format!(
            "trial list {}",
            path.display()
        )));
    }
    Ok(trials)
}

/// Writes a trial list in the shape it carries (labeled or not).
pub fn write_trials(path: impl AsRef<Path>, trials: &[Trial]) -> Result<(), EvalError> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for t in trials {
        match t.label {
            Some(l) => writeln!(out, "{} {} {}", u8::from(l), t.enroll, t.test)?,
            None => writeln!(out, "{} {}", t.enroll, t.test)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a score file into an unlabeled [`ScoreSet`].
pub fn read_scores(
    path: impl AsRef<Path>,
    system: impl Into<String>,
) -> Result<ScoreSet, EvalError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [enroll, test, score] => {
                let score: f64 = score
                    .parse()
                    .map_err(|e| bad(path, lineno, format!("bad score '{score}': {e}")))?;
                if !score.is_finite() {
                    return Err(bad(path, lineno, format!("non-finite score {score}")));
                }
                entries.push((Trial::unlabeled(*enroll, *test), score));
            }
            _ => {
                return Err(bad(
                    path,
                    lineno,
                    format!("expected 3 fields, got {}", fields.len()),
                ))
            }
        }
    }
    if entries.is_empty() {
        return Err(EvalError::EmptyInput(format!(
            "score file {}",
            path.display()
        )));
    }
    Ok(ScoreSet::new(system, entries))
}

/// Writes scores as `<enroll> <test> <score:%.6f>` lines.
pub fn write_scores(path: impl AsRef<Path>, set: &ScoreSet) -> Result<(), EvalError> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for (trial, score) in &set.entries {
        writeln!(out, "{} {} {score:.6}", trial.enroll, trial.test)?;
    }
    out.flush()?;
    Ok(())
}

/// Copies labels from a trial list onto a score set read back from disk.
///
/// The join is positional; enroll and test ids must agree line by line,
/// which catches a score file written against a different trial list.
pub fn attach_labels(set: &ScoreSet, trials: &[Trial]) -> Result<ScoreSet, EvalError> {
    if set.entries.len() != trials.len() {
        return Err(EvalError::LengthMismatch {
            left: set.entries.len(),
            right: trials.len(),
        });
    }
    let entries = set
        .entries
        .iter()
        .zip(trials)
        .enumerate()
        .map(|(index, ((scored, score), trial))| {
            if scored.enroll != trial.enroll || scored.test != trial.test {
                return Err(EvalError::TrialMismatch {
                    index,
                    left: format!("{} {}", scored.enroll, scored.test),
                    right: format!("{} {}", trial.enroll, trial.test),
                });
            }
            Ok((trial.clone(), *score))
        })
        .collect::<Result<_, _>>()?;
    Ok(ScoreSet::new(set.system.clone(), entries))
}

/// Writes a metrics report as pretty-printed JSON.
pub fn write_metrics(path: impl AsRef<Path>, report: &MetricsReport) -> Result<(), EvalError> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| EvalError::BadParams(format!("metrics not serializable: {e}")))?;
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::types::DcfParams;
    use tempfile::tempdir;

    #[test]
    fn trial_round_trip_keeps_labels_and_order() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trials.txt");
        let trials = vec![
            Trial::labeled("a", "b", true),
            Trial::labeled("a", "c", false),
        ];
        write_trials(&path, &trials).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "1 a b\n0 a c\n"
        );
        assert_eq!(read_trials(&path).unwrap(), trials);
    }

    #[test]
    fn unlabeled_trials_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trials.txt");
        let trials = vec![Trial::unlabeled("a", "b"), Trial::unlabeled("c", "d")];
        write_trials(&path, &trials).unwrap();
        assert_eq!(read_trials(&path).unwrap(), trials);
    }

    #[test]
    fn mixed_labeling_and_bad_labels_are_rejected_with_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trials.txt");

        std::fs::write(&path, "1 a b\nc d\n").unwrap();
        match read_trials(&path) {
            Err(EvalError::BadRecord { line: 2, .. }) => {}
            other => panic!("expected BadRecord at line 2, got {other:?}"),
        }

        std::fs::write(&path, "2 a b\n").unwrap();
        match read_trials(&path) {
            Err(EvalError::BadRecord { line: 1, detail, .. }) => {
                assert!(detail.contains("label"), "{detail}")
            }
            other => panic!("expected BadRecord, got {other:?}"),
        }
    }

    #[test]
    fn score_round_trip_is_bitwise_at_six_decimals() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scores.txt");
        let set = ScoreSet::new(
            "cosine",
            vec![
                (Trial::unlabeled("a", "b"), 0.1234565),
                (Trial::unlabeled("a", "c"), -1.0),
            ],
        );
        write_scores(&path, &set).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a b 0.123456\na c -1.000000\n");

        // Reading back and rewriting reproduces the file byte for byte.
        let back = read_scores(&path, "cosine").unwrap();
        let path2 = dir.path().join("scores2.txt");
        write_scores(&path2, &back).unwrap();
        assert_eq!(std::fs::read_to_string(&path2).unwrap(), text);
    }

    #[test]
    fn score_parse_errors_carry_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scores.txt");
        std::fs::write(&path, "a b 0.5\na c oops\n").unwrap();
        match read_scores(&path, "s") {
            Err(EvalError::BadRecord { line: 2, .. }) => {}
            other => panic!("expected BadRecord at line 2, got {other:?}"),
        }
    }

    #[test]
    fn attach_labels_joins_by_position_and_checks_ids() {
        let set = ScoreSet::new(
            "s",
            vec![
                (Trial::unlabeled("a", "b"), 0.9),
                (Trial::unlabeled("a", "c"), 0.1),
            ],
        );
        let trials = vec![
            Trial::labeled("a", "b", true),
            Trial::labeled("a", "c", false),
        ];
        let labeled = attach_labels(&set, &trials).unwrap();
        assert_eq!(labeled.entries[0].0.label, Some(true));
        assert_eq!(labeled.entries[1].0.label, Some(false));
        assert_eq!(labeled.entries[1].1, 0.1);

        let wrong = vec![
            Trial::labeled("a", "b", true),
            Trial::labeled("a", "d", false),
        ];
        assert!(matches!(
            attach_labels(&set, &wrong),
            Err(EvalError::TrialMismatch { index: 1, .. })
        ));
        assert!(matches!(
            attach_labels(&set, &trials[..1]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn metrics_report_lands_as_json() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        let report = MetricsReport {
            eer: 0.125,
            eer_threshold: 0.4,
            min_dcf: 0.3,
            dcf_threshold: 0.55,
            params: DcfParams::default(),
        };
        write_metrics(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["eer"], 0.125);
        assert_eq!(back["params"]["p_target"], 0.05);
    }

    #[test]
    fn empty_files_are_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, "\n\n").unwrap();
        assert!(matches!(read_trials(&path), Err(EvalError::EmptyInput(_))));
        assert!(matches!(
            read_scores(&path, "s"),
            Err(EvalError::EmptyInput(_))
        ));
    }
}
