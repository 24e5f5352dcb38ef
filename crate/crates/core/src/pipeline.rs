//! Labeling harness, dataset assembly, algorithm selection, and automated
//! dispatch.
//!
//! An instance is labeled by timing both solvers under a shared cap: the
//! faster conclusive run wins (0 = OA, 1 = B&B, ties to OA), and instances
//! neither solver finishes are discarded. Prediction extracts the variable
//! graph, runs the classifier, and dispatches to the chosen solver.

use crate::gnn::{forward, GcnParams, GnnError, TrainExample, LABEL_NAMES};
use crate::graph::{build_variable_graph, VariableGraph};
use crate::model::Problem;
use crate::parallel::{join, par_map, Parallelism};
use crate::solvers::{bnb_solve, oa_solve, SolveLimits, SolveReport};
use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Solve(#[from] crate::solvers::SolveError),
    #[error("no instance finished under the time limit; dataset is empty")]
    AllDiscarded,
    #[error("dataset line {line} is invalid: {message}")]
    BadRecord { line: usize, message: String },
    #[error("not enough records for a balanced split: class {class} has {have}, need {need}")]
    SplitTooSmall { class: usize, have: usize, need: usize },
}

/// One dataset row: the graph representation, the label, and the timings
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub name: String,
    pub graph: VariableGraph,
    /// 0 = OA, 1 = B&B.
    pub label: usize,
    pub t_oa: f64,
    pub t_bb: f64,
    pub time_limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LabeledRecord {
    pub fn to_example(&self) -> TrainExample {
        TrainExample {
            graph: self.graph.clone(),
            label: self.label,
        }
    }
}

/// Outcome of one timed solver run.
#[derive(Debug, Clone, Copy)]
pub struct RunOutcome {
    /// Reached a conclusive status (optimal or infeasible) in time.
    pub finished: bool,
    pub seconds: f64,
}

impl RunOutcome {
    pub fn from_report(report: &SolveReport) -> RunOutcome {
        RunOutcome {
            finished: report.status != crate::solvers::SolveStatus::TimeLimit,
            seconds: report.wall_seconds,
        }
    }
}

/// Label from two timed runs: the faster finished run wins, exact ties go
/// to OA (index 0), and a double timeout discards the instance.
pub fn decide_label(oa: RunOutcome, bb: RunOutcome, time_limit: f64) -> Option<usize> {
    let oa_ok = oa.finished && oa.seconds < time_limit;
    let bb_ok = bb.finished && bb.seconds < time_limit;
    match (oa_ok, bb_ok) {
        (false, false) => None,
        (true, false) => Some(crate::gnn::LABEL_OA),
        (false, true) => Some(crate::gnn::LABEL_BB),
        (true, true) => {
            if oa.seconds <= bb.seconds {
                Some(crate::gnn::LABEL_OA)
            } else {
                Some(crate::gnn::LABEL_BB)
            }
        }
    }
}

fn solver_limits(time_limit: f64) -> SolveLimits {
    SolveLimits {
        time_limit: Some(Duration::from_secs_f64(time_limit)),
        ..SolveLimits::default()
    }
}

/// Time both algorithms on `p`. Solver errors count as that algorithm
/// timing out. `algo_parallelism` opts into running them concurrently on
/// separate copies; sequential timing is the less noisy default.
pub fn time_both(
    p: &Problem,
    time_limit: f64,
    algo_parallelism: Parallelism,
) -> (RunOutcome, RunOutcome) {
    let limits = solver_limits(time_limit);
    let p_oa = p.clone();
    let p_bb = p.clone();
    let failed = RunOutcome {
        finished: false,
        seconds: time_limit,
    };
    let (oa, bb) = join(
        algo_parallelism,
        {
            let limits = limits.clone();
            move || {
                oa_solve(&p_oa, &limits)
                    .map(|r| RunOutcome::from_report(&r))
                    .unwrap_or(failed)
            }
        },
        {
            let limits = limits.clone();
            move || {
                bnb_solve(&p_bb, &limits)
                    .map(|r| RunOutcome::from_report(&r))
                    .unwrap_or(failed)
            }
        },
    );
    (oa, bb)
}

fn record_from_outcomes(
    p: &Problem,
    oa: RunOutcome,
    bb: RunOutcome,
    time_limit: f64,
) -> Option<LabeledRecord> {
    let label = decide_label(oa, bb, time_limit)?;
    let seed = p
        .name
        .strip_prefix("gen-")
        .and_then(|s| s.parse::<u64>().ok());
    Some(LabeledRecord {
        name: p.name.clone(),
        graph: build_variable_graph(p),
        label,
        t_oa: oa.seconds,
        t_bb: bb.seconds,
        time_limit,
        seed,
    })
}

/// Run both solvers under `time_limit` seconds and label the instance.
/// `None` means neither finished and the data point is discarded.
pub fn label_instance(
    p: &Problem,
    time_limit: f64,
    algo_parallelism: Parallelism,
) -> Option<LabeledRecord> {
    let (oa, bb) = time_both(p, time_limit, algo_parallelism);
    record_from_outcomes(p, oa, bb, time_limit)
}

/// A labeled dataset plus its class balance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<LabeledRecord>,
    pub discarded: usize,
}

impl Dataset {
    pub fn class_counts(&self) -> (usize, usize) {
        let bb = self
            .records
            .iter()
            .filter(|r| r.label == crate::gnn::LABEL_BB)
            .count();
        (self.records.len() - bb, bb)
    }

    /// Fraction of records per class, `(OA share, BB share)`.
    pub fn class_ratio(&self) -> (f64, f64) {
        let (oa, bb) = self.class_counts();
        let n = self.records.len().max(1) as f64;
        (oa as f64 / n, bb as f64 / n)
    }

    pub fn examples(&self) -> Vec<TrainExample> {
        self.records.iter().map(LabeledRecord::to_example).collect()
    }

    /// Split off a held-out set with exactly `per_class` records of each
    /// class, chosen by seeded shuffle. Returns (train, test) index lists.
    pub fn split_balanced(
        &self,
        per_class: usize,
        seed: u64,
    ) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut test = Vec::new();
        let mut train = Vec::new();
        for class in 0..2 {
            let mut idx: Vec<usize> = self
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.label == class)
                .map(|(i, _)| i)
                .collect();
            if idx.len() < per_class + 1 {
                return Err(PipelineError::SplitTooSmall {
                    class,
                    have: idx.len(),
                    need: per_class + 1,
                });
            }
            idx.shuffle(&mut rng);
            test.extend(idx.drain(..per_class));
            train.extend(idx);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}

/// Label a batch of instances, dropping discards. `instance_parallelism`
/// fans out across instances; within one instance the two solvers run
/// sequentially so timings stay comparable.
pub fn build_dataset(
    instances: &[Problem],
    time_limit: f64,
    instance_parallelism: Parallelism,
) -> Result<Dataset, PipelineError> {
    build_dataset_with_runner(instances, time_limit, instance_parallelism, |p, tl| {
        time_both(p, tl, Parallelism::Sequential)
    })
}

/// [`build_dataset`] with an injectable timing runner; tests stub solver
/// timings through this seam.
pub fn build_dataset_with_runner<F>(
    instances: &[Problem],
    time_limit: f64,
    instance_parallelism: Parallelism,
    runner: F,
) -> Result<Dataset, PipelineError>
where
    F: Fn(&Problem, f64) -> (RunOutcome, RunOutcome) + Sync + Send,
{
    let labeled: Vec<Option<LabeledRecord>> = par_map(
        instances.iter().collect::<Vec<_>>(),
        instance_parallelism,
        |p| {
            let (oa, bb) = runner(p, time_limit);
            record_from_outcomes(p, oa, bb, time_limit)
        },
    );
    let discarded = labeled.iter().filter(|r| r.is_none()).count();
    let records: Vec<LabeledRecord> = labeled.into_iter().flatten().collect();
    if records.is_empty() {
        return Err(PipelineError::AllDiscarded);
    }
    Ok(Dataset { records, discarded })
}

// --- prediction and dispatch -------------------------------------------------

/// Classifier verdict for one instance.
pub fn select_algorithm(
    p: &Problem,
    params: &GcnParams,
) -> Result<(usize, Vec<f64>), GnnError> {
    let graph = build_variable_graph(p);
    let probabilities = forward(&graph, params)?;
    // argmax with ties to the lowest index (OA)
    let prediction = if probabilities[1] > probabilities[0] { 1 } else { 0 };
    Ok((prediction, probabilities))
}

/// A solve report annotated with the prediction that chose the solver.
#[derive(Debug, Clone, Serialize)]
pub struct AutoReport {
    /// 0 = OA, 1 = B&B.
    pub prediction: usize,
    pub prediction_name: String,
    pub probabilities: Vec<f64>,
    #[serde(flatten)]
    pub report: SolveReport,
}

/// Classify, then dispatch to the predicted-faster solver. The underlying
/// report is exactly what the directly-invoked solver returns.
pub fn auto_solve(
    p: &Problem,
    params: &GcnParams,
    limits: &SolveLimits,
) -> Result<AutoReport, PipelineError> {
    let (prediction, probabilities) = select_algorithm(p, params)?;
    let report = if prediction == crate::gnn::LABEL_BB {
        bnb_solve(p, limits)?
    } else {
        oa_solve(p, limits)?
    };
    Ok(AutoReport {
        prediction,
        prediction_name: LABEL_NAMES[prediction].to_string(),
        probabilities,
        report,
    })
}

// --- dataset file format ------------------------------------------------------

/// Serialize records as JSON Lines, one record per line.
pub fn write_jsonl(records: &[LabeledRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialization"));
        out.push('\n');
    }
    out
}

/// Parse a JSON Lines dataset, skipping blank lines.
pub fn read_jsonl(text: &str) -> Result<Vec<LabeledRecord>, PipelineError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LabeledRecord =
            serde_json::from_str(line).map_err(|e| PipelineError::BadRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.label > 1 {
            return Err(PipelineError::BadRecord {
                line: i + 1,
                message: format!("label {} is not 0 or 1", record.label),
            });
        }
        records.push(record);
    }
    Ok(records)
}

// --- evaluation metrics -------------------------------------------------------

/// Per-class precision/recall/F1 and the raw confusion counts.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    /// Indexed by class (0 = OA, 1 = B&B).
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
    /// `confusion[true_label][predicted_label]`.
    pub confusion: [[usize; 2]; 2],
}

/// Metrics from raw confusion counts.
pub fn metrics_from_confusion(confusion: [[usize; 2]; 2]) -> EvalMetrics {
    let total: usize = confusion.iter().flatten().sum();
    let correct = confusion[0][0] + confusion[1][1];
    let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
    let mut precision = [0.0; 2];
    let mut recall = [0.0; 2];
    let mut f1 = [0.0; 2];
    for c in 0..2 {
        let predicted: usize = confusion[0][c] + confusion[1][c];
        let actual: usize = confusion[c][0] + confusion[c][1];
        precision[c] = if predicted == 0 {
            0.0
        } else {
            confusion[c][c] as f64 / predicted as f64
        };
        recall[c] = if actual == 0 {
            0.0
        } else {
            confusion[c][c] as f64 / actual as f64
        };
        f1[c] = if precision[c] + recall[c] == 0.0 {
            0.0
        } else {
            2.0 * precision[c] * recall[c] / (precision[c] + recall[c])
        };
    }
    EvalMetrics {
        accuracy,
        precision,
        recall,
        f1,
        confusion,
    }
}

/// Run the classifier over labeled records and compute test metrics.
pub fn evaluate_records(
    records: &[LabeledRecord],
    params: &GcnParams,
) -> Result<EvalMetrics, GnnError> {
    let mut confusion = [[0usize; 2]; 2];
    for r in records {
        let p = forward(&r.graph, params)?;
        let pred = if p[1] > p[0] { 1 } else { 0 };
        confusion[r.label][pred] += 1;
    }
    Ok(metrics_from_confusion(confusion))
}
