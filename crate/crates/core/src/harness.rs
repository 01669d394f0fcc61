//! Cross-task evaluation: accuracy scoring, the train-task × test-task
//! matrix, per-task and overall averages, and baseline deltas.
//!
//! Per-task accuracy for a testing task is the mean over all training
//! tasks (the column mean), and the overall score is the mean of the
//! per-task values.

use crate::corpus::{McqItem, TaskId};
use crate::parse::parse_response;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("items and outputs differ in length ({items} vs {outputs})")]
    Misaligned { items: usize, outputs: usize },
    #[error("cannot score an empty input")]
    EmptyInput,
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("baseline is missing task {0}")]
    MissingBaseline(TaskId),
}

/// Multiple-choice accuracy in percent. Malformed responses (no extractable
/// final answer) count as wrong.
pub fn score_outputs(items: &[McqItem], outputs: &[String]) -> Result<f64, HarnessError> {
    if items.len() != outputs.len() {
        return Err(HarnessError::Misaligned {
            items: items.len(),
            outputs: outputs.len(),
        });
    }
    if items.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let correct = items
        .iter()
        .zip(outputs)
        .filter(|(item, output)| parse_response(output).fa == Some(item.answer))
        .count();
    Ok(100.0 * correct as f64 / items.len() as f64)
}

/// Accuracy grid: rows are training tasks, columns are testing tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMatrix {
    train_tasks: Vec<TaskId>,
    test_tasks: Vec<TaskId>,
    cells: Vec<Vec<f64>>,
}

impl TaskMatrix {
    pub fn new(
        train_tasks: Vec<TaskId>,
        test_tasks: Vec<TaskId>,
        cells: Vec<Vec<f64>>,
    ) -> Result<Self, HarnessError> {
        if train_tasks.is_empty() || test_tasks.is_empty() {
            return Err(HarnessError::InvalidMatrix(
                "matrix must have at least one row and one column".to_string(),
            ));
        }
        if cells.len() != train_tasks.len() {
            return Err(HarnessError::InvalidMatrix(format!(
                "{} rows of cells for {} training tasks",
                cells.len(),
                train_tasks.len()
            )));
        }
        for (row, task) in cells.iter().zip(&train_tasks) {
            if row.len() != test_tasks.len() {
                return Err(HarnessError::InvalidMatrix(format!(
                    "row {task} has {} cells for {} testing tasks",
                    row.len(),
                    test_tasks.len()
                )));
            }
            for value in row {
                if !(0.0..=100.0).contains(value) {
                    return Err(HarnessError::InvalidMatrix(format!(
                        "accuracy {value} out of [0, 100] in row {task}"
                    )));
                }
            }
        }
        Ok(Self {
            train_tasks,
            test_tasks,
            cells,
        })
    }

    /// Full 7×7 grid over all tasks in canonical order.
    pub fn full(cells: Vec<Vec<f64>>) -> Result<Self, HarnessError> {
        Self::new(TaskId::ALL.to_vec(), TaskId::ALL.to_vec(), cells)
    }

    pub fn train_tasks(&self) -> &[TaskId] {
        &self.train_tasks
    }

    pub fn test_tasks(&self) -> &[TaskId] {
        &self.test_tasks
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_task");
        for task in &self.test_tasks {
            out.push(',');
            out.push_str(task.as_str());
        }
        out.push('\n');
        for (task, row) in self.train_tasks.iter().zip(&self.cells) {
            out.push_str(task.as_str());
            for value in row {
                out.push_str(&format!(",{value:.2}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Column means and their overall mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTaskAccuracy {
    pub per_task: Vec<(TaskId, f64)>,
    pub overall: f64,
}

/// Averages the matrix: per testing task over all training tasks, then
/// overall over the per-task values.
pub fn cross_task_accuracy(matrix: &TaskMatrix) -> CrossTaskAccuracy {
    let rows = matrix.cells().len() as f64;
    let per_task: Vec<(TaskId, f64)> = matrix
        .test_tasks()
        .iter()
        .enumerate()
        .map(|(col, task)| {
            let sum: f64 = matrix.cells().iter().map(|row| row[col]).sum();
            (*task, sum / rows)
        })
        .collect();
    let overall = per_task.iter().map(|(_, v)| v).sum::<f64>() / per_task.len() as f64;
    CrossTaskAccuracy { per_task, overall }
}

/// Signed differences against a per-task baseline, plus the count of cells
/// that fell below it.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub deltas: Vec<Vec<f64>>,
    pub degradation_count: usize,
}

/// Subtracts the baseline value of each testing-task column from every
/// cell. The baseline must cover every testing task in the matrix.
pub fn delta_report(
    matrix: &TaskMatrix,
    baseline: &BTreeMap<TaskId, f64>,
) -> Result<DeltaReport, HarnessError> {
    for task in matrix.test_tasks() {
        if !baseline.contains_key(task) {
            return Err(HarnessError::MissingBaseline(*task));
        }
    }
    let mut degradation_count = 0;
    let deltas: Vec<Vec<f64>> = matrix
        .cells()
        .iter()
        .map(|row| {
            row.iter()
                .zip(matrix.test_tasks())
                .map(|(value, task)| {
                    let delta = value - baseline[task];
                    if delta < 0.0 {
                        degradation_count += 1;
                    }
                    delta
                })
                .collect()
        })
        .collect();
    Ok(DeltaReport {
        deltas,
        degradation_count,
    })
}

/// Machine-readable evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub matrix: BTreeMap<String, BTreeMap<String, f64>>,
    pub per_task: BTreeMap<String, f64>,
    pub overall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degradation_count: Option<usize>,
}

fn grid_to_map(
    matrix: &TaskMatrix,
    cells: &[Vec<f64>],
) -> BTreeMap<String, BTreeMap<String, f64>> {
    matrix
        .train_tasks()
        .iter()
        .zip(cells)
        .map(|(train, row)| {
            let columns = matrix
                .test_tasks()
                .iter()
                .zip(row)
                .map(|(test, value)| (test.as_str().to_string(), *value))
                .collect();
            (train.as_str().to_string(), columns)
        })
        .collect()
}

impl EvalReport {
    pub fn build(
        matrix: &TaskMatrix,
        baseline: Option<&BTreeMap<TaskId, f64>>,
    ) -> Result<Self, HarnessError> {
        let accuracy = cross_task_accuracy(matrix);
        let deltas = baseline.map(|b| delta_report(matrix, b)).transpose()?;
        Ok(Self {
            matrix: grid_to_map(matrix, matrix.cells()),
            per_task: accuracy
                .per_task
                .iter()
                .map(|(task, value)| (task.as_str().to_string(), *value))
                .collect(),
            overall: accuracy.overall,
            degradation_count: deltas.as_ref().map(|d| d.degradation_count),
            deltas: deltas.map(|d| grid_to_map(matrix, &d.deltas)),
        })
    }
}

/// Aligned text rendering. Deltas are marked with explicit +/− signs rather
/// than colors so the output diffs cleanly.
pub fn render_text_report(
    matrix: &TaskMatrix,
    accuracy: &CrossTaskAccuracy,
    deltas: Option<&DeltaReport>,
) -> String {
    let mut out = String::new();
    let label_width = matrix
        .train_tasks()
        .iter()
        .map(|t| t.as_str().len())
        .max()
        .unwrap_or(0)
        .max("overall".len());
    let header = |out: &mut String, title: &str| {
        out.push_str(&format!("{title:<label_width$}"));
        for task in matrix.test_tasks() {
            out.push_str(&format!(" {:>8}", task.as_str()));
        }
        out.push('\n');
    };
    header(&mut out, "accuracy");
    for (task, row) in matrix.train_tasks().iter().zip(matrix.cells()) {
        out.push_str(&format!("{:<label_width$}", task.as_str()));
        for value in row {
            out.push_str(&format!(" {value:>8.1}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<label_width$}", "per_task"));
    for (_, value) in &accuracy.per_task {
        out.push_str(&format!(" {value:>8.1}"));
    }
    out.push('\n');
    out.push_str(&format!("overall {:.1}\n", accuracy.overall));
    if let Some(report) = deltas {
        out.push('\n');
        header(&mut out, "delta");
        for (task, row) in matrix.train_tasks().iter().zip(&report.deltas) {
            out.push_str(&format!("{:<label_width$}", task.as_str()));
            for value in row {
                out.push_str(&format!(" {value:>+8.1}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("degradations {}\n", report.degradation_count));
    }
    out
}
