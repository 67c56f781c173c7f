//! End-to-end experiment runs, reports and reference comparisons.

mod problem_file;
mod reference;
mod report;
pub mod verify;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::network::{predict, NetworkConfig, ParameterSet};
use crate::problem::{make_experiment, ProblemSpec};
use crate::real::Real;
use crate::training::{
    test_points, train_from, TrainConfig, TrainFailure, TrainOutcome, TrainState,
};

pub use problem_file::parse_problem;
pub use reference::{
    compare_to_reference, Comparison, ComparisonRow, ExperimentReference, ReferenceData,
    ReferenceRow,
};
pub use report::{emit_report, format_error, parse_csv_report, EmitOptions, ReportFormat};

/// The six points at which the benchmark tables list values.
pub const REPORT_POINTS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Unnormalized Euclidean distance `sqrt(Σ (a_j − b_j)²)`.
pub fn l2_norm<T: Real>(y_true: &[T], y_pred: &[T]) -> Result<T> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    Ok(y_true
        .iter()
        .zip(y_pred)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow<T> {
    pub x: T,
    pub y_exact: T,
    pub y_pred: T,
    pub abs_error: T,
}

impl<T: Real> ReportRow<T> {
    pub fn new(x: T, y_exact: T, y_pred: T) -> Self {
        Self {
            x,
            y_exact,
            y_pred,
            abs_error: (y_exact - y_pred).abs(),
        }
    }
}

/// Which model produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ldnn,
    Fnn,
}

impl Model {
    pub fn label(self) -> &'static str {
        match self {
            Model::Ldnn => "ldnn",
            Model::Fnn => "fnn",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "ldnn" => Some(Model::Ldnn),
            "fnn" => Some(Model::Fnn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSnapshot {
    pub net: NetworkConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport<T> {
    /// Benchmark id, or 0 for a problem read from a file.
    pub experiment: u32,
    pub model: Model,
    /// One row per test point.
    pub rows: Vec<ReportRow<T>>,
    /// Rows at [`REPORT_POINTS`].
    pub report_rows: Vec<ReportRow<T>>,
    pub l2_train: T,
    pub l2_test: T,
    pub wall_time_seconds: Option<f64>,
    /// Absent for reports read back from CSV.
    pub config: Option<ConfigSnapshot>,
}

/// A finished run: the report plus everything training produced.
#[derive(Debug, Clone)]
pub struct ExperimentRun<T> {
    pub report: ExperimentReport<T>,
    pub outcome: TrainOutcome<T>,
}

/// Builds, trains and evaluates benchmark `id`.
pub fn run_experiment<T: Real>(
    id: u32,
    train: &TrainConfig,
    net: &NetworkConfig,
) -> std::result::Result<ExperimentRun<T>, TrainFailure<T>> {
    let problem = make_experiment(id).map_err(|e| early_failure(e, net))?;
    run_problem(&problem, id, Model::Ldnn, train, net)
}

/// The plain feed-forward comparison: the orthogonal layer becomes a tanh
/// layer of equal width and only the data term is trained.
pub fn run_fnn_baseline<T: Real>(
    id: u32,
    train: &TrainConfig,
    net: &NetworkConfig,
) -> std::result::Result<ExperimentRun<T>, TrainFailure<T>> {
    let problem = make_experiment(id).map_err(|e| early_failure(e, net))?;
    let (net, train) = baseline_configs(train, net).map_err(|e| early_failure(e, net))?;
    run_problem(&problem, id, Model::Fnn, &train, &net)
}

/// Network and training configuration used by the baseline.
pub fn baseline_configs(train: &TrainConfig, net: &NetworkConfig) -> Result<(NetworkConfig, TrainConfig)> {
    let fnn = NetworkConfig::feedforward(net.layer_sizes.clone(), net.seed)?;
    let train = TrainConfig {
        loss_weights: (1.0, 0.0),
        supervised: true,
        ..train.clone()
    };
    Ok((fnn, train))
}

/// Trains on any problem and evaluates the report metrics. Metrics are NaN
/// when the problem has no exact solution.
pub fn run_problem<T: Real>(
    problem: &ProblemSpec<T>,
    id: u32,
    model: Model,
    train: &TrainConfig,
    net: &NetworkConfig,
) -> std::result::Result<ExperimentRun<T>, TrainFailure<T>> {
    net.validate().map_err(|e| early_failure(e, net))?;
    let start = Instant::now();
    let outcome = train_from(problem, net, train, ParameterSet::init(net))?;
    let wall = start.elapsed().as_secs_f64();
    let report = evaluate(problem, id, model, train, net, &outcome, wall).map_err(|error| TrainFailure {
        error,
        state: outcome.state.clone(),
    })?;
    Ok(ExperimentRun { report, outcome })
}

fn evaluate<T: Real>(
    problem: &ProblemSpec<T>,
    id: u32,
    model: Model,
    train: &TrainConfig,
    net: &NetworkConfig,
    outcome: &TrainOutcome<T>,
    wall: f64,
) -> Result<ExperimentReport<T>> {
    let params = outcome.params();
    let rows_at = |xs: &[T]| -> Result<Vec<ReportRow<T>>> {
        let preds = predict(net, params, xs)?;
        Ok(xs
            .iter()
            .zip(preds)
            .map(|(&x, y)| ReportRow::new(x, problem.exact(x).unwrap_or_else(T::nan), y))
            .collect())
    };
    let rows = rows_at(&test_points(train.m2))?;
    let report_xs: Vec<T> = REPORT_POINTS.iter().map(|&x| T::lit(x)).collect();
    let report_rows = rows_at(&report_xs)?;
    let train_rows = rows_at(&outcome.train_points)?;
    let l2 = |rows: &[ReportRow<T>]| {
        rows.iter()
            .fold(T::zero(), |acc, r| acc + r.abs_error * r.abs_error)
            .sqrt()
    };
    Ok(ExperimentReport {
        experiment: id,
        model,
        l2_train: l2(&train_rows),
        l2_test: l2(&rows),
        rows,
        report_rows,
        wall_time_seconds: Some(wall),
        config: Some(ConfigSnapshot {
            net: net.clone(),
            train: train.clone(),
        }),
    })
}

fn early_failure<T: Real>(error: Error, net: &NetworkConfig) -> TrainFailure<T> {
    let params = if net.validate().is_ok() {
        ParameterSet::init(net)
    } else {
        ParameterSet {
            weights: Vec::new(),
            biases: Vec::new(),
        }
    };
    TrainFailure {
        error,
        state: TrainState::new(params),
    }
}
