//! Training: objective assembly plus Adam followed by L-BFGS.

mod cost;
mod optim;

use std::cell::Cell;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{NetworkConfig, ParameterSet};
use crate::problem::ProblemSpec;
use crate::real::Real;

pub use cost::{cost, CostModel, CostParts, TapedCost};
pub use optim::{run_lbfgs, AdamConfig, AdamMoments, LbfgsConfig, LbfgsOutcome};

/// Environment variable holding the worker-thread count for cost evaluation.
pub const THREADS_ENV: &str = "LDNN_THREADS";

/// Worker count from [`THREADS_ENV`]; 1 when unset or unparsable.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

/// How training points are placed on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// `j/(m1 − 1)`, endpoints included.
    #[default]
    Equispaced,
    /// Uniform draws from a generator seeded with [`TrainConfig::seed`], sorted.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Training (and collocation) point count.
    pub m1: usize,
    /// Test point count.
    pub m2: usize,
    /// Volterra quadrature order; the rule has `n1 + 1` nodes.
    pub n1: usize,
    /// Fredholm quadrature order.
    pub n2: usize,
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub lbfgs_memory: usize,
    pub lbfgs_tol: f64,
    pub lbfgs_max_iters: usize,
    /// `(data, residual)`
    pub loss_weights: (f64, f64),
    /// Seeds point sampling; network initialization uses the network's seed.
    pub seed: u64,
    /// Include the data-fit term against the exact solution.
    pub supervised: bool,
    pub sampling: Sampling,
    /// Threads used inside one cost evaluation.
    pub workers: usize,
}

impl Default for TrainConfig {
    /// The benchmark protocol: 500 training points, 100 test points,
    /// order-50 rules, 5000 Adam steps, then L-BFGS.
    fn default() -> Self {
        Self {
            m1: 500,
            m2: 100,
            n1: 50,
            n2: 50,
            adam_iters: 5000,
            adam_lr: 1e-3,
            lbfgs_memory: 10,
            lbfgs_tol: 1e-9,
            lbfgs_max_iters: 2000,
            loss_weights: (1.0, 1.0),
            seed: 0,
            supervised: true,
            sampling: Sampling::Equispaced,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTrainConfig(msg));
        if self.m1 == 0 || self.m2 == 0 {
            return bad(format!("m1 = {} and m2 = {} must be positive", self.m1, self.m2));
        }
        if !(self.adam_lr > 0.0 && self.adam_lr.is_finite()) {
            return bad(format!("Adam learning rate {} must be positive", self.adam_lr));
        }
        if self.lbfgs_memory == 0 {
            return bad("L-BFGS memory must be at least 1".into());
        }
        if !(self.lbfgs_tol >= 0.0) {
            return bad(format!("L-BFGS tolerance {} must be nonnegative", self.lbfgs_tol));
        }
        let (d, r) = self.loss_weights;
        if !(d >= 0.0 && r >= 0.0 && d.is_finite() && r.is_finite()) {
            return bad(format!("loss weights ({d}, {r}) must be finite and nonnegative"));
        }
        let (d, r) = self.effective_loss_weights();
        if d == 0.0 && r == 0.0 {
            return bad("loss weights are both zero".into());
        }
        if self.workers == 0 {
            return bad("worker count must be positive".into());
        }
        Ok(())
    }

    /// Loss weights with the data term zeroed when unsupervised.
    pub fn effective_loss_weights(&self) -> (f64, f64) {
        if self.supervised {
            self.loss_weights
        } else {
            (0.0, self.loss_weights.1)
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.adam_lr,
            ..AdamConfig::default()
        }
    }

    pub fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            memory: self.lbfgs_memory,
            tol: self.lbfgs_tol,
            max_iters: self.lbfgs_max_iters,
        }
    }
}

/// Training points on `[0, 1]`, minus any the problem excludes.
pub fn train_points<T: Real>(problem: &ProblemSpec<T>, config: &TrainConfig) -> Result<Vec<T>> {
    let raw: Vec<T> = match config.sampling {
        Sampling::Equispaced if config.m1 == 1 => vec![T::lit(0.5)],
        Sampling::Equispaced => {
            let last = T::from_count(config.m1 - 1);
            (0..config.m1).map(|j| T::from_count(j) / last).collect()
        }
        Sampling::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut xs: Vec<f64> = (0..config.m1).map(|_| rng.gen::<f64>()).collect();
            xs.sort_by(f64::total_cmp);
            xs.into_iter().map(T::lit).collect()
        }
    };
    let points: Vec<T> = raw
        .into_iter()
        .filter(|&x| problem.admits_collocation(x))
        .collect();
    if points.is_empty() {
        return Err(Error::InvalidTrainConfig("no admissible training points".into()));
    }
    Ok(points)
}

/// `m2` midpoints `(k + 1/2)/m2`, disjoint from the equispaced training grid
/// whenever `m2` divides `m1 − 1`.
pub fn test_points<T: Real>(m2: usize) -> Vec<T> {
    let m = T::from_count(m2);
    (0..m2)
        .map(|k| (T::from_count(k) + T::lit(0.5)) / m)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry<T> {
    /// Number of optimizer updates applied before this evaluation.
    pub iteration: usize,
    pub data_mse: T,
    pub residual_mse: T,
    pub total: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T> {
    pub params: ParameterSet<T>,
    pub adam: AdamMoments<T>,
    history: Vec<HistoryEntry<T>>,
}

impl<T: Real> TrainState<T> {
    pub fn new(params: ParameterSet<T>) -> Self {
        let adam = AdamMoments::new(params.len());
        Self {
            params,
            adam,
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[HistoryEntry<T>] {
        &self.history
    }

    /// Appends a history entry; iterations must not go backwards.
    pub fn record(&mut self, iteration: usize, parts: CostParts<T>) {
        if let Some(last) = self.history.last() {
            assert!(iteration >= last.iteration, "history iterations must be monotone");
        }
        self.history.push(HistoryEntry {
            iteration,
            data_mse: parts.data_mse,
            residual_mse: parts.residual_mse,
            total: parts.total,
        });
    }

    /// CSV with header `iteration,data_mse,residual_mse,total`.
    pub fn write_history_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["iteration", "data_mse", "residual_mse", "total"])?;
        for h in &self.history {
            out.write_record([
                h.iteration.to_string(),
                format!("{:e}", h.data_mse),
                format!("{:e}", h.residual_mse),
                format!("{:e}", h.total),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One Adam update of the state's parameters.
pub fn adam_step<T: Real>(state: &mut TrainState<T>, grad: &[T], config: &AdamConfig) -> Result<()> {
    let mut theta = state.params.flatten();
    state.adam.update(&mut theta, grad, config)?;
    state.params.assign_flat(&theta);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub state: TrainState<T>,
    pub train_points: Vec<T>,
    pub initial_cost: CostParts<T>,
    pub final_cost: CostParts<T>,
    pub lbfgs_iterations: usize,
    pub lbfgs_converged: bool,
    pub warning: Option<String>,
}

impl<T> TrainOutcome<T> {
    pub fn params(&self) -> &ParameterSet<T> {
        &self.state.params
    }
}

/// A failed run together with everything recorded up to the failure.
#[derive(Debug)]
pub struct TrainFailure<T> {
    pub error: Error,
    pub state: TrainState<T>,
}

impl<T> fmt::Display for TrainFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} history entries kept)", self.error, self.state.history.len())
    }
}

impl<T: fmt::Debug> std::error::Error for TrainFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl<T> From<TrainFailure<T>> for Error {
    fn from(failure: TrainFailure<T>) -> Self {
        failure.error
    }
}

/// Trains from the network's seeded initialization.
pub fn train<T: Real>(
    problem: &ProblemSpec<T>,
    net: &NetworkConfig,
    config: &TrainConfig,
) -> std::result::Result<TrainOutcome<T>, TrainFailure<T>> {
    train_from(problem, net, config, ParameterSet::init(net))
}

/// Trains starting from the given parameters.
pub fn train_from<T: Real>(
    problem: &ProblemSpec<T>,
    net: &NetworkConfig,
    config: &TrainConfig,
    params: ParameterSet<T>,
) -> std::result::Result<TrainOutcome<T>, TrainFailure<T>> {
    let mut state = TrainState::new(params);
    match run(problem, net, config, &mut state) {
        Ok(s) => Ok(TrainOutcome {
            state,
            train_points: s.train_points,
            initial_cost: s.initial_cost,
            final_cost: s.final_cost,
            lbfgs_iterations: s.lbfgs_iterations,
            lbfgs_converged: s.lbfgs_converged,
            warning: s.warning,
        }),
        Err(error) => Err(TrainFailure { error, state }),
    }
}

struct RunSummary<T> {
    train_points: Vec<T>,
    initial_cost: CostParts<T>,
    final_cost: CostParts<T>,
    lbfgs_iterations: usize,
    lbfgs_converged: bool,
    warning: Option<String>,
}

fn run<T: Real>(
    problem: &ProblemSpec<T>,
    net: &NetworkConfig,
    config: &TrainConfig,
    state: &mut TrainState<T>,
) -> Result<RunSummary<T>> {
    net.validate()?;
    state.params.check_shapes(net)?;
    let points = train_points(problem, config)?;
    let model = CostModel::new(problem, net, config, &points)?;
    let adam = config.adam();
    let mut initial = None;
    for k in 0..config.adam_iters {
        let (parts, grad) = model.value_and_gradient(&state.params)?;
        if !parts.total.is_finite() {
            return Err(Error::Divergence {
                step: k,
                reason: format!("cost is {}", parts.total),
            });
        }
        state.record(k, parts);
        initial.get_or_insert(parts);
        adam_step(state, &grad, &adam)?;
    }

    // The objective stores the parts of its latest evaluation; the observer
    // reads them because the accepted point is always the latest evaluation.
    let latest = Cell::new(None);
    let mut scratch = state.params.clone();
    let mut accepted = None;
    let base = config.adam_iters;
    let history = &mut state.history;
    let outcome = run_lbfgs(
        |theta: &[T]| {
            scratch.assign_flat(theta);
            let (parts, grad) = model.value_and_gradient(&scratch)?;
            latest.set(Some(parts));
            Ok((parts.total, grad))
        },
        &state.params.flatten(),
        &config.lbfgs(),
        |k, _| {
            let parts = latest.get().expect("evaluated before observed");
            if let Some(last) = history.last() {
                debug_assert!(base + k >= last.iteration);
            }
            history.push(HistoryEntry {
                iteration: base + k,
                data_mse: parts.data_mse,
                residual_mse: parts.residual_mse,
                total: parts.total,
            });
            accepted = Some(parts);
        },
    )?;
    state.params.assign_flat(&outcome.x);
    if !state.params.is_finite() {
        return Err(Error::Divergence {
            step: base + outcome.iterations,
            reason: "non-finite parameters after L-BFGS".into(),
        });
    }
    let final_cost = accepted.expect("L-BFGS observes its start");
    Ok(RunSummary {
        train_points: points,
        initial_cost: initial.unwrap_or(final_cost),
        final_cost,
        lbfgs_iterations: outcome.iterations,
        lbfgs_converged: outcome.converged,
        warning: outcome.warning,
    })
}
