//! The training objective
//! `w_data · mean (y_t − y_p)² + w_res · mean R(x_j)²` over the training points.
//!
//! [`cost`] records everything on one tape and serves as the reference.
//! [`CostModel`] computes the same value and gradient in three passes: a
//! batched dense forward over every point where the surrogate is needed, a
//! taped pass through the residual assembly only (giving `∂cost/∂y`), and a
//! batched dense backward. Both passes are chunked with fixed chunk sizes and
//! reduced in chunk order, so the result does not depend on the worker count.

use std::ops::Range;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::network::{forward, DenseForward, NetworkConfig, ParameterSet, TapedParams};
use crate::problem::{residual, CollocationSet, ProblemSpec, ResidualPlan};
use crate::real::Real;

use super::TrainConfig;

const FORWARD_CHUNK: usize = 2048;
const RESIDUAL_CHUNK: usize = 32;

/// Value of the objective split into its two mean-squared terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParts<T> {
    pub data_mse: T,
    pub residual_mse: T,
    pub total: T,
}

pub struct TapedCost<'t, T> {
    pub total: Var<'t, T>,
    pub parts: CostParts<T>,
}

/// Loss weights after applying the supervised flag, checked against the
/// problem.
fn weights_for<T: Real>(problem: &ProblemSpec<T>, config: &TrainConfig) -> Result<(T, T)> {
    config.validate()?;
    if config.supervised && !problem.has_exact() {
        return Err(Error::MissingExactSolution);
    }
    let (data, res) = config.effective_loss_weights();
    Ok((T::lit(data), T::lit(res)))
}

/// Fully taped objective; slow, used as the reference for [`CostModel`].
pub fn cost<'t, T: Real>(
    problem: &ProblemSpec<T>,
    net: &NetworkConfig,
    config: &TrainConfig,
    params: &TapedParams<'t, T>,
    train_points: &[T],
    colloc: &CollocationSet<T>,
) -> Result<TapedCost<'t, T>> {
    let (w_data, w_res) = weights_for(problem, config)?;
    if train_points.is_empty() {
        return Err(Error::InvalidTrainConfig("no training points".into()));
    }
    forward(net, params, Var::constant(T::zero()))?;
    let net_at = |s: T| forward(net, params, Var::constant(s)).expect("shapes checked above");
    let mut data = Var::constant(T::zero());
    let mut res = Var::constant(T::zero());
    for &x in train_points {
        if config.supervised {
            let exact = problem.exact(x).expect("checked above");
            let diff = net_at(x) - exact;
            data = data + diff * diff;
        }
        let r = residual(problem, net_at, x, colloc)?;
        res = res + r * r;
    }
    let m = T::from_count(train_points.len());
    let data = data / m;
    let res = res / m;
    let total = data * w_data + res * w_res;
    Ok(TapedCost {
        parts: CostParts {
            data_mse: data.value(),
            residual_mse: res.value(),
            total: total.value(),
        },
        total,
    })
}

/// Precompiled objective for a fixed problem, network shape and point set.
pub struct CostModel<T> {
    net: NetworkConfig,
    plan: ResidualPlan<T>,
    eval_points: Vec<T>,
    targets: Option<Vec<T>>,
    w_data: T,
    w_res: T,
    pool: Option<ThreadPool>,
}

struct ResidualChunk<T> {
    sum_sq: T,
    point_adj: Vec<T>,
    volterra_adj: Vec<T>,
    fredholm_adj: Vec<T>,
}

impl<T: Real> CostModel<T> {
    pub fn new(
        problem: &ProblemSpec<T>,
        net: &NetworkConfig,
        config: &TrainConfig,
        train_points: &[T],
    ) -> Result<Self> {
        let (w_data, w_res) = weights_for(problem, config)?;
        net.validate()?;
        if train_points.is_empty() {
            return Err(Error::InvalidTrainConfig("no training points".into()));
        }
        let colloc = CollocationSet::new(train_points.to_vec(), config.n1, config.n2)?;
        let plan = ResidualPlan::new(problem, &colloc)?;
        let targets = if config.supervised {
            let exact = problem.exact_fn().ok_or(Error::MissingExactSolution)?;
            Some(train_points.iter().map(|&x| exact(x)).collect())
        } else {
            None
        };
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .build()
                    .map_err(|e| Error::InvalidTrainConfig(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            net: net.clone(),
            eval_points: plan.eval_points(),
            plan,
            targets,
            w_data,
            w_res,
            pool,
        })
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.net
    }

    pub fn train_points(&self) -> &[T] {
        self.plan.points()
    }

    /// Number of surrogate evaluations per cost evaluation.
    pub fn eval_len(&self) -> usize {
        self.eval_points.len()
    }

    /// Order-preserving map, parallel when a pool is configured.
    fn map_ordered<I, R, F>(&self, items: Vec<I>, f: F) -> Vec<R>
    where
        I: Send,
        R: Send,
        F: Fn(I) -> R + Send + Sync,
    {
        match &self.pool {
            Some(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
            None => items.into_iter().map(f).collect(),
        }
    }

    fn forward_chunks(&self, params: &ParameterSet<T>) -> Result<Vec<DenseForward<T>>> {
        let ranges = chunk_ranges(self.eval_points.len(), FORWARD_CHUNK);
        self.map_ordered(ranges, |r| {
            DenseForward::run(&self.net, params, &self.eval_points[r])
        })
        .into_iter()
        .collect()
    }

    pub fn value(&self, params: &ParameterSet<T>) -> Result<CostParts<T>> {
        let forwards = self.forward_chunks(params)?;
        let y: Vec<T> = forwards
            .iter()
            .flat_map(|f| f.outputs().iter().copied())
            .collect();
        let chunks = self.residual_chunks(&y);
        Ok(self.combine_parts(&y, chunks.iter().map(|c| c.sum_sq)))
    }

    pub fn value_and_gradient(&self, params: &ParameterSet<T>) -> Result<(CostParts<T>, Vec<T>)> {
        let forwards = self.forward_chunks(params)?;
        let y: Vec<T> = forwards
            .iter()
            .flat_map(|f| f.outputs().iter().copied())
            .collect();
        let chunks = self.residual_chunks(&y);
        let parts = self.combine_parts(&y, chunks.iter().map(|c| c.sum_sq));

        let m = self.plan.len();
        let n_volterra = self.plan.volterra_node_count();
        let fredholm_start = m + n_volterra;
        let mut d_y = vec![T::zero(); y.len()];
        for (range, chunk) in chunk_ranges(m, RESIDUAL_CHUNK).into_iter().zip(&chunks) {
            d_y[range.clone()].copy_from_slice(&chunk.point_adj);
            let span = self.plan.volterra_span(range);
            d_y[m + span.start..m + span.end].copy_from_slice(&chunk.volterra_adj);
            for (acc, &a) in d_y[fredholm_start..].iter_mut().zip(&chunk.fredholm_adj) {
                *acc += a;
            }
        }
        let m_real = T::from_count(m);
        let res_scale = self.w_res / m_real;
        d_y.iter_mut().for_each(|d| *d = *d * res_scale);
        if let Some(targets) = &self.targets {
            let data_scale = (self.w_data + self.w_data) / m_real;
            for ((d, &yp), &yt) in d_y.iter_mut().zip(&y).zip(targets) {
                *d += data_scale * (yp - yt);
            }
        }

        let ranges = chunk_ranges(y.len(), FORWARD_CHUNK);
        let jobs: Vec<_> = forwards.iter().zip(ranges).collect();
        let partial = self.map_ordered(jobs, |(fwd, r)| fwd.backward(&self.net, params, &d_y[r]));
        let mut grad = vec![T::zero(); params.len()];
        for g in partial {
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        Ok((parts, grad))
    }

    fn combine_parts(&self, y: &[T], sums: impl Iterator<Item = T>) -> CostParts<T> {
        let m = T::from_count(self.plan.len());
        let residual_mse = sums.fold(T::zero(), |a, b| a + b) / m;
        let data_mse = match &self.targets {
            Some(targets) => {
                targets
                    .iter()
                    .zip(y)
                    .fold(T::zero(), |acc, (&t, &p)| acc + (p - t) * (p - t))
                    / m
            }
            None => T::zero(),
        };
        CostParts {
            data_mse,
            residual_mse,
            total: self.w_data * data_mse + self.w_res * residual_mse,
        }
    }

    /// Residual sums of squares and their adjoints with respect to the
    /// surrogate values, one private tape per chunk of collocation points.
    fn residual_chunks(&self, y: &[T]) -> Vec<ResidualChunk<T>> {
        let ranges = chunk_ranges(self.plan.len(), RESIDUAL_CHUNK);
        self.map_ordered(ranges, |r| self.residual_chunk(r, y))
    }

    fn residual_chunk(&self, range: Range<usize>, y: &[T]) -> ResidualChunk<T> {
        let m = self.plan.len();
        let fredholm_start = m + self.plan.volterra_node_count();
        let span = self.plan.volterra_span(range.clone());
        let per_point = 3 * (span.len() / range.len().max(1) + self.plan.fredholm_node_count()) + 4;
        let tape = Tape::with_capacity(per_point * range.len() + span.len());
        let y_point: Vec<_> = y[range.clone()].iter().map(|&v| tape.var(v)).collect();
        let y_volterra: Vec<_> = y[m + span.start..m + span.end]
            .iter()
            .map(|&v| tape.var(v))
            .collect();
        let y_fredholm: Vec<_> = y[fredholm_start..].iter().map(|&v| tape.var(v)).collect();
        let residuals = self.plan.residuals(range, &y_point, &y_volterra, &y_fredholm);
        let mut sum_sq = Var::constant(T::zero());
        for r in residuals {
            sum_sq = sum_sq + r * r;
        }
        let adjoint = tape.adjoints(sum_sq);
        let pick = |vars: &[Var<'_, T>]| -> Vec<T> {
            vars.iter()
                .map(|v| v.index().map_or(T::zero(), |i| adjoint[i]))
                .collect()
        };
        ResidualChunk {
            sum_sq: sum_sq.value(),
            point_adj: pick(&y_point),
            volterra_adj: pick(&y_volterra),
            fredholm_adj: pick(&y_fredholm),
        }
    }
}

fn chunk_ranges(len: usize, size: usize) -> Vec<Range<usize>> {
    (0..len)
        .step_by(size)
        .map(|start| start..(start + size).min(len))
        .collect()
}
