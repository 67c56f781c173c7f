//! Adam and L-BFGS on flat parameter vectors.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T> {
    pub first: Vec<T>,
    pub second: Vec<T>,
    pub step: usize,
}

impl<T: Real> AdamMoments<T> {
    pub fn new(len: usize) -> Self {
        Self {
            first: vec![T::zero(); len],
            second: vec![T::zero(); len],
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `theta` in place.
    ///
    /// A non-finite gradient entry aborts without touching any state.
    pub fn update(&mut self, theta: &mut [T], grad: &[T], config: &AdamConfig) -> Result<()> {
        if grad.len() != theta.len() || grad.len() != self.first.len() {
            return Err(Error::LengthMismatch {
                left: grad.len(),
                right: self.first.len(),
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step: self.step,
                reason: format!("non-finite gradient entry {i} ({})", grad[i]),
            });
        }
        self.step += 1;
        let b1 = T::lit(config.beta1);
        let b2 = T::lit(config.beta2);
        let lr = T::lit(config.lr);
        let eps = T::lit(config.eps);
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let correct1 = T::one() - b1.powi(t);
        let correct2 = T::one() - b2.powi(t);
        for (((x, &g), m), v) in theta
            .iter_mut()
            .zip(grad)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    /// Stop once the gradient infinity norm drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            tol: 1e-9,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Set when neither the Wolfe search nor the steepest-descent fallback
    /// could make progress; `x` is then the best iterate found.
    pub warning: Option<String>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 40;
const MAX_ZOOM: usize = 40;
const MAX_BACKTRACK: usize = 60;

struct Trial<T> {
    x: Vec<T>,
    f: T,
    g: Vec<T>,
    slope: T,
}

impl<T: Real> Trial<T> {
    fn usable(&self) -> bool {
        self.f.is_finite() && self.slope.is_finite()
    }
}

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// `objective` returns the value and gradient. `observe(k, f)` fires for the
/// start (`k = 0`) and after every accepted iterate; the accepted point is
/// always the most recent one passed to `objective`, so callers can attach
/// extra data computed during that evaluation.
pub fn run_lbfgs<T, F, O>(
    mut objective: F,
    start: &[T],
    config: &LbfgsConfig,
    mut observe: O,
) -> Result<LbfgsOutcome<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
    O: FnMut(usize, T),
{
    if config.memory == 0 {
        return Err(Error::InvalidTrainConfig("L-BFGS memory must be at least 1".into()));
    }
    let tol = T::lit(config.tol);
    let mut x = start.to_vec();
    let (mut f, mut g) = objective(&x)?;
    let mut evaluations = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            reason: "non-finite objective at the L-BFGS starting point".into(),
        });
    }
    observe(0, f);

    let mut pairs: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(config.memory);
    let mut iterations = 0;
    let mut converged = false;
    let mut warning = None;
    loop {
        let g_norm = inf_norm(&g);
        if g_norm < tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        let mut direction = two_loop(&g, &pairs);
        let mut slope = dot(&g, &direction);
        if !(slope < T::zero()) {
            pairs.clear();
            direction = g.iter().map(|&v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if pairs.is_empty() {
            T::one().min(T::one() / g_norm)
        } else {
            T::one()
        };
        let accepted = match strong_wolfe(&mut objective, &x, f, &direction, slope, alpha0, &mut evaluations)? {
            Some(trial) => trial,
            None => {
                pairs.clear();
                match backtrack(&mut objective, &x, f, &g, g_norm, &mut evaluations)? {
                    Some(trial) => trial,
                    None => {
                        warning = Some(format!(
                            "line search failed after {iterations} iterations (gradient norm {g_norm:e})"
                        ));
                        break;
                    }
                }
            }
        };
        let s: Vec<T> = accepted.x.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = accepted.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, T::one() / sy));
        }
        x = accepted.x;
        f = accepted.f;
        g = accepted.g;
        iterations += 1;
        observe(iterations, f);
    }
    Ok(LbfgsOutcome {
        gradient_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        evaluations,
        converged,
        warning,
    })
}

/// `-H g` from the stored curvature pairs, with the usual `s·y / y·y`
/// scaling of the initial Hessian approximation.
fn two_loop<T: Real>(g: &[T], pairs: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = *rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn evaluate<T, F>(objective: &mut F, x: &[T], direction: &[T], alpha: T, evaluations: &mut usize) -> Result<Trial<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let point: Vec<T> = x.iter().zip(direction).map(|(&a, &d)| a + alpha * d).collect();
    let (f, g) = objective(&point)?;
    *evaluations += 1;
    let slope = dot(&g, direction);
    Ok(Trial {
        x: point,
        f,
        g,
        slope,
    })
}

struct Bound<T> {
    alpha: T,
    f: T,
    slope: T,
}

fn strong_wolfe<T, F>(
    objective: &mut F,
    x: &[T],
    f0: T,
    direction: &[T],
    slope0: T,
    alpha0: T,
    evaluations: &mut usize,
) -> Result<Option<Trial<T>>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    let mut prev = Bound {
        alpha: T::zero(),
        f: f0,
        slope: slope0,
    };
    let mut alpha = alpha0;
    for i in 0..MAX_BRACKET {
        let trial = evaluate(objective, x, direction, alpha, evaluations)?;
        if !trial.usable() || trial.f > f0 + c1 * alpha * slope0 || (i > 0 && trial.f >= prev.f) {
            let hi = Bound {
                alpha,
                f: trial.f,
                slope: trial.slope,
            };
            return zoom(objective, x, f0, direction, slope0, prev, hi, evaluations);
        }
        if trial.slope.abs() <= -c2 * slope0 {
            return Ok(Some(trial));
        }
        let here = Bound {
            alpha,
            f: trial.f,
            slope: trial.slope,
        };
        if trial.slope >= T::zero() {
            return zoom(objective, x, f0, direction, slope0, here, prev, evaluations);
        }
        prev = here;
        alpha = alpha + alpha;
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn zoom<T, F>(
    objective: &mut F,
    x: &[T],
    f0: T,
    direction: &[T],
    slope0: T,
    mut lo: Bound<T>,
    mut hi: Bound<T>,
    evaluations: &mut usize,
) -> Result<Option<Trial<T>>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    for _ in 0..MAX_ZOOM {
        let width = (hi.alpha - lo.alpha).abs();
        if width <= T::epsilon() * lo.alpha.abs().max(hi.alpha.abs()) {
            return Ok(None);
        }
        let alpha = interpolate(&lo, &hi);
        let trial = evaluate(objective, x, direction, alpha, evaluations)?;
        if !trial.usable() || trial.f > f0 + c1 * alpha * slope0 || trial.f >= lo.f {
            hi = Bound {
                alpha,
                f: trial.f,
                slope: trial.slope,
            };
            continue;
        }
        if trial.slope.abs() <= -c2 * slope0 {
            return Ok(Some(trial));
        }
        if trial.slope * (hi.alpha - lo.alpha) >= T::zero() {
            hi = lo;
        }
        lo = Bound {
            alpha,
            f: trial.f,
            slope: trial.slope,
        };
    }
    Ok(None)
}

/// Safeguarded cubic interpolation between the bracket ends; bisection when
/// the cubic minimizer is unusable or too close to either end.
fn interpolate<T: Real>(lo: &Bound<T>, hi: &Bound<T>) -> T {
    let mid = (lo.alpha + hi.alpha) * T::lit(0.5);
    if !(hi.f.is_finite() && hi.slope.is_finite()) {
        return mid;
    }
    let three = T::lit(3.0);
    let d1 = lo.slope + hi.slope - three * (lo.f - hi.f) / (lo.alpha - hi.alpha);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if !(disc >= T::zero()) {
        return mid;
    }
    let d2 = (hi.alpha - lo.alpha).signum() * disc.sqrt();
    let alpha = hi.alpha
        - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + d2 + d2);
    let (a, b) = if lo.alpha < hi.alpha {
        (lo.alpha, hi.alpha)
    } else {
        (hi.alpha, lo.alpha)
    };
    let margin = (b - a) * T::lit(0.1);
    if alpha.is_finite() && alpha >= a + margin && alpha <= b - margin {
        alpha
    } else {
        mid
    }
}

/// Armijo backtracking along the steepest-descent direction.
fn backtrack<T, F>(
    objective: &mut F,
    x: &[T],
    f0: T,
    g: &[T],
    g_norm: T,
    evaluations: &mut usize,
) -> Result<Option<Trial<T>>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let c1 = T::lit(C1);
    let direction: Vec<T> = g.iter().map(|&v| -v).collect();
    let slope0 = -dot(g, g);
    let mut alpha = T::one().min(T::one() / g_norm);
    for _ in 0..MAX_BACKTRACK {
        let trial = evaluate(objective, x, &direction, alpha, evaluations)?;
        if trial.usable()
            && trial.g.iter().all(|v| v.is_finite())
            && trial.f < f0
            && trial.f <= f0 + c1 * alpha * slope0
        {
            return Ok(Some(trial));
        }
        alpha = alpha * T::lit(0.5);
    }
    Ok(None)
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    y.iter_mut().zip(x).for_each(|(yi, &xi)| *yi += a * xi);
}

pub(crate) fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_by_hand() {
        // f = θ², θ = 1: g = 2, m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε)
        let mut theta = [1.0f64];
        let mut moments = AdamMoments::new(1);
        let config = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let grad = [2.0 * theta[0]];
        moments.update(&mut theta, &grad, &config).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-15);
        assert!((theta[0] - 0.9).abs() < 1e-6);
        assert_eq!(moments.step, 1);
    }

    #[test]
    fn adam_zero_gradient_only_advances_counter() {
        let mut theta = [0.5f64, -2.0, 3.0];
        let before = theta;
        let mut moments = AdamMoments::new(3);
        moments
            .update(&mut theta, &[0.0; 3], &AdamConfig::default())
            .unwrap();
        assert_eq!(theta, before);
        assert_eq!(moments.first, vec![0.0; 3]);
        assert_eq!(moments.second, vec![0.0; 3]);
        assert_eq!(moments.step, 1);
    }

    #[test]
    fn adam_rejects_bad_gradients() {
        let mut theta = [1.0f64, 2.0];
        let mut moments = AdamMoments::new(2);
        let err = moments
            .update(&mut theta, &[1.0, f64::NAN], &AdamConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 0, .. }));
        assert_eq!(theta, [1.0, 2.0]);
        assert_eq!(moments.step, 0);
        assert!(moments
            .update(&mut theta, &[1.0], &AdamConfig::default())
            .is_err());
    }

    #[test]
    fn adam_second_moment_stays_nonnegative() {
        let mut theta = vec![0.3f64; 4];
        let mut moments = AdamMoments::new(4);
        for k in 0..200 {
            let grad: Vec<f64> = (0..4).map(|i| ((k * 7 + i) as f64).sin() * 3.0).collect();
            moments
                .update(&mut theta, &grad, &AdamConfig::default())
                .unwrap();
            assert!(moments.second.iter().all(|&v| v >= 0.0));
        }
    }

    fn quadratic(a: &[[f64; 5]; 5], b: &[f64; 5], x: &[f64]) -> (f64, Vec<f64>) {
        let ax: Vec<f64> = (0..5).map(|i| (0..5).map(|j| a[i][j] * x[j]).sum()).collect();
        let f = 0.5 * dot(x, &ax) - dot(b, x);
        let g = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        (f, g)
    }

    /// Gaussian elimination, used as the analytic minimizer oracle.
    fn solve(a: &[[f64; 5]; 5], b: &[f64; 5]) -> Vec<f64> {
        let mut m: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                let mut row = a[i].to_vec();
                row.push(b[i]);
                row
            })
            .collect();
        for col in 0..5 {
            let pivot = (col..5)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            for row in col + 1..5 {
                let factor = m[row][col] / m[col][col];
                for k in col..6 {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
        let mut x = vec![0.0; 5];
        for row in (0..5).rev() {
            let tail: f64 = (row + 1..5).map(|k| m[row][k] * x[k]).sum();
            x[row] = (m[row][5] - tail) / m[row][row];
        }
        x
    }

    #[test]
    fn lbfgs_solves_convex_quadratic() {
        let a = [
            [6.0, 1.0, 0.5, 0.0, 0.2],
            [1.0, 5.0, 0.3, 0.4, 0.0],
            [0.5, 0.3, 4.0, 0.1, 0.6],
            [0.0, 0.4, 0.1, 3.0, 0.2],
            [0.2, 0.0, 0.6, 0.2, 2.0],
        ];
        let b = [1.0, -2.0, 0.5, 3.0, -1.0];
        let oracle = solve(&a, &b);
        let config = LbfgsConfig {
            memory: 10,
            tol: 1e-12,
            max_iters: 10,
        };
        let out = run_lbfgs(|x| Ok(quadratic(&a, &b, x)), &[0.0; 5], &config, |_, _| {}).unwrap();
        assert!(out.iterations <= 10);
        let err = out
            .x
            .iter()
            .zip(&oracle)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "error {err} after {} iterations", out.iterations);
    }

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let rosenbrock = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Ok((f, g))
        };
        let out = run_lbfgs(rosenbrock, &[-1.2, 1.0], &LbfgsConfig::default(), |_, _| {}).unwrap();
        assert!(out.value < 1e-10, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn lbfgs_returns_stationary_start() {
        let mut calls = 0;
        let out = run_lbfgs(
            |x: &[f64]| {
                calls += 1;
                Ok((x[0] * x[0], vec![2.0 * x[0]]))
            },
            &[0.0],
            &LbfgsConfig::default(),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(out.x, vec![0.0]);
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert_eq!(calls, 1);
    }

    #[test]
    fn lbfgs_accepted_values_never_increase() {
        let mut values = Vec::new();
        let f = |x: &[f64]| {
            let v: f64 = x.iter().enumerate().map(|(i, &t)| (t - i as f64).powi(4) + t.cos()).sum();
            let g = x
                .iter()
                .enumerate()
                .map(|(i, &t)| 4.0 * (t - i as f64).powi(3) - t.sin())
                .collect();
            Ok((v, g))
        };
        let out = run_lbfgs(f, &[3.0, -1.0, 0.5, 2.0], &LbfgsConfig::default(), |_, v| values.push(v)).unwrap();
        assert_eq!(values.len(), out.iterations + 1);
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*values.last().unwrap(), out.value);
    }

    #[test]
    fn lbfgs_observed_point_is_last_evaluated() {
        let mut last = Vec::new();
        let mut seen = Vec::new();
        let objective = |x: &[f64]| {
            last = x.to_vec();
            Ok((x[0].powi(2) + 3.0 * x[1].powi(2), vec![2.0 * x[0], 6.0 * x[1]]))
        };
        let out = run_lbfgs(objective, &[1.0, 1.0], &LbfgsConfig::default(), |_, v| seen.push(v)).unwrap();
        assert_eq!(last, out.x);
        assert_eq!(*seen.last().unwrap(), out.value);
    }

    #[test]
    fn lbfgs_warns_when_no_descent_is_possible() {
        // a gradient that lies: it points uphill everywhere
        let out = run_lbfgs(
            |x: &[f64]| Ok((x[0] * x[0], vec![-2.0 * x[0] - 1.0])),
            &[1.0],
            &LbfgsConfig::default(),
            |_, _| {},
        )
        .unwrap();
        assert!(out.warning.is_some());
        assert_eq!(out.x, vec![1.0]);
    }

    #[test]
    fn lbfgs_rejects_non_finite_start() {
        let err = run_lbfgs(
            |_: &[f64]| Ok((f64::NAN, vec![0.0])),
            &[1.0],
            &LbfgsConfig::default(),
            |_, _| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }
}
