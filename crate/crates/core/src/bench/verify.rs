//! Deterministic self-checks: residual oracle, quadrature, Legendre identities,
//! gradients and optimizer oracles. Each check reports its worst observed
//! error next to the tolerance it was held to.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::check_gradient;
use crate::error::Result;
use crate::legendre::{legendre_eval, QuadratureRule};
use crate::network::{NetworkConfig, ParameterSet, TapedParams};
use crate::problem::{make_experiment, residual_value, CollocationSet, SINGULAR_EXCLUSION};
use crate::training::{cost, run_lbfgs, train_points, AdamConfig, AdamMoments, CostModel, LbfgsConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn bounded(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            // NaN fails
            passed: worst <= tolerance,
            detail: format!("worst {worst:.3e}, tolerance {tolerance:.0e}"),
        }
    }
}

fn worst_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |acc: f64, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
}

/// Every check, in a fixed order.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    let mut out = vec![exact_residual()?];
    out.extend(quadrature()?);
    out.extend(legendre_identities()?);
    out.push(gradients()?);
    out.extend(optimizers()?);
    Ok(out)
}

/// The exact solution in place of the network leaves a residual below 1e-10
/// at 50 seeded random points per experiment, `N1 = N2 = 50`.
pub fn exact_residual() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = Vec::new();
    for id in 1..=4 {
        let problem = make_experiment::<f64>(id)?;
        let exact = problem.exact_fn().expect("benchmarks have exact solutions");
        let mut points: Vec<f64> = (0..50)
            .map(|_| rng.gen_range(0.0..=1.0))
            .filter(|&x| problem.admits_collocation(x))
            .collect();
        points.sort_by(f64::total_cmp);
        let set = CollocationSet::new(points.clone(), 50, 50)?;
        for x in points {
            debug_assert!(!problem.singular_at_origin() || x >= SINGULAR_EXCLUSION);
            worst.push(residual_value(&problem, |s| exact(s), x, &set)?.abs());
        }
    }
    Ok(CheckOutcome::bounded("exact-solution residual", worst_of(worst), 1e-10))
}

/// Monomial exactness up to degree `2N+1` for `N ≤ 20`, node and weight
/// symmetry, and weights summing to 2.
pub fn quadrature() -> Result<Vec<CheckOutcome>> {
    let mut exactness = Vec::new();
    let mut symmetry = Vec::new();
    for n in 0..=20 {
        let rule = QuadratureRule::<f64>::gauss_legendre(n)?;
        for degree in 0..=(2 * n + 1) {
            let got = rule.integrate(|t| t.powi(degree as i32));
            let want = if degree % 2 == 1 { 0.0 } else { 2.0 / (degree as f64 + 1.0) };
            exactness.push((got - want).abs());
        }
        let (nodes, weights) = (rule.nodes(), rule.weights());
        let len = nodes.len();
        for i in 0..len {
            symmetry.push((nodes[i] + nodes[len - 1 - i]).abs());
            symmetry.push((weights[i] - weights[len - 1 - i]).abs());
        }
        symmetry.push((weights.iter().sum::<f64>() - 2.0).abs());
    }
    Ok(vec![
        CheckOutcome::bounded("quadrature exactness", worst_of(exactness), 1e-12),
        CheckOutcome::bounded("quadrature symmetry and weight sum", worst_of(symmetry), 1e-12),
    ])
}

/// Orthogonality with the 13-point rule, parity, the bound `|L_n| ≤ 1` and
/// endpoint values.
pub fn legendre_identities() -> Result<Vec<CheckOutcome>> {
    let rule = QuadratureRule::<f64>::gauss_legendre(12)?;
    let mut orthogonality = Vec::new();
    for n in 0..=10 {
        for m in 0..=10 {
            let got = rule.integrate(|t| legendre_eval(n, t) * legendre_eval(m, t));
            let want = if n == m { 2.0 / (2.0 * n as f64 + 1.0) } else { 0.0 };
            orthogonality.push((got - want).abs());
        }
    }
    let grid: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
    let mut parity = Vec::new();
    let mut bound = Vec::new();
    let mut endpoints = Vec::new();
    for n in 0..=15 {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for &t in &grid {
            parity.push((legendre_eval(n, -t) - sign * legendre_eval(n, t)).abs());
            bound.push((legendre_eval(n, t).abs() - 1.0).max(0.0));
        }
        endpoints.push((legendre_eval(n, 1.0f64) - 1.0).abs());
        endpoints.push((legendre_eval(n, -1.0) - sign).abs());
    }
    Ok(vec![
        CheckOutcome::bounded("Legendre orthogonality", worst_of(orthogonality), 1e-12),
        CheckOutcome::bounded("Legendre parity", worst_of(parity), 1e-13),
        CheckOutcome::bounded("Legendre bound", worst_of(bound), 1e-12),
        CheckOutcome::bounded("Legendre endpoints", worst_of(endpoints), 1e-12),
    ])
}

/// Tape and batched gradients of the full cost against central differences
/// at five initializations per experiment, on a reduced network and grid.
pub fn gradients() -> Result<CheckOutcome> {
    let config = TrainConfig {
        m1: 9,
        n1: 6,
        n2: 6,
        ..TrainConfig::default()
    };
    let step = 1e-6;
    let mut worst = Vec::new();
    for id in 1..=4 {
        let problem = make_experiment::<f64>(id)?;
        let points = train_points(&problem, &config)?;
        let colloc = CollocationSet::new(points.clone(), config.n1, config.n2)?;
        for seed in 0..5 {
            let net = NetworkConfig::ldnn(vec![1, 4, 6, 5, 1], seed)?;
            let params = ParameterSet::<f64>::init(&net);
            let flat = params.flatten();
            worst.push(check_gradient(
                |_, vars| {
                    let taped = TapedParams::from_vars(&net, vars).expect("flat length matches");
                    cost(&problem, &net, &config, &taped, &points, &colloc)
                        .expect("valid cost")
                        .total
                },
                &flat,
                step,
            ));

            let model = CostModel::new(&problem, &net, &config, &points)?;
            let (_, grad) = model.value_and_gradient(&params)?;
            let mut shifted = params.clone();
            let mut buffer = flat.clone();
            let mut fast = 0.0f64;
            for i in 0..flat.len() {
                buffer[i] = flat[i] + step;
                shifted.assign_flat(&buffer);
                let up = model.value(&shifted)?.total;
                buffer[i] = flat[i] - step;
                shifted.assign_flat(&buffer);
                let down = model.value(&shifted)?.total;
                buffer[i] = flat[i];
                let fd = (up - down) / (2.0 * step);
                fast = worst_of([fast, (grad[i] - fd).abs() / (fd.abs() + 1e-12)]);
            }
            worst.push(fast);
        }
    }
    Ok(CheckOutcome::bounded("cost gradient vs finite differences", worst_of(worst), 1e-5))
}

/// L-BFGS on a 5-d convex quadratic whose minimizer is known, and Adam's
/// first step against a hand computation.
pub fn optimizers() -> Result<Vec<CheckOutcome>> {
    // A = Bᵀ B + I is symmetric positive definite; b = A x* fixes the minimizer
    let b_rows = [
        [1.0, 2.0, 0.0, -1.0, 0.5],
        [0.0, 1.0, 3.0, 0.0, -2.0],
        [2.0, 0.0, 1.0, 1.0, 0.0],
        [0.5, -1.0, 0.0, 2.0, 1.0],
        [0.0, 0.0, 1.0, -1.0, 3.0],
    ];
    let mut a = [[0.0f64; 5]; 5];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (0..5).map(|k| b_rows[k][i] * b_rows[k][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    let minimizer = [1.0, -2.0, 0.5, 3.0, -1.5];
    let rhs: Vec<f64> = a.iter().map(|row| row.iter().zip(&minimizer).map(|(p, q)| p * q).sum()).collect();
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let ax: Vec<f64> = a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect();
        let value = 0.5 * ax.iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
            - rhs.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let grad = ax.iter().zip(&rhs).map(|(p, q)| p - q).collect();
        Ok((value, grad))
    };
    let config = LbfgsConfig {
        memory: 10,
        tol: 1e-12,
        max_iters: 200,
    };
    let outcome = run_lbfgs(objective, &[0.0; 5], &config, |_, _| {})?;
    let lbfgs_error = worst_of(outcome.x.iter().zip(&minimizer).map(|(p, q)| (p - q).abs()));

    // θ = 1, g = 2: m̂ = 2, v̂ = 4, so θ₁ = 1 − lr · 2 / (2 + ε)
    let adam = AdamConfig::default();
    let mut theta = [1.0f64];
    let mut moments = AdamMoments::new(1);
    moments.update(&mut theta, &[2.0], &adam)?;
    let adam_error = (theta[0] - 0.999).abs();

    Ok(vec![
        CheckOutcome::bounded("L-BFGS quadratic minimizer", lbfgs_error, 1e-10),
        CheckOutcome::bounded("Adam first step", adam_error, 1e-6),
    ])
}
