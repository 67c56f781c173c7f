//! Legendre polynomials and Gauss–Legendre quadrature.
//!
//! `L_n` is evaluated with the three-term recurrence
//! `(n+1) L_{n+1}(η) = (2n+1) η L_n(η) - n L_{n-1}(η)`, seeded with `L_0 = 1`,
//! `L_1 = η`. Derivatives follow `L'_{n+1} = L'_{n-1} + (2n+1) L_n` with
//! `L'_0 = 0`, `L'_1 = 1`.
//!
//! Evaluation is valid on the whole real line; nothing is clamped to `[-1, 1]`.

use crate::error::{Error, Result};
use crate::real::Real;

const NEWTON_MAX_ITERATIONS: usize = 100;

/// `L_n(eta)`.
pub fn legendre_eval<T: Real>(n: usize, eta: T) -> T {
    legendre_with_derivative(n, eta).0
}

/// `[L_0(eta), ..., L_p(eta)]`.
pub fn legendre_eval_all<T: Real>(p: usize, eta: T) -> Vec<T> {
    let mut values = Vec::with_capacity(p + 1);
    values.push(T::one());
    if p == 0 {
        return values;
    }
    values.push(eta);
    for k in 1..p {
        let kf = T::from_count(k);
        let next = (T::from_count(2 * k + 1) * eta * values[k] - kf * values[k - 1])
            / T::from_count(k + 1);
        values.push(next);
    }
    values
}

/// `L'_n(eta)`.
pub fn legendre_derivative<T: Real>(n: usize, eta: T) -> T {
    legendre_with_derivative(n, eta).1
}

/// `(L_n(eta), L'_n(eta))` from a single pass of both recurrences.
pub fn legendre_with_derivative<T: Real>(n: usize, eta: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    // (value, derivative) for degrees k-1 and k
    let (mut p_prev, mut p_curr) = (T::one(), eta);
    let (mut d_prev, mut d_curr) = (T::zero(), T::one());
    for k in 1..n {
        let two_k_plus_one = T::from_count(2 * k + 1);
        let p_next =
            (two_k_plus_one * eta * p_curr - T::from_count(k) * p_prev) / T::from_count(k + 1);
        let d_next = d_prev + two_k_plus_one * p_curr;
        p_prev = p_curr;
        p_curr = p_next;
        d_prev = d_curr;
        d_curr = d_next;
    }
    (p_curr, d_curr)
}

/// An `(N+1)`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    order: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Builds the rule whose nodes are the roots of `L_{order+1}`.
    ///
    /// Roots are located by Newton iteration from the asymptotic seed
    /// `cos(π(j + 0.75)/(order + 1.5))`; the positive half is computed and
    /// mirrored, so nodes and weights are exactly symmetric.
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        let count = order + 1;
        let degree = count;
        let tolerance = T::lit(1e-14).max(T::epsilon() * T::lit(4.0));
        let mut nodes = vec![T::zero(); count];
        let mut weights = vec![T::zero(); count];

        for j in 0..count / 2 {
            let seed = (T::PI() * (T::from_count(j) + T::lit(0.75))
                / (T::from_count(order) + T::lit(1.5)))
            .cos();
            let mut root = seed;
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITERATIONS {
                let (value, slope) = legendre_with_derivative(degree, root);
                let step = value / slope;
                root = root - step;
                if step.abs() <= tolerance {
                    converged = true;
                    break;
                }
            }
            if !converged || !root.is_finite() {
                return Err(Error::QuadratureNoConvergence {
                    degree,
                    index: j,
                    iterations: NEWTON_MAX_ITERATIONS,
                });
            }
            let weight = node_weight(degree, root);
            nodes[count - 1 - j] = root;
            nodes[j] = -root;
            weights[count - 1 - j] = weight;
            weights[j] = weight;
        }
        if count % 2 == 1 {
            let mid = count / 2;
            nodes[mid] = T::zero();
            weights[mid] = node_weight(degree, T::zero());
        }

        Ok(Self {
            order,
            nodes,
            weights,
        })
    }

    /// `N`; the rule has `N + 1` points.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `Σ_j ω_j h(X_j)`, the rule applied on `[-1, 1]`.
    pub fn integrate<F>(&self, integrand: F) -> T
    where
        F: Fn(T) -> T,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&node, &weight)| weight * integrand(node))
            .sum()
    }

    /// Maps the rule onto `[0, x]` via `s = (x/2)(t + 1)`; the Jacobian `x/2`
    /// is folded into the returned weights.
    pub fn map_volterra(&self, x: T) -> Result<MappedRule<T>> {
        if !(x > T::zero()) {
            return Err(Error::NonPositiveUpperLimit(x.as_f64()));
        }
        let half = x * T::lit(0.5);
        Ok(MappedRule {
            nodes_s: self.nodes.iter().map(|&t| half * (t + T::one())).collect(),
            scaled_weights: self.weights.iter().map(|&w| half * w).collect(),
        })
    }

    /// Maps the rule onto `[0, 1]` via `s = (t + 1)/2`.
    pub fn map_fredholm(&self) -> MappedRule<T> {
        let half = T::lit(0.5);
        MappedRule {
            nodes_s: self.nodes.iter().map(|&t| half * (t + T::one())).collect(),
            scaled_weights: self.weights.iter().map(|&w| half * w).collect(),
        }
    }
}

/// Convenience wrapper for [`QuadratureRule::gauss_legendre`].
pub fn gauss_legendre_rule<T: Real>(order: usize) -> Result<QuadratureRule<T>> {
    QuadratureRule::gauss_legendre(order)
}

fn node_weight<T: Real>(degree: usize, root: T) -> T {
    let slope = legendre_derivative(degree, root);
    T::lit(2.0) / ((T::one() - root * root) * slope * slope)
}

/// A quadrature rule expressed in the physical integration variable `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedRule<T> {
    pub nodes_s: Vec<T>,
    pub scaled_weights: Vec<T>,
}

impl<T: Real> MappedRule<T> {
    pub fn integrate<F>(&self, integrand: F) -> T
    where
        F: Fn(T) -> T,
    {
        self.nodes_s
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&s, &w)| w * integrand(s))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Explicit power-sum form of `L_n`, independent of the recurrence.
    fn explicit_sum(n: usize, eta: f64) -> f64 {
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let mut total = 0.0;
        for l in 0..=n / 2 {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let coef = fact(2 * n - 2 * l) / (fact(l) * fact(n - l) * fact(n - 2 * l));
            total += sign * coef * eta.powi((n - 2 * l) as i32);
        }
        total / 2f64.powi(n as i32)
    }

    #[test]
    fn seed_and_endpoint_values() {
        assert_eq!(legendre_eval(0, 0.3), 1.0);
        assert_eq!(legendre_eval(1, 0.7), 0.7);
        assert_eq!(legendre_eval(5, 1.0), 1.0);
        assert_eq!(legendre_eval(5, -1.0), -1.0);
    }

    #[test]
    fn recurrence_matches_explicit_sum() {
        assert!((explicit_sum(2, 0.5) - -0.125).abs() < 1e-15);
        assert!((legendre_eval(2, 0.5f64) - -0.125).abs() < 1e-15);
        for n in 0..=12 {
            for &eta in &[-1.3, -0.8, -0.21, 0.0, 0.37, 0.9, 1.7] {
                let expected = explicit_sum(n, eta);
                let got = legendre_eval(n, eta);
                assert!(
                    (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                    "n={n} eta={eta}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn eval_all_is_consistent() {
        assert_eq!(legendre_eval_all(1, 0.0), vec![1.0, 0.0]);
        assert_eq!(legendre_eval_all(3, 1.0), vec![1.0; 4]);
        let all = legendre_eval_all(4, -0.2);
        assert_eq!(all.len(), 5);
        for (n, value) in all.iter().enumerate() {
            assert_eq!(*value, legendre_eval(n, -0.2));
        }
        assert_eq!(legendre_eval_all(0, 4.0), vec![1.0]);
    }

    #[test]
    fn derivative_values() {
        assert_eq!(legendre_derivative(0, 0.9), 0.0);
        assert_eq!(legendre_derivative(1, -0.4), 1.0);
        assert_eq!(legendre_derivative(2, 1.0), 3.0);
        let h = 1e-6;
        let fd: f64 = (legendre_eval(2, 1.0 + h) - legendre_eval(2, 1.0 - h)) / (2.0 * h);
        assert!((fd - 3.0).abs() < 1e-8);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for n in 0..=10 {
            for i in 1..20 {
                let eta = -0.95 + 0.1 * i as f64;
                let fd = (legendre_eval(n, eta + h) - legendre_eval(n, eta - h)) / (2.0 * h);
                let ad = legendre_derivative(n, eta);
                assert!(
                    (ad - fd).abs() <= 1e-7 * fd.abs().max(1.0),
                    "n={n} eta={eta}: {ad} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn small_rules() {
        let r0 = QuadratureRule::<f64>::gauss_legendre(0).unwrap();
        assert_eq!(r0.nodes(), &[0.0]);
        assert_eq!(r0.weights(), &[2.0]);
        assert_eq!(r0.integrate(|_| 1.0), 2.0);

        let r1 = QuadratureRule::<f64>::gauss_legendre(1).unwrap();
        let root = 1.0 / 3f64.sqrt();
        assert!((r1.nodes()[0] + root).abs() < 1e-15);
        assert!((r1.nodes()[1] - root).abs() < 1e-15);
        for w in r1.weights() {
            assert!((w - 1.0).abs() < 1e-14);
        }
        assert!(r1.integrate(|t| t * t * t).abs() < 1e-15);
        assert!((r1.integrate(|t| t * t) - 2.0 / 3.0).abs() < 1e-15);

        let r4 = QuadratureRule::<f64>::gauss_legendre(4).unwrap();
        assert!((r4.integrate(|t| t.powi(8)) - 2.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn rule_invariants_up_to_fifty() {
        for order in 0..=60 {
            let rule = QuadratureRule::<f64>::gauss_legendre(order).unwrap();
            let n = rule.len();
            assert_eq!(n, order + 1);
            for j in 0..n {
                assert!((rule.nodes()[j] + rule.nodes()[n - 1 - j]).abs() < 1e-12);
                assert!((rule.weights()[j] - rule.weights()[n - 1 - j]).abs() < 1e-12);
                assert!(rule.weights()[j] > 0.0);
                assert!(legendre_eval(order + 1, rule.nodes()[j]).abs() < 1e-12);
                if j > 0 {
                    assert!(rule.nodes()[j] > rule.nodes()[j - 1]);
                }
            }
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 2.0).abs() < 1e-12, "order {order}: sum {total}");
        }
    }

    #[test]
    fn monomial_exactness() {
        for order in 0..=20 {
            let rule = QuadratureRule::<f64>::gauss_legendre(order).unwrap();
            for degree in 0..=(2 * order + 1) {
                let exact = if degree % 2 == 1 {
                    0.0
                } else {
                    2.0 / (degree as f64 + 1.0)
                };
                let got = rule.integrate(|t| t.powi(degree as i32));
                assert!(
                    (got - exact).abs() < 1e-12,
                    "order {order} degree {degree}: {got}"
                );
            }
        }
    }

    #[test]
    fn orthogonality_with_twelfth_order_rule() {
        let rule = QuadratureRule::<f64>::gauss_legendre(12).unwrap();
        for n in 0..=10 {
            for m in 0..=10 {
                let got = rule.integrate(|t| legendre_eval(n, t) * legendre_eval(m, t));
                let expected = if n == m { 2.0 / (2 * n + 1) as f64 } else { 0.0 };
                assert!((got - expected).abs() < 1e-12, "({n},{m}) -> {got}");
            }
        }
    }

    #[test]
    fn single_precision_rule() {
        let rule = QuadratureRule::<f32>::gauss_legendre(6).unwrap();
        let total: f32 = rule.weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-5);
        assert!((rule.integrate(|t| t * t) - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn volterra_map() {
        let r0 = QuadratureRule::<f64>::gauss_legendre(0).unwrap();
        let m = r0.map_volterra(1.0).unwrap();
        assert_eq!(m.nodes_s, vec![0.5]);
        assert_eq!(m.scaled_weights, vec![1.0]);

        let r1 = QuadratureRule::<f64>::gauss_legendre(1).unwrap();
        let m = r1.map_volterra(2.0).unwrap();
        let root = 1.0 / 3f64.sqrt();
        assert!((m.nodes_s[0] - (1.0 - root)).abs() < 1e-15);
        assert!((m.nodes_s[1] - (1.0 + root)).abs() < 1e-15);
        assert!((m.scaled_weights[0] - 1.0).abs() < 1e-14);

        for order in [0, 3, 17, 50] {
            let rule = QuadratureRule::<f64>::gauss_legendre(order).unwrap();
            let m = rule.map_volterra(0.4).unwrap();
            let total: f64 = m.scaled_weights.iter().sum();
            assert!((total - 0.4).abs() < 1e-14);
            assert!(m.nodes_s.iter().all(|&s| s > 0.0 && s < 0.4));
        }

        assert!(matches!(
            r0.map_volterra(0.0),
            Err(Error::NonPositiveUpperLimit(_))
        ));
        assert!(r0.map_volterra(-0.5).is_err());
    }

    #[test]
    fn fredholm_map() {
        let r0 = QuadratureRule::<f64>::gauss_legendre(0).unwrap();
        let m = r0.map_fredholm();
        assert_eq!(m.nodes_s, vec![0.5]);
        assert_eq!(m.scaled_weights, vec![1.0]);

        let r1 = QuadratureRule::<f64>::gauss_legendre(1).unwrap();
        let m = r1.map_fredholm();
        let offset = 1.0 / (2.0 * 3f64.sqrt());
        assert!((m.nodes_s[0] - (0.5 - offset)).abs() < 1e-15);
        assert!((m.nodes_s[1] - (0.5 + offset)).abs() < 1e-15);
        assert!((m.scaled_weights[0] - 0.5).abs() < 1e-15);
        assert!((m.integrate(|s| s * s) - 1.0 / 3.0).abs() < 1e-15);

        let rule = QuadratureRule::<f64>::gauss_legendre(50).unwrap();
        let m = rule.map_fredholm();
        assert!(m.nodes_s.iter().all(|&s| s > 0.0 && s < 1.0));
        let total: f64 = m.scaled_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn parity(n in 0usize..=15, eta in -1.0f64..=1.0) {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((legendre_eval(n, -eta) - sign * legendre_eval(n, eta)).abs() < 1e-13);
        }

        #[test]
        fn bounded_on_reference_interval(n in 0usize..=15, eta in -1.0f64..=1.0) {
            prop_assert!(legendre_eval(n, eta).abs() <= 1.0 + 1e-12);
        }
    }
}
