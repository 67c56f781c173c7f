//! Nonlinear Volterra–Fredholm–Hammerstein integral equations on `[0, 1]`:
//!
//! ```text
//! y(x) = g(x) + ξ1 ∫_0^x K1(x,s) φ1(s, y(s)) ds + ξ2 ∫_0^1 K2(x,s) φ2(s, y(s)) ds
//! ```
//!
//! and the quadrature-discretized residual
//!
//! ```text
//! R(x) = -y(x) + g(x) + ξ1 Σ_j w1_j K1(x,s1_j) φ1(s1_j, y(s1_j))
//!                     + ξ2 Σ_j w2_j K2(x,s2_j) φ2(s2_j, y(s2_j))
//! ```
//!
//! where `(s1, w1)` is the Gauss rule mapped onto `[0, x]` (the `x/2` Jacobian
//! lives in `w1`) and `(s2, w2)` the rule mapped onto `[0, 1]`.

use std::fmt;
use std::sync::Arc;

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::legendre::QuadratureRule;
use crate::real::Real;

/// Collocation points closer to zero than this are rejected for problems
/// whose Volterra kernel is singular at the origin.
pub const SINGULAR_EXCLUSION: f64 = 1e-8;

pub type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type KernelFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;
/// `φ(s, y)`; composes with tape variables because `y` is the surrogate.
pub type NonlinearityFn<T> = Arc<dyn for<'t> Fn(T, Var<'t, T>) -> Var<'t, T> + Send + Sync>;

/// One integral term `ξ ∫ K(x,s) φ(s, y(s)) ds`.
#[derive(Clone)]
pub struct IntegralTerm<T> {
    pub xi: T,
    pub kernel: KernelFn<T>,
    pub phi: NonlinearityFn<T>,
}

impl<T: Real> IntegralTerm<T> {
    pub fn new<K, P>(xi: T, kernel: K, phi: P) -> Self
    where
        K: Fn(T, T) -> T + Send + Sync + 'static,
        P: for<'t> Fn(T, Var<'t, T>) -> Var<'t, T> + Send + Sync + 'static,
    {
        Self {
            xi,
            kernel: Arc::new(kernel),
            phi: Arc::new(phi),
        }
    }

    fn active(&self) -> bool {
        self.xi != T::zero()
    }
}

/// A single integral-equation instance.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    name: String,
    forcing: RealFn<T>,
    volterra: Option<IntegralTerm<T>>,
    fredholm: Option<IntegralTerm<T>>,
    exact: Option<RealFn<T>>,
    singular_at_origin: bool,
}

impl<T> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("volterra", &self.volterra.is_some())
            .field("fredholm", &self.fredholm.is_some())
            .field("exact", &self.exact.is_some())
            .field("singular_at_origin", &self.singular_at_origin)
            .finish()
    }
}

impl<T: Real> ProblemSpec<T> {
    pub fn builder<G>(name: impl Into<String>, forcing: G) -> ProblemBuilder<T>
    where
        G: Fn(T) -> T + Send + Sync + 'static,
    {
        ProblemBuilder {
            spec: ProblemSpec {
                name: name.into(),
                forcing: Arc::new(forcing),
                volterra: None,
                fredholm: None,
                exact: None,
                singular_at_origin: false,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn forcing(&self, x: T) -> T {
        (self.forcing)(x)
    }

    pub fn xi1(&self) -> T {
        self.volterra.as_ref().map_or(T::zero(), |t| t.xi)
    }

    pub fn xi2(&self) -> T {
        self.fredholm.as_ref().map_or(T::zero(), |t| t.xi)
    }

    pub fn volterra(&self) -> Option<&IntegralTerm<T>> {
        self.volterra.as_ref().filter(|t| t.active())
    }

    pub fn fredholm(&self) -> Option<&IntegralTerm<T>> {
        self.fredholm.as_ref().filter(|t| t.active())
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self, x: T) -> Option<T> {
        self.exact.as_ref().map(|f| f(x))
    }

    pub fn exact_fn(&self) -> Option<RealFn<T>> {
        self.exact.clone()
    }

    pub fn singular_at_origin(&self) -> bool {
        self.singular_at_origin
    }

    /// Whether `x` may be used as a collocation point.
    pub fn admits_collocation(&self, x: T) -> bool {
        !(self.singular_at_origin && self.volterra().is_some() && x < T::lit(SINGULAR_EXCLUSION))
    }

    /// A copy with `delta` added to the forcing term.
    pub fn with_shifted_forcing<D>(&self, delta: D) -> Self
    where
        D: Fn(T) -> T + Send + Sync + 'static,
    {
        let forcing = self.forcing.clone();
        let mut shifted = self.clone();
        shifted.forcing = Arc::new(move |x| forcing(x) + delta(x));
        shifted
    }
}

pub struct ProblemBuilder<T> {
    spec: ProblemSpec<T>,
}

impl<T: Real> ProblemBuilder<T> {
    pub fn volterra<K, P>(mut self, xi1: T, kernel: K, phi: P) -> Self
    where
        K: Fn(T, T) -> T + Send + Sync + 'static,
        P: for<'t> Fn(T, Var<'t, T>) -> Var<'t, T> + Send + Sync + 'static,
    {
        self.spec.volterra = Some(IntegralTerm::new(xi1, kernel, phi));
        self
    }

    pub fn fredholm<K, P>(mut self, xi2: T, kernel: K, phi: P) -> Self
    where
        K: Fn(T, T) -> T + Send + Sync + 'static,
        P: for<'t> Fn(T, Var<'t, T>) -> Var<'t, T> + Send + Sync + 'static,
    {
        self.spec.fredholm = Some(IntegralTerm::new(xi2, kernel, phi));
        self
    }

    pub fn volterra_term(mut self, term: IntegralTerm<T>) -> Self {
        self.spec.volterra = Some(term);
        self
    }

    pub fn fredholm_term(mut self, term: IntegralTerm<T>) -> Self {
        self.spec.fredholm = Some(term);
        self
    }

    pub fn exact<F>(mut self, exact: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        self.spec.exact = Some(Arc::new(exact));
        self
    }

    /// Marks the Volterra kernel as singular at `x = 0`.
    pub fn singular_at_origin(mut self) -> Self {
        self.spec.singular_at_origin = true;
        self
    }

    /// Validates and returns the problem.
    ///
    /// Both `ξ` equal to zero is rejected; `g`, `K1`, `K2` are probed on an
    /// 11 × 11 grid over the domain and must be finite there.
    pub fn build(self) -> Result<ProblemSpec<T>> {
        let spec = self.spec;
        if spec.volterra().is_none() && spec.fredholm().is_none() {
            return Err(Error::InvalidProblem(format!(
                "{}: xi1 = xi2 = 0 leaves no integral term",
                spec.name
            )));
        }
        let probe: Vec<T> = (0..=10).map(|i| T::lit(i as f64 / 10.0)).collect();
        for &x in &probe {
            if !spec.forcing(x).is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "{}: g({x}) is not finite",
                    spec.name
                )));
            }
            for &s in &probe {
                if let Some(term) = spec.volterra() {
                    let singular_here = spec.singular_at_origin && x < T::lit(SINGULAR_EXCLUSION);
                    if s <= x && !singular_here && !(term.kernel)(x, s).is_finite() {
                        return Err(Error::InvalidProblem(format!(
                            "{}: K1({x}, {s}) is not finite",
                            spec.name
                        )));
                    }
                }
                if let Some(term) = spec.fredholm() {
                    if !(term.kernel)(x, s).is_finite() {
                        return Err(Error::InvalidProblem(format!(
                            "{}: K2({x}, {s}) is not finite",
                            spec.name
                        )));
                    }
                }
            }
        }
        Ok(spec)
    }
}

/// Collocation points plus the Volterra (order `N1`) and Fredholm (order `N2`)
/// quadrature rules.
#[derive(Debug, Clone)]
pub struct CollocationSet<T> {
    points: Vec<T>,
    volterra_rule: QuadratureRule<T>,
    fredholm_rule: QuadratureRule<T>,
}

impl<T: Real> CollocationSet<T> {
    pub fn new(points: Vec<T>, n1: usize, n2: usize) -> Result<Self> {
        if points.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
            return Err(Error::InvalidProblem(
                "collocation points must lie in [0, 1]".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidProblem(
                "collocation points must be sorted".into(),
            ));
        }
        Ok(Self {
            points,
            volterra_rule: QuadratureRule::gauss_legendre(n1)?,
            fredholm_rule: QuadratureRule::gauss_legendre(n2)?,
        })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn volterra_rule(&self) -> &QuadratureRule<T> {
        &self.volterra_rule
    }

    pub fn fredholm_rule(&self) -> &QuadratureRule<T> {
        &self.fredholm_rule
    }
}

fn check_point<T: Real>(problem: &ProblemSpec<T>, x: T) -> Result<()> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::InvalidProblem(format!(
            "collocation point {x} outside [0, 1]"
        )));
    }
    if !problem.admits_collocation(x) {
        return Err(Error::SingularPoint(x.as_f64()));
    }
    Ok(())
}

/// Volterra nodes on `[0, x]` with coefficients `ξ1 · w_j · K1(x, s_j)`.
///
/// The kernel is folded into the plain-real coefficient before it meets the
/// surrogate, so a kernel like `1/(2x)` only ever appears multiplied by the
/// `x/2` Jacobian. At `x = 0` the interval is empty and no nodes are returned.
fn volterra_nodes<T: Real>(
    term: &IntegralTerm<T>,
    rule: &QuadratureRule<T>,
    x: T,
) -> Result<Vec<(T, T)>> {
    if x == T::zero() {
        return Ok(Vec::new());
    }
    let mapped = rule.map_volterra(x)?;
    Ok(mapped
        .nodes_s
        .iter()
        .zip(&mapped.scaled_weights)
        .map(|(&s, &w)| (s, term.xi * (w * (term.kernel)(x, s))))
        .collect())
}

/// Fredholm nodes `s = (t + 1)/2` on `[0, 1]` with coefficients
/// `ξ2 · w_j · K2(x, s_j)`. The nodes do not depend on `x`.
fn fredholm_nodes<T: Real>(term: &IntegralTerm<T>, rule: &QuadratureRule<T>, x: T) -> Vec<(T, T)> {
    let mapped = rule.map_fredholm();
    mapped
        .nodes_s
        .iter()
        .zip(&mapped.scaled_weights)
        .map(|(&s, &w)| (s, term.xi * (w * (term.kernel)(x, s))))
        .collect()
}

/// The discretized residual `R(x)` with `net` standing in for `y`.
pub fn residual<'t, T, N>(
    problem: &ProblemSpec<T>,
    net: N,
    x: T,
    colloc: &CollocationSet<T>,
) -> Result<Var<'t, T>>
where
    T: Real,
    N: Fn(T) -> Var<'t, T>,
{
    check_point(problem, x)?;
    let mut r = -net(x) + problem.forcing(x);
    if let Some(term) = problem.volterra() {
        for (s, coeff) in volterra_nodes(term, colloc.volterra_rule(), x)? {
            r = r + (term.phi)(s, net(s)) * coeff;
        }
    }
    if let Some(term) = problem.fredholm() {
        for (s, coeff) in fredholm_nodes(term, colloc.fredholm_rule(), x) {
            r = r + (term.phi)(s, net(s)) * coeff;
        }
    }
    Ok(r)
}

/// Residual with plain-real `y` (no tape).
pub fn residual_value<T: Real>(
    problem: &ProblemSpec<T>,
    y: impl Fn(T) -> T,
    x: T,
    colloc: &CollocationSet<T>,
) -> Result<T> {
    residual(problem, |s| Var::constant(y(s)), x, colloc).map(|r| r.value())
}

/// The residual at every collocation point, precompiled: node positions and
/// kernel coefficients are computed once, so repeated evaluation only needs
/// the surrogate values at [`ResidualPlan::eval_points`].
#[derive(Clone)]
pub struct ResidualPlan<T> {
    problem: ProblemSpec<T>,
    points: Vec<T>,
    forcing: Vec<T>,
    /// Per collocation point, the start of its block in `volterra_nodes`.
    volterra_offsets: Vec<usize>,
    volterra_nodes: Vec<T>,
    volterra_coeffs: Vec<T>,
    fredholm_nodes: Vec<T>,
    /// Row-major `points.len() × fredholm_nodes.len()`.
    fredholm_coeffs: Vec<T>,
}

impl<T: Real> ResidualPlan<T> {
    pub fn new(problem: &ProblemSpec<T>, colloc: &CollocationSet<T>) -> Result<Self> {
        let points = colloc.points().to_vec();
        let mut forcing = Vec::with_capacity(points.len());
        let mut volterra_offsets = Vec::with_capacity(points.len() + 1);
        let mut volterra_nodes = Vec::new();
        let mut volterra_coeffs = Vec::new();
        let mut fredholm_coeffs = Vec::new();
        let shared_nodes = match problem.fredholm() {
            Some(_) => colloc.fredholm_rule().map_fredholm().nodes_s,
            None => Vec::new(),
        };
        for &x in &points {
            check_point(problem, x)?;
            forcing.push(problem.forcing(x));
            volterra_offsets.push(volterra_nodes.len());
            if let Some(term) = problem.volterra() {
                for (s, c) in volterra_nodes_for(term, colloc, x)? {
                    volterra_nodes.push(s);
                    volterra_coeffs.push(c);
                }
            }
            if let Some(term) = problem.fredholm() {
                fredholm_coeffs.extend(
                    fredholm_nodes(term, colloc.fredholm_rule(), x)
                        .into_iter()
                        .map(|(_, c)| c),
                );
            }
        }
        volterra_offsets.push(volterra_nodes.len());
        Ok(Self {
            problem: problem.clone(),
            points,
            forcing,
            volterra_offsets,
            volterra_nodes,
            volterra_coeffs,
            fredholm_nodes: shared_nodes,
            fredholm_coeffs,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Inputs at which the surrogate is needed, in the order expected by
    /// [`ResidualPlan::residuals`]: collocation points, then every Volterra
    /// node, then the shared Fredholm nodes.
    pub fn eval_points(&self) -> Vec<T> {
        let mut all = Vec::with_capacity(self.eval_len());
        all.extend_from_slice(&self.points);
        all.extend_from_slice(&self.volterra_nodes);
        all.extend_from_slice(&self.fredholm_nodes);
        all
    }

    pub fn eval_len(&self) -> usize {
        self.points.len() + self.volterra_nodes.len() + self.fredholm_nodes.len()
    }

    /// Residuals at collocation points `range`, given surrogate values at the
    /// point itself, at its Volterra nodes and at the Fredholm nodes.
    ///
    /// `y_point[i]` and the block `y_volterra[...]` are indexed relative to
    /// the start of `range`; `y_fredholm` is shared.
    pub fn residuals<'t>(
        &self,
        range: std::ops::Range<usize>,
        y_point: &[Var<'t, T>],
        y_volterra: &[Var<'t, T>],
        y_fredholm: &[Var<'t, T>],
    ) -> Vec<Var<'t, T>> {
        let base = self.volterra_offsets[range.start];
        let n2 = self.fredholm_nodes.len();
        range
            .clone()
            .map(|i| {
                let local = i - range.start;
                let mut r = -y_point[local] + self.forcing[i];
                if let Some(term) = self.problem.volterra() {
                    for j in self.volterra_offsets[i]..self.volterra_offsets[i + 1] {
                        let s = self.volterra_nodes[j];
                        r = r + (term.phi)(s, y_volterra[j - base]) * self.volterra_coeffs[j];
                    }
                }
                if let Some(term) = self.problem.fredholm() {
                    let row = &self.fredholm_coeffs[i * n2..(i + 1) * n2];
                    for ((&s, &c), &y) in self.fredholm_nodes.iter().zip(row).zip(y_fredholm) {
                        r = r + (term.phi)(s, y) * c;
                    }
                }
                r
            })
            .collect()
    }

    /// Slice of Volterra-node indices belonging to collocation points `range`.
    pub fn volterra_span(&self, range: std::ops::Range<usize>) -> std::ops::Range<usize> {
        self.volterra_offsets[range.start]..self.volterra_offsets[range.end]
    }

    pub fn volterra_node_count(&self) -> usize {
        self.volterra_nodes.len()
    }

    pub fn fredholm_node_count(&self) -> usize {
        self.fredholm_nodes.len()
    }
}

fn volterra_nodes_for<T: Real>(
    term: &IntegralTerm<T>,
    colloc: &CollocationSet<T>,
    x: T,
) -> Result<Vec<(T, T)>> {
    volterra_nodes(term, colloc.volterra_rule(), x)
}

/// The four benchmark equations, each with its closed-form solution.
pub fn make_experiment<T: Real>(id: u32) -> Result<ProblemSpec<T>> {
    let c = T::lit;
    match id {
        1 => ProblemSpec::builder("experiment-1", move |x: T| {
            x.exp() - (c(3.0) * x).exp() / c(3.0) + c(1.0) / c(3.0)
        })
        .volterra(T::one(), |_, _| T::one(), |_, y| y.powi(3))
        .exact(|x: T| x.exp())
        .build(),
        // The kernel vanishes for s > x, so the fixed-interval integral is
        // evaluated as the equivalent integral over [0, x].
        2 => ProblemSpec::builder("experiment-2", |x: T| T::one() + x.sin().powi(2))
            .volterra(
                T::one(),
                move |x: T, s: T| c(-3.0) * (x - s).sin(),
                |_, y| y.powi(2),
            )
            .exact(|x: T| x.cos())
            .build(),
        3 => ProblemSpec::builder("experiment-3", move |x: T| {
            -x.powi(6) / c(30.0) + x.powi(4) / c(3.0) - x * x + c(5.0) * x / c(3.0)
                - c(5.0) / c(4.0)
        })
        .volterra(T::one(), |x: T, s: T| x - s, |_, y| y.powi(2))
        .fredholm(T::one(), |x: T, s: T| x + s, |_, y| y)
        .exact(move |x: T| x * x - c(2.0))
        .build(),
        4 => ProblemSpec::builder("experiment-4", move |x: T| {
            -x.powi(4) / c(10.0) + c(5.0) * x * x / c(6.0) + c(3.0) / c(8.0)
        })
        .volterra(T::one(), move |x: T, _| T::one() / (c(2.0) * x), |_, y| y.powi(2))
        .exact(move |x: T| x * x + c(0.5))
        .singular_at_origin()
        .build(),
        other => Err(Error::UnknownExperiment(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn colloc(n1: usize, n2: usize) -> CollocationSet<f64> {
        CollocationSet::new(vec![0.5], n1, n2).unwrap()
    }

    #[test]
    fn experiment_values() {
        let e1 = make_experiment::<f64>(1).unwrap();
        assert!((e1.forcing(0.0) - 1.0).abs() < 1e-15);
        let e3 = make_experiment::<f64>(3).unwrap();
        assert!((e3.exact(0.4).unwrap() - -1.84).abs() < 1e-15);
        let e4 = make_experiment::<f64>(4).unwrap();
        assert_eq!(e4.exact(1.0).unwrap(), 1.5);
        assert!(e4.singular_at_origin());
        assert!(matches!(
            make_experiment::<f64>(5),
            Err(Error::UnknownExperiment(5))
        ));
        assert_eq!(e3.xi1(), 1.0);
        assert_eq!(e3.xi2(), 1.0);
        assert_eq!(e1.xi2(), 0.0);
    }

    #[test]
    fn exact_solution_annihilates_residual() {
        let set = colloc(50, 50);
        let e1 = make_experiment::<f64>(1).unwrap();
        let r = residual_value(&e1, f64::exp, 0.5, &set).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
        let e3 = make_experiment::<f64>(3).unwrap();
        let r = residual_value(&e3, |x| x * x - 2.0, 0.7, &set).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }

    #[test]
    fn exact_residual_at_random_points() {
        let set = colloc(50, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for id in 1..=4 {
            let problem = make_experiment::<f64>(id).unwrap();
            let exact = problem.exact_fn().unwrap();
            for _ in 0..50 {
                let x: f64 = rng.gen_range(1e-8..=1.0);
                let r = residual_value(&problem, |s| exact(s), x, &set).unwrap();
                assert!(r.abs() < 1e-10, "experiment {id} x={x}: {r}");
            }
        }
    }

    #[test]
    fn scaling_fredholm_nodes_by_x_breaks_the_exact_solution() {
        // alternative reading with nodes (x/2)(t+1) on the Fredholm term
        let problem = make_experiment::<f64>(3).unwrap();
        let rule = QuadratureRule::<f64>::gauss_legendre(50).unwrap();
        let x = 0.7;
        let y = |s: f64| s * s - 2.0;
        let volterra: f64 = rule
            .map_volterra(x)
            .unwrap()
            .integrate(|s| (x - s) * y(s).powi(2));
        let alt_fredholm: f64 = rule.integrate(|t| {
            let s = x / 2.0 * (t + 1.0);
            (x + s) * y(s)
        }) / 2.0;
        let alt = -y(x) + problem.forcing(x) + volterra + alt_fredholm;
        assert!(alt.abs() > 1e-3);
    }

    #[test]
    fn zero_kernel_leaves_forcing_minus_surrogate() {
        let problem = ProblemSpec::<f64>::builder("zero", |x| x.sin())
            .volterra(1.0, |_, _| 0.0, |_, y| y.powi(2))
            .build()
            .unwrap();
        let set = colloc(8, 8);
        for x in [0.1, 0.5, 0.93] {
            let r = residual_value(&problem, |s| 3.0 * s + 1.0, x, &set).unwrap();
            assert_eq!(r, -(3.0 * x + 1.0) + x.sin());
        }
    }

    #[test]
    fn both_terms_disabled_is_rejected() {
        let built = ProblemSpec::<f64>::builder("none", |x| x)
            .volterra(0.0, |_, _| 1.0, |_, y| y)
            .fredholm(0.0, |_, _| 1.0, |_, y| y)
            .build();
        assert!(matches!(built, Err(Error::InvalidProblem(_))));
        let built = ProblemSpec::<f64>::builder("bad", |x| 1.0 / (x - 0.5))
            .volterra(1.0, |_, _| 1.0, |_, y| y)
            .build();
        assert!(built.is_err());
    }

    #[test]
    fn origin_handling() {
        let set = CollocationSet::new(vec![0.0], 10, 10).unwrap();
        // regular kernel: the Volterra term over [0, 0] vanishes
        let e1 = make_experiment::<f64>(1).unwrap();
        let r = residual_value(&e1, f64::exp, 0.0, &set).unwrap();
        assert!((r - (-1.0 + 1.0)).abs() < 1e-15);
        // singular kernel: x = 0 must be excluded
        let e4 = make_experiment::<f64>(4).unwrap();
        assert!(matches!(
            residual_value(&e4, |s| s * s + 0.5, 0.0, &set),
            Err(Error::SingularPoint(_))
        ));
        assert!(!e4.admits_collocation(5e-9));
        assert!(e4.admits_collocation(2e-8));
        assert!(ResidualPlan::new(&e4, &set).is_err());
        // folded kernel approaches y(0)^2/2 = 1/8 near the origin
        let x = 1e-6;
        let near = CollocationSet::new(vec![x], 10, 10).unwrap();
        let term = e4.volterra().unwrap();
        let volterra: f64 = volterra_nodes(term, near.volterra_rule(), x)
            .unwrap()
            .into_iter()
            .map(|(s, c)| c * (s * s + 0.5).powi(2))
            .sum();
        assert!((volterra - 0.125).abs() < 1e-9);
    }

    #[test]
    fn quadrature_order_convergence() {
        let problem = make_experiment::<f64>(1).unwrap();
        let mut previous = f64::INFINITY;
        for n1 in [2, 4, 8, 16] {
            let set = CollocationSet::new(vec![1.0], n1, 1).unwrap();
            let r = residual_value(&problem, f64::exp, 1.0, &set).unwrap().abs();
            assert!(r < previous || (r < 1e-14 && previous < 1e-14), "n1={n1}: {r}");
            previous = r;
        }
    }

    #[test]
    fn forcing_shift_shifts_residual() {
        let set = colloc(12, 12);
        let problem = make_experiment::<f64>(3).unwrap();
        let shifted = problem.with_shifted_forcing(|x| 0.25 * x.cos());
        let y = |s: f64| 0.3 * s - 1.0;
        for x in [0.05, 0.5, 0.99] {
            let a = residual_value(&problem, y, x, &set).unwrap();
            let b = residual_value(&shifted, y, x, &set).unwrap();
            assert!((b - a - 0.25 * x.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn plan_matches_pointwise_residual() {
        let points: Vec<f64> = (0..7).map(|i| 0.05 + i as f64 * 0.15).collect();
        let set = CollocationSet::new(points.clone(), 9, 6).unwrap();
        let y = |s: f64| (1.3 * s).sin() + 0.2;
        for id in 1..=4 {
            let problem = make_experiment::<f64>(id).unwrap();
            let plan = ResidualPlan::new(&problem, &set).unwrap();
            let tape = Tape::new();
            let eval: Vec<_> = plan.eval_points().iter().map(|&s| tape.var(y(s))).collect();
            let m = plan.len();
            let nv = plan.volterra_node_count();
            let rs = plan.residuals(0..m, &eval[..m], &eval[m..m + nv], &eval[m + nv..]);
            for (i, &x) in points.iter().enumerate() {
                let direct = residual_value(&problem, y, x, &set).unwrap();
                assert!((rs[i].value() - direct).abs() < 1e-14, "experiment {id}");
            }
            // a sub-range addresses its own Volterra block
            let span = plan.volterra_span(2..5);
            let sub = plan.residuals(2..5, &eval[2..5], &eval[m + span.start..m + span.end], &eval[m + nv..]);
            for k in 0..3 {
                assert_eq!(sub[k].value(), rs[2 + k].value());
            }
        }
    }

    #[test]
    fn collocation_validation() {
        assert!(CollocationSet::<f64>::new(vec![0.5, 0.2], 4, 4).is_err());
        assert!(CollocationSet::<f64>::new(vec![-0.1], 4, 4).is_err());
        assert!(CollocationSet::<f64>::new(vec![0.0, 1.0], 4, 4).is_ok());
    }
}
