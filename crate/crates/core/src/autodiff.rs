//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] is an append-only list of nodes. Each node stores the indices of
//! up to two operands together with the local partial derivative of the node
//! with respect to each of them. A [`Var`] is a value plus the position of its
//! node; constants carry no node and never receive an adjoint.
//!
//! ```
//! use ldnn::autodiff::Tape;
//!
//! let tape = Tape::<f64>::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! assert_eq!(tape.gradient(y, &[x]), vec![6.0]);
//! ```

use std::cell::{Cell, RefCell};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::legendre::legendre_with_derivative;
use crate::real::Real;

const NO_PARENT: usize = usize::MAX;

/// Primitive operations that can be recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowInt(i32),
    Exp,
    Sin,
    Cos,
    Tanh,
    /// `L_n` for a fixed degree `n`; the local partial is `L'_n`.
    Legendre(usize),
}

impl Op {
    fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node<T> {
    parents: [usize; 2],
    partials: [T; 2],
}

/// Append-only computation record. Single-threaded by construction.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    last_sweep_visits: Cell<usize>,
}

/// A value that is either recorded on a tape or a free-standing constant.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t, T> {
    value: T,
    slot: Option<(&'t Tape<T>, usize)>,
}

impl<'t, T: Real> Var<'t, T> {
    /// A constant; it has no tape entry and its adjoint is always zero.
    pub fn constant(value: T) -> Self {
        Self { value, slot: None }
    }

    pub fn value(&self) -> T {
        self.value
    }

    /// Tape position, `None` for constants.
    pub fn index(&self) -> Option<usize> {
        self.slot.map(|(_, index)| index)
    }

    pub fn is_constant(&self) -> bool {
        self.slot.is_none()
    }

    fn tape(&self) -> Option<&'t Tape<T>> {
        self.slot.map(|(tape, _)| tape)
    }

    fn unary(self, op: Op) -> Self {
        record_unchecked(op, &[self])
    }

    pub fn exp(self) -> Self {
        self.unary(Op::Exp)
    }

    pub fn sin(self) -> Self {
        self.unary(Op::Sin)
    }

    pub fn cos(self) -> Self {
        self.unary(Op::Cos)
    }

    pub fn tanh(self) -> Self {
        self.unary(Op::Tanh)
    }

    pub fn powi(self, exponent: i32) -> Self {
        self.unary(Op::PowInt(exponent))
    }

    pub fn square(self) -> Self {
        self.powi(2)
    }

    /// `L_degree(self)`.
    pub fn legendre(self, degree: usize) -> Self {
        self.unary(Op::Legendre(degree))
    }
}

/// Forward value and local partials of `op` at the given operand values.
fn evaluate<T: Real>(op: Op, a: T, b: T) -> Result<(T, [T; 2])> {
    let zero = T::zero();
    let one = T::one();
    Ok(match op {
        Op::Add => (a + b, [one, one]),
        Op::Sub => (a - b, [one, -one]),
        Op::Mul => (a * b, [b, a]),
        Op::Div => {
            if b == zero {
                return Err(Error::DivisionByZero);
            }
            let q = a / b;
            (q, [one / b, -q / b])
        }
        Op::Neg => (-a, [-one, zero]),
        Op::PowInt(n) => {
            let value = a.powi(n);
            let partial = match n {
                0 => zero,
                1 => one,
                _ => T::lit(n as f64) * a.powi(n - 1),
            };
            (value, [partial, zero])
        }
        Op::Exp => {
            let e = a.exp();
            (e, [e, zero])
        }
        Op::Sin => (a.sin(), [a.cos(), zero]),
        Op::Cos => (a.cos(), [-a.sin(), zero]),
        Op::Tanh => {
            let t = a.tanh_fast();
            (t, [one - t * t, zero])
        }
        Op::Legendre(n) => {
            let (value, slope) = legendre_with_derivative(n, a);
            (value, [slope, zero])
        }
    })
}

fn record_unchecked<'t, T: Real>(op: Op, operands: &[Var<'t, T>]) -> Var<'t, T> {
    match record_impl(op, operands) {
        Ok(var) => var,
        Err(err) => panic!("{op:?}: {err}"),
    }
}

fn record_impl<'t, T: Real>(op: Op, operands: &[Var<'t, T>]) -> Result<Var<'t, T>> {
    if operands.len() != op.arity() {
        return Err(Error::Shape(format!(
            "{op:?} takes {} operand(s), got {}",
            op.arity(),
            operands.len()
        )));
    }
    let mut tape: Option<&'t Tape<T>> = None;
    for operand in operands {
        if let Some(other) = operand.tape() {
            match tape {
                Some(existing) if !std::ptr::eq(existing, other) => {
                    return Err(Error::TapeMismatch)
                }
                _ => tape = Some(other),
            }
        }
    }
    let a = operands[0].value;
    let b = operands.get(1).map_or(T::zero(), |v| v.value);
    let (value, partials) = evaluate(op, a, b)?;
    let Some(tape) = tape else {
        return Ok(Var::constant(value));
    };

    let mut node = Node {
        parents: [NO_PARENT; 2],
        partials: [T::zero(); 2],
    };
    let mut filled = 0;
    for (operand, partial) in operands.iter().zip(partials) {
        if let Some(index) = operand.index() {
            node.parents[filled] = index;
            node.partials[filled] = partial;
            filled += 1;
        }
    }
    let index = tape.push(node);
    Ok(Var {
        value,
        slot: Some((tape, index)),
    })
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            last_sweep_visits: Cell::new(0),
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(capacity)),
            last_sweep_visits: Cell::new(0),
        }
    }

    fn push(&self, node: Node<T>) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    /// Records an independent variable.
    pub fn var(&self, value: T) -> Var<'_, T> {
        let index = self.push(Node {
            parents: [NO_PARENT; 2],
            partials: [T::zero(); 2],
        });
        Var {
            value,
            slot: Some((self, index)),
        }
    }

    /// Records `op` applied to `operands`.
    ///
    /// Fails on a zero denominator, on operands from different tapes and on
    /// an arity mismatch. Operations on constants only yield a constant.
    pub fn record<'t>(&'t self, op: Op, operands: &[Var<'t, T>]) -> Result<Var<'t, T>> {
        for operand in operands {
            if let Some(tape) = operand.tape() {
                if !std::ptr::eq(tape, self) {
                    return Err(Error::TapeMismatch);
                }
            }
        }
        record_impl(op, operands)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// `(operand index, local partial)` pairs stored for node `index`.
    pub fn local_partials(&self, index: usize) -> Vec<(usize, T)> {
        let nodes = self.nodes.borrow();
        let node = &nodes[index];
        node.parents
            .iter()
            .zip(node.partials)
            .filter(|(&p, _)| p != NO_PARENT)
            .map(|(&p, d)| (p, d))
            .collect()
    }

    /// Adjoints of every node up to and including `output`, from one reverse
    /// sweep seeded with `d output / d output = 1`.
    pub fn adjoints(&self, output: Var<'_, T>) -> Vec<T> {
        let Some(out) = output.index() else {
            self.last_sweep_visits.set(0);
            return vec![T::zero(); self.len()];
        };
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![T::zero(); nodes.len()];
        adjoint[out] = T::one();
        let mut visits = 0;
        for index in (0..=out).rev() {
            visits += 1;
            let bar = adjoint[index];
            if bar == T::zero() {
                continue;
            }
            let node = &nodes[index];
            for k in 0..2 {
                let parent = node.parents[k];
                if parent != NO_PARENT {
                    adjoint[parent] += bar * node.partials[k];
                }
            }
        }
        self.last_sweep_visits.set(visits);
        adjoint
    }

    /// Number of nodes visited by the most recent reverse sweep.
    pub fn last_sweep_visits(&self) -> usize {
        self.last_sweep_visits.get()
    }

    /// `∂output/∂input_i` for each input. Constant inputs get zero.
    pub fn gradient(&self, output: Var<'_, T>, inputs: &[Var<'_, T>]) -> Vec<T> {
        if let Some(tape) = output.tape() {
            assert!(std::ptr::eq(tape, self), "output recorded on another tape");
        }
        let adjoint = self.adjoints(output);
        inputs
            .iter()
            .map(|input| match input.slot {
                Some((tape, index)) => {
                    assert!(std::ptr::eq(tape, self), "input recorded on another tape");
                    adjoint[index]
                }
                None => T::zero(),
            })
            .collect()
    }
}

/// Maximum relative discrepancy between the tape gradient of `f` at `point`
/// and central differences with the given step:
/// `max_i |ad_i - fd_i| / (|fd_i| + 1e-12)`.
pub fn check_gradient<T, F>(f: F, point: &[T], step: T) -> T
where
    T: Real,
    F: for<'t> Fn(&'t Tape<T>, &[Var<'t, T>]) -> Var<'t, T>,
{
    let analytic = {
        let tape = Tape::new();
        let inputs: Vec<_> = point.iter().map(|&v| tape.var(v)).collect();
        let out = f(&tape, &inputs);
        tape.gradient(out, &inputs)
    };
    let eval = |values: &[T]| {
        let tape = Tape::new();
        let inputs: Vec<_> = values.iter().map(|&v| tape.var(v)).collect();
        f(&tape, &inputs).value()
    };

    let mut shifted = point.to_vec();
    let mut worst = T::zero();
    for i in 0..point.len() {
        shifted[i] = point[i] + step;
        let up = eval(&shifted);
        shifted[i] = point[i] - step;
        let down = eval(&shifted);
        shifted[i] = point[i];
        let fd = (up - down) / (step + step);
        let err = (analytic[i] - fd).abs() / (fd.abs() + T::lit(1e-12));
        if err > worst || err.is_nan() {
            worst = err;
        }
    }
    worst
}

macro_rules! binary_operator {
    ($trait:ident, $method:ident, $op:expr) => {
        impl<'t, T: Real> $trait for Var<'t, T> {
            type Output = Var<'t, T>;
            fn $method(self, rhs: Var<'t, T>) -> Var<'t, T> {
                record_unchecked($op, &[self, rhs])
            }
        }

        impl<'t, T: Real> $trait<T> for Var<'t, T> {
            type Output = Var<'t, T>;
            fn $method(self, rhs: T) -> Var<'t, T> {
                record_unchecked($op, &[self, Var::constant(rhs)])
            }
        }
    };
}

binary_operator!(Add, add, Op::Add);
binary_operator!(Sub, sub, Op::Sub);
binary_operator!(Mul, mul, Op::Mul);
binary_operator!(Div, div, Op::Div);

impl<'t, T: Real> Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Var<'t, T> {
        self.unary(Op::Neg)
    }
}

// scalar-on-the-left forms for the concrete precisions
macro_rules! scalar_lhs {
    ($t:ty) => {
        impl<'t> Add<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn add(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                Var::constant(self) + rhs
            }
        }
        impl<'t> Sub<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn sub(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                Var::constant(self) - rhs
            }
        }
        impl<'t> Mul<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn mul(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                Var::constant(self) * rhs
            }
        }
        impl<'t> Div<Var<'t, $t>> for $t {
            type Output = Var<'t, $t>;
            fn div(self, rhs: Var<'t, $t>) -> Var<'t, $t> {
                Var::constant(self) / rhs
            }
        }
    };
}

scalar_lhs!(f32);
scalar_lhs!(f64);
