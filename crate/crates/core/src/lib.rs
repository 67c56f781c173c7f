//! Legendre deep neural networks for nonlinear Volterra–Fredholm–Hammerstein
//! integral equations.
//!
//! The surrogate `y(x)` is a feed-forward network whose first hidden layer
//! applies Legendre polynomials; training minimizes the data misfit plus the
//! quadrature-discretized equation residual. Everything numeric is generic
//! over [`Real`] (`f32` or `f64`); the aliases below fix the precision.

pub mod autodiff;
pub mod bench;
pub mod error;
pub mod legendre;
pub mod network;
pub mod problem;
pub mod real;
pub mod training;

pub use error::{Error, Result};
pub use real::Real;

pub type QuadratureRule64 = legendre::QuadratureRule<f64>;
pub type QuadratureRule32 = legendre::QuadratureRule<f32>;
pub type Tape64 = autodiff::Tape<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type ParameterSet64 = network::ParameterSet<f64>;
pub type ParameterSet32 = network::ParameterSet<f32>;
pub type ProblemSpec64 = problem::ProblemSpec<f64>;
pub type ProblemSpec32 = problem::ProblemSpec<f32>;
pub type TrainState64 = training::TrainState<f64>;
pub type TrainState32 = training::TrainState<f32>;
pub type ExperimentReport64 = bench::ExperimentReport<f64>;
pub type ExperimentReport32 = bench::ExperimentReport<f32>;
