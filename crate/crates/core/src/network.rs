//! The solution surrogate: an M-layer feed-forward network whose first hidden
//! layer applies Legendre polynomials, one degree per neuron.
//!
//! ```text
//! H_0 = x
//! H_1 = L(W1 H_0 + b1)           neuron k applies L_{deg(k)}
//! H_i = tanh(W_i H_{i-1} + b_i)  2 <= i <= M-1
//! H_M = W_M H_{M-1} + b_M        affine output
//! ```
//!
//! Two evaluation routes exist. [`forward`] records every scalar operation on
//! a [`Tape`] and is used wherever the network is composed with other taped
//! expressions. [`DenseForward`] evaluates a whole batch with matrix products
//! and back-propagates by hand; the trainer uses it because a single cost
//! evaluation touches tens of thousands of input points.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::legendre::legendre_with_derivative;
use crate::real::Real;

/// Activation of the tanh-family hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh_fast(),
        }
    }

    /// Derivative expressed through the activation output.
    fn slope_from_output<T: Real>(self, h: T) -> T {
        match self {
            Activation::Tanh => T::one() - h * h,
        }
    }

    fn apply_var<'t, T: Real>(self, z: Var<'t, T>) -> Var<'t, T> {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }
}

/// What the first hidden layer does with its pre-activations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FirstLayer {
    /// Orthogonal layer: neuron `k` applies `L_{degrees[k]}`.
    Legendre { degrees: Vec<usize> },
    /// Plain hidden layer using the network's hidden activation.
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub first_layer: FirstLayer,
    pub hidden_activation: Activation,
    pub seed: u64,
}

impl NetworkConfig {
    /// LDNN with degrees `0..NL(1)` in the orthogonal layer.
    pub fn ldnn(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let width = layer_sizes.get(1).copied().unwrap_or(0);
        Self::with_degrees(layer_sizes, (0..width).collect(), seed)
    }

    pub fn with_degrees(layer_sizes: Vec<usize>, degrees: Vec<usize>, seed: u64) -> Result<Self> {
        let config = Self {
            layer_sizes,
            first_layer: FirstLayer::Legendre { degrees },
            hidden_activation: Activation::Tanh,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Same shapes with a tanh first layer instead of the orthogonal one.
    pub fn feedforward(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let config = Self {
            layer_sizes,
            first_layer: FirstLayer::Plain,
            hidden_activation: Activation::Tanh,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// The `[1, 10, 30, 20, 10, 1]` architecture used for every benchmark.
    pub fn benchmark(seed: u64) -> Self {
        Self::ldnn(vec![1, 10, 30, 20, 10, 1], seed).expect("valid architecture")
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 3 {
            return Err(Error::InvalidNetwork(format!(
                "need at least input, one hidden and output layer, got {sizes:?}"
            )));
        }
        if sizes[0] != 1 {
            return Err(Error::InvalidNetwork(format!(
                "input dimension must be 1, got {}",
                sizes[0]
            )));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidNetwork("output dimension must be 1".into()));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidNetwork(format!("empty layer in {sizes:?}")));
        }
        if let FirstLayer::Legendre { degrees } = &self.first_layer {
            if degrees.len() != sizes[1] {
                return Err(Error::InvalidNetwork(format!(
                    "{} Legendre degrees for a first hidden layer of width {}",
                    degrees.len(),
                    sizes[1]
                )));
            }
        }
        Ok(())
    }

    /// Number of weight matrices (`M`).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|pair| pair[0] * pair[1] + pair[1])
            .sum()
    }
}

/// Weights `W(i)` (shape `NL(i) × NL(i-1)`) and biases `b(i)`, `i = 1..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Real> ParameterSet<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let (weights, biases) = config
            .layer_sizes
            .windows(2)
            .map(|pair| (Array2::zeros((pair[1], pair[0])), Array1::zeros(pair[1])))
            .unzip();
        Self { weights, biases }
    }

    /// Glorot-normal weights (variance `2/(fan_in + fan_out)`), zero biases.
    pub fn init(config: &NetworkConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Self::zeros(config);
        for w in &mut params.weights {
            let (fan_out, fan_in) = w.dim();
            let std_dev = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, std_dev).expect("finite standard deviation");
            w.iter_mut()
                .for_each(|entry| *entry = T::lit(normal.sample(&mut rng)));
        }
        params
    }

    pub fn len(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat layout: `W(1)` row-major, `b(1)`, `W(2)`, `b(2)`, ...
    pub fn flatten(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        flat
    }

    pub fn from_flat(config: &NetworkConfig, flat: &[T]) -> Result<Self> {
        let mut params = Self::zeros(config);
        if flat.len() != params.len() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                params.len()
            )));
        }
        params.assign_flat(flat);
        Ok(params)
    }

    /// Overwrites every entry from the flat layout; lengths must agree.
    pub fn assign_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let mut values = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = values.next().unwrap());
            b.iter_mut().for_each(|v| *v = values.next().unwrap());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, config: &NetworkConfig) -> Result<()> {
        let layers = config.depth();
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::Shape(format!(
                "{} weight matrices for a {layers}-layer network",
                self.weights.len()
            )));
        }
        for (i, pair) in config.layer_sizes.windows(2).enumerate() {
            if self.weights[i].dim() != (pair[1], pair[0]) || self.biases[i].len() != pair[1] {
                return Err(Error::Shape(format!(
                    "layer {} expects W {}x{} and b {}",
                    i + 1,
                    pair[1],
                    pair[0],
                    pair[1]
                )));
            }
        }
        Ok(())
    }

    /// Writes the flat parameter list as CSV, preceded by a
    /// `layer_sizes,...` header line.
    pub fn write_csv<W: Write>(&self, config: &NetworkConfig, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let mut header = vec!["layer_sizes".to_string()];
        header.extend(config.layer_sizes.iter().map(|n| n.to_string()));
        out.write_record(&header)?;
        for value in self.flatten() {
            out.write_record([value.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads parameters written by [`ParameterSet::write_csv`]; the stored
    /// layer sizes must match `config`.
    pub fn read_csv<R: Read>(config: &NetworkConfig, reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = input.records();
        let header = records.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty parameter file".into(),
        })??;
        if header.get(0) != Some("layer_sizes") {
            return Err(Error::Parse {
                line: 1,
                message: "expected layer_sizes header".into(),
            });
        }
        let sizes = header
            .iter()
            .skip(1)
            .map(|field| field.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?;
        if sizes != config.layer_sizes {
            return Err(Error::Shape(format!(
                "file layer sizes {sizes:?} differ from {:?}",
                config.layer_sizes
            )));
        }
        let mut flat = Vec::new();
        for (offset, record) in records.enumerate() {
            let record = record?;
            let field = record.get(0).unwrap_or("").trim();
            flat.push(field.parse::<T>().map_err(|e| Error::Parse {
                line: offset + 2,
                message: e.to_string(),
            })?);
        }
        Self::from_flat(config, &flat)
    }
}

/// `init_params`: Glorot-normal initialization, deterministic in the seed.
pub fn init_params<T: Real>(config: &NetworkConfig) -> ParameterSet<T> {
    ParameterSet::init(config)
}

/// Parameters recorded as independent variables on a tape.
#[derive(Debug, Clone)]
pub struct TapedParams<'t, T> {
    weights: Vec<Vec<Vec<Var<'t, T>>>>,
    biases: Vec<Vec<Var<'t, T>>>,
    flat: Vec<Var<'t, T>>,
}

impl<'t, T: Real> TapedParams<'t, T> {
    pub fn record(params: &ParameterSet<T>, tape: &'t Tape<T>) -> Self {
        let mut flat = Vec::with_capacity(params.len());
        let mut weights = Vec::with_capacity(params.weights.len());
        let mut biases = Vec::with_capacity(params.biases.len());
        for (w, b) in params.weights.iter().zip(&params.biases) {
            let rows: Vec<Vec<_>> = w
                .rows()
                .into_iter()
                .map(|row| row.iter().map(|&v| tape.var(v)).collect())
                .collect();
            flat.extend(rows.iter().flatten().copied());
            let bias: Vec<_> = b.iter().map(|&v| tape.var(v)).collect();
            flat.extend(bias.iter().copied());
            weights.push(rows);
            biases.push(bias);
        }
        Self {
            weights,
            biases,
            flat,
        }
    }

    /// Reassembles taped parameters from variables in the flat order.
    pub fn from_vars(config: &NetworkConfig, vars: &[Var<'t, T>]) -> Result<Self> {
        if vars.len() != config.parameter_count() {
            return Err(Error::Shape(format!(
                "{} variables for {} parameters",
                vars.len(),
                config.parameter_count()
            )));
        }
        let mut it = vars.iter().copied();
        let mut weights = Vec::with_capacity(config.depth());
        let mut biases = Vec::with_capacity(config.depth());
        for pair in config.layer_sizes.windows(2) {
            let rows: Vec<Vec<_>> = (0..pair[1])
                .map(|_| it.by_ref().take(pair[0]).collect())
                .collect();
            weights.push(rows);
            biases.push(it.by_ref().take(pair[1]).collect());
        }
        Ok(Self {
            weights,
            biases,
            flat: vars.to_vec(),
        })
    }

    /// Tape variables in the flat parameter order.
    pub fn vars(&self) -> &[Var<'t, T>] {
        &self.flat
    }
}

fn affine<'t, T: Real>(
    weights: &[Vec<Var<'t, T>>],
    biases: &[Var<'t, T>],
    input: &[Var<'t, T>],
) -> Vec<Var<'t, T>> {
    weights
        .iter()
        .zip(biases)
        .map(|(row, &bias)| {
            row.iter()
                .zip(input)
                .fold(bias, |acc, (&w, &h)| acc + w * h)
        })
        .collect()
}

/// Taped forward pass at a single input.
pub fn forward<'t, T: Real>(
    config: &NetworkConfig,
    params: &TapedParams<'t, T>,
    x: Var<'t, T>,
) -> Result<Var<'t, T>> {
    if params.weights.len() != config.depth()
        || params.weights[0].len() != config.layer_sizes[1]
    {
        return Err(Error::Shape(
            "taped parameters do not match the network configuration".into(),
        ));
    }
    let layers = config.depth();
    let mut h = vec![x];
    for i in 0..layers {
        let z = affine(&params.weights[i], &params.biases[i], &h);
        h = if i + 1 == layers {
            z
        } else if i == 0 {
            match &config.first_layer {
                FirstLayer::Legendre { degrees } => z
                    .into_iter()
                    .zip(degrees)
                    .map(|(zk, &deg)| zk.legendre(deg))
                    .collect(),
                FirstLayer::Plain => z
                    .into_iter()
                    .map(|zk| config.hidden_activation.apply_var(zk))
                    .collect(),
            }
        } else {
            z.into_iter()
                .map(|zk| config.hidden_activation.apply_var(zk))
                .collect()
        };
    }
    Ok(h[0])
}

/// Independent taped forward passes, one per input (inputs enter as constants).
pub fn forward_batch<'t, T: Real>(
    config: &NetworkConfig,
    params: &TapedParams<'t, T>,
    xs: &[T],
) -> Result<Vec<Var<'t, T>>> {
    xs.iter()
        .map(|&x| forward(config, params, Var::constant(x)))
        .collect()
}

/// Intermediate state of a dense batch forward pass, kept for the backward
/// pass. Matrices are laid out `width × batch`.
#[derive(Debug, Clone)]
pub struct DenseForward<T> {
    inputs: Array2<T>,
    /// `H_1 .. H_{M-1}`
    hidden: Vec<Array2<T>>,
    /// `∂H_1/∂Z_1`, elementwise.
    first_slope: Array2<T>,
    outputs: Vec<T>,
}

impl<T: Real> DenseForward<T> {
    pub fn run(config: &NetworkConfig, params: &ParameterSet<T>, xs: &[T]) -> Result<Self> {
        params.check_shapes(config)?;
        let inputs = Array2::from_shape_vec((1, xs.len()), xs.to_vec())
            .expect("row vector shape");
        let layers = config.depth();
        let mut hidden = Vec::with_capacity(layers - 1);
        let mut first_slope = Array2::zeros((0, 0));
        let mut outputs = Vec::new();
        for i in 0..layers {
            let below = if i == 0 { &inputs } else { &hidden[i - 1] };
            let mut z = params.weights[i].dot(below);
            z += &params.biases[i].view().insert_axis(Axis(1));
            if i + 1 == layers {
                outputs = z.into_raw_vec_and_offset().0;
                break;
            }
            if i == 0 {
                match &config.first_layer {
                    FirstLayer::Legendre { degrees } => {
                        let mut slope = Array2::zeros(z.dim());
                        for ((mut z_row, mut s_row), &deg) in z
                            .rows_mut()
                            .into_iter()
                            .zip(slope.rows_mut())
                            .zip(degrees)
                        {
                            for (zv, sv) in z_row.iter_mut().zip(s_row.iter_mut()) {
                                let (value, d) = legendre_with_derivative(deg, *zv);
                                *zv = value;
                                *sv = d;
                            }
                        }
                        first_slope = slope;
                    }
                    FirstLayer::Plain => {
                        let act = config.hidden_activation;
                        z.mapv_inplace(|v| act.apply(v));
                        first_slope = z.mapv(|h| act.slope_from_output(h));
                    }
                }
            } else {
                let act = config.hidden_activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            hidden.push(z);
        }
        Ok(Self {
            inputs,
            hidden,
            first_slope,
            outputs,
        })
    }

    pub fn outputs(&self) -> &[T] {
        &self.outputs
    }

    /// Gradient of `Σ_b d_out[b] · y(x_b)` with respect to the flat parameters.
    pub fn backward(
        &self,
        config: &NetworkConfig,
        params: &ParameterSet<T>,
        d_out: &[T],
    ) -> Vec<T> {
        assert_eq!(d_out.len(), self.outputs.len(), "adjoint length");
        let layers = config.depth();
        let mut grad_w: Vec<Array2<T>> = Vec::with_capacity(layers);
        let mut grad_b: Vec<Array1<T>> = Vec::with_capacity(layers);
        let mut delta = Array2::from_shape_vec((1, d_out.len()), d_out.to_vec())
            .expect("row vector shape");
        for i in (0..layers).rev() {
            if i + 1 != layers {
                if i == 0 {
                    delta *= &self.first_slope;
                } else {
                    let act = config.hidden_activation;
                    ndarray::Zip::from(&mut delta)
                        .and(&self.hidden[i])
                        .for_each(|d, &h| *d = *d * act.slope_from_output(h));
                }
            }
            let below = if i == 0 { &self.inputs } else { &self.hidden[i - 1] };
            grad_w.push(delta.dot(&below.t()));
            grad_b.push(delta.sum_axis(Axis(1)));
            if i > 0 {
                delta = params.weights[i].t().dot(&delta);
            }
        }
        grad_w.reverse();
        grad_b.reverse();
        let mut flat = Vec::with_capacity(params.len());
        for (w, b) in grad_w.iter().zip(&grad_b) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        flat
    }
}

/// Plain-value network output at each input.
pub fn predict<T: Real>(config: &NetworkConfig, params: &ParameterSet<T>, xs: &[T]) -> Result<Vec<T>> {
    Ok(DenseForward::run(config, params, xs)?.outputs)
}
