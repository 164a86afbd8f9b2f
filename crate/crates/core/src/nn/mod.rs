//! Fully connected sigmoid network with a regularized cross-entropy cost.
//!
//! Parameters live in one flat vector. Layer `l` occupies an
//! `n_out × (n_in + 1)` row-major block, bias column first, and blocks are
//! laid out in layer order. For the canonical 400-25-10 shape that is
//! `25·401 + 10·26 = 10,285` values.

mod check;
mod model_file;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

pub use check::{gradient_check, max_relative_error, random_instance, GradCheck};
pub use model_file::{read_model, write_model};

/// Lower clamp applied to the arguments of both logarithms in the cost.
pub const LOG_FLOOR: f64 = 1e-12;

/// Layer sizes, input first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkShape(Vec<usize>);

impl NetworkShape {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config(format!(
                "network needs at least two layers, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::config(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(NetworkShape(layer_sizes))
    }

    /// The 400-25-10 digit classifier.
    pub fn canonical() -> Self {
        NetworkShape(vec![crate::PIXELS, 25, crate::CLASSES])
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn inputs(&self) -> usize {
        self.0[0]
    }

    pub fn outputs(&self) -> usize {
        *self.0.last().unwrap()
    }

    /// Number of weight matrices.
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    /// `(n_in, n_out)` for every weight matrix.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(n_in, n_out)| (n_in + 1) * n_out).sum()
    }

    /// Start offset of each layer's block in the flat vector.
    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers()
            .map(|(n_in, n_out)| {
                let off = acc;
                acc += (n_in + 1) * n_out;
                off
            })
            .collect()
    }
}

impl std::fmt::Display for NetworkShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// Flat weight vector tied to the shape it parameterizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    shape: NetworkShape,
    theta: Vec<f64>,
}

impl ParamVector {
    pub fn new(shape: NetworkShape, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != shape.param_count() {
            return Err(Error::config(format!(
                "shape {shape} needs {} parameters, got {}",
                shape.param_count(),
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "parameter {i} is not finite ({})",
                theta[i]
            )));
        }
        Ok(ParamVector { shape, theta })
    }

    pub fn zeros(shape: NetworkShape) -> Self {
        let theta = vec![0.0; shape.param_count()];
        ParamVector { shape, theta }
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `n_out × (n_in + 1)` view of layer `l`, bias column first.
    pub fn layer(&self, l: usize) -> ArrayView2<'_, f64> {
        layer_view(&self.shape, &self.theta, l)
    }

    /// Short content hash used to tag artifacts derived from these weights.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for s in self.shape.layer_sizes() {
            hasher.update((*s as u64).to_le_bytes());
        }
        for v in &self.theta {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn check_input_width(&self, width: usize) -> Result<()> {
        if width != self.shape.inputs() {
            return Err(Error::config(format!(
                "input has {width} features, network {} expects {}",
                self.shape,
                self.shape.inputs()
            )));
        }
        Ok(())
    }
}

fn layer_view<'a>(shape: &NetworkShape, theta: &'a [f64], l: usize) -> ArrayView2<'a, f64> {
    let (n_in, n_out) = shape.layers().nth(l).expect("layer index in range");
    let off = shape.offsets()[l];
    ArrayView2::from_shape((n_out, n_in + 1), &theta[off..off + n_out * (n_in + 1)])
        .expect("block length matches layer shape")
}

fn layer_view_mut<'a>(
    shape: &NetworkShape,
    theta: &'a mut [f64],
    l: usize,
) -> ArrayViewMut2<'a, f64> {
    let (n_in, n_out) = shape.layers().nth(l).expect("layer index in range");
    let off = shape.offsets()[l];
    ArrayViewMut2::from_shape((n_out, n_in + 1), &mut theta[off..off + n_out * (n_in + 1)])
        .expect("block length matches layer shape")
}

/// Uniform `[-ε, ε]` weights per layer with `ε = sqrt(6 / (fan_in + fan_out))`.
pub fn init_params(shape: &NetworkShape, seed: u64) -> ParamVector {
    let mut rng = seed::rng(seed);
    let mut theta = Vec::with_capacity(shape.param_count());
    for (n_in, n_out) in shape.layers() {
        let eps = (6.0 / (n_in + n_out) as f64).sqrt();
        theta.extend((0..(n_in + 1) * n_out).map(|_| rng.random_range(-eps..=eps)));
    }
    ParamVector {
        shape: shape.clone(),
        theta,
    }
}

/// Logistic function, split by sign so neither branch overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A set of input rows with aligned target rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Array2<f64>,
    targets: Array2<f64>,
}

impl Batch {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::config(format!(
                "{} input rows but {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::config("batch is empty"));
        }
        Ok(Batch { inputs, targets })
    }

    pub fn single(input: &[f64], target: &[f64]) -> Result<Self> {
        Batch::new(
            Array2::from_shape_vec((1, input.len()), input.to_vec()).unwrap(),
            Array2::from_shape_vec((1, target.len()), target.to_vec()).unwrap(),
        )
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// `(input, target)` for row `i`.
    pub fn row(&self, i: usize) -> (ArrayView1<'_, f64>, ArrayView1<'_, f64>) {
        (self.inputs.row(i), self.targets.row(i))
    }

    fn check(&self, params: &ParamVector) -> Result<()> {
        params.check_input_width(self.inputs.ncols())?;
        if self.targets.ncols() != params.shape.outputs() {
            return Err(Error::config(format!(
                "targets have {} columns, network {} has {} outputs",
                self.targets.ncols(),
                params.shape,
                params.shape.outputs()
            )));
        }
        Ok(())
    }
}

/// Squared-weight penalty settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub lambda: f64,
    /// Whether bias columns are included in the penalty sum.
    pub regularize_bias: bool,
}

impl Penalty {
    pub fn new(lambda: f64) -> Self {
        Penalty {
            lambda,
            regularize_bias: true,
        }
    }

    pub fn none() -> Self {
        Penalty::new(0.0)
    }

    pub fn with_bias(mut self, regularize_bias: bool) -> Self {
        self.regularize_bias = regularize_bias;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn sum_of_squares(&self, params: &ParamVector) -> f64 {
        if self.regularize_bias {
            return params.theta.iter().map(|v| v * v).sum();
        }
        (0..params.shape.depth())
            .map(|l| {
                params
                    .layer(l)
                    .slice(s![.., 1..])
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum()
    }
}

impl From<f64> for Penalty {
    fn from(lambda: f64) -> Self {
        Penalty::new(lambda)
    }
}

/// Pre-activations and activations of one sample, hidden layers and output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Array1<f64>>,
    pub activations: Vec<Array1<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> ArrayView1<'_, f64> {
        self.activations.last().unwrap().view()
    }
}

pub fn forward(params: &ParamVector, pixels: &[f64]) -> Result<ForwardTrace> {
    params.check_input_width(pixels.len())?;
    let mut pre_activations = Vec::with_capacity(params.shape.depth());
    let mut activations: Vec<Array1<f64>> = Vec::with_capacity(params.shape.depth());
    let input = ArrayView1::from(pixels);
    for l in 0..params.shape.depth() {
        let theta = params.layer(l);
        let prev = activations.last().map_or(input, |a| a.view());
        let z = theta.slice(s![.., 1..]).dot(&prev) + theta.column(0);
        activations.push(z.mapv(sigmoid));
        pre_activations.push(z);
    }
    Ok(ForwardTrace {
        pre_activations,
        activations,
    })
}

/// Batched forward pass keeping pre-activations (needed for the stable
/// `1 - σ(z) = σ(-z)` in the cost) and activations of every layer.
struct BatchTrace {
    pre_activations: Vec<Array2<f64>>,
    activations: Vec<Array2<f64>>,
}

fn forward_batch(params: &ParamVector, inputs: ArrayView2<'_, f64>) -> BatchTrace {
    let depth = params.shape.depth();
    let mut pre_activations = Vec::with_capacity(depth);
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(depth);
    for l in 0..depth {
        let theta = params.layer(l);
        let prev = activations.last().map_or(inputs, |a| a.view());
        let mut z = prev.dot(&theta.slice(s![.., 1..]).t());
        z += &theta.column(0);
        activations.push(z.mapv(sigmoid));
        pre_activations.push(z);
    }
    BatchTrace {
        pre_activations,
        activations,
    }
}

/// Output activations for every row of `inputs`.
pub fn outputs(params: &ParamVector, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    params.check_input_width(inputs.ncols())?;
    Ok(forward_batch(params, inputs).activations.pop().unwrap())
}

fn data_term(trace: &BatchTrace, targets: ArrayView2<'_, f64>) -> f64 {
    let z = trace.pre_activations.last().unwrap();
    let h = trace.activations.last().unwrap();
    let mut total = 0.0;
    for ((&y, &h), &z) in targets.iter().zip(h.iter()).zip(z.iter()) {
        let one_minus_h = sigmoid(-z);
        total -= y * h.max(LOG_FLOOR).ln() + (1.0 - y) * one_minus_h.max(LOG_FLOOR).ln();
    }
    total
}

/// Unregularized cost of every row on its own (`m = 1`, `λ = 0`).
pub fn per_sample_cost(params: &ParamVector, batch: &Batch) -> Result<Vec<f64>> {
    batch.check(params)?;
    let trace = forward_batch(params, batch.inputs());
    let z = trace.pre_activations.last().unwrap();
    let h = trace.activations.last().unwrap();
    Ok((0..batch.len())
        .map(|i| {
            let (h, z, y) = (h.row(i), z.row(i), batch.targets.row(i));
            let mut c = 0.0;
            for k in 0..y.len() {
                c -= y[k] * h[k].max(LOG_FLOOR).ln()
                    + (1.0 - y[k]) * sigmoid(-z[k]).max(LOG_FLOOR).ln();
            }
            c
        })
        .collect())
}

/// Predicted class of every row and the mean unregularized cost, from one
/// forward pass.
pub fn predict_and_cost(params: &ParamVector, batch: &Batch) -> Result<(Vec<usize>, f64)> {
    batch.check(params)?;
    let trace = forward_batch(params, batch.inputs());
    let h = trace.activations.last().unwrap();
    let predictions = h
        .rows()
        .into_iter()
        .map(|row| argmax(row.iter().copied()))
        .collect();
    Ok((predictions, data_term(&trace, batch.targets()) / batch.len() as f64))
}

/// Mean cross-entropy over the batch plus `λ/(2m)·Σθ²`.
pub fn cost(params: &ParamVector, batch: &Batch, penalty: impl Into<Penalty>) -> Result<f64> {
    let penalty = penalty.into();
    penalty.validate()?;
    batch.check(params)?;
    let m = batch.len() as f64;
    let trace = forward_batch(params, batch.inputs());
    Ok(data_term(&trace, batch.targets()) / m
        + penalty.lambda / (2.0 * m) * penalty.sum_of_squares(params))
}

/// Gradient of [`cost`] by backpropagation.
pub fn gradient(params: &ParamVector, batch: &Batch, penalty: impl Into<Penalty>) -> Result<Vec<f64>> {
    cost_and_gradient(params, batch, penalty).map(|(_, g)| g)
}

/// Cost and gradient from one shared forward pass.
pub fn cost_and_gradient(
    params: &ParamVector,
    batch: &Batch,
    penalty: impl Into<Penalty>,
) -> Result<(f64, Vec<f64>)> {
    let penalty = penalty.into();
    penalty.validate()?;
    batch.check(params)?;
    let shape = &params.shape;
    let m = batch.len() as f64;
    let trace = forward_batch(params, batch.inputs());
    let cost = data_term(&trace, batch.targets()) / m
        + penalty.lambda / (2.0 * m) * penalty.sum_of_squares(params);

    let mut grad = vec![0.0; params.len()];
    // Output error: h - y.
    let mut delta = trace.activations.last().unwrap() - &batch.targets();
    for l in (0..shape.depth()).rev() {
        let prev = if l == 0 {
            batch.inputs()
        } else {
            trace.activations[l - 1].view()
        };
        {
            let mut block = layer_view_mut(shape, &mut grad, l);
            block.column_mut(0).assign(&(delta.sum_axis(Axis(0)) / m));
            block
                .slice_mut(s![.., 1..])
                .assign(&(delta.t().dot(&prev) / m));
        }
        if l > 0 {
            let weights = params.layer(l);
            let mut back = delta.dot(&weights.slice(s![.., 1..]));
            // σ'(z) = σ(z)(1 - σ(z)), written in terms of the stored activation.
            back.zip_mut_with(&prev, |d, &a| *d *= a * (1.0 - a));
            delta = back;
        }
    }

    if penalty.lambda > 0.0 {
        let scale = penalty.lambda / m;
        if penalty.regularize_bias {
            for (g, t) in grad.iter_mut().zip(&params.theta) {
                *g += scale * t;
            }
        } else {
            for l in 0..shape.depth() {
                let theta = params.layer(l);
                let mut block = layer_view_mut(shape, &mut grad, l);
                block
                    .slice_mut(s![.., 1..])
                    .scaled_add(scale, &theta.slice(s![.., 1..]));
            }
        }
    }
    Ok((cost, grad))
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

pub fn predict(params: &ParamVector, pixels: &[f64]) -> Result<usize> {
    let trace = forward(params, pixels)?;
    Ok(argmax(trace.output().iter().copied()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::LN_2;

    fn tiny_batch() -> Batch {
        Batch::new(
            array![[0.1, 0.9, 0.3, 0.0], [1.0, 0.0, 0.5, 0.25]],
            array![[1.0, 0.0], [0.3, 0.7]],
        )
        .unwrap()
    }

    #[test]
    fn canonical_param_count() {
        assert_eq!(NetworkShape::canonical().param_count(), 10_285);
        assert_eq!(NetworkShape::new(vec![2, 2, 1]).unwrap().param_count(), 9);
        assert_eq!(NetworkShape::new(vec![4, 3, 2]).unwrap().param_count(), 23);
    }

    #[test]
    fn shape_rejects_degenerate() {
        assert!(NetworkShape::new(vec![4]).is_err());
        assert!(NetworkShape::new(vec![4, 0, 2]).is_err());
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        for x in [0.3, 2.0, 17.5, 40.0, 700.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }
        assert!(sigmoid(-700.0) > 0.0);
        assert!(sigmoid(700.0).is_finite());
    }

    #[test]
    fn zero_params_forward() {
        let p = ParamVector::zeros(NetworkShape::canonical());
        let trace = forward(&p, &[0.3; 400]).unwrap();
        assert_eq!(trace.activations[0].len(), 25);
        assert_eq!(trace.activations[1].len(), 10);
        assert!(trace.activations.iter().flatten().all(|&a| a == 0.5));
        assert_eq!(predict(&p, &[0.7; 400]).unwrap(), 0);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = ParamVector::zeros(NetworkShape::canonical());
        assert!(matches!(forward(&p, &[0.0; 399]), Err(Error::Config(_))));
    }

    #[test]
    fn zero_params_cost_anchor() {
        let shape = NetworkShape::new(vec![4, 3, 2]).unwrap();
        let p = ParamVector::zeros(shape);
        for lambda in [0.0, 1.0, 10.0] {
            let c = cost(&p, &tiny_batch(), lambda).unwrap();
            assert!((c - 2.0 * LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_params_output_delta() {
        // With h = 0.5 everywhere the bias gradient of the output layer is h - y.
        let shape = NetworkShape::new(vec![4, 3, 10]).unwrap();
        let p = ParamVector::zeros(shape.clone());
        let mut y = [0.0; 10];
        y[3] = 1.0;
        let batch = Batch::single(&[0.2, 0.4, 0.6, 0.8], &y).unwrap();
        let g = gradient(&p, &batch, 0.0).unwrap();
        let out = layer_view(&shape, &g, 1);
        for k in 0..10 {
            let expected = if k == 3 { -0.5 } else { 0.5 };
            assert_eq!(out[[k, 0]], expected);
        }
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let shape = NetworkShape::new(vec![4, 3, 2]).unwrap();
        let p = init_params(&shape, 3);
        let b = tiny_batch();
        let doubled = Batch::new(
            ndarray::concatenate![Axis(0), b.inputs(), b.inputs()],
            ndarray::concatenate![Axis(0), b.targets(), b.targets()],
        )
        .unwrap();
        let g1 = gradient(&p, &b, 0.0).unwrap();
        let g2 = gradient(&p, &doubled, 0.0).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        let p = ParamVector::zeros(NetworkShape::new(vec![4, 3, 2]).unwrap());
        assert!(matches!(cost(&p, &tiny_batch(), -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn bias_exclusion_changes_penalty_only() {
        let shape = NetworkShape::new(vec![4, 3, 2]).unwrap();
        let p = init_params(&shape, 11);
        let with = cost(&p, &tiny_batch(), Penalty::new(2.0)).unwrap();
        let without = cost(&p, &tiny_batch(), Penalty::new(2.0).with_bias(false)).unwrap();
        let bare = cost(&p, &tiny_batch(), 0.0).unwrap();
        let bias_sq: f64 = (0..2).map(|l| p.layer(l).column(0).iter().map(|v| v * v).sum::<f64>()).sum();
        assert!((with - without - 2.0 / 4.0 * bias_sq).abs() < 1e-12);
        assert!(without > bare);
    }

    #[test]
    fn init_is_bounded_and_deterministic() {
        let shape = NetworkShape::canonical();
        let a = init_params(&shape, 42);
        assert_eq!(a.len(), 10_285);
        assert_eq!(a, init_params(&shape, 42));
        assert_ne!(a, init_params(&shape, 43));
        let eps1 = (6.0f64 / 425.0).sqrt();
        assert!(a.layer(0).iter().all(|v| v.abs() <= eps1));
    }

    #[test]
    fn argmax_lowest_index_on_ties() {
        assert_eq!(argmax([0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax([0.1, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.3]), 7);
        assert_eq!(argmax([0.1, 0.9, 0.9]), 1);
    }

    #[test]
    fn param_vector_rejects_bad_length() {
        let shape = NetworkShape::new(vec![2, 2, 1]).unwrap();
        assert!(ParamVector::new(shape.clone(), vec![0.0; 8]).is_err());
        assert!(ParamVector::new(shape.clone(), vec![f64::NAN; 9]).is_err());
        assert!(ParamVector::new(shape, vec![0.0; 9]).is_ok());
    }
}
