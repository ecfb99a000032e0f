use super::matrix::{gemm, Matrix};
use super::rng::SeededRng;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Dense feed-forward network.
///
/// Layer `l` maps `x ↦ act(x · W_l + b_l)` with `W_l` stored as an
/// `in × out` matrix, so a batch is a matrix with one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    hidden: Activation,
    output: Activation,
    generation: u64,
}

/// Intermediate values of a forward pass, needed by [`Mlp::backward_batch`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    generation: u64,
    sizes: Vec<usize>,
    /// Input of each layer (the network input for layer 0).
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

impl MlpCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }
}

/// Parameter gradients, laid out exactly like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.data_mut().iter_mut().for_each(|x| *x *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Flat views in the same order as [`Mlp::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.data());
            out.push(b.as_slice());
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.data_mut());
            out.push(b.as_mut_slice());
        }
        out
    }

    pub fn all_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| *v == 0.0))
    }
}

impl Mlp {
    /// Fan-in scaled uniform initialisation `U(−1/√fan_in, 1/√fan_in)`, zero biases.
    pub fn new(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        for w in &mut net.weights {
            let bound = 1.0 / (w.rows() as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.uniform_range(-bound, bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output sizes, got {sizes:?}"
            )));
        }
        if let Some(bad) = sizes.iter().position(|s| *s == 0) {
            return Err(Error::Config(format!("layer {bad} has size 0 in {sizes:?}")));
        }
        let weights = sizes
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let biases = sizes[1..].iter().map(|n| vec![0.0; *n]).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            hidden,
            output,
            generation: 0,
        })
    }

    /// Rebuilds a network from explicit parameters.
    pub fn from_parts(
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        hidden: Activation,
        output: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::shape("Mlp::from_parts", weights.len(), biases.len()));
        }
        let mut sizes = vec![weights[0].rows()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.rows() != *sizes.last().unwrap() {
                return Err(Error::shape("Mlp::from_parts", *sizes.last().unwrap(), w.rows()));
            }
            if b.len() != w.cols() {
                return Err(Error::shape("Mlp::from_parts", w.cols(), b.len()));
            }
            sizes.push(w.cols());
        }
        Ok(Self {
            sizes,
            weights,
            biases,
            hidden,
            output,
            generation: 0,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn weights(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    /// Mutable access to one layer. Invalidates outstanding caches.
    pub fn layer_mut(&mut self, layer: usize) -> (&mut Matrix, &mut [f64]) {
        self.generation += 1;
        (&mut self.weights[layer], &mut self.biases[layer])
    }

    /// Flat parameter views: weights then biases, layer by layer.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.data());
            out.push(b.as_slice());
        }
        out
    }

    /// Mutable flat parameter views. Invalidates outstanding caches.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.data_mut());
            out.push(b.as_mut_slice());
        }
        out
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn affine(&self, layer: usize, x: &Matrix) -> Matrix {
        let w = &self.weights[layer];
        let b = &self.biases[layer];
        let mut z = Matrix::zeros(x.rows(), w.cols());
        for r in 0..x.rows() {
            z.row_mut(r).copy_from_slice(b);
        }
        gemm(false, x, false, w, 1.0, &mut z);
        z
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("mlp input", self.input_dim(), x.cols()));
        }
        Ok(())
    }

    /// Forward pass over a batch, keeping what backprop needs.
    pub fn forward_batch(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut a = x.clone();
        for l in 0..self.n_layers() {
            let z = self.affine(l, &a);
            let act = self.activation(l);
            let mut next = z.clone();
            if act != Activation::Identity {
                next.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            }
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((
            a,
            MlpCache {
                generation: self.generation,
                sizes: self.sizes.clone(),
                inputs,
                pre,
            },
        ))
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let (out, cache) = self.forward_batch(&Matrix::row_vector(input))?;
        Ok((out.into_data(), cache))
    }

    /// Forward pass without a cache.
    pub fn predict_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut a = self.affine(0, x);
        for l in 0..self.n_layers() {
            if l > 0 {
                a = self.affine(l, &a);
            }
            let act = self.activation(l);
            if act != Activation::Identity {
                a.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        Ok(a)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(&Matrix::row_vector(input))?.into_data())
    }

    /// Backprop over a batch. Parameter gradients are summed over rows.
    pub fn backward_batch(&self, cache: &MlpCache, grad_out: &Matrix) -> Result<(MlpGrads, Matrix)> {
        if cache.generation != self.generation || cache.sizes != self.sizes {
            return Err(Error::StaleCache);
        }
        if grad_out.cols() != self.output_dim() {
            return Err(Error::shape("mlp grad_output", self.output_dim(), grad_out.cols()));
        }
        if grad_out.rows() != cache.batch_size() {
            return Err(Error::shape("mlp grad_output rows", cache.batch_size(), grad_out.rows()));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = grad_out.clone();
        for l in (0..self.n_layers()).rev() {
            let act = self.activation(l);
            if act != Activation::Identity {
                for (d, z) in delta.data_mut().iter_mut().zip(cache.pre[l].data()) {
                    *d *= act.derivative(*z);
                }
            }
            gemm(true, &cache.inputs[l], false, &delta, 0.0, &mut grads.weights[l]);
            let gb = &mut grads.biases[l];
            for r in 0..delta.rows() {
                for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                    *g += d;
                }
            }
            let mut prev = Matrix::zeros(delta.rows(), self.sizes[l]);
            gemm(false, &delta, true, &self.weights[l], 0.0, &mut prev);
            delta = prev;
        }
        Ok((grads, delta))
    }

    pub fn backward(&self, cache: &MlpCache, grad_output: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let (g, dx) = self.backward_batch(cache, &Matrix::row_vector(grad_output))?;
        Ok((g, dx.into_data()))
    }
}

/// Copies every parameter of `src` into `dst`. Architectures must match.
pub fn copy_params(src: &Mlp, dst: &mut Mlp) -> Result<()> {
    if src.sizes != dst.sizes {
        let got = dst.param_count();
        return Err(Error::shape("copy_params", src.param_count(), got));
    }
    if src.hidden != dst.hidden || src.output != dst.output {
        return Err(Error::Config("copy_params: activation mismatch".into()));
    }
    dst.generation += 1;
    for (d, s) in dst.weights.iter_mut().zip(&src.weights) {
        d.data_mut().copy_from_slice(s.data());
    }
    for (d, s) in dst.biases.iter_mut().zip(&src.biases) {
        d.copy_from_slice(s);
    }
    Ok(())
}
