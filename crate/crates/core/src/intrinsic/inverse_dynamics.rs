use crate::error::{Error, Result};
use crate::numkit::{Activation, Matrix, Mlp, MlpGrads, OptimizerKind, OptimizerState, SeededRng};

/// Embedding network ψ trained through an inverse dynamics objective.
///
/// The head sees `[ψ(o_t), ψ(o_{t+1})]` and emits one block of logits per
/// action factor; the loss is the sum of the per-factor cross-entropies.
/// A joint action over `n` agents is therefore predicted with `n` softmax
/// heads instead of one head over `|A|ⁿ` joint actions.
#[derive(Debug, Clone)]
pub struct InverseDynamicsModel {
    embedder: Mlp,
    head: Mlp,
    action_sizes: Vec<usize>,
    opt: OptimizerState,
    lr: f64,
}

/// A batch of `(o_t, a_t, o_{t+1})` transitions, one row per transition.
#[derive(Debug, Clone)]
pub struct TransitionBatch<'a> {
    pub obs: &'a Matrix,
    pub actions: &'a [Vec<usize>],
    pub next_obs: &'a Matrix,
}

impl InverseDynamicsModel {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        encoding_dim: usize,
        action_sizes: &[usize],
        lr: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if action_sizes.is_empty() || action_sizes.contains(&0) {
            return Err(Error::Config(format!("invalid action sizes {action_sizes:?}")));
        }
        let embedder = Mlp::new(
            &[input_dim, hidden_dim, hidden_dim, encoding_dim],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let head = Mlp::new(
            &[2 * encoding_dim, hidden_dim, action_sizes.iter().sum()],
            Activation::Relu,
            Activation::Identity,
            rng,
        )?;
        let mut params = embedder.param_slices();
        params.extend(head.param_slices());
        let opt = OptimizerState::for_params(OptimizerKind::adam(), &params);
        Ok(Self {
            embedder,
            head,
            action_sizes: action_sizes.to_vec(),
            opt,
            lr,
        })
    }

    pub fn embedder(&self) -> &Mlp {
        &self.embedder
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    pub fn action_sizes(&self) -> &[usize] {
        &self.action_sizes
    }

    pub fn encoding_dim(&self) -> usize {
        self.embedder.output_dim()
    }

    pub fn embed(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.embedder.predict(obs)
    }

    fn check(&self, batch: &TransitionBatch<'_>) -> Result<()> {
        let n = batch.obs.rows();
        if n == 0 {
            return Err(Error::Domain("inverse dynamics batch is empty".into()));
        }
        if batch.next_obs.rows() != n || batch.actions.len() != n {
            return Err(Error::shape("inverse dynamics batch", n, batch.actions.len()));
        }
        for a in batch.actions {
            if a.len() != self.action_sizes.len() {
                return Err(Error::shape("inverse dynamics action", self.action_sizes.len(), a.len()));
            }
            for (ai, size) in a.iter().zip(&self.action_sizes) {
                if ai >= size {
                    return Err(Error::Domain(format!("action {ai} outside 0..{size}")));
                }
            }
        }
        Ok(())
    }

    /// Mean summed cross-entropy, and optionally its gradient w.r.t. the logits.
    fn cross_entropy(&self, logits: &Matrix, actions: &[Vec<usize>], want_grad: bool) -> (f64, Option<Matrix>) {
        let n = logits.rows();
        let mut loss = 0.0;
        let mut grad = want_grad.then(|| Matrix::zeros(n, logits.cols()));
        for r in 0..n {
            let row = logits.row(r);
            let mut off = 0;
            for (k, size) in self.action_sizes.iter().enumerate() {
                let block = &row[off..off + size];
                let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = block.iter().map(|z| (z - max).exp()).sum();
                let log_z = max + sum.ln();
                let target = actions[r][k];
                loss += log_z - block[target];
                if let Some(g) = grad.as_mut() {
                    let grow = &mut g.row_mut(r)[off..off + size];
                    for (j, (gz, z)) in grow.iter_mut().zip(block).enumerate() {
                        let p = (z - log_z).exp();
                        *gz = (p - if j == target { 1.0 } else { 0.0 }) / n as f64;
                    }
                }
                off += size;
            }
        }
        (loss / n as f64, grad)
    }

    fn head_input(e_t: &Matrix, e_n: &Matrix) -> Matrix {
        let d = e_t.cols();
        let mut h = Matrix::zeros(e_t.rows(), 2 * d);
        for r in 0..e_t.rows() {
            let row = h.row_mut(r);
            row[..d].copy_from_slice(e_t.row(r));
            row[d..].copy_from_slice(e_n.row(r));
        }
        h
    }

    /// Loss without updating anything.
    pub fn loss(&self, batch: &TransitionBatch<'_>) -> Result<f64> {
        self.check(batch)?;
        let e_t = self.embedder.predict_batch(batch.obs)?;
        let e_n = self.embedder.predict_batch(batch.next_obs)?;
        let logits = self.head.predict_batch(&Self::head_input(&e_t, &e_n))?;
        Ok(self.cross_entropy(&logits, batch.actions, false).0)
    }

    /// Loss and gradients for the embedder and head, without a step.
    pub fn loss_and_grads(&self, batch: &TransitionBatch<'_>) -> Result<(f64, MlpGrads, MlpGrads)> {
        self.check(batch)?;
        let (e_t, cache_t) = self.embedder.forward_batch(batch.obs)?;
        let (e_n, cache_n) = self.embedder.forward_batch(batch.next_obs)?;
        let (logits, head_cache) = self.head.forward_batch(&Self::head_input(&e_t, &e_n))?;
        let (loss, grad) = self.cross_entropy(&logits, batch.actions, true);
        if !loss.is_finite() {
            return Err(Error::NonFinite("inverse dynamics loss".into()));
        }
        let (head_grads, d_in) = self.head.backward_batch(&head_cache, &grad.expect("requested"))?;
        let d = e_t.cols();
        let mut d_t = Matrix::zeros(d_in.rows(), d);
        let mut d_n = Matrix::zeros(d_in.rows(), d);
        for r in 0..d_in.rows() {
            d_t.row_mut(r).copy_from_slice(&d_in.row(r)[..d]);
            d_n.row_mut(r).copy_from_slice(&d_in.row(r)[d..]);
        }
        let (mut emb_grads, _) = self.embedder.backward_batch(&cache_t, &d_t)?;
        let (g_n, _) = self.embedder.backward_batch(&cache_n, &d_n)?;
        emb_grads.add_assign(&g_n);
        Ok((loss, emb_grads, head_grads))
    }

    /// One cross-entropy step through the head and ψ. Returns the loss before the step.
    pub fn train(&mut self, batch: &TransitionBatch<'_>) -> Result<f64> {
        let (loss, emb_grads, head_grads) = self.loss_and_grads(batch)?;
        let mut grads = emb_grads.slices();
        grads.extend(head_grads.slices());
        let mut params = self.embedder.param_slices_mut();
        params.extend(self.head.param_slices_mut());
        self.opt.step(&mut params, &grads, self.lr)?;
        Ok(loss)
    }

    /// Mutable parameter views, for gradient checks.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut params = self.embedder.param_slices_mut();
        params.extend(self.head.param_slices_mut());
        params
    }
}
