use crate::error::{Error, Result};
use crate::numkit::{Activation, Matrix, Mlp, MlpCache, MlpGrads, SeededRng};

#[inline]
fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[inline]
fn abs_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Monotonic mixing network.
///
/// `Q_tot = |w2(s)|ᵀ · elu(qᵀ |W1(s)| + b1(s)) + V(s)` where every
/// state-conditioned quantity comes from a hypernetwork.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerNet {
    hyper_w1: Mlp,
    hyper_b1: Mlp,
    hyper_w2: Mlp,
    hyper_v: Mlp,
    n_agents: usize,
    embed_dim: usize,
    unit_weights: bool,
}

/// What the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct MixerCache {
    q: Matrix,
    w1_raw: Matrix,
    w2_raw: Matrix,
    hidden_pre: Matrix,
    caches: Option<[MlpCache; 4]>,
}

/// Gradients of the four hypernetworks.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerGrads {
    pub w1: MlpGrads,
    pub b1: MlpGrads,
    pub w2: MlpGrads,
    pub v: MlpGrads,
}

impl MixerGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.w1.slices();
        out.extend(self.b1.slices());
        out.extend(self.w2.slices());
        out.extend(self.v.slices());
        out
    }
}

impl MixerNet {
    /// `hypernet_hidden = 0` makes the weight hypernetworks single linear layers.
    pub fn new(
        n_agents: usize,
        state_dim: usize,
        embed_dim: usize,
        hypernet_hidden: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let hyper = |out: usize, rng: &mut SeededRng| {
            let sizes: Vec<usize> = if hypernet_hidden == 0 {
                vec![state_dim, out]
            } else {
                vec![state_dim, hypernet_hidden, out]
            };
            Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)
        };
        let hyper_w1 = hyper(n_agents * embed_dim, rng)?;
        let hyper_b1 = Mlp::new(&[state_dim, embed_dim], Activation::Relu, Activation::Identity, rng)?;
        let hyper_w2 = hyper(embed_dim, rng)?;
        let hyper_v = Mlp::new(&[state_dim, embed_dim, 1], Activation::Relu, Activation::Identity, rng)?;
        Ok(Self {
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_v,
            n_agents,
            embed_dim,
            unit_weights: false,
        })
    }

    pub fn from_parts(hyper_w1: Mlp, hyper_b1: Mlp, hyper_w2: Mlp, hyper_v: Mlp, n_agents: usize) -> Result<Self> {
        let embed_dim = hyper_b1.output_dim();
        let s = hyper_w1.input_dim();
        if [&hyper_b1, &hyper_w2, &hyper_v].iter().any(|m| m.input_dim() != s) {
            return Err(Error::Config("mixer hypernetworks disagree on the state size".into()));
        }
        if hyper_w1.output_dim() != n_agents * embed_dim {
            return Err(Error::shape("mixer hyper_w1 output", n_agents * embed_dim, hyper_w1.output_dim()));
        }
        if hyper_w2.output_dim() != embed_dim || hyper_v.output_dim() != 1 {
            return Err(Error::shape("mixer hyper_w2 output", embed_dim, hyper_w2.output_dim()));
        }
        Ok(Self {
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_v,
            n_agents,
            embed_dim,
            unit_weights: false,
        })
    }

    /// Forces every mixing weight to 1 and every bias and `V` to 0, so that
    /// `Q_tot = E · elu(Σ q_i)`.
    pub fn with_unit_weights(mut self) -> Self {
        self.unit_weights = true;
        self
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn state_dim(&self) -> usize {
        self.hyper_w1.input_dim()
    }

    /// Hypernetworks in parameter order: `w1, b1, w2, v`.
    pub fn hypernets(&self) -> [&Mlp; 4] {
        [&self.hyper_w1, &self.hyper_b1, &self.hyper_w2, &self.hyper_v]
    }

    pub fn hypernets_mut(&mut self) -> [&mut Mlp; 4] {
        [&mut self.hyper_w1, &mut self.hyper_b1, &mut self.hyper_w2, &mut self.hyper_v]
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.hypernets().into_iter().flat_map(|m| m.param_slices()).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.hypernets_mut()
            .into_iter()
            .flat_map(|m| m.param_slices_mut())
            .collect()
    }

    fn check(&self, q: &Matrix, states: &Matrix) -> Result<()> {
        if q.cols() != self.n_agents {
            return Err(Error::shape("mixer agent Q-values", self.n_agents, q.cols()));
        }
        if states.cols() != self.state_dim() {
            return Err(Error::shape("mixer state", self.state_dim(), states.cols()));
        }
        if states.rows() != q.rows() {
            return Err(Error::shape("mixer batch", q.rows(), states.rows()));
        }
        Ok(())
    }

    fn mix_rows(&self, q: &Matrix, w1: &Matrix, b1: &Matrix, w2: &Matrix, v: &Matrix) -> (Vec<f64>, Matrix) {
        let (n, e) = (self.n_agents, self.embed_dim);
        let mut out = vec![0.0; q.rows()];
        let mut pre = Matrix::zeros(q.rows(), e);
        for r in 0..q.rows() {
            let qr = q.row(r);
            let h = pre.row_mut(r);
            let mut total = 0.0;
            if self.unit_weights {
                let s: f64 = qr.iter().sum();
                h.fill(s);
                total = e as f64 * elu(s);
            } else {
                h.copy_from_slice(b1.row(r));
                let w1r = w1.row(r);
                for i in 0..n {
                    let qi = qr[i];
                    for (hk, wk) in h.iter_mut().zip(&w1r[i * e..(i + 1) * e]) {
                        *hk += qi * wk.abs();
                    }
                }
                for (hk, wk) in h.iter().zip(w2.row(r)) {
                    total += elu(*hk) * wk.abs();
                }
                total += v.get(r, 0);
            }
            out[r] = total;
        }
        (out, pre)
    }

    /// `Q_tot` for each row of `(q, state)`.
    pub fn mix_batch(&self, q: &Matrix, states: &Matrix) -> Result<Vec<f64>> {
        self.check(q, states)?;
        if self.unit_weights {
            let z = Matrix::zeros(q.rows(), 1);
            return Ok(self.mix_rows(q, &z, &z, &z, &z).0);
        }
        let w1 = self.hyper_w1.predict_batch(states)?;
        let b1 = self.hyper_b1.predict_batch(states)?;
        let w2 = self.hyper_w2.predict_batch(states)?;
        let v = self.hyper_v.predict_batch(states)?;
        Ok(self.mix_rows(q, &w1, &b1, &w2, &v).0)
    }

    pub fn mix(&self, q: &[f64], state: &[f64]) -> Result<f64> {
        Ok(self.mix_batch(&Matrix::row_vector(q), &Matrix::row_vector(state))?[0])
    }

    pub fn forward_batch(&self, q: &Matrix, states: &Matrix) -> Result<(Vec<f64>, MixerCache)> {
        self.check(q, states)?;
        if self.unit_weights {
            let z = Matrix::zeros(q.rows(), 1);
            let (out, hidden_pre) = self.mix_rows(q, &z, &z, &z, &z);
            return Ok((
                out,
                MixerCache {
                    q: q.clone(),
                    w1_raw: z.clone(),
                    w2_raw: z,
                    hidden_pre,
                    caches: None,
                },
            ));
        }
        let (w1, c1) = self.hyper_w1.forward_batch(states)?;
        let (b1, cb) = self.hyper_b1.forward_batch(states)?;
        let (w2, c2) = self.hyper_w2.forward_batch(states)?;
        let (v, cv) = self.hyper_v.forward_batch(states)?;
        let (out, hidden_pre) = self.mix_rows(q, &w1, &b1, &w2, &v);
        Ok((
            out,
            MixerCache {
                q: q.clone(),
                w1_raw: w1,
                w2_raw: w2,
                hidden_pre,
                caches: Some([c1, cb, c2, cv]),
            },
        ))
    }

    /// Gradients given `∂L/∂Q_tot` per row. Returns hypernetwork gradients and `∂L/∂q`.
    pub fn backward_batch(&self, cache: &MixerCache, d_out: &[f64]) -> Result<(MixerGrads, Matrix)> {
        let (n, e) = (self.n_agents, self.embed_dim);
        let rows = cache.q.rows();
        if d_out.len() != rows {
            return Err(Error::shape("mixer grad_output", rows, d_out.len()));
        }
        let mut dq = Matrix::zeros(rows, n);
        let Some([c1, cb, c2, cv]) = &cache.caches else {
            for r in 0..rows {
                let s = cache.hidden_pre.get(r, 0);
                let g = d_out[r] * e as f64 * elu_grad(s);
                dq.row_mut(r).fill(g);
            }
            let zero = |m: &Mlp| MlpGrads::zeros_like(m);
            return Ok((
                MixerGrads {
                    w1: zero(&self.hyper_w1),
                    b1: zero(&self.hyper_b1),
                    w2: zero(&self.hyper_w2),
                    v: zero(&self.hyper_v),
                },
                dq,
            ));
        };
        let mut d_w1 = Matrix::zeros(rows, n * e);
        let mut d_b1 = Matrix::zeros(rows, e);
        let mut d_w2 = Matrix::zeros(rows, e);
        let mut d_v = Matrix::zeros(rows, 1);
        let mut dh = vec![0.0; e];
        for r in 0..rows {
            let g = d_out[r];
            d_v.set(r, 0, g);
            let pre = cache.hidden_pre.row(r);
            let w2r = cache.w2_raw.row(r);
            let dw2 = d_w2.row_mut(r);
            for k in 0..e {
                dw2[k] = g * elu(pre[k]) * abs_grad(w2r[k]);
                dh[k] = g * w2r[k].abs() * elu_grad(pre[k]);
            }
            d_b1.row_mut(r).copy_from_slice(&dh);
            let qr = cache.q.row(r);
            let w1r = cache.w1_raw.row(r);
            let dw1 = d_w1.row_mut(r);
            let dqr = dq.row_mut(r);
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..e {
                    let w = w1r[i * e + k];
                    dw1[i * e + k] = qr[i] * dh[k] * abs_grad(w);
                    acc += w.abs() * dh[k];
                }
                dqr[i] = acc;
            }
        }
        let (w1, _) = self.hyper_w1.backward_batch(c1, &d_w1)?;
        let (b1, _) = self.hyper_b1.backward_batch(cb, &d_b1)?;
        let (w2, _) = self.hyper_w2.backward_batch(c2, &d_w2)?;
        let (v, _) = self.hyper_v.backward_batch(cv, &d_v)?;
        Ok((MixerGrads { w1, b1, w2, v }, dq))
    }
}
