use crate::error::{Error, Result};
use crate::numkit::{Activation, Matrix, Mlp, OptimizerKind, OptimizerState, SeededRng};

/// Random network distillation: a frozen random embedder and a predictor
/// trained to match it. Novelty is the Euclidean prediction error.
#[derive(Debug, Clone)]
pub struct RndModule {
    target: Mlp,
    predictor: Mlp,
    opt: OptimizerState,
    lr: f64,
}

impl RndModule {
    /// Both networks are `input → hidden → hidden → encoding` with ReLU hidden units.
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        encoding_dim: usize,
        lr: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let sizes = [input_dim, hidden_dim, hidden_dim, encoding_dim];
        let target = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
        let predictor = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
        Ok(Self::from_networks(target, predictor, lr)?)
    }

    pub fn from_networks(target: Mlp, predictor: Mlp, lr: f64) -> Result<Self> {
        if target.sizes() != predictor.sizes() {
            return Err(Error::Config("RND target and predictor architectures differ".into()));
        }
        let opt = OptimizerState::for_params(OptimizerKind::adam(), &predictor.param_slices());
        Ok(Self {
            target,
            predictor,
            opt,
            lr,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.target.input_dim()
    }

    pub fn encoding_dim(&self) -> usize {
        self.target.output_dim()
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn predictor(&self) -> &Mlp {
        &self.predictor
    }

    /// Mutable predictor access, for tests and checkpoint restores.
    pub fn predictor_mut(&mut self) -> &mut Mlp {
        &mut self.predictor
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// `‖φ(s) − φ′(s)‖₂`.
    pub fn novelty(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.novelty_batch(&Matrix::row_vector(obs))?[0])
    }

    pub fn novelty_batch(&self, obs: &Matrix) -> Result<Vec<f64>> {
        let t = self.target.predict_batch(obs)?;
        let p = self.predictor.predict_batch(obs)?;
        Ok((0..obs.rows())
            .map(|r| {
                t.row(r)
                    .iter()
                    .zip(p.row(r))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }

    /// One gradient step on the mean squared embedding distance.
    /// Returns the loss before the step.
    pub fn train(&mut self, batch: &Matrix) -> Result<f64> {
        if batch.rows() == 0 {
            return Err(Error::Domain("RND training batch is empty".into()));
        }
        let n = batch.rows() as f64;
        let target = self.target.predict_batch(batch)?;
        let (pred, cache) = self.predictor.forward_batch(batch)?;
        let mut grad = pred.sub(&target)?;
        let loss = grad.data().iter().map(|d| d * d).sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite("RND loss".into()));
        }
        grad.data_mut().iter_mut().for_each(|d| *d *= 2.0 / n);
        let (g, _) = self.predictor.backward_batch(&cache, &grad)?;
        let mut params = self.predictor.param_slices_mut();
        self.opt.step(&mut params, &g.slices(), self.lr)?;
        Ok(loss)
    }
}
