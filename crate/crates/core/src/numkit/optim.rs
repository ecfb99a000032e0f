use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Bias-corrected first and second moments.
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Running second moment only, no bias correction.
    RmsProp { alpha: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn rmsprop() -> Self {
        OptimizerKind::RmsProp {
            alpha: 0.99,
            eps: 1e-5,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "adam" => Some(Self::adam()),
            "rmsprop" => Some(Self::rmsprop()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adam { .. } => "adam",
            OptimizerKind::RmsProp { .. } => "rmsprop",
        }
    }
}

/// Moment accumulators mirroring a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, shapes: &[usize]) -> Self {
        let first = match kind {
            OptimizerKind::Adam { .. } => shapes.iter().map(|n| vec![0.0; *n]).collect(),
            OptimizerKind::RmsProp { .. } => Vec::new(),
        };
        Self {
            kind,
            first,
            second: shapes.iter().map(|n| vec![0.0; *n]).collect(),
            step: 0,
        }
    }

    pub fn for_params(kind: OptimizerKind, params: &[&[f64]]) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(kind, &shapes)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.second.len() {
            return Err(Error::shape("optimizer tensors", self.second.len(), params.len()));
        }
        if grads.len() != params.len() {
            return Err(Error::shape("optimizer gradients", params.len(), grads.len()));
        }
        for (i, ((p, g), s)) in params.iter().zip(grads).zip(&self.second).enumerate() {
            if p.len() != s.len() || g.len() != s.len() {
                return Err(Error::shape("optimizer tensor", s.len(), g.len().min(p.len())));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient tensor {i}")));
            }
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as f64;
                let c1 = 1.0 - beta1.powf(t);
                let c2 = 1.0 - beta2.powf(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        let mhat = m[i] / c1;
                        let vhat = v[i] / c2;
                        p[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::RmsProp { alpha, eps } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(self.second.iter_mut()) {
                    for i in 0..p.len() {
                        let gi = g[i];
                        v[i] = alpha * v[i] + (1.0 - alpha) * gi * gi;
                        p[i] -= lr * gi / (v[i].sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rescales gradients so their global L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / (norm + 1e-6);
        grads
            .iter_mut()
            .for_each(|g| g.iter_mut().for_each(|v| *v *= s));
    }
    norm
}
