use crate::error::{Error, Result};
use crate::numkit::{sherman_morrison_in_place, Matrix};

/// Inverse of `C = λI + Σ ψψᵀ` over the embeddings seen this episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseState {
    c_inv: Matrix,
    lambda: f64,
}

impl EllipseState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            c_inv: Matrix::scaled_identity(dim, 1.0 / lambda),
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.c_inv.rows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c_inv(&self) -> &Matrix {
        &self.c_inv
    }

    /// Back to `C⁻¹ = I/λ`.
    pub fn reset(&mut self) {
        self.c_inv = Matrix::scaled_identity(self.dim(), 1.0 / self.lambda);
    }

    /// `b = ψᵀ C⁻¹ ψ`, computed before the embedding is folded in.
    pub fn bonus(&self, embedding: &[f64]) -> Result<f64> {
        if embedding.len() != self.dim() {
            return Err(Error::shape("elliptic bonus embedding", self.dim(), embedding.len()));
        }
        // Clamp the round-off floor; C⁻¹ is SPD so the exact value is ≥ 0.
        Ok(self.c_inv.quad_form(embedding)?.max(0.0))
    }

    /// Folds `ψψᵀ` into `C` through a Sherman–Morrison update of `C⁻¹`.
    pub fn update(&mut self, embedding: &[f64]) -> Result<()> {
        sherman_morrison_in_place(&mut self.c_inv, embedding)
    }

    /// Episodic criterion `√(2b)` for `embedding`.
    pub fn eec(&self, embedding: &[f64]) -> Result<f64> {
        Ok(eec_from_bonus(self.bonus(embedding)?))
    }
}

/// `√(2b)`.
pub fn eec_from_bonus(b: f64) -> f64 {
    (2.0 * b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_bonus_is_norm_over_lambda() {
        let e = EllipseState::new(3, 0.1).unwrap();
        let v = [1.0, 2.0, -2.0];
        let b = e.bonus(&v).unwrap();
        assert!((b - 9.0 / 0.1).abs() < 1e-12);
        assert_eq!(e.bonus(&[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn eec_values() {
        assert_eq!(eec_from_bonus(2.0), 2.0);
        assert_eq!(eec_from_bonus(0.0), 0.0);
        assert_eq!(eec_from_bonus(0.125), 0.5);
    }

    #[test]
    fn zero_update_is_noop_and_reset_restores() {
        let mut e = EllipseState::new(2, 0.5).unwrap();
        let fresh = e.clone();
        e.update(&[0.0, 0.0]).unwrap();
        assert_eq!(e, fresh);
        e.update(&[1.0, 0.3]).unwrap();
        assert_ne!(e, fresh);
        e.reset();
        assert_eq!(e, fresh);
    }

    #[test]
    fn rejects_bad_lambda_and_dims() {
        assert!(EllipseState::new(2, 0.0).is_err());
        let e = EllipseState::new(2, 1.0).unwrap();
        assert!(e.bonus(&[1.0]).is_err());
    }
}
