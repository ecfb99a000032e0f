//! Minimal dense numeric core.
//!
//! Everything here works in `f64`. Matrices are row-major and batches are
//! laid out one sample per row.

mod linalg;
mod matrix;
mod mlp;
mod optim;
mod rng;

pub use linalg::{cholesky_inverse, sherman_morrison_in_place, sherman_morrison_update};
pub use matrix::Matrix;
pub use mlp::{copy_params, Activation, Mlp, MlpCache, MlpGrads};
pub use optim::{clip_grad_norm, OptimizerKind, OptimizerState};
pub use rng::SeededRng;
