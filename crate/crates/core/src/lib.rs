//! Joint intrinsic motivation for cooperative multi-agent exploration.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: dense matrices, MLPs with analytic backprop, optimizers,
//!   seeded random streams and the rank-one inverse update used by the
//!   elliptical bonus.
//! - [`envs`]: the `rel_overgen` family and a small 2D particle world with
//!   the cooperative box-pushing and coordinated-placement tasks.
//! - [`intrinsic`]: RND novelty, the life-long and episodic criteria and the
//!   joint/local combinators built on top of them.
//! - [`learner`]: a QMIX-style value factorisation learner with prioritized
//!   episode replay.
//! - [`harness`]: configuration, seeded training runs, evaluation, plots and
//!   the `marlx` command line.

pub mod envs;
pub mod error;
pub mod harness;
pub mod intrinsic;
pub mod learner;
pub mod numkit;

pub use error::{Error, Result};
