//! QMIX-style value factorisation with prioritised episode replay.

mod agent;
mod checkpoint;
mod mixer;
mod qmix;
mod replay;

pub use agent::{argmax, select_actions, AgentNet};
pub use checkpoint::{load_checkpoint, read_mlp, save_checkpoint, write_mlp, Checkpoint};
pub use mixer::{MixerCache, MixerGrads, MixerNet};
pub use qmix::{QmixLearner, TdReport, TrainConfig};
pub use replay::{Episode, ReplayBuffer, ReplayConfig, SampledBatch, SumTree};
