use std::io::Write;

use super::{DecPomdpStep, Environment};

/// CSV dump of an episode: `episode,step,<raw state...>,a0..aN,reward,done`.
pub struct TrajectoryWriter<W: Write> {
    out: W,
    n_agents: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, env: &dyn Environment) -> std::io::Result<Self> {
        let mut header = vec!["episode".to_string(), "step".to_string()];
        header.extend(env.raw_state_header());
        header.extend((0..env.n_agents()).map(|i| format!("a{i}")));
        header.push("reward".into());
        header.push("done".into());
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            n_agents: env.n_agents(),
        })
    }

    pub fn record(
        &mut self,
        episode: usize,
        env: &dyn Environment,
        joint_action: &[usize],
        step: &DecPomdpStep,
    ) -> std::io::Result<()> {
        debug_assert_eq!(joint_action.len(), self.n_agents);
        let mut row = vec![episode.to_string(), step.step_index.to_string()];
        row.extend(env.raw_state().iter().map(|v| v.to_string()));
        row.extend(joint_action.iter().map(|a| a.to_string()));
        row.push(step.reward.to_string());
        row.push(u8::from(step.done).to_string());
        writeln!(self.out, "{}", row.join(","))
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
