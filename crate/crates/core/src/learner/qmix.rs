use crate::error::{Error, Result};
use crate::numkit::{clip_grad_norm, copy_params, Matrix, OptimizerKind, OptimizerState, SeededRng};

use super::agent::AgentNet;
use super::mixer::MixerNet;
use super::replay::{Episode, ReplayConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub grad_clip: f64,
    /// Episodes per train step.
    pub batch_size: usize,
    /// Train steps between target syncs.
    pub target_update: usize,
    pub epsilon_start: f64,
    pub epsilon_finish: f64,
    /// Environment steps over which ε is annealed linearly.
    pub epsilon_anneal: u64,
    pub agent_hidden: Vec<usize>,
    pub mixer_embed: usize,
    /// 0 gives linear weight hypernetworks.
    pub hypernet_hidden: usize,
    pub replay: ReplayConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 5e-4,
            optimizer: OptimizerKind::rmsprop(),
            grad_clip: 10.0,
            batch_size: 32,
            target_update: 200,
            epsilon_start: 0.3,
            epsilon_finish: 0.05,
            epsilon_anneal: 50_000,
            agent_hidden: vec![64, 64],
            mixer_embed: 32,
            hypernet_hidden: 64,
            replay: ReplayConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        for (name, e) in [("start", self.epsilon_start), ("finish", self.epsilon_finish)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Config(format!("epsilon {name} must be in [0, 1], got {e}")));
            }
        }
        if self.batch_size == 0 || self.target_update == 0 || self.mixer_embed == 0 {
            return Err(Error::Config("batch size, target period and mixer width must be positive".into()));
        }
        if !(self.lr >= 0.0) || !(self.grad_clip > 0.0) {
            return Err(Error::Config("learner lr must be >= 0 and grad clip > 0".into()));
        }
        Ok(())
    }

    pub fn epsilon(&self, env_steps: u64) -> f64 {
        if self.epsilon_anneal == 0 {
            return self.epsilon_finish;
        }
        if env_steps >= self.epsilon_anneal {
            return self.epsilon_finish;
        }
        let frac = env_steps as f64 / self.epsilon_anneal as f64;
        self.epsilon_start + (self.epsilon_finish - self.epsilon_start) * frac
    }
}

/// Output of one TD step.
#[derive(Debug, Clone, PartialEq)]
pub struct TdReport {
    pub loss: f64,
    /// Per-episode `mean|δ| + ε_p`.
    pub priorities: Vec<f64>,
    pub grad_norm: f64,
}

/// Agent network, mixer and their target copies.
#[derive(Debug, Clone)]
pub struct QmixLearner {
    config: TrainConfig,
    agent: AgentNet,
    mixer: MixerNet,
    target_agent: AgentNet,
    target_mixer: MixerNet,
    opt: OptimizerState,
    train_steps: u64,
}

struct Forward {
    q_tot: Vec<f64>,
    targets: Vec<f64>,
    /// `(episode, first transition row)` for each episode.
    spans: Vec<(usize, usize)>,
}

impl QmixLearner {
    pub fn new(
        config: TrainConfig,
        obs_dim: usize,
        state_dim: usize,
        n_agents: usize,
        n_actions: usize,
        rng: &SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let agent = AgentNet::new(obs_dim, n_agents, n_actions, &config.agent_hidden, &mut rng.split("init.agent"))?;
        let mixer = MixerNet::new(
            n_agents,
            state_dim,
            config.mixer_embed,
            config.hypernet_hidden,
            &mut rng.split("init.mixer"),
        )?;
        Self::from_nets(config, agent, mixer)
    }

    pub fn from_nets(config: TrainConfig, agent: AgentNet, mixer: MixerNet) -> Result<Self> {
        config.validate()?;
        if agent.n_agents() != mixer.n_agents() {
            return Err(Error::shape("mixer agent count", agent.n_agents(), mixer.n_agents()));
        }
        let mut params = agent.mlp().param_slices();
        params.extend(mixer.param_slices());
        let opt = OptimizerState::for_params(config.optimizer, &params);
        Ok(Self {
            target_agent: agent.clone(),
            target_mixer: mixer.clone(),
            config,
            agent,
            mixer,
            opt,
            train_steps: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn agent(&self) -> &AgentNet {
        &self.agent
    }

    pub fn mixer(&self) -> &MixerNet {
        &self.mixer
    }

    pub fn target_agent(&self) -> &AgentNet {
        &self.target_agent
    }

    pub fn target_mixer(&self) -> &MixerNet {
        &self.target_mixer
    }

    pub fn agent_mut(&mut self) -> &mut AgentNet {
        &mut self.agent
    }

    pub fn mixer_mut(&mut self) -> &mut MixerNet {
        &mut self.mixer
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn sync_targets(&mut self) -> Result<()> {
        copy_params(self.agent.mlp(), self.target_agent.mlp_mut())?;
        for (s, d) in self.mixer.hypernets().into_iter().zip(self.target_mixer.hypernets_mut()) {
            copy_params(s, d)?;
        }
        Ok(())
    }

    fn agent_inputs(&self, episodes: &[&Episode]) -> Result<(Matrix, Vec<usize>)> {
        let n = self.agent.n_agents();
        let mut offsets = Vec::with_capacity(episodes.len());
        let mut rows = 0;
        for e in episodes {
            if e.n_agents != n || e.obs_dim != self.agent.obs_dim() || e.state_dim != self.mixer.state_dim() {
                return Err(Error::shape("episode layout", n, e.n_agents));
            }
            if e.is_empty() || !e.is_complete() {
                return Err(Error::Domain("training on an empty or incomplete episode".into()));
            }
            offsets.push(rows);
            rows += (e.len() + 1) * n;
        }
        let mut x = Matrix::zeros(rows, self.agent.input_dim());
        for (e, &off) in episodes.iter().zip(&offsets) {
            for t in 0..=e.len() {
                for i in 0..n {
                    let last = (t > 0).then(|| e.action(t - 1, i));
                    self.agent.write_input(x.row_mut(off + t * n + i), e.obs(t, i), i, last);
                }
            }
        }
        Ok((x, offsets))
    }

    /// Mean over transitions of `w · δ²`, without updating anything.
    pub fn td_loss(&self, episodes: &[&Episode], weights: &[f64]) -> Result<f64> {
        let (x, offsets) = self.agent_inputs(episodes)?;
        let q = self.agent.mlp().predict_batch(&x)?;
        let (chosen, states) = self.gather(episodes, &offsets, &q)?;
        let q_tot = self.mixer.mix_batch(&chosen, &states)?;
        let f = self.targets(episodes, &x, &offsets, q_tot)?;
        Ok(self.weighted(episodes, weights, &f)?.0)
    }

    fn gather(&self, episodes: &[&Episode], offsets: &[usize], q: &Matrix) -> Result<(Matrix, Matrix)> {
        let n = self.agent.n_agents();
        let m: usize = episodes.iter().map(|e| e.len()).sum();
        let mut chosen = Matrix::zeros(m, n);
        let mut states = Matrix::zeros(m, self.mixer.state_dim());
        let mut r = 0;
        for (e, &off) in episodes.iter().zip(offsets) {
            for t in 0..e.len() {
                for i in 0..n {
                    let a = e.action(t, i);
                    if a >= self.agent.n_actions() {
                        return Err(Error::Domain(format!("stored action {a} outside 0..{}", self.agent.n_actions())));
                    }
                    chosen.set(r, i, q.get(off + t * n + i, a));
                }
                states.row_mut(r).copy_from_slice(e.state(t));
                r += 1;
            }
        }
        Ok((chosen, states))
    }

    fn targets(&self, episodes: &[&Episode], x: &Matrix, offsets: &[usize], q_tot: Vec<f64>) -> Result<Forward> {
        let n = self.agent.n_agents();
        let qt = self.target_agent.mlp().predict_batch(x)?;
        let m = q_tot.len();
        let mut next_q = Matrix::zeros(m, n);
        let mut next_s = Matrix::zeros(m, self.mixer.state_dim());
        let mut spans = Vec::with_capacity(episodes.len());
        let mut r = 0;
        for (b, (e, &off)) in episodes.iter().zip(offsets).enumerate() {
            spans.push((b, r));
            for t in 0..e.len() {
                for i in 0..n {
                    let row = qt.row(off + (t + 1) * n + i);
                    next_q.set(r, i, row.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                }
                next_s.row_mut(r).copy_from_slice(e.state(t + 1));
                r += 1;
            }
        }
        let boot = self.target_mixer.mix_batch(&next_q, &next_s)?;
        let mut targets = Vec::with_capacity(m);
        let mut r = 0;
        for e in episodes {
            for t in 0..e.len() {
                let cont = if e.terminated[t] { 0.0 } else { 1.0 };
                targets.push(e.rewards[t] + self.config.gamma * cont * boot[r]);
                r += 1;
            }
        }
        Ok(Forward { q_tot, targets, spans })
    }

    /// Loss, `∂L/∂Q_tot` and per-episode priorities.
    fn weighted(&self, episodes: &[&Episode], weights: &[f64], f: &Forward) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        if weights.len() != episodes.len() {
            return Err(Error::shape("importance weights", episodes.len(), weights.len()));
        }
        let m = f.q_tot.len() as f64;
        let mut loss = 0.0;
        let mut d_out = vec![0.0; f.q_tot.len()];
        let mut priorities = Vec::with_capacity(episodes.len());
        for &(b, start) in &f.spans {
            let len = episodes[b].len();
            let w = weights[b];
            let mut abs_sum = 0.0;
            for r in start..start + len {
                let delta = f.q_tot[r] - f.targets[r];
                loss += w * delta * delta;
                d_out[r] = 2.0 * w * delta / m;
                abs_sum += delta.abs();
            }
            priorities.push(abs_sum / len as f64 + self.config.replay.priority_eps);
        }
        let loss = loss / m;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("TD loss {loss}")));
        }
        Ok((loss, d_out, priorities))
    }

    /// One optimiser step on the importance-weighted TD loss.
    pub fn td_train_step(&mut self, episodes: &[&Episode], weights: &[f64]) -> Result<TdReport> {
        let n = self.agent.n_agents();
        let (x, offsets) = self.agent_inputs(episodes)?;
        let (q, agent_cache) = self.agent.mlp().forward_batch(&x)?;
        let (chosen, states) = self.gather(episodes, &offsets, &q)?;
        let (q_tot, mixer_cache) = self.mixer.forward_batch(&chosen, &states)?;
        let f = self.targets(episodes, &x, &offsets, q_tot)?;
        let (loss, d_out, priorities) = self.weighted(episodes, weights, &f)?;

        let (mixer_grads, dq) = self.mixer.backward_batch(&mixer_cache, &d_out)?;
        let mut d_agent = Matrix::zeros(q.rows(), q.cols());
        let mut r = 0;
        for (e, &off) in episodes.iter().zip(&offsets) {
            for t in 0..e.len() {
                for i in 0..n {
                    d_agent.set(off + t * n + i, e.action(t, i), dq.get(r, i));
                }
                r += 1;
            }
        }
        let (agent_grads, _) = self.agent.mlp().backward_batch(&agent_cache, &d_agent)?;

        let mut grads: Vec<Vec<f64>> = agent_grads.slices().iter().map(|s| s.to_vec()).collect();
        grads.extend(mixer_grads.slices().iter().map(|s| s.to_vec()));
        let grad_norm = {
            let mut views: Vec<&mut [f64]> = grads.iter_mut().map(|g| g.as_mut_slice()).collect();
            clip_grad_norm(&mut views, self.config.grad_clip)
        };
        let views: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
        let mut params = self.agent.mlp_mut().param_slices_mut();
        params.extend(self.mixer.param_slices_mut());
        self.opt.step(&mut params, &views, self.config.lr)?;

        self.train_steps += 1;
        if self.train_steps % self.config.target_update as u64 == 0 {
            self.sync_targets()?;
        }
        Ok(TdReport {
            loss,
            priorities,
            grad_norm,
        })
    }
}
