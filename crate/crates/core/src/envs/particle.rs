//! Simplified 2D point-mass world in a walled 2 m × 2 m arena centred on the origin.

use super::{DecPomdpStep, Environment};
use crate::error::{Error, Result};
use crate::numkit::SeededRng;

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const STAY: usize = 4;

const HALF_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleTask {
    BoxPush,
    Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    Red,
    Blue,
    Yellow,
}

impl Color {
    fn one_hot(self) -> [f64; 3] {
        match self {
            Color::Red => [1.0, 0.0, 0.0],
            Color::Blue => [0.0, 1.0, 0.0],
            Color::Yellow => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Entity {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub pos: [f64; 2],
    pub color: Option<Color>,
    /// Corner number 1..=4 (box pushing only).
    pub corner: Option<u8>,
}

/// Point-mass integration constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub damping: f64,
    pub accel: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub agent_radius: f64,
    pub box_radius: f64,
    pub landmark_radius: f64,
    /// Contact repulsion per metre of penetration (agent mass is 1).
    pub contact_stiffness: f64,
    pub box_mass: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            damping: 0.75,
            accel: 5.0,
            dt: 0.1,
            max_speed: 1.0,
            agent_radius: 0.05,
            box_radius: 0.15,
            landmark_radius: 0.15,
            contact_stiffness: 100.0,
            box_mass: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    pub task: ParticleTask,
    pub obs_range: f64,
    pub episode_length: usize,
    pub step_penalty: f64,
    pub collision_penalty: f64,
    pub delivery_reward: f64,
    pub dynamics: Dynamics,
}

impl ParticleConfig {
    /// Fully observable box pushing (range 2.83 m).
    pub fn box_push() -> Self {
        Self {
            task: ParticleTask::BoxPush,
            obs_range: 2.83,
            episode_length: 100,
            step_penalty: 0.1,
            collision_penalty: 2.0,
            delivery_reward: 100.0,
            dynamics: Dynamics::default(),
        }
    }

    /// Partially observable placement (range 0.6 m).
    pub fn placement() -> Self {
        Self {
            task: ParticleTask::Placement,
            obs_range: 0.6,
            episode_length: 100,
            step_penalty: 0.0,
            collision_penalty: 0.0,
            delivery_reward: 0.0,
            dynamics: Dynamics::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.obs_range >= 0.0) {
            return Err(Error::Config(format!("obs_range {} < 0", self.obs_range)));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode_length must be positive".into()));
        }
        let d = &self.dynamics;
        if !(d.dt > 0.0 && d.max_speed > 0.0 && d.box_mass > 0.0) {
            return Err(Error::Config("dt, max_speed and box_mass must be positive".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> ObservationSpec {
        ObservationSpec {
            task: self.task,
            obs_range: self.obs_range,
        }
    }
}

/// Layout of the per-agent observation vector.
///
/// Box pushing (16): own position and velocity; other agent
/// `(visible, dx, dy, vx, vy)`; object `(visible, dx, dy, vx, vy)`;
/// landmark `(visible, corner)`.
///
/// Placement (43): own position and velocity; other agent
/// `(visible, dx, dy)`; six landmarks `(visible, dx, dy, red, blue, yellow)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationSpec {
    pub task: ParticleTask,
    pub obs_range: f64,
}

impl ObservationSpec {
    pub fn dim(&self) -> usize {
        match self.task {
            ParticleTask::BoxPush => 4 + 5 + 5 + 2,
            ParticleTask::Placement => 4 + 3 + 6 * 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleWorldState {
    pub agents: Vec<Entity>,
    pub object: Option<Entity>,
    pub landmarks: Vec<Landmark>,
    pub t: usize,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Relative block of another entity: visibility flag and range-normalised offset,
/// or `(0, 1, 1)` when it lies outside the observation range.
fn relative(me: [f64; 2], other: [f64; 2], range: f64) -> (bool, [f64; 3]) {
    if dist(me, other) < range {
        (
            true,
            [
                1.0,
                (other[0] - me[0]) / range,
                (other[1] - me[1]) / range,
            ],
        )
    } else {
        (false, [0.0, 1.0, 1.0])
    }
}

/// Observation of agent `agent_id`.
pub fn observe(state: &ParticleWorldState, agent_id: usize, spec: &ObservationSpec) -> Result<Vec<f64>> {
    if agent_id >= state.agents.len() {
        return Err(Error::Domain(format!(
            "agent {agent_id} out of range for {} agents",
            state.agents.len()
        )));
    }
    let me = state.agents[agent_id];
    let mut o = Vec::with_capacity(spec.dim());
    o.extend_from_slice(&me.pos);
    o.extend_from_slice(&me.vel);
    for (j, other) in state.agents.iter().enumerate() {
        if j == agent_id {
            continue;
        }
        let (seen, block) = relative(me.pos, other.pos, spec.obs_range);
        o.extend_from_slice(&block);
        if spec.task == ParticleTask::BoxPush {
            o.extend_from_slice(if seen { &other.vel } else { &[0.0, 0.0] });
        }
    }
    match spec.task {
        ParticleTask::BoxPush => {
            let obj = state
                .object
                .ok_or_else(|| Error::Domain("box pushing state without object".into()))?;
            let (seen, block) = relative(me.pos, obj.pos, spec.obs_range);
            o.extend_from_slice(&block);
            o.extend_from_slice(if seen { &obj.vel } else { &[0.0, 0.0] });
            let lm = state
                .landmarks
                .first()
                .ok_or_else(|| Error::Domain("box pushing state without landmark".into()))?;
            if dist(me.pos, lm.pos) < spec.obs_range {
                o.push(1.0);
                o.push(f64::from(lm.corner.unwrap_or(0)));
            } else {
                o.extend_from_slice(&[0.0, 0.0]);
            }
        }
        ParticleTask::Placement => {
            for lm in &state.landmarks {
                let (seen, block) = relative(me.pos, lm.pos, spec.obs_range);
                o.extend_from_slice(&block);
                match (seen, lm.color) {
                    (true, Some(c)) => o.extend_from_slice(&c.one_hot()),
                    _ => o.extend_from_slice(&[0.0; 3]),
                }
            }
        }
    }
    debug_assert_eq!(o.len(), spec.dim());
    Ok(o)
}

fn count_collisions(state: &ParticleWorldState, dynamics: &Dynamics) -> usize {
    let mut n = 0;
    for i in 0..state.agents.len() {
        for j in i + 1..state.agents.len() {
            if dist(state.agents[i].pos, state.agents[j].pos) < 2.0 * dynamics.agent_radius {
                n += 1;
            }
        }
    }
    n
}

fn delivered(state: &ParticleWorldState, dynamics: &Dynamics) -> bool {
    match (state.object, state.landmarks.first()) {
        (Some(obj), Some(lm)) => dist(obj.pos, lm.pos) < dynamics.landmark_radius,
        _ => false,
    }
}

/// Box-pushing reward for the current state: `(reward, done)`.
pub fn box_push_reward(state: &ParticleWorldState, config: &ParticleConfig) -> (f64, bool) {
    if delivered(state, &config.dynamics) {
        return (config.delivery_reward, true);
    }
    let collisions = count_collisions(state, &config.dynamics) as f64;
    (-config.step_penalty - config.collision_penalty * collisions, false)
}

/// Placement reward: 10 both red, 2 both blue, 1 both yellow,
/// 0.5 if exactly one agent stands on blue or yellow, else 0.
pub fn coordinated_placement_reward(state: &ParticleWorldState, dynamics: &Dynamics) -> f64 {
    let on: Vec<Option<Color>> = state
        .agents
        .iter()
        .map(|a| {
            state
                .landmarks
                .iter()
                .find(|lm| dist(a.pos, lm.pos) <= dynamics.landmark_radius)
                .and_then(|lm| lm.color)
        })
        .collect();
    let all = |c: Color| on.iter().all(|x| *x == Some(c));
    if all(Color::Red) {
        10.0
    } else if all(Color::Blue) {
        2.0
    } else if all(Color::Yellow) {
        1.0
    } else if on
        .iter()
        .filter(|x| matches!(x, Some(Color::Blue) | Some(Color::Yellow)))
        .count()
        == 1
    {
        0.5
    } else {
        0.0
    }
}

fn placement_landmarks() -> Vec<Landmark> {
    let top = [Color::Red, Color::Blue, Color::Yellow];
    let bottom = [Color::Yellow, Color::Blue, Color::Red];
    let xs = [-0.6, 0.0, 0.6];
    let mut out = Vec::with_capacity(6);
    for (row_y, colors) in [(0.5, top), (-0.5, bottom)] {
        for (x, c) in xs.iter().zip(colors) {
            out.push(Landmark {
                pos: [*x, row_y],
                color: Some(c),
                corner: None,
            });
        }
    }
    out
}

/// Return of holding each placement strategy for a whole episode:
/// both on red, both on blue, both on yellow, one agent alone on blue.
pub fn placement_strategy_returns(config: &ParticleConfig) -> Vec<(&'static str, f64)> {
    let landmarks = placement_landmarks();
    let at = |c: Color| landmarks.iter().find(|l| l.color == Some(c)).map_or([0.0, 0.0], |l| l.pos);
    let value = |a: [f64; 2], b: [f64; 2]| {
        let state = ParticleWorldState {
            agents: vec![Entity { pos: a, vel: [0.0; 2] }, Entity { pos: b, vel: [0.0; 2] }],
            object: None,
            landmarks: landmarks.clone(),
            t: 0,
        };
        coordinated_placement_reward(&state, &config.dynamics) * config.episode_length as f64
    };
    vec![
        ("red", value(at(Color::Red), at(Color::Red))),
        ("blue", value(at(Color::Blue), at(Color::Blue))),
        ("yellow", value(at(Color::Yellow), at(Color::Yellow))),
        ("half", value(at(Color::Blue), [0.0, 0.0])),
    ]
}

fn corner_position(corner: u8, radius: f64) -> [f64; 2] {
    let e = HALF_WIDTH - radius;
    match corner {
        1 => [-e, e],
        2 => [e, e],
        3 => [-e, -e],
        _ => [e, -e],
    }
}

#[derive(Debug, Clone)]
pub struct ParticleWorld {
    config: ParticleConfig,
    state: ParticleWorldState,
    done: bool,
}

impl ParticleWorld {
    pub fn new(config: ParticleConfig) -> Result<Self> {
        config.validate()?;
        let state = ParticleWorldState {
            agents: vec![Entity::default(); 2],
            object: None,
            landmarks: Vec::new(),
            t: 0,
        };
        Ok(Self {
            config,
            state,
            done: true,
        })
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.config
    }

    pub fn state(&self) -> &ParticleWorldState {
        &self.state
    }

    /// Starts an episode from an explicit state.
    pub fn set_state(&mut self, state: ParticleWorldState) -> Result<DecPomdpStep> {
        if state.agents.len() != 2 {
            return Err(Error::shape("particle agents", 2, state.agents.len()));
        }
        self.state = state;
        self.done = false;
        self.emit(0.0, false)
    }

    fn global_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(14);
        for a in &self.state.agents {
            s.extend_from_slice(&a.pos);
            s.extend_from_slice(&a.vel);
        }
        if self.config.task == ParticleTask::BoxPush {
            let obj = self.state.object.unwrap_or_default();
            s.extend_from_slice(&obj.pos);
            s.extend_from_slice(&obj.vel);
            let lm = self.state.landmarks.first().map_or([0.0, 0.0], |l| l.pos);
            s.extend_from_slice(&lm);
        }
        s
    }

    fn emit(&self, reward: f64, terminated: bool) -> Result<DecPomdpStep> {
        let spec = self.config.spec();
        let joint_observation = (0..self.state.agents.len())
            .map(|i| observe(&self.state, i, &spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(DecPomdpStep {
            joint_observation,
            global_state: self.global_state(),
            reward,
            done: self.done,
            terminated,
            step_index: self.state.t,
        })
    }

    fn integrate(&mut self, joint_action: &[usize]) {
        let d = self.config.dynamics;
        let n = self.state.agents.len();
        let mut force = vec![[0.0f64; 2]; n];
        let mut obj_force = [0.0f64; 2];
        for (f, a) in force.iter_mut().zip(joint_action) {
            match *a {
                NORTH => f[1] += d.accel,
                SOUTH => f[1] -= d.accel,
                EAST => f[0] += d.accel,
                WEST => f[0] -= d.accel,
                _ => {}
            }
        }
        if self.config.task == ParticleTask::BoxPush {
            let push = |pa: [f64; 2], pb: [f64; 2], ra: f64, rb: f64| -> Option<[f64; 2]> {
                let dd = dist(pa, pb);
                let pen = ra + rb - dd;
                if pen <= 0.0 || dd == 0.0 {
                    return None;
                }
                let k = d.contact_stiffness * pen / dd;
                Some([k * (pa[0] - pb[0]), k * (pa[1] - pb[1])])
            };
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (self.state.agents[i].pos, self.state.agents[j].pos);
                    if let Some(f) = push(a, b, d.agent_radius, d.agent_radius) {
                        force[i][0] += f[0];
                        force[i][1] += f[1];
                        force[j][0] -= f[0];
                        force[j][1] -= f[1];
                    }
                }
                if let Some(obj) = self.state.object {
                    let a = self.state.agents[i].pos;
                    if let Some(f) = push(a, obj.pos, d.agent_radius, d.box_radius) {
                        force[i][0] += f[0];
                        force[i][1] += f[1];
                        obj_force[0] -= f[0];
                        obj_force[1] -= f[1];
                    }
                }
            }
        }
        for (e, f) in self.state.agents.iter_mut().zip(&force) {
            advance(e, *f, 1.0, d.agent_radius, &d);
        }
        if let Some(obj) = self.state.object.as_mut() {
            advance(obj, obj_force, d.box_mass, d.box_radius, &d);
        }
    }
}

/// `v ← damping·v + (F/m)·dt`, speed clamp, `p ← p + v·dt`, inelastic walls.
fn advance(e: &mut Entity, force: [f64; 2], mass: f64, radius: f64, d: &Dynamics) {
    for k in 0..2 {
        e.vel[k] = d.damping * e.vel[k] + force[k] / mass * d.dt;
    }
    let speed = (e.vel[0] * e.vel[0] + e.vel[1] * e.vel[1]).sqrt();
    if speed > d.max_speed {
        let s = d.max_speed / speed;
        e.vel[0] *= s;
        e.vel[1] *= s;
    }
    let lim = HALF_WIDTH - radius;
    for k in 0..2 {
        let p = e.pos[k] + e.vel[k] * d.dt;
        if p > lim || p < -lim {
            e.pos[k] = p.clamp(-lim, lim);
            e.vel[k] = 0.0;
        } else {
            e.pos[k] = p;
        }
    }
}

impl Environment for ParticleWorld {
    fn name(&self) -> &'static str {
        match self.config.task {
            ParticleTask::BoxPush => "box_push",
            ParticleTask::Placement => "placement",
        }
    }

    fn n_agents(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        5
    }

    fn obs_dim(&self) -> usize {
        self.config.spec().dim()
    }

    fn state_dim(&self) -> usize {
        match self.config.task {
            ParticleTask::BoxPush => 14,
            ParticleTask::Placement => 8,
        }
    }

    fn episode_limit(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, rng: &mut SeededRng) -> DecPomdpStep {
        let d = self.config.dynamics;
        let uniform_pos = |r: f64, rng: &mut SeededRng| {
            let lim = HALF_WIDTH - r;
            [rng.uniform_range(-lim, lim), rng.uniform_range(-lim, lim)]
        };
        self.state = match self.config.task {
            ParticleTask::BoxPush => {
                let corner = 1 + rng.below(4) as u8;
                let landmark = Landmark {
                    pos: corner_position(corner, d.landmark_radius),
                    color: None,
                    corner: Some(corner),
                };
                let agents = (0..2)
                    .map(|_| Entity {
                        pos: uniform_pos(d.agent_radius, rng),
                        vel: [0.0; 2],
                    })
                    .collect();
                let mut obj = uniform_pos(d.box_radius, rng);
                while dist(obj, landmark.pos) < d.landmark_radius {
                    obj = uniform_pos(d.box_radius, rng);
                }
                ParticleWorldState {
                    agents,
                    object: Some(Entity {
                        pos: obj,
                        vel: [0.0; 2],
                    }),
                    landmarks: vec![landmark],
                    t: 0,
                }
            }
            ParticleTask::Placement => {
                let lim = HALF_WIDTH - d.agent_radius;
                let agents = (0..2)
                    .map(|_| Entity {
                        pos: [rng.uniform_range(-lim, lim), 0.0],
                        vel: [0.0; 2],
                    })
                    .collect();
                ParticleWorldState {
                    agents,
                    object: None,
                    landmarks: placement_landmarks(),
                    t: 0,
                }
            }
        };
        self.done = false;
        self.emit(0.0, false)
            .expect("freshly reset particle state is well formed")
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<DecPomdpStep> {
        if self.done {
            return Err(Error::Domain("step called on a finished episode".into()));
        }
        if joint_action.len() != self.state.agents.len() {
            return Err(Error::shape("particle joint action", self.state.agents.len(), joint_action.len()));
        }
        if let Some(a) = joint_action.iter().find(|a| **a > STAY) {
            return Err(Error::Domain(format!("particle action {a} not in 0..5")));
        }
        self.integrate(joint_action);
        self.state.t += 1;
        let (reward, terminated) = match self.config.task {
            ParticleTask::BoxPush => box_push_reward(&self.state, &self.config),
            ParticleTask::Placement => (
                coordinated_placement_reward(&self.state, &self.config.dynamics),
                false,
            ),
        };
        self.done = terminated || self.state.t >= self.config.episode_length;
        self.emit(reward, terminated)
    }

    fn raw_state_header(&self) -> Vec<String> {
        let mut h = Vec::new();
        for i in 0..self.state.agents.len() {
            for k in ["x", "y", "vx", "vy"] {
                h.push(format!("agent{i}_{k}"));
            }
        }
        if self.config.task == ParticleTask::BoxPush {
            for k in ["x", "y", "vx", "vy"] {
                h.push(format!("object_{k}"));
            }
        }
        h
    }

    fn raw_state(&self) -> Vec<f64> {
        let mut s = Vec::new();
        for a in &self.state.agents {
            s.extend_from_slice(&a.pos);
            s.extend_from_slice(&a.vel);
        }
        if let Some(o) = self.state.object {
            s.extend_from_slice(&o.pos);
            s.extend_from_slice(&o.vel);
        }
        s
    }
}
