//! TD3 agent with a privileged critic, its replay buffer, the supervised
//! warm start, and the supervised-regression baseline policy.
//!
//! The asymmetry is the point: critics consume the ground-truth pose error
//! (known during training), while the actor consumes only the sensor
//! observation. The actor is therefore trained toward the action that
//! maximizes expected value given what the sensors can actually see.

use crate::env::{Action, EnvParams, ErrorRange, InsertionEnv, Policy, Transition};
use crate::geometry::{PoseError, Vec2, SCALAR_ERROR_DEG_WEIGHT};
use crate::nn::{adam_step, soft_update, AdamState, Gradients, Mlp, NnError, OutputActivation};
use crate::util::{fmt_f64, rng_state_from_line, rng_state_line};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("observation dimension {got} does not match the actor input {expected}")]
    ObsDim { expected: usize, got: usize },
    #[error("replay buffer holds {len} transitions, need {need}")]
    BufferTooSmall { len: usize, need: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Uniform-sampling ring buffer of privileged transitions.
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer { data: Vec::new(), capacity, next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    pub fn sample_index(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(0..self.data.len())
    }

    pub fn clear(&mut self) {
        self.data.clear();
        self.next = 0;
    }
}

/// TD3 hyperparameters. Values not fixed by the experiment protocol are
/// desk-scale defaults, all overridable through the run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Td3Hyper {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Target smoothing noise, in normalized action units.
    pub target_noise: f64,
    /// Clip for the smoothing noise, in normalized action units.
    pub target_noise_clip: f64,
    /// Exploration noise in mm (translation axes) and degrees (yaw).
    pub exploration_noise_mm: f64,
    pub exploration_noise_deg: f64,
    pub batch_size: usize,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub replay_capacity: usize,
    /// Actor stays frozen for this many episodes of RL training.
    pub freeze_episodes: u64,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
}

impl Default for Td3Hyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            exploration_noise_mm: 0.4,
            exploration_noise_deg: 0.4,
            batch_size: 64,
            critic_lr: 1e-3,
            actor_lr: 2e-4,
            replay_capacity: 100_000,
            freeze_episodes: 50,
            actor_hidden: 128,
            critic_hidden: 64,
        }
    }
}

/// Normalization constants for the critic input: privileged error over its
/// divergence bounds, action over its clamp bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct CriticNorm {
    err_mm: f64,
    err_deg: f64,
    act_mm: f64,
    act_deg: f64,
}

/// Per-update loss report.
#[derive(Clone, Copy, Debug)]
pub struct Td3Losses {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: Option<f64>,
}

/// Twin-delayed DDPG agent with a privileged critic.
pub struct Td3Agent {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target_actor: Mlp,
    pub target_critic1: Mlp,
    pub target_critic2: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    pub hyper: Td3Hyper,
    norm: CriticNorm,
    bounds: (f64, f64),
    update_calls: u64,
    episodes_done: u64,
}

impl Td3Agent {
    /// Builds a fresh agent for observations of `obs_dim` entries.
    pub fn new(obs_dim: usize, hyper: Td3Hyper, params: &EnvParams, rng: &mut ChaCha8Rng) -> Self {
        let bounds = (params.action_bound_mm, params.action_bound_deg);
        let bound_vec = vec![bounds.0, bounds.0, bounds.1];
        let h = hyper.actor_hidden;
        let c = hyper.critic_hidden;
        let actor = Mlp::new(&[obs_dim, h, h, 3], OutputActivation::TanhScaled(bound_vec), rng);
        let critic1 = Mlp::new(&[6, c, c, 1], OutputActivation::Identity, rng);
        let critic2 = Mlp::new(&[6, c, c, 1], OutputActivation::Identity, rng);
        let target_actor = actor.clone();
        let target_critic1 = critic1.clone();
        let target_critic2 = critic2.clone();
        let actor_opt = AdamState::new(&actor, hyper.actor_lr);
        let critic1_opt = AdamState::new(&critic1, hyper.critic_lr);
        let critic2_opt = AdamState::new(&critic2, hyper.critic_lr);
        Td3Agent {
            actor,
            critic1,
            critic2,
            target_actor,
            target_critic1,
            target_critic2,
            actor_opt,
            critic1_opt,
            critic2_opt,
            hyper,
            norm: CriticNorm {
                err_mm: params.diverge_translation_mm,
                err_deg: params.diverge_rotation_deg,
                act_mm: params.action_bound_mm,
                act_deg: params.action_bound_deg,
            },
            bounds,
            update_calls: 0,
            episodes_done: 0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    /// The actor stays frozen for the first `freeze_episodes` episodes and,
    /// additionally, until the replay buffer holds a critic-warmup's worth
    /// of data; early curriculum episodes are often a single transition, so
    /// an episode count alone could unfreeze against a cold critic.
    pub fn actor_frozen(&self, buffer_len: usize) -> bool {
        self.episodes_done < self.hyper.freeze_episodes
            || buffer_len < self.hyper.batch_size * 4
    }

    /// The training loop reports each finished episode; the actor unfreezes
    /// once enough episodes have passed.
    pub fn note_episode_end(&mut self) {
        self.episodes_done += 1;
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn update_calls(&self) -> u64 {
        self.update_calls
    }

    /// Re-initializes both critics, their targets, and their optimizer
    /// state. Used when the environment's success semantics change (new
    /// walls): the value function is stage-specific even though the policy
    /// transfers.
    pub fn reset_critics(&mut self, rng: &mut ChaCha8Rng) {
        let c = self.hyper.critic_hidden;
        self.critic1 = Mlp::new(&[6, c, c, 1], OutputActivation::Identity, rng);
        self.critic2 = Mlp::new(&[6, c, c, 1], OutputActivation::Identity, rng);
        self.target_critic1 = self.critic1.clone();
        self.target_critic2 = self.critic2.clone();
        self.critic1_opt = AdamState::new(&self.critic1, self.hyper.critic_lr);
        self.critic2_opt = AdamState::new(&self.critic2, self.hyper.critic_lr);
    }

    fn critic_input(&self, error: &PoseError, action: &Action) -> [f64; 6] {
        [
            error.ex / self.norm.err_mm,
            error.ey / self.norm.err_mm,
            error.etheta / self.norm.err_deg,
            action.dx / self.norm.act_mm,
            action.dy / self.norm.act_mm,
            action.dtheta / self.norm.act_deg,
        ]
    }

    /// Deterministic actor action, with optional Gaussian exploration noise.
    pub fn select_action(
        &self,
        obs: &[f64],
        explore: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Action, AgentError> {
        if obs.len() != self.obs_dim() {
            return Err(AgentError::ObsDim { expected: self.obs_dim(), got: obs.len() });
        }
        let out = self.actor.forward(obs);
        let mut action = Action::new(out[0], out[1], out[2]);
        if explore {
            let n_mm = Normal::new(0.0, self.hyper.exploration_noise_mm).unwrap();
            let n_deg = Normal::new(0.0, self.hyper.exploration_noise_deg).unwrap();
            action.dx += n_mm.sample(rng);
            action.dy += n_mm.sample(rng);
            action.dtheta += n_deg.sample(rng);
        }
        Ok(action.clamped(self.bounds.0, self.bounds.1))
    }

    /// Clipped double-Q target for one transition: the smoothed target action
    /// comes from the target actor on the next observation, the value from
    /// the minimum of the two target critics on the privileged next error.
    /// Returns (y, q1_target, q2_target).
    pub fn critic_target(&self, t: &Transition, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
        if t.done {
            return (t.reward, t.reward, t.reward);
        }
        let raw = self.target_actor.forward(&t.next_obs);
        let noise = Normal::new(0.0, self.hyper.target_noise).unwrap();
        let clip = self.hyper.target_noise_clip;
        let scale = [self.bounds.0, self.bounds.0, self.bounds.1];
        let mut a = [0.0; 3];
        for i in 0..3 {
            let n = noise.sample(rng).clamp(-clip, clip) * scale[i];
            a[i] = (raw[i] + n).clamp(-scale[i], scale[i]);
        }
        let a = Action::new(a[0], a[1], a[2]);
        let input = self.critic_input(&t.next_true_error, &a);
        let q1 = self.target_critic1.forward(&input)[0];
        let q2 = self.target_critic2.forward(&input)[0];
        let q = q1.min(q2);
        (t.reward + self.hyper.gamma * q, t.reward + self.hyper.gamma * q1, t.reward + self.hyper.gamma * q2)
    }

    /// One TD3 update: both critics on a uniform minibatch, the actor and all
    /// targets every `policy_delay` calls (actor only once unfrozen).
    pub fn update(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut ChaCha8Rng,
    ) -> Result<Td3Losses, AgentError> {
        let batch = self.hyper.batch_size;
        if buffer.len() < batch {
            return Err(AgentError::BufferTooSmall { len: buffer.len(), need: batch });
        }
        let idx: Vec<usize> = (0..batch).map(|_| buffer.sample_index(rng)).collect();
        let targets: Vec<f64> = idx
            .iter()
            .map(|&i| self.critic_target(buffer.get(i), rng).0)
            .collect();

        let mut critic_losses = [0.0; 2];
        for (ci, critic, opt) in [
            (0, &mut self.critic1, &mut self.critic1_opt),
            (1, &mut self.critic2, &mut self.critic2_opt),
        ] {
            let mut grads = Gradients::zeros_like(critic);
            let mut loss = 0.0;
            for (&i, &y) in idx.iter().zip(&targets) {
                let t = buffer.get(i);
                let input = [
                    t.true_error.ex / self.norm.err_mm,
                    t.true_error.ey / self.norm.err_mm,
                    t.true_error.etheta / self.norm.err_deg,
                    t.action.dx / self.norm.act_mm,
                    t.action.dy / self.norm.act_mm,
                    t.action.dtheta / self.norm.act_deg,
                ];
                let (out, cache) = critic.forward_cached(&input)?;
                let err = out[0] - y;
                loss += err * err / batch as f64;
                let (g, _) = critic.backward(&cache, &[2.0 * err / batch as f64])?;
                grads.add(&g);
            }
            adam_step(critic, &grads, opt);
            critic_losses[ci] = loss;
        }

        self.update_calls += 1;
        let mut actor_loss = None;
        if self.update_calls % self.hyper.policy_delay == 0 {
            soft_update(&mut self.target_critic1, &self.critic1, self.hyper.tau)?;
            soft_update(&mut self.target_critic2, &self.critic2, self.hyper.tau)?;
            if !self.actor_frozen(buffer.len()) {
                let mut grads = Gradients::zeros_like(&self.actor);
                let mut loss = 0.0;
                for &i in &idx {
                    let t = buffer.get(i);
                    let (out, cache) = self.actor.forward_cached(&t.obs)?;
                    let a = Action::new(out[0], out[1], out[2]);
                    let input = self.critic_input(&t.true_error, &a);
                    let (q, qcache) = self.critic1.forward_cached(&input)?;
                    loss -= q[0] / batch as f64;
                    let (_, dq_dinput) = self.critic1.backward(&qcache, &[1.0])?;
                    // The critic consumed the normalized action; undo the
                    // scaling to get the gradient w.r.t. the raw action.
                    let dq_da = [
                        dq_dinput[3] / self.norm.act_mm,
                        dq_dinput[4] / self.norm.act_mm,
                        dq_dinput[5] / self.norm.act_deg,
                    ];
                    let out_grad: Vec<f64> =
                        dq_da.iter().map(|g| -g / batch as f64).collect();
                    let (ga, _) = self.actor.backward(&cache, &out_grad)?;
                    grads.add(&ga);
                }
                adam_step(&mut self.actor, &grads, &mut self.actor_opt);
                soft_update(&mut self.target_actor, &self.actor, self.hyper.tau)?;
                actor_loss = Some(loss);
            }
        }
        debug_assert!(self.actor.all_finite() && self.critic1.all_finite());
        Ok(Td3Losses { critic1: critic_losses[0], critic2: critic_losses[1], actor: actor_loss })
    }

    /// Serializes the agent (all six networks, hyperparameters, bounds) plus
    /// the provided training RNG state into a versioned text document.
    pub fn to_document(&self, rng: &ChaCha8Rng) -> String {
        let mut s = String::new();
        s.push_str("td3 v1\n");
        s.push_str(&format!("hyper {}\n", serde_json::to_string(&self.hyper).unwrap()));
        s.push_str(&format!("norm {}\n", serde_json::to_string(&self.norm).unwrap()));
        s.push_str(&format!("bounds {} {}\n", fmt_f64(self.bounds.0), fmt_f64(self.bounds.1)));
        s.push_str(&format!("counters {} {}\n", self.update_calls, self.episodes_done));
        s.push_str(&format!("rng {}\n", rng_state_line(rng)));
        for (name, net) in [
            ("actor", &self.actor),
            ("critic1", &self.critic1),
            ("critic2", &self.critic2),
            ("target_actor", &self.target_actor),
            ("target_critic1", &self.target_critic1),
            ("target_critic2", &self.target_critic2),
        ] {
            s.push_str(&format!("network {name}\n"));
            s.push_str(&net.to_document());
        }
        s
    }

    /// Restores an agent (and the saved RNG state) from `to_document` output.
    pub fn from_document(doc: &str) -> Result<(Td3Agent, ChaCha8Rng), AgentError> {
        let bad = |m: &str| AgentError::Checkpoint(m.to_string());
        let mut lines = doc.lines().peekable();
        if lines.next() != Some("td3 v1") {
            return Err(bad("missing 'td3 v1' header"));
        }
        let hyper_line = lines.next().ok_or_else(|| bad("missing hyper"))?;
        let hyper: Td3Hyper = serde_json::from_str(
            hyper_line.strip_prefix("hyper ").ok_or_else(|| bad("expected hyper"))?,
        )
        .map_err(|e| bad(&format!("hyper: {e}")))?;
        let norm_line = lines.next().ok_or_else(|| bad("missing norm"))?;
        let norm: CriticNorm = serde_json::from_str(
            norm_line.strip_prefix("norm ").ok_or_else(|| bad("expected norm"))?,
        )
        .map_err(|e| bad(&format!("norm: {e}")))?;
        let bounds_line = lines.next().ok_or_else(|| bad("missing bounds"))?;
        let mut it = bounds_line
            .strip_prefix("bounds ")
            .ok_or_else(|| bad("expected bounds"))?
            .split_whitespace();
        let b0: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad bounds"))?;
        let b1: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad bounds"))?;
        let counters_line = lines.next().ok_or_else(|| bad("missing counters"))?;
        let mut it = counters_line
            .strip_prefix("counters ")
            .ok_or_else(|| bad("expected counters"))?
            .split_whitespace();
        let update_calls: u64 =
            it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad counters"))?;
        let episodes_done: u64 =
            it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad counters"))?;
        let rng_line = lines.next().ok_or_else(|| bad("missing rng"))?;
        let rng = rng_state_from_line(
            rng_line.strip_prefix("rng ").ok_or_else(|| bad("expected rng"))?,
        )
        .ok_or_else(|| bad("bad rng state"))?;

        let mut nets: Vec<(String, Mlp)> = Vec::new();
        while let Some(line) = lines.next() {
            let name = line
                .strip_prefix("network ")
                .ok_or_else(|| bad("expected network section"))?
                .to_string();
            let mut body = String::new();
            for l in lines.by_ref() {
                body.push_str(l);
                body.push('\n');
                if l == "end" {
                    break;
                }
            }
            nets.push((name, Mlp::from_document(&body)?));
        }
        let mut take = |name: &str| -> Result<Mlp, AgentError> {
            let pos = nets
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| bad(&format!("missing network {name}")))?;
            Ok(nets.remove(pos).1)
        };
        let actor = take("actor")?;
        let critic1 = take("critic1")?;
        let critic2 = take("critic2")?;
        let target_actor = take("target_actor")?;
        let target_critic1 = take("target_critic1")?;
        let target_critic2 = take("target_critic2")?;
        let actor_opt = AdamState::new(&actor, hyper.actor_lr);
        let critic1_opt = AdamState::new(&critic1, hyper.critic_lr);
        let critic2_opt = AdamState::new(&critic2, hyper.critic_lr);
        Ok((
            Td3Agent {
                actor,
                critic1,
                critic2,
                target_actor,
                target_critic1,
                target_critic2,
                actor_opt,
                critic1_opt,
                critic2_opt,
                hyper,
                norm,
                bounds: (b0, b1),
                update_calls,
                episodes_done,
            },
            rng,
        ))
    }
}

/// Deterministic evaluation wrapper around a TD3 agent.
pub struct GreedyTd3<'a>(pub &'a Td3Agent);

impl Policy for GreedyTd3<'_> {
    fn act(&mut self, obs: &[f64], _privileged: &PoseError, rng: &mut ChaCha8Rng) -> Action {
        self.0.select_action(obs, false, rng).expect("observation dimension")
    }
}

/// Report from the supervised warm start of the actor.
#[derive(Clone, Copy, Debug)]
pub struct BootstrapReport {
    pub dataset_size: usize,
    pub epochs: usize,
    pub final_mse: f64,
}

/// Collects `n` transitions under a uniform random policy in `env` (the
/// first curriculum environment) and regresses the actor toward the clamped
/// corrective action `-true_error`, stopping at `target_mse` or
/// `max_epochs`. Critics are untouched.
pub fn bootstrap_actor(
    agent: &mut Td3Agent,
    env: &InsertionEnv,
    n: usize,
    target_mse: f64,
    max_epochs: usize,
    rng: &mut ChaCha8Rng,
) -> BootstrapReport {
    let params = env.params;
    let mut env = env.clone();
    let mut data: Vec<(Vec<f64>, [f64; 3])> = Vec::with_capacity(n);
    let mut episode = 0usize;
    while data.len() < n {
        if episode % params.grasp_refresh_episodes == 0 {
            let g = params.grasp_offset_mm;
            env.set_grasp_offset(Vec2::new(
                rng.random_range(-g..=g),
                rng.random_range(-g..=g),
            ));
        }
        episode += 1;
        let (mut state, mut obs, _) = env.reset(ErrorRange::Train, rng);
        while !state.done && data.len() < n {
            let e = state.true_error;
            let target = Action::new(-e.ex, -e.ey, -e.etheta)
                .clamped(params.action_bound_mm, params.action_bound_deg);
            data.push((obs.clone(), target.as_array()));
            let action = Action::new(
                rng.random_range(-params.action_bound_mm..=params.action_bound_mm),
                rng.random_range(-params.action_bound_mm..=params.action_bound_mm),
                rng.random_range(-params.action_bound_deg..=params.action_bound_deg),
            );
            let out = env.step(&mut state, action, rng).expect("running episode");
            obs = out.obs;
        }
    }

    let mut opt = AdamState::new(&agent.actor, 1e-3);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    let minibatch = 32;
    let mut final_mse = f64::INFINITY;
    let mut epochs = 0;
    for _ in 0..max_epochs {
        epochs += 1;
        indices.shuffle(rng);
        for chunk in indices.chunks(minibatch) {
            let mut grads = Gradients::zeros_like(&agent.actor);
            for &i in chunk {
                let (obs, target) = &data[i];
                let (out, cache) = agent.actor.forward_cached(obs).expect("obs dim");
                let g: Vec<f64> = out
                    .iter()
                    .zip(target)
                    .map(|(y, t)| 2.0 * (y - t) / chunk.len() as f64)
                    .collect();
                let (ga, _) = agent.actor.backward(&cache, &g).expect("grad shapes");
                grads.add(&ga);
            }
            adam_step(&mut agent.actor, &grads, &mut opt);
        }
        let mut mse = 0.0;
        for (obs, target) in &data {
            let out = agent.actor.forward(obs);
            mse += out
                .iter()
                .zip(target)
                .map(|(y, t)| (y - t) * (y - t))
                .sum::<f64>()
                / 3.0;
        }
        final_mse = mse / data.len() as f64;
        if final_mse < target_mse {
            break;
        }
    }
    agent.target_actor = agent.actor.clone();
    BootstrapReport { dataset_size: data.len(), epochs, final_mse }
}

/// Supervised-regression baseline: estimates the pose error from one
/// observation and acts with the opposite of the estimate.
pub struct SlAgent {
    pub net: Mlp,
    pub lambda: f64,
    bounds: (f64, f64),
}

impl SlAgent {
    /// Fits the regressor on (observation, true error) pairs with an MSE
    /// loss. The yaw target is scaled by `lambda` (mm per degree) so the
    /// three output channels share one loss scale.
    pub fn fit(
        dataset: &[(Vec<f64>, PoseError)],
        hidden: usize,
        epochs: usize,
        params: &EnvParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<SlAgent, AgentError> {
        if dataset.is_empty() {
            return Err(AgentError::EmptyDataset);
        }
        let lambda = SCALAR_ERROR_DEG_WEIGHT;
        let obs_dim = dataset[0].0.len();
        let mut net = Mlp::new(&[obs_dim, hidden, hidden, 3], OutputActivation::Identity, rng);
        let mut opt = AdamState::new(&net, 1e-3);
        let mut indices: Vec<usize> = (0..dataset.len()).collect();
        for _ in 0..epochs {
            indices.shuffle(rng);
            for chunk in indices.chunks(64) {
                let mut grads = Gradients::zeros_like(&net);
                for &i in chunk {
                    let (obs, e) = &dataset[i];
                    let target = [e.ex, e.ey, lambda * e.etheta];
                    let (out, cache) = net.forward_cached(obs)?;
                    let g: Vec<f64> = out
                        .iter()
                        .zip(&target)
                        .map(|(y, t)| 2.0 * (y - t) / chunk.len() as f64)
                        .collect();
                    let (gn, _) = net.backward(&cache, &g)?;
                    grads.add(&gn);
                }
                adam_step(&mut net, &grads, &mut opt);
            }
        }
        Ok(SlAgent {
            net,
            lambda,
            bounds: (params.action_bound_mm, params.action_bound_deg),
        })
    }

    /// Pose-error estimate (ex mm, ey mm, etheta deg) for one observation.
    pub fn estimate(&self, obs: &[f64]) -> PoseError {
        let out = self.net.forward(obs);
        PoseError::new(out[0], out[1], out[2] / self.lambda)
    }

    /// Greedy corrective action: the clamped opposite of the estimate.
    pub fn act(&self, obs: &[f64]) -> Action {
        let e = self.estimate(obs);
        Action::new(-e.ex, -e.ey, -e.etheta).clamped(self.bounds.0, self.bounds.1)
    }

    pub fn to_document(&self) -> String {
        let mut s = String::new();
        s.push_str("sl v1\n");
        s.push_str(&format!(
            "lambda {}\nbounds {} {}\n",
            fmt_f64(self.lambda),
            fmt_f64(self.bounds.0),
            fmt_f64(self.bounds.1)
        ));
        s.push_str(&self.net.to_document());
        s
    }

    pub fn from_document(doc: &str) -> Result<SlAgent, AgentError> {
        let bad = |m: &str| AgentError::Checkpoint(m.to_string());
        let mut lines = doc.lines();
        if lines.next() != Some("sl v1") {
            return Err(bad("missing 'sl v1' header"));
        }
        let lambda: f64 = lines
            .next()
            .and_then(|l| l.strip_prefix("lambda "))
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad lambda"))?;
        let bounds_line = lines.next().ok_or_else(|| bad("missing bounds"))?;
        let mut it = bounds_line
            .strip_prefix("bounds ")
            .ok_or_else(|| bad("expected bounds"))?
            .split_whitespace();
        let b0: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad bounds"))?;
        let b1: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad bounds"))?;
        let rest: String = lines.map(|l| format!("{l}\n")).collect();
        let net = Mlp::from_document(&rest)?;
        Ok(SlAgent { net, lambda, bounds: (b0, b1) })
    }
}

impl Policy for SlAgent {
    fn act(&mut self, obs: &[f64], _privileged: &PoseError, _rng: &mut ChaCha8Rng) -> Action {
        SlAgent::act(self, obs)
    }
}
