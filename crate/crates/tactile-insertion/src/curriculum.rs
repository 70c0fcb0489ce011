//! Stage scheduler over environments and objects, with a reward-convergence
//! stopping rule and a hard transition budget; also runs the no-curriculum
//! ablation.
//!
//! The default schedule walks line wall -> corner wall -> U wall -> hole,
//! unlocking objects one at a time inside the line-wall stage. A stage ends
//! when the rolling reward statistics converge or its episode cap is
//! reached. The whole run consumes exactly `transition_cap` environment
//! transitions: if the staged phase ends under budget, training continues in
//! the final (hole) configuration so the curriculum and flat ablation always
//! compare at the same data budget.

use crate::agent::{AgentError, ReplayBuffer, Td3Agent};
use crate::env::{
    EnvParams, ErrorRange, InsertionEnv, ObjectSpec, Outcome, Transition,
};
use crate::geometry::{EnvKind, GeometryError, Vec2};
use crate::sensors::{Representation, SensorGains};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One curriculum stage: an environment and an episode budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub env: EnvKind,
    pub max_episodes: usize,
}

/// The full training schedule, thresholds included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub stages: Vec<StageSpec>,
    /// Rolling window for the convergence test.
    pub window: usize,
    /// Reward mean threshold (converged when mean >= this).
    pub reward_mean_threshold: f64,
    /// Reward standard-deviation threshold (converged when std <= this).
    pub reward_std_threshold: f64,
    /// Hard cap on environment transitions for the whole run.
    pub transition_cap: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            stages: vec![
                StageSpec { env: EnvKind::LineWall, max_episodes: 100 },
                StageSpec { env: EnvKind::CornerWall, max_episodes: 25 },
                StageSpec { env: EnvKind::UWall, max_episodes: 150 },
                StageSpec { env: EnvKind::Hole, max_episodes: 300 },
            ],
            window: 30,
            reward_mean_threshold: 2.0,
            reward_std_threshold: 6.0,
            transition_cap: 3000,
        }
    }
}

/// Convergence test over the trailing `window` episode rewards of a stage:
/// true once at least `window` episodes exist with rolling mean above the
/// mean threshold and rolling standard deviation below the std threshold.
pub fn converged(stage_rewards: &[f64], window: usize, mean_min: f64, std_max: f64) -> bool {
    if stage_rewards.len() < window {
        return false;
    }
    let tail = &stage_rewards[stage_rewards.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let var = tail.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / window as f64;
    mean >= mean_min && var.sqrt() <= std_max
}

/// Per-episode training record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub stage: EnvKind,
    pub object: String,
    pub reward_sum: f64,
    pub outcome: Outcome,
    pub attempts: usize,
    pub transitions: usize,
    pub transitions_cum: usize,
}

/// Append-only log of one training run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeSummary>,
    pub total_transitions: usize,
}

impl TrainingLog {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.episodes {
            s.push_str(&serde_json::to_string(e).unwrap());
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> serde_json::Result<TrainingLog> {
        let mut episodes = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            episodes.push(serde_json::from_str(line)?);
        }
        let total_transitions = episodes.last().map(|e: &EpisodeSummary| e.transitions_cum).unwrap_or(0);
        Ok(TrainingLog { episodes, total_transitions })
    }
}

/// Everything a training run needs besides the agent.
pub struct TrainSetup {
    pub objects: Vec<ObjectSpec>,
    pub representation: Representation,
    pub params: EnvParams,
    pub gains: SensorGains,
    pub schedule: Schedule,
}

/// A training run's artifacts: the per-episode log plus every observation
/// and privileged label seen, in order (the harvest the SL baseline trains
/// on).
pub struct TrainRun {
    pub log: TrainingLog,
    pub dataset: Vec<(Vec<f64>, crate::geometry::PoseError)>,
}

struct Runner<'a> {
    agent: &'a mut Td3Agent,
    buffer: &'a mut ReplayBuffer,
    setup: &'a TrainSetup,
    log: TrainingLog,
    dataset: Vec<(Vec<f64>, crate::geometry::PoseError)>,
    episode_index: usize,
    grasp_offset: Vec2,
}

impl<'a> Runner<'a> {
    fn budget_left(&self) -> usize {
        self.setup
            .schedule
            .transition_cap
            .saturating_sub(self.log.total_transitions)
    }

    /// Runs one training episode, feeding every transition to one TD3
    /// update, truncating when the transition budget runs out.
    fn train_episode(
        &mut self,
        env: &mut InsertionEnv,
        stage: EnvKind,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, AgentError> {
        // Re-grasp nuisance: a fresh sensor-frame offset every N episodes.
        if self.episode_index % self.setup.params.grasp_refresh_episodes == 0 {
            let g = self.setup.params.grasp_offset_mm;
            self.grasp_offset = Vec2::new(rng.random_range(-g..=g), rng.random_range(-g..=g));
        }
        env.set_grasp_offset(self.grasp_offset);
        self.episode_index += 1;

        let (mut state, mut obs, _) = env.reset(ErrorRange::Train, rng);
        let mut reward_sum = 0.0;
        let mut transitions = 0usize;
        while !state.done && self.budget_left() > 0 {
            let action = self.agent.select_action(&obs, true, rng)?;
            let pre = state.true_error;
            let out = env.step(&mut state, action, rng).expect("episode running");
            reward_sum += out.reward;
            self.dataset.push((obs.clone(), pre));
            self.buffer.push(Transition {
                obs: std::mem::take(&mut obs),
                action: out.applied,
                reward: out.reward,
                next_obs: out.obs.clone(),
                done: state.done,
                true_error: pre,
                next_true_error: state.true_error,
            });
            obs = out.obs;
            transitions += 1;
            self.log.total_transitions += 1;
            match self.agent.update(self.buffer, rng) {
                Ok(_) => {}
                Err(AgentError::BufferTooSmall { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        self.agent.note_episode_end();
        self.log.episodes.push(EpisodeSummary {
            episode: self.episode_index - 1,
            stage,
            object: env.object.name.clone(),
            reward_sum,
            outcome: state.outcome,
            attempts: state.attempts,
            transitions,
            transitions_cum: self.log.total_transitions,
        });
        Ok(reward_sum)
    }
}

fn build_envs(setup: &TrainSetup, kind: EnvKind) -> Result<Vec<InsertionEnv>, GeometryError> {
    setup
        .objects
        .iter()
        .map(|o| {
            InsertionEnv::new(
                o.clone(),
                kind,
                setup.representation,
                setup.params,
                setup.gains,
            )
        })
        .collect()
}

/// Runs the staged curriculum. The line-wall stage starts with the first
/// object only and unlocks the next one each time the convergence test
/// fires; later stages draw uniformly from the full object set. Each stage
/// ends on convergence or its episode cap, and the whole run halts once the
/// transition budget is spent, so total consumption never exceeds the cap.
pub fn run_curriculum(
    agent: &mut Td3Agent,
    buffer: &mut ReplayBuffer,
    setup: &TrainSetup,
    rng: &mut ChaCha8Rng,
) -> Result<TrainRun, AgentError> {
    let schedule = &setup.schedule;
    let mut runner = Runner {
        agent,
        buffer,
        setup,
        log: TrainingLog::default(),
        dataset: Vec::new(),
        episode_index: 0,
        grasp_offset: Vec2::default(),
    };
    let final_stage = schedule.stages.len() - 1;
    for (si, stage) in schedule.stages.iter().enumerate() {
        // Value semantics change as walls are added: a success recorded in a
        // permissive stage is a failure state in the full hole, and the
        // critic cannot tell stages apart from its (error, action) input.
        // The final stage therefore starts from a fresh replay buffer.
        if si == final_stage {
            runner.buffer.clear();
            runner.agent.reset_critics(rng);
        }
        let mut envs = build_envs(setup, stage.env).expect("training objects are valid");
        let is_first = si == 0;
        let mut unlocked = if is_first { 1 } else { envs.len() };
        let mut rewards_since_unlock: Vec<f64> = Vec::new();
        for _ in 0..stage.max_episodes {
            if runner.budget_left() == 0 {
                break;
            }
            let pick = rng.random_range(0..unlocked);
            let r = runner.train_episode(&mut envs[pick], stage.env, rng)?;
            rewards_since_unlock.push(r);
            if converged(
                &rewards_since_unlock,
                schedule.window,
                schedule.reward_mean_threshold,
                schedule.reward_std_threshold,
            ) {
                if is_first && unlocked < envs.len() {
                    unlocked += 1;
                    rewards_since_unlock.clear();
                } else {
                    break;
                }
            }
        }
        if runner.budget_left() == 0 {
            break;
        }
    }
    // Remaining budget is spent in the final stage's configuration until the
    // convergence rule fires or the cap is reached, so a run that has not
    // converged keeps training up to the same data ceiling as the ablation.
    let last = *schedule.stages.last().expect("non-empty schedule");

    let mut envs = build_envs(setup, last.env).expect("training objects are valid");
    let mut rewards: Vec<f64> = Vec::new();
    while runner.budget_left() > 0 {
        let pick = rng.random_range(0..envs.len());
        let r = runner.train_episode(&mut envs[pick], last.env, rng)?;
        rewards.push(r);
        if converged(
            &rewards,
            schedule.window,
            schedule.reward_mean_threshold,
            schedule.reward_std_threshold,
        ) {
            break;
        }
    }
    Ok(TrainRun { log: runner.log, dataset: runner.dataset })
}

/// The no-curriculum ablation: trains directly in the final environment with
/// every object until the same transition cap.
pub fn run_flat(
    agent: &mut Td3Agent,
    buffer: &mut ReplayBuffer,
    setup: &TrainSetup,
    rng: &mut ChaCha8Rng,
) -> Result<TrainRun, AgentError> {
    let last = *setup.schedule.stages.last().expect("non-empty schedule");
    let mut envs = build_envs(setup, last.env).expect("training objects are valid");
    let mut runner = Runner {
        agent,
        buffer,
        setup,
        log: TrainingLog::default(),
        dataset: Vec::new(),
        episode_index: 0,
        grasp_offset: Vec2::default(),
    };
    while runner.budget_left() > 0 {
        let pick = rng.random_range(0..envs.len());
        runner.train_episode(&mut envs[pick], last.env, rng)?;
    }
    Ok(TrainRun { log: runner.log, dataset: runner.dataset })
}
