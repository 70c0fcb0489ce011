//! End-to-end training pipelines for the five policies, the checkpoint file
//! format, and checkpoint-driven evaluation.
//!
//! Policy lineup:
//!
//! * `rl-star`  — TD3 + curriculum + tactile flow (the reference policy).
//! * `rl-flat`  — same agent trained only in the hole environment.
//! * `rl-rgb`   — curriculum TD3 on the RGB-proxy representation.
//! * `rl-ft`    — TD3 on wrench observations, trained flat in the hole with
//!   a smaller actor.
//! * `sl`       — supervised regression on the transitions harvested from
//!   the `rl-star` training run, acting with the opposite of its estimate.
//!
//! Every pipeline is a pure function of (config, seed): RNG streams are
//! derived per purpose, so retraining with the same inputs reproduces the
//! checkpoint byte for byte.

use crate::agent::{bootstrap_actor, AgentError, GreedyTd3, ReplayBuffer, SlAgent, Td3Agent};
use crate::config::RunConfig;
use crate::curriculum::{run_curriculum, run_flat, TrainSetup, TrainingLog};
use crate::env::{InsertionEnv, ObjectSpec, Policy};
use crate::eval::{evaluate, novel_objects, training_objects, EvalConfig, EvalEpisodeRecord, Metrics};
use crate::geometry::{EnvKind, PoseError};
use crate::sensors::Representation;
use crate::util::{derive_rng, hash_str};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown policy '{0}' (expected rl-star, rl-flat, rl-rgb, rl-ft or sl)")]
    UnknownPolicy(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// The five trainable policies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    RlStar,
    RlFlat,
    RlRgb,
    RlFt,
    Sl,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::RlStar,
        PolicyKind::RlFlat,
        PolicyKind::RlRgb,
        PolicyKind::RlFt,
        PolicyKind::Sl,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::RlStar => "rl-star",
            PolicyKind::RlFlat => "rl-flat",
            PolicyKind::RlRgb => "rl-rgb",
            PolicyKind::RlFt => "rl-ft",
            PolicyKind::Sl => "sl",
        }
    }

    pub fn parse(s: &str) -> Result<PolicyKind, PipelineError> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| PipelineError::UnknownPolicy(s.to_string()))
    }

    pub fn representation(self) -> Representation {
        match self {
            PolicyKind::RlRgb => Representation::RgbProxy,
            PolicyKind::RlFt => Representation::Wrench,
            _ => Representation::Flow,
        }
    }
}

/// Result of one training run.
pub struct TrainOutput {
    pub kind: PolicyKind,
    pub checkpoint: String,
    pub training_log: TrainingLog,
    pub bootstrap_mse: f64,
}

fn setup_for(cfg: &RunConfig, representation: Representation) -> TrainSetup {
    TrainSetup {
        objects: training_objects(&cfg.objects),
        representation,
        params: cfg.env,
        gains: cfg.gains,
        schedule: cfg.schedule.clone(),
    }
}

fn line_wall_env(cfg: &RunConfig, representation: Representation) -> InsertionEnv {
    let objects = training_objects(&cfg.objects);
    InsertionEnv::new(
        objects[0].clone(),
        EnvKind::LineWall,
        representation,
        cfg.env,
        cfg.gains,
    )
    .expect("default objects are valid")
}

fn fresh_agent(
    cfg: &RunConfig,
    kind: PolicyKind,
    rng: &mut ChaCha8Rng,
) -> Td3Agent {
    let repr = kind.representation();
    let mut hyper = cfg.agent.clone();
    if kind == PolicyKind::RlFt {
        hyper.actor_hidden = cfg.extras.ft_hidden;
    }
    Td3Agent::new(repr.dim(), hyper, &cfg.env, rng)
}

struct RlRun {
    agent: Td3Agent,
    run: crate::curriculum::TrainRun,
    rng: ChaCha8Rng,
    bootstrap_mse: f64,
}

/// Bootstraps and trains one TD3 pipeline. The RNG stream is derived from
/// (seed, pipeline label), so `sl` can regenerate the exact `rl-star` run.
fn run_rl_pipeline(cfg: &RunConfig, kind: PolicyKind, seed: u64) -> Result<RlRun, PipelineError> {
    let repr = kind.representation();
    let mut rng = derive_rng(seed, &[hash_str(kind.label())]);
    let mut agent = fresh_agent(cfg, kind, &mut rng);
    let line = line_wall_env(cfg, repr);
    let report = bootstrap_actor(
        &mut agent,
        &line,
        cfg.extras.bootstrap_points,
        cfg.extras.bootstrap_target_mse,
        cfg.extras.bootstrap_max_epochs,
        &mut rng,
    );
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity);
    let setup = setup_for(cfg, repr);
    let run = match kind {
        PolicyKind::RlStar | PolicyKind::RlRgb => {
            run_curriculum(&mut agent, &mut buffer, &setup, &mut rng)?
        }
        PolicyKind::RlFlat | PolicyKind::RlFt => {
            run_flat(&mut agent, &mut buffer, &setup, &mut rng)?
        }
        PolicyKind::Sl => unreachable!("sl is not an RL pipeline"),
    };
    Ok(RlRun { agent, run, rng, bootstrap_mse: report.final_mse })
}

fn checkpoint_text(kind: PolicyKind, body: &str) -> String {
    format!(
        "tactile-insertion checkpoint v1\npolicy {}\nrepresentation {}\n{}",
        kind.label(),
        kind.representation().label(),
        body
    )
}

/// Trains one policy end to end and packages its checkpoint.
pub fn train_policy(cfg: &RunConfig, kind: PolicyKind, seed: u64) -> Result<TrainOutput, PipelineError> {
    match kind {
        PolicyKind::Sl => {
            // The SL baseline reuses the data saved during RL training: it
            // regenerates the rl-star run and fits on every (observation,
            // true error) pair that run produced.
            let star = run_rl_pipeline(cfg, PolicyKind::RlStar, seed)?;
            let mut rng = derive_rng(seed, &[hash_str("sl-fit")]);
            let sl = SlAgent::fit(
                &star.run.dataset,
                cfg.agent.actor_hidden,
                cfg.extras.sl_epochs,
                &cfg.env,
                &mut rng,
            )?;
            Ok(TrainOutput {
                kind,
                checkpoint: checkpoint_text(kind, &sl.to_document()),
                training_log: star.run.log,
                bootstrap_mse: star.bootstrap_mse,
            })
        }
        _ => {
            let run = run_rl_pipeline(cfg, kind, seed)?;
            Ok(TrainOutput {
                kind,
                checkpoint: checkpoint_text(kind, &run.agent.to_document(&run.rng)),
                training_log: run.run.log,
                bootstrap_mse: run.bootstrap_mse,
            })
        }
    }
}

/// A checkpoint loaded back into memory.
pub struct LoadedPolicy {
    pub kind: PolicyKind,
    pub representation: Representation,
    agent: LoadedAgent,
}

enum LoadedAgent {
    Td3(Box<Td3Agent>),
    Sl(SlAgent),
}

/// Evaluation adapter over a loaded checkpoint.
pub enum CheckpointPolicy<'a> {
    Td3(GreedyTd3<'a>),
    Sl(&'a SlAgent),
}

impl Policy for CheckpointPolicy<'_> {
    fn act(
        &mut self,
        obs: &[f64],
        privileged: &PoseError,
        rng: &mut ChaCha8Rng,
    ) -> crate::env::Action {
        match self {
            CheckpointPolicy::Td3(p) => p.act(obs, privileged, rng),
            CheckpointPolicy::Sl(sl) => sl.act(obs),
        }
    }
}

impl LoadedPolicy {
    pub fn parse(text: &str) -> Result<LoadedPolicy, PipelineError> {
        let bad = |m: &str| PipelineError::Checkpoint(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("tactile-insertion checkpoint v1") {
            return Err(bad("missing checkpoint header"));
        }
        let kind = lines
            .next()
            .and_then(|l| l.strip_prefix("policy "))
            .ok_or_else(|| bad("missing policy line"))?;
        let kind = PolicyKind::parse(kind)?;
        let repr_label = lines
            .next()
            .and_then(|l| l.strip_prefix("representation "))
            .ok_or_else(|| bad("missing representation line"))?;
        let representation = match repr_label {
            "flow" => Representation::Flow,
            "rgb-proxy" => Representation::RgbProxy,
            "wrench" => Representation::Wrench,
            other => return Err(bad(&format!("unknown representation '{other}'"))),
        };
        let body: String = lines.map(|l| format!("{l}\n")).collect();
        let agent = if kind == PolicyKind::Sl {
            LoadedAgent::Sl(SlAgent::from_document(&body)?)
        } else {
            let (agent, _rng) = Td3Agent::from_document(&body)?;
            LoadedAgent::Td3(Box::new(agent))
        };
        Ok(LoadedPolicy { kind, representation, agent })
    }

    pub fn policy(&self) -> CheckpointPolicy<'_> {
        match &self.agent {
            LoadedAgent::Td3(a) => CheckpointPolicy::Td3(GreedyTd3(a)),
            LoadedAgent::Sl(sl) => CheckpointPolicy::Sl(sl),
        }
    }
}

/// Which object set an evaluation covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectSet {
    Train,
    Novel,
    All,
}

impl ObjectSet {
    pub fn parse(s: &str) -> Option<ObjectSet> {
        match s {
            "train" => Some(ObjectSet::Train),
            "novel" => Some(ObjectSet::Novel),
            "all" => Some(ObjectSet::All),
            _ => None,
        }
    }

    pub fn objects(self, cfg: &RunConfig) -> Vec<ObjectSpec> {
        let mut out = Vec::new();
        if matches!(self, ObjectSet::Train | ObjectSet::All) {
            out.extend(training_objects(&cfg.objects));
        }
        if matches!(self, ObjectSet::Novel | ObjectSet::All) {
            out.extend(novel_objects());
        }
        out
    }
}

/// Full evaluation result for one checkpoint.
pub struct EvalOutput {
    pub metrics: Vec<Metrics>,
    pub records: Vec<EvalEpisodeRecord>,
    pub logs: Vec<crate::env::EpisodeLog>,
}

/// Evaluates a loaded checkpoint over an object set under the standard
/// protocol.
pub fn evaluate_policy(
    loaded: &LoadedPolicy,
    set: ObjectSet,
    cfg: &RunConfig,
    seed: u64,
) -> EvalOutput {
    let objects = set.objects(cfg);
    let eval_cfg = EvalConfig { trials: cfg.eval_trials, seed, env: EnvKind::Hole };
    let mut metrics = Vec::new();
    let mut records = Vec::new();
    let mut logs = Vec::new();
    for object in &objects {
        let mut policy = loaded.policy();
        let (m, r, l) = evaluate(
            &mut policy,
            loaded.kind.label(),
            object,
            loaded.representation,
            &eval_cfg,
            &cfg.env,
            &cfg.gains,
        );
        metrics.push(m);
        records.extend(r);
        logs.extend(l);
    }
    EvalOutput { metrics, records, logs }
}

/// Trains TD3 on a single (object, environment) pair; the learnability
/// smoke-test configuration.
pub fn train_single_env(
    cfg: &RunConfig,
    object: &ObjectSpec,
    env_kind: EnvKind,
    episodes: usize,
    seed: u64,
) -> Result<Td3Agent, PipelineError> {
    let mut rng = derive_rng(seed, &[hash_str("single-env"), hash_str(object.name.as_str())]);
    let mut agent = Td3Agent::new(Representation::Flow.dim(), cfg.agent.clone(), &cfg.env, &mut rng);
    let line = InsertionEnv::new(
        object.clone(),
        EnvKind::LineWall,
        Representation::Flow,
        cfg.env,
        cfg.gains,
    )
    .expect("valid object");
    bootstrap_actor(
        &mut agent,
        &line,
        cfg.extras.bootstrap_points,
        cfg.extras.bootstrap_target_mse,
        cfg.extras.bootstrap_max_epochs,
        &mut rng,
    );
    let mut env = InsertionEnv::new(
        object.clone(),
        env_kind,
        Representation::Flow,
        cfg.env,
        cfg.gains,
    )
    .expect("valid object");
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity);
    for episode in 0..episodes {
        if episode % cfg.env.grasp_refresh_episodes == 0 {
            let g = cfg.env.grasp_offset_mm;
            env.set_grasp_offset(crate::geometry::Vec2::new(
                rand::Rng::random_range(&mut rng, -g..=g),
                rand::Rng::random_range(&mut rng, -g..=g),
            ));
        }
        let (mut state, mut obs, _) = env.reset(crate::env::ErrorRange::Train, &mut rng);
        while !state.done {
            let action = agent.select_action(&obs, true, &mut rng)?;
            let pre = state.true_error;
            let out = env.step(&mut state, action, &mut rng).expect("running");
            buffer.push(crate::env::Transition {
                obs: std::mem::take(&mut obs),
                action: out.applied,
                reward: out.reward,
                next_obs: out.obs.clone(),
                done: state.done,
                true_error: pre,
                next_true_error: state.true_error,
            });
            obs = out.obs;
            match agent.update(&buffer, &mut rng) {
                Ok(_) | Err(AgentError::BufferTooSmall { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        agent.note_episode_end();
    }
    Ok(agent)
}
