//! Episode mechanics: error sampling, insertion attempts, reward, and
//! termination.
//!
//! An episode starts with a hidden pose error sampled uniformly in the
//! configured range. The first insertion attempt happens inside `reset`, so a
//! policy always conditions on a contact observation. Each `step` applies a
//! clamped correction in the current gripper frame, re-attempts the
//! insertion, and pays out
//!
//! ```text
//! reward = e_prev - e_new - P + alpha * R_s
//! ```
//!
//! where `e` is the scalarized pose error, `P` the per-attempt penalty, and
//! `alpha = 1` exactly when the new pose fits. Episodes end on success, on
//! divergence (any error axis beyond its hard bound, checked before the
//! attempt), or when the attempt budget is exhausted.

use crate::geometry::{
    check_insertion, scalar_error, CrossSection, EnvKind, EnvironmentSpec, GeometryError,
    PoseError, Rot2, Vec2,
};
use crate::sensors::{
    synth_flow, synth_rgb_proxy, synth_wrench, Fingerprint, Representation, SensorGains,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("cannot step a finished episode")]
    EpisodeDone,
}

/// Episode constants. Defaults follow the experiment protocol: +-6 mm / +-10
/// deg initial errors for training and +-5 mm / +-10 deg for evaluation, 15
/// attempts, divergence at 12 mm / 15 deg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub clearance_mm: f64,
    pub penalty: f64,
    pub success_reward: f64,
    pub action_bound_mm: f64,
    pub action_bound_deg: f64,
    pub max_attempts: usize,
    pub diverge_translation_mm: f64,
    pub diverge_rotation_deg: f64,
    pub train_error_mm: f64,
    pub train_error_deg: f64,
    pub eval_error_mm: f64,
    pub eval_error_deg: f64,
    /// Magnitude of the re-grasp nuisance offset applied to flow features.
    pub grasp_offset_mm: f64,
    /// Training episodes between re-grasps (re-sampling the nuisance offset).
    pub grasp_refresh_episodes: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            clearance_mm: 1.5,
            penalty: 1.0,
            success_reward: 10.0,
            action_bound_mm: 4.0,
            action_bound_deg: 4.0,
            max_attempts: 15,
            diverge_translation_mm: 12.0,
            diverge_rotation_deg: 15.0,
            train_error_mm: 6.0,
            train_error_deg: 10.0,
            eval_error_mm: 5.0,
            eval_error_deg: 10.0,
            grasp_offset_mm: 0.5,
            grasp_refresh_episodes: 10,
        }
    }
}

/// Which initial-error distribution an episode draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorRange {
    Train,
    Eval,
}

impl EnvParams {
    pub fn error_bounds(&self, range: ErrorRange) -> (f64, f64) {
        match range {
            ErrorRange::Train => (self.train_error_mm, self.train_error_deg),
            ErrorRange::Eval => (self.eval_error_mm, self.eval_error_deg),
        }
    }
}

/// Pose correction in the current gripper frame: mm, mm, degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Action {
    pub const fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self { dx, dy, dtheta }
    }

    pub fn clamped(self, bound_mm: f64, bound_deg: f64) -> Action {
        Action {
            dx: self.dx.clamp(-bound_mm, bound_mm),
            dy: self.dy.clamp(-bound_mm, bound_mm),
            dtheta: self.dtheta.clamp(-bound_deg, bound_deg),
        }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.dx, self.dy, self.dtheta]
    }
}

/// How an episode ended (or that it has not yet).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Running,
    Success,
    Diverged,
    AttemptLimit,
}

/// An object instance: cross-section plus sensing identity and geometry
/// quirks (a chamfered bottom edge reduces the effective clearance and damps
/// the tactile signal).
#[derive(Clone, Debug)]
pub struct ObjectSpec {
    pub name: String,
    pub section: CrossSection,
    pub fingerprint: Fingerprint,
    pub clearance_delta: f64,
    pub flow_gain_scale: f64,
}

impl ObjectSpec {
    pub fn new(name: &str, section: CrossSection) -> Self {
        Self {
            name: name.to_string(),
            section,
            fingerprint: Fingerprint::for_object(name),
            clearance_delta: 0.0,
            flow_gain_scale: 1.0,
        }
    }

    pub fn with_chamfer(mut self, clearance_delta: f64, flow_gain_scale: f64) -> Self {
        self.clearance_delta = clearance_delta;
        self.flow_gain_scale = flow_gain_scale;
        self
    }
}

/// Mutable per-episode state. The true error is hidden from policies; it
/// only surfaces in the privileged fields of recorded transitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    pub true_error: PoseError,
    pub attempts: usize,
    pub done: bool,
    pub outcome: Outcome,
}

/// One environment instance: an object in front of its matched hole with a
/// chosen wall subset and observation model.
#[derive(Clone, Debug)]
pub struct InsertionEnv {
    pub object: ObjectSpec,
    pub spec: EnvironmentSpec,
    pub representation: Representation,
    pub params: EnvParams,
    gains: SensorGains,
    grasp_offset: Vec2,
}

/// Everything a step hands back besides the mutated state.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub fits: bool,
    pub contact_count: usize,
    pub max_depth: f64,
    pub applied: Action,
}

/// Attempt summary produced by `reset`.
#[derive(Clone, Debug)]
pub struct ResetInfo {
    pub fits: bool,
    pub contact_count: usize,
    pub max_depth: f64,
}

impl InsertionEnv {
    pub fn new(
        object: ObjectSpec,
        kind: EnvKind,
        representation: Representation,
        params: EnvParams,
        gains: SensorGains,
    ) -> Result<Self, GeometryError> {
        let clearance = params.clearance_mm + object.clearance_delta;
        let spec = EnvironmentSpec::new(kind, object.section.clone(), clearance)?;
        Ok(Self {
            object,
            spec,
            representation,
            params,
            gains,
            grasp_offset: Vec2::default(),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.representation.dim()
    }

    /// Sets the re-grasp nuisance offset (training only; evaluation uses zero).
    pub fn set_grasp_offset(&mut self, offset: Vec2) {
        self.grasp_offset = offset;
    }

    fn synthesize(
        &self,
        contact: &crate::geometry::ContactResult,
        pose: &PoseError,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let flow_gains = self.gains.scaled(self.object.flow_gain_scale);
        match self.representation {
            Representation::Flow => {
                synth_flow(contact, pose, &flow_gains, self.grasp_offset, rng).0
            }
            Representation::RgbProxy => {
                let flow = synth_flow(contact, pose, &flow_gains, self.grasp_offset, rng);
                synth_rgb_proxy(&flow, &self.object.fingerprint, rng).0
            }
            Representation::Wrench => synth_wrench(contact, self.gains.sigma, rng).0,
        }
    }

    fn zero_obs(&self) -> Vec<f64> {
        vec![0.0; self.obs_dim()]
    }

    /// Samples a fresh error and executes the first insertion attempt.
    pub fn reset(
        &self,
        range: ErrorRange,
        rng: &mut ChaCha8Rng,
    ) -> (EpisodeState, Vec<f64>, ResetInfo) {
        let (mm, deg) = self.params.error_bounds(range);
        let error = PoseError::new(
            rng.random_range(-mm..=mm),
            rng.random_range(-mm..=mm),
            rng.random_range(-deg..=deg),
        );
        self.reset_with_error(error, rng)
    }

    /// Starts an episode from a fixed error (test and replay seam).
    pub fn reset_with_error(
        &self,
        error: PoseError,
        rng: &mut ChaCha8Rng,
    ) -> (EpisodeState, Vec<f64>, ResetInfo) {
        let contact = check_insertion(&self.object.section, &error, &self.spec);
        let info = ResetInfo {
            fits: contact.fits,
            contact_count: contact.contacts.len(),
            max_depth: contact.max_depth,
        };
        let (outcome, done, obs) = if contact.fits {
            (Outcome::Success, true, self.zero_obs())
        } else {
            (Outcome::Running, false, self.synthesize(&contact, &error, rng))
        };
        let state = EpisodeState { true_error: error, attempts: 1, done, outcome };
        (state, obs, info)
    }

    /// Applies a correction and runs the next insertion attempt.
    pub fn step(
        &self,
        state: &mut EpisodeState,
        action: Action,
        rng: &mut ChaCha8Rng,
    ) -> Result<StepOutput, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let p = &self.params;
        let applied = action.clamped(p.action_bound_mm, p.action_bound_deg);
        let prev = state.true_error;
        // The commanded displacement is expressed in the gripper frame,
        // which is yawed by the current rotation error.
        let d = Rot2::from_degrees(prev.etheta).apply(Vec2::new(applied.dx, applied.dy));
        let new = PoseError::new(prev.ex + d.x, prev.ey + d.y, prev.etheta + applied.dtheta);
        state.true_error = new;

        let diverged = new.ex.abs() > p.diverge_translation_mm
            || new.ey.abs() > p.diverge_translation_mm
            || new.etheta.abs() > p.diverge_rotation_deg;
        if diverged {
            // The motion itself is out of bounds; no insertion attempt runs,
            // but the attempt penalty still applies to the step.
            state.done = true;
            state.outcome = Outcome::Diverged;
            return Ok(StepOutput {
                obs: self.zero_obs(),
                reward: scalar_error(&prev) - scalar_error(&new) - p.penalty,
                fits: false,
                contact_count: 0,
                max_depth: 0.0,
                applied,
            });
        }

        let contact = check_insertion(&self.object.section, &new, &self.spec);
        state.attempts += 1;
        let mut reward = scalar_error(&prev) - scalar_error(&new) - p.penalty;
        let obs;
        if contact.fits {
            reward += p.success_reward;
            state.done = true;
            state.outcome = Outcome::Success;
            obs = self.zero_obs();
        } else if state.attempts >= p.max_attempts {
            state.done = true;
            state.outcome = Outcome::AttemptLimit;
            obs = self.zero_obs();
        } else {
            obs = self.synthesize(&contact, &new, rng);
        }
        Ok(StepOutput {
            obs,
            reward,
            fits: contact.fits,
            contact_count: contact.contacts.len(),
            max_depth: contact.max_depth,
            applied,
        })
    }
}

/// A controller for the insertion loop. Learned policies must read only the
/// observation; the privileged error is passed for oracle-style test
/// policies and for recording.
pub trait Policy {
    fn act(&mut self, obs: &[f64], privileged: &PoseError, rng: &mut ChaCha8Rng) -> Action;
}

/// Does nothing; useful as a floor baseline.
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, _obs: &[f64], _privileged: &PoseError, _rng: &mut ChaCha8Rng) -> Action {
        Action::default()
    }
}

/// Privileged oracle: corrects the true error directly (clamped per axis).
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn act(&mut self, _obs: &[f64], privileged: &PoseError, _rng: &mut ChaCha8Rng) -> Action {
        Action::new(-privileged.ex, -privileged.ey, -privileged.etheta)
    }
}

/// Uniform random actions within the given bounds.
pub struct RandomPolicy {
    pub bound_mm: f64,
    pub bound_deg: f64,
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &[f64], _privileged: &PoseError, rng: &mut ChaCha8Rng) -> Action {
        Action::new(
            rng.random_range(-self.bound_mm..=self.bound_mm),
            rng.random_range(-self.bound_mm..=self.bound_mm),
            rng.random_range(-self.bound_deg..=self.bound_deg),
        )
    }
}

/// One recorded step of an episode.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub attempt: usize,
    pub pre_error: PoseError,
    pub action: Action,
    pub post_error: PoseError,
    pub reward: f64,
    pub fits: bool,
    pub contact_count: usize,
    pub max_depth: f64,
    pub outcome: Outcome,
    /// Observation produced after this step (zero at terminal states).
    pub obs: Vec<f64>,
}

/// Full record of one episode, replayable step by step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub object: String,
    pub env: EnvKind,
    pub representation: Representation,
    pub initial_error: PoseError,
    pub reset_fits: bool,
    pub reset_contact_count: usize,
    pub reset_max_depth: f64,
    /// Observation returned by reset (zero when the pose already fits).
    pub reset_obs: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub attempts: usize,
}

/// Privileged training tuple stored in the replay buffer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    pub true_error: PoseError,
    pub next_true_error: PoseError,
}

impl EpisodeLog {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Reconstructs the privileged transitions of this episode.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut obs = self.reset_obs.clone();
        for s in &self.steps {
            out.push(Transition {
                obs: std::mem::take(&mut obs),
                action: s.action,
                reward: s.reward,
                next_obs: s.obs.clone(),
                done: s.outcome != Outcome::Running,
                true_error: s.pre_error,
                next_true_error: s.post_error,
            });
            obs = s.obs.clone();
        }
        out
    }
}

/// One line of a line-delimited episode log: a reset record followed by one
/// record per step.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReplayLine {
    Reset {
        episode: usize,
        object: String,
        env: EnvKind,
        representation: Representation,
        error: PoseError,
        fits: bool,
        contact_count: usize,
        max_depth: f64,
        outcome: Outcome,
        attempts: usize,
        obs: Vec<f64>,
    },
    Step {
        episode: usize,
        attempt: usize,
        pre_error: PoseError,
        action: Action,
        post_error: PoseError,
        reward: f64,
        fits: bool,
        contact_count: usize,
        max_depth: f64,
        outcome: Outcome,
        obs: Vec<f64>,
    },
}

/// Serializes episodes as line-delimited records, one step per line.
pub fn logs_to_jsonl(logs: &[EpisodeLog]) -> String {
    let mut s = String::new();
    for (episode, log) in logs.iter().enumerate() {
        let reset = ReplayLine::Reset {
            episode,
            object: log.object.clone(),
            env: log.env,
            representation: log.representation,
            error: log.initial_error,
            fits: log.reset_fits,
            contact_count: log.reset_contact_count,
            max_depth: log.reset_max_depth,
            outcome: log.outcome,
            attempts: log.attempts,
            obs: log.reset_obs.clone(),
        };
        s.push_str(&serde_json::to_string(&reset).unwrap());
        s.push('\n');
        for st in &log.steps {
            let line = ReplayLine::Step {
                episode,
                attempt: st.attempt,
                pre_error: st.pre_error,
                action: st.action,
                post_error: st.post_error,
                reward: st.reward,
                fits: st.fits,
                contact_count: st.contact_count,
                max_depth: st.max_depth,
                outcome: st.outcome,
                obs: st.obs.clone(),
            };
            s.push_str(&serde_json::to_string(&line).unwrap());
            s.push('\n');
        }
    }
    s
}

/// Reconstructs one episode from a line-delimited log.
pub fn log_from_jsonl(text: &str, episode: usize) -> Option<EpisodeLog> {
    let mut log: Option<EpisodeLog> = None;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReplayLine = serde_json::from_str(line).ok()?;
        match parsed {
            ReplayLine::Reset {
                episode: e,
                object,
                env,
                representation,
                error,
                fits,
                contact_count,
                max_depth,
                outcome,
                attempts,
                obs,
            } if e == episode => {
                log = Some(EpisodeLog {
                    object,
                    env,
                    representation,
                    initial_error: error,
                    reset_fits: fits,
                    reset_contact_count: contact_count,
                    reset_max_depth: max_depth,
                    reset_obs: obs,
                    steps: Vec::new(),
                    outcome,
                    attempts,
                });
            }
            ReplayLine::Step {
                episode: e,
                attempt,
                pre_error,
                action,
                post_error,
                reward,
                fits,
                contact_count,
                max_depth,
                outcome,
                obs,
            } if e == episode => {
                let log = log.as_mut()?;
                log.steps.push(StepRecord {
                    attempt,
                    pre_error,
                    action,
                    post_error,
                    reward,
                    fits,
                    contact_count,
                    max_depth,
                    outcome,
                    obs,
                });
            }
            _ => {}
        }
    }
    log
}

/// Runs one full episode under `policy`.
pub fn run_episode(
    env: &InsertionEnv,
    policy: &mut dyn Policy,
    range: ErrorRange,
    rng: &mut ChaCha8Rng,
) -> EpisodeLog {
    let (state, obs, info) = env.reset(range, rng);
    run_episode_from(env, policy, state, obs, info, rng)
}

/// Runs one full episode from a fixed initial error.
pub fn run_episode_with_error(
    env: &InsertionEnv,
    policy: &mut dyn Policy,
    error: PoseError,
    rng: &mut ChaCha8Rng,
) -> EpisodeLog {
    let (state, obs, info) = env.reset_with_error(error, rng);
    run_episode_from(env, policy, state, obs, info, rng)
}

fn run_episode_from(
    env: &InsertionEnv,
    policy: &mut dyn Policy,
    mut state: EpisodeState,
    mut obs: Vec<f64>,
    info: ResetInfo,
    rng: &mut ChaCha8Rng,
) -> EpisodeLog {
    let mut log = EpisodeLog {
        object: env.object.name.clone(),
        env: env.spec.kind,
        representation: env.representation,
        initial_error: state.true_error,
        reset_fits: info.fits,
        reset_contact_count: info.contact_count,
        reset_max_depth: info.max_depth,
        reset_obs: obs.clone(),
        steps: Vec::new(),
        outcome: state.outcome,
        attempts: state.attempts,
    };
    while !state.done {
        let pre = state.true_error;
        let action = policy.act(&obs, &pre, rng);
        let out = env.step(&mut state, action, rng).expect("episode not done");
        log.steps.push(StepRecord {
            attempt: state.attempts,
            pre_error: pre,
            action: out.applied,
            post_error: state.true_error,
            reward: out.reward,
            fits: out.fits,
            contact_count: out.contact_count,
            max_depth: out.max_depth,
            outcome: state.outcome,
            obs: out.obs.clone(),
        });
        obs = out.obs;
    }
    log.outcome = state.outcome;
    log.attempts = state.attempts;
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CrossSection;
    use crate::util::derive_rng;

    fn cylinder_env(kind: EnvKind) -> InsertionEnv {
        let object = ObjectSpec::new("cylinder", CrossSection::circle(17.5).unwrap());
        InsertionEnv::new(
            object,
            kind,
            Representation::Flow,
            EnvParams::default(),
            SensorGains::default(),
        )
        .unwrap()
    }

    fn cuboid_env() -> InsertionEnv {
        let object = ObjectSpec::new("cuboid", CrossSection::rectangle(45.0, 25.0).unwrap());
        InsertionEnv::new(
            object,
            EnvKind::Hole,
            Representation::Flow,
            EnvParams::default(),
            SensorGains::default(),
        )
        .unwrap()
    }

    #[test]
    fn reward_examples() {
        // e 7.0 -> 4.0 without success: 7 - 4 - 1 = 2.
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(1, &[]);
        let (mut state, _, _) = env.reset_with_error(PoseError::new(7.0, 0.0, 0.0), &mut rng);
        let out = env.step(&mut state, Action::new(-3.0, 0.0, 0.0), &mut rng).unwrap();
        assert!((out.reward - 2.0).abs() < 1e-12);
        assert!(!out.fits);
        // e 2.0 -> 0.5 with success: 2 - 0.5 - 1 + 10 = 10.5.
        let (mut state, _, _) = env.reset_with_error(PoseError::new(-2.0, 0.0, 0.0), &mut rng);
        let out = env.step(&mut state, Action::new(1.5, 0.0, 0.0), &mut rng).unwrap();
        assert!(out.fits, "residual 0.5 mm sits inside the clearance");
        assert!((out.reward - 10.5).abs() < 1e-12);
        assert_eq!(state.outcome, Outcome::Success);
    }

    #[test]
    fn actions_are_clamped_to_bounds() {
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(2, &[]);
        let (mut state, _, _) = env.reset_with_error(PoseError::new(-5.0, 0.0, 0.0), &mut rng);
        let out = env.step(&mut state, Action::new(10.0, 0.0, 0.0), &mut rng).unwrap();
        assert_eq!(out.applied, Action::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn immediate_success_when_error_fits() {
        // (1, 1, 7 deg) on a circle: |t| = sqrt(2) < 3 and yaw is irrelevant.
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(3, &[]);
        let (state, obs, info) = env.reset_with_error(PoseError::new(1.0, 1.0, 7.0), &mut rng);
        assert!(info.fits);
        assert!(state.done);
        assert_eq!(state.outcome, Outcome::Success);
        assert_eq!(state.attempts, 1);
        assert!(obs.iter().all(|&x| x == 0.0), "terminal states yield a zero observation");
    }

    #[test]
    fn cuboid_blocked_at_nine_degrees_keeps_running() {
        let env = cuboid_env();
        let mut rng = derive_rng(4, &[]);
        let (state, _, info) = env.reset_with_error(PoseError::new(0.0, 0.0, 9.0), &mut rng);
        assert!(!info.fits);
        assert!(!state.done);
        assert_eq!(state.outcome, Outcome::Running);
    }

    #[test]
    fn zero_policy_hits_attempt_limit_after_15_attempts() {
        let env = cuboid_env();
        let mut rng = derive_rng(5, &[]);
        let log = run_episode_with_error(
            &env,
            &mut ZeroPolicy,
            PoseError::new(5.0, 0.0, 0.0),
            &mut rng,
        );
        assert_eq!(log.outcome, Outcome::AttemptLimit);
        assert_eq!(log.attempts, 15);
        assert_eq!(log.steps.len(), 14, "reset runs the first attempt");
    }

    #[test]
    fn oracle_on_circle_from_5mm_succeeds_within_two_attempts() {
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(6, &[]);
        let log = run_episode_with_error(
            &env,
            &mut OraclePolicy,
            PoseError::new(5.0, 0.0, 0.0),
            &mut rng,
        );
        assert_eq!(log.outcome, Outcome::Success);
        assert!(log.attempts <= 2, "5 mm error minus the 4 mm clamp fits the 3 mm clearance");
    }

    #[test]
    fn stepping_a_done_episode_is_a_usage_error() {
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(7, &[]);
        let (mut state, _, _) = env.reset_with_error(PoseError::new(0.0, 0.0, 0.0), &mut rng);
        assert!(state.done);
        assert!(matches!(
            env.step(&mut state, Action::default(), &mut rng),
            Err(EnvError::EpisodeDone)
        ));
    }

    #[test]
    fn divergence_ends_episode_without_an_attempt() {
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(8, &[]);
        let (mut state, _, _) = env.reset_with_error(PoseError::new(-5.0, 9.0, 0.0), &mut rng);
        let attempts_before = state.attempts;
        let out = env.step(&mut state, Action::new(0.0, 4.0, 0.0), &mut rng).unwrap();
        assert_eq!(state.outcome, Outcome::Diverged);
        assert!(state.done);
        assert_eq!(state.attempts, attempts_before);
        assert!(out.obs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reward_telescopes_exactly() {
        let env = cuboid_env();
        for seed in 0..50 {
            let mut rng = derive_rng(seed, &[21]);
            let mut policy = RandomPolicy { bound_mm: 4.0, bound_deg: 4.0 };
            let log = run_episode(&env, &mut policy, ErrorRange::Train, &mut rng);
            let total = log.total_reward();
            let t = log.steps.len() as f64;
            let e0 = scalar_error(&log.initial_error);
            let e_final = log
                .steps
                .last()
                .map(|s| scalar_error(&s.post_error))
                .unwrap_or(e0);
            let success_on_step = log.steps.iter().any(|s| s.fits);
            let expected = e0 - e_final - env.params.penalty * t
                + if success_on_step { env.params.success_reward } else { 0.0 };
            assert!((total - expected).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn terminal_outcomes_are_exclusive_and_final() {
        let env = cuboid_env();
        let mut rng = derive_rng(9, &[]);
        for i in 0..80 {
            let mut rng_ep = derive_rng(9, &[i]);
            let mut policy = RandomPolicy { bound_mm: 4.0, bound_deg: 4.0 };
            let log = run_episode(&env, &mut policy, ErrorRange::Train, &mut rng_ep);
            assert_ne!(log.outcome, Outcome::Running);
            assert!(log.attempts <= env.params.max_attempts);
            for (i, s) in log.steps.iter().enumerate() {
                if i + 1 < log.steps.len() {
                    assert_eq!(s.outcome, Outcome::Running);
                } else {
                    assert_eq!(s.outcome, log.outcome);
                }
            }
        }
        let _ = rng.random_range(0..2);
    }

    #[test]
    fn train_reset_range_is_covered() {
        let env = cylinder_env(EnvKind::Hole);
        let mut rng = derive_rng(10, &[]);
        let (mut min_ex, mut max_ex) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let (state, _, _) = env.reset(ErrorRange::Train, &mut rng);
            let e = state.true_error;
            assert!(e.ex.abs() <= 6.0 && e.ey.abs() <= 6.0 && e.etheta.abs() <= 10.0);
            min_ex = min_ex.min(e.ex);
            max_ex = max_ex.max(e.ex);
        }
        assert!(min_ex <= -5.9 && min_ex >= -6.0);
        assert!(max_ex >= 5.9 && max_ex <= 6.0);
    }

    #[test]
    fn episodes_are_deterministic_per_seed() {
        let env = cuboid_env();
        let run = |seed| {
            let mut rng = derive_rng(seed, &[3]);
            let mut policy = RandomPolicy { bound_mm: 4.0, bound_deg: 4.0 };
            run_episode(&env, &mut policy, ErrorRange::Train, &mut rng)
        };
        let a = run(77);
        let b = run(77);
        assert_eq!(a.initial_error, b.initial_error);
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.steps.len(), b.steps.len());
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.action, y.action);
            assert_eq!(x.obs, y.obs);
        }
    }

    #[test]
    fn transitions_chain_observations() {
        let env = cuboid_env();
        let mut rng = derive_rng(11, &[]);
        let mut policy = RandomPolicy { bound_mm: 4.0, bound_deg: 4.0 };
        let log = run_episode_with_error(&env, &mut policy, PoseError::new(5.0, -4.0, 8.0), &mut rng);
        let ts = log.transitions();
        assert_eq!(ts.len(), log.steps.len());
        if ts.len() >= 2 {
            assert_eq!(ts[0].next_obs, ts[1].obs);
        }
        assert_eq!(ts[0].obs, log.reset_obs);
        assert!(ts.last().unwrap().done);
    }
}
