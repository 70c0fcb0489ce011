//! Flat key-value run configuration.
//!
//! The config file is plain text: one `section.key = value` per line, `#`
//! comments, blank lines ignored. Every tunable constant of the suite
//! appears here with its default; a file only needs the keys it overrides.
//!
//! ```text
//! # quieter sensors, longer flat run
//! sensors.sigma = 0.02
//! curriculum.transition_cap = 4000
//! ```

use crate::agent::Td3Hyper;
use crate::curriculum::{Schedule, StageSpec};
use crate::env::EnvParams;
use crate::geometry::EnvKind;
use crate::sensors::SensorGains;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {0}: expected 'key = value'")]
    Syntax(usize),
    #[error("line {0}: unknown key '{1}'")]
    UnknownKey(usize, String),
    #[error("line {0}: bad value for '{1}'")]
    BadValue(usize, String),
}

/// Training-object dimensions in mm. Widths average 35 mm across the set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDims {
    pub cylinder_radius: f64,
    pub hexagon_circumradius: f64,
    pub ellipse_semi_major: f64,
    pub ellipse_semi_minor: f64,
    pub cuboid_width: f64,
    pub cuboid_height: f64,
}

impl Default for ObjectDims {
    fn default() -> Self {
        Self {
            cylinder_radius: 17.5,
            hexagon_circumradius: 17.5,
            ellipse_semi_major: 21.0,
            ellipse_semi_minor: 14.0,
            cuboid_width: 45.0,
            cuboid_height: 25.0,
        }
    }
}

/// Knobs for the supervised warm start and baselines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainExtras {
    pub bootstrap_points: usize,
    pub bootstrap_target_mse: f64,
    pub bootstrap_max_epochs: usize,
    pub sl_epochs: usize,
    /// Hidden width of the force/torque actor (smaller than the flow actor).
    pub ft_hidden: usize,
}

impl Default for TrainExtras {
    fn default() -> Self {
        Self {
            bootstrap_points: 300,
            bootstrap_target_mse: 0.5,
            bootstrap_max_epochs: 200,
            sl_epochs: 50,
            ft_hidden: 64,
        }
    }
}

/// The complete run configuration with spec defaults.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub objects: ObjectDims,
    pub gains: SensorGains,
    pub env: EnvParams,
    pub agent: Td3Hyper,
    pub extras: TrainExtras,
    pub schedule: Schedule,
    pub eval_trials: usize,
}

impl RunConfig {
    pub fn standard() -> RunConfig {
        RunConfig {
            objects: ObjectDims::default(),
            gains: SensorGains::default(),
            env: EnvParams::default(),
            agent: Td3Hyper::default(),
            extras: TrainExtras::default(),
            schedule: Schedule::default(),
            eval_trials: 250,
        }
    }

    /// Parses overrides on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::standard();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax(lineno))?;
            cfg.apply(key, value)
                .map_err(|bad_value| {
                    if bad_value {
                        ConfigError::BadValue(lineno, key.to_string())
                    } else {
                        ConfigError::UnknownKey(lineno, key.to_string())
                    }
                })?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override. Returns Err(true) for a bad
    /// value, Err(false) for an unknown key.
    fn apply(&mut self, key: &str, value: &str) -> Result<(), bool> {
        fn f(v: &str) -> Result<f64, bool> {
            v.parse().map_err(|_| true)
        }
        fn n(v: &str) -> Result<usize, bool> {
            v.parse().map_err(|_| true)
        }
        fn u(v: &str) -> Result<u64, bool> {
            v.parse().map_err(|_| true)
        }
        match key {
            "objects.cylinder_radius" => self.objects.cylinder_radius = f(value)?,
            "objects.hexagon_circumradius" => self.objects.hexagon_circumradius = f(value)?,
            "objects.ellipse_semi_major" => self.objects.ellipse_semi_major = f(value)?,
            "objects.ellipse_semi_minor" => self.objects.ellipse_semi_minor = f(value)?,
            "objects.cuboid_width" => self.objects.cuboid_width = f(value)?,
            "objects.cuboid_height" => self.objects.cuboid_height = f(value)?,

            "sensors.kappa1" => self.gains.kappa1 = f(value)?,
            "sensors.kappa2" => self.gains.kappa2 = f(value)?,
            "sensors.kappa3" => self.gains.kappa3 = f(value)?,
            "sensors.kappa4" => self.gains.kappa4 = f(value)?,
            "sensors.sigma" => self.gains.sigma = f(value)?,

            "env.clearance_mm" => self.env.clearance_mm = f(value)?,
            "env.penalty" => self.env.penalty = f(value)?,
            "env.success_reward" => self.env.success_reward = f(value)?,
            "env.action_bound_mm" => self.env.action_bound_mm = f(value)?,
            "env.action_bound_deg" => self.env.action_bound_deg = f(value)?,
            "env.max_attempts" => self.env.max_attempts = n(value)?,
            "env.diverge_translation_mm" => self.env.diverge_translation_mm = f(value)?,
            "env.diverge_rotation_deg" => self.env.diverge_rotation_deg = f(value)?,
            "env.train_error_mm" => self.env.train_error_mm = f(value)?,
            "env.train_error_deg" => self.env.train_error_deg = f(value)?,
            "env.eval_error_mm" => self.env.eval_error_mm = f(value)?,
            "env.eval_error_deg" => self.env.eval_error_deg = f(value)?,
            "env.grasp_offset_mm" => self.env.grasp_offset_mm = f(value)?,
            "env.grasp_refresh_episodes" => self.env.grasp_refresh_episodes = n(value)?,

            "agent.gamma" => self.agent.gamma = f(value)?,
            "agent.tau" => self.agent.tau = f(value)?,
            "agent.policy_delay" => self.agent.policy_delay = u(value)?,
            "agent.target_noise" => self.agent.target_noise = f(value)?,
            "agent.target_noise_clip" => self.agent.target_noise_clip = f(value)?,
            "agent.exploration_noise_mm" => self.agent.exploration_noise_mm = f(value)?,
            "agent.exploration_noise_deg" => self.agent.exploration_noise_deg = f(value)?,
            "agent.batch_size" => self.agent.batch_size = n(value)?,
            "agent.critic_lr" => self.agent.critic_lr = f(value)?,
            "agent.actor_lr" => self.agent.actor_lr = f(value)?,
            "agent.replay_capacity" => self.agent.replay_capacity = n(value)?,
            "agent.freeze_episodes" => self.agent.freeze_episodes = u(value)?,
            "agent.actor_hidden" => self.agent.actor_hidden = n(value)?,
            "agent.critic_hidden" => self.agent.critic_hidden = n(value)?,

            "train.bootstrap_points" => self.extras.bootstrap_points = n(value)?,
            "train.bootstrap_target_mse" => self.extras.bootstrap_target_mse = f(value)?,
            "train.bootstrap_max_epochs" => self.extras.bootstrap_max_epochs = n(value)?,
            "train.sl_epochs" => self.extras.sl_epochs = n(value)?,
            "train.ft_hidden" => self.extras.ft_hidden = n(value)?,

            "curriculum.window" => self.schedule.window = n(value)?,
            "curriculum.reward_mean_threshold" => self.schedule.reward_mean_threshold = f(value)?,
            "curriculum.reward_std_threshold" => self.schedule.reward_std_threshold = f(value)?,
            "curriculum.transition_cap" => self.schedule.transition_cap = n(value)?,
            "curriculum.line_episodes" => self.stage_mut(EnvKind::LineWall).max_episodes = n(value)?,
            "curriculum.corner_episodes" => {
                self.stage_mut(EnvKind::CornerWall).max_episodes = n(value)?
            }
            "curriculum.u_episodes" => self.stage_mut(EnvKind::UWall).max_episodes = n(value)?,
            "curriculum.hole_episodes" => self.stage_mut(EnvKind::Hole).max_episodes = n(value)?,

            "eval.trials" => self.eval_trials = n(value)?,
            _ => return Err(false),
        }
        Ok(())
    }

    fn stage_mut(&mut self, kind: EnvKind) -> &mut StageSpec {
        self.schedule
            .stages
            .iter_mut()
            .find(|s| s.env == kind)
            .expect("default schedule has all four stages")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_protocol_constants() {
        let cfg = RunConfig::standard();
        assert_eq!(cfg.env.clearance_mm, 1.5);
        assert_eq!(cfg.env.max_attempts, 15);
        assert_eq!(cfg.env.train_error_mm, 6.0);
        assert_eq!(cfg.env.eval_error_mm, 5.0);
        assert_eq!(cfg.agent.gamma, 0.99);
        assert_eq!(cfg.schedule.transition_cap, 3000);
        assert_eq!(cfg.schedule.window, 30);
        assert_eq!(cfg.extras.bootstrap_points, 300);
        assert_eq!(cfg.eval_trials, 250);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "\n# tweak\nsensors.sigma = 0.02\ncurriculum.hole_episodes = 50 # inline\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.gains.sigma, 0.02);
        assert_eq!(
            cfg.schedule.stages.iter().find(|s| s.env == EnvKind::Hole).unwrap().max_episodes,
            50
        );
        assert_eq!(cfg.env.clearance_mm, 1.5, "untouched keys keep defaults");
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_values() {
        assert_eq!(
            RunConfig::parse("nope.nope = 1"),
            Err(ConfigError::UnknownKey(1, "nope.nope".into()))
        );
        assert_eq!(
            RunConfig::parse("sensors.sigma = fast"),
            Err(ConfigError::BadValue(1, "sensors.sigma".into()))
        );
        assert_eq!(RunConfig::parse("sensors.sigma 0.1"), Err(ConfigError::Syntax(1)));
    }
}
