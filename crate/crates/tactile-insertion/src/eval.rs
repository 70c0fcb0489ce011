//! Evaluation harness: the object sets, the fixed-protocol trial runner, and
//! the policy-by-object report table.
//!
//! Evaluation always runs the hole environment with exploration off: 250
//! episodes per object, initial errors uniform in +-5 mm / +-10 deg, 15
//! attempts, divergence at 12 mm / 15 deg. Success rate counts all trials;
//! the attempt count is averaged over the successful ones only.

use crate::config::ObjectDims;
use crate::env::{run_episode, EnvParams, ErrorRange, InsertionEnv, ObjectSpec, Outcome, Policy};
use crate::geometry::{CrossSection, EnvKind, PoseError, Vec2};
use crate::sensors::{Representation, SensorGains};
use crate::util::{derive_rng, hash_str};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Evaluation protocol constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub trials: usize,
    pub seed: u64,
    pub env: EnvKind,
}

impl EvalConfig {
    pub fn new(seed: u64) -> EvalConfig {
        EvalConfig { trials: 250, seed, env: EnvKind::Hole }
    }
}

/// Aggregate result of evaluating one policy on one object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub policy: String,
    pub object: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Absent when no trial succeeded.
    pub mean_attempts_on_success: Option<f64>,
    pub diverged: usize,
    pub attempt_limit: usize,
}

/// One evaluated episode, for protocol audits and replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalEpisodeRecord {
    pub object: String,
    pub episode: usize,
    pub initial_error: PoseError,
    pub outcome: Outcome,
    pub attempts: usize,
    pub steps: usize,
    /// Largest per-axis error magnitudes seen over the episode (mm, mm, deg).
    pub max_abs_error: [f64; 3],
}

/// The four training objects in curriculum unlock order: easiest (yaw
/// insensitive) to hardest (the cuboid, where small yaw errors block).
pub fn training_objects(dims: &ObjectDims) -> Vec<ObjectSpec> {
    vec![
        ObjectSpec::new("cylinder", CrossSection::circle(dims.cylinder_radius).expect("valid dims")),
        ObjectSpec::new(
            "hexagon",
            CrossSection::regular_hexagon(dims.hexagon_circumradius).expect("valid dims"),
        ),
        ObjectSpec::new(
            "ellipse",
            CrossSection::ellipse(dims.ellipse_semi_major, dims.ellipse_semi_minor)
                .expect("valid dims"),
        ),
        ObjectSpec::new(
            "cuboid",
            CrossSection::rectangle(dims.cuboid_width, dims.cuboid_height).expect("valid dims"),
        ),
    ]
}

/// Convex-polygon approximation of a rectangle with rounded corners.
fn rounded_rectangle(width: f64, height: f64, radius: f64) -> CrossSection {
    let (hw, hh) = (width / 2.0 - radius, height / 2.0 - radius);
    let corners = [
        (Vec2::new(hw, hh), 0.0),
        (Vec2::new(-hw, hh), 90.0),
        (Vec2::new(-hw, -hh), 180.0),
        (Vec2::new(hw, -hh), 270.0),
    ];
    let mut vertices = Vec::new();
    let arc_points = 9;
    for (center, start_deg) in corners {
        for i in 0..arc_points {
            let a = (start_deg + 90.0 * i as f64 / (arc_points - 1) as f64).to_radians();
            vertices.push(Vec2::new(center.x + radius * a.cos(), center.y + radius * a.sin()));
        }
    }
    // Consecutive duplicate-ish points at the joints are fine to drop.
    let mut cleaned: Vec<Vec2> = Vec::new();
    for v in vertices {
        if cleaned.last().map(|l| l.dist(v) > 1e-9).unwrap_or(true) {
            cleaned.push(v);
        }
    }
    CrossSection::convex_polygon(cleaned).expect("rounded rectangle is convex")
}

/// The four held-out objects. The two bottles carry the chamfer flag: a
/// chamfered bottom edge effectively tightens the hole by 0.5 mm and damps
/// the tactile flow signal to 70%. All shapes are distinct from the
/// training set and get fresh fingerprints.
pub fn novel_objects() -> Vec<ObjectSpec> {
    vec![
        ObjectSpec::new("phone-charger", rounded_rectangle(40.0, 20.0, 4.0)),
        ObjectSpec::new("small-bottle", CrossSection::circle(14.0).expect("valid dims"))
            .with_chamfer(-0.5, 0.7),
        ObjectSpec::new("big-bottle", CrossSection::circle(20.0).expect("valid dims"))
            .with_chamfer(-0.5, 0.7),
        ObjectSpec::new("paper-box", CrossSection::rectangle(44.0, 26.0).expect("valid dims")),
    ]
}

/// Runs the fixed evaluation protocol for one policy on one object.
///
/// Episodes use independent RNG streams derived from (seed, object,
/// episode), so results do not depend on evaluation order.
pub fn evaluate(
    policy: &mut dyn Policy,
    policy_label: &str,
    object: &ObjectSpec,
    representation: Representation,
    cfg: &EvalConfig,
    params: &EnvParams,
    gains: &SensorGains,
) -> (Metrics, Vec<EvalEpisodeRecord>, Vec<crate::env::EpisodeLog>) {
    let env = InsertionEnv::new(object.clone(), cfg.env, representation, *params, *gains)
        .expect("valid evaluation object");
    let mut records = Vec::with_capacity(cfg.trials);
    let mut logs = Vec::with_capacity(cfg.trials);
    let mut successes = 0;
    let mut diverged = 0;
    let mut attempt_limit = 0;
    let mut attempts_on_success = 0usize;
    for episode in 0..cfg.trials {
        let mut rng = derive_rng(cfg.seed, &[hash_str(&object.name), episode as u64]);
        let log = run_episode(&env, policy, ErrorRange::Eval, &mut rng);
        let mut max_abs = [
            log.initial_error.ex.abs(),
            log.initial_error.ey.abs(),
            log.initial_error.etheta.abs(),
        ];
        for s in &log.steps {
            max_abs[0] = max_abs[0].max(s.post_error.ex.abs());
            max_abs[1] = max_abs[1].max(s.post_error.ey.abs());
            max_abs[2] = max_abs[2].max(s.post_error.etheta.abs());
        }
        match log.outcome {
            Outcome::Success => {
                successes += 1;
                attempts_on_success += log.attempts;
            }
            Outcome::Diverged => diverged += 1,
            Outcome::AttemptLimit => attempt_limit += 1,
            Outcome::Running => unreachable!("episodes always terminate"),
        }
        records.push(EvalEpisodeRecord {
            object: object.name.clone(),
            episode,
            initial_error: log.initial_error,
            outcome: log.outcome,
            attempts: log.attempts,
            steps: log.steps.len(),
            max_abs_error: max_abs,
        });
        logs.push(log);
    }
    let metrics = Metrics {
        policy: policy_label.to_string(),
        object: object.name.clone(),
        trials: cfg.trials,
        successes,
        success_rate: successes as f64 / cfg.trials as f64,
        mean_attempts_on_success: (successes > 0)
            .then(|| attempts_on_success as f64 / successes as f64),
        diverged,
        attempt_limit,
    };
    (metrics, records, logs)
}

/// One report cell: success rate and mean attempts over successes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub success_rate: f64,
    pub mean_attempts: Option<f64>,
}

/// Policy x object table of evaluation results.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    /// cells[policy][object]
    pub cells: BTreeMap<String, BTreeMap<String, ReportCell>>,
}

impl ReportTable {
    pub fn insert(&mut self, m: &Metrics) {
        self.cells.entry(m.policy.clone()).or_default().insert(
            m.object.clone(),
            ReportCell {
                success_rate: m.success_rate,
                mean_attempts: m.mean_attempts_on_success,
            },
        );
    }

    pub fn objects(&self) -> Vec<String> {
        let mut set = std::collections::BTreeSet::new();
        for row in self.cells.values() {
            set.extend(row.keys().cloned());
        }
        set.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn from_json(text: &str) -> serde_json::Result<ReportTable> {
        serde_json::from_str(text)
    }

    /// Aligned, human-readable rendering: one success row and one attempts
    /// row per policy.
    pub fn to_text(&self) -> String {
        let objects = self.objects();
        let mut widths: Vec<usize> = objects.iter().map(|o| o.len().max(8)).collect();
        let name_w = self
            .cells
            .keys()
            .map(|p| p.len() + 9)
            .chain(["policy".len()])
            .max()
            .unwrap_or(6);
        for w in &mut widths {
            *w = (*w).max(8);
        }
        let mut s = String::new();
        s.push_str(&format!("{:<name_w$}", "policy"));
        for (o, w) in objects.iter().zip(&widths) {
            s.push_str(&format!("  {o:>w$}"));
        }
        s.push('\n');
        for (policy, row) in &self.cells {
            s.push_str(&format!("{:<name_w$}", format!("{policy} success")));
            for (o, w) in objects.iter().zip(&widths) {
                match row.get(o) {
                    Some(c) => s.push_str(&format!("  {:>w$}", format!("{:.1}%", 100.0 * c.success_rate))),
                    None => s.push_str(&format!("  {:>w$}", "-")),
                }
            }
            s.push('\n');
            s.push_str(&format!("{:<name_w$}", format!("{policy} attempts")));
            for (o, w) in objects.iter().zip(&widths) {
                let text = match row.get(o) {
                    Some(ReportCell { mean_attempts: Some(a), .. }) => format!("{a:.2}"),
                    Some(_) => "-".to_string(),
                    None => "-".to_string(),
                };
                s.push_str(&format!("  {text:>w$}"));
            }
            s.push('\n');
        }
        s
    }
}
