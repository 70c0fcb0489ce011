//! Synthetic sensor observations derived from a contact configuration.
//!
//! Three observation models share the same underlying signal structure:
//!
//! * **Tactile flow** — 12 frames x 2 sensors x 3 features (shear_x, shear_z,
//!   in-plane rotation), 72 dims. The in-plane rotation channels carry the
//!   contact's x position with opposite signs on the two sensors, the
//!   vertical-shear difference carries its y position, the mean vertical
//!   shear carries the total reaction, and a weak differential x-shear term
//!   carries the yaw error.
//! * **RGB proxy** — the 72 flow dims modulated by a per-object texture
//!   pattern plus a 16-dim object fingerprint (88 dims total), modelling how
//!   raw imagery entangles task signal with object identity.
//! * **Wrench** — 32 frames x 5 channels (Fx, Fy, Fz, Tx, Ty), 160 dims. The
//!   vertical-axis torque channel is absent, so yaw reaches this model only
//!   through its geometric effect on the contact locations.
//!
//! Every frame k of K scales the base features by k/K (a contact ramp) and
//! adds i.i.d. Gaussian noise, so a fitting pose produces pure noise.

use crate::geometry::{ContactResult, PoseError, Vec2};
use crate::util::{derive_rng, hash_str};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const FLOW_FRAMES: usize = 12;
pub const FLOW_DIM: usize = 2 * 3 * FLOW_FRAMES; // 72
pub const FINGERPRINT_DIM: usize = 16;
pub const RGB_DIM: usize = FLOW_DIM + FINGERPRINT_DIM; // 88
pub const WRENCH_FRAMES: usize = 32;
pub const WRENCH_CHANNELS: usize = 5;
pub const WRENCH_DIM: usize = WRENCH_FRAMES * WRENCH_CHANNELS; // 160

/// Texture modulation amplitude for the RGB proxy.
const TEXTURE_AMPLITUDE: f64 = 0.3;
/// Small imaging noise added on top of the modulated flow block.
const RGB_IMAGING_SIGMA: f64 = 0.05;
/// Wrench gains: in-plane force per mm of normal-weighted depth, vertical
/// force per mm of reaction, torque per mm^2 of lever x reaction.
const WRENCH_FORCE_GAIN: f64 = 0.25;
const WRENCH_FZ_GAIN: f64 = 0.1;
const WRENCH_TORQUE_GAIN: f64 = 0.002;

/// Flow feature gains and the shared observation noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorGains {
    /// In-plane rotation per (mm contact x) x (mm reaction).
    pub kappa1: f64,
    /// Differential vertical shear per (mm contact y) x (mm reaction).
    pub kappa2: f64,
    /// Mean vertical shear per mm reaction.
    pub kappa3: f64,
    /// Differential x-shear per mm reaction per sin(yaw): the weak yaw cue.
    pub kappa4: f64,
    /// Standard deviation of the additive Gaussian noise on every entry.
    pub sigma: f64,
}

impl Default for SensorGains {
    fn default() -> Self {
        Self { kappa1: 0.02, kappa2: 0.02, kappa3: 0.01, kappa4: 0.004, sigma: 0.4 }
    }
}

impl SensorGains {
    /// Gains scaled for objects whose geometry damps the tactile signal
    /// (e.g. a chamfered bottom edge); the noise level stays put.
    pub fn scaled(&self, factor: f64) -> SensorGains {
        SensorGains {
            kappa1: self.kappa1 * factor,
            kappa2: self.kappa2 * factor,
            kappa3: self.kappa3 * factor,
            kappa4: self.kappa4 * factor,
            sigma: self.sigma,
        }
    }
}

/// Which observation model a policy consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Flow,
    RgbProxy,
    Wrench,
}

impl Representation {
    pub fn dim(self) -> usize {
        match self {
            Representation::Flow => FLOW_DIM,
            Representation::RgbProxy => RGB_DIM,
            Representation::Wrench => WRENCH_DIM,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Representation::Flow => "flow",
            Representation::RgbProxy => "rgb-proxy",
            Representation::Wrench => "wrench",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowObservation(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RgbProxyObservation(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrenchObservation(pub Vec<f64>);

impl FlowObservation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl RgbProxyObservation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl WrenchObservation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Unit-norm 16-dim object identity vector, stable per object name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint(pub Vec<f64>);

impl Fingerprint {
    /// Derives the fingerprint deterministically from an object name.
    pub fn for_object(name: &str) -> Fingerprint {
        let mut rng = derive_rng(hash_str(name), &[0xf1_9e]);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut v: Vec<f64> = (0..FINGERPRINT_DIM).map(|_| normal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= n;
        }
        Fingerprint(v)
    }

    pub fn cosine(&self, other: &Fingerprint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Depth-weighted contact centroid in the gripper frame and total reaction
/// (sum of penetration depths, the force proxy).
fn aggregate(contact: &ContactResult) -> (Vec2, f64) {
    if contact.fits || contact.contacts.is_empty() {
        return (Vec2::default(), 0.0);
    }
    let f: f64 = contact.contacts.iter().map(|c| c.depth).sum();
    let mut p = Vec2::default();
    for c in &contact.contacts {
        p = p.add(c.point_obj.scale(c.depth / f));
    }
    (p, f)
}

/// Per-sensor base features (before the frame ramp and noise) for the flow
/// model. Returns [sensor][feature] with feature order (shear_x, shear_z,
/// inplane_rotation).
pub fn flow_base_features(
    contact: &ContactResult,
    pose: &PoseError,
    gains: &SensorGains,
    grasp_offset: Vec2,
) -> [[f64; 3]; 2] {
    let (p, f) = aggregate(contact);
    if f == 0.0 {
        return [[0.0; 3]; 2];
    }
    let px = p.x + grasp_offset.x;
    let py = p.y + grasp_offset.y;
    let rot = gains.kappa1 * px * f;
    let shear_z_mean = -gains.kappa3 * f;
    let shear_z_diff = gains.kappa2 * py * f;
    let shear_x_diff = gains.kappa4 * f * pose.etheta.to_radians().sin();
    [
        [
            0.5 * shear_x_diff,
            shear_z_mean + 0.5 * shear_z_diff,
            rot,
        ],
        [
            -0.5 * shear_x_diff,
            shear_z_mean - 0.5 * shear_z_diff,
            -rot,
        ],
    ]
}

/// Synthesizes a 72-dim tactile-flow observation from a contact result.
pub fn synth_flow(
    contact: &ContactResult,
    pose: &PoseError,
    gains: &SensorGains,
    grasp_offset: Vec2,
    rng: &mut ChaCha8Rng,
) -> FlowObservation {
    let base = flow_base_features(contact, pose, gains, grasp_offset);
    let noise = Normal::new(0.0, gains.sigma).unwrap();
    let mut out = Vec::with_capacity(FLOW_DIM);
    for k in 1..=FLOW_FRAMES {
        let ramp = k as f64 / FLOW_FRAMES as f64;
        for sensor in base {
            for feature in sensor {
                out.push(feature * ramp + noise.sample(rng));
            }
        }
    }
    FlowObservation(out)
}

/// Deterministic 72-dim texture pattern derived from a fingerprint; the
/// multiplicative signature of one object's surface. Heavy-tailed entries in
/// [-3, 3] let one object's texture nearly blank some feature channels and
/// double others, so a policy that leans on them must calibrate per object.
fn texture_pattern(fingerprint: &Fingerprint) -> Vec<f64> {
    let mut h: u64 = 0x7e_37;
    for x in &fingerprint.0 {
        h ^= x.to_bits();
        h = h.rotate_left(17).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
    let mut rng = derive_rng(h, &[0x7e_87]);
    let normal = Normal::new(0.0, 3.0).unwrap();
    (0..FLOW_DIM).map(|_| f64::clamp(normal.sample(&mut rng), -8.0, 8.0)).collect()
}

/// Contaminates a flow observation with object-specific structure: texture
/// modulation plus a little fresh imaging noise, concatenated with the
/// fingerprint.
pub fn synth_rgb_proxy(
    flow: &FlowObservation,
    fingerprint: &Fingerprint,
    rng: &mut ChaCha8Rng,
) -> RgbProxyObservation {
    let texture = texture_pattern(fingerprint);
    let noise = Normal::new(0.0, RGB_IMAGING_SIGMA).unwrap();
    let mut out = Vec::with_capacity(RGB_DIM);
    for (x, t) in flow.0.iter().zip(&texture) {
        out.push(x * (1.0 + TEXTURE_AMPLITUDE * t) + noise.sample(rng));
    }
    out.extend_from_slice(&fingerprint.0);
    RgbProxyObservation(out)
}

/// Per-channel base values (Fx, Fy, Fz, Tx, Ty) for the wrench model.
///
/// No Tz channel exists, so a contact pattern symmetric about the grip axis
/// (the signature of a pure yaw error) produces no usable base signal.
pub fn wrench_base_channels(contact: &ContactResult) -> [f64; WRENCH_CHANNELS] {
    let (p, f) = aggregate(contact);
    if f == 0.0 {
        return [0.0; WRENCH_CHANNELS];
    }
    let mut reaction = Vec2::default();
    for c in &contact.contacts {
        reaction = reaction.add(c.normal.scale(-c.depth));
    }
    [
        WRENCH_FORCE_GAIN * reaction.x,
        WRENCH_FORCE_GAIN * reaction.y,
        -WRENCH_FZ_GAIN * f,
        WRENCH_TORQUE_GAIN * p.y * f,
        -WRENCH_TORQUE_GAIN * p.x * f,
    ]
}

/// Synthesizes a 160-dim force/torque observation from a contact result.
pub fn synth_wrench(contact: &ContactResult, sigma: f64, rng: &mut ChaCha8Rng) -> WrenchObservation {
    let base = wrench_base_channels(contact);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::with_capacity(WRENCH_DIM);
    for k in 1..=WRENCH_FRAMES {
        let ramp = k as f64 / WRENCH_FRAMES as f64;
        for ch in base {
            out.push(ch * ramp + noise.sample(rng));
        }
    }
    WrenchObservation(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        check_insertion, CrossSection, EnvKind, EnvironmentSpec, DEFAULT_CLEARANCE_MM,
    };
    use crate::util::derive_rng;
    use rand::Rng;

    fn contact_at(ex: f64, ey: f64, etheta: f64) -> (ContactResult, PoseError) {
        let c = CrossSection::circle(17.5).unwrap();
        let env = EnvironmentSpec::new(EnvKind::Hole, c.clone(), DEFAULT_CLEARANCE_MM).unwrap();
        let pose = PoseError::new(ex, ey, etheta);
        (check_insertion(&c, &pose, &env), pose)
    }

    fn fitting_contact() -> ContactResult {
        contact_at(0.0, 0.0, 0.0).0
    }

    #[test]
    fn dimensions_are_contractual() {
        let gains = SensorGains::default();
        let mut rng = derive_rng(1, &[]);
        let (contact, pose) = contact_at(4.0, 0.0, 0.0);
        let flow = synth_flow(&contact, &pose, &gains, Vec2::default(), &mut rng);
        assert_eq!(flow.0.len(), 72);
        let fp = Fingerprint::for_object("cylinder");
        let rgb = synth_rgb_proxy(&flow, &fp, &mut rng);
        assert_eq!(rgb.0.len(), 88);
        let wrench = synth_wrench(&contact, gains.sigma, &mut rng);
        assert_eq!(wrench.0.len(), 160);
    }

    #[test]
    fn no_contact_flow_is_zero_mean_noise() {
        let gains = SensorGains::default();
        let contact = fitting_contact();
        let pose = PoseError::default();
        let mut rng = derive_rng(2, &[]);
        let mut sum = 0.0;
        let n = 1000;
        for _ in 0..n {
            let obs = synth_flow(&contact, &pose, &gains, Vec2::default(), &mut rng);
            sum += obs.0.iter().sum::<f64>() / obs.0.len() as f64;
        }
        assert!((sum / n as f64).abs() < 0.02);
    }

    #[test]
    fn inplane_rotation_sign_flips_with_contact_side() {
        // Opposite contact x positions produce opposite in-plane rotation
        // features, and the two sensors spin in opposite directions.
        let gains = SensorGains::default();
        let (right, pose_r) = contact_at(4.0, 0.0, 0.0);
        let (left, pose_l) = contact_at(-4.0, 0.0, 0.0);
        let fr = flow_base_features(&right, &pose_r, &gains, Vec2::default());
        let fl = flow_base_features(&left, &pose_l, &gains, Vec2::default());
        assert!(fr[0][2] > 0.0 && fl[0][2] < 0.0);
        assert_eq!(fr[0][2], -fr[1][2]);
        assert!((fr[0][2] + fl[0][2]).abs() < 1e-9, "antisymmetric in contact side");
    }

    #[test]
    fn vertical_shear_difference_tracks_contact_y() {
        let gains = SensorGains::default();
        let (top, pose_t) = contact_at(0.0, 4.0, 0.0);
        let (bottom, pose_b) = contact_at(0.0, -4.0, 0.0);
        let ft = flow_base_features(&top, &pose_t, &gains, Vec2::default());
        let fb = flow_base_features(&bottom, &pose_b, &gains, Vec2::default());
        assert!(ft[0][1] - ft[1][1] > 0.0, "contact above: S1 shear_z leads");
        assert!(fb[0][1] - fb[1][1] < 0.0, "contact below: S2 shear_z leads");
    }

    #[test]
    fn sign_coding_matches_px_times_f() {
        // For random single-contact poses, sign(inplane base) = sign(px * f).
        let gains = SensorGains::default();
        let mut rng = derive_rng(3, &[]);
        let mut checked = 0;
        for _ in 0..200 {
            let ex: f64 = rng.random_range(-5.5..5.5);
            let ey: f64 = rng.random_range(-5.5..5.5);
            let (contact, pose) = contact_at(ex, ey, 0.0);
            if contact.fits || contact.contacts.len() != 1 {
                continue;
            }
            let f: f64 = contact.contacts.iter().map(|c| c.depth).sum();
            let px = contact.contacts[0].point_obj.x;
            let base = flow_base_features(&contact, &pose, &gains, Vec2::default());
            if px.abs() * f > 1e-9 {
                assert_eq!(base[0][2].signum(), (px * f).signum());
                checked += 1;
            }
        }
        assert!(checked > 50, "exercised {checked} single-contact poses");
    }

    #[test]
    fn noise_variance_is_calibrated() {
        let gains = SensorGains::default();
        let contact = fitting_contact();
        let pose = PoseError::default();
        let mut rng = derive_rng(4, &[]);
        let draws = 10_000;
        let mut sums = vec![0.0; FLOW_DIM];
        let mut sqs = vec![0.0; FLOW_DIM];
        for _ in 0..draws {
            let obs = synth_flow(&contact, &pose, &gains, Vec2::default(), &mut rng);
            for (i, x) in obs.0.iter().enumerate() {
                sums[i] += x;
                sqs[i] += x * x;
            }
        }
        let s2 = gains.sigma * gains.sigma;
        for i in 0..FLOW_DIM {
            let mean = sums[i] / draws as f64;
            let var = sqs[i] / draws as f64 - mean * mean;
            assert!(var > 0.8 * s2 && var < 1.2 * s2, "entry {i}: var {var}");
        }
    }

    #[test]
    fn observations_are_deterministic_per_seed() {
        let gains = SensorGains::default();
        let (contact, pose) = contact_at(4.0, 2.0, 5.0);
        let a = synth_flow(&contact, &pose, &gains, Vec2::default(), &mut derive_rng(9, &[1]));
        let b = synth_flow(&contact, &pose, &gains, Vec2::default(), &mut derive_rng(9, &[1]));
        assert_eq!(a, b);
    }

    #[test]
    fn fingerprints_are_stable_and_distinct() {
        let a = Fingerprint::for_object("cylinder");
        let b = Fingerprint::for_object("cylinder");
        assert_eq!(a, b);
        let names = ["cylinder", "hexagon", "ellipse", "cuboid", "box", "charger"];
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                let fi = Fingerprint::for_object(names[i]);
                let fj = Fingerprint::for_object(names[j]);
                assert!(fi.cosine(&fj) < 0.9, "{} vs {}", names[i], names[j]);
            }
        }
    }

    #[test]
    fn rgb_proxy_keeps_fingerprint_block_intact() {
        let fp = Fingerprint::for_object("cuboid");
        let zero_flow = FlowObservation(vec![0.0; FLOW_DIM]);
        let mut rng = derive_rng(5, &[]);
        let rgb = synth_rgb_proxy(&zero_flow, &fp, &mut rng);
        // Flow block is imaging noise only around zero; fingerprint exact.
        for x in &rgb.0[..FLOW_DIM] {
            assert!(x.abs() < 6.0 * 0.05);
        }
        assert_eq!(&rgb.0[FLOW_DIM..], fp.0.as_slice());
        let rgb2 = synth_rgb_proxy(&zero_flow, &fp, &mut rng);
        assert_eq!(&rgb2.0[FLOW_DIM..], fp.0.as_slice());
    }

    #[test]
    fn wrench_has_no_yaw_channel_and_ty_flips_with_px() {
        let (right, _) = contact_at(4.0, 0.0, 0.0);
        let (left, _) = contact_at(-4.0, 0.0, 0.0);
        let wr = wrench_base_channels(&right);
        let wl = wrench_base_channels(&left);
        assert_eq!(wr.len(), 5, "Fx Fy Fz Tx Ty only");
        assert!(wr[4] < 0.0 && wl[4] > 0.0, "Ty sign follows -px");
        assert!(wr[2] < 0.0, "Fz is a reaction against pressing down");
    }

    #[test]
    fn wrench_statistics_blind_to_yaw_sign() {
        // Pure yaw on a circle never makes contact, so the +8 and -8 degree
        // wrench streams are the same noise distribution.
        let sigma = SensorGains::default().sigma;
        let (c_pos, _) = contact_at(0.0, 0.0, 8.0);
        let (c_neg, _) = contact_at(0.0, 0.0, -8.0);
        assert!(c_pos.fits && c_neg.fits);
        let mut rng = derive_rng(6, &[]);
        let n = 2000;
        let mut mean_pos = vec![0.0; WRENCH_DIM];
        let mut mean_neg = vec![0.0; WRENCH_DIM];
        for _ in 0..n {
            for (acc, c) in [(&mut mean_pos, &c_pos), (&mut mean_neg, &c_neg)] {
                let w = synth_wrench(c, sigma, &mut rng);
                for (a, x) in acc.iter_mut().zip(&w.0) {
                    *a += x / n as f64;
                }
            }
        }
        // Two-sample mean test at ~4 sigma of the mean estimator.
        let bound = 4.0 * sigma * (2.0 / n as f64).sqrt();
        for i in 0..WRENCH_DIM {
            assert!((mean_pos[i] - mean_neg[i]).abs() < bound);
        }
    }

    #[test]
    fn flow_ramp_grows_across_frames() {
        let mut gains = SensorGains::default();
        gains.sigma = 0.0;
        let (contact, pose) = contact_at(4.0, 0.0, 0.0);
        let obs = synth_flow(&contact, &pose, &gains, Vec2::default(), &mut derive_rng(7, &[]));
        // In-plane rotation of sensor 1 sits at stride position 2.
        let first = obs.0[2];
        let last = obs.0[2 + 6 * (FLOW_FRAMES - 1)];
        assert!((last - 12.0 * first).abs() < 1e-12, "linear ramp over 12 frames");
    }
}
