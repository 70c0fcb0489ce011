//! Desk-scale peg-in-hole insertion simulator with synthetic tactile sensing
//! and an episodic TD3 learning suite.
//!
//! The crate models the insertion task as an episodic feedback loop: an
//! object held with a hidden pose error is pressed into an environment, the
//! resulting contact configuration is rendered into a synthetic sensor
//! observation (tactile flow, an RGB-like proxy, or a force/torque wrench),
//! and a policy proposes a pose correction for the next attempt. On top of
//! the simulator sit a dense-network stack, a TD3 agent with a privileged
//! critic, a staged training curriculum, and an evaluation harness that
//! reproduces the full experiment protocol.
//!
//! See the `book/` guide at the repository root for a narrative walk-through
//! of each subsystem; its code snippets double as doc-tests for this crate.

pub mod agent;
pub mod config;
pub mod curriculum;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod pipeline;
pub mod sensors;
pub mod util;

pub use geometry::{
    check_insertion, scalar_error, ContactResult, CrossSection, EnvKind, EnvironmentSpec,
    PoseError, SectionKind, Side, Vec2,
};

// The book's code snippets compile and run with `cargo test`, keeping the
// guide in lockstep with the crate's public API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub struct Geometry;
    #[doc = include_str!("../../../book/src/observations.md")]
    pub struct Observations;
    #[doc = include_str!("../../../book/src/episodes.md")]
    pub struct Episodes;
    #[doc = include_str!("../../../book/src/networks.md")]
    pub struct Networks;
    #[doc = include_str!("../../../book/src/agents.md")]
    pub struct Agents;
    #[doc = include_str!("../../../book/src/curriculum.md")]
    pub struct Curriculum;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
}
