//! Lattice multi-agent model of a slime-mould plasmodium.
//!
//! A fixed population of particles lives on a 2D lattice. Each particle senses
//! a diffusing chemoattractant with three forward-biased sensors, turns toward
//! the strongest reading, and tries to step one cell forward, depositing
//! chemoattractant only when the step succeeds. With the oscillatory motor
//! behaviour enabled, blocked particles keep their heading, which produces
//! surging flux waves and whole-collective amoeboid movement that external
//! attractants and irradiation can steer.

pub mod engine;
pub mod lattice;
pub mod metrics;
pub mod particles;
pub mod pgm;
pub mod render;
pub mod scenario;

pub use engine::{
    init, run, Command, EngineConfig, Observer, Param, RunOutput, SeedRegion, StepStats,
    TimelineEvent, World,
};
pub use lattice::{Budget, Cell, CellClass, Habitat, Rect, StimulusSet, TrailField};
pub use particles::{MotorKind, MotorMode, Particle, SensorParams};
