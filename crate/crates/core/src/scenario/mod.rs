//! Declarative experiment definitions.
//!
//! A scenario names a habitat (a PGM file or a generated arena with wall
//! rectangles), the engine configuration, a timeline of commands and the
//! observer cadences. See [`parse_scenario`] for the text format and
//! [`builtin_presets`] for the shipped experiments.

mod parse;
mod presets;

use std::path::PathBuf;

use thiserror::Error;

use crate::engine::{self, ConfigError, EngineConfig, SeedRegion, TimelineEvent, World};
use crate::lattice::{self, Habitat, Rect};
use crate::particles::{MotorMode, SensorParams};

pub use parse::{parse_scenario, parse_scenario_file};
pub use presets::{builtin_presets, preset, PRESET_NAMES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {key}: {message}")]
pub struct ScenarioError {
    /// 1-based source line, 0 for values that did not come from a file.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl ScenarioError {
    pub(crate) fn new(line: usize, key: &str, message: impl Into<String>) -> Self {
        Self {
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HabitatSource {
    /// Greyscale PGM, already resolved against the scenario file's directory.
    File(PathBuf),
    /// Open arena with optional wall rectangles.
    Generated {
        width: usize,
        height: usize,
        walls: Vec<Rect>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub habitat: HabitatSource,
    pub population: usize,
    /// Placement regions, united. Empty means the whole habitat.
    pub seed_regions: Vec<SeedRegion>,
    pub sensors: SensorParams,
    pub motor: MotorMode,
    pub damping: f64,
    pub seed: u64,
    pub oscillation_onset: Option<u64>,
    pub timeline: Vec<TimelineEvent>,
    /// Steps between frames, 0 for none.
    pub frame_every: u64,
    /// Steps between metrics rows, 0 for none.
    pub metrics_every: u64,
    pub steps: u64,
}

impl ScenarioSpec {
    /// A scenario over an open arena with every default applied.
    pub fn new(name: &str, width: usize, height: usize, population: usize) -> Self {
        Self {
            name: name.to_string(),
            habitat: HabitatSource::Generated {
                width,
                height,
                walls: Vec::new(),
            },
            population,
            seed_regions: Vec::new(),
            sensors: SensorParams::default(),
            motor: MotorMode::default(),
            damping: lattice::DEFAULT_DAMPING,
            seed: 0,
            oscillation_onset: None,
            timeline: Vec::new(),
            frame_every: 100,
            metrics_every: 10,
            steps: 1000,
        }
    }

    pub fn build_habitat(&self) -> Result<Habitat, ScenarioError> {
        match &self.habitat {
            HabitatSource::File(path) => {
                let bytes = std::fs::read(path).map_err(|e| {
                    ScenarioError::new(0, "habitat", format!("{}: {e}", path.display()))
                })?;
                lattice::load_habitat(&bytes).map_err(|e| {
                    ScenarioError::new(0, "habitat", format!("{}: {e}", path.display()))
                })
            }
            HabitatSource::Generated {
                width,
                height,
                walls,
            } => Habitat::with_walls(*width, *height, walls)
                .map_err(|e| ScenarioError::new(0, "arena", e.to_string())),
        }
    }

    pub fn seed_region(&self, habitat: &Habitat) -> SeedRegion {
        match self.seed_regions.as_slice() {
            [] => SeedRegion::Rect(Rect::new(
                0,
                0,
                habitat.width() as i32 - 1,
                habitat.height() as i32 - 1,
            )),
            [one] => one.clone(),
            many => SeedRegion::Union(many.to_vec()),
        }
    }

    pub fn engine_config(&self, habitat: &Habitat) -> EngineConfig {
        EngineConfig {
            population: self.population,
            sensors: self.sensors,
            motor: self.motor,
            damping: self.damping,
            seed: self.seed,
            seed_region: self.seed_region(habitat),
            oscillation_onset: self.oscillation_onset,
        }
    }

    pub fn init_world(&self) -> Result<World, ScenarioError> {
        let habitat = self.build_habitat()?;
        let config = self.engine_config(&habitat);
        engine::init(&config, habitat, self.timeline.clone()).map_err(config_error)
    }

    /// Checks every nested invariant, including placement capacity.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.init_world().map(|_| ())
    }

    /// Replaces one scalar setting, as `--override key=value` does.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        parse::set_scalar(self, key, value, 0)?;
        self.validate()
    }

    /// Serializes to the text format; [`parse_scenario`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        parse::serialize(self)
    }
}

fn config_error(e: ConfigError) -> ScenarioError {
    let key = match &e {
        ConfigError::SeedRegionTooSmall { .. } => "population",
        ConfigError::Param(p) => parse::param_key(p),
        ConfigError::Damping(_) => "damping",
        ConfigError::Timeline { .. } => "timeline",
    };
    ScenarioError::new(0, key, e.to_string())
}
