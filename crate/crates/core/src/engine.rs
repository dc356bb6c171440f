//! World state, the step schedule and the event timeline.
//!
//! One step runs these sub-steps in a fixed order:
//!
//! 1. apply timeline events scheduled for the current step index;
//! 2. motor stage for every particle, in a freshly shuffled order;
//! 3. sensory stage for every particle, in an independently shuffled order,
//!    sampling the trail as left by the motor stage;
//! 4. project attractant stimuli;
//! 5. diffuse the trail.
//!
//! A single ChaCha8 stream drives everything. Per step it is consumed as:
//! the motor permutation, the motor-stage draws in that permutation order,
//! the sensory permutation, then the sensory-stage draws in that order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lattice::{
    self, Budget, Cell, Habitat, OccupancyGrid, Rect, StimulusError, StimulusSet, TrailField,
    DEFAULT_DAMPING,
};
use crate::particles::{self, MotorKind, MotorMode, ParamError, Particle, SensorParams};

/// Cells eligible for initial placement.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedRegion {
    /// Cells whose centre lies within `radius` of `(cx, cy)`.
    Disc {
        cx: f64,
        cy: f64,
        radius: f64,
    },
    Rect(Rect),
    /// Union of several regions. Each cell is counted once.
    Union(Vec<SeedRegion>),
}

impl SeedRegion {
    pub fn contains(&self, c: Cell) -> bool {
        match self {
            SeedRegion::Disc { cx, cy, radius } => {
                let dx = c.x as f64 - cx;
                let dy = c.y as f64 - cy;
                dx * dx + dy * dy <= radius * radius
            }
            SeedRegion::Rect(r) => r.contains(c),
            SeedRegion::Union(parts) => parts.iter().any(|p| p.contains(c)),
        }
    }

    /// Vacant cells of the region in row-major order.
    pub fn vacant_cells(&self, habitat: &Habitat) -> Vec<Cell> {
        let mut out = Vec::new();
        for y in 0..habitat.height() as i32 {
            for x in 0..habitat.width() as i32 {
                let c = Cell::new(x, y);
                if habitat.is_vacant(c) && self.contains(c) {
                    out.push(c);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub population: usize,
    pub sensors: SensorParams,
    pub motor: MotorMode,
    pub damping: f64,
    pub seed: u64,
    pub seed_region: SeedRegion,
    /// Step at which oscillatory motor behaviour switches on, if ever.
    pub oscillation_onset: Option<u64>,
}

impl EngineConfig {
    pub fn new(population: usize, seed_region: SeedRegion) -> Self {
        Self {
            population,
            sensors: SensorParams::default(),
            motor: MotorMode::default(),
            damping: DEFAULT_DAMPING,
            seed: 0,
            seed_region,
            oscillation_onset: None,
        }
    }
}

/// Names accepted by [`Command::SetParam`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Pid,
    SensorAngle,
    RotationAngle,
    SensorOffset,
    Damping,
    Oscillatory,
    Deposit,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::Pid,
        Param::SensorAngle,
        Param::RotationAngle,
        Param::SensorOffset,
        Param::Damping,
        Param::Oscillatory,
        Param::Deposit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Param::Pid => "pID",
            Param::SensorAngle => "SA",
            Param::RotationAngle => "RA",
            Param::SensorOffset => "SO",
            Param::Damping => "damping",
            Param::Oscillatory => "oscillatory",
            Param::Deposit => "deposit",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = CommandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CommandError::UnknownParam(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    EnableOscillation,
    SetPid(f64),
    AddAttractant {
        position: Cell,
        magnitude: f64,
        budget: Budget,
        consumption_rate: f64,
    },
    RemoveAttractant(u32),
    AddIrradiation {
        rect: Rect,
        weight: f64,
    },
    RemoveIrradiation(u32),
    SetParam(Param, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub at_step: u64,
    pub command: Command,
}

impl TimelineEvent {
    pub fn new(at_step: u64, command: Command) -> Self {
        Self { at_step, command }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error("damping must lie in [0,1), got {0}")]
    Damping(f64),
    #[error("oscillatory must be 0 or 1, got {0}")]
    OscillatoryFlag(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("seed region has {available} vacant cells but {requested} particles were requested (short by {deficit})")]
    SeedRegionTooSmall {
        requested: usize,
        available: usize,
        deficit: usize,
    },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("damping must lie in [0,1), got {0}")]
    Damping(f64),
    #[error("timeline event at step {step}: {source}")]
    Timeline { step: u64, source: CommandError },
}

/// Parameters that can change while a world runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveParams {
    pub sensors: SensorParams,
    pub motor: MotorMode,
    pub damping: f64,
}

impl LiveParams {
    /// Returns a copy with `command` applied to the parameters it touches.
    fn with(&self, param: Param, value: f64) -> Result<Self, CommandError> {
        let mut next = *self;
        match param {
            Param::Pid => next.motor.pid = value,
            Param::SensorAngle => next.sensors.sensor_angle = value,
            Param::RotationAngle => next.sensors.rotation_angle = value,
            Param::SensorOffset => next.sensors.sensor_offset = value,
            Param::Deposit => next.motor.deposit = value,
            Param::Damping => {
                if !(0.0..1.0).contains(&value) {
                    return Err(CommandError::Damping(value));
                }
                next.damping = value;
            }
            Param::Oscillatory => {
                next.motor.kind = if value == 1.0 {
                    MotorKind::Oscillatory
                } else if value == 0.0 {
                    MotorKind::NonOscillatory
                } else {
                    return Err(CommandError::OscillatoryFlag(value));
                }
            }
        }
        match param {
            Param::SensorAngle | Param::RotationAngle | Param::SensorOffset => {
                next.sensors.validate()?
            }
            Param::Pid | Param::Deposit => next.motor.validate()?,
            _ => {}
        }
        Ok(next)
    }
}

/// Checks a command against everything knowable before it runs.
///
/// Removal of an unknown stimulus id is not an error here: the id may be
/// created by an earlier event, and removing a consumed source is a no-op.
pub fn validate_command(command: &Command, habitat: &Habitat) -> Result<(), CommandError> {
    match command {
        Command::EnableOscillation
        | Command::RemoveAttractant(_)
        | Command::RemoveIrradiation(_) => Ok(()),
        Command::SetPid(v) => {
            if (0.0..=1.0).contains(v) {
                Ok(())
            } else {
                Err(ParamError::Pid(*v).into())
            }
        }
        Command::AddAttractant {
            position,
            magnitude,
            budget,
            consumption_rate,
        } => Ok(StimulusSet::validate_attractant(
            habitat,
            *position,
            *magnitude,
            *budget,
            *consumption_rate,
        )?),
        Command::AddIrradiation { rect, weight } => {
            Ok(StimulusSet::validate_irradiation(*rect, *weight)?)
        }
        Command::SetParam(param, value) => {
            let base = LiveParams {
                sensors: SensorParams::default(),
                motor: MotorMode::default(),
                damping: DEFAULT_DAMPING,
            };
            base.with(*param, *value).map(|_| ())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub step_index: u64,
    pub moved: usize,
    pub blocked: usize,
    pub total_trail_mass: f64,
    /// `None` for an empty population.
    pub centroid: Option<[f64; 2]>,
}

impl StepStats {
    pub fn moved_fraction(&self) -> f64 {
        let n = self.moved + self.blocked;
        if n == 0 {
            0.0
        } else {
            self.moved as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    habitat: Habitat,
    trail: TrailField,
    scratch: TrailField,
    occupancy: OccupancyGrid,
    particles: Vec<Particle>,
    stimuli: StimulusSet,
    params: LiveParams,
    step_index: u64,
    rng: ChaCha8Rng,
    timeline: Vec<TimelineEvent>,
    cursor: usize,
    order: Vec<u32>,
}

/// Places the population and prepares the timeline.
pub fn init(
    config: &EngineConfig,
    habitat: Habitat,
    timeline: Vec<TimelineEvent>,
) -> Result<World, ConfigError> {
    config.sensors.validate()?;
    config.motor.validate()?;
    if !(0.0..1.0).contains(&config.damping) {
        return Err(ConfigError::Damping(config.damping));
    }
    let mut timeline = timeline;
    for ev in &timeline {
        validate_command(&ev.command, &habitat).map_err(|source| ConfigError::Timeline {
            step: ev.at_step,
            source,
        })?;
    }
    if let Some(onset) = config.oscillation_onset {
        timeline.push(TimelineEvent::new(onset, Command::EnableOscillation));
    }
    timeline.sort_by_key(|e| e.at_step);

    let mut candidates = config.seed_region.vacant_cells(&habitat);
    if candidates.len() < config.population {
        return Err(ConfigError::SeedRegionTooSmall {
            requested: config.population,
            available: candidates.len(),
            deficit: config.population - candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut occupancy = OccupancyGrid::for_habitat(&habitat);
    let mut particles = Vec::with_capacity(config.population);
    for i in 0..config.population {
        let j = rng.gen_range(i..candidates.len());
        candidates.swap(i, j);
        let pos = candidates[i];
        let heading = rng.gen_range(0.0..360.0);
        occupancy.place(pos, i as u32);
        particles.push(Particle::new(pos, heading));
    }

    Ok(World {
        trail: TrailField::for_habitat(&habitat),
        scratch: TrailField::for_habitat(&habitat),
        habitat,
        occupancy,
        order: (0..config.population as u32).collect(),
        particles,
        stimuli: StimulusSet::new(),
        params: LiveParams {
            sensors: config.sensors,
            motor: config.motor,
            damping: config.damping,
        },
        step_index: 0,
        rng,
        timeline,
        cursor: 0,
    })
}

impl World {
    pub fn habitat(&self) -> &Habitat {
        &self.habitat
    }

    pub fn trail(&self) -> &TrailField {
        &self.trail
    }

    pub fn occupancy(&self) -> &OccupancyGrid {
        &self.occupancy
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn stimuli(&self) -> &StimulusSet {
        &self.stimuli
    }

    pub fn params(&self) -> &LiveParams {
        &self.params
    }

    /// Index of the next step to run, i.e. the number of completed steps.
    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn population(&self) -> usize {
        self.particles.len()
    }

    pub fn timeline(&self) -> &[TimelineEvent] {
        &self.timeline
    }

    /// Appends events to the pending timeline. Events dated before the
    /// current step run at the next step.
    pub fn schedule(&mut self, events: impl IntoIterator<Item = TimelineEvent>) {
        let now = self.step_index;
        let pending = self.timeline.split_off(self.cursor);
        let mut pending: Vec<_> = pending
            .into_iter()
            .chain(events.into_iter().map(|mut e| {
                e.at_step = e.at_step.max(now);
                e
            }))
            .collect();
        pending.sort_by_key(|e| e.at_step);
        self.timeline.extend(pending);
    }

    /// Applies one command immediately.
    pub fn apply(&mut self, command: &Command) -> Result<(), CommandError> {
        match command {
            Command::EnableOscillation => self.params.motor.kind = MotorKind::Oscillatory,
            Command::SetPid(v) => self.params = self.params.with(Param::Pid, *v)?,
            Command::SetParam(param, v) => self.params = self.params.with(*param, *v)?,
            Command::AddAttractant {
                position,
                magnitude,
                budget,
                consumption_rate,
            } => {
                self.stimuli.add_attractant(
                    &self.habitat,
                    *position,
                    *magnitude,
                    *budget,
                    *consumption_rate,
                )?;
            }
            Command::RemoveAttractant(id) => {
                if !self.stimuli.remove_attractant(*id) {
                    log::debug!("attractant {id} already gone");
                }
            }
            Command::AddIrradiation { rect, weight } => {
                self.stimuli.add_irradiation(*rect, *weight)?;
            }
            Command::RemoveIrradiation(id) => {
                if !self.stimuli.remove_irradiation(*id) {
                    log::debug!("irradiation region {id} already gone");
                }
            }
        }
        Ok(())
    }

    fn apply_due_events(&mut self) {
        while self.cursor < self.timeline.len()
            && self.timeline[self.cursor].at_step <= self.step_index
        {
            let command = self.timeline[self.cursor].command.clone();
            self.cursor += 1;
            if let Err(e) = self.apply(&command) {
                log::warn!("step {}: skipping {command:?}: {e}", self.step_index);
            }
        }
    }

    pub fn step(&mut self) -> StepStats {
        self.apply_due_events();

        let motor = self.params.motor;
        let sensors = self.params.sensors;

        self.order.shuffle(&mut self.rng);
        let mut moved = 0;
        for &i in &self.order {
            let p = &mut self.particles[i as usize];
            if particles::motor_stage(
                p,
                &mut self.occupancy,
                &self.habitat,
                &mut self.trail,
                &motor,
                &mut self.rng,
            ) {
                moved += 1;
            }
        }

        self.order.shuffle(&mut self.rng);
        for &i in &self.order {
            let p = &mut self.particles[i as usize];
            let cells = particles::sensor_positions(p, &sensors);
            let sampled =
                cells.map(|c| lattice::sample(&self.trail, &self.habitat, &self.stimuli, c));
            p.heading = particles::sensory_stage(p.heading, sampled, &sensors, &mut self.rng);
        }

        lattice::project_stimuli_in_place(&mut self.trail, &mut self.stimuli, &self.occupancy);
        lattice::diffuse_into(
            &self.trail,
            &self.habitat,
            self.params.damping,
            &mut self.scratch,
        );
        std::mem::swap(&mut self.trail, &mut self.scratch);

        let stats = StepStats {
            step_index: self.step_index,
            moved,
            blocked: self.particles.len() - moved,
            total_trail_mass: self.trail.total_mass(),
            centroid: self.centroid(),
        };
        self.step_index += 1;
        stats
    }

    pub fn centroid(&self) -> Option<[f64; 2]> {
        crate::metrics::centroid(&self.particles).ok()
    }

    /// True when occupancy and particle positions describe the same bijection.
    pub fn occupancy_consistent(&self) -> bool {
        if self.occupancy.occupied_count() != self.particles.len() {
            return false;
        }
        self.particles.iter().enumerate().all(|(i, p)| {
            self.habitat.is_vacant(p.pos) && self.occupancy.get(p.pos) == Some(i as u32)
        })
    }
}

#[derive(Debug, Error)]
#[error("observer failed at step {step}: {source}")]
pub struct RunError {
    pub step: u64,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

/// Read-only hook invoked by [`run`].
pub trait Observer {
    /// Called every `cadence()` completed steps; 0 disables step callbacks.
    fn cadence(&self) -> u64 {
        1
    }

    /// Called once before the first step.
    fn on_start(&mut self, _world: &World) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        Ok(())
    }

    /// Called after a step whose completed-step count is a multiple of the cadence.
    fn on_step(
        &mut self,
        world: &World,
        stats: &StepStats,
    ) -> Result<(), Box<dyn std::error::Error + Send + Sync>>;
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub world: World,
    pub stats: Vec<StepStats>,
}

/// Runs `n_steps` steps, notifying observers at their cadences.
pub fn run(
    mut world: World,
    n_steps: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutput, RunError> {
    for o in observers.iter_mut() {
        o.on_start(&world).map_err(|source| RunError {
            step: world.step_index,
            source,
        })?;
    }
    let mut stats = Vec::with_capacity(n_steps as usize);
    for _ in 0..n_steps {
        let s = world.step();
        let done = world.step_index;
        for o in observers.iter_mut() {
            let every = o.cadence();
            if every > 0 && done.is_multiple_of(every) {
                o.on_step(&world, &s).map_err(|source| RunError {
                    step: s.step_index,
                    source,
                })?;
            }
        }
        stats.push(s);
    }
    Ok(RunOutput { world, stats })
}

/// SHA-256 over the trail values, the particle array and the stats series,
/// all little-endian, as lowercase hex.
pub fn digest(world: &World, stats: &[StepStats]) -> String {
    let mut h = Sha256::new();
    h.update((world.trail.width() as u64).to_le_bytes());
    h.update((world.trail.height() as u64).to_le_bytes());
    for v in world.trail.values() {
        h.update(v.to_le_bytes());
    }
    h.update((world.particles.len() as u64).to_le_bytes());
    for p in &world.particles {
        h.update(p.pos.x.to_le_bytes());
        h.update(p.pos.y.to_le_bytes());
        h.update(p.heading.to_le_bytes());
        h.update(p.internal_offset[0].to_le_bytes());
        h.update(p.internal_offset[1].to_le_bytes());
    }
    h.update((stats.len() as u64).to_le_bytes());
    for s in stats {
        h.update(s.step_index.to_le_bytes());
        h.update((s.moved as u64).to_le_bytes());
        h.update((s.blocked as u64).to_le_bytes());
        h.update(s.total_trail_mass.to_le_bytes());
        let [cx, cy] = s.centroid.unwrap_or([f64::NAN, f64::NAN]);
        h.update(cx.to_le_bytes());
        h.update(cy.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
