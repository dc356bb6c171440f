//! Shipped experiments.
//!
//! Arenas are the smallest that hold each experiment's stated geometry with
//! at least a 20-cell margin. Oscillatory motor behaviour is switched on by
//! a timeline event at [`ONSET`], after the collective has condensed.

use super::{HabitatSource, ScenarioSpec};
use crate::engine::{Command, SeedRegion, TimelineEvent};
use crate::lattice::{Budget, Cell, Rect};

pub const ONSET: u64 = 1000;

pub const PRESET_NAMES: [&str; 10] = [
    "condense",
    "oscillate",
    "fragment",
    "attract",
    "irradiate",
    "cleave",
    "fuse",
    "channel",
    "split-channel",
    "grating",
];

pub fn builtin_presets() -> Vec<ScenarioSpec> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("every listed preset exists"))
        .collect()
}

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    Some(match name {
        "condense" => condense(),
        "oscillate" => oscillate(),
        "fragment" => fragment(),
        "attract" => attract(),
        "irradiate" => irradiate(),
        "cleave" => cleave(),
        "fuse" => fuse(),
        "channel" => channel(),
        "split-channel" => split_channel(),
        "grating" => grating(),
        _ => return None,
    })
}

fn disc(cx: f64, cy: f64, radius: f64) -> SeedRegion {
    SeedRegion::Disc { cx, cy, radius }
}

fn at(step: u64, command: Command) -> TimelineEvent {
    TimelineEvent::new(step, command)
}

fn irradiate_rect(step: u64, x0: i32, y0: i32, x1: i32, y1: i32, weight: f64) -> TimelineEvent {
    at(
        step,
        Command::AddIrradiation {
            rect: Rect::new(x0, y0, x1, y1),
            weight,
        },
    )
}

fn set_walls(spec: &mut ScenarioSpec, rects: Vec<Rect>) {
    if let HabitatSource::Generated { walls, .. } = &mut spec.habitat {
        *walls = rects;
    }
}

/// Irradiation covering every column left of a front that advances by
/// `advance` cells every `every` steps. Each new band is added before the
/// previous one is removed, in the same step.
struct Sweep {
    next_id: u32,
    events: Vec<TimelineEvent>,
}

impl Sweep {
    fn new(first_id: u32) -> Self {
        Self {
            next_id: first_id,
            events: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push_right(
        &mut self,
        start: u64,
        every: u64,
        front_from: i32,
        front_to: i32,
        advance: i32,
        rows: (i32, i32),
        weight: f64,
    ) -> u64 {
        let mut step = start;
        let mut front = front_from;
        let mut live: Option<u32> = None;
        loop {
            self.events
                .push(irradiate_rect(step, 0, rows.0, front, rows.1, weight));
            let id = self.next_id;
            self.next_id += 1;
            if let Some(prev) = live.replace(id) {
                self.events.push(at(step, Command::RemoveIrradiation(prev)));
            }
            if front >= front_to {
                break;
            }
            front = (front + advance).min(front_to);
            step += every;
        }
        step += every;
        if let Some(prev) = live {
            self.events.push(at(step, Command::RemoveIrradiation(prev)));
        }
        step
    }
}

fn condense() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("condense", 170, 170, 9380);
    s.seed_regions = vec![disc(85.0, 85.0, 62.0)];
    s.steps = 2000;
    s
}

fn oscillate() -> ScenarioSpec {
    let mut s = condense();
    s.name = "oscillate".into();
    s.timeline = vec![
        at(ONSET, Command::EnableOscillation),
        at(ONSET + 1000, Command::SetPid(0.01)),
    ];
    s.steps = ONSET + 2000;
    s
}

fn fragment() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("fragment", 300, 300, 900);
    s.seed_regions = vec![disc(150.0, 150.0, 20.0)];
    s.sensors.sensor_offset = 9.0;
    s.motor.pid = 0.001;
    s.timeline = vec![at(ONSET, Command::EnableOscillation)];
    s.steps = ONSET + 5000;
    s
}

fn attract() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("attract", 200, 110, 3000);
    s.seed_regions = vec![disc(55.0, 55.0, 34.0)];
    s.timeline = vec![
        at(ONSET, Command::EnableOscillation),
        at(
            ONSET + 500,
            Command::AddAttractant {
                position: Cell::new(130, 55),
                magnitude: 1000.0,
                budget: Budget::Finite(50_000.0),
                consumption_rate: 100.0,
            },
        ),
    ];
    s.steps = ONSET + 8000;
    s
}

fn irradiate() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("irradiate", 170, 110, 3000);
    s.seed_regions = vec![disc(60.0, 55.0, 34.0)];
    s.timeline = vec![
        at(ONSET, Command::EnableOscillation),
        irradiate_rect(ONSET + 500, 0, 0, 60, 109, 0.1),
    ];
    s.steps = ONSET + 5500;
    s
}

/// The halves drift apart while the band is on, so the arena leaves room for
/// both beside the band.
fn cleave() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("cleave", 240, 140, 5000);
    s.seed_regions = vec![disc(120.0, 70.0, 45.0)];
    s.timeline = vec![
        at(ONSET, Command::EnableOscillation),
        irradiate_rect(ONSET + 500, 110, 0, 130, 139, 0.1),
        at(ONSET + 2500, Command::RemoveIrradiation(0)),
    ];
    s.steps = ONSET + 4000;
    s
}

fn fuse() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("fuse", 220, 110, 4000);
    s.seed_regions = vec![disc(55.0, 55.0, 28.0), disc(165.0, 55.0, 28.0)];
    let mut sweep = Sweep::new(0);
    sweep.push_right(ONSET + 500, 250, 40, 120, 4, (0, 109), 0.1);
    s.timeline = vec![at(ONSET, Command::EnableOscillation)];
    s.timeline.extend(sweep.events);
    s.steps = ONSET + 8000;
    s
}

/// Habitat with a horizontal corridor `width` cells wide between two chambers.
fn corridor_walls(arena: (i32, i32), x0: i32, x1: i32, corridors: &[(i32, i32)]) -> Vec<Rect> {
    let (_, h) = arena;
    let mut walls = Vec::new();
    let mut y = 0;
    for &(c0, c1) in corridors {
        if c0 > y {
            walls.push(Rect::new(x0, y, x1, c0 - 1));
        }
        y = c1 + 1;
    }
    if y < h {
        walls.push(Rect::new(x0, y, x1, h - 1));
    }
    walls
}

fn channel() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("channel", 300, 110, 1800);
    s.seed_regions = vec![disc(50.0, 55.0, 27.0)];
    set_walls(&mut s, corridor_walls((300, 110), 110, 170, &[(40, 69)]));
    let mut sweep = Sweep::new(0);
    sweep.push_right(ONSET + 500, 250, 20, 200, 4, (0, 109), 0.1);
    s.timeline = vec![at(ONSET, Command::EnableOscillation)];
    s.timeline.extend(sweep.events);
    s.steps = ONSET + 12000;
    s
}

fn split_channel() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("split-channel", 300, 130, 1800);
    s.seed_regions = vec![disc(50.0, 65.0, 27.0)];
    set_walls(
        &mut s,
        corridor_walls((300, 130), 110, 170, &[(22, 51), (78, 107)]),
    );
    let mut sweep = Sweep::new(0);
    sweep.push_right(ONSET + 500, 250, 20, 200, 4, (0, 129), 0.1);
    s.timeline = vec![at(ONSET, Command::EnableOscillation)];
    s.timeline.extend(sweep.events);
    s.steps = ONSET + 12000;
    s
}

fn grating() -> ScenarioSpec {
    let mut s = ScenarioSpec::new("grating", 300, 110, 1800);
    s.seed_regions = vec![disc(50.0, 55.0, 27.0)];
    // staggered posts leave winding gaps about 20 cells wide
    let mut walls = Vec::new();
    for (i, x) in (110..190).step_by(20).enumerate() {
        let offset = if i % 2 == 0 { 0 } else { 20 };
        let mut y = offset - 10;
        while y < 110 {
            walls.push(Rect::new(x, y.max(0), x + 5, (y + 19).min(109)));
            y += 40;
        }
    }
    set_walls(&mut s, walls);
    let mut sweep = Sweep::new(0);
    sweep.push_right(ONSET + 500, 250, 20, 220, 4, (0, 109), 0.1);
    s.timeline = vec![at(ONSET, Command::EnableOscillation)];
    s.timeline.extend(sweep.events);
    s.steps = ONSET + 12000;
    s
}
