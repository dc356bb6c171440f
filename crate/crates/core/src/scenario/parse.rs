//! The scenario text format.
//!
//! ```text
//! # comments run to the end of the line
//! name = condense
//! arena = 170 170            # or: habitat = relative/or/absolute.pgm
//! wall = 0 0 9 169           # repeatable, inclusive corners (arena only)
//! population = 9380
//! seed_disc = 85 85 62       # repeatable; seed_rect = x0 y0 x1 y1 also
//! SA = 90
//! SO = 15
//! onset = 1000               # or: never
//! steps = 2000
//!
//! [timeline]
//! 1500, SetPID, 0.01
//! 1600, AddIrradiation, 0, 0, 60, 169, 0.1
//! ```
//!
//! Scalar keys may appear at most once. Timeline rows are
//! `step, command, args...` with these commands:
//! `EnableOscillation`, `SetPID v`, `AddAttractant x y magnitude budget rate`
//! (budget is a number or `unlimited`), `RemoveAttractant id`,
//! `AddIrradiation x0 y0 x1 y1 weight`, `RemoveIrradiation id` and
//! `SetParam name value`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{HabitatSource, ScenarioError, ScenarioSpec};
use crate::engine::{self, Command, Param, SeedRegion, TimelineEvent};
use crate::lattice::{Budget, Cell, Rect};
use crate::particles::{MotorKind, ParamError};

const REPEATABLE: [&str; 3] = ["wall", "seed_disc", "seed_rect"];

pub(crate) fn param_key(e: &ParamError) -> &'static str {
    match e {
        ParamError::SensorAngle(_) => "SA",
        ParamError::RotationAngle(_) => "RA",
        ParamError::SensorOffset(_) => "SO",
        ParamError::Pid(_) => "pID",
        ParamError::Deposit(_) => "deposit",
    }
}

fn number<T: FromStr>(key: &str, value: &str, line: usize, what: &str) -> Result<T, ScenarioError> {
    value
        .trim()
        .parse()
        .map_err(|_| ScenarioError::new(line, key, format!("expected {what}, got {value:?}")))
}

fn real(key: &str, value: &str, line: usize) -> Result<f64, ScenarioError> {
    let v: f64 = number(key, value, line, "a number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScenarioError::new(
            line,
            key,
            format!("expected a finite number, got {value:?}"),
        ))
    }
}

fn fields<const N: usize>(key: &str, value: &str, line: usize) -> Result<[f64; N], ScenarioError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != N {
        return Err(ScenarioError::new(
            line,
            key,
            format!("expected {N} values, got {}", parts.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = real(key, p, line)?;
    }
    Ok(out)
}

fn int_fields<const N: usize>(
    key: &str,
    value: &str,
    line: usize,
) -> Result<[i32; N], ScenarioError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != N {
        return Err(ScenarioError::new(
            line,
            key,
            format!("expected {N} integers, got {}", parts.len()),
        ));
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = number(key, p, line, "an integer")?;
    }
    Ok(out)
}

fn rect(key: &str, value: &str, line: usize) -> Result<Rect, ScenarioError> {
    let [x0, y0, x1, y1] = int_fields::<4>(key, value, line)?;
    let r = Rect::new(x0, y0, x1, y1);
    if !r.is_well_formed() {
        return Err(ScenarioError::new(
            line,
            key,
            "rectangle corners are out of order",
        ));
    }
    Ok(r)
}

fn check_param(
    key: &str,
    line: usize,
    result: Result<(), ParamError>,
) -> Result<(), ScenarioError> {
    result.map_err(|e| ScenarioError::new(line, key, e.to_string()))
}

/// Sets one non-repeatable key. Shared by the parser and by overrides, which
/// pass line 0.
pub(crate) fn set_scalar(
    spec: &mut ScenarioSpec,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ScenarioError> {
    let value = value.trim();
    match key {
        "name" => {
            if value.is_empty() {
                return Err(ScenarioError::new(line, key, "name must not be empty"));
            }
            spec.name = value.to_string();
        }
        "arena" => {
            let [w, h] = int_fields::<2>(key, value, line)?;
            if w <= 0 || h <= 0 {
                return Err(ScenarioError::new(
                    line,
                    key,
                    "arena must have positive size",
                ));
            }
            let walls = match &spec.habitat {
                HabitatSource::Generated { walls, .. } => walls.clone(),
                HabitatSource::File(_) => Vec::new(),
            };
            spec.habitat = HabitatSource::Generated {
                width: w as usize,
                height: h as usize,
                walls,
            };
        }
        "population" => spec.population = number(key, value, line, "a count")?,
        "SA" => {
            spec.sensors.sensor_angle = real(key, value, line)?;
            check_param(key, line, spec.sensors.validate())?;
        }
        "RA" => {
            spec.sensors.rotation_angle = real(key, value, line)?;
            check_param(key, line, spec.sensors.validate())?;
        }
        "SO" => {
            spec.sensors.sensor_offset = real(key, value, line)?;
            check_param(key, line, spec.sensors.validate())?;
        }
        "pID" => {
            spec.motor.pid = real(key, value, line)?;
            check_param(key, line, spec.motor.validate())?;
        }
        "deposit" => {
            spec.motor.deposit = real(key, value, line)?;
            check_param(key, line, spec.motor.validate())?;
        }
        "damping" => {
            let d = real(key, value, line)?;
            if !(0.0..1.0).contains(&d) {
                return Err(ScenarioError::new(
                    line,
                    key,
                    format!("damping must lie in [0,1), got {d}"),
                ));
            }
            spec.damping = d;
        }
        "oscillatory" => {
            spec.motor.kind = match value {
                "0" | "false" => MotorKind::NonOscillatory,
                "1" | "true" => MotorKind::Oscillatory,
                _ => {
                    return Err(ScenarioError::new(
                        line,
                        key,
                        format!("expected 0 or 1, got {value:?}"),
                    ))
                }
            }
        }
        "onset" => {
            spec.oscillation_onset = if value == "never" {
                None
            } else {
                Some(number(key, value, line, "a step index or \"never\"")?)
            }
        }
        "seed" => spec.seed = number(key, value, line, "an unsigned integer")?,
        "frame_every" => spec.frame_every = number(key, value, line, "a step count")?,
        "metrics_every" => spec.metrics_every = number(key, value, line, "a step count")?,
        "steps" => spec.steps = number(key, value, line, "a step count")?,
        "habitat" => {
            return Err(ScenarioError::new(
                line,
                key,
                "habitat can only be set in a scenario file",
            ))
        }
        k if REPEATABLE.contains(&k) => {
            return Err(ScenarioError::new(
                line,
                key,
                "repeatable keys cannot be overridden",
            ))
        }
        _ => return Err(ScenarioError::new(line, key, "unknown key")),
    }
    Ok(())
}

fn expect_args<'a>(
    name: &str,
    args: &'a [&'a str],
    n: usize,
    line: usize,
) -> Result<&'a [&'a str], ScenarioError> {
    if args.len() == n {
        Ok(args)
    } else {
        Err(ScenarioError::new(
            line,
            name,
            format!("expected {n} arguments, got {}", args.len()),
        ))
    }
}

fn parse_command(name: &str, args: &[&str], line: usize) -> Result<Command, ScenarioError> {
    let id = |s: &str| number::<u32>(name, s, line, "a stimulus id");
    Ok(match name {
        "EnableOscillation" => {
            expect_args(name, args, 0, line)?;
            Command::EnableOscillation
        }
        "SetPID" => {
            let a = expect_args(name, args, 1, line)?;
            Command::SetPid(real(name, a[0], line)?)
        }
        "AddAttractant" => {
            let a = expect_args(name, args, 5, line)?;
            let budget = if a[3] == "unlimited" {
                Budget::Unlimited
            } else {
                Budget::Finite(real(name, a[3], line)?)
            };
            Command::AddAttractant {
                position: Cell::new(
                    number(name, a[0], line, "an integer")?,
                    number(name, a[1], line, "an integer")?,
                ),
                magnitude: real(name, a[2], line)?,
                budget,
                consumption_rate: real(name, a[4], line)?,
            }
        }
        "RemoveAttractant" => Command::RemoveAttractant(id(expect_args(name, args, 1, line)?[0])?),
        "AddIrradiation" => {
            let a = expect_args(name, args, 5, line)?;
            Command::AddIrradiation {
                rect: rect(name, &a[..4].join(" "), line)?,
                weight: real(name, a[4], line)?,
            }
        }
        "RemoveIrradiation" => {
            Command::RemoveIrradiation(id(expect_args(name, args, 1, line)?[0])?)
        }
        "SetParam" => {
            let a = expect_args(name, args, 2, line)?;
            let param =
                Param::from_str(a[0]).map_err(|e| ScenarioError::new(line, name, e.to_string()))?;
            Command::SetParam(param, real(name, a[1], line)?)
        }
        _ => return Err(ScenarioError::new(line, name, "unknown timeline command")),
    })
}

/// Parses scenario text. Relative habitat paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let mut spec = ScenarioSpec::new("", 0, 0, 0);
    spec.habitat = HabitatSource::Generated {
        width: 0,
        height: 0,
        walls: Vec::new(),
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut walls: Vec<Rect> = Vec::new();
    let mut in_timeline = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if content == "[timeline]" && !in_timeline {
                in_timeline = true;
                continue;
            }
            return Err(ScenarioError::new(
                line,
                content,
                "unknown or repeated section",
            ));
        }

        if in_timeline {
            let parts: Vec<&str> = content.split(',').map(str::trim).collect();
            if parts.len() < 2 {
                return Err(ScenarioError::new(
                    line,
                    "timeline",
                    "expected \"step, command, args...\"",
                ));
            }
            let step: u64 = number("timeline", parts[0], line, "a step index")?;
            let command = parse_command(parts[1], &parts[2..], line)?;
            spec.timeline.push(TimelineEvent::new(step, command));
            continue;
        }

        let Some((key, value)) = content.split_once('=') else {
            return Err(ScenarioError::new(
                line,
                content,
                "expected \"key = value\"",
            ));
        };
        let (key, value) = (key.trim(), value.trim());
        if !REPEATABLE.contains(&key) {
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(ScenarioError::new(
                    line,
                    key,
                    format!("duplicate key, first set on line {first}"),
                ));
            }
        }
        match key {
            "wall" => walls.push(rect(key, value, line)?),
            "seed_disc" => {
                let [cx, cy, radius] = fields::<3>(key, value, line)?;
                if !(radius >= 0.0) {
                    return Err(ScenarioError::new(line, key, "radius must be non-negative"));
                }
                spec.seed_regions.push(SeedRegion::Disc { cx, cy, radius });
            }
            "seed_rect" => spec
                .seed_regions
                .push(SeedRegion::Rect(rect(key, value, line)?)),
            "habitat" => {
                let path = base_dir.join(value);
                let resolved = path.canonicalize().map_err(|e| {
                    ScenarioError::new(line, key, format!("cannot open {}: {e}", path.display()))
                })?;
                spec.habitat = HabitatSource::File(resolved);
            }
            _ => set_scalar(&mut spec, key, value, line)?,
        }
    }

    for required in ["name", "population"] {
        if !seen.contains_key(required) {
            return Err(ScenarioError::new(0, required, "missing required key"));
        }
    }
    match (seen.get("arena"), seen.get("habitat")) {
        (None, None) => {
            return Err(ScenarioError::new(
                0,
                "arena",
                "one of arena or habitat is required",
            ))
        }
        (Some(_), Some(&l)) => {
            return Err(ScenarioError::new(
                l,
                "habitat",
                "arena and habitat are mutually exclusive",
            ))
        }
        (Some(_), None) => {
            if let HabitatSource::Generated { walls: w, .. } = &mut spec.habitat {
                *w = walls;
            }
        }
        (None, Some(&l)) => {
            if !walls.is_empty() {
                return Err(ScenarioError::new(
                    l,
                    "wall",
                    "walls need a generated arena",
                ));
            }
        }
    }

    let habitat = spec.build_habitat().map_err(|mut e| {
        e.line = seen.get(e.key.as_str()).copied().unwrap_or(0);
        e
    })?;
    // timeline rows are checked one by one so errors carry their own line
    let mut row_lines = text
        .lines()
        .enumerate()
        .skip_while(|(_, l)| l.split('#').next().unwrap_or("").trim() != "[timeline]")
        .skip(1)
        .filter(|(_, l)| !l.split('#').next().unwrap_or("").trim().is_empty())
        .map(|(i, _)| i + 1);
    for ev in &spec.timeline {
        let line = row_lines.next().unwrap_or(0);
        engine::validate_command(&ev.command, &habitat)
            .map_err(|e| ScenarioError::new(line, "timeline", e.to_string()))?;
    }
    spec.validate().map_err(|mut e| {
        e.line = seen.get(e.key.as_str()).copied().unwrap_or(0);
        e
    })?;
    Ok(spec)
}

/// Reads and parses a scenario file, resolving paths against its directory.
pub fn parse_scenario_file(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::new(0, "scenario", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

fn rect_text(r: &Rect) -> String {
    format!("{} {} {} {}", r.x0, r.y0, r.x1, r.y1)
}

fn command_text(c: &Command) -> String {
    match c {
        Command::EnableOscillation => "EnableOscillation".to_string(),
        Command::SetPid(v) => format!("SetPID, {v}"),
        Command::AddAttractant {
            position,
            magnitude,
            budget,
            consumption_rate,
        } => {
            let b = match budget {
                Budget::Unlimited => "unlimited".to_string(),
                Budget::Finite(b) => b.to_string(),
            };
            format!(
                "AddAttractant, {}, {}, {magnitude}, {b}, {consumption_rate}",
                position.x, position.y
            )
        }
        Command::RemoveAttractant(id) => format!("RemoveAttractant, {id}"),
        Command::AddIrradiation { rect, weight } => format!(
            "AddIrradiation, {}, {}, {}, {}, {weight}",
            rect.x0, rect.y0, rect.x1, rect.y1
        ),
        Command::RemoveIrradiation(id) => format!("RemoveIrradiation, {id}"),
        Command::SetParam(p, v) => format!("SetParam, {p}, {v}"),
    }
}

pub(crate) fn serialize(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("name", spec.name.clone());
    match &spec.habitat {
        HabitatSource::File(p) => kv("habitat", p.display().to_string()),
        HabitatSource::Generated {
            width,
            height,
            walls,
        } => {
            kv("arena", format!("{width} {height}"));
            for w in walls {
                kv("wall", rect_text(w));
            }
        }
    }
    kv("population", spec.population.to_string());
    for r in &spec.seed_regions {
        match r {
            SeedRegion::Disc { cx, cy, radius } => kv("seed_disc", format!("{cx} {cy} {radius}")),
            SeedRegion::Rect(rect) => kv("seed_rect", rect_text(rect)),
            // nested unions are flattened by the builders; keep their cells
            SeedRegion::Union(parts) => {
                for p in parts {
                    if let SeedRegion::Rect(rect) = p {
                        kv("seed_rect", rect_text(rect));
                    } else if let SeedRegion::Disc { cx, cy, radius } = p {
                        kv("seed_disc", format!("{cx} {cy} {radius}"));
                    }
                }
            }
        }
    }
    kv("SA", spec.sensors.sensor_angle.to_string());
    kv("RA", spec.sensors.rotation_angle.to_string());
    kv("SO", spec.sensors.sensor_offset.to_string());
    kv("pID", spec.motor.pid.to_string());
    kv("deposit", spec.motor.deposit.to_string());
    kv("damping", spec.damping.to_string());
    kv(
        "oscillatory",
        if spec.motor.kind == MotorKind::Oscillatory {
            "1"
        } else {
            "0"
        }
        .to_string(),
    );
    kv(
        "onset",
        spec.oscillation_onset
            .map_or_else(|| "never".to_string(), |s| s.to_string()),
    );
    kv("seed", spec.seed.to_string());
    kv("frame_every", spec.frame_every.to_string());
    kv("metrics_every", spec.metrics_every.to_string());
    kv("steps", spec.steps.to_string());
    if !spec.timeline.is_empty() {
        out.push_str("\n[timeline]\n");
        for ev in &spec.timeline {
            let _ = writeln!(out, "{}, {}", ev.at_step, command_text(&ev.command));
        }
    }
    out
}
