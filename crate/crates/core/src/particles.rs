//! Particle state and the two behavioural stages.
//!
//! Headings are real degrees in `[0, 360)` with 0° pointing along `+x`.
//! Because `y` grows downward, positive rotation turns clockwise on screen;
//! the left sensor sits at `heading - SA` and the right at `heading + SA`.

use rand::Rng;
use thiserror::Error;

use crate::lattice::{Cell, Habitat, OccupancyGrid, TrailField};

/// Sensor offsets below this lose strong local coupling.
pub const COUPLING_MIN_OFFSET: f64 = 3.0;

pub const DEFAULT_DEPOSIT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("SA must lie in [0, 180), got {0}")]
    SensorAngle(f64),
    #[error("RA must lie in (0, 180), got {0}")]
    RotationAngle(f64),
    #[error("SO must be at least 1, got {0}")]
    SensorOffset(f64),
    #[error("pID must lie in [0,1], got {0}")]
    Pid(f64),
    #[error("deposit must be positive, got {0}")]
    Deposit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// SA, degrees between the forward sensor and each side sensor.
    pub sensor_angle: f64,
    /// RA, degrees turned per sensory decision.
    pub rotation_angle: f64,
    /// SO, sensing distance in cells.
    pub sensor_offset: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            sensor_angle: 90.0,
            rotation_angle: 45.0,
            sensor_offset: 15.0,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..180.0).contains(&self.sensor_angle) {
            return Err(ParamError::SensorAngle(self.sensor_angle));
        }
        if !(self.rotation_angle > 0.0 && self.rotation_angle < 180.0) {
            return Err(ParamError::RotationAngle(self.rotation_angle));
        }
        if !(self.sensor_offset >= 1.0) || !self.sensor_offset.is_finite() {
            return Err(ParamError::SensorOffset(self.sensor_offset));
        }
        if self.sensor_offset < COUPLING_MIN_OFFSET {
            log::warn!(
                "SO {} is below {COUPLING_MIN_OFFSET} cells; local coupling will be weak",
                self.sensor_offset
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotorKind {
    NonOscillatory,
    Oscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorMode {
    pub kind: MotorKind,
    /// Probability that a blocked oscillatory particle resets and re-aims.
    pub pid: f64,
    /// Trail deposited per successful move.
    pub deposit: f64,
}

impl Default for MotorMode {
    fn default() -> Self {
        Self {
            kind: MotorKind::NonOscillatory,
            pid: 0.05,
            deposit: DEFAULT_DEPOSIT,
        }
    }
}

impl MotorMode {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..=1.0).contains(&self.pid) {
            return Err(ParamError::Pid(self.pid));
        }
        if !(self.deposit > 0.0) || !self.deposit.is_finite() {
            return Err(ParamError::Deposit(self.deposit));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pos: Cell,
    pub heading: f64,
    /// Intended motion accumulated while blocked in oscillatory mode.
    pub internal_offset: [f64; 2],
}

impl Particle {
    pub fn new(pos: Cell, heading: f64) -> Self {
        Self {
            pos,
            heading: normalize_heading(heading),
            internal_offset: [0.0, 0.0],
        }
    }
}

/// Wraps any finite angle into `[0, 360)`.
#[inline]
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

#[inline]
pub fn unit(heading_deg: f64) -> (f64, f64) {
    let (s, c) = heading_deg.to_radians().sin_cos();
    (c, s)
}

#[inline]
fn offset_cell(pos: Cell, heading_deg: f64, distance: f64) -> Cell {
    let (dx, dy) = unit(heading_deg);
    Cell::new(
        (pos.x as f64 + distance * dx).round() as i32,
        (pos.y as f64 + distance * dy).round() as i32,
    )
}

/// The cell directly ahead of the particle.
#[inline]
pub fn front_cell(p: &Particle) -> Cell {
    offset_cell(p.pos, p.heading, 1.0)
}

/// Sensor cells `[FL, F, FR]`.
pub fn sensor_positions(p: &Particle, params: &SensorParams) -> [Cell; 3] {
    let so = params.sensor_offset;
    [
        offset_cell(p.pos, p.heading - params.sensor_angle, so),
        offset_cell(p.pos, p.heading, so),
        offset_cell(p.pos, p.heading + params.sensor_angle, so),
    ]
}

/// Chooses a new heading from the three sensor readings `[fl, f, fr]`.
///
/// Forward strongest keeps the heading, forward weakest turns a random way,
/// otherwise the particle turns toward the stronger side. Exact ties keep
/// the heading. Only the forward-weakest branch draws from `rng`.
pub fn sensory_stage<R: Rng + ?Sized>(
    heading: f64,
    sampled: [f64; 3],
    params: &SensorParams,
    rng: &mut R,
) -> f64 {
    let [fl, f, fr] = sampled;
    let ra = params.rotation_angle;
    let next = if f > fl && f > fr {
        heading
    } else if f < fl && f < fr {
        if rng.gen_bool(0.5) {
            heading + ra
        } else {
            heading - ra
        }
    } else if fl < fr {
        heading + ra
    } else if fr < fl {
        heading - ra
    } else {
        heading
    };
    normalize_heading(next)
}

/// Target cell index if the front cell can be entered.
#[inline]
fn free_target(p: &Particle, occupancy: &OccupancyGrid, habitat: &Habitat) -> Option<usize> {
    let target = front_cell(p);
    habitat
        .index(target)
        .filter(|&i| !habitat.is_wall_index(i) && !occupancy.is_occupied_index(i))
}

#[inline]
fn advance(
    p: &mut Particle,
    target: usize,
    occupancy: &mut OccupancyGrid,
    habitat: &Habitat,
    trail: &mut TrailField,
    deposit: f64,
) {
    let from = habitat
        .index(p.pos)
        .expect("particle position lies inside the habitat");
    occupancy.move_index(from, target);
    p.pos = habitat.cell_at(target);
    p.internal_offset = [0.0, 0.0];
    trail.add_index(target, deposit);
}

#[inline]
fn random_heading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(0.0..360.0)
}

/// Default motor behaviour: step forward one cell or, when blocked, stay put
/// and pick a fresh random heading.
pub fn motor_stage_nonosc<R: Rng + ?Sized>(
    p: &mut Particle,
    occupancy: &mut OccupancyGrid,
    habitat: &Habitat,
    trail: &mut TrailField,
    mode: &MotorMode,
    rng: &mut R,
) -> bool {
    match free_target(p, occupancy, habitat) {
        Some(target) => {
            advance(p, target, occupancy, habitat, trail, mode.deposit);
            true
        }
        None => {
            p.heading = random_heading(rng);
            false
        }
    }
}

/// Cell ahead of the particle's internal position `pos + internal_offset`.
///
/// Equals [`front_cell`] whenever the offset is zero.
#[inline]
pub fn internal_front_cell(p: &Particle) -> Cell {
    let (dx, dy) = unit(p.heading);
    Cell::new(
        (p.pos.x as f64 + p.internal_offset[0] + dx).round() as i32,
        (p.pos.y as f64 + p.internal_offset[1] + dy).round() as i32,
    )
}

/// Oscillatory motor behaviour: a blocked particle keeps its heading and
/// keeps advancing its internal position along it, then occupies the cell
/// ahead of that internal position as soon as it is free.
///
/// Every blocked step consumes one uniform draw for the `pID` test and, on
/// success, one more for the new heading.
pub fn motor_stage_osc<R: Rng + ?Sized>(
    p: &mut Particle,
    occupancy: &mut OccupancyGrid,
    habitat: &Habitat,
    trail: &mut TrailField,
    mode: &MotorMode,
    rng: &mut R,
) -> bool {
    let target = habitat
        .index(internal_front_cell(p))
        .filter(|&i| !habitat.is_wall_index(i) && !occupancy.is_occupied_index(i));
    match target {
        Some(target) => {
            advance(p, target, occupancy, habitat, trail, mode.deposit);
            true
        }
        None => {
            let (dx, dy) = unit(p.heading);
            p.internal_offset[0] += dx;
            p.internal_offset[1] += dy;
            if rng.gen::<f64>() < mode.pid {
                p.internal_offset = [0.0, 0.0];
                p.heading = random_heading(rng);
            }
            false
        }
    }
}

pub fn motor_stage<R: Rng + ?Sized>(
    p: &mut Particle,
    occupancy: &mut OccupancyGrid,
    habitat: &Habitat,
    trail: &mut TrailField,
    mode: &MotorMode,
    rng: &mut R,
) -> bool {
    match mode.kind {
        MotorKind::NonOscillatory => motor_stage_nonosc(p, occupancy, habitat, trail, mode, rng),
        MotorKind::Oscillatory => motor_stage_osc(p, occupancy, habitat, trail, mode, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Rect;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(sa: f64, ra: f64, so: f64) -> SensorParams {
        SensorParams {
            sensor_angle: sa,
            rotation_angle: ra,
            sensor_offset: so,
        }
    }

    #[test]
    fn axis_aligned_sensors() {
        let p = Particle::new(Cell::new(10, 10), 0.0);
        let [fl, f, fr] = sensor_positions(&p, &params(90.0, 45.0, 3.0));
        assert_eq!(f, Cell::new(13, 10));
        assert_eq!(fl, Cell::new(10, 7));
        assert_eq!(fr, Cell::new(10, 13));
    }

    #[test]
    fn diagonal_sensors_round_away_from_zero() {
        let p = Particle::new(Cell::new(0, 0), 0.0);
        let [fl, f, fr] = sensor_positions(&p, &params(45.0, 45.0, 1.0));
        assert_eq!(f, Cell::new(1, 0));
        assert_eq!(fl, Cell::new(1, -1));
        assert_eq!(fr, Cell::new(1, 1));
    }

    #[test]
    fn long_offset_along_ninety() {
        let p = Particle::new(Cell::new(20, 20), 90.0);
        let [_, f, _] = sensor_positions(&p, &params(90.0, 45.0, 15.0));
        assert_eq!(f, Cell::new(20, 35));
    }

    #[test]
    fn sensory_decision_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sp = params(90.0, 45.0, 15.0);
        assert_eq!(sensory_stage(90.0, [1.0, 5.0, 1.0], &sp, &mut rng), 90.0);
        assert_eq!(sensory_stage(90.0, [5.0, 1.0, 0.0], &sp, &mut rng), 45.0);
        assert_eq!(sensory_stage(90.0, [0.0, 1.0, 5.0], &sp, &mut rng), 135.0);
        assert_eq!(sensory_stage(90.0, [2.0, 2.0, 2.0], &sp, &mut rng), 90.0);
        assert_eq!(sensory_stage(90.0, [3.0, 3.0, 1.0], &sp, &mut rng), 45.0);
        assert_eq!(sensory_stage(10.0, [5.0, 1.0, 0.0], &sp, &mut rng), 325.0);
    }

    #[test]
    fn forward_weakest_turns_either_way_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sp = params(90.0, 45.0, 15.0);
        let (mut left, mut right) = (0i32, 0i32);
        for _ in 0..10_000 {
            match sensory_stage(90.0, [4.0, 1.0, 4.0], &sp, &mut rng) {
                45.0 => left += 1,
                135.0 => right += 1,
                h => panic!("unexpected heading {h}"),
            }
        }
        // 4 sigma band around 5000
        assert!((left - 5000).abs() < 200, "{left} vs {right}");
    }

    fn lone(h: &Habitat, pos: Cell, heading: f64) -> (Particle, OccupancyGrid, TrailField) {
        let mut occ = OccupancyGrid::for_habitat(h);
        assert!(occ.place(pos, 0));
        (Particle::new(pos, heading), occ, TrailField::for_habitat(h))
    }

    #[test]
    fn free_move_deposits_at_target() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let moved = motor_stage_nonosc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &MotorMode::default(),
            &mut rng,
        );
        assert!(moved);
        assert_eq!(p.pos, Cell::new(4, 3));
        assert_eq!(trail.get(Cell::new(4, 3)), DEFAULT_DEPOSIT);
        assert_eq!(trail.total_mass(), DEFAULT_DEPOSIT);
        assert_eq!(occ.get(Cell::new(4, 3)), Some(0));
        assert_eq!(occ.get(Cell::new(3, 3)), None);
    }

    #[test]
    fn diagonal_move_advances_both_axes() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 45.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(motor_stage_nonosc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &MotorMode::default(),
            &mut rng
        ));
        assert_eq!(p.pos, Cell::new(4, 4));
    }

    #[test]
    fn occupied_target_blocks_and_rerandomises() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 0.0);
        occ.place(Cell::new(4, 3), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let moved = motor_stage_nonosc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &MotorMode::default(),
            &mut rng,
        );
        assert!(!moved);
        assert_eq!(p.pos, Cell::new(3, 3));
        assert_ne!(p.heading, 0.0);
        assert_eq!(trail.total_mass(), 0.0);
    }

    #[test]
    fn wall_blocks_like_occupancy() {
        let h = Habitat::with_walls(8, 8, &[Rect::new(4, 3, 4, 3)]).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(!motor_stage_nonosc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &MotorMode::default(),
            &mut rng
        ));
        assert_eq!(p.pos, Cell::new(3, 3));

        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(0, 0), 180.0);
        assert!(!motor_stage_nonosc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &MotorMode::default(),
            &mut rng
        ));
    }

    fn osc(pid: f64) -> MotorMode {
        MotorMode {
            kind: MotorKind::Oscillatory,
            pid,
            ..MotorMode::default()
        }
    }

    #[test]
    fn oscillatory_holds_heading_with_zero_pid() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 0.0);
        for x in 4..8 {
            occ.place(Cell::new(x, 3), x as u32);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=50 {
            assert!(!motor_stage_osc(
                &mut p,
                &mut occ,
                &h,
                &mut trail,
                &osc(0.0),
                &mut rng
            ));
            assert_eq!(p.heading, 0.0);
            assert_eq!(p.pos, Cell::new(3, 3));
            assert!((p.internal_offset[0] - n as f64).abs() < 1e-9);
        }
        assert_eq!(trail.total_mass(), 0.0);
    }

    #[test]
    fn oscillatory_enters_first_free_cell_past_blocker() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 0.0);
        occ.place(Cell::new(4, 3), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(!motor_stage_osc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &osc(0.0),
            &mut rng
        ));
        assert_eq!(internal_front_cell(&p), Cell::new(5, 3));
        assert!(motor_stage_osc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &osc(0.0),
            &mut rng
        ));
        assert_eq!(p.pos, Cell::new(5, 3));
        assert_eq!(p.internal_offset, [0.0, 0.0]);
        assert_eq!(occ.get(Cell::new(3, 3)), None);
        assert_eq!(occ.get(Cell::new(5, 3)), Some(0));
        assert_eq!(trail.get(Cell::new(5, 3)), DEFAULT_DEPOSIT);
    }

    #[test]
    fn oscillatory_free_front_moves_one_cell() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 90.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(internal_front_cell(&p), front_cell(&p));
        assert!(motor_stage_osc(
            &mut p,
            &mut occ,
            &h,
            &mut trail,
            &osc(0.5),
            &mut rng
        ));
        assert_eq!(p.pos, Cell::new(3, 4));
        assert_eq!(p.heading, 90.0);
    }

    #[test]
    fn oscillatory_unit_pid_resets_every_blocked_step() {
        let h = Habitat::open(8, 8).unwrap();
        let (mut p, mut occ, mut trail) = lone(&h, Cell::new(3, 3), 0.0);
        // surround so every heading is blocked
        let mut id = 1;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy) != (0, 0) {
                    occ.place(Cell::new(3 + dx, 3 + dy), id);
                    id += 1;
                }
            }
        }
        let mode = MotorMode {
            kind: MotorKind::Oscillatory,
            pid: 1.0,
            ..MotorMode::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut last = p.heading;
        for _ in 0..20 {
            assert!(!motor_stage_osc(
                &mut p, &mut occ, &h, &mut trail, &mode, &mut rng
            ));
            assert_ne!(p.heading, last);
            assert_eq!(p.internal_offset, [0.0, 0.0]);
            last = p.heading;
        }
    }

    #[test]
    fn modes_agree_on_free_moves() {
        let h = Habitat::open(8, 8).unwrap();
        let osc = MotorMode {
            kind: MotorKind::Oscillatory,
            ..MotorMode::default()
        };
        let (mut a, mut occ_a, mut trail_a) = lone(&h, Cell::new(2, 2), 30.0);
        let (mut b, mut occ_b, mut trail_b) = (a, occ_a.clone(), trail_a.clone());
        let mut rng_a = ChaCha8Rng::seed_from_u64(3);
        let mut rng_b = ChaCha8Rng::seed_from_u64(3);
        let ma = motor_stage_nonosc(
            &mut a,
            &mut occ_a,
            &h,
            &mut trail_a,
            &MotorMode::default(),
            &mut rng_a,
        );
        let mb = motor_stage_osc(&mut b, &mut occ_b, &h, &mut trail_b, &osc, &mut rng_b);
        assert_eq!((ma, a, &occ_a, &trail_a), (mb, b, &occ_b, &trail_b));
        assert_eq!(rng_a.gen::<u64>(), rng_b.gen::<u64>());
    }

    #[test]
    fn parameter_ranges() {
        assert!(params(90.0, 45.0, 15.0).validate().is_ok());
        assert!(params(180.0, 45.0, 15.0).validate().is_err());
        assert!(params(90.0, 0.0, 15.0).validate().is_err());
        assert!(params(90.0, 45.0, 0.5).validate().is_err());
        assert!(params(90.0, 45.0, 2.0).validate().is_ok());
        let bad = MotorMode {
            pid: 1.5,
            ..MotorMode::default()
        };
        assert_eq!(
            bad.validate().unwrap_err().to_string(),
            "pID must lie in [0,1], got 1.5"
        );
    }

    #[test]
    fn heading_normalisation() {
        assert_eq!(normalize_heading(-45.0), 315.0);
        assert_eq!(normalize_heading(360.0), 0.0);
        assert_eq!(normalize_heading(405.0), 45.0);
        let h = normalize_heading(-1e-14);
        assert!((0.0..360.0).contains(&h));
    }
}
