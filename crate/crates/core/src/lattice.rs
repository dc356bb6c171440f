//! The shared 2D lattice: habitat classification, the chemoattractant trail
//! field, single-occupancy bookkeeping, and external stimuli.
//!
//! Coordinates are integer cells with the origin at the top-left and `y`
//! increasing downward. Every coordinate outside the grid behaves as a wall.

use thiserror::Error;

use crate::pgm::{self, GreyImage, PgmError};

/// Default damping applied after each mean-filter pass.
pub const DEFAULT_DAMPING: f64 = 0.07;

/// Greyscale values below this threshold load as walls.
pub const WALL_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

/// Inclusive axis-aligned cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Rect {
    pub const fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn is_well_formed(&self) -> bool {
        self.x0 <= self.x1 && self.y0 <= self.y1
    }

    #[inline]
    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.x0 && c.x <= self.x1 && c.y >= self.y0 && c.y <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Wall,
    Vacant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("habitat must be at least 1x1, got {width}x{height}")]
    EmptyHabitat { width: usize, height: usize },
    #[error("expected {expected} cell classes, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Pgm(#[from] PgmError),
}

/// Immutable wall/vacant classification of every lattice cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Habitat {
    width: usize,
    height: usize,
    wall: Vec<bool>,
    // 1.0 on vacant cells, 0.0 on walls; used by the diffusion hot loop.
    vacant_mask: Vec<f64>,
}

impl Habitat {
    pub fn new(width: usize, height: usize, classes: &[CellClass]) -> Result<Self, LatticeError> {
        if width == 0 || height == 0 {
            return Err(LatticeError::EmptyHabitat { width, height });
        }
        if classes.len() != width * height {
            return Err(LatticeError::SizeMismatch {
                expected: width * height,
                got: classes.len(),
            });
        }
        let wall: Vec<bool> = classes.iter().map(|c| *c == CellClass::Wall).collect();
        Ok(Self::from_wall_flags(width, height, wall))
    }

    /// A habitat with no interior walls.
    pub fn open(width: usize, height: usize) -> Result<Self, LatticeError> {
        Self::with_walls(width, height, &[])
    }

    /// A habitat whose walls are the union of the given rectangles (clipped to bounds).
    pub fn with_walls(width: usize, height: usize, walls: &[Rect]) -> Result<Self, LatticeError> {
        if width == 0 || height == 0 {
            return Err(LatticeError::EmptyHabitat { width, height });
        }
        let mut flags = vec![false; width * height];
        for r in walls {
            let x0 = r.x0.max(0);
            let y0 = r.y0.max(0);
            let x1 = r.x1.min(width as i32 - 1);
            let y1 = r.y1.min(height as i32 - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    flags[y as usize * width + x as usize] = true;
                }
            }
        }
        Ok(Self::from_wall_flags(width, height, flags))
    }

    fn from_wall_flags(width: usize, height: usize, wall: Vec<bool>) -> Self {
        let vacant_mask = wall.iter().map(|w| if *w { 0.0 } else { 1.0 }).collect();
        Self {
            width,
            height,
            wall,
            vacant_mask,
        }
    }

    pub fn from_image(image: &GreyImage) -> Result<Self, LatticeError> {
        if image.width == 0 || image.height == 0 {
            return Err(LatticeError::EmptyHabitat {
                width: image.width,
                height: image.height,
            });
        }
        let wall = image.pixels.iter().map(|v| *v < WALL_THRESHOLD).collect();
        Ok(Self::from_wall_flags(image.width, image.height, wall))
    }

    /// Vacant cells render white (255), walls black (0).
    pub fn to_image(&self) -> GreyImage {
        let pixels = self.wall.iter().map(|w| if *w { 0 } else { 255 }).collect();
        GreyImage::new(self.width, self.height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.wall.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wall.is_empty()
    }

    #[inline]
    pub fn index(&self, c: Cell) -> Option<usize> {
        if c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height {
            Some(c.y as usize * self.width + c.x as usize)
        } else {
            None
        }
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn class(&self, c: Cell) -> CellClass {
        match self.index(c) {
            Some(i) if !self.wall[i] => CellClass::Vacant,
            _ => CellClass::Wall,
        }
    }

    #[inline]
    pub fn is_vacant(&self, c: Cell) -> bool {
        self.index(c).is_some_and(|i| !self.wall[i])
    }

    #[inline]
    pub fn is_wall_index(&self, index: usize) -> bool {
        self.wall[index]
    }

    pub fn vacant_count(&self) -> usize {
        self.wall.iter().filter(|w| !**w).count()
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// Parses a binary greyscale PGM into a habitat (values below 128 are walls).
pub fn load_habitat(bytes: &[u8]) -> Result<Habitat, LatticeError> {
    let image = pgm::decode(bytes)?;
    Habitat::from_image(&image)
}

/// Scalar chemoattractant concentration per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl TrailField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn for_habitat(habitat: &Habitat) -> Self {
        Self::zeros(habitat.width, habitat.height)
    }

    /// Builds a field from raw values; negative entries and entries on wall
    /// cells are zeroed so the field invariants hold.
    pub fn from_values(habitat: &Habitat, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), habitat.len(), "trail size mismatch");
        for (v, wall) in values.iter_mut().zip(&habitat.wall) {
            if *wall || !(*v > 0.0) {
                *v = 0.0;
            }
        }
        Self {
            width: habitat.width,
            height: habitat.height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> f64 {
        self.values[index]
    }

    #[inline]
    pub(crate) fn add_index(&mut self, index: usize, amount: f64) {
        self.values[index] += amount;
    }

    pub fn get(&self, c: Cell) -> f64 {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            return 0.0;
        }
        self.values[c.y as usize * self.width + c.x as usize]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

pub type ParticleId = u32;

const EMPTY: ParticleId = ParticleId::MAX;

/// Which particle, if any, holds each cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<ParticleId>,
}

impl OccupancyGrid {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![EMPTY; width * height],
        }
    }

    pub fn for_habitat(habitat: &Habitat) -> Self {
        Self::empty(habitat.width, habitat.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn index(&self, c: Cell) -> Option<usize> {
        if c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height {
            Some(c.y as usize * self.width + c.x as usize)
        } else {
            None
        }
    }

    pub fn get(&self, c: Cell) -> Option<ParticleId> {
        self.index(c)
            .map(|i| self.cells[i])
            .filter(|id| *id != EMPTY)
    }

    #[inline]
    pub fn is_occupied_index(&self, index: usize) -> bool {
        self.cells[index] != EMPTY
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.get(c).is_some()
    }

    /// Places `id` at `c`. Returns false (and changes nothing) when the cell
    /// is out of bounds or already held.
    pub fn place(&mut self, c: Cell, id: ParticleId) -> bool {
        match self.index(c) {
            Some(i) if self.cells[i] == EMPTY => {
                self.cells[i] = id;
                true
            }
            _ => false,
        }
    }

    #[inline]
    pub(crate) fn move_index(&mut self, from: usize, to: usize) {
        debug_assert_eq!(self.cells[to], EMPTY);
        self.cells[to] = self.cells[from];
        self.cells[from] = EMPTY;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|id| **id != EMPTY).count()
    }

    /// Occupied cells in row-major order with their particle ids.
    pub fn occupied(&self) -> impl Iterator<Item = (Cell, ParticleId)> + '_ {
        let width = self.width;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, id)| **id != EMPTY)
            .map(move |(i, id)| (Cell::new((i % width) as i32, (i / width) as i32), *id))
    }

    /// Occupancy as a row-major boolean mask.
    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(|id| *id != EMPTY).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Unlimited,
    Finite(f64),
}

impl Budget {
    pub fn is_exhausted(&self) -> bool {
        matches!(self, Budget::Finite(b) if *b <= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attractant {
    pub id: u32,
    pub position: Cell,
    pub magnitude: f64,
    pub budget: Budget,
    pub consumption_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrradiationRegion {
    pub id: u32,
    pub rect: Rect,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StimulusError {
    #[error("position not vacant: ({0}, {1})")]
    NotVacant(i32, i32),
    #[error("attractant magnitude must be positive, got {0}")]
    Magnitude(f64),
    #[error("attractant budget must be non-negative, got {0}")]
    Budget(f64),
    #[error("consumption rate must be non-negative, got {0}")]
    ConsumptionRate(f64),
    #[error("irradiation weight must lie in (0, 1], got {0}")]
    Weight(f64),
    #[error("irradiation rectangle is empty")]
    EmptyRect,
}

/// Live attractant sources and irradiation regions.
///
/// Identifiers are assigned sequentially per kind, starting at 0, so a fixed
/// sequence of additions always yields the same ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StimulusSet {
    attractants: Vec<Attractant>,
    irradiation: Vec<IrradiationRegion>,
    next_attractant_id: u32,
    next_irradiation_id: u32,
}

impl StimulusSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attractants(&self) -> &[Attractant] {
        &self.attractants
    }

    pub fn irradiation(&self) -> &[IrradiationRegion] {
        &self.irradiation
    }

    pub fn is_empty(&self) -> bool {
        self.attractants.is_empty() && self.irradiation.is_empty()
    }

    pub fn next_attractant_id(&self) -> u32 {
        self.next_attractant_id
    }

    pub fn next_irradiation_id(&self) -> u32 {
        self.next_irradiation_id
    }

    pub fn validate_attractant(
        habitat: &Habitat,
        position: Cell,
        magnitude: f64,
        budget: Budget,
        consumption_rate: f64,
    ) -> Result<(), StimulusError> {
        if !habitat.is_vacant(position) {
            return Err(StimulusError::NotVacant(position.x, position.y));
        }
        if !(magnitude > 0.0) || !magnitude.is_finite() {
            return Err(StimulusError::Magnitude(magnitude));
        }
        if let Budget::Finite(b) = budget {
            if !(b >= 0.0) {
                return Err(StimulusError::Budget(b));
            }
        }
        if !(consumption_rate >= 0.0) {
            return Err(StimulusError::ConsumptionRate(consumption_rate));
        }
        Ok(())
    }

    pub fn validate_irradiation(rect: Rect, weight: f64) -> Result<(), StimulusError> {
        if !rect.is_well_formed() {
            return Err(StimulusError::EmptyRect);
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(StimulusError::Weight(weight));
        }
        Ok(())
    }

    pub fn add_attractant(
        &mut self,
        habitat: &Habitat,
        position: Cell,
        magnitude: f64,
        budget: Budget,
        consumption_rate: f64,
    ) -> Result<u32, StimulusError> {
        Self::validate_attractant(habitat, position, magnitude, budget, consumption_rate)?;
        let id = self.next_attractant_id;
        self.next_attractant_id += 1;
        self.attractants.push(Attractant {
            id,
            position,
            magnitude,
            budget,
            consumption_rate,
        });
        Ok(id)
    }

    pub fn remove_attractant(&mut self, id: u32) -> bool {
        let before = self.attractants.len();
        self.attractants.retain(|a| a.id != id);
        before != self.attractants.len()
    }

    pub fn add_irradiation(&mut self, rect: Rect, weight: f64) -> Result<u32, StimulusError> {
        Self::validate_irradiation(rect, weight)?;
        let id = self.next_irradiation_id;
        self.next_irradiation_id += 1;
        self.irradiation
            .push(IrradiationRegion { id, rect, weight });
        Ok(id)
    }

    pub fn remove_irradiation(&mut self, id: u32) -> bool {
        let before = self.irradiation.len();
        self.irradiation.retain(|r| r.id != id);
        before != self.irradiation.len()
    }

    /// Product of the weights of all regions containing `c` (1 when none do).
    #[inline]
    pub fn weight_at(&self, c: Cell) -> f64 {
        let mut w = 1.0;
        for r in &self.irradiation {
            if r.rect.contains(c) {
                w *= r.weight;
            }
        }
        w
    }
}

/// One mean-filter pass with absorbing boundaries, written into `out`.
///
/// Each vacant cell receives the sum of its 3x3 neighbourhood divided by 9 and
/// scaled by `1 - damping`. Walls and out-of-bounds neighbours contribute 0 and
/// wall cells are always written as 0.
pub fn diffuse_into(field: &TrailField, habitat: &Habitat, damping: f64, out: &mut TrailField) {
    let (w, h) = (habitat.width, habitat.height);
    assert_eq!(field.values.len(), w * h, "trail/habitat size mismatch");
    out.width = w;
    out.height = h;
    out.values.resize(w * h, 0.0);
    let scale = (1.0 - damping) / 9.0;
    let mask = &habitat.vacant_mask;
    let src = &field.values;

    // Horizontal 3-sums of the masked field, kept for a rolling window of rows.
    let mut rows = [vec![0.0; w], vec![0.0; w], vec![0.0; w]];
    let row_sum = |y: usize, dst: &mut [f64]| {
        let base = y * w;
        let s = &src[base..base + w];
        let m = &mask[base..base + w];
        let mut left = 0.0;
        let mut centre = s[0] * m[0];
        for x in 0..w {
            let right = if x + 1 < w { s[x + 1] * m[x + 1] } else { 0.0 };
            dst[x] = left + centre + right;
            left = centre;
            centre = right;
        }
    };

    // rows[0] = y-1, rows[1] = y, rows[2] = y+1
    rows[0].iter_mut().for_each(|v| *v = 0.0);
    row_sum(0, &mut rows[1]);
    for y in 0..h {
        if y + 1 < h {
            row_sum(y + 1, &mut rows[2]);
        } else {
            rows[2].iter_mut().for_each(|v| *v = 0.0);
        }
        let base = y * w;
        let dst = &mut out.values[base..base + w];
        let m = &mask[base..base + w];
        for x in 0..w {
            dst[x] = (rows[0][x] + rows[1][x] + rows[2][x]) * scale * m[x];
        }
        rows.rotate_left(1);
    }
}

/// Pure diffusion step; the input is left unmodified.
pub fn diffuse(field: &TrailField, habitat: &Habitat, damping: f64) -> TrailField {
    let mut out = TrailField::for_habitat(habitat);
    diffuse_into(field, habitat, damping, &mut out);
    out
}

/// Adds every live attractant's projection to the field in place and applies
/// consumption by covering particles.
///
/// A source projects `min(magnitude, budget)`. A finite budget below the
/// magnitude is released in full and the source is exhausted. A covered
/// source loses `consumption_rate` from its budget. Exhausted sources are
/// removed.
pub fn project_stimuli_in_place(
    field: &mut TrailField,
    stimuli: &mut StimulusSet,
    occupancy: &OccupancyGrid,
) {
    let (w, h) = (field.width, field.height);
    for a in &mut stimuli.attractants {
        let p = a.position;
        if p.x < 0 || p.y < 0 || p.x as usize >= w || p.y as usize >= h {
            continue;
        }
        let index = p.y as usize * w + p.x as usize;
        let amount = match a.budget {
            Budget::Unlimited => a.magnitude,
            Budget::Finite(b) => a.magnitude.min(b),
        };
        if amount > 0.0 {
            field.values[index] += amount;
        }
        if let Budget::Finite(b) = &mut a.budget {
            if *b < a.magnitude {
                *b = 0.0;
            } else if occupancy.is_occupied_index(index) {
                *b = (*b - a.consumption_rate).max(0.0);
            }
        }
    }
    stimuli.attractants.retain(|a| !a.budget.is_exhausted());
}

/// Pure form of [`project_stimuli_in_place`].
pub fn project_stimuli(
    field: &TrailField,
    stimuli: &StimulusSet,
    occupancy: &OccupancyGrid,
) -> (TrailField, StimulusSet) {
    let mut f = field.clone();
    let mut s = stimuli.clone();
    project_stimuli_in_place(&mut f, &mut s, occupancy);
    (f, s)
}

/// Concentration perceived at `pos`: 0 outside the habitat or on a wall,
/// otherwise the field value scaled by the irradiation weight at `pos`.
#[inline]
pub fn sample(field: &TrailField, habitat: &Habitat, stimuli: &StimulusSet, pos: Cell) -> f64 {
    match habitat.index(pos) {
        Some(i) if !habitat.wall[i] => {
            let v = field.values[i];
            if stimuli.irradiation.is_empty() {
                v
            } else {
                v * stimuli.weight_at(pos)
            }
        }
        _ => 0.0,
    }
}
