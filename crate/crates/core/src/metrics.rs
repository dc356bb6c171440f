//! Scalar summaries of collective shape and motion.

use thiserror::Error;

use crate::lattice::{Cell, OccupancyGrid};
use crate::particles::Particle;

/// Blobs further apart than the 3-cell coupling distance are separate.
pub const DEFAULT_GAP_TOLERANCE: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("centroid of an empty population is undefined")]
    EmptyPopulation,
    #[error("series of length {len} is shorter than window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("window must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("circularity needs at least 3 cells, got {0}")]
    TooFewCells(usize),
}

pub fn centroid(particles: &[Particle]) -> Result<[f64; 2], MetricError> {
    positions_centroid(particles.iter().map(|p| p.pos))
}

pub fn positions_centroid(cells: impl IntoIterator<Item = Cell>) -> Result<[f64; 2], MetricError> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for c in cells {
        sx += c.x as f64;
        sy += c.y as f64;
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::EmptyPopulation);
    }
    Ok([sx / n as f64, sy / n as f64])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentReport {
    pub component_count: usize,
    /// Sizes in descending order.
    pub component_sizes: Vec<usize>,
    pub gap_tolerance: usize,
}

/// Per-cell component labels (`None` for unoccupied cells) alongside the report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    pub labels: Vec<Option<u32>>,
    pub report: ComponentReport,
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

/// Groups occupied cells whose Chebyshev distance is at most `1 + gap_tolerance`.
pub fn label_components(
    width: usize,
    height: usize,
    occupied: &[bool],
    gap_tolerance: usize,
) -> ComponentLabels {
    assert_eq!(occupied.len(), width * height);
    let reach = 1 + gap_tolerance as i64;
    let mut parent: Vec<u32> = (0..occupied.len() as u32).collect();

    // Union each cell with the already-visited half of its neighbourhood:
    // rows above within reach, and cells to the left on the same row.
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let i = (y * width as i64 + x) as usize;
            if !occupied[i] {
                continue;
            }
            for dy in -reach..=0 {
                let ny = y + dy;
                if ny < 0 {
                    continue;
                }
                let x_hi = if dy == 0 { -1 } else { reach };
                for dx in -reach..=x_hi {
                    let nx = x + dx;
                    if nx < 0 || nx >= width as i64 {
                        continue;
                    }
                    let j = (ny * width as i64 + nx) as usize;
                    if occupied[j] {
                        let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                        if a != b {
                            parent[a.max(b) as usize] = a.min(b);
                        }
                    }
                }
            }
        }
    }

    let mut root_label = vec![u32::MAX; occupied.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut labels = vec![None; occupied.len()];
    for i in 0..occupied.len() {
        if !occupied[i] {
            continue;
        }
        let r = find(&mut parent, i as u32) as usize;
        if root_label[r] == u32::MAX {
            root_label[r] = sizes.len() as u32;
            sizes.push(0);
        }
        let l = root_label[r];
        sizes[l as usize] += 1;
        labels[i] = Some(l);
    }
    let mut component_sizes = sizes;
    component_sizes.sort_unstable_by(|a, b| b.cmp(a));
    ComponentLabels {
        labels,
        report: ComponentReport {
            component_count: component_sizes.len(),
            component_sizes,
            gap_tolerance,
        },
    }
}

pub fn connected_components(occupancy: &OccupancyGrid, gap_tolerance: usize) -> ComponentReport {
    label_components(
        occupancy.width(),
        occupancy.height(),
        &occupancy.mask(),
        gap_tolerance,
    )
    .report
}

/// Standard deviation of the last `window` moved fractions about their mean.
pub fn oscillation_strength(moved_fraction: &[f64], window: usize) -> Result<f64, MetricError> {
    if window < 2 {
        return Err(MetricError::WindowTooSmall(window));
    }
    if moved_fraction.len() < window {
        return Err(MetricError::SeriesTooShort {
            len: moved_fraction.len(),
            window,
        });
    }
    let tail = &moved_fraction[moved_fraction.len() - window..];
    let n = window as f64;
    // shifted by the first sample so a constant series is exactly 0
    let base = tail[0];
    let mean = tail.iter().map(|v| v - base).sum::<f64>() / n;
    let var = tail
        .iter()
        .map(|v| {
            let d = v - base - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(var.sqrt())
}

/// `4πA / P²` clamped to `(0, 1]`, where `A` is the cell count and `P` the
/// number of cells with at least one unoccupied 4-neighbour.
pub fn circularity(cells: &[Cell]) -> Result<f64, MetricError> {
    if cells.len() < 3 {
        return Err(MetricError::TooFewCells(cells.len()));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
    for c in cells {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    // one cell of padding so every neighbour lookup stays in the buffer
    let w = (x1 - x0 + 3) as usize;
    let h = (y1 - y0 + 3) as usize;
    let mut grid = vec![false; w * h];
    let at = |c: &Cell| (c.y - y0 + 1) as usize * w + (c.x - x0 + 1) as usize;
    for c in cells {
        grid[at(c)] = true;
    }
    let area = grid.iter().filter(|v| **v).count();
    let perimeter = grid
        .iter()
        .enumerate()
        .filter(|(i, v)| **v && (!grid[i - 1] || !grid[i + 1] || !grid[i - w] || !grid[i + w]))
        .count();
    let c = 4.0 * std::f64::consts::PI * area as f64 / (perimeter as f64).powi(2);
    Ok(c.clamp(f64::MIN_POSITIVE, 1.0))
}

pub fn particle_circularity(particles: &[Particle]) -> Result<f64, MetricError> {
    let cells: Vec<Cell> = particles.iter().map(|p| p.pos).collect();
    circularity(&cells)
}
