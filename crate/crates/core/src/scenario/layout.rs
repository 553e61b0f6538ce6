use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LargeScaleFading, SystemConfig};
use crate::error::{Error, Result};

/// Users closer than this to any base station are treated as being at this
/// distance.
pub const MIN_DISTANCE_M: f64 = 35.0;

/// Square-grid cell layout with a distance-power-law pathloss.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Distance between neighbouring base stations.
    pub spacing_m: f64,
    /// Pathloss exponent `kappa`.
    pub pathloss_exponent: f64,
    /// Gain at the reference distance, in dB. Zero gives
    /// `F = (d / d_0)^-kappa` exactly.
    pub reference_gain_db: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            spacing_m: 500.0,
            pathloss_exponent: 3.76,
            reference_gain_db: 0.0,
        }
    }
}

impl Layout {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_m > 0.0 && self.spacing_m.is_finite()) {
            return Err(Error::invalid("layout_spacing_m", "must be positive"));
        }
        if !(self.pathloss_exponent > 2.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::invalid("pathloss_exponent", "must exceed 2"));
        }
        if !self.reference_gain_db.is_finite() {
            return Err(Error::invalid("reference_gain_db", "must be finite"));
        }
        Ok(())
    }
}

/// Grid dimensions `(cols, rows)` hosting `cells` base stations.
fn grid_shape(cells: usize) -> (usize, usize) {
    let cols = (cells as f64).sqrt().ceil() as usize;
    let rows = cells.div_ceil(cols);
    (cols, rows)
}

/// Drops `K` users uniformly in each square cell and evaluates the pathloss to
/// every base station with wrap-around distances on the grid torus.
pub fn generate_fading(
    config: &SystemConfig,
    layout: &Layout,
    seed: u64,
) -> Result<LargeScaleFading> {
    layout.validate()?;
    let cells = config.num_cells;
    let users = config.users_per_cell;
    let (cols, rows) = grid_shape(cells);
    let s = layout.spacing_m;
    let (width, height) = (cols as f64 * s, rows as f64 * s);
    let bs: Vec<(f64, f64)> = (0..cells)
        .map(|c| (((c % cols) as f64 + 0.5) * s, ((c / cols) as f64 + 0.5) * s))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(cells * users);
    for &(bx, by) in &bs {
        for _ in 0..users {
            let mut dx = rng.random_range(-0.5 * s..0.5 * s);
            let mut dy = rng.random_range(-0.5 * s..0.5 * s);
            let r = dx.hypot(dy);
            if r < MIN_DISTANCE_M {
                if r == 0.0 {
                    dx = MIN_DISTANCE_M;
                    dy = 0.0;
                } else {
                    dx *= MIN_DISTANCE_M / r;
                    dy *= MIN_DISTANCE_M / r;
                }
            }
            positions.push((bx + dx, by + dy));
        }
    }

    let wrap = |d: f64, span: f64| {
        let d = d.abs() % span;
        d.min(span - d)
    };
    let g0 = 10f64.powf(layout.reference_gain_db / 10.0);
    LargeScaleFading::from_fn(cells, users, |l, j, k| {
        let (ux, uy) = positions[j * users + k];
        let (bx, by) = bs[l];
        let d = wrap(ux - bx, width)
            .hypot(wrap(uy - by, height))
            .max(MIN_DISTANCE_M);
        g0 * (d / MIN_DISTANCE_M).powf(-layout.pathloss_exponent)
    })
}
