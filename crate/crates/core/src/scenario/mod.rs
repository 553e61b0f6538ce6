//! Scenario description: system dimensions, pilot and power parameters and the
//! large-scale fading tensor. Every other module consumes these types.

mod file;
mod layout;

pub use file::{load_scenario, parse_scenario, save_scenario};
pub use layout::{generate_fading, Layout, MIN_DISTANCE_M};

use crate::error::{Error, Result};

/// Boltzmann noise floor in dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Thermal noise power in watts for a bandwidth and receiver noise figure.
pub fn thermal_noise_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Fixed system dimensions and link-level constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of cells `L`, one base station each.
    pub num_cells: usize,
    /// Single-antenna users served per cell `K`.
    pub users_per_cell: usize,
    /// Antennas available at each base station `M`.
    pub max_antennas: usize,
    pub bandwidth_hz: f64,
    /// Receiver noise power `sigma^2` in watts.
    pub noise_power_w: f64,
    /// Rate floor applied to the per-cell sum rate.
    pub rate_floor_bps: f64,
    /// Training-phase SNR. `None` derives it from the pilots, see
    /// [`Scenario::training_snr`].
    pub training_snr: Option<f64>,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_cells < 1 {
            return Err(Error::invalid("cells", "need at least one cell"));
        }
        if self.users_per_cell < 1 {
            return Err(Error::invalid("users", "need at least one user per cell"));
        }
        if self.max_antennas < self.users_per_cell {
            return Err(Error::invalid(
                "max_antennas",
                format!(
                    "M = {} is smaller than K = {}",
                    self.max_antennas, self.users_per_cell
                ),
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::invalid("bandwidth_hz", "must be positive"));
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return Err(Error::invalid("noise_power_w", "must be positive"));
        }
        if !(self.rate_floor_bps >= 0.0 && self.rate_floor_bps.is_finite()) {
            return Err(Error::invalid("r_min_bps", "must be non-negative"));
        }
        if let Some(snr) = self.training_snr {
            if !(snr > 0.0) {
                return Err(Error::invalid("training_snr", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Uplink training parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotConfig {
    /// Power per pilot symbol `B_p` in watts.
    pub pilot_power_w: f64,
    /// Number of orthogonal pilot sequences `tau_p`. User `k` of every cell
    /// transmits pilot `k % tau_p`.
    pub pilot_length: usize,
}

impl PilotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pilot_power_w >= 0.0 && self.pilot_power_w.is_finite()) {
            return Err(Error::invalid("pilot_power_w", "must be non-negative"));
        }
        if self.pilot_length < 1 {
            return Err(Error::invalid("pilot_length", "need at least one pilot"));
        }
        Ok(())
    }

    #[inline]
    pub fn pilot_of(&self, user: usize) -> usize {
        user % self.pilot_length
    }
}

/// Base-station power consumption parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerParams {
    baseband_w: f64,
    rf_chain_w: f64,
    circuit_per_antenna_w: f64,
    power_budget_w: f64,
}

impl PowerParams {
    pub fn new(baseband_w: f64, rf_chain_w: f64, power_budget_w: f64) -> Result<Self> {
        if !(baseband_w >= 0.0 && baseband_w.is_finite()) {
            return Err(Error::invalid("p_bb_w", "must be non-negative"));
        }
        if !(rf_chain_w >= 0.0 && rf_chain_w.is_finite()) {
            return Err(Error::invalid("p_rf_w", "must be non-negative"));
        }
        if !(power_budget_w > 0.0) {
            return Err(Error::invalid("p_max_w", "must be positive"));
        }
        Ok(PowerParams {
            baseband_w,
            rf_chain_w,
            circuit_per_antenna_w: baseband_w + rf_chain_w,
            power_budget_w,
        })
    }

    pub fn baseband_w(&self) -> f64 {
        self.baseband_w
    }

    pub fn rf_chain_w(&self) -> f64 {
        self.rf_chain_w
    }

    /// Per-antenna circuit power `p_c = p_BB + p_RF`.
    pub fn circuit_per_antenna_w(&self) -> f64 {
        self.circuit_per_antenna_w
    }

    pub fn power_budget_w(&self) -> f64 {
        self.power_budget_w
    }
}

/// Large-scale gains `F[l][j][k]`: BS `l` to user `k` of cell `j`, linear.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleFading {
    cells: usize,
    users: usize,
    gains: Vec<f64>,
}

impl LargeScaleFading {
    /// Builds the tensor from a flat `[l][j][k]`-ordered vector.
    pub fn from_flat(cells: usize, users: usize, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != cells * cells * users {
            return Err(Error::invalid(
                "fading",
                format!(
                    "expected {} gains for L = {cells}, K = {users}, got {}",
                    cells * cells * users,
                    gains.len()
                ),
            ));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid(
                "fading",
                format!("gains must be finite and non-negative, found {g}"),
            ));
        }
        Ok(LargeScaleFading {
            cells,
            users,
            gains,
        })
    }

    pub fn from_fn(
        cells: usize,
        users: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut gains = Vec::with_capacity(cells * cells * users);
        for l in 0..cells {
            for j in 0..cells {
                for k in 0..users {
                    gains.push(f(l, j, k));
                }
            }
        }
        Self::from_flat(cells, users, gains)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn gain(&self, bs: usize, cell: usize, user: usize) -> f64 {
        self.gains[(bs * self.cells + cell) * self.users + user]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }

    /// True when every user's serving gain is at least every cross gain.
    pub fn serving_dominates(&self) -> bool {
        (0..self.cells).all(|j| {
            (0..self.users).all(|k| {
                let serving = self.gain(j, j, k);
                (0..self.cells).all(|l| self.gain(l, j, k) <= serving)
            })
        })
    }
}

/// A complete validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub pilots: PilotConfig,
    pub power: PowerParams,
    pub fading: LargeScaleFading,
}

impl Scenario {
    pub fn new(
        config: SystemConfig,
        pilots: PilotConfig,
        power: PowerParams,
        fading: LargeScaleFading,
    ) -> Result<Self> {
        config.validate()?;
        pilots.validate()?;
        if fading.cells() != config.num_cells || fading.users() != config.users_per_cell {
            return Err(Error::invalid(
                "fading",
                format!(
                    "tensor is {}x{}x{} but the scenario has L = {}, K = {}",
                    fading.cells(),
                    fading.cells(),
                    fading.users(),
                    config.num_cells,
                    config.users_per_cell
                ),
            ));
        }
        let s = Scenario {
            config,
            pilots,
            power,
            fading,
        };
        if !(s.training_snr() > 0.0) {
            return Err(Error::invalid(
                "training_snr",
                "pilot power is zero and no explicit training_snr was given",
            ));
        }
        Ok(s)
    }

    /// Effective training SNR: the explicit value if configured, otherwise the
    /// pilot energy over noise `B_p * tau_p / sigma^2`.
    pub fn training_snr(&self) -> f64 {
        self.config.training_snr.unwrap_or(
            self.pilots.pilot_power_w * self.pilots.pilot_length as f64 / self.config.noise_power_w,
        )
    }

    pub fn with_pilot_length(&self, pilot_length: usize) -> Result<Self> {
        let mut s = self.clone();
        s.pilots.pilot_length = pilot_length;
        s.pilots.validate()?;
        Ok(s)
    }

    pub fn with_max_antennas(&self, max_antennas: usize) -> Result<Self> {
        let mut s = self.clone();
        s.config.max_antennas = max_antennas;
        s.config.validate()?;
        Ok(s)
    }

    /// Checks `K <= n <= M`.
    pub fn check_antennas(&self, n: usize) -> Result<()> {
        let (min, max) = (self.config.users_per_cell, self.config.max_antennas);
        if n < min || n > max {
            return Err(Error::AntennasOutOfRange { n, min, max });
        }
        Ok(())
    }
}
