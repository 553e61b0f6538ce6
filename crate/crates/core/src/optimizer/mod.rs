//! Energy-efficiency maximisation over the active antenna count `N` and the
//! downlink transmit power `P_d`.
//!
//! [`EeProblem`] reduces a scenario to what the solvers need: the per-user
//! large-scale summaries and the power model. The objective is the per-cell
//! sum rate `f1 = K b mean_u log2(1 + SINR_u)` over the users kept in the
//! problem, and the cost is the per-BS consumption `f2`.

mod dual;
mod fractional;
mod joint;

pub use dual::{
    dual_power_allocation, feasible_power_interval, lagrangian_value, optimal_power,
    stationary_power, DualState, Multipliers,
};
pub use fractional::{
    closed_form_antenna, closed_form_antenna_literal, dinkelbach, exhaustive_antennas,
    fractional_residual, select_antennas, AntennaChoice, AntennaProgram, DinkelbachResult,
    FnProgram, FractionalProgram, FractionalState,
};
pub use joint::{grid_search_oracle, joint_optimize, JointResult};

use std::fmt::Write as _;
use std::path::Path;

use crate::closed_form::{all_user_gains, total_power, user_gains, PowerBreakdown, UserGains};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Which form of the closed-form optimum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// The textbook expressions, taken at face value.
    Literal,
    /// Roots of the first-order conditions of the model implemented here.
    StationarityDerived,
}

/// A candidate or optimal operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EeOperatingPoint {
    pub n_antennas: usize,
    pub transmit_power_w: f64,
    pub pilot_power_w: f64,
    pub rate_bps: f64,
    pub total_power_w: f64,
    pub ee_bpj: f64,
    pub feasible: bool,
}

/// One row of a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub epsilon: f64,
    pub j_value: f64,
    pub q1: f64,
    pub q2: f64,
    pub p_d: f64,
    pub n_antennas: usize,
    pub ee: f64,
}

pub const TRACE_HEADER: &str = "iteration,epsilon,j_value,q1,q2,p_d,n_antennas,ee";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration, r.epsilon, r.j_value, r.q1, r.q2, r.p_d, r.n_antennas, r.ee
        );
    }
    out
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv(rows))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Everything the solvers need about one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EeProblem {
    pub users_per_cell: usize,
    pub bandwidth_hz: f64,
    pub pilot_power_w: f64,
    pub noise_power_w: f64,
    pub circuit_per_antenna_w: f64,
    pub power_budget_w: f64,
    pub rate_floor_bps: f64,
    pub min_antennas: usize,
    pub max_antennas: usize,
    /// Users whose rates are averaged into the objective.
    pub profiles: Vec<UserGains>,
    /// Allowed transmit powers `[lo, hi]`; `hi` may be infinite.
    pub transmit_range: (f64, f64),
}

impl EeProblem {
    fn with_profiles(scenario: &Scenario, profiles: Vec<UserGains>) -> Self {
        EeProblem {
            users_per_cell: scenario.config.users_per_cell,
            bandwidth_hz: scenario.config.bandwidth_hz,
            pilot_power_w: scenario.pilots.pilot_power_w,
            noise_power_w: scenario.config.noise_power_w,
            circuit_per_antenna_w: scenario.power.circuit_per_antenna_w(),
            power_budget_w: scenario.power.power_budget_w(),
            rate_floor_bps: scenario.config.rate_floor_bps,
            min_antennas: scenario.config.users_per_cell,
            max_antennas: scenario.config.max_antennas,
            profiles,
            transmit_range: (0.0, f64::INFINITY),
        }
    }

    /// Objective averaged over every user of the network.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self::with_profiles(scenario, all_user_gains(scenario))
    }

    /// Objective of user `k` in cell `j` alone, scaled to `K` users.
    pub fn for_user(scenario: &Scenario, cell: usize, user: usize) -> Self {
        let g = user_gains(
            &scenario.fading,
            &scenario.pilots,
            scenario.training_snr(),
            cell,
            user,
        );
        Self::with_profiles(scenario, vec![g])
    }

    pub fn with_transmit_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo.is_finite() && hi >= lo) {
            return Err(Error::invalid(
                "transmit_range",
                format!("need 0 <= lo <= hi, got [{lo}, {hi}]"),
            ));
        }
        self.transmit_range = (lo, hi);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::invalid("profiles", "no users in the problem"));
        }
        if self.min_antennas < 1 || self.min_antennas > self.max_antennas {
            return Err(Error::invalid("max_antennas", "empty antenna range"));
        }
        Ok(())
    }

    fn sinr(&self, g: &UserGains, n: f64, p_d: f64) -> f64 {
        let (alpha, beta, c) = self.sinr_coefficients(g, n);
        if p_d == 0.0 || alpha == 0.0 {
            return 0.0;
        }
        if p_d.is_infinite() {
            return alpha / beta;
        }
        alpha * p_d / (beta * p_d + c)
    }

    /// `SINR = alpha P / (beta P + c)` at `N` antennas.
    fn sinr_coefficients(&self, g: &UserGains, nf: f64) -> (f64, f64, f64) {
        let k = self.users_per_cell as f64;
        let alpha = self.pilot_power_w * nf * g.desired;
        let beta = k * self.pilot_power_w * (nf * g.coherent_per_antenna + g.noncoherent);
        (alpha, beta, self.noise_power_w)
    }

    fn rate_scale(&self) -> f64 {
        self.users_per_cell as f64 * self.bandwidth_hz / self.profiles.len() as f64
    }

    /// `f1(N, P_d)` in bits/s.
    pub fn rate(&self, n: usize, p_d: f64) -> f64 {
        self.rate_relaxed(n as f64, p_d)
    }

    /// `f1` with `N` treated as a real number.
    pub fn rate_relaxed(&self, n: f64, p_d: f64) -> f64 {
        let sum: f64 = self
            .profiles
            .iter()
            .map(|g| self.sinr(g, n, p_d).ln_1p())
            .sum();
        self.rate_scale() * sum / std::f64::consts::LN_2
    }

    /// Total consumption `f2` with `N` treated as a real number.
    pub fn power_relaxed(&self, n: f64, p_d: f64) -> f64 {
        let r = n.sqrt();
        let theta = 3.0 * (r - 1.0) / (r + 1.0);
        theta / self.users_per_cell as f64 * (p_d + n * self.pilot_power_w)
            + n * self.circuit_per_antenna_w
    }

    /// First and second derivative of `f1` in `P_d`.
    pub fn rate_power_derivatives(&self, n: usize, p_d: f64) -> (f64, f64) {
        let (mut d1, mut d2) = (0.0, 0.0);
        for g in &self.profiles {
            let (alpha, beta, c) = self.sinr_coefficients(g, n as f64);
            let a = alpha + beta;
            let u = a * p_d + c;
            let v = beta * p_d + c;
            d1 += a / u - beta / v;
            d2 += -(a * a) / (u * u) + (beta * beta) / (v * v);
        }
        let s = self.rate_scale() / std::f64::consts::LN_2;
        (s * d1, s * d2)
    }

    /// Derivative of `f1` in `N` on the continuous relaxation.
    pub fn rate_antenna_derivative(&self, n: f64, p_d: f64) -> f64 {
        let k = self.users_per_cell as f64;
        let bp = self.pilot_power_w;
        let noise = self.noise_power_w / (k * p_d);
        let sum: f64 = self
            .profiles
            .iter()
            .map(|g| {
                let a = bp * g.desired;
                let b = k * (bp * g.noncoherent + noise);
                let c = k * bp * g.coherent_per_antenna;
                if a == 0.0 {
                    0.0
                } else {
                    a * b / ((b + n * (a + c)) * (b + n * c))
                }
            })
            .sum();
        self.rate_scale() * sum / std::f64::consts::LN_2
    }

    pub fn power(&self, n: usize, p_d: f64) -> PowerBreakdown {
        total_power(
            p_d,
            self.pilot_power_w,
            n,
            self.users_per_cell,
            self.circuit_per_antenna_w,
        )
    }

    /// `xi = f1 / f2`; zero when the consumption is zero.
    pub fn ee(&self, n: usize, p_d: f64) -> f64 {
        let total = self.power(n, p_d).total;
        if total > 0.0 {
            self.rate(n, p_d) / total
        } else {
            0.0
        }
    }

    /// Checks every constraint exactly, without tolerance.
    pub fn is_feasible(&self, n: usize, p_d: f64) -> bool {
        let (lo, hi) = self.transmit_range;
        n >= self.min_antennas
            && n <= self.max_antennas
            && p_d >= lo
            && p_d <= hi
            && p_d >= 0.0
            && self.pilot_power_w >= 0.0
            && self.power(n, p_d).total <= self.power_budget_w
            && self.rate(n, p_d) >= self.rate_floor_bps
    }

    /// Smallest and largest antenna count satisfying every constraint at
    /// `P_d`. Rate and consumption both grow with `N`, so the feasible counts
    /// form an interval.
    pub fn feasible_antennas(&self, p_d: f64) -> Option<(usize, usize)> {
        let mut it = (self.min_antennas..=self.max_antennas).filter(|&n| self.is_feasible(n, p_d));
        let lo = it.next()?;
        Some((lo, it.last().unwrap_or(lo)))
    }

    pub fn point(&self, n: usize, p_d: f64) -> EeOperatingPoint {
        let power = self.power(n, p_d);
        let rate = self.rate(n, p_d);
        EeOperatingPoint {
            n_antennas: n,
            transmit_power_w: p_d,
            pilot_power_w: self.pilot_power_w,
            rate_bps: rate,
            total_power_w: power.total,
            ee_bpj: if power.total > 0.0 {
                rate / power.total
            } else {
                0.0
            },
            feasible: self.is_feasible(n, p_d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{closed_form_rate, rate_terms};
    use crate::scenario::{generate_fading, Layout, PilotConfig, PowerParams, SystemConfig};

    pub(crate) fn small_scenario(seed: u64) -> Scenario {
        let config = SystemConfig {
            num_cells: 3,
            users_per_cell: 4,
            max_antennas: 128,
            bandwidth_hz: 1e6,
            noise_power_w: 1.0,
            rate_floor_bps: 0.0,
            training_snr: None,
        };
        let layout = Layout {
            reference_gain_db: 20.0,
            ..Layout::default()
        };
        let fading = generate_fading(&config, &layout, seed).unwrap();
        Scenario::new(
            config,
            PilotConfig {
                pilot_power_w: 1.0,
                pilot_length: 4,
            },
            PowerParams::new(0.5, 0.5, 1e3).unwrap(),
            fading,
        )
        .unwrap()
    }

    #[test]
    fn single_user_problem_matches_closed_form_rate() {
        let s = small_scenario(1);
        for (j, k) in [(0, 0), (2, 3)] {
            let p = EeProblem::for_user(&s, j, k);
            for (n, pd) in [(4, 0.5), (64, 3.0), (128, 40.0)] {
                let t = rate_terms(&s, pd, n, j, k);
                let r = closed_form_rate(&t, &s.config, &s.pilots, n);
                assert!((p.rate(n, pd) / r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = EeProblem::from_scenario(&small_scenario(2));
        for pd in [0.1, 1.0, 10.0] {
            let h = 1e-5 * pd;
            let (d1, d2) = p.rate_power_derivatives(32, pd);
            let fd1 = (p.rate(32, pd + h) - p.rate(32, pd - h)) / (2.0 * h);
            let (u, _) = p.rate_power_derivatives(32, pd + h);
            let (l, _) = p.rate_power_derivatives(32, pd - h);
            assert!((d1 / fd1 - 1.0).abs() < 1e-6);
            assert!((d2 / ((u - l) / (2.0 * h)) - 1.0).abs() < 1e-5);
        }
        // continuous N derivative against the integer rate difference
        let d = p.rate_antenna_derivative(40.5, 2.0);
        let fd = p.rate(41, 2.0) - p.rate(40, 2.0);
        assert!((d / fd - 1.0).abs() < 1e-3);
    }

    #[test]
    fn feasibility_is_exact() {
        let mut p = EeProblem::from_scenario(&small_scenario(3));
        assert!(p.is_feasible(4, 1.0));
        assert!(!p.is_feasible(3, 1.0));
        assert!(!p.is_feasible(129, 1.0));
        p.power_budget_w = p.power(16, 1.0).total;
        assert!(p.is_feasible(16, 1.0));
        assert!(!p.is_feasible(16, 1.0 + 1e-9));
        p.rate_floor_bps = p.rate(16, 1.0);
        assert!(p.is_feasible(16, 1.0));
        assert!(!p.is_feasible(16, 1.0 - 1e-9));
    }

    #[test]
    fn trace_export_has_header_and_rows() {
        let rows = [TraceRow {
            iteration: 0,
            epsilon: 0.5,
            j_value: 1.0,
            q1: 0.0,
            q2: 0.0,
            p_d: 1.0,
            n_antennas: 8,
            ee: 0.5,
        }];
        let csv = trace_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.next(), Some("0,0.5,1,0,0,1,8,0.5"));
        assert_eq!(lines.next(), None);
    }
}
