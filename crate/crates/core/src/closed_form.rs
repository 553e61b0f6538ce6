//! Closed-form achievable rate under MRT precoding with MMSE channel estimates
//! and pilot contamination, and the base-station power model.
//!
//! With per-user downlink power `P_d * B_p`, unit-norm MRT precoders and the
//! use-and-then-forget bound, the large-`N` SINR of user `k` in cell `j` is
//!
//! ```text
//! SINR = B_p N S / ((B_p phi + n) K),   phi = phi_Q + phi_nQ,   n = sigma^2 / (K P_d)
//! S      = F_jjk^2 / D_jk                          (estimate quality)
//! phi_Q  = (N / K) sum_{(l,i) ~ (j,k)} F_ljk^2 / D_li   (same-pilot, coherent)
//! phi_nQ = (1 / K) sum_l sum_i F_ljk = sum_l F_ljk      (non-coherent)
//! D_li   = 1 / snr_tr + sum_{(m,t) ~ (l,i)} F_lmt
//! ```
//!
//! where `(l,i) ~ (j,k)` ranges over the other users sharing user `k`'s pilot
//! and `snr_tr` is the training SNR.

use crate::error::{Error, Result};
use crate::scenario::{LargeScaleFading, PilotConfig, PowerParams, Scenario, SystemConfig};

/// Peak-to-average power ratio factor `3 (sqrt(N) - 1) / (sqrt(N) + 1)`.
///
/// Identical to `3 (N - 2 sqrt(N) + 1) / (N - 1)` for `N >= 2` and zero at
/// `N = 1`.
pub fn papr_factor(n_antennas: usize) -> f64 {
    let r = (n_antennas as f64).sqrt();
    3.0 * (r - 1.0) / (r + 1.0)
}

/// `d theta / dN` on the continuous relaxation.
pub fn papr_factor_derivative(n: f64) -> f64 {
    let r = n.sqrt();
    3.0 / (r * (r + 1.0) * (r + 1.0))
}

/// MMSE estimate variance per antenna, `F_jjk^2 / (1/snr + sum_m F_m)`.
///
/// `contaminating_sum` includes the user's own gain to its serving BS.
pub fn mmse_variance(serving_gain: f64, contaminating_sum: f64, training_snr: f64) -> f64 {
    let denom = contaminating_sum + 1.0 / training_snr;
    if denom == 0.0 {
        return 0.0;
    }
    serving_gain * serving_gain / denom
}

/// `1/snr + sum` of the gains from BS `bs` to every user sharing `user`'s pilot.
pub(crate) fn pilot_denominator(
    fading: &LargeScaleFading,
    pilots: &PilotConfig,
    training_snr: f64,
    bs: usize,
    user: usize,
) -> f64 {
    let pilot = pilots.pilot_of(user);
    let mut sum = 1.0 / training_snr;
    for m in 0..fading.cells() {
        for t in (pilot..fading.users()).step_by(pilots.pilot_length) {
            sum += fading.gain(bs, m, t);
        }
    }
    sum
}

/// Large-scale summary of one user, independent of `N` and `P_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGains {
    /// `S`, the estimate quality of the serving link.
    pub desired: f64,
    /// `phi_nQ`.
    pub noncoherent: f64,
    /// `phi_Q / N`.
    pub coherent_per_antenna: f64,
}

impl UserGains {
    pub fn terms(
        &self,
        n_antennas: usize,
        p_d: f64,
        users_per_cell: usize,
        noise_power_w: f64,
    ) -> RateTerms {
        let k = users_per_cell as f64;
        let phi_q = n_antennas as f64 * self.coherent_per_antenna;
        RateTerms {
            desired: self.desired,
            coherent: phi_q,
            noncoherent: self.noncoherent,
            combined: phi_q + self.noncoherent,
            noise: noise_power_w / (k * p_d),
        }
    }
}

/// Computes the [`UserGains`] of user `k` in cell `j`.
pub fn user_gains(
    fading: &LargeScaleFading,
    pilots: &PilotConfig,
    training_snr: f64,
    cell: usize,
    user: usize,
) -> UserGains {
    let cells = fading.cells();
    let users = fading.users();
    let k = users as f64;
    let serving = fading.gain(cell, cell, user);
    let own_denom = pilot_denominator(fading, pilots, training_snr, cell, user);
    let desired = if own_denom > 0.0 {
        serving * serving / own_denom
    } else {
        0.0
    };

    let noncoherent: f64 = (0..cells).map(|l| fading.gain(l, cell, user)).sum();

    let pilot = pilots.pilot_of(user);
    let mut coherent = 0.0;
    for l in 0..cells {
        let g = fading.gain(l, cell, user);
        if g == 0.0 {
            continue;
        }
        for i in (pilot..users).step_by(pilots.pilot_length) {
            if l == cell && i == user {
                continue;
            }
            let d = pilot_denominator(fading, pilots, training_snr, l, i);
            coherent += g * g / d;
        }
    }

    UserGains {
        desired,
        noncoherent,
        coherent_per_antenna: coherent / k,
    }
}

/// Gains of every user, ordered by cell then user.
pub fn all_user_gains(scenario: &Scenario) -> Vec<UserGains> {
    let snr = scenario.training_snr();
    let mut out = Vec::with_capacity(scenario.config.num_cells * scenario.config.users_per_cell);
    for j in 0..scenario.config.num_cells {
        for k in 0..scenario.config.users_per_cell {
            out.push(user_gains(&scenario.fading, &scenario.pilots, snr, j, k));
        }
    }
    out
}

/// Per-user closed-form rate terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTerms {
    /// `S`.
    pub desired: f64,
    /// `phi_Q`, grows linearly with `N`.
    pub coherent: f64,
    /// `phi_nQ`.
    pub noncoherent: f64,
    /// `phi = phi_Q + phi_nQ`.
    pub combined: f64,
    /// `n = sigma^2 / (K P_d)`; infinite when `P_d = 0`.
    pub noise: f64,
}

/// Rate terms of user `k` in cell `j` at `N` antennas and transmit power `P_d`.
pub fn rate_terms(
    scenario: &Scenario,
    p_d: f64,
    n_antennas: usize,
    cell: usize,
    user: usize,
) -> RateTerms {
    let snr = scenario.training_snr();
    user_gains(&scenario.fading, &scenario.pilots, snr, cell, user).terms(
        n_antennas,
        p_d,
        scenario.config.users_per_cell,
        scenario.config.noise_power_w,
    )
}

/// `B_p N S / ((B_p phi + n) K)`.
pub fn closed_form_sinr(
    terms: &RateTerms,
    pilot_power_w: f64,
    n_antennas: usize,
    users_per_cell: usize,
) -> f64 {
    let num = pilot_power_w * n_antennas as f64 * terms.desired;
    let den = (pilot_power_w * terms.combined + terms.noise) * users_per_cell as f64;
    if num == 0.0 {
        return 0.0;
    }
    num / den
}

/// Same SINR evaluated term by term, `(B_p N / K) S / (B_p phi_Q + B_p phi_nQ + n)`.
pub fn closed_form_sinr_by_terms(
    terms: &RateTerms,
    pilot_power_w: f64,
    n_antennas: usize,
    users_per_cell: usize,
) -> f64 {
    let num = pilot_power_w * n_antennas as f64 / users_per_cell as f64 * terms.desired;
    if num == 0.0 {
        return 0.0;
    }
    num / (pilot_power_w * terms.coherent + pilot_power_w * terms.noncoherent + terms.noise)
}

/// `r = K b log2(1 + SINR)` in bits/s.
pub fn closed_form_rate(
    terms: &RateTerms,
    config: &SystemConfig,
    pilots: &PilotConfig,
    n_antennas: usize,
) -> f64 {
    let sinr = closed_form_sinr(
        terms,
        pilots.pilot_power_w,
        n_antennas,
        config.users_per_cell,
    );
    config.users_per_cell as f64 * config.bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Base-station power split into amplifier and circuit parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    /// `theta / K * (P_d + N B_p)`.
    pub amplifier: f64,
    /// `N p_c`.
    pub circuit: f64,
    pub total: f64,
    /// PAPR factor `theta(N)`.
    pub papr: f64,
}

pub fn total_power(
    p_d: f64,
    pilot_power_w: f64,
    n_antennas: usize,
    users_per_cell: usize,
    circuit_per_antenna_w: f64,
) -> PowerBreakdown {
    let papr = papr_factor(n_antennas);
    let n = n_antennas as f64;
    let amplifier = papr / users_per_cell as f64 * (p_d + n * pilot_power_w);
    let circuit = n * circuit_per_antenna_w;
    PowerBreakdown {
        amplifier,
        circuit,
        total: amplifier + circuit,
        papr,
    }
}

/// Convenience wrapper over [`total_power`] taking scenario parts.
pub fn scenario_power(
    p_d: f64,
    pilots: &PilotConfig,
    n_antennas: usize,
    config: &SystemConfig,
    power: &PowerParams,
) -> PowerBreakdown {
    total_power(
        p_d,
        pilots.pilot_power_w,
        n_antennas,
        config.users_per_cell,
        power.circuit_per_antenna_w(),
    )
}

/// Energy efficiency `rate / total` in bits/J.
pub fn ee_value(rate_bps: f64, power: &PowerBreakdown) -> Result<f64> {
    if !(power.total > 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(rate_bps / power.total)
}
