//! Monte Carlo link simulator used as an oracle for the closed forms.
//!
//! Each trial draws i.i.d. Rayleigh small-scale fading on every link, forms
//! the MMSE estimate of every serving channel from a shared-pilot training
//! observation, builds MRT precoders and records the coherent and total
//! received amplitudes of every user. Expectations become sample means
//! over trials. Trial `t` draws from ChaCha stream `t` of the master seed, and
//! trials are reduced in fixed-size chunks in index order, so results do not
//! depend on the number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::closed_form::pilot_denominator;
use crate::error::{Error, Result};
use crate::scenario::{LargeScaleFading, PilotConfig, Scenario};

const CHUNK: usize = 64;

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// One draw of every channel in the network plus the training noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    cells: usize,
    users: usize,
    n_antennas: usize,
    /// `g[l][j][k]`, unit-variance entries.
    small_scale: Vec<Complex64>,
    /// `h[l][j][k] = sqrt(F_ljk) g[l][j][k]`.
    channels: Vec<Complex64>,
    /// Unit-variance training noise per (BS, pilot).
    training_noise: Vec<Complex64>,
    /// Received training signal per (BS, pilot), filled by [`mmse_estimate`].
    training_rx: Vec<Complex64>,
    /// MMSE estimate of each serving channel `[l][k]`.
    estimates: Vec<Complex64>,
    /// MRT precoder of each served user `[l][k]`, zero when undefined.
    precoders: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    fn link(&self, l: usize, j: usize, k: usize) -> std::ops::Range<usize> {
        let start = ((l * self.cells + j) * self.users + k) * self.n_antennas;
        start..start + self.n_antennas
    }

    fn served(&self, l: usize, k: usize) -> std::ops::Range<usize> {
        let start = (l * self.users + k) * self.n_antennas;
        start..start + self.n_antennas
    }

    pub fn small_scale(&self, l: usize, j: usize, k: usize) -> &[Complex64] {
        &self.small_scale[self.link(l, j, k)]
    }

    /// Channel from BS `l` to user `k` of cell `j`.
    pub fn channel(&self, l: usize, j: usize, k: usize) -> &[Complex64] {
        &self.channels[self.link(l, j, k)]
    }

    /// Training observation of BS `l` on `pilot`.
    pub fn training_rx(&self, l: usize, pilot: usize) -> &[Complex64] {
        &self.training_rx[self.served(l, pilot)]
    }

    /// MMSE estimate of the channel from BS `l` to its own user `k`.
    pub fn estimate(&self, l: usize, k: usize) -> &[Complex64] {
        &self.estimates[self.served(l, k)]
    }

    pub fn precoder(&self, l: usize, k: usize) -> &[Complex64] {
        &self.precoders[self.served(l, k)]
    }
}

/// Draws a realization with the given rng.
pub fn draw_channels_with<R: Rng>(
    fading: &LargeScaleFading,
    n_antennas: usize,
    rng: &mut R,
) -> ChannelRealization {
    let (cells, users) = (fading.cells(), fading.users());
    let links = cells * cells * users;
    let mut small_scale = Vec::with_capacity(links * n_antennas);
    let mut channels = Vec::with_capacity(links * n_antennas);
    for l in 0..cells {
        for j in 0..cells {
            for k in 0..users {
                let amp = fading.gain(l, j, k).sqrt();
                for _ in 0..n_antennas {
                    let g = complex_gaussian(rng);
                    small_scale.push(g);
                    channels.push(g * amp);
                }
            }
        }
    }
    let served = cells * users * n_antennas;
    let training_noise = (0..served).map(|_| complex_gaussian(rng)).collect();
    ChannelRealization {
        cells,
        users,
        n_antennas,
        small_scale,
        channels,
        training_noise,
        training_rx: vec![Complex64::default(); served],
        estimates: vec![Complex64::default(); served],
        precoders: vec![Complex64::default(); served],
    }
}

/// Draws every channel of the scenario for `n_antennas` active antennas.
pub fn draw_channels(
    scenario: &Scenario,
    n_antennas: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    scenario.check_antennas(n_antennas)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_channels_with(&scenario.fading, n_antennas, &mut rng))
}

/// Scalar MMSE error covariance factor `Psi_jk = F_jjk^2 / (1/snr + sum_m F_jmk)`.
///
/// The sum runs over the users sharing pilot `k` as seen from BS `j`.
pub fn mmse_covariance(
    fading: &LargeScaleFading,
    pilots: &PilotConfig,
    training_snr: f64,
    cell: usize,
    user: usize,
) -> f64 {
    let f = fading.gain(cell, cell, user);
    f * f / pilot_denominator(fading, pilots, training_snr, cell, user)
}

/// Forms the training observations and MMSE estimates of every serving
/// channel, then the MRT precoders.
///
/// BS `l` observes `w = sum_{same pilot} h + z / sqrt(snr)` and estimates its
/// user `k` as `(F_llk / D_lk) w`.
pub fn mmse_estimate(
    realization: &mut ChannelRealization,
    fading: &LargeScaleFading,
    pilots: &PilotConfig,
    training_snr: f64,
) {
    let (cells, users, n) = (realization.cells, realization.users, realization.n_antennas);
    let noise_scale = 1.0 / training_snr.sqrt();
    for l in 0..cells {
        for p in 0..users.min(pilots.pilot_length) {
            let mut w: Vec<Complex64> = realization.training_noise[realization.served(l, p)]
                .iter()
                .map(|z| z * noise_scale)
                .collect();
            for m in 0..cells {
                for t in (p..users).step_by(pilots.pilot_length) {
                    for (acc, h) in w.iter_mut().zip(realization.channel(l, m, t)) {
                        *acc += h;
                    }
                }
            }
            let range = realization.served(l, p);
            realization.training_rx[range].copy_from_slice(&w);
        }
        for k in 0..users {
            let d = pilot_denominator(fading, pilots, training_snr, l, k);
            let scale = fading.gain(l, l, k) / d;
            let src = realization.served(l, pilots.pilot_of(k));
            let dst = realization.served(l, k);
            for a in 0..n {
                realization.estimates[dst.start + a] =
                    realization.training_rx[src.start + a] * scale;
            }
            let q = mrt_precoder(&realization.estimates[dst.clone()])
                .unwrap_or_else(|_| vec![Complex64::default(); n]);
            realization.precoders[dst].copy_from_slice(&q);
        }
    }
}

/// Maximum-ratio precoder `q = h_hat / |h_hat|`.
pub fn mrt_precoder(estimate: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = norm_sqr(estimate).sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(estimate.iter().map(|h| h / norm).collect())
}

/// Scaling of the maximum-ratio precoder `q = c h_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MrtNormalization {
    /// `c = 1 / sqrt(E|h_hat|^2)`: unit power on average. The closed-form DS
    /// and interference terms are exact expectations for this precoder.
    #[default]
    Average,
    /// `c = 1 / |h_hat|`: unit power in every realization. Its coherent gain
    /// and beamforming-uncertainty term differ from the closed forms at
    /// finite `N`.
    Instantaneous,
}

/// Average-power precoder `q = h_hat / sqrt(n psi)` for an estimate with
/// per-antenna variance `psi`.
pub fn mrt_precoder_average(estimate: &[Complex64], psi: f64) -> Result<Vec<Complex64>> {
    let scale = (estimate.len() as f64 * psi).sqrt();
    if !(scale > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(estimate.iter().map(|h| h / scale).collect())
}

/// Monte Carlo estimate of one user's desired and interference-plus-noise power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSinr {
    /// `rho |E[h^H q]|^2` with per-user power `rho = P_d B_p`.
    pub ds_power: f64,
    /// All received power minus the coherent part, plus noise.
    pub un_power: f64,
    pub sinr: f64,
    pub trials: usize,
    /// Standard error of `sinr` (delta method).
    pub std_err: f64,
    /// Standard error of `ds_power`.
    pub ds_std_err: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    coherent: Complex64,
    coherent_sq: f64,
    total: f64,
    total_sq: f64,
}

impl Moments {
    fn add(&mut self, other: &Moments) {
        self.coherent += other.coherent;
        self.coherent_sq += other.coherent_sq;
        self.total += other.total;
        self.total_sq += other.total_sq;
    }
}

struct Trial<'a> {
    scenario: &'a Scenario,
    n_antennas: usize,
    seed: u64,
    norm: MrtNormalization,
    /// `1 / sqrt(N psi_lk)` per served user, used by average normalization.
    avg_scale: Vec<f64>,
}

fn run_trial(cfg: &Trial, trial: u64, out: &mut [Moments]) {
    let scenario = cfg.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let mut r = draw_channels_with(&scenario.fading, cfg.n_antennas, &mut rng);
    mmse_estimate(
        &mut r,
        &scenario.fading,
        &scenario.pilots,
        scenario.training_snr(),
    );
    let (cells, users) = (r.cells, r.users);
    if cfg.norm == MrtNormalization::Average {
        for (q, (h, s)) in r
            .precoders
            .chunks_mut(cfg.n_antennas)
            .zip(r.estimates.chunks(cfg.n_antennas).zip(&cfg.avg_scale))
        {
            for (qa, ha) in q.iter_mut().zip(h) {
                *qa = ha * *s;
            }
        }
    }
    for j in 0..cells {
        for k in 0..users {
            let mut total = 0.0;
            let mut coherent = Complex64::default();
            for l in 0..cells {
                let h = r.channel(l, j, k);
                for i in 0..users {
                    let a = dot_h(h, r.precoder(l, i));
                    total += a.norm_sqr();
                    if l == j && i == k {
                        coherent = a;
                    }
                }
            }
            let m = &mut out[j * users + k];
            m.coherent += coherent;
            m.coherent_sq += coherent.norm_sqr();
            m.total += total;
            m.total_sq += total * total;
        }
    }
}

fn chunk_moments(cfg: &Trial, trials: usize, chunk: usize) -> Vec<Moments> {
    let users = cfg.scenario.config.num_cells * cfg.scenario.config.users_per_cell;
    let mut acc = vec![Moments::default(); users];
    let start = chunk * CHUNK;
    for t in start..(start + CHUNK).min(trials) {
        run_trial(cfg, t as u64, &mut acc);
    }
    acc
}

/// Estimates DS, UN and SINR of every user (ordered by cell, then user) from
/// `trials` independent realizations, with average-normalized MRT.
pub fn empirical_sinr(
    scenario: &Scenario,
    p_d: f64,
    n_antennas: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<EmpiricalSinr>> {
    empirical_sinr_with(
        scenario,
        p_d,
        n_antennas,
        trials,
        seed,
        MrtNormalization::Average,
    )
}

pub fn empirical_sinr_with(
    scenario: &Scenario,
    p_d: f64,
    n_antennas: usize,
    trials: usize,
    seed: u64,
    norm: MrtNormalization,
) -> Result<Vec<EmpiricalSinr>> {
    scenario.check_antennas(n_antennas)?;
    if trials < 100 {
        return Err(Error::invalid(
            "trials",
            format!("need at least 100 trials, got {trials}"),
        ));
    }
    if !(p_d >= 0.0 && p_d.is_finite()) {
        return Err(Error::invalid(
            "transmit_power",
            "must be finite and non-negative",
        ));
    }
    let chunks = trials.div_ceil(CHUNK);
    let snr = scenario.training_snr();
    let (cells, users) = (scenario.config.num_cells, scenario.config.users_per_cell);
    let avg_scale = (0..cells * users)
        .map(|u| {
            let psi = mmse_covariance(
                &scenario.fading,
                &scenario.pilots,
                snr,
                u / users,
                u % users,
            );
            let d = (n_antennas as f64 * psi).sqrt();
            if d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        })
        .collect();
    let cfg = Trial {
        scenario,
        n_antennas,
        seed,
        norm,
        avg_scale,
    };

    #[cfg(feature = "parallel")]
    let partials: Vec<Vec<Moments>> = {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(|c| chunk_moments(&cfg, trials, c))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Vec<Moments>> = (0..chunks)
        .map(|c| chunk_moments(&cfg, trials, c))
        .collect();

    let users = scenario.config.num_cells * scenario.config.users_per_cell;
    let mut sums = vec![Moments::default(); users];
    for part in &partials {
        for (s, p) in sums.iter_mut().zip(part) {
            s.add(p);
        }
    }

    let rho = p_d * scenario.pilots.pilot_power_w;
    let sigma2 = scenario.config.noise_power_w;
    let t = trials as f64;
    Ok(sums
        .iter()
        .map(|m| {
            let mean_a = m.coherent / t;
            let coh2 = mean_a.norm_sqr();
            let mean_tot = m.total / t;
            let var_a = (m.coherent_sq / t - coh2).max(0.0);
            let var_tot = (m.total_sq / t - mean_tot * mean_tot).max(0.0);
            let ds = rho * coh2;
            let un = rho * (mean_tot - coh2) + sigma2;
            let ds_se = 2.0 * rho * coh2.sqrt() * (var_a / t).sqrt();
            let un_se = rho * (var_tot / t).sqrt();
            let sinr = ds / un;
            let std_err = if ds > 0.0 {
                sinr * ((ds_se / ds).powi(2) + (un_se / un).powi(2)).sqrt()
            } else {
                0.0
            };
            EmpiricalSinr {
                ds_power: ds,
                un_power: un,
                sinr,
                trials,
                std_err,
                ds_std_err: ds_se,
            }
        })
        .collect())
}
