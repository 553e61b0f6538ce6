//! Transmit-power allocation at a fixed antenna count through the Lagrangian
//! of the rate-floor and power-budget constraints.
//!
//! The outer loop is Dinkelbach over the EE level `eps`. For each `eps` the
//! inner loop maximises `L(P) = f1 - eps f2 + Q1 (f1 - r_min) - Q2 (f2 - P_max)`
//! by alternating the stationary power with projected subgradient steps on
//! the multipliers. The steps are scaled by the local sensitivity of each
//! constraint to its multiplier, which makes `alpha_t = 1 / sqrt(t)` contract
//! the multiplier error geometrically instead of at the plain subgradient rate.

use super::{EeOperatingPoint, EeProblem, Variant};
use crate::closed_form::{papr_factor, RateTerms};
use crate::error::{Error, Result};
use crate::scenario::{PilotConfig, SystemConfig};

const CONSTRAINT_TOL: f64 = 1e-6;
const OUTER_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Multipliers {
    /// Rate floor.
    pub q1: f64,
    /// Power budget.
    pub q2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    pub iteration: usize,
    pub q1: f64,
    pub q2: f64,
    pub step: f64,
    pub epsilon: f64,
    /// Power maximising the Lagrangian at these multipliers.
    pub p_d: f64,
}

/// Lagrangian of the fixed-`N` problem at transmit power `p_d`.
pub fn lagrangian_value(
    problem: &EeProblem,
    n: usize,
    p_d: f64,
    m: Multipliers,
    epsilon: f64,
) -> f64 {
    let r = problem.rate(n, p_d);
    let f2 = problem.power(n, p_d).total;
    r - epsilon * f2 + m.q1 * (r - problem.rate_floor_bps) - m.q2 * (f2 - problem.power_budget_w)
}

/// Closed-form Lagrangian maximiser for one user's rate terms.
///
/// The stationarity variant solves `dL/dP = 0` for
/// `SINR = alpha P / (beta P + c)`, `alpha = B_p N S`, `beta = K B_p phi`,
/// `c = sigma^2`, which is the positive root of
/// `(alpha + beta) beta P^2 + (alpha + 2 beta) c P + c^2 - alpha c kappa = 0`
/// with `kappa = (1 + Q1) K^2 b / (ln2 (eps + Q2) theta)`.
pub fn optimal_power(
    m: Multipliers,
    epsilon: f64,
    terms: &RateTerms,
    config: &SystemConfig,
    pilots: &PilotConfig,
    n: usize,
    variant: Variant,
) -> f64 {
    let k = config.users_per_cell as f64;
    let b = config.bandwidth_hz;
    let bp = pilots.pilot_power_w;
    let nf = n as f64;
    let ln2 = std::f64::consts::LN_2;
    match variant {
        Variant::Literal => {
            let first = k * (b + m.q1) / ((epsilon + m.q2) * ln2);
            let second = (bp * terms.combined + terms.noise) / (bp * nf * terms.desired * k);
            ((first - second) * k).max(0.0)
        }
        Variant::StationarityDerived => {
            let alpha = bp * nf * terms.desired;
            let beta = k * bp * terms.combined;
            let c = config.noise_power_w;
            let theta = papr_factor(n);
            stationary_root(
                alpha,
                beta,
                c,
                (1.0 + m.q1) * k * k * b / (ln2 * (epsilon + m.q2) * theta),
            )
        }
    }
}

fn stationary_root(alpha: f64, beta: f64, c: f64, kappa: f64) -> f64 {
    if kappa.is_infinite() {
        return if alpha > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let gap = alpha * c * kappa - c * c;
    if !(gap > 0.0) {
        return 0.0;
    }
    let a = alpha + beta;
    let lin = (a + beta) * c;
    2.0 * gap / (lin + (lin * lin + 4.0 * a * beta * gap).sqrt())
}

/// Unconstrained maximiser of the Lagrangian in `P_d >= 0` at fixed `N`.
pub fn stationary_power(problem: &EeProblem, n: usize, m: Multipliers, epsilon: f64) -> f64 {
    let k = problem.users_per_cell as f64;
    let slope = (epsilon + m.q2) * papr_factor(n) / k;
    let w = 1.0 + m.q1;
    if let [g] = problem.profiles.as_slice() {
        let (alpha, beta, c) = problem.sinr_coefficients(g, n as f64);
        let kappa = w * problem.rate_scale() / (std::f64::consts::LN_2 * slope);
        return stationary_root(alpha, beta, c, kappa);
    }
    let grad = |p: f64| w * problem.rate_power_derivatives(n, p).0 - slope;
    if grad(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while grad(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Largest power meeting the budget and the transmit range, nudged down until
/// the budget holds exactly in floating point.
fn budget_limit(problem: &EeProblem, n: usize) -> Result<f64> {
    let (lo, hi) = problem.transmit_range;
    if problem.power(n, lo).total > problem.power_budget_w {
        return Err(Error::Infeasible(format!(
            "power budget {} W is below the minimum consumption {} W at N = {n}",
            problem.power_budget_w,
            problem.power(n, lo).total
        )));
    }
    let theta = papr_factor(n);
    let k = problem.users_per_cell as f64;
    let nf = n as f64;
    let mut p = if theta > 0.0 {
        (k * (problem.power_budget_w - nf * problem.circuit_per_antenna_w) / theta
            - nf * problem.pilot_power_w)
            .min(hi)
    } else {
        hi
    };
    p = p.max(lo);
    while p > lo && problem.power(n, p).total > problem.power_budget_w {
        p = p.next_down().max(lo);
    }
    Ok(p)
}

/// Feasible transmit powers `[P_lo, P_hi]` at `N` antennas.
pub fn feasible_power_interval(problem: &EeProblem, n: usize) -> Result<(f64, f64)> {
    if n < problem.min_antennas || n > problem.max_antennas {
        return Err(Error::AntennasOutOfRange {
            n,
            min: problem.min_antennas,
            max: problem.max_antennas,
        });
    }
    let (lo, _) = problem.transmit_range;
    let p_hi = budget_limit(problem, n)?;
    let floor = problem.rate_floor_bps;
    if problem.rate(n, p_hi) < floor {
        return Err(Error::Infeasible(format!(
            "rate floor {floor} bit/s is unreachable at N = {n} within the power budget"
        )));
    }
    if problem.rate(n, lo) >= floor {
        return Ok((lo, p_hi));
    }
    let mut hi = if p_hi.is_finite() {
        p_hi
    } else {
        let mut h = lo.max(1.0);
        while problem.rate(n, h) < floor {
            h *= 2.0;
        }
        h
    };
    let mut a = lo;
    for _ in 0..2000 {
        let mid = 0.5 * (a + hi);
        if mid <= a || mid >= hi {
            break;
        }
        if problem.rate(n, mid) >= floor {
            hi = mid;
        } else {
            a = mid;
        }
    }
    Ok((hi, p_hi))
}

/// Best transmit power at `N` antennas under the rate floor and the budget.
///
/// `max_iter` caps the total number of multiplier updates. The returned point
/// is projected onto the feasible interval, so it satisfies every constraint
/// exactly.
pub fn dual_power_allocation(
    problem: &EeProblem,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(EeOperatingPoint, Vec<DualState>)> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let (p_lo, p_hi) = feasible_power_interval(problem, n)?;
    let (box_lo, box_hi) = problem.transmit_range;
    let k = problem.users_per_cell as f64;
    let theta = papr_factor(n);
    let mut trace = Vec::new();

    if p_lo == p_hi || problem.ee(n, p_hi) == 0.0 {
        trace.push(DualState {
            iteration: 0,
            q1: 0.0,
            q2: 0.0,
            step: 0.0,
            epsilon: problem.ee(n, p_lo),
            p_d: p_lo,
        });
        return Ok((problem.point(n, p_lo), trace));
    }
    if p_hi.is_infinite() {
        return Err(Error::Unbounded(format!(
            "EE grows without bound in P_d at N = {n}"
        )));
    }

    let r_min = problem.rate_floor_bps;
    let budget = problem.power_budget_w;
    let mut epsilon = problem.ee(n, p_hi);
    let mut m = Multipliers::default();
    let mut total = 0usize;

    for _ in 0..OUTER_MAX_ITER {
        let mut t = 0usize;
        let p_stat = loop {
            t += 1;
            total += 1;
            if total > max_iter {
                return Err(Error::NonConvergence {
                    solver: "dual power allocation",
                    iterations: max_iter,
                });
            }
            let p = stationary_power(problem, n, m, epsilon).clamp(box_lo, box_hi);
            let c1 = problem.rate(n, p) - r_min;
            let c2 = problem.power(n, p).total - budget;
            let step = 1.0 / (t as f64).sqrt();
            trace.push(DualState {
                iteration: total,
                q1: m.q1,
                q2: m.q2,
                step,
                epsilon,
                p_d: p,
            });

            let rel1 = if r_min > 0.0 { c1 / r_min } else { 0.0 };
            let rel2 = c2 / budget;
            let ok1 = rel1 > -CONSTRAINT_TOL && (m.q1 == 0.0 || rel1.abs() < CONSTRAINT_TOL);
            let ok2 = rel2 < CONSTRAINT_TOL && (m.q2 == 0.0 || rel2.abs() < CONSTRAINT_TOL);
            if ok1 && ok2 {
                break p;
            }

            let (d1, d2) = problem.rate_power_derivatives(n, p);
            let curvature = (1.0 + m.q1) * d2.abs();
            let interior = p > box_lo && p < box_hi && curvature > 0.0;
            if !ok2 {
                let s2 = (theta / k).powi(2) / curvature;
                m.q2 = if interior && s2.is_finite() && s2 > 0.0 {
                    m.q2 + step * c2 / s2
                } else {
                    m.q2 + step * (epsilon + m.q2) * c2 / budget
                }
                .max(0.0);
            }
            if !ok1 {
                let s1 = d1 * d1 / curvature;
                m.q1 = if interior && s1.is_finite() && s1 > 0.0 {
                    m.q1 - step * c1 / s1
                } else {
                    m.q1 - step * (1.0 + m.q1) * c1 / r_min.max(f64::MIN_POSITIVE)
                }
                .max(0.0);
            }
        };
        let p = p_stat.clamp(p_lo, p_hi);
        let next = problem.ee(n, p);
        let change = (next - epsilon).abs() / epsilon;
        epsilon = next;
        if change < tol {
            return Ok((problem.point(n, p), trace));
        }
    }
    Err(Error::NonConvergence {
        solver: "dinkelbach over transmit power",
        iterations: OUTER_MAX_ITER,
    })
}
