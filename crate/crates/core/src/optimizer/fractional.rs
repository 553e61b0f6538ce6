//! Dinkelbach iteration for integer fractional programs and its use for
//! antenna selection at a fixed transmit power.

use super::{EeOperatingPoint, EeProblem, Variant};
use crate::closed_form::{papr_factor_derivative, RateTerms, UserGains};
use crate::error::{Error, Result};
use crate::scenario::{PilotConfig, PowerParams, SystemConfig};

/// `max f1(n) / f2(n)` over a finite candidate set with `f2 > 0`.
pub trait FractionalProgram {
    fn candidates(&self) -> Vec<usize>;
    fn numerator(&self, n: usize) -> f64;
    fn denominator(&self, n: usize) -> f64;
}

/// A program given by two closures.
pub struct FnProgram<F1, F2> {
    pub candidates: Vec<usize>,
    pub f1: F1,
    pub f2: F2,
}

impl<F1: Fn(usize) -> f64, F2: Fn(usize) -> f64> FractionalProgram for FnProgram<F1, F2> {
    fn candidates(&self) -> Vec<usize> {
        self.candidates.clone()
    }
    fn numerator(&self, n: usize) -> f64 {
        (self.f1)(n)
    }
    fn denominator(&self, n: usize) -> f64 {
        (self.f2)(n)
    }
}

/// Antenna counts feasible at a fixed transmit power.
pub struct AntennaProgram<'a> {
    pub problem: &'a EeProblem,
    pub p_d: f64,
}

impl FractionalProgram for AntennaProgram<'_> {
    fn candidates(&self) -> Vec<usize> {
        (self.problem.min_antennas..=self.problem.max_antennas)
            .filter(|&n| self.problem.is_feasible(n, self.p_d))
            .collect()
    }
    fn numerator(&self, n: usize) -> f64 {
        self.problem.rate(n, self.p_d)
    }
    fn denominator(&self, n: usize) -> f64 {
        self.problem.power(n, self.p_d).total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalState {
    pub iteration: usize,
    pub epsilon: f64,
    pub j_value: f64,
    /// Maximiser of `f1 - epsilon f2`.
    pub n_at_max: usize,
}

/// `J(eps) = max_n f1(n) - eps f2(n)` and its smallest maximiser.
pub fn fractional_residual<P: FractionalProgram + ?Sized>(
    program: &P,
    epsilon: f64,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for n in program.candidates() {
        let v = program.numerator(n) - epsilon * program.denominator(n);
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, n));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible candidate".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachResult {
    pub n: usize,
    pub epsilon: f64,
    pub trace: Vec<FractionalState>,
}

/// Iterates `eps <- f1(n*) / f2(n*)` from `eps = 0` until `|J| / f2 < tol` or
/// the maximiser repeats.
pub fn dinkelbach<P: FractionalProgram + ?Sized>(
    program: &P,
    tol: f64,
    max_iter: usize,
) -> Result<DinkelbachResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let ratio = |n: usize| program.numerator(n) / program.denominator(n);
    let mut epsilon = 0.0;
    let mut prev: Option<usize> = None;
    let mut trace = Vec::new();
    for iteration in 0..=max_iter {
        let (j_value, n) = fractional_residual(program, epsilon)?;
        trace.push(FractionalState {
            iteration,
            epsilon,
            j_value,
            n_at_max: n,
        });
        // A repeated maximiser is the exact fixed point; J is then zero up to
        // rounding, which can exceed `tol` when f1 is large.
        if j_value.abs() / program.denominator(n) < tol || prev == Some(n) {
            let n = match prev {
                Some(p) if ratio(p) > ratio(n) || (ratio(p) == ratio(n) && p < n) => p,
                _ => n,
            };
            return Ok(DinkelbachResult {
                n,
                epsilon: ratio(n),
                trace,
            });
        }
        epsilon = ratio(n);
        prev = Some(n);
    }
    Err(Error::NonConvergence {
        solver: "dinkelbach",
        iterations: max_iter,
    })
}

/// Best antenna count at fixed `P_d`.
pub fn select_antennas(
    problem: &EeProblem,
    p_d: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(EeOperatingPoint, Vec<FractionalState>)> {
    problem.validate()?;
    let program = AntennaProgram { problem, p_d };
    let r = dinkelbach(&program, tol, max_iter).map_err(|e| match e {
        Error::Infeasible(_) => {
            Error::Infeasible(format!("no antenna count is feasible at P_d = {p_d} W"))
        }
        e => e,
    })?;
    Ok((problem.point(r.n, p_d), r.trace))
}

/// Closed-form antenna count, possibly clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaChoice {
    pub n: usize,
    /// Value before rounding and clamping.
    pub unclamped: f64,
    pub clamped: bool,
}

/// The textbook antenna-count expression
/// `[b / (p_c eps ln2) - (P_d B_p phi + n) / (S P_d B_p)] K`, unrounded.
pub fn closed_form_antenna_literal(
    epsilon: f64,
    terms: &RateTerms,
    p_d: f64,
    pilots: &PilotConfig,
    power: &PowerParams,
    config: &SystemConfig,
) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let pb = p_d * pilots.pilot_power_w;
    let first = config.bandwidth_hz / (power.circuit_per_antenna_w() * epsilon * ln2);
    let second = (pb * terms.combined + terms.noise) / (terms.desired * pb);
    (first - second) * config.users_per_cell as f64
}

/// Rounds a continuous count by comparing EE at its floor and ceiling.
///
/// The count is clamped to the feasible antenna interval at `P_d`, or to
/// `[K, M]` when no count is feasible.
fn round_antennas(problem: &EeProblem, p_d: f64, x: f64) -> AntennaChoice {
    let (lo, hi) = problem
        .feasible_antennas(p_d)
        .unwrap_or((problem.min_antennas, problem.max_antennas));
    let clamped = !(x >= lo as f64 && x <= hi as f64);
    let n = if x.is_nan() || x <= lo as f64 {
        lo
    } else if x >= hi as f64 {
        hi
    } else {
        let f = x.floor() as usize;
        let c = (f + 1).min(hi);
        if problem.ee(f, p_d) >= problem.ee(c, p_d) {
            f
        } else {
            c
        }
    };
    AntennaChoice {
        n,
        unclamped: x,
        clamped,
    }
}

/// Closed-form antenna count at EE level `epsilon` and fixed `P_d`.
///
/// The stationarity variant solves `df1/dN = eps df2/dN` on the continuous
/// relaxation, keeping the root with the largest `f1 - eps f2`. The literal
/// variant applies the textbook expression at the users' mean gains, re-evaluating the `N`-dependent interference until the
/// rounded count repeats.
pub fn closed_form_antenna(
    problem: &EeProblem,
    epsilon: f64,
    p_d: f64,
    variant: Variant,
) -> AntennaChoice {
    let x = match variant {
        Variant::StationarityDerived => stationary_antennas(problem, epsilon, p_d),
        Variant::Literal => literal_antennas(problem, epsilon, p_d),
    };
    round_antennas(problem, p_d, x)
}

fn stationary_antennas(problem: &EeProblem, epsilon: f64, p_d: f64) -> f64 {
    const N_MAX: f64 = 1e7;
    let k = problem.users_per_cell as f64;
    let bp = problem.pilot_power_w;
    let h = |n: f64| {
        let theta = 3.0 * (n.sqrt() - 1.0) / (n.sqrt() + 1.0);
        let df2 = problem.circuit_per_antenna_w
            + (papr_factor_derivative(n) * (p_d + n * bp) + theta * bp) / k;
        problem.rate_antenna_derivative(n, p_d) - epsilon * df2
    };
    let objective = |n: f64| problem.rate_relaxed(n, p_d) - epsilon * problem.power_relaxed(n, p_d);
    // f2 is concave in N while the amplifier-efficiency slope dominates, so
    // `h` can change sign more than once. Every downward crossing on a
    // geometric grid is refined, and the best one wins.
    let lo = problem.min_antennas as f64;
    let mut candidates = Vec::new();
    if h(lo) <= 0.0 {
        candidates.push(lo);
    }
    let (mut a, mut ha) = (lo, h(lo));
    while a < N_MAX {
        let b = (a * 1.01).min(N_MAX);
        let hb = h(b);
        if ha > 0.0 && hb <= 0.0 {
            candidates.push(bisect_crossing(&h, a, b));
        }
        (a, ha) = (b, hb);
    }
    if ha > 0.0 {
        candidates.push(N_MAX);
    }
    let best = candidates.into_iter().map(|x| (objective(x), x)).fold(
        (f64::NEG_INFINITY, lo),
        |acc, c| if c.0 > acc.0 { c } else { acc },
    );
    if best.1 >= N_MAX {
        f64::INFINITY
    } else {
        best.1
    }
}

fn bisect_crossing(h: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn literal_antennas(problem: &EeProblem, epsilon: f64, p_d: f64) -> f64 {
    let m = problem.profiles.len() as f64;
    let mean = |f: fn(&UserGains) -> f64| problem.profiles.iter().map(f).sum::<f64>() / m;
    let (s, nq, cpa) = (
        mean(|g| g.desired),
        mean(|g| g.noncoherent),
        mean(|g| g.coherent_per_antenna),
    );
    let k = problem.users_per_cell as f64;
    let ln2 = std::f64::consts::LN_2;
    let pb = p_d * problem.pilot_power_w;
    let noise = problem.noise_power_w / (k * p_d);
    let eval = |n: f64| {
        let phi = n * cpa + nq;
        (problem.bandwidth_hz / (problem.circuit_per_antenna_w * epsilon * ln2)
            - (pb * phi + noise) / (s * pb))
            * k
    };
    let mut n = problem.min_antennas as f64;
    let mut x = eval(n);
    for _ in 0..50 {
        let next = x
            .clamp(problem.min_antennas as f64, problem.max_antennas as f64)
            .round();
        if next == n || !x.is_finite() {
            break;
        }
        n = next;
        x = eval(n);
    }
    x
}

/// Integer EE argmax over the feasible counts in `[K, M]` at fixed `P_d` by
/// exhaustive search; ties go to the smaller count.
pub fn exhaustive_antennas(problem: &EeProblem, p_d: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for n in (problem.min_antennas..=problem.max_antennas).filter(|&n| problem.is_feasible(n, p_d))
    {
        let v = problem.ee(n, p_d);
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, n));
        }
    }
    best.map(|b| b.1)
}
