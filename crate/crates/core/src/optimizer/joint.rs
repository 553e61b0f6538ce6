use super::dual::{dual_power_allocation, feasible_power_interval};
use super::fractional::select_antennas;
use super::DualState;
use super::{EeOperatingPoint, EeProblem, TraceRow};
use crate::error::{Error, Result};

const DUAL_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    pub point: EeOperatingPoint,
    /// Antenna-selection and power-allocation rows of every outer pass.
    pub trace: Vec<TraceRow>,
    pub outer_iterations: usize,
}

/// Alternates antenna selection at fixed `P_d` with power allocation at fixed
/// `N` until the EE gain of a full pass drops below `tol` (relative).
///
/// Starts from the smallest antenna count with a non-empty feasible power
/// interval. When a pass no longer improves, neighbouring antenna counts are
/// tried with their own optimal power before stopping. A step is only
/// accepted when it improves the EE, so the EE never decreases across passes.
pub fn joint_optimize(problem: &EeProblem, tol: f64, max_iter: usize) -> Result<JointResult> {
    problem.validate()?;
    let n0 = (problem.min_antennas..=problem.max_antennas)
        .find(|&n| feasible_power_interval(problem, n).is_ok())
        .ok_or_else(|| {
            Error::Infeasible("no antenna count admits a feasible transmit power".into())
        })?;

    let mut trace = Vec::new();
    let (mut best, states) = dual_power_allocation(problem, n0, tol, DUAL_MAX_ITER)?;
    push_dual(&mut trace, &states, n0, problem);

    for outer in 1..=max_iter {
        let start = best.ee_bpj;
        let (cand, states) = select_antennas(problem, best.transmit_power_w, tol, 50)?;
        for s in &states {
            trace.push(TraceRow {
                iteration: trace.len(),
                epsilon: s.epsilon,
                j_value: s.j_value,
                q1: 0.0,
                q2: 0.0,
                p_d: best.transmit_power_w,
                n_antennas: s.n_at_max,
                ee: problem.ee(s.n_at_max, best.transmit_power_w),
            });
        }
        if cand.ee_bpj > best.ee_bpj {
            best = cand;
        }
        let (cand, states) = dual_power_allocation(problem, best.n_antennas, tol, DUAL_MAX_ITER)?;
        push_dual(&mut trace, &states, best.n_antennas, problem);
        if cand.ee_bpj > best.ee_bpj {
            best = cand;
        }
        if best.ee_bpj - start <= tol * best.ee_bpj {
            let before = best.ee_bpj;
            best = neighbour_search(problem, best, tol, &mut trace)?;
            if best.ee_bpj - before <= tol * best.ee_bpj {
                return Ok(JointResult {
                    point: best,
                    trace,
                    outer_iterations: outer,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        solver: "joint optimisation",
        iterations: max_iter,
    })
}

/// Walks `N` one step at a time in each direction, re-optimising the power at
/// every count, while the EE improves. The coordinate steps alone stall when
/// a binding rate floor couples `N` and `P_d`.
fn neighbour_search(
    problem: &EeProblem,
    mut best: EeOperatingPoint,
    tol: f64,
    trace: &mut Vec<TraceRow>,
) -> Result<EeOperatingPoint> {
    for dir in [-1isize, 1] {
        let mut n = best.n_antennas;
        loop {
            let Some(next) = n
                .checked_add_signed(dir)
                .filter(|&m| m >= problem.min_antennas && m <= problem.max_antennas)
            else {
                break;
            };
            let (cand, states) = match dual_power_allocation(problem, next, tol, DUAL_MAX_ITER) {
                Ok(r) => r,
                Err(Error::Infeasible(_)) => break,
                Err(e) => return Err(e),
            };
            push_dual(trace, &states, next, problem);
            if cand.ee_bpj <= best.ee_bpj {
                break;
            }
            best = cand;
            n = next;
        }
    }
    Ok(best)
}

fn push_dual(trace: &mut Vec<TraceRow>, states: &[DualState], n: usize, problem: &EeProblem) {
    for s in states {
        trace.push(TraceRow {
            iteration: trace.len(),
            epsilon: s.epsilon,
            j_value: problem.rate(n, s.p_d) - s.epsilon * problem.power(n, s.p_d).total,
            q1: s.q1,
            q2: s.q2,
            p_d: s.p_d,
            n_antennas: n,
            ee: problem.ee(n, s.p_d),
        });
    }
}

/// Exhaustive EE maximum over `n_grid x p_grid`, skipping infeasible points.
///
/// Ties resolve to the smaller `N`, then the smaller `P_d`.
pub fn grid_search_oracle(
    problem: &EeProblem,
    n_grid: &[usize],
    p_grid: &[f64],
) -> Result<EeOperatingPoint> {
    if n_grid.is_empty() || p_grid.is_empty() {
        return Err(Error::invalid("grid", "grids must be non-empty"));
    }
    let eval = |i: usize| {
        let (n, p) = (n_grid[i / p_grid.len()], p_grid[i % p_grid.len()]);
        problem.is_feasible(n, p).then(|| problem.point(n, p))
    };
    let count = n_grid.len() * p_grid.len();

    #[cfg(feature = "parallel")]
    let points: Vec<Option<EeOperatingPoint>> = {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<Option<EeOperatingPoint>> = (0..count).map(eval).collect();

    let better = |a: &EeOperatingPoint, b: &EeOperatingPoint| {
        a.ee_bpj > b.ee_bpj
            || (a.ee_bpj == b.ee_bpj
                && (a.n_antennas, a.transmit_power_w) < (b.n_antennas, b.transmit_power_w))
    };
    points
        .into_iter()
        .flatten()
        .fold(None, |best: Option<EeOperatingPoint>, p| match best {
            Some(b) if !better(&p, &b) => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| Error::Infeasible("every grid point violates a constraint".into()))
}
