//! Sweeps, the oracle validation suite and figure reproduction behind the
//! `ee` command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel_mc::empirical_sinr;
use crate::closed_form::{closed_form_rate, rate_terms, total_power, user_gains};
use crate::error::{Error, Result};
use crate::optimizer::{
    closed_form_antenna, dual_power_allocation, exhaustive_antennas, grid_search_oracle,
    joint_optimize, select_antennas, EeOperatingPoint, EeProblem, Variant,
};
use crate::scenario::{parse_scenario, Scenario};

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.scn");

/// Bundled scenarios by name.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("default", DEFAULT_SCENARIO),
    ("two_cell", include_str!("../scenarios/two_cell.scn")),
    ("single_cell", include_str!("../scenarios/single_cell.scn")),
    ("dense", include_str!("../scenarios/dense.scn")),
];

pub fn bundled_scenario(name: &str) -> Result<Scenario> {
    let (_, text) = BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::invalid("scenario", format!("no bundled scenario named {name}")))?;
    parse_scenario(text, Path::new(name), Path::new("."))
}

pub fn default_scenario() -> Scenario {
    bundled_scenario("default").expect("bundled default scenario parses")
}

/// Transmit power in watts from dB relative to the noise power.
pub fn db_to_watts(db: f64, noise_power_w: f64) -> f64 {
    noise_power_w * 10f64.powf(db / 10.0)
}

pub const SOLVER_TOL: f64 = 1e-9;
pub const DINKELBACH_MAX_ITER: usize = 50;
pub const DUAL_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Antennas,
    /// Transmit power in dB relative to the noise power.
    TransmitPowerDb,
    PilotLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    ClosedForm,
    MonteCarlo { trials: usize, seed: u64 },
    Optimize,
}

/// Inclusive arithmetic range `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::invalid("range", format!("expected start:stop:step, got {text:?}"));
        let [a, b, s] = parts.as_slice() else {
            return Err(bad());
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let r = SweepRange {
            start: num(a)?,
            stop: num(b)?,
            step: num(s)?,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("range", "step must be positive"));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.stop >= self.start) {
            return Err(Error::invalid("range", "need start <= stop"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

/// Parameters held constant along a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub n_antennas: usize,
    pub transmit_power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub range: SweepRange,
    pub fixed: FixedPoint,
    pub mode: SweepMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub rate_bps: f64,
    pub power_w: f64,
    pub ee_bpj: f64,
    pub ee_stderr: Option<f64>,
}

fn integer_value(x: f64, what: &'static str) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Error::invalid(
            what,
            format!("{x} is not a positive integer"),
        ))
    }
}

fn monte_carlo_row(
    scenario: &Scenario,
    x: f64,
    n: usize,
    p_d: f64,
    trials: usize,
    seed: u64,
) -> Result<SweepRow> {
    let users = empirical_sinr(scenario, p_d, n, trials, seed)?;
    let k = scenario.config.users_per_cell as f64;
    let scale = k * scenario.config.bandwidth_hz / users.len() as f64 / std::f64::consts::LN_2;
    let rate = scale * users.iter().map(|u| u.sinr.ln_1p()).sum::<f64>();
    // delta method, per-user estimates treated as independent
    let var: f64 = users
        .iter()
        .map(|u| (scale * u.std_err / (1.0 + u.sinr)).powi(2))
        .sum();
    let power = total_power(
        p_d,
        scenario.pilots.pilot_power_w,
        n,
        scenario.config.users_per_cell,
        scenario.power.circuit_per_antenna_w(),
    )
    .total;
    Ok(SweepRow {
        x,
        rate_bps: rate,
        power_w: power,
        ee_bpj: rate / power,
        ee_stderr: Some(var.sqrt() / power),
    })
}

fn point_row(x: f64, p: &EeOperatingPoint) -> SweepRow {
    SweepRow {
        x,
        rate_bps: p.rate_bps,
        power_w: p.total_power_w,
        ee_bpj: p.ee_bpj,
        ee_stderr: None,
    }
}

fn sweep_point(spec: &SweepSpec, scenario: &Scenario, x: f64) -> Result<SweepRow> {
    let mut n = spec.fixed.n_antennas;
    let mut p_d = spec.fixed.transmit_power_w;
    let mut s = scenario.clone();
    match spec.variable {
        SweepVariable::Antennas => n = integer_value(x, "antennas")?,
        SweepVariable::TransmitPowerDb => p_d = db_to_watts(x, scenario.config.noise_power_w),
        SweepVariable::PilotLength => {
            s = scenario.with_pilot_length(integer_value(x, "pilot_length")?)?
        }
    }
    s.check_antennas(n)?;
    match spec.mode {
        SweepMode::ClosedForm => Ok(point_row(x, &EeProblem::from_scenario(&s).point(n, p_d))),
        SweepMode::MonteCarlo { trials, seed } => monte_carlo_row(&s, x, n, p_d, trials, seed),
        SweepMode::Optimize => {
            let problem = EeProblem::from_scenario(&s);
            let point = match spec.variable {
                SweepVariable::Antennas => {
                    dual_power_allocation(&problem, n, SOLVER_TOL, DUAL_MAX_ITER)?.0
                }
                SweepVariable::TransmitPowerDb => {
                    select_antennas(&problem, p_d, SOLVER_TOL, DINKELBACH_MAX_ITER)?.0
                }
                SweepVariable::PilotLength => {
                    joint_optimize(&problem, SOLVER_TOL, DINKELBACH_MAX_ITER)?.point
                }
            };
            Ok(point_row(x, &point))
        }
    }
}

/// Evaluates every grid point of the sweep; rows come back in ascending `x`.
pub fn run_sweep(spec: &SweepSpec, scenario: &Scenario) -> Result<Vec<SweepRow>> {
    spec.range.validate()?;
    let xs = spec.range.values();
    let rows: Vec<Result<SweepRow>> = match spec.mode {
        // Monte Carlo points are already parallel inside.
        SweepMode::MonteCarlo { .. } => {
            xs.iter().map(|&x| sweep_point(spec, scenario, x)).collect()
        }
        _ => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                xs.par_iter()
                    .map(|&x| sweep_point(spec, scenario, x))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                xs.iter().map(|&x| sweep_point(spec, scenario, x)).collect()
            }
        }
    };
    rows.into_iter().collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let with_err = rows.iter().any(|r| r.ee_stderr.is_some());
    let mut out = String::from("x,rate_bps,power_w,ee_bpj");
    if with_err {
        out.push_str(",ee_stderr");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{}", r.x, r.rate_bps, r.power_w, r.ee_bpj);
        if with_err {
            let _ = write!(out, ",{}", r.ee_stderr.unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// One line of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>12}  {:>12}  result\n",
            "check", "measured", "threshold"
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.4e}  {:>12.4e}  {}",
                c.name,
                c.measured,
                c.threshold,
                if c.passed { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

/// Counts strict local maxima of a sampled curve, treating equal neighbours
/// as one plateau.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let mut v: Vec<f64> = Vec::with_capacity(values.len());
    for &x in values {
        if v.last() != Some(&x) {
            v.push(x);
        }
    }
    (0..v.len())
        .filter(|&i| (i == 0 || v[i] > v[i - 1]) && (i + 1 == v.len() || v[i] > v[i + 1]))
        .count()
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Antenna count used for Monte Carlo checks: 64 clamped into `[K, M]`.
fn validation_antennas(s: &Scenario) -> usize {
    64.clamp(s.config.users_per_cell, s.config.max_antennas)
}

/// Runs the oracle suite on one scenario.
pub fn run_validation(scenario: &Scenario, trials: usize, seed: u64) -> Result<ValidationReport> {
    if trials < 1000 {
        return Err(Error::invalid(
            "trials",
            format!("validation needs at least 1000 trials, got {trials}"),
        ));
    }
    let mut checks = Vec::new();
    let mut add = |name: &str, measured: f64, threshold: f64, passed: bool| {
        checks.push(Check {
            name: name.to_string(),
            measured,
            threshold,
            passed,
        })
    };
    let problem = EeProblem::from_scenario(scenario);
    let n = validation_antennas(scenario);
    let p_d = db_to_watts(10.0, scenario.config.noise_power_w);

    // Monte Carlo against the closed form.
    let mc = empirical_sinr(scenario, p_d, n, trials, seed)?;
    let (cells, users) = (scenario.config.num_cells, scenario.config.users_per_cell);
    let snr = scenario.training_snr();
    let mut worst_gap: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for j in 0..cells {
        for k in 0..users {
            let e = &mc[j * users + k];
            let t = rate_terms(scenario, p_d, n, j, k);
            let cf = closed_form_rate(&t, &scenario.config, &scenario.pilots, n) / users as f64;
            let emp = scenario.config.bandwidth_hz * e.sinr.ln_1p() / std::f64::consts::LN_2;
            worst_gap = worst_gap.max((cf / emp - 1.0).abs());
            let g = user_gains(&scenario.fading, &scenario.pilots, snr, j, k);
            let ds_cf = p_d * scenario.pilots.pilot_power_w * n as f64 * g.desired;
            worst_z = worst_z.max((ds_cf - e.ds_power).abs() / e.ds_std_err);
        }
    }
    add(
        "mc_vs_closed_form_rate_rel_gap",
        worst_gap,
        0.05,
        worst_gap <= 0.05,
    );
    add("mc_desired_signal_z_score", worst_z, 3.0, worst_z <= 3.0);

    // Antenna selection against exhaustive search.
    let (sel, trace) = select_antennas(&problem, p_d, SOLVER_TOL, DINKELBACH_MAX_ITER)?;
    let exhaustive = exhaustive_antennas(&problem, p_d).map_or(f64::NAN, |m| problem.ee(m, p_d));
    let gap = (exhaustive - sel.ee_bpj).abs() / exhaustive;
    add("antenna_selection_vs_exhaustive", gap, 1e-12, gap <= 1e-12);
    let monotone = trace
        .windows(2)
        .all(|w| w[1].epsilon >= w[0].epsilon && w[1].j_value < w[0].j_value);
    add(
        "dinkelbach_trace_monotone",
        if monotone { 0.0 } else { 1.0 },
        0.0,
        monotone,
    );

    let stat = closed_form_antenna(&problem, sel.ee_bpj, p_d, Variant::StationarityDerived);
    let off = stat.n.abs_diff(sel.n_antennas) as f64;
    add("closed_form_antennas_offset", off, 1.0, off <= 1.0);

    // Joint solver against a 2-D grid.
    let joint = joint_optimize(&problem, SOLVER_TOL, DINKELBACH_MAX_ITER)?;
    let ns: Vec<usize> = (problem.min_antennas..=problem.max_antennas).collect();
    let p_hi = problem.power_budget_w * users as f64 / 3.0;
    let grid = grid_search_oracle(&problem, &ns, &log_grid(1e-3, p_hi, 400))?;
    let excess = (grid.ee_bpj - joint.point.ee_bpj) / joint.point.ee_bpj;
    add(
        "grid_oracle_excess_over_solver",
        excess,
        1e-6,
        excess <= 1e-6,
    );
    let shortfall = (grid.ee_bpj - joint.point.ee_bpj).abs() / grid.ee_bpj;
    add("solver_vs_grid_rel_gap", shortfall, 0.01, shortfall <= 0.01);
    add(
        "returned_point_feasible",
        if joint.point.feasible { 0.0 } else { 1.0 },
        0.0,
        joint.point.feasible
            && problem.is_feasible(joint.point.n_antennas, joint.point.transmit_power_w),
    );
    let negative = joint
        .trace
        .iter()
        .filter(|r| r.q1 < 0.0 || r.q2 < 0.0)
        .count();
    add(
        "negative_multipliers_in_trace",
        negative as f64,
        0.0,
        negative == 0,
    );
    let recomputed = problem.point(joint.point.n_antennas, joint.point.transmit_power_w);
    let drift = (recomputed.ee_bpj / joint.point.ee_bpj - 1.0).abs();
    add("returned_point_recomputes", drift, 1e-12, drift <= 1e-12);

    // Quasi-concavity in transmit power and monotonicity in circuit power.
    let grid_p = log_grid(1e-3, 1e4, 1000);
    let curve: Vec<f64> = grid_p
        .iter()
        .map(|&p| problem.ee(joint.point.n_antennas, p))
        .collect();
    let peaks = count_local_maxima(&curve);
    add("ee_vs_power_local_maxima", peaks as f64, 1.0, peaks == 1);
    let mut worse = problem.clone();
    worse.circuit_per_antenna_w *= 1.01;
    let dec = worse.ee(n, p_d) < problem.ee(n, p_d);
    add(
        "ee_decreasing_in_circuit_power",
        if dec { 0.0 } else { 1.0 },
        0.0,
        dec,
    );

    Ok(ValidationReport { checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePeak {
    pub pilot_length: usize,
    pub x: f64,
    pub ee_bpj: f64,
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiguresSummary {
    pub fig1_csv: PathBuf,
    pub fig2_csv: PathBuf,
    pub summary_txt: PathBuf,
    pub antenna_peaks: Vec<CurvePeak>,
    pub power_peaks: Vec<CurvePeak>,
    /// Antenna count used for the power sweep.
    pub power_sweep_antennas: usize,
}

pub const FIGURE_PILOT_LENGTHS: [usize; 2] = [8, 16];
pub const FIGURE_POWER_DB: f64 = 10.0;

fn peak_of(pilot_length: usize, xs: &[f64], ee: &[f64]) -> CurvePeak {
    let mut best = 0;
    for i in 1..ee.len() {
        if ee[i] > ee[best] {
            best = i;
        }
    }
    CurvePeak {
        pilot_length,
        x: xs[best],
        ee_bpj: ee[best],
        interior: best > 0 && best + 1 < ee.len(),
    }
}

/// Curves of EE against `N` and against transmit power for
/// both pilot lengths on the bundled default scenario.
pub fn reproduce_figures(out_dir: &Path) -> Result<FiguresSummary> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let base = default_scenario();
    let p_d = db_to_watts(FIGURE_POWER_DB, base.config.noise_power_w);
    let header = "pilot_length,x,rate_bps,power_w,ee_bpj\n";

    let mut fig1 = String::from(header);
    let mut antenna_peaks = Vec::new();
    let mut problems = Vec::new();
    for tau in FIGURE_PILOT_LENGTHS {
        let s = base.with_pilot_length(tau)?;
        let p = EeProblem::from_scenario(&s);
        let ns: Vec<usize> = (p.min_antennas..=p.max_antennas).collect();
        let pts: Vec<EeOperatingPoint> = ns.iter().map(|&n| p.point(n, p_d)).collect();
        for pt in &pts {
            let _ = writeln!(
                fig1,
                "{tau},{},{},{},{}",
                pt.n_antennas, pt.rate_bps, pt.total_power_w, pt.ee_bpj
            );
        }
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let ee: Vec<f64> = pts.iter().map(|p| p.ee_bpj).collect();
        antenna_peaks.push(peak_of(tau, &xs, &ee));
        problems.push((tau, p));
    }

    let n_fig2 = antenna_peaks
        .iter()
        .find(|c| c.pilot_length == 16)
        .map(|c| c.x as usize)
        .unwrap_or(base.config.users_per_cell);
    let dbs: Vec<f64> = (0..=100).map(|i| -10.0 + 0.5 * i as f64).collect();
    let mut fig2 = String::from(header);
    let mut power_peaks = Vec::new();
    for (tau, p) in &problems {
        let pts: Vec<EeOperatingPoint> = dbs
            .iter()
            .map(|&db| p.point(n_fig2, db_to_watts(db, p.noise_power_w)))
            .collect();
        for (db, pt) in dbs.iter().zip(&pts) {
            let _ = writeln!(
                fig2,
                "{tau},{db},{},{},{}",
                pt.rate_bps, pt.total_power_w, pt.ee_bpj
            );
        }
        let ee: Vec<f64> = pts.iter().map(|p| p.ee_bpj).collect();
        power_peaks.push(peak_of(*tau, &dbs, &ee));
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "Reconstructed default scenario: L = {}, K = {}, M = {}, b = {} Hz.",
        base.config.num_cells,
        base.config.users_per_cell,
        base.config.max_antennas,
        base.config.bandwidth_hz
    );
    let _ = writeln!(
        summary,
        "Parameters are a calibration; powers are in noise units."
    );
    let _ = writeln!(
        summary,
        "fig1: EE vs antennas at P_d = {FIGURE_POWER_DB} dB"
    );
    for c in &antenna_peaks {
        let _ = writeln!(
            summary,
            "  pilot_length {:>2}: peak {:.3} Mb/J at N = {}{}",
            c.pilot_length,
            c.ee_bpj / 1e6,
            c.x,
            if c.interior {
                " (interior)"
            } else {
                " (at range boundary)"
            }
        );
    }
    let _ = writeln!(summary, "fig2: EE vs transmit power at N = {n_fig2}");
    for c in &power_peaks {
        let _ = writeln!(
            summary,
            "  pilot_length {:>2}: peak {:.3} Mb/J at P_d = {} dB{}",
            c.pilot_length,
            c.ee_bpj / 1e6,
            c.x,
            if c.interior {
                " (interior)"
            } else {
                " (at range boundary)"
            }
        );
    }
    let (a8, a16) = (&antenna_peaks[0], &antenna_peaks[1]);
    let _ = writeln!(
        summary,
        "pilot_length 16 peak {} pilot_length 8 peak ({:.3} vs {:.3} Mb/J)",
        if a16.ee_bpj > a8.ee_bpj {
            "exceeds"
        } else {
            "does not exceed"
        },
        a16.ee_bpj / 1e6,
        a8.ee_bpj / 1e6
    );

    let fig1_csv = out_dir.join("fig1_ee_vs_antennas.csv");
    let fig2_csv = out_dir.join("fig2_ee_vs_power.csv");
    let summary_txt = out_dir.join("summary.txt");
    write_file(&fig1_csv, &fig1)?;
    write_file(&fig2_csv, &fig2)?;
    write_file(&summary_txt, &summary)?;
    Ok(FiguresSummary {
        fig1_csv,
        fig2_csv,
        summary_txt,
        antenna_peaks,
        power_peaks,
        power_sweep_antennas: n_fig2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, _) in BUNDLED_SCENARIOS {
            bundled_scenario(name).unwrap();
        }
        assert!(bundled_scenario("nope").is_err());
    }

    #[test]
    fn range_parsing_and_values() {
        let r = SweepRange::parse("8:128:8").unwrap();
        assert_eq!(r.values().len(), 16);
        assert_eq!(
            SweepRange::parse("0:1:0.25").unwrap().values(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(SweepRange::parse("1:0:1").is_err());
        assert!(SweepRange::parse("1:2:0").is_err());
        assert!(SweepRange::parse("1:2").is_err());
    }

    #[test]
    fn local_maxima_counting() {
        assert_eq!(count_local_maxima(&[1.0, 2.0, 3.0, 2.0, 1.0]), 1);
        assert_eq!(count_local_maxima(&[1.0, 2.0, 1.0, 2.0, 1.0]), 2);
        assert_eq!(count_local_maxima(&[1.0, 2.0, 2.0, 1.0]), 1);
        assert_eq!(count_local_maxima(&[3.0, 2.0, 1.0]), 1);
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_watts(10.0, 1.0) - 10.0).abs() < 1e-12);
        assert!((db_to_watts(0.0, 2e-13) - 2e-13).abs() < 1e-25);
    }

    #[test]
    fn low_trial_count_is_rejected() {
        let err = run_validation(&default_scenario(), 10, 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
