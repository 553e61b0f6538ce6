//! One pass/fail line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mimo_ee::bench::{
    bundled_scenario, db_to_watts, log_grid, reproduce_figures, BUNDLED_SCENARIOS,
};
use mimo_ee::channel_mc::{empirical_sinr, empirical_sinr_with, MrtNormalization};
use mimo_ee::closed_form::{closed_form_rate, rate_terms, total_power};
use mimo_ee::optimizer::{
    closed_form_antenna, dinkelbach, dual_power_allocation, fractional_residual, joint_optimize,
    optimal_power, select_antennas, EeOperatingPoint, EeProblem, FnProgram, Multipliers, Variant,
};
use mimo_ee::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{local_maxima, random_scenario};

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            out.passed = false;
            out.detail
                .push_str(&format!("; over the {:.0} s budget", b.as_secs_f64()));
        }
    }
    println!(
        "criterion {id}: {} {title} [{}] ({:.2} s)",
        if out.passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    out.passed
}

/// Mean over users of the per-user closed-form rate, recomputed from the
/// scenario without going through `EeProblem`.
fn network_rate(s: &Scenario, n: usize, p_d: f64) -> f64 {
    let (cells, users) = (s.config.num_cells, s.config.users_per_cell);
    let mut sum = 0.0;
    for j in 0..cells {
        for k in 0..users {
            sum += closed_form_rate(&rate_terms(s, p_d, n, j, k), &s.config, &s.pilots, n);
        }
    }
    sum / (cells * users) as f64
}

fn consumption(s: &Scenario, n: usize, p_d: f64) -> f64 {
    total_power(
        p_d,
        s.pilots.pilot_power_w,
        n,
        s.config.users_per_cell,
        s.power.circuit_per_antenna_w(),
    )
    .total
}

fn closed_form_vs_monte_carlo() -> Outcome {
    let s = bundled_scenario("two_cell").unwrap();
    assert_eq!((s.config.num_cells, s.config.users_per_cell), (2, 4));
    let p_d = db_to_watts(10.0, s.config.noise_power_w);
    let users = s.config.users_per_cell;
    let gap = |n: usize, mc: &[mimo_ee::channel_mc::EmpiricalSinr]| {
        let mut worst: f64 = 0.0;
        for j in 0..s.config.num_cells {
            for k in 0..users {
                let cf = closed_form_rate(&rate_terms(&s, p_d, n, j, k), &s.config, &s.pilots, n);
                let emp = users as f64 * s.config.bandwidth_hz * mc[j * users + k].sinr.ln_1p()
                    / std::f64::consts::LN_2;
                worst = worst.max((cf / emp - 1.0).abs());
            }
        }
        worst
    };
    let mut passed = true;
    let mut detail = Vec::new();
    for n in [64, 128] {
        let mc = empirical_sinr(&s, p_d, n, 10_000, 1).unwrap();
        let g = gap(n, &mc);
        passed &= g <= 0.05;
        detail.push(format!("N={n} worst gap {:.2}%", 100.0 * g));
    }
    // Reported only: the per-realization unit-norm precoder that the closed
    // form does not describe.
    let mc = empirical_sinr_with(&s, p_d, 64, 10_000, 1, MrtNormalization::Instantaneous).unwrap();
    detail.push(format!(
        "unit-norm MRT at N=64 {:.2}%",
        100.0 * gap(64, &mc)
    ));
    Outcome {
        passed,
        detail: detail.join(", "),
    }
}

fn dinkelbach_toy() -> Outcome {
    let program = FnProgram {
        candidates: (1..=10).collect(),
        f1: |n: usize| (1.0 + n as f64).log2(),
        f2: |n: usize| 1.0 + n as f64,
    };
    let oracle = (1..=10usize)
        .max_by(|&a, &b| {
            let r = |n: usize| (1.0 + n as f64).log2() / (1.0 + n as f64);
            r(a).total_cmp(&r(b)).then(b.cmp(&a))
        })
        .unwrap();
    let r = dinkelbach(&program, 1e-12, 50).unwrap();
    let (j, _) = fractional_residual(&program, r.epsilon).unwrap();
    let passed = r.n == 2
        && r.n == oracle
        && (r.epsilon - 0.5283).abs() < 5e-5
        && j.abs() < 1e-9
        && r.trace.len() <= 6;
    Outcome {
        passed,
        detail: format!(
            "N*={} eps*={:.6} |J|={:.1e} iterations={}",
            r.n,
            r.epsilon,
            j.abs(),
            r.trace.len()
        ),
    }
}

/// Constrained integer argmax at fixed power, ties to the smaller count.
fn brute_force_antennas(s: &Scenario, p: &EeProblem, p_d: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for n in s.config.users_per_cell..=s.config.max_antennas {
        let rate = network_rate(s, n, p_d);
        let total = consumption(s, n, p_d);
        if total > s.power.power_budget_w()
            || rate < s.config.rate_floor_bps
            || !p.is_feasible(n, p_d)
        {
            continue;
        }
        let ee = rate / total;
        if best.is_none_or(|(b, _)| ee > b) {
            best = Some((ee, n));
        }
    }
    best.map(|b| b.1)
}

fn antenna_closed_form() -> Outcome {
    let mut failures = Vec::new();
    let (mut unclamped, mut clamped) = (0, 0);
    let mut literal_hits = 0;
    let mut skipped = 0;
    for seed in 0.. {
        if unclamped + clamped == 50 {
            break;
        }
        let s = random_scenario(1000 + seed, seed % 2 == 1);
        let p = EeProblem::from_scenario(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p_d = 10f64.powf(rng.random_range(-0.5..2.0));
        // A constrained draw may admit no antenna count at this power.
        let Some(best) = brute_force_antennas(&s, &p, p_d) else {
            skipped += 1;
            continue;
        };
        let eps = select_antennas(&p, p_d, 1e-9, 50).unwrap().0.ee_bpj;
        let c = closed_form_antenna(&p, eps, p_d, Variant::StationarityDerived);
        let ok = if c.clamped {
            clamped += 1;
            c.n == best
        } else {
            unclamped += 1;
            c.n.abs_diff(best) <= 1
        };
        if !ok {
            failures.push(format!("seed {seed}: {} vs {best}", c.n));
        }
        let literal = closed_form_antenna(&p, eps, p_d, Variant::Literal);
        if literal.n.abs_diff(best) <= 1 {
            literal_hits += 1;
        }
    }
    let total = unclamped + clamped;
    Outcome {
        passed: failures.is_empty() && total == 50,
        detail: format!(
            "{total} scenarios ({skipped} infeasible draws skipped), {unclamped} unclamped, {clamped} clamped, {} mismatches{}; literal expression within 1 on {literal_hits}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(" ({})", failures.join("; ")) }
        ),
    }
}

fn power_stationarity() -> Outcome {
    let mut failures = Vec::new();
    let mut interior = 0;
    let mut literal_hits = 0;
    for seed in 0..20u64 {
        let s = random_scenario(2000 + seed, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(s.config.users_per_cell..=s.config.max_antennas);
        let (j, k) = (
            rng.random_range(0..s.config.num_cells),
            rng.random_range(0..s.config.users_per_cell),
        );
        let p_max = s.power.power_budget_w();
        let rate = |p: f64| closed_form_rate(&rate_terms(&s, p, n, j, k), &s.config, &s.pilots, n);
        let probe = p_max * rng.random_range(0.05..0.5);
        let eps = rate(probe) / consumption(&s, n, probe) * rng.random_range(0.5..1.5);
        let m = Multipliers {
            q1: rng.random_range(0.0..1.0),
            q2: eps * rng.random_range(0.0..1.0),
        };
        let lagrangian = |p: f64| {
            let (r, f2) = (rate(p), consumption(&s, n, p));
            r - eps * f2 + m.q1 * (r - s.config.rate_floor_bps) - m.q2 * (f2 - p_max)
        };
        let step = p_max / 1000.0;
        let grid_best = (0..=1000)
            .map(|i| i as f64 * step)
            .max_by(|a, b| lagrangian(*a).total_cmp(&lagrangian(*b)))
            .unwrap();
        let terms = rate_terms(&s, 1.0, n, j, k);
        let solve = |v| optimal_power(m, eps, &terms, &s.config, &s.pilots, n, v).clamp(0.0, p_max);
        let p_star = solve(Variant::StationarityDerived);
        if p_star > 0.0 && p_star < p_max {
            interior += 1;
        }
        if (p_star - grid_best).abs() > step {
            failures.push(format!("seed {seed}: {p_star:.4} vs grid {grid_best:.4}"));
        }
        if (solve(Variant::Literal) - grid_best).abs() <= step {
            literal_hits += 1;
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "20 scenarios, {interior} interior optima, {} mismatches{}; literal expression within one step on {literal_hits}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(" ({})", failures.join("; ")) }
        ),
    }
}

fn quasi_concavity() -> Outcome {
    let mut bad = Vec::new();
    let mut curves = 0;
    let grid = log_grid(1e-3, 1e4, 1000);
    for (name, _) in BUNDLED_SCENARIOS {
        let s = bundled_scenario(name).unwrap();
        let p = EeProblem::from_scenario(&s);
        let (lo, hi) = (p.min_antennas, p.max_antennas);
        for n in [lo, (lo + hi) / 2, hi, 64.clamp(lo, hi)] {
            let ee: Vec<f64> = grid.iter().map(|&x| p.ee(n, x)).collect();
            curves += 1;
            if local_maxima(&ee) != 1 {
                bad.push(format!("{name} N={n}: {} maxima", local_maxima(&ee)));
            }
            for &pd in &[0.1, 1.0, 10.0, 100.0] {
                let mut prev = f64::INFINITY;
                for scale in [0.5, 1.0, 1.01, 2.0, 10.0] {
                    let mut q = p.clone();
                    q.circuit_per_antenna_w *= scale;
                    let v = q.ee(n, pd);
                    if !(v < prev) {
                        bad.push(format!("{name} N={n} P={pd}: EE not decreasing in p_c"));
                    }
                    prev = v;
                }
            }
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: format!(
            "{curves} power curves on {} scenarios, {} violations {}",
            BUNDLED_SCENARIOS.len(),
            bad.len(),
            bad.join("; ")
        ),
    }
}

fn check_point(s: &Scenario, pt: &EeOperatingPoint) -> bool {
    let (n, p) = (pt.n_antennas, pt.transmit_power_w);
    let rate = network_rate(s, n, p);
    let total = consumption(s, n, p);
    n >= s.config.users_per_cell
        && n <= s.config.max_antennas
        && p >= 0.0
        && s.pilots.pilot_power_w >= 0.0
        && total <= s.power.power_budget_w()
        && rate >= s.config.rate_floor_bps * (1.0 - 1e-12)
}

fn constraint_compliance() -> Outcome {
    let mut scenarios: Vec<Scenario> = BUNDLED_SCENARIOS
        .iter()
        .map(|(n, _)| bundled_scenario(n).unwrap())
        .collect();
    scenarios.extend((0..40).map(|seed| random_scenario(3000 + seed, true)));
    let (mut points, mut violations, mut negative, mut infeasible) = (0, 0, 0, 0);
    for (i, s) in scenarios.iter().enumerate() {
        let p = EeProblem::from_scenario(s);
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let mut returned = Vec::new();
        match joint_optimize(&p, 1e-9, 50) {
            Ok(r) => {
                negative += r.trace.iter().filter(|t| t.q1 < 0.0 || t.q2 < 0.0).count();
                returned.push(r.point);
            }
            Err(_) => infeasible += 1,
        }
        for _ in 0..3 {
            let n = rng.random_range(p.min_antennas..=p.max_antennas);
            match dual_power_allocation(&p, n, 1e-9, 10_000) {
                Ok((pt, states)) => {
                    negative += states.iter().filter(|t| t.q1 < 0.0 || t.q2 < 0.0).count();
                    returned.push(pt);
                }
                Err(_) => infeasible += 1,
            }
            let pd = 10f64.powf(rng.random_range(-1.0..2.0));
            match select_antennas(&p, pd, 1e-9, 50) {
                Ok((pt, _)) => returned.push(pt),
                Err(_) => infeasible += 1,
            }
        }
        for pt in returned {
            points += 1;
            if !pt.feasible || !check_point(s, &pt) {
                violations += 1;
            }
        }
    }
    Outcome {
        passed: violations == 0 && negative == 0 && points > 0,
        detail: format!(
            "{points} returned points, {violations} violating, {negative} negative multipliers, {infeasible} solves reported infeasible"
        ),
    }
}

fn read_curves(path: &Path) -> Vec<(usize, Vec<(f64, f64)>)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut out: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let tau: usize = f[0].parse().unwrap();
        let (x, ee): (f64, f64) = (f[1].parse().unwrap(), f[4].parse().unwrap());
        match out.iter_mut().find(|c| c.0 == tau) {
            Some(c) => c.1.push((x, ee)),
            None => out.push((tau, vec![(x, ee)])),
        }
    }
    out
}

fn rises_then_falls(curve: &[(f64, f64)]) -> (bool, f64, f64) {
    let ee: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let i = (0..ee.len())
        .max_by(|&a, &b| ee[a].total_cmp(&ee[b]))
        .unwrap();
    let up = ee[..=i].windows(2).all(|w| w[1] > w[0]);
    let down = ee[i..].windows(2).all(|w| w[1] < w[0]);
    (up && down && i > 0 && i + 1 < ee.len(), curve[i].0, ee[i])
}

fn figure_shapes() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let summary = reproduce_figures(dir.path()).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    let mut peaks = Vec::new();
    for (fig, path) in [("EE(N)", &summary.fig1_csv), ("EE(P_d)", &summary.fig2_csv)] {
        for (tau, curve) in read_curves(path) {
            let (ok, x, ee) = rises_then_falls(&curve);
            passed &= ok;
            detail.push(format!(
                "{fig} tau={tau} peak {:.2} Mb/J at {x}{}",
                ee / 1e6,
                if ok { "" } else { " (bad shape)" }
            ));
            if fig == "EE(N)" {
                peaks.push((tau, ee));
            }
        }
    }
    let get = |t| {
        peaks
            .iter()
            .find(|p| p.0 == t)
            .map(|p| p.1)
            .unwrap_or(f64::NAN)
    };
    let ordered = get(16) > get(8);
    passed &= ordered;
    detail.push(format!("tau 16 above tau 8: {ordered}"));
    let text = std::fs::read_to_string(&summary.summary_txt).unwrap();
    passed &= text.contains("peak");
    Outcome {
        passed,
        detail: detail.join(", "),
    }
}

fn run_ee(args: &[&str], threads: &str) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_ee"))
        .args(args)
        .env("EE_THREADS", threads)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "ee {args:?} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    status.stdout
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scn: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/two_cell.scn");
    let scn = scn.to_str().unwrap();
    let jobs: [(&str, Vec<&str>); 4] = [
        (
            "mc",
            vec![
                "sweep",
                "--scenario",
                scn,
                "--var",
                "antennas",
                "--range",
                "16:128:16",
                "--mode",
                "mc",
                "--trials",
                "500",
                "--seed",
                "9",
            ],
        ),
        (
            "cf",
            vec![
                "sweep",
                "--scenario",
                scn,
                "--var",
                "pdbm",
                "--range",
                "-10:30:2",
                "--mode",
                "cf",
            ],
        ),
        (
            "opt",
            vec![
                "sweep",
                "--scenario",
                scn,
                "--var",
                "pilots",
                "--range",
                "1:4:1",
                "--mode",
                "opt",
            ],
        ),
        ("figures", vec!["figures"]),
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (name, args) in &jobs {
        let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
        for (run, threads) in ["1", "4", "1", "3"].iter().enumerate() {
            let target = dir.path().join(format!("{name}_{run}"));
            let target_s = target.to_str().unwrap().to_string();
            let mut a: Vec<&str> = args.clone();
            a.extend(["--out", &target_s]);
            run_ee(&a, threads);
            let mut contents = Vec::new();
            if target.is_dir() {
                let mut entries: Vec<PathBuf> = std::fs::read_dir(&target)
                    .unwrap()
                    .map(|e| e.unwrap().path())
                    .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                    .collect();
                entries.sort();
                for e in entries {
                    contents.push(std::fs::read(e).unwrap());
                }
            } else {
                contents.push(std::fs::read(&target).unwrap());
            }
            outputs.push(contents);
        }
        files += outputs[0].len();
        if outputs.iter().any(|o| o != &outputs[0]) {
            mismatched.push(*name);
        }
    }
    let trace_runs: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .map(|t| {
            let path = dir.path().join(format!("trace_{t}.csv"));
            run_ee(
                &[
                    "optimize",
                    "--scenario",
                    scn,
                    "--trace",
                    path.to_str().unwrap(),
                ],
                t,
            );
            std::fs::read(path).unwrap()
        })
        .collect();
    if trace_runs[0] != trace_runs[1] {
        mismatched.push("trace");
    }
    Outcome {
        passed: mismatched.is_empty(),
        detail: format!(
            "{} CSV outputs compared over 4 runs with 1, 4, 1 and 3 threads; mismatches: {}",
            files + 1,
            if mismatched.is_empty() {
                "none".to_string()
            } else {
                mismatched.join(", ")
            }
        ),
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        report(
            1,
            "closed form vs Monte Carlo, L=2 K=4, N in {64,128}, 1e4 trials, 5%",
            Some(secs(60)),
            closed_form_vs_monte_carlo,
        ),
        report(
            2,
            "Dinkelbach on log2(1+N)/(1+N)",
            Some(secs(1)),
            dinkelbach_toy,
        ),
        report(
            3,
            "closed-form antenna count vs brute force, 50 scenarios",
            Some(secs(10)),
            antenna_closed_form,
        ),
        report(
            4,
            "stationary power vs 1000-point Lagrangian grid, 20 scenarios",
            Some(secs(10)),
            power_stationarity,
        ),
        report(
            5,
            "EE unimodal in P_d and decreasing in p_c",
            Some(secs(10)),
            quasi_concavity,
        ),
        report(
            6,
            "constraint compliance and non-negative multipliers",
            None,
            constraint_compliance,
        ),
        report(
            7,
            "figure shapes and pilot-length ordering",
            Some(secs(120)),
            figure_shapes,
        ),
        report(
            8,
            "byte-identical CSVs across runs and thread counts",
            None,
            determinism,
        ),
    ];
    let failed = results.iter().filter(|r| !**r).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
