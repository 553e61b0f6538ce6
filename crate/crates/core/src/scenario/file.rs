//! Flat `key = value` scenario files with an optional fading CSV.
//!
//! ```text
//! # two-cell test scenario
//! cells = 2
//! users = 4
//! max_antennas = 128
//! noise_figure_db = 9
//! fading_file = two_cell.fading.csv   # rows: l,j,k,gain
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    generate_fading, thermal_noise_w, LargeScaleFading, Layout, PilotConfig, PowerParams, Scenario,
    SystemConfig,
};
use crate::error::{Error, Result};

const KEYS: &[&str] = &[
    "cells",
    "users",
    "max_antennas",
    "bandwidth_hz",
    "noise_power_w",
    "noise_figure_db",
    "pilot_power_w",
    "pilot_length",
    "p_bb_w",
    "p_rf_w",
    "p_max_w",
    "r_min_bps",
    "training_snr",
    "fading_file",
    "layout_spacing_m",
    "pathloss_exponent",
    "reference_gain_db",
    "fading_seed",
];

const DEFAULT_BANDWIDTH_HZ: f64 = 20e6;
const DEFAULT_NOISE_FIGURE_DB: f64 = 9.0;
const DEFAULT_PILOT_POWER_W: f64 = 0.1;
const DEFAULT_P_BB_W: f64 = 0.1;
const DEFAULT_P_RF_W: f64 = 0.2;
const DEFAULT_P_MAX_W: f64 = 100.0;

struct Entries<'a> {
    path: &'a Path,
    values: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Entries<'a> {
    fn parse(text: &'a str, path: &'a Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(parse_err(path, line_no, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("missing value for `{key}`"),
                ));
            }
            if let Some((first, _)) = values.insert(key, (line_no, value)) {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }
        }
        Ok(Entries { path, values })
    }

    fn raw(&self, key: &str) -> Option<(usize, &'a str)> {
        self.values.get(key).copied()
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| parse_err(self.path, line, format!("cannot parse `{v}` for `{key}`"))),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| parse_err(self.path, 0, format!("missing required key `{key}`")))
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses scenario text. `fading_file` entries are resolved against `base_dir`.
pub fn parse_scenario(text: &str, path: &Path, base_dir: &Path) -> Result<Scenario> {
    let e = Entries::parse(text, path)?;
    let num_cells: usize = e.require("cells")?;
    let users_per_cell: usize = e.require("users")?;
    let max_antennas: usize = e.require("max_antennas")?;
    let bandwidth_hz = e.get("bandwidth_hz")?.unwrap_or(DEFAULT_BANDWIDTH_HZ);
    let noise_power_w = match e.get::<f64>("noise_power_w")? {
        Some(w) => w,
        None => thermal_noise_w(
            bandwidth_hz,
            e.get("noise_figure_db")?.unwrap_or(DEFAULT_NOISE_FIGURE_DB),
        ),
    };

    let config = SystemConfig {
        num_cells,
        users_per_cell,
        max_antennas,
        bandwidth_hz,
        noise_power_w,
        rate_floor_bps: e.get("r_min_bps")?.unwrap_or(0.0),
        training_snr: e.get("training_snr")?,
    };
    config.validate()?;

    let pilots = PilotConfig {
        pilot_power_w: e.get("pilot_power_w")?.unwrap_or(DEFAULT_PILOT_POWER_W),
        pilot_length: e.get("pilot_length")?.unwrap_or(users_per_cell),
    };
    let power = PowerParams::new(
        e.get("p_bb_w")?.unwrap_or(DEFAULT_P_BB_W),
        e.get("p_rf_w")?.unwrap_or(DEFAULT_P_RF_W),
        e.get("p_max_w")?.unwrap_or(DEFAULT_P_MAX_W),
    )?;

    let fading = match e.raw("fading_file") {
        Some((_, file)) => {
            let csv_path = base_dir.join(file);
            let text = fs::read_to_string(&csv_path)
                .map_err(|err| Error::io(format!("reading {}", csv_path.display()), err))?;
            parse_fading_csv(&text, &csv_path, num_cells, users_per_cell)?
        }
        None => {
            let layout = Layout {
                spacing_m: e
                    .get("layout_spacing_m")?
                    .unwrap_or(Layout::default().spacing_m),
                pathloss_exponent: e
                    .get("pathloss_exponent")?
                    .unwrap_or(Layout::default().pathloss_exponent),
                reference_gain_db: e.get("reference_gain_db")?.unwrap_or(0.0),
            };
            generate_fading(&config, &layout, e.get("fading_seed")?.unwrap_or(0))?
        }
    };

    Scenario::new(config, pilots, power, fading)
}

fn parse_fading_csv(
    text: &str,
    path: &Path,
    cells: usize,
    users: usize,
) -> Result<LargeScaleFading> {
    let total = cells * cells * users;
    let mut gains: Vec<Option<f64>> = vec![None; total];
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (idx == 0 && line.starts_with('l')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected `l,j,k,gain`, got `{line}`"),
            ));
        }
        let index = |s: &str, bound: usize, name: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad {name} index `{s}`")))?;
            if v >= bound {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("{name} index {v} out of range"),
                ));
            }
            Ok(v)
        };
        let l = index(fields[0], cells, "l")?;
        let j = index(fields[1], cells, "j")?;
        let k = index(fields[2], users, "k")?;
        let gain: f64 = fields[3]
            .parse()
            .map_err(|_| parse_err(path, line_no, format!("bad gain `{}`", fields[3])))?;
        let slot = &mut gains[(l * cells + j) * users + k];
        if slot.is_some() {
            return Err(parse_err(
                path,
                line_no,
                format!("duplicate entry for ({l},{j},{k})"),
            ));
        }
        *slot = Some(gain);
        rows += 1;
    }
    if rows != total {
        return Err(parse_err(
            path,
            0,
            format!("expected {total} gain rows for L = {cells}, K = {users}, found {rows}"),
        ));
    }
    LargeScaleFading::from_flat(cells, users, gains.into_iter().flatten().collect())
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|err| Error::io(format!("reading {}", path.display()), err))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, path, base)
}

fn fading_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    path.with_file_name(format!("{stem}.fading.csv"))
}

/// Writes the scenario and its fading tensor (as `<stem>.fading.csv` next to
/// it). Floats are written in shortest round-trip form, so loading the result
/// reproduces every value exactly.
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_path = fading_path(path);
    let c = &scenario.config;
    let mut out = String::new();
    let _ = writeln!(out, "cells = {}", c.num_cells);
    let _ = writeln!(out, "users = {}", c.users_per_cell);
    let _ = writeln!(out, "max_antennas = {}", c.max_antennas);
    let _ = writeln!(out, "bandwidth_hz = {:?}", c.bandwidth_hz);
    let _ = writeln!(out, "noise_power_w = {:?}", c.noise_power_w);
    let _ = writeln!(out, "pilot_power_w = {:?}", scenario.pilots.pilot_power_w);
    let _ = writeln!(out, "pilot_length = {}", scenario.pilots.pilot_length);
    let _ = writeln!(out, "p_bb_w = {:?}", scenario.power.baseband_w());
    let _ = writeln!(out, "p_rf_w = {:?}", scenario.power.rf_chain_w());
    let _ = writeln!(out, "p_max_w = {:?}", scenario.power.power_budget_w());
    let _ = writeln!(out, "r_min_bps = {:?}", c.rate_floor_bps);
    if let Some(snr) = c.training_snr {
        let _ = writeln!(out, "training_snr = {snr:?}");
    }
    let file_name = csv_path.file_name().unwrap_or_default().to_string_lossy();
    let _ = writeln!(out, "fading_file = {file_name}");

    let f = &scenario.fading;
    let mut csv = String::from("l,j,k,gain\n");
    for l in 0..f.cells() {
        for j in 0..f.cells() {
            for k in 0..f.users() {
                let _ = writeln!(csv, "{l},{j},{k},{:?}", f.gain(l, j, k));
            }
        }
    }
    fs::write(&csv_path, csv)
        .map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))?;
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("test.scn"), Path::new("."))
    }

    #[test]
    fn minimal_file_is_valid() {
        let s = parse("cells = 1\nusers = 1\nmax_antennas = 8\n").unwrap();
        assert_eq!(s.config.num_cells, 1);
        assert_eq!(s.pilots.pilot_length, 1);
        assert!(s.config.noise_power_w > 0.0);
        assert_eq!(
            s.power.circuit_per_antenna_w(),
            s.power.baseband_w() + s.power.rf_chain_w()
        );
    }

    #[test]
    fn fewer_antennas_than_users_is_rejected() {
        let err = parse("cells = 1\nusers = 8\nmax_antennas = 4\n").unwrap_err();
        assert!(
            matches!(
                err,
                Error::Invalid {
                    field: "max_antennas",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("cells = 1\n# fine\nusers = x\nmax_antennas = 4\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("users"));
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse("cells = 1\ncolour = red\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse("cells = 1\ncells = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn noise_power_overrides_noise_figure() {
        let s = parse("cells=1\nusers=1\nmax_antennas=2\nnoise_figure_db=5\nnoise_power_w=2.5\n")
            .unwrap();
        assert_eq!(s.config.noise_power_w, 2.5);
    }

    #[test]
    fn fading_csv_with_wrong_cardinality() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("f.csv"),
            "l,j,k,gain\n0,0,0,1.0\n0,0,1,0.5\n",
        )
        .unwrap();
        let scn = dir.path().join("s.scn");
        fs::write(
            &scn,
            "cells = 2\nusers = 2\nmax_antennas = 4\nfading_file = f.csv\n",
        )
        .unwrap();
        let err = load_scenario(&scn).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn negative_gain_in_csv_is_invariant_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("f.csv"), "0,0,0,-1.0\n").unwrap();
        let scn = dir.path().join("s.scn");
        fs::write(
            &scn,
            "cells = 1\nusers = 1\nmax_antennas = 4\nfading_file = f.csv\n",
        )
        .unwrap();
        let err = load_scenario(&scn).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Invalid {
                    field: "fading",
                    ..
                }
            ),
            "{err}"
        );
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn zero_pilot_power_needs_explicit_training_snr() {
        let text = "cells=1\nusers=1\nmax_antennas=2\npilot_power_w=0\n";
        assert!(parse(text).is_err());
        let s = parse(&format!("{text}training_snr=10\n")).unwrap();
        assert_eq!(s.training_snr(), 10.0);
    }
}
