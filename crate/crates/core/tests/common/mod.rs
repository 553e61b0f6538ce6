#![allow(dead_code)]

use mimo_ee::optimizer::EeProblem;
use mimo_ee::scenario::{
    generate_fading, Layout, PilotConfig, PowerParams, Scenario, SystemConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random but valid multi-cell scenario. Constraints are loose unless
/// `constrained` is set, in which case the rate floor and the budget are
/// placed near a random operating point so that either may bind.
pub fn random_scenario(seed: u64, constrained: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = rng.random_range(1..=4);
    let users = rng.random_range(2..=8);
    let config = SystemConfig {
        num_cells: cells,
        users_per_cell: users,
        max_antennas: rng.random_range(4 * users..=256),
        bandwidth_hz: 10f64.powf(rng.random_range(5.0..7.5)),
        noise_power_w: 1.0,
        rate_floor_bps: 0.0,
        training_snr: None,
    };
    let layout = Layout {
        spacing_m: rng.random_range(200.0..800.0),
        pathloss_exponent: rng.random_range(3.0..4.0),
        reference_gain_db: rng.random_range(10.0..30.0),
    };
    let fading = generate_fading(&config, &layout, rng.random()).expect("valid layout");
    let pilots = PilotConfig {
        pilot_power_w: 10f64.powf(rng.random_range(-1.5..0.5)),
        pilot_length: rng.random_range(users.div_ceil(2)..=users),
    };
    let power = PowerParams::new(
        rng.random_range(0.01..0.2),
        rng.random_range(0.01..0.2),
        1e6,
    )
    .unwrap();
    let mut s = Scenario::new(config, pilots, power, fading).expect("valid scenario");
    if constrained {
        let p = EeProblem::from_scenario(&s);
        let n = rng.random_range(p.min_antennas..=p.max_antennas);
        let pd = 10f64.powf(rng.random_range(-0.5..2.0));
        let rate = p.rate(n, pd);
        let total = p.power(n, pd).total;
        s.config.rate_floor_bps = rate * rng.random_range(0.3..1.0);
        s.power = PowerParams::new(
            s.power.baseband_w(),
            s.power.rf_chain_w(),
            total * rng.random_range(1.0..3.0),
        )
        .unwrap();
    }
    s
}

/// Number of strict interior local maxima plus a maximum at either end.
pub fn local_maxima(v: &[f64]) -> usize {
    let mut count = 0;
    for i in 0..v.len() {
        let left = i == 0 || v[i] > v[i - 1];
        let right = i + 1 == v.len() || v[i] > v[i + 1];
        if left && right {
            count += 1;
        }
    }
    count
}
