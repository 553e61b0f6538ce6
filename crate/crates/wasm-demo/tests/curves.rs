use mimo_ee_wasm_demo::{antenna_curve, joint_point, power_curve, POWER_DB};

#[test]
fn antenna_curve_covers_the_range_and_peaks_inside() {
    let c = antenna_curve(16, 10.0).unwrap();
    assert_eq!(c.len(), 256 - 16 + 1);
    let i = (0..c.len()).max_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
    assert!(i > 0 && i + 1 < c.len());
}

#[test]
fn power_curve_has_one_point_per_half_db() {
    let c = power_curve(8, 40).unwrap();
    let (lo, hi, step) = POWER_DB;
    assert_eq!(c.len(), ((hi - lo) / step) as usize + 1);
    assert!(power_curve(8, 4).is_err());
}

#[test]
fn tighter_budget_never_raises_the_optimum() {
    let loose = joint_point(16, 1000.0, 0.0).unwrap();
    let tight = joint_point(16, 1.2, 0.0).unwrap();
    assert_eq!(loose.len(), 5);
    assert!(tight[2] <= loose[2] + 1e-9);
    assert!(tight[4] <= 1.2);
    assert!(joint_point(16, 1e-3, 0.0).is_err());
    assert!(joint_point(0, 10.0, 0.0).is_err());
}
