use geogate::engine::DeviceParams;
use geogate::gates::{build_condition_i, GateTarget};
use geogate::linalg::{norm, C64};
use geogate::robustness::*;
use geogate::synthesis::SynthesisConfig;
use geogate::units::mhz;
use proptest::prelude::*;
use std::f64::consts::PI;

fn cfg() -> SynthesisConfig {
    SynthesisConfig::new(1.0).with_samples(128).with_detuning_ratio(10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fidelities_are_bounded(l in 0.0..0.2f64, z in 0.0..0.2f64, seed in 0u64..1000) {
        let gate = GateTarget::h();
        let pulse = build_condition_i(&gate, 0.0, 0.02 * PI, 0.48 * PI).unwrap().pulse(&cfg()).unwrap();
        let f = combined_fidelity(&pulse, &gate, &ErrorModel::new(l, z, seed), 1.0).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn trace_fidelity_ignores_global_phase(a in -PI..PI, theta in -PI..PI) {
        let u = GateTarget::rx(theta).matrix;
        let v = GateTarget::ry(0.3).matrix * C64::from_polar(1.0, a);
        let base = trace_fidelity(&u, &(GateTarget::ry(0.3).matrix)).unwrap();
        prop_assert!((trace_fidelity(&u, &v).unwrap() - base).abs() < 1e-12);
        prop_assert!((trace_fidelity(&u, &(&u * C64::from_polar(1.0, a))).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ensembles_are_unit_and_balanced(k in 16usize..200, seed in 0u64..10_000) {
        let dirs = direction_ensemble(k, seed);
        prop_assert_eq!(dirs.len(), k);
        let mut mean = [0.0; 3];
        for d in &dirs {
            prop_assert!((norm(*d) - 1.0).abs() < 1e-12);
            for i in 0..3 { mean[i] += d[i] / k as f64; }
        }
        // a Fibonacci lattice is balanced to O(1/k)
        prop_assert!(norm(mean) < 2.0 / k as f64);
        prop_assert_eq!(direction_ensemble(k, seed), dirs);
    }

    #[test]
    fn power_laws_have_their_slope(p in 0.5..4.0f64, c in 1e-3..10.0f64) {
        let xs = [0.001, 0.003, 0.01, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
        prop_assert!((loglog_slope(&xs, &ys).unwrap() - p).abs() < 1e-9);
    }
}

#[test]
fn zero_error_is_perfect() {
    for s in [Scheme::NggI, Scheme::Cgg, Scheme::Drg] {
        let gate = GateTarget::rx(PI);
        let pulse = scheme_pulse(s, &gate, &SynthesisConfig::new(1.0), None).unwrap();
        let f = combined_fidelity(&pulse, &gate, &ErrorModel::ideal(), 1.0).unwrap();
        assert!(f > 1.0 - 1e-8, "{s}: {f}");
    }
}

#[test]
fn error_sweeps_are_bitwise_reproducible() {
    let gate = GateTarget::h();
    let run = || sweep_errors(Scheme::NggI, &gate, (0.0, 0.1), (0.0, 0.1), 6, 11, &cfg(), None).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.fidelity, b.fidelity);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(run);
    assert_eq!(a.fidelity, serial.fidelity);
    assert!(a.fidelity[0][0] > 1.0 - 1e-6, "origin cell holds the ideal gate");
}

#[test]
fn grids_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let grid = sweep_errors(Scheme::Cgg, &GateTarget::rx(PI), (0.0, 0.1), (0.0, 0.05), 5, 3, &cfg(), None).unwrap();
    grid.write_csv(&path).unwrap();
    assert!(FidelityGrid::manifest_path(&path).exists());
    let back = FidelityGrid::read_csv(&path).unwrap();
    assert_eq!(back.fidelity, grid.fidelity);
    assert_eq!(back.axis1.values, grid.axis1.values);
    assert_eq!(back.axis2.values, grid.axis2.values);
    assert_eq!(back.argmax(), grid.argmax());
}

#[test]
fn sweep_arguments_are_checked() {
    let g = GateTarget::h();
    assert!(sweep_errors(Scheme::NggI, &g, (0.0, 0.5), (0.0, 0.1), 5, 1, &cfg(), None).is_err());
    assert!(sweep_errors(Scheme::NggI, &g, (0.0, 0.1), (0.0, 0.1), 0, 1, &cfg(), None).is_err());
    assert!(sweep_intermediate(&g, 4, &ErrorModel::new(0.05, 0.05, 1), &cfg()).is_err());
    assert!(ErrorModel::new(-0.1, 0.0, 1).validate().is_err());
    assert!(ErrorModel::new(0.1, 0.0, 1).with_direction([1.0, 1.0, 0.0]).validate().is_err());
}

#[test]
fn intermediate_landscape_has_a_usable_optimum() {
    let em = ErrorModel::new(0.05, 0.05, 7);
    let grid = sweep_intermediate(&GateTarget::h(), 10, &em, &cfg()).unwrap();
    let (i, j, f) = grid.argmax();
    assert!(f > grid.mean());
    let (c1, c2, refined) = optimize_intermediate(&GateTarget::h(), &em, 10, true, &cfg()).unwrap();
    assert!(refined >= f);
    assert!((c1 - grid.axis1.values[i]).abs() <= 0.5 * 0.5 * PI / 10.0 + 1e-12);
    assert!((c2 - grid.axis2.values[j]).abs() <= 0.5 * 0.5 * PI / 10.0 + 1e-12);
}

#[test]
fn closed_state_fidelity_of_the_target_is_one() {
    for gate in [GateTarget::h(), GateTarget::rx(PI), GateTarget::rz(PI / 4.0)] {
        let u = embed_ladder(&gate.matrix, 4);
        assert!((closed_state_fidelity(&u, &gate, 100).unwrap() - 1.0).abs() < 1e-12);
    }
}

fn embed_ladder(u: &geogate::linalg::CMatrix, d: usize) -> geogate::linalg::CMatrix {
    let mut m = geogate::linalg::CMatrix::identity(d, d);
    m.view_mut((0, 0), (2, 2)).copy_from(u);
    m
}

#[test]
fn drag_never_hurts_after_calibration() {
    let dev = DeviceParams::default();
    let run = transmon_gate_run(&GateTarget::rx(PI), mhz(32.0), &dev, (0.34 * PI, 0.66 * PI), 50, 256).unwrap();
    assert!(run.drag_on.fidelity >= run.drag_off.fidelity);
    assert!(run.drag_on.leakage < run.drag_off.leakage);
    assert!((DRAG_LAMBDA_RANGE.0..=DRAG_LAMBDA_RANGE.1).contains(&run.drag_lambda));
}
