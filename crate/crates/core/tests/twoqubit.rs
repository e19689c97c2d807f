use geogate::engine::bessel_j_unchecked;
use geogate::gates::GateTarget;
use geogate::linalg::{phase_invariant_distance, unitarity_defect, CMatrix, C64};
use geogate::twoqubit::*;
use geogate::units::mhz;
use geogate::Error;
use proptest::prelude::*;

fn params() -> TwoQubitParams {
    TwoQubitParams::default()
}

fn schedule(p: &TwoQubitParams) -> ModulationSchedule {
    let omega = 2.0 * bessel_j_unchecked(1, p.beta) * p.g12;
    build_iswap_schedule(p, &IswapDesign::default(), omega).unwrap()
}

fn iswap() -> CMatrix {
    GateTarget::iswap().matrix
}

fn embedded(u4: &CMatrix) -> SimulationResult {
    let mut u = CMatrix::identity(DIM, DIM);
    u.view_mut((0, 0), (4, 4)).copy_from(u4);
    // the channel acts on each symmetric input |i><j| + |j><i| by conjugation
    let images = SimulationResult::identity().images.iter().map(|m| &u * m * u.adjoint()).collect();
    SimulationResult { unitary: Some(u), images, ..SimulationResult::identity() }
}

fn closed_run(p: &TwoQubitParams, coupling: Coupling) -> SimulationResult {
    let opts = SimOptions { coupling, ..SimOptions::default() };
    full_simulation_with(&schedule(p), p, &opts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian_and_spares_the_ground_state(t in 0.0..0.2f64, beta in 0.0..BETA_MAX, varphi in -3.0..3.0f64) {
        let p = TwoQubitParams { beta, varphi, ..params() };
        let h = modulated_hamiltonian(t, &p).unwrap();
        prop_assert!((&h - h.adjoint()).iter().all(|z| z.norm() < 1e-12));
        prop_assert!(h.row(0).iter().chain(h.column(0).iter()).all(|z| *z == C64::from(0.0)));
    }

    #[test]
    fn depth_inversion_round_trips(frac in 0.0..1.0f64, g in 1.0..100.0f64) {
        let omega = frac * max_effective_coupling(g);
        let beta = beta_for_coupling(omega, g).unwrap();
        prop_assert!((0.0..=BETA_MAX).contains(&beta));
        prop_assert!((2.0 * bessel_j_unchecked(1, beta) * g - omega).abs() < 1e-10);
    }
}

#[test]
fn effective_pulse_realises_iswap() {
    for beta in [0.93, 1.29, 1.7] {
        let p = TwoQubitParams { beta, ..params() };
        let fit = embedded(&schedule(&p).effective_unitary()).trace_fidelity(&iswap()).unwrap();
        assert!(1.0 - fit.fidelity < 1e-6, "beta {beta}: {}", fit.fidelity);
    }
}

#[test]
fn resonant_sideband_reproduces_the_effective_pulse() {
    let p = params().closed();
    let s = schedule(&p);
    let run = full_simulation_with(&s, &p, &SimOptions { coupling: Coupling::Resonant, ..SimOptions::default() }).unwrap();
    let oracle = embedded(&s.effective_unitary());
    let d = phase_invariant_distance(&run.computational().unwrap(), &oracle.computational().unwrap());
    assert!(d < 1e-6, "{d:.3e}");
}

#[test]
fn counter_rotating_sidebands_stay_within_the_rwa_bound() {
    let p = params().closed();
    let run = closed_run(&p, Coupling::NoLeakage);
    let fit = run.trace_fidelity(&iswap()).unwrap();
    let bound = rwa_error_bound(&p, p.beta, Coupling::NoLeakage);
    assert!(1.0 - fit.fidelity <= bound * bound, "{} > {}", 1.0 - fit.fidelity, bound * bound);
}

#[test]
fn vanishing_coupling_leaves_the_qubits_alone() {
    let p = params().closed();
    let s = schedule(&p);
    let weak = TwoQubitParams { g12: 1e-9, ..p };
    let run = full_simulation(&s, &weak, false).unwrap();
    let fit = run.trace_fidelity(&CMatrix::identity(4, 4)).unwrap();
    assert!(1.0 - fit.fidelity < 1e-12, "{}", fit.fidelity);
}

#[test]
fn sideband_truncation_has_converged() {
    for beta in [1.29, 1.8] {
        let p = TwoQubitParams { beta, ..params().closed() };
        let f = |kmax| closed_run(&TwoQubitParams { kmax, ..p }, Coupling::Full).trace_fidelity(&iswap()).unwrap().fidelity;
        let (a, b) = (f(7), f(14));
        assert!((a - b).abs() < 1e-6, "beta {beta}: {a} vs {b}");
    }
}

#[test]
fn closed_runs_are_unitary_and_open_runs_keep_trace() {
    let p = params();
    let closed = closed_run(&p.closed(), Coupling::Full);
    assert!(unitarity_defect(closed.unitary.as_ref().unwrap()) < 1e-9);
    let open = full_simulation(&schedule(&p), &p, true).unwrap();
    assert!(open.unitary.is_none());
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
    for (img, (i, j)) in open.images.iter().zip(pairs) {
        let expected = if i == j { 1.0 } else { 0.0 };
        assert!((img.trace() - C64::from(expected)).norm() < 1e-8, "image ({i},{j})");
        assert!((img - img.adjoint()).iter().all(|z| z.norm() < 1e-10));
    }
    assert!(open.leakage > 0.0 && open.leakage < 0.01);
}

#[test]
fn zero_depth_column_holds_the_identity() {
    let p = params();
    let d1 = [mhz(520.0), mhz(600.0)];
    let grid = scan_delta_beta(&d1, &[0.0, 1.29], &p.closed(), &IswapDesign::default(), false).unwrap();
    for row in &grid.fidelity {
        assert!((row[0] - 0.5).abs() < 1e-12);
        assert!(row[1] > 0.99);
    }
    let again = scan_delta_beta(&d1, &[0.0, 1.29], &p.closed(), &IswapDesign::default(), false).unwrap();
    assert_eq!(grid.fidelity, again.fidelity);
    assert_eq!(grid.manifest.extra["metric"], serde_json::json!("trace"));
}

#[test]
fn fitted_local_phases_undo_local_z() {
    let z = |a: f64, b: f64| {
        let d = [0.0, b, a, a + b];
        CMatrix::from_fn(4, 4, |i, j| if i == j { C64::from_polar(1.0, d[i]) } else { C64::from(0.0) })
    };
    let u = z(0.7, -1.1) * iswap();
    let res = embedded(&u);
    assert!(1.0 - res.trace_fidelity(&iswap()).unwrap().fidelity < 1e-10);
    assert!(1.0 - res.product_state_fidelity(&iswap(), PRODUCT_GRID).unwrap().fidelity < 1e-10);
}

#[test]
fn schedules_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let s = schedule(&params());
    s.write_json(&path).unwrap();
    assert_eq!(ModulationSchedule::read_json(&path).unwrap(), s);
}

#[test]
fn unreachable_settings_are_errors() {
    let p = params();
    let design = IswapDesign::default();
    let too_fast = max_effective_coupling(p.g12) * 1.01;
    assert!(matches!(build_iswap_schedule(&p, &design, too_fast), Err(Error::Unreachable { .. })));
    let deep = TwoQubitParams { beta: 2.5, ..p };
    assert!(matches!(iswap_fidelity(&deep, &design, &SimOptions::default(), TwoQubitMetric::Trace), Err(Error::OutOfRange(_))));
    assert!(scan_delta_beta(&[], &[1.0], &p, &design, false).is_err());
    assert!(TwoQubitParams { g12: 0.0, ..p }.validate().is_err());
    let shallow = TwoQubitParams { kmax: 1, ..p };
    assert!(matches!(modulated_hamiltonian(0.0, &shallow), Err(Error::Truncation { .. })));
}
