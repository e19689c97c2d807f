mod common;

use common::{seeded_specs, spec_strategy};
use geogate::engine::propagate_qubit;
use geogate::gates::boundary_unitary;
use geogate::linalg::{norm, phase_invariant_distance};
use geogate::synthesis::*;
use geogate::trajectory::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn cfg(ratio: f64) -> SynthesisConfig {
    SynthesisConfig::new(1.0).with_samples(128).with_detuning_ratio(ratio)
}

fn bloch_gap(pulse: &ControlPulse, spec: &TrajectorySpec) -> f64 {
    let psi = propagate_qubit(pulse).apply(spec.start().state());
    let v = expectation_vector(psi);
    let e = spec.end().bloch_vector();
    norm([v[0] - e[0], v[1] - e[1], v[2] - e[2]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pulses_land_on_the_end_point(spec in spec_strategy()) {
        let pulse = synthesize(&spec, &cfg(1.0)).unwrap();
        prop_assert!(bloch_gap(&pulse, &spec) < 1e-8);
    }

    #[test]
    fn pulses_carry_no_dynamical_phase(spec in spec_strategy(), ratio in 1.0..12.0) {
        let pulse = synthesize(&spec, &cfg(ratio)).unwrap();
        let gd = dynamical_phase(&pulse, spec.start()).unwrap();
        prop_assert!(gd.abs() < 1e-8, "dynamical phase {gd}");
    }

    #[test]
    fn controls_respect_the_cap(spec in spec_strategy(), ratio in 1.0..12.0) {
        let omega_max = 2.0 * PI * 30.0;
        let c = SynthesisConfig::new(omega_max).with_samples(128).with_detuning_ratio(ratio);
        let pulse = synthesize(&spec, &c).unwrap();
        let tol = 1.0 + 1e-9;
        prop_assert!(pulse.omega.iter().all(|w| *w <= omega_max * tol));
        prop_assert!(pulse.delta.iter().all(|d| d.abs() <= ratio * omega_max * tol));
        if ratio == 1.0 {
            prop_assert!(pulse.peak_control() <= omega_max * tol);
        }
    }

    #[test]
    fn drag_is_linear_in_lambda_over_alpha(spec in spec_strategy(), lambda in 0.1f64..1.5, alpha in 5.0f64..50.0) {
        let pulse = synthesize(&spec, &cfg(1.0)).unwrap();
        prop_assert_eq!(drag_correct(&pulse, -alpha, 0.0), pulse.clone());
        let a = drag_correct(&pulse, -alpha, lambda);
        let b = drag_correct(&pulse, -2.0 * alpha, 2.0 * lambda);
        for k in 0..pulse.n {
            prop_assert!((a.omega[k] - b.omega[k]).abs() < 1e-12 * (1.0 + a.omega[k]));
            prop_assert_eq!(a.delta[k], pulse.delta[k]);
        }
    }
}

#[test]
fn the_capped_rate_uses_the_whole_budget() {
    let spec = TrajectorySpec::new(vec![Segment::longitude(0.0, 0.2, 2.5)], "arc").unwrap();
    let pulse = synthesize(&spec, &cfg(1.0)).unwrap();
    let peak = pulse.peak_control();
    assert!(peak <= 1.0 + 1e-12 && peak > 0.99, "{peak}");
}

#[test]
fn drag_adds_the_scaled_derivative() {
    let pulse = ControlPulse::new(0.1, vec![0.0, 1.0, 2.0, 1.0], vec![0.0; 4], vec![0.0; 4]).unwrap();
    let out = drag_correct(&pulse, -4.0, 1.0);
    // E + iλE'/α with a zero phase envelope: the quadrature is E'/α
    let deriv = [10.0 / 2.0, 20.0 / 2.0, 0.0, -20.0 / 2.0];
    for k in 0..4 {
        let quad = -deriv[k] / 4.0;
        let expected = (pulse.omega[k].powi(2) + quad * quad).sqrt();
        assert!((out.omega[k] - expected).abs() < 1e-12, "sample {k}");
    }
}

#[test]
fn seeded_specs_match_the_boundary_oracle() {
    let start = std::time::Instant::now();
    // chords replace latitude arcs, so the enclosed area converges as dt²;
    // the default sampling is fine enough for the oracle tolerance
    let fine = SynthesisConfig::new(1.0);
    for spec in seeded_specs(2024, 50) {
        let pulse = synthesize(&spec, &fine).unwrap();
        let u = propagate_qubit(&pulse).to_dmatrix();
        let oracle = boundary_unitary(spec.start(), spec.end(), geometric_phase(&spec).unwrap());
        let d = phase_invariant_distance(&oracle, &u);
        assert!(d < 1e-6, "{} segments: distance {d:.3e}", spec.segments.len());
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn sequences_concatenate() {
    let specs = seeded_specs(5, 3);
    let fine = SynthesisConfig::new(1.0);
    let whole = synthesize_sequence(&specs, &fine).unwrap();
    let parts: Vec<ControlPulse> = specs.iter().map(|s| synthesize(s, &fine).unwrap()).collect();
    let mut u = geogate::linalg::Su2 { a: num_complex::Complex64::new(1.0, 0.0), b: num_complex::Complex64::new(0.0, 0.0) };
    for p in &parts {
        u = propagate_qubit(p).mul(&u);
    }
    let d = phase_invariant_distance(&u.to_dmatrix(), &propagate_qubit(&whole).to_dmatrix());
    assert!(d < 1e-6, "{d}");
}

#[test]
fn pulse_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let pulse = synthesize(&seeded_specs(9, 1)[0], &cfg(3.0)).unwrap();
    pulse.write_json(&path).unwrap();
    assert_eq!(ControlPulse::read_json(&path).unwrap(), pulse);
}

#[test]
fn invalid_configs_are_rejected() {
    let spec = seeded_specs(1, 1).remove(0);
    for c in [SynthesisConfig::new(0.0), SynthesisConfig::new(1.0).with_samples(8), cfg(0.5)] {
        assert!(synthesize(&spec, &c).is_err());
    }
    let polar = TrajectorySpec::new(vec![Segment::latitude(0.0, 0.0, 1.0)], "pole").unwrap();
    assert!(synthesize(&polar, &cfg(1.0)).is_err());
}
