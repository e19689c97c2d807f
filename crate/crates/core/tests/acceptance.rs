//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! status 1 when any criterion fails. Run with
//! `cargo test --release -p geogate --test acceptance`.

mod common;

use common::{rectangle, seeded_specs};
use geogate::engine::{bessel_j, lindblad_propagate_many, propagate_transmon, DeviceParams};
use geogate::gates::*;
use geogate::linalg::{phase_invariant_distance, unitarity_defect, CMatrix, C64};
use geogate::robustness::*;
use geogate::synthesis::{synthesize, ControlPulse, SynthesisConfig};
use geogate::trajectory::*;
use geogate::twoqubit::{channel_breakdown, scan_delta_beta, IswapDesign, TwoQubitParams};
use geogate::units::mhz;
use std::f64::consts::PI;
use std::time::Instant;

/// Intermediate-latitude sweeps and error planes use this grid and ratio.
const SWEEP_GRID: usize = 50;
const ROBUST_RATIO: f64 = 10.0;
const ROBUST_SPP: usize = 256;
const SEED: u64 = 7;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn robust_cfg() -> SynthesisConfig {
    SynthesisConfig::new(1.0).with_samples(ROBUST_SPP).with_detuning_ratio(ROBUST_RATIO)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = SynthesisConfig::new(1.0);
    let mut worst: f64 = 0.0;
    for spec in seeded_specs(2024, 50) {
        let pulse = synthesize(&spec, &cfg).expect("random specs synthesize");
        let u = geogate::engine::propagate_qubit(&pulse).to_dmatrix();
        let oracle = boundary_unitary(spec.start(), spec.end(), geometric_phase(&spec).unwrap());
        worst = worst.max(phase_invariant_distance(&oracle, &u));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        name: "oracle equivalence",
        pass: worst < 1e-6 && secs < 30.0,
        detail: format!("50 specs, max distance {worst:.2e} (< 1e-6), {secs:.1} s (< 30 s)"),
    }
}

fn phase_functionals() -> Outcome {
    let cfg = SynthesisConfig::new(1.0).with_samples(512);
    let mut gd: f64 = 0.0;
    let mut specs = seeded_specs(99, 40);
    for g in [GateTarget::h(), GateTarget::rx(PI), GateTarget::ry(PI)] {
        specs.push(build_condition_i(&g, 0.0, 0.3 * PI, 0.6 * PI).unwrap().spec);
    }
    for ratio in [1.0, ROBUST_RATIO] {
        for spec in &specs {
            let pulse = synthesize(spec, &SynthesisConfig { detuning_ratio: ratio, ..cfg }).unwrap();
            gd = gd.max(dynamical_phase(&pulse, spec.start()).unwrap().abs());
        }
    }
    let mut solid: f64 = 0.0;
    for (a, b, dxi) in [(0.2, 1.1, 1.0), (0.5, 2.9, 4.0), (2.0, 0.3, 2.5), (1.4, 1.7, 6.0)] {
        solid = solid.max(solid_angle_check(&rectangle(a, b, 0.3, dxi)).unwrap().1);
    }
    let slice = TrajectorySpec::new(vec![Segment::longitude(0.0, 0.0, PI), Segment::longitude(1.2, PI, 0.0)], "slice").unwrap();
    solid = solid.max(solid_angle_check(&slice).unwrap().1);
    let mut loops: f64 = 0.0;
    for n in 1..=5 {
        for chi in [0.1, 0.7, 1.5, 2.4, 3.0] {
            let spec = TrajectorySpec::new(vec![Segment::latitude(chi, 0.0, 2.0 * PI * n as f64)], "loops").unwrap();
            let expected = -(n as f64) * PI * (1.0 - chi.cos());
            loops = loops.max((geometric_phase(&spec).unwrap() - expected).abs());
        }
    }
    Outcome {
        name: "phase functionals",
        pass: gd < 1e-8 && solid < 1e-9 && loops < 1e-10,
        detail: format!("max |gamma_d| {gd:.1e} (< 1e-8), solid-angle residual {solid:.1e} (< 1e-9), n-loop error {loops:.1e} (< 1e-10)"),
    }
}

fn gate_correctness() -> Outcome {
    let start = Instant::now();
    let cfg = SynthesisConfig::new(1.0);
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut recipe = |tag: &str, r: geogate::Result<GateRecipe>| {
        let inf = r
            .and_then(|r| Ok(r.infidelity.max(r.propagated_infidelity(&cfg)?)))
            .unwrap_or(f64::INFINITY);
        rows.push((tag.to_string(), inf));
    };
    recipe("H (i)", build_condition_i(&GateTarget::h(), 0.0, 0.02 * PI, 0.48 * PI));
    recipe("Rx(pi) (i)", build_condition_i(&GateTarget::rx(PI), 0.0, 0.64 * PI, 0.35 * PI));
    recipe("Ry(pi) (i)", build_condition_i(&GateTarget::ry(PI), 0.0, 0.64 * PI, 0.35 * PI));
    recipe("H (ii)", build_condition_ii(&GateTarget::h(), None));
    recipe("Rx(pi) (ii)", build_condition_ii(&GateTarget::rx(PI), None));
    recipe("H (iii)", build_condition_iii(&GateTarget::h(), condition_iii_start(&GateTarget::h())));
    recipe("Rx(pi/2) (iii)", build_condition_iii(&GateTarget::rx(PI / 2.0), 0.25 * PI));
    for g in [GateTarget::h(), GateTarget::rx(PI), GateTarget::ry(PI), GateTarget::rz(PI / 4.0)] {
        recipe(&format!("{} cgg", g.label), build_cyclic_geometric(&g));
    }
    let pulse_inf = |p: geogate::Result<ControlPulse>, g: &GateTarget| {
        p.map(|p| su2_infidelity(&g.su2().unwrap(), &geogate::engine::propagate_qubit(&p)))
            .unwrap_or(f64::INFINITY)
    };
    let rz = GateTarget::rz(PI / 4.0);
    let seq = compose_rz(PI / 4.0, ConditionTag::CondI).and_then(|s| sequence_pulse(&s, &cfg));
    rows.push(("Rz(pi/4) composed".into(), pulse_inf(seq, &rz)));
    for g in [GateTarget::h(), GateTarget::rx(PI), GateTarget::ry(PI), rz] {
        rows.push((format!("{} drg", g.label), pulse_inf(build_dynamical_rabi(&g, &cfg), &g)));
    }
    let secs = start.elapsed().as_secs_f64();
    let (worst_tag, worst) = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).cloned().unwrap();
    Outcome {
        name: "gate correctness",
        pass: worst < 1e-8 && secs < 10.0,
        detail: format!("{} gates, worst {worst:.1e} ({worst_tag}) (< 1e-8), {secs:.1} s (< 10 s)", rows.len()),
    }
}

/// Optimal intermediate latitudes found by the sweep, in units of π.
struct Optima {
    h: (f64, f64),
    rx: (f64, f64),
}

fn intermediate_optima(optima: &mut Option<Optima>) -> Outcome {
    let start = Instant::now();
    let em = ErrorModel::new(0.05, 0.05, SEED);
    let published = [(GateTarget::h(), (0.02, 0.48)), (GateTarget::rx(PI), (0.64, 0.35)), (GateTarget::ry(PI), (0.64, 0.35))];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut found = Vec::new();
    for (g, (p1, p2)) in published {
        let grid = sweep_intermediate(&g, SWEEP_GRID, &em, &robust_cfg()).expect("sweep runs");
        let (i, j, f) = grid.argmax();
        let (c1, c2) = (grid.axis1.values[i] / PI, grid.axis2.values[j] / PI);
        let ok = (c1 - p1).abs() <= 0.05 && (c2 - p2).abs() <= 0.05;
        pass &= ok;
        parts.push(format!("{} ({c1:.3}, {c2:.3})pi F={f:.5} vs ({p1}, {p2})pi {}", g.label, if ok { "ok" } else { "off" }));
        found.push((c1, c2));
    }
    *optima = Some(Optima { h: found[0], rx: found[1] });
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 900.0;
    Outcome {
        name: "robust intermediate latitudes",
        pass,
        detail: format!("{SWEEP_GRID}x{SWEEP_GRID}: {}; {secs:.0} s (<= 900 s)", parts.join("; ")),
    }
}

fn scheme_ordering(optima: &Optima) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let gates = [(GateTarget::h(), optima.h), (GateTarget::rx(PI), optima.rx), (GateTarget::rz(PI / 4.0), optima.rx)];
    for (g, (c1, c2)) in gates {
        let mean = |s: Scheme, inter: Option<(f64, f64)>| {
            sweep_errors(s, &g, (0.0, 0.1), (0.0, 0.1), 25, SEED, &robust_cfg(), inter).expect("sweep runs").mean()
        };
        let ngg = mean(Scheme::NggI, Some((c1 * PI, c2 * PI)));
        let cgg = mean(Scheme::Cgg, None);
        let drg = mean(Scheme::Drg, None);
        let ok = ngg > cgg && ngg > drg;
        pass &= ok;
        parts.push(format!(
            "{} NGG-i {ngg:.5} CGG {cgg:.5} DRG {drg:.5} (margins {:+.5}, {:+.5})",
            g.label,
            ngg - cgg,
            ngg - drg
        ));
    }
    Outcome { name: "scheme ordering", pass, detail: parts.join("; ") }
}

fn transmon(optima: &Optima) -> (Outcome, f64) {
    let start = Instant::now();
    let dev = DeviceParams::default();
    let rx = (optima.rx.0 * PI, optima.rx.1 * PI);
    let h = (optima.h.0 * PI, optima.h.1 * PI);
    let cases = [
        (GateTarget::rx(PI), 32.0, rx),
        (GateTarget::ry(PI), 32.0, rx),
        (GateTarget::h(), 25.0, h),
        (GateTarget::rz(PI / 4.0), 32.0, rx),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut worst_unitarity: f64 = 0.0;
    for (g, om, inter) in cases {
        let run = transmon_gate_run(&g, mhz(om), &dev, inter, 1000, 512).expect("transmon run");
        let ok = run.drag_on.fidelity >= 0.999 && run.drag_on.fidelity >= run.drag_off.fidelity;
        pass &= ok;
        parts.push(format!("{} on {:.5} off {:.5}", g.label, run.drag_on.fidelity, run.drag_off.fidelity));
        let cfg = SynthesisConfig::new(mhz(om)).with_samples(512).with_detuning_ratio(run.detuning_ratio);
        let pulse = scheme_pulse(Scheme::NggI, &g, &cfg, Some(inter)).unwrap();
        worst_unitarity = worst_unitarity.max(unitarity_defect(&propagate_transmon(&pulse, &dev).unwrap()));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 600.0;
    let outcome = Outcome {
        name: "transmon fidelities",
        pass,
        detail: format!("{} (>= 0.999, on >= off); {secs:.0} s (<= 600 s)", parts.join("; ")),
    };
    (outcome, worst_unitarity)
}

fn iswap() -> Outcome {
    let start = Instant::now();
    let p = TwoQubitParams::default();
    let design = IswapDesign::default();
    let d1: Vec<f64> = (0..10).map(|k| mhz(480.0 + 20.0 * k as f64)).collect();
    let betas: Vec<f64> = (0..10).map(|k| 0.93 + 0.09 * k as f64).collect();
    let grid = scan_delta_beta(&d1, &betas, &p, &design, true).expect("scan runs");
    let i = d1.iter().position(|d| (d - mhz(560.0)).abs() < 1e-9).unwrap();
    let j = betas.iter().position(|b| (b - 1.29).abs() < 1e-9).unwrap();
    let cell = grid.fidelity[i][j];
    let at = TwoQubitParams { beta: betas[j], ..p.with_delta1(d1[i]) };
    let b = channel_breakdown(&at, &design).expect("breakdown runs");
    let (ai, aj, best) = grid.argmax();
    let secs = start.elapsed().as_secs_f64();
    let pass = cell >= 0.995 && b.leakage_only > b.combined && b.decoherence_only > b.combined && secs <= 1200.0;
    Outcome {
        name: "parametric iSWAP",
        pass,
        detail: format!(
            "cell (560 MHz, 1.29) F={cell:.5} (>= 0.995); combined {:.5} < leakage-only {:.5}, decoherence-only {:.5}; scan max {best:.5} at ({:.0} MHz, {:.2}); {secs:.0} s (<= 1200 s)",
            b.combined,
            b.leakage_only,
            b.decoherence_only,
            d1[ai] / mhz(1.0),
            betas[aj]
        ),
    }
}

fn numerics(optima: &Optima, transmon_unitarity: f64) -> Outcome {
    // Lindblad trace drift on an open transmon run
    let dev = DeviceParams::default();
    let cfg = SynthesisConfig::new(mhz(32.0)).with_samples(512).with_detuning_ratio(transmon_detuning_ratio(&dev, mhz(32.0)));
    let pulse = scheme_pulse(Scheme::NggI, &GateTarget::rx(PI), &cfg, Some((optima.rx.0 * PI, optima.rx.1 * PI))).unwrap();
    let mut rho = CMatrix::zeros(4, 4);
    rho[(0, 0)] = C64::from(0.5);
    rho[(1, 1)] = C64::from(0.5);
    rho[(0, 1)] = C64::from(0.5);
    rho[(1, 0)] = C64::from(0.5);
    let out = lindblad_propagate_many(&pulse, &dev, &[rho]).unwrap();
    let drift = (out[0].trace() - C64::from(1.0)).norm();

    let mut bessel: f64 = 0.0;
    for k in 0..=20 {
        for x in [0.3, 1.29, 2.5, 7.0] {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            bessel = bessel.max((bessel_j(-k, x).unwrap() - sign * bessel_j(k, x).unwrap()).abs());
        }
    }
    for beta in [0.5, 1.29, 1.84, 3.0] {
        let sum: f64 = (-40..=40).map(|k| bessel_j(k, beta).unwrap().powi(2)).sum();
        bessel = bessel.max((sum - 1.0).abs());
    }

    let lambdas = [0.0025, 0.005, 0.01, 0.02];
    let mut slopes = Vec::new();
    for (g, (c1, c2)) in [(GateTarget::h(), optima.h), (GateTarget::rx(PI), optima.rx)] {
        let pulse = build_condition_i(&g, 0.0, c1 * PI, c2 * PI).unwrap().pulse(&robust_cfg()).unwrap();
        slopes.push((g.label.to_string(), infidelity_slope(&pulse, &g, &lambdas, SEED, 1.0).unwrap()));
    }
    let slopes_ok = slopes.iter().all(|(_, s)| (s - 2.0).abs() <= 0.2);
    Outcome {
        name: "numerics invariants",
        pass: transmon_unitarity < 1e-10 && drift < 1e-8 && bessel < 1e-10 && slopes_ok,
        detail: format!(
            "unitarity {transmon_unitarity:.1e} (< 1e-10), trace drift {drift:.1e} (< 1e-8), Bessel {bessel:.1e} (< 1e-10), slopes {} (2 +- 0.2)",
            slopes.iter().map(|(g, s)| format!("{g} {s:.3}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn report(o: &Outcome) -> bool {
    println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    o.pass
}

fn main() {
    let mut all = true;
    all &= report(&oracle_equivalence());
    all &= report(&phase_functionals());
    all &= report(&gate_correctness());
    let mut optima = None;
    all &= report(&intermediate_optima(&mut optima));
    let optima = optima.expect("sweeps ran");
    all &= report(&scheme_ordering(&optima));
    let (transmon_outcome, unitarity) = transmon(&optima);
    all &= report(&transmon_outcome);
    all &= report(&iswap());
    all &= report(&numerics(&optima, unitarity));
    if !all {
        std::process::exit(1);
    }
}
