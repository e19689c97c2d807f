#![allow(dead_code)]

use geogate::trajectory::{Segment, TrajectorySpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// One step of a random path: a longitude move to a new latitude or a
/// latitude move by an azimuth increment.
#[derive(Debug, Clone, Copy)]
pub enum Step {
    Longitude(f64),
    Latitude(f64),
}

/// Chain `steps` into a path from `(chi0, xi0)`, alternating kinds starting
/// with `first_longitude`. Latitudes stay away from the poles and moves that
/// would be shorter than a few hundredths of a radian are skipped.
pub fn chain(chi0: f64, xi0: f64, steps: &[Step]) -> Option<TrajectorySpec> {
    let (mut chi, mut xi) = (chi0, xi0);
    let mut segs = Vec::new();
    for s in steps {
        match *s {
            Step::Longitude(to) if (to - chi).abs() > 0.05 => {
                segs.push(Segment::longitude(xi, chi, to));
                chi = to;
            }
            Step::Latitude(d) if d.abs() > 0.05 => {
                segs.push(Segment::latitude(chi, xi, xi + d));
                xi += d;
            }
            _ => {}
        }
    }
    if segs.is_empty() {
        return None;
    }
    TrajectorySpec::new(segs, "random").ok()
}

fn random_steps(rng: &mut ChaCha8Rng, n: usize) -> Vec<Step> {
    let start_with_longitude = rng.gen_bool(0.5);
    (0..n)
        .map(|k| {
            if (k % 2 == 0) == start_with_longitude {
                Step::Longitude(rng.gen_range(0.08 * PI..0.92 * PI))
            } else {
                Step::Latitude(rng.gen_range(-1.5 * PI..1.5 * PI))
            }
        })
        .collect()
}

/// `count` reproducible random paths of one to six segments.
pub fn seeded_specs(seed: u64, count: usize) -> Vec<TrajectorySpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let chi0 = rng.gen_range(0.08 * PI..0.92 * PI);
        let xi0 = rng.gen_range(-PI..PI);
        let n = rng.gen_range(1..=6);
        let steps = random_steps(&mut rng, n);
        if let Some(spec) = chain(chi0, xi0, &steps) {
            out.push(spec);
        }
    }
    out
}

fn step_strategy() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0.08 * PI..0.92 * PI).prop_map(Step::Longitude),
        (-1.5 * PI..1.5 * PI).prop_map(Step::Latitude),
    ]
}

/// Random paths for property tests.
pub fn spec_strategy() -> impl Strategy<Value = TrajectorySpec> {
    (0.08 * PI..0.92 * PI, -PI..PI, prop::collection::vec(step_strategy(), 1..=6))
        .prop_filter_map("degenerate path", |(chi0, xi0, steps)| chain(chi0, xi0, &steps))
}

/// Closed rectangle between two latitudes and two meridians.
pub fn rectangle(chi_a: f64, chi_b: f64, xi0: f64, dxi: f64) -> TrajectorySpec {
    TrajectorySpec::new(
        vec![
            Segment::longitude(xi0, chi_a, chi_b),
            Segment::latitude(chi_b, xi0, xi0 + dxi),
            Segment::longitude(xi0 + dxi, chi_b, chi_a),
            Segment::latitude(chi_a, xi0 + dxi, xi0),
        ],
        "rectangle",
    )
    .expect("valid rectangle")
}
