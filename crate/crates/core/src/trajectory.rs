//! Bloch-sphere paths built from latitude and longitude segments, and the phase
//! functionals evaluated on them.
//!
//! A path point is `(chi, xi)`: polar angle and unwrapped azimuth of the state
//! `cos(chi/2)|0> + sin(chi/2) e^{i xi}|1>`. Azimuths are never reduced mod 2π so
//! the winding of latitude loops stays visible.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::qubit_field;
use crate::error::{Error, Result};
use crate::linalg::{Su2, Vec3, C64};
use crate::synthesis::ControlPulse;

/// Absolute tolerance for angle comparisons on analytic paths.
pub const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub chi: f64,
    pub xi: f64,
}

impl BlochPoint {
    pub fn new(chi: f64, xi: f64) -> Self {
        BlochPoint { chi, xi }
    }

    pub fn north() -> Self {
        BlochPoint { chi: 0.0, xi: 0.0 }
    }

    pub fn is_pole(&self) -> bool {
        self.chi == 0.0 || self.chi == PI
    }

    pub fn bloch_vector(&self) -> Vec3 {
        let (s, c) = self.chi.sin_cos();
        [s * self.xi.cos(), s * self.xi.sin(), c]
    }

    /// `cos(chi/2)|0> + sin(chi/2) e^{i xi}|1>`
    pub fn state(&self) -> [C64; 2] {
        let (s, c) = (0.5 * self.chi).sin_cos();
        [C64::new(c, 0.0), C64::from_polar(s, self.xi)]
    }

    /// Orthogonal partner `sin(chi/2) e^{-i xi}|0> - cos(chi/2)|1>`.
    pub fn orthogonal_state(&self) -> [C64; 2] {
        let (s, c) = (0.5 * self.chi).sin_cos();
        [C64::from_polar(s, -self.xi), C64::new(-c, 0.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Longitude,
    Latitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProfile {
    #[default]
    SinShaped,
    Constant,
}

impl RateProfile {
    /// Fraction of the segment traversed after normalised time `s ∈ [0, 1]`.
    pub fn progress(self, s: f64) -> f64 {
        match self {
            RateProfile::SinShaped => 0.5 * (1.0 - (PI * s).cos()),
            RateProfile::Constant => s,
        }
    }

    /// Ratio of segment duration to `arc / peak_rate`.
    pub fn duration_factor(self) -> f64 {
        match self {
            RateProfile::SinShaped => 0.5 * PI,
            RateProfile::Constant => 1.0,
        }
    }
}

/// One piece of a path: motion along a meridian (fixed `xi`) or along a
/// parallel (fixed `chi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentRepr", into = "SegmentRepr")]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: BlochPoint,
    pub end: BlochPoint,
    pub rate_profile: RateProfile,
}

impl Segment {
    pub fn longitude(xi: f64, chi_from: f64, chi_to: f64) -> Self {
        Segment {
            kind: SegmentKind::Longitude,
            start: BlochPoint::new(chi_from, xi),
            end: BlochPoint::new(chi_to, xi),
            rate_profile: RateProfile::SinShaped,
        }
    }

    pub fn latitude(chi: f64, xi_from: f64, xi_to: f64) -> Self {
        Segment {
            kind: SegmentKind::Latitude,
            start: BlochPoint::new(chi, xi_from),
            end: BlochPoint::new(chi, xi_to),
            rate_profile: RateProfile::SinShaped,
        }
    }

    pub fn with_profile(mut self, profile: RateProfile) -> Self {
        self.rate_profile = profile;
        self
    }

    /// Angular extent of the moving coordinate.
    pub fn arc(&self) -> f64 {
        match self.kind {
            SegmentKind::Longitude => (self.end.chi - self.start.chi).abs(),
            SegmentKind::Latitude => (self.end.xi - self.start.xi).abs(),
        }
    }

    /// Point reached after traversing fraction `p` of the segment.
    pub fn point_at(&self, p: f64) -> BlochPoint {
        match self.kind {
            SegmentKind::Longitude => BlochPoint::new(
                self.start.chi + p * (self.end.chi - self.start.chi),
                self.start.xi,
            ),
            SegmentKind::Latitude => BlochPoint::new(
                self.start.chi,
                self.start.xi + p * (self.end.xi - self.start.xi),
            ),
        }
    }

    pub fn reversed(&self) -> Segment {
        Segment {
            start: self.end,
            end: self.start,
            ..*self
        }
    }

    fn check(&self) -> Result<()> {
        for p in [self.start, self.end] {
            if !(0.0..=PI).contains(&p.chi) || !p.xi.is_finite() {
                return Err(Error::InvalidTrajectory(format!(
                    "point ({}, {}) outside the sphere chart",
                    p.chi, p.xi
                )));
            }
        }
        match self.kind {
            SegmentKind::Longitude if self.start.xi != self.end.xi => Err(Error::InvalidTrajectory(
                "longitude segment must keep xi fixed".into(),
            )),
            SegmentKind::Latitude if self.start.chi != self.end.chi => Err(Error::InvalidTrajectory(
                "latitude segment must keep chi fixed".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SegmentRepr {
    Latitude {
        chi: f64,
        xi_from: f64,
        xi_to: f64,
        #[serde(default)]
        rate_profile: RateProfile,
    },
    Longitude {
        xi: f64,
        chi_from: f64,
        chi_to: f64,
        #[serde(default)]
        rate_profile: RateProfile,
    },
}

impl TryFrom<SegmentRepr> for Segment {
    type Error = Error;

    fn try_from(r: SegmentRepr) -> Result<Segment> {
        let seg = match r {
            SegmentRepr::Latitude { chi, xi_from, xi_to, rate_profile } => {
                Segment::latitude(chi, xi_from, xi_to).with_profile(rate_profile)
            }
            SegmentRepr::Longitude { xi, chi_from, chi_to, rate_profile } => {
                Segment::longitude(xi, chi_from, chi_to).with_profile(rate_profile)
            }
        };
        seg.check()?;
        Ok(seg)
    }
}

impl From<Segment> for SegmentRepr {
    fn from(s: Segment) -> SegmentRepr {
        match s.kind {
            SegmentKind::Latitude => SegmentRepr::Latitude {
                chi: s.start.chi,
                xi_from: s.start.xi,
                xi_to: s.end.xi,
                rate_profile: s.rate_profile,
            },
            SegmentKind::Longitude => SegmentRepr::Longitude {
                xi: s.start.xi,
                chi_from: s.start.chi,
                chi_to: s.end.chi,
                rate_profile: s.rate_profile,
            },
        }
    }
}

/// Ordered, continuous chain of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionTag {
    Cyclic,
    CondI,
    CondII,
    CondIII,
}

impl std::fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConditionTag::Cyclic => "cyclic",
            ConditionTag::CondI => "i",
            ConditionTag::CondII => "ii",
            ConditionTag::CondIII => "iii",
        };
        f.write_str(s)
    }
}

impl TrajectorySpec {
    pub fn new(segments: Vec<Segment>, label: impl Into<String>) -> Result<Self> {
        let spec = TrajectorySpec {
            segments,
            label: label.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks segment invariants and continuity. At an exact pole the shared
    /// endpoint only needs matching `chi`, since `xi` is undefined there.
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidTrajectory("trajectory has no segments".into()));
        }
        for seg in &self.segments {
            seg.check()?;
        }
        for (k, pair) in self.segments.windows(2).enumerate() {
            let (a, b) = (pair[0].end, pair[1].start);
            let continuous = a.chi == b.chi && (a.xi == b.xi || a.is_pole());
            if !continuous {
                return Err(Error::InvalidTrajectory(format!(
                    "segments {k} and {} are not joined: ({}, {}) vs ({}, {})",
                    k + 1,
                    a.chi,
                    a.xi,
                    b.chi,
                    b.xi
                )));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> BlochPoint {
        self.segments[0].start
    }

    pub fn end(&self) -> BlochPoint {
        self.segments[self.segments.len() - 1].end
    }

    /// The same path traversed backwards.
    pub fn reversed(&self) -> TrajectorySpec {
        TrajectorySpec {
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
            label: format!("{} (reversed)", self.label),
        }
    }

    /// Shift every azimuth by `offset`.
    pub fn rotated(&self, offset: f64) -> TrajectorySpec {
        let shift = |p: BlochPoint| BlochPoint::new(p.chi, p.xi + offset);
        TrajectorySpec {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    start: shift(s.start),
                    end: shift(s.end),
                    ..*s
                })
                .collect(),
            label: self.label.clone(),
        }
    }

    /// Azimuth jumps at pole junctions: `(chi_pole, xi_after - xi_before)`.
    fn pole_jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.segments.windows(2).filter_map(|w| {
            let (a, b) = (w[0].end, w[1].start);
            (a.is_pole() && a.xi != b.xi).then_some((a.chi, b.xi - a.xi))
        })
    }
}

/// Classify a path by its endpoints.
pub fn classify(spec: &TrajectorySpec) -> Result<ConditionTag> {
    spec.validate()?;
    let (s, e) = (spec.start(), spec.end());
    let chi_same = (e.chi - s.chi).abs() <= ANGLE_TOL;
    let xi_same = if chi_same && (s.is_pole() || e.is_pole()) {
        true
    } else {
        let d = e.xi - s.xi;
        (d - 2.0 * PI * (d / (2.0 * PI)).round()).abs() <= ANGLE_TOL
    };
    Ok(match (chi_same, xi_same) {
        (true, true) => ConditionTag::Cyclic,
        (false, true) => ConditionTag::CondI,
        (true, false) => ConditionTag::CondII,
        (false, false) => ConditionTag::CondIII,
    })
}

/// `-1/2 ∫ xi'(1 - cos chi) dt` along the path.
///
/// Azimuth jumps at the south pole carry `-(Δxi)` each: the chart
/// `e^{i xi}|1>` is singular there, so a relabelled azimuth is compensated by
/// the overall phase. Jumps at the north pole contribute nothing.
pub fn geometric_phase(spec: &TrajectorySpec) -> Result<f64> {
    spec.validate()?;
    let along: f64 = spec
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Latitude)
        .map(|s| -0.5 * (s.end.xi - s.start.xi) * (1.0 - s.start.chi.cos()))
        .sum();
    let jumps: f64 = spec
        .pole_jumps()
        .map(|(chi, dxi)| -0.5 * dxi * (1.0 - chi.cos()))
        .sum();
    Ok(along + jumps)
}

/// `1/2 Σ Δxi_j cos chi_j` over latitude segments.
pub fn gamma_prime(spec: &TrajectorySpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Latitude)
        .map(|s| 0.5 * (s.end.xi - s.start.xi) * s.start.chi.cos())
        .sum())
}

/// Total azimuth advanced along latitude segments.
pub fn latitude_winding(spec: &TrajectorySpec) -> f64 {
    spec.segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Latitude)
        .map(|s| s.end.xi - s.start.xi)
        .sum()
}

/// `-∫ <Ψ1|H|Ψ1> dt` for the state started at `start` and driven by `pulse`.
///
/// The Hamiltonian is constant within each sample, so the energy is too and
/// the quadrature over every step is exact.
pub fn dynamical_phase(pulse: &ControlPulse, start: BlochPoint) -> Result<f64> {
    let mut psi = start.state();
    let mut phase = 0.0;
    for k in 0..pulse.n {
        let field = qubit_field(pulse.omega[k], pulse.phi[k], pulse.delta[k]);
        phase -= pulse.dt * 0.5 * crate::linalg::dot(field, expectation_vector(psi));
        psi = Su2::from_field(field, pulse.dt).apply(psi);
    }
    let drift = (psi[0].norm_sqr() + psi[1].norm_sqr() - 1.0).abs();
    if drift > 1e-9 {
        return Err(Error::NonNormalizedState { drift });
    }
    Ok(phase)
}

/// Bloch vector `<sigma>` of a (normalised) qubit state.
pub fn expectation_vector(psi: [C64; 2]) -> Vec3 {
    let c = psi[0].conj() * psi[1];
    [2.0 * c.re, 2.0 * c.im, psi[0].norm_sqr() - psi[1].norm_sqr()]
}

/// Enclosed solid angle `∮(1 - cos chi) dxi` (positive when xi increases around
/// the north pole) and the residual `|geometric_phase + solid_angle/2|`.
pub fn solid_angle_check(spec: &TrajectorySpec) -> Result<(f64, f64)> {
    if classify(spec)? != ConditionTag::Cyclic {
        return Err(Error::NotClosed);
    }
    let mut solid = 0.0;
    for s in spec.segments.iter().filter(|s| s.kind == SegmentKind::Latitude) {
        solid += (s.end.xi - s.start.xi) * (1.0 - s.start.chi.cos());
    }
    for (chi, dxi) in spec.pole_jumps() {
        solid += dxi * (1.0 - chi.cos());
    }
    let (s, e) = (spec.start(), spec.end());
    if e.is_pole() && e.chi == s.chi && e.xi != s.xi {
        solid += (s.xi - e.xi) * (1.0 - e.chi.cos());
    }
    let residual = (geometric_phase(spec)? + 0.5 * solid).abs();
    Ok((solid, residual))
}
