//! Turning a Bloch-sphere path into a sampled control schedule.
//!
//! Every sample is a constant field that rotates the Bloch vector along the
//! great circle joining two consecutive path vertices. The rotation axis is
//! perpendicular to the state for the whole step, so the energy expectation is
//! identically zero and no dynamical phase is picked up. Vertices are placed on
//! the requested path with a sin-shaped (or uniform) progress profile, and the
//! last vertex of each segment is its exact endpoint.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cross, dot, norm, C64};
use crate::trajectory::{Segment, SegmentKind, TrajectorySpec};

/// Uniformly sampled schedule of `(omega, phi, delta)`; sample `k` is held
/// constant on `[t0 + k dt, t0 + (k + 1) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
    pub omega: Vec<f64>,
    pub phi: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default)]
    pub meta: PulseMeta,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseMeta {
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub omega_max: f64,
    #[serde(default)]
    pub drag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag_alpha: Option<f64>,
}

impl ControlPulse {
    pub fn new(dt: f64, omega: Vec<f64>, phi: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let pulse = ControlPulse {
            t0: 0.0,
            dt,
            n: omega.len(),
            omega,
            phi,
            delta,
            meta: PulseMeta::default(),
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// A pulse of `n` samples with every control switched off.
    pub fn idle(dt: f64, n: usize) -> Self {
        ControlPulse {
            t0: 0.0,
            dt,
            n,
            omega: vec![0.0; n],
            phi: vec![0.0; n],
            delta: vec![0.0; n],
            meta: PulseMeta::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, len) in [("omega", self.omega.len()), ("phi", self.phi.len()), ("delta", self.delta.len())] {
            if len != self.n {
                return Err(Error::InvalidConfig(format!(
                    "pulse array `{name}` has {len} samples, expected {}",
                    self.n
                )));
            }
        }
        if !(self.dt > 0.0) || self.n == 0 {
            return Err(Error::ZeroDuration);
        }
        if let Some(k) = self.omega.iter().position(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "negative or non-finite amplitude at sample {k}"
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n as f64 * self.dt
    }

    /// Midpoint time of sample `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + (k as f64 + 0.5) * self.dt
    }

    /// Largest control magnitude `max(omega, |delta|)` over the schedule.
    pub fn peak_control(&self) -> f64 {
        self.omega
            .iter()
            .zip(&self.delta)
            .map(|(w, d)| w.max(d.abs()))
            .fold(0.0, f64::max)
    }

    /// Pulse area `∫ omega dt`.
    pub fn area(&self) -> f64 {
        self.omega.iter().sum::<f64>() * self.dt
    }

    /// Append `other` after `self`. Both pulses must share the sample spacing.
    pub fn concat(&self, other: &ControlPulse) -> Result<ControlPulse> {
        if (self.dt - other.dt).abs() > 1e-12 * self.dt.max(other.dt) {
            return Err(Error::InvalidConfig(format!(
                "cannot concatenate pulses with spacings {} and {}",
                self.dt, other.dt
            )));
        }
        let mut out = self.clone();
        out.n += other.n;
        out.omega.extend_from_slice(&other.omega);
        out.phi.extend_from_slice(&other.phi);
        out.delta.extend_from_slice(&other.delta);
        out.meta.drag = self.meta.drag && other.meta.drag;
        if !other.meta.source.is_empty() {
            out.meta.source = format!("{} + {}", self.meta.source, other.meta.source);
        }
        Ok(out)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<ControlPulse> {
        let pulse: ControlPulse = serde_json::from_slice(&std::fs::read(path)?)?;
        pulse.validate()?;
        Ok(pulse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragConfig {
    pub enabled: bool,
    pub lambda: f64,
    /// Anharmonicity in rad/µs.
    pub alpha: f64,
}

impl Default for DragConfig {
    fn default() -> Self {
        DragConfig {
            enabled: false,
            lambda: 1.0,
            alpha: -2.0 * PI * 320.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Peak control magnitude in rad/µs.
    pub omega_max: f64,
    #[serde(default = "default_spp")]
    pub samples_per_segment: usize,
    #[serde(default)]
    pub drag: DragConfig,
    /// Largest latitude detuning as a multiple of `omega_max`. At 1 every
    /// control component stays within `omega_max`; larger values let
    /// parallels near the equator be crossed faster with a detuning-dominated
    /// drive while the Rabi amplitude still peaks at `omega_max`.
    #[serde(default = "default_detuning_ratio")]
    pub detuning_ratio: f64,
}

fn default_spp() -> usize {
    4096
}

fn default_detuning_ratio() -> f64 {
    1.0
}

impl SynthesisConfig {
    pub fn new(omega_max: f64) -> Self {
        SynthesisConfig {
            omega_max,
            samples_per_segment: default_spp(),
            drag: DragConfig::default(),
            detuning_ratio: default_detuning_ratio(),
        }
    }

    pub fn with_samples(mut self, spp: usize) -> Self {
        self.samples_per_segment = spp;
        self
    }

    pub fn with_detuning_ratio(mut self, ratio: f64) -> Self {
        self.detuning_ratio = ratio;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return Err(Error::InvalidConfig("omega_max must be positive".into()));
        }
        if !(self.detuning_ratio >= 1.0) || !self.detuning_ratio.is_finite() {
            return Err(Error::InvalidConfig("detuning_ratio must be a finite value >= 1".into()));
        }
        if self.samples_per_segment < 64 {
            return Err(Error::InvalidConfig("samples_per_segment must be at least 64".into()));
        }
        Ok(())
    }
}

/// Smallest number of samples given to any segment.
const MIN_SEGMENT_SAMPLES: usize = 2;

/// Peak traversal rate of the moving coordinate: the Rabi amplitude peaks at
/// `omega_max` unless the detuning would exceed `detuning_ratio * omega_max`.
fn peak_rate(seg: &Segment, cfg: &SynthesisConfig) -> Result<f64> {
    let omega_max = cfg.omega_max;
    match seg.kind {
        SegmentKind::Longitude => Ok(omega_max),
        SegmentKind::Latitude => {
            let chi = seg.start.chi;
            if chi == 0.0 || chi == PI {
                return Err(Error::DegenerateSegment { chi });
            }
            let (s, c) = chi.sin_cos();
            Ok(omega_max / (s * c.abs().max(s / cfg.detuning_ratio)))
        }
    }
}

/// Unstretched duration of every segment at its peak rate.
fn ideal_durations(spec: &TrajectorySpec, cfg: &SynthesisConfig) -> Result<Vec<f64>> {
    spec.validate()?;
    cfg.validate()?;
    spec.segments
        .iter()
        .map(|seg| {
            let rate = peak_rate(seg, cfg)?;
            let arc = seg.arc();
            if arc == 0.0 {
                return Err(Error::ZeroDuration);
            }
            Ok(seg.rate_profile.duration_factor() * arc / rate)
        })
        .collect()
}

/// Sample spacing that gives the longest segment of `spec` exactly
/// `samples_per_segment` samples before stretching.
pub fn grid_spacing(spec: &TrajectorySpec, cfg: &SynthesisConfig) -> Result<f64> {
    let ideal = ideal_durations(spec, cfg)?;
    Ok(ideal.iter().cloned().fold(0.0, f64::max) / cfg.samples_per_segment as f64)
}

/// Per-segment sample counts on a grid of spacing `dt`.
fn plan_on_grid(spec: &TrajectorySpec, cfg: &SynthesisConfig, dt: f64) -> Result<Vec<usize>> {
    let ideal = ideal_durations(spec, cfg)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("sample spacing must be positive".into()));
    }
    // Chords of a parallel are slightly more tilted than its tangent, which
    // raises the detuning of a step by at most a/sin(a) for a step angle a.
    let a = (cfg.omega_max * cfg.detuning_ratio * dt).min(1.0);
    let stretch = a / a.sin();
    Ok(spec
        .segments
        .iter()
        .zip(&ideal)
        .map(|(seg, tau)| {
            let f = if seg.kind == SegmentKind::Latitude { stretch } else { 1.0 };
            ((tau * f / dt - 1e-9).ceil() as usize).max(MIN_SEGMENT_SAMPLES)
        })
        .collect())
}

/// Total gate time of the pulse `synthesize` would produce.
pub fn total_duration(spec: &TrajectorySpec, cfg: &SynthesisConfig) -> Result<f64> {
    let dt = grid_spacing(spec, cfg)?;
    let counts = plan_on_grid(spec, cfg, dt)?;
    Ok(counts.iter().sum::<usize>() as f64 * dt)
}

/// Build a zero-dynamical-phase control pulse that drives the start point of
/// `spec` along the path.
pub fn synthesize(spec: &TrajectorySpec, cfg: &SynthesisConfig) -> Result<ControlPulse> {
    synthesize_on_grid(spec, cfg, grid_spacing(spec, cfg)?)
}

/// Synthesize several paths back to back on one common grid, the finest one
/// any of them would choose on its own.
pub fn synthesize_sequence(specs: &[TrajectorySpec], cfg: &SynthesisConfig) -> Result<ControlPulse> {
    let mut dt = f64::INFINITY;
    for spec in specs {
        dt = dt.min(grid_spacing(spec, cfg)?);
    }
    let mut pulses = specs.iter().map(|s| synthesize_on_grid(s, cfg, dt));
    let first = pulses
        .next()
        .ok_or_else(|| Error::InvalidTrajectory("empty sequence".into()))??;
    pulses.try_fold(first, |acc, p| acc.concat(&p?))
}

/// As [`synthesize`] on a caller-chosen sample spacing.
pub fn synthesize_on_grid(spec: &TrajectorySpec, cfg: &SynthesisConfig, dt: f64) -> Result<ControlPulse> {
    let counts = plan_on_grid(spec, cfg, dt)?;
    let total: usize = counts.iter().sum();
    let mut omega = Vec::with_capacity(total);
    let mut phi = Vec::with_capacity(total);
    let mut delta = Vec::with_capacity(total);
    let mut last_phi: Option<f64> = None;

    for (seg, &n) in spec.segments.iter().zip(&counts) {
        let vertex = |j: usize| {
            if j == n {
                seg.end
            } else {
                seg.point_at(seg.rate_profile.progress(j as f64 / n as f64))
            }
        };
        let mut prev = vertex(0);
        for j in 0..n {
            let next = vertex(j + 1);
            let (r0, r1) = (prev.bloch_vector(), next.bloch_vector());
            let axis = cross(r0, r1);
            let sin_a = norm(axis);
            let angle = sin_a.atan2(dot(r0, r1));
            let (bx, by, bz) = if sin_a > 0.0 {
                let k = angle / (dt * sin_a);
                (k * axis[0], k * axis[1], k * axis[2])
            } else {
                (0.0, 0.0, 0.0)
            };
            let w = bx.hypot(by);
            let raw_phi = if w > 0.0 {
                by.atan2(bx)
            } else {
                0.5 * (prev.xi + next.xi)
            };
            let p = match last_phi {
                Some(ref_phi) => unwrap_near(raw_phi, ref_phi),
                None => raw_phi,
            };
            last_phi = Some(p);
            omega.push(w);
            phi.push(p);
            delta.push(-bz);
            prev = next;
        }
    }

    let mut pulse = ControlPulse {
        t0: 0.0,
        dt,
        n: total,
        omega,
        phi,
        delta,
        meta: PulseMeta {
            source: spec.label.clone(),
            omega_max: cfg.omega_max,
            ..PulseMeta::default()
        },
    };
    if cfg.drag.enabled {
        pulse = drag_correct(&pulse, cfg.drag.alpha, cfg.drag.lambda);
    }
    Ok(pulse)
}

/// Shift `x` by a multiple of 2π so it lies within π of `reference`.
pub fn unwrap_near(x: f64, reference: f64) -> f64 {
    x - 2.0 * PI * ((x - reference) / (2.0 * PI)).round()
}

/// First-order DRAG: the envelope `E = omega e^{-i phi}` becomes
/// `E + i lambda E' / alpha` with `E'` from central differences (the pulse is
/// taken to vanish outside its support). Detunings are untouched.
pub fn drag_correct(pulse: &ControlPulse, alpha: f64, lambda: f64) -> ControlPulse {
    if lambda == 0.0 {
        return pulse.clone();
    }
    let n = pulse.n;
    let env: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(pulse.omega[k], -pulse.phi[k]))
        .collect();
    let at = |k: isize| -> C64 {
        if k < 0 || k as usize >= n {
            C64::new(0.0, 0.0)
        } else {
            env[k as usize]
        }
    };
    let scale = C64::new(0.0, lambda / (alpha * 2.0 * pulse.dt));
    let mut out = pulse.clone();
    let mut last_phi = None;
    for k in 0..n {
        let kk = k as isize;
        let e = env[k] + scale * (at(kk + 1) - at(kk - 1));
        let w = e.norm();
        let p = if w > 0.0 { -e.arg() } else { pulse.phi[k] };
        let p = match last_phi {
            Some(r) => unwrap_near(p, r),
            None => p,
        };
        last_phi = Some(p);
        out.omega[k] = w;
        out.phi[k] = p;
    }
    out.meta.drag = true;
    out.meta.drag_lambda = Some(lambda);
    out.meta.drag_alpha = Some(alpha);
    out
}
