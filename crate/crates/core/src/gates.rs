//! Target gates, the boundary-value evolution operator, and the path recipes
//! that realise gates under the three noncyclic conditions, plus the cyclic
//! orange-slice and dynamical Rabi baselines.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::propagate_qubit;
use crate::error::{Error, Result};
use crate::linalg::{complex_matrix_serde, CMatrix, Su2, C64, I, ONE, ZERO};
use crate::optimize::{multistart, start_points, NelderMeadOptions};
use crate::synthesis::{synthesize, synthesize_sequence, total_duration, ControlPulse, PulseMeta, SynthesisConfig};
use crate::trajectory::{classify, geometric_phase, BlochPoint, ConditionTag, Segment, TrajectorySpec};
use crate::units::parse_angle;

/// Recipes and baselines must reproduce their target to this infidelity.
pub const GATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateLabel {
    H,
    Rx { theta: f64 },
    Ry { theta: f64 },
    Rz { theta: f64 },
    Iswap,
    Custom { name: String },
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateLabel::H => write!(f, "H"),
            GateLabel::Rx { theta } => write!(f, "Rx({theta})"),
            GateLabel::Ry { theta } => write!(f, "Ry({theta})"),
            GateLabel::Rz { theta } => write!(f, "Rz({theta})"),
            GateLabel::Iswap => write!(f, "iSWAP"),
            GateLabel::Custom { name } => write!(f, "{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTarget {
    pub dim: usize,
    #[serde(with = "complex_matrix_serde")]
    pub matrix: CMatrix,
    pub label: GateLabel,
}

fn rotation(theta: f64, axis: [f64; 3]) -> CMatrix {
    let (s, c) = (0.5 * theta).sin_cos();
    let [x, y, z] = axis;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, -s * z),
            C64::new(-s * y, -s * x),
            C64::new(s * y, -s * x),
            C64::new(c, s * z),
        ],
    )
}

impl GateTarget {
    pub fn h() -> Self {
        let r = C64::from(FRAC_1_SQRT_2);
        GateTarget {
            dim: 2,
            matrix: CMatrix::from_row_slice(2, 2, &[r, r, r, -r]),
            label: GateLabel::H,
        }
    }

    /// `exp(-i θ σx / 2)`
    pub fn rx(theta: f64) -> Self {
        GateTarget { dim: 2, matrix: rotation(theta, [1.0, 0.0, 0.0]), label: GateLabel::Rx { theta } }
    }

    pub fn ry(theta: f64) -> Self {
        GateTarget { dim: 2, matrix: rotation(theta, [0.0, 1.0, 0.0]), label: GateLabel::Ry { theta } }
    }

    pub fn rz(theta: f64) -> Self {
        GateTarget { dim: 2, matrix: rotation(theta, [0.0, 0.0, 1.0]), label: GateLabel::Rz { theta } }
    }

    pub fn identity() -> Self {
        Self::rx(0.0)
    }

    /// `|00> -> |00>`, `|01> -> i|10>`, `|10> -> i|01>`, `|11> -> |11>`.
    pub fn iswap() -> Self {
        let mut m = CMatrix::from_element(4, 4, ZERO);
        m[(0, 0)] = ONE;
        m[(1, 2)] = I;
        m[(2, 1)] = I;
        m[(3, 3)] = ONE;
        GateTarget { dim: 4, matrix: m, label: GateLabel::Iswap }
    }

    pub fn custom(name: impl Into<String>, matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim {
            return Err(Error::DimMismatch { expected: dim, actual: matrix.ncols() });
        }
        if crate::linalg::unitarity_defect(&matrix) > 1e-12 {
            return Err(Error::InvalidConfig("target matrix is not unitary".into()));
        }
        Ok(GateTarget { dim, matrix, label: GateLabel::Custom { name: name.into() } })
    }

    /// Parse `h`, `x`, `id`, `rx:pi`, `ry:pi/2`, `rz:pi/4`, `iswap`.
    pub fn parse(text: &str) -> Result<Self> {
        let lower = text.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (lower.clone(), None),
        };
        let angle = || -> Result<f64> {
            let a = arg
                .as_deref()
                .ok_or_else(|| Error::InvalidConfig(format!("gate `{text}` needs an angle, e.g. `{name}:pi`")))?;
            parse_angle(a)
        };
        match name.as_str() {
            "h" | "hadamard" => Ok(Self::h()),
            "x" => Ok(Self::rx(PI)),
            "y" => Ok(Self::ry(PI)),
            "id" | "i" | "identity" => Ok(Self::identity()),
            "rx" => Ok(Self::rx(angle()?)),
            "ry" => Ok(Self::ry(angle()?)),
            "rz" => Ok(Self::rz(angle()?)),
            "iswap" => Ok(Self::iswap()),
            _ => Err(Error::InvalidConfig(format!("unknown gate `{text}`"))),
        }
    }

    /// Short file-name friendly tag.
    pub fn tag(&self) -> String {
        let angle = |t: f64| format!("{:.4}pi", t / PI).replace('.', "p").replace('-', "m");
        match &self.label {
            GateLabel::H => "h".into(),
            GateLabel::Rx { theta } => format!("rx_{}", angle(*theta)),
            GateLabel::Ry { theta } => format!("ry_{}", angle(*theta)),
            GateLabel::Rz { theta } => format!("rz_{}", angle(*theta)),
            GateLabel::Iswap => "iswap".into(),
            GateLabel::Custom { name } => name.chars().filter(|c| c.is_ascii_alphanumeric()).collect(),
        }
    }

    /// The target rescaled into SU(2), for single-qubit targets.
    pub fn su2(&self) -> Option<Su2> {
        if self.dim != 2 {
            return None;
        }
        let m = &self.matrix;
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let root = det.sqrt();
        let mut u = Su2 { a: m[(0, 0)] / root, b: m[(1, 0)] / root };
        u.renormalize();
        Some(u)
    }

    /// `Rz(a) G Rz(a)^†`: the same gate with its rotation axis turned by `a`.
    pub fn rotated(&self, a: f64) -> GateTarget {
        let rz = rotation(a, [0.0, 0.0, 1.0]);
        GateTarget {
            dim: 2,
            matrix: &rz * &self.matrix * rz.adjoint(),
            label: GateLabel::Custom { name: format!("{} turned by {a:.6}", self.label) },
        }
    }
}

/// `1 - |Tr(G^† U)| / dim`, clamped at zero.
pub fn gate_infidelity(target: &CMatrix, u: &CMatrix) -> f64 {
    let dim = target.nrows() as f64;
    (1.0 - (target.adjoint() * u).trace().norm() / dim).max(0.0)
}

/// `1 - |Tr(G^† U)| / 2` for SU(2) elements.
pub fn su2_infidelity(target: &Su2, u: &Su2) -> f64 {
    let z = target.a.conj() * u.a + target.b.conj() * u.b;
    (1.0 - z.re.abs()).max(0.0)
}

/// Evolution operator `e^{iγ}|m(τ)><m(0)| + e^{-iγ}|m⊥(τ)><m⊥(0)|` of a state
/// that travels from `start` to `end` accumulating phase `gamma`.
pub fn boundary_unitary(start: BlochPoint, end: BlochPoint, gamma: f64) -> CMatrix {
    boundary_su2(start, end, gamma).to_dmatrix()
}

/// [`boundary_unitary`] as an SU(2) element (the operator has unit determinant).
pub fn boundary_su2(start: BlochPoint, end: BlochPoint, gamma: f64) -> Su2 {
    let (s0, c0) = (0.5 * start.chi).sin_cos();
    let (st, ct) = (0.5 * end.chi).sin_cos();
    let g = C64::from_polar(1.0, gamma);
    let gc = g.conj();
    let a = g * ct * c0 + gc * st * s0 * C64::from_polar(1.0, start.xi - end.xi);
    let b = g * st * c0 * C64::from_polar(1.0, end.xi) - gc * ct * s0 * C64::from_polar(1.0, start.xi);
    Su2 { a, b }
}

/// Boundary operator of a whole path with zero dynamical phase.
pub fn spec_unitary(spec: &TrajectorySpec) -> Result<Su2> {
    Ok(boundary_su2(spec.start(), spec.end(), geometric_phase(spec)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecipe {
    pub condition: ConditionTag,
    pub spec: TrajectorySpec,
    pub free_params: BTreeMap<String, f64>,
    pub target: GateTarget,
    /// Infidelity of the boundary operator of `spec` against `target`.
    pub infidelity: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl GateRecipe {
    fn new(
        condition: ConditionTag,
        spec: TrajectorySpec,
        params: &[(&str, f64)],
        target: &GateTarget,
    ) -> Result<Self> {
        let u = spec_unitary(&spec)?;
        let infidelity = su2_infidelity(&target.su2().expect("single-qubit target"), &u);
        Ok(GateRecipe {
            condition,
            spec,
            free_params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            target: target.clone(),
            infidelity,
            notes: Vec::new(),
        })
    }

    fn checked(self) -> Result<Self> {
        if self.infidelity < GATE_TOLERANCE {
            Ok(self)
        } else {
            Err(Error::SolverFailed { best_infidelity: self.infidelity })
        }
    }

    pub fn ideal_unitary(&self) -> Result<Su2> {
        spec_unitary(&self.spec)
    }

    pub fn pulse(&self, cfg: &SynthesisConfig) -> Result<ControlPulse> {
        synthesize(&self.spec, cfg)
    }

    pub fn duration(&self, cfg: &SynthesisConfig) -> Result<f64> {
        total_duration(&self.spec, cfg)
    }

    /// Infidelity of the propagated synthesized pulse against the target.
    pub fn propagated_infidelity(&self, cfg: &SynthesisConfig) -> Result<f64> {
        let u = propagate_qubit(&self.pulse(cfg)?);
        Ok(su2_infidelity(&self.target.su2().expect("single-qubit target"), &u))
    }

    /// The recipe with every azimuth shifted by `a`, realising `Rz(a) G Rz(a)^†`.
    pub fn rotated(&self, a: f64) -> GateRecipe {
        let mut out = self.clone();
        out.spec = self.spec.rotated(a);
        out.target = self.target.rotated(a);
        out.free_params.insert("azimuth_offset".into(), a);
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Product of the ideal unitaries of recipes applied in order.
pub fn sequence_unitary(recipes: &[GateRecipe]) -> Result<Su2> {
    recipes
        .iter()
        .try_fold(Su2::IDENTITY, |acc, r| Ok(r.ideal_unitary()?.mul(&acc)))
}

/// Back-to-back pulse of a recipe sequence on one common grid.
pub fn sequence_pulse(recipes: &[GateRecipe], cfg: &SynthesisConfig) -> Result<ControlPulse> {
    let specs: Vec<TrajectorySpec> = recipes.iter().map(|r| r.spec.clone()).collect();
    synthesize_sequence(&specs, cfg)
}

fn check_angle(name: &str, chi: f64) -> Result<()> {
    if !(0.0..=PI).contains(&chi) {
        return Err(Error::OutOfRange(format!("{name} = {chi} is outside [0, pi]")));
    }
    Ok(())
}

/// Meridian and end latitude of a condition-(i) recipe, with its `γ'`.
fn condition_i_layout(gate: &GateTarget, chi0: f64) -> Result<(f64, f64, f64)> {
    match gate.label {
        GateLabel::H => Ok((0.0, FRAC_PI_2 - chi0, FRAC_PI_2)),
        GateLabel::Rx { theta } => Ok((-FRAC_PI_2 * theta.signum(), chi0 + theta.abs(), PI)),
        GateLabel::Ry { theta } => Ok((if theta >= 0.0 { 0.0 } else { PI }, chi0 + theta.abs(), PI)),
        _ => Err(Error::InvalidConfig(format!(
            "condition (i) recipes exist for H, Rx and Ry, not {}",
            gate.label
        ))),
    }
}

fn push_longitude(segs: &mut Vec<Segment>, xi: f64, from: f64, to: f64) {
    if from != to {
        segs.push(Segment::longitude(xi, from, to));
    }
}

fn check_end_latitude(chi_tau: f64) -> Result<()> {
    if !(chi_tau > 0.0 && chi_tau <= PI) {
        return Err(Error::OutOfRange(format!(
            "final polar angle {chi_tau} is outside (0, pi]"
        )));
    }
    Ok(())
}

/// Five-segment condition-(i) recipe: up or down a meridian to `chi1`, along
/// the parallel by `Δξ`, across to `chi2`, back along the parallel by `-Δξ`,
/// and down the original meridian to the final latitude.
pub fn build_condition_i(gate: &GateTarget, chi0: f64, chi1: f64, chi2: f64) -> Result<GateRecipe> {
    for (n, v) in [("chi0", chi0), ("chi1", chi1), ("chi2", chi2)] {
        check_angle(n, v)?;
    }
    let (xi0, chi_tau, gp) = condition_i_layout(gate, chi0)?;
    check_end_latitude(chi_tau)?;
    let gap = chi1.cos() - chi2.cos();
    if gap.abs() <= 1e-6 {
        return Err(Error::DegenerateLatitudes { gap: gap.abs() });
    }
    for chi in [chi1, chi2] {
        if chi == 0.0 || chi == PI {
            return Err(Error::DegenerateSegment { chi });
        }
    }
    let dxi = 2.0 * gp / gap;
    let mut segs = Vec::with_capacity(5);
    push_longitude(&mut segs, xi0, chi0, chi1);
    segs.push(Segment::latitude(chi1, xi0, xi0 + dxi));
    segs.push(Segment::longitude(xi0 + dxi, chi1, chi2));
    segs.push(Segment::latitude(chi2, xi0 + dxi, xi0));
    push_longitude(&mut segs, xi0, chi2, chi_tau);
    let spec = TrajectorySpec::new(segs, format!("{} condition i", gate.label))?;
    GateRecipe::new(
        ConditionTag::CondI,
        spec,
        &[("chi0", chi0), ("chi1", chi1), ("chi2", chi2), ("delta_xi", dxi), ("xi0", xi0), ("gamma_prime", gp)],
        gate,
    )?
    .checked()
}

/// Condition-(i) recipe made of full loops around parallels. The latitude of
/// the last loop is solved so that `π Σ n_i cos χ_i` hits the required `γ'`.
pub fn build_condition_i_multiloop(gate: &GateTarget, chi0: f64, loops: &[(f64, u32)]) -> Result<GateRecipe> {
    check_angle("chi0", chi0)?;
    let (xi0, chi_tau, gp) = condition_i_layout(gate, chi0)?;
    check_end_latitude(chi_tau)?;
    let (last, fixed) = loops
        .split_last()
        .ok_or_else(|| Error::InvalidConfig("at least one loop is required".into()))?;
    if loops.iter().any(|&(_, n)| n == 0) {
        return Err(Error::InvalidConfig("loop counts must be positive".into()));
    }
    for &(chi, _) in fixed {
        check_angle("loop latitude", chi)?;
    }
    let partial: f64 = fixed.iter().map(|&(chi, n)| n as f64 * chi.cos()).sum();
    let cos_last = (gp / PI - partial) / last.1 as f64;
    if !(cos_last.abs() < 1.0) {
        return Err(Error::Unsolvable(format!(
            "last loop would need cos(chi) = {cos_last:.6}"
        )));
    }
    let mut latitudes: Vec<(f64, u32)> = fixed.to_vec();
    latitudes.push((cos_last.acos(), last.1));

    let mut segs = Vec::new();
    let mut xi = xi0;
    let mut chi = chi0;
    for &(c, n) in &latitudes {
        if c == 0.0 || c == PI {
            return Err(Error::DegenerateSegment { chi: c });
        }
        push_longitude(&mut segs, xi, chi, c);
        let next = xi + 2.0 * PI * n as f64;
        segs.push(Segment::latitude(c, xi, next));
        xi = next;
        chi = c;
    }
    push_longitude(&mut segs, xi, chi, chi_tau);
    let spec = TrajectorySpec::new(segs, format!("{} condition i, multi-loop", gate.label))?;
    let mut params = vec![("chi0", chi0), ("gamma_prime", gp), ("xi0", xi0)];
    let names: Vec<String> = (0..latitudes.len()).map(|i| format!("chi_{}", i + 1)).collect();
    let counts: Vec<String> = (0..latitudes.len()).map(|i| format!("n_{}", i + 1)).collect();
    for (i, &(c, n)) in latitudes.iter().enumerate() {
        params.push((names[i].as_str(), c));
        params.push((counts[i].as_str(), n as f64));
    }
    GateRecipe::new(ConditionTag::CondI, spec, &params, gate)?.checked()
}

/// Margin kept between solver latitudes and the poles.
const POLE_MARGIN: f64 = 0.01;
const SOLVER_STARTS: usize = 48;
const SOLVER_SEED: u64 = 0x5eed_0001;

fn out_of_box(x: &[f64], bounds: &[(f64, f64)]) -> f64 {
    x.iter()
        .zip(bounds)
        .map(|(v, &(lo, hi))| (lo - v).max(0.0) + (v - hi).max(0.0))
        .sum()
}

/// Distance of `x` from the nearest multiple of 2π.
fn winding_residual(x: f64) -> f64 {
    (x - 2.0 * PI * (x / (2.0 * PI)).round()).abs()
}

/// Pick the shortest converged candidate; durations are compared at unit
/// peak control, which preserves their order for any `omega_max`.
fn shortest(candidates: Vec<GateRecipe>) -> Option<GateRecipe> {
    let unit = SynthesisConfig::new(1.0).with_samples(64);
    candidates
        .into_iter()
        .filter_map(|r| r.duration(&unit).ok().map(|d| (d, r)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| r)
}

/// Condition-(ii) recipe: meridian from `χ` to `χ1`, parallel over `Δξ`,
/// meridian back to `χ`. `(χ, χ1, ξ0, Δξ)` are found by multistart search.
pub fn build_condition_ii(gate: &GateTarget, seed_params: Option<[f64; 4]>) -> Result<GateRecipe> {
    let target = gate
        .su2()
        .ok_or_else(|| Error::InvalidConfig("condition (ii) recipes are single-qubit".into()))?;
    let identity_like = su2_infidelity(&target, &Su2::IDENTITY) < GATE_TOLERANCE;
    let bounds = [
        (POLE_MARGIN, PI - POLE_MARGIN),
        (POLE_MARGIN, PI - POLE_MARGIN),
        (-PI, PI),
        (-4.0 * PI, 4.0 * PI),
    ];
    let objective = |x: &[f64]| -> f64 {
        let outside = out_of_box(x, &bounds);
        if outside > 0.0 {
            return 1.0 + outside;
        }
        let u = boundary_su2(
            BlochPoint::new(x[0], x[2]),
            BlochPoint::new(x[0], x[2] + x[3]),
            -0.5 * x[3] * (1.0 - x[1].cos()),
        );
        su2_infidelity(&target, &u)
    };
    let seeds: Vec<Vec<f64>> = seed_params.iter().map(|s| s.to_vec()).collect();
    let starts = start_points(&bounds, SOLVER_STARTS, SOLVER_SEED, &seeds);
    let minima = multistart(&objective, &starts, &[0.3, 0.3, 0.5, 1.0], &NelderMeadOptions::default());

    let mut best_seen = f64::INFINITY;
    let mut candidates = Vec::new();
    for m in minima {
        best_seen = best_seen.min(m.f);
        let [chi, chi1, xi0, dxi] = [m.x[0], m.x[1], m.x[2], m.x[3]];
        if m.f >= GATE_TOLERANCE || (chi - chi1).abs() < 1e-6 || dxi.abs() < 1e-6 {
            continue;
        }
        if !identity_like && winding_residual(dxi) < 1e-6 {
            continue;
        }
        let segs = vec![
            Segment::longitude(xi0, chi, chi1),
            Segment::latitude(chi1, xi0, xi0 + dxi),
            Segment::longitude(xi0 + dxi, chi1, chi),
        ];
        let Ok(spec) = TrajectorySpec::new(segs, format!("{} condition ii", gate.label)) else {
            continue;
        };
        let Ok(condition) = classify(&spec) else { continue };
        let params = [
            ("chi", chi),
            ("chi1", chi1),
            ("xi0", xi0),
            ("delta_xi", dxi),
            ("gamma_prime", 0.5 * dxi * chi1.cos()),
        ];
        if let Ok(r) = GateRecipe::new(condition, spec, &params, gate) {
            if r.infidelity < GATE_TOLERANCE {
                candidates.push(r);
            }
        }
    }
    shortest(candidates).ok_or(Error::SolverFailed { best_infidelity: best_seen })
}

/// Condition-(iii) recipe: up the meridian `ξ0` from `chi0` to the north pole,
/// then down the meridian `ξ1` to `χ1`. For rotations about x or y the end
/// latitude is `chi0 + θ`; otherwise it is solved together with the azimuths.
pub fn build_condition_iii(gate: &GateTarget, chi0: f64) -> Result<GateRecipe> {
    if !(chi0 > 0.0 && chi0 <= PI) {
        return Err(Error::OutOfRange(format!("chi0 = {chi0} must lie in (0, pi]")));
    }
    let target = gate
        .su2()
        .ok_or_else(|| Error::InvalidConfig("condition (iii) recipes are single-qubit".into()))?;
    let fixed_end = match gate.label {
        GateLabel::Rx { theta } | GateLabel::Ry { theta } => {
            let chi1 = chi0 + theta;
            if !(chi1 > 0.0 && chi1 <= PI) {
                return Err(Error::OutOfRange(format!("chi0 + theta = {chi1} is outside (0, pi]")));
            }
            Some(chi1)
        }
        _ => None,
    };
    // Published settings, tried first and reported when they miss the target.
    let published: Vec<(Vec<f64>, &str)> = match gate.label {
        GateLabel::H => vec![(vec![PI, 0.0, FRAC_PI_2 / 2.0], "published setting {pi/4, pi, 0, pi/4}")],
        GateLabel::Ry { .. } => vec![(vec![-PI, PI], "published setting {chi0, -pi, pi, chi1}")],
        _ => vec![],
    };

    let chi1_of = |x: &[f64]| fixed_end.unwrap_or_else(|| x[2]);
    let unitary = |x: &[f64]| {
        boundary_su2(BlochPoint::new(chi0, x[0]), BlochPoint::new(chi1_of(x), x[1]), 0.0)
    };
    let mut bounds = vec![(-PI, PI), (-PI, PI)];
    if fixed_end.is_none() {
        bounds.push((POLE_MARGIN, PI));
    }
    let objective = |x: &[f64]| -> f64 {
        let outside = out_of_box(x, &bounds);
        if outside > 0.0 && x.len() == 3 {
            return 1.0 + outside;
        }
        su2_infidelity(&target, &unitary(x))
    };

    let mut notes = Vec::new();
    for (x, what) in &published {
        let f = objective(x);
        if f >= GATE_TOLERANCE {
            let msg = format!("{what} gives infidelity {f:.3e} for {}; re-solved", gate.label);
            log::warn!("{msg}");
            notes.push(msg);
        }
    }
    let seeds: Vec<Vec<f64>> = published.iter().map(|(x, _)| x.clone()).collect();
    let starts = start_points(&bounds, SOLVER_STARTS, SOLVER_SEED, &seeds);
    let step: Vec<f64> = bounds.iter().map(|_| 0.4).collect();
    let minima = multistart(&objective, &starts, &step, &NelderMeadOptions::default());

    let mut best_seen = f64::INFINITY;
    let mut candidates = Vec::new();
    for m in minima {
        best_seen = best_seen.min(m.f);
        if m.f >= GATE_TOLERANCE {
            continue;
        }
        let (xi0, xi1, chi1) = (m.x[0], m.x[1], chi1_of(&m.x));
        if !(chi1 > 0.0 && chi1 <= PI) {
            continue;
        }
        let segs = vec![Segment::longitude(xi0, chi0, 0.0), Segment::longitude(xi1, 0.0, chi1)];
        let Ok(spec) = TrajectorySpec::new(segs, format!("{} condition iii", gate.label)) else {
            continue;
        };
        let params = [("chi0", chi0), ("xi0", xi0), ("xi1", xi1), ("chi1", chi1)];
        if let Ok(mut r) = GateRecipe::new(ConditionTag::CondIII, spec, &params, gate) {
            if r.infidelity < GATE_TOLERANCE {
                if classify(&r.spec)? != ConditionTag::CondIII {
                    r.notes.push("end azimuth coincides with the start azimuth modulo 2pi".into());
                }
                candidates.push(r);
            }
        }
    }
    let mut recipe = shortest(candidates).ok_or(Error::SolverFailed { best_infidelity: best_seen })?;
    recipe.notes.extend(notes);
    Ok(recipe)
}

/// Rotation axis (as a Bloch point) and angle of a single-qubit target.
fn axis_and_angle(gate: &GateTarget) -> Result<(BlochPoint, f64)> {
    match gate.label {
        GateLabel::Rx { theta } => Ok((BlochPoint::new(FRAC_PI_2, 0.0), theta)),
        GateLabel::Ry { theta } => Ok((BlochPoint::new(FRAC_PI_2, FRAC_PI_2), theta)),
        GateLabel::Rz { theta } => Ok((BlochPoint::north(), theta)),
        GateLabel::H => Ok((BlochPoint::new(PI / 4.0, 0.0), PI)),
        _ => Err(Error::InvalidConfig(format!("no rotation axis known for {}", gate.label))),
    }
}

/// Cyclic orange-slice recipe. The loop starts and ends on the rotation axis
/// and runs over the north pole, down to the south pole along a meridian
/// turned by `Δξ = -θ/2`, and back; the loop phase `Δξ` turns the state by `θ`
/// about the axis.
pub fn build_cyclic_geometric(gate: &GateTarget) -> Result<GateRecipe> {
    let (p, theta) = axis_and_angle(gate)?;
    let dxi = -0.5 * theta;
    let mut segs = Vec::with_capacity(3);
    if p.chi != 0.0 {
        segs.push(Segment::longitude(p.xi, p.chi, 0.0));
    }
    segs.push(Segment::longitude(p.xi + dxi, 0.0, PI));
    segs.push(Segment::longitude(p.xi, PI, p.chi));
    let spec = TrajectorySpec::new(segs, format!("{} cyclic orange slice", gate.label))?;
    GateRecipe::new(
        ConditionTag::Cyclic,
        spec,
        &[("axis_chi", p.chi), ("axis_xi", p.xi), ("delta_xi", dxi)],
        gate,
    )?
    .checked()
}

/// Resonant sin-envelope pulses `(area, phase)` realising `gate` as a
/// dynamical Rabi sequence.
fn rabi_pieces(gate: &GateTarget) -> Result<Vec<(f64, f64)>> {
    let signed = |theta: f64, phase: f64| {
        if theta >= 0.0 {
            (theta, phase)
        } else {
            (-theta, phase + PI)
        }
    };
    match gate.label {
        GateLabel::Rx { theta } => Ok(vec![signed(theta, 0.0)]),
        GateLabel::Ry { theta } => Ok(vec![signed(theta, FRAC_PI_2)]),
        GateLabel::Rz { theta } => Ok(vec![(PI, 0.0), (PI, 0.5 * theta)]),
        GateLabel::H => Ok(vec![(FRAC_PI_2, FRAC_PI_2), (PI, 0.0)]),
        _ => Err(Error::InvalidConfig(format!("no Rabi sequence for {}", gate.label))),
    }
}

/// Dynamical Rabi baseline: resonant constant-phase sin-envelope pulses with
/// peak `cfg.omega_max`, the longest piece sampled `cfg.samples_per_segment`
/// times.
pub fn build_dynamical_rabi(gate: &GateTarget, cfg: &SynthesisConfig) -> Result<ControlPulse> {
    cfg.validate()?;
    let pieces: Vec<(f64, f64)> = rabi_pieces(gate)?.into_iter().filter(|p| p.0 > 0.0).collect();
    let durations: Vec<f64> = pieces.iter().map(|(a, _)| 0.5 * PI * a / cfg.omega_max).collect();
    let longest = durations.iter().cloned().fold(0.0, f64::max);
    let dt = if longest > 0.0 {
        longest / cfg.samples_per_segment as f64
    } else {
        0.5 * PI / cfg.omega_max / cfg.samples_per_segment as f64
    };
    let mut pulse = ControlPulse::idle(dt, 0);
    for ((area, phase), tau) in pieces.iter().zip(&durations) {
        let n = ((tau / dt - 1e-9).ceil() as usize).max(2);
        let shape: Vec<f64> = (0..n).map(|k| (PI * (k as f64 + 0.5) / n as f64).sin()).collect();
        let norm: f64 = shape.iter().sum::<f64>() * dt;
        let piece = ControlPulse {
            t0: 0.0,
            dt,
            n,
            omega: shape.iter().map(|s| area * s / norm).collect(),
            phi: vec![*phase; n],
            delta: vec![0.0; n],
            meta: PulseMeta::default(),
        };
        pulse = pulse.concat(&piece)?;
    }
    if pulse.n == 0 {
        pulse = ControlPulse::idle(dt, 1);
    }
    pulse.meta = PulseMeta {
        source: format!("{} dynamical Rabi", gate.label),
        omega_max: cfg.omega_max,
        ..PulseMeta::default()
    };
    if cfg.drag.enabled {
        pulse = crate::synthesis::drag_correct(&pulse, cfg.drag.alpha, cfg.drag.lambda);
    }
    Ok(pulse)
}

/// `Rz(θ)` as two π rotations about equatorial axes whose azimuths differ by
/// `θ/2`, each built with the requested construction.
pub fn compose_rz(theta: f64, condition: ConditionTag) -> Result<Vec<GateRecipe>> {
    if !(theta.abs() < 2.0 * PI) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in (-2pi, 2pi)")));
    }
    let x = GateTarget::rx(PI);
    let base = match condition {
        ConditionTag::CondI => build_condition_i(&x, 0.0, 0.64 * PI, 0.35 * PI)?,
        ConditionTag::CondII => build_condition_ii(&x, None)?,
        ConditionTag::CondIII => build_condition_iii(&x, 0.0)?,
        ConditionTag::Cyclic => build_cyclic_geometric(&x)?,
    };
    compose_rz_from(&base, theta)
}

/// As [`compose_rz`] from an explicit π-rotation recipe.
pub fn compose_rz_from(base: &GateRecipe, theta: f64) -> Result<Vec<GateRecipe>> {
    let seq = vec![base.rotated(0.0), base.rotated(0.5 * theta)];
    let u = sequence_unitary(&seq)?;
    let target = GateTarget::rz(theta);
    let inf = su2_infidelity(&target.su2().expect("single qubit"), &u);
    if inf >= GATE_TOLERANCE {
        return Err(Error::SolverFailed { best_infidelity: inf });
    }
    Ok(seq)
}

/// Shift every drive phase by `theta`; the new pulse realises
/// `Rz(θ) U Rz(θ)^†` where `U` is the original evolution.
pub fn virtual_z(theta: f64, pulse: &ControlPulse) -> ControlPulse {
    let mut out = pulse.clone();
    for p in &mut out.phi {
        *p += theta;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, pauli_x, phase_invariant_distance, unitarity_defect};

    fn close(a: &CMatrix, b: &CMatrix) -> bool {
        max_abs_diff(a, b) < 1e-12
    }

    #[test]
    fn targets_are_unitary() {
        for g in [GateTarget::h(), GateTarget::rx(0.3), GateTarget::ry(-1.0), GateTarget::rz(2.0), GateTarget::iswap()] {
            assert!(unitarity_defect(&g.matrix) < 1e-12);
        }
        assert!(close(&GateTarget::rx(PI).matrix, &(pauli_x() * (-I))));
    }

    #[test]
    fn parse_gates() {
        assert_eq!(GateTarget::parse("h").unwrap().label, GateLabel::H);
        assert_eq!(GateTarget::parse("rx:pi").unwrap().label, GateLabel::Rx { theta: PI });
        assert_eq!(GateTarget::parse("RZ:pi/4").unwrap().label, GateLabel::Rz { theta: PI / 4.0 });
        assert!(GateTarget::parse("rx").is_err());
        assert!(GateTarget::parse("cnot").is_err());
    }

    #[test]
    fn boundary_examples() {
        let id = boundary_unitary(BlochPoint::new(0.7, 0.2), BlochPoint::new(0.7, 0.2), 0.0);
        assert!(close(&id, &CMatrix::identity(2, 2)));
        let ih = boundary_unitary(BlochPoint::new(0.0, 0.0), BlochPoint::new(FRAC_PI_2, 0.0), FRAC_PI_2);
        assert!(close(&ih, &(GateTarget::h().matrix * I)));
        let mx = boundary_unitary(BlochPoint::new(0.0, -FRAC_PI_2), BlochPoint::new(PI, -FRAC_PI_2), PI);
        assert!(close(&mx, &(GateTarget::rx(PI).matrix * C64::from(-1.0))));
    }

    #[test]
    fn condition_i_targets() {
        let h = build_condition_i(&GateTarget::h(), 0.0, 0.02 * PI, 0.48 * PI).unwrap();
        assert!(h.infidelity < 1e-12);
        assert!((crate::trajectory::gamma_prime(&h.spec).unwrap() - FRAC_PI_2).abs() < 1e-12);
        let x = build_condition_i(&GateTarget::rx(PI), 0.0, 0.64 * PI, 0.35 * PI).unwrap();
        assert!(x.infidelity < 1e-12);
        let y = build_condition_i(&GateTarget::ry(PI / 3.0), 0.2, 0.9, 2.1).unwrap();
        assert!(y.infidelity < 1e-12);
        assert!(matches!(
            build_condition_i(&GateTarget::rx(PI), 0.0, 1.0, 1.0),
            Err(Error::DegenerateLatitudes { .. })
        ));
        assert!(matches!(
            build_condition_i(&GateTarget::rx(PI), 0.5, 1.0, 2.0),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn swapped_latitudes_same_gate() {
        let g = GateTarget::rx(PI / 2.0);
        let a = build_condition_i(&g, 0.1, 0.7, 2.2).unwrap();
        let b = build_condition_i(&g, 0.1, 2.2, 0.7).unwrap();
        assert!((a.free_params["delta_xi"] + b.free_params["delta_xi"]).abs() < 1e-12);
        let ua = a.ideal_unitary().unwrap().to_dmatrix();
        let ub = b.ideal_unitary().unwrap().to_dmatrix();
        assert!(phase_invariant_distance(&ua, &ub) < 1e-12);
    }

    #[test]
    fn multiloop_examples() {
        let r = build_condition_i_multiloop(&GateTarget::h(), 0.0, &[(1.0, 1)]).unwrap();
        assert!((r.free_params["chi_1"] - 0.5f64.acos()).abs() < 1e-12);
        assert!((crate::trajectory::gamma_prime(&r.spec).unwrap() - FRAC_PI_2).abs() < 1e-10);
        let two = build_condition_i_multiloop(&GateTarget::rx(PI), 0.0, &[(0.4, 1), (2.0, 2)]).unwrap();
        let c: f64 = [(two.free_params["chi_1"], 1.0), (two.free_params["chi_2"], 2.0)]
            .iter()
            .map(|(c, n)| n * c.cos())
            .sum();
        assert!((PI * c - PI).abs() < 1e-10);
        assert!(matches!(
            build_condition_i_multiloop(&GateTarget::rx(PI), 0.0, &[(2.9, 1), (0.2, 1)]),
            Err(Error::Unsolvable(_))
        ));
    }

    #[test]
    fn condition_ii_rx() {
        let r = build_condition_ii(&GateTarget::rx(PI / 2.0), None).unwrap();
        assert!(r.infidelity < GATE_TOLERANCE);
        assert_eq!(r.condition, ConditionTag::CondII);
    }

    #[test]
    fn condition_iii_rx_and_range() {
        let r = build_condition_iii(&GateTarget::rx(PI / 2.0), 0.3).unwrap();
        assert!(r.infidelity < GATE_TOLERANCE);
        assert!(matches!(build_condition_iii(&GateTarget::rx(1.0), 0.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn cyclic_rz_slice_width() {
        let r = build_cyclic_geometric(&GateTarget::rz(PI / 4.0)).unwrap();
        assert!((r.free_params["delta_xi"].abs() - PI / 8.0).abs() < 1e-15);
        assert_eq!(classify(&r.spec).unwrap(), ConditionTag::Cyclic);
        assert!(r.infidelity < 1e-12);
    }

    #[test]
    fn compose_rz_products() {
        for theta in [PI / 4.0, 0.0, PI, -1.0] {
            let seq = compose_rz(theta, ConditionTag::CondI).unwrap();
            let u = sequence_unitary(&seq).unwrap();
            assert!(su2_infidelity(&GateTarget::rz(theta).su2().unwrap(), &u) < 1e-12);
        }
    }

    #[test]
    fn virtual_z_round_trip() {
        let cfg = SynthesisConfig::new(10.0).with_samples(64);
        let p = build_dynamical_rabi(&GateTarget::rx(PI), &cfg).unwrap();
        assert_eq!(virtual_z(0.0, &p), p);
        let back = virtual_z(-0.4, &virtual_z(0.4, &p));
        assert!(back.phi.iter().zip(&p.phi).all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
