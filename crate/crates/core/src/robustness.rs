//! Quasi-static error injection, gate fidelity metrics, fidelity landscapes
//! over trajectory and error parameters, and the transmon state-averaged
//! fidelity pipeline.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{lindblad_propagate_many, propagate_qubit_with, DensityMatrix, DeviceParams};
use crate::error::{Error, Result};
use crate::gates::{
    build_condition_i, build_condition_ii, build_condition_iii, build_cyclic_geometric, build_dynamical_rabi,
    compose_rz_from, gate_infidelity, sequence_pulse, GateLabel, GateRecipe, GateTarget,
};
use crate::linalg::{kron, su2_overlap, CMatrix, Su2, Vec3, C64};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::synthesis::{ControlPulse, SynthesisConfig};

pub const DEFAULT_ENSEMBLE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Fixed unit vector.
    Explicit([f64; 3]),
    /// Average over a quasi-uniform ensemble of directions.
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Systematic strength relative to the peak control.
    pub lambda_rel: f64,
    pub direction: Direction,
    /// ZZ strength relative to the peak control.
    pub zeta_rel: f64,
    pub ensemble_size: usize,
    pub seed: u64,
}

impl ErrorModel {
    pub fn new(lambda_rel: f64, zeta_rel: f64, seed: u64) -> Self {
        ErrorModel {
            lambda_rel,
            direction: Direction::Ensemble,
            zeta_rel,
            ensemble_size: DEFAULT_ENSEMBLE,
            seed,
        }
    }

    pub fn ideal() -> Self {
        Self::new(0.0, 0.0, 0)
    }

    pub fn with_direction(mut self, n: [f64; 3]) -> Self {
        self.direction = Direction::Explicit(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_rel >= 0.0 && self.zeta_rel >= 0.0) {
            return Err(Error::InvalidConfig("error strengths must be non-negative".into()));
        }
        if let Direction::Explicit(n) = self.direction {
            if (crate::linalg::norm(n) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig("error direction must be a unit vector".into()));
            }
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidConfig("ensemble size must be positive".into()));
        }
        Ok(())
    }

    /// Directions the fidelity is averaged over.
    pub fn directions(&self) -> Vec<Vec3> {
        match self.direction {
            Direction::Explicit(n) => vec![n],
            Direction::Ensemble => direction_ensemble(self.ensemble_size, self.seed),
        }
    }
}

/// `K` quasi-uniform unit vectors: a Fibonacci lattice turned by a random
/// rotation drawn from `seed`.
pub fn direction_ensemble(k: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // uniform random unit quaternion
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    ];
    let (w, x, y, z) = (q[3], q[0], q[1], q[2]);
    let rot = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let zc = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
            let r = (1.0 - zc * zc).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            let v = [r * c, r * s, zc];
            let mut out = [0.0; 3];
            for (row, o) in rot.iter().zip(out.iter_mut()) {
                *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
            }
            let n = crate::linalg::norm(out);
            [out[0] / n, out[1] / n, out[2] / n]
        })
        .collect()
}

/// `|Tr(U_ideal^† U_err)| / dim`.
pub fn trace_fidelity(u_ideal: &CMatrix, u_err: &CMatrix) -> Result<f64> {
    if u_ideal.shape() != u_err.shape() {
        return Err(Error::DimMismatch { expected: u_ideal.nrows(), actual: u_err.nrows() });
    }
    Ok(1.0 - gate_infidelity(u_ideal, u_err))
}

/// Evolution with the static term `lambda_abs n·σ` added to the drive.
pub fn apply_systematic(pulse: &ControlPulse, lambda_abs: f64, n: Vec3) -> Su2 {
    let s = 2.0 * lambda_abs;
    propagate_qubit_with(pulse, [s * n[0], s * n[1], s * n[2]])
}

/// Joint target–spectator evolution with `(ζ/2) σz⊗σz` and an optional
/// systematic term on the target, ordered target ⊗ spectator.
pub fn joint_unitary(pulse: &ControlPulse, lambda_abs: f64, n: Vec3, zeta_abs: f64) -> CMatrix {
    let (plus, minus) = spectator_blocks(pulse, lambda_abs, n, zeta_abs);
    let mut u = CMatrix::zeros(4, 4);
    let (p, m) = (plus.to_dmatrix(), minus.to_dmatrix());
    for i in 0..2 {
        for j in 0..2 {
            u[(2 * i, 2 * j)] = p[(i, j)];
            u[(2 * i + 1, 2 * j + 1)] = m[(i, j)];
        }
    }
    u
}

/// Joint evolution under ZZ coupling alone.
pub fn apply_zz(pulse: &ControlPulse, zeta_abs: f64) -> CMatrix {
    joint_unitary(pulse, 0.0, [0.0, 0.0, 1.0], zeta_abs)
}

/// Target-qubit evolutions with the spectator in `|0>` and `|1>`.
fn spectator_blocks(pulse: &ControlPulse, lambda_abs: f64, n: Vec3, zeta_abs: f64) -> (Su2, Su2) {
    let s = 2.0 * lambda_abs;
    let base = [s * n[0], s * n[1], s * n[2]];
    let plus = propagate_qubit_with(pulse, [base[0], base[1], base[2] + zeta_abs]);
    if zeta_abs == 0.0 {
        return (plus, plus);
    }
    let minus = propagate_qubit_with(pulse, [base[0], base[1], base[2] - zeta_abs]);
    (plus, minus)
}

/// Joint-space fidelity `|Tr(U^† U+) + Tr(U^† U-)| / 4` for one direction.
fn joint_fidelity(ideal: &Su2, pulse: &ControlPulse, lambda_abs: f64, n: Vec3, zeta_abs: f64) -> f64 {
    let (plus, minus) = spectator_blocks(pulse, lambda_abs, n, zeta_abs);
    ((su2_overlap(ideal, &plus) + su2_overlap(ideal, &minus)).norm() / 4.0).min(1.0)
}

fn combined_over(ideal: &Su2, pulse: &ControlPulse, em: &ErrorModel, dirs: &[Vec3], omega_max: f64) -> f64 {
    let (lambda, zeta) = (em.lambda_rel * omega_max, em.zeta_rel * omega_max);
    if lambda == 0.0 {
        return joint_fidelity(ideal, pulse, 0.0, [0.0, 0.0, 1.0], zeta);
    }
    dirs.iter().map(|&n| joint_fidelity(ideal, pulse, lambda, n, zeta)).sum::<f64>() / dirs.len() as f64
}

/// Direction-averaged joint fidelity of `pulse` against `gate` under the
/// systematic and ZZ errors of `em`.
pub fn combined_fidelity(pulse: &ControlPulse, gate: &GateTarget, em: &ErrorModel, omega_max: f64) -> Result<f64> {
    em.validate()?;
    let ideal = gate
        .su2()
        .ok_or_else(|| Error::InvalidConfig("combined errors apply to single-qubit gates".into()))?;
    Ok(combined_over(&ideal, pulse, em, &em.directions(), omega_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// Cell centres `lo + (i + 1/2)(hi - lo)/n`.
    pub fn centred(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        let step = (hi - lo) / n as f64;
        Axis { name: name.into(), values: (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect() }
    }

    /// `n` points from `lo` to `hi` inclusive.
    pub fn linspace(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        let values = if n == 1 {
            vec![lo]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        Axis { name: name.into(), values }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridManifest {
    pub scheme: String,
    pub gate: String,
    pub error_model: Option<ErrorModel>,
    pub omega_max: f64,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl GridManifest {
    pub fn new(scheme: &str, gate: &str, error_model: Option<ErrorModel>, omega_max: f64) -> Self {
        GridManifest {
            scheme: scheme.into(),
            gate: gate.into(),
            seeds: error_model.iter().map(|e| e.seed).collect(),
            error_model,
            omega_max,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            extra: BTreeMap::new(),
        }
    }
}

/// Rectangular fidelity landscape; `fidelity[i][j]` belongs to
/// `(axis1.values[i], axis2.values[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    pub fidelity: Vec<Vec<f64>>,
    pub manifest: GridManifest,
}

impl FidelityGrid {
    pub fn validate(&self) -> Result<()> {
        if self.fidelity.len() != self.axis1.values.len()
            || self.fidelity.iter().any(|r| r.len() != self.axis2.values.len())
        {
            return Err(Error::InvalidConfig("grid shape does not match its axes".into()));
        }
        if self.fidelity.iter().flatten().any(|f| !(0.0..=1.0 + 1e-12).contains(f)) {
            return Err(Error::InvalidConfig("fidelity outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Best cell; ties go to the smaller `axis1 + axis2`, then smaller `axis1`.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.fidelity.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                let better = if f != best.2 {
                    f > best.2
                } else {
                    let (a, b) = (&self.axis1.values, &self.axis2.values);
                    let (s_new, s_old) = (a[i] + b[j], a[best.0] + b[best.1]);
                    s_new < s_old || (s_new == s_old && a[i] < a[best.0])
                };
                if better {
                    best = (i, j, f);
                }
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        let n: usize = self.fidelity.iter().map(Vec::len).sum();
        self.fidelity.iter().flatten().sum::<f64>() / n as f64
    }

    pub fn min(&self) -> f64 {
        self.fidelity.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `foo.csv` -> `foo.manifest.json`
    pub fn manifest_path(csv: &Path) -> PathBuf {
        csv.with_extension("manifest.json")
    }

    /// Write the CSV (17 significant digits) and its sibling manifest.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut out = Vec::new();
        writeln!(out, "axis1,axis2,fidelity")?;
        for (i, row) in self.fidelity.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", self.axis1.values[i], self.axis2.values[j], f)?;
            }
        }
        std::fs::write(path, out)?;
        let mut manifest = serde_json::to_value(&self.manifest)?;
        if let serde_json::Value::Object(m) = &mut manifest {
            m.insert("axis1_name".into(), self.axis1.name.clone().into());
            m.insert("axis2_name".into(), self.axis2.name.clone().into());
        }
        std::fs::write(Self::manifest_path(path), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    /// Read a CSV written by [`FidelityGrid::write_csv`] and its manifest.
    pub fn read_csv(path: &Path) -> Result<FidelityGrid> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("axis1,axis2,fidelity") {
            return Err(Error::InvalidConfig("missing `axis1,axis2,fidelity` header".into()));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cells: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("bad CSV row `{line}`: {e}")))?;
            if cells.len() != 3 {
                return Err(Error::InvalidConfig(format!("bad CSV row `{line}`")));
            }
            rows.push((cells[0], cells[1], cells[2]));
        }
        let mut a1: Vec<f64> = Vec::new();
        let mut a2: Vec<f64> = Vec::new();
        for &(x, y, _) in &rows {
            if !a1.contains(&x) {
                a1.push(x);
            }
            if a1.len() == 1 && !a2.contains(&y) {
                a2.push(y);
            }
        }
        if rows.len() != a1.len() * a2.len() || a1.is_empty() {
            return Err(Error::InvalidConfig("CSV is not a rectangular grid".into()));
        }
        let fidelity: Vec<Vec<f64>> = rows.chunks(a2.len()).map(|c| c.iter().map(|r| r.2).collect()).collect();
        let manifest_path = Self::manifest_path(path);
        let (manifest, n1, n2) = if manifest_path.exists() {
            let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
            let name = |k: &str| v.get(k).and_then(|s| s.as_str()).unwrap_or(k).to_string();
            let (n1, n2) = (name("axis1_name"), name("axis2_name"));
            (serde_json::from_value(v)?, n1, n2)
        } else {
            (GridManifest::default(), "axis1".into(), "axis2".into())
        };
        let grid = FidelityGrid {
            axis1: Axis { name: n1, values: a1 },
            axis2: Axis { name: n2, values: a2 },
            fidelity,
            manifest,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Evaluate `f` on every cell of the grid, in parallel.
fn evaluate_grid<F>(axis1: &Axis, axis2: &Axis, f: F) -> Vec<Vec<f64>>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let cells: Vec<(usize, usize)> = (0..axis1.values.len())
        .flat_map(|i| (0..axis2.values.len()).map(move |j| (i, j)))
        .collect();
    let vals: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| f(axis1.values[i], axis2.values[j]))
        .collect();
    vals.chunks(axis2.values.len()).map(<[f64]>::to_vec).collect()
}

/// Upper end of the `(χ1, χ2)` search square for a gate.
fn intermediate_span(gate: &GateTarget) -> Result<f64> {
    match gate.label {
        GateLabel::H => Ok(0.5 * PI),
        GateLabel::Rx { .. } | GateLabel::Ry { .. } => Ok(PI),
        _ => Err(Error::InvalidConfig(format!(
            "intermediate sweeps need H, Rx or Ry, not {}",
            gate.label
        ))),
    }
}

/// Fidelity of the condition-(i) recipe with intermediate latitudes
/// `(chi1, chi2)`; degenerate or invalid layouts score zero.
pub fn intermediate_fidelity(
    gate: &GateTarget,
    chi1: f64,
    chi2: f64,
    em: &ErrorModel,
    dirs: &[Vec3],
    cfg: &SynthesisConfig,
) -> f64 {
    let ideal = match gate.su2() {
        Some(u) => u,
        None => return 0.0,
    };
    let pulse = match build_condition_i(gate, 0.0, chi1, chi2).and_then(|r| r.pulse(cfg)) {
        Ok(p) => p,
        Err(_) => return 0.0,
    };
    combined_over(&ideal, &pulse, em, dirs, cfg.omega_max)
}

/// Fidelity landscape over the intermediate latitudes of condition-(i)
/// recipes with `chi0 = 0`.
pub fn sweep_intermediate(gate: &GateTarget, grid_n: usize, em: &ErrorModel, cfg: &SynthesisConfig) -> Result<FidelityGrid> {
    if grid_n < 10 {
        return Err(Error::InvalidConfig("intermediate sweeps need at least a 10x10 grid".into()));
    }
    em.validate()?;
    cfg.validate()?;
    let span = intermediate_span(gate)?;
    let axis1 = Axis::centred("chi1", 0.0, span, grid_n);
    let axis2 = Axis::centred("chi2", 0.0, span, grid_n);
    let dirs = em.directions();
    let fidelity = evaluate_grid(&axis1, &axis2, |c1, c2| intermediate_fidelity(gate, c1, c2, em, &dirs, cfg));
    let mut manifest = GridManifest::new("ngg-i", &gate.label.to_string(), Some(*em), cfg.omega_max);
    manifest.extra.insert("samples_per_segment".into(), cfg.samples_per_segment.into());
    let grid = FidelityGrid { axis1, axis2, fidelity, manifest };
    grid.validate()?;
    Ok(grid)
}

/// Best intermediate latitudes on a `grid_n` grid, optionally refined by a
/// local search confined to the winning cell. Refinement only ever accepts
/// improvements.
pub fn optimize_intermediate(
    gate: &GateTarget,
    em: &ErrorModel,
    grid_n: usize,
    refine: bool,
    cfg: &SynthesisConfig,
) -> Result<(f64, f64, f64)> {
    let grid = sweep_intermediate(gate, grid_n, em, cfg)?;
    let (i, j, f) = grid.argmax();
    let (c1, c2) = (grid.axis1.values[i], grid.axis2.values[j]);
    if !refine {
        return Ok((c1, c2, f));
    }
    let half = 0.5 * intermediate_span(gate)? / grid_n as f64;
    let dirs = em.directions();
    let objective = |x: &[f64]| -> f64 {
        if (x[0] - c1).abs() > half || (x[1] - c2).abs() > half {
            return 1.0;
        }
        -intermediate_fidelity(gate, x[0], x[1], em, &dirs, cfg)
    };
    let opts = NelderMeadOptions { max_evals: 120, f_tol: 1e-12, x_tol: 1e-6, restarts: 0 };
    let m = nelder_mead(&objective, &[c1, c2], &[0.5 * half, 0.5 * half], &opts);
    if -m.f > f {
        Ok((m.x[0], m.x[1], -m.f))
    } else {
        Ok((c1, c2, f))
    }
}

/// Gate constructions compared in error-plane sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "ngg-i")]
    NggI,
    #[serde(rename = "ngg-ii")]
    NggII,
    #[serde(rename = "ngg-iii")]
    NggIII,
    #[serde(rename = "cgg")]
    Cgg,
    #[serde(rename = "drg")]
    Drg,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::NggI, Scheme::NggII, Scheme::NggIII, Scheme::Cgg, Scheme::Drg];

    pub fn parse(text: &str) -> Result<Scheme> {
        match text.to_ascii_lowercase().as_str() {
            "ngg-i" | "i" => Ok(Scheme::NggI),
            "ngg-ii" | "ii" => Ok(Scheme::NggII),
            "ngg-iii" | "iii" => Ok(Scheme::NggIII),
            "cgg" => Ok(Scheme::Cgg),
            "drg" => Ok(Scheme::Drg),
            _ => Err(Error::InvalidConfig(format!("unknown scheme `{text}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::NggI => "ngg-i",
            Scheme::NggII => "ngg-ii",
            Scheme::NggIII => "ngg-iii",
            Scheme::Cgg => "cgg",
            Scheme::Drg => "drg",
        })
    }
}

/// Reference intermediate latitudes for condition-(i) recipes with χ0 = 0,
/// used when a sweep is not given its own.
pub fn reference_intermediate(gate: &GateTarget) -> Option<(f64, f64)> {
    match gate.label {
        GateLabel::H => Some((0.02 * PI, 0.48 * PI)),
        GateLabel::Rx { .. } | GateLabel::Ry { .. } | GateLabel::Rz { .. } => Some((0.64 * PI, 0.35 * PI)),
        _ => None,
    }
}

/// Start latitude used for condition-(iii) recipes in comparisons. Hadamard
/// targets need a start on or below the equator to be reachable.
pub fn condition_iii_start(gate: &GateTarget) -> f64 {
    match gate.label {
        GateLabel::H => 0.75 * PI,
        _ => 0.25 * PI,
    }
}

/// The pulse a scheme uses for `gate`. Rz under the noncyclic schemes is the
/// composition of two π rotations.
pub fn scheme_pulse(
    scheme: Scheme,
    gate: &GateTarget,
    cfg: &SynthesisConfig,
    intermediate: Option<(f64, f64)>,
) -> Result<ControlPulse> {
    let rz = match gate.label {
        GateLabel::Rz { theta } => Some(theta),
        _ => None,
    };
    let x = GateTarget::rx(PI);
    let recipe_for = |g: &GateTarget| -> Result<GateRecipe> {
        match scheme {
            Scheme::NggI => {
                let (c1, c2) = intermediate
                    .or_else(|| reference_intermediate(g))
                    .ok_or_else(|| Error::InvalidConfig(format!("no intermediate latitudes for {}", g.label)))?;
                build_condition_i(g, 0.0, c1, c2)
            }
            Scheme::NggII => build_condition_ii(g, None),
            Scheme::NggIII => {
                if let GateLabel::Rx { theta } | GateLabel::Ry { theta } = g.label {
                    if theta.abs() >= PI {
                        // the end latitude chi0 + θ would need a start on the pole
                        return Err(Error::OutOfRange(format!("condition (iii) cannot realise {}", g.label)));
                    }
                }
                build_condition_iii(g, condition_iii_start(g))
            }
            Scheme::Cgg => build_cyclic_geometric(g),
            Scheme::Drg => unreachable!("handled below"),
        }
    };
    if scheme == Scheme::Drg {
        return build_dynamical_rabi(gate, cfg);
    }
    if scheme == Scheme::Cgg {
        return recipe_for(gate)?.pulse(cfg);
    }
    match rz {
        Some(theta) => {
            let base = recipe_for(&x)?;
            sequence_pulse(&compose_rz_from(&base, theta)?, cfg)
        }
        None => recipe_for(gate)?.pulse(cfg),
    }
}

/// Fidelity over the `(λ/Ω_m, ζ/Ω_m)` plane for one scheme. The grid
/// includes both range ends.
#[allow(clippy::too_many_arguments)]
pub fn sweep_errors(
    scheme: Scheme,
    gate: &GateTarget,
    lambda_range: (f64, f64),
    zeta_range: (f64, f64),
    grid_n: usize,
    seed: u64,
    cfg: &SynthesisConfig,
    intermediate: Option<(f64, f64)>,
) -> Result<FidelityGrid> {
    for (lo, hi) in [lambda_range, zeta_range] {
        if !(0.0 <= lo && lo <= hi && hi <= 0.2) {
            return Err(Error::InvalidConfig(format!("error range [{lo}, {hi}] must lie within [0, 0.2]")));
        }
    }
    if grid_n == 0 {
        return Err(Error::InvalidConfig("grid must have at least one cell".into()));
    }
    let pulse = scheme_pulse(scheme, gate, cfg, intermediate)?;
    let ideal = gate
        .su2()
        .ok_or_else(|| Error::InvalidConfig("error sweeps apply to single-qubit gates".into()))?;
    let axis1 = Axis::linspace("lambda_rel", lambda_range.0, lambda_range.1, grid_n);
    let axis2 = Axis::linspace("zeta_rel", zeta_range.0, zeta_range.1, grid_n);
    let template = ErrorModel::new(0.0, 0.0, seed);
    let dirs = template.directions();
    let fidelity = evaluate_grid(&axis1, &axis2, |l, z| {
        let em = ErrorModel { lambda_rel: l, zeta_rel: z, ..template };
        combined_over(&ideal, &pulse, &em, &dirs, cfg.omega_max)
    });
    let mut manifest = GridManifest::new(&scheme.to_string(), &gate.label.to_string(), Some(template), cfg.omega_max);
    manifest.extra.insert("gate_duration_us".into(), pulse.duration().into());
    if let (Scheme::NggI, Some((c1, c2))) = (scheme, intermediate.or_else(|| reference_intermediate(gate))) {
        manifest.extra.insert("chi1".into(), c1.into());
        manifest.extra.insert("chi2".into(), c2.into());
    }
    let grid = FidelityGrid { axis1, axis2, fidelity, manifest };
    grid.validate()?;
    Ok(grid)
}

/// Mean of `<ψ_f|ρ|ψ_f>` over `(θ, ρ(θ))` samples, where
/// `ψ_f = U (cos θ|0> + sin θ|1>)` embedded in the ladder.
pub fn avg_state_fidelity(outputs: &[(f64, DensityMatrix)], gate: &GateTarget) -> Result<f64> {
    if gate.dim != 2 {
        return Err(Error::DimMismatch { expected: 2, actual: gate.dim });
    }
    if outputs.is_empty() {
        return Err(Error::InvalidConfig("no output states".into()));
    }
    let mut acc = 0.0;
    for (theta, rho) in outputs {
        let psi = target_state(gate, *theta, rho.dim);
        acc += rho.expectation(&psi);
    }
    Ok(acc / outputs.len() as f64)
}

fn target_state(gate: &GateTarget, theta: f64, dim: usize) -> Vec<C64> {
    let (s, c) = theta.sin_cos();
    let m = &gate.matrix;
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[0] = m[(0, 0)] * c + m[(0, 1)] * s;
    psi[1] = m[(1, 0)] * c + m[(1, 1)] * s;
    psi
}

/// Summary of a transmon simulation of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonReport {
    /// State-averaged fidelity over the input states.
    pub fidelity: f64,
    /// Mean population outside the computational levels after the gate.
    pub leakage: f64,
    pub duration: f64,
    pub states: usize,
}

/// State-averaged fidelity of `pulse` on the transmon over `n_states` inputs
/// `cos θ|0> + sin θ|1>` with `θ` evenly spaced on `[0, 2π)`. The master
/// equation is linear, so three operator propagations cover every input.
pub fn transmon_fidelity(pulse: &ControlPulse, gate: &GateTarget, dev: &DeviceParams, n_states: usize) -> Result<TransmonReport> {
    if n_states == 0 {
        return Err(Error::InvalidConfig("need at least one input state".into()));
    }
    let d = dev.levels;
    let mut e00 = CMatrix::zeros(d, d);
    e00[(0, 0)] = C64::new(1.0, 0.0);
    let mut e11 = CMatrix::zeros(d, d);
    e11[(1, 1)] = C64::new(1.0, 0.0);
    let mut x01 = CMatrix::zeros(d, d);
    x01[(0, 1)] = C64::new(1.0, 0.0);
    x01[(1, 0)] = C64::new(1.0, 0.0);
    let out = lindblad_propagate_many(pulse, dev, &[e00, e11, x01])?;
    let mut outputs = Vec::with_capacity(n_states);
    let mut leak = 0.0;
    for k in 0..n_states {
        let theta = 2.0 * PI * k as f64 / n_states as f64;
        let (s, c) = theta.sin_cos();
        let rho = &out[0] * C64::from(c * c) + &out[1] * C64::from(s * s) + &out[2] * C64::from(c * s);
        leak += (2..d).map(|j| rho[(j, j)].re).sum::<f64>();
        outputs.push((theta, DensityMatrix { dim: d, entries: rho }));
    }
    Ok(TransmonReport {
        fidelity: avg_state_fidelity(&outputs, gate)?,
        leakage: leak / n_states as f64,
        duration: pulse.duration(),
        states: n_states,
    })
}

/// Mean of `|<ψ_f|U|ψ_i>|²` over `n_states` inputs `cos θ|0> + sin θ|1>` for
/// a closed-system propagator `U` on the ladder.
pub fn closed_state_fidelity(u: &CMatrix, gate: &GateTarget, n_states: usize) -> Result<f64> {
    if gate.dim != 2 {
        return Err(Error::DimMismatch { expected: 2, actual: gate.dim });
    }
    if u.nrows() < 2 || n_states == 0 {
        return Err(Error::InvalidConfig("need a ladder propagator and at least one state".into()));
    }
    let d = u.nrows();
    let mut acc = 0.0;
    for k in 0..n_states {
        let theta = 2.0 * PI * k as f64 / n_states as f64;
        let (s, c) = theta.sin_cos();
        let psi_f = target_state(gate, theta, d);
        let amp: C64 = (0..d).map(|i| psi_f[i].conj() * (u[(i, 0)] * c + u[(i, 1)] * s)).sum();
        acc += amp.norm_sqr();
    }
    Ok(acc / n_states as f64)
}

/// Largest useful latitude detuning ratio on a transmon: parallels may be
/// crossed with detunings up to a quarter of the anharmonicity, which keeps
/// the drive well clear of the 1-2 transition.
pub fn transmon_detuning_ratio(dev: &DeviceParams, omega_max: f64) -> f64 {
    (0.25 * dev.alpha.abs() / omega_max).max(1.0)
}

/// Range searched when calibrating the DRAG coefficient.
pub const DRAG_LAMBDA_RANGE: (f64, f64) = (0.0, 1.5);

/// DRAG coefficient that maximises the closed-system state-averaged
/// fidelity of the pulse `build` makes, by golden-section search over
/// [`DRAG_LAMBDA_RANGE`]. Returns the coefficient and that fidelity.
pub fn calibrate_drag<F>(build: F, gate: &GateTarget, dev: &DeviceParams) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<ControlPulse>,
{
    let closed = dev.closed();
    let score = |lambda: f64| -> Result<f64> {
        let u = crate::engine::propagate_transmon(&build(lambda)?, &closed)?;
        closed_state_fidelity(&u, gate, 360)
    };
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = DRAG_LAMBDA_RANGE;
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut f1, mut f2) = (score(x1)?, score(x2)?);
    while b - a > 1e-3 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = score(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = score(x2)?;
        }
    }
    let mid = 0.5 * (a + b);
    let best = [(mid, score(mid)?), (x1, f1), (x2, f2)]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates");
    Ok(best)
}

/// Transmon results for one gate with DRAG off and with calibrated DRAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonGateRun {
    pub gate: String,
    pub omega_max: f64,
    pub detuning_ratio: f64,
    pub intermediate: (f64, f64),
    pub drag_lambda: f64,
    pub drag_on: TransmonReport,
    pub drag_off: TransmonReport,
    /// Closed-system fidelity with DRAG on; isolates leakage and phase errors.
    pub drag_on_closed: TransmonReport,
    /// Two-level open-system fidelity; isolates decoherence.
    pub qubit_only: TransmonReport,
}

/// Simulate the condition-(i) realisation of `gate` (Rz by composition) on
/// the transmon `dev` at peak Rabi frequency `omega_max`.
pub fn transmon_gate_run(
    gate: &GateTarget,
    omega_max: f64,
    dev: &DeviceParams,
    intermediate: (f64, f64),
    n_states: usize,
    samples_per_segment: usize,
) -> Result<TransmonGateRun> {
    dev.validate()?;
    let ratio = transmon_detuning_ratio(dev, omega_max);
    let base = SynthesisConfig::new(omega_max)
        .with_samples(samples_per_segment)
        .with_detuning_ratio(ratio);
    let build = |lambda: Option<f64>| -> Result<ControlPulse> {
        let mut cfg = base;
        if let Some(l) = lambda {
            cfg.drag.enabled = true;
            cfg.drag.lambda = l;
            // the 1-2 transition sits below the 0-1 transition
            cfg.drag.alpha = -dev.alpha.abs();
        }
        scheme_pulse(Scheme::NggI, gate, &cfg, Some(intermediate))
    };
    let (lambda, _) = calibrate_drag(|l| build(Some(l)), gate, dev)?;
    let on = build(Some(lambda))?;
    let off = build(None)?;
    Ok(TransmonGateRun {
        gate: gate.label.to_string(),
        omega_max,
        detuning_ratio: ratio,
        intermediate,
        drag_lambda: lambda,
        drag_on: transmon_fidelity(&on, gate, dev, n_states)?,
        drag_off: transmon_fidelity(&off, gate, dev, n_states)?,
        drag_on_closed: transmon_fidelity(&on, gate, &dev.closed(), n_states)?,
        qubit_only: transmon_fidelity(&on, gate, &DeviceParams { levels: 2, ..*dev }, n_states)?,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidConfig("need at least two matching points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidConfig("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Slope of the direction-averaged infidelity against the systematic error
/// strength over `lambdas` (relative to `omega_max`).
pub fn infidelity_slope(
    pulse: &ControlPulse,
    gate: &GateTarget,
    lambdas: &[f64],
    seed: u64,
    omega_max: f64,
) -> Result<f64> {
    let mut infid = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        infid.push(1.0 - combined_fidelity(pulse, gate, &ErrorModel::new(l, 0.0, seed), omega_max)?);
    }
    loglog_slope(lambdas, &infid)
}

/// `U ⊗ I` on the target–spectator space.
pub fn embed_ideal(u: &CMatrix) -> CMatrix {
    kron(u, &CMatrix::identity(2, 2))
}
