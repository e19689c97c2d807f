//! Two transmons with a parametrically modulated coupler, truncated to the
//! six states `|00>, |01>, |10>, |11>, |02>, |20>`.
//!
//! The modulation `ε cos(νt + φ)` generates Bessel sidebands. Tuning one of
//! them near the `|01> <-> |10>` resonance gives an effective two-level drive
//! on the single-excitation subspace, which a condition-(i) geometric `Rx(π)`
//! path turns into an iSWAP. The remaining sidebands and the `|11>` couplings
//! to the doubly excited states are kept in the full model; they are the
//! leakage and off-resonance channels scanned over `(Δ1, β)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use nalgebra::SMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::bessel_j_unchecked;
use crate::engine::propagate_qubit;
use crate::error::{Error, Result};
use crate::gates::{build_condition_i, GateTarget};
use crate::linalg::{CMatrix, C64, I, ONE, ZERO};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::robustness::{Axis, FidelityGrid, GridManifest};
use crate::synthesis::{ControlPulse, SynthesisConfig};
use crate::units::{de_frequency, khz, mhz};

/// Number of states in the truncated two-transmon basis.
pub const DIM: usize = 6;

/// Labels of the basis states, first digit transmon 1.
pub const BASIS: [&str; DIM] = ["00", "01", "10", "11", "02", "20"];

const S01: usize = 1;
const S10: usize = 2;
const S11: usize = 3;
const S02: usize = 4;
const S20: usize = 5;

/// Edge of the monotone branch of `J1`: its first maximum.
pub const BETA_MAX: f64 = 1.841_183_781_340_659_3;

/// Tolerated loss of sideband weight from truncating the Bessel series.
const TRUNCATION_TOL: f64 = 1e-8;

type M6 = SMatrix<C64, DIM, DIM>;

/// Relaxation and dephasing rates of one transmon, rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    #[serde(default, deserialize_with = "de_frequency")]
    pub kappa_minus: f64,
    #[serde(default, deserialize_with = "de_frequency")]
    pub kappa_z: f64,
}

impl DecayRates {
    pub const NONE: DecayRates = DecayRates { kappa_minus: 0.0, kappa_z: 0.0 };
}

impl Default for DecayRates {
    fn default() -> Self {
        DecayRates { kappa_minus: khz(2.0), kappa_z: khz(2.0) }
    }
}

/// Device and modulation parameters. Frequencies are rad/µs; in config files
/// they may also be written as `"2pi*560MHz"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoQubitParams {
    /// Qubit frequency difference `ω2 - ω1`.
    #[serde(deserialize_with = "de_frequency")]
    pub delta1: f64,
    #[serde(deserialize_with = "de_frequency")]
    pub alpha1: f64,
    #[serde(deserialize_with = "de_frequency")]
    pub alpha2: f64,
    #[serde(deserialize_with = "de_frequency")]
    pub g12: f64,
    /// Modulation frequency.
    #[serde(deserialize_with = "de_frequency")]
    pub nu: f64,
    /// Modulation depth `ε/ν`.
    pub beta: f64,
    #[serde(default)]
    pub varphi: f64,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    #[serde(default = "default_kappas")]
    pub kappas: [DecayRates; 2],
}

fn default_kmax() -> usize {
    7
}

fn default_kappas() -> [DecayRates; 2] {
    [DecayRates::default(); 2]
}

impl Default for TwoQubitParams {
    fn default() -> Self {
        TwoQubitParams {
            delta1: mhz(560.0),
            alpha1: mhz(320.0),
            alpha2: mhz(300.0),
            g12: mhz(8.0),
            nu: mhz(560.0),
            beta: 1.29,
            varphi: 0.0,
            kmax: default_kmax(),
            kappas: default_kappas(),
        }
    }
}

impl TwoQubitParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta1, self.alpha1, self.alpha2, self.g12, self.nu, self.beta, self.varphi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("two-qubit parameters must be finite".into()));
        }
        if !(self.g12 > 0.0) {
            return Err(Error::InvalidConfig(format!("g12 must be positive, got {}", self.g12)));
        }
        if self.kmax < 1 {
            return Err(Error::InvalidConfig("kmax must be at least 1".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidConfig(format!("beta must be non-negative, got {}", self.beta)));
        }
        for k in &self.kappas {
            if !(k.kappa_minus >= 0.0 && k.kappa_z >= 0.0) {
                return Err(Error::InvalidConfig("decay rates must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Offset `Δt = ν - Δ1` of the modulation from the qubit splitting.
    pub fn target_detuning(&self) -> f64 {
        self.nu - self.delta1
    }

    /// The same device with the decay channels switched off.
    pub fn closed(mut self) -> Self {
        self.kappas = [DecayRates::NONE; 2];
        self
    }

    /// Move the qubit splitting to `delta1` keeping `Δt` fixed.
    pub fn with_delta1(mut self, delta1: f64) -> Self {
        let dt = self.target_detuning();
        self.delta1 = delta1;
        self.nu = delta1 + dt;
        self
    }
}

/// `J_0(β) .. J_kmax(β)`.
fn bessel_table(beta: f64, kmax: usize) -> Vec<f64> {
    (0..=kmax).map(|k| bessel_j_unchecked(k as i32, beta)).collect()
}

/// Weight `Σ_{|k|≤kmax} J_k(β)^2` kept by the truncated series (1 when exact).
pub fn retained_weight(beta: f64, kmax: usize) -> f64 {
    let j = bessel_table(beta, kmax);
    j[0] * j[0] + 2.0 * j[1..].iter().map(|x| x * x).sum::<f64>()
}

fn check_truncation(beta: f64, kmax: usize) -> Result<()> {
    let retained = retained_weight(beta, kmax);
    if retained < 1.0 - TRUNCATION_TOL {
        return Err(Error::Truncation { kmax, retained });
    }
    Ok(())
}

/// Which terms of the modulated Hamiltonian are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Every sideband on all three transitions.
    #[default]
    Full,
    /// Every sideband on `|01> <-> |10>` only; the doubly excited states are
    /// left uncoupled.
    NoLeakage,
    /// Only the resonant `k = -1` sideband on `|01> <-> |10>`.
    Resonant,
}

/// `Σ_k i^k J_k(β) e^{ikθ}` for `|k| ≤ kmax`, from a table of `J_0..J_kmax`.
fn sideband_sum(bessel: &[f64], theta: f64, coupling: Coupling) -> C64 {
    let z = I * C64::from_polar(1.0, theta);
    if coupling == Coupling::Resonant {
        // i^{-1} J_{-1} e^{-iθ} = -J_1 / z
        return -bessel[1] / z;
    }
    let minus_zbar = -z.conj();
    let (mut zp, mut zm) = (ONE, ONE);
    let mut acc = C64::from(bessel[0]);
    for &j in &bessel[1..] {
        zp *= z;
        zm *= minus_zbar;
        acc += (zp + zm) * j;
    }
    acc
}

fn hamiltonian_m6(t: f64, bessel: &[f64], varphi: f64, p: &TwoQubitParams, coupling: Coupling) -> M6 {
    let s = sideband_sum(bessel, p.nu * t + varphi, coupling) * p.g12;
    let mut h = M6::zeros();
    let c01 = s * C64::from_polar(1.0, p.delta1 * t);
    h[(S01, S10)] = c01;
    h[(S10, S01)] = c01.conj();
    if coupling == Coupling::Full {
        let r2 = std::f64::consts::SQRT_2;
        let c02 = s * C64::from_polar(r2, (p.delta1 - p.alpha2) * t);
        h[(S02, S11)] = c02;
        h[(S11, S02)] = c02.conj();
        let c20 = s * C64::from_polar(r2, (p.delta1 + p.alpha1) * t);
        h[(S11, S20)] = c20;
        h[(S20, S11)] = c20.conj();
    }
    h
}

fn to_dynamic(m: &M6) -> CMatrix {
    CMatrix::from_fn(DIM, DIM, |i, j| m[(i, j)])
}

/// The modulated coupling Hamiltonian at time `t` for constant `β` and `φ`.
pub fn modulated_hamiltonian(t: f64, p: &TwoQubitParams) -> Result<CMatrix> {
    p.validate()?;
    check_truncation(p.beta, p.kmax)?;
    let bessel = bessel_table(p.beta, p.kmax);
    Ok(to_dynamic(&hamiltonian_m6(t, &bessel, p.varphi, p, Coupling::Full)))
}

/// Two-level drive seen by the single-excitation subspace `(|01>, |10>)`, in
/// the frame rotating at the effective detuning `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveControls {
    pub omega: f64,
    pub delta: f64,
    /// `φ_e` at `t = 0`.
    pub phase0: f64,
    /// `dφ_e/dt = Δt - Δe`.
    pub phase_rate: f64,
}

impl EffectiveControls {
    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase0 + self.phase_rate * t
    }
}

/// Effective Rabi rate, phase and detuning of the resonant sideband.
pub fn effective_controls(p: &TwoQubitParams, effective_detuning: f64) -> EffectiveControls {
    let dt = p.target_detuning();
    if p.nu != 0.0 && (dt / p.nu).abs() > 0.1 {
        log::warn!(
            "modulation offset {:.3} is not small against nu = {:.3}; the sideband picture is unreliable",
            dt,
            p.nu
        );
    }
    EffectiveControls {
        omega: 2.0 * bessel_j_unchecked(1, p.beta) * p.g12,
        delta: effective_detuning,
        phase0: p.varphi - FRAC_PI_2,
        phase_rate: dt - effective_detuning,
    }
}

/// Largest effective Rabi rate reachable with coupling `g12`.
pub fn max_effective_coupling(g12: f64) -> f64 {
    2.0 * bessel_j_unchecked(1, BETA_MAX) * g12
}

/// Modulation depth on `[0, BETA_MAX]` giving effective Rabi rate `omega`.
pub fn beta_for_coupling(omega: f64, g12: f64) -> Result<f64> {
    if !(g12 > 0.0) || !omega.is_finite() || omega < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cannot invert omega = {omega} with g12 = {g12}"
        )));
    }
    let max = max_effective_coupling(g12);
    if omega > max {
        return Err(Error::Unreachable { requested: omega, max });
    }
    let target = omega / (2.0 * g12);
    let (mut lo, mut hi) = (0.0, BETA_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j_unchecked(1, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the effective `Rx(π)` behind the iSWAP is laid out and sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IswapDesign {
    /// Intermediate latitudes of the condition-(i) path.
    pub chi1: f64,
    pub chi2: f64,
    #[serde(default = "default_design_ratio")]
    pub detuning_ratio: f64,
    #[serde(default = "default_design_spp")]
    pub samples_per_segment: usize,
    /// Requested gate time; when absent the effective drive peaks at the rate
    /// set by the modulation depth.
    #[serde(default)]
    pub duration: Option<f64>,
}

fn default_design_ratio() -> f64 {
    1.0
}

fn default_design_spp() -> usize {
    256
}

impl Default for IswapDesign {
    fn default() -> Self {
        IswapDesign {
            chi1: 0.025 * PI,
            chi2: 0.975 * PI,
            detuning_ratio: default_design_ratio(),
            samples_per_segment: default_design_spp(),
            duration: None,
        }
    }
}

/// Sampled modulation that realises an iSWAP. Within sample `k`, starting at
/// `t_k = k dt`, the depth is `beta_envelope[k]` and the modulation phase is
/// `varphi[k] + (detuning_offset[k] - Δt)(t - t_k)`: the modulation frequency
/// is shifted by the effective detuning of that sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSchedule {
    pub nu: f64,
    pub duration: f64,
    pub dt: f64,
    pub beta_envelope: Vec<f64>,
    pub varphi: Vec<f64>,
    pub detuning_offset: Vec<f64>,
    /// `Δt = ν - Δ1` the schedule was built for.
    pub target_detuning: f64,
    /// Accumulated rotating-frame phase `∫Δe dt`; undone by local Z phases.
    pub frame_phase: f64,
    /// The effective two-level pulse the schedule was mapped from.
    pub effective: ControlPulse,
}

impl ModulationSchedule {
    pub fn len(&self) -> usize {
        self.beta_envelope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_envelope.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.beta_envelope.len();
        if self.varphi.len() != n || self.detuning_offset.len() != n {
            return Err(Error::InvalidConfig("schedule arrays differ in length".into()));
        }
        if !(self.dt > 0.0) || n == 0 {
            return Err(Error::ZeroDuration);
        }
        if self.beta_envelope.iter().any(|b| !(0.0..=BETA_MAX).contains(b)) {
            return Err(Error::InvalidConfig("schedule depth outside [0, BETA_MAX]".into()));
        }
        Ok(())
    }

    fn varphi_at(&self, k: usize, local: f64) -> f64 {
        self.varphi[k] + (self.detuning_offset[k] - self.target_detuning) * local
    }

    /// Computational-subspace unitary of the ideal effective two-level
    /// dynamics, including the frame phase.
    pub fn effective_unitary(&self) -> CMatrix {
        let u = propagate_qubit(&self.effective).to_dmatrix();
        let f = C64::from_polar(1.0, -0.5 * self.frame_phase);
        let mut out = CMatrix::identity(4, 4);
        out[(S01, S01)] = f * u[(0, 0)];
        out[(S01, S10)] = f * u[(0, 1)];
        out[(S10, S01)] = f.conj() * u[(1, 0)];
        out[(S10, S10)] = f.conj() * u[(1, 1)];
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s: ModulationSchedule = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }
}

/// Map a condition-(i) effective `Rx(π)` onto the modulation. The effective
/// drive peaks at `omega_e_max` unless `design.duration` fixes the gate time.
pub fn build_iswap_schedule(p: &TwoQubitParams, design: &IswapDesign, omega_e_max: f64) -> Result<ModulationSchedule> {
    p.validate()?;
    let recipe = build_condition_i(&GateTarget::rx(PI), 0.0, design.chi1, design.chi2)?;
    let base = SynthesisConfig::new(1.0)
        .with_samples(design.samples_per_segment)
        .with_detuning_ratio(design.detuning_ratio);
    let omega = match design.duration {
        Some(tau) if !(tau > 0.0) || !tau.is_finite() => return Err(Error::ZeroDuration),
        // every duration scales as 1/omega_max
        Some(tau) => recipe.duration(&base)? / tau,
        None => omega_e_max,
    };
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::ZeroDuration);
    }
    let max = max_effective_coupling(p.g12);
    if omega > max {
        return Err(Error::Unreachable { requested: omega, max });
    }
    let cfg = SynthesisConfig { omega_max: omega, ..base };
    let effective = recipe.pulse(&cfg)?;
    if effective.n == 0 || !(effective.duration() > 0.0) {
        return Err(Error::ZeroDuration);
    }

    let dt_target = p.target_detuning();
    let mut beta_envelope = Vec::with_capacity(effective.n);
    let mut varphi = Vec::with_capacity(effective.n);
    let mut eta = 0.0;
    for k in 0..effective.n {
        // clamp rounding overshoot at the peak
        beta_envelope.push(beta_for_coupling(effective.omega[k].min(max), p.g12)?);
        let tk = effective.time_at(k);
        varphi.push(effective.phi[k] + eta + FRAC_PI_2 - dt_target * tk);
        eta += effective.delta[k] * effective.dt;
    }
    check_truncation(beta_envelope.iter().cloned().fold(0.0, f64::max), p.kmax)?;
    Ok(ModulationSchedule {
        nu: p.nu,
        duration: effective.duration(),
        dt: effective.dt,
        beta_envelope,
        varphi,
        detuning_offset: effective.delta.clone(),
        target_detuning: dt_target,
        frame_phase: eta,
        effective,
    })
}

/// Options of [`full_simulation_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub decoherence: bool,
    pub coupling: Coupling,
    /// Integration steps are chosen so that the fastest carrier advances by
    /// at most this phase per step.
    pub step_phase: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { decoherence: false, coupling: Coupling::Full, step_phase: 0.05 }
    }
}

/// Index pairs `(i, j)`, `i <= j`, of the computational operators propagated
/// to represent the channel on real product states.
fn operator_pairs() -> Vec<(usize, usize)> {
    (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect()
}

fn pair_input(i: usize, j: usize) -> M6 {
    let mut m = M6::zeros();
    m[(i, j)] = ONE;
    m[(j, i)] = ONE;
    if i == j {
        m[(i, i)] = ONE;
    }
    m
}

/// Outcome of a two-qubit simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Full 6x6 propagator of closed runs.
    pub unitary: Option<CMatrix>,
    /// Images of `|i><j| + |j><i|` (`|i><i|` on the diagonal) for `i <= j`
    /// over the computational states, in [`operator_pairs`] order.
    pub images: Vec<CMatrix>,
    /// Population outside the computational subspace for the maximally
    /// mixed computational input.
    pub leakage: f64,
    pub duration: f64,
    pub steps: usize,
}

/// Fidelity after the best local Z correction `diag(1, e^{ib}, e^{ia}, e^{i(a+b)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalZFit {
    pub fidelity: f64,
    /// Phase on transmon 1.
    pub phase1: f64,
    /// Phase on transmon 2.
    pub phase2: f64,
}

/// Two-qubit fidelity measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoQubitMetric {
    /// Mean state fidelity over a grid of real product states.
    ProductStates,
    /// `|Tr(U2^† U)|/4` on the computational block of a closed evolution.
    Trace,
}

/// Points per qubit of the product-state grid.
pub const PRODUCT_GRID: usize = 20;

fn local_z(phase1: f64, phase2: f64) -> [C64; 4] {
    [
        ONE,
        C64::from_polar(1.0, phase2),
        C64::from_polar(1.0, phase1),
        C64::from_polar(1.0, phase1 + phase2),
    ]
}

/// Maximise `f(a, b)` over the torus from a coarse grid.
fn maximise_phases<F: Fn(f64, f64) -> f64>(f: F) -> LocalZFit {
    let n = 16;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64);
            let v = f(a, b);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    let opts = NelderMeadOptions { f_tol: 1e-16, x_tol: 1e-10, ..NelderMeadOptions::default() };
    let m = nelder_mead(&|x: &[f64]| -f(x[0], x[1]), &[best.1, best.2], &[0.1, 0.1], &opts);
    let (fidelity, a, b) = if -m.f > best.0 { (-m.f, m.x[0], m.x[1]) } else { best };
    LocalZFit {
        fidelity,
        phase1: a.rem_euclid(2.0 * PI),
        phase2: b.rem_euclid(2.0 * PI),
    }
}

impl SimulationResult {
    /// The map of a channel that does nothing.
    pub fn identity() -> Self {
        SimulationResult {
            unitary: Some(CMatrix::identity(DIM, DIM)),
            images: operator_pairs().iter().map(|&(i, j)| to_dynamic(&pair_input(i, j))).collect(),
            leakage: 0.0,
            duration: 0.0,
            steps: 0,
        }
    }

    /// Computational block of the closed-run propagator.
    pub fn computational(&self) -> Option<CMatrix> {
        self.unitary.as_ref().map(|u| u.view((0, 0), (4, 4)).clone_owned())
    }

    /// Output density matrix (6x6) for the real computational input `c`.
    pub fn apply_real(&self, c: &[f64; 4]) -> CMatrix {
        let mut out = CMatrix::zeros(DIM, DIM);
        for (img, &(i, j)) in self.images.iter().zip(&operator_pairs()) {
            out += img * C64::from(c[i] * c[j]);
        }
        out
    }

    /// Product-state-averaged fidelity against `target` (4x4), maximised over
    /// local Z corrections.
    pub fn product_state_fidelity(&self, target: &CMatrix, grid: usize) -> Result<LocalZFit> {
        if target.nrows() != 4 || target.ncols() != 4 {
            return Err(Error::DimMismatch { expected: 4, actual: target.nrows() });
        }
        if grid == 0 {
            return Err(Error::InvalidConfig("product-state grid must be non-empty".into()));
        }
        // F(a, b) = Re Σ conj(d_i) d_j M_ij with M_ij the state mean of
        // conj(v_i) ρ_ij v_j, v = U2 c.
        let mut m = [[ZERO; 4]; 4];
        let thetas: Vec<f64> = (0..grid).map(|k| 2.0 * PI * k as f64 / grid as f64).collect();
        for &t1 in &thetas {
            for &t2 in &thetas {
                let (s1, c1) = t1.sin_cos();
                let (s2, c2) = t2.sin_cos();
                let c = [c1 * c2, c1 * s2, s1 * c2, s1 * s2];
                let rho = self.apply_real(&c);
                let v: Vec<C64> = (0..4)
                    .map(|i| (0..4).map(|j| target[(i, j)] * c[j]).sum())
                    .collect();
                for i in 0..4 {
                    for j in 0..4 {
                        m[i][j] += v[i].conj() * rho[(i, j)] * v[j];
                    }
                }
            }
        }
        let norm = (grid * grid) as f64;
        Ok(maximise_phases(|a, b| {
            let d = local_z(a, b);
            let mut acc = ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    acc += d[i].conj() * d[j] * m[i][j];
                }
            }
            acc.re / norm
        }))
    }

    /// `|Tr((D U2)^† U)|/4` on the computational block, maximised over local
    /// Z corrections `D`. Needs a closed run.
    pub fn trace_fidelity(&self, target: &CMatrix) -> Result<LocalZFit> {
        if target.nrows() != 4 || target.ncols() != 4 {
            return Err(Error::DimMismatch { expected: 4, actual: target.nrows() });
        }
        let u = self
            .computational()
            .ok_or_else(|| Error::InvalidConfig("trace fidelity needs a closed evolution".into()))?;
        let w: Vec<C64> = (0..4)
            .map(|j| (0..4).map(|i| target[(j, i)].conj() * u[(j, i)]).sum())
            .collect();
        Ok(maximise_phases(|a, b| {
            let d = local_z(a, b);
            (0..4).map(|j| d[j].conj() * w[j]).sum::<C64>().norm() / 4.0
        }))
    }

    pub fn fidelity(&self, target: &CMatrix, metric: TwoQubitMetric) -> Result<LocalZFit> {
        match metric {
            TwoQubitMetric::ProductStates => self.product_state_fidelity(target, PRODUCT_GRID),
            TwoQubitMetric::Trace => self.trace_fidelity(target),
        }
    }
}

/// Integration step for a sample of length `dt`.
fn substeps(dt: f64, p: &TwoQubitParams, step_phase: f64) -> usize {
    let fastest = p.nu.abs() + p.delta1.abs() + p.alpha1.abs().max(p.alpha2.abs()) + p.g12;
    ((dt * fastest / step_phase).ceil() as usize).max(1)
}

/// Fourth-order Magnus step over `[t, t + h]` with Gauss nodes.
fn magnus_step<F: Fn(f64) -> M6>(h_at: &F, t: f64, h: f64) -> M6 {
    let off = 3f64.sqrt() / 6.0;
    let h1 = h_at(t + (0.5 - off) * h);
    let h2 = h_at(t + (0.5 + off) * h);
    let comm = h1 * h2 - h2 * h1;
    let k = (h1 + h2) * C64::from(0.5 * h) + comm * (I * (3f64.sqrt() / 12.0 * h * h));
    // exp(-i K) for Hermitian K
    let herm = (k + k.adjoint()) * C64::from(0.5);
    let eig = herm.symmetric_eigen();
    let mut phases = M6::zeros();
    for j in 0..DIM {
        phases[(j, j)] = C64::from_polar(1.0, -eig.eigenvalues[j]);
    }
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Element-wise form of the relaxation and dephasing dissipators of both
/// transmons, each with jump operators `sqrt(κ-) a` and `sqrt(κz) n`.
struct Dissipator {
    /// decay of element (a, b)
    rates: [[f64; DIM]; DIM],
    /// `out[dst] += w rho[src]` feeding terms
    feeds: Vec<((usize, usize), (usize, usize), f64)>,
}

impl Dissipator {
    fn new(kappas: &[DecayRates; 2]) -> Self {
        // excitation numbers (n1, n2) of each basis state
        let occ = [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)];
        let index = |n: (usize, usize)| occ.iter().position(|&o| o == n);
        let mut rates = [[0.0; DIM]; DIM];
        let mut feeds = Vec::new();
        for (q, rate) in kappas.iter().enumerate() {
            let n_of = |s: usize| if q == 0 { occ[s].0 } else { occ[s].1 } as f64;
            // lowering: |n> -> sqrt(n)|n-1> on transmon q
            let lower = |s: usize| -> Option<(usize, f64)> {
                let (n1, n2) = occ[s];
                let target = if q == 0 {
                    (n1.checked_sub(1)?, n2)
                } else {
                    (n1, n2.checked_sub(1)?)
                };
                index(target).map(|t| (t, n_of(s).sqrt()))
            };
            for a in 0..DIM {
                for b in 0..DIM {
                    let (na, nb) = (n_of(a), n_of(b));
                    rates[a][b] += 0.5 * rate.kappa_minus * (na + nb);
                    // dephasing: κz (n_a n_b - (n_a² + n_b²)/2) = -κz (n_a - n_b)²/2
                    rates[a][b] += 0.5 * rate.kappa_z * (na - nb).powi(2);
                    if rate.kappa_minus > 0.0 {
                        if let (Some((ta, ca)), Some((tb, cb))) = (lower(a), lower(b)) {
                            feeds.push(((ta, tb), (a, b), rate.kappa_minus * ca * cb));
                        }
                    }
                }
            }
        }
        Dissipator { rates, feeds }
    }

    fn max_rate(&self) -> f64 {
        self.rates.iter().flatten().cloned().fold(0.0, f64::max)
    }

    fn add_to(&self, rho: &M6, out: &mut M6) {
        for a in 0..DIM {
            for b in 0..DIM {
                out[(a, b)] -= rho[(a, b)] * self.rates[a][b];
            }
        }
        for &(dst, src, w) in &self.feeds {
            out[dst] += rho[src] * w;
        }
    }
}

/// Simulate `schedule` on the full model; dissipative when asked.
pub fn full_simulation(schedule: &ModulationSchedule, p: &TwoQubitParams, with_decoherence: bool) -> Result<SimulationResult> {
    full_simulation_with(schedule, p, &SimOptions { decoherence: with_decoherence, ..SimOptions::default() })
}

pub fn full_simulation_with(schedule: &ModulationSchedule, p: &TwoQubitParams, opts: &SimOptions) -> Result<SimulationResult> {
    p.validate()?;
    schedule.validate()?;
    if !(opts.step_phase > 0.0) {
        return Err(Error::InvalidConfig("step_phase must be positive".into()));
    }
    let tables: Vec<Vec<f64>> = schedule.beta_envelope.iter().map(|&b| bessel_table(b, p.kmax)).collect();
    check_truncation(schedule.beta_envelope.iter().cloned().fold(0.0, f64::max), p.kmax)?;
    let m = substeps(schedule.dt, p, opts.step_phase);
    let h = schedule.dt / m as f64;
    let steps = m * schedule.len();

    if opts.decoherence {
        simulate_dissipative(schedule, p, opts, &tables, m, h, steps)
    } else {
        simulate_closed(schedule, p, opts, &tables, m, h, steps)
    }
}

fn simulate_closed(
    schedule: &ModulationSchedule,
    p: &TwoQubitParams,
    opts: &SimOptions,
    tables: &[Vec<f64>],
    m: usize,
    h: f64,
    steps: usize,
) -> Result<SimulationResult> {
    let mut u = M6::identity();
    for (k, bessel) in tables.iter().enumerate() {
        let tk = k as f64 * schedule.dt;
        let h_at = |t: f64| hamiltonian_m6(t, bessel, schedule.varphi_at(k, t - tk), p, opts.coupling);
        for s in 0..m {
            u = magnus_step(&h_at, tk + s as f64 * h, h) * u;
        }
    }
    let defect = (u.adjoint() * u - M6::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(defect <= 1e-9) {
        return Err(Error::NonNormalizedState { drift: defect });
    }
    let images = operator_pairs()
        .iter()
        .map(|&(i, j)| to_dynamic(&(u * pair_input(i, j) * u.adjoint())))
        .collect::<Vec<_>>();
    let leakage = leakage_of(&images);
    Ok(SimulationResult {
        unitary: Some(to_dynamic(&u)),
        images,
        leakage,
        duration: schedule.duration,
        steps,
    })
}

fn leakage_of(images: &[CMatrix]) -> f64 {
    operator_pairs()
        .iter()
        .zip(images)
        .filter(|(&(i, j), _)| i == j)
        .map(|(_, img)| 0.25 * (img[(S02, S02)].re + img[(S20, S20)].re))
        .sum()
}

fn simulate_dissipative(
    schedule: &ModulationSchedule,
    p: &TwoQubitParams,
    opts: &SimOptions,
    tables: &[Vec<f64>],
    m: usize,
    h: f64,
    steps: usize,
) -> Result<SimulationResult> {
    let diss = Dissipator::new(&p.kappas);
    let pairs = operator_pairs();
    let inputs: Vec<M6> = pairs.iter().map(|&(i, j)| pair_input(i, j)).collect();
    let traces: Vec<C64> = inputs.iter().map(|r| r.trace()).collect();
    let mut states = inputs.clone();
    let generator = |hm: &M6, rho: &M6| -> M6 {
        let mut out = (hm * rho - rho * hm) * (-I);
        diss.add_to(rho, &mut out);
        out
    };
    // keep the dissipative part well inside the RK4 stability region
    let m_diss = ((h * diss.max_rate() / 0.05).ceil() as usize).max(1);
    let (m, h) = (m * m_diss, h / m_diss as f64);
    let (half, full, sixth, two) = (C64::from(0.5 * h), C64::from(h), C64::from(h / 6.0), C64::from(2.0));

    for (k, bessel) in tables.iter().enumerate() {
        let tk = k as f64 * schedule.dt;
        let h_at = |t: f64| hamiltonian_m6(t, bessel, schedule.varphi_at(k, t - tk), p, opts.coupling);
        for s in 0..m {
            let t = tk + s as f64 * h;
            let (ha, hb, hc) = (h_at(t), h_at(t + 0.5 * h), h_at(t + h));
            for rho in states.iter_mut() {
                let k1 = generator(&ha, rho);
                let k2 = generator(&hb, &(*rho + k1 * half));
                let k3 = generator(&hb, &(*rho + k2 * half));
                let k4 = generator(&hc, &(*rho + k3 * full));
                *rho += (k1 + (k2 + k3) * two + k4) * sixth;
            }
        }
        for (rho, t0) in states.iter().zip(&traces) {
            let drift = (rho.trace() - t0).norm();
            if !(drift <= 1e-8) || rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::StepTooLarge { drift });
            }
        }
    }
    let images: Vec<CMatrix> = states.iter().map(to_dynamic).collect();
    let leakage = leakage_of(&images);
    Ok(SimulationResult {
        unitary: None,
        images,
        leakage,
        duration: schedule.duration,
        steps: steps * m_diss,
    })
}

/// First-order estimate of the amplitude error from the non-resonant terms:
/// each coupling of strength `g` detuned by `δ` mixes in about `g/|δ|`.
pub fn rwa_error_bound(p: &TwoQubitParams, beta: f64, coupling: Coupling) -> f64 {
    let j = bessel_table(beta, p.kmax);
    let kmax = p.kmax as i64;
    let mut bound = 0.0;
    for k in -kmax..=kmax {
        let jk = j[k.unsigned_abs() as usize].abs();
        let kf = k as f64;
        if k != -1 {
            bound += p.g12 * jk / (p.delta1 + kf * p.nu).abs();
        }
        if coupling == Coupling::Full {
            let r2 = std::f64::consts::SQRT_2;
            bound += r2 * p.g12 * jk / (p.delta1 - p.alpha2 + kf * p.nu).abs();
            bound += r2 * p.g12 * jk / (p.delta1 + p.alpha1 + kf * p.nu).abs();
        }
    }
    bound
}

/// Build and simulate the iSWAP for one `(Δ1, β)` setting and score it.
pub fn iswap_fidelity(
    p: &TwoQubitParams,
    design: &IswapDesign,
    opts: &SimOptions,
    metric: TwoQubitMetric,
) -> Result<(LocalZFit, SimulationResult)> {
    let target = GateTarget::iswap().matrix;
    if !(0.0..=BETA_MAX).contains(&p.beta) {
        return Err(Error::OutOfRange(format!(
            "peak modulation depth {} is outside the monotone branch [0, {BETA_MAX}]",
            p.beta
        )));
    }
    let result = if p.beta == 0.0 {
        SimulationResult::identity()
    } else {
        let omega = 2.0 * bessel_j_unchecked(1, p.beta) * p.g12;
        let schedule = build_iswap_schedule(p, design, omega)?;
        full_simulation_with(&schedule, p, opts)?
    };
    Ok((result.fidelity(&target, metric)?, result))
}

/// Fidelity landscape over the qubit splitting and the peak modulation depth.
/// Closed runs use the trace metric and dissipative runs the product-state
/// metric. A zero depth means no modulation, so the cell holds the identity.
pub fn scan_delta_beta(
    delta1_values: &[f64],
    beta_values: &[f64],
    p: &TwoQubitParams,
    design: &IswapDesign,
    with_decoherence: bool,
) -> Result<FidelityGrid> {
    p.validate()?;
    if delta1_values.is_empty() || beta_values.is_empty() {
        return Err(Error::InvalidConfig("scan axes must be non-empty".into()));
    }
    if let Some(b) = beta_values.iter().find(|b| !(0.0..=BETA_MAX).contains(*b)) {
        return Err(Error::InvalidConfig(format!("beta {b} is outside [0, {BETA_MAX}]")));
    }
    let metric = if with_decoherence { TwoQubitMetric::ProductStates } else { TwoQubitMetric::Trace };
    let opts = SimOptions { decoherence: with_decoherence, ..SimOptions::default() };
    let axis1 = Axis { name: "delta1".into(), values: delta1_values.to_vec() };
    let axis2 = Axis { name: "beta".into(), values: beta_values.to_vec() };
    let cells: Vec<(f64, f64)> = delta1_values
        .iter()
        .flat_map(|&d| beta_values.iter().map(move |&b| (d, b)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(d, b)| {
            let q = TwoQubitParams { beta: b, ..p.with_delta1(d) };
            iswap_fidelity(&q, design, &opts, metric).map(|(fit, _)| fit.fidelity)
        })
        .collect::<Result<_>>()?;
    let fidelity = values.chunks(beta_values.len()).map(<[f64]>::to_vec).collect();

    let mut manifest = GridManifest::new("iswap", "iSWAP", None, max_effective_coupling(p.g12));
    manifest.extra.insert("params".into(), serde_json::to_value(p)?);
    manifest.extra.insert("design".into(), serde_json::to_value(design)?);
    manifest.extra.insert("metric".into(), serde_json::to_value(metric)?);
    manifest.extra.insert("with_decoherence".into(), with_decoherence.into());
    let grid = FidelityGrid { axis1, axis2, fidelity, manifest };
    grid.validate()?;
    Ok(grid)
}

/// Fidelity of the combined run against runs with one error channel removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBreakdown {
    pub combined: f64,
    /// Leakage couplings kept, decay switched off.
    pub leakage_only: f64,
    /// Decay kept, leakage couplings dropped.
    pub decoherence_only: f64,
    pub leakage: f64,
    pub duration: f64,
}

pub fn channel_breakdown(p: &TwoQubitParams, design: &IswapDesign) -> Result<ChannelBreakdown> {
    let metric = TwoQubitMetric::ProductStates;
    let run = |q: &TwoQubitParams, decoherence: bool, coupling: Coupling| {
        let opts = SimOptions { decoherence, coupling, ..SimOptions::default() };
        iswap_fidelity(q, design, &opts, metric)
    };
    let (combined, res) = run(p, true, Coupling::Full)?;
    let (leak, _) = run(&p.closed(), false, Coupling::Full)?;
    let (deco, _) = run(p, true, Coupling::NoLeakage)?;
    Ok(ChannelBreakdown {
        combined: combined.fidelity,
        leakage_only: leak.fidelity,
        decoherence_only: deco.fidelity,
        leakage: res.leakage,
        duration: res.duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn params() -> TwoQubitParams {
        TwoQubitParams::default()
    }

    #[test]
    fn hamiltonian_at_zero_depth() {
        let p = TwoQubitParams { beta: 0.0, ..params() };
        let t = 0.0123;
        let h = modulated_hamiltonian(t, &p).unwrap();
        assert!((h[(S01, S10)].norm() - p.g12).abs() < 1e-12);
        let ratio = h[(S02, S11)] / h[(S01, S10)];
        let expected = C64::from_polar(2f64.sqrt(), -p.alpha2 * t);
        assert!((ratio - expected).norm() < 1e-12);
        for k in 0..DIM {
            assert_eq!(h[(0, k)], ZERO);
            assert_eq!(h[(k, 0)], ZERO);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        for (t, beta) in [(0.0, 0.3), (0.37, 1.29), (1.9, 1.8)] {
            let p = TwoQubitParams { beta, varphi: 0.7, ..params() };
            let h = modulated_hamiltonian(t, &p).unwrap();
            assert!(max_abs_diff(&h, &h.adjoint()) < 1e-12);
        }
    }

    #[test]
    fn sideband_sum_matches_generating_function() {
        // Σ_k i^k J_k(β) e^{ikθ} = exp(iβ cos θ)
        let beta = 1.1;
        let j = bessel_table(beta, 20);
        for theta in [0.0, 0.4, 2.5] {
            let s = sideband_sum(&j, theta, Coupling::Full);
            assert!((s - C64::from_polar(1.0, beta * theta.cos())).norm() < 1e-13);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let p = TwoQubitParams { beta: 1.8, kmax: 1, ..params() };
        assert!(matches!(modulated_hamiltonian(0.0, &p), Err(Error::Truncation { .. })));
        assert!(retained_weight(2.0, 7) > 1.0 - 1e-8);
    }

    #[test]
    fn effective_controls_examples() {
        let p = TwoQubitParams { beta: 0.0, ..params() };
        assert_eq!(effective_controls(&p, 0.0).omega, 0.0);
        let p = TwoQubitParams { varphi: 0.3, nu: params().delta1 + 2.0, ..params() };
        let e = effective_controls(&p, 2.0);
        assert_eq!(e.phase_rate, 0.0);
        assert!((e.phase_at(5.0) - (0.3 - FRAC_PI_2)).abs() < 1e-15);
    }

    #[test]
    fn beta_inversion_round_trips() {
        let g = mhz(8.0);
        for frac in [0.0, 1e-6, 0.2, 0.7, 0.999, 1.0] {
            let omega = frac * max_effective_coupling(g);
            let beta = beta_for_coupling(omega, g).unwrap();
            assert!((2.0 * bessel_j_unchecked(1, beta) * g - omega).abs() < 1e-10);
        }
        let err = beta_for_coupling(2.0 * 0.582 * g, g).unwrap_err();
        assert!(matches!(err, Error::Unreachable { .. }));
    }

    #[test]
    fn schedule_errors() {
        let p = params();
        let over = 2.0 * 0.582 * p.g12;
        assert!(matches!(
            build_iswap_schedule(&p, &IswapDesign::default(), over),
            Err(Error::Unreachable { .. })
        ));
        let zero = IswapDesign { duration: Some(0.0), ..IswapDesign::default() };
        assert!(matches!(build_iswap_schedule(&p, &zero, 1.0), Err(Error::ZeroDuration)));
    }

    #[test]
    fn identity_channel_scores() {
        let id = SimulationResult::identity();
        let target = GateTarget::iswap().matrix;
        assert!((id.trace_fidelity(&target).unwrap().fidelity - 0.5).abs() < 1e-12);
        let ideal = SimulationResult {
            unitary: Some({
                let mut u = CMatrix::identity(DIM, DIM);
                u.view_mut((0, 0), (4, 4)).copy_from(&target);
                u
            }),
            ..SimulationResult::identity()
        };
        assert!((ideal.trace_fidelity(&target).unwrap().fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_fidelity_of_exact_map() {
        // images of U2 with a local Z applied must score 1 after correction
        let target = GateTarget::iswap().matrix;
        let d = local_z(0.4, -1.1);
        let mut u = M6::identity();
        for i in 0..4 {
            for j in 0..4 {
                u[(i, j)] = d[i].conj() * target[(i, j)];
            }
        }
        let images = operator_pairs()
            .iter()
            .map(|&(i, j)| to_dynamic(&(u * pair_input(i, j) * u.adjoint())))
            .collect();
        let res = SimulationResult { unitary: Some(to_dynamic(&u)), images, ..SimulationResult::identity() };
        let fit = res.product_state_fidelity(&target, PRODUCT_GRID).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 1e-10, "{fit:?}");
        assert!((res.trace_fidelity(&target).unwrap().fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dissipator_matches_jump_operators() {
        let kappas = [
            DecayRates { kappa_minus: 0.3, kappa_z: 0.2 },
            DecayRates { kappa_minus: 0.5, kappa_z: 0.7 },
        ];
        let occ = [(0usize, 0usize), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)];
        let rho = M6::from_fn(|i, j| C64::new(0.1 * (i + 2 * j) as f64, 0.03 * (i as f64 - j as f64)));
        let mut expected = M6::zeros();
        for (q, r) in kappas.iter().enumerate() {
            let mut a = M6::zeros();
            let mut n = M6::zeros();
            for (s, &(n1, n2)) in occ.iter().enumerate() {
                let (nq, lowered) = if q == 0 { (n1, (n1.wrapping_sub(1), n2)) } else { (n2, (n1, n2.wrapping_sub(1))) };
                n[(s, s)] = C64::from(nq as f64);
                if let Some(t) = occ.iter().position(|&o| o == lowered) {
                    a[(t, s)] = C64::from((nq as f64).sqrt());
                }
            }
            for (l, kappa) in [(a, r.kappa_minus), (n, r.kappa_z)] {
                let ld = l.adjoint();
                let ll = ld * l;
                expected += (l * rho * ld * C64::from(2.0) - ll * rho - rho * ll) * C64::from(0.5 * kappa);
            }
        }
        let mut got = M6::zeros();
        Dissipator::new(&kappas).add_to(&rho, &mut got);
        assert!((got - expected).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14);
    }

    #[test]
    fn magnus_matches_fine_stepping() {
        let p = TwoQubitParams { beta: 1.0, ..params() };
        let j = bessel_table(p.beta, p.kmax);
        let h_at = |t: f64| hamiltonian_m6(t, &j, 0.2, &p, Coupling::Full);
        let h = 1e-5;
        let coarse = magnus_step(&h_at, 0.01, h);
        let mut fine = M6::identity();
        let n = 2000;
        for s in 0..n {
            let t = 0.01 + (s as f64 + 0.5) * h / n as f64;
            fine = to_m6(&crate::linalg::expm_hermitian(&to_dynamic(&h_at(t)), h / n as f64)) * fine;
        }
        assert!((coarse - fine).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-9);
    }

    fn to_m6(m: &CMatrix) -> M6 {
        M6::from_fn(|i, j| m[(i, j)])
    }
}
