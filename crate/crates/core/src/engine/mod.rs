//! Hamiltonian builders and time propagation.

mod bessel;
mod lindblad;

pub use bessel::{bessel_j, bessel_j_unchecked};
pub use lindblad::{lindblad_propagate, lindblad_propagate_many, DensityMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, CMatrix, Su2, Vec3, C64, ZERO};
use crate::synthesis::ControlPulse;
use crate::units::de_frequency;

/// Truncated transmon ladder and its decoherence rates. Rates are rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceParams {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(deserialize_with = "de_frequency")]
    pub alpha: f64,
    #[serde(default, deserialize_with = "de_frequency")]
    pub kappa_minus: f64,
    #[serde(default, deserialize_with = "de_frequency")]
    pub kappa_z: f64,
}

fn default_levels() -> usize {
    4
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            levels: 4,
            alpha: crate::units::mhz(320.0),
            kappa_minus: crate::units::khz(2.0),
            kappa_z: crate::units::khz(2.0),
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidConfig("a transmon needs at least two levels".into()));
        }
        if !(self.kappa_minus >= 0.0 && self.kappa_z >= 0.0) {
            return Err(Error::InvalidConfig("decoherence rates must be non-negative".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig("anharmonicity must be finite".into()));
        }
        Ok(())
    }

    pub fn closed(mut self) -> Self {
        self.kappa_minus = 0.0;
        self.kappa_z = 0.0;
        self
    }
}

/// Field vector `B` with `H = B·σ/2` for the qubit drive.
#[inline]
pub fn qubit_field(omega: f64, phi: f64, delta: f64) -> Vec3 {
    let (s, c) = phi.sin_cos();
    [omega * c, omega * s, -delta]
}

/// `½[[-Δ, Ω e^{-iφ}], [Ω e^{iφ}, Δ]]`
pub fn qubit_hamiltonian(omega: f64, phi: f64, delta: f64) -> CMatrix {
    let off = C64::from_polar(0.5 * omega, -phi);
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::from(-0.5 * delta), off, off.conj(), C64::from(0.5 * delta)],
    )
}

/// Drive Hamiltonian on a `levels`-dimensional transmon ladder in the frame
/// rotating at the drive frequency.
pub fn transmon_hamiltonian(omega: f64, phi: f64, delta: f64, dev: &DeviceParams) -> CMatrix {
    let d = dev.levels;
    let mut h = CMatrix::from_element(d, d, ZERO);
    let drive = C64::from_polar(0.5 * omega, -phi);
    for j in 0..d {
        let jf = j as f64;
        h[(j, j)] = C64::from((jf - 0.5) * delta - jf * (jf - 1.0) * dev.alpha / 2.0);
        if j + 1 < d {
            let c = drive * (jf + 1.0).sqrt();
            h[(j, j + 1)] = c;
            h[(j + 1, j)] = c.conj();
        }
    }
    h
}

/// Ordered product of the per-sample propagators of a qubit pulse.
pub fn propagate_qubit(pulse: &ControlPulse) -> Su2 {
    propagate_qubit_with(pulse, [0.0; 3])
}

/// As [`propagate_qubit`] with a constant extra field added to every sample.
pub fn propagate_qubit_with(pulse: &ControlPulse, extra: Vec3) -> Su2 {
    let mut u = Su2::IDENTITY;
    for k in 0..pulse.n {
        let b = qubit_field(pulse.omega[k], pulse.phi[k], pulse.delta[k]);
        let step = Su2::from_field([b[0] + extra[0], b[1] + extra[1], b[2] + extra[2]], pulse.dt);
        u = step.mul(&u);
    }
    u.renormalize();
    u
}

/// Ordered product `Π_k exp(-i H_k dt)` with `H_k` built from sample `k`.
pub fn propagate_unitary<F>(pulse: &ControlPulse, h_builder: F, dim: usize) -> Result<CMatrix>
where
    F: Fn(f64, f64, f64) -> CMatrix,
{
    pulse.validate()?;
    let mut u = CMatrix::identity(dim, dim);
    for k in 0..pulse.n {
        let h = h_builder(pulse.omega[k], pulse.phi[k], pulse.delta[k]);
        if h.nrows() != dim || h.ncols() != dim {
            return Err(Error::DimMismatch { expected: dim, actual: h.nrows() });
        }
        u = expm_hermitian(&h, pulse.dt) * u;
    }
    Ok(u)
}

/// Closed-system propagator of a pulse on the transmon ladder.
pub fn propagate_transmon(pulse: &ControlPulse, dev: &DeviceParams) -> Result<CMatrix> {
    propagate_unitary(pulse, |w, p, d| transmon_hamiltonian(w, p, d, dev), dev.levels)
}
