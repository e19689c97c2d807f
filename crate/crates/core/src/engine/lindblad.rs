//! Master-equation integration on the transmon ladder.
//!
//! Relaxation uses the jump operators `sqrt(j+1)|j><j+1|` and dephasing uses
//! `j|j><j|`, each with dissipator `(κ/2)(2AρA† - A†Aρ - ρA†A)`. Both families
//! act element-wise on ρ in the level basis, which is what the integrator
//! exploits.

use serde::{Deserialize, Serialize};

use super::{transmon_hamiltonian, DeviceParams};
use crate::error::{Error, Result};
use crate::linalg::{complex_matrix_serde, CMatrix, C64, I};
use crate::synthesis::ControlPulse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub dim: usize,
    #[serde(with = "complex_matrix_serde")]
    pub entries: CMatrix,
}

impl DensityMatrix {
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimMismatch { expected: entries.nrows(), actual: entries.ncols() });
        }
        let rho = DensityMatrix { dim: entries.nrows(), entries };
        rho.validate()?;
        Ok(rho)
    }

    /// `|psi><psi|` for a normalised amplitude vector.
    pub fn pure(psi: &[C64]) -> Self {
        let n = psi.len();
        DensityMatrix {
            dim: n,
            entries: CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj()),
        }
    }

    /// Projector onto level `k` of a `dim`-level system.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        psi[k] = C64::new(1.0, 0.0);
        Self::pure(&psi)
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.entries[(k, k)].re
    }

    /// `<psi|rho|psi>`
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += psi[i].conj() * self.entries[(i, j)] * psi[j];
            }
        }
        acc.re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hermiticity_defect() > 1e-10 {
            return Err(Error::InvalidConfig("density matrix is not Hermitian".into()));
        }
        let drift = (self.trace() - C64::new(1.0, 0.0)).norm();
        if drift > 1e-8 {
            return Err(Error::NonNormalizedState { drift });
        }
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let min_eig = herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            return Err(Error::InvalidConfig(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }
}

/// Per-element decay and population feeding of the dissipators.
struct Dissipator {
    dim: usize,
    kappa_minus: f64,
    /// decay rate of element (a, b)
    rates: Vec<f64>,
}

impl Dissipator {
    fn new(dev: &DeviceParams) -> Self {
        let d = dev.levels;
        let mut rates = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let (af, bf) = (a as f64, b as f64);
                let mut r = 0.5 * dev.kappa_minus * (af + bf);
                if a != b {
                    r += 0.5 * dev.kappa_z * (af * af + bf * bf);
                }
                rates[a * d + b] = r;
            }
        }
        Dissipator { dim: d, kappa_minus: dev.kappa_minus, rates }
    }

    fn max_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(0.0, f64::max)
    }

    fn add_to(&self, rho: &CMatrix, out: &mut CMatrix) {
        let d = self.dim;
        for a in 0..d {
            for b in 0..d {
                out[(a, b)] -= rho[(a, b)] * self.rates[a * d + b];
            }
            if a + 1 < d {
                out[(a, a)] += rho[(a + 1, a + 1)] * (self.kappa_minus * (a as f64 + 1.0));
            }
        }
    }
}

fn generator(h: &CMatrix, diss: &Dissipator, rho: &CMatrix) -> CMatrix {
    let mut out = (h * rho - rho * h) * (-I);
    diss.add_to(rho, &mut out);
    out
}

fn max_row_sum(h: &CMatrix) -> f64 {
    (0..h.nrows())
        .map(|i| h.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Integrate the master equation for one initial state.
pub fn lindblad_propagate(
    pulse: &ControlPulse,
    dev: &DeviceParams,
    rho0: &DensityMatrix,
) -> Result<DensityMatrix> {
    if rho0.dim != dev.levels {
        return Err(Error::DimMismatch { expected: dev.levels, actual: rho0.dim });
    }
    let out = lindblad_propagate_many(pulse, dev, std::slice::from_ref(&rho0.entries))?;
    let entries = out.into_iter().next().expect("one output per input");
    Ok(DensityMatrix { dim: dev.levels, entries })
}

/// Integrate the master equation for several operators at once. The map is
/// linear, so the inputs need not be states; each trace is conserved.
pub fn lindblad_propagate_many(
    pulse: &ControlPulse,
    dev: &DeviceParams,
    inputs: &[CMatrix],
) -> Result<Vec<CMatrix>> {
    dev.validate()?;
    pulse.validate()?;
    let d = dev.levels;
    if let Some(bad) = inputs.iter().find(|m| m.nrows() != d || m.ncols() != d) {
        return Err(Error::DimMismatch { expected: d, actual: bad.nrows() });
    }
    let diss = Dissipator::new(dev);
    let traces: Vec<C64> = inputs.iter().map(|m| m.trace()).collect();
    let mut states: Vec<CMatrix> = inputs.to_vec();

    for k in 0..pulse.n {
        let h = transmon_hamiltonian(pulse.omega[k], pulse.phi[k], pulse.delta[k], dev);
        let spread = 2.0 * max_row_sum(&h) + diss.max_rate();
        let substeps = ((pulse.dt * spread / 0.05).ceil() as usize).max(1);
        let step = pulse.dt / substeps as f64;
        let half = C64::from(0.5 * step);
        let full = C64::from(step);
        let sixth = C64::from(step / 6.0);
        for rho in states.iter_mut() {
            for _ in 0..substeps {
                let k1 = generator(&h, &diss, rho);
                let k2 = generator(&h, &diss, &(&*rho + &k1 * half));
                let k3 = generator(&h, &diss, &(&*rho + &k2 * half));
                let k4 = generator(&h, &diss, &(&*rho + &k3 * full));
                *rho += (k1 + (k2 + k3) * C64::from(2.0) + k4) * sixth;
            }
        }
        for (rho, t0) in states.iter().zip(&traces) {
            let drift = (rho.trace() - t0).norm();
            if !(drift <= 1e-6) || rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::StepTooLarge { drift });
            }
        }
    }
    Ok(states)
}
