//! Small dense linear-algebra helpers: an SU(2) element type used on the hot
//! propagation paths, Hermitian exponentials for larger Hilbert spaces, and
//! serde adapters for complex matrices.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Element of SU(2) stored as `[[a, -conj(b)], [b, conj(a)]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2 {
    pub a: C64,
    pub b: C64,
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 { a: ONE, b: ZERO };

    /// `exp(-i dt (field . sigma) / 2)`, i.e. evolution under `H = field . sigma / 2`.
    #[inline]
    pub fn from_field(field: Vec3, dt: f64) -> Su2 {
        let mag = norm(field);
        if mag == 0.0 {
            return Su2::IDENTITY;
        }
        let half = 0.5 * mag * dt;
        let (s, c) = half.sin_cos();
        let k = s / mag;
        Su2 {
            a: C64::new(c, -k * field[2]),
            b: C64::new(k * field[1], -k * field[0]),
        }
    }

    /// `self * rhs`
    #[inline]
    pub fn mul(&self, rhs: &Su2) -> Su2 {
        Su2 {
            a: self.a * rhs.a - self.b.conj() * rhs.b,
            b: self.b * rhs.a + self.a.conj() * rhs.b,
        }
    }

    pub fn dagger(&self) -> Su2 {
        Su2 {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.a * v[0] - self.b.conj() * v[1],
            self.b * v[0] + self.a.conj() * v[1],
        ]
    }

    pub fn trace(&self) -> C64 {
        C64::new(2.0 * self.a.re, 0.0)
    }

    pub fn to_matrix(&self) -> Matrix2<C64> {
        Matrix2::new(self.a, -self.b.conj(), self.b, self.a.conj())
    }

    pub fn to_dmatrix(&self) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[self.a, -self.b.conj(), self.b, self.a.conj()])
    }

    /// Renormalise so that `|a|^2 + |b|^2 = 1`.
    pub fn renormalize(&mut self) {
        let n = (self.a.norm_sqr() + self.b.norm_sqr()).sqrt();
        self.a /= n;
        self.b /= n;
    }
}

/// `Tr(a^dagger b)` for two SU(2) elements.
#[inline]
pub fn su2_overlap(a: &Su2, b: &Su2) -> C64 {
    // Tr(A^dag B) = 2 Re(conj(a_a) b_a + conj(a_b) b_b) for SU(2)
    let z = a.a.conj() * b.a + a.b.conj() * b.b;
    C64::new(2.0 * z.re, 0.0)
}

/// Pauli matrices as dense 2x2.
pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `exp(-i h dt)` for Hermitian `h`, via its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, dt: f64) -> CMatrix {
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut phases = CMatrix::zeros(n, n);
    for k in 0..n {
        phases[(k, k)] = C64::from_polar(1.0, -eig.eigenvalues[k] * dt);
    }
    let v = &eig.eigenvectors;
    v * phases * v.adjoint()
}

/// Largest absolute entry of `u^dagger u - 1`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Multiply `b` by the global phase that best aligns it with `a`.
pub fn align_global_phase(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let overlap = (a.adjoint() * b).trace();
    if overlap.norm() == 0.0 {
        return b.clone();
    }
    let phase = overlap.conj() / overlap.norm();
    b * phase
}

/// Max-norm distance after global-phase alignment.
pub fn phase_invariant_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs_diff(a, &align_global_phase(a, b))
}

/// Serde adapter storing a complex matrix as nested rows of `[re, im]` pairs.
pub mod complex_matrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(CMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su2_matches_dense_exponential() {
        let field = [0.3, -1.1, 0.7];
        let dt = 0.37;
        let u = Su2::from_field(field, dt).to_dmatrix();
        let h = (pauli_x() * C64::from(field[0])
            + pauli_y() * C64::from(field[1])
            + pauli_z() * C64::from(field[2]))
            * C64::from(0.5);
        let oracle = (h * C64::new(0.0, -dt)).exp();
        assert!(max_abs_diff(&u, &oracle) < 1e-14);
    }

    #[test]
    fn su2_product_matches_matrix_product() {
        let a = Su2::from_field([1.0, 0.2, -0.4], 0.8);
        let b = Su2::from_field([-0.3, 0.9, 0.5], 1.3);
        let dense = a.to_dmatrix() * b.to_dmatrix();
        assert!(max_abs_diff(&a.mul(&b).to_dmatrix(), &dense) < 1e-14);
        let ov = su2_overlap(&a, &b);
        let dense_ov = (a.to_dmatrix().adjoint() * b.to_dmatrix()).trace();
        assert!((ov - dense_ov).norm() < 1e-14);
    }

    #[test]
    fn hermitian_exponential_is_unitary() {
        let h = CMatrix::from_fn(4, 4, |i, j| {
            let v = C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.3);
            if i == j {
                C64::new(v.re, 0.0)
            } else {
                v
            }
        });
        let h = (&h + h.adjoint()) * C64::from(0.5);
        let u = expm_hermitian(&h, 0.9);
        assert!(unitarity_defect(&u) < 1e-13);
        let oracle = (h * C64::new(0.0, -0.9)).exp();
        assert!(max_abs_diff(&u, &oracle) < 1e-12);
    }
}
