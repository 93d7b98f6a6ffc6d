//! Dense complex linear algebra helpers: Hermitian spectral decomposition,
//! exponentials built from it, and Kronecker-structured conjugation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_SWEEPS: usize = 0;

/// Largest entry magnitude.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M - M^H|`, entrywise.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Spectral decomposition `M = V diag(λ) V^H` of a Hermitian matrix.
///
/// Real symmetric input (all imaginary parts exactly zero) goes through the
/// real symmetric solver.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.ncols(),
            });
        }
        if m.iter().all(|z| z.im == 0.0) {
            let real = m.map(|z| z.re);
            let eig = real
                .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_SWEEPS)
                .ok_or(Error::Eigen { dim: n })?;
            Ok(Self {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
            })
        } else {
            let eig = m
                .clone()
                .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_SWEEPS)
                .ok_or(Error::Eigen { dim: n })?;
            Ok(Self {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            })
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues sorted ascending.
    pub fn sorted_values(&self) -> alloc::vec::Vec<f64> {
        let mut v: alloc::vec::Vec<f64> = self.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `f(M) = V diag(f(λ)) V^H` for a complex-valued spectral function.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= f(lambda);
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i M t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.apply_fn(|lambda| phase(-lambda * t))
    }

    /// Coordinates of `v` in the eigenbasis, `V^H v`.
    pub fn to_eigenbasis(&self, v: &CVector) -> CVector {
        self.vectors.ad_mul(v)
    }

    /// `exp(-i M t) v` given eigenbasis coordinates of `v`.
    pub fn evolve_coords(&self, coords: &CVector, t: f64) -> CVector {
        let rotated = CVector::from_iterator(
            coords.len(),
            coords
                .iter()
                .zip(self.values.iter())
                .map(|(c, &lambda)| c * phase(-lambda * t)),
        );
        &self.vectors * rotated
    }
}

/// `e^{iθ}`.
pub fn phase(theta: f64) -> Complex64 {
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

/// `exp(G)` for anti-Hermitian `G`, via the spectral decomposition of the
/// Hermitian matrix `iG`. The result is unitary to rounding.
pub fn expm_anti_hermitian(g: &CMatrix) -> Result<CMatrix> {
    let h = g * Complex64::i();
    let dev = hermiticity_deviation(&h);
    if dev > 1e-12 * max_abs(&h).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    // exp(G) = exp(-i (iG))
    Ok(HermitianEigen::new(&h)?.propagator(1.0))
}

/// Right multiplication `H (A ⊗ B)` without forming the Kronecker product.
pub fn mul_kron_right(h: &CMatrix, a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (n_a, n_b) = (a.nrows(), b.nrows());
    let n = n_a * n_b;
    assert_eq!(h.ncols(), n, "Kronecker factor dimensions do not match");
    let rows = h.nrows();
    let zero = Complex64::new(0.0, 0.0);

    let mut tmp = CMatrix::zeros(rows, n);
    for j in 0..n_a {
        for kp in 0..n_b {
            let mut col = tmp.column_mut(j * n_b + kp);
            for k in 0..n_b {
                let w = b[(k, kp)];
                if w != zero {
                    col.axpy(w, &h.column(j * n_b + k), Complex64::new(1.0, 0.0));
                }
            }
        }
    }
    let mut out = CMatrix::zeros(rows, n);
    for jp in 0..n_a {
        for kp in 0..n_b {
            let mut col = out.column_mut(jp * n_b + kp);
            for j in 0..n_a {
                let w = a[(j, jp)];
                if w != zero {
                    col.axpy(w, &tmp.column(j * n_b + kp), Complex64::new(1.0, 0.0));
                }
            }
        }
    }
    out
}

/// `(A ⊗ B)^H H (A ⊗ B)`, costing `O(N² (n_a + n_b))` instead of `O(N³)`.
pub fn kron_conjugate(h: &CMatrix, a: &CMatrix, b: &CMatrix) -> CMatrix {
    let right = mul_kron_right(h, a, b);
    mul_kron_right(&right.adjoint(), a, b).adjoint()
}
