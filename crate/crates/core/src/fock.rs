//! Operator algebra over truncated single- and two-mode Fock spaces.

use alloc::{format, vec::Vec};
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::{self, CMatrix, CVector, HermitianEigen};
use crate::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Default number of top Fock levels excluded from identity checks.
pub const DEFAULT_EDGE: usize = 2;
/// Largest acceptable truncated weight for coherent states.
pub const COHERENT_TAIL: f64 = 1e-8;

const STATE_NORM_TOL: f64 = 1e-10;
const RHO_HERMITIAN_TOL: f64 = 1e-10;
const RHO_TRACE_TOL: f64 = 1e-9;
const RHO_POSITIVITY_TOL: f64 = 1e-9;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Truncation of the cavity (`a`) and mechanical (`b`) modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSpace {
    pub n_a: usize,
    pub n_b: usize,
}

impl ModeSpace {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        for n in [n_a, n_b] {
            if n < 2 {
                return Err(Error::DimensionTooSmall(n));
            }
        }
        Ok(Self { n_a, n_b })
    }

    pub fn joint_dim(&self) -> usize {
        self.n_a * self.n_b
    }

    /// Joint index of `|j⟩_a ⊗ |k⟩_b`.
    pub fn index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.n_a && k < self.n_b);
        j * self.n_b + k
    }

    /// Inverse of [`ModeSpace::index`].
    pub fn levels(&self, index: usize) -> (usize, usize) {
        (index / self.n_b, index % self.n_b)
    }
}

/// Which Hilbert space an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpaceTag {
    ModeA,
    ModeB,
    Joint,
}

/// Dense complex square matrix tagged with the space it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    tag: SpaceTag,
}

impl Operator {
    pub fn new(matrix: CMatrix, tag: SpaceTag) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self { matrix, tag })
    }

    pub(crate) fn from_matrix(matrix: CMatrix, tag: SpaceTag) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix, tag }
    }

    pub fn identity(dim: usize, tag: SpaceTag) -> Self {
        Self::from_matrix(CMatrix::identity(dim, dim), tag)
    }

    pub fn zeros(dim: usize, tag: SpaceTag) -> Self {
        Self::from_matrix(CMatrix::zeros(dim, dim), tag)
    }

    /// Diagonal operator with the given real entries.
    pub fn diagonal(entries: impl IntoIterator<Item = f64>, tag: SpaceTag) -> Self {
        let d: Vec<Complex64> = entries.into_iter().map(c).collect();
        let v = DVector::from_vec(d);
        Self::from_matrix(CMatrix::from_diagonal(&v), tag)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.matrix.adjoint(), self.tag)
    }

    pub fn scale(&self, w: f64) -> Self {
        Self::from_matrix(&self.matrix * c(w), self.tag)
    }

    pub fn scale_complex(&self, w: Complex64) -> Self {
        Self::from_matrix(&self.matrix * w, self.tag)
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        Self::from_matrix(linalg::commutator(&self.matrix, &other.matrix), self.tag)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Fails unless `max |M - M^H| ≤ tol · max(1, max|M|)`.
    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn apply(&self, psi: &PureState) -> CVector {
        &self.matrix * psi.amplitudes()
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> Complex64 {
        psi.amplitudes().dotc(&self.apply(psi))
    }

    /// `exp(G)` for an anti-Hermitian generator `G = self`.
    pub fn exp_anti_hermitian(&self) -> Result<Self> {
        Ok(Self::from_matrix(
            linalg::expm_anti_hermitian(&self.matrix)?,
            self.tag,
        ))
    }

    /// `U^H O U`.
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        Self::from_matrix(u.matrix.adjoint() * &self.matrix * &u.matrix, self.tag)
    }

    /// `max |O^H O - 1|`, entrywise.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim();
        linalg::max_abs(&(self.matrix.adjoint() * &self.matrix - CMatrix::identity(n, n)))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(&self.matrix + &rhs.matrix, self.tag)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(&self.matrix - &rhs.matrix, self.tag)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(&self.matrix * &rhs.matrix, self.tag)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::from_matrix(-&self.matrix, self.tag)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Accepts a vector that is already normalized to within `1e-10`.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm {norm_sq} differs from 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize norm {norm}")));
        }
        Ok(Self {
            amplitudes: amplitudes / c(norm),
        })
    }

    pub(crate) fn from_vector_unchecked(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    /// Number state `|n⟩` in a space of dimension `dim`.
    pub fn basis(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidState(format!(
                "level {n} outside a space of dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[n] = c(1.0);
        Ok(Self { amplitudes: v })
    }

    /// `|j⟩_a ⊗ |k⟩_b`.
    pub fn fock(space: &ModeSpace, j: usize, k: usize) -> Result<Self> {
        if j >= space.n_a || k >= space.n_b {
            return Err(Error::InvalidState(format!(
                "levels ({j}, {k}) outside truncation {}x{}",
                space.n_a, space.n_b
            )));
        }
        Self::basis(space.joint_dim(), space.index(j, k))
    }

    /// `|ψ_a⟩ ⊗ |ψ_b⟩` in mode-a-major order.
    pub fn product(a: &PureState, b: &PureState) -> Self {
        Self {
            amplitudes: a.amplitudes.kronecker(&b.amplitudes),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Rejects matrices that are not Hermitian to `1e-10` or not of unit
    /// trace to `1e-9`. The smallest eigenvalue must be `≥ -1e-9`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let herm = linalg::hermiticity_deviation(&matrix);
        if herm > RHO_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (deviation {herm:e})"
            )));
        }
        let trace = matrix.trace();
        if (trace - c(1.0)).norm() > RHO_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let rho = Self { matrix };
        let min = rho.min_eigenvalue()?;
        if min < -RHO_POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    /// `ρ_a ⊗ ρ_b`.
    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Self {
        Self {
            matrix: a.matrix.kronecker(&b.matrix),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `tr(ρ O)`.
    pub fn expectation(&self, op: &Operator) -> Complex64 {
        // tr(ρO) = Σ_ij ρ_ij O_ji
        let n = self.dim();
        let mut acc = c(0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * op.matrix()[(j, i)];
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = HermitianEigen::new(&self.matrix)?;
        Ok(eig.values.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }
}

/// Mode kept by [`partial_trace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    A,
    B,
}

/// Single-mode lowering operator: `⟨n-1|a|n⟩ = √n`.
pub fn annihilation(space_dim: usize) -> Result<CMatrix> {
    if space_dim < 2 {
        return Err(Error::DimensionTooSmall(space_dim));
    }
    let mut m = CMatrix::zeros(space_dim, space_dim);
    for n in 1..space_dim {
        m[(n - 1, n)] = c(libm::sqrt(n as f64));
    }
    Ok(m)
}

/// `a^† a` with eigenvalues `0, 1, …, dim-1`.
pub fn number(space_dim: usize) -> Result<CMatrix> {
    if space_dim < 2 {
        return Err(Error::DimensionTooSmall(space_dim));
    }
    Ok(CMatrix::from_diagonal(&DVector::from_fn(space_dim, |n, _| {
        c(n as f64)
    })))
}

/// Position and momentum operators of an oscillator of mass `mass` and
/// angular frequency `omega`, in units with `ħ = 1`.
pub fn position_momentum(space_dim: usize, mass: f64, omega: f64) -> Result<(Operator, Operator)> {
    if !(mass > 0.0) {
        return Err(Error::param("mass", "must be positive"));
    }
    if !(omega > 0.0) {
        return Err(Error::param("omega", "must be positive"));
    }
    let b = annihilation(space_dim)?;
    let bd = b.adjoint();
    let x_scale = libm::sqrt(1.0 / (2.0 * mass * omega));
    let p_scale = libm::sqrt(mass * omega / 2.0);
    let x = (&b + &bd) * c(x_scale);
    let p = (&b - &bd) * Complex64::new(0.0, -p_scale);
    Ok((
        Operator::from_matrix(x, SpaceTag::ModeB),
        Operator::from_matrix(p, SpaceTag::ModeB),
    ))
}

/// Kronecker product `A ⊗ B` on the joint space.
pub fn tensor(a: &Operator, b: &Operator, space: &ModeSpace) -> Result<Operator> {
    if a.dim() != space.n_a {
        return Err(Error::DimensionMismatch {
            expected: space.n_a,
            found: a.dim(),
        });
    }
    if b.dim() != space.n_b {
        return Err(Error::DimensionMismatch {
            expected: space.n_b,
            found: b.dim(),
        });
    }
    Ok(Operator::from_matrix(
        a.matrix().kronecker(b.matrix()),
        SpaceTag::Joint,
    ))
}

/// Number of levels needed for a coherent state of amplitude `|alpha|` to
/// leave less than [`COHERENT_TAIL`] outside the truncation.
pub fn coherent_required_dim(alpha: f64) -> usize {
    let mut weight = libm::exp(-alpha * alpha);
    let mut term = weight;
    let mut n = 0usize;
    while 1.0 - weight >= COHERENT_TAIL {
        n += 1;
        term *= alpha * alpha / n as f64;
        weight += term;
        if n > 100_000 {
            break;
        }
    }
    (n + 1).max(2)
}

/// Coherent state `|α⟩` truncated to `space_dim` levels and renormalized.
pub fn coherent_state(amplitude: Complex64, space_dim: usize) -> Result<PureState> {
    if space_dim < 2 {
        return Err(Error::DimensionTooSmall(space_dim));
    }
    let mut amps = CVector::zeros(space_dim);
    let mut term = c(libm::exp(-amplitude.norm_sqr() / 2.0));
    amps[0] = term;
    for n in 1..space_dim {
        term = term * amplitude / libm::sqrt(n as f64);
        amps[n] = term;
    }
    let tail = (1.0 - amps.norm_squared()).max(0.0);
    if tail >= COHERENT_TAIL {
        return Err(Error::TruncationTail {
            amplitude: amplitude.norm(),
            dim: space_dim,
            tail,
            required: coherent_required_dim(amplitude.norm()),
        });
    }
    PureState::normalized(amps)
}

/// Exact matrix elements `⟨m|D(γ)|n⟩` of the untruncated displacement for
/// `m, n < space_dim`.
pub fn displacement_elements(gamma: Complex64, space_dim: usize) -> CMatrix {
    let mut d = CMatrix::zeros(space_dim, space_dim);
    if space_dim == 0 {
        return d;
    }
    d[(0, 0)] = c(libm::exp(-gamma.norm_sqr() / 2.0));
    for m in 1..space_dim {
        d[(m, 0)] = d[(m - 1, 0)] * gamma / libm::sqrt(m as f64);
    }
    // D a^† = (a^† - γ^*) D
    let gc = gamma.conj();
    for n in 1..space_dim {
        let inv = 1.0 / libm::sqrt(n as f64);
        for m in 0..space_dim {
            let up = if m > 0 {
                d[(m - 1, n - 1)] * libm::sqrt(m as f64)
            } else {
                Complex64::new(0.0, 0.0)
            };
            d[(m, n)] = (up - gc * d[(m, n - 1)]) * inv;
        }
    }
    d
}

/// Reduced density matrix of the kept mode.
pub fn partial_trace(rho: &DensityMatrix, keep: Mode, space: &ModeSpace) -> Result<DensityMatrix> {
    if rho.dim() != space.joint_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.joint_dim(),
            found: rho.dim(),
        });
    }
    let m = rho.matrix();
    let reduced = match keep {
        Mode::A => CMatrix::from_fn(space.n_a, space.n_a, |j, jp| {
            (0..space.n_b)
                .map(|k| m[(space.index(j, k), space.index(jp, k))])
                .sum()
        }),
        Mode::B => CMatrix::from_fn(space.n_b, space.n_b, |k, kp| {
            (0..space.n_a)
                .map(|j| m[(space.index(j, k), space.index(j, kp))])
                .sum()
        }),
    };
    Ok(DensityMatrix::from_matrix_unchecked(reduced))
}

/// Bose–Einstein occupation `1 / (exp(ħω / k_B T) - 1)` for `omega` in rad/s
/// and `temperature` in kelvin.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::param("omega", "must be positive"));
    }
    if !(temperature >= 0.0) {
        return Err(Error::param("temperature", "must be nonnegative"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / libm::expm1(HBAR * omega / (K_B * temperature)))
}

/// Ladder and number operators of both modes lifted to the joint space.
#[derive(Clone, Debug)]
pub struct JointLadder {
    pub space: ModeSpace,
    pub a: Operator,
    pub b: Operator,
    pub n_a: Operator,
    pub n_b: Operator,
    /// Single-mode matrices, kept for builders that prefer Kronecker forms.
    pub a_single: CMatrix,
    pub b_single: CMatrix,
}

impl JointLadder {
    pub fn new(space: ModeSpace) -> Result<Self> {
        let a1 = annihilation(space.n_a)?;
        let b1 = annihilation(space.n_b)?;
        let ia = CMatrix::identity(space.n_a, space.n_a);
        let ib = CMatrix::identity(space.n_b, space.n_b);
        let joint = |m: CMatrix| Operator::from_matrix(m, SpaceTag::Joint);
        Ok(Self {
            space,
            a: joint(a1.kronecker(&ib)),
            b: joint(ia.kronecker(&b1)),
            n_a: joint(number(space.n_a)?.kronecker(&ib)),
            n_b: joint(ia.kronecker(&number(space.n_b)?)),
            a_single: a1,
            b_single: b1,
        })
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.space.joint_dim(), SpaceTag::Joint)
    }

    /// Lifts single-mode matrices `A`, `B` to `A ⊗ B`.
    pub fn kron(&self, a: &CMatrix, b: &CMatrix) -> Operator {
        Operator::from_matrix(a.kronecker(b), SpaceTag::Joint)
    }
}

/// Largest entrywise deviation between two operators restricted to the
/// block of levels `j < block_a`, `k < block_b` (joint) or `n < block_a`
/// (single mode).
pub fn block_deviation(
    x: &Operator,
    y: &Operator,
    space: Option<&ModeSpace>,
    block_a: usize,
    block_b: usize,
) -> f64 {
    let indices = block_indices(x.dim(), space, block_a, block_b);
    let mut dev = 0.0_f64;
    for &r in &indices {
        for &s in &indices {
            dev = dev.max((x.entry(r, s) - y.entry(r, s)).norm());
        }
    }
    dev
}

/// Largest entry magnitude on the same block as [`block_deviation`].
pub fn block_max_abs(x: &Operator, space: Option<&ModeSpace>, block_a: usize, block_b: usize) -> f64 {
    let indices = block_indices(x.dim(), space, block_a, block_b);
    let mut m = 0.0_f64;
    for &r in &indices {
        for &s in &indices {
            m = m.max(x.entry(r, s).norm());
        }
    }
    m
}

fn block_indices(dim: usize, space: Option<&ModeSpace>, block_a: usize, block_b: usize) -> Vec<usize> {
    match space {
        Some(sp) => {
            let mut out = Vec::with_capacity(block_a * block_b);
            for j in 0..block_a.min(sp.n_a) {
                for k in 0..block_b.min(sp.n_b) {
                    out.push(sp.index(j, k));
                }
            }
            out
        }
        None => (0..block_a.min(dim)).collect(),
    }
}

/// Deviation on the interior block, excluding the top `edge` levels of each
/// mode where truncated ladder identities break down.
pub fn interior_deviation(x: &Operator, y: &Operator, space: Option<&ModeSpace>, edge: usize) -> f64 {
    match space {
        Some(sp) => block_deviation(
            x,
            y,
            space,
            sp.n_a.saturating_sub(edge),
            sp.n_b.saturating_sub(edge),
        ),
        None => block_deviation(x, y, None, x.dim().saturating_sub(edge), 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(m: CMatrix) -> Operator {
        Operator::from_matrix(m, SpaceTag::ModeA)
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(2).unwrap();
        assert_eq!(a[(0, 1)], c(1.0));
        assert_eq!(a[(0, 0)], c(0.0));
        assert_eq!(a[(1, 0)], c(0.0));
        assert_eq!(a[(1, 1)], c(0.0));
        let a3 = annihilation(3).unwrap();
        assert_relative_eq!(a3[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
        let vac = PureState::basis(5, 0).unwrap();
        let out = annihilation(5).unwrap() * vac.amplitudes();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn rejects_tiny_spaces() {
        assert_eq!(annihilation(1), Err(Error::DimensionTooSmall(1)));
        assert!(ModeSpace::new(2, 1).is_err());
        assert!(ModeSpace::new(2, 2).is_ok());
    }

    #[test]
    fn ladder_commutator_on_interior() {
        let a = single(annihilation(12).unwrap());
        let comm = a.commutator(&a.adjoint());
        let id = Operator::identity(12, SpaceTag::ModeA);
        assert!(interior_deviation(&comm, &id, None, DEFAULT_EDGE) <= 1e-12);
        // the top level carries the truncation defect
        assert!((comm.entry(11, 11).re - (-11.0)).abs() < 1e-12);
    }

    #[test]
    fn number_spectrum_is_exact() {
        let a = single(annihilation(7).unwrap());
        let n = &a.adjoint() * &a;
        let direct = number(7).unwrap();
        for k in 0..7 {
            assert_eq!(direct[(k, k)].re, k as f64);
            assert!((n.entry(k, k).re - k as f64).abs() <= 1e-14);
        }
    }

    #[test]
    fn position_momentum_canonical() {
        let (m, w) = (2.5, 0.7);
        let (x, p) = position_momentum(15, m, w).unwrap();
        let comm = x.commutator(&p);
        let i_id = Operator::identity(15, SpaceTag::ModeB).scale_complex(Complex64::i());
        assert!(interior_deviation(&comm, &i_id, None, 1) <= 1e-12);
        assert_relative_eq!((&x * &x).entry(0, 0).re, 1.0 / (2.0 * m * w), epsilon = 1e-14);
        assert_relative_eq!(x.entry(1, 0).re, (1.0 / (2.0 * m * w)).sqrt(), epsilon = 1e-14);
        assert!(position_momentum(4, 0.0, 1.0).is_err());
        assert!(position_momentum(4, 1.0, -1.0).is_err());
    }

    #[test]
    fn tensor_examples() {
        let space = ModeSpace::new(4, 5).unwrap();
        let ia = Operator::identity(4, SpaceTag::ModeA);
        let ib = Operator::identity(5, SpaceTag::ModeB);
        let id = tensor(&ia, &ib, &space).unwrap();
        assert_eq!(id, Operator::identity(20, SpaceTag::Joint));

        let na = single(number(4).unwrap());
        let lifted = tensor(&na, &ib, &space).unwrap();
        let psi = PureState::fock(&space, 2, 3).unwrap();
        let out = lifted.apply(&psi);
        assert_relative_eq!((out - psi.amplitudes() * c(2.0)).norm(), 0.0);

        let ta = single(CMatrix::from_fn(4, 4, |i, j| Complex64::new(i as f64 + 1.0, j as f64)));
        let tb = Operator::from_matrix(
            CMatrix::from_fn(5, 5, |i, j| Complex64::new((i * j) as f64, 1.0)),
            SpaceTag::ModeB,
        );
        let t = tensor(&ta, &tb, &space).unwrap();
        assert_relative_eq!((t.trace() - ta.trace() * tb.trace()).norm(), 0.0, epsilon = 1e-9);

        assert!(tensor(&ib, &ib, &space).is_err());
    }

    #[test]
    fn coherent_examples() {
        let vac = coherent_state(c(0.0), 6).unwrap();
        assert_eq!(vac, PureState::basis(6, 0).unwrap());

        let one = coherent_state(c(1.0), 20).unwrap();
        assert_relative_eq!(one.amplitudes()[1].norm_sqr(), (-1.0f64).exp(), epsilon = 1e-9);
        let n = single(number(20).unwrap());
        assert_relative_eq!(n.expectation(&one).re, 1.0, epsilon = 1e-8);

        match coherent_state(c(3.0), 8) {
            Err(Error::TruncationTail { required, .. }) => {
                assert!(coherent_state(c(3.0), required).is_ok());
                assert!(coherent_state(c(3.0), required - 1).is_err());
            }
            other => panic!("expected tail error, got {other:?}"),
        }
    }

    #[test]
    fn coherent_is_eigenstate_on_interior() {
        let alpha = Complex64::new(0.8, -0.5);
        let psi = coherent_state(alpha, 25).unwrap();
        let a = annihilation(25).unwrap();
        let out = &a * psi.amplitudes();
        for n in 0..23 {
            assert!((out[n] - alpha * psi.amplitudes()[n]).norm() < 1e-8);
        }
    }

    #[test]
    fn displacement_elements_match_exponential() {
        let gamma = Complex64::new(0.7, 0.4);
        let d = displacement_elements(gamma, 10);
        let psi = coherent_state(gamma, 30).unwrap();
        for m in 0..10 {
            assert!((d[(m, 0)] - psi.amplitudes()[m]).norm() < 1e-12);
        }
        // exponential in a large space is exact on the low block
        let a = annihilation(60).unwrap();
        let g = &a.adjoint() * gamma - &a * gamma.conj();
        let big = linalg::expm_anti_hermitian(&g).unwrap();
        for m in 0..10 {
            for n in 0..10 {
                assert!((d[(m, n)] - big[(m, n)]).norm() < 1e-12, "{m} {n}");
            }
        }
    }

    #[test]
    fn partial_trace_examples() {
        let space = ModeSpace::new(3, 4).unwrap();
        let pa = coherent_state(Complex64::new(0.3, 0.1), 3);
        // amplitude small enough for three levels? no: fall back to a mixed product
        assert!(pa.is_err());
        let rho_a = DensityMatrix::new(CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c([0.5, 0.3, 0.2][i])
            } else if (i, j) == (0, 1) {
                Complex64::new(0.1, 0.05)
            } else if (i, j) == (1, 0) {
                Complex64::new(0.1, -0.05)
            } else {
                c(0.0)
            }
        }))
        .unwrap();
        let rho_b = PureState::normalized(CVector::from_fn(4, |k, _| c(k as f64 + 1.0)))
            .unwrap()
            .density_matrix();
        let joint = DensityMatrix::product(&rho_a, &rho_b);
        let back = partial_trace(&joint, Mode::A, &space).unwrap();
        assert!(linalg::max_abs(&(back.matrix() - rho_a.matrix())) < 1e-14);
        let back_b = partial_trace(&joint, Mode::B, &space).unwrap();
        assert!(linalg::max_abs(&(back_b.matrix() - rho_b.matrix())) < 1e-14);

        let mut bell = CVector::zeros(12);
        bell[space.index(0, 0)] = c(1.0);
        bell[space.index(1, 1)] = c(1.0);
        let bell = PureState::normalized(bell).unwrap().density_matrix();
        let red = partial_trace(&bell, Mode::A, &space).unwrap();
        assert_relative_eq!(red.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(red.matrix()[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(red.matrix()[(0, 1)].norm(), 0.0);
        assert_relative_eq!(red.trace().re, 1.0, epsilon = 1e-12);

        let wrong = ModeSpace::new(2, 4).unwrap();
        assert!(partial_trace(&bell, Mode::A, &wrong).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = CMatrix::identity(2, 2) * c(0.5);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = c(0.1);
        assert!(DensityMatrix::new(m.clone()).is_err());
        let neg = CMatrix::from_diagonal(&DVector::from_vec(alloc::vec![c(1.1), c(-0.1)]));
        assert!(DensityMatrix::new(neg).is_err());
        let bad_trace = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
    }

    #[test]
    fn thermal_occupation_values() {
        let tau = core::f64::consts::TAU;
        let membrane = thermal_occupation(tau * 5.8e6, 0.010).unwrap();
        assert!((membrane - 35.0).abs() / 35.0 < 0.03, "{membrane}");
        let cqed = thermal_occupation(tau * 300e6, 0.010).unwrap();
        assert!((cqed - 0.3).abs() < 0.05, "{cqed}");
        assert_eq!(thermal_occupation(1.0, 0.0).unwrap(), 0.0);
        assert!(thermal_occupation(0.0, 1.0).is_err());
        assert!(thermal_occupation(1.0, -1.0).is_err());
    }

    #[test]
    fn pure_state_checks() {
        assert!(PureState::new(CVector::from_element(3, c(1.0))).is_err());
        assert!(PureState::normalized(CVector::zeros(3)).is_err());
        let a = PureState::basis(3, 0).unwrap();
        let b = PureState::basis(4, 0).unwrap();
        assert!(a.inner(&b).is_err());
        assert!(PureState::basis(3, 3).is_err());
    }
}
