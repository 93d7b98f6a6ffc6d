//! Observables and comparisons: state fidelity, the displaced-squeezed
//! versus mechano-optical experiment, the full laboratory sandwich, and
//! Wigner functions with their negativity.

use alloc::{format, string::String, vec::Vec};
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::analytic::fidelity::f_uni;
use crate::evolve::{evolve_unitary, TimeGrid};
use crate::fock::{self, DensityMatrix, ModeSpace, Operator, PureState, SpaceTag};
use crate::linalg::{CMatrix, CVector};
use crate::model::{
    build_h_ds, build_h_full_with_drive, build_h_mo, displacement_op, solve_frame, squeezing_op,
    FrameRates, PhysicalParams,
};
use crate::{Error, Result};

/// `|⟨ψ_1|ψ_2⟩|²`.
pub fn state_fidelity(psi1: &PureState, psi2: &PureState) -> Result<f64> {
    Ok(psi1.inner(psi2)?.norm_sqr())
}

/// Dimensionless combinations that bound the validity of the second-order
/// analysis at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidityFlags {
    /// `|g_0| t`.
    pub g0_t: f64,
    /// `Ω_m t`.
    pub omega_m_t: f64,
    /// `|g_0/Ω_m| < 0.1`.
    pub small_epsilon: bool,
}

impl ValidityFlags {
    pub fn new(rates: &FrameRates, t: f64) -> Self {
        Self {
            g0_t: rates.g0.abs() * t,
            omega_m_t: rates.omega_m * t,
            small_epsilon: !rates.epsilon_warning(),
        }
    }
}

/// Exact and second-order fidelities sampled on a time grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub f_exact: Vec<f64>,
    /// `1 - F_uni(t)`.
    pub f_perturbative: Vec<f64>,
    pub deficit_exact: Vec<f64>,
    pub deficit_perturbative: Vec<f64>,
    /// `g_0/Ω_m`.
    pub epsilon: f64,
    pub validity: Vec<ValidityFlags>,
    pub warnings: Vec<String>,
}

impl FidelityTrace {
    fn from_exact(rates: &FrameRates, times: &[f64], f_exact: Vec<f64>, warnings: Vec<String>) -> Self {
        let deficit_perturbative: Vec<f64> = times.iter().map(|&t| f_uni(rates, t - times[0])).collect();
        Self {
            times: times.to_vec(),
            deficit_exact: f_exact.iter().map(|f| 1.0 - f).collect(),
            f_perturbative: deficit_perturbative.iter().map(|d| 1.0 - d).collect(),
            deficit_perturbative,
            f_exact,
            epsilon: rates.epsilon(),
            validity: times
                .iter()
                .map(|&t| ValidityFlags::new(rates, t - times[0]))
                .collect(),
            warnings,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_f_exact(&self) -> f64 {
        self.f_exact.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_deficit(&self) -> f64 {
        self.deficit_exact.last().copied().unwrap_or(0.0)
    }

    /// Largest `|deficit_exact - deficit_perturbative| / deficit_perturbative`
    /// over times in `(0, t_max]` where the perturbative deficit is at least
    /// `floor` times its largest value in that window. Returns `NaN` when no
    /// time qualifies.
    pub fn max_deficit_relative_difference(&self, t_max: f64, floor: f64) -> f64 {
        let t0 = self.times.first().copied().unwrap_or(0.0);
        let window: Vec<usize> = (0..self.len())
            .filter(|&k| self.times[k] > t0 && self.times[k] - t0 <= t_max)
            .collect();
        let peak = window
            .iter()
            .map(|&k| self.deficit_perturbative[k])
            .fold(0.0, f64::max);
        let mut worst = f64::NAN;
        for &k in &window {
            let p = self.deficit_perturbative[k];
            if p > 0.0 && p >= floor * peak {
                let rel = (self.deficit_exact[k] - p).abs() / p;
                worst = if worst.is_nan() { rel } else { worst.max(rel) };
            }
        }
        worst
    }
}

fn edge_weight(psi: &PureState, space: &ModeSpace, edge: usize) -> f64 {
    let mut w = 0.0;
    for j in 0..space.n_a {
        for k in 0..space.n_b {
            if j + edge >= space.n_a || k + edge >= space.n_b {
                w += psi.amplitudes()[space.index(j, k)].norm_sqr();
            }
        }
    }
    w
}

fn truncation_warnings(rates: &FrameRates, psi0: &PureState, space: &ModeSpace) -> Vec<String> {
    let mut warnings = Vec::new();
    let w = edge_weight(psi0, space, fock::DEFAULT_EDGE);
    if w >= fock::COHERENT_TAIL {
        warnings.push(format!(
            "initial state has weight {w:.3e} on the top {} levels",
            fock::DEFAULT_EDGE
        ));
    }
    if rates.epsilon_warning() {
        warnings.push(format!(
            "g0/Omega_m = {:.3e} is not small; second-order estimates are unreliable",
            rates.epsilon()
        ));
    }
    warnings
}

/// Evolves `psi0` under `H_DS` and `H_MO` on the same grid and records both
/// the exact fidelity and `1 - F_uni`.
pub fn ds_vs_mo_experiment(
    rates: &FrameRates,
    psi0: &PureState,
    grid: &TimeGrid,
    space: &ModeSpace,
    include_small: bool,
) -> Result<FidelityTrace> {
    if psi0.dim() != space.joint_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.joint_dim(),
            found: psi0.dim(),
        });
    }
    let ds = evolve_unitary(&build_h_ds(rates, space, include_small)?, psi0, grid, "H_DS")?;
    let mo = evolve_unitary(&build_h_mo(rates, space)?, psi0, grid, "H_MO")?;
    let f_exact = ds
        .states
        .iter()
        .zip(&mo.states)
        .map(|(x, y)| state_fidelity(x, y))
        .collect::<Result<Vec<f64>>>()?;
    let mut warnings = truncation_warnings(rates, psi0, space);
    let final_edge = edge_weight(ds.final_state(), space, fock::DEFAULT_EDGE);
    if final_edge >= fock::COHERENT_TAIL {
        warnings.push(format!(
            "evolved state reaches weight {final_edge:.3e} on the top {} levels",
            fock::DEFAULT_EDGE
        ));
    }
    Ok(FidelityTrace::from_exact(rates, grid.times(), f_exact, warnings))
}

fn embed(psi: &PureState, small: &ModeSpace, big: &ModeSpace) -> CVector {
    let mut v = CVector::zeros(big.joint_dim());
    for j in 0..small.n_a {
        for k in 0..small.n_b {
            v[big.index(j, k)] = psi.amplitudes()[small.index(j, k)];
        }
    }
    v
}

fn restrict(v: &CVector, small: &ModeSpace, big: &ModeSpace) -> CVector {
    let mut out = CVector::zeros(small.joint_dim());
    for j in 0..small.n_a {
        for k in 0..small.n_b {
            out[small.index(j, k)] = v[big.index(j, k)];
        }
    }
    out
}

/// Laboratory-frame check of the sandwich identity: `D(α)S(r)ψ_0` is evolved
/// under the full Hamiltonian in `padded`, mapped back with `S^†(r)D^†(α)`,
/// and compared on `space` with `ψ_0` evolved under `H_MO`.
pub fn full_chain_experiment(
    params: &PhysicalParams,
    psi0: &PureState,
    grid: &TimeGrid,
    space: &ModeSpace,
    padded: &ModeSpace,
) -> Result<FidelityTrace> {
    if params.kappa != 0.0 {
        return Err(Error::param("kappa", "the sandwich identity is unitary; set kappa = 0"));
    }
    if padded.n_a < space.n_a || padded.n_b < space.n_b {
        return Err(Error::param("padded", "must contain the comparison space"));
    }
    if psi0.dim() != space.joint_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.joint_dim(),
            found: psi0.dim(),
        });
    }
    let frame = solve_frame(params)?;
    let rates = frame.rates();

    let d = displacement_op(frame.alpha, padded.n_a)?;
    let s = squeezing_op(Complex64::new(frame.r, 0.0), padded.n_b)?;
    let u = Operator::from_matrix(d.matrix().kronecker(s.matrix()), SpaceTag::Joint);
    let lab0 = PureState::from_vector_unchecked(u.matrix() * embed(psi0, space, padded));
    let tail = edge_weight(&lab0, padded, fock::DEFAULT_EDGE);
    if tail >= fock::COHERENT_TAIL {
        return Err(Error::TruncationTail {
            amplitude: frame.alpha_abs(),
            dim: padded.n_a,
            tail,
            required: fock::coherent_required_dim(frame.alpha_abs()) + space.n_a,
        });
    }

    let h_full = build_h_full_with_drive(params, frame.drive_rotated, padded)?;
    let lab = evolve_unitary(&h_full, &lab0, grid, "H_full")?;
    let mo = evolve_unitary(&build_h_mo(&rates, space)?, psi0, grid, "H_MO")?;
    let u_dag = u.adjoint();
    let f_exact = lab
        .states
        .iter()
        .zip(&mo.states)
        .map(|(x, y)| {
            let back = restrict(&u_dag.apply(x), space, padded);
            y.amplitudes().dotc(&back).norm_sqr()
        })
        .collect();
    let warnings = truncation_warnings(&rates, psi0, space);
    Ok(FidelityTrace::from_exact(&rates, grid.times(), f_exact, warnings))
}

/// Bounds and resolution of a phase-space grid in the quadratures
/// `x = (β + β^*)/√2`, `p = (β - β^*)/(i√2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_x: usize,
    pub n_p: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            n_x: n,
            n_p: n,
        }
    }

    /// Symmetric grid of half-width `√(2n̄) + 3` for the state's mean
    /// occupation `n̄`.
    pub fn for_state(rho: &DensityMatrix, n: usize) -> Self {
        let n_bar = (0..rho.dim())
            .map(|k| k as f64 * rho.matrix()[(k, k)].re)
            .sum::<f64>()
            .max(0.0);
        Self::square(libm::sqrt(2.0 * n_bar) + 3.0, n)
    }

    fn validate(&self) -> Result<()> {
        if self.n_x < 2 || self.n_p < 2 {
            return Err(Error::param("grid", "needs at least two points per axis"));
        }
        if !(self.x_max > self.x_min && self.p_max > self.p_min) {
            return Err(Error::param("grid", "bounds must be increasing"));
        }
        Ok(())
    }
}

/// Wigner function sampled on a rectangular grid, stored row-major with `x`
/// as the slow index.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WignerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_x: usize,
    pub n_p: usize,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_p + j]
    }

    /// Riemann sum of `W` over the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx() * self.dp()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫W dp` at each grid `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.n_x)
            .map(|i| (0..self.n_p).map(|j| self.get(i, j)).sum::<f64>() * self.dp())
            .collect()
    }

    /// `∫W dx` at each grid `p`.
    pub fn marginal_p(&self) -> Vec<f64> {
        (0..self.n_p)
            .map(|j| (0..self.n_x).map(|i| self.get(i, j)).sum::<f64>() * self.dx())
            .collect()
    }

    /// Fails when the Riemann sum misses unity by more than `tolerance`,
    /// meaning the grid does not contain the state.
    pub fn check_contains(&self, tolerance: f64) -> Result<()> {
        let total = self.integral();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::InvalidState(format!(
                "Wigner grid integrates to {total:.4}; enlarge the grid"
            )));
        }
        Ok(())
    }
}

fn wigner_point(rho: &CMatrix, x: f64, p: f64) -> f64 {
    let beta = Complex64::new(x, p) / core::f64::consts::SQRT_2;
    let d = fock::displacement_elements(beta * 2.0, rho.nrows());
    let mut acc = 0.0;
    for n in 0..rho.nrows() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mut row = Complex64::new(0.0, 0.0);
        for m in 0..rho.nrows() {
            row += rho[(n, m)] * d[(m, n)];
        }
        acc += sign * row.re;
    }
    acc / PI
}

/// `W(x, p) = (1/π) Tr[ρ D(2β) Π]` with `Π` the parity and
/// `β = (x + ip)/√2`, so the vacuum peaks at `1/π` and `∫W dx dp = 1`.
pub fn wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let mut grid = WignerGrid {
        x_min: spec.x_min,
        x_max: spec.x_max,
        p_min: spec.p_min,
        p_max: spec.p_max,
        n_x: spec.n_x,
        n_p: spec.n_p,
        values: Vec::with_capacity(spec.n_x * spec.n_p),
    };
    for i in 0..spec.n_x {
        let x = grid.x(i);
        for j in 0..spec.n_p {
            grid.values.push(wigner_point(rho.matrix(), x, grid.p(j)));
        }
    }
    Ok(grid)
}

/// Wigner values on rows `rows` of the grid only, for callers that spread
/// rows over threads.
pub fn wigner_rows(rho: &DensityMatrix, spec: &GridSpec, rows: core::ops::Range<usize>) -> Result<Vec<f64>> {
    spec.validate()?;
    let dx = (spec.x_max - spec.x_min) / (spec.n_x - 1) as f64;
    let dp = (spec.p_max - spec.p_min) / (spec.n_p - 1) as f64;
    let mut out = Vec::with_capacity(rows.len() * spec.n_p);
    for i in rows {
        let x = spec.x_min + i as f64 * dx;
        for j in 0..spec.n_p {
            out.push(wigner_point(rho.matrix(), x, spec.p_min + j as f64 * dp));
        }
    }
    Ok(out)
}

/// Riemann sum of `|min(W, 0)|`.
pub fn negativity_volume(w: &WignerGrid) -> f64 {
    w.values.iter().map(|&v| (-v).max(0.0)).sum::<f64>() * w.dx() * w.dp()
}
