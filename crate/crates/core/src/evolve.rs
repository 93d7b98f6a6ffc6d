//! Unitary and open-system propagation on a uniform time grid.

use alloc::{format, string::String, vec::Vec};
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::fock::{DensityMatrix, Operator, PureState};
use crate::linalg::{self, CMatrix, CVector, HermitianEigen};
use crate::model::FrameRates;
use crate::quad::rk4_step;
use crate::{Error, Result};

/// Relative Hermiticity tolerance for generators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest final-state change tolerated when the step count is doubled.
pub const STEP_TOL: f64 = 1e-8;
/// Samples per shortest period used by [`default_steps`].
pub const SAMPLES_PER_PERIOD: f64 = 200.0;
/// Upper bound on [`default_steps`].
pub const MAX_DEFAULT_STEPS: usize = 10_000;

const POSITIVITY_WARN: f64 = -1e-8;

/// Uniform sampling of `[t0, t1]` with `n_steps` intervals.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::param("t1", "must be finite and exceed t0"));
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        let dt = (t1 - t0) / n_steps as f64;
        let mut times: Vec<f64> = (0..n_steps).map(|k| t0 + k as f64 * dt).collect();
        times.push(t1);
        Ok(Self {
            t0,
            t1,
            n_steps,
            times,
        })
    }

    /// Sample times, `n_steps + 1` of them, ending exactly at `t1`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Number of steps giving 200 samples per shortest time scale of the rates
/// (cavity and mechanical periods, half the coupling period), capped at
/// [`MAX_DEFAULT_STEPS`].
pub fn default_steps(rates: &FrameRates, span: f64) -> usize {
    let mut period = f64::INFINITY;
    if rates.omega_c != 0.0 {
        period = period.min(TAU / rates.omega_c.abs());
    }
    period = period.min(TAU / rates.omega_m);
    if rates.g0 != 0.0 {
        period = period.min(PI / rates.g0.abs());
    }
    let n = libm::ceil(SAMPLES_PER_PERIOD * span.abs() / period);
    (n as usize).clamp(1, MAX_DEFAULT_STEPS)
}

/// Per-run drift bookkeeping.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    /// `max_k |‖ψ_k‖² - 1|` or `max_k |tr ρ_k - 1|`.
    pub max_norm_drift: f64,
    /// Largest relative change of `⟨H⟩` (unitary runs only).
    pub max_energy_drift: f64,
    /// Smallest density-matrix eigenvalue seen at sample times.
    pub min_eigenvalue: Option<f64>,
    pub max_purity: Option<f64>,
    /// Step count actually used per sample interval.
    pub substeps: usize,
    pub warnings: Vec<String>,
}

/// States at every grid time plus provenance.
#[derive(Clone, Debug)]
pub struct EvolutionResult<S> {
    pub grid: TimeGrid,
    pub states: Vec<S>,
    pub generator_label: String,
    pub diagnostics: Diagnostics,
}

impl<S> EvolutionResult<S> {
    pub fn final_state(&self) -> &S {
        self.states.last().expect("a grid always has at least two samples")
    }
}

fn check_generator(h: &Operator, dim: usize) -> Result<()> {
    if h.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: dim,
        });
    }
    h.ensure_hermitian(HERMITIAN_TOL)
}

/// `exp(-iHt)` through one spectral decomposition of `H`.
#[derive(Clone, Debug)]
pub struct UnitaryPropagator {
    eigen: HermitianEigen,
}

impl UnitaryPropagator {
    pub fn new(h: &Operator) -> Result<Self> {
        h.ensure_hermitian(HERMITIAN_TOL)?;
        Ok(Self {
            eigen: HermitianEigen::new(h.matrix())?,
        })
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    pub fn matrix(&self, t: f64) -> CMatrix {
        self.eigen.propagator(t)
    }

    pub fn apply(&self, psi: &PureState, t: f64) -> PureState {
        let coords = self.eigen.to_eigenbasis(psi.amplitudes());
        PureState::from_vector_unchecked(self.eigen.evolve_coords(&coords, t))
    }
}

/// `ψ(t_k) = exp(-iH(t_k - t_0)) ψ_0` on every grid time.
pub fn evolve_unitary(
    h: &Operator,
    psi0: &PureState,
    grid: &TimeGrid,
    label: &str,
) -> Result<EvolutionResult<PureState>> {
    check_generator(h, psi0.dim())?;
    let prop = UnitaryPropagator::new(h)?;
    let coords = prop.eigen.to_eigenbasis(psi0.amplitudes());
    let e0 = h.expectation(psi0).re;
    let e_scale = e0.abs().max(h.max_abs()).max(f64::MIN_POSITIVE);

    let mut diagnostics = Diagnostics {
        substeps: 1,
        ..Diagnostics::default()
    };
    let mut states = Vec::with_capacity(grid.len());
    for &t in grid.times() {
        let psi = if t == grid.t0 {
            psi0.clone()
        } else {
            PureState::from_vector_unchecked(prop.eigen.evolve_coords(&coords, t - grid.t0))
        };
        diagnostics.max_norm_drift = diagnostics.max_norm_drift.max((psi.norm_sq() - 1.0).abs());
        let e = h.expectation(&psi).re;
        diagnostics.max_energy_drift = diagnostics.max_energy_drift.max((e - e0).abs() / e_scale);
        states.push(psi);
    }
    Ok(EvolutionResult {
        grid: grid.clone(),
        states,
        generator_label: String::from(label),
        diagnostics,
    })
}

fn midpoint_run(
    h_of_t: &impl Fn(f64) -> Result<Operator>,
    psi0: &CVector,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<Vec<CVector>> {
    let h = grid.dt() / substeps as f64;
    let mut psi = psi0.clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(psi.clone());
    for k in 0..grid.n_steps {
        let t_start = grid.times()[k];
        for s in 0..substeps {
            let t_mid = t_start + (s as f64 + 0.5) * h;
            let gen = h_of_t(t_mid)?;
            check_generator(&gen, psi.len())?;
            let eig = HermitianEigen::new(gen.matrix())?;
            let coords = eig.to_eigenbasis(&psi);
            psi = eig.evolve_coords(&coords, h);
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Time-ordered evolution with a piecewise-constant midpoint generator,
/// later times acting to the left. The run is repeated with twice as many
/// steps; if the final states differ by more than [`STEP_TOL`] the call
/// fails with a recommended step count.
pub fn evolve_unitary_td(
    h_of_t: impl Fn(f64) -> Result<Operator>,
    psi0: &PureState,
    grid: &TimeGrid,
    substeps: usize,
    label: &str,
) -> Result<EvolutionResult<PureState>> {
    let substeps = substeps.max(1);
    let coarse = midpoint_run(&h_of_t, psi0.amplitudes(), grid, substeps)?;
    let fine = midpoint_run(&h_of_t, psi0.amplitudes(), grid, 2 * substeps)?;
    let deviation = (coarse.last().unwrap() - fine.last().unwrap()).norm();
    if deviation > STEP_TOL {
        // midpoint error falls as n^{-2}
        let total = 2 * substeps * grid.n_steps;
        let factor = libm::sqrt(deviation / STEP_TOL) * 1.5;
        return Err(Error::StepConvergence {
            deviation,
            tolerance: STEP_TOL,
            recommended: libm::ceil(total as f64 * factor) as usize,
        });
    }
    let mut diagnostics = Diagnostics {
        substeps: 2 * substeps,
        ..Diagnostics::default()
    };
    let states: Vec<PureState> = fine
        .into_iter()
        .map(|v| {
            diagnostics.max_norm_drift = diagnostics.max_norm_drift.max((v.norm_squared() - 1.0).abs());
            PureState::from_vector_unchecked(v)
        })
        .collect();
    Ok(EvolutionResult {
        grid: grid.clone(),
        states,
        generator_label: String::from(label),
        diagnostics,
    })
}

/// `ρ̇ = -i[H, ρ] + κ(2aρa^† - a^†aρ - ρa^†a)` for the cavity lowering
/// operator `a` acting on the same space as `H`.
#[derive(Clone, Debug)]
pub struct Lindblad {
    /// `H - iκ a^†a`.
    k: CMatrix,
    a: CMatrix,
    a_dag: CMatrix,
    kappa: f64,
}

impl Lindblad {
    pub fn new(h: &Operator, lowering: &Operator, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", "must be nonnegative and finite"));
        }
        if lowering.dim() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: lowering.dim(),
            });
        }
        h.ensure_hermitian(HERMITIAN_TOL)?;
        let a = lowering.matrix().clone();
        let a_dag = a.adjoint();
        let n = &a_dag * &a;
        Ok(Self {
            k: h.matrix() - n * Complex64::new(0.0, kappa),
            a,
            a_dag,
            kappa,
        })
    }

    /// Right-hand side for Hermitian `ρ`.
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        // -iKρ + iρK^† = -iKρ + (-iKρ)^† when ρ is Hermitian
        let left = &self.k * rho * Complex64::new(0.0, -1.0);
        let mut out = &left + left.adjoint();
        if self.kappa != 0.0 {
            out += &self.a * rho * &self.a_dag * Complex64::new(2.0 * self.kappa, 0.0);
        }
        out
    }
}

fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

fn lindblad_run(
    gen: &Lindblad,
    rho0: &CMatrix,
    grid: &TimeGrid,
    substeps: usize,
) -> Vec<CMatrix> {
    let h = grid.dt() / substeps as f64;
    let f = |_t: f64, rho: &CMatrix| gen.rhs(rho);
    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(rho.clone());
    for k in 0..grid.n_steps {
        let t_start = grid.times()[k];
        for s in 0..substeps {
            rho = rk4_step(&f, t_start + s as f64 * h, &rho, h);
            symmetrize(&mut rho);
        }
        out.push(rho.clone());
    }
    out
}

/// Classical RK4 integration of the cavity-decay master equation with a
/// mandatory step-doubling check.
pub fn evolve_lindblad(
    h: &Operator,
    lowering: &Operator,
    rho0: &DensityMatrix,
    kappa: f64,
    grid: &TimeGrid,
    substeps: usize,
    label: &str,
) -> Result<EvolutionResult<DensityMatrix>> {
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho0.dim(),
        });
    }
    let gen = Lindblad::new(h, lowering, kappa)?;
    let substeps = substeps.max(1);
    let coarse = lindblad_run(&gen, rho0.matrix(), grid, substeps);
    let fine = lindblad_run(&gen, rho0.matrix(), grid, 2 * substeps);
    let deviation = (coarse.last().unwrap() - fine.last().unwrap()).norm();
    if !(deviation <= STEP_TOL) {
        // RK4 error falls as n^{-4}
        let total = 2 * substeps * grid.n_steps;
        let factor = libm::pow(deviation.max(STEP_TOL) / STEP_TOL, 0.25) * 1.5;
        return Err(Error::StepConvergence {
            deviation,
            tolerance: STEP_TOL,
            recommended: libm::ceil(total as f64 * factor) as usize,
        });
    }

    let mut diagnostics = Diagnostics {
        substeps: 2 * substeps,
        min_eigenvalue: Some(f64::INFINITY),
        max_purity: Some(0.0),
        ..Diagnostics::default()
    };
    let mut states = Vec::with_capacity(fine.len());
    for (k, m) in fine.into_iter().enumerate() {
        let rho = DensityMatrix::from_matrix_unchecked(m);
        diagnostics.max_norm_drift = diagnostics.max_norm_drift.max((rho.trace().re - 1.0).abs());
        let min = rho.min_eigenvalue()?;
        if min < POSITIVITY_WARN {
            diagnostics.warnings.push(format!(
                "eigenvalue {min:e} below -1e-8 at t = {}",
                grid.times()[k]
            ));
        }
        diagnostics.min_eigenvalue = diagnostics.min_eigenvalue.map(|m| m.min(min));
        let purity = rho.purity();
        diagnostics.max_purity = diagnostics.max_purity.map(|p| p.max(purity));
        states.push(rho);
    }
    Ok(EvolutionResult {
        grid: grid.clone(),
        states,
        generator_label: String::from(label),
        diagnostics,
    })
}

/// `max |ρ_1 - ρ_2|` entrywise.
pub fn density_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    linalg::max_abs(&(a.matrix() - b.matrix()))
}
