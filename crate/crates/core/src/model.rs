//! Physical parameters, the self-consistent displaced-squeezed frame, and
//! every Hamiltonian builder.
//!
//! The frame follows from conjugating the driven quadratic Hamiltonian with
//! `D(α) S(r)`. Since `S^†(r)(b + b^†)S(r) = e^r (b + b^†)`, every term
//! quadratic in the mechanical position picks up the factor
//! `e^{2r} = ω_m / Ω_m`; the coupling that survives in the transformed frame is
//! therefore `g_eff = g ω_m / Ω_m`, with `g_0 = g_eff α` and
//! `Ω_c = -Δ + g_eff / 2`.

use alloc::{format, string::String, vec::Vec};
use core::f64::consts::{LN_10, TAU};

use num_complex::Complex64;

use crate::fock::{self, ModeSpace, Operator, SpaceTag};
use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

const FRAME_MAX_ITERATIONS: usize = 10_000;
const FRAME_DIVERGENCE_RUN: usize = 100;
const FRAME_REL_TOL: f64 = 1e-12;
const FRAME_ABS_TOL: f64 = 1e-15;

/// Laboratory-frame inputs. All rates are angular frequencies in rad/s.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicalParams {
    /// Cavity frequency; only the detuning enters the dynamics.
    pub omega_c: Option<f64>,
    pub omega_m: f64,
    /// Motional mass in kg, needed only to convert `g̃` into `g`.
    pub mass: Option<f64>,
    /// Quadratic coupling `g = ħ g̃ / (2 m ω_m)`.
    pub g_quad: f64,
    /// Drive strength `ε`.
    pub drive: Complex64,
    /// Detuning `Δ = ω_s - ω_c`.
    pub delta: f64,
    /// Cavity half-linewidth.
    pub kappa: f64,
    /// Mechanical damping rate, used only for budgets.
    pub gamma_m: f64,
    /// Bath temperature in kelvin.
    pub temperature: f64,
}

impl PhysicalParams {
    /// Undriven, lossless parameters with the given mechanical frequency and
    /// quadratic coupling.
    pub fn new(omega_m: f64, g_quad: f64) -> Result<Self> {
        let p = Self {
            omega_c: None,
            omega_m,
            mass: None,
            g_quad,
            drive: Complex64::new(0.0, 0.0),
            delta: 0.0,
            kappa: 0.0,
            gamma_m: 0.0,
            temperature: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > 0.0 && self.omega_m.is_finite()) {
            return Err(Error::param("omega_m", "must be positive and finite"));
        }
        if !(self.g_quad >= 0.0 && self.g_quad.is_finite()) {
            return Err(Error::param("g_quad", "must be nonnegative and finite"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::param("kappa", "must be nonnegative and finite"));
        }
        if !(self.gamma_m >= 0.0 && self.gamma_m.is_finite()) {
            return Err(Error::param("gamma_m", "must be nonnegative and finite"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::param("temperature", "must be nonnegative and finite"));
        }
        if !(self.delta.is_finite() && self.drive.re.is_finite() && self.drive.im.is_finite()) {
            return Err(Error::param("drive", "detuning and drive must be finite"));
        }
        if let Some(m) = self.mass {
            if !(m > 0.0) {
                return Err(Error::param("mass", "must be positive"));
            }
        }
        Ok(())
    }

    /// `g` from the position-squared coupling `g̃` (SI units).
    pub fn g_from_tilde(g_tilde: f64, mass: f64, omega_m: f64) -> Result<f64> {
        if !(mass > 0.0) {
            return Err(Error::param("mass", "must be positive"));
        }
        if !(omega_m > 0.0) {
            return Err(Error::param("omega_m", "must be positive"));
        }
        Ok(fock::HBAR * g_tilde / (2.0 * mass * omega_m))
    }

    /// Parameters whose mean-field fixed point is exactly `alpha ≥ 0` with
    /// effective cavity frequency `omega_c`.
    pub fn for_target_frame(
        omega_m: f64,
        g_quad: f64,
        alpha: f64,
        omega_c: f64,
        kappa: f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::param("alpha", "must be nonnegative"));
        }
        let mut p = Self::new(omega_m, g_quad)?;
        p.kappa = kappa;
        let g_eff = effective_coupling(omega_m, g_quad, alpha * alpha);
        p.delta = -omega_c + g_eff / 2.0;
        p.drive = -Complex64::new(omega_c, -kappa) * alpha;
        p.validate()?;
        Ok(p)
    }
}

/// Built-in experimental parameter sets. Drive and detuning are left at zero.
pub fn preset(name: &str) -> Result<PhysicalParams> {
    let mut p = match name {
        "mechanics" => {
            let mut p = PhysicalParams::new(TAU * 140e3, 5.2e-4)?;
            p.gamma_m = TAU * 1.4e-3;
            p.temperature = 0.5;
            p.kappa = TAU * 70e3;
            p.mass = Some(1e-12);
            p
        }
        "cqed" => {
            let mut p = PhysicalParams::new(TAU * 300e6, 19e3)?;
            p.gamma_m = TAU * 17e3;
            p.temperature = 0.010;
            p.kappa = TAU * 330e3;
            p
        }
        other => return Err(Error::UnknownPreset(String::from(other))),
    };
    p.omega_c = None;
    Ok(p)
}

pub const PRESET_NAMES: [&str; 2] = ["mechanics", "cqed"];

/// Coupling seen in the squeezed frame, `g ω_m / Ω_m`.
pub fn effective_coupling(omega_m: f64, g: f64, alpha_sq: f64) -> f64 {
    g * omega_m / effective_mechanical_frequency(omega_m, g, alpha_sq)
}

/// `Ω_m = √(ω_m² + 2 g ω_m |α|²)`.
pub fn effective_mechanical_frequency(omega_m: f64, g: f64, alpha_sq: f64) -> f64 {
    libm::sqrt(omega_m * omega_m + 2.0 * g * omega_m * alpha_sq)
}

/// `r = -½ artanh[g|α|² / (ω_m + g|α|²)]`.
pub fn squeezing_parameter(omega_m: f64, g: f64, alpha_sq: f64) -> f64 {
    let x = g * alpha_sq;
    -0.5 * libm::atanh(x / (omega_m + x))
}

/// Bare quadratic coupling for which the frame coupling `g_eff α` equals
/// `g0` at mean field `alpha`.
pub fn bare_coupling_for(g0: f64, alpha: f64, omega_m: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "must be positive"));
    }
    if !(omega_m > 0.0) {
        return Err(Error::param("omega_m", "must be positive"));
    }
    if !(g0 >= 0.0) {
        return Err(Error::param("g0", "must be nonnegative"));
    }
    // g_eff(g) α = g0 squares to ω_m² α² g² − 2 g0² ω_m α² g − g0² ω_m² = 0
    let a2 = alpha * alpha;
    let g0_sq = g0 * g0;
    Ok((g0_sq * a2 + libm::sqrt(g0_sq * g0_sq * a2 * a2 + a2 * g0_sq * omega_m * omega_m))
        / (omega_m * a2))
}

/// Effective rates defining the transformed-frame Hamiltonians.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameRates {
    pub omega_c: f64,
    pub omega_m: f64,
    pub g0: f64,
    /// Coefficient of the small quartic term.
    pub g: f64,
}

impl FrameRates {
    pub fn new(omega_c: f64, omega_m: f64, g0: f64, g: f64) -> Result<Self> {
        if !(omega_m > 0.0 && omega_m.is_finite()) {
            return Err(Error::param("omega_m", "must be positive and finite"));
        }
        if !(omega_c.is_finite() && g0.is_finite() && g.is_finite()) {
            return Err(Error::param("omega_c", "rates must be finite"));
        }
        Ok(Self {
            omega_c,
            omega_m,
            g0,
            g,
        })
    }

    /// `Ω_+ = Ω_c + 2Ω_m`.
    pub fn omega_plus(&self) -> f64 {
        self.omega_c + 2.0 * self.omega_m
    }

    /// `Ω_- = Ω_c - 2Ω_m`.
    pub fn omega_minus(&self) -> f64 {
        self.omega_c - 2.0 * self.omega_m
    }

    /// `g_0 / Ω_m`.
    pub fn epsilon(&self) -> f64 {
        self.g0 / self.omega_m
    }

    /// True once `g_0/Ω_m ≥ 0.1`, where the second-order analysis loses accuracy.
    pub fn epsilon_warning(&self) -> bool {
        self.epsilon().abs() >= 0.1
    }

    pub fn with_g0(self, g0: f64) -> Self {
        Self { g0, ..self }
    }

    /// Every rate divided by `unit`, e.g. `Ω_c` to work in units of the
    /// cavity frequency.
    pub fn in_units_of(self, unit: f64) -> Result<Self> {
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(Error::param("unit", "must be positive and finite"));
        }
        Self::new(
            self.omega_c / unit,
            self.omega_m / unit,
            self.g0 / unit,
            self.g / unit,
        )
    }
}

/// The self-consistent displaced-squeezed frame.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivedFrame {
    /// Mean field, real and nonnegative after the phase rotation.
    pub alpha: Complex64,
    pub r: f64,
    pub omega_c: f64,
    pub omega_m: f64,
    pub g0: f64,
    /// Bare quadratic coupling.
    pub g: f64,
    /// `g ω_m / Ω_m`, the quadratic coupling after squeezing.
    pub g_eff: f64,
    /// Drive expressed in the rotated phase reference.
    pub drive_rotated: Complex64,
    /// Angle `φ` with `ε_rotated = e^{iφ} ε`.
    pub phase_rotation: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl DerivedFrame {
    pub fn rates(&self) -> FrameRates {
        FrameRates {
            omega_c: self.omega_c,
            omega_m: self.omega_m,
            g0: self.g0,
            g: self.g_eff,
        }
    }

    pub fn alpha_abs(&self) -> f64 {
        self.alpha.re
    }
}

fn omega_c_of(params: &PhysicalParams, alpha_sq: f64) -> f64 {
    -params.delta + effective_coupling(params.omega_m, params.g_quad, alpha_sq) / 2.0
}

/// Solves `α = -ε / (Ω_c(|α|²) - iκ)` by fixed-point iteration.
pub fn solve_frame(params: &PhysicalParams) -> Result<DerivedFrame> {
    params.validate()?;
    let eps = params.drive;
    let eps_abs = eps.norm();
    let tol = if eps_abs == 0.0 {
        FRAME_ABS_TOL
    } else {
        FRAME_REL_TOL * eps_abs
    };
    let residual_of = |alpha: Complex64| {
        let oc = omega_c_of(params, alpha.norm_sqr());
        (alpha * Complex64::new(oc, -params.kappa) + eps).norm()
    };

    let mut alpha = Complex64::new(0.0, 0.0);
    let mut residual = residual_of(alpha);
    let mut growth_run = 0usize;
    let mut iterations = 0usize;
    let mut prev_step: Option<Complex64> = None;

    while residual > tol {
        if iterations >= FRAME_MAX_ITERATIONS {
            return Err(Error::FrameNotConverged {
                iterations,
                residual,
            });
        }
        iterations += 1;
        let oc = omega_c_of(params, alpha.norm_sqr());
        let denom = Complex64::new(oc, -params.kappa);
        let mut next = -eps / denom;
        if !(next.re.is_finite() && next.im.is_finite()) {
            return Err(Error::FrameDiverged { iterations });
        }
        let step = next - alpha;
        // successive steps pointing against each other signal oscillation
        if let Some(prev) = prev_step {
            if (step.re * prev.re + step.im * prev.im) < 0.0 {
                next = (next + alpha) * 0.5;
            }
        }
        prev_step = Some(next - alpha);
        if next.norm() > alpha.norm() && iterations > 1 {
            growth_run += 1;
            if growth_run >= FRAME_DIVERGENCE_RUN {
                return Err(Error::FrameDiverged { iterations });
            }
        } else {
            growth_run = 0;
        }
        alpha = next;
        residual = residual_of(alpha);
    }

    let alpha_abs = alpha.norm();
    let phase_rotation = if alpha_abs > 0.0 { -alpha.arg() } else { 0.0 };
    let rot = linalg::phase(phase_rotation);
    let alpha_sq = alpha_abs * alpha_abs;
    let omega_m_eff = effective_mechanical_frequency(params.omega_m, params.g_quad, alpha_sq);
    let g_eff = params.g_quad * params.omega_m / omega_m_eff;
    Ok(DerivedFrame {
        alpha: Complex64::new(alpha_abs, 0.0),
        r: squeezing_parameter(params.omega_m, params.g_quad, alpha_sq),
        omega_c: omega_c_of(params, alpha_sq),
        omega_m: omega_m_eff,
        g0: g_eff * alpha_abs,
        g: params.g_quad,
        g_eff,
        drive_rotated: eps * rot,
        phase_rotation,
        iterations,
        residual,
    })
}

/// `(-iΩ_c - κ) α - iε` in the rotated phase convention.
pub fn classical_drift_residual(frame: &DerivedFrame, params: &PhysicalParams) -> Complex64 {
    Complex64::new(-params.kappa, -frame.omega_c) * frame.alpha
        - Complex64::i() * frame.drive_rotated
}

/// Scale against which [`classical_drift_residual`] is judged.
pub fn drift_residual_scale(frame: &DerivedFrame, params: &PhysicalParams) -> f64 {
    params.drive.norm().max(frame.omega_c.abs() * frame.alpha.norm())
}

struct SingleModeOps {
    a: CMatrix,
    n_a: CMatrix,
    id_a: CMatrix,
    b: CMatrix,
    n_b: CMatrix,
    id_b: CMatrix,
}

impl SingleModeOps {
    fn new(space: &ModeSpace) -> Result<Self> {
        Ok(Self {
            a: fock::annihilation(space.n_a)?,
            n_a: fock::number(space.n_a)?,
            id_a: CMatrix::identity(space.n_a, space.n_a),
            b: fock::annihilation(space.n_b)?,
            n_b: fock::number(space.n_b)?,
            id_b: CMatrix::identity(space.n_b, space.n_b),
        })
    }

    fn x_a(&self) -> CMatrix {
        &self.a + self.a.adjoint()
    }

    fn b_sq_sum(&self) -> CMatrix {
        let b2 = &self.b * &self.b;
        &b2 + b2.adjoint()
    }
}

fn kron_sum(terms: &[(Complex64, &CMatrix, &CMatrix)], space: &ModeSpace) -> Operator {
    let n = space.joint_dim();
    let mut out = CMatrix::zeros(n, n);
    for (w, a, b) in terms {
        if *w == Complex64::new(0.0, 0.0) {
            continue;
        }
        out += a.kronecker(b) * *w;
    }
    Operator::from_matrix(out, SpaceTag::Joint)
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Laboratory Hamiltonian in the frame rotating with the drive:
/// `-Δ a^†a + ω_m b^†b + ε^* a + ε a^† + g a^†a [b^†b + ½(b² + b^†² + 1)]`.
pub fn build_h_full(params: &PhysicalParams, space: &ModeSpace) -> Result<Operator> {
    params.validate()?;
    build_h_full_with_drive(params, params.drive, space)
}

/// [`build_h_full`] with the drive replaced, e.g. by the phase-rotated one.
pub fn build_h_full_with_drive(
    params: &PhysicalParams,
    drive: Complex64,
    space: &ModeSpace,
) -> Result<Operator> {
    let ops = SingleModeOps::new(space)?;
    let drive_term = &ops.a * drive.conj() + ops.a.adjoint() * drive;
    let quad = &ops.n_b + (ops.b_sq_sum() + &ops.id_b) * re(0.5);
    Ok(kron_sum(
        &[
            (re(-params.delta), &ops.n_a, &ops.id_b),
            (re(params.omega_m), &ops.id_a, &ops.n_b),
            (re(1.0), &drive_term, &ops.id_b),
            (re(params.g_quad), &ops.n_a, &quad),
        ],
        space,
    ))
}

/// Hamiltonian of the displaced-squeezed frame, constants dropped.
pub fn build_h_ds(rates: &FrameRates, space: &ModeSpace, include_small: bool) -> Result<Operator> {
    let ops = SingleModeOps::new(space)?;
    let x_a = ops.x_a();
    let b_sq = ops.b_sq_sum();
    let small = &ops.n_b + &b_sq * re(0.5);
    let g_small = if include_small { rates.g } else { 0.0 };
    Ok(kron_sum(
        &[
            (re(rates.omega_c), &ops.n_a, &ops.id_b),
            (re(rates.omega_m), &ops.id_a, &ops.n_b),
            (re(rates.g0), &x_a, &ops.n_b),
            (re(g_small), &ops.n_a, &small),
            (re(rates.g0 / 2.0), &x_a, &b_sq),
        ],
        space,
    ))
}

/// `Ω_c a^†a + Ω_m b^†b + g_0 (a + a^†) b^†b`.
pub fn build_h_mo(rates: &FrameRates, space: &ModeSpace) -> Result<Operator> {
    let ops = SingleModeOps::new(space)?;
    let x_a = ops.x_a();
    Ok(kron_sum(
        &[
            (re(rates.omega_c), &ops.n_a, &ops.id_b),
            (re(rates.omega_m), &ops.id_a, &ops.n_b),
            (re(rates.g0), &x_a, &ops.n_b),
        ],
        space,
    ))
}

/// `(g_0/2)(a + a^†)(b² + b^†²)`.
pub fn build_h_aux(rates: &FrameRates, space: &ModeSpace) -> Result<Operator> {
    let ops = SingleModeOps::new(space)?;
    Ok(kron_sum(
        &[(re(rates.g0 / 2.0), &ops.x_a(), &ops.b_sq_sum())],
        space,
    ))
}

/// `g a^†a [b^†b + ½(b² + b^†²)]`.
pub fn build_h_small(rates: &FrameRates, space: &ModeSpace) -> Result<Operator> {
    let ops = SingleModeOps::new(space)?;
    let small = &ops.n_b + ops.b_sq_sum() * re(0.5);
    Ok(kron_sum(&[(re(rates.g), &ops.n_a, &small)], space))
}

/// `H_MO + χ (b^†b)²`.
pub fn build_h_mo_anharmonic(rates: &FrameRates, chi: f64, space: &ModeSpace) -> Result<Operator> {
    let ops = SingleModeOps::new(space)?;
    let nb_sq = &ops.n_b * &ops.n_b;
    let extra = kron_sum(&[(re(chi), &ops.id_a, &nb_sq)], space);
    Ok(&build_h_mo(rates, space)? + &extra)
}

/// `D(α) = exp(α a^† - α^* a)`.
pub fn displacement_op(amplitude: Complex64, space_dim: usize) -> Result<Operator> {
    let a = fock::annihilation(space_dim)?;
    let gen = a.adjoint() * amplitude - &a * amplitude.conj();
    Ok(Operator::from_matrix(
        linalg::expm_anti_hermitian(&gen)?,
        SpaceTag::ModeA,
    ))
}

/// `S(z) = exp[-½(z^* b² - z b^†²)]`.
pub fn squeezing_op(z: Complex64, space_dim: usize) -> Result<Operator> {
    let b = fock::annihilation(space_dim)?;
    let b2 = &b * &b;
    let gen = (&b2 * z.conj() - b2.adjoint() * z) * re(-0.5);
    Ok(Operator::from_matrix(
        linalg::expm_anti_hermitian(&gen)?,
        SpaceTag::ModeB,
    ))
}

/// `|r|` for a squeezing level quoted in dB: `½ ln(10^{dB/10})`.
pub fn squeezing_from_db(db: f64) -> Result<f64> {
    if !(db >= 0.0) {
        return Err(Error::param("db", "must be nonnegative"));
    }
    Ok(0.5 * db * LN_10 / 10.0)
}

/// `1 / (γ_m n_p)` in seconds.
pub fn decoherence_time(gamma_m: f64, n_p: f64) -> f64 {
    1.0 / (gamma_m * n_p)
}

/// Outcome of conjugating the laboratory Hamiltonian into the
/// displaced-squeezed frame.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjugationReport {
    /// Mean diagonal offset, the constant dropped from `H_DS`.
    pub offset: f64,
    /// `max |U^† H U - H_DS - offset·1|` over the comparison block.
    pub max_deviation: f64,
    /// Largest entry of `H_DS` on the same block.
    pub h_ds_scale: f64,
}

impl ConjugationReport {
    pub fn relative_deviation(&self) -> f64 {
        self.max_deviation / self.h_ds_scale
    }
}

/// Conjugates `build_h_full` (with the rotated drive) by `D(α) ⊗ S(r)` in the
/// padded space and compares it with `build_h_ds(include_small = true)` on
/// the low `block` of levels.
///
/// Every term of the laboratory Hamiltonian is a Kronecker product, so each
/// single-mode factor is conjugated separately before the block is assembled.
pub fn conjugation_theorem_check(
    params: &PhysicalParams,
    frame: &DerivedFrame,
    padded: &ModeSpace,
    block: &ModeSpace,
) -> Result<ConjugationReport> {
    if block.n_a > padded.n_a || block.n_b > padded.n_b {
        return Err(Error::param("block", "must fit inside the padded space"));
    }
    let big = SingleModeOps::new(padded)?;
    let d = displacement_op(frame.alpha, padded.n_a)?.into_matrix();
    let s = squeezing_op(Complex64::new(frame.r, 0.0), padded.n_b)?.into_matrix();
    let conj_a = |x: &CMatrix| {
        (d.adjoint() * x * &d)
            .view((0, 0), (block.n_a, block.n_a))
            .into_owned()
    };
    let conj_b = |x: &CMatrix| {
        (s.adjoint() * x * &s)
            .view((0, 0), (block.n_b, block.n_b))
            .into_owned()
    };
    let eps = frame.drive_rotated;
    let drive_term = &big.a * eps.conj() + big.a.adjoint() * eps;
    let quad = &big.n_b + (big.b_sq_sum() + &big.id_b) * re(0.5);
    let id_a = CMatrix::identity(block.n_a, block.n_a);
    let id_b = CMatrix::identity(block.n_b, block.n_b);
    let (na, nb, dr, q) = (
        conj_a(&big.n_a),
        conj_b(&big.n_b),
        conj_a(&drive_term),
        conj_b(&quad),
    );
    let conjugated = kron_sum(
        &[
            (re(-params.delta), &na, &id_b),
            (re(params.omega_m), &id_a, &nb),
            (re(1.0), &dr, &id_b),
            (re(params.g_quad), &na, &q),
        ],
        block,
    );
    let h_ds = build_h_ds(&frame.rates(), block, true)?;
    Ok(compare_modulo_identity(&conjugated, &h_ds))
}

/// Deviation between two operators after removing their mean diagonal offset.
pub fn compare_modulo_identity(x: &Operator, reference: &Operator) -> ConjugationReport {
    let diff = x.matrix() - reference.matrix();
    let n = diff.nrows();
    let offset = (0..n).map(|i| diff[(i, i)].re).sum::<f64>() / n as f64;
    let shifted = diff - CMatrix::identity(n, n) * re(offset);
    ConjugationReport {
        offset,
        max_deviation: linalg::max_abs(&shifted),
        h_ds_scale: reference.max_abs(),
    }
}

/// Time-dependent effective coupling `g_0(t)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CouplingSchedule {
    Constant(f64),
    /// Samples `(t_k, g_0(t_k))` joined by straight lines.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl CouplingSchedule {
    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::param("times", "need at least two samples"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        if values.iter().chain(times.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("values", "must be finite"));
        }
        Ok(Self::Sampled { times, values })
    }

    /// Straight ramp from `g_start` at `t0` to `g_end` at `t1`.
    pub fn linear_ramp(t0: f64, t1: f64, g_start: f64, g_end: f64) -> Result<Self> {
        Self::sampled(alloc::vec![t0, t1], alloc::vec![g_start, g_end])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Self::Constant(g) => Ok(*g),
            Self::Sampled { times, values } => {
                let (start, end) = (times[0], times[times.len() - 1]);
                if !(t >= start && t <= end) {
                    return Err(Error::ScheduleOutOfRange { t, start, end });
                }
                let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                let (t_lo, t_hi) = (times[k - 1], times[k]);
                let w = (t - t_lo) / (t_hi - t_lo);
                Ok(values[k - 1] + w * (values[k] - values[k - 1]))
            }
        }
    }

    /// Fails unless the schedule is defined on all of `[t0, t1]`.
    pub fn check_covers(&self, t0: f64, t1: f64) -> Result<()> {
        self.eval(t0)?;
        self.eval(t1)?;
        Ok(())
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Constant(g) => Some(*g),
            Self::Sampled { .. } => None,
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Constant(g) => g.abs(),
            Self::Sampled { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// Human-readable frame summary used in reports.
pub fn describe_frame(frame: &DerivedFrame) -> String {
    format!(
        "alpha = {:.6e}, r = {:.6e}, Omega_c = {:.6e}, Omega_m = {:.6e}, g0 = {:.6e}, g_eff = {:.6e}",
        frame.alpha.re, frame.r, frame.omega_c, frame.omega_m, frame.g0, frame.g_eff
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn space(n_a: usize, n_b: usize) -> ModeSpace {
        ModeSpace::new(n_a, n_b).unwrap()
    }

    #[test]
    fn undriven_frame() {
        let mut p = PhysicalParams::new(2.0, 0.3).unwrap();
        p.delta = -1.5;
        let f = solve_frame(&p).unwrap();
        assert_eq!(f.alpha.norm(), 0.0);
        assert_eq!(f.r, 0.0);
        assert_eq!(f.omega_m, 2.0);
        assert_relative_eq!(f.omega_c, 1.5 + 0.15, epsilon = 1e-15);
        assert_eq!(classical_drift_residual(&f, &p), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn linear_frame_closed_form() {
        let mut p = PhysicalParams::new(1.0, 0.0).unwrap();
        p.delta = -1.0;
        p.drive = Complex64::new(2.0, 0.0);
        let f = solve_frame(&p).unwrap();
        assert_relative_eq!(f.omega_c, 1.0);
        assert_relative_eq!(f.alpha.re, 2.0, epsilon = 1e-12);
        assert_eq!(f.alpha.im, 0.0);
        // α = -2 before rotation, so the rotation is by π
        assert_relative_eq!(f.phase_rotation.abs(), core::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(f.drive_rotated.re, -2.0, epsilon = 1e-12);
    }

    fn bisect_alpha(p: &PhysicalParams) -> f64 {
        // |α| |Ω_c(|α|²) - iκ| = |ε| is monotone in |α| for these parameters
        let target = p.drive.norm();
        let h = |x: f64| x * Complex64::new(omega_c_of(p, x * x), -p.kappa).norm() - target;
        let (mut lo, mut hi) = (0.0, 1.0);
        while h(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn frame_with_g_alpha_sq_equal_omega_m() {
        let (omega_m, alpha) = (3.0, 2.0);
        let g = omega_m / (alpha * alpha);
        let p = PhysicalParams::for_target_frame(omega_m, g, alpha, 1.7, 0.2).unwrap();
        let f = solve_frame(&p).unwrap();
        assert_relative_eq!(f.alpha.re, alpha, max_relative = 1e-12);
        assert_relative_eq!(f.alpha.re, bisect_alpha(&p), max_relative = 1e-10);
        assert_relative_eq!(f.r, -0.274_653_072_167_027, epsilon = 1e-12);
        assert_relative_eq!(f.omega_m, 3f64.sqrt() * omega_m, max_relative = 1e-11);
        assert_relative_eq!(f.omega_c, 1.7, max_relative = 1e-12);
        // e^{2r} = ω_m / Ω_m
        assert_relative_eq!((2.0 * f.r).exp(), omega_m / f.omega_m, max_relative = 1e-12);
        assert_relative_eq!(f.g0, f.g_eff * f.alpha.re, max_relative = 1e-15);
    }

    #[test]
    fn drift_residual_responds_linearly() {
        let p = PhysicalParams::for_target_frame(1.0, 0.01, 3.0, 0.8, 0.3).unwrap();
        let f = solve_frame(&p).unwrap();
        let res = classical_drift_residual(&f, &p);
        assert!(res.norm() <= 1e-10 * drift_residual_scale(&f, &p));
        let delta = 1e-6;
        let mut bumped = f.clone();
        bumped.alpha += delta;
        let moved = classical_drift_residual(&bumped, &p);
        let expected = Complex64::new(-p.kappa, -f.omega_c).norm() * delta;
        assert_relative_eq!(moved.norm(), expected, max_relative = 1e-6);
    }

    #[test]
    fn frame_with_complex_drive_and_loss() {
        let mut p = PhysicalParams::new(5.0, 0.02).unwrap();
        p.delta = -2.0;
        p.kappa = 0.7;
        p.drive = Complex64::new(-3.0, 4.0);
        let f = solve_frame(&p).unwrap();
        assert!(f.alpha.re > 0.0 && f.alpha.im == 0.0);
        assert!(f.residual <= 1e-12 * 5.0);
        assert!(classical_drift_residual(&f, &p).norm() <= 1e-10 * drift_residual_scale(&f, &p));
        assert_relative_eq!(f.drive_rotated.norm(), 5.0, max_relative = 1e-14);
    }

    #[test]
    fn resonant_lossless_drive_diverges() {
        let mut p = PhysicalParams::new(1.0, 0.0).unwrap();
        p.drive = Complex64::new(1.0, 0.0);
        assert!(matches!(solve_frame(&p), Err(Error::FrameDiverged { .. })));
    }

    #[test]
    fn full_hamiltonian_elements() {
        let sp = space(4, 4);
        let mut p = PhysicalParams::new(1.3, 0.0).unwrap();
        p.delta = 0.4;
        let h = build_h_full(&p, &sp).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let i = sp.index(j, k);
                assert_relative_eq!(h.entry(i, i).re, -0.4 * j as f64 + 1.3 * k as f64);
            }
        }
        p.g_quad = 0.25;
        let h = build_h_full(&p, &sp).unwrap();
        let i10 = sp.index(1, 0);
        let i11 = sp.index(1, 1);
        assert_relative_eq!(h.entry(i10, i10).re, -0.4 + 0.125, epsilon = 1e-15);
        assert_relative_eq!(h.entry(i11, i11).re, -0.4 + 1.3 + 1.5 * 0.25, epsilon = 1e-15);
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn ds_hamiltonian_elements() {
        let sp = space(5, 6);
        let rates = FrameRates::new(1.1, 2.3, 0.37, 0.01).unwrap();
        let h = build_h_ds(&rates, &sp, false).unwrap();
        let v = h.entry(sp.index(0, 2), sp.index(1, 0));
        assert_relative_eq!(v.re, 0.37 / 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        let aux = build_h_aux(&rates, &sp).unwrap();
        let v = aux.entry(sp.index(0, 0), sp.index(1, 2));
        assert_relative_eq!(v.re, 0.37 / 2.0 * 2f64.sqrt(), epsilon = 1e-15);

        let free = build_h_ds(&rates.with_g0(0.0), &sp, false).unwrap();
        for r in 0..sp.joint_dim() {
            for c in 0..sp.joint_dim() {
                let (j, k) = sp.levels(r);
                let expected = if r == c { 1.1 * j as f64 + 2.3 * k as f64 } else { 0.0 };
                assert_relative_eq!(free.entry(r, c).re, expected);
            }
        }
    }

    #[test]
    fn ds_decomposes_into_three_terms() {
        let sp = space(6, 7);
        let rates = FrameRates::new(0.9, 1.7, 0.21, 0.05).unwrap();
        let full = build_h_ds(&rates, &sp, true).unwrap();
        let sum = &(&build_h_mo(&rates, &sp).unwrap() + &build_h_aux(&rates, &sp).unwrap())
            + &build_h_small(&rates, &sp).unwrap();
        assert!(linalg::max_abs(&(full.matrix() - sum.matrix())) <= 1e-14);
        assert!(full.is_hermitian(1e-12));
        assert!(build_h_mo(&rates, &sp).unwrap().is_hermitian(1e-12));
    }

    #[test]
    fn displacement_and_squeezing_conjugations() {
        let n = 60;
        let id = Operator::identity(n, SpaceTag::ModeA);
        assert!(displacement_op(Complex64::new(0.0, 0.0), n).unwrap().unitarity_deviation() < 1e-12);
        let d0 = displacement_op(Complex64::new(0.0, 0.0), n).unwrap();
        assert!(linalg::max_abs(&(d0.matrix() - id.matrix())) < 1e-12);

        let alpha = Complex64::new(1.2, -0.4);
        let d = displacement_op(alpha, n).unwrap();
        assert!(d.unitarity_deviation() < 1e-10);
        let a = Operator::from_matrix(fock::annihilation(n).unwrap(), SpaceTag::ModeA);
        let shifted = a.conjugate_by(&d);
        let expected = &a + &id.scale_complex(alpha);
        assert!(fock::block_deviation(&shifted, &expected, None, 20, 0) < 1e-10);

        let r = -0.35;
        // the b² generator leaks truncation effects further down than D does
        let s = squeezing_op(Complex64::new(r, 0.0), 2 * n).unwrap();
        assert!(s.unitarity_deviation() < 1e-10);
        let b = Operator::from_matrix(fock::annihilation(2 * n).unwrap(), SpaceTag::ModeB);
        let sq = b.conjugate_by(&s);
        let expected = &b.scale(libm::cosh(r)) + &b.adjoint().scale(libm::sinh(r));
        assert!(fock::block_deviation(&sq, &expected, None, 20, 0) < 1e-10);
    }

    #[test]
    fn presets_match_table() {
        let c = preset("cqed").unwrap();
        assert_eq!(c.g_quad, 19e3);
        assert_relative_eq!(c.omega_m, TAU * 300e6);
        let m = preset("mechanics").unwrap();
        assert_relative_eq!(m.kappa, TAU * 70e3);
        assert_eq!(m.temperature, 0.5);
        assert!(matches!(preset("optics"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn squeezing_from_db_values() {
        assert_relative_eq!(squeezing_from_db(4.7).unwrap(), 0.541, epsilon = 1e-3);
        assert_eq!(squeezing_from_db(0.0).unwrap(), 0.0);
        assert_relative_eq!(squeezing_from_db(10.0).unwrap(), 0.5 * LN_10, epsilon = 1e-15);
        assert!(squeezing_from_db(-1.0).is_err());
    }

    #[test]
    fn schedule_interpolation() {
        let s = CouplingSchedule::sampled(alloc::vec![0.0, 1.0, 3.0], alloc::vec![0.0, 2.0, -2.0])
            .unwrap();
        assert_relative_eq!(s.eval(0.5).unwrap(), 1.0);
        assert_relative_eq!(s.eval(2.0).unwrap(), 0.0);
        assert_relative_eq!(s.eval(3.0).unwrap(), -2.0);
        assert!(matches!(s.eval(3.5), Err(Error::ScheduleOutOfRange { .. })));
        assert!(CouplingSchedule::sampled(alloc::vec![0.0, 0.0], alloc::vec![1.0, 1.0]).is_err());
        assert_eq!(CouplingSchedule::Constant(0.3).eval(1e9).unwrap(), 0.3);
    }

    #[test]
    fn bare_coupling_inverts_frame_coupling() {
        let (g0, alpha, omega_m) = (0.05, 3.0, 1.0);
        let g = bare_coupling_for(g0, alpha, omega_m).unwrap();
        assert_relative_eq!(effective_coupling(omega_m, g, alpha * alpha) * alpha, g0, max_relative = 1e-13);
    }


    #[test]
    fn conjugation_matches_brute_force_joint() {
        let p = PhysicalParams::for_target_frame(1.0, 0.02, 1.0, 0.6, 0.0).unwrap();
        let f = solve_frame(&p).unwrap();
        let padded = space(30, 16);
        let block = space(8, 6);
        let factored = conjugation_theorem_check(&p, &f, &padded, &block).unwrap();

        let h = build_h_full_with_drive(&p, f.drive_rotated, &padded).unwrap();
        let d = displacement_op(f.alpha, padded.n_a).unwrap();
        let s = squeezing_op(Complex64::new(f.r, 0.0), padded.n_b).unwrap();
        let u = fock::tensor(&d, &Operator::from_matrix(s.into_matrix(), SpaceTag::ModeB), &padded)
            .unwrap();
        let conj = h.conjugate_by(&u);
        let mut idx = Vec::new();
        for j in 0..block.n_a {
            for k in 0..block.n_b {
                idx.push(padded.index(j, k));
            }
        }
        let low = CMatrix::from_fn(idx.len(), idx.len(), |r, c| conj.entry(idx[r], idx[c]));
        let brute = compare_modulo_identity(
            &Operator::from_matrix(low, SpaceTag::Joint),
            &build_h_ds(&f.rates(), &block, true).unwrap(),
        );
        assert!(brute.relative_deviation() < 1e-9, "{brute:?}");
        assert!(factored.relative_deviation() < 1e-9, "{factored:?}");
        assert_relative_eq!(brute.offset, factored.offset, max_relative = 1e-9);
    }

    #[test]
    fn printed_frame_fails_conjugation() {
        // the uncorrected coupling g0 = g α leaves an O(1 - e^{2r}) mismatch
        let p = PhysicalParams::for_target_frame(1.0, 0.05, 2.0, 0.7, 0.0).unwrap();
        let f = solve_frame(&p).unwrap();
        let mut printed = f.clone();
        printed.g0 = f.g * f.alpha.re;
        printed.g_eff = f.g;
        let padded = space(50, 24);
        let block = space(8, 6);
        let good = conjugation_theorem_check(&p, &f, &padded, &block).unwrap();
        let bad = conjugation_theorem_check(&p, &printed, &padded, &block).unwrap();
        assert!(good.relative_deviation() < 1e-8, "{good:?}");
        assert!(bad.relative_deviation() > 1e-3, "{bad:?}");
    }

    proptest! {
        #[test]
        fn squeezing_db_round_trip(r in 0.0f64..3.0) {
            let db = 10.0 * libm::log10(libm::exp(2.0 * r));
            prop_assert!((squeezing_from_db(db).unwrap() - r).abs() < 1e-12);
        }

        #[test]
        fn frame_identities_hold(
            omega_m in 0.5f64..5.0,
            g in 0.0f64..0.2,
            alpha in 0.0f64..5.0,
            omega_c in 0.3f64..3.0,
            kappa in 0.0f64..1.0,
        ) {
            let p = PhysicalParams::for_target_frame(omega_m, g, alpha, omega_c, kappa).unwrap();
            let f = solve_frame(&p).unwrap();
            prop_assert!((f.alpha.re - alpha).abs() <= 1e-10 * alpha.max(1.0));
            let a2 = f.alpha.re * f.alpha.re;
            prop_assert!(
                (f.omega_m * f.omega_m - omega_m * omega_m - 2.0 * g * omega_m * a2).abs()
                    <= 1e-12 * f.omega_m * f.omega_m
            );
            prop_assert!(f.r <= 0.0);
            prop_assert!((f.g0 - f.g_eff * f.alpha.re).abs() <= 1e-15 * f.g0.abs().max(1.0));
            let res = classical_drift_residual(&f, &p).norm();
            prop_assert!(res <= 1e-10 * drift_residual_scale(&f, &p).max(1e-300));
        }

        #[test]
        fn builders_are_hermitian(
            omega_c in -2.0f64..2.0,
            omega_m in 0.1f64..3.0,
            g0 in -1.0f64..1.0,
            g in 0.0f64..0.5,
        ) {
            let sp = space(5, 5);
            let rates = FrameRates::new(omega_c, omega_m, g0, g).unwrap();
            prop_assert!(build_h_ds(&rates, &sp, true).unwrap().is_hermitian(1e-12));
            prop_assert!(build_h_mo(&rates, &sp).unwrap().is_hermitian(1e-12));
            prop_assert!(build_h_aux(&rates, &sp).unwrap().is_hermitian(1e-12));
            prop_assert!(build_h_small(&rates, &sp).unwrap().is_hermitian(1e-12));
        }
    }
}
