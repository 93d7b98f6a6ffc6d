//! Second-order fidelity analysis: the operator `Ê_1`, its coefficient
//! integrals `F_±±` and the state-independent deficit `F_uni`.
//!
//! Internally the coefficient integrals run in the dimensionless time
//! `η = Ω_m t`; every public function takes and returns physical time.

use num_complex::Complex64;

use super::factorization::oscillatory_opts;
use crate::fock::{self, ModeSpace, Operator, PureState, SpaceTag};
use crate::linalg::{self, CMatrix};
use crate::model::{CouplingSchedule, FrameRates};
use crate::quad::simpson;
use crate::{Error, Result};

const F_PM_TOL: f64 = 1e-12;
const E1_TOL: f64 = 1e-12;

/// The four coefficient integrals of `Ê_1`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FPm {
    pub pp: f64,
    pub mm: f64,
    pub pm: f64,
    pub mp: f64,
}

impl FPm {
    pub fn as_array(&self) -> [f64; 4] {
        [self.pp, self.mm, self.pm, self.mp]
    }

    fn from_array(v: [f64; 4]) -> Self {
        Self {
            pp: v[0],
            mm: v[1],
            pm: v[2],
            mp: v[3],
        }
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        libm::sin(x) / x
    }
}

/// `sin(wη)/w`, finite as `w → 0`.
fn sin_over(w: f64, eta: f64) -> f64 {
    eta * sinc(w * eta)
}

/// `(cos(wη) - 1)/w`, finite as `w → 0`.
fn cos_m1_over(w: f64, eta: f64) -> f64 {
    let half = w * eta / 2.0;
    -eta * libm::sin(half) * sinc(half)
}

/// `F_±±(t)` by quadrature of their integral definitions,
/// `F_++ = ½∫g_0 cos(Ω_c t')cos(2Ω_m t')dt'` and so on.
pub fn f_pm_quadrature(rates: &FrameRates, schedule: &CouplingSchedule, t: f64) -> Result<FPm> {
    if t < 0.0 {
        return Err(Error::param("t", "must be nonnegative"));
    }
    schedule.check_covers(0.0, t)?;
    let om = rates.omega_m;
    let w_c = rates.omega_c / om;
    let eta = om * t;
    let opts = oscillatory_opts(w_c.abs() + 2.0, eta, F_PM_TOL);
    let q = simpson(
        |e: f64| -> [f64; 4] {
            let g = schedule.eval(e / om).unwrap_or(f64::NAN) / om;
            let (sc, cc) = libm::sincos(w_c * e);
            let (s2, c2) = libm::sincos(2.0 * e);
            [
                0.5 * g * cc * c2,
                0.5 * g * sc * s2,
                0.5 * g * cc * s2,
                0.5 * g * sc * c2,
            ]
        },
        0.0,
        eta,
        opts,
    )?;
    Ok(FPm::from_array(q.value))
}

/// The printed closed forms for constant `g_0`, without the `g_0/Ω_m`
/// prefactor of the integral definitions.
pub fn f_pm_printed(rates: &FrameRates, t: f64) -> FPm {
    let om = rates.omega_m;
    let eta = om * t;
    let w_m = rates.omega_minus() / om;
    let w_p = rates.omega_plus() / om;
    FPm {
        pp: 0.5 * (sin_over(w_m, eta) + sin_over(w_p, eta)),
        mm: 0.5 * (sin_over(w_m, eta) - sin_over(w_p, eta)),
        pm: 0.5 * (cos_m1_over(w_m, eta) - cos_m1_over(w_p, eta)),
        mp: 0.5 * (cos_m1_over(w_m, eta) + cos_m1_over(w_p, eta)),
    }
}

/// Quadrature values alongside the printed closed forms and their ratios.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FPmReport {
    pub t: f64,
    pub quadrature: FPm,
    pub printed: FPm,
    /// `quadrature / printed` per function; `NaN` where the printed value
    /// vanishes.
    pub ratios: [f64; 4],
    /// `g_0/(2Ω_m)`, the magnitude the ratios are expected to share.
    pub expected_ratio: f64,
}

impl FPmReport {
    /// Largest `|quadrature - ratio·printed|` over the four functions, using
    /// `signs[k]·expected_ratio` as the ratio.
    pub fn scaled_mismatch(&self, signs: [f64; 4]) -> f64 {
        let q = self.quadrature.as_array();
        let p = self.printed.as_array();
        (0..4).fold(0.0, |m, k| {
            m.max((q[k] - signs[k] * self.expected_ratio * p[k]).abs())
        })
    }
}

/// Ratio signs observed between quadrature and printed forms, in the order
/// `(++, --, +-, -+)`.
pub const PRINTED_RATIO_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// `F_±±(t)` for constant `g_0`: quadrature values plus the closed-form log.
pub fn f_pm_functions(rates: &FrameRates, t: f64) -> Result<FPmReport> {
    let quadrature = f_pm_quadrature(rates, &CouplingSchedule::Constant(rates.g0), t)?;
    let printed = f_pm_printed(rates, t);
    let q = quadrature.as_array();
    let p = printed.as_array();
    let mut ratios = [f64::NAN; 4];
    for k in 0..4 {
        if p[k] != 0.0 {
            ratios[k] = q[k] / p[k];
        }
    }
    Ok(FPmReport {
        t,
        quadrature,
        printed,
        ratios,
        expected_ratio: rates.g0 / (2.0 * rates.omega_m),
    })
}

/// `2(F_++ - F_--)² + 2(F_+- + F_-+)²`.
pub fn f_uni_from_f_pm(f: &FPm) -> f64 {
    let (c, s) = (f.pp - f.mm, f.pm + f.mp);
    2.0 * (c * c + s * s)
}

/// State-independent second-order deficit for constant `g_0`,
/// `F_uni(t) = 2g_0² sin²(Ω_+ t/2)/Ω_+²`.
pub fn f_uni(rates: &FrameRates, t: f64) -> f64 {
    let s = t * sinc(rates.omega_plus() * t / 2.0);
    0.5 * rates.g0 * rates.g0 * s * s
}

/// The printed main-text expression
/// `2g_0²[sin²(Ω_+ t)/Ω_+² + sin⁴(Ω_- t/2)/(Ω_-/2)²]`, kept for comparison.
pub fn f_uni_printed(rates: &FrameRates, t: f64) -> f64 {
    let p = t * sinc(rates.omega_plus() * t);
    let half = rates.omega_minus() * t / 2.0;
    let m = libm::sin(half) * t * sinc(half);
    2.0 * rates.g0 * rates.g0 * (p * p + m * m)
}

/// `Ê_1` built twice: by direct quadrature of its time-dependent integrand
/// and from the `F_±±` expansion.
#[derive(Clone, Debug)]
pub struct E1Dual {
    pub direct: Operator,
    pub expansion: Operator,
    pub max_deviation: f64,
    /// Largest entry of the direct construction.
    pub scale: f64,
}

impl E1Dual {
    pub fn relative_deviation(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_deviation
        } else {
            self.max_deviation / self.scale
        }
    }
}

/// `Ê_1(t) = ½∫_0^t g_0(t')(a e^{-iΩ_c t'} + h.c.)(b² e^{-2iΩ_m t'} + h.c.) dt'`.
pub fn e1_operator(
    rates: &FrameRates,
    schedule: &CouplingSchedule,
    t: f64,
    space: &ModeSpace,
) -> Result<E1Dual> {
    if t < 0.0 {
        return Err(Error::param("t", "must be nonnegative"));
    }
    schedule.check_covers(0.0, t)?;
    let a = fock::annihilation(space.n_a)?;
    let b = fock::annihilation(space.n_b)?;
    let b2 = &b * &b;
    let (a_dag, b2_dag) = (a.adjoint(), b2.adjoint());

    let opts = oscillatory_opts(rates.omega_c.abs() + 2.0 * rates.omega_m, t, E1_TOL);
    let direct = simpson(
        |s: f64| -> CMatrix {
            let g = schedule.eval(s).unwrap_or(f64::NAN);
            let pa = linalg::phase(-rates.omega_c * s);
            let pb = linalg::phase(-2.0 * rates.omega_m * s);
            let xa = &a * pa + &a_dag * pa.conj();
            let xb = &b2 * pb + &b2_dag * pb.conj();
            xa.kronecker(&xb) * Complex64::new(0.5 * g, 0.0)
        },
        0.0,
        t,
        opts,
    )?
    .value;

    let f = f_pm_quadrature(rates, schedule, t)?;
    let i = Complex64::i();
    let a_plus = &a + &a_dag;
    let a_minus = (&a - &a_dag) * (-i);
    let b_plus = &b2 + &b2_dag;
    let b_minus = (&b2 - &b2_dag) * (-i);
    let re = |x: f64| Complex64::new(x, 0.0);
    let expansion = a_plus.kronecker(&b_plus) * re(f.pp)
        + a_minus.kronecker(&b_minus) * re(f.mm)
        + a_plus.kronecker(&b_minus) * re(f.pm)
        + a_minus.kronecker(&b_plus) * re(f.mp);

    let max_deviation = linalg::max_abs(&(&direct - &expansion));
    let scale = linalg::max_abs(&direct);
    Ok(E1Dual {
        direct: Operator::from_matrix(direct, SpaceTag::Joint),
        expansion: Operator::from_matrix(expansion, SpaceTag::Joint),
        max_deviation,
        scale,
    })
}

/// `1 + ⟨Ê_1⟩² - ⟨Ê_1²⟩` for the state `psi`.
pub fn perturbative_fidelity(e1: &Operator, psi: &PureState) -> Result<f64> {
    if e1.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: e1.dim(),
            found: psi.dim(),
        });
    }
    let v = e1.apply(psi);
    let mean = psi.amplitudes().dotc(&v).re;
    Ok(1.0 + mean * mean - v.norm_squared())
}
