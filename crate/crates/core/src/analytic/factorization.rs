//! Product-form propagator of the mechano-optical Hamiltonian,
//! `U = U_b U_b2 U_a U_+ U_-`, built from the closed algebra
//! `{N_a, N_b, N_b², G_+, G_-}`.

use alloc::{string::String, vec, vec::Vec};
use core::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::evolve::{TimeGrid, UnitaryPropagator};
use crate::fock::{self, ModeSpace, Operator, PureState, SpaceTag};
use crate::linalg::{CVector, HermitianEigen};
use crate::model::{build_h_mo, CouplingSchedule, FrameRates};
use crate::quad::{rk4_step, simpson, Integrand, SimpsonOptions};
use crate::{Error, Result};

const F_PM_TOL: f64 = 1e-10;
const ODE_TOL: f64 = 1e-12;
const ODE_MAX_SUBSTEPS: usize = 1 << 16;

/// Coefficient functions of the factored propagator on a time grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FCoefficients {
    pub times: Vec<f64>,
    pub f_a: Vec<f64>,
    pub f_b: Vec<f64>,
    /// From the determining differential equation.
    pub f_b2: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    /// Printed closed form with the stray `t'` read as `t`, kept for
    /// comparison only.
    pub f_b2_printed: Vec<f64>,
}

impl FCoefficients {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|F_b2(ODE) - F_b2(printed)|` over the grid.
    pub fn printed_f_b2_discrepancy(&self) -> f64 {
        self.f_b2
            .iter()
            .zip(&self.f_b2_printed)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// Frequency-aware Simpson settings: at least eight samples per period of
/// the fastest oscillation on the first pass.
pub(crate) fn oscillatory_opts(max_freq: f64, span: f64, tolerance: f64) -> SimpsonOptions {
    let periods = max_freq.abs() * span.abs() / TAU;
    let mut n = libm::ceil(8.0 * periods).max(16.0) as usize;
    n += n % 2;
    SimpsonOptions {
        tolerance,
        initial_intervals: n,
        max_intervals: (n << 16).max(1 << 22),
    }
}

fn quad_f_pm(
    rates: &FrameRates,
    schedule: &CouplingSchedule,
    t: f64,
) -> Result<(f64, f64)> {
    let opts = oscillatory_opts(rates.omega_c, t, F_PM_TOL);
    let q = simpson(
        |s: f64| -> [f64; 2] {
            let g = schedule.eval(s).unwrap_or(f64::NAN);
            let (sin, cos) = libm::sincos(rates.omega_c * s);
            [g * cos, g * sin]
        },
        0.0,
        t,
        opts,
    )?;
    Ok((q.value[0], q.value[1]))
}

/// `[F_+, F_-, F_b2]` at the requested times by RK4 on
/// `Ḟ_+ = g cos(Ω_c t)`, `Ḟ_- = g sin(Ω_c t)`, `Ḟ_b2 = -2 g sin(Ω_c t) F_+`,
/// doubling the step count until successive runs agree to `1e-12`.
fn integrate_ode(
    rates: &FrameRates,
    schedule: &CouplingSchedule,
    times: &[f64],
) -> Result<Vec<[f64; 3]>> {
    let rhs = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let g = schedule.eval(t).unwrap_or(f64::NAN);
        let (sin, cos) = libm::sincos(rates.omega_c * t);
        [g * cos, g * sin, -2.0 * g * sin * y[0]]
    };
    let span = times.last().copied().unwrap_or(0.0);
    let periods = rates.omega_c.abs().max(schedule.max_abs()) * span / TAU;
    let mut substeps = ((libm::ceil(32.0 * periods) as usize) / times.len().max(1)).max(4);

    let run = |substeps: usize| {
        let mut y = [0.0; 3];
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t_next in times {
            let h = (t_next - t) / substeps as f64;
            if h > 0.0 {
                for s in 0..substeps {
                    y = rk4_step(&rhs, t + s as f64 * h, &y, h);
                }
            }
            t = t_next;
            out.push(y);
        }
        out
    };

    let mut prev = run(substeps);
    loop {
        substeps *= 2;
        let next = run(substeps);
        let mut change = 0.0_f64;
        let mut scale = 0.0_f64;
        for (a, b) in prev.iter().zip(&next) {
            for k in 0..3 {
                change = change.max((a[k] - b[k]).abs());
            }
            scale = scale.max(b.magnitude());
        }
        if !change.is_finite() {
            return Err(Error::Quadrature {
                tolerance: ODE_TOL,
                change,
            });
        }
        if change <= ODE_TOL * scale.max(f64::MIN_POSITIVE) || change == 0.0 {
            return Ok(next);
        }
        if substeps >= ODE_MAX_SUBSTEPS {
            return Err(Error::Quadrature {
                tolerance: ODE_TOL,
                change,
            });
        }
        prev = next;
    }
}

/// Coefficient functions of the factored propagator at every grid time.
pub fn f_coefficients(
    rates: &FrameRates,
    schedule: &CouplingSchedule,
    grid: &TimeGrid,
) -> Result<FCoefficients> {
    if grid.t0 < 0.0 {
        return Err(Error::param("t0", "factored propagator starts at t = 0"));
    }
    schedule.check_covers(0.0, grid.t1)?;
    let times = grid.times().to_vec();
    let ode = integrate_ode(rates, schedule, &times)?;

    let mut out = FCoefficients {
        times: times.clone(),
        f_a: Vec::with_capacity(times.len()),
        f_b: Vec::with_capacity(times.len()),
        f_b2: Vec::with_capacity(times.len()),
        f_plus: Vec::with_capacity(times.len()),
        f_minus: Vec::with_capacity(times.len()),
        f_b2_printed: Vec::with_capacity(times.len()),
    };
    let printed_scale = 1.0 / libm::sqrt((rates.omega_c * rates.omega_m).abs());
    for (&t, y) in times.iter().zip(&ode) {
        let (f_plus, f_minus) = quad_f_pm(rates, schedule, t)?;
        out.f_a.push(rates.omega_c * t);
        out.f_b.push(rates.omega_m * t);
        out.f_plus.push(f_plus);
        out.f_minus.push(f_minus);
        out.f_b2.push(y[2]);
        let g = schedule.eval(t)?;
        out.f_b2_printed
            .push(-2.0 * g * printed_scale * libm::sin(rates.omega_c * t) * f_plus);
    }
    Ok(out)
}

/// Generators of the factorization. Kept as plain data so callers can
/// substitute a deliberately wrong set.
#[derive(Clone, Debug)]
pub struct LieGenerators {
    pub n_a: Operator,
    pub n_b: Operator,
    pub n_b_sq: Operator,
    /// `(a^† + a) b^†b`.
    pub g_plus: Operator,
    /// `i(a^† - a) b^†b`.
    pub g_minus: Operator,
}

impl LieGenerators {
    pub fn new(space: &ModeSpace) -> Result<Self> {
        let a = fock::annihilation(space.n_a)?;
        let nb = fock::number(space.n_b)?;
        let na = fock::number(space.n_a)?;
        let id_a = crate::linalg::CMatrix::identity(space.n_a, space.n_a);
        let id_b = crate::linalg::CMatrix::identity(space.n_b, space.n_b);
        let a_dag = a.adjoint();
        let plus = &a_dag + &a;
        let minus = (&a_dag - &a) * Complex64::i();
        let joint = |m: crate::linalg::CMatrix| Operator::from_matrix(m, SpaceTag::Joint);
        Ok(Self {
            n_a: joint(na.kronecker(&id_b)),
            n_b: joint(id_a.kronecker(&nb)),
            n_b_sq: joint(id_a.kronecker(&(&nb * &nb))),
            g_plus: joint(plus.kronecker(&nb)),
            g_minus: joint(minus.kronecker(&nb)),
        })
    }
}

/// `exp(-iF_b N_b) exp(-iF_b2 N_b²) exp(-iF_a N_a) exp(-iF_+ G_+) exp(-iF_- G_-)`
/// at every time of `coeffs`.
pub fn factored_propagator(
    coeffs: &FCoefficients,
    generators: &LieGenerators,
) -> Result<Vec<Operator>> {
    let eig = |op: &Operator| HermitianEigen::new(op.matrix());
    let (e_b, e_b2, e_a, e_p, e_m) = (
        eig(&generators.n_b)?,
        eig(&generators.n_b_sq)?,
        eig(&generators.n_a)?,
        eig(&generators.g_plus)?,
        eig(&generators.g_minus)?,
    );
    let mut out = Vec::with_capacity(coeffs.len());
    for k in 0..coeffs.len() {
        let u = e_b.propagator(coeffs.f_b[k])
            * e_b2.propagator(coeffs.f_b2[k])
            * e_a.propagator(coeffs.f_a[k])
            * e_p.propagator(coeffs.f_plus[k])
            * e_m.propagator(coeffs.f_minus[k]);
        out.push(Operator::from_matrix(u, SpaceTag::Joint));
    }
    Ok(out)
}

/// Comparison of the factored propagator against spectral exponentiation.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorizationReport {
    pub min_fidelity: f64,
    pub max_unitarity_deviation: f64,
    pub n_states: usize,
    pub n_times: usize,
    /// Largest `|F_b2(ODE) - F_b2(printed)|`.
    pub printed_f_b2_discrepancy: f64,
}

/// Random normalized state supported on `|j⟩_a|k⟩_b` with `j < support.n_a`,
/// `k < support.n_b`.
pub fn random_low_state(space: &ModeSpace, support: &ModeSpace, rng: &mut impl Rng) -> PureState {
    let mut v = CVector::zeros(space.joint_dim());
    for j in 0..support.n_a.min(space.n_a) {
        for k in 0..support.n_b.min(space.n_b) {
            v[space.index(j, k)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    PureState::normalized(v).expect("a random vector is nonzero with probability one")
}

/// Fidelities between `factored_propagator` (with the supplied generator
/// set) and `exp(-i H_MO t)` for random low-lying states, constant `g_0`.
pub fn factorization_check(
    rates: &FrameRates,
    space: &ModeSpace,
    grid: &TimeGrid,
    generators: &LieGenerators,
    support: &ModeSpace,
    n_states: usize,
    rng: &mut impl Rng,
) -> Result<FactorizationReport> {
    let coeffs = f_coefficients(rates, &CouplingSchedule::Constant(rates.g0), grid)?;
    let factored = factored_propagator(&coeffs, generators)?;
    let exact = UnitaryPropagator::new(&build_h_mo(rates, space)?)?;
    let states: Vec<PureState> = (0..n_states)
        .map(|_| random_low_state(space, support, rng))
        .collect();
    let mut min_fidelity = f64::INFINITY;
    let mut max_unitarity_deviation = 0.0_f64;
    for (u, &t) in factored.iter().zip(&coeffs.times) {
        max_unitarity_deviation = max_unitarity_deviation.max(u.unitarity_deviation());
        for psi in &states {
            let a = PureState::from_vector_unchecked(u.apply(psi));
            let b = exact.apply(psi, t);
            min_fidelity = min_fidelity.min(a.inner(&b)?.norm_sqr());
        }
    }
    Ok(FactorizationReport {
        min_fidelity,
        max_unitarity_deviation,
        n_states,
        n_times: coeffs.len(),
        printed_f_b2_discrepancy: coeffs.printed_f_b2_discrepancy(),
    })
}

/// Maximum interior-block deviation of each printed conjugation identity.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentityReport {
    pub label: String,
    pub samples: Vec<f64>,
    pub max_deviation: f64,
}

/// Cavity levels needed to hold the lowest `n_a` states after a
/// displacement of magnitude `shift`.
fn identity_padding(n_a: usize, shift: f64) -> usize {
    let reach = libm::sqrt(n_a as f64) + shift.abs();
    n_a + libm::ceil(reach * reach + 12.0 * reach + 30.0) as usize
}

/// Checks
/// `U_a G_+ U_a^† = cos F G_+ - sin F G_-`,
/// `U_a G_- U_a^† = cos F G_- + sin F G_+` and
/// `U_+ G_- U_+^† = G_- + 2F N_b²`
/// for each sampled `F`. Every generator commutes with `N_b`, so each
/// phonon-number block is checked separately, with mode `a` padded far
/// enough that `exp(-iF G_+)` keeps the compared levels away from the edge.
pub fn conjugation_identities_check(space: &ModeSpace, samples: &[f64]) -> Result<Vec<IdentityReport>> {
    let f_max = samples.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    let k_max = (space.n_b - 1) as f64;
    let n_pad = identity_padding(space.n_a, f_max * k_max);
    let block = space.n_a.saturating_sub(fock::DEFAULT_EDGE);

    let a = fock::annihilation(n_pad)?;
    let a_dag = a.adjoint();
    let x = &a_dag + &a;
    let y = (&a_dag - &a) * Complex64::i();
    let e_a = HermitianEigen::new(&fock::number(n_pad)?)?;
    let e_x = HermitianEigen::new(&x)?;
    let single = |m: crate::linalg::CMatrix| Operator::from_matrix(m, SpaceTag::ModeA);
    let (x_op, y_op) = (single(x.clone()), single(y.clone()));
    let id = Operator::identity(n_pad, SpaceTag::ModeA);

    let mut rot_plus = 0.0_f64;
    let mut rot_minus = 0.0_f64;
    let mut shear = 0.0_f64;
    for &f in samples {
        let (c, s) = (libm::cos(f), libm::sin(f));
        let u_a = single(e_a.propagator(f));
        for k in 0..space.n_b {
            let kf = k as f64;
            let g_plus = x_op.scale(kf);
            let g_minus = y_op.scale(kf);
            // conjugate_by computes U^† X U, so pass U^† to obtain U X U^†
            let lhs = g_plus.conjugate_by(&u_a.adjoint());
            let rhs = &g_plus.scale(c) - &g_minus.scale(s);
            rot_plus = rot_plus.max(fock::block_deviation(&lhs, &rhs, None, block, 0));

            let lhs = g_minus.conjugate_by(&u_a.adjoint());
            let rhs = &g_minus.scale(c) + &g_plus.scale(s);
            rot_minus = rot_minus.max(fock::block_deviation(&lhs, &rhs, None, block, 0));

            let u_p = single(e_x.propagator(f * kf));
            let lhs = g_minus.conjugate_by(&u_p.adjoint());
            let rhs = &g_minus + &id.scale(2.0 * f * kf * kf);
            shear = shear.max(fock::block_deviation(&lhs, &rhs, None, block, 0));
        }
    }
    let samples = samples.to_vec();
    Ok(vec![
        IdentityReport {
            label: String::from("U_a G_+ U_a^dag = cos(F_a) G_+ - sin(F_a) G_-"),
            samples: samples.clone(),
            max_deviation: rot_plus,
        },
        IdentityReport {
            label: String::from("U_a G_- U_a^dag = cos(F_a) G_- + sin(F_a) G_+"),
            samples: samples.clone(),
            max_deviation: rot_minus,
        },
        IdentityReport {
            label: String::from("U_+ G_- U_+^dag = G_- + 2 F_+ N_b^2"),
            samples,
            max_deviation: shear,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn grid(t1: f64, n: usize) -> TimeGrid {
        TimeGrid::new(0.0, t1, n).unwrap()
    }

    #[test]
    fn zero_coupling_gives_zero_coefficients() {
        let rates = FrameRates::new(1.3, 2.0, 0.0, 0.0).unwrap();
        let c = f_coefficients(&rates, &CouplingSchedule::Constant(0.0), &grid(4.0, 8)).unwrap();
        assert!(c.f_plus.iter().chain(&c.f_minus).chain(&c.f_b2).all(|&x| x == 0.0));
        for (k, &t) in c.times.iter().enumerate() {
            assert_eq!(c.f_a[k], 1.3 * t);
            assert_eq!(c.f_b[k], 2.0 * t);
        }
    }

    #[test]
    fn constant_coupling_closed_forms() {
        let (oc, g) = (1.7, 0.4);
        let rates = FrameRates::new(oc, 2.0, g, 0.0).unwrap();
        let c = f_coefficients(&rates, &CouplingSchedule::Constant(g), &grid(6.0, 12)).unwrap();
        for (k, &t) in c.times.iter().enumerate() {
            assert_relative_eq!(c.f_plus[k], g * (oc * t).sin() / oc, epsilon = 1e-11);
            assert_relative_eq!(c.f_minus[k], g * (1.0 - (oc * t).cos()) / oc, epsilon = 1e-11);
            let fb2 = -(g * g / oc) * (t - (2.0 * oc * t).sin() / (2.0 * oc));
            assert_relative_eq!(c.f_b2[k], fb2, epsilon = 1e-11);
        }
        assert_eq!(c.f_b2[0], 0.0);
        assert!(c.printed_f_b2_discrepancy() > 1e-3);
    }

    #[test]
    fn zero_coupling_propagator_is_free_rotation() {
        let sp = ModeSpace::new(4, 4).unwrap();
        let rates = FrameRates::new(0.9, 1.4, 0.0, 0.0).unwrap();
        let gens = LieGenerators::new(&sp).unwrap();
        let c = f_coefficients(&rates, &CouplingSchedule::Constant(0.0), &grid(3.0, 3)).unwrap();
        let us = factored_propagator(&c, &gens).unwrap();
        let id = Operator::identity(16, SpaceTag::Joint);
        assert!(crate::linalg::max_abs(&(us[0].matrix() - id.matrix())) < 1e-14);
        for (u, &t) in us.iter().zip(&c.times) {
            for j in 0..4 {
                for k in 0..4 {
                    let i = sp.index(j, k);
                    let expected = crate::linalg::phase(-(0.9 * j as f64 + 1.4 * k as f64) * t);
                    assert!((u.entry(i, i) - expected).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn factorization_matches_spectral_exponential() {
        let sp = ModeSpace::new(12, 12).unwrap();
        let rates = FrameRates::new(1.0, 1.3, 0.08, 0.0).unwrap();
        let gens = LieGenerators::new(&sp).unwrap();
        let support = ModeSpace::new(3, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r = factorization_check(&rates, &sp, &grid(10.0, 9), &gens, &support, 5, &mut rng).unwrap();
        assert!(r.min_fidelity >= 1.0 - 1e-8, "{r:?}");
        assert!(r.max_unitarity_deviation < 1e-9);
    }

    #[test]
    fn sign_flipped_generator_is_detected() {
        let sp = ModeSpace::new(8, 6).unwrap();
        let rates = FrameRates::new(1.0, 1.3, 0.2, 0.0).unwrap();
        let mut gens = LieGenerators::new(&sp).unwrap();
        gens.g_minus = gens.g_minus.scale(-1.0);
        let support = ModeSpace::new(3, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r = factorization_check(&rates, &sp, &grid(5.0, 4), &gens, &support, 4, &mut rng).unwrap();
        assert!(r.min_fidelity < 0.999, "{r:?}");
    }

    #[test]
    fn conjugation_identities() {
        let sp = ModeSpace::new(8, 6).unwrap();
        let reports =
            conjugation_identities_check(&sp, &[0.0, 0.3, core::f64::consts::FRAC_PI_2, 2.0]).unwrap();
        for r in &reports {
            assert!(r.max_deviation <= 1e-10, "{r:?}");
        }

        let single = conjugation_identities_check(&sp, &[0.3]).unwrap();
        assert!(single[2].max_deviation <= 1e-10);

        // F_a = π/2 sends G_+ to -G_-
        let padded = ModeSpace::new(40, 6).unwrap();
        let gens = LieGenerators::new(&padded).unwrap();
        let u = Operator::from_matrix(
            HermitianEigen::new(gens.n_a.matrix())
                .unwrap()
                .propagator(core::f64::consts::FRAC_PI_2),
            SpaceTag::Joint,
        );
        let turned = gens.g_plus.conjugate_by(&u.adjoint());
        let target = gens.g_minus.scale(-1.0);
        assert!(fock::block_deviation(&turned, &target, Some(&padded), 30, 6) < 1e-12);
    }
}
