//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use mech_sim_core::analytic::{
    anharmonic_cure_check, e1_operator, f_pm_functions, factorization_check, spectrum_check,
    spectrum_value, LieGenerators, PRINTED_RATIO_SIGNS,
};
use mech_sim_core::evolve::{evolve_lindblad, evolve_unitary, TimeGrid};
use mech_sim_core::fock::{self, coherent_state, partial_trace, thermal_occupation, JointLadder, Mode};
use mech_sim_core::measure::{
    ds_vs_mo_experiment, full_chain_experiment, negativity_volume, wigner, GridSpec,
};
use mech_sim_core::model::{
    bare_coupling_for, build_h_mo, effective_coupling, conjugation_theorem_check, decoherence_time, preset,
    solve_frame, squeezing_from_db, CouplingSchedule, FrameRates, PhysicalParams,
};
use mech_sim_core::{Complex64, ModeSpace, Operator, PureState, SpaceTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), mech_sim_core::Error>;
type Criterion = (&'static str, fn() -> Outcome);

const CAT_ALPHA: f64 = 80_752.0;

/// Dimensionless cat-state rates: the cQED preset driven to the mean field
/// `CAT_ALPHA` with `g_0 = Ω_c/2`, then expressed in units of `Ω_c`.
fn cat_rates() -> Result<FrameRates, mech_sim_core::Error> {
    let cqed = preset("cqed")?;
    let g0 = effective_coupling(cqed.omega_m, cqed.g_quad, CAT_ALPHA * CAT_ALPHA) * CAT_ALPHA;
    let params =
        PhysicalParams::for_target_frame(cqed.omega_m, cqed.g_quad, CAT_ALPHA, 2.0 * g0, 0.0)?;
    let frame = solve_frame(&params)?;
    if (frame.alpha_abs() / CAT_ALPHA - 1.0).abs() > 1e-9 {
        return Err(mech_sim_core::Error::InvalidParameter {
            name: "alpha",
            reason: "mean field left the target fixed point".into(),
        });
    }
    frame.rates().in_units_of(frame.omega_c)
}

fn cat_initial(space: &ModeSpace) -> Result<PureState, mech_sim_core::Error> {
    let one = Complex64::new(1.0, 0.0);
    Ok(PureState::product(
        &coherent_state(one, space.n_a)?,
        &coherent_state(one, space.n_b)?,
    ))
}

fn criterion_1() -> Outcome {
    let rates = cat_rates()?;
    let space = ModeSpace::new(40, 20)?;
    let psi0 = cat_initial(&space)?;
    let grid = TimeGrid::new(0.0, TAU / rates.omega_c, 200)?;
    let trace = ds_vs_mo_experiment(&rates, &psi0, &grid, &space, true)?;
    let min_f = trace.min_f_exact();
    Ok((
        min_f >= 0.9958,
        format!(
            "min F_exact = {min_f:.12} over t in [0, 2pi/Omega_c] (Omega_m/Omega_c = {:.4}, g/g0 = {:.3e})",
            rates.omega_m, rates.g / rates.g0
        ),
    ))
}

fn criterion_2() -> Outcome {
    let rates = cat_rates()?;
    let space = ModeSpace::new(40, 20)?;
    let psi0 = cat_initial(&space)?;
    let grid = TimeGrid::new(0.0, TAU / rates.omega_c, 2)?;
    let run = evolve_unitary(&build_h_mo(&rates, &space)?, &psi0, &grid, "H_MO")?;
    let mut vols = Vec::new();
    let mut mins = Vec::new();
    for psi in [&run.states[0], run.final_state()] {
        let rho_b = partial_trace(&psi.density_matrix(), Mode::B, &space)?;
        let w = wigner(&rho_b, &GridSpec::for_state(&rho_b, 121))?;
        w.check_contains(2e-2)?;
        vols.push(negativity_volume(&w));
        mins.push(w.min_value());
    }
    let pass = vols[1] > 0.01 && mins[1] < 0.0 && vols[0] <= 1e-6;
    Ok((
        pass,
        format!(
            "mechanical negativity volume {:.6} (min W = {:.6}) at t = 2pi/Omega_c; {:.2e} at t = 0",
            vols[1], mins[1], vols[0]
        ),
    ))
}

fn criterion_3() -> Outcome {
    let space = ModeSpace::new(10, 12)?;
    let vac = PureState::fock(&space, 0, 0)?;
    let rates_for = |eps: f64| FrameRates::new(1.0, 1.0, eps, 0.0);

    let r = rates_for(0.01)?;
    let grid = TimeGrid::new(0.0, 0.1 / r.g0, 400)?;
    let trace = ds_vs_mo_experiment(&r, &vac, &grid, &space, false)?;
    let rel = trace.max_deficit_relative_difference(0.1 / r.g0, 0.1);

    // common window t ≤ 0.1/g0 for the largest coupling
    let common = TimeGrid::new(0.0, 0.1 / 0.02, 200)?;
    let traces = [0.02, 0.01, 0.005]
        .iter()
        .map(|&e| ds_vs_mo_experiment(&rates_for(e)?, &vac, &common, &space, false))
        .collect::<Result<Vec<_>, _>>()?;
    let mut worst_ratio_dev = 0.0_f64;
    for pair in traces.windows(2) {
        let peak = pair[1]
            .deficit_perturbative
            .iter()
            .copied()
            .fold(0.0, f64::max);
        for k in 1..common.len() {
            if pair[1].deficit_perturbative[k] < 0.1 * peak {
                continue;
            }
            let ratio = pair[0].deficit_exact[k] / pair[1].deficit_exact[k];
            worst_ratio_dev = worst_ratio_dev.max((ratio / 4.0 - 1.0).abs());
        }
    }
    Ok((
        rel <= 0.2 && worst_ratio_dev <= 0.05,
        format!(
            "eps = 0.01: max |deficit - F_uni|/F_uni = {rel:.4}; halving eps: deficit ratio within {:.6} of 4x",
            worst_ratio_dev
        ),
    ))
}

fn criterion_4() -> Outcome {
    let rates = FrameRates::new(1.0, 1.3, 0.1, 0.0)?;
    let space = ModeSpace::new(12, 12)?;
    let support = ModeSpace::new(4, 4)?;
    let grid = TimeGrid::new(0.0, 12.0, 9)?;
    let gens = LieGenerators::new(&space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rep = factorization_check(&rates, &space, &grid, &gens, &support, 20, &mut rng)?;
    Ok((
        rep.min_fidelity >= 1.0 - 1e-8 && rep.n_times == 10,
        format!(
            "min fidelity {:.15} over {} states x {} times; unitarity deviation {:.2e}; |F_b2 ODE - printed| = {:.3e}",
            rep.min_fidelity, rep.n_states, rep.n_times, rep.max_unitarity_deviation, rep.printed_f_b2_discrepancy
        ),
    ))
}

fn criterion_5() -> Outcome {
    let rates = FrameRates::new(1.0, 1.3, 0.1, 0.0)?;
    let space = ModeSpace::new(40, 40)?;
    let rep = spectrum_check(&rates, 4, 4, &space)?;
    let residuals_ok = rep.rows.iter().all(|r| r.residual_within_bound(rates.omega_c));
    let chi = rates.g0 * rates.g0 / rates.omega_c;
    let analytic_ok = (0..=200)
        .flat_map(|n| (0..=200).map(move |l| (n, l)))
        .all(|(n, l)| spectrum_value(&rates, n, l) + chi * (l * l) as f64 >= 0.0);
    let cure = anharmonic_cure_check(&rates, chi, &ModeSpace::new(40, 12)?)?;

    let unstable = FrameRates::new(1.0, 1.5, 0.5, 0.0)?;
    let box_u = ModeSpace::new(60, 12)?;
    let bare = anharmonic_cure_check(&unstable, 0.0, &box_u)?;
    let cured = anharmonic_cure_check(&unstable, unstable.g0 * unstable.g0, &box_u)?;
    let floor = -1e-8 * rates.omega_c;
    let pass = rep.checked == 25
        && rep.max_rel_err <= 1e-6
        && residuals_ok
        && analytic_ok
        && cure.min_converged >= floor
        && bare.min_converged < 0.0
        && cured.min_converged >= -1e-8 * unstable.omega_c;
    Ok((
        pass,
        format!(
            "{} levels matched, max rel err {:.2e}, max residual {:.2e}; cured min {:.3e}; l_max = 6 case: bare min {:.4}, cured min {:.3e}",
            rep.checked, rep.max_rel_err, rep.max_residual, cure.min_converged, bare.min_converged, cured.min_converged
        ),
    ))
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn criterion_6() -> Outcome {
    let n_membrane = thermal_occupation(TAU * 5.8e6, 0.010)?;
    let mech = preset("mechanics")?;
    let n_mech = thermal_occupation(mech.omega_m, mech.temperature)?;
    let cqed = preset("cqed")?;
    let n_cqed = thermal_occupation(cqed.omega_m, cqed.temperature)?;
    let r = squeezing_from_db(4.7)?;
    let tau = decoherence_time(TAU * 8.0, n_membrane);
    let pass = within(n_membrane, 35.0, 0.03)
        && within(n_mech, 74_000.0, 0.03)
        && (n_cqed - 0.3).abs() <= 0.05
        && (r - 0.54).abs() <= 0.01
        && within(tau, 0.6e-3, 0.10);
    Ok((
        pass,
        format!(
            "n_p = {n_membrane:.3} (5.8 MHz membrane), {n_mech:.0} (mechanics), {n_cqed:.4} (cQED); |r_max| = {r:.4}; 1/(gamma_m n_p) = {:.4} ms",
            tau * 1e3
        ),
    ))
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0_f64;
    for &alpha in &[1.5, 3.0, 4.0] {
        let g = 0.3 / (alpha * alpha);
        let params = PhysicalParams::for_target_frame(1.0, g, alpha, 0.8, 0.0)?;
        let frame = solve_frame(&params)?;
        let padded = ModeSpace::new(fock::coherent_required_dim(alpha) + 40, 40)?;
        let block = ModeSpace::new(8, 6)?;
        let rep = conjugation_theorem_check(&params, &frame, &padded, &block)?;
        worst = worst.max(rep.relative_deviation());
    }

    let g0 = 0.05;
    let space = ModeSpace::new(6, 14)?;
    let psi0 = PureState::product(
        &PureState::basis(6, 1)?,
        &coherent_state(Complex64::new(1.0, 0.0), 14)?,
    );
    let grid = TimeGrid::new(0.0, 20.0, 10)?;
    let mut deficits = Vec::new();
    for &alpha in &[2.0, 3.0, 4.0] {
        let g = bare_coupling_for(g0, alpha, 1.0)?;
        let params = PhysicalParams::for_target_frame(1.0, g, alpha, 1.0, 0.0)?;
        let padded = ModeSpace::new(fock::coherent_required_dim(alpha) + 16, 26)?;
        let trace = full_chain_experiment(&params, &psi0, &grid, &space, &padded)?;
        deficits.push(trace.final_deficit());
    }
    let decreasing = deficits.windows(2).all(|w| w[1] < w[0]);
    Ok((
        worst <= 1e-6 && decreasing,
        format!(
            "conjugation max relative deviation {worst:.2e}; full-chain final deficits {:.4e}, {:.4e}, {:.4e} for alpha = 2, 3, 4",
            deficits[0], deficits[1], deficits[2]
        ),
    ))
}

fn random_state(dim: usize, rng: &mut impl Rng) -> Result<PureState, mech_sim_core::Error> {
    let v = nalgebra::DVector::from_fn(dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    PureState::normalized(v)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let space = ModeSpace::new(5, 4)?;
    let lad = JointLadder::new(space)?;

    // evolution invariants
    let mut norm_drift = 0.0_f64;
    let mut trace_drift = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    for _ in 0..5 {
        let rates = FrameRates::new(1.0, rng.gen_range(0.5..2.0), rng.gen_range(-0.3..0.3), 0.0)?;
        let h = build_h_mo(&rates, &space)?;
        let psi = random_state(space.joint_dim(), &mut rng)?;
        let grid = TimeGrid::new(0.0, 3.0, 15)?;
        let u = evolve_unitary(&h, &psi, &grid, "H_MO")?;
        norm_drift = norm_drift.max(u.diagnostics.max_norm_drift);
        let l = evolve_lindblad(&h, &lad.a, &psi.density_matrix(), 0.3, &grid, 200, "lindblad")?;
        trace_drift = trace_drift.max(l.diagnostics.max_norm_drift);
        min_eig = min_eig.min(l.diagnostics.min_eigenvalue.unwrap_or(f64::INFINITY));
    }
    let invariants = norm_drift <= 1e-12 && trace_drift <= 1e-9 && min_eig >= -1e-8;

    // dual construction of E_1
    let mut e1_dev = 0.0_f64;
    for _ in 0..4 {
        let rates = FrameRates::new(
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.5..2.5),
            rng.gen_range(0.01..0.2),
            0.0,
        )?;
        let t = rng.gen_range(0.5..6.0);
        let e1 = e1_operator(&rates, &CouplingSchedule::Constant(rates.g0), t, &space)?;
        e1_dev = e1_dev.max(e1.relative_deviation());
    }

    // closed forms of F_±± against quadrature
    let rates = FrameRates::new(0.7, 1.9, 0.08, 0.0)?;
    let mut mismatch = 0.0_f64;
    let mut ratios = [0.0; 4];
    for &t in &[0.5, 2.0, 5.0, 11.0] {
        let rep = f_pm_functions(&rates, t)?;
        mismatch = mismatch.max(rep.scaled_mismatch(PRINTED_RATIO_SIGNS));
        ratios = rep.ratios;
    }

    // pure cavity decay
    let kappa = 0.25;
    let decay_space = ModeSpace::new(3, 2)?;
    let decay_lad = JointLadder::new(decay_space)?;
    let rho0 = PureState::fock(&decay_space, 1, 0)?.density_matrix();
    let grid = TimeGrid::new(0.0, 4.0, 40)?;
    let zero = Operator::zeros(decay_space.joint_dim(), SpaceTag::Joint);
    let res = evolve_lindblad(&zero, &decay_lad.a, &rho0, kappa, &grid, 20, "decay")?;
    let mut decay_err = 0.0_f64;
    for (rho, &t) in res.states.iter().zip(grid.times()) {
        let n = rho.expectation(&decay_lad.n_a).re;
        let expected = (-2.0 * kappa * t).exp();
        decay_err = decay_err.max((n / expected - 1.0).abs());
    }

    let pass = invariants && e1_dev <= 1e-9 && mismatch <= 1e-9 && decay_err <= 1e-6;
    Ok((
        pass,
        format!(
            "norm drift {norm_drift:.1e}, trace drift {trace_drift:.1e}, min eig {min_eig:.1e}; E1 dual {e1_dev:.1e}; F_pm ratios [{:.5}, {:.5}, {:.5}, {:.5}] vs g0/(2 Omega_m) = {:.5}, mismatch {mismatch:.1e}; decay err {decay_err:.1e}",
            ratios[0], ratios[1], ratios[2], ratios[3], rates.g0 / (2.0 * rates.omega_m)
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("cQED cat-state fidelity", criterion_1),
        ("cQED cat-state negativity", criterion_2),
        ("vacuum fidelity law", criterion_3),
        ("propagator factorization", criterion_4),
        ("mechano-optical spectrum", criterion_5),
        ("frame numbers", criterion_6),
        ("conjugation theorem", criterion_7),
        ("property suites", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name}: {detail} ({:.1}s)",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria fail");
        ExitCode::FAILURE
    }
}
