//! Exact spectrum of the mechano-optical Hamiltonian, its instability
//! threshold, and the quartic cure.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::fock::{self, ModeSpace, PureState};
use crate::linalg::{CVector, HermitianEigen};
use crate::model::{build_h_mo, build_h_mo_anharmonic, FrameRates};
use crate::{Error, Result};

const EDGE_WEIGHT_TOL: f64 = 1e-12;
const EDGE_LEAK_TOL: f64 = 1e-10;

/// `λ_{n,l} = nΩ_c + lΩ_m - l²g_0²/Ω_c`.
pub fn spectrum_value(rates: &FrameRates, n: usize, l: usize) -> f64 {
    let (n, l) = (n as f64, l as f64);
    let shift = if rates.g0 == 0.0 {
        0.0
    } else {
        l * l * rates.g0 * rates.g0 / rates.omega_c
    };
    n * rates.omega_c + l * rates.omega_m - shift
}

/// `l_max = Ω_m Ω_c / g_0²`, infinite when `g_0 = 0`.
pub fn instability_threshold(rates: &FrameRates) -> f64 {
    if rates.g0 == 0.0 {
        f64::INFINITY
    } else {
        rates.omega_m * rates.omega_c / (rates.g0 * rates.g0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumEntry {
    pub n: usize,
    pub l: usize,
    pub lambda: f64,
    /// `l ≥ l_max`.
    pub is_unstable: bool,
}

/// All `λ_{n,l}` with `n ≤ n_max`, `l ≤ l_max`, ordered by `n` then `l`.
pub fn spectrum_table(rates: &FrameRates, n_max: usize, l_max: usize) -> Vec<SpectrumEntry> {
    let threshold = instability_threshold(rates);
    let mut out = Vec::with_capacity((n_max + 1) * (l_max + 1));
    for n in 0..=n_max {
        for l in 0..=l_max {
            out.push(SpectrumEntry {
                n,
                l,
                lambda: spectrum_value(rates, n, l),
                is_unstable: l as f64 >= threshold,
            });
        }
    }
    out
}

fn displaced_column(rates: &FrameRates, n: usize, l: usize, n_a: usize) -> Result<CVector> {
    if rates.omega_c == 0.0 && rates.g0 != 0.0 {
        return Err(Error::param("omega_c", "eigenstates need a nonzero cavity rate"));
    }
    let beta = if rates.g0 == 0.0 {
        0.0
    } else {
        -(l as f64) * rates.g0 / rates.omega_c
    };
    let d = fock::displacement_elements(Complex64::new(beta, 0.0), n_a.max(n + 1));
    Ok(d.column(n).rows(0, n_a).into_owned())
}

/// `D^†(l g_0/Ω_c)|n⟩ ⊗ |l⟩`, with the mode-`a` amplitudes taken from the
/// untruncated displacement and renormalized in the box.
pub fn eigenstate(rates: &FrameRates, n: usize, l: usize, space: &ModeSpace) -> Result<PureState> {
    if l >= space.n_b {
        return Err(Error::param("l", "exceeds the mechanical truncation"));
    }
    let col = displaced_column(rates, n, l, space.n_a)?;
    let mut v = CVector::zeros(space.joint_dim());
    for j in 0..space.n_a {
        v[space.index(j, l)] = col[j];
    }
    PureState::normalized(v)
}

/// Weight of the untruncated eigenstate outside the lowest
/// `n_a - edge` cavity levels.
fn edge_weight(rates: &FrameRates, n: usize, l: usize, n_a: usize, edge: usize) -> Result<f64> {
    let inner = n_a.saturating_sub(edge);
    let col = displaced_column(rates, n, l, inner)?;
    Ok((1.0 - col.norm_squared()).max(0.0))
}

/// Norm that `g_0 (a + a^†) N_b` pushes past the top cavity level of the box
/// when acting on the eigenstate.
fn edge_leak(rates: &FrameRates, n: usize, l: usize, n_a: usize) -> Result<f64> {
    let col = displaced_column(rates, n, l, n_a)?;
    let top = col[n_a - 1].norm();
    Ok(rates.g0.abs() * l as f64 * libm::sqrt(n_a as f64) * top)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumRow {
    pub n: usize,
    pub l: usize,
    pub analytic: f64,
    /// Nearest unclaimed eigenvalue of the truncated matrix, when the
    /// displaced eigenstate fits the box.
    pub numeric: Option<f64>,
    pub abs_err: Option<f64>,
    pub is_unstable: bool,
    /// `‖H_MO|λ⟩ - λ|λ⟩‖` for the constructed eigenstate.
    pub eigen_residual: Option<f64>,
}

impl SpectrumRow {
    /// `abs_err / max(|λ|, |Ω_c|)`.
    pub fn rel_err(&self, omega_c: f64) -> Option<f64> {
        self.abs_err
            .map(|e| e / self.analytic.abs().max(omega_c.abs()).max(f64::MIN_POSITIVE))
    }

    /// Residual bound `1e-6·|λ| + 1e-8·|Ω_c|`.
    pub fn residual_within_bound(&self, omega_c: f64) -> bool {
        self.eigen_residual
            .map_or(true, |r| r <= 1e-6 * self.analytic.abs() + 1e-8 * omega_c.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
    pub max_rel_err: f64,
    pub max_residual: f64,
    pub checked: usize,
}

/// Analytic spectrum compared with a full diagonalization of the truncated
/// `H_MO`. Rows whose displaced eigenstate leaks past the interior block are
/// reported without a numeric partner.
pub fn spectrum_check(
    rates: &FrameRates,
    n_max: usize,
    l_max: usize,
    space: &ModeSpace,
) -> Result<SpectrumReport> {
    let h = build_h_mo(rates, space)?;
    let eig = HermitianEigen::new(h.matrix())?;
    let numeric = eig.sorted_values();
    let mut claimed = alloc::vec![false; numeric.len()];

    let mut rows = Vec::new();
    let mut max_rel_err = 0.0_f64;
    let mut max_residual = 0.0_f64;
    let mut checked = 0;
    for entry in spectrum_table(rates, n_max, l_max) {
        let fits = entry.l + fock::DEFAULT_EDGE < space.n_b
            && edge_weight(rates, entry.n, entry.l, space.n_a, fock::DEFAULT_EDGE)? < EDGE_WEIGHT_TOL
            && edge_leak(rates, entry.n, entry.l, space.n_a)? <= EDGE_LEAK_TOL * rates.omega_c.abs();
        let mut row = SpectrumRow {
            n: entry.n,
            l: entry.l,
            analytic: entry.lambda,
            numeric: None,
            abs_err: None,
            is_unstable: entry.is_unstable,
            eigen_residual: None,
        };
        if fits {
            let best = numeric
                .iter()
                .enumerate()
                .filter(|(k, _)| !claimed[*k])
                .min_by(|x, y| {
                    (x.1 - entry.lambda)
                        .abs()
                        .total_cmp(&(y.1 - entry.lambda).abs())
                });
            if let Some((k, &v)) = best {
                claimed[k] = true;
                row.numeric = Some(v);
                row.abs_err = Some((v - entry.lambda).abs());
            }
            let psi = eigenstate(rates, entry.n, entry.l, space)?;
            let hv = h.apply(&psi);
            let residual = (hv - psi.amplitudes() * Complex64::new(entry.lambda, 0.0)).norm();
            row.eigen_residual = Some(residual);
            max_residual = max_residual.max(residual);
            if let Some(e) = row.rel_err(rates.omega_c) {
                max_rel_err = max_rel_err.max(e);
            }
            checked += 1;
        }
        rows.push(row);
    }
    Ok(SpectrumReport {
        rows,
        max_rel_err,
        max_residual,
        checked,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CureReport {
    pub chi: f64,
    /// Smallest eigenvalue of the truncated `H_MO + χ N_b²`.
    pub min_numeric: f64,
    /// Smallest eigenvalue among eigenvectors with negligible weight on the
    /// top cavity levels.
    pub min_converged: f64,
    /// Smallest `λ_{n,l} + χl²` over the levels in the box.
    pub min_analytic: f64,
    pub converged_count: usize,
}

/// Diagonalizes `H_MO + χ(b^†b)²` and reports its minimum eigenvalue.
pub fn anharmonic_cure_check(rates: &FrameRates, chi: f64, space: &ModeSpace) -> Result<CureReport> {
    if !(chi >= 0.0) {
        return Err(Error::param("chi", "must be nonnegative"));
    }
    let h = build_h_mo_anharmonic(rates, chi, space)?;
    let eig = HermitianEigen::new(h.matrix())?;
    let inner = space.n_a.saturating_sub(fock::DEFAULT_EDGE);
    let mut min_numeric = f64::INFINITY;
    let mut min_converged = f64::INFINITY;
    let mut converged_count = 0;
    for (k, &value) in eig.values.iter().enumerate() {
        min_numeric = min_numeric.min(value);
        let v = eig.vectors.column(k);
        let mut edge = 0.0;
        for j in inner..space.n_a {
            for l in 0..space.n_b {
                edge += v[space.index(j, l)].norm_sqr();
            }
        }
        if edge < EDGE_WEIGHT_TOL {
            converged_count += 1;
            min_converged = min_converged.min(value);
        }
    }
    let min_analytic = (0..space.n_b)
        .map(|l| spectrum_value(rates, 0, l) + chi * (l * l) as f64)
        .chain((0..space.n_a).map(|n| spectrum_value(rates, n, 0)))
        .fold(f64::INFINITY, f64::min);
    Ok(CureReport {
        chi,
        min_numeric,
        min_converged,
        min_analytic,
        converged_count,
    })
}
