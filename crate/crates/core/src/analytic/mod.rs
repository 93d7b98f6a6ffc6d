//! Closed-form results and their numerical cross-checks: the factored
//! propagator of the mechano-optical Hamiltonian, the second-order fidelity
//! functions, and the mechano-optical spectrum.

pub mod factorization;
pub mod fidelity;
pub mod spectrum;

pub use crate::model::FrameRates;
pub use factorization::{
    conjugation_identities_check, f_coefficients, factored_propagator, factorization_check,
    random_low_state, FCoefficients, FactorizationReport, IdentityReport, LieGenerators,
};
pub use fidelity::{
    e1_operator, f_pm_functions, f_pm_printed, f_pm_quadrature, f_uni, f_uni_from_f_pm,
    f_uni_printed, perturbative_fidelity, sinc, E1Dual, FPm, FPmReport, PRINTED_RATIO_SIGNS,
};
pub use spectrum::{
    anharmonic_cure_check, eigenstate, instability_threshold, spectrum_check, spectrum_table,
    spectrum_value, CureReport, SpectrumEntry, SpectrumReport, SpectrumRow,
};
