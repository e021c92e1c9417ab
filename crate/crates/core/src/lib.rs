//! Desk-scale approximation of a finite-alphabet dynamical system by its
//! δ-chain subshifts.
//!
//! A [`FiniteMetricSystem`] stands in for a compact metric space with a
//! continuous self-map. From it the crate builds the chain graphs whose
//! biinfinite walks form the chain subshifts, certifies chain mixing and the
//! mixing constant, glues spaced orbit segments into periodic chains that trace
//! them, and measures distances between sequences (Besicovitch pseudometrics)
//! and between invariant measures (W1, ρ̄ via joinings, a truncated cylinder
//! proxy for the weak* topology, and their Hausdorff-ification over sets).
//!
//! Quantities defined through limits over infinitely many coordinates are only
//! ever exposed as finite-horizon estimates that carry their horizon or an
//! explicit error bar.

pub mod chain;
pub mod error;
pub mod io;
pub mod measures;
pub mod par;
pub mod pipeline;
pub mod shadowing;
pub mod specification;
pub mod system;

pub use chain::{
    build_chain_graph, chain_family, finite_chain, is_delta_chain, mixing_certificate,
    ChainFamily, ChainGraph, MixingCertificate,
};
pub use error::{Error, Result};
pub use measures::{
    empirical_measure, ergodic_measures_of_graph, hausdorff_distance, pi_bar_periodic,
    rho_bar_markov_upper, rho_bar_periodic, sigmund_approximation, w1_distance, weakstar_proxy,
    CouplingResult, CylinderDistributions, ErgodicSet, FiniteMeasure, MarkovMeasure,
    MixtureMeasure, PeriodicOrbitMeasure,
};
pub use shadowing::{
    besicovitch_pi, besicovitch_rho, best_average_tracer, equivalence_bound_check, hat_pi,
    hat_rho, validate_pseudo_orbit, BesicovitchEstimate, PseudoOrbitCheck, PseudoOrbitReport,
};
pub use specification::{
    spacing_constant, trace_specification, verify_trace, PeriodicChain, SpacedSpecification,
    TraceReport,
};
pub use system::{
    normalize_metric, pi_distance, product_system, surjective_core, window_check,
    DistanceMatrix, FiniteMetricSystem, FiniteTrajectory, IntervalSegment, PiDistance,
};

/// Absolute tolerance for every comparison of a distance against a threshold.
pub const TOL: f64 = 1e-12;

/// `a ≤ b` up to [`TOL`].
#[inline]
pub fn le_tol(a: f64, b: f64) -> bool {
    a <= b + TOL
}

/// `a ≥ b` up to [`TOL`].
#[inline]
pub fn ge_tol(a: f64, b: f64) -> bool {
    a >= b - TOL
}

/// Strict `a < b`, the complement of [`ge_tol`].
#[inline]
pub fn lt_tol(a: f64, b: f64) -> bool {
    !ge_tol(a, b)
}
