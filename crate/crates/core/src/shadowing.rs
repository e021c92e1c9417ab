//! Pseudo-orbit validation and finite-horizon Besicovitch pseudometrics.
//!
//! Every limsup in the underlying definitions is replaced by the average (or
//! density) over a fixed horizon `0..N`. The estimates carry that horizon and
//! make no convergence claim.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::*;
use crate::system::{pi_tail_bound, pi_truncated_at, FiniteMetricSystem, FiniteTrajectory};
use crate::{ge_tol, lt_tol, TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoOrbitKind {
    DeltaChain,
    DeltaAverage,
    AsymptoticAverage,
}

/// Which pseudo-orbit condition to check.
pub enum PseudoOrbitCheck<'a> {
    /// Every step error `ρ(T(x_j), x_{j+1})` is below `delta`.
    Chain { delta: f64 },
    /// Every window of `n ≥ min_window` consecutive step errors averages below `delta`.
    Average { delta: f64, min_window: usize },
    /// Prefix averages over `n = len/2 ..= len` steps stay below `schedule(n)`.
    AsymptoticAverage { schedule: &'a dyn Fn(usize) -> f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Passed,
    /// Finite-horizon proxy for a limit condition; never a proof.
    ConsistentAtHorizon,
    Failed,
}

/// First violating window of step errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub start: usize,
    pub length: usize,
    pub average: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbitReport {
    pub kind: PseudoOrbitKind,
    pub parameter: f64,
    /// Number of steps examined.
    pub horizon: usize,
    pub status: ValidationStatus,
    pub witness: Option<Witness>,
}

impl PseudoOrbitReport {
    pub fn passed(&self) -> bool {
        self.status != ValidationStatus::Failed
    }
}

/// Step errors `ρ(T(x_j), x_{j+1})` for consecutive entries.
pub fn step_errors(seq: &FiniteTrajectory, sys: &FiniteMetricSystem) -> Vec<f64> {
    seq.entries().windows(2).map(|w| sys.dist(sys.image(w[0]), w[1])).collect()
}

pub fn validate_pseudo_orbit(
    seq: &FiniteTrajectory,
    sys: &FiniteMetricSystem,
    check: &PseudoOrbitCheck<'_>,
) -> Result<PseudoOrbitReport> {
    seq.validate_for(sys)?;
    let errs = step_errors(seq, sys);
    let steps = errs.len();
    if steps == 0 {
        return Err(Error::BadHorizon("need at least two entries".into()));
    }
    let mut prefix = Vec::with_capacity(steps + 1);
    prefix.push(0.0);
    for e in &errs {
        prefix.push(prefix.last().unwrap() + e);
    }
    let avg = |start: usize, len: usize| (prefix[start + len] - prefix[start]) / len as f64;

    let (kind, parameter, witness, ok_status) = match *check {
        PseudoOrbitCheck::Chain { delta } => {
            let w = errs
                .iter()
                .position(|&e| !lt_tol(e, delta))
                .map(|start| Witness { start, length: 1, average: errs[start] });
            (PseudoOrbitKind::DeltaChain, delta, w, ValidationStatus::Passed)
        }
        PseudoOrbitCheck::Average { delta, min_window } => {
            if min_window == 0 || min_window > steps {
                return Err(Error::BadHorizon(format!(
                    "window length {min_window} not in 1..={steps}"
                )));
            }
            let w = (min_window..=steps).find_map(|len| {
                (0..=steps - len)
                    .find(|&start| !lt_tol(avg(start, len), delta))
                    .map(|start| Witness { start, length: len, average: avg(start, len) })
            });
            (PseudoOrbitKind::DeltaAverage, delta, w, ValidationStatus::Passed)
        }
        PseudoOrbitCheck::AsymptoticAverage { schedule } => {
            if steps < 2 {
                return Err(Error::BadHorizon("need at least two steps".into()));
            }
            let w = (steps.div_ceil(2)..=steps)
                .find(|&len| !lt_tol(avg(0, len), schedule(len)))
                .map(|len| Witness { start: 0, length: len, average: avg(0, len) });
            (
                PseudoOrbitKind::AsymptoticAverage,
                schedule(steps),
                w,
                ValidationStatus::ConsistentAtHorizon,
            )
        }
    };
    Ok(PseudoOrbitReport {
        kind,
        parameter,
        horizon: steps,
        status: if witness.is_some() { ValidationStatus::Failed } else { ok_status },
        witness,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesicovitchVariant {
    RhoB,
    PiB,
    HatRho,
    HatPi,
}

/// Fixed-horizon estimate of a Besicovitch-type pseudometric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesicovitchEstimate {
    pub value: f64,
    pub horizon: usize,
    pub variant: BesicovitchVariant,
    /// Truncation error from evaluating π on a finite window; zero for the
    /// coordinatewise variants.
    pub error_bar: f64,
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        Err(Error::BadHorizon("horizon must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn rho_terms(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_horizon(horizon)?;
    let last = horizon as i64 - 1;
    x.require(0, last)?;
    y.require(0, last)?;
    Ok((0..=last).map(|k| sys.dist(x.get(k).unwrap(), y.get(k).unwrap())).collect())
}

/// `π(S^j x, S^j y)` for `j < horizon`, inexact terms replaced by their tail bound.
fn pi_terms(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
    radius: usize,
) -> Result<Vec<f64>> {
    check_horizon(horizon)?;
    let r = radius as i64;
    let last = horizon as i64 - 1;
    x.require(-r, last + r)?;
    y.require(-r, last + r)?;
    (0..=last)
        .map(|j| pi_truncated_at(sys, x, y, j, radius).map(|p| p.value))
        .collect()
}

/// `(1/N) Σ_{j<N} ρ(x_j, y_j)`.
pub fn besicovitch_rho(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
) -> Result<BesicovitchEstimate> {
    let terms = rho_terms(sys, x, y, horizon)?;
    Ok(BesicovitchEstimate {
        value: terms.iter().sum::<f64>() / horizon as f64,
        horizon,
        variant: BesicovitchVariant::RhoB,
        error_bar: 0.0,
    })
}

/// `(1/N) Σ_{j<N} π(S^j x, S^j y)` with π truncated at `radius`. Inexact terms
/// contribute their upper bound, so the true average lies within
/// `[value − 1/(K+2), value]`.
pub fn besicovitch_pi(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
    radius: usize,
) -> Result<BesicovitchEstimate> {
    let terms = pi_terms(sys, x, y, horizon, radius)?;
    Ok(BesicovitchEstimate {
        value: terms.iter().sum::<f64>() / horizon as f64,
        horizon,
        variant: BesicovitchVariant::PiB,
        error_bar: pi_tail_bound(radius),
    })
}

/// `inf{δ > 0 : #{k < N : d_k ≥ δ} / N < δ}`, clamped to `[0, 1]`.
///
/// On `(d_(j+1), d_(j)]` (order statistics, descending) the exceedance
/// density is exactly `j/N`, so the infimum is the least admissible
/// `max(d_(j+1), j/N)` over all `j`.
pub(crate) fn density_infimum(mut d: Vec<f64>) -> f64 {
    let n = d.len();
    d.sort_by(|a, b| b.total_cmp(a));
    let mut best = f64::INFINITY;
    for j in 0..=n {
        let upper = if j == 0 { f64::INFINITY } else { d[j - 1] };
        let lower = if j == n { 0.0 } else { d[j] };
        if lower >= upper {
            continue;
        }
        let cand = lower.max(j as f64 / n as f64);
        if cand < upper {
            best = best.min(cand);
        }
    }
    best.clamp(0.0, 1.0)
}

/// Finite-horizon `inf{δ > 0 : d̄({k : ρ(x_k, y_k) ≥ δ}) < δ}`.
pub fn hat_rho(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
) -> Result<BesicovitchEstimate> {
    let terms = rho_terms(sys, x, y, horizon)?;
    Ok(BesicovitchEstimate {
        value: density_infimum(terms),
        horizon,
        variant: BesicovitchVariant::HatRho,
        error_bar: 0.0,
    })
}

/// Finite-horizon `inf{δ > 0 : d̄({k : π(S^k x, S^k y) ≥ δ}) < δ}`.
pub fn hat_pi(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
    radius: usize,
) -> Result<BesicovitchEstimate> {
    let terms = pi_terms(sys, x, y, horizon, radius)?;
    Ok(BesicovitchEstimate {
        value: density_infimum(terms),
        horizon,
        variant: BesicovitchVariant::HatPi,
        error_bar: pi_tail_bound(radius),
    })
}

/// Counts behind the comparison of the coordinatewise and dynamical hat
/// pseudometrics at threshold `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub delta: f64,
    /// Largest integer `≤ 1/δ − 1`.
    pub n_delta: usize,
    /// `δ / (2 N_δ + 1)`.
    pub delta_prime: f64,
    /// `#{k < N : π(S^k x, S^k y) ≥ δ}`.
    pub pi_exceedances: usize,
    /// `#{n ∈ [−N_δ, N−1+N_δ] : ρ(x_n, y_n) ≥ δ′}`.
    pub rho_exceedances_prime: usize,
    /// `#{k < N : ρ(x_k, y_k) ≥ δ}`.
    pub rho_exceedances: usize,
    /// `pi_exceedances ≤ (2 N_δ + 1) · rho_exceedances_prime`.
    pub upper_holds: bool,
    /// `pi_exceedances ≥ rho_exceedances`.
    pub lower_holds: bool,
}

impl EquivalenceCheck {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds
    }
}

/// Largest integer dominated by `1/δ − 1`.
pub fn n_delta(delta: f64) -> usize {
    ((1.0 / delta - 1.0) + TOL).floor().max(0.0) as usize
}

/// Checks the counting step relating π-exceedances to ρ-exceedances.
///
/// `π(S^k x, S^k y) ≥ δ` forces some `n` with `|n − k| ≤ N_δ` and
/// `ρ(x_n, y_n) ≥ δ ≥ δ′`, so each ρ-exceedance accounts for at most
/// `2 N_δ + 1` π-exceedances. Conversely `π(S^k x, S^k y) ≥ ρ(x_k, y_k)`.
pub fn equivalence_bound_check(
    sys: &FiniteMetricSystem,
    x: &FiniteTrajectory,
    y: &FiniteTrajectory,
    horizon: usize,
    delta: f64,
) -> Result<EquivalenceCheck> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    check_horizon(horizon)?;
    let nd = n_delta(delta);
    let r = nd as i64;
    let last = horizon as i64 - 1;
    x.require(-r, last + r)?;
    y.require(-r, last + r)?;
    let delta_prime = delta / (2 * nd + 1) as f64;
    let rho = |k: i64| sys.dist(x.get(k).unwrap(), y.get(k).unwrap());

    let mut pi_exceedances = 0;
    for k in 0..=last {
        // radius N_δ decides π ≥ δ exactly: its tail bound 1/(N_δ+2) is below δ
        if ge_tol(pi_truncated_at(sys, x, y, k, nd)?.value, delta) {
            pi_exceedances += 1;
        }
    }
    let rho_exceedances_prime = (-r..=last + r).filter(|&n| ge_tol(rho(n), delta_prime)).count();
    let rho_exceedances = (0..=last).filter(|&k| ge_tol(rho(k), delta)).count();
    Ok(EquivalenceCheck {
        delta,
        n_delta: nd,
        delta_prime,
        pi_exceedances,
        rho_exceedances_prime,
        rho_exceedances,
        upper_holds: pi_exceedances <= (2 * nd + 1) * rho_exceedances_prime,
        lower_holds: pi_exceedances >= rho_exceedances,
    })
}

/// Brute-force best tracer: the `z` minimising `(1/N) Σ_{j<N} ρ(T^j(z), p_j)`,
/// lowest id on ties.
pub fn best_average_tracer(
    p: &FiniteTrajectory,
    sys: &FiniteMetricSystem,
    horizon: usize,
) -> Result<(usize, f64)> {
    check_horizon(horizon)?;
    p.require(0, horizon as i64 - 1)?;
    p.validate_for(sys)?;
    let target = &p.entries()[(0 - p.origin()) as usize..][..horizon];
    let averages: Vec<f64> = (0..sys.len())
        .into_par_iter()
        .map(|z| {
            let mut u = z;
            let mut total = 0.0;
            for &pj in target {
                total += sys.dist(u, pj);
                u = sys.image(u);
            }
            total / horizon as f64
        })
        .collect();
    let mut best = (0, averages[0]);
    for (z, &a) in averages.iter().enumerate().skip(1) {
        if a < best.1 {
            best = (z, a);
        }
    }
    Ok(best)
}
