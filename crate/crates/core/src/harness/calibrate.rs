//! Calibration of the theorems' existential constants: pick the smallest C
//! from a geometric grid achieving two-thirds success at a reference cell,
//! then freeze it for the whole sweep.

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::median::RegularityProfile;
use crate::moments::{required_n_amplified, required_n_const};

use super::config::AdversaryKind;
use super::{build_instances, gamma_for, run_trials, TestKind};

pub const C_GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Stream-path prefix reserved for calibration trials.
pub const CALIBRATION_STREAM: u64 = 5;

/// Sample size for the regularity route: ⌈C·(d + ln(1/δ))/(cr − ε)²⌉.
pub fn required_n_regularity(
    profile: &RegularityProfile,
    epsilon: f64,
    d: usize,
    delta: f64,
    c: f64,
) -> Result<usize> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter("delta must lie in (0,1)".into()));
    }
    let cr = profile.c * profile.r;
    if !(epsilon >= 0.0 && epsilon < cr) {
        return Err(Error::InfeasibleRegime(format!(
            "epsilon = {epsilon} must lie below c*r = {cr}"
        )));
    }
    let margin = cr - epsilon;
    let n = c * (d as f64 + (1.0 / delta).ln()) / (margin * margin);
    Ok(n.ceil().max(2.0) as usize)
}

/// Sample size for `kind` at one cell, given the calibrated constant.
pub fn required_n_for(
    kind: TestKind,
    template: &DistributionSpec,
    profile: Option<&RegularityProfile>,
    d: usize,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    c: f64,
) -> Result<usize> {
    match kind {
        TestKind::Const => {
            let spec = super::instantiate_family(template, d, alpha)?;
            let gamma = gamma_for(&spec, epsilon)?;
            required_n_const(spec.cov_opnorm()?, d, alpha, gamma, c)
        }
        TestKind::Amplified { delta: amp_delta } => {
            let spec = super::instantiate_family(template, d, alpha)?;
            let gamma = gamma_for(&spec, epsilon)?;
            required_n_amplified(spec.cov_opnorm()?, d, alpha, gamma, amp_delta, c)
        }
        TestKind::Regularity { .. } => {
            let profile = profile.ok_or_else(|| {
                Error::InvalidParameter("regularity calibration needs a profile".into())
            })?;
            required_n_regularity(profile, epsilon, d, delta, c)
        }
    }
}

/// The chosen constant and the reference-cell evidence behind it.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationOutcome {
    pub c: f64,
    pub n_reference: usize,
    pub h0_reject_rate: f64,
    pub h1_reject_rate: f64,
}

/// Smallest C in the geometric grid for which both error rates at the
/// reference cell `(d, alpha, epsilon)` stay at or below 1/3.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_c(
    kind: TestKind,
    template: &DistributionSpec,
    adversary: &AdversaryKind,
    profile: Option<&RegularityProfile>,
    d: usize,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    trials: usize,
    master: u64,
) -> Result<CalibrationOutcome> {
    let (h0, h1) = build_instances(template, adversary, d, alpha, epsilon)?;
    for (ci, &c) in C_GRID.iter().enumerate() {
        let n = match required_n_for(kind, template, profile, d, alpha, epsilon, delta, c) {
            Ok(n) => n,
            Err(Error::InfeasibleRegime(msg)) => {
                return Err(Error::InfeasibleRegime(format!(
                    "calibration reference cell is infeasible: {msg}"
                )))
            }
            Err(e) => return Err(e),
        };
        let path_h0 = [CALIBRATION_STREAM, ci as u64, 0];
        let path_h1 = [CALIBRATION_STREAM, ci as u64, 1];
        let s0 = run_trials(kind, &h0, alpha, n, trials, master, &path_h0)?;
        let s1 = run_trials(kind, &h1, alpha, n, trials, master, &path_h1)?;
        if s0.rate() <= 1.0 / 3.0 && s1.rate() >= 2.0 / 3.0 {
            return Ok(CalibrationOutcome {
                c,
                n_reference: n,
                h0_reject_rate: s0.rate(),
                h1_reject_rate: s1.rate(),
            });
        }
    }
    Err(Error::Config(format!(
        "no constant in {C_GRID:?} achieves 2/3 success at the reference cell \
         (d={d}, alpha={alpha}, epsilon={epsilon})"
    )))
}
