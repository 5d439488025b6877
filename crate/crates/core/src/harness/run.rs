//! The sweep scenarios: power curves, the phase diagram, dimension scaling,
//! the bias frontier, and the impossibility demonstration.

use std::time::Instant;

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::median::{conservative_gaussian_profile, RegularityProfile};
use crate::truncation::halfspace_adversary;

use super::calibrate::{calibrate_c, required_n_for, CalibrationOutcome};
use super::config::{AdversaryKind, ExperimentConfig, Scenario};
use super::report::{wilson_interval, CellRow, ExperimentReport, RunManifest};
use super::{
    build_instances, family_label, gamma_for, moment_envelope, run_trials, TestKind, TrialStats,
};

/// Least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Run the configured scenario and collect the report.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let (calibration_c, rows) = match config.scenario {
        Scenario::PowerCurve => run_power_curve(config)?,
        Scenario::PhaseDiagram => run_phase_diagram(config)?,
        Scenario::Scaling => run_scaling(config)?,
        Scenario::BiasFrontier => (config.calibration_c.unwrap_or(1.0), run_bias_frontier(config)?),
        Scenario::ImpossibilityDemo => {
            (config.calibration_c.unwrap_or(1.0), run_impossibility_demo(config)?)
        }
    };
    Ok(ExperimentReport {
        manifest: RunManifest {
            scenario: config.scenario.name().into(),
            schema_version: config.schema_version,
            config_sha256: config.sha256(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            master_seed: config.master_seed,
            calibration_c,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
        rows,
    })
}

/// The reference cell for calibration: largest d, smallest ε, and the α with
/// the widest feasibility margin.
fn reference_cell(config: &ExperimentConfig) -> Result<(usize, f64, f64)> {
    let d = *config.grid.d.iter().max().unwrap();
    let eps = config.grid.epsilon.iter().copied().fold(f64::INFINITY, f64::min);
    let mut best: Option<(f64, f64)> = None;
    for &alpha in &config.grid.alpha {
        let spec = super::instantiate_family(&config.distribution, d, alpha)?;
        let gamma = gamma_for(&spec, eps)?;
        let margin = alpha - 2.0 * gamma;
        if margin > 0.0 && best.map_or(true, |(m, _)| margin > m) {
            best = Some((margin, alpha));
        }
    }
    let (_, alpha) = best.ok_or_else(|| {
        Error::InfeasibleRegime("every grid alpha sits at or below the detectability floor".into())
    })?;
    Ok((d, eps, alpha))
}

fn resolve_c(
    config: &ExperimentConfig,
    kind: TestKind,
    profile: Option<&RegularityProfile>,
) -> Result<f64> {
    if let Some(c) = config.calibration_c {
        return Ok(c);
    }
    let (d, eps, alpha) = reference_cell(config)?;
    let trials = config.trials.clamp(100, 400);
    let out: CalibrationOutcome = calibrate_c(
        kind,
        &config.distribution,
        &config.adversary,
        profile,
        d,
        alpha,
        eps,
        config.delta,
        trials,
        config.master_seed,
    )?;
    Ok(out.c)
}

struct ArmRates {
    h0: TrialStats,
    h1: TrialStats,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    config: &ExperimentConfig,
    kind: TestKind,
    d: usize,
    alpha: f64,
    epsilon: f64,
    n: usize,
    cell: usize,
    test_idx: u64,
) -> Result<ArmRates> {
    let (h0, h1) = build_instances(&config.distribution, &config.adversary, d, alpha, epsilon)?;
    let sid = config.scenario.stream_id();
    let h0_stats = run_trials(
        kind,
        &h0,
        alpha,
        n,
        config.trials,
        config.master_seed,
        &[sid, cell as u64, test_idx, 0],
    )?;
    let h1_stats = run_trials(
        kind,
        &h1,
        alpha,
        n,
        config.trials,
        config.master_seed,
        &[sid, cell as u64, test_idx, 1],
    )?;
    Ok(ArmRates { h0: h0_stats, h1: h1_stats })
}

fn rate_row(
    base: CellRow,
    kind: TestKind,
    n: usize,
    trials: usize,
    rates: &ArmRates,
) -> CellRow {
    CellRow {
        test: kind.label().into(),
        n,
        trials,
        reject_rate_h0: Some(rates.h0.rate()),
        wilson_half_h0: Some(rates.h0.wilson_half()),
        mean_stat_h0: Some(rates.h0.mean_statistic),
        reject_rate_h1: Some(rates.h1.rate()),
        wilson_half_h1: Some(rates.h1.wilson_half()),
        mean_stat_h1: Some(rates.h1.mean_statistic),
        flag: "ok".into(),
        ..base
    }
}

fn base_row(config: &ExperimentConfig, cell: usize, d: usize, epsilon: f64, alpha: f64) -> CellRow {
    CellRow {
        cell,
        family: family_label(&config.distribution),
        adversary: config.adversary.name().into(),
        d,
        epsilon,
        alpha,
        ..Default::default()
    }
}

fn run_power_curve(config: &ExperimentConfig) -> Result<(f64, Vec<CellRow>)> {
    let c = resolve_c(config, TestKind::Const, None)?;
    let mut rows = Vec::new();
    let mut cell = 0usize;
    for &d in &config.grid.d {
        for &epsilon in &config.grid.epsilon {
            for &alpha in &config.grid.alpha {
                let spec = super::instantiate_family(&config.distribution, d, alpha)?;
                let gamma = gamma_for(&spec, epsilon)?;
                let base = CellRow {
                    gamma: Some(gamma),
                    ..base_row(config, cell, d, epsilon, alpha)
                };
                if alpha <= 2.0 * gamma {
                    // Below the detectability floor: emit flagged, untested.
                    for kind in [TestKind::Const, TestKind::Amplified { delta: config.delta }] {
                        rows.push(CellRow {
                            test: kind.label().into(),
                            flag: "infeasible".into(),
                            ..base.clone()
                        });
                    }
                    cell += 1;
                    continue;
                }
                for (ti, kind) in [TestKind::Const, TestKind::Amplified { delta: config.delta }]
                    .into_iter()
                    .enumerate()
                {
                    let n = if config.grid.n.is_empty() {
                        required_n_for(
                            kind,
                            &config.distribution,
                            None,
                            d,
                            alpha,
                            epsilon,
                            config.delta,
                            c,
                        )?
                    } else {
                        config.grid.n[0]
                    };
                    let rates = run_cell(config, kind, d, alpha, epsilon, n, cell, ti as u64)?;
                    rows.push(rate_row(base.clone(), kind, n, config.trials, &rates));
                }
                cell += 1;
            }
        }
    }
    Ok((c, rows))
}

fn is_gaussian(spec: &DistributionSpec) -> bool {
    matches!(
        spec,
        DistributionSpec::IsotropicGaussian { .. } | DistributionSpec::DiagonalGaussian { .. }
    )
}

/// Success with interval endpoints: both error rates confidently below chance.
fn interval_success(rates: &ArmRates) -> bool {
    let (_, h0_hi) = wilson_interval(rates.h0.rejections, rates.h0.trials);
    let (h1_lo, _) = wilson_interval(rates.h1.rejections, rates.h1.trials);
    h0_hi <= 0.45 && (1.0 - h1_lo) <= 0.45
}

fn run_phase_diagram(config: &ExperimentConfig) -> Result<(f64, Vec<CellRow>)> {
    let profile = is_gaussian(&config.distribution).then(conservative_gaussian_profile);
    let c_ustat = resolve_c(config, TestKind::Const, None)?;
    let reg_kind = TestKind::Regularity { net_size: 0, tolerance: 1e-6 };
    let c_reg = match &profile {
        Some(p) => resolve_c(config, reg_kind, Some(p)).unwrap_or(8.0),
        None => 1.0,
    };
    let mut rows = Vec::new();
    let mut cell = 0usize;
    for &d in &config.grid.d {
        let net_size = crate::median::default_net_size(d);
        let reg_kind = TestKind::Regularity { net_size, tolerance: 1e-6 };
        for &epsilon in &config.grid.epsilon {
            for &alpha in &config.grid.alpha {
                let spec = super::instantiate_family(&config.distribution, d, alpha)?;
                let gamma = gamma_for(&spec, epsilon)?;
                let base = CellRow {
                    gamma: Some(gamma),
                    ..base_row(config, cell, d, epsilon, alpha)
                };

                // Moment route.
                let ustat_feasible = alpha > 2.0 * gamma;
                let mut ustat_success = false;
                if ustat_feasible {
                    let n = required_n_for(
                        TestKind::Const,
                        &config.distribution,
                        None,
                        d,
                        alpha,
                        epsilon,
                        config.delta,
                        c_ustat,
                    )?;
                    let rates = run_cell(config, TestKind::Const, d, alpha, epsilon, n, cell, 0)?;
                    ustat_success = interval_success(&rates);
                    rows.push(rate_row(base.clone(), TestKind::Const, n, config.trials, &rates));
                } else {
                    rows.push(CellRow {
                        test: "ustat".into(),
                        flag: "infeasible".into(),
                        ..base.clone()
                    });
                }

                // Regularity route.
                let mut reg_success = false;
                let mut reg_feasible = false;
                match &profile {
                    Some(p) => {
                        reg_feasible = epsilon < (p.c * p.r).min(alpha / (8.0 * p.c));
                        if reg_feasible {
                            let n = required_n_for(
                                reg_kind,
                                &config.distribution,
                                Some(p),
                                d,
                                alpha,
                                epsilon,
                                config.delta,
                                c_reg,
                            )?;
                            let rates =
                                run_cell(config, reg_kind, d, alpha, epsilon, n, cell, 1)?;
                            reg_success = interval_success(&rates);
                            rows.push(rate_row(base.clone(), reg_kind, n, config.trials, &rates));
                        } else {
                            rows.push(CellRow {
                                test: "regularity".into(),
                                flag: "infeasible".into(),
                                ..base.clone()
                            });
                        }
                    }
                    None => rows.push(CellRow {
                        test: "regularity".into(),
                        flag: "no_profile".into(),
                        ..base.clone()
                    }),
                }

                let class = if ustat_feasible && ustat_success {
                    "testable"
                } else if reg_feasible && reg_success {
                    "learning-hard"
                } else {
                    "infeasible"
                };
                rows.push(CellRow {
                    test: "classification".into(),
                    flag: class.into(),
                    ..base
                });
                cell += 1;
            }
        }
    }
    Ok((c_ustat, rows))
}

const SCALING_N_CAP: usize = 1 << 16;

fn run_scaling(config: &ExperimentConfig) -> Result<(f64, Vec<CellRow>)> {
    let alpha = config.grid.alpha[0];
    let epsilon = config.grid.epsilon[0];
    let c = config.calibration_c.unwrap_or(1.0);
    let profile_needed = is_gaussian(&config.distribution);
    let mut rows = Vec::new();
    for (di, &d) in config.grid.d.iter().enumerate() {
        let kinds: Vec<TestKind> = if profile_needed {
            vec![
                TestKind::Const,
                TestKind::Regularity {
                    net_size: crate::median::default_net_size(d),
                    tolerance: 1e-6,
                },
            ]
        } else {
            vec![TestKind::Const]
        };
        for (ti, kind) in kinds.into_iter().enumerate() {
            let base = base_row(config, di, d, epsilon, alpha);
            match minimal_n(config, kind, d, alpha, epsilon, di as u64, ti as u64)? {
                Some(n_star) => rows.push(CellRow {
                    test: kind.label().into(),
                    trials: config.trials,
                    measured: Some(n_star as f64),
                    flag: "ok".into(),
                    ..base
                }),
                None => rows.push(CellRow {
                    test: kind.label().into(),
                    trials: config.trials,
                    flag: "bracket_failure".into(),
                    ..base
                }),
            }
        }
    }
    Ok((c, rows))
}

/// Smallest n (multiplicative resolution 1.1) at which both error rates fall
/// at or below 1/3 over `config.trials` probe trials.
fn minimal_n(
    config: &ExperimentConfig,
    kind: TestKind,
    d: usize,
    alpha: f64,
    epsilon: f64,
    d_idx: u64,
    test_idx: u64,
) -> Result<Option<usize>> {
    let (h0, h1) = build_instances(&config.distribution, &config.adversary, d, alpha, epsilon)?;
    let sid = config.scenario.stream_id();
    let probe = |n: usize| -> Result<bool> {
        let s0 = run_trials(
            kind,
            &h0,
            alpha,
            n,
            config.trials,
            config.master_seed,
            &[sid, d_idx, test_idx, n as u64, 0],
        )?;
        if s0.rate() > 1.0 / 3.0 {
            return Ok(false);
        }
        let s1 = run_trials(
            kind,
            &h1,
            alpha,
            n,
            config.trials,
            config.master_seed,
            &[sid, d_idx, test_idx, n as u64, 1],
        )?;
        Ok(s1.rate() >= 2.0 / 3.0)
    };

    let mut lo = 2usize;
    if probe(lo)? {
        return Ok(Some(lo));
    }
    let mut hi = 4usize;
    loop {
        if probe(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
        if hi > SCALING_N_CAP {
            return Ok(None);
        }
    }
    while hi as f64 / lo as f64 > 1.1 {
        let mid = ((lo as f64 * hi as f64).sqrt().round() as usize).clamp(lo + 1, hi - 1);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// The families of the frontier sweep, all one-dimensional with exact
/// truncated means and exact moment envelopes.
pub fn frontier_families() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::IsotropicGaussian { dimension: 1, mean: vec![0.0], scale: 1.0 },
        DistributionSpec::StudentT { dimension: 1, mean: vec![0.0], dof: 3.0, scale: 1.0 },
        DistributionSpec::StudentT { dimension: 1, mean: vec![0.0], dof: 4.0, scale: 1.0 },
        DistributionSpec::Pareto { dimension: 1, mean: vec![0.0], exponent: 3.0, scale: 1.0 },
    ]
}

fn run_bias_frontier(config: &ExperimentConfig) -> Result<Vec<CellRow>> {
    let mut rows = Vec::new();
    let mut cell = 0usize;
    for family in frontier_families() {
        for &epsilon in &config.grid.epsilon {
            let inst = halfspace_adversary(&family, epsilon, &[1.0])?;
            let shift = inst.exact_truncated_mean.as_ref().unwrap()[0].abs();
            let (_, envelope) = moment_envelope(&family, epsilon)?;
            rows.push(CellRow {
                cell,
                test: "shift".into(),
                family: family_label(&family),
                adversary: "halfspace".into(),
                d: 1,
                epsilon,
                alpha: 0.0,
                measured: Some(shift),
                bound: Some(envelope),
                flag: if shift <= envelope { "ok".into() } else { "violation".into() },
                ..Default::default()
            });
            cell += 1;
        }
    }
    Ok(rows)
}

fn run_impossibility_demo(config: &ExperimentConfig) -> Result<Vec<CellRow>> {
    let AdversaryKind::Impossibility { p } = config.adversary else {
        return Err(Error::Config(
            "impossibility-demo requires the impossibility adversary".into(),
        ));
    };
    if config.grid.n.is_empty() {
        return Err(Error::Config("impossibility-demo needs an explicit n grid".into()));
    }
    let epsilon = config.grid.epsilon[0];
    let alpha = epsilon.powf(1.0 - 1.0 / p);
    let mut rows = Vec::new();
    for (cell, &n) in config.grid.n.iter().enumerate() {
        let rates = run_cell(config, TestKind::Const, 1, alpha, epsilon, n, cell, 0)?;
        let diff = (rates.h0.rate() - rates.h1.rate()).abs();
        let halves = rates.h0.wilson_half() + rates.h1.wilson_half();
        let base = base_row(config, cell, 1, epsilon, alpha);
        let mut row = rate_row(base, TestKind::Const, n, config.trials, &rates);
        row.measured = Some(diff);
        row.bound = Some(halves);
        row.flag = if diff < halves { "indistinguishable".into() } else { "separated".into() };
        rows.push(row);
    }
    Ok(rows)
}
