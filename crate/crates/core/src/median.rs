//! Directional medians, the Chebyshev-center estimator, its recovery bound,
//! and the structural-regularity test.
//!
//! The estimator takes empirical medians m̂_v of the projections ⟨X_i, v⟩ over
//! a finite direction net and returns the point μ̂ minimizing
//! max_v |⟨μ̂, v⟩ − m̂_v|. The reference solve is a linear program; a
//! subgradient fallback with a documented schedule must agree with it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist::SampleBatch;
use crate::error::{Error, Result};
use crate::lp::chebyshev_center;
use crate::rng::StreamRng;
use crate::ustat::{Decision, TestVerdict, VerdictMeta};

const UNIT_TOL: f64 = 1e-10;

/// A finite net of unit directions, always containing the 2d signed axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionNet {
    directions: Vec<Vec<f64>>,
    pub construction: NetConstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetConstruction {
    AxesRandom,
    UserSupplied,
}

/// Default net size: the 2d axes plus enough random directions to matter.
pub fn default_net_size(d: usize) -> usize {
    (4 * d).max(64)
}

impl DirectionNet {
    /// The 2d signed coordinate axes plus `m − 2d` uniform random unit
    /// vectors, seed-controlled.
    pub fn axes_random(d: usize, m: usize, rng: &mut StreamRng) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if m < 2 * d {
            return Err(Error::InvalidParameter(format!(
                "net size {m} is below 2d = {}",
                2 * d
            )));
        }
        let mut directions = Vec::with_capacity(m);
        for k in 0..d {
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; d];
                v[k] = sign;
                directions.push(v);
            }
        }
        while directions.len() < m {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm: f64 = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|t| *t /= norm);
            directions.push(v);
        }
        Ok(DirectionNet { directions, construction: NetConstruction::AxesRandom })
    }

    /// A user-supplied net; must be unit vectors including all signed axes.
    pub fn user_supplied(directions: Vec<Vec<f64>>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidParameter("empty direction net".into()));
        }
        let d = directions[0].len();
        for v in &directions {
            if v.len() != d {
                return Err(Error::InvalidParameter("ragged direction net".into()));
            }
            let norm: f64 = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidParameter(format!(
                    "direction with norm {norm} is not unit"
                )));
            }
        }
        for k in 0..d {
            for sign in [1.0f64, -1.0] {
                let found = directions.iter().any(|v| {
                    v.iter().enumerate().all(|(i, &t)| {
                        if i == k {
                            (t - sign).abs() <= UNIT_TOL
                        } else {
                            t.abs() <= UNIT_TOL
                        }
                    })
                });
                if !found {
                    return Err(Error::InvalidParameter(format!(
                        "net is missing signed axis {}e_{k}",
                        if sign > 0.0 { "+" } else { "-" }
                    )));
                }
            }
        }
        Ok(DirectionNet { directions, construction: NetConstruction::UserSupplied })
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }
}

/// Density-floor regularity: every projection has median at the mean and
/// density at least `c` within radius `r` of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityProfile {
    pub c: f64,
    pub r: f64,
    pub provenance: ProfileProvenance,
    /// Set when the profile is exposed despite violating `c·r ≤ 1/2`.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileProvenance {
    ClosedForm,
    UserAsserted,
}

impl RegularityProfile {
    pub fn new(c: f64, r: f64, provenance: ProfileProvenance) -> Result<Self> {
        if !(c > 0.0 && r > 0.0 && c.is_finite() && r.is_finite()) {
            return Err(Error::InvalidParameter("c and r must be positive".into()));
        }
        if c * r > 0.5 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "c*r = {} exceeds 1/2; no one-dimensional law admits such a floor",
                c * r
            )));
        }
        Ok(RegularityProfile { c, r, provenance, warning: None })
    }
}

/// The literature constants for the standard normal, c = √(e/2π), r = 1.
/// As stated they violate `c·r ≤ 1/2` (and exceed the density at ±1), so the
/// profile carries a warning; prefer [`conservative_gaussian_profile`].
pub fn gaussian_profile() -> RegularityProfile {
    let c = (std::f64::consts::E / (2.0 * std::f64::consts::PI)).sqrt();
    RegularityProfile {
        c,
        r: 1.0,
        provenance: ProfileProvenance::ClosedForm,
        warning: Some(format!(
            "c*r = {c:.4} > 1/2 and c exceeds the normal density on [-1,1]; \
             constants kept as published, use the conservative profile for guarantees"
        )),
    }
}

/// A valid density floor for the standard normal: c = φ(1) ≈ 0.2420, r = 1.
pub fn conservative_gaussian_profile() -> RegularityProfile {
    let c = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    RegularityProfile {
        c,
        r: 1.0,
        provenance: ProfileProvenance::ClosedForm,
        warning: None,
    }
}

/// Empirical median of the projections ⟨X_i, v⟩; midpoint of the two central
/// order statistics for even n.
pub fn directional_median(batch: &SampleBatch, v: &[f64]) -> Result<f64> {
    if v.len() != batch.dim() {
        return Err(Error::InvalidParameter("direction/dimension mismatch".into()));
    }
    let mut proj: Vec<f64> = batch
        .rows()
        .map(|row| row.iter().zip(v).map(|(x, vi)| x * vi).sum())
        .collect();
    Ok(median_in_place(&mut proj))
}

pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 1);
    let mid = n / 2;
    let (_, &mut upper, _) =
        values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    if n % 2 == 1 {
        upper
    } else {
        // Largest entry below the partition point.
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

/// Empirical medians of all net projections.
pub fn net_medians(batch: &SampleBatch, net: &DirectionNet) -> Result<Vec<f64>> {
    net.directions()
        .iter()
        .map(|v| directional_median(batch, v))
        .collect()
}

fn objective(u: &[f64], directions: &[Vec<f64>], targets: &[f64]) -> f64 {
    directions
        .iter()
        .zip(targets)
        .map(|(v, &m)| (u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - m).abs())
        .fold(0.0, f64::max)
}

/// The Chebyshev-center estimate: μ̂ minimizing max_v |⟨u,v⟩ − m̂_v| over the
/// net, solved as a linear program. Returns `(μ̂, F(μ̂))`.
pub fn estimate_center(
    batch: &SampleBatch,
    net: &DirectionNet,
    tolerance: f64,
) -> Result<(Vec<f64>, f64)> {
    if net.dim() != batch.dim() {
        return Err(Error::InvalidParameter("net/batch dimension mismatch".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let targets = net_medians(batch, net)?;
    let (u, _) = chebyshev_center(net.directions(), &targets)?;
    // Report the objective as evaluated, not the LP's internal value.
    let obj = objective(&u, net.directions(), &targets);
    Ok((u, obj))
}

/// Subgradient fallback for the same objective: step `scale/√iter` along
/// −sign(residual)·v_{j*} for the worst direction j*, iteration cap 10⁴,
/// stopping when the best objective improves by less than `tolerance` over a
/// full window. Errors (carrying the best iterate) if the cap is hit while
/// still improving.
pub fn estimate_center_subgradient(
    batch: &SampleBatch,
    net: &DirectionNet,
    tolerance: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let targets = net_medians(batch, net)?;
    let d = net.dim();
    let dirs = net.directions();

    // Warm start from the per-axis medians.
    let mut u = vec![0.0; d];
    for (v, &m) in dirs.iter().zip(&targets) {
        if let Some(k) = (0..d).find(|&k| (v[k] - 1.0).abs() <= UNIT_TOL)
            .filter(|&k| v.iter().enumerate().all(|(i, t)| i == k || t.abs() <= UNIT_TOL))
        {
            u[k] = m;
        }
    }

    let mut best = u.clone();
    let mut best_obj = objective(&u, dirs, &targets);
    let scale = best_obj.max(tolerance);
    const CAP: usize = 10_000;
    const WINDOW: usize = 500;
    let mut window_best = best_obj;
    for iter in 1..=CAP {
        // Subgradient of the max at the worst direction.
        let mut worst = 0usize;
        let mut worst_res = 0.0f64;
        for (j, (v, &m)) in dirs.iter().zip(&targets).enumerate() {
            let res: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - m;
            if res.abs() > worst_res.abs() {
                worst = j;
                worst_res = res;
            }
        }
        if worst_res.abs() < best_obj {
            best_obj = worst_res.abs();
            best = u.clone();
        }
        let step = scale / (iter as f64).sqrt();
        let sign = worst_res.signum();
        for (uk, vk) in u.iter_mut().zip(&dirs[worst]) {
            *uk -= step * sign * vk;
        }
        if iter % WINDOW == 0 {
            if window_best - best_obj < tolerance {
                return Ok((best, best_obj));
            }
            window_best = best_obj;
        }
    }
    if window_best - best_obj < tolerance {
        Ok((best, best_obj))
    } else {
        Err(Error::Optimization { best, objective: best_obj })
    }
}

/// Recovery guarantee: `(2/c)(ε + C√((d + ln(1/δ))/n))`,
/// valid when ε < c·r and n exceeds `(d + ln(1/δ))/(cr − ε)²`.
pub fn recovery_bound(
    profile: &RegularityProfile,
    epsilon: f64,
    d: usize,
    delta: f64,
    n: usize,
    c_cal: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(c_cal > 0.0) {
        return Err(Error::InvalidParameter("calibration constant must be positive".into()));
    }
    let cr = profile.c * profile.r;
    if !(epsilon >= 0.0 && epsilon < cr) {
        return Err(Error::InfeasibleRegime(format!(
            "epsilon = {epsilon} must lie below c*r = {cr}"
        )));
    }
    let stat = (d as f64 + (1.0 / delta).ln()) / n as f64;
    if n == 0 || stat >= (cr - epsilon) * (cr - epsilon) {
        return Err(Error::InfeasibleRegime(format!(
            "n = {n} is below (d + ln(1/δ))/(cr − ε)² = {}",
            (d as f64 + (1.0 / delta).ln()) / ((cr - epsilon) * (cr - epsilon))
        )));
    }
    Ok(2.0 / profile.c * (epsilon + c_cal * stat.sqrt()))
}

/// Worst-case truncation-induced shift of any directional median: ε/c,
/// valid while ε < c·r.
pub fn median_stability_bound(epsilon: f64, profile: &RegularityProfile) -> Result<f64> {
    let cr = profile.c * profile.r;
    if !(epsilon >= 0.0 && epsilon < cr) {
        return Err(Error::InfeasibleRegime(format!(
            "epsilon = {epsilon} is outside the stable regime [0, c*r = {cr})"
        )));
    }
    Ok(epsilon / profile.c)
}

/// The regularity-route test: reject when ‖μ̂‖ > α/2.
pub fn regularity_test(
    batch: &SampleBatch,
    alpha: f64,
    net: &DirectionNet,
    tolerance: f64,
) -> Result<TestVerdict> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let (mu_hat, _) = estimate_center(batch, net, tolerance)?;
    let norm: f64 = mu_hat.iter().map(|t| t * t).sum::<f64>().sqrt();
    let threshold = alpha / 2.0;
    let decision = if norm > threshold {
        Decision::RejectNull
    } else {
        Decision::AcceptNull
    };
    Ok(TestVerdict {
        decision,
        statistic: norm,
        threshold,
        n_used: batch.n(),
        meta: VerdictMeta {
            alpha: Some(alpha),
            note: Some("regularity test 1{||mu_hat|| > alpha/2}".into()),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DistributionSpec;

    fn batch(rows: Vec<Vec<f64>>) -> SampleBatch {
        SampleBatch::from_rows(rows, vec![0]).unwrap()
    }

    #[test]
    fn median_conventions() {
        let b = batch(vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(directional_median(&b, &[1.0]).unwrap(), 2.0);

        let b = batch(vec![vec![4.0], vec![1.0], vec![3.0], vec![2.0]]);
        assert_eq!(directional_median(&b, &[1.0]).unwrap(), 2.5);

        // Symmetric batch about 5.
        let b = batch(vec![vec![4.0], vec![6.0], vec![5.0]]);
        assert_eq!(directional_median(&b, &[1.0]).unwrap(), 5.0);
    }

    #[test]
    fn net_contains_axes_and_unit_vectors() {
        let mut rng = StreamRng::from_master(3);
        let net = DirectionNet::axes_random(3, 12, &mut rng).unwrap();
        assert_eq!(net.len(), 12);
        for v in net.directions() {
            let norm: f64 = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        // user_supplied accepts the generated net back.
        assert!(DirectionNet::user_supplied(net.directions().to_vec()).is_ok());
        // ... and rejects a net missing an axis.
        let bad = vec![vec![1.0, 0.0, 0.0]];
        assert!(DirectionNet::user_supplied(bad).is_err());
    }

    #[test]
    fn estimate_center_1d_symmetric() {
        let b = batch(vec![vec![2.0], vec![3.0], vec![4.0]]);
        let net = DirectionNet::user_supplied(vec![vec![1.0], vec![-1.0]]).unwrap();
        let (mu, obj) = estimate_center(&b, &net, 1e-9).unwrap();
        assert!((mu[0] - 3.0).abs() < 1e-8);
        assert!(obj < 1e-8);
    }

    #[test]
    fn translation_equivariance() {
        let spec = DistributionSpec::IsotropicGaussian {
            dimension: 3,
            mean: vec![0.0; 3],
            scale: 1.0,
        };
        let b = spec.sample(201, &mut StreamRng::from_master(5)).unwrap();
        let net = DirectionNet::axes_random(3, 16, &mut StreamRng::from_master(6)).unwrap();
        let (mu0, _) = estimate_center(&b, &net, 1e-8).unwrap();
        let t = [1.0, -2.0, 0.5];
        let shifted: Vec<Vec<f64>> = b
            .rows()
            .map(|r| r.iter().zip(&t).map(|(x, ti)| x + ti).collect())
            .collect();
        let (mu1, _) = estimate_center(&batch(shifted), &net, 1e-8).unwrap();
        for k in 0..3 {
            assert!((mu1[k] - (mu0[k] + t[k])).abs() < 1e-6);
        }
    }

    #[test]
    fn argmin_beats_reference_points() {
        let spec = DistributionSpec::IsotropicGaussian {
            dimension: 2,
            mean: vec![1.0, -1.0],
            scale: 1.0,
        };
        let b = spec.sample(501, &mut StreamRng::from_master(9)).unwrap();
        let net = DirectionNet::axes_random(2, 32, &mut StreamRng::from_master(10)).unwrap();
        let targets = net_medians(&b, &net).unwrap();
        let (mu_hat, obj) = estimate_center(&b, &net, 1e-8).unwrap();
        assert!((objective(&mu_hat, net.directions(), &targets) - obj).abs() < 1e-9);
        let mut mean = vec![0.0; 2];
        for r in b.rows() {
            mean[0] += r[0] / b.n() as f64;
            mean[1] += r[1] / b.n() as f64;
        }
        for candidate in [vec![1.0, -1.0], vec![0.0, 0.0], mean] {
            assert!(obj <= objective(&candidate, net.directions(), &targets) + 1e-8);
        }
    }

    #[test]
    fn subgradient_agrees_with_lp() {
        let spec = DistributionSpec::IsotropicGaussian {
            dimension: 4,
            mean: vec![0.5, -0.25, 0.0, 1.0],
            scale: 1.0,
        };
        let b = spec.sample(301, &mut StreamRng::from_master(13)).unwrap();
        let net = DirectionNet::axes_random(4, 24, &mut StreamRng::from_master(14)).unwrap();
        let tol = 1e-3;
        let (_, obj_lp) = estimate_center(&b, &net, tol).unwrap();
        let (_, obj_sg) = estimate_center_subgradient(&b, &net, tol).unwrap();
        assert!(
            (obj_sg - obj_lp).abs() <= 10.0 * tol,
            "lp {obj_lp} vs subgradient {obj_sg}"
        );
        assert!(obj_sg >= obj_lp - 1e-9, "LP is the reference minimum");
    }

    #[test]
    fn gaussian_recovery_at_moderate_n() {
        // ||mu_hat - mu|| small for an untruncated Gaussian.
        let spec = DistributionSpec::IsotropicGaussian {
            dimension: 2,
            mean: vec![1.0, -1.0],
            scale: 1.0,
        };
        let mut hits = 0;
        let trials = 20;
        for t in 0..trials {
            let b = spec.sample(10_000, &mut StreamRng::stream(77, &[t])).unwrap();
            let net =
                DirectionNet::axes_random(2, 64, &mut StreamRng::stream(78, &[t])).unwrap();
            let (mu, _) = estimate_center(&b, &net, 1e-8).unwrap();
            let err = ((mu[0] - 1.0).powi(2) + (mu[1] + 1.0).powi(2)).sqrt();
            if err <= 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "only {hits}/{trials} recoveries within 0.1");
    }

    #[test]
    fn profile_invariants() {
        assert!(RegularityProfile::new(1.0, 0.25, ProfileProvenance::UserAsserted).is_ok());
        assert!(RegularityProfile::new(1.0, 0.75, ProfileProvenance::UserAsserted).is_err());

        let flagged = gaussian_profile();
        assert!((flagged.c - 0.6577).abs() < 1e-4);
        assert!(flagged.warning.is_some());

        let safe = conservative_gaussian_profile();
        assert!((safe.c - 0.2420).abs() < 1e-4);
        assert!(safe.c * safe.r <= 0.5);
        assert!(safe.warning.is_none());
    }

    #[test]
    fn bounds_and_regimes() {
        let p = RegularityProfile::new(0.5, 1.0, ProfileProvenance::UserAsserted).unwrap();
        assert!((median_stability_bound(0.05, &p).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(median_stability_bound(0.0, &p).unwrap(), 0.0);
        assert!(median_stability_bound(0.6, &p).is_err());

        // (2/c)(eps) with no statistical term in the limit of huge n.
        let b = recovery_bound(&p, 0.05, 2, 0.1, 100_000_000, 1.0).unwrap();
        assert!((b - 0.2).abs() < 2e-3, "bound {b}");
        // Linearity in epsilon for a fixed statistical term.
        let b1 = recovery_bound(&p, 0.05, 2, 0.1, 10_000, 1.0).unwrap();
        let b2 = recovery_bound(&p, 0.10, 2, 0.1, 10_000, 1.0).unwrap();
        assert!((b2 - b1 - 2.0 * 0.05 / 0.5).abs() < 1e-12);
        // Precondition on n.
        assert!(recovery_bound(&p, 0.45, 2, 0.1, 100, 1.0).is_err());
    }

    #[test]
    fn regularity_test_point_masses() {
        let net = DirectionNet::user_supplied(vec![vec![1.0], vec![-1.0]]).unwrap();
        let zeros = batch(vec![vec![0.0]; 5]);
        let v = regularity_test(&zeros, 0.5, &net, 1e-8).unwrap();
        assert_eq!(v.decision, Decision::AcceptNull);

        let far = batch(vec![vec![0.5]; 5]);
        let v = regularity_test(&far, 0.5, &net, 1e-8).unwrap();
        assert_eq!(v.decision, Decision::RejectNull);
    }
}
