//! Truncation sets, rejection sampling from the conditional law, and the
//! adversarial truncation constructions used throughout the test suite.
//!
//! A truncation rule is a membership predicate for the acceptance set S plus
//! a declared bound on the removed mass. Built-in geometric rules serialize;
//! arbitrary user predicates are available only programmatically.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dist::{Atom, DistributionSpec, SampleBatch, Segment};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// An interval on the real line with optionally open/unbounded endpoints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Interval1 {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
}

impl Interval1 {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval1 { lo: Some(lo), hi: Some(hi), lo_open: false, hi_open: false }
    }

    pub fn at_most(hi: f64) -> Self {
        Interval1 { lo: None, hi: Some(hi), lo_open: false, hi_open: false }
    }

    pub fn at_least(lo: f64) -> Self {
        Interval1 { lo: Some(lo), hi: None, lo_open: false, hi_open: false }
    }

    pub fn greater_than(lo: f64) -> Self {
        Interval1 { lo: Some(lo), hi: None, lo_open: true, hi_open: false }
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = match self.lo {
            Some(lo) => {
                if self.lo_open {
                    x > lo
                } else {
                    x >= lo
                }
            }
            None => true,
        };
        let hi_ok = match self.hi {
            Some(hi) => {
                if self.hi_open {
                    x < hi
                } else {
                    x <= hi
                }
            }
            None => true,
        };
        lo_ok && hi_ok
    }
}

/// Geometric description of an acceptance set S.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleSet {
    FullSpace,
    /// Keep points with `⟨x, direction⟩ <= threshold`.
    Halfspace { direction: Vec<f64>, threshold: f64 },
    /// Keep points whose coordinate 0 lies in any listed interval.
    Coord0Union { intervals: Vec<Interval1> },
    /// Programmatic predicate; not reconstructible from serialized form.
    Custom,
}

/// A measurable acceptance set S plus the claimed bound ε on P(S^c).
#[derive(Clone, Serialize, Deserialize)]
pub struct TruncationRule {
    pub set: RuleSet,
    pub declared_epsilon: f64,
    pub description: String,
    #[serde(skip)]
    predicate: Option<Arc<dyn Fn(&[f64]) -> bool + Send + Sync>>,
}

impl std::fmt::Debug for TruncationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TruncationRule")
            .field("set", &self.set)
            .field("declared_epsilon", &self.declared_epsilon)
            .field("description", &self.description)
            .finish()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
        return Err(Error::InvalidParameter(format!(
            "declared epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

impl TruncationRule {
    pub fn new(set: RuleSet, declared_epsilon: f64, description: impl Into<String>) -> Result<Self> {
        check_epsilon(declared_epsilon)?;
        if matches!(set, RuleSet::Custom) {
            return Err(Error::InvalidParameter(
                "custom rules must be built with TruncationRule::custom".into(),
            ));
        }
        Ok(TruncationRule {
            set,
            declared_epsilon,
            description: description.into(),
            predicate: None,
        })
    }

    pub fn full_space() -> Self {
        TruncationRule {
            set: RuleSet::FullSpace,
            declared_epsilon: 0.0,
            description: "full space (no truncation)".into(),
            predicate: None,
        }
    }

    /// A rule given by an arbitrary predicate; programmatic use only.
    pub fn custom<F>(predicate: F, declared_epsilon: f64, description: impl Into<String>) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        check_epsilon(declared_epsilon)?;
        Ok(TruncationRule {
            set: RuleSet::Custom,
            declared_epsilon,
            description: description.into(),
            predicate: Some(Arc::new(predicate)),
        })
    }

    /// Membership test `x ∈ S`.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.set {
            RuleSet::FullSpace => true,
            RuleSet::Halfspace { direction, threshold } => {
                let dot: f64 = direction.iter().zip(x).map(|(a, b)| a * b).sum();
                dot <= *threshold
            }
            RuleSet::Coord0Union { intervals } => intervals.iter().any(|i| i.contains(x[0])),
            RuleSet::Custom => match &self.predicate {
                Some(p) => p(x),
                // A deserialized custom rule has lost its predicate.
                None => false,
            },
        }
    }
}

/// A base law paired with a truncation rule, carrying whatever exact
/// bookkeeping the construction admits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversaryInstance {
    pub base: DistributionSpec,
    pub rule: TruncationRule,
    /// Exact mean of P(·|S) when available in closed form.
    pub exact_truncated_mean: Option<Vec<f64>>,
    /// Exact P(S) when available.
    pub exact_survival_mass: Option<f64>,
}

impl AdversaryInstance {
    /// Untruncated instance: rule is the full space.
    pub fn untruncated(base: DistributionSpec) -> Result<Self> {
        base.validate()?;
        let mean = base.true_mean();
        Ok(AdversaryInstance {
            base,
            rule: TruncationRule::full_space(),
            exact_truncated_mean: Some(mean),
            exact_survival_mass: Some(1.0),
        })
    }

    /// Draw `n` i.i.d. samples from P(·|S) by rejection. Consuming more than
    /// `10·n/(1−ε)` base draws signals a mis-declared ε.
    pub fn truncated_sampler(&self, n: usize, rng: &mut StreamRng) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::Arity("n must be >= 1".into()));
        }
        self.base.validate()?;
        if self.rule.declared_epsilon >= 1.0 {
            return Err(Error::InvalidParameter(
                "declared epsilon must be below 1 for rejection sampling".into(),
            ));
        }
        let d = self.base.dimension();
        let cap = (10.0 * n as f64 / (1.0 - self.rule.declared_epsilon)).ceil() as u64;
        let trace = rng.trace();
        let mut data = Vec::with_capacity(n * d);
        let mut row = Vec::with_capacity(d);
        let mut kept = 0usize;
        let mut drawn = 0u64;
        while kept < n {
            if drawn >= cap {
                return Err(Error::RejectionCap(format!(
                    "{drawn} base draws yielded only {kept}/{n} accepted samples \
                     (declared epsilon {})",
                    self.rule.declared_epsilon
                )));
            }
            row.clear();
            self.base.sample_row_into(rng, &mut row)?;
            drawn += 1;
            if self.rule.contains(&row) {
                data.extend_from_slice(&row);
                kept += 1;
            }
        }
        Ok(SampleBatch::from_flat(n, d, data, trace))
    }
}

/// The two-atom construction showing that below the bias floor, the truncated
/// laws under H0 and H1 coincide exactly: P = (1−ε)δ_0 + εδ_{ε^{−1/p}} with
/// S = (−∞, 0] has P(·|S) = δ_0.
pub fn impossibility_adversary(
    epsilon: f64,
    p: f64,
) -> Result<(AdversaryInstance, DistributionSpec)> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2], got {epsilon}"
        )));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 2, got {p}")));
    }
    let spike = epsilon.powf(-1.0 / p);
    let base = DistributionSpec::DiscreteAtomic {
        atoms: vec![
            Atom { point: vec![0.0], weight: 1.0 - epsilon },
            Atom { point: vec![spike], weight: epsilon },
        ],
    };
    let rule = TruncationRule::new(
        RuleSet::Halfspace { direction: vec![1.0], threshold: 0.0 },
        epsilon,
        format!("impossibility adversary: S = (-inf, 0], epsilon={epsilon}, p={p}"),
    )?;
    let h1 = AdversaryInstance {
        base,
        rule,
        exact_truncated_mean: Some(vec![0.0]),
        exact_survival_mass: Some(1.0 - epsilon),
    };
    let h0 = DistributionSpec::DiscreteAtomic {
        atoms: vec![Atom { point: vec![0.0], weight: 1.0 }],
    };
    Ok((h1, h0))
}

/// Everything the sharpness construction admits in closed form.
///
/// Base: unit-density mass on [−R−η, −R], [R, R+η], [−ξ, ξ] with η = 1/2 − ξ,
/// so the base is symmetric (mean and median zero) and satisfies the
/// directional-median regularity assumption with c = 1, r = ξ. The rule keeps
/// S_R = [−R−η+a, −R] ∪ [1, ∞) with gap width a = min(ε − 2ξ, η); the
/// truncated median then lands beyond R even though only ε mass was removed.
pub fn sharpness_construction(xi: f64, epsilon: f64, big_r: f64) -> Result<AdversaryInstance> {
    if !(xi > 0.0 && xi < 0.5) {
        return Err(Error::InvalidParameter(format!("xi must lie in (0, 1/2), got {xi}")));
    }
    if !(epsilon > 2.0 * xi && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (2*xi, 1), got {epsilon} with xi={xi}"
        )));
    }
    if !(big_r > 1.0) {
        return Err(Error::InvalidParameter(format!("R must exceed 1, got {big_r}")));
    }
    let eta = 0.5 - xi;
    let alpha_gap = (epsilon - 2.0 * xi).min(eta);
    let base = DistributionSpec::PiecewiseUniform {
        dimension: 1,
        segments: vec![
            Segment { lo: -big_r - eta, hi: -big_r, density: 1.0 },
            Segment { lo: -xi, hi: xi, density: 1.0 },
            Segment { lo: big_r, hi: big_r + eta, density: 1.0 },
        ],
    };
    let rule = TruncationRule::new(
        RuleSet::Coord0Union {
            intervals: vec![
                Interval1::closed(-big_r - eta + alpha_gap, -big_r),
                Interval1::at_least(1.0),
            ],
        },
        alpha_gap + 2.0 * xi,
        format!("sharpness construction: xi={xi}, epsilon={epsilon}, R={big_r}"),
    )?;
    // Renormalized mean of the surviving mass: the clipped left segment
    // [−R−η+a, −R] and the full right segment [R, R+η].
    let survival = 1.0 - alpha_gap - 2.0 * xi;
    let left_lo = -big_r - eta + alpha_gap;
    let left_int = (big_r * big_r - left_lo * left_lo) / 2.0; // negative: left mass
    let right_int = ((big_r + eta).powi(2) - big_r * big_r) / 2.0;
    let mean = (left_int + right_int) / survival;
    Ok(AdversaryInstance {
        base,
        rule,
        exact_truncated_mean: Some(vec![mean]),
        exact_survival_mass: Some(survival),
    })
}

/// Remove the ε upper tail of the projection onto `direction`: keep
/// `{x : ⟨x − μ_P, v⟩ ≤ q_{1−ε}}`. Exact bookkeeping for Gaussian families in
/// any direction and for coordinate-0 directions of 1-d-tractable families.
pub fn halfspace_adversary(
    spec: &DistributionSpec,
    epsilon: f64,
    direction: &[f64],
) -> Result<AdversaryInstance> {
    spec.validate()?;
    check_epsilon(epsilon)?;
    let d = spec.dimension();
    if direction.len() != d {
        return Err(Error::InvalidParameter("direction/dimension mismatch".into()));
    }
    let norm: f64 = direction.iter().map(|t| t * t).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "direction must be a unit vector, norm {norm}"
        )));
    }
    let mu = spec.true_mean();
    if epsilon == 0.0 {
        return Ok(AdversaryInstance {
            base: spec.clone(),
            rule: TruncationRule::full_space(),
            exact_truncated_mean: Some(mu),
            exact_survival_mass: Some(1.0),
        });
    }

    // Gaussian families: the projection is exactly normal, so the quantile
    // and conditional-tail mean are closed form in any direction.
    let diag_stds: Option<Vec<f64>> = match spec {
        DistributionSpec::IsotropicGaussian { scale, .. } => Some(vec![*scale; d]),
        DistributionSpec::DiagonalGaussian { stds, .. } => Some(stds.clone()),
        _ => None,
    };
    if let Some(stds) = diag_stds {
        let sigma_v2: f64 = direction.iter().zip(&stds).map(|(v, s)| v * v * s * s).sum();
        if sigma_v2 <= 0.0 {
            // Degenerate projection: the halfspace at threshold 0 keeps everything.
            let mu_dot: f64 = direction.iter().zip(&mu).map(|(v, m)| v * m).sum();
            let rule = TruncationRule::new(
                RuleSet::Halfspace { direction: direction.to_vec(), threshold: mu_dot },
                epsilon,
                format!("halfspace adversary (degenerate direction), epsilon={epsilon}"),
            )?;
            return Ok(AdversaryInstance {
                base: spec.clone(),
                rule,
                exact_truncated_mean: Some(mu),
                exact_survival_mass: Some(1.0),
            });
        }
        let sigma_v = sigma_v2.sqrt();
        let z = Normal::standard().inverse_cdf(1.0 - epsilon);
        let phi_z = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // Conditional-tail mean of the projection: E[Z | Z <= z] = −φ(z)/(1−ε)
        // in standard units, pushed back through Σv/σ_v.
        let shift = phi_z / (1.0 - epsilon);
        let trunc_mean: Vec<f64> = mu
            .iter()
            .zip(direction)
            .zip(&stds)
            .map(|((m, v), s)| m - (s * s * v / sigma_v) * shift)
            .collect();
        let mu_dot: f64 = direction.iter().zip(&mu).map(|(v, m)| v * m).sum();
        let rule = TruncationRule::new(
            RuleSet::Halfspace {
                direction: direction.to_vec(),
                threshold: mu_dot + sigma_v * z,
            },
            epsilon,
            format!("halfspace adversary (gaussian), epsilon={epsilon}"),
        )?;
        return Ok(AdversaryInstance {
            base: spec.clone(),
            rule,
            exact_truncated_mean: Some(trunc_mean),
            exact_survival_mass: Some(1.0 - epsilon),
        });
    }

    // Non-Gaussian families: supported along ±e0, where the projection law is
    // the tractable coordinate-0 margin and other coordinates are independent.
    let along_e0 = direction[0].abs() > 0.0
        && direction.iter().skip(1).all(|v| *v == 0.0)
        && (direction[0].abs() - 1.0).abs() <= 1e-12;
    if !along_e0 {
        return Err(Error::Unsupported(format!(
            "halfspace adversary for family {:?} requires direction = ±e0",
            std::mem::discriminant(spec)
        )));
    }
    let positive = direction[0] > 0.0;
    if positive {
        let q = spec
            .quantile_coord0(1.0 - epsilon)
            .ok_or_else(|| Error::Unsupported("quantile unavailable for family".into()))?;
        let mass = spec
            .cdf_coord0(q)
            .ok_or_else(|| Error::Unsupported("cdf unavailable for family".into()))?;
        if mass <= 0.0 {
            return Err(Error::ZeroSurvivalMass);
        }
        let pm = spec
            .partial_mean_coord0(q)
            .ok_or_else(|| Error::Unsupported("partial mean unavailable for family".into()))?;
        let mut trunc_mean = mu.clone();
        trunc_mean[0] = pm / mass;
        let rule = TruncationRule::new(
            RuleSet::Halfspace { direction: direction.to_vec(), threshold: q },
            epsilon,
            format!("halfspace adversary (coord 0), epsilon={epsilon}"),
        )?;
        Ok(AdversaryInstance {
            base: spec.clone(),
            rule,
            exact_truncated_mean: Some(trunc_mean),
            exact_survival_mass: Some(mass),
        })
    } else {
        // Keep the upper tail {x0 >= t}; exact only for continuous margins.
        if matches!(spec, DistributionSpec::DiscreteAtomic { .. }) {
            return Err(Error::Unsupported(
                "halfspace adversary along -e0 needs a continuous margin".into(),
            ));
        }
        let t = spec
            .quantile_coord0(epsilon)
            .ok_or_else(|| Error::Unsupported("quantile unavailable for family".into()))?;
        let pm = spec
            .partial_mean_coord0(t)
            .ok_or_else(|| Error::Unsupported("partial mean unavailable for family".into()))?;
        let mut trunc_mean = mu.clone();
        trunc_mean[0] = (mu[0] - pm) / (1.0 - epsilon);
        let rule = TruncationRule::new(
            RuleSet::Halfspace { direction: direction.to_vec(), threshold: -t },
            epsilon,
            format!("halfspace adversary (coord 0, lower tail), epsilon={epsilon}"),
        )?;
        Ok(AdversaryInstance {
            base: spec.clone(),
            rule,
            exact_truncated_mean: Some(trunc_mean),
            exact_survival_mass: Some(1.0 - epsilon),
        })
    }
}

/// Hollow out mass just above the center: remove `{x : μ_0 < x_0 ≤ q}` where
/// q puts exactly ε mass in the removed interval. Stresses median stability
/// from the worst one-sided direction.
pub fn center_hollowing_adversary(
    spec: &DistributionSpec,
    epsilon: f64,
) -> Result<AdversaryInstance> {
    spec.validate()?;
    check_epsilon(epsilon)?;
    let mu = spec.true_mean();
    if epsilon == 0.0 {
        return Ok(AdversaryInstance {
            base: spec.clone(),
            rule: TruncationRule::full_space(),
            exact_truncated_mean: Some(mu),
            exact_survival_mass: Some(1.0),
        });
    }
    if matches!(spec, DistributionSpec::DiscreteAtomic { .. }) {
        return Err(Error::Unsupported(
            "center hollowing needs a continuous coordinate-0 margin".into(),
        ));
    }
    let f_mu = spec
        .cdf_coord0(mu[0])
        .ok_or_else(|| Error::Unsupported("cdf unavailable for family".into()))?;
    if f_mu + epsilon >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "cannot remove mass {epsilon} above the mean: only {} available",
            1.0 - f_mu
        )));
    }
    let q = spec
        .quantile_coord0(f_mu + epsilon)
        .ok_or_else(|| Error::Unsupported("quantile unavailable for family".into()))?;
    let removed_mean = spec.partial_mean_coord0(q).unwrap() - spec.partial_mean_coord0(mu[0]).unwrap();
    let mut trunc_mean = mu.clone();
    trunc_mean[0] = (mu[0] - removed_mean) / (1.0 - epsilon);
    let rule = TruncationRule::new(
        RuleSet::Coord0Union {
            intervals: vec![Interval1::at_most(mu[0]), Interval1::greater_than(q)],
        },
        epsilon,
        format!("center hollowing: remove ({}, {q}], epsilon={epsilon}", mu[0]),
    )?;
    Ok(AdversaryInstance {
        base: spec.clone(),
        rule,
        exact_truncated_mean: Some(trunc_mean),
        exact_survival_mass: Some(1.0 - epsilon),
    })
}

/// Exact variance of a normal with variance `sigma2` truncated to its lower
/// (1−ε) mass: σ²(1 − z·λ − λ²) with z = Φ⁻¹(1−ε), λ = φ(z)/Φ(z) = φ(z)/(1−ε).
pub fn gaussian_halfspace_truncated_variance(sigma2: f64, epsilon: f64) -> f64 {
    if epsilon <= 0.0 {
        return sigma2;
    }
    let z = Normal::standard().inverse_cdf(1.0 - epsilon);
    let phi_z = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let lambda = phi_z / (1.0 - epsilon);
    sigma2 * (1.0 - z * lambda - lambda * lambda)
}
