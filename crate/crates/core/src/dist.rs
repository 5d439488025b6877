//! Samplable distribution families with exactly known population parameters.
//!
//! Heavy-tailed families (Student-t, symmetrized Pareto) put the heavy tail on
//! coordinate 0 and pad the remaining coordinates with independent standard
//! Gaussians, so the population mean and covariance operator norm stay in
//! closed form while the tail exponent still limits directional moments.

use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

const MASS_TOL: f64 = 1e-12;

/// An atom of a discrete law: a point in R^d and its probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// One constant-density segment `[lo, hi]` of a piecewise-uniform 1-d law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

impl Segment {
    pub fn mass(&self) -> f64 {
        self.density * (self.hi - self.lo)
    }
}

/// Declarative description of a samplable law with known mean, covariance
/// operator norm, and directional moments where closed forms exist.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    IsotropicGaussian {
        dimension: usize,
        mean: Vec<f64>,
        scale: f64,
    },
    DiagonalGaussian {
        mean: Vec<f64>,
        stds: Vec<f64>,
    },
    /// Student-t on coordinate 0 (location `mean[0]`, given scale and
    /// degrees of freedom), standard Gaussian padding elsewhere.
    StudentT {
        dimension: usize,
        mean: Vec<f64>,
        dof: f64,
        scale: f64,
    },
    /// Symmetrized Pareto on coordinate 0: a Pareto magnitude with an
    /// independent sign flip, shifted by `mean[0]`. Gaussian padding elsewhere.
    Pareto {
        dimension: usize,
        mean: Vec<f64>,
        exponent: f64,
        scale: f64,
    },
    DiscreteAtomic { atoms: Vec<Atom> },
    /// Piecewise-uniform law on coordinate 0, standard Gaussian padding
    /// (mean zero) on the remaining coordinates.
    PiecewiseUniform {
        dimension: usize,
        segments: Vec<Segment>,
    },
}

/// Result of an exact directional-moment query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Exact(f64),
    /// The moment diverges (p at or above the tail exponent).
    Infinite,
    /// No closed form is exposed for this family/dimension.
    Unavailable,
}

impl Moment {
    pub fn exact(self) -> Option<f64> {
        match self {
            Moment::Exact(v) => Some(v),
            _ => None,
        }
    }
}

/// n x d matrix of i.i.d. observations plus the seed material that produced it.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub seed_trace: Vec<u64>,
}

impl SampleBatch {
    pub fn from_rows(rows: Vec<Vec<f64>>, seed_trace: Vec<u64>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Arity("batch must contain at least one row".into()));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(n * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::Arity("ragged rows in batch".into()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Arity("non-finite entry in batch".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(SampleBatch { n, d, data, seed_trace })
    }

    pub(crate) fn from_flat(n: usize, d: usize, data: Vec<f64>, seed_trace: Vec<u64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        SampleBatch { n, d, data, seed_trace }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Contiguous sub-batch of rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> SampleBatch {
        SampleBatch {
            n: end - start,
            d: self.d,
            data: self.data[start * self.d..end * self.d].to_vec(),
            seed_trace: self.seed_trace.clone(),
        }
    }
}

/// E|Z|^p for a standard normal Z: 2^{p/2} Gamma((p+1)/2) / sqrt(pi).
pub fn gaussian_abs_moment(p: f64) -> f64 {
    (0.5 * p * 2f64.ln() + ln_gamma((p + 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln()).exp()
}

/// E|T|^p for a standard Student-t with `dof` degrees of freedom, p < dof.
pub fn student_abs_moment(p: f64, dof: f64) -> f64 {
    (0.5 * p * dof.ln() + ln_gamma((p + 1.0) / 2.0) + ln_gamma((dof - p) / 2.0)
        - ln_gamma(dof / 2.0)
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::IsotropicGaussian { dimension, mean, scale } => {
                if *dimension == 0 || mean.len() != *dimension {
                    return Err(Error::InvalidSpec("dimension/mean mismatch".into()));
                }
                if !scale.is_finite() || *scale < 0.0 {
                    return Err(Error::InvalidSpec("scale must be finite and >= 0".into()));
                }
            }
            DistributionSpec::DiagonalGaussian { mean, stds } => {
                if mean.is_empty() || mean.len() != stds.len() {
                    return Err(Error::InvalidSpec("mean/stds mismatch".into()));
                }
                if stds.iter().any(|s| !s.is_finite() || *s < 0.0) {
                    return Err(Error::InvalidSpec("stds must be finite and >= 0".into()));
                }
            }
            DistributionSpec::StudentT { dimension, mean, dof, scale } => {
                if *dimension == 0 || mean.len() != *dimension {
                    return Err(Error::InvalidSpec("dimension/mean mismatch".into()));
                }
                if !(*dof > 2.0) {
                    return Err(Error::InvalidSpec(format!(
                        "student-t tail exponent must exceed 2, got {dof}"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(Error::InvalidSpec("scale must be positive".into()));
                }
            }
            DistributionSpec::Pareto { dimension, mean, exponent, scale } => {
                if *dimension == 0 || mean.len() != *dimension {
                    return Err(Error::InvalidSpec("dimension/mean mismatch".into()));
                }
                if !(*exponent > 2.0) {
                    return Err(Error::InvalidSpec(format!(
                        "pareto tail exponent must exceed 2, got {exponent}"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(Error::InvalidSpec("scale must be positive".into()));
                }
            }
            DistributionSpec::DiscreteAtomic { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("no atoms".into()));
                }
                let d = atoms[0].point.len();
                if d == 0 || atoms.iter().any(|a| a.point.len() != d) {
                    return Err(Error::InvalidSpec("ragged atom points".into()));
                }
                if atoms.iter().any(|a| a.weight < 0.0 || !a.weight.is_finite()) {
                    return Err(Error::InvalidSpec("atom weights must be nonnegative".into()));
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "atom weights sum to {total}, expected 1"
                    )));
                }
            }
            DistributionSpec::PiecewiseUniform { dimension, segments } => {
                if *dimension == 0 {
                    return Err(Error::InvalidSpec("dimension must be positive".into()));
                }
                if segments.is_empty() {
                    return Err(Error::InvalidSpec("no segments".into()));
                }
                let mut sorted = segments.clone();
                sorted.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
                for s in &sorted {
                    if !(s.lo.is_finite() && s.hi.is_finite() && s.lo < s.hi && s.density > 0.0) {
                        return Err(Error::InvalidSpec("degenerate segment".into()));
                    }
                }
                for w in sorted.windows(2) {
                    if w[1].lo < w[0].hi - MASS_TOL {
                        return Err(Error::InvalidSpec("overlapping segments".into()));
                    }
                }
                let total: f64 = segments.iter().map(Segment::mass).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "segment mass totals {total}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self {
            DistributionSpec::IsotropicGaussian { dimension, .. } => *dimension,
            DistributionSpec::DiagonalGaussian { mean, .. } => mean.len(),
            DistributionSpec::StudentT { dimension, .. } => *dimension,
            DistributionSpec::Pareto { dimension, .. } => *dimension,
            DistributionSpec::DiscreteAtomic { atoms } => atoms[0].point.len(),
            DistributionSpec::PiecewiseUniform { dimension, .. } => *dimension,
        }
    }

    /// Exact population mean.
    pub fn true_mean(&self) -> Vec<f64> {
        match self {
            DistributionSpec::IsotropicGaussian { mean, .. } => mean.clone(),
            DistributionSpec::DiagonalGaussian { mean, .. } => mean.clone(),
            DistributionSpec::StudentT { mean, .. } => mean.clone(),
            DistributionSpec::Pareto { mean, .. } => mean.clone(),
            DistributionSpec::DiscreteAtomic { atoms } => {
                let d = atoms[0].point.len();
                let mut mu = vec![0.0; d];
                for a in atoms {
                    for (m, x) in mu.iter_mut().zip(&a.point) {
                        *m += a.weight * x;
                    }
                }
                mu
            }
            DistributionSpec::PiecewiseUniform { dimension, segments } => {
                let mut mu = vec![0.0; *dimension];
                mu[0] = segments
                    .iter()
                    .map(|s| s.density * (s.hi * s.hi - s.lo * s.lo) / 2.0)
                    .sum();
                mu
            }
        }
    }

    /// Exact operator norm of the population covariance.
    pub fn cov_opnorm(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            DistributionSpec::IsotropicGaussian { scale, .. } => scale * scale,
            DistributionSpec::DiagonalGaussian { stds, .. } => {
                stds.iter().map(|s| s * s).fold(0.0, f64::max)
            }
            DistributionSpec::StudentT { dimension, dof, scale, .. } => {
                let v = scale * scale * dof / (dof - 2.0);
                if *dimension > 1 {
                    v.max(1.0)
                } else {
                    v
                }
            }
            DistributionSpec::Pareto { dimension, exponent, scale, .. } => {
                let v = scale * scale * exponent / (exponent - 2.0);
                if *dimension > 1 {
                    v.max(1.0)
                } else {
                    v
                }
            }
            DistributionSpec::DiscreteAtomic { atoms } => {
                let mu = self.true_mean();
                let d = mu.len();
                let mut cov = vec![0.0; d * d];
                for a in atoms {
                    for i in 0..d {
                        let ci = a.point[i] - mu[i];
                        for j in 0..d {
                            cov[i * d + j] += a.weight * ci * (a.point[j] - mu[j]);
                        }
                    }
                }
                symmetric_opnorm(&cov, d)
            }
            DistributionSpec::PiecewiseUniform { dimension, segments } => {
                let mu0: f64 = segments
                    .iter()
                    .map(|s| s.density * (s.hi * s.hi - s.lo * s.lo) / 2.0)
                    .sum();
                let second: f64 = segments
                    .iter()
                    .map(|s| s.density * (s.hi.powi(3) - s.lo.powi(3)) / 3.0)
                    .sum();
                let v = second - mu0 * mu0;
                if *dimension > 1 {
                    v.max(1.0)
                } else {
                    v
                }
            }
        })
    }

    /// Exact worst-case directional p-th moment where a closed form exists.
    pub fn directional_moment_exact(&self, p: f64) -> Result<Moment> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        self.validate()?;
        Ok(match self {
            DistributionSpec::IsotropicGaussian { scale, .. } => {
                Moment::Exact(scale * gaussian_abs_moment(p).powf(1.0 / p))
            }
            DistributionSpec::DiagonalGaussian { stds, .. } => {
                let smax = stds.iter().copied().fold(0.0, f64::max);
                Moment::Exact(smax * gaussian_abs_moment(p).powf(1.0 / p))
            }
            DistributionSpec::StudentT { dimension, dof, scale, .. } => {
                if p >= *dof {
                    Moment::Infinite
                } else if *dimension == 1 {
                    Moment::Exact(scale * student_abs_moment(p, *dof).powf(1.0 / p))
                } else {
                    Moment::Unavailable
                }
            }
            DistributionSpec::Pareto { dimension, exponent, scale, .. } => {
                if p >= *exponent {
                    Moment::Infinite
                } else if *dimension == 1 {
                    Moment::Exact(scale * (exponent / (exponent - p)).powf(1.0 / p))
                } else {
                    Moment::Unavailable
                }
            }
            DistributionSpec::DiscreteAtomic { atoms } => {
                if atoms[0].point.len() == 1 {
                    let mu = self.true_mean()[0];
                    let m: f64 = atoms
                        .iter()
                        .map(|a| a.weight * (a.point[0] - mu).abs().powf(p))
                        .sum();
                    Moment::Exact(m.powf(1.0 / p))
                } else {
                    Moment::Unavailable
                }
            }
            DistributionSpec::PiecewiseUniform { dimension, segments } => {
                if *dimension == 1 {
                    let mu = self.true_mean()[0];
                    // Integral of |x - mu|^p over each segment via the signed
                    // antiderivative G(t) = sign(t) |t|^{p+1} / (p+1).
                    let g = |t: f64| t.signum() * t.abs().powf(p + 1.0) / (p + 1.0);
                    let m: f64 = segments
                        .iter()
                        .map(|s| s.density * (g(s.hi - mu) - g(s.lo - mu)))
                        .sum();
                    Moment::Exact(m.powf(1.0 / p))
                } else {
                    Moment::Unavailable
                }
            }
        })
    }

    /// Draw `n` i.i.d. samples. Deterministic given the generator stream.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::Arity("n must be >= 1".into()));
        }
        self.validate()?;
        let d = self.dimension();
        let mut data = Vec::with_capacity(n * d);
        let trace = rng.trace();
        for _ in 0..n {
            self.sample_row_into(rng, &mut data)?;
        }
        Ok(SampleBatch::from_flat(n, d, data, trace))
    }

    pub(crate) fn sample_row_into(&self, rng: &mut StreamRng, out: &mut Vec<f64>) -> Result<()> {
        match self {
            DistributionSpec::IsotropicGaussian { dimension, mean, scale } => {
                for i in 0..*dimension {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mean[i] + scale * z);
                }
            }
            DistributionSpec::DiagonalGaussian { mean, stds } => {
                for i in 0..mean.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mean[i] + stds[i] * z);
                }
            }
            DistributionSpec::StudentT { dimension, mean, dof, scale } => {
                // Ratio construction: T = Z / sqrt(W / dof), W ~ chi^2(dof).
                let z: f64 = rng.sample(StandardNormal);
                let w: f64 = rng.sample(ChiSquared::new(*dof).unwrap());
                out.push(mean[0] + scale * z / (w / dof).sqrt());
                for i in 1..*dimension {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mean[i] + z);
                }
            }
            DistributionSpec::Pareto { dimension, mean, exponent, scale } => {
                let u: f64 = 1.0 - rng.random::<f64>(); // in (0, 1]
                let magnitude = scale * u.powf(-1.0 / exponent);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(mean[0] + sign * magnitude);
                for i in 1..*dimension {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mean[i] + z);
                }
            }
            DistributionSpec::DiscreteAtomic { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &atoms[atoms.len() - 1];
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        chosen = a;
                        break;
                    }
                }
                out.extend_from_slice(&chosen.point);
            }
            DistributionSpec::PiecewiseUniform { dimension, segments } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut x = segments[segments.len() - 1].hi;
                for s in segments {
                    let m = s.mass();
                    if u < acc + m {
                        x = s.lo + (u - acc) / s.density;
                        break;
                    }
                    acc += m;
                }
                out.push(x);
                for _ in 1..*dimension {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(z);
                }
            }
        }
        Ok(())
    }

    // ---- coordinate-0 analysis (families with a tractable 1-d margin) ----

    /// CDF of coordinate 0, where available in closed form.
    pub fn cdf_coord0(&self, x: f64) -> Option<f64> {
        match self {
            DistributionSpec::IsotropicGaussian { mean, scale, .. } => {
                Some(Normal::new(mean[0], scale.max(f64::MIN_POSITIVE)).ok()?.cdf(x))
            }
            DistributionSpec::DiagonalGaussian { mean, stds } => {
                Some(Normal::new(mean[0], stds[0].max(f64::MIN_POSITIVE)).ok()?.cdf(x))
            }
            DistributionSpec::StudentT { mean, dof, scale, .. } => {
                Some(StudentsT::new(mean[0], *scale, *dof).ok()?.cdf(x))
            }
            DistributionSpec::Pareto { mean, exponent, scale, .. } => {
                let t = x - mean[0];
                Some(if t <= -scale {
                    0.5 * (scale / -t).powf(*exponent)
                } else if t < *scale {
                    0.5
                } else {
                    1.0 - 0.5 * (scale / t).powf(*exponent)
                })
            }
            DistributionSpec::DiscreteAtomic { atoms } => {
                if atoms[0].point.len() != 1 {
                    return None;
                }
                Some(atoms.iter().filter(|a| a.point[0] <= x).map(|a| a.weight).sum())
            }
            DistributionSpec::PiecewiseUniform { segments, .. } => {
                let mut acc = 0.0;
                for s in segments {
                    if x >= s.hi {
                        acc += s.mass();
                    } else if x > s.lo {
                        acc += s.density * (x - s.lo);
                    }
                }
                Some(acc)
            }
        }
    }

    /// Left-continuous quantile (inf{x : F(x) >= u}) of coordinate 0.
    pub fn quantile_coord0(&self, u: f64) -> Option<f64> {
        if !(0.0 < u && u < 1.0) {
            return None;
        }
        match self {
            DistributionSpec::IsotropicGaussian { mean, scale, .. } => {
                Some(Normal::new(mean[0], scale.max(f64::MIN_POSITIVE)).ok()?.inverse_cdf(u))
            }
            DistributionSpec::DiagonalGaussian { mean, stds } => {
                Some(Normal::new(mean[0], stds[0].max(f64::MIN_POSITIVE)).ok()?.inverse_cdf(u))
            }
            DistributionSpec::StudentT { mean, dof, scale, .. } => {
                Some(StudentsT::new(mean[0], *scale, *dof).ok()?.inverse_cdf(u))
            }
            DistributionSpec::Pareto { mean, exponent, scale, .. } => Some(if u < 0.5 {
                mean[0] - scale * (2.0 * u).powf(-1.0 / exponent)
            } else if u == 0.5 {
                mean[0] - scale
            } else {
                mean[0] + scale * (2.0 * (1.0 - u)).powf(-1.0 / exponent)
            }),
            DistributionSpec::DiscreteAtomic { atoms } => {
                if atoms[0].point.len() != 1 {
                    return None;
                }
                let mut pts: Vec<(f64, f64)> =
                    atoms.iter().map(|a| (a.point[0], a.weight)).collect();
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let mut acc = 0.0;
                for (x, w) in pts {
                    acc += w;
                    if acc >= u - MASS_TOL {
                        return Some(x);
                    }
                }
                None
            }
            DistributionSpec::PiecewiseUniform { segments, .. } => {
                let mut segs = segments.clone();
                segs.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
                let mut acc = 0.0;
                for s in &segs {
                    let m = s.mass();
                    if acc + m >= u {
                        return Some(s.lo + (u - acc) / s.density);
                    }
                    acc += m;
                }
                segs.last().map(|s| s.hi)
            }
        }
    }

    /// Partial expectation E[X_0 1{X_0 <= q}] of coordinate 0.
    pub fn partial_mean_coord0(&self, q: f64) -> Option<f64> {
        match self {
            DistributionSpec::IsotropicGaussian { mean, scale, .. } => {
                Some(gaussian_partial_mean(mean[0], *scale, q))
            }
            DistributionSpec::DiagonalGaussian { mean, stds } => {
                Some(gaussian_partial_mean(mean[0], stds[0], q))
            }
            DistributionSpec::StudentT { mean, dof, scale, .. } => {
                let st = StudentsT::new(0.0, 1.0, *dof).ok()?;
                let t = (q - mean[0]) / scale;
                let c = (ln_gamma((dof + 1.0) / 2.0)
                    - ln_gamma(dof / 2.0)
                    - 0.5 * (dof * std::f64::consts::PI).ln())
                .exp();
                let tail = -c * dof / (dof - 1.0) * (1.0 + t * t / dof).powf(-(dof - 1.0) / 2.0);
                Some(mean[0] * st.cdf(t) + scale * tail)
            }
            DistributionSpec::Pareto { mean, exponent, scale, .. } => {
                let k = *exponent;
                let xm = *scale;
                let t = q - mean[0];
                // E[Y 1{Y <= t}] for the centered symmetric Pareto Y.
                let centered = if t <= -xm {
                    -(k * xm.powf(k) * (-t).powf(1.0 - k)) / (2.0 * (k - 1.0))
                } else if t < xm {
                    -k * xm / (2.0 * (k - 1.0))
                } else {
                    -(k * xm.powf(k) * t.powf(1.0 - k)) / (2.0 * (k - 1.0))
                };
                Some(mean[0] * self.cdf_coord0(q)? + centered)
            }
            DistributionSpec::DiscreteAtomic { atoms } => {
                if atoms[0].point.len() != 1 {
                    return None;
                }
                Some(
                    atoms
                        .iter()
                        .filter(|a| a.point[0] <= q)
                        .map(|a| a.weight * a.point[0])
                        .sum(),
                )
            }
            DistributionSpec::PiecewiseUniform { segments, .. } => {
                let mut acc = 0.0;
                for s in segments {
                    let hi = s.hi.min(q);
                    if hi > s.lo {
                        acc += s.density * (hi * hi - s.lo * s.lo) / 2.0;
                    }
                }
                Some(acc)
            }
        }
    }
}

fn gaussian_partial_mean(m: f64, s: f64, q: f64) -> f64 {
    if s <= 0.0 {
        return if m <= q { m } else { 0.0 };
    }
    let a = (q - m) / s;
    let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cap_phi = Normal::standard().cdf(a);
    m * cap_phi - s * phi
}

/// Operator norm of a symmetric PSD matrix by power iteration.
fn symmetric_opnorm(a: &[f64], d: usize) -> f64 {
    if d == 1 {
        return a[0].abs();
    }
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + (i as f64) * 0.1).collect();
    let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|t| *t /= nv);
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let mut w = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                w[i] += a[i * d + j] * v[j];
            }
        }
        let nw = norm(&w);
        if nw < 1e-300 {
            return 0.0;
        }
        let next = nw;
        w.iter_mut().for_each(|t| *t /= nw);
        if (next - lambda).abs() <= 1e-14 * next.max(1.0) {
            return next;
        }
        lambda = next;
        v = w;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(d: usize, mean: Vec<f64>, scale: f64) -> DistributionSpec {
        DistributionSpec::IsotropicGaussian { dimension: d, mean, scale }
    }

    #[test]
    fn point_mass_samples_are_constant() {
        let spec = DistributionSpec::DiscreteAtomic {
            atoms: vec![Atom { point: vec![0.0], weight: 1.0 }],
        };
        let mut rng = StreamRng::from_master(1);
        let batch = spec.sample(3, &mut rng).unwrap();
        assert!(batch.rows().all(|r| r == [0.0]));
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let spec = iso(3, vec![1.0, 2.0, 3.0], 0.7);
        let a = spec.sample(50, &mut StreamRng::stream(5, &[2])).unwrap();
        let b = spec.sample(50, &mut StreamRng::stream(5, &[2])).unwrap();
        for i in 0..50 {
            assert_eq!(a.row(i), b.row(i));
        }
    }

    #[test]
    fn gaussian_sample_mean_is_close() {
        // CLT bound 3 sqrt(1/1e5) ~ 0.0095, doubled for slack.
        let spec = iso(2, vec![0.0, 0.0], 1.0);
        let n = 100_000;
        let batch = spec.sample(n, &mut StreamRng::from_master(12)).unwrap();
        let mut mean = [0.0f64; 2];
        for r in batch.rows() {
            mean[0] += r[0];
            mean[1] += r[1];
        }
        for m in mean {
            assert!((m / n as f64).abs() < 0.02);
        }
    }

    #[test]
    fn true_means() {
        let imp = DistributionSpec::DiscreteAtomic {
            atoms: vec![
                Atom { point: vec![0.0], weight: 0.96 },
                Atom { point: vec![5.0], weight: 0.04 },
            ],
        };
        assert!((imp.true_mean()[0] - 0.2).abs() < 1e-15);

        assert_eq!(iso(2, vec![1.0, 2.0], 1.0).true_mean(), vec![1.0, 2.0]);

        let sym = DistributionSpec::PiecewiseUniform {
            dimension: 1,
            segments: vec![
                Segment { lo: -1.0, hi: -0.5, density: 1.0 },
                Segment { lo: 0.5, hi: 1.0, density: 1.0 },
            ],
        };
        assert!(sym.true_mean()[0].abs() < 1e-15);
    }

    #[test]
    fn cov_opnorms() {
        assert_eq!(iso(7, vec![0.0; 7], 1.0).cov_opnorm().unwrap(), 1.0);

        let rademacher = DistributionSpec::DiscreteAtomic {
            atoms: vec![
                Atom { point: vec![-1.0], weight: 0.5 },
                Atom { point: vec![1.0], weight: 0.5 },
            ],
        };
        assert!((rademacher.cov_opnorm().unwrap() - 1.0).abs() < 1e-12);

        let diag = DistributionSpec::DiagonalGaussian {
            mean: vec![0.0, 0.0],
            stds: vec![1.0, 3.0],
        };
        assert!((diag.cov_opnorm().unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn atomic_opnorm_matches_2d_hand_computation() {
        // Atoms at (1,0) and (0,1) w.p. 1/2: covariance [[1/4,-1/4],[-1/4,1/4]],
        // eigenvalues {1/2, 0}.
        let law = DistributionSpec::DiscreteAtomic {
            atoms: vec![
                Atom { point: vec![1.0, 0.0], weight: 0.5 },
                Atom { point: vec![0.0, 1.0], weight: 0.5 },
            ],
        };
        assert!((law.cov_opnorm().unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn directional_moments_gaussian() {
        let spec = iso(1, vec![0.0], 1.0);
        let m2 = spec.directional_moment_exact(2.0).unwrap().exact().unwrap();
        assert!((m2 - 1.0).abs() < 1e-12);
        let m4 = spec.directional_moment_exact(4.0).unwrap().exact().unwrap();
        assert!((m4 - 3f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn heavy_tail_moment_divergence() {
        let t4 = DistributionSpec::StudentT {
            dimension: 1,
            mean: vec![0.0],
            dof: 4.0,
            scale: 1.0,
        };
        assert_eq!(t4.directional_moment_exact(4.0).unwrap(), Moment::Infinite);
        // Second moment of t4 is dof/(dof-2) = 2.
        let m2 = t4.directional_moment_exact(2.0).unwrap().exact().unwrap();
        assert!((m2 - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn tail_exponent_at_most_two_is_rejected() {
        let bad = DistributionSpec::StudentT {
            dimension: 1,
            mean: vec![0.0],
            dof: 2.0,
            scale: 1.0,
        };
        assert!(bad.validate().is_err());
        assert!(bad.cov_opnorm().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = DistributionSpec::Pareto {
            dimension: 2,
            mean: vec![0.5, 0.0],
            exponent: 3.0,
            scale: 1.0,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"family\":\"pareto\""));
        let back: DistributionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.true_mean(), spec.true_mean());
    }

    #[test]
    fn pareto_cdf_quantile_consistency() {
        let spec = DistributionSpec::Pareto {
            dimension: 1,
            mean: vec![0.0],
            exponent: 3.0,
            scale: 1.0,
        };
        for u in [0.01, 0.2, 0.4, 0.7, 0.99] {
            let q = spec.quantile_coord0(u).unwrap();
            assert!((spec.cdf_coord0(q).unwrap() - u.max(0.5).min(if u < 0.5 { u } else { u })).abs() < 1e-10 || u == 0.5 || (spec.cdf_coord0(q).unwrap() - u).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_mean_full_range_recovers_mean() {
        let specs = vec![
            iso(1, vec![0.7], 1.3),
            DistributionSpec::StudentT { dimension: 1, mean: vec![0.3], dof: 3.0, scale: 2.0 },
            DistributionSpec::Pareto { dimension: 1, mean: vec![-0.4], exponent: 2.5, scale: 1.0 },
            DistributionSpec::PiecewiseUniform {
                dimension: 1,
                segments: vec![Segment { lo: -0.5, hi: 0.5, density: 1.0 }],
            },
        ];
        for spec in specs {
            let pm = spec.partial_mean_coord0(1e12).unwrap();
            assert!(
                (pm - spec.true_mean()[0]).abs() < 1e-6,
                "partial mean {pm} vs mean {}",
                spec.true_mean()[0]
            );
        }
    }

    #[test]
    fn student_partial_mean_matches_quadrature() {
        let spec = DistributionSpec::StudentT {
            dimension: 1,
            mean: vec![0.0],
            dof: 3.0,
            scale: 1.0,
        };
        // Trapezoid quadrature of t f(t) over [-2000, q].
        let q = 1.5;
        let dof: f64 = 3.0;
        let c = (ln_gamma(2.0) - ln_gamma(1.5) - 0.5 * (dof * std::f64::consts::PI).ln()).exp();
        let f = |t: f64| c * (1.0 + t * t / dof).powf(-2.0);
        let steps = 4_000_000;
        let lo = -2000.0;
        let h = (q - lo) / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let a = lo + i as f64 * h;
            let b = a + h;
            acc += 0.5 * (a * f(a) + b * f(b)) * h;
        }
        let pm = spec.partial_mean_coord0(q).unwrap();
        assert!((pm - acc).abs() < 1e-4, "closed form {pm} vs quadrature {acc}");
    }
}
