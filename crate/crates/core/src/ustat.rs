//! The order-2 U-statistic F, its variance bounds, the constant-error test
//! 1{F > α²/4}, and majority-vote amplification over sample blocks.

use serde::{Deserialize, Serialize};

use crate::dist::SampleBatch;
use crate::error::{Error, Result};

/// Outcome of a single test invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestVerdict {
    pub decision: Decision,
    /// F for the plain test; the rejecting vote share for the amplified test.
    pub statistic: f64,
    pub threshold: f64,
    pub n_used: usize,
    pub meta: VerdictMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    RejectNull,
    AcceptNull,
}

/// Parameter echo attached to every verdict for provenance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerdictMeta {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub blocks: Option<usize>,
    pub note: Option<String>,
}

fn decide(statistic: f64, threshold: f64) -> Decision {
    // Strict inequality: ties resolve to AcceptNull.
    if statistic > threshold {
        Decision::RejectNull
    } else {
        Decision::AcceptNull
    }
}

/// F = (n choose 2)^{-1} Σ_{i<j} ⟨X_i, X_j⟩, evaluated through the identity
/// F = (‖Σ_i X_i‖² − Σ_i ‖X_i‖²) / (n(n−1)) in O(n·d) time, O(d) space.
pub fn u_statistic(batch: &SampleBatch) -> Result<f64> {
    let n = batch.n();
    if n < 2 {
        return Err(Error::Arity(format!("u_statistic needs n >= 2, got {n}")));
    }
    let d = batch.dim();
    let mut sum = vec![0.0f64; d];
    let mut sq = 0.0f64;
    for row in batch.rows() {
        for (s, x) in sum.iter_mut().zip(row) {
            *s += x;
        }
        sq += row.iter().map(|x| x * x).sum::<f64>();
    }
    let total: f64 = sum.iter().map(|s| s * s).sum();
    Ok((total - sq) / (n as f64 * (n as f64 - 1.0)))
}

/// Reference O(n²·d) evaluation by pairwise enumeration; used to validate the
/// fast identity.
pub fn u_statistic_pairwise(batch: &SampleBatch) -> Result<f64> {
    let n = batch.n();
    if n < 2 {
        return Err(Error::Arity(format!("u_statistic needs n >= 2, got {n}")));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += batch
                .row(i)
                .iter()
                .zip(batch.row(j))
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }
    Ok(acc / (n as f64 * (n as f64 - 1.0) / 2.0))
}

/// Var(F) ≤ (4/n)·⟨μ, Σμ⟩ + (4/(n(n−1)))·tr(Σ²).
pub fn variance_upper_bound(cov_quadform: f64, trace_cov_sq: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Arity(format!("variance bound needs n >= 2, got {n}")));
    }
    if cov_quadform < 0.0 || trace_cov_sq < 0.0 {
        return Err(Error::InvalidParameter(
            "quadratic form and trace inputs must be nonnegative".into(),
        ));
    }
    let nf = n as f64;
    Ok(4.0 / nf * cov_quadform + 4.0 / (nf * (nf - 1.0)) * trace_cov_sq)
}

/// Parameter-level relaxation of the variance bound under ε-truncation:
/// 16·(‖Σ_P‖‖μ_{P_S}‖²/n + d‖Σ_P‖²/n²). The constant absorbs the 4× covariance
/// inflation of the truncated law and tr(Σ²) ≤ d‖Σ‖².
pub fn relaxed_variance_bound(
    sigma_opnorm: f64,
    mu_ps_norm: f64,
    d: usize,
    n: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Arity(format!("variance bound needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(16.0
        * (sigma_opnorm * mu_ps_norm * mu_ps_norm / nf
            + d as f64 * sigma_opnorm * sigma_opnorm / (nf * nf)))
}

/// The constant-error test T = 1{F > α²/4}.
pub fn const_error_test(batch: &SampleBatch, alpha: f64) -> Result<TestVerdict> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let f = u_statistic(batch)?;
    let threshold = alpha * alpha / 4.0;
    Ok(TestVerdict {
        decision: decide(f, threshold),
        statistic: f,
        threshold,
        n_used: batch.n(),
        meta: VerdictMeta { alpha: Some(alpha), ..Default::default() },
    })
}

/// Smallest odd number of blocks K with exp(−K/18) ≤ δ, i.e. the smallest odd
/// integer ≥ 18·ln(1/δ); odd K rules out vote ties.
pub fn block_count(delta: f64) -> usize {
    let k = (18.0 * (1.0 / delta).ln()).ceil().max(1.0) as usize;
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

/// Majority vote of the constant-error test over K(δ) contiguous equal
/// blocks; the statistic is the rejecting vote share against threshold 1/2.
pub fn amplified_test(batch: &SampleBatch, alpha: f64, delta: f64) -> Result<TestVerdict> {
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1/3), got {delta}"
        )));
    }
    let k = block_count(delta);
    let n = batch.n();
    if n < 2 * k {
        return Err(Error::Arity(format!(
            "amplified test needs n >= 2K = {} for K = {k} blocks, got n = {n}",
            2 * k
        )));
    }
    let base = n / k;
    let extra = n % k;
    let mut rejects = 0usize;
    let mut start = 0usize;
    for b in 0..k {
        // The first `extra` blocks absorb the remainder one row each.
        let len = base + usize::from(b < extra);
        let block = batch.slice(start, start + len);
        start += len;
        if const_error_test(&block, alpha)?.decision == Decision::RejectNull {
            rejects += 1;
        }
    }
    let share = rejects as f64 / k as f64;
    Ok(TestVerdict {
        decision: decide(share, 0.5),
        statistic: share,
        threshold: 0.5,
        n_used: n,
        meta: VerdictMeta {
            alpha: Some(alpha),
            blocks: Some(k),
            ..Default::default()
        },
    })
}
