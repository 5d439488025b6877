//! Bias-floor and signal arithmetic: how much mean shift an ε-truncation can
//! buy against a law with bounded directional p-th moments, and what sample
//! sizes the tests need once that floor is subtracted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ustat::block_count;

/// The maximal truncation-induced mean shift γ = 2·ν·ε^{1−1/p}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BiasFloor {
    pub gamma: f64,
    pub p_used: f64,
    pub nu_used: f64,
    pub epsilon: f64,
}

/// Separation α together with the part of it surviving worst-case truncation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignalBudget {
    pub alpha: f64,
    /// Effective signal β = max(0, α − γ).
    pub beta: f64,
    pub gamma: f64,
}

pub fn bias_floor(nu: f64, epsilon: f64, p: f64) -> Result<BiasFloor> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("nu must be finite and >= 0, got {nu}")));
    }
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0, 1/2], got {epsilon}"
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    let gamma = if p.is_infinite() {
        // Exponent 1 − 1/p -> 1 as p -> infinity.
        2.0 * nu * epsilon
    } else {
        2.0 * nu * epsilon.powf(1.0 - 1.0 / p)
    };
    Ok(BiasFloor { gamma, p_used: p, nu_used: nu, epsilon })
}

/// Minimize the bias floor over integer p for a sub-Gaussian law with
/// parameter σ, using the moment growth ν_p ≤ σ√p. Returns `(p*, floor)`.
pub fn subgaussian_floor(sigma: f64, epsilon: f64) -> Result<(u32, f64)> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2], got {epsilon}"
        )));
    }
    let p_max = (10.0 * (1.0 / epsilon).ln()).ceil().max(1.0) as u32;
    let mut best = (1u32, f64::INFINITY);
    for p in 1..=p_max {
        let value = 2.0 * sigma * (p as f64).sqrt() * epsilon.powf(1.0 - 1.0 / p as f64);
        if value < best.1 {
            best = (p, value);
        }
    }
    if sigma == 0.0 {
        best.1 = 0.0;
    }
    Ok(best)
}

pub fn effective_signal(alpha: f64, floor: &BiasFloor) -> Result<SignalBudget> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok(SignalBudget {
        alpha,
        beta: (alpha - floor.gamma).max(0.0),
        gamma: floor.gamma,
    })
}

/// Sample size for the constant-error test: ⌈max{2, C·‖Σ‖·√d/(α−2γ)²}⌉.
pub fn required_n_const(
    sigma_opnorm: f64,
    d: usize,
    alpha: f64,
    gamma: f64,
    c: f64,
) -> Result<usize> {
    if !(sigma_opnorm >= 0.0 && sigma_opnorm.is_finite()) {
        return Err(Error::InvalidParameter("sigma_opnorm must be finite and >= 0".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    if !(alpha > 2.0 * gamma) {
        return Err(Error::InfeasibleRegime(format!(
            "alpha = {alpha} must exceed 2*gamma = {} (detectability floor)",
            2.0 * gamma
        )));
    }
    let margin = alpha - 2.0 * gamma;
    let n = (c * sigma_opnorm * (d as f64).sqrt() / (margin * margin)).max(2.0);
    Ok(n.ceil() as usize)
}

/// Sample size for the δ-error amplified test: K(δ) blocks of the
/// constant-error size.
pub fn required_n_amplified(
    sigma_opnorm: f64,
    d: usize,
    alpha: f64,
    gamma: f64,
    delta: f64,
    c: f64,
) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1/3), got {delta}"
        )));
    }
    let per_block = required_n_const(sigma_opnorm, d, alpha, gamma, c)?;
    Ok(per_block * block_count(delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_floor_examples() {
        // 2 * 2 * 0.01^{1/2} = 0.4
        let f = bias_floor(2.0, 0.01, 2.0).unwrap();
        assert!((f.gamma - 0.4).abs() < 1e-12);

        assert_eq!(bias_floor(3.0, 0.0, 2.0).unwrap().gamma, 0.0);

        let f = bias_floor(1.0, 0.04, f64::INFINITY).unwrap();
        assert!((f.gamma - 0.08).abs() < 1e-12);
    }

    #[test]
    fn bias_floor_monotonicity() {
        let base = bias_floor(1.0, 0.01, 2.0).unwrap().gamma;
        assert!(bias_floor(1.0, 0.02, 2.0).unwrap().gamma > base);
        assert!(bias_floor(2.0, 0.01, 2.0).unwrap().gamma > base);
        // Nonincreasing in p for fixed eps < 1.
        assert!(bias_floor(1.0, 0.01, 3.0).unwrap().gamma < base);
    }

    #[test]
    fn subgaussian_floor_tracks_eps_sqrt_log_rate() {
        for eps in [1e-2, 1e-4, 1e-6] {
            let (_, value) = subgaussian_floor(1.0, eps).unwrap();
            let rate = eps * (1.0f64 / eps).ln().sqrt();
            let ratio = value / rate;
            assert!((1.0..=6.0).contains(&ratio), "eps {eps}: ratio {ratio}");
        }
    }

    #[test]
    fn subgaussian_floor_edge_cases() {
        assert_eq!(subgaussian_floor(0.0, 0.01).unwrap().1, 0.0);
        let big = subgaussian_floor(1.0, 0.25).unwrap().1;
        let small = subgaussian_floor(1.0, 0.01).unwrap().1;
        assert!(big > small);
    }

    #[test]
    fn subgaussian_floor_is_grid_minimum() {
        let eps = 0.003;
        let (p_star, value) = subgaussian_floor(1.0, eps).unwrap();
        let p_max = (10.0 * (1.0f64 / eps).ln()).ceil() as u32;
        assert!(p_star <= p_max);
        for p in 1..=p_max {
            let candidate = bias_floor((p as f64).sqrt(), eps, p as f64).unwrap().gamma;
            assert!(value <= candidate + 1e-15, "p={p}");
        }
    }

    #[test]
    fn effective_signal_examples() {
        let f = BiasFloor { gamma: 0.1, p_used: 2.0, nu_used: 1.0, epsilon: 0.01 };
        assert!((effective_signal(0.5, &f).unwrap().beta - 0.4).abs() < 1e-12);

        let f = BiasFloor { gamma: 0.2, p_used: 2.0, nu_used: 1.0, epsilon: 0.01 };
        assert_eq!(effective_signal(0.1, &f).unwrap().beta, 0.0);

        // Boundary of the testable regime: alpha = 2 gamma gives beta = gamma.
        let f = BiasFloor { gamma: 0.15, p_used: 2.0, nu_used: 1.0, epsilon: 0.01 };
        assert!((effective_signal(0.3, &f).unwrap().beta - 0.15).abs() < 1e-12);
    }

    #[test]
    fn required_n_const_arithmetic() {
        // ceil(1 * 1 * 10 / 0.09) = 112
        assert_eq!(required_n_const(1.0, 100, 0.5, 0.1, 1.0).unwrap(), 112);
        assert!(matches!(
            required_n_const(1.0, 100, 0.2, 0.1, 1.0),
            Err(Error::InfeasibleRegime(_))
        ));
    }

    #[test]
    fn required_n_follows_sqrt_d_law() {
        let n1 = required_n_const(1.0, 25, 0.5, 0.0, 4.0).unwrap();
        let n4 = required_n_const(1.0, 100, 0.5, 0.0, 4.0).unwrap();
        let ratio = n4 as f64 / n1 as f64;
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn amplified_n_composition_and_log_law() {
        let base = required_n_const(1.0, 10, 0.5, 0.0, 1.0).unwrap();
        let amp = required_n_amplified(1.0, 10, 0.5, 0.0, 1.0 / 3.0 - 1e-9, 1.0).unwrap();
        assert_eq!(amp, base * block_count(1.0 / 3.0 - 1e-9));

        let a = required_n_amplified(1.0, 10, 0.5, 0.0, 1e-3, 1.0).unwrap();
        let b = required_n_amplified(1.0, 10, 0.5, 0.0, 1e-6, 1.0).unwrap();
        assert!(b as f64 <= 2.2 * a as f64, "a={a} b={b}");

        assert!(required_n_amplified(1.0, 10, 0.1, 0.2, 0.1, 1.0).is_err());
    }
}
