//! A small dense two-phase primal simplex solver, sized for the
//! Chebyshev-center problems this crate produces (a few hundred constraints,
//! up to ~100 variables). Bland's rule guarantees termination.

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

/// Minimize `c·x` subject to `A x <= b`, `x >= 0`.
///
/// `a` is row-major with `b.len()` rows of `c.len()` entries. Returns the
/// optimal `x`. Errors on infeasible or unbounded programs.
pub fn solve_lp_min(c: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let m = b.len();
    let n = c.len();
    if a.len() != m * n {
        return Err(Error::InvalidParameter("LP matrix shape mismatch".into()));
    }

    // Columns: n structural, m slacks, up to m artificials, then RHS.
    let n_art = b.iter().filter(|&&bi| bi < 0.0).count();
    let total = n + m + n_art;
    let width = total + 1;
    let mut t = vec![0.0f64; (m + 1) * width];
    let mut basis = vec![0usize; m];

    let mut art = n + m;
    for i in 0..m {
        let neg = b[i] < 0.0;
        let sign = if neg { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * width + j] = sign * a[i * n + j];
        }
        t[i * width + n + i] = sign; // slack
        t[i * width + total] = sign * b[i];
        if neg {
            t[i * width + art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }

    // Phase 1: minimize the sum of artificials. Reduced-cost row = -(sum of
    // rows whose basic variable is artificial).
    if n_art > 0 {
        let obj = m * width;
        for j in 0..width {
            t[obj + j] = 0.0;
        }
        for i in 0..m {
            if basis[i] >= n + m {
                for j in 0..width {
                    t[obj + j] -= t[i * width + j];
                }
            }
        }
        // Artificial columns themselves price to zero in the phase-1 row.
        for j in (n + m)..total {
            t[obj + j] = 0.0;
        }
        simplex(&mut t, &mut basis, m, width, total)?;
        if t[obj + total] < -TOL {
            return Err(Error::InfeasibleRegime("linear program infeasible".into()));
        }
        // Drive lingering zero-level artificials out of the basis.
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| t[i * width + j].abs() > TOL) {
                    pivot(&mut t, m, width, i, j);
                    basis[i] = j;
                }
            }
        }
    }

    // Phase 2: the real objective, priced out against the current basis.
    let obj = m * width;
    for j in 0..width {
        t[obj + j] = 0.0;
    }
    for (j, &cj) in c.iter().enumerate() {
        t[obj + j] = cj;
    }
    for i in 0..m {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                t[obj + j] -= cb * t[i * width + j];
            }
        }
    }
    // Artificials may never re-enter.
    for j in (n + m)..total {
        t[obj + j] = f64::INFINITY;
    }
    simplex(&mut t, &mut basis, m, width, n + m)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i * width + total];
        }
    }
    Ok(x)
}

/// Bland's-rule primal simplex on an in-place tableau. `cols` limits the
/// entering-variable search (used to exclude artificial columns).
fn simplex(t: &mut [f64], basis: &mut [usize], m: usize, width: usize, cols: usize) -> Result<()> {
    let total = width - 1;
    let obj = m * width;
    loop {
        // Entering: smallest index with a negative reduced cost.
        let Some(enter) = (0..cols).find(|&j| t[obj + j] < -TOL) else {
            return Ok(());
        };
        // Leaving: minimum ratio, ties broken by smallest basis index.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let aij = t[i * width + enter];
            if aij > TOL {
                let ratio = t[i * width + total] / aij;
                let better = ratio < best - TOL
                    || (ratio < best + TOL && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(Error::InvalidParameter("linear program unbounded".into()));
        };
        pivot(t, m, width, leave, enter);
        basis[leave] = enter;
    }
}

fn pivot(t: &mut [f64], m: usize, width: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for j in 0..width {
        t[row * width + j] /= p;
    }
    for i in 0..=m {
        if i == row {
            continue;
        }
        let factor = t[i * width + col];
        if factor != 0.0 && factor.is_finite() {
            for j in 0..width {
                t[i * width + j] -= factor * t[row * width + j];
            }
            t[i * width + col] = 0.0;
        }
    }
}

/// Minimize `max_j |⟨u, v_j⟩ − m_j|` over u ∈ ℝ^d as the linear program
/// `min t s.t. −t ≤ ⟨u, v_j⟩ − m_j ≤ t`, with u split into positive parts.
/// Returns `(u*, objective)`.
pub fn chebyshev_center(directions: &[Vec<f64>], targets: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = directions.len();
    if m == 0 || m != targets.len() {
        return Err(Error::InvalidParameter("directions/targets mismatch".into()));
    }
    let d = directions[0].len();
    // Substituting t = t' + T with T > max|m_j| keeps every right-hand side
    // positive, so the slack basis is feasible and phase 1 is never needed.
    // t' is free and split like u.
    let shift = targets.iter().fold(0.0f64, |acc, m| acc.max(m.abs())) + 1.0;
    let n = 2 * d + 2; // u+, u-, t'+, t'-
    let mut c = vec![0.0; n];
    c[2 * d] = 1.0;
    c[2 * d + 1] = -1.0;
    let mut a = vec![0.0; 2 * m * n];
    let mut b = vec![0.0; 2 * m];
    for (j, (v, &mj)) in directions.iter().zip(targets).enumerate() {
        if v.len() != d {
            return Err(Error::InvalidParameter("ragged direction vectors".into()));
        }
        // <u, v_j> - t' <= m_j + T
        for k in 0..d {
            a[j * n + k] = v[k];
            a[j * n + d + k] = -v[k];
        }
        a[j * n + 2 * d] = -1.0;
        a[j * n + 2 * d + 1] = 1.0;
        b[j] = mj + shift;
        // -<u, v_j> - t' <= -m_j + T
        let row = (m + j) * n;
        for k in 0..d {
            a[row + k] = -v[k];
            a[row + d + k] = v[k];
        }
        a[row + 2 * d] = -1.0;
        a[row + 2 * d + 1] = 1.0;
        b[m + j] = -mj + shift;
    }
    let x = solve_lp_min(&c, &a, &b)?;
    let u: Vec<f64> = (0..d).map(|k| x[k] - x[d + k]).collect();
    Ok((u, x[2 * d] - x[2 * d + 1] + shift))
}
