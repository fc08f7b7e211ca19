//! Maximin mixtures over a finite nonnegative payoff matrix.
//!
//! Solves max_{ν ∈ simplex} min_j (G ν)_j for G with rows indexed by the
//! adversary (opposing hypotheses) and columns by actions. All entries are
//! nonnegative (they are KL divergences), so the game value is positive
//! whenever no row is identically zero, and the problem reduces to the
//! classic covering/packing pair:
//!
//!   covering:  min 1ᵀy   s.t. G y ≥ 1, y ≥ 0     (y = ν / value)
//!   packing:   max 1ᵀz   s.t. Gᵀ z ≤ 1, z ≥ 0
//!
//! The packing program starts feasible at z = 0, so a dense tableau simplex
//! with Bland's rule solves it without a phase one; the covering solution is
//! read off the optimal dual prices and normalized into ν. Strong duality is
//! verified numerically to 1e-9 before returning.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

/// Solution of the maximin program.
#[derive(Debug, Clone)]
pub struct MaximinSolution {
    /// Game value: the guaranteed minimum row payoff.
    pub value: f64,
    /// Optimal mixed strategy over columns (sums to one).
    pub distribution: Vec<f64>,
}

/// Solve max_ν min_row (G ν) over the column simplex.
pub fn maximin_distribution(g: &[Vec<f64>]) -> Result<MaximinSolution> {
    let m = g.len();
    if m == 0 {
        return Err(Error::Lp("payoff matrix has no rows".into()));
    }
    let n = g[0].len();
    if n == 0 || g.iter().any(|row| row.len() != n) {
        return Err(Error::Lp("payoff matrix is empty or ragged".into()));
    }
    for row in g {
        for &v in row {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Lp(format!(
                    "payoff entries must be finite and nonnegative, got {v}"
                )));
            }
        }
    }
    if let Some(bad) = g.iter().position(|row| row.iter().all(|&v| v <= 0.0)) {
        return Err(Error::Lp(format!(
            "adversary row {bad} has zero payoff under every column; the game value is 0"
        )));
    }

    // Packing tableau: n constraint rows over m z-variables plus n slacks.
    let cols = m + n + 1; // last column is the rhs
    let mut tab: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut row = vec![0.0; cols];
            for (j, grow) in g.iter().enumerate() {
                row[j] = grow[a];
            }
            row[m + a] = 1.0;
            row[cols - 1] = 1.0;
            row
        })
        .collect();
    // Reduced-cost row; rhs cell accumulates the negated objective value.
    let mut obj = vec![0.0; cols];
    for slot in obj.iter_mut().take(m) {
        *slot = 1.0;
    }
    let mut basis: Vec<usize> = (m..m + n).collect();

    for _ in 0..MAX_PIVOTS {
        // Bland: the lowest-index column with a positive reduced cost.
        let Some(entering) = (0..m + n).find(|&j| obj[j] > PIVOT_TOL) else {
            break;
        };
        // Ratio test; Bland ties resolve to the smallest basic variable.
        let mut leaving: Option<usize> = None;
        let mut best = f64::INFINITY;
        for (i, row) in tab.iter().enumerate() {
            let coeff = row[entering];
            if coeff > PIVOT_TOL {
                let ratio = row[cols - 1] / coeff;
                let take = match leaving {
                    None => true,
                    Some(l) => {
                        ratio < best - PIVOT_TOL
                            || ((ratio - best).abs() <= PIVOT_TOL && basis[i] < basis[l])
                    }
                };
                if take {
                    best = ratio;
                    leaving = Some(i);
                }
            }
        }
        let Some(pivot_row) = leaving else {
            return Err(Error::Lp(
                "packing program unbounded; an adversary row has no separating column".into(),
            ));
        };
        // Pivot.
        let pv = tab[pivot_row][entering];
        for v in tab[pivot_row].iter_mut() {
            *v /= pv;
        }
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            if i != pivot_row {
                let factor = tab[i][entering];
                if factor != 0.0 {
                    for j in 0..cols {
                        tab[i][j] -= factor * tab[pivot_row][j];
                    }
                }
            }
        }
        let factor = obj[entering];
        if factor != 0.0 {
            for j in 0..cols {
                obj[j] -= factor * tab[pivot_row][j];
            }
        }
        basis[pivot_row] = entering;
    }
    if (0..m + n).any(|j| obj[j] > PIVOT_TOL) {
        return Err(Error::Lp("simplex did not converge".into()));
    }

    // Covering solution from the dual prices on the slack columns.
    let y: Vec<f64> = (0..n).map(|a| (-obj[m + a]).max(0.0)).collect();
    let packing_value = -obj[cols - 1];
    let covering_value: f64 = y.iter().sum();
    if covering_value <= 0.0 {
        return Err(Error::Lp("degenerate covering solution".into()));
    }
    if (covering_value - packing_value).abs() > FEAS_TOL * (1.0 + packing_value.abs()) {
        return Err(Error::Lp(format!(
            "duality gap {:.3e} exceeds tolerance",
            (covering_value - packing_value).abs()
        )));
    }
    let value = 1.0 / covering_value;
    let distribution: Vec<f64> = y.iter().map(|&v| v / covering_value).collect();

    // Verify primal feasibility of ν at the claimed value.
    let sum: f64 = distribution.iter().sum();
    if (sum - 1.0).abs() > FEAS_TOL {
        return Err(Error::Lp(format!("strategy mass {sum} differs from 1")));
    }
    for (j, row) in g.iter().enumerate() {
        let payoff: f64 = row.iter().zip(&distribution).map(|(a, b)| a * b).sum();
        if payoff < value - FEAS_TOL * (1.0 + value) {
            return Err(Error::Lp(format!(
                "row {j} payoff {payoff:.12e} below claimed value {value:.12e}"
            )));
        }
    }
    Ok(MaximinSolution {
        value,
        distribution,
    })
}
