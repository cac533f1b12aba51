use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::maxmin_refined;
use crate::momdp::TabularMOMDP;

/// Max-min optimum of a reward-scaled model, reported in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub scaling: Vec<f64>,
    /// Max-min value of the scaled problem.
    pub scaled_value: f64,
    /// Unscaled `J(pi)` of the refined optimal occupancy.
    pub returns: Vec<f64>,
}

/// Identity, then each objective boosted by 2 and by 4 (for `K = 2` this is
/// five scalings).
pub fn default_scalings(k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0; k]];
    for boost in [2.0, 4.0] {
        for j in 0..k {
            let mut s = vec![1.0; k];
            s[j] = boost;
            out.push(s);
        }
    }
    out
}

/// Solves the max-min problem for each scaled reward model. The refinement
/// stage makes every point Pareto-optimal.
pub fn pareto_sweep(model: &TabularMOMDP, scalings: &[Vec<f64>], slack: f64) -> Result<Vec<ParetoPoint>> {
    scalings
        .iter()
        .map(|s| {
            if s.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("scalings must be positive, got {s:?}")));
            }
            let scaled = model.with_scaled_rewards(s)?;
            let sol = maxmin_refined(&scaled, slack)?;
            let returns = sol.returns.iter().zip(s).map(|(r, c)| r / c).collect();
            Ok(ParetoPoint {
                scaling: s.clone(),
                scaled_value: sol.value,
                returns,
            })
        })
        .collect()
}

/// True if `a` is at least `b` everywhere and better somewhere by `tol`.
pub fn dominates(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x >= y - tol) && a.iter().zip(b).any(|(x, y)| *x > y + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::random_momdp;
    use crate::lp::maxmin_exact;

    #[test]
    fn identity_point_reproduces_lp_value() {
        let m = random_momdp(11, 5, 3, 2, 0.9).unwrap();
        let pts = pareto_sweep(&m, &default_scalings(2), 1e-9).unwrap();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0].scaled_value, maxmin_exact(&m).unwrap().value);
        for a in &pts {
            for b in &pts {
                assert!(!dominates(&a.returns, &b.returns, 1e-7));
            }
        }
    }
}
