//! Linear-programming oracle: standard-form LPs, a two-phase simplex
//! solver, and the occupancy-measure formulation of the max-min problem.
//!
//! Standard form is `max u.x  s.t.  A x = b, x >= 0`.

mod maxmin;
mod simplex;
mod text;

pub use maxmin::{build_p0_lp, build_refinement_lp, maxmin_exact, maxmin_refined, MaxMinSolution};
pub use simplex::simplex_solve;
pub use text::{export_lp, parse_lp};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLP {
    pub num_rows: usize,
    pub num_cols: usize,
    /// Row-major `num_rows x num_cols`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

impl StandardFormLP {
    pub fn new(num_rows: usize, num_cols: usize, a: Vec<f64>, b: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if a.len() != num_rows * num_cols || b.len() != num_rows || u.len() != num_cols {
            return Err(Error::Dimension(format!(
                "LP shapes: A has {} entries, b {}, u {} for {num_rows}x{num_cols}",
                a.len(),
                b.len(),
                u.len()
            )));
        }
        Ok(Self {
            num_rows,
            num_cols,
            a,
            b,
            u,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.num_cols..(i + 1) * self.num_cols]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.num_cols + j]
    }

    /// Largest `|A x - b|` over rows.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        (0..self.num_rows)
            .map(|i| (self.row(i).iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b[i]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Primal/dual pair. For non-optimal statuses `x` and `y` are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// Equality-constraint multipliers: `A^T y >= u` at optimum.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
}
