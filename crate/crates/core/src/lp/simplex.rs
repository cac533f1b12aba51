//! Dense two-phase tableau simplex.
//!
//! Pricing is Dantzig's largest reduced cost until a run of degenerate
//! pivots is seen, after which Bland's lowest-index rule is used for the
//! rest of the phase; Bland's rule cannot cycle, so the solver terminates.
//!
//! Rows with negative right-hand side are negated so that one artificial
//! column per row gives an initial basis. Artificial columns stay in the
//! tableau during phase 2 but may not re-enter; their reduced costs yield
//! the dual `y = c_B B^-1`.

use super::{LPSolution, LpStatus, StandardFormLP};
use crate::error::Result;

/// Reduced cost needed to enter the basis.
const ENTER_TOL: f64 = 1e-10;
/// Smallest admissible pivot element.
const PIVOT_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots tolerated before switching to Bland.
const DEGENERATE_STREAK: usize = 50;

struct Tableau {
    m: usize,
    width: usize,
    /// `(m + 1) x width`; row `m` holds reduced costs and `-z`.
    t: Vec<f64>,
    basis: Vec<usize>,
    pivot_row: Vec<f64>,
    nonzero: Vec<usize>,
}

impl Tableau {
    fn new(lp: &StandardFormLP, sign: &[f64]) -> Self {
        let (m, n) = (lp.num_rows, lp.num_cols);
        let width = n + m + 1;
        let mut t = vec![0.0; (m + 1) * width];
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            for (dst, a) in row[..n].iter_mut().zip(lp.row(i)) {
                *dst = sign[i] * a;
            }
            row[n + i] = 1.0;
            row[width - 1] = sign[i] * lp.b[i];
        }
        Self {
            m,
            width,
            t,
            basis: (n..n + m).collect(),
            pivot_row: vec![0.0; width],
            nonzero: Vec::with_capacity(width),
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn objective_row(&mut self) -> &mut [f64] {
        let (m, w) = (self.m, self.width);
        &mut self.t[m * w..(m + 1) * w]
    }

    /// Sets the objective row for cost vector `c` (length `n + m`).
    fn price(&mut self, c: &[f64]) {
        let (m, w) = (self.m, self.width);
        let mut obj = vec![0.0; w];
        obj[..c.len()].copy_from_slice(c);
        for i in 0..m {
            let cb = c[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (o, v) in obj.iter_mut().zip(&self.t[i * w..(i + 1) * w]) {
                *o -= cb * v;
            }
        }
        self.objective_row().copy_from_slice(&obj);
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(r, e);
        self.nonzero.clear();
        for j in 0..w {
            let v = self.t[r * w + j] * inv;
            self.pivot_row[j] = v;
            if v != 0.0 {
                self.nonzero.push(j);
            }
        }
        self.pivot_row[e] = 1.0;
        let sparse = self.nonzero.len() * 3 < w;
        for i in 0..=self.m {
            let row = &mut self.t[i * w..(i + 1) * w];
            if i == r {
                row.copy_from_slice(&self.pivot_row);
                continue;
            }
            let f = row[e];
            if f == 0.0 {
                continue;
            }
            if sparse {
                for &j in &self.nonzero {
                    row[j] -= f * self.pivot_row[j];
                }
            } else {
                for (x, p) in row.iter_mut().zip(&self.pivot_row) {
                    *x -= f * p;
                }
            }
            row[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Improving column among the first `limit`: lowest index under
    /// Bland, largest reduced cost otherwise.
    fn entering(&self, limit: usize, bland: bool) -> Option<usize> {
        let obj = &self.t[self.m * self.width..];
        if bland {
            return (0..limit).find(|&j| obj[j] > ENTER_TOL);
        }
        let mut best: Option<usize> = None;
        for j in 0..limit {
            if obj[j] > ENTER_TOL && best.is_none_or(|b| obj[j] > obj[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Minimum ratio; ties broken by lowest basic variable index.
    fn leaving(&self, e: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.at(i, e);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    if ratio < br - 1e-12 * br.abs().max(1.0) || (ratio <= br + 1e-12 * br.abs().max(1.0) && self.basis[i] < self.basis[bi])
                    {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Runs simplex iterations until optimal or until the objective
    /// reaches `stop_at`; returns false if unbounded.
    fn optimize(&mut self, limit: usize, stop_at: f64) -> bool {
        let mut bland = false;
        let mut streak = 0;
        while self.current_objective() < stop_at {
            let Some(e) = self.entering(limit, bland) else {
                break;
            };
            let Some(r) = self.leaving(e) else {
                return false;
            };
            if self.rhs(r) <= PIVOT_TOL {
                streak += 1;
                bland |= streak > DEGENERATE_STREAK;
            } else {
                streak = 0;
            }
            self.pivot(r, e);
        }
        true
    }

    /// Recomputes basic values as `B^-1 b` from the artificial columns,
    /// which always hold `B^-1`.
    fn restore_rhs(&mut self, n: usize, signed_b: &[f64], cost: &[f64]) {
        let (m, w) = (self.m, self.width);
        let mut z = 0.0;
        for i in 0..m {
            let row = &self.t[i * w..(i + 1) * w];
            let v: f64 = row[n..n + m].iter().zip(signed_b).map(|(a, b)| a * b).sum();
            self.t[i * w + w - 1] = v;
            z += cost[self.basis[i]] * v;
        }
        self.t[m * w + w - 1] = -z;
    }

    /// Dual simplex from a dual-feasible basis; returns false if some row
    /// stays negative with no admissible pivot (primal infeasible).
    fn dual_simplex(&mut self, limit: usize) -> bool {
        let tol = 1e-11;
        // Guards against cycling; the caller falls back to an unperturbed solve.
        for _ in 0..50 * (self.m + 1) {
            let leave = (0..self.m)
                .filter(|&i| self.rhs(i) < -tol)
                .min_by(|&a, &b| self.rhs(a).total_cmp(&self.rhs(b)));
            let Some(r) = leave else {
                return true;
            };
            let obj = &self.t[self.m * self.width..];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..limit {
                let a = self.at(r, j);
                if a >= -PIVOT_TOL {
                    continue;
                }
                let ratio = obj[j].min(0.0) / a;
                if best.is_none_or(|(_, br)| ratio < br) {
                    best = Some((j, ratio));
                }
            }
            let Some((e, _)) = best else {
                return false;
            };
            self.pivot(r, e);
        }
        false
    }

    fn current_objective(&self) -> f64 {
        -self.at(self.m, self.width - 1)
    }
}

/// Solves `max u.x s.t. A x = b, x >= 0`.
///
/// The right-hand side is first perturbed by a tiny positive amount per row
/// so that pivots are almost never degenerate; the exact `b` is restored on
/// the final basis and any resulting infeasibility is repaired with dual
/// simplex pivots. If the perturbed problem is infeasible (possible with
/// redundant equality rows) the solve is repeated without perturbation.
pub fn simplex_solve(lp: &StandardFormLP) -> Result<LPSolution> {
    match solve(lp, true) {
        Some(sol) if sol.status != LpStatus::Infeasible => Ok(sol),
        _ => Ok(solve(lp, false).unwrap_or_else(|| failed(LpStatus::Infeasible))),
    }
}

/// Relative size of the right-hand-side perturbation.
const PERTURBATION: f64 = 1e-7;

/// Returns `None` when restoring the exact right-hand side leaves the basis
/// primal infeasible and dual simplex cannot repair it.
fn solve(lp: &StandardFormLP, perturb: bool) -> Option<LPSolution> {
    let (m, n) = (lp.num_rows, lp.num_cols);
    let sign: Vec<f64> = lp.b.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut tab = Tableau::new(lp, &sign);
    let b_scale = lp.b.iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
    if perturb {
        // Deterministic, distinct per row.
        for i in 0..m {
            let xi = 1.0 + ((i * 7919) % 997) as f64 / 997.0;
            let w = tab.width;
            tab.t[i * w + w - 1] += PERTURBATION * b_scale * xi;
        }
    }

    // Phase 1: maximize minus the sum of artificials.
    let mut c1 = vec![0.0; n + m];
    for c in &mut c1[n..] {
        *c = -1.0;
    }
    tab.price(&c1);
    let feasible_tol = 1e-9 * b_scale;
    // Any zero-infeasibility basis will do, so stop as soon as one is found.
    tab.optimize(n + m, -0.1 * feasible_tol);
    if -tab.current_objective() > feasible_tol {
        return Some(failed(LpStatus::Infeasible));
    }
    // Drive remaining artificials out; rows with no usable pivot are
    // redundant and keep their artificial at zero.
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let pick = (0..n)
            .map(|j| (j, tab.at(r, j).abs()))
            .filter(|&(_, a)| a > 1e-9)
            .max_by(|x, y| x.1.total_cmp(&y.1));
        if let Some((j, _)) = pick {
            tab.pivot(r, j);
        }
    }

    // Phase 2 on the original objective.
    let mut c2 = vec![0.0; n + m];
    c2[..n].copy_from_slice(&lp.u);
    tab.price(&c2);
    if !tab.optimize(n, f64::INFINITY) {
        return Some(failed(LpStatus::Unbounded));
    }
    if perturb {
        let signed_b: Vec<f64> = lp.b.iter().zip(&sign).map(|(b, s)| b * s).collect();
        tab.restore_rhs(n, &signed_b, &c2);
        if !tab.dual_simplex(n) {
            return None;
        }
        // Reduced costs are untouched by the restore, so this is normally a no-op.
        if !tab.optimize(n, f64::INFINITY) {
            return Some(failed(LpStatus::Unbounded));
        }
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let obj_row = &tab.t[m * tab.width..];
    let y: Vec<f64> = (0..m).map(|i| -sign[i] * obj_row[n + i]).collect();
    let objective = lp.u.iter().zip(&x).map(|(u, x)| u * x).sum();
    let dual_objective = lp.b.iter().zip(&y).map(|(b, y)| b * y).sum();
    Some(LPSolution {
        status: LpStatus::Optimal,
        x,
        y,
        objective,
        dual_objective,
    })
}

fn failed(status: LpStatus) -> LPSolution {
    LPSolution {
        status,
        x: Vec::new(),
        y: Vec::new(),
        objective: f64::NAN,
        dual_objective: f64::NAN,
    }
}
