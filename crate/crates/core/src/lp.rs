//! Dense tableau simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0`.
//!
//! The starting basis is the slack basis, so the first solve needs `b ≥ 0`.
//! Rows added after an optimal solve may be violated by the current vertex;
//! those are repaired with dual simplex pivots from the existing basis, which
//! is what makes lazy constraint generation cheap.
//!
//! Right-hand sides can be changed after a solve; the basis stays dual
//! feasible and is repaired the same way.
//!
//! Entering variables follow Dantzig's rule until a run of degenerate pivots,
//! then Bland's smallest-index rule until the objective moves again. Bland's
//! rule cannot cycle, so the combination terminates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    /// Primal feasibility tolerance on right-hand sides.
    pub feas_tol: f64,
    /// Optimality tolerance on reduced profits.
    pub opt_tol: f64,
    /// Pivot budget per solve is `iteration_factor × (columns)`.
    pub iteration_factor: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_streak: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            iteration_factor: 50,
            degenerate_streak: 20,
        }
    }
}

const PIVOT_TOL: f64 = 1e-11;
const ZERO_TOL: f64 = 1e-15;

/// A simplex tableau that owns its constraint rows.
#[derive(Debug, Clone)]
pub struct Simplex {
    n_struct: usize,
    cost: Vec<f64>,
    orig_rhs: Vec<f64>,
    /// Coefficients over structural then slack columns.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced profits `c_j − c_Bᵀ B⁻¹ a_j`.
    profit: Vec<f64>,
    value: f64,
    basis: Vec<usize>,
    opts: LpOptions,
    pivots: usize,
}

impl Simplex {
    /// Starts a maximization of `objective · x` with no constraints.
    pub fn new(objective: &[f64], opts: LpOptions) -> Self {
        Self {
            n_struct: objective.len(),
            cost: objective.to_vec(),
            orig_rhs: Vec::new(),
            rows: Vec::new(),
            rhs: Vec::new(),
            profit: objective.to_vec(),
            value: 0.0,
            basis: Vec::new(),
            opts,
            pivots: 0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_cols(&self) -> usize {
        self.profit.len()
    }

    /// Total pivots performed so far.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Adds `Σ coef·x[col] ≤ rhs` given as sparse `(col, coef)` pairs over
    /// structural columns. The row is expressed in the current basis, so it
    /// may be added before or after a solve.
    pub fn add_le(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        self.orig_rhs.push(rhs);
        let slack = self.n_cols();
        for row in &mut self.rows {
            row.push(0.0);
        }
        self.profit.push(0.0);
        let mut row = vec![0.0; slack + 1];
        for &(c, v) in coeffs {
            debug_assert!(c < self.n_struct);
            row[c] += v;
        }
        row[slack] = 1.0;
        let mut b = rhs;
        for (i, &k) in self.basis.iter().enumerate() {
            let f = row[k];
            if f != 0.0 {
                axpy_row(&mut row, -f, &self.rows[i]);
                b -= f * self.rhs[i];
                row[k] = 0.0;
            }
        }
        self.rows.push(row);
        self.rhs.push(b);
        self.basis.push(slack);
    }

    /// Re-optimizes from the current basis.
    pub fn solve(&mut self) -> Result<()> {
        let budget = self.opts.iteration_factor * self.n_cols().max(1);
        let start = self.pivots;
        let tol = self.opts.feas_tol;
        if self.rhs.iter().any(|&b| b < -tol) {
            if self.profit.iter().any(|&r| r > self.opts.opt_tol) {
                return Err(Error::NonConvergence {
                    solver: "simplex",
                    iterations: 0,
                    diagnostics: "basis is neither primal nor dual feasible".into(),
                });
            }
            self.dual_phase(start, budget)?;
        }
        self.primal_phase(start, budget)
    }

    fn over_budget(&self, start: usize, budget: usize) -> Result<()> {
        if self.pivots - start >= budget {
            let infeas = self.rhs.iter().fold(0.0f64, |m, &b| m.max(-b));
            let best = self.profit.iter().fold(0.0f64, |m, &r| m.max(r));
            return Err(Error::NonConvergence {
                solver: "simplex",
                iterations: self.pivots - start,
                diagnostics: format!(
                    "objective {:.6e}, max infeasibility {:.3e}, max reduced profit {:.3e}, {} rows",
                    self.value,
                    infeas,
                    best,
                    self.rows.len()
                ),
            });
        }
        Ok(())
    }

    fn primal_phase(&mut self, start: usize, budget: usize) -> Result<()> {
        let mut streak = 0usize;
        loop {
            let bland = streak >= self.opts.degenerate_streak;
            let entering = if bland {
                self.profit.iter().position(|&r| r > self.opts.opt_tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for (j, &r) in self.profit.iter().enumerate() {
                    if r > self.opts.opt_tol && best.is_none_or(|(_, b)| r > b) {
                        best = Some((j, r));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(s) = entering else { return Ok(()) };
            self.over_budget(start, budget)?;

            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[s];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            if ratio < best - 1e-12 {
                                true
                            } else if ratio <= best + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    a > self.rows[l][s]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::NonConvergence {
                    solver: "simplex",
                    iterations: self.pivots - start,
                    diagnostics: format!("objective unbounded along column {s}"),
                });
            };
            if ratio <= 1e-14 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, s);
        }
    }

    fn dual_phase(&mut self, start: usize, budget: usize) -> Result<()> {
        let tol = self.opts.feas_tol;
        let mut streak = 0usize;
        loop {
            let bland = streak >= self.opts.degenerate_streak;
            let mut leave: Option<(usize, f64)> = None;
            for (i, &b) in self.rhs.iter().enumerate() {
                if b < -tol {
                    let better = match leave {
                        None => true,
                        Some((l, worst)) => {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                b < worst
                            }
                        }
                    };
                    if better {
                        leave = Some((i, b));
                    }
                }
            }
            let Some((r, _)) = leave else { return Ok(()) };
            self.over_budget(start, budget)?;

            let row = &self.rows[r];
            let mut enter: Option<(usize, f64)> = None;
            for (j, &a) in row.iter().enumerate() {
                if a < -PIVOT_TOL {
                    let ratio = self.profit[j].min(0.0) / a;
                    let better = match enter {
                        None => true,
                        Some((e, best)) => {
                            if ratio < best - 1e-12 {
                                true
                            } else if ratio <= best + 1e-12 {
                                if bland {
                                    j < e
                                } else {
                                    a < row[e]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        enter = Some((j, ratio));
                    }
                }
            }
            let Some((s, ratio)) = enter else {
                return Err(Error::NonConvergence {
                    solver: "simplex",
                    iterations: self.pivots - start,
                    diagnostics: format!("row {r} is infeasible"),
                });
            };
            if ratio <= 1e-14 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, s);
        }
    }

    fn pivot(&mut self, r: usize, s: usize) {
        self.pivots += 1;
        let inv = 1.0 / self.rows[r][s];
        let mut prow = std::mem::take(&mut self.rows[r]);
        for v in prow.iter_mut() {
            *v *= inv;
            if v.abs() < ZERO_TOL {
                *v = 0.0;
            }
        }
        prow[s] = 1.0;
        let prhs = self.rhs[r] * inv;
        let nz: Vec<usize> = prow
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, _)| k)
            .collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[s];
            if f != 0.0 {
                for &k in &nz {
                    row[k] -= f * prow[k];
                }
                row[s] = 0.0;
                self.rhs[i] -= f * prhs;
            }
        }
        let f = self.profit[s];
        if f != 0.0 {
            for &k in &nz {
                self.profit[k] -= f * prow[k];
            }
            self.profit[s] = 0.0;
            self.value += f * prhs;
        }
        self.rows[r] = prow;
        self.rhs[r] = prhs;
        self.basis[r] = s;
    }

    /// Values of the structural variables at the current basis.
    pub fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (i, &k) in self.basis.iter().enumerate() {
            if k < self.n_struct {
                x[k] = self.rhs[i].max(0.0);
            }
        }
        x
    }

    pub fn objective(&self) -> f64 {
        self.value
    }

    /// Replaces the right-hand side of `row`. Call [`Simplex::reprice_rhs`]
    /// after a batch of changes.
    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        self.orig_rhs[row] = rhs;
    }

    /// Recomputes basic values from the current right-hand sides using the
    /// basis inverse held in the slack columns. The basis stays dual
    /// feasible, so the next [`Simplex::solve`] repairs it by dual pivots.
    pub fn reprice_rhs(&mut self) {
        let ns = self.n_struct;
        self.value = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let v: f64 = self
                .orig_rhs
                .iter()
                .enumerate()
                .map(|(i, &b)| row[ns + i] * b)
                .sum();
            self.rhs[r] = v;
            let k = self.basis[r];
            if k < ns {
                self.value += self.cost[k] * v;
            }
        }
    }

    /// Dual values of the rows at the current basis.
    pub fn duals(&self) -> Vec<f64> {
        (0..self.rows.len()).map(|i| -self.profit[self.n_struct + i]).collect()
    }
}

fn axpy_row(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        if *s != 0.0 {
            *d += a * s;
        }
    }
}
