//! Bounded-Lipschitz distance between discrete measures on a finite metric
//! space.
//!
//! With `c = p − q`, the distance over the ball `‖f‖_BL = sup|f| + Lip(f) ≤ M`
//! is the linear program
//!
//! ```text
//! max  Σ c_i f_i
//! s.t. −b ≤ f_i ≤ b,   f_i − f_j ≤ L·d_ij  (i ≠ j),   b + L ≤ M,   b, L ≥ 0.
//! ```
//!
//! The feasible set is symmetric under `f → −f`, so the absolute value in the
//! supremum drops out. Since `Σ c_i = 0` the objective is invariant under
//! constant shifts, and the LP is solved in the nonnegative variables
//! `u_i = f_i + b ∈ [0, 2b]`.
//!
//! The LP is not solved in this joint form; see `solve_active`.
//!
//! Points carrying no signed mass are removed before solving; the witness is
//! extended back to them by the McShane extension clipped to `[−b, b]`,
//! which keeps both the sup and Lipschitz bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LpOptions, Simplex};
use crate::measures::DiscreteMeasure;
use crate::metric_space::DistanceMatrix;

/// Slack allowed on the witness constraints.
pub const WITNESS_TOL: f64 = 1e-9;

/// A d_BL instance: two measures on the support of `d` and a ball radius.
#[derive(Debug, Clone, Copy)]
pub struct BLProblem<'a> {
    pub d: &'a DistanceMatrix,
    pub p: &'a DiscreteMeasure,
    pub q: &'a DiscreteMeasure,
    pub radius: f64,
}

impl<'a> BLProblem<'a> {
    pub fn new(d: &'a DistanceMatrix, p: &'a DiscreteMeasure, q: &'a DiscreteMeasure) -> Self {
        Self { d, p, q, radius: 1.0 }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.d.len();
        for (m, name) in [(self.p, "p"), (self.q, "q")] {
            if m.support_size() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.support_size(),
                    context: format!("measure {name} vs distance matrix"),
                });
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive and finite, got {}", self.radius)));
        }
        Ok(())
    }
}

/// Optimal value and witness of a d_BL solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BLResult {
    pub value: f64,
    /// Witness function values at the support points.
    pub f_star: Vec<f64>,
    /// Sup-norm budget `b` of the witness.
    pub sup_bound: f64,
    /// Lipschitz budget `L` of the witness.
    pub lip_bound: f64,
}

impl BLResult {
    fn zero(n: usize) -> Self {
        Self {
            value: 0.0,
            f_star: vec![0.0; n],
            sup_bound: 0.0,
            lip_bound: 0.0,
        }
    }

    /// Checks the witness against the ball constraints and the reported
    /// value, returning the first violation found.
    pub fn check_witness(&self, prob: &BLProblem<'_>) -> std::result::Result<(), String> {
        let f = &self.f_star;
        let n = f.len();
        let (b, l) = (self.sup_bound, self.lip_bound);
        if b < -WITNESS_TOL || l < -WITNESS_TOL || b + l > prob.radius + WITNESS_TOL {
            return Err(format!("budgets b = {b}, L = {l} exceed radius {}", prob.radius));
        }
        for i in 0..n {
            if f[i].abs() > b + WITNESS_TOL {
                return Err(format!("|f[{i}]| = {} > b = {b}", f[i].abs()));
            }
            for j in 0..n {
                if i != j && (f[i] - f[j]).abs() > l * prob.d.get(i, j) + WITNESS_TOL {
                    return Err(format!(
                        "|f[{i}] - f[{j}]| = {} > L·d = {}",
                        (f[i] - f[j]).abs(),
                        l * prob.d.get(i, j)
                    ));
                }
            }
        }
        let v = signed_mass(prob)
            .iter()
            .zip(f)
            .map(|(c, x)| c * x)
            .sum::<f64>();
        if (v - self.value).abs() > WITNESS_TOL {
            return Err(format!("value {} differs from witness objective {v}", self.value));
        }
        Ok(())
    }
}

/// Which Lipschitz constraints enter the LP up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Every ordered pair from the start.
    All,
    /// Start without pairwise rows and add the most violated pair per point
    /// until the witness satisfies every pair. Same optimum as `All`.
    Lazy,
    /// `All` for small supports, `Lazy` otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct BLOptions {
    pub mode: ConstraintMode,
    pub lp: LpOptions,
    /// `Auto` switches to lazy generation above this many active points.
    pub auto_threshold: usize,
}

impl Default for BLOptions {
    fn default() -> Self {
        Self {
            mode: ConstraintMode::Auto,
            lp: LpOptions::default(),
            auto_threshold: 16,
        }
    }
}

fn signed_mass(prob: &BLProblem<'_>) -> Vec<f64> {
    prob.p
        .weights()
        .iter()
        .zip(prob.q.weights())
        .map(|(a, b)| a - b)
        .collect()
}

/// d_BL with default options.
pub fn d_bl(prob: &BLProblem<'_>) -> Result<BLResult> {
    d_bl_with(prob, &BLOptions::default())
}

/// `‖P − Q‖` over the ball of radius `prob.radius`. This is the same
/// computation as [`d_bl`]; at radius one the two coincide by definition.
pub fn f_class_seminorm(prob: &BLProblem<'_>) -> Result<f64> {
    d_bl(prob).map(|r| r.value)
}

pub fn d_bl_with(prob: &BLProblem<'_>, opts: &BLOptions) -> Result<BLResult> {
    prob.validate()?;
    let n = prob.d.len();
    let c = signed_mass(prob);
    let active: Vec<usize> = (0..n).filter(|&i| c[i] != 0.0).collect();
    if active.is_empty() {
        return Ok(BLResult::zero(n));
    }
    let sub_d = prob.d.submatrix(&active);
    let sub_c: Vec<f64> = active.iter().map(|&i| c[i]).collect();
    let mode = match opts.mode {
        ConstraintMode::Auto if active.len() > opts.auto_threshold => ConstraintMode::Lazy,
        ConstraintMode::Auto => ConstraintMode::All,
        m => m,
    };
    let (f_sub, b, l) = solve_active(&sub_d, &sub_c, prob.radius, mode, opts.lp)?;

    let mut f = vec![0.0; n];
    let mut is_active = vec![false; n];
    for (k, &i) in active.iter().enumerate() {
        f[i] = f_sub[k];
        is_active[i] = true;
    }
    for x in 0..n {
        if is_active[x] {
            continue;
        }
        let ext = active
            .iter()
            .zip(&f_sub)
            .map(|(&j, &fj)| fj + l * prob.d.get(x, j))
            .fold(f64::INFINITY, f64::min);
        f[x] = ext.clamp(-b, b);
    }
    let value = c.iter().zip(&f).map(|(ci, fi)| ci * fi).sum::<f64>().max(0.0);
    Ok(BLResult {
        value,
        f_star: f,
        sup_bound: b,
        lip_bound: l,
    })
}

/// Rows of the inner LP at Lipschitz level `t`, with right-hand sides
/// `intercept + slope·t`.
struct Inner<'d> {
    d: &'d DistanceMatrix,
    c: &'d [f64],
    lp: Simplex,
    rhs: Vec<(f64, f64)>,
    present: Vec<bool>,
}

impl<'d> Inner<'d> {
    fn new(d: &'d DistanceMatrix, c: &'d [f64], radius: f64, mode: ConstraintMode, opts: LpOptions) -> Self {
        let n = c.len();
        let mut inner = Self {
            d,
            c,
            lp: Simplex::new(c, opts),
            rhs: Vec::new(),
            present: vec![false; n * n],
        };
        for i in 0..n {
            inner.lp.add_le(&[(i, 1.0)], 2.0 * radius);
            inner.rhs.push((2.0 * radius, -2.0));
        }
        if mode == ConstraintMode::All {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        inner.add_pair(i, j, 0.0);
                    }
                }
            }
        } else {
            // nearest-neighbour rows are almost always active
            for i in 0..n {
                let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                order.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
                for &j in order.iter().take(SEED_NEIGHBOURS) {
                    for (a, b) in [(i, j), (j, i)] {
                        if !inner.present[a * n + b] {
                            inner.add_pair(a, b, 0.0);
                        }
                    }
                }
            }
        }
        inner
    }

    fn add_pair(&mut self, i: usize, j: usize, t: f64) {
        let dij = self.d.get(i, j);
        self.present[i * self.c.len() + j] = true;
        self.lp.add_le(&[(i, 1.0), (j, -1.0)], dij * t);
        self.rhs.push((0.0, dij));
    }

    /// `V(t)`, a supergradient of `V` at `t`, and the maximizer `u`.
    fn eval(&mut self, t: f64) -> Result<(f64, f64, Vec<f64>)> {
        let n = self.c.len();
        for (k, &(a, s)) in self.rhs.iter().enumerate() {
            self.lp.set_rhs(k, a + s * t);
        }
        self.lp.reprice_rhs();
        let tol = 0.1 * WITNESS_TOL;
        loop {
            self.lp.solve()?;
            let u = self.lp.primal();
            let mut cuts = Vec::new();
            for i in 0..n {
                // most violated pair for source i, ranked by Lipschitz excess
                let mut best: Option<(usize, f64)> = None;
                for j in 0..n {
                    if i == j || self.present[i * n + j] {
                        continue;
                    }
                    let dij = self.d.get(i, j);
                    if u[i] - u[j] - t * dij <= tol {
                        continue;
                    }
                    let score = if dij > 0.0 { (u[i] - u[j]) / dij } else { f64::INFINITY };
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((j, score));
                    }
                }
                if let Some((j, _)) = best {
                    cuts.push((i, j));
                }
            }
            if cuts.is_empty() {
                let value = self.c.iter().zip(&u).map(|(c, x)| c * x).sum();
                let slope = self.lp.duals().iter().zip(&self.rhs).map(|(y, r)| y * r.1).sum();
                return Ok((value, slope, u));
            }
            for (i, j) in cuts {
                self.add_pair(i, j, t);
            }
        }
    }
}

/// Solves on a support where every point carries signed mass. Returns the
/// witness `f`, `b` and `L`.
///
/// For a fixed split `L = t`, `b = M − t` the problem is an LP with unit
/// coefficients, and its value `V(t)` is concave and piecewise linear in
/// `t`. `V(0) = V(M) = 0`; the maximum is located by intersecting tangent
/// lines from both ends, each new tangent coming from the LP duals. This
/// keeps distances out of the constraint matrix, where a wide range of
/// scales would ruin pivoting accuracy.
fn solve_active(
    d: &DistanceMatrix,
    c: &[f64],
    radius: f64,
    mode: ConstraintMode,
    lp_opts: LpOptions,
) -> Result<(Vec<f64>, f64, f64)> {
    let mut inner = Inner::new(d, c, radius, mode, lp_opts);
    let (v_lo, g_lo, u_lo) = inner.eval(0.0)?;
    let mut lo = (0.0, v_lo, g_lo);
    let mut best = (0.0, v_lo, u_lo);
    if g_lo > 0.0 {
        let (v_hi, g_hi, u_hi) = inner.eval(radius)?;
        if v_hi > best.1 {
            best = (radius, v_hi, u_hi);
        }
        let mut hi = (radius, v_hi, g_hi);
        let tol = SEARCH_TOL * radius.max(1.0);
        let mut closed = false;
        for _ in 0..MAX_SEARCH_STEPS {
            if hi.2 >= 0.0 || lo.2 <= 0.0 {
                closed = true;
                break;
            }
            let t = ((hi.1 - lo.1 + lo.2 * lo.0 - hi.2 * hi.0) / (lo.2 - hi.2)).clamp(lo.0, hi.0);
            let upper = lo.1 + lo.2 * (t - lo.0);
            if upper - best.1 <= tol {
                closed = true;
                break;
            }
            let (v, g, u) = inner.eval(t)?;
            if v > best.1 {
                best = (t, v, u);
            }
            if upper - v <= tol || g == 0.0 {
                closed = true;
                break;
            }
            if g > 0.0 {
                lo = (t, v, g);
            } else {
                hi = (t, v, g);
            }
        }
        if !closed {
            return Err(Error::NonConvergence {
                solver: "d_bl",
                iterations: inner.lp.pivots(),
                diagnostics: format!(
                    "Lipschitz split search open after {MAX_SEARCH_STEPS} steps on [{}, {}]",
                    lo.0, hi.0
                ),
            });
        }
    }
    let (t, _, u) = best;
    let b = radius - t;
    let f: Vec<f64> = u.iter().map(|&ui| (ui - b).clamp(-b, b)).collect();
    let l = t;
    let worst = max_violation(d, &f, l);
    if worst > WITNESS_TOL {
        return Err(Error::NonConvergence {
            solver: "d_bl",
            iterations: inner.lp.pivots(),
            diagnostics: format!("witness violates a Lipschitz row by {worst:.3e}"),
        });
    }
    Ok((f, b, l))
}

/// Nearest neighbours per point whose rows seed lazy generation.
const SEED_NEIGHBOURS: usize = 2;

/// Absolute gap, relative to the radius, at which the split search stops.
const SEARCH_TOL: f64 = 1e-13;

const MAX_SEARCH_STEPS: usize = 200;

/// Largest `f_i − f_j − L·d_ij` over ordered pairs.
fn max_violation(d: &DistanceMatrix, f: &[f64], l: f64) -> f64 {
    let n = f.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(f[i] - f[j] - l * d.get(i, j));
            }
        }
    }
    worst
}

/// Largest support accepted by [`d_bl_oracle`].
pub const ORACLE_MAX_SUPPORT: usize = 4;

/// Exhaustive grid search over `f_i ∈ {−M, −M + h, …, M}` keeping grid
/// functions whose bounded-Lipschitz norm, computed from the grid values, is
/// at most `M`. A lower bound on d_BL that is independent of the LP.
pub fn d_bl_oracle(prob: &BLProblem<'_>, grid_step: f64) -> Result<f64> {
    prob.validate()?;
    let n = prob.d.len();
    if n > ORACLE_MAX_SUPPORT {
        return Err(Error::SupportTooLarge {
            size: n,
            limit: ORACLE_MAX_SUPPORT,
            what: "grid oracle",
        });
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::invalid("grid_step", "must be positive"));
    }
    let m = prob.radius;
    let steps = (2.0 * m / grid_step).round() as i64;
    let grid: Vec<f64> = (0..=steps).map(|k| -m + k as f64 * grid_step).collect();
    let c = signed_mass(prob);
    let mut inv_d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let dij = prob.d.get(i, j);
            inv_d[i * n + j] = if dij > 0.0 { 1.0 / dij } else { f64::INFINITY };
        }
    }
    let tol = 1e-12;
    let mut f = vec![0.0; n];
    let mut best = 0.0f64;

    // depth-first over coordinates; a partial assignment whose norm already
    // exceeds M cannot be completed, since both sup and Lip only grow
    fn recurse(
        k: usize,
        sup: f64,
        lip: f64,
        f: &mut [f64],
        ctx: &(usize, &[f64], &[f64], &[f64], f64, f64),
        best: &mut f64,
    ) {
        let (n, grid, c, inv_d, m, tol) = *ctx;
        if k == n {
            let v = c.iter().zip(f.iter()).map(|(a, b)| a * b).sum::<f64>().abs();
            if v > *best {
                *best = v;
            }
            return;
        }
        for &g in grid {
            let s = sup.max(g.abs());
            let mut l = lip;
            for j in 0..k {
                let diff = (g - f[j]).abs();
                if diff > 0.0 {
                    l = l.max(diff * inv_d[k * n + j]);
                }
            }
            if s + l <= m + tol {
                f[k] = g;
                recurse(k + 1, s, l, f, ctx, best);
            }
        }
    }
    let ctx = (n, grid.as_slice(), c.as_slice(), inv_d.as_slice(), m, tol);
    recurse(0, 0.0, 0.0, &mut f, &ctx, &mut best);
    Ok(best)
}

/// `2d/(d+2)`: d_BL between point masses at distance `d` (unit ball).
pub fn two_point_value(d: f64) -> f64 {
    2.0 * d / (d + 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_space::{build_euclidean_space, Point};
    use rand::{Rng, SeedableRng};

    fn two_point(d: f64) -> DistanceMatrix {
        DistanceMatrix::from_rows(&[vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    /// `max_{L ∈ [0, 1]} min(L·d, 2(1 − L))` by dense grid search.
    fn two_point_grid(d: f64) -> f64 {
        (0..=1_000_000)
            .map(|k| {
                let l = k as f64 / 1e6;
                (l * d).min(2.0 * (1.0 - l))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn analytic_formula_matches_grid() {
        for d in [0.1, 0.5, 1.0, 2.0, 10.0] {
            assert!((two_point_grid(d) - two_point_value(d)).abs() < 1e-5);
        }
    }

    #[test]
    fn equal_measures_give_zero() {
        let d = two_point(1.0);
        let p = DiscreteMeasure::new(vec![0.3, 0.7]).unwrap();
        let r = d_bl(&BLProblem::new(&d, &p, &p)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(d_bl_oracle(&BLProblem::new(&d, &p, &p), 0.05).unwrap(), 0.0);
    }

    #[test]
    fn point_masses_at_distance_two() {
        let d = two_point(2.0);
        let p = DiscreteMeasure::point_mass(2, 0).unwrap();
        let q = DiscreteMeasure::point_mass(2, 1).unwrap();
        let prob = BLProblem::new(&d, &p, &q);
        let r = d_bl(&prob).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{}", r.value);
        r.check_witness(&prob).unwrap();
        let o = d_bl_oracle(&prob, 0.01).unwrap();
        assert!((o - 1.0).abs() <= 0.02, "{o}");
    }

    #[test]
    fn uniform_vs_point_mass() {
        let d = two_point(1.0);
        let p = DiscreteMeasure::uniform(2).unwrap();
        let q = DiscreteMeasure::point_mass(2, 0).unwrap();
        let r = d_bl(&BLProblem::new(&d, &p, &q)).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn radius_scaling() {
        let d = two_point(2.0);
        let p = DiscreteMeasure::point_mass(2, 0).unwrap();
        let q = DiscreteMeasure::point_mass(2, 1).unwrap();
        let v = f_class_seminorm(&BLProblem::new(&d, &p, &q).with_radius(2.0)).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let o = d_bl_oracle(&BLProblem::new(&d, &p, &q).with_radius(2.0), 0.01).unwrap();
        assert!((o - 2.0).abs() < 0.04, "{o}");
        let v = f_class_seminorm(&BLProblem::new(&d, &p, &p).with_radius(0.5)).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(
            f_class_seminorm(&BLProblem::new(&d, &p, &q)).unwrap(),
            d_bl(&BLProblem::new(&d, &p, &q)).unwrap().value
        );
    }

    #[test]
    fn rejects_bad_problems() {
        let d = two_point(1.0);
        let p = DiscreteMeasure::uniform(2).unwrap();
        let q = DiscreteMeasure::uniform(3).unwrap();
        assert!(d_bl(&BLProblem::new(&d, &p, &q)).is_err());
        assert!(d_bl(&BLProblem::new(&d, &p, &p).with_radius(0.0)).is_err());
        let d5 = DistanceMatrix::from_fn(5, |_, _| 1.0).unwrap();
        let u5 = DiscreteMeasure::uniform(5).unwrap();
        assert!(matches!(
            d_bl_oracle(&BLProblem::new(&d5, &u5, &u5), 0.1),
            Err(Error::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn zero_mass_points_get_feasible_extension() {
        let pts: Vec<Point> = [0.0, 0.4, 1.1, 3.0, 3.2]
            .iter()
            .map(|&x| Point::new(vec![x], 0.0))
            .collect();
        let d = build_euclidean_space(&pts, 1.0).unwrap();
        let p = DiscreteMeasure::new(vec![0.5, 0.0, 0.5, 0.0, 0.0]).unwrap();
        let q = DiscreteMeasure::new(vec![0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let prob = BLProblem::new(&d, &p, &q);
        let r = d_bl(&prob).unwrap();
        r.check_witness(&prob).unwrap();
        let o = d_bl_oracle(&BLProblem::new(&d.submatrix(&[0, 2, 3]),
            &DiscreteMeasure::new(vec![0.5, 0.5, 0.0]).unwrap(),
            &DiscreteMeasure::new(vec![0.0, 0.0, 1.0]).unwrap()), 0.01).unwrap();
        assert!(r.value >= o - 1e-9 && r.value - o < 0.03);
    }

    #[test]
    fn duplicated_points_are_handled() {
        let d = DistanceMatrix::from_rows(&[
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let p = DiscreteMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let q = DiscreteMeasure::point_mass(3, 2).unwrap();
        let prob = BLProblem::new(&d, &p, &q);
        let r = d_bl(&prob).unwrap();
        assert!((r.value - two_point_value(1.0)).abs() < 1e-9);
        r.check_witness(&prob).unwrap();
    }

    fn random_instance(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> (DistanceMatrix, DiscreteMeasure, DiscreteMeasure) {
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], rng.gen_range(-1.0..1.0)))
            .collect();
        let d = build_euclidean_space(&pts, 1.0).unwrap();
        let w = |rng: &mut rand_chacha::ChaCha8Rng| {
            DiscreteMeasure::normalized((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
        };
        let p = w(rng);
        let q = w(rng);
        (d, p, q)
    }

    #[test]
    fn lazy_and_full_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [2, 5, 12, 30] {
            for _ in 0..5 {
                let (d, p, q) = random_instance(&mut rng, n);
                let prob = BLProblem::new(&d, &p, &q);
                let all = d_bl_with(&prob, &BLOptions { mode: ConstraintMode::All, ..Default::default() }).unwrap();
                let lazy = d_bl_with(&prob, &BLOptions { mode: ConstraintMode::Lazy, ..Default::default() }).unwrap();
                assert!((all.value - lazy.value).abs() < 1e-9, "n={n}: {} vs {}", all.value, lazy.value);
                all.check_witness(&prob).unwrap();
                lazy.check_witness(&prob).unwrap();
            }
        }
    }

    #[test]
    fn upper_bounds_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.gen_range(2..10);
            let (d, p, q) = random_instance(&mut rng, n);
            let r = d_bl(&BLProblem::new(&d, &p, &q)).unwrap();
            assert!(r.value <= 2.0 + 1e-12);
            assert!(r.value <= p.total_variation(&q) + 1e-9);
        }
    }

    #[test]
    fn contamination_is_monotone_in_eps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let (d, p, dir) = random_instance(&mut rng, 6);
            let mut last = 0.0;
            for k in 0..=10 {
                let q = crate::measures::contaminate(&p, &dir, k as f64 / 10.0).unwrap();
                let v = d_bl(&BLProblem::new(&d, &q, &p)).unwrap().value;
                assert!(v >= last - 1e-9, "{v} < {last}");
                last = v;
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<Point>, Vec<f64>, Vec<f64>)> {
            (2usize..7).prop_flat_map(|n| {
                (
                    prop::collection::vec((-3.0f64..3.0, -1.0f64..1.0), n),
                    prop::collection::vec(0.01f64..1.0, n),
                    prop::collection::vec(0.01f64..1.0, n),
                )
                    .prop_map(|(xy, p, q)| (xy.into_iter().map(|(x, y)| Point::new(vec![x], y)).collect(), p, q))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn symmetric_bounded_and_witnessed((pts, p, q) in instance()) {
                let d = build_euclidean_space(&pts, 1.0).unwrap();
                let p = DiscreteMeasure::normalized(p).unwrap();
                let q = DiscreteMeasure::normalized(q).unwrap();
                let pq = BLProblem::new(&d, &p, &q);
                let a = d_bl(&pq).unwrap();
                let b = d_bl(&BLProblem::new(&d, &q, &p)).unwrap();
                prop_assert!((a.value - b.value).abs() <= 1e-9);
                prop_assert!(a.value >= -1e-12);
                prop_assert!(a.value <= p.total_variation(&q) + 1e-9);
                prop_assert!(a.check_witness(&pq).is_ok());
            }
        }
    }
}
