//! The SVM operator `S(P) = argmin_{f ∈ H} E_P L⋆(X, Y, f(X)) + λ‖f‖²_H` and
//! the risk functional `R(P) = E_P L⋆(X, Y, S(P)(X))` for discrete `P`.
//!
//! By the representer theorem `S(P) = Σ α_i k(x_i, ·)` over the support of
//! `P`. The solver runs exact coordinate ascent on the Fenchel dual
//!
//! ```text
//! max_β  −Σ w_i L*(y_i, β_i) − (1/4λ) Σ_ij w_i w_j β_i β_j G_ij,     α_i = −w_i β_i / 2λ,
//! ```
//!
//! where `L*` is the conjugate of the loss in its third argument (the shift
//! `L(x, y, 0)` only moves objective values, not the minimizer). Each
//! coordinate step is a closed-form maximization of a concave piecewise
//! quadratic. The duality gap `Σ w_i (L(f_i) + L*(β_i) − β_i f_i)` bounds
//! the primal suboptimality and is the stopping rule.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss_kernel::{gram, Conjugate, KernelSpec, LossSpec};
use crate::measures::DiscreteMeasure;
use crate::metric_space::{check_points, Point};

/// Support points with a kernel and their cached Gram matrix. Solutions on
/// the same set share it, which makes RKHS distances between them cheap.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    points: Vec<Point>,
    kernel: KernelSpec,
    gram: DMatrix<f64>,
    /// `Λ^{1/2} Vᵀ` from the eigendecomposition of the Gram matrix.
    factor: OnceLock<DMatrix<f64>>,
}

impl TrainingSet {
    pub fn new(points: Vec<Point>, kernel: KernelSpec) -> Result<Arc<Self>> {
        check_points(&points)?;
        let xs: Vec<&[f64]> = points.iter().map(|p| p.x.as_slice()).collect();
        let gram = gram(&kernel, &xs)?;
        Ok(Arc::new(Self {
            points,
            kernel,
            gram,
            factor: OnceLock::new(),
        }))
    }

    /// Coordinates `e(α)` with `‖e(α) − e(β)‖₂ = ‖Σ(α_i − β_i) k(x_i, ·)‖_H`
    /// (negative round-off eigenvalues are clipped to zero).
    pub fn embed(&self, alpha: &[f64]) -> Vec<f64> {
        let factor = self.factor.get_or_init(|| {
            let eig = self.gram.clone().symmetric_eigen();
            let mut f = eig.eigenvectors.transpose();
            for (r, lam) in eig.eigenvalues.iter().enumerate() {
                let s = lam.max(0.0).sqrt();
                f.row_mut(r).scale_mut(s);
            }
            f
        });
        let a = nalgebra::DVector::from_column_slice(alpha);
        (factor * a).iter().copied().collect()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A weighted training problem.
#[derive(Debug, Clone)]
pub struct SvmProblem {
    pub set: Arc<TrainingSet>,
    pub weights: DiscreteMeasure,
    pub loss: LossSpec,
    pub lambda: f64,
}

impl SvmProblem {
    pub fn new(
        points: Vec<Point>,
        weights: DiscreteMeasure,
        loss: LossSpec,
        kernel: KernelSpec,
        lambda: f64,
    ) -> Result<Self> {
        Self::on(TrainingSet::new(points, kernel)?, weights, loss, lambda)
    }

    pub fn on(set: Arc<TrainingSet>, weights: DiscreteMeasure, loss: LossSpec, lambda: f64) -> Result<Self> {
        if weights.support_size() != set.len() {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                found: weights.support_size(),
                context: "weights vs support points".into(),
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be positive and finite, got {lambda}")));
        }
        loss.validate()?;
        for p in set.points() {
            loss.check_label(p.y)?;
        }
        Ok(Self { set, weights, loss, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative duality-gap target: stop once `gap ≤ tol·(1 + |J|)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 200_000,
        }
    }
}

/// `f = Σ alpha[i]·k(x_i, ·)` together with solve diagnostics.
#[derive(Debug, Clone)]
pub struct SvmSolution {
    set: Arc<TrainingSet>,
    pub alpha: Vec<f64>,
    /// `f(x_i)` at the support points.
    pub f_values: Vec<f64>,
    pub objective: f64,
    pub rkhs_norm: f64,
    pub duality_gap: f64,
    pub sweeps: usize,
}

impl SvmSolution {
    /// The zero function on a training set.
    pub fn zero(set: Arc<TrainingSet>) -> Self {
        let n = set.len();
        Self {
            set,
            alpha: vec![0.0; n],
            f_values: vec![0.0; n],
            objective: 0.0,
            rkhs_norm: 0.0,
            duality_gap: 0.0,
            sweeps: 0,
        }
    }

    /// A solution with prescribed coefficients; objective fields are zero.
    pub fn from_alpha(set: Arc<TrainingSet>, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != set.len() {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                found: alpha.len(),
                context: "coefficients".into(),
            });
        }
        let a = nalgebra::DVector::from_column_slice(&alpha);
        let f = set.gram() * &a;
        let rkhs_norm = a.dot(&f).max(0.0).sqrt();
        Ok(Self {
            f_values: f.iter().copied().collect(),
            set,
            alpha,
            objective: 0.0,
            rkhs_norm,
            duality_gap: 0.0,
            sweeps: 0,
        })
    }

    pub fn training_set(&self) -> &Arc<TrainingSet> {
        &self.set
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.set.kernel()
    }

    /// `f(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let k = self.set.kernel();
        self.set
            .points()
            .iter()
            .zip(&self.alpha)
            .filter(|(_, a)| **a != 0.0)
            .map(|(p, a)| a * k.eval(&p.x, x))
            .sum()
    }

    /// `max |f|` over the support and the extra points.
    pub fn sup_norm_on(&self, extra: &[Vec<f64>]) -> f64 {
        let on_support = self.f_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        extra.iter().fold(on_support, |m, x| m.max(self.eval(x).abs()))
    }
}

/// Primal objective `Σ w_i L⋆(y_i, f_i) + λ αᵀGα` for given coefficients.
pub fn primal_objective(prob: &SvmProblem, alpha: &[f64]) -> f64 {
    let a = nalgebra::DVector::from_column_slice(alpha);
    let f = prob.set.gram() * &a;
    let penalty = a.dot(&f);
    let data: f64 = prob
        .weights
        .weights()
        .iter()
        .zip(prob.set.points())
        .zip(f.iter())
        .filter(|((w, _), _)| **w > 0.0)
        .map(|((w, p), fi)| w * prob.loss.eval_shifted(p.y, *fi))
        .sum();
    data + prob.lambda * penalty
}

/// Computes `S(P)` for the problem's weighted support.
pub fn solve(prob: &SvmProblem, cfg: &SolverConfig) -> Result<SvmSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let set = &prob.set;
    let n = set.len();
    let g = set.gram();
    let lambda = prob.lambda;
    let w = prob.weights.weights();
    let pts = set.points();
    let active: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    let conj: Vec<Conjugate> = pts.iter().map(|p| prob.loss.conjugate(p.y)).collect();

    let mut beta = vec![0.0; n];
    let mut alpha = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut trace: Vec<f64> = Vec::new();

    let refresh = |alpha: &[f64], f: &mut [f64]| {
        for i in 0..n {
            f[i] = (0..n).map(|j| g[(i, j)] * alpha[j]).sum();
        }
    };

    for sweep in 1..=cfg.max_sweeps {
        for &i in &active {
            let gii = g[(i, i)];
            let own = alpha[i] * gii;
            let r = -(f[i] - own);
            let a = w[i] * gii / (4.0 * lambda);
            let new_beta = conj[i].coordinate_argmax(a, r);
            let delta_beta = new_beta - beta[i];
            if delta_beta == 0.0 {
                continue;
            }
            beta[i] = new_beta;
            let new_alpha = -w[i] * new_beta / (2.0 * lambda);
            let delta_alpha = new_alpha - alpha[i];
            alpha[i] = new_alpha;
            for (k, fk) in f.iter_mut().enumerate() {
                *fk += delta_alpha * g[(k, i)];
            }
        }
        if sweep % 16 == 0 {
            refresh(&alpha, &mut f);
        }

        let penalty: f64 = alpha.iter().zip(&f).map(|(a, fi)| a * fi).sum();
        let mut data = 0.0;
        let mut gap = 0.0;
        for &i in &active {
            let y = pts[i].y;
            data += w[i] * prob.loss.eval_shifted(y, f[i]);
            gap += w[i] * (prob.loss.eval(y, f[i]) + conj[i].value(beta[i]) - beta[i] * f[i]);
        }
        let objective = data + lambda * penalty;
        trace.push(objective);
        if gap <= cfg.tol * (1.0 + objective.abs()) {
            refresh(&alpha, &mut f);
            let penalty: f64 = alpha.iter().zip(&f).map(|(a, fi)| a * fi).sum();
            let data: f64 = active
                .iter()
                .map(|&i| w[i] * prob.loss.eval_shifted(pts[i].y, f[i]))
                .sum();
            return Ok(SvmSolution {
                set: Arc::clone(set),
                alpha,
                f_values: f,
                objective: data + lambda * penalty,
                rkhs_norm: penalty.max(0.0).sqrt(),
                duality_gap: gap.max(0.0),
                sweeps: sweep,
            });
        }
    }
    let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:.12e}")).collect();
    Err(Error::NonConvergence {
        solver: "svm dual coordinate ascent",
        iterations: cfg.max_sweeps,
        diagnostics: format!("last objectives (newest first): {}", tail.join(", ")),
    })
}

/// `Σ_j q_j L⋆(y_j, f(x_j))`. With the training measure this is `R(P)`;
/// with another measure `Q` it is `∫ g_P dQ` for `g_P = L⋆(·, ·, S(P)(·))`.
pub fn risk(sol: &SvmSolution, eval_measure: &DiscreteMeasure, eval_points: &[Point], loss: &LossSpec) -> Result<f64> {
    if eval_measure.support_size() != eval_points.len() {
        return Err(Error::DimensionMismatch {
            expected: eval_points.len(),
            found: eval_measure.support_size(),
            context: "evaluation measure vs points".into(),
        });
    }
    let same_support = eval_points.len() == sol.set.len()
        && eval_points.iter().zip(sol.set.points()).all(|(a, b)| a == b);
    if !same_support {
        let xs: Vec<&[f64]> = eval_points.iter().map(|p| p.x.as_slice()).collect();
        sol.kernel().check_points(&xs)?;
    }
    Ok(eval_measure
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > 0.0)
        .map(|(j, q)| {
            let fx = if same_support { sol.f_values[j] } else { sol.eval(&eval_points[j].x) };
            q * loss.eval_shifted(eval_points[j].y, fx)
        })
        .sum())
}

/// `R(P)` for a solved problem.
pub fn training_risk(prob: &SvmProblem, sol: &SvmSolution) -> Result<f64> {
    risk(sol, &prob.weights, prob.set.points(), &prob.loss)
}

/// `‖f_a − f_b‖_H`.
pub fn rkhs_distance(a: &SvmSolution, b: &SvmSolution) -> Result<f64> {
    if Arc::ptr_eq(&a.set, &b.set) {
        return Ok(shared_distance(a.set.gram(), &a.alpha, &b.alpha));
    }
    if a.kernel() != b.kernel() {
        return Err(Error::KernelMismatch(format!("{:?} vs {:?}", a.kernel(), b.kernel())));
    }
    let xa: Vec<&[f64]> = a.set.points().iter().map(|p| p.x.as_slice()).collect();
    let xb: Vec<&[f64]> = b.set.points().iter().map(|p| p.x.as_slice()).collect();
    if xa.first().map(|x| x.len()) != xb.first().map(|x| x.len()) {
        return Err(Error::KernelMismatch("feature dimensions differ".into()));
    }
    let kab = a.kernel().cross(&xa, &xb);
    let aa: f64 = a.alpha.iter().zip(&a.f_values).map(|(x, y)| x * y).sum();
    let bb: f64 = b.alpha.iter().zip(&b.f_values).map(|(x, y)| x * y).sum();
    let va = nalgebra::DVector::from_column_slice(&a.alpha);
    let vb = nalgebra::DVector::from_column_slice(&b.alpha);
    let ab = va.dot(&(&kab * &vb));
    Ok((aa + bb - 2.0 * ab).max(0.0).sqrt())
}

pub(crate) fn shared_distance(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diff.len();
    let mut sq = 0.0;
    for i in 0..n {
        if diff[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += g[(i, j)] * diff[j];
        }
        sq += diff[i] * row;
    }
    sq.max(0.0).sqrt()
}

/// Quantities of the risk continuity chain for two measures on one support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub risk_p: f64,
    pub risk_q: f64,
    /// `|R(Q) − R(P)|`.
    pub risk_gap: f64,
    /// `max_i |S(Q)(x_i) − S(P)(x_i)|` over the support.
    pub sup_diff: f64,
    /// `‖S(Q) − S(P)‖_H`.
    pub rkhs_diff: f64,
    /// `|∫ g_P dQ − ∫ g_P dP|`.
    pub g_shift: f64,
    /// `|L|₁·sup_diff + g_shift`.
    pub fine_bound: f64,
    /// `|L|₁·‖k‖_∞·rkhs_diff + g_shift`.
    pub coarse_bound: f64,
}

impl ContinuityReport {
    pub fn fine_slack(&self) -> f64 {
        self.fine_bound - self.risk_gap
    }

    pub fn coarse_slack(&self) -> f64 {
        self.coarse_bound - self.risk_gap
    }

    /// Both bounds hold up to floating point round-off (`1e-12`).
    pub fn holds(&self) -> bool {
        self.fine_slack() >= -1e-12 && self.coarse_slack() >= -1e-12
    }
}

/// Solves both problems and evaluates every term of the chain
/// `|R(Q) − R(P)| ≤ |L|₁ sup|S(Q) − S(P)| + |∫g_P dQ − ∫g_P dP|
///               ≤ |L|₁ ‖k‖_∞ ‖S(Q) − S(P)‖_H + |∫g_P dQ − ∫g_P dP|`.
pub fn risk_continuity_check(p: &SvmProblem, q: &SvmProblem, cfg: &SolverConfig) -> Result<ContinuityReport> {
    let same_points = Arc::ptr_eq(&p.set, &q.set) || p.set.points() == q.set.points();
    if !same_points || p.set.kernel() != q.set.kernel() || p.loss != q.loss || p.lambda != q.lambda {
        return Err(Error::invalid("q", "continuity check needs the same support, kernel, loss and lambda"));
    }
    let sp = solve(p, cfg)?;
    let sq = solve(q, cfg)?;
    let points = p.set.points();
    let risk_p = risk(&sp, &p.weights, points, &p.loss)?;
    let risk_q = risk(&sq, &q.weights, points, &q.loss)?;
    let gp_on_q = risk(&sp, &q.weights, points, &p.loss)?;
    let sup_diff = sp
        .f_values
        .iter()
        .zip(&sq.f_values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let rkhs_diff = shared_distance(p.set.gram(), &sp.alpha, &sq.alpha);
    let g_shift = (gp_on_q - risk_p).abs();
    let lip = p.loss.lip();
    Ok(ContinuityReport {
        risk_p,
        risk_q,
        risk_gap: (risk_q - risk_p).abs(),
        sup_diff,
        rkhs_diff,
        g_shift,
        fine_bound: lip * sup_diff + g_shift,
        coarse_bound: lip * p.set.kernel().k_sup() * rkhs_diff + g_shift,
    })
}

/// The two a-priori bounds `‖S(P)‖_∞ ≤ |L|₁‖k‖²_∞/λ` and
/// `|R(P)| ≤ |L|₁²‖k‖²_∞/λ`, evaluated for a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub sup_norm: f64,
    pub sup_bound: f64,
    pub risk: f64,
    pub risk_bound: f64,
    pub sup_ok: bool,
    pub risk_ok: bool,
}

/// Slack added to both a-priori bounds.
pub const BOUND_TOL: f64 = 1e-6;

pub fn check_bounds(prob: &SvmProblem, sol: &SvmSolution, test_points: &[Vec<f64>]) -> Result<BoundCheck> {
    let lip = prob.loss.lip();
    let k2 = prob.set.kernel().k_sup().powi(2);
    let sup_norm = sol.sup_norm_on(test_points);
    let risk = training_risk(prob, sol)?;
    let sup_bound = lip * k2 / prob.lambda;
    let risk_bound = lip * lip * k2 / prob.lambda;
    Ok(BoundCheck {
        sup_norm,
        sup_bound,
        risk,
        risk_bound,
        sup_ok: sup_norm <= sup_bound + BOUND_TOL,
        risk_ok: risk.abs() <= risk_bound + BOUND_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::contaminate;
    use rand::{Rng, SeedableRng};

    fn gauss() -> KernelSpec {
        KernelSpec::GaussianRbf { gamma: 1.0 }
    }

    fn one_point(loss: LossSpec, y: f64, lambda: f64) -> SvmProblem {
        SvmProblem::new(
            vec![Point::new(vec![0.3], y)],
            DiscreteMeasure::uniform(1).unwrap(),
            loss,
            gauss(),
            lambda,
        )
        .unwrap()
    }

    /// Grid minimizer of the 1-D objective `L⋆(y, α) + λα²` (k(x, x) = 1).
    fn grid_1d(loss: LossSpec, y: f64, lambda: f64) -> (f64, f64) {
        (-30_000..=30_000)
            .map(|k| k as f64 * 1e-4)
            .map(|a| (a, loss.eval_shifted(y, a) + lambda * a * a))
            .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    #[test]
    fn single_point_absolute_loss() {
        let prob = one_point(LossSpec::Absolute, 1.0, 0.25);
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        let (a_star, j_star) = grid_1d(LossSpec::Absolute, 1.0, 0.25);
        assert!((a_star - 1.0).abs() < 1e-9);
        assert!((j_star + 0.75).abs() < 1e-9);
        assert!((sol.f_values[0] - 1.0).abs() < 1e-9, "{:?}", sol.f_values);
        assert!((sol.objective + 0.75).abs() < 1e-9);
        let r = training_risk(&prob, &sol).unwrap();
        assert!((r + 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_point_every_loss_matches_grid() {
        for loss in [
            LossSpec::Hinge,
            LossSpec::Logistic,
            LossSpec::Pinball { tau: 0.3 },
            LossSpec::EpsInsensitive { eps: 0.2 },
            LossSpec::Absolute,
        ] {
            for lambda in [0.05, 0.3, 2.0] {
                let prob = one_point(loss, -1.0, lambda);
                let sol = solve(&prob, &SolverConfig::default()).unwrap();
                let (_, j) = grid_1d(loss, -1.0, lambda);
                assert!(sol.objective <= j + 1e-7, "{loss:?} λ={lambda}: {} vs {j}", sol.objective);
                assert!(sol.objective >= j - 1e-3);
            }
        }
    }

    #[test]
    fn huge_lambda_collapses_to_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point> = (0..8)
            .map(|_| Point::new(vec![rng.gen_range(-1.0..1.0)], if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
            .collect();
        let prob = SvmProblem::new(pts, DiscreteMeasure::uniform(8).unwrap(), LossSpec::Hinge, gauss(), 1e6).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        assert!(sol.rkhs_norm <= 1e-4);
        assert!(sol.f_values.iter().all(|v| v.abs() <= 1e-4));
    }

    #[test]
    fn zero_solution_has_zero_risk() {
        let set = TrainingSet::new(vec![Point::new(vec![0.0], 1.0), Point::new(vec![1.0], -1.0)], gauss()).unwrap();
        let z = SvmSolution::zero(Arc::clone(&set));
        for w in [vec![0.5, 0.5], vec![1.0, 0.0], vec![0.2, 0.8]] {
            let m = DiscreteMeasure::new(w).unwrap();
            assert_eq!(risk(&z, &m, set.points(), &LossSpec::Hinge).unwrap(), 0.0);
        }
    }

    #[test]
    fn rkhs_distance_examples() {
        let set = TrainingSet::new(vec![Point::new(vec![0.0], 1.0), Point::new(vec![2.0], -1.0)], gauss()).unwrap();
        let kx = SvmSolution::from_alpha(Arc::clone(&set), vec![1.0, 0.0]).unwrap();
        let zero = SvmSolution::zero(Arc::clone(&set));
        assert!((rkhs_distance(&kx, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(rkhs_distance(&kx, &kx).unwrap(), 0.0);
        // different sets, same function
        let other = TrainingSet::new(vec![Point::new(vec![0.0], 1.0)], gauss()).unwrap();
        let kx2 = SvmSolution::from_alpha(other, vec![1.0]).unwrap();
        assert!(rkhs_distance(&kx, &kx2).unwrap() < 1e-7);
        let lin = TrainingSet::new(
            vec![Point::new(vec![0.0], 1.0)],
            KernelSpec::LinearOnBox { lo: vec![-1.0], hi: vec![1.0] },
        )
        .unwrap();
        let l = SvmSolution::zero(lin);
        assert!(matches!(rkhs_distance(&kx, &l), Err(Error::KernelMismatch(_))));
    }

    fn random_problem(rng: &mut rand_chacha::ChaCha8Rng, n: usize, loss: LossSpec, kernel: KernelSpec, lambda: f64) -> SvmProblem {
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let y = if loss.is_margin() {
                    if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    rng.gen_range(-2.0..2.0)
                };
                Point::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], y)
            })
            .collect();
        let w = DiscreteMeasure::normalized((0..n).map(|_| rng.gen_range(0.05..1.0)).collect()).unwrap();
        SvmProblem::new(pts, w, loss, kernel, lambda).unwrap()
    }

    #[test]
    fn rkhs_triangle_inequality() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let set = TrainingSet::new(
                (0..6).map(|_| Point::new(vec![rng.gen_range(-1.0..1.0)], 1.0)).collect(),
                gauss(),
            )
            .unwrap();
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                SvmSolution::from_alpha(Arc::clone(&set), (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let ab = rkhs_distance(&a, &b).unwrap();
            let bc = rkhs_distance(&b, &c).unwrap();
            let ac = rkhs_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-9);
            assert!((ab - rkhs_distance(&b, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn optimality_certificate_along_random_directions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cfg = SolverConfig::default();
        for loss in [LossSpec::Hinge, LossSpec::Logistic, LossSpec::Pinball { tau: 0.25 }, LossSpec::EpsInsensitive { eps: 0.1 }] {
            let prob = random_problem(&mut rng, 8, loss, gauss(), 0.1);
            let sol = solve(&prob, &cfg).unwrap();
            let j = primal_objective(&prob, &sol.alpha);
            assert!((j - sol.objective).abs() < 1e-10);
            for _ in 0..200 {
                let dir: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut best = j;
                for k in 1..=40 {
                    for sign in [-1.0, 1.0] {
                        let step = sign * 1e-3 * 1.4f64.powi(k);
                        let a: Vec<f64> = sol.alpha.iter().zip(&dir).map(|(x, d)| x + step * d).collect();
                        best = best.min(primal_objective(&prob, &a));
                    }
                }
                assert!(j - best <= cfg.tol * (1.0 + j.abs()), "{loss:?}: {j} -> {best}");
            }
        }
    }

    #[test]
    fn a_priori_bounds_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let test_pts: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        for loss in [LossSpec::Hinge, LossSpec::Absolute, LossSpec::Logistic, LossSpec::Pinball { tau: 0.8 }] {
            for kernel in [gauss(), KernelSpec::LinearOnBox { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] }] {
                let prob = random_problem(&mut rng, 10, loss, kernel, 0.05);
                let sol = solve(&prob, &SolverConfig::default()).unwrap();
                let b = check_bounds(&prob, &sol, &test_pts).unwrap();
                assert!(b.sup_ok && b.risk_ok, "{b:?}");
            }
        }
    }

    #[test]
    fn duplicated_support_gives_same_function() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cfg = SolverConfig { tol: 1e-14, ..Default::default() };
        for loss in [LossSpec::Hinge, LossSpec::Absolute, LossSpec::Logistic] {
            let prob = random_problem(&mut rng, 5, loss, gauss(), 0.1);
            let mut pts = prob.set.points().to_vec();
            pts.push(pts[0].clone());
            let mut w = prob.weights.weights().to_vec();
            let half = w[0] / 2.0;
            w[0] = half;
            w.push(half);
            let dup = SvmProblem::new(pts, DiscreteMeasure::new(w).unwrap(), loss, gauss(), 0.1).unwrap();
            let a = solve(&prob, &cfg).unwrap();
            let b = solve(&dup, &cfg).unwrap();
            for i in 0..5 {
                assert!((a.f_values[i] - b.f_values[i]).abs() < 1e-7, "{loss:?}: {} vs {}", a.f_values[i], b.f_values[i]);
            }
            assert!((a.rkhs_norm - b.rkhs_norm).abs() < 1e-7);
        }
    }

    #[test]
    fn all_weight_on_one_point() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let prob = random_problem(&mut rng, 6, LossSpec::Hinge, gauss(), 0.1);
        let p = SvmProblem::on(Arc::clone(&prob.set), DiscreteMeasure::point_mass(6, 2).unwrap(), LossSpec::Hinge, 0.1).unwrap();
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert!(sol.alpha.iter().enumerate().all(|(i, a)| i == 2 || *a == 0.0));
    }

    #[test]
    fn continuity_chain() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let cfg = SolverConfig::default();
        let prob = random_problem(&mut rng, 8, LossSpec::Hinge, gauss(), 0.1);
        let same = risk_continuity_check(&prob, &prob, &cfg).unwrap();
        assert_eq!(same.risk_gap, 0.0);
        assert_eq!(same.fine_bound, 0.0);
        assert!(same.holds());
        for eps in [0.05, 0.1, 0.2] {
            let dir = DiscreteMeasure::point_mass(8, rng.gen_range(0..8)).unwrap();
            let q = SvmProblem::on(Arc::clone(&prob.set), contaminate(&prob.weights, &dir, eps).unwrap(), prob.loss, prob.lambda).unwrap();
            let rep = risk_continuity_check(&prob, &q, &cfg).unwrap();
            assert!(rep.holds(), "{rep:?}");
            assert!(rep.coarse_bound >= rep.fine_bound - 1e-12);
        }
        let big = SvmProblem::on(Arc::clone(&prob.set), prob.weights.clone(), prob.loss, 1e6).unwrap();
        let dir = DiscreteMeasure::point_mass(8, 0).unwrap();
        let bq = SvmProblem::on(Arc::clone(&prob.set), contaminate(&prob.weights, &dir, 0.2).unwrap(), prob.loss, 1e6).unwrap();
        let rep = risk_continuity_check(&big, &bq, &cfg).unwrap();
        assert!(rep.risk_gap < 1e-5 && rep.coarse_bound < 1e-5, "{rep:?}");
    }

    #[test]
    fn embedding_reproduces_rkhs_distance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let set = TrainingSet::new(
            (0..7).map(|_| Point::new(vec![rng.gen_range(-1.0..1.0)], 1.0)).collect(),
            gauss(),
        )
        .unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ea = set.embed(&a);
            let eb = set.embed(&b);
            let e: f64 = ea.iter().zip(&eb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!((e - shared_distance(set.gram(), &a, &b)).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_problems() {
        let pts = vec![Point::new(vec![0.0], 0.5)];
        let w = DiscreteMeasure::uniform(1).unwrap();
        assert!(SvmProblem::new(pts.clone(), w.clone(), LossSpec::Hinge, gauss(), 0.1).is_err());
        assert!(SvmProblem::new(pts.clone(), w.clone(), LossSpec::Absolute, gauss(), 0.0).is_err());
        assert!(SvmProblem::new(pts, DiscreteMeasure::uniform(2).unwrap(), LossSpec::Absolute, gauss(), 0.1).is_err());
    }
}
