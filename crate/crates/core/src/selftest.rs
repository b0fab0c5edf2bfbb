//! Invariant and oracle checks behind the `selftest` subcommand and the
//! acceptance suite. Each check returns an [`Outcome`] whose payload is a
//! deterministic function of the seed, so reruns can be compared byte for
//! byte.
//!
//! Oracles here do not go through the code paths they check: the d_BL grid
//! oracle enumerates grid functions, the SVM oracle grid-searches the primal
//! with its own Gram matrix, and multiset weights are checked against
//! ordered-tuple enumeration.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bl_metric::{d_bl, d_bl_oracle, f_class_seminorm, two_point_value, BLProblem};
use crate::bootstrap::{
    bootstrap_law_exact, bootstrap_law_mc, enumerate_multisets, estimate, law_distance, Atom, Atoms, BootstrapLaw,
    Estimator, EstimatorConfig, DEDUP_TOL,
};
use crate::error::Result;
use crate::loss_kernel::{KernelSpec, LossSpec};
use crate::measures::{contaminate, DiscreteMeasure};
use crate::metric_space::{build_euclidean_space, DistanceMatrix, Point};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::robustness::{bootstrap_qr_probe, gc_decay_probe, RobustnessConfig};
use crate::svm::{check_bounds, risk_continuity_check, solve, SolverConfig, SvmProblem, TrainingSet};

pub const CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Result of one check.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub payload: Value,
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "d_BL LP agrees with the grid oracle",
        2 => "d_BL analytic cases",
        3 => "d_BL metric axioms and radius scaling",
        4 => "SVM a-priori bounds",
        5 => "SVM solver agrees with grid oracles",
        6 => "risk continuity chain",
        7 => "exact bootstrap enumeration and Monte-Carlo convergence",
        8 => "Glivenko-Cantelli decay",
        9 => "bootstrap qualitative-robustness signature",
        _ => "unknown",
    }
}

/// Runs check `id` with the given seed.
pub fn run(id: u8, seed: u64) -> Result<Outcome> {
    let s = derive_seed(seed, &[id as u64]);
    match id {
        1 => c1_lp_vs_oracle(s),
        2 => c2_analytic(),
        3 => c3_axioms(s),
        4 => c4_bounds(s),
        5 => c5_solver_oracle(s),
        6 => c6_continuity(s),
        7 => c7_exact_bootstrap(s),
        8 => c8_gc_decay(s),
        9 => c9_robustness(seed),
        _ => Err(crate::error::Error::invalid("criterion", format!("no check numbered {id}"))),
    }
}

fn outcome(id: u8, passed: bool, detail: String, payload: Value) -> Outcome {
    Outcome {
        id,
        title: title(id),
        passed,
        detail,
        payload,
    }
}

/// Shortest-path closure of random symmetric edge lengths: a random metric
/// that is usually not Euclidean.
fn random_metric(n: usize, rng: &mut Rng) -> DistanceMatrix {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(0.05..3.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    DistanceMatrix::from_rows(&d).expect("closure is a metric")
}

fn random_measure(n: usize, rng: &mut Rng) -> DiscreteMeasure {
    let mut w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() }).collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    DiscreteMeasure::normalized(w).expect("positive mass")
}

fn c1_lp_vs_oracle(seed: u64) -> Result<Outcome> {
    let instances: Vec<(DistanceMatrix, DiscreteMeasure, DiscreteMeasure)> = (0..100)
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, &[k]));
            (random_metric(3, &mut rng), random_measure(3, &mut rng), random_measure(3, &mut rng))
        })
        .collect();
    let rows: Vec<(f64, f64)> = instances
        .par_iter()
        .map(|(d, p, q)| {
            let prob = BLProblem::new(d, p, q);
            Ok((d_bl(&prob)?.value, d_bl_oracle(&prob, 0.01)?))
        })
        .collect::<Result<_>>()?;
    let max_gap = rows.iter().map(|(l, o)| (l - o).abs()).fold(0.0, f64::max);
    let min_excess = rows.iter().map(|(l, o)| l - o).fold(f64::INFINITY, f64::min);
    let passed = max_gap <= 0.03 && min_excess >= -1e-9;
    Ok(outcome(
        1,
        passed,
        format!("max |lp - oracle| = {max_gap:.3e} (<= 0.03), min lp - oracle = {min_excess:.3e} (>= -1e-9)"),
        json!({ "max_gap": max_gap, "min_excess": min_excess, "values": rows }),
    ))
}

fn c2_analytic() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut oracle_ok = true;
    let mut rows = Vec::new();
    for dist in [0.1, 0.5, 1.0, 2.0, 10.0] {
        let d = DistanceMatrix::from_fn(2, |i, j| if i == j { 0.0 } else { dist })?;
        let p = DiscreteMeasure::point_mass(2, 0)?;
        let q = DiscreteMeasure::point_mass(2, 1)?;
        let prob = BLProblem::new(&d, &p, &q);
        let v = d_bl(&prob)?.value;
        let o = d_bl_oracle(&prob, 0.001)?;
        let exact = two_point_value(dist);
        worst = worst.max((v - exact).abs());
        // the grid oracle is a lower bound within one grid step of the optimum
        oracle_ok &= o <= exact + 1e-12 && o >= exact - 0.01;
        rows.push(json!({ "d": dist, "lp": v, "formula": exact, "oracle": o }));
    }
    let mut rng = rng_from_seed(2);
    let mut zero = true;
    for n in 1..=8 {
        let d = random_metric(n, &mut rng);
        let p = random_measure(n, &mut rng);
        zero &= d_bl(&BLProblem::new(&d, &p, &p))?.value == 0.0;
    }
    let passed = worst <= 1e-7 && oracle_ok && zero;
    Ok(outcome(
        2,
        passed,
        format!("max |lp - 2d/(d+2)| = {worst:.3e} (<= 1e-7), oracle consistent: {oracle_ok}, p = q gives 0: {zero}"),
        json!({ "cases": rows, "p_eq_q_zero": zero }),
    ))
}

fn c3_axioms(seed: u64) -> Result<Outcome> {
    let triples: Vec<(f64, f64)> = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, &[0, k]));
            let n = rng.gen_range(2..=12);
            let d = random_metric(n, &mut rng);
            let m: Vec<DiscreteMeasure> = (0..3).map(|_| random_measure(n, &mut rng)).collect();
            let v = |a: usize, b: usize| d_bl(&BLProblem::new(&d, &m[a], &m[b])).map(|r| r.value);
            let asym = (v(0, 1)? - v(1, 0)?).abs().max((v(1, 2)? - v(2, 1)?).abs());
            let tri = [
                v(0, 2)? - v(0, 1)? - v(1, 2)?,
                v(0, 1)? - v(0, 2)? - v(2, 1)?,
                v(1, 2)? - v(1, 0)? - v(0, 2)?,
            ]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
            Ok((asym, tri))
        })
        .collect::<Result<_>>()?;
    let max_asym = triples.iter().map(|t| t.0).fold(0.0, f64::max);
    let max_tri = triples.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let scaling: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, &[1, k]));
            let n = rng.gen_range(2..=12);
            let d = random_metric(n, &mut rng);
            let (p, q) = (random_measure(n, &mut rng), random_measure(n, &mut rng));
            let radius = rng.gen_range(0.1..5.0);
            let base = d_bl(&BLProblem::new(&d, &p, &q))?.value;
            let scaled = f_class_seminorm(&BLProblem::new(&d, &p, &q).with_radius(radius))?;
            Ok((scaled - radius * base).abs())
        })
        .collect::<Result<_>>()?;
    let max_scale = scaling.iter().copied().fold(0.0, f64::max);
    let passed = max_asym <= 1e-7 && max_tri <= 1e-7 && max_scale <= 1e-9;
    Ok(outcome(
        3,
        passed,
        format!(
            "max asymmetry {max_asym:.3e}, max triangle excess {max_tri:.3e} (<= 1e-7); max scaling error {max_scale:.3e} (<= 1e-9)"
        ),
        json!({ "max_asymmetry": max_asym, "max_triangle_excess": max_tri, "max_scaling_error": max_scale }),
    ))
}

const ALL_LOSSES: usize = 5;

fn random_loss(k: usize, rng: &mut Rng) -> LossSpec {
    match k % ALL_LOSSES {
        0 => LossSpec::Hinge,
        1 => LossSpec::Logistic,
        2 => LossSpec::Pinball { tau: rng.gen_range(0.05..0.95) },
        3 => LossSpec::Absolute,
        _ => LossSpec::EpsInsensitive { eps: rng.gen_range(0.0..0.5) },
    }
}

fn random_kernel(k: usize, dim: usize, rng: &mut Rng) -> KernelSpec {
    if k.is_multiple_of(2) {
        KernelSpec::GaussianRbf { gamma: rng.gen_range(0.2..3.0) }
    } else {
        KernelSpec::LinearOnBox {
            lo: (0..dim).map(|_| rng.gen_range(-2.0..-0.5)).collect(),
            hi: (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect(),
        }
    }
}

/// A point inside the box of a linear kernel, anywhere in `[-2, 2]^d`
/// otherwise.
fn random_x(kernel: &KernelSpec, dim: usize, rng: &mut Rng) -> Vec<f64> {
    match kernel {
        KernelSpec::LinearOnBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| rng.gen_range(*a..*b)).collect(),
        _ => (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

fn random_points(n: usize, loss: &LossSpec, kernel: &KernelSpec, dim: usize, rng: &mut Rng) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let x = random_x(kernel, dim, rng);
            let y = if loss.is_margin() {
                if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.gen_range(-2.0..2.0)
            };
            Point::new(x, y)
        })
        .collect()
}

fn c4_bounds(seed: u64) -> Result<Outcome> {
    let rows: Vec<Value> = (0..100usize)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, &[k as u64]));
            let dim = rng.gen_range(1..=3);
            let loss = random_loss(k, &mut rng);
            let kernel = random_kernel(k / ALL_LOSSES, dim, &mut rng);
            let n = rng.gen_range(1..=10);
            let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
            let points = random_points(n, &loss, &kernel, dim, &mut rng);
            let w = random_measure(n, &mut rng);
            let prob = SvmProblem::new(points, w, loss, kernel.clone(), lambda)?;
            let sol = solve(&prob, &SolverConfig::default())?;
            let test: Vec<Vec<f64>> = (0..50).map(|_| random_x(&kernel, dim, &mut rng)).collect();
            let b = check_bounds(&prob, &sol, &test)?;
            Ok(json!({
                "loss": loss.name(), "kernel": kernel.name(), "lambda": lambda,
                "sup_norm": b.sup_norm, "sup_bound": b.sup_bound, "risk": b.risk, "risk_bound": b.risk_bound,
                "ok": b.sup_ok && b.risk_ok,
            }))
        })
        .collect::<Result<_>>()?;
    let failures = rows.iter().filter(|r| r["ok"] != true).count();
    let worst = rows
        .iter()
        .map(|r| {
            let s = r["sup_norm"].as_f64().unwrap_or(0.0) / r["sup_bound"].as_f64().unwrap_or(1.0);
            let q = r["risk"].as_f64().unwrap_or(0.0).abs() / r["risk_bound"].as_f64().unwrap_or(1.0);
            s.max(q)
        })
        .fold(0.0, f64::max);
    Ok(outcome(
        4,
        failures == 0,
        format!("{failures} of 100 instances violate a bound; largest value/bound ratio {worst:.4}"),
        json!({ "instances": rows }),
    ))
}

/// Primal objective `Σ w_i L⋆(y_i, (Gα)_i) + λ αᵀGα` with its own Gram
/// matrix.
struct PrimalOracle {
    g: Vec<Vec<f64>>,
    w: Vec<f64>,
    y: Vec<f64>,
    loss: LossSpec,
    lambda: f64,
}

impl PrimalOracle {
    fn new(points: &[Point], w: &[f64], kernel: &KernelSpec, loss: LossSpec, lambda: f64) -> Self {
        let g = points
            .iter()
            .map(|a| points.iter().map(|b| kernel.eval(&a.x, &b.x)).collect())
            .collect();
        Self {
            g,
            w: w.to_vec(),
            y: points.iter().map(|p| p.y).collect(),
            loss,
            lambda,
        }
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        let n = alpha.len();
        let mut total = 0.0;
        for i in 0..n {
            let fi: f64 = (0..n).map(|j| self.g[i][j] * alpha[j]).sum();
            total += self.w[i] * self.loss.shifted_loss(&[], self.y[i], fi) + self.lambda * alpha[i] * fi;
        }
        total
    }

    /// Minimum over `α_i ∈ h·ℤ ∩ [−A_i, A_i]` with `A_i = w_i |L|₁ / (2λ)`,
    /// a box that contains every minimizer.
    fn grid_min(&self, h: f64) -> (Vec<f64>, f64) {
        let n = self.w.len();
        let axes: Vec<Vec<f64>> = self
            .w
            .iter()
            .map(|&wi| {
                let a = wi * self.loss.lip() / (2.0 * self.lambda);
                let k = (a / h).ceil() as i64;
                (-k..=k).map(|s| s as f64 * h).collect()
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        (0..total)
            .into_par_iter()
            .fold(
                || (vec![0.0; n], f64::INFINITY),
                |best, mut code| {
                    let mut alpha = vec![0.0; n];
                    for (i, ax) in axes.iter().enumerate() {
                        alpha[i] = ax[code % ax.len()];
                        code /= ax.len();
                    }
                    let v = self.value(&alpha);
                    if v < best.1 {
                        (alpha, v)
                    } else {
                        best
                    }
                },
            )
            .reduce(|| (vec![0.0; n], f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}

fn c5_solver_oracle(seed: u64) -> Result<Outcome> {
    // single point at x = 0.3, y = 1, absolute loss, λ = 1/4, Gaussian kernel
    let points = vec![Point::new(vec![0.3], 1.0)];
    let kernel = KernelSpec::GaussianRbf { gamma: 1.0 };
    let prob = SvmProblem::new(points.clone(), DiscreteMeasure::uniform(1)?, LossSpec::Absolute, kernel.clone(), 0.25)?;
    let sol = solve(&prob, &SolverConfig::default())?;
    let oracle = PrimalOracle::new(&points, &[1.0], &kernel, LossSpec::Absolute, 0.25);
    let (a1, j1) = oracle.grid_min(1e-4);
    let f_grid = a1[0] * kernel.eval(&points[0].x, &points[0].x);
    let f_err = (sol.f_values[0] - f_grid).abs();
    let j_err = (sol.objective - j1).abs();

    let rows: Vec<(f64, f64)> = (0..20u64)
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, &[k]));
            let n = rng.gen_range(1..=3);
            let dim = rng.gen_range(1..=2);
            let loss = random_loss(k as usize, &mut rng);
            let kernel = random_kernel((k / ALL_LOSSES as u64) as usize, dim, &mut rng);
            let lambda = rng.gen_range(0.5..2.0);
            let points = random_points(n, &loss, &kernel, dim, &mut rng);
            let w = random_measure(n, &mut rng);
            let prob = SvmProblem::new(points.clone(), w.clone(), loss, kernel.clone(), lambda)?;
            let sol = solve(&prob, &SolverConfig::default())?;
            let oracle = PrimalOracle::new(&points, w.weights(), &kernel, loss, lambda);
            let (_, j_grid) = oracle.grid_min(0.01);
            Ok((sol.objective, j_grid))
        })
        .collect::<Result<_>>()?;
    let max_gap = rows.iter().map(|(s, g)| (s - g).abs()).fold(0.0, f64::max);
    let passed = f_err <= 1e-3 && j_err <= 1e-3 && max_gap <= 0.02;
    Ok(outcome(
        5,
        passed,
        format!(
            "n=1: |f - f_grid| = {f_err:.3e}, |J - J_grid| = {j_err:.3e} (<= 1e-3); n<=3: max |J - J_grid| = {max_gap:.3e} (<= 0.02)"
        ),
        json!({ "single": { "f": sol.f_values[0], "f_grid": f_grid, "objective": sol.objective, "objective_grid": j1 },
                "random": rows }),
    ))
}

fn c6_continuity(seed: u64) -> Result<Outcome> {
    let rows: Vec<(f64, f64)> = (0..100usize)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, &[k as u64]));
            let dim = rng.gen_range(1..=2);
            let loss = random_loss(k, &mut rng);
            let kernel = random_kernel(k / ALL_LOSSES, dim, &mut rng);
            let n = rng.gen_range(2..=8);
            let lambda = 10f64.powf(rng.gen_range(-1.5..0.5));
            let points = random_points(n, &loss, &kernel, dim, &mut rng);
            let set = TrainingSet::new(points, kernel)?;
            let p = random_measure(n, &mut rng);
            let dir = random_measure(n, &mut rng);
            let q = contaminate(&p, &dir, rng.gen_range(0.01..0.5))?;
            let pp = SvmProblem::on(Arc::clone(&set), p, loss, lambda)?;
            let qq = SvmProblem::on(set, q, loss, lambda)?;
            let r = risk_continuity_check(&pp, &qq, &SolverConfig::default())?;
            Ok((r.fine_slack(), r.coarse_slack()))
        })
        .collect::<Result<_>>()?;
    let min_fine = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let min_coarse = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let passed = min_fine >= -1e-12 && min_coarse >= -1e-12;
    Ok(outcome(
        6,
        passed,
        format!("min slack: sup-norm bound {min_fine:.3e}, RKHS bound {min_coarse:.3e} (>= 0)"),
        json!({ "min_fine_slack": min_fine, "min_coarse_slack": min_coarse, "slacks": rows }),
    ))
}

/// Count vectors of all `n^n` ordered resamples of `n` positions.
fn ordered_tuple_counts(n: usize) -> HashMap<Vec<u32>, u64> {
    let mut out = HashMap::new();
    for code in 0..n.pow(n as u32) {
        let mut c = vec![0u32; n];
        let mut x = code;
        for _ in 0..n {
            c[x % n] += 1;
            x /= n;
        }
        *out.entry(c).or_insert(0) += 1;
    }
    out
}

/// Walks all n^n ordered resamples, assigns each to its nearest law atom and
/// checks every atom weight equals (tuples assigned) / n^n exactly.
fn tuple_weights_match(
    set: &Arc<TrainingSet>,
    data: &[usize],
    law: &BootstrapLaw,
    estimator: Estimator,
    cfg: &EstimatorConfig,
) -> Result<bool> {
    let n = data.len();
    let total = n.pow(n as u32);
    let mut hits = vec![0u64; law.len()];
    for code in 0..total {
        let mut counts = vec![0u32; set.len()];
        let mut x = code;
        for _ in 0..n {
            counts[data[x % n]] += 1;
            x /= n;
        }
        let dist: Vec<f64> = match (estimate(set, &counts, n, estimator, cfg)?, &law.atoms) {
            (Atom::Scalar(v), Atoms::Scalars(vals)) => vals.iter().map(|u| (u - v).abs()).collect(),
            (Atom::Function(s), Atoms::Functions(sols)) => {
                let e = set.embed(&s.alpha);
                sols.iter()
                    .map(|t| {
                        let g = set.embed(&t.alpha);
                        e.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                    })
                    .collect()
            }
            _ => return Ok(false),
        };
        let (k, &best) = dist
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("law has atoms");
        if best >= DEDUP_TOL {
            return Ok(false);
        }
        hits[k] += 1;
    }
    Ok(law
        .weights
        .weights()
        .iter()
        .zip(&hits)
        .all(|(&w, &h)| w == h as f64 / total as f64))
}

fn c7_exact_bootstrap(seed: u64) -> Result<Outcome> {
    let points: Vec<Point> = [(-0.8, -1.0), (0.1, 1.0), (0.9, 1.0), (-0.2, -1.0)]
        .iter()
        .map(|&(x, y)| Point::new(vec![x], y))
        .collect();
    let set = TrainingSet::new(points, KernelSpec::GaussianRbf { gamma: 1.0 })?;
    let cfg = EstimatorConfig {
        loss: LossSpec::Hinge,
        lambda: 0.1,
        solver: SolverConfig::default(),
    };

    let law2 = bootstrap_law_exact(&set, &[0, 1], Estimator::Operator, &cfg)?;
    let n2_ok = law2.weights.weights() == [0.25, 0.5, 0.25];

    let (ms, den) = enumerate_multisets(3)?;
    let brute = ordered_tuple_counts(3);
    let counts_ok = den == 27 && ms.len() == brute.len() && ms.iter().all(|(c, num)| brute.get(c) == Some(num));
    let data = [0usize, 1, 2];
    let mut mc_rows = Vec::new();
    let mut n3_ok = counts_ok;
    let mut medians = Vec::new();
    for estimator in [Estimator::Operator, Estimator::Risk] {
        let exact = bootstrap_law_exact(&set, &data, estimator, &cfg)?;
        n3_ok &= tuple_weights_match(&set, &data, &exact, estimator, &cfg)?;
        let mut dists: Vec<f64> = (0..10u64)
            .map(|k| {
                let mc = bootstrap_law_mc(&set, &data, 5000, estimator, &cfg, derive_seed(seed, &[k]))?;
                Ok(law_distance(&mc, &exact)?.value)
            })
            .collect::<Result<_>>()?;
        mc_rows.push(json!({ "estimator": estimator, "distances": dists.clone() }));
        dists.sort_by(f64::total_cmp);
        medians.push((dists[4] + dists[5]) / 2.0);
    }
    let median_max = medians.iter().copied().fold(0.0, f64::max);
    let passed = n2_ok && n3_ok && median_max <= 0.05;
    Ok(outcome(
        7,
        passed,
        format!(
            "n=2 weights exact: {n2_ok}; n=3 weights match brute force: {n3_ok}; median d_BL(MC, exact) = {:.3e} (S), {:.3e} (R) (<= 0.05)",
            medians[0], medians[1]
        ),
        json!({ "n2_weights": law2.weights.weights(), "n3_ok": n3_ok, "mc": mc_rows, "medians": medians }),
    ))
}

fn c8_gc_decay(seed: u64) -> Result<Outcome> {
    let points: Vec<Point> = (0..4).map(|i| Point::new(vec![3.0 * i as f64], 1.0)).collect();
    let metric = build_euclidean_space(&points, 1.0)?;
    let measures = [DiscreteMeasure::uniform(4)?, DiscreteMeasure::point_mass(4, 0)?];
    let rows = gc_decay_probe(&measures, &metric, &[20, 80, 320], 50, seed)?;
    let level = crate::robustness::GC_LEVELS.iter().position(|&e| e == 0.1).expect("0.1 is a level");
    let first = rows.first().expect("nonempty grid").fractions[level];
    let last = rows.last().expect("nonempty grid").fractions[level];
    let nested = rows.iter().all(|r| r.fractions.windows(2).all(|w| w[0] >= w[1]));
    let passed = last < first && nested;
    Ok(outcome(
        8,
        passed,
        format!("exceedance at eps=0.1: n=20 {first:.2}, n=320 {last:.2} (strictly lower); nonincreasing in eps: {nested}"),
        json!({ "rows": rows }),
    ))
}

/// Master seeds for the robustness signature.
pub const C9_SEEDS: usize = 5;

fn c9_robustness(seed: u64) -> Result<Outcome> {
    let mut table = Vec::new();
    let mut passed = true;
    let mut detail = Vec::new();
    for estimator in [Estimator::Operator, Estimator::Risk] {
        let mut wins = 0;
        let mut noise_below = 0;
        for k in 0..C9_SEEDS as u64 {
            let cfg = RobustnessConfig {
                estimator,
                ..RobustnessConfig::default_scenario(derive_seed(seed, &[9, k]))
            };
            let rows = bootstrap_qr_probe(&cfg)?;
            let at = |eps: f64| rows.iter().find(|r| r.eps == eps).map(|r| r.value).expect("eps on grid");
            let (pp, small, large) = (at(0.0), at(0.02), at(0.3));
            wins += (small < large) as usize;
            noise_below += (pp < large) as usize;
            table.push(json!({ "estimator": estimator, "seed_index": k, "p_vs_p": pp, "eps_0.02": small, "eps_0.3": large }));
        }
        passed &= wins >= 4 && noise_below == C9_SEEDS;
        detail.push(format!(
            "{}: small < large in {wins}/{C9_SEEDS}, P-vs-P < large in {noise_below}/{C9_SEEDS}",
            if estimator == Estimator::Operator { "S" } else { "R" }
        ));
    }
    Ok(outcome(9, passed, detail.join("; "), json!({ "cells": table })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_metric_is_a_metric() {
        let mut rng = rng_from_seed(4);
        for n in 1..10 {
            assert!(crate::metric_space::validate_metric(&random_metric(n, &mut rng)));
        }
    }

    #[test]
    fn primal_oracle_matches_solver_objective() {
        let points = vec![Point::new(vec![0.0], 1.0), Point::new(vec![1.0], -1.0)];
        let kernel = KernelSpec::GaussianRbf { gamma: 1.0 };
        let w = DiscreteMeasure::uniform(2).unwrap();
        let prob = SvmProblem::new(points.clone(), w.clone(), LossSpec::Hinge, kernel.clone(), 0.7).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        let o = PrimalOracle::new(&points, w.weights(), &kernel, LossSpec::Hinge, 0.7);
        assert!((o.value(&sol.alpha) - sol.objective).abs() < 1e-9);
        let (_, j) = o.grid_min(0.01);
        assert!(j >= sol.objective - 1e-9 && j - sol.objective < 0.02);
    }

    #[test]
    fn ordered_tuples_cover_all_resamples() {
        let c = ordered_tuple_counts(3);
        assert_eq!(c.values().sum::<u64>(), 27);
        assert_eq!(c[&vec![1, 1, 1]], 6);
    }

    #[test]
    fn fast_checks_pass() {
        for id in [2, 3] {
            let o = run(id, 0).unwrap();
            assert!(o.passed, "{}: {}", o.title, o.detail);
        }
    }
}
