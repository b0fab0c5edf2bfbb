//! Finite-sample probes of robustness of the SVM estimators and of their
//! bootstrap approximations, plus a Glivenko-Cantelli decay table.
//!
//! Probes replace suprema over neighborhoods and over `n ≥ n₀` by maxima
//! over finite contamination directions and a finite `n` grid. Values are
//! Monte-Carlo estimates; all are deterministic functions of the config.
//!
//! Seed layout: dataset draws use `(DATASET, role, direction, n, rep)` and do
//! not depend on `eps` or on the estimator, so cells along the `eps` grid
//! and the S and R probes see coupled samples.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bl_metric::{d_bl, BLProblem};
use crate::bootstrap::{
    assemble, bootstrap_law_mc, law_distance, BootstrapLaw, Estimator, EstimatorConfig, LawMeta, Replicates,
};
use crate::error::{Error, Result};
use crate::loss_kernel::{KernelSpec, LossSpec};
use crate::measures::{contaminate, sample, sample_with, DiscreteMeasure};
use crate::metric_space::{build_euclidean_space, DistanceMatrix, Point};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::svm::{SolverConfig, TrainingSet};

/// Exceedance levels of the Glivenko-Cantelli table.
pub const GC_LEVELS: [f64; 3] = [0.05, 0.1, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    pub points: Vec<Point>,
    pub base: DiscreteMeasure,
    pub directions: Vec<DiscreteMeasure>,
    pub eps_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub m: usize,
    pub inner_b: usize,
    pub estimator: Estimator,
    pub loss: LossSpec,
    pub kernel: KernelSpec,
    pub lambda: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub master_seed: u64,
    /// Weight of the response coordinate in the data-space metric.
    #[serde(default = "one")]
    pub y_weight: f64,
}

fn one() -> f64 {
    1.0
}

fn ascending<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RobustnessConfig {
    /// Desk-scale scenario: eight clean points on a line labelled by sign,
    /// and two mislabelled outliers that carry no base mass and serve as
    /// contamination directions.
    pub fn default_scenario(master_seed: u64) -> Self {
        let mut points: Vec<Point> = (0..8)
            .map(|i| {
                let x = -1.75 + 0.5 * i as f64;
                Point::new(vec![x], if x > 0.0 { 1.0 } else { -1.0 })
            })
            .collect();
        points.push(Point::new(vec![2.5], -1.0));
        points.push(Point::new(vec![-2.5], 1.0));
        let base = DiscreteMeasure::uniform_on(10, &(0..8).collect::<Vec<_>>()).expect("valid base");
        let directions = vec![DiscreteMeasure::uniform_on(10, &[8, 9]).expect("valid direction")];
        Self {
            points,
            base,
            directions,
            eps_grid: vec![0.0, 0.02, 0.3],
            n_grid: vec![20],
            m: 10,
            inner_b: 50,
            estimator: Estimator::Operator,
            loss: LossSpec::Hinge,
            kernel: KernelSpec::GaussianRbf { gamma: 1.0 },
            lambda: 0.1,
            solver: SolverConfig::default(),
            master_seed,
            y_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = self.points.len();
        if self.base.support_size() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.base.support_size(),
                context: "base measure".into(),
            });
        }
        if self.directions.is_empty() {
            return Err(Error::invalid("directions", "need at least one contamination direction"));
        }
        for d in &self.directions {
            self.base.check_same_support(d, "contamination direction")?;
        }
        if self.eps_grid.is_empty() || !ascending(&self.eps_grid) {
            return Err(Error::invalid("eps_grid", "must be nonempty and strictly ascending"));
        }
        if self.eps_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::invalid("eps_grid", "values must lie in [0, 1]"));
        }
        if self.n_grid.is_empty() || !ascending(&self.n_grid) || self.n_grid[0] == 0 {
            return Err(Error::invalid("n_grid", "must be nonempty, strictly ascending and positive"));
        }
        if self.m < 2 {
            return Err(Error::invalid("m", "needs at least two outer replicates"));
        }
        if self.inner_b == 0 {
            return Err(Error::invalid("inner_b", "needs at least one replicate"));
        }
        if !(self.y_weight.is_finite() && self.y_weight >= 0.0) {
            return Err(Error::invalid("y_weight", "must be finite and nonnegative"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        self.loss.validate()?;
        self.kernel.validate()?;
        Ok(())
    }

    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            loss: self.loss,
            lambda: self.lambda,
            solver: self.solver,
        }
    }

    fn setup(&self) -> Result<(Arc<TrainingSet>, DistanceMatrix)> {
        self.validate()?;
        let set = TrainingSet::new(self.points.clone(), self.kernel.clone())?;
        let metric = build_euclidean_space(&self.points, self.y_weight)?;
        Ok((set, metric))
    }
}

/// Which measure a sample is drawn from in a paired comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Q,
    P,
}

impl Role {
    fn label(self) -> u64 {
        match self {
            Role::Q => stream::ROLE_Q,
            Role::P => stream::ROLE_P,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Inner,
    Outer,
}

/// One `(eps, n)` cell. `value` is the maximum of `per_direction`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub probe: Probe,
    pub estimator: Estimator,
    pub eps: f64,
    pub n: usize,
    /// d_BL(Q, P) on the data space, maximised over directions.
    pub data_distance: f64,
    pub value: f64,
    pub per_direction: Vec<f64>,
}

impl RobustnessRow {
    pub fn check(&self) -> Result<()> {
        for v in std::iter::once(self.data_distance)
            .chain(std::iter::once(self.value))
            .chain(self.per_direction.iter().copied())
        {
            if !(0.0..=2.0).contains(&v) {
                return Err(Error::Invariant(format!(
                    "{:?} probe at eps={} n={} reported d_BL {v} outside [0, 2]",
                    self.probe, self.eps, self.n
                )));
            }
        }
        Ok(())
    }
}

/// Law of the estimator itself: `b` atoms, each the estimator on a fresh
/// size-`n` i.i.d. sample from `measure`.
pub fn estimator_law(
    set: &Arc<TrainingSet>,
    measure: &DiscreteMeasure,
    n: usize,
    b: usize,
    estimator: Estimator,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<BootstrapLaw> {
    if measure.support_size() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            found: measure.support_size(),
            context: "estimator law measure".into(),
        });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if b == 0 {
        return Err(Error::invalid("B", "needs at least one replicate"));
    }
    let samples = (0..b)
        .map(|k| {
            let s = derive_seed(seed, &[stream::ESTIMATOR_LAW, k as u64]);
            let mut rng = rng_from_seed(s);
            let mut counts = vec![0u32; set.len()];
            for i in sample_with(measure, n, &mut rng) {
                counts[i] += 1;
            }
            (counts, 1, s)
        })
        .collect();
    assemble(
        set,
        samples,
        b as u64,
        n,
        estimator,
        cfg,
        LawMeta {
            n,
            replicates: Replicates::MonteCarlo(b),
            master_seed: Some(seed),
        },
    )
}

fn data_distance(metric: &DistanceMatrix, q: &DiscreteMeasure, p: &DiscreteMeasure) -> Result<f64> {
    Ok(d_bl(&BLProblem::new(metric, p, q))?.value)
}

fn contaminated(cfg: &RobustnessConfig) -> Result<Vec<Vec<DiscreteMeasure>>> {
    cfg.eps_grid
        .iter()
        .map(|&eps| cfg.directions.iter().map(|d| contaminate(&cfg.base, d, eps)).collect())
        .collect()
}

/// Inner probe: d_BL between the estimator laws under `Q` and under `P`,
/// with `inner_b` atoms each.
pub fn uqr_probe(cfg: &RobustnessConfig) -> Result<Vec<RobustnessRow>> {
    let (set, metric) = cfg.setup()?;
    let ecfg = cfg.estimator_config();
    let qs = contaminated(cfg)?;
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
        for &n in &cfg.n_grid {
            let mut per = Vec::new();
            let mut data = 0.0f64;
            for (di, q) in qs[ei].iter().enumerate() {
                let seed = |role: Role| derive_seed(cfg.master_seed, &[stream::ESTIMATOR_LAW, role.label(), di as u64, n as u64]);
                let lq = estimator_law(&set, q, n, cfg.inner_b, cfg.estimator, &ecfg, seed(Role::Q))?;
                let lp = estimator_law(&set, &cfg.base, n, cfg.inner_b, cfg.estimator, &ecfg, seed(Role::P))?;
                per.push(law_distance(&lq, &lp)?.value);
                data = data.max(data_distance(&metric, q, &cfg.base)?);
            }
            let row = RobustnessRow {
                probe: Probe::Inner,
                estimator: cfg.estimator,
                eps,
                n,
                data_distance: data,
                value: per.iter().copied().fold(0.0, f64::max),
                per_direction: per,
            };
            row.check()?;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Outer probe: for each cell, `m` datasets from `Q` and `m` from `P`, one
/// bootstrap law per dataset, and d_BL between the two uniform empirical
/// measures over laws.
pub fn bootstrap_qr_probe(cfg: &RobustnessConfig) -> Result<Vec<RobustnessRow>> {
    let (set, metric) = cfg.setup()?;
    let ecfg = cfg.estimator_config();
    let qs = contaminated(cfg)?;
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
        for &n in &cfg.n_grid {
            let mut per = Vec::new();
            let mut data = 0.0f64;
            for (di, q) in qs[ei].iter().enumerate() {
                per.push(outer_cell(cfg, &set, &ecfg, q, di, n)?);
                data = data.max(data_distance(&metric, q, &cfg.base)?);
            }
            let row = RobustnessRow {
                probe: Probe::Outer,
                estimator: cfg.estimator,
                eps,
                n,
                data_distance: data,
                value: per.iter().copied().fold(0.0, f64::max),
                per_direction: per,
            };
            row.check()?;
            rows.push(row);
        }
    }
    Ok(rows)
}

fn outer_cell(
    cfg: &RobustnessConfig,
    set: &Arc<TrainingSet>,
    ecfg: &EstimatorConfig,
    q: &DiscreteMeasure,
    direction: usize,
    n: usize,
) -> Result<f64> {
    let m = cfg.m;
    let jobs: Vec<(Role, usize)> = [Role::Q, Role::P]
        .iter()
        .flat_map(|&r| (0..m).map(move |k| (r, k)))
        .collect();
    let laws: Vec<BootstrapLaw> = jobs
        .par_iter()
        .map(|&(role, k)| {
            let path = [role.label(), direction as u64, n as u64, k as u64];
            let data_seed = derive_seed(cfg.master_seed, &[&[stream::DATASET][..], &path].concat());
            let measure = if role == Role::Q { q } else { &cfg.base };
            let data = sample(measure, n, data_seed)?;
            let resample_seed = derive_seed(cfg.master_seed, &[&[stream::RESAMPLE][..], &path].concat());
            bootstrap_law_mc(set, &data, cfg.inner_b, cfg.estimator, ecfg, resample_seed)
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..2 * m).flat_map(|i| ((i + 1)..2 * m).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| law_distance(&laws[i], &laws[j]).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut d = vec![0.0; 4 * m * m];
    for (&(i, j), &v) in pairs.iter().zip(&vals) {
        d[i * 2 * m + j] = v;
        d[j * 2 * m + i] = v;
    }
    let outer = DistanceMatrix::from_row_major(2 * m, d)?;
    let on = |r: std::ops::Range<usize>| DiscreteMeasure::uniform_on(2 * m, &r.collect::<Vec<_>>());
    let (wq, wp) = (on(0..m)?, on(m..2 * m)?);
    Ok(d_bl(&BLProblem::new(&outer, &wp, &wq))?.value)
}

/// One row of the Glivenko-Cantelli table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcRow {
    pub n: usize,
    pub levels: Vec<f64>,
    /// Maximum over measures of the exceedance fraction, per level.
    pub fractions: Vec<f64>,
    /// `per_measure[k][l]`: fraction for measure `k` at level `l`.
    pub per_measure: Vec<Vec<f64>>,
    /// Largest observed d_BL(P_n, P) over measures and reps.
    pub max_distance: f64,
}

/// Fraction of `reps` samples with d_BL(P_n, P) above each of
/// [`GC_LEVELS`], maximised over `measures`.
pub fn gc_decay_probe(
    measures: &[DiscreteMeasure],
    metric: &DistanceMatrix,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<GcRow>> {
    if measures.len() < 2 {
        return Err(Error::invalid("measures", "need at least two measures"));
    }
    for p in measures {
        if p.support_size() != metric.len() {
            return Err(Error::DimensionMismatch {
                expected: metric.len(),
                found: p.support_size(),
                context: "gc measure".into(),
            });
        }
    }
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::invalid("n_grid", "must be nonempty and positive"));
    }
    if reps == 0 {
        return Err(Error::invalid("reps", "needs at least one rep"));
    }
    n_grid
        .iter()
        .map(|&n| {
            let dists: Vec<Vec<f64>> = measures
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    (0..reps)
                        .into_par_iter()
                        .map(|r| {
                            let s = derive_seed(seed, &[stream::GC, k as u64, n as u64, r as u64]);
                            let idx = sample(p, n, s)?;
                            let pn = crate::measures::empirical(&idx, p.support_size())?;
                            Ok(d_bl(&BLProblem::new(metric, &pn, p))?.value)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let per_measure: Vec<Vec<f64>> = dists
                .iter()
                .map(|ds| {
                    GC_LEVELS
                        .iter()
                        .map(|&e| ds.iter().filter(|&&d| d > e).count() as f64 / reps as f64)
                        .collect()
                })
                .collect();
            let fractions = (0..GC_LEVELS.len())
                .map(|l| per_measure.iter().map(|f| f[l]).fold(0.0, f64::max))
                .collect();
            let max_distance = dists.iter().flatten().copied().fold(0.0, f64::max);
            Ok(GcRow {
                n,
                levels: GC_LEVELS.to_vec(),
                fractions,
                per_measure,
                max_distance,
            })
        })
        .collect()
}
