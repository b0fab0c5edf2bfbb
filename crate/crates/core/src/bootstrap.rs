//! Bootstrap laws `L_n(S; P_n)` and `L_n(R; P_n)` as finite weighted atom
//! sets, and d_BL between laws.
//!
//! A dataset is a list of indices into a shared [`TrainingSet`]. A resample
//! is summarized by its count vector over the base points, so the estimator
//! sees the resample's empirical measure and identical multisets yield
//! bit-identical atoms. Function-valued atoms are compared through their
//! exact RKHS distance.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bl_metric::{d_bl, BLProblem, BLResult};
use crate::error::{Error, Result};
use crate::loss_kernel::LossSpec;
use crate::measures::{from_counts, DiscreteMeasure};
use crate::metric_space::DistanceMatrix;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::svm::{risk, rkhs_distance, solve, SolverConfig, SvmProblem, SvmSolution, TrainingSet};

/// Atoms closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-10;

/// Largest `n` accepted by [`bootstrap_law_exact`].
pub const EXACT_MAX_N: usize = 5;

/// Which statistic the law describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    /// The SVM operator, valued in the RKHS.
    #[serde(rename = "S", alias = "s", alias = "operator")]
    Operator,
    /// The SVM risk functional, real valued.
    #[serde(rename = "R", alias = "r", alias = "risk")]
    Risk,
}

/// Loss, regularization and solver settings shared by every replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub loss: LossSpec,
    pub lambda: f64,
    pub solver: SolverConfig,
}

/// Atoms of a law, one variant per estimator.
#[derive(Debug, Clone)]
pub enum Atoms {
    Functions(Vec<SvmSolution>),
    Scalars(Vec<f64>),
}

impl Atoms {
    pub fn len(&self) -> usize {
        match self {
            Atoms::Functions(v) => v.len(),
            Atoms::Scalars(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn estimator(&self) -> Estimator {
        match self {
            Atoms::Functions(_) => Estimator::Operator,
            Atoms::Scalars(_) => Estimator::Risk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Replicates {
    MonteCarlo(usize),
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawMeta {
    pub n: usize,
    pub replicates: Replicates,
    pub master_seed: Option<u64>,
}

/// A finite law over estimator values.
#[derive(Debug, Clone)]
pub struct BootstrapLaw {
    pub atoms: Atoms,
    pub weights: DiscreteMeasure,
    pub meta: LawMeta,
}

impl BootstrapLaw {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Evaluates the estimator on the empirical measure with the given counts.
pub(crate) fn estimate(
    set: &Arc<TrainingSet>,
    counts: &[u32],
    n: usize,
    estimator: Estimator,
    cfg: &EstimatorConfig,
) -> Result<Atom> {
    let counts: Vec<usize> = counts.iter().map(|&c| c as usize).collect();
    let w = from_counts(&counts, n);
    let prob = SvmProblem::on(Arc::clone(set), w, cfg.loss, cfg.lambda)?;
    let sol = solve(&prob, &cfg.solver)?;
    Ok(match estimator {
        Estimator::Operator => Atom::Function(sol),
        Estimator::Risk => Atom::Scalar(risk(&sol, &prob.weights, set.points(), &cfg.loss)?),
    })
}

#[derive(Debug, Clone)]
pub(crate) enum Atom {
    Function(SvmSolution),
    Scalar(f64),
}

/// Evaluates the estimator once per distinct count vector (in parallel) and
/// assembles a law with the given integer weights over `denominator`.
/// `seeds[k]` names the replicate reported if that evaluation fails.
pub(crate) fn assemble(
    set: &Arc<TrainingSet>,
    samples: Vec<(Vec<u32>, u64, u64)>,
    denominator: u64,
    n: usize,
    estimator: Estimator,
    cfg: &EstimatorConfig,
    meta: LawMeta,
) -> Result<BootstrapLaw> {
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut unique: Vec<(Vec<u32>, u64, u64)> = Vec::new();
    for (counts, weight, seed) in samples {
        match index.get(&counts) {
            Some(&k) => unique[k].1 += weight,
            None => {
                index.insert(counts.clone(), unique.len());
                unique.push((counts, weight, seed));
            }
        }
    }
    // canonical order makes the law independent of data and replicate order
    unique.sort_by(|a, b| a.0.cmp(&b.0));
    let atoms: Vec<Atom> = unique
        .par_iter()
        .map(|(counts, _, seed)| {
            estimate(set, counts, n, estimator, cfg).map_err(|e| Error::Replicate {
                seed: *seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let counts: Vec<u64> = unique.iter().map(|u| u.1).collect();
    let (atoms, counts) = dedup(atoms, counts, set);
    let weights = counts.iter().map(|&c| c as f64 / denominator as f64).collect();
    Ok(BootstrapLaw {
        atoms,
        weights: DiscreteMeasure::new(weights)?,
        meta,
    })
}

/// Merges atoms closer than [`DEDUP_TOL`], summing their integer weights.
fn dedup(atoms: Vec<Atom>, weights: Vec<u64>, set: &Arc<TrainingSet>) -> (Atoms, Vec<u64>) {
    let mut out_w: Vec<u64> = Vec::new();
    match atoms.first() {
        Some(Atom::Scalar(_)) | None => {
            let mut vals: Vec<f64> = Vec::new();
            for (a, w) in atoms.into_iter().zip(weights) {
                let Atom::Scalar(v) = a else { unreachable!() };
                match vals.iter().position(|u| (u - v).abs() < DEDUP_TOL) {
                    Some(k) => out_w[k] += w,
                    None => {
                        vals.push(v);
                        out_w.push(w);
                    }
                }
            }
            (Atoms::Scalars(vals), out_w)
        }
        Some(Atom::Function(_)) => {
            let mut sols: Vec<SvmSolution> = Vec::new();
            let mut emb: Vec<Vec<f64>> = Vec::new();
            for (a, w) in atoms.into_iter().zip(weights) {
                let Atom::Function(s) = a else { unreachable!() };
                let e = set.embed(&s.alpha);
                match emb.iter().position(|u| euclid(u, &e) < DEDUP_TOL) {
                    Some(k) => out_w[k] += w,
                    None => {
                        emb.push(e);
                        sols.push(s);
                        out_w.push(w);
                    }
                }
            }
            (Atoms::Functions(sols), out_w)
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_data(set: &TrainingSet, data: &[usize]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(&i) = data.iter().find(|&&i| i >= set.len()) {
        return Err(Error::IndexOutOfRange { index: i, size: set.len() });
    }
    Ok(())
}

/// Monte-Carlo bootstrap law from `b` size-`n` resamples (with replacement)
/// of `data`, where `n = data.len()`. Replicate `k` draws from the stream
/// `derive_seed(seed, [RESAMPLE, k])`.
pub fn bootstrap_law_mc(
    set: &Arc<TrainingSet>,
    data: &[usize],
    b: usize,
    estimator: Estimator,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<BootstrapLaw> {
    check_data(set, data)?;
    if b == 0 {
        return Err(Error::invalid("B", "needs at least one replicate"));
    }
    let n = data.len();
    let samples: Vec<(Vec<u32>, u64, u64)> = (0..b)
        .map(|k| {
            let s = derive_seed(seed, &[stream::RESAMPLE, k as u64]);
            let mut rng = rng_from_seed(s);
            let mut counts = vec![0u32; set.len()];
            for _ in 0..n {
                use rand::Rng as _;
                counts[data[rng.gen_range(0..n)]] += 1;
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

/// All multisets of size `n` drawn from `n` labelled positions, as count
/// vectors with multinomial numerators `n!/∏c_i!` over the common
/// denominator `n^n`.
pub fn enumerate_multisets(n: usize) -> Result<(Vec<(Vec<u32>, u64)>, u64)> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if n > EXACT_MAX_N {
        return Err(Error::SupportTooLarge {
            size: n,
            limit: EXACT_MAX_N,
            what: "exact bootstrap enumeration",
        });
    }
    let fact = |k: u32| (1..=k as u64).product::<u64>();
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    fn rec(pos: usize, left: u32, counts: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            out.push(counts.clone());
            return;
        }
        for c in (0..=left).rev() {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, out);
        }
    }
    let mut all = Vec::new();
    rec(0, n as u32, &mut counts, &mut all);
    let nf = fact(n as u32);
    for c in all {
        let num = nf / c.iter().map(|&k| fact(k)).product::<u64>();
        out.push((c, num));
    }
    Ok((out, (n as u64).pow(n as u32)))
}

/// Exact bootstrap law by enumerating every multiset of `data` positions.
pub fn bootstrap_law_exact(
    set: &Arc<TrainingSet>,
    data: &[usize],
    estimator: Estimator,
    cfg: &EstimatorConfig,
) -> Result<BootstrapLaw> {
    check_data(set, data)?;
    let n = data.len();
    let (multisets, denominator) = enumerate_multisets(n)?;
    let samples = multisets
        .into_iter()
        .enumerate()
        .map(|(k, (pos_counts, num))| {
            let mut counts = vec![0u32; set.len()];
            for (p, &c) in pos_counts.iter().enumerate() {
                counts[data[p]] += c;
            }
            (counts, num, k as u64)
        })
        .collect();
    assemble(
        set,
        samples,
        denominator,
        n,
        estimator,
        cfg,
        LawMeta {
            n,
            replicates: Replicates::Exact,
            master_seed: None,
        },
    )
}

/// Pairwise ground distances between atoms: RKHS norm for functions,
/// absolute difference for scalars.
pub fn atom_distances(atoms: &Atoms) -> Result<DistanceMatrix> {
    match atoms {
        Atoms::Scalars(v) => DistanceMatrix::from_fn(v.len(), |i, j| (v[i] - v[j]).abs()),
        Atoms::Functions(sols) => {
            let shared = sols
                .first()
                .map(|s0| sols.iter().all(|s| Arc::ptr_eq(s.training_set(), s0.training_set())))
                .unwrap_or(true);
            if shared && !sols.is_empty() {
                let set = sols[0].training_set();
                let emb: Vec<Vec<f64>> = sols.iter().map(|s| set.embed(&s.alpha)).collect();
                DistanceMatrix::from_fn(sols.len(), |i, j| euclid(&emb[i], &emb[j]))
            } else {
                let mut err = None;
                let d = DistanceMatrix::from_fn(sols.len(), |i, j| {
                    rkhs_distance(&sols[i], &sols[j]).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        0.0
                    })
                })?;
                match err {
                    Some(e) => Err(e),
                    None => Ok(d),
                }
            }
        }
    }
}

fn joint(a: &BootstrapLaw, b: &BootstrapLaw) -> Result<(Atoms, Vec<f64>, Vec<f64>)> {
    let na = a.len();
    let nb = b.len();
    let mut pa = a.weights.weights().to_vec();
    pa.extend(std::iter::repeat_n(0.0, nb));
    let mut pb = vec![0.0; na];
    pb.extend_from_slice(b.weights.weights());
    let atoms = match (&a.atoms, &b.atoms) {
        (Atoms::Functions(x), Atoms::Functions(y)) => {
            if let (Some(s), Some(t)) = (x.first(), y.first()) {
                if s.kernel() != t.kernel() {
                    return Err(Error::KernelMismatch("laws use different kernels".into()));
                }
            }
            Atoms::Functions(x.iter().chain(y).cloned().collect())
        }
        (Atoms::Scalars(x), Atoms::Scalars(y)) => Atoms::Scalars(x.iter().chain(y).copied().collect()),
        _ => return Err(Error::invalid("law", "cannot compare S-valued and R-valued laws")),
    };
    Ok((atoms, pa, pb))
}

/// Merges joint atoms at distance below [`DEDUP_TOL`]; distance-zero points
/// carry identical witness values so d_BL is unchanged.
fn merge_joint(d: &DistanceMatrix, pa: &[f64], pb: &[f64]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = d.len();
    let mut rep: Vec<usize> = Vec::new();
    let mut wa: Vec<f64> = Vec::new();
    let mut wb: Vec<f64> = Vec::new();
    for i in 0..n {
        match rep.iter().position(|&r| d.get(r, i) < DEDUP_TOL) {
            Some(k) => {
                wa[k] += pa[i];
                wb[k] += pb[i];
            }
            None => {
                rep.push(i);
                wa.push(pa[i]);
                wb.push(pb[i]);
            }
        }
    }
    (rep, wa, wb)
}

/// d_BL between two laws on their joint atom set.
pub fn law_distance(a: &BootstrapLaw, b: &BootstrapLaw) -> Result<BLResult> {
    let (atoms, pa, pb) = joint(a, b)?;
    let d = atom_distances(&atoms)?;
    let (rep, wa, wb) = merge_joint(&d, &pa, &pb);
    let sub = d.submatrix(&rep);
    let p = DiscreteMeasure::normalized(wa)?;
    let q = DiscreteMeasure::normalized(wb)?;
    let r = d_bl(&BLProblem::new(&sub, &p, &q))?;
    // expand the witness back to every joint atom
    let mut f = vec![0.0; d.len()];
    for i in 0..d.len() {
        let k = rep.iter().position(|&r| d.get(r, i) < DEDUP_TOL).expect("every atom has a representative");
        f[i] = r.f_star[k];
    }
    Ok(BLResult { f_star: f, ..r })
}

/// Atom count, weights and pairwise-distance quantiles of a law.
#[derive(Debug, Clone, Serialize)]
pub struct LawSummary {
    pub estimator: Estimator,
    pub atom_count: usize,
    pub weights: Vec<f64>,
    /// Quantiles at 0, 0.25, 0.5, 0.75, 1 of the off-diagonal distances.
    pub distance_quantiles: Vec<f64>,
    pub meta: LawMeta,
}

pub fn summarize(law: &BootstrapLaw) -> Result<LawSummary> {
    let d = atom_distances(&law.atoms)?;
    let mut vals: Vec<f64> = Vec::new();
    for i in 0..d.len() {
        for j in (i + 1)..d.len() {
            vals.push(d.get(i, j));
        }
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    let quantiles = if vals.is_empty() {
        vec![0.0; 5]
    } else {
        [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|q| vals[((vals.len() - 1) as f64 * q).round() as usize])
            .collect()
    };
    Ok(LawSummary {
        estimator: law.atoms.estimator(),
        atom_count: law.len(),
        weights: law.weights.weights().to_vec(),
        distance_quantiles: quantiles,
        meta: law.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bl_metric::two_point_value;
    use crate::loss_kernel::KernelSpec;
    use crate::metric_space::Point;

    fn set(n: usize) -> Arc<TrainingSet> {
        let pts = (0..n)
            .map(|i| Point::new(vec![i as f64 * 0.7 - 1.0], if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        TrainingSet::new(pts, KernelSpec::GaussianRbf { gamma: 1.0 }).unwrap()
    }

    fn cfg() -> EstimatorConfig {
        EstimatorConfig {
            loss: LossSpec::Hinge,
            lambda: 0.1,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn multiset_weights_for_n2() {
        let (ms, den) = enumerate_multisets(2).unwrap();
        assert_eq!(den, 4);
        let nums: Vec<(Vec<u32>, u64)> = ms;
        assert_eq!(nums, vec![(vec![2, 0], 1), (vec![1, 1], 2), (vec![0, 2], 1)]);
    }

    /// Ordered-tuple brute force: every `n`-tuple of positions, counted per
    /// multiset.
    fn brute_force(n: usize) -> HashMap<Vec<u32>, u64> {
        let mut out = HashMap::new();
        let total = n.pow(n as u32);
        for code in 0..total {
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

    #[test]
    fn multisets_match_brute_force() {
        for n in 1..=5 {
            let (ms, den) = enumerate_multisets(n).unwrap();
            assert_eq!(den, n.pow(n as u32) as u64);
            let bf = brute_force(n);
            assert_eq!(ms.len(), bf.len());
            for (c, num) in &ms {
                assert_eq!(bf[c], *num, "n={n} {c:?}");
            }
            assert_eq!(ms.iter().map(|m| m.1).sum::<u64>(), den);
        }
        assert!(enumerate_multisets(6).is_err());
    }

    #[test]
    fn exact_law_n2_and_n1() {
        let s = set(4);
        let law = bootstrap_law_exact(&s, &[0, 1], Estimator::Operator, &cfg()).unwrap();
        assert_eq!(law.weights.weights(), &[0.25, 0.5, 0.25]);
        let law = bootstrap_law_exact(&s, &[3], Estimator::Risk, &cfg()).unwrap();
        assert_eq!(law.len(), 1);
        assert_eq!(law.weights.weights(), &[1.0]);
    }

    #[test]
    fn exact_law_is_invariant_to_data_order() {
        let s = set(5);
        let a = bootstrap_law_exact(&s, &[0, 2, 3], Estimator::Risk, &cfg()).unwrap();
        let b = bootstrap_law_exact(&s, &[3, 0, 2], Estimator::Risk, &cfg()).unwrap();
        let (Atoms::Scalars(va), Atoms::Scalars(vb)) = (&a.atoms, &b.atoms) else { panic!() };
        let mut pa: Vec<(u64, u64)> = va.iter().zip(a.weights.weights()).map(|(x, w)| (x.to_bits(), w.to_bits())).collect();
        let mut pb: Vec<(u64, u64)> = vb.iter().zip(b.weights.weights()).map(|(x, w)| (x.to_bits(), w.to_bits())).collect();
        pa.sort();
        pb.sort();
        assert_eq!(pa, pb);
    }

    #[test]
    fn n1_mc_law_is_point_mass_and_deterministic() {
        let s = set(3);
        let law = bootstrap_law_mc(&s, &[1], 20, Estimator::Operator, &cfg(), 9).unwrap();
        assert_eq!(law.len(), 1);
        let a = bootstrap_law_mc(&s, &[0, 1, 2], 50, Estimator::Operator, &cfg(), 9).unwrap();
        let b = bootstrap_law_mc(&s, &[0, 1, 2], 50, Estimator::Operator, &cfg(), 9).unwrap();
        assert_eq!(law_distance(&a, &b).unwrap().value, 0.0);
    }

    #[test]
    fn point_mass_laws_follow_two_point_formula() {
        let s = set(3);
        let f = SvmSolution::from_alpha(Arc::clone(&s), vec![0.5, -0.2, 0.0]).unwrap();
        let g = SvmSolution::from_alpha(Arc::clone(&s), vec![-0.4, 0.3, 0.9]).unwrap();
        let t = rkhs_distance(&f, &g).unwrap();
        let meta = LawMeta { n: 1, replicates: Replicates::Exact, master_seed: None };
        let la = BootstrapLaw { atoms: Atoms::Functions(vec![f]), weights: DiscreteMeasure::uniform(1).unwrap(), meta: meta.clone() };
        let lb = BootstrapLaw { atoms: Atoms::Functions(vec![g]), weights: DiscreteMeasure::uniform(1).unwrap(), meta };
        let v = law_distance(&la, &lb).unwrap().value;
        assert!((v - two_point_value(t)).abs() < 1e-9);
        assert_eq!(law_distance(&la, &la).unwrap().value, 0.0);
    }

    #[test]
    fn mixed_estimators_are_rejected() {
        let s = set(3);
        let a = bootstrap_law_exact(&s, &[0, 1], Estimator::Operator, &cfg()).unwrap();
        let b = bootstrap_law_exact(&s, &[0, 1], Estimator::Risk, &cfg()).unwrap();
        assert!(law_distance(&a, &b).is_err());
    }

    #[test]
    fn law_distance_is_a_pseudometric() {
        let s = set(6);
        let laws: Vec<BootstrapLaw> = [[0usize, 1, 2, 3], [1, 2, 4, 5], [0, 0, 5, 3]]
            .iter()
            .enumerate()
            .map(|(k, d)| bootstrap_law_mc(&s, d, 40, Estimator::Operator, &cfg(), k as u64).unwrap())
            .collect();
        let d = |i: usize, j: usize| law_distance(&laws[i], &laws[j]).unwrap().value;
        for i in 0..3 {
            for j in 0..3 {
                assert!((d(i, j) - d(j, i)).abs() < 1e-7);
                for k in 0..3 {
                    assert!(d(i, k) <= d(i, j) + d(j, k) + 1e-7);
                }
            }
        }
    }

    #[test]
    fn summary_quantiles() {
        let s = set(4);
        let law = bootstrap_law_exact(&s, &[0, 1, 2], Estimator::Risk, &cfg()).unwrap();
        let sum = summarize(&law).unwrap();
        assert_eq!(sum.atom_count, law.len());
        assert!(sum.distance_quantiles.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn data_errors() {
        let s = set(3);
        assert!(bootstrap_law_mc(&s, &[], 5, Estimator::Risk, &cfg(), 0).is_err());
        assert!(bootstrap_law_mc(&s, &[7], 5, Estimator::Risk, &cfg(), 0).is_err());
        assert!(bootstrap_law_mc(&s, &[0], 0, Estimator::Risk, &cfg(), 0).is_err());
        assert!(bootstrap_law_exact(&s, &[0, 1, 2, 0, 1, 2], Estimator::Risk, &cfg()).is_err());
    }
}
