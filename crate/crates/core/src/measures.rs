//! Discrete probability measures on a shared finite support.
//!
//! Measures are plain weight vectors indexed like the points of the
//! experiment's support. Contamination moves mass between support points and
//! never creates new ones.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;

/// Probability weights over indexed support points. Serializes as a JSON
/// array of weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteMeasure {
    w: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscreteMeasure {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<DiscreteMeasure> for Vec<f64> {
    fn from(m: DiscreteMeasure) -> Self {
        m.w
    }
}

impl DiscreteMeasure {
    /// Validates nonnegativity and unit mass (within [`MASS_TOL`]).
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure(format!("weight {i} = {} is not a finite nonnegative number", w[i])));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { w })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure(format!("weight {i} = {} is not a finite nonnegative number", w[i])));
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        Self::new(w.into_iter().map(|v| v / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        Ok(Self { w: vec![1.0 / n as f64; n] })
    }

    pub fn point_mass(support_size: usize, at: usize) -> Result<Self> {
        if at >= support_size {
            return Err(Error::IndexOutOfRange { index: at, size: support_size });
        }
        let mut w = vec![0.0; support_size];
        w[at] = 1.0;
        Ok(Self { w })
    }

    /// Uniform over a subset of the support.
    pub fn uniform_on(support_size: usize, on: &[usize]) -> Result<Self> {
        if on.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut w = vec![0.0; support_size];
        for &i in on {
            if i >= support_size {
                return Err(Error::IndexOutOfRange { index: i, size: support_size });
            }
            w[i] += 1.0;
        }
        Self::normalized(w)
    }

    pub fn support_size(&self) -> usize {
        self.w.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    /// Indices carrying positive mass.
    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.w.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i)
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        self.w.iter().zip(&other.w).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub(crate) fn check_same_support(&self, other: &Self, context: &str) -> Result<()> {
        if self.support_size() != other.support_size() {
            return Err(Error::DimensionMismatch {
                expected: self.support_size(),
                found: other.support_size(),
                context: context.to_string(),
            });
        }
        Ok(())
    }
}

/// `P_n = (1/n) Σ δ_{z_i}` for indices `z_i` into a support of the given size.
pub fn empirical(sample_indices: &[usize], support_size: usize) -> Result<DiscreteMeasure> {
    if sample_indices.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut counts = vec![0usize; support_size];
    for &i in sample_indices {
        if i >= support_size {
            return Err(Error::IndexOutOfRange { index: i, size: support_size });
        }
        counts[i] += 1;
    }
    Ok(from_counts(&counts, sample_indices.len()))
}

/// Weights `counts[i] / n`; `n` must equal the sum of the counts.
pub(crate) fn from_counts(counts: &[usize], n: usize) -> DiscreteMeasure {
    debug_assert_eq!(counts.iter().sum::<usize>(), n);
    let n = n as f64;
    DiscreteMeasure {
        w: counts.iter().map(|&c| c as f64 / n).collect(),
    }
}

/// Mixture `(1 − eps)·p + eps·direction`.
pub fn contaminate(p: &DiscreteMeasure, direction: &DiscreteMeasure, eps: f64) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("eps", format!("must lie in [0, 1], got {eps}")));
    }
    p.check_same_support(direction, "contamination direction")?;
    let w = p
        .w
        .iter()
        .zip(&direction.w)
        .map(|(a, b)| (1.0 - eps) * a + eps * b)
        .collect();
    DiscreteMeasure::new(w)
}

/// `n` i.i.d. draws from `p`, by inverse CDF on uniform `f64`s from the
/// stream seeded with `seed`. Zero-weight indices are never drawn.
pub fn sample(p: &DiscreteMeasure, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    Ok(sample_with(p, n, &mut rng))
}

pub(crate) fn sample_with(p: &DiscreteMeasure, n: usize, rng: &mut crate::rng::Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(p.w.len());
    let mut acc = 0.0;
    for &v in &p.w {
        acc += v;
        cdf.push(acc);
    }
    let last = p.w.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u);
            i.min(last)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_counts() {
        let m = empirical(&[0, 0, 1], 2).unwrap();
        assert_eq!(m.weights(), &[2.0 / 3.0, 1.0 / 3.0]);
        let m = empirical(&[5], 6).unwrap();
        assert_eq!(m, DiscreteMeasure::point_mass(6, 5).unwrap());
    }

    #[test]
    fn empirical_errors() {
        assert!(matches!(empirical(&[], 3), Err(Error::EmptySample)));
        assert!(matches!(empirical(&[0, 3], 3), Err(Error::IndexOutOfRange { index: 3, size: 3 })));
    }

    #[test]
    fn empirical_law_of_large_numbers() {
        let u = DiscreteMeasure::uniform(4).unwrap();
        let idx = sample(&u, 1000, 11).unwrap();
        let m = empirical(&idx, 4).unwrap();
        for &w in m.weights() {
            assert!((w - 0.25).abs() < 0.05, "{w}");
        }
    }

    #[test]
    fn contaminate_endpoints_and_arithmetic() {
        let p = DiscreteMeasure::uniform(2).unwrap();
        let d = DiscreteMeasure::point_mass(2, 0).unwrap();
        assert_eq!(contaminate(&p, &d, 0.0).unwrap(), p);
        assert_eq!(contaminate(&p, &d, 1.0).unwrap(), d);
        let q = contaminate(&p, &d, 0.2).unwrap();
        assert!((q.weight(0) - 0.6).abs() < 1e-15);
        assert!((q.weight(1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn contaminate_rejects_bad_eps_and_support() {
        let p = DiscreteMeasure::uniform(2).unwrap();
        assert!(contaminate(&p, &p, -0.1).is_err());
        assert!(contaminate(&p, &p, 1.5).is_err());
        let d = DiscreteMeasure::uniform(3).unwrap();
        assert!(contaminate(&p, &d, 0.5).is_err());
    }

    #[test]
    fn sampling_point_mass_and_determinism() {
        let m = DiscreteMeasure::point_mass(5, 3).unwrap();
        assert!(sample(&m, 100, 1).unwrap().iter().all(|&i| i == 3));
        let u = DiscreteMeasure::uniform(7).unwrap();
        assert_eq!(sample(&u, 50, 99).unwrap(), sample(&u, 50, 99).unwrap());
        assert_ne!(sample(&u, 50, 99).unwrap(), sample(&u, 50, 100).unwrap());
        assert!(sample(&u, 0, 1).is_err());
    }

    #[test]
    fn sampling_frequencies() {
        let u = DiscreteMeasure::uniform(3).unwrap();
        let idx = sample(&u, 30_000, 2024).unwrap();
        let m = empirical(&idx, 3).unwrap();
        for &w in m.weights() {
            assert!((w - 1.0 / 3.0).abs() < 0.01, "{w}");
        }
    }

    #[test]
    fn zero_weight_points_never_drawn() {
        let m = DiscreteMeasure::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let idx = sample(&m, 5000, 3).unwrap();
        assert!(idx.iter().all(|&i| i == 1 || i == 3));
    }

    #[test]
    fn measure_validation_and_json() {
        assert!(DiscreteMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![-0.5, 1.5]).is_err());
        assert!(DiscreteMeasure::new(vec![]).is_err());
        let m: DiscreteMeasure = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[0.25,0.75]");
        assert!(serde_json::from_str::<DiscreteMeasure>("[0.25, 0.5]").is_err());
        let m = DiscreteMeasure::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn contamination_is_a_measure_on_the_segment(
                (p, dir) in (1usize..8).prop_flat_map(|n| (
                    prop::collection::vec(0.0f64..1.0, n),
                    prop::collection::vec(0.0f64..1.0, n),
                )),
                eps in 0.0f64..=1.0,
            ) {
                prop_assume!(p.iter().sum::<f64>() > 0.0 && dir.iter().sum::<f64>() > 0.0);
                let p = DiscreteMeasure::normalized(p).unwrap();
                let dir = DiscreteMeasure::normalized(dir).unwrap();
                let q = contaminate(&p, &dir, eps).unwrap();
                prop_assert!((q.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!((p.total_variation(&q) - eps * p.total_variation(&dir)).abs() <= 1e-12);
            }

            #[test]
            fn samples_hit_only_the_support(w in prop::collection::vec(0.0f64..1.0, 1..8), seed in any::<u64>()) {
                prop_assume!(w.iter().sum::<f64>() > 0.0);
                let p = DiscreteMeasure::normalized(w).unwrap();
                let draws = sample(&p, 50, seed).unwrap();
                prop_assert!(draws.iter().all(|&i| p.weight(i) > 0.0));
                prop_assert_eq!(draws, sample(&p, 50, seed).unwrap());
            }
        }
    }
}
