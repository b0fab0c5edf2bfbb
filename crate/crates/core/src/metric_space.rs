//! Finite samples from a compact metric space `Z = X × Y` and their ground
//! metric.
//!
//! Every measure, LP and estimator in the crate lives on one of these finite
//! supports. Compactness is operational: supports are finite, and an optional
//! [`ResponseBounds`] is only used for sanity checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by [`validate_metric`].
pub const METRIC_TOL: f64 = 1e-9;

/// A sample point `z = (x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Point {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn check_finite(&self, index: usize) -> Result<()> {
        if let Some(j) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("point {index}, x{j}"),
            });
        }
        if !self.y.is_finite() {
            return Err(Error::NonFinite {
                location: format!("point {index}, y"),
            });
        }
        Ok(())
    }
}

/// Checks that all points are finite and share one feature dimension.
pub fn check_points(points: &[Point]) -> Result<usize> {
    let dim = points.first().map_or(0, Point::dim);
    for (i, p) in points.iter().enumerate() {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
                context: format!("point {i}"),
            });
        }
        p.check_finite(i)?;
    }
    Ok(dim)
}

/// Declared interval for the response `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ResponseBounds {
    pub fn check(&self, points: &[Point]) -> Result<()> {
        for (i, p) in points.iter().enumerate() {
            if p.y < self.lo || p.y > self.hi {
                return Err(Error::invalid(
                    "y",
                    format!("point {i} has y = {} outside [{}, {}]", p.y, self.lo, self.hi),
                ));
            }
        }
        Ok(())
    }
}

/// Symmetric nonnegative pairwise distances with zero diagonal, stored
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps a row-major `n × n` buffer. Only shape and finiteness are
    /// checked here; use [`validate_metric`] for the metric axioms.
    pub fn from_row_major(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: d.len(),
                context: "distance matrix buffer".into(),
            });
        }
        if let Some(k) = d.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("distance ({}, {})", k / n, k % n),
            });
        }
        Ok(Self { n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                    context: format!("distance matrix row {i}"),
                });
            }
            d.extend_from_slice(row);
        }
        Self::from_row_major(n, d)
    }

    /// Builds a matrix from a pairwise distance function evaluated on the
    /// upper triangle.
    pub fn from_fn(n: usize, mut dist: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = dist(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self::from_row_major(n, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Restriction to a subset of indices, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut d = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                d.push(self.get(i, j));
            }
        }
        Self { n: m, d }
    }
}

/// `d[i][j] = sqrt(|x_i − x_j|² + y_weight·(y_i − y_j)²)`.
pub fn build_euclidean_space(points: &[Point], y_weight: f64) -> Result<DistanceMatrix> {
    if !(y_weight >= 0.0 && y_weight.is_finite()) {
        return Err(Error::invalid("y_weight", format!("must be finite and >= 0, got {y_weight}")));
    }
    check_points(points)?;
    DistanceMatrix::from_fn(points.len(), |i, j| {
        let a = &points[i];
        let b = &points[j];
        let sq: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v) * (u - v)).sum();
        let dy = a.y - b.y;
        (sq + y_weight * dy * dy).sqrt()
    })
}

/// Outcome of [`validate_metric`], with the first violation found.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCheck {
    pub violation: Option<MetricViolation>,
}

impl MetricCheck {
    pub fn is_metric(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    NonzeroDiagonal { i: usize, value: f64 },
    Negative { i: usize, j: usize, value: f64 },
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    Triangle { i: usize, j: usize, k: usize, dik: f64, dij: f64, djk: f64 },
}

impl std::fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            MetricViolation::NonzeroDiagonal { i, value } => write!(f, "d[{i}][{i}] = {value} != 0"),
            MetricViolation::Negative { i, j, value } => write!(f, "d[{i}][{j}] = {value} < 0"),
            MetricViolation::Asymmetric { i, j, dij, dji } => {
                write!(f, "d[{i}][{j}] = {dij} != d[{j}][{i}] = {dji}")
            }
            MetricViolation::Triangle { i, j, k, dik, dij, djk } => write!(
                f,
                "triangle ({i}, {j}, {k}): d[{i}][{k}] = {dik} > d[{i}][{j}] + d[{j}][{k}] = {}",
                dij + djk
            ),
        }
    }
}

/// Checks zero diagonal, nonnegativity, symmetry and every triangle
/// inequality within [`METRIC_TOL`]. The triangle check is exhaustive
/// (`O(n³)`).
pub fn check_metric(d: &DistanceMatrix) -> MetricCheck {
    let n = d.len();
    let fail = |v| MetricCheck { violation: Some(v) };
    for i in 0..n {
        let v = d.get(i, i);
        if v.abs() > METRIC_TOL {
            return fail(MetricViolation::NonzeroDiagonal { i, value: v });
        }
        for j in 0..n {
            let dij = d.get(i, j);
            if dij < -METRIC_TOL {
                return fail(MetricViolation::Negative { i, j, value: dij });
            }
            let dji = d.get(j, i);
            if (dij - dji).abs() > METRIC_TOL {
                return fail(MetricViolation::Asymmetric { i, j, dij, dji });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let dij = d.get(i, j);
            for k in 0..n {
                let dik = d.get(i, k);
                let djk = d.get(j, k);
                if dik > dij + djk + METRIC_TOL {
                    return fail(MetricViolation::Triangle { i, j, k, dik, dij, djk });
                }
            }
        }
    }
    MetricCheck { violation: None }
}

/// `true` iff `d` satisfies the metric axioms within [`METRIC_TOL`].
pub fn validate_metric(d: &DistanceMatrix) -> bool {
    check_metric(d).is_metric()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: &[f64], y: f64) -> Point {
        Point::new(x.to_vec(), y)
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let d = build_euclidean_space(&[pt(&[1.5], 2.0), pt(&[1.5], 2.0)], 1.0).unwrap();
        assert_eq!(d.rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn three_four_five() {
        let d = build_euclidean_space(&[pt(&[0.0], 0.0), pt(&[3.0], 4.0)], 1.0).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
    }

    #[test]
    fn y_weight_zero_ignores_response() {
        let d = build_euclidean_space(&[pt(&[0.0], 0.0), pt(&[3.0], 4.0)], 0.0).unwrap();
        assert_eq!(d.get(0, 1), 3.0);
    }

    #[test]
    fn rejects_dimension_mismatch_and_nan() {
        let err = build_euclidean_space(&[pt(&[0.0], 0.0), pt(&[1.0, 2.0], 0.0)], 1.0);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let err = build_euclidean_space(&[pt(&[f64::NAN], 0.0)], 1.0);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        let err = build_euclidean_space(&[pt(&[0.0], f64::INFINITY)], 1.0);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        let err = build_euclidean_space(&[pt(&[0.0], 0.0)], -1.0);
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn single_point_space() {
        let d = build_euclidean_space(&[pt(&[0.3, 0.1], 1.0)], 1.0).unwrap();
        assert_eq!(d.len(), 1);
        assert!(validate_metric(&d));
    }

    #[test]
    fn validate_accepts_two_point_metric() {
        let d = DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(validate_metric(&d));
    }

    #[test]
    fn validate_reports_triangle_violation() {
        let d = DistanceMatrix::from_rows(&[
            vec![0.0, 5.0, 10.0],
            vec![5.0, 0.0, 1.0],
            vec![10.0, 1.0, 0.0],
        ])
        .unwrap();
        let check = check_metric(&d);
        assert!(!check.is_metric());
        let v = check.violation.unwrap();
        assert!(matches!(v, MetricViolation::Triangle { i: 0, j: 1, k: 2, .. }), "{v}");
    }

    #[test]
    fn validate_rejects_asymmetry_diagonal_and_negative() {
        let d = DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(matches!(check_metric(&d).violation, Some(MetricViolation::Asymmetric { .. })));
        let d = DistanceMatrix::from_rows(&[vec![0.5, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(check_metric(&d).violation, Some(MetricViolation::NonzeroDiagonal { .. })));
        let d = DistanceMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(check_metric(&d).violation, Some(MetricViolation::Negative { .. })));
    }

    #[test]
    fn from_rows_rejects_ragged() {
        assert!(DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]).is_err());
    }

    fn cloud(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec(
            (prop::collection::vec(-10.0f64..10.0, dim), -5.0f64..5.0)
                .prop_map(|(x, y)| Point::new(x, y)),
            1..max_n,
        )
    }

    proptest! {
        #[test]
        fn euclidean_spaces_are_metric(points in cloud(12, 2), w in 0.0f64..4.0) {
            let d = build_euclidean_space(&points, w).unwrap();
            prop_assert!(validate_metric(&d), "{:?}", check_metric(&d).violation);
        }

        #[test]
        fn translation_invariance(points in cloud(10, 3), shift in prop::collection::vec(-3.0f64..3.0, 3)) {
            let d0 = build_euclidean_space(&points, 1.0).unwrap();
            let moved: Vec<Point> = points
                .iter()
                .map(|p| Point::new(p.x.iter().zip(&shift).map(|(a, s)| a + s).collect(), p.y))
                .collect();
            let d1 = build_euclidean_space(&moved, 1.0).unwrap();
            for i in 0..d0.len() {
                for j in 0..d0.len() {
                    prop_assert!((d0.get(i, j) - d1.get(i, j)).abs() <= 1e-12);
                }
            }
        }
    }
}
