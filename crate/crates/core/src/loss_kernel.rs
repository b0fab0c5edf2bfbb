//! Lipschitz convex losses, their shifted versions `L⋆(x, y, t) = L(x, y, t) − L(x, y, 0)`,
//! and bounded kernels.
//!
//! Besides evaluation, each loss exposes its convex conjugate in `t`, which
//! the SVM solver's dual coordinate ascent works with. For the piecewise
//! linear losses the conjugate is piecewise linear on a compact interval;
//! for the logistic loss it is the binary negative entropy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported losses. Margin losses (`hinge`, `logistic`) expect labels ±1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    Hinge,
    Pinball { tau: f64 },
    Absolute,
    Logistic,
    EpsInsensitive { eps: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Pinball { tau } if !(tau > 0.0 && tau < 1.0) => {
                Err(Error::invalid("tau", format!("must lie in (0, 1), got {tau}")))
            }
            LossSpec::EpsInsensitive { eps } if !(eps >= 0.0 && eps.is_finite()) => {
                Err(Error::invalid("eps", format!("must be finite and >= 0, got {eps}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Hinge => "hinge",
            LossSpec::Pinball { .. } => "pinball",
            LossSpec::Absolute => "absolute",
            LossSpec::Logistic => "logistic",
            LossSpec::EpsInsensitive { .. } => "eps_insensitive",
        }
    }

    pub fn is_margin(&self) -> bool {
        matches!(self, LossSpec::Hinge | LossSpec::Logistic)
    }

    /// The Lipschitz constant `|L|₁` in the third argument.
    pub fn lip(&self) -> f64 {
        match *self {
            LossSpec::Pinball { tau } => tau.max(1.0 - tau),
            _ => 1.0,
        }
    }

    /// Rejects responses outside the loss's domain.
    pub fn check_label(&self, y: f64) -> Result<()> {
        if self.is_margin() && y != 1.0 && y != -1.0 {
            return Err(Error::invalid("y", format!("{} loss needs labels in {{-1, +1}}, got {y}", self.name())));
        }
        if !y.is_finite() {
            return Err(Error::NonFinite { location: "response".into() });
        }
        Ok(())
    }

    /// `L(x, y, t)`. The losses here do not depend on `x`.
    pub fn loss(&self, _x: &[f64], y: f64, t: f64) -> f64 {
        self.eval(y, t)
    }

    /// `L⋆(x, y, t) = L(x, y, t) − L(x, y, 0)`.
    pub fn shifted_loss(&self, _x: &[f64], y: f64, t: f64) -> f64 {
        self.eval_shifted(y, t)
    }

    #[inline]
    pub(crate) fn eval(&self, y: f64, t: f64) -> f64 {
        match *self {
            LossSpec::Hinge => (1.0 - y * t).max(0.0),
            LossSpec::Pinball { tau } => {
                let r = y - t;
                if r >= 0.0 {
                    tau * r
                } else {
                    (tau - 1.0) * r
                }
            }
            LossSpec::Absolute => (y - t).abs(),
            LossSpec::Logistic => softplus(-y * t),
            LossSpec::EpsInsensitive { eps } => ((y - t).abs() - eps).max(0.0),
        }
    }

    #[inline]
    pub(crate) fn eval_shifted(&self, y: f64, t: f64) -> f64 {
        match *self {
            // exact difference of softplus values, avoiding cancellation
            LossSpec::Logistic => {
                let z = -y * t;
                if z.abs() < 1e-300 {
                    0.0
                } else {
                    softplus(z) - std::f64::consts::LN_2
                }
            }
            _ => self.eval(y, t) - self.eval(y, 0.0),
        }
    }

    /// The conjugate `L*(y, β) = sup_t (β t − L(y, t))` in the form the dual
    /// solver needs.
    pub(crate) fn conjugate(&self, y: f64) -> Conjugate {
        match *self {
            LossSpec::Hinge => {
                // β = −y·s with s ∈ [0, 1], L* = −s
                if y > 0.0 {
                    Conjugate::pl(&[(-y, -1.0), (0.0, 0.0)])
                } else {
                    Conjugate::pl(&[(0.0, 0.0), (-y, -1.0)])
                }
            }
            LossSpec::Pinball { tau } => Conjugate::pl(&[(-tau, -tau * y), (1.0 - tau, (1.0 - tau) * y)]),
            LossSpec::Absolute => Conjugate::pl(&[(-1.0, -y), (1.0, y)]),
            LossSpec::EpsInsensitive { eps } => {
                Conjugate::pl(&[(-1.0, -y + eps), (0.0, 0.0), (1.0, y + eps)])
            }
            LossSpec::Logistic => Conjugate::Entropy { y },
        }
    }
}

/// `log(1 + e^z)`, linearized asymptotically for `|z| > 30`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp()
    } else if z < -30.0 {
        z.exp()
    } else {
        z.max(0.0) + (-z.abs()).exp().ln_1p()
    }
}

/// Conjugate of a loss in its third argument, for a fixed response.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Conjugate {
    /// Piecewise linear on `[β_0, β_K]`, given by its breakpoints
    /// `(β_k, L*(β_k))` in increasing `β`.
    PiecewiseLinear { breaks: [(f64, f64); 3], len: usize },
    /// Logistic: `β = −y·s`, `L* = s ln s + (1 − s) ln(1 − s)`, `s ∈ [0, 1]`.
    Entropy { y: f64 },
}

impl Conjugate {
    fn pl(pts: &[(f64, f64)]) -> Self {
        let mut breaks = [(0.0, 0.0); 3];
        breaks[..pts.len()].copy_from_slice(pts);
        Conjugate::PiecewiseLinear { breaks, len: pts.len() }
    }

    /// `L*(β)`; `+∞` outside the domain.
    pub(crate) fn value(&self, beta: f64) -> f64 {
        match self {
            Conjugate::PiecewiseLinear { breaks, len } => {
                let b = &breaks[..*len];
                let tol = 1e-12;
                if beta < b[0].0 - tol || beta > b[len - 1].0 + tol {
                    return f64::INFINITY;
                }
                if *len == 1 {
                    return b[0].1;
                }
                for w in b.windows(2) {
                    let ((b0, v0), (b1, v1)) = (w[0], w[1]);
                    if beta <= b1 + tol || b1 == b[len - 1].0 {
                        let t = if b1 > b0 { ((beta - b0) / (b1 - b0)).clamp(0.0, 1.0) } else { 0.0 };
                        return v0 + t * (v1 - v0);
                    }
                }
                unreachable!()
            }
            Conjugate::Entropy { y } => {
                let s = -beta * y;
                if !(-1e-12..=1.0 + 1e-12).contains(&s) {
                    return f64::INFINITY;
                }
                let s = s.clamp(0.0, 1.0);
                xlogx(s) + xlogx(1.0 - s)
            }
        }
    }

    /// Maximizes `h(β) = −L*(β) − a·β² − c·β` over the domain, `a ≥ 0`.
    pub(crate) fn coordinate_argmax(&self, a: f64, c: f64) -> f64 {
        match self {
            Conjugate::PiecewiseLinear { breaks, len } => {
                let b = &breaks[..*len];
                let h = |beta: f64, lstar: f64| -lstar - a * beta * beta - c * beta;
                let mut best_beta = b[0].0;
                let mut best = h(b[0].0, b[0].1);
                for &(beta, v) in &b[1..] {
                    let val = h(beta, v);
                    if val > best {
                        best = val;
                        best_beta = beta;
                    }
                }
                if a > 0.0 {
                    for w in b.windows(2) {
                        let ((b0, v0), (b1, v1)) = (w[0], w[1]);
                        if b1 <= b0 {
                            continue;
                        }
                        let slope = (v1 - v0) / (b1 - b0);
                        let stat = -(slope + c) / (2.0 * a);
                        if stat > b0 && stat < b1 {
                            let val = h(stat, v0 + slope * (stat - b0));
                            if val > best {
                                best = val;
                                best_beta = stat;
                            }
                        }
                    }
                }
                best_beta
            }
            Conjugate::Entropy { y } => {
                // in s = −yβ: maximize −(s ln s + (1−s) ln(1−s)) − a s² + c y s;
                // stationarity ln(s/(1−s)) + 2 a s = c y, monotone in s
                let target = c * y;
                let g = |s: f64| (s / (1.0 - s)).ln() + 2.0 * a * s - target;
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let mut s = 0.5;
                for _ in 0..200 {
                    s = 0.5 * (lo + hi);
                    if s <= lo || s >= hi {
                        break;
                    }
                    if g(s) > 0.0 {
                        hi = s;
                    } else {
                        lo = s;
                    }
                }
                -y * s
            }
        }
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Supported kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(−γ‖x − x'‖²)`.
    GaussianRbf { gamma: f64 },
    /// `⟨x, x'⟩` on the box `[lo, hi]`.
    LinearOnBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::GaussianRbf { gamma } if !(*gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::invalid("gamma", format!("must be positive, got {gamma}")))
            }
            KernelSpec::LinearOnBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        found: hi.len(),
                        context: "box bounds".into(),
                    });
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::invalid("box", "needs finite lo <= hi"));
                }
                if self.k_sup() <= 0.0 {
                    return Err(Error::invalid("box", "kernel must not vanish identically"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::GaussianRbf { .. } => "gaussian_rbf",
            KernelSpec::LinearOnBox { .. } => "linear_on_box",
        }
    }

    /// `‖k‖_∞ = sup_x sqrt(k(x, x))`.
    pub fn k_sup(&self) -> f64 {
        match self {
            KernelSpec::GaussianRbf { .. } => 1.0,
            KernelSpec::LinearOnBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (a * a).max(b * b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::GaussianRbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-gamma * sq).exp()
            }
            KernelSpec::LinearOnBox { .. } => a.iter().zip(b).map(|(u, v)| u * v).sum(),
        }
    }

    /// Checks dimensions (and box membership for the linear kernel).
    pub fn check_points(&self, xs: &[&[f64]]) -> Result<()> {
        let dim = match self {
            KernelSpec::LinearOnBox { lo, .. } => Some(lo.len()),
            KernelSpec::GaussianRbf { .. } => xs.first().map(|x| x.len()),
        };
        for (i, x) in xs.iter().enumerate() {
            if let Some(d) = dim {
                if x.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: x.len(),
                        context: format!("kernel input {i}"),
                    });
                }
            }
            if let KernelSpec::LinearOnBox { lo, hi } = self {
                let tol = 1e-12;
                if x.iter().zip(lo.iter().zip(hi)).any(|(v, (a, b))| *v < a - tol || *v > b + tol) {
                    return Err(Error::invalid("x", format!("kernel input {i} lies outside the declared box")));
                }
            }
        }
        Ok(())
    }

    pub fn cross(&self, a: &[&[f64]], b: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(a[i], b[j]))
    }
}

/// Gram matrix `G[i][j] = k(x_i, x_j)`.
pub fn gram(kernel: &KernelSpec, xs: &[&[f64]]) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    kernel.check_points(xs)?;
    let n = xs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(xs[i], xs[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    g.clone().symmetric_eigenvalues().min()
}
