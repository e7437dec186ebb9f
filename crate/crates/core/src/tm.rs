//! Traffic and link-load vectors and the forward map `b = A x`.

use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix};

fn check_nonneg(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(i) => Err(Error::InvalidVector(format!(
            "{what} entry {i} is {} (must be finite and >= 0)",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// OD demands in Mbps, aligned with a support set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficVector(Vec<f64>);

impl TrafficVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_nonneg("demand", &values)?;
        Ok(Self(values))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    /// Clamps negatives (and NaN) to zero.
    pub fn from_clamped(values: Vec<f64>) -> Self {
        Self(
            values
                .into_iter()
                .map(|v| if v > 0.0 { v } else { 0.0 })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn positive_values(&self) -> Vec<f64> {
        self.0.iter().copied().filter(|&v| v > 0.0).collect()
    }
}

/// Per-link loads in Mbps, aligned with routing-matrix rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLoadVector(Vec<f64>);

impl LinkLoadVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_nonneg("link load", &values)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Link loads induced by demands `x`.
pub fn simulate_loads(a: &impl AsRef<CsrMatrix>, x: &TrafficVector) -> Result<LinkLoadVector> {
    let b = a.as_ref().mul_vec(x.values())?;
    // nonnegative matrix times nonnegative vector
    Ok(LinkLoadVector(b.into_iter().map(|v| v.max(0.0)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// `‖Ax − b‖₂`
    pub l2: f64,
    /// `‖Ax − b‖₂ / ‖b‖₂`
    pub relative: f64,
}

/// Fit of `x` against measured loads `b`.
pub fn residual(a: &impl AsRef<CsrMatrix>, x: &[f64], b: &[f64]) -> Result<Residual> {
    let a = a.as_ref();
    if b.len() != a.rows() {
        return Err(Error::mismatch("link loads", a.rows(), b.len()));
    }
    let ax = a.mul_vec(x)?;
    let diff: Vec<f64> = ax.iter().zip(b).map(|(u, v)| u - v).collect();
    let l2 = norm2(&diff);
    let bn = norm2(b);
    let relative = if bn > 0.0 {
        l2 / bn
    } else if l2 == 0.0 {
        0.0
    } else {
        return Err(Error::UndefinedRelativeResidual(l2));
    };
    Ok(Residual { l2, relative })
}
