use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A continuous piecewise-linear scalar function.
///
/// Piece `k` covers `[knots[k-1], knots[k])`, with the outer pieces extending to
/// infinity. A value sitting exactly on a knot belongs to the piece on its right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearActivation {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothKind {
    Sigmoid,
    Tanh,
}

impl SmoothKind {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            SmoothKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            SmoothKind::Tanh => x.tanh(),
        }
    }

    /// Half-width of the interval the approximation interpolates over.
    fn support(self) -> f64 {
        match self {
            SmoothKind::Sigmoid => 4.0,
            SmoothKind::Tanh => 2.0,
        }
    }
}

impl PiecewiseLinearActivation {
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if slopes.len() != knots.len() + 1 || intercepts.len() != slopes.len() {
            return Err(Error::Argument(format!(
                "{} knots need {} pieces, got {} slopes and {} intercepts",
                knots.len(),
                knots.len() + 1,
                slopes.len(),
                intercepts.len()
            )));
        }
        if knots.iter().chain(&slopes).chain(&intercepts).any(|v| !v.is_finite()) {
            return Err(Error::Argument("activation parameters must be finite".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("knots must be strictly increasing".into()));
        }
        for (k, &t) in knots.iter().enumerate() {
            let left = slopes[k] * t + intercepts[k];
            let right = slopes[k + 1] * t + intercepts[k + 1];
            if (left - right).abs() > 1e-9 * left.abs().max(right.abs()).max(1.0) {
                return Err(Error::Argument(format!(
                    "discontinuous at knot {t}: {left} vs {right}"
                )));
            }
        }
        Ok(Self {
            knots,
            slopes,
            intercepts,
        })
    }

    pub fn identity() -> Self {
        Self::new(vec![], vec![1.0], vec![0.0]).unwrap()
    }

    pub fn relu() -> Self {
        Self::leaky_relu(0.0)
    }

    pub fn leaky_relu(negative_slope: f64) -> Self {
        Self::new(vec![0.0], vec![negative_slope, 1.0], vec![0.0, 0.0]).unwrap()
    }

    /// Piecewise-linear stand-in for sigmoid or tanh with `cuts` pieces.
    ///
    /// Three cuts give the saturating ramp (sigmoid: `x/8 + 1/2` on `[-4, 4]`,
    /// tanh: `x/2` on `[-2, 2]`, clamped outside). More cuts interpolate the exact
    /// function at `cuts - 1` equally spaced knots over the same support and hold
    /// the end values constant outside it.
    pub fn approximate(kind: SmoothKind, cuts: usize) -> Result<Self> {
        if cuts < 3 || cuts % 2 == 0 {
            return Err(Error::Argument(format!(
                "cut count must be an odd integer >= 3, got {cuts}"
            )));
        }
        let s = kind.support();
        if cuts == 3 {
            let (lo, hi, slope, intercept) = match kind {
                SmoothKind::Sigmoid => (0.0, 1.0, 0.125, 0.5),
                SmoothKind::Tanh => (-1.0, 1.0, 0.5, 0.0),
            };
            return Self::new(vec![-s, s], vec![0.0, slope, 0.0], vec![lo, intercept, hi]);
        }
        let segments = cuts - 2;
        let knots: Vec<f64> = (0..=segments)
            .map(|i| -s + 2.0 * s * i as f64 / segments as f64)
            .collect();
        let values: Vec<f64> = knots.iter().map(|&t| kind.eval(t)).collect();
        let mut slopes = vec![0.0];
        let mut intercepts = vec![values[0]];
        for i in 0..segments {
            let slope = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);
            slopes.push(slope);
            intercepts.push(values[i] - slope * knots[i]);
        }
        slopes.push(0.0);
        intercepts.push(values[segments]);
        Self::new(knots, slopes, intercepts)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn piece_count(&self) -> usize {
        self.slopes.len()
    }

    /// Index of the piece containing `x`.
    pub fn piece(&self, x: f64) -> usize {
        self.knots.partition_point(|&t| t <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.piece(x);
        self.slopes[k] * x + self.intercepts[k]
    }

    /// Lower and upper knot bounding piece `k` (`None` for an unbounded side).
    pub fn piece_bounds(&self, k: usize) -> (Option<f64>, Option<f64>) {
        let lo = k.checked_sub(1).map(|i| self.knots[i]);
        let hi = self.knots.get(k).copied();
        (lo, hi)
    }
}
