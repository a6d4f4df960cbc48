//! Piecewise-linear chord approximations of `sin` and `cos` over a yaw range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigFn {
    Sin,
    Cos,
}

impl TrigFn {
    pub fn eval(self, theta: f64) -> f64 {
        match self {
            TrigFn::Sin => theta.sin(),
            TrigFn::Cos => theta.cos(),
        }
    }
}

/// Uniform chord table: segment `k` joins the function values at
/// `breakpoints[k]` and `breakpoints[k + 1]` with `slopes[k] * theta + intercepts[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlTable {
    pub kind: TrigFn,
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl PwlTable {
    pub fn build(kind: TrigFn, theta_range: [f64; 2], n_segments: usize) -> Result<Self> {
        let [lo, hi] = theta_range;
        if n_segments < 2 {
            return Err(Error::Config(format!("need at least 2 segments, got {n_segments}")));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("empty yaw range [{lo}, {hi}]")));
        }
        let h = (hi - lo) / n_segments as f64;
        let breakpoints: Vec<f64> = (0..=n_segments)
            .map(|k| if k == n_segments { hi } else { lo + k as f64 * h })
            .collect();
        let (slopes, intercepts) = breakpoints
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (kind.eval(a), kind.eval(b));
                let m = (fb - fa) / (b - a);
                (m, fa - m * a)
            })
            .unzip();
        Ok(Self { kind, breakpoints, slopes, intercepts })
    }

    pub fn n_segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn range(&self) -> [f64; 2] {
        [self.breakpoints[0], *self.breakpoints.last().unwrap()]
    }

    /// Segment width `h`.
    pub fn width(&self) -> f64 {
        let [lo, hi] = self.range();
        (hi - lo) / self.n_segments() as f64
    }

    /// Worst-case chord error `h^2 / 8` (both functions have `|f''| <= 1`).
    pub fn error_bound(&self) -> f64 {
        self.width().powi(2) / 8.0
    }

    /// Segment containing `theta`; the lower one at interior breakpoints.
    pub fn segment_of(&self, theta: f64) -> Result<usize> {
        let [lo, hi] = self.range();
        if !(lo..=hi).contains(&theta) {
            return Err(Error::Domain(format!("yaw {theta} outside [{lo}, {hi}]")));
        }
        let k = ((theta - lo) / self.width()).floor() as usize;
        let mut k = k.min(self.n_segments() - 1);
        // guard against rounding at breakpoints
        while k > 0 && theta < self.breakpoints[k] {
            k -= 1;
        }
        while k + 1 < self.n_segments() && theta > self.breakpoints[k + 1] {
            k += 1;
        }
        Ok(k)
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        let k = self.segment_of(theta)?;
        Ok(self.slopes[k] * theta + self.intercepts[k])
    }

    /// Smallest and largest value the approximation takes (attained at knots).
    pub fn value_range(&self) -> [f64; 2] {
        self.breakpoints.iter().map(|&t| self.kind.eval(t)).fold(
            [f64::INFINITY, f64::NEG_INFINITY],
            |[lo, hi], v| [lo.min(v), hi.max(v)],
        )
    }
}

/// Smallest segment count `>= n_segments` for which 0 is a breakpoint of a
/// uniform grid over `theta_range` (when the range straddles 0). Returns
/// `None` if no count up to `8 * n_segments` works.
pub fn segments_with_zero_knot(theta_range: [f64; 2], n_segments: usize) -> Option<usize> {
    let [lo, hi] = theta_range;
    if !(lo < 0.0 && 0.0 < hi) {
        return Some(n_segments);
    }
    (n_segments..=8 * n_segments).find(|&n| {
        let steps = -lo / ((hi - lo) / n as f64);
        (steps - steps.round()).abs() < 1e-9
    })
}
