//! Construction of the universal time-shift set Λ(ε, N) and its densities.
//!
//! One period of length N₁+1 carries N+1 cluster points j/(N+1) on [0,1) and
//! one point j+1-jδ just below each integer j+1 for 1 <= j <= N₁; the whole
//! set is the periodization of those base points.

use num::rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LambdaError {
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// The bracket convention used by the construction: the biggest integer
/// strictly smaller than x, so `strict_floor(2.0) == 1`.
///
/// Values within 1e-9 (relative) of an integer are snapped to it first so
/// that ratios like 1/0.1 behave like their exact rational value.
pub fn strict_floor(x: f64) -> i64 {
    let snapped = x.round();
    let x = if (x - snapped).abs() <= 1e-9 * snapped.abs().max(1.0) {
        snapped
    } else {
        x
    };
    let f = x.floor();
    if f == x {
        f as i64 - 1
    } else {
        f as i64
    }
}

/// A periodized point set: base points in [0, period) repeated with period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSet {
    pub base_points: Vec<f64>,
    pub period: f64,
}

impl PeriodicSet {
    pub fn new(mut base_points: Vec<f64>, period: f64) -> Result<Self, LambdaError> {
        if period <= 0.0 {
            return Err(LambdaError::InvalidParameter("period must be > 0".into()));
        }
        if base_points.is_empty() {
            return Err(LambdaError::InvalidParameter("need at least one point".into()));
        }
        base_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if base_points[0] < 0.0 || *base_points.last().unwrap() >= period {
            return Err(LambdaError::InvalidParameter(
                "base points must lie in [0, period)".into(),
            ));
        }
        Ok(PeriodicSet {
            base_points,
            period,
        })
    }

    pub fn count(&self) -> usize {
        self.base_points.len()
    }

    /// i-th point of the sorted bi-infinite enumeration, anchored so that
    /// index 0 is the first base point.
    pub fn lambda_at(&self, i: i64) -> f64 {
        let n = self.count() as i64;
        let q = i.div_euclid(n);
        let r = i.rem_euclid(n) as usize;
        self.base_points[r] + q as f64 * self.period
    }

    /// All points in the half-open window [r, r+a), sorted. Half-open keeps
    /// the count over whole periods exactly proportional even when r hits a
    /// point.
    pub fn points_in(&self, r: f64, a: f64) -> Vec<f64> {
        assert!(a > 0.0, "window length must be positive");
        let mut out = Vec::new();
        let lo = r;
        let hi = r + a;
        for &b in &self.base_points {
            let k_lo = ((lo - b) / self.period).ceil() as i64 - 1;
            let k_hi = ((hi - b) / self.period).floor() as i64 + 1;
            for k in k_lo..=k_hi {
                let x = b + k as f64 * self.period;
                if x >= lo && x < hi {
                    out.push(x);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }
}

/// The universal set Λ(ε, N) with its construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalSet {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N1")]
    pub n1: usize,
    pub delta: f64,
    pub eps1: f64,
    pub period: f64,
    pub base_points: Vec<f64>,
}

/// Optional replacements for the spacing parameters δ and ε₁.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub eps1: Option<f64>,
}

/// Build Λ(ε, N): N₁ = strict_floor(N/ε)+1, then one period of base points.
///
/// Defaults ε₁ = 1/(4N₁) and δ = 2ε₁ satisfy δ < 1/N₁ and jδ > ε₁ for all
/// j >= 1 simultaneously.
pub fn build_universal(
    eps: f64,
    n: usize,
    overrides: Option<Overrides>,
) -> Result<UniversalSet, LambdaError> {
    if eps <= 0.0 {
        return Err(LambdaError::InvalidParameter("eps must be > 0".into()));
    }
    if n < 1 {
        return Err(LambdaError::InvalidParameter("N must be >= 1".into()));
    }
    let n1 = (strict_floor(n as f64 / eps) + 1).max(1) as usize;
    let ov = overrides.unwrap_or_default();
    let (delta, eps1) = match (ov.delta, ov.eps1) {
        (None, None) => (1.0 / (2.0 * n1 as f64), 1.0 / (4.0 * n1 as f64)),
        (Some(d), None) => (d, d / 2.0),
        (None, Some(e)) => (2.0 * e, e),
        (Some(d), Some(e)) => (d, e),
    };
    if !(delta > 0.0 && delta < 1.0 / n1 as f64) {
        return Err(LambdaError::InvalidOverride(format!(
            "delta = {delta} must lie in (0, 1/N1) = (0, {})",
            1.0 / n1 as f64
        )));
    }
    if (delta - 2.0 * eps1).abs() > 1e-12 {
        return Err(LambdaError::InvalidOverride(
            "delta must equal 2*eps1".into(),
        ));
    }
    if delta <= eps1 {
        return Err(LambdaError::InvalidOverride(
            "need j*delta > eps1 for all j >= 1, i.e. delta > eps1".into(),
        ));
    }
    let period = (n1 + 1) as f64;
    let mut base_points = Vec::with_capacity(n + 1 + n1);
    for j in 0..=n {
        base_points.push(j as f64 / (n + 1) as f64);
    }
    for j in 1..=n1 {
        base_points.push((j + 1) as f64 - j as f64 * delta);
    }
    Ok(UniversalSet {
        n,
        n1,
        delta,
        eps1,
        period,
        base_points,
    })
}

impl UniversalSet {
    pub fn count(&self) -> usize {
        self.base_points.len()
    }

    pub fn as_periodic(&self) -> PeriodicSet {
        PeriodicSet {
            base_points: self.base_points.clone(),
            period: self.period,
        }
    }

    pub fn lambda_at(&self, i: i64) -> f64 {
        let n = self.count() as i64;
        let q = i.div_euclid(n);
        let r = i.rem_euclid(n) as usize;
        self.base_points[r] + q as f64 * self.period
    }

    /// Exact density (N+1+N₁)/(N₁+1) as a reduced rational.
    pub fn density(&self) -> Ratio<i64> {
        Ratio::new((self.n + 1 + self.n1) as i64, (self.n1 + 1) as i64)
    }

    pub fn points_in(&self, r: f64, a: f64) -> Vec<f64> {
        self.as_periodic().points_in(r, a)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("UniversalSet serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LambdaError> {
        serde_json::from_str(text)
            .map_err(|e| LambdaError::InvalidParameter(format!("bad set JSON: {e}")))
    }
}
