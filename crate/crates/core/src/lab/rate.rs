use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::brownian::Estimate;
use crate::error::{domain, Result};

/// Errors below this are treated as exact zeros (round-off only).
pub const EXACT_THRESHOLD: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Positive decay exponent: `error ~ n^{-slope}`.
    pub slope: f64,
    pub slope_se: f64,
}

/// Weighted least squares of `log2 error` against `log2 n`.
///
/// Weights are the inverse variances of `log2 error` propagated from the
/// standard errors. The slope standard error is the model-based one inflated
/// by the reduced chi-square when the scatter exceeds the stated errors. If
/// any standard error is zero the fit is unweighted and the standard error
/// comes from the residuals alone.
pub fn fit_rate(levels: &[u64], errors: &[Estimate]) -> Result<RateFit> {
    if levels.len() < 3 || levels.len() != errors.len() {
        return domain(format!(
            "rate fit needs at least 3 levels with one error each (got {} levels, {} errors)",
            levels.len(),
            errors.len()
        ));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return domain("levels must be strictly increasing");
    }
    if errors.iter().any(|e| !(e.value > 0.0 && e.value.is_finite())) {
        return domain("rate fit needs positive finite errors");
    }
    let x: Vec<f64> = levels.iter().map(|&n| (n as f64).log2()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.value.log2()).collect();
    let sigma: Vec<f64> = errors
        .iter()
        .map(|e| e.std_error / (e.value * std::f64::consts::LN_2))
        .collect();
    let weighted = sigma.iter().all(|s| *s > 0.0 && s.is_finite());
    let w: Vec<f64> = if weighted {
        sigma.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; x.len()]
    };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    let b = sxy / sxx;
    let a = ym - b * xm;
    let dof = (x.len() - 2) as f64;
    let chi2: f64 = w
        .iter()
        .zip(x.iter().zip(&y))
        .map(|(w, (x, y))| w * (y - a - b * x).powi(2))
        .sum::<f64>()
        / dof;
    let scale = if weighted { chi2.max(1.0) } else { chi2 };
    Ok(RateFit {
        slope: -b,
        slope_se: (scale / sxx).sqrt(),
    })
}

/// Per-level error estimates with a fitted decay exponent.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub levels: Vec<u64>,
    pub errors: Vec<Estimate>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// `fitted`, `exact` (all errors at round-off) or `unfitted: <reason>`.
    pub fit_status: String,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl RateReport {
    pub fn new(levels: Vec<u64>, errors: Vec<Estimate>) -> Self {
        let (slope, slope_se, fit_status) = if errors.iter().all(|e| e.value.abs() < EXACT_THRESHOLD) {
            (None, None, "exact".to_string())
        } else {
            match fit_rate(&levels, &errors) {
                Ok(f) => (Some(f.slope), Some(f.slope_se), "fitted".to_string()),
                Err(e) => (None, None, format!("unfitted: {e}")),
            }
        };
        Self {
            levels,
            errors,
            slope,
            slope_se,
            fit_status,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn is_exact(&self) -> bool {
        self.fit_status == "exact"
    }

    /// One row per level: `n,error,se`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "n,error,se")?;
        for (n, e) in self.levels.iter().zip(&self.errors) {
            writeln!(out, "{n},{},{}", e.value, e.std_error)?;
        }
        Ok(())
    }

    /// Structured summary (slope, slope_se, status, metadata) as JSON.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "slope": self.slope,
            "slope_se": self.slope_se,
            "fit_status": self.fit_status,
            "levels": self.levels,
            "metadata": self.metadata,
        })
    }
}
