use serde::{Deserialize, Serialize};

use crate::error::{DpcError, Result};
use crate::stats::sample_std;

/// The minimum property difference treated as meaningful.
///
/// Serialized as `{"kind":"std_fraction","fraction":0.01,"resolved":t}` or
/// `{"kind":"absolute","value":t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    Absolute { value: f64 },
    StdFraction { fraction: f64, resolved: f64 },
}

impl Threshold {
    pub fn absolute(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(DpcError::InvalidConfig(format!(
                "threshold must be a finite non-negative number, got {value}"
            )));
        }
        Ok(Threshold::Absolute { value })
    }

    /// The resolved scalar t.
    pub fn value(&self) -> f64 {
        match *self {
            Threshold::Absolute { value } => value,
            Threshold::StdFraction { resolved, .. } => resolved,
        }
    }
}

/// `fraction` times the sample standard deviation of `values`.
pub fn compute_threshold(values: &[f64], fraction: f64) -> Result<Threshold> {
    if values.len() < 2 {
        return Err(DpcError::TooFewValues {
            found: values.len(),
        });
    }
    if !fraction.is_finite() || fraction < 0.0 {
        return Err(DpcError::InvalidConfig(format!(
            "threshold fraction must be finite and non-negative, got {fraction}"
        )));
    }
    Ok(Threshold::StdFraction {
        fraction,
        resolved: fraction * sample_std(values),
    })
}
