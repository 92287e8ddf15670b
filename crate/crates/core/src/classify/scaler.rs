use serde::{Deserialize, Serialize};

use super::{check_dim, ClassifyError};

pub const STD_FLOOR: f64 = 1e-12;

/// Per-column standardization `z = (x - mean) / std` with population std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<Scaler, ClassifyError> {
    if rows.len() < 2 {
        return Err(ClassifyError::InsufficientData(format!(
            "scaler needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(ClassifyError::DimensionMismatch { expected: dim, got: r.len() });
    }
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..dim)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let stds = (0..dim)
        .map(|j| {
            let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
            var.sqrt().max(STD_FLOOR)
        })
        .collect();
    Ok(Scaler { means, stds })
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        check_dim(self.dim(), x)?;
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ClassifyError> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.means.len() != self.stds.len() {
            return Err("scaler means/stds length mismatch".into());
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err("scaler mean is not finite".into());
        }
        if self.stds.iter().any(|s| !(s.is_finite() && *s >= STD_FLOOR)) {
            return Err(format!("scaler std below floor {STD_FLOOR}"));
        }
        Ok(())
    }
}
