//! Output of an ensemble run: one row per chain plus run metadata.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{coordinate_header, read_matrix_csv, write_matrix_csv};
use crate::planner::SamplerPlan;
use crate::samplers::UpdateRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub plan: SamplerPlan,
    pub model: String,
    pub rule: UpdateRule,
    /// Set for rules that carry no accuracy guarantee; `plan.predicted_tv` is then null.
    #[serde(default)]
    pub empirical_only: bool,
    #[serde(rename = "N")]
    pub n: usize,
    /// Post-processing applied to the chain output, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    /// `N × p`, row `i` is the final state of chain `i`.
    pub data: DMatrix<f64>,
    pub meta: SampleMeta,
}

/// `samples.csv` → `samples.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Applies `f` to every sample.
    pub fn map_rows(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<DMatrix<f64>> {
        let mut rows = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            rows.push(f(&self.row(i)));
        }
        let q = rows.first().map_or(self.dim(), |r| r.len());
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: rows.iter().map(|r| r.len()).find(|&l| l != q).unwrap_or(q),
            });
        }
        Ok(DMatrix::from_fn(self.len(), q, |i, j| rows[i][j]))
    }

    /// Writes `path` (header `x1..xp`) and a JSON sidecar next to it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_matrix_csv(path, &self.data, Some(&coordinate_header(self.dim())))?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = read_matrix_csv(path)?;
        let meta: SampleMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        if meta.n != data.nrows() {
            return Err(Error::Parse(format!(
                "sidecar says N={}, file has {} rows",
                meta.n,
                data.nrows()
            )));
        }
        Ok(Self { data, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{plan_lmc, Algorithm};

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let set = SampleSet {
            data: DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.1),
            meta: SampleMeta {
                seed: 9,
                plan: plan_lmc(3, 0.5, 1.0, 0.1).unwrap(),
                model: "quadratic".into(),
                rule: UpdateRule::Lmc,
                empirical_only: false,
                n: 4,
                transform: None,
                wall_time_s: 0.5,
            },
        };
        set.write(&path).unwrap();
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("x1,x2,x3\n"));
        let back = SampleSet::read(&path).unwrap();
        assert_eq!(back.data, set.data);
        assert_eq!(back.meta, set.meta);
        assert_eq!(back.meta.plan.algo, Algorithm::Lmc);
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        for k in ["seed", "plan", "model", "N", "wall_time_s"] {
            assert!(side.get(k).is_some(), "{k}");
        }
    }
}
