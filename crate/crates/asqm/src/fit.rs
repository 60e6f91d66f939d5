//! Least-squares recovery of the stall-model intercept and segment
//! degradation weights from scenario/MOS observations.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AsqmError, Result};
use crate::qoe::SegmentWeights;

/// One aggregated scenario observation: the three per-segment stall rates
/// and the MOS the scenario received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitObservation {
    /// s_i * l_i / t_i for segments A, B, C.
    pub features: [f64; 3],
    pub q_a: f64,
    pub observed_mos: f64,
}

/// Fit outcome with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub weights: SegmentWeights,
    pub residual_rms: f64,
    pub rank: usize,
    pub condition_estimate: f64,
}

impl FitReport {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < 4
    }
}

/// Builds the design matrix and right-hand side of the linear system:
/// row j = [1, f_a, f_b, f_c], rhs_j = ln(observed MOS).
pub fn build_system(observations: &[FitObservation]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if observations.len() < 4 {
        return Err(AsqmError::Underdetermined { rows: observations.len(), needed: 4 });
    }
    let mut design = DMatrix::zeros(observations.len(), 4);
    let mut rhs = DVector::zeros(observations.len());
    for (j, obs) in observations.iter().enumerate() {
        if !(obs.observed_mos > 0.0) || !obs.observed_mos.is_finite() {
            return Err(AsqmError::Observation {
                row: j,
                message: format!(
                    "observed MOS {} must be positive for the log transform",
                    obs.observed_mos
                ),
            });
        }
        for (i, &f) in obs.features.iter().enumerate() {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(AsqmError::Observation {
                    row: j,
                    message: format!("feature {i} = {f} must be non-negative and finite"),
                });
            }
            design[(j, i + 1)] = f;
        }
        design[(j, 0)] = 1.0;
        rhs[j] = obs.observed_mos.ln();
    }
    Ok((design, rhs))
}

/// Solves the over-determined system via SVD, returning the minimum-norm
/// least-squares solution along with residual and conditioning diagnostics.
pub fn solve_weights(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<FitReport> {
    if design.nrows() < 4 || design.ncols() != 4 {
        return Err(AsqmError::Underdetermined { rows: design.nrows(), needed: 4 });
    }
    let svd = design.clone().svd(true, true);
    let eps = f64::EPSILON * design.nrows().max(design.ncols()) as f64
        * svd.singular_values.max();
    let rank = svd.rank(eps);
    let solution = svd
        .solve(rhs, eps)
        .map_err(|e| AsqmError::InvalidInput(format!("SVD solve failed: {e}")))?;
    let residual = design * &solution - rhs;
    let residual_rms = (residual.norm_squared() / design.nrows() as f64).sqrt();
    let smallest_used = svd
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > eps)
        .fold(f64::INFINITY, f64::min);
    let condition_estimate = if smallest_used.is_finite() && smallest_used > 0.0 {
        svd.singular_values.max() / smallest_used
    } else {
        f64::INFINITY
    };
    Ok(FitReport {
        weights: SegmentWeights {
            ln_c: solution[0],
            d_a: solution[1],
            d_b: solution[2],
            d_c: solution[3],
            calibrated: true,
        },
        residual_rms,
        rank,
        condition_estimate,
    })
}

/// Convenience wrapper: build the system from observations and solve it.
pub fn fit(observations: &[FitObservation]) -> Result<FitReport> {
    let (design, rhs) = build_system(observations)?;
    solve_weights(&design, &rhs)
}

/// One row of the observation dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub model_id: String,
    pub s_a: f64,
    pub l_a: f64,
    pub t_a: f64,
    pub s_b: f64,
    pub l_b: f64,
    pub t_b: f64,
    pub s_c: f64,
    pub l_c: f64,
    pub t_c: f64,
    pub q_a: f64,
    pub mos: f64,
}

impl DatasetRow {
    pub fn to_observation(&self, row: usize) -> Result<FitObservation> {
        let mut features = [0.0; 3];
        let triples = [
            (self.s_a, self.l_a, self.t_a),
            (self.s_b, self.l_b, self.t_b),
            (self.s_c, self.l_c, self.t_c),
        ];
        for (i, (s, l, t)) in triples.into_iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            if !(t > 0.0) {
                return Err(AsqmError::Observation {
                    row,
                    message: format!("segment {i}: {s} stalls but segment length {t}"),
                });
            }
            features[i] = s * l / t;
        }
        Ok(FitObservation { features, q_a: self.q_a, observed_mos: self.mos })
    }
}

/// Averages MOS (and the codec baseline) over rows sharing a model id,
/// keeping the first occurrence order.
pub fn aggregate_by_model(rows: &[DatasetRow]) -> Vec<DatasetRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<&DatasetRow>> =
        std::collections::HashMap::new();
    for row in rows {
        if !groups.contains_key(&row.model_id) {
            order.push(row.model_id.clone());
        }
        groups.entry(row.model_id.clone()).or_default().push(row);
    }
    order
        .into_iter()
        .map(|id| {
            let members = &groups[&id];
            let n = members.len() as f64;
            let mean = |f: fn(&DatasetRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            DatasetRow {
                model_id: id,
                s_a: mean(|r| r.s_a),
                l_a: mean(|r| r.l_a),
                t_a: mean(|r| r.t_a),
                s_b: mean(|r| r.s_b),
                l_b: mean(|r| r.l_b),
                t_b: mean(|r| r.t_b),
                s_c: mean(|r| r.s_c),
                l_c: mean(|r| r.l_c),
                t_c: mean(|r| r.t_c),
                q_a: mean(|r| r.q_a),
                mos: mean(|r| r.mos),
            }
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| AsqmError::Parse { line: 0, message: e.to_string() })?;
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<DatasetRow>().enumerate() {
        let row = record.map_err(|e| AsqmError::Parse { line: i + 2, message: e.to_string() })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_dataset(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| AsqmError::Parse { line: 0, message: e.to_string() })?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| AsqmError::Parse { line: 0, message: e.to_string() })?;
    }
    writer.flush()?;
    Ok(())
}
