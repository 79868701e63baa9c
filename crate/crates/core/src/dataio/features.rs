use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::telemetry::{
    TelemetryRecord, COL_INLET_PRESSURE, COL_INLET_TEMP, COL_OUTLET_PRESSURE, COL_OUTLET_TEMP,
};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Observer input columns, in matrix order.
pub const FEATURE_COLUMNS: [&str; 4] =
    [COL_INLET_PRESSURE, COL_OUTLET_PRESSURE, COL_INLET_TEMP, COL_OUTLET_TEMP];

/// Which metered flow an observer predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowChannel {
    Outlet,
    Inlet,
}

impl FlowChannel {
    pub fn target(self, r: &TelemetryRecord) -> Option<f64> {
        match self {
            FlowChannel::Outlet => Some(r.flowrate),
            FlowChannel::Inlet => r.inlet_flowrate,
        }
    }
}

/// Dense row-major matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let w = columns.len();
        if w == 0 || data.len() % w != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not fill rows of width {w}",
                data.len()
            )));
        }
        Ok(Self { n_rows: data.len() / w, columns, data })
    }

    /// Builds a matrix from row slices with generated column names `x0..`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let w = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        let columns = (0..w).map(|j| format!("x{j}")).collect();
        Self::new(columns, rows.concat())
    }

    /// Observer features of each record, in [`FEATURE_COLUMNS`] order.
    pub fn from_records(records: &[TelemetryRecord]) -> Self {
        let mut data = Vec::with_capacity(records.len() * 4);
        for r in records {
            data.extend_from_slice(&[r.inlet_pressure, r.outlet_pressure, r.inlet_temperature, r.outlet_temperature]);
        }
        Self {
            columns: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            n_rows: records.len(),
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { columns: self.columns.clone(), n_rows: idx.len(), data }
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        let w = self.n_cols();
        Self {
            columns: self.columns.clone(),
            n_rows: range.len(),
            data: self.data[range.start * w..range.end * w].to_vec(),
        }
    }
}

/// Shuffled train/test partition. The test part holds `ceil(n * test_fraction)`
/// items; the permutation is a function of `seed` only.
pub fn split<T: Clone>(items: &[T], test_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() < 10 {
        return Err(Error::InsufficientData(format!("split needs at least 10 records, got {}", items.len())));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = items.len();
    let n_test = ((n as f64 * test_fraction) - 1e-9).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let test = order[..n_test].iter().map(|&i| items[i].clone()).collect();
    let train = order[n_test..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventy_thirty() {
        let v: Vec<usize> = (0..21000).collect();
        let (tr, te) = split(&v, 0.3, 12).unwrap();
        assert_eq!((tr.len(), te.len()), (14700, 6300));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, v);
        assert_eq!(split(&v, 0.3, 12).unwrap(), (tr.clone(), te.clone()));
        assert_ne!(split(&v, 0.3, 13).unwrap().1, te);
    }

    #[test]
    fn too_few_records() {
        assert!(matches!(split(&[1; 9], 0.3, 1), Err(Error::InsufficientData(_))));
    }
}
