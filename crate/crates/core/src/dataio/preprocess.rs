use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::{Error, Result};

/// Per-column min-max scaler fitted on training rows only. Columns with zero
/// range are flagged constant and map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot fit a scaler on zero rows".into()));
        }
        let w = train.n_cols();
        let mut min = vec![f64::INFINITY; w];
        let mut max = vec![f64::NEG_INFINITY; w];
        for row in train.rows() {
            for j in 0..w {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        let range: Vec<f64> = min.iter().zip(&max).map(|(a, b)| b - a).collect();
        let constant = range.iter().map(|&r| r <= 0.0).collect();
        Ok(Self { min, range, constant })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    fn check(&self, m: &FeatureMatrix) -> Result<()> {
        if m.n_cols() != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), found: m.n_cols() });
        }
        Ok(())
    }

    /// Scales without clipping: rows outside the training range leave [0, 1].
    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(m)?;
        let mut data = Vec::with_capacity(m.as_slice().len());
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                data.push(if self.constant[j] { 0.0 } else { (v - self.min[j]) / self.range[j] });
            }
        }
        FeatureMatrix::new(m.columns.clone(), data)
    }

    pub fn inverse_transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(m)?;
        let mut data = Vec::with_capacity(m.as_slice().len());
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                data.push(if self.constant[j] { self.min[j] } else { v * self.range[j] + self.min[j] });
            }
        }
        FeatureMatrix::new(m.columns.clone(), data)
    }
}

/// Polynomial feature expansion with a bias column. Monomials are ordered by
/// total degree, then lexicographically by the variables they multiply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyExpansion {
    pub degree: usize,
    pub input_names: Vec<String>,
    /// Variable indices of each monomial; empty for the bias term.
    pub terms: Vec<Vec<usize>>,
}

impl PolyExpansion {
    pub fn new(input_names: Vec<String>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("polynomial degree must be at least 1".into()));
        }
        let d = input_names.len();
        let mut terms = vec![Vec::new()];
        let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..degree {
            let mut next = Vec::new();
            for t in &layer {
                let start = t.last().copied().unwrap_or(0);
                for v in start..d {
                    let mut m = t.clone();
                    m.push(v);
                    next.push(m);
                }
            }
            terms.extend(next.iter().cloned());
            layer = next;
        }
        Ok(Self { degree, input_names, terms })
    }

    pub fn output_width(&self) -> usize {
        self.terms.len()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| {
                if t.is_empty() {
                    return "1".to_string();
                }
                let mut parts: Vec<String> = Vec::new();
                let mut i = 0;
                while i < t.len() {
                    let v = t[i];
                    let run = t[i..].iter().take_while(|&&u| u == v).count();
                    let name = &self.input_names[v];
                    parts.push(if run == 1 { name.clone() } else { format!("{name}^{run}") });
                    i += run;
                }
                parts.join(" ")
            })
            .collect()
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.n_cols() != self.input_names.len() {
            return Err(Error::WidthMismatch { expected: self.input_names.len(), found: m.n_cols() });
        }
        let mut data = Vec::with_capacity(m.n_rows() * self.terms.len());
        for row in m.rows() {
            for t in &self.terms {
                data.push(t.iter().map(|&v| row[v]).product());
            }
        }
        FeatureMatrix::new(self.output_names(), data)
    }
}
