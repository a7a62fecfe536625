//! Labelled feature matrices and CSV ingestion.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major feature matrix with one integer label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n_features: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, n_features: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidObjective(
                "dataset needs at least one feature".into(),
            ));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset feature".into()));
        }
        Ok(Self {
            features,
            labels,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.n_features..(j + 1) * self.n_features]
    }

    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Parses a header-free CSV file where every line is `label,f1,...,fd`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse_csv(&text, path)
    }

    pub(crate) fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::DatasetParse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let label = fields
                .next()
                .unwrap_or_default()
                .parse::<usize>()
                .map_err(|e| err(line_no, format!("label: {e}")))?;
            let row = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| err(line_no, format!("feature {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.is_empty() {
                return Err(err(line_no, "no feature columns".into()));
            }
            if let Some(w) = row.iter().position(|v| !v.is_finite()) {
                return Err(err(line_no, format!("feature {} is not finite", w + 1)));
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(err(
                        line_no,
                        format!("expected {w} features, found {}", row.len()),
                    ))
                }
                _ => {}
            }
            labels.push(label);
            features.extend(row);
        }
        let n_features =
            width.ok_or_else(|| Error::EmptyDataset(format!("{} has no rows", path.display())))?;
        Self::new(features, labels, n_features)
    }
}
