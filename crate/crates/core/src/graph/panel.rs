//! Matched panel data: one record per (row unit, period) with the column unit it
//! was matched to, an outcome and optional covariates.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A single observation as read from input. Ids are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub period: usize,
    pub col: usize,
    pub y: f64,
    pub x: Vec<f64>,
}

/// Validated matched panel, sorted by (row, period).
///
/// `row_labels` / `col_labels` carry the external (1-based or otherwise) identifiers
/// so that re-indexing during component extraction keeps outputs traceable.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPanel {
    rows: usize,
    cols: usize,
    periods: usize,
    row: Vec<usize>,
    period: Vec<usize>,
    col: Vec<usize>,
    y: Vec<f64>,
    x: Vec<f64>,
    covariate_names: Vec<String>,
    row_labels: Vec<u64>,
    col_labels: Vec<u64>,
}

impl MatchedPanel {
    /// Builds a panel with zero-based ids; labels default to `id + 1`.
    pub fn new(
        rows: usize,
        cols: usize,
        periods: usize,
        observations: Vec<Observation>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let row_labels = (1..=rows as u64).collect();
        let col_labels = (1..=cols as u64).collect();
        Self::with_labels(
            rows,
            cols,
            periods,
            observations,
            covariate_names,
            row_labels,
            col_labels,
        )
    }

    pub fn with_labels(
        rows: usize,
        cols: usize,
        periods: usize,
        mut observations: Vec<Observation>,
        covariate_names: Vec<String>,
        row_labels: Vec<u64>,
        col_labels: Vec<u64>,
    ) -> Result<Self> {
        if row_labels.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, got: row_labels.len() });
        }
        if col_labels.len() != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: col_labels.len() });
        }
        let k = covariate_names.len();
        let mut seen = HashSet::with_capacity(observations.len());
        for (index, obs) in observations.iter().enumerate() {
            if obs.row >= rows {
                return Err(Error::IdOutOfRange { what: "row", id: obs.row + 1, max: rows });
            }
            if obs.col >= cols {
                return Err(Error::IdOutOfRange { what: "column", id: obs.col + 1, max: cols });
            }
            if obs.period >= periods {
                return Err(Error::IdOutOfRange { what: "period", id: obs.period + 1, max: periods });
            }
            if !obs.y.is_finite() {
                return Err(Error::NonFiniteOutcome { index });
            }
            if obs.x.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: obs.x.len() });
            }
            if !seen.insert((obs.row, obs.period)) {
                return Err(Error::DuplicateObservation {
                    row: obs.row + 1,
                    period: obs.period + 1,
                });
            }
        }
        observations.sort_by_key(|o| (o.row, o.period));

        let n = observations.len();
        let mut panel = MatchedPanel {
            rows,
            cols,
            periods,
            row: Vec::with_capacity(n),
            period: Vec::with_capacity(n),
            col: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            x: Vec::with_capacity(n * k),
            covariate_names,
            row_labels,
            col_labels,
        };
        for obs in observations {
            panel.row.push(obs.row);
            panel.period.push(obs.period);
            panel.col.push(obs.col);
            panel.y.push(obs.y);
            panel.x.extend_from_slice(&obs.x);
        }
        Ok(panel)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row
    }

    pub fn period_ids(&self) -> &[usize] {
        &self.period
    }

    pub fn col_ids(&self) -> &[usize] {
        &self.col
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn num_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Covariate column `k` over all observations.
    pub fn covariate(&self, k: usize) -> Vec<f64> {
        let stride = self.num_covariates();
        (0..self.len()).map(|o| self.x[o * stride + k]).collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn row_labels(&self) -> &[u64] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[u64] {
        &self.col_labels
    }

    /// Copy of the panel with a different outcome vector (same ordering).
    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: y.len() });
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutcome { index });
        }
        let mut out = self.clone();
        out.y = y;
        Ok(out)
    }

    pub fn observation(&self, o: usize) -> Observation {
        let k = self.num_covariates();
        Observation {
            row: self.row[o],
            period: self.period[o],
            col: self.col[o],
            y: self.y[o],
            x: self.x[o * k..(o + 1) * k].to_vec(),
        }
    }

    /// Re-indexes units densely, dropping those with no observations.
    pub fn drop_isolated(&self) -> Result<Self> {
        let mut row_map = vec![usize::MAX; self.rows];
        let mut col_map = vec![usize::MAX; self.cols];
        for o in 0..self.len() {
            row_map[self.row[o]] = 0;
            col_map[self.col[o]] = 0;
        }
        let mut row_labels = Vec::new();
        for (i, slot) in row_map.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = row_labels.len();
                row_labels.push(self.row_labels[i]);
            }
        }
        let mut col_labels = Vec::new();
        for (j, slot) in col_map.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = col_labels.len();
                col_labels.push(self.col_labels[j]);
            }
        }
        let observations = (0..self.len())
            .map(|o| {
                let mut obs = self.observation(o);
                obs.row = row_map[obs.row];
                obs.col = col_map[obs.col];
                obs
            })
            .collect();
        Self::with_labels(
            row_labels.len(),
            col_labels.len(),
            self.periods,
            observations,
            self.covariate_names.clone(),
            row_labels,
            col_labels,
        )
    }

    /// Keeps only the listed units (given as masks), re-indexing densely in
    /// original order.
    pub(crate) fn restrict(&self, keep_row: &[bool], keep_col: &[bool]) -> Result<Self> {
        let observations: Vec<Observation> = (0..self.len())
            .filter(|&o| keep_row[self.row[o]] && keep_col[self.col[o]])
            .map(|o| self.observation(o))
            .collect();
        let mut row_map = vec![usize::MAX; self.rows];
        let mut row_labels = Vec::new();
        for i in 0..self.rows {
            if keep_row[i] {
                row_map[i] = row_labels.len();
                row_labels.push(self.row_labels[i]);
            }
        }
        let mut col_map = vec![usize::MAX; self.cols];
        let mut col_labels = Vec::new();
        for j in 0..self.cols {
            if keep_col[j] {
                col_map[j] = col_labels.len();
                col_labels.push(self.col_labels[j]);
            }
        }
        let observations = observations
            .into_iter()
            .map(|mut obs| {
                obs.row = row_map[obs.row];
                obs.col = col_map[obs.col];
                obs
            })
            .collect();
        Self::with_labels(
            row_labels.len(),
            col_labels.len(),
            self.periods,
            observations,
            self.covariate_names.clone(),
            row_labels,
            col_labels,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(row: usize, period: usize, col: usize, y: f64) -> Observation {
        Observation { row, period, col, y, x: vec![] }
    }

    #[test]
    fn rejects_duplicate_row_period() {
        let err = MatchedPanel::new(1, 2, 1, vec![obs(0, 0, 0, 1.0), obs(0, 0, 1, 2.0)], vec![])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateObservation { row: 1, period: 1 }));
    }

    #[test]
    fn rejects_out_of_range_and_nonfinite() {
        let err = MatchedPanel::new(1, 1, 1, vec![obs(0, 0, 3, 1.0)], vec![]).unwrap_err();
        assert!(matches!(err, Error::IdOutOfRange { what: "column", .. }));
        let err = MatchedPanel::new(1, 1, 1, vec![obs(0, 0, 0, f64::NAN)], vec![]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteOutcome { index: 0 }));
    }

    #[test]
    fn sorts_by_row_then_period() {
        let p = MatchedPanel::new(
            2,
            2,
            2,
            vec![obs(1, 1, 0, 4.0), obs(0, 1, 1, 2.0), obs(1, 0, 1, 3.0), obs(0, 0, 0, 1.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(p.outcomes(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.row_ids(), &[0, 0, 1, 1]);
    }

    #[test]
    fn drop_isolated_reindexes_and_keeps_labels() {
        let p = MatchedPanel::new(3, 3, 1, vec![obs(0, 0, 2, 1.0), obs(2, 0, 2, 2.0)], vec![])
            .unwrap();
        let q = p.drop_isolated().unwrap();
        assert_eq!((q.rows(), q.cols()), (2, 1));
        assert_eq!(q.row_labels(), &[1, 3]);
        assert_eq!(q.col_labels(), &[3]);
    }
}
