use crate::error::{Error, Result};

/// An ordered set of `n` observations in `dim` dimensions, stored row-major.
///
/// Observation order carries the segmentation semantics: segment boundaries
/// are expressed as counts of leading observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid_input("observation dimension must be >= 1"));
        }
        if values.is_empty() {
            return Err(Error::invalid_input(
                "dataset must contain at least one observation",
            ));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::invalid_input(format!(
                "buffer length {} is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid_input(format!(
                "non-finite entry at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        let n = values.len() / dim;
        Ok(Dataset { values, n, dim })
    }

    /// Builds a univariate dataset.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Dataset::new(values, 1)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_input(
                "dataset must contain at least one observation",
            ));
        }
        let dim = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid_input(format!(
                    "row {i} has {} columns, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Dataset::new(values, dim)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Concatenates two datasets of equal dimension, preserving order.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::invalid_input(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Dataset::new(values, self.dim)
    }

    /// Reverses observation order (used by permutation-sensitivity checks).
    pub fn reversed(&self) -> Dataset {
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..self.n).rev() {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            values,
            n: self.n,
            dim: self.dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let err = Dataset::univariate(vec![1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn rejects_ragged_buffer() {
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn row_access_is_row_major() {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn reversed_reverses_rows() {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let r = d.reversed();
        assert_eq!(r.row(0), &[3.0, 4.0]);
        assert_eq!(r.row(1), &[1.0, 2.0]);
    }
}
