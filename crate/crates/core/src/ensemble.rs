use crate::error::{Error, Result};

/// An ordered set of particles in `R^dim`, stored row-major.
///
/// Every stored coordinate is finite. The particle count may be zero (a fully
/// discarded In-and-Out run); the dimension may not.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    data: Vec<f64>,
    dim: usize,
}

impl Ensemble {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ensemble dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate in particle {}",
                pos / dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    /// `n` copies of `point`.
    pub fn filled(point: &[f64], n: usize) -> Result<Self> {
        let data = point
            .iter()
            .copied()
            .cycle()
            .take(n * point.len())
            .collect();
        Self::from_flat(data, point.len())
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::from_flat(Vec::new(), dim)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Concatenates ensembles of a common dimension.
    pub fn concat<'a, I>(parts: I, dim: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Ensemble>,
    {
        let mut data = Vec::new();
        for part in parts {
            if part.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: part.dim,
                });
            }
            data.extend_from_slice(&part.data);
        }
        Ok(Self { data, dim })
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Per-coordinate unbiased sample variance.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let denom = (self.len().max(2) - 1) as f64;
        let mut var = vec![0.0; self.dim];
        for row in self.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= denom);
        var
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                actual: self.dim,
            })
        }
    }

    /// Builds from rows produced by trusted arithmetic; rejects non-finite output.
    pub(crate) fn from_parts(rows: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(data, dim)
    }
}
