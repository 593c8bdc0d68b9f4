//! Time grids and matrices of sampled paths.

use crate::error::{Error, Result};

/// Row-major `n_paths × n_times` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    n_times: usize,
    data: Vec<f64>,
}

impl PathMatrix {
    pub fn zeros(n_paths: usize, n_times: usize) -> Self {
        Self { n_times, data: vec![0.0; n_paths * n_times] }
    }

    pub fn from_rows<I>(n_times: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_times {
                return Err(Error::Format(format!("path of length {} on a grid of {n_times} points", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n_times, data })
    }

    pub fn n_paths(&self) -> usize {
        self.data.len().checked_div(self.n_times).unwrap_or(0)
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_times.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_times + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Pointwise difference `self − other`.
    pub fn minus(&self, other: &PathMatrix) -> Result<PathMatrix> {
        if self.n_times != other.n_times || self.data.len() != other.data.len() {
            return Err(Error::Format("path matrices differ in shape".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { n_times: self.n_times, data })
    }
}

/// Sampled paths of one or more observables on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub grid: Vec<f64>,
    pub observables: Vec<(String, PathMatrix)>,
    /// Key/value provenance echoed into every output file.
    pub snapshot: Vec<(String, String)>,
}

impl TrajectoryEnsemble {
    pub fn new(grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid[0] != 0.0 {
            return Err(Error::Format("time grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("time grid must be strictly increasing".into()));
        }
        Ok(Self { grid, observables: Vec::new(), snapshot: Vec::new() })
    }

    pub fn with(mut self, label: impl Into<String>, paths: PathMatrix) -> Result<Self> {
        if paths.n_times() != self.grid.len() {
            return Err(Error::Format("paths do not match the grid".into()));
        }
        self.observables.push((label.into(), paths));
        Ok(self)
    }

    pub fn note(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.snapshot.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, label: &str) -> Option<&PathMatrix> {
        self.observables.iter().find(|(l, _)| l == label).map(|(_, p)| p)
    }

    /// The first observable; ensembles built by the samplers always have one.
    pub fn primary(&self) -> &PathMatrix {
        &self.observables[0].1
    }

    pub fn n_paths(&self) -> usize {
        self.observables.first().map_or(0, |(_, p)| p.n_paths())
    }

    /// Index of the grid point equal to `t` up to rounding.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.grid.last().copied().unwrap_or(1.0).max(1.0);
        self.grid.iter().position(|&g| (g - t).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rules() {
        assert!(TrajectoryEnsemble::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TrajectoryEnsemble::new(vec![0.5, 1.0]).is_err());
        let e = TrajectoryEnsemble::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(e.time_index(0.5), Some(1));
        assert!(e.with("X", PathMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn matrix_access() {
        let m = PathMatrix::from_rows(2, [[0.0, 1.0], [0.0, 3.0]]).unwrap();
        assert_eq!(m.n_paths(), 2);
        assert_eq!(m.column(1), vec![1.0, 3.0]);
        assert_eq!(m.get(1, 1), 3.0);
        let d = m.minus(&m).unwrap();
        assert!(d.as_slice().iter().all(|&x| x == 0.0));
    }
}
