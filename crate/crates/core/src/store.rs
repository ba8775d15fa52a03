//! Matrix sample model: one [`SampleTree`] per row, a tree over squared
//! row norms and a tree over squared column norms.
//!
//! The row layer answers entry queries and within-row draws in `O(log n)`.
//! Column draws `P_j = ‖A_{:,j}‖²/‖A‖_F²` go through the column-norm tree.
//! Draws from `D_{A_{:,j}}(i) = A_{ij}²/‖A_{:,j}‖²` walk the column across
//! the row trees, which is `O(m)`; a column-major mirror would make it
//! logarithmic at twice the memory.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sample_tree::SampleTree;

/// Entry updates after which the incrementally maintained column layer is
/// recomputed from the rows.
pub const REBUILD_INTERVAL: u64 = 1_000_000;

pub struct MatrixSampleStore {
    rows: usize,
    cols: usize,
    row_trees: Vec<SampleTree>,
    row_norms: SampleTree,
    col_norms: SampleTree,
    updates_since_rebuild: u64,
    queries: AtomicU64,
}

impl MatrixSampleStore {
    /// Builds the store from dense row-major `entries`.
    pub fn from_row_major(entries: &[f64], rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let row_trees = entries
            .chunks_exact(cols)
            .map(SampleTree::new)
            .collect::<Result<Vec<_>>>()?;
        Self::from_row_trees(row_trees, cols)
    }

    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        Self::from_row_major(a.data(), a.rows(), a.cols())
    }

    /// Builds from 0-based `(row, col, value)` triplets; repeated coordinates
    /// are summed. Rows are densified internally.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let mut dense = vec![0.0; rows * cols];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            dense[i * cols + j] += v;
        }
        Self::from_row_major(&dense, rows, cols)
    }

    fn from_row_trees(row_trees: Vec<SampleTree>, cols: usize) -> Result<Self> {
        let row_weights: Vec<f64> = row_trees.iter().map(SampleTree::sq_norm).collect();
        let row_norms = SampleTree::from_weights(&row_weights)?;
        let col_norms = SampleTree::from_weights(&column_masses(&row_trees, cols))?;
        Ok(Self {
            rows: row_trees.len(),
            cols,
            row_trees,
            row_norms,
            col_norms,
            updates_since_rebuild: 0,
            queries: AtomicU64::new(0),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry `A[i, j]`; counts one query. Panics when out of range.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.count(1);
        self.row_trees[i].value(j)
    }

    /// Checked variant of [`entry`](Self::entry).
    pub fn query(&self, i: usize, j: usize) -> Result<f64> {
        self.check_row(i)?;
        self.check_col(j)?;
        Ok(self.entry(i, j))
    }

    pub fn row_tree(&self, i: usize) -> &SampleTree {
        &self.row_trees[i]
    }

    pub fn sq_frobenius(&self) -> f64 {
        self.row_norms.sq_norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sq_frobenius().sqrt()
    }

    pub fn row_sq_norm(&self, i: usize) -> f64 {
        self.row_norms.mass(i)
    }

    pub fn col_sq_norm(&self, j: usize) -> f64 {
        self.col_norms.mass(j)
    }

    /// Total mass of the column-norm layer; equals `‖A‖_F²` up to rounding.
    pub fn col_layer_sq_norm(&self) -> f64 {
        self.col_norms.sq_norm()
    }

    /// `P_j`, the probability of drawing column `j`.
    pub fn column_probability(&self, j: usize) -> f64 {
        self.col_norms.mass(j) / self.col_norms.sq_norm()
    }

    /// Draws a column index with probability `P_j`.
    pub fn sample_column<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.count(1);
        self.col_norms.sample(rng).map_err(|_| Error::ZeroMatrix)
    }

    /// Draws a row index with probability `‖A_{i,:}‖²/‖A‖_F²`.
    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.count(1);
        self.row_norms.sample(rng).map_err(|_| Error::ZeroMatrix)
    }

    /// Draws a column index within row `i` from `D_{A_{i,:}}`.
    pub fn sample_in_row<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize> {
        self.check_row(i)?;
        self.count(1);
        self.row_trees[i].sample(rng)
    }

    /// Draws a row index within column `j` from `D_{A_{:,j}}` by a prefix
    /// walk over the column. Every visited entry counts as a query.
    pub fn sample_row_given_column<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<usize> {
        self.check_col(j)?;
        let total = self.col_norms.mass(j);
        if total <= 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_nonzero = None;
        let mut visited = 0;
        for (i, tree) in self.row_trees.iter().enumerate() {
            visited += 1;
            let mass = tree.mass(j);
            if mass > 0.0 {
                acc += mass;
                last_nonzero = Some(i);
                if target < acc {
                    break;
                }
            }
        }
        self.count(visited);
        // Rounding can leave `target` just above the accumulated sum.
        last_nonzero.ok_or(Error::ZeroColumn(j))
    }

    /// Sets `A[i, j] = value`, keeping all three layers consistent.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        self.check_row(i)?;
        self.check_col(j)?;
        let old_mass = self.row_trees[i].mass(j);
        self.row_trees[i].update(j, value)?;
        self.row_norms.set_weight(i, self.row_trees[i].sq_norm())?;
        let col = (self.col_norms.mass(j) - old_mass + value * value).max(0.0);
        self.col_norms.set_weight(j, col)?;
        self.updates_since_rebuild += 1;
        if self.updates_since_rebuild >= REBUILD_INTERVAL {
            self.rebuild();
        }
        Ok(())
    }

    /// Recomputes the norm layers from the row trees.
    pub fn rebuild(&mut self) {
        let row_weights: Vec<f64> = self.row_trees.iter().map(SampleTree::sq_norm).collect();
        self.row_norms = SampleTree::from_weights(&row_weights).expect("row norms are finite");
        self.col_norms =
            SampleTree::from_weights(&column_masses(&self.row_trees, self.cols)).expect("column norms are finite");
        self.updates_since_rebuild = 0;
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let data: Vec<f64> = self.row_trees.iter().flat_map(|t| t.values().iter().copied()).collect();
        DenseMatrix::new(self.rows, self.cols, data).expect("store entries are finite")
    }

    /// Entry queries and draws served since construction or the last reset.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_query_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    #[inline]
    fn count(&self, n: u64) {
        self.queries.fetch_add(n, Ordering::Relaxed);
    }

    fn check_row(&self, i: usize) -> Result<()> {
        if i < self.rows {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.rows,
            })
        }
    }

    fn check_col(&self, j: usize) -> Result<()> {
        if j < self.cols {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: j,
                len: self.cols,
            })
        }
    }
}

fn column_masses(row_trees: &[SampleTree], cols: usize) -> Vec<f64> {
    let mut masses = vec![0.0; cols];
    for t in row_trees {
        for (acc, j) in masses.iter_mut().zip(0..cols) {
            *acc += t.mass(j);
        }
    }
    masses
}

impl std::fmt::Debug for MatrixSampleStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixSampleStore")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("sq_frobenius", &self.sq_frobenius())
            .finish()
    }
}
