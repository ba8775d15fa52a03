//! Binary sampling tree over a real vector.
//!
//! Leaves hold the squared magnitudes `v_i²` next to the signed entry, and
//! every internal node holds the sum of its two children, so the root is
//! `‖v‖²`. Query and update are `O(log n)`, and a draw from `D_v(i) = v_i²/‖v‖²`
//! descends from the root comparing one uniform against left-child mass.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};

pub struct SampleTree {
    len: usize,
    leaves: usize,
    /// Heap layout: node 1 is the root, children of `k` are `2k` and `2k + 1`,
    /// leaf `i` sits at `leaves + i`. Index 0 is unused.
    nodes: Vec<f64>,
    values: Vec<f64>,
    touches: AtomicU64,
}

impl SampleTree {
    /// Builds the tree over `values`.
    pub fn new(values: &[f64]) -> Result<Self> {
        check_input(values)?;
        let masses: Vec<f64> = values.iter().map(|v| v * v).collect();
        Ok(Self::assemble(values.to_vec(), &masses))
    }

    /// Builds a tree whose leaf masses are exactly `weights`; the stored
    /// entries are `√w`. Used for the row- and column-norm layers.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        check_input(weights)?;
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("negative weight"));
        }
        let values: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        Ok(Self::assemble(values, weights))
    }

    fn assemble(values: Vec<f64>, masses: &[f64]) -> Self {
        let len = values.len();
        let leaves = len.next_power_of_two();
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + len].copy_from_slice(masses);
        let mut tree = Self {
            len,
            leaves,
            nodes,
            values,
            touches: AtomicU64::new(0),
        };
        tree.rebuild_internal();
        tree
    }

    fn rebuild_internal(&mut self) {
        for k in (1..self.leaves).rev() {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of leaves, the smallest power of two `>= len`.
    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Tree depth `⌈log₂ n⌉`.
    pub fn depth(&self) -> u32 {
        self.leaves.trailing_zeros()
    }

    #[inline]
    pub fn sq_norm(&self) -> f64 {
        self.nodes[1]
    }

    pub fn norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    /// Signed entry `i`.
    pub fn query(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        self.touch(1);
        Ok(self.values[i])
    }

    /// Signed entry `i` without bounds reporting; panics when out of range.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Leaf mass (`v_i²`, or the raw weight for weight trees).
    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw node array in heap order (index 0 unused).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn update(&mut self, i: usize, value: f64) -> Result<()> {
        self.check_index(i)?;
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        self.values[i] = value;
        self.set_leaf_mass(i, value * value);
        Ok(())
    }

    /// Replaces the mass of leaf `i` in a weight tree.
    pub fn set_weight(&mut self, i: usize, weight: f64) -> Result<()> {
        self.check_index(i)?;
        if !weight.is_finite() {
            return Err(Error::NonFinite);
        }
        if weight < 0.0 {
            return Err(Error::invalid("negative weight"));
        }
        self.values[i] = weight.sqrt();
        self.set_leaf_mass(i, weight);
        Ok(())
    }

    fn set_leaf_mass(&mut self, i: usize, mass: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = mass;
        let mut writes = 1;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            writes += 1;
        }
        self.touch(writes);
    }

    /// Draws `i` with probability `mass(i) / sq_norm()`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let total = self.nodes[1];
        if total <= 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut u = rng.random::<f64>() * total;
        let mut k = 1;
        let mut reads = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            let right = self.nodes[2 * k + 1];
            reads += 2;
            // Never step into a zero-mass subtree, even when rounding
            // pushes `u` past the left mass.
            let go_left = if left <= 0.0 {
                false
            } else if right <= 0.0 {
                true
            } else {
                u < left
            };
            if go_left {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        self.touch(reads);
        Ok(k - self.leaves)
    }

    /// Node reads and writes performed since construction or the last reset.
    pub fn touches(&self) -> u64 {
        self.touches.load(Ordering::Relaxed)
    }

    pub fn reset_touches(&self) {
        self.touches.store(0, Ordering::Relaxed);
    }

    #[inline]
    fn touch(&self, n: u64) {
        self.touches.fetch_add(n, Ordering::Relaxed);
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len,
            })
        } else {
            Ok(())
        }
    }
}

impl Clone for SampleTree {
    fn clone(&self) -> Self {
        Self {
            len: self.len,
            leaves: self.leaves,
            nodes: self.nodes.clone(),
            values: self.values.clone(),
            touches: AtomicU64::new(self.touches()),
        }
    }
}

impl std::fmt::Debug for SampleTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampleTree")
            .field("len", &self.len)
            .field("sq_norm", &self.sq_norm())
            .finish()
    }
}

fn check_input(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyVector);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}
