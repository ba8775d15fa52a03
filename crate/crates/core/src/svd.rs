//! One-sided (Hestenes) Jacobi SVD for small dense matrices.
//!
//! Column pairs are swept in fixed cyclic order `(0,1), (0,2), …, (n-2,n-1)`
//! and rotated until every pair is orthogonal to `ROTATION_TOL` relative to
//! the product of their norms, or `MAX_SWEEPS` sweeps have run. The method
//! never forms `MᵀM`, so small singular values keep their relative accuracy.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const ROTATION_TOL: f64 = 1e-14;
pub const MAX_SWEEPS: usize = 60;
/// Default cut-off, relative to `σ₁`, below which singular values are dropped.
pub const DEFAULT_REL_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Left singular vectors, `rows × r` with `r = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Singular values, non-increasing.
    pub sigma: Vec<f64>,
    /// Right singular vectors, `cols × r`.
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank_above(&self, rel_threshold: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().take_while(|&&s| s > rel_threshold * top).count()
    }
}

/// Full thin SVD `M = U Σ Vᵀ`. Deterministic for a fixed input.
pub fn svd_dense(m: &DenseMatrix) -> Result<SvdResult> {
    jacobi_svd(m, true)
}

/// SVD without completing the left basis for exactly-zero singular values.
/// The columns of `u` belonging to zero singular values are left at zero.
pub(crate) fn svd_partial(m: &DenseMatrix) -> Result<SvdResult> {
    jacobi_svd(m, false)
}

fn jacobi_svd(m: &DenseMatrix, complete: bool) -> Result<SvdResult> {
    if m.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.rows() >= m.cols() {
        tall_svd(m, complete)
    } else {
        let t = tall_svd(&m.transpose(), complete)?;
        Ok(SvdResult {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

fn tall_svd(m: &DenseMatrix, complete: bool) -> Result<SvdResult> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut norms = vec![0.0; cols];
    for _ in 0..MAX_SWEEPS {
        for (n, w) in norms.iter_mut().zip(&work) {
            *n = dot(w, w);
        }
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in p + 1..cols {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&work[p], &work[q]);
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut work, p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut vcols, p, q);
                rotate(vp, vq, c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma_raw: Vec<f64> = work.iter().map(|w| dot(w, w).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    // Stable sort keeps the lower original index first among equal values.
    order.sort_by(|&a, &b| sigma_raw[b].total_cmp(&sigma_raw[a]));

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = sigma_raw[j];
        let col: Vec<f64> = if s > 0.0 {
            work[j].iter().map(|x| x / s).collect()
        } else {
            vec![0.0; rows]
        };
        if s > 0.0 && col.iter().all(|x| x.is_finite()) {
            ucols.push(col);
        } else {
            missing.push(slot);
            ucols.push(vec![0.0; rows]);
        }
    }
    if complete {
        for &slot in &missing {
            ucols[slot] = complement_vector(&ucols, slot, rows);
        }
    }

    let sigma: Vec<f64> = order.iter().map(|&j| sigma_raw[j]).collect();
    let u = DenseMatrix::from_fn(rows, cols, |i, k| ucols[k][i]);
    let v = DenseMatrix::from_fn(cols, cols, |i, k| vcols[order[k]][i]);
    Ok(SvdResult { u, sigma, v })
}

/// Unit vector orthogonal to every filled column of `basis`.
/// Unfilled columns are still zero and drop out of the projections.
fn complement_vector(basis: &[Vec<f64>], slot: usize, rows: usize) -> Vec<f64> {
    let mut best = vec![0.0; rows];
    let mut best_norm = -1.0;
    for e in 0..rows {
        let mut cand = vec![0.0; rows];
        cand[e] = 1.0;
        for _ in 0..2 {
            for (k, b) in basis.iter().enumerate() {
                if k == slot {
                    continue;
                }
                let d = dot(&cand, b);
                if d != 0.0 {
                    cand.iter_mut().zip(b).for_each(|(c, x)| *c -= d * x);
                }
            }
        }
        let n = dot(&cand, &cand).sqrt();
        if n > best_norm {
            best_norm = n;
            best = cand;
        }
        if n > 0.5 {
            break;
        }
    }
    best.iter_mut().for_each(|x| *x /= best_norm);
    best
}

/// Keeps the leading `min(k, #{σ_i > rel_threshold·σ₁})` triplets.
pub fn truncate_top_k(s: SvdResult, k: usize, rel_threshold: f64) -> Result<SvdResult> {
    let available = s.sigma.len();
    if k == 0 || k > available {
        return Err(Error::invalid(format!("k = {k} outside 1..={available}")));
    }
    let keep = s.rank_above(rel_threshold).min(k);
    if keep == 0 {
        return Err(Error::NumericallyRankZero);
    }
    Ok(SvdResult {
        u: s.u.leading_columns(keep),
        sigma: s.sigma[..keep].to_vec(),
        v: s.v.leading_columns(keep),
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

fn pair_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (lo, hi) = v.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}
