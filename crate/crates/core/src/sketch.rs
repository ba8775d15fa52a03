//! Two-stage column/row subsampling and the succinct description of the
//! approximate left singular matrix `Û = S V Σ⁻¹`.
//!
//! `S` (`m × p`) holds the drawn columns `A_{:,j_t}/√(p P_{j_t})` and `W`
//! (`p × p`) the drawn rows `S_{i_t,:}/√(p P'_{i_t})`. Neither is stored.
//! Draws are kept as a multiset of distinct indices with multiplicities:
//! duplicated columns of `S` are identical, and so are duplicated rows of
//! `W`, hence `W = Q_r · C · Q_cᵀ` where `Q_r`, `Q_c` are normalised
//! indicator matrices and `C` is the small core over distinct indices with
//! entries scaled by `√(count)`. The SVD of `C` is therefore exactly the SVD
//! of `W`, and a right singular vector of `W` is constant over the positions
//! sharing a column index. This keeps the sketch size at the number of
//! distinct draws, which is what makes the (very large) theoretical `p`
//! usable at all.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::store::MatrixSampleStore;
use crate::svd::{self, DEFAULT_REL_THRESHOLD};

/// Algorithm parameters: the user-supplied accuracy targets plus every
/// derived quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    /// Condition number `‖A‖/σ_min(A)` over nonzero singular values.
    pub kappa: f64,
    pub spectral_norm: f64,
    pub frob_norm: f64,
    pub omega: f64,
    pub theta: f64,
    /// Sample count actually used.
    pub p: u64,
    /// `⌈1/(θ²δ)⌉` as a float; may exceed any integer type.
    pub theoretical_p: f64,
    pub xi: f64,
    pub p_override: Option<u64>,
    /// Precision used by the sampled inner-product estimator in place of `xi`.
    pub xi_override: Option<f64>,
}

/// Derives `ω`, `θ` (upper endpoint), `p` and `ξ`.
pub fn compute_params(
    epsilon: f64,
    delta: f64,
    k: usize,
    kappa: f64,
    spectral_norm: f64,
    frob_norm: f64,
    p_override: Option<u64>,
) -> Result<Params> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} not in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta = {delta} not in (0, 1)")));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("kappa = {kappa} must be >= 1")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if !(spectral_norm > 0.0 && spectral_norm.is_finite()) || !(frob_norm > 0.0 && frob_norm.is_finite()) {
        return Err(Error::invalid("norms must be positive and finite"));
    }
    if p_override == Some(0) {
        return Err(Error::invalid("p must be positive"));
    }

    let (s2, f2) = (spectral_norm * spectral_norm, frob_norm * frob_norm);
    let kf = k as f64;
    let omega = s2 * epsilon * epsilon / (196.0 * (frob_norm * kappa + spectral_norm).powi(2));
    let theta = omega * s2 / ((4.0 * kf + 3.0 + 2.0 * omega) * kappa * kappa * f2);
    let theoretical_p = (1.0 / (theta * theta * delta)).ceil();
    let xi = ((2.0 * epsilon * s2 / (kappa * kappa * (4.0 * kf + 5.0) * f2) + 1.0).sqrt() - 1.0) / kf.sqrt();

    let p = match p_override {
        Some(p) => p,
        None => theoretical_p_to_int(theoretical_p)?,
    };
    Ok(Params {
        epsilon,
        delta,
        k,
        kappa,
        spectral_norm,
        frob_norm,
        omega,
        theta,
        p,
        theoretical_p,
        xi,
        p_override,
        xi_override: None,
    })
}

fn theoretical_p_to_int(p: f64) -> Result<u64> {
    // 2^64 is exactly representable; anything at or above it does not fit.
    if p.is_finite() && p < 18_446_744_073_709_551_616.0 {
        Ok(p as u64)
    } else {
        Err(Error::invalid(format!(
            "theoretical p = {p:e} does not fit in 64 bits; supply a practical p"
        )))
    }
}

impl Params {
    /// True when `p` was overridden by a practical value.
    pub fn is_practical(&self) -> bool {
        self.p_override.is_some()
    }

    /// Upper endpoint of the admissible `θ` interval.
    pub fn theta_max(&self) -> f64 {
        let (s2, f2) = (self.spectral_norm.powi(2), self.frob_norm.powi(2));
        self.omega * s2 / ((4.0 * self.k as f64 + 3.0 + 2.0 * self.omega) * self.kappa.powi(2) * f2)
    }

    /// Replaces `θ` by a smaller admissible value; `p` follows unless overridden.
    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= self.theta_max() * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "theta = {theta} outside (0, {}]",
                self.theta_max()
            )));
        }
        self.theta = theta;
        self.theoretical_p = (1.0 / (theta * theta * self.delta)).ceil();
        if self.p_override.is_none() {
            self.p = theoretical_p_to_int(self.theoretical_p)?;
        }
        Ok(self)
    }

    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::invalid(format!("xi = {xi} must be positive")));
        }
        self.xi_override = Some(xi);
        Ok(self)
    }

    /// Precision for the sampled inner-product estimator.
    pub fn effective_xi(&self) -> f64 {
        self.xi_override.unwrap_or(self.xi)
    }

    /// Per-coordinate failure probability `η = 1 − (1−δ)^{1/k}`.
    pub fn eta(&self) -> f64 {
        1.0 - (1.0 - self.delta).powf(1.0 / self.k as f64)
    }

    /// Orthonormality tolerance `β = ω/(4k+3)` for `‖ÛᵀÛ − I‖_F`.
    pub fn beta(&self) -> f64 {
        self.omega / (4.0 * self.k as f64 + 3.0)
    }

    /// Lower bound `√((4k+3)/(4k+3+2ω))·‖A‖/κ` expected for `σ_k(W)`.
    pub fn sigma_min_bound(&self) -> f64 {
        let kf = self.k as f64;
        ((4.0 * kf + 3.0) / (4.0 * kf + 3.0 + 2.0 * self.omega)).sqrt() * self.spectral_norm / self.kappa
    }
}

#[derive(Clone, Debug)]
pub struct SketchConfig {
    /// Singular values at or below `rel_threshold·σ₁(W)` are dropped.
    pub rel_threshold: f64,
    /// Up to this many draws are made one at a time through the sampling
    /// trees; larger `p` draws the multiplicities from the equivalent
    /// multinomial law.
    pub iid_draw_limit: u64,
    /// Largest `p` for which [`build_w`] materialises `W`.
    pub dense_cap: usize,
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self {
            rel_threshold: DEFAULT_REL_THRESHOLD,
            iid_draw_limit: 1_000_000,
            dense_cap: 2000,
        }
    }
}

/// A distinct drawn index, its multiplicity among the `p` draws and its
/// exact sampling probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledIndex {
    pub index: usize,
    pub count: u64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SketchDescription {
    pub p: u64,
    /// Distinct drawn columns `j_t` with `P_{j_t}`.
    pub cols: Vec<SampledIndex>,
    /// Distinct drawn rows `i_t` with `P'_{i_t}`.
    pub rows: Vec<SampledIndex>,
    /// `cols.len() × k`; row `b` is the common row of `V` at every draw
    /// position whose column is `cols[b]`.
    pub v: DenseMatrix,
    /// Top-`k` singular values of `W`, descending and positive.
    pub sigma: Vec<f64>,
    pub frob_norm: f64,
}

impl SketchDescription {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// `1/√(p P_{j_b})`, the scale applied to column slot `b`.
    #[inline]
    pub fn col_scale(&self, b: usize) -> f64 {
        col_scale(self.p, &self.cols[b])
    }

    /// The full `p × k` matrix `V`, positions ordered slot by slot.
    pub fn v_expanded(&self) -> Result<DenseMatrix> {
        let positions = expand_slots(&self.cols, usize::MAX)?;
        let k = self.k();
        Ok(DenseMatrix::from_fn(positions.len(), k, |t, j| {
            self.v[(positions[t], j)]
        }))
    }
}

#[inline]
fn col_scale(p: u64, c: &SampledIndex) -> f64 {
    1.0 / (p as f64 * c.prob).sqrt()
}

/// Draws `p` column indices i.i.d. from `P_j`.
pub fn sample_columns<R: Rng + ?Sized>(store: &MatrixSampleStore, p: u64, rng: &mut R) -> Result<Vec<SampledIndex>> {
    sample_columns_with(store, p, SketchConfig::default().iid_draw_limit, rng)
}

pub fn sample_columns_with<R: Rng + ?Sized>(
    store: &MatrixSampleStore,
    p: u64,
    iid_draw_limit: u64,
    rng: &mut R,
) -> Result<Vec<SampledIndex>> {
    if store.sq_frobenius() <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if p == 0 {
        return Err(Error::invalid("p must be positive"));
    }
    if p <= iid_draw_limit {
        let mut tally = Tally::default();
        for _ in 0..p {
            tally.add(store.sample_column(rng)?);
        }
        Ok(tally.finish(|j| store.column_probability(j)))
    } else {
        let probs: Vec<f64> = (0..store.cols()).map(|j| store.column_probability(j)).collect();
        Ok(multinomial(p, &probs, rng)?
            .into_iter()
            .map(|(index, count)| SampledIndex {
                index,
                count,
                prob: probs[index],
            })
            .collect())
    }
}

/// `‖S_{i,:}‖²` for the column multiset `cols`.
pub fn s_row_sq_norm(store: &MatrixSampleStore, cols: &[SampledIndex], p: u64, i: usize) -> f64 {
    cols.iter()
        .map(|c| {
            let a = store.entry(i, c.index);
            c.count as f64 * a * a / (p as f64 * c.prob)
        })
        .sum()
}

/// `‖S‖_F²` from the column multiset; equals `‖A‖_F²` up to rounding.
pub fn s_sq_frobenius(store: &MatrixSampleStore, cols: &[SampledIndex], p: u64) -> f64 {
    cols.iter()
        .map(|c| c.count as f64 * store.col_sq_norm(c.index) / (p as f64 * c.prob))
        .sum()
}

/// Draws `p` row indices i.i.d. from the mixture `P'_i = Σ_t D_{A_{:,j_t}}(i)/p`:
/// a uniform draw position `t`, then a row from `D_{A_{:,j_t}}`. The recorded
/// probability of each row is `‖S_{i,:}‖²/‖S‖_F²`.
pub fn sample_rows<R: Rng + ?Sized>(
    store: &MatrixSampleStore,
    cols: &[SampledIndex],
    p: u64,
    rng: &mut R,
) -> Result<Vec<SampledIndex>> {
    sample_rows_with(store, cols, p, SketchConfig::default().iid_draw_limit, rng)
}

pub fn sample_rows_with<R: Rng + ?Sized>(
    store: &MatrixSampleStore,
    cols: &[SampledIndex],
    p: u64,
    iid_draw_limit: u64,
    rng: &mut R,
) -> Result<Vec<SampledIndex>> {
    if cols.iter().map(|c| c.count).sum::<u64>() != p {
        return Err(Error::invalid("column multiplicities do not sum to p"));
    }
    if let Some(c) = cols.iter().find(|c| store.col_sq_norm(c.index) <= 0.0) {
        return Err(Error::ZeroColumn(c.index));
    }
    let s_frob2 = s_sq_frobenius(store, cols, p);
    if p <= iid_draw_limit {
        let mut cumulative = Vec::with_capacity(cols.len());
        let mut acc = 0u64;
        for c in cols {
            acc += c.count;
            cumulative.push(acc);
        }
        let mut tally = Tally::default();
        for _ in 0..p {
            let t = rng.random_range(0..p);
            let slot = cumulative.partition_point(|&c| c <= t);
            tally.add(store.sample_row_given_column(cols[slot].index, rng)?);
        }
        Ok(tally.finish(|i| s_row_sq_norm(store, cols, p, i) / s_frob2))
    } else {
        let probs: Vec<f64> = (0..store.rows())
            .map(|i| s_row_sq_norm(store, cols, p, i) / s_frob2)
            .collect();
        Ok(multinomial(p, &probs, rng)?
            .into_iter()
            .map(|(index, count)| SampledIndex {
                index,
                count,
                prob: probs[index],
            })
            .collect())
    }
}

/// `S[i, t] = A[i, j_t]/√(p P_{j_t})` for any draw position `t` in column slot `slot`.
pub fn s_entry(store: &MatrixSampleStore, sketch: &SketchDescription, i: usize, slot: usize) -> Result<f64> {
    let c = sketch.cols.get(slot).ok_or(Error::IndexOutOfRange {
        index: slot,
        len: sketch.cols.len(),
    })?;
    Ok(store.query(i, c.index)? * sketch.col_scale(slot))
}

/// Materialises `W` (`p × p`), positions ordered slot by slot.
pub fn build_w(store: &MatrixSampleStore, sketch: &SketchDescription) -> Result<DenseMatrix> {
    build_w_with(store, sketch, SketchConfig::default().dense_cap)
}

pub fn build_w_with(store: &MatrixSampleStore, sketch: &SketchDescription, dense_cap: usize) -> Result<DenseMatrix> {
    let col_pos = expand_slots(&sketch.cols, dense_cap)?;
    let row_pos = expand_slots(&sketch.rows, dense_cap)?;
    let p = sketch.p as f64;
    let mut w = DenseMatrix::zeros(row_pos.len(), col_pos.len());
    for (t, &a) in row_pos.iter().enumerate() {
        let r = &sketch.rows[a];
        if r.prob <= 0.0 {
            return Err(Error::invalid(format!("drawn row {} has zero probability", r.index)));
        }
        let row_scale = 1.0 / (p * r.prob).sqrt();
        for (u, &b) in col_pos.iter().enumerate() {
            w[(t, u)] = s_entry(store, sketch, r.index, b)? * row_scale;
        }
    }
    Ok(w)
}

/// Materialises `S` (`m × p`). Intended for diagnostics and tests.
pub fn build_s(store: &MatrixSampleStore, sketch: &SketchDescription, dense_cap: usize) -> Result<DenseMatrix> {
    let col_pos = expand_slots(&sketch.cols, dense_cap)?;
    let mut s = DenseMatrix::zeros(store.rows(), col_pos.len());
    for i in 0..store.rows() {
        for (u, &b) in col_pos.iter().enumerate() {
            s[(i, u)] = s_entry(store, sketch, i, b)?;
        }
    }
    Ok(s)
}

/// Collapsed core `C` (`#rows × #cols`) with
/// `C[a, b] = √(r_a c_b) · S[i_a, j_b] / √(p P'_{i_a})`.
pub(crate) fn core_matrix(
    store: &MatrixSampleStore,
    cols: &[SampledIndex],
    rows: &[SampledIndex],
    p: u64,
) -> Result<DenseMatrix> {
    let pf = p as f64;
    let col_factor: Vec<f64> = cols.iter().map(|c| (c.count as f64).sqrt() * col_scale(p, c)).collect();
    let mut core = DenseMatrix::zeros(rows.len(), cols.len());
    for (a, r) in rows.iter().enumerate() {
        if r.prob <= 0.0 {
            return Err(Error::invalid(format!("drawn row {} has zero probability", r.index)));
        }
        let row_factor = (r.count as f64 / (pf * r.prob)).sqrt();
        for (b, c) in cols.iter().enumerate() {
            core[(a, b)] = row_factor * col_factor[b] * store.entry(r.index, c.index);
        }
    }
    Ok(core)
}

/// Runs the full subsampling pipeline with default configuration.
pub fn qisvd<R: Rng + ?Sized>(store: &MatrixSampleStore, params: &Params, rng: &mut R) -> Result<SketchDescription> {
    qisvd_with(store, params, &SketchConfig::default(), rng)
}

pub fn qisvd_with<R: Rng + ?Sized>(
    store: &MatrixSampleStore,
    params: &Params,
    config: &SketchConfig,
    rng: &mut R,
) -> Result<SketchDescription> {
    let p = params.p;
    let cols = sample_columns_with(store, p, config.iid_draw_limit, rng)?;
    let rows = sample_rows_with(store, &cols, p, config.iid_draw_limit, rng)?;
    let core = core_matrix(store, &cols, &rows, p)?;
    let full = svd::svd_partial(&core)?;
    let k = params.k.min(full.sigma.len());
    let top = svd::truncate_top_k(full, k, config.rel_threshold)?;
    let k = top.sigma.len();
    let mut v = DenseMatrix::zeros(cols.len(), k);
    for (b, c) in cols.iter().enumerate() {
        let inv = 1.0 / (c.count as f64).sqrt();
        for j in 0..k {
            v[(b, j)] = top.v[(b, j)] * inv;
        }
    }
    Ok(SketchDescription {
        p,
        cols,
        rows,
        v,
        sigma: top.sigma,
        frob_norm: store.frobenius_norm(),
    })
}

/// Slot index of every draw position, slot by slot.
fn expand_slots(slots: &[SampledIndex], cap: usize) -> Result<Vec<usize>> {
    let total: u64 = slots.iter().map(|s| s.count).sum();
    if total > cap as u64 {
        return Err(Error::invalid(format!("p = {total} exceeds the dense cap {cap}")));
    }
    Ok(slots
        .iter()
        .enumerate()
        .flat_map(|(b, s)| std::iter::repeat_n(b, s.count as usize))
        .collect())
}

/// Draw counts keyed by index, in order of first appearance.
#[derive(Default)]
struct Tally {
    order: Vec<usize>,
    counts: HashMap<usize, u64>,
}

impl Tally {
    fn add(&mut self, index: usize) {
        let c = self.counts.entry(index).or_insert(0);
        if *c == 0 {
            self.order.push(index);
        }
        *c += 1;
    }

    fn finish(self, prob: impl Fn(usize) -> f64) -> Vec<SampledIndex> {
        self.order
            .into_iter()
            .map(|index| SampledIndex {
                index,
                count: self.counts[&index],
                prob: prob(index),
            })
            .collect()
    }
}

/// Multinomial counts by sequential conditional binomials. Returns only
/// categories with a nonzero count, in index order.
fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<(usize, u64)>> {
    let last = probs.iter().rposition(|&q| q > 0.0).ok_or(Error::ZeroMatrix)?;
    let mut remaining = n;
    let mut mass_left: f64 = probs.iter().filter(|&&q| q > 0.0).sum();
    let mut out = Vec::new();
    for (i, &q) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if q <= 0.0 {
            continue;
        }
        let count = if i == last {
            remaining
        } else {
            let frac = (q / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, frac)
                .map_err(|e| Error::invalid(format!("binomial: {e}")))?
                .sample(rng)
        };
        mass_left -= q;
        remaining -= count;
        if count > 0 {
            out.push((i, count));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal};
    use crate::sample_tree::tests::{chi_square, chi_square_99};

    fn store(rows: &[Vec<f64>]) -> MatrixSampleStore {
        MatrixSampleStore::from_dense(&DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng))
    }

    fn practical(store: &MatrixSampleStore, k: usize, p: u64) -> Params {
        let f = store.frobenius_norm();
        compute_params(0.5, 0.1, k, 1.0, f, f, Some(p)).unwrap()
    }

    /// Rank-one `σ u vᵀ` with unit `u`, `v`.
    fn rank_one(m: usize, n: usize, sigma: f64, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let mut rng = seeded(seed);
        let mut u: Vec<f64> = (0..m).map(|_| standard_normal(&mut rng)).collect();
        let mut v: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        v.iter_mut().for_each(|x| *x /= nv);
        (DenseMatrix::from_fn(m, n, |i, j| sigma * u[i] * v[j]), u)
    }

    #[test]
    fn params_reference_values() {
        let p = compute_params(0.5, 0.1, 1, 1.0, 1.0, 1.0, None).unwrap();
        assert!((p.omega - 1.0 / 3136.0).abs() < 1e-18);
        // Independent arithmetic: θ = ω / (7 + 2ω).
        let theta = (1.0 / 3136.0) / (7.0 + 2.0 / 3136.0);
        assert!((p.theta - theta).abs() < 1e-18);
        assert!((p.theta - 4.555e-5).abs() < 1e-8);
        assert!((p.theoretical_p / 4.82e9 - 1.0).abs() < 1e-3);
        assert_eq!(p.p as f64, p.theoretical_p);
        assert!(!p.is_practical());

        let spec = 1.0;
        let frob = 30f64.sqrt();
        let q = compute_params(0.5, 0.1, 20, 10.0, spec, frob, None);
        // Theoretical p overflows here, ξ is still defined.
        let q = q
            .or_else(|_| compute_params(0.5, 0.1, 20, 10.0, spec, frob, Some(1)))
            .unwrap();
        let expected = ((1.0 / 255_000.0 + 1.0f64).sqrt() - 1.0) / 20f64.sqrt();
        assert!((q.xi - expected).abs() < 1e-15);
        assert!((q.xi - 4.39e-7).abs() < 0.01e-7);
    }

    #[test]
    fn p_override_only_touches_p() {
        let a = compute_params(0.5, 0.1, 20, 3.0, 2.0, 5.0, None).unwrap();
        let b = compute_params(0.5, 0.1, 20, 3.0, 2.0, 5.0, Some(60)).unwrap();
        assert_eq!(b.p, 60);
        assert!(b.is_practical());
        assert_eq!((a.omega, a.theta, a.xi), (b.omega, b.theta, b.xi));
        assert!(a.omega > 0.0 && a.omega < 1.0);
    }

    #[test]
    fn params_validation() {
        for (e, d, kappa) in [
            (0.0, 0.1, 1.0),
            (1.0, 0.1, 1.0),
            (0.5, 0.0, 1.0),
            (0.5, 1.0, 1.0),
            (0.5, 0.1, 0.9),
        ] {
            assert!(compute_params(e, d, 2, kappa, 1.0, 1.0, None).is_err());
        }
        assert!(compute_params(0.5, 0.1, 0, 1.0, 1.0, 1.0, None).is_err());
        let p = compute_params(0.5, 0.1, 1, 1.0, 1.0, 1.0, None).unwrap();
        assert!(p.clone().with_theta(p.theta * 2.0).is_err());
        let smaller = p.clone().with_theta(p.theta / 2.0).unwrap();
        assert!(smaller.p > p.p);
    }

    #[test]
    fn column_draws() {
        let s = store(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let cols = sample_columns(&s, 5, &mut seeded(1)).unwrap();
        assert_eq!(
            cols,
            vec![SampledIndex {
                index: 0,
                count: 5,
                prob: 1.0
            }]
        );

        let s = store(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let cols = sample_columns(&s, 10_000, &mut seeded(2)).unwrap();
        let mut counts = [0u64; 2];
        cols.iter().for_each(|c| counts[c.index] = c.count);
        assert!(chi_square(&counts, &[0.5, 0.5]) < chi_square_99(1));

        let s = store(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        for limit in [u64::MAX, 0] {
            let cols = sample_columns_with(&s, 100_000, limit, &mut seeded(3)).unwrap();
            let mut counts = [0u64; 2];
            cols.iter().for_each(|c| counts[c.index] = c.count);
            assert!(chi_square(&counts, &[1.0 / 3.0, 2.0 / 3.0]) < chi_square_99(1));
        }

        let z = store(&[vec![0.0, 0.0]]);
        assert!(matches!(sample_columns(&z, 3, &mut seeded(0)), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn rank_one_row_probabilities_are_u_squared() {
        let (a, u) = rank_one(7, 5, 3.0, 4);
        let s = MatrixSampleStore::from_dense(&a).unwrap();
        let mut rng = seeded(5);
        let cols = sample_columns(&s, 6, &mut rng).unwrap();
        let rows = sample_rows(&s, &cols, 6, &mut rng).unwrap();
        for r in &rows {
            assert!((r.prob - u[r.index] * u[r.index]).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_rows_follow_drawn_column() {
        let s = store(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let cols = vec![SampledIndex {
            index: 0,
            count: 2,
            prob: 0.8,
        }];
        let rows = sample_rows(&s, &cols, 2, &mut seeded(6)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].index, rows[0].count), (0, 2));
        assert!((rows[0].prob - 1.0).abs() < 1e-15);

        let bad = vec![SampledIndex {
            index: 1,
            count: 2,
            prob: 0.0,
        }];
        let z = store(&[vec![1.0, 0.0]]);
        assert!(matches!(
            sample_rows(&z, &bad, 2, &mut seeded(0)),
            Err(Error::ZeroColumn(1))
        ));
    }

    #[test]
    fn mixture_frequencies_match_direct_formula() {
        let a = random(50, 20, 7);
        let s = MatrixSampleStore::from_dense(&a).unwrap();
        let mut rng = seeded(8);
        let cols = sample_columns(&s, 30, &mut rng).unwrap();
        // Direct mixture: P'_i = Σ_t A_{i,j_t}² / (p ‖A_{:,j_t}‖²).
        let direct: Vec<f64> = (0..50)
            .map(|i| {
                cols.iter()
                    .map(|c| {
                        let colsq: f64 = (0..50).map(|r| a[(r, c.index)].powi(2)).sum();
                        c.count as f64 * a[(i, c.index)].powi(2) / (30.0 * colsq)
                    })
                    .sum()
            })
            .collect();
        // Scaling every multiplicity by the same factor leaves P' unchanged
        // and gives ~10⁵ row draws.
        let scale = 3334;
        let scaled: Vec<SampledIndex> = cols
            .iter()
            .map(|c| SampledIndex {
                count: c.count * scale,
                ..*c
            })
            .collect();
        let drawn = sample_rows(&s, &scaled, 30 * scale, &mut rng).unwrap();
        let mut counts = vec![0u64; 50];
        drawn.iter().for_each(|r| counts[r.index] = r.count);
        assert!(chi_square(&counts, &direct) < chi_square_99(49));
        let rows = sample_rows(&s, &cols, 30, &mut rng).unwrap();
        for r in &rows {
            assert!((r.prob - direct[r.index]).abs() < 1e-12);
        }
    }

    #[test]
    fn s_entry_scaling() {
        let s = store(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        let sketch = SketchDescription {
            p: 1,
            cols: vec![SampledIndex {
                index: 0,
                count: 1,
                prob: 0.5,
            }],
            rows: vec![SampledIndex {
                index: 0,
                count: 1,
                prob: 1.0,
            }],
            v: DenseMatrix::identity(1),
            sigma: vec![1.0],
            frob_norm: 2f64.sqrt(),
        };
        assert!((s_entry(&s, &sketch, 0, 0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s_entry(&s, &sketch, 2, 0).unwrap(), 0.0);
        assert!(s_entry(&s, &sketch, 3, 0).is_err());
        assert!(s_entry(&s, &sketch, 0, 1).is_err());
    }

    #[test]
    fn s_matches_dense_oracle_and_frobenius_identities() {
        let a = random(30, 12, 9);
        let s = MatrixSampleStore::from_dense(&a).unwrap();
        let params = practical(&s, 3, 40);
        let sketch = qisvd(&s, &params, &mut seeded(10)).unwrap();
        // Oracle: build S column by column from the draw multiset.
        let mut oracle_cols = Vec::new();
        for c in &sketch.cols {
            let colsq: f64 = (0..30).map(|r| a[(r, c.index)].powi(2)).sum();
            let prob = colsq / a.sq_frobenius();
            for _ in 0..c.count {
                oracle_cols.push(
                    (0..30)
                        .map(|r| a[(r, c.index)] / (40.0 * prob).sqrt())
                        .collect::<Vec<_>>(),
                );
            }
        }
        let dense_s = build_s(&s, &sketch, 1000).unwrap();
        for (t, col) in oracle_cols.iter().enumerate() {
            for i in 0..30 {
                assert!((dense_s[(i, t)] - col[i]).abs() < 1e-12);
            }
        }
        let af = a.frobenius_norm();
        assert!((dense_s.frobenius_norm() / af - 1.0).abs() < 1e-8);
        let w = build_w(&s, &sketch).unwrap();
        assert!((w.frobenius_norm() / af - 1.0).abs() < 1e-8);
    }

    #[test]
    fn collapsed_core_matches_dense_w() {
        for seed in 0..5 {
            let a = random(25, 15, 100 + seed);
            let s = MatrixSampleStore::from_dense(&a).unwrap();
            let params = practical(&s, 15, 40);
            let sketch = qisvd(&s, &params, &mut seeded(seed)).unwrap();
            let w = build_w(&s, &sketch).unwrap();
            let dense = svd::svd_dense(&w).unwrap();
            for (x, y) in sketch.sigma.iter().zip(&dense.sigma) {
                assert!((x - y).abs() <= 1e-10 * dense.sigma[0], "{x} vs {y}");
            }
            // V from the sketch diagonalises WᵀW.
            let v = sketch.v_expanded().unwrap();
            let wv = w.matmul(&v).unwrap();
            for j in 0..sketch.k() {
                let norm: f64 = (0..wv.rows()).map(|t| wv[(t, j)].powi(2)).sum::<f64>().sqrt();
                assert!((norm - sketch.sigma[j]).abs() <= 1e-9 * sketch.sigma[0]);
            }
            let vtv = v.gram();
            assert!(vtv.frobenius_distance(&DenseMatrix::identity(sketch.k())) <= 1e-10 * sketch.k() as f64);
        }
    }

    #[test]
    fn rank_one_w_is_sign_pattern() {
        let (a, _) = rank_one(9, 6, 2.5, 11);
        let s = MatrixSampleStore::from_dense(&a).unwrap();
        let p = 8;
        let sketch = qisvd(&s, &practical(&s, 1, p), &mut seeded(12)).unwrap();
        let w = build_w(&s, &sketch).unwrap();
        for x in w.data() {
            assert!((x.abs() - 2.5 / p as f64).abs() < 1e-12, "{x}");
        }
        assert!((sketch.sigma[0] - 2.5).abs() < 1e-8 * 2.5);

        let c = -3.0;
        let s = store(&[vec![c, 0.0], vec![0.0, 0.0]]);
        let sketch = qisvd(&s, &practical(&s, 1, 4), &mut seeded(13)).unwrap();
        let w = build_w(&s, &sketch).unwrap();
        assert!(w.data().iter().all(|x| (x.abs() - 3.0 / 4.0).abs() < 1e-15));
        assert!((sketch.sigma[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_path_agrees_in_law() {
        let s = store(&[vec![1.0, 2.0, 0.0], vec![3.0, 4.0, 0.0]]);
        let draws = sample_columns_with(&s, 1_000_000, 0, &mut seeded(14)).unwrap();
        assert_eq!(draws.iter().map(|c| c.count).sum::<u64>(), 1_000_000);
        assert!(draws.iter().all(|c| c.index != 2));
        let mut counts = [0u64; 2];
        draws.iter().for_each(|c| counts[c.index] = c.count);
        assert!(chi_square(&counts, &[1.0 / 3.0, 2.0 / 3.0]) < chi_square_99(1));
    }

    #[test]
    fn sketch_is_seed_deterministic() {
        let a = random(20, 10, 15);
        let s = MatrixSampleStore::from_dense(&a).unwrap();
        let params = practical(&s, 4, 30);
        let x = qisvd(&s, &params, &mut seeded(1)).unwrap();
        let y = qisvd(&s, &params, &mut seeded(1)).unwrap();
        assert_eq!(x, y);
        assert!(x.sigma.iter().all(|&v| v > 0.0));
    }
}
