//! Inner-product estimation and the per-row leverage score approximation.
//!
//! A row of `Û = S V Σ⁻¹` is `S_{i,:} V Σ⁻¹`, so the score of row `i` needs
//! the `k` inner products `S_{i,:} V_{:,j}`. They are computed either exactly
//! from the sketch (`exact-dot`) or with the median-of-means sampling
//! estimator driven by `D_{S_{i,:}}` (`sampled-dot`).

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sample_tree::SampleTree;
use crate::sketch::{Params, SketchDescription};
use crate::store::MatrixSampleStore;

/// Samples per group mean is `⌈GROUP_FACTOR/ξ²⌉`.
pub const GROUP_FACTOR: f64 = 6.0;
/// Number of groups is `⌈GROUPS_FACTOR·ln(1/η)⌉`.
pub const GROUPS_FACTOR: f64 = 9.0;
/// Refuse sampled estimates needing more draws than this per inner product.
pub const MAX_ESTIMATOR_DRAWS: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScoreMode {
    #[default]
    ExactDot,
    SampledDot,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::ExactDot => "exact-dot",
            ScoreMode::SampledDot => "sampled-dot",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-dot" => Ok(ScoreMode::ExactDot),
            "sampled-dot" => Ok(ScoreMode::SampledDot),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// `(samples per group, number of groups)` for precision `xi` and failure
/// probability `eta`.
pub fn median_of_means_shape(xi: f64, eta: f64) -> Result<(u64, u64)> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::invalid(format!("xi = {xi} must be positive")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta = {eta} not in (0, 1)")));
    }
    let group = (GROUP_FACTOR / (xi * xi)).ceil();
    let groups = (GROUPS_FACTOR * (1.0 / eta).ln()).ceil().max(1.0);
    if group * groups > MAX_ESTIMATOR_DRAWS as f64 {
        return Err(Error::invalid(format!(
            "xi = {xi:e} needs {:e} draws per inner product; use a larger practical xi",
            group * groups
        )));
    }
    Ok((group as u64, groups as u64))
}

/// One unbiased draw `z = y_i ‖x‖² / x_i` with `i ~ D_x`.
pub fn single_sample_estimate<R, Y>(x: &SampleTree, y: &Y, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    Y: Fn(usize) -> f64 + ?Sized,
{
    let i = x.sample(rng)?;
    let xi = x.value(i);
    assert!(xi != 0.0, "D_x selected a zero entry");
    Ok(y(i) * x.sq_norm() / xi)
}

/// Median-of-means estimate of `⟨x, y⟩` to additive error `xi·‖x‖‖y‖` with
/// probability at least `1 − eta`.
pub fn estimate_inner<R, Y>(x: &SampleTree, y: &Y, xi: f64, eta: f64, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    Y: Fn(usize) -> f64 + ?Sized,
{
    let (group, groups) = median_of_means_shape(xi, eta)?;
    if x.sq_norm() <= 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut means = Vec::with_capacity(groups as usize);
    for _ in 0..groups {
        let mut sum = 0.0;
        for _ in 0..group {
            sum += single_sample_estimate(x, y, rng)?;
        }
        means.push(sum / group as f64);
    }
    Ok(median(&mut means))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `√c_b · S[i, j_b]` over column slots: the row `S_{i,:}` with duplicate
/// positions merged so that norms and inner products are preserved.
fn merged_s_row(store: &MatrixSampleStore, sketch: &SketchDescription, i: usize) -> Vec<f64> {
    sketch
        .cols
        .iter()
        .enumerate()
        .map(|(b, c)| (c.count as f64).sqrt() * store.entry(i, c.index) * sketch.col_scale(b))
        .collect()
}

/// Approximate leverage score `ℓ̃_i = ‖t Σ⁻¹‖²` with `t_j ≈ S_{i,:} V_{:,j}`.
pub fn qisls_score<R: Rng + ?Sized>(
    store: &MatrixSampleStore,
    sketch: &SketchDescription,
    i: usize,
    mode: ScoreMode,
    params: &Params,
    rng: &mut R,
) -> Result<f64> {
    if i >= store.rows() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: store.rows(),
        });
    }
    if let Some(s) = sketch.sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!("singular value {s} cannot be inverted")));
    }
    let x = merged_s_row(store, sketch, i);
    if x.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    // y_j[b] = √c_b · V[b, j] has unit norm over the merged slots.
    let weights: Vec<f64> = sketch.cols.iter().map(|c| (c.count as f64).sqrt()).collect();
    let k = sketch.k();
    let mut score = 0.0;
    match mode {
        ScoreMode::ExactDot => {
            for j in 0..k {
                let t: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(b, xb)| xb * weights[b] * sketch.v[(b, j)])
                    .sum();
                score += (t / sketch.sigma[j]).powi(2);
            }
        }
        ScoreMode::SampledDot => {
            let tree = SampleTree::new(&x)?;
            let (xi, eta) = (params.effective_xi(), params.eta());
            for j in 0..k {
                let y = |b: usize| weights[b] * sketch.v[(b, j)];
                let t = estimate_inner(&tree, &y, xi, eta, rng)?;
                score += (t / sketch.sigma[j]).powi(2);
            }
        }
    }
    Ok(score)
}

/// Scores every row in `rows` (all rows when `None`).
pub fn qisls_all<R: Rng + ?Sized>(
    store: &MatrixSampleStore,
    sketch: &SketchDescription,
    rows: Option<&[usize]>,
    mode: ScoreMode,
    params: &Params,
    rng: &mut R,
) -> Result<LeverageReport> {
    let rows: Vec<usize> = match rows {
        Some([]) => return Err(Error::invalid("empty row set")),
        Some(r) => r.to_vec(),
        None => (0..store.rows()).collect(),
    };
    let approx = rows
        .iter()
        .map(|&i| qisls_score(store, sketch, i, mode, params, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(LeverageReport {
        rows,
        approx,
        exact: None,
        mode,
        seed: None,
        params: Some(params.clone()),
    })
}

/// `‖ÛᵀÛ − I‖_F` computed exactly from the store and sketch.
pub fn orthogonality_defect(store: &MatrixSampleStore, sketch: &SketchDescription) -> f64 {
    let k = sketch.k();
    let weights: Vec<f64> = sketch.cols.iter().map(|c| (c.count as f64).sqrt()).collect();
    let mut gram = vec![0.0; k * k];
    let mut u_row = vec![0.0; k];
    for i in 0..store.rows() {
        let x = merged_s_row(store, sketch, i);
        if x.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (j, u) in u_row.iter_mut().enumerate() {
            let t: f64 = x
                .iter()
                .enumerate()
                .map(|(b, xb)| xb * weights[b] * sketch.v[(b, j)])
                .sum();
            *u = t / sketch.sigma[j];
        }
        for a in 0..k {
            for b in 0..k {
                gram[a * k + b] += u_row[a] * u_row[b];
            }
        }
    }
    let mut defect = 0.0;
    for a in 0..k {
        for b in 0..k {
            let target = if a == b { 1.0 } else { 0.0 };
            defect += (gram[a * k + b] - target).powi(2);
        }
    }
    defect.sqrt()
}

/// Per-row approximate scores, optionally alongside exact ones.
#[derive(Clone, Debug, PartialEq)]
pub struct LeverageReport {
    /// 0-based row indices, in report order.
    pub rows: Vec<usize>,
    pub approx: Vec<f64>,
    pub exact: Option<Vec<f64>>,
    pub mode: ScoreMode,
    pub seed: Option<u64>,
    pub params: Option<Params>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSummary {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl LeverageReport {
    /// Attaches exact scores given for every row of the matrix.
    pub fn with_exact(mut self, all_exact: &[f64]) -> Self {
        self.exact = Some(self.rows.iter().map(|&i| all_exact[i]).collect());
        self
    }

    pub fn abs_errors(&self) -> Option<Vec<f64>> {
        self.exact
            .as_ref()
            .map(|e| e.iter().zip(&self.approx).map(|(x, y)| (x - y).abs()).collect())
    }

    pub fn error_summary(&self) -> Option<ErrorSummary> {
        let mut errs = self.abs_errors()?;
        let n = errs.len() as f64;
        let max = errs.iter().copied().fold(0.0, f64::max);
        let mean = errs.iter().sum::<f64>() / n;
        Some(ErrorSummary {
            max,
            mean,
            median: median(&mut errs),
        })
    }

    /// `(row, score)` of the largest approximate score; ties go to the
    /// lowest row index.
    pub fn coherence(&self) -> (usize, f64) {
        argmax(&self.rows, &self.approx)
    }

    pub fn exact_coherence(&self) -> Option<(usize, f64)> {
        self.exact.as_ref().map(|e| argmax(&self.rows, e))
    }
}

fn argmax(rows: &[usize], scores: &[f64]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for (&i, &s) in rows.iter().zip(scores) {
        if s > best.1 || (s == best.1 && i < best.0) {
            best = (i, s);
        }
    }
    best
}
