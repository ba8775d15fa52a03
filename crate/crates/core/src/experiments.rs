//! Trial harnesses shared by the CLI and the acceptance suite.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{qisls_all, LeverageReport, ScoreMode};
use crate::matrix::DenseMatrix;
use crate::oracle::{analyze, ExactAnalysis, DEFAULT_RANK_TOL};
use crate::rng::{seeded, trial_seed};
use crate::sketch::{
    build_s, build_w_with, compute_params, qisvd, sample_columns, sample_rows, Params, SketchDescription,
};
use crate::store::MatrixSampleStore;

/// `‖XᵀY‖_F²` for column-compatible `x`, `y`.
fn cross_sq_norm(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    x.transpose().matmul(y).expect("row counts agree").sq_frobenius()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationTrial {
    /// `‖AAᵀ − SSᵀ‖_F / ‖A‖_F²`
    pub outer: f64,
    /// `‖SᵀS − WᵀW‖_F / ‖S‖_F²`
    pub inner: f64,
}

#[derive(Clone, Debug)]
pub struct ConcentrationStats {
    pub theta: f64,
    pub p: u64,
    pub trials: Vec<ConcentrationTrial>,
}

impl ConcentrationStats {
    /// `1/(θ²p)`, capped at 1.
    pub fn bound(&self) -> f64 {
        (1.0 / (self.theta * self.theta * self.p as f64)).min(1.0)
    }

    pub fn outer_exceedance(&self) -> f64 {
        self.fraction(|t| t.outer >= self.theta)
    }

    pub fn inner_exceedance(&self) -> f64 {
        self.fraction(|t| t.inner >= self.theta)
    }

    fn fraction(&self, pred: impl Fn(&ConcentrationTrial) -> bool) -> f64 {
        self.trials.iter().filter(|t| pred(t)).count() as f64 / self.trials.len() as f64
    }
}

/// Largest `p` the concentration harness materialises densely.
pub const CONCENTRATION_CAP: usize = 5000;

/// Monte Carlo estimate of both sampling deviations. `‖AAᵀ − SSᵀ‖_F` is
/// evaluated through `‖AᵀA‖² − 2‖AᵀS‖² + ‖SᵀS‖²` so that `m × m`
/// products are never formed.
pub fn run_concentration(a: &DenseMatrix, theta: f64, p: u64, trials: usize, seed: u64) -> Result<ConcentrationStats> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta = {theta} must be positive")));
    }
    if p == 0 || p as usize > CONCENTRATION_CAP {
        return Err(Error::invalid(format!("p = {p} outside 1..={CONCENTRATION_CAP}")));
    }
    let store = MatrixSampleStore::from_dense(a)?;
    let f2 = store.sq_frobenius();
    let ata = a.gram().sq_frobenius();
    let trials = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(trial_seed(seed, t));
            let cols = sample_columns(&store, p, &mut rng)?;
            let rows = sample_rows(&store, &cols, p, &mut rng)?;
            let sketch = SketchDescription {
                p,
                cols,
                rows,
                v: DenseMatrix::zeros(0, 0),
                sigma: Vec::new(),
                frob_norm: f2.sqrt(),
            };
            let s = build_s(&store, &sketch, CONCENTRATION_CAP)?;
            let w = build_w_with(&store, &sketch, CONCENTRATION_CAP)?;
            let sts = s.gram();
            let outer2 = ata - 2.0 * cross_sq_norm(a, &s) + sts.sq_frobenius();
            let s_f2 = s.sq_frobenius();
            Ok(ConcentrationTrial {
                outer: outer2.max(0.0).sqrt() / f2,
                inner: sts.frobenius_distance(&w.gram()) / s_f2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcentrationStats { theta, p, trials })
}

#[derive(Clone, Debug)]
pub struct CompareConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub p: Option<u64>,
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub mode: ScoreMode,
    pub trials: usize,
    pub seed: u64,
    /// 0-based; `None` scores every row.
    pub rows: Option<Vec<usize>>,
    pub rank_tol: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            delta: 0.1,
            k: 1,
            p: None,
            theta: None,
            xi: None,
            mode: ScoreMode::ExactDot,
            trials: 1,
            seed: 0,
            rows: None,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    /// Per-row mean of the approximate scores, with exact scores attached.
    pub report: LeverageReport,
    pub exact: ExactAnalysis,
    /// Largest number of singular triplets any trial kept.
    pub k_used: usize,
}

impl CompareOutcome {
    pub fn coherence_agrees(&self) -> bool {
        Some(self.report.coherence().0) == self.report.exact_coherence().map(|c| c.0)
    }
}

/// Parameters with `‖A‖` and `κ` taken from the exact oracle.
pub fn oracle_params(exact: &ExactAnalysis, cfg: &CompareConfig) -> Result<Params> {
    let mut params = compute_params(
        cfg.epsilon,
        cfg.delta,
        cfg.k,
        exact.kappa,
        exact.spectral_norm,
        exact.frob_norm,
        cfg.p,
    )?;
    if let Some(theta) = cfg.theta {
        params = params.with_theta(theta)?;
    }
    if let Some(xi) = cfg.xi {
        params = params.with_xi(xi)?;
    }
    Ok(params)
}

/// Runs `trials` independent sketches and averages the scores per row.
pub fn run_compare(a: &DenseMatrix, cfg: &CompareConfig) -> Result<CompareOutcome> {
    let exact = analyze(a, cfg.rank_tol)?;
    run_compare_with_exact(a, exact, cfg)
}

pub fn run_compare_with_exact(a: &DenseMatrix, exact: ExactAnalysis, cfg: &CompareConfig) -> Result<CompareOutcome> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if let Some(rows) = &cfg.rows {
        if let Some(&bad) = rows.iter().find(|&&i| i >= a.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: a.rows(),
            });
        }
    }
    let params = oracle_params(&exact, cfg)?;
    let store = MatrixSampleStore::from_dense(a)?;
    let runs = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(trial_seed(cfg.seed, t));
            let sketch = qisvd(&store, &params, &mut rng)?;
            let report = qisls_all(&store, &sketch, cfg.rows.as_deref(), cfg.mode, &params, &mut rng)?;
            Ok((report.approx, sketch.k()))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<usize> = cfg.rows.clone().unwrap_or_else(|| (0..a.rows()).collect());
    let mut mean = vec![0.0; rows.len()];
    for (approx, _) in &runs {
        mean.iter_mut().zip(approx).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= cfg.trials as f64);
    let k_used = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let report = LeverageReport {
        rows,
        approx: mean,
        exact: None,
        mode: cfg.mode,
        seed: Some(cfg.seed),
        params: Some(params),
    }
    .with_exact(&exact.scores);
    Ok(CompareOutcome { report, exact, k_used })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    /// Mean store queries per scored row.
    pub queries: f64,
    /// Mean wall time of one scoring pass, milliseconds.
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub k: usize,
    pub p: u64,
    pub mode: ScoreMode,
    pub xi: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Number of evenly spaced rows scored per trial.
    pub score_rows: usize,
}

/// Times the scoring pass on `a` and counts store queries per score. The
/// store build and the sketch are excluded. Parameters are practical and
/// oracle-free (`κ = 1`, `‖A‖ = ‖A‖_F`); only `xi` depends on them.
pub fn run_bench(a: &DenseMatrix, cfg: &BenchConfig) -> Result<BenchRow> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if cfg.score_rows == 0 {
        return Err(Error::invalid("score_rows must be at least 1"));
    }
    let store = MatrixSampleStore::from_dense(a)?;
    let f = store.frobenius_norm();
    let mut params = compute_params(0.5, 0.1, cfg.k, 1.0, f, f, Some(cfg.p))?;
    if let Some(xi) = cfg.xi {
        params = params.with_xi(xi)?;
    }
    let count = cfg.score_rows.min(a.rows());
    let rows: Vec<usize> = (0..count).map(|t| t * a.rows() / count).collect();
    let (mut queries, mut wall) = (0u64, 0.0);
    for t in 0..cfg.trials as u64 {
        let mut rng = seeded(trial_seed(cfg.seed, t));
        let sketch = qisvd(&store, &params, &mut rng)?;
        store.reset_query_count();
        let start = Instant::now();
        qisls_all(&store, &sketch, Some(&rows), cfg.mode, &params, &mut rng)?;
        wall += start.elapsed().as_secs_f64() * 1e3;
        queries += store.query_count();
    }
    let scored = (cfg.trials * rows.len()) as f64;
    Ok(BenchRow {
        m: a.rows(),
        n: a.cols(),
        queries: queries as f64 / scored,
        wall_ms: wall / cfg.trials as f64,
    })
}
