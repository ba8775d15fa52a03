//! Exact leverage scores, spectral quantities and the two synthetic test
//! families.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{seeded, standard_normal};
use crate::svd::{dot, svd_dense, SvdResult};

/// Numerical rank cut-off relative to `σ₁`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ExactAnalysis {
    pub scores: Vec<f64>,
    pub rank: usize,
    /// All singular values, descending.
    pub sigma: Vec<f64>,
    pub spectral_norm: f64,
    pub kappa: f64,
    pub frob_norm: f64,
}

/// Thin SVD of `a`. Tall inputs are first reduced by Householder QR so the
/// Jacobi sweeps run on the square factor; `U = Q U_R`.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdResult> {
    if a.rows() <= 2 * a.cols() {
        return svd_dense(a);
    }
    let (q, r) = householder_qr(a);
    let inner = svd_dense(&r)?;
    Ok(SvdResult {
        u: q.matmul(&inner.u)?,
        sigma: inner.sigma,
        v: inner.v,
    })
}

pub fn analyze(a: &DenseMatrix, rank_tol: f64) -> Result<ExactAnalysis> {
    if a.data().iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    if !(0.0..1.0).contains(&rank_tol) {
        return Err(Error::invalid(format!("rank_tol = {rank_tol} not in [0, 1)")));
    }
    let svd = thin_svd(a)?;
    let rank = svd.rank_above(rank_tol);
    let scores = (0..a.rows())
        .map(|i| svd.u.row(i)[..rank].iter().map(|x| x * x).sum())
        .collect();
    let spectral_norm = svd.sigma[0];
    Ok(ExactAnalysis {
        scores,
        rank,
        kappa: spectral_norm / svd.sigma[rank - 1],
        spectral_norm,
        sigma: svd.sigma,
        frob_norm: a.frobenius_norm(),
    })
}

/// `ℓ_i`: squared row norms of the first `rank` left singular vectors.
pub fn exact_leverage(a: &DenseMatrix, rank_tol: f64) -> Result<Vec<f64>> {
    Ok(analyze(a, rank_tol)?.scores)
}

/// `(‖A‖, κ)` with `κ = σ₁/σ_r` over the numerical rank.
pub fn spectral_norm_and_kappa(a: &DenseMatrix) -> Result<(f64, f64)> {
    let e = analyze(a, DEFAULT_RANK_TOL)?;
    Ok((e.spectral_norm, e.kappa))
}

/// Thin Householder QR of a tall matrix: `Q` is `m × n` with orthonormal
/// columns and `R` is `n × n` upper triangular with nonnegative diagonal.
pub fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "householder_qr needs rows >= cols");
    // Column-major working copy; reflector k lives in cols[k][k..].
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let x = &cols[k][k..];
        let norm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if norm > 0.0 {
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vn = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|e| *e /= vn);
        } else {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        for col in cols.iter_mut().skip(k) {
            let d = 2.0 * dot(&v, &col[k..]);
            col[k..].iter_mut().zip(&v).for_each(|(c, e)| *c -= d * e);
        }
        for (j, col) in cols.iter().enumerate().skip(k) {
            r[(k, j)] = col[k];
        }
        reflectors.push(v);
    }
    // Q = H_0 … H_{n-1} applied to the first n identity columns.
    let mut qcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for q in qcols.iter_mut() {
        for k in (0..n).rev() {
            let v = &reflectors[k];
            let d = 2.0 * dot(v, &q[k..]);
            if d != 0.0 {
                q[k..].iter_mut().zip(v).for_each(|(c, e)| *c -= d * e);
            }
        }
    }
    // Flip signs so diag(R) ≥ 0.
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            for j in k..n {
                r[(k, j)] = -r[(k, j)];
            }
            qcols[k].iter_mut().for_each(|x| *x = -*x);
        }
    }
    (DenseMatrix::from_fn(m, n, |i, j| qcols[j][i]), r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Example1,
    Example2,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Example1 => "example1",
            Family::Example2 => "example2",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Family::Example1),
            "example2" => Ok(Family::Example2),
            other => Err(Error::invalid(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub n_zero: usize,
    pub r: usize,
    pub kappa: f64,
    pub a: u64,
    pub b: u64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<DenseMatrix> {
        match self.family {
            Family::Example1 => gen_example1(self.m, self.n, self.n_zero, self.seed),
            Family::Example2 => gen_example2(self.m, self.n, self.r, self.kappa, self.a, self.b, self.seed),
        }
    }

    /// `key=value` pairs describing the spec, for file metadata.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("family".to_string(), self.family.to_string()),
            ("m".to_string(), self.m.to_string()),
            ("n".to_string(), self.n.to_string()),
        ];
        match self.family {
            Family::Example1 => out.push(("zero".into(), self.n_zero.to_string())),
            Family::Example2 => {
                out.push(("r".into(), self.r.to_string()));
                out.push(("kappa".into(), self.kappa.to_string()));
                out.push(("a".into(), self.a.to_string()));
                out.push(("b".into(), self.b.to_string()));
            }
        }
        out.push(("seed".into(), self.seed.to_string()));
        out
    }
}

/// Standard normal `m × n` with the four row bands scaled by
/// `1, 10², 10³, 10⁴`, then `n_zero` distinct random columns zeroed.
pub fn gen_example1(m: usize, n: usize, n_zero: usize, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || !m.is_multiple_of(4) {
        return Err(Error::invalid(format!("m = {m} must be a positive multiple of 4")));
    }
    if n == 0 || n_zero >= n {
        return Err(Error::invalid(format!(
            "need 0 <= zero < n, got zero = {n_zero}, n = {n}"
        )));
    }
    let mut rng = seeded(seed);
    let mut a = DenseMatrix::from_fn(m, n, |_, _| standard_normal(&mut rng));
    let band = m / 4;
    for i in 0..m {
        let scale = [1.0, 1e2, 1e3, 1e4][i / band];
        a.row_mut(i).iter_mut().for_each(|x| *x *= scale);
    }
    for j in index::sample(&mut rng, n, n_zero) {
        for i in 0..m {
            a[(i, j)] = 0.0;
        }
    }
    Ok(a)
}

/// `A = U Σ Vᵀ` with Haar-like `U`, `V` from QR of Gaussian factors,
/// `σ_max` a uniform integer in `[a, b]`, `σ_min = σ_max/κ`, and the other
/// `r − 2` values uniform in between.
pub fn gen_example2(m: usize, n: usize, r: usize, kappa: f64, a: u64, b: u64, seed: u64) -> Result<DenseMatrix> {
    if r == 0 || r > m.min(n) {
        return Err(Error::invalid(format!("r = {r} must be in 1..=min(m, n)")));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("kappa = {kappa} must be >= 1")));
    }
    if a < 1 || a > b {
        return Err(Error::invalid(format!("need 1 <= a <= b, got a = {a}, b = {b}")));
    }
    if r < 2 && kappa > 1.0 {
        return Err(Error::invalid("kappa > 1 needs r >= 2"));
    }
    let mut rng = seeded(seed);
    let gu = DenseMatrix::from_fn(m, r, |_, _| standard_normal(&mut rng));
    let gv = DenseMatrix::from_fn(n, r, |_, _| standard_normal(&mut rng));
    let (u, _) = householder_qr(&gu);
    let (v, _) = householder_qr(&gv);

    let smax = rng.random_range(a..=b) as f64;
    let smin = smax / kappa;
    let mut sigma = vec![smax];
    for _ in 2..r {
        sigma.push(if smin < smax {
            rng.random_range(smin..smax)
        } else {
            smax
        });
    }
    if r >= 2 {
        sigma.push(smin);
    }
    sigma.sort_by(|x, y| y.total_cmp(x));

    let mut us = u;
    for i in 0..m {
        us.row_mut(i).iter_mut().zip(&sigma).for_each(|(x, s)| *x *= s);
    }
    us.matmul(&v.transpose())
}
