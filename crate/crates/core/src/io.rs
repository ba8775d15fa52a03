//! Text formats: matrices, leverage reports and sketches.
//!
//! Indices are 1-based in every file; floats use Rust's shortest
//! round-trip formatting so a write/read cycle is exact.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::LeverageReport;
use crate::matrix::DenseMatrix;
use crate::sketch::{Params, SampledIndex, SketchDescription};

/// A matrix and the `# key=value` metadata read alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub matrix: DenseMatrix,
    pub meta: Vec<(String, String)>,
}

impl MatrixFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad number {:?}", s.trim())))
}

/// Splits `# a=1 b=2` into pairs. Tokens without `=` are ignored.
fn meta_pairs(comment: &str) -> Vec<(String, String)> {
    comment
        .split_whitespace()
        .filter_map(|tok| tok.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

/// Writes a dense matrix, preceded by metadata and a `# m=… n=…` line.
pub fn write_matrix<W: Write>(mut w: W, a: &DenseMatrix, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        if k != "m" && k != "n" {
            writeln!(w, "# {k}={v}")?;
        }
    }
    writeln!(w, "# m={} n={}", a.rows(), a.cols())?;
    let mut line = String::new();
    for i in 0..a.rows() {
        line.clear();
        for (j, x) in a.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&x.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes the nonzero entries as 1-based `i,j,value` triplets.
pub fn write_triplets<W: Write>(mut w: W, a: &DenseMatrix) -> Result<()> {
    writeln!(w, "# coo {} {}", a.rows(), a.cols())?;
    for i in 0..a.rows() {
        for (j, x) in a.row(i).iter().enumerate() {
            if *x != 0.0 {
                writeln!(w, "{},{},{}", i + 1, j + 1, x)?;
            }
        }
    }
    Ok(())
}

/// Reads either layout. Triplets are recognised by a `# coo m n` header;
/// repeated triplets are summed.
pub fn read_matrix<R: BufRead>(r: R) -> Result<MatrixFile> {
    let mut meta = Vec::new();
    let mut coo: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let no = no + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let mut toks = c.split_whitespace();
            if toks.next() == Some("coo") {
                let m = parse_num(toks.next().ok_or_else(|| parse_err(no, "coo needs m n"))?, no)?;
                let n = parse_num(toks.next().ok_or_else(|| parse_err(no, "coo needs m n"))?, no)?;
                coo = Some((m, n));
            } else {
                meta.extend(meta_pairs(c));
            }
            continue;
        }
        if coo.is_some() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(parse_err(no, "expected i,j,value"));
            }
            let i: usize = parse_num(f[0], no)?;
            let j: usize = parse_num(f[1], no)?;
            if i == 0 || j == 0 {
                return Err(parse_err(no, "indices are 1-based"));
            }
            triplets.push((i - 1, j - 1, parse_num(f[2], no)?));
        } else {
            let row = line
                .split(',')
                .map(|s| parse_num(s, no))
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(parse_err(
                        no,
                        format!("expected {} columns, got {}", first.len(), row.len()),
                    ));
                }
            }
            rows.push(row);
        }
    }
    let matrix = match coo {
        Some((m, n)) => {
            let mut a = DenseMatrix::zeros(m, n);
            for (i, j, v) in triplets {
                if i >= m || j >= n {
                    return Err(Error::IndexOutOfRange {
                        index: i.max(j) + 1,
                        len: m.max(n),
                    });
                }
                a[(i, j)] += v;
            }
            if a.data().iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            a
        }
        None => {
            if rows.is_empty() {
                return Err(parse_err(0, "no matrix rows"));
            }
            DenseMatrix::from_rows(&rows)?
        }
    };
    let declared = |key: &str| meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    for (key, actual) in [("m", matrix.rows()), ("n", matrix.cols())] {
        if let Some(v) = declared(key) {
            if v.parse::<usize>().ok() != Some(actual) {
                return Err(Error::DimensionMismatch(format!("header {key}={v}, data has {actual}")));
            }
        }
    }
    Ok(MatrixFile { matrix, meta })
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn params_pairs(p: &Params) -> Vec<(&'static str, String)> {
    vec![
        ("epsilon", p.epsilon.to_string()),
        ("delta", p.delta.to_string()),
        ("k", p.k.to_string()),
        ("kappa", p.kappa.to_string()),
        ("spectral_norm", p.spectral_norm.to_string()),
        ("frob_norm", p.frob_norm.to_string()),
        ("omega", p.omega.to_string()),
        ("theta", p.theta.to_string()),
        ("p", p.p.to_string()),
        ("theoretical_p", p.theoretical_p.to_string()),
        ("xi", p.xi.to_string()),
        ("p_override", opt_to_string(&p.p_override)),
        ("xi_override", opt_to_string(&p.xi_override)),
    ]
}

fn params_from(map: &BTreeMap<String, String>) -> Result<Option<Params>> {
    if !map.contains_key("epsilon") {
        return Ok(None);
    }
    let get = |k: &str| {
        map.get(k)
            .map(String::as_str)
            .ok_or_else(|| parse_err(0, format!("missing {k}")))
    };
    fn opt<T: FromStr>(s: &str) -> Result<Option<T>> {
        if s == "none" {
            Ok(None)
        } else {
            parse_num(s, 0).map(Some)
        }
    }
    Ok(Some(Params {
        epsilon: parse_num(get("epsilon")?, 0)?,
        delta: parse_num(get("delta")?, 0)?,
        k: parse_num(get("k")?, 0)?,
        kappa: parse_num(get("kappa")?, 0)?,
        spectral_norm: parse_num(get("spectral_norm")?, 0)?,
        frob_norm: parse_num(get("frob_norm")?, 0)?,
        omega: parse_num(get("omega")?, 0)?,
        theta: parse_num(get("theta")?, 0)?,
        p: parse_num(get("p")?, 0)?,
        theoretical_p: parse_num(get("theoretical_p")?, 0)?,
        xi: parse_num(get("xi")?, 0)?,
        p_override: opt(get("p_override")?)?,
        xi_override: opt(get("xi_override")?)?,
    }))
}

/// Writes `i,approx,exact,abs_err` rows; `exact` and `abs_err` are empty
/// when no exact scores are attached.
pub fn write_report<W: Write>(mut w: W, report: &LeverageReport, extra: &[(String, String)]) -> Result<()> {
    writeln!(w, "# mode={}", report.mode)?;
    writeln!(w, "# seed={}", opt_to_string(&report.seed))?;
    if let Some(p) = &report.params {
        for (k, v) in params_pairs(p) {
            writeln!(w, "# {k}={v}")?;
        }
    }
    for (k, v) in extra {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "i,approx,exact,abs_err")?;
    for (n, (&i, a)) in report.rows.iter().zip(&report.approx).enumerate() {
        match &report.exact {
            Some(e) => writeln!(w, "{},{},{},{}", i + 1, a, e[n], (e[n] - a).abs())?,
            None => writeln!(w, "{},{},,", i + 1, a)?,
        }
    }
    Ok(())
}

pub fn read_report<R: BufRead>(r: R) -> Result<LeverageReport> {
    let mut map = BTreeMap::new();
    let mut rows = Vec::new();
    let mut approx = Vec::new();
    let mut exact = Vec::new();
    let mut seen_header = false;
    for (no, line) in r.lines().enumerate() {
        let no = no + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            map.extend(meta_pairs(c));
            continue;
        }
        if !seen_header {
            if line != "i,approx,exact,abs_err" {
                return Err(parse_err(no, "expected header i,approx,exact,abs_err"));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(parse_err(no, "expected 4 fields"));
        }
        let i: usize = parse_num(f[0], no)?;
        if i == 0 {
            return Err(parse_err(no, "indices are 1-based"));
        }
        rows.push(i - 1);
        approx.push(parse_num(f[1], no)?);
        exact.push(if f[2].is_empty() {
            None
        } else {
            Some(parse_num::<f64>(f[2], no)?)
        });
    }
    let exact = if exact.iter().all(Option::is_some) && !exact.is_empty() {
        Some(exact.into_iter().flatten().collect())
    } else if exact.iter().all(Option::is_none) {
        None
    } else {
        return Err(parse_err(0, "exact column partially filled"));
    };
    let mode = map.get("mode").map(|m| m.parse()).transpose()?.unwrap_or_default();
    let seed = match map.get("seed").map(String::as_str) {
        None | Some("none") => None,
        Some(s) => Some(parse_num(s, 0)?),
    };
    Ok(LeverageReport {
        rows,
        approx,
        exact,
        mode,
        seed,
        params: params_from(&map)?,
    })
}

pub fn write_sketch<W: Write>(mut w: W, sketch: &SketchDescription) -> Result<()> {
    writeln!(w, "# p={} frob_norm={} k={}", sketch.p, sketch.frob_norm, sketch.k())?;
    for (name, slots) in [("cols", &sketch.cols), ("rows", &sketch.rows)] {
        writeln!(w, "[{name}]")?;
        for s in slots {
            writeln!(w, "{},{},{}", s.index + 1, s.count, s.prob)?;
        }
    }
    writeln!(w, "[V]")?;
    for b in 0..sketch.v.rows() {
        let row: Vec<String> = sketch.v.row(b).iter().map(f64::to_string).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    writeln!(w, "[sigma]")?;
    for s in &sketch.sigma {
        writeln!(w, "{s}")?;
    }
    Ok(())
}

pub fn read_sketch<R: BufRead>(r: R) -> Result<SketchDescription> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Cols,
        Rows,
        V,
        Sigma,
    }
    let mut map = BTreeMap::new();
    let mut section = Section::None;
    let (mut cols, mut rows, mut v, mut sigma) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (no, line) in r.lines().enumerate() {
        let no = no + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            map.extend(meta_pairs(c));
            continue;
        }
        section = match line {
            "[cols]" => Section::Cols,
            "[rows]" => Section::Rows,
            "[V]" => Section::V,
            "[sigma]" => Section::Sigma,
            _ => {
                match section {
                    Section::None => return Err(parse_err(no, "data before any section")),
                    Section::Cols | Section::Rows => {
                        let f: Vec<&str> = line.split(',').collect();
                        if f.len() != 3 {
                            return Err(parse_err(no, "expected index,count,prob"));
                        }
                        let index: usize = parse_num(f[0], no)?;
                        if index == 0 {
                            return Err(parse_err(no, "indices are 1-based"));
                        }
                        let s = SampledIndex {
                            index: index - 1,
                            count: parse_num(f[1], no)?,
                            prob: parse_num(f[2], no)?,
                        };
                        if section == Section::Cols {
                            cols.push(s)
                        } else {
                            rows.push(s)
                        }
                    }
                    Section::V => v.push(
                        line.split(',')
                            .map(|s| parse_num(s, no))
                            .collect::<Result<Vec<f64>>>()?,
                    ),
                    Section::Sigma => sigma.push(parse_num(line, no)?),
                }
                continue;
            }
        };
    }
    let p = parse_num(map.get("p").ok_or_else(|| parse_err(0, "missing p"))?, 0)?;
    let frob_norm = parse_num(
        map.get("frob_norm").ok_or_else(|| parse_err(0, "missing frob_norm"))?,
        0,
    )?;
    if v.len() != cols.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} V rows for {} column slots",
            v.len(),
            cols.len()
        )));
    }
    let k = sigma.len();
    if v.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch(format!("V rows must have {k} entries")));
    }
    let v = if v.is_empty() {
        DenseMatrix::zeros(0, k)
    } else {
        DenseMatrix::from_rows(&v)?
    };
    Ok(SketchDescription {
        p,
        cols,
        rows,
        v,
        sigma,
        frob_norm,
    })
}
