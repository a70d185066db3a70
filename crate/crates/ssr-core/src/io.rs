//! CSV serialization for graphs, clusterings, spectra, and matrices.
//!
//! Floats are written with Rust's shortest round-trip representation so
//! outputs are byte-stable across platforms and parse back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Clustering, WeightMatrix};
use crate::spectral::{PerturbReport, Spectrum};

/// Shortest decimal representation that round-trips through `f64` parsing.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        detail: format!("cannot parse {field:?}"),
    })
}

/// Splits CSV content into rows of fields, skipping `#` comment lines and
/// blank lines. Returns (1-based line number, fields).
fn rows(content: &str) -> Vec<(usize, Vec<&str>)> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i + 1, l.split(',').collect()))
        .collect()
}

/// Writes the upper triangle (including any nonzero diagonal) as
/// `i,j,weight` with 0-based indices.
pub fn write_edge_list(path: &Path, w: &WeightMatrix) -> Result<()> {
    let n = w.size();
    let mut out = String::from("i,j,weight\n");
    for i in 0..n {
        for j in i..n {
            let v = w.entry(i, j);
            if v != 0.0 {
                let _ = writeln!(out, "{i},{j},{}", fmt_f64(v));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads an `i,j,weight` edge list; the vertex count is one past the largest
/// index mentioned.
pub fn read_edge_list(path: &Path) -> Result<WeightMatrix> {
    let content = fs::read_to_string(path)?;
    let mut triples = Vec::new();
    let mut n = 0usize;
    for (line, fields) in rows(&content) {
        if fields == ["i", "j", "weight"] {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let i: usize = parse_field(fields[0], line)?;
        let j: usize = parse_field(fields[1], line)?;
        let v: f64 = parse_field(fields[2], line)?;
        n = n.max(i + 1).max(j + 1);
        triples.push((i, j, v));
    }
    let mut w = DMatrix::zeros(n, n);
    for (i, j, v) in triples {
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    WeightMatrix::new(w)
}

/// Dense matrix, one CSV row per matrix row.
pub fn write_dense_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_dense_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let content = fs::read_to_string(path)?;
    let parsed = rows(&content);
    if parsed.is_empty() {
        return Err(Error::Parse {
            line: 0,
            detail: "empty matrix file".into(),
        });
    }
    let ncols = parsed[0].1.len();
    let mut data = Vec::with_capacity(parsed.len() * ncols);
    for (line, fields) in &parsed {
        if fields.len() != ncols {
            return Err(Error::Parse {
                line: *line,
                detail: format!("ragged row: {} fields, expected {ncols}", fields.len()),
            });
        }
        for f in fields {
            data.push(parse_field::<f64>(f, *line)?);
        }
    }
    Ok(DMatrix::from_row_slice(parsed.len(), ncols, &data))
}

/// `vertex,cluster_id` with 1-based cluster ids.
pub fn write_clustering(path: &Path, clustering: &Clustering) -> Result<()> {
    let mut out = String::from("vertex,cluster_id\n");
    for (v, id) in clustering.ids().iter().enumerate() {
        let _ = writeln!(out, "{v},{id}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_clustering(path: &Path) -> Result<Clustering> {
    let content = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (line, fields) in rows(&content) {
        if fields == ["vertex", "cluster_id"] {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        let v: usize = parse_field(fields[0], line)?;
        let id: usize = parse_field(fields[1], line)?;
        pairs.push((v, id));
    }
    pairs.sort();
    for (expected, (v, _)) in pairs.iter().enumerate() {
        if *v != expected {
            return Err(Error::Parse {
                line: 0,
                detail: format!("vertex ids not contiguous: missing {expected}"),
            });
        }
    }
    Clustering::new(pairs.into_iter().map(|(_, id)| id).collect())
}

/// Eigenvalue column followed by the eigenvector components, one eigenpair
/// per row.
pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let n = spectrum.len();
    let mut out = String::from("eigenvalue");
    for i in 0..n {
        let _ = write!(out, ",v{i}");
    }
    out.push('\n');
    for j in 0..n {
        let _ = write!(out, "{}", fmt_f64(spectrum.eigenvalue(j)));
        for i in 0..n {
            let _ = write!(out, ",{}", fmt_f64(spectrum.eigenvectors()[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Perturbation diagnostics keyed by eps, one row per report.
pub fn write_perturb_reports(path: &Path, reports: &[(f64, PerturbReport)]) -> Result<()> {
    let k = reports.first().map_or(0, |(_, r)| r.residuals.len());
    let mut out = String::from("eps,sigma_k_plus_1,theta,gap_lower_bound,subspace_distance");
    for i in 1..=k {
        let _ = write!(out, ",residual_{i}");
    }
    out.push('\n');
    for (eps, r) in reports {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            fmt_f64(*eps),
            fmt_f64(r.sigma_k_plus_1),
            fmt_f64(r.theta),
            r.gap_lower_bound.map_or(String::new(), fmt_f64),
            fmt_f64(r.subspace_distance)
        );
        for res in &r.residuals {
            let _ = write!(out, ",{}", fmt_f64(*res));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Matrix with a `class` index column and vertex-id header, used for
/// observations, ground truth, and posterior means.
pub fn write_matrix_with_ids(path: &Path, m: &DMatrix<f64>, vertex_ids: &[usize]) -> Result<()> {
    if vertex_ids.len() != m.ncols() {
        return Err(Error::Shape(format!(
            "{} vertex ids for {} columns",
            vertex_ids.len(),
            m.ncols()
        )));
    }
    let mut out = String::from("class");
    for id in vertex_ids {
        let _ = write!(out, ",{id}");
    }
    out.push('\n');
    for row in 0..m.nrows() {
        let _ = write!(out, "{row}");
        for col in 0..m.ncols() {
            let _ = write!(out, ",{}", fmt_f64(m[(row, col)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
