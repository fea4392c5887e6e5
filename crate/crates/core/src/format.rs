//! Plain-text dataset files.
//!
//! ```text
//! N M L
//! x_11 x_12 ... x_1M | z_11 ... z_1L
//! ...
//! ```
//!
//! Features are decimal reals written with shortest round-trip formatting.
//! Label tokens are `0`, `1` or `?` (missing). Full datasets use only `0`/`1`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::dataset::{Dataset, Label, LabelMatrix};
use crate::error::{Error, Result};

/// Features together with observed (possibly missing) labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    pub features: Array2<f64>,
    pub labels: LabelMatrix,
}

impl MaskedDataset {
    pub fn new(features: Array2<f64>, labels: LabelMatrix) -> Result<Self> {
        if features.nrows() != labels.n_rows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} label rows",
                features.nrows(),
                labels.n_rows()
            )));
        }
        Ok(Self { features, labels })
    }
}

pub fn write_table<W: Write>(
    mut w: W,
    features: &Array2<f64>,
    labels: &LabelMatrix,
) -> Result<()> {
    let (n, m) = features.dim();
    if labels.n_rows() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows but {} label rows",
            labels.n_rows()
        )));
    }
    writeln!(w, "{n} {m} {}", labels.n_cols())?;
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (k, v) in features.row(i).iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&v.to_string());
        }
        line.push_str(" |");
        for z in labels.row(i) {
            line.push(' ');
            line.push(z.token());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<R: Read>(r: R) -> Result<MaskedDataset> {
    let mut lines = BufReader::new(r).lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("header must be `N M L`: {e}"),
        })?;
    let [n, m, l] = dims[..] else {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must have 3 fields, found {}", dims.len()),
        });
    };

    let mut features = Array2::zeros((n, m));
    let mut labels = Array2::from_elem((n, l), Label::Missing);
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if rows == n {
            return Err(Error::Shape(format!(
                "header declares {n} rows but line {lineno} holds another"
            )));
        }
        let (xs, zs) = line.split_once('|').ok_or_else(|| Error::Parse {
            line: lineno,
            message: "missing `|` separator".into(),
        })?;
        let xs: Vec<&str> = xs.split_whitespace().collect();
        let zs: Vec<&str> = zs.split_whitespace().collect();
        if xs.len() != m || zs.len() != l {
            return Err(Error::Shape(format!(
                "line {lineno}: expected {m} features and {l} labels, found {} and {}",
                xs.len(),
                zs.len()
            )));
        }
        for (j, t) in xs.iter().enumerate() {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad feature {t:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite feature {t:?}"),
                });
            }
            features[[rows, j]] = v;
        }
        for (j, t) in zs.iter().enumerate() {
            labels[[rows, j]] = match *t {
                "0" => Label::Neg,
                "1" => Label::Pos,
                "?" => Label::Missing,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("label token {other:?} not in {{0, 1, ?}}"),
                    })
                }
            };
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Shape(format!(
            "header declares {n} rows but body has {rows}"
        )));
    }
    MaskedDataset::new(features, LabelMatrix::new(labels))
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    save_table(ds.features(), &ds.full_label_matrix(), path)
}

pub fn save_masked(ds: &MaskedDataset, path: impl AsRef<Path>) -> Result<()> {
    save_table(&ds.features, &ds.labels, path)
}

fn save_table(features: &Array2<f64>, labels: &LabelMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_table(BufWriter::new(f), features, labels)
}

/// Loads a file whose labels may contain `?`.
pub fn load_masked(path: impl AsRef<Path>) -> Result<MaskedDataset> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_table(f)
}

/// Loads a fully labeled dataset. Any `?` token is rejected.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let t = load_masked(path)?;
    into_full(t)
}

pub(crate) fn into_full(t: MaskedDataset) -> Result<Dataset> {
    if let Some(((i, j), _)) = t.labels.entries().indexed_iter().find(|(_, z)| z.is_missing()) {
        return Err(Error::Parse {
            line: i + 2,
            message: format!("label {j} is missing in a fully labeled dataset"),
        });
    }
    let labels = t.labels.entries().mapv(|z| z == Label::Pos);
    Dataset::new(t.features, labels)
}
