//! Versioned text serialization for fitted erasers.
//!
//! ```text
//! SALKIT v1 sal
//! d d' k alpha
//! <input mean: d values>
//! <U: d rows of d values>
//! <sigma: min(d, d') values>
//! <V: d' rows of d' values>
//! ```
//!
//! `inlp` files carry `d d' k iterations` on line 2, then the mean and `k`
//! direction rows. `ksal` files carry `n d k kernel`, the mean, `n` training
//! rows, `n` rows of the `W` block and one row of eigenvalues. Values are
//! space-separated with 17 significant digits.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SalError};
use crate::inlp::InlpEraser;
use crate::kernel::KernelSpec;
use crate::ksal::KsalEraser;
use crate::sal::SalEraser;

pub const MAGIC: &str = "SALKIT";
pub const VERSION: &str = "v1";
const DIGITS: usize = 17;

/// Any eraser that can be stored on disk.
#[derive(Debug, Clone)]
pub enum StoredEraser {
    Sal(SalEraser),
    Inlp(InlpEraser),
    Ksal(KsalEraser),
}

impl StoredEraser {
    pub fn kind(&self) -> &'static str {
        match self {
            StoredEraser::Sal(_) => "sal",
            StoredEraser::Inlp(_) => "inlp",
            StoredEraser::Ksal(_) => "ksal",
        }
    }
}

impl From<SalEraser> for StoredEraser {
    fn from(e: SalEraser) -> Self {
        StoredEraser::Sal(e)
    }
}

impl From<InlpEraser> for StoredEraser {
    fn from(e: InlpEraser) -> Self {
        StoredEraser::Inlp(e)
    }
}

impl From<KsalEraser> for StoredEraser {
    fn from(e: KsalEraser) -> Self {
        StoredEraser::Ksal(e)
    }
}

fn row_line<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    super::join_values(values, DIGITS, " ")
}

fn push_matrix(out: &mut String, m: &DMatrix<f64>) {
    for row in m.row_iter() {
        out.push_str(&row_line(row.iter()));
        out.push('\n');
    }
}

pub fn format_eraser(eraser: &StoredEraser) -> String {
    let mut out = format!("{MAGIC} {VERSION} {}\n", eraser.kind());
    match eraser {
        StoredEraser::Sal(e) => {
            let d = e.u().nrows();
            out.push_str(&format!(
                "{d} {} {} {}\n",
                e.guarded_dim(),
                e.k(),
                super::format_sig(e.alpha(), DIGITS)
            ));
            out.push_str(&row_line(
                crate::eraser::ProjectionEraser::input_mean(e).iter(),
            ));
            out.push('\n');
            push_matrix(&mut out, e.u());
            out.push_str(&row_line(e.sigma().iter()));
            out.push('\n');
            push_matrix(&mut out, e.v());
        }
        StoredEraser::Inlp(e) => {
            let mean = crate::eraser::ProjectionEraser::input_mean(e);
            out.push_str(&format!(
                "{} {} {} {}\n",
                mean.len(),
                1,
                e.directions().len(),
                e.iterations()
            ));
            out.push_str(&row_line(mean.iter()));
            out.push('\n');
            for dir in e.directions() {
                out.push_str(&row_line(dir.iter()));
                out.push('\n');
            }
        }
        StoredEraser::Ksal(e) => {
            out.push_str(&format!(
                "{} {} {} {}\n",
                e.n_train(),
                e.dim(),
                e.k(),
                e.spec()
            ));
            out.push_str(&row_line(e.input_mean().iter()));
            out.push('\n');
            push_matrix(&mut out, e.train_inputs());
            push_matrix(&mut out, e.w_block());
            out.push_str(&row_line(e.eigenvalues().iter()));
            out.push('\n');
        }
    }
    out
}

pub fn save_eraser(path: impl AsRef<Path>, eraser: &StoredEraser) -> Result<()> {
    fs::write(path, format_eraser(eraser))?;
    Ok(())
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Split<'a, char>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.iter
            .next()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .ok_or_else(|| SalError::Load(format!("file truncated while reading {what}")))
    }

    fn values(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let (no, line) = self.next(what)?;
        let vals: Vec<f64> = line
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| SalError::Load(format!("line {no}: non-numeric value in {what}")))?;
        if vals.len() != expected {
            return Err(SalError::Load(format!(
                "line {no}: {what} has {} values, expected {expected}",
                vals.len()
            )));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SalError::Load(format!(
                "line {no}: non-finite value in {what}"
            )));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values(cols, what)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}

fn as_load(err: SalError) -> SalError {
    match err {
        SalError::Load(_) | SalError::Io(_) => err,
        other => SalError::Load(other.to_string()),
    }
}

pub fn parse_eraser(text: &str) -> Result<StoredEraser> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = Lines {
        iter: body.split('\n').enumerate(),
    };
    let (_, magic) = lines.next("magic line")?;
    let parts: Vec<&str> = magic.split_ascii_whitespace().collect();
    let kind = match parts.as_slice() {
        [m, v, kind] if *m == MAGIC && *v == VERSION => *kind,
        [m, v, _] if *m == MAGIC => {
            return Err(SalError::Load(format!(
                "unsupported version '{v}', expected {VERSION}"
            )))
        }
        _ => return Err(SalError::Load(format!("bad magic line '{magic}'"))),
    };
    let (no, header) = lines.next("dimension line")?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.len() != 4 {
        return Err(SalError::Load(format!(
            "line {no}: expected 4 header fields"
        )));
    }
    let int = |i: usize| -> Result<usize> {
        fields[i]
            .parse()
            .map_err(|_| SalError::Load(format!("line {no}: '{}' is not a count", fields[i])))
    };
    let eraser = match kind {
        "sal" => {
            let (d, dp, k) = (int(0)?, int(1)?, int(2)?);
            let alpha: f64 = fields[3]
                .parse()
                .map_err(|_| SalError::Load(format!("line {no}: bad alpha '{}'", fields[3])))?;
            if dp > d || k > d {
                return Err(SalError::Load(format!(
                    "line {no}: inconsistent sizes d={d} d'={dp} k={k}"
                )));
            }
            let mean = DVector::from_vec(lines.values(d, "input mean")?);
            let u = lines.matrix(d, d, "U")?;
            let sigma = DVector::from_vec(lines.values(dp.min(d), "sigma")?);
            let v = lines.matrix(dp, dp, "V")?;
            StoredEraser::Sal(SalEraser::from_parts(u, sigma, v, k, alpha, mean).map_err(as_load)?)
        }
        "inlp" => {
            let (d, _dp, k, iterations) = (int(0)?, int(1)?, int(2)?, int(3)?);
            if k > d {
                return Err(SalError::Load(format!(
                    "line {no}: {k} directions in dimension {d}"
                )));
            }
            let mean = DVector::from_vec(lines.values(d, "input mean")?);
            let mut dirs = Vec::with_capacity(k);
            for _ in 0..k {
                dirs.push(DVector::from_vec(lines.values(d, "direction")?));
            }
            StoredEraser::Inlp(InlpEraser::from_parts(dirs, iterations, mean).map_err(as_load)?)
        }
        "ksal" => {
            let (n, d, k) = (int(0)?, int(1)?, int(2)?);
            let spec: KernelSpec = fields[3].parse().map_err(as_load)?;
            if k > n {
                return Err(SalError::Load(format!("line {no}: k={k} exceeds n={n}")));
            }
            let mean = DVector::from_vec(lines.values(d, "input mean")?);
            let train = lines.matrix(n, d, "training inputs")?;
            let w = lines.matrix(n, k, "W block")?;
            let eig = lines.values(k, "eigenvalues")?;
            StoredEraser::Ksal(KsalEraser::restore(train, spec, &w, eig, mean).map_err(as_load)?)
        }
        other => return Err(SalError::Load(format!("unknown eraser kind '{other}'"))),
    };
    if let Some((no, extra)) = lines.iter.next() {
        if !extra.trim().is_empty() {
            return Err(SalError::Load(format!(
                "line {}: unexpected trailing content",
                no + 1
            )));
        }
    }
    Ok(eraser)
}

pub fn load_eraser(path: impl AsRef<Path>) -> Result<StoredEraser> {
    let bytes = fs::read(path)?;
    let text =
        String::from_utf8(bytes).map_err(|_| SalError::Load("eraser file is not UTF-8".into()))?;
    parse_eraser(&text)
}
