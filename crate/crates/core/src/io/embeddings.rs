//! Word-embedding text format: a `n d` header line, then one `token v_1 … v_d`
//! line per word. Tokens may not contain whitespace.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SalError};
use crate::io::{join_values, utf8_lines};

/// Significant digits written per value.
pub const EMBEDDING_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocabulary: Vec<String>,
    dim: usize,
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(vocabulary: Vec<String>, vectors: &DMatrix<f64>) -> Result<Self> {
        if vocabulary.len() != vectors.nrows() {
            return Err(SalError::Data(format!(
                "{} tokens for {} vectors",
                vocabulary.len(),
                vectors.nrows()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(SalError::Data("non-finite embedding value".into()));
        }
        let mut index = HashMap::with_capacity(vocabulary.len());
        for (i, w) in vocabulary.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(SalError::Data(format!(
                    "token '{w}' is empty or contains whitespace"
                )));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(SalError::Data(format!("duplicate token '{w}'")));
            }
        }
        let values = vectors.transpose().as_slice().to_vec();
        Ok(EmbeddingTable {
            vocabulary,
            dim: vectors.ncols(),
            values,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), self.row(i)))
    }

    /// Vectors as an n × d matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.values)
    }

    /// Same vocabulary, replaced vectors.
    pub fn with_vectors(&self, vectors: &DMatrix<f64>) -> Result<Self> {
        EmbeddingTable::new(self.vocabulary.clone(), vectors)
    }
}

pub fn parse_embeddings(bytes: &[u8]) -> Result<EmbeddingTable> {
    let lines = utf8_lines(bytes)?;
    let (_, header) = lines
        .first()
        .ok_or_else(|| SalError::parse(1, "empty file"))?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    let (n, d) = match fields.as_slice() {
        [a, b] => match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(n), Ok(d)) => (n, d),
            _ => return Err(SalError::parse(1, "header must be two integers 'n d'")),
        },
        _ => return Err(SalError::parse(1, "header must be two integers 'n d'")),
    };
    let mut vocabulary = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * d);
    let mut seen = HashMap::with_capacity(n);
    for &(line_no, line) in &lines[1..] {
        if vocabulary.len() == n {
            return Err(SalError::parse(
                line_no,
                format!("more than the {n} vectors declared in the header"),
            ));
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != d + 1 {
            let hint = if fields.len() > d + 1 {
                " (tokens may not contain whitespace)"
            } else {
                ""
            };
            return Err(SalError::parse(
                line_no,
                format!(
                    "expected a token and {d} values, found {} fields{hint}",
                    fields.len()
                ),
            ));
        }
        let token = fields[0];
        if seen.insert(token.to_string(), line_no).is_some() {
            return Err(SalError::parse(
                line_no,
                format!("duplicate token '{token}'"),
            ));
        }
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| SalError::parse(line_no, format!("'{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(SalError::parse(line_no, "non-finite value"));
            }
            values.push(v);
        }
        vocabulary.push(token.to_string());
    }
    if vocabulary.len() != n {
        return Err(SalError::parse(
            lines.len() + 1,
            format!("header declares {n} vectors, found {}", vocabulary.len()),
        ));
    }
    let m = DMatrix::from_row_slice(n, d, &values);
    EmbeddingTable::new(vocabulary, &m)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    parse_embeddings(&fs::read(path)?)
}

pub fn format_embeddings(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (w, v) in table.iter() {
        out.push_str(w);
        if !v.is_empty() {
            out.push(' ');
            out.push_str(&join_values(v, EMBEDDING_DIGITS, " "));
        }
        out.push('\n');
    }
    out
}

pub fn write_embeddings(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    fs::write(path, format_embeddings(table))?;
    Ok(())
}
