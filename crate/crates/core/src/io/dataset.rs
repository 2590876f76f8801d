//! Tab-separated datasets with header `id y z x_0 … x_{d-1}`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::{Categorical, GuardedEncoding, LabeledDataset};
use crate::error::{Result, SalError};
use crate::io::{join_values, utf8_lines};

/// Significant digits for feature values; enough to round-trip an f64.
pub const DATASET_DIGITS: usize = 17;

/// Raw columns of a dataset file before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub ids: Vec<String>,
    pub task: Vec<String>,
    pub attribute: Vec<String>,
    pub features: DMatrix<f64>,
}

impl DatasetTable {
    pub fn into_dataset(self, encoding: GuardedEncoding) -> Result<LabeledDataset> {
        let task = Categorical::from_values(&self.task);
        let attribute = Categorical::from_values(&self.attribute);
        LabeledDataset::from_categorical(self.features, task, attribute, encoding)?
            .with_ids(self.ids)
    }
}

pub fn parse_dataset_table(bytes: &[u8]) -> Result<DatasetTable> {
    let lines = utf8_lines(bytes)?;
    let (_, header) = lines
        .first()
        .ok_or_else(|| SalError::parse(1, "empty file"))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 4 || cols[..3] != ["id", "y", "z"] {
        return Err(SalError::parse(
            1,
            "header must start with 'id<TAB>y<TAB>z' followed by feature columns",
        ));
    }
    for (j, name) in cols[3..].iter().enumerate() {
        if *name != format!("x_{j}") {
            return Err(SalError::parse(
                1,
                format!("feature column {j} should be named x_{j}, found '{name}'"),
            ));
        }
    }
    let d = cols.len() - 3;
    let mut ids = Vec::new();
    let mut task = Vec::new();
    let mut attribute = Vec::new();
    let mut values = Vec::new();
    for &(line_no, line) in &lines[1..] {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != d + 3 {
            return Err(SalError::parse(
                line_no,
                format!("expected {} columns, found {}", d + 3, fields.len()),
            ));
        }
        ids.push(fields[0].to_string());
        task.push(fields[1].to_string());
        attribute.push(fields[2].to_string());
        for f in &fields[3..] {
            let v: f64 = f
                .parse()
                .map_err(|_| SalError::parse(line_no, format!("'{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(SalError::parse(line_no, "non-finite feature value"));
            }
            values.push(v);
        }
    }
    let n = ids.len();
    Ok(DatasetTable {
        ids,
        task,
        attribute,
        features: DMatrix::from_row_slice(n, d, &values),
    })
}

pub fn read_dataset(path: impl AsRef<Path>, encoding: GuardedEncoding) -> Result<LabeledDataset> {
    parse_dataset_table(&fs::read(path)?)?.into_dataset(encoding)
}

pub fn read_dataset_table(path: impl AsRef<Path>) -> Result<DatasetTable> {
    parse_dataset_table(&fs::read(path)?)
}

pub fn format_dataset_table(table: &DatasetTable) -> String {
    let d = table.features.ncols();
    let mut out = String::from("id\ty\tz");
    for j in 0..d {
        out.push_str(&format!("\tx_{j}"));
    }
    out.push('\n');
    for (i, row) in table.features.row_iter().enumerate() {
        out.push_str(&table.ids[i]);
        out.push('\t');
        out.push_str(&table.task[i]);
        out.push('\t');
        out.push_str(&table.attribute[i]);
        if d > 0 {
            out.push('\t');
            out.push_str(&join_values(row.iter(), DATASET_DIGITS, "\t"));
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset_table(path: impl AsRef<Path>, table: &DatasetTable) -> Result<()> {
    fs::write(path, format_dataset_table(table))?;
    Ok(())
}

/// Writes a dataset with a categorical attribute, restoring the input mean.
pub fn write_dataset(path: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<()> {
    let attribute = dataset.attribute().ok_or_else(|| {
        SalError::contract("only datasets with a categorical attribute can be written")
    })?;
    let mut features = dataset.inputs().clone();
    for mut row in features.row_iter_mut() {
        row += dataset.input_mean().transpose();
    }
    let table = DatasetTable {
        ids: dataset.ids().to_vec(),
        task: (0..dataset.n())
            .map(|i| dataset.task().label(i).to_string())
            .collect(),
        attribute: (0..dataset.n())
            .map(|i| attribute.label(i).to_string())
            .collect(),
        features,
    };
    write_dataset_table(path, &table)
}
