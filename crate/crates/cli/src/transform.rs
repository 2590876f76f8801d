use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DMatrix;
use salkit::io::dataset::{read_dataset_table, write_dataset_table, DatasetTable};
use salkit::io::embeddings::{read_embeddings, write_embeddings};
use salkit::{apply_interpolated, load_eraser, StoredEraser};

use crate::{check_output, require_file, usage, CliResult};

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Fitted eraser file.
    #[arg(long)]
    pub eraser: PathBuf,
    /// Dataset TSV or embedding text file; the format is read from the header.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Removal strength in [0, 1]; 0 leaves the input unchanged.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub force: bool,
}

/// Transforms rows of raw inputs. Kernel erasers return reduced cross-kernel rows
/// against their training points, `κ(x) − λ·K_φWWᵀκ(x)`.
pub fn transform_rows(
    eraser: &StoredEraser,
    inputs: &DMatrix<f64>,
    lambda: f64,
) -> CliResult<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(usage(format!("--lambda must lie in [0, 1], got {lambda}")));
    }
    let dim = match eraser {
        StoredEraser::Sal(e) => salkit::ProjectionEraser::dim(e),
        StoredEraser::Inlp(e) => salkit::ProjectionEraser::dim(e),
        StoredEraser::Ksal(e) => e.dim(),
    };
    if inputs.ncols() != dim {
        return Err(usage(format!(
            "input has dimension {}, the eraser was fitted on dimension {dim}",
            inputs.ncols()
        )));
    }
    Ok(match eraser {
        StoredEraser::Sal(e) => apply_interpolated(e, inputs, lambda)?,
        StoredEraser::Inlp(e) => apply_interpolated(e, inputs, lambda)?,
        StoredEraser::Ksal(e) => {
            if lambda == 1.0 {
                e.reduced_cross_kernel_rows(inputs)?
            } else {
                let full = e.reduced_cross_kernel_rows(inputs)?;
                let raw = e.reduced_kernel_between(inputs, &raw_train_points(e), 0.0)?;
                &raw + (full - &raw) * lambda
            }
        }
    })
}

// training rows in the caller's (uncentered) coordinates
fn raw_train_points(e: &salkit::KsalEraser) -> DMatrix<f64> {
    let mut rows = e.train_inputs().clone();
    for mut r in rows.row_iter_mut() {
        r += e.input_mean().transpose();
    }
    rows
}

fn is_dataset(path: &Path) -> CliResult<bool> {
    use std::io::BufRead;
    let mut first = String::new();
    std::io::BufReader::new(std::fs::File::open(path)?).read_line(&mut first)?;
    Ok(first.starts_with("id\t"))
}

pub fn run(args: &TransformArgs) -> CliResult<()> {
    require_file(&args.eraser, "eraser")?;
    require_file(&args.input, "input")?;
    check_output(&args.out, args.force)?;
    let eraser = load_eraser(&args.eraser)?;
    if is_dataset(&args.input)? {
        let table = read_dataset_table(&args.input)?;
        let features = transform_rows(&eraser, &table.features, args.lambda)?;
        write_dataset_table(&args.out, &DatasetTable { features, ..table })?;
    } else {
        let table = read_embeddings(&args.input)?;
        let vectors = transform_rows(&eraser, &table.matrix(), args.lambda)?;
        let out = salkit::EmbeddingTable::new(table.vocabulary().to_vec(), &vectors)?;
        write_embeddings(&args.out, &out)?;
    }
    Ok(())
}
