use std::path::PathBuf;

use clap::Args;
use salkit::io::dataset::read_dataset;
use salkit::io::format_sig;
use salkit::{fit_inlp, save_eraser, KsalEraser, LabeledDataset, SalEraser, StoredEraser};

use crate::{check_kernel_cap, check_output, require_file, usage, CliResult, FitOptions, Method};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Labeled dataset (TSV with id, y, z and feature columns).
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the fitted eraser.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
}

/// Fits the requested eraser on a centered dataset; `k` overrides the option's k.
pub fn fit_eraser(
    method: Method,
    dataset: &LabeledDataset,
    opts: &FitOptions,
    k: Option<usize>,
) -> CliResult<StoredEraser> {
    let k = k.or(opts.k);
    Ok(match method {
        Method::Sal => SalEraser::fit(dataset, opts.alpha, k)?.into(),
        Method::Ksal => {
            let k = k.ok_or_else(|| usage("--k is required for ksal"))?;
            check_kernel_cap(dataset.n(), opts.kernel_cap)?;
            KsalEraser::fit(dataset, opts.kernel_spec()?, k)?.into()
        }
        Method::Inlp => {
            fit_inlp(dataset, k.unwrap_or(opts.iterations), &opts.probe.config())?.into()
        }
    })
}

/// The TSV block printed after fitting: one value per spectrum entry, then `k`.
pub fn spectrum_block(eraser: &StoredEraser) -> String {
    let (name, values, k): (&str, Vec<f64>, usize) = match eraser {
        StoredEraser::Sal(e) => ("singular_value", e.sigma().iter().cloned().collect(), e.k()),
        StoredEraser::Ksal(e) => ("eigenvalue", e.eigenvalues().to_vec(), e.k()),
        StoredEraser::Inlp(e) => (
            "probe_accuracy",
            e.probe_accuracies().to_vec(),
            e.directions().len(),
        ),
    };
    let mut out = format!("index\t{name}\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i}\t{}\n", format_sig(*v, 10)));
    }
    out.push_str(&format!("k\t{k}\n"));
    out
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let method = args
        .fit
        .method
        .ok_or_else(|| usage("--method is required"))?;
    require_file(&args.data, "dataset")?;
    check_output(&args.out, args.force)?;
    if method == Method::Ksal && args.fit.k.is_none() {
        return Err(usage("--k is required for ksal"));
    }
    let dataset = read_dataset(&args.data, args.fit.encoding_for(Some(method)))?.center()?;
    let eraser = fit_eraser(method, &dataset, &args.fit, None)?;
    save_eraser(&args.out, &eraser)?;
    print!("{}", spectrum_block(&eraser));
    Ok(())
}
