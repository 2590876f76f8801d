use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use nalgebra::DMatrix;
use salkit::io::dataset::read_dataset;
use salkit::io::embeddings::read_embeddings;
use salkit::io::format_sig;
use salkit::io::pairs::read_pairs;
use salkit::kernel::gram_matrix;
use salkit::metrics::{accuracy, nearest_neighbors, similarity_correlation, tpr_gap, tpr_rms};
use salkit::{
    kernel_deviation_ratio, load_eraser, subsample, train_test_split, DualProbe, EmbeddingTable,
    KernelProbe, KernelSpec, KsalEraser, LabeledDataset, LinearProbe, SalError, StoredEraser,
};

use crate::fit::fit_eraser;
use crate::transform::transform_rows;
use crate::{
    cell, check_kernel_cap, check_output, display, opt_path, require_file, usage, CliError,
    CliResult, FitOptions, KernelFamily, Method,
};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labeled dataset; the z column supplies the guarded groups.
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluate a saved eraser instead of fitting one.
    #[arg(long, conflicts_with = "method")]
    pub eraser: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Fit and report every k from 0 to this value (needs --method).
    #[arg(long, requires = "method")]
    pub sweep_k: Option<usize>,
    /// Also train a kernel attribute probe of this family.
    #[arg(long, value_enum)]
    pub kernel_probe: Option<KernelFamily>,
    /// Fit the eraser on a random fraction of the training split only.
    #[arg(long, default_value_t = 1.0)]
    pub debias_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    /// Removal strength in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Report file; printed to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    /// Embedding table for similarity and neighbour checks.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Human-scored word pairs (needs --embeddings).
    #[arg(long, requires = "embeddings")]
    pub pairs: Option<PathBuf>,
    /// Comma-separated query words for nearest neighbours (needs --embeddings).
    #[arg(long, requires = "embeddings", value_delimiter = ',')]
    pub neighbors: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub neighbor_count: usize,
}

/// One report line.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub k: usize,
    pub task_accuracy: f64,
    pub attribute_accuracy: f64,
    pub kernel_attribute_accuracy: Option<f64>,
    pub fairness: Option<f64>,
    pub deviation_ratio: Option<f64>,
}

struct Split<'a> {
    dataset: &'a LabeledDataset,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Split<'_> {
    fn inputs(&self, idx: &[usize]) -> DMatrix<f64> {
        self.dataset.inputs().select_rows(idx)
    }

    fn task(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.dataset.task().codes[i]).collect()
    }

    fn groups(&self, idx: &[usize]) -> Vec<usize> {
        let codes = &self
            .dataset
            .attribute()
            .expect("datasets read from files are categorical")
            .codes;
        idx.iter().map(|&i| codes[i]).collect()
    }
}

struct Notes(Vec<String>);

impl Notes {
    fn add(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.0.contains(&note) {
            self.0.push(note);
        }
    }

    /// Turns undefined-metric errors into a note; everything else propagates.
    fn soft(&mut self, what: &str, r: salkit::Result<f64>) -> CliResult<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(SalError::UndefinedMetric(m)) => {
                self.add(format!("{what}: {m}"));
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn validate(args: &EvalArgs) -> CliResult<()> {
    require_file(&args.data, "dataset")?;
    if let Some(p) = &args.eraser {
        require_file(p, "eraser")?;
    }
    if let Some(p) = &args.embeddings {
        require_file(p, "embeddings")?;
    }
    if let Some(p) = &args.pairs {
        require_file(p, "pairs")?;
    }
    if let Some(p) = &args.out {
        check_output(p, args.force)?;
    }
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(usage(format!(
            "--test-fraction must lie in (0, 1), got {}",
            args.test_fraction
        )));
    }
    if !(args.debias_fraction > 0.0 && args.debias_fraction <= 1.0) {
        return Err(usage(format!(
            "--debias-fraction must lie in (0, 1], got {}",
            args.debias_fraction
        )));
    }
    if !(0.0..=1.0).contains(&args.lambda) {
        return Err(usage(format!(
            "--lambda must lie in [0, 1], got {}",
            args.lambda
        )));
    }
    if args.fit.method == Some(Method::Ksal) && args.fit.k.is_none() && args.sweep_k.is_none() {
        return Err(usage("--k or --sweep-k is required for ksal"));
    }
    Ok(())
}

fn fairness(
    task_classes: usize,
    predictions: &[usize],
    labels: &[usize],
    groups: &[usize],
) -> salkit::Result<f64> {
    let r = if task_classes == 2 {
        tpr_gap(predictions, labels, groups)
    } else {
        tpr_rms(predictions, labels, groups).map(|t| t.rms)
    };
    // more or fewer than two groups leaves the gap undefined rather than wrong
    r.map_err(|e| match e {
        SalError::Contract(m) if m.contains("group") => SalError::UndefinedMetric(m),
        other => other,
    })
}

fn eval_linear(
    split: &Split,
    eraser: Option<&StoredEraser>,
    args: &EvalArgs,
    notes: &mut Notes,
) -> CliResult<EvalRow> {
    let (xtr, xte) = (split.inputs(&split.train), split.inputs(&split.test));
    let (etr, ete, k) = match eraser {
        Some(e) => (
            transform_rows(e, &xtr, args.lambda)?,
            transform_rows(e, &xte, args.lambda)?,
            removed(e),
        ),
        None => (xtr.clone(), xte.clone(), 0),
    };
    let config = args.fit.probe.config();
    let (ytr, yte) = (split.task(&split.train), split.task(&split.test));
    let (gtr, gte) = (split.groups(&split.train), split.groups(&split.test));

    let task_probe = LinearProbe::train(&etr, &ytr, &config)?;
    let task_pred = task_probe.predict(&ete)?;
    let attribute_pred = LinearProbe::train(&etr, &gtr, &config)?.predict(&ete)?;
    let kernel_attribute_accuracy = match args.kernel_probe {
        Some(family) => {
            check_kernel_cap(etr.nrows(), args.fit.kernel_cap)?;
            let probe = KernelProbe::train(&etr, &gtr, family.spec(args.fit.gamma)?, &config)?;
            Some(accuracy(&probe.predict(&ete)?, &gte)?)
        }
        None => None,
    };
    let deviation_ratio = if etr.nrows() <= args.fit.kernel_cap {
        let before = gram_matrix(&KernelSpec::Linear, &centered(&xtr));
        let after = gram_matrix(&KernelSpec::Linear, &centered(&etr));
        notes.soft("deviation_ratio", kernel_deviation_ratio(&before, &after))?
    } else {
        notes.add("deviation_ratio: training split exceeds --kernel-cap, Gram matrices skipped");
        None
    };
    Ok(EvalRow {
        k,
        task_accuracy: accuracy(&task_pred, &yte)?,
        attribute_accuracy: accuracy(&attribute_pred, &gte)?,
        kernel_attribute_accuracy,
        fairness: notes.soft(
            "fairness",
            fairness(split.dataset.task().n_classes(), &task_pred, &yte, &gte),
        )?,
        deviation_ratio,
    })
}

fn eval_kernel(
    split: &Split,
    eraser: &KsalEraser,
    args: &EvalArgs,
    notes: &mut Notes,
) -> CliResult<EvalRow> {
    check_kernel_cap(split.train.len(), args.fit.kernel_cap)?;
    let (xtr, xte) = (split.inputs(&split.train), split.inputs(&split.test));
    // probes are linear in the debiased feature space, i.e. dual probes on the reduced kernel
    let gram = eraser.reduced_kernel_between(&xtr, &xtr, args.lambda)?;
    let cross = eraser.reduced_kernel_between(&xte, &xtr, args.lambda)?;
    let config = args.fit.probe.config();
    let (ytr, yte) = (split.task(&split.train), split.task(&split.test));
    let (gtr, gte) = (split.groups(&split.train), split.groups(&split.test));

    let task_pred = DualProbe::fit(&gram, &ytr, &config)?.predict(&cross)?;
    let attribute_accuracy = accuracy(
        &DualProbe::fit(&gram, &gtr, &config)?.predict(&cross)?,
        &gte,
    )?;
    let kernel_attribute_accuracy = match args.kernel_probe {
        Some(family) if family.spec(args.fit.gamma)? == eraser.spec() => Some(attribute_accuracy),
        Some(_) => {
            notes.add(format!(
                "kernel_attribute_accuracy: after kernel removal only the eraser's own kernel ({}) can be probed",
                eraser.spec()
            ));
            None
        }
        None => None,
    };
    let before = eraser.reduced_kernel_between(&xtr, &xtr, 0.0)?;
    Ok(EvalRow {
        k: eraser.k(),
        task_accuracy: accuracy(&task_pred, &yte)?,
        attribute_accuracy,
        kernel_attribute_accuracy,
        fairness: notes.soft(
            "fairness",
            fairness(split.dataset.task().n_classes(), &task_pred, &yte, &gte),
        )?,
        deviation_ratio: notes.soft("deviation_ratio", kernel_deviation_ratio(&before, &gram))?,
    })
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = x.row_mean();
    let mut out = x.clone();
    for mut r in out.row_iter_mut() {
        r -= &mean;
    }
    out
}

fn removed(e: &StoredEraser) -> usize {
    match e {
        StoredEraser::Sal(e) => e.k(),
        StoredEraser::Inlp(e) => e.directions().len(),
        StoredEraser::Ksal(e) => e.k(),
    }
}

fn evaluate(
    split: &Split,
    eraser: Option<&StoredEraser>,
    args: &EvalArgs,
    notes: &mut Notes,
) -> CliResult<EvalRow> {
    match eraser {
        Some(StoredEraser::Ksal(e)) => eval_kernel(split, e, args, notes),
        other => eval_linear(split, other, args, notes),
    }
}

/// Erasers to evaluate, one per report row.
fn erasers(
    args: &EvalArgs,
    fit_set: Option<&LabeledDataset>,
) -> CliResult<Vec<Option<StoredEraser>>> {
    if let Some(path) = &args.eraser {
        return Ok(vec![Some(load_eraser(path)?)]);
    }
    let (Some(method), Some(fit_set)) = (args.fit.method, fit_set) else {
        return Ok(vec![None]);
    };
    let Some(top) = args.sweep_k else {
        return Ok(vec![Some(fit_eraser(method, fit_set, &args.fit, None)?)]);
    };
    match method {
        Method::Sal => {
            let base = salkit::SalEraser::fit(fit_set, args.fit.alpha, Some(0))?;
            (0..=top)
                .map(|k| Ok(Some(base.with_k(k)?.into())))
                .collect()
        }
        _ => (0..=top)
            .map(|k| Ok(Some(fit_eraser(method, fit_set, &args.fit, Some(k))?)))
            .collect(),
    }
}

fn header(args: &EvalArgs, split: &Split, debias_size: usize) -> String {
    let f = &args.fit;
    let mut h = String::from("# salkit eval\n");
    let mut line = |key: &str, value: String| {
        let _ = writeln!(h, "# {key}\t{value}");
    };
    line("data", display(&args.data));
    line("eraser", opt_path(&args.eraser));
    line("method", f.method.map_or("-", Method::name).to_string());
    line("alpha", f.alpha.to_string());
    line("k", f.k.map_or("-".into(), |k| k.to_string()));
    line(
        "sweep_k",
        args.sweep_k.map_or("-".into(), |k| k.to_string()),
    );
    line(
        "kernel",
        f.kernel_spec().map_or("-".into(), |s| s.to_string()),
    );
    line("iterations", f.iterations.to_string());
    line(
        "encoding",
        format!("{:?}", f.encoding_for(f.method)).to_lowercase(),
    );
    line("kernel_cap", f.kernel_cap.to_string());
    line(
        "kernel_probe",
        args.kernel_probe.map_or("-".into(), |k| {
            k.spec(f.gamma).map_or("-".into(), |s| s.to_string())
        }),
    );
    line("probe_learning_rate", f.probe.learning_rate.to_string());
    line("probe_epochs", f.probe.epochs.to_string());
    line("probe_l2", f.probe.l2.to_string());
    line("lambda", args.lambda.to_string());
    line("seed", args.seed.to_string());
    line("test_fraction", args.test_fraction.to_string());
    line("debias_fraction", args.debias_fraction.to_string());
    line("train_size", split.train.len().to_string());
    line("test_size", split.test.len().to_string());
    line("debias_size", debias_size.to_string());
    h
}

fn table(rows: &[EvalRow], fairness_name: &str) -> String {
    let mut out =
        format!("k\ttask_accuracy\tattribute_accuracy\tkernel_attribute_accuracy\t{fairness_name}\tdeviation_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.k,
            cell(Some(r.task_accuracy)),
            cell(Some(r.attribute_accuracy)),
            cell(r.kernel_attribute_accuracy),
            cell(r.fairness),
            cell(r.deviation_ratio),
        );
    }
    out
}

fn embedding_blocks(
    args: &EvalArgs,
    eraser: Option<&StoredEraser>,
    notes: &mut Notes,
) -> CliResult<String> {
    let Some(path) = &args.embeddings else {
        return Ok(String::new());
    };
    let before = read_embeddings(path)?;
    let after = match eraser {
        Some(StoredEraser::Ksal(_)) => {
            notes.add("embedding checks need a linear eraser; only the original table is scored");
            None
        }
        Some(e) => Some(before.with_vectors(&transform_rows(e, &before.matrix(), args.lambda)?)?),
        None => None,
    };
    let stages: Vec<(&str, &EmbeddingTable)> = std::iter::once(("before", &before))
        .chain(after.as_ref().map(|t| ("after", t)))
        .collect();
    let mut out = String::new();
    if let Some(p) = &args.pairs {
        let pairs = read_pairs(p)?;
        out.push_str("# similarity\nstage\tspearman\tpearson\tused\tskipped\n");
        for (stage, t) in &stages {
            match similarity_correlation(t, &pairs) {
                Ok(s) => {
                    let _ = writeln!(
                        out,
                        "{stage}\t{}\t{}\t{}\t{}",
                        format_sig(s.spearman, 6),
                        format_sig(s.pearson, 6),
                        s.used,
                        s.skipped
                    );
                }
                Err(SalError::UndefinedMetric(m)) => {
                    notes.add(format!("similarity: {m}"));
                    let _ = writeln!(out, "{stage}\tNA\tNA\tNA\tNA");
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if !args.neighbors.is_empty() {
        out.push_str("# neighbors\nstage\tquery\trank\tword\tcosine\n");
        for (stage, t) in &stages {
            for q in &args.neighbors {
                for (rank, (w, c)) in nearest_neighbors(t, q, args.neighbor_count)?
                    .iter()
                    .enumerate()
                {
                    let _ = writeln!(
                        out,
                        "{stage}\t{q}\t{}\t{w}\t{}",
                        rank + 1,
                        format_sig(*c, 6)
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Runs the evaluation and returns the report text together with any notes about
/// undefined cells.
pub fn report(args: &EvalArgs) -> CliResult<(String, Vec<String>)> {
    validate(args)?;
    let dataset = read_dataset(&args.data, args.fit.encoding_for(args.fit.method))?;
    let (train, test) = train_test_split(dataset.n(), args.test_fraction, args.seed);
    if train.is_empty() || test.is_empty() {
        return Err(usage("the dataset is too small for a train/test split"));
    }
    let fit_idx: Vec<usize> = if args.debias_fraction < 1.0 {
        subsample(train.len(), args.debias_fraction, args.seed)
            .into_iter()
            .map(|i| train[i])
            .collect()
    } else {
        train.clone()
    };
    let split = Split {
        dataset: &dataset,
        train,
        test,
    };
    let fit_set = match args.fit.method {
        Some(_) => Some(dataset.subset(&fit_idx).center()?),
        None => None,
    };
    let erasers = erasers(args, fit_set.as_ref())?;
    drop(fit_set);

    let mut notes = Notes(Vec::new());
    let mut rows = Vec::with_capacity(erasers.len());
    for e in &erasers {
        rows.push(evaluate(&split, e.as_ref(), args, &mut notes)?);
    }
    let fairness_name = if dataset.task().n_classes() == 2 {
        "tpr_gap"
    } else {
        "tpr_rms"
    };
    let debias_size = if args.fit.method.is_some() {
        fit_idx.len()
    } else {
        0
    };
    let mut text = header(args, &split, debias_size);
    text.push_str(&table(&rows, fairness_name));
    let last = erasers.last().and_then(Option::as_ref);
    text.push_str(&embedding_blocks(args, last, &mut notes)?);
    Ok((text, notes.0))
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let (text, notes) = report(args)?;
    match &args.out {
        Some(p) => std::fs::write(p, text).map_err(CliError::from)?,
        None => print!("{text}"),
    }
    for n in notes {
        eprintln!("salkit: note: {n} (reported as NA)");
    }
    Ok(())
}
