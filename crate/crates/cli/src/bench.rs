use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use salkit::io::format_sig;
use salkit::{
    fit_inlp, generate_synthetic, GuardedEncoding, ProbeConfig, SalEraser, SyntheticSpec,
};

use crate::{check_output, usage, CliResult};

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 300)]
    pub d: usize,
    /// Guarded-attribute width: 1 is a binary attribute, m > 1 an m-class one-hot.
    #[arg(long, default_value_t = 1)]
    pub dprime: usize,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    #[arg(long, default_value_t = 10)]
    pub inlp_iterations: usize,
    /// Training epochs of each INLP probe.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timing report; printed to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timings {
    pub sal: Vec<f64>,
    pub inlp: Vec<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

impl Timings {
    pub fn sal_median(&self) -> f64 {
        median(&self.sal)
    }

    pub fn inlp_median(&self) -> f64 {
        median(&self.inlp)
    }
}

fn spec(args: &BenchArgs) -> SyntheticSpec {
    // a binary attribute encodes to one column; m classes need m indicator columns
    let (bias_rank, encoding) = if args.dprime == 1 {
        (1, GuardedEncoding::Auto)
    } else {
        (args.dprime - 1, GuardedEncoding::OneHot)
    };
    SyntheticSpec {
        n: args.n,
        d: args.d,
        bias_rank,
        seed: args.seed,
        encoding,
        ..Default::default()
    }
}

/// Times both fits on a centered synthetic dataset. Generation and centering are
/// not timed.
pub fn measure(args: &BenchArgs) -> CliResult<Timings> {
    if args.runs == 0 {
        return Err(usage("--runs must be positive"));
    }
    if args.dprime == 0 {
        return Err(usage("--dprime must be positive"));
    }
    let dataset = generate_synthetic(&spec(args))?.center()?;
    let config = ProbeConfig {
        epochs: args.epochs,
        ..Default::default()
    };
    let mut t = Timings {
        sal: Vec::new(),
        inlp: Vec::new(),
    };
    for _ in 0..args.runs {
        let start = Instant::now();
        let e = SalEraser::fit(&dataset, 2.0, None)?;
        t.sal.push(start.elapsed().as_secs_f64());
        drop(e);
        let start = Instant::now();
        let e = fit_inlp(&dataset, args.inlp_iterations, &config)?;
        t.inlp.push(start.elapsed().as_secs_f64());
        drop(e);
    }
    Ok(t)
}

pub fn format_report(args: &BenchArgs, t: &Timings) -> String {
    let mut out = String::from("# salkit bench\n");
    for (k, v) in [
        ("n", args.n.to_string()),
        ("d", args.d.to_string()),
        ("dprime", args.dprime.to_string()),
        ("runs", args.runs.to_string()),
        ("inlp_iterations", args.inlp_iterations.to_string()),
        ("epochs", args.epochs.to_string()),
        ("seed", args.seed.to_string()),
        ("threads", rayon::current_num_threads().to_string()),
    ] {
        let _ = writeln!(out, "# {k}\t{v}");
    }
    out.push_str("method\tmedian_seconds");
    for i in 1..=t.sal.len() {
        let _ = write!(out, "\trun_{i}");
    }
    out.push('\n');
    for (name, runs) in [("sal", &t.sal), ("inlp", &t.inlp)] {
        let _ = write!(out, "{name}\t{}", format_sig(median(runs), 6));
        for r in runs {
            let _ = write!(out, "\t{}", format_sig(*r, 6));
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "# inlp_over_sal\t{}",
        format_sig(t.inlp_median() / t.sal_median(), 6)
    );
    out
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    if let Some(p) = &args.out {
        check_output(p, args.force)?;
    }
    let t = measure(args)?;
    let text = format_report(args, &t);
    match &args.out {
        Some(p) => std::fs::write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}
