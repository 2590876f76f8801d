//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL line
//! each, and exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use salkit::io::dataset::read_dataset_table;
use salkit::metrics::{tpr_gap, tpr_rms};
use salkit::{
    apply_eraser, load_eraser, save_eraser, verify_lemma_a, Categorical, KernelSpec, KsalEraser,
    LabeledDataset, ProjectionEraser, SalEraser, StoredEraser,
};
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Centered inputs with a guarded block that is a noisy linear image of them.
fn random_dataset(seed: u64, n: usize, d: usize, dp: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, d);
    let mix = gaussian(&mut rng, d, dp);
    let z = &x * mix + gaussian(&mut rng, n, dp);
    let task = Categorical::from_values(&(0..n).map(|i| (i % 2).to_string()).collect::<Vec<_>>());
    LabeledDataset::new(x, task, z).unwrap().center().unwrap()
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let g = if m.nrows() >= m.ncols() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    let mut s: Vec<f64> = SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn kernel(spec: KernelSpec, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (x.row(i), x.row(j));
        match spec {
            KernelSpec::Linear => a.dot(&b),
            KernelSpec::Poly2 => (1.0 + a.dot(&b)).powi(2),
            KernelSpec::Rbf { gamma } => (-gamma * (a - b).norm_squared()).exp(),
        }
    })
}

fn salkit(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_salkit"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "salkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// First data row of an eval report, by column name.
fn report_value(report: &str, column: &str) -> f64 {
    let mut lines = report.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let idx = header.iter().position(|h| *h == column).unwrap();
    lines
        .next()
        .unwrap()
        .split('\t')
        .nth(idx)
        .unwrap()
        .parse()
        .unwrap()
}

fn synth(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut all = vec!["synth", "--out", s(&path)];
    all.extend_from_slice(args);
    salkit(&all);
    path
}

const PLANTED: [&str; 12] = [
    "--n",
    "2000",
    "--d",
    "50",
    "--bias-rank",
    "1",
    "--bias-strength",
    "3",
    "--task-strength",
    "3",
    "--seed",
    "7",
];

fn residual_covariance_identity() -> Outcome {
    let ds = random_dataset(0, 500, 20, 3);
    let omega = ds.inputs().tr_mul(ds.guarded()) / ds.n() as f64;
    let sigma = singular_values(&omega);
    let base = SalEraser::fit(&ds, 2.0, Some(0)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 0..=3 {
        let e = base.with_k(k).map_err(|e| e.to_string())?;
        let projected = apply_eraser(&e, ds.inputs()).map_err(|e| e.to_string())?;
        let cov = projected.tr_mul(ds.guarded()) / ds.n() as f64;
        let want = sigma.get(k).copied().unwrap_or(0.0);
        worst = worst.max((spectral(&cov) - want).abs());
    }
    ensure(
        worst <= 1e-8,
        format!("worst |‖cov‖ − σ_(k+1)| = {worst:.2e}"),
    )
}

fn planted_bias_removal() -> Outcome {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "planted.tsv", &PLANTED);
    let before = salkit(&["eval", "--data", s(&data)]);
    let after = salkit(&["eval", "--data", s(&data), "--method", "sal", "--k", "1"]);
    let (a0, a1) = (
        report_value(&before, "attribute_accuracy"),
        report_value(&after, "attribute_accuracy"),
    );
    let (t0, t1) = (
        report_value(&before, "task_accuracy"),
        report_value(&after, "task_accuracy"),
    );
    ensure(
        a0 >= 0.95 && a1 <= 0.55 && t0 - t1 <= 0.02,
        format!("attribute {a0:.4} -> {a1:.4}, task {t0:.4} -> {t1:.4}"),
    )
}

fn nonlinear_removal() -> Outcome {
    let dir = TempDir::new().unwrap();
    let data = synth(
        &dir,
        "xor.tsv",
        &["--n", "1000", "--d", "10", "--nonlinear", "--seed", "3"],
    );
    // an alpha this large never fires, so k falls back to the rank
    let fit = salkit(&[
        "fit",
        "--method",
        "sal",
        "--alpha",
        "1e300",
        "--data",
        s(&data),
        "--out",
        s(&dir.path().join("e.sal")),
    ]);
    let rank = fit
        .lines()
        .last()
        .unwrap()
        .trim_start_matches("k\t")
        .to_string();
    let linear = salkit(&[
        "eval",
        "--data",
        s(&data),
        "--method",
        "sal",
        "--k",
        &rank,
        "--kernel-probe",
        "poly2",
    ]);
    let kernel = salkit(&[
        "eval",
        "--data",
        s(&data),
        "--method",
        "ksal",
        "--kernel",
        "poly2",
        "--k",
        "2",
        "--kernel-probe",
        "poly2",
    ]);
    let after_linear = report_value(&linear, "kernel_attribute_accuracy");
    let after_kernel = report_value(&kernel, "kernel_attribute_accuracy");
    ensure(
        after_linear >= 0.9 && after_kernel <= 0.6,
        format!("poly2 probe: {after_linear:.4} after linear SAL (k={rank}), {after_kernel:.4} after kSAL-poly2 (k=2)"),
    )
}

fn kernel_linear_equivalence() -> Outcome {
    let ds = random_dataset(60, 60, 6, 1);
    let ksal = KsalEraser::fit(&ds, KernelSpec::Linear, 1).map_err(|e| e.to_string())?;
    let sal = SalEraser::fit(&ds, 2.0, Some(1)).map_err(|e| e.to_string())?;
    let projected = apply_eraser(&sal, ds.inputs()).map_err(|e| e.to_string())?;
    let gram = &projected * projected.transpose();
    let knorm = spectral(&kernel(KernelSpec::Linear, ds.inputs()));
    let err = max_abs(&(ksal.reduced_kernel() - gram));
    ensure(
        err <= 1e-6 * knorm,
        format!("max |K̂ − Gram| = {err:.2e}, bound {:.2e}", 1e-6 * knorm),
    )
}

fn reduced_kernel_closed_form() -> Outcome {
    let ds = random_dataset(50, 50, 6, 3);
    let mut worst = 0.0f64;
    for spec in [
        KernelSpec::Linear,
        KernelSpec::Poly2,
        KernelSpec::rbf(0.1).unwrap(),
    ] {
        let k_phi = kernel(spec, ds.inputs());
        let knorm = spectral(&k_phi);
        for k in [0, 1, 3] {
            let e = KsalEraser::fit(&ds, spec, k).map_err(|e| e.to_string())?;
            let w = e.w_block();
            let closed = &k_phi - &k_phi * w * w.transpose() * &k_phi;
            worst = worst.max(max_abs(&(e.reduced_kernel() - closed)) / knorm);
        }
    }
    ensure(
        worst <= 1e-8,
        format!("worst max |K̂ − closed form| / ‖K‖ = {worst:.2e}"),
    )
}

fn lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let (mut residual, mut eig_err) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let phi = gaussian(&mut rng, 5, 8);
        let psi = gaussian(&mut rng, 2, 8);
        let check = verify_lemma_a(&phi, &psi).map_err(|e| e.to_string())?;
        residual = residual.max(check.residual);
        // nonzero spectrum of K_ψK_φ is the squared singular values of ΦΨᵀ
        let sigma = singular_values(&(&phi * psi.transpose()));
        for (got, s) in check.eigenvalues.iter().zip(&sigma) {
            eig_err = eig_err.max((got - s * s).abs() / (sigma[0] * sigma[0]));
        }
    }
    ensure(
        residual <= 1e-8 && eig_err <= 1e-8,
        format!("worst residual {residual:.2e}, worst relative eigenvalue error {eig_err:.2e}"),
    )
}

fn interpolation() -> Outcome {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, "planted.tsv", &PLANTED);
    let at = |lambda: &str| {
        let r = salkit(&[
            "eval",
            "--data",
            s(&data),
            "--method",
            "sal",
            "--k",
            "1",
            "--lambda",
            lambda,
        ]);
        report_value(&r, "attribute_accuracy")
    };
    let (zero, one) = (at("0"), at("1"));
    let eraser = dir.path().join("e.sal");
    salkit(&[
        "fit",
        "--method",
        "sal",
        "--k",
        "1",
        "--data",
        s(&data),
        "--out",
        s(&eraser),
    ]);
    let out = dir.path().join("t.tsv");
    salkit(&[
        "transform",
        "--eraser",
        s(&eraser),
        "--input",
        s(&data),
        "--out",
        s(&out),
        "--lambda",
        "0",
    ]);
    let diff = (read_dataset_table(&data).unwrap().features
        - read_dataset_table(&out).unwrap().features)
        .amax();
    ensure(
        zero - one >= 0.3 && diff <= 1e-9,
        format!("attribute {zero:.4} at λ=0, {one:.4} at λ=1; λ=0 output differs by {diff:.2e}"),
    )
}

fn runtime_claim() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_salkit"))
        .env("SALKIT_THREADS", "1")
        .args([
            "bench", "--n", "74882", "--d", "768", "--dprime", "1", "--runs", "3",
        ])
        .output()
        .unwrap();
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let report = String::from_utf8(out.stdout).unwrap();
    let median = |method: &str| -> f64 {
        let line = report
            .lines()
            .find(|l| l.starts_with(&format!("{method}\t")))
            .unwrap();
        line.split('\t').nth(1).unwrap().parse().unwrap()
    };
    let (sal, inlp) = (median("sal"), median("inlp"));
    ensure(
        sal < 5.0 && sal < inlp,
        format!(
            "median fit time SAL {sal:.3} s, INLP {inlp:.1} s, ratio {:.0}",
            inlp / sal
        ),
    )
}

fn metric_fixtures() -> Outcome {
    // group 0 recovers 4/4 positives, group 1 recovers 1/4
    let labels = [1, 1, 1, 1, 1, 1, 1, 1, 0, 0];
    let preds = [1, 1, 1, 1, 1, 0, 0, 0, 0, 1];
    let groups = [0, 0, 0, 0, 1, 1, 1, 1, 0, 1];
    let gap = tpr_gap(&preds, &labels, &groups).map_err(|e| e.to_string())?;
    // class 0: 10/10 vs 7/10; class 1: 5/5 vs 3/5; rms of (0.3, 0.4)
    let (mut y, mut p, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for (class, group, total, hits) in [(0, 0, 10, 10), (0, 1, 10, 7), (1, 0, 5, 5), (1, 1, 5, 3)] {
        for i in 0..total {
            y.push(class);
            g.push(group);
            p.push(if i < hits { class } else { 1 - class });
        }
    }
    let rms = tpr_rms(&p, &y, &g).map_err(|e| e.to_string())?.rms;
    ensure(
        (gap - 0.75).abs() <= 1e-4 && (rms - 0.3536).abs() <= 1e-4,
        format!("tpr_gap {gap:.6}, tpr_rms {rms:.6}"),
    )
}

fn serialization() -> Outcome {
    let dir = TempDir::new().unwrap();
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let (n, d, dp) = (40 + 7 * i as usize, 3 + i as usize % 6, 1 + i as usize % 3);
        let e = SalEraser::fit(&random_dataset(1000 + i, n, d, dp), 2.0, None)
            .map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("e{i}.sal"));
        save_eraser(&path, &StoredEraser::Sal(e.clone())).map_err(|e| e.to_string())?;
        let StoredEraser::Sal(back) = load_eraser(&path).map_err(|e| e.to_string())? else {
            return Err("loaded a different eraser kind".into());
        };
        let kept = e.kept_basis();
        let kept_back = back.kept_basis();
        worst = worst.max(max_abs(
            &(&kept * kept.transpose() - &kept_back * kept_back.transpose()),
        ));
        worst = worst.max(max_abs(&(e.projector() - back.projector())));
    }
    ensure(
        worst <= 1e-12,
        format!("worst max |ŪŪᵀ − loaded| = {worst:.2e}"),
    )
}

type Criterion = (usize, &'static str, Option<f64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            1,
            "residual-covariance identity",
            Some(1.0),
            residual_covariance_identity,
        ),
        (2, "planted-bias removal", Some(30.0), planted_bias_removal),
        (3, "nonlinear removal", Some(120.0), nonlinear_removal),
        (
            4,
            "kernel-linear equivalence",
            Some(1.0),
            kernel_linear_equivalence,
        ),
        (
            5,
            "reduced-kernel closed form",
            Some(5.0),
            reduced_kernel_closed_form,
        ),
        (6, "feature-space lemma", Some(1.0), lemma),
        (7, "lambda interpolation", None, interpolation),
        (8, "runtime claim", None, runtime_claim),
        (9, "metric fixtures", None, metric_fixtures),
        (10, "serialization round trip", None, serialization),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == id.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, limit) {
            (Ok(d), Some(l)) if secs >= l => Err(format!("{d}; took {secs:.2} s, limit {l} s")),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {id:>2} {name} [{secs:.2} s]: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
