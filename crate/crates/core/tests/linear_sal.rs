mod common;

use common::{held_out_accuracy, max_abs, random_dataset, select, singular_values, spectral};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use salkit::{
    apply_eraser, compute_cross_covariance, generate_synthetic, train_test_split, LabeledDataset,
    ProjectionEraser, SalEraser, SyntheticSpec,
};

fn identity_error(m: &DMatrix<f64>) -> f64 {
    let g = m.tr_mul(m);
    max_abs(&(g - DMatrix::identity(m.ncols(), m.ncols())))
}

#[test]
fn residual_covariance_matches_next_singular_value() {
    let ds = random_dataset(0, 500, 20, 3);
    let omega = compute_cross_covariance(&ds).unwrap().omega;
    let sigma = singular_values(&omega);
    let base = SalEraser::fit(&ds, 2.0, Some(0)).unwrap();
    for k in 0..=3 {
        let e = base.with_k(k).unwrap();
        // independent recomputation of the projected cross-covariance
        let p = e.projector();
        let projected = ds.inputs() * &p;
        let cov = projected.tr_mul(ds.guarded()) / ds.n() as f64;
        let want = sigma.get(k).copied().unwrap_or(0.0);
        assert!((spectral(&cov) - want).abs() <= 1e-8, "k={k}");
        assert!(
            (e.residual_covariance(&ds).unwrap() - want).abs() <= 1e-8,
            "k={k}"
        );
    }
}

#[test]
fn planted_rank_one_bias_fully_removed() {
    let spec = SyntheticSpec {
        seed: 7,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec).unwrap().center().unwrap();
    let e = SalEraser::fit(&ds, 2.0, Some(1)).unwrap();
    assert!(e.residual_covariance(&ds).unwrap() < 1e-8);
}

#[test]
fn leakage_is_monotone_in_k() {
    let spec = SyntheticSpec {
        n: 2000,
        d: 30,
        bias_rank: 3,
        bias_strength: 2.0,
        seed: 5,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let labels = ds.attribute().unwrap().codes.clone();
    let (train, test) = train_test_split(ds.n(), 0.3, 1);
    let fit_on = ds.subset(&train).center().unwrap();
    let eraser = SalEraser::fit(&fit_on, 2.0, Some(0)).unwrap();
    assert_eq!(eraser.rank(), 3);
    let mut previous = f64::INFINITY;
    for k in 0..=3 {
        let e = eraser.with_k(k).unwrap();
        let tr = apply_eraser(&e, &ds.inputs().select_rows(&train)).unwrap();
        let te = apply_eraser(&e, &ds.inputs().select_rows(&test)).unwrap();
        let acc = held_out_accuracy(&tr, &select(&labels, &train), &te, &select(&labels, &test));
        assert!(acc <= previous + 0.02, "k={k}: {acc} after {previous}");
        previous = acc;
    }
    assert!(
        previous < 0.35,
        "four balanced classes should end near chance, got {previous}"
    );
}

#[test]
fn batch_apply_matches_single_rows_across_thread_counts() {
    let ds = random_dataset(4, 300, 12, 2);
    let e = SalEraser::fit(&ds, 2.0, Some(2)).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| apply_eraser(&e, ds.inputs()).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one, many);
    for i in [0, 17, 299] {
        let row: Vec<f64> = ds.inputs().row(i).iter().cloned().collect();
        let single = salkit::erase_one(&e, &row, 1.0).unwrap();
        assert_eq!(one.row(i).iter().cloned().collect::<Vec<_>>(), single);
        let via_projector = e.project_inplace(&row).unwrap();
        assert!((DVector::from_vec(single) - via_projector).amax() < 1e-10);
    }
}

fn dataset_strategy() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 20usize..80, 2usize..9)
        .prop_flat_map(|(seed, n, d)| (Just(seed), Just(n), Just(d), 1..=d.min(4)))
}

fn build((seed, n, d, dp): (u64, usize, usize, usize)) -> LabeledDataset {
    random_dataset(seed, n, d, dp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factors_are_orthonormal_and_reconstruct(params in dataset_strategy()) {
        let ds = build(params);
        let omega = compute_cross_covariance(&ds).unwrap().omega;
        let e = SalEraser::fit(&ds, 2.0, None).unwrap();
        prop_assert!(identity_error(e.u()) <= 1e-8);
        prop_assert!(identity_error(e.v()) <= 1e-8);
        let (d, dp) = omega.shape();
        let mut s = DMatrix::zeros(d, dp);
        for i in 0..dp.min(d) {
            s[(i, i)] = e.sigma()[i];
        }
        prop_assert!(max_abs(&(e.u() * s * e.v().transpose() - &omega)) <= 1e-8);
        prop_assert!(e.sigma().as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn covariance_identity_for_every_k(params in dataset_strategy()) {
        let ds = build(params);
        let base = SalEraser::fit(&ds, 2.0, Some(0)).unwrap();
        let sigma = base.sigma().clone();
        for k in 0..=base.rank() {
            let e = base.with_k(k).unwrap();
            let want = if k < base.rank() { sigma[k] } else { 0.0 };
            prop_assert!((e.residual_covariance(&ds).unwrap() - want).abs() <= 1e-8);
        }
    }

    #[test]
    fn projector_is_symmetric_idempotent_and_contracting(
        params in dataset_strategy(),
        x in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        let ds = build(params);
        let e = SalEraser::fit(&ds, 1.5, None).unwrap();
        let p = e.projector();
        prop_assert!(max_abs(&(&p - p.transpose())) <= 1e-10);
        prop_assert!(max_abs(&(&p * &p - &p)) <= 1e-10);
        let v = DVector::from_iterator(e.dim(), x.iter().cloned().cycle().take(e.dim()));
        prop_assert!((&p * &v).norm() <= v.norm() + 1e-12);
        let once = e.project_inplace(v.as_slice()).unwrap();
        let twice = e.project_inplace(once.as_slice()).unwrap();
        prop_assert!((once - twice).amax() <= 1e-10);
    }

    #[test]
    fn scaling_inputs_scales_sigma_and_keeps_spans(params in dataset_strategy(), c in 0.1f64..20.0) {
        let ds = build(params);
        let scaled = ds.with_inputs(ds.inputs() * c).unwrap();
        let a = SalEraser::fit(&ds, 2.0, None).unwrap();
        let b = SalEraser::fit(&scaled, 2.0, Some(a.k())).unwrap();
        let top = a.sigma()[0];
        for (sa, sb) in a.sigma().iter().zip(b.sigma().iter()) {
            prop_assert!((sa * c - sb).abs() <= 1e-9 * top * c.max(1.0));
        }
        // spans compared through projectors; skip when a gap in sigma at k is too small
        let gap_ok = a.k() == 0 || a.k() >= a.sigma().len() || a.sigma()[a.k() - 1] - a.sigma()[a.k()] > 1e-6 * top;
        if gap_ok {
            prop_assert!(max_abs(&(a.projector() - b.projector())) <= 1e-6);
        }
    }
}
