//! Leakage probes: L2-regularized logistic regression, linear and kernelized.
//!
//! Training is full-batch gradient descent from zero weights with a backtracking
//! step (the step halves whenever the objective would increase), so the recorded
//! loss never goes up and identical inputs give bit-identical weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SalError};
use crate::kernel::{cross_gram, gram_matrix, KernelSpec};
use crate::linalg::{symmetric_eigen_desc, RANK_EPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
        }
    }
}

const CHECKPOINT_EVERY: usize = 10;
const MIN_SAMPLES: usize = 10;

/// How features are rescaled before optimization (always folded back into the weights).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scaling {
    /// Each column to unit standard deviation.
    PerColumn,
    /// One factor for all columns, so relative feature magnitudes are preserved.
    Global,
}

/// A trained linear classifier over the original input coordinates.
///
/// Binary problems store a single weight row (score > 0 predicts class 1);
/// multiclass problems store one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    weights: DMatrix<f64>,
    bias: DVector<f64>,
    n_classes: usize,
    config: ProbeConfig,
    train_accuracy: f64,
    loss_history: Vec<f64>,
}

impl LinearProbe {
    pub fn train(inputs: &DMatrix<f64>, labels: &[usize], config: &ProbeConfig) -> Result<Self> {
        train_scaled(inputs, labels, config, Scaling::PerColumn)
    }

    /// Weight rows in input coordinates (1 × d for binary, c × d otherwise).
    /// Trains with one shared feature scale, so the weight direction reflects
    /// the input geometry rather than per-column variances.
    pub fn train_isotropic(
        inputs: &DMatrix<f64>,
        labels: &[usize],
        config: &ProbeConfig,
    ) -> Result<Self> {
        train_scaled(inputs, labels, config, Scaling::Global)
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.config
    }

    pub fn train_accuracy(&self) -> f64 {
        self.train_accuracy
    }

    /// Objective value at epoch 0 and every tenth epoch, plus the final one.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn decision_function(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.ncols() != self.weights.ncols() {
            return Err(SalError::contract(format!(
                "inputs have dimension {}, probe expects {}",
                inputs.ncols(),
                self.weights.ncols()
            )));
        }
        let mut scores = inputs * self.weights.transpose();
        for mut row in scores.row_iter_mut() {
            row += self.bias.transpose();
        }
        Ok(scores)
    }

    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.decision_function(inputs)?))
    }
}

fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    if scores.ncols() == 1 {
        return scores
            .column(0)
            .iter()
            .map(|&s| usize::from(s > 0.0))
            .collect();
    }
    scores
        .row_iter()
        .map(|r| {
            let mut best = 0;
            for j in 1..r.len() {
                if r[j] > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn validate_labels(n: usize, labels: &[usize]) -> Result<usize> {
    if labels.len() != n {
        return Err(SalError::contract(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if n < MIN_SAMPLES {
        return Err(SalError::contract(format!(
            "probe needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(SalError::contract("probe needs at least two classes"));
    }
    Ok(n_classes)
}

fn train_scaled(
    inputs: &DMatrix<f64>,
    labels: &[usize],
    config: &ProbeConfig,
    scaling: Scaling,
) -> Result<LinearProbe> {
    let (n, d) = inputs.shape();
    let n_classes = validate_labels(n, labels)?;
    if !(config.learning_rate > 0.0) || config.l2 < 0.0 {
        return Err(SalError::contract(
            "learning rate must be positive and l2 non-negative",
        ));
    }
    let outputs = if n_classes == 2 { 1 } else { n_classes };

    let nf = n as f64;
    let mean = DVector::from_iterator(d, inputs.column_iter().map(|c| c.sum() / nf));
    let mut scale = DVector::from_iterator(
        d,
        inputs.column_iter().enumerate().map(|(j, c)| {
            let m = mean[j];
            (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt()
        }),
    );
    match scaling {
        Scaling::PerColumn => scale.iter_mut().for_each(|s| {
            if *s <= 1e-12 {
                *s = 1.0
            }
        }),
        Scaling::Global => {
            let top = scale.max();
            let g = if top > 1e-12 { top } else { 1.0 };
            scale.fill(g);
        }
    }

    let objective = |w: &DMatrix<f64>, b: &DVector<f64>| -> (f64, DMatrix<f64>) {
        let (w_eff, b_eff) = fold(w, b, &mean, &scale);
        let mut scores = inputs * w_eff.transpose();
        for mut row in scores.row_iter_mut() {
            row += b_eff.transpose();
        }
        let (loss, grad_scores) = logistic_loss(&scores, labels);
        (loss + 0.5 * config.l2 * w.norm_squared(), grad_scores)
    };

    let mut w = DMatrix::zeros(outputs, d);
    let mut b = DVector::zeros(outputs);
    let mut step = config.learning_rate;
    let (mut loss, mut grad_scores) = objective(&w, &b);
    let mut history = vec![loss];
    for epoch in 1..=config.epochs {
        if !loss.is_finite() {
            return Err(SalError::numeric("probe loss became non-finite"));
        }
        // gradient in standardized coordinates
        let xtg = inputs.tr_mul(&grad_scores);
        let gsum = DVector::from_iterator(outputs, grad_scores.column_iter().map(|c| c.sum()));
        let mut grad_w = DMatrix::zeros(outputs, d);
        for j in 0..outputs {
            for f in 0..d {
                grad_w[(j, f)] =
                    (xtg[(f, j)] - mean[f] * gsum[j]) / scale[f] + config.l2 * w[(j, f)];
            }
        }
        let mut accepted = false;
        for _ in 0..40 {
            let w_new = &w - &grad_w * step;
            let b_new = &b - &gsum * step;
            let (new_loss, new_grad) = objective(&w_new, &b_new);
            if new_loss.is_finite() && new_loss <= loss {
                w = w_new;
                b = b_new;
                loss = new_loss;
                grad_scores = new_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if epoch % CHECKPOINT_EVERY == 0 || epoch == config.epochs {
            history.push(loss);
        }
        if !accepted {
            // no descent step exists at this resolution: stationary point
            if epoch % CHECKPOINT_EVERY != 0 && epoch != config.epochs {
                history.push(loss);
            }
            break;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(SalError::numeric("probe weights became non-finite"));
    }
    let (weights, bias) = fold(&w, &b, &mean, &scale);
    let mut probe = LinearProbe {
        weights,
        bias,
        n_classes,
        config: *config,
        train_accuracy: 0.0,
        loss_history: history,
    };
    let preds = probe.predict(inputs)?;
    probe.train_accuracy = preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / nf;
    Ok(probe)
}

/// Maps standardized-space parameters to input-space weights and bias.
fn fold(
    w: &DMatrix<f64>,
    b: &DVector<f64>,
    mean: &DVector<f64>,
    scale: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut w_eff = w.clone();
    for (f, mut col) in w_eff.column_iter_mut().enumerate() {
        col /= scale[f];
    }
    let b_eff = b - &w_eff * mean;
    (w_eff, b_eff)
}

/// Mean cross-entropy and its gradient with respect to the scores.
fn logistic_loss(scores: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    let n = scores.nrows() as f64;
    let mut grad = DMatrix::zeros(scores.nrows(), scores.ncols());
    let mut loss = 0.0;
    if scores.ncols() == 1 {
        for (i, &l) in labels.iter().enumerate() {
            let s = scores[(i, 0)];
            let y = if l == 1 { 1.0 } else { -1.0 };
            // softplus(−y·s)
            let m = -y * s;
            loss += if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
            let p = 1.0 / (1.0 + (-s).exp());
            grad[(i, 0)] = (p - if l == 1 { 1.0 } else { 0.0 }) / n;
        }
    } else {
        for (i, &l) in labels.iter().enumerate() {
            let row = scores.row(i);
            let top = row.max();
            let denom: f64 = row.iter().map(|s| (s - top).exp()).sum();
            loss += top + denom.ln() - row[l];
            for j in 0..row.len() {
                let p = (row[j] - top).exp() / denom;
                grad[(i, j)] = (p - if j == l { 1.0 } else { 0.0 }) / n;
            }
        }
    }
    (loss / n, grad)
}

/// Kernel logistic regression over a precomputed training Gram matrix.
///
/// The Gram matrix is factored as `K = V Λ Vᵀ`; training runs on the exact
/// feature coordinates `V Λ^{1/2}` and the solution is stored as dual weights,
/// so scores for new points are `κ(x)ᵀ α + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualProbe {
    dual_weights: DMatrix<f64>,
    bias: DVector<f64>,
    n_classes: usize,
    train_accuracy: f64,
    loss_history: Vec<f64>,
}

impl DualProbe {
    pub fn fit(gram: &DMatrix<f64>, labels: &[usize], config: &ProbeConfig) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n {
            return Err(SalError::contract("Gram matrix must be square"));
        }
        validate_labels(n, labels)?;
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(SalError::numeric("Gram matrix has non-finite entries"));
        }
        let (vals, vecs) = symmetric_eigen_desc(gram);
        let top = vals.iter().cloned().fold(0.0, f64::max);
        let r = vals.iter().filter(|&&l| l > RANK_EPS * top).count();
        let (features, to_dual) = if r == 0 {
            (DMatrix::zeros(n, 1), DMatrix::zeros(n, 1))
        } else {
            let v = vecs.columns(0, r);
            let sq = vals.rows(0, r).map(f64::sqrt);
            let features = v * DMatrix::from_diagonal(&sq);
            let to_dual = v * DMatrix::from_diagonal(&sq.map(|s| 1.0 / s));
            (features, to_dual)
        };
        let linear = train_scaled(&features, labels, config, Scaling::Global)?;
        Ok(DualProbe {
            dual_weights: to_dual * linear.weights.transpose(),
            bias: linear.bias.clone(),
            n_classes: linear.n_classes,
            train_accuracy: linear.train_accuracy,
            loss_history: linear.loss_history,
        })
    }

    /// `n × outputs` dual coefficients.
    pub fn dual_weights(&self) -> &DMatrix<f64> {
        &self.dual_weights
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn train_accuracy(&self) -> f64 {
        self.train_accuracy
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// Scores from cross-kernel rows (`m × n`, kernel values against training points).
    pub fn decision_function(&self, cross: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if cross.ncols() != self.dual_weights.nrows() {
            return Err(SalError::contract(format!(
                "cross kernel has {} columns, probe was trained on {} points",
                cross.ncols(),
                self.dual_weights.nrows()
            )));
        }
        let mut scores = cross * &self.dual_weights;
        for mut row in scores.row_iter_mut() {
            row += self.bias.transpose();
        }
        Ok(scores)
    }

    pub fn predict(&self, cross: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.decision_function(cross)?))
    }
}

/// A kernel probe that keeps its training inputs to evaluate `κ(x)` for new points.
#[derive(Debug, Clone)]
pub struct KernelProbe {
    spec: KernelSpec,
    train_inputs: DMatrix<f64>,
    model: DualProbe,
    config: ProbeConfig,
}

impl KernelProbe {
    pub fn train(
        inputs: &DMatrix<f64>,
        labels: &[usize],
        spec: KernelSpec,
        config: &ProbeConfig,
    ) -> Result<Self> {
        let gram = gram_matrix(&spec, inputs);
        let model = DualProbe::fit(&gram, labels, config)?;
        Ok(KernelProbe {
            spec,
            train_inputs: inputs.clone(),
            model,
            config: *config,
        })
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.config
    }

    pub fn dual_weights(&self) -> &DMatrix<f64> {
        self.model.dual_weights()
    }

    pub fn train_accuracy(&self) -> f64 {
        self.model.train_accuracy()
    }

    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<Vec<usize>> {
        let cross = cross_gram(&self.spec, inputs, &self.train_inputs)?;
        self.model.predict(&cross)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize) -> (DMatrix<f64>, Vec<usize>) {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(n, 2, |i, j| {
            let base = if labels[i] == 1 { 2.0 } else { -2.0 };
            base * if j == 0 { 1.0 } else { 0.3 } + ((i * 7 + j * 3) as f64).sin() * 0.5
        });
        (x, labels)
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(100);
        let probe = LinearProbe::train(&x, &y, &ProbeConfig::default()).unwrap();
        assert!(probe.train_accuracy() >= 0.99);
        let h = probe.loss_history();
        assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    }

    #[test]
    fn rejects_single_class_and_tiny_data() {
        let x = DMatrix::zeros(20, 2);
        assert!(LinearProbe::train(&x, &[0; 20], &ProbeConfig::default()).is_err());
        let x = DMatrix::zeros(4, 2);
        assert!(LinearProbe::train(&x, &[0, 1, 0, 1], &ProbeConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let (x, y) = blobs(60);
        let a = LinearProbe::train(&x, &y, &ProbeConfig::default()).unwrap();
        let b = LinearProbe::train(&x, &y, &ProbeConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multiclass_softmax() {
        let n = 90;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let x = DMatrix::from_fn(n, 2, |i, j| {
            let angle = labels[i] as f64 * 2.0 * std::f64::consts::PI / 3.0;
            let c = if j == 0 { angle.cos() } else { angle.sin() };
            3.0 * c + ((i * 5 + j) as f64).cos() * 0.3
        });
        let probe = LinearProbe::train(&x, &labels, &ProbeConfig::default()).unwrap();
        assert_eq!(probe.weights().nrows(), 3);
        assert!(probe.train_accuracy() > 0.95);
    }

    #[test]
    fn dual_probe_on_linear_gram() {
        let (x, y) = blobs(80);
        let probe =
            KernelProbe::train(&x, &y, KernelSpec::Linear, &ProbeConfig::default()).unwrap();
        let preds = probe.predict(&x).unwrap();
        let acc = preds.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 80.0;
        assert!(acc >= 0.99);
        assert!((acc - probe.train_accuracy()).abs() < 1e-12);
    }
}
