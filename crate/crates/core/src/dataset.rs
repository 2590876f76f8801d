//! Labeled samples: inputs, task labels and the guarded-attribute encoding.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SalError};
use crate::linalg::column_means;

/// Absolute tolerance on column means for a dataset to count as centered.
pub const CENTERING_TOL: f64 = 1e-9;

/// Categorical column: per-sample class codes plus the class names they index.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub codes: Vec<usize>,
    pub classes: Vec<String>,
}

impl Categorical {
    /// Builds codes from raw string values; classes are sorted lexicographically.
    pub fn from_values<S: AsRef<str>>(values: &[S]) -> Self {
        let mut classes: Vec<String> = values.iter().map(|v| v.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        let codes = values
            .iter()
            .map(|v| {
                classes
                    .binary_search_by(|c| c.as_str().cmp(v.as_ref()))
                    .unwrap()
            })
            .collect();
        Categorical { codes, classes }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Categorical {
            codes: indices.iter().map(|&i| self.codes[i]).collect(),
            classes: self.classes.clone(),
        }
    }

    pub fn label(&self, i: usize) -> &str {
        &self.classes[self.codes[i]]
    }
}

/// How a categorical guarded attribute becomes the real matrix `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardedEncoding {
    /// Binary: one ±1 column (first class −1); multiclass: one-hot, then centered.
    #[default]
    Auto,
    /// One-hot indicator columns, never centered. Gives a rank-c attribute kernel
    /// for c classes, which kernel removal needs to take out more than one direction.
    OneHot,
}

impl GuardedEncoding {
    pub fn encode(self, attribute: &Categorical) -> DMatrix<f64> {
        let n = attribute.len();
        let c = attribute.n_classes();
        match self {
            GuardedEncoding::Auto if c == 2 => {
                DMatrix::from_fn(
                    n,
                    1,
                    |i, _| {
                        if attribute.codes[i] == 1 {
                            1.0
                        } else {
                            -1.0
                        }
                    },
                )
            }
            GuardedEncoding::Auto | GuardedEncoding::OneHot => {
                DMatrix::from_fn(n, c, |i, j| if attribute.codes[i] == j { 1.0 } else { 0.0 })
            }
        }
    }

    fn centers_guarded(self) -> bool {
        matches!(self, GuardedEncoding::Auto)
    }
}

/// n samples of (input row, task label, guarded row) with the means removed by [`center`].
///
/// [`center`]: LabeledDataset::center
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    ids: Vec<String>,
    inputs: DMatrix<f64>,
    task: Categorical,
    guarded: DMatrix<f64>,
    attribute: Option<Categorical>,
    encoding: GuardedEncoding,
    input_mean: DVector<f64>,
    guarded_mean: DVector<f64>,
}

impl LabeledDataset {
    /// Dataset with a real-valued guarded block (e.g. continuous or pre-encoded z).
    pub fn new(inputs: DMatrix<f64>, task: Categorical, guarded: DMatrix<f64>) -> Result<Self> {
        Self::build(inputs, task, guarded, None, GuardedEncoding::Auto)
    }

    /// Dataset whose guarded block is derived from a categorical attribute.
    pub fn from_categorical(
        inputs: DMatrix<f64>,
        task: Categorical,
        attribute: Categorical,
        encoding: GuardedEncoding,
    ) -> Result<Self> {
        if attribute.len() != inputs.nrows() {
            return Err(SalError::Data(format!(
                "{} attribute values for {} samples",
                attribute.len(),
                inputs.nrows()
            )));
        }
        let guarded = encoding.encode(&attribute);
        Self::build(inputs, task, guarded, Some(attribute), encoding)
    }

    fn build(
        inputs: DMatrix<f64>,
        task: Categorical,
        guarded: DMatrix<f64>,
        attribute: Option<Categorical>,
        encoding: GuardedEncoding,
    ) -> Result<Self> {
        let (n, d) = inputs.shape();
        if n < 2 {
            return Err(SalError::Data(format!("need at least 2 samples, got {n}")));
        }
        if task.len() != n || guarded.nrows() != n {
            return Err(SalError::Data(format!(
                "row counts disagree: inputs {n}, task {}, guarded {}",
                task.len(),
                guarded.nrows()
            )));
        }
        if guarded.ncols() > d {
            return Err(SalError::Data(format!(
                "guarded width {} exceeds input dimension {d}",
                guarded.ncols()
            )));
        }
        if inputs.iter().chain(guarded.iter()).any(|x| !x.is_finite()) {
            return Err(SalError::Data("non-finite entry".into()));
        }
        let dp = guarded.ncols();
        Ok(LabeledDataset {
            ids: (0..n).map(|i| i.to_string()).collect(),
            inputs,
            task,
            guarded,
            attribute,
            encoding,
            input_mean: DVector::zeros(d),
            guarded_mean: DVector::zeros(dp),
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(SalError::Data(format!(
                "{} ids for {} samples",
                ids.len(),
                self.n()
            )));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn guarded_dim(&self) -> usize {
        self.guarded.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn guarded(&self) -> &DMatrix<f64> {
        &self.guarded
    }

    pub fn task(&self) -> &Categorical {
        &self.task
    }

    pub fn attribute(&self) -> Option<&Categorical> {
        self.attribute.as_ref()
    }

    pub fn encoding(&self) -> GuardedEncoding {
        self.encoding
    }

    pub fn input_mean(&self) -> &DVector<f64> {
        &self.input_mean
    }

    pub fn guarded_mean(&self) -> &DVector<f64> {
        &self.guarded_mean
    }

    /// Subtracts column means from the inputs and (for centered encodings) the
    /// guarded block. Means accumulate, so centering twice keeps the original offsets.
    pub fn center(&self) -> Result<LabeledDataset> {
        if self
            .inputs
            .iter()
            .chain(self.guarded.iter())
            .any(|x| !x.is_finite())
        {
            return Err(SalError::Data("non-finite entry".into()));
        }
        let mut out = self.clone();
        let mu = column_means(&self.inputs);
        for (j, mut col) in out.inputs.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mu[j]);
        }
        out.input_mean += &mu;
        if self.encoding.centers_guarded() {
            let nu = column_means(&self.guarded);
            for (j, mut col) in out.guarded.column_iter_mut().enumerate() {
                col.add_scalar_mut(-nu[j]);
            }
            out.guarded_mean += &nu;
        }
        Ok(out)
    }

    /// True when every input column has mean within [`CENTERING_TOL`] (scaled by the
    /// column magnitude when it exceeds one).
    pub fn is_centered(&self) -> bool {
        inputs_centered(&self.inputs)
    }

    /// Rows selected by `indices`; means and encoding carry over unchanged.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let inputs = self.inputs.select_rows(indices);
        let guarded = self.guarded.select_rows(indices);
        LabeledDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            inputs,
            task: self.task.subset(indices),
            guarded,
            attribute: self.attribute.as_ref().map(|a| a.subset(indices)),
            encoding: self.encoding,
            input_mean: self.input_mean.clone(),
            guarded_mean: self.guarded_mean.clone(),
        }
    }

    /// Same labels, new inputs (e.g. after an eraser transform).
    pub fn with_inputs(&self, inputs: DMatrix<f64>) -> Result<LabeledDataset> {
        if inputs.nrows() != self.n() {
            return Err(SalError::contract(format!(
                "replacement inputs have {} rows, expected {}",
                inputs.nrows(),
                self.n()
            )));
        }
        let mut out = self.clone();
        out.input_mean = DVector::zeros(inputs.ncols());
        out.inputs = inputs;
        Ok(out)
    }
}

pub(crate) fn inputs_centered(x: &DMatrix<f64>) -> bool {
    let n = x.nrows().max(1) as f64;
    x.column_iter().all(|c| {
        let scale = c.amax().max(1.0);
        (c.sum() / n).abs() <= CENTERING_TOL * scale
    })
}

/// Seeded shuffle split into (train, test) index lists.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = ((n as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    (train, test)
}

/// Seeded subsample of `ceil(fraction * n)` indices (at least 2), in ascending order.
pub fn subsample(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let m = ((n as f64 * fraction).ceil() as usize).clamp(2.min(n), n);
    let mut out = idx[..m].to_vec();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(n: usize) -> Categorical {
        Categorical::from_values(&(0..n).map(|i| (i % 2).to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn center_two_points() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let z = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let ds = LabeledDataset::new(x, task(2), z)
            .unwrap()
            .center()
            .unwrap();
        assert_eq!(ds.inputs().as_slice(), &[-1.0, 1.0]);
        assert_eq!(ds.input_mean()[0], 2.0);
    }

    #[test]
    fn center_three_points() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        let z = DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 0.0]);
        let ds = LabeledDataset::new(x, task(3), z)
            .unwrap()
            .center()
            .unwrap();
        assert_eq!(ds.input_mean().as_slice(), &[1.0, 1.0]);
        let expected = DMatrix::from_row_slice(3, 2, &[0.0, -1.0, -1.0, 0.0, 1.0, 1.0]);
        assert_eq!(ds.inputs(), &expected);
        assert!(ds.is_centered());
    }

    #[test]
    fn zero_mean_data_unchanged() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -1.0, 2.0]);
        let z = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let ds = LabeledDataset::new(x.clone(), task(2), z).unwrap();
        let c = ds.center().unwrap();
        assert_eq!(c.inputs(), &x);
        assert_eq!(c.input_mean().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_wide_guarded_and_non_finite() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            LabeledDataset::new(x, task(2), z),
            Err(SalError::Data(_))
        ));
        let x = DMatrix::from_row_slice(2, 1, &[f64::NAN, 3.0]);
        let z = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert!(LabeledDataset::new(x, task(2), z).is_err());
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        let z = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(LabeledDataset::new(x, task(1), z).is_err());
    }

    #[test]
    fn encodings() {
        let bin = Categorical::from_values(&["m", "f", "m"]);
        assert_eq!(bin.classes, vec!["f", "m"]);
        let z = GuardedEncoding::Auto.encode(&bin);
        assert_eq!(z.as_slice(), &[1.0, -1.0, 1.0]);
        let multi = Categorical::from_values(&["a", "b", "c", "a"]);
        let x = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let ds = LabeledDataset::from_categorical(
            x.clone(),
            task(4),
            multi.clone(),
            GuardedEncoding::Auto,
        )
        .unwrap()
        .center()
        .unwrap();
        assert_eq!(ds.guarded_dim(), 3);
        for c in ds.guarded().column_iter() {
            assert!(c.sum().abs() < 1e-12);
        }
        let raw = LabeledDataset::from_categorical(x, task(4), multi, GuardedEncoding::OneHot)
            .unwrap()
            .center()
            .unwrap();
        assert_eq!(raw.guarded()[(0, 0)], 1.0);
        assert_eq!(raw.guarded_mean().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn split_is_seeded_partition() {
        let (a, b) = train_test_split(10, 0.3, 4);
        assert_eq!(b.len(), 3);
        let mut all: Vec<usize> = a.iter().chain(b.iter()).cloned().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(train_test_split(10, 0.3, 4), (a, b));
        assert_eq!(subsample(100, 0.05, 1).len(), 5);
    }
}
