//! Spectral attribute removal: linear and kernel erasers, INLP and probe
//! baselines, fairness and similarity metrics, and text file formats.

pub mod dataset;
pub mod eigen;
pub mod eraser;
pub mod error;
pub mod inlp;
pub mod io;
pub mod kernel;
pub mod ksal;
pub mod linalg;
pub mod metrics;
pub mod probe;
pub mod sal;
pub mod synth;

pub use dataset::{subsample, train_test_split, Categorical, GuardedEncoding, LabeledDataset};
pub use eraser::{
    apply_eraser, apply_interpolated, erase_one, interpolated_projector, ProjectionEraser,
};
pub use error::{Result, SalError};
pub use inlp::{fit_inlp, InlpEraser};
pub use io::embeddings::EmbeddingTable;
pub use io::eraser::{load_eraser, save_eraser, StoredEraser};
pub use kernel::KernelSpec;
pub use ksal::{kernel_deviation_ratio, verify_lemma_a, KsalEraser};
pub use probe::{DualProbe, KernelProbe, LinearProbe, ProbeConfig};
pub use sal::{compute_cross_covariance, select_k, CrossCovariance, SalEraser};
pub use synth::{generate_synthetic, SyntheticSpec};
