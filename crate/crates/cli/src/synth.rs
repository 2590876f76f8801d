use std::path::PathBuf;

use clap::Args;
use salkit::io::dataset::write_dataset;
use salkit::{generate_synthetic, SyntheticSpec};

use crate::{check_output, CliResult};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    /// Number of bias directions; the attribute has bias_rank + 1 classes.
    #[arg(long, default_value_t = 1)]
    pub bias_rank: usize,
    #[arg(long, default_value_t = 3.0)]
    pub bias_strength: f64,
    #[arg(long, default_value_t = 3.0)]
    pub task_strength: f64,
    /// Make the attribute the XOR of two hidden bits so no single direction predicts it.
    #[arg(long)]
    pub nonlinear: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

impl SynthArgs {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n: self.n,
            d: self.d,
            bias_rank: self.bias_rank,
            bias_strength: self.bias_strength,
            task_strength: self.task_strength,
            nonlinear: self.nonlinear,
            seed: self.seed,
            ..Default::default()
        }
    }
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    check_output(&args.out, args.force)?;
    let dataset = generate_synthetic(&args.spec())?;
    write_dataset(&args.out, &dataset)?;
    Ok(())
}
