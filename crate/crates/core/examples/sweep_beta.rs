//! Sweeps the soft-label weight β on a reduced configuration and prints the
//! summary CSV.
//!
//!     cargo run --release --example sweep_beta

use spsoft::toylab::{summarize, summary_csv, sweep_beta, ExperimentConfig, DEFAULT_BETAS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig {
        seeds: (0..3).collect(),
        ..ExperimentConfig::default()
    };
    let rows = sweep_beta(&config, &DEFAULT_BETAS)?;
    print!("{}", summary_csv(&summarize(&rows)));
    Ok(())
}
