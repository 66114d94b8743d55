//! Trains the hard, Gaussian-soft and superpixel-soft arms of the synthetic
//! experiment over ten seeds and prints the per-arm summary.
//!
//!     cargo run --release --example toy_experiment

use spsoft::toylab::{run_experiment, summarize, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::default();
    let rows = run_experiment(&config)?;
    println!(
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "arm", "dice", "vs", "hd95", "asd", "assd"
    );
    for s in summarize(&rows) {
        print!("{:<12}", s.sweep_value);
        for (mean, _) in s.stats {
            print!(" {mean:>8.4}");
        }
        println!();
    }
    Ok(())
}
