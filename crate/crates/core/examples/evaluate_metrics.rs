//! Dice, VS and surface distances for a square and a shifted copy.
//!
//!     cargo run --example evaluate_metrics

use spsoft::metrics::evaluate_labels;
use spsoft::{LabelMap, Shape};

fn square(n: usize, top: usize, left: usize, side: usize) -> Vec<u32> {
    (0..n * n)
        .map(|i| u32::from((top..top + side).contains(&(i / n)) && (left..left + side).contains(&(i % n))))
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 12;
    let shape = Shape::unit(&[n, n])?;
    let truth = LabelMap::new(shape.clone(), square(n, 3, 2, 4), 2)?;
    let pred = LabelMap::new(shape, square(n, 3, 4, 4), 2)?;
    let report = evaluate_labels(&pred, &truth)?;
    println!("class   dice     vs   hd95    asd   assd");
    for (c, row) in report.per_class.iter().enumerate() {
        let cells: Vec<String> = row
            .values()
            .iter()
            .map(|v| format!("{:>6.3}", v.unwrap_or(f64::NAN)))
            .collect();
        println!("{c:>5} {}", cells.join(" "));
    }
    Ok(())
}
