//! Signed Euclidean distance to the boundary of a square, with and without
//! anisotropic spacing.
//!
//!     cargo run --example signed_distance

use spsoft::grid::{Mask, Shape};
use spsoft::sdt::{signed_edt, signed_edt_with, SdtOptions};

fn print_field(values: &[f64], width: usize) {
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:>6.2}")).collect();
        println!("{}", line.join(""));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 9;
    let data = (0..n * n)
        .map(|i| (2..7).contains(&(i / n)) && (2..7).contains(&(i % n)))
        .collect();
    let mask = Mask::new(Shape::new(&[n, n], &[2.0, 1.0])?, data)?;

    println!("pixel units:");
    print_field(signed_edt(&mask)?.values(), n);

    println!("\nmm, rows 2 mm apart:");
    let options = SdtOptions {
        use_spacing: true,
        ..SdtOptions::default()
    };
    print_field(signed_edt_with(&mask, options)?.values(), n);
    Ok(())
}
