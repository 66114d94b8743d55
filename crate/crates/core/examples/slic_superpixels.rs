//! Over-segments a synthetic two-tone image and prints the block map.
//!
//!     cargo run --example slic_superpixels

use spsoft::{slic_segment, Grid, Shape, SlicParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (h, w) = (16, 24);
    let shape = Shape::unit(&[h, w])?;
    // a bright disk on a dark background
    let values = (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as f64 - 7.5, (i % w) as f64 - 11.5);
            if y * y + x * x < 36.0 {
                0.9
            } else {
                0.1
            }
        })
        .collect();
    let image = Grid::new(shape, values)?;
    let params = SlicParams {
        target_count: 12,
        ..SlicParams::default()
    };
    let sp = slic_segment(&image, &params)?;
    println!("{} superpixels", sp.num_blocks());
    for row in sp.block_ids().chunks(w) {
        let line: Vec<String> = row.iter().map(|id| format!("{id:>2}")).collect();
        println!("{}", line.join(" "));
    }
    Ok(())
}
