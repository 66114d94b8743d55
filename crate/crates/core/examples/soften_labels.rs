//! Superpixel softening next to the Gaussian baseline on a one-row example.
//!
//!     cargo run --example soften_labels

use spsoft::{gaussian_soften, one_hot_encode, soften, LabelMap, Shape, SuperpixelMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = Shape::unit(&[1, 6])?;
    let labels = LabelMap::new(shape.clone(), vec![0, 0, 1, 1, 1, 0], 2)?;
    let hard = one_hot_encode(&labels)?;

    // one block covering the row: it straddles the boundary of both classes
    let single = SuperpixelMap::new(shape.clone(), vec![0; 6])?;
    let raw = soften(&hard, &single, false)?;
    println!("single block, class 1 raw:  {:?}", raw.plane(1));

    // blocks aligned with the annotation keep the hard labels
    let aligned = SuperpixelMap::new(shape, vec![0, 0, 1, 1, 1, 2])?;
    println!(
        "aligned blocks, class 1:    {:?}",
        soften(&hard, &aligned, true)?.plane(1)
    );

    println!(
        "gaussian sigma 1, class 1:  {:?}",
        gaussian_soften(&hard, 1.0)?.plane(1)
    );
    Ok(())
}
