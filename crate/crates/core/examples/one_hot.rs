//! One-hot encoding of a small label map and its class frequencies.
//!
//!     cargo run --example one_hot

use spsoft::{class_frequencies, one_hot_encode, LabelMap, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = Shape::unit(&[3, 4])?;
    let labels = LabelMap::new(shape, vec![0, 0, 1, 1, 0, 2, 2, 1, 0, 0, 0, 1], 3)?;
    let hot = one_hot_encode(&labels)?;
    for c in 0..hot.num_classes() {
        println!("class {c}: {:?}", hot.plane(c));
    }
    println!("frequencies: {:?}", class_frequencies(&hot));
    assert_eq!(hot.to_labels(), labels);
    Ok(())
}
