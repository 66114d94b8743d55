//! Writes a label map and a soft stack to SVXB files and reads them back.
//!
//!     cargo run --example voxfile_roundtrip

use spsoft::voxfile::VoxFile;
use spsoft::{gaussian_soften, one_hot_encode, LabelMap, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("spsoft-voxfile-example");
    std::fs::create_dir_all(&dir)?;

    // spacing is stored as f32, so pick values it represents exactly
    let shape = Shape::new(&[4, 5], &[0.5, 0.25])?;
    let labels = LabelMap::new(shape, (0..20).map(|i| u32::from(i % 5 >= 2)).collect(), 2)?;
    let label_path = dir.join("labels.svxb");
    VoxFile::from_labels(&labels).write(&label_path)?;
    let back = VoxFile::read(&label_path)?.to_label_map(2)?;
    assert_eq!(back, labels);
    println!(
        "{}: {} bytes, labels round-trip",
        label_path.display(),
        std::fs::metadata(&label_path)?.len()
    );

    let soft = gaussian_soften(&one_hot_encode(&labels)?, 1.0)?;
    let stack_path = dir.join("soft.svxb");
    let file = VoxFile::from_stack(soft.stack());
    file.write(&stack_path)?;
    let read = VoxFile::read(&stack_path)?;
    assert_eq!(read, file);
    println!(
        "{}: dims {:?}, spacing {:?}",
        stack_path.display(),
        read.dims,
        read.spacing
    );
    Ok(())
}
