//! Evaluates the combined loss on random logits and checks one gradient
//! entry against a central difference.
//!
//!     cargo run --example loss_gradients

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spsoft::losses::{class_weights_enet, combined_loss, LossWeights};
use spsoft::{class_frequencies, one_hot_encode, soften, ClassStack, LabelMap, Shape, SuperpixelMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shape = Shape::unit(&[6, 6])?;
    let labels: Vec<u32> = (0..36).map(|i| u32::from(i % 6 >= 3) + u32::from(i / 6 >= 4)).collect();
    let hard = one_hot_encode(&LabelMap::new(shape.clone(), labels, 3)?)?;
    let blocks = SuperpixelMap::new(
        shape.clone(),
        (0..36).map(|i| ((i / 6) / 2 * 3 + (i % 6) / 2) as u32).collect(),
    )?;
    let soft = soften(&hard, &blocks, true)?;

    let logits = ClassStack::new(shape, 3, (0..108).map(|_| rng.gen_range(-2.0..2.0)).collect())?;
    let weights = LossWeights {
        alpha: 1.0,
        beta: 1.0,
        class_weights: class_weights_enet(&class_frequencies(&hard)),
    };
    let loss = combined_loss(&hard, &soft, &logits, &weights)?;
    println!(
        "ce {:.6}  dice {:.6}  kl {:.6}  total {:.6}",
        loss.ce, loss.dice, loss.kl, loss.total
    );

    let k = 40;
    let h = 1e-5;
    let at = |delta: f64| -> Result<f64, spsoft::Error> {
        let mut z = logits.clone();
        z.data_mut()[k] += delta;
        Ok(combined_loss(&hard, &soft, &z, &weights)?.total)
    };
    let numeric = (at(h)? - at(-h)?) / (2.0 * h);
    println!(
        "d total / d z[{k}]: analytic {:.9}, central difference {:.9}",
        loss.grad.data()[k],
        numeric
    );
    Ok(())
}
