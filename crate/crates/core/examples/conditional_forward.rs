//! One conditional layer on a short sequence, with and without a mask.
//!
//! cargo run --example conditional_forward

use mclnn::layers::{ConditionalLayer, TransferKind};
use mclnn::masking::{generate_mask, MaskSpec};
use mclnn::{Matrix, Rng};

fn main() -> mclnn::Result<()> {
    let (features, nodes, order, frames) = (6, 4, 1, 5);
    let mut rng = Rng::new(1);
    let clnn = ConditionalLayer::init(features, nodes, order, TransferKind::Identity, None, &mut rng)?;

    // input is features x frames
    let input = Matrix::from_col_major(
        features,
        frames,
        (0..features * frames).map(|i| (i % 7) as f64 - 3.0).collect(),
    )?;
    let out = clnn.forward(&input)?;
    println!(
        "order {order}: {frames} input frames -> {} output frames ({} weight matrices of {features}x{nodes})",
        out.out.cols(),
        clnn.weights().len()
    );

    let mask = generate_mask(&MaskSpec::new(features, nodes, 3, 1)?)?;
    let mut mclnn = clnn.clone();
    mclnn.set_mask(Some(mask))?;
    let masked = mclnn.forward(&input)?;
    for t in 0..out.out.cols() {
        println!("frame {t}: clnn {:?}", out.out.column(t));
        println!("         mclnn {:?}", masked.out.column(t));
    }
    Ok(())
}
