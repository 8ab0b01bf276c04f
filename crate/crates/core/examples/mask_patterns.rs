//! Prints band masks as character grids (rows are features, columns are
//! hidden nodes) with their statistics.
//!
//! cargo run --example mask_patterns

use mclnn::masking::{generate_mask, mask_stats, MaskSpec};

fn show(features: usize, nodes: usize, bandwidth: usize, overlap: i64) -> mclnn::Result<()> {
    let mask = generate_mask(&MaskSpec::new(features, nodes, bandwidth, overlap)?)?;
    let stats = mask_stats(&mask);
    println!(
        "l={features} e={nodes} bw={bandwidth} ov={overlap}: {} ones, density {:.3}",
        stats.ones_total, stats.density
    );
    for r in 0..features {
        let row: String = (0..nodes).map(|c| if mask.is_set(r, c) { '#' } else { '.' }).collect();
        println!("  {row}");
    }
    println!("  ones per node: {:?}\n", stats.ones_per_column);
    Ok(())
}

fn main() -> mclnn::Result<()> {
    // bands shift down by bw - ov = 2 rows per node
    show(12, 10, 5, 3)?;
    // a gap of one row; bands wrap into the next column
    show(9, 8, 3, -1)?;
    show(12, 10, 4, 0)?;
    Ok(())
}
