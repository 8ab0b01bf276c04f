//! Finite-difference gradient checks for every layer type and the full model.
//!
//! cargo run --example gradient_check -- [seed] [l,e,n,w]

use mclnn::gradcheck::{run_all, LayerSizes, FD_TOLERANCE};

fn main() -> mclnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args
        .next()
        .map_or(Ok(1), |s| s.parse())
        .expect("seed must be an integer");
    let sizes: LayerSizes = match args.next() {
        Some(s) => s.parse()?,
        None => LayerSizes::default(),
    };
    let reports = run_all(seed, sizes)?;
    for r in &reports {
        println!("{r}");
        if let Some((i, a, n)) = r.worst {
            println!("    worst coordinate {i}: analytic {a:.9e}, numeric {n:.9e}");
        }
    }
    let ok = reports.iter().all(|r| r.passed());
    println!(
        "tolerance {FD_TOLERANCE:e}: {}",
        if ok { "all passed" } else { "FAILED" }
    );
    Ok(())
}
