//! File-level decisions from per-segment probabilities.
//!
//! cargo run --example voting

use mclnn::inference::{vote_with, VotingRule};

fn main() -> mclnn::Result<()> {
    let cases = [
        vec![vec![0.6, 0.4], vec![0.1, 0.9]],
        vec![vec![0.5, 0.5]],
        // two weak votes for class 0 against one confident vote for class 1
        vec![vec![0.55, 0.45], vec![0.55, 0.45], vec![0.0, 1.0]],
    ];
    for segments in &cases {
        let p = vote_with(segments, VotingRule::Probability)?;
        let m = vote_with(segments, VotingRule::Majority)?;
        println!("{segments:?}");
        println!("  probability: mean {:?} -> class {}", p.voted, p.predicted);
        println!("  majority:    share {:?} -> class {}", m.voted, m.predicted);
    }
    Ok(())
}
