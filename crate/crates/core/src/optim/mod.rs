//! Loss, ADAM, z-scoring and the training loop.

mod adam;
mod standardize;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use standardize::{Standardizer, STD_FLOOR};
pub use train::{train, EpochRecord, History, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};

/// Floor applied to the target probability before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Categorical cross-entropy `-ln p[target]`, with `p` floored at 1e-12.
pub fn cross_entropy(probabilities: &[f64], target: usize) -> Result<f64> {
    let p = probabilities.get(target).ok_or_else(|| {
        Error::invalid(format!(
            "target class {target} out of range for {} classes",
            probabilities.len()
        ))
    })?;
    // -ln(1) is -0.0; normalise so a perfect prediction reports 0
    Ok(-p.max(PROB_FLOOR).ln() + 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert!((cross_entropy(&[0.25; 4], 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        let clamped = cross_entropy(&[1.0, 0.0], 1).unwrap();
        assert!((clamped - 27.631021115928547).abs() < 1e-12);
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
    }
}
