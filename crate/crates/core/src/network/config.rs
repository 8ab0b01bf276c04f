use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{PoolMode, TransferKind};

/// Frame accounting for a stack of conditional layers.
///
/// Each layer of order `n_b` consumes `2 n_b` frames, so a segment of
/// `q = 2 Σ n_b + k` frames leaves exactly `k` frames for pooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentGeometry {
    orders: Vec<usize>,
    extra_frames: usize,
}

impl SegmentGeometry {
    pub fn new(orders: Vec<usize>, extra_frames: usize) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::invalid("at least one conditional layer is required"));
        }
        if let Some(n) = orders.iter().find(|&&n| n < 1) {
            return Err(Error::invalid(format!("layer order must be >= 1, got {n}")));
        }
        if extra_frames < 1 {
            return Err(Error::invalid("extra frames k must be >= 1"));
        }
        Ok(Self { orders, extra_frames })
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn layers(&self) -> usize {
        self.orders.len()
    }

    pub fn extra_frames(&self) -> usize {
        self.extra_frames
    }

    /// Segment width `q`.
    pub fn width(&self) -> usize {
        2 * self.orders.iter().sum::<usize>() + self.extra_frames
    }
}

/// `q = 2 Σ n_b + k`; with equal orders this is `q = 2nm + k`.
pub fn segment_width(orders: &[usize], extra_frames: usize) -> Result<usize> {
    Ok(SegmentGeometry::new(orders.to_vec(), extra_frames)?.width())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub bandwidth: usize,
    pub overlap: i64,
}

/// One conditional layer of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalSpec {
    /// Hidden nodes `e`.
    pub width: usize,
    /// Order `n`.
    pub order: usize,
    /// Band mask; `None` gives a plain CLNN layer.
    #[serde(default)]
    pub mask: Option<MaskConfig>,
    /// Dropout on this layer's output (off by default).
    #[serde(default)]
    pub dropout: f64,
}

fn default_true() -> bool {
    true
}

fn default_dense() -> Vec<usize> {
    vec![100, 100]
}

/// Architecture of a model. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Length `l` of the frames the first conditional layer sees. When
    /// `delta` is set this already counts the appended delta features.
    pub input_features: usize,
    /// Append first-order time deltas to each raw frame before the model.
    #[serde(default = "default_true")]
    pub delta: bool,
    pub conditional_layers: Vec<ConditionalSpec>,
    /// Frames `k` left for pooling after the conditional stack.
    pub extra_frames: usize,
    #[serde(default)]
    pub pool: PoolMode,
    #[serde(default = "default_dense")]
    pub dense_widths: Vec<usize>,
    /// Dropout per dense hidden layer; defaults to 0.5 for each.
    #[serde(default)]
    pub dense_dropout: Option<Vec<f64>>,
    pub classes: usize,
    #[serde(default)]
    pub transfer: TransferKind,
    /// Seed for parameter initialisation.
    #[serde(default)]
    pub seed: u64,
}

pub const DEFAULT_DENSE_DROPOUT: f64 = 0.5;

impl ModelConfig {
    /// Single 300-node masked layer (bandwidth 20, overlap -5, order 15),
    /// 50 extra frames, two dense layers of 100, on 120-feature frames
    /// (60 mel bins plus their deltas).
    pub fn table_one(classes: usize) -> Self {
        Self {
            input_features: 120,
            delta: true,
            conditional_layers: vec![ConditionalSpec {
                width: 300,
                order: 15,
                mask: Some(MaskConfig {
                    bandwidth: 20,
                    overlap: -5,
                }),
                dropout: 0.0,
            }],
            extra_frames: 50,
            pool: PoolMode::Mean,
            dense_widths: vec![100, 100],
            dense_dropout: None,
            classes,
            transfer: TransferKind::Prelu,
            seed: 0,
        }
    }

    pub fn geometry(&self) -> Result<SegmentGeometry> {
        SegmentGeometry::new(
            self.conditional_layers.iter().map(|c| c.order).collect(),
            self.extra_frames,
        )
    }

    pub fn segment_width(&self) -> Result<usize> {
        Ok(self.geometry()?.width())
    }

    pub fn dense_dropout_rates(&self) -> Vec<f64> {
        self.dense_dropout
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_DENSE_DROPOUT; self.dense_widths.len()])
    }

    /// Feature count of a raw input frame (before delta features).
    pub fn raw_features(&self) -> usize {
        if self.delta {
            self.input_features / 2
        } else {
            self.input_features
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_features == 0 {
            return Err(Error::invalid("input_features must be >= 1"));
        }
        if self.delta && !self.input_features.is_multiple_of(2) {
            return Err(Error::invalid(
                "input_features must be even when delta features are appended",
            ));
        }
        if self.classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {}", self.classes)));
        }
        self.geometry()?;
        let mut features = self.input_features;
        for (b, c) in self.conditional_layers.iter().enumerate() {
            if c.width == 0 {
                return Err(Error::invalid(format!("conditional layer {b} has width 0")));
            }
            check_rate(c.dropout, &format!("conditional layer {b} dropout"))?;
            if let Some(m) = c.mask {
                crate::masking::MaskSpec::new(features, c.width, m.bandwidth, m.overlap)
                    .map_err(|e| Error::invalid(format!("conditional layer {b}: {e}")))?;
            }
            features = c.width;
        }
        if self.dense_widths.contains(&0) {
            return Err(Error::invalid("dense layer width must be >= 1"));
        }
        let rates = self.dense_dropout_rates();
        if rates.len() != self.dense_widths.len() {
            return Err(Error::invalid(format!(
                "dense_dropout has {} rates for {} dense layers",
                rates.len(),
                self.dense_widths.len()
            )));
        }
        for r in rates {
            check_rate(r, "dense dropout")?;
        }
        Ok(())
    }
}

fn check_rate(rate: f64, what: &str) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("{what} must lie in [0, 1), got {rate}")));
    }
    Ok(())
}
