//! Filterbank-like binary masks for conditional weight matrices.
//!
//! A mask is an `l × e` grid of zeros and ones. Ones are laid out along the
//! column-major linear index of the grid in runs of `bw` consecutive
//! positions, with consecutive runs starting `l + (bw - ov)` positions apart:
//!
//! ```text
//! lx = a + (g - 1) * (l + bw - ov),   a in [0, bw - 1],  g in [1, ceil(l*e / (l + bw - ov))]
//! ```
//!
//! Indices that fall past `l * e` are dropped. Runs are not clipped at
//! column boundaries, so a band near the bottom of one column continues at
//! the top of the next; with a negative overlap this is what gives later
//! hidden nodes truncated bands over the leading features.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{elementwise_mul, Matrix};

/// Shape and band parameters of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    /// Feature-vector length (mask rows).
    pub features: usize,
    /// Hidden-layer width (mask columns).
    pub nodes: usize,
    /// Consecutive ones per band.
    pub bandwidth: usize,
    /// Signed overlap between consecutive bands; negative values leave a gap.
    pub overlap: i64,
}

impl MaskSpec {
    pub fn new(features: usize, nodes: usize, bandwidth: usize, overlap: i64) -> Result<Self> {
        let spec = Self {
            features,
            nodes,
            bandwidth,
            overlap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.nodes == 0 {
            return Err(Error::invalid(format!(
                "mask needs at least one feature and one node, got {}x{}",
                self.features, self.nodes
            )));
        }
        if self.bandwidth == 0 || self.bandwidth > self.features {
            return Err(Error::invalid(format!(
                "bandwidth must lie in [1, {}] (feature count), got {}",
                self.features, self.bandwidth
            )));
        }
        if self.overlap >= self.bandwidth as i64 {
            return Err(Error::invalid(format!(
                "overlap must be smaller than bandwidth {}, got {}",
                self.bandwidth, self.overlap
            )));
        }
        Ok(())
    }

    /// Linear distance between the starts of consecutive bands.
    pub fn stride(&self) -> usize {
        // validate() guarantees bw - ov >= 1
        (self.features as i64 + self.bandwidth as i64 - self.overlap) as usize
    }

    /// Number of bands placed, `ceil(l*e / stride)`.
    pub fn band_count(&self) -> usize {
        (self.features * self.nodes).div_ceil(self.stride())
    }
}

/// A validated 0/1 mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    matrix: Matrix,
    spec: Option<MaskSpec>,
}

impl BinaryMask {
    /// Wraps an arbitrary 0/1 matrix, e.g. a hand-built or degenerate mask.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if let Some(v) = matrix.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(format!("mask entries must be 0 or 1, found {v}")));
        }
        Ok(Self { matrix, spec: None })
    }

    pub fn ones(features: usize, nodes: usize) -> Self {
        Self {
            matrix: Matrix::filled(features, nodes, 1.0),
            spec: None,
        }
    }

    pub fn zeros(features: usize, nodes: usize) -> Self {
        Self {
            matrix: Matrix::zeros(features, nodes),
            spec: None,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// The spec this mask was generated from, if any.
    pub fn spec(&self) -> Option<&MaskSpec> {
        self.spec.as_ref()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.matrix[(row, col)] == 1.0
    }

    /// Column-major linear indices of the ones.
    pub fn ones_indices(&self) -> Vec<usize> {
        self.matrix
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// CSV grid: one line per feature, one column per hidden node.
    pub fn to_csv(&self) -> String {
        let (rows, cols) = self.shape();
        let mut out = String::with_capacity(rows * cols * 2);
        for i in 0..rows {
            for j in 0..cols {
                if j > 0 {
                    out.push(',');
                }
                out.push(if self.is_set(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Plain (P2) PGM image, width = hidden nodes, height = features, maxval 1.
    pub fn to_pgm(&self) -> String {
        let (rows, cols) = self.shape();
        let mut out = String::new();
        let _ = writeln!(out, "P2");
        let _ = writeln!(out, "{cols} {rows}");
        let _ = writeln!(out, "1");
        for i in 0..rows {
            let line: Vec<&str> = (0..cols).map(|j| if self.is_set(i, j) { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Builds the band mask described by `spec`.
pub fn generate_mask(spec: &MaskSpec) -> Result<BinaryMask> {
    spec.validate()?;
    let total = spec.features * spec.nodes;
    let stride = spec.stride();
    let mut matrix = Matrix::zeros(spec.features, spec.nodes);
    let cells = matrix.as_mut_slice();
    for g in 0..spec.band_count() {
        let start = g * stride;
        for a in 0..spec.bandwidth {
            let lx = start + a;
            if lx < total {
                cells[lx] = 1.0;
            }
        }
    }
    Ok(BinaryMask {
        matrix,
        spec: Some(*spec),
    })
}

/// Element-wise product of a weight matrix with the mask. Masked positions
/// come out as `+0.0` whatever the sign of the weight.
pub fn mask_weights(weights: &Matrix, mask: &BinaryMask) -> Result<Matrix> {
    let mut out = elementwise_mul(weights, &mask.matrix)?;
    for (o, &k) in out.as_mut_slice().iter_mut().zip(mask.matrix.as_slice()) {
        if k == 0.0 {
            *o = 0.0;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskStats {
    pub ones_total: usize,
    pub ones_per_column: Vec<usize>,
    pub density: f64,
}

pub fn mask_stats(mask: &BinaryMask) -> MaskStats {
    let ones_per_column: Vec<usize> = mask
        .matrix
        .columns()
        .map(|c| c.iter().filter(|&&v| v == 1.0).count())
        .collect();
    let ones_total = ones_per_column.iter().sum();
    MaskStats {
        ones_total,
        ones_per_column,
        density: ones_total as f64 / mask.matrix.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Rng;
    use std::collections::BTreeSet;

    /// Exhaustive enumeration over (a, g) straight from the index formula.
    fn oracle(l: usize, e: usize, bw: usize, ov: i64) -> BTreeSet<usize> {
        let stride = l as i64 + bw as i64 - ov;
        let g_max = ((l * e) as f64 / stride as f64).ceil() as i64;
        let mut set = BTreeSet::new();
        for g in 1..=g_max {
            for a in 0..bw as i64 {
                let lx = a + (g - 1) * stride;
                if lx < (l * e) as i64 {
                    set.insert(lx as usize);
                }
            }
        }
        set
    }

    #[test]
    fn full_height_band_without_overlap_skips_alternate_columns() {
        // a stride equal to the column height would need ov = bw, which is rejected
        assert!(MaskSpec::new(3, 2, 3, 3).is_err());
        let mask = generate_mask(&MaskSpec::new(3, 4, 3, 0).unwrap()).unwrap();
        let expected = Matrix::from_columns(&[vec![1.0; 3], vec![0.0; 3], vec![1.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(mask.matrix(), &expected);
    }

    #[test]
    fn worked_example_six_by_four() {
        let mask = generate_mask(&MaskSpec::new(6, 4, 3, 1).unwrap()).unwrap();
        assert_eq!(mask.ones_indices(), vec![0, 1, 2, 8, 9, 10, 16, 17, 18]);
        let rows_in = |c: usize| (0..6).filter(|&r| mask.is_set(r, c)).collect::<Vec<_>>();
        assert_eq!(rows_in(0), vec![0, 1, 2]);
        assert_eq!(rows_in(1), vec![2, 3, 4]);
        assert_eq!(rows_in(2), vec![4, 5]);
        assert_eq!(rows_in(3), vec![0]);
        assert_eq!(mask_stats(&mask).ones_total, 9);
    }

    #[test]
    fn positive_overlap_shifts_band_by_bw_minus_ov() {
        // bw = 5, ov = 3 on a tall enough grid: each column's band starts two rows lower.
        let mask = generate_mask(&MaskSpec::new(20, 6, 5, 3).unwrap()).unwrap();
        let starts: Vec<usize> = (0..6).map(|c| (0..20).find(|&r| mask.is_set(r, c)).unwrap()).collect();
        for w in starts.windows(2) {
            assert_eq!(w[1] - w[0], 2);
        }
        assert_eq!(mask_stats(&mask).ones_per_column, vec![5; 6]);
    }

    #[test]
    fn negative_overlap_truncates_some_bands() {
        // bw = 3, ov = -1 with nine features: stride 13, bands wrap across columns.
        let spec = MaskSpec::new(9, 8, 3, -1).unwrap();
        assert_eq!(spec.stride(), 13);
        let mask = generate_mask(&spec).unwrap();
        let rows_in = |c: usize| (0..9).filter(|&r| mask.is_set(r, c)).collect::<Vec<_>>();
        assert_eq!(rows_in(0), vec![0, 1, 2]);
        // 4th node sees the first two features, 7th node only the first one
        assert_eq!(rows_in(3), vec![0, 1]);
        assert_eq!(rows_in(6), vec![0]);
        assert_eq!(
            mask.ones_indices().into_iter().collect::<BTreeSet<_>>(),
            oracle(9, 8, 3, -1)
        );
    }

    #[test]
    fn masking_examples() {
        let mut rng = Rng::new(3);
        let w = Matrix::from_col_major(6, 4, (0..24).map(|_| rng.normal()).collect()).unwrap();
        assert_eq!(mask_weights(&w, &BinaryMask::ones(6, 4)).unwrap(), w);
        assert_eq!(mask_weights(&w, &BinaryMask::zeros(6, 4)).unwrap(), Matrix::zeros(6, 4));
        let mask = generate_mask(&MaskSpec::new(6, 4, 3, 1).unwrap()).unwrap();
        let z = mask_weights(&w, &mask).unwrap();
        let nz: Vec<usize> = z
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nz, vec![0, 1, 2, 8, 9, 10, 16, 17, 18]);
        assert!(mask_weights(&w, &BinaryMask::ones(4, 6)).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = mask_stats(&BinaryMask::ones(3, 2));
        assert_eq!(s.ones_total, 6);
        assert_eq!(s.density, 1.0);
        assert_eq!(mask_stats(&BinaryMask::zeros(3, 2)).density, 0.0);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(MaskSpec::new(4, 3, 5, 0).is_err());
        assert!(MaskSpec::new(4, 3, 0, -1).is_err());
        assert!(MaskSpec::new(4, 3, 2, 2).is_err());
        assert!(MaskSpec::new(0, 3, 1, 0).is_err());
        assert!(MaskSpec::new(4, 0, 1, 0).is_err());
        let bad = MaskSpec {
            features: 3,
            nodes: 2,
            bandwidth: 4,
            overlap: 0,
        };
        assert!(generate_mask(&bad).is_err());
    }

    #[test]
    fn from_matrix_rejects_non_binary() {
        assert!(BinaryMask::from_matrix(Matrix::filled(2, 2, 0.5)).is_err());
        assert!(BinaryMask::from_matrix(Matrix::identity(3)).is_ok());
    }

    #[test]
    fn csv_and_pgm_describe_same_grid() {
        let mask = generate_mask(&MaskSpec::new(6, 4, 3, 1).unwrap()).unwrap();
        let csv = mask.to_csv();
        let pgm = mask.to_pgm();
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("4 6"));
        assert_eq!(lines.next(), Some("1"));
        for (c, p) in csv.lines().zip(lines) {
            assert_eq!(c.replace(',', " "), p);
        }
    }
}
