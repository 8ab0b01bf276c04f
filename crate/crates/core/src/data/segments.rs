use crate::error::{Error, Result};
use crate::numkernel::Matrix;

/// A `features × q` slice of a prepared file.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub block: Matrix,
}

/// `floor((frames - q) / hop) + 1` when the file is long enough, else 0.
pub fn segment_count(frames: usize, q: usize, hop: usize) -> usize {
    if frames < q || q == 0 || hop == 0 {
        0
    } else {
        (frames - q) / hop + 1
    }
}

/// Half a segment, at least one frame.
pub fn default_train_hop(q: usize) -> usize {
    (q / 2).max(1)
}

/// Cuts a feature-by-frame block into `q`-frame segments starting at
/// `0, hop, 2·hop, …`. A block shorter than `q` yields no segments.
pub fn extract_segments(block: &Matrix, q: usize, hop: usize) -> Result<Vec<Segment>> {
    if q == 0 || hop == 0 {
        return Err(Error::invalid(format!(
            "segment width and hop must be >= 1, got q = {q}, hop = {hop}"
        )));
    }
    (0..segment_count(block.cols(), q, hop))
        .map(|i| {
            let start = i * hop;
            Ok(Segment {
                start,
                block: block.column_range(start, q)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(frames: usize) -> Matrix {
        Matrix::from_col_major(2, frames, (0..2 * frames).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn count_examples() {
        assert_eq!(extract_segments(&ramp(80), 80, 7).unwrap().len(), 1);
        let segs = extract_segments(&ramp(100), 80, 10).unwrap();
        assert_eq!(segs.iter().map(|s| s.start).collect::<Vec<_>>(), vec![0, 10, 20]);
        assert!(extract_segments(&ramp(79), 80, 1).unwrap().is_empty());
        assert!(extract_segments(&ramp(10), 0, 1).is_err());
        assert!(extract_segments(&ramp(10), 3, 0).is_err());
    }

    #[test]
    fn hop_one_overlaps_by_q_minus_one() {
        let segs = extract_segments(&ramp(12), 5, 1).unwrap();
        assert_eq!(segs.len(), 8);
        assert_eq!(
            segs[0].block.column_range(1, 4).unwrap(),
            segs[1].block.column_range(0, 4).unwrap()
        );
        assert_eq!(segs[3].block.column(0), ramp(12).column(3));
    }

    #[test]
    fn default_hop() {
        assert_eq!(default_train_hop(80), 40);
        assert_eq!(default_train_hop(1), 1);
    }
}
