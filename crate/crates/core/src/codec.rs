//! Position encoding: recursive bisection of every mode turns an entry
//! position into a sequence of digit tuples.
//!
//! Each mode `d` with padded log dimension `l_d` is halved `l_d` times. At
//! step `k` the digit of mode `d` is 1 or 2 (first or second half) while the
//! mode is still being divided (`k <= l_d`) and 0 once it is exhausted. A
//! position is fully determined by its `l_max = max_d l_d` tuples.
//!
//! Internally modes are sorted so log dimensions are non-decreasing; the
//! set of still-active modes at any step is then a suffix of the mode list,
//! and there are at most `D` distinct step shapes.

use crate::error::{Error, Result};

/// Digit of a 1-based index at one bisection step.
///
/// Returns `((i-1) / 2^(l_d-k)) mod 2 + 1` while `k <= l_d`, and 0 once the
/// mode is exhausted.
pub fn digit(i: u32, k: u32, l_d: u32) -> u8 {
    debug_assert!(i >= 1 && (i - 1) >> l_d == 0, "index out of padded range");
    if k > l_d {
        0
    } else {
        (((i - 1) >> (l_d - k)) & 1) as u8 + 1
    }
}

/// The digit-tuple sequence for one position, in internal mode order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PositionCode {
    steps: Vec<Vec<u8>>,
}

impl PositionCode {
    pub fn steps(&self) -> &[Vec<u8>] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Modes of a step tuple that are still active (digit != 0).
pub fn step_shape(step: &[u8]) -> Vec<usize> {
    step.iter()
        .enumerate()
        .filter(|(_, &t)| t != 0)
        .map(|(d, _)| d)
        .collect()
}

/// Fixed geometry of one padded tensor: sorted log dimensions, the mode
/// permutation, and the per-step shape sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    /// Padded log dimensions in user mode order.
    user_log_dims: Vec<u32>,
    /// `mode_perm[j]` = user mode stored at internal slot `j`. Internal
    /// slots are sorted by log dimension, ascending and stable.
    mode_perm: Vec<usize>,
    /// Log dimensions in internal order (non-decreasing).
    log_dims: Vec<u32>,
    /// Number of active modes at each step `k = 1..=l_max`.
    shape_sizes: Vec<usize>,
}

impl ModeLayout {
    pub fn new(user_log_dims: &[u32]) -> Self {
        let mut mode_perm: Vec<usize> = (0..user_log_dims.len()).collect();
        mode_perm.sort_by_key(|&d| user_log_dims[d]);
        let log_dims: Vec<u32> = mode_perm.iter().map(|&d| user_log_dims[d]).collect();
        let l_max = log_dims.iter().copied().max().unwrap_or(0);
        let shape_sizes = (1..=l_max)
            .map(|k| log_dims.iter().filter(|&&l| l >= k).count())
            .collect();
        Self {
            user_log_dims: user_log_dims.to_vec(),
            mode_perm,
            log_dims,
            shape_sizes,
        }
    }

    pub fn order(&self) -> usize {
        self.user_log_dims.len()
    }

    pub fn user_log_dims(&self) -> &[u32] {
        &self.user_log_dims
    }

    /// `mode_perm[j]` = user mode at internal slot `j`.
    pub fn mode_perm(&self) -> &[usize] {
        &self.mode_perm
    }

    /// Log dimensions in internal (sorted) order.
    pub fn log_dims(&self) -> &[u32] {
        &self.log_dims
    }

    pub fn l_max(&self) -> usize {
        self.shape_sizes.len()
    }

    /// Active-mode count of step `k` (1-based).
    pub fn shape_size(&self, k: usize) -> usize {
        self.shape_sizes[k - 1]
    }

    /// Distinct shape sizes over all steps, ascending.
    pub fn distinct_shapes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.shape_sizes.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Total padded cell count, if it fits in a u64.
    pub fn padded_cells(&self) -> Option<u64> {
        self.user_log_dims
            .iter()
            .try_fold(1u64, |acc, &l| acc.checked_mul(1u64.checked_shl(l)?))
    }

    fn check_pos(&self, pos: &[u32]) -> Result<()> {
        if pos.len() != self.order() {
            return Err(Error::DimMismatch {
                expected: self.user_log_dims.iter().map(|&l| 1 << l).collect(),
                got: pos.iter().copied().collect(),
            });
        }
        for (d, &i) in pos.iter().enumerate() {
            if i < 1 || (i - 1) >> self.user_log_dims[d] != 0 {
                return Err(Error::IndexOutOfRange {
                    index: pos.to_vec(),
                    dims: self.user_log_dims.iter().map(|&l| 1 << l).collect(),
                });
            }
        }
        Ok(())
    }

    /// Encode a user-order position (1-based, within padded dims) into its
    /// digit-tuple sequence.
    pub fn encode(&self, pos: &[u32]) -> Result<PositionCode> {
        self.check_pos(pos)?;
        let d = self.order();
        let steps = (1..=self.l_max() as u32)
            .map(|k| {
                (0..d)
                    .map(|j| digit(pos[self.mode_perm[j]], k, self.log_dims[j]))
                    .collect()
            })
            .collect();
        Ok(PositionCode { steps })
    }

    /// Invert [`Self::encode`]: reassemble the position from its digits.
    pub fn decode(&self, code: &PositionCode) -> Vec<u32> {
        let mut pos = vec![1u32; self.order()];
        for (step, tuple) in code.steps.iter().enumerate() {
            let k = step as u32 + 1;
            for (j, &t) in tuple.iter().enumerate() {
                if t != 0 {
                    let l = self.log_dims[j];
                    pos[self.mode_perm[j]] += ((t - 1) as u32) << (l - k);
                }
            }
        }
        pos
    }

    /// Vocabulary index of step `k` for a position: the active digits minus
    /// one, concatenated in internal mode order (first active mode is the
    /// most significant bit). Active modes at step `k` are the internal
    /// suffix of length `shape_size(k)`.
    #[inline]
    pub fn vocab_index(&self, pos: &[u32], k: usize) -> u32 {
        let d = self.order();
        let s = self.shape_sizes[k - 1];
        let mut acc = 0u32;
        for j in d - s..d {
            let bit = ((pos[self.mode_perm[j]] - 1) >> (self.log_dims[j] - k as u32)) & 1;
            acc = (acc << 1) | bit;
        }
        acc
    }

    /// Write all `l_max` vocabulary indices of a position into `out`.
    #[inline]
    pub fn encode_vocab_into(&self, pos: &[u32], out: &mut [u32]) {
        debug_assert_eq!(out.len(), self.l_max());
        for k in 1..=self.l_max() {
            out[k - 1] = self.vocab_index(pos, k);
        }
    }

    /// Vocabulary indices from an already-built [`PositionCode`].
    pub fn code_vocab(&self, code: &PositionCode) -> Vec<u32> {
        code.steps
            .iter()
            .enumerate()
            .map(|(i, tuple)| {
                let s = self.shape_sizes[i];
                let d = self.order();
                let mut acc = 0u32;
                for &t in &tuple[d - s..] {
                    debug_assert!(t != 0);
                    acc = (acc << 1) | (t as u32 - 1);
                }
                acc
            })
            .collect()
    }
}

/// A batch of encoded positions, `l_max` vocabulary indices per entry.
#[derive(Debug, Clone, Default)]
pub struct CodeBatch {
    pub l_max: usize,
    count: usize,
    /// Flat `count * l_max` array, entry-major.
    pub vocab: Vec<u32>,
}

impl CodeBatch {
    pub fn with_capacity(l_max: usize, entries: usize) -> Self {
        Self {
            l_max,
            count: 0,
            vocab: Vec::with_capacity(l_max * entries),
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, layout: &ModeLayout, pos: &[u32]) {
        let start = self.vocab.len();
        self.vocab.resize(start + self.l_max, 0);
        layout.encode_vocab_into(pos, &mut self.vocab[start..]);
        self.count += 1;
    }

    pub fn push_vocab(&mut self, vocab: &[u32]) {
        debug_assert_eq!(vocab.len(), self.l_max);
        self.vocab.extend_from_slice(vocab);
        self.count += 1;
    }

    pub fn entry(&self, i: usize) -> &[u32] {
        &self.vocab[i * self.l_max..(i + 1) * self.l_max]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_matches_worked_examples() {
        // top-left quadrant at the first split of an 8x8 matrix
        assert_eq!(digit(3, 1, 3), 1);
        assert_eq!(digit(4, 1, 3), 1);
        // step beyond the mode depth
        assert_eq!(digit(2, 3, 2), 0);
    }

    #[test]
    fn digit_is_bit_extraction() {
        for l in 1..=4u32 {
            for i in 1..=(1u32 << l) {
                for k in 1..=l {
                    let expect = (((i - 1) >> (l - k)) & 1) as u8 + 1;
                    assert_eq!(digit(i, k, l), expect);
                }
            }
        }
    }

    #[test]
    fn encode_square_example() {
        let layout = ModeLayout::new(&[3, 3]);
        let code = layout.encode(&[3, 4]).unwrap();
        assert_eq!(
            code.steps(),
            &[vec![1u8, 1], vec![2, 2], vec![1, 2]] // TL -> BR -> TR
        );
    }

    #[test]
    fn encode_rectangular_example() {
        let layout = ModeLayout::new(&[2, 3]);
        let code = layout.encode(&[2, 3]).unwrap();
        assert_eq!(code.steps(), &[vec![1u8, 1], vec![2, 2], vec![0, 1]]);
    }

    #[test]
    fn encode_first_cell_order3() {
        let layout = ModeLayout::new(&[1, 2, 3]);
        let code = layout.encode(&[1, 1, 1]).unwrap();
        assert_eq!(code.steps(), &[vec![1u8, 1, 1], vec![0, 1, 1], vec![0, 0, 1]]);
    }

    #[test]
    fn step_shapes() {
        assert_eq!(step_shape(&[1, 1]), vec![0, 1]);
        assert_eq!(step_shape(&[0, 1]), vec![1]);
        assert_eq!(step_shape(&[0, 0, 2]), vec![2]);
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let layout = ModeLayout::new(&[2, 2]);
        assert!(layout.encode(&[0, 1]).is_err());
        assert!(layout.encode(&[5, 1]).is_err());
        assert!(layout.encode(&[1, 1, 1]).is_err());
    }

    #[test]
    fn encode_injective_and_decodable_exhaustively() {
        use std::collections::HashSet;
        for dims in [vec![2u32, 3], vec![3, 3], vec![1, 2, 3], vec![0, 2, 2]] {
            let layout = ModeLayout::new(&dims);
            let mut seen = HashSet::new();
            let mut pos = vec![1u32; dims.len()];
            loop {
                let code = layout.encode(&pos).unwrap();
                assert!(seen.insert(code.clone()), "collision at {pos:?}");
                assert_eq!(layout.decode(&code), pos);
                // odometer over the padded box
                let mut d = 0;
                loop {
                    if d == dims.len() {
                        break;
                    }
                    pos[d] += 1;
                    if (pos[d] - 1) >> dims[d] == 0 {
                        break;
                    }
                    pos[d] = 1;
                    d += 1;
                }
                if d == dims.len() {
                    break;
                }
            }
            assert_eq!(seen.len() as u64, layout.padded_cells().unwrap());
        }
    }

    #[test]
    fn shared_block_shares_prefix() {
        let layout = ModeLayout::new(&[3, 3]);
        // (1,2) and (2,1) lie in the same top-left 4x4 block: equal step-1 tuple.
        let a = layout.encode(&[1, 2]).unwrap();
        let b = layout.encode(&[2, 1]).unwrap();
        assert_eq!(a.steps()[0], b.steps()[0]);
        // (1,2) and (2,2) share the 2x2 block at depth 2.
        let c = layout.encode(&[2, 2]).unwrap();
        assert_eq!(a.steps()[..2], c.steps()[..2]);
    }

    #[test]
    fn vocab_index_concatenates_active_digits() {
        let layout = ModeLayout::new(&[2, 3]);
        // step 3 of (2,3): tuple (0,1) -> only col active -> index 0
        assert_eq!(layout.vocab_index(&[2, 3], 3), 0);
        // step 1 of (2,3): tuple (1,1) -> index 0b00
        assert_eq!(layout.vocab_index(&[2, 3], 1), 0);
        // step 2 of (2,3): tuple (2,2) -> index 0b11
        assert_eq!(layout.vocab_index(&[2, 3], 2), 3);
        let code = layout.encode(&[2, 3]).unwrap();
        assert_eq!(layout.code_vocab(&code), vec![0, 3, 0]);
    }

    #[test]
    fn modes_sorted_stably() {
        let layout = ModeLayout::new(&[3, 2, 3]);
        assert_eq!(layout.mode_perm(), &[1, 0, 2]);
        assert_eq!(layout.log_dims(), &[2, 3, 3]);
        assert_eq!(layout.shape_size(1), 3);
        assert_eq!(layout.shape_size(3), 2);
    }
}
