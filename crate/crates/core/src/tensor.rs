//! Sparse tensor storage, padded-dimension bookkeeping, permutation state,
//! and error metrics.
//!
//! Entries are kept in coordinate form with 1-based indices. Every mode is
//! conceptually zero-padded to the next power of two; positions past the
//! logical size are "padding slots" that hold no entries but participate in
//! reordering as legitimate swap partners.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::codec::ModeLayout;
use crate::error::{Error, Result};

/// Minimal padded log dimension: `2^l >= n` and `2^(l-1) < n`.
pub fn ceil_log2(n: u32) -> u32 {
    debug_assert!(n >= 1);
    32 - (n - 1).leading_zeros().min(32)
}

/// COO store of a non-negative sparse tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseArray {
    dims: Vec<u32>,
    padded_log_dims: Vec<u32>,
    /// `nnz * order` flat index array, entry-major, 1-based.
    indices: Vec<u32>,
    values: Vec<f64>,
    value_sq_sum: f64,
    /// Per mode: entry ids grouped by index, CSR over the padded range.
    slices: Vec<SliceIndex>,
}

#[derive(Debug, Clone, PartialEq)]
struct SliceIndex {
    offsets: Vec<u32>,
    ids: Vec<u32>,
}

impl SliceIndex {
    fn build(mode: usize, order: usize, indices: &[u32], padded: u32) -> Self {
        let nnz = indices.len() / order;
        let mut counts = vec![0u32; padded as usize + 1];
        for e in 0..nnz {
            counts[indices[e * order + mode] as usize] += 1;
        }
        let mut offsets = vec![0u32; padded as usize + 1];
        for i in 1..offsets.len() {
            offsets[i] = offsets[i - 1] + counts[i];
        }
        let mut fill = offsets.clone();
        let mut ids = vec![0u32; nnz];
        for e in 0..nnz {
            let idx = indices[e * order + mode] as usize - 1;
            ids[fill[idx] as usize] = e as u32;
            fill[idx] += 1;
        }
        Self { offsets, ids }
    }

    fn entries(&self, pos: u32) -> &[u32] {
        let p = pos as usize - 1;
        &self.ids[self.offsets[p] as usize..self.offsets[p + 1] as usize]
    }
}

impl SparseArray {
    /// Build from raw entries, validating everything the type promises:
    /// in-range 1-based indices, strictly positive values, no duplicates.
    /// `dims` defaults to the per-mode maximum index when `None`.
    pub fn from_entries(
        order: usize,
        dims: Option<Vec<u32>>,
        entries: Vec<(Vec<u32>, f64)>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        if order == 0 {
            return Err(Error::InvalidConfig("order must be at least 1".into()));
        }
        let mut max_idx = vec![1u32; order];
        for (idx, value) in &entries {
            if idx.len() != order {
                return Err(Error::DimMismatch {
                    expected: vec![order as u32],
                    got: vec![idx.len() as u32],
                });
            }
            if idx.iter().any(|&i| i == 0) {
                return Err(Error::IndexOutOfRange {
                    index: idx.clone(),
                    dims: dims.clone().unwrap_or_else(|| max_idx.clone()),
                });
            }
            if *value <= 0.0 || !value.is_finite() {
                return Err(Error::NonPositiveValue {
                    index: idx.clone(),
                    value: *value,
                });
            }
            for (d, &i) in idx.iter().enumerate() {
                max_idx[d] = max_idx[d].max(i);
            }
        }
        let dims = match dims {
            Some(dims) => {
                if dims.len() != order {
                    return Err(Error::DimMismatch {
                        expected: vec![order as u32],
                        got: vec![dims.len() as u32],
                    });
                }
                for (idx, _) in &entries {
                    for (d, &i) in idx.iter().enumerate() {
                        if i > dims[d] {
                            return Err(Error::IndexOutOfRange {
                                index: idx.clone(),
                                dims: dims.clone(),
                            });
                        }
                    }
                }
                dims
            }
            None => max_idx,
        };

        // duplicate detection via a sorted view of entry ids
        let mut by_index: Vec<usize> = (0..entries.len()).collect();
        by_index.sort_unstable_by(|&a, &b| entries[a].0.cmp(&entries[b].0));
        for w in by_index.windows(2) {
            if entries[w[0]].0 == entries[w[1]].0 {
                return Err(Error::DuplicateIndex {
                    index: entries[w[0]].0.clone(),
                });
            }
        }

        let padded_log_dims: Vec<u32> = dims.iter().map(|&n| ceil_log2(n)).collect();
        let nnz = entries.len();
        let mut indices = Vec::with_capacity(nnz * order);
        let mut values = Vec::with_capacity(nnz);
        for (idx, value) in &entries {
            indices.extend_from_slice(idx);
            values.push(*value);
        }
        let value_sq_sum = values.iter().map(|v| v * v).sum();
        let slices = (0..order)
            .map(|d| SliceIndex::build(d, order, &indices, 1 << padded_log_dims[d]))
            .collect();
        Ok(Self {
            dims,
            padded_log_dims,
            indices,
            values,
            value_sq_sum,
            slices,
        })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn padded_log_dims(&self) -> &[u32] {
        &self.padded_log_dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_sq_sum(&self) -> f64 {
        self.value_sq_sum
    }

    pub fn frob_norm(&self) -> f64 {
        self.value_sq_sum.sqrt()
    }

    pub fn index(&self, entry: usize) -> &[u32] {
        let d = self.order();
        &self.indices[entry * d..(entry + 1) * d]
    }

    pub fn value(&self, entry: usize) -> f64 {
        self.values[entry]
    }

    /// Entry ids whose mode-`d` index equals `pos` (padded range, 1-based).
    pub fn slice_entries(&self, mode: usize, pos: u32) -> &[u32] {
        self.slices[mode].entries(pos)
    }

    pub fn mode_layout(&self) -> ModeLayout {
        ModeLayout::new(&self.padded_log_dims)
    }

    /// Total padded cell count, if representable.
    pub fn padded_cells(&self) -> Option<u64> {
        self.mode_layout().padded_cells()
    }

    /// Lookup map keyed by packed padded position.
    pub fn value_map(&self) -> HashMap<u64, f64> {
        let mut map = HashMap::with_capacity(self.nnz());
        for e in 0..self.nnz() {
            map.insert(pack_position(self.index(e), &self.padded_log_dims), self.values[e]);
        }
        map
    }

    /// Relabel every entry through `orders`: the entry at original index `i`
    /// moves to the position `p` with `orders.original_at(d, p) == i`.
    pub fn apply_order(&self, orders: &OrderState) -> Result<SparseArray> {
        orders.check_dims(&self.padded_log_dims)?;
        let d = self.order();
        let mut entries = Vec::with_capacity(self.nnz());
        let mut max_pos = vec![1u32; d];
        for e in 0..self.nnz() {
            let idx: Vec<u32> = self
                .index(e)
                .iter()
                .enumerate()
                .map(|(m, &i)| orders.position_of(m, i))
                .collect();
            for (m, &p) in idx.iter().enumerate() {
                max_pos[m] = max_pos[m].max(p);
            }
            entries.push((idx, self.values[e]));
        }
        let dims: Vec<u32> = self
            .dims
            .iter()
            .zip(&max_pos)
            .map(|(&n, &p)| n.max(p))
            .collect();
        SparseArray::from_entries(d, Some(dims), entries)
    }

    /// Recompute the cached square sum and check it against the stored one.
    pub fn check_value_sq_sum(&self) -> bool {
        let fresh: f64 = self.values.iter().map(|v| v * v).sum();
        (fresh - self.value_sq_sum).abs() <= 1e-9 * fresh.max(1.0)
    }
}

/// Pack a 1-based padded position into a u64 key (bit-concatenation of the
/// per-mode offsets). Only valid while the log dims sum to at most 64.
pub fn pack_position(pos: &[u32], padded_log_dims: &[u32]) -> u64 {
    let mut acc = 0u64;
    for (d, &i) in pos.iter().enumerate() {
        acc = (acc << padded_log_dims[d]) | (i as u64 - 1);
    }
    acc
}

/// Parse a COO text file (or Matrix Market coordinate file for matrices).
///
/// Plain format: one entry per line, `order` index tokens then a value.
/// Lines starting with `%` or `#` are comments. A `%%MatrixMarket` header
/// switches to Matrix Market rules: the first data line carries
/// `rows cols nnz` and entries follow.
pub fn load_coo(
    path: &Path,
    order: usize,
    one_indexed: bool,
    dims: Option<Vec<u32>>,
) -> Result<SparseArray> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_coo(BufReader::new(file), path, order, one_indexed, dims)
}

pub fn read_coo<R: Read>(
    reader: BufReader<R>,
    path: &Path,
    order: usize,
    one_indexed: bool,
    mut dims: Option<Vec<u32>>,
) -> Result<SparseArray> {
    let parse_err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut entries: Vec<(Vec<u32>, f64)> = Vec::new();
    let mut header_seen = false;
    let mut mm_size_pending = false;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with("%%MatrixMarket") {
            if order != 2 {
                return Err(parse_err(lineno, "Matrix Market input requires order 2"));
            }
            let lower = trimmed.to_ascii_lowercase();
            if !lower.contains("coordinate") {
                return Err(parse_err(lineno, "only coordinate Matrix Market is supported"));
            }
            if !lower.contains("real") && !lower.contains("integer") {
                return Err(parse_err(lineno, "only real/integer Matrix Market is supported"));
            }
            if !lower.contains("general") {
                return Err(parse_err(lineno, "only general Matrix Market is supported"));
            }
            header_seen = true;
            mm_size_pending = true;
            continue;
        }
        if trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if mm_size_pending {
            if tokens.len() != 3 {
                return Err(parse_err(lineno, "expected Matrix Market size line: rows cols nnz"));
            }
            let rows: u32 = tokens[0]
                .parse()
                .map_err(|_| parse_err(lineno, "bad row count"))?;
            let cols: u32 = tokens[1]
                .parse()
                .map_err(|_| parse_err(lineno, "bad column count"))?;
            if dims.is_none() {
                dims = Some(vec![rows, cols]);
            }
            mm_size_pending = false;
            continue;
        }
        if tokens.len() != order + 1 {
            return Err(parse_err(
                lineno,
                &format!("expected {} index tokens and a value", order),
            ));
        }
        let mut idx = Vec::with_capacity(order);
        for tok in &tokens[..order] {
            let raw: i64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, &format!("bad index token {tok:?}")))?;
            let i = if one_indexed {
                if raw == 0 {
                    return Err(parse_err(lineno, "index 0 in one-indexed input"));
                }
                raw
            } else {
                raw + 1
            };
            if i < 1 || i > u32::MAX as i64 {
                return Err(parse_err(lineno, &format!("index {raw} out of range")));
            }
            idx.push(i as u32);
        }
        let value: f64 = tokens[order]
            .parse()
            .map_err(|_| parse_err(lineno, &format!("bad value token {:?}", tokens[order])))?;
        entries.push((idx, value));
    }
    let _ = header_seen;
    SparseArray::from_entries(order, dims, entries)
}

/// Per-mode permutation: `perm[d][p-1]` is the original index stored at new
/// position `p`. Padding slots (original indices past the logical size) move
/// like any other index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderState {
    perms: Vec<Vec<u32>>,
    invs: Vec<Vec<u32>>,
}

impl OrderState {
    pub fn identity(padded_log_dims: &[u32]) -> Self {
        let perms: Vec<Vec<u32>> = padded_log_dims
            .iter()
            .map(|&l| (1..=(1u32 << l)).collect())
            .collect();
        let invs = perms.clone();
        Self { perms, invs }
    }

    /// Validate and adopt explicit permutations (one per mode, each a
    /// bijection on `1..=len` with a power-of-two length).
    pub fn from_perms(perms: Vec<Vec<u32>>) -> Result<Self> {
        let mut invs = Vec::with_capacity(perms.len());
        for (d, perm) in perms.iter().enumerate() {
            if perm.is_empty() || !perm.len().is_power_of_two() {
                return Err(Error::InvalidPermutation(format!(
                    "mode {d}: length {} is not a power of two",
                    perm.len()
                )));
            }
            let mut inv = vec![0u32; perm.len()];
            for (p, &orig) in perm.iter().enumerate() {
                if orig < 1 || orig as usize > perm.len() {
                    return Err(Error::InvalidPermutation(format!(
                        "mode {d}: index {orig} out of range"
                    )));
                }
                if inv[orig as usize - 1] != 0 {
                    return Err(Error::InvalidPermutation(format!(
                        "mode {d}: index {orig} repeated"
                    )));
                }
                inv[orig as usize - 1] = p as u32 + 1;
            }
            invs.push(inv);
        }
        Ok(Self { perms, invs })
    }

    pub fn order(&self) -> usize {
        self.perms.len()
    }

    pub fn perm(&self, mode: usize) -> &[u32] {
        &self.perms[mode]
    }

    /// Original index stored at `pos`.
    pub fn original_at(&self, mode: usize, pos: u32) -> u32 {
        self.perms[mode][pos as usize - 1]
    }

    /// Position where original index `orig` now lives.
    pub fn position_of(&self, mode: usize, orig: u32) -> u32 {
        self.invs[mode][orig as usize - 1]
    }

    pub fn swap(&mut self, mode: usize, a: u32, b: u32) {
        if a == b {
            return;
        }
        let (pa, pb) = (a as usize - 1, b as usize - 1);
        self.perms[mode].swap(pa, pb);
        let oa = self.perms[mode][pa];
        let ob = self.perms[mode][pb];
        self.invs[mode][oa as usize - 1] = a;
        self.invs[mode][ob as usize - 1] = b;
    }

    /// The order that undoes this one.
    pub fn inverse(&self) -> Self {
        Self {
            perms: self.invs.clone(),
            invs: self.perms.clone(),
        }
    }

    pub fn check_dims(&self, padded_log_dims: &[u32]) -> Result<()> {
        if self.perms.len() != padded_log_dims.len()
            || self
                .perms
                .iter()
                .zip(padded_log_dims)
                .any(|(p, &l)| p.len() != 1usize << l)
        {
            return Err(Error::DimMismatch {
                expected: padded_log_dims.iter().map(|&l| 1u32 << l).collect(),
                got: self.perms.iter().map(|p| p.len() as u32).collect(),
            });
        }
        Ok(())
    }

    /// Serialize: one line per mode, original indices in new order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for perm in &self.perms {
            let mut first = true;
            for &i in perm {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{i}");
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut perms = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let perm: std::result::Result<Vec<u32>, _> =
                line.split_whitespace().map(|t| t.parse::<u32>()).collect();
            perms.push(perm.map_err(|e| Error::InvalidPermutation(e.to_string()))?);
        }
        if perms.is_empty() {
            return Err(Error::InvalidPermutation("no modes in permutation text".into()));
        }
        Self::from_perms(perms)
    }
}

/// Approximation quality of a model against a tensor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ApproxReport {
    /// Squared Frobenius error over all padded cells.
    pub sq_error: f64,
    /// `1 - ||X - X~||_F / ||X||_F`.
    pub fitness: f64,
}

impl ApproxReport {
    pub fn new(sq_error: f64, data_sq_sum: f64) -> Self {
        Self {
            sq_error,
            fitness: 1.0 - sq_error.max(0.0).sqrt() / data_sq_sum.sqrt(),
        }
    }
}

/// Brute-force error over every padded cell. The oracle path: only valid
/// when the padded cell count fits under `dense_cap`.
pub fn exact_error<F>(data: &SparseArray, approx: F, dense_cap: u64) -> Result<ApproxReport>
where
    F: Fn(&[u32]) -> f64,
{
    let cells = data
        .padded_cells()
        .ok_or(Error::DenseCapExceeded { cells: u64::MAX, cap: dense_cap })?;
    if cells > dense_cap {
        return Err(Error::DenseCapExceeded { cells, cap: dense_cap });
    }
    let values = data.value_map();
    let log_dims = data.padded_log_dims().to_vec();
    let d = data.order();
    let mut pos = vec![1u32; d];
    let mut sq_error = 0.0;
    loop {
        let x = values
            .get(&pack_position(&pos, &log_dims))
            .copied()
            .unwrap_or(0.0);
        let diff = x - approx(&pos);
        sq_error += diff * diff;
        let mut m = 0;
        loop {
            if m == d {
                break;
            }
            pos[m] += 1;
            if (pos[m] - 1) >> log_dims[m] == 0 {
                break;
            }
            pos[m] = 1;
            m += 1;
        }
        if m == d {
            break;
        }
    }
    Ok(ApproxReport::new(sq_error, data.value_sq_sum()))
}

/// A sparse array viewed through an index order: positions handed to the
/// model are the permuted ones.
#[derive(Clone, Copy)]
pub struct OrderedData<'a> {
    pub data: &'a SparseArray,
    pub orders: &'a OrderState,
}

impl<'a> OrderedData<'a> {
    pub fn new(data: &'a SparseArray, orders: &'a OrderState) -> Result<Self> {
        orders.check_dims(data.padded_log_dims())?;
        Ok(Self { data, orders })
    }

    /// Model-space position of one entry.
    pub fn position_into(&self, entry: usize, out: &mut [u32]) {
        for (m, &i) in self.data.index(entry).iter().enumerate() {
            out[m] = self.orders.position_of(m, i);
        }
    }

    /// Encode a set of entries into a code batch plus their values.
    pub fn code_batch(
        &self,
        layout: &ModeLayout,
        ids: impl Iterator<Item = u32>,
    ) -> (crate::codec::CodeBatch, Vec<f64>) {
        let mut batch = crate::codec::CodeBatch::with_capacity(layout.l_max(), 0);
        let mut values = Vec::new();
        let mut pos = vec![0u32; self.data.order()];
        for id in ids {
            self.position_into(id as usize, &mut pos);
            batch.push(layout, &pos);
            values.push(self.data.value(id as usize));
        }
        (batch, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read_str(s: &str, order: usize, one_indexed: bool) -> Result<SparseArray> {
        read_coo(
            BufReader::new(Cursor::new(s.to_string())),
            Path::new("<mem>"),
            order,
            one_indexed,
            None,
        )
    }

    #[test]
    fn load_simple_coo() {
        let arr = read_str("1 1 5\n2 3 2\n", 2, true).unwrap();
        assert_eq!(arr.dims(), &[2, 3]);
        assert_eq!(arr.padded_log_dims(), &[1, 2]);
        assert_eq!(arr.nnz(), 2);
        assert_eq!(arr.value(0), 5.0);
        assert!(arr.check_value_sq_sum());
    }

    #[test]
    fn load_rejects_bad_input() {
        assert!(matches!(read_str("", 2, true), Err(Error::Empty)));
        assert!(matches!(
            read_str("1 1 5\n1 1 2\n", 2, true),
            Err(Error::DuplicateIndex { .. })
        ));
        assert!(matches!(
            read_str("1 1 0\n", 2, true),
            Err(Error::NonPositiveValue { .. })
        ));
        assert!(matches!(
            read_str("1 1 -3\n", 2, true),
            Err(Error::NonPositiveValue { .. })
        ));
        assert!(matches!(read_str("0 1 5\n", 2, true), Err(Error::Parse { .. })));
        assert!(matches!(read_str("1 1\n", 2, true), Err(Error::Parse { .. })));
        assert!(matches!(read_str("a 1 5\n", 2, true), Err(Error::Parse { .. })));
    }

    #[test]
    fn load_zero_indexed() {
        let arr = read_str("0 0 5\n1 2 2\n", 2, false).unwrap();
        assert_eq!(arr.dims(), &[2, 3]);
        assert_eq!(arr.index(0), &[1, 1]);
    }

    #[test]
    fn load_matrix_market() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n3 4 2\n1 1 5.0\n3 4 1.5\n";
        let arr = read_str(text, 2, true).unwrap();
        assert_eq!(arr.dims(), &[3, 4]);
        assert_eq!(arr.nnz(), 2);
        assert_eq!(arr.padded_log_dims(), &[2, 2]);
    }

    #[test]
    fn explicit_dims_override() {
        let arr = read_coo(
            BufReader::new(Cursor::new("1 1 5\n".to_string())),
            Path::new("<mem>"),
            2,
            true,
            Some(vec![4, 4]),
        )
        .unwrap();
        assert_eq!(arr.dims(), &[4, 4]);
        assert_eq!(arr.padded_log_dims(), &[2, 2]);
    }

    #[test]
    fn ceil_log2_minimality() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(1005), 10);
        assert_eq!(ceil_log2(25919), 15);
        for n in 1..=4096u32 {
            let l = ceil_log2(n);
            assert!(1u64 << l >= n as u64);
            assert!(l == 0 || (1u64 << (l - 1)) < n as u64);
        }
    }

    #[test]
    fn apply_identity_is_identity() {
        let arr = read_str("1 1 5\n2 3 2\n", 2, true).unwrap();
        let orders = OrderState::identity(arr.padded_log_dims());
        let same = arr.apply_order(&orders).unwrap();
        assert_eq!(same, arr);
    }

    #[test]
    fn apply_row_swap() {
        // [[1,0],[0,2]] with rows swapped: entries land at (2,1) and (1,2)
        let arr = SparseArray::from_entries(
            2,
            Some(vec![2, 2]),
            vec![(vec![1, 1], 1.0), (vec![2, 2], 2.0)],
        )
        .unwrap();
        let mut orders = OrderState::identity(arr.padded_log_dims());
        orders.swap(0, 1, 2);
        let swapped = arr.apply_order(&orders).unwrap();
        let map = swapped.value_map();
        assert_eq!(map[&pack_position(&[2, 1], swapped.padded_log_dims())], 1.0);
        assert_eq!(map[&pack_position(&[1, 2], swapped.padded_log_dims())], 2.0);
    }

    #[test]
    fn order_roundtrip_small() {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, crate::rng::Stream::OrderInit);
        for _ in 0..50 {
            let mut entries = Vec::new();
            for i in 1..=8u32 {
                for j in 1..=8u32 {
                    if rng.gen_bool(0.2) {
                        entries.push((vec![i, j], rng.gen_range(0.5..4.0)));
                    }
                }
            }
            if entries.is_empty() {
                continue;
            }
            let arr = SparseArray::from_entries(2, Some(vec![8, 8]), entries).unwrap();
            let perms: Vec<Vec<u32>> = (0..2)
                .map(|_| {
                    let mut p: Vec<u32> = (1..=8).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            let orders = OrderState::from_perms(perms).unwrap();
            let forward = arr.apply_order(&orders).unwrap();
            let back = forward.apply_order(&orders.inverse()).unwrap();
            assert_eq!(back, arr);
        }
    }

    #[test]
    fn exact_error_cases() {
        let arr = SparseArray::from_entries(2, Some(vec![2, 2]), vec![(vec![1, 1], 1.0)]).unwrap();
        let values = arr.value_map();
        let log_dims = arr.padded_log_dims().to_vec();
        // reproduce the data exactly
        let exact = exact_error(
            &arr,
            |pos| values.get(&pack_position(pos, &log_dims)).copied().unwrap_or(0.0),
            1 << 20,
        )
        .unwrap();
        assert_eq!(exact.sq_error, 0.0);
        assert_eq!(exact.fitness, 1.0);
        // zero approximation
        let zero = exact_error(&arr, |_| 0.0, 1 << 20).unwrap();
        assert_eq!(zero.sq_error, arr.value_sq_sum());
        assert!((zero.fitness - 0.0).abs() < 1e-12);
        // constant 0.5 on A = [[1,0],[0,0]]
        let half = exact_error(&arr, |_| 0.5, 1 << 20).unwrap();
        assert!((half.sq_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_error_respects_cap() {
        let arr = SparseArray::from_entries(2, Some(vec![8, 8]), vec![(vec![1, 1], 1.0)]).unwrap();
        assert!(matches!(
            exact_error(&arr, |_| 0.0, 16),
            Err(Error::DenseCapExceeded { cells: 64, cap: 16 })
        ));
    }

    #[test]
    fn permutation_text_roundtrip() {
        let orders = OrderState::from_perms(vec![vec![2, 1], vec![1, 2, 4, 3]]).unwrap();
        let text = orders.to_text();
        assert_eq!(text, "2 1\n1 2 4 3\n");
        assert_eq!(OrderState::from_text(&text).unwrap(), orders);
        assert!(OrderState::from_text("1 2 2 4\n").is_err());
        assert!(OrderState::from_text("1 2 3\n").is_err());
    }

    #[test]
    fn slice_index_lists_entries() {
        let arr = read_str("1 1 5\n2 3 2\n2 1 7\n", 2, true).unwrap();
        let rows: Vec<u32> = arr.slice_entries(0, 2).to_vec();
        assert_eq!(rows.len(), 2);
        for e in rows {
            assert_eq!(arr.index(e as usize)[0], 2);
        }
        assert!(arr.slice_entries(1, 4).is_empty()); // padding column
    }
}
