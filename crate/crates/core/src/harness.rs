//! Scaling benchmarks: per-entry inference latency against matrix size,
//! and per-epoch training time against the non-zero count.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use crate::codec::ModeLayout;
use crate::error::Result;
use crate::exec::Exec;
use crate::model::{FactorModel, KronModel};
use crate::rng::{stream_rng, Stream};
use crate::tensor::SparseArray;
use crate::train::{train, TrainConfig};

#[derive(Debug, Clone, Copy)]
pub struct InferenceRow {
    pub log_size: u32,
    pub mean_latency_ns: f64,
    pub std_ns: f64,
}

/// Mean per-entry approximation latency on square matrices `2^l x 2^l` for
/// `l` in `min_log..=max_log`, `reps` repetitions of `samples` random
/// positions each. Runs on the calling thread for timing fidelity.
pub fn bench_inference(
    min_log: u32,
    max_log: u32,
    samples: usize,
    reps: usize,
    hidden: usize,
    seed: u64,
) -> Vec<InferenceRow> {
    let mut rng = stream_rng(seed, Stream::Bench);
    let mut rows = Vec::new();
    if samples == 0 || reps == 0 {
        return rows;
    }
    for l in min_log..=max_log {
        let layout = ModeLayout::new(&[l, l]);
        let model = KronModel::init(layout.clone(), hidden, 0.0, &mut rng);
        let n = 1u32 << l;
        let positions: Vec<[u32; 2]> = (0..samples)
            .map(|_| [rng.gen_range(1..=n), rng.gen_range(1..=n)])
            .collect();
        let mut per_rep = Vec::with_capacity(reps);
        let steps = layout.l_max();
        for _ in 0..reps {
            let started = Instant::now();
            let mut vocab = vec![0u32; samples * steps];
            for (s, pos) in positions.iter().enumerate() {
                layout.encode_vocab_into(pos, &mut vocab[s * steps..(s + 1) * steps]);
            }
            let mut out = Vec::with_capacity(samples);
            model.approx_entries(&vocab, samples, &mut out);
            let elapsed = started.elapsed().as_nanos() as f64;
            std::hint::black_box(&out);
            per_rep.push(elapsed / samples as f64);
        }
        let mean = per_rep.iter().sum::<f64>() / reps as f64;
        let var = per_rep.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64;
        rows.push(InferenceRow {
            log_size: l,
            mean_latency_ns: mean,
            std_ns: var.sqrt(),
        });
    }
    rows
}

pub fn inference_tsv(rows: &[InferenceRow]) -> String {
    let mut out = String::from("size\tmean_latency_ns\tstd_ns\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{:.2}\t{:.2}", 1u64 << r.log_size, r.mean_latency_ns, r.std_ns);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct EpochScalingRow {
    pub nnz: usize,
    pub model_opt_s: f64,
    pub order_opt_s: f64,
    pub total_s: f64,
}

/// Nested random subset of `data` holding `keep` entries (same dims).
pub fn nested_subset(data: &SparseArray, shuffled_ids: &[u32], keep: usize) -> Result<SparseArray> {
    let entries: Vec<(Vec<u32>, f64)> = shuffled_ids[..keep]
        .iter()
        .map(|&id| (data.index(id as usize).to_vec(), data.value(id as usize)))
        .collect();
    SparseArray::from_entries(data.order(), Some(data.dims().to_vec()), entries)
}

/// Per-epoch time of model optimization and order optimization on nested
/// subsets of `data` at the given non-zero fractions.
pub fn bench_epoch_scaling(
    data: &SparseArray,
    fractions: &[f64],
    config: &TrainConfig,
    epochs: usize,
    exec: Exec,
) -> Result<Vec<EpochScalingRow>> {
    let mut ids: Vec<u32> = (0..data.nnz() as u32).collect();
    use rand::seq::SliceRandom;
    ids.shuffle(&mut stream_rng(config.seed, Stream::Bench));
    let mut rows = Vec::new();
    for &f in fractions {
        let keep = ((data.nnz() as f64 * f).round() as usize).clamp(1, data.nnz());
        let subset = nested_subset(data, &ids, keep)?;
        let mut cfg = config.clone();
        cfg.max_epochs = epochs;
        cfg.patience = epochs + 1;
        let out = train(&subset, &cfg, exec)?;
        rows.push(EpochScalingRow {
            nnz: keep,
            model_opt_s: out.model_seconds / epochs as f64,
            order_opt_s: out.order_seconds / epochs as f64,
            total_s: (out.model_seconds + out.order_seconds) / epochs as f64,
        });
    }
    Ok(rows)
}

pub fn epochs_tsv(rows: &[EpochScalingRow]) -> String {
    let mut out = String::from("nnz\tmodel_opt_s\torder_opt_s\ttotal_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            r.nnz, r.model_opt_s, r.order_opt_s, r.total_s
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_samples_give_empty_table() {
        let rows = bench_inference(7, 6, 100, 1, 4, 1);
        assert!(rows.is_empty());
        let rows = bench_inference(4, 5, 0, 1, 4, 1);
        assert!(rows.is_empty());
        assert_eq!(inference_tsv(&rows).lines().count(), 1);
    }

    #[test]
    fn nested_subsets_nest() {
        let config = crate::rmat::RmatConfig {
            skew: 0.7,
            log_dims: vec![4, 4],
            value_sum: 400,
            seed: 2,
        };
        let data = crate::rmat::rmat_generate(&config).unwrap();
        let mut ids: Vec<u32> = (0..data.nnz() as u32).collect();
        use rand::seq::SliceRandom;
        ids.shuffle(&mut stream_rng(1, Stream::Bench));
        let small = nested_subset(&data, &ids, 10).unwrap();
        let large = nested_subset(&data, &ids, 20).unwrap();
        let large_map = large.value_map();
        for e in 0..small.nnz() {
            let key = crate::tensor::pack_position(small.index(e), small.padded_log_dims());
            assert_eq!(large_map.get(&key), Some(&small.value(e)));
        }
        assert_eq!(small.dims(), data.dims());
    }
}
