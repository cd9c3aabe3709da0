//! Position-independent baseline: one learnable seed factor per step shape,
//! combined exactly like the full model. With a single shape this is a
//! normalized Kronecker power; with two shapes (a rectangular matrix) it is
//! `K_square^[l_row] (x) K_rect^[l_col - l_row]` up to normalization. It
//! isolates the contribution of the auto-regressive factor generator: same
//! combine rule, same loss, same training loop, no sequence model.

use std::ops::Range;

use rand::Rng;

use crate::codec::ModeLayout;
use crate::error::{Error, Result};
use crate::model::{dot, softplus, FactorModel};

/// Seed factors for every step shape, softplus-parameterized.
#[derive(Debug, Clone)]
pub struct SeedModel {
    layout: ModeLayout,
    /// Raw seed segment per shape size (empty when absent).
    seeds: Vec<Range<usize>>,
    params: Vec<f64>,
}

struct Prepared {
    /// softplus(seed) per shape size, padded table.
    factors: Vec<Vec<f64>>,
    /// `sqrt(q) / ||K_s||` per shape size.
    scale: Vec<f64>,
}

impl SeedModel {
    pub fn init<R: Rng>(layout: ModeLayout, init_log_q: f64, rng: &mut R) -> Self {
        let shapes = layout.distinct_shapes();
        let max_shape = shapes.iter().copied().max().unwrap_or(0);
        let mut seeds = vec![0..0; max_shape + 1];
        let mut off = 1usize;
        for &s in &shapes {
            seeds[s] = off..off + (1 << s);
            off += 1 << s;
        }
        let mut params = vec![0.0; off];
        params[0] = init_log_q;
        for p in params[1..].iter_mut() {
            *p = rng.gen_range(-0.5..0.5);
        }
        Self {
            layout,
            seeds,
            params,
        }
    }

    pub fn from_params(layout: ModeLayout, params: Vec<f64>) -> Result<Self> {
        let shapes = layout.distinct_shapes();
        let max_shape = shapes.iter().copied().max().unwrap_or(0);
        let mut seeds = vec![0..0; max_shape + 1];
        let mut off = 1usize;
        for &s in &shapes {
            seeds[s] = off..off + (1 << s);
            off += 1 << s;
        }
        if params.len() != off {
            return Err(Error::InvalidModel(format!(
                "expected {} parameters, got {}",
                off,
                params.len()
            )));
        }
        Ok(Self {
            layout,
            seeds,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn seed_range(&self, shape: usize) -> Range<usize> {
        self.seeds[shape].clone()
    }

    /// softplus(seed) values of one shape.
    pub fn seed_factor(&self, shape: usize) -> Vec<f64> {
        self.params[self.seeds[shape].clone()]
            .iter()
            .map(|&r| softplus(r))
            .collect()
    }

    fn prepare(&self) -> Prepared {
        let sqrt_q = (0.5 * self.params[0]).exp();
        let mut factors = vec![Vec::new(); self.seeds.len()];
        let mut scale = vec![0.0; self.seeds.len()];
        for s in 0..self.seeds.len() {
            if self.seeds[s].is_empty() {
                continue;
            }
            let f = self.seed_factor(s);
            let norm = dot(&f, &f).sqrt();
            scale[s] = sqrt_q / norm;
            factors[s] = f;
        }
        Prepared { factors, scale }
    }
}

impl FactorModel for SeedModel {
    fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn log_q_offset(&self) -> usize {
        0
    }

    fn approx_entries(&self, vocab: &[u32], n: usize, out: &mut Vec<f64>) {
        let l = self.layout.l_max();
        if l == 0 {
            out.extend(std::iter::repeat(1.0).take(n));
            return;
        }
        let prep = self.prepare();
        for e in 0..n {
            let vs = &vocab[e * l..(e + 1) * l];
            let mut acc = 1.0;
            for (k, &v) in vs.iter().enumerate() {
                let s = self.layout.shape_size(k + 1);
                acc *= prep.factors[s][v as usize] * prep.scale[s];
            }
            out.push(acc);
        }
    }

    fn grad_entries(&self, vocab: &[u32], values: &[f64], grad: &mut [f64]) -> f64 {
        let l = self.layout.l_max();
        let mut loss = 0.0;
        if l == 0 {
            for &x in values {
                loss += x * x - 2.0 * x;
            }
            return loss;
        }
        let prep = self.prepare();
        let sqrt_q = (0.5 * self.params[0]).exp();
        let mut gammas = vec![0.0; l];
        let mut suffix = vec![0.0; l + 1];
        for (e, &x) in values.iter().enumerate() {
            let vs = &vocab[e * l..(e + 1) * l];
            for (k, &v) in vs.iter().enumerate() {
                let s = self.layout.shape_size(k + 1);
                gammas[k] = prep.factors[s][v as usize] * prep.scale[s];
            }
            suffix[l] = 1.0;
            for k in (0..l).rev() {
                suffix[k] = suffix[k + 1] * gammas[k];
            }
            let atilde = suffix[0];
            loss += x * x - 2.0 * x * atilde;
            let co = -2.0 * x;
            grad[0] += co * atilde * l as f64 * 0.5;
            let mut prefix = 1.0;
            for (k, &v) in vs.iter().enumerate() {
                let dgamma = co * prefix * suffix[k + 1];
                prefix *= gammas[k];
                let s = self.layout.shape_size(k + 1);
                let f = &prep.factors[s];
                let norm = sqrt_q / prep.scale[s];
                let kv = f[v as usize];
                let range = self.seeds[s].clone();
                for j in 0..f.len() {
                    let mut d = -sqrt_q * kv * f[j] / (norm * norm * norm);
                    if j == v as usize {
                        d += sqrt_q / norm;
                    }
                    // softplus'(raw) = 1 - exp(-softplus(raw))
                    grad[range.start + j] += dgamma * d * (1.0 - (-f[j]).exp());
                }
            }
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodeBatch;
    use crate::exec::Exec;
    use crate::model::approximate_batch;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn uniform_seeds_give_constant_cells() {
        // equal seed entries: every cell is sqrt(q) / sqrt(cell count per level)
        let layout = ModeLayout::new(&[2, 2]);
        let mut model = SeedModel::from_params(
            layout.clone(),
            vec![0.0; 1 + 4], // log_q = 0, one shape (s=2)
        )
        .unwrap();
        model.params_mut()[1..].fill(0.7);
        let v = model.approximate_at(&[1, 1]);
        for i in 1..=4u32 {
            for j in 1..=4u32 {
                assert_eq!(model.approximate_at(&[i, j]), v);
            }
        }
        // Lemma-style square sum still holds
        let mut brute = 0.0;
        for i in 1..=4u32 {
            for j in 1..=4u32 {
                brute += model.approximate_at(&[i, j]).powi(2);
            }
        }
        assert!((brute - model.square_sum()).abs() < 1e-10 * model.square_sum());
    }

    #[test]
    fn equals_dense_kronecker_power() {
        // 4x4: the baseline is the second Kronecker power of its seed,
        // scaled by sqrt(q)/||K|| at each level.
        let layout = ModeLayout::new(&[2, 2]);
        let mut rng = stream_rng(3, Stream::ParamInit);
        let model = SeedModel::init(layout.clone(), 0.4, &mut rng);
        let k = model.seed_factor(2);
        let norm = (k.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let scale = (0.5 * model.log_q()).exp() / norm;
        // seed as 2x2 matrix, row-major
        let km = [[k[0], k[1]], [k[2], k[3]]];
        for i in 1..=4u32 {
            for j in 1..=4u32 {
                let (i1, i2) = ((i as usize - 1) / 2, (i as usize - 1) % 2);
                let (j1, j2) = ((j as usize - 1) / 2, (j as usize - 1) % 2);
                let want = km[i1][j1] * scale * km[i2][j2] * scale;
                let got = model.approximate_at(&[i, j]);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn batch_matches_single() {
        let layout = ModeLayout::new(&[2, 3]);
        let mut rng = stream_rng(5, Stream::ParamInit);
        let model = SeedModel::init(layout.clone(), 0.1, &mut rng);
        let mut batch = CodeBatch::with_capacity(layout.l_max(), 0);
        let mut singles = Vec::new();
        for i in 1..=4u32 {
            for j in 1..=8u32 {
                batch.push(&layout, &[i, j]);
                singles.push(model.approximate_at(&[i, j]));
            }
        }
        assert_eq!(approximate_batch(&model, &batch, Exec::Sequential), singles);
    }
}
