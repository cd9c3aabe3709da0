//! Recursive synthetic generator: unit increments walk down the bisection
//! tree, picking the first half of every mode with probability `p` at each
//! level, until the target total mass is placed.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tensor::SparseArray;

/// Generator configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RmatConfig {
    /// Probability of the first partition at every split; skew.
    pub skew: f64,
    /// Log2 sizes of every mode.
    pub log_dims: Vec<u32>,
    /// Total mass to place (unit increments).
    pub value_sum: u64,
    pub seed: u64,
}

impl RmatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.skew > 0.5 && self.skew < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "skew must lie in (0.5, 1), got {}",
                self.skew
            )));
        }
        if self.value_sum == 0 {
            return Err(Error::InvalidConfig("value sum must be positive".into()));
        }
        if self.log_dims.is_empty() {
            return Err(Error::InvalidConfig("at least one mode required".into()));
        }
        let bits: u32 = self.log_dims.iter().sum();
        if bits > 62 {
            return Err(Error::InvalidConfig("padded space too large".into()));
        }
        Ok(())
    }
}

/// Generate a sparse tensor with exactly `value_sum` total mass.
pub fn rmat_generate(config: &RmatConfig) -> Result<SparseArray> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, Stream::Generate);
    let d = config.log_dims.len();
    let mut cells: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut pos = vec![0u32; d];
    for _ in 0..config.value_sum {
        for (m, &l) in config.log_dims.iter().enumerate() {
            let mut idx = 0u32;
            for _ in 0..l {
                let second = !rng.gen_bool(config.skew);
                idx = (idx << 1) | second as u32;
            }
            pos[m] = idx + 1;
        }
        *cells.entry(pos.clone()).or_insert(0) += 1;
    }
    let dims: Vec<u32> = config.log_dims.iter().map(|&l| 1u32 << l).collect();
    let mut entries: Vec<(Vec<u32>, f64)> = cells
        .into_iter()
        .map(|(idx, count)| (idx, count as f64))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    SparseArray::from_entries(d, Some(dims), entries)
}
