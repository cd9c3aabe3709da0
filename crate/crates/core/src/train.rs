//! Training: the sparsity-linear loss, manual reverse-mode gradients,
//! Adam, and the outer loop that alternates order updates with model
//! updates until the stopping rule fires.
//!
//! The loss over the padded space reduces to a sum over non-zeros plus a
//! closed-form term:
//!
//! ```text
//! ||X - X~||_F^2 = sum_{x != 0} (x^2 - 2 x x~) + q^l_max
//! ```
//!
//! so an epoch touches each stored entry once. The `q^l_max` gradient is
//! spread across batches in proportion to their size.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::baseline::SeedModel;
use crate::codec::ModeLayout;
use crate::error::{Error, Result};
use crate::exec::{map_chunks, Exec, CHUNK};
use crate::model::{FactorModel, KronModel};
use crate::order::{init_orders, update_order, InitStrategy, UpdateStats};
use crate::rng::RunStreams;
use crate::tensor::{OrderState, OrderedData, SparseArray};

/// Hyperparameters and ablation switches for one run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// Acceptance temperature; `inf` is hill climbing.
    #[serde(with = "serde_gamma")]
    pub gamma: f64,
    /// Reorder rounds per epoch.
    pub order_rounds: usize,
    /// Relative-improvement threshold of the stopping rule.
    pub epsilon: f64,
    /// Epochs without sufficient improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Initial order strategy; `None` picks shingle-sort for matrices and
    /// random for higher-order tensors.
    pub init: Option<InitChoice>,
    /// Sample swap pairs uniformly instead of matching shingles.
    pub no_minhash: bool,
    /// Freeze `q` so the model square sum equals the data square sum.
    pub fixed_q: bool,
    /// Replace the sequence model with per-shape seed factors.
    pub no_autoregressive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitChoice {
    Shingle,
    Random,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 30,
            learning_rate: 1e-2,
            gamma: 10.0,
            order_rounds: 2,
            epsilon: 1e-5,
            patience: 100,
            batch_size: 1 << 12,
            max_epochs: 10_000,
            seed: 0,
            init: None,
            no_minhash: false,
            fixed_q: false,
            no_autoregressive: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::InvalidConfig("gamma must be positive".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !self.no_autoregressive && self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden dim must be positive".into()));
        }
        Ok(())
    }

    fn init_strategy(&self, order: usize) -> InitStrategy {
        match self.init {
            Some(InitChoice::Shingle) => InitStrategy::ShingleSort,
            Some(InitChoice::Random) => InitStrategy::Random,
            None if order <= 2 => InitStrategy::ShingleSort,
            None => InitStrategy::Random,
        }
    }
}

/// JSON cannot hold infinity; encode it as the string "inf".
mod serde_gamma {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => s.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

/// Full loss of a model against ordered data: per-entry terms over the
/// non-zeros plus the closed-form square sum.
pub fn loss(model: &dyn FactorModel, ordered: &OrderedData, exec: Exec) -> f64 {
    let layout = model.layout();
    let (batch, values) = ordered.code_batch(layout, 0..ordered.data.nnz() as u32);
    let approx = crate::model::approximate_batch(model, &batch, exec);
    let data_term: f64 = map_chunks(exec, &values, CHUNK, |ci, chunk| {
        let mut acc = 0.0;
        for (i, &x) in chunk.iter().enumerate() {
            let a = approx[ci * CHUNK + i];
            acc += x * x - 2.0 * x * a;
        }
        acc
    })
    .into_iter()
    .sum();
    data_term + model.square_sum()
}

/// Gradient of one batch's share of the loss. `q_fraction` is the fraction
/// of the `q^l_max` term charged to this batch.
pub fn gradients(
    model: &dyn FactorModel,
    vocab: &[u32],
    values: &[f64],
    q_fraction: f64,
    exec: Exec,
) -> (f64, Vec<f64>) {
    let l = model.layout().l_max();
    let n = values.len();
    let p = model.params().len();
    let ids: Vec<usize> = (0..n).collect();
    let parts = map_chunks(exec, &ids, CHUNK, |_, chunk| {
        let mut grad = vec![0.0; p];
        let lo = chunk[0];
        let hi = chunk[chunk.len() - 1] + 1;
        let loss = model.grad_entries(&vocab[lo * l..hi * l], &values[lo..hi], &mut grad);
        (loss, grad)
    });
    let mut total = vec![0.0; p];
    let mut loss_sum = 0.0;
    for (l_part, g) in parts {
        loss_sum += l_part;
        for (t, v) in total.iter_mut().zip(&g) {
            *t += v;
        }
    }
    if q_fraction != 0.0 {
        let sq = model.square_sum();
        loss_sum += q_fraction * sq;
        total[model.log_q_offset()] += q_fraction * l as f64 * sq;
    }
    (loss_sum, total)
}

/// Adam with bias correction (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - Self::BETA1.powi(self.t as i32);
        let b2t = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub elapsed_s: f64,
}

/// Result of a training run: the best-loss snapshot plus bookkeeping.
pub struct TrainOutcome {
    pub model: crate::artifact::AnyModel,
    pub orders: OrderState,
    pub history: Vec<EpochRecord>,
    pub best_loss: f64,
    pub epochs_run: usize,
    /// Seconds spent in order updates and in model updates (including the
    /// per-epoch loss evaluation), for the scaling benchmarks.
    pub order_seconds: f64,
    pub model_seconds: f64,
}

enum Trainee {
    Lstm(KronModel),
    Seed(SeedModel),
}

impl Trainee {
    fn as_model(&self) -> &dyn FactorModel {
        match self {
            Trainee::Lstm(m) => m,
            Trainee::Seed(m) => m,
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Trainee::Lstm(m) => m.params_mut(),
            Trainee::Seed(m) => m.params_mut(),
        }
    }

    fn to_any(&self) -> crate::artifact::AnyModel {
        match self {
            Trainee::Lstm(m) => crate::artifact::AnyModel::Lstm(m.clone()),
            Trainee::Seed(m) => crate::artifact::AnyModel::Seed(m.clone()),
        }
    }
}

/// Train a model on `data` under `config`.
///
/// Per epoch: `order_rounds` rounds of order updates over every mode, then
/// one pass of Adam over the shuffled non-zeros, then a full loss
/// evaluation. Stops when the relative improvement over the best loss stays
/// below `epsilon` for `patience` consecutive epochs, and returns the
/// best-loss snapshot.
pub fn train(data: &SparseArray, config: &TrainConfig, exec: Exec) -> Result<TrainOutcome> {
    config.validate()?;
    let layout = ModeLayout::new(data.padded_log_dims());
    let l_max = layout.l_max();
    let mut streams = RunStreams::new(config.seed);

    // q initialized so the model square sum equals the data square sum
    let init_log_q = if l_max == 0 {
        0.0
    } else {
        data.value_sq_sum().ln() / l_max as f64
    };
    let mut trainee = if config.no_autoregressive {
        Trainee::Seed(SeedModel::init(
            layout.clone(),
            init_log_q,
            &mut streams.param_init,
        ))
    } else {
        Trainee::Lstm(KronModel::init(
            layout.clone(),
            config.hidden_dim,
            init_log_q,
            &mut streams.param_init,
        ))
    };
    let mut orders = init_orders(
        data,
        config.init_strategy(data.order()),
        &mut streams.order_init,
    );

    let nnz = data.nnz();
    let mut adam = Adam::new(trainee.as_model().params().len());
    let log_q_offset = trainee.as_model().log_q_offset();

    let mut history = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_snapshot = (trainee.to_any(), orders.clone());
    let mut stall = 0usize;
    let started = Instant::now();
    let mut order_seconds = 0.0;
    let mut model_seconds = 0.0;
    let mut entry_ids: Vec<u32> = (0..nnz as u32).collect();
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;

        let t0 = Instant::now();
        let mut round_stats: Vec<UpdateStats> = Vec::new();
        for _ in 0..config.order_rounds {
            for mode in 0..data.order() {
                round_stats.push(update_order(
                    trainee.as_model(),
                    data,
                    &mut orders,
                    mode,
                    config.gamma,
                    !config.no_minhash,
                    &mut streams,
                    exec,
                ));
            }
        }
        order_seconds += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        entry_ids.shuffle(&mut streams.batching);
        let ordered = OrderedData::new(data, &orders)?;
        for batch_ids in entry_ids.chunks(config.batch_size) {
            let (codes, values) = ordered.code_batch(&layout, batch_ids.iter().copied());
            let q_fraction = batch_ids.len() as f64 / nnz as f64;
            let (_, mut grads) = gradients(
                trainee.as_model(),
                &codes.vocab,
                &values,
                q_fraction,
                exec,
            );
            if config.fixed_q {
                grads[log_q_offset] = 0.0;
            }
            adam.step(trainee.params_mut(), &grads, config.learning_rate);
        }
        let epoch_loss = loss(trainee.as_model(), &ordered, exec);
        model_seconds += t1.elapsed().as_secs_f64();

        history.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            elapsed_s: started.elapsed().as_secs_f64(),
        });
        log::debug!("epoch {epoch}: loss {epoch_loss:.6e}");

        if epoch_loss < best_loss {
            if best_loss.is_finite() && (best_loss - epoch_loss) / best_loss < config.epsilon {
                stall += 1;
            } else {
                stall = 0;
            }
            best_loss = epoch_loss;
            best_snapshot = (trainee.to_any(), orders.clone());
        } else {
            stall += 1;
        }
        if stall >= config.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        model: best_snapshot.0,
        orders: best_snapshot.1,
        history,
        best_loss,
        epochs_run,
        order_seconds,
        model_seconds,
    })
}

/// Render the loss history as TSV (epoch, loss, elapsed seconds).
pub fn history_tsv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch\tloss\telapsed_s\n");
    for r in history {
        out.push_str(&format!("{}\t{}\t{:.6}\n", r.epoch, r.loss, r.elapsed_s));
    }
    out
}

/// The frozen-q value: `q = (sum x^2)^(1/l_max)` so that the model square
/// sum matches the data square sum.
pub fn fixed_q_log(data: &SparseArray) -> f64 {
    let l = ModeLayout::new(data.padded_log_dims()).l_max();
    if l == 0 {
        0.0
    } else {
        data.value_sq_sum().ln() / l as f64
    }
}
