//! The constant-size model: embedding -> LSTM -> per-shape linear heads
//! with softplus, combined as a normalized product of small positive
//! factors, one per bisection step.
//!
//! For a position with vocabulary indices `v_1..v_L` the approximation is
//!
//! ```text
//! a~ = prod_{k=1..L} sqrt(q) * K_k[v_k] / ||K_k||_F
//! ```
//!
//! where `K_1 = softplus(raw_k1)` and, for `k >= 2`, `K_k` is produced by
//! the LSTM hidden state after consuming the embeddings of steps
//! `1..k-1`. Every factor entry is positive, so approximations never reach
//! zero, and the square sum of the approximation over the whole padded
//! space is exactly `q^L` regardless of the parameters — which is what the
//! sparsity-linear loss relies on.
//!
//! All parameters live in one flat `Vec<f64>`; gradients use the same
//! layout. Dot products use a fixed four-accumulator order so results are
//! reproducible bit-for-bit regardless of batching or thread count.

use std::ops::Range;

use rand::Rng;

use crate::codec::{CodeBatch, ModeLayout, PositionCode};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, Exec, CHUNK};

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of softplus expressed through its output: for `y = softplus(x)`,
/// `sigmoid(x) = 1 - exp(-y)`.
#[inline]
fn softplus_deriv_from_output(y: f64) -> f64 {
    1.0 - (-y).exp()
}

/// Deterministic dot product (fixed four-lane accumulation order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i + 4 <= n {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    while i < n {
        s0 += a[i] * b[i];
        i += 1;
    }
    (s0 + s1) + (s2 + s3)
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// The factors produced for one position code.
#[derive(Debug, Clone)]
pub struct FactorSequence {
    /// `K_1..K_L`, each over its step's vocabulary.
    pub factors: Vec<Vec<f64>>,
    /// Frobenius norm of each factor.
    pub norms: Vec<f64>,
}

/// Common surface of the LSTM model and the seed-factor baseline: flat
/// parameters plus batched forward/backward evaluation.
pub trait FactorModel: Send + Sync {
    fn layout(&self) -> &ModeLayout;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn log_q_offset(&self) -> usize;

    fn log_q(&self) -> f64 {
        self.params()[self.log_q_offset()]
    }

    fn q(&self) -> f64 {
        self.log_q().exp()
    }

    /// Exact sum of squared approximations over every padded cell: `q^l_max`.
    fn square_sum(&self) -> f64 {
        (self.log_q() * self.layout().l_max() as f64).exp()
    }

    /// Forward-evaluate `n` entries given as flat vocabulary indices.
    fn approx_entries(&self, vocab: &[u32], n: usize, out: &mut Vec<f64>);

    /// Accumulate the gradient of `sum_e (x_e^2 - 2 x_e a~_e)` into `grad`
    /// and return that sum. `grad` must have the parameter layout.
    fn grad_entries(&self, vocab: &[u32], values: &[f64], grad: &mut [f64]) -> f64;

    /// Single-position approximation (same arithmetic as the batched path).
    fn approximate(&self, code: &PositionCode) -> f64 {
        let vocab = self.layout().code_vocab(code);
        let mut out = Vec::with_capacity(1);
        self.approx_entries(&vocab, 1, &mut out);
        out[0]
    }

    /// Approximation at a 1-based padded position in user mode order.
    fn approximate_at(&self, pos: &[u32]) -> f64 {
        let l = self.layout().l_max();
        let mut vocab = vec![0u32; l];
        self.layout().encode_vocab_into(pos, &mut vocab);
        let mut out = Vec::with_capacity(1);
        self.approx_entries(&vocab, 1, &mut out);
        out[0]
    }
}

/// Batched approximation, chunked and reduced in a fixed order.
pub fn approximate_batch<M: FactorModel + ?Sized>(
    model: &M,
    batch: &CodeBatch,
    exec: Exec,
) -> Vec<f64> {
    let l = batch.l_max;
    let n = batch.len();
    if n == 0 {
        return Vec::new();
    }
    let ids: Vec<usize> = (0..n).collect();
    let chunks = map_chunks(exec, &ids, CHUNK, |_, chunk| {
        let mut out = Vec::with_capacity(chunk.len());
        let lo = chunk[0];
        let hi = chunk[chunk.len() - 1] + 1;
        model.approx_entries(&batch.vocab[lo * l..hi * l], chunk.len(), &mut out);
        out
    });
    let mut out = Vec::with_capacity(n);
    for c in chunks {
        out.extend_from_slice(&c);
    }
    out
}

/// Parameter segment offsets for the LSTM model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Segments {
    pub(crate) log_q: usize,
    pub(crate) raw_k1: Range<usize>,
    /// Indexed by shape size; empty ranges for absent shapes.
    pub(crate) emb: Vec<Range<usize>>,
    pub(crate) head_w: Vec<Range<usize>>,
    pub(crate) head_b: Vec<Range<usize>>,
    pub(crate) wi: Range<usize>,
    pub(crate) wh: Range<usize>,
    pub(crate) bias: Range<usize>,
    pub(crate) h0: Range<usize>,
    pub(crate) c0: Range<usize>,
    pub(crate) total: usize,
}

impl Segments {
    fn new(layout: &ModeLayout, h: usize) -> Self {
        let shapes = layout.distinct_shapes();
        let max_shape = shapes.iter().copied().max().unwrap_or(0);
        let mut off = 0usize;
        let mut take = |n: usize| {
            let r = off..off + n;
            off += n;
            r
        };
        let log_q = take(1).start;
        let raw_k1 = take(if layout.l_max() == 0 { 0 } else { 1 << layout.shape_size(1) });
        let mut emb = vec![0..0; max_shape + 1];
        let mut head_w = vec![0..0; max_shape + 1];
        let mut head_b = vec![0..0; max_shape + 1];
        for &s in &shapes {
            emb[s] = take((1 << s) * h);
            head_w[s] = take((1 << s) * h);
            head_b[s] = take(1 << s);
        }
        let wi = take(4 * h * h);
        let wh = take(4 * h * h);
        let bias = take(4 * h);
        let h0 = take(h);
        let c0 = take(h);
        Self {
            log_q,
            raw_k1,
            emb,
            head_w,
            head_b,
            wi,
            wh,
            bias,
            h0,
            c0,
            total: off,
        }
    }
}

/// The auto-regressive model.
#[derive(Debug, Clone)]
pub struct KronModel {
    layout: ModeLayout,
    hidden: usize,
    seg: Segments,
    params: Vec<f64>,
}

/// Reusable per-thread buffers for forward/backward passes.
struct Scratch {
    /// `h_0..h_{L-1}`: row 0 is the learnable initial state.
    hs: Vec<f64>,
    cs: Vec<f64>,
    /// Post-activation gates per LSTM step: i, f, g, o.
    gates: Vec<f64>,
    /// Factor values per step, padded to the widest vocabulary.
    ks: Vec<f64>,
    norms: Vec<f64>,
    gammas: Vec<f64>,
    da: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dx: Vec<f64>,
    dh_next: Vec<f64>,
    dc_next: Vec<f64>,
    dgamma: Vec<f64>,
    suffix: Vec<f64>,
}

impl Scratch {
    fn new(l: usize, h: usize, max_vocab: usize) -> Self {
        Self {
            hs: vec![0.0; l.max(1) * h],
            cs: vec![0.0; l.max(1) * h],
            gates: vec![0.0; l.saturating_sub(1) * 4 * h],
            ks: vec![0.0; l.max(1) * max_vocab],
            norms: vec![0.0; l],
            gammas: vec![0.0; l],
            da: vec![0.0; 4 * h],
            dh: vec![0.0; h],
            dc: vec![0.0; h],
            dx: vec![0.0; h],
            dh_next: vec![0.0; h],
            dc_next: vec![0.0; h],
            dgamma: vec![0.0; l],
            suffix: vec![0.0; l + 1],
        }
    }
}

impl KronModel {
    /// Fresh model with uniform `[-1/sqrt(h), 1/sqrt(h)]` weights, forget
    /// gate bias 1, and the given initial `log_q`.
    pub fn init<R: Rng>(layout: ModeLayout, hidden: usize, init_log_q: f64, rng: &mut R) -> Self {
        assert!(hidden >= 1, "hidden dimension must be at least 1");
        let seg = Segments::new(&layout, hidden);
        let mut params = vec![0.0; seg.total];
        let bound = 1.0 / (hidden as f64).sqrt();
        for p in params.iter_mut() {
            *p = rng.gen_range(-bound..bound);
        }
        params[seg.log_q] = init_log_q;
        // forget gate bias starts at 1 to keep early memory open
        for i in seg.bias.start + hidden..seg.bias.start + 2 * hidden {
            params[i] = 1.0;
        }
        Self {
            layout,
            hidden,
            seg,
            params,
        }
    }

    pub fn from_params(layout: ModeLayout, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let seg = Segments::new(&layout, hidden);
        if params.len() != seg.total {
            return Err(Error::InvalidModel(format!(
                "expected {} parameters, got {}",
                seg.total,
                params.len()
            )));
        }
        Ok(Self {
            layout,
            hidden,
            seg,
            params,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.seg.total
    }

    pub(crate) fn segments(&self) -> &Segments {
        &self.seg
    }

    fn max_vocab(&self) -> usize {
        self.layout
            .distinct_shapes()
            .iter()
            .map(|&s| 1usize << s)
            .max()
            .unwrap_or(1)
    }

    fn scratch(&self) -> Scratch {
        Scratch::new(self.layout.l_max(), self.hidden, self.max_vocab())
    }

    /// Embedding row for step `k` (1-based) and vocabulary index `v`.
    fn emb_row(&self, k: usize, v: u32) -> &[f64] {
        let s = self.layout.shape_size(k);
        let r = &self.seg.emb[s];
        let h = self.hidden;
        &self.params[r.start + v as usize * h..r.start + (v as usize + 1) * h]
    }

    /// One LSTM step; gates are written post-activation.
    fn lstm_step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates: &mut [f64],
        h_out: &mut [f64],
        c_out: &mut [f64],
    ) {
        let h = self.hidden;
        let wi = &self.params[self.seg.wi.clone()];
        let wh = &self.params[self.seg.wh.clone()];
        let b = &self.params[self.seg.bias.clone()];
        for r in 0..4 * h {
            let a = b[r] + dot(&wi[r * h..(r + 1) * h], x) + dot(&wh[r * h..(r + 1) * h], h_prev);
            gates[r] = if r / h == 2 { a.tanh() } else { sigmoid(a) };
        }
        let (gi, rest) = gates.split_at(h);
        let (gf, rest) = rest.split_at(h);
        let (gg, go) = rest.split_at(h);
        for j in 0..h {
            c_out[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
            h_out[j] = go[j] * c_out[j].tanh();
        }
    }

    /// Factor for step `k >= 2` from hidden state `y`.
    fn head_factor(&self, k: usize, y: &[f64], out: &mut [f64]) -> f64 {
        let s = self.layout.shape_size(k);
        let vocab = 1usize << s;
        let h = self.hidden;
        let w = &self.params[self.seg.head_w[s].clone()];
        let b = &self.params[self.seg.head_b[s].clone()];
        let mut sq = 0.0;
        for j in 0..vocab {
            let z = b[j] + dot(&w[j * h..(j + 1) * h], y);
            out[j] = softplus(z);
            sq += out[j] * out[j];
        }
        sq.sqrt()
    }

    fn k1_factor(&self, out: &mut [f64]) -> f64 {
        let raw = &self.params[self.seg.raw_k1.clone()];
        let mut sq = 0.0;
        for (o, &r) in out.iter_mut().zip(raw) {
            *o = softplus(r);
            sq += *o * *o;
        }
        sq.sqrt()
    }

    /// Run the full forward pass for one entry, saving everything the
    /// backward pass needs into `scr`. Returns the approximation.
    fn forward_saved(&self, vocab: &[u32], scr: &mut Scratch) -> f64 {
        let l = self.layout.l_max();
        if l == 0 {
            return 1.0;
        }
        let h = self.hidden;
        let mv = self.max_vocab();
        let sqrt_q = (0.5 * self.params[self.seg.log_q]).exp();

        let k1len = 1usize << self.layout.shape_size(1);
        scr.norms[0] = self.k1_factor(&mut scr.ks[..k1len]);
        scr.gammas[0] = sqrt_q * scr.ks[vocab[0] as usize] / scr.norms[0];

        scr.hs[..h].copy_from_slice(&self.params[self.seg.h0.clone()]);
        scr.cs[..h].copy_from_slice(&self.params[self.seg.c0.clone()]);
        for k in 2..=l {
            let t = k - 1; // LSTM step index, 1-based
            let x = self.emb_row(t, vocab[t - 1]);
            {
                let (prev_h, cur_h) = scr.hs.split_at_mut(t * h);
                let (prev_c, cur_c) = scr.cs.split_at_mut(t * h);
                self.lstm_step(
                    x,
                    &prev_h[(t - 1) * h..],
                    &prev_c[(t - 1) * h..],
                    &mut scr.gates[(t - 1) * 4 * h..t * 4 * h],
                    &mut cur_h[..h],
                    &mut cur_c[..h],
                );
            }
            let klen = 1usize << self.layout.shape_size(k);
            let y = &scr.hs[t * h..(t + 1) * h];
            let norm = self.head_factor(k, y, &mut scr.ks[(k - 1) * mv..(k - 1) * mv + klen]);
            scr.norms[k - 1] = norm;
            scr.gammas[k - 1] = sqrt_q * scr.ks[(k - 1) * mv + vocab[k - 1] as usize] / norm;
        }
        scr.gammas[..l].iter().product()
    }

    /// Forward pass without saving intermediate state. Uses the first two
    /// `h`-slots of the hidden/cell buffers as a double buffer.
    fn forward_only(&self, vocab: &[u32], scr: &mut Scratch) -> f64 {
        let l = self.layout.l_max();
        if l == 0 {
            return 1.0;
        }
        let h = self.hidden;
        let sqrt_q = (0.5 * self.params[self.seg.log_q]).exp();

        let k1len = 1usize << self.layout.shape_size(1);
        let norm = self.k1_factor(&mut scr.ks[..k1len]);
        let mut acc = sqrt_q * scr.ks[vocab[0] as usize] / norm;

        scr.hs[..h].copy_from_slice(&self.params[self.seg.h0.clone()]);
        scr.cs[..h].copy_from_slice(&self.params[self.seg.c0.clone()]);
        let mut cur = 0usize;
        for k in 2..=l {
            let t = k - 1;
            let x = self.emb_row(t, vocab[t - 1]);
            {
                let (h_lo, h_hi) = scr.hs.split_at_mut(h);
                let (c_lo, c_hi) = scr.cs.split_at_mut(h);
                if cur == 0 {
                    self.lstm_step(x, h_lo, c_lo, &mut scr.da, &mut h_hi[..h], &mut c_hi[..h]);
                } else {
                    self.lstm_step(x, &h_hi[..h], &c_hi[..h], &mut scr.da, h_lo, c_lo);
                }
            }
            cur ^= 1;
            let klen = 1usize << self.layout.shape_size(k);
            let y = &scr.hs[cur * h..cur * h + h];
            let norm = self.head_factor(k, y, &mut scr.ks[..klen]);
            acc *= sqrt_q * scr.ks[vocab[k - 1] as usize] / norm;
        }
        acc
    }

    /// Factors `K_1..K_L` for one code.
    pub fn forward_factors(&self, code: &PositionCode) -> FactorSequence {
        let vocab = self.layout.code_vocab(code);
        let mut scr = self.scratch();
        let _ = self.forward_saved(&vocab, &mut scr);
        let mv = self.max_vocab();
        let l = self.layout.l_max();
        let mut factors = Vec::with_capacity(l);
        for k in 1..=l {
            let len = 1usize << self.layout.shape_size(k);
            factors.push(scr.ks[(k - 1) * mv..(k - 1) * mv + len].to_vec());
        }
        FactorSequence {
            factors,
            norms: scr.norms[..l].to_vec(),
        }
    }

    /// Backward pass for one entry: accumulate `d(co * a~)/d(params)` into
    /// `grad`, where `co` is the incoming cotangent `dL/da~`.
    fn backward_saved(&self, vocab: &[u32], co: f64, scr: &mut Scratch, grad: &mut [f64]) {
        let l = self.layout.l_max();
        if l == 0 {
            return;
        }
        let h = self.hidden;
        let mv = self.max_vocab();
        let sqrt_q = (0.5 * self.params[self.seg.log_q]).exp();
        let atilde: f64 = scr.gammas[..l].iter().product();

        // d a~ / d gamma_k = prefix * suffix
        scr.suffix[l] = 1.0;
        for k in (0..l).rev() {
            scr.suffix[k] = scr.suffix[k + 1] * scr.gammas[k];
        }
        // log_q: each factor carries sqrt(q)
        grad[self.seg.log_q] += co * atilde * l as f64 * 0.5;

        let mut prefix = 1.0;
        for k in 0..l {
            scr.dgamma[k] = co * prefix * scr.suffix[k + 1];
            prefix *= scr.gammas[k];
        }
        scr.dh_next.iter_mut().for_each(|v| *v = 0.0);
        scr.dc_next.iter_mut().for_each(|v| *v = 0.0);

        // K_1 through softplus(raw_k1)
        {
            let v = vocab[0] as usize;
            let klen = 1usize << self.layout.shape_size(1);
            let norm = scr.norms[0];
            let kv = scr.ks[v];
            let raw = self.seg.raw_k1.clone();
            for j in 0..klen {
                let kj = scr.ks[j];
                let mut d = -sqrt_q * kv * kj / (norm * norm * norm);
                if j == v {
                    d += sqrt_q / norm;
                }
                let dz = scr.dgamma[0] * d * softplus_deriv_from_output(kj);
                grad[raw.start + j] += dz;
            }
        }

        // Reverse time loop: the hidden state of LSTM step t produced
        // factor k = t + 1, so its head is unwound here as well.
        for t in (1..l).rev() {
            let k = t + 1;
            let s = self.layout.shape_size(k);
            let klen = 1usize << s;
            let norm = scr.norms[k - 1];
            let base = (k - 1) * mv;
            let v = vocab[k - 1] as usize;
            let kv = scr.ks[base + v];

            // head backward: dz into W, b, and dh_t
            let (dh, dh_next) = (&mut scr.dh, &scr.dh_next);
            dh.copy_from_slice(dh_next);
            let hw = self.seg.head_w[s].clone();
            let hb = self.seg.head_b[s].clone();
            for j in 0..klen {
                let kj = scr.ks[base + j];
                let mut d = -sqrt_q * kv * kj / (norm * norm * norm);
                if j == v {
                    d += sqrt_q / norm;
                }
                let dz = scr.dgamma[k - 1] * d * softplus_deriv_from_output(kj);
                grad[hb.start + j] += dz;
                axpy(
                    &mut grad[hw.start + j * h..hw.start + (j + 1) * h],
                    dz,
                    &scr.hs[t * h..(t + 1) * h],
                );
                axpy(
                    &mut scr.dh,
                    dz,
                    &self.params[hw.start + j * h..hw.start + (j + 1) * h],
                );
            }

            // LSTM step backward
            {
                let gates = &scr.gates[(t - 1) * 4 * h..t * 4 * h];
                let (gi, rest) = gates.split_at(h);
                let (gf, rest) = rest.split_at(h);
                let (gg, go) = rest.split_at(h);
                let c_t = &scr.cs[t * h..(t + 1) * h];
                let c_prev = &scr.cs[(t - 1) * h..t * h];
                for j in 0..h {
                    let tc = c_t[j].tanh();
                    let dh_j = scr.dh[j];
                    let dc_j = scr.dc_next[j] + dh_j * go[j] * (1.0 - tc * tc);
                    scr.da[j] = dc_j * gg[j] * gi[j] * (1.0 - gi[j]);
                    scr.da[h + j] = dc_j * c_prev[j] * gf[j] * (1.0 - gf[j]);
                    scr.da[2 * h + j] = dc_j * gi[j] * (1.0 - gg[j] * gg[j]);
                    scr.da[3 * h + j] = dh_j * tc * go[j] * (1.0 - go[j]);
                    scr.dc[j] = dc_j * gf[j];
                }
            }
            scr.dc_next.copy_from_slice(&scr.dc);
            let x = self.emb_row(t, vocab[t - 1]);
            scr.dx.iter_mut().for_each(|v| *v = 0.0);
            scr.dh_next.iter_mut().for_each(|v| *v = 0.0);
            let wi = self.seg.wi.clone();
            let wh = self.seg.wh.clone();
            let bias = self.seg.bias.clone();
            for r in 0..4 * h {
                let da_r = scr.da[r];
                if da_r != 0.0 {
                    axpy(&mut grad[wi.start + r * h..wi.start + (r + 1) * h], da_r, x);
                    axpy(
                        &mut grad[wh.start + r * h..wh.start + (r + 1) * h],
                        da_r,
                        &scr.hs[(t - 1) * h..t * h],
                    );
                    grad[bias.start + r] += da_r;
                    axpy(
                        &mut scr.dx,
                        da_r,
                        &self.params[wi.start + r * h..wi.start + (r + 1) * h],
                    );
                    axpy(
                        &mut scr.dh_next,
                        da_r,
                        &self.params[wh.start + r * h..wh.start + (r + 1) * h],
                    );
                }
            }
            // embedding gradient
            let es = self.layout.shape_size(t);
            let er = self.seg.emb[es].clone();
            axpy(
                &mut grad[er.start + vocab[t - 1] as usize * h
                    ..er.start + (vocab[t - 1] as usize + 1) * h],
                1.0,
                &scr.dx,
            );
        }

        // initial state
        axpy(&mut grad[self.seg.h0.clone()], 1.0, &scr.dh_next);
        axpy(&mut grad[self.seg.c0.clone()], 1.0, &scr.dc_next);
    }
}

impl FactorModel for KronModel {
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
        self.seg.log_q
    }

    fn approx_entries(&self, vocab: &[u32], n: usize, out: &mut Vec<f64>) {
        let l = self.layout.l_max();
        let mut scr = self.scratch();
        for e in 0..n {
            out.push(self.forward_only(&vocab[e * l..(e + 1) * l], &mut scr));
        }
    }

    fn grad_entries(&self, vocab: &[u32], values: &[f64], grad: &mut [f64]) -> f64 {
        let l = self.layout.l_max();
        let mut scr = self.scratch();
        let mut loss = 0.0;
        for (e, &x) in values.iter().enumerate() {
            let vs = &vocab[e * l..(e + 1) * l];
            let atilde = self.forward_saved(vs, &mut scr);
            loss += x * x - 2.0 * x * atilde;
            self.backward_saved(vs, -2.0 * x, &mut scr, grad);
        }
        loss
    }
}
