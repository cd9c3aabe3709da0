//! Model artifact: a versioned JSON file holding every learnable parameter
//! plus the geometry needed to stand alone (dims, padded log dims, mode
//! permutation). serde_json prints floats with the shortest representation
//! that round-trips exactly, so save/load is lossless.

use serde::{Deserialize, Serialize};

use crate::baseline::SeedModel;
use crate::codec::ModeLayout;
use crate::error::{Error, Result};
use crate::model::{FactorModel, KronModel};

pub const ARTIFACT_VERSION: u32 = 1;

/// Either trained model kind, behind one object.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Lstm(KronModel),
    Seed(SeedModel),
}

impl AnyModel {
    pub fn as_factor_model(&self) -> &dyn FactorModel {
        match self {
            AnyModel::Lstm(m) => m,
            AnyModel::Seed(m) => m,
        }
    }

    pub fn as_factor_model_mut(&mut self) -> &mut dyn FactorModel {
        match self {
            AnyModel::Lstm(m) => m,
            AnyModel::Seed(m) => m,
        }
    }

    pub fn layout(&self) -> &ModeLayout {
        self.as_factor_model().layout()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ShapeTable {
    shape: usize,
    table: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShapeHead {
    shape: usize,
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShapeSeed {
    shape: usize,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LstmParams {
    wi: Vec<Vec<f64>>,
    wh: Vec<Vec<f64>>,
    b: Vec<f64>,
    h0: Vec<f64>,
    c0: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kind: String,
    order: usize,
    hidden: usize,
    /// Logical dims, user mode order.
    dims: Vec<u32>,
    /// Padded log dims, user mode order.
    padded_log_dims: Vec<u32>,
    /// Internal slot -> user mode.
    mode_permutation: Vec<usize>,
    log_q: f64,
    #[serde(default)]
    raw_k1: Vec<f64>,
    #[serde(default)]
    embeddings: Vec<ShapeTable>,
    #[serde(default)]
    lstm: Option<LstmParams>,
    #[serde(default)]
    heads: Vec<ShapeHead>,
    #[serde(default)]
    seeds: Vec<ShapeSeed>,
}

fn chunk_rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).map(|c| c.to_vec()).collect()
}

fn flatten_rows(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        if r.len() != cols {
            return Err(Error::InvalidModel(format!(
                "{what}: expected rows of {cols} values, got {}",
                r.len()
            )));
        }
        out.extend_from_slice(r);
    }
    Ok(out)
}

/// Serialize a trained model (with the logical dims it was trained on).
pub fn model_to_json(model: &AnyModel, dims: &[u32]) -> String {
    let layout = model.layout();
    let file = match model {
        AnyModel::Lstm(m) => {
            let h = m.hidden_dim();
            let shapes = layout.distinct_shapes();
            let p = m.params();
            let seg = m.segments();
            ModelFile {
                version: ARTIFACT_VERSION,
                kind: "lstm".into(),
                order: layout.order(),
                hidden: h,
                dims: dims.to_vec(),
                padded_log_dims: layout.user_log_dims().to_vec(),
                mode_permutation: layout.mode_perm().to_vec(),
                log_q: m.log_q(),
                raw_k1: p[seg.raw_k1.clone()].to_vec(),
                embeddings: shapes
                    .iter()
                    .map(|&s| ShapeTable {
                        shape: s,
                        table: chunk_rows(&p[seg.emb[s].clone()], h),
                    })
                    .collect(),
                lstm: Some(LstmParams {
                    wi: chunk_rows(&p[seg.wi.clone()], h),
                    wh: chunk_rows(&p[seg.wh.clone()], h),
                    b: p[seg.bias.clone()].to_vec(),
                    h0: p[seg.h0.clone()].to_vec(),
                    c0: p[seg.c0.clone()].to_vec(),
                }),
                heads: shapes
                    .iter()
                    .map(|&s| ShapeHead {
                        shape: s,
                        w: chunk_rows(&p[seg.head_w[s].clone()], h),
                        b: p[seg.head_b[s].clone()].to_vec(),
                    })
                    .collect(),
                seeds: Vec::new(),
            }
        }
        AnyModel::Seed(m) => {
            let shapes = layout.distinct_shapes();
            let p = m.params();
            ModelFile {
                version: ARTIFACT_VERSION,
                kind: "seed".into(),
                order: layout.order(),
                hidden: 0,
                dims: dims.to_vec(),
                padded_log_dims: layout.user_log_dims().to_vec(),
                mode_permutation: layout.mode_perm().to_vec(),
                log_q: m.log_q(),
                raw_k1: Vec::new(),
                embeddings: Vec::new(),
                lstm: None,
                heads: Vec::new(),
                seeds: shapes
                    .iter()
                    .map(|&s| ShapeSeed {
                        shape: s,
                        values: p[m.seed_range(s)].to_vec(),
                    })
                    .collect(),
            }
        }
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

/// Deserialize a model file; returns the model and its logical dims.
pub fn model_from_json(text: &str) -> Result<(AnyModel, Vec<u32>)> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
    if file.version != ARTIFACT_VERSION {
        return Err(Error::InvalidModel(format!(
            "unsupported version {}",
            file.version
        )));
    }
    if file.dims.len() != file.order || file.padded_log_dims.len() != file.order {
        return Err(Error::InvalidModel("dims/order mismatch".into()));
    }
    for (d, (&n, &l)) in file.dims.iter().zip(&file.padded_log_dims).enumerate() {
        if crate::tensor::ceil_log2(n.max(1)) != l {
            return Err(Error::InvalidModel(format!(
                "mode {d}: padded log dim {l} does not match dim {n}"
            )));
        }
    }
    let layout = ModeLayout::new(&file.padded_log_dims);
    if layout.mode_perm() != file.mode_permutation.as_slice() {
        return Err(Error::InvalidModel("inconsistent mode permutation".into()));
    }
    let shapes = layout.distinct_shapes();
    let model = match file.kind.as_str() {
        "lstm" => {
            let h = file.hidden;
            if h == 0 {
                return Err(Error::InvalidModel("lstm model with hidden dim 0".into()));
            }
            let probe = {
                let mut rng = crate::rng::stream_rng(0, crate::rng::Stream::ParamInit);
                KronModel::init(layout.clone(), h, 0.0, &mut rng)
            };
            let seg = probe.segments().clone();
            let mut params = vec![0.0; probe.param_count()];
            params[seg.log_q] = file.log_q;
            if file.raw_k1.len() != seg.raw_k1.len() {
                return Err(Error::InvalidModel("raw_k1 size mismatch".into()));
            }
            params[seg.raw_k1.clone()].copy_from_slice(&file.raw_k1);
            for table in &file.embeddings {
                if !shapes.contains(&table.shape) {
                    return Err(Error::InvalidModel(format!(
                        "unexpected embedding shape {}",
                        table.shape
                    )));
                }
                let r = seg.emb[table.shape].clone();
                let flat = flatten_rows(&table.table, h, "embedding")?;
                if flat.len() != r.len() {
                    return Err(Error::InvalidModel("embedding size mismatch".into()));
                }
                params[r].copy_from_slice(&flat);
            }
            for head in &file.heads {
                if !shapes.contains(&head.shape) {
                    return Err(Error::InvalidModel(format!(
                        "unexpected head shape {}",
                        head.shape
                    )));
                }
                let rw = seg.head_w[head.shape].clone();
                let flat = flatten_rows(&head.w, h, "head")?;
                if flat.len() != rw.len() || head.b.len() != seg.head_b[head.shape].len() {
                    return Err(Error::InvalidModel("head size mismatch".into()));
                }
                params[rw].copy_from_slice(&flat);
                params[seg.head_b[head.shape].clone()].copy_from_slice(&head.b);
            }
            let lstm = file
                .lstm
                .as_ref()
                .ok_or_else(|| Error::InvalidModel("missing lstm block".into()))?;
            let wi = flatten_rows(&lstm.wi, h, "lstm.wi")?;
            let wh = flatten_rows(&lstm.wh, h, "lstm.wh")?;
            if wi.len() != seg.wi.len()
                || wh.len() != seg.wh.len()
                || lstm.b.len() != seg.bias.len()
                || lstm.h0.len() != seg.h0.len()
                || lstm.c0.len() != seg.c0.len()
            {
                return Err(Error::InvalidModel("lstm size mismatch".into()));
            }
            params[seg.wi.clone()].copy_from_slice(&wi);
            params[seg.wh.clone()].copy_from_slice(&wh);
            params[seg.bias.clone()].copy_from_slice(&lstm.b);
            params[seg.h0.clone()].copy_from_slice(&lstm.h0);
            params[seg.c0.clone()].copy_from_slice(&lstm.c0);
            AnyModel::Lstm(KronModel::from_params(layout, h, params)?)
        }
        "seed" => {
            let probe = {
                let mut rng = crate::rng::stream_rng(0, crate::rng::Stream::ParamInit);
                SeedModel::init(layout.clone(), 0.0, &mut rng)
            };
            let mut params = vec![0.0; probe.param_count()];
            params[0] = file.log_q;
            for seed in &file.seeds {
                if !shapes.contains(&seed.shape) {
                    return Err(Error::InvalidModel(format!(
                        "unexpected seed shape {}",
                        seed.shape
                    )));
                }
                let r = probe.seed_range(seed.shape);
                if seed.values.len() != r.len() {
                    return Err(Error::InvalidModel("seed size mismatch".into()));
                }
                params[r].copy_from_slice(&seed.values);
            }
            AnyModel::Seed(SeedModel::from_params(layout, params)?)
        }
        other => {
            return Err(Error::InvalidModel(format!("unknown model kind {other:?}")));
        }
    };
    Ok((model, file.dims))
}
