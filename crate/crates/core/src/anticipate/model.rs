//! Attention message-passing regressor over scene graphs.
//!
//! Three graph-transformer layers, each followed by a leaky ReLU, then
//! mean and sum pooling concatenated into a linear head. Gradients are
//! computed by hand; [`gradient_check`] compares them to finite differences.

use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{encode_state, SceneGraph};
use super::schema::FeatureSchema;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::world::{CostEstimator, WorldState};

pub const CHECKPOINT_FORMAT: &str = "antplan-model";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const LAYERS: usize = 3;
const PER_LAYER: usize = 9;
const LEAK: f64 = 0.01;

const WQ: usize = 0;
const BQ: usize = 1;
const WK: usize = 2;
const BK: usize = 3;
const WV: usize = 4;
const BV: usize = 5;
const WE: usize = 6;
const WS: usize = 7;
const BS: usize = 8;

/// Per-column z-scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Statistics over the stacked rows of `blocks`. Constant columns get unit scale.
    pub fn fit<'a>(dim: usize, blocks: impl Iterator<Item = &'a Array2<f64>>) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for b in blocks {
            for row in b.rows() {
                n += 1;
                for (c, v) in row.iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var.sqrt() < 1e-9 {
                    1.0
                } else {
                    var.sqrt()
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorModel {
    pub format: String,
    pub version: u32,
    pub schema: FeatureSchema,
    pub schema_hash: String,
    pub hidden: usize,
    pub node_norm: Normalizer,
    pub edge_norm: Normalizer,
    pub label_mean: f64,
    pub label_std: f64,
    pub params: Vec<Array2<f64>>,
}

/// Directed view of an undirected graph: every edge in both directions.
struct Directed {
    src: Vec<usize>,
    dst: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    features: Array2<f64>,
}

impl Directed {
    fn new(g: &SceneGraph, edge_features: &Array2<f64>) -> Self {
        let m = g.edges.len();
        let mut src = Vec::with_capacity(2 * m);
        let mut dst = Vec::with_capacity(2 * m);
        let mut rows = Vec::with_capacity(2 * m);
        for (e, &(i, j)) in g.edges.iter().enumerate() {
            src.extend([i, j]);
            dst.extend([j, i]);
            rows.extend([e, e]);
        }
        let mut incoming = vec![Vec::new(); g.node_count()];
        for (e, &d) in dst.iter().enumerate() {
            incoming[d].push(e);
        }
        let features = edge_features.select(Axis(0), &rows);
        Directed { src, dst, incoming, features }
    }
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    ee: Array2<f64>,
    alpha: Vec<f64>,
    pre: Array2<f64>,
}

struct Cache {
    graph: Directed,
    layers: Vec<LayerCache>,
    pooled: Array2<f64>,
    nodes: usize,
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAK * x
    }
}

fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAK
    }
}

fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

impl EstimatorModel {
    /// Freshly initialized model with identity normalization.
    pub fn new<R: Rng + ?Sized>(schema: FeatureSchema, hidden: usize, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(LAYERS * PER_LAYER + 2);
        let mut din = schema.node_dim;
        for _ in 0..LAYERS {
            for (rows, cols, bias) in [
                (din, hidden, false),
                (1, hidden, true),
                (din, hidden, false),
                (1, hidden, true),
                (din, hidden, false),
                (1, hidden, true),
                (schema.edge_dim, hidden, false),
                (din, hidden, false),
                (1, hidden, true),
            ] {
                params.push(if bias { Array2::zeros((rows, cols)) } else { glorot(rows, cols, rng) });
            }
            din = hidden;
        }
        params.push(glorot(2 * hidden, 1, rng));
        params.push(Array2::zeros((1, 1)));
        let schema_hash = schema.hash();
        EstimatorModel {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            node_norm: Normalizer::identity(schema.node_dim),
            edge_norm: Normalizer::identity(schema.edge_dim),
            schema,
            schema_hash,
            hidden,
            label_mean: 0.0,
            label_std: 1.0,
            params,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    fn check_shape(&self, g: &SceneGraph) -> Result<()> {
        if g.node_dim() != self.schema.node_dim || g.edge_features.ncols() != self.schema.edge_dim {
            return Err(Error::Schema(format!(
                "graph has node/edge dims {}/{}, model expects {}/{}",
                g.node_dim(),
                g.edge_features.ncols(),
                self.schema.node_dim,
                self.schema.edge_dim
            )));
        }
        Ok(())
    }

    fn forward_with(&self, params: &[Array2<f64>], g: &SceneGraph) -> (f64, Cache) {
        let d = self.hidden;
        let scale = 1.0 / (d as f64).sqrt();
        let graph = Directed::new(g, &self.edge_norm.apply(&g.edge_features));
        let mut h = self.node_norm.apply(&g.node_features);
        let n = h.nrows();
        let mut layers = Vec::with_capacity(LAYERS);
        for l in 0..LAYERS {
            let p = &params[l * PER_LAYER..(l + 1) * PER_LAYER];
            let q = affine(&h, &p[WQ], &p[BQ]);
            let k = affine(&h, &p[WK], &p[BK]);
            let v = affine(&h, &p[WV], &p[BV]);
            let ee = graph.features.dot(&p[WE]);
            let mut alpha = vec![0.0; graph.src.len()];
            for inc in &graph.incoming {
                if inc.is_empty() {
                    continue;
                }
                let mut max = f64::NEG_INFINITY;
                for &e in inc {
                    let (i, j) = (graph.dst[e], graph.src[e]);
                    let key = &k.row(j) + &ee.row(e);
                    alpha[e] = dot(q.row(i), key.view()) * scale;
                    max = max.max(alpha[e]);
                }
                let mut z = 0.0;
                for &e in inc {
                    alpha[e] = (alpha[e] - max).exp();
                    z += alpha[e];
                }
                for &e in inc {
                    alpha[e] /= z;
                }
            }
            let mut pre = affine(&h, &p[WS], &p[BS]);
            for e in 0..graph.src.len() {
                let (i, j) = (graph.dst[e], graph.src[e]);
                let a = alpha[e];
                let mut row = pre.row_mut(i);
                row.scaled_add(a, &v.row(j));
                row.scaled_add(a, &ee.row(e));
            }
            let next = pre.mapv(leaky);
            layers.push(LayerCache { input: h, q, k, v, ee, alpha, pre });
            h = next;
        }
        let sum = h.sum_axis(Axis(0));
        let mean = &sum / n.max(1) as f64;
        let mut pooled = Array2::zeros((1, 2 * d));
        pooled.slice_mut(s![0, ..d]).assign(&mean);
        pooled.slice_mut(s![0, d..]).assign(&sum);
        let head = &params[LAYERS * PER_LAYER];
        let bias = &params[LAYERS * PER_LAYER + 1];
        let y = pooled.dot(head)[[0, 0]] + bias[[0, 0]];
        (y, Cache { graph, layers, pooled, nodes: n })
    }

    fn backward_with(&self, params: &[Array2<f64>], cache: &Cache, dy: f64, grads: &mut [Array2<f64>]) {
        let d = self.hidden;
        let scale = 1.0 / (d as f64).sqrt();
        let head = &params[LAYERS * PER_LAYER];
        grads[LAYERS * PER_LAYER].scaled_add(dy, &cache.pooled.t());
        grads[LAYERS * PER_LAYER + 1][[0, 0]] += dy;
        let dpooled: Array1<f64> = head.column(0).to_owned() * dy;
        let row = &dpooled.slice(s![..d]) / cache.nodes.max(1) as f64 + &dpooled.slice(s![d..]);
        let mut dh = Array2::zeros((cache.nodes, d));
        for mut r in dh.rows_mut() {
            r.assign(&row);
        }
        let graph = &cache.graph;
        for l in (0..LAYERS).rev() {
            let c = &cache.layers[l];
            let p = &params[l * PER_LAYER..(l + 1) * PER_LAYER];
            let g = &mut grads[l * PER_LAYER..(l + 1) * PER_LAYER];
            let dpre = &dh * &c.pre.mapv(leaky_grad);

            g[WS] += &c.input.t().dot(&dpre);
            g[BS] += &dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
            let mut dinput = dpre.dot(&p[WS].t());

            let m = graph.src.len();
            let mut dq = Array2::zeros(c.q.raw_dim());
            let mut dk = Array2::zeros(c.k.raw_dim());
            let mut dv = Array2::zeros(c.v.raw_dim());
            let mut dee = Array2::zeros(c.ee.raw_dim());
            let mut dalpha = vec![0.0; m];
            for e in 0..m {
                let (i, j) = (graph.dst[e], graph.src[e]);
                let up = dpre.row(i);
                dalpha[e] = dot(up, c.v.row(j)) + dot(up, c.ee.row(e));
                dv.row_mut(j).scaled_add(c.alpha[e], &up);
                dee.row_mut(e).scaled_add(c.alpha[e], &up);
            }
            for inc in &graph.incoming {
                let s: f64 = inc.iter().map(|&e| c.alpha[e] * dalpha[e]).sum();
                for &e in inc {
                    let (i, j) = (graph.dst[e], graph.src[e]);
                    let ds = c.alpha[e] * (dalpha[e] - s) * scale;
                    let key = &c.k.row(j) + &c.ee.row(e);
                    dq.row_mut(i).scaled_add(ds, &key);
                    dk.row_mut(j).scaled_add(ds, &c.q.row(i));
                    dee.row_mut(e).scaled_add(ds, &c.q.row(i));
                }
            }
            for (w, b, dz) in [(WQ, BQ, &dq), (WK, BK, &dk), (WV, BV, &dv)] {
                g[w] += &c.input.t().dot(dz);
                g[b] += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
                dinput += &dz.dot(&p[w].t());
            }
            g[WE] += &graph.features.t().dot(&dee);
            dh = dinput;
        }
    }

    pub fn zero_grads(&self) -> Vec<Array2<f64>> {
        self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect()
    }

    /// Raw head output in normalized label units.
    pub fn forward(&self, g: &SceneGraph) -> Result<f64> {
        self.check_shape(g)?;
        Ok(self.forward_with(&self.params, g).0)
    }

    /// Adds `dy * d(output)/d(params)` into `grads` and returns the output.
    pub fn accumulate_gradient(&self, g: &SceneGraph, dy_of: impl FnOnce(f64) -> f64, grads: &mut [Array2<f64>]) -> Result<f64> {
        self.check_shape(g)?;
        let (y, cache) = self.forward_with(&self.params, g);
        self.backward_with(&self.params, &cache, dy_of(y), grads);
        Ok(y)
    }

    /// Predicted cost in label units, floored at zero.
    pub fn predict(&self, g: &SceneGraph) -> Result<f64> {
        Ok((self.forward(g)? * self.label_std + self.label_mean).max(0.0))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: EstimatorModel = serde_json::from_reader(f)?;
        if model.format != CHECKPOINT_FORMAT || model.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!("unsupported checkpoint {} v{}", model.format, model.version)));
        }
        if model.schema.hash() != model.schema_hash {
            return Err(Error::Schema("checkpoint schema hash does not match its schema".into()));
        }
        let fresh = EstimatorModel::new(model.schema.clone(), model.hidden, &mut crate::rng::seeded(0));
        let shapes_ok = fresh.params.len() == model.params.len()
            && fresh.params.iter().zip(&model.params).all(|(a, b)| a.shape() == b.shape());
        if !shapes_ok || model.params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Schema("checkpoint weights have unexpected shapes or non-finite values".into()));
        }
        Ok(model)
    }
}

/// Per-layer relative error `|a - n| / max(|a|, |n|)` between analytic and
/// central-difference gradients of the raw output, each layer's parameters
/// taken as one vector. The last entry covers the output head.
pub fn gradient_check(model: &EstimatorModel, g: &SceneGraph, step: f64) -> Vec<f64> {
    let (_, cache) = model.forward_with(&model.params, g);
    let mut analytic = model.zero_grads();
    model.backward_with(&model.params, &cache, 1.0, &mut analytic);
    let mut params = model.params.clone();
    // Per layer: squared norms of the difference, analytic and numeric.
    let mut sums = vec![[0.0f64; 3]; LAYERS + 1];
    for t in 0..params.len() {
        let layer = (t / PER_LAYER).min(LAYERS);
        for idx in 0..params[t].len() {
            let orig = params[t].as_slice().unwrap()[idx];
            params[t].as_slice_mut().unwrap()[idx] = orig + step;
            let up = model.forward_with(&params, g).0;
            params[t].as_slice_mut().unwrap()[idx] = orig - step;
            let down = model.forward_with(&params, g).0;
            params[t].as_slice_mut().unwrap()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let exact = analytic[t].as_slice().unwrap()[idx];
            sums[layer][0] += (numeric - exact).powi(2);
            sums[layer][1] += exact * exact;
            sums[layer][2] += numeric * numeric;
        }
    }
    sums.iter()
        .map(|[d, a, n]| {
            let scale = a.max(*n).sqrt();
            if scale == 0.0 {
                d.sqrt()
            } else {
                d.sqrt() / scale
            }
        })
        .collect()
}

/// Trained model bound to a scenario.
pub struct LearnedEstimator {
    scenario: Arc<Scenario>,
    model: EstimatorModel,
}

impl LearnedEstimator {
    pub fn new(scenario: Arc<Scenario>, model: EstimatorModel) -> Result<Self> {
        let expected = FeatureSchema::of(&scenario);
        if expected.hash() != model.schema_hash {
            return Err(Error::Schema(format!(
                "model was trained for {:?}, scenario `{}` needs {:?}",
                model.schema, scenario.name, expected
            )));
        }
        Ok(LearnedEstimator { scenario, model })
    }

    pub fn model(&self) -> &EstimatorModel {
        &self.model
    }
}

impl CostEstimator for LearnedEstimator {
    fn estimate(&self, state: &WorldState) -> f64 {
        let g = encode_state(&self.scenario, state);
        self.model.predict(&g).expect("schema checked at construction")
    }
}
