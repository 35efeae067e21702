use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{axpy, dot};
use super::{DlrmConfig, Interaction};
use crate::math;
use crate::seed;
use crate::synthgen::Sample;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any log loss.
pub const PROB_EPS: f64 = 1e-7;

/// How out-of-range sparse indices are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexPolicy {
    /// Any index `>= rows` is an input error.
    Strict,
    /// Index `i` reads row `i mod rows` (hashed vocabulary).
    Modulo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { lr: 0.05, eps: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("optimizer.lr", "must be finite and positive"));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::config("optimizer.eps", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Fully connected layer; `weight[i * fan_out + j]` connects input `i` to
/// output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    fn glorot<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        let weight = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
        Linear { fan_in, fan_out, weight, bias: vec![0.0; fan_out] }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(out, xi, &self.weight[i * self.fan_out..(i + 1) * self.fan_out]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub rows: u32,
    pub dim: usize,
    /// Row-major, `rows × dim`.
    pub data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn row(&self, r: u32) -> &[f64] {
        let start = r as usize * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Gradient of one linear layer, same layout as [`Linear`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Sparse gradient of one embedding table: only rows touched by the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGrads {
    dim: usize,
    rows: Vec<u32>,
    values: Vec<f64>,
    /// Per table row, its slot in `rows`, or `u32::MAX`.
    slot: Vec<u32>,
}

impl RowGrads {
    fn new(table_rows: u32, dim: usize) -> Self {
        RowGrads { dim, rows: Vec::new(), values: Vec::new(), slot: vec![u32::MAX; table_rows as usize] }
    }

    /// Touched rows in first-touch order.
    pub fn touched_rows(&self) -> &[u32] {
        &self.rows
    }

    /// Gradient of row `r`; `None` means exactly zero.
    pub fn row(&self, r: u32) -> Option<&[f64]> {
        match self.slot.get(r as usize) {
            Some(&s) if s != u32::MAX => {
                let start = s as usize * self.dim;
                Some(&self.values[start..start + self.dim])
            }
            _ => None,
        }
    }

    fn row_mut(&mut self, r: u32) -> &mut [f64] {
        let s = match self.slot[r as usize] {
            u32::MAX => {
                let s = self.rows.len() as u32;
                self.slot[r as usize] = s;
                self.rows.push(r);
                self.values.resize(self.values.len() + self.dim, 0.0);
                s
            }
            s => s,
        };
        let start = s as usize * self.dim;
        &mut self.values[start..start + self.dim]
    }

    fn clear(&mut self) {
        for &r in &self.rows {
            self.slot[r as usize] = u32::MAX;
        }
        self.rows.clear();
        self.values.clear();
    }
}

/// Gradients of the mean batch loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tables: Vec<RowGrads>,
    pub bottom: Vec<LinearGrad>,
    pub overarch: Vec<LinearGrad>,
}

impl Gradients {
    pub fn zeros(config: &DlrmConfig) -> Self {
        let zeros = |shapes: Vec<(usize, usize)>| {
            shapes.into_iter().map(|(i, o)| LinearGrad { weight: vec![0.0; i * o], bias: vec![0.0; o] }).collect()
        };
        Gradients {
            tables: config.tables.iter().map(|t| RowGrads::new(t.rows, t.dim)).collect(),
            bottom: zeros(config.bottom_layer_shapes()),
            overarch: zeros(config.overarch_layer_shapes()),
        }
    }

    pub fn clear(&mut self) {
        for t in &mut self.tables {
            t.clear();
        }
        for g in self.bottom.iter_mut().chain(&mut self.overarch) {
            g.weight.fill(0.0);
            g.bias.fill(0.0);
        }
    }

    /// Dense copy in [`Model::parameters`] order.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for t in &self.tables {
            let mut dense = vec![0.0; t.slot.len() * t.dim];
            for (s, &r) in t.rows.iter().enumerate() {
                let src = &t.values[s * t.dim..(s + 1) * t.dim];
                dense[r as usize * t.dim..(r as usize + 1) * t.dim].copy_from_slice(src);
            }
            out.push(dense);
        }
        for g in self.bottom.iter().chain(&self.overarch) {
            out.push(g.weight.clone());
            out.push(g.bias.clone());
        }
        out
    }
}

/// Per-parameter Adagrad accumulators, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
struct AdagradState {
    tables: Vec<Vec<f64>>,
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone)]
struct Workspace {
    bottom: Vec<Vec<f64>>,
    pooled: Vec<Vec<f64>>,
    interaction: Vec<f64>,
    overarch: Vec<Vec<f64>>,
    grad_out: Vec<Vec<f64>>,
    grad_interaction: Vec<f64>,
    grad_vectors: Vec<Vec<f64>>,
    rows: Vec<Vec<u32>>,
}

/// A DLRM-style CTR model with its optimizer state.
#[derive(Debug, Clone)]
pub struct Model {
    config: DlrmConfig,
    tables: Vec<EmbeddingTable>,
    bottom: Vec<Linear>,
    overarch: Vec<Linear>,
    adagrad: AdagradState,
    ws: Workspace,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.tables == other.tables
            && self.bottom == other.bottom
            && self.overarch == other.overarch
            && self.adagrad == other.adagrad
    }
}

/// Builds a model with Glorot-uniform MLP weights, zero biases and
/// embeddings uniform in `±1/sqrt(dim)`.
pub fn build_model(config: &DlrmConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let tables: Vec<EmbeddingTable> = config
        .tables
        .iter()
        .map(|t| {
            let limit = 1.0 / math::sqrt(t.dim as f64);
            let data = (0..t.rows as usize * t.dim).map(|_| rng.random_range(-limit..limit)).collect();
            EmbeddingTable { rows: t.rows, dim: t.dim, data }
        })
        .collect();
    let bottom: Vec<Linear> =
        config.bottom_layer_shapes().into_iter().map(|(i, o)| Linear::glorot(i, o, &mut rng)).collect();
    let overarch: Vec<Linear> =
        config.overarch_layer_shapes().into_iter().map(|(i, o)| Linear::glorot(i, o, &mut rng)).collect();

    let adagrad = AdagradState {
        tables: tables.iter().map(|t| vec![0.0; t.data.len()]).collect(),
        layers: bottom.iter().chain(&overarch).map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.bias.len()])).collect(),
    };
    let vectors = config.interaction_vectors();
    let ws = Workspace {
        bottom: bottom.iter().map(|l| vec![0.0; l.fan_out]).collect(),
        pooled: tables.iter().map(|t| vec![0.0; t.dim]).collect(),
        interaction: vec![0.0; config.interaction_width()],
        overarch: overarch.iter().map(|l| vec![0.0; l.fan_out]).collect(),
        grad_out: bottom.iter().chain(&overarch).map(|l| vec![0.0; l.fan_out]).collect(),
        grad_interaction: vec![0.0; config.interaction_width()],
        grad_vectors: (0..vectors)
            .map(|v| {
                let d = if v == 0 { config.bottom_output_width() } else { config.tables[v - 1].dim };
                vec![0.0; d]
            })
            .collect(),
        rows: config.tables.iter().map(|_| Vec::new()).collect(),
    };

    Ok(Model { config: config.clone(), tables, bottom, overarch, adagrad, ws })
}

impl Model {
    pub fn config(&self) -> &DlrmConfig {
        &self.config
    }

    pub fn tables(&self) -> &[EmbeddingTable] {
        &self.tables
    }

    pub fn bottom(&self) -> &[Linear] {
        &self.bottom
    }

    pub fn overarch(&self) -> &[Linear] {
        &self.overarch
    }

    /// Every stored parameter in canonical order: table data, then weight
    /// and bias of each bottom layer, then of each overarch layer.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.tables.iter().map(|t| t.data.as_slice()).collect();
        for l in self.bottom.iter().chain(&self.overarch) {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.tables.iter_mut().map(|t| t.data.as_mut_slice()).collect();
        for l in self.bottom.iter_mut().chain(&mut self.overarch) {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    /// Click probabilities; out-of-range sparse indices are an input error.
    pub fn forward(&mut self, batch: &[Sample]) -> Result<Vec<f64>> {
        self.forward_with(batch, IndexPolicy::Strict)
    }

    pub fn forward_with(&mut self, batch: &[Sample], policy: IndexPolicy) -> Result<Vec<f64>> {
        batch.iter().map(|s| self.forward_sample(s, policy).map(math::sigmoid)).collect()
    }

    /// Mean binary cross-entropy of the batch and its exact gradient.
    pub fn loss_and_backward(&mut self, batch: &[Sample]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros(&self.config);
        let loss = self.loss_and_backward_into(batch, IndexPolicy::Strict, &mut grads)?;
        Ok((loss, grads))
    }

    /// Like [`Model::loss_and_backward`], reusing `grads` (cleared first).
    pub fn loss_and_backward_into(
        &mut self,
        batch: &[Sample],
        policy: IndexPolicy,
        grads: &mut Gradients,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        grads.clear();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for sample in batch {
            let z = self.forward_sample(sample, policy)?;
            let p = math::sigmoid(z);
            let y = if sample.label { 1.0 } else { 0.0 };
            total += log_loss(p, sample.label);
            // Derivative of the clamped loss: zero where the clamp is active.
            let dz = if p > PROB_EPS && p < 1.0 - PROB_EPS { (p - y) * scale } else { 0.0 };
            self.backward_sample(sample, dz, grads);
        }
        let loss = total * scale;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss is {loss}")));
        }
        if !grads_finite(grads) {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        Ok(loss)
    }

    /// Adagrad: `acc += g²; θ -= lr · g / (sqrt(acc) + eps)`, skipping
    /// coordinates whose gradient is exactly zero. Only touched embedding
    /// rows are visited.
    pub fn sgd_step(&mut self, grads: &Gradients, opt: &OptimizerConfig) -> Result<()> {
        let mut finite = true;
        for ((table, acc), g) in self.tables.iter_mut().zip(&mut self.adagrad.tables).zip(&grads.tables) {
            let dim = table.dim;
            for &r in g.touched_rows() {
                let gr = g.row(r).expect("touched row");
                let start = r as usize * dim;
                finite &= adagrad(&mut table.data[start..start + dim], &mut acc[start..start + dim], gr, opt);
            }
        }
        let layers = self.bottom.iter_mut().chain(&mut self.overarch);
        let lgrads = grads.bottom.iter().chain(&grads.overarch);
        for ((layer, (acc_w, acc_b)), g) in layers.zip(&mut self.adagrad.layers).zip(lgrads) {
            finite &= adagrad(&mut layer.weight, acc_w, &g.weight, opt);
            finite &= adagrad(&mut layer.bias, acc_b, &g.bias, opt);
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Numerical("non-finite parameter after update".into()))
        }
    }

    fn lookup_rows(&mut self, sample: &Sample, policy: IndexPolicy) -> Result<()> {
        if sample.dense.len() != self.config.num_dense {
            return Err(Error::Input(format!(
                "sample has {} dense features, model expects {}",
                sample.dense.len(),
                self.config.num_dense
            )));
        }
        if sample.sparse.len() != self.tables.len() {
            return Err(Error::Input(format!(
                "sample has {} sparse features, model has {} tables",
                sample.sparse.len(),
                self.tables.len()
            )));
        }
        for (t, (indices, table)) in sample.sparse.iter().zip(&self.tables).enumerate() {
            let rows = &mut self.ws.rows[t];
            rows.clear();
            for &i in indices {
                let r = match policy {
                    IndexPolicy::Modulo => i % table.rows,
                    IndexPolicy::Strict if i < table.rows => i,
                    IndexPolicy::Strict => {
                        return Err(Error::Input(format!(
                            "index {i} out of range for table {t} with {} rows",
                            table.rows
                        )));
                    }
                };
                rows.push(r);
            }
        }
        Ok(())
    }

    /// Returns the logit; activations are left in the workspace.
    fn forward_sample(&mut self, sample: &Sample, policy: IndexPolicy) -> Result<f64> {
        self.lookup_rows(sample, policy)?;
        let ws = &mut self.ws;

        let mut input: &[f64] = &sample.dense;
        for (layer, out) in self.bottom.iter().zip(&mut ws.bottom) {
            layer.forward(input, out);
            relu(out);
            input = out;
        }

        for ((table, pooled), rows) in self.tables.iter().zip(&mut ws.pooled).zip(&ws.rows) {
            pooled.fill(0.0);
            for &r in rows {
                axpy(pooled, 1.0, table.row(r));
            }
        }

        let z = &mut ws.interaction;
        let bottom_out = ws.bottom.last().expect("validated");
        let mut at = bottom_out.len();
        z[..at].copy_from_slice(bottom_out);
        for pooled in &ws.pooled {
            z[at..at + pooled.len()].copy_from_slice(pooled);
            at += pooled.len();
        }
        if self.config.interaction == Interaction::ConcatDot {
            let n = ws.pooled.len() + 1;
            for i in 0..n {
                for j in i + 1..n {
                    let a = if i == 0 { bottom_out } else { &ws.pooled[i - 1] };
                    z[at] = dot(a, &ws.pooled[j - 1]);
                    at += 1;
                }
            }
        }

        let mut input: &[f64] = z;
        let last = self.overarch.len() - 1;
        for (k, (layer, out)) in self.overarch.iter().zip(&mut ws.overarch).enumerate() {
            layer.forward(input, out);
            if k < last {
                relu(out);
            }
            input = out;
        }
        Ok(input[0])
    }

    fn backward_sample(&mut self, sample: &Sample, dlogit: f64, grads: &mut Gradients) {
        if dlogit == 0.0 {
            return;
        }
        let ws = &mut self.ws;
        let nb = self.bottom.len();
        let no = self.overarch.len();

        // Overarch, top to bottom. `grad_out[nb + k]` holds dL/d(output of layer k).
        ws.grad_out[nb + no - 1][0] = dlogit;
        for k in (0..no).rev() {
            let layer = &self.overarch[k];
            let (lower, upper) = ws.grad_out.split_at_mut(nb + k);
            let dout = &mut upper[0];
            if k < no - 1 {
                relu_backward(dout, &ws.overarch[k]);
            }
            let input: &[f64] = if k == 0 { &ws.interaction } else { &ws.overarch[k - 1] };
            accumulate_linear(&mut grads.overarch[k], input, dout);
            let din: &mut [f64] = if k == 0 { &mut ws.grad_interaction } else { &mut lower[nb + k - 1] };
            input_grad(layer, dout, din);
        }

        // Interaction: split into per-vector gradients.
        let dz = &ws.grad_interaction;
        let mut at = 0;
        for g in &mut ws.grad_vectors {
            let d = g.len();
            g.copy_from_slice(&dz[at..at + d]);
            at += d;
        }
        if self.config.interaction == Interaction::ConcatDot {
            let n = ws.grad_vectors.len();
            let bottom_out = ws.bottom.last().expect("validated");
            for i in 0..n {
                for j in i + 1..n {
                    let g = dz[at];
                    at += 1;
                    if g == 0.0 {
                        continue;
                    }
                    let a = if i == 0 { bottom_out } else { &ws.pooled[i - 1] };
                    let b = &ws.pooled[j - 1];
                    axpy(&mut ws.grad_vectors[i], g, b);
                    axpy(&mut ws.grad_vectors[j], g, a);
                }
            }
        }

        // Embeddings: every looked-up row receives the pooled gradient.
        for (t, rows) in ws.rows.iter().enumerate() {
            let g = &ws.grad_vectors[t + 1];
            for &r in rows {
                axpy(grads.tables[t].row_mut(r), 1.0, g);
            }
        }

        // Bottom MLP, top to bottom.
        ws.grad_out[nb - 1].copy_from_slice(&ws.grad_vectors[0]);
        for k in (0..nb).rev() {
            let layer = &self.bottom[k];
            let (lower, upper) = ws.grad_out.split_at_mut(k);
            let dout = &mut upper[0];
            relu_backward(dout, &ws.bottom[k]);
            let input: &[f64] = if k == 0 { &sample.dense } else { &ws.bottom[k - 1] };
            accumulate_linear(&mut grads.bottom[k], input, dout);
            if k > 0 {
                input_grad(layer, dout, &mut lower[k - 1]);
            }
        }
    }
}

/// Log loss of one prediction after clamping `p` into `[PROB_EPS, 1 - PROB_EPS]`.
pub fn log_loss(p: f64, label: bool) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label {
        -math::ln(p)
    } else {
        -math::ln(1.0 - p)
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn relu_backward(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn accumulate_linear(g: &mut LinearGrad, input: &[f64], dout: &[f64]) {
    let fan_out = dout.len();
    axpy(&mut g.bias, 1.0, dout);
    for (i, &x) in input.iter().enumerate() {
        if x != 0.0 {
            axpy(&mut g.weight[i * fan_out..(i + 1) * fan_out], x, dout);
        }
    }
}

fn input_grad(layer: &Linear, dout: &[f64], din: &mut [f64]) {
    let fo = layer.fan_out;
    for (i, d) in din.iter_mut().take(layer.fan_in).enumerate() {
        *d = dot(&layer.weight[i * fo..(i + 1) * fo], dout);
    }
}

fn grads_finite(g: &Gradients) -> bool {
    g.tables.iter().all(|t| t.values.iter().all(|v| v.is_finite()))
        && g.bottom.iter().chain(&g.overarch).all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
}

fn adagrad(theta: &mut [f64], acc: &mut [f64], grad: &[f64], opt: &OptimizerConfig) -> bool {
    let mut finite = true;
    for ((t, a), &g) in theta.iter_mut().zip(acc.iter_mut()).zip(grad) {
        if g == 0.0 {
            continue;
        }
        *a += g * g;
        *t -= opt.lr * g / (math::sqrt(*a) + opt.eps);
        finite &= t.is_finite();
    }
    finite
}
