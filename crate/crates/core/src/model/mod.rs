//! Tiny neural classifiers — a linear softmax layer or a ReLU MLP with
//! inverted dropout — plus the taps the query strategies need: penultimate
//! embeddings, Monte-Carlo dropout predictions, and last-layer gradient
//! embeddings.
//!
//! Every stochastic choice consumes an explicit stream handed in by the
//! caller: parameter initialization and training dropout masks draw from the
//! theta stream, batch order from the data stream. Nothing here touches a
//! global RNG, so two models built from equal streams are bit-identical.

mod optim;
mod train;

pub use optim::{Optimizer, OptimizerKind, OptimizerSpec};
pub use train::{retrain, RetrainOutcome, TrainConfig, TrainMode};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seeding::Stream;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Network shape: a bare softmax layer, or hidden ReLU layers before it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Linear,
    Mlp { hidden_sizes: Vec<usize> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub arch: Arch,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Dropout rate on hidden activations, in `[0, 1)`. Ignored by `linear`.
    pub dropout: f64,
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("classifier input_dim must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("classifier needs at least two classes"));
        }
        if let Arch::Mlp { hidden_sizes } = &self.arch {
            if hidden_sizes.is_empty() {
                return Err(Error::config("mlp arch needs at least one hidden layer"));
            }
            if hidden_sizes.contains(&0) {
                return Err(Error::config("hidden layer sizes must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer, input side first.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        if let Arch::Mlp { hidden_sizes } = &self.arch {
            widths.extend_from_slice(hidden_sizes);
        }
        widths.push(self.num_classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Width of the layer feeding the final softmax (the embedding width).
    pub fn penultimate_dim(&self) -> usize {
        match &self.arch {
            Arch::Linear => self.input_dim,
            Arch::Mlp { hidden_sizes } => *hidden_sizes.last().expect("validated"),
        }
    }
}

/// One dense layer. `w` is `(fan_in, fan_out)` so a row batch multiplies as
/// `x · w + b`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct Classifier {
    spec: ClassifierSpec,
    layers: Vec<Dense>,
    /// Snapshot taken at construction; `fromScratch` retrains restore it.
    init: Vec<Dense>,
}

/// Output of one forward pass: class probabilities plus the activation that
/// feeds the final layer (the raw input for a linear model).
pub struct ForwardPass {
    pub probs: Array2<f64>,
    pub penultimate: Array2<f64>,
}

/// Per-batch activations the backward pass needs.
pub(crate) struct BatchCache {
    /// Input to each dense layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Hidden activations before dropout, for the ReLU gate.
    gates: Vec<Array2<f64>>,
    /// Scaled dropout masks (entries `0` or `1/(1-p)`), one per hidden layer.
    masks: Vec<Option<Array2<f64>>>,
    logits: Array2<f64>,
    pub(crate) probs: Array2<f64>,
}

impl Classifier {
    /// Builds a classifier with weights drawn from the theta stream using a
    /// scaled-uniform scheme: each weight is uniform in `[-a, a]` with
    /// `a = sqrt(6 / (fan_in + fan_out))`, drawn row-major layer by layer;
    /// biases start at zero.
    pub fn init_params(spec: ClassifierSpec, rng_theta: &mut Stream) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| a * (2.0 * rng_theta.random::<f64>() - 1.0))
                .collect();
            let w = Array2::from_shape_vec((fan_in, fan_out), data).expect("shape arithmetic");
            layers.push(Dense {
                w,
                b: Array1::zeros(fan_out),
            });
        }
        Ok(Classifier {
            spec,
            init: layers.clone(),
            layers,
        })
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub(crate) fn reset_to_init(&mut self) {
        self.layers = self.init.clone();
    }

    /// One forward pass. When `dropout_active` and the spec's rate is
    /// positive, a stream must be supplied for the masks; rate zero never
    /// consumes the stream, so active and inactive passes coincide.
    pub fn forward(
        &self,
        x: ArrayView2<f64>,
        dropout_active: bool,
        rng_theta: Option<&mut Stream>,
    ) -> Result<ForwardPass> {
        let cache = self.forward_cached(x, dropout_active, rng_theta)?;
        let penultimate = cache.inputs.last().expect("at least one layer").clone();
        Ok(ForwardPass {
            probs: cache.probs,
            penultimate,
        })
    }

    pub(crate) fn forward_cached(
        &self,
        x: ArrayView2<f64>,
        dropout_active: bool,
        mut rng_theta: Option<&mut Stream>,
    ) -> Result<BatchCache> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::shape(format!(
                "input has {} columns, classifier expects {}",
                x.ncols(),
                self.spec.input_dim
            )));
        }
        let p = self.spec.dropout;
        let drop_on = dropout_active && p > 0.0;
        if drop_on && rng_theta.is_none() {
            return Err(Error::config(
                "dropout-active forward pass needs a theta stream",
            ));
        }
        let n = x.nrows();
        let mut inputs = vec![x.to_owned()];
        let mut gates = Vec::new();
        let mut masks = Vec::new();
        let hidden_count = self.layers.len() - 1;
        for layer in &self.layers[..hidden_count] {
            let mut z = inputs.last().expect("nonempty").dot(&layer.w);
            z += &layer.b;
            z.mapv_inplace(|v| v.max(0.0));
            gates.push(z.clone());
            if drop_on {
                let rng = rng_theta.as_deref_mut().expect("checked above");
                let mask = draw_mask(n, z.ncols(), p, rng);
                z *= &mask;
                masks.push(Some(mask));
            } else {
                masks.push(None);
            }
            inputs.push(z);
        }
        let out = self.layers.last().expect("at least one layer");
        let mut logits = inputs.last().expect("nonempty").dot(&out.w);
        logits += &out.b;
        let probs = softmax_rows(&logits);
        Ok(BatchCache {
            inputs,
            gates,
            masks,
            logits,
            probs,
        })
    }

    /// Class probabilities with dropout off.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, false, None)?.probs)
    }

    /// Penultimate activations with dropout off (the raw rows for `linear`).
    pub fn embed(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, false, None)?.penultimate)
    }

    /// `trials` stochastic forward passes with dropout active; masks draw
    /// from the supplied stream in trial order.
    pub fn mc_dropout_predict(
        &self,
        x: ArrayView2<f64>,
        trials: usize,
        rng: &mut Stream,
    ) -> Result<Vec<Array2<f64>>> {
        if trials < 2 {
            return Err(Error::config("mc-dropout needs at least two trials"));
        }
        (0..trials)
            .map(|_| Ok(self.forward(x, true, Some(rng))?.probs))
            .collect()
    }

    /// Last-layer loss gradient per point under its own predicted label:
    /// `(p - onehot(argmax p)) ⊗ penultimate`, flattened class-major to a
    /// `n × (num_classes · penultimate_dim)` matrix.
    pub fn gradient_embedding(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let pass = self.forward(x, false, None)?;
        let n = x.nrows();
        let c = self.spec.num_classes;
        let h = self.spec.penultimate_dim();
        let mut out = Array2::zeros((n, c * h));
        for i in 0..n {
            let probs = pass.probs.row(i);
            let act = pass.penultimate.row(i);
            let hat = argmax_row(probs.as_slice().expect("contiguous row"));
            for k in 0..c {
                let g = probs[k] - if k == hat { 1.0 } else { 0.0 };
                for j in 0..h {
                    out[[i, k * h + j]] = g * act[j];
                }
            }
        }
        Ok(out)
    }

    /// Fraction of argmax-correct predictions over `idx`, dropout off.
    /// Ties pick the lowest class index.
    pub fn accuracy(&self, idx: &[usize], data: &Dataset) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::config("accuracy over an empty index set"));
        }
        let x = data.x.select(Axis(0), idx);
        let probs = self.predict_proba(x.view())?;
        let correct = probs
            .rows()
            .into_iter()
            .zip(idx)
            .filter(|(row, &i)| argmax_row(row.as_slice().expect("contiguous row")) == data.y[i])
            .count();
        Ok(correct as f64 / idx.len() as f64)
    }

    /// Mean cross-entropy over `idx` against the dataset labels, dropout off.
    pub fn cross_entropy_loss(&self, idx: &[usize], data: &Dataset) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::config("cross-entropy over an empty index set"));
        }
        let x = data.x.select(Axis(0), idx);
        let cache = self.forward_cached(x.view(), false, None)?;
        let ys: Vec<usize> = idx.iter().map(|&i| data.y[i]).collect();
        Ok(cross_entropy_from_logits(&cache.logits, &ys))
    }

    /// Gradients of the mean cross-entropy on the cached batch, shaped like
    /// the layers.
    pub(crate) fn backward(&self, cache: &BatchCache, ys: &[usize]) -> Vec<Dense> {
        let n = ys.len() as f64;
        let mut dz = cache.probs.clone();
        for (i, &y) in ys.iter().enumerate() {
            dz[[i, y]] -= 1.0;
        }
        dz /= n;
        let mut grads: Vec<Option<Dense>> = vec![None; self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            grads[l] = Some(Dense {
                w: cache.inputs[l].t().dot(&dz),
                b: dz.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut da = dz.dot(&self.layers[l].w.t());
                if let Some(mask) = &cache.masks[l - 1] {
                    da *= mask;
                }
                da.zip_mut_with(&cache.gates[l - 1], |d, &g| {
                    if g <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = da;
            }
        }
        grads.into_iter().map(|g| g.expect("filled")).collect()
    }

    pub(crate) fn batch_loss(cache: &BatchCache, ys: &[usize]) -> f64 {
        cross_entropy_from_logits(&cache.logits, ys)
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Debug checkpoint: a little-endian binary file holding every tensor as
    /// a rank/dims header followed by `f32` data, in layer order (w, b, ...).
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        let tensors = self.layers.len() * 2;
        buf.extend_from_slice(&(tensors as u32).to_le_bytes());
        for layer in &self.layers {
            write_tensor(&mut buf, &[layer.w.nrows(), layer.w.ncols()], layer.w.iter());
            write_tensor(&mut buf, &[layer.b.len()], layer.b.iter());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Loads a checkpoint written by [`save_checkpoint`](Self::save_checkpoint)
    /// into this classifier; every tensor shape must match the current spec.
    pub fn load_checkpoint(&mut self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, at: 0 };
        let tensors = cur.u32()? as usize;
        if tensors != self.layers.len() * 2 {
            return Err(Error::shape(format!(
                "checkpoint holds {tensors} tensors, classifier has {}",
                self.layers.len() * 2
            )));
        }
        for l in 0..self.layers.len() {
            let w = read_tensor(&mut cur, &[self.layers[l].w.nrows(), self.layers[l].w.ncols()])?;
            let b = read_tensor(&mut cur, &[self.layers[l].b.len()])?;
            self.layers[l]
                .w
                .iter_mut()
                .zip(w)
                .for_each(|(dst, v)| *dst = v);
            self.layers[l]
                .b
                .iter_mut()
                .zip(b)
                .for_each(|(dst, v)| *dst = v);
        }
        Ok(())
    }
}

/// Self-diagnostic for the hand-rolled backward pass: builds a classifier
/// from `spec` with parameters and a batch drawn from `seed`, then compares
/// every analytic gradient of the mean batch cross-entropy against a central
/// finite difference. Returns the worst relative error across all weights
/// and biases (absolute differences below `1e-8` count as zero). A correct
/// implementation stays well under `1e-4` in `f64`; dropout is held inactive
/// so the comparison is deterministic.
///
/// Biases are jittered away from zero before the comparison: the standard
/// zero-bias init leaves ReLU pre-activations exactly on their kink
/// whenever a whole row goes dead, and a central difference straddling the
/// kink disagrees with the (correct) one-sided analytic gradient. The
/// check must run at a generic point, so it does not use the stock init
/// verbatim.
pub fn gradient_check(spec: &ClassifierSpec, batch_size: usize, seed: u64) -> Result<f64> {
    spec.validate()?;
    if batch_size == 0 {
        return Err(Error::config("gradient check needs a non-empty batch"));
    }
    let mut theta = crate::seeding::derive_stream(seed, crate::seeding::StreamDomain::Theta);
    let mut model = Classifier::init_params(spec.clone(), &mut theta)?;
    for layer in model.layers_mut() {
        for b in layer.b.iter_mut() {
            *b = 0.4 * theta.random::<f64>() - 0.2;
        }
    }
    let mut data_rng = crate::seeding::derive_stream(seed, crate::seeding::StreamDomain::Data);
    let x = Array2::from_shape_fn((batch_size, spec.input_dim), |_| {
        2.0 * data_rng.random::<f64>() - 1.0
    });
    let ys: Vec<usize> = (0..batch_size)
        .map(|_| data_rng.random_range(0..spec.num_classes))
        .collect();

    let cache = model.forward_cached(x.view(), false, None)?;
    let grads = model.backward(&cache, &ys);
    let eps = 1e-6;
    let mut worst = 0.0_f64;
    let mut record = |analytic: f64, fd: f64| {
        let diff = (fd - analytic).abs();
        if diff > 1e-8 {
            worst = worst.max(diff / fd.abs().max(analytic.abs()));
        }
    };
    for l in 0..grads.len() {
        let cols = grads[l].w.ncols();
        for idx in 0..grads[l].w.len() {
            let (r, s) = (idx / cols, idx % cols);
            let orig = model.layers[l].w[[r, s]];
            model.layers_mut()[l].w[[r, s]] = orig + eps;
            let up = Classifier::batch_loss(&model.forward_cached(x.view(), false, None)?, &ys);
            model.layers_mut()[l].w[[r, s]] = orig - eps;
            let down = Classifier::batch_loss(&model.forward_cached(x.view(), false, None)?, &ys);
            model.layers_mut()[l].w[[r, s]] = orig;
            record(grads[l].w[[r, s]], (up - down) / (2.0 * eps));
        }
        for j in 0..grads[l].b.len() {
            let orig = model.layers[l].b[j];
            model.layers_mut()[l].b[j] = orig + eps;
            let up = Classifier::batch_loss(&model.forward_cached(x.view(), false, None)?, &ys);
            model.layers_mut()[l].b[j] = orig - eps;
            let down = Classifier::batch_loss(&model.forward_cached(x.view(), false, None)?, &ys);
            model.layers_mut()[l].b[j] = orig;
            record(grads[l].b[j], (up - down) / (2.0 * eps));
        }
    }
    Ok(worst)
}

fn write_tensor<'a>(buf: &mut Vec<u8>, dims: &[usize], values: impl Iterator<Item = &'a f64>) {
    buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn u32(&mut self) -> Result<u32> {
        let end = self.at + 4;
        if end > self.bytes.len() {
            return Err(Error::shape("checkpoint file truncated"));
        }
        let v = u32::from_le_bytes(self.bytes[self.at..end].try_into().expect("width checked"));
        self.at = end;
        Ok(v)
    }

    fn f32(&mut self) -> Result<f32> {
        let end = self.at + 4;
        if end > self.bytes.len() {
            return Err(Error::shape("checkpoint file truncated"));
        }
        let v = f32::from_le_bytes(self.bytes[self.at..end].try_into().expect("width checked"));
        self.at = end;
        Ok(v)
    }
}

fn read_tensor(cur: &mut Cursor, want: &[usize]) -> Result<Vec<f64>> {
    let rank = cur.u32()? as usize;
    if rank != want.len() {
        return Err(Error::shape(format!(
            "checkpoint tensor rank {rank}, classifier expects {}",
            want.len()
        )));
    }
    let mut len = 1usize;
    for &w in want {
        let d = cur.u32()? as usize;
        if d != w {
            return Err(Error::shape(format!(
                "checkpoint tensor dimension {d}, classifier expects {w}"
            )));
        }
        len *= d;
    }
    (0..len).map(|_| Ok(cur.f32()? as f64)).collect()
}

/// Row-stable softmax.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - mx).exp());
        let s = row.sum();
        row.mapv_inplace(|e| e / s);
    }
    out
}

/// Mean cross-entropy straight from logits (log-sum-exp form), so huge but
/// finite logits stay finite; only non-finite parameters produce a
/// non-finite loss.
fn cross_entropy_from_logits(logits: &Array2<f64>, ys: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(ys) {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&z| (z - mx).exp()).sum::<f64>().ln() + mx;
        total += lse - row[y];
    }
    total / ys.len() as f64
}

/// Index of the row maximum; ties resolve to the lowest index.
pub(crate) fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Inverted-dropout mask: entries are `1/(1-p)` with probability `1-p`, else
/// zero, drawn row-major.
fn draw_mask(n: usize, h: usize, p: f64, rng: &mut Stream) -> Array2<f64> {
    let keep_scale = 1.0 / (1.0 - p);
    let data: Vec<f64> = (0..n * h)
        .map(|_| {
            if rng.random::<f64>() >= p {
                keep_scale
            } else {
                0.0
            }
        })
        .collect();
    Array2::from_shape_vec((n, h), data).expect("shape arithmetic")
}
