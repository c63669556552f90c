//! Small recurrent baseline over per-window feature sequences: a vanilla
//! sigmoid cell and a GRU cell, trained by mini-batch gradient descent
//! with backpropagation through time, plus Gaussian-noise augmentation
//! and the same leave-one-out protocol as the SVM path.
//!
//! Sequence inputs are per-window feature vectors, not raw multichannel
//! signal; a 16-unit cell over tens of thousands of raw samples is not a
//! workable configuration, and feature sequences keep the recurrent path
//! aligned with the rest of the pipeline.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classify::{
    build_folds, split_fingerprint, vote_trial, EvalConfig, EvalReport, FoldOutcome, Standardizer,
};
use crate::data_model::{EmotionLabel, TrialKey};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::selection::{fisher_scores_with, select_top_k};
use crate::util::derive_seed;

/// Default noise levels for training-set augmentation.
pub const AUGMENT_SIGMAS: [f64; 4] = [0.001, 0.004, 0.008, 0.012];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// h_t = sigmoid(W_hx x_t + W_hh h_{t-1} + b_h)
    Vanilla,
    /// Update/reset-gate cell; see the gate equations in `forward`.
    Gru,
}

/// One training/evaluation sequence: T steps of d features.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    /// [T x d]
    pub features: Array2<f64>,
    pub label: EmotionLabel,
    pub key: TrialKey,
    pub start_window: u32,
    /// Noise level this copy was augmented with, if any.
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 16,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

/// Parameter segments of the flat parameter vector, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    Whx,
    Whh,
    Bh,
    Wz,
    Uz,
    Bz,
    Wr,
    Ur,
    Br,
    Wc,
    Uc,
    Bc,
    Wyh,
    By,
}

#[derive(Debug, Clone)]
pub struct RecurrentModel {
    pub cell: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub n_classes: usize,
    /// Flat parameter vector; layout fixed by cell kind and dimensions.
    pub params: Vec<f64>,
}

impl RecurrentModel {
    fn segments(cell: CellKind) -> &'static [Seg] {
        match cell {
            CellKind::Vanilla => &[Seg::Whx, Seg::Whh, Seg::Bh, Seg::Wyh, Seg::By],
            CellKind::Gru => &[
                Seg::Wz,
                Seg::Uz,
                Seg::Bz,
                Seg::Wr,
                Seg::Ur,
                Seg::Br,
                Seg::Wc,
                Seg::Uc,
                Seg::Bc,
                Seg::Wyh,
                Seg::By,
            ],
        }
    }

    fn seg_size(&self, seg: Seg) -> usize {
        let (d, h, c) = (self.input_dim, self.hidden, self.n_classes);
        match seg {
            Seg::Whx | Seg::Wz | Seg::Wr | Seg::Wc => h * d,
            Seg::Whh | Seg::Uz | Seg::Ur | Seg::Uc => h * h,
            Seg::Bh | Seg::Bz | Seg::Br | Seg::Bc => h,
            Seg::Wyh => c * h,
            Seg::By => c,
        }
    }

    fn offset(&self, seg: Seg) -> usize {
        let mut off = 0;
        for &s in Self::segments(self.cell) {
            if s == seg {
                return off;
            }
            off += self.seg_size(s);
        }
        unreachable!("segment {seg:?} not present in {:?} cell", self.cell)
    }

    pub fn param_len(cell: CellKind, input_dim: usize, hidden: usize, n_classes: usize) -> usize {
        let m = RecurrentModel {
            cell,
            input_dim,
            hidden,
            n_classes,
            params: Vec::new(),
        };
        Self::segments(cell).iter().map(|&s| m.seg_size(s)).sum()
    }

    fn seg<'a>(&self, params: &'a [f64], seg: Seg) -> &'a [f64] {
        let off = self.offset(seg);
        &params[off..off + self.seg_size(seg)]
    }

    fn seg_mut<'a>(&self, params: &'a mut [f64], seg: Seg) -> &'a mut [f64] {
        let off = self.offset(seg);
        let n = self.seg_size(seg);
        &mut params[off..off + n]
    }

    /// Uniform small-weight initialization, scaled by fan-in.
    pub fn init(
        cell: CellKind,
        input_dim: usize,
        hidden: usize,
        n_classes: usize,
        seed: u64,
    ) -> Result<RecurrentModel> {
        if hidden == 0 || input_dim == 0 || n_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad model dimensions d={input_dim}, h={hidden}, c={n_classes}"
            )));
        }
        let len = Self::param_len(cell, input_dim, hidden, n_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (input_dim.max(hidden) as f64).sqrt();
        let params = (0..len)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect();
        Ok(RecurrentModel {
            cell,
            input_dim,
            hidden,
            n_classes,
            params,
        })
    }

    /// Write parameters as a flat little-endian f64 blob next to a JSON
    /// shape descriptor (`<prefix>.bin` and `<prefix>.json`).
    pub fn save(&self, prefix: &std::path::Path) -> Result<()> {
        #[derive(Serialize)]
        struct Shape<'a> {
            cell: &'a CellKind,
            input_dim: usize,
            hidden: usize,
            n_classes: usize,
            param_len: usize,
        }
        let bin_path = prefix.with_extension("bin");
        let mut bytes = Vec::with_capacity(self.params.len() * 8);
        for v in &self.params {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))?;
        let json_path = prefix.with_extension("json");
        let shape = Shape {
            cell: &self.cell,
            input_dim: self.input_dim,
            hidden: self.hidden,
            n_classes: self.n_classes,
            param_len: self.params.len(),
        };
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&shape).map_err(|e| Error::data(&json_path, e.to_string()))?,
        )
        .map_err(|e| Error::io(&json_path, e))?;
        Ok(())
    }

    pub fn load(prefix: &std::path::Path) -> Result<RecurrentModel> {
        #[derive(Deserialize)]
        struct Shape {
            cell: CellKind,
            input_dim: usize,
            hidden: usize,
            n_classes: usize,
            param_len: usize,
        }
        let json_path = prefix.with_extension("json");
        let shape: Shape = serde_json::from_str(
            &std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?,
        )
        .map_err(|e| Error::data(&json_path, e.to_string()))?;
        let bin_path = prefix.with_extension("bin");
        let bytes = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        if bytes.len() != shape.param_len * 8 {
            return Err(Error::data(
                &bin_path,
                format!(
                    "parameter blob holds {} bytes, descriptor says {}",
                    bytes.len(),
                    shape.param_len * 8
                ),
            ));
        }
        let params: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let expect = Self::param_len(shape.cell, shape.input_dim, shape.hidden, shape.n_classes);
        if params.len() != expect {
            return Err(Error::data(
                &bin_path,
                format!("descriptor dims imply {expect} parameters, blob has {}", params.len()),
            ));
        }
        Ok(RecurrentModel {
            cell: shape.cell,
            input_dim: shape.input_dim,
            hidden: shape.hidden,
            n_classes: shape.n_classes,
            params,
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out += M x, M stored row-major [rows x cols].
fn matvec_acc(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += M' v.
fn matvec_t_acc(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * v[r];
        }
    }
}

/// G += v x'.
fn outer_acc(g: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, vr) in v.iter().enumerate() {
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gk, xk) in row.iter_mut().zip(x) {
            *gk += vr * xk;
        }
    }
}

/// Per-step values cached by the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// h_0..h_T (T+1 vectors).
    pub hidden: Vec<Vec<f64>>,
    /// GRU gates per step (z, r, candidate), empty for the vanilla cell.
    gates: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Softmax output.
    pub probs: Vec<f64>,
}

/// Run the cell over a [T x d] sequence; class scores come from a softmax
/// head on the final hidden state.
///
/// Vanilla step:  h_t = sigmoid(W_hx x_t + W_hh h_{t-1} + b_h)
/// GRU step:      z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
///                r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
///                c_t = tanh(W_c x_t + U_c (r_t * h_{t-1}) + b_c)
///                h_t = (1 - z_t) * h_{t-1} + z_t * c_t
/// Head:          y = softmax(W_yh h_T + b_y)
pub fn forward(model: &RecurrentModel, features: ArrayView2<f64>) -> Result<ForwardCache> {
    let t_len = features.nrows();
    let d = features.ncols();
    if d != model.input_dim {
        return Err(Error::InvalidArgument(format!(
            "sequence feature dimension {d} does not match model input {}",
            model.input_dim
        )));
    }
    if t_len == 0 {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let h = model.hidden;
    let p = &model.params;
    let mut hidden = Vec::with_capacity(t_len + 1);
    hidden.push(vec![0.0; h]);
    let mut gates = Vec::new();

    for t in 0..t_len {
        let x_t: Vec<f64> = features.row(t).to_vec();
        let h_prev = hidden.last().unwrap().clone();
        let h_t = match model.cell {
            CellKind::Vanilla => {
                let mut a = model.seg(p, Seg::Bh).to_vec();
                matvec_acc(model.seg(p, Seg::Whx), h, d, &x_t, &mut a);
                matvec_acc(model.seg(p, Seg::Whh), h, h, &h_prev, &mut a);
                a.iter().map(|&v| sigmoid(v)).collect::<Vec<f64>>()
            }
            CellKind::Gru => {
                let mut z = model.seg(p, Seg::Bz).to_vec();
                matvec_acc(model.seg(p, Seg::Wz), h, d, &x_t, &mut z);
                matvec_acc(model.seg(p, Seg::Uz), h, h, &h_prev, &mut z);
                let z: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();

                let mut r = model.seg(p, Seg::Br).to_vec();
                matvec_acc(model.seg(p, Seg::Wr), h, d, &x_t, &mut r);
                matvec_acc(model.seg(p, Seg::Ur), h, h, &h_prev, &mut r);
                let r: Vec<f64> = r.iter().map(|&v| sigmoid(v)).collect();

                let rh: Vec<f64> = r.iter().zip(&h_prev).map(|(a, b)| a * b).collect();
                let mut c = model.seg(p, Seg::Bc).to_vec();
                matvec_acc(model.seg(p, Seg::Wc), h, d, &x_t, &mut c);
                matvec_acc(model.seg(p, Seg::Uc), h, h, &rh, &mut c);
                let c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();

                let h_t: Vec<f64> = (0..h)
                    .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * c[k])
                    .collect();
                gates.push((z, r, c));
                h_t
            }
        };
        if h_t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite activation at step {t}"
            )));
        }
        hidden.push(h_t);
    }

    let h_last = hidden.last().unwrap();
    let mut logits = model.seg(p, Seg::By).to_vec();
    matvec_acc(model.seg(p, Seg::Wyh), model.n_classes, h, h_last, &mut logits);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|v| v / sum).collect();
    Ok(ForwardCache {
        hidden,
        gates,
        probs,
    })
}

/// Cross-entropy loss and the full parameter gradient for one sequence.
pub fn backward(
    model: &RecurrentModel,
    features: ArrayView2<f64>,
    label: usize,
    cache: &ForwardCache,
    grad: &mut [f64],
) -> Result<f64> {
    let t_len = features.nrows();
    let h = model.hidden;
    let c_n = model.n_classes;
    if label >= c_n {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside 0..{c_n}"
        )));
    }
    let p = &model.params;
    let loss = -cache.probs[label].max(1e-300).ln();

    // head
    let mut do_: Vec<f64> = cache.probs.clone();
    do_[label] -= 1.0;
    let h_last = cache.hidden.last().unwrap();
    outer_acc(model.seg_mut(grad, Seg::Wyh), &do_, h_last);
    for (g, v) in model.seg_mut(grad, Seg::By).iter_mut().zip(&do_) {
        *g += v;
    }
    let mut dh = vec![0.0; h];
    matvec_t_acc(model.seg(p, Seg::Wyh), c_n, h, &do_, &mut dh);

    for t in (0..t_len).rev() {
        let x_t: Vec<f64> = features.row(t).to_vec();
        let h_prev = &cache.hidden[t];
        match model.cell {
            CellKind::Vanilla => {
                let h_t = &cache.hidden[t + 1];
                let da: Vec<f64> = dh
                    .iter()
                    .zip(h_t)
                    .map(|(g, y)| g * y * (1.0 - y))
                    .collect();
                outer_acc(model.seg_mut(grad, Seg::Whx), &da, &x_t);
                outer_acc(model.seg_mut(grad, Seg::Whh), &da, h_prev);
                for (g, v) in model.seg_mut(grad, Seg::Bh).iter_mut().zip(&da) {
                    *g += v;
                }
                let mut dh_prev = vec![0.0; h];
                matvec_t_acc(model.seg(p, Seg::Whh), h, h, &da, &mut dh_prev);
                dh = dh_prev;
            }
            CellKind::Gru => {
                let (z, r, c) = &cache.gates[t];
                let dz: Vec<f64> = (0..h).map(|k| dh[k] * (c[k] - h_prev[k])).collect();
                let dc: Vec<f64> = (0..h).map(|k| dh[k] * z[k]).collect();
                let mut dh_prev: Vec<f64> = (0..h).map(|k| dh[k] * (1.0 - z[k])).collect();

                let dc_pre: Vec<f64> = (0..h).map(|k| dc[k] * (1.0 - c[k] * c[k])).collect();
                let rh: Vec<f64> = (0..h).map(|k| r[k] * h_prev[k]).collect();
                outer_acc(model.seg_mut(grad, Seg::Wc), &dc_pre, &x_t);
                outer_acc(model.seg_mut(grad, Seg::Uc), &dc_pre, &rh);
                for (g, v) in model.seg_mut(grad, Seg::Bc).iter_mut().zip(&dc_pre) {
                    *g += v;
                }
                let mut drh = vec![0.0; h];
                matvec_t_acc(model.seg(p, Seg::Uc), h, h, &dc_pre, &mut drh);
                let dr: Vec<f64> = (0..h).map(|k| drh[k] * h_prev[k]).collect();
                for k in 0..h {
                    dh_prev[k] += drh[k] * r[k];
                }

                let dr_pre: Vec<f64> = (0..h).map(|k| dr[k] * r[k] * (1.0 - r[k])).collect();
                outer_acc(model.seg_mut(grad, Seg::Wr), &dr_pre, &x_t);
                outer_acc(model.seg_mut(grad, Seg::Ur), &dr_pre, h_prev);
                for (g, v) in model.seg_mut(grad, Seg::Br).iter_mut().zip(&dr_pre) {
                    *g += v;
                }
                matvec_t_acc(model.seg(p, Seg::Ur), h, h, &dr_pre, &mut dh_prev);

                let dz_pre: Vec<f64> = (0..h).map(|k| dz[k] * z[k] * (1.0 - z[k])).collect();
                outer_acc(model.seg_mut(grad, Seg::Wz), &dz_pre, &x_t);
                outer_acc(model.seg_mut(grad, Seg::Uz), &dz_pre, h_prev);
                for (g, v) in model.seg_mut(grad, Seg::Bz).iter_mut().zip(&dz_pre) {
                    *g += v;
                }
                matvec_t_acc(model.seg(p, Seg::Uz), h, h, &dz_pre, &mut dh_prev);

                dh = dh_prev;
            }
        }
    }
    Ok(loss)
}

/// Mini-batch gradient descent with BPTT and global-norm gradient
/// clipping. Returns the mean loss per epoch.
pub fn train(
    model: &mut RecurrentModel,
    samples: &[SequenceSample],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training sequences".into()));
    }
    let classes: std::collections::BTreeSet<usize> =
        samples.iter().map(|s| s.label.index()).collect();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 classes in training sequences, got {}",
            classes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; model.params.len()];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let s = &samples[i];
                let cache = forward(model, s.features.view())?;
                epoch_loss +=
                    backward(model, s.features.view(), s.label.index(), &cache, &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            let mut norm2 = 0.0;
            for g in grad.iter_mut() {
                *g *= scale;
                norm2 += *g * *g;
            }
            let norm = norm2.sqrt();
            let clip = if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                cfg.clip_norm / norm
            } else {
                1.0
            };
            let step = cfg.learning_rate * clip;
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        let mean_loss = epoch_loss / samples.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch} (loss = {mean_loss}); config: lr={}, epochs={}, batch={}, clip={}, seed={}",
                cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.clip_norm, cfg.seed
            )));
        }
        curve.push(mean_loss);
    }
    Ok(curve)
}

/// Argmax class of one sequence.
pub fn predict_sequence(model: &RecurrentModel, features: ArrayView2<f64>) -> Result<usize> {
    let cache = forward(model, features)?;
    let mut best = 0;
    for j in 1..cache.probs.len() {
        if cache.probs[j] > cache.probs[best] {
            best = j;
        }
    }
    Ok(best)
}

/// Cut each trial's window rows into overlapping sequences of
/// `seq_len_s` seconds stepping by `step_s` (the step that covers the
/// end part of the trial).
pub fn make_sequences(
    table: &FeatureTable,
    window_len_s: f64,
    seq_len_s: f64,
    step_s: f64,
) -> Result<Vec<SequenceSample>> {
    let steps = (seq_len_s / window_len_s).round() as usize;
    let hop = (step_s / window_len_s).round().max(1.0) as usize;
    if steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "sequence of {seq_len_s} s holds no {window_len_s} s windows"
        )));
    }
    // group rows per trial, ordered by window index
    let mut trials: std::collections::BTreeMap<TrialKey, Vec<usize>> = Default::default();
    for (i, k) in table.keys.iter().enumerate() {
        trials.entry(k.trial_key()).or_default().push(i);
    }
    let mut out = Vec::new();
    for (key, mut rows) in trials {
        rows.sort_by_key(|&i| table.keys[i].window);
        if rows.len() < steps {
            return Err(Error::InvalidArgument(format!(
                "trial {key} has {} windows, shorter than one {steps}-window sequence",
                rows.len()
            )));
        }
        let label = table.labels[rows[0]];
        let mut offset = 0usize;
        while offset + steps <= rows.len() {
            let mut features = Array2::zeros((steps, table.dim()));
            for (t, &row) in rows[offset..offset + steps].iter().enumerate() {
                features.row_mut(t).assign(&table.values.row(row));
            }
            out.push(SequenceSample {
                features,
                label,
                key: key.clone(),
                start_window: table.keys[rows[offset]].window,
                noise_sigma: None,
            });
            offset += hop;
        }
    }
    Ok(out)
}

/// Originals plus one i.i.d. Gaussian-noise copy per sigma; labels are
/// preserved and the expansion factor is 1 + len(sigmas).
pub fn augment_gaussian(
    samples: &[SequenceSample],
    sigmas: &[f64],
    seed: u64,
) -> Result<Vec<SequenceSample>> {
    if sigmas.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples.len() * (1 + sigmas.len()));
    out.extend(samples.iter().cloned());
    for &sigma in sigmas {
        for s in samples {
            let mut noisy = s.clone();
            for v in noisy.features.iter_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
            noisy.noise_sigma = Some(sigma);
            out.push(noisy);
        }
    }
    Ok(out)
}

/// Recurrent-path configuration for the leave-one-out protocol.
#[derive(Debug, Clone)]
pub struct RnnConfig {
    pub cell: CellKind,
    pub hidden: usize,
    pub train: TrainConfig,
    pub sigmas: Vec<f64>,
    pub seq_len_s: f64,
    pub step_s: f64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            cell: CellKind::Gru,
            hidden: 16,
            train: TrainConfig::default(),
            sigmas: AUGMENT_SIGMAS.to_vec(),
            seq_len_s: 180.0,
            step_s: 2.0,
        }
    }
}

/// Leave-one-out evaluation of the recurrent baseline: same folds and
/// fingerprints as the SVM path, augmentation applied to training folds
/// only, per-trial prediction by voting over sequence predictions.
pub fn loo_evaluate_rnn(
    table: &FeatureTable,
    window_len_s: f64,
    rnn: &RnnConfig,
    eval: &EvalConfig,
) -> Result<EvalReport> {
    let folds = build_folds(&table.keys, eval.fold_mode);
    let mut outcomes = Vec::new();
    for fold in &folds {
        // fit the per-feature transform and ranking on training windows only
        let all_cols: Vec<usize> = (0..table.dim()).collect();
        let mut x_tr = Array2::zeros((fold.train_idx.len(), table.dim()));
        for (r, &i) in fold.train_idx.iter().enumerate() {
            x_tr.row_mut(r).assign(&table.values.row(i));
        }
        let y_tr: Vec<usize> = fold
            .train_idx
            .iter()
            .map(|&i| table.labels[i].index())
            .collect();
        let standardizer = Standardizer::fit(x_tr.view());
        let x_tr_std = standardizer.apply(x_tr.view());
        let selected: Vec<usize> = match eval.k {
            Some(k) => {
                let ranking = fisher_scores_with(x_tr_std.view(), &y_tr, eval.fisher)?;
                select_top_k(&ranking, k.min(table.dim()))?
            }
            None => all_cols,
        };

        let transform = |idx: &[usize]| -> FeatureTable {
            let sub = table.filter_rows(|i, _| idx.contains(&i));
            let std_vals = standardizer.apply(sub.values.view());
            let mut vals = Array2::zeros((sub.n_rows(), selected.len()));
            for (r, row) in std_vals.rows().into_iter().enumerate() {
                for (c, &j) in selected.iter().enumerate() {
                    vals[(r, c)] = row[j];
                }
            }
            FeatureTable {
                band: sub.band,
                measure: sub.measure,
                columns: selected.iter().map(|&j| sub.columns[j].clone()).collect(),
                keys: sub.keys,
                labels: sub.labels,
                values: vals,
            }
        };
        let train_table = transform(&fold.train_idx);
        let test_table = transform(&fold.test_idx);

        let fold_seed = derive_seed(
            eval.seed,
            "rnn-fold",
            &[fold.unit.0 as u64, fold.unit.1 as u64],
        );
        let train_seqs = make_sequences(&train_table, window_len_s, rnn.seq_len_s, rnn.step_s)?;
        let train_seqs = augment_gaussian(&train_seqs, &rnn.sigmas, fold_seed)?;
        let test_seqs = make_sequences(&test_table, window_len_s, rnn.seq_len_s, rnn.step_s)?;

        let mut model = RecurrentModel::init(
            rnn.cell,
            selected.len(),
            rnn.hidden,
            3,
            derive_seed(fold_seed, "init", &[]),
        )?;
        let mut train_cfg = rnn.train.clone();
        train_cfg.seed = derive_seed(fold_seed, "train", &[]);
        train(&mut model, &train_seqs, &train_cfg)?;

        let fp = split_fingerprint(&table.keys, &fold.train_idx);
        let mut by_trial: std::collections::BTreeMap<TrialKey, (usize, Vec<usize>)> =
            Default::default();
        for s in &test_seqs {
            let pred = predict_sequence(&model, s.features.view())?;
            by_trial
                .entry(s.key.clone())
                .or_insert_with(|| (s.label.index(), Vec::new()))
                .1
                .push(pred);
        }
        for (key, (true_label, preds)) in by_trial {
            outcomes.push(FoldOutcome {
                subject: key.subject.clone(),
                session: key.session,
                trial: key.trial,
                true_label,
                predicted: vote_trial(&preds)?,
                fingerprint: fp,
            });
        }
    }
    Ok(EvalReport::from_folds(outcomes, 3))
}
