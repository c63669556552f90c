//! Leave-one-out trial cross-validation with window-majority voting,
//! plus decision-level fusion of feature types.
//!
//! The LOO unit defaults to the clip id, holding out all sessions of that
//! clip per fold: stimuli repeat across sessions, so holding out single
//! session-trials would leak stimulus identity. A per-session-trial mode
//! is available behind [`FoldMode::BySessionTrial`]. Fisher ranking and
//! feature standardization are fit on training windows only.

pub mod svm;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::data_model::TrialKey;
use crate::error::{Error, Result};
use crate::features::{FeatureTable, WindowKey};
use crate::selection::{fisher_scores_with, select_top_k, FisherVariant};
use crate::util::Fnv1a;

pub use svm::{decision_values, predict, train_linear_svm, LinearSvmModel, SvmConfig};

/// What counts as one held-out unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Hold out one clip id: all sessions of that clip leave the
    /// training set (15 folds on the full protocol).
    #[default]
    ByClip,
    /// Hold out one (session, clip) trial (45 folds on the full protocol).
    BySessionTrial,
}

/// Window-level classifier driven by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowClassifier {
    LinearSvm,
    /// Always predicts the given class; a chance-level probe.
    Constant(usize),
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Top-k Fisher selection; `None` keeps every feature. Values above
    /// the feature dimension are clamped to it.
    pub k: Option<usize>,
    pub svm: SvmConfig,
    pub fisher: FisherVariant,
    pub fold_mode: FoldMode,
    pub classifier: WindowClassifier,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: None,
            svm: SvmConfig::default(),
            fisher: FisherVariant::default(),
            fold_mode: FoldMode::default(),
            classifier: WindowClassifier::LinearSvm,
            seed: 0,
        }
    }
}

/// One held-out trial's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct FoldOutcome {
    pub subject: String,
    pub session: u32,
    pub trial: u32,
    pub true_label: usize,
    pub predicted: usize,
    /// Hash of the training-split window keys for this fold.
    pub fingerprint: u64,
}

/// Per-fold outcomes plus the aggregate accuracy statistics.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub folds: Vec<FoldOutcome>,
    /// (subject, accuracy), sorted by subject.
    pub per_subject: Vec<(String, f64)>,
    /// Mean of the per-subject accuracies.
    pub mean_accuracy: f64,
    /// Population standard deviation across subjects.
    pub std_accuracy: f64,
    /// confusion[true][predicted], all trials pooled.
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    pub fn from_folds(folds: Vec<FoldOutcome>, n_classes: usize) -> EvalReport {
        let mut by_subject: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        for f in &folds {
            let e = by_subject.entry(f.subject.clone()).or_insert((0, 0));
            e.1 += 1;
            if f.predicted == f.true_label {
                e.0 += 1;
            }
            if f.true_label < n_classes && f.predicted < n_classes {
                confusion[f.true_label][f.predicted] += 1;
            }
        }
        let per_subject: Vec<(String, f64)> = by_subject
            .into_iter()
            .map(|(s, (ok, total))| (s, ok as f64 / total as f64))
            .collect();
        let n = per_subject.len() as f64;
        let mean = if n > 0.0 {
            per_subject.iter().map(|(_, a)| a).sum::<f64>() / n
        } else {
            0.0
        };
        let var = if n > 0.0 {
            per_subject
                .iter()
                .map(|(_, a)| (a - mean) * (a - mean))
                .sum::<f64>()
                / n
        } else {
            0.0
        };
        EvalReport {
            folds,
            per_subject,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            confusion,
        }
    }

    /// Overall trial accuracy (all subjects pooled).
    pub fn pooled_accuracy(&self) -> f64 {
        if self.folds.is_empty() {
            return 0.0;
        }
        let ok = self
            .folds
            .iter()
            .filter(|f| f.predicted == f.true_label)
            .count();
        ok as f64 / self.folds.len() as f64
    }

    /// Per-fold rows as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
        w.write_record(["subject", "session", "trial", "true", "predicted", "fingerprint"])
            .map_err(|e| Error::data(path, e.to_string()))?;
        for f in &self.folds {
            w.write_record([
                f.subject.clone(),
                f.session.to_string(),
                f.trial.to_string(),
                f.true_label.to_string(),
                f.predicted.to_string(),
                format!("{:016x}", f.fingerprint),
            ])
            .map_err(|e| Error::data(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Summary (means, stds, confusion matrix) as JSON.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            mean_accuracy: f64,
            std_accuracy: f64,
            per_subject: &'a [(String, f64)],
            confusion: &'a [Vec<u64>],
            n_trials: usize,
        }
        let s = Summary {
            mean_accuracy: self.mean_accuracy,
            std_accuracy: self.std_accuracy,
            per_subject: &self.per_subject,
            confusion: &self.confusion,
            n_trials: self.folds.len(),
        };
        let text = serde_json::to_string_pretty(&s)
            .map_err(|e| Error::data(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Modal label; ties break to the lower class index.
pub fn vote_trial(window_labels: &[usize]) -> Result<usize> {
    if window_labels.is_empty() {
        return Err(Error::InvalidArgument("empty window label vector".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in window_labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
        .expect("non-empty"))
}

/// Hash of a training split: the sorted window keys of the given rows.
pub fn split_fingerprint(keys: &[WindowKey], idx: &[usize]) -> u64 {
    let mut sorted: Vec<&WindowKey> = idx.iter().map(|&i| &keys[i]).collect();
    sorted.sort();
    let mut h = Fnv1a::new();
    for k in sorted {
        h.write_str(&k.subject)
            .write_u64(k.session as u64)
            .write_u64(k.trial as u64)
            .write_u64(k.window as u64);
    }
    h.finish()
}

/// Per-feature z-scoring parameters fit on training rows.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Standardizer {
        let n = x.nrows() as f64;
        let d = x.ncols();
        let mut means = vec![0.0; d];
        let mut scales = vec![1.0; d];
        for j in 0..d {
            let col = x.column(j);
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            means[j] = m;
            let sd = var.sqrt();
            scales[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        Standardizer { means, scales }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.scales[j];
            }
        }
        out
    }
}

/// Rows for a matrix restricted to `rows` and `cols`.
fn submatrix(x: &Array2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), cols.len()));
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            out[(r, c)] = x[(i, j)];
        }
    }
    out
}

/// The training/test split of one fold.
#[derive(Debug, Clone)]
pub struct Fold {
    pub subject: String,
    /// Clip id (ByClip) or encoded session/clip (BySessionTrial).
    pub unit: (u32, u32),
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Build the leave-one-out folds for every subject of the table.
pub fn build_folds(keys: &[WindowKey], mode: FoldMode) -> Vec<Fold> {
    let mut subjects: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        subjects.entry(&k.subject).or_default().push(i);
    }
    let mut folds = Vec::new();
    for (subject, rows) in subjects {
        let units: BTreeSet<(u32, u32)> = rows
            .iter()
            .map(|&i| match mode {
                FoldMode::ByClip => (0, keys[i].trial),
                FoldMode::BySessionTrial => (keys[i].session, keys[i].trial),
            })
            .collect();
        for unit in units {
            let matches = |i: usize| match mode {
                FoldMode::ByClip => keys[i].trial == unit.1,
                FoldMode::BySessionTrial => {
                    keys[i].session == unit.0 && keys[i].trial == unit.1
                }
            };
            let test_idx: Vec<usize> = rows.iter().copied().filter(|&i| matches(i)).collect();
            let train_idx: Vec<usize> = rows.iter().copied().filter(|&i| !matches(i)).collect();
            folds.push(Fold {
                subject: subject.to_string(),
                unit,
                train_idx,
                test_idx,
            });
        }
    }
    folds
}

/// A trained fold model: standardizer + selected columns + classifier.
struct FoldModel {
    standardizer: Standardizer,
    selected: Vec<usize>,
    classifier: FoldClassifier,
    classes: Vec<usize>,
}

enum FoldClassifier {
    Svm(LinearSvmModel),
    Constant(usize),
}

impl FoldModel {
    /// [n x n_classes] decision scores for the given raw rows.
    fn scores(&self, table: &FeatureTable, rows: &[usize]) -> Result<Array2<f64>> {
        let x = submatrix(&table.values, rows, &self.selected);
        let x = self.standardizer_applied(x);
        match &self.classifier {
            FoldClassifier::Svm(m) => decision_values(m, x.view()),
            FoldClassifier::Constant(c) => {
                let mut out = Array2::zeros((rows.len(), self.classes.len()));
                if let Some(j) = self.classes.iter().position(|&cl| cl == *c) {
                    for r in 0..rows.len() {
                        out[(r, j)] = 1.0;
                    }
                }
                Ok(out)
            }
        }
    }

    fn standardizer_applied(&self, x: Array2<f64>) -> Array2<f64> {
        self.standardizer.apply(x.view())
    }
}

fn train_fold_model(table: &FeatureTable, fold: &Fold, cfg: &EvalConfig) -> Result<FoldModel> {
    let y_tr: Vec<usize> = fold
        .train_idx
        .iter()
        .map(|&i| table.labels[i].index())
        .collect();
    let subject_classes: BTreeSet<usize> = fold
        .train_idx
        .iter()
        .chain(fold.test_idx.iter())
        .map(|&i| table.labels[i].index())
        .collect();
    let train_classes: BTreeSet<usize> = y_tr.iter().copied().collect();
    if train_classes.len() < subject_classes.len() {
        return Err(Error::InvalidArgument(format!(
            "fold on {}/{:?}: a class is missing from the training split",
            fold.subject, fold.unit
        )));
    }

    let d = table.dim();
    let all_cols: Vec<usize> = (0..d).collect();
    let x_tr_full = submatrix(&table.values, &fold.train_idx, &all_cols);
    let standardizer = Standardizer::fit(x_tr_full.view());
    let x_tr_std = standardizer.apply(x_tr_full.view());

    let selected: Vec<usize> = match cfg.k {
        Some(k) => {
            let ranking = fisher_scores_with(x_tr_std.view(), &y_tr, cfg.fisher)?;
            select_top_k(&ranking, k.min(d))?
        }
        None => all_cols,
    };
    let x_tr_sel = {
        let rows: Vec<usize> = (0..x_tr_std.nrows()).collect();
        submatrix(&x_tr_std, &rows, &selected)
    };

    // restrict the standardizer to the selected columns so test rows can
    // be transformed after column selection
    let sub_standardizer = Standardizer {
        means: selected.iter().map(|&j| standardizer.means[j]).collect(),
        scales: selected.iter().map(|&j| standardizer.scales[j]).collect(),
    };

    let classes: Vec<usize> = train_classes.into_iter().collect();
    let classifier = match cfg.classifier {
        WindowClassifier::LinearSvm => {
            let mut svm_cfg = cfg.svm.clone();
            svm_cfg.seed = crate::util::derive_seed(
                cfg.seed,
                "svm-fold",
                &[fold.unit.0 as u64, fold.unit.1 as u64],
            );
            FoldClassifier::Svm(train_linear_svm(x_tr_sel.view(), &y_tr, &svm_cfg)?)
        }
        WindowClassifier::Constant(c) => FoldClassifier::Constant(c),
    };
    let classes = match &classifier {
        FoldClassifier::Svm(m) => m.classes.clone(),
        FoldClassifier::Constant(_) => classes,
    };
    Ok(FoldModel {
        standardizer: sub_standardizer,
        selected,
        classifier,
        classes,
    })
}

/// Group test rows into (session, trial) groups, vote each group.
fn vote_groups(
    table: &FeatureTable,
    test_idx: &[usize],
    window_preds: &[usize],
    fingerprint: u64,
    subject: &str,
) -> Result<Vec<FoldOutcome>> {
    let mut groups: BTreeMap<(u32, u32), (usize, Vec<usize>)> = BTreeMap::new();
    for (pos, &i) in test_idx.iter().enumerate() {
        let k = &table.keys[i];
        groups
            .entry((k.session, k.trial))
            .or_insert_with(|| (table.labels[i].index(), Vec::new()))
            .1
            .push(window_preds[pos]);
    }
    groups
        .into_iter()
        .map(|((session, trial), (true_label, preds))| {
            Ok(FoldOutcome {
                subject: subject.to_string(),
                session,
                trial,
                true_label,
                predicted: vote_trial(&preds)?,
                fingerprint,
            })
        })
        .collect()
}

fn argmax_rows(scores: &Array2<f64>, classes: &[usize]) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            classes[best]
        })
        .collect()
}

/// Leave-one-out evaluation over one feature table. Folds run in
/// parallel; results are assembled in fold order.
pub fn loo_evaluate(table: &FeatureTable, cfg: &EvalConfig) -> Result<EvalReport> {
    let folds = build_folds(&table.keys, cfg.fold_mode);
    let per_fold: Vec<Result<Vec<FoldOutcome>>> = folds
        .par_iter()
        .map(|fold| {
            let model = train_fold_model(table, fold, cfg)?;
            let scores = model.scores(table, &fold.test_idx)?;
            let preds = argmax_rows(&scores, &model.classes);
            let fp = split_fingerprint(&table.keys, &fold.train_idx);
            vote_groups(table, &fold.test_idx, &preds, fp, &fold.subject)
        })
        .collect();
    let mut outcomes = Vec::new();
    for r in per_fold {
        outcomes.extend(r?);
    }
    Ok(EvalReport::from_folds(outcomes, 3))
}

/// Aligned per-window class scores from one model.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    pub keys: Vec<WindowKey>,
    /// [n_windows x n_classes]
    pub scores: Array2<f64>,
}

/// Decision-level fusion: per-model score normalization (global z-score
/// of the score matrix), summation, argmax, then per-trial vote.
pub fn fuse_decision(sets: &[ScoreSet]) -> Result<Vec<(TrialKey, usize)>> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("no score sets to fuse".into()));
    }
    let keys = &sets[0].keys;
    let shape = sets[0].scores.dim();
    for s in sets.iter().skip(1) {
        if s.keys != *keys {
            return Err(Error::InvalidArgument(
                "window keys misaligned across score sets".into(),
            ));
        }
        if s.scores.dim() != shape {
            return Err(Error::InvalidArgument(
                "score shapes differ across sets".into(),
            ));
        }
    }
    let mut fused = Array2::<f64>::zeros(shape);
    for s in sets {
        let n = (shape.0 * shape.1) as f64;
        let mean = s.scores.sum() / n;
        let var = s.scores.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 0.0 {
            fused.zip_mut_with(&s.scores, |f, &v| *f += (v - mean) / sd);
        }
        // a zero-variance model contributes nothing
    }
    let mut groups: BTreeMap<TrialKey, Vec<usize>> = BTreeMap::new();
    for (r, key) in keys.iter().enumerate() {
        let row = fused.row(r);
        let mut best = 0usize;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        groups.entry(key.trial_key()).or_default().push(best);
    }
    groups
        .into_iter()
        .map(|(k, preds)| Ok((k, vote_trial(&preds)?)))
        .collect()
}

/// Leave-one-out evaluation fusing two feature tables at decision level.
/// Both tables must cover the same windows in the same order.
pub fn loo_evaluate_fused(
    a: &FeatureTable,
    k_a: Option<usize>,
    b: &FeatureTable,
    k_b: Option<usize>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if a.keys != b.keys {
        return Err(Error::InvalidArgument(
            "fused tables must cover identical windows".into(),
        ));
    }
    let folds = build_folds(&a.keys, cfg.fold_mode);
    let per_fold: Vec<Result<Vec<FoldOutcome>>> = folds
        .par_iter()
        .map(|fold| {
            let cfg_a = EvalConfig {
                k: k_a,
                ..cfg.clone()
            };
            let cfg_b = EvalConfig {
                k: k_b,
                ..cfg.clone()
            };
            let model_a = train_fold_model(a, fold, &cfg_a)?;
            let model_b = train_fold_model(b, fold, &cfg_b)?;
            let test_keys: Vec<WindowKey> =
                fold.test_idx.iter().map(|&i| a.keys[i].clone()).collect();
            let sets = vec![
                ScoreSet {
                    keys: test_keys.clone(),
                    scores: model_a.scores(a, &fold.test_idx)?,
                },
                ScoreSet {
                    keys: test_keys,
                    scores: model_b.scores(b, &fold.test_idx)?,
                },
            ];
            let fp = split_fingerprint(&a.keys, &fold.train_idx);
            let label_of: BTreeMap<TrialKey, usize> = fold
                .test_idx
                .iter()
                .map(|&i| (a.keys[i].trial_key(), a.labels[i].index()))
                .collect();
            fuse_decision(&sets)?
                .into_iter()
                .map(|(key, predicted)| {
                    Ok(FoldOutcome {
                        subject: key.subject.clone(),
                        session: key.session,
                        trial: key.trial,
                        true_label: label_of[&key],
                        predicted,
                        fingerprint: fp,
                    })
                })
                .collect()
        })
        .collect();
    let mut outcomes = Vec::new();
    for r in per_fold {
        outcomes.extend(r?);
    }
    Ok(EvalReport::from_folds(outcomes, 3))
}
