//! Fisher-score ranking and top-k feature selection.
//!
//! The score follows the printed formula exactly: the between-class
//! numerator is NOT weighted by class size, and the within-class
//! denominator uses 1/(n_k - 1) per class. The conventional class-weighted
//! variant is available behind [`FisherVariant::ClassWeighted`].

use std::collections::BTreeMap;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::util::Fnv1a;

/// Default sweep grid for connectivity features.
pub const CONNECTIVITY_K_GRID: [usize; 9] = [100, 200, 300, 400, 500, 600, 700, 800, 1200];
/// Default sweep grid for DE features.
pub const DE_K_GRID: [usize; 5] = [10, 20, 30, 40, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FisherVariant {
    /// Unweighted between-class numerator, 1/(n_k - 1) within-class terms.
    #[default]
    PaperUnweighted,
    /// Conventional form: both sums weighted by class size.
    ClassWeighted,
}

/// Per-feature scores with their descending sort order and a fingerprint
/// of the training data that produced them.
#[derive(Debug, Clone)]
pub struct FisherRanking {
    pub scores: Vec<f64>,
    /// Permutation sorting scores descending, ties broken by lower index.
    pub order: Vec<usize>,
    /// Hash of the training matrix and labels.
    pub fingerprint: u64,
    /// Features whose within-class variance was zero (scored 0).
    pub zero_denominator: Vec<usize>,
}

/// Score every feature column of `features` against `labels`.
pub fn fisher_scores(features: ArrayView2<f64>, labels: &[usize]) -> Result<FisherRanking> {
    fisher_scores_with(features, labels, FisherVariant::PaperUnweighted)
}

pub fn fisher_scores_with(
    features: ArrayView2<f64>,
    labels: &[usize],
    variant: FisherVariant,
) -> Result<FisherRanking> {
    let n = features.nrows();
    let d = features.ncols();
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} rows but {} labels",
            labels.len()
        )));
    }
    let mut class_rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        class_rows.entry(l).or_default().push(i);
    }
    if class_rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 classes, got {}",
            class_rows.len()
        )));
    }
    for (c, rows) in &class_rows {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {c} has {} sample(s); need >= 2",
                rows.len()
            )));
        }
    }

    let mut fp = Fnv1a::new();
    fp.write_u64(n as u64).write_u64(d as u64);
    for &l in labels {
        fp.write_u64(l as u64);
    }
    for v in features.iter() {
        fp.write_f64(*v);
    }

    let mut scores = vec![0.0; d];
    let mut zero_denominator = Vec::new();
    for i in 0..d {
        let col = features.column(i);
        let overall_mean = col.sum() / n as f64;
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for rows in class_rows.values() {
            let nk = rows.len() as f64;
            let class_mean = rows.iter().map(|&r| col[r]).sum::<f64>() / nk;
            let ss: f64 = rows
                .iter()
                .map(|&r| (col[r] - class_mean) * (col[r] - class_mean))
                .sum();
            match variant {
                FisherVariant::PaperUnweighted => {
                    numerator += (class_mean - overall_mean) * (class_mean - overall_mean);
                    denominator += ss / (nk - 1.0);
                }
                FisherVariant::ClassWeighted => {
                    numerator += nk * (class_mean - overall_mean) * (class_mean - overall_mean);
                    denominator += ss;
                }
            }
        }
        if denominator <= 0.0 {
            // a feature constant within every class carries no
            // within-class variance information; score it 0 instead of
            // letting it hijack the ranking
            scores[i] = 0.0;
            zero_denominator.push(i);
        } else {
            scores[i] = numerator / denominator;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("fisher scores are finite")
            .then(a.cmp(&b))
    });

    Ok(FisherRanking {
        scores,
        order,
        fingerprint: fp.finish(),
        zero_denominator,
    })
}

/// The k highest-scoring feature indices, returned in ascending index
/// order so downstream column selection is canonical.
pub fn select_top_k(ranking: &FisherRanking, k: usize) -> Result<Vec<usize>> {
    let d = ranking.scores.len();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside [1, {d}]"
        )));
    }
    let mut idx: Vec<usize> = ranking.order[..k].to_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Evaluate `evaluator(k)` for each k of a sorted grid.
pub fn k_sweep(
    k_grid: &[usize],
    mut evaluator: impl FnMut(usize) -> Result<f64>,
) -> Result<Vec<(usize, f64)>> {
    if k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "k grid must be strictly increasing".into(),
        ));
    }
    k_grid.iter().map(|&k| Ok((k, evaluator(k)?))).collect()
}
