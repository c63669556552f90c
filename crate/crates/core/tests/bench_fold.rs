// temporary profiling harness
use eegconn::classify::{loo_evaluate, EvalConfig};
use eegconn::data_model::{Band, BandName, EmotionLabel};
use eegconn::features::{FeatureTable, Measure, WindowKey};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
#[ignore]
fn profile_loo() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 120;
    let mut keys = Vec::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for subj in 0..1 {
        for clip in 1..=15u32 {
            let class = ((clip - 1) % 3) as usize;
            for w in 0..50u32 {
                keys.push(WindowKey { subject: format!("s{subj}"), session: 1, trial: clip, window: w });
                labels.push(EmotionLabel::from_index(class).unwrap());
                rows.push((0..d).map(|j| {
                    let base: f64 = rng.sample(StandardNormal);
                    if j % 3 == class { base + 0.25 } else { base }
                }).collect());
            }
        }
    }
    let table = FeatureTable::from_rows(
        Band::canonical(BandName::Gamma, Default::default()),
        Measure::Plv,
        (0..d).map(|j| format!("f{j}")).collect(),
        keys, labels, rows,
    ).unwrap();
    let t0 = std::time::Instant::now();
    let report = loo_evaluate(&table, &EvalConfig::default()).unwrap();
    eprintln!("15 folds (700x120): {:?}, acc {}", t0.elapsed(), report.mean_accuracy);
}

#[test]
#[ignore]
fn profile_loo_with_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 120;
    let mut keys = Vec::new();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for clip in 1..=15u32 {
        let class = ((clip - 1) % 3) as usize;
        for w in 0..50u32 {
            keys.push(WindowKey { subject: "s0".into(), session: 1, trial: clip, window: w });
            labels.push(EmotionLabel::from_index(class).unwrap());
            rows.push((0..d).map(|j| {
                let base: f64 = rng.sample(StandardNormal);
                if j % 3 == class { base + 0.25 } else { base }
            }).collect());
        }
    }
    let table = FeatureTable::from_rows(
        Band::canonical(BandName::Gamma, Default::default()),
        Measure::Plv,
        (0..d).map(|j| format!("f{j}")).collect(),
        keys, labels, rows,
    ).unwrap();
    let cfg = EvalConfig { k: Some(24), ..Default::default() };
    let t0 = std::time::Instant::now();
    let report = loo_evaluate(&table, &cfg).unwrap();
    eprintln!("15 folds k=24: {:?}, acc {}", t0.elapsed(), report.mean_accuracy);
}

#[test]
#[ignore]
fn profile_single_binary() {
    use eegconn::classify::svm::solve_binary;
    use ndarray::Array2;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for d in [24usize, 120] {
        let n = 700;
        let mut x = Array2::zeros((n, d));
        let mut y = Vec::new();
        for r in 0..n {
            let cls = if r % 3 == 0 { 1.0 } else { -1.0 };
            for j in 0..d {
                x[(r, j)] = rng.sample::<f64, _>(StandardNormal) + if j % 3 == 0 { cls * 0.25 } else { 0.0 };
            }
            y.push(cls);
        }
        let t0 = std::time::Instant::now();
        let b = solve_binary(x.view(), &y, &Default::default()).unwrap();
        eprintln!("d={d}: {:?}, passes {}, converged {}", t0.elapsed(), b.passes, b.converged);
    }
}
