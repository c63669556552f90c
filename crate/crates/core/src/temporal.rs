//! Sliding-interval accuracy scan: per-interval leave-one-out evaluation,
//! per-subject best-interval selection, and interval-grid export.
//!
//! The canonical grid is a one-minute window sliding by 20 s, with the
//! last interval running to the end of each trial: 0-60, 20-80, ...,
//! 120-180, 140-end. `end` is resolved per trial, since trials may differ
//! in length; a trial with no complete window inside an interval is
//! excluded from that interval with a warning.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ndarray::Array3;
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{loo_evaluate, EvalConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, Measure};
use crate::preprocess::BandedEpochs;

/// Interval upper bound: a fixed time or the end of the trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IntervalEnd {
    At(f64),
    End,
}

/// A [start, end) time interval aligned to window boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSpec {
    pub start_s: f64,
    pub end: IntervalEnd,
}

impl IntervalSpec {
    pub fn new(start_s: f64, end: IntervalEnd) -> Result<IntervalSpec> {
        if start_s < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "interval start {start_s} is negative"
            )));
        }
        if let IntervalEnd::At(e) = end {
            if e <= start_s {
                return Err(Error::InvalidArgument(format!(
                    "interval start {start_s} not before end {e}"
                )));
            }
        }
        Ok(IntervalSpec { start_s, end })
    }

    /// Window indices whose start times lie in [start, end), given the
    /// window length; `end` resolves to `n_windows`.
    pub fn window_range(&self, window_len_s: f64, n_windows: usize) -> (usize, usize) {
        let k0 = (self.start_s / window_len_s).ceil() as usize;
        let k1 = match self.end {
            IntervalEnd::At(e) => ((e / window_len_s).ceil() as usize).min(n_windows),
            IntervalEnd::End => n_windows,
        };
        (k0.min(n_windows), k1)
    }

    /// Whole-trial interval.
    pub fn full() -> IntervalSpec {
        IntervalSpec {
            start_s: 0.0,
            end: IntervalEnd::End,
        }
    }

    /// The one-minute/20-s-step grid ending with 140-end.
    pub fn canonical_grid() -> Vec<IntervalSpec> {
        let mut grid: Vec<IntervalSpec> = (0..7)
            .map(|i| IntervalSpec {
                start_s: 20.0 * i as f64,
                end: IntervalEnd::At(20.0 * i as f64 + 60.0),
            })
            .collect();
        grid.push(IntervalSpec {
            start_s: 140.0,
            end: IntervalEnd::End,
        });
        grid
    }

    /// Parse `"start:end"` where `end` may be the literal `end`, or the
    /// literal `canonical` for the whole canonical grid.
    pub fn parse_list(text: &str) -> Result<Vec<IntervalSpec>> {
        if text.trim() == "canonical" {
            return Ok(Self::canonical_grid());
        }
        text.split(',')
            .map(|part| {
                let part = part.trim();
                let (a, b) = part.split_once(':').ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "interval {part:?} is not start:end"
                    ))
                })?;
                let start_s: f64 = a.parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad interval start {a:?}"))
                })?;
                let end = if b == "end" {
                    IntervalEnd::End
                } else {
                    IntervalEnd::At(b.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad interval end {b:?}"))
                    })?)
                };
                IntervalSpec::new(start_s, end)
            })
            .collect()
    }
}

impl fmt::Display for IntervalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            IntervalEnd::At(e) => write!(f, "{}-{}", self.start_s, e),
            IntervalEnd::End => write!(f, "{}-end", self.start_s),
        }
    }
}

/// Restrict epochs to the windows of an interval.
pub fn slice_windows(epochs: &BandedEpochs, interval: &IntervalSpec) -> Result<BandedEpochs> {
    let n = epochs.n_windows();
    let (k0, k1) = interval.window_range(epochs.window_len_s, n);
    if k0 >= k1 {
        return Err(Error::InvalidArgument(format!(
            "interval {interval} selects no windows of a {n}-window trial"
        )));
    }
    let (_, n_ch, len) = epochs.windows.dim();
    let mut windows = Array3::zeros((k1 - k0, n_ch, len));
    for (to, from) in (k0..k1).enumerate() {
        windows
            .index_axis_mut(ndarray::Axis(0), to)
            .assign(&epochs.windows.index_axis(ndarray::Axis(0), from));
    }
    Ok(BandedEpochs {
        band: epochs.band,
        windows,
        window_len_s: epochs.window_len_s,
        fs_hz: epochs.fs_hz,
        key: epochs.key.clone(),
        label: epochs.label,
    })
}

/// Accuracy grid over (subject, interval) for one feature type.
#[derive(Debug, Clone, Serialize)]
pub struct TemporalProfile {
    pub measure: Measure,
    pub intervals: Vec<IntervalSpec>,
    /// subject -> accuracy per interval (same order as `intervals`).
    pub per_subject: BTreeMap<String, Vec<f64>>,
    pub mean_per_interval: Vec<f64>,
    pub std_per_interval: Vec<f64>,
    /// subject -> index of its best interval (earliest wins ties).
    pub best_per_subject: BTreeMap<String, usize>,
    /// Best across-subject mean accuracy and the interval achieving it.
    pub approach1: f64,
    pub approach1_interval: usize,
    /// Mean of each subject's own best-interval accuracy.
    pub approach2: f64,
    pub warnings: Vec<String>,
}

impl TemporalProfile {
    /// Aggregate a filled grid into the two summary approaches.
    pub fn from_grid(
        measure: Measure,
        intervals: Vec<IntervalSpec>,
        per_subject: BTreeMap<String, Vec<f64>>,
        warnings: Vec<String>,
    ) -> Result<TemporalProfile> {
        let n_int = intervals.len();
        if per_subject.is_empty() {
            return Err(Error::InvalidArgument("empty accuracy grid".into()));
        }
        if per_subject.values().any(|v| v.len() != n_int) {
            return Err(Error::InvalidArgument(
                "grid incomplete over the interval set".into(),
            ));
        }
        let n_sub = per_subject.len() as f64;
        let mut mean_per_interval = vec![0.0; n_int];
        for accs in per_subject.values() {
            for (i, a) in accs.iter().enumerate() {
                mean_per_interval[i] += a / n_sub;
            }
        }
        let mut std_per_interval = vec![0.0; n_int];
        for accs in per_subject.values() {
            for (i, a) in accs.iter().enumerate() {
                let d = a - mean_per_interval[i];
                std_per_interval[i] += d * d / n_sub;
            }
        }
        for v in std_per_interval.iter_mut() {
            *v = v.sqrt();
        }
        let argmax_earliest = |vals: &[f64]| -> usize {
            let mut best = 0usize;
            for (i, v) in vals.iter().enumerate() {
                if *v > vals[best] {
                    best = i;
                }
            }
            best
        };
        let approach1_interval = argmax_earliest(&mean_per_interval);
        let approach1 = mean_per_interval[approach1_interval];
        let best_per_subject: BTreeMap<String, usize> = per_subject
            .iter()
            .map(|(s, accs)| (s.clone(), argmax_earliest(accs)))
            .collect();
        let approach2 = per_subject
            .iter()
            .map(|(s, accs)| accs[best_per_subject[s]])
            .sum::<f64>()
            / n_sub;
        Ok(TemporalProfile {
            measure,
            intervals,
            per_subject,
            mean_per_interval,
            std_per_interval,
            best_per_subject,
            approach1,
            approach1_interval,
            approach2,
            warnings,
        })
    }
}

/// Run the leave-one-out evaluation restricted to each interval of the
/// grid and aggregate the accuracy grid.
pub fn temporal_scan(
    table: &FeatureTable,
    window_len_s: f64,
    grid: &[IntervalSpec],
    cfg: &EvalConfig,
) -> Result<TemporalProfile> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty interval grid".into()));
    }
    // per-trial window counts, for `end` resolution and short-trial checks
    let mut trial_windows: BTreeMap<(String, u32, u32), u32> = BTreeMap::new();
    for k in &table.keys {
        let e = trial_windows
            .entry((k.subject.clone(), k.session, k.trial))
            .or_insert(0);
        *e = (*e).max(k.window + 1);
    }

    let results: Vec<Result<(BTreeMap<String, Vec<f64>>, Vec<String>)>> = grid
        .par_iter()
        .map(|interval| {
            let mut warnings = Vec::new();
            for ((sub, sess, trial), &n_win) in &trial_windows {
                let (k0, k1) = interval.window_range(window_len_s, n_win as usize);
                if k0 >= k1 {
                    warnings.push(format!(
                        "trial {sub}/s{sess}/t{trial} ({n_win} windows) excluded from {interval}"
                    ));
                }
            }
            let sliced = table.filter_rows(|_, key| {
                let n_win = trial_windows[&(key.subject.clone(), key.session, key.trial)];
                let (k0, k1) = interval.window_range(window_len_s, n_win as usize);
                (key.window as usize) >= k0 && (key.window as usize) < k1
            });
            if sliced.n_rows() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "interval {interval} selects no windows at all"
                )));
            }
            let report = loo_evaluate(&sliced, cfg)?;
            let per_subject: BTreeMap<String, Vec<f64>> = report
                .per_subject
                .iter()
                .map(|(s, a)| (s.clone(), vec![*a]))
                .collect();
            Ok((per_subject, warnings))
        })
        .collect();

    let mut grid_accs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for r in results {
        let (per_subject, mut warns) = r?;
        warnings.append(&mut warns);
        for (s, accs) in per_subject {
            grid_accs.entry(s).or_default().extend(accs);
        }
    }
    TemporalProfile::from_grid(table.measure, grid.to_vec(), grid_accs, warnings)
}

/// CSV grid (one row per subject, one value column per interval).
pub fn export_interval_grid_csv(profile: &TemporalProfile, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
    let mut header = vec!["subject".to_string()];
    header.extend(profile.intervals.iter().map(|i| i.to_string()));
    w.write_record(&header)
        .map_err(|e| Error::data(path, e.to_string()))?;
    for (subject, accs) in &profile.per_subject {
        let mut rec = vec![subject.clone()];
        rec.extend(accs.iter().map(|v| v.to_string()));
        w.write_record(&rec)
            .map_err(|e| Error::data(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Re-import a grid written by [`export_interval_grid_csv`].
pub fn import_interval_grid_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::data(path, e.to_string()))?
        .clone();
    let intervals: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut subjects = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
        subjects.push(rec[0].to_string());
        values.push(
            rec.iter()
                .skip(1)
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::data(path, format!("bad number {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((subjects, intervals, values))
}

/// SVG heatmap of the grid. Intensity is the linear map
/// accuracy 0.0 -> black, 1.0 -> white, per cell.
pub fn export_interval_grid_svg(profile: &TemporalProfile, path: &Path) -> Result<()> {
    const CELL: usize = 28;
    const LEFT: usize = 90;
    const TOP: usize = 60;
    let n_sub = profile.per_subject.len();
    let n_int = profile.intervals.len();
    let width = LEFT + n_int * CELL + 10;
    let height = TOP + n_sub * CELL + 10;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">{} accuracy per subject and interval</text>\n",
        profile.measure
    ));
    for (j, interval) in profile.intervals.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"9\" transform=\"rotate(-45 {} {})\">{}</text>\n",
            LEFT + j * CELL + 4,
            TOP - 6,
            LEFT + j * CELL + 4,
            TOP - 6,
            interval
        ));
    }
    for (i, (subject, accs)) in profile.per_subject.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            TOP + i * CELL + CELL / 2 + 4,
            subject
        ));
        for (j, acc) in accs.iter().enumerate() {
            let level = (acc.clamp(0.0, 1.0) * 255.0).round() as u8;
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"rgb({level},{level},{level})\" stroke=\"#444\"/>\n",
                LEFT + j * CELL,
                TOP + i * CELL,
            ));
        }
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Band, BandName, EmotionLabel, Recording, TrialKey};
    use crate::features::WindowKey;
    use crate::preprocess::epoch;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn canonical_grid_shape() {
        let grid = IntervalSpec::canonical_grid();
        assert_eq!(grid.len(), 8);
        assert_eq!(grid[0].to_string(), "0-60");
        assert_eq!(grid[6].to_string(), "120-180");
        assert_eq!(grid[7].to_string(), "140-end");
    }

    #[test]
    fn window_range_arithmetic() {
        let first = IntervalSpec::new(0.0, IntervalEnd::At(60.0)).unwrap();
        assert_eq!(first.window_range(2.0, 120), (0, 30));
        let last = IntervalSpec::new(140.0, IntervalEnd::End).unwrap();
        assert_eq!(last.window_range(2.0, 120), (70, 120));
        let full = IntervalSpec::full();
        assert_eq!(full.window_range(2.0, 120), (0, 120));
    }

    fn epochs_240s() -> crate::preprocess::BandedEpochs {
        let fs = 200.0;
        let n = (240.0 * fs) as usize;
        let mut samples = Array2::zeros((2, n));
        for ch in 0..2 {
            for s in 0..n {
                samples[(ch, s)] = ((ch + 1) * s) as f64 * 1e-4 + (s as f64 * 0.31).sin();
            }
        }
        let rec = Recording::new(
            TrialKey {
                subject: "s01".into(),
                session: 1,
                trial: 1,
            },
            EmotionLabel::Neutral,
            fs,
            vec!["a".into(), "b".into()],
            samples,
        )
        .unwrap();
        epoch(&rec, 2.0, Band::canonical(BandName::Gamma, Default::default())).unwrap()
    }

    #[test]
    fn slice_windows_selects_expected_range() {
        let ep = epochs_240s();
        assert_eq!(ep.n_windows(), 120);
        let sliced = slice_windows(
            &ep,
            &IntervalSpec::new(0.0, IntervalEnd::At(60.0)).unwrap(),
        )
        .unwrap();
        assert_eq!(sliced.n_windows(), 30);
        for w in 0..30 {
            assert_eq!(
                sliced.windows.index_axis(ndarray::Axis(0), w),
                ep.windows.index_axis(ndarray::Axis(0), w)
            );
        }
        let tail = slice_windows(
            &ep,
            &IntervalSpec::new(140.0, IntervalEnd::End).unwrap(),
        )
        .unwrap();
        assert_eq!(tail.n_windows(), 50);
        assert_eq!(
            tail.windows.index_axis(ndarray::Axis(0), 0),
            ep.windows.index_axis(ndarray::Axis(0), 70)
        );
        let full = slice_windows(&ep, &IntervalSpec::full()).unwrap();
        assert_eq!(full.windows, ep.windows);
    }

    #[test]
    fn empty_slice_is_an_error() {
        let ep = epochs_240s();
        let late = IntervalSpec::new(400.0, IntervalEnd::End).unwrap();
        assert!(slice_windows(&ep, &late).is_err());
    }

    #[test]
    fn canonical_grid_covers_all_windows_with_documented_overlaps() {
        let grid = IntervalSpec::canonical_grid();
        let n = 120usize;
        let mut covered = vec![0usize; n];
        for g in &grid {
            let (k0, k1) = g.window_range(2.0, n);
            for c in covered.iter_mut().take(k1).skip(k0) {
                *c += 1;
            }
        }
        assert!(covered.iter().all(|&c| c >= 1), "grid leaves windows uncovered");
        // the 60 s windows with 20 s steps triple-cover the middle
        assert_eq!(covered[35], 3);
    }

    /// Feature table whose class separation grows with window index.
    fn ramped_table(seed: u64, n_subjects: usize, ramp: impl Fn(u32) -> f64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let mut keys = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for subj in 0..n_subjects {
            for clip in 1..=9u32 {
                let class = ((clip - 1) % 3) as usize;
                for w in 0..120u32 {
                    keys.push(WindowKey {
                        subject: format!("s{subj:02}"),
                        session: 1,
                        trial: clip,
                        window: w,
                    });
                    labels.push(EmotionLabel::from_index(class).unwrap());
                    let shift = ramp(w);
                    rows.push(
                        (0..d)
                            .map(|j| {
                                let base: f64 = rng.sample(StandardNormal);
                                if j == class {
                                    base + shift
                                } else {
                                    base
                                }
                            })
                            .collect(),
                    );
                }
            }
        }
        FeatureTable::from_rows(
            Band::canonical(BandName::Gamma, Default::default()),
            Measure::Plv,
            (0..d).map(|j| format!("f{j}")).collect(),
            keys,
            labels,
            rows,
        )
        .unwrap()
    }

    #[test]
    fn ramped_discriminability_favors_late_intervals() {
        // class separation rises with time: later intervals beat 0-60 s
        let table = ramped_table(7, 2, |w| (w as f64 / 120.0) * 1.5);
        let profile = temporal_scan(
            &table,
            2.0,
            &IntervalSpec::canonical_grid(),
            &EvalConfig::default(),
        )
        .unwrap();
        let first = profile.mean_per_interval[0];
        let last = profile.mean_per_interval[7];
        assert!(
            last > first,
            "late interval {last} not above first {first}"
        );
        assert!(profile.approach1_interval >= 5);
    }

    #[test]
    fn stationary_data_shows_no_interval_structure() {
        let table = ramped_table(8, 2, |_| 0.9);
        let profile = temporal_scan(
            &table,
            2.0,
            &IntervalSpec::canonical_grid(),
            &EvalConfig::default(),
        )
        .unwrap();
        // binomial envelope: per-interval mean accuracy over 18 trials
        let p: f64 = profile.mean_per_interval.iter().sum::<f64>() / 8.0;
        let sigma = (p * (1.0 - p) / 18.0).sqrt();
        for (i, m) in profile.mean_per_interval.iter().enumerate() {
            assert!(
                (m - p).abs() <= 3.0 * sigma.max(0.02),
                "interval {i} accuracy {m} deviates from {p} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn approach2_dominates_approach1() {
        for seed in [1u64, 2, 3] {
            let table = ramped_table(seed, 3, |w| (w as f64 / 120.0) * 1.2);
            let profile = temporal_scan(
                &table,
                2.0,
                &IntervalSpec::canonical_grid(),
                &EvalConfig::default(),
            )
            .unwrap();
            assert!(
                profile.approach2 >= profile.approach1,
                "approach2 {} < approach1 {}",
                profile.approach2,
                profile.approach1
            );
        }
    }

    #[test]
    fn from_grid_summaries_and_tie_breaks() {
        let intervals = vec![
            IntervalSpec::new(0.0, IntervalEnd::At(60.0)).unwrap(),
            IntervalSpec::new(20.0, IntervalEnd::At(80.0)).unwrap(),
            IntervalSpec::new(140.0, IntervalEnd::End).unwrap(),
        ];
        let mut grid = BTreeMap::new();
        grid.insert("s01".to_string(), vec![0.5, 0.9, 0.9]); // tie: earliest wins
        grid.insert("s02".to_string(), vec![0.8, 0.4, 0.6]);
        let p = TemporalProfile::from_grid(Measure::De, intervals, grid, vec![]).unwrap();
        assert_eq!(p.best_per_subject["s01"], 1);
        assert_eq!(p.best_per_subject["s02"], 0);
        assert_relative_eq!(p.mean_per_interval[0], 0.65);
        assert_relative_eq!(p.approach1, 0.75); // interval 2: (0.9 + 0.6)/2
        assert_eq!(p.approach1_interval, 2);
        assert_relative_eq!(p.approach2, 0.85); // (0.9 + 0.8)/2
        assert!(p.approach2 >= p.approach1);
    }

    #[test]
    fn incomplete_grid_is_rejected() {
        let intervals = vec![IntervalSpec::full()];
        let mut grid = BTreeMap::new();
        grid.insert("s01".to_string(), vec![0.5, 0.6]);
        assert!(TemporalProfile::from_grid(Measure::De, intervals, grid, vec![]).is_err());
    }

    #[test]
    fn grid_csv_round_trip_and_svg() {
        let intervals = IntervalSpec::canonical_grid();
        let mut grid = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in 0..15 {
            grid.insert(
                format!("s{s:02}"),
                (0..8).map(|_| rng.random_range(0.0..1.0)).collect(),
            );
        }
        let p = TemporalProfile::from_grid(Measure::Coherence, intervals, grid, vec![]).unwrap();
        let dir = tempfile::TempDir::new().unwrap();
        let csv_path = dir.path().join("grid.csv");
        export_interval_grid_csv(&p, &csv_path).unwrap();
        let (subjects, intervals, values) = import_interval_grid_csv(&csv_path).unwrap();
        assert_eq!(subjects.len(), 15);
        assert_eq!(intervals.len(), 8);
        for (s, accs) in p.per_subject.iter() {
            let row = subjects.iter().position(|x| x == s).unwrap();
            assert_eq!(&values[row], accs); // exact round trip
        }

        let svg_path = dir.path().join("grid.svg");
        export_interval_grid_svg(&p, &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert_eq!(svg.matches("<rect").count(), 15 * 8);
    }

    #[test]
    fn constant_grid_gives_uniform_heatmap() {
        let intervals = IntervalSpec::canonical_grid();
        let mut grid = BTreeMap::new();
        for s in 0..4 {
            grid.insert(format!("s{s:02}"), vec![0.75; 8]);
        }
        let p = TemporalProfile::from_grid(Measure::Plv, intervals, grid, vec![]).unwrap();
        let dir = tempfile::TempDir::new().unwrap();
        let svg_path = dir.path().join("flat.svg");
        export_interval_grid_svg(&p, &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        let fills: std::collections::BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<rect"))
            .map(|l| {
                let start = l.find("fill=\"").unwrap() + 6;
                let end = l[start..].find('"').unwrap() + start;
                &l[start..end]
            })
            .collect();
        assert_eq!(fills.len(), 1, "non-uniform fills: {fills:?}");
    }

    #[test]
    fn short_trial_is_excluded_with_warning() {
        // one clip has only 30 windows (60 s): it cannot contribute to
        // late intervals
        let mut table = ramped_table(10, 1, |_| 2.0);
        table = table.filter_rows(|_, k| k.trial != 3 || k.window < 30);
        let grid = vec![
            IntervalSpec::new(0.0, IntervalEnd::At(60.0)).unwrap(),
            IntervalSpec::new(140.0, IntervalEnd::End).unwrap(),
        ];
        let profile = temporal_scan(&table, 2.0, &grid, &EvalConfig::default()).unwrap();
        assert!(profile
            .warnings
            .iter()
            .any(|w| w.contains("t3") && w.contains("140-end")));
    }

    #[test]
    fn interval_parse_forms() {
        let grid = IntervalSpec::parse_list("canonical").unwrap();
        assert_eq!(grid.len(), 8);
        let custom = IntervalSpec::parse_list("0:60, 140:end").unwrap();
        assert_eq!(custom.len(), 2);
        assert_eq!(custom[1].end, IntervalEnd::End);
        assert!(IntervalSpec::parse_list("60:0").is_err());
        assert!(IntervalSpec::parse_list("banana").is_err());
    }
}
