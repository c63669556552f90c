//! Synthetic EEG generator with ground-truth, class-dependent,
//! optionally time-ramping connectivity.
//!
//! Each channel is a sum of band-limited carriers (white noise filtered
//! to each band, unit variance) plus white noise. The channel pairs of
//! the trial's class template share a common carrier in the coupling
//! band, mixed in with strength kappa(t); the mixture is renormalized to
//! unit power so coupling changes phase relationships, not variance.
//! An optional confusion profile additionally couples the template of a
//! randomly drawn *other* class early in the trial and fades out, so
//! early windows genuinely resemble a different emotion - the mechanism
//! behind rising interval accuracy.

use std::path::Path;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    load_manifest, write_recording, Band, BandName, BandScheme, DatasetManifest, EmotionLabel,
    TrialEntry,
};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Which channel pairs phase-couple for one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub pairs: Vec<(usize, usize)>,
}

impl ClassTemplate {
    /// Three disjoint templates over `n_channels` channels: per block of
    /// four channels, class 0 couples (4i, 4i+1), class 1 (4i+2, 4i+3),
    /// class 2 (4i, 4i+2).
    pub fn default_set(n_channels: usize) -> [ClassTemplate; 3] {
        let blocks = (n_channels / 4).max(1);
        let mk = |f: &dyn Fn(usize) -> (usize, usize)| ClassTemplate {
            pairs: (0..blocks)
                .map(f)
                .filter(|&(a, b)| a < n_channels && b < n_channels)
                .collect(),
        };
        [
            mk(&|i| (4 * i, 4 * i + 1)),
            mk(&|i| (4 * i + 2, 4 * i + 3)),
            mk(&|i| (4 * i, 4 * i + 2)),
        ]
    }
}

/// Coupling strength as a function of trial time: `lo` before `start_s`,
/// linear to `hi` at `end_s`, constant after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProfile {
    pub start_s: f64,
    pub end_s: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RampProfile {
    pub fn constant(kappa: f64) -> RampProfile {
        RampProfile {
            start_s: 0.0,
            end_s: 1.0,
            lo: kappa,
            hi: kappa,
        }
    }

    pub fn kappa(&self, t_s: f64) -> f64 {
        if t_s <= self.start_s || self.end_s <= self.start_s {
            self.lo
        } else if t_s >= self.end_s {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (t_s - self.start_s) / (self.end_s - self.start_s)
        }
    }
}

/// Early baseline state shared by every trial: the template of
/// `target_class` couples with strength `weight * (1 - t/fade_end_s)`
/// (clamped at 0) regardless of the trial's own class, then fades as the
/// trial's own coupling takes over. Early windows therefore resemble the
/// target class for everyone, which is what degrades whole-signal voting
/// relative to late intervals. `weight = 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionProfile {
    pub weight: f64,
    pub fade_end_s: f64,
    pub target_class: usize,
}

impl ConfusionProfile {
    pub fn none() -> ConfusionProfile {
        ConfusionProfile {
            weight: 0.0,
            fade_end_s: 1.0,
            target_class: 1,
        }
    }

    fn strength(&self, t_s: f64) -> f64 {
        if self.weight <= 0.0 || self.fade_end_s <= 0.0 {
            0.0
        } else {
            self.weight * (1.0 - t_s / self.fade_end_s).max(0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_sessions: usize,
    pub n_clips: usize,
    pub trial_len_s: f64,
    pub fs_hz: f64,
    pub n_channels: usize,
    pub templates: [ClassTemplate; 3],
    pub coupling: RampProfile,
    pub confusion: ConfusionProfile,
    pub coupling_band: BandName,
    pub band_scheme: BandScheme,
    /// White-noise amplitude added to every sample.
    pub noise_level: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Desk scale: 3 subjects x 1 session x 15 clips x 240 s x 200 Hz x
    /// 16 channels, constant coupling.
    pub fn desk_default(seed: u64) -> SynthConfig {
        SynthConfig {
            n_subjects: 3,
            n_sessions: 1,
            n_clips: 15,
            trial_len_s: 240.0,
            fs_hz: 200.0,
            n_channels: 16,
            templates: ClassTemplate::default_set(16),
            coupling: RampProfile::constant(0.8),
            confusion: ConfusionProfile::none(),
            coupling_band: BandName::Gamma,
            band_scheme: BandScheme::Preprocessing,
            noise_level: 0.3,
            seed,
        }
    }

    /// Desk scale with coupling ramping up over the trial while the
    /// shared baseline state fades out.
    pub fn ramped(seed: u64) -> SynthConfig {
        SynthConfig {
            coupling: RampProfile {
                start_s: 20.0,
                end_s: 160.0,
                lo: 0.03,
                hi: 0.95,
            },
            confusion: ConfusionProfile {
                weight: 0.9,
                fade_end_s: 260.0,
                target_class: 1,
            },
            ..Self::desk_default(seed)
        }
    }

    /// Desk scale with zero coupling: all classes statistically identical.
    pub fn null(seed: u64) -> SynthConfig {
        SynthConfig {
            coupling: RampProfile::constant(0.0),
            confusion: ConfusionProfile::none(),
            ..Self::desk_default(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.n_sessions == 0 || self.n_clips == 0 {
            return Err(Error::InvalidArgument("all counts must be positive".into()));
        }
        if self.n_channels < 2 {
            return Err(Error::InvalidArgument(format!(
                "need >= 2 channels, got {}",
                self.n_channels
            )));
        }
        if self.fs_hz <= 0.0 || self.trial_len_s < 2.0 {
            return Err(Error::InvalidArgument(
                "need a positive rate and trials of at least 2 s".into(),
            ));
        }
        for (c, t) in self.templates.iter().enumerate() {
            let mut seen = std::collections::BTreeSet::new();
            for &(a, b) in &t.pairs {
                if a >= b || b >= self.n_channels {
                    return Err(Error::InvalidArgument(format!(
                        "class {c}: bad pair ({a}, {b}) for {} channels",
                        self.n_channels
                    )));
                }
                if !seen.insert(a) || !seen.insert(b) {
                    return Err(Error::InvalidArgument(format!(
                        "class {c}: channel reused within the template"
                    )));
                }
            }
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if self.templates[i] == self.templates[j] {
                    return Err(Error::InvalidArgument(format!(
                        "templates {i} and {j} are identical"
                    )));
                }
            }
        }
        let r = &self.coupling;
        if !(0.0..=1.0).contains(&r.lo) || !(0.0..=1.0).contains(&r.hi) || r.lo > r.hi {
            return Err(Error::InvalidArgument(format!(
                "coupling must satisfy 0 <= lo <= hi <= 1, got ({}, {})",
                r.lo, r.hi
            )));
        }
        if self.confusion.weight < 0.0 || self.confusion.weight > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "confusion weight {} outside [0, 1]",
                self.confusion.weight
            )));
        }
        if self.confusion.target_class >= 3 {
            return Err(Error::InvalidArgument(format!(
                "confusion target class {} outside 0..3",
                self.confusion.target_class
            )));
        }
        Ok(())
    }
}

/// Relative band amplitudes, delta..gamma (softly 1/f-shaped).
const BAND_AMPLITUDES: [f64; 5] = [1.0, 0.85, 0.7, 0.6, 0.55];

/// Unit-variance band-limited carrier: white noise filtered to the band.
fn band_carrier(
    rng: &mut ChaCha8Rng,
    n: usize,
    sos: &[crate::dsp::Biquad],
    padlen: usize,
) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut filtered = crate::dsp::filtfilt(sos, &white, padlen);
    let mean = filtered.iter().sum::<f64>() / n as f64;
    let var = filtered.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt().max(1e-12);
    for v in filtered.iter_mut() {
        *v = (*v - mean) / sd;
    }
    filtered
}

/// Generate one trial's samples.
fn generate_trial(cfg: &SynthConfig, class: usize, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    let n = (cfg.trial_len_s * cfg.fs_hz).round() as usize;
    let n_ch = cfg.n_channels;
    let bands: Vec<Band> = BandName::ALL
        .iter()
        .map(|&b| Band::canonical(b, cfg.band_scheme))
        .collect();
    let coupling_band_idx = BandName::ALL
        .iter()
        .position(|&b| b == cfg.coupling_band)
        .expect("coupling band exists");
    // carriers are synthesized on slightly inset edges with a steeper
    // filter than the analysis band-pass, so adjacent bands do not bleed
    // into each other's analysis passbands
    let designs: Vec<(Vec<crate::dsp::Biquad>, usize)> = bands
        .iter()
        .map(|b| {
            let inset = 0.12 * (b.hi_hz - b.lo_hz);
            let sos =
                crate::dsp::butter_bandpass(8, b.lo_hz + inset, b.hi_hz - inset, cfg.fs_hz)?;
            Ok((sos, crate::dsp::transient_padlen(cfg.fs_hz, b.lo_hz)))
        })
        .collect::<Result<_>>()?;

    let confusion_class = cfg.confusion.target_class;

    // channel -> shared-carrier slot per template
    let pair_slot: Vec<Vec<Option<usize>>> = cfg
        .templates
        .iter()
        .map(|t| {
            let mut slots = vec![None; n_ch];
            for (slot, &(a, b)) in t.pairs.iter().enumerate() {
                slots[a] = Some(slot);
                slots[b] = Some(slot);
            }
            slots
        })
        .collect();

    // shared coupling-band carriers, one per (template, pair), drawn in
    // a fixed order so generation is reproducible
    let (g_sos, g_pad) = &designs[coupling_band_idx];
    let shared: Vec<Vec<Vec<f64>>> = cfg
        .templates
        .iter()
        .map(|t| {
            (0..t.pairs.len())
                .map(|_| band_carrier(rng, n, g_sos, *g_pad))
                .collect()
        })
        .collect();

    // per-sample mixing weights for true-class and confusion coupling
    let kappa_true: Vec<f64> = (0..n)
        .map(|s| cfg.coupling.kappa(s as f64 / cfg.fs_hz))
        .collect();
    let kappa_conf: Vec<f64> = (0..n)
        .map(|s| cfg.confusion.strength(s as f64 / cfg.fs_hz))
        .collect();

    let mut out = Array2::zeros((n_ch, n));
    for ch in 0..n_ch {
        let mut acc = vec![0.0f64; n];
        for (b, amp) in BAND_AMPLITUDES.iter().enumerate() {
            let (sos, pad) = &designs[b];
            let own = band_carrier(rng, n, sos, *pad);
            if b == coupling_band_idx {
                let true_slot = pair_slot[class][ch];
                let conf_slot = pair_slot[confusion_class][ch];
                let merged = confusion_class == class;
                for s in 0..n {
                    // a trial of the baseline class couples one carrier
                    // with the merged weight; others mix two carriers
                    let mut w_true = if true_slot.is_some() { kappa_true[s] } else { 0.0 };
                    let mut w_conf = if conf_slot.is_some() { kappa_conf[s] } else { 0.0 };
                    if merged {
                        w_true = (w_true + w_conf).min(1.0);
                        w_conf = 0.0;
                    }
                    let w_own = (1.0 - (w_true + w_conf)).max(0.0);
                    let mut v = w_own * own[s];
                    if let Some(slot) = true_slot {
                        if w_true > 0.0 {
                            v += w_true * shared[class][slot][s];
                        }
                    }
                    if let Some(slot) = conf_slot {
                        if w_conf > 0.0 {
                            v += w_conf * shared[confusion_class][slot][s];
                        }
                    }
                    let norm =
                        (w_own * w_own + w_true * w_true + w_conf * w_conf).sqrt().max(1e-12);
                    acc[s] += amp * v / norm;
                }
            } else {
                for s in 0..n {
                    acc[s] += amp * own[s];
                }
            }
        }
        for s in 0..n {
            out[(ch, s)] = acc[s] + cfg.noise_level * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Generate the dataset under `out_dir` (manifest.json + one raw trial
/// file each) and return the validated manifest. Bit-identical for a
/// given config.
pub fn generate(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let n_samples = (cfg.trial_len_s * cfg.fs_hz).round() as usize;
    let channels: Vec<String> = (0..cfg.n_channels).map(|i| format!("ch{i:02}")).collect();
    let mut trials = Vec::new();
    for subj in 0..cfg.n_subjects {
        let subject = format!("s{:02}", subj + 1);
        for session in 1..=cfg.n_sessions as u32 {
            for clip in 1..=cfg.n_clips as u32 {
                let class = ((clip - 1) % 3) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.seed,
                    "trial",
                    &[subj as u64, session as u64, clip as u64],
                ));
                let samples = generate_trial(cfg, class, &mut rng)?;
                let file = format!("{subject}_se{session}_t{clip:02}.f32");
                write_recording(&out_dir.join(&file), &samples)?;
                trials.push(TrialEntry {
                    subject: subject.clone(),
                    session,
                    trial: clip,
                    label: EmotionLabel::from_index(class).unwrap().name().to_string(),
                    file,
                    n_samples,
                });
            }
        }
    }
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        fs_hz: cfg.fs_hz,
        channels,
        trials,
    };
    let path = crate::data_model::write_manifest(&manifest)?;
    load_manifest(&path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{load_recording, TrialKey};
    use crate::features::{connectivity_matrix, Measure};
    use crate::preprocess::{bandpass, epoch};
    use crate::selection::fisher_scores;
    use ndarray::Axis;
    use tempfile::TempDir;

    fn tiny_config(seed: u64) -> SynthConfig {
        SynthConfig {
            n_subjects: 1,
            n_sessions: 1,
            n_clips: 3,
            trial_len_s: 20.0,
            fs_hz: 200.0,
            n_channels: 8,
            templates: ClassTemplate::default_set(8),
            coupling: RampProfile::constant(1.0),
            confusion: ConfusionProfile::none(),
            coupling_band: BandName::Gamma,
            band_scheme: BandScheme::Preprocessing,
            noise_level: 0.0,
            seed,
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = tiny_config(1);
        cfg.templates[1] = cfg.templates[0].clone();
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config(1);
        cfg.coupling = RampProfile {
            start_s: 0.0,
            end_s: 1.0,
            lo: 0.9,
            hi: 0.1,
        };
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config(1);
        cfg.templates[0].pairs = vec![(0, 9)];
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config(1);
        cfg.templates[0].pairs = vec![(0, 1), (1, 2)];
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config(1);
        cfg.n_clips = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = tiny_config(42);
        let d1 = TempDir::new().unwrap();
        let d2 = TempDir::new().unwrap();
        let m1 = generate(&cfg, d1.path()).unwrap();
        let m2 = generate(&cfg, d2.path()).unwrap();
        assert_eq!(m1.trials.len(), m2.trials.len());
        for (a, b) in m1.trials.iter().zip(&m2.trials) {
            let bytes_a = std::fs::read(d1.path().join(&a.file)).unwrap();
            let bytes_b = std::fs::read(d2.path().join(&b.file)).unwrap();
            assert_eq!(bytes_a, bytes_b, "trial {} differs across runs", a.file);
        }
        // different seed differs
        let d3 = TempDir::new().unwrap();
        let m3 = generate(&tiny_config(43), d3.path()).unwrap();
        let bytes_a = std::fs::read(d1.path().join(&m1.trials[0].file)).unwrap();
        let bytes_c = std::fs::read(d3.path().join(&m3.trials[0].file)).unwrap();
        assert_ne!(bytes_a, bytes_c);
    }

    #[test]
    fn full_coupling_zero_noise_gives_plv_near_one() {
        let cfg = tiny_config(7);
        let dir = TempDir::new().unwrap();
        let manifest = generate(&cfg, dir.path()).unwrap();
        // clip 1 is class 0: template pairs (0,1), (4,5)
        let rec = load_recording(
            &manifest,
            &TrialKey {
                subject: "s01".into(),
                session: 1,
                trial: 1,
            },
        )
        .unwrap();
        let gamma = Band::canonical(BandName::Gamma, BandScheme::Preprocessing);
        let filtered = bandpass(&rec, gamma.lo_hz, gamma.hi_hz).unwrap();
        let ep = epoch(&filtered, 2.0, gamma).unwrap();
        let window = ep.windows.index_axis(Axis(0), 3);
        let m = connectivity_matrix(window, Measure::Plv, &gamma, cfg.fs_hz).unwrap();
        assert!(
            m.values[(0, 1)] > 0.95,
            "coupled pair PLV {}",
            m.values[(0, 1)]
        );
        assert!(
            m.values[(0, 3)] < 0.6,
            "uncoupled pair PLV {} suspiciously high",
            m.values[(0, 3)]
        );
    }

    #[test]
    fn fisher_ranking_recovers_planted_pairs() {
        // strong coupling, zero noise: the planted pairs must dominate
        // the Fisher ranking of gamma PLV features
        let cfg = SynthConfig {
            n_clips: 6,
            trial_len_s: 30.0,
            coupling: RampProfile::constant(0.9),
            ..tiny_config(11)
        };
        let dir = TempDir::new().unwrap();
        let manifest = generate(&cfg, dir.path()).unwrap();
        let gamma = Band::canonical(BandName::Gamma, BandScheme::Preprocessing);

        let n_ch = cfg.n_channels;
        let pair_index = |a: usize, b: usize| {
            // row-major upper-triangle offset
            let mut idx = 0usize;
            for i in 0..n_ch {
                for j in i + 1..n_ch {
                    if (i, j) == (a, b) {
                        return idx;
                    }
                    idx += 1;
                }
            }
            unreachable!()
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        for entry in &manifest.trials {
            let rec = load_recording(&manifest, &entry.key()).unwrap();
            let filtered = bandpass(&rec, gamma.lo_hz, gamma.hi_hz).unwrap();
            let ep = epoch(&filtered, 2.0, gamma).unwrap();
            for w in 0..ep.n_windows() {
                let m = connectivity_matrix(
                    ep.windows.index_axis(Axis(0), w),
                    Measure::Plv,
                    &gamma,
                    cfg.fs_hz,
                )
                .unwrap();
                rows.push(crate::features::vectorize_upper(&m));
                labels.push(EmotionLabel::parse(&entry.label).unwrap().index());
            }
        }
        let d = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let x = Array2::from_shape_vec((labels.len(), d), flat).unwrap();
        let ranking = fisher_scores(x.view(), &labels).unwrap();

        let planted: Vec<usize> = cfg
            .templates
            .iter()
            .flat_map(|t| t.pairs.iter().map(|&(a, b)| pair_index(a, b)))
            .collect();
        let top: std::collections::BTreeSet<usize> = ranking
            .order
            .iter()
            .take(2 * planted.len())
            .copied()
            .collect();
        let hits = planted.iter().filter(|p| top.contains(p)).count();
        let recall = hits as f64 / planted.len() as f64;
        assert!(
            recall >= 0.8,
            "only {hits}/{} planted pairs in the top {} ranks",
            planted.len(),
            2 * planted.len()
        );
    }

    #[test]
    fn null_config_shows_no_class_structure_in_planted_pairs() {
        let cfg = SynthConfig {
            coupling: RampProfile::constant(0.0),
            n_clips: 6,
            trial_len_s: 30.0,
            ..tiny_config(19)
        };
        let dir = TempDir::new().unwrap();
        let manifest = generate(&cfg, dir.path()).unwrap();
        let gamma = Band::canonical(BandName::Gamma, BandScheme::Preprocessing);
        // mean PLV of class-0 planted pairs, split by trial class
        let mut by_class = vec![Vec::new(); 3];
        for entry in &manifest.trials {
            let rec = load_recording(&manifest, &entry.key()).unwrap();
            let filtered = bandpass(&rec, gamma.lo_hz, gamma.hi_hz).unwrap();
            let ep = epoch(&filtered, 2.0, gamma).unwrap();
            let class = EmotionLabel::parse(&entry.label).unwrap().index();
            for w in 0..ep.n_windows() {
                let m = connectivity_matrix(
                    ep.windows.index_axis(Axis(0), w),
                    Measure::Plv,
                    &gamma,
                    cfg.fs_hz,
                )
                .unwrap();
                for &(a, b) in &cfg.templates[0].pairs {
                    by_class[class].push(m.values[(a, b)]);
                }
            }
        }
        let means: Vec<f64> = by_class
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        for c in 1..3 {
            assert!(
                (means[c] - means[0]).abs() < 0.1,
                "class {c} mean PLV {} vs class 0 {}",
                means[c],
                means[0]
            );
        }
    }

    #[test]
    fn ramp_profile_is_monotone() {
        let r = RampProfile {
            start_s: 30.0,
            end_s: 170.0,
            lo: 0.05,
            hi: 0.95,
        };
        let mut prev = -1.0;
        for i in 0..=240 {
            let k = r.kappa(i as f64);
            assert!(k >= prev, "kappa not monotone at t={i}");
            assert!((0.0..=1.0).contains(&k));
            prev = k;
        }
        assert_eq!(r.kappa(0.0), 0.05);
        assert_eq!(r.kappa(240.0), 0.95);
    }

    #[test]
    fn default_templates_are_valid_and_distinct() {
        for n in [8usize, 16, 62] {
            let set = ClassTemplate::default_set(n);
            let cfg = SynthConfig {
                n_channels: n,
                templates: set,
                ..tiny_config(1)
            };
            cfg.validate().unwrap();
        }
    }
}
