//! Core domain types, dataset directory schema, ingestion and validation.
//!
//! A dataset lives in one directory: a `manifest.json` describing sampling
//! rate, channel names and per-trial entries, plus one raw data file per
//! trial (little-endian f32, channel-major, no header). A CSV import path
//! (rows = samples, columns = channels, header row of channel names) is
//! also accepted for trial data.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-class emotion coding: negative = 0, neutral = 1, positive = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Negative,
    Neutral,
    Positive,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 3] = [
        EmotionLabel::Negative,
        EmotionLabel::Neutral,
        EmotionLabel::Positive,
    ];

    pub fn index(self) -> usize {
        match self {
            EmotionLabel::Negative => 0,
            EmotionLabel::Neutral => 1,
            EmotionLabel::Positive => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<EmotionLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn parse(s: &str) -> Option<EmotionLabel> {
        match s {
            "negative" => Some(EmotionLabel::Negative),
            "neutral" => Some(EmotionLabel::Neutral),
            "positive" => Some(EmotionLabel::Positive),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Negative => "negative",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The five EEG bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl BandName {
    pub const ALL: [BandName; 5] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Beta,
        BandName::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Option<BandName> {
        BandName::ALL.iter().copied().find(|b| b.name() == s)
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which published set of band edges to use. The two tables disagree on
/// the upper edges of theta/alpha/beta; `Preprocessing` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandScheme {
    /// delta 1-4, theta 4-8, alpha 8-14, beta 14-31, gamma 31-50
    #[default]
    Preprocessing,
    /// delta 1-3, theta 4-7, alpha 8-13, beta 14-30, gamma 31-50
    RelatedWork,
}

/// A frequency band with explicit edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(name: BandName, lo_hz: f64, hi_hz: f64) -> Result<Band> {
        if !(lo_hz > 0.0 && lo_hz < hi_hz) {
            return Err(Error::InvalidArgument(format!(
                "band edges must satisfy 0 < lo < hi, got ({lo_hz}, {hi_hz})"
            )));
        }
        Ok(Band { name, lo_hz, hi_hz })
    }

    /// Canonical edges under the given scheme.
    pub fn canonical(name: BandName, scheme: BandScheme) -> Band {
        let (lo, hi) = match (scheme, name) {
            (BandScheme::Preprocessing, BandName::Delta) => (1.0, 4.0),
            (BandScheme::Preprocessing, BandName::Theta) => (4.0, 8.0),
            (BandScheme::Preprocessing, BandName::Alpha) => (8.0, 14.0),
            (BandScheme::Preprocessing, BandName::Beta) => (14.0, 31.0),
            (BandScheme::Preprocessing, BandName::Gamma) => (31.0, 50.0),
            (BandScheme::RelatedWork, BandName::Delta) => (1.0, 3.0),
            (BandScheme::RelatedWork, BandName::Theta) => (4.0, 7.0),
            (BandScheme::RelatedWork, BandName::Alpha) => (8.0, 13.0),
            (BandScheme::RelatedWork, BandName::Beta) => (14.0, 30.0),
            (BandScheme::RelatedWork, BandName::Gamma) => (31.0, 50.0),
        };
        Band {
            name,
            lo_hz: lo,
            hi_hz: hi,
        }
    }
}

/// Identifies one trial: a (subject, session, clip) triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialKey {
    pub subject: String,
    pub session: u32,
    pub trial: u32,
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/s{}/t{}", self.subject, self.session, self.trial)
    }
}

/// One trial's multichannel time series.
#[derive(Debug, Clone)]
pub struct Recording {
    pub key: TrialKey,
    pub label: EmotionLabel,
    pub fs_hz: f64,
    pub channels: Vec<String>,
    /// [n_channels x n_samples], microvolts.
    pub samples: Array2<f64>,
}

impl Recording {
    pub fn new(
        key: TrialKey,
        label: EmotionLabel,
        fs_hz: f64,
        channels: Vec<String>,
        samples: Array2<f64>,
    ) -> Result<Recording> {
        if fs_hz <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {fs_hz}"
            )));
        }
        if channels.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 channels, got {}",
                channels.len()
            )));
        }
        if channels.len() != samples.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} channel names but {} sample rows",
                channels.len(),
                samples.nrows()
            )));
        }
        let unique: BTreeSet<&String> = channels.iter().collect();
        if unique.len() != channels.len() {
            return Err(Error::InvalidArgument("duplicate channel names".into()));
        }
        let min_len = (fs_hz * 2.0).round() as usize;
        if samples.ncols() < min_len {
            return Err(Error::InvalidArgument(format!(
                "trial has {} samples, need at least one 2 s window ({min_len})",
                samples.ncols()
            )));
        }
        Ok(Recording {
            key,
            label,
            fs_hz,
            channels,
            samples,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs_hz
    }
}

/// One row of the manifest's trial table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialEntry {
    pub subject: String,
    pub session: u32,
    pub trial: u32,
    pub label: String,
    pub file: String,
    pub n_samples: usize,
}

impl TrialEntry {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            subject: self.subject.clone(),
            session: self.session,
            trial: self.trial,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestFile {
    fs_hz: f64,
    channels: Vec<String>,
    trials: Vec<TrialEntry>,
}

/// Validated view of a dataset directory.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub fs_hz: f64,
    pub channels: Vec<String>,
    pub trials: Vec<TrialEntry>,
}

impl DatasetManifest {
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self
            .trials
            .iter()
            .map(|t| t.subject.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        s.sort();
        s
    }

    pub fn entry(&self, key: &TrialKey) -> Option<&TrialEntry> {
        self.trials.iter().find(|t| &t.key() == key)
    }
}

/// Load and validate `manifest.json`; every invariant is checked here so
/// downstream code can trust the manifest.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: ManifestFile = serde_json::from_str(&text)
        .map_err(|e| Error::manifest(path, format!("parse failure: {e}")))?;
    if parsed.fs_hz <= 0.0 {
        return Err(Error::manifest(
            path,
            format!("fs_hz must be positive, got {}", parsed.fs_hz),
        ));
    }
    if parsed.channels.len() < 2 {
        return Err(Error::manifest(path, "need at least 2 channels"));
    }
    let unique: BTreeSet<&String> = parsed.channels.iter().collect();
    if unique.len() != parsed.channels.len() {
        return Err(Error::manifest(path, "duplicate channel names"));
    }
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut seen: BTreeSet<(String, u32, u32)> = BTreeSet::new();
    for (i, t) in parsed.trials.iter().enumerate() {
        if EmotionLabel::parse(&t.label).is_none() {
            return Err(Error::manifest(
                path,
                format!("trial #{i}: unknown label string {:?}", t.label),
            ));
        }
        if !seen.insert((t.subject.clone(), t.session, t.trial)) {
            return Err(Error::manifest(
                path,
                format!(
                    "duplicate trial key ({}, {}, {})",
                    t.subject, t.session, t.trial
                ),
            ));
        }
        let data = root.join(&t.file);
        if !data.is_file() {
            return Err(Error::manifest(
                path,
                format!("trial #{i}: missing data file {:?}", t.file),
            ));
        }
    }
    Ok(DatasetManifest {
        root,
        fs_hz: parsed.fs_hz,
        channels: parsed.channels,
        trials: parsed.trials,
    })
}

/// Write a manifest back to `root/manifest.json`.
pub fn write_manifest(manifest: &DatasetManifest) -> Result<PathBuf> {
    let path = manifest.root.join("manifest.json");
    let file = ManifestFile {
        fs_hz: manifest.fs_hz,
        channels: manifest.channels.clone(),
        trials: manifest.trials.clone(),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::manifest(&path, format!("serialize failure: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Load one trial's samples, bit-exactly, from the manifest's binary layout
/// (or from CSV when the file name ends in `.csv`).
pub fn load_recording(manifest: &DatasetManifest, key: &TrialKey) -> Result<Recording> {
    let entry = manifest
        .entry(key)
        .ok_or_else(|| Error::InvalidArgument(format!("trial {key} not in manifest")))?;
    let path = manifest.root.join(&entry.file);
    let n_ch = manifest.channels.len();
    let samples = if entry.file.ends_with(".csv") {
        read_trial_csv(&path, &manifest.channels, entry.n_samples)?
    } else {
        read_trial_f32(&path, n_ch, entry.n_samples)?
    };
    Recording::new(
        entry.key(),
        EmotionLabel::parse(&entry.label).expect("label validated at manifest load"),
        manifest.fs_hz,
        manifest.channels.clone(),
        samples,
    )
}

fn read_trial_f32(path: &Path, n_channels: usize, n_samples: usize) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let expected = n_channels * n_samples * 4;
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::with_capacity(expected);
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < expected {
        return Err(Error::data(
            path,
            format!(
                "truncated payload: expected {expected} bytes ({n_channels} ch x {n_samples}), got {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::data(
            path,
            format!(
                "shape mismatch: file holds {} bytes but manifest declares {expected}",
                bytes.len()
            ),
        ));
    }
    let mut out = Array2::zeros((n_channels, n_samples));
    for ch in 0..n_channels {
        for s in 0..n_samples {
            let off = (ch * n_samples + s) * 4;
            let v = f32::from_le_bytes([
                bytes[off],
                bytes[off + 1],
                bytes[off + 2],
                bytes[off + 3],
            ]);
            out[(ch, s)] = v as f64;
        }
    }
    Ok(out)
}

fn read_trial_csv(path: &Path, channels: &[String], n_samples: usize) -> Result<Array2<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| {
        Error::data(path, format!("csv open failure: {e}"))
    })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(path, format!("csv header failure: {e}")))?
        .clone();
    if headers.len() != channels.len()
        || headers.iter().zip(channels).any(|(h, c)| h != c)
    {
        return Err(Error::data(
            path,
            format!(
                "csv header does not match manifest channels: {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        ));
    }
    let mut out = Array2::zeros((channels.len(), n_samples));
    let mut row_idx = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::data(path, format!("csv row failure: {e}")))?;
        if row_idx >= n_samples {
            return Err(Error::data(
                path,
                format!("csv holds more than the declared {n_samples} sample rows"),
            ));
        }
        for (ch, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::data(path, format!("row {row_idx}: bad number {field:?}"))
            })?;
            out[(ch, row_idx)] = v;
        }
        row_idx += 1;
    }
    if row_idx != n_samples {
        return Err(Error::data(
            path,
            format!("truncated payload: {row_idx} csv rows, manifest declares {n_samples}"),
        ));
    }
    Ok(out)
}

/// Write a recording's samples in the binary trial layout (little-endian
/// f32, channel-major). Values are narrowed to f32.
pub fn write_recording(path: &Path, samples: &Array2<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ch in 0..samples.nrows() {
        for s in 0..samples.ncols() {
            w.write_all(&(samples[(ch, s)] as f32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
