//! Per-window feature extraction: differential entropy (local) and three
//! functional-connectivity measures, plus symmetric-matrix vectorization
//! and the on-disk feature-table format.
//!
//! Estimator choices that the underlying definitions leave open:
//! - coherence uses Welch averaging (8 Hann segments, 50% overlap) inside
//!   each window, since a single-segment coherence estimate is identically
//!   one; the per-pair band value is the arithmetic mean of the magnitude
//!   coherence over in-band grid frequencies;
//! - PLV discards 5% of samples at each end before averaging, to suppress
//!   Hilbert edge artifacts;
//! - moments are population (1/N) throughout;
//! - values a hair outside their theoretical range (< 1e-9 excess) are
//!   clamped instead of erroring.

use std::fmt;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data_model::{Band, EmotionLabel, TrialKey};
use crate::dsp;
use crate::error::{Error, Result};
use crate::preprocess::BandedEpochs;

/// Welch defaults for the in-window coherence estimator.
pub const WELCH_TARGET_SEGMENTS: usize = 8;
pub const WELCH_OVERLAP: f64 = 0.5;
/// Fraction trimmed from each end of the analytic phase difference.
pub const PLV_EDGE_TRIM: f64 = 0.05;

/// Numerical tolerance for clamping range excursions.
const RANGE_SLACK: f64 = 1e-9;

/// The four per-window feature types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    De,
    Pearson,
    Coherence,
    Plv,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::De,
        Measure::Pearson,
        Measure::Coherence,
        Measure::Plv,
    ];

    pub const CONNECTIVITY: [Measure; 3] = [Measure::Pearson, Measure::Coherence, Measure::Plv];

    pub fn name(self) -> &'static str {
        match self {
            Measure::De => "de",
            Measure::Pearson => "pearson",
            Measure::Coherence => "coherence",
            Measure::Plv => "plv",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        Measure::ALL.iter().copied().find(|m| m.name() == s)
    }

    pub fn is_connectivity(self) -> bool {
        self != Measure::De
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn clamp_range(v: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(
        v > lo - RANGE_SLACK * 1e3 && v < hi + RANGE_SLACK * 1e3,
        "value {v} far outside [{lo}, {hi}]"
    );
    v.clamp(lo, hi)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (1/N).
fn population_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Linear correlation of two equal-length series, population moments,
/// clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs two equal-length series of >= 2 samples, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    let sx = (vx / n).sqrt();
    let sy = (vy / n).sqrt();
    if sx == 0.0 || sy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in pearson input".into(),
        ));
    }
    Ok(clamp_range(cov / n / (sx * sy), -1.0, 1.0))
}

/// Welch segment length giving `target_segments` segments at `overlap`;
/// rounded down to an even number.
pub fn welch_segment_len(n: usize, target_segments: usize, overlap: f64) -> usize {
    let denom = 1.0 + (target_segments.max(1) - 1) as f64 * (1.0 - overlap);
    let mut len = (n as f64 / denom).floor() as usize;
    len -= len % 2;
    len.max(4)
}

/// One-sided cross-spectral density over the grid k * fs / seg_len.
#[derive(Debug, Clone)]
pub struct CrossSpectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub n_segments: usize,
}

/// Hann-windowed per-segment spectra (one-sided bins 0..=seg_len/2).
fn segment_spectra(x: &[f64], seg_len: usize, hop: usize) -> Vec<Vec<Complex64>> {
    let window = dsp::hann(seg_len);
    let n_segs = (x.len() - seg_len) / hop + 1;
    let half = seg_len / 2;
    let mut out = Vec::with_capacity(n_segs);
    for s in 0..n_segs {
        let start = s * hop;
        let mut buf: Vec<Complex64> = (0..seg_len)
            .map(|i| Complex64::new(x[start + i] * window[i], 0.0))
            .collect();
        dsp::fft_in_place(&mut buf);
        buf.truncate(half + 1);
        out.push(buf);
    }
    out
}

fn averaged_conjugate_products(
    sx: &[Vec<Complex64>],
    sy: &[Vec<Complex64>],
) -> Vec<Complex64> {
    let half = sx[0].len();
    let mut acc = vec![Complex64::new(0.0, 0.0); half];
    for (segx, segy) in sx.iter().zip(sy) {
        for k in 0..half {
            acc[k] += segx[k] * segy[k].conj();
        }
    }
    let n = sx.len() as f64;
    for v in acc.iter_mut() {
        *v = *v / n;
    }
    acc
}

/// Welch cross-spectral density estimate: Hann-windowed segments,
/// per-segment FFT, averaged conjugate products, one-sided PSD scaling.
pub fn cross_spectrum(
    x: &[f64],
    y: &[f64],
    fs: f64,
    seg_len: usize,
    overlap: f64,
) -> Result<CrossSpectrum> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if seg_len < 4 || seg_len > x.len() {
        return Err(Error::InvalidArgument(format!(
            "segment length {seg_len} outside [4, {}]",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} outside [0, 1)"
        )));
    }
    let hop = ((seg_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let n_segs = (x.len() - seg_len) / hop + 1;
    if n_segs < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {n_segs} segment(s); need at least 2 (single-segment coherence is identically 1)"
        )));
    }
    let sx = segment_spectra(x, seg_len, hop);
    let sy = segment_spectra(y, seg_len, hop);
    let mut values = averaged_conjugate_products(&sx, &sy);
    let window = dsp::hann(seg_len);
    let u: f64 = window.iter().map(|w| w * w).sum();
    let half = seg_len / 2;
    for (k, v) in values.iter_mut().enumerate() {
        let one_sided = if k == 0 || (seg_len % 2 == 0 && k == half) {
            1.0
        } else {
            2.0
        };
        *v = *v * (one_sided / (u * fs));
    }
    let freqs = (0..=half).map(|k| k as f64 * fs / seg_len as f64).collect();
    Ok(CrossSpectrum {
        freqs,
        values,
        n_segments: n_segs,
    })
}

/// Magnitude coherence averaged over grid frequencies inside the band.
pub fn coherence_band(x: &[f64], y: &[f64], fs: f64, band: &Band) -> Result<f64> {
    let seg_len = welch_segment_len(x.len(), WELCH_TARGET_SEGMENTS, WELCH_OVERLAP);
    let hop = ((seg_len as f64 * (1.0 - WELCH_OVERLAP)).round() as usize).max(1);
    if seg_len > x.len() || (x.len() - seg_len) / hop + 1 < 2 {
        return Err(Error::InvalidArgument(format!(
            "window of {} samples too short for a 2-segment Welch estimate",
            x.len()
        )));
    }
    let sx = segment_spectra(x, seg_len, hop);
    let sy = segment_spectra(y, seg_len, hop);
    let sxy = averaged_conjugate_products(&sx, &sy);
    let sxx = averaged_conjugate_products(&sx, &sx);
    let syy = averaged_conjugate_products(&sy, &sy);
    coherence_band_from_spectra(&sxy, &sxx, &syy, fs, seg_len, band)
}

fn coherence_band_from_spectra(
    sxy: &[Complex64],
    sxx: &[Complex64],
    syy: &[Complex64],
    fs: f64,
    seg_len: usize,
    band: &Band,
) -> Result<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in 0..sxy.len() {
        let f = k as f64 * fs / seg_len as f64;
        if f < band.lo_hz || f > band.hi_hz {
            continue;
        }
        let pxx = sxx[k].re;
        let pyy = syy[k].re;
        if pxx <= 0.0 || pyy <= 0.0 {
            return Err(Error::Degenerate(format!(
                "zero auto-spectrum at {f:.2} Hz"
            )));
        }
        acc += sxy[k].norm() / (pxx * pyy).sqrt();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "band [{}, {}] Hz contains no grid frequency (spacing {})",
            band.lo_hz,
            band.hi_hz,
            fs / seg_len as f64
        )));
    }
    Ok(clamp_range(acc / count as f64, 0.0, 1.0))
}

/// Analytic signal x + jH(x) by the frequency-domain method: zero the
/// negative-frequency bins, double the positive ones, keep DC and Nyquist
/// at unit gain.
pub fn analytic_signal(x: &[f64]) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "analytic signal needs >= 4 samples, got {n}"
        )));
    }
    let mut buf = dsp::fft_real(x);
    if n % 2 == 0 {
        for v in buf.iter_mut().take(n / 2).skip(1) {
            *v = *v * 2.0;
        }
        for v in buf.iter_mut().skip(n / 2 + 1) {
            *v = Complex64::new(0.0, 0.0);
        }
    } else {
        for v in buf.iter_mut().take(n / 2 + 1).skip(1) {
            *v = *v * 2.0;
        }
        for v in buf.iter_mut().skip(n / 2 + 1) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    dsp::ifft_in_place(&mut buf);
    Ok(buf)
}

/// Phase-locking value of two band-limited signals: the magnitude of the
/// time-averaged unit phasor of their instantaneous phase difference,
/// with `edge_trim` of the samples discarded at each end.
pub fn plv(x1: &[f64], x2: &[f64], edge_trim: f64) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch {} vs {}",
            x1.len(),
            x2.len()
        )));
    }
    if !(0.0..0.5).contains(&edge_trim) {
        return Err(Error::InvalidArgument(format!(
            "edge trim {edge_trim} outside [0, 0.5)"
        )));
    }
    if x1.iter().all(|&v| v == 0.0) || x2.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(
            "all-zero input: phase undefined".into(),
        ));
    }
    let z1 = analytic_signal(x1)?;
    let z2 = analytic_signal(x2)?;
    plv_from_analytic(&z1, &z2, edge_trim)
}

pub(crate) fn plv_from_analytic(
    z1: &[Complex64],
    z2: &[Complex64],
    edge_trim: f64,
) -> Result<f64> {
    let n = z1.len();
    let trim = (edge_trim * n as f64).floor() as usize;
    if n <= 2 * trim {
        return Err(Error::InvalidArgument(format!(
            "no samples left after trimming {trim} from each end of {n}"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for t in trim..n - trim {
        let u = z1[t] * z2[t].conj();
        let norm = u.norm();
        if norm > 0.0 {
            acc += u / norm;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Degenerate("zero amplitude everywhere".into()));
    }
    Ok(clamp_range(acc.norm() / count as f64, 0.0, 1.0))
}

/// Differential entropy under a Gaussian model: 0.5 ln(2 pi e sigma^2)
/// with the population variance of the window.
pub fn differential_entropy(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "differential entropy needs >= 2 samples, got {}",
            x.len()
        )));
    }
    let var = population_variance(x);
    if var <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).ln())
}

/// Symmetric pairwise connectivity over all channels of one window.
#[derive(Debug, Clone)]
pub struct ConnectivityMatrix {
    pub measure: Measure,
    pub band: Band,
    /// [n_channels x n_channels], symmetric, unit diagonal.
    pub values: Array2<f64>,
}

/// Compute the full pairwise connectivity matrix for one window
/// [n_channels x window_len]. Per-channel transforms (segment spectra,
/// analytic signals) are computed once and shared across pairs.
pub fn connectivity_matrix(
    window: ArrayView2<f64>,
    measure: Measure,
    band: &Band,
    fs: f64,
) -> Result<ConnectivityMatrix> {
    let n_ch = window.nrows();
    if n_ch < 2 {
        return Err(Error::InvalidArgument(format!(
            "connectivity needs >= 2 channels, got {n_ch}"
        )));
    }
    let mut values = Array2::zeros((n_ch, n_ch));
    for i in 0..n_ch {
        values[(i, i)] = 1.0;
    }
    match measure {
        Measure::Pearson => {
            let rows: Vec<Vec<f64>> = (0..n_ch).map(|ch| window.row(ch).to_vec()).collect();
            for i in 0..n_ch {
                for j in i + 1..n_ch {
                    let v = pearson(&rows[i], &rows[j]).map_err(|e| {
                        Error::Degenerate(format!("channels ({i}, {j}): {e}"))
                    })?;
                    values[(i, j)] = v;
                    values[(j, i)] = v;
                }
            }
        }
        Measure::Coherence => {
            let len = window.ncols();
            let seg_len = welch_segment_len(len, WELCH_TARGET_SEGMENTS, WELCH_OVERLAP);
            let hop = ((seg_len as f64 * (1.0 - WELCH_OVERLAP)).round() as usize).max(1);
            if seg_len > len || (len - seg_len) / hop + 1 < 2 {
                return Err(Error::InvalidArgument(format!(
                    "window of {len} samples too short for a 2-segment Welch estimate"
                )));
            }
            let spectra: Vec<Vec<Vec<Complex64>>> = (0..n_ch)
                .map(|ch| segment_spectra(&window.row(ch).to_vec(), seg_len, hop))
                .collect();
            let autos: Vec<Vec<Complex64>> = spectra
                .iter()
                .map(|s| averaged_conjugate_products(s, s))
                .collect();
            for i in 0..n_ch {
                for j in i + 1..n_ch {
                    let sxy = averaged_conjugate_products(&spectra[i], &spectra[j]);
                    let v =
                        coherence_band_from_spectra(&sxy, &autos[i], &autos[j], fs, seg_len, band)
                            .map_err(|e| {
                                Error::Degenerate(format!("channels ({i}, {j}): {e}"))
                            })?;
                    values[(i, j)] = v;
                    values[(j, i)] = v;
                }
            }
        }
        Measure::Plv => {
            let analytic: Vec<Vec<Complex64>> = (0..n_ch)
                .map(|ch| {
                    let row = window.row(ch).to_vec();
                    if row.iter().all(|&v| v == 0.0) {
                        Err(Error::Degenerate(format!("channel {ch} is all zeros")))
                    } else {
                        analytic_signal(&row)
                    }
                })
                .collect::<Result<_>>()?;
            for i in 0..n_ch {
                for j in i + 1..n_ch {
                    let v = plv_from_analytic(&analytic[i], &analytic[j], PLV_EDGE_TRIM)
                        .map_err(|e| {
                            Error::Degenerate(format!("channels ({i}, {j}): {e}"))
                        })?;
                    values[(i, j)] = v;
                    values[(j, i)] = v;
                }
            }
        }
        Measure::De => {
            return Err(Error::InvalidArgument(
                "differential entropy is a per-channel feature, not a connectivity measure".into(),
            ));
        }
    }
    Ok(ConnectivityMatrix {
        measure,
        band: *band,
        values,
    })
}

/// Row-major strictly-upper-triangle entries: (0,1), (0,2), ..., (n-2,n-1).
pub fn vectorize_upper(m: &ConnectivityMatrix) -> Vec<f64> {
    let n = m.values.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(m.values[(i, j)]);
        }
    }
    out
}

/// One feature vector per window: DE per channel, or the vectorized upper
/// triangle of the connectivity matrix.
pub fn window_features(
    window: ArrayView2<f64>,
    measure: Measure,
    band: &Band,
    fs: f64,
) -> Result<Vec<f64>> {
    match measure {
        Measure::De => (0..window.nrows())
            .map(|ch| {
                differential_entropy(&window.row(ch).to_vec())
                    .map_err(|e| Error::Degenerate(format!("channel {ch}: {e}")))
            })
            .collect(),
        _ => Ok(vectorize_upper(&connectivity_matrix(
            window, measure, band, fs,
        )?)),
    }
}

/// Column names for the exported feature table.
pub fn column_names(measure: Measure, channels: &[String]) -> Vec<String> {
    match measure {
        Measure::De => channels.iter().map(|c| format!("de_{c}")).collect(),
        m => {
            let mut out = Vec::with_capacity(channels.len() * (channels.len() - 1) / 2);
            for i in 0..channels.len() {
                for j in i + 1..channels.len() {
                    out.push(format!("{}_{}-{}", m.name(), channels[i], channels[j]));
                }
            }
            out
        }
    }
}

/// Addresses one window of one trial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowKey {
    pub subject: String,
    pub session: u32,
    pub trial: u32,
    pub window: u32,
}

impl WindowKey {
    pub fn trial_key(&self) -> TrialKey {
        TrialKey {
            subject: self.subject.clone(),
            session: self.session,
            trial: self.trial,
        }
    }
}

/// Per-window feature vectors for one (band, measure), with row keys.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub band: Band,
    pub measure: Measure,
    pub columns: Vec<String>,
    pub keys: Vec<WindowKey>,
    pub labels: Vec<EmotionLabel>,
    /// [n_rows x n_features]
    pub values: Array2<f64>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Extract features for every window of `epochs` and append them.
    pub fn from_epochs(
        band: Band,
        measure: Measure,
        channels: &[String],
        trials: &[BandedEpochs],
    ) -> Result<FeatureTable> {
        let columns = column_names(measure, channels);
        let mut keys = Vec::new();
        let mut labels = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for ep in trials {
            for w in 0..ep.n_windows() {
                let window = ep.windows.index_axis(ndarray::Axis(0), w);
                let feats = window_features(window, measure, &band, ep.fs_hz).map_err(|e| {
                    Error::Degenerate(format!("trial {} window {w}: {e}", ep.key))
                })?;
                keys.push(WindowKey {
                    subject: ep.key.subject.clone(),
                    session: ep.key.session,
                    trial: ep.key.trial,
                    window: w as u32,
                });
                labels.push(ep.label);
                rows.push(feats);
            }
        }
        Self::from_rows(band, measure, columns, keys, labels, rows)
    }

    pub fn from_rows(
        band: Band,
        measure: Measure,
        columns: Vec<String>,
        keys: Vec<WindowKey>,
        labels: Vec<EmotionLabel>,
        rows: Vec<Vec<f64>>,
    ) -> Result<FeatureTable> {
        let d = columns.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument(
                "feature row length differs from column count".into(),
            ));
        }
        if keys.len() != rows.len() || labels.len() != rows.len() {
            return Err(Error::InvalidArgument(
                "keys/labels/rows length mismatch".into(),
            ));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let values = Array2::from_shape_vec((keys.len(), d), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(FeatureTable {
            band,
            measure,
            columns,
            keys,
            labels,
            values,
        })
    }

    /// Keep only rows whose index passes the predicate.
    pub fn filter_rows(&self, keep: impl Fn(usize, &WindowKey) -> bool) -> FeatureTable {
        let idx: Vec<usize> = (0..self.n_rows())
            .filter(|&i| keep(i, &self.keys[i]))
            .collect();
        let mut values = Array2::zeros((idx.len(), self.dim()));
        for (r, &i) in idx.iter().enumerate() {
            values.row_mut(r).assign(&self.values.row(i));
        }
        FeatureTable {
            band: self.band,
            measure: self.measure,
            columns: self.columns.clone(),
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            values,
        }
    }

    /// One row per window: key columns, then feature columns.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
        let mut header = vec![
            "subject".to_string(),
            "session".to_string(),
            "trial".to_string(),
            "window".to_string(),
            "label".to_string(),
        ];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)
            .map_err(|e| Error::data(path, e.to_string()))?;
        for i in 0..self.n_rows() {
            let k = &self.keys[i];
            let mut record = vec![
                k.subject.clone(),
                k.session.to_string(),
                k.trial.to_string(),
                k.window.to_string(),
                self.labels[i].name().to_string(),
            ];
            record.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record)
                .map_err(|e| Error::data(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, band: Band, measure: Measure) -> Result<FeatureTable> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
        let header = rdr
            .headers()
            .map_err(|e| Error::data(path, e.to_string()))?
            .clone();
        if header.len() < 6 {
            return Err(Error::data(path, "feature csv needs key + feature columns"));
        }
        let columns: Vec<String> = header.iter().skip(5).map(str::to_string).collect();
        let mut keys = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
            let parse_int = |s: &str| -> Result<u32> {
                s.parse()
                    .map_err(|_| Error::data(path, format!("bad integer {s:?}")))
            };
            keys.push(WindowKey {
                subject: rec[0].to_string(),
                session: parse_int(&rec[1])?,
                trial: parse_int(&rec[2])?,
                window: parse_int(&rec[3])?,
            });
            labels.push(
                EmotionLabel::parse(&rec[4])
                    .ok_or_else(|| Error::data(path, format!("unknown label {:?}", &rec[4])))?,
            );
            let row: Vec<f64> = rec
                .iter()
                .skip(5)
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::data(path, format!("bad number {s:?}")))
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Self::from_rows(band, measure, columns, keys, labels, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::BandName;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn gamma_band() -> Band {
        Band::canonical(BandName::Gamma, Default::default())
    }

    fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// White noise filtered to a band; a stand-in narrowband source.
    fn narrowband(rng: &mut ChaCha8Rng, n: usize, fs: f64, band: &Band) -> Vec<f64> {
        let sos = crate::dsp::butter_bandpass(4, band.lo_hz, band.hi_hz, fs).unwrap();
        crate::dsp::filtfilt(&sos, &randn(rng, n), crate::dsp::transient_padlen(fs, band.lo_hz))
    }

    #[test]
    fn pearson_self_correlation_is_one() {
        let x = vec![0.3, -1.2, 2.4, 0.7, -0.5];
        assert_relative_eq!(pearson(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pearson_negative_scaling_is_minus_one() {
        let x = vec![0.3, -1.2, 2.4, 0.7, -0.5];
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v).collect();
        assert_relative_eq!(pearson(&x, &y).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn pearson_hand_computed_example() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![1.0, 3.0, 2.0, 4.0];
        assert_relative_eq!(pearson(&x, &y).unwrap(), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn pearson_degenerate_input() {
        let x = vec![1.0, 1.0, 1.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            pearson(&x, &y).unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn auto_spectrum_is_real_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = randn(&mut rng, 400);
        let s = cross_spectrum(&x, &x, 200.0, 88, 0.5).unwrap();
        for v in &s.values {
            assert!(v.im.abs() < 1e-12);
            assert!(v.re >= 0.0);
        }
    }

    #[test]
    fn cross_spectrum_peaks_at_tone_frequency() {
        let fs = 200.0;
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 20.0 * i as f64 / fs).sin()).collect();
        // y = x delayed two samples
        let y: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 20.0 * (i as f64 - 2.0) / fs).sin())
            .collect();
        let s = cross_spectrum(&x, &y, fs, 88, 0.5).unwrap();
        let peak = s
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        let nearest_20 = s
            .freqs
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 20.0).abs().partial_cmp(&(b.1 - 20.0).abs()).unwrap()
            })
            .unwrap()
            .0;
        assert_eq!(peak, nearest_20);
    }

    #[test]
    fn cross_spectrum_of_zero_signal_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = randn(&mut rng, 400);
        let y = vec![0.0; 400];
        let s = cross_spectrum(&x, &y, 200.0, 88, 0.5).unwrap();
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn cross_spectrum_rejects_single_segment() {
        let x = vec![1.0; 100];
        assert!(cross_spectrum(&x, &x, 200.0, 100, 0.0).is_err());
    }

    #[test]
    fn self_coherence_is_one_at_every_grid_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = randn(&mut rng, 400);
        let fs = 200.0;
        let seg_len = welch_segment_len(400, WELCH_TARGET_SEGMENTS, WELCH_OVERLAP);
        let hop = seg_len / 2;
        let sx = segment_spectra(&x, seg_len, hop);
        let sxy = averaged_conjugate_products(&sx, &sx);
        let sxx = averaged_conjugate_products(&sx, &sx);
        for k in 0..sxy.len() {
            if sxx[k].re > 0.0 {
                assert_relative_eq!(sxy[k].norm() / sxx[k].re, 1.0, epsilon = 1e-12);
            }
        }
        // and therefore the band mean is 1
        let c = coherence_band(&x, &x, fs, &gamma_band()).unwrap();
        assert_relative_eq!(c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherence_null_envelope_monte_carlo() {
        // independent white noise: the estimator's small-sample bias is
        // well under 0.5, and a fresh draw stays inside mean +/- 3 sigma
        let fs = 200.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws: Vec<f64> = (0..300)
            .map(|_| {
                let x = randn(&mut rng, 400);
                let y = randn(&mut rng, 400);
                coherence_band(&x, &y, fs, &gamma_band()).unwrap()
            })
            .collect();
        let m = mean(&draws);
        let sd = population_variance(&draws).sqrt();
        assert!(m < 0.5, "null coherence mean {m}");
        let fresh = {
            let x = randn(&mut rng, 400);
            let y = randn(&mut rng, 400);
            coherence_band(&x, &y, fs, &gamma_band()).unwrap()
        };
        assert!(
            (fresh - m).abs() <= 3.0 * sd,
            "fresh draw {fresh} outside {m} +/- 3*{sd}"
        );
    }

    #[test]
    fn coherence_high_snr_coupled_pair() {
        // shared broadband carrier + 1% independent noise power (20 dB SNR)
        let fs = 200.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut vals = Vec::new();
        for _ in 0..10 {
            let shared = randn(&mut rng, 400);
            let x: Vec<f64> = shared
                .iter()
                .map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let y: Vec<f64> = shared
                .iter()
                .map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            vals.push(coherence_band(&x, &y, fs, &gamma_band()).unwrap());
        }
        let m = mean(&vals);
        assert!(m > 0.9, "coupled coherence {m}");
    }

    #[test]
    fn coherence_band_without_grid_frequency_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(&mut rng, 400);
        let y = randn(&mut rng, 400);
        // grid spacing is 200/88 = 2.27 Hz; a 1 Hz-wide band straddling
        // no bin must error
        let band = Band {
            name: BandName::Delta,
            lo_hz: 3.0,
            hi_hz: 3.4,
        };
        assert!(coherence_band(&x, &y, 200.0, &band).is_err());
    }

    #[test]
    fn analytic_signal_of_cosine_has_unit_magnitude() {
        let fs = 200.0;
        let n = 400;
        // full cycles in the window
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).cos()).collect();
        let z = analytic_signal(&x).unwrap();
        for t in n / 10..9 * n / 10 {
            assert_relative_eq!(z[t].norm(), 1.0, max_relative = 1e-2);
        }
    }

    #[test]
    fn analytic_signal_real_part_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [64usize, 65, 400] {
            let x = randn(&mut rng, n);
            let z = analytic_signal(&x).unwrap();
            for (a, b) in x.iter().zip(z.iter()) {
                assert_relative_eq!(*a, b.re, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn analytic_signal_hilbert_of_cosine_is_sine() {
        let fs = 200.0;
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).cos()).collect();
        let s: Vec<f64> = (0..n).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let z = analytic_signal(&x).unwrap();
        for t in n / 10..9 * n / 10 {
            assert!(
                (z[t].im - s[t]).abs() < 1e-2,
                "H(cos) vs sin at {t}: {} vs {}",
                z[t].im,
                s[t]
            );
        }
    }

    #[test]
    fn instantaneous_phase_unwraps_linearly() {
        let fs = 200.0;
        let n = 400;
        let w = 2.0 * PI * 10.0 / fs; // rad per sample
        let x: Vec<f64> = (0..n).map(|i| (w * i as f64 + 0.7).cos()).collect();
        let z = analytic_signal(&x).unwrap();
        // unwrap phases on the interior
        let lo = n / 10;
        let hi = 9 * n / 10;
        let mut phases = Vec::new();
        let mut prev = z[lo].arg();
        let mut offset = 0.0;
        for t in lo..hi {
            let mut p = z[t].arg();
            while p + offset < prev - PI {
                offset += 2.0 * PI;
            }
            p += offset;
            phases.push(p);
            prev = p;
        }
        // least-squares slope
        let m = phases.len() as f64;
        let tbar = (m - 1.0) / 2.0;
        let pbar = mean(&phases);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, p) in phases.iter().enumerate() {
            num += (i as f64 - tbar) * (p - pbar);
            den += (i as f64 - tbar) * (i as f64 - tbar);
        }
        let slope = num / den;
        assert_relative_eq!(slope, w, max_relative = 1e-3);
    }

    #[test]
    fn plv_constant_phase_offset_is_locked() {
        let fs = 200.0;
        let n = 400;
        let x1: Vec<f64> = (0..n).map(|i| (2.0 * PI * 40.0 * i as f64 / fs).cos()).collect();
        let x2: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 40.0 * i as f64 / fs + 1.1).cos())
            .collect();
        let v = plv(&x1, &x2, PLV_EDGE_TRIM).unwrap();
        assert!(v > 0.999, "phase-locked PLV {v}");
    }

    #[test]
    fn plv_independent_narrowband_null() {
        let fs = 200.0;
        let band = gamma_band();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws: Vec<f64> = (0..200)
            .map(|_| {
                let x1 = narrowband(&mut rng, 400, fs, &band);
                let x2 = narrowband(&mut rng, 400, fs, &band);
                plv(&x1, &x2, PLV_EDGE_TRIM).unwrap()
            })
            .collect();
        let m = mean(&draws);
        assert!(m < 0.2, "null PLV mean {m}");
        assert!(m > 0.02, "null PLV mean suspiciously low: {m}");
        // a fresh draw below the empirical 99th percentile
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p99 = sorted[(0.99 * sorted.len() as f64) as usize];
        let fresh = {
            let x1 = narrowband(&mut rng, 400, fs, &band);
            let x2 = narrowband(&mut rng, 400, fs, &band);
            plv(&x1, &x2, PLV_EDGE_TRIM).unwrap()
        };
        assert!(fresh < p99, "fresh {fresh} above p99 {p99}");
    }

    #[test]
    fn plv_is_amplitude_invariant_constant_scale() {
        let fs = 200.0;
        let band = gamma_band();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let x1 = narrowband(&mut rng, 400, fs, &band);
        let x2 = narrowband(&mut rng, 400, fs, &band);
        let base = plv(&x1, &x2, PLV_EDGE_TRIM).unwrap();
        for a in [0.001, 0.5, 7.3, 5000.0] {
            let scaled: Vec<f64> = x2.iter().map(|v| a * v).collect();
            let v = plv(&x1, &scaled, PLV_EDGE_TRIM).unwrap();
            assert_relative_eq!(v, base, epsilon = 1e-12);
        }
    }

    #[test]
    fn plv_is_amplitude_invariant_slow_envelope() {
        // band-limited tone and a DFT-bin-aligned positive envelope keep
        // the product's spectrum one-sided, so the phase is untouched
        let n = 400;
        let x1: Vec<f64> = (0..n).map(|i| (2.0 * PI * 80.0 * i as f64 / n as f64).cos()).collect();
        let x2: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 80.0 * i as f64 / n as f64 + 0.9).cos())
            .collect();
        let g: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.9 * (2.0 * PI * 3.0 * i as f64 / n as f64).cos())
            .collect();
        let modulated: Vec<f64> = x2.iter().zip(&g).map(|(v, e)| v * e).collect();
        let base = plv(&x1, &x2, PLV_EDGE_TRIM).unwrap();
        let v = plv(&x1, &modulated, PLV_EDGE_TRIM).unwrap();
        assert_relative_eq!(v, base, epsilon = 1e-9);
    }

    #[test]
    fn plv_rejects_all_zero_input() {
        let x = vec![0.0; 400];
        let y = vec![1.0; 400];
        assert!(matches!(
            plv(&x, &y, PLV_EDGE_TRIM).unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn de_unit_log_argument_is_zero() {
        // variance 1/(2 pi e) makes the log argument exactly 1
        let sigma = (1.0 / (2.0 * PI * std::f64::consts::E)).sqrt();
        // two-point series with exactly that population sd
        let x = vec![-sigma, sigma];
        let de = differential_entropy(&x).unwrap();
        assert_relative_eq!(de, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn de_scaling_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = randn(&mut rng, 400);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d1 = differential_entropy(&x).unwrap();
        let d2 = differential_entropy(&x2).unwrap();
        assert_relative_eq!(d2 - d1, 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn de_standard_gaussian_monte_carlo() {
        let expected = 0.5 * (2.0 * PI * std::f64::consts::E).ln(); // 1.4189...
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = randn(&mut rng, 400);
        let de = differential_entropy(&x).unwrap();
        assert!((de - expected).abs() < 0.1, "DE {de} vs {expected}");
    }

    #[test]
    fn connectivity_matrix_identical_channels_pearson() {
        let mut w = Array2::zeros((2, 16));
        for s in 0..16 {
            w[(0, s)] = (s as f64 * 0.71).sin();
            w[(1, s)] = (s as f64 * 0.71).sin();
        }
        let m = connectivity_matrix(w.view(), Measure::Pearson, &gamma_band(), 200.0).unwrap();
        for v in m.values.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn connectivity_62_channels_has_1891_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut w = Array2::zeros((62, 64));
        for v in w.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let m = connectivity_matrix(w.view(), Measure::Pearson, &gamma_band(), 200.0).unwrap();
        assert_eq!(vectorize_upper(&m).len(), 1891);
    }

    #[test]
    fn connectivity_matrix_matches_pairwise_recomputation() {
        let fs = 200.0;
        let band = gamma_band();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let n_ch = 6;
        let len = 400;
        let mut w = Array2::zeros((n_ch, len));
        for v in w.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for measure in Measure::CONNECTIVITY {
            let m = connectivity_matrix(w.view(), measure, &band, fs).unwrap();
            for _ in 0..10 {
                let i = rng.random_range(0..n_ch);
                let j = rng.random_range(0..n_ch);
                if i == j {
                    continue;
                }
                let xi = w.row(i).to_vec();
                let xj = w.row(j).to_vec();
                let direct = match measure {
                    Measure::Pearson => pearson(&xi, &xj).unwrap(),
                    Measure::Coherence => coherence_band(&xi, &xj, fs, &band).unwrap(),
                    Measure::Plv => plv(&xi, &xj, PLV_EDGE_TRIM).unwrap(),
                    Measure::De => unreachable!(),
                };
                assert_relative_eq!(m.values[(i, j)], direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn connectivity_error_carries_channel_indices() {
        let mut w = Array2::zeros((3, 16));
        for s in 0..16 {
            w[(0, s)] = (s as f64).sin();
            w[(1, s)] = 1.0; // constant channel
            w[(2, s)] = (s as f64).cos();
        }
        let err =
            connectivity_matrix(w.view(), Measure::Pearson, &gamma_band(), 200.0).unwrap_err();
        assert!(err.to_string().contains("1"), "{err}");
    }

    #[test]
    fn vectorize_upper_ordering() {
        let mut values = Array2::zeros((3, 3));
        for i in 0..3 {
            values[(i, i)] = 1.0;
        }
        values[(0, 1)] = 10.0;
        values[(1, 0)] = 10.0;
        values[(0, 2)] = 20.0;
        values[(2, 0)] = 20.0;
        values[(1, 2)] = 30.0;
        values[(2, 1)] = 30.0;
        let m = ConnectivityMatrix {
            measure: Measure::Pearson,
            band: gamma_band(),
            values,
        };
        assert_eq!(vectorize_upper(&m), vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn vectorize_transpose_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 5;
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            values[(i, i)] = 1.0;
            for j in i + 1..n {
                let v: f64 = rng.sample(StandardNormal);
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        let m = ConnectivityMatrix {
            measure: Measure::Plv,
            band: gamma_band(),
            values: values.clone(),
        };
        let mt = ConnectivityMatrix {
            measure: Measure::Plv,
            band: gamma_band(),
            values: values.t().to_owned(),
        };
        assert_eq!(vectorize_upper(&m), vectorize_upper(&mt));
    }

    #[test]
    fn measure_symmetry_random_inputs() {
        let fs = 200.0;
        let band = gamma_band();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let x = randn(&mut rng, 400);
            let y = randn(&mut rng, 400);
            assert_relative_eq!(
                pearson(&x, &y).unwrap(),
                pearson(&y, &x).unwrap(),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                coherence_band(&x, &y, fs, &band).unwrap(),
                coherence_band(&y, &x, fs, &band).unwrap(),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                plv(&x, &y, PLV_EDGE_TRIM).unwrap(),
                plv(&y, &x, PLV_EDGE_TRIM).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn range_invariants_random_inputs() {
        let fs = 200.0;
        let band = gamma_band();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..200 {
            let x = randn(&mut rng, 200);
            let y = randn(&mut rng, 200);
            let p = pearson(&x, &y).unwrap();
            assert!((-1.0..=1.0).contains(&p));
            let c = coherence_band(&x, &y, fs, &band).unwrap();
            assert!((0.0..=1.0).contains(&c));
            let v = plv(&x, &y, PLV_EDGE_TRIM).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn pearson_affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = randn(&mut rng, 100);
        let y = randn(&mut rng, 100);
        let base = pearson(&x, &y).unwrap();
        for (a, b) in [(2.5, 1.0), (-3.0, -7.0), (0.1, 100.0)] {
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let v = pearson(&xt, &y).unwrap();
            assert_relative_eq!(v, a.signum() * base, epsilon = 1e-9);
        }
    }

    #[test]
    fn feature_table_csv_round_trip() {
        let band = gamma_band();
        let keys = vec![
            WindowKey {
                subject: "s01".into(),
                session: 1,
                trial: 1,
                window: 0,
            },
            WindowKey {
                subject: "s01".into(),
                session: 1,
                trial: 2,
                window: 3,
            },
        ];
        let labels = vec![EmotionLabel::Negative, EmotionLabel::Positive];
        let rows = vec![vec![0.125, -3.5, 0.1], vec![1e-12, 7.25, -0.875]];
        let t = FeatureTable::from_rows(
            band,
            Measure::Plv,
            vec!["plv_a-b".into(), "plv_a-c".into(), "plv_b-c".into()],
            keys,
            labels,
            rows,
        )
        .unwrap();
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let back = FeatureTable::read_csv(&path, band, Measure::Plv).unwrap();
        assert_eq!(back.keys, t.keys);
        assert_eq!(back.labels, t.labels);
        assert_eq!(back.values, t.values);
        assert_eq!(back.columns, t.columns);
    }

    #[test]
    fn column_name_format() {
        let ch = vec!["FT7".to_string(), "T8".to_string(), "CZ".to_string()];
        assert_eq!(
            column_names(Measure::De, &ch),
            vec!["de_FT7", "de_T8", "de_CZ"]
        );
        assert_eq!(
            column_names(Measure::Coherence, &ch),
            vec!["coherence_FT7-T8", "coherence_FT7-CZ", "coherence_T8-CZ"]
        );
    }
}
