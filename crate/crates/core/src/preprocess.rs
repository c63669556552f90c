//! Resampling, broadband filtering, per-band filtering and fixed-length
//! epoching.
//!
//! All filters are 4th-order Butterworth sections applied forward-backward,
//! so the output is zero-phase. Band filtering operates on the already
//! broadband-filtered signal; trials are filtered whole and epoched
//! afterwards to avoid per-window edge transients.

use ndarray::{Array2, Array3};

use crate::data_model::{Band, EmotionLabel, Recording, TrialKey};
use crate::dsp;
use crate::error::{Error, Result};

/// Filter order used throughout the pipeline.
pub const FILTER_ORDER: usize = 4;

/// Anti-alias cutoff as a fraction of the target rate.
pub const ANTI_ALIAS_FRACTION: f64 = 0.45;

/// Per-band, per-window signal tensor after preprocessing.
#[derive(Debug, Clone)]
pub struct BandedEpochs {
    pub band: Band,
    /// [n_windows x n_channels x window_len]
    pub windows: Array3<f64>,
    pub window_len_s: f64,
    pub fs_hz: f64,
    pub key: TrialKey,
    pub label: EmotionLabel,
}

impl BandedEpochs {
    pub fn n_windows(&self) -> usize {
        self.windows.dim().0
    }
}

/// Express `num/den` as a reduced fraction p/q with q bounded, via
/// continued fractions.
fn rational_approx(ratio: f64, max_den: u64, tol: f64) -> Option<(u64, u64)> {
    let mut h = (1u64, 0u64); // numerator convergents
    let mut k = (0u64, 1u64); // denominator convergents
    let mut x = ratio;
    for _ in 0..64 {
        let a = x.floor();
        if a < 0.0 || a > u64::MAX as f64 {
            return None;
        }
        let a_int = a as u64;
        let hn = a_int.checked_mul(h.0)?.checked_add(h.1)?;
        let kn = a_int.checked_mul(k.0)?.checked_add(k.1)?;
        if kn > max_den {
            break;
        }
        h = (hn, h.0);
        k = (kn, k.0);
        if (ratio - h.0 as f64 / k.0 as f64).abs() <= tol * ratio {
            return Some((h.0, k.0));
        }
        let frac = x - a;
        if frac.abs() < 1e-12 {
            break;
        }
        x = 1.0 / frac;
    }
    if k.0 > 0 && (ratio - h.0 as f64 / k.0 as f64).abs() <= tol * ratio {
        Some((h.0, k.0))
    } else {
        None
    }
}

/// Downsample a recording to `target_fs`. An anti-alias low-pass at
/// 0.45 x target rate is applied (zero-phase) before decimation. Rational
/// ratios are handled by zero-stuff upsampling followed by decimation.
pub fn resample(rec: &Recording, target_fs: f64) -> Result<Recording> {
    if target_fs <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "target rate must be positive, got {target_fs}"
        )));
    }
    if target_fs > rec.fs_hz * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "upsampling requested ({} -> {target_fs} Hz) is unsupported",
            rec.fs_hz
        )));
    }
    if (target_fs - rec.fs_hz).abs() <= 1e-9 * rec.fs_hz {
        return Ok(rec.clone());
    }
    // target/fs = p/q in lowest terms; downsampling means p < q
    let (p, q) = rational_approx(target_fs / rec.fs_hz, 1024, 1e-6).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "rate ratio {}/{} has no small rational approximation",
            target_fs, rec.fs_hz
        ))
    })?;
    let p = p as usize;
    let q = q as usize;

    let cutoff = ANTI_ALIAS_FRACTION * target_fs;
    let n_in = rec.n_samples();
    let out_cols = (n_in * p).div_ceil(q);
    let mut out = Array2::zeros((rec.n_channels(), out_cols));

    for ch in 0..rec.n_channels() {
        let row: Vec<f64> = rec.samples.row(ch).to_vec();
        let upsampled: Vec<f64> = if p == 1 {
            row
        } else {
            // zero-stuff; gain p restores the passband amplitude
            let mut up = vec![0.0; n_in * p];
            for (i, &v) in row.iter().enumerate() {
                up[i * p] = v * p as f64;
            }
            up
        };
        let fs_up = rec.fs_hz * p as f64;
        let sos = dsp::butter_lowpass(FILTER_ORDER, cutoff, fs_up)?;
        let filtered = dsp::filtfilt(&sos, &upsampled, dsp::transient_padlen(fs_up, cutoff));
        for (j, idx) in (0..filtered.len()).step_by(q).enumerate() {
            out[(ch, j)] = filtered[idx];
        }
    }

    Recording::new(
        rec.key.clone(),
        rec.label,
        target_fs,
        rec.channels.clone(),
        out,
    )
}

/// Zero-phase Butterworth band-pass over every channel.
pub fn bandpass(rec: &Recording, lo_hz: f64, hi_hz: f64) -> Result<Recording> {
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < rec.fs_hz / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "band ({lo_hz}, {hi_hz}) must satisfy 0 < lo < hi < fs/2 = {}",
            rec.fs_hz / 2.0
        )));
    }
    let sos = dsp::butter_bandpass(FILTER_ORDER, lo_hz, hi_hz, rec.fs_hz)?;
    let padlen = dsp::transient_padlen(rec.fs_hz, lo_hz);
    let mut out = Array2::zeros(rec.samples.dim());
    for ch in 0..rec.n_channels() {
        let row: Vec<f64> = rec.samples.row(ch).to_vec();
        let filtered = dsp::filtfilt(&sos, &row, padlen);
        for (s, v) in filtered.into_iter().enumerate() {
            out[(ch, s)] = v;
        }
    }
    Recording::new(
        rec.key.clone(),
        rec.label,
        rec.fs_hz,
        rec.channels.clone(),
        out,
    )
}

/// Cut a (band-filtered) trial into contiguous non-overlapping windows.
/// The trailing partial window is discarded.
pub fn epoch(rec: &Recording, window_len_s: f64, band: Band) -> Result<BandedEpochs> {
    let window_len = (window_len_s * rec.fs_hz).round() as usize;
    if window_len < 2 {
        return Err(Error::InvalidArgument(format!(
            "window of {window_len_s} s at {} Hz is under 2 samples",
            rec.fs_hz
        )));
    }
    let n_windows = rec.n_samples() / window_len;
    if n_windows == 0 {
        return Err(Error::InvalidArgument(format!(
            "trial of {} samples shorter than one {window_len}-sample window",
            rec.n_samples()
        )));
    }
    let n_ch = rec.n_channels();
    let mut windows = Array3::zeros((n_windows, n_ch, window_len));
    for w in 0..n_windows {
        for ch in 0..n_ch {
            for s in 0..window_len {
                windows[(w, ch, s)] = rec.samples[(ch, w * window_len + s)];
            }
        }
    }
    Ok(BandedEpochs {
        band,
        windows,
        window_len_s,
        fs_hz: rec.fs_hz,
        key: rec.key.clone(),
        label: rec.label,
    })
}

/// Full preprocessing of one trial: optional resample to `target_fs`,
/// broadband filter, band filter, epoch.
pub fn preprocess_trial(
    rec: &Recording,
    target_fs: Option<f64>,
    broadband: (f64, f64),
    band: Band,
    window_len_s: f64,
) -> Result<BandedEpochs> {
    let rec = match target_fs {
        Some(fs) if (fs - rec.fs_hz).abs() > 1e-9 * rec.fs_hz => resample(rec, fs)?,
        _ => rec.clone(),
    };
    let rec = bandpass(&rec, broadband.0, broadband.1)?;
    let rec = bandpass(&rec, band.lo_hz, band.hi_hz)?;
    epoch(&rec, window_len_s, band)
}
