//! Shared DSP primitives: FFT wrappers, Butterworth section design and
//! zero-phase (forward-backward) filtering.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT.
pub fn fft_in_place(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse FFT, normalized by 1/N.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(buf));
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v = *v * scale;
    }
}

/// Forward FFT of a real signal.
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// One second-order IIR section in direct form II transposed.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Run the section over `x` in place with zero initial state.
    fn run(&self, x: &mut [f64]) {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = self.b0 * xin + s1;
            s1 = self.b1 * xin - self.a1 * y + s2;
            s2 = self.b2 * xin - self.a2 * y;
            *v = y;
        }
    }
}

/// Butterworth analog prototype poles for unit cutoff.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

/// Bilinear map of an analog pole/zero into the z plane.
fn bilinear(s: Complex64, k: f64) -> Complex64 {
    (Complex64::new(k, 0.0) + s) / (Complex64::new(k, 0.0) - s)
}

/// Group z-plane poles into conjugate pairs, returning (a1, a2) per biquad.
fn pair_poles(mut poles: Vec<Complex64>) -> Result<Vec<(f64, f64)>> {
    let mut pairs = Vec::with_capacity(poles.len() / 2);
    while let Some(p) = poles.pop() {
        if p.im.abs() < 1e-10 * (1.0 + p.re.abs()) {
            // real pole: pair it with the nearest remaining real pole
            let j = poles
                .iter()
                .position(|q| q.im.abs() < 1e-10 * (1.0 + q.re.abs()))
                .ok_or_else(|| Error::Filter("unpaired real pole".into()))?;
            let q = poles.swap_remove(j);
            pairs.push((-(p.re + q.re), p.re * q.re));
        } else {
            let target = p.conj();
            let (j, _) = poles
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (**a - target)
                        .norm_sqr()
                        .partial_cmp(&(**b - target).norm_sqr())
                        .unwrap()
                })
                .ok_or_else(|| Error::Filter("unpaired complex pole".into()))?;
            let q = poles.swap_remove(j);
            pairs.push((-(p + q).re, (p * q).re));
        }
    }
    Ok(pairs)
}

fn check_stable(poles: &[Complex64]) -> Result<()> {
    for p in poles {
        if p.norm() >= 1.0 - 1e-12 {
            return Err(Error::Filter(format!(
                "pole at |z| = {:.12} outside the unit circle",
                p.norm()
            )));
        }
    }
    Ok(())
}

/// Evaluate a biquad cascade at z = e^{jw}.
fn cascade_response(sos: &[Biquad], w: f64) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, -w); // z^-1
    let z2 = z1 * z1;
    let mut h = Complex64::new(1.0, 0.0);
    for s in sos {
        let num = Complex64::new(s.b0, 0.0) + z1 * s.b1 + z2 * s.b2;
        let den = Complex64::new(1.0, 0.0) + z1 * s.a1 + z2 * s.a2;
        h = h * num / den;
    }
    h
}

/// Butterworth low-pass as cascaded biquads. `order` is the pole count and
/// must be even. Unit gain at DC.
pub fn butter_lowpass(order: usize, fc: f64, fs: f64) -> Result<Vec<Biquad>> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "filter order must be a positive even number, got {order}"
        )));
    }
    if !(fc > 0.0 && fc < fs / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff {fc} Hz outside (0, {}) for fs = {fs}",
            fs / 2.0
        )));
    }
    let k = 2.0 * fs;
    let wc = k * (PI * fc / fs).tan();
    let zpoles: Vec<Complex64> = prototype_poles(order)
        .into_iter()
        .map(|p| bilinear(p * wc, k))
        .collect();
    check_stable(&zpoles)?;
    let mut sos: Vec<Biquad> = pair_poles(zpoles)?
        .into_iter()
        .map(|(a1, a2)| Biquad {
            b0: 1.0,
            b1: 2.0,
            b2: 1.0,
            a1,
            a2,
        })
        .collect();
    normalize_gain(&mut sos, 0.0)?;
    Ok(sos)
}

/// Butterworth band-pass as cascaded biquads. `order` is the total pole
/// count of the band-pass (4 gives the classic 4th-order band-pass built
/// from a 2nd-order low-pass prototype). Unit gain at the band center.
pub fn butter_bandpass(order: usize, lo: f64, hi: f64, fs: f64) -> Result<Vec<Biquad>> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "band-pass order must be a positive even number, got {order}"
        )));
    }
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "band edges ({lo}, {hi}) must satisfy 0 < lo < hi < fs/2 = {}",
            fs / 2.0
        )));
    }
    let k = 2.0 * fs;
    let wlo = k * (PI * lo / fs).tan();
    let whi = k * (PI * hi / fs).tan();
    let w0 = (wlo * whi).sqrt();
    let bw = whi - wlo;

    // low-pass prototype -> band-pass: each prototype pole yields two poles
    let mut zpoles = Vec::with_capacity(order);
    for p in prototype_poles(order / 2) {
        let bp = p * (bw / 2.0);
        let disc = (bp * bp - Complex64::new(w0 * w0, 0.0)).sqrt();
        zpoles.push(bilinear(bp + disc, k));
        zpoles.push(bilinear(bp - disc, k));
    }
    check_stable(&zpoles)?;
    // band-pass zeros: order/2 at z = 1 and order/2 at z = -1,
    // one of each per section: numerator (1 - z^-2)
    let mut sos: Vec<Biquad> = pair_poles(zpoles)?
        .into_iter()
        .map(|(a1, a2)| Biquad {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1,
            a2,
        })
        .collect();
    let w_center = 2.0 * (w0 / k).atan();
    normalize_gain(&mut sos, w_center)?;
    Ok(sos)
}

/// Scale the cascade so |H| = 1 at digital frequency `w` (radians/sample).
fn normalize_gain(sos: &mut [Biquad], w: f64) -> Result<()> {
    let g = cascade_response(sos, w).norm();
    if !g.is_finite() || g <= 0.0 {
        return Err(Error::Filter(format!("non-finite gain {g} at w = {w}")));
    }
    let per_section = (1.0 / g).powf(1.0 / sos.len() as f64);
    for s in sos.iter_mut() {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
    Ok(())
}

/// Zero-phase filtering: run the cascade forward, then backward.
///
/// The signal is extended at both ends by odd reflection over `padlen`
/// samples so filter transients decay inside the padding. `padlen` is
/// clamped to `x.len() - 1`.
pub fn filtfilt(sos: &[Biquad], x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let padlen = padlen.min(n - 1);
    let mut buf = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        buf.push(2.0 * x[0] - x[i]);
    }
    buf.extend_from_slice(x);
    for i in 1..=padlen {
        buf.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    for s in sos {
        s.run(&mut buf);
    }
    buf.reverse();
    for s in sos {
        s.run(&mut buf);
    }
    buf.reverse();
    buf[padlen..padlen + n].to_vec()
}

/// Padding long enough for transients of the slowest edge to die out:
/// three periods of `lowest_edge_hz`.
pub fn transient_padlen(fs: f64, lowest_edge_hz: f64) -> usize {
    (3.0 * fs / lowest_edge_hz).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn lowpass_passes_dc_blocks_high() {
        let sos = butter_lowpass(4, 20.0, 200.0).unwrap();
        let n = 4000;
        let dc = vec![1.0; n];
        let y = filtfilt(&sos, &dc, transient_padlen(200.0, 20.0));
        assert_relative_eq!(y[n / 2], 1.0, max_relative = 1e-3);

        let hi = sine(80.0, 200.0, n);
        let y = filtfilt(&sos, &hi, transient_padlen(200.0, 20.0));
        let max = y[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-3, "80 Hz leak through 20 Hz low-pass: {max}");
    }

    #[test]
    fn bandpass_center_gain_is_unity() {
        let fs = 200.0;
        let sos = butter_bandpass(4, 31.0, 50.0, fs).unwrap();
        let f0 = (31.0f64 * 50.0).sqrt();
        let h = cascade_response(&sos, 2.0 * PI * f0 / fs).norm();
        // the prewarped analog center lands within a hair of sqrt(lo*hi)
        assert_relative_eq!(h, 1.0, max_relative = 1e-2);
    }

    #[test]
    fn bandpass_rejects_out_of_band() {
        let fs = 200.0;
        let sos = butter_bandpass(4, 31.0, 50.0, fs).unwrap();
        for f in [5.0, 80.0] {
            let x = sine(f, fs, 4000);
            let y = filtfilt(&sos, &x, transient_padlen(fs, 31.0));
            let max = y[1000..3000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max < 0.05, "{f} Hz not attenuated: {max}");
        }
    }

    #[test]
    fn invalid_designs_are_rejected() {
        assert!(butter_bandpass(4, 50.0, 31.0, 200.0).is_err());
        assert!(butter_bandpass(4, 0.0, 31.0, 200.0).is_err());
        assert!(butter_bandpass(4, 31.0, 100.0, 200.0).is_err());
        assert!(butter_bandpass(3, 31.0, 50.0, 200.0).is_err());
        assert!(butter_lowpass(4, 0.0, 200.0).is_err());
    }

    #[test]
    fn fft_round_trip() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut buf = fft_real(&x);
        ifft_in_place(&mut buf);
        for (a, b) in x.iter().zip(buf.iter()) {
            assert_relative_eq!(*a, b.re, epsilon = 1e-12);
            assert!(b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn hann_endpoints_and_peak() {
        let w = hann(8);
        assert_relative_eq!(w[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[4], 1.0, epsilon = 1e-15);
    }
}
