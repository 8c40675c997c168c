//! Photocurrent time series, shot-noise-normalized spectra and post-detection
//! combination of two homodyne currents.
//!
//! Currents are AC-coupled: the carrier mean is dropped and each port sample
//! is `Σ_j A_pj sin(2π f_j t) + n_p(t)`, where `A_pj` is the static shift of
//! tone `j` at port `p` and `n(t)` is white Gaussian noise drawn jointly for
//! all ports from the detected port covariance.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gaussian::QuadratureAngle;
use crate::schemes::SchemeInstance;

/// Largest record the simulator will generate per port.
pub const MAX_SAMPLES: usize = 100_000_000;

/// Half-width of the floor annulus around a peak.
pub const FLOOR_ANNULUS_HZ: f64 = 50e3;
/// Half-width, in bins, of the window searched for a peak.
pub const PEAK_HALF_WIDTH_BINS: f64 = 1.5;
/// Half-width, in bins, excluded from the floor around every tone.
const TONE_GUARD_BINS: f64 = 3.0;

/// Simulation defaults: 10 MHz sampling, 0.2 s records, 10 kHz resolution.
pub const DEFAULT_SAMPLE_RATE: f64 = 10e6;
pub const DEFAULT_DURATION: f64 = 0.2;
pub const DEFAULT_RBW: f64 = 10e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub port_name: String,
    pub lo_phase: QuadratureAngle,
    pub seed: u64,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Copy with every sample multiplied by `gain` (an electronic gain).
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            ..self.clone()
        }
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }
}

/// Derives an independent stream seed for a sub-task of a seeded run.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Square-root factor `L` with `L Lᵀ = cov`, tolerant of singular covariances.
fn covariance_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l();
    }
    let eig = SymmetricEigen::new(cov.clone());
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root)
}

/// Generates one photocurrent record per port of `scheme`.
///
/// The same `seed` and settings always produce bit-identical records.
pub fn simulate_currents(scheme: &SchemeInstance, duration: f64, sample_rate: f64, seed: u64) -> Result<Vec<TimeSeries>> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(invalid("sample_rate must be positive"));
    }
    if let Some(t) = scheme.tones.iter().find(|t| sample_rate <= 2.0 * t.frequency) {
        return Err(Error::Aliasing {
            sample_rate,
            tone_hz: t.frequency,
        });
    }
    let n_f = (duration * sample_rate).round();
    if !(n_f >= 2.0) {
        return Err(invalid(format!("record of {duration} s at {sample_rate} Hz has fewer than 2 samples")));
    }
    if n_f > MAX_SAMPLES as f64 {
        return Err(invalid(format!("record of {n_f} samples exceeds the {MAX_SAMPLES} limit")));
    }
    let n = n_f as usize;
    let model = scheme.port_model()?;
    let factor = covariance_factor(&model.covariance);
    let n_ports = model.channels.len();
    let omegas: Vec<f64> = scheme
        .tones
        .iter()
        .map(|t| std::f64::consts::TAU * t.frequency / sample_rate)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(n); n_ports];
    let mut z = vec![0.0; n_ports];
    let mut phases = vec![0.0; omegas.len()];
    for k in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (s, w) in phases.iter_mut().zip(&omegas) {
            *s = (w * k as f64).sin();
        }
        for (p, samples) in out.iter_mut().enumerate() {
            let mut v = 0.0;
            for (q, zq) in z.iter().enumerate().take(p + 1) {
                v += factor[(p, q)] * zq;
            }
            for (a, s) in model.tone_amplitudes[p].iter().zip(&phases) {
                v += a * s;
            }
            samples.push(v);
        }
    }
    Ok(model
        .channels
        .iter()
        .zip(out)
        .map(|(ch, samples)| TimeSeries {
            sample_rate,
            samples,
            port_name: ch.port_name.to_string(),
            lo_phase: ch.lo_phase,
            seed,
        })
        .collect())
}

/// Shot-noise-normalized one-sided power spectral density.
///
/// `psd_snu[k]` is the averaged periodogram divided by the window energy, so
/// unit-variance white noise is flat at 1 and a bin-centered tone of
/// amplitude `A` integrates, via [`Spectrum::band_power`], to `A²/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub freq: Vec<f64>,
    pub psd_snu: Vec<f64>,
    /// Bin spacing, Hz.
    pub rbw: f64,
    pub n_averages: usize,
    pub segment_len: usize,
    pub sample_rate: f64,
}

impl Spectrum {
    pub fn bin_of(&self, f: f64) -> usize {
        ((f / self.rbw).round().max(0.0) as usize).min(self.freq.len() - 1)
    }

    /// Variance carried by the bins within `[lo, hi]` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let scale = 2.0 / self.segment_len as f64;
        self.freq
            .iter()
            .zip(&self.psd_snu)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p * scale)
            .sum()
    }

    /// Median of the bins within `[lo, hi]` Hz.
    pub fn median_floor(&self, lo: f64, hi: f64) -> f64 {
        let vals: Vec<f64> = self
            .freq
            .iter()
            .zip(&self.psd_snu)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| *p)
            .collect();
        median(vals)
    }

    /// Median of the bins within `[lo, hi]` Hz, skipping ±3 bins around
    /// every frequency in `tones`.
    pub fn floor_excluding(&self, lo: f64, hi: f64, tones: &[f64]) -> f64 {
        let guard = TONE_GUARD_BINS * self.rbw;
        let vals: Vec<f64> = self
            .freq
            .iter()
            .zip(&self.psd_snu)
            .filter(|(f, _)| **f >= lo && **f <= hi && tones.iter().all(|t| (**f - t).abs() > guard))
            .map(|(_, p)| *p)
            .collect();
        median(vals)
    }

    /// Copy with every bin multiplied by `factor`.
    pub fn normalized(&self, factor: f64) -> Self {
        Self {
            psd_snu: self.psd_snu.iter().map(|p| p * factor).collect(),
            ..self.clone()
        }
    }
}

fn median(mut vals: Vec<f64>) -> f64 {
    if vals.is_empty() {
        return f64::NAN;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

fn hann(n: usize) -> Vec<f64> {
    // periodic Hann: bin-centered tones leak into exactly one neighbor each side
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate with Hann windows and 50% overlap, segment length
/// `round(sample_rate / rbw)`.
pub fn welch_psd(ts: &TimeSeries, rbw: f64) -> Result<Spectrum> {
    let len = ts.samples.len();
    if !(rbw.is_finite() && rbw > 0.0) {
        return Err(invalid("rbw must be positive"));
    }
    if rbw < ts.sample_rate / len as f64 {
        return Err(invalid(format!(
            "rbw {rbw} Hz is finer than the record allows ({} Hz)",
            ts.sample_rate / len as f64
        )));
    }
    let seg = ((ts.sample_rate / rbw).round() as usize).clamp(2, len);
    let step = (seg / 2).max(1);
    let window = hann(seg);
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(seg);
    let n_bins = seg / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut count = 0;
    let mut start = 0;
    while start + seg <= len {
        let chunk = &ts.samples[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let norm = 1.0 / (energy * count as f64);
    let bin = ts.sample_rate / seg as f64;
    Ok(Spectrum {
        freq: (0..n_bins).map(|k| k as f64 * bin).collect(),
        psd_snu: acc.into_iter().map(|a| a * norm).collect(),
        rbw: bin,
        n_averages: count,
        segment_len: seg,
        sample_rate: ts.sample_rate,
    })
}

/// Scale factor that brings a simulated vacuum-probe homodyne record to a
/// floor of exactly 1. Multiply spectra taken with the same settings by it.
pub fn shot_noise_calibration(sample_rate: f64, duration: f64, rbw: f64, seed: u64) -> Result<f64> {
    let n = (duration * sample_rate).round();
    if !(n >= 2.0) || n > MAX_SAMPLES as f64 {
        return Err(invalid("calibration record length out of range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n as usize).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ts = TimeSeries {
        sample_rate,
        samples,
        port_name: "vacuum".into(),
        lo_phase: QuadratureAngle::new(0.0),
        seed,
    };
    let spec = welch_psd(&ts, rbw)?;
    // skip the DC bin, which the per-segment mean removal empties
    let floor = spec.median_floor(spec.rbw, sample_rate / 2.0);
    Ok(1.0 / floor)
}

/// Peak and floor around one tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakMeasurement {
    pub f0: f64,
    /// Largest bin within ±1.5 bins of `f0`.
    pub peak: f64,
    /// Median bin over the ±50 kHz annulus with every tone excluded.
    pub floor: f64,
    /// Variance above the floor within ±1.5 bins (the tone's power, `A²/2`).
    pub tone_power: f64,
}

impl PeakMeasurement {
    /// Peak-to-floor ratio.
    pub fn snr(&self) -> f64 {
        self.peak / self.floor
    }

    /// Tone power above the floor relative to the floor density.
    pub fn excess(&self) -> f64 {
        (self.peak - self.floor) / self.floor
    }
}

/// Measures the peak at `f0` against its local floor.
///
/// `tones` lists every tone present in the record (it may include `f0`); their
/// bins are excluded from the floor. A tone other than `f0` inside the
/// annulus makes the reading ambiguous. For pure noise the peak/floor ratio
/// sits slightly above 1 because the peak is the largest of up to four bins.
pub fn measure_peak(spec: &Spectrum, f0: f64, tones: &[f64]) -> Result<PeakMeasurement> {
    let nyquist = spec.sample_rate / 2.0;
    if !(f0 > 0.0 && f0 < nyquist) {
        return Err(invalid(format!("f0 = {f0} Hz outside the spectrum span (0, {nyquist})")));
    }
    let half = PEAK_HALF_WIDTH_BINS * spec.rbw;
    if let Some(&other) = tones
        .iter()
        .find(|&&f| (f - f0).abs() > half && (f - f0).abs() <= FLOOR_ANNULUS_HZ + TONE_GUARD_BINS * spec.rbw)
    {
        return Err(Error::AmbiguousPeak { f0, other });
    }
    let guard = TONE_GUARD_BINS * spec.rbw;
    let floor_bins: Vec<f64> = spec
        .freq
        .iter()
        .zip(&spec.psd_snu)
        .filter(|(f, _)| {
            (**f - f0).abs() <= FLOOR_ANNULUS_HZ
                && (**f - f0).abs() > guard
                && tones.iter().all(|t| (**f - t).abs() > guard)
        })
        .map(|(_, p)| *p)
        .collect();
    if floor_bins.is_empty() {
        return Err(invalid("no floor bins around f0; rbw too coarse"));
    }
    let floor = median(floor_bins);
    let window: Vec<f64> = spec
        .freq
        .iter()
        .zip(&spec.psd_snu)
        .filter(|(f, _)| (**f - f0).abs() <= half)
        .map(|(_, p)| *p)
        .collect();
    let peak = window.iter().copied().fold(f64::MIN, f64::max);
    let scale = 2.0 / spec.segment_len as f64;
    let tone_power = window.iter().map(|p| (p - floor) * scale).sum::<f64>();
    Ok(PeakMeasurement {
        f0,
        peak,
        floor,
        tone_power,
    })
}

/// Peak-to-floor ratio of the tone at `f0`; see [`measure_peak`].
pub fn extract_peak_snr(spec: &Spectrum, f0: f64, tones: &[f64]) -> Result<f64> {
    Ok(measure_peak(spec, f0, tones)?.snr())
}

/// Hann-weighted lock-in estimate of a record's sinusoid amplitude at `freq`.
pub fn lock_in_amplitude(ts: &TimeSeries, freq: f64) -> f64 {
    let n = ts.samples.len();
    let w = hann(n);
    let omega = std::f64::consts::TAU * freq / ts.sample_rate;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wsum = 0.0;
    for (k, (x, wk)) in ts.samples.iter().zip(&w).enumerate() {
        acc += Complex64::from_polar(x * wk, -omega * k as f64);
        wsum += wk;
    }
    2.0 * acc.norm() / wsum
}

/// Lock-in readings at offsets away from `freq` give the noise level against
/// which the tone must stand out.
fn lock_in_noise(ts: &TimeSeries, freq: f64) -> f64 {
    let bin = ts.sample_rate / ts.samples.len() as f64;
    let offsets = [-37.0, -23.0, -11.0, 11.0, 23.0, 37.0];
    let readings: Vec<f64> = offsets
        .iter()
        .map(|o| freq + o * bin)
        .filter(|f| *f > 0.0 && *f < ts.sample_rate / 2.0)
        .map(|f| lock_in_amplitude(ts, f).powi(2))
        .collect();
    (readings.iter().sum::<f64>() / readings.len().max(1) as f64).sqrt()
}

/// Minimum tone-to-noise amplitude ratio for a calibration to succeed.
const CALIBRATION_DETECTION_RATIO: f64 = 5.0;

/// Balance gain `k = A₁ / A₃`, the ratio of the two records' amplitudes at a
/// calibration tone that carries equal physical magnitude in both channels.
pub fn calibrate_k(i1: &TimeSeries, i3: &TimeSeries, cal_tone: f64) -> Result<f64> {
    if i1.sample_rate != i3.sample_rate || i1.len() != i3.len() {
        return Err(invalid("records differ in sample rate or length"));
    }
    if !(cal_tone > 0.0 && cal_tone < i1.sample_rate / 2.0) {
        return Err(invalid(format!("calibration tone {cal_tone} Hz outside (0, Nyquist)")));
    }
    let mut amps = [0.0; 2];
    for (slot, ts) in amps.iter_mut().zip([i1, i3]) {
        let amp = lock_in_amplitude(ts, cal_tone);
        let noise = lock_in_noise(ts, cal_tone);
        if !(amp > CALIBRATION_DETECTION_RATIO * noise) {
            return Err(Error::CalibrationFailure(format!(
                "no tone at {cal_tone} Hz in {} record (amplitude {amp:.3e}, noise {noise:.3e})",
                ts.port_name
            )));
        }
        *slot = amp;
    }
    Ok(amps[0] / amps[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombineParams {
    pub theta: QuadratureAngle,
    pub balance_gain_k: f64,
}

impl CombineParams {
    pub fn new(theta: f64, balance_gain_k: f64) -> Result<Self> {
        if !(balance_gain_k.is_finite() && balance_gain_k > 0.0) {
            return Err(invalid(format!("balance gain k must be finite and > 0, got {balance_gain_k}")));
        }
        Ok(Self {
            theta: QuadratureAngle::new(theta),
            balance_gain_k,
        })
    }
}

/// `i(θ) = i₁ cosθ + k i₃ sinθ`, sample by sample.
///
/// `i1` should be recorded at LO phase 0 and `i3` at π/2.
pub fn combine_currents(i1: &TimeSeries, i3: &TimeSeries, params: &CombineParams) -> Result<TimeSeries> {
    if i1.sample_rate != i3.sample_rate || i1.len() != i3.len() {
        return Err(invalid("records differ in sample rate or length"));
    }
    if !(params.balance_gain_k.is_finite() && params.balance_gain_k > 0.0) {
        return Err(invalid("balance gain k must be finite and > 0"));
    }
    let (s, c) = params.theta.radians().sin_cos();
    let ks = params.balance_gain_k * s;
    Ok(TimeSeries {
        sample_rate: i1.sample_rate,
        samples: i1.samples.iter().zip(&i3.samples).map(|(a, b)| a * c + b * ks).collect(),
        port_name: format!("combined({:.4})", params.theta.radians()),
        lo_phase: params.theta,
        seed: i1.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{build_scheme, SchemeKind, SchemeParams};
    use approx::assert_abs_diff_eq;

    fn white(n: usize, seed: u64, sigma: f64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TimeSeries {
            sample_rate: 1e6,
            samples: (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sigma * z }).collect(),
            port_name: "test".into(),
            lo_phase: QuadratureAngle::new(0.0),
            seed,
        }
    }

    fn tone(n: usize, fs: f64, f: f64, amp: f64) -> TimeSeries {
        let w = std::f64::consts::TAU * f / fs;
        TimeSeries {
            sample_rate: fs,
            samples: (0..n).map(|k| amp * (w * k as f64).sin()).collect(),
            port_name: "tone".into(),
            lo_phase: QuadratureAngle::new(0.0),
            seed: 0,
        }
    }

    #[test]
    fn white_noise_floor_is_unity() {
        let ts = white(1 << 18, 3, 1.0);
        let spec = welch_psd(&ts, 1e6 / 512.0).unwrap();
        assert!(spec.n_averages >= 200);
        let floor = spec.median_floor(spec.rbw, 5e5);
        // median of an averaged periodogram sits just below its mean
        assert!((floor - 1.0).abs() < 0.02, "floor {floor}");
        let mean: f64 = spec.psd_snu[1..spec.psd_snu.len() - 1].iter().sum::<f64>() / (spec.psd_snu.len() - 2) as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn tone_integrates_to_half_square_amplitude() {
        let fs = 1e6;
        let ts = tone(1 << 16, fs, 125e3, 0.7);
        let spec = welch_psd(&ts, fs / 256.0).unwrap();
        let p = spec.band_power(125e3 - 1.5 * spec.rbw, 125e3 + 1.5 * spec.rbw);
        assert_abs_diff_eq!(p, 0.49 / 2.0, epsilon = 1e-9);
        // off-center: scalloping keeps at least 80% inside ±1.5 bins for Hann
        let ts = tone(1 << 16, fs, 125e3 + 0.5 * spec.rbw, 0.7);
        let spec2 = welch_psd(&ts, fs / 256.0).unwrap();
        let f = 125e3 + 0.5 * spec.rbw;
        let p2 = spec2.band_power(f - 1.5 * spec.rbw, f + 1.5 * spec.rbw);
        assert!(p2 > 0.8 * 0.245 && p2 <= 0.245 + 1e-9, "p2 {p2}");
    }

    #[test]
    fn rbw_too_fine_is_rejected() {
        let ts = white(1000, 1, 1.0);
        assert!(welch_psd(&ts, 100.0).is_err());
        assert!(welch_psd(&ts, 1000.0).is_ok());
    }

    #[test]
    fn shot_noise_calibration_properties() {
        let a = shot_noise_calibration(1e6, 0.4, 2e3, 1).unwrap();
        let b = shot_noise_calibration(1e6, 0.4, 2e3, 2).unwrap();
        assert!((a - 1.0).abs() < 0.02 && (b - 1.0).abs() < 0.02);
        assert!((a / b - 1.0).abs() < 0.02);
        let c = shot_noise_calibration(1e6, 0.4, 4e3, 1).unwrap();
        assert!((c - 1.0).abs() < 0.02);

        // applying the factor and re-measuring leaves a second factor of 1
        let ts = white(400_000, 1, 1.0);
        let spec = welch_psd(&ts, 2e3).unwrap().normalized(a);
        let second = 1.0 / spec.median_floor(spec.rbw, 5e5);
        assert!((second - 1.0).abs() < 0.02, "second {second}");
    }

    #[test]
    fn peak_extraction() {
        let fs = 1e6;
        let n = 1 << 18;
        let rbw = fs / 500.0;
        let noise = white(n, 5, 1.0);
        let spec = welch_psd(&noise, rbw).unwrap();
        let snr = extract_peak_snr(&spec, 200e3, &[200e3]).unwrap();
        assert!(snr > 0.9 && snr < 1.3, "noise-only snr {snr}");

        // tone whose bin sits at 9x the unit floor: peak/floor = 10
        // peak bin of a bin-centered tone: (A/2)^2 (N/2)^2 / (3N/8) = A^2 N / 6
        let amp = (9.0 * 6.0 / 500.0f64).sqrt();
        let t = tone(n, fs, 200e3, amp);
        let mixed = TimeSeries {
            samples: noise.samples.iter().zip(&t.samples).map(|(a, b)| a + b).collect(),
            ..noise.clone()
        };
        let spec = welch_psd(&mixed, rbw).unwrap();
        let snr = extract_peak_snr(&spec, 200e3, &[200e3]).unwrap();
        assert!((snr / 10.0 - 1.0).abs() < 0.05, "snr {snr}");

        assert!(matches!(
            measure_peak(&spec, 200e3, &[200e3, 230e3]),
            Err(Error::AmbiguousPeak { .. })
        ));
        assert!(measure_peak(&spec, 2e6, &[]).is_err());
    }

    #[test]
    fn k_calibration() {
        let fs = 1e6;
        let n = 200_000;
        let base = tone(n, fs, 100e3, 1.0);
        let noisy = |seed| TimeSeries {
            samples: base.samples.iter().zip(&white(n, seed, 1.0).samples).map(|(a, b)| a + b).collect(),
            ..base.clone()
        };
        let (i1, i3) = (noisy(1), noisy(2));
        let k = calibrate_k(&i1, &i3, 100e3).unwrap();
        assert!((k - 1.0).abs() < 0.02, "k {k}");
        // channel 3 amplified by g needs k = 1/g to rebalance
        let k = calibrate_k(&i1, &i3.scaled(0.84), 100e3).unwrap();
        assert!((k * 0.84 - 1.0).abs() < 0.02, "k {k}");
        let k2 = calibrate_k(&i1.scaled(3.0), &i3.scaled(3.0 * 0.84), 100e3).unwrap();
        assert_abs_diff_eq!(k, k2, epsilon = 1e-12);
        let silent = white(n, 9, 1.0);
        assert!(matches!(calibrate_k(&i1, &silent, 100e3), Err(Error::CalibrationFailure(_))));
    }

    #[test]
    fn combination_basics() {
        let a = white(1000, 1, 1.0);
        let b = white(1000, 2, 1.0);
        let c = combine_currents(&a, &b, &CombineParams::new(0.0, 0.84).unwrap()).unwrap();
        assert_eq!(c.samples, a.samples);
        assert!(combine_currents(&a, &white(999, 2, 1.0), &CombineParams::new(0.3, 1.0).unwrap()).is_err());
        assert!(CombineParams::new(0.3, 0.0).is_err());
        assert!(CombineParams::new(0.3, f64::INFINITY).is_err());
    }

    #[test]
    fn simulation_is_deterministic_and_checks_aliasing() {
        let bs = build_scheme(&SchemeParams::new(SchemeKind::Bs)).unwrap();
        let a = simulate_currents(&bs, 1e-3, 10e6, 7).unwrap();
        let b = simulate_currents(&bs, 1e-3, 10e6, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_currents(&bs, 1e-3, 10e6, 8).unwrap();
        assert_ne!(a[0].samples, c[0].samples);
        assert!(matches!(simulate_currents(&bs, 1e-3, 2e6, 7), Err(Error::Aliasing { .. })));
        assert!(simulate_currents(&bs, 1e-9, 10e6, 7).is_err());
    }

    #[test]
    fn bs_shot_noise_and_port_correlation() {
        let mut p = SchemeParams::new(SchemeKind::Bs);
        for t in &mut p.tones {
            t.depth = 0.0;
        }
        let bs = build_scheme(&p).unwrap();
        let ts = simulate_currents(&bs, 0.02, 10e6, 11).unwrap();
        let n = ts[0].len() as f64;
        for t in &ts {
            // standard error of a variance estimate is sqrt(2/n)
            assert!((t.variance() - 1.0).abs() < 3.0 * (2.0 / n).sqrt() + 1e-3, "var {}", t.variance());
        }
        let model = bs.port_model().unwrap();
        let cov: f64 = ts[0].samples.iter().zip(&ts[1].samples).map(|(a, b)| a * b).sum::<f64>() / n;
        assert!((cov - model.covariance[(0, 1)]).abs() < 3.0 / n.sqrt(), "cov {cov}");
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream_seed(1, 0), substream_seed(1, 1));
        assert_eq!(substream_seed(5, 3), substream_seed(5, 3));
    }
}
