//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, which keeps
//! the page free of generated glue types.

use serde::Serialize;
use su11_core::schemes::{best_port_snr, dark_fringe_objective, enhancement_report, PhaseSetting};
use su11_core::spectra::{shot_noise_calibration, simulate_currents, welch_psd};
use su11_core::{build_scheme, LossBudget, SchemeInstance, SchemeKind, SchemeParams};
use wasm_bindgen::prelude::*;

fn sui(g1: f64, g2: f64, eta_internal: f64) -> Result<SchemeInstance, String> {
    let params = SchemeParams {
        gain_g1: g1,
        gain_g2: g2,
        interferometer_phase: PhaseSetting::AutoDarkFringe,
        losses: LossBudget {
            eta_internal,
            ..LossBudget::EXPERIMENT
        },
        ..SchemeParams::new(SchemeKind::Sui)
    };
    build_scheme(&params).map_err(|e| e.to_string())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Debug, Serialize)]
pub struct FringeCurve {
    pub phi: Vec<f64>,
    pub output_photons: Vec<f64>,
    pub snr_x: Vec<f64>,
    pub dark_fringe: f64,
}

/// Output photon number and amplitude-tone SNR against the interferometer phase.
pub fn fringe_curve_native(g1: f64, g2: f64, eta_internal: f64, points: usize) -> Result<FringeCurve, String> {
    let s = sui(g1, g2, eta_internal)?;
    let n = points.clamp(2, 2000);
    let mut out = FringeCurve {
        phi: Vec::with_capacity(n),
        output_photons: Vec::with_capacity(n),
        snr_x: Vec::with_capacity(n),
        dark_fringe: s.interferometer_phase,
    };
    for k in 0..n {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64;
        out.phi.push(phi);
        out.output_photons.push(dark_fringe_objective(&s, phi).map_err(|e| e.to_string())?);
        out.snr_x.push(best_port_snr(&s.with_phase(phi), 0).map_err(|e| e.to_string())?.1);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct GainCurve {
    pub g2: Vec<f64>,
    pub sui: Vec<f64>,
    pub amp: Vec<f64>,
    pub bs: Vec<f64>,
    pub ratio_vs_amp: Vec<f64>,
}

/// Best-port X SNR of the three schemes as OPA2's gain grows.
pub fn snr_vs_gain_native(g1: f64, g2_max: f64, eta_internal: f64, points: usize) -> Result<GainCurve, String> {
    let n = points.clamp(2, 500);
    let lo = g1.max(1.0);
    let mut out = GainCurve {
        g2: Vec::new(),
        sui: Vec::new(),
        amp: Vec::new(),
        bs: Vec::new(),
        ratio_vs_amp: Vec::new(),
    };
    for k in 0..n {
        let g2 = lo + (g2_max.max(lo) - lo) * k as f64 / (n - 1) as f64;
        let s = sui(g1, g2, eta_internal)?;
        let best = |s: &SchemeInstance| best_port_snr(s, 0).map(|b| b.1).map_err(|e| e.to_string());
        let amp = s.amp_baseline();
        out.g2.push(g2);
        out.sui.push(best(&s)?);
        out.amp.push(best(&amp)?);
        out.bs.push(best(&s.bs_baseline())?);
        let rep = enhancement_report(&s, &amp).map_err(|e| e.to_string())?;
        out.ratio_vs_amp.push(rep.tones[0].ratio);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct SpectrumPair {
    pub freq_hz: Vec<f64>,
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
    pub rbw_hz: f64,
    pub n_avg: usize,
}

const DEMO_RATE: f64 = 10e6;
const DEMO_RBW: f64 = 10e3;

/// Shot-noise-normalized spectra of the signal and idler photocurrents.
pub fn simulate_spectrum_native(g2: f64, eta_internal: f64, duration: f64, seed: u64) -> Result<SpectrumPair, String> {
    let duration = duration.clamp(1e-3, 0.2);
    let s = sui(2.0, g2, eta_internal)?;
    let err = |e: su11_core::Error| e.to_string();
    let snu = shot_noise_calibration(DEMO_RATE, duration, DEMO_RBW, seed ^ 0x5eed).map_err(err)?;
    let currents = simulate_currents(&s, duration, DEMO_RATE, seed).map_err(err)?;
    let signal = welch_psd(&currents[0], DEMO_RBW).map_err(err)?.normalized(snu);
    let idler = welch_psd(&currents[1], DEMO_RBW).map_err(err)?.normalized(snu);
    Ok(SpectrumPair {
        freq_hz: signal.freq.clone(),
        rbw_hz: signal.rbw,
        n_avg: signal.n_averages,
        signal: signal.psd_snu,
        idler: idler.psd_snu,
    })
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| json(&v)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fringe_curve(g1: f64, g2: f64, eta_internal: f64, points: usize) -> Result<String, JsError> {
    js(fringe_curve_native(g1, g2, eta_internal, points))
}

#[wasm_bindgen]
pub fn snr_vs_gain(g1: f64, g2_max: f64, eta_internal: f64, points: usize) -> Result<String, JsError> {
    js(snr_vs_gain_native(g1, g2_max, eta_internal, points))
}

#[wasm_bindgen]
pub fn simulate_spectrum(g2: f64, eta_internal: f64, duration: f64, seed: u64) -> Result<String, JsError> {
    js(simulate_spectrum_native(g2, eta_internal, duration, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fringe_minimum_matches_dark_fringe() {
        let c = fringe_curve_native(2.0, 9.0, 0.41, 361).unwrap();
        let (imin, _) = c
            .output_photons
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((c.phi[imin] - c.dark_fringe).abs() < 0.05, "{} vs {}", c.phi[imin], c.dark_fringe);
        assert!(c.snr_x.iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn gain_curve_orders_schemes() {
        let c = snr_vs_gain_native(2.0, 20.0, 1.0, 8).unwrap();
        assert_eq!(c.g2.len(), 8);
        let last = c.g2.len() - 1;
        assert!(c.sui[last] > c.amp[last]);
        assert!(c.ratio_vs_amp.iter().all(|r| *r > 0.0));
    }

    #[test]
    fn spectrum_is_deterministic() {
        let a = simulate_spectrum_native(9.0, 0.41, 0.005, 7).unwrap();
        let b = simulate_spectrum_native(9.0, 0.41, 0.005, 7).unwrap();
        assert_eq!(a.signal, b.signal);
        assert_eq!(a.freq_hz.len(), a.signal.len());
        assert!(json(&a).starts_with('{'));
    }

    #[test]
    fn bad_parameters_are_errors() {
        assert!(fringe_curve_native(0.5, 9.0, 0.4, 10).is_err());
        assert!(simulate_spectrum_native(9.0, 1.5, 0.01, 1).is_err());
    }
}
