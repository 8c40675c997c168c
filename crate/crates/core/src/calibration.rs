//! One-parameter fit of the SUI internal efficiency to measured SUI/AMP
//! comparisons.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::schemes::{build_scheme, enhancement_report, GainReading, LossBudget, PortName, SchemeKind, SchemeParams};

/// Measured SUI/AMP comparison that the fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationTarget {
    pub ratio_x: f64,
    pub ratio_y: f64,
    pub ratio_tolerance: f64,
    /// SUI floor over AMP floor at the signal port.
    pub floor_ratio: f64,
    pub floor_tolerance: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl CalibrationTarget {
    /// SNRs 1.62 and 1.55 (SUI) against 1.29 and 1.22 (AMP); floor 20% lower.
    pub const EXPERIMENT: CalibrationTarget = CalibrationTarget {
        ratio_x: 1.62 / 1.29,
        ratio_y: 1.55 / 1.22,
        ratio_tolerance: 0.05,
        floor_ratio: 0.80,
        floor_tolerance: 0.03,
        eta_min: 0.3,
        eta_max: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub eta_internal: f64,
    pub ratio_x: f64,
    pub ratio_y: f64,
    pub floor_ratio_signal: f64,
    pub floor_ratio_idler: f64,
}

impl CalibrationPoint {
    /// Largest deviation from the target, each term in units of its tolerance.
    pub fn normalized_error(&self, target: &CalibrationTarget) -> f64 {
        let ex = (self.ratio_x - target.ratio_x).abs() / target.ratio_tolerance;
        let ey = (self.ratio_y - target.ratio_y).abs() / target.ratio_tolerance;
        let ef = (self.floor_ratio_signal - target.floor_ratio).abs() / target.floor_tolerance;
        ex.max(ey).max(ef)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationFit {
    pub point: CalibrationPoint,
    pub target: CalibrationTarget,
    /// Max normalized error at the fit; ≤ 1 means every target is met.
    pub error: f64,
    pub within_target: bool,
}

/// The SUI at the experimental operating point: gains 2 and 9, detection
/// efficiencies 0.72 / 0.62, tap detection 0.80, auto dark fringe.
pub fn experiment_template() -> SchemeParams {
    SchemeParams {
        losses: LossBudget::EXPERIMENT,
        ..SchemeParams::new(SchemeKind::Sui)
    }
}

/// SUI/AMP ratios with the template's internal efficiency replaced by `eta`.
///
/// The X ratio uses the first tone whose angle is 0, the Y ratio the first at
/// π/2; each is read at its best port in either scheme.
pub fn evaluate(template: &SchemeParams, eta: f64) -> Result<CalibrationPoint> {
    if template.kind != SchemeKind::Sui {
        return Err(invalid("calibration template must be an SUI scheme"));
    }
    let mut params = template.clone();
    params.losses.eta_internal = eta;
    let sui = build_scheme(&params)?;
    let report = enhancement_report(&sui, &sui.amp_baseline())?;
    let find = |angle: f64| {
        report
            .tones
            .iter()
            .find(|t| (t.angle - angle).abs() < 1e-9)
            .map(|t| t.ratio)
            .ok_or_else(|| invalid(format!("template has no tone at angle {angle}")))
    };
    let floor = |port: PortName| {
        report
            .floor_ratios
            .iter()
            .find(|f| f.port == port)
            .map(|f| f.ratio)
            .unwrap_or(f64::NAN)
    };
    Ok(CalibrationPoint {
        eta_internal: eta,
        ratio_x: find(0.0)?,
        ratio_y: find(std::f64::consts::FRAC_PI_2)?,
        floor_ratio_signal: floor(PortName::Signal),
        floor_ratio_idler: floor(PortName::Idler),
    })
}

const GRID_POINTS: usize = 141;

/// Minimizes the max normalized error over `eta_internal` in the target range:
/// grid scan, then golden-section refinement around the best grid point.
pub fn fit_internal_efficiency(template: &SchemeParams, target: &CalibrationTarget) -> Result<CalibrationFit> {
    if !(target.eta_min > 0.0 && target.eta_min < target.eta_max && target.eta_max <= 1.0) {
        return Err(invalid("calibration range must satisfy 0 < eta_min < eta_max ≤ 1"));
    }
    let step = (target.eta_max - target.eta_min) / (GRID_POINTS - 1) as f64;
    let err = |eta: f64| evaluate(template, eta).map(|p| p.normalized_error(target));
    let mut best = (target.eta_min, f64::INFINITY);
    for k in 0..GRID_POINTS {
        let eta = target.eta_min + k as f64 * step;
        let e = err(eta)?;
        if e < best.1 {
            best = (eta, e);
        }
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (best.0 - step).max(target.eta_min);
    let mut hi = (best.0 + step).min(target.eta_max);
    while hi - lo > 1e-6 {
        let x1 = hi - invphi * (hi - lo);
        let x2 = lo + invphi * (hi - lo);
        if err(x1)? < err(x2)? {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mid = 0.5 * (lo + hi);
    let eta = if err(mid)? < best.1 { mid } else { best.0 };
    let point = evaluate(template, eta)?;
    let error = point.normalized_error(target);
    Ok(CalibrationFit {
        point,
        target: *target,
        error,
        within_target: error <= 1.0,
    })
}

/// Fit quality under both readings of the quoted OPA gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReadingComparison {
    pub amplitude: CalibrationFit,
    pub power: CalibrationFit,
    pub preferred: GainReading,
}

pub fn compare_gain_readings(template: &SchemeParams, target: &CalibrationTarget) -> Result<GainReadingComparison> {
    let with = |reading| {
        let p = SchemeParams {
            gain_reading: reading,
            ..template.clone()
        };
        fit_internal_efficiency(&p, target)
    };
    let amplitude = with(GainReading::Amplitude)?;
    let power = with(GainReading::Power)?;
    let preferred = if amplitude.error <= power.error {
        GainReading::Amplitude
    } else {
        GainReading::Power
    };
    Ok(GainReadingComparison {
        amplitude,
        power,
        preferred,
    })
}
