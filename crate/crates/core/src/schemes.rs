//! The three joint-measurement schemes and their single-shot SNRs.
//!
//! Mode layout is the same for every scheme: mode 0 carries the probe and ends
//! at the signal port, mode 1 ends at the idler port (the second beam-splitter
//! output for [`SchemeKind::Bs`]) and mode 2, present only with the tap, ends
//! at the tap port.
//!
//! * BS: coherent probe, modulators, 50/50 splitter.
//! * AMP: coherent probe, modulators, one parametric amplifier.
//! * SUI: coherent seed, OPA1, modulators on the signal arm, internal loss,
//!   OPA2 with pump phase `φ`.
//!
//! Idler-port LO phases are referenced to the phase-conjugated field, as they
//! are when an LO is locked on the modulation it reads: a port locked to `φ`
//! on an amplifier idler measures the physical quadrature at `−φ`. With this
//! referencing a tone at angle `θ` appears at every port with power
//! `∝ cos²(θ − φ)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conventions::{tone_displacement, x_index, y_index};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{Circuit, Element, GaussianState, OpaParams, QuadratureAngle};
use crate::oracle::reference_enhancements;

/// Depth above which the displacement picture of a modulation is questionable.
pub const WEAK_MODULATION_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Bs,
    Sui,
    Amp,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Bs => "bs",
            SchemeKind::Sui => "sui",
            SchemeKind::Amp => "amp",
        })
    }
}

/// How a quoted "gain" maps onto the amplitude gain `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainReading {
    /// The quoted value is `G`.
    #[default]
    Amplitude,
    /// The quoted value is the intensity gain `G²`.
    Power,
}

impl GainReading {
    pub fn amplitude_gain(self, quoted: f64) -> f64 {
        match self {
            GainReading::Amplitude => quoted,
            GainReading::Power => quoted.sqrt(),
        }
    }
}

/// Arms of the SUI that see the internal efficiency `eta_internal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InternalLossArms {
    /// Only the idler path between the amplifiers. The signal path is shared
    /// with the classical amplifier scheme and is folded into the probe.
    #[default]
    Idler,
    /// Both paths; the amplifier scheme's probe sees the same loss.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationTone {
    /// Hz.
    pub frequency: f64,
    pub depth: f64,
    pub angle: QuadratureAngle,
}

impl ModulationTone {
    pub fn new(frequency: f64, depth: f64, angle: f64) -> Self {
        Self {
            frequency,
            depth,
            angle: QuadratureAngle::new(angle),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    pub eta_internal: f64,
    pub eta_signal_det: f64,
    pub eta_idler_det: f64,
    pub eta_tap_det: f64,
}

impl LossBudget {
    pub const LOSSLESS: LossBudget = LossBudget {
        eta_internal: 1.0,
        eta_signal_det: 1.0,
        eta_idler_det: 1.0,
        eta_tap_det: 1.0,
    };

    /// Detection efficiencies of the experiment; internal efficiency left at 1.
    pub const EXPERIMENT: LossBudget = LossBudget {
        eta_internal: 1.0,
        eta_signal_det: 0.72,
        eta_idler_det: 0.62,
        eta_tap_det: 0.80,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_internal", self.eta_internal),
            ("eta_signal_det", self.eta_signal_det),
            ("eta_idler_det", self.eta_idler_det),
            ("eta_tap_det", self.eta_tap_det),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfiguration(format!(
                    "losses.{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn detection(&self, port: PortName) -> f64 {
        match port {
            PortName::Signal => self.eta_signal_det,
            PortName::Idler => self.eta_idler_det,
            PortName::Tap => self.eta_tap_det,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortName {
    Signal,
    Idler,
    Tap,
}

impl PortName {
    pub fn mode(self) -> usize {
        match self {
            PortName::Signal => 0,
            PortName::Idler => 1,
            PortName::Tap => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PortName::Signal => "signal",
            PortName::Idler => "idler",
            PortName::Tap => "tap",
        }
    }
}

impl fmt::Display for PortName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One homodyne readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneChannel {
    pub port_name: PortName,
    pub lo_phase: QuadratureAngle,
    pub efficiency: f64,
}

/// Interferometer phase of an SUI: fixed, or searched for at build time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhaseSetting {
    Fixed(f64),
    AutoDarkFringe,
}

/// Everything needed to build a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub kind: SchemeKind,
    pub probe_photon_number: f64,
    /// OPA1 gain (SUI only), in the units of `gain_reading`.
    pub gain_g1: f64,
    /// OPA2 gain (SUI) or amplifier gain (AMP), in the units of `gain_reading`.
    pub gain_g2: f64,
    pub gain_reading: GainReading,
    pub interferometer_phase: PhaseSetting,
    pub losses: LossBudget,
    pub internal_loss_arms: InternalLossArms,
    pub tones: Vec<ModulationTone>,
    /// Explicit channels; `None` uses [`default_ports`].
    pub ports: Option<Vec<HomodyneChannel>>,
    pub tap_enabled: bool,
}

impl SchemeParams {
    /// Lossless two-tone plan (X tone at 0.8 MHz, Y tone at 1.2 MHz).
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            probe_photon_number: 1e4,
            gain_g1: 2.0,
            gain_g2: 9.0,
            gain_reading: GainReading::Amplitude,
            interferometer_phase: PhaseSetting::Fixed(PI),
            losses: LossBudget::LOSSLESS,
            internal_loss_arms: InternalLossArms::Idler,
            tones: vec![
                ModulationTone::new(0.8e6, 0.01, 0.0),
                ModulationTone::new(1.2e6, 0.01, FRAC_PI_2),
            ],
            ports: None,
            tap_enabled: false,
        }
    }
}

/// Signal at `φ₁ = 0`, idler at `φ₂ = π/2`, tap at `φ₃ = π/4`, with the
/// budget's detection efficiencies.
pub fn default_ports(losses: &LossBudget, tap_enabled: bool) -> Vec<HomodyneChannel> {
    let mut ports = vec![
        HomodyneChannel {
            port_name: PortName::Signal,
            lo_phase: QuadratureAngle::new(0.0),
            efficiency: losses.eta_signal_det,
        },
        HomodyneChannel {
            port_name: PortName::Idler,
            lo_phase: QuadratureAngle::new(FRAC_PI_2),
            efficiency: losses.eta_idler_det,
        },
    ];
    if tap_enabled {
        ports.push(HomodyneChannel {
            port_name: PortName::Tap,
            lo_phase: QuadratureAngle::new(FRAC_PI_4),
            efficiency: losses.eta_tap_det,
        });
    }
    ports
}

/// An immutable, validated measurement scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeInstance {
    pub kind: SchemeKind,
    pub probe_photon_number: f64,
    pub opa1: OpaParams,
    pub opa2_or_amp: OpaParams,
    pub interferometer_phase: f64,
    pub losses: LossBudget,
    pub internal_loss_arms: InternalLossArms,
    pub tones: Vec<ModulationTone>,
    pub ports: Vec<HomodyneChannel>,
    pub tap_enabled: bool,
}

/// Which displacements to include when compiling a scheme to a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Drive {
    /// Carrier and every tone.
    Full,
    /// Carrier only (tones average to zero in time).
    Carrier,
    /// A single tone, no carrier.
    Tone(usize),
    /// Nothing; noise only.
    None,
}

/// Where to stop compiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    /// Just after the last amplifier or splitter, before any tap.
    Interferometer,
    /// At the detectors, before detection losses.
    MeasurementPlane,
    /// After detection losses.
    Detected,
}

/// Build a scheme, resolving the gain reading and the interferometer phase.
pub fn build_scheme(params: &SchemeParams) -> Result<SchemeInstance> {
    if !params.probe_photon_number.is_finite() || params.probe_photon_number < 0.0 {
        return Err(Error::InvalidConfiguration(format!(
            "scheme.probe_photon_number must be finite and >= 0, got {}",
            params.probe_photon_number
        )));
    }
    let opa_gain = |name: &str, quoted: f64| {
        OpaParams::new(params.gain_reading.amplitude_gain(quoted), 0.0)
            .map_err(|e| Error::InvalidConfiguration(format!("scheme.{name}: {e}")))
    };
    let opa1 = match params.kind {
        SchemeKind::Sui => opa_gain("gain_g1", params.gain_g1)?,
        _ => OpaParams::new(1.0, 0.0)?,
    };
    let opa2 = match params.kind {
        SchemeKind::Bs => OpaParams::new(1.0, 0.0)?,
        _ => opa_gain("gain_g2", params.gain_g2)?,
    };
    let ports = params
        .ports
        .clone()
        .unwrap_or_else(|| default_ports(&params.losses, params.tap_enabled));
    let fixed_phase = match params.interferometer_phase {
        PhaseSetting::Fixed(phi) => phi,
        PhaseSetting::AutoDarkFringe => PI,
    };
    let mut scheme = SchemeInstance {
        kind: params.kind,
        probe_photon_number: params.probe_photon_number,
        opa1,
        opa2_or_amp: opa2,
        interferometer_phase: if params.kind == SchemeKind::Sui { fixed_phase } else { 0.0 },
        losses: params.losses,
        internal_loss_arms: params.internal_loss_arms,
        tones: params.tones.clone(),
        ports,
        tap_enabled: params.tap_enabled,
    };
    scheme.validate()?;
    if params.kind == SchemeKind::Sui && params.interferometer_phase == PhaseSetting::AutoDarkFringe {
        scheme.interferometer_phase = find_dark_fringe(&scheme)?.phi;
    }
    Ok(scheme)
}

impl SchemeInstance {
    pub fn validate(&self) -> Result<()> {
        self.losses.validate()?;
        if !self.interferometer_phase.is_finite() {
            return Err(Error::InvalidConfiguration("scheme.interferometer_phase must be finite".into()));
        }
        let expected = if self.tap_enabled { 3 } else { 2 };
        if self.ports.len() != expected {
            return Err(Error::InvalidConfiguration(format!(
                "ports: {} scheme with tap={} needs exactly {expected} ports, got {}",
                self.kind,
                self.tap_enabled,
                self.ports.len()
            )));
        }
        let mut seen = Vec::new();
        for ch in &self.ports {
            if seen.contains(&ch.port_name) {
                return Err(Error::InvalidConfiguration(format!("ports: duplicate port {}", ch.port_name)));
            }
            if ch.port_name == PortName::Tap && !self.tap_enabled {
                return Err(Error::InvalidConfiguration("ports: tap port requires ports.tap = true".into()));
            }
            if !(0.0..=1.0).contains(&ch.efficiency) {
                return Err(Error::InvalidConfiguration(format!(
                    "ports: efficiency of {} must lie in [0, 1], got {}",
                    ch.port_name, ch.efficiency
                )));
            }
            seen.push(ch.port_name);
        }
        for (i, tone) in self.tones.iter().enumerate() {
            if !(tone.frequency.is_finite() && tone.frequency > 0.0) {
                return Err(Error::InvalidConfiguration(format!("tones[{i}].frequency must be > 0")));
            }
            if !(tone.depth.is_finite() && tone.depth >= 0.0) {
                return Err(Error::InvalidConfiguration(format!("tones[{i}].depth must be >= 0")));
            }
            if tone.depth > WEAK_MODULATION_LIMIT {
                log::warn!(
                    "tones[{i}].depth = {} exceeds the weak-modulation limit {WEAK_MODULATION_LIMIT}",
                    tone.depth
                );
            }
            if self.tones[..i].iter().any(|t| t.frequency == tone.frequency) {
                return Err(Error::InvalidConfiguration(format!(
                    "tones[{i}].frequency {} Hz is not unique",
                    tone.frequency
                )));
            }
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        if self.tap_enabled {
            3
        } else {
            2
        }
    }

    pub fn channel(&self, port: PortName) -> Result<&HomodyneChannel> {
        self.ports
            .iter()
            .find(|c| c.port_name == port)
            .ok_or_else(|| invalid(format!("scheme has no {port} port")))
    }

    fn tone(&self, tone_id: usize) -> Result<&ModulationTone> {
        self.tones
            .get(tone_id)
            .ok_or_else(|| invalid(format!("tone {tone_id} out of range ({} tones)", self.tones.len())))
    }

    /// Physical quadrature angle read by a channel (see the module docs on
    /// idler referencing).
    pub fn readout_angle(&self, channel: &HomodyneChannel) -> QuadratureAngle {
        let conjugate = channel.port_name == PortName::Idler && self.kind != SchemeKind::Bs;
        if conjugate {
            QuadratureAngle::new(-channel.lo_phase.radians())
        } else {
            channel.lo_phase
        }
    }

    /// Same scheme with a different interferometer phase.
    pub fn with_phase(&self, phi: f64) -> Self {
        Self {
            interferometer_phase: phi,
            ..self.clone()
        }
    }

    /// Same scheme with one channel's detection efficiency replaced.
    pub fn with_port_efficiency(&self, port: PortName, eta: f64) -> Result<Self> {
        let mut out = self.clone();
        let ch = out
            .ports
            .iter_mut()
            .find(|c| c.port_name == port)
            .ok_or_else(|| invalid(format!("scheme has no {port} port")))?;
        ch.efficiency = eta;
        out.validate()?;
        Ok(out)
    }

    /// Same scheme with one channel's LO phase replaced.
    pub fn with_port_lo(&self, port: PortName, lo_phase: f64) -> Result<Self> {
        let mut out = self.clone();
        let ch = out
            .ports
            .iter_mut()
            .find(|c| c.port_name == port)
            .ok_or_else(|| invalid(format!("scheme has no {port} port")))?;
        ch.lo_phase = QuadratureAngle::new(lo_phase);
        Ok(out)
    }

    fn compile(&self, drive: Drive, stage: Stage) -> Result<Circuit> {
        let i_ps = self.probe_photon_number;
        let mut c = Circuit::new(self.n_modes());
        let carrier = matches!(drive, Drive::Full | Drive::Carrier);
        let push_tones = |c: &mut Circuit| -> Result<()> {
            let selected: Vec<usize> = match drive {
                Drive::Full => (0..self.tones.len()).collect(),
                Drive::Tone(j) => {
                    self.tone(j)?;
                    vec![j]
                }
                _ => Vec::new(),
            };
            for j in selected {
                let t = &self.tones[j];
                let (dx, dy) = tone_displacement(i_ps, t.depth, t.angle.radians());
                c.push(Element::Displace { mode: 0, dx, dy });
            }
            Ok(())
        };
        let eta = self.losses.eta_internal;
        match self.kind {
            SchemeKind::Bs => {
                if carrier {
                    c.push(Element::Displace { mode: 0, dx: 2.0 * i_ps.sqrt(), dy: 0.0 });
                }
                push_tones(&mut c)?;
                c.push(Element::BeamSplitter { mode_a: 0, mode_b: 1, transmissivity: 0.5, phase: PI });
            }
            SchemeKind::Amp => {
                if carrier {
                    c.push(Element::Displace { mode: 0, dx: 2.0 * i_ps.sqrt(), dy: 0.0 });
                }
                push_tones(&mut c)?;
                if self.internal_loss_arms == InternalLossArms::Both {
                    c.push(Element::Loss { mode: 0, eta });
                }
                c.push(Element::Squeezer { mode_a: 0, mode_b: 1, opa: self.opa2_or_amp.with_pump_phase(0.0) });
            }
            SchemeKind::Sui => {
                if carrier {
                    let seed = 2.0 * i_ps.sqrt() / self.opa1.gain();
                    c.push(Element::Displace { mode: 0, dx: seed, dy: 0.0 });
                }
                c.push(Element::Squeezer { mode_a: 0, mode_b: 1, opa: self.opa1.with_pump_phase(0.0) });
                push_tones(&mut c)?;
                if self.internal_loss_arms == InternalLossArms::Both {
                    c.push(Element::Loss { mode: 0, eta });
                }
                c.push(Element::Loss { mode: 1, eta });
                c.push(Element::Squeezer {
                    mode_a: 0,
                    mode_b: 1,
                    opa: self.opa2_or_amp.with_pump_phase(self.interferometer_phase),
                });
            }
        }
        if stage == Stage::Interferometer {
            return Ok(c);
        }
        if self.tap_enabled {
            c.push(Element::BeamSplitter { mode_a: 0, mode_b: 2, transmissivity: 0.5, phase: PI });
        }
        if stage == Stage::Detected {
            for ch in &self.ports {
                c.push(Element::Loss { mode: ch.port_name.mode(), eta: ch.efficiency });
            }
        }
        Ok(c)
    }

    /// Noise-only circuit (every displacement removed), optionally including
    /// the detection losses of each channel.
    pub fn noise_circuit(&self, include_detection: bool) -> Result<Circuit> {
        let stage = if include_detection { Stage::Detected } else { Stage::MeasurementPlane };
        self.compile(Drive::None, stage)
    }

    /// State at the detectors (before detection losses) with carrier and
    /// every tone applied as static displacements.
    pub fn output_state(&self) -> Result<OutputState> {
        let state = self.compile(Drive::Full, Stage::MeasurementPlane)?.run_from_vacuum()?;
        Ok(OutputState {
            state,
            ports: self.ports.iter().map(|c| (c.port_name, c.port_name.mode())).collect(),
        })
    }

    /// Noise variance of a port in shot-noise units, detection included.
    pub fn port_variance(&self, port: PortName) -> Result<f64> {
        let ch = self.channel(port)?;
        let state = self.compile(Drive::None, Stage::MeasurementPlane)?.run_from_vacuum()?;
        Ok(state.homodyne_stats(port.mode(), self.readout_angle(ch), ch.efficiency)?.1)
    }

    /// Mean signal shift produced at a port by one tone, detection included.
    pub fn tone_shift(&self, port: PortName, tone_id: usize) -> Result<f64> {
        let ch = self.channel(port)?;
        let state = self.compile(Drive::Tone(tone_id), Stage::MeasurementPlane)?.run_from_vacuum()?;
        Ok(state.homodyne_stats(port.mode(), self.readout_angle(ch), ch.efficiency)?.0)
    }

    /// Joint readout model of all ports: covariance of the detected
    /// quadratures and the per-tone signal amplitude at each port.
    pub fn port_model(&self) -> Result<PortModel> {
        let detected = self.compile(Drive::None, Stage::Detected)?.run_from_vacuum()?;
        let rows: Vec<(usize, f64, f64)> = self
            .ports
            .iter()
            .map(|ch| {
                let (s, c) = self.readout_angle(ch).radians().sin_cos();
                (ch.port_name.mode(), c, s)
            })
            .collect();
        let cov = detected.cov();
        let covariance = DMatrix::from_fn(rows.len(), rows.len(), |i, j| {
            let (mi, ci, si) = rows[i];
            let (mj, cj, sj) = rows[j];
            ci * cj * cov[(x_index(mi), x_index(mj))]
                + ci * sj * cov[(x_index(mi), y_index(mj))]
                + si * cj * cov[(y_index(mi), x_index(mj))]
                + si * sj * cov[(y_index(mi), y_index(mj))]
        });
        let mut tone_amplitudes = vec![vec![0.0; self.tones.len()]; self.ports.len()];
        for j in 0..self.tones.len() {
            for (p, ch) in self.ports.iter().enumerate() {
                tone_amplitudes[p][j] = self.tone_shift(ch.port_name, j)?;
            }
        }
        Ok(PortModel {
            channels: self.ports.clone(),
            covariance,
            tone_amplitudes,
        })
    }

    /// The classical amplifier scheme matched to this one: same probe, tones,
    /// ports and losses, amplifier gain equal to this scheme's OPA2 gain.
    pub fn amp_baseline(&self) -> Self {
        Self {
            kind: SchemeKind::Amp,
            opa1: OpaParams::new(1.0, 0.0).expect("unit gain"),
            interferometer_phase: 0.0,
            ..self.clone()
        }
    }

    /// The beam-splitter scheme matched to this one.
    pub fn bs_baseline(&self) -> Self {
        Self {
            kind: SchemeKind::Bs,
            opa1: OpaParams::new(1.0, 0.0).expect("unit gain"),
            opa2_or_amp: OpaParams::new(1.0, 0.0).expect("unit gain"),
            interferometer_phase: 0.0,
            ..self.clone()
        }
    }
}

/// Output of [`SchemeInstance::output_state`].
#[derive(Debug, Clone)]
pub struct OutputState {
    pub state: GaussianState,
    pub ports: Vec<(PortName, usize)>,
}

/// Joint statistics of every readout channel.
#[derive(Debug, Clone)]
pub struct PortModel {
    pub channels: Vec<HomodyneChannel>,
    /// Covariance of the detected port quadratures (shot-noise units).
    pub covariance: DMatrix<f64>,
    /// `tone_amplitudes[port][tone]`: static signal shift of each tone.
    pub tone_amplitudes: Vec<Vec<f64>>,
}

/// Result of the dark-fringe search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkFringe {
    pub phi: f64,
    /// Summed output photon number at `phi`.
    pub output_photons: f64,
    /// Set when the objective does not depend on the phase (no second OPA).
    pub flat: bool,
}

/// Summed signal and idler photon number right after OPA2 at phase `phi`,
/// with tones off.
pub fn dark_fringe_objective(scheme: &SchemeInstance, phi: f64) -> Result<f64> {
    let state = scheme
        .with_phase(phi)
        .compile(Drive::Carrier, Stage::Interferometer)?
        .run_from_vacuum()?;
    Ok(state.mean_photon_number(0)? + state.mean_photon_number(1)?)
}

const COARSE_POINTS: usize = 256;
const GOLDEN_TOL: f64 = 1e-7;

/// Locates the interferometer phase minimizing the output power: a coarse
/// scan followed by golden-section refinement around the best grid point.
pub fn find_dark_fringe(scheme: &SchemeInstance) -> Result<DarkFringe> {
    if scheme.kind != SchemeKind::Sui {
        return Err(Error::Unsupported(format!("dark-fringe search needs an SUI scheme, got {}", scheme.kind)));
    }
    let step = TAU / COARSE_POINTS as f64;
    let scan: Vec<f64> = (0..COARSE_POINTS)
        .map(|k| dark_fringe_objective(scheme, k as f64 * step))
        .collect::<Result<_>>()?;
    let (best, &best_val) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let worst = scan.iter().copied().fold(f64::MIN, f64::max);
    if worst - best_val <= 1e-12 * (1.0 + best_val.abs()) {
        return Ok(DarkFringe {
            phi: best as f64 * step,
            output_photons: best_val,
            flat: true,
        });
    }

    let f = |phi: f64| dark_fringe_objective(scheme, phi);
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
    let mut x1 = hi - invphi * (hi - lo);
    let mut x2 = lo + invphi * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let phi = (0.5 * (lo + hi)).rem_euclid(TAU);
    Ok(DarkFringe {
        phi,
        output_photons: f(phi)?,
        flat: false,
    })
}

/// Squared signal shift of a tone at a port divided by the port's noise
/// variance, detection loss included.
pub fn port_snr(scheme: &SchemeInstance, port: PortName, tone_id: usize) -> Result<f64> {
    let shift = scheme.tone_shift(port, tone_id)?;
    let var = scheme.port_variance(port)?;
    Ok(shift * shift / var)
}

/// One row of [`snr_vs_detection_efficiency`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyPoint {
    pub eta: f64,
    pub snr: f64,
    /// `snr / snr(η = 1)`.
    pub ratio: f64,
}

/// SNR of one tone as the detection efficiency of `port` is varied.
///
/// For a port of variance `V` at unit efficiency the ratio is
/// `η V / (η V + 1 − η)`, exactly `η` for a shot-noise-limited port.
pub fn snr_vs_detection_efficiency(
    scheme: &SchemeInstance,
    port: PortName,
    tone_id: usize,
    eta_grid: &[f64],
) -> Result<Vec<EfficiencyPoint>> {
    let reference = port_snr(&scheme.with_port_efficiency(port, 1.0)?, port, tone_id)?;
    eta_grid
        .iter()
        .map(|&eta| {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(invalid(format!("detection efficiency must lie in (0, 1], got {eta}")));
            }
            let snr = port_snr(&scheme.with_port_efficiency(port, eta)?, port, tone_id)?;
            let ratio = if reference > 0.0 { snr / reference } else { 0.0 };
            Ok(EfficiencyPoint { eta, snr, ratio })
        })
        .collect()
}

/// Best SNR of a tone over all ports, with the port that achieves it.
pub fn best_port_snr(scheme: &SchemeInstance, tone_id: usize) -> Result<(PortName, f64)> {
    let mut best: Option<(PortName, f64)> = None;
    for ch in &scheme.ports {
        let snr = port_snr(scheme, ch.port_name, tone_id)?;
        if best.is_none_or(|(_, b)| snr > b) {
            best = Some((ch.port_name, snr));
        }
    }
    best.ok_or_else(|| invalid("scheme has no ports"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToneEnhancement {
    pub frequency: f64,
    pub angle: f64,
    pub port: PortName,
    pub snr_sui: f64,
    pub baseline_port: PortName,
    pub snr_baseline: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorRatio {
    pub port: PortName,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnhancementReport {
    pub baseline_kind: SchemeKind,
    pub tones: Vec<ToneEnhancement>,
    /// Port-by-port noise variance of the SUI over the baseline.
    pub floor_ratios: Vec<FloorRatio>,
    /// `(G₁ + g₁)²`, the quotient of the SUI and BS formulas.
    pub reference_formula_quotient: f64,
    /// `G₁² + g₁²`.
    pub reference_gain_sum: f64,
}

/// Per-tone SNR ratios of an SUI against a classical baseline, each tone read
/// at its best port in either scheme.
pub fn enhancement_report(sui: &SchemeInstance, baseline: &SchemeInstance) -> Result<EnhancementReport> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !close(sui.probe_photon_number, baseline.probe_photon_number) {
        return Err(Error::InvalidComparison(format!(
            "probe photon numbers differ ({} vs {}); compare schemes at equal probe intensity",
            sui.probe_photon_number, baseline.probe_photon_number
        )));
    }
    if sui.tones != baseline.tones {
        return Err(Error::InvalidComparison("tone plans differ".into()));
    }
    let mut tones = Vec::with_capacity(sui.tones.len());
    for (j, tone) in sui.tones.iter().enumerate() {
        let (port, snr_sui) = best_port_snr(sui, j)?;
        let (baseline_port, snr_baseline) = best_port_snr(baseline, j)?;
        tones.push(ToneEnhancement {
            frequency: tone.frequency,
            angle: tone.angle.radians(),
            port,
            snr_sui,
            baseline_port,
            snr_baseline,
            ratio: if snr_baseline > 0.0 { snr_sui / snr_baseline } else { f64::NAN },
        });
    }
    let mut floor_ratios = Vec::new();
    for ch in &sui.ports {
        if baseline.channel(ch.port_name).is_ok() {
            floor_ratios.push(FloorRatio {
                port: ch.port_name,
                ratio: sui.port_variance(ch.port_name)? / baseline.port_variance(ch.port_name)?,
            });
        }
    }
    let (quot, sum) = reference_enhancements(sui.opa1.gain());
    Ok(EnhancementReport {
        baseline_kind: baseline.kind,
        tones,
        floor_ratios,
        reference_formula_quotient: quot,
        reference_gain_sum: sum,
    })
}
