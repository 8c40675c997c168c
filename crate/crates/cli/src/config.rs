//! Run configuration: the TOML file format, presets and resolution into a
//! scheme instance.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use su11_core::calibration::{fit_internal_efficiency, CalibrationFit, CalibrationTarget};
use su11_core::schemes::{GainReading, InternalLossArms, PhaseSetting};
use su11_core::spectra::{DEFAULT_DURATION, DEFAULT_RBW, DEFAULT_SAMPLE_RATE};
use su11_core::{
    build_scheme, HomodyneChannel, LossBudget, ModulationTone, PortName, QuadratureAngle, SchemeInstance, SchemeKind,
    SchemeParams,
};

use crate::error::CliError;

/// An angle in radians, written either as a number or as `"pi/4"`,
/// `"3pi/4"`, `"-pi/2"`, `"0.5pi"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl Angle {
    pub fn parse(s: &str) -> Option<f64> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Ok(v) = t.parse::<f64>() {
            return Some(v);
        }
        let (head, tail) = t.split_once("pi")?;
        let coef = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.trim_end_matches('*').parse::<f64>().ok()?,
        };
        let div = match tail {
            "" => 1.0,
            d => d.strip_prefix('/')?.parse::<f64>().ok()?,
        };
        Some(coef * std::f64::consts::PI / div)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

struct AngleVisitor;

impl Visitor<'_> for AngleVisitor {
    type Value = Angle;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an angle in radians, as a number or a string like \"pi/4\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Angle, E> {
        Ok(Angle(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Angle, E> {
        Ok(Angle(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Angle, E> {
        Ok(Angle(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Angle, E> {
        Angle::parse(v)
            .map(Angle)
            .ok_or_else(|| E::custom(format!("cannot read {v:?} as an angle")))
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Angle, D::Error> {
        d.deserialize_any(AngleVisitor)
    }
}

/// A number or a keyword (`"auto-dark-fringe"`, `"fit"`, `"auto"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Value(f64),
    Auto,
}

fn setting_de<'de, D: Deserializer<'de>>(d: D, keyword: &'static str) -> Result<Setting, D::Error> {
    struct V(&'static str);
    impl Visitor<'_> for V {
        type Value = Setting;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            write!(f, "a number or \"{}\"", self.0)
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Setting, E> {
            Ok(Setting::Value(v))
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Setting, E> {
            Ok(Setting::Value(v as f64))
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Setting, E> {
            Ok(Setting::Value(v as f64))
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<Setting, E> {
            if v == self.0 {
                Ok(Setting::Auto)
            } else if let Some(a) = Angle::parse(v) {
                Ok(Setting::Value(a))
            } else {
                Err(E::custom(format!("expected a number or \"{}\", got {v:?}", self.0)))
            }
        }
    }
    d.deserialize_any(V(keyword))
}

fn setting_ser<S: Serializer>(v: &Setting, s: S, keyword: &'static str) -> Result<S::Ok, S::Error> {
    match v {
        Setting::Value(x) => s.serialize_f64(*x),
        Setting::Auto => s.serialize_str(keyword),
    }
}

macro_rules! keyword_setting {
    ($name:ident, $kw:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub Setting);

        impl $name {
            pub const KEYWORD: &'static str = $kw;
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                setting_ser(&self.0, s, $kw)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                setting_de(d, $kw).map($name)
            }
        }
    };
}

keyword_setting!(PhaseValue, "auto-dark-fringe");
keyword_setting!(EtaValue, "fit");
keyword_setting!(KValue, "auto");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    pub probe_photon_number: f64,
    #[serde(default = "one")]
    pub gain_g1: f64,
    #[serde(default = "one")]
    pub gain_g2: f64,
    #[serde(default)]
    pub gain_reading: GainReading,
    #[serde(default = "default_phase")]
    pub interferometer_phase: PhaseValue,
    #[serde(default)]
    pub internal_loss_arms: InternalLossArms,
    /// Classical schemes to run alongside for comparison.
    #[serde(default)]
    pub baselines: Vec<SchemeKind>,
}

fn one() -> f64 {
    1.0
}

fn default_phase() -> PhaseValue {
    PhaseValue(Setting::Value(std::f64::consts::PI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub eta_internal: EtaValue,
    pub eta_signal_det: f64,
    pub eta_idler_det: f64,
    pub eta_tap_det: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            eta_internal: EtaValue(Setting::Value(1.0)),
            eta_signal_det: 1.0,
            eta_idler_det: 1.0,
            eta_tap_det: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSection {
    pub frequency_hz: f64,
    pub depth: f64,
    pub angle: Angle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub name: PortName,
    pub lo_phase: Angle,
    /// Defaults to the matching detection efficiency in `[losses]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    /// Electronic gain applied to the simulated photocurrent.
    #[serde(default = "one")]
    pub electronic_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSection {
    #[serde(default)]
    pub tap: bool,
    /// Empty selects signal at 0, idler at π/2 and, with a tap, tap at π/4.
    #[serde(default)]
    pub channels: Vec<ChannelSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_rbw")]
    pub rbw: f64,
    #[serde(default)]
    pub seed: u64,
    /// Angles θ at which `i(θ) = i₁ cosθ + k i₃ sinθ` is formed.
    #[serde(default)]
    pub combine_thetas: Vec<Angle>,
    /// Channels supplying `i₁` and `i₃`.
    #[serde(default = "default_combine_channels")]
    pub combine_channels: [PortName; 2],
    #[serde(default = "default_k")]
    pub balance_gain_k: KValue,
    /// Tone used to calibrate `k` when `balance_gain_k = "auto"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cal_tone_hz: Option<f64>,
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}
fn default_duration() -> f64 {
    DEFAULT_DURATION
}
fn default_rbw() -> f64 {
    DEFAULT_RBW
}
fn default_combine_channels() -> [PortName; 2] {
    [PortName::Signal, PortName::Tap]
}
fn default_k() -> KValue {
    KValue(Setting::Value(1.0))
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration: DEFAULT_DURATION,
            rbw: DEFAULT_RBW,
            seed: 0,
            combine_thetas: Vec::new(),
            combine_channels: default_combine_channels(),
            balance_gain_k: default_k(),
            cal_tone_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> String {
    "su11-out".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: SchemeSection,
    #[serde(default)]
    pub losses: LossSection,
    #[serde(default)]
    pub tones: Vec<ToneSection>,
    #[serde(default)]
    pub ports: PortSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
];

pub fn preset(name: &str) -> Result<&'static str, CliError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_preset(name: &str) -> Result<Self, CliError> {
        Self::from_toml(preset(name)?).map_err(|e| CliError::Config(format!("preset {name}: {e}")))
    }

    fn detection(&self, port: PortName) -> f64 {
        match port {
            PortName::Signal => self.losses.eta_signal_det,
            PortName::Idler => self.losses.eta_idler_det,
            PortName::Tap => self.losses.eta_tap_det,
        }
    }

    /// Scheme parameters with `eta_internal` set to `eta`.
    pub fn scheme_params(&self, eta_internal: f64) -> SchemeParams {
        let losses = LossBudget {
            eta_internal,
            eta_signal_det: self.losses.eta_signal_det,
            eta_idler_det: self.losses.eta_idler_det,
            eta_tap_det: self.losses.eta_tap_det,
        };
        let ports = (!self.ports.channels.is_empty()).then(|| {
            self.ports
                .channels
                .iter()
                .map(|c| HomodyneChannel {
                    port_name: c.name,
                    lo_phase: QuadratureAngle::new(c.lo_phase.0),
                    efficiency: c.efficiency.unwrap_or_else(|| self.detection(c.name)),
                })
                .collect()
        });
        SchemeParams {
            kind: self.scheme.kind,
            probe_photon_number: self.scheme.probe_photon_number,
            gain_g1: self.scheme.gain_g1,
            gain_g2: self.scheme.gain_g2,
            gain_reading: self.scheme.gain_reading,
            interferometer_phase: match self.scheme.interferometer_phase.0 {
                Setting::Value(phi) => PhaseSetting::Fixed(phi),
                Setting::Auto => PhaseSetting::AutoDarkFringe,
            },
            losses,
            internal_loss_arms: self.scheme.internal_loss_arms,
            tones: self
                .tones
                .iter()
                .map(|t| ModulationTone::new(t.frequency_hz, t.depth, t.angle.0))
                .collect(),
            ports,
            tap_enabled: self.ports.tap,
        }
    }

    fn validate_sim(&self) -> Result<(), CliError> {
        let s = &self.sim;
        let bad = |key: &str, msg: String| Err(CliError::Config(format!("sim.{key}: {msg}")));
        if !(s.sample_rate.is_finite() && s.sample_rate > 0.0) {
            return bad("sample_rate", format!("must be > 0, got {}", s.sample_rate));
        }
        if !(s.duration.is_finite() && s.duration > 0.0) {
            return bad("duration", format!("must be > 0, got {}", s.duration));
        }
        if !(s.rbw.is_finite() && s.rbw > 0.0) {
            return bad("rbw", format!("must be > 0, got {}", s.rbw));
        }
        if let Setting::Value(k) = s.balance_gain_k.0 {
            if !(k.is_finite() && k > 0.0) {
                return bad("balance_gain_k", format!("must be finite and > 0, got {k}"));
            }
        }
        if s.balance_gain_k.0 == Setting::Auto && !s.combine_thetas.is_empty() && s.cal_tone_hz.is_none() {
            return bad("cal_tone_hz", "required when balance_gain_k = \"auto\"".into());
        }
        for (i, c) in self.ports.channels.iter().enumerate() {
            if !(c.electronic_gain.is_finite() && c.electronic_gain > 0.0) {
                return Err(CliError::Config(format!(
                    "ports.channels[{i}].electronic_gain must be finite and > 0"
                )));
            }
        }
        Ok(())
    }

    /// Validates the configuration and builds its scheme, fitting
    /// `eta_internal` first when it is set to `"fit"`.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        self.validate_sim()?;
        let (eta, calibration) = match self.losses.eta_internal.0 {
            Setting::Value(eta) => (eta, None),
            Setting::Auto => {
                if self.scheme.kind != SchemeKind::Sui {
                    return Err(CliError::Config(
                        "losses.eta_internal = \"fit\" needs scheme.kind = \"sui\"".into(),
                    ));
                }
                // the fit targets the two-tone, two-port comparison whatever
                // plan this run uses
                let template = SchemeParams {
                    tones: SchemeParams::new(SchemeKind::Sui).tones,
                    ports: None,
                    tap_enabled: false,
                    ..self.scheme_params(1.0)
                };
                let fit = fit_internal_efficiency(&template, &CalibrationTarget::EXPERIMENT)
                    .map_err(|e| CliError::Config(format!("losses.eta_internal = \"fit\": {e}")))?;
                if !fit.within_target {
                    log::warn!("eta_internal fit misses its target (normalized error {:.3})", fit.error);
                }
                (fit.point.eta_internal, Some(fit))
            }
        };
        let params = self.scheme_params(eta);
        let scheme = build_scheme(&params).map_err(|e| CliError::Config(e.to_string()))?;
        let mut resolved = self.clone();
        resolved.losses.eta_internal = EtaValue(Setting::Value(eta));
        Ok(Resolved {
            config: resolved,
            original: self.clone(),
            scheme,
            calibration,
        })
    }

    pub fn electronic_gain(&self, port: PortName) -> f64 {
        self.ports
            .channels
            .iter()
            .find(|c| c.name == port)
            .map_or(1.0, |c| c.electronic_gain)
    }
}

/// A validated configuration and the scheme it describes.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Config with every automatic value filled in.
    pub config: RunConfig,
    /// Config as written.
    pub original: RunConfig,
    pub scheme: SchemeInstance,
    pub calibration: Option<CalibrationFit>,
}

/// Parameter paths accepted by `sweep --param`.
pub const SWEEP_PATHS: [&str; 9] = [
    "scheme.probe_photon_number",
    "scheme.gain_g1",
    "scheme.gain_g2",
    "scheme.interferometer_phase",
    "losses.eta_internal",
    "losses.eta_signal_det",
    "losses.eta_idler_det",
    "losses.eta_tap_det",
    "tones.<i>.depth | tones.<i>.angle | tones.<i>.frequency_hz",
];

impl RunConfig {
    /// Sets a numeric parameter by path, e.g. `losses.eta_signal_det` or
    /// `tones.0.depth`. Short names such as `eta_signal_det` and `G2` are
    /// accepted too.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<(), CliError> {
        let full = match path {
            "G1" | "g1" | "gain_g1" => "scheme.gain_g1",
            "G2" | "g2" | "gain_g2" => "scheme.gain_g2",
            "I_ps" | "probe_photon_number" => "scheme.probe_photon_number",
            "phi" | "interferometer_phase" => "scheme.interferometer_phase",
            "eta_internal" => "losses.eta_internal",
            "eta_signal_det" => "losses.eta_signal_det",
            "eta_idler_det" => "losses.eta_idler_det",
            "eta_tap_det" => "losses.eta_tap_det",
            p => p,
        };
        match full {
            "scheme.probe_photon_number" => self.scheme.probe_photon_number = value,
            "scheme.gain_g1" => self.scheme.gain_g1 = value,
            "scheme.gain_g2" => self.scheme.gain_g2 = value,
            "scheme.interferometer_phase" => self.scheme.interferometer_phase = PhaseValue(Setting::Value(value)),
            "losses.eta_internal" => self.losses.eta_internal = EtaValue(Setting::Value(value)),
            "losses.eta_signal_det" => self.losses.eta_signal_det = value,
            "losses.eta_idler_det" => self.losses.eta_idler_det = value,
            "losses.eta_tap_det" => self.losses.eta_tap_det = value,
            p => {
                let parts: Vec<&str> = p.split('.').collect();
                let n = self.tones.len();
                let field = match parts.as_slice() {
                    ["tones", i, field] => i.parse::<usize>().ok().filter(|&i| i < n).map(|i| (i, *field)),
                    _ => None,
                };
                match field {
                    Some((i, "depth")) => self.tones[i].depth = value,
                    Some((i, "angle")) => self.tones[i].angle = Angle(value),
                    Some((i, "frequency_hz")) => self.tones[i].frequency_hz = value,
                    _ => {
                        return Err(CliError::Config(format!(
                            "unknown sweep parameter {path:?}; valid paths: {}",
                            SWEEP_PATHS.join(", ")
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses a sweep grid: `start:stop:count` (inclusive), a comma list, or an
/// empty string for an empty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim().trim_start_matches('[').trim_end_matches(']').trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let bad = || CliError::Config(format!("cannot parse grid {spec:?}; use start:stop:count or a,b,c"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let a = Angle::parse(parts[0]).ok_or_else(bad)?;
        let b = Angle::parse(parts[1]).ok_or_else(bad)?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        });
    }
    if parts.len() != 1 {
        return Err(bad());
    }
    spec.split(',').map(|s| Angle::parse(s).ok_or_else(bad)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angles() {
        assert_eq!(Angle::parse("pi/4"), Some(PI / 4.0));
        assert_eq!(Angle::parse("3pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(Angle::parse("-pi/2"), Some(-PI / 2.0));
        assert_eq!(Angle::parse("0.5pi"), Some(0.5 * PI));
        assert_eq!(Angle::parse("pi"), Some(PI));
        assert_eq!(Angle::parse("1.25"), Some(1.25));
        assert_eq!(Angle::parse("tau"), None);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("2, 5,9").unwrap(), vec![2.0, 5.0, 9.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn presets_parse_and_resolve() {
        for (name, _) in PRESETS {
            let cfg = RunConfig::load_preset(name).unwrap();
            let r = cfg.resolve().unwrap();
            assert_eq!(r.scheme.kind, SchemeKind::Sui, "{name}");
            assert!(r.calibration.is_some_and(|f| f.within_target), "{name}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[scheme]\nkind = \"bs\"\nprobe_photon_number = 1e4\nbogus = 1\n";
        let err = RunConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = RunConfig::load_preset("fig2").unwrap().resolve().unwrap();
        let text = toml::to_string(&r.config).unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, r.config);
    }

    #[test]
    fn set_param_paths() {
        let mut cfg = RunConfig::load_preset("fig2").unwrap();
        cfg.set_param("G2", 20.0).unwrap();
        cfg.set_param("tones.1.depth", 0.02).unwrap();
        assert_eq!(cfg.scheme.gain_g2, 20.0);
        assert_eq!(cfg.tones[1].depth, 0.02);
        let err = cfg.set_param("tones.9.depth", 1.0).unwrap_err().to_string();
        assert!(err.contains("valid paths"));
    }
}
