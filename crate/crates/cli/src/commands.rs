//! The four subcommands. Each returns its report; writing files and choosing
//! exit codes is left to the caller.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use su11_core::oracle::{closed_form_snr, ClosedFormInput};
use su11_core::schemes::{best_port_snr, enhancement_report, find_dark_fringe, port_snr, EnhancementReport};
use su11_core::spectra::{
    calibrate_k, combine_currents, measure_peak, shot_noise_calibration, simulate_currents, substream_seed, welch_psd,
    CombineParams, PeakMeasurement, Spectrum, TimeSeries,
};
use su11_core::verify::{run_all, CriterionResult, VerifyOptions};
use su11_core::{PortName, SchemeInstance, SchemeKind};

use crate::config::{Format, Resolved, RunConfig, Setting};
use crate::error::CliError;

/// Where and in which formats a command writes its files.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Output {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        write_file(&self.dir.join(name), contents)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn tone_index(scheme: &SchemeInstance, angle: f64) -> Option<usize> {
    scheme.tones.iter().position(|t| (t.angle.radians() - angle).abs() < 1e-9)
}

#[derive(Debug, Serialize)]
struct ToneSnr {
    tone: usize,
    frequency_hz: f64,
    angle: f64,
    snr: f64,
}

#[derive(Debug, Serialize)]
struct PortReport {
    port: PortName,
    lo_phase: f64,
    efficiency: f64,
    variance: f64,
    tones: Vec<ToneSnr>,
}

fn port_reports(s: &SchemeInstance) -> Result<Vec<PortReport>, CliError> {
    s.ports
        .iter()
        .map(|ch| {
            let tones = s
                .tones
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    Ok(ToneSnr {
                        tone: j,
                        frequency_hz: t.frequency,
                        angle: t.angle.radians(),
                        snr: port_snr(s, ch.port_name, j)?,
                    })
                })
                .collect::<Result<_, CliError>>()?;
            Ok(PortReport {
                port: ch.port_name,
                lo_phase: ch.lo_phase.radians(),
                efficiency: ch.efficiency,
                variance: s.port_variance(ch.port_name)?,
                tones,
            })
        })
        .collect()
}

/// Best-port X and Y SNRs: the first tones encoded at 0 and at π/2.
fn best_xy(s: &SchemeInstance) -> Result<(Option<f64>, Option<f64>), CliError> {
    let best = |t: Option<usize>| -> Result<Option<f64>, CliError> {
        Ok(match t {
            Some(j) => Some(best_port_snr(s, j)?.1),
            None => None,
        })
    };
    Ok((best(tone_index(s, 0.0))?, best(tone_index(s, FRAC_PI_2))?))
}

fn ratio_xy(s: &SchemeInstance, report: &EnhancementReport) -> Value {
    let pick = |t: Option<usize>| t.map(|j| report.tones[j].ratio);
    json!({ "x": pick(tone_index(s, 0.0)), "y": pick(tone_index(s, FRAC_PI_2)) })
}

/// `snr`: analytic per-port, per-tone SNRs, closed forms and enhancement ratios.
pub fn snr(res: &Resolved) -> Result<Value, CliError> {
    let s = &res.scheme;
    let (snr_x, snr_y) = best_xy(s)?;
    let depth = |angle| tone_index(s, angle).map_or(0.0, |j| s.tones[j].depth);
    let closed = closed_form_snr(&ClosedFormInput {
        scheme_kind: s.kind,
        i_ps: s.probe_photon_number,
        epsilon: depth(0.0),
        delta: depth(FRAC_PI_2),
        g1: s.opa1.gain(),
        g2: s.opa2_or_amp.gain(),
        g: s.opa2_or_amp.gain(),
    });
    let mut report = json!({
        "config": res.config,
        "seed": res.config.sim.seed,
        "kind": s.kind,
        "interferometer_phase": s.interferometer_phase,
        "eta_internal": s.losses.eta_internal,
        "ports": port_reports(s)?,
        "snr_x": snr_x,
        "snr_y": snr_y,
        "closed_form": closed,
    });
    if res.original.scheme.interferometer_phase.0 == Setting::Auto && s.kind == SchemeKind::Sui {
        report["dark_fringe"] = json!(find_dark_fringe(s)?);
    }
    if let Some(fit) = &res.calibration {
        report["calibration"] = json!(fit);
    }
    if s.kind == SchemeKind::Sui {
        report["snr_sui_x"] = json!(snr_x);
        report["snr_sui_y"] = json!(snr_y);
        let amp = enhancement_report(s, &s.amp_baseline())?;
        let bs = enhancement_report(s, &s.bs_baseline())?;
        report["ratio_vs_amp"] = ratio_xy(s, &amp);
        report["ratio_vs_bs"] = ratio_xy(s, &bs);
        report["comparison"] = json!({ "amp": amp, "bs": bs });
    }
    Ok(report)
}

/// Spectrum CSV: one `# rbw_hz=…,n_avg=…,seed=…` line, a column header, rows.
pub fn spectrum_csv(spec: &Spectrum, seed: u64, extra: &str) -> String {
    let mut s = format!(
        "# rbw_hz={},n_avg={},seed={seed}{extra}\nfreq_hz,psd_snu\n",
        spec.rbw, spec.n_averages
    );
    for (f, p) in spec.freq.iter().zip(&spec.psd_snu) {
        writeln!(s, "{f},{p:.9e}").expect("string write");
    }
    s
}

#[derive(Debug, Serialize)]
struct PeakReport {
    frequency_hz: f64,
    angle: f64,
    #[serde(flatten)]
    measurement: PeakMeasurement,
    snr: f64,
}

fn peaks(spec: &Spectrum, scheme: &SchemeInstance) -> Result<Vec<PeakReport>, CliError> {
    let freqs: Vec<f64> = scheme.tones.iter().map(|t| t.frequency).collect();
    scheme
        .tones
        .iter()
        .map(|t| {
            let m = measure_peak(spec, t.frequency, &freqs)?;
            Ok(PeakReport {
                frequency_hz: t.frequency,
                angle: t.angle.radians(),
                snr: m.snr(),
                measurement: m,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SpectrumReport {
    port: String,
    lo_phase: f64,
    file: Option<String>,
    floor: f64,
    analytic_floor: Option<f64>,
    peaks: Vec<PeakReport>,
}

#[derive(Debug, Serialize)]
struct CombinedReport {
    channels: [PortName; 2],
    balance_gain_k: f64,
    k_calibrated: bool,
    spectra: Vec<SpectrumReport>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    label: String,
    kind: SchemeKind,
    seed: u64,
    ports: Vec<SpectrumReport>,
    combined: Option<CombinedReport>,
}

#[derive(Debug, Serialize)]
struct FloorComparison {
    run: String,
    baseline: String,
    port: PortName,
    measured: f64,
    analytic: f64,
}

fn floor_of(spec: &Spectrum, scheme: &SchemeInstance) -> f64 {
    let freqs: Vec<f64> = scheme.tones.iter().map(|t| t.frequency).collect();
    spec.floor_excluding(spec.rbw, spec.sample_rate / 2.0 - spec.rbw, &freqs)
}

/// `simulate`: Monte-Carlo spectra of the configured scheme and its
/// baselines, with peak and floor readings.
pub fn simulate(res: &Resolved, out: &Output) -> Result<Value, CliError> {
    let cfg = &res.config;
    let sim = &cfg.sim;
    let seed = sim.seed;
    let snu = shot_noise_calibration(sim.sample_rate, sim.duration, sim.rbw, substream_seed(seed, u64::MAX))?;

    let mut runs: Vec<(String, SchemeInstance)> = vec![(res.scheme.kind.to_string(), res.scheme.clone())];
    for b in &cfg.scheme.baselines {
        let scheme = match b {
            SchemeKind::Amp => res.scheme.amp_baseline(),
            SchemeKind::Bs => res.scheme.bs_baseline(),
            SchemeKind::Sui => return Err(CliError::Config("scheme.baselines may list only amp and bs".into())),
        };
        if *b != res.scheme.kind && !runs.iter().any(|(l, _)| *l == b.to_string()) {
            runs.push((b.to_string(), scheme));
        }
    }

    let mut reports = Vec::new();
    let mut port_floors: Vec<Vec<(PortName, f64, f64)>> = Vec::new();
    for (ri, (label, scheme)) in runs.iter().enumerate() {
        let run_seed = substream_seed(seed, ri as u64);
        let model = scheme.port_model()?;
        let currents: Vec<TimeSeries> = simulate_currents(scheme, sim.duration, sim.sample_rate, run_seed)?
            .iter()
            .zip(&scheme.ports)
            .map(|(ts, ch)| ts.scaled(cfg.electronic_gain(ch.port_name)))
            .collect();

        let mut ports = Vec::new();
        let mut floors = Vec::new();
        for (p, (ts, ch)) in currents.iter().zip(&scheme.ports).enumerate() {
            let spec = welch_psd(ts, sim.rbw)?.normalized(snu);
            let gain = cfg.electronic_gain(ch.port_name);
            let analytic = model.covariance[(p, p)] * gain * gain;
            let floor = floor_of(&spec, scheme);
            let file = format!("{label}_{}.csv", ch.port_name);
            if out.wants(Format::Csv) {
                out.write(&file, &spectrum_csv(&spec, run_seed, ""))?;
            }
            floors.push((ch.port_name, floor, analytic));
            ports.push(SpectrumReport {
                port: ch.port_name.to_string(),
                lo_phase: ch.lo_phase.radians(),
                file: out.wants(Format::Csv).then_some(file),
                floor,
                analytic_floor: Some(analytic),
                peaks: peaks(&spec, scheme)?,
            });
        }

        let combined = if sim.combine_thetas.is_empty() {
            None
        } else {
            let find = |port: PortName| {
                scheme.ports.iter().position(|c| c.port_name == port).ok_or_else(|| {
                    CliError::Config(format!("sim.combine_channels: scheme has no {port} channel"))
                })
            };
            let [c1, c3] = sim.combine_channels;
            let (i1, i3) = (&currents[find(c1)?], &currents[find(c3)?]);
            let (k, calibrated) = match sim.balance_gain_k.0 {
                Setting::Value(k) => (k, false),
                Setting::Auto => (calibrate_k(i1, i3, sim.cal_tone_hz.unwrap_or_default())?, true),
            };
            let mut spectra = Vec::new();
            for (j, theta) in sim.combine_thetas.iter().enumerate() {
                let c = combine_currents(i1, i3, &CombineParams::new(theta.0, k)?)?;
                let spec = welch_psd(&c, sim.rbw)?.normalized(snu);
                let file = format!("{label}_combined_{j}.csv");
                if out.wants(Format::Csv) {
                    out.write(&file, &spectrum_csv(&spec, run_seed, &format!(",theta={},k={k}", theta.0)))?;
                }
                spectra.push(SpectrumReport {
                    port: format!("i({})", theta.0),
                    lo_phase: theta.0,
                    file: out.wants(Format::Csv).then_some(file),
                    floor: floor_of(&spec, scheme),
                    analytic_floor: None,
                    peaks: peaks(&spec, scheme)?,
                });
            }
            Some(CombinedReport {
                channels: sim.combine_channels,
                balance_gain_k: k,
                k_calibrated: calibrated,
                spectra,
            })
        };
        port_floors.push(floors);
        reports.push(RunReport {
            label: label.clone(),
            kind: scheme.kind,
            seed: run_seed,
            ports,
            combined,
        });
    }

    let mut floor_ratios = Vec::new();
    for (bi, (blabel, _)) in runs.iter().enumerate().skip(1) {
        for &(port, floor, analytic) in &port_floors[0] {
            if let Some(&(_, bf, ba)) = port_floors[bi].iter().find(|(p, _, _)| *p == port) {
                floor_ratios.push(FloorComparison {
                    run: runs[0].0.clone(),
                    baseline: blabel.clone(),
                    port,
                    measured: floor / bf,
                    analytic: analytic / ba,
                });
            }
        }
    }

    let report = json!({
        "config": res.config,
        "config_as_written": res.original,
        "seed": seed,
        "shot_noise_factor": snu,
        "calibration": res.calibration,
        "runs": reports,
        "floor_ratios": floor_ratios,
    });
    if out.wants(Format::Json) {
        out.write("peaks.json", &to_json(&report))?;
    }
    Ok(report)
}

fn csv_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// `sweep`: one row of analytic SNRs per grid value of `param`.
///
/// Returns the CSV table and a JSON record of the run.
pub fn sweep(cfg: &RunConfig, param: &str, grid: &[f64]) -> Result<(String, Value), CliError> {
    cfg.clone().set_param(param, 0.0)?;
    let base = cfg.resolve()?;
    let s0 = &base.scheme;
    let mut header = vec![param.to_string(), "snr_x".into(), "snr_y".into()];
    for ch in &s0.ports {
        header.push(format!("var_{}", ch.port_name));
        for j in 0..s0.tones.len() {
            header.push(format!("snr_{}_t{j}", ch.port_name));
        }
    }
    let sui = s0.kind == SchemeKind::Sui;
    if sui {
        header.extend(["ratio_vs_amp_x", "ratio_vs_amp_y", "phi"].map(String::from));
    }
    let mut csv = header.join(",");
    csv.push('\n');
    for &v in grid {
        let mut c = cfg.clone();
        c.set_param(param, v)?;
        let s = c.resolve()?.scheme;
        let (x, y) = best_xy(&s)?;
        let mut row = vec![v, x.unwrap_or(f64::NAN), y.unwrap_or(f64::NAN)];
        for ch in &s.ports {
            row.push(s.port_variance(ch.port_name)?);
            for j in 0..s.tones.len() {
                row.push(port_snr(&s, ch.port_name, j)?);
            }
        }
        if sui {
            let rep = enhancement_report(&s, &s.amp_baseline())?;
            let pick = |a| tone_index(&s, a).map_or(f64::NAN, |j| rep.tones[j].ratio);
            row.extend([pick(0.0), pick(FRAC_PI_2), s.interferometer_phase]);
        }
        let cells: Vec<String> = row.into_iter().map(csv_num).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let meta = json!({
        "config": base.config,
        "seed": base.config.sim.seed,
        "param": param,
        "grid": grid,
        "columns": header,
    });
    Ok((csv, meta))
}

/// `verify`: the invariant and acceptance suite.
pub fn verify(seed: Option<u64>) -> Vec<CriterionResult> {
    let mut options = VerifyOptions::default();
    if let Some(s) = seed {
        options.seed = s;
    }
    run_all(options)
}
