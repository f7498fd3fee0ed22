//! CSV and JSON outputs. Numbers are written with Rust's shortest round-trip
//! formatting, so identical inputs give byte-identical files; NaN is written
//! as an empty field.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::Scheme;
use crate::bounds::{bound_for, compute_composite_bounds, verify_stationarity, CompositeBounds, RateSet};
use crate::error::Result;
use crate::propagate::{reduced_sample, TrajectoryRecord};
use crate::spin::{Operator, SystemParams};
use crate::synth::{TransferStep, Waveform};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepBoundReport {
    pub theta_rad: f64,
    pub zeta: f64,
    pub eta: f64,
    pub gamma_star_rad: f64,
    pub residuals: [f64; 2],
}

impl StepBoundReport {
    pub fn new(rates: &RateSet) -> Self {
        let b = bound_for(rates);
        let (r1, r2) = verify_stationarity(&b);
        StepBoundReport { theta_rad: b.theta, zeta: b.zeta, eta: b.eta, gamma_star_rad: b.gamma_star, residuals: [r1, r2] }
    }
}

/// I-side bound at the top level, S-side bound and composites nested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(flatten)]
    pub i_side: StepBoundReport,
    pub s_side: StepBoundReport,
    pub composites: CompositeBounds,
}

impl BoundReport {
    pub fn new(params: &SystemParams) -> Result<Self> {
        Ok(BoundReport {
            i_side: StepBoundReport::new(&params.i_side()),
            s_side: StepBoundReport::new(&params.s_side()),
            composites: compute_composite_bounds(params)?,
        })
    }
}

/// One row of a comparison table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: &'static str,
    pub ka_over_j: f64,
    pub kc_over_ka: f64,
    pub tau_s: f64,
    pub efficiency: f64,
}

impl ComparisonRow {
    pub fn new(scheme: Scheme, ka_over_j: f64, kc_over_ka: f64, tau_s: f64, efficiency: f64) -> Self {
        ComparisonRow { scheme: scheme.name(), ka_over_j, kc_over_ka, tau_s, efficiency }
    }
}

/// Label used for the analytic bound in comparison tables.
pub const BOUND_LABEL: &str = "bound";

pub fn waveform_csv(w: &Waveform) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["t_s", "amplitude_hz", "phase_rad", "offset_hz"]).map_err(csv_err)?;
    for (t, s) in w.start_times().into_iter().zip(&w.segments) {
        out.write_record(&[num(t), num(s.amplitude_hz), num(s.phase_rad), num(s.offset_hz)]).map_err(csv_err)?;
    }
    finish(out)
}

/// Reads a waveform CSV back; segment durations are the gaps between rows,
/// the last segment taking the previous gap.
pub fn parse_waveform_csv(text: &str) -> Result<Waveform> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| crate::Error::InvalidParams(format!("bad waveform row {:?}", rec)))
        };
        rows.push([field(0)?, field(1)?, field(2)?, field(3)?]);
    }
    let segments = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let duration_s = match (rows.get(k + 1), k.checked_sub(1).and_then(|p| rows.get(p))) {
                (Some(next), _) => next[0] - r[0],
                (None, Some(prev)) => r[0] - prev[0],
                (None, None) => 0.0,
            };
            crate::synth::Segment { duration_s, amplitude_hz: r[1], phase_rad: r[2], offset_hz: r[3] }
        })
        .collect();
    let w = Waveform { segments, ..Default::default() };
    w.validate()?;
    Ok(w)
}

pub fn trajectory_csv(traj: &TrajectoryRecord, step: TransferStep) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t_s".to_string()];
    header.extend(Operator::ALL.iter().map(|o| o.name().to_string()));
    header.extend(["l1", "l2", "r1", "r2", "gamma_rad", "alpha_mag", "beta_mag"].map(String::from));
    out.write_record(&header).map_err(csv_err)?;
    for (&t, s) in traj.times.iter().zip(&traj.states) {
        let red = reduced_sample(t, s, step);
        let mut row = vec![num(t)];
        row.extend(s.coefficients().iter().map(|&c| num(c)));
        row.extend([red.l1, red.l2, red.r1, red.r2].map(num));
        row.push(red.gamma.map(num).unwrap_or_default());
        row.extend([red.alpha_mag, red.beta_mag].map(num));
        out.write_record(&row).map_err(csv_err)?;
    }
    finish(out)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["scheme", "ka_over_J", "kc_over_ka", "tau_s", "efficiency"]).map_err(csv_err)?;
    for r in rows {
        out.write_record(&[r.scheme.to_string(), num(r.ka_over_j), num(r.kc_over_ka), num(r.tau_s), num(r.efficiency)])
            .map_err(csv_err)?;
    }
    finish(out)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(e.into())
}
