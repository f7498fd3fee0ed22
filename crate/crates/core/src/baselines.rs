//! Conventional single-delay transfer blocks and mixing-time optimization.
//!
//! Each scheme starts from in-phase `Ix` (after a lossless 90° pulse on `Iz`),
//! evolves freely for `τ` and reads one antiphase quadrature, which a final
//! lossless 90° pulse turns into `2IzSz`:
//!
//! * INEPT reads the coupling-driven `2IySz`;
//! * CRIPT reads the cross-correlation-driven `-2IxSz`;
//! * CRINEPT reads the whole antiphase vector.
//!
//! The readout sign is chosen freely, so efficiencies are magnitudes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::RateSet;
use crate::error::{Error, Result};
use crate::propagate::{run, Element, PulseProgram, RunOptions};
use crate::spin::{Operator, ProductOperatorState, Spin, SystemParams};
use crate::synth::{CropPulse, SynthOptions, TransferStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Crop,
    Inept,
    Cript,
    Crinept,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Crop, Scheme::Inept, Scheme::Cript, Scheme::Crinept];
    pub const CONVENTIONAL: [Scheme; 3] = [Scheme::Inept, Scheme::Cript, Scheme::Crinept];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Crop => "crop",
            Scheme::Inept => "inept",
            Scheme::Cript => "cript",
            Scheme::Crinept => "crinept",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Excitation plus free evolution, without readout.
pub fn mixing_program(tau_s: f64) -> PulseProgram {
    PulseProgram::new(vec![
        Element::HardRotation { spin: Spin::I, phase_rad: FRAC_PI_2, angle_rad: FRAC_PI_2 },
        Element::Delay { duration_s: tau_s },
    ])
}

/// Rotation carrying the antiphase vector at azimuth `psi` (in the
/// `2IxSz, 2IySz` plane) onto `2IzSz`.
pub fn readout(psi: f64) -> Element {
    Element::HardRotation { spin: Spin::I, phase_rad: psi - FRAC_PI_2, angle_rad: FRAC_PI_2 }
}

/// Complete program for a conventional scheme with the readout matched to the
/// quadrature it uses. The readout axis depends on the sign of the quadrature
/// at `τ`, found by a first pass.
pub fn scheme_program(scheme: Scheme, params: &SystemParams, tau_s: f64) -> Result<PulseProgram> {
    let antiphase = mix(params, tau_s)?;
    let (x, y) = (antiphase[Operator::IxSz], antiphase[Operator::IySz]);
    let psi = match scheme {
        Scheme::Inept => {
            if y >= 0.0 {
                FRAC_PI_2
            } else {
                -FRAC_PI_2
            }
        }
        Scheme::Cript => {
            if x <= 0.0 {
                PI
            } else {
                0.0
            }
        }
        Scheme::Crinept => y.atan2(x),
        Scheme::Crop => return Err(Error::UnknownScheme("crop has no single-delay program".into())),
    };
    let mut prog = mixing_program(tau_s);
    prog.elements.push(readout(psi));
    Ok(prog)
}

fn mix(params: &SystemParams, tau_s: f64) -> Result<ProductOperatorState> {
    if !(tau_s >= 0.0) {
        return Err(Error::InvalidParams(format!("mixing time must be non-negative, got {tau_s}")));
    }
    let opts = RunOptions { dt_max_s: Some(tau_s.max(1e-300)), max_samples: Some(1) };
    let traj = run(&mixing_program(tau_s), params, &ProductOperatorState::basis(Operator::Iz), &opts)?;
    Ok(*traj.final_state().ok_or(Error::EmptyTrajectory)?)
}

fn scheme_efficiency(scheme: Scheme, params: &SystemParams, tau_s: f64) -> Result<f64> {
    let prog = scheme_program(scheme, params, tau_s)?;
    let opts = RunOptions { dt_max_s: Some(tau_s.max(1e-300)), max_samples: Some(1) };
    let traj = run(&prog, params, &ProductOperatorState::basis(Operator::Iz), &opts)?;
    Ok(traj.final_state().ok_or(Error::EmptyTrajectory)?[Operator::IzSz])
}

/// CROP shape for one transfer step, truncated per `synth.window_s`.
pub fn crop_program(params: &SystemParams, step: TransferStep, synth: &SynthOptions) -> Result<PulseProgram> {
    params.validate()?;
    let waveform = CropPulse::new(&step.rates(params), synth)?.window(synth.window_s)?;
    Ok(PulseProgram::new(vec![Element::Shape { spin: step.spin(), waveform }]))
}

/// `Iz -> 2IzSz -> Sz`: the I-side CROP shape followed by the S-side one.
pub fn staged_crop_program(params: &SystemParams, synth: &SynthOptions) -> Result<PulseProgram> {
    let mut prog = crop_program(params, TransferStep::IzToIzSz, synth)?;
    prog.elements.extend(crop_program(params, TransferStep::IzSzToSz, synth)?.elements);
    Ok(prog)
}

pub fn inept_efficiency(params: &SystemParams, tau_s: f64) -> Result<f64> {
    scheme_efficiency(Scheme::Inept, params, tau_s)
}

pub fn cript_efficiency(params: &SystemParams, tau_s: f64) -> Result<f64> {
    scheme_efficiency(Scheme::Cript, params, tau_s)
}

pub fn crinept_efficiency(params: &SystemParams, tau_s: f64) -> Result<f64> {
    scheme_efficiency(Scheme::Crinept, params, tau_s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub tau_s: f64,
    pub efficiency: f64,
    /// `(τ, efficiency)` samples the optimum was refined from.
    pub curve: Vec<(f64, f64)>,
    /// Set when the curve is flat and `τ = 0` is reported.
    pub flat: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingOptions {
    /// Search interval; `(0, 3/J]` when absent.
    pub bracket_s: Option<(f64, f64)>,
    pub samples: usize,
    /// Synthesis settings for CROP, whose mixing time is the truncation window.
    pub synth: SynthOptions,
}

impl Default for MixingOptions {
    fn default() -> Self {
        MixingOptions { bracket_s: None, samples: 301, synth: SynthOptions::default() }
    }
}

/// Efficiency-vs-mixing-time evaluator. CROP is synthesized once and then
/// truncated to each window.
pub struct SchemeCurve {
    scheme: Scheme,
    params: SystemParams,
    crop: Option<CropPulse>,
}

impl SchemeCurve {
    pub fn new(scheme: Scheme, params: &SystemParams, synth: &SynthOptions) -> Result<SchemeCurve> {
        params.validate()?;
        let crop = match scheme {
            Scheme::Crop => Some(CropPulse::new(&params.i_side(), synth)?),
            _ => None,
        };
        Ok(SchemeCurve { scheme, params: *params, crop })
    }

    pub fn efficiency(&self, tau_s: f64) -> Result<f64> {
        match &self.crop {
            Some(pulse) => match pulse.window(Some(tau_s)) {
                Ok(w) => Ok(w.metadata.eta_truncated.max(0.0)),
                Err(Error::EmptyWaveform(_)) => Ok(0.0),
                Err(e) => Err(e),
            },
            None => scheme_efficiency(self.scheme, &self.params, tau_s),
        }
    }

    /// Efficiency at each `τ`, evaluated in parallel.
    pub fn sample(&self, taus: &[f64]) -> Result<Vec<(f64, f64)>> {
        taus.par_iter().map(|&t| Ok((t, self.efficiency(t)?))).collect()
    }

    pub fn crop_pulse(&self) -> Option<&CropPulse> {
        self.crop.as_ref()
    }
}

/// Samples the efficiency curve over the bracket and refines the best sample
/// by golden-section search between its neighbours.
pub fn optimize_mixing_time(scheme: Scheme, params: &SystemParams, opts: &MixingOptions) -> Result<SchemeResult> {
    let curve = SchemeCurve::new(scheme, params, &opts.synth)?;
    optimize_curve(&curve, params.j_hz, opts)
}

pub fn optimize_curve(curve: &SchemeCurve, j_hz: f64, opts: &MixingOptions) -> Result<SchemeResult> {
    let (lo, hi) = opts.bracket_s.unwrap_or((0.0, 3.0 / j_hz));
    if !(hi > lo && lo >= 0.0) || opts.samples < 3 {
        return Err(Error::InvalidParams(format!("bad mixing-time bracket ({lo}, {hi})")));
    }
    let n = opts.samples;
    let taus: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let samples = curve.sample(&taus)?;
    let (kmax, &(_, emax)) = samples
        .iter()
        .enumerate()
        .fold((0, &samples[0]), |best, cur| if cur.1 .1 > best.1 .1 { cur } else { best });
    let emin = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if emax - emin < 1e-12 {
        return Ok(SchemeResult { scheme: curve.scheme, tau_s: 0.0, efficiency: emax, curve: samples, flat: true });
    }
    let a = taus[kmax.saturating_sub(1)];
    let b = taus[(kmax + 1).min(n - 1)];
    let (tau, eff) = golden_section_max(|t| curve.efficiency(t), a, b, 1e-10 * (hi - lo))?;
    let (tau, eff) = if eff >= emax { (tau, eff) } else { (taus[kmax], emax) };
    Ok(SchemeResult { scheme: curve.scheme, tau_s: tau, efficiency: eff, curve: samples, flat: false })
}

/// Maximizes a unimodal function on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let t = (a + b) / 2.0;
    Ok((t, f(t)?))
}

/// Optimal efficiency of `scheme` at dimensionless rates (`J = 1 Hz`). CROP
/// uses the whole synthesized pulse; `tau_s` is then its duration.
pub fn best_efficiency(scheme: Scheme, rates: &RateSet, synth: &SynthOptions) -> Result<(f64, f64)> {
    let params = SystemParams::symmetric(rates.j_hz, rates.ka_hz, rates.kc_hz)?;
    match scheme {
        Scheme::Crop => {
            let pulse = CropPulse::new(rates, synth)?;
            let w = pulse.window(None)?;
            Ok((pulse.duration_s(), w.metadata.eta_truncated))
        }
        _ => {
            let r = optimize_mixing_time(scheme, &params, &MixingOptions::default())?;
            Ok((r.tau_s, r.efficiency))
        }
    }
}
