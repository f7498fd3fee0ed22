//! Command-line front end. The binary only parses arguments and maps the
//! outcome to an exit code; everything else lives here so it can be tested.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{crop_program, optimize_mixing_time, scheme_program, staged_crop_program, MixingOptions, Scheme, SchemeCurve};
use crate::bounds::{bound_for, RateSet};
use crate::error::{Error, Result};
use crate::oracle::{ascent_search, ceiling_check_against, AscentOptions, CeilingOptions, CeilingReport};
use crate::propagate::{beta_path_loss, run, transfer_efficiency, PulseProgram, RunOptions};
use crate::report::{comparison_csv, to_json, trajectory_csv, waveform_csv, write_atomic, BoundReport, ComparisonRow};
use crate::spin::{Operator, ProductOperatorState, SystemParams};
use crate::synth::{CropPulse, SynthOptions, TransferStep};

/// Exit code for usage and parameter errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit code when the oracle finds a schedule above the claimed bound.
pub const EXIT_FALSIFIED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crop", version, about = "Relaxation-optimized coherence transfer: bounds, pulses, simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output directory.
    #[arg(long, env = "CROP_OUT_DIR", default_value = ".", global = true)]
    pub out: PathBuf,
}

/// System parameters, either inline (Hz) or from a JSON file. Defaults: `J = 1`,
/// `ka = J`, `kc = 0.75 ka`, S-side rates equal to the I-side ones.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Scalar coupling J in Hz [default: 1].
    #[arg(long = "J", global = true)]
    pub j: Option<f64>,
    /// Auto-relaxation rate of the I-spin transverse coherence in Hz [default: J].
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub ka: Option<f64>,
    /// Cross-correlated relaxation rate on the I side in Hz [default: 0.75 ka].
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kc: Option<f64>,
    /// S-side auto-relaxation rate in Hz [default: ka].
    #[arg(long = "ka-s", global = true, allow_hyphen_values = true)]
    pub ka_s: Option<f64>,
    /// S-side cross-correlated relaxation rate in Hz [default: kc].
    #[arg(long = "kc-s", global = true, allow_hyphen_values = true)]
    pub kc_s: Option<f64>,
    /// JSON file with keys J_hz, k_dd_hz, k_csa_i_hz, k_csa_s_hz, k_ddcsa_i_hz, k_ddcsa_s_hz.
    #[arg(long, global = true, conflicts_with_all = ["j", "ka", "kc", "ka_s", "kc_s"])]
    pub params: Option<PathBuf>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<SystemParams> {
        if let Some(path) = &self.params {
            let p: SystemParams = serde_json::from_slice(&fs::read(path)?)?;
            p.validate()?;
            return Ok(p);
        }
        let j = self.j.unwrap_or(1.0);
        let ka = self.ka.unwrap_or(j);
        let kc = self.kc.unwrap_or(0.75 * ka);
        SystemParams::from_net_rates(j, ka, kc, self.ka_s.unwrap_or(ka), self.kc_s.unwrap_or(kc))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Bootstrap magnitude of the target transverse vector.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Waveform sample step in seconds; `1/(200 J)` when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Truncation window in seconds, centred on the transfer peak; full pulse when absent.
    #[arg(long)]
    pub window: Option<f64>,
}

impl SynthArgs {
    pub fn options(&self) -> SynthOptions {
        SynthOptions { epsilon: self.epsilon, dt_s: self.dt, window_s: self.window, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    /// `Iz -> 2IzSz`, rf on spin I.
    I,
    /// `2IzSz -> Sz`, rf on spin S.
    S,
}

impl From<StepArg> for TransferStep {
    fn from(s: StepArg) -> Self {
        match s {
            StepArg::I => TransferStep::IzToIzSz,
            StepArg::S => TransferStep::IzSzToSz,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Physical limits of both transfer steps and the composite bounds.
    Bound,
    /// Synthesize a CROP waveform.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, value_enum, default_value_t = StepArg::I)]
        step: StepArg,
        /// Also write the waveform with a smooth phase and per-sample carrier offsets.
        #[arg(long)]
        frequency_form: bool,
    },
    /// Propagate a pulse program or a named scheme and report the transfer.
    Simulate {
        /// Pulse program JSON (array of elements).
        #[arg(long, conflicts_with = "scheme")]
        program: Option<PathBuf>,
        /// crop, inept, cript or crinept.
        #[arg(long)]
        scheme: Option<String>,
        /// With `--scheme crop`: run both steps, `Iz -> 2IzSz -> Sz`.
        #[arg(long)]
        staged: bool,
        /// Mixing time for conventional schemes; optimized when absent.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value = "Iz")]
        initial: String,
        /// Target operator; `IzSz`, or `Sz` for a staged run, when absent.
        #[arg(long)]
        target: Option<String>,
        /// Longest propagation step in seconds; `1e-3/J` when absent.
        #[arg(long)]
        dt_max: Option<f64>,
        /// Approximate number of trajectory rows.
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Efficiency versus relaxation (grid) and versus transfer time, per scheme.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "crop,inept,cript,crinept")]
        schemes: Vec<String>,
        /// `ka/J` values of the grid.
        #[arg(long, value_delimiter = ',', default_values_t = default_grid_ka())]
        grid_ka: Vec<f64>,
        /// `kc/ka` values of the grid.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.75, 0.95, 1.0])]
        ratio_kc: Vec<f64>,
        /// Longest transfer time of the time curves, in seconds; `10/J` when absent.
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 101)]
        t_samples: usize,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Check the bound with random schedules and local ascent.
    Verify {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0])]
        grid_ka: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 0.75, 0.95])]
        ratio_kc: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Segments of the ascent schedules.
        #[arg(long, default_value_t = 64)]
        segments: usize,
        #[arg(long, default_value_t = 4000)]
        iterations: u64,
        #[arg(long)]
        no_ascent: bool,
        /// Scales the efficiency claim the random schedules are checked against.
        #[arg(long, hide = true)]
        corrupt_eta: Option<f64>,
    },
}

fn default_grid_ka() -> Vec<f64> {
    (1..=40).map(|k| k as f64 / 10.0).collect()
}

/// Result of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Falsified,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::Falsified => EXIT_FALSIFIED,
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let params = cli.params.resolve()?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Bound => cmd_bound(&params, out),
        Command::Synth { synth, step, frequency_form } => cmd_synth(&params, out, synth, (*step).into(), *frequency_form),
        Command::Simulate { program, scheme, staged, tau, initial, target, dt_max, samples, synth } => {
            let source = match (program, scheme) {
                (Some(p), _) => ProgramSource::File(p.clone()),
                (None, Some(s)) => ProgramSource::Scheme { scheme: s.parse()?, staged: *staged, tau_s: *tau },
                (None, None) => return Err(Error::InvalidParams("simulate needs --program or --scheme".into())),
            };
            let run = SimulateRun {
                source,
                initial: initial.parse()?,
                target: target.as_deref().map(str::parse).transpose()?,
                run: RunOptions { dt_max_s: *dt_max, max_samples: Some(*samples) },
                synth: synth.options(),
            };
            cmd_simulate(&params, out, &run)
        }
        Command::Compare { schemes, grid_ka, ratio_kc, t_max, t_samples, synth } => {
            let schemes = schemes.iter().map(|s| s.parse()).collect::<Result<Vec<Scheme>>>()?;
            cmd_compare(&params, out, &schemes, grid_ka, ratio_kc, *t_max, *t_samples, &synth.options())
        }
        Command::Verify { grid_ka, ratio_kc, trials, seed, segments, iterations, no_ascent, corrupt_eta } => {
            let ceiling = CeilingOptions { trials: *trials, seed: *seed, ..Default::default() };
            let ascent = (!no_ascent).then_some(AscentOptions {
                segments: *segments,
                iterations: *iterations,
                seed: *seed,
                ..Default::default()
            });
            cmd_verify(out, grid_ka, ratio_kc, &ceiling, ascent.as_ref(), corrupt_eta.unwrap_or(1.0))
        }
    }
}

pub fn cmd_bound(params: &SystemParams, out: &Path) -> Result<Outcome> {
    let bytes = to_json(&BoundReport::new(params)?)?;
    write_atomic(&out.join("bound.json"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(Outcome::Ok)
}

pub fn cmd_synth(params: &SystemParams, out: &Path, synth: &SynthArgs, step: TransferStep, frequency_form: bool) -> Result<Outcome> {
    let opts = synth.options();
    let waveform = CropPulse::new(&step.rates(params), &opts)?.window(opts.window_s)?;
    for w in &waveform.metadata.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(&out.join("waveform.csv"), &waveform_csv(&waveform)?)?;
    write_atomic(&out.join("waveform.json"), &to_json(&waveform.metadata)?)?;
    if frequency_form {
        write_atomic(&out.join("waveform_frequency.csv"), &waveform_csv(&waveform.to_frequency_form())?)?;
    }
    println!(
        "{} segments, {} s, eta_truncated {} (bound {})",
        waveform.segments.len(),
        waveform.duration_s(),
        waveform.metadata.eta_truncated,
        bound_for(&step.rates(params)).eta
    );
    Ok(Outcome::Ok)
}

#[derive(Debug, Clone)]
pub enum ProgramSource {
    File(PathBuf),
    Scheme { scheme: Scheme, staged: bool, tau_s: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct SimulateRun {
    pub source: ProgramSource,
    pub initial: Operator,
    pub target: Option<Operator>,
    pub run: RunOptions,
    pub synth: SynthOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub program: String,
    pub initial: &'static str,
    pub target: &'static str,
    pub efficiency: f64,
    pub time_s: f64,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    /// Relative loss of the β multiplet vector up to the transfer peak.
    pub beta_path_loss: f64,
}

pub fn cmd_simulate(params: &SystemParams, out: &Path, sim: &SimulateRun) -> Result<Outcome> {
    let (program, name, tau_s, staged) = match &sim.source {
        ProgramSource::File(path) => {
            let prog: PulseProgram = serde_json::from_slice(&fs::read(path)?)?;
            (prog, path.display().to_string(), None, false)
        }
        ProgramSource::Scheme { scheme: Scheme::Crop, staged, .. } => {
            let prog = if *staged {
                staged_crop_program(params, &sim.synth)?
            } else {
                crop_program(params, TransferStep::IzToIzSz, &sim.synth)?
            };
            (prog, Scheme::Crop.name().to_string(), None, *staged)
        }
        ProgramSource::Scheme { scheme, tau_s, .. } => {
            let tau = match tau_s {
                Some(t) => *t,
                None => optimize_mixing_time(*scheme, params, &MixingOptions::default())?.tau_s,
            };
            (scheme_program(*scheme, params, tau)?, scheme.name().to_string(), Some(tau), false)
        }
    };
    program.validate()?;
    let target = sim.target.unwrap_or(if staged { Operator::Sz } else { Operator::IzSz });
    let step = if target == Operator::Sz { TransferStep::IzSzToSz } else { TransferStep::IzToIzSz };
    let traj = run(&program, params, &ProductOperatorState::basis(sim.initial), &sim.run)?;
    let (efficiency, time_s) = transfer_efficiency(&traj, target)?;
    let report = SimulateReport {
        program: name,
        initial: sim.initial.name(),
        target: target.name(),
        efficiency,
        time_s,
        duration_s: program.duration_s(),
        tau_s,
        beta_path_loss: beta_path_loss(&traj, TransferStep::IzToIzSz).unwrap_or(f64::NAN),
    };
    write_atomic(&out.join("trajectory.csv"), &trajectory_csv(&traj, step)?)?;
    let bytes = to_json(&report)?;
    write_atomic(&out.join("efficiency.json"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(Outcome::Ok)
}

/// Efficiency of `scheme` at one grid point, or `None` where it has no
/// waveform (CROP at `kc = ka`, whose bound is only approached asymptotically).
pub fn grid_efficiency(scheme: Scheme, rates: &RateSet, synth: &SynthOptions) -> Result<Option<(f64, f64)>> {
    let params = SystemParams::symmetric(rates.j_hz, rates.ka_hz, rates.kc_hz)?;
    match scheme {
        Scheme::Crop => match CropPulse::new(rates, synth) {
            Ok(pulse) => {
                let w = pulse.window(synth.window_s)?;
                Ok(Some((w.duration_s(), w.metadata.eta_truncated)))
            }
            Err(Error::DegenerateGamma(_)) => Ok(None),
            Err(e) => Err(e),
        },
        _ => {
            let r = optimize_mixing_time(scheme, &params, &MixingOptions::default())?;
            Ok(Some((r.tau_s, r.efficiency)))
        }
    }
}

/// Grid rows (analytic bound first, then each scheme) for every
/// `(kc/ka, ka/J)` pair at `J = 1`.
pub fn grid_rows(schemes: &[Scheme], grid_ka: &[f64], ratio_kc: &[f64], synth: &SynthOptions) -> Result<Vec<ComparisonRow>> {
    let points: Vec<(f64, f64)> = ratio_kc.iter().flat_map(|&r| grid_ka.iter().map(move |&k| (k, r))).collect();
    let rows: Vec<Vec<ComparisonRow>> = points
        .par_iter()
        .map(|&(ka, ratio)| {
            let rates = RateSet::from_ratios(ka, ratio)?;
            let mut rows = vec![ComparisonRow {
                scheme: crate::report::BOUND_LABEL,
                ka_over_j: ka,
                kc_over_ka: ratio,
                tau_s: f64::NAN,
                efficiency: bound_for(&rates).eta,
            }];
            for &s in schemes {
                if let Some((tau, eff)) = grid_efficiency(s, &rates, synth)? {
                    rows.push(ComparisonRow::new(s, ka, ratio, tau, eff));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Efficiency against total transfer time at fixed parameters. The bound rows
/// carry the time-independent limit.
pub fn time_rows(schemes: &[Scheme], params: &SystemParams, taus: &[f64], synth: &SynthOptions) -> Result<Vec<ComparisonRow>> {
    let rates = params.i_side();
    let (ka, ratio) = (rates.ka_hz / rates.j_hz, if rates.ka_hz > 0.0 { rates.kc_hz / rates.ka_hz } else { 0.0 });
    let eta = bound_for(&rates).eta;
    let mut rows: Vec<ComparisonRow> = taus
        .iter()
        .map(|&t| ComparisonRow { scheme: crate::report::BOUND_LABEL, ka_over_j: ka, kc_over_ka: ratio, tau_s: t, efficiency: eta })
        .collect();
    for &s in schemes {
        let curve = match SchemeCurve::new(s, params, synth) {
            Ok(c) => c,
            Err(Error::DegenerateGamma(_)) => continue,
            Err(e) => return Err(e),
        };
        for (t, e) in curve.sample(taus)? {
            rows.push(ComparisonRow::new(s, ka, ratio, t, e));
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_compare(
    params: &SystemParams,
    out: &Path,
    schemes: &[Scheme],
    grid_ka: &[f64],
    ratio_kc: &[f64],
    t_max: Option<f64>,
    t_samples: usize,
    synth: &SynthOptions,
) -> Result<Outcome> {
    if t_samples < 2 {
        return Err(Error::InvalidParams("--t-samples must be at least 2".into()));
    }
    let grid = grid_rows(schemes, grid_ka, ratio_kc, synth)?;
    write_atomic(&out.join("compare_grid.csv"), &comparison_csv(&grid)?)?;
    let t_max = t_max.unwrap_or(10.0 / params.j_hz);
    let taus: Vec<f64> = (0..t_samples).map(|k| t_max * k as f64 / (t_samples - 1) as f64).collect();
    let time = time_rows(schemes, params, &taus, synth)?;
    write_atomic(&out.join("compare_time.csv"), &comparison_csv(&time)?)?;
    println!("{} grid rows, {} time rows", grid.len(), time.len());
    Ok(Outcome::Ok)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyPoint {
    pub ka_over_j: f64,
    pub kc_over_ka: f64,
    pub eta: f64,
    pub ceiling: CeilingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ascent_best_r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ascent_start_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub falsified: bool,
    pub points: Vec<VerifyPoint>,
}

pub fn verify_grid(
    grid_ka: &[f64],
    ratio_kc: &[f64],
    ceiling: &CeilingOptions,
    ascent: Option<&AscentOptions>,
    eta_scale: f64,
) -> Result<VerifyReport> {
    let mut points = Vec::new();
    for &ratio in ratio_kc {
        for &ka in grid_ka {
            let rates = RateSet::from_ratios(ka, ratio)?;
            let eta = bound_for(&rates).eta;
            let ceiling = ceiling_check_against(&rates, eta * eta_scale, ceiling);
            let ascent = ascent.map(|o| ascent_search(&rates, o)).transpose()?;
            points.push(VerifyPoint {
                ka_over_j: ka,
                kc_over_ka: ratio,
                eta,
                ascent_best_r2: ascent.as_ref().map(|a| a.best_r2),
                ascent_start_values: ascent.map(|a| a.start_values),
                ceiling,
            });
        }
    }
    Ok(VerifyReport { falsified: points.iter().any(|p| p.ceiling.falsified), points })
}

pub fn cmd_verify(
    out: &Path,
    grid_ka: &[f64],
    ratio_kc: &[f64],
    ceiling: &CeilingOptions,
    ascent: Option<&AscentOptions>,
    eta_scale: f64,
) -> Result<Outcome> {
    let mut report = verify_grid(grid_ka, ratio_kc, ceiling, ascent, eta_scale)?;
    for (k, p) in report.points.iter_mut().enumerate() {
        let schedule = if p.ceiling.falsified { p.ceiling.best_schedule.take() } else { None };
        println!(
            "ka/J {} kc/ka {}: eta {} max random {}{}{}",
            p.ka_over_j,
            p.kc_over_ka,
            p.eta,
            p.ceiling.max_found,
            p.ascent_best_r2.map(|a| format!(" ascent {a}")).unwrap_or_default(),
            if p.ceiling.falsified { " FALSIFIED" } else { "" }
        );
        if let Some(s) = schedule {
            let path = out.join(format!("falsifying_schedule_{k}.json"));
            write_atomic(&path, &to_json(&s)?)?;
            eprintln!("falsifying schedule written to {}", path.display());
        }
        p.ceiling.best_schedule = None;
    }
    write_atomic(&out.join("verify.json"), &to_json(&report)?)?;
    Ok(if report.falsified { Outcome::Falsified } else { Outcome::Ok })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => o.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
