//! CROP pulse synthesis.
//!
//! The optimal transfer keeps two constants of motion: the ratio `l2/l1 = η`
//! of the transverse magnitudes and the angle `γ = γ*` between them. This
//! module integrates the reduced controlled system along that law and turns
//! the trajectory into a sampled rf waveform (amplitude and phase on the
//! source spin).
//!
//! Two trajectories are produced:
//!
//! * [`integrate_optimal_trajectory`] runs the two-dimensional `(r1, r2)`
//!   system with the saturated control law (the fastest member of the optimal
//!   family).
//! * [`realizable_trajectory`] runs the same law in the form an rf field on a
//!   single spin can actually produce. Once `γ` and `l2/l1` are pinned, the
//!   phase and amplitude of the field are fixed by the state, so the time
//!   course of `(u1, u2)` follows from the dynamics. Both trajectories conserve
//!   `r2² + η² r1²`, so they reach the same efficiency.

use std::f64::consts::PI;

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_for, RateSet, TransferBound};
use crate::error::{Error, Result};
use crate::spin::{free_evolution_generator, rotation_generator, Operator, ProductOperatorState, Spin, SystemParams};

/// Snapshot of the reduced variables. `l1 = r1 cos β1`, `l2 = r2 cos β2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub t_s: f64,
    pub r1: f64,
    pub r2: f64,
    pub l1: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
}

impl ReducedState {
    /// Builds the state from transverse and longitudinal parts of both vectors.
    pub fn from_components(t_s: f64, l1: f64, z1: f64, l2: f64, z2: f64, gamma: f64) -> Self {
        ReducedState {
            t_s,
            r1: l1.hypot(z1),
            r2: l2.hypot(z2),
            l1,
            l2,
            beta1: z1.atan2(l1),
            beta2: z2.atan2(l2),
            gamma,
        }
    }

    pub fn u1(&self) -> f64 {
        self.beta1.cos()
    }

    pub fn u2(&self) -> f64 {
        self.beta2.cos()
    }
}

/// Free drift of the transverse magnitudes at a fixed angle `γ` between them:
///
/// ```text
/// dl1/dt = πJ (-ξ l1 + χ cos(θ+γ) l2)
/// dl2/dt = πJ ( χ cos(θ-γ) l1 - ξ l2)
/// ```
pub fn reduced_drift(l1: f64, l2: f64, gamma: f64, rates: &RateSet) -> (f64, f64) {
    let (xi, chi, theta) = (rates.xi(), rates.chi(), rates.theta());
    let pj = PI * rates.j_hz;
    (
        pj * (-xi * l1 + chi * (theta + gamma).cos() * l2),
        pj * (chi * (theta - gamma).cos() * l1 - xi * l2),
    )
}

/// Right-hand side of the controlled `(r1, r2)` system.
pub fn reduced_rate(r1: f64, r2: f64, u1: f64, u2: f64, gamma: f64, rates: &RateSet) -> (f64, f64) {
    let (xi, chi, theta) = (rates.xi(), rates.chi(), rates.theta());
    let pj = PI * rates.j_hz;
    let c = chi * u1 * u2;
    (
        pj * (-xi * u1 * u1 * r1 + c * (theta + gamma).cos() * r2),
        pj * (c * (theta - gamma).cos() * r1 - xi * u2 * u2 * r2),
    )
}

/// Saturated optimal controls: `u2/u1 = η r1/r2` with the larger of the two
/// pinned at 1.
pub fn optimal_controls(r1: f64, r2: f64, bound: &TransferBound) -> Result<(f64, f64)> {
    if !(r1 > 0.0 || r2 > 0.0) {
        return Err(Error::UndefinedControls);
    }
    let er1 = bound.eta * r1;
    if r2 <= er1 {
        Ok(((r2 / er1).clamp(0.0, 1.0), 1.0))
    } else {
        Ok((1.0, (er1 / r2).clamp(0.0, 1.0)))
    }
}

const RK4_SUBSTEPS: usize = 10;
const STALL_TOLERANCE: f64 = 1e-10;

/// Integrates the reduced system from `r1 = 1, r2 = epsilon` with the saturated
/// optimal law and `γ = γ*`, sampling every `dt_sample_s`. Stops once the
/// transfer rate `dr2/dt` has fallen below `1e-10·πJ` after the crossover.
pub fn integrate_optimal_trajectory(
    rates: &RateSet,
    bound: &TransferBound,
    epsilon: f64,
    dt_sample_s: f64,
    horizon_s: f64,
) -> Result<Vec<ReducedState>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(dt_sample_s > 0.0 && horizon_s > 0.0) {
        return Err(Error::InvalidParams("sample step and horizon must be positive".into()));
    }
    let gamma = bound.gamma_star;
    let rhs = |r: [f64; 2]| -> Result<[f64; 2]> {
        let (u1, u2) = optimal_controls(r[0], r[1], bound)?;
        let (d1, d2) = reduced_rate(r[0], r[1], u1, u2, gamma, rates);
        Ok([d1, d2])
    };
    let snapshot = |t: f64, r: [f64; 2]| -> Result<ReducedState> {
        let (u1, u2) = optimal_controls(r[0], r[1], bound)?;
        let (l1, l2) = (r[0] * u1, r[1] * u2);
        let z1 = (r[0] * r[0] - l1 * l1).max(0.0).sqrt();
        let z2 = (r[1] * r[1] - l2 * l2).max(0.0).sqrt();
        Ok(ReducedState::from_components(t, l1, z1, l2, z2, gamma))
    };

    let h = dt_sample_s / RK4_SUBSTEPS as f64;
    let steps = (horizon_s / dt_sample_s).ceil() as usize;
    let stall = STALL_TOLERANCE * PI * rates.j_hz;
    let mut r = [1.0, epsilon];
    let mut out = vec![snapshot(0.0, r)?];
    for k in 1..=steps {
        for _ in 0..RK4_SUBSTEPS {
            r = rk4_step(&rhs, r, h)?;
        }
        if !(r[0].is_finite() && r[1].is_finite()) {
            return Err(Error::NonFinite { time_s: k as f64 * dt_sample_s, element: 0 });
        }
        let state = snapshot(k as f64 * dt_sample_s, r)?;
        out.push(state);
        let past_crossover = r[1] >= bound.eta * r[0];
        if past_crossover && rhs(r)?[1] < stall {
            return Ok(out);
        }
    }
    Err(Error::NotConverged { horizon_s, achieved_r2: r[1] })
}

fn rk4_step<const N: usize>(
    f: &impl Fn([f64; N]) -> Result<[f64; N]>,
    y: [f64; N],
    h: f64,
) -> Result<[f64; N]> {
    let add = |a: [f64; N], b: [f64; N], s: f64| -> [f64; N] {
        let mut c = a;
        for i in 0..N {
            c[i] += s * b[i];
        }
        c
    };
    let k1 = f(y)?;
    let k2 = f(add(y, k1, h / 2.0))?;
    let k3 = f(add(y, k2, h / 2.0))?;
    let k4 = f(add(y, k3, h))?;
    let mut out = y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// rf phase relative to the transverse part of the source vector that keeps
/// `γ` fixed:
///
/// ```text
/// tan φ = tan β1 / (tan β2 sin γ*) - cot γ*
/// ```
///
/// evaluated as a two-argument arctangent so that `β2 = 0` gives `π/2`.
pub fn rf_phase(beta1: f64, beta2: f64, gamma_star: f64) -> Result<f64> {
    let sg = gamma_star.sin();
    if sg.abs() < 1e-12 {
        return Err(Error::DegenerateGamma(gamma_star));
    }
    let (s1, c1) = beta1.sin_cos();
    let (s2, c2) = beta2.sin_cos();
    Ok((s1 * c2 - c1 * s2 * gamma_star.cos()).atan2(c1 * s2 * sg))
}

/// rf amplitude in Hz that keeps `l2/l1 = η`:
///
/// ```text
/// A = χJ (cos(θ-γ*) - η² cos(θ+γ*)) / (2η (tan β1 sin φ + tan β2 sin(γ*-φ)))
/// ```
pub fn rf_amplitude(beta1: f64, beta2: f64, phi: f64, bound: &TransferBound, j_hz: f64) -> Result<f64> {
    let denominator = beta1.tan() * phi.sin() + beta2.tan() * (bound.gamma_star - phi).sin();
    if !denominator.is_finite() || denominator.abs() < 1e-14 {
        return Err(Error::SingularAmplitude { denominator });
    }
    Ok(bound.chi * j_hz * amplitude_numerator(bound) / (2.0 * bound.eta * denominator))
}

/// `cos(θ-γ*) - η² cos(θ+γ*)`.
pub fn amplitude_numerator(bound: &TransferBound) -> f64 {
    (bound.theta - bound.gamma_star).cos() - bound.eta * bound.eta * (bound.theta + bound.gamma_star).cos()
}

/// A point of the rf-realizable optimal trajectory. `alpha` is the azimuth of
/// the source transverse vector; `phi` the rf phase relative to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub t_s: f64,
    pub l1: f64,
    pub z1: f64,
    pub l2: f64,
    pub z2: f64,
    pub alpha: f64,
    pub phi: f64,
    pub amplitude_hz: f64,
}

impl ManifoldPoint {
    pub fn reduced(&self, gamma: f64) -> ReducedState {
        ReducedState::from_components(self.t_s, self.l1, self.z1, self.l2, self.z2, gamma)
    }

    /// Absolute rf phase in the rotating frame.
    pub fn rf_phase_abs(&self) -> f64 {
        self.alpha + self.phi
    }
}

struct Manifold {
    pj: f64,
    eta: f64,
    gamma: f64,
    theta: f64,
    xi: f64,
    chi: f64,
    numerator: f64,
}

impl Manifold {
    fn new(rates: &RateSet, bound: &TransferBound) -> Self {
        Manifold {
            pj: PI * rates.j_hz,
            eta: bound.eta,
            gamma: bound.gamma_star,
            theta: bound.theta,
            xi: bound.xi,
            chi: bound.chi,
            numerator: amplitude_numerator(bound),
        }
    }

    /// Relative phase and angular amplitude at `y = [l1, z1, z2, alpha]`,
    /// in homogeneous form (no tangents, finite at both ends of the transfer).
    fn controls(&self, y: [f64; 4]) -> Result<(f64, f64)> {
        let [l1, z1, z2, _] = y;
        let (sg, cg) = self.gamma.sin_cos();
        let phi = (self.eta * z1 - z2 * cg).atan2(z2 * sg);
        let den = self.eta * z1 * phi.sin() + z2 * (self.gamma - phi).sin();
        if !(den.abs() > 0.0) {
            return Err(Error::SingularAmplitude { denominator: den });
        }
        Ok((phi, self.pj * self.chi * self.numerator * l1 / den))
    }

    fn rhs(&self, y: [f64; 4]) -> Result<[f64; 4]> {
        let [l1, z1, _, _] = y;
        let (phi, w) = self.controls(y)?;
        let l2 = self.eta * l1;
        Ok([
            self.pj * (-self.xi * l1 + self.chi * (self.theta + self.gamma).cos() * l2) + w * z1 * phi.sin(),
            -w * l1 * phi.sin(),
            w * l2 * (self.gamma - phi).sin(),
            self.pj * self.chi * self.eta * (self.theta + self.gamma).sin() - w * z1 / l1 * phi.cos(),
        ])
    }

    fn point(&self, t_s: f64, y: [f64; 4]) -> Result<ManifoldPoint> {
        let (phi, w) = self.controls(y)?;
        Ok(ManifoldPoint {
            t_s,
            l1: y[0],
            z1: y[1],
            l2: self.eta * y[0],
            z2: y[2],
            alpha: y[3],
            phi,
            amplitude_hz: w / (2.0 * PI),
        })
    }
}

const MANIFOLD_SUBSTEPS: usize = 2;
const R1_EXHAUSTED: f64 = 1e-6;

/// Integrates the rf-realizable optimal trajectory from the bootstrap state
/// (`l1 = ε/η`, `l2 = ε`, `z2 = 0`, `γ = γ*`) until the source vector has
/// decayed below `1e-6`. Returns the points at sample boundaries and at sample
/// midpoints, interleaved: `[b0, m0, b1, m1, ..., bN]`.
pub fn realizable_trajectory(
    rates: &RateSet,
    epsilon: f64,
    dt_sample_s: f64,
    horizon_s: f64,
) -> Result<Vec<ManifoldPoint>> {
    let bound = bound_for(rates);
    if bound.gamma_star.sin().abs() < 1e-12 {
        return Err(Error::DegenerateGamma(bound.gamma_star));
    }
    if !(epsilon > 0.0 && epsilon < bound.eta) {
        return Err(Error::InvalidParams(format!("epsilon must lie in (0, η), got {epsilon}")));
    }
    if !(dt_sample_s > 0.0 && horizon_s > 0.0) {
        return Err(Error::InvalidParams("sample step and horizon must be positive".into()));
    }
    let m = Manifold::new(rates, &bound);
    let l1 = epsilon / bound.eta;
    let mut y = [l1, (1.0 - l1 * l1).sqrt(), 0.0, 0.0];
    let f = |y: [f64; 4]| m.rhs(y);
    let h = dt_sample_s / (2 * MANIFOLD_SUBSTEPS) as f64;
    let steps = (horizon_s / dt_sample_s).ceil() as usize;
    let mut out = vec![m.point(0.0, y)?];
    for k in 0..steps {
        let t0 = k as f64 * dt_sample_s;
        for half in 1..=2 {
            for _ in 0..MANIFOLD_SUBSTEPS {
                y = rk4_step(&f, y, h)?;
            }
            if !y.iter().all(|v| v.is_finite()) || y[0] <= 0.0 {
                return Err(Error::NonFinite { time_s: t0, element: 0 });
            }
            if y[0].hypot(y[1]) > 1.0 + 1e-9 {
                return Err(Error::OffManifold { time_s: t0 });
            }
            out.push(m.point(t0 + half as f64 * dt_sample_s / 2.0, y)?);
        }
        if y[0].hypot(y[1]) < R1_EXHAUSTED {
            return Ok(out);
        }
    }
    Err(Error::NotConverged { horizon_s, achieved_r2: (bound.eta * y[0]).hypot(y[2]) })
}

/// Rf realization of the saturated reduced trajectory, in the interleaved
/// layout of [`realizable_trajectory`]. Exact for `γ* = π/2`, where the
/// manifold form has to pass an amplitude singularity at the crossover; the
/// singular samples are clamped to `ceiling_hz`.
/// Sample-step divisor for the saturated fallback, whose error is dominated by
/// the one sample straddling the crossover.
const SATURATED_REFINEMENT: usize = 20;

fn saturated_trajectory(
    rates: &RateSet,
    bound: &TransferBound,
    epsilon: f64,
    dt_sample_s: f64,
    horizon_s: f64,
    ceiling_hz: f64,
) -> Result<Vec<ManifoldPoint>> {
    let mut states = integrate_optimal_trajectory(rates, bound, epsilon, dt_sample_s / 2.0, horizon_s)?;
    if states.len() % 2 == 0 {
        states.pop();
    }
    let g = bound.gamma_star;
    let drift = PI * rates.j_hz * bound.chi * bound.eta * (bound.theta + g).sin();
    let z = |s: &ReducedState| (s.r1 * s.beta1.sin(), s.r2 * s.beta2.sin());
    let mut out = Vec::with_capacity(states.len());
    let mut alpha = 0.0;
    for k in (0..states.len() - 1).step_by(2) {
        let (b0, mid, b1) = (&states[k], &states[k + 1], &states[k + 2]);
        let phi = rf_phase(mid.beta1, mid.beta2, g)?;
        // rotation rate that reproduces the sampled z changes; integrates the
        // 1/sqrt amplitude spike at the crossover
        let (a1, a2) = (mid.l1 * phi.sin(), mid.l2 * (g - phi).sin());
        let ((z1a, z2a), (z1b, z2b)) = (z(b0), z(b1));
        let w = (-(z1b - z1a) * a1 + (z2b - z2a) * a2) / (dt_sample_s * (a1 * a1 + a2 * a2));
        let amp = (w / (2.0 * PI)).clamp(0.0, ceiling_hz);
        let tan1 = if mid.l1 > 0.0 { mid.beta1.tan() } else { 0.0 };
        let rate = drift - 2.0 * PI * amp * tan1 * phi.cos();
        let point = |s: &ReducedState, alpha: f64| {
            let (z1, z2) = z(s);
            ManifoldPoint { t_s: s.t_s, l1: s.l1, z1, l2: s.l2, z2, alpha, phi, amplitude_hz: amp }
        };
        if k == 0 {
            out.push(point(b0, alpha));
        }
        out.push(point(mid, alpha + rate * dt_sample_s / 2.0));
        alpha += rate * dt_sample_s;
        out.push(point(b1, alpha));
    }
    Ok(out)
}

/// One piecewise-constant rf sample. Within a segment the phase advances as
/// `phase + 2π·offset·s`, `s` being the time since the segment start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_s: f64,
    pub amplitude_hz: f64,
    pub phase_rad: f64,
    pub offset_hz: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveformMetadata {
    pub eta_predicted: f64,
    pub eta_truncated: f64,
    pub epsilon: f64,
    pub dt_s: f64,
    pub window_s: f64,
    pub gamma_star_rad: f64,
    pub theta_rad: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub metadata: WaveformMetadata,
}

impl Waveform {
    pub fn duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Start time of every segment.
    pub fn start_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let t0 = t;
                t += s.duration_s;
                t0
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::EmptyWaveform("no segments".into()));
        }
        for (k, s) in self.segments.iter().enumerate() {
            let ok = s.duration_s > 0.0
                && s.duration_s.is_finite()
                && s.amplitude_hz >= 0.0
                && s.amplitude_hz.is_finite()
                && s.phase_rad.is_finite()
                && s.offset_hz.is_finite();
            if !ok {
                return Err(Error::InvalidParams(format!("malformed waveform segment {k}: {s:?}")));
            }
        }
        Ok(())
    }

    /// Re-expresses the phase modulation as a carrier offset
    /// `ν = (1/2π) dφ/dt` (central differences of the unwrapped midpoint
    /// phases), keeping a residual phase per segment so that the phase at each
    /// segment midpoint is unchanged.
    pub fn to_frequency_form(&self) -> Waveform {
        let n = self.segments.len();
        let starts = self.start_times();
        let mid: Vec<f64> = (0..n).map(|k| starts[k] + self.segments[k].duration_s / 2.0).collect();
        let phase = unwrap(&self.midpoint_phases());
        let mut segments = self.segments.clone();
        for k in 0..n {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            let nu = if a == b { 0.0 } else { (phase[b] - phase[a]) / (2.0 * PI * (mid[b] - mid[a])) };
            let seg = &mut segments[k];
            seg.offset_hz = nu;
            seg.phase_rad = phase[k] - PI * nu * seg.duration_s;
        }
        Waveform { segments, metadata: self.metadata.clone() }
    }

    /// Inverse of [`Waveform::to_frequency_form`]: constant phase per segment,
    /// taken at the segment midpoint.
    pub fn to_phase_form(&self) -> Waveform {
        let segments = self
            .segments
            .iter()
            .zip(self.midpoint_phases())
            .map(|(s, p)| Segment { phase_rad: p, offset_hz: 0.0, ..*s })
            .collect();
        Waveform { segments, metadata: self.metadata.clone() }
    }

    fn midpoint_phases(&self) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| s.phase_rad + PI * s.offset_hz * s.duration_s)
            .collect()
    }
}

/// Removes `2π` jumps between consecutive samples.
pub fn unwrap(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut shift = 0.0_f64;
    for (k, &p) in phase.iter().enumerate() {
        if k > 0 {
            let d: f64 = p + shift - out[k - 1];
            shift -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
        }
        out.push(p + shift);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub epsilon: f64,
    /// Sample step; defaults to `1/(200 J)`.
    pub dt_s: Option<f64>,
    /// Symmetric truncation window around the transfer peak; full pulse when absent.
    pub window_s: Option<f64>,
    /// Amplitude ceiling; defaults to `50 J`.
    pub amplitude_ceiling_hz: Option<f64>,
    /// Integration horizon; defaults to `200/J`.
    pub horizon_s: Option<f64>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            epsilon: 1e-4,
            dt_s: None,
            window_s: None,
            amplitude_ceiling_hz: None,
            horizon_s: None,
        }
    }
}

/// Untruncated CROP pulse for one transfer step, ready to be windowed.
#[derive(Clone, Debug)]
pub struct CropPulse {
    pub rates: RateSet,
    pub bound: TransferBound,
    pub epsilon: f64,
    pub dt_s: f64,
    pub segments: Vec<Segment>,
    /// Midpoint of the sample with the largest `dr2/dt`.
    pub peak_time_s: f64,
    pub trajectory: Vec<ManifoldPoint>,
    pub warnings: Vec<String>,
    eta_predicted: f64,
}

impl CropPulse {
    pub fn new(rates: &RateSet, opts: &SynthOptions) -> Result<CropPulse> {
        let j = rates.j_hz;
        let dt = opts.dt_s.unwrap_or(1.0 / (200.0 * j));
        let ceiling = opts.amplitude_ceiling_hz.unwrap_or(50.0 * j);
        let horizon = opts.horizon_s.unwrap_or(200.0 / j);
        let bound = bound_for(rates);
        let mut warnings = Vec::new();
        let mut dt = dt;
        let trajectory = match realizable_trajectory(rates, opts.epsilon, dt, horizon) {
            Ok(t) => t,
            Err(Error::OffManifold { .. } | Error::NotConverged { .. }) => {
                dt /= SATURATED_REFINEMENT as f64;
                warnings.push(format!(
                    "gamma* = {} is too close to pi/2 for the manifold form; emitted from the saturated policy at dt = {dt} s",
                    bound.gamma_star
                ));
                saturated_trajectory(rates, &bound, opts.epsilon, dt, horizon, ceiling)?
            }
            Err(e) => return Err(e),
        };

        let mut clamped = 0usize;
        let n = (trajectory.len() - 1) / 2;
        let mut segments = Vec::with_capacity(n);
        let mut peak = (f64::NEG_INFINITY, 0.0);
        for k in 0..n {
            let (b0, mid, b1) = (&trajectory[2 * k], &trajectory[2 * k + 1], &trajectory[2 * k + 2]);
            let (phi, mut amp) = (mid.phi, mid.amplitude_hz);
            if amp > ceiling {
                amp = ceiling;
                clamped += 1;
            }
            segments.push(Segment {
                duration_s: dt,
                amplitude_hz: amp.max(0.0),
                phase_rad: mid.alpha + phi,
                offset_hz: 0.0,
            });
            let rate = (b1.l2.hypot(b1.z2) - b0.l2.hypot(b0.z2)) / dt;
            if rate > peak.0 {
                peak = (rate, mid.t_s);
            }
        }
        if clamped > 0 {
            warnings.push(format!("{clamped} samples clamped to the amplitude ceiling of {ceiling} Hz"));
        }
        let eta_predicted = subspace_efficiency(rates, &segments)?;
        Ok(CropPulse {
            rates: *rates,
            bound,
            epsilon: opts.epsilon,
            dt_s: dt,
            segments,
            peak_time_s: peak.1,
            trajectory,
            warnings,
            eta_predicted,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.segments.len() as f64 * self.dt_s
    }

    /// Predicted efficiency of the whole pulse, starting from pure source
    /// polarization.
    pub fn eta_predicted(&self) -> f64 {
        self.eta_predicted
    }

    /// Bootstrap state the synthesized trajectory starts from, laid out on the
    /// operators of `step`: source tilted so that `l2 = ε`, `l1 = ε/η` and
    /// `γ = γ*`.
    pub fn bootstrap_state(&self, step: TransferStep) -> ProductOperatorState {
        let p = &self.trajectory[0];
        let (a, b) = step.vectors();
        let (sa, ca) = p.alpha.sin_cos();
        let (sb, cb) = (p.alpha + self.bound.gamma_star).sin_cos();
        ProductOperatorState::from_pairs(&[
            (a[0], p.l1 * ca),
            (a[1], p.l1 * sa),
            (a[2], p.z1),
            (b[0], p.l2 * cb),
            (b[1], p.l2 * sb),
            (b[2], p.z2),
        ])
    }

    /// Keeps the samples whose midpoints fall inside a window of `window_s`
    /// centred on the transfer peak and recomputes the efficiency of what is
    /// left.
    pub fn window(&self, window_s: Option<f64>) -> Result<Waveform> {
        let total = self.duration_s();
        let mut warnings = self.warnings.clone();
        let segments: Vec<Segment> = match window_s {
            None => self.segments.clone(),
            Some(w) if !(w > 0.0) => {
                return Err(Error::EmptyWaveform(format!("truncation window {w} s leaves no samples")))
            }
            Some(w) => {
                if w > total {
                    warnings.push(format!(
                        "window {w} s exceeds the pulse duration {total} s; using the full pulse"
                    ));
                }
                let (lo, hi) = (self.peak_time_s - w / 2.0, self.peak_time_s + w / 2.0);
                self.segments
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| {
                        let mid = (*k as f64 + 0.5) * self.dt_s;
                        mid >= lo && mid <= hi
                    })
                    .map(|(_, s)| *s)
                    .collect()
            }
        };
        if segments.is_empty() {
            return Err(Error::EmptyWaveform(format!(
                "truncation window {:?} s shorter than one sample",
                window_s
            )));
        }
        let eta_truncated = subspace_efficiency(&self.rates, &segments)?;
        Ok(Waveform {
            segments,
            metadata: WaveformMetadata {
                eta_predicted: self.eta_predicted,
                eta_truncated,
                epsilon: self.epsilon,
                dt_s: self.dt_s,
                window_s: window_s.unwrap_or(total),
                gamma_star_rad: self.bound.gamma_star,
                theta_rad: self.bound.theta,
                warnings,
            },
        })
    }
}

/// Synthesizes the CROP waveform for the step governed by `rates`. The same
/// waveform serves `Iz -> 2IzSz` (applied to spin I with the I-side rates) and
/// `2IzSz -> Sz` (applied to spin S with the S-side rates).
pub fn synthesize_crop(rates: &RateSet, opts: &SynthOptions) -> Result<Waveform> {
    CropPulse::new(rates, opts)?.window(opts.window_s)
}

/// Transfer steps a waveform can drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferStep {
    /// `Iz -> 2IzSz`, rf on spin I.
    IzToIzSz,
    /// `2IzSz -> Sz`, rf on spin S.
    IzSzToSz,
}

impl TransferStep {
    pub fn spin(self) -> Spin {
        match self {
            TransferStep::IzToIzSz => Spin::I,
            TransferStep::IzSzToSz => Spin::S,
        }
    }

    pub fn rates(self, params: &SystemParams) -> RateSet {
        match self {
            TransferStep::IzToIzSz => params.i_side(),
            TransferStep::IzSzToSz => params.s_side(),
        }
    }

    /// Source and target vectors, ordered `(x, y, z)`.
    pub fn vectors(self) -> ([Operator; 3], [Operator; 3]) {
        use Operator::*;
        match self {
            TransferStep::IzToIzSz => ([Ix, Iy, Iz], [IxSz, IySz, IzSz]),
            TransferStep::IzSzToSz => ([IzSx, IzSy, IzSz], [Sx, Sy, Sz]),
        }
    }

    pub fn source(self) -> Operator {
        self.vectors().0[2]
    }

    pub fn target(self) -> Operator {
        self.vectors().1[2]
    }
}

/// Free-evolution and unit rf generators restricted to the invariant subspace
/// `{Ix, Iy, Iz, 2IxSz, 2IySz, 2IzSz}` of spin I.
pub struct SubspaceModel {
    pub free: Matrix6<f64>,
    pub rf_x: Matrix6<f64>,
    pub rf_y: Matrix6<f64>,
}

impl SubspaceModel {
    pub fn new(rates: &RateSet) -> Result<SubspaceModel> {
        let params = SystemParams::symmetric(rates.j_hz, rates.ka_hz, rates.kc_hz)?;
        let ops = {
            let (a, b) = TransferStep::IzToIzSz.vectors();
            [a[0], a[1], a[2], b[0], b[1], b[2]]
        };
        let restrict = |m: &crate::spin::GeneratorMatrix| {
            Matrix6::from_fn(|r, c| m[(ops[r].index(), ops[c].index())])
        };
        Ok(SubspaceModel {
            free: restrict(free_evolution_generator(&params)?.matrix()),
            rf_x: restrict(rotation_generator(Spin::I, 0.0).matrix()),
            rf_y: restrict(rotation_generator(Spin::I, PI / 2.0).matrix()),
        })
    }

    /// Generator of one segment in the frame rotating with its carrier offset.
    pub fn segment_generator(&self, seg: &Segment) -> Matrix6<f64> {
        let w = 2.0 * PI * seg.amplitude_hz;
        self.free + self.rf_x * (w * seg.phase_rad.cos()) + self.rf_y * (w * seg.phase_rad.sin())
    }

    /// States at every segment boundary, starting from `x0`.
    pub fn run(&self, segments: &[Segment], x0: Vector6<f64>) -> Vec<Vector6<f64>> {
        let mut x = x0;
        let mut out = Vec::with_capacity(segments.len() + 1);
        out.push(x);
        for seg in segments {
            let mut g = self.segment_generator(seg);
            if seg.offset_hz != 0.0 {
                g += self.z_rotation() * (-2.0 * PI * seg.offset_hz);
            }
            x = (g * seg.duration_s).exp() * x;
            if seg.offset_hz != 0.0 {
                x = (self.z_rotation() * (2.0 * PI * seg.offset_hz * seg.duration_s)).exp() * x;
            }
            out.push(x);
        }
        out
    }

    fn z_rotation(&self) -> Matrix6<f64> {
        // dIx = -Iy, dIy = Ix per unit angle, same on the antiphase pair
        let mut m = Matrix6::zeros();
        for base in [0, 3] {
            m[(base, base + 1)] = -1.0;
            m[(base + 1, base)] = 1.0;
        }
        m
    }
}

/// Largest target coefficient reached at a segment boundary when `segments`
/// act on pure source polarization.
pub fn subspace_efficiency(rates: &RateSet, segments: &[Segment]) -> Result<f64> {
    let model = SubspaceModel::new(rates)?;
    let x0 = Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
    Ok(model.run(segments, x0).iter().map(|x| x[5]).fold(f64::NEG_INFINITY, f64::max))
}
