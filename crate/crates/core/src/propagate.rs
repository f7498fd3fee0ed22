//! Full 15-dimensional propagation of pulse programs.
//!
//! Every element is applied as an exact exponential of a constant generator:
//! hard rotations as rotation matrices, delays and shaped segments as
//! `exp(G·dt)` with `G` the free-evolution generator plus the rf term.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{
    free_evolution_generator, hard_rotation, multiplet_components, rf_generator, z_rotation_generator,
    Generator, Operator, ProductOperatorState, Propagator, Spin, SystemParams,
};
use crate::synth::{TransferStep, Waveform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Element {
    /// Instantaneous, lossless rotation.
    HardRotation { spin: Spin, phase_rad: f64, angle_rad: f64 },
    Delay { duration_s: f64 },
    Shape { spin: Spin, waveform: Waveform },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PulseProgram {
    pub elements: Vec<Element>,
}

impl PulseProgram {
    pub fn new(elements: Vec<Element>) -> Self {
        PulseProgram { elements }
    }

    pub fn duration_s(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                Element::HardRotation { .. } => 0.0,
                Element::Delay { duration_s } => *duration_s,
                Element::Shape { waveform, .. } => waveform.duration_s(),
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.elements.iter().enumerate() {
            match e {
                Element::HardRotation { phase_rad, angle_rad, .. } => {
                    if !(phase_rad.is_finite() && angle_rad.is_finite()) {
                        return Err(Error::InvalidParams(format!("element {k}: non-finite rotation")));
                    }
                }
                Element::Delay { duration_s } => {
                    if !(*duration_s >= 0.0 && duration_s.is_finite()) {
                        return Err(Error::InvalidParams(format!("element {k}: bad delay {duration_s}")));
                    }
                }
                Element::Shape { waveform, .. } => waveform.validate()?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Longest single propagation step; `1e-3/J` when absent.
    pub dt_max_s: Option<f64>,
    /// Approximate number of recorded samples over the program; every step is
    /// recorded when absent.
    pub max_samples: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { dt_max_s: None, max_samples: Some(500) }
    }
}

/// Recorded samples of one run. Times are strictly increasing; an
/// instantaneous element replaces the sample at the time it acts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<ProductOperatorState>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&ProductOperatorState> {
        self.states.last()
    }

    fn record(&mut self, t: f64, state: ProductOperatorState) {
        match self.times.last() {
            Some(&last) if t <= last => *self.states.last_mut().unwrap() = state,
            _ => {
                self.times.push(t);
                self.states.push(state);
            }
        }
    }
}

struct Recorder {
    spacing: f64,
    next: f64,
}

impl Recorder {
    fn due(&mut self, t: f64) -> bool {
        if t + 1e-12 * self.spacing >= self.next {
            self.next = t + self.spacing;
            true
        } else {
            false
        }
    }
}

/// Propagates `initial` through `program`. Shape segments are split into equal
/// steps no longer than `dt_max`, never across segment boundaries; delays are
/// split the same way, which only affects sampling density.
pub fn run(
    program: &PulseProgram,
    params: &SystemParams,
    initial: &ProductOperatorState,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    program.validate()?;
    let g0 = free_evolution_generator(params)?;
    let dt_max = opts.dt_max_s.unwrap_or(1e-3 / params.j_hz);
    if !(dt_max > 0.0) {
        return Err(Error::InvalidParams(format!("dt_max must be positive, got {dt_max}")));
    }
    let total = program.duration_s();
    let spacing = match opts.max_samples {
        Some(n) if n > 0 && total > 0.0 => total / n as f64,
        _ => 0.0,
    };
    let mut rec = Recorder { spacing, next: 0.0 };
    let mut traj = TrajectoryRecord::default();
    let mut state = *initial;
    let mut t = 0.0;
    check_finite(&state, t, 0)?;
    traj.record(t, state);

    for (k, element) in program.elements.iter().enumerate() {
        match element {
            Element::HardRotation { spin, phase_rad, angle_rad } => {
                state = hard_rotation(*spin, *phase_rad, *angle_rad).apply(&state);
                check_finite(&state, t, k)?;
                traj.record(t, state);
            }
            Element::Delay { duration_s } => {
                let (steps, h) = split(*duration_s, dt_max);
                let p = g0.propagator(h);
                for i in 0..steps {
                    state = p.apply(&state);
                    t += h;
                    check_finite(&state, t, k)?;
                    if rec.due(t) || i + 1 == steps {
                        traj.record(t, state);
                    }
                }
            }
            Element::Shape { spin, waveform } => {
                for seg in &waveform.segments {
                    let (steps, h) = split(seg.duration_s, dt_max);
                    for i in 0..steps {
                        // phase advanced by the carrier offset at the start of this step
                        let phase = seg.phase_rad + 2.0 * PI * seg.offset_hz * (i as f64 * h);
                        let p = segment_propagator(&g0, *spin, seg.amplitude_hz, phase, seg.offset_hz, h);
                        state = p.apply(&state);
                        t += h;
                        check_finite(&state, t, k)?;
                        if rec.due(t) {
                            traj.record(t, state);
                        }
                    }
                }
                traj.record(t, state);
            }
        }
    }
    Ok(traj)
}

/// One step of a shaped segment. With a carrier offset the step is taken in
/// the frame co-rotating with the rf phase and rotated back at the end; the
/// free generator commutes with z rotations, so this is exact.
fn segment_propagator(
    g0: &Generator,
    spin: Spin,
    amplitude_hz: f64,
    phase_rad: f64,
    offset_hz: f64,
    h: f64,
) -> Propagator {
    let g = *g0 + rf_generator(spin, amplitude_hz, phase_rad, -offset_hz);
    let p = g.propagator(h);
    if offset_hz == 0.0 {
        p
    } else {
        z_rotation_generator(spin).propagator(2.0 * PI * offset_hz * h).then(&p)
    }
}

fn split(duration: f64, dt_max: f64) -> (usize, f64) {
    if duration <= 0.0 {
        return (0, 0.0);
    }
    let steps = (duration / dt_max).ceil().max(1.0) as usize;
    (steps, duration / steps as f64)
}

fn check_finite(state: &ProductOperatorState, t: f64, element: usize) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { time_s: t, element })
    }
}

/// Largest target coefficient over the recorded samples and the time it occurs.
pub fn transfer_efficiency(traj: &TrajectoryRecord, target: Operator) -> Result<(f64, f64)> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| (s[target], t))
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
        .ok_or(Error::EmptyTrajectory)
}

/// Reduced variables of one sample. `gamma` is the angle from the source to
/// the target transverse vector in `[0, 2π)`, absent when either vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub t_s: f64,
    pub r1: f64,
    pub r2: f64,
    pub l1: f64,
    pub l2: f64,
    pub gamma: Option<f64>,
    pub alpha_mag: f64,
    pub beta_mag: f64,
}

pub fn reduced_sample(t_s: f64, state: &ProductOperatorState, step: TransferStep) -> ReducedSample {
    let (src, dst) = step.vectors();
    let (ax, ay, az) = (state[src[0]], state[src[1]], state[src[2]]);
    let (bx, by, bz) = (state[dst[0]], state[dst[1]], state[dst[2]]);
    let l1 = ax.hypot(ay);
    let l2 = bx.hypot(by);
    let gamma = (l1 > 0.0 && l2 > 0.0).then(|| (ax * by - ay * bx).atan2(ax * bx + ay * by).rem_euclid(2.0 * PI));
    let m = multiplet_components(state);
    ReducedSample {
        t_s,
        r1: l1.hypot(az),
        r2: l2.hypot(bz),
        l1,
        l2,
        gamma,
        alpha_mag: m.alpha_magnitude(),
        beta_mag: m.beta_magnitude(),
    }
}

/// `(r1, r2, l1, l2, γ)` per sample for the `Iz -> 2IzSz` step.
pub fn reduced_projection(traj: &TrajectoryRecord) -> Vec<ReducedSample> {
    reduced_projection_for(traj, TransferStep::IzToIzSz)
}

pub fn reduced_projection_for(traj: &TrajectoryRecord, step: TransferStep) -> Vec<ReducedSample> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| reduced_sample(t, s, step))
        .collect()
}

/// Multiplet 3-vectors `(source ± target)/2` of a transfer step; `rf` on the
/// addressed spin rotates both alike, free evolution relaxes their transverse
/// parts at `ka ± kc`.
pub fn multiplet_vectors(state: &ProductOperatorState, step: TransferStep) -> ([f64; 3], [f64; 3]) {
    let (src, dst) = step.vectors();
    let v = |sign: f64| std::array::from_fn(|i| (state[src[i]] + sign * state[dst[i]]) / 2.0);
    (v(1.0), v(-1.0))
}

/// Relative magnitude lost by the β multiplet vector between the start and the
/// transfer peak: `1 - min |β(t)| / |β(0)|` over `t ≤ t_peak`.
pub fn beta_path_loss(traj: &TrajectoryRecord, step: TransferStep) -> Result<f64> {
    let (_, t_peak) = transfer_efficiency(traj, step.target())?;
    let norm = |s: &ProductOperatorState| {
        let b = multiplet_vectors(s, step).1;
        (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()
    };
    let b0 = norm(&traj.states[0]);
    if !(b0 > 0.0) {
        return Err(Error::InvalidParams("initial state has no β multiplet component".into()));
    }
    let min = traj
        .times
        .iter()
        .zip(&traj.states)
        .take_while(|(&t, _)| t <= t_peak)
        .map(|(_, s)| norm(s))
        .fold(f64::INFINITY, f64::min);
    Ok(1.0 - min / b0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Operator::*;
    use approx::assert_abs_diff_eq;

    fn every_step() -> RunOptions {
        RunOptions { dt_max_s: Some(1e-2), max_samples: None }
    }

    #[test]
    fn hard_y_pulse_turns_iz_into_ix() {
        let params = SystemParams::relaxation_free(1.0).unwrap();
        let prog = PulseProgram::new(vec![Element::HardRotation { spin: Spin::I, phase_rad: PI / 2.0, angle_rad: PI / 2.0 }]);
        let traj = run(&prog, &params, &ProductOperatorState::basis(Iz), &RunOptions::default()).unwrap();
        assert_eq!(traj.len(), 1);
        let s = traj.final_state().unwrap();
        assert_abs_diff_eq!(s[Ix], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[Iz], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn coupling_evolution_of_ix() {
        let params = SystemParams::relaxation_free(1.0).unwrap();
        let prog = PulseProgram::new(vec![Element::Delay { duration_s: 0.8 }]);
        let traj = run(&prog, &params, &ProductOperatorState::basis(Ix), &every_step()).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert_abs_diff_eq!(s[Ix], (PI * t).cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(s[IySz], (PI * t).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn multiplets_decay_at_their_rates() {
        let (ka, kc) = (1.0, 0.75);
        let params = SystemParams::symmetric(1.0, ka, kc).unwrap();
        let prog = PulseProgram::new(vec![Element::Delay { duration_s: 2.0 }]);
        let traj = run(&prog, &params, &ProductOperatorState::basis(Ix), &every_step()).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let m = multiplet_components(s);
            assert_abs_diff_eq!(m.alpha_magnitude(), 0.5 * (-PI * (ka + kc) * t).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(m.beta_magnitude(), 0.5 * (-PI * (ka - kc) * t).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn delays_compose() {
        let params = SystemParams::symmetric(1.0, 0.6, 0.2).unwrap();
        let x = ProductOperatorState::from_pairs(&[(Ix, 0.3), (IySz, -0.5), (Sx, 0.2), (IxSx, 0.4)]);
        let one = PulseProgram::new(vec![Element::Delay { duration_s: 0.7 }]);
        let two = PulseProgram::new(vec![Element::Delay { duration_s: 0.3 }, Element::Delay { duration_s: 0.4 }]);
        let a = *run(&one, &params, &x, &RunOptions::default()).unwrap().final_state().unwrap();
        let b = *run(&two, &params, &x, &RunOptions::default()).unwrap().final_state().unwrap();
        assert!((a.vector() - b.vector()).amax() < 1e-12);
    }

    #[test]
    fn rotation_then_inverse_is_identity() {
        let params = SystemParams::relaxation_free(1.0).unwrap();
        let x = ProductOperatorState::from_pairs(&[(Iz, 0.3), (IySz, -0.5), (Sx, 0.2), (IxSx, 0.4)]);
        let prog = PulseProgram::new(vec![
            Element::HardRotation { spin: Spin::I, phase_rad: 0.4, angle_rad: 1.1 },
            Element::HardRotation { spin: Spin::I, phase_rad: 0.4, angle_rad: -1.1 },
        ]);
        let y = *run(&prog, &params, &x, &RunOptions::default()).unwrap().final_state().unwrap();
        assert!((x.vector() - y.vector()).amax() < 1e-12);
    }

    #[test]
    fn free_evolution_never_grows_the_norm() {
        let params = SystemParams::new(1.0, 0.3, 0.5, 0.2, 0.4, -0.1).unwrap();
        let x = ProductOperatorState::from_vector(crate::spin::StateVector::from_fn(|i, _| (i as f64 * 0.37).sin()));
        let prog = PulseProgram::new(vec![Element::Delay { duration_s: 3.0 }]);
        let traj = run(&prog, &params, &x, &every_step()).unwrap();
        assert!(traj.states.windows(2).all(|w| w[1].norm() <= w[0].norm() + 1e-14));
    }

    #[test]
    fn identity_program_reads_initial_value() {
        let params = SystemParams::relaxation_free(1.0).unwrap();
        let x = ProductOperatorState::from_pairs(&[(IzSz, 0.6)]);
        let traj = run(&PulseProgram::default(), &params, &x, &RunOptions::default()).unwrap();
        assert_eq!(transfer_efficiency(&traj, IzSz).unwrap(), (0.6, 0.0));
        assert!(matches!(transfer_efficiency(&TrajectoryRecord::default(), IzSz), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn projection_examples() {
        let s = reduced_sample(0.0, &ProductOperatorState::basis(Iz), TransferStep::IzToIzSz);
        assert_eq!((s.r1, s.l1, s.r2, s.gamma), (1.0, 0.0, 0.0, None));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = reduced_sample(0.0, &ProductOperatorState::from_pairs(&[(Ix, h), (IySz, h)]), TransferStep::IzToIzSz);
        assert_abs_diff_eq!(s.l1, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.l2, h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.gamma.unwrap(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn nan_input_is_reported() {
        let params = SystemParams::relaxation_free(1.0).unwrap();
        let x = ProductOperatorState::from_pairs(&[(Ix, f64::NAN)]);
        let prog = PulseProgram::new(vec![Element::Delay { duration_s: 1.0 }]);
        assert!(matches!(run(&prog, &params, &x, &RunOptions::default()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn program_json_round_trip() {
        let prog = PulseProgram::new(vec![
            Element::HardRotation { spin: Spin::I, phase_rad: 0.0, angle_rad: 1.0 },
            Element::Delay { duration_s: 0.5 },
        ]);
        let text = serde_json::to_string(&prog).unwrap();
        assert!(text.starts_with("[{\"type\":\"hard_rotation\""));
        assert_eq!(serde_json::from_str::<PulseProgram>(&text).unwrap(), prog);
    }

    #[test]
    fn beta_path_loss_follows_slow_multiplet() {
        // a bare delay from Ix: |β| decays at π(ka - kc) until the target peaks
        let params = SystemParams::symmetric(1.0, 1.0, 0.5).unwrap();
        let prog = PulseProgram::new(vec![Element::Delay { duration_s: 0.3 }]);
        let traj = run(&prog, &params, &ProductOperatorState::basis(Ix), &every_step()).unwrap();
        let (_, t_peak) = transfer_efficiency(&traj, TransferStep::IzToIzSz.target()).unwrap();
        let loss = beta_path_loss(&traj, TransferStep::IzToIzSz).unwrap();
        assert_abs_diff_eq!(loss, 1.0 - (-PI * 0.5 * t_peak).exp(), epsilon = 1e-12);
        let (a, b) = multiplet_vectors(&ProductOperatorState::basis(Iz), TransferStep::IzToIzSz);
        assert_eq!((a, b), ([0.0, 0.0, 0.5], [0.0, 0.0, 0.5]));
    }
}
