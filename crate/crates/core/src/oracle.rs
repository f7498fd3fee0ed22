//! Independent checks of the efficiency bound on the reduced `(r1, r2)`
//! system: a Monte-Carlo ceiling test over random piecewise-constant controls
//! and a gradient ascent that tries to reach the bound.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_for, RateSet, TransferBound};
use crate::error::{Error, Result};
use crate::synth::{integrate_optimal_trajectory, optimal_controls};

/// Margin by which a schedule may exceed the bound before it counts as a
/// falsification.
pub const CEILING_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub duration_s: f64,
    pub u1: f64,
    pub u2: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlSchedule {
    pub segments: Vec<ControlSegment>,
}

impl ControlSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidParams("control schedule needs at least one segment".into()));
        }
        for (k, s) in self.segments.iter().enumerate() {
            let ok = s.duration_s >= 0.0
                && s.duration_s.is_finite()
                && (0.0..=1.0).contains(&s.u1)
                && (0.0..=1.0).contains(&s.u2)
                && s.gamma.is_finite();
            if !ok {
                return Err(Error::InvalidParams(format!("control segment {k} out of range: {s:?}")));
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }
}

/// Generator of the reduced system for fixed controls.
pub fn reduced_matrix(u1: f64, u2: f64, gamma: f64, rates: &RateSet) -> Matrix2<f64> {
    let (xi, chi, theta) = (rates.xi(), rates.chi(), rates.theta());
    let c = chi * u1 * u2;
    Matrix2::new(
        -xi * u1 * u1,
        c * (theta + gamma).cos(),
        c * (theta - gamma).cos(),
        -xi * u2 * u2,
    ) * (PI * rates.j_hz)
}

/// Closed-form exponential of a real 2×2 matrix.
pub fn expm2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let mean = (m[(0, 0)] + m[(1, 1)]) / 2.0;
    let half_diff = (m[(0, 0)] - m[(1, 1)]) / 2.0;
    let q = half_diff * half_diff + m[(0, 1)] * m[(1, 0)];
    let s = q.abs().sqrt();
    // cosh/cos of s and sinh(s)/s or sin(s)/s, with the series near s = 0
    let (c, sc) = if s < 1e-6 {
        (1.0 + q / 2.0, 1.0 + q / 6.0)
    } else if q > 0.0 {
        (s.cosh(), s.sinh() / s)
    } else {
        (s.cos(), s.sin() / s)
    };
    let traceless = m - Matrix2::identity() * mean;
    (Matrix2::identity() * c + traceless * sc) * mean.exp()
}

/// Final `r2` after applying `schedule` to `r1 = 1, r2 = 0`.
pub fn reduced_propagate(schedule: &ControlSchedule, rates: &RateSet) -> f64 {
    reduced_path(schedule, rates).last().map(|r| r[1]).unwrap_or(0.0)
}

/// `(r1, r2)` at every segment boundary.
pub fn reduced_path(schedule: &ControlSchedule, rates: &RateSet) -> Vec<Vector2<f64>> {
    let mut r = Vector2::new(1.0, 0.0);
    let mut out = vec![r];
    for s in &schedule.segments {
        r = expm2(&(reduced_matrix(s.u1, s.u2, s.gamma, rates) * s.duration_s)) * r;
        out.push(r);
    }
    out
}

/// The saturated optimal law sampled every `dt_s`, as a control schedule.
pub fn crop_schedule(rates: &RateSet, epsilon: f64, dt_s: f64) -> Result<ControlSchedule> {
    let bound = bound_for(rates);
    let traj = integrate_optimal_trajectory(rates, &bound, epsilon, dt_s, 200.0 / rates.j_hz)?;
    let segments = traj
        .windows(2)
        .map(|w| {
            let (r1, r2) = ((w[0].r1 + w[1].r1) / 2.0, (w[0].r2 + w[1].r2) / 2.0);
            let (u1, u2) = optimal_controls(r1, r2, &bound)?;
            Ok(ControlSegment { duration_s: w[1].t_s - w[0].t_s, u1, u2, gamma: bound.gamma_star })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlSchedule { segments })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeilingOptions {
    pub trials: usize,
    pub max_segments: usize,
    /// Upper limit on the total duration of a random schedule; `20/J` when absent.
    pub max_duration_s: Option<f64>,
    pub seed: u64,
}

impl Default for CeilingOptions {
    fn default() -> Self {
        CeilingOptions { trials: 100_000, max_segments: 20, max_duration_s: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeilingReport {
    pub eta_bound: f64,
    pub max_found: f64,
    pub trials: usize,
    pub falsified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_schedule: Option<ControlSchedule>,
}

/// Random schedule for one trial. Every trial owns its own ChaCha stream, so
/// the draw does not depend on how trials are scheduled across threads.
pub fn random_schedule(rates: &RateSet, opts: &CeilingOptions, trial: u64) -> ControlSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(trial);
    let max_t = opts.max_duration_s.unwrap_or(20.0 / rates.j_hz);
    let n = rng.gen_range(1..=opts.max_segments.max(1));
    let total = max_t * rng.gen::<f64>();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let norm: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let segments = weights
        .iter()
        .map(|w| ControlSegment {
            duration_s: total * w / norm,
            u1: rng.gen(),
            u2: rng.gen(),
            gamma: rng.gen_range(0.0..2.0 * PI),
        })
        .collect();
    ControlSchedule { segments }
}

/// Largest final `r2` over random schedules, checked against the bound.
pub fn random_ceiling_check(rates: &RateSet, opts: &CeilingOptions) -> CeilingReport {
    ceiling_check_against(rates, bound_for(rates).eta, opts)
}

/// As [`random_ceiling_check`] but against a caller-supplied efficiency
/// claim; lets the harness prove it can detect a wrong bound.
pub fn ceiling_check_against(rates: &RateSet, eta_claim: f64, opts: &CeilingOptions) -> CeilingReport {
    let (best_trial, max_found) = (0..opts.trials as u64)
        .into_par_iter()
        .map(|k| (k, reduced_propagate(&random_schedule(rates, opts, k), rates)))
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
        );
    CeilingReport {
        eta_bound: eta_claim,
        max_found,
        trials: opts.trials,
        falsified: max_found > eta_claim + CEILING_TOLERANCE,
        best_schedule: (opts.trials > 0).then(|| random_schedule(rates, opts, best_trial)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    pub segments: usize,
    /// Total duration available; each segment may use `horizon/segments`.
    /// `20/J` when absent.
    pub horizon_s: Option<f64>,
    /// L-BFGS iterations per start.
    pub iterations: u64,
    /// Starts besides the one seeded from the optimal law: half of them jitter
    /// that seed, the rest are uniform random.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions { segments: 64, horizon_s: None, iterations: 4000, random_starts: 2, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentReport {
    pub eta_bound: f64,
    pub best_r2: f64,
    /// Final `r2` of every start, seeded start first.
    pub start_values: Vec<f64>,
    pub best_schedule: ControlSchedule,
}

/// Local ascent of the final `r2` over `N`-segment schedules. Gradients come
/// from an adjoint sweep with exact derivatives of each segment exponential.
pub fn ascent_search(rates: &RateSet, opts: &AscentOptions) -> Result<AscentReport> {
    let n = opts.segments;
    if n == 0 {
        return Err(Error::InvalidParams("ascent needs at least one segment".into()));
    }
    let horizon = opts.horizon_s.unwrap_or(20.0 / rates.j_hz);
    let cap = horizon / n as f64;
    let bound = bound_for(rates);
    let seeded = manifold_seed(rates, &bound, n, cap)?;

    let mut starts = vec![seeded.clone()];
    for k in 0..opts.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(k as u64 + 1);
        starts.push(if k % 2 == 0 {
            jitter(&seeded, cap, &mut rng)
        } else {
            uniform_start(n, cap, &mut rng)
        });
    }
    let problem = ReducedAscent { rates: *rates, cap };
    let results: Vec<(f64, ControlSchedule)> = starts
        .par_iter()
        .map(|s| problem.climb(s, opts.iterations))
        .collect();
    let start_values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (best_r2, best_schedule) = results
        .into_iter()
        .fold((f64::NEG_INFINITY, ControlSchedule::default()), |a, b| if b.0 > a.0 { b } else { a });
    if !best_r2.is_finite() {
        return Err(Error::NotConverged { horizon_s: horizon, achieved_r2: best_r2 });
    }
    Ok(AscentReport { eta_bound: bound.eta, best_r2, start_values, best_schedule })
}

/// Piecewise-constant approximation of the saturated optimal law, with
/// segment boundaries spread evenly in `ln(r2/r1)` so that both the slow
/// build-up and the final decay get their share of segments.
pub fn manifold_seed(rates: &RateSet, bound: &TransferBound, n: usize, cap: f64) -> Result<ControlSchedule> {
    let j = rates.j_hz;
    let traj = integrate_optimal_trajectory(rates, bound, 1e-6, 1e-3 / j, 400.0 / j)?;
    let t: Vec<f64> = traj.iter().map(|s| s.t_s).collect();
    let q: Vec<f64> = traj.iter().map(|s| (s.r2 / s.r1).ln()).collect();
    let r1: Vec<f64> = traj.iter().map(|s| s.r1).collect();
    let r2: Vec<f64> = traj.iter().map(|s| s.r2).collect();
    let spread = 1e-2_f64;
    let (lo, hi) = ((spread * bound.eta).ln(), (bound.eta / spread).ln());
    let mut edges: Vec<f64> = (0..n)
        .map(|i| {
            let level = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            interp(&q, &t, level)
        })
        .collect();
    edges[0] = 0.0;
    let last_gap = if n > 1 { edges[n - 1] - edges[n - 2] } else { cap };
    edges.push(edges[n - 1] + last_gap);
    let segments = edges
        .windows(2)
        .map(|w| {
            let mid = (w[0] + w[1]) / 2.0;
            let (a, b) = (interp(&t, &r1, mid), interp(&t, &r2, mid));
            let (u1, u2) = optimal_controls(a, b, bound)?;
            Ok(ControlSegment {
                duration_s: (w[1] - w[0]).clamp(0.0, cap),
                u1: u1.max(1e-3),
                u2,
                gamma: bound.gamma_star,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlSchedule { segments })
}

/// Linear interpolation of `ys` at `x` over increasing `xs`, clamped at the ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    if k == 0 {
        return ys[0];
    }
    if k >= xs.len() {
        return ys[ys.len() - 1];
    }
    let w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

fn jitter(base: &ControlSchedule, cap: f64, rng: &mut ChaCha8Rng) -> ControlSchedule {
    let mut noise = |scale: f64| scale * (rng.gen::<f64>() - 0.5);
    let segments = base
        .segments
        .iter()
        .map(|s| ControlSegment {
            duration_s: (s.duration_s * (1.0 + noise(0.2))).clamp(0.0, cap),
            u1: (s.u1 + noise(0.1)).clamp(1e-3, 1.0),
            u2: (s.u2 + noise(0.1)).clamp(1e-3, 1.0),
            gamma: s.gamma + noise(0.1),
        })
        .collect();
    ControlSchedule { segments }
}

fn uniform_start(n: usize, cap: f64, rng: &mut ChaCha8Rng) -> ControlSchedule {
    let segments = (0..n)
        .map(|_| ControlSegment {
            duration_s: cap * rng.gen::<f64>(),
            u1: rng.gen(),
            u2: rng.gen(),
            gamma: rng.gen_range(0.0..2.0 * PI),
        })
        .collect();
    ControlSchedule { segments }
}

/// Unconstrained parametrization: `u = sin² p`, `d = cap·sin² q`, `γ` free.
/// Parameters are laid out per segment as `[p1, p2, γ, q]`.
struct ReducedAscent {
    rates: RateSet,
    cap: f64,
}

impl ReducedAscent {
    fn encode(&self, s: &ControlSchedule) -> Vec<f64> {
        let asin_sqrt = |v: f64| v.clamp(0.0, 1.0).sqrt().asin();
        s.segments
            .iter()
            .flat_map(|c| [asin_sqrt(c.u1), asin_sqrt(c.u2), c.gamma, asin_sqrt(c.duration_s / self.cap)])
            .collect()
    }

    fn decode(&self, x: &[f64]) -> ControlSchedule {
        let segments = x
            .chunks(4)
            .map(|p| ControlSegment {
                duration_s: self.cap * p[3].sin().powi(2),
                u1: p[0].sin().powi(2),
                u2: p[1].sin().powi(2),
                gamma: p[2].rem_euclid(2.0 * PI),
            })
            .collect();
        ControlSchedule { segments }
    }

    fn climb(&self, start: &ControlSchedule, iterations: u64) -> (f64, ControlSchedule) {
        let x = lbfgs_minimize(|x| {
            let (v, g) = self.value_and_gradient(x);
            (-v, g.into_iter().map(|g| -g).collect())
        }, self.encode(start), iterations);
        let s = self.decode(&x);
        (reduced_propagate(&s, &self.rates), s)
    }

    /// Final `r2` and its gradient with respect to the unconstrained parameters.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let rates = &self.rates;
        let (xi, chi, theta) = (rates.xi(), rates.chi(), rates.theta());
        let pj = PI * rates.j_hz;
        let n = x.len() / 4;
        let mut props = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n + 1);
        let mut r = Vector2::new(1.0, 0.0);
        states.push(r);
        for p in x.chunks(4) {
            let (u1, u2, d) = (p[0].sin().powi(2), p[1].sin().powi(2), self.cap * p[3].sin().powi(2));
            let m = reduced_matrix(u1, u2, p[2], rates);
            let e = expm2(&(m * d));
            r = e * r;
            props.push((m, e));
            states.push(r);
        }
        let mut grad = vec![0.0; x.len()];
        let mut lambda = Vector2::new(0.0, 1.0);
        for k in (0..n).rev() {
            let p = &x[4 * k..4 * k + 4];
            let (m, e) = &props[k];
            let rk = states[k];
            let (u1, u2) = (p[0].sin().powi(2), p[1].sin().powi(2));
            let d = self.cap * p[3].sin().powi(2);
            let (cp, cm) = ((theta + p[2]).cos(), (theta - p[2]).cos());
            let (sp, sm) = ((theta + p[2]).sin(), (theta - p[2]).sin());
            let dm_du1 = Matrix2::new(-2.0 * xi * u1, chi * u2 * cp, chi * u2 * cm, 0.0) * pj;
            let dm_du2 = Matrix2::new(0.0, chi * u1 * cp, chi * u1 * cm, -2.0 * xi * u2) * pj;
            let dm_dg = Matrix2::new(0.0, -chi * u1 * u2 * sp, chi * u1 * u2 * sm, 0.0) * pj;
            let sens = |dm: &Matrix2<f64>| lambda.dot(&(frechet_exp(&(m * d), &(dm * d)) * rk));
            grad[4 * k] = sens(&dm_du1) * (2.0 * p[0]).sin();
            grad[4 * k + 1] = sens(&dm_du2) * (2.0 * p[1]).sin();
            grad[4 * k + 2] = sens(&dm_dg);
            grad[4 * k + 3] = lambda.dot(&(m * e * rk)) * self.cap * (2.0 * p[3]).sin();
            lambda = e.transpose() * lambda;
        }
        (states[n][1], grad)
    }
}

/// Directional derivative of `exp` at `a` along `e`, read off the upper-right
/// block of `exp([[a, e], [0, a]])`.
fn frechet_exp(a: &Matrix2<f64>, e: &Matrix2<f64>) -> Matrix2<f64> {
    let mut big = Matrix4::zeros();
    big.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    big.fixed_view_mut::<2, 2>(2, 2).copy_from(a);
    big.fixed_view_mut::<2, 2>(0, 2).copy_from(e);
    big.exp().fixed_view::<2, 2>(0, 2).into_owned()
}

const LBFGS_MEMORY: usize = 10;

/// Limited-memory BFGS with Armijo backtracking. Returns the last accepted
/// point, which never has a higher cost than `x0`.
fn lbfgs_minimize(f: impl Fn(&[f64]) -> (f64, Vec<f64>), x0: Vec<f64>, max_iter: u64) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut stalled = 0;
    for _ in 0..max_iter {
        if g.iter().all(|v| v.abs() < 1e-13) || !fx.is_finite() {
            break;
        }
        // two-loop recursion for d = -H g
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= scale);
        } else {
            let norm = dot(&g, &g).sqrt();
            q.iter_mut().for_each(|qi| *qi /= norm.max(1.0));
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        stalled = if fx - fn_ <= 1e-16 * fx.abs().max(1.0) { stalled + 1 } else { 0 };
        x = xn;
        fx = fn_;
        g = gn;
        if stalled >= 20 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference() -> RateSet {
        RateSet::new(1.0, 1.0, 0.75).unwrap()
    }

    #[test]
    fn expm2_matches_series_exponential() {
        let cases = [
            Matrix2::new(-1.0, 2.0, 0.5, -0.3),
            Matrix2::new(-1.0, -2.0, 0.5, -0.3),
            Matrix2::new(0.2, 0.0, 0.0, 0.2),
            Matrix2::new(0.0, 1e-9, 1e-9, 0.0),
            Matrix2::new(-3.0, 4.0, -4.0, -3.0),
        ];
        for m in cases {
            let e = expm2(&m);
            let r = m.exp();
            assert!((e - r).abs().max() < 1e-13, "{m}");
        }
    }

    #[test]
    fn zero_controls_leave_r2_at_zero() {
        let s = ControlSchedule {
            segments: vec![ControlSegment { duration_s: 5.0, u1: 0.0, u2: 0.0, gamma: 1.0 }],
        };
        assert_eq!(reduced_propagate(&s, &reference()), 0.0);
    }

    #[test]
    fn crop_schedule_reaches_eta() {
        let rates = reference();
        let s = crop_schedule(&rates, 1e-4, 1e-3).unwrap();
        let eta = bound_for(&rates).eta;
        let r2 = reduced_propagate(&s, &rates);
        assert!((r2 - eta).abs() < 1e-3 && r2 <= eta + CEILING_TOLERANCE, "{r2}");
    }

    #[test]
    fn constant_controls_fall_short() {
        let rates = reference();
        let b = bound_for(&rates);
        let best = (1..400)
            .map(|k| {
                let s = ControlSchedule {
                    segments: vec![ControlSegment { duration_s: k as f64 * 0.01, u1: 1.0, u2: 1.0, gamma: b.gamma_star }],
                };
                reduced_propagate(&s, &rates)
            })
            .fold(0.0, f64::max);
        assert!(best < b.eta - 1e-2, "{best}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rates = reference();
        let problem = ReducedAscent { rates, cap: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..24).map(|_| rng.gen_range(0.2..1.3)).collect();
        let (_, g) = problem.value_and_gradient(&x);
        for i in 0..x.len() {
            let h = 1e-6;
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (problem.value_and_gradient(&xp).0 - problem.value_and_gradient(&xm).0) / (2.0 * h);
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn random_schedules_are_reproducible() {
        let rates = reference();
        let opts = CeilingOptions { trials: 10, seed: 3, ..Default::default() };
        assert_eq!(random_schedule(&rates, &opts, 4), random_schedule(&rates, &opts, 4));
        assert_ne!(random_schedule(&rates, &opts, 4), random_schedule(&rates, &opts, 5));
        let s = random_schedule(&rates, &opts, 9);
        s.validate().unwrap();
        assert!(s.duration_s() <= 20.0 + 1e-12);
    }

    #[test]
    fn ceiling_holds_and_corrupted_claim_is_caught() {
        let rates = reference();
        let opts = CeilingOptions { trials: 2000, seed: 1, ..Default::default() };
        let report = random_ceiling_check(&rates, &opts);
        assert!(!report.falsified && report.max_found <= report.eta_bound + CEILING_TOLERANCE);
        assert_eq!(report, random_ceiling_check(&rates, &opts));
        let corrupt = ceiling_check_against(&rates, 0.5 * report.max_found, &opts);
        assert!(corrupt.falsified);
        let best = corrupt.best_schedule.unwrap();
        assert_abs_diff_eq!(reduced_propagate(&best, &rates), corrupt.max_found, epsilon = 1e-15);
    }

    #[test]
    fn ascent_reaches_the_bound() {
        let rates = reference();
        let report = ascent_search(&rates, &AscentOptions { random_starts: 0, ..Default::default() }).unwrap();
        assert!(report.best_r2 >= report.eta_bound - 1e-3, "{}", report.best_r2);
        assert!(report.best_r2 <= report.eta_bound + CEILING_TOLERANCE);
        assert!(report.best_schedule.duration_s() <= 20.0 + 1e-9);
    }
}
