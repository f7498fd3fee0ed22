//! Closed-form limits of relaxation-limited transfer.
//!
//! For a single step `Iz -> 2IzSz` with coupling `J`, auto-correlated rate `ka`
//! and cross-correlated rate `kc` the reachable efficiency is
//!
//! ```text
//! ζ = sqrt((ka² - kc²) / (J² + kc²)),    η = sqrt(1 + ζ²) - ζ
//! ```
//!
//! reached while the transverse vectors keep the fixed angle `γ*`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::SystemParams;

/// Coupling plus the net rates seen by one spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub j_hz: f64,
    pub ka_hz: f64,
    pub kc_hz: f64,
}

impl RateSet {
    pub fn new(j_hz: f64, ka_hz: f64, kc_hz: f64) -> Result<Self> {
        if !(j_hz.is_finite() && ka_hz.is_finite() && kc_hz.is_finite()) {
            return Err(Error::InvalidParams("rates must be finite".into()));
        }
        if j_hz <= 0.0 {
            return Err(Error::InvalidParams(format!("J must be positive, got {j_hz}")));
        }
        if ka_hz < 0.0 || kc_hz.abs() > ka_hz {
            return Err(Error::RateDomain { ka: ka_hz, kc: kc_hz });
        }
        Ok(RateSet { j_hz, ka_hz, kc_hz })
    }

    /// Dimensionless form: `ka/J` and `kc/ka`, with `J = 1 Hz`.
    pub fn from_ratios(ka_over_j: f64, kc_over_ka: f64) -> Result<Self> {
        RateSet::new(1.0, ka_over_j, ka_over_j * kc_over_ka)
    }

    pub fn xi(&self) -> f64 {
        self.ka_hz / self.j_hz
    }

    pub fn chi(&self) -> f64 {
        (1.0 + (self.kc_hz / self.j_hz).powi(2)).sqrt()
    }

    pub fn theta(&self) -> f64 {
        compute_theta(self.j_hz, self.kc_hz)
    }
}

impl SystemParams {
    /// Rates governing `Iz <-> 2IzSz`.
    pub fn i_side(&self) -> RateSet {
        RateSet {
            j_hz: self.j_hz,
            ka_hz: self.ka(),
            kc_hz: self.kc(),
        }
    }

    /// Rates governing `2IzSz <-> Sz`.
    pub fn s_side(&self) -> RateSet {
        RateSet {
            j_hz: self.j_hz,
            ka_hz: self.ka_prime(),
            kc_hz: self.kc_prime(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferBound {
    pub theta: f64,
    pub zeta: f64,
    pub eta: f64,
    pub gamma_star: f64,
    pub xi: f64,
    pub chi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeBounds {
    pub eta_iz_to_izsz: f64,
    pub eta_izsz_to_sz: f64,
    pub eta_iz_to_sz: f64,
    pub eta_single_transition: f64,
}

/// Direction in the antiphase plane along which `2ISz` builds from `Ix`,
/// measured from the `2IxSz` axis: `atan2(J, -kc)`, in `(0, π)`.
pub fn compute_theta(j_hz: f64, kc_hz: f64) -> f64 {
    j_hz.atan2(-kc_hz)
}

pub fn compute_bound(ka: f64, kc: f64, j: f64) -> Result<TransferBound> {
    let rates = RateSet::new(j, ka, kc)?;
    Ok(bound_for(&rates))
}

pub fn bound_for(rates: &RateSet) -> TransferBound {
    let RateSet { j_hz: j, ka_hz: ka, kc_hz: kc } = *rates;
    // ka² - kc² is clamped: rounding can push it below zero at kc = ±ka
    let zeta = ((ka * ka - kc * kc).max(0.0) / (j * j + kc * kc)).sqrt();
    let eta = efficiency_from_zeta(zeta);
    let theta = compute_theta(j, kc);
    // cot θ = -kc/J; atan2 of (1-η², (1+η²)cot θ) lands in (0, π) since 1-η² ≥ 0
    let gamma_star = if eta >= 1.0 {
        if kc == 0.0 {
            // relaxation-free limit of the kc = 0 family
            PI / 2.0
        } else {
            PI
        }
    } else {
        (1.0 - eta * eta).atan2((1.0 + eta * eta) * (-kc / j))
    };
    TransferBound {
        theta,
        zeta,
        eta,
        gamma_star,
        xi: rates.xi(),
        chi: rates.chi(),
    }
}

/// `sqrt(1 + ζ²) - ζ`, written as `1 / (sqrt(1 + ζ²) + ζ)` to avoid
/// cancellation at large ζ.
pub fn efficiency_from_zeta(zeta: f64) -> f64 {
    1.0 / ((1.0 + zeta * zeta).sqrt() + zeta)
}

pub fn compute_composite_bounds(params: &SystemParams) -> Result<CompositeBounds> {
    params.validate()?;
    let eta = bound_for(&params.i_side()).eta;
    let eta_prime = bound_for(&params.s_side()).eta;
    Ok(CompositeBounds {
        eta_iz_to_izsz: eta,
        eta_izsz_to_sz: eta_prime,
        eta_iz_to_sz: eta * eta_prime,
        eta_single_transition: eta.hypot(eta_prime),
    })
}

/// Residuals of the two stationarity conditions defining `(η, γ*)`:
///
/// ```text
/// res1 = cos(θ-γ*)/η + η cos(θ+γ*) - 2ξ/χ
/// res2 = sin(θ-γ*)/η - η sin(θ+γ*)
/// ```
pub fn verify_stationarity(bound: &TransferBound) -> (f64, f64) {
    let TransferBound {
        theta,
        eta,
        gamma_star,
        xi,
        chi,
        ..
    } = *bound;
    let res1 = (theta - gamma_star).cos() / eta + eta * (theta + gamma_star).cos() - 2.0 * xi / chi;
    let res2 = (theta - gamma_star).sin() / eta - eta * (theta + gamma_star).sin();
    (res1, res2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Maximizes the instantaneous gain ratio `(-ξg² + χ g cos(θ-γ)) / (ξ - χ g cos(θ+γ))`
    /// over a dense `(g, γ)` grid with local refinement. Independent of the
    /// closed forms above.
    fn gain_ratio_oracle(ka: f64, kc: f64, j: f64) -> (f64, f64) {
        let xi = ka / j;
        let chi = (1.0 + (kc / j).powi(2)).sqrt();
        let theta = j.atan2(-kc);
        let ratio = |g: f64, gamma: f64| {
            let den = xi - chi * g * (theta + gamma).cos();
            if den <= 0.0 {
                return f64::NEG_INFINITY;
            }
            (-xi * g * g + chi * g * (theta - gamma).cos()) / den
        };
        let (mut best, mut bg, mut bgam) = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 1..=400 {
            let g = i as f64 / 400.0;
            for k in 0..=720 {
                let gamma = PI * k as f64 / 720.0 * 2.0;
                let v = ratio(g, gamma);
                if v > best {
                    (best, bg, bgam) = (v, g, gamma);
                }
            }
        }
        let (mut hg, mut hgam) = (1.0 / 400.0, PI / 360.0);
        for _ in 0..60 {
            for dg in [-1.0, 0.0, 1.0] {
                for dgam in [-1.0, 0.0, 1.0] {
                    let (g, gamma) = (bg + dg * hg, bgam + dgam * hgam);
                    if g > 0.0 {
                        let v = ratio(g, gamma);
                        if v > best {
                            (best, bg, bgam) = (v, g, gamma);
                        }
                    }
                }
            }
            hg *= 0.7;
            hgam *= 0.7;
        }
        // the optimal ratio value equals η² and is attained at g = η
        (bg, bgam)
    }

    #[test]
    fn theta_examples() {
        assert_abs_diff_eq!(compute_theta(1.0, 0.0), PI / 2.0, epsilon = 1e-15);
        let t = compute_theta(1.0, 0.75);
        assert_abs_diff_eq!(t.cos(), -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(t.sin(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(t, 2.214297435588181, epsilon = 1e-12);
        assert_abs_diff_eq!(compute_theta(1.0, -0.75), PI - t, epsilon = 1e-12);
        assert_abs_diff_eq!(compute_theta(1.0, -0.75), 0.9272952180016122, epsilon = 1e-12);
    }

    #[test]
    fn case_without_cross_correlation() {
        let b = compute_bound(1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.zeta, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eta, 2f64.sqrt() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.gamma_star, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fully_correlated_case_is_lossless() {
        for ka in [0.1, 1.0, 7.0] {
            let b = compute_bound(ka, ka, 1.0).unwrap();
            assert_eq!(b.zeta, 0.0);
            assert_eq!(b.eta, 1.0);
            assert_eq!(b.gamma_star, PI);
        }
    }

    #[test]
    fn reference_point_against_gain_ratio_oracle() {
        let b = compute_bound(1.0, 0.75, 1.0).unwrap();
        assert_abs_diff_eq!(b.zeta, 0.5291502622129182, epsilon = 1e-12);
        assert_abs_diff_eq!(b.eta, 0.6022205876855579, epsilon = 1e-12);
        let (g, gamma) = gain_ratio_oracle(1.0, 0.75, 1.0);
        assert_abs_diff_eq!(g, b.eta, epsilon = 1e-6);
        assert_abs_diff_eq!(gamma, b.gamma_star, epsilon = 1e-5);
        // ≈ 2.5846 quoted to four places; the exact root is 2.58399...
        assert_abs_diff_eq!(b.gamma_star, 2.5839938268902563, epsilon = 1e-10);
        let (r1, r2) = verify_stationarity(&b);
        assert!(r1.abs() < 1e-9 && r2.abs() < 1e-9, "{r1} {r2}");
    }

    #[test]
    fn oracle_agrees_off_reference() {
        for (ka, kc) in [(0.5, 0.1), (2.0, -1.2), (0.3, 0.29)] {
            let b = compute_bound(ka, kc, 1.0).unwrap();
            let (g, gamma) = gain_ratio_oracle(ka, kc, 1.0);
            assert_abs_diff_eq!(g, b.eta, epsilon = 1e-5);
            assert_abs_diff_eq!(gamma, b.gamma_star, epsilon = 1e-4);
        }
    }

    #[test]
    fn stationarity_is_sensitive_to_gamma() {
        let mut b = compute_bound(1.0, 0.75, 1.0).unwrap();
        b.gamma_star += 1e-3;
        assert!(verify_stationarity(&b).1.abs() > 1e-4);
    }

    #[test]
    fn kc_zero_stationarity_identity() {
        for ka in [0.1, 1.0, 3.0] {
            let b = compute_bound(ka, 0.0, 1.0).unwrap();
            assert_abs_diff_eq!(1.0 / b.eta - b.eta, 2.0 * b.xi, epsilon = 1e-12);
            let (r1, r2) = verify_stationarity(&b);
            assert_abs_diff_eq!(r1, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r2, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_relaxation_free() {
        let b = compute_bound(0.0, 0.0, 1.0).unwrap();
        assert_eq!(b.eta, 1.0);
        assert_eq!(b.gamma_star, PI / 2.0);
        assert_eq!(b.theta, PI / 2.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(compute_bound(0.5, 0.6, 1.0), Err(Error::RateDomain { .. })));
        assert!(matches!(compute_bound(0.5, -0.6, 1.0), Err(Error::RateDomain { .. })));
        assert!(compute_bound(0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn composites() {
        let sym = SystemParams::symmetric(1.0, 1.0, 0.75).unwrap();
        let c = compute_composite_bounds(&sym).unwrap();
        assert_abs_diff_eq!(c.eta_iz_to_sz, c.eta_iz_to_izsz.powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(c.eta_single_transition, c.eta_iz_to_izsz * 2f64.sqrt(), epsilon = 1e-15);

        let free = compute_composite_bounds(&SystemParams::relaxation_free(1.0).unwrap()).unwrap();
        assert_eq!(free.eta_iz_to_izsz, 1.0);
        assert_eq!(free.eta_iz_to_sz, 1.0);
        assert_abs_diff_eq!(free.eta_single_transition, 2f64.sqrt(), epsilon = 1e-15);

        let p = SystemParams::from_net_rates(1.0, 1.0, 0.75, 0.5, 0.375).unwrap();
        let c = compute_composite_bounds(&p).unwrap();
        assert_abs_diff_eq!(c.eta_iz_to_izsz, 0.6022205876855579, epsilon = 1e-12);
        assert_abs_diff_eq!(bound_for(&p.s_side()).zeta, 0.30966176864266617, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eta_izsz_to_sz, 0.7371860765377612, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eta_iz_to_sz, 0.44394863224618125, epsilon = 1e-12);
    }

    fn valid_triple() -> impl Strategy<Value = (f64, f64, f64)> {
        (0.05f64..10.0, 0.0f64..5.0, -1.0f64..1.0).prop_map(|(j, ka, frac)| (ka, frac * ka, j))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn stationarity_residuals_vanish((ka, kc, j) in valid_triple()) {
            let b = compute_bound(ka, kc, j).unwrap();
            let (r1, r2) = verify_stationarity(&b);
            prop_assert!(r1.abs() < 1e-9 && r2.abs() < 1e-9, "{} {}", r1, r2);
            prop_assert!(b.eta > 0.0 && b.eta <= 1.0);
            prop_assert!(b.gamma_star > 0.0 && b.gamma_star <= PI);
            prop_assert!((1.0 / b.eta - b.eta - 2.0 * b.zeta).abs() < 1e-12 * (1.0 + b.zeta));
        }

        #[test]
        fn scale_invariant((ka, kc, j) in valid_triple(), s in 0.01f64..100.0) {
            let a = compute_bound(ka, kc, j).unwrap();
            let b = compute_bound(s * ka, s * kc, s * j).unwrap();
            prop_assert!((a.eta - b.eta).abs() < 1e-12);
            prop_assert!((a.gamma_star - b.gamma_star).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_rates(ka in 0.1f64..4.0, frac in 0.0f64..0.9, d in 0.01f64..1.0) {
            let kc = frac * ka;
            let base = compute_bound(ka, kc, 1.0).unwrap().eta;
            prop_assert!(compute_bound(ka + d, kc, 1.0).unwrap().eta < base);
            let more_cross = (kc + d * (ka - kc)).min(ka);
            prop_assert!(compute_bound(ka, more_cross, 1.0).unwrap().eta > base);
        }
    }

    #[test]
    fn gamma_limits() {
        let near_zero = compute_bound(1.0, 1e-9, 1.0).unwrap();
        assert_abs_diff_eq!(near_zero.gamma_star, PI / 2.0, epsilon = 1e-8);
        let mut last = 0.0;
        for r in [0.9, 0.99, 0.999, 0.9999999] {
            let g = compute_bound(1.0, r, 1.0).unwrap().gamma_star;
            assert!(g > last);
            last = g;
        }
        assert_abs_diff_eq!(last, PI, epsilon = 1e-3);
    }
}
