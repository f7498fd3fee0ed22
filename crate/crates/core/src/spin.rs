//! Two-spin-1/2 product-operator algebra.
//!
//! States are the 15 expectation values of the traceless product operators
//! `Ix .. 2IzSz`. Every operator in the basis has unit Hilbert-Schmidt norm, so a
//! coefficient is directly `Tr(B ρ)` and unit polarization `Iz` reads as 1.
//!
//! Generators act on coefficient vectors: `d c/dt = G c`. They are obtained by
//! projecting the Liouvillian of the two-spin master equation onto the basis,
//! which keeps the linear, bilinear and multiple-quantum blocks mutually
//! consistent.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, Mul};
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DIM: usize = 15;

pub type StateVector = SVector<f64, DIM>;
pub type GeneratorMatrix = SMatrix<f64, DIM, DIM>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    I,
    S,
}

impl Spin {
    pub fn other(self) -> Spin {
        match self {
            Spin::I => Spin::S,
            Spin::S => Spin::I,
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" => Ok(Spin::I),
            "S" | "s" => Ok(Spin::S),
            other => Err(Error::InvalidParams(format!("unknown spin `{other}`"))),
        }
    }
}

/// Normalized product-operator basis, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    Ix,
    Iy,
    Iz,
    Sx,
    Sy,
    Sz,
    IxSx,
    IxSy,
    IxSz,
    IySx,
    IySy,
    IySz,
    IzSx,
    IzSy,
    IzSz,
}

impl Operator {
    pub const ALL: [Operator; DIM] = [
        Operator::Ix,
        Operator::Iy,
        Operator::Iz,
        Operator::Sx,
        Operator::Sy,
        Operator::Sz,
        Operator::IxSx,
        Operator::IxSy,
        Operator::IxSz,
        Operator::IySx,
        Operator::IySy,
        Operator::IySz,
        Operator::IzSx,
        Operator::IzSy,
        Operator::IzSz,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::Ix => "Ix",
            Operator::Iy => "Iy",
            Operator::Iz => "Iz",
            Operator::Sx => "Sx",
            Operator::Sy => "Sy",
            Operator::Sz => "Sz",
            Operator::IxSx => "2IxSx",
            Operator::IxSy => "2IxSy",
            Operator::IxSz => "2IxSz",
            Operator::IySx => "2IySx",
            Operator::IySy => "2IySy",
            Operator::IySz => "2IySz",
            Operator::IzSx => "2IzSx",
            Operator::IzSy => "2IzSy",
            Operator::IzSz => "2IzSz",
        }
    }

    /// Cartesian labels (0 = identity, 1..=3 = x, y, z) of the I and S factors.
    fn factors(self) -> (usize, usize) {
        match self.index() {
            i @ 0..=2 => (i + 1, 0),
            i @ 3..=5 => (0, i - 2),
            i => {
                let k = i - 6;
                (k / 3 + 1, k % 3 + 1)
            }
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim();
        // bilinears may be written without the leading factor 2
        Operator::ALL
            .iter()
            .copied()
            .find(|op| op.name() == name || (op.index() >= 6 && &op.name()[1..] == name))
            .ok_or_else(|| Error::UnknownOperator(s.to_string()))
    }
}

/// Coupling constant and relaxation rates, all in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    #[serde(rename = "J_hz")]
    pub j_hz: f64,
    pub k_dd_hz: f64,
    pub k_csa_i_hz: f64,
    pub k_csa_s_hz: f64,
    pub k_ddcsa_i_hz: f64,
    pub k_ddcsa_s_hz: f64,
}

impl SystemParams {
    pub fn new(
        j_hz: f64,
        k_dd_hz: f64,
        k_csa_i_hz: f64,
        k_csa_s_hz: f64,
        k_ddcsa_i_hz: f64,
        k_ddcsa_s_hz: f64,
    ) -> Result<Self> {
        let params = SystemParams {
            j_hz,
            k_dd_hz,
            k_csa_i_hz,
            k_csa_s_hz,
            k_ddcsa_i_hz,
            k_ddcsa_s_hz,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from net rates. The auto-correlated rates are booked
    /// entirely as CSA (`k_dd = 0`); only the multiple-quantum block depends on
    /// that split.
    pub fn from_net_rates(j_hz: f64, ka: f64, kc: f64, ka_s: f64, kc_s: f64) -> Result<Self> {
        SystemParams::new(j_hz, 0.0, ka, ka_s, kc, kc_s)
    }

    /// Same net rates on both spins.
    pub fn symmetric(j_hz: f64, ka: f64, kc: f64) -> Result<Self> {
        SystemParams::from_net_rates(j_hz, ka, kc, ka, kc)
    }

    pub fn relaxation_free(j_hz: f64) -> Result<Self> {
        SystemParams::symmetric(j_hz, 0.0, 0.0)
    }

    pub fn ka(&self) -> f64 {
        self.k_dd_hz + self.k_csa_i_hz
    }

    pub fn kc(&self) -> f64 {
        self.k_ddcsa_i_hz
    }

    pub fn ka_prime(&self) -> f64 {
        self.k_dd_hz + self.k_csa_s_hz
    }

    pub fn kc_prime(&self) -> f64 {
        self.k_ddcsa_s_hz
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.j_hz,
            self.k_dd_hz,
            self.k_csa_i_hz,
            self.k_csa_s_hz,
            self.k_ddcsa_i_hz,
            self.k_ddcsa_s_hz,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("rates must be finite".into()));
        }
        if self.j_hz <= 0.0 {
            return Err(Error::InvalidParams(format!("J must be positive, got {}", self.j_hz)));
        }
        if self.k_dd_hz < 0.0 || self.k_csa_i_hz < 0.0 || self.k_csa_s_hz < 0.0 {
            return Err(Error::InvalidParams("auto-relaxation rates must be non-negative".into()));
        }
        if self.kc().abs() > self.ka() {
            return Err(Error::RateDomain { ka: self.ka(), kc: self.kc() });
        }
        if self.kc_prime().abs() > self.ka_prime() {
            return Err(Error::RateDomain {
                ka: self.ka_prime(),
                kc: self.kc_prime(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductOperatorState(StateVector);

impl ProductOperatorState {
    pub fn zero() -> Self {
        ProductOperatorState(StateVector::zeros())
    }

    /// Unit coefficient on a single basis operator.
    pub fn basis(op: Operator) -> Self {
        let mut v = StateVector::zeros();
        v[op.index()] = 1.0;
        ProductOperatorState(v)
    }

    pub fn from_vector(v: StateVector) -> Self {
        ProductOperatorState(v)
    }

    pub fn from_pairs(pairs: &[(Operator, f64)]) -> Self {
        let mut v = StateVector::zeros();
        for &(op, c) in pairs {
            v[op.index()] += c;
        }
        ProductOperatorState(v)
    }

    pub fn vector(&self) -> &StateVector {
        &self.0
    }

    pub fn expectation(&self, target: Operator) -> f64 {
        self.0[target.index()]
    }

    pub fn set(&mut self, op: Operator, value: f64) {
        self.0[op.index()] = value;
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn coefficients(&self) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        out.copy_from_slice(self.0.as_slice());
        out
    }
}

impl Index<Operator> for ProductOperatorState {
    type Output = f64;

    fn index(&self, op: Operator) -> &f64 {
        &self.0[op.index()]
    }
}

impl Add for ProductOperatorState {
    type Output = ProductOperatorState;

    fn add(self, rhs: Self) -> Self {
        ProductOperatorState(self.0 + rhs.0)
    }
}

impl Mul<ProductOperatorState> for f64 {
    type Output = ProductOperatorState;

    fn mul(self, rhs: ProductOperatorState) -> ProductOperatorState {
        ProductOperatorState(rhs.0 * self)
    }
}

/// Expectation value of a named operator.
pub fn expectation(state: &ProductOperatorState, target: &str) -> Result<f64> {
    Ok(state.expectation(target.parse()?))
}

/// Multiplet decomposition of the I-spin transverse coherence: the α and β
/// lines are `(I ± 2ISz)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multiplets {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
}

impl Multiplets {
    pub fn alpha_magnitude(&self) -> f64 {
        self.alpha[0].hypot(self.alpha[1])
    }

    pub fn beta_magnitude(&self) -> f64 {
        self.beta[0].hypot(self.beta[1])
    }
}

pub fn multiplet_components(state: &ProductOperatorState) -> Multiplets {
    let ix = state[Operator::Ix];
    let iy = state[Operator::Iy];
    let ixsz = state[Operator::IxSz];
    let iysz = state[Operator::IySz];
    Multiplets {
        alpha: [(ix + ixsz) / 2.0, (iy + iysz) / 2.0],
        beta: [(ix - ixsz) / 2.0, (iy - iysz) / 2.0],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generator(GeneratorMatrix);

impl Generator {
    pub fn zero() -> Self {
        Generator(GeneratorMatrix::zeros())
    }

    pub fn from_matrix(m: GeneratorMatrix) -> Self {
        Generator(m)
    }

    pub fn matrix(&self) -> &GeneratorMatrix {
        &self.0
    }

    pub fn derivative(&self, state: &ProductOperatorState) -> ProductOperatorState {
        ProductOperatorState(self.0 * state.0)
    }

    /// `exp(G t)`.
    pub fn propagator(&self, t: f64) -> Propagator {
        Propagator((self.0 * t).exp())
    }

    pub fn block(&self, ops: &[Operator]) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(ops.len(), ops.len(), |r, c| self.0[(ops[r].index(), ops[c].index())])
    }
}

impl Add for Generator {
    type Output = Generator;

    fn add(self, rhs: Self) -> Self {
        Generator(self.0 + rhs.0)
    }
}

impl Mul<Generator> for f64 {
    type Output = Generator;

    fn mul(self, rhs: Generator) -> Generator {
        Generator(rhs.0 * self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagator(GeneratorMatrix);

impl Propagator {
    pub fn identity() -> Self {
        Propagator(GeneratorMatrix::identity())
    }

    pub fn matrix(&self) -> &GeneratorMatrix {
        &self.0
    }

    pub fn apply(&self, state: &ProductOperatorState) -> ProductOperatorState {
        ProductOperatorState(self.0 * state.0)
    }

    /// `self` applied after `first`.
    pub fn then(&self, first: &Propagator) -> Propagator {
        Propagator(self.0 * first.0)
    }
}

/// Unit superoperators, projected once.
struct UnitGenerators {
    coupling: GeneratorMatrix,
    dd: GeneratorMatrix,
    csa_i: GeneratorMatrix,
    csa_s: GeneratorMatrix,
    ddcsa_i: GeneratorMatrix,
    ddcsa_s: GeneratorMatrix,
    // [spin][axis] for -i[X_axis, ρ]
    rotation: [[GeneratorMatrix; 3]; 2],
}

type Op4 = Matrix4<Complex64>;

fn pauli_half(axis: usize) -> nalgebra::Matrix2<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let h = 0.5;
    match axis {
        0 => nalgebra::Matrix2::new(Complex64::new(1.0, 0.0), z, z, Complex64::new(1.0, 0.0)),
        1 => nalgebra::Matrix2::new(z, Complex64::new(h, 0.0), Complex64::new(h, 0.0), z),
        2 => nalgebra::Matrix2::new(z, Complex64::new(0.0, -h), Complex64::new(0.0, h), z),
        _ => nalgebra::Matrix2::new(Complex64::new(h, 0.0), z, z, Complex64::new(-h, 0.0)),
    }
}

fn kron(a: &nalgebra::Matrix2<Complex64>, b: &nalgebra::Matrix2<Complex64>) -> Op4 {
    Op4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Hilbert-space matrix of a basis operator, including the factor 2 on
/// bilinears so that `Tr(B²) = 1`.
fn operator_matrix(op: Operator) -> Op4 {
    let (a, b) = op.factors();
    let m = kron(&pauli_half(a), &pauli_half(b));
    if a != 0 && b != 0 {
        m * Complex64::new(2.0, 0.0)
    } else {
        m
    }
}

fn spin_axis(spin: Spin, axis: usize) -> Op4 {
    match spin {
        Spin::I => kron(&pauli_half(axis), &pauli_half(0)),
        Spin::S => kron(&pauli_half(0), &pauli_half(axis)),
    }
}

fn commutator(a: &Op4, b: &Op4) -> Op4 {
    a * b - b * a
}

fn project<F: Fn(&Op4) -> Op4>(basis: &[Op4], superop: F) -> GeneratorMatrix {
    let mut g = GeneratorMatrix::zeros();
    for (k, bk) in basis.iter().enumerate() {
        let image = superop(bk);
        for (j, bj) in basis.iter().enumerate() {
            g[(j, k)] = (bj * image).trace().re;
        }
    }
    g
}

fn units() -> &'static UnitGenerators {
    static UNITS: OnceLock<UnitGenerators> = OnceLock::new();
    UNITS.get_or_init(|| {
        let basis: Vec<Op4> = Operator::ALL.iter().map(|&op| operator_matrix(op)).collect();
        let iz = spin_axis(Spin::I, 3);
        let sz = spin_axis(Spin::S, 3);
        let zz = operator_matrix(Operator::IzSz);
        let minus_i = Complex64::new(0.0, -1.0);
        let double = |a: &Op4, b: &Op4, rho: &Op4| -commutator(a, &commutator(b, rho));
        let rotation = |spin: Spin| {
            [1, 2, 3].map(|axis| {
                let x = spin_axis(spin, axis);
                project(&basis, |rho| commutator(&x, rho) * minus_i)
            })
        };
        UnitGenerators {
            coupling: project(&basis, |rho| commutator(&zz, rho) * minus_i),
            dd: project(&basis, |rho| double(&zz, &zz, rho)),
            csa_i: project(&basis, |rho| double(&iz, &iz, rho)),
            csa_s: project(&basis, |rho| double(&sz, &sz, rho)),
            ddcsa_i: project(&basis, |rho| double(&zz, &iz, rho)),
            ddcsa_s: project(&basis, |rho| double(&zz, &sz, rho)),
            rotation: [rotation(Spin::I), rotation(Spin::S)],
        }
    })
}

/// Free-evolution generator: scalar coupling plus DD, CSA and DD/CSA
/// cross-correlated relaxation, all with decaying sign. On the I-spin
/// transverse block this gives
///
/// ```text
/// d<Ix>/dt    = -π ka <Ix>    - πJ <2IySz> - π kc <2IxSz>
/// d<2IySz>/dt = -π ka <2IySz> + πJ <Ix>    - π kc <Iy>
/// ```
///
/// and its mirror image on the S-spin block; `Iz`, `Sz` and `2IzSz` are
/// stationary.
pub fn free_evolution_generator(params: &SystemParams) -> Result<Generator> {
    params.validate()?;
    let u = units();
    let m = u.coupling * (PI * params.j_hz)
        + u.dd * (PI * params.k_dd_hz)
        + u.csa_i * (PI * params.k_csa_i_hz)
        + u.csa_s * (PI * params.k_csa_s_hz)
        + u.ddcsa_i * (PI * params.k_ddcsa_i_hz)
        + u.ddcsa_s * (PI * params.k_ddcsa_s_hz);
    Ok(Generator(m))
}

/// Rotating-frame rf generator on one spin: a field of amplitude `amplitude_hz`
/// and phase `phase_rad` turns the spin about `(cos φ, sin φ, 0)` at
/// `2π·amplitude` rad/s, and `offset_hz` turns it about z at `2π·offset`.
/// Rotations are right-handed (a y-phase pulse carries `Iz` into `Ix`, an
/// x-phase pulse carries `Iz` into `-Iy`).
pub fn rf_generator(spin: Spin, amplitude_hz: f64, phase_rad: f64, offset_hz: f64) -> Generator {
    debug_assert!(amplitude_hz >= 0.0, "rf amplitude must be non-negative");
    let [gx, gy, gz] = &units().rotation[spin_slot(spin)];
    let w = 2.0 * PI * amplitude_hz;
    Generator(gx * (w * phase_rad.cos()) + gy * (w * phase_rad.sin()) + gz * (2.0 * PI * offset_hz))
}

/// Unit-rate rotation generator about an in-plane axis (`phase`) or z.
pub fn rotation_generator(spin: Spin, phase_rad: f64) -> Generator {
    let [gx, gy, _] = &units().rotation[spin_slot(spin)];
    Generator(gx * phase_rad.cos() + gy * phase_rad.sin())
}

pub fn z_rotation_generator(spin: Spin) -> Generator {
    Generator(units().rotation[spin_slot(spin)][2])
}

/// Instantaneous lossless rotation by `angle` about the in-plane axis at `phase`.
pub fn hard_rotation(spin: Spin, phase_rad: f64, angle_rad: f64) -> Propagator {
    rotation_generator(spin, phase_rad).propagator(angle_rad)
}

fn spin_slot(spin: Spin) -> usize {
    match spin {
        Spin::I => 0,
        Spin::S => 1,
    }
}

/// The I-spin transverse block `{Ix, Iy, 2IxSz, 2IySz}`.
pub const I_TRANSVERSE: [Operator; 4] = [Operator::Ix, Operator::Iy, Operator::IxSz, Operator::IySz];

/// The S-spin transverse block `{Sx, Sy, 2IzSx, 2IzSy}`.
pub const S_TRANSVERSE: [Operator; 4] = [Operator::Sx, Operator::Sy, Operator::IzSx, Operator::IzSy];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(j: f64, ka: f64, kc: f64) -> SystemParams {
        SystemParams::symmetric(j, ka, kc).unwrap()
    }

    #[test]
    fn operator_names_round_trip() {
        for op in Operator::ALL {
            assert_eq!(op.name().parse::<Operator>().unwrap(), op);
        }
        assert_eq!("IzSz".parse::<Operator>().unwrap(), Operator::IzSz);
        assert!("2Iz".parse::<Operator>().is_err());
        assert!("Qx".parse::<Operator>().is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        for a in Operator::ALL {
            for b in Operator::ALL {
                let t = (operator_matrix(a) * operator_matrix(b)).trace();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(t.re, expected, epsilon = 1e-14);
                assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn i_transverse_block_matches_canonical_form() {
        let (j, ka, kc) = (1.3, 0.7, 0.4);
        let p = SystemParams::new(j, 0.2, 0.5, 0.9, kc, -0.3).unwrap();
        let g = free_evolution_generator(&p).unwrap().block(&I_TRANSVERSE);
        let pi = PI;
        #[rustfmt::skip]
        let expected = nalgebra::DMatrix::from_row_slice(4, 4, &[
            -pi * ka, 0.0,      -pi * kc, -pi * j,
            0.0,      -pi * ka, pi * j,   -pi * kc,
            -pi * kc, -pi * j,  -pi * ka, 0.0,
            pi * j,   -pi * kc, 0.0,      -pi * ka,
        ]);
        assert_abs_diff_eq!((g - expected).abs().max(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn s_transverse_block_mirrors_i_block() {
        let p = SystemParams::new(1.0, 0.1, 0.3, 0.6, 0.2, 0.45).unwrap();
        let g = free_evolution_generator(&p).unwrap();
        let mirror = SystemParams::from_net_rates(1.0, p.ka_prime(), p.kc_prime(), 0.0, 0.0).unwrap();
        let reference = free_evolution_generator(&mirror).unwrap().block(&I_TRANSVERSE);
        assert_abs_diff_eq!((g.block(&S_TRANSVERSE) - reference).abs().max(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn longitudinal_terms_are_stationary() {
        let g = free_evolution_generator(&params(1.0, 0.8, 0.6)).unwrap();
        for op in [Operator::Iz, Operator::Sz, Operator::IzSz] {
            let d = g.derivative(&ProductOperatorState::basis(op));
            assert_eq!(d.norm(), 0.0, "{op}");
            for k in 0..DIM {
                assert_eq!(g.matrix()[(op.index(), k)], 0.0);
            }
        }
    }

    #[test]
    fn coupling_only_rotates_ix_into_antiphase() {
        let g = free_evolution_generator(&SystemParams::relaxation_free(1.0).unwrap()).unwrap();
        let d = g.derivative(&ProductOperatorState::basis(Operator::Ix));
        assert_abs_diff_eq!(d[Operator::IySz], PI, epsilon = 1e-14);
        assert_abs_diff_eq!(d.norm(), PI, epsilon = 1e-14);
    }

    #[test]
    fn transverse_block_eigenvalues() {
        // ka = J, kc = 0.75 J: -π(ka ± kc) ± iπJ
        let g = free_evolution_generator(&params(1.0, 1.0, 0.75)).unwrap().block(&I_TRANSVERSE);
        let mut eig: Vec<(f64, f64)> = g
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [
            (-PI * 1.75, -PI),
            (-PI * 1.75, PI),
            (-PI * 0.25, -PI),
            (-PI * 0.25, PI),
        ];
        for (e, x) in eig.iter().zip(expected) {
            assert_abs_diff_eq!(e.0, x.0, epsilon = 1e-10);
            assert_abs_diff_eq!(e.1, x.1, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_amplifying_rates() {
        assert!(matches!(
            SystemParams::from_net_rates(1.0, 0.5, 0.6, 0.5, 0.0),
            Err(Error::RateDomain { .. })
        ));
        assert!(SystemParams::from_net_rates(1.0, 0.5, 0.0, 0.5, -0.51).is_err());
        assert!(SystemParams::from_net_rates(0.0, 0.5, 0.0, 0.5, 0.0).is_err());
        assert!(SystemParams::from_net_rates(-1.0, 0.5, 0.0, 0.5, 0.0).is_err());
        assert!(SystemParams::from_net_rates(1.0, f64::NAN, 0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn rf_quarter_period_is_a_90_degree_pulse() {
        let a = 2.5;
        let iz = ProductOperatorState::basis(Operator::Iz);
        let x = rf_generator(Spin::I, a, 0.0, 0.0).propagator(1.0 / (4.0 * a)).apply(&iz);
        assert_abs_diff_eq!(x[Operator::Iy], -1.0, epsilon = 1e-12);
        let y = rf_generator(Spin::I, a, PI / 2.0, 0.0).propagator(1.0 / (4.0 * a)).apply(&iz);
        assert_abs_diff_eq!(y[Operator::Ix], 1.0, epsilon = 1e-12);
        // the same rotation acts on the antiphase partner
        let zz = ProductOperatorState::basis(Operator::IzSz);
        let y2 = rf_generator(Spin::I, a, PI / 2.0, 0.0).propagator(1.0 / (4.0 * a)).apply(&zz);
        assert_abs_diff_eq!(y2[Operator::IxSz], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn offset_precesses_transverse_magnetization() {
        let (nu, t) = (3.0, 0.07);
        let ix = ProductOperatorState::basis(Operator::Ix);
        let out = rf_generator(Spin::I, 0.0, 0.0, nu).propagator(t).apply(&ix);
        assert_abs_diff_eq!(out[Operator::Ix], (2.0 * PI * nu * t).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(out[Operator::Iy], (2.0 * PI * nu * t).sin(), epsilon = 1e-12);
    }

    #[test]
    fn rf_is_spin_selective() {
        let g = rf_generator(Spin::I, 1.0, 0.3, 0.2);
        for op in [Operator::Sx, Operator::Sy, Operator::Sz] {
            assert_eq!(g.derivative(&ProductOperatorState::basis(op)).norm(), 0.0);
        }
        let d = g.derivative(&ProductOperatorState::basis(Operator::IzSx));
        for op in Operator::ALL {
            let (_, s_axis) = op.factors();
            if d[op] != 0.0 {
                assert_eq!(s_axis, 1, "{op} picked up from 2IzSx");
            }
        }
    }

    #[test]
    fn rf_generator_is_skew_symmetric() {
        for spin in [Spin::I, Spin::S] {
            let g = rf_generator(spin, 1.7, 0.9, -0.4);
            assert_abs_diff_eq!((g.matrix() + g.matrix().transpose()).abs().max(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn hard_y_pulse_on_s_turns_zz_into_zx() {
        let mut state = ProductOperatorState::zero();
        state.set(Operator::IzSz, 0.6);
        state.set(Operator::Ix, 0.1);
        let out = hard_rotation(Spin::S, PI / 2.0, PI / 2.0).apply(&state);
        assert_abs_diff_eq!(out[Operator::IzSx], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(out[Operator::Ix], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn multiplets_of_ix() {
        let m = multiplet_components(&ProductOperatorState::basis(Operator::Ix));
        assert_eq!(m.alpha, [0.5, 0.0]);
        assert_eq!(m.beta, [0.5, 0.0]);
    }

    #[test]
    fn expectation_by_name() {
        let mut state = ProductOperatorState::zero();
        state.set(Operator::IzSz, 0.6);
        assert_eq!(expectation(&state, "2IzSz").unwrap(), 0.6);
        assert!(matches!(expectation(&state, "2IqSz"), Err(Error::UnknownOperator(_))));
    }

    #[test]
    fn params_json_keys() {
        let p = SystemParams::new(193.6, 10.0, 20.0, 30.0, 5.0, 6.0).unwrap();
        let json = serde_json::to_value(p).unwrap();
        for key in ["J_hz", "k_dd_hz", "k_csa_i_hz", "k_csa_s_hz", "k_ddcsa_i_hz", "k_ddcsa_s_hz"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: SystemParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);
    }
}
