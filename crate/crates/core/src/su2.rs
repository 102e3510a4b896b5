//! Closed-form 2×2 complex linear algebra for single-qubit propagators.
//!
//! Everything here works with `ħ = 1` and the convention that a rotation by
//! `angle` about the unit vector `n` is `exp(-i (angle/2) n·σ)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};

pub type C64 = Complex64;

/// A two-component state vector `(⟨0|ψ⟩, ⟨1|ψ⟩)`.
pub type Ket = [C64; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Unitarity tolerance for `trace_fidelity` inputs.
pub const FIDELITY_UNITARITY_TOL: f64 = 1e-8;

/// A 2×2 complex matrix stored row-major.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2(pub [[C64; 2]; 2]);

impl fmt::Debug for Matrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "[[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }
}

impl Matrix2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Matrix2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Matrix2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn zero() -> Self {
        Matrix2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn pauli_x() -> Self {
        Matrix2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub const fn pauli_y() -> Self {
        Matrix2([[ZERO, C64::new(0.0, -1.0)], [I, ZERO]])
    }

    pub const fn pauli_z() -> Self {
        Matrix2([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]])
    }

    /// `σ_-` = |0⟩⟨1|.
    pub const fn sigma_minus() -> Self {
        Matrix2([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// `v·σ` for a real 3-vector.
    pub fn pauli_dot(v: [f64; 3]) -> Self {
        Matrix2([
            [C64::new(v[2], 0.0), C64::new(v[0], -v[1])],
            [C64::new(v[0], v[1]), C64::new(-v[2], 0.0)],
        ])
    }

    /// The outer product `|a⟩⟨b|`.
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        Matrix2([
            [a[0] * b[0].conj(), a[0] * b[1].conj()],
            [a[1] * b[0].conj(), a[1] * b[1].conj()],
        ])
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Matrix2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `⟨a|M|b⟩`.
    pub fn sandwich(&self, a: &Ket, b: &Ket) -> C64 {
        inner(a, &self.apply(b))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        (*self - *other)
            .0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation of `M†M` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Matrix2::identity())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_finite() && self.unitarity_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Real coefficients `(x, y, z)` of the traceless part in the Pauli basis:
    /// `Tr(M σ_k)/2`.
    pub fn pauli_components(&self) -> [C64; 3] {
        let m = &self.0;
        [
            (m[0][1] + m[1][0]) * 0.5,
            (m[0][1] - m[1][0]) * C64::new(0.0, 0.5),
            (m[0][0] - m[1][1]) * 0.5,
        ]
    }

    /// Equality up to a global phase, judged by the trace overlap.
    pub fn approx_eq_up_to_phase(&self, other: &Matrix2, tol: f64) -> bool {
        (1.0 - overlap(self, other)).abs() <= tol
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// `⟨a|b⟩`.
pub fn inner(a: &Ket, b: &Ket) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Bloch coordinates `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a pure state.
pub fn bloch_vector(psi: &Ket) -> [f64; 3] {
    let c = psi[0].conj() * psi[1];
    [
        2.0 * c.re,
        2.0 * c.im,
        psi[0].norm_sqr() - psi[1].norm_sqr(),
    ]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `exp(-i (angle/2) â·σ)` with `â = axis/|axis|`.
///
/// A zero axis is accepted only together with a zero angle.
pub fn su2_exp(axis: [f64; 3], angle: f64) -> Result<Matrix2> {
    if !axis.iter().all(|x| x.is_finite()) || !angle.is_finite() {
        return Err(GateError::InvalidArgument(format!(
            "non-finite rotation axis {axis:?} or angle {angle}"
        )));
    }
    let n = norm3(axis);
    if n == 0.0 {
        if angle == 0.0 {
            return Ok(Matrix2::identity());
        }
        return Err(GateError::InvalidArgument(format!(
            "zero rotation axis with nonzero angle {angle}"
        )));
    }
    let u = [axis[0] / n, axis[1] / n, axis[2] / n];
    Ok(exp_unit(u, angle))
}

/// `exp(-i (t/2) v·σ)` for an arbitrary (possibly zero) real vector `v`.
///
/// This is the propagator of the constant Hamiltonian `v·σ/2` over time `t`.
pub fn exp_generator(v: [f64; 3], t: f64) -> Matrix2 {
    let n = norm3(v);
    if n == 0.0 || t == 0.0 {
        return Matrix2::identity();
    }
    exp_unit([v[0] / n, v[1] / n, v[2] / n], n * t)
}

fn exp_unit(u: [f64; 3], angle: f64) -> Matrix2 {
    let (s, c) = (0.5 * angle).sin_cos();
    // c·I − i s (u·σ)
    Matrix2([
        [C64::new(c, -s * u[2]), C64::new(-s * u[1], -s * u[0])],
        [C64::new(s * u[1], -s * u[0]), C64::new(c, s * u[2])],
    ])
}

/// Overlap `|Tr(A†B)|/2` with no precondition checks.
pub fn overlap(a: &Matrix2, b: &Matrix2) -> f64 {
    (a.adjoint() * *b).trace().norm() * 0.5
}

/// Gate fidelity `|Tr(target† actual)|/2`, insensitive to global phase.
pub fn trace_fidelity(target: &Matrix2, actual: &Matrix2) -> Result<f64> {
    for (name, m) in [("target", target), ("actual", actual)] {
        if !m.is_unitary(FIDELITY_UNITARITY_TOL) {
            return Err(GateError::PreconditionViolation(format!(
                "{name} is not unitary (defect {:e})",
                m.unitarity_defect()
            )));
        }
    }
    Ok(overlap(target, actual).min(1.0))
}

/// Axis-angle form `U = e^{i global_phase} exp(-i (angle/2) axis·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: [f64; 3],
    pub angle: f64,
    pub global_phase: f64,
}

impl AxisAngle {
    pub fn to_matrix(&self) -> Matrix2 {
        exp_unit(self.axis, self.angle).scale(C64::from_polar(1.0, self.global_phase))
    }

    /// The SO(3) rotation matrix this SU(2) element acts as on Bloch vectors.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let [x, y, z] = self.axis;
        let (s, c) = self.angle.sin_cos();
        let t = 1.0 - c;
        [
            [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
            [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
            [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
        ]
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Decomposes a unitary into axis-angle form.
///
/// Branch convention: the angle is always in `[0, π]`; the sign ambiguity
/// `(axis, angle) ~ (-axis, -angle)` and the `2π` wrap (which costs a factor
/// `-1`) are absorbed into `axis` and `global_phase ∈ (-π, π]`. At zero angle
/// the axis is reported as `+z`.
pub fn axis_angle_decompose(u: &Matrix2) -> Result<AxisAngle> {
    if !u.is_unitary(1e-10) {
        return Err(GateError::PreconditionViolation(format!(
            "axis_angle_decompose needs a unitary input (defect {:e})",
            u.unitarity_defect()
        )));
    }
    let mut phase = 0.5 * u.det().arg();
    let v = u.scale(C64::from_polar(1.0, -phase));
    let m = &v.0;
    let mut c = 0.5 * (m[0][0] + m[1][1]).re;
    let mut sn = [
        -0.5 * (m[0][1] + m[1][0]).im,
        0.5 * (m[1][0] - m[0][1]).re,
        -0.5 * (m[0][0] - m[1][1]).im,
    ];
    if c < 0.0 {
        // -V has a rotation angle of 2π - angle about -axis.
        c = -c;
        sn = [-sn[0], -sn[1], -sn[2]];
        phase += PI;
    }
    let s = norm3(sn);
    let angle = 2.0 * s.atan2(c);
    let axis = if s > 1e-15 {
        [sn[0] / s, sn[1] / s, sn[2] / s]
    } else {
        [0.0, 0.0, 1.0]
    };
    Ok(AxisAngle {
        axis,
        angle,
        global_phase: wrap_pi(phase),
    })
}
