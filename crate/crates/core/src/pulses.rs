//! Piecewise-constant pulse sequences for the four gate families and their
//! ideal target unitaries.
//!
//! A segment drives `H = (Ω/2)(cos φ σx + sin φ σy)` for a time `area/Ω`.
//! Geometric gates are parameterized by `(θ, φ, γ)` and implement
//! `e^{iγ n·σ}` with `n = (sin θ cos φ, sin θ sin φ, cos θ)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::su2::{axis_angle_decompose, su2_exp, wrap_pi, Matrix2, C64};

/// Tolerance for treating an angle as zero when dropping empty segments.
const ZERO_ANGLE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    /// Rotation area `∫Ω dt` in radians.
    pub area: f64,
    /// Constant drive phase.
    pub phase: f64,
    /// Rabi rate, in units of the reference Ω unless stated otherwise.
    pub rabi: f64,
    /// A "perfect π-pulse": the off-resonance term is switched off here.
    #[serde(default)]
    pub delta_suppressed: bool,
}

impl PulseSegment {
    pub fn new(area: f64, phase: f64) -> Self {
        PulseSegment {
            area,
            phase,
            rabi: 1.0,
            delta_suppressed: false,
        }
    }

    pub fn duration(&self) -> f64 {
        if self.area == 0.0 {
            0.0
        } else {
            self.area / self.rabi
        }
    }

    /// Unit drive axis `(cos φ, sin φ, 0)`.
    pub fn drive_axis(&self) -> [f64; 3] {
        let (s, c) = self.phase.sin_cos();
        [c, s, 0.0]
    }

    fn validate(&self) -> Result<()> {
        if !(self.area.is_finite() && self.area >= 0.0) {
            return Err(GateError::InvalidArgument(format!(
                "segment area must be finite and non-negative, got {}",
                self.area
            )));
        }
        if !self.phase.is_finite() {
            return Err(GateError::InvalidArgument("segment phase is not finite".into()));
        }
        if !(self.rabi.is_finite() && self.rabi > 0.0) {
            return Err(GateError::InvalidArgument(format!(
                "segment Rabi rate must be positive, got {}",
                self.rabi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateFamily {
    #[serde(alias = "naive")]
    NaiveDynamical,
    #[serde(alias = "geo")]
    ConventionalGeometric,
    #[serde(alias = "opt")]
    OptimizedGeometric,
    #[serde(alias = "twopi")]
    TwoPiCorrected,
}

impl GateFamily {
    pub const ALL: [GateFamily; 4] = [
        GateFamily::NaiveDynamical,
        GateFamily::ConventionalGeometric,
        GateFamily::OptimizedGeometric,
        GateFamily::TwoPiCorrected,
    ];

    pub fn is_geometric(self) -> bool {
        !matches!(self, GateFamily::NaiveDynamical)
    }

    /// Short name used on the command line and in output files.
    pub fn short_name(self) -> &'static str {
        match self {
            GateFamily::NaiveDynamical => "naive",
            GateFamily::ConventionalGeometric => "geo",
            GateFamily::OptimizedGeometric => "opt",
            GateFamily::TwoPiCorrected => "twopi",
        }
    }
}

impl fmt::Display for GateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for GateFamily {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" | "naive_dynamical" => Ok(GateFamily::NaiveDynamical),
            "geo" | "conventional_geometric" => Ok(GateFamily::ConventionalGeometric),
            "opt" | "optimized_geometric" => Ok(GateFamily::OptimizedGeometric),
            "twopi" | "two_pi_corrected" => Ok(GateFamily::TwoPiCorrected),
            other => Err(GateError::InvalidArgument(format!("unknown gate family '{other}'"))),
        }
    }
}

/// Geometric-gate parameters `(θ, φ, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
}

impl GateParams {
    pub fn new(theta: f64, phi: f64, gamma: f64) -> Self {
        GateParams { theta, phi, gamma }
    }

    /// Rotation axis `n = (sin θ cos φ, sin θ sin φ, cos θ)`.
    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Rotation angle `χ = -2γ` about `axis()`.
    pub fn rotation_angle(&self) -> f64 {
        -2.0 * self.gamma
    }

    fn check_theta(&self, max: f64) -> Result<()> {
        if !(self.theta.is_finite() && self.phi.is_finite() && self.gamma.is_finite()) {
            return Err(GateError::InvalidArgument(format!("non-finite gate parameters {self:?}")));
        }
        if !(0.0..=max).contains(&self.theta) {
            return Err(GateError::InvalidArgument(format!(
                "theta = {} outside [0, {max}]",
                self.theta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    pub family: GateFamily,
    /// Parameters of the ideal gate this sequence implements.
    pub params: GateParams,
}

impl PulseSequence {
    pub fn total_area(&self) -> f64 {
        self.segments.iter().map(|s| s.area).sum()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(PulseSegment::duration).sum()
    }

    /// Ideal unitary implemented by this sequence (up to global phase for
    /// naive dynamical sequences).
    pub fn target(&self) -> Matrix2 {
        target_unitary(&self.params)
    }

    /// Sets every segment's Rabi rate.
    pub fn with_rabi(mut self, rabi: f64) -> Self {
        for s in &mut self.segments {
            s.rabi = rabi;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.segments.iter().try_for_each(PulseSegment::validate)
    }

    /// Serializes the sequence to JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pulse sequences always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let seq: PulseSequence = serde_json::from_str(s)
            .map_err(|e| GateError::InvalidArgument(format!("bad sequence JSON: {e}")))?;
        seq.validate()?;
        Ok(seq)
    }
}

/// Target `cos γ I + i sin γ (n·σ) = e^{iγ n·σ}`.
pub fn target_unitary(params: &GateParams) -> Matrix2 {
    let (s, c) = params.gamma.sin_cos();
    let n = Matrix2::pauli_dot(params.axis());
    Matrix2::identity().scale_re(c) + n.scale(C64::new(0.0, s))
}

fn geometric(family: GateFamily, params: GateParams, spec: &[(f64, f64)]) -> PulseSequence {
    PulseSequence {
        segments: spec.iter().map(|&(a, p)| PulseSegment::new(a, p)).collect(),
        family,
        params,
    }
}

/// Three-segment orange-slice geometric gate.
pub fn conventional_sequence(params: GateParams) -> Result<PulseSequence> {
    params.check_theta(PI)?;
    let GateParams { theta, phi, gamma } = params;
    Ok(geometric(
        GateFamily::ConventionalGeometric,
        params,
        &[
            (theta, phi - FRAC_PI_2),
            (PI, phi + gamma + FRAC_PI_2),
            (PI - theta, phi - FRAC_PI_2),
        ],
    ))
}

/// Five-segment dynamically corrected geometric gate. The middle π segment
/// is marked `delta_suppressed` when `perfect_pi` is set.
pub fn optimized_sequence(params: GateParams, perfect_pi: bool) -> Result<PulseSequence> {
    params.check_theta(PI)?;
    let GateParams { theta, phi, gamma } = params;
    let mut seq = geometric(
        GateFamily::OptimizedGeometric,
        params,
        &[
            (theta, phi - FRAC_PI_2),
            (FRAC_PI_2, phi + gamma + PI),
            (PI, phi + gamma + 1.5 * PI),
            (FRAC_PI_2, phi + gamma + PI),
            (PI - theta, phi - FRAC_PI_2),
        ],
    );
    seq.segments[2].delta_suppressed = perfect_pi;
    Ok(seq)
}

/// Seven-segment gate with two inserted π pulses. Only `θ ≤ π/2` is
/// realizable since the last segment has area `π/2 - θ`.
pub fn two_pi_sequence(params: GateParams) -> Result<PulseSequence> {
    params.check_theta(FRAC_PI_2)?;
    let GateParams { theta, phi, gamma } = params;
    Ok(geometric(
        GateFamily::TwoPiCorrected,
        params,
        &[
            (theta, phi - FRAC_PI_2),
            (FRAC_PI_2, phi + gamma + FRAC_PI_2),
            (PI, phi + gamma + PI),
            (FRAC_PI_2, phi + gamma + FRAC_PI_2),
            (FRAC_PI_2, phi - FRAC_PI_2),
            (PI, phi),
            (FRAC_PI_2 - theta, phi - FRAC_PI_2),
        ],
    ))
}

/// One-piece rotation by `chi` about `(cos φ, sin φ, 0)`. A negative angle is
/// realized with a positive area and the phase shifted by π.
pub fn dynamical_rotation(phase: f64, chi: f64) -> PulseSequence {
    let (area, drive_phase) = if chi >= 0.0 { (chi, phase) } else { (-chi, phase + PI) };
    let (s, c) = phase.sin_cos();
    PulseSequence {
        segments: vec![PulseSegment::new(area, drive_phase)],
        family: GateFamily::NaiveDynamical,
        params: rotation_to_gate_params([c, s, 0.0], chi),
    }
}

/// Angles `(χa, χb, χc)` with `R(x̂,χc) R(ŷ,χb) R(x̂,χa)` equal to `target` up
/// to global phase.
///
/// Conjugating by `R(ŷ, π/2)` turns x-rotations into z-rotations, so this is
/// the usual z-y-z Euler extraction. Branch: `χb ∈ [0, π]`, `χa = 0` when the
/// middle angle is degenerate (0 or π), and among the two equivalent triples
/// `(a, b, c)` and `(a+π, -b, c+π)` (each angle wrapped into `(-π, π]`) the one
/// with the smaller total area wins, ties going to the first.
pub fn xyx_decompose(target: &Matrix2) -> Result<(f64, f64, f64)> {
    if !target.is_unitary(1e-10) {
        return Err(GateError::PreconditionViolation(format!(
            "xyx_decompose needs a unitary input (defect {:e})",
            target.unitarity_defect()
        )));
    }
    let w = su2_exp([0.0, 1.0, 0.0], FRAC_PI_2)?;
    let u = (w.adjoint() * *target * w).0;
    let (cos_mag, sin_mag) = (u[0][0].norm(), u[1][0].norm());
    let b = 2.0 * sin_mag.atan2(cos_mag);
    const DEGENERATE: f64 = 1e-9;
    let (a, c) = if sin_mag < DEGENERATE {
        (0.0, u[1][1].arg() - u[0][0].arg())
    } else if cos_mag < DEGENERATE {
        (0.0, u[1][0].arg() - (-u[0][1]).arg())
    } else {
        let sum = u[1][1].arg() - u[0][0].arg();
        let diff = u[1][0].arg() - (-u[0][1]).arg();
        (0.5 * (sum - diff), 0.5 * (sum + diff))
    };
    let first = (wrap_pi(a), wrap_pi(b), wrap_pi(c));
    let second = (wrap_pi(a + PI), wrap_pi(-b), wrap_pi(c + PI));
    let cost = |t: &(f64, f64, f64)| t.0.abs() + t.1.abs() + t.2.abs();
    Ok(if cost(&second) < cost(&first) - 1e-12 {
        second
    } else {
        first
    })
}

/// Geometric parameters for the rotation `exp(-i (χ/2) axis·σ)`:
/// spherical angles of the axis and `γ = -χ/2`. The azimuth is fixed to 0 on
/// the poles.
pub fn rotation_to_gate_params(axis: [f64; 3], chi: f64) -> GateParams {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let theta = z.clamp(-1.0, 1.0).acos();
    let rho = x.hypot(y);
    let phi = if rho < 1e-12 { 0.0 } else { y.atan2(x).rem_euclid(TAU) };
    let phi = if phi >= TAU { 0.0 } else { phi };
    GateParams {
        theta,
        phi,
        gamma: -0.5 * chi,
    }
}

/// Builds the sequence of one family for an arbitrary target rotation.
///
/// Geometric families use the canonical axis-angle form (angle in `[0, π]`).
/// The identity becomes an empty sequence for every family. For the two-π
/// family, axes in the lower hemisphere are flipped together with the angle
/// so that `θ ≤ π/2`. Naive gates are concatenated one-piece x/y rotations.
pub fn compile_unitary(
    target: &Matrix2,
    family: GateFamily,
    perfect_pi: bool,
) -> Result<PulseSequence> {
    let aa = axis_angle_decompose(target)?;
    let params = rotation_to_gate_params(aa.axis, aa.angle);
    if aa.angle.abs() < ZERO_ANGLE {
        return Ok(PulseSequence {
            segments: Vec::new(),
            family,
            params,
        });
    }
    match family {
        GateFamily::NaiveDynamical => {
            let (a, b, c) = xyx_decompose(target)?;
            let segments = [(0.0, a), (FRAC_PI_2, b), (0.0, c)]
                .into_iter()
                .filter(|(_, chi)| chi.abs() >= ZERO_ANGLE)
                .flat_map(|(phase, chi)| dynamical_rotation(phase, chi).segments)
                .collect();
            Ok(PulseSequence {
                segments,
                family,
                params,
            })
        }
        GateFamily::ConventionalGeometric => conventional_sequence(params),
        GateFamily::OptimizedGeometric => optimized_sequence(params, perfect_pi),
        GateFamily::TwoPiCorrected => {
            let p = if params.theta > FRAC_PI_2 {
                let flipped = [-aa.axis[0], -aa.axis[1], -aa.axis[2]];
                rotation_to_gate_params(flipped, -aa.angle)
            } else {
                params
            };
            two_pi_sequence(p)
        }
    }
}

/// Builds the sequence of a family from geometric parameters directly.
pub fn build_sequence(
    family: GateFamily,
    params: GateParams,
    perfect_pi: bool,
) -> Result<PulseSequence> {
    match family {
        GateFamily::ConventionalGeometric => conventional_sequence(params),
        GateFamily::OptimizedGeometric => optimized_sequence(params, perfect_pi),
        GateFamily::TwoPiCorrected => two_pi_sequence(params),
        GateFamily::NaiveDynamical => compile_unitary(&target_unitary(&params), family, false),
    }
}
