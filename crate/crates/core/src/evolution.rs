//! Propagation under the perturbed control Hamiltonian
//!
//! `H' = ((1+ε)Ω/2)(cos φ σx + sin φ σy) + (Ωδ/2) σz`
//!
//! together with the dressed-state diagnostics (cyclicity, parallel transport,
//! loop closure) and the second-order fidelity expansions used as references.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::pulses::{
    build_sequence, dynamical_rotation, rotation_to_gate_params, GateFamily, GateParams,
    PulseSegment, PulseSequence,
};
use crate::su2::{bloch_vector, exp_generator, overlap, wrap_pi, Ket, Matrix2, C64};

/// Default number of trajectory samples per segment.
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 64;

/// Quasi-static amplitude (`ε`) and off-resonance (`δ`) errors, both relative
/// to the Rabi rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StaticError {
    pub epsilon: f64,
    pub delta: f64,
}

impl StaticError {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.abs() < 1.0 && delta.abs() < 1.0) {
            return Err(GateError::InvalidArgument(format!(
                "static errors must satisfy |ε|, |δ| < 1 (got ε = {epsilon}, δ = {delta})"
            )));
        }
        Ok(StaticError { epsilon, delta })
    }

    pub fn off_resonance(delta: f64) -> Result<Self> {
        Self::new(0.0, delta)
    }

    pub fn amplitude(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub const fn none() -> Self {
        StaticError {
            epsilon: 0.0,
            delta: 0.0,
        }
    }
}

/// Generator `v` with `H' = (Ω/2) v·σ` inside one segment.
pub fn segment_generator(seg: &PulseSegment, err: &StaticError) -> [f64; 3] {
    let (s, c) = seg.phase.sin_cos();
    let amp = 1.0 + err.epsilon;
    let dz = if seg.delta_suppressed { 0.0 } else { err.delta };
    [amp * c, amp * s, dz]
}

/// Exact propagator for the first `fraction` of a segment.
pub fn segment_propagator(seg: &PulseSegment, err: &StaticError, fraction: f64) -> Matrix2 {
    exp_generator(segment_generator(seg, err), seg.area * fraction)
}

/// Product of the exact per-segment exponentials.
pub fn propagate(seq: &PulseSequence, err: &StaticError) -> Matrix2 {
    seq.segments
        .iter()
        .fold(Matrix2::identity(), |acc, seg| segment_propagator(seg, err, 1.0) * acc)
}

/// Dressed-state pair `|ψ+⟩ = cos(θ/2)|0⟩ + sin(θ/2)e^{iφ}|1⟩`,
/// `|ψ-⟩ = sin(θ/2)e^{-iφ}|0⟩ - cos(θ/2)|1⟩`.
pub fn dressed_states(theta: f64, phi: f64) -> (Ket, Ket) {
    let (s, c) = (0.5 * theta).sin_cos();
    let plus = [C64::new(c, 0.0), C64::from_polar(s, phi)];
    let minus = [C64::from_polar(s, -phi), C64::new(-c, 0.0)];
    (plus, minus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Elapsed time in units of `1/Ω` (or seconds when Rabi rates are physical).
    pub times: Vec<f64>,
    /// Bloch vector of the evolved `|ψ+(0)⟩`.
    pub bloch_points: Vec<[f64; 3]>,
    /// Partial propagators `U(t)`.
    pub propagators: Vec<Matrix2>,
}

impl Trajectory {
    /// Distance on the Bloch sphere between the last and first sample.
    pub fn endpoint_gap(&self) -> f64 {
        match (self.bloch_points.first(), self.bloch_points.last()) {
            (Some(a), Some(b)) => {
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            }
            _ => 0.0,
        }
    }
}

/// Samples the partial propagators uniformly in time within each segment
/// (`samples_per_segment` points per segment including both ends, shared
/// boundaries stored once) and tracks the dressed state `|ψ+(0)⟩`.
pub fn propagate_sampled(
    seq: &PulseSequence,
    err: &StaticError,
    samples_per_segment: usize,
) -> Result<Trajectory> {
    if samples_per_segment < 2 {
        return Err(GateError::InvalidArgument(format!(
            "samples_per_segment must be at least 2, got {samples_per_segment}"
        )));
    }
    let (psi0, _) = dressed_states(seq.params.theta, seq.params.phi);
    let mut traj = Trajectory {
        times: vec![0.0],
        bloch_points: vec![bloch_vector(&psi0)],
        propagators: vec![Matrix2::identity()],
    };
    let mut start = Matrix2::identity();
    let mut t0 = 0.0;
    for seg in seq.segments.iter().filter(|s| s.area > 0.0) {
        let intervals = samples_per_segment - 1;
        for k in 1..=intervals {
            let frac = k as f64 / intervals as f64;
            let u = segment_propagator(seg, err, frac) * start;
            traj.times.push(t0 + frac * seg.duration());
            traj.bloch_points.push(bloch_vector(&u.apply(&psi0)));
            traj.propagators.push(u);
        }
        start = segment_propagator(seg, err, 1.0) * start;
        t0 += seg.duration();
    }
    Ok(traj)
}

fn require_geometric(seq: &PulseSequence, what: &str) -> Result<()> {
    if seq.family.is_geometric() {
        Ok(())
    } else {
        Err(GateError::UnsupportedOperation(format!(
            "{what} is defined for geometric families only, got {}",
            seq.family
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicCheck {
    /// Phase of `⟨ψ+(0)|U(T)|ψ+(0)⟩` relative to the global phase of `U(T)`.
    pub phase_plus: f64,
    pub phase_minus: f64,
    /// `arg Tr(V†U(T))` against the ideal target `V`.
    pub global_phase: f64,
    /// `max± (1 - |⟨ψ±(0)|U(T)|ψ±(0)⟩|²)`.
    pub closure_defect: f64,
}

/// Phases acquired by the two dressed states over the noiseless sequence,
/// with the common loop phase removed.
pub fn cyclic_phase_check(seq: &PulseSequence) -> Result<CyclicCheck> {
    require_geometric(seq, "cyclic_phase_check")?;
    let u = propagate(seq, &StaticError::none());
    let (plus, minus) = dressed_states(seq.params.theta, seq.params.phi);
    let ap = u.sandwich(&plus, &plus);
    let am = u.sandwich(&minus, &minus);
    let global = (seq.target().adjoint() * u).trace().arg();
    Ok(CyclicCheck {
        phase_plus: wrap_pi(ap.arg() - global),
        phase_minus: wrap_pi(am.arg() - global),
        global_phase: global,
        closure_defect: (1.0 - ap.norm_sqr()).max(1.0 - am.norm_sqr()).max(0.0),
    })
}

/// Distance between two angles modulo `2π`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// `H_c` of a segment without errors, `(Ω/2)(cos φ σx + sin φ σy)`.
fn control_hamiltonian(seg: &PulseSegment) -> Matrix2 {
    Matrix2::pauli_dot(seg.drive_axis()).scale_re(0.5 * seg.rabi)
}

/// `max_t max± |⟨ψ±(0)|U†(t) H_c(t) U(t)|ψ±(0)⟩|` on `resolution` samples per
/// segment of the noiseless evolution.
pub fn parallel_transport_residual(seq: &PulseSequence, resolution: usize) -> Result<f64> {
    if resolution < 2 {
        return Err(GateError::InvalidArgument(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    let (plus, minus) = dressed_states(seq.params.theta, seq.params.phi);
    let none = StaticError::none();
    let mut start = Matrix2::identity();
    let mut worst: f64 = 0.0;
    for seg in seq.segments.iter().filter(|s| s.area > 0.0) {
        let h = control_hamiltonian(seg);
        for k in 0..resolution {
            let frac = k as f64 / (resolution - 1) as f64;
            let u = segment_propagator(seg, &none, frac) * start;
            for psi in [&plus, &minus] {
                let evolved = u.apply(psi);
                worst = worst.max(h.sandwich(&evolved, &evolved).norm());
            }
        }
        start = segment_propagator(seg, &none, 1.0) * start;
    }
    Ok(worst)
}

/// Accumulated dynamical phases `-∫⟨ψ±(t)|H_c|ψ±(t)⟩dt` of the two dressed
/// states. The energy expectation is constant within a segment, so the
/// integral is a finite sum.
pub fn dynamical_phases(seq: &PulseSequence) -> (f64, f64) {
    let (plus, minus) = dressed_states(seq.params.theta, seq.params.phi);
    let none = StaticError::none();
    let mut start = Matrix2::identity();
    let (mut p, mut m) = (0.0, 0.0);
    for seg in seq.segments.iter().filter(|s| s.area > 0.0) {
        let h = control_hamiltonian(seg);
        let (a, b) = (start.apply(&plus), start.apply(&minus));
        p -= h.sandwich(&a, &a).re * seg.duration();
        m -= h.sandwich(&b, &b).re * seg.duration();
        start = segment_propagator(seg, &none, 1.0) * start;
    }
    (p, m)
}

/// `δF = 1 - |⟨ψ+(0)|U_δ(T)|ψ+(0)⟩|²`.
pub fn loop_closure_infidelity(seq: &PulseSequence, delta: f64) -> Result<f64> {
    require_geometric(seq, "loop_closure_infidelity")?;
    let u = propagate(seq, &StaticError::off_resonance(delta)?);
    let (plus, _) = dressed_states(seq.params.theta, seq.params.phi);
    Ok((1.0 - u.sandwich(&plus, &plus).norm_sqr()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Amplitude,
    OffResonance,
}

impl ErrorKind {
    pub fn static_error(self, magnitude: f64) -> Result<StaticError> {
        match self {
            ErrorKind::Amplitude => StaticError::amplitude(magnitude),
            ErrorKind::OffResonance => StaticError::off_resonance(magnitude),
        }
    }
}

/// Sequence implementing the x-axis rotation by `chi` in a given family.
pub fn x_rotation(family: GateFamily, chi: f64, perfect_pi: bool) -> Result<PulseSequence> {
    match family {
        GateFamily::NaiveDynamical => Ok(dynamical_rotation(0.0, chi)),
        _ => build_sequence(family, rotation_to_gate_params([1.0, 0.0, 0.0], chi), perfect_pi),
    }
}

/// Propagated trace fidelity of an x-rotation by `chi` under one static error.
pub fn numeric_x_fidelity(
    family: GateFamily,
    kind: ErrorKind,
    chi: f64,
    magnitude: f64,
    perfect_pi: bool,
) -> Result<f64> {
    let seq = x_rotation(family, chi, perfect_pi)?;
    Ok(overlap(&seq.target(), &propagate(&seq, &kind.static_error(magnitude)?)).min(1.0))
}

/// Second-order fidelity expansion for an x-rotation by `chi`.
///
/// Closed forms exist for naive/conventional under both error kinds and for
/// the optimized gate under off-resonance error. The two-π gate under
/// off-resonance error is evaluated by direct propagation; its closed forms
/// are [`two_pi_printed_expansion`] and [`two_pi_fitted_expansion`].
pub fn analytic_fidelity(
    family: GateFamily,
    kind: ErrorKind,
    chi: f64,
    magnitude: f64,
) -> Result<f64> {
    let m2 = magnitude * magnitude;
    use ErrorKind::*;
    use GateFamily::*;
    match (family, kind) {
        (NaiveDynamical, OffResonance) => Ok(1.0 + 0.25 * (chi.cos() - 1.0) * m2),
        (ConventionalGeometric, OffResonance) => Ok(1.0 - 2.0 * (0.25 * chi).cos().powi(4) * m2),
        (NaiveDynamical, Amplitude) => Ok(1.0 - chi * chi / 8.0 * m2),
        (ConventionalGeometric, Amplitude) => {
            Ok(1.0 - 0.5 * PI * PI * (0.25 * chi).sin().powi(4) * m2)
        }
        (OptimizedGeometric, OffResonance) => Ok(1.0 - 2.0 * (0.25 * chi).sin().powi(4) * m2),
        (TwoPiCorrected, OffResonance) => numeric_x_fidelity(family, kind, chi, magnitude, false),
        (f, k) => Err(GateError::UnsupportedOperation(format!(
            "no second-order expansion for family {f} under {k:?} error"
        ))),
    }
}

/// The two-π expansion exactly as printed, reading its `γ` as the rotation
/// angle: `1 + cos(χ²/4)(cos(χ/2) - 2 sin(χ/2) - 3) δ²`.
pub fn two_pi_printed_expansion(chi: f64, delta: f64) -> f64 {
    1.0 + (chi * chi / 4.0).cos() * ((0.5 * chi).cos() - 2.0 * (0.5 * chi).sin() - 3.0) * delta * delta
}

/// The two-π expansion with the coefficient recovered from a series fit of
/// the propagator: `1 + cos²(χ/4)(cos(χ/2) - 2 sin(χ/2) - 3) δ²`.
pub fn two_pi_fitted_expansion(chi: f64, delta: f64) -> f64 {
    1.0 + (0.25 * chi).cos().powi(2) * ((0.5 * chi).cos() - 2.0 * (0.5 * chi).sin() - 3.0) * delta * delta
}

/// Numerical second-order coefficient `c` in `F ≈ 1 + c·m² + O(m³)`, from
/// the symmetric second difference at `m = h` and `m = h/2` with one
/// Richardson step. Odd orders cancel in the symmetric difference.
pub fn second_order_coefficient(
    family: GateFamily,
    kind: ErrorKind,
    chi: f64,
    perfect_pi: bool,
) -> Result<f64> {
    let f = |m: f64| numeric_x_fidelity(family, kind, chi, m, perfect_pi);
    let q = |h: f64| -> Result<f64> { Ok((f(h)? + f(-h)? - 2.0) / (2.0 * h * h)) };
    let h = 2e-3;
    let (a, b) = (q(h)?, q(0.5 * h)?);
    Ok((4.0 * b - a) / 3.0)
}

/// Target rotation for scans: `exp(-i (chi/2) axis·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub axis: [f64; 3],
    pub chi: f64,
}

impl RotationSpec {
    pub fn x(chi: f64) -> Self {
        RotationSpec {
            axis: [1.0, 0.0, 0.0],
            chi,
        }
    }

    pub fn params(&self) -> GateParams {
        rotation_to_gate_params(self.axis, self.chi)
    }

    /// Sequence of the given family. Rotations about the equatorial plane are
    /// built directly for naive gates; other naive rotations use x-y-x pieces.
    pub fn sequence(&self, family: GateFamily, perfect_pi: bool) -> Result<PulseSequence> {
        let params = self.params();
        if family == GateFamily::NaiveDynamical && params.theta == FRAC_PI_2 {
            return Ok(dynamical_rotation(params.phi, self.chi));
        }
        if family == GateFamily::TwoPiCorrected && params.theta > FRAC_PI_2 {
            let flipped = RotationSpec {
                axis: [-self.axis[0], -self.axis[1], -self.axis[2]],
                chi: -self.chi,
            };
            return flipped.sequence(family, perfect_pi);
        }
        build_sequence(family, params, perfect_pi)
    }
}

/// Trace fidelity against the ideal target over a grid of error magnitudes.
pub fn fidelity_scan(
    family: GateFamily,
    perfect_pi: bool,
    rotation: &RotationSpec,
    kind: ErrorKind,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(GateError::InvalidArgument("scan grid contains non-finite values".into()));
    }
    let seq = rotation.sequence(family, perfect_pi)?;
    let target = seq.target();
    grid.par_iter()
        .map(|&m| {
            let u = propagate(&seq, &kind.static_error(m)?);
            Ok((m, overlap(&target, &u).min(1.0)))
        })
        .collect()
}

/// One row of the four-curve robustness scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub error: f64,
    pub fidelity_naive: f64,
    pub fidelity_geo: f64,
    pub fidelity_opt: f64,
    pub fidelity_opt_perfect: f64,
}

/// Naive, conventional, optimized and perfect-π optimized curves on one grid.
pub fn robustness_scan(rotation: &RotationSpec, kind: ErrorKind, grid: &[f64]) -> Result<Vec<ScanRow>> {
    if grid.is_empty() {
        return Err(GateError::InvalidArgument("empty scan grid".into()));
    }
    let naive = fidelity_scan(GateFamily::NaiveDynamical, false, rotation, kind, grid)?;
    let geo = fidelity_scan(GateFamily::ConventionalGeometric, false, rotation, kind, grid)?;
    let opt = fidelity_scan(GateFamily::OptimizedGeometric, false, rotation, kind, grid)?;
    let perfect = fidelity_scan(GateFamily::OptimizedGeometric, true, rotation, kind, grid)?;
    Ok((0..grid.len())
        .map(|i| ScanRow {
            error: grid[i],
            fidelity_naive: naive[i].1,
            fidelity_geo: geo[i].1,
            fidelity_opt: opt[i].1,
            fidelity_opt_perfect: perfect[i].1,
        })
        .collect())
}
