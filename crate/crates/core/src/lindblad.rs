//! Open-system evolution of a driven qubit under relaxation and pure
//! dephasing:
//!
//! `ρ̇ = -i[H, ρ] + γ₁ D[σ₋]ρ + (γφ/2) D[σz]ρ`, with
//! `D[L]ρ = (2LρL† - L†Lρ - ρL†L)/2` and `σ₋ = |0⟩⟨1|`.
//!
//! Time is measured in units of `1/Ω` and rates in units of `Ω`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::evolution::{segment_generator, segment_propagator, StaticError};
use crate::pulses::PulseSequence;
use crate::su2::{inner, Ket, Matrix2, C64};

/// Maximum step, per unit of rotation angle, accepted by [`evolve_master`]:
/// at least 100 steps per π of pulse area.
pub const MIN_STEPS_PER_PI: f64 = 100.0;

/// Most negative eigenvalue tolerated before the step is declared too coarse.
pub const POSITIVITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(pub Matrix2);

impl DensityMatrix {
    pub fn pure(psi: &Ket) -> Self {
        DensityMatrix(Matrix2::outer(psi, psi))
    }

    pub fn ground() -> Self {
        Self::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    pub fn excited() -> Self {
        Self::pure(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.0 .0;
        let (a, d) = (m[0][0].re, m[1][1].re);
        let b = 0.5 * (m[0][1] + m[1][0].conj());
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    /// Checks trace (1e-8), Hermiticity (1e-10) and positivity (-1e-8).
    pub fn validate(&self) -> Result<()> {
        if (self.trace() - 1.0).abs() > 1e-8 {
            return Err(GateError::PreconditionViolation(format!(
                "density matrix trace {} ≠ 1",
                self.trace()
            )));
        }
        if !self.0.is_hermitian(1e-10) {
            return Err(GateError::PreconditionViolation("density matrix not Hermitian".into()));
        }
        if self.eigenvalues()[0] < -1e-8 {
            return Err(GateError::PreconditionViolation(format!(
                "density matrix eigenvalue {} < 0",
                self.eigenvalues()[0]
            )));
        }
        Ok(())
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, psi: &Ket) -> f64 {
        self.0.sandwich(psi, psi).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladParams {
    pub gamma1: f64,
    #[serde(default)]
    pub gamma_phi: f64,
}

impl LindbladParams {
    pub fn new(gamma1: f64, gamma_phi: f64) -> Result<Self> {
        let p = LindbladParams { gamma1, gamma_phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 >= 0.0 && self.gamma1.is_finite())
            || !(self.gamma_phi >= 0.0 && self.gamma_phi.is_finite())
        {
            return Err(GateError::InvalidArgument(format!(
                "rates must be finite and ≥ 0 (γ₁ = {}, γφ = {})",
                self.gamma1, self.gamma_phi
            )));
        }
        Ok(())
    }
}

fn dissipator(l: &Matrix2, rho: &Matrix2) -> Matrix2 {
    let ld = l.adjoint();
    let ldl = ld * *l;
    (*l * *rho * ld).scale_re(2.0) - ldl * *rho - *rho * ldl
}

/// Right-hand side of the master equation.
pub fn lindblad_rhs(rho: &Matrix2, h: &Matrix2, params: &LindbladParams) -> Matrix2 {
    let comm = *h * *rho - *rho * *h;
    let mut out = comm.scale(C64::new(0.0, -1.0));
    if params.gamma1 != 0.0 {
        out = out + dissipator(&Matrix2::sigma_minus(), rho).scale_re(0.5 * params.gamma1);
    }
    if params.gamma_phi != 0.0 {
        out = out + dissipator(&Matrix2::pauli_z(), rho).scale_re(0.25 * params.gamma_phi);
    }
    out
}

fn rk4_step(rho: &Matrix2, h: &Matrix2, params: &LindbladParams, dt: f64) -> Matrix2 {
    let k1 = lindblad_rhs(rho, h, params);
    let k2 = lindblad_rhs(&(*rho + k1.scale_re(0.5 * dt)), h, params);
    let k3 = lindblad_rhs(&(*rho + k2.scale_re(0.5 * dt)), h, params);
    let k4 = lindblad_rhs(&(*rho + k3.scale_re(dt)), h, params);
    *rho + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(dt / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterSample {
    pub t: f64,
    pub rho: DensityMatrix,
    /// `⟨ψ_ideal(t)|ρ(t)|ψ_ideal(t)⟩` with `ψ_ideal` the error-free evolution
    /// of the same initial state.
    pub fidelity: f64,
}

/// Fixed-step RK4 integration of the master equation along a pulse sequence.
///
/// Each segment is divided into the smallest number of equal steps not
/// exceeding `dt`, so segment boundaries fall on the grid. The first sample is
/// the initial state at `t = 0`.
pub fn evolve_master_from(
    seq: &PulseSequence,
    err: &StaticError,
    params: &LindbladParams,
    dt: f64,
    psi0: &Ket,
) -> Result<Vec<MasterSample>> {
    params.validate()?;
    seq.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GateError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let rho0 = DensityMatrix::pure(psi0);
    rho0.validate()?;
    let none = StaticError::none();
    let mut out = vec![MasterSample {
        t: 0.0,
        rho: rho0,
        fidelity: rho0.fidelity_with(psi0),
    }];
    let mut rho = rho0.0;
    let mut ideal_start = Matrix2::identity();
    let mut t0 = 0.0;
    for seg in seq.segments.iter().filter(|s| s.area > 0.0) {
        let max_dt = PI / (MIN_STEPS_PER_PI * seg.rabi);
        if dt > max_dt * (1.0 + 1e-12) {
            return Err(GateError::InvalidArgument(format!(
                "dt = {dt} does not resolve the drive (need ≤ {max_dt})"
            )));
        }
        let duration = seg.duration();
        let steps = (duration / dt).ceil().max(1.0) as usize;
        let h_step = duration / steps as f64;
        let h = Matrix2::pauli_dot(segment_generator(seg, err)).scale_re(0.5 * seg.rabi);
        for k in 1..=steps {
            rho = rk4_step(&rho, &h, params, h_step);
            let state = DensityMatrix(rho);
            let lowest = state.eigenvalues()[0];
            if lowest < -POSITIVITY_TOL {
                return Err(GateError::AccuracyFailure(format!(
                    "eigenvalue {lowest:e} at t = {}; reduce dt",
                    t0 + k as f64 * h_step
                )));
            }
            let frac = k as f64 / steps as f64;
            let ideal = (segment_propagator(seg, &none, frac) * ideal_start).apply(psi0);
            out.push(MasterSample {
                t: t0 + k as f64 * h_step,
                rho: state,
                fidelity: state.fidelity_with(&ideal),
            });
        }
        ideal_start = segment_propagator(seg, &none, 1.0) * ideal_start;
        t0 += duration;
    }
    Ok(out)
}

/// [`evolve_master_from`] starting in `|0⟩`.
pub fn evolve_master(
    seq: &PulseSequence,
    err: &StaticError,
    params: &LindbladParams,
    dt: f64,
) -> Result<Vec<MasterSample>> {
    evolve_master_from(seq, err, params, dt, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

/// Average gate fidelity of the simulated channel against the sequence
/// target, `1/2 + (1/12) Σ_j Tr[V σ_j V† E(σ_j)]`, with `E` reconstructed by
/// linearity from four pure-state inputs.
pub fn average_gate_fidelity(
    seq: &PulseSequence,
    err: &StaticError,
    params: &LindbladParams,
    dt: f64,
) -> Result<f64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let inputs: [Ket; 4] = [
        [one, zero],
        [zero, one],
        [C64::new(r, 0.0), C64::new(r, 0.0)],
        [C64::new(r, 0.0), C64::new(0.0, r)],
    ];
    let mut finals = Vec::with_capacity(4);
    for psi in &inputs {
        let run = evolve_master_from(seq, err, params, dt, psi)?;
        finals.push(run.last().map(|s| s.rho.0).unwrap_or(Matrix2::outer(psi, psi)));
    }
    let e_id = finals[0] + finals[1];
    let e_x = finals[2].scale_re(2.0) - e_id;
    let e_y = finals[3].scale_re(2.0) - e_id;
    let e_z = finals[0] - finals[1];
    let v = seq.target();
    let mut acc = 0.0;
    for (s, e) in [
        (Matrix2::pauli_x(), e_x),
        (Matrix2::pauli_y(), e_y),
        (Matrix2::pauli_z(), e_z),
    ] {
        acc += (v * s * v.adjoint() * e).trace().re;
    }
    Ok(0.5 + acc / 12.0)
}

/// CSV with columns `t_over_T, fidelity`.
pub fn samples_to_csv(samples: &[MasterSample]) -> String {
    let total = samples.last().map(|s| s.t).unwrap_or(0.0);
    let mut out = String::from("t_over_T,fidelity\n");
    for s in samples {
        let x = if total > 0.0 { s.t / total } else { 0.0 };
        out.push_str(&format!("{x:.9e},{:.15e}\n", s.fidelity));
    }
    out
}

/// `|⟨a|b⟩|²`.
pub fn state_overlap(a: &Ket, b: &Ket) -> f64 {
    inner(a, b).norm_sqr()
}
