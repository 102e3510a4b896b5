//! Filter-function analysis of pulse sequences under classical dephasing
//! noise with a `1/f^α` spectrum.
//!
//! The control matrix `R_jk(t) = Tr[U_c†(t) σ_j U_c(t) σ_k]/2` is sampled on a
//! uniform grid inside each segment and Fourier transformed by the composite
//! trapezoid rule. Only the σz noise row is needed for off-resonance noise.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::evolution::{segment_propagator, RotationSpec, StaticError};
use crate::pulses::{compile_unitary, GateFamily, PulseSequence};
use crate::su2::{su2_exp, Matrix2, C64};

/// Schema version stamped on serialized filter-function outputs.
pub const FF_SCHEMA_VERSION: u32 = 1;

/// Largest admissible rotation-angle step between control-matrix samples.
pub const MAX_PHASE_STEP: f64 = 0.1;

/// Default sampling step (rotation angle, rad) for fidelity integrals.
pub const DEFAULT_PHASE_STEP: f64 = 2e-3;

/// How the spectrum and the overlap integral are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// `S(f) = S0/f^α` is the one-sided power spectral density of the
    /// detuning in Hz²/Hz; the kernel is `e^{i2πft}` with `t` in seconds and
    /// `1 - F = (π²/2) ∫ S(f) |∫ e^{i2πft} R_z(t) dt|² df`. Its quasi-static
    /// limit coincides with the trace-fidelity expansion of the propagator.
    #[default]
    Hertz,
    /// The reduced overlap formula read in angular frequency:
    /// `1 - F = (1/2π) ∫ S(ω) F_z(ω)/ω² dω` with `S(ω) = S0/ω^α`,
    /// `ω = 2πf` and the configured cutoffs converted from Hz.
    Angular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpectrum {
    /// Amplitude, Hz².
    pub s0: f64,
    pub alpha: f64,
    /// Infrared cutoff, Hz.
    pub f_lo: f64,
    /// Ultraviolet cutoff, Hz.
    pub f_uv: f64,
}

/// Infrared cutoff used when none is configured.
pub const DEFAULT_F_LO: f64 = 10.0;

/// Candidate infrared cutoffs for the calibration sweep, Hz.
pub const F_LO_CANDIDATES: [f64; 3] = [10.0, 100.0, 1000.0];

impl Default for NoiseSpectrum {
    fn default() -> Self {
        NoiseSpectrum {
            s0: 2.67e6,
            alpha: 1.01,
            f_lo: DEFAULT_F_LO,
            f_uv: 320e3,
        }
    }
}

impl NoiseSpectrum {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 >= 0.0 && self.s0.is_finite()) {
            return Err(GateError::InvalidArgument(format!("S0 must be ≥ 0, got {}", self.s0)));
        }
        if !self.alpha.is_finite() {
            return Err(GateError::InvalidArgument("alpha must be finite".into()));
        }
        if self.f_lo == 0.0 && self.alpha >= 1.0 {
            return Err(GateError::InvalidArgument(format!(
                "f_lo = 0 makes the overlap integral diverge for alpha = {} ≥ 1",
                self.alpha
            )));
        }
        if !(self.f_lo >= 0.0 && self.f_lo < self.f_uv && self.f_uv.is_finite()) {
            return Err(GateError::InvalidArgument(format!(
                "cutoffs must satisfy 0 ≤ f_lo < f_uv (got {} and {})",
                self.f_lo, self.f_uv
            )));
        }
        Ok(())
    }

    pub fn density(&self, f: f64) -> f64 {
        self.s0 / f.powf(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTrajectory {
    /// Seconds over `[0, T']`.
    pub times: Vec<f64>,
    pub r: Vec<[[f64; 3]; 3]>,
    /// Sample indices at which a new segment starts (the first is 0).
    pub segment_starts: Vec<usize>,
}

impl ControlTrajectory {
    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Largest deviation of `RᵀR` from the identity over all samples.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.r {
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - want).abs());
                }
            }
        }
        worst
    }
}

/// `det` of a 3×3 matrix.
pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `R_jk = Tr[U† σ_j U σ_k]/2`.
pub fn adjoint_rotation(u: &Matrix2) -> [[f64; 3]; 3] {
    let paulis = [Matrix2::pauli_x(), Matrix2::pauli_y(), Matrix2::pauli_z()];
    let mut r = [[0.0; 3]; 3];
    for (j, sj) in paulis.iter().enumerate() {
        let conj = u.adjoint() * *sj * *u;
        for (k, sk) in paulis.iter().enumerate() {
            r[j][k] = 0.5 * (conj * *sk).trace().re;
        }
    }
    r
}

/// Samples the control matrix of the error-free evolution. `rabi` is the
/// angular Rabi frequency in rad/s; each segment is cut into equal steps of
/// rotation angle at most `max_phase_step`.
pub fn control_matrix(
    seq: &PulseSequence,
    rabi: f64,
    max_phase_step: f64,
) -> Result<ControlTrajectory> {
    if !(rabi > 0.0 && rabi.is_finite()) {
        return Err(GateError::InvalidArgument(format!("rabi must be positive, got {rabi}")));
    }
    if !(max_phase_step > 0.0 && max_phase_step < MAX_PHASE_STEP) {
        return Err(GateError::InvalidArgument(format!(
            "max_phase_step must lie in (0, {MAX_PHASE_STEP}), got {max_phase_step}"
        )));
    }
    seq.validate()?;
    let none = StaticError::none();
    let mut traj = ControlTrajectory {
        times: vec![0.0],
        r: vec![adjoint_rotation(&Matrix2::identity())],
        segment_starts: Vec::new(),
    };
    let mut start = Matrix2::identity();
    let mut t0 = 0.0;
    for seg in seq.segments.iter().filter(|s| s.area > 0.0) {
        traj.segment_starts.push(traj.times.len() - 1);
        let steps = (seg.area / max_phase_step).ceil().max(1.0) as usize;
        let duration = seg.duration() / rabi;
        for k in 1..=steps {
            let frac = k as f64 / steps as f64;
            let u = segment_propagator(seg, &none, frac) * start;
            traj.times.push(t0 + frac * duration);
            traj.r.push(adjoint_rotation(&u));
        }
        start = segment_propagator(seg, &none, 1.0) * start;
        t0 += duration;
    }
    Ok(traj)
}

/// `∫₀^{T'} e^{iωt} R_jk(t) dt` for every `(j, k)` by the composite trapezoid
/// rule on the sampled grid.
pub fn fourier_integral(traj: &ControlTrajectory, omega: f64) -> [[C64; 3]; 3] {
    let mut acc = [[C64::new(0.0, 0.0); 3]; 3];
    let n = traj.times.len();
    for i in 1..n {
        let (t0, t1) = (traj.times[i - 1], traj.times[i]);
        let h = 0.5 * (t1 - t0);
        let (e0, e1) = (C64::from_polar(1.0, omega * t0), C64::from_polar(1.0, omega * t1));
        for j in 0..3 {
            for k in 0..3 {
                acc[j][k] += (e0 * traj.r[i - 1][j][k] + e1 * traj.r[i][j][k]) * h;
            }
        }
    }
    acc
}

/// `R_ij(ω) = -iω ∫₀^{T'} e^{iωt} R_ij(t) dt` at each angular frequency.
pub fn fourier_control(traj: &ControlTrajectory, omegas: &[f64]) -> Vec<[[C64; 3]; 3]> {
    omegas
        .par_iter()
        .map(|&w| {
            let mut m = fourier_integral(traj, w);
            let pre = C64::new(0.0, -w);
            for row in m.iter_mut() {
                for x in row.iter_mut() {
                    *x *= pre;
                }
            }
            m
        })
        .collect()
}

/// `F_z(ω)/ω² = Σ_k |∫ e^{iωt} R_zk(t) dt|²`, finite at `ω = 0`.
fn fz_over_w2(traj: &ControlTrajectory, omega: f64) -> f64 {
    let mut acc = [C64::new(0.0, 0.0); 3];
    let n = traj.times.len();
    for i in 1..n {
        let (t0, t1) = (traj.times[i - 1], traj.times[i]);
        let h = 0.5 * (t1 - t0);
        let (e0, e1) = (C64::from_polar(1.0, omega * t0), C64::from_polar(1.0, omega * t1));
        for (k, a) in acc.iter_mut().enumerate() {
            *a += (e0 * traj.r[i - 1][2][k] + e1 * traj.r[i][2][k]) * h;
        }
    }
    acc.iter().map(|a| a.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCurve {
    /// Angular frequencies, rad/s.
    pub omegas: Vec<f64>,
    /// `F_z(ω)/ω²`, s².
    pub values: Vec<f64>,
}

/// Dephasing filter function `F_z(ω)/ω²` on a grid of angular frequencies.
pub fn filter_function(
    seq: &PulseSequence,
    rabi: f64,
    omegas: &[f64],
    max_phase_step: f64,
) -> Result<FilterCurve> {
    if omegas.iter().any(|w| !w.is_finite()) {
        return Err(GateError::InvalidArgument("non-finite frequency".into()));
    }
    let traj = control_matrix(seq, rabi, max_phase_step)?;
    let values = omegas.par_iter().map(|&w| fz_over_w2(&traj, w)).collect();
    Ok(FilterCurve {
        omegas: omegas.to_vec(),
        values,
    })
}

/// Log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (b / a).log10();
    let n = ((decades * points_per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|i| a * (b / a).powf(i as f64 / n as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FfSettings {
    /// Rabi frequency `Ω/2π`, Hz.
    pub f_rabi: f64,
    pub convention: FrequencyConvention,
    /// Initial frequency-grid density for the overlap integral.
    pub points_per_decade: usize,
    /// Initial time-sampling step (rotation angle, rad).
    pub phase_step: f64,
    /// Relative change under grid doubling accepted as converged.
    pub rel_tol: f64,
}

impl Default for FfSettings {
    fn default() -> Self {
        FfSettings {
            f_rabi: 4e6,
            convention: FrequencyConvention::Hertz,
            points_per_decade: 24,
            phase_step: DEFAULT_PHASE_STEP,
            rel_tol: 1e-4,
        }
    }
}

impl FfSettings {
    pub fn rabi(&self) -> f64 {
        TAU * self.f_rabi
    }
}

/// Composite Simpson rule in `ln f` for `∫_{a}^{b} g(f) df` with an even
/// number of intervals.
fn log_simpson(a: f64, b: f64, points_per_decade: usize, g: impl Fn(f64) -> f64 + Sync) -> f64 {
    let decades = (b / a).log10();
    let mut n = ((decades * points_per_decade as f64).ceil() as usize).max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let (la, lb) = (a.ln(), b.ln());
    let h = (lb - la) / n as f64;
    let sum: f64 = (0..=n)
        .into_par_iter()
        .map(|i| {
            let f = (la + h * i as f64).exp();
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * g(f) * f
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    sum * h / 3.0
}

/// Overlap integral at fixed discretization.
fn infidelity_at(
    traj: &ControlTrajectory,
    spectrum: &NoiseSpectrum,
    convention: FrequencyConvention,
    points_per_decade: usize,
) -> f64 {
    if spectrum.s0 == 0.0 {
        return 0.0;
    }
    let (lo, hi) = match convention {
        FrequencyConvention::Hertz => (spectrum.f_lo, spectrum.f_uv),
        FrequencyConvention::Angular => (TAU * spectrum.f_lo, TAU * spectrum.f_uv),
    };
    let kernel = |x: f64| -> f64 {
        match convention {
            FrequencyConvention::Hertz => spectrum.density(x) * fz_over_w2(traj, TAU * x),
            FrequencyConvention::Angular => spectrum.density(x) * fz_over_w2(traj, x),
        }
    };
    // below `lo_eff` the filter is frozen at its ω → 0 value
    let (lo_eff, tail) = if lo > 0.0 {
        (lo, 0.0)
    } else {
        let lo_eff = hi * 1e-9;
        let g0 = fz_over_w2(traj, 0.0);
        (lo_eff, spectrum.s0 * g0 * lo_eff.powf(1.0 - spectrum.alpha) / (1.0 - spectrum.alpha))
    };
    let integral = log_simpson(lo_eff, hi, points_per_decade, kernel) + tail;
    match convention {
        FrequencyConvention::Hertz => 0.5 * PI * PI * integral,
        FrequencyConvention::Angular => integral / TAU,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FfResult {
    pub fidelity: f64,
    pub infidelity: f64,
    pub points_per_decade: usize,
    pub phase_step: f64,
    /// Relative change of the infidelity at the last refinement.
    pub rel_change: f64,
}

/// First-order filter-function fidelity, refined by simultaneous doubling
/// of the time and frequency grids until the infidelity changes by less than
/// `settings.rel_tol` (relative).
pub fn ff_fidelity(
    seq: &PulseSequence,
    spectrum: &NoiseSpectrum,
    settings: &FfSettings,
) -> Result<FfResult> {
    const MAX_REFINEMENTS: usize = 6;
    spectrum.validate()?;
    if settings.points_per_decade == 0 {
        return Err(GateError::InvalidArgument("points_per_decade must be ≥ 1".into()));
    }
    let rabi = settings.rabi();
    let mut ppd = settings.points_per_decade;
    let mut step = settings.phase_step;
    let mut prev = infidelity_at(&control_matrix(seq, rabi, step)?, spectrum, settings.convention, ppd);
    for _ in 0..MAX_REFINEMENTS {
        ppd *= 2;
        step *= 0.5;
        let next = infidelity_at(&control_matrix(seq, rabi, step)?, spectrum, settings.convention, ppd);
        let scale = next.abs().max(prev.abs());
        let rel_change = if scale == 0.0 { 0.0 } else { (next - prev).abs() / scale };
        if rel_change < settings.rel_tol || scale < 1e-300 {
            return Ok(FfResult {
                fidelity: 1.0 - next,
                infidelity: next,
                points_per_decade: ppd,
                phase_step: step,
                rel_change,
            });
        }
        prev = next;
    }
    Err(GateError::AccuracyFailure(format!(
        "overlap integral not converged after {MAX_REFINEMENTS} grid doublings"
    )))
}

/// General first-order overlap `Σ_ijk ∫ S_ij(f) R_jk(f) R_ik*(f)/ω² df` in the
/// Hertz convention, for a noise cross-spectral density `spectrum(i, j, f)`
/// (Hz²/Hz) with `i, j` indexing x, y, z.
pub fn ff_infidelity_tensor(
    seq: &PulseSequence,
    f_rabi: f64,
    f_lo: f64,
    f_uv: f64,
    points_per_decade: usize,
    phase_step: f64,
    spectrum: impl Fn(usize, usize, f64) -> f64 + Sync,
) -> Result<f64> {
    if !(f_lo > 0.0 && f_lo < f_uv) {
        return Err(GateError::InvalidArgument(format!(
            "cutoffs must satisfy 0 < f_lo < f_uv (got {f_lo} and {f_uv})"
        )));
    }
    let traj = control_matrix(seq, TAU * f_rabi, phase_step)?;
    let kernel = |f: f64| -> f64 {
        let r = fourier_integral(&traj, TAU * f);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let s = spectrum(i, j, f);
                if s == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    acc += s * (r[j][k] * r[i][k].conj()).re;
                }
            }
        }
        acc
    };
    Ok(0.5 * PI * PI * log_simpson(f_lo, f_uv, points_per_decade, kernel))
}

/// The six benchmark rotations `X/2, X/4, Y/2, Y/4, Z/2, Z/4`.
pub fn standard_gates() -> [(&'static str, RotationSpec); 6] {
    let q = FRAC_PI_2 / 2.0;
    [
        ("X/2", RotationSpec { axis: [1.0, 0.0, 0.0], chi: FRAC_PI_2 }),
        ("X/4", RotationSpec { axis: [1.0, 0.0, 0.0], chi: q }),
        ("Y/2", RotationSpec { axis: [0.0, 1.0, 0.0], chi: FRAC_PI_2 }),
        ("Y/4", RotationSpec { axis: [0.0, 1.0, 0.0], chi: q }),
        ("Z/2", RotationSpec { axis: [0.0, 0.0, 1.0], chi: FRAC_PI_2 }),
        ("Z/4", RotationSpec { axis: [0.0, 0.0, 1.0], chi: q }),
    ]
}

/// Families compared in the filter-function table, in row order.
pub const TABLE_FAMILIES: [GateFamily; 3] = [
    GateFamily::NaiveDynamical,
    GateFamily::ConventionalGeometric,
    GateFamily::OptimizedGeometric,
];

/// Reference fidelities (rows naive, geometric, optimized; columns as in
/// [`standard_gates`]) used to calibrate the infrared cutoff.
pub const REFERENCE_FIDELITIES: [[f64; 6]; 3] = [
    [0.99615, 0.99887, 0.99615, 0.99887, 0.97693, 0.99775],
    [0.97779, 0.97153, 0.97759, 0.97153, 0.97374, 0.97041],
    [0.99934, 0.99996, 0.99934, 0.99999, 0.99550, 0.99883],
];

/// Sequence for one of the table rotations.
pub fn compile_rotation(spec: &RotationSpec, family: GateFamily) -> Result<PulseSequence> {
    compile_unitary(&su2_exp(spec.axis, spec.chi)?, family, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTable {
    pub schema_version: u32,
    pub gates: Vec<String>,
    pub families: Vec<GateFamily>,
    /// `fidelities[family][gate]`.
    pub fidelities: Vec<Vec<f64>>,
    pub spectrum: NoiseSpectrum,
    pub settings: FfSettings,
}

impl FidelityTable {
    /// Largest absolute deviation from a reference table, in percentage points.
    pub fn max_deviation_pp(&self, reference: &[[f64; 6]; 3]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, r) in self.fidelities.iter().zip(reference) {
            for (x, y) in row.iter().zip(r) {
                worst = worst.max(100.0 * (x - y).abs());
            }
        }
        worst
    }
}

/// Filter-function fidelities of the three compared families on the six
/// benchmark rotations.
pub fn fidelity_table(spectrum: &NoiseSpectrum, settings: &FfSettings) -> Result<FidelityTable> {
    let gates = standard_gates();
    let mut fidelities = Vec::new();
    for family in TABLE_FAMILIES {
        let row = gates
            .iter()
            .map(|(_, spec)| Ok(ff_fidelity(&compile_rotation(spec, family)?, spectrum, settings)?.fidelity))
            .collect::<Result<Vec<f64>>>()?;
        fidelities.push(row);
    }
    Ok(FidelityTable {
        schema_version: FF_SCHEMA_VERSION,
        gates: gates.iter().map(|(n, _)| n.to_string()).collect(),
        families: TABLE_FAMILIES.to_vec(),
        fidelities,
        spectrum: *spectrum,
        settings: *settings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub f_lo: f64,
    pub max_deviation_pp: f64,
    pub table: FidelityTable,
}

/// Fidelity tables for each candidate infrared cutoff, with the index of the
/// one closest (max-norm) to the reference table.
pub fn f_lo_sweep(
    base: &NoiseSpectrum,
    settings: &FfSettings,
    candidates: &[f64],
    reference: &[[f64; 6]; 3],
) -> Result<(Vec<SweepEntry>, usize)> {
    if candidates.is_empty() {
        return Err(GateError::InvalidArgument("no f_lo candidates".into()));
    }
    let mut entries = Vec::new();
    for &f_lo in candidates {
        let spectrum = NoiseSpectrum { f_lo, ..*base };
        let table = fidelity_table(&spectrum, settings)?;
        entries.push(SweepEntry {
            f_lo,
            max_deviation_pp: table.max_deviation_pp(reference),
            table,
        });
    }
    let best = entries
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.max_deviation_pp.total_cmp(&b.1.max_deviation_pp))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok((entries, best))
}

/// Filter curves of the three compared families for one rotation, sampled at
/// `f/f_Rabi` values.
pub fn filter_curves(
    spec: &RotationSpec,
    f_rabi: f64,
    f_over_frabi: &[f64],
    phase_step: f64,
) -> Result<Vec<FilterCurve>> {
    let omegas: Vec<f64> = f_over_frabi.iter().map(|x| TAU * x * f_rabi).collect();
    TABLE_FAMILIES
        .iter()
        .map(|&family| filter_function(&compile_rotation(spec, family)?, TAU * f_rabi, &omegas, phase_step))
        .collect()
}

/// CSV with columns `f_over_frabi, ff_naive, ff_geo, ff_opt` (values in s²).
pub fn curves_to_csv(f_over_frabi: &[f64], curves: &[FilterCurve]) -> String {
    let mut out = String::from("f_over_frabi,ff_naive,ff_geo,ff_opt\n");
    for (i, x) in f_over_frabi.iter().enumerate() {
        out.push_str(&format!("{x:.9e}"));
        for c in curves {
            out.push_str(&format!(",{:.9e}", c.values[i]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{propagate, x_rotation};
    use crate::pulses::{dynamical_rotation, GateParams};
    use crate::su2::{axis_angle_decompose, overlap};
    use approx::assert_abs_diff_eq;

    const RABI: f64 = TAU * 4e6;

    #[test]
    fn control_matrix_starts_at_identity_and_stays_orthogonal() {
        let seq = x_rotation(GateFamily::OptimizedGeometric, FRAC_PI_2, false).unwrap();
        let traj = control_matrix(&seq, RABI, 0.05).unwrap();
        assert_eq!(traj.r[0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(traj.orthogonality_defect() < 1e-8);
        for r in &traj.r {
            assert_abs_diff_eq!(det3(r), 1.0, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(traj.duration(), 3.0 * PI / RABI, epsilon = 1e-18);
    }

    #[test]
    fn final_control_matrix_is_gate_rotation() {
        let seq = dynamical_rotation(0.0, FRAC_PI_2);
        let traj = control_matrix(&seq, RABI, 0.01).unwrap();
        let u = propagate(&seq, &StaticError::none());
        let rot = axis_angle_decompose(&u).unwrap().rotation_matrix();
        let last = traj.r.last().unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert_abs_diff_eq!(last[j][k], rot[j][k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn control_matrix_argument_checks() {
        let seq = dynamical_rotation(0.0, 1.0);
        assert!(control_matrix(&seq, RABI, 0.2).is_err());
        assert!(control_matrix(&seq, -1.0, 0.01).is_err());
    }

    #[test]
    fn fourier_of_constant_matches_closed_form() {
        let t_end = 2e-6;
        let n = 20_001;
        let traj = ControlTrajectory {
            times: (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect(),
            r: vec![[[1.0; 3]; 3]; n],
            segment_starts: vec![0],
        };
        let w = TAU / t_end * 0.37;
        let got = fourier_control(&traj, &[w])[0][0][0];
        // -iω (e^{iωT} - 1)/(iω) = 1 - e^{iωT}
        let want = C64::new(1.0, 0.0) - C64::from_polar(1.0, w * t_end);
        assert!((got - want).norm() < 1e-6);
        let zero = fourier_control(&traj, &[0.0])[0][0][0];
        assert_eq!(zero, C64::new(0.0, 0.0));
    }

    #[test]
    fn fourier_vanishes_linearly_at_low_frequency() {
        let seq = x_rotation(GateFamily::ConventionalGeometric, FRAC_PI_2, false).unwrap();
        let traj = control_matrix(&seq, RABI, 0.01).unwrap();
        let row = |w: f64| -> f64 {
            fourier_control(&traj, &[w])[0][2].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
        };
        let (a, b) = (row(1e2), row(2e2));
        assert!(a > 0.0);
        assert_abs_diff_eq!(b / a, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn filter_nonnegative() {
        let seq = x_rotation(GateFamily::TwoPiCorrected, 1.0, false).unwrap();
        let omegas = log_grid(1e3, 1e9, 8);
        let c = filter_function(&seq, RABI, &omegas, 0.01).unwrap();
        assert!(c.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn quasi_static_limit_matches_propagator() {
        // a narrow band far below the Rabi frequency acts as a static
        // detuning of variance ∫S df; the Hertz convention must then agree
        // with the δ² coefficient of the trace fidelity
        let seq = x_rotation(GateFamily::ConventionalGeometric, FRAC_PI_2, false).unwrap();
        let spectrum = NoiseSpectrum { s0: 1e6, alpha: 0.0, f_lo: 1.0, f_uv: 2.0 };
        let settings = FfSettings::default();
        let r = ff_fidelity(&seq, &spectrum, &settings).unwrap();
        let var_hz2: f64 = 1e6;
        let sigma_delta = TAU * var_hz2.sqrt() / settings.rabi();
        let coeff = 2.0 * (PI / 8.0).cos().powi(4);
        assert_abs_diff_eq!(r.infidelity / (coeff * sigma_delta * sigma_delta), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn zero_amplitude_is_perfect() {
        let seq = x_rotation(GateFamily::NaiveDynamical, 1.0, false).unwrap();
        let spectrum = NoiseSpectrum { s0: 0.0, ..NoiseSpectrum::default() };
        assert_eq!(ff_fidelity(&seq, &spectrum, &FfSettings::default()).unwrap().fidelity, 1.0);
    }

    #[test]
    fn divergent_cutoff_rejected() {
        let seq = x_rotation(GateFamily::NaiveDynamical, 1.0, false).unwrap();
        let spectrum = NoiseSpectrum { f_lo: 0.0, ..NoiseSpectrum::default() };
        assert!(matches!(
            ff_fidelity(&seq, &spectrum, &FfSettings::default()),
            Err(GateError::InvalidArgument(_))
        ));
        let ok = NoiseSpectrum { f_lo: 0.0, alpha: 0.5, ..NoiseSpectrum::default() };
        assert!(ff_fidelity(&seq, &ok, &FfSettings::default()).is_ok());
    }

    #[test]
    fn tensor_sum_reduces_to_z_row() {
        let seq = x_rotation(GateFamily::OptimizedGeometric, FRAC_PI_2, false).unwrap();
        let spectrum = NoiseSpectrum::default();
        let settings = FfSettings { rel_tol: 1e-7, ..FfSettings::default() };
        let direct = ff_fidelity(&seq, &spectrum, &settings).unwrap();
        let tensor = ff_infidelity_tensor(
            &seq,
            settings.f_rabi,
            spectrum.f_lo,
            spectrum.f_uv,
            direct.points_per_decade,
            direct.phase_step,
            |i, j, f| if i == 2 && j == 2 { spectrum.density(f) } else { 0.0 },
        )
        .unwrap();
        assert_abs_diff_eq!(tensor / direct.infidelity, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn angular_convention_differs_by_known_factor_for_white_noise() {
        // with α = 0 both conventions integrate the same kernel; the ratio of
        // prefactors is (2π · 1/2π) / (π²/2)
        let seq = GateParams::new(1.0, 0.2, 0.4);
        let seq = crate::pulses::conventional_sequence(seq).unwrap();
        let spectrum = NoiseSpectrum { s0: 1e3, alpha: 0.0, f_lo: 1e2, f_uv: 1e5 };
        let h = ff_fidelity(&seq, &spectrum, &FfSettings::default()).unwrap().infidelity;
        let a = ff_fidelity(
            &seq,
            &spectrum,
            &FfSettings { convention: FrequencyConvention::Angular, ..FfSettings::default() },
        )
        .unwrap()
        .infidelity;
        assert_abs_diff_eq!(a / h, 2.0 / (PI * PI), epsilon = 1e-5);
    }

    #[test]
    fn compiled_rotations_are_correct() {
        for (_, spec) in standard_gates() {
            let target = su2_exp(spec.axis, spec.chi).unwrap();
            for family in TABLE_FAMILIES {
                let seq = compile_rotation(&spec, family).unwrap();
                assert!(overlap(&propagate(&seq, &StaticError::none()), &target) > 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn csv_header() {
        let xs = [0.01, 0.1];
        let curves = filter_curves(&standard_gates()[0].1, 4e6, &xs, 0.01).unwrap();
        let csv = curves_to_csv(&xs, &curves);
        assert!(csv.starts_with("f_over_frabi,ff_naive,ff_geo,ff_opt\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
