//! Self-consistency suite: zero-noise exactness, cyclic phases, parallel
//! transport, and second-order fidelity expansions against propagation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{
    analytic_fidelity, cyclic_phase_check, dynamical_phases, parallel_transport_residual,
    phase_distance, propagate, second_order_coefficient, two_pi_fitted_expansion, ErrorKind,
    StaticError,
};
use crate::pulses::{
    conventional_sequence, dynamical_rotation, optimized_sequence, rotation_to_gate_params,
    two_pi_sequence, GateFamily, GateParams, PulseSequence,
};
use crate::su2::overlap;

pub const CHECK_SCHEMA_VERSION: u32 = 1;

/// Rotation angles of the expansion checks.
pub const EXPANSION_ANGLES: [f64; 5] = [PI / 6.0, PI / 4.0, FRAC_PI_2, 0.75 * PI, PI];

/// Sequence constructors under test; replaceable to exercise failure paths.
#[derive(Clone, Copy)]
pub struct Builders {
    pub conventional: fn(GateParams) -> Result<PulseSequence>,
    pub optimized: fn(GateParams, bool) -> Result<PulseSequence>,
    pub two_pi: fn(GateParams) -> Result<PulseSequence>,
}

impl Default for Builders {
    fn default() -> Self {
        Builders {
            conventional: conventional_sequence,
            optimized: optimized_sequence,
            two_pi: two_pi_sequence,
        }
    }
}

impl Builders {
    pub fn build(&self, family: GateFamily, params: GateParams) -> Result<PulseSequence> {
        match family {
            GateFamily::ConventionalGeometric => (self.conventional)(params),
            GateFamily::OptimizedGeometric => (self.optimized)(params, false),
            GateFamily::TwoPiCorrected => (self.two_pi)(params),
            GateFamily::NaiveDynamical => Ok(dynamical_rotation(params.phi, params.rotation_angle())),
        }
    }

    fn x_rotation(&self, family: GateFamily, chi: f64) -> Result<PulseSequence> {
        match family {
            GateFamily::NaiveDynamical => Ok(dynamical_rotation(0.0, chi)),
            f => self.build(f, rotation_to_gate_params([1.0, 0.0, 0.0], chi)),
        }
    }

    fn x_fidelity(&self, family: GateFamily, kind: ErrorKind, chi: f64, m: f64) -> Result<f64> {
        let seq = self.x_rotation(family, chi)?;
        Ok(overlap(&seq.target(), &propagate(&seq, &kind.static_error(m)?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Whether a failure makes the suite fail.
    pub gating: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

fn result(name: &str, value: f64, tolerance: f64, gating: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: value <= tolerance,
        gating,
        value,
        tolerance,
        detail,
    }
}

/// Largest `1 - F` against the target over `count` random parameter triples.
pub fn construction_defect(builders: &Builders, family: GateFamily, count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_max = if family == GateFamily::TwoPiCorrected { FRAC_PI_2 } else { PI };
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let params = GateParams::new(
            rng.random_range(0.0..=theta_max),
            rng.random_range(0.0..TAU),
            rng.random_range(-PI..PI),
        );
        let seq = builders.build(family, params)?;
        let f = overlap(&seq.target(), &propagate(&seq, &StaticError::none()));
        worst = worst.max(1.0 - f);
    }
    Ok(worst)
}

/// `n` interior points of `(a, b)`.
pub fn interior_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64).collect()
}

/// The `n³` parameter grid over `θ ∈ (0, π)`, `φ ∈ (0, 2π)`, `γ ∈ (-π, π)`.
pub fn parameter_grid(n: usize) -> Vec<GateParams> {
    let mut out = Vec::with_capacity(n * n * n);
    for &t in &interior_grid(0.0, PI, n) {
        for &p in &interior_grid(0.0, TAU, n) {
            for &g in &interior_grid(-PI, PI, n) {
                out.push(GateParams::new(t, p, g));
            }
        }
    }
    out
}

/// Largest deviation of the dressed-state phases from `±γ` and largest
/// parallel-transport residual over a parameter grid.
pub fn geometric_condition_defects(
    builders: &Builders,
    family: GateFamily,
    grid: &[GateParams],
    resolution: usize,
) -> Result<(f64, f64)> {
    let (mut phase, mut transport): (f64, f64) = (0.0, 0.0);
    for &params in grid {
        let seq = builders.build(family, params)?;
        let c = cyclic_phase_check(&seq)?;
        phase = phase
            .max(phase_distance(c.phase_plus, params.gamma))
            .max(phase_distance(c.phase_minus, -params.gamma))
            .max(c.closure_defect);
        transport = transport.max(parallel_transport_residual(&seq, resolution)?);
    }
    Ok((phase, transport))
}

/// Largest `|F_numeric - F_expansion|` at magnitude `m` over the expansion
/// angles, and the smallest error-reduction ratio under halving of `m`.
pub fn expansion_defect(
    builders: &Builders,
    family: GateFamily,
    kind: ErrorKind,
    m: f64,
) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    for &chi in &EXPANSION_ANGLES {
        let e1 = (builders.x_fidelity(family, kind, chi, m)? - analytic_fidelity(family, kind, chi, m)?).abs();
        let e2 = (builders.x_fidelity(family, kind, chi, 0.5 * m)?
            - analytic_fidelity(family, kind, chi, 0.5 * m)?)
        .abs();
        worst = worst.max(e1);
        // below the rounding floor the ratio carries no information
        if e1 > 1e-13 {
            ratio = ratio.min(e1 / e2.max(1e-300));
        }
    }
    Ok((worst, ratio))
}

/// Largest `F_twoπ - min(F_other)` over x-rotations at the expansion angles
/// and off-resonance errors `|δ| ≤ 0.1`. Non-positive means the two-π gate is
/// never better.
pub fn two_pi_advantage(builders: &Builders) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for &chi in &EXPANSION_ANGLES {
        for i in 1..=20 {
            for sign in [-1.0, 1.0] {
                let d = sign * 0.005 * i as f64;
                let kind = ErrorKind::OffResonance;
                let two = builders.x_fidelity(GateFamily::TwoPiCorrected, kind, chi, d)?;
                let others = [
                    GateFamily::NaiveDynamical,
                    GateFamily::ConventionalGeometric,
                    GateFamily::OptimizedGeometric,
                ]
                .iter()
                .map(|&f| builders.x_fidelity(f, kind, chi, d))
                .collect::<Result<Vec<f64>>>()?;
                let best_other = others.iter().cloned().fold(f64::INFINITY, f64::min);
                worst = worst.max(two - best_other);
            }
        }
    }
    Ok(worst)
}

/// Runs the suite. Gating entries decide `all_passed`; informational entries
/// record properties that are reported but not required.
pub fn run_checks(builders: &Builders) -> Result<CheckReport> {
    let mut checks = Vec::new();
    for family in [
        GateFamily::ConventionalGeometric,
        GateFamily::OptimizedGeometric,
        GateFamily::TwoPiCorrected,
    ] {
        let d = construction_defect(builders, family, 200, 1)?;
        checks.push(result(
            &format!("zero_noise_target_{}", family.short_name()),
            d,
            1e-10,
            true,
            "max 1 - F over 200 random (θ, φ, γ)".into(),
        ));
    }

    let grid = parameter_grid(10);
    for family in [GateFamily::ConventionalGeometric, GateFamily::OptimizedGeometric] {
        let (phase, transport) = geometric_condition_defects(builders, family, &grid, 8)?;
        checks.push(result(
            &format!("cyclic_phases_{}", family.short_name()),
            phase,
            1e-9,
            true,
            "max |phase ∓ γ| of the dressed states on a 10×10×10 grid".into(),
        ));
        let gating = family == GateFamily::ConventionalGeometric;
        checks.push(result(
            &format!("parallel_transport_{}", family.short_name()),
            transport,
            1e-9,
            gating,
            if gating {
                "max |⟨ψ±|U†H U|ψ±⟩| along the path".into()
            } else {
                "informational: the dressed states lie on the refocusing π-pulse axis, so the \
                 pointwise residual is Ω/2 there"
                    .into()
            },
        ));
    }
    let seq = builders.build(GateFamily::OptimizedGeometric, GateParams::new(1.0, 0.5, 0.7))?;
    let (p, m) = dynamical_phases(&seq);
    checks.push(result(
        "dynamical_phase_opt",
        p.abs().max(m.abs()),
        1e-9,
        false,
        format!("informational: integrated dynamical phases {p:.6} / {m:.6}"),
    ));

    let cases = [
        (GateFamily::NaiveDynamical, ErrorKind::OffResonance),
        (GateFamily::ConventionalGeometric, ErrorKind::OffResonance),
        (GateFamily::OptimizedGeometric, ErrorKind::OffResonance),
        (GateFamily::NaiveDynamical, ErrorKind::Amplitude),
        (GateFamily::ConventionalGeometric, ErrorKind::Amplitude),
    ];
    for (family, kind) in cases {
        let (defect, ratio) = expansion_defect(builders, family, kind, 1e-3)?;
        let tag = match kind {
            ErrorKind::OffResonance => "delta",
            ErrorKind::Amplitude => "epsilon",
        };
        checks.push(result(
            &format!("expansion_{}_{tag}", family.short_name()),
            defect,
            1e-8,
            true,
            "max |F_numeric - F_expansion| at 1e-3".into(),
        ));
        // an O(m³) remainder shrinks at least 8-fold per halving
        checks.push(result(
            &format!("remainder_order_{}_{tag}", family.short_name()),
            if ratio.is_finite() { 8.0 / ratio } else { 0.0 },
            1.0 + 1e-3,
            true,
            format!("min error reduction under halving: {ratio:.3}"),
        ));
    }

    let adv = two_pi_advantage(builders)?;
    checks.push(result(
        "two_pi_no_improvement",
        adv,
        1e-15,
        true,
        "max F_twopi - min F_other over x-rotations, |δ| ≤ 0.1".into(),
    ));
    let mut fit: f64 = 0.0;
    for &chi in &EXPANSION_ANGLES {
        let c = second_order_coefficient(GateFamily::TwoPiCorrected, ErrorKind::OffResonance, chi, false)?;
        fit = fit.max((c - (two_pi_fitted_expansion(chi, 1.0) - 1.0)).abs());
    }
    checks.push(result(
        "two_pi_coefficient_fit",
        fit,
        1e-6,
        false,
        "informational: numeric δ² coefficient vs cos²(χ/4)(cos(χ/2) - 2 sin(χ/2) - 3)".into(),
    ));

    let all_passed = checks.iter().all(|c| c.passed || !c.gating);
    Ok(CheckReport {
        schema_version: CHECK_SCHEMA_VERSION,
        checks,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = run_checks(&Builders::default()).unwrap();
        for c in &report.checks {
            assert!(c.passed || !c.gating, "{} = {:e}", c.name, c.value);
        }
        assert!(report.all_passed);
    }

    fn bad_optimized(params: GateParams, perfect_pi: bool) -> Result<PulseSequence> {
        let mut seq = optimized_sequence(params, perfect_pi)?;
        seq.segments[2].phase += 0.05;
        Ok(seq)
    }

    #[test]
    fn injected_phase_error_is_caught() {
        let builders = Builders {
            optimized: bad_optimized,
            ..Builders::default()
        };
        let report = run_checks(&builders).unwrap();
        assert!(!report.all_passed);
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed && c.gating)
            .map(|c| c.name.as_str())
            .collect();
        assert!(failing.contains(&"zero_noise_target_opt"));
    }

    #[test]
    fn grid_is_interior() {
        let g = parameter_grid(3);
        assert_eq!(g.len(), 27);
        assert!(g.iter().all(|p| p.theta > 0.0 && p.theta < PI));
    }
}
