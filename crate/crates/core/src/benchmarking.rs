//! Standard and interleaved randomized benchmarking over the single-qubit
//! Clifford group under quasi-static Gaussian off-resonance noise.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::evolution::{propagate, RotationSpec, StaticError};
use crate::pulses::{compile_unitary, GateFamily, PulseSequence};
use crate::su2::{axis_angle_decompose, su2_exp, AxisAngle, Matrix2};

/// Schema version stamped on serialized benchmarking outputs.
pub const RB_SCHEMA_VERSION: u32 = 1;

const GROUP_ORDER: usize = 24;
const PHASE_EQ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliffordElement {
    pub index: usize,
    pub unitary: Matrix2,
    pub axis_angle: AxisAngle,
}

/// The 24 single-qubit Cliffords modulo phase.
///
/// Indexing is the breadth-first order of the closure from the identity,
/// applying `X/2` before `Z/2` on the left of each dequeued element.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    pub elements: Vec<CliffordElement>,
    /// `product[a][b]` is the index of `C_a · C_b`.
    product: Vec<[usize; GROUP_ORDER]>,
    inverse: [usize; GROUP_ORDER],
}

fn generators() -> Result<[Matrix2; 2]> {
    Ok([
        su2_exp([1.0, 0.0, 0.0], FRAC_PI_2)?,
        su2_exp([0.0, 0.0, 1.0], FRAC_PI_2)?,
    ])
}

fn find_up_to_phase(list: &[Matrix2], u: &Matrix2) -> Option<usize> {
    list.iter().position(|m| m.approx_eq_up_to_phase(u, PHASE_EQ_TOL))
}

/// Closure of `{X/2, Z/2}` deduplicated up to global phase.
pub fn clifford_group() -> Result<Vec<CliffordElement>> {
    let gens = generators()?;
    let mut found = vec![Matrix2::identity()];
    let mut head = 0;
    while head < found.len() {
        let g = found[head];
        head += 1;
        for h in &gens {
            let candidate = *h * g;
            if find_up_to_phase(&found, &candidate).is_none() {
                found.push(candidate);
                if found.len() > GROUP_ORDER {
                    break;
                }
            }
        }
    }
    if found.len() != GROUP_ORDER {
        return Err(GateError::InternalConsistency(format!(
            "Clifford closure produced {} elements instead of {GROUP_ORDER}",
            found.len()
        )));
    }
    found
        .into_iter()
        .enumerate()
        .map(|(index, unitary)| {
            Ok(CliffordElement {
                index,
                unitary,
                axis_angle: axis_angle_decompose(&unitary)?,
            })
        })
        .collect()
}

impl CliffordGroup {
    pub fn new() -> Result<Self> {
        let elements = clifford_group()?;
        let mats: Vec<Matrix2> = elements.iter().map(|e| e.unitary).collect();
        let mut product = vec![[0usize; GROUP_ORDER]; GROUP_ORDER];
        let mut inverse = [usize::MAX; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            for b in 0..GROUP_ORDER {
                let idx = find_up_to_phase(&mats, &(mats[a] * mats[b])).ok_or_else(|| {
                    GateError::InternalConsistency(format!("product C{a}·C{b} left the group"))
                })?;
                product[a][b] = idx;
                if idx == 0 {
                    inverse[a] = b;
                }
            }
        }
        if inverse.contains(&usize::MAX) {
            return Err(GateError::InternalConsistency("missing Clifford inverse".into()));
        }
        Ok(CliffordGroup {
            elements,
            product,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn multiply(&self, a: usize, b: usize) -> usize {
        self.product[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// Index of `u` up to global phase, if it is a Clifford.
    pub fn find(&self, u: &Matrix2) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.unitary.approx_eq_up_to_phase(u, PHASE_EQ_TOL))
    }
}

/// Pulse sequence for one Clifford in the given family.
pub fn compile_clifford(
    element: &CliffordElement,
    family: GateFamily,
    perfect_pi: bool,
) -> Result<PulseSequence> {
    compile_unitary(&element.unitary, family, perfect_pi)
}

/// Granularity of the quasi-static detuning draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDraw {
    /// One detuning per sequence realization.
    #[default]
    Sequence,
    /// A fresh detuning for every gate.
    Gate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RBConfig {
    pub lengths: Vec<usize>,
    pub sequences_per_length: usize,
    /// Standard deviation of `δ` in units of the Rabi rate.
    pub sigma_delta: f64,
    pub family: GateFamily,
    pub perfect_pi: bool,
    pub rng_seed: u64,
    pub interleaved_target: Option<RotationSpec>,
    pub draw_per: NoiseDraw,
}

impl Default for RBConfig {
    fn default() -> Self {
        RBConfig {
            lengths: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            sequences_per_length: 200,
            sigma_delta: 0.02,
            family: GateFamily::OptimizedGeometric,
            perfect_pi: false,
            rng_seed: 7,
            interleaved_target: None,
            draw_per: NoiseDraw::Sequence,
        }
    }
}

impl RBConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(GateError::InvalidArgument("RB lengths must be nonempty".into()));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GateError::InvalidArgument(
                "RB lengths must be strictly increasing".into(),
            ));
        }
        if self.sequences_per_length == 0 {
            return Err(GateError::InvalidArgument("sequences_per_length must be ≥ 1".into()));
        }
        if !(self.sigma_delta >= 0.0 && self.sigma_delta.is_finite()) {
            return Err(GateError::InvalidArgument(format!(
                "sigma_delta must be finite and ≥ 0, got {}",
                self.sigma_delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBCurve {
    pub lengths: Vec<usize>,
    pub mean_survival: Vec<f64>,
    /// Standard error of the mean over the `K` realizations.
    pub stderr: Vec<f64>,
}

impl RBCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean_survival,stderr\n");
        for i in 0..self.lengths.len() {
            out.push_str(&format!(
                "{},{:.15e},{:.15e}\n",
                self.lengths[i], self.mean_survival[i], self.stderr[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBFit {
    /// Error per gate.
    pub d: f64,
    /// `1 - d`.
    pub fidelity: f64,
    /// `e^{-d}`.
    pub p: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
}

fn model(d: f64, n: f64) -> f64 {
    0.5 * (1.0 + (-d * n).exp())
}

fn sum_sq(curve: &RBCurve, d: f64) -> f64 {
    curve
        .lengths
        .iter()
        .zip(&curve.mean_survival)
        .map(|(&n, &y)| (y - model(d, n as f64)).powi(2))
        .sum()
}

/// Least-squares fit of `(1 + e^{-dn})/2` in the single parameter `d ≥ 0`,
/// by damped Gauss-Newton iteration.
pub fn fit_rb(curve: &RBCurve) -> Result<RBFit> {
    const MAX_ITER: usize = 200;
    let m = curve.lengths.len();
    if m < 3 || curve.mean_survival.len() != m {
        return Err(GateError::InvalidArgument(format!(
            "fit needs at least 3 matching length/survival points, got {m}"
        )));
    }
    if curve.mean_survival.iter().any(|y| !y.is_finite()) {
        return Err(GateError::FitFailure {
            reason: "non-finite survival data".into(),
            iterations: 0,
            last_d: f64::NAN,
            residual: f64::NAN,
        });
    }
    // log-linear estimate from the points still above the asymptote
    let mut guesses: Vec<f64> = curve
        .lengths
        .iter()
        .zip(&curve.mean_survival)
        .filter(|(_, &y)| y > 0.5 && y < 1.0)
        .map(|(&n, &y)| -(2.0 * y - 1.0).ln() / n as f64)
        .collect();
    guesses.sort_by(f64::total_cmp);
    let mut d = guesses.get(guesses.len() / 2).copied().unwrap_or(0.0).max(0.0);
    let mut cost = sum_sq(curve, d);
    for it in 1..=MAX_ITER {
        let (mut g, mut h) = (0.0, 0.0);
        for (&n, &y) in curve.lengths.iter().zip(&curve.mean_survival) {
            let n = n as f64;
            let r = y - model(d, n);
            let jac = -0.5 * n * (-d * n).exp();
            g += jac * r;
            h += jac * jac;
        }
        if h == 0.0 || g == 0.0 {
            return Ok(finish(d, cost, it));
        }
        let step = g / h;
        // a boundary minimum at d = 0 with the gradient pointing outward
        if d == 0.0 && step > 0.0 {
            return Ok(finish(d, cost, it));
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-12 {
            let trial = (d - lambda * step).max(0.0);
            let c = sum_sq(curve, trial);
            if c <= cost {
                let moved = (trial - d).abs();
                d = trial;
                cost = c;
                accepted = true;
                if moved <= 1e-14 * d.max(1e-10) {
                    return Ok(finish(d, cost, it));
                }
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Ok(finish(d, cost, it));
        }
    }
    Err(GateError::FitFailure {
        reason: "Gauss-Newton did not converge".into(),
        iterations: MAX_ITER,
        last_d: d,
        residual: cost,
    })
}

fn finish(d: f64, residual: f64, iterations: usize) -> RBFit {
    RBFit {
        d,
        fidelity: 1.0 - d,
        p: (-d).exp(),
        residual,
        iterations,
    }
}

/// `F_in = 1 - (1 - p_in/p_st)/2`.
pub fn interleaved_fidelity(p_in: f64, p_st: f64) -> Result<f64> {
    if p_st == 0.0 || !p_st.is_finite() {
        return Err(GateError::UndefinedResult(format!(
            "standard depolarizing parameter is {p_st}"
        )));
    }
    Ok(1.0 - 0.5 * (1.0 - p_in / p_st))
}

/// Deterministic stream for realization `rep` at length index `li`.
fn realization_rng(seed: u64, li: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((li as u64) << 32) | rep as u64);
    rng
}

struct Compiled {
    group: CliffordGroup,
    sequences: Vec<PulseSequence>,
    interleaved: Option<(PulseSequence, Matrix2)>,
}

impl Compiled {
    fn new(config: &RBConfig) -> Result<Self> {
        let group = CliffordGroup::new()?;
        let sequences = group
            .elements
            .iter()
            .map(|e| compile_clifford(e, config.family, config.perfect_pi))
            .collect::<Result<Vec<_>>>()?;
        let interleaved = match &config.interleaved_target {
            None => None,
            Some(spec) => {
                let target = su2_exp(spec.axis, spec.chi)?;
                Some((compile_unitary(&target, config.family, config.perfect_pi)?, target))
            }
        };
        Ok(Compiled {
            group,
            sequences,
            interleaved,
        })
    }
}

/// Survival of one realization: `n` random Cliffords (each followed by the
/// interleaved gate when `interleave` is set) and the recovery gate.
fn realization(
    compiled: &Compiled,
    config: &RBConfig,
    n: usize,
    interleave: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let draw_error = |rng: &mut ChaCha8Rng| -> Result<StaticError> {
        let z: f64 = rng.sample(StandardNormal);
        StaticError::off_resonance(config.sigma_delta * z)
    };
    let shared = draw_error(rng)?;
    let per_sequence: Vec<Matrix2> = match config.draw_per {
        NoiseDraw::Sequence => compiled.sequences.iter().map(|s| propagate(s, &shared)).collect(),
        NoiseDraw::Gate => Vec::new(),
    };
    let interleaved_gate = if interleave {
        compiled.interleaved.as_ref()
    } else {
        None
    };
    let interleaved_noisy = interleaved_gate.map(|(s, _)| propagate(s, &shared));

    let mut noisy = Matrix2::identity();
    let mut ideal = Matrix2::identity();
    let mut ideal_idx = 0usize;
    let apply = |seq: &PulseSequence,
                     cached: Option<&Matrix2>,
                     noisy: &mut Matrix2,
                     rng: &mut ChaCha8Rng|
     -> Result<()> {
        let u = match (config.draw_per, cached) {
            (NoiseDraw::Sequence, Some(u)) => *u,
            _ => propagate(seq, &draw_error(rng)?),
        };
        *noisy = u * *noisy;
        Ok(())
    };
    for _ in 0..n {
        let c = rng.random_range(0..GROUP_ORDER);
        apply(&compiled.sequences[c], per_sequence.get(c), &mut noisy, rng)?;
        ideal = compiled.group.elements[c].unitary * ideal;
        ideal_idx = compiled.group.multiply(c, ideal_idx);
        if let Some((seq, target)) = interleaved_gate {
            apply(seq, interleaved_noisy.as_ref(), &mut noisy, rng)?;
            ideal = *target * ideal;
        }
    }
    if interleaved_gate.is_none() {
        let r = compiled.group.inverse(ideal_idx);
        apply(&compiled.sequences[r], per_sequence.get(r), &mut noisy, rng)?;
    } else {
        let recovery = ideal.adjoint();
        let seq = match compiled.group.find(&recovery) {
            Some(r) => compiled.sequences[r].clone(),
            None => compile_unitary(&recovery, config.family, config.perfect_pi)?,
        };
        let cached = match config.draw_per {
            NoiseDraw::Sequence => Some(propagate(&seq, &shared)),
            NoiseDraw::Gate => None,
        };
        apply(&seq, cached.as_ref(), &mut noisy, rng)?;
    }
    Ok(noisy.0[0][0].norm_sqr().min(1.0))
}

fn run_curve(compiled: &Compiled, config: &RBConfig, interleave: bool) -> Result<RBCurve> {
    let k = config.sequences_per_length;
    let mut mean_survival = Vec::with_capacity(config.lengths.len());
    let mut stderr = Vec::with_capacity(config.lengths.len());
    for (li, &n) in config.lengths.iter().enumerate() {
        let samples = (0..k)
            .into_par_iter()
            .map(|rep| {
                let mut rng = realization_rng(config.rng_seed, li, rep);
                realization(compiled, config, n, interleave, &mut rng)
            })
            .collect::<Result<Vec<f64>>>()?;
        // sequential reduction keeps the result independent of scheduling
        let mean = samples.iter().sum::<f64>() / k as f64;
        let var = if k > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        mean_survival.push(mean);
        stderr.push((var / k as f64).sqrt());
    }
    Ok(RBCurve {
        lengths: config.lengths.clone(),
        mean_survival,
        stderr,
    })
}

/// Standard RB curve. Realizations are independent work items with RNG
/// streams derived from `(seed, length index, repetition)`.
pub fn run_standard_rb(config: &RBConfig) -> Result<RBCurve> {
    config.validate()?;
    let compiled = Compiled::new(config)?;
    run_curve(&compiled, config, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavedResult {
    pub standard: RBCurve,
    pub interleaved: RBCurve,
    pub standard_fit: RBFit,
    pub interleaved_fit: RBFit,
    pub fidelity: f64,
}

/// Interleaved RB. The standard reference curve is computed alongside with
/// the same streams, so both curves share Clifford draws and detunings.
pub fn run_interleaved_rb(config: &RBConfig) -> Result<InterleavedResult> {
    config.validate()?;
    if config.interleaved_target.is_none() {
        return Err(GateError::InvalidArgument(
            "interleaved RB needs interleaved_target".into(),
        ));
    }
    let compiled = Compiled::new(config)?;
    let standard = run_curve(&compiled, config, false)?;
    let interleaved = run_curve(&compiled, config, true)?;
    let standard_fit = fit_rb(&standard)?;
    let interleaved_fit = fit_rb(&interleaved)?;
    let fidelity = interleaved_fidelity(interleaved_fit.p, standard_fit.p)?;
    Ok(InterleavedResult {
        standard,
        interleaved,
        standard_fit,
        interleaved_fit,
        fidelity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBSummary {
    pub schema_version: u32,
    pub family: GateFamily,
    pub d: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub p: f64,
    #[serde(rename = "K")]
    pub sequences_per_length: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interleaved_fidelity: Option<f64>,
}

impl RBSummary {
    pub fn new(config: &RBConfig, fit: &RBFit) -> Self {
        RBSummary {
            schema_version: RB_SCHEMA_VERSION,
            family: config.family,
            d: fit.d,
            fidelity: fit.fidelity,
            p: fit.p,
            sequences_per_length: config.sequences_per_length,
            seed: config.rng_seed,
            interleaved_fidelity: None,
        }
    }
}
