//! `geogate` command line: reproduces robustness scans, randomized
//! benchmarking, filter-function tables, master-equation runs and Bloch
//! trajectories as plot-ready CSV and JSON.
//!
//! Exit codes: 0 on success, 1 when a run or an internal validation fails,
//! 2 on usage or configuration errors.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use geogate::benchmarking::{fit_rb, run_interleaved_rb, run_standard_rb, RBSummary};
use geogate::checks::{run_checks, Builders, CheckReport};
use geogate::evolution::{propagate, propagate_sampled, robustness_scan, StaticError};
use geogate::filter::{
    compile_rotation, curves_to_csv, f_lo_sweep, ff_fidelity, fidelity_table, filter_curves, log_grid,
    standard_gates, FfSettings, REFERENCE_FIDELITIES, TABLE_FAMILIES,
};
use geogate::lindblad::{evolve_master, samples_to_csv, state_overlap, LindbladParams, MasterSample};
use geogate::pulses::GateFamily;
use geogate::su2::{C64, Ket};
use geogate::GateError;
use serde::Serialize;
use serde_json::json;

use config::{
    load, FfCmdConfig, GateSpec, LindbladCmdConfig, PathCmdConfig, RbCmdConfig, ScanConfig, SCHEMA_VERSION,
};
use output::{write_atomic, write_json};

/// Tolerance on the γ₁ = 0 endpoint against the unitary propagator.
const ORACLE_TOL: f64 = 1e-8;
/// Tolerance on endpoint fidelities under halving of the step.
const DT_HALVING_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "geogate", version, about = "Robust geometric single-qubit gate simulator")]
struct Cli {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the gate family (naive, geo, opt, twopi).
    #[arg(long, global = true)]
    family: Option<GateFamily>,
    /// Use the perfect-π variant of the optimized gate.
    #[arg(long, global = true)]
    perfect_pi: bool,
    /// Print the machine-readable summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fidelity against static error for all four gate variants.
    Scan,
    /// Standard or interleaved randomized benchmarking.
    Rb {
        /// Interleave this gate (X/2, X/4, Y/2, Y/4, Z/2, Z/4).
        #[arg(long)]
        interleaved: Option<String>,
        /// Interleaved fidelities of all benchmark gates for the three compared families.
        #[arg(long, conflicts_with = "interleaved")]
        table: bool,
    },
    /// Filter curves and the filter-function fidelity table.
    Ff {
        /// Re-evaluate every table entry on doubled grids and report the change.
        #[arg(long)]
        check_convergence: bool,
    },
    /// Fidelity tables over candidate infrared cutoffs.
    FfSweep,
    /// Master-equation evolution with amplitude damping and dephasing.
    Lindblad,
    /// Bloch-sphere trajectories of the dressed state.
    Path,
    /// Analytic-versus-numeric and geometric-condition self checks.
    Check,
}

/// Marks an error as a usage or configuration problem (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

/// Loads a config, tagging failures as usage errors.
fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    load(path).map_err(|e| Usage(format!("{e:#}")).into())
}

/// Successful run whose internal validations may still have failed.
struct Outcome {
    summary: serde_json::Value,
    lines: Vec<String>,
    ok: bool,
}

impl Outcome {
    fn ok(summary: serde_json::Value, lines: Vec<String>) -> Self {
        Outcome { summary, lines, ok: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
            } else {
                for line in &outcome.lines {
                    println!("{line}");
                }
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<GateError>(), Some(GateError::InvalidArgument(_)));
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Scan => cmd_scan(cli, load_config(cfg)?),
        Command::Rb { interleaved, table } => {
            let mut c: RbCmdConfig = load_config(cfg)?;
            if let Some(g) = interleaved {
                c.interleave = Some(GateSpec::Named(g.clone()));
            }
            c.table |= *table;
            cmd_rb(cli, c)
        }
        Command::Ff { check_convergence } => {
            let mut c: FfCmdConfig = load_config(cfg)?;
            c.convergence_report |= *check_convergence;
            cmd_ff(cli, c)
        }
        Command::FfSweep => cmd_ff_sweep(cli, load_config(cfg)?),
        Command::Lindblad => cmd_lindblad(cli, load_config(cfg)?),
        Command::Path => cmd_path(cli, load_config(cfg)?),
        Command::Check => cmd_check(cli),
    }
}

fn written(path: &Path) -> String {
    format!("wrote {}", path.display())
}

fn cmd_scan(cli: &Cli, c: ScanConfig) -> Result<Outcome> {
    let grid = c.grid();
    if grid.is_empty() {
        return usage("scan grid is empty");
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return usage("scan grid contains non-finite values");
    }
    let rotation = c.gate.resolve().map_err(|e| Usage(e.to_string()))?;
    let rows = robustness_scan(&rotation, c.error_kind, &grid)?;
    let mut csv = String::from("error,fidelity_naive,fidelity_geo,fidelity_opt,fidelity_opt_perfect\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:.9e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
            r.error, r.fidelity_naive, r.fidelity_geo, r.fidelity_opt, r.fidelity_opt_perfect
        ));
    }
    let path = write_atomic(&cli.out, "scan.csv", csv.as_bytes())?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "scan",
        "gate": c.gate.label(),
        "error_kind": c.error_kind,
        "points": rows.len(),
        "csv": path,
    });
    write_json(&cli.out, "scan_summary.json", &summary)?;
    Ok(Outcome::ok(summary, vec![written(&path)]))
}

#[derive(Serialize)]
struct RbTable {
    schema_version: u32,
    gates: Vec<String>,
    families: Vec<GateFamily>,
    /// Standard-RB average fidelity per family.
    standard_fidelities: Vec<f64>,
    /// `interleaved_fidelities[family][gate]`.
    interleaved_fidelities: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    sequences_per_length: usize,
    seed: u64,
    sigma_delta: f64,
}

fn cmd_rb(cli: &Cli, mut c: RbCmdConfig) -> Result<Outcome> {
    if let Some(s) = cli.seed {
        c.rb.rng_seed = s;
    }
    if let Some(f) = cli.family {
        c.rb.family = f;
    }
    c.rb.perfect_pi |= cli.perfect_pi;
    c.rb.to_rb(None).validate().map_err(|e| Usage(e.to_string()))?;

    if c.table {
        let gates = standard_gates();
        let mut standard = Vec::new();
        let mut interleaved = Vec::new();
        for family in TABLE_FAMILIES {
            let fields = config::RBConfigFields { family, ..c.rb.clone() };
            let mut row = Vec::new();
            let mut f_std = None;
            for (_, spec) in &gates {
                let res = run_interleaved_rb(&fields.to_rb(Some(*spec)))?;
                f_std.get_or_insert(res.standard_fit.fidelity);
                row.push(res.fidelity);
            }
            standard.push(f_std.unwrap_or(f64::NAN));
            interleaved.push(row);
        }
        let table = RbTable {
            schema_version: SCHEMA_VERSION,
            gates: gates.iter().map(|(n, _)| n.to_string()).collect(),
            families: TABLE_FAMILIES.to_vec(),
            standard_fidelities: standard,
            interleaved_fidelities: interleaved,
            sequences_per_length: c.rb.sequences_per_length,
            seed: c.rb.rng_seed,
            sigma_delta: c.rb.sigma_delta,
        };
        let path = write_json(&cli.out, "rb_table.json", &table)?;
        let mut lines = vec![written(&path)];
        for (i, f) in table.families.iter().enumerate() {
            let cells: Vec<String> =
                table.interleaved_fidelities[i].iter().map(|x| format!("{:.4}", 100.0 * x)).collect();
            lines.push(format!(
                "{:<6} standard {:.4}%  interleaved {}",
                f.short_name(),
                100.0 * table.standard_fidelities[i],
                cells.join(" ")
            ));
        }
        return Ok(Outcome::ok(serde_json::to_value(&table)?, lines));
    }

    let fam = c.rb.family.short_name();
    match &c.interleave {
        Some(gate) => {
            let spec = gate.resolve().map_err(|e| Usage(e.to_string()))?;
            let rb = c.rb.to_rb(Some(spec));
            let res = run_interleaved_rb(&rb)?;
            let tag = gate.file_tag();
            let p1 = write_atomic(&cli.out, &format!("rb_{fam}_{tag}_standard.csv"), res.standard.to_csv().as_bytes())?;
            let p2 =
                write_atomic(&cli.out, &format!("rb_{fam}_{tag}_interleaved.csv"), res.interleaved.to_csv().as_bytes())?;
            let mut summary = RBSummary::new(&rb, &res.standard_fit);
            summary.interleaved_fidelity = Some(res.fidelity);
            let p3 = write_json(&cli.out, &format!("rb_{fam}_{tag}_summary.json"), &summary)?;
            Ok(Outcome::ok(
                serde_json::to_value(&summary)?,
                vec![
                    written(&p1),
                    written(&p2),
                    written(&p3),
                    format!("F = {:.4}%  F_{} = {:.4}%", 100.0 * summary.fidelity, gate.label(), 100.0 * res.fidelity),
                ],
            ))
        }
        None => {
            let rb = c.rb.to_rb(None);
            let curve = run_standard_rb(&rb)?;
            let fit = fit_rb(&curve)?;
            let summary = RBSummary::new(&rb, &fit);
            let p1 = write_atomic(&cli.out, &format!("rb_{fam}.csv"), curve.to_csv().as_bytes())?;
            let p2 = write_json(&cli.out, &format!("rb_{fam}_summary.json"), &summary)?;
            Ok(Outcome::ok(
                serde_json::to_value(&summary)?,
                vec![written(&p1), written(&p2), format!("F = {:.4}%  d = {:.4e}", 100.0 * fit.fidelity, fit.d)],
            ))
        }
    }
}

fn cmd_ff(cli: &Cli, c: FfCmdConfig) -> Result<Outcome> {
    c.spectrum.validate().map_err(|e| Usage(e.to_string()))?;
    if !(c.curve_min > 0.0 && c.curve_max > c.curve_min) || c.curve_points_per_decade == 0 {
        return usage("curve grid needs 0 < curve_min < curve_max and points_per_decade ≥ 1");
    }
    let mut lines = Vec::new();
    let xs = log_grid(c.curve_min, c.curve_max, c.curve_points_per_decade);
    for (name, spec) in standard_gates() {
        let curves = filter_curves(&spec, c.settings.f_rabi, &xs, c.curve_phase_step)?;
        let tag = GateSpec::Named(name.into()).file_tag();
        let p = write_atomic(&cli.out, &format!("ff_curves_{tag}.csv"), curves_to_csv(&xs, &curves).as_bytes())?;
        lines.push(written(&p));
    }
    let table = fidelity_table(&c.spectrum, &c.settings)?;
    let p = write_json(&cli.out, "ff_table.json", &table)?;
    lines.push(written(&p));
    for (fam, row) in table.families.iter().zip(&table.fidelities) {
        let cells: Vec<String> = row.iter().map(|x| format!("{:.6}", 100.0 * x)).collect();
        lines.push(format!("{:<6} {}", fam.short_name(), cells.join(" ")));
    }
    let mut summary = serde_json::to_value(&table)?;
    let mut ok = true;
    if c.convergence_report {
        let doubled = FfSettings {
            points_per_decade: 2 * c.settings.points_per_decade,
            phase_step: 0.5 * c.settings.phase_step,
            ..c.settings
        };
        let mut entries = Vec::new();
        let mut worst: f64 = 0.0;
        for family in TABLE_FAMILIES {
            for (name, spec) in standard_gates() {
                let seq = compile_rotation(&spec, family)?;
                let base = ff_fidelity(&seq, &c.spectrum, &c.settings)?;
                let fine = ff_fidelity(&seq, &c.spectrum, &doubled)?;
                let scale = base.infidelity.abs().max(fine.infidelity.abs());
                let rel = if scale == 0.0 { 0.0 } else { (fine.infidelity - base.infidelity).abs() / scale };
                worst = worst.max(rel);
                entries.push(json!({
                    "family": family,
                    "gate": name,
                    "infidelity": base.infidelity,
                    "infidelity_doubled": fine.infidelity,
                    "rel_change": rel,
                }));
            }
        }
        // Two independent converged estimates agree to a few refinement tolerances.
        let tol = 10.0 * c.settings.rel_tol;
        ok = worst <= tol;
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "entries": entries,
            "max_rel_change": worst,
            "tolerance": tol,
            "converged": ok,
        });
        let p = write_json(&cli.out, "ff_convergence.json", &report)?;
        lines.push(written(&p));
        lines.push(format!(
            "convergence: max relative change {worst:.2e} (tolerance {tol:.1e}) {}",
            if ok { "ok" } else { "FAILED" }
        ));
        summary["convergence"] = report;
    }
    Ok(Outcome { summary, lines, ok })
}

fn cmd_ff_sweep(cli: &Cli, c: FfCmdConfig) -> Result<Outcome> {
    c.spectrum.validate().map_err(|e| Usage(e.to_string()))?;
    let (entries, best) = f_lo_sweep(&c.spectrum, &c.settings, &c.f_lo_candidates, &REFERENCE_FIDELITIES)
        .map_err(|e| match e {
            GateError::InvalidArgument(m) => anyhow::Error::new(Usage(m)),
            other => other.into(),
        })?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "reference": REFERENCE_FIDELITIES,
        "entries": entries,
        "best_f_lo": entries[best].f_lo,
        "best_max_deviation_pp": entries[best].max_deviation_pp,
    });
    let p = write_json(&cli.out, "ff_sweep.json", &report)?;
    let mut lines = vec![written(&p)];
    for e in &entries {
        lines.push(format!("f_lo = {:>8} Hz  max deviation {:.4} pp", e.f_lo, e.max_deviation_pp));
    }
    lines.push(format!("best f_lo = {} Hz", entries[best].f_lo));
    Ok(Outcome::ok(report, lines))
}

fn ground() -> Ket {
    [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
}

fn cmd_lindblad(cli: &Cli, mut c: LindbladCmdConfig) -> Result<Outcome> {
    if let Some(f) = cli.family {
        c.family = f;
    }
    c.perfect_pi |= cli.perfect_pi;
    if c.gamma1_values.is_empty() {
        return usage("gamma1_values is empty");
    }
    let spec = c.gate.resolve().map_err(|e| Usage(e.to_string()))?;
    let seq = spec.sequence(c.family, c.perfect_pi)?;
    let err = StaticError::new(c.epsilon, c.delta)?;

    let run = |gamma1: f64, dt: f64| -> Result<Vec<MasterSample>> {
        Ok(evolve_master(&seq, &err, &LindbladParams::new(gamma1, c.gamma_phi)?, dt)?)
    };
    let endpoint = |s: &[MasterSample]| s.last().map(|x| x.fidelity).unwrap_or(f64::NAN);

    // Unitary oracle for the closed-system endpoint.
    let ideal = propagate(&seq, &StaticError::none()).apply(&ground());
    let actual = propagate(&seq, &err).apply(&ground());
    let oracle = state_overlap(&ideal, &actual);
    let base = endpoint(&run(0.0, c.dt)?);
    let oracle_defect = (base - oracle).abs();

    let mut lines = Vec::new();
    let mut runs = Vec::new();
    let mut worst_trace: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    let mut worst_halving: f64 = 0.0;
    for &g in &c.gamma1_values {
        let samples = run(g, c.dt)?;
        for s in &samples {
            worst_trace = worst_trace.max((s.rho.trace() - 1.0).abs());
            worst_eig = worst_eig.min(s.rho.eigenvalues()[0]);
        }
        let f = endpoint(&samples);
        let halved = endpoint(&run(g, 0.5 * c.dt)?);
        worst_halving = worst_halving.max((f - halved).abs());
        let p = write_atomic(&cli.out, &format!("lindblad_gamma1_{g:e}.csv"), samples_to_csv(&samples).as_bytes())?;
        lines.push(written(&p));
        lines.push(format!("gamma1 = {g:e}: F = {f:.9}  added infidelity {:.3e}", base - f));
        runs.push(json!({
            "gamma1": g,
            "final_fidelity": f,
            "added_infidelity": base - f,
            "csv": p,
        }));
    }
    let ok = oracle_defect <= ORACLE_TOL && worst_halving <= DT_HALVING_TOL;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "gate": c.gate.label(),
        "family": c.family,
        "perfect_pi": c.perfect_pi,
        "delta": c.delta,
        "epsilon": c.epsilon,
        "gamma_phi": c.gamma_phi,
        "dt": c.dt,
        "runs": runs,
        "unitary_oracle_fidelity": oracle,
        "unitary_oracle_defect": oracle_defect,
        "dt_halving_max_change": worst_halving,
        "max_trace_deviation": worst_trace,
        "min_eigenvalue": worst_eig,
        "validations_passed": ok,
    });
    let p = write_json(&cli.out, "lindblad_summary.json", &summary)?;
    lines.push(written(&p));
    lines.push(format!(
        "oracle defect {oracle_defect:.2e} (tol {ORACLE_TOL:e}), dt-halving change {worst_halving:.2e} (tol {DT_HALVING_TOL:e})"
    ));
    Ok(Outcome { summary, lines, ok })
}

fn cmd_path(cli: &Cli, mut c: PathCmdConfig) -> Result<Outcome> {
    if let Some(f) = cli.family {
        c.families = vec![f];
    }
    c.perfect_pi |= cli.perfect_pi;
    if c.families.is_empty() || c.deltas.is_empty() {
        return usage("families and deltas must be nonempty");
    }
    let spec = c.gate.resolve().map_err(|e| Usage(e.to_string()))?;
    let mut lines = Vec::new();
    let mut paths = Vec::new();
    for &family in &c.families {
        let seq = spec.sequence(family, c.perfect_pi)?;
        for &delta in &c.deltas {
            let traj = propagate_sampled(&seq, &StaticError::off_resonance(delta)?, c.samples_per_segment)?;
            let mut csv = String::from("t,x,y,z\n");
            for (t, p) in traj.times.iter().zip(&traj.bloch_points) {
                csv.push_str(&format!("{t:.9e},{:.12e},{:.12e},{:.12e}\n", p[0], p[1], p[2]));
            }
            let name = format!("path_{}_delta{delta}.csv", family.short_name());
            let p = write_atomic(&cli.out, &name, csv.as_bytes())?;
            lines.push(format!("{}  endpoint gap {:.3e}", written(&p), traj.endpoint_gap()));
            paths.push(json!({
                "family": family,
                "delta": delta,
                "endpoint_gap": traj.endpoint_gap(),
                "csv": p,
            }));
        }
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "gate": c.gate.label(),
        "paths": paths,
    });
    let p = write_json(&cli.out, "path_summary.json", &summary)?;
    lines.push(written(&p));
    Ok(Outcome::ok(summary, lines))
}

fn cmd_check(cli: &Cli) -> Result<Outcome> {
    if cli.config.is_some() {
        bail!(Usage("check takes no configuration".into()));
    }
    let report: CheckReport = run_checks(&Builders::default()).context("running checks")?;
    let mut lines = vec![format!("{:<34} {:>6} {:>12} {:>12}  {}", "check", "result", "value", "tolerance", "detail")];
    for r in &report.checks {
        let status = match (r.passed, r.gating) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        lines.push(format!("{:<34} {:>6} {:>12.3e} {:>12.3e}  {}", r.name, status, r.value, r.tolerance, r.detail));
    }
    lines.push(if report.all_passed { "all gating checks passed".into() } else { "gating checks FAILED".into() });
    Ok(Outcome {
        ok: report.all_passed,
        summary: serde_json::to_value(&report)?,
        lines,
    })
}
