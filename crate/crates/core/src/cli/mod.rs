//! Configuration-driven front end: builds the grids, kernel and initial data
//! from a [`RunConfig`], runs one scenario and writes its artifacts
//! (`report.json`, CSV series, snapshots) to the output directory.

pub mod config;
pub mod snapshot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{compute_moments, DistributionField, SpatialGrid, SphereQuadrature, VelocityGrid};
use crate::kernel::{certify_theorem1_hypotheses, check_bounds};
use crate::mild_solver::{free_streaming_extension, residual, solve, SolverConfig};
use crate::profiles::modulated_maxwellian;
use crate::renorm::{renorm_residual, renorm_uniqueness_experiment, verify_beta};
use crate::uniqueness_lab::{
    calibrate_kernel, empirical_contraction, random_pairs, uniqueness_experiment, Calibration,
    Outcome,
};

pub use config::{parse_config, ConfigError, RunConfig, Scenario};
use snapshot::Snapshot;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "KFIX_THREADS";

/// Exit code for configuration, I/O and other setup errors.
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub report: Value,
    pub files: Vec<PathBuf>,
}

/// Reads and validates a configuration file; command-line values override
/// the file.
pub fn load_config(
    path: &Path,
    scenario: Option<Scenario>,
    output: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text).map_err(Error::Config)?;
    if let Some(s) = scenario {
        cfg.scenario = s;
    }
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Solver configuration and initial slice described by `cfg`.
pub fn build(cfg: &RunConfig) -> Result<(SolverConfig, Vec<f64>)> {
    let vg = VelocityGrid::new(cfg.dim, cfg.v_extent, cfg.nodes_per_axis)?;
    let sg = if cfg.x_nodes == 1 {
        SpatialGrid::homogeneous(cfg.dim)?
    } else {
        SpatialGrid::new(cfg.dim, cfg.x_period, cfg.x_nodes)?
    };
    let sq = SphereQuadrature::new(cfg.dim, cfg.sphere_order)?;
    let solver = SolverConfig::new(
        cfg.horizon,
        cfg.time_steps,
        cfg.max_picard_iters,
        cfg.residual_tol,
        sg,
        vg,
        sq,
        cfg.kernel_spec(),
    )?;
    let f0 = modulated_maxwellian(&sg, &vg, cfg.amplitude, cfg.width, cfg.drift, cfg.modulation);
    Ok((solver, f0))
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    /// Moments CSV and snapshots of a solution.
    fn solution(&mut self, f: &DistributionField, every: usize) -> Result<()> {
        let mut csv = String::from("time,mass,momentum_x,momentum_y,momentum_z,energy\n");
        let space = f.spatial_grid();
        for (m, t) in f.times().iter().enumerate() {
            let (mut mass, mut mom, mut energy) = (0.0, [0.0; 3], 0.0);
            for ix in 0..space.len() {
                let mo = compute_moments(f.velocity_slice(m, ix), f.velocity_grid());
                mass += mo.mass;
                energy += mo.energy;
                for a in 0..3 {
                    mom[a] += mo.momentum[a];
                }
            }
            let w = space.cell_volume();
            let _ = writeln!(
                csv,
                "{t},{},{},{},{},{}",
                mass * w,
                mom[0] * w,
                mom[1] * w,
                mom[2] * w,
                energy * w
            );
        }
        self.write("moments.csv", csv.as_bytes())?;
        let last = f.time_count() - 1;
        for m in 0..f.time_count() {
            if m == last || (every > 0 && m % every == 0) {
                let snap = Snapshot::from_field(f, m)?;
                self.write(&format!("snapshot_{m:04}.kfix"), &snap.to_bytes())?;
            }
        }
        Ok(())
    }
}

fn calibrate(
    cfg: &RunConfig,
    solver: SolverConfig,
    f0: &[f64],
    g_list: &[DistributionField],
) -> Result<(SolverConfig, Option<Calibration>)> {
    match cfg.target_l {
        Some(target) => {
            let ext = free_streaming_extension(f0, &solver)?;
            let (s, c) = calibrate_kernel(&solver, &ext, g_list, target)?;
            Ok((s, Some(c)))
        }
        None => Ok((solver, None)),
    }
}

fn run_solve(cfg: &RunConfig, art: &mut Artifacts) -> Result<(Outcome, Value)> {
    let (solver, f0) = build(cfg)?;
    let (solver, calibration) = calibrate(cfg, solver, &f0, &[])?;
    let (sol, rep) = solve(&f0, &solver)?;
    let defect = residual(&sol, &f0, &solver)?;
    let cert = certify_theorem1_hypotheses(solver.kernel(), &sol, &[], solver.velocity(), solver.sphere())?;
    let mut csv = String::from("iteration,residual,min_value\n");
    for (k, (r, m)) in rep.residuals.iter().zip(&rep.min_values).enumerate() {
        let _ = writeln!(csv, "{},{r},{m}", k + 1);
    }
    art.write("residuals.csv", csv.as_bytes())?;
    art.solution(&sol, cfg.snapshot_every)?;
    let outcome = if rep.converged {
        Outcome::Pass
    } else {
        Outcome::Inconclusive
    };
    Ok((
        outcome,
        json!({
            "kernel": solver.kernel(),
            "calibration": calibration,
            "iterations": rep,
            "final_residual": defect,
            "certification": cert,
        }),
    ))
}

fn run_check_kernel(cfg: &RunConfig) -> Result<(Outcome, Value)> {
    let (solver, f0) = build(cfg)?;
    let (solver, calibration) = calibrate(cfg, solver, &f0, &[])?;
    let vg = solver.velocity();
    let lo = 0.5 * vg.spacing();
    let hi = 2.0 * vg.extent() * (vg.dim() as f64).sqrt();
    let speeds: Vec<f64> = (0..64)
        .map(|i| lo * (hi / lo).powf(i as f64 / 63.0))
        .collect();
    let bounds = check_bounds(solver.kernel(), solver.sphere(), &speeds)?;
    let ext = free_streaming_extension(&f0, &solver)?;
    let cert = certify_theorem1_hypotheses(solver.kernel(), &ext, &[], vg, solver.sphere())?;
    let outcome = if bounds.b2_satisfied && bounds.b3_satisfied && cert.satisfied {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok((
        outcome,
        json!({
            "kernel": solver.kernel(),
            "calibration": calibration,
            "bounds": bounds,
            "certification": cert,
        }),
    ))
}

fn run_contraction(cfg: &RunConfig, art: &mut Artifacts) -> Result<(Outcome, Value)> {
    let (solver, f0) = build(cfg)?;
    let pairs = random_pairs(&solver, cfg.pairs, cfg.perturbation_size, cfg.seed)?;
    let g_list: Vec<DistributionField> = pairs
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    let (solver, calibration) = calibrate(cfg, solver, &f0, &g_list)?;
    let ext = free_streaming_extension(&f0, &solver)?;
    let pre = certify_theorem1_hypotheses(solver.kernel(), &ext, &g_list, solver.velocity(), solver.sphere())?;
    // Outside the certified regime the solver need not converge; the
    // free-streaming trajectory then serves as the reference.
    let (f2, reference) = if pre.satisfied {
        let (sol, rep) = solve(&f0, &solver)?;
        if rep.converged {
            (sol, "solution")
        } else {
            (ext, "free_streaming")
        }
    } else {
        (ext, "free_streaming")
    };
    let report = empirical_contraction(&pairs, &f2, &solver)?;
    let mut csv = String::from("pair,ratio\n");
    for (k, r) in report.empirical_ratios.iter().enumerate() {
        let _ = writeln!(csv, "{k},{r}");
    }
    art.write("ratios.csv", csv.as_bytes())?;
    let outcome = if report.passed {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok((
        outcome,
        json!({
            "kernel": solver.kernel(),
            "calibration": calibration,
            "reference": reference,
            "contraction": report,
        }),
    ))
}

fn run_uniqueness(cfg: &RunConfig, art: &mut Artifacts) -> Result<(Outcome, Value)> {
    let (solver, f0) = build(cfg)?;
    let (solver, calibration) = calibrate(cfg, solver, &f0, &[])?;
    let (sols, report) = uniqueness_experiment(&f0, &solver, cfg.runs, cfg.seed)?;
    let mut csv = String::from("run,iteration,residual\n");
    for (k, run) in report.runs.iter().enumerate() {
        for (i, r) in run.residuals.iter().enumerate() {
            let _ = writeln!(csv, "{k},{},{r}", i + 1);
        }
    }
    art.write("residuals.csv", csv.as_bytes())?;
    art.solution(&sols[0], cfg.snapshot_every)?;
    Ok((
        report.outcome,
        json!({
            "kernel": solver.kernel(),
            "calibration": calibration,
            "uniqueness": report,
        }),
    ))
}

fn run_renorm(cfg: &RunConfig, art: &mut Artifacts) -> Result<(Outcome, Value)> {
    let (solver, f0) = build(cfg)?;
    let sweep = verify_beta(&cfg.beta);
    let (solver, calibration) = calibrate(cfg, solver, &f0, &[])?;
    let (sols, report) = renorm_uniqueness_experiment(&f0, &solver, &cfg.beta, cfg.seed)?;
    let strong = if cfg.time_steps >= 2 {
        Some(renorm_residual(&sols[0], &cfg.beta, &solver)?)
    } else {
        None
    };
    art.solution(&sols[0], cfg.snapshot_every)?;
    let outcome = if !(sweep.bound_ok && sweep.nondecreasing) {
        Outcome::Fail
    } else {
        report.outcome
    };
    Ok((
        outcome,
        json!({
            "kernel": solver.kernel(),
            "calibration": calibration,
            "beta_sweep": sweep,
            "renormalized_residual": strong,
            "uniqueness": report,
        }),
    ))
}

/// Runs the configured scenario and writes `report.json` plus the scenario's
/// CSV files and snapshots. A numerical blow-up is a property failure and is
/// recorded in the report; other errors are returned.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    let mut art = Artifacts::new(&cfg.output_dir)?;
    let result = match cfg.scenario {
        Scenario::Solve => run_solve(cfg, &mut art),
        Scenario::CheckKernel => run_check_kernel(cfg),
        Scenario::Contraction => run_contraction(cfg, &mut art),
        Scenario::Uniqueness => run_uniqueness(cfg, &mut art),
        Scenario::RenormCheck => run_renorm(cfg, &mut art),
    };
    let (outcome, details) = match result {
        Ok(r) => r,
        Err(Error::BlowUp { iteration, detail }) => (
            Outcome::Fail,
            json!({ "blow_up": { "iteration": iteration, "detail": detail } }),
        ),
        Err(e) => return Err(e),
    };
    let report = json!({
        "scenario": cfg.scenario,
        "outcome": outcome,
        "exit_code": outcome.exit_code(),
        "config": cfg,
        "details": details,
    });
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidArgument(format!("report serialisation failed: {e}")))?;
    text.push('\n');
    art.write("report.json", text.as_bytes())?;
    Ok(RunResult {
        outcome,
        report,
        files: art.files,
    })
}
