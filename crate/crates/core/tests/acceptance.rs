//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use kfix::cli::snapshot::Snapshot;
use kfix::cli::{self, RunConfig, Scenario};
use kfix::collision::{conservation_defect, q_bilinear, q_quadratic, CollisionOperator};
use kfix::grid::{
    slice_l1_norm, DistributionField, SpatialGrid, SphereQuadrature, VelocityGrid,
};
use kfix::kernel::{hypothesis_integral, KernelSpec};
use kfix::mild_solver::{free_streaming_extension, solve, SolverConfig};
use kfix::profiles::{maxwellian, smooth_random_density};
use kfix::renorm::{renorm_f_map, renorm_residual, BetaFunction};
use kfix::uniqueness_lab::{bilinear_difference_identity_check, calibrate_kernel, f_map};

type Check = Result<String, String>;

fn kernels(dim: usize) -> [KernelSpec; 3] {
    [
        KernelSpec::hard_sphere(0.8, dim),
        KernelSpec::maxwell(1.3),
        KernelSpec::variable_hard_sphere(0.6, 0.5),
    ]
}

fn solver(dim: usize, n: usize, order: usize, x_nodes: usize, k: KernelSpec) -> SolverConfig {
    let sg = if x_nodes == 1 {
        SpatialGrid::homogeneous(dim).unwrap()
    } else {
        SpatialGrid::new(dim, 2.0, x_nodes).unwrap()
    };
    SolverConfig::new(
        0.3,
        2,
        10,
        1e-12,
        sg,
        VelocityGrid::new(dim, 2.0, n).unwrap(),
        SphereQuadrature::new(dim, order).unwrap(),
        k,
    )
    .unwrap()
}

fn field(cfg: &SolverConfig, seed: u64, lo: f64, hi: f64) -> DistributionField {
    let len = cfg.times().len() * cfg.space().len() * cfg.velocity().len();
    DistributionField::new(*cfg.velocity(), *cfg.space(), cfg.times(), common::noise(len, seed, lo, hi))
        .unwrap()
}

fn oracle_suite() -> Check {
    const TOL: f64 = 1e-10;
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut seed = 0u64;
    let mut track = |what: &str, err: f64| -> Result<(), String> {
        worst = worst.max(err);
        count += 1;
        if err > TOL {
            Err(format!("{what}: relative L1 error {err:.3e}"))
        } else {
            Ok(())
        }
    };
    for dim in [2, 3] {
        for n in [5, 7] {
            for order in [4, 5, 6] {
                let vg = VelocityGrid::new(dim, 2.0, n).unwrap();
                let sq = SphereQuadrature::new(dim, order).unwrap();
                let tag = format!("dim {dim}, n {n}, order {order}");
                for (j, k) in kernels(dim).into_iter().enumerate() {
                    seed += 1;
                    let f = common::noise(vg.len(), seed, 0.1, 1.0);
                    let g = common::noise(vg.len(), seed + 1000, -0.5, 0.5);
                    let fast = q_quadratic(&f, &k, &vg, &sq).unwrap();
                    track(&format!("q_quadratic {tag}"), common::rel_l1(&fast.total, &common::q_total(&f, &k, &vg, &sq)))?;
                    let fast = q_bilinear(&f, &g, &k, &vg, &sq).unwrap();
                    let (gain, loss) = common::bilinear(&f, &g, &k, &vg, &sq);
                    let total: Vec<f64> = gain.iter().zip(&loss).map(|(a, b)| a - b).collect();
                    track(&format!("q_bilinear {tag}"), common::rel_l1(&fast.total, &total))?;
                    let fast: Vec<f64> = (0..vg.len())
                        .map(|i| hypothesis_integral(&k, &g, &vg, &sq, &vg.node(i)))
                        .collect();
                    let slow: Vec<f64> = (0..vg.len())
                        .map(|i| common::hypothesis_integral(&k, &g, &vg, &sq, &vg.node(i)))
                        .collect();
                    track(&format!("hypothesis_integral {tag}"), common::rel_l1(&fast, &slow))?;

                    let x_nodes = match (j, dim, n) {
                        (0, _, _) => 1,
                        (_, 2, _) => 3,
                        (_, 3, 5) => 2,
                        _ => 1,
                    };
                    let cfg = solver(dim, n, order, x_nodes, k);
                    let f2 = field(&cfg, seed + 2000, 0.1, 1.0);
                    let gg = field(&cfg, seed + 3000, -0.3, 0.3);
                    let fast = f_map(&gg, &f2, &cfg).unwrap();
                    let slow = common::f_map(&gg, &f2, &k, &sq);
                    track(&format!("f_map {tag}, x {x_nodes}"), common::rel_l1(fast.values(), &slow))?;
                    let fast = renorm_f_map(&gg, &f2, &BetaFunction::log1p(), &cfg).unwrap();
                    let slow = common::renorm_f_map_log1p(&gg, &f2, &k, &sq);
                    track(&format!("renorm_f_map {tag}, x {x_nodes}"), common::rel_l1(fast.values(), &slow))?;
                }
            }
        }
    }
    Ok(format!("{count} comparisons, worst relative L1 error {worst:.2e} (limit 1e-10)"))
}

/// Collision operators at 9^3, 17^3 and 33^3 on [-4, 4]^3, order 4.
fn resolutions() -> Vec<(usize, VelocityGrid, CollisionOperator)> {
    let sq = SphereQuadrature::new(3, 4).unwrap();
    [9, 17, 33]
        .into_iter()
        .map(|n| {
            let vg = VelocityGrid::new(3, 4.0, n).unwrap();
            let op = CollisionOperator::new(&KernelSpec::hard_sphere(1.0, 3), &vg, &sq).unwrap();
            (n, vg, op)
        })
        .collect()
}

fn shrink_line(name: &str, values: &[f64]) -> (bool, String) {
    let factors: Vec<f64> = values.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = factors.iter().all(|f| *f >= 2.0);
    let text = format!(
        "{name} {} (factors {})",
        values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" -> "),
        factors.iter().map(|f| format!("{f:.2}")).collect::<Vec<_>>().join(", ")
    );
    (ok, text)
}

fn conservation_defects() -> Check {
    let start = Instant::now();
    let mut mass = Vec::new();
    let mut momentum = Vec::new();
    let mut energy = Vec::new();
    for (_, vg, op) in resolutions() {
        // the same smooth random field sampled on each grid
        let f = smooth_random_density(&vg, &mut ChaCha8Rng::seed_from_u64(1), 0.5);
        let d = conservation_defect(&op.quadratic(&f).unwrap(), &vg);
        mass.push(d.mass.abs());
        momentum.push(d.momentum.iter().map(|m| m * m).sum::<f64>().sqrt());
        energy.push(d.energy.abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let parts = [
        shrink_line("mass", &mass),
        shrink_line("momentum", &momentum),
        shrink_line("energy", &energy),
    ];
    let text = format!(
        "{}; {elapsed:.0} s",
        parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>().join("; ")
    );
    if parts.iter().all(|p| p.0) && elapsed < 600.0 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn maxwellian_annihilation() -> Check {
    let sg = SpatialGrid::homogeneous(3).unwrap();
    let ratios: Vec<f64> = resolutions()
        .into_iter()
        .map(|(_, vg, op)| {
            let m = maxwellian(&vg, 1.0, 1.0, [0.0; 3]);
            let q = op.quadratic(&m).unwrap();
            slice_l1_norm(&q.total, &sg, &vg) / slice_l1_norm(&m, &sg, &vg)
        })
        .collect();
    let (ok, text) = shrink_line("||Q(M,M)||/||M||", &ratios);
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn identity_instances() -> Check {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let dim = 2 + (i % 2) as usize;
        let n = if i % 3 == 0 { 7 } else { 5 };
        let x_nodes = [1, 2, 3][(i / 2 % 3) as usize];
        let order = 4 + (i % 3) as usize;
        let k = kernels(dim)[(i / 6 % 3) as usize];
        let cfg = solver(dim, n, order, x_nodes, k);
        let f2 = field(&cfg, 10_000 + i, 0.0, 1.0);
        let g1 = field(&cfg, 20_000 + i, -0.5, 0.5);
        let g2 = field(&cfg, 30_000 + i, -0.5, 0.5);
        let chk = bilinear_difference_identity_check(&g1, &g2, &f2, &cfg).unwrap();
        worst = worst.max(chk.relative());
        if chk.relative() > 1e-11 {
            return Err(format!("instance {i}: scaled discrepancy {:.3e}", chk.relative()));
        }
    }
    Ok(format!("100 instances, worst scaled discrepancy {worst:.2e} (limit 1e-11)"))
}

fn bundled(name: &str, out: &Path) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    cli::load_config(&path, None, Some(out.to_path_buf()), None).unwrap()
}

fn contraction(report: &Value) -> Check {
    let c = &report["details"]["contraction"];
    let l = c["certification"]["l_estimate"].as_f64().unwrap();
    let pairs = c["pairs_tested"].as_u64().unwrap();
    let max = c["max_ratio"].as_f64().unwrap();
    let text = format!("certified L {l:.4}, {pairs} pairs, max empirical ratio {max:.4} (limit 0.65)");
    if l <= 0.5 && pairs >= 20 && max <= 0.65 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn uniqueness(report: &Value) -> Check {
    let u = &report["details"]["uniqueness"];
    let runs = u["runs"].as_array().unwrap();
    let finals: Vec<f64> = runs
        .iter()
        .map(|r| r["residuals"].as_array().unwrap().last().unwrap().as_f64().unwrap())
        .collect();
    let converged = runs.iter().all(|r| r["converged"] == true);
    let dist = u["max_distance"].as_f64().unwrap();
    let text = format!(
        "{} runs, final residuals [{}], max pairwise distance {dist:.2e} (limit 1e-9)",
        runs.len(),
        finals.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join(", ")
    );
    if runs.len() >= 3 && converged && finals.iter().all(|r| *r <= 1e-10) && dist <= 1e-9 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn picard_decay(reports: &[&Value]) -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    for r in reports {
        let iterations: Vec<&Value> = match &r["details"]["iterations"] {
            Value::Null => r["details"]["uniqueness"]["runs"].as_array().unwrap().iter().collect(),
            it => vec![it],
        };
        for it in iterations {
            // ratio k holds residual_{k+2} / residual_{k+1}
            for q in it["contraction_ratios"].as_array().unwrap().iter().skip(1) {
                worst = worst.max(q.as_f64().unwrap());
                count += 1;
            }
        }
    }
    let text = format!("{count} ratios for k >= 2, worst {worst:.4} (limit 0.65)");
    if count > 0 && worst <= 0.65 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn renormalized_residual() -> Check {
    let config = |n: usize, steps: usize, kernel: KernelSpec| {
        SolverConfig::new(
            0.5,
            steps,
            100,
            1e-13,
            SpatialGrid::homogeneous(2).unwrap(),
            VelocityGrid::new(2, 4.0, n).unwrap(),
            SphereQuadrature::new(2, 16).unwrap(),
            kernel,
        )
        .unwrap()
    };
    let coarse = config(9, 4, KernelSpec::hard_sphere(1.0, 2));
    let f0 = maxwellian(coarse.velocity(), 0.3, 1.0, [0.4, -0.1, 0.0]);
    let ext = free_streaming_extension(&f0, &coarse).unwrap();
    let kernel = *calibrate_kernel(&coarse, &ext, &[], 0.45).unwrap().0.kernel();
    let mut residuals = Vec::new();
    for (n, steps) in [(9, 4), (17, 8), (33, 16)] {
        let cfg = config(n, steps, kernel);
        let f0 = maxwellian(cfg.velocity(), 0.3, 1.0, [0.4, -0.1, 0.0]);
        let (f, rep) = solve(&f0, &cfg).unwrap();
        if !rep.converged {
            return Err(format!("no convergence at n = {n}"));
        }
        residuals.push(renorm_residual(&f, &BetaFunction::log1p(), &cfg).unwrap().residual_l1);
    }
    let (ok, text) = shrink_line("residual", &residuals);
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn renormalized_uniqueness(report: &Value) -> Check {
    let u = &report["details"]["uniqueness"];
    let q = u["conditions"]["q_integral"].as_f64().unwrap();
    let d = u["beta_distance"].as_f64().unwrap();
    let tol = 10.0 * report["config"]["residual_tol"].as_f64().unwrap();
    let text = format!("q_integral {q:.3e} (< 1), beta distance {d:.2e} (limit {tol:.0e})");
    if q < 1.0 && u["conditions"]["q_ok"] == true && d <= tol && u["outcome"] == "pass" {
        Ok(text)
    } else {
        Err(text)
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = r#"
scenario = "uniqueness"
seed = 9
[velocity]
dim = 2
v_extent = 3.0
nodes_per_axis = 9
[space]
x_nodes = 4
x_period = 2.0
[sphere]
sphere_order = 8
[solver]
residual_tol = 1e-11
[initial]
amplitude = 0.3
[experiment]
target_l = 0.45
runs = 2
[output]
snapshot_every = 1
"#;
    let cfg_path = dir.path().join("det.toml");
    std::fs::write(&cfg_path, cfg).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_kfix"))
            .env("KFIX_THREADS", threads)
            .arg("uniqueness")
            .arg("--config")
            .arg(&cfg_path)
            .arg("--output")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if status.code() != Some(0) {
            return Err(format!("run {k} exited with {status}"));
        }
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
            .collect();
        outputs.push(contents);
    }
    if outputs[0] != outputs[1] {
        return Err("artifacts differ between runs".into());
    }
    let n_files = outputs[0].len();
    let mut snapshots = 0;
    for (name, bytes) in &outputs[0] {
        if name.ends_with(".kfix") {
            let snap = Snapshot::from_bytes(bytes).map_err(|e| e.to_string())?;
            if &snap.to_bytes() != bytes {
                return Err(format!("{name} does not re-serialise identically"));
            }
            snapshots += 1;
        }
    }
    // arbitrary bit patterns, including NaN payloads, signed zero and subnormals
    let vg = VelocityGrid::new(2, 1.0, 5).unwrap();
    let sg = SpatialGrid::homogeneous(2).unwrap();
    let mut bits = common::noise(vg.len(), 77, 0.0, 1.0)
        .iter()
        .map(|x| f64::from_bits((x * u64::MAX as f64) as u64))
        .collect::<Vec<_>>();
    bits[0] = -0.0;
    bits[1] = f64::from_bits(1);
    bits[2] = f64::from_bits(0x7ff8_0000_dead_beef);
    bits[3] = f64::NEG_INFINITY;
    let snap = Snapshot { velocity: vg, space: sg, time_index: 1, time: 0.25, values: bits.clone() };
    let path = dir.path().join("bits.kfix");
    snap.write(&path).unwrap();
    let back = Snapshot::read(&path).unwrap();
    if !back.values.iter().zip(&bits).all(|(a, b)| a.to_bits() == b.to_bits()) {
        return Err("snapshot values changed bits".into());
    }
    Ok(format!(
        "{n_files} artifacts byte-identical across two runs (1 and 3 threads), {snapshots} snapshots plus a special-value slice round-trip bit-exactly"
    ))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, start: Instant, r: Check| {
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(text) => println!("PASS {id:>2} {name}: {text} [{secs:.1} s]"),
            Err(text) => {
                failures += 1;
                println!("FAIL {id:>2} {name}: {text} [{secs:.1} s]");
            }
        }
    };

    let t = Instant::now();
    report(1, "oracle equivalence", t, oracle_suite());
    let t = Instant::now();
    report(2, "conservation defects", t, conservation_defects());
    let t = Instant::now();
    report(3, "Maxwellian annihilation", t, maxwellian_annihilation());
    let t = Instant::now();
    report(4, "bilinear difference identity", t, identity_instances());

    let dir = tempfile::tempdir().expect("temporary directory");
    let t = Instant::now();
    let contraction_run = cli::run(&bundled("contraction.toml", &dir.path().join("contraction")));
    let contraction_report = contraction_run.map(|r| r.report).map_err(|e| e.to_string());
    report(5, "contraction", t, contraction_report.clone().and_then(|r| contraction(&r)));

    let t = Instant::now();
    let uniq = bundled("uniqueness.toml", &dir.path().join("uniqueness"));
    assert_eq!(uniq.scenario, Scenario::Uniqueness);
    let uniq_report = cli::run(&uniq).map(|r| r.report).map_err(|e| e.to_string());
    report(6, "uniqueness", t, uniq_report.clone().and_then(|r| uniqueness(&r)));

    let t = Instant::now();
    let solve_report = cli::run(&bundled("solve.toml", &dir.path().join("solve")))
        .map(|r| r.report)
        .map_err(|e| e.to_string());
    let decay = match (&solve_report, &uniq_report) {
        (Ok(a), Ok(b)) => picard_decay(&[a, b]),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    report(7, "Picard geometric decay", t, decay);

    let t = Instant::now();
    report(8, "renormalized residual", t, renormalized_residual());

    let t = Instant::now();
    let renorm = cli::run(&bundled("renorm.toml", &dir.path().join("renorm")))
        .map(|r| r.report)
        .map_err(|e| e.to_string());
    report(9, "renormalized uniqueness", t, renorm.and_then(|r| renormalized_uniqueness(&r)));

    let t = Instant::now();
    report(10, "determinism and formats", t, determinism());

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
