use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kfix::cli::{self, Scenario, EXIT_ERROR, THREADS_ENV};

#[derive(Parser)]
#[command(name = "kfix", version, about = "Mild-form Boltzmann solver and contraction diagnostics")]
struct Args {
    /// solve | check-kernel | contraction | uniqueness | renorm-check
    #[arg(value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV}={raw} is not a thread count"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    // usage errors share the configuration error code; 2 means inconclusive
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_ERROR as u8 } else { 0 };
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    let cfg = match cli::load_config(&args.config, Some(args.scenario), args.output, args.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    match cli::run(&cfg) {
        Ok(r) => {
            eprintln!(
                "{}: {:?}, report in {}",
                cfg.scenario.name(),
                r.outcome,
                cfg.output_dir.join("report.json").display()
            );
            ExitCode::from(r.outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
