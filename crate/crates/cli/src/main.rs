use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use leastbias_cli::{family_listing, run, write_outputs, CliError, Command, RunConfig};

/// Runs one experiment described by a JSON config and writes report.json
/// plus CSV artifacts.
///
/// Log verbosity follows LEASTBIAS_LOG (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "leastbias", version)]
struct Args {
    /// JSON run config.
    #[arg(long, required_unless_present = "list_families")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Print the built-in metric, frame, wire and potential families.
    #[arg(long)]
    list_families: bool,
}

fn execute(args: &Args) -> Result<ExitCode, CliError> {
    let path = args.config.as_ref().expect("clap enforces --config");
    let text = std::fs::read_to_string(path)?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.output {
        cfg.output_dir = Some(o.clone());
    }
    let exec = run(&cfg)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("leastbias-output"));
    for p in write_outputs(&exec, &dir)? {
        log::info!("wrote {}", p.display());
    }
    if cfg.command == Command::Suite {
        let failures = exec.failures.clone();
        let timings = exec.report.criterion_timings.clone().unwrap_or_default();
        let rows = serde_json::from_value::<Vec<leastbias_cli::suite::CriterionResult>>(exec.report.results["criteria"].clone())
            .unwrap_or_default();
        let timings = serde_json::from_value::<Vec<leastbias_cli::suite::CriterionTiming>>(timings).unwrap_or_default();
        for (r, t) in rows.iter().zip(&timings) {
            let ok = r.passed && t.within_budget;
            println!("{} {} ({} ms / {} ms)", if ok { "PASS" } else { "FAIL" }, r.id, t.elapsed_ms, t.budget_ms);
        }
        if !failures.is_empty() {
            eprintln!("failed criteria: {}", failures.join(", "));
            return Ok(ExitCode::from(1));
        }
    } else {
        println!("{}", serde_json::to_string_pretty(&exec.report.results).expect("results serialize"));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LEASTBIAS_LOG", "warn")).init();
    let args = Args::parse();
    if args.list_families {
        print!("{}", family_listing());
        return ExitCode::SUCCESS;
    }
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
