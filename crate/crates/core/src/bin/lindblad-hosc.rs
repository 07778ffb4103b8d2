use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lindblad_hosc::cli::{error_exit_code, load_config, run};

/// Evolve a damped, driven harmonic oscillator and write CSV diagnostics.
#[derive(Debug, Parser)]
#[command(name = "lindblad-hosc", version)]
struct Args {
    /// Run configuration in `key = value` format.
    config: PathBuf,

    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(error_exit_code(&e) as u8);
        }
    };
    let out_dir = args.out.or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("."));

    match run(&config, &out_dir) {
        Ok(outcome) => {
            for b in &outcome.breaches {
                eprintln!("breach: {b}");
            }
            if !args.quiet {
                let r = &outcome.final_report;
                println!(
                    "t = {:.6}  <n> = {:.10e}  purity = {:.10e}  tail = {:.3e}  -> {}",
                    r.t,
                    r.mean_n,
                    r.purity,
                    r.tail_pop,
                    out_dir.display()
                );
                if let Some(d) = outcome.max_abs_diff {
                    println!("max |analytic - oracle| = {d:.3e}");
                }
                if let Some(d) = outcome.limit_cycle_distance {
                    println!("trace distance to limit cycle = {d:.3e}");
                }
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
