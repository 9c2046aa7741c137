use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

/// Runs a coded-caching scenario and writes `report.txt` and `results.csv`.
///
/// Exit status: 0 when every check passes, 1 on a decode failure, oracle
/// mismatch or failed certificate, 2 on configuration or setup errors.
#[derive(Parser, Debug)]
#[command(name = "codedcache", version)]
struct Args {
    /// Scenario file (TOML).
    config: PathBuf,
    /// Output directory. `CODEDCACHE_OUT_DIR` overrides it.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(short, long)]
    jobs: Option<usize>,
    /// More logging; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::new().parse_filters(level).init();

    let out_dir = std::env::var_os("CODEDCACHE_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or(args.out);
    let scenario = match codedcache_cli::load(&args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match codedcache_cli::run(&scenario, args.jobs) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = outcome.write(&out_dir) {
        error!("cannot write {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }
    print!("{}", outcome.report);
    if outcome.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
