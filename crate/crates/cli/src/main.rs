use clap::{Parser, Subcommand};

use qsdc_cli::commands::{
    cmd_boundary, cmd_point, cmd_sweep, exit_code, BoundaryArgs, PointArgs, SweepArgs, EXIT_CONFIG,
};

/// Secrecy-capacity calculations for QSDC protocols.
#[derive(Parser, Debug)]
#[command(name = "captool", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize one point and print its CSV row.
    Point(PointArgs),
    /// Run a configured grid and write results.csv plus a run record.
    Sweep(SweepArgs),
    /// Locate the q_b where the reliable capacity vanishes, per q_f.
    Boundary(BoundaryArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAPTOOL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match &cli.command {
        Command::Point(a) => cmd_point(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Boundary(a) => cmd_boundary(a),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("captool: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}
