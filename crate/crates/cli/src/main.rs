use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use wavebound_cli::args::{Cli, Command};
use wavebound_cli::commands;

fn print<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Forward(a) => print(&commands::cmd_forward(&a.resolve()?)?)?,
        Command::Assimilate(a) => print(&commands::cmd_assimilate(&a.resolve()?)?)?,
        Command::Sweep(a) => print(&commands::cmd_sweep(&a.resolve()?)?)?,
        Command::Dispersion(a) => print(&commands::cmd_dispersion(&a.resolve()?)?)?,
        Command::ShowConfig(a) => print(&a.resolve()?)?,
        Command::Gradcheck { config, twin } => {
            let report = commands::cmd_gradcheck(&config.resolve()?, twin)?;
            println!("max dot-product residual {:.3e}", report.dot_residuals.iter().cloned().fold(0.0, f64::max));
            println!("{:>5} {:>24} {:>24} {:>10}", "i", "adjoint", "finite difference", "rel err");
            for r in &report.rows {
                println!("{:>5} {:>24.15e} {:>24.15e} {:>10.2e}", r.index, r.adjoint, r.finite_difference, r.rel_error);
            }
            println!("gradient norm {:.3e}", report.grad_norm);
            println!("{}", if report.passed { "PASS" } else { "FAIL" });
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
