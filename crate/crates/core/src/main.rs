use std::path::PathBuf;
use std::process::ExitCode;

use beamflow::cli::{report_error, run_command, Command};
use beamflow::config::parse_config;

const USAGE: &str = "usage: beamflow <subcommand> --config <path> [--out <dir>] [--seed <u64>]

subcommands:
  solve-beam        solve the beam equilibrium under the configured load
  solve-fluid       solve the channel flow on the rest domain
  solve-fsi         drive the coupled problem to its fixed point
  symmetry-check    verify the symmetric-configuration zero-lift statement
  gamma-sweep       equilibria over the configured inflow magnitudes
  verify-constants  embedding constants and norm-equivalence probes

environment:
  BEAMFLOW_OUT      default output directory (overridden by --out)
  BEAMFLOW_THREADS  worker threads for independent sweep points";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        eprintln!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }
    let Some(cmd) = Command::parse(&args[0]) else {
        eprintln!("unknown subcommand `{}`\n{USAGE}", args[0]);
        return ExitCode::from(2);
    };

    let mut config_path: Option<PathBuf> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--config" => config_path = it.next().map(PathBuf::from),
            "--out" => out_dir = it.next().map(PathBuf::from),
            "--seed" => {
                seed = match it.next().map(|s| s.parse()) {
                    Some(Ok(v)) => Some(v),
                    _ => {
                        eprintln!("--seed expects an unsigned integer\n{USAGE}");
                        return ExitCode::from(2);
                    }
                }
            }
            other => {
                eprintln!("unknown flag `{other}`\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }
    let Some(config_path) = config_path else {
        eprintln!("--config <path> is required\n{USAGE}");
        return ExitCode::from(2);
    };
    let out_dir = out_dir
        .or_else(|| std::env::var_os("BEAMFLOW_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut cfg = match parse_config(&config_path) {
        Ok(cfg) => cfg,
        Err(e) => return ExitCode::from(report_error(&e) as u8),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Ok(threads) = std::env::var("BEAMFLOW_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t >= 1 => cfg.threads = t,
            _ => {
                eprintln!("BEAMFLOW_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }

    match run_command(cmd, &cfg, &out_dir) {
        Ok(status) => {
            println!(
                "{}: {} (outputs in {})",
                cmd.name(),
                if status == 0 { "pass" } else { "check failed" },
                out_dir.display()
            );
            ExitCode::from(status as u8)
        }
        Err(e) => ExitCode::from(report_error(&e) as u8),
    }
}
