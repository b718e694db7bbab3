//! Run orchestration: subcommand dispatch and artifact emission.

use std::path::Path;

use crate::beam::{beam_energy, beam_norms, embedding_constant, norm_equivalence_check, solve_beam};
use crate::beam::BoundaryConditionKind;
use crate::config::RunConfig;
use crate::coupling::{gamma_sweep_with_threads, solve_fsi, symmetry_check, FsiEnv};
use crate::error::{Error, Result};
use crate::fluid::{field_diagnostics, flux_through_slice};
use crate::io::{write_outputs, JsonValue, RunOutputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveBeam,
    SolveFluid,
    SolveFsi,
    SymmetryCheck,
    GammaSweep,
    VerifyConstants,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        match s {
            "solve-beam" => Some(Command::SolveBeam),
            "solve-fluid" => Some(Command::SolveFluid),
            "solve-fsi" => Some(Command::SolveFsi),
            "symmetry-check" => Some(Command::SymmetryCheck),
            "gamma-sweep" => Some(Command::GammaSweep),
            "verify-constants" => Some(Command::VerifyConstants),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveBeam => "solve-beam",
            Command::SolveFluid => "solve-fluid",
            Command::SolveFsi => "solve-fsi",
            Command::SymmetryCheck => "symmetry-check",
            Command::GammaSweep => "gamma-sweep",
            Command::VerifyConstants => "verify-constants",
        }
    }
}

/// Execute a subcommand; returns the process exit status (0 = pass,
/// 1 = a verification check failed). Solver and validation errors map to
/// their category codes at the call site.
pub fn run_command(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<i32> {
    match cmd {
        Command::SolveBeam => {
            let load = vec![cfg.beam_load; cfg.fsi.beam_grid.n_nodes()];
            let h = solve_beam(
                &load,
                &cfg.fsi.restoring_force,
                cfg.fsi.bc_kind,
                &cfg.fsi.beam_grid,
                cfg.fsi.beam_tol,
            )?;
            let norms = beam_norms(&h);
            let energy = beam_energy(&h, &cfg.fsi.restoring_force, &load)?;
            let outputs = RunOutputs {
                summary: vec![
                    ("command", JsonValue::Str("solve-beam".into())),
                    ("n_nodes", JsonValue::Int(cfg.fsi.beam_grid.n_nodes() as i64)),
                    ("bc", JsonValue::Str(cfg.fsi.bc_kind.label().into())),
                    ("load", JsonValue::Float(cfg.beam_load)),
                    ("norm_h", JsonValue::Float(norms.norm_h)),
                    ("norm_h4", JsonValue::Float(norms.norm_h4)),
                    ("norm_inf", JsonValue::Float(norms.norm_inf)),
                    ("energy", JsonValue::Float(energy)),
                    ("seed", JsonValue::Int(cfg.seed as i64)),
                ],
                beam: Some(&h),
                ..Default::default()
            };
            write_outputs(&outputs, out_dir)?;
            Ok(0)
        }

        Command::SolveFluid => {
            let env = FsiEnv::new(cfg.fsi.clone())?;
            let solver = env.fluid_solver(&env.rest_profile())?;
            let (state, report) = solver.solve(None)?;
            let tm = solver.transform();
            let diag = field_diagnostics(&state, tm, env.attachment.sigma)?;
            let g = tm.domain.grid;
            let flux_in = flux_through_slice(&state, g.xface_x(0))?;
            let flux_mid = flux_through_slice(&state, g.xface_x(g.nx / 2))?;
            let flux_out = flux_through_slice(&state, g.xface_x(g.nx))?;
            let history: Vec<Vec<f64>> = report
                .picard_increments
                .iter()
                .enumerate()
                .map(|(k, v)| vec![(k + 1) as f64, *v])
                .collect();
            let outputs = RunOutputs {
                summary: vec![
                    ("command", JsonValue::Str("solve-fluid".into())),
                    ("gamma", JsonValue::Float(cfg.fsi.gamma)),
                    ("eta", JsonValue::Float(cfg.fsi.viscosity)),
                    ("picard_iterations", JsonValue::Int(report.picard_iterations as i64)),
                    (
                        "final_nonlinear_residual",
                        JsonValue::Float(report.final_nonlinear_residual),
                    ),
                    (
                        "linear_solver_residuals",
                        JsonValue::FloatArray(report.linear_solver_residuals.clone()),
                    ),
                    ("velocity_l2", JsonValue::Float(state.velocity_l2())),
                    ("velocity_h1", JsonValue::Float(state.velocity_h1())),
                    ("flux_inlet", JsonValue::Float(flux_in)),
                    ("flux_mid", JsonValue::Float(flux_mid)),
                    ("flux_outlet", JsonValue::Float(flux_out)),
                    ("div_residual", JsonValue::Float(diag.div_residual)),
                    ("parity_residual", JsonValue::Float(diag.parity_residual)),
                    ("sobolev_w1", JsonValue::Float(diag.sobolev_w1)),
                    ("sobolev_w2", JsonValue::Float(diag.sobolev_w2)),
                    ("theta_star", JsonValue::Float(env.attachment.theta_star)),
                    ("sigma", JsonValue::Float(env.attachment.sigma)),
                    ("seed", JsonValue::Int(cfg.seed as i64)),
                ],
                history: Some(("iteration,increment", history)),
                fields: cfg.write_fields.then_some(&state),
                ..Default::default()
            };
            write_outputs(&outputs, out_dir)?;
            Ok(0)
        }

        Command::SolveFsi => {
            let env = FsiEnv::new(cfg.fsi.clone())?;
            let eq = solve_fsi(&env)?;
            let norms = beam_norms(&eq.displacement);
            let history: Vec<Vec<f64>> = eq
                .history
                .iter()
                .enumerate()
                .map(|(k, v)| vec![(k + 1) as f64, *v])
                .collect();
            let outputs = RunOutputs {
                summary: vec![
                    ("command", JsonValue::Str("solve-fsi".into())),
                    ("gamma", JsonValue::Float(cfg.fsi.gamma)),
                    ("outer_iterations", JsonValue::Int(eq.outer_iterations as i64)),
                    ("contraction_estimate", JsonValue::Float(eq.contraction_estimate)),
                    ("h_norm_h4", JsonValue::Float(norms.norm_h4)),
                    ("h_norm_inf", JsonValue::Float(norms.norm_inf)),
                    ("lift_inf", JsonValue::Float(eq.lift.norm_inf())),
                    (
                        "fixed_point_residual",
                        JsonValue::Float(eq.fixed_point_residual.unwrap_or(f64::NAN)),
                    ),
                    ("velocity_l2", JsonValue::Float(eq.state.velocity_l2())),
                    ("theta_star", JsonValue::Float(eq.attachment.theta_star)),
                    ("sigma", JsonValue::Float(eq.attachment.sigma)),
                    ("max_h_inf", JsonValue::Float(eq.max_h_inf)),
                    ("h4_over_gamma", JsonValue::Float(eq.h4_over_gamma)),
                    ("seed", JsonValue::Int(cfg.seed as i64)),
                ],
                beam: Some(&eq.displacement),
                lift: Some(&eq.lift),
                history: Some(("iteration,increment_h4", history)),
                fields: cfg.write_fields.then_some(&eq.state),
            };
            write_outputs(&outputs, out_dir)?;
            Ok(0)
        }

        Command::SymmetryCheck => {
            let env = FsiEnv::new(cfg.fsi.clone())?;
            let (report, eq) = symmetry_check(&env)?;
            let outputs = RunOutputs {
                summary: vec![
                    ("command", JsonValue::Str("symmetry-check".into())),
                    ("gamma", JsonValue::Float(cfg.fsi.gamma)),
                    ("h_inf", JsonValue::Float(report.h_inf)),
                    ("lift_inf", JsonValue::Float(report.lift_inf)),
                    ("parity_residual", JsonValue::Float(report.parity_residual)),
                    ("h_threshold", JsonValue::Float(report.h_threshold)),
                    ("lift_threshold", JsonValue::Float(report.lift_threshold)),
                    ("parity_threshold", JsonValue::Float(report.parity_threshold)),
                    ("pass", JsonValue::Bool(report.pass)),
                    ("seed", JsonValue::Int(cfg.seed as i64)),
                ],
                beam: Some(&eq.displacement),
                lift: Some(&eq.lift),
                fields: cfg.write_fields.then_some(&eq.state),
                ..Default::default()
            };
            write_outputs(&outputs, out_dir)?;
            Ok(if report.pass { 0 } else { 1 })
        }

        Command::GammaSweep => {
            let env = FsiEnv::new(cfg.fsi.clone())?;
            let (rows, last) = gamma_sweep_with_threads(&env, &cfg.sweep_gammas, cfg.threads)?;
            let history: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.gamma,
                        r.h_norm_h4,
                        r.h_norm_inf,
                        r.velocity_l2,
                        r.lift_inf,
                        r.contraction,
                        r.outer_iterations as f64,
                        r.lipschitz_quotient,
                        r.velocity_quotient,
                    ]
                })
                .collect();
            let quotients: Vec<f64> = rows.iter().skip(1).map(|r| r.lipschitz_quotient).collect();
            let outputs = RunOutputs {
                summary: vec![
                    ("command", JsonValue::Str("gamma-sweep".into())),
                    (
                        "gammas",
                        JsonValue::FloatArray(rows.iter().map(|r| r.gamma).collect()),
                    ),
                    (
                        "h_norm_h4",
                        JsonValue::FloatArray(rows.iter().map(|r| r.h_norm_h4).collect()),
                    ),
                    (
                        "velocity_l2",
                        JsonValue::FloatArray(rows.iter().map(|r| r.velocity_l2).collect()),
                    ),
                    (
                        "lift_inf",
                        JsonValue::FloatArray(rows.iter().map(|r| r.lift_inf).collect()),
                    ),
                    (
                        "contraction",
                        JsonValue::FloatArray(rows.iter().map(|r| r.contraction).collect()),
                    ),
                    ("lipschitz_quotients", JsonValue::FloatArray(quotients)),
                    ("seed", JsonValue::Int(cfg.seed as i64)),
                ],
                beam: Some(&last.displacement),
                lift: Some(&last.lift),
                history: Some((
                    "gamma,h_norm_h4,h_norm_inf,velocity_l2,lift_inf,contraction,outer_iterations,lipschitz_quotient,velocity_quotient",
                    history,
                )),
                fields: cfg.write_fields.then_some(&last.state),
            };
            write_outputs(&outputs, out_dir)?;
            Ok(0)
        }

        Command::VerifyConstants => {
            let grid = crate::beam::BeamGrid::new(cfg.verify_nodes)?;
            let clamped = embedding_constant(BoundaryConditionKind::Clamped, &grid)?;
            let hinged = embedding_constant(BoundaryConditionKind::Hinged, &grid)?;
            let eq_clamped = norm_equivalence_check(BoundaryConditionKind::Clamped, &grid, 100)?;
            let eq_hinged = norm_equivalence_check(BoundaryConditionKind::Hinged, &grid, 100)?;
            let pass = clamped.s_discrete < clamped.s_bound
                && hinged.s_discrete < hinged.s_bound
                && eq_clamped.counterexample_rejected
                && eq_hinged.counterexample_rejected
                && eq_clamped.c_lower > 0.0
                && eq_hinged.c_lower > 0.0;
            let outputs = RunOutputs {
                summary: vec![
                    ("command", JsonValue::Str("verify-constants".into())),
                    ("n_nodes", JsonValue::Int(cfg.verify_nodes as i64)),
                    ("s_clamped", JsonValue::Float(clamped.s_discrete)),
                    ("s_clamped_bound", JsonValue::Float(clamped.s_bound)),
                    ("s_hinged", JsonValue::Float(hinged.s_discrete)),
                    ("s_hinged_bound", JsonValue::Float(hinged.s_bound)),
                    ("c_lower_clamped", JsonValue::Float(eq_clamped.c_lower)),
                    ("c_upper_clamped", JsonValue::Float(eq_clamped.c_upper)),
                    ("c_lower_hinged", JsonValue::Float(eq_hinged.c_lower)),
                    ("c_upper_hinged", JsonValue::Float(eq_hinged.c_upper)),
                    (
                        "counterexample_rejected",
                        JsonValue::Bool(eq_clamped.counterexample_rejected && eq_hinged.counterexample_rejected),
                    ),
                    ("pass", JsonValue::Bool(pass)),
                    ("seed", JsonValue::Int(cfg.seed as i64)),
                ],
                beam: Some(&clamped.maximizer),
                ..Default::default()
            };
            write_outputs(&outputs, out_dir)?;
            Ok(if pass { 0 } else { 1 })
        }
    }
}

/// Map an error to its CLI exit code and print the diagnostic.
pub fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
