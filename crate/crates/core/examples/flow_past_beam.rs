//! Minimal library walkthrough: solve a coupled equilibrium on a coarse grid
//! and print the headline numbers.

use beamflow::beam::{beam_norms, BeamGrid};
use beamflow::coupling::{solve_fsi, FsiConfig, FsiEnv};
use beamflow::fluid::{flux_through_slice, InflowProfile};

fn main() -> beamflow::Result<()> {
    let mut cfg = FsiConfig::desk_default(0.005, InflowProfile::AsymmetricBump { s: 0.5 })?;
    cfg.resolution = (24, 12, 12);
    cfg.beam_grid = BeamGrid::new(41)?;
    cfg.fluid.relaxation = 1.0;

    let env = FsiEnv::new(cfg)?;
    let eq = solve_fsi(&env)?;

    let norms = beam_norms(&eq.displacement);
    println!("outer iterations : {}", eq.outer_iterations);
    println!("contraction M    : {:.3e}", eq.contraction_estimate);
    println!("|h*|_inf         : {:.6e}", norms.norm_inf);
    println!("|h*|_H4          : {:.6e}", norms.norm_h4);
    println!("|L|_inf          : {:.6e}", eq.lift.norm_inf());
    println!("|U|_2            : {:.6e}", eq.state.velocity_l2());
    let g = eq.state.grid();
    for i in [0, g.nx / 2, g.nx] {
        let flux = flux_through_slice(&eq.state, g.xface_x(i))?;
        println!("flux @ x={:+.2}    : {:.12e}", g.xface_x(i), flux);
    }
    println!(
        "attachment       : theta* = {:.4}, sigma = {:.2}",
        eq.attachment.theta_star, eq.attachment.sigma
    );
    Ok(())
}
