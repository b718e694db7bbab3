//! The displacement-to-displacement map and its fixed point: fluid solve on
//! the mapped domain, lift extraction, beam solve, contraction iteration.

use std::sync::Arc;

use crate::beam::{
    beam_norms, solve_beam, BeamGrid, BeamProfile, BoundaryConditionKind, RestoringForce,
};
use crate::error::{Error, Result};
use crate::fluid::{
    build_boundary_data, field_diagnostics, BoundaryData, FluidOptions, FluidSolver, FluidState,
    InflowProfile, SolverReport,
};
use crate::geometry::{
    attachment_sigma, build_reference_domain, clearance, transform_matrices, AttachmentReport,
    ChannelSpec, CutoffFunction, Obstacle, ReferenceDomain,
};
use crate::lift::{compute_lift_profile, LiftMethod, LiftProfile};

/// Everything a coupled run needs.
#[derive(Debug, Clone)]
pub struct FsiConfig {
    pub channel: ChannelSpec,
    pub obstacle: Obstacle,
    pub resolution: (usize, usize, usize),
    pub beam_grid: BeamGrid,
    pub bc_kind: BoundaryConditionKind,
    pub restoring_force: RestoringForce,
    pub viscosity: f64,
    pub gamma: f64,
    pub profile: InflowProfile,
    pub lift_method: LiftMethod,
    /// Clearance margin factor, 1 < omega < 1/max(Z+, Z-).
    pub omega: f64,
    pub beam_tol: f64,
    pub fluid: FluidOptions,
    pub coupling_tol: f64,
    pub coupling_relaxation: f64,
    pub max_outer: usize,
    /// Verify |map(h*) - h*| with one extra map evaluation after convergence.
    pub verify_fixed_point: bool,
}

impl FsiConfig {
    pub fn desk_default(gamma: f64, profile: InflowProfile) -> Result<FsiConfig> {
        Ok(FsiConfig {
            channel: ChannelSpec::new(3.0)?,
            obstacle: Obstacle::new(0.3, 0.2, 4.0, 0.0, 0.0)?,
            resolution: (48, 24, 24),
            beam_grid: BeamGrid::new(101)?,
            bc_kind: BoundaryConditionKind::Clamped,
            restoring_force: RestoringForce::Linear { stiffness: 1.0 },
            viscosity: 1.0,
            gamma,
            profile,
            lift_method: LiftMethod::ResidualBased,
            omega: 1.25,
            beam_tol: 1e-10,
            fluid: FluidOptions::default(),
            coupling_tol: 2e-8,
            coupling_relaxation: 1.0,
            max_outer: 40,
            verify_fixed_point: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, ny, nz) = self.resolution;
        if nx < 8 || ny < 8 || nz < 8 {
            return Err(Error::ValidationError {
                key: "grid".into(),
                message: format!("resolution must be at least 8 per axis, got {nx}x{ny}x{nz}"),
            });
        }
        if !(self.viscosity > 0.0) {
            return Err(Error::ValidationError {
                key: "fluid.eta".into(),
                message: format!("viscosity must be positive, got {}", self.viscosity),
            });
        }
        if !(self.fluid.nonlinear_tol > 0.0 && self.fluid.linear_tol > 0.0) {
            return Err(Error::ValidationError {
                key: "fluid.nonlinear_tol".into(),
                message: "fluid tolerances must be positive".into(),
            });
        }
        if !(self.fluid.relaxation > 0.0 && self.fluid.relaxation <= 1.0) {
            return Err(Error::ValidationError {
                key: "fluid.relaxation".into(),
                message: format!("relaxation must lie in (0, 1], got {}", self.fluid.relaxation),
            });
        }
        let z = self.obstacle.extent_z();
        if !(self.omega > 1.0 && self.omega < 1.0 / z) {
            return Err(Error::ValidationError {
                key: "coupling.omega".into(),
                message: format!("need 1 < omega < {:.6}, got {}", 1.0 / z, self.omega),
            });
        }
        if !(self.coupling_tol > 0.0 && self.beam_tol > 0.0) {
            return Err(Error::ValidationError {
                key: "coupling.tol".into(),
                message: "tolerances must be positive".into(),
            });
        }
        if !(self.coupling_relaxation > 0.0 && self.coupling_relaxation <= 1.0) {
            return Err(Error::ValidationError {
                key: "coupling.relaxation".into(),
                message: format!(
                    "relaxation must lie in (0, 1], got {}",
                    self.coupling_relaxation
                ),
            });
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::ValidationError {
                key: "fluid.gamma".into(),
                message: format!("gamma must be >= 0, got {}", self.gamma),
            });
        }
        self.restoring_force.validate()?;
        Ok(())
    }

    pub fn boundary_data(&self) -> Result<BoundaryData> {
        build_boundary_data(self.gamma, self.profile)
    }
}

/// Shared geometry of a run: domain, cutoff and attachment survey.
pub struct FsiEnv {
    pub config: FsiConfig,
    pub domain: Arc<ReferenceDomain>,
    pub cutoff: CutoffFunction,
    pub attachment: AttachmentReport,
}

impl FsiEnv {
    pub fn new(config: FsiConfig) -> Result<Self> {
        config.validate()?;
        let domain = Arc::new(build_reference_domain(
            &config.channel,
            &config.obstacle,
            config.resolution,
        )?);
        let cutoff = CutoffFunction::for_obstacle(&config.channel, &config.obstacle)?;
        let attachment = attachment_sigma(&config.obstacle, 64)?;
        Ok(FsiEnv {
            config,
            domain,
            cutoff,
            attachment,
        })
    }

    pub fn rest_profile(&self) -> BeamProfile {
        BeamProfile::zero(self.config.beam_grid.clone(), self.config.bc_kind)
    }

    /// Fluid solver on the domain mapped by the given displacement.
    pub fn fluid_solver(&self, displacement: &BeamProfile) -> Result<FluidSolver> {
        let mut opts = self.config.fluid.clone();
        opts.viscosity = self.config.viscosity;
        let tm = Arc::new(transform_matrices(displacement, &self.cutoff, &self.domain)?);
        FluidSolver::new(tm, self.config.boundary_data()?, opts)
    }
}

/// One application of the displacement map: fluid solve on the domain mapped
/// by `displacement`, lift extraction, beam solve under that load.
pub struct MapOutput {
    pub displacement: BeamProfile,
    pub state: FluidState,
    pub lift: LiftProfile,
    pub fluid_report: SolverReport,
}

pub fn fsi_map(env: &FsiEnv, displacement: &BeamProfile) -> Result<MapOutput> {
    fsi_map_warm(env, displacement, None)
}

/// `fsi_map` with the fluid solve warm-started from a state obtained under a
/// nearby displacement (the outer iteration's previous state).
pub fn fsi_map_warm(
    env: &FsiEnv,
    displacement: &BeamProfile,
    warm: Option<&FluidState>,
) -> Result<MapOutput> {
    let cfg = &env.config;
    let clear = clearance(displacement, &cfg.obstacle, cfg.omega)?;
    if !clear.admissible {
        return Err(Error::InadmissibleProfile {
            h_inf: displacement.norm_inf(),
            bound: clear.bound,
        });
    }
    let solver = env.fluid_solver(displacement)?;
    let (state, fluid_report) = solver.solve_from(None, warm)?;
    let lift = compute_lift_profile(
        &solver,
        &state,
        &cfg.obstacle,
        &cfg.beam_grid,
        cfg.lift_method,
    )?;
    let new_displacement = solve_beam(
        &lift.values,
        &cfg.restoring_force,
        cfg.bc_kind,
        &cfg.beam_grid,
        cfg.beam_tol,
    )?;
    Ok(MapOutput {
        displacement: new_displacement,
        state,
        lift,
        fluid_report,
    })
}

/// Converged coupled solution.
pub struct Equilibrium {
    pub displacement: BeamProfile,
    pub state: FluidState,
    pub lift: LiftProfile,
    pub history: Vec<f64>,
    pub increment_ratios: Vec<f64>,
    pub contraction_estimate: f64,
    pub outer_iterations: usize,
    pub fixed_point_residual: Option<f64>,
    pub attachment: AttachmentReport,
    pub max_h_inf: f64,
    /// Empirical h4-norm over gamma ratio (the unquantified regularity
    /// constant of the displacement bound).
    pub h4_over_gamma: f64,
}

/// Drive h_{k+1} = (1 - rho) h_k + rho map(h_k) from the supplied start (the
/// rest profile when `start` is None) until the fourth-difference increment
/// norm falls below the coupling tolerance.
pub fn solve_fsi_from(env: &FsiEnv, start: Option<BeamProfile>) -> Result<Equilibrium> {
    let cfg = &env.config;
    let mut h = start.unwrap_or_else(|| env.rest_profile());
    let mut history: Vec<f64> = Vec::new();
    let mut max_h_inf = h.norm_inf();
    let mut rho = cfg.coupling_relaxation;
    let mut warm: Option<FluidState> = None;

    for outer in 0..cfg.max_outer {
        let out = fsi_map_warm(env, &h, warm.as_ref())?;
        warm = Some(out.state.clone());
        let mut next = out.displacement.clone();
        if rho < 1.0 {
            for (n, o) in next.values.iter_mut().zip(&h.values) {
                *n = o + rho * (*n - o);
            }
        }
        let increment = beam_norms(&next.difference(&h)?).norm_h4;
        history.push(increment);
        max_h_inf = max_h_inf.max(next.norm_inf());
        h = next;

        if increment <= cfg.coupling_tol {
            let ratios: Vec<f64> = history.windows(2).map(|w| w[1] / w[0].max(1e-300)).collect();
            let contraction = ratios.iter().cloned().fold(0.0f64, f64::max);
            let fixed_point_residual = if cfg.verify_fixed_point && increment > 0.0 {
                let probe = fsi_map_warm(env, &h, warm.as_ref())?;
                Some(beam_norms(&probe.displacement.difference(&h)?).norm_h4)
            } else if increment == 0.0 {
                Some(0.0)
            } else {
                None
            };
            let h4 = beam_norms(&h).norm_h4;
            return Ok(Equilibrium {
                displacement: h,
                state: out.state,
                lift: out.lift,
                history,
                increment_ratios: ratios,
                contraction_estimate: contraction,
                outer_iterations: outer + 1,
                fixed_point_residual,
                attachment: env.attachment,
                max_h_inf,
                h4_over_gamma: if cfg.gamma > 0.0 { h4 / cfg.gamma } else { 0.0 },
            });
        }

        // persistent increment growth: outside the contraction regime, or
        // halve the relaxation once before giving up
        let m = history.len();
        if m >= 3 && history[m - 1] >= history[m - 2] && history[m - 2] >= history[m - 3] {
            if rho > 0.51 {
                rho *= 0.5;
            } else {
                return Err(Error::NonConvergence {
                    stage: "fsi coupling",
                    iterations: outer + 1,
                    residual: history[m - 1],
                });
            }
        }
    }
    Err(Error::NonConvergence {
        stage: "fsi coupling",
        iterations: cfg.max_outer,
        residual: *history.last().unwrap_or(&f64::INFINITY),
    })
}

pub fn solve_fsi(env: &FsiEnv) -> Result<Equilibrium> {
    solve_fsi_from(env, None)
}

/// One row of the gamma sweep table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub gamma: f64,
    pub h_norm_h4: f64,
    pub h_norm_inf: f64,
    pub velocity_l2: f64,
    pub lift_inf: f64,
    pub contraction: f64,
    pub outer_iterations: usize,
    /// |h*(g_i) - h*(g_{i-1})|_H4 / (g_i - g_{i-1}); zero for the first row.
    pub lipschitz_quotient: f64,
    /// L2 difference of the velocity against the previous state after
    /// pull-back through the displacement map composition.
    pub velocity_quotient: f64,
}

/// Equilibria over an increasing gamma list with Lipschitz difference
/// quotients between consecutive solutions.
pub fn gamma_sweep(env: &FsiEnv, gammas: &[f64]) -> Result<Vec<SweepRow>> {
    gamma_sweep_with_threads(env, gammas, 1).map(|(rows, _)| rows)
}

/// Sweep with the equilibria solved on up to `threads` workers (the points
/// are independent); returns the rows and the last equilibrium for emission.
pub fn gamma_sweep_with_threads(
    env: &FsiEnv,
    gammas: &[f64],
    threads: usize,
) -> Result<(Vec<SweepRow>, Equilibrium)> {
    if gammas.is_empty() {
        return Err(Error::ValidationError {
            key: "sweep.gammas".into(),
            message: "gamma list must not be empty".into(),
        });
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ValidationError {
            key: "sweep.gammas".into(),
            message: "gamma list must be strictly increasing".into(),
        });
    }
    let solve_point = |gamma: f64| -> Result<Equilibrium> {
        let mut cfg = env.config.clone();
        cfg.gamma = gamma;
        let sub_env = FsiEnv {
            config: cfg,
            domain: Arc::clone(&env.domain),
            cutoff: env.cutoff,
            attachment: env.attachment,
        };
        solve_fsi(&sub_env)
    };

    let mut solved: Vec<Result<Equilibrium>> = Vec::with_capacity(gammas.len());
    if threads <= 1 || gammas.len() <= 1 {
        for &gamma in gammas {
            solved.push(solve_point(gamma));
        }
    } else {
        let workers = threads.min(gammas.len());
        let mut slots: Vec<Option<Result<Equilibrium>>> = Vec::new();
        slots.resize_with(gammas.len(), || None);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (chunk_idx, chunk) in slots.chunks_mut(gammas.len().div_ceil(workers)).enumerate()
            {
                let base = chunk_idx * gammas.len().div_ceil(workers);
                let solve_point = &solve_point;
                handles.push(scope.spawn(move || {
                    for (off, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(solve_point(gammas[base + off]));
                    }
                }));
            }
            for h in handles {
                let _ = h.join();
            }
        });
        for slot in slots {
            solved.push(slot.expect("sweep worker did not fill its slot"));
        }
    }

    let mut eqs: Vec<Equilibrium> = Vec::with_capacity(gammas.len());
    for r in solved {
        eqs.push(r?);
    }

    let mut rows: Vec<SweepRow> = Vec::new();
    for (idx, eq) in eqs.iter().enumerate() {
        let (lip, velq) = if idx == 0 {
            (0.0, 0.0)
        } else {
            let prev = &eqs[idx - 1];
            let dgamma = gammas[idx] - gammas[idx - 1];
            let dh = beam_norms(&eq.displacement.difference(&prev.displacement)?).norm_h4;
            let velq = pullback_velocity_difference(env, prev, eq)? / dgamma;
            (dh / dgamma, velq)
        };
        rows.push(SweepRow {
            gamma: gammas[idx],
            h_norm_h4: beam_norms(&eq.displacement).norm_h4,
            h_norm_inf: eq.displacement.norm_inf(),
            velocity_l2: eq.state.velocity_l2(),
            lift_inf: eq.lift.norm_inf(),
            contraction: eq.contraction_estimate,
            outer_iterations: eq.outer_iterations,
            lipschitz_quotient: lip,
            velocity_quotient: velq,
        });
    }
    let last = eqs.pop().expect("nonempty sweep");
    Ok((rows, last))
}

/// L2 norm over fluid cells of u(g1) - u(g2) o phi_{h2 - h1}, realized by
/// composing the forward and inverse displacement maps on the reference grid.
fn pullback_velocity_difference(
    env: &FsiEnv,
    eq1: &Equilibrium,
    eq2: &Equilibrium,
) -> Result<f64> {
    use crate::fluid::fields;
    use crate::geometry::DisplacementMap;

    let dom = &env.domain;
    let g = dom.grid;
    let map1 = DisplacementMap::new(env.cutoff, eq1.displacement.clone());
    let map2 = DisplacementMap::new(env.cutoff, eq2.displacement.clone());
    let dh = eq2.displacement.difference(&eq1.displacement)?;
    let map_delta = DisplacementMap::new(env.cutoff, dh);

    let cells1 = fields::cell_velocity(&eq1.state);
    let cells2 = fields::cell_velocity(&eq2.state);

    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                if dom.is_solid(i, j, k) {
                    continue;
                }
                let q = [g.cell_x(i), g.cell_y(j), g.cell_z(k)];
                // physical point of state 1, shifted by phi_{h2-h1}, pulled
                // back to the reference coordinates of state 2
                let x1 = map1.map_point(q);
                let xs = map_delta.map_point(x1);
                let q2 = [xs[0], xs[1], map2.invert_z(xs[0], xs[1], xs[2])];
                let v2 = match crate::fluid::fields::fluid_trilinear_stencil(dom, q2) {
                    Ok(st) => {
                        let mut v = [0.0; 3];
                        for (cidx, wgt) in st {
                            for c in 0..3 {
                                v[c] += cells2[cidx][c] * wgt;
                            }
                        }
                        v
                    }
                    Err(_) => continue,
                };
                let v1 = cells1[g.cell_idx(i, j, k)];
                for c in 0..3 {
                    sum += (v1[c] - v2[c]).powi(2);
                }
                count += 1;
            }
        }
    }
    let _ = count;
    Ok((sum * g.cell_volume()).sqrt())
}

/// Report of the symmetric-configuration verification.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub h_inf: f64,
    pub lift_inf: f64,
    pub parity_residual: f64,
    pub pass: bool,
    pub h_threshold: f64,
    pub lift_threshold: f64,
    pub parity_threshold: f64,
}

/// Verify the symmetric-equilibrium statement: solve the coupled problem on a
/// symmetric configuration and measure the displacement, the lift and the
/// parity defect against their thresholds.
pub fn symmetry_check(env: &FsiEnv) -> Result<(SymmetryReport, Equilibrium)> {
    let cfg = &env.config;
    if !cfg.boundary_data()?.is_z_symmetric() {
        return Err(Error::ConfigNotSymmetric(
            "inflow profile is not symmetric in z".into(),
        ));
    }
    if !env.domain.is_z_symmetric() {
        return Err(Error::ConfigNotSymmetric(
            "obstacle mask is not symmetric in z".into(),
        ));
    }
    let eq = solve_fsi(env)?;
    let tm = Arc::clone(&eq.state.transform);
    let diag = field_diagnostics(&eq.state, &tm, env.attachment.sigma)?;
    let h_threshold = 1e-6;
    let lift_threshold = 10.0 * cfg.fluid.nonlinear_tol;
    let parity_threshold = 10.0 * cfg.fluid.nonlinear_tol;
    let report = SymmetryReport {
        h_inf: eq.displacement.norm_inf(),
        lift_inf: eq.lift.norm_inf(),
        parity_residual: diag.parity_residual,
        pass: eq.displacement.norm_inf() <= h_threshold
            && eq.lift.norm_inf() <= lift_threshold
            && diag.parity_residual <= parity_threshold,
        h_threshold,
        lift_threshold,
        parity_threshold,
    };
    Ok((report, eq))
}

/// Doubling sweep until the coupling stops contracting; returns the last
/// convergent gamma and the first divergent one.
pub fn find_gamma_threshold(env: &FsiEnv, gamma0: f64, max_doublings: usize) -> Result<(f64, f64)> {
    let mut last_ok = 0.0;
    let mut gamma = gamma0;
    for _ in 0..max_doublings {
        let mut cfg = env.config.clone();
        cfg.gamma = gamma;
        let sub_env = FsiEnv {
            config: cfg,
            domain: Arc::clone(&env.domain),
            cutoff: env.cutoff,
            attachment: env.attachment,
        };
        match solve_fsi(&sub_env) {
            Ok(_) => {
                last_ok = gamma;
                gamma *= 2.0;
            }
            Err(Error::NonConvergence { .. }) | Err(Error::InadmissibleProfile { .. }) => {
                return Ok((last_ok, gamma));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((last_ok, gamma))
}
