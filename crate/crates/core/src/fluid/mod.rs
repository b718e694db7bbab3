//! Transformed stationary Navier-Stokes solver on the staggered reference
//! grid: Picard iteration over linear saddle-point solves.

mod assemble;
pub mod fields;
mod linsolve;
mod solver;

#[cfg(test)]
pub(crate) fn assemble_probe_reset() {
    assemble::DOUBLE_GHOSTS.with(|c| c.set(0));
}

#[cfg(test)]
pub(crate) fn assemble_probe_count() -> usize {
    assemble::DOUBLE_GHOSTS.with(|c| c.get())
}

pub use solver::{
    field_diagnostics, flux_through_slice, picard_step, solve_navier_stokes, FieldDiagnostics,
    FluidOptions, FluidSolver,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{MacGrid, TransformMatrices};

/// Inflow/outflow profile shape on the square cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InflowProfile {
    /// V(y,z) = (9/16)(1-y^2)(1-z^2): unit flux, symmetric in z.
    SymmetricPoiseuille,
    /// Inlet multiplied by 1 + s z (1-y^2)(1-z^2): flux-preserving, breaks
    /// the z symmetry; the outlet keeps the symmetric profile.
    AsymmetricBump { s: f64 },
}

/// Dirichlet data for the channel boundary at inflow magnitude gamma.
#[derive(Clone)]
pub struct BoundaryData {
    pub gamma: f64,
    pub kind: BoundaryKind,
}

#[derive(Clone)]
pub enum BoundaryKind {
    Profile(InflowProfile),
    /// Arbitrary velocity field sampled on the boundary (manufactured
    /// solutions); no flux normalization is applied.
    Custom(Arc<dyn Fn(f64, f64, f64) -> [f64; 3] + Send + Sync>),
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            BoundaryKind::Profile(p) => write!(f, "BoundaryData(gamma={}, {:?})", self.gamma, p),
            BoundaryKind::Custom(_) => write!(f, "BoundaryData(gamma={}, custom)", self.gamma),
        }
    }
}

/// Where on the channel boundary a sample is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRegion {
    Inlet,
    Outlet,
    Wall,
}

fn poiseuille(y: f64, z: f64) -> f64 {
    9.0 / 16.0 * (1.0 - y * y) * (1.0 - z * z)
}

impl BoundaryData {
    pub fn custom(
        gamma: f64,
        f: impl Fn(f64, f64, f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        BoundaryData {
            gamma,
            kind: BoundaryKind::Custom(Arc::new(f)),
        }
    }

    /// Velocity sample; profiles carry the flow in the x direction only.
    pub fn velocity(&self, region: BoundaryRegion, x: f64, y: f64, z: f64) -> [f64; 3] {
        match &self.kind {
            BoundaryKind::Custom(f) => f(x, y, z),
            BoundaryKind::Profile(profile) => {
                let base = poiseuille(y, z);
                let vx = match (region, profile) {
                    (BoundaryRegion::Inlet, InflowProfile::AsymmetricBump { s }) => {
                        base * (1.0 + s * z * (1.0 - y * y) * (1.0 - z * z))
                    }
                    _ => base,
                };
                [self.gamma * vx, 0.0, 0.0]
            }
        }
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.kind, BoundaryKind::Custom(_))
    }

    /// Whether the data satisfies the z-mirror symmetry.
    pub fn is_z_symmetric(&self) -> bool {
        match &self.kind {
            BoundaryKind::Profile(InflowProfile::SymmetricPoiseuille) => true,
            BoundaryKind::Profile(InflowProfile::AsymmetricBump { s }) => *s == 0.0,
            BoundaryKind::Custom(_) => false,
        }
    }
}

/// Validated boundary data for the standard profiles.
pub fn build_boundary_data(gamma: f64, profile: InflowProfile) -> Result<BoundaryData> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::ValidationError {
            key: "fluid.gamma".into(),
            message: format!("inflow magnitude must be finite and >= 0, got {gamma}"),
        });
    }
    if let InflowProfile::AsymmetricBump { s } = profile {
        if !(s.abs() <= 1.0) {
            return Err(Error::ValidationError {
                key: "fluid.bump".into(),
                message: format!("bump amplitude must satisfy |s| <= 1, got {s}"),
            });
        }
    }
    Ok(BoundaryData {
        gamma,
        kind: BoundaryKind::Profile(profile),
    })
}

/// Staggered velocity (face components) and cell pressure on the reference
/// grid, together with the transform they were solved against.
#[derive(Debug, Clone)]
pub struct FluidState {
    pub transform: Arc<TransformMatrices>,
    /// x-velocity on x-faces, (nx+1) * ny * nz.
    pub u: Vec<f64>,
    /// y-velocity on y-faces, nx * (ny+1) * nz.
    pub v: Vec<f64>,
    /// z-velocity on z-faces, nx * ny * (nz+1).
    pub w: Vec<f64>,
    /// Cell pressure, zero mean over fluid cells; zero in solid cells.
    pub pressure: Vec<f64>,
    pub gamma: f64,
}

impl FluidState {
    pub fn grid(&self) -> MacGrid {
        self.transform.domain.grid
    }

    pub fn zeros(transform: Arc<TransformMatrices>, gamma: f64) -> Self {
        let g = transform.domain.grid;
        FluidState {
            u: vec![0.0; (g.nx + 1) * g.ny * g.nz],
            v: vec![0.0; g.nx * (g.ny + 1) * g.nz],
            w: vec![0.0; g.nx * g.ny * (g.nz + 1)],
            pressure: vec![0.0; g.n_cells()],
            gamma,
            transform,
        }
    }

    #[inline]
    pub fn idx_u(&self, i: usize, j: usize, k: usize) -> usize {
        let g = self.grid();
        (i * g.ny + j) * g.nz + k
    }

    #[inline]
    pub fn idx_v(&self, i: usize, j: usize, k: usize) -> usize {
        let g = self.grid();
        (i * (g.ny + 1) + j) * g.nz + k
    }

    #[inline]
    pub fn idx_w(&self, i: usize, j: usize, k: usize) -> usize {
        let g = self.grid();
        (i * g.ny + j) * (g.nz + 1) + k
    }

    /// Volume-weighted L2 norm of the velocity over all faces.
    pub fn velocity_l2(&self) -> f64 {
        let g = self.grid();
        let vol = g.cell_volume();
        let sum: f64 = self.u.iter().map(|x| x * x).sum::<f64>()
            + self.v.iter().map(|x| x * x).sum::<f64>()
            + self.w.iter().map(|x| x * x).sum::<f64>();
        (sum * vol).sqrt()
    }

    pub fn velocity_inf(&self) -> f64 {
        crate::util::norm_inf(&self.u)
            .max(crate::util::norm_inf(&self.v))
            .max(crate::util::norm_inf(&self.w))
    }

    /// Discrete H1-type norm: L2 of the velocity plus L2 of its cell-centered
    /// gradient reconstruction.
    pub fn velocity_h1(&self) -> f64 {
        let grads = fields::cell_gradients(self);
        let g = self.grid();
        let vol = g.cell_volume();
        let mut gsum = 0.0;
        for grad in &grads {
            for row in grad {
                for v in row {
                    gsum += v * v;
                }
            }
        }
        (self.velocity_l2().powi(2) + gsum * vol).sqrt()
    }

    /// Subtract the mean over fluid cells from the pressure.
    pub fn project_pressure_mean(&mut self) {
        let dom = &self.transform.domain;
        let g = dom.grid;
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    if dom.is_fluid(i, j, k) {
                        sum += self.pressure[g.cell_idx(i, j, k)];
                        count += 1;
                    }
                }
            }
        }
        let mean = sum / count.max(1) as f64;
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    let idx = g.cell_idx(i, j, k);
                    if dom.is_fluid(i, j, k) {
                        self.pressure[idx] -= mean;
                    } else {
                        self.pressure[idx] = 0.0;
                    }
                }
            }
        }
    }
}

/// Momentum source sampled on every velocity face (manufactured solutions).
#[derive(Debug, Clone)]
pub struct BodyForce {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl BodyForce {
    /// Sample a force density f(component, x, y, z) on the staggered faces.
    pub fn from_fn(grid: &MacGrid, f: impl Fn(usize, f64, f64, f64) -> f64) -> Self {
        let g = *grid;
        let mut u = vec![0.0; (g.nx + 1) * g.ny * g.nz];
        let mut v = vec![0.0; g.nx * (g.ny + 1) * g.nz];
        let mut w = vec![0.0; g.nx * g.ny * (g.nz + 1)];
        for i in 0..=g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    u[(i * g.ny + j) * g.nz + k] = f(0, g.xface_x(i), g.cell_y(j), g.cell_z(k));
                }
            }
        }
        for i in 0..g.nx {
            for j in 0..=g.ny {
                for k in 0..g.nz {
                    v[(i * (g.ny + 1) + j) * g.nz + k] =
                        f(1, g.cell_x(i), g.yface_y(j), g.cell_z(k));
                }
            }
        }
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..=g.nz {
                    w[(i * g.ny + j) * (g.nz + 1) + k] =
                        f(2, g.cell_x(i), g.cell_y(j), g.zface_z(k));
                }
            }
        }
        BodyForce { u, v, w }
    }
}

/// Per-solve record: iteration counts, residuals, timing.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub picard_iterations: usize,
    pub final_nonlinear_residual: f64,
    pub linear_solver_residuals: Vec<f64>,
    pub picard_increments: Vec<f64>,
    pub wall_time_s: f64,
}
