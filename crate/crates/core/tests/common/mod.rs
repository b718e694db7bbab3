//! Shared helpers for the integration suites: the manufactured solution and
//! its sampling to staggered faces.

#![allow(dead_code)]

use std::sync::Arc;

use beamflow::beam::{BeamGrid, BeamProfile, BoundaryConditionKind};
use beamflow::fluid::{BodyForce, BoundaryData, FluidOptions, FluidSolver, FluidState};
use beamflow::geometry::{
    build_reference_domain, transform_matrices, ChannelSpec, CutoffFunction, Obstacle,
    ReferenceDomain,
};

const PI: f64 = std::f64::consts::PI;

/// Manufactured velocity/pressure on the box (-1.5, 1.5) x (-1, 1)^2:
/// divergence-free trigonometric field; wavenumbers fit the box.
pub struct Manufactured {
    pub eta: f64,
}

impl Manufactured {
    pub const A: f64 = 1.0;
    const B: f64 = 1.0;
    pub fn wavenumbers() -> (f64, f64, f64) {
        (PI / 3.0, PI / 2.0, PI / 2.0)
    }
    pub fn c() -> f64 {
        let (a, b, c) = Self::wavenumbers();
        -(Self::A * a + Self::B * b) / c
    }

    pub fn velocity(x: f64, y: f64, z: f64) -> [f64; 3] {
        let (a, b, c) = Self::wavenumbers();
        [
            Self::A * (a * x).sin() * (b * y).cos() * (c * z).cos(),
            Self::B * (a * x).cos() * (b * y).sin() * (c * z).cos(),
            Self::c() * (a * x).cos() * (b * y).cos() * (c * z).sin(),
        ]
    }

    pub fn pressure(x: f64, y: f64, z: f64) -> f64 {
        let (a, b, c) = Self::wavenumbers();
        (a * x).sin() * (b * y).sin() * (c * z).sin()
    }

    /// f = -eta lap(u) + (u . grad) u + grad p, assembled symbolically.
    pub fn body_force(&self, comp: usize, x: f64, y: f64, z: f64) -> f64 {
        let (a, b, c) = Self::wavenumbers();
        let k2 = a * a + b * b + c * c;
        let u = Self::velocity(x, y, z);
        // gradients of each component
        let (sa, ca) = (a * x).sin_cos();
        let (sb, cb) = (b * y).sin_cos();
        let (sc, cc) = (c * z).sin_cos();
        let grad = [
            // grad u1
            [
                Self::A * a * ca * cb * cc,
                -Self::A * b * sa * sb * cc,
                -Self::A * c * sa * cb * sc,
            ],
            // grad u2
            [
                -Self::B * a * sa * sb * cc,
                Self::B * b * ca * cb * cc,
                -Self::B * c * ca * sb * sc,
            ],
            // grad u3
            [
                -Self::c() * a * sa * cb * sc,
                -Self::c() * b * ca * sb * sc,
                Self::c() * c * ca * cb * cc,
            ],
        ];
        let grad_p = [
            a * ca * sb * sc,
            b * sa * cb * sc,
            c * sa * sb * cc,
        ];
        let advect = u[0] * grad[comp][0] + u[1] * grad[comp][1] + u[2] * grad[comp][2];
        self.eta * k2 * u[comp] + advect + grad_p[comp]
    }
}

pub fn empty_box_domain(res: (usize, usize, usize)) -> Arc<ReferenceDomain> {
    let channel = ChannelSpec::new(1.5).unwrap();
    // an obstacle too small to capture any cell center: the box stays empty
    let ob = Obstacle::new(0.01, 0.01, 2.0, 0.0, 0.0).unwrap();
    let dom = build_reference_domain(&channel, &ob, res).unwrap();
    assert_eq!(dom.n_solid, 0, "the manufactured box must be empty");
    Arc::new(dom)
}

pub fn sample_exact_state(tm: &Arc<beamflow::geometry::TransformMatrices>) -> FluidState {
    let g = tm.domain.grid;
    let mut exact = FluidState::zeros(Arc::clone(tm), 1.0);
    for i in 0..=g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                let idx = exact.idx_u(i, j, k);
                exact.u[idx] = Manufactured::velocity(g.xface_x(i), g.cell_y(j), g.cell_z(k))[0];
            }
        }
    }
    for i in 0..g.nx {
        for j in 0..=g.ny {
            for k in 0..g.nz {
                let idx = exact.idx_v(i, j, k);
                exact.v[idx] = Manufactured::velocity(g.cell_x(i), g.yface_y(j), g.cell_z(k))[1];
            }
        }
    }
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..=g.nz {
                let idx = exact.idx_w(i, j, k);
                exact.w[idx] = Manufactured::velocity(g.cell_x(i), g.cell_y(j), g.zface_z(k))[2];
            }
        }
    }
    exact
}

pub fn mms_error(res: (usize, usize, usize)) -> f64 {
    let domain = empty_box_domain(res);
    let channel = domain.channel;
    let ob = domain.obstacle;
    let cutoff = CutoffFunction::for_obstacle(&channel, &ob).unwrap();
    let grid = BeamGrid::new(9).unwrap();
    let h = BeamProfile::zero(grid, BoundaryConditionKind::Clamped);
    let tm = Arc::new(transform_matrices(&h, &cutoff, &domain).unwrap());

    let mms = Manufactured { eta: 1.0 };
    let bc = BoundaryData::custom(1.0, Manufactured::velocity);
    let force = BodyForce::from_fn(&domain.grid, |comp, x, y, z| mms.body_force(comp, x, y, z));

    let solver = FluidSolver::new(Arc::clone(&tm), bc, FluidOptions::default()).unwrap();
    // advecting state frozen at the exact solution, sampled on the faces
    let exact = sample_exact_state(&tm);
    let g = domain.grid;
    let (state, _) = solver.picard_step(&exact, Some(&force), None).unwrap();

    // volume-weighted L2 error of the velocity over all faces
    let mut err2 = 0.0;
    for (a, b) in state.u.iter().zip(&exact.u) {
        err2 += (a - b) * (a - b);
    }
    for (a, b) in state.v.iter().zip(&exact.v) {
        err2 += (a - b) * (a - b);
    }
    for (a, b) in state.w.iter().zip(&exact.w) {
        err2 += (a - b) * (a - b);
    }
    (err2 * g.cell_volume()).sqrt()
}

