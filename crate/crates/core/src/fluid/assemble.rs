//! MAC discretization of the transformed equations: DOF classification,
//! diffusion/advection stencils, Piola-weighted divergence and its adjoint
//! pressure gradient.
//!
//! Velocity components live on the faces normal to their direction. Tangential
//! Dirichlet data enters through quadratic wall ghosts; faces touching the
//! obstacle are constrained to the no-slip value. y-faces whose neighborhood
//! (including one cell in z) touches the solid are constrained as well, which
//! makes the discrete divergence telescope exactly through the staircase.

use std::sync::Arc;

use super::{BodyForce, BoundaryData, BoundaryRegion, FluidState};
use crate::error::{Error, Result};
use crate::geometry::{CellTransform, MacGrid, TransformMatrices};
use crate::util::csr::Csr;

pub(crate) const FIXED: i32 = -1;

#[cfg(test)]
thread_local! {
    /// Count of nested ghost substitutions (corner closures), test-visible.
    pub(crate) static DOUBLE_GHOSTS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

#[inline]
pub(crate) fn face_dims(comp: usize, g: &MacGrid) -> (usize, usize, usize) {
    match comp {
        0 => (g.nx + 1, g.ny, g.nz),
        1 => (g.nx, g.ny + 1, g.nz),
        2 => (g.nx, g.ny, g.nz + 1),
        _ => unreachable!(),
    }
}

#[inline]
pub(crate) fn face_count(comp: usize, g: &MacGrid) -> usize {
    let (a, b, c) = face_dims(comp, g);
    a * b * c
}

#[inline]
pub(crate) fn face_index(comp: usize, g: &MacGrid, i: usize, j: usize, k: usize) -> usize {
    let (_, nj, nk) = face_dims(comp, g);
    (i * nj + j) * nk + k
}

pub(crate) fn face_position(comp: usize, g: &MacGrid, i: usize, j: usize, k: usize) -> [f64; 3] {
    face_position_i(comp, g, i as isize, j as isize, k as isize)
}

/// Face position from signed indices; the coordinate formulas extrapolate
/// smoothly, which ghost probes beyond the lattice rely on.
pub(crate) fn face_position_i(comp: usize, g: &MacGrid, i: isize, j: isize, k: isize) -> [f64; 3] {
    let cell = |n: usize, m: isize| (2.0 * m as f64 + 1.0 - n as f64) / n as f64;
    let face = |n: usize, m: isize| (2.0 * m as f64 - n as f64) / n as f64;
    match comp {
        0 => [
            g.half_length * face(g.nx, i),
            cell(g.ny, j),
            cell(g.nz, k),
        ],
        1 => [
            g.half_length * cell(g.nx, i),
            face(g.ny, j),
            cell(g.nz, k),
        ],
        2 => [
            g.half_length * cell(g.nx, i),
            cell(g.ny, j),
            face(g.nz, k),
        ],
        _ => unreachable!(),
    }
}

/// DOF classification: per-face unknown ids and the pressure cell map.
#[derive(Debug, Clone)]
pub(crate) struct Dofs {
    pub grid: MacGrid,
    pub status: [Vec<i32>; 3],
    pub n_vel: usize,
    pub positions: Vec<(u8, usize, usize, usize)>,
    pub n_p: usize,
    pub p_cells: Vec<(usize, usize, usize)>,
    pub comp_offset: [usize; 4],
}

impl Dofs {
    #[inline]
    pub fn global_face(&self, comp: usize, i: usize, j: usize, k: usize) -> usize {
        self.comp_offset[comp] + face_index(comp, &self.grid, i, j, k)
    }

    pub fn n_faces(&self) -> usize {
        self.comp_offset[3]
    }
}

/// Sampled Dirichlet values on every fixed face (free faces carry 0).
#[derive(Debug, Clone)]
pub(crate) struct SampledBc {
    pub faces: [Vec<f64>; 3],
    /// Discrete fluxes after normalization (diagnostics).
    #[allow(dead_code)]
    pub inlet_flux: f64,
    #[allow(dead_code)]
    pub outlet_flux: f64,
}

impl SampledBc {
    pub fn concat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            self.faces[0].len() + self.faces[1].len() + self.faces[2].len(),
        );
        v.extend_from_slice(&self.faces[0]);
        v.extend_from_slice(&self.faces[1]);
        v.extend_from_slice(&self.faces[2]);
        v
    }
}

/// A momentum-operator row expressed over global face ids plus the constant
/// contributed by wall-ghost boundary values.
#[derive(Debug, Clone, Default)]
pub(crate) struct FaceRow {
    pub entries: Vec<(u32, f64)>,
    pub ghost_const: f64,
}

/// Everything fixed for a given (transform, boundary data, viscosity):
/// classification, diffusion operator, divergence and gradient.
pub(crate) struct Discretization {
    pub transform: Arc<TransformMatrices>,
    pub bc_data: BoundaryData,
    pub upwind: bool,
    pub dofs: Dofs,
    pub bc: SampledBc,
    /// Diffusion over velocity unknowns (viscosity included).
    pub k_diff: Csr,
    /// Momentum RHS contribution from fixed faces and ghosts through k_diff.
    pub rhs_diff: Vec<f64>,
    /// Divergence over all faces (rows = fluid cells).
    pub d_full: Csr,
    /// Divergence restricted to velocity unknowns.
    pub d_free: Csr,
    /// Pressure gradient G = -(D_free)^T.
    pub grad: Csr,
    /// -(D^T P) evaluator over all faces, cached transpose of d_full.
    pub d_full_t: Csr,
    /// Continuity RHS: -(D restricted to fixed faces) * bc.
    pub rhs_cont: Vec<f64>,
}

pub(crate) fn classify(transform: &TransformMatrices) -> Dofs {
    let dom = &transform.domain;
    let g = dom.grid;
    let solid = |i: isize, j: isize, k: isize| -> bool {
        if i < 0 || j < 0 || k < 0 {
            return false;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= g.nx || j >= g.ny || k >= g.nz {
            return false;
        }
        dom.is_solid(i, j, k)
    };

    let mut status: [Vec<i32>; 3] = [
        vec![0; face_count(0, &g)],
        vec![0; face_count(1, &g)],
        vec![0; face_count(2, &g)],
    ];
    let mut positions = Vec::new();
    let mut n_vel = 0usize;

    // u faces
    for i in 0..=g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                let idx = face_index(0, &g, i, j, k);
                let fixed = i == 0
                    || i == g.nx
                    || solid(i as isize - 1, j as isize, k as isize)
                    || solid(i as isize, j as isize, k as isize);
                status[0][idx] = if fixed {
                    FIXED
                } else {
                    positions.push((0u8, i, j, k));
                    n_vel += 1;
                    (n_vel - 1) as i32
                };
            }
        }
    }
    // v faces: constrained when any adjacent cell or its z-neighbors are solid
    for i in 0..g.nx {
        for j in 0..=g.ny {
            for k in 0..g.nz {
                let idx = face_index(1, &g, i, j, k);
                let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                let mut fixed = j == 0 || j == g.ny;
                for dj in [-1isize, 0] {
                    for dk in [-1isize, 0, 1] {
                        if solid(ii, jj + dj, kk + dk) {
                            fixed = true;
                        }
                    }
                }
                status[1][idx] = if fixed {
                    FIXED
                } else {
                    positions.push((1u8, i, j, k));
                    n_vel += 1;
                    (n_vel - 1) as i32
                };
            }
        }
    }
    // w faces
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..=g.nz {
                let idx = face_index(2, &g, i, j, k);
                let fixed = k == 0
                    || k == g.nz
                    || solid(i as isize, j as isize, k as isize - 1)
                    || solid(i as isize, j as isize, k as isize);
                status[2][idx] = if fixed {
                    FIXED
                } else {
                    positions.push((2u8, i, j, k));
                    n_vel += 1;
                    (n_vel - 1) as i32
                };
            }
        }
    }

    let mut p_cells = Vec::new();
    let mut n_p = 0usize;
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                if dom.is_fluid(i, j, k) {
                    p_cells.push((i, j, k));
                    n_p += 1;
                }
            }
        }
    }

    let nf0 = face_count(0, &g);
    let nf1 = face_count(1, &g);
    let nf2 = face_count(2, &g);
    Dofs {
        grid: g,
        status,
        n_vel,
        positions,
        n_p,
        p_cells,
        comp_offset: [0, nf0, nf0 + nf1, nf0 + nf1 + nf2],
    }
}

/// Sample Dirichlet values on all fixed faces. For the standard profiles the
/// inlet and outlet normal components are rescaled so that their discrete
/// fluxes equal gamma exactly.
pub(crate) fn sample_bc(dofs: &Dofs, bc: &BoundaryData) -> SampledBc {
    let g = dofs.grid;
    let area = g.dy() * g.dz();
    let mut faces: [Vec<f64>; 3] = [
        vec![0.0; face_count(0, &g)],
        vec![0.0; face_count(1, &g)],
        vec![0.0; face_count(2, &g)],
    ];

    // inlet/outlet u faces
    let mut inlet_flux = 0.0;
    let mut outlet_flux = 0.0;
    for j in 0..g.ny {
        for k in 0..g.nz {
            let (y, z) = (g.cell_y(j), g.cell_z(k));
            let vi = bc.velocity(BoundaryRegion::Inlet, g.xface_x(0), y, z)[0];
            let vo = bc.velocity(BoundaryRegion::Outlet, g.xface_x(g.nx), y, z)[0];
            faces[0][face_index(0, &g, 0, j, k)] = vi;
            faces[0][face_index(0, &g, g.nx, j, k)] = vo;
            inlet_flux += vi * area;
            outlet_flux += vo * area;
        }
    }
    if !bc.is_custom() {
        // normalize the discrete fluxes to gamma
        let scale_i = if inlet_flux != 0.0 { bc.gamma / inlet_flux } else { 0.0 };
        let scale_o = if outlet_flux != 0.0 { bc.gamma / outlet_flux } else { 0.0 };
        let mut new_i = 0.0;
        let mut new_o = 0.0;
        for j in 0..g.ny {
            for k in 0..g.nz {
                let fi = face_index(0, &g, 0, j, k);
                let fo = face_index(0, &g, g.nx, j, k);
                faces[0][fi] *= scale_i;
                faces[0][fo] *= scale_o;
                new_i += faces[0][fi] * area;
                new_o += faces[0][fo] * area;
            }
        }
        inlet_flux = new_i;
        outlet_flux = new_o;
    }

    // custom data may impose nonzero values on the remaining box faces
    if bc.is_custom() {
        for i in 0..g.nx {
            for k in 0..g.nz {
                let x = g.cell_x(i);
                let z = g.cell_z(k);
                faces[1][face_index(1, &g, i, 0, k)] =
                    bc.velocity(BoundaryRegion::Wall, x, g.yface_y(0), z)[1];
                faces[1][face_index(1, &g, i, g.ny, k)] =
                    bc.velocity(BoundaryRegion::Wall, x, g.yface_y(g.ny), z)[1];
            }
        }
        for i in 0..g.nx {
            for j in 0..g.ny {
                let x = g.cell_x(i);
                let y = g.cell_y(j);
                faces[2][face_index(2, &g, i, j, 0)] =
                    bc.velocity(BoundaryRegion::Wall, x, y, g.zface_z(0))[2];
                faces[2][face_index(2, &g, i, j, g.nz)] =
                    bc.velocity(BoundaryRegion::Wall, x, y, g.zface_z(g.nz))[2];
            }
        }
    }

    SampledBc {
        faces,
        inlet_flux,
        outlet_flux,
    }
}

/// Row accumulator resolving wall ghosts into interior faces plus boundary
/// constants.
pub(crate) struct RowBuilder<'a> {
    dofs: &'a Dofs,
    bc_data: &'a BoundaryData,
    half_length: f64,
    pub row: FaceRow,
}

impl<'a> RowBuilder<'a> {
    pub fn new(dofs: &'a Dofs, bc_data: &'a BoundaryData) -> Self {
        RowBuilder {
            dofs,
            bc_data,
            half_length: dofs.grid.half_length,
            row: FaceRow::default(),
        }
    }

    pub fn clear(&mut self) {
        self.row.entries.clear();
        self.row.ghost_const = 0.0;
    }

    /// Boundary velocity component at a (possibly extrapolated) wall point.
    fn wall_value(&self, comp: usize, x: f64, y: f64, z: f64) -> f64 {
        let region = if comp != 0 && (x - (-self.half_length)).abs() < 1e-12 {
            BoundaryRegion::Inlet
        } else if comp != 0 && (x - self.half_length).abs() < 1e-12 {
            BoundaryRegion::Outlet
        } else {
            BoundaryRegion::Wall
        };
        self.bc_data.velocity(region, x, y, z)[comp]
    }

    /// Add weight * phi(comp; i, j, k), resolving out-of-lattice tangential
    /// indices through the quadratic wall ghost.
    pub fn add_face(&mut self, comp: usize, i: isize, j: isize, k: isize, w: f64, depth: usize) {
        if w == 0.0 {
            return;
        }
        assert!(depth <= 2, "ghost recursion too deep at ({comp}; {i},{j},{k})");
        #[cfg(test)]
        if depth == 1 {
            DOUBLE_GHOSTS.with(|c| c.set(c.get() + 1));
        }
        let g = self.dofs.grid;
        let (ni, nj, nk) = face_dims(comp, &g);
        let (ni, nj, nk) = (ni as isize, nj as isize, nk as isize);

        // tangential out-of-range directions (normal stays in range by construction)
        let idx = [i, j, k];
        for t in 0..3 {
            if t == comp {
                debug_assert!(idx[t] >= 0 && idx[t] < [ni, nj, nk][t]);
                continue;
            }
            let n_t = [ni, nj, nk][t];
            if idx[t] == -1 || idx[t] == n_t {
                // wall plane coordinate in direction t
                let side_hi = idx[t] == n_t;
                let wall_coord = match t {
                    0 => {
                        if side_hi {
                            g.half_length
                        } else {
                            -g.half_length
                        }
                    }
                    _ => {
                        if side_hi {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                // positions of the two interior faces entering the ghost
                let inner0 = if side_hi { n_t - 1 } else { 0 };
                let inner1 = if side_hi { n_t - 2 } else { 1 };
                // wall point: the face position with coordinate t replaced
                let mut probe = idx;
                probe[t] = inner0;
                let pos = face_position_i(comp, &g, probe[0], probe[1], probe[2]);
                let (mut x, mut y, mut z) = (pos[0], pos[1], pos[2]);
                match t {
                    0 => x = wall_coord,
                    1 => y = wall_coord,
                    2 => z = wall_coord,
                    _ => unreachable!(),
                }
                let bc_val = self.wall_value(comp, x, y, z);
                self.row.ghost_const += w * (8.0 / 3.0) * bc_val;
                let mut p0 = idx;
                p0[t] = inner0;
                let mut p1 = idx;
                p1[t] = inner1;
                self.add_face(comp, p0[0], p0[1], p0[2], -2.0 * w, depth + 1);
                self.add_face(comp, p1[0], p1[1], p1[2], w / 3.0, depth + 1);
                return;
            }
            debug_assert!(idx[t] >= 0 && idx[t] < n_t, "face ({comp}; {i},{j},{k})");
        }

        let gid = self
            .dofs
            .global_face(comp, idx[0] as usize, idx[1] as usize, idx[2] as usize);
        self.row.entries.push((gid as u32, w));
    }
}

/// Shear-dependent diffusion tensor at an arbitrary point.
#[inline]
fn diffusion_at(transform: &TransformMatrices, x: f64, y: f64, z: f64) -> [[f64; 3]; 3] {
    let s = transform.coeffs_at(x, y, z);
    if s.a == 0.0 && s.b == 0.0 && s.c == 1.0 {
        crate::util::MAT3_IDENTITY
    } else {
        CellTransform::from_coeffs(s).diffusion
    }
}

/// Build the diffusion row (times viscosity) for face (comp; i,j,k) over
/// global face ids.
pub(crate) fn diffusion_row(
    builder: &mut RowBuilder<'_>,
    transform: &TransformMatrices,
    viscosity: f64,
    comp: usize,
    i: usize,
    j: usize,
    k: usize,
) {
    let g = transform.domain.grid;
    let h = [g.dx(), g.dy(), g.dz()];
    let pos = face_position(comp, &g, i, j, k);
    let idx = [i as isize, j as isize, k as isize];

    for d in 0..3 {
        for side in [1.0f64, -1.0] {
            // flux point s = pos + side * h_d/2 e_d; outer weight -eta*side/h_d
            let mut s = pos;
            s[d] += side * 0.5 * h[d];
            let a = diffusion_at(transform, s[0], s[1], s[2]);
            let outer = -viscosity * side / h[d];
            // normal part: A[d][d] * dphi/dd at s
            let mut nb = idx;
            nb[d] += side as isize;
            let wdd = a[d][d] * outer * side / h[d];
            builder.add_face(comp, nb[0], nb[1], nb[2], wdd, 0);
            builder.add_face(comp, idx[0], idx[1], idx[2], -wdd, 0);
            // cross parts: A[d][e] * dphi/de at s, e != d
            for e in 0..3 {
                if e == d || a[d][e] == 0.0 {
                    continue;
                }
                let we = a[d][e] * outer / (4.0 * h[e]);
                for col in [idx, nb] {
                    let mut cp = col;
                    cp[e] += 1;
                    builder.add_face(comp, cp[0], cp[1], cp[2], we, 0);
                    let mut cm = col;
                    cm[e] -= 1;
                    builder.add_face(comp, cm[0], cm[1], cm[2], -we, 0);
                }
            }
        }
    }
}

/// Mass-flux (B^T W) sampled on the natural faces of each component.
pub(crate) fn mass_flux(transform: &TransformMatrices, state: &FluidState) -> [Vec<f64>; 3] {
    let g = transform.domain.grid;
    let mut mf: [Vec<f64>; 3] = [
        vec![0.0; face_count(0, &g)],
        vec![0.0; face_count(1, &g)],
        vec![0.0; face_count(2, &g)],
    ];
    // x and y fluxes scale by det J at the face
    for i in 0..=g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                let p = face_position(0, &g, i, j, k);
                let c = transform.coeffs_at(p[0], p[1], p[2]).c;
                let f = face_index(0, &g, i, j, k);
                mf[0][f] = c * state.u[f];
            }
        }
    }
    for i in 0..g.nx {
        for j in 0..=g.ny {
            for k in 0..g.nz {
                let p = face_position(1, &g, i, j, k);
                let c = transform.coeffs_at(p[0], p[1], p[2]).c;
                let f = face_index(1, &g, i, j, k);
                mf[1][f] = c * state.v[f];
            }
        }
    }
    // z flux carries the shear cross terms
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..=g.nz {
                let f = face_index(2, &g, i, j, k);
                let mut val = state.w[f];
                if k > 0 && k < g.nz {
                    let p = face_position(2, &g, i, j, k);
                    let s = transform.coeffs_at(p[0], p[1], p[2]);
                    if s.a != 0.0 {
                        let um = 0.25
                            * (state.u[face_index(0, &g, i, j, k - 1)]
                                + state.u[face_index(0, &g, i + 1, j, k - 1)]
                                + state.u[face_index(0, &g, i, j, k)]
                                + state.u[face_index(0, &g, i + 1, j, k)]);
                        val -= s.a * um;
                    }
                    if s.b != 0.0 {
                        let vm = 0.25
                            * (state.v[face_index(1, &g, i, j, k - 1)]
                                + state.v[face_index(1, &g, i, j + 1, k - 1)]
                                + state.v[face_index(1, &g, i, j, k)]
                                + state.v[face_index(1, &g, i, j + 1, k)]);
                        val -= s.b * vm;
                    }
                }
                mf[2][f] = val;
            }
        }
    }
    mf
}

/// Advection row for face (comp; i,j,k): (B^T W) . grad phi, frozen at the
/// mass flux `mf` of the advecting state.
pub(crate) fn advection_row(
    builder: &mut RowBuilder<'_>,
    dofs: &Dofs,
    mf: &[Vec<f64>; 3],
    upwind: bool,
    comp: usize,
    i: usize,
    j: usize,
    k: usize,
) {
    let g = dofs.grid;
    let h = [g.dx(), g.dy(), g.dz()];
    let idx = [i as isize, j as isize, k as isize];

    for d in 0..3 {
        // advecting flux component d at this face
        let m = if d == comp {
            mf[comp][face_index(comp, &g, i, j, k)]
        } else {
            // average the 4 d-faces of the two cells sharing this face
            let mut cells: [[isize; 3]; 2] = [idx, idx];
            cells[0][comp] -= 1; // face sits between cell idx-1 and cell idx in its direction
            let mut sum = 0.0;
            for cell in cells {
                for s in 0..2 {
                    let mut fq = cell;
                    fq[d] += s as isize;
                    sum += mf[d][face_index(d, &g, fq[0] as usize, fq[1] as usize, fq[2] as usize)];
                }
            }
            0.25 * sum
        };
        if m == 0.0 {
            continue;
        }
        if upwind {
            let up: isize = if m > 0.0 { -1 } else { 1 };
            let mut nb = idx;
            nb[d] += up;
            let w = m.abs() / h[d];
            builder.add_face(comp, idx[0], idx[1], idx[2], w, 0);
            builder.add_face(comp, nb[0], nb[1], nb[2], -w, 0);
        } else {
            let w = m / (2.0 * h[d]);
            let mut np = idx;
            np[d] += 1;
            let mut nm = idx;
            nm[d] -= 1;
            builder.add_face(comp, np[0], np[1], np[2], w, 0);
            builder.add_face(comp, nm[0], nm[1], nm[2], -w, 0);
        }
    }
}

/// Divergence row of a fluid cell over global face ids.
fn divergence_row(transform: &TransformMatrices, g: &MacGrid, dofs: &Dofs, i: usize, j: usize, k: usize) -> Vec<(u32, f64)> {
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(22);
    let (dx, dy, dz) = (g.dx(), g.dy(), g.dz());

    // x flux: det J * u on the two x faces
    for (fi, sgn) in [(i, -1.0), (i + 1, 1.0)] {
        let p = face_position(0, g, fi, j, k);
        let c = transform.coeffs_at(p[0], p[1], p[2]).c;
        row.push((dofs.global_face(0, fi, j, k) as u32, sgn * c / dx));
    }
    // y flux
    for (fj, sgn) in [(j, -1.0), (j + 1, 1.0)] {
        let p = face_position(1, g, i, fj, k);
        let c = transform.coeffs_at(p[0], p[1], p[2]).c;
        row.push((dofs.global_face(1, i, fj, k) as u32, sgn * c / dy));
    }
    // z flux: w minus the shear cross terms
    for (fk, sgn) in [(k, -1.0), (k + 1, 1.0)] {
        row.push((dofs.global_face(2, i, j, fk) as u32, sgn / dz));
        if fk > 0 && fk < g.nz {
            let p = face_position(2, g, i, j, fk);
            let s = transform.coeffs_at(p[0], p[1], p[2]);
            if s.a != 0.0 {
                let w = -s.a * 0.25 * sgn / dz;
                row.push((dofs.global_face(0, i, j, fk - 1) as u32, w));
                row.push((dofs.global_face(0, i + 1, j, fk - 1) as u32, w));
                row.push((dofs.global_face(0, i, j, fk) as u32, w));
                row.push((dofs.global_face(0, i + 1, j, fk) as u32, w));
            }
            if s.b != 0.0 {
                let w = -s.b * 0.25 * sgn / dz;
                row.push((dofs.global_face(1, i, j, fk - 1) as u32, w));
                row.push((dofs.global_face(1, i, j + 1, fk - 1) as u32, w));
                row.push((dofs.global_face(1, i, j, fk) as u32, w));
                row.push((dofs.global_face(1, i, j + 1, fk) as u32, w));
            }
        }
    }
    row
}

impl Discretization {
    pub fn build(
        transform: Arc<TransformMatrices>,
        bc_data: BoundaryData,
        viscosity: f64,
        upwind: bool,
    ) -> Result<Self> {
        if !(viscosity > 0.0) {
            return Err(Error::ValidationError {
                key: "fluid.eta".into(),
                message: format!("viscosity must be positive, got {viscosity}"),
            });
        }
        let g = transform.domain.grid;
        // the cutoff plateau must cover the first face ring around the solid
        let needed = 0.5 * g.dx().max(g.dz());
        let margin = transform.map.cutoff.plateau_margin();
        if transform.domain.n_solid > 0 && margin < needed {
            return Err(Error::GeometryError(format!(
                "cutoff plateau margin {margin:.4} is below half a cell ({needed:.4}); \
                 refine the grid or enlarge the cutoff"
            )));
        }

        let dofs = classify(&transform);
        let bc = sample_bc(&dofs, &bc_data);

        // diffusion rows
        let mut k_rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(dofs.n_vel);
        let mut rhs_diff = vec![0.0; dofs.n_vel];
        {
            let mut builder = RowBuilder::new(&dofs, &bc_data);
            let bc_concat = bc.concat();
            let face_status = face_status_concat(&dofs);
            for (row_id, &(comp, i, j, k)) in dofs.positions.iter().enumerate() {
                builder.clear();
                diffusion_row(&mut builder, &transform, viscosity, comp as usize, i, j, k);
                let (entries, rhs) = split_row(&builder.row, &face_status, &bc_concat);
                k_rows.push(entries);
                rhs_diff[row_id] = rhs;
            }
        }
        let k_diff = Csr::from_rows(dofs.n_vel, k_rows);

        // divergence rows over all faces
        let mut d_rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(dofs.n_p);
        for &(i, j, k) in &dofs.p_cells {
            d_rows.push(divergence_row(&transform, &g, &dofs, i, j, k));
        }
        let d_full = Csr::from_rows(dofs.n_faces(), d_rows);
        let d_full_t = d_full.transpose();

        // split columns into free/fixed
        let face_status = face_status_concat(&dofs);
        let bc_concat = bc.concat();
        let mut rhs_cont = vec![0.0; dofs.n_p];
        let mut dfree_rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(dofs.n_p);
        for r in 0..dofs.n_p {
            let mut row = Vec::new();
            for e in d_full.row_ptr[r] as usize..d_full.row_ptr[r + 1] as usize {
                let c = d_full.cols[e] as usize;
                let v = d_full.vals[e];
                match face_status[c] {
                    FIXED => rhs_cont[r] -= v * bc_concat[c],
                    dof => row.push((dof as u32, v)),
                }
            }
            dfree_rows.push(row);
        }
        let d_free = Csr::from_rows(dofs.n_vel, dfree_rows);
        let mut grad = d_free.transpose();
        for v in grad.vals.iter_mut() {
            *v = -*v;
        }

        Ok(Discretization {
            transform,
            bc_data,
            upwind,
            dofs,
            bc,
            k_diff,
            rhs_diff,
            d_full,
            d_free,
            grad,
            d_full_t,
            rhs_cont,
        })
    }

    /// Assemble the frozen advection operator and its fixed-face RHS for the
    /// given advecting state.
    pub fn advection(&self, advecting: &FluidState) -> (Csr, Vec<f64>) {
        let mf = mass_flux(&self.transform, advecting);
        let bc_concat = self.bc.concat();
        let face_status = face_status_concat(&self.dofs);
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(self.dofs.n_vel);
        let mut rhs = vec![0.0; self.dofs.n_vel];
        let mut builder = RowBuilder::new(&self.dofs, &self.bc_data);
        for (row_id, &(comp, i, j, k)) in self.dofs.positions.iter().enumerate() {
            builder.clear();
            advection_row(&mut builder, &self.dofs, &mf, self.upwind, comp as usize, i, j, k);
            let (entries, r) = split_row(&builder.row, &face_status, &bc_concat);
            rows.push(entries);
            rhs[row_id] = r;
        }
        (Csr::from_rows(self.dofs.n_vel, rows), rhs)
    }

    /// Gather the free-face values of a state into the unknown vector.
    pub fn gather(&self, state: &FluidState) -> Vec<f64> {
        let mut x = vec![0.0; self.dofs.n_vel];
        for (id, &(comp, i, j, k)) in self.dofs.positions.iter().enumerate() {
            let f = face_index(comp as usize, &self.dofs.grid, i, j, k);
            x[id] = match comp {
                0 => state.u[f],
                1 => state.v[f],
                _ => state.w[f],
            };
        }
        x
    }

    /// Scatter unknowns into a state, writing bc values on fixed faces.
    pub fn scatter(&self, x: &[f64], gamma: f64) -> FluidState {
        let mut state = FluidState::zeros(Arc::clone(&self.transform), gamma);
        state.u.copy_from_slice(&self.bc.faces[0]);
        state.v.copy_from_slice(&self.bc.faces[1]);
        state.w.copy_from_slice(&self.bc.faces[2]);
        for (id, &(comp, i, j, k)) in self.dofs.positions.iter().enumerate() {
            let f = face_index(comp as usize, &self.dofs.grid, i, j, k);
            match comp {
                0 => state.u[f] = x[id],
                1 => state.v[f] = x[id],
                _ => state.w[f] = x[id],
            }
        }
        state
    }

    /// Momentum RHS for a given body force (free rows).
    pub fn momentum_rhs(&self, body_force: Option<&BodyForce>) -> Vec<f64> {
        let mut rhs = self.rhs_diff.clone();
        if let Some(bf) = body_force {
            for (id, &(comp, i, j, k)) in self.dofs.positions.iter().enumerate() {
                let f = face_index(comp as usize, &self.dofs.grid, i, j, k);
                rhs[id] += match comp {
                    0 => bf.u[f],
                    1 => bf.v[f],
                    _ => bf.w[f],
                };
            }
        }
        rhs
    }

    /// Divergence of a full state (all faces, bc included) at fluid cells.
    pub fn divergence(&self, state: &FluidState) -> Vec<f64> {
        let mut faces = Vec::with_capacity(self.dofs.n_faces());
        faces.extend_from_slice(&state.u);
        faces.extend_from_slice(&state.v);
        faces.extend_from_slice(&state.w);
        let mut out = vec![0.0; self.dofs.n_p];
        self.d_full.matvec(&faces, &mut out);
        out
    }

    /// -(D^T p) over all faces: the pressure-gradient term of the momentum
    /// residual at every face.
    pub fn pressure_gradient_full(&self, pressure_cells: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.dofs.n_p];
        for (dof, &(i, j, k)) in self.dofs.p_cells.iter().enumerate() {
            p[dof] = pressure_cells[self.dofs.grid.cell_idx(i, j, k)];
        }
        let mut out = vec![0.0; self.dofs.n_faces()];
        self.d_full_t.matvec(&p, &mut out);
        for v in out.iter_mut() {
            *v = -*v;
        }
        out
    }
}

pub(crate) fn face_status_concat(dofs: &Dofs) -> Vec<i32> {
    let mut s = Vec::with_capacity(dofs.n_faces());
    s.extend_from_slice(&dofs.status[0]);
    s.extend_from_slice(&dofs.status[1]);
    s.extend_from_slice(&dofs.status[2]);
    s
}

/// Split a face-id row into unknown entries and the RHS constant
/// (fixed faces and ghost constants move to the right-hand side).
fn split_row(row: &FaceRow, face_status: &[i32], bc_concat: &[f64]) -> (Vec<(u32, f64)>, f64) {
    let mut entries = Vec::with_capacity(row.entries.len());
    let mut rhs = -row.ghost_const;
    for &(gid, w) in &row.entries {
        match face_status[gid as usize] {
            FIXED => rhs -= w * bc_concat[gid as usize],
            dof => entries.push((dof as u32, w)),
        }
    }
    (entries, rhs)
}
