//! Cell-centered reconstructions of the staggered fields and fluid-aware
//! trilinear sampling, shared by the lift quadrature and the diagnostics.

use super::FluidState;
use crate::error::{Error, Result};
use crate::geometry::ReferenceDomain;

/// Velocity averaged to cell centers; zero in solid cells.
pub fn cell_velocity(state: &FluidState) -> Vec<[f64; 3]> {
    let dom = &state.transform.domain;
    let g = dom.grid;
    let mut out = vec![[0.0; 3]; g.n_cells()];
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                if dom.is_solid(i, j, k) {
                    continue;
                }
                let c = g.cell_idx(i, j, k);
                out[c] = [
                    0.5 * (state.u[state.idx_u(i, j, k)] + state.u[state.idx_u(i + 1, j, k)]),
                    0.5 * (state.v[state.idx_v(i, j, k)] + state.v[state.idx_v(i, j + 1, k)]),
                    0.5 * (state.w[state.idx_w(i, j, k)] + state.w[state.idx_w(i, j, k + 1)]),
                ];
            }
        }
    }
    out
}

/// Velocity gradient at cell centers: grad[d][c] = d u_c / d x_d.
/// Same-direction derivatives come straight from the face differences;
/// cross derivatives use central differences of the cell means with
/// one-sided fallbacks next to the mask and the channel boundary.
pub fn cell_gradients(state: &FluidState) -> Vec<[[f64; 3]; 3]> {
    let dom = &state.transform.domain;
    let g = dom.grid;
    let h = [g.dx(), g.dy(), g.dz()];
    let means = cell_velocity(state);
    let mut out = vec![[[0.0; 3]; 3]; g.n_cells()];

    let fluid_at = |i: isize, j: isize, k: isize| -> Option<usize> {
        if i < 0 || j < 0 || k < 0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= g.nx || j >= g.ny || k >= g.nz || dom.is_solid(i, j, k) {
            return None;
        }
        Some(g.cell_idx(i, j, k))
    };

    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                if dom.is_solid(i, j, k) {
                    continue;
                }
                let cidx = g.cell_idx(i, j, k);
                let mut grad = [[0.0; 3]; 3];
                // exact same-direction differences
                grad[0][0] =
                    (state.u[state.idx_u(i + 1, j, k)] - state.u[state.idx_u(i, j, k)]) / h[0];
                grad[1][1] =
                    (state.v[state.idx_v(i, j + 1, k)] - state.v[state.idx_v(i, j, k)]) / h[1];
                grad[2][2] =
                    (state.w[state.idx_w(i, j, k + 1)] - state.w[state.idx_w(i, j, k)]) / h[2];
                // cross derivatives from cell means
                let pos = [i as isize, j as isize, k as isize];
                for d in 0..3 {
                    let mut plus = pos;
                    plus[d] += 1;
                    let mut minus = pos;
                    minus[d] -= 1;
                    let fp = fluid_at(plus[0], plus[1], plus[2]);
                    let fm = fluid_at(minus[0], minus[1], minus[2]);
                    for c in 0..3 {
                        if c == d {
                            continue;
                        }
                        grad[d][c] = match (fp, fm) {
                            (Some(p), Some(m)) => (means[p][c] - means[m][c]) / (2.0 * h[d]),
                            (Some(p), None) => (means[p][c] - means[cidx][c]) / h[d],
                            (None, Some(m)) => (means[cidx][c] - means[m][c]) / h[d],
                            (None, None) => 0.0,
                        };
                    }
                }
                out[cidx] = grad;
            }
        }
    }
    out
}

/// Trilinear interpolation stencil over cell centers with solid corners
/// replaced by the heaviest-weight fluid corner.
pub fn fluid_trilinear_stencil(
    dom: &ReferenceDomain,
    p: [f64; 3],
) -> Result<[(usize, f64); 8]> {
    let g = dom.grid;
    let h = [g.dx(), g.dy(), g.dz()];
    let lo = [g.cell_x(0), g.cell_y(0), g.cell_z(0)];
    let n = [g.nx, g.ny, g.nz];
    let mut base = [0usize; 3];
    let mut t = [0.0f64; 3];
    for d in 0..3 {
        let f = (p[d] - lo[d]) / h[d];
        let b = f.floor();
        let mut bi = b as isize;
        let mut td = f - b;
        if bi < 0 {
            bi = 0;
            td = 0.0;
        }
        if bi as usize >= n[d] - 1 {
            bi = n[d] as isize - 2;
            td = 1.0;
        }
        base[d] = bi as usize;
        t[d] = td;
    }

    let mut corners = [(0usize, 0.0f64); 8];
    let mut any_fluid = false;
    for c in 0..8 {
        let di = c & 1;
        let dj = (c >> 1) & 1;
        let dk = (c >> 2) & 1;
        let (i, j, k) = (base[0] + di, base[1] + dj, base[2] + dk);
        let wgt = (if di == 1 { t[0] } else { 1.0 - t[0] })
            * (if dj == 1 { t[1] } else { 1.0 - t[1] })
            * (if dk == 1 { t[2] } else { 1.0 - t[2] });
        corners[c] = (g.cell_idx(i, j, k), wgt);
        if dom.is_fluid(i, j, k) {
            any_fluid = true;
        }
    }
    if !any_fluid {
        return Err(Error::InterpolationOutOfDomain {
            x: p[0],
            y: p[1],
            z: p[2],
        });
    }
    // substitute solid corners by the heaviest fluid corner
    let mut best_fluid = usize::MAX;
    let mut best_w = -1.0;
    for &(idx, wgt) in &corners {
        let solid = {
            // recover (i,j,k) cheaply: compare against kinds via index
            dom_is_solid_by_index(dom, idx)
        };
        if !solid && wgt > best_w {
            best_w = wgt;
            best_fluid = idx;
        }
    }
    for c in corners.iter_mut() {
        if dom_is_solid_by_index(dom, c.0) {
            c.0 = best_fluid;
        }
    }
    Ok(corners)
}

fn dom_is_solid_by_index(dom: &ReferenceDomain, idx: usize) -> bool {
    let g = dom.grid;
    let k = idx % g.nz;
    let j = (idx / g.nz) % g.ny;
    let i = idx / (g.nz * g.ny);
    dom.is_solid(i, j, k)
}

/// Interpolate a cell-centered scalar with the fluid-aware stencil.
pub fn sample_scalar(dom: &ReferenceDomain, field: &[f64], p: [f64; 3]) -> Result<f64> {
    let st = fluid_trilinear_stencil(dom, p)?;
    Ok(st.iter().map(|&(c, w)| field[c] * w).sum())
}

/// Interpolate a cell-centered 3x3 tensor field.
pub fn sample_tensor(
    dom: &ReferenceDomain,
    field: &[[[f64; 3]; 3]],
    p: [f64; 3],
) -> Result<[[f64; 3]; 3]> {
    let st = fluid_trilinear_stencil(dom, p)?;
    let mut out = [[0.0; 3]; 3];
    for &(c, w) in &st {
        for d in 0..3 {
            for e in 0..3 {
                out[d][e] += field[c][d][e] * w;
            }
        }
    }
    Ok(out)
}
