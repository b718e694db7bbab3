//! The vertical-shear domain map phi_h(x,y,z) = (x, y, z + xi(x,z) h(y)) and
//! the matrices of the pulled-back fluid operators.

use std::sync::Arc;

use super::{CutoffFunction, ReferenceDomain};
use crate::beam::BeamProfile;
use crate::error::{Error, Result};
use crate::util::{Mat3, MAT3_IDENTITY};

/// Entries of the nontrivial Jacobian row: J = [[1,0,0],[0,1,0],[a,b,c]].
#[derive(Debug, Clone, Copy)]
pub struct ShearCoeffs {
    /// d(xi)/dx * h
    pub a: f64,
    /// xi * h'
    pub b: f64,
    /// det J = 1 + d(xi)/dz * h
    pub c: f64,
}

/// Analytic description of phi_h: the cutoff plus the displacement profile.
#[derive(Debug, Clone)]
pub struct DisplacementMap {
    pub cutoff: CutoffFunction,
    pub profile: BeamProfile,
}

impl DisplacementMap {
    pub fn new(cutoff: CutoffFunction, profile: BeamProfile) -> Self {
        DisplacementMap { cutoff, profile }
    }

    /// Shear coefficients at an arbitrary point of the reference channel.
    pub fn coeffs(&self, x: f64, y: f64, z: f64) -> ShearCoeffs {
        let (xi, dxi_dx, dxi_dz) = self.cutoff.eval(x, z);
        if xi == 0.0 && dxi_dx == 0.0 && dxi_dz == 0.0 {
            return ShearCoeffs { a: 0.0, b: 0.0, c: 1.0 };
        }
        let (h, dh) = self.profile.eval(y.clamp(-1.0, 1.0));
        ShearCoeffs {
            a: dxi_dx * h,
            b: xi * dh,
            c: 1.0 + dxi_dz * h,
        }
    }

    /// Forward map phi_h.
    pub fn map_point(&self, p: [f64; 3]) -> [f64; 3] {
        let (xi, _, _) = self.cutoff.eval(p[0], p[2]);
        let (h, _) = self.profile.eval(p[1].clamp(-1.0, 1.0));
        [p[0], p[1], p[2] + xi * h]
    }

    /// Inverse of the map in z at fixed (x, y): solves z + xi(x,z) h(y) = zm.
    /// Monotone in z whenever det J > 0, so Newton with bisection safeguard.
    pub fn invert_z(&self, x: f64, y: f64, z_mapped: f64) -> f64 {
        let (h, _) = self.profile.eval(y.clamp(-1.0, 1.0));
        if h == 0.0 {
            return z_mapped;
        }
        let f = |z: f64| {
            let (xi, _, dxi_dz) = self.cutoff.eval(x, z);
            (z + xi * h - z_mapped, 1.0 + dxi_dz * h)
        };
        let mut lo = -1.0f64;
        let mut hi = 1.0f64;
        let mut z = z_mapped.clamp(lo, hi);
        for _ in 0..60 {
            let (val, slope) = f(z);
            if val.abs() < 1e-14 {
                return z;
            }
            if val > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let newton = z - val / slope;
            z = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        z
    }
}

/// Per-cell matrices of the transformed operators.
#[derive(Debug, Clone, Copy)]
pub struct CellTransform {
    pub jacobian: Mat3,
    pub det: f64,
    /// M = (J^{-1})^T
    pub inv_t: Mat3,
    /// A = det(J) M^T M, the diffusion coefficient tensor.
    pub diffusion: Mat3,
    /// B = det(J) M, weighting the pressure gradient and the mass flux.
    pub piola: Mat3,
}

impl CellTransform {
    pub fn identity() -> Self {
        CellTransform {
            jacobian: MAT3_IDENTITY,
            det: 1.0,
            inv_t: MAT3_IDENTITY,
            diffusion: MAT3_IDENTITY,
            piola: MAT3_IDENTITY,
        }
    }

    /// Closed forms from the shear coefficients; requires c > 0.
    pub fn from_coeffs(s: ShearCoeffs) -> Self {
        let ShearCoeffs { a, b, c } = s;
        CellTransform {
            jacobian: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [a, b, c]],
            det: c,
            inv_t: [[1.0, 0.0, -a / c], [0.0, 1.0, -b / c], [0.0, 0.0, 1.0 / c]],
            diffusion: [
                [c, 0.0, -a],
                [0.0, c, -b],
                [-a, -b, (1.0 + a * a + b * b) / c],
            ],
            piola: [[c, 0.0, -a], [0.0, c, -b], [0.0, 0.0, 1.0]],
        }
    }
}

/// The map plus its per-cell matrices on a reference domain.
#[derive(Debug, Clone)]
pub struct TransformMatrices {
    pub domain: Arc<ReferenceDomain>,
    pub map: DisplacementMap,
    cells: Vec<CellTransform>,
    pub min_det: f64,
    pub max_det: f64,
}

impl TransformMatrices {
    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> &CellTransform {
        &self.cells[self.domain.grid.cell_idx(i, j, k)]
    }

    /// Shear coefficients at an arbitrary point (face centers, flux points).
    #[inline]
    pub fn coeffs_at(&self, x: f64, y: f64, z: f64) -> ShearCoeffs {
        self.map.coeffs(x, y, z)
    }

    /// True when the profile is identically zero and every matrix is the identity.
    pub fn is_identity(&self) -> bool {
        self.map.profile.values.iter().all(|&v| v == 0.0)
    }
}

const MIN_DET: f64 = 1e-9;

/// Evaluate the transform matrices of phi_h at every cell center.
pub fn transform_matrices(
    h: &BeamProfile,
    cutoff: &CutoffFunction,
    domain: &Arc<ReferenceDomain>,
) -> Result<TransformMatrices> {
    let map = DisplacementMap::new(*cutoff, h.clone());
    let g = domain.grid;
    let mut cells = Vec::with_capacity(g.n_cells());
    let mut min_det = f64::INFINITY;
    let mut max_det = f64::NEG_INFINITY;
    let mut argmin = (0usize, 0usize, 0usize);
    for i in 0..g.nx {
        let x = g.cell_x(i);
        for j in 0..g.ny {
            let y = g.cell_y(j);
            for k in 0..g.nz {
                let s = map.coeffs(x, y, g.cell_z(k));
                if s.c < min_det {
                    min_det = s.c;
                    argmin = (i, j, k);
                }
                max_det = max_det.max(s.c);
                cells.push(CellTransform::from_coeffs(s));
            }
        }
    }
    if min_det <= MIN_DET {
        return Err(Error::DegenerateJacobian {
            min_det,
            cell: argmin,
        });
    }
    Ok(TransformMatrices {
        domain: Arc::clone(domain),
        map,
        cells,
        min_det,
        max_det,
    })
}

/// phi_h applied to a point of the closed reference channel.
pub fn map_point(h: &BeamProfile, cutoff: &CutoffFunction, p: [f64; 3]) -> [f64; 3] {
    DisplacementMap::new(*cutoff, h.clone()).map_point(p)
}
