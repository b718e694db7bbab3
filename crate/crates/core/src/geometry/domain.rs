//! Structured MAC grid over the channel and the obstacle mask.

use super::{ChannelSpec, Obstacle};
use crate::beam::BeamProfile;
use crate::error::{Error, Result};

/// Staggered grid over (-R, R) x (-1, 1)^2: pressure at cell centers,
/// velocity components on the faces normal to their direction.
///
/// Coordinates come from integer-symmetric formulas so mirrored indices map
/// to bit-exact negated coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub half_length: f64,
}

impl MacGrid {
    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        2.0 / self.ny as f64
    }
    pub fn dz(&self) -> f64 {
        2.0 / self.nz as f64
    }
    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy() * self.dz()
    }
    pub fn min_spacing(&self) -> f64 {
        self.dx().min(self.dy()).min(self.dz())
    }

    pub fn cell_x(&self, i: usize) -> f64 {
        self.half_length * (2.0 * i as f64 + 1.0 - self.nx as f64) / self.nx as f64
    }
    pub fn cell_y(&self, j: usize) -> f64 {
        (2.0 * j as f64 + 1.0 - self.ny as f64) / self.ny as f64
    }
    pub fn cell_z(&self, k: usize) -> f64 {
        (2.0 * k as f64 + 1.0 - self.nz as f64) / self.nz as f64
    }

    pub fn xface_x(&self, i: usize) -> f64 {
        self.half_length * (2.0 * i as f64 - self.nx as f64) / self.nx as f64
    }
    pub fn yface_y(&self, j: usize) -> f64 {
        (2.0 * j as f64 - self.ny as f64) / self.ny as f64
    }
    pub fn zface_z(&self, k: usize) -> f64 {
        (2.0 * k as f64 - self.nz as f64) / self.nz as f64
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn cell_idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Fluid,
    Solid,
}

/// The channel grid with its obstacle mask and connectivity classification.
#[derive(Debug, Clone)]
pub struct ReferenceDomain {
    pub grid: MacGrid,
    pub channel: ChannelSpec,
    pub obstacle: Obstacle,
    kinds: Vec<CellKind>,
    pub n_solid: usize,
}

impl ReferenceDomain {
    #[inline]
    pub fn kind(&self, i: usize, j: usize, k: usize) -> CellKind {
        self.kinds[self.grid.cell_idx(i, j, k)]
    }

    #[inline]
    pub fn is_solid(&self, i: usize, j: usize, k: usize) -> bool {
        self.kinds[self.grid.cell_idx(i, j, k)] == CellKind::Solid
    }

    #[inline]
    pub fn is_fluid(&self, i: usize, j: usize, k: usize) -> bool {
        self.kinds[self.grid.cell_idx(i, j, k)] == CellKind::Fluid
    }

    pub fn n_fluid(&self) -> usize {
        self.grid.n_cells() - self.n_solid
    }

    pub fn solid_volume_fraction(&self) -> f64 {
        self.n_solid as f64 / self.grid.n_cells() as f64
    }

    /// Whether the mask is mirror-symmetric in z.
    pub fn is_z_symmetric(&self) -> bool {
        let g = self.grid;
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz / 2 {
                    if self.kinds[g.cell_idx(i, j, k)] != self.kinds[g.cell_idx(i, j, g.nz - 1 - k)]
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Fluid cells adjacent (face-wise) to at least one solid cell.
    pub fn obstacle_boundary_cells(&self) -> Vec<(usize, usize, usize)> {
        let g = self.grid;
        let mut out = Vec::new();
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    if self.is_solid(i, j, k) {
                        continue;
                    }
                    let mut near = false;
                    if i > 0 && self.is_solid(i - 1, j, k) {
                        near = true;
                    }
                    if i + 1 < g.nx && self.is_solid(i + 1, j, k) {
                        near = true;
                    }
                    if j > 0 && self.is_solid(i, j - 1, k) {
                        near = true;
                    }
                    if j + 1 < g.ny && self.is_solid(i, j + 1, k) {
                        near = true;
                    }
                    if k > 0 && self.is_solid(i, j, k - 1) {
                        near = true;
                    }
                    if k + 1 < g.nz && self.is_solid(i, j, k + 1) {
                        near = true;
                    }
                    if near {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }
}

fn build_with_mask(
    channel: &ChannelSpec,
    obstacle: &Obstacle,
    resolution: (usize, usize, usize),
    inside: impl Fn(f64, f64, f64) -> bool,
) -> Result<ReferenceDomain> {
    let (nx, ny, nz) = resolution;
    if nx < 8 || ny < 8 || nz < 8 {
        return Err(Error::ValidationError {
            key: "grid".into(),
            message: format!("resolution must be at least 8 per axis, got {nx}x{ny}x{nz}"),
        });
    }
    if obstacle.extent_x() >= channel.half_length {
        return Err(Error::ObstacleOutOfBounds(format!(
            "x extent {:.4} reaches the inlet/outlet at {:.4}",
            obstacle.extent_x(),
            channel.half_length
        )));
    }
    if obstacle.extent_z() >= 1.0 {
        return Err(Error::ObstacleOutOfBounds(format!(
            "z extent {:.4} reaches the channel top/bottom",
            obstacle.extent_z()
        )));
    }

    let grid = MacGrid {
        nx,
        ny,
        nz,
        half_length: channel.half_length,
    };
    let mut kinds = vec![CellKind::Fluid; grid.n_cells()];
    let mut n_solid = 0usize;
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                if inside(grid.cell_x(i), grid.cell_y(j), grid.cell_z(k)) {
                    kinds[grid.cell_idx(i, j, k)] = CellKind::Solid;
                    n_solid += 1;
                }
            }
        }
    }

    let domain = ReferenceDomain {
        grid,
        channel: *channel,
        obstacle: *obstacle,
        kinds,
        n_solid,
    };
    check_connected(&domain)?;
    Ok(domain)
}

/// Classify the grid against the rest obstacle.
pub fn build_reference_domain(
    channel: &ChannelSpec,
    obstacle: &Obstacle,
    resolution: (usize, usize, usize),
) -> Result<ReferenceDomain> {
    build_with_mask(channel, obstacle, resolution, |x, y, z| {
        obstacle.contains(x, y, z)
    })
}

/// Classify the grid against the vertically displaced obstacle; used by the
/// physical-domain cross-check of the transformed solver.
pub fn build_displaced_domain(
    channel: &ChannelSpec,
    obstacle: &Obstacle,
    displacement: &BeamProfile,
    resolution: (usize, usize, usize),
) -> Result<ReferenceDomain> {
    build_with_mask(channel, obstacle, resolution, |x, y, z| {
        let (h, _) = displacement.eval(y.clamp(-1.0, 1.0));
        obstacle.contains(x, y, z - h)
    })
}

/// Flood fill from the inlet slab: every fluid cell must be reachable.
fn check_connected(domain: &ReferenceDomain) -> Result<()> {
    let g = domain.grid;
    let mut seen = vec![false; g.n_cells()];
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for j in 0..g.ny {
        for k in 0..g.nz {
            if domain.is_fluid(0, j, k) {
                seen[g.cell_idx(0, j, k)] = true;
                stack.push((0, j, k));
            }
        }
    }
    let mut reached = stack.len();
    while let Some((i, j, k)) = stack.pop() {
        let visit = |i2: usize, j2: usize, k2: usize,
                         seen: &mut Vec<bool>,
                         stack: &mut Vec<(usize, usize, usize)>,
                         reached: &mut usize| {
            let idx = g.cell_idx(i2, j2, k2);
            if !seen[idx] && domain.is_fluid(i2, j2, k2) {
                seen[idx] = true;
                *reached += 1;
                stack.push((i2, j2, k2));
            }
        };
        if i > 0 {
            visit(i - 1, j, k, &mut seen, &mut stack, &mut reached);
        }
        if i + 1 < g.nx {
            visit(i + 1, j, k, &mut seen, &mut stack, &mut reached);
        }
        if j > 0 {
            visit(i, j - 1, k, &mut seen, &mut stack, &mut reached);
        }
        if j + 1 < g.ny {
            visit(i, j + 1, k, &mut seen, &mut stack, &mut reached);
        }
        if k > 0 {
            visit(i, j, k - 1, &mut seen, &mut stack, &mut reached);
        }
        if k + 1 < g.nz {
            visit(i, j, k + 1, &mut seen, &mut stack, &mut reached);
        }
    }
    if reached != domain.n_fluid() {
        return Err(Error::GeometryError(format!(
            "fluid region is disconnected: {} of {} cells reachable from the inlet",
            reached,
            domain.n_fluid()
        )));
    }
    Ok(())
}
