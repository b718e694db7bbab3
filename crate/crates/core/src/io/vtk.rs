//! Legacy ASCII VTK structured-points writer: cell-centered velocity,
//! pressure and the obstacle mask as point data on the cell-center lattice.

use std::path::Path;

use crate::error::Result;
use crate::fluid::{fields, FluidState};
use crate::util::fmt_g17;

pub(crate) fn structured_points(state: &FluidState) -> String {
    let dom = &state.transform.domain;
    let g = dom.grid;
    let n = g.n_cells();
    let velocity = fields::cell_velocity(state);

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("channel flow past an elastic beam\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    out.push_str(&format!("DIMENSIONS {} {} {}\n", g.nx, g.ny, g.nz));
    out.push_str(&format!(
        "ORIGIN {} {} {}\n",
        fmt_g17(g.cell_x(0)),
        fmt_g17(g.cell_y(0)),
        fmt_g17(g.cell_z(0))
    ));
    out.push_str(&format!(
        "SPACING {} {} {}\n",
        fmt_g17(g.dx()),
        fmt_g17(g.dy()),
        fmt_g17(g.dz())
    ));
    out.push_str(&format!("POINT_DATA {n}\n"));

    // x varies fastest in the legacy layout
    out.push_str("SCALARS pressure double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.push_str(&fmt_g17(state.pressure[g.cell_idx(i, j, k)]));
                out.push('\n');
            }
        }
    }
    out.push_str("VECTORS velocity double\n");
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let v = velocity[g.cell_idx(i, j, k)];
                out.push_str(&format!("{} {} {}\n", fmt_g17(v[0]), fmt_g17(v[1]), fmt_g17(v[2])));
            }
        }
    }
    out.push_str("SCALARS mask int 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.push_str(if dom.is_solid(i, j, k) { "1\n" } else { "0\n" });
            }
        }
    }
    out
}

pub fn write_structured_points(state: &FluidState, path: &Path) -> Result<()> {
    std::fs::write(path, structured_points(state))?;
    Ok(())
}
