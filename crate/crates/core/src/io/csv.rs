//! Two-column profile CSV and the three-column lift CSV.

use std::path::Path;

use crate::beam::{BeamGrid, BeamProfile, BoundaryConditionKind};
use crate::error::{Error, Result};
use crate::lift::LiftProfile;
use crate::util::fmt_g17;

pub(crate) fn profile_csv(profile: &BeamProfile) -> String {
    let mut out = String::from("y,value\n");
    for (i, v) in profile.values.iter().enumerate() {
        out.push_str(&fmt_g17(profile.grid.node(i)));
        out.push(',');
        out.push_str(&fmt_g17(*v));
        out.push('\n');
    }
    out
}

pub(crate) fn lift_csv(lift: &LiftProfile) -> String {
    let mut out = String::from("y,lift,extended\n");
    for (i, v) in lift.values.iter().enumerate() {
        out.push_str(&fmt_g17(lift.grid.node(i)));
        out.push(',');
        out.push_str(&fmt_g17(*v));
        out.push(',');
        out.push_str(if lift.extended[i] { "1" } else { "0" });
        out.push('\n');
    }
    out
}

pub fn write_profile_csv(profile: &BeamProfile, path: &Path) -> Result<()> {
    std::fs::write(path, profile_csv(profile))?;
    Ok(())
}

pub fn write_lift_csv(lift: &LiftProfile, path: &Path) -> Result<()> {
    std::fs::write(path, lift_csv(lift))?;
    Ok(())
}

/// Read a two-column (y, value) CSV back into a profile; the node set must be
/// a valid uniform beam grid.
pub fn read_profile_csv(path: &Path, bc: BoundaryConditionKind) -> Result<BeamProfile> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let y: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or(Error::ParseError {
                line: lineno + 1,
                message: "expected a numeric y column".into(),
            })?;
        let v: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or(Error::ParseError {
                line: lineno + 1,
                message: "expected a numeric value column".into(),
            })?;
        ys.push(y);
        values.push(v);
    }
    let grid = BeamGrid::new(values.len())?;
    for (i, y) in ys.iter().enumerate() {
        if (y - grid.node(i)).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "node {i} at y={y} does not match the uniform grid"
            )));
        }
    }
    BeamProfile::new(grid, values, bc)
}
