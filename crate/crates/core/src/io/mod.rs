//! Artifact emission: CSV profiles, legacy VTK fields, flat JSON summaries
//! and the hashed output manifest.

mod csv;
mod vtk;

pub use csv::{read_profile_csv, write_lift_csv, write_profile_csv};
pub use vtk::write_structured_points;

use std::fs;
use std::path::{Path, PathBuf};

use crate::beam::BeamProfile;
use crate::error::Result;
use crate::fluid::FluidState;
use crate::lift::LiftProfile;
use crate::util::{fmt_g17, fnv1a64};

/// Values of the flat JSON summary.
#[derive(Debug, Clone)]
pub enum JsonValue {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    FloatArray(Vec<f64>),
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Render an ordered flat object; floats carry 17 significant digits.
pub fn render_json(fields: &[(&str, JsonValue)]) -> String {
    let mut out = String::from("{\n");
    for (i, (key, value)) in fields.iter().enumerate() {
        out.push_str(&format!("  \"{}\": ", escape(key)));
        match value {
            JsonValue::Float(v) if !v.is_finite() => out.push_str("null"),
            JsonValue::Float(v) => out.push_str(&fmt_g17(*v)),
            JsonValue::Int(v) => out.push_str(&v.to_string()),
            JsonValue::Bool(v) => out.push_str(if *v { "true" } else { "false" }),
            JsonValue::Str(s) => out.push_str(&format!("\"{}\"", escape(s))),
            JsonValue::FloatArray(vs) => {
                out.push('[');
                for (j, v) in vs.iter().enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    if v.is_finite() {
                        out.push_str(&fmt_g17(*v));
                    } else {
                        out.push_str("null");
                    }
                }
                out.push(']');
            }
        }
        out.push_str(if i + 1 < fields.len() { ",\n" } else { "\n" });
    }
    out.push_str("}\n");
    out
}

/// Everything a run may emit; absent parts are skipped.
#[derive(Default)]
pub struct RunOutputs<'a> {
    pub summary: Vec<(&'a str, JsonValue)>,
    pub beam: Option<&'a BeamProfile>,
    pub lift: Option<&'a LiftProfile>,
    /// (header line, rows)
    pub history: Option<(&'a str, Vec<Vec<f64>>)>,
    pub fields: Option<&'a FluidState>,
}

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub fnv1a64: u64,
}

/// Write the declared file set into `out_dir` and return the manifest
/// (also written as manifest.json). Identical inputs produce byte-identical
/// files.
pub fn write_outputs(outputs: &RunOutputs<'_>, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(out_dir)?;
    let mut manifest: Vec<ManifestEntry> = Vec::new();
    let mut emit = |name: &str, content: &[u8]| -> Result<()> {
        let path: PathBuf = out_dir.join(name);
        fs::write(&path, content)?;
        manifest.push(ManifestEntry {
            name: name.to_string(),
            bytes: content.len(),
            fnv1a64: fnv1a64(content),
        });
        Ok(())
    };

    emit("summary.json", render_json(&outputs.summary).as_bytes())?;
    if let Some(beam) = outputs.beam {
        emit("beam.csv", csv::profile_csv(beam).as_bytes())?;
    }
    if let Some(lift) = outputs.lift {
        emit("lift.csv", csv::lift_csv(lift).as_bytes())?;
    }
    if let Some((header, rows)) = &outputs.history {
        let mut text = String::new();
        text.push_str(header);
        text.push('\n');
        for row in rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    text.push(',');
                }
                text.push_str(&fmt_g17(*v));
            }
            text.push('\n');
        }
        emit("history.csv", text.as_bytes())?;
    }
    if let Some(state) = outputs.fields {
        emit("fields.vtk", vtk::structured_points(state).as_bytes())?;
    }

    // manifest last, listing everything else
    let mut body = String::from("{\n  \"files\": [\n");
    for (i, e) in manifest.iter().enumerate() {
        body.push_str(&format!(
            "    {{\"name\": \"{}\", \"bytes\": {}, \"fnv1a64\": \"{:016x}\"}}{}",
            escape(&e.name),
            e.bytes,
            e.fnv1a64,
            if i + 1 < manifest.len() { ",\n" } else { "\n" }
        ));
    }
    body.push_str("  ]\n}\n");
    fs::write(out_dir.join("manifest.json"), body)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{BeamGrid, BoundaryConditionKind};

    #[test]
    fn json_renders_flat_and_escaped() {
        let s = render_json(&[
            ("gamma", JsonValue::Float(0.002)),
            ("iterations", JsonValue::Int(7)),
            ("pass", JsonValue::Bool(true)),
            ("note", JsonValue::Str("he said \"hi\"".into())),
            ("residuals", JsonValue::FloatArray(vec![1.0, 0.5])),
        ]);
        assert!(s.starts_with("{\n"));
        assert!(s.contains("\"gamma\": 2.0000000000000000e-3"));
        assert!(s.contains("\\\"hi\\\""));
        assert!(s.contains("[1.0000000000000000e0, 5.0000000000000000e-1]"));
    }

    #[test]
    fn non_finite_floats_render_as_null() {
        let s = render_json(&[("residual", JsonValue::Float(f64::NAN))]);
        assert!(s.contains("\"residual\": null"));
    }

    #[test]
    fn outputs_are_deterministic_and_hashed() {
        let grid = BeamGrid::new(11).unwrap();
        let beam = BeamProfile::from_fn(grid, BoundaryConditionKind::Clamped, |y| y * y - 1.0);
        let dir1 = std::env::temp_dir().join("beamflow_io_test_1");
        let dir2 = std::env::temp_dir().join("beamflow_io_test_2");
        let outputs = RunOutputs {
            summary: vec![("value", JsonValue::Float(1.5))],
            beam: Some(&beam),
            ..Default::default()
        };
        let m1 = write_outputs(&outputs, &dir1).unwrap();
        let m2 = write_outputs(&outputs, &dir2).unwrap();
        assert_eq!(m1.len(), 2);
        for (a, b) in m1.iter().zip(&m2) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.fnv1a64, b.fnv1a64);
        }
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
    }

    #[test]
    fn empty_outputs_manifest_lists_summary_only() {
        let dir = std::env::temp_dir().join("beamflow_io_test_empty");
        let outputs = RunOutputs {
            summary: vec![("ok", JsonValue::Bool(true))],
            ..Default::default()
        };
        let m = write_outputs(&outputs, &dir).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].name, "summary.json");
        assert!(dir.join("manifest.json").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
