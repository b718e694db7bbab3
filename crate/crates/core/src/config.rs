//! Flat key-value run configuration: parsing, defaults and validation.
//!
//! The document is line-oriented: `section.key = value`, `#` comments, blank
//! lines ignored. Unknown and duplicate keys are rejected with line numbers.

use std::collections::BTreeMap;
use std::path::Path;

use crate::beam::{BeamGrid, BoundaryConditionKind, RestoringForce};
use crate::coupling::FsiConfig;
use crate::error::{Error, Result};
use crate::fluid::{FluidOptions, InflowProfile};
use crate::geometry::{ChannelSpec, Obstacle};
use crate::lift::LiftMethod;

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub fsi: FsiConfig,
    /// Gamma list for the sweep subcommand.
    pub sweep_gammas: Vec<f64>,
    /// Uniform load value for the standalone beam solve.
    pub beam_load: f64,
    /// Whether to write the VTK field file.
    pub write_fields: bool,
    /// Node count for the constant-verification solves.
    pub verify_nodes: usize,
    pub seed: u64,
    pub threads: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "channel.r",
    "grid.nx",
    "grid.ny",
    "grid.nz",
    "obstacle.a",
    "obstacle.b",
    "obstacle.q",
    "obstacle.a_taper",
    "obstacle.b_taper",
    "beam.n_nodes",
    "beam.bc",
    "beam.force",
    "beam.stiffness",
    "beam.saturation",
    "beam.tol",
    "beam.load",
    "fluid.eta",
    "fluid.gamma",
    "fluid.profile",
    "fluid.bump",
    "fluid.nonlinear_tol",
    "fluid.linear_tol",
    "fluid.max_picard",
    "fluid.relaxation",
    "fluid.advection",
    "fluid.direct_threshold",
    "lift.method",
    "coupling.omega",
    "coupling.tol",
    "coupling.relaxation",
    "coupling.max_outer",
    "sweep.gammas",
    "verify.n_nodes",
    "output.fields",
    "run.seed",
    "run.threads",
];

struct Doc {
    entries: BTreeMap<String, (usize, String)>,
}

impl Doc {
    fn parse(text: &str) -> Result<Doc> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::ParseError {
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::ParseError {
                    line: lineno + 1,
                    message: format!("unknown key `{key}`"),
                });
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(Error::ParseError {
                    line: lineno + 1,
                    message: format!("duplicate key `{key}` (first at line {first})"),
                });
            }
            entries.insert(key, (lineno + 1, value));
        }
        Ok(Doc { entries })
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::ParseError {
                line: *line,
                message: format!("`{key}`: expected a number, got `{v}`"),
            }),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::ParseError {
                line: *line,
                message: format!("`{key}`: expected an integer, got `{v}`"),
            }),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::ParseError {
                line: *line,
                message: format!("`{key}`: expected an integer, got `{v}`"),
            }),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::ParseError {
                    line: *line,
                    message: format!("`{key}`: expected a boolean, got `{v}`"),
                }),
            },
        }
    }

    fn word(&self, key: &str, default: &str) -> (usize, String) {
        match self.entries.get(key) {
            None => (0, default.to_string()),
            Some((line, v)) => (*line, v.clone()),
        }
    }

    fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| Error::ParseError {
                        line: *line,
                        message: format!("`{key}`: expected comma-separated numbers, got `{s}`"),
                    })
                })
                .collect(),
        }
    }
}

/// Parse and validate the configuration document at `path`.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parse and validate a configuration document from memory.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let doc = Doc::parse(text)?;

    let channel = ChannelSpec::new(doc.f64("channel.r", 3.0)?)?;
    let obstacle = Obstacle::new(
        doc.f64("obstacle.a", 0.3)?,
        doc.f64("obstacle.b", 0.2)?,
        doc.f64("obstacle.q", 4.0)?,
        doc.f64("obstacle.a_taper", 0.0)?,
        doc.f64("obstacle.b_taper", 0.0)?,
    )
    .map_err(|e| Error::ValidationError {
        key: "obstacle".into(),
        message: e.to_string(),
    })?;
    if obstacle.extent_x() >= channel.half_length {
        return Err(Error::ValidationError {
            key: "obstacle.a".into(),
            message: format!(
                "x extent {:.4} must stay inside the channel half-length {:.4}",
                obstacle.extent_x(),
                channel.half_length
            ),
        });
    }
    if obstacle.extent_z() >= 1.0 {
        return Err(Error::ValidationError {
            key: "obstacle.b".into(),
            message: format!(
                "z extent {:.4} must stay strictly below the channel half-height 1",
                obstacle.extent_z()
            ),
        });
    }

    let resolution = (
        doc.usize("grid.nx", 48)?,
        doc.usize("grid.ny", 24)?,
        doc.usize("grid.nz", 24)?,
    );
    let beam_grid = BeamGrid::new(doc.usize("beam.n_nodes", 101)?)?;

    let bc_kind = match doc.word("beam.bc", "clamped") {
        (_, s) if s == "clamped" => BoundaryConditionKind::Clamped,
        (_, s) if s == "hinged" => BoundaryConditionKind::Hinged,
        (line, s) => {
            return Err(Error::ParseError {
                line,
                message: format!("`beam.bc`: expected clamped|hinged, got `{s}`"),
            })
        }
    };

    let stiffness = doc.f64("beam.stiffness", 1.0)?;
    let restoring_force = match doc.word("beam.force", "linear") {
        (_, s) if s == "zero" => RestoringForce::Zero,
        (_, s) if s == "linear" => RestoringForce::Linear { stiffness },
        (_, s) if s == "saturating" => RestoringForce::Saturating {
            stiffness,
            scale: doc.f64("beam.saturation", 0.1)?,
        },
        (line, s) => {
            return Err(Error::ParseError {
                line,
                message: format!("`beam.force`: expected zero|linear|saturating, got `{s}`"),
            })
        }
    };
    restoring_force.validate()?;

    let gamma = doc.f64("fluid.gamma", 0.002)?;
    let profile = match doc.word("fluid.profile", "symmetric") {
        (_, s) if s == "symmetric" => InflowProfile::SymmetricPoiseuille,
        (_, s) if s == "asymmetric-bump" => InflowProfile::AsymmetricBump {
            s: doc.f64("fluid.bump", 0.5)?,
        },
        (line, s) => {
            return Err(Error::ParseError {
                line,
                message: format!("`fluid.profile`: expected symmetric|asymmetric-bump, got `{s}`"),
            })
        }
    };
    crate::fluid::build_boundary_data(gamma, profile)?;

    let upwind = match doc.word("fluid.advection", "central") {
        (_, s) if s == "central" => false,
        (_, s) if s == "upwind" => true,
        (line, s) => {
            return Err(Error::ParseError {
                line,
                message: format!("`fluid.advection`: expected central|upwind, got `{s}`"),
            })
        }
    };

    let lift_method = match doc.word("lift.method", "residual") {
        (_, s) if s == "residual" => LiftMethod::ResidualBased,
        (_, s) if s == "surface" => LiftMethod::SurfaceQuadrature,
        (line, s) => {
            return Err(Error::ParseError {
                line,
                message: format!("`lift.method`: expected residual|surface, got `{s}`"),
            })
        }
    };

    let fluid = FluidOptions {
        viscosity: doc.f64("fluid.eta", 1.0)?,
        nonlinear_tol: doc.f64("fluid.nonlinear_tol", 1e-9)?,
        linear_tol: doc.f64("fluid.linear_tol", 1e-10)?,
        max_picard: doc.usize("fluid.max_picard", 50)?,
        relaxation: doc.f64("fluid.relaxation", 0.8)?,
        upwind,
        direct_threshold: doc.usize("fluid.direct_threshold", 0)?,
    };

    let fsi = FsiConfig {
        channel,
        obstacle,
        resolution,
        beam_grid,
        bc_kind,
        restoring_force,
        viscosity: fluid.viscosity,
        gamma,
        profile,
        lift_method,
        omega: doc.f64("coupling.omega", 1.25)?,
        beam_tol: doc.f64("beam.tol", 1e-10)?,
        fluid,
        coupling_tol: doc.f64("coupling.tol", 2e-8)?,
        coupling_relaxation: doc.f64("coupling.relaxation", 1.0)?,
        max_outer: doc.usize("coupling.max_outer", 40)?,
        verify_fixed_point: true,
    };
    fsi.validate()?;

    let sweep_gammas = doc.f64_list("sweep.gammas", &[0.0005, 0.001, 0.002, 0.003, 0.004])?;
    if sweep_gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ValidationError {
            key: "sweep.gammas".into(),
            message: "the gamma list must be strictly increasing".into(),
        });
    }

    let threads = doc.usize("run.threads", 1)?;
    if threads == 0 {
        return Err(Error::ValidationError {
            key: "run.threads".into(),
            message: "thread count must be at least 1".into(),
        });
    }

    Ok(RunConfig {
        fsi,
        sweep_gammas,
        beam_load: doc.f64("beam.load", 1.0)?,
        write_fields: doc.bool("output.fields", true)?,
        verify_nodes: doc.usize("verify.n_nodes", 401)?,
        seed: doc.u64("run.seed", 0)?,
        threads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.fsi.resolution, (48, 24, 24));
        assert_eq!(cfg.fsi.beam_grid.n_nodes(), 101);
        assert_eq!(cfg.fsi.gamma, 0.002);
        assert_eq!(cfg.fsi.bc_kind, BoundaryConditionKind::Clamped);
        assert_eq!(cfg.fsi.fluid.relaxation, 0.8);
        assert_eq!(cfg.beam_load, 1.0);
        assert!(cfg.write_fields);
        assert_eq!(cfg.threads, 1);
    }

    #[test]
    fn comments_and_values_parse() {
        let cfg = parse_config_str(
            "# a run\nfluid.gamma = 0.004  # inflow\nbeam.bc = hinged\n\nsweep.gammas = 0.001, 0.002\n",
        )
        .unwrap();
        assert_eq!(cfg.fsi.gamma, 0.004);
        assert_eq!(cfg.fsi.bc_kind, BoundaryConditionKind::Hinged);
        assert_eq!(cfg.sweep_gammas, vec![0.001, 0.002]);
    }

    #[test]
    fn duplicate_key_reports_line() {
        let err = parse_config_str("fluid.gamma = 0.1\nfluid.gamma = 0.2\n");
        match err {
            Err(Error::ParseError { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("duplicate"));
            }
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config_str("fluid.turbo = yes\n");
        assert!(matches!(err, Err(Error::ParseError { .. })));
    }

    #[test]
    fn out_of_range_extent_names_the_key() {
        let err = parse_config_str("obstacle.b = 1.2\n");
        match err {
            Err(Error::ValidationError { key, .. }) => assert_eq!(key, "obstacle.b"),
            other => panic!("expected ValidationError, got {other:?}"),
        }
    }

    #[test]
    fn omega_constraint_validated() {
        // omega must stay below 1/Z = 5
        let err = parse_config_str("coupling.omega = 6.0\n");
        assert!(matches!(err, Err(Error::ValidationError { .. })));
        let ok = parse_config_str("coupling.omega = 4.9\n");
        assert!(ok.is_ok());
    }

    #[test]
    fn malformed_lines_report_position() {
        let err = parse_config_str("fluid.gamma 0.1\n");
        assert!(matches!(err, Err(Error::ParseError { line: 1, .. })));
        let err = parse_config_str("fluid.gamma = abc\n");
        assert!(matches!(err, Err(Error::ParseError { line: 1, .. })));
    }

    #[test]
    fn decreasing_sweep_rejected() {
        let err = parse_config_str("sweep.gammas = 0.004, 0.002\n");
        assert!(matches!(err, Err(Error::ValidationError { .. })));
    }
}
