//! Tensor-product C^2 cutoff localizing the vertical shear of the domain map.
//!
//! Each factor equals 1 on the obstacle projection, falls to 0 through a
//! quintic smoothstep band occupying the outer quarter of the gap up to the
//! homothetic box, and stays 0 beyond it.

use super::{ChannelSpec, Obstacle};
use crate::error::{Error, Result};

const HOMOTHETY_MARGIN: f64 = 0.05;
const BAND_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy)]
struct Profile {
    core: f64,
    outer: f64,
    band_lo: f64,
    width: f64,
}

impl Profile {
    fn eval(&self, t: f64) -> (f64, f64) {
        let s = t.abs();
        if s <= self.band_lo {
            (1.0, 0.0)
        } else if s >= self.outer {
            (0.0, 0.0)
        } else {
            let u = (s - self.band_lo) / self.width;
            let v = 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
            let dv = -30.0 * u * u * (1.0 - u) * (1.0 - u) / self.width;
            (v, dv * t.signum())
        }
    }

    fn max_slope(&self) -> f64 {
        1.875 / self.width
    }
}

/// xi(x, z) = p_x(x) p_z(z), equal to 1 on the obstacle projection box and 0
/// outside its homothetic enlargement.
#[derive(Debug, Clone, Copy)]
pub struct CutoffFunction {
    px: Profile,
    pz: Profile,
    /// Homothety factor of the outer box relative to the projection box.
    pub lambda: f64,
}

impl CutoffFunction {
    /// Size the cutoff for an obstacle inside a channel: the outer box is the
    /// largest homothetic copy of the projection box that keeps a 0.05 margin
    /// to the channel cross-section.
    pub fn for_obstacle(channel: &ChannelSpec, obstacle: &Obstacle) -> Result<Self> {
        let core_x = obstacle.extent_x();
        let core_z = obstacle.extent_z();
        let lambda_x = (channel.half_length - HOMOTHETY_MARGIN) / core_x;
        let lambda_z = (1.0 - HOMOTHETY_MARGIN) / core_z;
        let lambda = lambda_x.min(lambda_z);
        if lambda <= 1.0 + 1e-9 {
            return Err(Error::GeometryError(format!(
                "no room for the cutoff transition: homothety factor {lambda:.4} <= 1 \
                 (obstacle too close to the channel boundary)"
            )));
        }
        let make = |core: f64| -> Profile {
            let outer = lambda * core;
            let width = BAND_FRACTION * (outer - core);
            Profile {
                core,
                outer,
                band_lo: outer - width,
                width,
            }
        };
        Ok(CutoffFunction {
            px: make(core_x),
            pz: make(core_z),
            lambda,
        })
    }

    /// Value and gradient: (xi, d xi/dx, d xi/dz).
    pub fn eval(&self, x: f64, z: f64) -> (f64, f64, f64) {
        let (vx, dx) = self.px.eval(x);
        let (vz, dz) = self.pz.eval(z);
        (vx * vz, dx * vz, vx * dz)
    }

    /// Bound on |d xi / dx|.
    pub fn max_slope_x(&self) -> f64 {
        self.px.max_slope()
    }

    /// Bound on |d xi / dz|.
    pub fn max_slope_z(&self) -> f64 {
        self.pz.max_slope()
    }

    /// Distance from the projection box to the start of the transition band;
    /// the plateau {xi = 1} extends this far beyond the obstacle.
    pub fn plateau_margin(&self) -> f64 {
        (self.px.band_lo - self.px.core).min(self.pz.band_lo - self.pz.core)
    }

    /// z where |d xi/dz| is maximal (band midpoint), used by arithmetic tests.
    pub fn steepest_z(&self) -> f64 {
        self.pz.band_lo + 0.5 * self.pz.width
    }

    /// Width of the z transition band.
    pub fn band_width_z(&self) -> f64 {
        self.pz.width
    }

    pub fn outer_x(&self) -> f64 {
        self.px.outer
    }

    pub fn outer_z(&self) -> f64 {
        self.pz.outer
    }
}
