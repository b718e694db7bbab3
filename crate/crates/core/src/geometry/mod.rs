//! Channel geometry: the obstacle and its cross-section curves, the cutoff
//! for the vertical-shear map, the masked reference domain and the per-cell
//! transform matrices.

mod cutoff;
mod domain;
mod transform;

pub use cutoff::CutoffFunction;
pub use domain::{
    build_displaced_domain, build_reference_domain, CellKind, MacGrid, ReferenceDomain,
};
pub use transform::{
    map_point, transform_matrices, CellTransform, DisplacementMap, ShearCoeffs, TransformMatrices,
};

use crate::beam::BeamProfile;
use crate::error::{Error, Result};

/// The channel (-R, R) x (-1, 1)^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub half_length: f64,
}

impl ChannelSpec {
    pub fn new(half_length: f64) -> Result<Self> {
        if !(half_length > 1.0) {
            return Err(Error::ValidationError {
                key: "channel.r".into(),
                message: format!("half length must exceed 1, got {half_length}"),
            });
        }
        Ok(ChannelSpec { half_length })
    }
}

/// Solid spanning the channel in y, with superellipse cross-sections
/// |x/a(y)|^q + |z/b(y)|^q = 1 and smooth, even semi-axis profiles
/// a(y) = a0 (1 + a_taper y^2), b(y) = b0 (1 + b_taper y^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub a0: f64,
    pub b0: f64,
    pub exponent: f64,
    pub a_taper: f64,
    pub b_taper: f64,
}

/// Point on the cross-section surface with its local frame.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: [f64; 3],
    /// In-plane tangent (d/dpsi of the section curve), not normalized.
    pub tangent_xz: [f64; 2],
    /// Unit surface normal pointing into the solid.
    pub normal: [f64; 3],
    /// |tangent_xz|: line element per unit parameter.
    pub speed: f64,
}

impl Obstacle {
    pub fn new(a0: f64, b0: f64, exponent: f64, a_taper: f64, b_taper: f64) -> Result<Self> {
        if !(a0 > 0.0) || !(b0 > 0.0) {
            return Err(Error::GeometryError(format!(
                "semi-axes must be positive, got a0={a0}, b0={b0}"
            )));
        }
        if !(exponent >= 2.0) {
            return Err(Error::GeometryError(format!(
                "superellipse exponent must be >= 2 for a C^{{1,1}} boundary, got {exponent}"
            )));
        }
        if a_taper <= -1.0 || b_taper <= -1.0 {
            return Err(Error::GeometryError(
                "taper must keep the semi-axes positive on [-1,1]".into(),
            ));
        }
        Ok(Obstacle {
            a0,
            b0,
            exponent,
            a_taper,
            b_taper,
        })
    }

    pub fn semi_axis_x(&self, y: f64) -> f64 {
        self.a0 * (1.0 + self.a_taper * y * y)
    }

    pub fn semi_axis_z(&self, y: f64) -> f64 {
        self.b0 * (1.0 + self.b_taper * y * y)
    }

    fn semi_axis_x_dy(&self, y: f64) -> f64 {
        self.a0 * 2.0 * self.a_taper * y
    }

    fn semi_axis_z_dy(&self, y: f64) -> f64 {
        self.b0 * 2.0 * self.b_taper * y
    }

    /// Maximal x half-extent over the span (X+ = X-).
    pub fn extent_x(&self) -> f64 {
        self.a0 * (1.0 + self.a_taper.max(0.0))
    }

    /// Maximal z half-extent over the span (Z+ = Z-).
    pub fn extent_z(&self) -> f64 {
        self.b0 * (1.0 + self.b_taper.max(0.0))
    }

    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        if y.abs() > 1.0 {
            return false;
        }
        let a = self.semi_axis_x(y);
        let b = self.semi_axis_z(y);
        (x.abs() / a).powf(self.exponent) + (z.abs() / b).powf(self.exponent) <= 1.0
    }

    /// Radial extent of the section curve in the in-plane direction psi.
    pub fn radial(&self, y: f64, psi: f64) -> f64 {
        let a = self.semi_axis_x(y);
        let b = self.semi_axis_z(y);
        let q = self.exponent;
        let u = (psi.cos().abs() / a).powf(q) + (psi.sin().abs() / b).powf(q);
        u.powf(-1.0 / q)
    }

    /// d/dy of the radial extent at fixed psi.
    pub fn radial_dy(&self, y: f64, psi: f64) -> f64 {
        let a = self.semi_axis_x(y);
        let b = self.semi_axis_z(y);
        let q = self.exponent;
        let r = self.radial(y, psi);
        let ca = psi.cos().abs().powf(q);
        let cb = psi.sin().abs().powf(q);
        r.powf(q + 1.0)
            * (ca * self.semi_axis_x_dy(y) / a.powf(q + 1.0)
                + cb * self.semi_axis_z_dy(y) / b.powf(q + 1.0))
    }

    fn radial_dpsi(&self, y: f64, psi: f64) -> f64 {
        let a = self.semi_axis_x(y);
        let b = self.semi_axis_z(y);
        let q = self.exponent;
        let (s, c) = psi.sin_cos();
        let u = (c.abs() / a).powf(q) + (s.abs() / b).powf(q);
        // du/dpsi; |c|^(q-1) terms stay bounded for q >= 2
        let du = -q * c.abs().powf(q - 1.0) * c.signum() * s / a.powf(q)
            + q * s.abs().powf(q - 1.0) * s.signum() * c / b.powf(q);
        -u.powf(-1.0 / q - 1.0) * du / q
    }

    /// Surface point, in-plane tangent and inward unit normal at (y, psi).
    pub fn surface_sample(&self, y: f64, psi: f64) -> SurfaceSample {
        let (s, c) = psi.sin_cos();
        let r = self.radial(y, psi);
        let rp = self.radial_dpsi(y, psi);
        let ry = self.radial_dy(y, psi);
        let tx = rp * c - r * s;
        let tz = rp * s + r * c;
        // cross(d/dpsi, d/dy) = (-tz, r*ry, tx): in-plane part points into the solid
        let mut n = [-tz, r * ry, tx];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        for v in n.iter_mut() {
            *v /= len;
        }
        SurfaceSample {
            point: [r * c, y, r * s],
            tangent_xz: [tx, tz],
            normal: n,
            speed: (tx * tx + tz * tz).sqrt(),
        }
    }
}

/// Clearance of the displaced solid to the channel top and bottom, and the
/// collision-safety admissibility flag |h|_inf < 1 - omega * max(Z+, Z-).
#[derive(Debug, Clone, Copy)]
pub struct ClearanceReport {
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub admissible: bool,
    /// The sup-norm bound against which admissibility was decided.
    pub bound: f64,
}

pub fn clearance(h: &BeamProfile, obstacle: &Obstacle, omega: f64) -> Result<ClearanceReport> {
    let z_max = obstacle.extent_z();
    if !(omega > 1.0 && omega < 1.0 / z_max) {
        return Err(Error::ValidationError {
            key: "coupling.omega".into(),
            message: format!(
                "margin factor must satisfy 1 < omega < {:.6}, got {omega}",
                1.0 / z_max
            ),
        });
    }
    let mut top: f64 = f64::NEG_INFINITY;
    let mut bottom: f64 = f64::NEG_INFINITY;
    for (i, &hv) in h.values.iter().enumerate() {
        let y = h.grid.node(i);
        let b = obstacle.semi_axis_z(y);
        top = top.max(hv + b);
        bottom = bottom.max(b - hv);
    }
    let bound = 1.0 - omega * z_max;
    Ok(ClearanceReport {
        eps_plus: 1.0 - top,
        eps_minus: 1.0 - bottom,
        admissible: h.norm_inf() < bound,
        bound,
    })
}

/// Attachment-angle survey at the end sections and the integrability
/// exponent margin derived from it.
#[derive(Debug, Clone, Copy)]
pub struct AttachmentReport {
    pub theta_star: f64,
    pub sigma: f64,
    /// The survey is carried out on the rest configuration h = 0.
    pub evaluated_at_rest: bool,
}

/// sigma from the attachment angle: 0.9 of the admissible upper limit.
pub(crate) fn sigma_rule(theta_star: f64) -> Result<f64> {
    if !(theta_star < std::f64::consts::PI) {
        return Err(Error::GeometryError(format!(
            "attachment angle theta* = {theta_star:.6} must be strictly below pi"
        )));
    }
    let cap = if theta_star < std::f64::consts::FRAC_PI_2 {
        1.0
    } else {
        let denom = 2.0 * theta_star - std::f64::consts::PI;
        if denom <= 0.0 {
            1.0
        } else {
            ((2.0 * std::f64::consts::PI - 2.0 * theta_star) / denom).min(1.0)
        }
    };
    Ok(0.9 * cap)
}

/// Survey the angle between the section curve tangent and the end faces over
/// `n_samples` directions, at the rest configuration.
pub fn attachment_sigma(obstacle: &Obstacle, n_samples: usize) -> Result<AttachmentReport> {
    if n_samples < 64 {
        return Err(Error::ValidationError {
            key: "geometry.attachment_samples".into(),
            message: format!("need at least 64 samples, got {n_samples}"),
        });
    }
    let mut theta_star: f64 = 0.0;
    for k in 0..n_samples {
        let psi = 2.0 * std::f64::consts::PI * k as f64 / n_samples as f64;
        // slope of the radial extent toward each end face
        let toward_plus = obstacle.radial_dy(1.0, psi);
        let toward_minus = -obstacle.radial_dy(-1.0, psi);
        for slope in [toward_plus, toward_minus] {
            let theta = std::f64::consts::FRAC_PI_2 + slope.atan();
            theta_star = theta_star.max(theta);
        }
    }
    let sigma = sigma_rule(theta_star)?;
    Ok(AttachmentReport {
        theta_star,
        sigma,
        evaluated_at_rest: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{BeamGrid, BoundaryConditionKind};

    fn obstacle() -> Obstacle {
        Obstacle::new(0.3, 0.2, 4.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn channel_requires_half_length_above_one() {
        assert!(ChannelSpec::new(1.0).is_err());
        assert!(ChannelSpec::new(3.0).is_ok());
    }

    #[test]
    fn obstacle_validation() {
        assert!(Obstacle::new(0.0, 0.2, 4.0, 0.0, 0.0).is_err());
        assert!(Obstacle::new(0.3, 0.2, 1.5, 0.0, 0.0).is_err());
        assert!(Obstacle::new(0.3, 0.2, 2.0, -1.5, 0.0).is_err());
    }

    #[test]
    fn radial_matches_axes_and_contains_is_consistent() {
        let ob = obstacle();
        assert!((ob.radial(0.0, 0.0) - 0.3).abs() < 1e-14);
        assert!((ob.radial(0.0, std::f64::consts::FRAC_PI_2) - 0.2).abs() < 1e-14);
        assert!(ob.contains(0.29, 0.0, 0.0));
        assert!(!ob.contains(0.31, 0.0, 0.0));
        assert!(!ob.contains(0.0, 1.2, 0.0));
        // boundary points sit on the unit level set
        for k in 0..32 {
            let psi = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
            let s = ob.surface_sample(0.3, psi);
            let a = ob.semi_axis_x(0.3);
            let b = ob.semi_axis_z(0.3);
            let lvl = (s.point[0].abs() / a).powf(4.0) + (s.point[2].abs() / b).powf(4.0);
            assert!((lvl - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_normal_is_inward_and_unit() {
        let ob = obstacle();
        for k in 0..64 {
            let psi = 2.0 * std::f64::consts::PI * (k as f64 + 0.3) / 64.0;
            let s = ob.surface_sample(0.1, psi);
            let n2 = s.normal.iter().map(|v| v * v).sum::<f64>();
            assert!((n2 - 1.0).abs() < 1e-12);
            // stepping inward along n must land inside the solid
            let eps = 1e-4;
            let p = [
                s.point[0] + eps * s.normal[0],
                s.point[1] + eps * s.normal[1],
                s.point[2] + eps * s.normal[2],
            ];
            assert!(ob.contains(p[0], p[1], p[2]), "psi = {psi}");
            // tangent is orthogonal to the in-plane normal part
            let dot = s.normal[0] * s.tangent_xz[0] + s.normal[2] * s.tangent_xz[1];
            assert!(dot.abs() < 1e-12);
        }
    }

    #[test]
    fn clearance_at_rest_and_scaling_monotonicity() {
        let ob = obstacle();
        let grid = BeamGrid::new(21).unwrap();
        let h0 = crate::beam::BeamProfile::zero(grid.clone(), BoundaryConditionKind::Clamped);
        let rep = clearance(&h0, &ob, 1.25).unwrap();
        assert!((rep.eps_plus - 0.8).abs() < 1e-14);
        assert!((rep.eps_minus - 0.8).abs() < 1e-14);
        assert!(rep.admissible);

        // omega outside (1, 1/Z) is rejected
        assert!(clearance(&h0, &ob, 1.0).is_err());
        assert!(clearance(&h0, &ob, 6.0).is_err());

        // h == 0.8 with Z = 0.2, omega = 1.25: bound = 0.75, inadmissible
        let h8 = crate::beam::BeamProfile::from_fn(grid.clone(), BoundaryConditionKind::Clamped, |_| 0.8);
        let rep8 = clearance(&h8, &ob, 1.25).unwrap();
        assert!(!rep8.admissible);

        // scaling h by t in [0,1] preserves admissibility
        let ht = crate::beam::BeamProfile::from_fn(grid, BoundaryConditionKind::Clamped, |y| {
            0.7 * (1.0 - y * y)
        });
        let full = clearance(&ht, &ob, 1.25).unwrap();
        assert!(full.admissible);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let scaled = crate::beam::BeamProfile::new(
                ht.grid.clone(),
                ht.values.iter().map(|v| v * t).collect(),
                ht.bc,
            )
            .unwrap();
            assert!(clearance(&scaled, &ob, 1.25).unwrap().admissible);
        }
    }

    #[test]
    fn constant_sections_attach_orthogonally() {
        let rep = attachment_sigma(&obstacle(), 64).unwrap();
        assert!((rep.theta_star - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((rep.sigma - 0.9).abs() < 1e-12);
        assert!(rep.evaluated_at_rest);
    }

    #[test]
    fn widened_ends_reach_two_thirds_pi() {
        // a'(1) = 1/sqrt(3) gives theta* = pi/2 + pi/6 = 2pi/3; the exponent rule
        // then caps sigma at 0.9 * min{2, 1}.
        let a0 = 0.25;
        let taper = 1.0 / (3.0f64.sqrt() * 2.0 * a0);
        let ob = Obstacle::new(a0, 0.15, 2.0, taper, 0.0).unwrap();
        let rep = attachment_sigma(&ob, 128).unwrap();
        assert!(
            (rep.theta_star - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-10,
            "theta* = {}",
            rep.theta_star
        );
        assert!((rep.sigma - 0.9).abs() < 1e-12);
    }

    #[test]
    fn flat_attachment_is_rejected() {
        assert!(sigma_rule(std::f64::consts::PI).is_err());
        assert!(sigma_rule(3.2).is_err());
        // near-pi angles yield a small positive sigma
        let s = sigma_rule(3.0).unwrap();
        assert!(s > 0.0 && s < 0.1);
    }

    #[test]
    fn attachment_needs_enough_samples() {
        assert!(attachment_sigma(&obstacle(), 32).is_err());
    }
}
