//! Sup-norm embedding constant of the bending form and the fourth-order norm
//! equivalence probe.
//!
//! The sharp discrete constant is the square root of the Green-function
//! diagonal of the bilaplacian: for each node x0 the profile maximizing
//! h(x0) under a unit bending norm is the Riesz representer of point
//! evaluation, obtained from a single linear solve.

use super::{beam_norms, random_profile, BeamGrid, BeamProfile, BoundaryConditionKind};
use crate::error::{Error, Result};
use crate::util::banded::BandedMatrix;
use crate::util::Rng;

#[derive(Debug, Clone)]
pub struct EmbeddingReport {
    pub s_discrete: f64,
    pub s_bound: f64,
    pub maximizer: BeamProfile,
}

#[derive(Debug, Clone, Copy)]
pub struct NormEquivalence {
    pub c_lower: f64,
    pub c_upper: f64,
    pub counterexample_rejected: bool,
}

/// Upper bound for the embedding constant: sqrt(2)/2 for clamped ends,
/// 4 sqrt(2)/3 for hinged ends.
pub fn embedding_bound(bc: BoundaryConditionKind) -> f64 {
    match bc {
        BoundaryConditionKind::Clamped => std::f64::consts::SQRT_2 / 2.0,
        BoundaryConditionKind::Hinged => 4.0 * std::f64::consts::SQRT_2 / 3.0,
    }
}

/// Symmetric positive-definite matrix of the discrete bending form
/// sum_j w_j d_j(h)^2 over the interior unknowns, with reflection ghosts.
fn bending_form(grid: &BeamGrid, bc: BoundaryConditionKind) -> BandedMatrix {
    let n = grid.n_nodes();
    let m = n - 2;
    let dy = grid.spacing();
    let inv_d2 = 1.0 / (dy * dy);
    let mut k = BandedMatrix::zeros(m, 2, 2);

    // Row j of the stencil matrix B (d = B u): contributions w_j B_j^T B_j.
    // Interior rows j = 1..n-2 touch nodes j-1, j, j+1 with (1, -2, 1)/dy^2.
    // The endpoint rows use the reflection ghost: clamped d_0 = 2 h_1 / dy^2,
    // hinged d_0 = 0.
    let mut accumulate = |cols: &[(isize, f64)], weight: f64| {
        for &(ci, cv) in cols {
            for &(cj, cw) in cols {
                if ci >= 0 && cj >= 0 && (ci as usize) < m && (cj as usize) < m {
                    k.add(ci as usize, cj as usize, weight * cv * cw);
                }
            }
        }
    };

    for j in 1..n - 1 {
        let cols = [
            (j as isize - 2, inv_d2),
            (j as isize - 1, -2.0 * inv_d2),
            (j as isize, inv_d2),
        ];
        accumulate(&cols, dy);
    }
    if bc == BoundaryConditionKind::Clamped {
        // endpoint curvature rows, trapezoid weight dy/2
        accumulate(&[(0, 2.0 * inv_d2)], 0.5 * dy);
        accumulate(&[(m as isize - 1, 2.0 * inv_d2)], 0.5 * dy);
    }
    k
}

/// Sharp discrete embedding constant and the profile attaining it.
///
/// For every interior node x0 the constrained maximum of h(x0) over unit
/// bending norm equals sqrt(e_{x0}^T K^{-1} e_{x0}); the overall constant is
/// the maximum over nodes.
pub fn embedding_constant(
    bc: BoundaryConditionKind,
    grid: &BeamGrid,
) -> Result<EmbeddingReport> {
    let n = grid.n_nodes();
    let m = n - 2;
    let form = bending_form(grid, bc);
    let lu = form
        .factor()
        .map_err(|_| Error::SingularOperator("discrete bending form is not invertible".into()))?;

    let mut best = -1.0;
    let mut best_node = 0usize;
    let mut best_repr: Vec<f64> = Vec::new();
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        lu.solve(&mut e);
        let gkk = e[k];
        if !(gkk > 0.0) {
            return Err(Error::SingularOperator(format!(
                "Green diagonal non-positive at node {}",
                k + 1
            )));
        }
        let s = gkk.sqrt();
        if s > best {
            best = s;
            best_node = k;
            best_repr = e;
        }
    }

    // normalize the representer to unit bending norm: h = K^{-1} e / sqrt(G)
    let mut values = vec![0.0; n];
    for k in 0..m {
        values[k + 1] = best_repr[k] / best;
    }
    let maximizer = BeamProfile::new(grid.clone(), values, bc)?;
    debug_assert!((maximizer.values[best_node + 1] - best).abs() < 1e-9 * best.max(1.0));

    Ok(EmbeddingReport {
        s_discrete: best,
        s_bound: embedding_bound(bc),
        maximizer,
    })
}

/// True when the nodal profile is compatible with the end conditions of the
/// fourth-order space: zero endpoint values plus h' = 0 (clamped) or
/// h'' = 0 (hinged), checked with one-sided differences.
pub fn satisfies_end_conditions(profile: &BeamProfile) -> bool {
    let h = &profile.values;
    let n = h.len();
    let dy = profile.grid.spacing();
    let scale = profile.norm_inf().max(1e-12);
    let tol = 1e-3 * scale.max(1.0);
    if h[0].abs() > tol || h[n - 1].abs() > tol {
        return false;
    }
    match profile.bc {
        BoundaryConditionKind::Clamped => {
            let dl = (-25.0 * h[0] + 48.0 * h[1] - 36.0 * h[2] + 16.0 * h[3] - 3.0 * h[4])
                / (12.0 * dy);
            let dr = (25.0 * h[n - 1] - 48.0 * h[n - 2] + 36.0 * h[n - 3] - 16.0 * h[n - 4]
                + 3.0 * h[n - 5])
                / (12.0 * dy);
            dl.abs() <= tol && dr.abs() <= tol
        }
        BoundaryConditionKind::Hinged => {
            let ddl = (2.0 * h[0] - 5.0 * h[1] + 4.0 * h[2] - h[3]) / (dy * dy);
            let ddr = (2.0 * h[n - 1] - 5.0 * h[n - 2] + 4.0 * h[n - 3] - h[n - 4]) / (dy * dy);
            ddl.abs() <= tol && ddr.abs() <= tol
        }
    }
}

/// Observed bounds of |h|_{H4,discrete} / |h''''|_2 over random smooth samples
/// satisfying the end conditions; also verifies that the quadratic bubble
/// 1 - y^2 is rejected from the space under both end conditions.
pub fn norm_equivalence_check(
    bc: BoundaryConditionKind,
    grid: &BeamGrid,
    n_samples: usize,
) -> Result<NormEquivalence> {
    if n_samples < 10 {
        return Err(Error::ValidationError {
            key: "n_samples".into(),
            message: format!("need at least 10 samples, got {n_samples}"),
        });
    }
    let mut rng = Rng::new(0x5eed_b0a7);
    let mut c_lower = f64::INFINITY;
    let mut c_upper: f64 = 0.0;
    let mut accepted = 0usize;
    while accepted < n_samples {
        let h = random_profile(grid, bc, 1.0, &mut rng);
        let norms = beam_norms(&h);
        if norms.norm_h4 < 1e-9 {
            continue;
        }
        let full_h4 = full_h4_norm(&h);
        let ratio = full_h4 / norms.norm_h4;
        c_lower = c_lower.min(ratio);
        c_upper = c_upper.max(ratio);
        accepted += 1;
    }

    // h = 1 - y^2 has zero fourth-difference seminorm but fails h'(+-1) = 0
    // and h''(+-1) = 0, so it must be rejected from the space for both kinds.
    let parabola_c = BeamProfile::from_fn(grid.clone(), BoundaryConditionKind::Clamped, |y| {
        1.0 - y * y
    });
    let parabola_h = BeamProfile::from_fn(grid.clone(), BoundaryConditionKind::Hinged, |y| {
        1.0 - y * y
    });
    let counterexample_rejected =
        !satisfies_end_conditions(&parabola_c) && !satisfies_end_conditions(&parabola_h);

    Ok(NormEquivalence {
        c_lower,
        c_upper,
        counterexample_rejected,
    })
}

/// Discrete full H^4 norm: L2 norms of h and central differences up to the
/// fourth derivative, composed in quadrature.
fn full_h4_norm(h: &BeamProfile) -> f64 {
    let n = h.n_nodes();
    let dy = h.grid.spacing();
    let v = &h.values;

    let mut first = vec![0.0; n];
    first[0] = (v[1] - v[0]) / dy;
    first[n - 1] = (v[n - 1] - v[n - 2]) / dy;
    for j in 1..n - 1 {
        first[j] = (v[j + 1] - v[j - 1]) / (2.0 * dy);
    }
    let second = h.second_differences();
    let mut third = vec![0.0; n];
    third[0] = (second[1] - second[0]) / dy;
    third[n - 1] = (second[n - 1] - second[n - 2]) / dy;
    for j in 1..n - 1 {
        third[j] = (second[j + 1] - second[j - 1]) / (2.0 * dy);
    }
    let fourth = h.fourth_differences();

    let l2 = |vals: &[f64]| -> f64 {
        let mut s = 0.5 * (vals[0] * vals[0] + vals[n - 1] * vals[n - 1]);
        for x in &vals[1..n - 1] {
            s += x * x;
        }
        s * dy
    };
    (l2(v) + l2(&first) + l2(&second) + l2(&third) + l2(&fourth)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_constant_matches_green_diagonal() {
        // G(0,0) = L^3/192 = 1/24 for the clamped span of length 2.
        let grid = BeamGrid::new(401).unwrap();
        let rep = embedding_constant(BoundaryConditionKind::Clamped, &grid).unwrap();
        let sharp = (1.0f64 / 24.0).sqrt();
        assert!(
            (rep.s_discrete - sharp).abs() / sharp < 0.01,
            "s = {}, sharp = {sharp}",
            rep.s_discrete
        );
        assert!(rep.s_discrete < rep.s_bound);
        assert!((rep.s_bound - 0.70710678).abs() < 1e-6);
    }

    #[test]
    fn hinged_constant_matches_green_diagonal() {
        // G(0,0) = L^3/48 = 1/6 for the hinged span of length 2.
        let grid = BeamGrid::new(401).unwrap();
        let rep = embedding_constant(BoundaryConditionKind::Hinged, &grid).unwrap();
        let sharp = (1.0f64 / 6.0).sqrt();
        assert!(
            (rep.s_discrete - sharp).abs() / sharp < 0.01,
            "s = {}, sharp = {sharp}",
            rep.s_discrete
        );
        assert!(rep.s_discrete < rep.s_bound);
        assert!((rep.s_bound - 1.88561808).abs() < 1e-6);
    }

    #[test]
    fn maximizer_attains_the_constant_with_unit_norm() {
        let grid = BeamGrid::new(101).unwrap();
        let rep = embedding_constant(BoundaryConditionKind::Clamped, &grid).unwrap();
        let norms = beam_norms(&rep.maximizer);
        assert!((norms.norm_h - 1.0).abs() < 2e-2, "bending norm {}", norms.norm_h);
        assert!((norms.norm_inf - rep.s_discrete).abs() < 1e-9);
    }

    #[test]
    fn refinement_converges_at_second_order() {
        let coarse = embedding_constant(
            BoundaryConditionKind::Clamped,
            &BeamGrid::new(101).unwrap(),
        )
        .unwrap()
        .s_discrete;
        let mid = embedding_constant(
            BoundaryConditionKind::Clamped,
            &BeamGrid::new(201).unwrap(),
        )
        .unwrap()
        .s_discrete;
        let fine = embedding_constant(
            BoundaryConditionKind::Clamped,
            &BeamGrid::new(401).unwrap(),
        )
        .unwrap()
        .s_discrete;
        let sharp = (1.0f64 / 24.0).sqrt();
        let e1 = (coarse - sharp).abs();
        let e2 = (mid - sharp).abs();
        let e3 = (fine - sharp).abs();
        assert!(e2 < e1 && e3 < e2, "errors not decreasing: {e1} {e2} {e3}");
        assert!(e1 / e2 > 2.5, "halving gain {}", e1 / e2);
    }

    #[test]
    fn norm_equivalence_bounds_and_counterexample() {
        let grid = BeamGrid::new(201).unwrap();
        for bc in [BoundaryConditionKind::Clamped, BoundaryConditionKind::Hinged] {
            let eq = norm_equivalence_check(bc, &grid, 100).unwrap();
            assert!(eq.c_lower >= 1.0 - 1e-9, "c_lower = {}", eq.c_lower);
            assert!(eq.c_upper.is_finite());
            assert!(eq.counterexample_rejected);
        }
    }

    #[test]
    fn bubble_quartic_ratio_is_finite_and_at_least_one() {
        let grid = BeamGrid::new(201).unwrap();
        let h = BeamProfile::from_fn(grid, BoundaryConditionKind::Clamped, |y| {
            (1.0 - y * y).powi(2)
        });
        let norms = beam_norms(&h);
        let ratio = full_h4_norm(&h) / norms.norm_h4;
        assert!(ratio.is_finite() && ratio >= 1.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let grid = BeamGrid::new(41).unwrap();
        assert!(norm_equivalence_check(BoundaryConditionKind::Clamped, &grid, 5).is_err());
    }
}
