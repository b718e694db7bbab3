//! Discrete beam operator, damped-Newton equilibrium solve and the energy
//! functional.

use super::{BeamGrid, BeamProfile, BoundaryConditionKind, RestoringForce};
use crate::error::{Error, Result};
use crate::util::banded::BandedMatrix;
use crate::util::norm_inf;

const NEWTON_CAP: usize = 200;

/// Assemble the fourth-difference operator on the interior nodes
/// (unknowns h_1 .. h_{n-2}; endpoint values are zero). Boundary rows fold in
/// the quartic-exact ghost closures for the given end condition.
pub(crate) fn beam_operator(grid: &BeamGrid, bc: BoundaryConditionKind) -> BandedMatrix {
    let n = grid.n_nodes();
    let m = n - 2;
    let d4 = grid.spacing().powi(4);
    let mut k = BandedMatrix::zeros(m, 2, 2);
    // closure coefficients for the first interior row over (h_1, h_2, h_3)
    let edge: [f64; 3] = match bc {
        BoundaryConditionKind::Clamped => [12.0, -6.0, 4.0 / 3.0],
        BoundaryConditionKind::Hinged => [60.0 / 11.0, -48.0 / 11.0, 12.0 / 11.0],
    };
    for (c, &v) in edge.iter().enumerate() {
        k.add(0, c, v / d4);
        k.add(m - 1, m - 1 - c, v / d4);
    }
    let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];
    for r in 1..m - 1 {
        for (s, &w) in stencil.iter().enumerate() {
            // column in full node numbering: (r+1) - 2 + s; interior index shifts by 1
            let col = r as isize - 3 + s as isize + 1;
            if col >= 0 && (col as usize) < m {
                k.add(r, col as usize, w / d4);
            }
        }
    }
    k
}

/// Solve h'''' + f(h) = g with the requested end conditions.
///
/// Returns the unique discrete equilibrium; the residual of the interior
/// fourth-difference stencil is driven below `tol` in the sup norm.
pub fn solve_beam(
    load: &[f64],
    force: &RestoringForce,
    bc: BoundaryConditionKind,
    grid: &BeamGrid,
    tol: f64,
) -> Result<BeamProfile> {
    let n = grid.n_nodes();
    if load.len() != n {
        return Err(Error::GridMismatch(format!(
            "load has {} samples for {} nodes",
            load.len(),
            n
        )));
    }
    if load.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLoad);
    }
    if !(tol > 0.0) {
        return Err(Error::ValidationError {
            key: "beam.tol".into(),
            message: format!("tolerance must be positive, got {tol}"),
        });
    }
    force.validate()?;

    let m = n - 2;
    let op = beam_operator(grid, bc);
    let g_int = &load[1..n - 1];

    let mut u = vec![0.0; m];
    let mut ku = vec![0.0; m];

    let residual = |u: &[f64], ku: &mut [f64]| -> Vec<f64> {
        op.matvec(u, ku);
        (0..m)
            .map(|k| ku[k] + force.force(u[k]) - g_int[k])
            .collect()
    };

    let mut res = residual(&u, &mut ku);
    let mut res_norm = norm_inf(&res);
    let mut iterations = 0usize;
    let mut stalled = 0usize;
    while res_norm > tol {
        // Two consecutive iterations without progress mean the rounding floor
        // of the fourth-difference operator has been reached.
        if iterations >= NEWTON_CAP || stalled >= 2 {
            return Err(Error::NonConvergence {
                stage: "beam newton",
                iterations,
                residual: res_norm,
            });
        }
        // Jacobian = K + diag(f'(u))
        let mut jac = op.clone();
        for k in 0..m {
            jac.add(k, k, force.force_derivative(u[k]));
        }
        let lu = jac.factor()?;
        let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
        lu.solve(&mut step);

        // Armijo backtracking on the squared-residual merit
        let merit0 = res.iter().map(|r| r * r).sum::<f64>();
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = (0..m).map(|k| u[k] + t * step[k]).collect();
            let trial_res = residual(&trial, &mut ku);
            let merit = trial_res.iter().map(|r| r * r).sum::<f64>();
            if merit <= (1.0 - 2e-4 * t) * merit0 || t < 1e-12 {
                let prev = res_norm;
                u = trial;
                res = trial_res;
                res_norm = norm_inf(&res);
                stalled = if res_norm >= prev * (1.0 - 1e-9) { stalled + 1 } else { 0 };
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
    }

    let mut values = vec![0.0; n];
    values[1..n - 1].copy_from_slice(&u);
    BeamProfile::new(grid.clone(), values, bc)
}

/// Trapezoidal quadrature of  h''^2/2 + F(h) - g h  over (-1, 1).
pub fn beam_energy(h: &BeamProfile, force: &RestoringForce, load: &[f64]) -> Result<f64> {
    let n = h.n_nodes();
    if load.len() != n {
        return Err(Error::GridMismatch(format!(
            "load has {} samples for {} nodes",
            load.len(),
            n
        )));
    }
    let d = h.second_differences();
    let dy = h.grid.spacing();
    let integrand =
        |j: usize| 0.5 * d[j] * d[j] + force.potential(h.values[j]) - load[j] * h.values[j];
    let mut sum = 0.5 * (integrand(0) + integrand(n - 1));
    for j in 1..n - 1 {
        sum += integrand(j);
    }
    Ok(sum * dy)
}
