//! Verification of the fluid discretization against independent oracles:
//! manufactured solutions, the displaced-domain cross-check and brute-force
//! geometry classification.

mod common;

use std::sync::Arc;

use beamflow::beam::{BeamGrid, BeamProfile, BoundaryConditionKind};
use beamflow::fluid::{fields, BodyForce, BoundaryData, FluidOptions, FluidSolver};
use beamflow::geometry::{
    build_displaced_domain, build_reference_domain, transform_matrices, ChannelSpec,
    CutoffFunction, DisplacementMap, Obstacle,
};
use common::{empty_box_domain, mms_error, sample_exact_state, Manufactured};

const PI: f64 = std::f64::consts::PI;


#[test]
fn manufactured_solution_converges_at_second_order() {
    let coarse = mms_error((12, 8, 8));
    let fine = mms_error((24, 16, 16));
    let ratio = coarse / fine;
    println!("MMS errors: coarse {coarse:.6e}, fine {fine:.6e}, ratio {ratio:.2}");
    assert!(
        ratio >= 3.0,
        "expected at least 3x error reduction under halving, got {ratio:.2}"
    );
}

#[test]
fn manufactured_pressure_is_recovered() {
    // at the finer level the pressure error must be small relative to its scale
    let domain = empty_box_domain((24, 16, 16));
    let channel = domain.channel;
    let ob = domain.obstacle;
    let cutoff = CutoffFunction::for_obstacle(&channel, &ob).unwrap();
    let h = BeamProfile::zero(BeamGrid::new(9).unwrap(), BoundaryConditionKind::Clamped);
    let tm = Arc::new(transform_matrices(&h, &cutoff, &domain).unwrap());
    let mms = Manufactured { eta: 1.0 };
    let bc = BoundaryData::custom(1.0, Manufactured::velocity);
    let force = BodyForce::from_fn(&domain.grid, |comp, x, y, z| mms.body_force(comp, x, y, z));
    let solver = FluidSolver::new(Arc::clone(&tm), bc, FluidOptions::default()).unwrap();
    let exact_adv = sample_exact_state(&tm);
    let (state, _) = solver.picard_step(&exact_adv, Some(&force), None).unwrap();
    let g = domain.grid;
    // compare after removing the mean of the exact pressure over cells
    let mut exact_mean = 0.0;
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                exact_mean += Manufactured::pressure(g.cell_x(i), g.cell_y(j), g.cell_z(k));
            }
        }
    }
    exact_mean /= g.n_cells() as f64;
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..g.nx {
        for j in 0..g.ny {
            for k in 0..g.nz {
                let ex = Manufactured::pressure(g.cell_x(i), g.cell_y(j), g.cell_z(k)) - exact_mean;
                let got = state.pressure[g.cell_idx(i, j, k)];
                err += (got - ex) * (got - ex);
                scale += ex * ex;
            }
        }
    }
    let rel = (err / scale).sqrt();
    println!("pressure relative L2 error: {rel:.3e}");
    assert!(rel < 0.05, "pressure error too large: {rel}");
}

/// Manufactured solution for the pulled-back operators: with U = u_ex o phi
/// and the body force det(J) f_ex o phi, the transformed solve must converge
/// to the composed exact field at second order. The cutoff is sized to a
/// large virtual obstacle so the shear is active across most of the box,
/// while the actual mask stays empty.
#[test]
fn transformed_manufactured_solution_converges() {
    let mms = Manufactured { eta: 1.0 };
    let mut errors = Vec::new();
    for res in [(12usize, 8usize, 8usize), (24, 16, 16)] {
        let domain = empty_box_domain(res);
        let channel = domain.channel;
        let fat = Obstacle::new(0.5, 0.4, 2.0, 0.0, 0.0).unwrap();
        let cutoff = CutoffFunction::for_obstacle(&channel, &fat).unwrap();
        let beam_grid = BeamGrid::new(41).unwrap();
        let h = BeamProfile::from_fn(beam_grid, BoundaryConditionKind::Clamped, |y| {
            0.03 * (1.0 - y * y).powi(2)
        });
        let tm = Arc::new(transform_matrices(&h, &cutoff, &domain).unwrap());
        assert!(!tm.is_identity());
        assert!(tm.max_det > 1.0 + 1e-3, "shear inactive: {}", tm.max_det);

        let map = DisplacementMap::new(cutoff, h.clone());
        // boundary data and exact faces in composed coordinates
        let map_bc = map.clone();
        let bc = BoundaryData::custom(1.0, move |x, y, z| {
            let q = map_bc.map_point([x, y, z]);
            Manufactured::velocity(q[0], q[1], q[2])
        });
        let g = domain.grid;
        let map_f = map.clone();
        let force = BodyForce::from_fn(&g, |comp, x, y, z| {
            let det = map_f.coeffs(x, y, z).c;
            let q = map_f.map_point([x, y, z]);
            det * mms.body_force(comp, q[0], q[1], q[2])
        });

        let solver = FluidSolver::new(Arc::clone(&tm), bc, FluidOptions::default()).unwrap();
        let mut exact = beamflow::fluid::FluidState::zeros(Arc::clone(&tm), 1.0);
        for i in 0..=g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    let q = map.map_point([g.xface_x(i), g.cell_y(j), g.cell_z(k)]);
                    let idx = exact.idx_u(i, j, k);
                    exact.u[idx] = Manufactured::velocity(q[0], q[1], q[2])[0];
                }
            }
        }
        for i in 0..g.nx {
            for j in 0..=g.ny {
                for k in 0..g.nz {
                    let q = map.map_point([g.cell_x(i), g.yface_y(j), g.cell_z(k)]);
                    let idx = exact.idx_v(i, j, k);
                    exact.v[idx] = Manufactured::velocity(q[0], q[1], q[2])[1];
                }
            }
        }
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..=g.nz {
                    let q = map.map_point([g.cell_x(i), g.cell_y(j), g.zface_z(k)]);
                    let idx = exact.idx_w(i, j, k);
                    exact.w[idx] = Manufactured::velocity(q[0], q[1], q[2])[2];
                }
            }
        }
        let (state, _) = solver.picard_step(&exact, Some(&force), None).unwrap();
        let mut err2 = 0.0;
        for (a, b) in state.u.iter().zip(&exact.u) {
            err2 += (a - b) * (a - b);
        }
        for (a, b) in state.v.iter().zip(&exact.v) {
            err2 += (a - b) * (a - b);
        }
        for (a, b) in state.w.iter().zip(&exact.w) {
            err2 += (a - b) * (a - b);
        }
        errors.push((err2 * g.cell_volume()).sqrt());
    }
    let ratio = errors[0] / errors[1];
    println!("transformed MMS errors: {errors:?}, ratio {ratio:.2}");
    assert!(
        ratio >= 3.0,
        "transformed-operator error must decay at second order, got ratio {ratio:.2}"
    );
}

/// Solving on the mapped reference domain and pulling back must agree with a
/// direct stair-step solve on the displaced domain, to discretization order.
#[test]
fn transformed_solve_matches_displaced_domain_solve() {
    let channel = ChannelSpec::new(3.0).unwrap();
    let ob = Obstacle::new(0.3, 0.2, 4.0, 0.0, 0.0).unwrap();
    let cutoff = CutoffFunction::for_obstacle(&channel, &ob).unwrap();
    let beam_grid = BeamGrid::new(41).unwrap();
    let h = BeamProfile::from_fn(beam_grid.clone(), BoundaryConditionKind::Clamped, |y| {
        0.06 * (1.0 - y * y).powi(2)
    });
    let gamma = 0.005;

    let mut diffs = Vec::new();
    for res in [(16usize, 8usize, 12usize), (32, 16, 24)] {
        let bc = beamflow::fluid::build_boundary_data(
            gamma,
            beamflow::fluid::InflowProfile::SymmetricPoiseuille,
        )
        .unwrap();

        // transformed solve on the reference mask
        let ref_dom = Arc::new(build_reference_domain(&channel, &ob, res).unwrap());
        let tm = Arc::new(transform_matrices(&h, &cutoff, &ref_dom).unwrap());
        let solver_t = FluidSolver::new(Arc::clone(&tm), bc.clone(), FluidOptions::default()).unwrap();
        let (state_t, _) = solver_t.solve(None).unwrap();

        // physical stair-step solve on the displaced mask
        let disp_dom = Arc::new(build_displaced_domain(&channel, &ob, &h, res).unwrap());
        let h0 = BeamProfile::zero(beam_grid.clone(), BoundaryConditionKind::Clamped);
        let tm_p = Arc::new(transform_matrices(&h0, &cutoff, &disp_dom).unwrap());
        let solver_p = FluidSolver::new(Arc::clone(&tm_p), bc, FluidOptions::default()).unwrap();
        let (state_p, _) = solver_p.solve(None).unwrap();

        // compare at the displaced domain's fluid cell centers
        let map = DisplacementMap::new(cutoff, h.clone());
        let cells_t = fields::cell_velocity(&state_t);
        let cells_p = fields::cell_velocity(&state_p);
        let g = disp_dom.grid;
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..g.nx {
            for j in 0..g.ny {
                for k in 0..g.nz {
                    if disp_dom.is_solid(i, j, k) {
                        continue;
                    }
                    let q = [g.cell_x(i), g.cell_y(j), g.cell_z(k)];
                    let back = [q[0], q[1], map.invert_z(q[0], q[1], q[2])];
                    let vt = match fields::fluid_trilinear_stencil(&ref_dom, back) {
                        Ok(st) => {
                            let mut v = [0.0; 3];
                            for (c, wgt) in st {
                                for d in 0..3 {
                                    v[d] += cells_t[c][d] * wgt;
                                }
                            }
                            v
                        }
                        Err(_) => continue,
                    };
                    let vp = cells_p[g.cell_idx(i, j, k)];
                    for d in 0..3 {
                        sum += (vt[d] - vp[d]).powi(2);
                    }
                    count += 1;
                }
            }
        }
        assert!(count > 0);
        diffs.push((sum * g.cell_volume()).sqrt());
    }
    println!("transform-consistency differences: {diffs:?}");
    // both small relative to the velocity scale and improving with resolution
    assert!(diffs[0] < 0.5 * gamma, "coarse difference too large: {}", diffs[0]);
    assert!(diffs[1] < diffs[0], "difference did not shrink: {diffs:?}");
}

/// Identity-transform path: solving with h = 0 through the transformed
/// machinery must match an untransformed assembly bit-for-bit in effect.
#[test]
fn identity_transform_matches_untransformed_discretization() {
    // with h = 0 every coefficient reduces to the identity; two independent
    // builds of the same discretization must produce identical states
    let channel = ChannelSpec::new(3.0).unwrap();
    let ob = Obstacle::new(0.3, 0.2, 4.0, 0.0, 0.0).unwrap();
    let cutoff = CutoffFunction::for_obstacle(&channel, &ob).unwrap();
    let dom = Arc::new(build_reference_domain(&channel, &ob, (16, 8, 8)).unwrap());
    let bc = beamflow::fluid::build_boundary_data(
        0.01,
        beamflow::fluid::InflowProfile::SymmetricPoiseuille,
    )
    .unwrap();

    let h_zero = BeamProfile::zero(BeamGrid::new(21).unwrap(), BoundaryConditionKind::Clamped);
    let tm1 = Arc::new(transform_matrices(&h_zero, &cutoff, &dom).unwrap());
    assert!(tm1.is_identity());
    // a second, separately-constructed zero profile on a different beam grid
    let h_zero2 = BeamProfile::zero(BeamGrid::new(81).unwrap(), BoundaryConditionKind::Hinged);
    let tm2 = Arc::new(transform_matrices(&h_zero2, &cutoff, &dom).unwrap());

    let s1 = FluidSolver::new(tm1, bc.clone(), FluidOptions::default()).unwrap();
    let s2 = FluidSolver::new(tm2, bc, FluidOptions::default()).unwrap();
    let (st1, _) = s1.solve(None).unwrap();
    let (st2, _) = s2.solve(None).unwrap();
    let mut dmax = 0.0f64;
    for (a, b) in st1.u.iter().zip(&st2.u) {
        dmax = dmax.max((a - b).abs());
    }
    for (a, b) in st1.w.iter().zip(&st2.w) {
        dmax = dmax.max((a - b).abs());
    }
    assert!(dmax <= 1e-12, "identity-path states differ by {dmax}");
}

// ---------------------------------------------------------------------------
// geometry oracles
// ---------------------------------------------------------------------------

/// Ray-casting point-in-polygon test against a dense sampling of the section
/// curve: an implementation-independent classification oracle.
fn inside_polygon(poly: &[(f64, f64)], x: f64, z: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (x1, z1) = poly[i];
        let (x2, z2) = poly[(i + 1) % n];
        if (z1 > z) != (z2 > z) {
            let t = (z - z1) / (z2 - z1);
            let xi = x1 + t * (x2 - x1);
            if x < xi {
                inside = !inside;
            }
        }
    }
    inside
}

#[test]
fn mask_matches_ray_casting_oracle() {
    let channel = ChannelSpec::new(3.0).unwrap();
    let ob = Obstacle::new(0.3, 0.2, 4.0, 0.0, 0.0).unwrap();
    let dom = build_reference_domain(&channel, &ob, (48, 24, 24)).unwrap();
    let g = dom.grid;
    let mut mismatches = 0usize;
    let mut oracle_solid = 0usize;
    for j in 0..g.ny {
        let y = g.cell_y(j);
        let poly: Vec<(f64, f64)> = (0..4096)
            .map(|s| {
                let psi = 2.0 * PI * s as f64 / 4096.0;
                let smp = ob.surface_sample(y, psi);
                (smp.point[0], smp.point[2])
            })
            .collect();
        for i in 0..g.nx {
            for k in 0..g.nz {
                let solid_oracle = inside_polygon(&poly, g.cell_x(i), g.cell_z(k));
                if solid_oracle {
                    oracle_solid += 1;
                }
                if solid_oracle != dom.is_solid(i, j, k) {
                    mismatches += 1;
                }
            }
        }
    }
    assert!(oracle_solid > 0);
    assert_eq!(
        mismatches, 0,
        "classification disagrees with the ray-casting oracle"
    );
    assert_eq!(oracle_solid, dom.n_solid);
}

/// Lanczos approximation of the gamma function (test-side oracle).
fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

#[test]
fn solid_volume_converges_to_superellipse_area_integral() {
    let channel = ChannelSpec::new(3.0).unwrap();
    let ob = Obstacle::new(0.3, 0.2, 4.0, 0.1, 0.05).unwrap();
    // analytic: V = int_{-1}^{1} 4 a(y) b(y) Gamma(1+1/q)^2 / Gamma(1+2/q) dy
    let q = 4.0;
    let shape = 4.0 * gamma_fn(1.0 + 1.0 / q).powi(2) / gamma_fn(1.0 + 2.0 / q);
    let n = 2000;
    let mut exact = 0.0;
    for s in 0..n {
        let y0 = -1.0 + 2.0 * s as f64 / n as f64;
        let y1 = -1.0 + 2.0 * (s + 1) as f64 / n as f64;
        let mid = 0.5 * (y0 + y1);
        let f = |y: f64| shape * ob.semi_axis_x(y) * ob.semi_axis_z(y);
        exact += (y1 - y0) * (f(y0) + 4.0 * f(mid) + f(y1)) / 6.0;
    }

    let mut errors = Vec::new();
    for res in [(24usize, 12usize, 12usize), (48, 24, 24), (96, 48, 48)] {
        let dom = build_reference_domain(&channel, &ob, res).unwrap();
        let vol = dom.n_solid as f64 * dom.grid.cell_volume();
        errors.push((vol - exact).abs());
    }
    println!("volume errors vs analytic {exact:.6}: {errors:?}");
    assert!(errors[1] < errors[0]);
    assert!(errors[2] < errors[1]);
    // stair-step geometry converges at first order
    assert!(errors[2] / exact < 0.04, "relative error {:.4}", errors[2] / exact);
}
