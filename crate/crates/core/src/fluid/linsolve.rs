//! Linear solvers for the saddle-point Picard steps: preconditioned BiCGStab
//! on the velocity block, a pressure-Schur (Uzawa-type) outer solve with
//! iterative refinement, and a banded direct factorization for small systems.

use crate::error::{Error, Result};
use crate::util::banded::BandedMatrix;
use crate::util::csr::Csr;
use crate::util::{axpy, dot, norm2};
#[allow(unused_imports)]
use crate::util::norm_inf;

/// Symmetric Gauss-Seidel preconditioner built on a CSR matrix with sorted
/// columns: M = (D + L) D^{-1} (D + U).
pub(crate) struct SymGaussSeidel<'a> {
    a: &'a Csr,
    diag: Vec<f64>,
}

impl<'a> SymGaussSeidel<'a> {
    pub fn new(a: &'a Csr) -> Self {
        let mut diag = a.diagonal();
        for d in diag.iter_mut() {
            if *d == 0.0 {
                *d = 1.0;
            }
        }
        SymGaussSeidel { a, diag }
    }

    /// z = M^{-1} r
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.a.n_rows;
        // (D + L) t = r
        for i in 0..n {
            let mut s = r[i];
            for e in self.a.row_ptr[i] as usize..self.a.row_ptr[i + 1] as usize {
                let c = self.a.cols[e] as usize;
                if c < i {
                    s -= self.a.vals[e] * z[c];
                }
            }
            z[i] = s / self.diag[i];
        }
        // t <- D t ; (D + U) z = t
        for i in (0..n).rev() {
            let mut s = z[i] * self.diag[i];
            for e in self.a.row_ptr[i] as usize..self.a.row_ptr[i + 1] as usize {
                let c = self.a.cols[e] as usize;
                if c > i {
                    s -= self.a.vals[e] * z[c];
                }
            }
            z[i] = s / self.diag[i];
        }
    }
}

/// Preconditioned BiCGStab on a matrix-free operator. Returns the achieved
/// absolute residual norm and the iteration count; `x` holds the best iterate.
pub(crate) fn bicgstab(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol_abs: f64,
    max_iter: usize,
) -> (f64, usize) {
    let n = b.len();
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rnorm = norm2(&r);
    if rnorm <= tol_abs {
        return (rnorm, 0);
    }
    let r0 = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut best = x.to_vec();
    let mut best_norm = rnorm;

    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break; // breakdown: return best so far
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut phat);
        apply(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol_abs {
            axpy(alpha, &phat, x);
            apply(x, &mut t);
            for i in 0..n {
                r[i] = b[i] - t[i];
            }
            rnorm = norm2(&r);
            return (rnorm, it);
        }
        precond(&s, &mut shat);
        apply(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt < 1e-300 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        rnorm = norm2(&r);
        if rnorm < best_norm {
            best_norm = rnorm;
            best.copy_from_slice(x);
        }
        if rnorm <= tol_abs {
            return (rnorm, it);
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    x.copy_from_slice(&best);
    (best_norm, max_iter)
}

/// The assembled saddle-point system of one Picard step.
pub(crate) struct SaddleSystem<'a> {
    /// Velocity block (diffusion + frozen advection).
    pub k: Csr,
    /// Pressure gradient, n_vel x n_p.
    pub grad: &'a Csr,
    /// Divergence over velocity unknowns, n_p x n_vel.
    pub div: &'a Csr,
    /// Cell volume (uniform) for the Schur diagonal scaling.
    pub cell_volume: f64,
}

pub(crate) struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub rel_residual: f64,
    /// Total outer Schur iterations spent (diagnostics).
    #[allow(dead_code)]
    pub schur_iterations: usize,
}

fn project_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

impl<'a> SaddleSystem<'a> {
    fn apply_full(&self, u: &[f64], p: &[f64], out_m: &mut [f64], out_c: &mut [f64]) {
        self.k.matvec(u, out_m);
        self.grad.matvec_add(1.0, p, out_m);
        self.div.matvec(u, out_c);
    }

    /// Solve the saddle system to a relative residual `tol_rel`, warm-started
    /// from (u0, p0). Pressure-Schur iteration with refinement sweeps.
    pub fn solve(
        &self,
        rhs_m: &[f64],
        rhs_c: &[f64],
        u0: Vec<f64>,
        p0: Vec<f64>,
        tol_rel: f64,
    ) -> Result<SaddleSolution> {
        let n_vel = self.k.n_rows;
        let n_p = self.div.n_rows;
        let mut rhs_c = rhs_c.to_vec();
        // compatibility projection: the discrete inflow/outflow balance holds
        // to rounding; distribute the remainder uniformly
        project_mean(&mut rhs_c);

        // per-block residual scales: the continuity rows live on the (much
        // smaller) flux scale and drive the slice-flux constancy, so they are
        // measured against their own right-hand side
        let scale_m = crate::util::norm_inf(rhs_m).max(crate::util::norm_inf(&rhs_c));
        let scale_c = crate::util::norm_inf(&rhs_c).max(1e-3 * scale_m);
        if scale_m == 0.0 {
            return Ok(SaddleSolution {
                u: vec![0.0; n_vel],
                p: vec![0.0; n_p],
                rel_residual: 0.0,
                schur_iterations: 0,
            });
        }

        let sgs = SymGaussSeidel::new(&self.k);
        let apply_k = |x: &[f64], y: &mut [f64]| self.k.matvec(x, y);
        let precond_k = |r: &[f64], z: &mut [f64]| sgs.apply(r, z);

        // Schur diagonal scaling: diag(D diag(K)^{-1} D^T)
        let kdiag = self.k.diagonal();
        let mut schur_diag = vec![0.0; n_p];
        for r in 0..n_p {
            let mut s = 0.0;
            for e in self.div.row_ptr[r] as usize..self.div.row_ptr[r + 1] as usize {
                let c = self.div.cols[e] as usize;
                let d = kdiag[c];
                if d != 0.0 {
                    s += self.div.vals[e] * self.div.vals[e] / d;
                }
            }
            schur_diag[r] = if s > 0.0 { s } else { 1.0 / self.cell_volume };
        }

        let mut u = u0;
        let mut p = p0;
        if u.len() != n_vel {
            u = vec![0.0; n_vel];
        }
        if p.len() != n_p {
            p = vec![0.0; n_p];
        }

        let inner_cap = 2 * ((n_vel as f64).powf(0.4) as usize) + 400;
        let mut schur_total = 0usize;
        let mut rel = f64::INFINITY;

        let mut rm = vec![0.0; n_vel];
        let mut rc = vec![0.0; n_p];
        for _outer in 0..10 {
            // current residual
            let mut tm = vec![0.0; n_vel];
            let mut tc = vec![0.0; n_p];
            self.apply_full(&u, &p, &mut tm, &mut tc);
            for i in 0..n_vel {
                rm[i] = rhs_m[i] - tm[i];
            }
            for i in 0..n_p {
                rc[i] = rhs_c[i] - tc[i];
            }
            rel = (crate::util::norm_inf(&rm) / scale_m)
                .max(crate::util::norm_inf(&rc) / scale_c);
            if rel <= tol_rel {
                break;
            }

            // Schur correction: S' dp = rc - D K^{-1} rm, S' = -D K^{-1} G
            let inner_tol = (0.05 * tol_rel * scale_c.min(scale_m)).max(1e-306);
            let mut t = vec![0.0; n_vel];
            let (_, _) = bicgstab(&apply_k, &precond_k, &rm, &mut t, inner_tol, inner_cap);
            let mut rhs_s = vec![0.0; n_p];
            self.div.matvec(&t, &mut rhs_s);
            for i in 0..n_p {
                rhs_s[i] = rc[i] - rhs_s[i];
            }
            project_mean(&mut rhs_s);

            let schur_apply = |q: &[f64], out: &mut [f64]| {
                let mut gq = vec![0.0; n_vel];
                self.grad.matvec(q, &mut gq);
                let mut kin = vec![0.0; n_vel];
                bicgstab(&apply_k, &precond_k, &gq, &mut kin, inner_tol, inner_cap);
                self.div.matvec(&kin, out);
                for v in out.iter_mut() {
                    *v = -*v;
                }
                project_mean(out);
            };
            let schur_precond = |r: &[f64], z: &mut [f64]| {
                for i in 0..r.len() {
                    z[i] = r[i] / schur_diag[i];
                }
                project_mean(z);
            };
            let mut dp = vec![0.0; n_p];
            let schur_tol = (0.2 * tol_rel * scale_c).max(1e-306);
            if norm2(&rhs_s) > schur_tol {
                let (_, its) =
                    bicgstab(&schur_apply, &schur_precond, &rhs_s, &mut dp, schur_tol, 400);
                schur_total += its;
            }

            // velocity update: du = K^{-1} (rm - G dp)
            let mut rm2 = rm.clone();
            self.grad.matvec_add(-1.0, &dp, &mut rm2);
            let mut du = vec![0.0; n_vel];
            bicgstab(&apply_k, &precond_k, &rm2, &mut du, inner_tol, inner_cap);

            axpy(1.0, &du, &mut u);
            axpy(1.0, &dp, &mut p);
            project_mean(&mut p);
        }

        if rel > tol_rel {
            return Err(Error::LinearSolveFailure {
                stage: "saddle point",
                residual: rel,
                target: tol_rel,
            });
        }
        Ok(SaddleSolution {
            u,
            p,
            rel_residual: rel,
            schur_iterations: schur_total,
        })
    }

    /// Direct banded factorization of the coupled system; viable for small
    /// unknown counts. Unknowns are ordered by x-slab to bound the bandwidth.
    pub fn solve_direct(
        &self,
        rhs_m: &[f64],
        rhs_c: &[f64],
        order_key: &[u64],
    ) -> Result<SaddleSolution> {
        let n_vel = self.k.n_rows;
        let n_p = self.div.n_rows;
        let n = n_vel + n_p;
        let mut rhs_c = rhs_c.to_vec();
        project_mean(&mut rhs_c);

        // permutation by the supplied spatial key
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| order_key[i]);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // fix the pressure gauge by pinning the first pressure unknown
        let pinned = inv[n_vel];

        let push_row = |rows: &mut Vec<Vec<(usize, f64)>>, r: usize, c: usize, v: f64| {
            rows[r].push((c, v));
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for r in 0..n_vel {
            for e in self.k.row_ptr[r] as usize..self.k.row_ptr[r + 1] as usize {
                push_row(&mut rows, inv[r], inv[self.k.cols[e] as usize], self.k.vals[e]);
            }
            for e in self.grad.row_ptr[r] as usize..self.grad.row_ptr[r + 1] as usize {
                push_row(
                    &mut rows,
                    inv[r],
                    inv[n_vel + self.grad.cols[e] as usize],
                    self.grad.vals[e],
                );
            }
        }
        for r in 0..n_p {
            let rr = inv[n_vel + r];
            if rr == pinned {
                continue;
            }
            for e in self.div.row_ptr[r] as usize..self.div.row_ptr[r + 1] as usize {
                push_row(&mut rows, rr, inv[self.div.cols[e] as usize], self.div.vals[e]);
            }
        }
        rows[pinned].push((pinned, 1.0));

        let mut kl = 0usize;
        let mut ku = 0usize;
        for (r, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let mut band = BandedMatrix::zeros(n, kl, ku);
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                band.add(r, c, v);
            }
        }
        let lu = band.factor()?;

        let mut b = vec![0.0; n];
        for r in 0..n_vel {
            b[inv[r]] = rhs_m[r];
        }
        for r in 0..n_p {
            let rr = inv[n_vel + r];
            if rr != pinned {
                b[rr] = rhs_c[r];
            }
        }
        b[pinned] = 0.0;
        lu.solve(&mut b);

        let mut u = vec![0.0; n_vel];
        let mut p = vec![0.0; n_p];
        for r in 0..n_vel {
            u[r] = b[inv[r]];
        }
        for r in 0..n_p {
            p[r] = b[inv[n_vel + r]];
        }
        project_mean(&mut p);

        // report the true residual
        let mut tm = vec![0.0; n_vel];
        let mut tc = vec![0.0; n_p];
        self.apply_full(&u, &p, &mut tm, &mut tc);
        let scale_m = crate::util::norm_inf(rhs_m)
            .max(crate::util::norm_inf(&rhs_c))
            .max(1e-300);
        let scale_c = crate::util::norm_inf(&rhs_c).max(1e-3 * scale_m);
        let mut rel = 0.0f64;
        for i in 0..n_vel {
            rel = rel.max((rhs_m[i] - tm[i]).abs() / scale_m);
        }
        for i in 0..n_p {
            rel = rel.max((rhs_c[i] - tc[i]).abs() / scale_c);
        }
        Ok(SaddleSolution {
            u,
            p,
            rel_residual: rel,
            schur_iterations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::Rng;

    fn random_spd_csr(n: usize, rng: &mut Rng) -> Csr {
        // diagonally dominant tridiagonal-ish SPD
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = vec![(i as u32, 4.0 + rng.next_f64())];
            if i > 0 {
                row.push(((i - 1) as u32, -1.0));
            }
            if i + 1 < n {
                row.push(((i + 1) as u32, -1.0));
            }
            rows.push(row);
        }
        Csr::from_rows(n, rows)
    }

    #[test]
    fn bicgstab_solves_spd_system() {
        let mut rng = Rng::new(3);
        let a = random_spd_csr(200, &mut rng);
        let xs: Vec<f64> = (0..200).map(|_| rng.next_sym()).collect();
        let mut b = vec![0.0; 200];
        a.matvec(&xs, &mut b);
        let sgs = SymGaussSeidel::new(&a);
        let mut x = vec![0.0; 200];
        let (res, its) = bicgstab(
            &|v, y| a.matvec(v, y),
            &|r, z| sgs.apply(r, z),
            &b,
            &mut x,
            1e-12 * norm2(&b),
            500,
        );
        assert!(res <= 1e-12 * norm2(&b) * 1.01, "residual {res} after {its} its");
        for i in 0..200 {
            assert!((x[i] - xs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn gauss_seidel_is_exact_on_diagonal_matrices() {
        let a = Csr::from_rows(3, vec![vec![(0, 2.0)], vec![(1, 4.0)], vec![(2, 8.0)]]);
        let sgs = SymGaussSeidel::new(&a);
        let r = vec![2.0, 4.0, 8.0];
        let mut z = vec![0.0; 3];
        sgs.apply(&r, &mut z);
        assert_eq!(z, vec![1.0, 1.0, 1.0]);
    }
}
