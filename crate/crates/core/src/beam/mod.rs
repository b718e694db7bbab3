//! Fourth-order beam equilibrium on (-1, 1): discretization, nonlinear solve,
//! discrete norms and the embedding-constant verification.
//!
//! The displacement h satisfies h'''' + f(h) = g with either clamped ends
//! (h = h' = 0) or hinged ends (h = h'' = 0). The interior stencil is the
//! 5-point fourth difference; boundary rows are closed with one-sided ghost
//! values that keep the scheme exact on quartic polynomials.

mod embedding;
mod solve;

pub use embedding::{embedding_constant, norm_equivalence_check, EmbeddingReport, NormEquivalence};
pub use solve::{beam_energy, solve_beam};

use crate::error::{Error, Result};

/// Uniform node set on [-1, 1], endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGrid {
    n_nodes: usize,
    spacing: f64,
}

impl BeamGrid {
    /// `n_nodes` must be odd and at least 9 so that y = 0 is a node.
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 9 || n_nodes % 2 == 0 {
            return Err(Error::ValidationError {
                key: "beam.n_nodes".into(),
                message: format!("need an odd node count >= 9, got {n_nodes}"),
            });
        }
        Ok(BeamGrid {
            n_nodes,
            spacing: 2.0 / (n_nodes - 1) as f64,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Node coordinate; the symmetric form keeps y_i == -y_{n-1-i} bit-exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_nodes);
        let m = (self.n_nodes - 1) as f64;
        (2.0 * i as f64 - m) / m
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }
}

/// End conditions for the beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryConditionKind {
    /// h(+-1) = h'(+-1) = 0
    Clamped,
    /// h(+-1) = h''(+-1) = 0
    Hinged,
}

impl BoundaryConditionKind {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryConditionKind::Clamped => "clamped",
            BoundaryConditionKind::Hinged => "hinged",
        }
    }
}

/// Restoring force f(h) with potential F (F' = f); f(0) = 0 and f non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestoringForce {
    Zero,
    Linear { stiffness: f64 },
    /// f(h) = stiffness * scale * tanh(h / scale); saturates at stiffness * scale.
    Saturating { stiffness: f64, scale: f64 },
}

impl RestoringForce {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RestoringForce::Zero => Ok(()),
            RestoringForce::Linear { stiffness } if stiffness >= 0.0 => Ok(()),
            RestoringForce::Saturating { stiffness, scale } if stiffness >= 0.0 && scale > 0.0 => {
                Ok(())
            }
            _ => Err(Error::ValidationError {
                key: "beam.force".into(),
                message: "stiffness must be >= 0 and saturation scale > 0".into(),
            }),
        }
    }

    pub fn force(&self, h: f64) -> f64 {
        match *self {
            RestoringForce::Zero => 0.0,
            RestoringForce::Linear { stiffness } => stiffness * h,
            RestoringForce::Saturating { stiffness, scale } => {
                stiffness * scale * (h / scale).tanh()
            }
        }
    }

    pub fn force_derivative(&self, h: f64) -> f64 {
        match *self {
            RestoringForce::Zero => 0.0,
            RestoringForce::Linear { stiffness } => stiffness,
            RestoringForce::Saturating { stiffness, scale } => {
                let t = (h / scale).tanh();
                stiffness * (1.0 - t * t)
            }
        }
    }

    pub fn potential(&self, h: f64) -> f64 {
        match *self {
            RestoringForce::Zero => 0.0,
            RestoringForce::Linear { stiffness } => 0.5 * stiffness * h * h,
            RestoringForce::Saturating { stiffness, scale } => {
                stiffness * scale * scale * (h / scale).cosh().ln()
            }
        }
    }

    /// Reportable Lipschitz constant of f.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            RestoringForce::Zero => 0.0,
            RestoringForce::Linear { stiffness } => stiffness,
            RestoringForce::Saturating { stiffness, .. } => stiffness,
        }
    }
}

/// Nodal displacement with its grid and end conditions.
#[derive(Debug, Clone)]
pub struct BeamProfile {
    pub grid: BeamGrid,
    pub values: Vec<f64>,
    pub bc: BoundaryConditionKind,
}

/// Discrete norms of a profile: the bending seminorm, the fourth-derivative
/// seminorm and the sup norm.
#[derive(Debug, Clone, Copy)]
pub struct BeamNorms {
    pub norm_h: f64,
    pub norm_h4: f64,
    pub norm_inf: f64,
}

impl BeamProfile {
    pub fn new(grid: BeamGrid, values: Vec<f64>, bc: BoundaryConditionKind) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "profile has {} values for {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(BeamProfile { grid, values, bc })
    }

    pub fn zero(grid: BeamGrid, bc: BoundaryConditionKind) -> Self {
        let n = grid.n_nodes();
        BeamProfile {
            grid,
            values: vec![0.0; n],
            bc,
        }
    }

    pub fn from_fn(grid: BeamGrid, bc: BoundaryConditionKind, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|i| f(grid.node(i))).collect();
        BeamProfile { grid, values, bc }
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn norm_inf(&self) -> f64 {
        crate::util::norm_inf(&self.values)
    }

    pub fn same_grid(&self, other: &BeamProfile) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "profiles live on different beam grids".into(),
            ));
        }
        Ok(())
    }

    /// Nodewise difference, keeping grid and bc.
    pub fn difference(&self, other: &BeamProfile) -> Result<BeamProfile> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        BeamProfile::new(self.grid.clone(), values, self.bc)
    }

    /// Ghost value left of y = -1 from the end condition; exact on quartics.
    fn ghost_left(&self) -> f64 {
        let h = &self.values;
        match self.bc {
            // h'(-1) = 0 via the 4th-order one-sided derivative stencil
            BoundaryConditionKind::Clamped => {
                (-10.0 * h[0] + 18.0 * h[1] - 6.0 * h[2] + h[3]) / 3.0
            }
            // h''(-1) = 0 via the 4th-order one-sided second-derivative stencil
            BoundaryConditionKind::Hinged => {
                (20.0 * h[0] - 6.0 * h[1] - 4.0 * h[2] + h[3]) / 11.0
            }
        }
    }

    fn ghost_right(&self) -> f64 {
        let h = &self.values;
        let n = h.len();
        match self.bc {
            BoundaryConditionKind::Clamped => {
                (-10.0 * h[n - 1] + 18.0 * h[n - 2] - 6.0 * h[n - 3] + h[n - 4]) / 3.0
            }
            BoundaryConditionKind::Hinged => {
                (20.0 * h[n - 1] - 6.0 * h[n - 2] - 4.0 * h[n - 3] + h[n - 4]) / 11.0
            }
        }
    }

    /// Three-point second differences at every node, ghost-closed at the ends.
    pub fn second_differences(&self) -> Vec<f64> {
        let h = &self.values;
        let n = h.len();
        let d2 = self.grid.spacing() * self.grid.spacing();
        let mut d = vec![0.0; n];
        d[0] = (self.ghost_left() - 2.0 * h[0] + h[1]) / d2;
        for j in 1..n - 1 {
            d[j] = (h[j - 1] - 2.0 * h[j] + h[j + 1]) / d2;
        }
        d[n - 1] = (h[n - 2] - 2.0 * h[n - 1] + self.ghost_right()) / d2;
        d
    }

    /// Five-point fourth differences; ghost-closed at j = 1 and j = n-2,
    /// endpoint values extended from the nearest computed node.
    pub fn fourth_differences(&self) -> Vec<f64> {
        let h = &self.values;
        let n = h.len();
        let d4 = self.grid.spacing().powi(4);
        let mut q = vec![0.0; n];
        q[1] = (self.ghost_left() - 4.0 * h[0] + 6.0 * h[1] - 4.0 * h[2] + h[3]) / d4;
        for j in 2..n - 2 {
            q[j] = (h[j - 2] - 4.0 * h[j - 1] + 6.0 * h[j] - 4.0 * h[j + 1] + h[j + 2]) / d4;
        }
        q[n - 2] =
            (h[n - 4] - 4.0 * h[n - 3] + 6.0 * h[n - 2] - 4.0 * h[n - 1] + self.ghost_right()) / d4;
        q[0] = q[1];
        q[n - 1] = q[n - 2];
        q
    }

    /// Value and first derivative at an arbitrary y in [-1, 1] by local cubic
    /// interpolation (used when sampling the displacement on the fluid grid).
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let n = self.n_nodes();
        let dy = self.grid.spacing();
        let t = (y + 1.0) / dy;
        let cell = (t.floor() as isize).clamp(0, (n - 2) as isize) as usize;
        let i0 = cell.saturating_sub(1).min(n - 4);
        let ys: [f64; 4] = [
            self.grid.node(i0),
            self.grid.node(i0 + 1),
            self.grid.node(i0 + 2),
            self.grid.node(i0 + 3),
        ];
        let hs: [f64; 4] = [
            self.values[i0],
            self.values[i0 + 1],
            self.values[i0 + 2],
            self.values[i0 + 3],
        ];
        let mut value = 0.0;
        let mut deriv = 0.0;
        for k in 0..4 {
            // Lagrange basis and its derivative at y
            let mut lk = 1.0;
            for m in 0..4 {
                if m != k {
                    lk *= (y - ys[m]) / (ys[k] - ys[m]);
                }
            }
            let mut dk = 0.0;
            for m in 0..4 {
                if m == k {
                    continue;
                }
                let mut p = 1.0 / (ys[k] - ys[m]);
                for l in 0..4 {
                    if l != k && l != m {
                        p *= (y - ys[l]) / (ys[k] - ys[l]);
                    }
                }
                dk += p;
            }
            value += hs[k] * lk;
            deriv += hs[k] * dk;
        }
        (value, deriv)
    }
}

/// Discrete bending, fourth-derivative and sup norms of a profile. The first
/// two use trapezoidal weights over the ghost-closed difference stencils.
pub fn beam_norms(h: &BeamProfile) -> BeamNorms {
    let dy = h.grid.spacing();
    let quad = |vals: &[f64]| -> f64 {
        let n = vals.len();
        let mut s = 0.5 * (vals[0] * vals[0] + vals[n - 1] * vals[n - 1]);
        for v in &vals[1..n - 1] {
            s += v * v;
        }
        (s * dy).sqrt()
    };
    BeamNorms {
        norm_h: quad(&h.second_differences()),
        norm_h4: quad(&h.fourth_differences()),
        norm_inf: h.norm_inf(),
    }
}

/// Smooth random profile satisfying the end conditions exactly: a bubble
/// polynomial envelope for clamped ends, a sine series for hinged ends.
pub fn random_profile(
    grid: &BeamGrid,
    bc: BoundaryConditionKind,
    amplitude: f64,
    rng: &mut crate::util::Rng,
) -> BeamProfile {
    let coeffs: Vec<f64> = (0..6).map(|_| rng.next_sym()).collect();
    let profile = BeamProfile::from_fn(grid.clone(), bc, |y| match bc {
        BoundaryConditionKind::Clamped => {
            let env = (1.0 - y * y).powi(2);
            let mut p = 0.0;
            let mut yk = 1.0;
            for c in &coeffs {
                p += c * yk;
                yk *= y;
            }
            env * p
        }
        BoundaryConditionKind::Hinged => {
            let mut s = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                let freq = (k + 1) as f64 * std::f64::consts::FRAC_PI_2;
                s += c * (freq * (y + 1.0)).sin() / ((k + 1) as f64).powi(2);
            }
            s
        }
    });
    let peak = profile.norm_inf().max(1e-300);
    let values = profile.values.iter().map(|v| v * amplitude / peak).collect();
    BeamProfile {
        grid: grid.clone(),
        values,
        bc,
    }
}
