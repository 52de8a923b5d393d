//! Self-consistent effective field on the particle centers.
//!
//! Each particle acts as a point source of strength `Q_m = -g_m u_e(x_m)`, so
//! the effective fields solve
//!
//! ```text
//! u_j + Σ_{m≠j} G(x_j, x_m) g_m u_m = u0(x_j),   j = 1..M
//! ```
//!
//! with `g_m = 4π h(x_m) a^(2-κ) / (1 + h(x_m) a^(1-κ))`. The field anywhere
//! outside the guard zones is then `u0(x) + Σ_m G(x, x_m) Q_m`.

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernels::{green_at_distance, WaveContext};
use crate::linalg::{dense_solve, gmres, relative_residual, Execution, GmresConfig, LinearOperator};
use crate::scaling::{classify_regime, coupling_strength, monopole_charge, CouplingMode};
use crate::Point;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

pub const DEFAULT_DENSE_THRESHOLD: usize = 2000;
pub const DEFAULT_NEAR_FIELD_GUARD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Dense up to `dense_threshold` particles, iterative beyond.
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct ManyBodyOptions {
    pub tol: f64,
    pub dense_threshold: usize,
    pub solver: SolverChoice,
    pub coupling: CouplingMode,
    pub execution: Execution,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for ManyBodyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            solver: SolverChoice::Auto,
            coupling: CouplingMode::Full,
            execution: Execution::Parallel,
            restart: 80,
            max_iter: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveFieldSolution {
    pub u_at_centers: Vec<Complex64>,
    pub charges: Vec<Complex64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub solver_kind: SolverKind,
}

/// `(I + G_offdiag diag(g))` applied matrix-free.
pub struct FoldyLaxOperator<'a> {
    centers: &'a [Point],
    coupling: &'a [Complex64],
    k: f64,
    execution: Execution,
}

impl<'a> FoldyLaxOperator<'a> {
    pub fn new(centers: &'a [Point], coupling: &'a [Complex64], k: f64, execution: Execution) -> Self {
        Self {
            centers,
            coupling,
            k,
            execution,
        }
    }

    fn row(&self, j: usize, x: &[Complex64]) -> Complex64 {
        let xj = self.centers[j];
        let mut s = x[j];
        for (m, xm) in self.centers.iter().enumerate() {
            if m != j {
                s += green_at_distance((xj - xm).norm(), self.k) * self.coupling[m] * x[m];
            }
        }
        s
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.centers.len();
        DMatrix::from_fn(n, n, |j, m| {
            if j == m {
                Complex64::new(1.0, 0.0)
            } else {
                green_at_distance((self.centers[j] - self.centers[m]).norm(), self.k) * self.coupling[m]
            }
        })
    }
}

impl LinearOperator for FoldyLaxOperator<'_> {
    fn dim(&self) -> usize {
        self.centers.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        match self.execution {
            Execution::Parallel => y.par_iter_mut().enumerate().for_each(|(j, yj)| *yj = self.row(j, x)),
            Execution::Sequential => y.iter_mut().enumerate().for_each(|(j, yj)| *yj = self.row(j, x)),
        }
    }
}

/// Per-particle couplings `g_m` for the ensemble's law.
pub fn couplings(ensemble: &ParticleEnsemble, mode: CouplingMode) -> Result<Vec<Complex64>> {
    ensemble
        .centers
        .iter()
        .map(|x| coupling_strength(&ensemble.law, x, mode))
        .collect()
}

pub fn solve_effective_field(
    ensemble: &ParticleEnsemble,
    ctx: &WaveContext,
    options: &ManyBodyOptions,
) -> Result<EffectiveFieldSolution> {
    ctx.require_free_space("the many-body solver")?;
    classify_regime(&ensemble.law).require_approximation()?;
    if !(options.tol > 0.0) {
        return Err(Error::Domain("solver tolerance must be positive".into()));
    }
    let g = couplings(ensemble, options.coupling)?;
    let rhs: Vec<Complex64> = ensemble.centers.iter().map(|x| ctx.plane_wave(x)).collect();
    solve_with_rhs(ensemble, ctx, &g, &rhs, options)
}

fn solve_with_rhs(
    ensemble: &ParticleEnsemble,
    ctx: &WaveContext,
    g: &[Complex64],
    rhs: &[Complex64],
    options: &ManyBodyOptions,
) -> Result<EffectiveFieldSolution> {
    let op = FoldyLaxOperator::new(&ensemble.centers, g, ctx.k(), options.execution);
    let m = ensemble.len();
    let kind = match options.solver {
        SolverChoice::Dense => SolverKind::Dense,
        SolverChoice::Iterative => SolverKind::Iterative,
        SolverChoice::Auto if m <= options.dense_threshold => SolverKind::Dense,
        SolverChoice::Auto => SolverKind::Iterative,
    };
    let (u, iterations) = match kind {
        SolverKind::Dense => (dense_solve(op.to_dense(), rhs)?, 0),
        SolverKind::Iterative => {
            let cfg = GmresConfig {
                tol: options.tol,
                restart: options.restart,
                max_iter: options.max_iter,
            };
            let out = gmres(&op, rhs, &cfg)?;
            (out.x, out.iterations)
        }
    };
    let residual_norm = relative_residual(&op, &u, rhs);
    if !(residual_norm <= options.tol) {
        return Err(Error::Singular {
            message: format!(
                "effective-field residual {residual_norm:e} exceeds tolerance {:e}",
                options.tol
            ),
            condition_estimate: f64::NAN,
        });
    }
    let charges = match options.coupling {
        CouplingMode::Full => ensemble
            .centers
            .iter()
            .zip(&u)
            .map(|(x, ui)| monopole_charge(&ensemble.law, x, *ui))
            .collect::<Result<Vec<_>>>()?,
        CouplingMode::LeadingOrder => g.iter().zip(&u).map(|(gi, ui)| -gi * ui).collect(),
    };
    Ok(EffectiveFieldSolution {
        u_at_centers: u,
        charges,
        residual_norm,
        iterations,
        solver_kind: kind,
    })
}

/// Solves against an arbitrary incident vector sampled at the centers.
pub fn solve_with_incident(
    ensemble: &ParticleEnsemble,
    ctx: &WaveContext,
    incident: &[Complex64],
    options: &ManyBodyOptions,
) -> Result<EffectiveFieldSolution> {
    ctx.require_free_space("the many-body solver")?;
    classify_regime(&ensemble.law).require_approximation()?;
    if incident.len() != ensemble.len() {
        return Err(Error::Domain(
            "incident vector length differs from particle count".into(),
        ));
    }
    let g = couplings(ensemble, options.coupling)?;
    solve_with_rhs(ensemble, ctx, &g, incident, options)
}

/// `u0(x) + Σ_m G(x, x_m) Q_m`, refused within `guard·a` of any center.
pub fn evaluate_field(
    solution: &EffectiveFieldSolution,
    ensemble: &ParticleEnsemble,
    ctx: &WaveContext,
    x: &Point,
    guard: f64,
) -> Result<Complex64> {
    ctx.require_free_space("evaluate_field")?;
    let limit = guard * ensemble.a;
    let mut u = ctx.plane_wave(x);
    for (m, (xm, q)) in ensemble.centers.iter().zip(&solution.charges).enumerate() {
        let r = (x - xm).norm();
        if r < limit {
            return Err(Error::NearField {
                particle: m,
                distance: r,
                guard: limit,
            });
        }
        u += green_at_distance(r, ctx.k()) * q;
    }
    Ok(u)
}

/// Far-field amplitude `A(x̂)` with `u - u0 ~ A(x̂) e^{ikr}/r`.
pub fn far_field_amplitude(
    solution: &EffectiveFieldSolution,
    ensemble: &ParticleEnsemble,
    k: f64,
    direction: &Point,
) -> Complex64 {
    let dir = direction / direction.norm();
    ensemble
        .centers
        .iter()
        .zip(&solution.charges)
        .map(|(xm, q)| Complex64::from_polar(1.0, -k * dir.dot(xm)) * q)
        .sum::<Complex64>()
        / (4.0 * PI)
}

/// `a^(1-κ₁)`: order of the neglected surface term relative to the monopole term.
pub fn validity_ratio(ensemble: &ParticleEnsemble) -> f64 {
    ensemble.a.powf(1.0 - ensemble.law.kappa1())
}
