//! Nyström solver for the limiting volume integral equation
//!
//! ```text
//! u(x) = u0(x) - ∫_D G(x, y) q(y) u(y) dy,    q = q0 + p,  q0 = k²(1 - n0²)
//! ```
//!
//! discretized by midpoint quadrature on voxel centers. Off-diagonal weights
//! are `G(x_i - x_j)·|voxel|`; the diagonal uses the integral of `G` over the
//! ball with the voxel's volume. On a uniform grid the operator is a discrete
//! convolution, applied with zero-padded FFTs.

use crate::error::{Error, Result};
use crate::grid::{GridField, VoxelGrid};
use crate::kernels::{green_at_distance, Background, WaveContext};
use crate::linalg::{dense_solve, gmres, relative_residual, GmresConfig, LinearOperator};
use crate::quadrature::gauss_legendre_interval;
use crate::Point;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Largest `k · voxel spacing` treated as resolving the wavelength.
pub const STABLE_K_SPACING: f64 = 0.5;

/// Grids with at most this many voxels are solved densely under `Auto`.
pub const DEFAULT_DENSE_VOXELS: usize = 1000;

/// Minimum resolution per axis for [`pde_residual`].
pub const MIN_RESIDUAL_RESOLUTION: usize = 16;

/// `∫_{|y|<R} e^{ik|y|}/(4π|y|) dy = (e^{ikR}(1 - ikR) - 1)/k²`, with
/// `R = (3V/4π)^(1/3)`; `R²/2` at `k = 0`.
pub fn self_term(voxel_volume: f64, k: f64) -> Complex64 {
    let r = (3.0 * voxel_volume / (4.0 * PI)).cbrt();
    let kr = k * r;
    if kr.abs() < 1.0 {
        // ∫_0^R r e^{ikr} dr = Σ (ik)^n R^{n+2} / (n! (n+2))
        let mut term = Complex64::new(r * r, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 0..40 {
            sum += term / (n as f64 + 2.0);
            term *= Complex64::new(0.0, kr) / (n as f64 + 1.0);
            if term.norm() < 1e-18 * r * r {
                break;
            }
        }
        sum
    } else {
        let e = Complex64::from_polar(1.0, kr);
        (e * Complex64::new(1.0, -kr) - 1.0) / (k * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LsSolver {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct LsOptions {
    pub tol: f64,
    pub solver: LsSolver,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            solver: LsSolver::Auto,
            restart: 80,
            max_iter: 3000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HomogenizedSolution {
    /// Total field `u` at the voxel centers.
    pub field: GridField,
    /// Full potential `q = q0 + p` used in the solve.
    pub potential: GridField,
    pub residual: f64,
    pub iterations: usize,
    pub dense: bool,
    /// Set when `k · spacing` exceeds [`STABLE_K_SPACING`].
    pub stability_warning: bool,
    pub k: f64,
    pub alpha: Point,
}

/// Forward and inverse plans for one axis.
type AxisPlans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

/// Circulant embedding of the voxel kernel, with its FFT cached.
struct VolumeKernel {
    n: [usize; 3],
    padded: [usize; 3],
    spectrum: Vec<Complex64>,
    plans: [AxisPlans; 3],
}

impl VolumeKernel {
    fn new(grid_res: [usize; 3], spacing: [f64; 3], k: f64) -> Self {
        let n = grid_res;
        let padded = n.map(|v| 2 * v);
        let vol = spacing[0] * spacing[1] * spacing[2];
        let diag = self_term(vol, k);
        let total = padded[0] * padded[1] * padded[2];
        let mut table = vec![Complex64::new(0.0, 0.0); total];
        let offset = |i: usize, axis: usize| -> Option<i64> {
            let p = padded[axis];
            if i < n[axis] {
                Some(i as i64)
            } else if i > p - n[axis] {
                Some(i as i64 - p as i64)
            } else {
                None
            }
        };
        for ix in 0..padded[0] {
            let Some(dx) = offset(ix, 0) else { continue };
            for iy in 0..padded[1] {
                let Some(dy) = offset(iy, 1) else { continue };
                for iz in 0..padded[2] {
                    let Some(dz) = offset(iz, 2) else { continue };
                    let idx = (ix * padded[1] + iy) * padded[2] + iz;
                    table[idx] = if dx == 0 && dy == 0 && dz == 0 {
                        diag
                    } else {
                        let r = ((dx as f64 * spacing[0]).powi(2)
                            + (dy as f64 * spacing[1]).powi(2)
                            + (dz as f64 * spacing[2]).powi(2))
                        .sqrt();
                        green_at_distance(r, k) * vol
                    };
                }
            }
        }
        let mut planner = FftPlanner::new();
        let plans = [0, 1, 2].map(|a| (planner.plan_fft_forward(padded[a]), planner.plan_fft_inverse(padded[a])));
        let mut kernel = Self {
            n,
            padded,
            spectrum: Vec::new(),
            plans,
        };
        kernel.fft3(&mut table, true);
        kernel.spectrum = table;
        kernel
    }

    fn fft3(&self, data: &mut [Complex64], forward: bool) {
        let [px, py, pz] = self.padded;
        let pick = |a: usize| -> &Arc<dyn Fft<f64>> {
            if forward {
                &self.plans[a].0
            } else {
                &self.plans[a].1
            }
        };
        // z lines are contiguous
        pick(2).process(data);
        let mut line = vec![Complex64::new(0.0, 0.0); py.max(px)];
        for ix in 0..px {
            for iz in 0..pz {
                for iy in 0..py {
                    line[iy] = data[(ix * py + iy) * pz + iz];
                }
                pick(1).process(&mut line[..py]);
                for iy in 0..py {
                    data[(ix * py + iy) * pz + iz] = line[iy];
                }
            }
        }
        for iy in 0..py {
            for iz in 0..pz {
                for ix in 0..px {
                    line[ix] = data[(ix * py + iy) * pz + iz];
                }
                pick(0).process(&mut line[..px]);
                for ix in 0..px {
                    data[(ix * py + iy) * pz + iz] = line[ix];
                }
            }
        }
    }

    /// `out_i = Σ_j K(x_i - x_j) src_j`
    fn convolve(&self, src: &[Complex64], out: &mut [Complex64]) {
        let [nx, ny, nz] = self.n;
        let [px, py, pz] = self.padded;
        let mut buf = vec![Complex64::new(0.0, 0.0); px * py * pz];
        for ix in 0..nx {
            for iy in 0..ny {
                let s = (ix * ny + iy) * nz;
                let d = (ix * py + iy) * pz;
                buf[d..d + nz].copy_from_slice(&src[s..s + nz]);
            }
        }
        self.fft3(&mut buf, true);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.fft3(&mut buf, false);
        let scale = 1.0 / (px * py * pz) as f64;
        for ix in 0..nx {
            for iy in 0..ny {
                let s = (ix * ny + iy) * nz;
                let d = (ix * py + iy) * pz;
                for iz in 0..nz {
                    out[s + iz] = buf[d + iz] * scale;
                }
            }
        }
    }
}

/// `u ↦ u + K(q u)` on the voxel grid.
pub struct VolumeOperator {
    kernel: VolumeKernel,
    q: Vec<Complex64>,
}

impl VolumeOperator {
    pub fn new(q: &GridField, k: f64) -> Self {
        Self {
            kernel: VolumeKernel::new(q.resolution, q.spacing(), k),
            q: q.values.clone(),
        }
    }
}

impl LinearOperator for VolumeOperator {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let src: Vec<Complex64> = x.iter().zip(&self.q).map(|(u, q)| u * q).collect();
        self.kernel.convolve(&src, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += xi;
        }
    }
}

/// Explicit matrix of the same discrete operator, for small grids.
pub fn assemble_dense(q: &GridField, k: f64) -> DMatrix<Complex64> {
    let n = q.len();
    let centers = q.centers();
    let vol = q.voxel_volume();
    let diag = self_term(vol, k);
    DMatrix::from_fn(n, n, |i, j| {
        let w = if i == j {
            diag
        } else {
            green_at_distance((centers[i] - centers[j]).norm(), k) * vol
        };
        let delta = if i == j { 1.0 } else { 0.0 };
        delta + w * q.values[j]
    })
}

/// `q = k²(1 - n0²) + p` on the grid of `p`.
pub fn total_potential(p: &GridField, ctx: &WaveContext) -> Result<GridField> {
    match ctx.background() {
        Background::FreeSpace => Ok(p.clone()),
        Background::Voxelized(n0sq) => {
            if !n0sq.is_conformal(p) {
                return Err(Error::Domain("background n0^2 grid is not conformal with p".into()));
            }
            let k2 = ctx.k() * ctx.k();
            let values = p
                .values
                .iter()
                .zip(&n0sq.values)
                .map(|(pi, n0)| pi + k2 * (1.0 - n0))
                .collect();
            VoxelGrid::from_values(p.bounds, p.resolution, values)
        }
    }
}

/// Solves the discretized integral equation for the total field on `p`'s grid.
pub fn ls_solve(p: &GridField, ctx: &WaveContext, options: &LsOptions) -> Result<HomogenizedSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::Domain("solver tolerance must be positive".into()));
    }
    if p.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("potential has non-finite values".into()));
    }
    let q = total_potential(p, ctx)?;
    let k = ctx.k();
    let hmax = q.spacing().iter().cloned().fold(0.0, f64::max);
    let stability_warning = k * hmax > STABLE_K_SPACING;
    let rhs: Vec<Complex64> = q.centers().iter().map(|x| ctx.plane_wave(x)).collect();

    let op = VolumeOperator::new(&q, k);
    let dense = match options.solver {
        LsSolver::Dense => true,
        LsSolver::Iterative => false,
        LsSolver::Auto => q.len() <= DEFAULT_DENSE_VOXELS,
    };
    let (u, iterations) = if dense {
        (dense_solve(assemble_dense(&q, k), &rhs)?, 0)
    } else {
        let cfg = GmresConfig {
            tol: options.tol,
            restart: options.restart,
            max_iter: options.max_iter,
        };
        let out = gmres(&op, &rhs, &cfg)?;
        (out.x, out.iterations)
    };
    let residual = relative_residual(&op, &u, &rhs);
    if !(residual <= options.tol) {
        return Err(Error::Singular {
            message: format!(
                "volume-equation residual {residual:e} exceeds tolerance {:e}",
                options.tol
            ),
            condition_estimate: f64::NAN,
        });
    }
    Ok(HomogenizedSolution {
        field: VoxelGrid::from_values(q.bounds, q.resolution, u)?,
        potential: q,
        residual,
        iterations,
        dense,
        stability_warning,
        k,
        alpha: ctx.alpha(),
    })
}

impl HomogenizedSolution {
    /// Discrete sources `s_j = |voxel| q_j u_j`.
    pub fn sources(&self) -> Vec<Complex64> {
        let vol = self.field.voxel_volume();
        self.field
            .values
            .iter()
            .zip(&self.potential.values)
            .map(|(u, q)| u * q * vol)
            .collect()
    }

    fn incident(&self, x: &Point) -> Complex64 {
        Complex64::from_polar(1.0, self.k * self.alpha.dot(x))
    }

    /// Nyström interpolant `u0(x) - Σ_j G(x, x_j) s_j` at a point outside the grid box.
    pub fn evaluate(&self, x: &Point) -> Result<Complex64> {
        if self.field.bounds.distance_to(x) <= 0.0 {
            return Err(Error::Domain(format!(
                "point ({}, {}, {}) is inside the grid box; read the grid instead",
                x[0], x[1], x[2]
            )));
        }
        let mut u = self.incident(x);
        for (j, s) in self.sources().iter().enumerate() {
            let r = (x - self.field.center_of(j)).norm();
            u -= green_at_distance(r, self.k) * s;
        }
        Ok(u)
    }

    /// Far-field amplitude `A(x̂)` with `u - u0 ~ A(x̂) e^{ikr}/r`.
    pub fn far_field_amplitude(&self, direction: &Point) -> Complex64 {
        let dir = direction / direction.norm();
        -self
            .sources()
            .iter()
            .enumerate()
            .map(|(j, s)| Complex64::from_polar(1.0, -self.k * dir.dot(&self.field.center_of(j))) * s)
            .sum::<Complex64>()
            / (4.0 * PI)
    }

    /// Power balance of the discrete solution.
    pub fn energy_balance(&self, quadrature_order: usize) -> EnergyBalance {
        let extinction = 4.0 * PI * self.far_field_amplitude(&self.alpha).im;
        let (mu, wmu) = gauss_legendre_interval(quadrature_order, -1.0, 1.0);
        let n_phi = 2 * quadrature_order;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut integral = 0.0;
        for (ct, w) in mu.iter().zip(&wmu) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..n_phi {
                let (sp, cp) = (j as f64 * dphi).sin_cos();
                let a = self.far_field_amplitude(&Point::new(st * cp, st * sp, *ct));
                integral += w * dphi * a.norm_sqr();
            }
        }
        let vol = self.field.voxel_volume();
        let absorption = -vol
            * self
                .field
                .values
                .iter()
                .zip(&self.potential.values)
                .map(|(u, q)| q.im * u.norm_sqr())
                .sum::<f64>();
        EnergyBalance {
            extinction,
            scattering: self.k * integral,
            absorption,
        }
    }
}

/// Extinction `4π Im A(α)`, scattering `k∮|A|²`, absorption `-Σ Im q |u|² |voxel|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub extinction: f64,
    pub scattering: f64,
    pub absorption: f64,
}

/// `max |∇²_h u + k²u - q u| / max |u|` over voxels at least two cells from
/// the grid faces, with the 7-point Laplacian.
pub fn pde_residual(u: &GridField, p: &GridField, ctx: &WaveContext) -> Result<f64> {
    if u.resolution.iter().any(|&n| n < MIN_RESIDUAL_RESOLUTION) {
        return Err(Error::Precondition(format!(
            "pde_residual needs at least {MIN_RESIDUAL_RESOLUTION} voxels per axis, got {:?}",
            u.resolution
        )));
    }
    if !u.is_conformal(p) {
        return Err(Error::Domain("u and p grids are not conformal".into()));
    }
    let q = total_potential(p, ctx)?;
    let h = u.spacing();
    let k2 = ctx.k() * ctx.k();
    let [nx, ny, nz] = u.resolution;
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let at = |i: usize, j: usize, l: usize| u.values[(i * ny + j) * nz + l];
    let mut worst = 0.0f64;
    for i in 2..nx - 2 {
        for j in 2..ny - 2 {
            for l in 2..nz - 2 {
                let c = at(i, j, l);
                let lap = (at(i + 1, j, l) + at(i - 1, j, l) - 2.0 * c) / (h[0] * h[0])
                    + (at(i, j + 1, l) + at(i, j - 1, l) - 2.0 * c) / (h[1] * h[1])
                    + (at(i, j, l + 1) + at(i, j, l - 1) - 2.0 * c) / (h[2] * h[2]);
                let r = lap + (k2 - q.values[(i * ny + j) * nz + l]) * c;
                worst = worst.max(r.norm());
            }
        }
    }
    Ok(worst / scale)
}

/// Coarse-grid view of a field on a grid refined by 2 per axis: each coarse
/// voxel takes the mean of its eight children.
pub fn restrict_by_two(fine: &GridField) -> Result<GridField> {
    if fine.resolution.iter().any(|n| n % 2 != 0) {
        return Err(Error::Domain("restriction needs even resolution".into()));
    }
    let coarse_res = fine.resolution.map(|n| n / 2);
    let mut values = Vec::with_capacity(coarse_res.iter().product());
    for i in 0..coarse_res[0] {
        for j in 0..coarse_res[1] {
            for l in 0..coarse_res[2] {
                let mut s = Complex64::new(0.0, 0.0);
                for di in 0..2 {
                    for dj in 0..2 {
                        for dl in 0..2 {
                            s += *fine.get([2 * i + di, 2 * j + dj, 2 * l + dl]);
                        }
                    }
                }
                values.push(s / 8.0);
            }
        }
    }
    VoxelGrid::from_values(fine.bounds, coarse_res, values)
}
