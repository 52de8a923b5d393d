//! Inverse design: from a target refraction coefficient to particle
//! parameters, and the forward check that the resulting ensemble reproduces
//! the target medium as `a → 0`.
//!
//! `p = k²(n0² - n²) = p1 + i p2` is split with constant density:
//! `N = N_const` on `supp p`, `h1 = p1/(4πN)`, `h2 = p2/(4πN)`.

use crate::convergence::{
    compare_with_limit, evaluate_reference, exterior_probe_plane, non_increasing, sup_relative_discrepancy,
};
use crate::ensemble::{place_particles, DomainBox, ParticleEnsemble, PlacementOptions};
use crate::error::{Error, Result};
use crate::grid::{GridField, RealGrid, VoxelGrid};
use crate::homogenized::{ls_solve, LsOptions};
use crate::kernels::WaveContext;
use crate::manybody::ManyBodyOptions;
use crate::scaling::{effective_potential, Profile, ScalingLaw};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const DEFAULT_RECIPE_KAPPA: f64 = 0.5;

/// Allowed relative growth per step of the round-trip discrepancy.
pub const ROUND_TRIP_SLACK: f64 = 0.1;

/// `k²(n0² - n²)`; refuses `Im n² < 0` (a gain medium).
pub fn target_to_p(n0sq: &GridField, nsq: &GridField, k: f64) -> Result<GridField> {
    if !n0sq.is_conformal(nsq) {
        return Err(Error::Domain("n0^2 and n^2 grids are not conformal".into()));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    if let Some((i, v)) = nsq
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| v.im < 0.0 || !v.is_finite())
    {
        let x = nsq.center_of(i);
        return Err(Error::Passivity(format!(
            "target n^2 = {v} at ({}, {}, {}) has negative imaginary part",
            x[0], x[1], x[2]
        )));
    }
    let values = n0sq
        .values
        .iter()
        .zip(&nsq.values)
        .map(|(a, b)| k * k * (a - b))
        .collect();
    VoxelGrid::from_values(nsq.bounds, nsq.resolution, values)
}

#[derive(Debug, Clone)]
pub struct RecipeDesign {
    pub p: GridField,
    pub n: RealGrid,
    pub h1: RealGrid,
    pub h2: RealGrid,
    pub kappa: f64,
    pub n_const: f64,
}

/// Constant-density split of `p`. `κ` must lie in `(0, 1)`.
pub fn p_to_hn(p: &GridField, n_const: f64, kappa: f64) -> Result<RecipeDesign> {
    if !(n_const > 0.0 && n_const.is_finite()) {
        return Err(Error::Domain(format!("N_const must be positive, got {n_const}")));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Regime(format!("the recipe needs 0 < kappa < 1, got {kappa}")));
    }
    if let Some(v) = p.values.iter().find(|v| v.im > 0.0 || !v.is_finite()) {
        return Err(Error::Passivity(format!("potential p = {v} has Im p > 0")));
    }
    let support = |v: &Complex64| *v != Complex64::new(0.0, 0.0);
    let n = p.map(|v| if support(v) { n_const } else { 0.0 });
    let h1 = p.map(|v| if support(v) { v.re / (4.0 * PI * n_const) } else { 0.0 });
    let h2 = p.map(|v| if support(v) { v.im / (4.0 * PI * n_const) } else { 0.0 });
    Ok(RecipeDesign {
        p: p.clone(),
        n,
        h1,
        h2,
        kappa,
        n_const,
    })
}

impl RecipeDesign {
    pub fn h(&self) -> GridField {
        let values = self
            .h1
            .values
            .iter()
            .zip(&self.h2.values)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        VoxelGrid {
            bounds: self.p.bounds,
            resolution: self.p.resolution,
            values,
        }
    }

    /// Matched Case 1 law at radius `a` with the design's voxel profiles.
    pub fn law(&self, a: f64) -> Result<ScalingLaw> {
        ScalingLaw::matched(self.kappa, a, Profile::from(self.h()), Profile::from(self.n.clone()))
    }

    /// `p` recomputed from the law voxelwise; the algebraic inverse of the split.
    pub fn reconstructed_p(&self) -> Result<GridField> {
        let law = self.law(0.01)?;
        let values = (0..self.p.len())
            .map(|i| effective_potential(&law, &self.p.center_of(i)))
            .collect::<Result<Vec<_>>>()?;
        VoxelGrid::from_values(self.p.bounds, self.p.resolution, values)
    }

    /// Largest voxelwise `|p_rebuilt - p| / max(|p|, tiny)`.
    pub fn reconstruction_error(&self) -> Result<f64> {
        let rebuilt = self.reconstructed_p()?;
        Ok(rebuilt
            .values
            .iter()
            .zip(&self.p.values)
            .map(|(r, p)| (r - p).norm() / p.norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max))
    }

    pub fn is_empty(&self) -> bool {
        self.n.values.iter().all(|v| *v == 0.0)
    }
}

/// Places particles for the design at radius `a` on cubes of side `cube_side`.
pub fn design_ensemble(
    design: &RecipeDesign,
    a: f64,
    cube_side: f64,
    seed: u64,
    placement: &PlacementOptions,
) -> Result<ParticleEnsemble> {
    let law = design.law(a)?;
    let domain = DomainBox::new(design.p.bounds, cube_side)?;
    place_particles(&law, &domain, seed, placement)
}

#[derive(Debug, Clone, Copy)]
pub struct RoundTripOptions {
    pub cube_side: f64,
    pub seed: u64,
    pub placement: PlacementOptions,
    pub manybody: ManyBodyOptions,
    pub ls: LsOptions,
    /// Probe plane distance past the top face of the box.
    pub probe_offset: f64,
    pub probe_points: usize,
}

impl Default for RoundTripOptions {
    fn default() -> Self {
        Self {
            cube_side: 0.5,
            seed: 0,
            placement: PlacementOptions::default(),
            manybody: ManyBodyOptions::default(),
            ls: LsOptions::default(),
            probe_offset: 0.5,
            probe_points: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripRow {
    pub a: f64,
    pub particles: usize,
    pub discrepancy: f64,
    pub validity_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RoundTripReport {
    pub rows: Vec<RoundTripRow>,
    /// Discrepancies satisfy `d_next ≤ (1 + ROUND_TRIP_SLACK) d_prev`.
    pub non_increasing: bool,
    pub reference_residual: f64,
}

/// Compares a solved ensemble for each radius against the
/// homogenized solution with the design's `p`.
pub fn round_trip(
    design: &RecipeDesign,
    a_sweep: &[f64],
    ctx: &WaveContext,
    options: &RoundTripOptions,
) -> Result<RoundTripReport> {
    let reference = ls_solve(&design.p, ctx, &options.ls).map_err(|e| e.in_stage("homogenized"))?;
    let probes = exterior_probe_plane(&design.p.bounds, options.probe_offset, options.probe_points)?;
    let ref_values = evaluate_reference(&reference, &probes).map_err(|e| e.in_stage("homogenized"))?;
    let domain = DomainBox::new(design.p.bounds, options.cube_side)?;
    let mut rows = Vec::with_capacity(a_sweep.len());
    for &a in a_sweep {
        let law = design.law(a).map_err(|e| e.in_stage("design"))?;
        let row = if design.is_empty() {
            let incident: Vec<Complex64> = probes.iter().map(|x| ctx.plane_wave(x)).collect();
            RoundTripRow {
                a,
                particles: 0,
                discrepancy: sup_relative_discrepancy(&incident, &ref_values),
                validity_ratio: a.powf(1.0 - law.kappa1()),
            }
        } else {
            let cmp = compare_with_limit(
                &law,
                &domain,
                options.seed,
                &options.placement,
                ctx,
                &options.manybody,
                &probes,
                &ref_values,
            )?;
            RoundTripRow {
                a,
                particles: cmp.particles,
                discrepancy: cmp.discrepancy,
                validity_ratio: cmp.validity_ratio,
            }
        };
        rows.push(row);
    }
    let d: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    Ok(RoundTripReport {
        non_increasing: non_increasing(&d, ROUND_TRIP_SLACK),
        rows,
        reference_residual: reference.residual,
    })
}
