//! Shared harness comparing many-body fields with the homogenized limit on
//! a probe set outside the scattering region.

use crate::ensemble::{place_particles, DomainBox, ParticleEnsemble, PlacementOptions};
use crate::error::{Error, Result};
use crate::grid::{Aabb, GridField};
use crate::homogenized::{ls_solve, HomogenizedSolution, LsOptions};
use crate::kernels::WaveContext;
use crate::manybody::{evaluate_field, solve_effective_field, validity_ratio, EffectiveFieldSolution, ManyBodyOptions};
use crate::scaling::{classify_regime, effective_potential, ScalingLaw};
use crate::Point;
use num_complex::Complex64;

/// Probes keep at least this many radii from every particle.
pub const PROBE_CLEARANCE_RADII: f64 = 5.0;

/// `n × n` cell-centered points on the plane `z = bounds.hi.z + offset`,
/// spanning the box in `x` and `y`.
pub fn exterior_probe_plane(bounds: &Aabb, offset: f64, n: usize) -> Result<Vec<Point>> {
    if !(offset > 0.0) || n == 0 {
        return Err(Error::Domain("probe plane needs a positive offset and n >= 1".into()));
    }
    let z = bounds.hi[2] + offset;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = bounds.lo[0] + (i as f64 + 0.5) / n as f64 * bounds.side(0);
            let y = bounds.lo[1] + (j as f64 + 0.5) / n as f64 * bounds.side(1);
            pts.push(Point::new(x, y, z));
        }
    }
    Ok(pts)
}

/// `max |a - b| / max |b|` (absolute when `b` vanishes).
pub fn sup_relative_discrepancy(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// True when every step satisfies `next ≤ (1 + slack) · prev`.
pub fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Fails when a probe sits within `PROBE_CLEARANCE_RADII · a` of a particle.
pub fn check_probe_clearance(ensemble: &ParticleEnsemble, probes: &[Point]) -> Result<()> {
    let guard = PROBE_CLEARANCE_RADII * ensemble.a;
    for x in probes {
        for (m, c) in ensemble.centers.iter().enumerate() {
            let d = (x - c).norm();
            if d < guard {
                return Err(Error::NearField {
                    particle: m,
                    distance: d,
                    guard,
                });
            }
        }
    }
    Ok(())
}

/// `p` sampled at the voxel centers of a grid on `bounds`.
pub fn limit_potential_grid(law: &ScalingLaw, bounds: Aabb, resolution: [usize; 3]) -> Result<GridField> {
    classify_regime(law).require_limit(law.kappa1())?;
    let centers = GridField::filled(bounds, resolution, Complex64::new(0.0, 0.0))?.centers();
    let values = centers
        .iter()
        .map(|x| effective_potential(law, x))
        .collect::<Result<Vec<_>>>()?;
    GridField::from_values(bounds, resolution, values)
}

/// Homogenized reference for the law's limiting potential.
pub fn reference_solution(
    law: &ScalingLaw,
    bounds: Aabb,
    resolution: [usize; 3],
    ctx: &WaveContext,
    options: &LsOptions,
) -> Result<HomogenizedSolution> {
    let p = limit_potential_grid(law, bounds, resolution).map_err(|e| e.in_stage("potential"))?;
    ls_solve(&p, ctx, options).map_err(|e| e.in_stage("homogenized"))
}

pub fn evaluate_reference(reference: &HomogenizedSolution, probes: &[Point]) -> Result<Vec<Complex64>> {
    probes.iter().map(|x| reference.evaluate(x)).collect()
}

#[derive(Debug, Clone)]
pub struct LimitComparison {
    pub a: f64,
    pub particles: usize,
    pub discrepancy: f64,
    pub validity_ratio: f64,
    pub residual: f64,
    pub ensemble: ParticleEnsemble,
    pub solution: EffectiveFieldSolution,
    pub probe_values: Vec<Complex64>,
}

/// Solves one placed ensemble, then measures the sup-norm
/// relative discrepancy against `reference_values` on `probes`.
#[allow(clippy::too_many_arguments)]
pub fn compare_with_limit(
    law: &ScalingLaw,
    domain: &DomainBox,
    seed: u64,
    placement: &PlacementOptions,
    ctx: &WaveContext,
    options: &ManyBodyOptions,
    probes: &[Point],
    reference_values: &[Complex64],
) -> Result<LimitComparison> {
    let ensemble = place_particles(law, domain, seed, placement).map_err(|e| e.in_stage("ensemble"))?;
    check_probe_clearance(&ensemble, probes).map_err(|e| e.in_stage("probe"))?;
    let solution = solve_effective_field(&ensemble, ctx, options).map_err(|e| e.in_stage("manybody"))?;
    let guard = PROBE_CLEARANCE_RADII * ensemble.a;
    let probe_values = probes
        .iter()
        .map(|x| evaluate_field(&solution, &ensemble, ctx, x, guard))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("evaluate"))?;
    Ok(LimitComparison {
        a: law.a(),
        particles: ensemble.len(),
        discrepancy: sup_relative_discrepancy(&probe_values, reference_values),
        validity_ratio: validity_ratio(&ensemble),
        residual: solution.residual_norm,
        ensemble,
        solution,
        probe_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_plane_layout() {
        let p = exterior_probe_plane(&Aabb::unit(), 0.5, 4).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.iter().all(|x| x[2] == 1.5 && x[0] > 0.0 && x[0] < 1.0));
        assert!(exterior_probe_plane(&Aabb::unit(), 0.0, 4).is_err());
    }

    #[test]
    fn monotonicity_helpers() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert!(non_increasing(&[1.0, 1.05, 1.1], 0.1));
        assert!(!non_increasing(&[1.0, 1.2], 0.1));
    }

    #[test]
    fn discrepancy_is_relative_to_reference() {
        let c = |v: f64| Complex64::new(v, 0.0);
        assert!((sup_relative_discrepancy(&[c(1.0), c(2.2)], &[c(1.0), c(2.0)]) - 0.1).abs() < 1e-15);
        assert_eq!(sup_relative_discrepancy(&[c(0.5)], &[c(0.0)]), 0.5);
    }
}
