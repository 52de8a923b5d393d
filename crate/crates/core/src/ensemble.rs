//! Particle configurations. The host box is split into counting cubes, each
//! holding `[a^(-3κ₁) ∫ N]` particles on a seeded lattice of pitch
//! `d = c_d · a^κ₁`.

use crate::error::{Error, Result};
use crate::grid::Aabb;
use crate::scaling::{classify_regime, ScalingLaw};
use crate::Point;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum ratio between counting-cube side and particle radius.
pub const MIN_CUBE_TO_RADIUS: f64 = 10.0;

/// The host domain `D` together with its counting-cube resolution `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    pub bounds: Aabb,
    pub cube_side: f64,
}

impl DomainBox {
    pub fn new(bounds: Aabb, cube_side: f64) -> Result<Self> {
        if !(cube_side > 0.0 && cube_side <= bounds.min_side() * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "cube side {cube_side} must lie in (0, {}]",
                bounds.min_side()
            )));
        }
        Ok(Self { bounds, cube_side })
    }

    /// Number of cubes per axis; each axis is split into `round(L/b)` equal cells.
    pub fn cube_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| ((self.bounds.side(i) / self.cube_side).round() as usize).max(1))
    }

    pub fn cube(&self, idx: [usize; 3]) -> Aabb {
        let dims = self.cube_dims();
        let lo = Point::from_fn(|i, _| self.bounds.lo[i] + self.bounds.side(i) * idx[i] as f64 / dims[i] as f64);
        let hi = Point::from_fn(|i, _| self.bounds.lo[i] + self.bounds.side(i) * (idx[i] + 1) as f64 / dims[i] as f64);
        Aabb { lo, hi }
    }

    /// Cube indices in lexicographic (x-major) order.
    pub fn cube_indices(&self) -> Vec<[usize; 3]> {
        let d = self.cube_dims();
        let mut out = Vec::with_capacity(d[0] * d[1] * d[2]);
        for i in 0..d[0] {
            for j in 0..d[1] {
                for k in 0..d[2] {
                    out.push([i, j, k]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementOptions {
    /// `c_d` in `d = c_d · a^κ₁`.
    pub spacing_prefactor: f64,
    /// Midpoint sub-cells per axis when integrating `N` over a cube.
    pub integration_refinement: usize,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            spacing_prefactor: 1.0,
            integration_refinement: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub centers: Vec<Point>,
    pub a: f64,
    /// `h(x_m)` per particle.
    pub h_values: Vec<Complex64>,
    /// `ζ_m = h(x_m)/a^κ`.
    pub zeta: Vec<Complex64>,
    pub law: ScalingLaw,
    pub domain: DomainBox,
    pub seed: u64,
    /// Smallest lattice pitch among occupied cubes (at least `c_d a^κ₁`).
    pub spacing: f64,
    /// Particles per cube, in [`DomainBox::cube_indices`] order.
    pub cube_counts: Vec<usize>,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Smallest pairwise center distance (brute force; infinite for M < 2).
    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.centers.len() {
            for j in (i + 1)..self.centers.len() {
                best = best.min((self.centers[i] - self.centers[j]).norm());
            }
        }
        best
    }

    /// `(4π/3) a³ M / |D|`.
    pub fn volume_fraction(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.a.powi(3) * self.len() as f64 / self.domain.bounds.volume()
    }
}

/// Midpoint-rule integral of `N` over `cell` with `refinement³` sub-cells.
pub fn integrate_density(law: &ScalingLaw, cell: &Aabb, refinement: usize) -> Result<f64> {
    let r = refinement.max(1);
    let h = [0, 1, 2].map(|i| cell.side(i) / r as f64);
    let dv = h[0] * h[1] * h[2];
    let mut total = 0.0;
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let x = Point::new(
                    cell.lo[0] + (i as f64 + 0.5) * h[0],
                    cell.lo[1] + (j as f64 + 0.5) * h[1],
                    cell.lo[2] + (k as f64 + 0.5) * h[2],
                );
                total += law.density_at(&x)? * dv;
            }
        }
    }
    Ok(total)
}

/// Pre-rounding count `a^(-3κ₁) ∫_cell N`.
pub fn expected_count(law: &ScalingLaw, cell: &Aabb, refinement: usize) -> Result<f64> {
    Ok(law.a().powf(-3.0 * law.kappa1()) * integrate_density(law, cell, refinement)?)
}

/// Nearest integer (ties to even) to `a^(-3κ₁) ∫_cell N dx`.
pub fn cube_count(law: &ScalingLaw, cell: &Aabb, refinement: usize) -> Result<usize> {
    classify_regime(law).require_approximation()?;
    let c = expected_count(law, cell, refinement)?;
    Ok(c.round_ties_even() as usize)
}

/// Cell-centered lattice tiling `cell` with `floor(side/d)` sites per axis
/// (pitch `side/n ≥ d`), keeping clearance `a` from `D`'s faces. Returns the
/// sites and the smallest pitch used.
fn lattice_sites(cell: &Aabb, d: f64, domain: &Aabb, a: f64) -> (Vec<Point>, f64) {
    let n = [0, 1, 2].map(|i| (cell.side(i) / d + 1e-9).floor() as usize);
    let pitch = [0, 1, 2].map(|i| {
        if n[i] > 0 {
            cell.side(i) / n[i] as f64
        } else {
            f64::INFINITY
        }
    });
    let mut sites = Vec::with_capacity(n[0] * n[1] * n[2]);
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let x = Point::new(
                    cell.lo[0] + (i as f64 + 0.5) * pitch[0],
                    cell.lo[1] + (j as f64 + 0.5) * pitch[1],
                    cell.lo[2] + (k as f64 + 0.5) * pitch[2],
                );
                if domain.clearance(&x) >= a {
                    sites.push(x);
                }
            }
        }
    }
    (sites, pitch.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Places `cube_count` particles in every cube on a uniform sub-lattice with
/// pitch at least `d = c_d a^κ₁`, choosing occupied sites in seeded-shuffled
/// order.
///
/// Each cube's lattice tiles the cube, so sites in neighbouring cubes are
/// also at least `d` apart.
pub fn place_particles(
    law: &ScalingLaw,
    domain: &DomainBox,
    seed: u64,
    options: &PlacementOptions,
) -> Result<ParticleEnsemble> {
    classify_regime(law).require_approximation()?;
    let a = law.a();
    if domain.cube_side < MIN_CUBE_TO_RADIUS * a {
        return Err(Error::Domain(format!(
            "cube side {} must be at least {MIN_CUBE_TO_RADIUS} particle radii ({})",
            domain.cube_side,
            MIN_CUBE_TO_RADIUS * a
        )));
    }
    if !(options.spacing_prefactor > 0.0) {
        return Err(Error::Domain("spacing prefactor must be positive".into()));
    }
    let d = options.spacing_prefactor * law.spacing();
    if d < 2.0 * a {
        return Err(Error::Domain(format!(
            "lattice pitch {d} is below one particle diameter {}",
            2.0 * a
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pitch = f64::INFINITY;
    let mut centers = Vec::new();
    let mut cube_counts = Vec::new();
    for idx in domain.cube_indices() {
        let cell = domain.cube(idx);
        let count = cube_count(law, &cell, options.integration_refinement)?;
        let (mut sites, cube_pitch) = lattice_sites(&cell, d, &domain.bounds, a);
        if count > 0 {
            pitch = pitch.min(cube_pitch);
        }
        if count > sites.len() {
            return Err(Error::Capacity {
                cube: idx,
                requested: count,
                capacity: sites.len(),
            });
        }
        sites.shuffle(&mut rng);
        centers.extend_from_slice(&sites[..count]);
        cube_counts.push(count);
    }

    let mut h_values = Vec::with_capacity(centers.len());
    let mut zeta = Vec::with_capacity(centers.len());
    let a_kappa = a.powf(law.kappa());
    for x in &centers {
        let h = law.h_at(x)?;
        h_values.push(h);
        zeta.push(h / a_kappa);
    }

    Ok(ParticleEnsemble {
        centers,
        a,
        h_values,
        zeta,
        law: law.clone(),
        domain: *domain,
        seed,
        spacing: if pitch.is_finite() { pitch } else { d },
        cube_counts,
    })
}

/// Empirical density `#{x_m ∈ probe} · a^(3κ₁) / |probe|`.
pub fn empirical_density(ensemble: &ParticleEnsemble, probe: &Aabb) -> Result<f64> {
    let vol = probe.volume();
    if !(vol > 0.0) {
        return Err(Error::Domain("probe has zero volume".into()));
    }
    let count = ensemble.centers.iter().filter(|x| probe.contains(x)).count();
    Ok(count as f64 * ensemble.a.powf(3.0 * ensemble.law.kappa1()) / vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::Profile;

    fn law_const(kappa: f64, a: f64, n: f64) -> ScalingLaw {
        ScalingLaw::matched(
            kappa,
            a,
            Profile::Constant(Complex64::new(1.0, 0.0)),
            Profile::Constant(n),
        )
        .unwrap()
    }

    fn unit_domain(b: f64) -> DomainBox {
        DomainBox::new(Aabb::unit(), b).unwrap()
    }

    #[test]
    fn cube_count_examples() {
        let law = law_const(0.5, 0.01, 1.0);
        let cell = Aabb::new(Point::zeros(), Point::new(0.1, 0.1, 0.1)).unwrap();
        assert_eq!(cube_count(&law, &cell, 4).unwrap(), 1);

        let empty = law_const(0.5, 0.01, 0.0);
        assert_eq!(cube_count(&empty, &cell, 4).unwrap(), 0);

        let doubled = Aabb::new(Point::zeros(), Point::new(0.2, 0.1, 0.1)).unwrap();
        let c1 = expected_count(&law, &cell, 4).unwrap();
        let c2 = expected_count(&law, &doubled, 4).unwrap();
        assert!((c2 - 2.0 * c1).abs() < 1e-9);
    }

    #[test]
    fn negative_density_is_rejected() {
        let law = ScalingLaw::matched(
            0.5,
            0.01,
            Profile::Constant(Complex64::new(1.0, 0.0)),
            Profile::function(|x: &Point| x[0] - 0.5),
        )
        .unwrap();
        let cell = Aabb::unit();
        assert!(matches!(cube_count(&law, &cell, 2), Err(Error::InvalidDensity { .. })));
    }

    #[test]
    fn counts_round_ties_to_even() {
        // a^(-3κ₁) ∫N = 2.5 exactly -> 2
        let law = law_const(0.5, 0.01, 2.5e-3);
        let cell = Aabb::unit();
        assert_eq!(expected_count(&law, &cell, 1).unwrap(), 2.5);
        assert_eq!(cube_count(&law, &cell, 1).unwrap(), 2);
    }

    #[test]
    fn unit_cube_example_places_one_thousand() {
        let law = law_const(0.5, 0.01, 1.0);
        let e = place_particles(&law, &unit_domain(0.5), 7, &PlacementOptions::default()).unwrap();
        assert_eq!(e.len(), 1000);
        assert_eq!(e.cube_counts, vec![125; 8]);
        assert!(e.min_pair_distance() >= 0.1 - 1e-12);
        for x in &e.centers {
            assert!(Aabb::unit().clearance(x) >= e.a);
        }
    }

    #[test]
    fn total_matches_direct_integral_of_density() {
        // independent route: one midpoint integral of N over the whole of D
        let law = ScalingLaw::matched(
            0.5,
            0.02,
            Profile::Constant(Complex64::new(1.0, 0.0)),
            Profile::function(|x: &Point| 0.5 + 0.25 * x[0]),
        )
        .unwrap();
        let domain = unit_domain(0.5);
        let opts = PlacementOptions {
            spacing_prefactor: 0.7,
            integration_refinement: 8,
        };
        let e = place_particles(&law, &domain, 3, &opts).unwrap();
        let direct = 0.02f64.powf(-1.5) * 0.625;
        let rounding_slack = 0.5 * e.cube_counts.len() as f64;
        assert!(
            (e.len() as f64 - direct).abs() <= rounding_slack,
            "{} vs {direct}",
            e.len()
        );
    }

    #[test]
    fn same_seed_same_ensemble() {
        let law = law_const(0.5, 0.02, 1.0);
        let opts = PlacementOptions {
            spacing_prefactor: 0.8,
            ..Default::default()
        };
        let a = place_particles(&law, &unit_domain(0.5), 11, &opts).unwrap();
        let b = place_particles(&law, &unit_domain(0.5), 11, &opts).unwrap();
        let c = place_particles(&law, &unit_domain(0.5), 12, &opts).unwrap();
        let bits = |e: &ParticleEnsemble| {
            e.centers
                .iter()
                .flat_map(|x| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn over_full_cube_is_a_capacity_error() {
        let law = law_const(0.5, 0.02, 1.0);
        let err = place_particles(&law, &unit_domain(0.5), 1, &PlacementOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Capacity { cube: [0, 0, 0], .. }), "{err}");
    }

    #[test]
    fn cube_side_must_dominate_radius() {
        let law = law_const(0.5, 0.04, 1.0);
        let r = place_particles(&law, &unit_domain(0.25), 1, &PlacementOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn impedances_follow_scaling() {
        let law = ScalingLaw::matched(
            0.5,
            0.02,
            Profile::function(|x: &Point| Complex64::new(1.0 + x[0], -x[1])),
            Profile::Constant(1.0),
        )
        .unwrap();
        let opts = PlacementOptions {
            spacing_prefactor: 0.8,
            ..Default::default()
        };
        let e = place_particles(&law, &unit_domain(0.5), 5, &opts).unwrap();
        for (m, x) in e.centers.iter().enumerate() {
            let h = law.h_at(x).unwrap();
            assert_eq!(e.zeta[m], h / 0.02f64.powf(0.5));
        }
    }

    #[test]
    fn empirical_density_examples() {
        let law = law_const(0.5, 0.01, 1.0);
        let e = place_particles(&law, &unit_domain(0.5), 9, &PlacementOptions::default()).unwrap();
        let whole = empirical_density(&e, &Aabb::unit()).unwrap();
        assert!((whole - 1.0).abs() < 1e-12);
        let probe = Aabb::new(Point::new(0.2, 0.2, 0.2), Point::new(0.6, 0.6, 0.6)).unwrap();
        let n = e.centers.iter().filter(|x| probe.contains(x)).count();
        assert!(n >= 20);
        assert!((empirical_density(&e, &probe).unwrap() - 1.0).abs() < 0.15);
        let outside = Aabb::new(Point::new(2.0, 2.0, 2.0), Point::new(3.0, 3.0, 3.0)).unwrap();
        assert_eq!(empirical_density(&e, &outside).unwrap(), 0.0);
    }

    #[test]
    fn particle_count_scales_like_inverse_power_of_radius() {
        let opts = PlacementOptions {
            spacing_prefactor: 0.8,
            ..Default::default()
        };
        for a in [0.04, 0.02, 0.01] {
            let e = place_particles(&law_const(0.5, a, 1.0), &unit_domain(0.5), 1, &opts).unwrap();
            let ratio = e.len() as f64 * a.powf(1.5);
            assert!((0.9..1.1).contains(&ratio), "a={a} ratio={ratio}");
            assert!(e.min_pair_distance() >= 0.8 * a.powf(0.5) - 1e-12);
        }
    }

    #[test]
    fn volume_fraction_vanishes_along_matched_scaling() {
        let opts = PlacementOptions {
            spacing_prefactor: 0.8,
            ..Default::default()
        };
        let mut prev = f64::INFINITY;
        for a in [0.04, 0.02, 0.01] {
            let e = place_particles(&law_const(0.5, a, 1.0), &unit_domain(0.5), 1, &opts).unwrap();
            let v = e.volume_fraction();
            assert!(v < prev);
            prev = v;
        }
    }
}
