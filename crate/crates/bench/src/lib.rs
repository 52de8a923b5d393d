//! Fixtures shared by the solver benchmarks.

use manyscat_core::{
    place_particles, Aabb, Complex64, DomainBox, GridField, ParticleEnsemble, PlacementOptions, Point, Profile,
    ScalingLaw, WaveContext,
};

pub fn plane_wave(k: f64) -> WaveContext {
    WaveContext::new(k, Point::new(0.0, 0.0, 1.0)).expect("unit direction")
}

/// Matched Case 1 ensemble with `h = N = 1` in the unit cube.
pub fn case1_ensemble(a: f64, seed: u64) -> ParticleEnsemble {
    let law = ScalingLaw::matched(
        0.5,
        a,
        Profile::Constant(Complex64::new(1.0, 0.0)),
        Profile::Constant(1.0),
    )
    .expect("valid law");
    let domain = DomainBox::new(Aabb::unit(), 0.5).expect("valid domain");
    let opts = PlacementOptions {
        spacing_prefactor: 0.8,
        ..Default::default()
    };
    place_particles(&law, &domain, seed, &opts).expect("feasible placement")
}

/// Constant potential `4π` on an `n³` grid over the unit cube.
pub fn uniform_potential(n: usize) -> GridField {
    GridField::filled(Aabb::unit(), [n, n, n], Complex64::new(4.0 * std::f64::consts::PI, 0.0)).expect("valid grid")
}
