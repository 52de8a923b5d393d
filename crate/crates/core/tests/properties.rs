use manyscat_core::convergence::sup_relative_discrepancy;
use manyscat_core::manybody::{far_field_amplitude, solve_with_incident};
use manyscat_core::{
    ls_solve, place_particles, solve_effective_field, Aabb, Complex64, DomainBox, Error, GridField, LsOptions,
    ManyBodyOptions, PlacementOptions, Point, Profile, ScalingLaw, WaveContext,
};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn case1(a: f64, h: Complex64) -> ScalingLaw {
    ScalingLaw::matched(0.5, a, Profile::Constant(h), Profile::Constant(1.0)).unwrap()
}

fn ensemble(a: f64, h: Complex64, seed: u64) -> manyscat_core::ParticleEnsemble {
    let domain = DomainBox::new(Aabb::unit(), 0.5).unwrap();
    let placement = PlacementOptions {
        spacing_prefactor: 0.8,
        ..PlacementOptions::default()
    };
    place_particles(&case1(a, h), &domain, seed, &placement).unwrap()
}

fn ctx(dir: Point) -> WaveContext {
    WaveContext::with_direction(1.5, dir).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn placement_keeps_lattice_spacing_and_clearance(
        kappa in 0.1..0.9f64,
        a in 0.01..0.05f64,
        prefactor in 0.5..1.5f64,
        seed in any::<u64>(),
    ) {
        let law = ScalingLaw::matched(kappa, a, Profile::Constant(c(1.0, -0.1)), Profile::Constant(1.0)).unwrap();
        let domain = DomainBox::new(Aabb::unit(), 0.5).unwrap();
        let placement = PlacementOptions { spacing_prefactor: prefactor, ..PlacementOptions::default() };
        match place_particles(&law, &domain, seed, &placement) {
            Err(Error::Capacity { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok(ens) => {
                let d = prefactor * a.powf(law.kappa1());
                prop_assert!(ens.spacing >= d * (1.0 - 1e-12));
                if ens.len() > 1 {
                    prop_assert!(ens.min_pair_distance() >= d * (1.0 - 1e-12));
                }
                prop_assert_eq!(ens.cube_counts.iter().sum::<usize>(), ens.len());
                for (x, (z, h)) in ens.centers.iter().zip(ens.zeta.iter().zip(&ens.h_values)) {
                    prop_assert!(Aabb::unit().clearance(x) >= a);
                    prop_assert!((z * a.powf(kappa) - h).norm() <= 1e-14 * h.norm());
                }
            }
        }
    }

    #[test]
    fn effective_field_is_linear_in_the_incident_wave(
        re in -3.0..3.0f64,
        im in -3.0..3.0f64,
        seed in 0u64..1000,
    ) {
        let ens = ensemble(0.04, c(1.0, -0.3), seed);
        let ctx = ctx(Point::new(0.3, 0.0, 1.0));
        let opts = ManyBodyOptions { tol: 1e-13, ..ManyBodyOptions::default() };
        let base: Vec<Complex64> = ens.centers.iter().map(|x| ctx.plane_wave(x)).collect();
        let scale = c(re, im);
        prop_assume!(scale.norm() > 1e-3);
        let scaled: Vec<Complex64> = base.iter().map(|v| v * scale).collect();
        let u1 = solve_with_incident(&ens, &ctx, &base, &opts).unwrap();
        let u2 = solve_with_incident(&ens, &ctx, &scaled, &opts).unwrap();
        let expected: Vec<Complex64> = u1.charges.iter().map(|q| q * scale).collect();
        prop_assert!(sup_relative_discrepancy(&u2.charges, &expected) < 1e-10);
        prop_assert!(u2.residual_norm <= opts.tol);
    }
}

#[test]
fn far_field_is_reciprocal() {
    let ens = ensemble(0.02, c(1.0, -0.5), 3);
    let opts = ManyBodyOptions {
        tol: 1e-13,
        ..ManyBodyOptions::default()
    };
    let alpha = Point::new(0.2, -0.4, 0.9).normalize();
    let beta = Point::new(-0.7, 0.1, 0.3).normalize();
    let from_alpha = ctx(alpha);
    let from_beta = ctx(beta);
    let sa = solve_effective_field(&ens, &from_alpha, &opts).unwrap();
    let sb = solve_effective_field(&ens, &from_beta, &opts).unwrap();
    let ab = far_field_amplitude(&sa, &ens, from_alpha.k(), &(-beta));
    let ba = far_field_amplitude(&sb, &ens, from_beta.k(), &(-alpha));
    assert!((ab - ba).norm() <= 1e-10 * ab.norm(), "{ab} vs {ba}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn passive_potentials_do_not_create_energy(
        re in -20.0..20.0f64,
        im in -20.0..0.0f64,
        width in 0.1..0.4f64,
        cx in 0.3..0.7f64,
    ) {
        let bounds = Aabb::unit();
        let centre = Point::new(cx, 0.5, 0.5);
        let p = GridField::from_fn(bounds, [8, 8, 8], |x| {
            c(re, im) * (-(x - centre).norm_squared() / (2.0 * width * width)).exp()
        }).unwrap();
        let ctx = WaveContext::new(1.0, Point::new(0.0, 0.0, 1.0)).unwrap();
        let sol = ls_solve(&p, &ctx, &LsOptions::default()).unwrap();
        let e = sol.energy_balance(24);
        let scale = e.extinction.abs().max(e.scattering).max(1e-12);
        prop_assert!(e.scattering >= 0.0);
        prop_assert!(e.absorption >= -1e-12 * scale);
        // absorption read off the far field
        prop_assert!(e.extinction - e.scattering >= -1e-6 * scale);
        prop_assert!((e.extinction - e.scattering - e.absorption).abs() <= 1e-3 * scale,
            "ext {} sca {} abs {}", e.extinction, e.scattering, e.absorption);
    }
}
