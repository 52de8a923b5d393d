//! Scaling laws `ζ = h/a^κ`, `d = O(a^κ₁)` and the regime each pair falls in.
//!
//! The single-particle charge and the limiting potential are asymptotic in
//! `a → 0` and only meaningful where the regime report allows them.

use crate::error::{Error, Result};
use crate::grid::{GridField, RealGrid};
use crate::Point;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Tolerance for matching `κ₁` against the exponent a limit requires.
pub const EXPONENT_MATCH_TOL: f64 = 1e-12;

/// A spatial profile. Grid profiles sample the nearest voxel; function
/// profiles must be free of side effects.
#[derive(Clone)]
pub enum Profile<T> {
    Constant(T),
    Grid(Arc<crate::grid::VoxelGrid<T>>),
    Function(Arc<dyn Fn(&Point) -> T + Send + Sync>),
}

pub type ImpedanceProfile = Profile<Complex64>;
pub type DensityProfile = Profile<f64>;

impl<T: Clone> Profile<T> {
    pub fn at(&self, x: &Point) -> T {
        match self {
            Profile::Constant(v) => v.clone(),
            Profile::Grid(g) => g.sample(x),
            Profile::Function(f) => f(x),
        }
    }

    pub fn function(f: impl Fn(&Point) -> T + Send + Sync + 'static) -> Self {
        Profile::Function(Arc::new(f))
    }
}

impl From<GridField> for ImpedanceProfile {
    fn from(g: GridField) -> Self {
        Profile::Grid(Arc::new(g))
    }
}

impl From<RealGrid> for DensityProfile {
    fn from(g: RealGrid) -> Self {
        Profile::Grid(Arc::new(g))
    }
}

impl<T: fmt::Debug> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Profile::Grid(g) => write!(f, "Grid({:?})", g.resolution),
            Profile::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingLaw {
    kappa: f64,
    kappa1: f64,
    a: f64,
    h: ImpedanceProfile,
    density: DensityProfile,
}

impl ScalingLaw {
    /// Builds a law; range gates on `κ`/`κ₁` are left to [`classify_regime`].
    pub fn new(kappa: f64, kappa1: f64, a: f64, h: ImpedanceProfile, density: DensityProfile) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("particle radius must be positive, got {a}")));
        }
        if !kappa.is_finite() || !kappa1.is_finite() || kappa1 < 0.0 {
            return Err(Error::Domain(format!(
                "exponents must be finite with kappa1 >= 0 (kappa = {kappa}, kappa1 = {kappa1})"
            )));
        }
        check_impedance_values(&h)?;
        check_density_values(&density)?;
        Ok(Self {
            kappa,
            kappa1,
            a,
            h,
            density,
        })
    }

    /// Case 1 law with the matched spacing exponent `κ₁ = (2 - κ)/3`.
    pub fn matched(kappa: f64, a: f64, h: ImpedanceProfile, density: DensityProfile) -> Result<Self> {
        Self::new(kappa, matched_kappa1(kappa), a, h, density)
    }

    pub fn with_radius(&self, a: f64) -> Result<Self> {
        Self::new(self.kappa, self.kappa1, a, self.h.clone(), self.density.clone())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn h_profile(&self) -> &ImpedanceProfile {
        &self.h
    }

    pub fn density_profile(&self) -> &DensityProfile {
        &self.density
    }

    pub fn h_at(&self, x: &Point) -> Result<Complex64> {
        let h = self.h.at(x);
        if !h.is_finite() || h.im > 0.0 {
            return Err(Error::Passivity(format!(
                "impedance weight h = {h} at ({}, {}, {}) must be finite with Im h <= 0",
                x[0], x[1], x[2]
            )));
        }
        Ok(h)
    }

    pub fn density_at(&self, x: &Point) -> Result<f64> {
        let n = self.density.at(x);
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::InvalidDensity {
                value: n,
                x: x[0],
                y: x[1],
                z: x[2],
            });
        }
        Ok(n)
    }

    /// Boundary impedance `ζ = h(x)/a^κ`.
    pub fn impedance_at(&self, x: &Point) -> Result<Complex64> {
        Ok(self.h_at(x)? / self.a.powf(self.kappa))
    }

    /// Lattice pitch exponent target `a^κ₁`.
    pub fn spacing(&self) -> f64 {
        self.a.powf(self.kappa1)
    }
}

/// `(2 - κ)/3`, the spacing exponent that makes the Case 1 sum converge.
pub fn matched_kappa1(kappa: f64) -> f64 {
    (2.0 - kappa) / 3.0
}

fn check_impedance_values(h: &ImpedanceProfile) -> Result<()> {
    let bad = match h {
        Profile::Constant(v) => (!v.is_finite() || v.im > 0.0).then_some(*v),
        Profile::Grid(g) => g.values.iter().copied().find(|v| !v.is_finite() || v.im > 0.0),
        Profile::Function(_) => None,
    };
    match bad {
        Some(v) => Err(Error::Passivity(format!("impedance weight h = {v} has Im h > 0"))),
        None => Ok(()),
    }
}

fn check_density_values(n: &DensityProfile) -> Result<()> {
    let bad = match n {
        Profile::Constant(v) => (!(*v >= 0.0 && v.is_finite())).then_some(*v),
        Profile::Grid(g) => g.values.iter().copied().find(|v| !(*v >= 0.0 && v.is_finite())),
        Profile::Function(_) => None,
    };
    match bad {
        Some(v) => Err(Error::InvalidDensity {
            value: v,
            x: f64::NAN,
            y: f64::NAN,
            z: f64::NAN,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeCase {
    /// `κ < 1`; limit needs `κ₁ = (2 - κ)/3`.
    Case1,
    /// `κ = 1`, `κ₁ = 1/3`; potential `4πNh/(1+h)`.
    Critical,
    /// `κ > 1`; limit needs `κ₁ = 1/3`.
    Case2,
    /// `κ₁ ≥ 1` or `κ ≤ -1`.
    Unsupported,
}

/// Which limiting-potential formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialLaw {
    /// `p = 4π h N`
    ImpedanceWeighted,
    /// `p = 4π N h/(1 + h)`
    Saturated,
    /// `p = 4π N`
    DensityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub case_label: RegimeCase,
    pub limit_exists: bool,
    /// The `κ₁` a limit requires, if the case has one.
    pub matched_kappa1: Option<f64>,
    /// `κ₁ < 1`: the monopole (point-source) reduction is trustworthy.
    pub approximation_valid: bool,
    /// Total particle volume scales like `a^(3 - 3κ₁)`.
    pub volume_fraction_exponent: f64,
    pub potential_law: Option<PotentialLaw>,
}

impl RegimeReport {
    pub fn require_approximation(&self) -> Result<()> {
        if self.approximation_valid {
            Ok(())
        } else {
            Err(Error::Regime(format!(
                "monopole approximation requires kappa1 < 1 ({:?})",
                self.case_label
            )))
        }
    }

    pub fn require_limit(&self, kappa1: f64) -> Result<()> {
        if self.limit_exists {
            return Ok(());
        }
        let why = match (self.case_label, self.matched_kappa1) {
            (RegimeCase::Unsupported, _) => "regime is unsupported (kappa1 >= 1 or kappa <= -1)".to_string(),
            (RegimeCase::Case1, _) if kappa1 < 1.0 && self.matched_kappa1.is_some_and(|m| m >= 2.0 / 3.0) => {
                "kappa <= 0 has no homogenized limit in this model".to_string()
            }
            (_, Some(m)) => format!("no homogenized limit: kappa1 = {kappa1} but the limit needs kappa1 = {m}"),
            (_, None) => "no homogenized limit".to_string(),
        };
        Err(Error::Regime(format!("{why} [{:?}]", self.case_label)))
    }
}

pub fn classify_regime(law: &ScalingLaw) -> RegimeReport {
    let (kappa, kappa1) = (law.kappa, law.kappa1);
    let approximation_valid = kappa1 < 1.0;
    let volume_fraction_exponent = 3.0 - 3.0 * kappa1;
    let matches = |target: f64| (kappa1 - target).abs() <= EXPONENT_MATCH_TOL;

    let (case_label, limit_exists, matched, potential_law) = if kappa <= -1.0 || kappa1 >= 1.0 {
        (RegimeCase::Unsupported, false, None, None)
    } else if (kappa - 1.0).abs() <= EXPONENT_MATCH_TOL {
        (
            RegimeCase::Critical,
            matches(1.0 / 3.0),
            Some(1.0 / 3.0),
            Some(PotentialLaw::Saturated),
        )
    } else if kappa < 1.0 {
        let target = matched_kappa1(kappa);
        (
            RegimeCase::Case1,
            kappa > 0.0 && matches(target),
            Some(target),
            Some(PotentialLaw::ImpedanceWeighted),
        )
    } else {
        (
            RegimeCase::Case2,
            matches(1.0 / 3.0),
            Some(1.0 / 3.0),
            Some(PotentialLaw::DensityOnly),
        )
    };

    RegimeReport {
        case_label,
        limit_exists,
        matched_kappa1: matched,
        approximation_valid,
        volume_fraction_exponent,
        potential_law,
    }
}

/// `1 + h a^(1-κ)`, rejected when numerically zero.
fn resonance_denominator(law: &ScalingLaw, h: Complex64) -> Result<Complex64> {
    let t = h * law.a.powf(1.0 - law.kappa);
    let denom = 1.0 + t;
    if denom.norm() <= 1e-12 * t.norm().max(1.0) {
        return Err(Error::Resonance {
            magnitude: denom.norm(),
        });
    }
    Ok(denom)
}

/// `σ_m = -h u_e a^(-κ) / (1 + h a^(1-κ))`, the constant single-layer density
/// on particle `m` induced by the effective field at its center.
pub fn surface_density(law: &ScalingLaw, x_m: &Point, u_e: Complex64) -> Result<Complex64> {
    classify_regime(law).require_approximation()?;
    let h = law.h_at(x_m)?;
    let denom = resonance_denominator(law, h)?;
    Ok(-(h * u_e) * law.a.powf(-law.kappa) / denom)
}

/// `Q_m = 4πa² σ_m = -4π h a^(2-κ) u_e / (1 + h a^(1-κ))`.
pub fn monopole_charge(law: &ScalingLaw, x_m: &Point, u_e: Complex64) -> Result<Complex64> {
    let sigma = surface_density(law, x_m, u_e)?;
    Ok(4.0 * PI * law.a * law.a * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingMode {
    /// Full ratio `4π h a^(2-κ)/(1 + h a^(1-κ))`.
    #[default]
    Full,
    /// Leading term only: `4π h a^(2-κ)` for κ < 1, `4π a` for κ > 1.
    LeadingOrder,
}

/// Coupling `g` with `Q = -g u_e`.
pub fn coupling_strength(law: &ScalingLaw, x_m: &Point, mode: CouplingMode) -> Result<Complex64> {
    match mode {
        CouplingMode::Full => Ok(-monopole_charge(law, x_m, Complex64::new(1.0, 0.0))?),
        CouplingMode::LeadingOrder => {
            let report = classify_regime(law);
            report.require_approximation()?;
            let h = law.h_at(x_m)?;
            Ok(match report.case_label {
                RegimeCase::Case2 => Complex64::new(4.0 * PI * law.a, 0.0),
                RegimeCase::Critical => {
                    let denom = resonance_denominator(law, h)?;
                    4.0 * PI * law.a * h / denom
                }
                _ => 4.0 * PI * h * law.a.powf(2.0 - law.kappa),
            })
        }
    }
}

/// Limiting potential `p(x)` of the homogenized medium.
pub fn effective_potential(law: &ScalingLaw, x: &Point) -> Result<Complex64> {
    let report = classify_regime(law);
    report.require_limit(law.kappa1)?;
    let n = law.density_at(x)?;
    match report.potential_law {
        Some(PotentialLaw::ImpedanceWeighted) => Ok(4.0 * PI * law.h_at(x)? * n),
        Some(PotentialLaw::Saturated) => {
            let h = law.h_at(x)?;
            let denom = 1.0 + h;
            if denom.norm() <= 1e-14 {
                return Err(Error::Resonance {
                    magnitude: denom.norm(),
                });
            }
            Ok(4.0 * PI * n * h / denom)
        }
        Some(PotentialLaw::DensityOnly) => Ok(Complex64::new(4.0 * PI * n, 0.0)),
        None => unreachable!("limit_exists implies a potential law"),
    }
}

/// Order of the total particle volume, `a^(3 - 3κ₁)`.
pub fn volume_fraction(law: &ScalingLaw) -> f64 {
    law.a.powf(3.0 - 3.0 * law.kappa1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn law(kappa: f64, kappa1: f64, a: f64, h: Complex64, n: f64) -> ScalingLaw {
        ScalingLaw::new(kappa, kappa1, a, Profile::Constant(h), Profile::Constant(n)).unwrap()
    }

    fn origin() -> Point {
        Point::zeros()
    }

    #[test]
    fn classify_examples() {
        let r = classify_regime(&law(0.5, 0.5, 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Case1);
        assert!(r.limit_exists);

        let r = classify_regime(&law(2.0, 1.0 / 3.0, 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Case2);
        assert!(r.limit_exists);

        let r = classify_regime(&law(0.5, 0.4, 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Case1);
        assert!(!r.limit_exists);
        assert!(r.approximation_valid);

        let r = classify_regime(&law(1.0, 1.0 / 3.0, 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Critical);
        assert_eq!(r.potential_law, Some(PotentialLaw::Saturated));
        assert!(r.limit_exists);
    }

    #[test]
    fn remark_case_and_dense_spacing_are_unsupported() {
        let r = classify_regime(&law(-1.0, 1.0, 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Unsupported);
        assert!(!r.approximation_valid);
        let r = classify_regime(&law(0.5, 1.2, 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Unsupported);
    }

    #[test]
    fn negative_kappa_has_no_limit() {
        let r = classify_regime(&law(-0.5, matched_kappa1(-0.5), 0.01, c(1.0, 0.0), 1.0));
        assert_eq!(r.case_label, RegimeCase::Case1);
        assert!(!r.limit_exists);
        assert!(r.approximation_valid);
    }

    #[test]
    fn surface_density_examples() {
        let l = law(0.5, 0.5, 0.01, c(0.0, 0.0), 1.0);
        assert_eq!(surface_density(&l, &origin(), c(1.0, 0.0)).unwrap(), c(0.0, 0.0));

        let l = law(0.5, 0.5, 0.01, c(1.0, 0.0), 1.0);
        let s = surface_density(&l, &origin(), c(1.0, 0.0)).unwrap();
        assert!((s.re + 10.0 / 1.1).abs() < 1e-12);

        let l = law(2.0, 1.0 / 3.0, 0.001, c(10.0, 0.0), 1.0);
        let s = surface_density(&l, &origin(), c(1.0, 0.0)).unwrap();
        assert!((s.re + 999.900_009_999).abs() < 1e-6, "{s}");
    }

    #[test]
    fn case2_density_ratio_tends_to_one() {
        let mut prev = f64::INFINITY;
        for a in [1e-2, 1e-3, 1e-4] {
            let l = law(2.0, 1.0 / 3.0, a, c(10.0, 0.0), 1.0);
            let s = surface_density(&l, &origin(), c(1.0, 0.0)).unwrap();
            let dev = (s / c(-1.0 / a, 0.0) - 1.0).norm();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 2e-5);
    }

    #[test]
    fn monopole_charge_examples() {
        let l = law(0.5, 0.5, 0.01, c(1.0, 0.0), 1.0);
        let q = monopole_charge(&l, &origin(), c(1.0, 0.0)).unwrap();
        assert!((q.re + 0.011_424_0).abs() < 1e-7, "{q}");

        let l = law(2.0, 1.0 / 3.0, 0.001, c(10.0, 0.0), 1.0);
        let q = monopole_charge(&l, &origin(), c(1.0, 0.0)).unwrap();
        assert!((q.re + 0.012_565_1).abs() < 1e-7, "{q}");
        assert!((q.re / (-4.0 * PI * 0.001) - 1.0).abs() < 1e-3);

        let l = law(0.5, 0.5, 0.01, c(0.0, 0.0), 1.0);
        assert_eq!(monopole_charge(&l, &origin(), c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn resonance_is_reported() {
        // h a^(1-κ) = -1 with κ = 0, a = 0.5, h = -2
        let l = law(0.0, matched_kappa1(0.0), 0.5, c(-2.0, 0.0), 1.0);
        assert!(matches!(
            monopole_charge(&l, &origin(), c(1.0, 0.0)),
            Err(Error::Resonance { .. })
        ));
    }

    #[test]
    fn charges_refused_without_valid_approximation() {
        let l = law(0.5, 1.0, 0.01, c(1.0, 0.0), 1.0);
        assert!(matches!(
            monopole_charge(&l, &origin(), c(1.0, 0.0)),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn potential_examples() {
        let l = law(0.5, 0.5, 0.01, c(1.0, 0.0), 1.0);
        let p = effective_potential(&l, &origin()).unwrap();
        assert!((p - c(4.0 * PI, 0.0)).norm() < 1e-12);

        let l = law(1.0, 1.0 / 3.0, 0.01, c(1.0, 0.0), 1.0);
        let p = effective_potential(&l, &origin()).unwrap();
        assert!((p - c(2.0 * PI, 0.0)).norm() < 1e-12);

        let l = law(2.0, 1.0 / 3.0, 0.01, c(5.0, -2.0), 2.0);
        let p = effective_potential(&l, &origin()).unwrap();
        assert!((p - c(8.0 * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn potential_rejects_degenerate_and_unmatched() {
        let l = law(1.0, 1.0 / 3.0, 0.01, c(-1.0, 0.0), 1.0);
        assert!(matches!(
            effective_potential(&l, &origin()),
            Err(Error::Resonance { .. })
        ));
        let l = law(0.5, 0.4, 0.01, c(1.0, 0.0), 1.0);
        assert!(matches!(effective_potential(&l, &origin()), Err(Error::Regime(_))));
    }

    #[test]
    fn volume_fraction_examples() {
        let l = law(1.0, 1.0 / 3.0, 0.01, c(1.0, 0.0), 1.0);
        assert!((volume_fraction(&l) - 1e-4).abs() < 1e-16);
        let near = law(0.5, 0.999_999, 0.01, c(1.0, 0.0), 1.0);
        assert!((volume_fraction(&near) - 1.0).abs() < 1e-4);
        let l1 = law(0.5, 0.5, 0.02, c(1.0, 0.0), 1.0);
        let l2 = law(0.5, 0.5, 0.01, c(1.0, 0.0), 1.0);
        assert!((volume_fraction(&l2) / volume_fraction(&l1) - 2f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn construction_checks_profiles() {
        let bad_h = ScalingLaw::new(0.5, 0.5, 0.01, Profile::Constant(c(1.0, 0.1)), Profile::Constant(1.0));
        assert!(matches!(bad_h, Err(Error::Passivity(_))));
        let bad_n = ScalingLaw::new(0.5, 0.5, 0.01, Profile::Constant(c(1.0, 0.0)), Profile::Constant(-1.0));
        assert!(matches!(bad_n, Err(Error::InvalidDensity { .. })));
        assert!(ScalingLaw::new(0.5, 0.5, 0.0, Profile::Constant(c(1.0, 0.0)), Profile::Constant(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn charge_is_four_pi_a_squared_sigma(
            kappa in -0.9f64..3.0,
            a in 1e-4f64..0.1,
            hr in 0.0f64..20.0,
            hi in -5.0f64..0.0,
            ur in -2.0f64..2.0,
            ui in -2.0f64..2.0,
        ) {
            let l = law(kappa, 0.5, a, c(hr, hi), 1.0);
            let u = c(ur, ui);
            let s = surface_density(&l, &origin(), u).unwrap();
            let q = monopole_charge(&l, &origin(), u).unwrap();
            prop_assert_eq!(q, 4.0 * PI * a * a * s);
        }

        #[test]
        fn charge_is_linear_in_field(
            kappa in 0.0f64..3.0,
            a in 1e-4f64..0.1,
            hr in 0.0f64..20.0,
            cr in -3.0f64..3.0,
            ci in -3.0f64..3.0,
        ) {
            let l = law(kappa, 0.5, a, c(hr, -0.5), 1.0);
            let scale = c(cr, ci);
            let q1 = monopole_charge(&l, &origin(), c(0.7, -0.2)).unwrap();
            let q2 = monopole_charge(&l, &origin(), c(0.7, -0.2) * scale).unwrap();
            prop_assert!((q2 - q1 * scale).norm() <= 1e-13 * q1.norm().max(1e-300) * scale.norm().max(1.0));
        }

        #[test]
        fn case1_charge_approaches_leading_term(
            kappa in 0.05f64..0.95,
            h in 0.1f64..5.0,
            a in 1e-5f64..1e-2,
        ) {
            let l = law(kappa, matched_kappa1(kappa), a, c(h, 0.0), 1.0);
            let q = monopole_charge(&l, &origin(), c(1.0, 0.0)).unwrap();
            let lead = -4.0 * PI * h * a.powf(2.0 - kappa);
            let dev = (q.re / lead - 1.0).abs();
            prop_assert!(dev <= 2.0 * h * a.powf(1.0 - kappa));
        }

        #[test]
        fn case2_charge_approaches_radius_law(kappa in 1.2f64..4.0, h in 1.0f64..50.0) {
            let mut prev = f64::INFINITY;
            for a in [1e-2, 5e-3, 2.5e-3] {
                let l = law(kappa, 1.0 / 3.0, a, c(h, 0.0), 1.0);
                let q = monopole_charge(&l, &origin(), c(1.0, 0.0)).unwrap();
                let dev = (q.re / (-4.0 * PI * a) - 1.0).abs();
                prop_assert!(dev < prev);
                prev = dev;
            }
        }

        #[test]
        fn limit_regimes_have_vanishing_volume(kappa in 0.01f64..3.0) {
            let k1 = if kappa < 1.0 { matched_kappa1(kappa) } else { 1.0 / 3.0 };
            let big = law(kappa, k1, 0.1, c(1.0, 0.0), 1.0);
            let small = law(kappa, k1, 0.001, c(1.0, 0.0), 1.0);
            let r = classify_regime(&big);
            prop_assert!(r.limit_exists);
            prop_assert!(r.approximation_valid);
            prop_assert!(r.volume_fraction_exponent > 0.0);
            prop_assert!(volume_fraction(&small) < volume_fraction(&big));
        }
    }
}
