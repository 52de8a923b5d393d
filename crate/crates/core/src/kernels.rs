//! The free-space Helmholtz kernel and the sphere single-layer self-integral.
//!
//! With a homogeneous background (`n0^2 = 1`) the outgoing Green function of
//! `∇² + k²` is `G(x, y) = exp(ik|x-y|) / (4π|x-y|)`. Media with a variable
//! background are handled only by the homogenized solver, which folds
//! `q0 = k²(1 - n0²)` into the potential and keeps this kernel.

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::quadrature::gauss_legendre_interval;
use crate::Point;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Points closer than this (relative to their magnitude, floored at 1) are coincident.
pub const COINCIDENT_RTOL: f64 = 1e-14;

/// Lowest polar order accepted by [`surface_self_integral`].
pub const MIN_SURFACE_ORDER: usize = 2;

/// Polar order at which [`surface_self_integral`] reproduces `a` to 1e-6·a.
pub const REFERENCE_SURFACE_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    /// `n0² ≡ 1` everywhere.
    FreeSpace,
    /// Voxelized `n0²(x)` inside the grid box, 1 outside.
    Voxelized(GridField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveContext {
    k: f64,
    alpha: Point,
    background: Background,
}

impl WaveContext {
    pub fn new(k: f64, alpha: Point) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::Domain(format!("wavenumber must be finite and >= 0, got {k}")));
        }
        let norm = alpha.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "incident direction must be a unit vector, |alpha| = {norm}"
            )));
        }
        Ok(Self {
            k,
            alpha,
            background: Background::FreeSpace,
        })
    }

    /// Normalizes `alpha` before validating.
    pub fn with_direction(k: f64, alpha: Point) -> Result<Self> {
        let n = alpha.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("incident direction must be nonzero".into()));
        }
        Self::new(k, alpha / n)
    }

    pub fn with_background(mut self, n0sq: GridField) -> Result<Self> {
        if let Some(bad) = n0sq.values.iter().find(|v| v.im < 0.0 || !v.is_finite()) {
            return Err(Error::Passivity(format!(
                "background n0^2 must be finite with Im >= 0, found {bad}"
            )));
        }
        self.background = Background::Voxelized(n0sq);
        Ok(self)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn alpha(&self) -> Point {
        self.alpha
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn is_free_space(&self) -> bool {
        matches!(self.background, Background::FreeSpace)
    }

    pub fn require_free_space(&self, what: &str) -> Result<()> {
        if self.is_free_space() {
            Ok(())
        } else {
            Err(Error::UnsupportedBackground(format!(
                "{what} needs the closed-form free-space kernel (n0^2 = 1)"
            )))
        }
    }

    /// The plane wave `exp(ik α·x)` regardless of background.
    pub fn plane_wave(&self, x: &Point) -> Complex64 {
        Complex64::from_polar(1.0, self.k * self.alpha.dot(x))
    }
}

/// `exp(ik|x-y|) / (4π|x-y|)`.
pub fn green_free(x: &Point, y: &Point, k: f64) -> Result<Complex64> {
    let r = (x - y).norm();
    let scale = x.norm().max(y.norm()).max(1.0);
    if r <= COINCIDENT_RTOL * scale {
        return Err(Error::Domain(format!(
            "Green function evaluated at coincident points (|x - y| = {r:e})"
        )));
    }
    Ok(green_at_distance(r, k))
}

/// Kernel value at a known positive distance; no coincidence check.
#[inline]
pub fn green_at_distance(r: f64, k: f64) -> Complex64 {
    let (s, c) = (k * r).sin_cos();
    Complex64::new(c, s) / (4.0 * PI * r)
}

/// `∇_x G(x, y) = (ik - 1/r) G (x - y)/r`.
pub fn green_gradient(x: &Point, y: &Point, k: f64) -> Result<[Complex64; 3]> {
    let g = green_free(x, y, k)?;
    let d = x - y;
    let r = d.norm();
    let f = Complex64::new(-1.0 / r, k) * g / r;
    Ok([f * d[0], f * d[1], f * d[2]])
}

/// Incident field `u0 = exp(ik α·x)`; only defined over a free-space background.
pub fn incident_field(ctx: &WaveContext, x: &Point) -> Result<Complex64> {
    ctx.require_free_space("incident_field")?;
    Ok(ctx.plane_wave(x))
}

/// Numerically integrates `1/(4π|s - t|)` over the sphere `|s - center| = a`
/// for a point `t` on that sphere. The exact value is `a`.
///
/// The sphere is parametrized with `t` at the pole, so the `sin θ` Jacobian
/// cancels the `1/|s - t|` singularity; the polar angle uses a Gauss-Legendre
/// rule of `order` nodes and the azimuth `2·order` uniform nodes.
pub fn surface_self_integral(center: &Point, a: f64, t: &Point, order: usize) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {a}")));
    }
    if order < MIN_SURFACE_ORDER {
        return Err(Error::Domain(format!(
            "quadrature order {order} below minimum {MIN_SURFACE_ORDER}"
        )));
    }
    let axis = t - center;
    if (axis.norm() - a).abs() > 1e-10 * a.max(1.0) {
        return Err(Error::Domain(format!(
            "point is not on the sphere: |t - center| = {} but a = {a}",
            axis.norm()
        )));
    }
    let e3 = axis / axis.norm();
    let helper = if e3[0].abs() < 0.9 {
        Point::new(1.0, 0.0, 0.0)
    } else {
        Point::new(0.0, 1.0, 0.0)
    };
    let e1 = (helper - e3 * helper.dot(&e3)).normalize();
    let e2 = e3.cross(&e1);

    let (thetas, wt) = gauss_legendre_interval(order, 0.0, PI);
    let n_phi = 2 * order;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut total = 0.0;
    for (theta, w) in thetas.iter().zip(&wt) {
        let (st, ct) = theta.sin_cos();
        let mut ring = 0.0;
        for j in 0..n_phi {
            let (sp, cp) = (j as f64 * dphi).sin_cos();
            let s = center + (e1 * (st * cp) + e2 * (st * sp) + e3 * ct) * a;
            ring += 1.0 / (4.0 * PI * (s - t).norm());
        }
        total += w * a * a * st * ring * dphi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn static_kernel_at_unit_distance() {
        let g = green_free(&p(1.0, 0.0, 0.0), &Point::zeros(), 0.0).unwrap();
        assert!((g.re - 0.0795775).abs() < 1e-7);
        assert_eq!(g.im, 0.0);
    }

    #[test]
    fn oscillating_kernel_at_unit_distance() {
        let g = green_free(&p(1.0, 0.0, 0.0), &Point::zeros(), 1.0).unwrap();
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!((g.re - 1f64.cos() / four_pi).abs() < 1e-16);
        assert!((g.im - 1f64.sin() / four_pi).abs() < 1e-16);
        assert!((g.re - 0.0429960).abs() < 1e-6);
        assert!((g.im - 0.0669619).abs() < 1e-6);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let x = p(0.3, 0.2, 0.1);
        assert!(matches!(green_free(&x, &x, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn small_distance_ratio_tends_to_one_linearly() {
        let k = 2.0;
        let mut prev = f64::INFINITY;
        for i in 1..8 {
            let r = 10f64.powi(-i);
            let g = green_free(&p(r, 0.0, 0.0), &Point::zeros(), k).unwrap();
            let err = (g * (4.0 * PI * r) - 1.0).norm();
            assert!(err <= 1.01 * k * r, "r={r} err={err}");
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn incident_field_examples() {
        let ctx = WaveContext::new(0.0, p(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(
            incident_field(&ctx, &p(3.0, -2.0, 7.0)).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        let ctx = WaveContext::new(1.0, p(0.0, 0.0, 1.0)).unwrap();
        let u = incident_field(&ctx, &p(0.0, 0.0, PI)).unwrap();
        assert!((u - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn incident_field_refuses_variable_background() {
        let bg = GridField::filled(crate::grid::Aabb::unit(), [2, 2, 2], Complex64::new(1.2, 0.0)).unwrap();
        let ctx = WaveContext::new(1.0, p(0.0, 0.0, 1.0))
            .unwrap()
            .with_background(bg)
            .unwrap();
        assert!(matches!(
            incident_field(&ctx, &Point::zeros()),
            Err(Error::UnsupportedBackground(_))
        ));
    }

    #[test]
    fn context_validation() {
        assert!(WaveContext::new(-1.0, p(0.0, 0.0, 1.0)).is_err());
        assert!(WaveContext::new(1.0, p(0.0, 0.0, 1.1)).is_err());
        let lossy = GridField::filled(crate::grid::Aabb::unit(), [2, 2, 2], Complex64::new(1.0, -0.1)).unwrap();
        assert!(matches!(
            WaveContext::new(1.0, p(0.0, 0.0, 1.0)).unwrap().with_background(lossy),
            Err(Error::Passivity(_))
        ));
    }

    #[test]
    fn surface_identity_for_several_radii() {
        for &a in &[1.0, 2.0, 0.5] {
            let c = p(0.1, -0.2, 0.3);
            let t = c + p(1.0, 2.0, -2.0) * (a / 3.0);
            let v = surface_self_integral(&c, a, &t, REFERENCE_SURFACE_ORDER).unwrap();
            assert!((v - a).abs() <= 1e-6 * a, "a={a} v={v}");
        }
    }

    #[test]
    fn surface_integral_converges_under_refinement() {
        let c = Point::zeros();
        let t = p(0.0, 0.6, 0.8);
        let mut prev_diff = f64::INFINITY;
        for n in [2usize, 4, 8] {
            let coarse = surface_self_integral(&c, 1.0, &t, n).unwrap();
            let fine = surface_self_integral(&c, 1.0, &t, 2 * n).unwrap();
            let diff = (fine - coarse).abs();
            assert!(diff < prev_diff, "n={n} diff={diff}");
            prev_diff = diff;
        }
        assert!(prev_diff < 1e-8);
    }

    #[test]
    fn surface_integral_rejects_off_sphere_points() {
        let r = surface_self_integral(&Point::zeros(), 1.0, &p(0.0, 0.0, 1.01), 8);
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(surface_self_integral(&Point::zeros(), 1.0, &p(0.0, 0.0, 1.0), 1).is_err());
    }

    fn finite_difference_gradient(x: &Point, y: &Point, k: f64) -> [Complex64; 3] {
        let h = 1e-6 * (x - y).norm();
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            *slot = (green_free(&xp, y, k).unwrap() - green_free(&xm, y, k).unwrap()) / (2.0 * h);
        }
        out
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_with_unit_phase(
            x in prop::array::uniform3(-2.0f64..2.0),
            y in prop::array::uniform3(-2.0f64..2.0),
            k in 0.0f64..20.0,
        ) {
            let (x, y) = (Point::from(x), Point::from(y));
            prop_assume!((x - y).norm() > 1e-6);
            let gxy = green_free(&x, &y, k).unwrap();
            let gyx = green_free(&y, &x, k).unwrap();
            prop_assert_eq!(gxy, gyx);
            let r = (x - y).norm();
            prop_assert!((gxy.norm() - 1.0 / (4.0 * PI * r)).abs() <= 1e-12 / r);
        }

        #[test]
        fn gradient_obeys_order_bound(
            x in prop::array::uniform3(-1.0f64..1.0),
            y in prop::array::uniform3(-1.0f64..1.0),
            k in 0.0f64..10.0,
        ) {
            let (x, y) = (Point::from(x), Point::from(y));
            let r = (x - y).norm();
            prop_assume!(r > 1e-3);
            let fd = finite_difference_gradient(&x, &y, k);
            let exact = green_gradient(&x, &y, k).unwrap();
            let fd_norm = fd.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let ex_norm = exact.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((fd_norm - ex_norm).abs() <= 1e-5 * ex_norm);
            let bound = (k / r).max(1.0 / (r * r));
            prop_assert!(fd_norm <= (1.0 + 1e-6) * bound);
        }

        #[test]
        fn plane_wave_has_unit_modulus(x in prop::array::uniform3(-50.0f64..50.0), k in 0.0f64..10.0) {
            let ctx = WaveContext::with_direction(k, Point::new(1.0, 2.0, 3.0)).unwrap();
            let u = incident_field(&ctx, &Point::from(x)).unwrap();
            prop_assert!((u.norm() - 1.0).abs() < 1e-14);
        }
    }
}
