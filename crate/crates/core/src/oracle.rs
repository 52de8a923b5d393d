//! Exact single-sphere solution used to check the small-particle asymptotics.
//!
//! For a plane wave `e^{ikα·x}` hitting a sphere of radius `a` centered at
//! `c` with Robin condition `∂_r u = ζ u` (outward radial derivative),
//!
//! ```text
//! u = u0(c) Σ_ℓ i^ℓ (2ℓ+1) [j_ℓ(kr) + c_ℓ h_ℓ(kr)] P_ℓ(cos θ),
//! c_ℓ = -(k j'_ℓ(ka) - ζ j_ℓ(ka)) / (k h'_ℓ(ka) - ζ h_ℓ(ka)),
//! ```
//!
//! with `θ` measured from `α` and `h_ℓ = j_ℓ + i y_ℓ`.

use crate::error::{Error, Result};
use crate::kernels::WaveContext;
use crate::quadrature::gauss_legendre_interval;
use crate::special::{derivatives, legendre, spherical_jn, spherical_yn};
use crate::Point;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Orders kept beyond `ka`.
pub const MIN_ORDER_MARGIN: usize = 10;

#[derive(Debug, Clone)]
pub struct SphereSeriesSolution {
    pub center: Point,
    pub a: f64,
    pub k: f64,
    pub zeta: Complex64,
    pub alpha: Point,
    pub l_max: usize,
    pub coeffs: Vec<Complex64>,
    /// `u0(center)`.
    pub incident_phase: Complex64,
}

fn i_pow(l: usize) -> Complex64 {
    match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Radial values `(j, j', h, h')` for orders `0..=l_max` at `x`.
fn radial(l_max: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<Complex64>, Vec<Complex64>) {
    let j = spherical_jn(l_max + 1, x);
    let y = spherical_yn(l_max + 1, x);
    let jd = derivatives(&j, x);
    let yd = derivatives(&y, x);
    let h = (0..=l_max).map(|l| Complex64::new(j[l], y[l])).collect();
    let hd = (0..=l_max).map(|l| Complex64::new(jd[l], yd[l])).collect();
    (j[..=l_max].to_vec(), jd, h, hd)
}

pub fn sphere_series(
    center: &Point,
    a: f64,
    ctx: &WaveContext,
    zeta: Complex64,
    l_max: usize,
) -> Result<SphereSeriesSolution> {
    ctx.require_free_space("sphere_series")?;
    let k = ctx.k();
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {a}")));
    }
    if !(k > 0.0) {
        return Err(Error::Domain("series solution needs k > 0".into()));
    }
    if !zeta.is_finite() {
        return Err(Error::Domain("impedance must be finite".into()));
    }
    let needed = k * a + MIN_ORDER_MARGIN as f64;
    if (l_max as f64) < needed {
        return Err(Error::Precondition(format!(
            "l_max = {l_max} is below ka + {MIN_ORDER_MARGIN} = {needed:.3}"
        )));
    }
    let (j, jd, h, hd) = radial(l_max, k * a);
    let mut coeffs = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let denom = k * hd[l] - zeta * h[l];
        let scale = (k * hd[l]).norm() + (zeta * h[l]).norm();
        if denom.norm() <= 1e-13 * scale {
            return Err(Error::Resonance {
                magnitude: denom.norm() / scale,
            });
        }
        coeffs.push(-(k * jd[l] - zeta * j[l]) / denom);
    }
    Ok(SphereSeriesSolution {
        center: *center,
        a,
        k,
        zeta,
        alpha: ctx.alpha(),
        l_max,
        coeffs,
        incident_phase: ctx.plane_wave(center),
    })
}

/// `Q` such that the ℓ = 0 scattered term is `Q e^{ikr}/(4πr)`.
pub fn extract_monopole(sol: &SphereSeriesSolution) -> Complex64 {
    Complex64::new(0.0, -4.0 * PI / sol.k) * sol.coeffs[0] * sol.incident_phase
}

impl SphereSeriesSolution {
    fn local(&self, x: &Point) -> (f64, f64) {
        let d = x - self.center;
        let r = d.norm();
        let t = if r > 0.0 {
            (self.alpha.dot(&d) / r).clamp(-1.0, 1.0)
        } else {
            1.0
        };
        (r, t)
    }

    /// `(u, ∂_r u)` at a point with `r ≥ a`; the incident part is summed in
    /// closed form so truncation only affects the scattered series.
    fn field_and_radial_derivative(&self, r: f64, t: f64, scattered_only: bool) -> (Complex64, Complex64) {
        let x = self.k * r;
        let (_, _, h, hd) = radial(self.l_max, x);
        let p = legendre(self.l_max, t);
        let mut u = Complex64::new(0.0, 0.0);
        let mut du = Complex64::new(0.0, 0.0);
        for l in 0..=self.l_max {
            let w = i_pow(l) * (2 * l + 1) as f64 * p[l] * self.coeffs[l];
            u += w * h[l];
            du += w * hd[l] * self.k;
        }
        if !scattered_only {
            let inc = Complex64::from_polar(1.0, x * t);
            u += inc;
            du += Complex64::new(0.0, self.k * t) * inc;
        }
        (u * self.incident_phase, du * self.incident_phase)
    }

    fn outside(&self, x: &Point) -> Result<(f64, f64)> {
        let (r, t) = self.local(x);
        if r < self.a * (1.0 - 1e-12) {
            return Err(Error::Domain(format!(
                "point at distance {r} is inside the sphere of radius {}",
                self.a
            )));
        }
        Ok((r, t))
    }

    pub fn total_field(&self, x: &Point) -> Result<Complex64> {
        let (r, t) = self.outside(x)?;
        Ok(self.field_and_radial_derivative(r, t, false).0)
    }

    pub fn scattered_field(&self, x: &Point) -> Result<Complex64> {
        let (r, t) = self.outside(x)?;
        Ok(self.field_and_radial_derivative(r, t, true).0)
    }

    /// Max over `samples` surface points of `|∂_r u - ζ u| / ((k + |ζ|) max|u|)`.
    pub fn boundary_residual(&self, samples: usize) -> f64 {
        let mut worst = 0.0f64;
        let mut umax = 0.0f64;
        let mut values = Vec::with_capacity(samples);
        for i in 0..samples {
            // the field is axisymmetric about α, so only cos θ matters
            let t = 1.0 - 2.0 * (i as f64 + 0.5) / samples as f64;
            let (u, du) = self.field_and_radial_derivative(self.a, t, false);
            umax = umax.max(u.norm());
            values.push((u, du));
        }
        let scale = (self.k + self.zeta.norm()) * umax.max(f64::MIN_POSITIVE);
        for (u, du) in values {
            worst = worst.max((du - self.zeta * u).norm() / scale);
        }
        worst
    }

    /// Charge from integrating the jump of the normal derivative across the
    /// sphere, with the scattered field continued inside as a regular solution.
    pub fn surface_jump_charge(&self, order: usize) -> Result<Complex64> {
        let x = self.k * self.a;
        let (j, jd, h, hd) = radial(self.l_max, x);
        let mut sigma_l = Vec::with_capacity(self.l_max + 1);
        for l in 0..=self.l_max {
            if j[l].abs() < 1e-300 {
                sigma_l.push(Complex64::new(0.0, 0.0));
                continue;
            }
            if l == 0 && j[0].abs() < 1e-8 {
                return Err(Error::Resonance { magnitude: j[0].abs() });
            }
            // inside: c h(ka) j(kr)/j(ka); jump = ∂_r(inside) - ∂_r(outside)
            let s = self.coeffs[l] * self.k * (h[l] * jd[l] / j[l] - hd[l]);
            sigma_l.push(i_pow(l) * (2 * l + 1) as f64 * s);
        }
        let (nodes, weights) = gauss_legendre_interval(order, -1.0, 1.0);
        let mut total = Complex64::new(0.0, 0.0);
        for (t, w) in nodes.iter().zip(&weights) {
            let p = legendre(self.l_max, *t);
            let sigma: Complex64 = sigma_l.iter().zip(&p).map(|(s, pl)| s * pl).sum();
            // azimuthal integral is 2π for an axisymmetric density
            total += sigma * (w * 2.0 * PI * self.a * self.a);
        }
        Ok(total * self.incident_phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::{monopole_charge, Profile, ScalingLaw};

    fn ctx(k: f64) -> WaveContext {
        WaveContext::new(k, Point::new(0.0, 0.0, 1.0)).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Unified asymptotic charge for ζ = h/a^κ.
    fn formula(kappa: f64, h: f64, a: f64, center: &Point, w: &WaveContext) -> Complex64 {
        let law = ScalingLaw::new(
            kappa,
            1.0 / 3.0,
            a,
            Profile::Constant(c(h, 0.0)),
            Profile::Constant(1.0),
        )
        .unwrap();
        monopole_charge(&law, center, w.plane_wave(center)).unwrap()
    }

    #[test]
    fn sound_hard_boundary_condition() {
        let s = sphere_series(&Point::zeros(), 0.7, &ctx(1.3), c(0.0, 0.0), 14).unwrap();
        assert!(s.boundary_residual(50) <= 1e-8);
        let (_, jd, _, hd) = radial(0, 1.3 * 0.7);
        assert!((s.coeffs[0] + jd[0] / hd[0]).norm() < 1e-15);
    }

    #[test]
    fn boundary_condition_on_dense_sample() {
        for &(a, k, zeta) in &[
            (0.5, 2.0, c(3.0, -1.0)),
            (1.0, 1.0, c(-0.5, 0.0)),
            (0.01, 1.0, c(100.0, 0.0)),
        ] {
            let s = sphere_series(&Point::new(0.1, -0.2, 0.3), a, &ctx(k), zeta, 12).unwrap();
            assert!(s.boundary_residual(200) <= 1e-8, "{a} {k} {zeta}");
        }
    }

    #[test]
    fn truncation_is_stable() {
        let w = ctx(1.0);
        let a = 0.8;
        let s1 = sphere_series(&Point::zeros(), a, &w, c(2.0, -0.5), 11).unwrap();
        let s2 = sphere_series(&Point::zeros(), a, &w, c(2.0, -0.5), 16).unwrap();
        for x in [
            Point::new(0.0, 0.0, 1.0),
            Point::new(1.5, 0.2, -0.7),
            Point::new(0.0, 3.0, 0.0),
        ] {
            let u1 = s1.total_field(&x).unwrap();
            let u2 = s2.total_field(&x).unwrap();
            assert!((u1 - u2).norm() <= 1e-10 * u2.norm());
        }
        assert!(s2.coeffs[16].norm() < 1e-20);
    }

    #[test]
    fn rejects_short_expansion_and_zero_k() {
        assert!(matches!(
            sphere_series(&Point::zeros(), 1.0, &ctx(5.0), c(1.0, 0.0), 12),
            Err(Error::Precondition(_))
        ));
        assert!(sphere_series(&Point::zeros(), 1.0, &ctx(0.0), c(1.0, 0.0), 12).is_err());
    }

    #[test]
    fn radiation_condition() {
        let s = sphere_series(&Point::zeros(), 0.5, &ctx(2.0), c(1.0, -1.0), 12).unwrap();
        let dir = Point::new(0.3, 0.4, 0.5).normalize();
        let far: Vec<f64> = [50.0, 500.0, 5000.0]
            .iter()
            .map(|r| (s.scattered_field(&(dir * *r)).unwrap() * *r).norm())
            .collect();
        assert!((far[1] / far[2] - 1.0).abs() < 1e-2);
        assert!((far[0] / far[2] - 1.0).abs() < 1e-1);
    }

    #[test]
    fn monopole_matches_surface_jump_integral() {
        let a = 0.01;
        let w = ctx(1.0);
        let center = Point::new(0.2, 0.0, 0.4);
        let s = sphere_series(&center, a, &w, c(1.0 / a, 0.0), 12).unwrap();
        let q = extract_monopole(&s);
        let q_jump = s.surface_jump_charge(24).unwrap();
        // the two differ by the factor j_0(ka) = 1 - (ka)²/6 + ...
        assert!((q_jump / q - 1.0).norm() < (w.k() * a).powi(2));
        // and extract_monopole is exactly the jump integral divided by j_0(ka)
        let j0 = (w.k() * a).sin() / (w.k() * a);
        assert!((q_jump * j0 / q - 1.0).norm() < 1e-10);
    }

    #[test]
    fn critical_exponent_scaling() {
        let a = 0.01;
        let w = ctx(1.0);
        let s = sphere_series(&Point::zeros(), a, &w, c(1.0 / a, 0.0), 12).unwrap();
        let q = extract_monopole(&s);
        let expect = -2.0 * PI * a;
        assert!((q / expect - 1.0).norm() < 2.0 * (w.k() * a + a));
    }

    #[test]
    fn unified_formula_case_one() {
        let a = 0.01;
        let w = ctx(1.0);
        let s = sphere_series(&Point::zeros(), a, &w, c(a.powf(-0.5), 0.0), 12).unwrap();
        let ratio = extract_monopole(&s) / formula(0.5, 1.0, a, &Point::zeros(), &w);
        assert!((ratio - 1.0).norm() < 0.05);
    }

    #[test]
    fn charge_is_linear_in_h_above_the_sound_hard_floor() {
        let a = 0.02;
        let k = 1.0;
        let w = ctx(k);
        let q =
            |h: f64| extract_monopole(&sphere_series(&Point::zeros(), a, &w, c(h * a.powf(-0.5), 0.0), 12).unwrap());
        let q0 = q(0.0);
        // ζ = 0 leaves the O(k²a³) monopole of a rigid ball
        assert!((q0 / (-4.0 * PI * k * k * a.powi(3) / 3.0) - 1.0).norm() < 0.05);
        let r = (q(1e-4) - q0) / (q(2e-4) - q0);
        assert!((r - 0.5).norm() < 1e-3, "{r}");
    }

    #[test]
    fn deviation_shrinks_with_radius() {
        let w = ctx(1.0);
        for &(kappa, h) in &[(0.5, 1.0), (1.0, 1.0), (2.0, 10.0)] {
            let dev: Vec<f64> = [0.02, 0.01, 0.005]
                .iter()
                .map(|&a| {
                    let s = sphere_series(&Point::zeros(), a, &w, c(h * a.powf(-kappa), 0.0), 12).unwrap();
                    (extract_monopole(&s) / formula(kappa, h, a, &Point::zeros(), &w) - 1.0).norm()
                })
                .collect();
            assert!(dev[0] <= 0.1 && dev[1] < dev[0] && dev[2] < dev[1], "{kappa}: {dev:?}");
            // first-order: halving a roughly halves the deviation
            assert!(dev[2] / dev[1] < 0.75, "{kappa}: {dev:?}");
        }
    }
}
