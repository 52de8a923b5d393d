//! Spherical Bessel functions of real argument and Legendre polynomials.

/// `j_0..=j_lmax` at `x ≥ 0`. Power series below `x = 1`, otherwise Miller's
/// downward recurrence normalized by `Σ (2ℓ+1) j_ℓ² = 1`.
pub fn spherical_jn(l_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "spherical_jn needs finite x >= 0");
    if x < 1.0 {
        return (0..=l_max).map(|l| jn_series(l, x)).collect();
    }
    let start = l_max + x.ceil() as usize + 30;
    let mut out = vec![0.0; l_max + 1];
    let mut next = 0.0f64;
    let mut cur = 1.0f64;
    let mut norm = 0.0f64;
    for l in (0..=start).rev() {
        if l <= l_max {
            out[l] = cur;
        }
        norm += (2 * l + 1) as f64 * cur * cur;
        if l == 0 {
            break;
        }
        let prev = (2 * l + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e100 {
            let s = 1e-100;
            cur *= s;
            next *= s;
            norm *= s * s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let scale = norm.sqrt().recip();
    // sign: the normalization fixes magnitude only; j_0 = sin x / x sets the sign
    let sign = if (x.sin() / x) * out[0] < 0.0 { -1.0 } else { 1.0 };
    out.iter().map(|v| v * scale * sign).collect()
}

fn jn_series(l: usize, x: f64) -> f64 {
    // x^l / (2l+1)!! · Σ_k (-x²/2)^k / (k! (2l+3)(2l+5)···(2l+2k+1))
    let mut lead = 1.0;
    for i in 0..l {
        lead *= x / (2 * i + 3) as f64;
    }
    let t = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= t / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// `y_0..=y_lmax` at `x > 0` by upward recurrence.
pub fn spherical_yn(l_max: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0 && x.is_finite(), "spherical_yn needs finite x > 0");
    let mut out = Vec::with_capacity(l_max + 1);
    let (s, c) = x.sin_cos();
    out.push(-c / x);
    if l_max >= 1 {
        out.push(-c / (x * x) - s / x);
    }
    for l in 1..l_max {
        let v = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        out.push(v);
    }
    out
}

/// Derivatives from `f'_ℓ = f_{ℓ-1} - (ℓ+1)/x f_ℓ`, with `f'_0 = -f_1`.
/// `values` must extend one order past the last derivative needed.
pub fn derivatives(values: &[f64], x: f64) -> Vec<f64> {
    let n = values.len() - 1;
    (0..n)
        .map(|l| {
            if l == 0 {
                -values[1]
            } else {
                values[l - 1] - (l + 1) as f64 / x * values[l]
            }
        })
        .collect()
}

/// `P_0..=P_lmax` at `t`.
pub fn legendre(l_max: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(l_max + 1);
    p.push(1.0);
    if l_max >= 1 {
        p.push(t);
    }
    for l in 1..l_max {
        let v = ((2 * l + 1) as f64 * t * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
        p.push(v);
    }
    p
}
