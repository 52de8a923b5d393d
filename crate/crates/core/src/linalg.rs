//! Complex linear solvers: restarted GMRES on matrix-free operators and a
//! dense LU path used as its cross-check.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// How row-wise work is scheduled. Both modes reduce each row in a fixed
/// order; `Sequential` additionally avoids the thread pool entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn deterministic(flag: bool) -> Self {
        if flag {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            restart: 60,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// True relative residual `‖b - Ax‖/‖b‖` at exit.
    pub residual: f64,
    /// Relative residual estimate after every inner iteration.
    pub history: Vec<f64>,
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Relative residual `‖b - A x‖ / ‖b‖` (absolute if `b = 0`).
pub fn relative_residual(op: &dyn LinearOperator, x: &[Complex64], b: &[Complex64]) -> f64 {
    let mut ax = vec![Complex64::new(0.0, 0.0); op.dim()];
    op.apply(x, &mut ax);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bn = norm(b);
    if bn > 0.0 {
        norm(&r) / bn
    } else {
        norm(&r)
    }
}

fn givens(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    }
    let r = (an * an + bn * bn).sqrt();
    let c = a / r;
    let s = b / r;
    (c, s)
}

/// Restarted GMRES with modified Gram-Schmidt, zero initial guess.
pub fn gmres(op: &dyn LinearOperator, b: &[Complex64], cfg: &GmresConfig) -> Result<GmresOutcome> {
    let n = op.dim();
    assert_eq!(b.len(), n, "right-hand side length mismatch");
    let zero = Complex64::new(0.0, 0.0);
    let b_norm = norm(b);
    let mut x = vec![zero; n];
    let mut history = Vec::new();
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            history,
        });
    }

    let m = cfg.restart.max(1).min(n.max(1));
    let mut total = 0usize;
    let mut ax = vec![zero; n];
    loop {
        op.apply(&x, &mut ax);
        let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / b_norm;
        if rel <= cfg.tol {
            return Ok(GmresOutcome {
                x,
                iterations: total,
                residual: rel,
                history,
            });
        }
        if total >= cfg.max_iter || !rel.is_finite() {
            return Err(Error::NotConverged {
                iterations: total,
                last: rel,
                history,
            });
        }

        for ri in r.iter_mut() {
            *ri /= beta;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        // hess[j] is column j of the (m+1) x m Hessenberg matrix
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut cs: Vec<Complex64> = Vec::with_capacity(m);
        let mut sn: Vec<Complex64> = Vec::with_capacity(m);
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);

        let mut steps = 0;
        let mut w = vec![zero; n];
        while steps < m && total < cfg.max_iter {
            op.apply(&basis[steps], &mut w);
            let mut col = vec![zero; m + 1];
            for (i, v) in basis.iter().enumerate() {
                let hij = dotc(v, &w);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm(&w);
            col[steps + 1] = Complex64::new(wn, 0.0);

            for i in 0..steps {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i].conj() * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[steps], col[steps + 1]);
            let c = c.conj();
            let s = s.conj();
            col[steps] = c * col[steps] + s * col[steps + 1];
            col[steps + 1] = zero;
            g[steps + 1] = -s.conj() * g[steps];
            g[steps] *= c;
            cs.push(c);
            sn.push(s);
            hess.push(col);

            steps += 1;
            total += 1;
            let est = g[steps].norm() / b_norm;
            history.push(est);
            if est <= cfg.tol * 0.5 || wn <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|wi| wi / wn).collect());
        }

        // back substitution on the triangular part
        let mut y = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                s -= hess[j][i] * yj;
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[j]) {
                *xk += yj * vk;
            }
        }
    }
}

/// Dense LU solve with partial pivoting. Fails with a crude condition
/// estimate (`max|U_ii| / min|U_ii|`) when the factorization is singular.
pub fn dense_solve(matrix: DMatrix<Complex64>, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols());
    assert_eq!(rhs.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = matrix.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !(cond < 1e14) {
        return Err(Error::Singular {
            message: "dense system is singular to working precision".into(),
            condition_estimate: cond,
        });
    }
    let b = DVector::from_column_slice(rhs);
    match lu.solve(&b) {
        Some(x) => Ok(x.iter().copied().collect()),
        None => Err(Error::Singular {
            message: "LU solve failed".into(),
            condition_estimate: cond,
        }),
    }
}

/// Wraps an explicit dense matrix as an operator.
pub struct DenseOperator<'a>(pub &'a DMatrix<Complex64>);

impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.0.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let mut s = Complex64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                s += self.0[(i, j)] * xj;
            }
            *yi = s;
        }
    }
}
