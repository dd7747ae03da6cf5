//! Independent oracles shared by the acceptance runner and the property tests.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use tmb_core::charfun::Mat2;
use tmb_core::ModelParams;

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::from(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_norm(a: &Mat2) -> f64 {
    (0..2)
        .map(|i| a[i][0].norm() + a[i][1].norm())
        .fold(0.0, f64::max)
}

pub fn mat_sub(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = *a;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

/// Zone generator written out from the model equations.
pub fn generator(lambda: C64, v: f64, r: f64, p: f64) -> Mat2 {
    [
        [-(lambda + p * p * r) / v, C64::from(r * p / v)],
        [C64::from(-r * p), lambda + r],
    ]
}

/// Scaling and squaring with a 30-term Taylor polynomial.
pub fn expm(a: &Mat2) -> Mat2 {
    let n = mat_norm(a);
    let s = if n > 0.5 { (n / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let mut x = *a;
    for row in x.iter_mut() {
        for e in row.iter_mut() {
            *e *= scale;
        }
    }
    let id = [[C64::from(1.0), C64::from(0.0)], [C64::from(0.0), C64::from(1.0)]];
    let mut term = id;
    let mut sum = id;
    for k in 1..=30 {
        term = mat_mul(&term, &x);
        for row in term.iter_mut() {
            for e in row.iter_mut() {
                *e /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// `ln det C(λ)` from the explicit linear-in-λ form.
pub fn ln_det_closed(lambda: f64, p: &ModelParams) -> f64 {
    let inv: f64 = p.v.iter().map(|v| 1.0 / v).sum();
    (p.v[1] * p.v[3] / (p.v[0] * p.v[2])).ln() + lambda * (4.0 - inv) + p.r * (4.0 - p.p * p.p * inv)
}

/// Limit-case characteristic function and a magnitude scale for it.
pub fn limit_delta(lambda: C64, v: f64, r: f64, p: f64) -> (C64, f64) {
    let alpha = ((v - 1.0) * lambda + (v - p * p) * r) / 2.0;
    let beta = lambda * lambda + lambda * r * (1.0 + p * p);
    let a = alpha / v;
    let root = (a * a + beta / v).sqrt();
    let e = (4.0 * a).exp();
    let ch = (4.0 * root).cosh();
    let d = e * (2.0 * ch - e) - 1.0;
    let scale = e.norm() * (2.0 * ch.norm() + e.norm()) + 1.0;
    (d, scale)
}

/// Relative residual of the limit-case quadratic.
pub fn limit_quadratic_residual(lambda: C64, k: i64, v: f64, r: f64, p: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let kf = k as f64;
    let b = C64::new(r * (1.0 + p * p), pi * kf * (v - 1.0) / 2.0);
    let c = C64::new(v * pi * pi * kf * kf / 4.0, pi * kf * r * (v - p * p) / 2.0);
    let val = lambda * lambda + b * lambda + c;
    val.norm() / ((lambda * lambda).norm() + (b * lambda).norm() + c.norm())
}

/// Roots of `α² + vβ = 0` in zone `zone` (where `F_i` has a double eigenvalue).
pub fn branch_points(zone: usize, p: &ModelParams) -> [C64; 2] {
    let v = p.v[zone - 1];
    let a1 = (v - 1.0) / 2.0;
    let a0 = (v - p.p * p.p) * p.r / 2.0;
    let qa = a1 * a1 + v;
    let qb = 2.0 * a1 * a0 + v * p.r * (1.0 + p.p * p.p);
    let qc = a0 * a0;
    let disc = C64::from(qb * qb - 4.0 * qa * qc).sqrt();
    [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)]
}
