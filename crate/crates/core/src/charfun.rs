//! Zone eigenstructure, zone transfer matrices and the characteristic function.
//!
//! On zone `i` the eigenvalue problem reads `u' = F_i(λ) u` with
//!
//! ```text
//! F_i(λ) = [ -(λ + P²R)/v_i   RP/v_i ]
//!          [ -RP              λ + R  ]
//! ```
//!
//! so the zone transfer matrix is `M_i(λ) = exp(F_i(λ))`. With `a = tr F / 2`
//! and `b² = a² - det F` it is `e^a (cosh b I + sinh(b)/b (F - a I))`, which
//! covers the trigonometric, repeated and hyperbolic cases at once.
//! Every matrix carries a separate real log-scale so products stay finite
//! for large `|λ|`.

use num_complex::Complex64 as C64;

use crate::params::ModelParams;
use crate::{Error, Result};

pub type Mat2 = [[C64; 2]; 2];

const BRANCH_TOL: f64 = 1e-9;
const SERIES_B2: f64 = 1e-4;
const SHIFT_FROM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `ν₁ = conj(ν₂)` for real `λ`; also the tag used for non-real `λ`.
    ComplexPair,
    Repeated,
    RealDistinct,
}

/// Eigenstructure of `F_i(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneEigen {
    pub zone: usize,
    pub lambda: C64,
    pub alpha: C64,
    pub beta: C64,
    pub nu1: C64,
    pub nu2: C64,
    pub phi1: C64,
    pub phi2: C64,
    pub branch: Branch,
    /// `α_i / v_i`, half the trace of `F_i`.
    pub a: C64,
    /// `(ν₁ - ν₂) / 2`.
    pub b: C64,
    /// `b²`, kept separately since it is what the matrix formula needs.
    pub b2: C64,
}

impl ZoneEigen {
    pub fn nu(&self, j: usize) -> C64 {
        if j == 0 {
            self.nu1
        } else {
            self.nu2
        }
    }

    pub fn phi(&self, j: usize) -> C64 {
        if j == 0 {
            self.phi1
        } else {
            self.phi2
        }
    }
}

fn zone_velocity(params: &ModelParams, zone: usize) -> f64 {
    assert!((1..=4).contains(&zone), "zone index must be 1..=4, got {zone}");
    params.v[zone - 1]
}

/// `F_i(λ)` itself.
pub fn zone_generator(lambda: C64, zone: usize, params: &ModelParams) -> Mat2 {
    let v = zone_velocity(params, zone);
    let (r, p) = (params.r, params.p);
    [
        [-(lambda + p * p * r) / v, C64::from(r * p / v)],
        [C64::from(-r * p), lambda + r],
    ]
}

pub fn zone_eigen(lambda: C64, zone: usize, params: &ModelParams) -> ZoneEigen {
    let v = zone_velocity(params, zone);
    let (r, p) = (params.r, params.p);
    let alpha = ((v - 1.0) * lambda + (v - p * p) * r) / 2.0;
    let beta = lambda * lambda + lambda * r * (1.0 + p * p);
    let a = alpha / v;
    let disc = alpha * alpha + v * beta;
    let b2 = disc / (v * v);

    let (b, branch) = if lambda.im == 0.0 {
        let d = disc.re;
        let tol = BRANCH_TOL * (alpha.re * alpha.re).max((v * beta.re).abs()).max(1.0);
        let b2r = b2.re;
        let b = if b2r < 0.0 {
            C64::new(0.0, (-b2r).sqrt())
        } else {
            C64::new(b2r.sqrt(), 0.0)
        };
        let branch = if d.abs() <= tol {
            Branch::Repeated
        } else if d < 0.0 {
            Branch::ComplexPair
        } else {
            Branch::RealDistinct
        };
        (b, branch)
    } else {
        let mut b = b2.sqrt();
        if b.im < 0.0 || (b.im == 0.0 && b.re < 0.0) {
            b = -b;
        }
        (b, Branch::ComplexPair)
    };

    let nu1 = a + b;
    let nu2 = a - b;
    ZoneEigen {
        zone,
        lambda,
        alpha,
        beta,
        nu1,
        nu2,
        phi1: lambda + r - nu1,
        phi2: lambda + r - nu2,
        branch,
        a,
        b,
        b2,
    }
}

/// `cosh(b)` and `sinh(b)/b` from `b²`, both divided by `e^shift`.
fn cosh_sinhc_scaled(b2: C64, real: bool) -> (C64, C64, f64) {
    if b2.norm() < SERIES_B2 {
        let ch = 1.0 + b2 * (0.5 + b2 * (1.0 / 24.0 + b2 / 720.0));
        let sc = 1.0 + b2 * (1.0 / 6.0 + b2 * (1.0 / 120.0 + b2 / 5040.0));
        return (ch, sc, 0.0);
    }
    if real {
        let x = b2.re;
        if x < 0.0 {
            let w = (-x).sqrt();
            return (C64::from(w.cos()), C64::from(w.sin() / w), 0.0);
        }
        let b = x.sqrt();
        if b < SHIFT_FROM {
            return (C64::from(b.cosh()), C64::from(b.sinh() / b), 0.0);
        }
        let em = (-2.0 * b).exp();
        let ch = 0.5 * (1.0 + em);
        let sh = 0.5 * (1.0 - em);
        return (C64::from(ch), C64::from(sh / b), b);
    }
    let b = b2.sqrt();
    let r = b.re.abs();
    if r < SHIFT_FROM {
        return (b.cosh(), b.sinh() / b, 0.0);
    }
    let ep = (b - r).exp();
    let em = (-b - r).exp();
    (0.5 * (ep + em), 0.5 * (ep - em) / b, r)
}

/// A 2x2 matrix stored as `exp(log_scale) * m` with `‖m‖∞ ≈ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMat2 {
    pub m: Mat2,
    pub log_scale: f64,
}

fn inf_norm(m: &Mat2) -> f64 {
    (m[0][0].norm() + m[0][1].norm()).max(m[1][0].norm() + m[1][1].norm())
}

impl ScaledMat2 {
    pub fn new(m: Mat2, log_scale: f64) -> Self {
        ScaledMat2 { m, log_scale }.renormalized()
    }

    pub fn diag(d0: f64, d1: f64) -> Self {
        let z = C64::from(0.0);
        ScaledMat2::new([[C64::from(d0), z], [z, C64::from(d1)]], 0.0)
    }

    fn renormalized(mut self) -> Self {
        let n = inf_norm(&self.m);
        if n > 0.0 && n.is_finite() {
            for row in self.m.iter_mut() {
                for e in row.iter_mut() {
                    *e /= n;
                }
            }
            self.log_scale += n.ln();
        }
        self
    }

    pub fn mul(&self, rhs: &ScaledMat2) -> ScaledMat2 {
        let (a, b) = (&self.m, &rhs.m);
        let mut out = [[C64::from(0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        ScaledMat2::new(out, self.log_scale + rhs.log_scale)
    }

    pub fn trace(&self) -> LogScaled {
        LogScaled::new(self.m[0][0] + self.m[1][1], self.log_scale)
    }

    /// Plain matrix; overflows to infinity when the scale is too large.
    pub fn to_plain(&self) -> Mat2 {
        let s = self.log_scale.exp();
        self.m.map(|row| row.map(|e| e * s))
    }
}

/// A complex number stored as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    pub mantissa: C64,
    pub log_scale: f64,
}

impl LogScaled {
    pub fn new(mantissa: C64, log_scale: f64) -> Self {
        LogScaled {
            mantissa,
            log_scale,
        }
    }

    pub fn value(&self) -> C64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }
}

/// Zone transfer matrix `exp(F_i(λ))` in scaled form.
pub fn zone_matrix_scaled(lambda: C64, zone: usize, params: &ModelParams) -> ScaledMat2 {
    let ze = zone_eigen(lambda, zone, params);
    let real = lambda.im == 0.0;
    let (ch, sc, shift) = cosh_sinhc_scaled(ze.b2, real);
    let g = zone_generator(lambda, zone, params);
    let a = ze.a;
    let m = [
        [ch + sc * (g[0][0] - a), sc * g[0][1]],
        [sc * g[1][0], ch + sc * (g[1][1] - a)],
    ];
    let m = if real {
        m
    } else {
        let rot = C64::new(0.0, a.im).exp();
        m.map(|row| row.map(|e| e * rot))
    };
    ScaledMat2::new(m, a.re + shift)
}

/// Zone transfer matrix `exp(F_i(λ))`. Real for real `λ`.
pub fn zone_matrix(lambda: C64, zone: usize, params: &ModelParams) -> Mat2 {
    zone_matrix_scaled(lambda, zone, params).to_plain()
}

/// The six loop factors in product order
/// `M₁, diag(v₄/v₁, 1), M₄, M₃, diag(v₂/v₃, 1), M₂`.
pub fn loop_factors(lambda: C64, params: &ModelParams) -> [ScaledMat2; 6] {
    let v = params.v;
    [
        zone_matrix_scaled(lambda, 1, params),
        ScaledMat2::diag(v[3] / v[0], 1.0),
        zone_matrix_scaled(lambda, 4, params),
        zone_matrix_scaled(lambda, 3, params),
        ScaledMat2::diag(v[1] / v[2], 1.0),
        zone_matrix_scaled(lambda, 2, params),
    ]
}

pub fn product(factors: &[ScaledMat2]) -> ScaledMat2 {
    let mut acc = ScaledMat2::diag(1.0, 1.0);
    for f in factors {
        acc = acc.mul(f);
    }
    acc
}

/// `C(λ)` with its trace, determinant and `Δ(λ) = tr C - det C - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnMapEval {
    pub lambda: C64,
    pub c: ScaledMat2,
    pub trace: LogScaled,
    /// Product of the factor determinants `e^{ν₁+ν₂}` and velocity ratios.
    pub det: LogScaled,
    /// Plain `Δ`; infinite when `|Δ|` exceeds the double range.
    pub delta: C64,
    pub delta_log: LogScaled,
}

impl ReturnMapEval {
    /// Sign of `Re Δ`, meaningful for real `λ`.
    pub fn delta_sign(&self) -> f64 {
        let re = self.delta_log.mantissa.re;
        if re > 0.0 {
            1.0
        } else if re < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    pub fn log_abs_delta(&self) -> f64 {
        self.delta_log.ln_abs()
    }

    /// `|Δ| / (|tr C| + |det C| + 1)`, the residual used to judge roots.
    pub fn scaled_residual(&self) -> f64 {
        let s = self.delta_log.log_scale;
        let t = self.trace.mantissa.norm() * (self.trace.log_scale - s).exp();
        let d = self.det.mantissa.norm() * (self.det.log_scale - s).exp();
        let one = (-s).exp();
        self.delta_log.mantissa.norm() / (t + d + one)
    }
}

fn log_det(lambda: C64, params: &ModelParams) -> LogScaled {
    let v = params.v;
    let mut l = C64::from((v[3] / v[0]).ln() + (v[1] / v[2]).ln());
    for zone in 1..=4 {
        l += 2.0 * zone_eigen(lambda, zone, params).a;
    }
    LogScaled::new(C64::new(0.0, l.im).exp(), l.re)
}

pub fn return_map(lambda: C64, params: &ModelParams) -> Result<ReturnMapEval> {
    let c = product(&loop_factors(lambda, params));
    let trace = c.trace();
    let det = log_det(lambda, params);
    if !c.log_scale.is_finite() || !det.log_scale.is_finite() {
        return Err(Error::Overflow(lambda.re));
    }
    let s = trace.ln_abs().max(det.log_scale).max(0.0);
    let mant = trace.mantissa * (trace.log_scale - s).exp()
        - det.mantissa * (det.log_scale - s).exp()
        - (-s).exp();
    let delta_log = LogScaled::new(mant, s);
    Ok(ReturnMapEval {
        lambda,
        c,
        trace,
        det,
        delta: delta_log.value(),
        delta_log,
    })
}

pub fn delta(lambda: C64, params: &ModelParams) -> Result<C64> {
    Ok(return_map(lambda, params)?.delta)
}

/// `(sign Δ, log|Δ|)` for real `λ`, finite for any representable `λ`.
pub fn delta_sign_log(lambda: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let e = return_map(C64::from(lambda), params)?;
    Ok((e.delta_sign(), e.log_abs_delta()))
}

/// Leading growth of `log|Δ(λ)|`: `Σ(1/v_i)|λ|` as `λ → -∞`, `4λ` as `λ → +∞`.
pub fn asymptotic_envelope(lambda: f64, params: &ModelParams, threshold: f64) -> Result<f64> {
    if !(lambda.abs() >= threshold) {
        return Err(Error::ThresholdTooSmall { lambda, threshold });
    }
    Ok(if lambda < 0.0 {
        params.inv_v_sum() * lambda.abs()
    } else {
        4.0 * lambda
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs() -> ModelParams {
        ModelParams::case_study()
    }

    fn det2(m: &Mat2) -> C64 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[test]
    fn lambda_zero_kills_beta() {
        let p = cs();
        for zone in 1..=4 {
            let z = zone_eigen(C64::from(0.0), zone, &p);
            assert_eq!(z.beta, C64::from(0.0));
            let v = p.v[zone - 1];
            let two_a = 2.0 * z.alpha / v;
            let (hi, lo) = if two_a.re > 0.0 { (z.nu1, z.nu2) } else { (z.nu2, z.nu1) };
            assert!((hi - two_a).norm() < 1e-13);
            assert!(lo.norm() < 1e-13);
        }
    }

    #[test]
    fn trace_and_det_of_generator() {
        let p = cs();
        for &lam in &[C64::new(-0.3, 0.0), C64::new(2.0, -1.5), C64::new(-25.0, 7.0)] {
            for zone in 1..=4 {
                let z = zone_eigen(lam, zone, &p);
                let f = zone_generator(lam, zone, &p);
                let tr = f[0][0] + f[1][1];
                let det = det2(&f);
                assert!((z.nu1 + z.nu2 - tr).norm() <= 1e-12 * tr.norm().max(1.0));
                assert!((z.nu1 * z.nu2 - det).norm() <= 1e-12 * det.norm().max(1.0));
            }
        }
    }

    #[test]
    fn branch_boundaries_are_repeated() {
        let p = cs();
        for zone in 1..=4 {
            let v = p.v[zone - 1];
            let sv = v.sqrt();
            for s in [1.0, -1.0] {
                let l = -p.r * (sv + s * p.p).powi(2) / (v + 1.0);
                let z = zone_eigen(C64::from(l), zone, &p);
                assert_eq!(z.branch, Branch::Repeated, "zone {zone} lambda {l}");
            }
        }
    }

    #[test]
    fn branch_tags_on_either_side() {
        let p = cs();
        // zone 2 is complex at λ₀ and zone 1 real distinct
        let l = C64::from(-0.110377);
        assert_eq!(zone_eigen(l, 1, &p).branch, Branch::RealDistinct);
        assert_eq!(zone_eigen(l, 2, &p).branch, Branch::ComplexPair);
        assert_eq!(zone_eigen(l, 3, &p).branch, Branch::RealDistinct);
        assert_eq!(zone_eigen(l, 4, &p).branch, Branch::ComplexPair);
        let z = zone_eigen(l, 2, &p);
        assert!(z.nu1.im > 0.0);
        assert_eq!(z.nu1, z.nu2.conj());
    }

    #[test]
    fn liouville_det() {
        // The entry-wise det of exp(F) cancels like e^{2|Re b|}; the bound
        // below charges eps·‖M‖² for that and is 1e-10 relative in the mid range.
        let p = cs();
        for k in 0..41 {
            let lam = C64::new(-30.0 + k as f64, 0.3 * (k as f64 - 20.0));
            for zone in 1..=4 {
                let m = zone_matrix(lam, zone, &p);
                let expect = (2.0 * zone_eigen(lam, zone, &p).a).exp();
                let n = inf_norm(&m);
                let err = (det2(&m) - expect).norm();
                assert!(err <= 1e-10 * expect.norm() + 1e-14 * n * n, "{lam} zone {zone}: {err:e}");
                if (-25.0..=-5.0).contains(&lam.re) {
                    assert!(err <= 1e-10 * expect.norm());
                }
            }
        }
    }

    #[test]
    fn real_lambda_gives_real_matrix() {
        let p = cs();
        for k in 0..60 {
            let lam = C64::from(-30.0 + 0.67 * k as f64);
            for zone in 1..=4 {
                let m = zone_matrix(lam, zone, &p);
                let n = inf_norm(&m);
                for row in m {
                    for e in row {
                        assert!(e.im.abs() <= 1e-12 * n);
                    }
                }
            }
        }
    }

    #[test]
    fn branch_continuity() {
        let p = cs();
        for zone in 1..=4 {
            let v = p.v[zone - 1];
            for s in [1.0, -1.0] {
                let l = -p.r * (v.sqrt() + s * p.p).powi(2) / (v + 1.0);
                let lo = zone_matrix(C64::from(l - 1e-6), zone, &p);
                let hi = zone_matrix(C64::from(l + 1e-6), zone, &p);
                let mid = zone_matrix(C64::from(l), zone, &p);
                let n = inf_norm(&mid);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((lo[i][j] - hi[i][j]).norm() <= 1e-4 * n);
                        assert!((lo[i][j] - mid[i][j]).norm() <= 1e-4 * n);
                    }
                }
            }
        }
    }

    #[test]
    fn conjugate_symmetry_of_delta() {
        let p = cs();
        for &(re, im) in &[(-0.2, 0.5), (-3.0, -2.0), (1.5, 4.0), (-12.0, 0.1)] {
            let d = delta(C64::new(re, im), &p).unwrap();
            let dc = delta(C64::new(re, -im), &p).unwrap();
            assert!((d - dc.conj()).norm() <= 1e-10 * d.norm().max(1.0));
        }
    }

    #[test]
    fn cyclic_trace_invariance() {
        let p = cs();
        for k in 0..20 {
            let lam = C64::new(-15.0 + 1.1 * k as f64, 0.2 * k as f64);
            let f = loop_factors(lam, &p);
            let base = product(&f).trace();
            for shift in [1, 3, 4] {
                let mut rot = f.to_vec();
                rot.rotate_left(shift);
                let t = product(&rot).trace();
                let rel = (t.value() - base.value()).norm() / base.value().norm();
                assert!(rel <= 1e-10, "shift {shift}: {rel}");
            }
        }
    }

    #[test]
    fn limit_case_delta_zero_at_origin_and_minus_r_one_p2() {
        let p = ModelParams::new([1.275; 4], 18.0, 1.03);
        let e = return_map(C64::from(0.0), &p).unwrap();
        assert!(e.scaled_residual() < 1e-12);
        let l = -p.r * (1.0 + p.p * p.p);
        let e = return_map(C64::from(l), &p).unwrap();
        assert!(e.scaled_residual() < 1e-10);
    }

    #[test]
    fn tails_are_positive() {
        let p = cs();
        for l in [40.0, -40.0, 60.0, -60.0, 600.0, -2000.0] {
            let (s, la) = delta_sign_log(l, &p).unwrap();
            assert_eq!(s, 1.0, "lambda {l}");
            assert!(la.is_finite());
        }
        assert!(delta(C64::from(0.0), &p).unwrap().norm() > 1.0);
    }

    #[test]
    fn frozen_delta_values() {
        // high-precision reference values for the case study
        let p = cs();
        let cases = [
            (0.0, 1.3967e6),
            (-1.0, -7618.8),
            (-5.0, -325.19),
            (-10.0, -11.26),
            (-20.0, -1.1155),
            (-40.0, 4.558e12),
            (-60.0, 1.9265e50),
        ];
        for (l, want) in cases {
            let d = delta(C64::from(l), &p).unwrap().re;
            assert!(((d - want) / want).abs() < 5e-4, "lambda {l}: {d} vs {want}");
        }
    }

    #[test]
    fn envelope_threshold() {
        let p = cs();
        assert!(matches!(
            asymptotic_envelope(-5.0, &p, 10.0),
            Err(Error::ThresholdTooSmall { .. })
        ));
        let s = p.inv_v_sum();
        assert!((s - 3.22614).abs() < 1e-5);
        assert_eq!(asymptotic_envelope(-60.0, &p, 10.0).unwrap(), s * 60.0);
        assert_eq!(asymptotic_envelope(60.0, &p, 10.0).unwrap(), 240.0);
    }

    #[test]
    fn envelope_ratio_tends_to_one() {
        let p = cs();
        for l in [-4000.0, 4000.0] {
            let (_, la) = delta_sign_log(l, &p).unwrap();
            let env = asymptotic_envelope(l, &p, 10.0).unwrap();
            let ratio = la / env;
            assert!((ratio - 1.0).abs() < 0.02, "lambda {l}: ratio {ratio}");
        }
    }
}
