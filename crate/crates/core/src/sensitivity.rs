//! Adjoint-method derivatives of an eigenvalue with respect to `v₁..v₄`, `R`
//! and `P`, with exponential integrals in closed form.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::eigfun::{adjoint_eigenfunction, eigenfunction, EigenSolution, Kind, Term};
use crate::params::{validate, ModelParams, ValidatedParams};
use crate::spectrum::dominant_eigenvalue;
use crate::{Error, Result, PORTS};

/// Exponents below this magnitude are treated as exactly zero.
pub const EXPONENT_ZERO: f64 = 1e-12;
/// Tolerance of the bisection reruns behind the finite-difference check.
pub const FD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub lambda: C64,
    pub dv: [C64; 4],
    #[serde(rename = "dR")]
    pub d_r: C64,
    #[serde(rename = "dP")]
    pub d_p: C64,
    pub denominator: C64,
    /// Relative errors against central differences, ordered `v₁..v₄, R, P`.
    pub fd_check: Option<[f64; 6]>,
}

impl SensitivityReport {
    /// The six derivatives in the order `v₁..v₄, R, P`.
    pub fn derivatives(&self) -> [C64; 6] {
        [self.dv[0], self.dv[1], self.dv[2], self.dv[3], self.d_r, self.d_p]
    }
}

fn sinhc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        1.0 + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

/// `∫ D conj(D*) e^{(ν - conj(ν*)) x} dx` over `[x_lo, x_hi]`.
pub fn exp_integral(d: C64, ds: C64, nu: C64, nus: C64, x_lo: f64, x_hi: f64) -> C64 {
    let mu = nu - nus.conj();
    let len = x_hi - x_lo;
    let amp = d * ds.conj();
    if mu.norm() <= EXPONENT_ZERO {
        return amp * len;
    }
    if (mu * len).norm() < 1.0 {
        let mid = 0.5 * (x_lo + x_hi);
        return amp * (mu * mid).exp() * len * sinhc(mu * (0.5 * len));
    }
    amp * ((mu * x_hi).exp() - (mu * x_lo).exp()) / mu
}

fn check_pair(direct: &EigenSolution, adjoint: &EigenSolution) -> Result<()> {
    if direct.kind != Kind::Direct || adjoint.kind != Kind::Adjoint {
        return Err(Error::InvalidArgument("expected a direct and an adjoint solution".into()));
    }
    if (direct.lambda - adjoint.lambda).norm() > 1e-9 * direct.lambda.norm().max(1.0) {
        return Err(Error::InvalidArgument("direct and adjoint eigenvalues differ".into()));
    }
    Ok(())
}

/// `∫_{I_zone} f(direct) conj(g(adjoint))`, with `f`, `g` linear in `(c, q)`
/// and given on the amplitude level of each exponential term.
fn zone_form(
    zone: usize,
    direct: &EigenSolution,
    adjoint: &EigenSolution,
    f: impl Fn(&Term) -> C64,
    g: impl Fn(&Term) -> C64,
) -> C64 {
    let (lo, hi) = (PORTS[zone - 1], PORTS[zone]);
    let mut s = C64::from(0.0);
    for dt in direct.terms(zone) {
        for at in adjoint.terms(zone) {
            // adjoint term is D* e^{-ν* x}; its exponent is stored as -ν*
            s += exp_integral(f(&dt), g(&at), dt.exponent, -at.exponent, lo, hi);
        }
    }
    s
}

fn loop_form(
    direct: &EigenSolution,
    adjoint: &EigenSolution,
    f: impl Fn(&Term) -> C64 + Copy,
    g: impl Fn(&Term) -> C64 + Copy,
) -> C64 {
    (1..=4).map(|z| zone_form(z, direct, adjoint, f, g)).sum()
}

/// `⟨u, u*⟩ = ∫ (c c̄* + q q̄*)`.
pub fn denominator(direct: &EigenSolution, adjoint: &EigenSolution) -> C64 {
    loop_form(direct, adjoint, |t| t.amp_c, |t| t.amp_c) + loop_form(direct, adjoint, |t| t.amp_q, |t| t.amp_q)
}

fn checked_denominator(direct: &EigenSolution, adjoint: &EigenSolution) -> Result<C64> {
    check_pair(direct, adjoint)?;
    let den = denominator(direct, adjoint);
    if den.norm() <= 1e-13 * direct.norm() * adjoint.norm() || !den.is_finite() {
        return Err(Error::ZeroDenominator);
    }
    Ok(den)
}

/// `∂λ/∂v_k` for `k` in `1..=4`.
pub fn dlambda_dv(k: usize, direct: &EigenSolution, adjoint: &EigenSolution) -> Result<C64> {
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidArgument(format!("zone index {k} not in 1..4")));
    }
    let den = checked_denominator(direct, adjoint)?;
    // inlet of zones 1 and 3, outlet of zones 2 and 4
    let (sign, x) = match k {
        1 => (-1.0, -2.0),
        2 => (1.0, 0.0),
        3 => (-1.0, 0.0),
        _ => (1.0, 2.0),
    };
    let c = direct.value(k, x).0;
    let cs = adjoint.value(k, x).0;
    let boundary = sign * c * cs.conj();
    let interior = zone_form(k, direct, adjoint, |t| t.amp_c * t.exponent, |t| t.amp_c);
    Ok((boundary - interior) / den)
}

/// `∂λ/∂R = -∫(Pc - q) conj(Pc* - q*) / ⟨u, u*⟩`.
pub fn dlambda_dr(direct: &EigenSolution, adjoint: &EigenSolution) -> Result<C64> {
    let den = checked_denominator(direct, adjoint)?;
    let p = direct.params.p;
    let num = loop_form(direct, adjoint, |t| p * t.amp_c - t.amp_q, |t| p * t.amp_c - t.amp_q);
    Ok(-num / den)
}

/// `∂λ/∂P = ∫(R(q - 2Pc) c̄* + R c q̄*) / ⟨u, u*⟩`.
pub fn dlambda_dp(direct: &EigenSolution, adjoint: &EigenSolution) -> Result<C64> {
    let den = checked_denominator(direct, adjoint)?;
    let (r, p) = (direct.params.r, direct.params.p);
    let num = loop_form(direct, adjoint, |t| r * (t.amp_q - 2.0 * p * t.amp_c), |t| t.amp_c)
        + loop_form(direct, adjoint, |t| r * t.amp_c, |t| t.amp_q);
    Ok(num / den)
}

/// All six derivatives at a given simple eigenvalue.
pub fn sensitivities(direct: &EigenSolution, adjoint: &EigenSolution) -> Result<SensitivityReport> {
    let denominator = checked_denominator(direct, adjoint)?;
    let dv = [
        dlambda_dv(1, direct, adjoint)?,
        dlambda_dv(2, direct, adjoint)?,
        dlambda_dv(3, direct, adjoint)?,
        dlambda_dv(4, direct, adjoint)?,
    ];
    Ok(SensitivityReport {
        lambda: direct.lambda,
        dv,
        d_r: dlambda_dr(direct, adjoint)?,
        d_p: dlambda_dp(direct, adjoint)?,
        denominator,
        fd_check: None,
    })
}

fn perturbed(params: &ModelParams, which: usize, delta: f64) -> ModelParams {
    let mut p = *params;
    match which {
        0..=3 => p.v[which] += delta,
        4 => p.r += delta,
        _ => p.p += delta,
    }
    p
}

fn parameter(params: &ModelParams, which: usize) -> f64 {
    match which {
        0..=3 => params.v[which],
        4 => params.r,
        _ => params.p,
    }
}

/// Central difference of the dominant eigenvalue in parameter `which`
/// (`0..4` = `v₁..v₄`, `4` = `R`, `5` = `P`).
pub fn central_difference(params: &ModelParams, which: usize) -> Result<f64> {
    let h = 1e-4 * parameter(params, which).abs().max(1.0);
    let up = dominant_eigenvalue(&validate(perturbed(params, which, h))?, FD_TOL)?;
    let down = dominant_eigenvalue(&validate(perturbed(params, which, -h))?, FD_TOL)?;
    Ok((up - down) / (2.0 * h))
}

/// Dominant eigenvalue, both eigenfunctions and the six derivatives, with
/// optional finite-difference cross-checks.
pub fn full_report(vp: &ValidatedParams, tol: f64, fd_check: bool) -> Result<SensitivityReport> {
    if !vp.strict_ports() {
        return Err(Error::NotStrictPorts);
    }
    let lambda = C64::from(dominant_eigenvalue(vp, tol)?);
    let direct = eigenfunction(lambda, vp.params())?;
    let adjoint = adjoint_eigenfunction(lambda, vp.params())?;
    let mut report = sensitivities(&direct, &adjoint)?;
    if fd_check {
        let d = report.derivatives();
        let mut errs = [0.0; 6];
        for (which, e) in errs.iter_mut().enumerate() {
            let fd = central_difference(vp.params(), which)?;
            *e = (d[which].re - fd).abs() / d[which].norm().max(1e-3);
        }
        report.fd_check = Some(errs);
    }
    Ok(report)
}
