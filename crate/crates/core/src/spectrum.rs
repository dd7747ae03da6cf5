//! Real eigenvalues from sign changes of `Δ`, the closed-form equal-velocity
//! spectrum, and a Chebyshev collocation spectrum for cross-checks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::charfun::{delta_sign_log, return_map};
use crate::params::{ModelParams, ValidatedParams};
use crate::{Error, Result};

const SCAN_POINTS: usize = 200;
const DENSIFY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketBudget {
    /// `λ₀ ∈ [-M0, 0)`.
    pub m0: f64,
    pub q0: f64,
    pub v_min: f64,
    pub v_max: f64,
}

pub fn bracket_bound(vp: &ValidatedParams) -> Result<BracketBudget> {
    if vp.limit_case() {
        return Err(Error::LimitCaseHasNoBracket);
    }
    let (r, p) = (vp.r, vp.p);
    let (v_min, v_max) = (vp.v_min(), vp.v_max());
    let den = v_min * (v_max - v_min) / 2.0 + v_max * (r * p * p + 1.0);
    Ok(BracketBudget {
        m0: r - r * r * p * p * v_min / den,
        q0: den / (r * p),
        v_min,
        v_max,
    })
}

/// A refined real root of `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealRoot {
    pub lambda: f64,
    /// `|Δ| / (|tr C| + |det C| + 1)` at `lambda`.
    pub residual: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

fn sign_at(params: &ModelParams, l: f64) -> Result<f64> {
    Ok(delta_sign_log(l, params)?.0)
}

/// Bisection on the sign of `Δ` until the bracket is narrower than `tol`.
fn refine(params: &ModelParams, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let s_lo = sign_at(params, lo)?;
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = sign_at(params, mid)?;
        if s == 0.0 {
            return Ok((mid, mid));
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

fn make_root(params: &ModelParams, lo: f64, hi: f64) -> Result<RealRoot> {
    let lambda = 0.5 * (lo + hi);
    let residual = return_map(C64::from(lambda), params)?.scaled_residual();
    Ok(RealRoot {
        lambda,
        residual,
        bracket_lo: lo,
        bracket_hi: hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominantRoot {
    pub lambda: f64,
    /// Sign-change bracket found by the scan, before refinement.
    pub scan_lo: f64,
    pub scan_hi: f64,
    pub root: RealRoot,
    pub budget: BracketBudget,
}

/// Largest real root of `Δ` in `[-M0, 0)`.
pub fn dominant_eigenvalue(vp: &ValidatedParams, tol: f64) -> Result<f64> {
    Ok(dominant_eigenvalue_bracketed(vp, tol)?.lambda)
}

/// As [`dominant_eigenvalue`], also returning the scan bracket.
///
/// Scans a geometric grid from `-tol` down to `-M0`, densifies the first
/// sign change tenfold, then bisects to width `tol`.
pub fn dominant_eigenvalue_bracketed(vp: &ValidatedParams, tol: f64) -> Result<DominantRoot> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let budget = bracket_bound(vp)?;
    let params = vp.params();
    let start = tol.min(budget.m0 * 1e-3);
    let ratio = (budget.m0 / start).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let mut prev_l = -start;
    let mut prev_s = sign_at(params, prev_l)?;
    let mut evaluations = 1;
    let mut min_log_abs = f64::INFINITY;
    for k in 1..SCAN_POINTS {
        let l = if k == SCAN_POINTS - 1 {
            -budget.m0
        } else {
            -start * ratio.powi(k as i32)
        };
        let (s, la) = delta_sign_log(l, params)?;
        evaluations += 1;
        min_log_abs = min_log_abs.min(la);
        if s != prev_s || s == 0.0 {
            // rightmost sign change inside [l, prev_l]
            let h = (prev_l - l) / DENSIFY as f64;
            let mut hi = prev_l;
            let mut s_hi = prev_s;
            let mut lo = l;
            for j in 1..=DENSIFY {
                let x = if j == DENSIFY { l } else { prev_l - h * j as f64 };
                let sx = sign_at(params, x)?;
                if sx != s_hi || sx == 0.0 {
                    lo = x;
                    break;
                }
                hi = x;
                s_hi = sx;
            }
            let (a, b) = refine(params, lo, hi, tol)?;
            let root = make_root(params, a, b)?;
            return Ok(DominantRoot {
                lambda: root.lambda,
                scan_lo: lo,
                scan_hi: hi,
                root,
                budget,
            });
        }
        prev_l = l;
        prev_s = s;
    }
    Err(Error::NoSignChangeFound {
        lo: -budget.m0,
        hi: -start,
        evaluations,
        min_log_abs,
    })
}

/// All sign-change roots of `Δ` on a uniform grid of `grid_n` points over `[lo, hi]`.
pub fn real_root_scan(params: &ModelParams, lo: f64, hi: f64, grid_n: usize) -> Result<Vec<RealRoot>> {
    let mut out: Vec<RealRoot> = Vec::new();
    if !(lo < hi) || grid_n < 2 {
        return Ok(out);
    }
    let h = (hi - lo) / (grid_n - 1) as f64;
    let grid: Vec<f64> = (0..grid_n)
        .map(|k| if k == grid_n - 1 { hi } else { lo + h * k as f64 })
        .collect();
    let signs = grid
        .iter()
        .map(|&l| sign_at(params, l))
        .collect::<Result<Vec<_>>>()?;
    for k in 0..grid_n {
        if signs[k] == 0.0 {
            out.push(make_root(params, grid[k], grid[k])?);
        } else if k + 1 < grid_n && signs[k + 1] != 0.0 && signs[k] != signs[k + 1] {
            let tol = 1e-13 * grid[k].abs().max(grid[k + 1].abs()).max(1.0);
            let (a, b) = refine(params, grid[k], grid[k + 1], tol)?;
            out.push(make_root(params, a, b)?);
        }
    }
    Ok(out)
}

/// One pair `λₖ±` of the equal-velocity spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSpectrum {
    pub k: i64,
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

/// The roots of `λ² + (R(1+P²) + iπk(v-1)/2) λ + iπkR(v-P²)/2 + vπ²k²/4 = 0`.
///
/// `sign(Y)` is taken as `sign(k)` when `Y = 0` (the `P → 1⁺` limit) so that
/// conjugate symmetry in `k` is kept at `P = 1`.
pub fn limit_pair(params: &ModelParams, k: i64) -> LimitSpectrum {
    let (r, p, v) = (params.r, params.p, params.v[0]);
    let s = r * (1.0 + p * p);
    let kf = k as f64;
    if k == 0 {
        return LimitSpectrum {
            k,
            lambda_plus: C64::from(0.0),
            lambda_minus: C64::from(-s),
            x: s * s,
            y: 0.0,
            u: s,
            v: 0.0,
        };
    }
    let x = -PI * PI * kf * kf * (v + 1.0).powi(2) / 4.0 + s * s;
    let y = PI * r * (p * p - 1.0) * (v + 1.0) * kf;
    let z = x.hypot(y);
    let u = ((z + x) / 2.0).max(0.0).sqrt();
    let sgn = if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        kf.signum()
    };
    let vv = sgn * ((z - x) / 2.0).max(0.0).sqrt();
    let im0 = -PI * kf * (v - 1.0) / 4.0;
    LimitSpectrum {
        k,
        lambda_plus: C64::new(-s / 2.0 + u / 2.0, im0 + vv / 2.0),
        lambda_minus: C64::new(-s / 2.0 - u / 2.0, im0 - vv / 2.0),
        x,
        y,
        u,
        v: vv,
    }
}

pub fn limit_spectrum(vp: &ValidatedParams, k_max: usize) -> Result<Vec<LimitSpectrum>> {
    if !vp.limit_case() {
        return Err(Error::NotLimitCase);
    }
    let km = k_max as i64;
    Ok((-km..=km).map(|k| limit_pair(vp.params(), k)).collect())
}

/// Large-`|k|` expansion of `(λₖ⁺, λₖ⁻)` through the `k⁻²` real and `k⁻¹`
/// imaginary terms. `λₖ⁻` follows from the root sum `λ⁺ + λ⁻ = -R(1+P²) - iπk(v-1)/2`.
pub fn limit_asymptote(vp: &ValidatedParams, k: i64) -> Result<(C64, C64)> {
    if !vp.limit_case() {
        return Err(Error::NotLimitCase);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("asymptote needs k != 0".into()));
    }
    let (r, p, v) = (vp.r, vp.p, vp.v[0]);
    let kf = k as f64;
    let c1 = 4.0 * r.powi(3) * (p * p - 1.0) * p * p / (PI * PI * (v + 1.0).powi(2));
    let c2 = 2.0 * r * r * p * p / (PI * (v + 1.0));
    let plus = if p >= 1.0 {
        C64::new(-r + c1 / (kf * kf), PI * kf / 2.0 - c2 / kf)
    } else {
        C64::new(-r * p * p - c1 / (kf * kf), -PI * v * kf / 2.0 + c2 / kf)
    };
    let sum = C64::new(-r * (1.0 + p * p), -PI * kf * (v - 1.0) / 2.0);
    Ok((plus, sum - plus))
}

/// Index `k*` at which `Im λₖ⁺` or `Im λₖ⁻` vanishes, when the radicand is positive.
///
/// `k* = 2R/(π|v-1|) · sqrt((P²v² - (P⁴+1)v + P²)/v)`, from `V(k)² = π²k²(v-1)²/4`.
/// The radicand factors as `(v - P²)(P²v - 1)`, so it is negative exactly
/// when `v` lies between `1/P²` and `P²`. Returns `None` in that case and
/// for `v = 1`, where the formula divides by zero. The caller checks integrality.
pub fn imaginary_vanishing_k(vp: &ValidatedParams) -> Result<Option<f64>> {
    if !vp.limit_case() {
        return Err(Error::NotLimitCase);
    }
    let (r, p, v) = (vp.r, vp.p, vp.v[0]);
    if v == 1.0 {
        return Ok(None);
    }
    let p2 = p * p;
    let rad = (p2 * v * v - (p2 * p2 + 1.0) * v + p2) / v;
    if rad <= 0.0 {
        return Ok(None);
    }
    Ok(Some(2.0 * r / (PI * (v - 1.0).abs()) * rad.sqrt()))
}

/// Chebyshev points `cos(πj/N)` and the differentiation matrix on `[-1, 1]`.
pub fn cheb(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            base
        } else {
            -base
        }
    };
    let mut d = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Eigenvalues of the collocated operator, sorted by decreasing real part.
///
/// Each zone carries `N + 1` Chebyshev nodes for `c` and for `q`. The inflow
/// values (`c` at the left end, `q` at the right end) are fixed by the port
/// conditions as multiples of neighbouring-zone unknowns and eliminated,
/// leaving a standard `8N × 8N` real eigenproblem.
pub fn collocation_spectrum(params: &ModelParams, n: usize) -> Result<Vec<C64>> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("collocation needs N >= 8, got {n}")));
    }
    let (_, d) = cheb(n);
    let d = d * 2.0;
    let (r, p) = (params.r, params.p);
    let v = params.v;
    let np = n + 1;
    let full = |z: usize, comp: usize, j: usize| z * 2 * np + comp * np + j;
    let nfull = 8 * np;
    let mut a = DMatrix::<f64>::zeros(nfull, nfull);
    for z in 0..4 {
        for i in 0..np {
            let (rc, rq) = (full(z, 0, i), full(z, 1, i));
            for j in 0..np {
                a[(rc, full(z, 0, j))] -= v[z] * d[(i, j)];
                a[(rq, full(z, 1, j))] += d[(i, j)];
            }
            a[(rc, full(z, 0, i))] -= p * p * r;
            a[(rc, full(z, 1, i))] += r * p;
            a[(rq, full(z, 0, i))] += r * p;
            a[(rq, full(z, 1, i))] -= r;
        }
    }

    // free unknowns: c at j = 0..N-1, q at j = 1..N
    let free = |z: usize, comp: usize, j: usize| {
        if comp == 0 {
            z * 2 * n + j
        } else {
            z * 2 * n + n + (j - 1)
        }
    };
    let nfree = 8 * n;
    let inflow_ratio = [v[3] / v[0], 1.0, v[1] / v[2], 1.0];
    let mut e = DMatrix::<f64>::zeros(nfull, nfree);
    let mut rows = Vec::with_capacity(nfree);
    for z in 0..4 {
        for j in 0..n {
            e[(full(z, 0, j), free(z, 0, j))] = 1.0;
            rows.push(full(z, 0, j));
        }
        for j in 1..np {
            e[(full(z, 1, j), free(z, 1, j))] = 1.0;
            rows.push(full(z, 1, j));
        }
        let prev = (z + 3) % 4;
        let next = (z + 1) % 4;
        e[(full(z, 0, n), free(prev, 0, 0))] = inflow_ratio[z];
        e[(full(z, 1, 0), free(next, 1, n))] = 1.0;
    }
    let a_free = a.select_rows(rows.iter());
    let k = a_free * e;
    let schur = Schur::try_new(k, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::EigSolverFailure("Schur iteration did not converge".into()))?;
    let mut eig: Vec<C64> = schur.complex_eigenvalues().iter().cloned().collect();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigSolverFailure("non-finite eigenvalue".into()));
    }
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(eig)
}

/// Eigenvalues at resolution `n` that reappear within `tol` at resolution `n2`.
pub fn stable_eigenvalues(params: &ModelParams, n: usize, n2: usize, tol: f64) -> Result<Vec<C64>> {
    let lo = collocation_spectrum(params, n)?;
    let hi = collocation_spectrum(params, n2)?;
    Ok(lo
        .into_iter()
        .filter(|z| hi.iter().any(|w| (z - w).norm() <= tol))
        .collect())
}

/// Largest real eigenvalue in a collocation spectrum (`|Im| <= im_tol`).
pub fn dominant_real(eigs: &[C64], im_tol: f64) -> Option<f64> {
    eigs.iter()
        .filter(|z| z.im.abs() <= im_tol)
        .map(|z| z.re)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
}
