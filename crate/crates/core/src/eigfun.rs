//! Direct and adjoint eigenfunctions from the 8x8 port systems, the steady
//! state, and the biorthogonal projection onto the dominant mode.
//!
//! On zone `i` a direct eigenfunction is
//! `(c, q) = Σ_j C_j (φ_j, RP) e^{ν_j x}` with `φ_j = λ + R - ν_j`, and an
//! adjoint one is `Σ_j C*_j (φ_j, RP) e^{-ν_j x}` (conjugated for non-real
//! `λ`). Coefficients are ordered `(C¹₁, C¹₂, C²₁, C²₂, C³₁, C³₂, C⁴₁, C⁴₂)`,
//! where the upper index is the zone.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::charfun::{zone_eigen, ZoneEigen};
use crate::params::{ModelParams, ValidatedParams};
use crate::{Error, Result, PORTS};

/// Relative singular-value threshold for the nullspace rank decision.
pub const NULL_TOL: f64 = 1e-6;
const QUAD_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Direct,
    Adjoint,
    Steady,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `C¹₁ = 1`.
    FirstCoefficient,
    /// Largest-magnitude coefficient set to 1 because `C¹₁` was negligible.
    LargestCoefficient,
    /// Inhomogeneous solve; the feed fixes the scale.
    Feed,
    /// Rescaled by the caller.
    Custom,
}

/// One exponential term of a zone expansion: `(amp_c, amp_q) e^{exponent x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub amp_c: C64,
    pub amp_q: C64,
    pub exponent: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub lambda: C64,
    pub kind: Kind,
    pub coeffs: [C64; 8],
    pub normalization: Normalization,
    /// Largest row-relative violation of the 8 port conditions.
    pub residual: f64,
    pub zones: [ZoneEigen; 4],
    pub params: ModelParams,
}

/// Anything that can be sampled zone by zone on `[-2, 2]`.
pub trait ZoneProfile {
    /// `(c, q)` at `x` seen from inside `zone` (1-based).
    fn sample(&self, zone: usize, x: f64) -> (C64, C64);
}

/// Wraps a closure `(zone, x) -> (c, q)` as a [`ZoneProfile`].
pub struct FnProfile<F>(pub F);

impl<F: Fn(usize, f64) -> (C64, C64)> ZoneProfile for FnProfile<F> {
    fn sample(&self, zone: usize, x: f64) -> (C64, C64) {
        (self.0)(zone, x)
    }
}

impl EigenSolution {
    pub fn terms(&self, zone: usize) -> [Term; 2] {
        let ze = &self.zones[zone - 1];
        let rp = self.params.r * self.params.p;
        let conj_adjoint = self.kind == Kind::Adjoint && self.lambda.im != 0.0;
        std::array::from_fn(|j| {
            let cf = self.coeffs[2 * (zone - 1) + j];
            let (amp_c, amp_q, exponent) = match self.kind {
                Kind::Direct | Kind::Steady => (cf * ze.phi(j), cf * rp, ze.nu(j)),
                Kind::Adjoint => (cf * ze.phi(j), cf * rp, -ze.nu(j)),
            };
            if conj_adjoint {
                Term {
                    amp_c: amp_c.conj(),
                    amp_q: amp_q.conj(),
                    exponent: exponent.conj(),
                }
            } else {
                Term {
                    amp_c,
                    amp_q,
                    exponent,
                }
            }
        })
    }

    /// `(c, q)` on `zone` at `x`, extended analytically past the zone ends.
    pub fn value(&self, zone: usize, x: f64) -> (C64, C64) {
        let mut c = C64::from(0.0);
        let mut q = C64::from(0.0);
        for t in self.terms(zone) {
            let e = (t.exponent * x).exp();
            c += t.amp_c * e;
            q += t.amp_q * e;
        }
        (c, q)
    }

    pub fn derivative(&self, zone: usize, x: f64) -> (C64, C64) {
        let mut c = C64::from(0.0);
        let mut q = C64::from(0.0);
        for t in self.terms(zone) {
            let e = t.exponent * (t.exponent * x).exp();
            c += t.amp_c * e;
            q += t.amp_q * e;
        }
        (c, q)
    }

    /// Same eigenfunction with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: C64) -> EigenSolution {
        let mut out = self.clone();
        out.coeffs = self.coeffs.map(|c| c * s);
        out.normalization = Normalization::Custom;
        out
    }

    /// Rotates by the phase of the mean of `c`, so a real mode becomes real
    /// with positive mean.
    pub fn phase_normalized(&self) -> EigenSolution {
        let mean = integrate(|zone, x| self.value(zone, x).0);
        if mean.norm() == 0.0 {
            return self.clone();
        }
        let mut out = self.scaled(mean.conj() / mean.norm());
        out.normalization = self.normalization;
        out
    }

    /// `L²` norm of `(c, q)` over the loop.
    pub fn norm(&self) -> f64 {
        profile_norm(self)
    }
}

impl ZoneProfile for EigenSolution {
    fn sample(&self, zone: usize, x: f64) -> (C64, C64) {
        self.value(zone, x)
    }
}

fn gl_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        GaussLegendre::new(QUAD_NODES)
            .expect("Gauss-Legendre rule")
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// Composite Gauss-Legendre integral over the four zones.
pub fn integrate(f: impl Fn(usize, f64) -> C64) -> C64 {
    let mut s = C64::from(0.0);
    for zone in 1..=4 {
        let (lo, hi) = (PORTS[zone - 1], PORTS[zone]);
        let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for &(t, w) in gl_nodes() {
            s += w * h * f(zone, m + h * t);
        }
    }
    s
}

/// `⟨f, g⟩ = ∫ (f_c conj(g_c) + f_q conj(g_q)) dx`.
pub fn inner(f: &dyn ZoneProfile, g: &dyn ZoneProfile) -> C64 {
    integrate(|zone, x| {
        let (fc, fq) = f.sample(zone, x);
        let (gc, gq) = g.sample(zone, x);
        fc * gc.conj() + fq * gq.conj()
    })
}

pub fn profile_norm(f: &dyn ZoneProfile) -> f64 {
    inner(f, f).re.max(0.0).sqrt()
}

fn zones_at(lambda: C64, params: &ModelParams) -> [ZoneEigen; 4] {
    std::array::from_fn(|i| zone_eigen(lambda, i + 1, params))
}

fn col(zone: usize, j: usize) -> usize {
    2 * (zone - 1) + j
}

fn assemble(zs: &[ZoneEigen; 4], params: &ModelParams, adjoint: bool) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(8, 8);
    let v = params.v;
    let sgn = if adjoint { -1.0 } else { 1.0 };
    let ex = |zone: usize, j: usize, x: f64| (sgn * zs[zone - 1].nu(j) * x).exp();
    let phi = |zone: usize, j: usize| zs[zone - 1].phi(j);
    let one = C64::from(1.0);
    for j in 0..2 {
        // q continuity at -1, 0, +1 and across the wrap -2/2
        m[(0, col(1, j))] = ex(1, j, -1.0);
        m[(0, col(2, j))] = -ex(2, j, -1.0);
        m[(1, col(2, j))] = one;
        m[(1, col(3, j))] = -one;
        m[(2, col(3, j))] = ex(3, j, 1.0);
        m[(2, col(4, j))] = -ex(4, j, 1.0);
        m[(3, col(1, j))] = -ex(1, j, -2.0);
        m[(3, col(4, j))] = ex(4, j, 2.0);
        if !adjoint {
            // c continuity at ±1, v-weighted c jumps at the wrap and at 0
            m[(4, col(1, j))] = phi(1, j) * ex(1, j, -1.0);
            m[(4, col(2, j))] = -phi(2, j) * ex(2, j, -1.0);
            m[(5, col(3, j))] = phi(3, j) * ex(3, j, 1.0);
            m[(5, col(4, j))] = -phi(4, j) * ex(4, j, 1.0);
            m[(6, col(1, j))] = v[0] * phi(1, j) * ex(1, j, -2.0);
            m[(6, col(4, j))] = -v[3] * phi(4, j) * ex(4, j, 2.0);
            m[(7, col(2, j))] = v[1] * phi(2, j);
            m[(7, col(3, j))] = -v[2] * phi(3, j);
        } else {
            // c* continuity at 0 and across the wrap, v-weighted at ±1
            m[(4, col(2, j))] = phi(2, j);
            m[(4, col(3, j))] = -phi(3, j);
            m[(5, col(1, j))] = phi(1, j) * ex(1, j, -2.0);
            m[(5, col(4, j))] = -phi(4, j) * ex(4, j, 2.0);
            m[(6, col(1, j))] = v[0] * phi(1, j) * ex(1, j, -1.0);
            m[(6, col(2, j))] = -v[1] * phi(2, j) * ex(2, j, -1.0);
            m[(7, col(3, j))] = v[2] * phi(3, j) * ex(3, j, 1.0);
            m[(7, col(4, j))] = -v[3] * phi(4, j) * ex(4, j, 1.0);
        }
    }
    m
}

/// Boundary matrix `M(λ)` of the direct problem, rows as in the port conditions.
pub fn assemble_direct(lambda: C64, params: &ModelParams) -> DMatrix<C64> {
    assemble(&zones_at(lambda, params), params, false)
}

/// Boundary matrix `M*(λ)` of the adjoint problem.
pub fn assemble_adjoint(lambda: C64, params: &ModelParams) -> DMatrix<C64> {
    assemble(&zones_at(lambda, params), params, true)
}

/// Row and column scale factors that bring every row and column to unit max.
fn equilibrate(m: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut rs = vec![1.0; n];
    for i in 0..n {
        let mx = (0..m.ncols()).map(|j| a[(i, j)].norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            rs[i] = 1.0 / mx;
            for j in 0..m.ncols() {
                a[(i, j)] *= rs[i];
            }
        }
    }
    let mut cs = vec![1.0; m.ncols()];
    for j in 0..m.ncols() {
        let mx = (0..n).map(|i| a[(i, j)].norm()).fold(0.0, f64::max);
        if mx > 0.0 {
            cs[j] = 1.0 / mx;
            for i in 0..n {
                a[(i, j)] *= cs[j];
            }
        }
    }
    (a, rs, cs)
}

/// Singular values of the equilibrated matrix, relative to the largest.
pub fn relative_singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let (a, _, _) = equilibrate(m);
    let sv = a.singular_values();
    let mut s: Vec<f64> = sv.iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    let top = s[0];
    s.iter().map(|x| x / top).collect()
}

fn row_residual(m: &DMatrix<C64>, c: &[C64; 8], rhs: &[C64; 8]) -> f64 {
    (0..8)
        .map(|i| {
            let mut acc = -rhs[i];
            let mut scale = rhs[i].norm();
            for j in 0..8 {
                acc += m[(i, j)] * c[j];
                scale += m[(i, j)].norm() * c[j].norm();
            }
            if scale > 0.0 {
                acc.norm() / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// One-dimensional nullspace of `m`, normalized so the first entry is 1.
fn nullspace(m: &DMatrix<C64>, tol: f64) -> Result<([C64; 8], Normalization)> {
    let (a, _rs, cs) = equilibrate(m);
    let svd = a.clone().svd(false, true);
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let top = svd.singular_values[order[0]];
    let smallest = svd.singular_values[order[7]] / top;
    let second = svd.singular_values[order[6]] / top;
    if smallest > tol {
        return Err(Error::NotAnEigenvalue(smallest));
    }
    if second <= tol {
        return Err(Error::DegenerateNullspace(second));
    }
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let y: Vec<C64> = (0..8).map(|j| vt[(order[7], j)].conj()).collect();
    let mut c: [C64; 8] = std::array::from_fn(|j| y[j] * cs[j]);

    if y[0].norm() > 1e-8 {
        // reduced system with C¹₁ = 1, solved in the least-squares sense
        let reduced = a.columns(1, 7).into_owned();
        let rhs = DVector::from_iterator(8, (0..8).map(|i| -a[(i, 0)] / cs[0]));
        let sol = reduced
            .svd(true, true)
            .solve(&rhs, 0.0)
            .map_err(|e| Error::EigSolverFailure(e.to_string()))?;
        c[0] = C64::from(1.0);
        for j in 1..8 {
            c[j] = sol[j - 1] * cs[j];
        }
        Ok((c, Normalization::FirstCoefficient))
    } else {
        let k = (0..8).max_by(|&i, &j| c[i].norm().total_cmp(&c[j].norm())).unwrap();
        let piv = c[k];
        for e in c.iter_mut() {
            *e /= piv;
        }
        Ok((c, Normalization::LargestCoefficient))
    }
}

fn solve_homogeneous(lambda: C64, params: &ModelParams, kind: Kind, tol: f64) -> Result<EigenSolution> {
    let zones = zones_at(lambda, params);
    let m = assemble(&zones, params, kind == Kind::Adjoint);
    let (coeffs, normalization) = nullspace(&m, tol)?;
    let residual = row_residual(&m, &coeffs, &[C64::from(0.0); 8]);
    Ok(EigenSolution {
        lambda,
        kind,
        coeffs,
        normalization,
        residual,
        zones,
        params: *params,
    })
}

/// Direct eigenfunction at a root `lambda` of `Δ`, with `C¹₁ = 1`.
pub fn eigenfunction(lambda: C64, params: &ModelParams) -> Result<EigenSolution> {
    solve_homogeneous(lambda, params, Kind::Direct, NULL_TOL)
}

pub fn eigenfunction_with_tol(lambda: C64, params: &ModelParams, tol: f64) -> Result<EigenSolution> {
    solve_homogeneous(lambda, params, Kind::Direct, tol)
}

/// Adjoint eigenfunction paired with `lambda`, with `C*¹₁ = 1`.
pub fn adjoint_eigenfunction(lambda: C64, params: &ModelParams) -> Result<EigenSolution> {
    solve_homogeneous(lambda, params, Kind::Adjoint, NULL_TOL)
}

pub fn adjoint_eigenfunction_with_tol(lambda: C64, params: &ModelParams, tol: f64) -> Result<EigenSolution> {
    solve_homogeneous(lambda, params, Kind::Adjoint, tol)
}

/// Steady state for the feed `f0`: `M(0) C = (0, .., 0, -f0)`, the last row
/// being `v₂ c(0⁻) - v₃ c(0⁺) = -f0`.
pub fn steady_state(vp: &ValidatedParams) -> Result<EigenSolution> {
    let params = vp.params();
    let zones = zones_at(C64::from(0.0), params);
    let m = assemble(&zones, params, false);
    let rel = relative_singular_values(&m);
    if vp.limit_case() || rel[7] < 1e-13 {
        return Err(Error::SingularSystem(rel[7]));
    }
    let mut rhs = [C64::from(0.0); 8];
    rhs[7] = C64::from(-params.f0);
    let (a, rs, cs) = equilibrate(&m);
    let b = DVector::from_iterator(8, (0..8).map(|i| rhs[i] * rs[i]));
    let y = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularSystem(rel[7]))?;
    let coeffs: [C64; 8] = std::array::from_fn(|j| y[j] * cs[j]);
    let residual = row_residual(&m, &coeffs, &rhs);
    Ok(EigenSolution {
        lambda: C64::from(0.0),
        kind: Kind::Steady,
        coeffs,
        normalization: Normalization::Feed,
        residual,
        zones,
        params: *params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Left limit `x⁻` at a port.
    #[serde(rename = "L")]
    Left,
    /// Right limit `x⁺` at a port.
    #[serde(rename = "R")]
    Right,
    #[serde(rename = ".")]
    Interior,
}

impl Side {
    pub fn tag(&self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
            Side::Interior => ".",
        }
    }
}

/// Grid samples of a profile; each zone contributes both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSamples {
    pub x: Vec<f64>,
    pub zone: Vec<usize>,
    pub side: Vec<Side>,
    pub c: Vec<C64>,
    pub q: Vec<C64>,
}

impl ProfileSamples {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Linear interpolation between samples of the same zone.
impl ZoneProfile for ProfileSamples {
    fn sample(&self, zone: usize, x: f64) -> (C64, C64) {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.zone[i] == zone).collect();
        if idx.is_empty() {
            return (C64::from(0.0), C64::from(0.0));
        }
        let k = idx.partition_point(|&i| self.x[i] <= x);
        if k == 0 {
            let i = idx[0];
            return (self.c[i], self.q[i]);
        }
        if k == idx.len() {
            let i = idx[idx.len() - 1];
            return (self.c[i], self.q[i]);
        }
        let (i, j) = (idx[k - 1], idx[k]);
        let t = (x - self.x[i]) / (self.x[j] - self.x[i]);
        (
            self.c[i] * (1.0 - t) + self.c[j] * t,
            self.q[i] * (1.0 - t) + self.q[j] * t,
        )
    }
}

/// Samples `n_per_zone` equispaced points on each closed zone.
pub fn evaluate(sol: &EigenSolution, n_per_zone: usize) -> Result<ProfileSamples> {
    if n_per_zone < 2 {
        return Err(Error::InvalidArgument("n_per_zone must be >= 2".into()));
    }
    let mut out = ProfileSamples {
        x: Vec::new(),
        zone: Vec::new(),
        side: Vec::new(),
        c: Vec::new(),
        q: Vec::new(),
    };
    for zone in 1..=4 {
        let (lo, hi) = (PORTS[zone - 1], PORTS[zone]);
        for k in 0..n_per_zone {
            let x = if k == n_per_zone - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n_per_zone - 1) as f64
            };
            let side = if k == 0 {
                Side::Right
            } else if k == n_per_zone - 1 {
                Side::Left
            } else {
                Side::Interior
            };
            let (c, q) = sol.value(zone, x);
            out.x.push(x);
            out.zone.push(zone);
            out.side.push(side);
            out.c.push(c);
            out.q.push(q);
        }
    }
    Ok(out)
}

/// `M₁ = ⟨initial, u₀*⟩ / ⟨u₀, u₀*⟩`, the weight of the dominant mode.
pub fn projection_coefficient(
    direct: &EigenSolution,
    adjoint: &EigenSolution,
    initial: &dyn ZoneProfile,
) -> Result<C64> {
    if direct.kind != Kind::Direct || adjoint.kind != Kind::Adjoint {
        return Err(Error::InvalidArgument("expected a direct and an adjoint solution".into()));
    }
    if (direct.lambda - adjoint.lambda).norm() > 1e-9 * direct.lambda.norm().max(1.0) {
        return Err(Error::InvalidArgument("direct and adjoint eigenvalues differ".into()));
    }
    let den = inner(direct, adjoint);
    if den.norm() <= 1e-13 * direct.norm() * adjoint.norm() {
        return Err(Error::NearZeroPairing);
    }
    Ok(inner(initial, adjoint) / den)
}
