//! Time-domain simulator: first-order upwind advection followed by the exact
//! interphase mass-transfer step, with energy, mass and convergence
//! diagnostics.
//!
//! Each zone holds `nx` cells with centres at `x_i + (j - 1/2) dx`.
//! Ghost values are taken from the neighbouring zones on the fly: the
//! inflow `c` of zone 1 is `(v₄/v₁) c₄,last`, that of zone 3 is
//! `(v₂ c₂,last + f0)/v₃`, and the downstream `q` of each zone is the first
//! cell of the next one (zone 4 wraps to zone 1).

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::eigfun::{adjoint_eigenfunction, eigenfunction, projection_coefficient, FnProfile, ZoneProfile};
use crate::params::{ModelParams, ValidatedParams};
use crate::spectrum::dominant_eigenvalue;
use crate::{Error, Result, PORTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Cells per zone.
    pub nx: usize,
    /// Courant parameter, `dt = p dx`.
    pub p: f64,
    /// Final dimensionless time.
    pub t_final: f64,
    pub f0: f64,
    /// Steps between diagnostics rows.
    pub record_every: usize,
    /// Half mass-transfer steps around the advection step.
    pub strang: bool,
}

impl SimConfig {
    /// Defaults: `nx = 400`, `p = 0.9 / max(v_max, 1)`, feed from `params`.
    pub fn new(params: &ModelParams, t_final: f64) -> Self {
        SimConfig {
            nx: 400,
            p: default_courant(params),
            t_final,
            f0: params.f0,
            record_every: 200,
            strang: false,
        }
    }

    pub fn with_nx(mut self, nx: usize) -> Self {
        self.nx = nx;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_f0(mut self, f0: f64) -> Self {
        self.f0 = f0;
        self
    }

    pub fn with_record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.p * self.dx()
    }

    /// Rejects a Courant parameter outside `(0, 1/max(v_max, 1)]`.
    pub fn check(&self, params: &ModelParams) -> Result<()> {
        let max = 1.0 / params.v_max().max(1.0);
        if !(self.p > 0.0 && self.p <= max) || !self.p.is_finite() {
            return Err(Error::BadCfl { p: self.p, max });
        }
        if self.nx < 8 {
            return Err(Error::InvalidArgument(format!("nx = {} is below 8", self.nx)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        if !(self.t_final >= 0.0) || !self.f0.is_finite() {
            return Err(Error::InvalidArgument("t_final and f0 must be finite, t_final >= 0".into()));
        }
        Ok(())
    }
}

pub fn default_courant(params: &ModelParams) -> f64 {
    0.9 / params.v_max().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// `c[zone][cell]`, zones 0-based here.
    pub c: [Vec<f64>; 4],
    pub q: [Vec<f64>; 4],
    pub t: f64,
    pub dt: f64,
    pub dx: f64,
    pub step: usize,
}

impl SimState {
    pub fn nx(&self) -> usize {
        self.c[0].len()
    }

    /// Centre of cell `j` (0-based) in zone `zone` (1-based).
    pub fn x(&self, zone: usize, j: usize) -> f64 {
        PORTS[zone - 1] + (j as f64 + 0.5) * self.dx
    }

    /// State from explicit cell arrays.
    pub fn from_cells(c: [Vec<f64>; 4], q: [Vec<f64>; 4], config: &SimConfig) -> Result<SimState> {
        for z in 0..4 {
            if c[z].len() != config.nx || q[z].len() != config.nx {
                return Err(Error::InvalidArgument(format!(
                    "zone {} has {} / {} cells, expected {}",
                    z + 1,
                    c[z].len(),
                    q[z].len(),
                    config.nx
                )));
            }
        }
        Ok(SimState {
            c,
            q,
            t: 0.0,
            dt: config.dt(),
            dx: config.dx(),
            step: 0,
        })
    }

    fn all_finite(&self) -> bool {
        self.c.iter().chain(self.q.iter()).all(|z| z.iter().all(|x| x.is_finite()))
    }
}

/// Cell-centred reference profile (real), one array per zone.
#[derive(Debug, Clone, PartialEq)]
pub struct CellProfile {
    pub c: [Vec<f64>; 4],
    pub q: [Vec<f64>; 4],
}

impl CellProfile {
    /// Real part of `profile` at the cell centres of an `nx`-cell grid.
    pub fn sample(profile: &dyn ZoneProfile, nx: usize) -> CellProfile {
        let dx = 1.0 / nx as f64;
        let mut c: [Vec<f64>; 4] = Default::default();
        let mut q: [Vec<f64>; 4] = Default::default();
        for z in 0..4 {
            for j in 0..nx {
                let x = PORTS[z] + (j as f64 + 0.5) * dx;
                let (cv, qv) = profile.sample(z + 1, x);
                c[z].push(cv.re);
                q[z].push(qv.re);
            }
        }
        CellProfile { c, q }
    }

    /// Dominant eigenfunction, phase-normalized and scaled to unit mean of `c`.
    pub fn dominant(vp: &ValidatedParams, nx: usize) -> Result<CellProfile> {
        let lambda = dominant_eigenvalue(vp, 1e-12)?;
        let e = eigenfunction(C64::from(lambda), vp.params())?.phase_normalized();
        let prof = CellProfile::sample(&e, nx);
        let mean: f64 = prof.c.iter().flatten().sum::<f64>() / (4 * nx) as f64;
        if mean == 0.0 {
            return Err(Error::ZeroProfile);
        }
        Ok(CellProfile {
            c: prof.c.map(|z| z.into_iter().map(|x| x / mean).collect()),
            q: prof.q.map(|z| z.into_iter().map(|x| x / mean).collect()),
        })
    }
}

/// Initial data for [`init`].
pub enum Initial<'a> {
    /// `(c, q) = (1, P)` everywhere.
    Equilibrium,
    Zero,
    /// Dominant eigenfunction scaled to unit mean of `c`.
    Dominant,
    /// Sampled at cell centres (real part).
    Profile(&'a dyn ZoneProfile),
    /// Explicit cell arrays.
    Cells(CellProfile),
}

pub fn init(config: &SimConfig, vp: &ValidatedParams, initial: Initial) -> Result<SimState> {
    let params = vp.params();
    config.check(params)?;
    let nx = config.nx;
    let prof = match initial {
        Initial::Equilibrium => CellProfile {
            c: std::array::from_fn(|_| vec![1.0; nx]),
            q: std::array::from_fn(|_| vec![params.p; nx]),
        },
        Initial::Zero => CellProfile {
            c: std::array::from_fn(|_| vec![0.0; nx]),
            q: std::array::from_fn(|_| vec![0.0; nx]),
        },
        Initial::Dominant => CellProfile::dominant(vp, nx)?,
        Initial::Profile(p) => CellProfile::sample(p, nx),
        Initial::Cells(p) => p,
    };
    SimState::from_cells(prof.c, prof.q, config)
}

/// Upwind transport of `c` with speed `v_i` and of `q` with speed `-1`.
pub fn advection_step(state: &mut SimState, params: &ModelParams, f0: f64) {
    let v = params.v;
    let p = state.dt / state.dx;
    let nx = state.nx();
    let last = |z: usize| state.c[z][nx - 1];
    let inflow = [
        v[3] / v[0] * last(3),
        last(0),
        (v[1] * last(1) + f0) / v[2],
        last(2),
    ];
    let downstream = [state.q[1][0], state.q[2][0], state.q[3][0], state.q[0][0]];
    for z in 0..4 {
        let a = v[z] * p;
        let c = &mut state.c[z];
        for j in (1..nx).rev() {
            c[j] -= a * (c[j] - c[j - 1]);
        }
        c[0] -= a * (c[0] - inflow[z]);
        let q = &mut state.q[z];
        for j in 0..nx - 1 {
            q[j] += p * (q[j + 1] - q[j]);
        }
        q[nx - 1] += p * (downstream[z] - q[nx - 1]);
    }
}

/// Exact solution of `c' = -RP(Pc - q)`, `q' = R(Pc - q)` over `dt`.
pub fn mass_transfer_step(state: &mut SimState, params: &ModelParams, dt: f64) {
    let (r, pp) = (params.r, params.p);
    let e = (-r * (pp * pp + 1.0) * dt).exp();
    let d = 1.0 + pp * pp;
    for z in 0..4 {
        for (c, q) in state.c[z].iter_mut().zip(state.q[z].iter_mut()) {
            let (c0, q0) = (*c, *q);
            *c = (c0 * (1.0 + pp * pp * e) + pp * q0 * (1.0 - e)) / d;
            *q = (pp * c0 * (1.0 - e) + q0 * (pp * pp + e)) / d;
        }
    }
}

/// One full time step.
pub fn step(state: &mut SimState, params: &ModelParams, config: &SimConfig) {
    if config.strang {
        mass_transfer_step(state, params, 0.5 * state.dt);
        advection_step(state, params, config.f0);
        mass_transfer_step(state, params, 0.5 * state.dt);
    } else {
        advection_step(state, params, config.f0);
        mass_transfer_step(state, params, state.dt);
    }
    state.step += 1;
    state.t = state.step as f64 * state.dt;
}

/// `E = ½ Σ (c² + q²) dx`.
pub fn energy(state: &SimState) -> f64 {
    let s: f64 = (0..4)
        .map(|z| {
            state.c[z].iter().map(|x| x * x).sum::<f64>() + state.q[z].iter().map(|x| x * x).sum::<f64>()
        })
        .sum();
    0.5 * s * state.dx
}

/// `Q = Σ (c + P q) dx`.
pub fn mass(state: &SimState, params: &ModelParams) -> f64 {
    let s: f64 = (0..4)
        .map(|z| state.c[z].iter().sum::<f64>() + params.p * state.q[z].iter().sum::<f64>())
        .sum();
    s * state.dx
}

pub fn sup_norm(state: &SimState) -> f64 {
    state
        .c
        .iter()
        .chain(state.q.iter())
        .flat_map(|z| z.iter())
        .fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative RMS distance between the state and its least-squares multiple
/// `s · profile`.
pub fn profile_rms(state: &SimState, profile: &CellProfile) -> Result<f64> {
    let mut uw = 0.0;
    let mut ww = 0.0;
    let mut uu = 0.0;
    for z in 0..4 {
        if profile.c[z].len() != state.nx() || profile.q[z].len() != state.nx() {
            return Err(Error::InvalidArgument("profile grid does not match the state".into()));
        }
        for (u, w) in state.c[z].iter().zip(&profile.c[z]).chain(state.q[z].iter().zip(&profile.q[z])) {
            uw += u * w;
            ww += w * w;
            uu += u * u;
        }
    }
    if ww == 0.0 || uw == 0.0 {
        return Err(Error::ZeroProfile);
    }
    let s = uw / ww;
    // ‖u - s w‖² = ‖u‖² - s ⟨u, w⟩
    let resid = (uu - s * uw).max(0.0);
    Ok(resid.sqrt() / (s.abs() * ww.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub sup_norm: f64,
    pub profile_rms: Option<f64>,
}

pub fn diagnostics(state: &SimState, params: &ModelParams, profile: Option<&CellProfile>) -> DiagnosticsRow {
    DiagnosticsRow {
        t: state.t,
        energy: energy(state),
        mass: mass(state, params),
        sup_norm: sup_norm(state),
        profile_rms: profile.and_then(|p| profile_rms(state, p).ok()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub state: SimState,
    pub rows: Vec<DiagnosticsRow>,
}

/// Steps until `t ≥ t_final`, recording the initial row, every
/// `record_every` steps, and the final row. `on_step` sees every step.
pub fn run(
    mut state: SimState,
    config: &SimConfig,
    params: &ModelParams,
    profile: Option<&CellProfile>,
    mut on_step: impl FnMut(&SimState),
) -> Result<SimRun> {
    config.check(params)?;
    let n = (config.t_final / state.dt - 1e-9).ceil().max(0.0) as usize;
    let mut rows = vec![diagnostics(&state, params, profile)];
    for k in 1..=n {
        step(&mut state, params, config);
        if !state.all_finite() {
            return Err(Error::NonFiniteDetected(k));
        }
        on_step(&state);
        if k % config.record_every == 0 || k == n {
            rows.push(diagnostics(&state, params, profile));
        }
    }
    Ok(SimRun { state, rows })
}

/// Least-squares slope of `ln(sup_norm)` against `t` over `[t_lo, t_hi]`.
pub fn decay_rate(rows: &[DiagnosticsRow], t_lo: f64, t_hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= t_lo && r.t <= t_hi)
        .map(|r| (r.t, r.sup_norm))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientSamples {
            needed: 10,
            found: pts.len(),
        });
    }
    if pts.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(Error::InvalidArgument("sup_norm must be positive in the window".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, s) in &pts {
        sxy += (t - mt) * (s.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    Ok(sxy / sxx)
}

/// Predicted late-time amplitude `M₁` of the dominant mode in `initial`.
pub fn dominant_weight(vp: &ValidatedParams, initial: &dyn ZoneProfile) -> Result<(f64, C64)> {
    let lambda = dominant_eigenvalue(vp, 1e-12)?;
    let l = C64::from(lambda);
    let d = eigenfunction(l, vp.params())?;
    let a = adjoint_eigenfunction(l, vp.params())?;
    Ok((lambda, projection_coefficient(&d, &a, initial)?))
}

/// The constant initial condition `(1, P)` as a profile.
pub fn equilibrium_profile(params: &ModelParams) -> impl ZoneProfile {
    let p = params.p;
    FnProfile(move |_z: usize, _x: f64| (C64::from(1.0), C64::from(p)))
}
