//! Model parameters and their validation.
//!
//! A parameter set is accepted in exactly two regimes: all four port
//! inequalities strict (`v1 > v2`, `v3 > v4`, `v3 > v2`, `v1 > v4`), or all
//! velocities equal. Mixed cases are rejected.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::{Error, Result};

/// Dimensionless parameters of one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Zone liquid velocities relative to the solid velocity.
    pub v: [f64; 4],
    /// Kinetic group `k L / u_s`.
    #[serde(rename = "R")]
    pub r: f64,
    /// `sqrt(F H)`.
    #[serde(rename = "P")]
    pub p: f64,
    /// Dimensionless feed entering at `x = 0`.
    #[serde(default)]
    pub f0: f64,
}

impl ModelParams {
    pub fn new(v: [f64; 4], r: f64, p: f64) -> Self {
        ModelParams { v, r, p, f0: 0.0 }
    }

    pub fn with_f0(mut self, f0: f64) -> Self {
        self.f0 = f0;
        self
    }

    /// Case study used throughout the tests.
    pub fn case_study() -> Self {
        ModelParams::new([1.53, 1.12, 1.43, 1.02], 18.0, 1.03)
    }

    pub fn v_min(&self) -> f64 {
        self.v.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn v_max(&self) -> f64 {
        self.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inv_v_sum(&self) -> f64 {
        self.v.iter().map(|v| 1.0 / v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    StrictPorts,
    LimitCase,
}

/// Parameters that passed [`validate`], tagged with their regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams {
    params: ModelParams,
    regime: Regime,
}

impl ValidatedParams {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn strict_ports(&self) -> bool {
        self.regime == Regime::StrictPorts
    }

    pub fn limit_case(&self) -> bool {
        self.regime == Regime::LimitCase
    }
}

impl Deref for ValidatedParams {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.params
    }
}

pub fn validate(params: ModelParams) -> Result<ValidatedParams> {
    let named = [
        ("v1", params.v[0]),
        ("v2", params.v[1]),
        ("v3", params.v[2]),
        ("v4", params.v[3]),
        ("R", params.r),
        ("P", params.p),
    ];
    for (name, value) in named {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveParameter { name, value });
        }
    }
    if !(params.f0 >= 0.0) || !params.f0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "f0 must be a finite nonnegative number, got {}",
            params.f0
        )));
    }
    let [v1, v2, v3, v4] = params.v;
    if v1 == v2 && v2 == v3 && v3 == v4 {
        return Ok(ValidatedParams {
            params,
            regime: Regime::LimitCase,
        });
    }
    let checks = [
        (v1 > v2, "v1>v2"),
        (v3 > v4, "v3>v4"),
        (v3 > v2, "v3>v2"),
        (v1 > v4, "v1>v4"),
    ];
    for (ok, name) in checks {
        if !ok {
            return Err(Error::PortOrderingViolated(name));
        }
    }
    Ok(ValidatedParams {
        params,
        regime: Regime::StrictPorts,
    })
}

/// Dimensional description of a TMB unit for one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Void fraction, `0 < epsilon < 1`.
    pub epsilon: f64,
    /// Linear isotherm slope.
    #[serde(rename = "H")]
    pub h: f64,
    /// Kinetic constant, 1/min.
    pub k: f64,
    /// Zone length, cm.
    #[serde(rename = "L_zone")]
    pub l_zone: f64,
    /// Column length, cm.
    #[serde(rename = "L_column", default)]
    pub l_column: f64,
    /// Solid velocity, cm/min.
    pub u_s: f64,
    /// Zone flow ratios.
    pub m: [f64; 4],
    #[serde(default = "one")]
    pub c_feed: f64,
    #[serde(rename = "Q_feed", default)]
    pub q_feed: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhysicalOptions {
    /// Round the phase ratio to one decimal before use.
    pub use_rounded_f: bool,
}

impl PhysicalParams {
    /// Phase ratio `(1 - epsilon) / epsilon`.
    pub fn phase_ratio(&self, opts: PhysicalOptions) -> f64 {
        let f = (1.0 - self.epsilon) / self.epsilon;
        if opts.use_rounded_f {
            (f * 10.0).round() / 10.0
        } else {
            f
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        let named = [
            ("H", self.h),
            ("k", self.k),
            ("L_zone", self.l_zone),
            ("u_s", self.u_s),
        ];
        for (name, value) in named {
            if !(value > 0.0) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Converts physical data to dimensionless parameters.
///
/// `c_feed` only fixes the concentration unit and does not enter `f0`.
pub fn from_physical(phys: &PhysicalParams, opts: PhysicalOptions) -> Result<ModelParams> {
    phys.check()?;
    let f = phys.phase_ratio(opts);
    let v = phys.m.map(|m| f * m);
    let r = phys.k * phys.l_zone / phys.u_s;
    let p = (f * phys.h).sqrt();
    let f0 = (phys.h / f).sqrt() * phys.q_feed / (phys.u_s * phys.l_zone * phys.l_zone);
    let out = ModelParams { v, r, p, f0 };
    for (i, vi) in v.iter().enumerate() {
        if !(*vi > 0.0) {
            let name = ["v1", "v2", "v3", "v4"][i];
            return Err(Error::NonPositiveParameter { name, value: *vi });
        }
    }
    Ok(out)
}

/// Time constant `L_ref / (u_s |lambda0|)` in minutes.
pub fn time_constant(lambda0: f64, u_s: f64, l_ref: f64) -> Result<f64> {
    if !(lambda0 < 0.0) {
        return Err(Error::NonNegativeEigenvalue(lambda0));
    }
    if !(u_s > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "u_s",
            value: u_s,
        });
    }
    if !(l_ref > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "L_ref",
            value: l_ref,
        });
    }
    Ok(l_ref / (u_s * lambda0.abs()))
}
