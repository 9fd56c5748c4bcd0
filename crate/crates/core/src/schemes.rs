//! Time-stepping integrators.
//!
//! All discrete integrals use left-point rectangles, which makes the
//! telescoped form of each recursion an exact identity (see
//! [`crate::reflection::residual_reflection`]).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::models::{ModelParams, ParamError, PathError, ReflectionPath, SamplePath};
use crate::noise::NoisePath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("noise has Hurst index {noise} but parameters specify {params}")]
    HurstMismatch { params: f64, noise: f64 },
    #[error("{0} requires standard Brownian noise")]
    BrownianNoiseRequired(&'static str),
    #[error("step dt = {dt} is not below 2/b = {limit} (sign-flipping recursion)")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("negative drift numerator c = {0}: the square-root SDE is not covered")]
    NegativeDriftNumerator(f64),
    #[error("noise paths do not share a grid")]
    GridMismatch,
    #[error("at least one noise path is required")]
    NoNoise,
    #[error("4a/sigma^2 = {0} is not a positive integer")]
    NonIntegerDimension(f64),
    #[error("unknown scheme '{0}'; valid schemes: cir-euler, sqrt-implicit, rou-projected, ou, ou-squared-sum")]
    UnknownScheme(String),
}

/// A single projection step: `magnitude` was added at `step` to keep the path at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampEvent {
    pub step: usize,
    pub magnitude: f64,
}

/// Path and reflection of the projected scheme. `reflection` is the running
/// sum of the clamp magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutput {
    pub path: SamplePath,
    pub clamp_events: Vec<ClampEvent>,
    pub reflection: ReflectionPath,
}

impl SchemeOutput {
    /// CSV with header `t,Y,L`.
    pub fn to_csv(&self) -> String {
        crate::io::grid_csv(
            "t,Y,L",
            self.path.grid(),
            &[self.path.values(), self.reflection.values()],
        )
    }
}

fn check_noise(params: &ModelParams, noise: &NoisePath) -> Result<(), SchemeError> {
    if noise.hurst() != params.hurst {
        return Err(SchemeError::HurstMismatch {
            params: params.hurst,
            noise: noise.hurst(),
        });
    }
    Ok(())
}

fn check_stable(params: &ModelParams, dt: f64) -> Result<(), SchemeError> {
    if params.b > 0.0 && dt * params.b >= 2.0 {
        return Err(SchemeError::UnstableStep {
            dt,
            limit: 2.0 / params.b,
        });
    }
    Ok(())
}

/// Explicit Euler for `dX = (a - bX)dt + σ√X dW` with full truncation:
/// `x⁺` enters both coefficients, the stored iterate is not clipped.
pub fn euler_cir_full_truncation(params: &ModelParams, noise: &NoisePath) -> Result<SamplePath, SchemeError> {
    params.check_scheme_domain()?;
    if !noise.kind().is_brownian() {
        return Err(SchemeError::BrownianNoiseRequired("explicit CIR Euler"));
    }
    check_noise(params, noise)?;
    let dt = noise.grid().dt();
    let mut x = params.x0();
    let mut values = Vec::with_capacity(noise.increments().len() + 1);
    values.push(x);
    for dw in noise.increments() {
        let xp = x.max(0.0);
        x += (params.a - params.b * xp) * dt + params.sigma * xp.sqrt() * dw;
        values.push(x);
    }
    Ok(SamplePath::new(*noise.grid(), values)?)
}

/// Drift numerator `c` of the square-root SDE `dY = ½(c/Y - bY)dt + (σ/2)dB`.
///
/// Brownian noise carries the Itô correction, `c = a - σ²/4 + ε`; for
/// `H > 1/2` the pathwise calculus has none, so `c = a + ε`.
pub fn drift_numerator(params: &ModelParams) -> f64 {
    if params.hurst == 0.5 {
        params.derived().p + params.epsilon
    } else {
        params.a + params.epsilon
    }
}

/// Coefficients of one backward-Euler step of the square-root SDE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtStep {
    pub b: f64,
    pub sigma: f64,
    /// Drift numerator, `>= 0`.
    pub c: f64,
}

impl SqrtStep {
    pub fn from_params(params: &ModelParams) -> Self {
        Self {
            b: params.b,
            sigma: params.sigma,
            c: drift_numerator(params),
        }
    }
}

/// Nonnegative root of `(1 + b·dt/2) y² - β y - c·dt/2 = 0` with
/// `β = y_prev + (σ/2)·d_noise`.
///
/// The root is evaluated in the cancellation-free form for `β < 0`, so tiny
/// positive values survive large negative shocks. With `c = 0` the result is
/// `max(0, β) / (1 + b·dt/2)` exactly.
pub fn implicit_sqrt_step(y_prev: f64, dt: f64, d_noise: f64, step: &SqrtStep) -> f64 {
    let beta = y_prev + 0.5 * step.sigma * d_noise;
    let lead = 1.0 + 0.5 * step.b * dt;
    if step.c == 0.0 {
        return beta.max(0.0) / lead;
    }
    let half_cdt = 0.5 * step.c * dt;
    let disc = (beta * beta + 4.0 * lead * half_cdt).sqrt();
    if beta >= 0.0 {
        (beta + disc) / (2.0 * lead)
    } else {
        2.0 * half_cdt / (disc - beta)
    }
}

/// Backward Euler for the square root of the (fractional) CIR process.
///
/// The drift numerator comes from [`drift_numerator`]; values stay strictly
/// positive whenever it is positive.
pub fn simulate_sqrt_process(params: &ModelParams, noise: &NoisePath) -> Result<SamplePath, SchemeError> {
    params.check_scheme_domain()?;
    check_noise(params, noise)?;
    let step = SqrtStep::from_params(params);
    if step.c < 0.0 {
        return Err(SchemeError::NegativeDriftNumerator(step.c));
    }
    Ok(SamplePath::new(*noise.grid(), sqrt_recursion(params.y0, noise, &step))?)
}

pub(crate) fn sqrt_recursion(y0: f64, noise: &NoisePath, step: &SqrtStep) -> Vec<f64> {
    let dt = noise.grid().dt();
    let mut y = y0;
    let mut values = Vec::with_capacity(noise.increments().len() + 1);
    values.push(y);
    for dn in noise.increments() {
        y = implicit_sqrt_step(y, dt, *dn, step);
        values.push(y);
    }
    values
}

/// Projected Euler for the reflected (fractional) OU process:
/// `Y_{k+1} = max(0, Y_k - (b/2)Y_k·dt + (σ/2)ΔB_k)`. `ε` and `a` are ignored.
pub fn simulate_rou_projected(params: &ModelParams, noise: &NoisePath) -> Result<SchemeOutput, SchemeError> {
    params.check_scheme_domain()?;
    check_noise(params, noise)?;
    let grid = *noise.grid();
    let dt = grid.dt();
    check_stable(params, dt)?;
    let decay = 0.5 * params.b * dt;
    let half_sigma = 0.5 * params.sigma;

    let mut y = params.y0;
    let mut values = Vec::with_capacity(grid.n_steps() + 1);
    let mut clamps = Vec::with_capacity(grid.n_steps());
    let mut clamp_events = Vec::new();
    values.push(y);
    for (k, dn) in noise.increments().iter().enumerate() {
        let pre = y - decay * y + half_sigma * dn;
        let clamp = if pre < 0.0 { -pre } else { 0.0 };
        if clamp > 0.0 {
            clamp_events.push(ClampEvent { step: k, magnitude: clamp });
        }
        clamps.push(clamp);
        y = pre.max(0.0);
        values.push(y);
    }
    Ok(SchemeOutput {
        path: SamplePath::new(grid, values)?,
        clamp_events,
        reflection: ReflectionPath::from_nonnegative_terms(grid, clamps),
    })
}

/// Explicit Euler for `U(t) = y0 - (b/2)∫U ds + (σ/2)B(t)`; no sign constraint.
pub fn simulate_ou(params: &ModelParams, noise: &NoisePath) -> Result<SamplePath, SchemeError> {
    params.check_scheme_domain()?;
    check_noise(params, noise)?;
    let dt = noise.grid().dt();
    check_stable(params, dt)?;
    let decay = 0.5 * params.b * dt;
    let half_sigma = 0.5 * params.sigma;
    let mut u = params.y0;
    let mut values = Vec::with_capacity(noise.increments().len() + 1);
    values.push(u);
    for dn in noise.increments() {
        u = u - decay * u + half_sigma * dn;
        values.push(u);
    }
    Ok(SamplePath::new(*noise.grid(), values)?)
}

/// `Σ_i U_i²` over one OU path per noise, each started at `y0`. With
/// `d = noises.len()` this is a CIR process with `a = dσ²/4` and
/// `x0 = d·y0²`.
pub fn ou_squared_sum(params: &ModelParams, noises: &[NoisePath]) -> Result<SamplePath, SchemeError> {
    let first = noises.first().ok_or(SchemeError::NoNoise)?;
    if noises.iter().any(|n| n.grid() != first.grid()) {
        return Err(SchemeError::GridMismatch);
    }
    if noises.iter().any(|n| !n.kind().is_brownian()) {
        return Err(SchemeError::BrownianNoiseRequired("the squared OU sum"));
    }
    let mut sum = vec![0.0; first.grid().n_steps() + 1];
    for noise in noises {
        let u = simulate_ou(params, noise)?;
        for (s, v) in sum.iter_mut().zip(u.values()) {
            *s += v * v;
        }
    }
    Ok(SamplePath::new(*first.grid(), sum)?)
}

/// `d = 4a/σ²` as a count, for the squared-OU representation.
pub fn degrees_of_freedom(params: &ModelParams) -> Result<usize, SchemeError> {
    let d = params.derived().d;
    if d.is_finite() && d >= 1.0 && d.fract() == 0.0 {
        Ok(d as usize)
    } else {
        Err(SchemeError::NonIntegerDimension(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    CirEuler,
    SqrtImplicit,
    RouProjected,
    Ou,
    OuSquaredSum,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::CirEuler,
        SchemeKind::SqrtImplicit,
        SchemeKind::RouProjected,
        SchemeKind::Ou,
        SchemeKind::OuSquaredSum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::CirEuler => "cir-euler",
            SchemeKind::SqrtImplicit => "sqrt-implicit",
            SchemeKind::RouProjected => "rou-projected",
            SchemeKind::Ou => "ou",
            SchemeKind::OuSquaredSum => "ou-squared-sum",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SchemeError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeRun {
    Path(SamplePath),
    Reflected(SchemeOutput),
}

impl SchemeRun {
    pub fn path(&self) -> &SamplePath {
        match self {
            SchemeRun::Path(p) => p,
            SchemeRun::Reflected(o) => &o.path,
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            SchemeRun::Path(p) => p.to_csv(),
            SchemeRun::Reflected(o) => o.to_csv(),
        }
    }
}

/// Runs `kind` on `noises`. Single-noise schemes use the first path only.
pub fn run_scheme(kind: SchemeKind, params: &ModelParams, noises: &[NoisePath]) -> Result<SchemeRun, SchemeError> {
    let first = noises.first().ok_or(SchemeError::NoNoise)?;
    Ok(match kind {
        SchemeKind::CirEuler => SchemeRun::Path(euler_cir_full_truncation(params, first)?),
        SchemeKind::SqrtImplicit => SchemeRun::Path(simulate_sqrt_process(params, first)?),
        SchemeKind::RouProjected => SchemeRun::Reflected(simulate_rou_projected(params, first)?),
        SchemeKind::Ou => SchemeRun::Path(simulate_ou(params, first)?),
        SchemeKind::OuSquaredSum => SchemeRun::Path(ou_squared_sum(params, noises)?),
    })
}
