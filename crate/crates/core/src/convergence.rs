//! Limit experiments under common random numbers: `ε`-ladders, square
//! consistency of the implicit scheme, and grid refinement.

use rayon::prelude::*;
use thiserror::Error;

use crate::models::{sup_distance, ModelParams, ParamError, Regime, ReflectionPath, SamplePath};
use crate::noise::{NoiseError, NoisePath, RngSeed, TimeGrid};
use crate::reflection::{epsilon_integral_reflection, ReflectionError};
use crate::schemes::{
    euler_cir_full_truncation, run_scheme, simulate_rou_projected, simulate_sqrt_process, SchemeError,
    SchemeKind, SchemeOutput, SchemeRun,
};

/// Slack for orderings that hold exactly in real arithmetic.
pub const ORDER_SLACK: f64 = 1e-12;
/// Slack for comparisons between two different discretizations.
pub const SANDWICH_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("epsilon ladder must be nonempty, positive and strictly decreasing")]
    BadLadder,
    #[error("noise Hurst index {noise} does not match parameters ({params})")]
    NoiseMismatch { params: f64, noise: f64 },
    #[error("{0:?} regime not supported here (needs a > sigma^2/4)")]
    RegimeRejected(Regime),
    #[error("standard Brownian noise required")]
    BrownianNoiseRequired,
    #[error("need at least 2 refinement levels, got {0}")]
    TooFewLevels(usize),
    #[error("step {dt} is not an integer multiple of the noise step {fine_dt}")]
    IncommensurateStep { dt: f64, fine_dt: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Reflection(#[from] ReflectionError),
}

/// Parameters of the rung `ε` of a ladder built on `base`: the critical CIR
/// (`a = σ²/4`) for Brownian noise, `a = 0` for fractional noise, so the
/// square-root drift numerator is exactly `ε`.
pub fn rung_params(base: &ModelParams, epsilon: f64) -> ModelParams {
    let a = if base.hurst == 0.5 {
        base.sigma * base.sigma / 4.0
    } else {
        0.0
    };
    ModelParams { a, epsilon, ..*base }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    /// `sup_k |Y_ε(t_k) - Y_ref(t_k)|` per rung.
    pub sup_gap_y: Vec<f64>,
    /// `sup_k |½∫ε/Y_ε - L_ref|` per rung.
    pub sup_gap_l: Vec<f64>,
    /// `Y_{ε_n} >= Y_{ε_{n+1}} - ORDER_SLACK` at every grid point.
    pub monotone_y: bool,
    /// Largest `Y_{ε_{n+1}} - Y_{ε_n}` (negative when strictly ordered).
    pub max_order_violation: f64,
    /// Largest `Y_ref - Y_ε` over rungs and grid points.
    pub max_reference_excess: f64,
    pub hurst: f64,
    pub seed: Option<RngSeed>,
    pub grid: TimeGrid,
}

impl ConvergenceReport {
    pub fn reference_sandwich_holds(&self) -> bool {
        self.max_reference_excess <= SANDWICH_SLACK
    }

    /// Line-oriented `key = value` form.
    pub fn manifest_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("hurst = {}", self.hurst),
            format!("horizon = {}", self.grid.horizon()),
            format!("n_steps = {}", self.grid.n_steps()),
            format!("dt = {}", self.grid.dt()),
        ];
        if let Some(seed) = self.seed {
            lines.push(format!("seed = {}", seed.master));
            lines.push(format!("stream = {}", seed.stream));
        }
        for (i, eps) in self.epsilons.iter().enumerate() {
            lines.push(format!("rung.{i}.epsilon = {eps}"));
            lines.push(format!("rung.{i}.sup_gap_y = {}", self.sup_gap_y[i]));
            lines.push(format!("rung.{i}.sup_gap_l = {}", self.sup_gap_l[i]));
        }
        lines.push(format!("monotone_y = {}", self.monotone_y));
        lines.push(format!("max_order_violation = {}", self.max_order_violation));
        lines.push(format!("max_reference_excess = {}", self.max_reference_excess));
        lines
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rung {
    pub epsilon: f64,
    pub path: SamplePath,
    pub reflection: ReflectionPath,
}

impl Rung {
    /// CSV with header `t,Y,L`.
    pub fn to_csv(&self) -> String {
        crate::io::grid_csv(
            "t,Y,L",
            self.path.grid(),
            &[self.path.values(), self.reflection.values()],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRun {
    pub report: ConvergenceReport,
    pub rungs: Vec<Rung>,
    /// Projected-Euler reflected path on the same noise.
    pub reference: SchemeOutput,
}

/// Runs every rung of `epsilons` on the shared `noise` and compares each
/// with the projected reflected scheme on that noise.
pub fn epsilon_ladder(
    base: &ModelParams,
    epsilons: &[f64],
    noise: &NoisePath,
) -> Result<LadderRun, ConvergenceError> {
    if epsilons.is_empty()
        || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite()))
        || epsilons.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(ConvergenceError::BadLadder);
    }
    base.validate()?;
    if noise.hurst() != base.hurst {
        return Err(ConvergenceError::NoiseMismatch {
            params: base.hurst,
            noise: noise.hurst(),
        });
    }
    let reference = simulate_rou_projected(base, noise)?;
    let rungs = epsilons
        .par_iter()
        .map(|&eps| {
            let path = simulate_sqrt_process(&rung_params(base, eps), noise)?;
            let reflection = epsilon_integral_reflection(&path, eps)?;
            Ok(Rung {
                epsilon: eps,
                path,
                reflection,
            })
        })
        .collect::<Result<Vec<_>, ConvergenceError>>()?;

    let y_ref = reference.path.values();
    let l_ref = reference.reflection.values();
    let sup_gap_y = rungs.iter().map(|r| sup_distance(r.path.values(), y_ref)).collect();
    let sup_gap_l = rungs
        .iter()
        .map(|r| sup_distance(r.reflection.values(), l_ref))
        .collect();
    let max_order_violation = rungs
        .windows(2)
        .flat_map(|w| {
            w[1].path
                .values()
                .iter()
                .zip(w[0].path.values())
                .map(|(lo, hi)| lo - hi)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let max_reference_excess = rungs
        .iter()
        .flat_map(|r| r.path.values().iter().zip(y_ref).map(|(y, yr)| yr - y))
        .fold(f64::NEG_INFINITY, f64::max);

    let report = ConvergenceReport {
        epsilons: epsilons.to_vec(),
        sup_gap_y,
        sup_gap_l,
        monotone_y: max_order_violation <= ORDER_SLACK,
        max_order_violation,
        max_reference_excess,
        hurst: base.hurst,
        seed: noise.seed(),
        grid: *noise.grid(),
    };
    Ok(LadderRun {
        report,
        rungs,
        reference,
    })
}

/// Coarsening factor turning `fine` into a grid of step `dt`.
fn factor_for(fine: &TimeGrid, dt: f64) -> Result<usize, ConvergenceError> {
    let ratio = dt / fine.dt();
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(ConvergenceError::IncommensurateStep { dt, fine_dt: fine.dt() });
    }
    Ok(factor as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyLevel {
    pub dt: f64,
    pub sup_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareConsistencyReport {
    pub levels: Vec<ConsistencyLevel>,
}

impl SquareConsistencyReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].sup_gap < w[0].sup_gap)
    }
}

/// For each step in `dts`, the sup-norm gap between the squared implicit
/// square-root path and the full-truncation CIR path, both driven by block
/// sums of `noise`. `ε` is ignored.
pub fn square_consistency(
    params: &ModelParams,
    noise: &NoisePath,
    dts: &[f64],
) -> Result<SquareConsistencyReport, ConvergenceError> {
    let params = ModelParams {
        epsilon: 0.0,
        ..*params
    };
    let regime = params.validate()?.regime();
    if regime != Regime::Supercritical {
        return Err(ConvergenceError::RegimeRejected(regime));
    }
    if !noise.kind().is_brownian() || params.hurst != 0.5 {
        return Err(ConvergenceError::BrownianNoiseRequired);
    }
    let levels = dts
        .iter()
        .map(|&dt| {
            let coarse = noise.coarsen(factor_for(noise.grid(), dt)?)?;
            let y = simulate_sqrt_process(&params, &coarse)?;
            let x = euler_cir_full_truncation(&params, &coarse)?;
            let squared: Vec<f64> = y.values().iter().map(|v| v * v).collect();
            Ok(ConsistencyLevel {
                dt: coarse.grid().dt(),
                sup_gap: sup_distance(&squared, x.values()),
            })
        })
        .collect::<Result<_, ConvergenceError>>()?;
    Ok(SquareConsistencyReport { levels })
}

/// A scheme and the finest-level noise it runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementSpec {
    pub scheme: SchemeKind,
    pub params: ModelParams,
    /// Finest-level noises; one per OU component for `ou-squared-sum`.
    pub noises: Vec<NoisePath>,
    /// Step ratio between consecutive levels.
    pub factor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementLevel {
    pub dt: f64,
    pub terminal: f64,
    pub run: SchemeRun,
    /// Noises the level was driven by.
    pub noises: Vec<NoisePath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    /// Coarsest first.
    pub levels: Vec<RefinementLevel>,
    /// `gaps[i]`: sup over level-`i` grid points between levels `i` and `i + 1`.
    pub gaps: Vec<f64>,
}

/// Runs `spec.scheme` on `levels` nested grids, the finest being the noise
/// grid and each coarser one merging `spec.factor` steps.
pub fn grid_refinement_study(spec: &RefinementSpec, levels: usize) -> Result<RefinementReport, ConvergenceError> {
    if levels < 2 {
        return Err(ConvergenceError::TooFewLevels(levels));
    }
    let fine = spec.noises.first().ok_or(SchemeError::NoNoise)?;
    let total = spec
        .factor
        .checked_pow((levels - 1) as u32)
        .filter(|t| *t > 1 && fine.grid().n_steps() % t == 0)
        .ok_or(NoiseError::BadRefinement {
            n_steps: fine.grid().n_steps(),
            factor: spec.factor.saturating_pow((levels - 1) as u32),
        })?;

    let mut out = Vec::with_capacity(levels);
    let mut coarsen_by = total;
    for _ in 0..levels {
        let noises = spec
            .noises
            .iter()
            .map(|n| n.coarsen(coarsen_by))
            .collect::<Result<Vec<_>, _>>()?;
        let run = run_scheme(spec.scheme, &spec.params, &noises)?;
        out.push(RefinementLevel {
            dt: noises[0].grid().dt(),
            terminal: run.path().terminal(),
            run,
            noises,
        });
        coarsen_by /= spec.factor;
    }
    let gaps = out
        .windows(2)
        .map(|w| {
            let finer = w[1]
                .run
                .path()
                .subsample(spec.factor)
                .expect("nested grids");
            sup_distance(w[0].run.path().values(), finer.values())
        })
        .collect();
    Ok(RefinementReport { levels: out, gaps })
}
