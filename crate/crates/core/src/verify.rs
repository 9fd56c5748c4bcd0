//! Acceptance checks, grouped into suites.
//!
//! Every check is deterministic: seeds are fixed and noise is shared across
//! the settings compared within a check.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::convergence::{epsilon_ladder, rung_params, square_consistency, LadderRun, ORDER_SLACK};
use crate::models::{sup_distance, ModelParams};
use crate::noise::{
    default_covariance_pairs, generate_bm_increments, generate_fbm_increments, validate_noise_covariance,
    FbmMethod, NoisePath, RngSeed, TimeGrid,
};
use crate::oracles::{cir_mean, mean_and_std_error, skorokhod_map};
use crate::reflection::{
    check_growth_localization, default_bandwidth, hitting_time, inverse_integral_diagnostic,
    occupation_local_time, residual_reflection, tanaka_noise,
};
use crate::schemes::{
    euler_cir_full_truncation, ou_squared_sum, simulate_ou, simulate_rou_projected, simulate_sqrt_process,
};

/// Ladder used by the figure-2 experiment and its checks.
pub const FIGURE2_LADDER: [f64; 5] = [1.0, 0.5, 0.25, 0.1, 1e-4];

/// `y0 = 0.25, a = 0.25, b = 1, σ = 1, ε = 0`.
pub fn figure_params(hurst: f64) -> ModelParams {
    ModelParams {
        hurst,
        ..ModelParams::default()
    }
}

/// Brownian or fractional noise, Davies–Harte for `H > 1/2`.
pub fn noise_for(grid: TimeGrid, hurst: f64, seed: RngSeed) -> NoisePath {
    if hurst == 0.5 {
        generate_bm_increments(grid, seed)
    } else {
        generate_fbm_increments(grid, hurst, seed, FbmMethod::DaviesHarte).expect("valid Hurst index")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `measured <= threshold`
    AtMost,
    /// `measured < threshold`
    Below,
    /// `measured >= threshold`
    AtLeast,
    /// `measured > threshold`
    Above,
}

impl Relation {
    fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => measured <= threshold,
            Relation::Below => measured < threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Above => measured > threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::Below => "<",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: &'static str,
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
    pub details: Vec<String>,
}

impl Check {
    fn new(id: &'static str, name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        Self {
            id,
            name: name.into(),
            measured,
            relation,
            threshold,
            passed: relation.holds(measured, threshold),
            details: Vec::new(),
        }
    }

    fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }

    /// Combines sub-checks that must all pass; reports the first failing
    /// (or else the last) measurement.
    fn all(id: &'static str, name: &str, parts: Vec<Check>) -> Self {
        let passed = parts.iter().all(|c| c.passed);
        let head = parts.iter().find(|c| !c.passed).unwrap_or(parts.last().expect("nonempty"));
        let mut details = Vec::new();
        for p in &parts {
            details.push(format!(
                "{}: {} {} {} [{}]",
                p.name,
                p.measured,
                p.relation.symbol(),
                p.threshold,
                if p.passed { "ok" } else { "FAIL" }
            ));
            details.extend(p.details.iter().map(|d| format!("  {d}")));
        }
        Self {
            id,
            name: name.to_string(),
            measured: head.measured,
            relation: head.relation,
            threshold: head.threshold,
            passed,
            details,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {}: measured {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.relation.symbol(),
            self.threshold
        )?;
        for d in &self.details {
            write!(f, "\n      {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Noise,
    Schemes,
    Reflection,
    Convergence,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["noise", "schemes", "reflection", "convergence", "all"];
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noise" => Ok(Suite::Noise),
            "schemes" => Ok(Suite::Schemes),
            "reflection" => Ok(Suite::Reflection),
            "convergence" => Ok(Suite::Convergence),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected one of: {})",
                Suite::NAMES.join(", ")
            )),
        }
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Noise => vec![fbm_covariance_check()],
        Suite::Schemes => vec![positivity_check(), exact_identities_check(), mean_ode_check()],
        Suite::Reflection => vec![
            local_time_check(),
            growth_localization_check(),
            integrability_check(),
        ],
        Suite::Convergence => vec![
            ladder_ordering_check(),
            uniform_convergence_y_check(),
            uniform_convergence_l_check(),
            square_consistency_check(),
        ],
        Suite::All => {
            let mut checks: Vec<Check> = [Suite::Noise, Suite::Schemes, Suite::Reflection, Suite::Convergence]
                .into_iter()
                .flat_map(run_suite)
                .collect();
            checks.sort_by_key(|c| c.id[2..].parse::<u32>().unwrap_or(u32::MAX));
            checks
        }
    }
}

/// Sample covariance of 10⁴ noise paths per Hurst index at five time pairs,
/// as z-scores against the exact covariance.
pub fn fbm_covariance_check() -> Check {
    let grid = TimeGrid::new(1.0, 512).expect("valid grid");
    let pairs = default_covariance_pairs(&grid);
    let parts = [0.5, 0.6, 0.7, 0.8, 0.9]
        .into_iter()
        .enumerate()
        .map(|(i, hurst)| {
            let paths: Vec<NoisePath> = (0..10_000u64)
                .into_par_iter()
                .map(|s| noise_for(grid, hurst, RngSeed::new(1000 + i as u64, s)))
                .collect();
            let report = validate_noise_covariance(&paths, hurst, &pairs).expect("enough paths on one grid");
            let table = report
                .entries
                .iter()
                .map(|e| {
                    format!(
                        "s={:<5} t={:<5} sample={:.5} exact={:.5} se={:.5} z={:+.3}",
                        e.s, e.t, e.sample, e.theoretical, e.std_error, e.z
                    )
                })
                .collect();
            Check::new("AC1", format!("H={hurst}"), report.max_abs_z(), Relation::Below, 4.0).with_details(table)
        })
        .collect();
    Check::all("AC1", "noise covariance max |z|", parts)
}

/// Minimum grid value of the implicit scheme over 100 seeds per
/// `(ε, H)` with `ε ∈ {1e-4, 1e-2}`, `H ∈ {0.5, 0.7}`.
pub fn positivity_check() -> Check {
    let grid = TimeGrid::with_target_step(5.0, 1e-3).expect("valid grid");
    let mut parts = Vec::new();
    for hurst in [0.5, 0.7] {
        let mins: Vec<(f64, f64)> = (0..100u64)
            .into_par_iter()
            .map(|s| {
                let noise = noise_for(grid, hurst, RngSeed::new(2000 + s, 0));
                let min_for = |eps: f64| {
                    simulate_sqrt_process(&rung_params(&figure_params(hurst), eps), &noise)
                        .expect("valid parameters")
                        .min()
                };
                (min_for(1e-4), min_for(1e-2))
            })
            .collect();
        let min_a = mins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
        let min_b = mins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        parts.push(Check::new("AC2", format!("H={hurst} eps=1e-4 min Y"), min_a, Relation::Above, 0.0));
        parts.push(Check::new("AC2", format!("H={hurst} eps=1e-2 min Y"), min_b, Relation::Above, 0.0));
    }
    Check::all("AC2", "positivity of the implicit scheme", parts)
}

fn figure2_ladders(hurst: f64) -> Vec<LadderRun> {
    let grid = TimeGrid::with_target_step(5.0, 1e-3).expect("valid grid");
    (0..20u64)
        .into_par_iter()
        .map(|s| {
            let noise = noise_for(grid, hurst, RngSeed::new(3000 + s, 0));
            epsilon_ladder(&figure_params(hurst), &FIGURE2_LADDER, &noise).expect("valid ladder")
        })
        .collect()
}

/// Largest `Y_{ε_{n+1}} - Y_{ε_n}` over 20 seeds for `H ∈ {0.5, 0.6}`.
pub fn ladder_ordering_check() -> Check {
    let parts = [0.5, 0.6]
        .into_iter()
        .map(|hurst| {
            let worst = figure2_ladders(hurst)
                .iter()
                .map(|r| r.report.max_order_violation)
                .fold(f64::NEG_INFINITY, f64::max);
            Check::new("AC3", format!("H={hurst} max order violation"), worst, Relation::AtMost, ORDER_SLACK)
        })
        .collect();
    Check::all("AC3", "ladder ordering", parts)
}

fn gap_ratio_check(id: &'static str, name: &'static str, gaps: impl Fn(&LadderRun) -> &[f64]) -> Check {
    let runs = figure2_ladders(0.6);
    let ratios: Vec<f64> = runs
        .iter()
        .map(|r| {
            let g = gaps(r);
            g[g.len() - 1] / g[0]
        })
        .collect();
    let worst = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let details = runs
        .iter()
        .zip(&ratios)
        .map(|(r, q)| {
            let g = gaps(r);
            format!(
                "seed {}: gap(eps=1) = {:.4e}, gap(eps=1e-4) = {:.4e}, ratio = {:.4e}",
                r.report.seed.map_or(0, |s| s.master),
                g[0],
                g[g.len() - 1],
                q
            )
        })
        .collect();
    Check::new(id, name, worst, Relation::AtMost, 0.1).with_details(details)
}

/// `max_seed sup|Y_{1e-4} - Y_ref| / sup|Y_1 - Y_ref|` at `H = 0.6`.
pub fn uniform_convergence_y_check() -> Check {
    gap_ratio_check("AC4", "uniform convergence of Y (worst gap ratio)", |r| &r.report.sup_gap_y)
}

/// Same ratio for the reflection estimates.
pub fn uniform_convergence_l_check() -> Check {
    gap_ratio_check("AC5", "uniform convergence of L (worst gap ratio)", |r| &r.report.sup_gap_l)
}

/// Three exact discrete identities over 50 randomized seeds each.
pub fn exact_identities_check() -> Check {
    let grid = TimeGrid::new(1.0, 1000).expect("valid grid");
    let random_params = |seed: u64| {
        let mut rng = RngSeed::new(6000 + seed, 99).rng();
        ModelParams {
            y0: rng.random_range(0.01..1.0),
            a: 0.0,
            b: rng.random_range(0.0..3.0),
            sigma: rng.random_range(0.1..2.0),
            epsilon: 0.0,
            hurst: 0.5,
        }
    };
    let results: Vec<(f64, f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let params = random_params(s);
            let noise = generate_bm_increments(grid, RngSeed::new(6000 + s, 0));

            let out = simulate_rou_projected(&params, &noise).expect("valid parameters");
            let residual = residual_reflection(&out.path, &noise, &params).expect("shared grid");
            let residual_gap = sup_distance(&residual.values, out.reflection.values());

            let free = ModelParams { b: 0.0, ..params };
            let out = simulate_rou_projected(&free, &noise).expect("valid parameters");
            let oracle = skorokhod_map(free.y0, 0.5 * free.sigma, &noise.cumulative());
            let skorokhod_gap = sup_distance(out.path.values(), &oracle);

            let critical = ModelParams {
                a: 0.25 * params.sigma * params.sigma,
                ..params
            };
            let implicit = simulate_sqrt_process(&critical, &noise).expect("valid parameters");
            let lead = 1.0 + 0.5 * params.b * grid.dt();
            let mut y = params.y0;
            let mut step_gap = 0.0_f64;
            for (k, dn) in noise.increments().iter().enumerate() {
                y = (y + 0.5 * params.sigma * dn).max(0.0) / lead;
                step_gap = step_gap.max((implicit.values()[k + 1] - y).abs());
            }
            (residual_gap, skorokhod_gap, step_gap)
        })
        .collect();
    let worst = |f: fn(&(f64, f64, f64)) -> f64| results.iter().map(f).fold(0.0, f64::max);
    Check::all(
        "AC6",
        "exact algebraic identities",
        vec![
            Check::new("AC6", "residual vs clamp sum", worst(|r| r.0), Relation::AtMost, ORDER_SLACK),
            Check::new("AC6", "b=0 projection vs Skorokhod map", worst(|r| r.1), Relation::AtMost, ORDER_SLACK),
            Check::new("AC6", "eps=0 implicit step vs max(0,beta)/A", worst(|r| r.2), Relation::AtMost, 0.0),
        ],
    )
}

/// Largest ratio of consecutive square-consistency gaps across
/// `dt ∈ {1e-2, 1e-3, 1e-4}`.
pub fn square_consistency_check() -> Check {
    let params = ModelParams {
        y0: 1.0,
        a: 0.5,
        b: 1.0,
        sigma: 1.0,
        epsilon: 0.0,
        hurst: 0.5,
    };
    let noise = generate_bm_increments(TimeGrid::new(1.0, 10_000).expect("valid grid"), RngSeed::new(7, 0));
    let report = square_consistency(&params, &noise, &[1e-2, 1e-3, 1e-4]).expect("supercritical parameters");
    let worst = report
        .levels
        .windows(2)
        .map(|w| w[1].sup_gap / w[0].sup_gap)
        .fold(f64::NEG_INFINITY, f64::max);
    let details = report
        .levels
        .iter()
        .map(|l| format!("dt = {:e}: sup|y^2 - x| = {:.6e}", l.dt, l.sup_gap))
        .collect();
    Check::new("AC7", "square consistency (worst gap ratio)", worst, Relation::Below, 1.0).with_details(details)
}

/// Terminal occupation estimate and Tanaka residual of `|U|` for one noise.
fn local_time_pair(noise: &NoisePath) -> (f64, f64) {
    let params = ModelParams {
        y0: 0.25,
        a: 0.0,
        b: 1.0,
        sigma: 1.0,
        epsilon: 0.0,
        hurst: 0.5,
    };
    let u = simulate_ou(&params, noise).expect("valid parameters");
    let occupation = occupation_local_time(&u, default_bandwidth(u.grid()), &params).expect("positive bandwidth");
    let tanaka = tanaka_noise(&u, noise).expect("Brownian noise on a shared grid");
    let abs_u = u.map(f64::abs).expect("finite path");
    let residual = residual_reflection(&abs_u, &tanaka, &params).expect("shared grid");
    (occupation.terminal(), residual.terminal())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Occupation-density local time of the OU process against the reflection
/// residual of `|U|` driven by the Tanaka noise. Gaps are averaged over
/// seeds; per-seed values are listed in the details.
pub fn local_time_check() -> Check {
    let coarse = TimeGrid::with_target_step(5.0, 1e-4).expect("valid grid");
    let pairs: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|s| local_time_pair(&generate_bm_increments(coarse, RngSeed::new(8000 + s, 0))))
        .collect();
    let gaps: Vec<f64> = pairs.iter().map(|(o, r)| relative_gap(*o, *r)).collect();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let details = pairs
        .iter()
        .zip(&gaps)
        .enumerate()
        .map(|(s, ((o, r), g))| format!("seed {s}: occupation {o:.5}, residual {r:.5}, relative gap {g:.4}"))
        .collect();
    let agreement =
        Check::new("AC8", "dt=1e-4 mean relative gap over seeds", mean_gap, Relation::AtMost, 0.15).with_details(details);

    let fine = TimeGrid::with_target_step(5.0, 1e-5).expect("valid grid");
    let refinements: Vec<(f64, f64)> = (0..3u64)
        .into_par_iter()
        .map(|s| {
            let noise = generate_bm_increments(fine, RngSeed::new(8000 + s, 1));
            let (o_c, r_c) = local_time_pair(&noise.coarsen(10).expect("divisible grid"));
            let (o_f, r_f) = local_time_pair(&noise);
            (relative_gap(o_c, r_c), relative_gap(o_f, r_f))
        })
        .collect();
    let mean_coarse = refinements.iter().map(|r| r.0).sum::<f64>() / refinements.len() as f64;
    let mean_fine = refinements.iter().map(|r| r.1).sum::<f64>() / refinements.len() as f64;
    let details = refinements
        .iter()
        .enumerate()
        .map(|(s, (c, f))| format!("seed {s}: gap at 1e-4 = {c:.4}, gap at 1e-5 = {f:.4}"))
        .collect();
    let shrink = Check::new("AC8", "mean gap at 1e-5 / mean gap at 1e-4", mean_fine / mean_coarse, Relation::Below, 1.0)
        .with_details(details);
    Check::all("AC8", "local time of OU at zero", vec![agreement, shrink])
}

/// Worst ratio of ε-integral increment to `(ε/0.1)·length` over intervals
/// where `Y_ε >= 0.05`, for every rung of every uniform-convergence run.
pub fn growth_localization_check() -> Check {
    let worst = figure2_ladders(0.6)
        .iter()
        .flat_map(|run| {
            run.rungs.iter().map(|r| {
                check_growth_localization(&r.path, &r.reflection, r.epsilon, 0.05)
                    .worst_ratio
            })
        })
        .fold(0.0, f64::max);
    Check::new("AC9", "growth localization (worst ratio)", worst, Relation::AtMost, 1.0 + ORDER_SLACK)
}

/// Sample means at `T = 1` of full-truncation CIR and of a 4-component
/// squared OU sum, as z-scores against the mean ODE.
pub fn mean_ode_check() -> Check {
    let grid = TimeGrid::new(1.0, 1000).expect("valid grid");
    let reps = 10_000u64;

    let cir = ModelParams {
        y0: 1.0,
        a: 0.5,
        b: 1.0,
        sigma: 1.0,
        epsilon: 0.0,
        hurst: 0.5,
    };
    let terminals: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|s| {
            let noise = generate_bm_increments(grid, RngSeed::new(10_000, s));
            euler_cir_full_truncation(&cir, &noise).expect("valid parameters").terminal()
        })
        .collect();
    let (mean, se) = mean_and_std_error(&terminals);
    let exact = cir_mean(cir.x0(), cir.a, cir.b, 1.0);
    let cir_check = Check::new("AC10", "CIR Euler |z|", (mean - exact).abs() / se, Relation::AtMost, 3.0)
        .with_details(vec![format!("mean {mean:.6}, exact {exact:.6}, se {se:.6}")]);

    let d = 4usize;
    let ou = ModelParams {
        y0: 0.5,
        a: d as f64 * 0.25,
        b: 1.0,
        sigma: 1.0,
        epsilon: 0.0,
        hurst: 0.5,
    };
    let terminals: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|s| {
            let noises: Vec<NoisePath> = (0..d as u64)
                .map(|i| generate_bm_increments(grid, RngSeed::new(10_001 + i, s)))
                .collect();
            ou_squared_sum(&ou, &noises).expect("Brownian noises on one grid").terminal()
        })
        .collect();
    let (mean, se) = mean_and_std_error(&terminals);
    let exact = cir_mean(d as f64 * ou.y0 * ou.y0, ou.a, ou.b, 1.0);
    let sum_check = Check::new("AC10", "squared OU sum d=4 |z|", (mean - exact).abs() / se, Relation::AtMost, 3.0)
        .with_details(vec![format!("mean {mean:.6}, exact {exact:.6}, se {se:.6}")]);

    Check::all("AC10", "mean ODE", vec![cir_check, sum_check])
}

/// Steps of the integrability study, coarsest first.
pub const INTEGRABILITY_STEPS: [f64; 4] = [1e-3, 5e-4, 2.5e-4, 1.25e-4];

/// Inverse-integral diagnostic across halvings of `dt`: Cauchy in the
/// supercritical regime, growing past a hitting time in the critical one.
pub fn integrability_check() -> Check {
    let levels = |noise: &NoisePath, params: &ModelParams, upto: Option<f64>| -> Vec<(f64, f64, usize)> {
        let finest = INTEGRABILITY_STEPS[INTEGRABILITY_STEPS.len() - 1];
        let mut upto = upto;
        INTEGRABILITY_STEPS
            .iter()
            .map(|dt| {
                let factor = (dt / finest).round() as usize;
                let coarse = noise.coarsen(factor).expect("nested grids");
                let path = simulate_sqrt_process(params, &coarse).expect("valid parameters");
                let t = *upto.get_or_insert_with(|| {
                    let tau = hitting_time(&path, 0.0).tau_time.unwrap_or(path.grid().horizon());
                    (tau + 0.5).min(path.grid().horizon())
                });
                let d = inverse_integral_diagnostic(&path, t);
                (d.value, d.upto, d.floored_points)
            })
            .collect()
    };

    let supercritical = ModelParams {
        y0: 1.0,
        a: 0.5,
        b: 1.0,
        sigma: 1.0,
        epsilon: 0.0,
        hurst: 0.5,
    };
    let noise = generate_bm_increments(TimeGrid::new(1.0, 8000).expect("valid grid"), RngSeed::new(11, 0));
    let values = levels(&noise, &supercritical, Some(1.0));
    let worst = values
        .windows(2)
        .map(|w| relative_gap(w[1].0, w[0].0))
        .fold(0.0, f64::max);
    let details = INTEGRABILITY_STEPS
        .iter()
        .zip(&values)
        .map(|(dt, v)| format!("dt = {dt:e}: integral to {} = {:.6}", v.1, v.0))
        .collect();
    let cauchy = Check::new("AC11", "supercritical successive relative change", worst, Relation::AtMost, 0.05)
        .with_details(details);

    let critical = figure_params(0.5);
    let coarsest = (INTEGRABILITY_STEPS[0] / INTEGRABILITY_STEPS[INTEGRABILITY_STEPS.len() - 1]).round() as usize;
    let noise = (1u64..)
        .map(|stream| generate_bm_increments(TimeGrid::new(5.0, 40_000).expect("valid grid"), RngSeed::new(11, stream)))
        .find(|noise| {
            let path = simulate_sqrt_process(&critical, &noise.coarsen(coarsest).expect("nested grids"))
                .expect("valid parameters");
            hitting_time(&path, 0.0).tau_time.is_some_and(|tau| tau + 0.5 <= 5.0)
        })
        .expect("a hitting path");
    let values = levels(&noise, &critical, None);
    let growth = values
        .windows(2)
        .map(|w| w[1].0 / w[0].0)
        .fold(f64::INFINITY, f64::min);
    let details = INTEGRABILITY_STEPS
        .iter()
        .zip(&values)
        .map(|(dt, v)| format!("dt = {dt:e}: integral to {} = {:.6e} ({} floored points)", v.1, v.0, v.2))
        .collect();
    let divergence = Check::new("AC11", "critical growth factor per halving (min)", growth, Relation::AtLeast, 1.5)
        .with_details(details);

    Check::all("AC11", "integrability diagnostics", vec![cauchy, divergence])
}
