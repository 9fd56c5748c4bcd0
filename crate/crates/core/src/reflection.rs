//! Estimators of the reflection function and related diagnostics.
//!
//! Three estimators are available: the `ε`-integral `½∫ε/Y_ε ds` of a
//! square-root path, the residual of the reflected OU equation, and the
//! occupation-density local time of an OU path at zero.

use thiserror::Error;

use crate::models::{sup_distance, ModelParams, ReflectionPath, SamplePath};
use crate::noise::{NoiseKind, NoisePath, TimeGrid};

/// Zeros are replaced by this value in [`inverse_integral_diagnostic`].
pub const DEFAULT_FLOOR: f64 = 1e-30;

/// Decreases smaller than this are ignored by [`MonotonicityReport`].
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReflectionError {
    #[error("path value {value} at index {index} is not positive")]
    NonpositiveValue { index: usize, value: f64 },
    #[error("path and noise live on different grids")]
    GridMismatch,
    #[error("the Tanaka transform needs Brownian input noise")]
    BrownianNoiseRequired,
    #[error("bandwidth must be positive, got {0}")]
    NonpositiveBandwidth(f64),
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
}

/// `L_k = ½ Σ_{j<k} (ε / Y_j)·dt`.
pub fn epsilon_integral_reflection(path: &SamplePath, epsilon: f64) -> Result<ReflectionPath, ReflectionError> {
    if !(epsilon >= 0.0) {
        return Err(ReflectionError::NegativeEpsilon(epsilon));
    }
    if let Some((index, &value)) = path.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(ReflectionError::NonpositiveValue { index, value });
    }
    let half_eps_dt = 0.5 * epsilon * path.grid().dt();
    let values = path.values();
    Ok(ReflectionPath::from_nonnegative_terms(
        *path.grid(),
        values[..values.len() - 1].iter().map(|y| half_eps_dt / y),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    /// Largest drop `L_k - L_{k+1}` seen (0 if none).
    pub max_decrease: f64,
    /// Number of drops larger than `tolerance`.
    pub violations: usize,
    pub tolerance: f64,
}

impl MonotonicityReport {
    pub fn of(values: &[f64], tolerance: f64) -> Self {
        let drops = values.windows(2).map(|w| w[0] - w[1]);
        let (max_decrease, violations) = drops.fold((0.0_f64, 0), |(m, v), d| {
            (m.max(d), v + usize::from(d > tolerance))
        });
        Self {
            max_decrease,
            violations,
            tolerance,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.violations == 0
    }
}

/// Residual of the reflected OU equation. Not forced to be monotone; see
/// [`ResidualReflection::monotonicity`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReflection {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub monotonicity: MonotonicityReport,
}

impl ResidualReflection {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    pub fn to_csv(&self) -> String {
        crate::io::grid_csv("t,L", &self.grid, &[&self.values])
    }
}

/// `L_k = Y_k - Y_0 + (b/2) Σ_{j<k} Y_j·dt - (σ/2)·B_k`.
pub fn residual_reflection(
    path: &SamplePath,
    noise: &NoisePath,
    params: &ModelParams,
) -> Result<ResidualReflection, ReflectionError> {
    if path.grid() != noise.grid() {
        return Err(ReflectionError::GridMismatch);
    }
    let dt = path.grid().dt();
    let y = path.values();
    let y0 = y[0];
    let mut integral = 0.0;
    let mut driver = 0.0;
    let mut values = Vec::with_capacity(y.len());
    values.push(0.0);
    for (k, dn) in noise.increments().iter().enumerate() {
        integral += y[k] * dt;
        driver += dn;
        values.push(y[k + 1] - y0 + 0.5 * params.b * integral - 0.5 * params.sigma * driver);
    }
    let monotonicity = MonotonicityReport::of(&values, MONOTONE_SLACK);
    Ok(ResidualReflection {
        grid: *path.grid(),
        values,
        monotonicity,
    })
}

/// `ΔW_k = sgn(U_k)·ΔB_k` with `sgn(0) = 0`.
pub fn tanaka_noise(ou_path: &SamplePath, bm: &NoisePath) -> Result<NoisePath, ReflectionError> {
    if ou_path.grid() != bm.grid() {
        return Err(ReflectionError::GridMismatch);
    }
    if !bm.kind().is_brownian() {
        return Err(ReflectionError::BrownianNoiseRequired);
    }
    let increments = ou_path
        .values()
        .iter()
        .zip(bm.increments())
        .map(|(u, db)| sign(*u) * db)
        .collect();
    Ok(bm.derived(increments, NoiseKind::BrownianMotion))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Default occupation bandwidth `√dt`.
pub fn default_bandwidth(grid: &TimeGrid) -> f64 {
    grid.dt().sqrt()
}

/// Occupation-density local time at zero, normalized by the quadratic
/// variation rate `σ²/4` of the OU path:
/// `L̂_k = (σ²/4)·(1/(2δ))·Σ_{j<k} 1{|U_j| < δ}·dt`.
pub fn occupation_local_time(
    ou_path: &SamplePath,
    delta: f64,
    params: &ModelParams,
) -> Result<ReflectionPath, ReflectionError> {
    if !(delta > 0.0) {
        return Err(ReflectionError::NonpositiveBandwidth(delta));
    }
    let weight = 0.25 * params.sigma * params.sigma / (2.0 * delta) * ou_path.grid().dt();
    let values = ou_path.values();
    Ok(ReflectionPath::from_nonnegative_terms(
        *ou_path.grid(),
        values[..values.len() - 1]
            .iter()
            .map(|u| if u.abs() < delta { weight } else { 0.0 }),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingReport {
    pub tau_index: Option<usize>,
    pub tau_time: Option<f64>,
    pub threshold: f64,
}

impl HittingReport {
    pub fn manifest_lines(&self, prefix: &str) -> Vec<String> {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "none".into());
        vec![
            format!("{prefix}.threshold = {}", self.threshold),
            format!("{prefix}.tau_index = {}", opt(self.tau_index.map(|i| i.to_string()))),
            format!("{prefix}.tau_time = {}", opt(self.tau_time.map(|t| t.to_string()))),
        ]
    }
}

/// First grid index with value `<= threshold`.
pub fn hitting_time(path: &SamplePath, threshold: f64) -> HittingReport {
    let tau_index = path.values().iter().position(|&v| v <= threshold);
    HittingReport {
        tau_index,
        tau_time: tau_index.map(|k| path.grid().time(k)),
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseIntegral {
    pub value: f64,
    pub upto: f64,
    /// Grid values that were at or below the floor and replaced by it.
    pub floored_points: usize,
    pub floor: f64,
}

impl InverseIntegral {
    pub fn floored(&self) -> bool {
        self.floored_points > 0
    }
}

/// Left-point estimate of `∫_0^upto ds / Y(s)` with zeros floored at [`DEFAULT_FLOOR`].
pub fn inverse_integral_diagnostic(path: &SamplePath, upto: f64) -> InverseIntegral {
    inverse_integral_with_floor(path, upto, DEFAULT_FLOOR)
}

/// As [`inverse_integral_diagnostic`] with a caller-chosen floor. `upto` is
/// clamped to the grid horizon; the rectangles used are those starting
/// strictly before `upto`.
pub fn inverse_integral_with_floor(path: &SamplePath, upto: f64, floor: f64) -> InverseIntegral {
    let grid = path.grid();
    let upto = upto.clamp(0.0, grid.horizon());
    let dt = grid.dt();
    let count = ((upto / dt) - 1e-9).ceil().max(0.0) as usize;
    let count = count.min(grid.n_steps());
    let mut floored_points = 0;
    let value = path.values()[..count]
        .iter()
        .map(|&y| {
            if y <= floor {
                floored_points += 1;
                dt / floor
            } else {
                dt / y
            }
        })
        .sum();
    InverseIntegral {
        value,
        upto,
        floored_points,
        floor,
    }
}

/// Pointwise comparison of two estimates of the same reflection function.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorComparison {
    pub labels: (String, String),
    pub per_point: Vec<f64>,
    pub sup_gap: f64,
}

impl EstimatorComparison {
    pub fn new(label_a: &str, a: &[f64], label_b: &str, b: &[f64]) -> Self {
        let per_point: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
        Self {
            labels: (label_a.to_string(), label_b.to_string()),
            sup_gap: sup_distance(a, b),
            per_point,
        }
    }

    pub fn manifest_lines(&self, prefix: &str) -> Vec<String> {
        vec![
            format!("{prefix}.estimators = {} vs {}", self.labels.0, self.labels.1),
            format!("{prefix}.sup_gap = {}", self.sup_gap),
        ]
    }
}

/// Outcome of [`check_growth_localization`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthLocalization {
    pub intervals: usize,
    /// Largest `increment / bound` over the intervals (0 when none).
    pub worst_ratio: f64,
}

impl GrowthLocalization {
    pub fn holds(&self) -> bool {
        self.worst_ratio <= 1.0 + 1e-12
    }
}

/// On every maximal run of grid points where `Y >= level`, compares the
/// increment of the `ε`-integral with `ε/(2·level)` times the run length.
pub fn check_growth_localization(
    path: &SamplePath,
    reflection: &ReflectionPath,
    epsilon: f64,
    level: f64,
) -> GrowthLocalization {
    let y = path.values();
    let l = reflection.values();
    let grid = path.grid();
    let mut intervals = 0;
    let mut worst_ratio = 0.0_f64;
    let mut k = 0;
    while k < y.len() {
        if y[k] < level {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < y.len() && y[k + 1] >= level {
            k += 1;
        }
        let end = k;
        intervals += 1;
        if end > start {
            let bound = epsilon / (2.0 * level) * (grid.time(end) - grid.time(start));
            let increment = l[end] - l[start];
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(increment / bound);
            } else if increment > 0.0 {
                worst_ratio = f64::INFINITY;
            }
        }
        k += 1;
    }
    GrowthLocalization {
        intervals,
        worst_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{generate_bm_increments, RngSeed};
    use crate::schemes::{simulate_ou, simulate_rou_projected};

    fn grid(n: usize, dt: f64) -> TimeGrid {
        TimeGrid::from_step(dt, n).unwrap()
    }

    fn params(y0: f64, b: f64, sigma: f64) -> ModelParams {
        ModelParams {
            y0,
            a: sigma * sigma / 4.0,
            b,
            sigma,
            epsilon: 0.0,
            hurst: 0.5,
        }
    }

    #[test]
    fn epsilon_integral_constant_path() {
        let g = TimeGrid::new(2.0, 200).unwrap();
        let path = SamplePath::new(g, vec![0.5; 201]).unwrap();
        let l = epsilon_integral_reflection(&path, 0.1).unwrap();
        assert!((l.terminal() - 0.1 * 2.0 / (2.0 * 0.5)).abs() < 1e-13);
        let l0 = epsilon_integral_reflection(&path, 0.0).unwrap();
        assert!(l0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn epsilon_integral_by_hand() {
        let path = SamplePath::new(grid(2, 1.0), vec![1.0, 0.5, 7.0]).unwrap();
        let l = epsilon_integral_reflection(&path, 0.1).unwrap();
        let expected = [0.0, 0.05, 0.15];
        for (v, e) in l.values().iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
        let bad = SamplePath::new(grid(2, 1.0), vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(
            epsilon_integral_reflection(&bad, 0.1),
            Err(ReflectionError::NonpositiveValue { index: 1, value: 0.0 })
        );
    }

    #[test]
    fn residual_of_projected_pair_is_its_clamp_sum() {
        for seed in 0..20 {
            let noise = generate_bm_increments(grid(2000, 1e-3), RngSeed::new(seed, 0));
            let p = params(0.25, 1.0, 1.0);
            let out = simulate_rou_projected(&p, &noise).unwrap();
            let res = residual_reflection(&out.path, &noise, &p).unwrap();
            assert!(sup_distance(&res.values, out.reflection.values()) <= 1e-12);
            assert!(res.monotonicity.is_monotone());
        }
    }

    #[test]
    fn residual_of_constant_path_without_dynamics() {
        let g = grid(10, 0.1);
        let noise = generate_bm_increments(g, RngSeed::new(1, 0));
        let path = SamplePath::new(g, vec![0.7; 11]).unwrap();
        let res = residual_reflection(&path, &noise, &params(0.7, 0.0, 0.0)).unwrap();
        assert!(res.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_of_ou_path_vanishes() {
        let noise = generate_bm_increments(grid(1000, 1e-3), RngSeed::new(9, 0));
        let p = params(0.25, 1.0, 1.0);
        let u = simulate_ou(&p, &noise).unwrap();
        let res = residual_reflection(&u, &noise, &p).unwrap();
        assert!(res.values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn residual_flags_decreases() {
        let g = grid(3, 1.0);
        let noise = NoisePath::from_increments(g, vec![0.0; 3], NoiseKind::BrownianMotion).unwrap();
        let path = SamplePath::new(g, vec![1.0, 2.0, 1.0, 3.0]).unwrap();
        let res = residual_reflection(&path, &noise, &params(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(res.monotonicity.violations, 1);
        assert_eq!(res.monotonicity.max_decrease, 1.0);
        let other = NoisePath::from_increments(grid(2, 1.0), vec![0.0; 2], NoiseKind::BrownianMotion).unwrap();
        assert_eq!(
            residual_reflection(&path, &other, &params(1.0, 0.0, 1.0)),
            Err(ReflectionError::GridMismatch)
        );
    }

    #[test]
    fn tanaka_sign_rule() {
        let g = grid(2, 1.0);
        let u = SamplePath::new(g, vec![1.0, -1.0, 0.0]).unwrap();
        let db = NoisePath::from_increments(g, vec![0.3, -0.2], NoiseKind::BrownianMotion).unwrap();
        let w = tanaka_noise(&u, &db).unwrap();
        assert_eq!(w.increments(), &[0.3, 0.2]);

        let pos = SamplePath::new(g, vec![1.0, 2.0, -3.0]).unwrap();
        assert_eq!(tanaka_noise(&pos, &db).unwrap().increments(), db.increments());
        let neg = SamplePath::new(g, vec![-1.0, -2.0, 3.0]).unwrap();
        assert_eq!(tanaka_noise(&neg, &db).unwrap().increments(), &[-0.3, 0.2]);
    }

    #[test]
    fn tanaka_twice_restores_increments_off_zero() {
        let g = grid(500, 1e-2);
        let db = generate_bm_increments(g, RngSeed::new(2, 0));
        let u = simulate_ou(&params(0.1, 1.0, 1.0), &db).unwrap();
        let twice = tanaka_noise(&u, &tanaka_noise(&u, &db).unwrap()).unwrap();
        for ((a, b), uk) in twice.increments().iter().zip(db.increments()).zip(u.values()) {
            if *uk != 0.0 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn occupation_cases() {
        let g = grid(10, 1.0);
        let far = SamplePath::new(g, vec![1.0; 11]).unwrap();
        let l = occupation_local_time(&far, 0.5, &params(1.0, 1.0, 1.0)).unwrap();
        assert!(l.values().iter().all(|&v| v == 0.0));

        let zero = SamplePath::new(g, vec![0.0; 11]).unwrap();
        let delta = 0.3;
        let l = occupation_local_time(&zero, delta, &params(1.0, 1.0, 1.0)).unwrap();
        for (k, v) in l.values().iter().enumerate() {
            assert!((v - 0.25 / (2.0 * delta) * k as f64).abs() < 1e-14);
        }
        assert!(occupation_local_time(&zero, 0.0, &params(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn hitting_times() {
        let path = SamplePath::new(grid(3, 1.0), vec![1.0, 0.5, 0.0, 0.2]).unwrap();
        assert_eq!(hitting_time(&path, 0.0).tau_time, Some(2.0));
        let pos = SamplePath::new(grid(2, 1.0), vec![1.0, 0.5, 0.2]).unwrap();
        assert_eq!(hitting_time(&pos, 0.0).tau_index, None);
        let two = SamplePath::new(grid(1, 1.0), vec![1.0, 0.09]).unwrap();
        let rep = hitting_time(&two, 0.1);
        assert_eq!(rep.tau_time, Some(1.0));
        assert_eq!(rep.manifest_lines("hit")[2], "hit.tau_time = 1");
    }

    #[test]
    fn inverse_integrals_by_hand() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let two = SamplePath::new(g, vec![2.0; 101]).unwrap();
        let r = inverse_integral_diagnostic(&two, 1.0);
        assert!((r.value - 0.5).abs() < 1e-13);
        assert!(!r.floored());

        let path = SamplePath::new(grid(3, 1.0), vec![1.0, 0.5, 0.25, 9.0]).unwrap();
        assert_eq!(inverse_integral_diagnostic(&path, 3.0).value, 7.0);
        assert_eq!(inverse_integral_diagnostic(&path, 1.0).value, 1.0);

        let zero = SamplePath::new(grid(2, 1.0), vec![1.0, 0.0, 1.0]).unwrap();
        let r = inverse_integral_diagnostic(&zero, 2.0);
        assert!(r.floored());
        assert_eq!(r.floored_points, 1);
        assert_eq!(r.value, 1.0 + 1.0 / DEFAULT_FLOOR);
    }

    #[test]
    fn growth_localization_by_construction() {
        let g = grid(6, 0.5);
        let path = SamplePath::new(g, vec![0.2, 0.1, 0.01, 0.001, 0.3, 0.4, 0.05]).unwrap();
        let l = epsilon_integral_reflection(&path, 0.01).unwrap();
        let rep = check_growth_localization(&path, &l, 0.01, 0.05);
        assert_eq!(rep.intervals, 2);
        assert!(rep.holds());
        assert!(rep.worst_ratio > 0.0);
    }

    proptest::proptest! {
        #[test]
        fn occupation_bandwidth_bound(seed in 0u64..500, d1 in 0.01..0.2f64, ratio in 1.01..5.0f64) {
            let g = grid(500, 1e-2);
            let p = params(0.1, 1.0, 1.0);
            let u = simulate_ou(&p, &generate_bm_increments(g, RngSeed::new(seed, 0))).unwrap();
            let d2 = d1 * ratio;
            let l1 = occupation_local_time(&u, d1, &p).unwrap();
            let l2 = occupation_local_time(&u, d2, &p).unwrap();
            let bound = 0.125 * (1.0 / d1 - 1.0 / d2) * g.horizon();
            proptest::prop_assert!(l1.terminal() - l2.terminal() <= bound + 1e-12);
            proptest::prop_assert!(l1.values().windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
