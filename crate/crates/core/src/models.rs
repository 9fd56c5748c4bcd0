//! Parameters, derived quantities and discrete trajectories.

use std::fmt;

use thiserror::Error;

use crate::noise::TimeGrid;

/// Model parameters. `x0 = y0^2` is always derived from `y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Initial value of the square-root process (and of OU paths).
    pub y0: f64,
    /// Mean-reversion numerator of the CIR drift `a - b X`.
    pub a: f64,
    /// Mean-reversion speed.
    pub b: f64,
    pub sigma: f64,
    /// Perturbation added to the drift numerator of the square-root SDE.
    pub epsilon: f64,
    pub hurst: f64,
}

impl Default for ModelParams {
    /// The simulation setup used for the figures: `Y(0) = 0.25`, `b = σ = 1`,
    /// critical `a = σ²/4`, standard Brownian noise.
    fn default() -> Self {
        Self {
            y0: 0.25,
            a: 0.25,
            b: 1.0,
            sigma: 1.0,
            epsilon: 0.0,
            hurst: 0.5,
        }
    }
}

/// A single violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite(&'static str),
    InitialValueNonpositive(f64),
    InitialValueNegative(f64),
    MeanReversionNonpositive(f64),
    MeanReversionNegative(f64),
    VolatilityNonpositive(f64),
    VolatilityNegative(f64),
    DriftNumeratorNegative(f64),
    EpsilonNegative(f64),
    HurstOutOfRange(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite(name) => write!(f, "{name} is not finite"),
            Violation::InitialValueNonpositive(v) => write!(f, "y0 = {v} must be > 0"),
            Violation::InitialValueNegative(v) => write!(f, "y0 = {v} must be >= 0"),
            Violation::MeanReversionNonpositive(v) => write!(f, "b = {v} must be > 0"),
            Violation::MeanReversionNegative(v) => write!(f, "b = {v} must be >= 0"),
            Violation::VolatilityNonpositive(v) => write!(f, "sigma = {v} must be > 0"),
            Violation::VolatilityNegative(v) => write!(f, "sigma = {v} must be >= 0"),
            Violation::DriftNumeratorNegative(v) => write!(f, "a = {v} must be >= 0"),
            Violation::EpsilonNegative(v) => write!(f, "epsilon = {v} must be >= 0"),
            Violation::HurstOutOfRange(v) => write!(f, "hurst = {v} must lie in [0.5, 1)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameters: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ParamError(pub Vec<Violation>);

impl ParamError {
    pub fn contains(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.0.iter().any(pred)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `a > σ²/4`: the square root solves an SDE with a `1/Y` drift.
    Supercritical,
    /// `a = σ²/4`: the square root is a reflected OU process.
    Critical,
    /// `a < σ²/4`: simulated, but no limit statement applies.
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    /// `a - σ²/4`.
    pub p: f64,
    /// Degrees of freedom `4a/σ²`.
    pub d: f64,
    pub regime: Regime,
}

impl ModelParams {
    pub fn x0(&self) -> f64 {
        self.y0 * self.y0
    }

    /// Critical iff `4a == σ²` exactly on the stored values.
    pub fn regime(&self) -> Regime {
        let lhs = 4.0 * self.a;
        let rhs = self.sigma * self.sigma;
        if lhs > rhs {
            Regime::Supercritical
        } else if lhs == rhs {
            Regime::Critical
        } else {
            Regime::Subcritical
        }
    }

    pub fn derived(&self) -> DerivedQuantities {
        let s2 = self.sigma * self.sigma;
        DerivedQuantities {
            p: self.a - s2 / 4.0,
            d: 4.0 * self.a / s2,
            regime: self.regime(),
        }
    }

    fn finite_violations(&self) -> Vec<Violation> {
        [
            ("y0", self.y0),
            ("a", self.a),
            ("b", self.b),
            ("sigma", self.sigma),
            ("epsilon", self.epsilon),
            ("hurst", self.hurst),
        ]
        .into_iter()
        .filter(|(_, v)| !v.is_finite())
        .map(|(name, _)| Violation::NonFinite(name))
        .collect()
    }

    /// Full model constraints: `y0, b, σ > 0`, `a, ε >= 0`, `H ∈ [1/2, 1)`.
    pub fn validate(&self) -> Result<ValidatedParams, ParamError> {
        let mut v = self.finite_violations();
        if self.y0 <= 0.0 {
            v.push(Violation::InitialValueNonpositive(self.y0));
        }
        if self.b <= 0.0 {
            v.push(Violation::MeanReversionNonpositive(self.b));
        }
        if self.sigma <= 0.0 {
            v.push(Violation::VolatilityNonpositive(self.sigma));
        }
        self.push_common(&mut v);
        if v.is_empty() {
            Ok(ValidatedParams {
                params: *self,
                derived: self.derived(),
            })
        } else {
            Err(ParamError(v))
        }
    }

    /// The weaker domain the integrators accept: degenerate `y0 = 0`, `b = 0`
    /// and `σ = 0` are allowed so that limiting cases (pure integration,
    /// deterministic ODEs) can be run.
    pub fn check_scheme_domain(&self) -> Result<(), ParamError> {
        let mut v = self.finite_violations();
        if self.y0 < 0.0 {
            v.push(Violation::InitialValueNegative(self.y0));
        }
        if self.b < 0.0 {
            v.push(Violation::MeanReversionNegative(self.b));
        }
        if self.sigma < 0.0 {
            v.push(Violation::VolatilityNegative(self.sigma));
        }
        self.push_common(&mut v);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ParamError(v))
        }
    }

    fn push_common(&self, v: &mut Vec<Violation>) {
        if self.a < 0.0 {
            v.push(Violation::DriftNumeratorNegative(self.a));
        }
        if self.epsilon < 0.0 {
            v.push(Violation::EpsilonNegative(self.epsilon));
        }
        if !(0.5..1.0).contains(&self.hurst) {
            v.push(Violation::HurstOutOfRange(self.hurst));
        }
    }
}

/// Parameters that passed [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams {
    params: ModelParams,
    derived: DerivedQuantities,
}

impl ValidatedParams {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedQuantities {
        &self.derived
    }

    pub fn regime(&self) -> Regime {
        self.derived.regime
    }

    pub fn warnings(&self) -> Vec<String> {
        match self.derived.regime {
            Regime::Subcritical if self.params.hurst == 0.5 => vec![format!(
                "subcritical regime (a = {} < sigma^2/4 = {}): no convergence statement applies",
                self.params.a,
                self.params.sigma * self.params.sigma / 4.0
            )],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("reflection path must start at 0, got {0}")]
    NonzeroStart(f64),
    #[error("reflection path decreases at index {0}")]
    Decreasing(usize),
}

/// Process values at every grid point (`n_steps + 1` of them).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self, PathError> {
        check_len(&grid, &values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PathError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, PathError> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Every `factor`-th value, i.e. the path seen on a coarser grid.
    pub fn subsample(&self, factor: usize) -> Option<Self> {
        let grid = self.grid.coarsen(factor).ok()?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Some(Self { grid, values })
    }

    /// CSV with header `t,value`.
    pub fn to_csv(&self) -> String {
        crate::io::grid_csv("t,value", &self.grid, &[&self.values])
    }
}

/// A nondecreasing path started at 0, such as a reflection function.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ReflectionPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self, PathError> {
        check_len(&grid, &values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PathError::NonFinite(i));
        }
        if values[0] != 0.0 {
            return Err(PathError::NonzeroStart(values[0]));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(PathError::Decreasing(i + 1));
        }
        Ok(Self { grid, values })
    }

    /// Running sums of nonnegative terms: `L_0 = 0`, `L_{k+1} = L_k + terms[k]`.
    pub(crate) fn from_nonnegative_terms(grid: TimeGrid, terms: impl IntoIterator<Item = f64>) -> Self {
        let mut values = Vec::with_capacity(grid.n_steps() + 1);
        let mut acc = 0.0;
        values.push(acc);
        for t in terms {
            debug_assert!(t >= 0.0);
            acc += t;
            values.push(acc);
        }
        debug_assert_eq!(values.len(), grid.n_steps() + 1);
        Self { grid, values }
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_steps() + 1],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    /// CSV with header `t,L`.
    pub fn to_csv(&self) -> String {
        crate::io::grid_csv("t,L", &self.grid, &[&self.values])
    }
}

fn check_len(grid: &TimeGrid, values: &[f64]) -> Result<(), PathError> {
    if values.len() != grid.n_steps() + 1 {
        return Err(PathError::LengthMismatch {
            expected: grid.n_steps() + 1,
            got: values.len(),
        });
    }
    Ok(())
}

/// `max_k |x_k - y_k|` over two equally long sequences.
pub fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(y0: f64, a: f64, b: f64, sigma: f64) -> ModelParams {
        ModelParams {
            y0,
            a,
            b,
            sigma,
            epsilon: 0.0,
            hurst: 0.5,
        }
    }

    #[test]
    fn one_degree_of_freedom_is_critical() {
        let v = params(0.5, 0.25, 1.0, 1.0).validate().unwrap();
        assert_eq!(v.derived().p, 0.0);
        assert_eq!(v.derived().d, 1.0);
        assert_eq!(v.regime(), Regime::Critical);
    }

    #[test]
    fn supercritical_p() {
        let v = params(0.5, 0.5, 1.0, 1.0).validate().unwrap();
        assert_eq!(v.derived().p, 0.25);
        assert_eq!(v.regime(), Regime::Supercritical);
    }

    #[test]
    fn regimes_by_exact_comparison() {
        assert_eq!(params(1.0, 0.3, 1.0, 1.0).regime(), Regime::Supercritical);
        assert_eq!(params(1.0, 0.25, 1.0, 1.0).regime(), Regime::Critical);
        assert_eq!(params(1.0, 0.1, 1.0, 1.0).regime(), Regime::Subcritical);
        // One ulp above the critical value is not critical.
        let a = f64::from_bits(0.25_f64.to_bits() + 1);
        assert_eq!(params(1.0, a, 1.0, 1.0).regime(), Regime::Supercritical);
        let sigma = 0.3;
        assert_eq!(params(1.0, sigma * sigma / 4.0, 1.0, sigma).regime(), Regime::Critical);
    }

    #[test]
    fn each_violation_is_named() {
        let err = params(0.5, 0.25, 0.0, 1.0).validate().unwrap_err();
        assert_eq!(err.0, vec![Violation::MeanReversionNonpositive(0.0)]);
        let err = ModelParams {
            y0: 0.0,
            a: -1.0,
            b: 1.0,
            sigma: -2.0,
            epsilon: -0.1,
            hurst: 0.3,
        }
        .validate()
        .unwrap_err();
        assert_eq!(err.0.len(), 5);
        assert!(err.to_string().contains("y0 = 0 must be > 0"));
        assert!(params(1.0, 0.25, 1.0, f64::NAN).validate().is_err());
    }

    #[test]
    fn subcritical_runs_carry_a_warning() {
        let v = params(0.5, 0.1, 1.0, 1.0).validate().unwrap();
        assert_eq!(v.warnings().len(), 1);
        assert!(params(0.5, 0.3, 1.0, 1.0).validate().unwrap().warnings().is_empty());
    }

    #[test]
    fn scheme_domain_allows_degenerate_cases() {
        assert!(params(0.0, 0.0, 0.0, 0.0).check_scheme_domain().is_ok());
        assert!(params(-1.0, 0.0, 0.0, 0.0).check_scheme_domain().is_err());
    }

    #[test]
    fn reflection_path_invariants() {
        let g = TimeGrid::new(2.0, 2).unwrap();
        assert!(ReflectionPath::new(g, vec![0.0, 1.0, 1.0]).is_ok());
        assert_eq!(
            ReflectionPath::new(g, vec![0.1, 1.0, 1.0]),
            Err(PathError::NonzeroStart(0.1))
        );
        assert_eq!(
            ReflectionPath::new(g, vec![0.0, 1.0, 0.5]),
            Err(PathError::Decreasing(2))
        );
        assert!(SamplePath::new(g, vec![0.0, 1.0]).is_err());
        assert_eq!(SamplePath::new(g, vec![0.0, f64::INFINITY, 1.0]), Err(PathError::NonFinite(1)));
    }

    proptest::proptest! {
        #[test]
        fn validate_is_idempotent(
            y0 in -1.0..2.0f64, a in -1.0..2.0f64, b in -1.0..2.0f64,
            sigma in -1.0..2.0f64, eps in -0.1..0.1f64, h in 0.3..1.1f64,
        ) {
            let p = ModelParams { y0, a, b, sigma, epsilon: eps, hurst: h };
            let first = p.validate();
            proptest::prop_assert_eq!(first.clone(), p.validate());
            if let Ok(v) = first {
                proptest::prop_assert_eq!(v.params(), &p);
                proptest::prop_assert_eq!(v.params().validate(), Ok(v));
            }
        }
    }
}
