//! Driving noise: Brownian increments and fractional Gaussian noise.
//!
//! Every generator is a pure function of `(grid, hurst, seed, method)`. Seeds are
//! split into a master seed and a stream index; each stream is an independent
//! ChaCha8 keystream, so replication `r` can be generated without touching
//! replications `0..r`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

/// Relative size below which a negative circulant eigenvalue is treated as
/// round-off and clamped to zero.
const EIGENVALUE_ROUNDOFF: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid time grid: horizon {horizon} with {n_steps} steps (need horizon > 0 and n_steps >= 1)")]
    InvalidGrid { horizon: f64, n_steps: usize },
    #[error("Hurst index {0} outside [1/2, 1)")]
    HurstOutOfRange(f64),
    #[error("circulant embedding of size {size} has negative eigenvalue {min_eigenvalue:e}")]
    CirculantEmbeddingFailure { size: usize, min_eigenvalue: f64 },
    #[error("negative time in covariance: s = {s}, t = {t}")]
    NegativeTime { s: f64, t: f64 },
    #[error("need at least {need} paths for a covariance check, got {got}")]
    InsufficientSample { got: usize, need: usize },
    #[error("noise paths live on different grids")]
    HeterogeneousGrids,
    #[error("time {0} is not a grid point")]
    NotOnGrid(f64),
    #[error("cannot coarsen {n_steps} steps by a factor of {factor}")]
    BadRefinement { n_steps: usize, factor: usize },
    #[error("expected {expected} increments, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Uniform discretization of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, NoiseError> {
        if !(horizon.is_finite() && horizon > 0.0) || n_steps == 0 {
            return Err(NoiseError::InvalidGrid { horizon, n_steps });
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid with `n_steps` steps of size `dt`.
    pub fn from_step(dt: f64, n_steps: usize) -> Result<Self, NoiseError> {
        Self::new(dt * n_steps as f64, n_steps)
    }

    /// Grid on `[0, horizon]` whose step is as close as possible to `dt`.
    pub fn with_target_step(horizon: f64, dt: f64) -> Result<Self, NoiseError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(NoiseError::InvalidGrid { horizon, n_steps: 0 });
        }
        let n = (horizon / dt).round().max(1.0) as usize;
        Self::new(horizon, n)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `t_k`; the last point is exactly the horizon.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point at time `t`, if `t` is one.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.n_steps as f64 || (x - k).abs() > 1e-9 * x.abs().max(1.0) {
            return None;
        }
        Some(k as usize)
    }

    /// Grid with every `factor` consecutive steps merged into one.
    pub fn coarsen(&self, factor: usize) -> Result<Self, NoiseError> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(NoiseError::BadRefinement {
                n_steps: self.n_steps,
                factor,
            });
        }
        Self::new(self.horizon, self.n_steps / factor)
    }
}

/// `(master seed, stream index)`; the pair fixes a noise realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    BrownianMotion,
    FractionalBrownianMotion { hurst: f64 },
}

impl NoiseKind {
    pub fn hurst(&self) -> f64 {
        match *self {
            NoiseKind::BrownianMotion => 0.5,
            NoiseKind::FractionalBrownianMotion { hurst } => hurst,
        }
    }

    /// True when the process is a standard Brownian motion (including fBm with H = 1/2).
    pub fn is_brownian(&self) -> bool {
        self.hurst() == 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbmMethod {
    DaviesHarte,
    Hosking,
}

/// How a noise path came to be; surfaced in run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// i.i.d. Gaussian increments.
    Gaussian,
    /// Circulant embedding of size `2 * half_size`.
    DaviesHarte { half_size: usize },
    /// Durbin-Levinson recursion; `fallback` is set when Davies-Harte was
    /// requested and its embedding failed.
    Hosking { fallback: bool },
    /// Supplied by the caller or derived from another path.
    External,
}

/// Increments of a driving process on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    increments: Vec<f64>,
    kind: NoiseKind,
    seed: Option<RngSeed>,
    generator: Generator,
}

impl NoisePath {
    /// Wraps caller-supplied increments.
    pub fn from_increments(
        grid: TimeGrid,
        increments: Vec<f64>,
        kind: NoiseKind,
    ) -> Result<Self, NoiseError> {
        if increments.len() != grid.n_steps() {
            return Err(NoiseError::LengthMismatch {
                expected: grid.n_steps(),
                got: increments.len(),
            });
        }
        Ok(Self {
            grid,
            increments,
            kind,
            seed: None,
            generator: Generator::External,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn hurst(&self) -> f64 {
        self.kind.hurst()
    }

    pub fn seed(&self) -> Option<RngSeed> {
        self.seed
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    /// Path values at the grid points, starting from 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for dw in &self.increments {
            acc += dw;
            out.push(acc);
        }
        out
    }

    /// Block sums of `factor` consecutive increments: the same realization seen
    /// on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self, NoiseError> {
        let grid = self.grid.coarsen(factor)?;
        let increments = self
            .increments
            .chunks_exact(factor)
            .map(|c| c.iter().sum())
            .collect();
        Ok(Self {
            grid,
            increments,
            ..self.clone()
        })
    }

    pub(crate) fn derived(&self, increments: Vec<f64>, kind: NoiseKind) -> Self {
        debug_assert_eq!(increments.len(), self.increments.len());
        Self {
            grid: self.grid,
            increments,
            kind,
            seed: self.seed,
            generator: Generator::External,
        }
    }

    /// CSV with header `t,increment,cum`; row `k` describes the step ending at `t_{k+1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,increment,cum\n");
        let mut cum = 0.0;
        for (k, dw) in self.increments.iter().enumerate() {
            cum += dw;
            let _ = writeln!(
                out,
                "{},{},{}",
                crate::io::fmt_num(self.grid.time(k + 1)),
                crate::io::fmt_num(*dw),
                crate::io::fmt_num(cum)
            );
        }
        out
    }
}

/// i.i.d. `N(0, dt)` increments.
pub fn generate_bm_increments(grid: TimeGrid, seed: RngSeed) -> NoisePath {
    let mut rng = seed.rng();
    let scale = grid.dt().sqrt();
    let increments = (0..grid.n_steps())
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    NoisePath {
        grid,
        increments,
        kind: NoiseKind::BrownianMotion,
        seed: Some(seed),
        generator: Generator::Gaussian,
    }
}

/// Fractional Gaussian noise increments of an fBm with index `hurst` on `grid`.
///
/// With [`FbmMethod::DaviesHarte`] the minimal circulant embedding is tried
/// first, then one with doubled padding; if both have negative eigenvalues
/// the Hosking recursion is used and the path records the fallback.
pub fn generate_fbm_increments(
    grid: TimeGrid,
    hurst: f64,
    seed: RngSeed,
    method: FbmMethod,
) -> Result<NoisePath, NoiseError> {
    if !(0.5..1.0).contains(&hurst) {
        return Err(NoiseError::HurstOutOfRange(hurst));
    }
    let n = grid.n_steps();
    let mut rng = seed.rng();
    let (unit, generator) = match method {
        FbmMethod::Hosking => (hosking_fgn(n, hurst, &mut rng), Generator::Hosking { fallback: false }),
        FbmMethod::DaviesHarte => {
            let attempt = circulant_eigenvalues(n, n, hurst)
                .map(|ev| (ev, n))
                .or_else(|_| circulant_eigenvalues(n, 2 * n, hurst).map(|ev| (ev, 2 * n)));
            match attempt {
                Ok((eigenvalues, half_size)) => (
                    davies_harte_fgn(n, &eigenvalues, &mut rng),
                    Generator::DaviesHarte { half_size },
                ),
                Err(_) => (hosking_fgn(n, hurst, &mut rng), Generator::Hosking { fallback: true }),
            }
        }
    };
    let scale = grid.dt().powf(hurst);
    Ok(NoisePath {
        grid,
        increments: unit.into_iter().map(|x| x * scale).collect(),
        kind: NoiseKind::FractionalBrownianMotion { hurst },
        seed: Some(seed),
        generator,
    })
}

/// Autocovariance of unit-spaced fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// `Cov(B^H(s), B^H(t)) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64, NoiseError> {
    if s < 0.0 || t < 0.0 {
        return Err(NoiseError::NegativeTime { s, t });
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(NoiseError::HurstOutOfRange(hurst));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2)))
}

/// Eigenvalues of the circulant of size `2 * half_size` embedding the first
/// `n` lags of unit fGn.
pub fn circulant_eigenvalues(n: usize, half_size: usize, hurst: f64) -> Result<Vec<f64>, NoiseError> {
    debug_assert!(half_size >= n);
    let size = 2 * half_size;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let lag = if j <= half_size { j } else { size - j };
            Complex::new(fgn_autocovariance(lag, hurst), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0_f64, f64::max);
    let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if min < -EIGENVALUE_ROUNDOFF * max {
        return Err(NoiseError::CirculantEmbeddingFailure {
            size,
            min_eigenvalue: min,
        });
    }
    Ok(row.into_iter().map(|c| c.re.max(0.0)).collect())
}

fn davies_harte_fgn(n: usize, eigenvalues: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let size = eigenvalues.len();
    let half = size / 2;
    let m = size as f64;
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    let mut w = vec![Complex::new(0.0, 0.0); size];
    w[0] = Complex::new((eigenvalues[0] / m).sqrt() * normal(), 0.0);
    w[half] = Complex::new((eigenvalues[half] / m).sqrt() * normal(), 0.0);
    for k in 1..half {
        let scale = (eigenvalues[k] / (2.0 * m)).sqrt();
        let z = Complex::new(scale * normal(), scale * normal());
        w[k] = z;
        w[size - k] = z.conj();
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut w);
    w.into_iter().take(n).map(|c| c.re).collect()
}

/// Durbin-Levinson recursion; O(n^2) but exact for any positive-definite
/// autocovariance.
fn hosking_fgn(n: usize, hurst: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst)).collect();
    let mut x = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    let mut var = gamma[0];
    let z: f64 = StandardNormal.sample(rng);
    x.push(var.sqrt() * z);
    for i in 1..n {
        let num = gamma[i] - (1..i).map(|j| phi[j - 1] * gamma[i - j]).sum::<f64>();
        let k = num / var;
        scratch.clear();
        scratch.extend((1..i).map(|j| phi[j - 1] - k * phi[i - j - 1]));
        scratch.push(k);
        std::mem::swap(&mut phi, &mut scratch);
        var *= 1.0 - k * k;
        let mean: f64 = (1..=i).map(|j| phi[j - 1] * x[i - j]).sum();
        let z: f64 = StandardNormal.sample(rng);
        x.push(mean + var.max(0.0).sqrt() * z);
    }
    x
}

/// One `(s, t)` covariance comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheck {
    pub s: f64,
    pub t: f64,
    pub sample: f64,
    pub theoretical: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub hurst: f64,
    pub n_paths: usize,
    pub entries: Vec<CovarianceCheck>,
}

impl CovarianceReport {
    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, z_threshold: f64) -> bool {
        self.max_abs_z() < z_threshold
    }
}

/// Five interior and terminal `(s, t)` pairs on `grid`.
pub fn default_covariance_pairs(grid: &TimeGrid) -> Vec<(f64, f64)> {
    let n = grid.n_steps();
    let at = |num: usize| grid.time(n * num / 4);
    vec![
        (at(1), at(1)),
        (at(2), at(2)),
        (at(2), at(4)),
        (at(1), at(3)),
        (at(4), at(4)),
    ]
}

/// Compares the sample second moments `E[B(s) B(t)]` over `paths` with
/// [`fbm_covariance`]. The z-score uses the sample standard error of the
/// products.
pub fn validate_noise_covariance(
    paths: &[NoisePath],
    hurst: f64,
    pairs: &[(f64, f64)],
) -> Result<CovarianceReport, NoiseError> {
    const MIN_PATHS: usize = 100;
    if paths.len() < MIN_PATHS {
        return Err(NoiseError::InsufficientSample {
            got: paths.len(),
            need: MIN_PATHS,
        });
    }
    let grid = *paths[0].grid();
    if paths.iter().any(|p| *p.grid() != grid) {
        return Err(NoiseError::HeterogeneousGrids);
    }
    let index = |t: f64| grid.index_of(t).ok_or(NoiseError::NotOnGrid(t));
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(s, t)| Ok((index(s)?, index(t)?)))
        .collect::<Result<_, NoiseError>>()?;
    let cums: Vec<Vec<f64>> = paths.iter().map(NoisePath::cumulative).collect();
    let n = paths.len() as f64;
    let entries = pairs
        .iter()
        .zip(&idx)
        .map(|(&(s, t), &(i, j))| {
            let products: Vec<f64> = cums.iter().map(|c| c[i] * c[j]).collect();
            let mean = products.iter().sum::<f64>() / n;
            let var = products.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let std_error = (var / n).sqrt();
            let theoretical = fbm_covariance(s, t, hurst)?;
            let diff = mean - theoretical;
            let z = if std_error > 0.0 {
                diff / std_error
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(CovarianceCheck {
                s,
                t,
                sample: mean,
                theoretical,
                std_error,
                z,
            })
        })
        .collect::<Result<_, NoiseError>>()?;
    Ok(CovarianceReport {
        hurst,
        n_paths: paths.len(),
        entries,
    })
}
