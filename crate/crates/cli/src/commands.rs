use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use roucir::config::{ConfigError, RunConfig};
use roucir::convergence::{epsilon_ladder, rung_params, ConvergenceError};
use roucir::io::grid_csv;
use roucir::models::{ModelParams, ParamError};
use roucir::noise::{NoiseError, NoisePath, RngSeed, TimeGrid};
use roucir::reflection::{epsilon_integral_reflection, ReflectionError};
use roucir::schemes::{degrees_of_freedom, run_scheme, SchemeError, SchemeKind};
use roucir::verify::{noise_for, run_suite, Suite, FIGURE2_LADDER};

use crate::manifest::Manifest;
use crate::svg::{line_chart, Series};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("precondition violated: {0}")]
    Domain(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} checks failed")]
    VerificationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed { .. } => 1,
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

macro_rules! domain_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    )*};
}

domain_errors!(ParamError, SchemeError, ReflectionError, ConvergenceError);

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::HurstOutOfRange(_) => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

/// Options shared by the experiment commands; `None` keeps the config value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub hurst: Vec<f64>,
    pub eps: Vec<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

impl Overrides {
    /// Config file (or defaults) with the scalar overrides applied. A
    /// `--dt` sets `n_steps = round(T / dt)`.
    fn resolve(&self, default_dt: Option<f64>) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                if text.starts_with(roucir::config::MANIFEST_HEADER) {
                    RunConfig::from_manifest(&text)?
                } else {
                    text.parse()?
                }
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        // A new horizon keeps the step unless one is given.
        let kept_dt = self.horizon.map(|_| cfg.horizon / cfg.n_steps as f64);
        if let Some(t) = self.horizon {
            cfg.horizon = t;
        }
        if let Some(dt) = self.dt.or(default_dt).or(kept_dt) {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Usage(format!("--dt must be positive, got {dt}")));
            }
            cfg.n_steps = TimeGrid::with_target_step(cfg.horizon, dt)
                .map_err(|e| CliError::Usage(e.to_string()))?
                .n_steps();
        }
        cfg.grid().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn check_hurst(list: &[f64]) -> Result<(), CliError> {
    match list.iter().find(|h| !(0.5..1.0).contains(*h)) {
        Some(h) => Err(CliError::Usage(format!("Hurst index {h} outside [0.5, 1)"))),
        None => Ok(()),
    }
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", out.display())))
}

/// Formats a number for file names: `1e-4`, `0.25`, `1`.
fn tag(x: f64) -> String {
    let plain = format!("{x}");
    let sci = format!("{x:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

pub fn simulate(opts: &Overrides, scheme: &str, out: &Path) -> Result<(), CliError> {
    let kind: SchemeKind = scheme.parse().map_err(|e: SchemeError| CliError::Usage(e.to_string()))?;
    let mut cfg = opts.resolve(None)?;
    match opts.hurst.as_slice() {
        [] => {}
        [h] => cfg.params.hurst = *h,
        _ => return Err(CliError::Usage("simulate takes a single --hurst value".into())),
    }
    match opts.eps.as_slice() {
        [] => {}
        [e] => cfg.params.epsilon = *e,
        _ => return Err(CliError::Usage("simulate takes a single --eps value".into())),
    }
    check_hurst(&[cfg.params.hurst])?;
    let params = cfg.params;
    let mut manifest = Manifest::new("simulate", &cfg);
    manifest.set("scheme", kind);
    let grid = cfg.grid()?;
    manifest.set("dt", grid.dt());

    // Square-root and CIR schemes need the full parameter domain; the OU
    // family only needs the relaxed one, checked inside the scheme.
    if matches!(kind, SchemeKind::CirEuler | SchemeKind::SqrtImplicit) {
        let validated = params.validate()?;
        for w in validated.warnings() {
            manifest.warn(w);
        }
    }
    let components = match kind {
        SchemeKind::OuSquaredSum => degrees_of_freedom(&params)?,
        _ => 1,
    };
    prepare_out(out)?;
    let mut outputs = Vec::with_capacity(cfg.replications);
    for r in 0..cfg.replications {
        let noises: Vec<NoisePath> = (0..components)
            .map(|c| {
                let seed = RngSeed::new(cfg.seed, (r * components + c) as u64);
                noise_for_checked(grid, params.hurst, seed)
            })
            .collect::<Result<_, _>>()?;
        for (c, n) in noises.iter().enumerate() {
            manifest.record_noise(&format!("noise.{r}.{c}"), n);
            manifest.set(&format!("noise.{r}.{c}.stream"), r * components + c);
        }
        outputs.push(run_scheme(kind, &params, &noises)?);
    }
    for (r, run) in outputs.iter().enumerate() {
        let name = if cfg.replications == 1 {
            "path.csv".to_string()
        } else {
            format!("path_{r:04}.csv")
        };
        manifest.write_artifact(out, &name, &run.to_csv())?;
    }
    manifest.finish(out)?;
    Ok(())
}

fn noise_for_checked(grid: TimeGrid, hurst: f64, seed: RngSeed) -> Result<NoisePath, CliError> {
    check_hurst(&[hurst])?;
    Ok(noise_for(grid, hurst, seed))
}

fn figure_base(cfg: &RunConfig, hurst: f64) -> ModelParams {
    ModelParams { hurst, ..cfg.params }
}

pub fn figure1(opts: &Overrides, out: &Path) -> Result<(), CliError> {
    let hursts = if opts.hurst.is_empty() {
        vec![0.6, 0.7, 0.8, 0.9]
    } else {
        opts.hurst.clone()
    };
    check_hurst(&hursts)?;
    let eps = match opts.eps.as_slice() {
        [] => 1e-4,
        [e] => *e,
        _ => return Err(CliError::Usage("figure1 takes a single --eps value".into())),
    };
    let cfg = opts.resolve(if opts.config.is_none() { Some(1e-3) } else { None })?;
    let grid = cfg.grid()?;
    let mut manifest = Manifest::new("figure1", &cfg);
    manifest.set("scheme", SchemeKind::SqrtImplicit);
    manifest.set("dt", grid.dt());
    manifest.set("figure.epsilon", eps);
    manifest.set(
        "figure.hurst",
        hursts.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
    );

    let mut panels = Vec::new();
    for (i, &hurst) in hursts.iter().enumerate() {
        let params = rung_params(&figure_base(&cfg, hurst), eps);
        params.validate()?;
        let noise = noise_for_checked(grid, hurst, RngSeed::new(cfg.seed, 0))?;
        manifest.record_noise(&format!("noise.{i}"), &noise);
        let path = roucir::schemes::simulate_sqrt_process(&params, &noise)?;
        let l = epsilon_integral_reflection(&path, eps)?;
        panels.push((hurst, path, l));
    }
    prepare_out(out)?;
    for (hurst, path, l) in &panels {
        let stem = format!("figure1_H{}", tag(*hurst));
        manifest.write_artifact(
            out,
            &format!("{stem}.csv"),
            &grid_csv("t,Y,L_epsilon_integral", &grid, &[path.values(), l.values()]),
        )?;
        let times = grid.times();
        let svg = line_chart(
            &format!("H = {hurst}, eps = {eps}"),
            "t",
            &[
                Series {
                    label: "Y".into(),
                    color: "black",
                    width: 1.0,
                    x: &times,
                    y: path.values(),
                },
                Series {
                    label: "(1/2) int eps/Y".into(),
                    color: "red",
                    width: 1.0,
                    x: &times,
                    y: l.values(),
                },
            ],
        );
        manifest.write_artifact(out, &format!("{stem}.svg"), &svg)?;
    }
    manifest.finish(out)?;
    Ok(())
}

const LADDER_COLORS: [&str; 5] = ["red", "orange", "green", "blue", "purple"];

pub fn figure2(opts: &Overrides, out: &Path) -> Result<(), CliError> {
    let hurst = match opts.hurst.as_slice() {
        [] => 0.6,
        [h] => *h,
        _ => return Err(CliError::Usage("figure2 takes a single --hurst value".into())),
    };
    check_hurst(&[hurst])?;
    let ladder = if opts.eps.is_empty() {
        FIGURE2_LADDER.to_vec()
    } else {
        opts.eps.clone()
    };
    let cfg = opts.resolve(if opts.config.is_none() { Some(1e-3) } else { None })?;
    let grid = cfg.grid()?;
    let base = figure_base(&cfg, hurst);
    let noise = noise_for_checked(grid, hurst, RngSeed::new(cfg.seed, 0))?;
    let run = epsilon_ladder(&base, &ladder, &noise)?;

    let mut manifest = Manifest::new("figure2", &cfg);
    manifest.set("scheme", format!("{} (ladder), {} (reference)", SchemeKind::SqrtImplicit, SchemeKind::RouProjected));
    manifest.set("dt", grid.dt());
    manifest.record_noise("noise", &noise);
    if let Ok(v) = base.validate() {
        for w in v.warnings() {
            manifest.warn(w);
        }
    }
    prepare_out(out)?;
    let suffix = format!("seed{}_dt{}", cfg.seed, tag(grid.dt()));
    for rung in &run.rungs {
        manifest.write_artifact(out, &format!("figure2_eps{}_{suffix}.csv", tag(rung.epsilon)), &rung.to_csv())?;
    }
    manifest.write_artifact(out, &format!("figure2_reference_{suffix}.csv"), &run.reference.to_csv())?;

    let times = grid.times();
    let mut series: Vec<Series> = run
        .rungs
        .iter()
        .enumerate()
        .map(|(i, r)| Series {
            label: format!("eps = {}", r.epsilon),
            color: LADDER_COLORS[i % LADDER_COLORS.len()],
            width: 1.0,
            x: &times,
            y: r.path.values(),
        })
        .collect();
    series.push(Series {
        label: "reflected OU".into(),
        color: "black",
        width: 2.5,
        x: &times,
        y: run.reference.path.values(),
    });
    let svg = line_chart(&format!("Y_eps and reflected OU, H = {hurst}"), "t", &series);
    manifest.write_artifact(out, "figure2.svg", &svg)?;

    let mut report = run.report.manifest_lines();
    report.push(format!("reference_sandwich_holds = {}", run.report.reference_sandwich_holds()));
    manifest.write_artifact(out, "figure2_report.txt", &(report.join("\n") + "\n"))?;
    manifest.extend(report.into_iter().map(|l| format!("report.{l}")));
    manifest.finish(out)?;
    Ok(())
}

pub fn verify(suite: &str) -> Result<(), CliError> {
    let suite: Suite = suite.parse().map_err(CliError::Usage)?;
    let checks = run_suite(suite);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        Err(CliError::VerificationFailed {
            failed,
            total: checks.len(),
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_are_short() {
        assert_eq!(tag(1e-4), "1e-4");
        assert_eq!(tag(0.25), "0.25");
        assert_eq!(tag(1.0), "1");
        assert_eq!(tag(0.001), "1e-3");
        assert_eq!(tag(0.6), "0.6");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Domain("x".into()).exit_code(), 3);
        assert_eq!(CliError::VerificationFailed { failed: 1, total: 2 }.exit_code(), 1);
        assert_eq!(CliError::from(NoiseError::HurstOutOfRange(0.4)).exit_code(), 2);
    }

    #[test]
    fn dt_override_sets_step_count() {
        let opts = Overrides {
            dt: Some(1e-2),
            horizon: Some(2.0),
            ..Default::default()
        };
        let cfg = opts.resolve(None).unwrap();
        assert_eq!(cfg.n_steps, 200);
        assert!(Overrides {
            dt: Some(-1.0),
            ..Default::default()
        }
        .resolve(None)
        .is_err());
    }
}
