//! Simulation of square roots of (fractional) CIR processes by implicit
//! schemes, reflected (fractional) OU processes by projection, estimators of
//! the reflection term, and the `ε → 0` limit connecting them.

pub mod config;
pub mod convergence;
pub mod io;
pub mod models;
pub mod noise;
pub mod oracles;
pub mod reflection;
pub mod schemes;
pub mod verify;
