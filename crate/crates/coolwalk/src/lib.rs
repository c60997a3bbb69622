//! Simulation and large-deviations numerics for one-dimensional random
//! walks in static and cooling (periodically resampled) random environments:
//! exact quenched distribution evolution, reproducible Monte Carlo,
//! hitting-time cumulants via random continued fractions, Legendre duality,
//! an ergodic-averaging harness for triangular arrays with cooling
//! structure, and experiment drivers with CSV output.

pub mod cet;
pub mod cli;
pub mod config;
pub mod env;
pub mod experiments;
pub mod frac;
pub mod output;
pub mod ratefn;
pub mod rng;
pub mod walk;

pub use env::{AlphaDistribution, CoolingMap, EnvView, Environment, LazyEnvironment};
pub use ratefn::{GridFunction, RateChain};
pub use walk::{Frame, LatticePmf, Trajectory};
