//! Simulation and certification toolkit for output-injection observers on
//! nonlinear triangular systems.
//!
//! The plant class is
//!
//! ```text
//! ẋ_i = x_{i+1} + f_i(x_1,…,x_i, u)     i = 1…n−1
//! ẋ_n = f_n(x_1,…,x_n, u) + d(t)
//! y   = x_1
//! ```
//!
//! with user-written nonlinearities ([`model`]). On top of it the crate
//! provides: the singular time-scaling function μ and the error-scaling
//! diagonal Γ ([`timescale`]); prescribed-time, high-gain and
//! disturbance-extended observer right-hand sides ([`observers`]); a
//! deterministic RK4 driver that steps across the t → T gain blow-up
//! ([`sim`]); Lyapunov-based convergence certificates and trajectory bound
//! checks ([`certify`]); and summary statistics for comparing observers
//! ([`metrics`]).
//!
//! Everything numeric is generic over the scalar type through [`Real`];
//! the type aliases at the crate root fix `f64`, which is what the CLI and
//! the shipped scenarios use.

pub mod certify;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod observers;
pub mod scalar;
pub mod sim;
pub mod timescale;

pub use scalar::Real;

/// Scalar type used by the CLI and shipped scenarios.
pub type Scalar = f64;

pub type System = model::TriangularSystem<Scalar>;
pub type TimeScale = timescale::TimeScale<Scalar>;
pub type Observer = observers::Observer<Scalar>;
pub type SimConfig = sim::SimConfig<Scalar>;
pub type Trajectory = sim::Trajectory<Scalar>;
pub type Certificate = certify::Certificate<Scalar>;
pub type RunMetrics = metrics::RunMetrics<Scalar>;
