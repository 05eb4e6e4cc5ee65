//! Numerical toolkit around the p-widths of the round 2-sphere.
//!
//! The crate is organized around five pillars:
//!
//! - [`surface`]: round sphere / ellipsoid / flat-rectangle geometry with
//!   geodesic boundary-value solves and principal-ellipse length tuning,
//! - [`crofton`]: polynomial sweepouts on S² and Monte Carlo Crofton length
//!   estimation with the 2πk mass bound,
//! - [`phase`]: the sine-Gordon phase-transition PDE ε²Δu = W′(u) in one
//!   (axisymmetric sphere) and two (rectangle) dimensions,
//! - [`scattering`]: the elliptic sine-Gordon Lax pair, Jost solutions,
//!   the Wronskian a(λ), bound states, and end-direction detection,
//! - [`nets`]: stationary geodesic networks, their Jacobi operators, and
//!   the Q-subdivided stratification,
//! - [`lattice`]: the exact quantization lattice, counting identity, pinch
//!   bounds, the width table ω_p = 2π⌊√p⌋, and the Weyl constant.
//!
//! Data-parallel inner loops (Monte Carlo sampling, spectral-parameter
//! sweeps, per-edge assembly) run on rayon when the default `parallel`
//! feature is enabled; every parallel entry point has a sequential twin so
//! the two can be benchmarked against each other.

pub mod crofton;
pub mod lattice;
pub mod nets;
pub mod ode;
pub mod par;
pub mod phase;
pub mod quad;
pub mod rng;
pub mod scattering;
pub mod surface;

pub const TAU: f64 = std::f64::consts::TAU;
