//! Desk-scale laboratory for one-dimensional kinetically constrained models
//! (KCM) with arbitrary finite on-site state spaces, per-site update rules,
//! boundary conditions and irreducible components.
//!
//! A KCM resamples the state of a site at rate 1 whenever one of the site's
//! update rules is fully infected. Because flips are blocked elsewhere, the
//! single-flip transition graph splits into irreducible components; every
//! quantity here (stationary measures, Dirichlet forms, spectral gaps) is
//! computed exactly on such a component.
//!
//! The crate is organised around that pipeline:
//!
//! - [`model`] — state spaces, update families, volumes, boundary conditions,
//!   configurations, the constraint predicate, a small model zoo and the JSON
//!   file format;
//! - [`closure`] — the bootstrap closure (monotone fixed point of "some rule
//!   fully infected-or-already-closed"), reduction to a boundary-free interval
//!   model, and the isolation property of infected blocks;
//! - [`component`] — exact enumeration of irreducible components, conditioned
//!   measures, the Bernoulli-domination certificate, and an independent
//!   breadth-first-search oracle over the full transition graph;
//! - [`spectral`] — Dirichlet forms, variances, exact spectral gaps and
//!   relaxation times, closed-form relaxation-time bounds and test-function
//!   lower bounds;
//! - [`dynamics`] — continuous-time simulation of the single-site dynamics and
//!   the two-block auxiliary chain (block resampling moves) with its exact gap;
//! - [`coupling`] — the alternating two-block coupling, its warm-up variant,
//!   the dominating Y-chain and the closed-form meeting-tail bound;
//! - [`experiment`] — deterministic parameter sweeps, random-model fuzzing,
//!   CSV/manifest reporting.
//!
//! Everything is deterministic given seeds; see the `kcmlab` binary and the
//! `examples/` directory for entry points.

pub mod closure;
pub mod component;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod model;
pub mod rng;
pub mod spectral;

pub use error::Error;
pub use model::{Configuration, Model, SiteStateSpace, UpdateFamily};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
