//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Point outside the exterior r-domain or otherwise invalid.
    #[error("domain error: {0}")]
    Domain(String),

    /// Polar angle outside the configured exclusion band.
    #[error("theta = {theta} outside pole band [{min}, pi - {min}]")]
    PoleExclusion { theta: f64, min: f64 },

    /// Two roots of the horizon polynomial closer than the separation tolerance.
    #[error("degenerate roots: |{r0} - {r1}| below separation tolerance {tol}")]
    DegenerateRoots { r0: f64, r1: f64, tol: f64 },

    /// The radial potential is monotone on the exterior interval.
    #[error(
        "no interior critical point of the radial potential (xi_t = {xi_t}, xi_phi = {xi_phi})"
    )]
    NoInteriorCritical { xi_t: f64, xi_phi: f64 },

    /// Characteristic completion has no real solution for xi_theta.
    #[error("no real root for xi_theta: residual budget {budget} is negative")]
    NoRealRoot { budget: f64 },

    /// Rejection sampling acceptance rate fell below the floor.
    #[error("trapped-set sampling exhausted: {accepted} accepted of {drawn} draws")]
    ExhaustedDraws { accepted: usize, drawn: usize },

    /// Point outside the configured neighborhood of the trapped set.
    #[error("point not near trapping: {0}")]
    NotNearTrapping(String),

    /// Adaptive step size underflow.
    #[error("integrator step failure at s = {s} (h = {h})")]
    StepFailure { s: f64, h: f64 },

    /// No event crossing within the allotted flow duration.
    #[error("no crossing of the stable manifold within duration {max_duration}")]
    NoCrossing { max_duration: f64 },

    /// Inversion target escaped the configured bracket.
    #[error("S-inversion target {target} out of range [{lo}, {hi}]")]
    OutOfRange { target: f64, lo: f64, hi: f64 },

    /// A normal-form integration path left the trusted neighborhood.
    #[error("path escape: {0}")]
    PathEscape(String),

    /// Regression grid too degenerate to fit symbol orders.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Root finding failed to converge.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// Invalid configuration value.
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
