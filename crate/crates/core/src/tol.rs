//! Tolerance table shared by the library, its tests and the acceptance suite.

/// Pure algebraic identities evaluated in f64 (relative).
pub const ALGEBRAIC: f64 = 1e-12;

/// Results of iterative procedures (relative).
pub const ITERATIVE: f64 = 1e-9;

/// Attainment of closed-form extremes by constructed vectors (absolute, on ρc).
pub const ATTAINMENT: f64 = 1e-10;

/// Slack allowed when checking sampled values against an envelope.
pub const ORACLE_SLACK: f64 = 1e-9;

/// Relative error of the L_k constraint after sphere projection.
pub const CONSTRAINT: f64 = 1e-8;

/// Scaled stationarity residual accepted as converged.
pub const RESIDUAL: f64 = 1e-8;

/// Analytic vs central-difference gradients (relative).
pub const GRADIENT: f64 = 1e-5;

/// Relative closeness `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
