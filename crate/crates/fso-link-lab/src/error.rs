//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("log-gamma pole: z = {0} is within 1e-12 of a non-positive integer")]
    Pole(f64),

    #[error("no vertical contour separates the pole families (left max {left}, right min {right})")]
    ContourSeparation { left: f64, right: f64 },

    #[error("contour quadrature did not converge after {refinements} refinements (last rel change {last_rel:.3e})")]
    Convergence { refinements: usize, last_rel: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("no beam waist solves for target radius {target_m} m at distance {distance_m} m (far-field minimum {min_m} m)")]
    NoSolution {
        target_m: f64,
        distance_m: f64,
        min_m: f64,
    },

    #[error("series divergence: {0}")]
    SeriesDivergence(String),

    #[error("degenerate exponents: {0}")]
    DegenerateExponent(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("unknown figure id: {0}")]
    UnknownFigure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
