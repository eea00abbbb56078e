//! Special functions: gamma family, modified Bessel functions, and the
//! Mellin-Barnes machinery for Meijer-G / Fox-H evaluation.

pub mod bessel;
pub mod contour;
pub mod foxh;
pub mod gamma;

pub use bessel::{bessel_i0, bessel_k};
pub use contour::{ContourConfig, KernelTerm, Scaled};
pub use foxh::{
    fox_h, fox_h_bivariate, fox_h_bivariate_scaled, fox_h_scaled, meijer_g, BivariateFoxHSpec,
    FoxHSpec,
};
pub use gamma::{complex_log_gamma, erf, erfc, gamma, ln_gamma, upper_incomplete_gamma};
