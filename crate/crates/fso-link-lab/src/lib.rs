//! Closed-form performance analysis of a three-hop free-space optical link
//! (ground station to high-altitude platform to reflecting intelligent
//! surface to user) with a fixed-gain amplify-and-forward relay, plus an
//! independent Monte Carlo simulator for cross-validation.

pub mod atmosphere;
pub mod cli;
pub mod e2e;
pub mod error;
pub mod link_hap_user;
pub mod link_ogs_hap;
pub mod montecarlo;
pub mod quad;
pub mod scenario;
pub mod specfun;

pub use error::{Error, Result};
