//! Fox-H and Meijer-G functions, univariate and bivariate, built on the
//! Mellin-Barnes contour engine.

use crate::error::{Error, Result};
use crate::specfun::contour::{
    mellin_barnes, BivariateKernel, ContourConfig, KernelTerm, Scaled,
};

/// H^{m,n}_{p,q}[z | (a_i, A_i); (b_j, B_j)] with the kernel
/// prod_{j<=m} Gamma(b_j + B_j s) prod_{i<=n} Gamma(1 - a_i - A_i s)
/// / [prod_{i>n} Gamma(a_i + A_i s) prod_{j>m} Gamma(1 - b_j - B_j s)]
/// integrated against z^{-s}.
#[derive(Debug, Clone)]
pub struct FoxHSpec {
    pub m: usize,
    pub n: usize,
    /// (a_i, A_i), length p
    pub upper: Vec<(f64, f64)>,
    /// (b_j, B_j), length q
    pub lower: Vec<(f64, f64)>,
}

impl FoxHSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n > self.upper.len() {
            return Err(Error::Domain(format!(
                "fox-h: n = {} exceeds p = {}",
                self.n,
                self.upper.len()
            )));
        }
        if self.m > self.lower.len() {
            return Err(Error::Domain(format!(
                "fox-h: m = {} exceeds q = {}",
                self.m,
                self.lower.len()
            )));
        }
        for &(_, scale) in self.upper.iter().chain(self.lower.iter()) {
            if !(scale > 0.0) {
                return Err(Error::Domain(format!(
                    "fox-h: parameter scales must be positive (got {scale})"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn kernel(&self) -> Vec<KernelTerm> {
        let mut terms = Vec::with_capacity(self.upper.len() + self.lower.len());
        for (j, &(b, bb)) in self.lower.iter().enumerate() {
            if j < self.m {
                terms.push(KernelTerm::num(b, bb));
            } else {
                terms.push(KernelTerm::den(1.0 - b, -bb));
            }
        }
        for (i, &(a, aa)) in self.upper.iter().enumerate() {
            if i < self.n {
                terms.push(KernelTerm::num(1.0 - a, -aa));
            } else {
                terms.push(KernelTerm::den(a, aa));
            }
        }
        terms
    }
}

/// Fox-H evaluation returning a log-scaled value (mantissa * exp(log_scale)).
pub fn fox_h_scaled(spec: &FoxHSpec, z: f64, cfg: &ContourConfig) -> Result<Scaled> {
    spec.validate()?;
    mellin_barnes(&spec.kernel(), z, cfg)
}

pub fn fox_h(spec: &FoxHSpec, z: f64, cfg: &ContourConfig) -> Result<f64> {
    Ok(fox_h_scaled(spec, z, cfg)?.value())
}

/// Meijer-G as the unit-scale special case of Fox-H.
/// `upper` and `lower` are the a_i and b_j parameter lists.
pub fn meijer_g(
    m: usize,
    n: usize,
    upper: &[f64],
    lower: &[f64],
    z: f64,
    cfg: &ContourConfig,
) -> Result<f64> {
    let spec = FoxHSpec {
        m,
        n,
        upper: upper.iter().map(|&a| (a, 1.0)).collect(),
        lower: lower.iter().map(|&b| (b, 1.0)).collect(),
    };
    fox_h(&spec, z, cfg)
}

/// Bivariate Fox-H of the form used by the end-to-end statistics:
/// (1/2 pi i)^2 int int Gamma(j0 + ju u + jv v) K1(u) K2(v) z1^u z2^v du dv.
/// Kernel factors are Gamma(shift + scale u)^power entries built by the
/// caller; `sign` carries any overall minus absorbed into the kernel.
#[derive(Debug, Clone)]
pub struct BivariateFoxHSpec {
    pub kernel1: Vec<KernelTerm>,
    pub kernel2: Vec<KernelTerm>,
    pub joint: (f64, f64, f64),
    pub offset_u: Option<f64>,
    pub offset_v: Option<f64>,
    pub sign: f64,
}

impl BivariateFoxHSpec {
    pub fn new(kernel1: Vec<KernelTerm>, kernel2: Vec<KernelTerm>) -> Self {
        Self {
            kernel1,
            kernel2,
            joint: (0.0, -1.0, 1.0),
            offset_u: None,
            offset_v: None,
            sign: 1.0,
        }
    }
}

pub fn fox_h_bivariate_scaled(
    spec: &BivariateFoxHSpec,
    z1: f64,
    z2: f64,
    cfg: &ContourConfig,
) -> Result<Scaled> {
    let k = BivariateKernel {
        kernel_u: spec.kernel1.clone(),
        kernel_v: spec.kernel2.clone(),
        joint: spec.joint,
        offset_u: spec.offset_u,
        offset_v: spec.offset_v,
        sign: spec.sign,
    };
    k.evaluate(z1, z2, cfg)
}

pub fn fox_h_bivariate(
    spec: &BivariateFoxHSpec,
    z1: f64,
    z2: f64,
    cfg: &ContourConfig,
) -> Result<f64> {
    Ok(fox_h_bivariate_scaled(spec, z1, z2, cfg)?.value())
}
