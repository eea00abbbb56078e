//! Mellin-Barnes contour quadrature: the engine behind Meijer-G, Fox-H and
//! the bivariate Fox-H evaluations.
//!
//! A kernel is a product of gamma factors Gamma(shift + scale*s)^power with
//! signed integer powers (negative = denominator). Univariate values are
//! integrals (1/2*pi*i) * int K(s) z^{-s} ds over a vertical line; bivariate
//! values use the z^{+u} z^{+v} orientation of the end-to-end derivation.
//! Everything is accumulated in log scale so that huge gamma products cannot
//! overflow before the caller divides by its own gamma prefactors.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::specfun::gamma::complex_log_gamma;
use num_complex::Complex64;

/// Contour placement and refinement policy.
#[derive(Debug, Clone, Copy)]
pub struct ContourConfig {
    /// None = automatic midpoint between the pole families.
    pub offset: Option<f64>,
    pub half_height: f64,
    pub nodes: usize,
    pub rel_tol: f64,
    pub max_refinements: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            offset: None,
            half_height: 40.0,
            nodes: 96,
            rel_tol: 1e-9,
            max_refinements: 8,
        }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 32 {
            return Err(Error::Domain(format!(
                "contour nodes must be >= 32 (got {})",
                self.nodes
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Domain(format!(
                "rel_tol must lie in (0,1) (got {})",
                self.rel_tol
            )));
        }
        if !(self.half_height > 0.0) {
            return Err(Error::Domain("half_height must be positive".into()));
        }
        Ok(())
    }
}

/// Gamma(shift + scale * s)^power, power < 0 meaning a denominator factor.
#[derive(Debug, Clone, Copy)]
pub struct KernelTerm {
    pub shift: f64,
    pub scale: f64,
    pub power: i32,
}

impl KernelTerm {
    pub fn num(shift: f64, scale: f64) -> Self {
        Self {
            shift,
            scale,
            power: 1,
        }
    }
    pub fn den(shift: f64, scale: f64) -> Self {
        Self {
            shift,
            scale,
            power: -1,
        }
    }
    pub fn pow(mut self, p: i32) -> Self {
        self.power *= p;
        self
    }
}

/// A value represented as `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }
    /// value * exp(extra) as a plain f64
    pub fn value_scaled(&self, extra: f64) -> f64 {
        self.mantissa * (self.log_scale + extra).exp()
    }
}

pub(crate) fn log_kernel(terms: &[KernelTerm], s: Complex64) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms {
        let lg = complex_log_gamma(t.shift + t.scale * s)?;
        acc += (t.power as f64) * lg;
    }
    Ok(acc)
}

/// Rightmost pole of the left family (poles extending to -inf) over `terms`
/// under the z^{-s} orientation, and leftmost pole of the right family.
/// Left family: numerator factors with scale > 0 (poles at -(shift+j)/scale).
/// Right family: numerator factors with scale < 0.
pub(crate) fn pole_boundaries(terms: &[KernelTerm]) -> (f64, f64) {
    let mut left = f64::NEG_INFINITY;
    let mut right = f64::INFINITY;
    for t in terms {
        if t.power <= 0 {
            continue; // denominators have no poles
        }
        if t.scale > 0.0 {
            left = left.max(-t.shift / t.scale);
        } else if t.scale < 0.0 {
            right = right.min(t.shift / (-t.scale));
        }
    }
    (left, right)
}

pub(crate) fn auto_offset(left: f64, right: f64) -> Result<f64> {
    if left >= right {
        return Err(Error::ContourSeparation { left, right });
    }
    Ok(match (left.is_finite(), right.is_finite()) {
        (true, true) => 0.5 * (left + right),
        (true, false) => left + 1.0,
        (false, true) => right - 1.0,
        (false, false) => 0.0,
    })
}

/// Composite Gauss-Legendre nodes/weights on [0, t]: short panels keep the
/// Bernstein ellipse wide even when kernel poles sit within O(1) of the
/// contour, where a single long panel converges very slowly.
fn composite_nodes(t: f64, n: usize) -> Vec<(f64, f64)> {
    let panels = (t / 5.0).ceil().max(1.0) as usize;
    let per = (n.div_ceil(panels)).max(8);
    let (xs, ws) = gauss_legendre(per);
    let h = t / panels as f64;
    let mut out = Vec::with_capacity(per * panels);
    for p in 0..panels {
        let a = p as f64 * h;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

struct Pass {
    value: Scaled,
    tail_ratio: f64,
    /// total absolute node mass at the value's log scale; when the folded
    /// sum cancels below the f64 floor of this mass the integral is
    /// numerically zero at that scale
    abs_mass: f64,
}

impl Pass {
    fn cancelled_to_zero(&self) -> bool {
        self.value.mantissa.abs() <= 1e-13 * self.abs_mass
    }
}

/// Univariate Mellin-Barnes integral (1/2*pi*i) int K(s) z^{-s} ds along
/// Re(s) = offset, exploiting conjugate symmetry (real parameters, z > 0).
pub fn mellin_barnes(terms: &[KernelTerm], z: f64, cfg: &ContourConfig) -> Result<Scaled> {
    cfg.validate()?;
    if !(z > 0.0) {
        return Err(Error::Domain(format!("argument must be positive (got {z})")));
    }
    let (left, right) = pole_boundaries(terms);
    // explicit offsets are trusted: residue-shifted contours deliberately
    // sit outside the default pole separation
    let c = match cfg.offset {
        Some(c) => c,
        None => auto_offset(left, right)?,
    };
    let ln_z = z.ln();

    let pass = |t: f64, n: usize| -> Result<Pass> {
        let nodes = composite_nodes(t, n);
        let mut logs = Vec::with_capacity(nodes.len());
        let mut max_re = f64::NEG_INFINITY;
        for &(y, _) in &nodes {
            let s = Complex64::new(c, y);
            let li = log_kernel(terms, s)? - s * ln_z;
            max_re = max_re.max(li.re);
            logs.push(li);
        }
        let mut sum = Complex64::new(0.0, 0.0);
        let mut mass = 0.0f64;
        let mut max_node = 0.0f64;
        let mut last_node = 0.0f64;
        let mut last_y = f64::NEG_INFINITY;
        for (li, &(y, w)) in logs.iter().zip(&nodes) {
            let v = (li - max_re).exp() * w;
            sum += v;
            let mag = v.norm();
            mass += mag;
            max_node = max_node.max(mag);
            if y > last_y {
                last_y = y;
                last_node = mag;
            }
        }
        // (1/2 pi i) * i dy over [-T,T] = (1/pi) Re of the upper half
        let mantissa = sum.re / std::f64::consts::PI;
        Ok(Pass {
            value: Scaled {
                mantissa,
                log_scale: max_re,
            },
            tail_ratio: last_node / max_node.max(1e-300),
            abs_mass: mass / std::f64::consts::PI,
        })
    };

    let mut t = cfg.half_height;
    let mut n = cfg.nodes;
    let mut prev = pass(t, n)?;
    let mut last_rel = f64::INFINITY;
    for _ in 0..cfg.max_refinements {
        if prev.tail_ratio > cfg.rel_tol {
            t *= 2.0;
        }
        n *= 2;
        let cur = pass(t, n)?;
        // compare on a common log scale
        let d = (cur.value.mantissa
            - prev.value.mantissa * (prev.value.log_scale - cur.value.log_scale).exp())
        .abs();
        last_rel = d / cur.value.mantissa.abs().max(1e-300);
        if cur.tail_ratio <= cfg.rel_tol
            && (last_rel <= cfg.rel_tol
                // the difference sits at the roundoff floor of the summed
                // node mass: cancellation-limited, best attainable accuracy
                || d <= 1e-13 * cur.abs_mass
                || (cur.cancelled_to_zero() && prev.cancelled_to_zero()))
        {
            return Ok(cur.value);
        }
        prev = cur;
    }
    Err(Error::Convergence {
        refinements: cfg.max_refinements,
        last_rel,
    })
}

/// Bivariate Mellin-Barnes integral
/// (1/2*pi*i)^2 int int Gamma(j0 + ju*u + jv*v) K1(u) K2(v) z1^u z2^v du dv
/// along Re(u) = cu, Re(v) = cv.
pub struct BivariateKernel {
    pub kernel_u: Vec<KernelTerm>,
    pub kernel_v: Vec<KernelTerm>,
    /// (j0, ju, jv) of the joint gamma factor
    pub joint: (f64, f64, f64),
    pub offset_u: Option<f64>,
    pub offset_v: Option<f64>,
    /// overall sign carried by the construction (capacity kernels are -Gamma(u))
    pub sign: f64,
}

impl BivariateKernel {
    /// Pole boundaries under the z^{+u} orientation: numerator scale < 0
    /// gives a right family at shift/|scale|, scale > 0 a left family.
    fn boundaries(terms: &[KernelTerm]) -> (f64, f64) {
        let mut left = f64::NEG_INFINITY;
        let mut right = f64::INFINITY;
        for t in terms {
            if t.power <= 0 {
                continue;
            }
            if t.scale < 0.0 {
                right = right.min(t.shift / (-t.scale));
            } else if t.scale > 0.0 {
                left = left.max(-t.shift / t.scale);
            }
        }
        (left, right)
    }

    fn offsets(&self) -> Result<(f64, f64)> {
        let (lu, ru) = Self::boundaries(&self.kernel_u);
        let (lv, rv) = Self::boundaries(&self.kernel_v);
        let (j0, ju, jv) = self.joint;
        let cv = match self.offset_v {
            Some(c) => c,
            None => {
                if rv.is_finite() {
                    if lv.is_finite() {
                        0.5 * (lv + rv)
                    } else {
                        rv - 0.25
                    }
                } else {
                    0.0
                }
            }
        };
        if cv <= lv || cv >= rv {
            return Err(Error::ContourSeparation { left: lv, right: rv });
        }
        // joint gamma constrains u given cv (our instances have ju < 0, jv > 0)
        let ru_eff = if ju < 0.0 {
            ru.min((j0 + jv * cv) / (-ju))
        } else {
            ru
        };
        let cu = match self.offset_u {
            Some(c) => c,
            None => {
                if lu.is_finite() {
                    0.5 * (lu + ru_eff)
                } else {
                    ru_eff - 0.5
                }
            }
        };
        if cu <= lu || cu >= ru_eff {
            return Err(Error::ContourSeparation {
                left: lu,
                right: ru_eff,
            });
        }
        if j0 + ju * cu + jv * cv <= 0.0 {
            return Err(Error::ContourSeparation {
                left: cu,
                right: cv,
            });
        }
        Ok((cu, cv))
    }

    pub fn evaluate(&self, z1: f64, z2: f64, cfg: &ContourConfig) -> Result<Scaled> {
        cfg.validate()?;
        if !(z1 > 0.0) || !(z2 > 0.0) {
            return Err(Error::Domain(format!(
                "bivariate arguments must be positive (got {z1}, {z2})"
            )));
        }
        let (cu, cv) = self.offsets()?;
        let (j0, ju, jv) = self.joint;
        let ln_z1 = z1.ln();
        let ln_z2 = z2.ln();

        let pass = |t: f64, n: usize| -> Result<Pass> {
            // conjugating both (Im u, Im v) conjugates the integrand: restrict
            // Im u >= 0 and double the real part.
            let half = composite_nodes(t, n / 2);
            let y_edge = t - t / (2.0 * (t / 5.0).ceil().max(1.0)); // outer panel
            let u_nodes: Vec<(Complex64, f64, bool)> = half
                .iter()
                .map(|&(y, w)| (Complex64::new(cu, y), w, y >= y_edge))
                .collect();
            let mut v_nodes: Vec<(Complex64, f64, bool)> = Vec::with_capacity(half.len() * 2);
            for &(y, w) in &half {
                v_nodes.push((Complex64::new(cv, y), w, y >= y_edge));
                v_nodes.push((Complex64::new(cv, -y), w, y >= y_edge));
            }
            let log_u: Vec<Complex64> = u_nodes
                .iter()
                .map(|(u, _, _)| Ok(log_kernel(&self.kernel_u, *u)? + u * ln_z1))
                .collect::<Result<_>>()?;
            let log_v: Vec<Complex64> = v_nodes
                .iter()
                .map(|(v, _, _)| Ok(log_kernel(&self.kernel_v, *v)? + v * ln_z2))
                .collect::<Result<_>>()?;

            let mut entries = Vec::with_capacity(u_nodes.len() * v_nodes.len());
            let mut max_re = f64::NEG_INFINITY;
            for (i, (u, wu, u_edge)) in u_nodes.iter().enumerate() {
                for (j, (v, wv, v_edge)) in v_nodes.iter().enumerate() {
                    let lj = complex_log_gamma(j0 + ju * u + jv * v)?;
                    let li = log_u[i] + log_v[j] + lj;
                    max_re = max_re.max(li.re);
                    entries.push((li, wu * wv, *u_edge || *v_edge));
                }
            }
            let mut sum = Complex64::new(0.0, 0.0);
            let mut mass = 0.0f64;
            let mut max_node = 0.0f64;
            let mut tail = 0.0f64;
            for (li, w, boundary) in entries {
                let v = (li - max_re).exp() * w;
                sum += v;
                let mag = v.norm();
                mass += mag;
                max_node = max_node.max(mag);
                if boundary {
                    tail = tail.max(mag);
                }
            }
            // (1/(2 pi i))^2 (i dy)(i dx) = (-1/(4 pi^2)) (i^2 dy dx)
            // = +1/(4 pi^2) dy dx; restricting Im u > 0 doubles the real part
            let mantissa = 2.0 * sum.re / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
                * self.sign;
            Ok(Pass {
                value: Scaled {
                    mantissa,
                    log_scale: max_re,
                },
                tail_ratio: tail / max_node.max(1e-300),
                abs_mass: mass / (2.0 * std::f64::consts::PI * std::f64::consts::PI),
            })
        };

        let mut t = cfg.half_height;
        let mut n = cfg.nodes;
        let mut prev = pass(t, n)?;
        let mut last_rel = f64::INFINITY;
        for _ in 0..cfg.max_refinements {
            if prev.tail_ratio > cfg.rel_tol {
                t *= 2.0;
            }
            n *= 2;
            let cur = pass(t, n)?;
            let d = (cur.value.mantissa
                - prev.value.mantissa * (prev.value.log_scale - cur.value.log_scale).exp())
            .abs();
            last_rel = d / cur.value.mantissa.abs().max(1e-300);
            if cur.tail_ratio <= cfg.rel_tol
                && (last_rel <= cfg.rel_tol
                    || d <= 1e-13 * cur.abs_mass
                    || (cur.cancelled_to_zero() && prev.cancelled_to_zero()))
            {
                return Ok(cur.value);
            }
            prev = cur;
        }
        Err(Error::Convergence {
            refinements: cfg.max_refinements,
            last_rel,
        })
    }
}
