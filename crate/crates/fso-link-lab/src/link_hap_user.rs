//! Second-hop (platform to user via the reflecting surface) statistics:
//! misalignment-loss densities, the composite channel density, and the SNR
//! metrics built on them (outage, average BER, ergodic capacity, moments).

use crate::error::{Error, Result};
use crate::link_ogs_hap::SnrValue;
use crate::scenario::{normalization_constant, Detection, LinkTwoParams};
use crate::specfun::contour::ContourConfig;
use crate::specfun::foxh::{fox_h_scaled, FoxHSpec};
use crate::specfun::gamma::ln_gamma;
use crate::specfun::bessel_i0;

/// Modulation family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationKind {
    Ook,
    Mqam(u32),
    Mpsk(u32),
}

/// Modulation parameters for the unified average-BER expression
/// delta_B sum_m I(p_B, q_Bm).
#[derive(Debug, Clone)]
pub struct ModulationScheme {
    pub kind: ModulationKind,
    pub delta_b: f64,
    pub p_b: f64,
    pub q_bm: Vec<f64>,
    pub detection: Detection,
}

impl ModulationScheme {
    pub fn new(kind: ModulationKind) -> Result<Self> {
        match kind {
            ModulationKind::Ook => Ok(Self {
                kind,
                delta_b: 1.0,
                p_b: 0.5,
                q_bm: vec![0.5],
                detection: Detection::ImDd,
            }),
            ModulationKind::Mpsk(m) => {
                check_order(m)?;
                let mf = m as f64;
                let bits = mf.log2();
                let n_b = (m / 4).max(1) as usize;
                let q_bm = (1..=n_b)
                    .map(|k| {
                        let s = ((2 * k - 1) as f64 * std::f64::consts::PI / mf).sin();
                        s * s * bits
                    })
                    .collect();
                Ok(Self {
                    kind,
                    delta_b: 2.0 / bits.max(2.0),
                    p_b: 0.5,
                    q_bm,
                    detection: Detection::Heterodyne,
                })
            }
            ModulationKind::Mqam(m) => {
                check_order(m)?;
                let root = (m as f64).sqrt();
                if root.fract() != 0.0 {
                    return Err(Error::Domain(format!(
                        "QAM order must be a perfect square (got {m})"
                    )));
                }
                let mf = m as f64;
                let bits = mf.log2();
                let n_b = (root / 2.0) as usize;
                let q_bm = (1..=n_b)
                    .map(|k| {
                        let j = (2 * k - 1) as f64;
                        3.0 * j * j * bits / (2.0 * (mf - 1.0))
                    })
                    .collect();
                Ok(Self {
                    kind,
                    delta_b: 4.0 / bits * (1.0 - 1.0 / root),
                    p_b: 0.5,
                    q_bm,
                    detection: Detection::Heterodyne,
                })
            }
        }
    }

    pub fn n_b(&self) -> usize {
        self.q_bm.len()
    }
}

fn check_order(m: u32) -> Result<()> {
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::Domain(format!(
            "constellation order must be a power of two >= 4 (got {m})"
        )));
    }
    Ok(())
}

/// One term of the misalignment series: weight
/// Gamma(1+2k) / (k! Gamma(1+k)) * ((1 - q^2) varpi / (4 q))^{2k}.
#[derive(Debug, Clone, Copy)]
pub struct SeriesTermWeight {
    pub k: usize,
    pub weight: f64,
}

/// Series weights for k = 0..=n_k.
pub fn series_weights(p: &LinkTwoParams, n_k: usize) -> Result<Vec<SeriesTermWeight>> {
    let base = (1.0 - p.q_g * p.q_g) * p.varpi / (4.0 * p.q_g);
    let mut out = Vec::with_capacity(n_k + 1);
    for k in 0..=n_k {
        let weight = if k == 0 {
            1.0
        } else if base == 0.0 {
            0.0
        } else {
            let kf = k as f64;
            (ln_gamma(1.0 + 2.0 * kf)? - ln_gamma(kf + 1.0)? - ln_gamma(1.0 + kf)?
                + 2.0 * kf * base.ln())
            .exp()
        };
        out.push(SeriesTermWeight { k, weight });
    }
    Ok(out)
}

fn norm_for(p: &LinkTwoParams, n_k: usize) -> Result<f64> {
    if n_k == p.n_k {
        Ok(p.norm_n)
    } else {
        normalization_constant(p.q_g, p.varpi, n_k)
    }
}

/// Exact misalignment-loss density on (0, A02].
pub fn gml_pdf_exact(h: f64, p: &LinkTwoParams) -> Result<f64> {
    if !(h > 0.0 && h <= p.a02) {
        return Err(Error::Domain(format!(
            "gml_pdf support is (0, {}] (got {h})",
            p.a02
        )));
    }
    let q2 = p.q_g * p.q_g;
    let ratio = h / p.a02;
    let i0 = bessel_i0(-(1.0 - q2) * p.varpi / (2.0 * p.q_g) * ratio.ln());
    Ok(p.varpi / p.a02 * ratio.powf(p.w() - 1.0) * i0)
}

/// Truncated-series misalignment-loss density (renormalized Bessel
/// expansion with n_k + 1 terms).
pub fn gml_pdf_approx(h: f64, p: &LinkTwoParams, n_k: usize) -> Result<f64> {
    if !(h > 0.0 && h <= p.a02) {
        return Err(Error::Domain(format!(
            "gml_pdf support is (0, {}] (got {h})",
            p.a02
        )));
    }
    let norm = norm_for(p, n_k)?;
    let q2 = p.q_g * p.q_g;
    let ratio = h / p.a02;
    let x = (1.0 - q2) * p.varpi / (4.0 * p.q_g) * ratio.ln();
    let mut sum = 0.0;
    for k in 0..=n_k {
        let kf = k as f64;
        let term = if k == 0 {
            1.0
        } else if x == 0.0 {
            0.0
        } else {
            (-ln_gamma(kf + 1.0)? - ln_gamma(1.0 + kf)? + 2.0 * kf * x.abs().ln()).exp()
        };
        sum += term;
    }
    Ok(p.varpi * norm / p.a02 * ratio.powf(p.w() - 1.0) * sum)
}

fn repeated(value: f64, count: usize) -> Vec<(f64, f64)> {
    std::iter::repeat((value, 1.0)).take(count).collect()
}

/// Composite channel density f_{h2}(h), h > 0: misalignment series of
/// Meijer-G terms convolving the turbulence and attenuation factors.
pub fn composite_pdf_h2(h: f64, p: &LinkTwoParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("composite pdf needs h > 0 (got {h})")));
    }
    let (a, b, w) = (p.gg.alpha, p.gg.beta, p.w());
    let z = a * b * h / (p.a02 * p.h_p2);
    let ln_pref =
        (p.varpi * p.norm_n).ln() - h.ln() - ln_gamma(a)? - ln_gamma(b)?;
    let cfg = ContourConfig::default();
    let mut total = 0.0;
    for t in series_weights(p, p.n_k)? {
        let reps = 2 * t.k + 1;
        let mut lower = vec![(a, 1.0), (b, 1.0)];
        lower.extend(repeated(w, reps));
        let spec = FoxHSpec {
            m: 2 * t.k + 3,
            n: 0,
            upper: repeated(w + 1.0, reps),
            lower,
        };
        total += t.weight * fox_h_scaled(&spec, z, &cfg)?.value_scaled(ln_pref);
    }
    Ok(total.max(0.0))
}

fn snr_argument(p: &LinkTwoParams, gamma: f64, gamma_bar: f64) -> f64 {
    p.gg.alpha * p.gg.beta / (p.a02 * p.h_p2) * (gamma / gamma_bar).powf(1.0 / p.r2)
}

/// Second-hop SNR density.
pub fn snr_pdf(gamma: SnrValue, p: &LinkTwoParams, gamma_bar: SnrValue) -> Result<f64> {
    if !(gamma_bar.linear() > 0.0) {
        return Err(Error::Domain("gamma_bar must be positive".into()));
    }
    let g = gamma.linear();
    if g == 0.0 {
        return Ok(0.0);
    }
    let (a, b, w) = (p.gg.alpha, p.gg.beta, p.w());
    let z = snr_argument(p, g, gamma_bar.linear());
    let ln_pref = (p.varpi * p.norm_n / p.r2).ln() - g.ln() - ln_gamma(a)? - ln_gamma(b)?;
    let cfg = ContourConfig::default();
    let mut total = 0.0;
    for t in series_weights(p, p.n_k)? {
        let reps = 2 * t.k + 1;
        let mut lower = vec![(a, 1.0), (b, 1.0)];
        lower.extend(repeated(w, reps));
        let spec = FoxHSpec {
            m: 2 * t.k + 3,
            n: 0,
            upper: repeated(w + 1.0, reps),
            lower,
        };
        total += t.weight * fox_h_scaled(&spec, z, &cfg)?.value_scaled(ln_pref);
    }
    Ok(total.max(0.0))
}

/// Second-hop SNR CDF.
pub fn snr_cdf(gamma: SnrValue, p: &LinkTwoParams, gamma_bar: SnrValue) -> Result<f64> {
    if !(gamma_bar.linear() > 0.0) {
        return Err(Error::Domain("gamma_bar must be positive".into()));
    }
    if gamma.linear() == 0.0 {
        return Ok(0.0);
    }
    let (a, b, w) = (p.gg.alpha, p.gg.beta, p.w());
    let z = snr_argument(p, gamma.linear(), gamma_bar.linear());
    let ln_pref = (p.varpi * p.norm_n).ln() - ln_gamma(a)? - ln_gamma(b)?;
    let cfg = ContourConfig::default();
    let mut sum = 0.0;
    for t in series_weights(p, p.n_k)? {
        let reps = 2 * t.k + 1;
        let mut upper = vec![(1.0, 1.0)];
        upper.extend(repeated(w + 1.0, reps));
        let mut lower = vec![(0.0, 1.0), (a, 1.0), (b, 1.0)];
        lower.extend(repeated(w, reps));
        let spec = FoxHSpec {
            m: 2 * t.k + 4,
            n: 0,
            upper,
            lower,
        };
        sum += t.weight * fox_h_scaled(&spec, z, &cfg)?.value_scaled(ln_pref);
    }
    let f = 1.0 - sum;
    if !(-1e-9..=1.0 + 1e-9).contains(&f) {
        return Err(Error::Numerical(format!(
            "second-hop CDF {f} outside [0,1] beyond 1e-9 at gamma = {}",
            gamma.linear()
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

fn ber_integral(p_b: f64, q_bm: f64, p: &LinkTwoParams, gamma_bar: f64) -> Result<f64> {
    let (a, b, w, r2) = (p.gg.alpha, p.gg.beta, p.w(), p.r2);
    let x2 = a * b / (p.a02 * p.h_p2);
    let z = x2.powf(r2) / (gamma_bar * q_bm);
    let ln_pref = (p.varpi * p.norm_n * r2 / 2.0).ln()
        - ln_gamma(p_b)?
        - ln_gamma(a)?
        - ln_gamma(b)?;
    let cfg = ContourConfig::default();
    let mut sum = 0.0;
    for t in series_weights(p, p.n_k)? {
        let reps = 2 * t.k + 1;
        let mut upper = vec![(1.0 - p_b, 1.0), (1.0, r2)];
        upper.extend(std::iter::repeat((w + 1.0, r2)).take(reps));
        let mut lower = vec![(0.0, r2), (a, r2), (b, r2)];
        lower.extend(std::iter::repeat((w, r2)).take(reps));
        let spec = FoxHSpec {
            m: 2 * t.k + 4,
            n: 1,
            upper,
            lower,
        };
        sum += t.weight * fox_h_scaled(&spec, z, &cfg)?.value_scaled(ln_pref);
    }
    Ok(0.5 - sum)
}

/// Average BER of the second hop for the given modulation.
pub fn avg_ber(
    scheme: &ModulationScheme,
    p: &LinkTwoParams,
    gamma_bar: SnrValue,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    if !(gamma_bar.linear() > 0.0) {
        return Err(Error::Domain("gamma_bar must be positive".into()));
    }
    let mut total = 0.0;
    for &q in &scheme.q_bm {
        total += ber_integral(scheme.p_b, q, p, gamma_bar.linear())?;
    }
    total *= scheme.delta_b;
    if total > 0.5 + 1e-6 {
        warnings.push(format!("average BER {total} above 1/2; clamped"));
    }
    Ok(total.clamp(0.0, 0.5))
}

/// Ergodic capacity E[ln(1 + c0 gamma)] of the second hop, in nats.
pub fn capacity(p: &LinkTwoParams, gamma_bar: SnrValue, c0: f64) -> Result<f64> {
    if !(gamma_bar.linear() > 0.0 && c0 > 0.0) {
        return Err(Error::Domain("capacity needs gamma_bar, c0 > 0".into()));
    }
    let (a, b, w, r2) = (p.gg.alpha, p.gg.beta, p.w(), p.r2);
    let x2 = a * b / (p.a02 * p.h_p2);
    let z = x2.powf(r2) / (gamma_bar.linear() * c0);
    let ln_pref = (p.varpi * p.norm_n).ln() - ln_gamma(a)? - ln_gamma(b)?;
    let cfg = ContourConfig::default();
    let mut sum = 0.0;
    for t in series_weights(p, p.n_k)? {
        let reps = 2 * t.k + 1;
        // kernel Gamma(1-u) Gamma(u)^2 / Gamma(1+u) from the Mellin transform
        // of ln(1 + c0 gamma), times the channel kernel at r2 u
        let mut upper = vec![(0.0, 1.0), (1.0, 1.0)];
        upper.extend(std::iter::repeat((w + 1.0, r2)).take(reps));
        let mut lower = vec![(0.0, 1.0), (0.0, 1.0), (a, r2), (b, r2)];
        lower.extend(std::iter::repeat((w, r2)).take(reps));
        let spec = FoxHSpec {
            m: 2 * t.k + 5,
            n: 1,
            upper,
            lower,
        };
        sum += t.weight * fox_h_scaled(&spec, z, &cfg)?.value_scaled(ln_pref);
    }
    Ok(sum.max(0.0))
}

/// s-th moment of the second-hop SNR (closed form; s >= 0).
pub fn moment(s: f64, p: &LinkTwoParams, gamma_bar: SnrValue) -> Result<f64> {
    if !(gamma_bar.linear() > 0.0) {
        return Err(Error::Domain("gamma_bar must be positive".into()));
    }
    let (a, b, w, r2) = (p.gg.alpha, p.gg.beta, p.w(), p.r2);
    let sr2 = s * r2;
    if sr2 + a <= 0.0 || sr2 + b <= 0.0 || sr2 + w <= 0.0 {
        return Err(Error::Domain(format!(
            "moment order {s} makes a gamma argument non-positive"
        )));
    }
    let x_inv = p.a02 * p.h_p2 * gamma_bar.linear().powf(1.0 / r2) / (a * b);
    let ln_common = (p.varpi * p.norm_n).ln() - ln_gamma(a)? - ln_gamma(b)?
        + ln_gamma(sr2 + a)?
        + ln_gamma(sr2 + b)?
        + sr2 * x_inv.ln();
    let base = (1.0 - p.q_g * p.q_g) * p.varpi / (4.0 * p.q_g);
    let mut total = 0.0;
    for k in 0..=p.n_k {
        let kf = k as f64;
        let ln_ratio = if k == 0 {
            0.0
        } else if base == 0.0 {
            f64::NEG_INFINITY
        } else {
            ln_gamma(1.0 + 2.0 * kf)? - ln_gamma(kf + 1.0)? - ln_gamma(1.0 + kf)?
                + 2.0 * kf * base.ln()
        };
        total += (ln_common + ln_ratio - (1.0 + 2.0 * kf) * (sr2 + w).ln()).exp();
    }
    Ok(total)
}
