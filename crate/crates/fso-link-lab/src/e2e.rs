//! End-to-end statistics of the relayed link: fixed-gain SNR combining,
//! bivariate contour-integral CDF/PDF, elementary high-SNR expansions,
//! diversity order, average BER, ergodic capacity, moments, and the
//! decode-and-forward outage baseline.

use crate::error::{Error, Result};
use crate::link_hap_user::{series_weights, ModulationScheme};
use crate::link_ogs_hap::{self, SnrValue};
use crate::scenario::{LinkOneParams, LinkTwoParams};
use crate::specfun::contour::ContourConfig;
use crate::specfun::foxh::{fox_h_bivariate_scaled, BivariateFoxHSpec};
use crate::specfun::gamma::{gamma as gfun, ln_gamma};
use crate::specfun::contour::mellin_barnes;
use crate::specfun::KernelTerm;

/// Fixed-gain relay configuration.
#[derive(Debug, Clone, Copy)]
pub struct RelayConfig {
    pub c: f64,
    pub gamma_bar_1: SnrValue,
    pub gamma_bar_2: SnrValue,
}

impl RelayConfig {
    pub fn new(c: f64, gamma_bar_1: SnrValue, gamma_bar_2: SnrValue) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("relay gain constant must be > 0 (got {c})")));
        }
        if !(gamma_bar_1.linear() > 0.0 && gamma_bar_2.linear() > 0.0) {
            return Err(Error::Domain("average SNRs must be positive".into()));
        }
        Ok(Self {
            c,
            gamma_bar_1,
            gamma_bar_2,
        })
    }

    /// Both hops driven at the same average SNR, as in the figure sweeps.
    pub fn locked(c: f64, gamma_bar: SnrValue) -> Result<Self> {
        Self::new(c, gamma_bar, gamma_bar)
    }
}

/// Diversity-order candidates with the binding minimum.
#[derive(Debug, Clone)]
pub struct DiversityReport {
    pub candidates: [(&'static str, f64); 6],
    pub order: f64,
    pub label: &'static str,
}

/// Instantaneous combined SNR gamma1 gamma2 / (gamma2 + C).
pub fn combine_snr(g1: SnrValue, g2: SnrValue, c: f64) -> Result<SnrValue> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("relay gain constant must be > 0 (got {c})")));
    }
    SnrValue::from_linear(g1.linear() * g2.linear() / (g2.linear() + c))
}

fn x1(p1: &LinkOneParams) -> f64 {
    p1.gg.alpha * p1.gg.beta / (p1.a01 * p1.h_p1)
}

fn x2(p2: &LinkTwoParams) -> f64 {
    p2.gg.alpha * p2.gg.beta / (p2.a02 * p2.h_p2)
}

fn ln_prefactor(p1: &LinkOneParams, p2: &LinkTwoParams) -> Result<f64> {
    Ok(p1.eta_s2.ln() + (p2.varpi * p2.norm_n).ln()
        - ln_gamma(p1.gg.alpha)?
        - ln_gamma(p1.gg.beta)?
        - ln_gamma(p2.gg.alpha)?
        - ln_gamma(p2.gg.beta)?)
}

#[derive(Clone, Copy)]
enum UKernel {
    Cdf,
    Pdf,
    Ber(f64),
    Capacity,
}

fn bivariate_spec(p1: &LinkOneParams, p2: &LinkTwoParams, k: usize, u: UKernel) -> BivariateFoxHSpec {
    let (e2, a1, b1, r1) = (p1.eta_s2, p1.gg.alpha, p1.gg.beta, p1.r1);
    let (a2, b2, w, r2) = (p2.gg.alpha, p2.gg.beta, p2.w(), p2.r2);
    let mut ku = vec![
        KernelTerm::num(e2, -r1),
        KernelTerm::num(a1, -r1),
        KernelTerm::num(b1, -r1),
        KernelTerm::den(1.0 + e2, -r1),
    ];
    match u {
        UKernel::Cdf => ku.push(KernelTerm::den(1.0, -1.0)),
        UKernel::Pdf => ku.push(KernelTerm::den(0.0, -1.0)),
        UKernel::Ber(p_b) => {
            ku.push(KernelTerm::den(1.0, -1.0));
            ku.push(KernelTerm::num(p_b, 1.0));
        }
        UKernel::Capacity => {
            ku.push(KernelTerm::den(1.0, -1.0));
            ku.push(KernelTerm::num(1.0, 1.0));
            ku.push(KernelTerm::num(0.0, -1.0));
        }
    }
    let reps = (2 * k + 1) as i32;
    let kv = vec![
        KernelTerm::num(a2, -r2),
        KernelTerm::num(b2, -r2),
        KernelTerm::num(0.0, -1.0),
        KernelTerm::num(w, -r2).pow(reps),
        KernelTerm::den(1.0 + w, -r2).pow(reps),
    ];
    let mut spec = BivariateFoxHSpec::new(ku, kv);
    if matches!(u, UKernel::Capacity) {
        // the Gamma(u) pole at the origin must lie right of the u contour
        spec.offset_u = Some(-0.5);
        spec.offset_v = Some(-0.25);
    }
    spec
}

fn series_sum(
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    u: UKernel,
    z1: f64,
    z2: f64,
) -> Result<f64> {
    let ln_pref = ln_prefactor(p1, p2)?;
    let cfg = ContourConfig::default();
    let mut sum = 0.0;
    for t in series_weights(p2, p2.n_k)? {
        let spec = bivariate_spec(p1, p2, t.k, u);
        sum += t.weight * fox_h_bivariate_scaled(&spec, z1, z2, &cfg)?.value_scaled(ln_pref);
    }
    Ok(sum)
}

/// End-to-end SNR CDF.
pub fn e2e_cdf(
    gamma: SnrValue,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
) -> Result<f64> {
    if gamma.linear() == 0.0 {
        return Ok(0.0);
    }
    let z1 = x1(p1).powf(p1.r1) * gamma.linear() / relay.gamma_bar_1.linear();
    let z2 = x2(p2).powf(p2.r2) * relay.c / relay.gamma_bar_2.linear();
    let f = 1.0 - series_sum(p1, p2, UKernel::Cdf, z1, z2)?;
    if !(-1e-9..=1.0 + 1e-9).contains(&f) {
        return Err(Error::Numerical(format!(
            "end-to-end CDF {f} outside [0,1] beyond 1e-9 at gamma = {}",
            gamma.linear()
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// End-to-end SNR density.
pub fn e2e_pdf(
    gamma: SnrValue,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
) -> Result<f64> {
    let g = gamma.linear();
    if g == 0.0 {
        return Ok(0.0);
    }
    let z1 = x1(p1).powf(p1.r1) * g / relay.gamma_bar_1.linear();
    let z2 = x2(p2).powf(p2.r2) * relay.c / relay.gamma_bar_2.linear();
    Ok((series_sum(p1, p2, UKernel::Pdf, z1, z2)? / g).max(0.0))
}

fn odd_pow(base: f64, k: usize) -> f64 {
    base.powi(2 * k as i32 + 1)
}

fn degenerate_guard(label: &str, v: f64) -> Result<f64> {
    if v.abs() < 1e-9 {
        return Err(Error::DegenerateExponent(format!(
            "{label} vanishes; exponents too close for the elementary expansion"
        )));
    }
    Ok(v)
}

/// One residue of the double contour integral: `coeff * base^exponent`
/// where the base is z1 for single-hop poles and z1 z2 for the pole pairs
/// pinned by the joint gamma factor.
struct ExpansionTerm {
    coeff: f64,
    exponent: f64,
    cross: bool,
}

/// Leading residues of the double contour integral for series index k:
/// three single-hop exponents (eta_s^2, beta1, alpha1 over r1) in z1 and
/// six cross exponents (the same three plus W, alpha2, beta2 over r2) in
/// z1 z2. Double-residue terms from the joint gamma come out with the
/// rational 1/(eta_s^2 - x) in place of a gamma factor and with a minus
/// sign on the first-hop exponent family.
fn expansion_terms(
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    k: usize,
) -> Result<Vec<ExpansionTerm>> {
    let (e2, a1, b1, r1) = (p1.eta_s2, p1.gg.alpha, p1.gg.beta, p1.r1);
    let (a2, b2, w, r2) = (p2.gg.alpha, p2.gg.beta, p2.w(), p2.r2);
    let ga2 = gfun(a2)?;
    let gb2 = gfun(b2)?;
    let e2_b1 = degenerate_guard("eta_s^2 - beta1", e2 - b1)?;
    let e2_a1 = degenerate_guard("eta_s^2 - alpha1", e2 - a1)?;
    let mut terms = Vec::with_capacity(9);
    // single-hop residues at u = eta_s^2/r1, beta1/r1, alpha1/r1
    terms.push(ExpansionTerm {
        coeff: gfun(a1 - e2)? * gfun(b1 - e2)? * ga2 * gb2 / (e2 * odd_pow(w, k)),
        exponent: e2 / r1,
        cross: false,
    });
    terms.push(ExpansionTerm {
        coeff: gfun(a1 - b1)? * ga2 * gb2 / (b1 * e2_b1 * odd_pow(w, k)),
        exponent: b1 / r1,
        cross: false,
    });
    terms.push(ExpansionTerm {
        coeff: gfun(b1 - a1)? * ga2 * gb2 / (a1 * e2_a1 * odd_pow(w, k)),
        exponent: a1 / r1,
        cross: false,
    });
    // double residues pinned at v = u by the joint gamma, first-hop family
    terms.push(ExpansionTerm {
        coeff: -gfun(a1 - e2)? * gfun(b1 - e2)? * gfun(a2 - r2 * e2 / r1)?
            * gfun(b2 - r2 * e2 / r1)?
            / (e2 * odd_pow(degenerate_guard("W - r2 eta_s^2/r1", w - r2 * e2 / r1)?, k)),
        exponent: e2 / r1,
        cross: true,
    });
    terms.push(ExpansionTerm {
        coeff: -gfun(a1 - b1)? * gfun(a2 - r2 * b1 / r1)? * gfun(b2 - r2 * b1 / r1)?
            / (b1 * e2_b1 * odd_pow(degenerate_guard("W - r2 beta1/r1", w - r2 * b1 / r1)?, k)),
        exponent: b1 / r1,
        cross: true,
    });
    terms.push(ExpansionTerm {
        coeff: -gfun(b1 - a1)? * gfun(a2 - r2 * a1 / r1)? * gfun(b2 - r2 * a1 / r1)?
            / (a1 * e2_a1 * odd_pow(degenerate_guard("W - r2 alpha1/r1", w - r2 * a1 / r1)?, k)),
        exponent: a1 / r1,
        cross: true,
    });
    // double residues pinned at v = u, second-hop family; the W pole has
    // order 2k+1 and is kept through its leading derivative term only
    terms.push(ExpansionTerm {
        coeff: (2 * k + 1) as f64
            * gfun(a1 - r1 * w / r2)?
            * gfun(b1 - r1 * w / r2)?
            * gfun(a2 - w)?
            * gfun(b2 - w)?
            / (degenerate_guard("eta_s^2 - r1 W/r2", e2 - r1 * w / r2)? * w),
        exponent: w / r2,
        cross: true,
    });
    terms.push(ExpansionTerm {
        coeff: gfun(a1 - r1 * a2 / r2)? * gfun(b1 - r1 * a2 / r2)? * gfun(b2 - a2)?
            / (a2
                * degenerate_guard("eta_s^2 - r1 alpha2/r2", e2 - r1 * a2 / r2)?
                * odd_pow(degenerate_guard("W - alpha2", w - a2)?, k)),
        exponent: a2 / r2,
        cross: true,
    });
    terms.push(ExpansionTerm {
        coeff: gfun(a1 - r1 * b2 / r2)? * gfun(b1 - r1 * b2 / r2)? * gfun(a2 - b2)?
            / (b2
                * degenerate_guard("eta_s^2 - r1 beta2/r2", e2 - r1 * b2 / r2)?
                * odd_pow(degenerate_guard("W - beta2", w - b2)?, k)),
        exponent: b2 / r2,
        cross: true,
    });
    Ok(terms)
}

/// Elementary high-SNR expansion of the end-to-end CDF: the leading
/// residues of the double contour integral, evaluated per series index k.
pub fn e2e_cdf_asymptotic(
    gamma: SnrValue,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
) -> Result<f64> {
    let g = gamma.linear();
    if g == 0.0 {
        return Ok(0.0);
    }
    let z1 = x1(p1).powf(p1.r1) * g / relay.gamma_bar_1.linear();
    // cross terms carry the product of both hop arguments
    let zc = z1 * x2(p2).powf(p2.r2) * relay.c / relay.gamma_bar_2.linear();
    let pref = ln_prefactor(p1, p2)?.exp();
    let mut total = 0.0;
    for t in series_weights(p2, p2.n_k)? {
        for term in expansion_terms(p1, p2, t.k)? {
            let base = if term.cross { zc } else { z1 };
            total += t.weight * term.coeff * base.powf(term.exponent);
        }
    }
    Ok((pref * total).clamp(0.0, 1.0))
}

/// Exponent candidates and the resulting diversity order.
pub fn diversity_order(p1: &LinkOneParams, p2: &LinkTwoParams) -> DiversityReport {
    let candidates = [
        ("alpha1/r1", p1.gg.alpha / p1.r1),
        ("beta1/r1", p1.gg.beta / p1.r1),
        ("eta_s^2/r1", p1.eta_s2 / p1.r1),
        ("alpha2/r2", p2.gg.alpha / p2.r2),
        ("beta2/r2", p2.gg.beta / p2.r2),
        ("W/r2", p2.w() / p2.r2),
    ];
    let (label, order) = candidates
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    DiversityReport {
        candidates,
        order,
        label,
    }
}

/// Average BER of the relayed link for the given modulation.
pub fn e2e_avg_ber(
    scheme: &ModulationScheme,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let z2 = x2(p2).powf(p2.r2) * relay.c / relay.gamma_bar_2.linear();
    let half_over_gp = 0.5 / ln_gamma(scheme.p_b)?.exp();
    let mut total = 0.0;
    for &q in &scheme.q_bm {
        let z1 = x1(p1).powf(p1.r1) / (relay.gamma_bar_1.linear() * q);
        let v = series_sum(p1, p2, UKernel::Ber(scheme.p_b), z1, z2)?;
        total += 0.5 - half_over_gp * v;
    }
    total *= scheme.delta_b;
    if total > 0.5 + 1e-6 {
        warnings.push(format!("average BER {total} above 1/2; clamped"));
    }
    Ok(total.clamp(0.0, 0.5))
}

/// Elementary high-SNR expansion of the average BER.
pub fn e2e_avg_ber_asymptotic(
    scheme: &ModulationScheme,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
) -> Result<f64> {
    let p_b = scheme.p_b;
    let pref = (ln_prefactor(p1, p2)? - ln_gamma(p_b)?).exp() / 2.0;
    let mut ber = 0.0;
    for &q in &scheme.q_bm {
        // the extra Gamma(p_B + u) in the BER kernel scales each residue
        // by its value at the residue location
        let y1 = x1(p1).powf(p1.r1) / (relay.gamma_bar_1.linear() * q);
        let yc = y1 * x2(p2).powf(p2.r2) * relay.c / relay.gamma_bar_2.linear();
        let mut total = 0.0;
        for t in series_weights(p2, p2.n_k)? {
            for term in expansion_terms(p1, p2, t.k)? {
                let base = if term.cross { yc } else { y1 };
                total += t.weight
                    * term.coeff
                    * gfun(p_b + term.exponent)?
                    * base.powf(term.exponent);
            }
        }
        ber += pref * total;
    }
    Ok((scheme.delta_b * ber).clamp(0.0, 0.5))
}

/// Ergodic capacity E[ln(1 + c0 gamma)] of the relayed link, in nats.
pub fn e2e_capacity(
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
    c0: f64,
) -> Result<f64> {
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("c0 must be positive (got {c0})")));
    }
    let z1 = x1(p1).powf(p1.r1) / (relay.gamma_bar_1.linear() * c0);
    let z2 = x2(p2).powf(p2.r2) * relay.c / relay.gamma_bar_2.linear();
    Ok(series_sum(p1, p2, UKernel::Capacity, z1, z2)?.max(0.0))
}

/// s-th moment of the end-to-end SNR (s >= 0).
pub fn e2e_moment(
    s: f64,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    relay: &RelayConfig,
) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("moment order must be >= 0 (got {s})")));
    }
    let (e2, a1, b1, r1) = (p1.eta_s2, p1.gg.alpha, p1.gg.beta, p1.r1);
    let (a2, b2, w, r2) = (p2.gg.alpha, p2.gg.beta, p2.w(), p2.r2);
    let sr1 = s * r1;
    let z2 = x2(p2).powf(r2) * relay.c / relay.gamma_bar_2.linear();
    // hop-one gammas and the gamma / gamma_bar scaling, with the 1/Gamma(s)
    // held back so it can cancel against the residue extracted below
    let ln_common = ln_prefactor(p1, p2)? + ln_gamma(e2 + sr1)? + ln_gamma(a1 + sr1)?
        + ln_gamma(b1 + sr1)?
        - ln_gamma(1.0 + e2 + sr1)?
        - sr1 * x1(p1).ln()
        + s * relay.gamma_bar_1.linear().ln();
    let ln_gs = if s == 0.0 { f64::INFINITY } else { ln_gamma(s)? };
    // the inner contour in w pinches between the Gamma(w) pole at 0 and the
    // Gamma(s - w) pole at s; pull out the w = 0 residue and integrate on a
    // contour just left of the origin
    let shift = -0.5 * (1.0f64).min(a2 / r2).min(b2 / r2).min(w / r2);
    let cfg = ContourConfig {
        offset: Some(shift),
        ..ContourConfig::default()
    };
    let ln_res = ln_gamma(a2)? + ln_gamma(b2)?;
    let mut total = 0.0;
    for t in series_weights(p2, p2.n_k)? {
        let reps = (2 * t.k + 1) as i32;
        let residue = (ln_res - (2 * t.k + 1) as f64 * w.ln()).exp();
        let remainder = if s == 0.0 {
            0.0
        } else {
            let terms = vec![
                KernelTerm::num(s, -1.0),
                KernelTerm::num(0.0, 1.0),
                KernelTerm::num(a2, r2),
                KernelTerm::num(b2, r2),
                KernelTerm::num(w, r2).pow(reps),
                KernelTerm::den(1.0 + w, r2).pow(reps),
            ];
            mellin_barnes(&terms, z2, &cfg)?.value_scaled(-ln_gs)
        };
        total += t.weight * (residue + remainder);
    }
    Ok(ln_common.exp() * total)
}

/// Decode-and-forward outage baseline: the link is up only when both hops
/// individually clear the threshold.
pub fn df_outage_reference(
    gamma_th: SnrValue,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    gamma_bar_1: SnrValue,
    gamma_bar_2: SnrValue,
) -> Result<f64> {
    let f1 = link_ogs_hap::snr_cdf(gamma_th, p1, gamma_bar_1)?;
    let f2 = crate::link_hap_user::snr_cdf(gamma_th, p2, gamma_bar_2)?;
    Ok(1.0 - (1.0 - f1) * (1.0 - f2))
}

/// Fit the relay gain constant so analytic outage tracks reference outage
/// values (for example from a Monte Carlo run). Minimizes the squared
/// log-outage error over C by golden-section search.
pub fn calibrate_c(
    gamma_th: SnrValue,
    p1: &LinkOneParams,
    p2: &LinkTwoParams,
    points: &[(SnrValue, f64)],
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let objective = |ln_c: f64| -> Result<f64> {
        let c = ln_c.exp();
        let mut err = 0.0;
        for &(gbar, op) in points {
            let relay = RelayConfig::new(c, gbar, gbar)?;
            let f = e2e_cdf(gamma_th, p1, p2, &relay)?.max(1e-300);
            let d = f.ln() - op.max(1e-300).ln();
            err += d * d;
        }
        Ok(err)
    };
    let (mut lo, mut hi) = (-7.0f64, 7.0f64);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut m1 = hi - phi * (hi - lo);
    let mut m2 = lo + phi * (hi - lo);
    let mut f1 = objective(m1)?;
    let mut f2 = objective(m2)?;
    for _ in 0..60 {
        if hi - lo < 1e-6 {
            break;
        }
        if f1 <= f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = objective(m1)?;
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = objective(m2)?;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_to_inf;
    use crate::scenario::{assemble, SystemConfig};
    use crate::link_hap_user::{self, ModulationKind};

    fn scenario() -> (LinkOneParams, LinkTwoParams) {
        let sc = assemble(&SystemConfig::default()).unwrap();
        (sc.link1, sc.link2)
    }

    #[test]
    fn combine_snr_basics() {
        let g1 = SnrValue::from_linear(8.0).unwrap();
        let g2 = SnrValue::from_linear(1e12).unwrap();
        let c = 2.0;
        let near = combine_snr(g1, g2, c).unwrap().linear();
        assert!((near - 8.0).abs() < 1e-10);
        assert_eq!(
            combine_snr(SnrValue::from_linear(0.0).unwrap(), g2, c)
                .unwrap()
                .linear(),
            0.0
        );
        for &x in &[0.3, 5.0, 120.0] {
            let g2 = SnrValue::from_linear(x).unwrap();
            assert!(combine_snr(g1, g2, c).unwrap().linear() <= g1.linear());
        }
        assert!(combine_snr(g1, g2, 0.0).is_err());
    }

    #[test]
    fn cdf_dominates_first_hop_and_degenerate_relay() {
        let (p1, p2) = scenario();
        let gbar = SnrValue::from_db(35.0);
        let relay = RelayConfig::locked(1.0, gbar).unwrap();
        for &db in &[-5.0, 5.0, 15.0, 25.0] {
            let g = SnrValue::from_db(db);
            let fe = e2e_cdf(g, &p1, &p2, &relay).unwrap();
            let f1 = link_ogs_hap::snr_cdf(g, &p1, gbar).unwrap();
            assert!(fe >= f1 - 1e-9, "{db} dB: e2e {fe} < hop1 {f1}");
        }

        // a tiny gain constant makes the relay transparent
        let small = RelayConfig::locked(1e-6 * gbar.linear(), gbar).unwrap();
        for &db in &[5.0, 15.0] {
            let g = SnrValue::from_db(db);
            let fe = e2e_cdf(g, &p1, &p2, &small).unwrap();
            let f1 = link_ogs_hap::snr_cdf(g, &p1, gbar).unwrap();
            assert!((fe - f1).abs() < 1e-3, "{db} dB: {fe} vs {f1}");
        }
    }

    #[test]
    fn cdf_matches_conditioning_oracle() {
        // F(g) = int F1(g (1 + C/x)) f2(x) dx, conditioning on the second hop
        let (p1, p2) = scenario();
        let gbar = SnrValue::from_db(30.0);
        let relay = RelayConfig::locked(1.0, gbar).unwrap();
        for &db in &[5.0, 18.0] {
            let g = SnrValue::from_db(db);
            let direct = e2e_cdf(g, &p1, &p2, &relay).unwrap();
            let oracle = integrate_to_inf(
                |x| {
                    let lifted = g.linear() * (1.0 + relay.c / x);
                    link_ogs_hap::snr_cdf(SnrValue::from_linear(lifted).unwrap(), &p1, gbar)
                        .unwrap()
                        * link_hap_user::snr_pdf(
                            SnrValue::from_linear(x).unwrap(),
                            &p2,
                            gbar,
                        )
                        .unwrap()
                },
                1e-9,
                gbar.linear(),
                1e-6,
            );
            assert!(
                (direct - oracle).abs() < 1e-3 * oracle,
                "{db} dB: bivariate {direct} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn pdf_consistent_with_cdf() {
        let (p1, p2) = scenario();
        let relay = RelayConfig::locked(1.0, SnrValue::from_db(30.0)).unwrap();
        for &g in &[5.0, 80.0] {
            let h = g * 1e-4;
            let fd = (e2e_cdf(SnrValue::from_linear(g + h).unwrap(), &p1, &p2, &relay).unwrap()
                - e2e_cdf(SnrValue::from_linear(g - h).unwrap(), &p1, &p2, &relay).unwrap())
                / (2.0 * h);
            let pdf = e2e_pdf(SnrValue::from_linear(g).unwrap(), &p1, &p2, &relay).unwrap();
            // the finite difference of two nearly cancelling contour values
            // carries a few 1e-4 of relative noise in the deep tail
            assert!((pdf - fd).abs() < 2e-3 * fd.max(1e-12), "g = {g}: {pdf} vs {fd}");
        }
    }

    #[test]
    fn asymptote_tracks_exact_cdf_at_high_snr() {
        // heterodyne detection, where the expansion argument is small well
        // inside the plotted SNR range
        let (mut p1, mut p2) = scenario();
        p1.r1 = 1.0;
        p2.r2 = 1.0;
        let gth = SnrValue::from_db(2.0);
        let mut prev_gap = f64::INFINITY;
        for &db in &[45.0, 55.0, 65.0] {
            let relay = RelayConfig::locked(1.0, SnrValue::from_db(db)).unwrap();
            let exact = e2e_cdf(gth, &p1, &p2, &relay).unwrap();
            let asym = e2e_cdf_asymptotic(gth, &p1, &p2, &relay).unwrap();
            let gap = (asym / exact - 1.0).abs();
            assert!(gap < prev_gap + 1e-12, "ratio gap grew at {db} dB: {gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.10, "ratio gap at 65 dB = {prev_gap}");
    }

    #[test]
    fn asymptote_slope_matches_diversity_order() {
        let (mut p1, mut p2) = scenario();
        p1.r1 = 1.0;
        p2.r2 = 1.0;
        let gth = SnrValue::from_db(2.0);
        let report = diversity_order(&p1, &p2);
        let f = |db: f64| {
            let relay = RelayConfig::locked(1.0, SnrValue::from_db(db)).unwrap();
            e2e_cdf_asymptotic(gth, &p1, &p2, &relay).unwrap().ln()
        };
        // measured deep in the tail: the eta_s^2 and beta1 exponents differ
        // by only 0.08, so the subdominant term fades slowly
        let slope = (f(110.0) - f(100.0)) / (10.0 / 10.0 * std::f64::consts::LN_10);
        assert!(
            (-slope - report.order).abs() < 0.05 * report.order,
            "slope {slope} vs order {}",
            report.order
        );
    }

    #[test]
    fn diversity_report_basics() {
        let (mut p1, mut p2) = scenario();
        p1.r1 = 1.0;
        p2.r2 = 1.0;
        p1.gg.alpha = 5.0;
        p1.gg.beta = 2.0;
        p1.eta_s2 = 3.0;
        p2.gg.alpha = 6.0;
        p2.gg.beta = 4.0;
        let rep = diversity_order(&p1, &p2);
        assert_eq!(rep.label, "beta1/r1");
        assert_eq!(rep.order, 2.0);

        let o1 = rep.order;
        p1.r1 = 2.0;
        p2.r2 = 2.0;
        let rep2 = diversity_order(&p1, &p2);
        assert!((rep2.order - o1 / 2.0).abs() < 1e-12);
        for (c1, c2) in rep.candidates.iter().zip(rep2.candidates.iter()) {
            assert!((c2.1 - c1.1 / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ber_limits_and_ordering() {
        let (p1, p2) = scenario();
        let mut warn = Vec::new();
        let ook = ModulationScheme::new(ModulationKind::Ook).unwrap();
        let (mut p1i, mut p2i) = (p1.clone(), p2.clone());
        p1i.r1 = 2.0;
        p2i.r2 = 2.0;
        let low = RelayConfig::locked(1.0, SnrValue::from_db(-50.0)).unwrap();
        let b0 = e2e_avg_ber(&ook, &p1i, &p2i, &low, &mut warn).unwrap();
        assert!((b0 - 0.5).abs() < 1e-3, "BER at -50 dB = {b0}");

        let relay = RelayConfig::locked(1.0, SnrValue::from_db(35.0)).unwrap();
        let b_ook = e2e_avg_ber(&ook, &p1i, &p2i, &relay, &mut warn).unwrap();
        let b_qam = e2e_avg_ber(
            &ModulationScheme::new(ModulationKind::Mqam(4)).unwrap(),
            &p1,
            &p2,
            &relay,
            &mut warn,
        )
        .unwrap();
        let b_psk = e2e_avg_ber(
            &ModulationScheme::new(ModulationKind::Mpsk(4)).unwrap(),
            &p1,
            &p2,
            &relay,
            &mut warn,
        )
        .unwrap();
        assert!(
            b_ook > b_qam && b_ook > b_psk,
            "OOK {b_ook} vs QAM {b_qam} / PSK {b_psk}"
        );
    }

    #[test]
    fn ber_asymptote_tracks_exact() {
        // QAM pairs with heterodyne detection on both hops
        let (mut p1, mut p2) = scenario();
        p1.r1 = 1.0;
        p2.r2 = 1.0;
        let mut warn = Vec::new();
        let qam = ModulationScheme::new(ModulationKind::Mqam(4)).unwrap();
        let relay = RelayConfig::locked(1.0, SnrValue::from_db(60.0)).unwrap();
        let exact = e2e_avg_ber(&qam, &p1, &p2, &relay, &mut warn).unwrap();
        let asym = e2e_avg_ber_asymptotic(&qam, &p1, &p2, &relay).unwrap();
        assert!(
            (asym / exact - 1.0).abs() < 0.10,
            "exact {exact} vs asymptote {asym}"
        );
    }

    #[test]
    fn capacity_bounds_and_zenith_trend() {
        let (p1, p2) = scenario();
        let relay = RelayConfig::locked(1.0, SnrValue::from_db(30.0)).unwrap();
        let cap = e2e_capacity(&p1, &p2, &relay, 1.0).unwrap();
        let m1 = e2e_moment(1.0, &p1, &p2, &relay).unwrap();
        assert!(cap > 0.0);
        assert!(cap <= (1.0 + m1).ln() + 1e-9, "cap {cap} vs Jensen {}", (1.0 + m1).ln());

        let low = RelayConfig::locked(1.0, SnrValue::from_db(-40.0)).unwrap();
        assert!(e2e_capacity(&p1, &p2, &low, 1.0).unwrap() < 1e-3);

        // steeper zenith angle means a longer turbulent path and less capacity
        let mut caps = Vec::new();
        for &deg in &[50.0f64, 55.0, 60.0] {
            let mut cfg = SystemConfig::default();
            cfg.zeta_1 = deg.to_radians();
            let sc = assemble(&cfg).unwrap();
            caps.push(e2e_capacity(&sc.link1, &sc.link2, &relay, 1.0).unwrap());
        }
        assert!(caps[0] > caps[1] && caps[1] > caps[2], "{caps:?}");
    }

    #[test]
    fn moment_limits_and_transparent_relay() {
        let (p1, p2) = scenario();
        let relay = RelayConfig::locked(1.0, SnrValue::from_db(25.0)).unwrap();
        let zeroth = e2e_moment(1e-6, &p1, &p2, &relay).unwrap();
        assert!((zeroth - 1.0).abs() < 1e-4, "s -> 0 limit = {zeroth}");

        let m1 = e2e_moment(1.0, &p1, &p2, &relay).unwrap();
        let m2 = e2e_moment(2.0, &p1, &p2, &relay).unwrap();
        assert!(m2 >= m1 * m1);

        // C -> 0 collapses the combiner onto the first hop, whose mean has a
        // simple closed form
        let tiny = RelayConfig::locked(1e-9, SnrValue::from_db(25.0)).unwrap();
        let m1_tiny = e2e_moment(1.0, &p1, &p2, &tiny).unwrap();
        let (e2, a, b, r1) = (p1.eta_s2, p1.gg.alpha, p1.gg.beta, p1.r1);
        let hop1_mean = tiny.gamma_bar_1.linear() * x1(&p1).powf(-r1) * e2
            / (e2 + r1)
            * (ln_gamma(a + r1).unwrap() + ln_gamma(b + r1).unwrap()
                - ln_gamma(a).unwrap()
                - ln_gamma(b).unwrap())
            .exp();
        assert!(
            (m1_tiny - hop1_mean).abs() < 1e-4 * hop1_mean,
            "{m1_tiny} vs {hop1_mean}"
        );
    }

    #[test]
    fn df_reference_bounds() {
        let (p1, p2) = scenario();
        let gbar = SnrValue::from_db(30.0);
        let gth = SnrValue::from_db(2.0);
        let df = df_outage_reference(gth, &p1, &p2, gbar, gbar).unwrap();
        let relay = RelayConfig::locked(1.0, gbar).unwrap();
        let af = e2e_cdf(gth, &p1, &p2, &relay).unwrap();
        assert!(df <= af, "DF {df} vs AF {af}");
        assert!(
            df_outage_reference(SnrValue::from_linear(0.0).unwrap(), &p1, &p2, gbar, gbar)
                .unwrap()
                == 0.0
        );
    }
}
