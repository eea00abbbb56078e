//! First-hop (ground station to platform) statistics: composite channel
//! densities and the Meijer-G SNR distribution.

use crate::error::{Error, Result};
use crate::scenario::LinkOneParams;
use crate::specfun::contour::ContourConfig;
use crate::specfun::foxh::{fox_h_scaled, FoxHSpec};
use crate::specfun::gamma::ln_gamma;
use crate::atmosphere::GGParams;
use crate::specfun::bessel_k;

/// Linear SNR with dB conversions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrValue {
    linear: f64,
}

impl SnrValue {
    pub fn from_linear(v: f64) -> Result<Self> {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("SNR must be >= 0 (got {v})")));
        }
        Ok(Self { linear: v })
    }
    pub fn from_db(db: f64) -> Self {
        Self {
            linear: 10f64.powf(db / 10.0),
        }
    }
    pub fn linear(&self) -> f64 {
        self.linear
    }
    pub fn db(&self) -> f64 {
        10.0 * self.linear.log10()
    }
}

/// Gamma-Gamma turbulence density (unit mean).
pub fn ha_pdf(h: f64, gg: &GGParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("ha_pdf needs h > 0 (got {h})")));
    }
    let (a, b) = (gg.alpha, gg.beta);
    let ab = a * b;
    // assemble in log space: (ab)^((a+b)/2) and the gamma denominators can
    // individually overflow for weak-turbulence parameters
    let ln_coeff = std::f64::consts::LN_2 + 0.5 * (a + b) * ab.ln()
        + (0.5 * (a + b) - 1.0) * h.ln()
        - ln_gamma(a)?
        - ln_gamma(b)?;
    let k = bessel_k(a - b, 2.0 * (ab * h).sqrt())?;
    Ok(ln_coeff.exp() * k)
}

/// Pointing-error density (eta^2 / A0) (h / A0)^{eta^2 - 1} on (0, A0].
pub fn hg1_pdf(h: f64, eta_s2: f64, a0: f64) -> Result<f64> {
    if !(h > 0.0 && h <= a0) {
        return Err(Error::Domain(format!(
            "hg1_pdf support is (0, {a0}] (got {h})"
        )));
    }
    Ok(eta_s2 / a0 * (h / a0).powf(eta_s2 - 1.0))
}

fn cdf_spec(p: &LinkOneParams) -> FoxHSpec {
    FoxHSpec {
        m: 4,
        n: 0,
        upper: vec![(1.0 + p.eta_s2, 1.0), (1.0, 1.0)],
        lower: vec![
            (0.0, 1.0),
            (p.eta_s2, 1.0),
            (p.gg.alpha, 1.0),
            (p.gg.beta, 1.0),
        ],
    }
}

/// SNR distribution argument x1 (gamma / gamma_bar)^{1/r1} with
/// x1 = alpha1 beta1 / (A01 h_p1).
pub fn snr_argument(p: &LinkOneParams, gamma: f64, gamma_bar: f64) -> f64 {
    p.gg.alpha * p.gg.beta / (p.a01 * p.h_p1) * (gamma / gamma_bar).powf(1.0 / p.r1)
}

/// First-hop SNR CDF.
pub fn snr_cdf(gamma: SnrValue, p: &LinkOneParams, gamma_bar: SnrValue) -> Result<f64> {
    if !(gamma_bar.linear() > 0.0) {
        return Err(Error::Domain("gamma_bar must be positive".into()));
    }
    if gamma.linear() == 0.0 {
        return Ok(0.0);
    }
    let z = snr_argument(p, gamma.linear(), gamma_bar.linear());
    let cfg = ContourConfig::default();
    let g = fox_h_scaled(&cdf_spec(p), z, &cfg)?;
    let ln_pref = p.eta_s2.ln() - ln_gamma(p.gg.alpha)? - ln_gamma(p.gg.beta)?;
    let f = 1.0 - g.value_scaled(ln_pref);
    if !(-1e-9..=1.0 + 1e-9).contains(&f) {
        return Err(Error::Numerical(format!(
            "first-hop CDF {f} outside [0,1] beyond 1e-9 at gamma = {}",
            gamma.linear()
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// First-hop SNR density by central finite difference of the CDF.
pub fn snr_pdf(gamma: SnrValue, p: &LinkOneParams, gamma_bar: SnrValue) -> Result<f64> {
    let g = gamma.linear();
    if g == 0.0 {
        return Ok(0.0);
    }
    let h = g * 6e-6; // cube-root-of-eps relative step
    let hi = snr_cdf(SnrValue::from_linear(g + h)?, p, gamma_bar)?;
    let lo = snr_cdf(SnrValue::from_linear((g - h).max(0.0))?, p, gamma_bar)?;
    Ok(((hi - lo) / (2.0 * h)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_to_inf};
    use crate::scenario::{assemble, SystemConfig};

    fn gg_test() -> GGParams {
        GGParams {
            alpha: 9.5,
            beta: 19.5,
        }
    }

    #[test]
    fn snr_value_round_trip() {
        for &db in &[-20.0, 0.0, 17.3, 40.0] {
            let v = SnrValue::from_db(db);
            assert!((v.db() - db).abs() < 1e-12);
        }
        assert!(SnrValue::from_linear(-1.0).is_err());
    }

    #[test]
    fn ha_pdf_normalization_and_mean() {
        let gg = gg_test();
        let total = integrate_to_inf(|h| ha_pdf(h, &gg).unwrap(), 1e-12, 2.0, 1e-10);
        assert!((total - 1.0).abs() < 1e-8, "integral = {total}");
        let mean = integrate_to_inf(|h| h * ha_pdf(h, &gg).unwrap(), 1e-12, 2.0, 1e-10);
        assert!((mean - 1.0).abs() < 1e-8, "mean = {mean}");
        assert!(ha_pdf(0.0, &gg).is_err());
    }

    #[test]
    fn ha_pdf_matches_gamma_product_convolution() {
        // h = X Y with X ~ Gamma(alpha, 1/alpha), Y ~ Gamma(beta, 1/beta)
        let gg = gg_test();
        let (a, b) = (gg.alpha, gg.beta);
        let gamma_pdf = |x: f64, k: f64| -> f64 {
            ((k - 1.0) * x.ln() + k * k.ln() - k * x - ln_gamma(k).unwrap()).exp()
        };
        for &h in &[0.5, 1.0, 1.8] {
            let direct = ha_pdf(h, &gg).unwrap();
            let conv = integrate_to_inf(
                |x| gamma_pdf(x, a) * gamma_pdf(h / x, b) / x,
                1e-10,
                2.0,
                1e-10,
            );
            assert!(
                (direct - conv).abs() < 1e-7 * conv,
                "h = {h}: {direct} vs {conv}"
            );
        }
    }

    #[test]
    fn hg1_pdf_analytics() {
        let (eta2, a0) = (1.13, 0.2);
        let total = integrate(|h| hg1_pdf(h, eta2, a0).unwrap(), 1e-12, a0, 1e-10);
        assert!((total - 1.0).abs() < 1e-8);
        let mean = integrate(|h| h * hg1_pdf(h, eta2, a0).unwrap(), 1e-12, a0, 1e-10);
        assert!((mean - a0 * eta2 / (eta2 + 1.0)).abs() < 1e-9);
        // eta^2 = 1 is uniform on (0, A0]
        assert!((hg1_pdf(0.07, 1.0, a0).unwrap() - 1.0 / a0).abs() < 1e-12);
        assert!(hg1_pdf(a0 * 1.01, eta2, a0).is_err());
        assert!(hg1_pdf(0.0, eta2, a0).is_err());
    }

    #[test]
    fn snr_cdf_limits_and_monotonicity() {
        let sc = assemble(&SystemConfig::default()).unwrap();
        let gbar = SnrValue::from_db(35.0);
        assert_eq!(
            snr_cdf(SnrValue::from_linear(0.0).unwrap(), &sc.link1, gbar).unwrap(),
            0.0
        );
        let top = snr_cdf(SnrValue::from_db(120.0), &sc.link1, gbar).unwrap();
        assert!(top > 1.0 - 1e-6, "upper limit {top}");

        let mut prev = -1.0;
        for i in 0..50 {
            let db = -20.0 + 80.0 * i as f64 / 49.0;
            let f = snr_cdf(SnrValue::from_db(db), &sc.link1, gbar).unwrap();
            assert!(f >= prev - 1e-12, "CDF not monotone at {db} dB");
            assert!((-1e-9..=1.0 + 1e-9).contains(&f));
            prev = f;
        }

        // CDF falls as the average SNR rises
        let g = SnrValue::from_db(10.0);
        let f1 = snr_cdf(g, &sc.link1, SnrValue::from_db(30.0)).unwrap();
        let f2 = snr_cdf(g, &sc.link1, SnrValue::from_db(40.0)).unwrap();
        assert!(f2 < f1);
    }

    #[test]
    fn snr_pdf_integrates_to_one() {
        let sc = assemble(&SystemConfig::default()).unwrap();
        let gbar = SnrValue::from_db(20.0);
        let lo = 1e-10 * gbar.linear();
        // log substitution tames the integrable singularity at gamma = 0;
        // the CDF decays only like gamma^(beta1 / r1) near zero, so the mass
        // below the cutoff is far from negligible and is added back in
        let total = integrate(
            |x| {
                let g = x.exp();
                snr_pdf(SnrValue::from_linear(g).unwrap(), &sc.link1, gbar).unwrap() * g
            },
            lo.ln(),
            (1e5 * gbar.linear()).ln(),
            1e-7,
        );
        let below = snr_cdf(SnrValue::from_linear(lo).unwrap(), &sc.link1, gbar).unwrap();
        assert!(
            (total + below - 1.0).abs() < 1e-3,
            "pdf integral = {total}, head mass = {below}"
        );
    }
}
