//! Turbulence and propagation physics: Hufnagel-Valley structure profile,
//! Rytov variances for the slant uplink and the two-segment downlink,
//! log-variances, Gamma-Gamma parameters, Beer-Lambert attenuation and
//! Gaussian-beam geometry.
//!
//! All public interfaces take SI meters and radians; per-km / per-nm
//! conversions happen internally.

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_complex};
use num_complex::Complex64;

/// Hufnagel-Valley turbulence profile parameters.
#[derive(Debug, Clone, Copy)]
pub struct TurbulenceProfile {
    /// nominal Cn^2(0), m^(-2/3)
    pub a: f64,
    /// RMS wind speed, m/s
    pub wind_rms: f64,
    /// include the two wind/background terms; disabled only by the
    /// zero-turbulence injection hook used in tests
    pub background_terms: bool,
}

impl TurbulenceProfile {
    pub fn new(a: f64, wind_rms: f64) -> Result<Self> {
        if !(a >= 0.0) || !(wind_rms >= 0.0) {
            return Err(Error::Domain(format!(
                "turbulence profile needs a >= 0 and wind_rms >= 0 (got {a}, {wind_rms})"
            )));
        }
        Ok(Self {
            a,
            wind_rms,
            background_terms: true,
        })
    }

    /// All three profile terms forced to zero.
    pub fn zero() -> Self {
        Self {
            a: 0.0,
            wind_rms: 0.0,
            background_terms: false,
        }
    }
}

/// Structure constant Cn^2 at `altitude` meters.
pub fn cn2(altitude: f64, profile: &TurbulenceProfile) -> Result<f64> {
    if altitude < 0.0 {
        return Err(Error::Domain(format!(
            "cn2 needs altitude >= 0 (got {altitude})"
        )));
    }
    let l = altitude;
    let mut v = profile.a * (-l / 1000.0).exp();
    if profile.background_terms {
        v += 0.00594
            * (profile.wind_rms / 27.0).powi(2)
            * (1e-5 * l).powi(10)
            * (-l / 1000.0).exp()
            + 2.7e-16 * (-l / 1500.0).exp();
    }
    Ok(v)
}

/// Gaussian-beam state at the transmitter plus derived receiver-plane
/// Fresnel parameters. `curvature0 = None` marks a collimated beam (F0
/// infinite) so Theta0 is exactly 1.
#[derive(Debug, Clone, Copy)]
pub struct BeamState {
    /// initial beam radius, m
    pub waist0: f64,
    /// phase-front radius of curvature at the transmitter, m (None = collimated)
    pub curvature0: Option<f64>,
    /// wavelength, m
    pub wavelength: f64,
    /// propagation distance, m
    pub distance: f64,
}

impl BeamState {
    pub fn new(waist0: f64, curvature0: Option<f64>, wavelength: f64, distance: f64) -> Result<Self> {
        if !(waist0 > 0.0) || !(wavelength > 0.0) || !(distance > 0.0) {
            return Err(Error::Domain(format!(
                "beam state needs waist0, wavelength, distance > 0 (got {waist0}, {wavelength}, {distance})"
            )));
        }
        Ok(Self {
            waist0,
            curvature0,
            wavelength,
            distance,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Lambda0 = 2 d / (k w0^2)
    pub fn fresnel_ratio0(&self) -> f64 {
        2.0 * self.distance / (self.wavenumber() * self.waist0 * self.waist0)
    }

    /// Theta0 = 1 - d/F0 (exactly 1 when collimated)
    pub fn curvature_param0(&self) -> f64 {
        match self.curvature0 {
            Some(f0) => 1.0 - self.distance / f0,
            None => 1.0,
        }
    }

    /// receiver-plane (Theta, Lambda); recomputed on every call
    pub fn receiver_params(&self) -> (f64, f64) {
        let l0 = self.fresnel_ratio0();
        let t0 = self.curvature_param0();
        let denom = t0 * t0 + l0 * l0;
        (t0 / denom, l0 / denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, Copy)]
pub struct RytovResult {
    pub sigma_b2: f64,
    pub link_kind: LinkKind,
}

/// Uplink (ground to platform) Rytov variance. The integrand is complex; the
/// real part is taken after the altitude integral completes.
pub fn rytov_uplink(
    h_o: f64,
    h_h: f64,
    zenith: f64,
    beam: &BeamState,
    profile: &TurbulenceProfile,
) -> Result<RytovResult> {
    if !(h_h > h_o && h_o >= 0.0) {
        return Err(Error::Domain(format!(
            "rytov_uplink needs hH > hO >= 0 (got {h_o}, {h_h})"
        )));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&zenith) {
        return Err(Error::Domain(format!(
            "zenith must lie in [0, pi/2) (got {zenith} rad)"
        )));
    }
    let (theta, lambda) = beam.receiver_params();
    let theta_bar = 1.0 - theta;
    let k_w = beam.wavenumber();
    let span = h_h - h_o;

    let integral = integrate_complex(
        |l| {
            let xi = (l - h_h) / (h_o - h_h);
            let core = Complex64::new(lambda * xi * xi, xi * (1.0 - theta_bar * xi));
            let kernel = core.powf(5.0 / 6.0) - lambda.powf(5.0 / 6.0) * xi.powf(5.0 / 3.0);
            cn2(l, profile).unwrap() * kernel
        },
        h_o,
        h_h,
        1e-8,
    );
    let sec = 1.0 / zenith.cos();
    let sigma = 8.7 * k_w.powf(7.0 / 6.0) * span.powf(5.0 / 6.0) * sec.powf(11.0 / 6.0)
        * integral.re;
    Ok(RytovResult {
        sigma_b2: sigma.max(0.0),
        link_kind: LinkKind::Uplink,
    })
}

/// Downlink Rytov variance over the two cascaded segments (platform to
/// reflector, reflector to user), plane-wave kernel.
pub fn rytov_downlink_two_segment(
    h_h: f64,
    h_i: f64,
    h_u: f64,
    zenith2: f64,
    zenith3: f64,
    wavelength: f64,
    profile: &TurbulenceProfile,
) -> Result<RytovResult> {
    if !(h_h > h_i && h_i > h_u && h_u >= 0.0) {
        return Err(Error::Domain(format!(
            "rytov_downlink needs hH > hI > hU >= 0 (got {h_h}, {h_i}, {h_u})"
        )));
    }
    for &z in &[zenith2, zenith3] {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&z) {
            return Err(Error::Domain(format!(
                "zenith must lie in [0, pi/2) (got {z} rad)"
            )));
        }
    }
    let k_w = 2.0 * std::f64::consts::PI / wavelength;
    let segment = |h_low: f64, h_high: f64, zenith: f64| -> f64 {
        let span = h_high - h_low;
        if span <= 0.0 {
            return 0.0;
        }
        let integral = integrate(
            |l| cn2(l, profile).unwrap() * ((l - h_low) / span).powf(5.0 / 6.0),
            h_low,
            h_high,
            1e-8,
        );
        let sec = 1.0 / zenith.cos();
        2.25 * k_w.powf(7.0 / 6.0) * span.powf(5.0 / 6.0) * sec.powf(11.0 / 6.0) * integral
    };
    let sigma = segment(h_i, h_h, zenith2) + segment(h_u, h_i, zenith3);
    Ok(RytovResult {
        sigma_b2: sigma.max(0.0),
        link_kind: LinkKind::Downlink,
    })
}

/// Large- and small-scale log variances (sigma_lnX^2, sigma_lnY^2).
/// `theta` is the receiver-plane beam curvature parameter, used only on the
/// uplink; the downlink large-scale constant is 1.11.
pub fn log_variances(sigma_b2: &RytovResult, theta: f64) -> (f64, f64) {
    let s = sigma_b2.sigma_b2;
    // sigma^{12/5} with sigma the standard deviation, i.e. (sigma^2)^{6/5}
    let s125 = s.powf(6.0 / 5.0);
    let large = match sigma_b2.link_kind {
        LinkKind::Uplink => 0.49 * s / (1.0 + 0.56 * (1.0 + theta) * s125).powf(7.0 / 6.0),
        LinkKind::Downlink => 0.49 * s / (1.0 + 1.11 * s125).powf(7.0 / 6.0),
    };
    let small = 0.51 * s / (1.0 + 0.69 * s125).powf(5.0 / 6.0);
    (large, small)
}

#[derive(Debug, Clone, Copy)]
pub struct GGParams {
    pub alpha: f64,
    pub beta: f64,
}

/// Gamma-Gamma parameters alpha = 1/(e^{sigma_lnX^2} - 1), beta likewise.
pub fn gg_params(sigma_ln_x2: f64, sigma_ln_y2: f64) -> Result<GGParams> {
    for &v in &[sigma_ln_x2, sigma_ln_y2] {
        if !(v > 1e-12) {
            return Err(Error::Domain(format!(
                "log variance {v} below 1e-12 would make Gamma-Gamma parameters infinite"
            )));
        }
    }
    Ok(GGParams {
        alpha: 1.0 / (sigma_ln_x2.exp_m1()),
        beta: 1.0 / (sigma_ln_y2.exp_m1()),
    })
}

/// Beer-Lambert attenuation exp(-C_h d) with
/// C_h = (3.912/V_km)(lambda_nm/550)^{-q_v} per km. All inputs in meters.
pub fn beer_lambert(visibility_m: f64, wavelength_m: f64, distance_m: f64, q_v: f64) -> Result<f64> {
    if !(visibility_m > 0.0) {
        return Err(Error::Domain(format!(
            "beer_lambert needs visibility > 0 (got {visibility_m} m)"
        )));
    }
    if !(wavelength_m > 0.0) || distance_m < 0.0 {
        return Err(Error::Domain(format!(
            "beer_lambert needs wavelength > 0 and distance >= 0 (got {wavelength_m}, {distance_m})"
        )));
    }
    let v_km = visibility_m / 1000.0;
    let lambda_nm = wavelength_m * 1e9;
    let c_h = 3.912 / v_km * (lambda_nm / 550.0).powf(-q_v);
    Ok((-c_h * distance_m / 1000.0).exp())
}

/// Gaussian beam radius after distance d: w0 sqrt(1 + (d lambda / (pi w0^2))^2).
pub fn beam_radius(distance: f64, waist0: f64, wavelength: f64) -> f64 {
    debug_assert!(waist0 > 0.0 && wavelength > 0.0);
    let q = distance * wavelength / (std::f64::consts::PI * waist0 * waist0);
    waist0 * (1.0 + q * q).sqrt()
}

/// Solve for the reflected-beam waist w so that
/// beam_radius(d_hi, w) = cos(theta_r)/cos(theta_i) * beam_radius(d_hi, waist0).
/// Bisection on the monotone branch containing waist0; the minimum attainable
/// radius at distance d is sqrt(2 d lambda / pi).
pub fn solve_reflected_waist(
    theta_i: f64,
    theta_r: f64,
    d_hi: f64,
    waist0: f64,
    wavelength: f64,
) -> Result<f64> {
    for &t in &[theta_i, theta_r] {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&t) {
            return Err(Error::Domain(format!(
                "incidence/reflection angles must lie in [0, pi/2) (got {t} rad)"
            )));
        }
    }
    let target = theta_r.cos() / theta_i.cos() * beam_radius(d_hi, waist0, wavelength);
    solve_waist_for_radius(target, d_hi, waist0, wavelength)
}

/// Back-solve beam_radius(d, w) = target on the branch containing `hint`.
pub fn solve_waist_for_radius(target: f64, d: f64, hint: f64, wavelength: f64) -> Result<f64> {
    let w_star = (d * wavelength / std::f64::consts::PI).sqrt(); // branch split point
    let min_radius = std::f64::consts::SQRT_2 * w_star;
    if target < min_radius * (1.0 - 1e-12) {
        return Err(Error::NoSolution {
            target_m: target,
            distance_m: d,
            min_m: min_radius,
        });
    }
    let target = target.max(min_radius);
    // radius is decreasing in w below w_star, increasing above
    let (mut lo, mut hi, increasing) = if hint <= w_star {
        let mut lo = hint.min(w_star) * 1e-6;
        while beam_radius(d, lo, wavelength) < target {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::Numerical("waist bisection bracket collapsed".into()));
            }
        }
        (lo, w_star, false)
    } else {
        let mut hi = hint.max(w_star) * 2.0;
        while beam_radius(d, hi, wavelength) < target {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Numerical("waist bisection bracket diverged".into()));
            }
        }
        (w_star, hi, true)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = beam_radius(d, mid, wavelength);
        let high_side = r > target;
        if high_side == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    let w = 0.5 * (lo + hi);
    let residual = (beam_radius(d, w, wavelength) - target).abs() / target;
    if residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "waist solve residual {residual:.3e} exceeds 1e-10"
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hv_default() -> TurbulenceProfile {
        TurbulenceProfile::new(1.7e-14, 21.0).unwrap()
    }

    #[test]
    fn cn2_boundaries() {
        // first term carries a factor (1e-5 * 0)^10 = 0
        let p = TurbulenceProfile::new(1.7e-13, 30.0).unwrap();
        let v = cn2(0.0, &p).unwrap();
        assert!((v - (2.7e-16 + 1.7e-13)).abs() < 1e-28);
        // decay at altitude
        assert!(cn2(100_000.0, &p).unwrap() < 1e-25);
        assert!(cn2(-1.0, &p).is_err());
    }

    #[test]
    fn cn2_at_1km_hand_value() {
        let p = hv_default();
        // term-by-term at l = 1000 m:
        // 0.00594 (21/27)^2 (1e-2)^10 e^-1 + 2.7e-16 e^{-2/3} + 1.7e-14 e^-1
        let t1 = 0.00594 * (21.0f64 / 27.0).powi(2) * 1e-20 * (-1.0f64).exp();
        let t2 = 2.7e-16 * (-1000.0f64 / 1500.0).exp();
        let t3 = 1.7e-14 * (-1.0f64).exp();
        let v = cn2(1000.0, &p).unwrap();
        assert!((v - (t1 + t2 + t3)).abs() < 1e-28);
    }

    #[test]
    fn rytov_uplink_zero_profile_and_monotonicity() {
        let beam = BeamState::new(1e-3, None, 1550e-9, 35_980.0).unwrap();
        let z = rytov_uplink(10.0, 18_000.0, 0.5, &beam, &TurbulenceProfile::zero()).unwrap();
        assert_eq!(z.sigma_b2, 0.0);

        let p = hv_default();
        let mut prev = -1.0;
        for deg in [0.0f64, 20.0, 40.0, 60.0, 70.0] {
            let s = rytov_uplink(10.0, 18_000.0, deg.to_radians(), &beam, &p)
                .unwrap()
                .sigma_b2;
            assert!(s > prev, "sigma_B1^2 not increasing at {deg} deg");
            prev = s;
        }
        assert!(rytov_uplink(10.0, 18_000.0, 1.6, &beam, &p).is_err());
    }

    #[test]
    fn rytov_downlink_segments() {
        let p = hv_default();
        let z = rytov_downlink_two_segment(
            18_000.0,
            100.0,
            20.0,
            0.05,
            0.25,
            1550e-9,
            &TurbulenceProfile::zero(),
        )
        .unwrap();
        assert_eq!(z.sigma_b2, 0.0);

        let full =
            rytov_downlink_two_segment(18_000.0, 100.0, 20.0, 0.05, 0.25, 1550e-9, &p).unwrap();
        assert!(full.sigma_b2 > 0.0);
        // collapsing the lower segment removes only its contribution
        let upper_only = rytov_downlink_two_segment(
            18_000.0,
            100.0,
            100.0 - 1e-9,
            0.05,
            0.25,
            1550e-9,
            &p,
        )
        .unwrap();
        assert!(upper_only.sigma_b2 < full.sigma_b2);
        assert!(rytov_downlink_two_segment(18_000.0, 20.0, 100.0, 0.05, 0.25, 1550e-9, &p).is_err());
    }

    #[test]
    fn log_variance_hand_values() {
        let down = RytovResult {
            sigma_b2: 1.0,
            link_kind: LinkKind::Downlink,
        };
        let (lx, ly) = log_variances(&down, 0.0);
        assert!((lx - 0.49 / 2.11f64.powf(7.0 / 6.0)).abs() < 1e-12);
        assert!((ly - 0.51 / 1.69f64.powf(5.0 / 6.0)).abs() < 1e-12);
        assert!((lx - 0.2046).abs() < 5e-4);
        assert!((ly - 0.3294).abs() < 5e-4);

        let up = RytovResult {
            sigma_b2: 1.0,
            link_kind: LinkKind::Uplink,
        };
        let (ux, _) = log_variances(&up, 1.0);
        assert!((ux - 0.49 / 2.12f64.powf(7.0 / 6.0)).abs() < 1e-12);

        let zero = RytovResult {
            sigma_b2: 0.0,
            link_kind: LinkKind::Downlink,
        };
        assert_eq!(log_variances(&zero, 0.0), (0.0, 0.0));
    }

    #[test]
    fn gg_params_values_and_guards() {
        let g = gg_params(0.1, 0.05).unwrap();
        assert!((g.alpha - 9.50833).abs() < 1e-5);
        assert!((g.beta - 19.50417).abs() < 1e-5);
        assert!(gg_params(0.0, 0.1).is_err());
        assert!(gg_params(0.1, 1e-13).is_err());
        // alpha decreases with growing large-scale variance
        assert!(gg_params(0.2, 0.05).unwrap().alpha < g.alpha);
    }

    #[test]
    fn beer_lambert_hand_value() {
        assert_eq!(beer_lambert(10_000.0, 1550e-9, 0.0, 1.6).unwrap(), 1.0);
        let v = beer_lambert(10_000.0, 1550e-9, 1000.0, 1.6).unwrap();
        assert!((v - 0.92817).abs() < 1e-4);
        assert!(beer_lambert(0.0, 1550e-9, 1.0, 1.3).is_err());
        // strictly decreasing in distance
        let v2 = beer_lambert(10_000.0, 1550e-9, 2000.0, 1.6).unwrap();
        assert!(v2 < v);
    }

    #[test]
    fn beam_radius_limits() {
        let w0 = 2.5e-3;
        let lam = 1550e-9;
        assert_eq!(beam_radius(0.0, w0, lam), w0);
        let d = 1e7;
        let far = beam_radius(d, w0, lam);
        let asym = d * lam / (std::f64::consts::PI * w0);
        assert!((far / asym - 1.0).abs() < 1e-6);
        assert!(beam_radius(100.0, w0, lam) < beam_radius(200.0, w0, lam));
    }

    #[test]
    fn reflected_waist_solve() {
        let lam = 1550e-9;
        let d = 1000.0;
        let w0 = 5e-3;
        // equal angles: the target is the untransformed radius, so w0 solves it
        let w = solve_reflected_waist(0.3, 0.3, d, w0, lam).unwrap();
        assert!((w / w0 - 1.0).abs() < 1e-9);
        // shrinking target below the far-field minimum must error
        let min_r = (2.0 * d * lam / std::f64::consts::PI).sqrt();
        let err = solve_waist_for_radius(0.5 * min_r, d, w0, lam);
        assert!(matches!(err, Err(Error::NoSolution { .. })));
        // generic forward-residual check on both branches
        for hint in [1e-4, 5e-2] {
            let target = 1.5 * min_r;
            let w = solve_waist_for_radius(target, d, hint, lam).unwrap();
            let r = beam_radius(d, w, lam);
            assert!((r / target - 1.0).abs() < 1e-10);
        }
    }
}
