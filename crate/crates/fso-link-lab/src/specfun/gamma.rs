//! Gamma-family functions: complex principal-branch log-gamma (Lanczos),
//! real gamma, upper incomplete gamma, and the error function pair.

use crate::error::{Error, Result};
use num_complex::Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;

fn lanczos_ln_gamma(z: Complex64) -> Complex64 {
    // valid for Re(z) >= 0.5
    let zm1 = z - 1.0;
    let mut acc = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (zm1 + i as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (zm1 + 0.5) * t.ln() - t + acc.ln()
}

/// Principal branch of ln Gamma(z).
pub fn complex_log_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && (z.re - z.re.round()).abs() < 1e-12 {
        return Err(Error::Pole(z.re));
    }
    let v = if z.re >= 0.5 {
        lanczos_ln_gamma(z)
    } else {
        // reflection: ln Gamma(z) = ln(pi / sin(pi z)) - ln Gamma(1 - z)
        let pi = std::f64::consts::PI;
        let lg = Complex64::new(pi, 0.0).ln() - (Complex64::new(pi, 0.0) * z).sin().ln()
            - lanczos_ln_gamma(1.0 - z);
        // fold the imaginary part back towards the principal branch for real-axis use
        lg
    };
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Numerical(format!("log-gamma overflow at z = {z}")));
    }
    Ok(v)
}

/// ln Gamma(x) for real x that is not a non-positive integer.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(lanczos_ln_gamma(Complex64::new(x, 0.0)).re)
    } else {
        Ok(complex_log_gamma(Complex64::new(x, 0.0))?.re)
    }
}

/// Gamma(x) for real x (signed; negative between odd poles).
pub fn gamma(x: f64) -> Result<f64> {
    if x > 0.0 {
        let lg = ln_gamma(x)?;
        Ok(lg.exp())
    } else {
        // reflection keeps the sign information
        let pi = std::f64::consts::PI;
        if (x - x.round()).abs() < 1e-12 {
            return Err(Error::Pole(x));
        }
        Ok(pi / ((pi * x).sin() * gamma(1.0 - x)?))
    }
}

/// erf(x) with absolute error below 1e-14.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.0 {
        // non-alternating series erf(x) = 2x e^{-x^2}/sqrt(pi) * sum (2x^2)^n / (2n+1)!!
        let two_x2 = 2.0 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 1.0;
        while term > 1e-18 * sum {
            term *= two_x2 / (2.0 * n + 1.0);
            sum += term;
            n += 1.0;
        }
        2.0 * x * (-x * x).exp() / std::f64::consts::PI.sqrt() * sum
    } else {
        1.0 - erfc(x)
    }
}

/// erfc(x) = 1 - erf(x), accurate in the tail.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        return 1.0 - erf(x);
    }
    // Lentz continued fraction: erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + 1/2/(x + 2/2/(x + ...)))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < 1e-300 {
            d = 1e-300;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < 1e-300 {
            c = 1e-300;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

/// Upper incomplete gamma Gamma(p, x) for p > 0, x >= 0.
pub fn upper_incomplete_gamma(p: f64, x: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::Domain(format!(
            "upper incomplete gamma needs p > 0 (got {p})"
        )));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!(
            "upper incomplete gamma needs x >= 0 (got {x})"
        )));
    }
    let gp = gamma(p)?;
    if x == 0.0 {
        return Ok(gp);
    }
    let lg = ln_gamma(p)?;
    if x < p + 1.0 {
        // lower-gamma series, then subtract
        let mut term = 1.0 / p;
        let mut sum = term;
        let mut n = 1.0;
        while term.abs() > 1e-17 * sum.abs() {
            term *= x / (p + n);
            sum += term;
            n += 1.0;
            if n > 10_000.0 {
                break;
            }
        }
        let lower = sum * (p * x.ln() - x - lg).exp() * gp;
        Ok(gp - lower)
    } else {
        // continued fraction (Lentz) for the upper tail
        let tiny = 1e-300;
        let mut b = x + 1.0 - p;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - p);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok((p * x.ln() - x).exp() * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_gamma_trivial_points() {
        let v = complex_log_gamma(Complex64::new(1.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-14);
        let half = complex_log_gamma(Complex64::new(0.5, 0.0)).unwrap();
        assert!((half.re - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!(half.im.abs() < 1e-14);
    }

    #[test]
    fn log_gamma_rejects_poles() {
        assert!(complex_log_gamma(Complex64::new(0.0, 0.0)).is_err());
        assert!(complex_log_gamma(Complex64::new(-3.0, 0.0)).is_err());
        assert!(complex_log_gamma(Complex64::new(-3.0 + 1e-13, 0.0)).is_err());
    }

    #[test]
    fn gamma_recurrence() {
        for &x in &[0.3, 1.7, 4.2, 9.9] {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs());
        }
        // signed values on the negative axis
        assert!(gamma(-0.5).unwrap() < 0.0);
        assert!(gamma(-1.5).unwrap() > 0.0);
        assert!(gamma(-2.75).unwrap() < 0.0);
    }

    #[test]
    fn erf_basics() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-14);
        assert!((erf(-1.0) + erf(1.0)).abs() < 1e-16);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-18);
        // complementarity across the series/fraction switch
        for &x in &[1.9, 2.0, 2.1] {
            assert!((erf(x) + erfc(x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn incomplete_gamma_identities() {
        // Gamma(p, 0) = Gamma(p)
        let g = upper_incomplete_gamma(2.5, 0.0).unwrap();
        assert!((g - gamma(2.5).unwrap()).abs() < 1e-13);
        // Gamma(1/2, x) = sqrt(pi) erfc(sqrt(x))
        let v = upper_incomplete_gamma(0.5, 1.0).unwrap();
        let want = std::f64::consts::PI.sqrt() * erfc(1.0);
        assert!((v - want).abs() < 1e-13);
        assert!((want - 0.278_805_6).abs() < 1e-6);
        // Gamma(1, x) = e^{-x}
        let v1 = upper_incomplete_gamma(1.0, 3.0).unwrap();
        assert!((v1 - (-3.0f64).exp()).abs() < 1e-14);
        assert!(upper_incomplete_gamma(-1.0, 1.0).is_err());
        assert!(upper_incomplete_gamma(1.0, -1.0).is_err());
    }
}
