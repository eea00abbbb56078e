//! Physics-level Monte Carlo simulator: samples every channel factor from
//! its defining distribution and estimates outage, BER, capacity, and
//! moments with confidence intervals, independently of the closed forms.

use crate::atmosphere::GGParams;
use crate::e2e::RelayConfig;
use crate::error::{Error, Result};
use crate::link_hap_user::ModulationScheme;
use crate::link_ogs_hap::SnrValue;
use crate::scenario::{LinkOneParams, LinkTwoParams};
use crate::specfun::gamma::{erfc, ln_gamma, upper_incomplete_gamma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;

/// Fixed chunk size: the sample space is partitioned into 2^16-sample
/// chunks, each drawn from its own substream, so results are bit-identical
/// for a given seed regardless of worker count.
pub const CHUNK_SIZE: u64 = 1 << 16;

/// 99% two-sided normal quantile.
const Z99: f64 = 2.575_829_303_548_900_4;

/// Deterministic substream factory: chunk i draws from stream id i of a
/// ChaCha8 generator seeded once.
#[derive(Debug, Clone, Copy)]
pub struct RngStream {
    pub seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn chunk(&self, stream_id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id);
        rng
    }
}

/// Point estimate with a 99% confidence interval: Wilson for proportions,
/// normal-theory for means.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
}

impl Estimate {
    pub fn proportion(successes: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        if successes > n {
            return Err(Error::Domain(format!(
                "successes {successes} exceed sample count {n}"
            )));
        }
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = Z99 * Z99;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = Z99 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Ok(Self {
            mean: p,
            std_error: (p * (1.0 - p) / nf).sqrt(),
            // the Wilson interval always contains the point estimate,
            // including at the p = 0 and p = 1 boundaries
            ci_low: (center - half).min(p).max(0.0),
            ci_high: (center + half).max(p).min(1.0),
            n,
        })
    }

    pub fn from_moments(sum: f64, sum_sq: f64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        let se = (var / nf).sqrt();
        Ok(Self {
            mean,
            std_error: se,
            ci_low: mean - Z99 * se,
            ci_high: mean + Z99 * se,
            n,
        })
    }
}

/// Unit-mean Gamma-Gamma turbulence sample: the product of two independent
/// unit-mean Gamma variates with shapes alpha and beta.
pub fn sample_gg<R: Rng>(gg: &GGParams, rng: &mut R) -> Result<f64> {
    let ga = Gamma::new(gg.alpha, 1.0 / gg.alpha)
        .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
    let gb = Gamma::new(gg.beta, 1.0 / gg.beta)
        .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
    Ok(ga.sample(rng) * gb.sample(rng))
}

/// First-hop pointing-error sample on (0, A0]: exact inverse CDF of the
/// power-law density, A0 U^(1/eta_s^2).
pub fn sample_hg1<R: Rng>(eta_s2: f64, a0: f64, rng: &mut R) -> Result<f64> {
    if !(eta_s2 > 0.0 && a0 > 0.0) {
        return Err(Error::Domain(format!(
            "sample_hg1 needs eta_s^2 > 0 and A0 > 0 (got {eta_s2}, {a0})"
        )));
    }
    // 1 - U lies in (0, 1], keeping the sample strictly positive
    let u = 1.0 - rng.random::<f64>();
    Ok(a0 * u.powf(1.0 / eta_s2))
}

/// Second-hop misalignment sample on (0, A02]: two independent zero-mean
/// normal displacements pushed through h = A02 exp(-2(u1^2 + u2^2)/t_g).
pub fn sample_hg2<R: Rng>(p: &LinkTwoParams, rng: &mut R) -> Result<f64> {
    let n1 = Normal::new(0.0, p.sigma_u1_sq.sqrt())
        .map_err(|e| Error::Domain(format!("normal sampler: {e}")))?;
    let n2 = Normal::new(0.0, p.sigma_u2_sq.sqrt())
        .map_err(|e| Error::Domain(format!("normal sampler: {e}")))?;
    let (u1, u2) = (n1.sample(rng), n2.sample(rng));
    Ok(p.a02 * (-2.0 * (u1 * u1 + u2 * u2) / p.t_g).exp())
}

/// Relative residuals of the two change-of-variables identities linking the
/// misalignment density parameters to the displacement variances:
/// (1+q^2) varpi / (2q) = t_g Omega / (8 s1^2 s2^2) and
/// (1-q^2) varpi / (2q) = t_g |s1^2 - s2^2| / (8 s1^2 s2^2).
pub fn gml_change_of_variables_residuals(p: &LinkTwoParams) -> (f64, f64) {
    let scale = p.t_g / (8.0 * p.sigma_u1_sq * p.sigma_u2_sq);
    let lhs1 = (1.0 + p.q_g * p.q_g) * p.varpi / (2.0 * p.q_g);
    let rhs1 = scale * p.omega_sq;
    let lhs2 = (1.0 - p.q_g * p.q_g) * p.varpi / (2.0 * p.q_g);
    let rhs2 = scale * (p.sigma_u1_sq - p.sigma_u2_sq).abs();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    (rel(lhs1, rhs1), rel(lhs2, rhs2))
}

/// Per-scenario sampler with the channel distributions built once.
pub struct Simulator<'a> {
    p1: &'a LinkOneParams,
    p2: &'a LinkTwoParams,
    relay: RelayConfig,
    ga1: Gamma<f64>,
    gb1: Gamma<f64>,
    ga2: Gamma<f64>,
    gb2: Gamma<f64>,
    n1: Normal<f64>,
    n2: Normal<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(p1: &'a LinkOneParams, p2: &'a LinkTwoParams, relay: RelayConfig) -> Result<Self> {
        let mk = |shape: f64| {
            Gamma::new(shape, 1.0 / shape).map_err(|e| Error::Domain(format!("gamma sampler: {e}")))
        };
        let mn = |var: f64| {
            Normal::new(0.0, var.sqrt()).map_err(|e| Error::Domain(format!("normal sampler: {e}")))
        };
        Ok(Self {
            p1,
            p2,
            relay,
            ga1: mk(p1.gg.alpha)?,
            gb1: mk(p1.gg.beta)?,
            ga2: mk(p2.gg.alpha)?,
            gb2: mk(p2.gg.beta)?,
            n1: mn(p2.sigma_u1_sq)?,
            n2: mn(p2.sigma_u2_sq)?,
        })
    }

    /// Composite first-hop channel gain h_p1 h_a1 h_g1.
    pub fn hop1_gain<R: Rng>(&self, rng: &mut R) -> f64 {
        let ha = self.ga1.sample(rng) * self.gb1.sample(rng);
        let u = 1.0 - rng.random::<f64>();
        let hg = self.p1.a01 * u.powf(1.0 / self.p1.eta_s2);
        self.p1.h_p1 * ha * hg
    }

    /// Composite second-hop channel gain h_p2 h_a2 h_g2.
    pub fn hop2_gain<R: Rng>(&self, rng: &mut R) -> f64 {
        let ha = self.ga2.sample(rng) * self.gb2.sample(rng);
        let (u1, u2) = (self.n1.sample(rng), self.n2.sample(rng));
        let hg = self.p2.a02 * (-2.0 * (u1 * u1 + u2 * u2) / self.p2.t_g).exp();
        self.p2.h_p2 * ha * hg
    }

    pub fn hop1_snr<R: Rng>(&self, rng: &mut R) -> f64 {
        self.relay.gamma_bar_1.linear() * self.hop1_gain(rng).powf(self.p1.r1)
    }

    pub fn hop2_snr<R: Rng>(&self, rng: &mut R) -> f64 {
        self.relay.gamma_bar_2.linear() * self.hop2_gain(rng).powf(self.p2.r2)
    }

    /// Fixed-gain combined SNR gamma1 gamma2 / (gamma2 + C).
    pub fn e2e_snr<R: Rng>(&self, rng: &mut R) -> f64 {
        let g1 = self.hop1_snr(rng);
        let g2 = self.hop2_snr(rng);
        g1 * g2 / (g2 + self.relay.c)
    }
}

/// Which SNR the simulator should draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Hop1,
    Hop2,
    E2e,
}

impl Scope {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hop1" => Ok(Scope::Hop1),
            "hop2" => Ok(Scope::Hop2),
            "e2e" => Ok(Scope::E2e),
            other => Err(Error::Config(format!(
                "unknown scope '{other}' (expected hop1|hop2|e2e)"
            ))),
        }
    }
}

fn draw<R: Rng>(sim: &Simulator, scope: Scope, rng: &mut R) -> f64 {
    match scope {
        Scope::Hop1 => sim.hop1_snr(rng),
        Scope::Hop2 => sim.hop2_snr(rng),
        Scope::E2e => sim.e2e_snr(rng),
    }
}

/// Materialized sample paths for the estimator entry points below.
pub fn simulate(
    sim: &Simulator,
    scope: Scope,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SnrValue>> {
    (0..n)
        .map(|_| SnrValue::from_linear(draw(sim, scope, rng)))
        .collect()
}

/// Conditional BER of the modulation at instantaneous SNR gamma:
/// delta_B sum_m Gamma(p_B, q_Bm gamma) / (2 Gamma(p_B)).
pub fn conditional_ber(gamma: f64, scheme: &ModulationScheme) -> Result<f64> {
    let mut sum = 0.0;
    if (scheme.p_b - 0.5).abs() < 1e-14 {
        for &q in &scheme.q_bm {
            sum += erfc((q * gamma).sqrt());
        }
    } else {
        let gp = ln_gamma(scheme.p_b)?.exp();
        for &q in &scheme.q_bm {
            sum += upper_incomplete_gamma(scheme.p_b, q * gamma)? / gp;
        }
    }
    Ok(scheme.delta_b * sum / 2.0)
}

pub fn estimate_op(samples: &[SnrValue], gamma_th: SnrValue) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let hits = samples
        .iter()
        .filter(|g| g.linear() <= gamma_th.linear())
        .count() as u64;
    Estimate::proportion(hits, samples.len() as u64)
}

fn estimate_mean<F: Fn(f64) -> Result<f64>>(samples: &[SnrValue], f: F) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for g in samples {
        let v = f(g.linear())?;
        sum += v;
        sum_sq += v * v;
    }
    Estimate::from_moments(sum, sum_sq, samples.len() as u64)
}

pub fn estimate_ber(samples: &[SnrValue], scheme: &ModulationScheme) -> Result<Estimate> {
    estimate_mean(samples, |g| conditional_ber(g, scheme))
}

pub fn estimate_capacity(samples: &[SnrValue], c0: f64) -> Result<Estimate> {
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("c0 must be positive (got {c0})")));
    }
    estimate_mean(samples, |g| Ok((1.0 + c0 * g).ln()))
}

pub fn estimate_moment(samples: &[SnrValue], s: f64) -> Result<Estimate> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("moment order must be >= 0 (got {s})")));
    }
    estimate_mean(samples, |g| Ok(g.powf(s)))
}

fn worker_cap() -> Option<usize> {
    std::env::var("FSO_LINK_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&k| k > 0)
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match worker_cap() {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn chunk_bounds(n: u64) -> Vec<(u64, u64)> {
    (0..n.div_ceil(CHUNK_SIZE))
        .map(|c| (c, (n - c * CHUNK_SIZE).min(CHUNK_SIZE)))
        .collect()
}

/// Streaming chunk-parallel proportion estimator: chunk results are reduced
/// in index order, so the estimate is reproducible for a fixed seed.
pub fn run_proportion<P>(
    sim: &Simulator,
    scope: Scope,
    n: u64,
    stream: RngStream,
    pred: P,
) -> Result<Estimate>
where
    P: Fn(f64) -> bool + Sync,
{
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let counts: Vec<u64> = with_pool(|| {
        chunk_bounds(n)
            .into_par_iter()
            .map(|(c, m)| {
                let mut rng = stream.chunk(c);
                (0..m).filter(|_| pred(draw(sim, scope, &mut rng))).count() as u64
            })
            .collect()
    });
    Estimate::proportion(counts.iter().sum(), n)
}

/// Streaming chunk-parallel mean estimator over a per-sample statistic.
pub fn run_mean<F>(
    sim: &Simulator,
    scope: Scope,
    n: u64,
    stream: RngStream,
    stat: F,
) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let partials: Vec<Result<(f64, f64)>> = with_pool(|| {
        chunk_bounds(n)
            .into_par_iter()
            .map(|(c, m)| {
                let mut rng = stream.chunk(c);
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for _ in 0..m {
                    let v = stat(draw(sim, scope, &mut rng))?;
                    sum += v;
                    sum_sq += v * v;
                }
                Ok((sum, sum_sq))
            })
            .collect()
    });
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for p in partials {
        let (s, sq) = p?;
        sum += s;
        sum_sq += sq;
    }
    Estimate::from_moments(sum, sum_sq, n)
}

pub fn mc_outage(
    sim: &Simulator,
    scope: Scope,
    gamma_th: SnrValue,
    n: u64,
    stream: RngStream,
) -> Result<Estimate> {
    run_proportion(sim, scope, n, stream, |g| g <= gamma_th.linear())
}

pub fn mc_avg_ber(
    sim: &Simulator,
    scope: Scope,
    scheme: &ModulationScheme,
    n: u64,
    stream: RngStream,
) -> Result<Estimate> {
    run_mean(sim, scope, n, stream, |g| conditional_ber(g, scheme))
}

pub fn mc_capacity(
    sim: &Simulator,
    scope: Scope,
    c0: f64,
    n: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("c0 must be positive (got {c0})")));
    }
    run_mean(sim, scope, n, stream, |g| Ok((1.0 + c0 * g).ln()))
}

pub fn mc_moment(
    sim: &Simulator,
    scope: Scope,
    s: f64,
    n: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("moment order must be >= 0 (got {s})")));
    }
    run_mean(sim, scope, n, stream, |g| Ok(g.powf(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link_hap_user::{gml_pdf_exact, ModulationKind};
    use crate::quad::integrate;
    use crate::scenario::{assemble, SystemConfig};

    fn scenario() -> (LinkOneParams, LinkTwoParams) {
        let sc = assemble(&SystemConfig::default()).unwrap();
        (sc.link1, sc.link2)
    }

    fn relay() -> RelayConfig {
        RelayConfig::locked(1.0, SnrValue::from_db(30.0)).unwrap()
    }

    /// Asymptotic Kolmogorov-Smirnov p-value.
    fn ks_p(d: f64, n: usize) -> f64 {
        let t = (n as f64).sqrt() * d;
        let mut p = 0.0;
        for j in 1..101 {
            let jf = j as f64;
            p += 2.0 * (-1.0f64).powi(j + 1) * (-2.0 * jf * jf * t * t).exp();
        }
        p.clamp(0.0, 1.0)
    }

    fn ks_stat(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let n = sorted.len() as f64;
        sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Chi-square upper-tail p-value.
    fn chi2_p(x: f64, df: f64) -> f64 {
        upper_incomplete_gamma(df / 2.0, x / 2.0).unwrap()
            / ln_gamma(df / 2.0).unwrap().exp()
    }

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let s = RngStream::new(42);
        let a: Vec<f64> = (0..8).map({
            let mut r = s.chunk(3);
            move |_| r.random::<f64>()
        })
        .collect();
        let b: Vec<f64> = (0..8).map({
            let mut r = s.chunk(3);
            move |_| r.random::<f64>()
        })
        .collect();
        assert_eq!(a, b);
        let mut r4 = s.chunk(4);
        assert!(a[0] != r4.random::<f64>());
    }

    #[test]
    fn estimate_invariants() {
        let e = Estimate::proportion(0, 1000).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.ci_low, 0.0);
        assert!(e.ci_high < 0.01);
        let e = Estimate::proportion(1000, 1000).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.ci_high, 1.0);
        assert!(e.ci_low > 0.99);
        let e = Estimate::proportion(500, 1000).unwrap();
        assert!(e.ci_low <= e.mean && e.mean <= e.ci_high);
        assert!(e.std_error > 0.0);
        assert!(Estimate::proportion(2, 1).is_err());
        assert!(Estimate::proportion(0, 0).is_err());

        let e = Estimate::from_moments(10.0, 20.0, 5).unwrap();
        assert!((e.mean - 2.0).abs() < 1e-15);
        assert!(e.ci_low <= e.mean && e.mean <= e.ci_high);
    }

    #[test]
    fn estimators_on_degenerate_samples() {
        let zeros = vec![SnrValue::from_linear(0.0).unwrap(); 100];
        let op = estimate_op(&zeros, SnrValue::from_db(2.0)).unwrap();
        assert_eq!(op.mean, 1.0);
        assert_eq!(op.ci_high, 1.0);

        let huge = vec![SnrValue::from_linear(1e18).unwrap(); 100];
        let ook = ModulationScheme::new(ModulationKind::Ook).unwrap();
        let ber = estimate_ber(&huge, &ook).unwrap();
        assert!(ber.mean < 1e-12, "BER at infinite SNR = {}", ber.mean);

        let g0 = 7.5;
        let fixed = vec![SnrValue::from_linear(g0).unwrap(); 100];
        let cap = estimate_capacity(&fixed, 2.0).unwrap();
        assert!((cap.mean - (1.0 + 2.0 * g0).ln()).abs() < 1e-12);
        assert_eq!(cap.std_error, 0.0);

        let m = estimate_moment(&fixed, 2.0).unwrap();
        assert!((m.mean - g0 * g0).abs() < 1e-9);

        assert!(estimate_op(&[], SnrValue::from_db(0.0)).is_err());
    }

    #[test]
    fn conditional_ber_limits_and_erfc_branch() {
        let ook = ModulationScheme::new(ModulationKind::Ook).unwrap();
        assert!((conditional_ber(0.0, &ook).unwrap() - 0.5).abs() < 1e-12);
        assert!(conditional_ber(1e6, &ook).unwrap() < 1e-12);
        // p_B = 1/2 erfc shortcut agrees with the incomplete-gamma form
        let g = 3.7;
        let q = ook.q_bm[0];
        let via_gamma = ook.delta_b
            * upper_incomplete_gamma(0.5, q * g).unwrap()
            / (2.0 * ln_gamma(0.5).unwrap().exp());
        assert!((conditional_ber(g, &ook).unwrap() - via_gamma).abs() < 1e-12);
    }

    #[test]
    fn gg_sampler_moments_and_density() {
        let gg = GGParams {
            alpha: 3.0847,
            beta: 1.0461,
        };
        let n = 2_000_000usize;
        let mut rng = RngStream::new(7).chunk(0);
        let ga = Gamma::new(gg.alpha, 1.0 / gg.alpha).unwrap();
        let gb = Gamma::new(gg.beta, 1.0 / gg.beta).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let x = ga.sample(&mut rng) * gb.sample(&mut rng);
            sum += x;
            sum_sq += x * x;
            samples.push(x);
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = sum_sq / nf - mean * mean;
        let want_var = (1.0 + 1.0 / gg.alpha) * (1.0 + 1.0 / gg.beta) - 1.0;
        // second moment of the product is (1+1/a)(1+1/b); spread of x is
        // heavy-tailed so allow 4 sigma on the variance
        let se_mean = (var / nf).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se_mean, "mean {mean}");
        assert!(
            (var - want_var).abs() < 0.02 * want_var,
            "var {var} vs {want_var}"
        );

        // chi-square against the closed-form density
        let edges: Vec<f64> = (0..=40).map(|i| 0.05 + i as f64 * 0.1).collect();
        let mut counts = vec![0u64; edges.len() + 1];
        for &x in &samples {
            let idx = edges.partition_point(|&e| e < x);
            counts[idx] += 1;
        }
        let mut chi2 = 0.0;
        let mut df = 0.0;
        let mut lo = 1e-9;
        for (i, cnt) in counts.iter().enumerate() {
            let hi = if i < edges.len() { edges[i] } else { 60.0 };
            let p = integrate(
                |h| crate::link_ogs_hap::ha_pdf(h, &gg).unwrap(),
                lo,
                hi,
                1e-10,
            );
            let expect = p * nf;
            if expect > 10.0 {
                chi2 += (*cnt as f64 - expect).powi(2) / expect;
                df += 1.0;
            }
            lo = hi;
        }
        let p = chi2_p(chi2, df - 1.0);
        assert!(p > 0.01, "chi2 = {chi2} over {df} bins, p = {p}");
    }

    #[test]
    fn hg1_sampler_uniform_case_and_mean() {
        let a0 = 0.19834;
        let n = 200_000;
        let mut rng = RngStream::new(11).chunk(0);
        let mut uni: Vec<f64> = (0..n)
            .map(|_| sample_hg1(1.0, a0, &mut rng).unwrap())
            .collect();
        uni.sort_by(f64::total_cmp);
        assert!(*uni.last().unwrap() <= a0);
        let d = ks_stat(&uni, |x| (x / a0).clamp(0.0, 1.0));
        assert!(ks_p(d, n) > 0.01, "uniform KS p = {}", ks_p(d, n));

        let eta2 = 1.1272;
        let m = 500_000;
        let mut sum = 0.0;
        for _ in 0..m {
            sum += sample_hg1(eta2, a0, &mut rng).unwrap();
        }
        let mean = sum / m as f64;
        let want = a0 * eta2 / (eta2 + 1.0);
        assert!((mean - want).abs() < 3e-4 * want, "{mean} vs {want}");
    }

    #[test]
    fn hg2_sampler_matches_printed_density() {
        let (_, p2) = scenario();
        // the coefficient identities behind the change of variables
        let (r1, r2) = gml_change_of_variables_residuals(&p2);
        assert!(r1 < 1e-10 && r2 < 1e-10, "residuals {r1}, {r2}");

        // numeric CDF of the printed density on a fine grid
        let grid_n = 4000;
        let mut cdf_grid = vec![0.0f64; grid_n + 1];
        let mut xs = vec![0.0f64; grid_n + 1];
        for i in 0..=grid_n {
            xs[i] = p2.a02 * (i as f64 / grid_n as f64).max(1e-12);
        }
        for i in 1..=grid_n {
            cdf_grid[i] = cdf_grid[i - 1]
                + integrate(|h| gml_pdf_exact(h, &p2).unwrap(), xs[i - 1], xs[i], 1e-11);
        }
        let total = cdf_grid[grid_n];
        assert!((total - 1.0).abs() < 1e-6, "density mass {total}");
        let cdf = |x: f64| {
            let i = ((x / p2.a02) * grid_n as f64).clamp(0.0, grid_n as f64);
            let (lo, frac) = (i.floor() as usize, i.fract());
            if lo >= grid_n {
                1.0
            } else {
                (cdf_grid[lo] + frac * (cdf_grid[lo + 1] - cdf_grid[lo])) / total
            }
        };

        let n = 200_000;
        let mut rng = RngStream::new(13).chunk(0);
        let mut samples: Vec<f64> = (0..n)
            .map(|_| sample_hg2(&p2, &mut rng).unwrap())
            .collect();
        samples.sort_by(f64::total_cmp);
        assert!(*samples.last().unwrap() <= p2.a02);
        assert!(samples[0] > 0.0);
        let d = ks_stat(&samples, cdf);
        let p = ks_p(d, n);
        assert!(p > 0.01, "KS D = {d}, p = {p}");
    }

    #[test]
    fn hg2_unit_q_collapses_to_exponential() {
        // q_g = 1: -(t_g/2) ln(h/A02) = u1^2 + u2^2 with equal variances is
        // exponential with rate 1/(2 sigma^2)
        let (_, mut p2) = scenario();
        p2.sigma_u2_sq = p2.sigma_u1_sq;
        p2.q_g = 1.0;
        let rate = 1.0 / (2.0 * p2.sigma_u1_sq);
        let n = 200_000;
        let mut rng = RngStream::new(17).chunk(0);
        let mut ys: Vec<f64> = (0..n)
            .map(|_| {
                let h = sample_hg2(&p2, &mut rng).unwrap();
                -(p2.t_g / 2.0) * (h / p2.a02).ln()
            })
            .collect();
        ys.sort_by(f64::total_cmp);
        let d = ks_stat(&ys, |y| 1.0 - (-rate * y).exp());
        let p = ks_p(d, n);
        assert!(p > 0.01, "exponential KS p = {p}");
    }

    #[test]
    fn simulator_composes_the_channel_factors() {
        let (p1, p2) = scenario();
        let sim = Simulator::new(&p1, &p2, relay()).unwrap();
        let stream = RngStream::new(5);

        // hop 1: reproduce the draw from the same substream by hand
        let mut rng = stream.chunk(0);
        let snr = sim.hop1_snr(&mut rng);
        let mut rng2 = stream.chunk(0);
        let ha = sample_gg(&p1.gg, &mut rng2).unwrap();
        let hg = sample_hg1(p1.eta_s2, p1.a01, &mut rng2).unwrap();
        let want = relay().gamma_bar_1.linear() * (p1.h_p1 * ha * hg).powf(p1.r1);
        assert!((snr - want).abs() < 1e-12 * want, "{snr} vs {want}");

        // hop 2 likewise
        let mut rng = stream.chunk(1);
        let snr = sim.hop2_snr(&mut rng);
        let mut rng2 = stream.chunk(1);
        let ha = sample_gg(&p2.gg, &mut rng2).unwrap();
        let hg = sample_hg2(&p2, &mut rng2).unwrap();
        let want = relay().gamma_bar_2.linear() * (p2.h_p2 * ha * hg).powf(p2.r2);
        assert!((snr - want).abs() < 1e-12 * want, "{snr} vs {want}");

        // e2e combiner applied to the two hop draws
        let mut rng = stream.chunk(2);
        let snr = sim.e2e_snr(&mut rng);
        let mut rng2 = stream.chunk(2);
        let g1 = sim.hop1_snr(&mut rng2);
        let g2 = sim.hop2_snr(&mut rng2);
        assert!((snr - g1 * g2 / (g2 + 1.0)).abs() < 1e-12 * snr);
    }

    #[test]
    fn parallel_reduction_is_deterministic() {
        let (p1, p2) = scenario();
        let sim = Simulator::new(&p1, &p2, relay()).unwrap();
        let stream = RngStream::new(99);
        let gth = SnrValue::from_db(2.0);
        let n = 3 * CHUNK_SIZE + 1234;
        let a = mc_outage(&sim, Scope::E2e, gth, n, stream).unwrap();
        let b = mc_outage(&sim, Scope::E2e, gth, n, stream).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.n, n);

        // single-worker run reduces to the same bits
        std::env::set_var("FSO_LINK_LAB_THREADS", "1");
        let c = mc_outage(&sim, Scope::E2e, gth, n, stream).unwrap();
        std::env::remove_var("FSO_LINK_LAB_THREADS");
        assert_eq!(a.mean.to_bits(), c.mean.to_bits());

        let m1 = mc_moment(&sim, Scope::Hop1, 1.0, n, stream).unwrap();
        let m2 = mc_moment(&sim, Scope::Hop1, 1.0, n, stream).unwrap();
        assert_eq!(m1.mean.to_bits(), m2.mean.to_bits());
    }

    #[test]
    fn streaming_and_materialized_paths_agree() {
        let (p1, p2) = scenario();
        let sim = Simulator::new(&p1, &p2, relay()).unwrap();
        let stream = RngStream::new(21);
        let n = CHUNK_SIZE / 2; // single chunk: same sample sequence
        let gth = SnrValue::from_db(2.0);
        let streaming = mc_outage(&sim, Scope::Hop2, gth, n, stream).unwrap();
        let mut rng = stream.chunk(0);
        let samples = simulate(&sim, Scope::Hop2, n as usize, &mut rng).unwrap();
        let direct = estimate_op(&samples, gth).unwrap();
        assert_eq!(streaming.mean.to_bits(), direct.mean.to_bits());
    }
}
