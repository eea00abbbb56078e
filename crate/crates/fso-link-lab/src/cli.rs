//! Batch front door: parameter reports, closed-form sweeps with optional
//! Monte Carlo validation columns, figure-reproduction recipes, the
//! self-check suite, and relay-gain calibration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::e2e::{self, RelayConfig};
use crate::error::{Error, Result};
use crate::link_hap_user::{self, gml_pdf_approx, gml_pdf_exact, ModulationKind, ModulationScheme};
use crate::link_ogs_hap::{self, SnrValue};
use crate::montecarlo::{
    gml_change_of_variables_residuals, mc_avg_ber, mc_capacity, mc_moment, mc_outage, RngStream,
    Scope, Simulator,
};
use crate::scenario::{assemble, Detection, Scenario, SystemConfig};
use serde::Serialize;

/// One row of a sweep: closed form, optional asymptote, optional MC twin.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub x_db: f64,
    pub analytic: f64,
    pub asymptotic: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_ci_low: Option<f64>,
    pub mc_ci_high: Option<f64>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Op,
    Ber,
    Capacity,
    Moment,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "op" => Ok(Metric::Op),
            "ber" => Ok(Metric::Ber),
            "capacity" => Ok(Metric::Capacity),
            "moment" => Ok(Metric::Moment),
            other => Err(Error::Config(format!(
                "unknown metric '{other}' (expected op|ber|capacity|moment)"
            ))),
        }
    }
}

/// Modulation names accepted on the command line: ook, qamM, pskM.
pub fn parse_modulation(s: &str) -> Result<ModulationKind> {
    let parse_m = |rest: &str| -> Result<u32> {
        rest.parse::<u32>()
            .map_err(|_| Error::Config(format!("bad modulation order in '{s}'")))
    };
    if s == "ook" {
        Ok(ModulationKind::Ook)
    } else if let Some(rest) = s.strip_prefix("qam") {
        Ok(ModulationKind::Mqam(parse_m(rest)?))
    } else if let Some(rest) = s.strip_prefix("psk") {
        Ok(ModulationKind::Mpsk(parse_m(rest)?))
    } else {
        Err(Error::Config(format!(
            "unknown modulation '{s}' (expected ook|qamM|pskM)"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct CurveSpec {
    pub metric: Metric,
    pub scope: Scope,
    pub from_db: f64,
    pub to_db: f64,
    pub step_db: f64,
    pub mc_samples: u64,
    pub asymptotic: bool,
    pub modulation: ModulationKind,
    pub moment_order: f64,
}

pub fn grid(from_db: f64, to_db: f64, step_db: f64) -> Result<Vec<f64>> {
    if !(step_db > 0.0) || to_db < from_db {
        return Err(Error::Config(format!(
            "bad grid {from_db}..{to_db} step {step_db}"
        )));
    }
    let n = ((to_db - from_db) / step_db).round() as usize;
    Ok((0..=n).map(|i| from_db + i as f64 * step_db).collect())
}

fn point_stream(seed: u64, index: usize) -> RngStream {
    RngStream::new(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Run a sweep over the average SNR for one metric and scope.
pub fn run_curve(sc: &Scenario, spec: &CurveSpec, seed: u64) -> Result<Vec<CurvePoint>> {
    let cfg = &sc.cfg;
    let gth = SnrValue::from_db(cfg.gamma_th_db);
    let scheme = ModulationScheme::new(spec.modulation)?;
    let c0 = cfg.effective_c0(match spec.scope {
        Scope::Hop2 => cfg.det2,
        _ => cfg.det1,
    });
    let mut points = Vec::new();
    for (i, &db) in grid(spec.from_db, spec.to_db, spec.step_db)?.iter().enumerate() {
        let gbar = SnrValue::from_db(db);
        let relay = RelayConfig::locked(cfg.relay_gain_c, gbar)?;
        let mut warn = Vec::new();
        let err_at = |e: Error| Error::Numerical(format!("at x_db = {db}: {e}"));
        let analytic = match (spec.metric, spec.scope) {
            (Metric::Op, Scope::Hop1) => {
                link_ogs_hap::snr_cdf(gth, &sc.link1, gbar).map_err(err_at)?
            }
            (Metric::Op, Scope::Hop2) => {
                link_hap_user::snr_cdf(gth, &sc.link2, gbar).map_err(err_at)?
            }
            (Metric::Op, Scope::E2e) => {
                e2e::e2e_cdf(gth, &sc.link1, &sc.link2, &relay).map_err(err_at)?
            }
            (Metric::Ber, Scope::Hop2) => {
                link_hap_user::avg_ber(&scheme, &sc.link2, gbar, &mut warn).map_err(err_at)?
            }
            (Metric::Ber, Scope::E2e) => {
                e2e::e2e_avg_ber(&scheme, &sc.link1, &sc.link2, &relay, &mut warn)
                    .map_err(err_at)?
            }
            (Metric::Capacity, Scope::Hop2) => {
                link_hap_user::capacity(&sc.link2, gbar, c0).map_err(err_at)?
            }
            (Metric::Capacity, Scope::E2e) => {
                e2e::e2e_capacity(&sc.link1, &sc.link2, &relay, c0).map_err(err_at)?
            }
            (Metric::Moment, Scope::Hop2) => {
                link_hap_user::moment(spec.moment_order, &sc.link2, gbar).map_err(err_at)?
            }
            (Metric::Moment, Scope::E2e) => {
                e2e::e2e_moment(spec.moment_order, &sc.link1, &sc.link2, &relay)
                    .map_err(err_at)?
            }
            (m, s) => {
                return Err(Error::Config(format!(
                    "metric {m:?} is not available for scope {s:?}"
                )))
            }
        };
        let asymptotic = if spec.asymptotic {
            match (spec.metric, spec.scope) {
                (Metric::Op, Scope::E2e) => {
                    Some(e2e::e2e_cdf_asymptotic(gth, &sc.link1, &sc.link2, &relay)
                        .map_err(err_at)?)
                }
                (Metric::Ber, Scope::E2e) => Some(
                    e2e::e2e_avg_ber_asymptotic(&scheme, &sc.link1, &sc.link2, &relay)
                        .map_err(err_at)?,
                ),
                _ => None,
            }
        } else {
            None
        };
        let mc = if spec.mc_samples > 0 {
            let sim = Simulator::new(&sc.link1, &sc.link2, relay)?;
            let stream = point_stream(seed, i);
            Some(match spec.metric {
                Metric::Op => mc_outage(&sim, spec.scope, gth, spec.mc_samples, stream)?,
                Metric::Ber => mc_avg_ber(&sim, spec.scope, &scheme, spec.mc_samples, stream)?,
                Metric::Capacity => mc_capacity(&sim, spec.scope, c0, spec.mc_samples, stream)?,
                Metric::Moment => {
                    mc_moment(&sim, spec.scope, spec.moment_order, spec.mc_samples, stream)?
                }
            })
        } else {
            None
        };
        let mut meta = BTreeMap::new();
        meta.insert("c".into(), format!("{}", cfg.relay_gain_c));
        meta.insert("n_k".into(), format!("{}", cfg.n_k));
        if !sc.warnings.is_empty() {
            meta.insert("perturbations".into(), format!("{}", sc.warnings.len()));
        }
        for w in warn {
            meta.insert("warning".into(), w);
        }
        if let Some(e) = &mc {
            if analytic < e.ci_low - 1e-12 || analytic > e.ci_high + 1e-12 {
                meta.insert("DISAGREE".into(), "analytic outside MC 99% CI".into());
            }
        }
        points.push(CurvePoint {
            x_db: db,
            analytic,
            asymptotic,
            mc_mean: mc.as_ref().map(|e| e.mean),
            mc_ci_low: mc.as_ref().map(|e| e.ci_low),
            mc_ci_high: mc.as_ref().map(|e| e.ci_high),
            meta,
        });
    }
    Ok(points)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// CSV rendering: comment header with the seed, fixed column set, meta in
/// trailing comment lines so the column contract stays exact.
pub fn to_csv(points: &[CurvePoint], seed: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# seed = {seed}");
    if let Some(p) = points.first() {
        for (k, v) in &p.meta {
            if k != "DISAGREE" {
                let _ = writeln!(out, "# {k} = {v}");
            }
        }
    }
    let _ = writeln!(out, "x_db,analytic,asymptotic,mc_mean,mc_ci_low,mc_ci_high");
    for p in points {
        let _ = writeln!(
            out,
            "{},{:.12e},{},{},{},{}",
            p.x_db,
            p.analytic,
            fmt_opt(p.asymptotic),
            fmt_opt(p.mc_mean),
            fmt_opt(p.mc_ci_low),
            fmt_opt(p.mc_ci_high)
        );
    }
    for p in points {
        if let Some(d) = p.meta.get("DISAGREE") {
            let _ = writeln!(out, "# DISAGREE x_db = {}: {d}", p.x_db);
        }
    }
    out
}

pub fn to_json(points: &[CurvePoint], seed: u64) -> Result<String> {
    let doc = serde_json::json!({ "seed": seed, "points": points });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Numerical(format!("json: {e}")))
}

/// Deterministic parameter report for an assembled scenario.
pub fn params_report(sc: &Scenario, json: bool) -> Result<String> {
    let doc = serde_json::json!({
        "geometry": {
            "d_oh_m": sc.geom.d_oh,
            "d_hi_m": sc.geom.d_hi,
            "d_iu_m": sc.geom.d_iu,
            "zeta2_deg": sc.geom.zeta2.to_degrees(),
            "zeta3_deg": sc.geom.zeta3.to_degrees(),
        },
        "link1": {
            "alpha1": sc.link1.gg.alpha,
            "beta1": sc.link1.gg.beta,
            "eta_s2": sc.link1.eta_s2,
            "a01": sc.link1.a01,
            "h_p1": sc.link1.h_p1,
            "r1": sc.link1.r1,
        },
        "link2": {
            "alpha2": sc.link2.gg.alpha,
            "beta2": sc.link2.gg.beta,
            "varpi": sc.link2.varpi,
            "q_g": sc.link2.q_g,
            "w": sc.link2.w(),
            "a02": sc.link2.a02,
            "t_g": sc.link2.t_g,
            "h_p2": sc.link2.h_p2,
            "norm_n": sc.link2.norm_n,
            "n_k": sc.link2.n_k,
            "r2": sc.link2.r2,
        },
        "gamma_th_db": sc.cfg.gamma_th_db,
        "relay_gain_c": sc.cfg.relay_gain_c,
        "warnings": sc.warnings,
    });
    if json {
        return serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Numerical(format!("json: {e}")));
    }
    let mut out = String::new();
    let _ = writeln!(out, "geometry:");
    let _ = writeln!(out, "  d_oh = {:.3} m", sc.geom.d_oh);
    let _ = writeln!(out, "  d_hi = {:.3} m", sc.geom.d_hi);
    let _ = writeln!(out, "  d_iu = {:.3} m", sc.geom.d_iu);
    let _ = writeln!(out, "link 1 (ground station -> platform):");
    let _ = writeln!(out, "  alpha1 = {:.6}", sc.link1.gg.alpha);
    let _ = writeln!(out, "  beta1 = {:.6}", sc.link1.gg.beta);
    let _ = writeln!(out, "  eta_s2 = {:.6}", sc.link1.eta_s2);
    let _ = writeln!(out, "  a01 = {:.6}", sc.link1.a01);
    let _ = writeln!(out, "  h_p1 = {:.6}", sc.link1.h_p1);
    let _ = writeln!(out, "  r1 = {}", sc.link1.r1);
    let _ = writeln!(out, "link 2 (platform -> reflector -> user):");
    let _ = writeln!(out, "  alpha2 = {:.6}", sc.link2.gg.alpha);
    let _ = writeln!(out, "  beta2 = {:.6}", sc.link2.gg.beta);
    let _ = writeln!(out, "  varpi = {:.6}", sc.link2.varpi);
    let _ = writeln!(out, "  q_g = {:.6}", sc.link2.q_g);
    let _ = writeln!(out, "  w = {:.6}", sc.link2.w());
    let _ = writeln!(out, "  a02 = {:.6}", sc.link2.a02);
    let _ = writeln!(out, "  t_g = {:.6e}", sc.link2.t_g);
    let _ = writeln!(out, "  h_p2 = {:.6}", sc.link2.h_p2);
    let _ = writeln!(out, "  norm_n = {:.6}", sc.link2.norm_n);
    let _ = writeln!(out, "  n_k = {}", sc.link2.n_k);
    let _ = writeln!(out, "  r2 = {}", sc.link2.r2);
    let _ = writeln!(out, "gamma_th = {} dB", sc.cfg.gamma_th_db);
    let _ = writeln!(out, "relay gain C = {}", sc.cfg.relay_gain_c);
    for w in &sc.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    Ok(out)
}

/// The four fluctuation triples used by the figure recipes, as multiples of
/// (a_l/2): the shared baseline plus one doubled component at a time.
fn fluctuation_triples() -> [(&'static str, [f64; 3]); 4] {
    [
        ("base", [1.0, 1.0, 1.0]),
        ("laser2x", [2.0, 1.0, 1.0]),
        ("oirs2x", [1.0, 2.0, 1.0]),
        ("lens2x", [1.0, 1.0, 2.0]),
    ]
}

fn with_fluctuations(cfg: &SystemConfig, mult: [f64; 3]) -> SystemConfig {
    let mut c = cfg.clone();
    c.sigma_s = 0.5 * cfg.a_l * mult[0];
    c.sigma_r = 0.5 * cfg.a_l * mult[1];
    c.sigma_l = 0.5 * cfg.a_l * mult[2];
    c
}

fn detection_cfg(cfg: &SystemConfig, det: Detection) -> SystemConfig {
    let mut c = cfg.clone();
    c.det1 = det;
    c.det2 = det;
    c
}

/// Emit the data files behind one figure as (filename, contents) pairs.
pub fn run_figure(
    base: &SystemConfig,
    id: &str,
    mc_samples: u64,
    seed: u64,
) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    match id {
        "fig4" => {
            // exact vs approximate misalignment density, four fluctuation triples
            for (name, mult) in fluctuation_triples() {
                let sc = assemble(&with_fluctuations(base, mult))?;
                let mut out = String::new();
                let _ = writeln!(out, "# seed = {seed}");
                let _ = writeln!(out, "h,exact,approx");
                for i in 1..=200 {
                    let h = sc.link2.a02 * i as f64 / 200.0;
                    let _ = writeln!(
                        out,
                        "{h:.8e},{:.12e},{:.12e}",
                        gml_pdf_exact(h, &sc.link2)?,
                        gml_pdf_approx(h, &sc.link2, sc.link2.n_k)?
                    );
                }
                files.push((format!("fig4_{name}.csv"), out));
            }
        }
        "fig5" => {
            // second-hop outage vs average SNR, both detections
            for det in [Detection::ImDd, Detection::Heterodyne] {
                for (name, mult) in fluctuation_triples() {
                    let cfg = detection_cfg(&with_fluctuations(base, mult), det);
                    let sc = assemble(&cfg)?;
                    let spec = CurveSpec {
                        metric: Metric::Op,
                        scope: Scope::Hop2,
                        from_db: 0.0,
                        to_db: 60.0,
                        step_db: 5.0,
                        mc_samples,
                        asymptotic: false,
                        modulation: ModulationKind::Ook,
                        moment_order: 1.0,
                    };
                    let pts = run_curve(&sc, &spec, seed)?;
                    let det_name = if det == Detection::ImDd { "imdd" } else { "het" };
                    files.push((format!("fig5_{det_name}_{name}.csv"), to_csv(&pts, seed)));
                }
            }
        }
        "fig6" => {
            // second-hop average BER vs SNR per modulation; the detection
            // follows the modulation's native receiver
            for (name, kind) in [
                ("ook", ModulationKind::Ook),
                ("qam4", ModulationKind::Mqam(4)),
                ("qam16", ModulationKind::Mqam(16)),
                ("psk4", ModulationKind::Mpsk(4)),
                ("psk16", ModulationKind::Mpsk(16)),
            ] {
                let scheme = ModulationScheme::new(kind)?;
                let sc = assemble(&detection_cfg(base, scheme.detection))?;
                let spec = CurveSpec {
                    metric: Metric::Ber,
                    scope: Scope::Hop2,
                    from_db: 0.0,
                    to_db: 60.0,
                    step_db: 5.0,
                    mc_samples,
                    asymptotic: false,
                    modulation: kind,
                    moment_order: 1.0,
                };
                let pts = run_curve(&sc, &spec, seed)?;
                files.push((format!("fig6_{name}.csv"), to_csv(&pts, seed)));
            }
        }
        "fig7" => {
            // end-to-end outage vs SNR for three zenith angles, heterodyne,
            // with the high-SNR asymptote
            for z in [50.0f64, 55.0, 60.0] {
                let mut cfg = detection_cfg(base, Detection::Heterodyne);
                cfg.zeta_1 = z.to_radians();
                let sc = assemble(&cfg)?;
                let spec = CurveSpec {
                    metric: Metric::Op,
                    scope: Scope::E2e,
                    from_db: 0.0,
                    to_db: 60.0,
                    step_db: 5.0,
                    mc_samples,
                    asymptotic: true,
                    modulation: ModulationKind::Ook,
                    moment_order: 1.0,
                };
                let pts = run_curve(&sc, &spec, seed)?;
                files.push((format!("fig7_z{z:.0}.csv"), to_csv(&pts, seed)));
            }
        }
        "fig8" => {
            // second-hop capacity vs SNR, four triples, both detections
            for det in [Detection::Heterodyne, Detection::ImDd] {
                for (name, mult) in fluctuation_triples() {
                    let cfg = detection_cfg(&with_fluctuations(base, mult), det);
                    let sc = assemble(&cfg)?;
                    let spec = CurveSpec {
                        metric: Metric::Capacity,
                        scope: Scope::Hop2,
                        from_db: 0.0,
                        to_db: 60.0,
                        step_db: 5.0,
                        mc_samples,
                        asymptotic: false,
                        modulation: ModulationKind::Ook,
                        moment_order: 1.0,
                    };
                    let pts = run_curve(&sc, &spec, seed)?;
                    let det_name = if det == Detection::ImDd { "imdd" } else { "het" };
                    files.push((format!("fig8_{det_name}_{name}.csv"), to_csv(&pts, seed)));
                }
            }
        }
        "fig9" => {
            // amplify-and-forward vs decode-and-forward outage per zenith angle
            for z in [50.0f64, 55.0, 60.0] {
                let mut cfg = base.clone();
                cfg.zeta_1 = z.to_radians();
                let sc = assemble(&cfg)?;
                let gth = SnrValue::from_db(cfg.gamma_th_db);
                let mut out = String::new();
                let _ = writeln!(out, "# seed = {seed}");
                let _ = writeln!(out, "# c = {}", cfg.relay_gain_c);
                let _ = writeln!(out, "x_db,af,df");
                for &db in &grid(0.0, 60.0, 5.0)? {
                    let gbar = SnrValue::from_db(db);
                    let relay = RelayConfig::locked(cfg.relay_gain_c, gbar)?;
                    let af = e2e::e2e_cdf(gth, &sc.link1, &sc.link2, &relay)?;
                    let df =
                        e2e::df_outage_reference(gth, &sc.link1, &sc.link2, gbar, gbar)?;
                    let _ = writeln!(out, "{db},{af:.12e},{df:.12e}");
                }
                files.push((format!("fig9_z{z:.0}.csv"), out));
            }
        }
        other => return Err(Error::UnknownFigure(other.to_string())),
    }
    Ok(files)
}

fn record(report: &mut String, ok: &mut bool, name: &str, res: Result<bool>, detail: String) {
    match res {
        Ok(true) => {
            let _ = writeln!(report, "PASS {name}{detail}");
        }
        Ok(false) => {
            *ok = false;
            let _ = writeln!(report, "FAIL {name}{detail}");
        }
        Err(e) => {
            *ok = false;
            let _ = writeln!(report, "FAIL {name}: {e}");
        }
    }
}

/// Run the self-check suite; returns (all_passed, report).
pub fn run_selfcheck(cfg: &SystemConfig, seed: u64) -> (bool, String) {
    let mut report = String::new();
    let mut ok = true;
    let _ = writeln!(report, "# seed = {seed}");

    let sc = match assemble(cfg) {
        Ok(sc) => sc,
        Err(e) => {
            return (false, format!("FAIL assemble: {e}\n"));
        }
    };
    let _ = writeln!(
        report,
        "# perturbation warnings = {}",
        sc.warnings.len()
    );

    // special-function identities
    {
        use crate::specfun::{meijer_g, ContourConfig};
        let cfg_c = ContourConfig::default();
        let res = (|| -> Result<bool> {
            // G^{1,0}_{0,1}(z | -; 0) = exp(-z)
            let mut worst: f64 = 0.0;
            for &z in &[0.3, 1.0, 4.0] {
                let v = meijer_g(1, 0, &[], &[0.0], z, &cfg_c)?;
                worst = worst.max((v - (-z as f64).exp()).abs() / (-z as f64).exp());
            }
            Ok(worst < 1e-9)
        })();
        record(&mut report, &mut ok, "meijer-g exponential identity", res, String::new());
    }

    // density normalizations
    {
        use crate::quad::integrate;
        let res = (|| -> Result<bool> {
            let total = integrate(
                |h| gml_pdf_approx(h, &sc.link2, sc.link2.n_k).unwrap_or(f64::NAN),
                1e-12 * sc.link2.a02,
                sc.link2.a02,
                1e-9,
            );
            Ok((total - 1.0).abs() < 1e-6)
        })();
        record(&mut report, &mut ok, "misalignment density normalization", res, String::new());
    }

    // zeroth moments
    {
        let gbar = SnrValue::from_db(25.0);
        let res = (|| -> Result<bool> {
            let m0 = link_hap_user::moment(1e-9, &sc.link2, gbar)?;
            let relay = RelayConfig::locked(cfg.relay_gain_c, gbar)?;
            let m0e = e2e::e2e_moment(1e-6, &sc.link1, &sc.link2, &relay)?;
            Ok((m0 - 1.0).abs() < 1e-4 && (m0e - 1.0).abs() < 1e-4)
        })();
        record(&mut report, &mut ok, "zeroth moments", res, String::new());
    }

    // change-of-variables identities behind the misalignment sampler
    {
        let (r1, r2) = gml_change_of_variables_residuals(&sc.link2);
        record(&mut report, &mut ok, 
            "misalignment change-of-variables identities",
            Ok(r1 < 1e-10 && r2 < 1e-10),
            format!(" (residuals {r1:.2e}, {r2:.2e})"),
        );
    }

    // MC smoke comparison: second-hop outage at 30 dB, one million samples
    {
        let res = (|| -> Result<bool> {
            let gbar = SnrValue::from_db(30.0);
            let relay = RelayConfig::locked(cfg.relay_gain_c, gbar)?;
            let sim = Simulator::new(&sc.link1, &sc.link2, relay)?;
            let gth = SnrValue::from_db(cfg.gamma_th_db);
            let est = mc_outage(&sim, Scope::Hop2, gth, 1_000_000, RngStream::new(seed))?;
            let analytic = link_hap_user::snr_cdf(gth, &sc.link2, gbar)?;
            Ok(analytic >= est.ci_low && analytic <= est.ci_high)
        })();
        record(&mut report, &mut ok, "MC smoke comparison (hop-2 outage, 1e6 samples)", res, String::new());
    }

    (ok, report)
}

/// Fit the relay gain to reference outage points "db:op,db:op,...".
pub fn run_calibrate(cfg: &SystemConfig, points_arg: &str) -> Result<(f64, String)> {
    let sc = assemble(cfg)?;
    let mut pts = Vec::new();
    for item in points_arg.split(',') {
        let (db, op) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad point '{item}' (expected db:op)")))?;
        let db: f64 = db
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad dB value '{db}'")))?;
        let op: f64 = op
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad outage value '{op}'")))?;
        pts.push((SnrValue::from_db(db), op));
    }
    let gth = SnrValue::from_db(cfg.gamma_th_db);
    let c = e2e::calibrate_c(gth, &sc.link1, &sc.link2, &pts)?;
    let mut report = String::new();
    let _ = writeln!(report, "calibrated relay gain C = {c:.6}");
    for (gbar, target) in &pts {
        let relay = RelayConfig::new(c, *gbar, *gbar)?;
        let got = e2e::e2e_cdf(gth, &sc.link1, &sc.link2, &relay)?;
        let _ = writeln!(
            report,
            "  {:.1} dB: outage {got:.4e} vs target {target:.4e}",
            gbar.db()
        );
    }
    Ok((c, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = grid(0.0, 60.0, 5.0).unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 60.0);
        assert!(grid(10.0, 0.0, 5.0).is_err());
        assert!(grid(0.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn modulation_parsing() {
        assert!(matches!(parse_modulation("ook"), Ok(ModulationKind::Ook)));
        assert!(matches!(
            parse_modulation("qam16"),
            Ok(ModulationKind::Mqam(16))
        ));
        assert!(matches!(
            parse_modulation("psk4"),
            Ok(ModulationKind::Mpsk(4))
        ));
        assert!(parse_modulation("fm").is_err());
        assert!(parse_modulation("qamx").is_err());
    }

    #[test]
    fn csv_shape_and_byte_stability() {
        let cfg = SystemConfig::default();
        let sc = assemble(&cfg).unwrap();
        let spec = CurveSpec {
            metric: Metric::Op,
            scope: Scope::Hop2,
            from_db: 10.0,
            to_db: 30.0,
            step_db: 10.0,
            mc_samples: 20_000,
            asymptotic: false,
            modulation: ModulationKind::Ook,
            moment_order: 1.0,
        };
        let a = to_csv(&run_curve(&sc, &spec, 7).unwrap(), 7);
        let b = to_csv(&run_curve(&sc, &spec, 7).unwrap(), 7);
        assert_eq!(a, b);
        let mut lines = a.lines().filter(|l| !l.starts_with('#'));
        assert_eq!(
            lines.next().unwrap(),
            "x_db,analytic,asymptotic,mc_mean,mc_ci_low,mc_ci_high"
        );
        assert_eq!(lines.count(), 3);
        // --mc 0 leaves the MC columns blank
        let dry = CurveSpec {
            mc_samples: 0,
            ..spec
        };
        let c = to_csv(&run_curve(&sc, &dry, 7).unwrap(), 7);
        let row = c.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
        assert!(row.ends_with(",,,"), "row = {row}");
    }

    #[test]
    fn params_report_mentions_series_depth() {
        let sc = assemble(&SystemConfig::default()).unwrap();
        let text = params_report(&sc, false).unwrap();
        assert!(text.contains("n_k = 5"));
        let json = params_report(&sc, true).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["link2"]["n_k"], 5);
    }

    #[test]
    fn unknown_figure_is_rejected() {
        let cfg = SystemConfig::default();
        assert!(matches!(
            run_figure(&cfg, "fig99", 0, 1),
            Err(Error::UnknownFigure(_))
        ));
    }

    #[test]
    fn selfcheck_passes_on_defaults() {
        let (ok, report) = run_selfcheck(&SystemConfig::default(), 3);
        assert!(ok, "selfcheck report:\n{report}");
        assert!(report.contains("PASS"));
        assert!(!report.contains("FAIL"));
    }
}
