use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fso_link_lab::cli::{
    params_report, parse_modulation, run_calibrate, run_curve, run_figure, run_selfcheck, to_csv,
    to_json, CurveSpec, Metric,
};
use fso_link_lab::montecarlo::Scope;
use fso_link_lab::scenario::{assemble, Detection, SystemConfig};
use fso_link_lab::Error;

/// Closed-form and Monte Carlo performance analysis of a three-hop
/// free-space optical relay link.
#[derive(Parser)]
#[command(name = "fso-link-lab", version)]
struct Args {
    /// Path to a key = value configuration file (defaults otherwise)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for all randomized commands (printed in the report header)
    #[arg(long, global = true, default_value_t = 2026)]
    seed: u64,

    /// Monte Carlo samples per point (0 disables the MC columns)
    #[arg(long, global = true, default_value_t = 0)]
    samples: u64,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format: csv | json
    #[arg(long, global = true, default_value = "csv")]
    format: String,

    /// Override both detection modes: imdd | heterodyne
    #[arg(long, global = true)]
    detection: Option<String>,

    /// Override the fixed relay gain constant C
    #[arg(long, global = true)]
    relay_gain: Option<f64>,

    /// Override the series truncation depth N_k
    #[arg(long, global = true)]
    nk: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the assembled channel parameters
    Params,
    /// Sweep one metric over the average SNR
    Curve {
        /// op | ber | capacity | moment
        #[arg(long)]
        metric: String,
        /// hop1 | hop2 | e2e
        #[arg(long, default_value = "e2e")]
        scope: String,
        /// Sweep start in dB
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        /// Sweep end in dB
        #[arg(long, default_value_t = 60.0)]
        to: f64,
        /// Sweep step in dB
        #[arg(long, default_value_t = 5.0)]
        step: f64,
        /// Add the high-SNR asymptote column (end-to-end op/ber only)
        #[arg(long)]
        asymptotic: bool,
        /// ook | qamM | pskM (ber metric)
        #[arg(long, default_value = "ook")]
        modulation: String,
        /// Moment order (moment metric)
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Reproduce the data behind one figure (fig4..fig9)
    Figure {
        id: String,
        /// Directory for the per-series CSV files
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the built-in consistency suite (exit 4 on failure)
    Selfcheck,
    /// Fit the relay gain C to reference outage points "db:op,db:op,..."
    CalibrateC {
        #[arg(long)]
        points: String,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownFigure(_) => 2,
        _ => 3,
    }
}

fn load_config(args: &Args) -> Result<SystemConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            SystemConfig::parse(&text)?
        }
        None => SystemConfig::default(),
    };
    if let Some(det) = &args.detection {
        let det = Detection::parse(det)?;
        cfg.det1 = det;
        cfg.det2 = det;
    }
    if let Some(c) = args.relay_gain {
        if !(c > 0.0) {
            return Err(Error::Config(format!("relay gain must be > 0 (got {c})")));
        }
        cfg.relay_gain_c = c;
    }
    if let Some(nk) = args.nk {
        cfg.n_k = nk;
    }
    Ok(cfg)
}

fn emit(args: &Args, text: &str) -> Result<(), Error> {
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: &Args) -> Result<u8, Error> {
    let cfg = load_config(args)?;
    let json = match args.format.as_str() {
        "csv" => false,
        "json" => true,
        other => {
            return Err(Error::Config(format!(
                "unknown format '{other}' (expected csv|json)"
            )))
        }
    };
    match &args.cmd {
        Cmd::Params => {
            let sc = assemble(&cfg)?;
            emit(args, &params_report(&sc, json)?)?;
        }
        Cmd::Curve {
            metric,
            scope,
            from,
            to,
            step,
            asymptotic,
            modulation,
            s,
        } => {
            let sc = assemble(&cfg)?;
            let spec = CurveSpec {
                metric: Metric::parse(metric)?,
                scope: Scope::parse(scope)?,
                from_db: *from,
                to_db: *to,
                step_db: *step,
                mc_samples: args.samples,
                asymptotic: *asymptotic,
                modulation: parse_modulation(modulation)?,
                moment_order: *s,
            };
            let points = run_curve(&sc, &spec, args.seed)?;
            let text = if json {
                to_json(&points, args.seed)?
            } else {
                to_csv(&points, args.seed)
            };
            emit(args, &text)?;
        }
        Cmd::Figure { id, out_dir } => {
            let files = run_figure(&cfg, id, args.samples, args.seed)?;
            std::fs::create_dir_all(out_dir)
                .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
            for (name, contents) in &files {
                let path = out_dir.join(name);
                std::fs::write(&path, contents)
                    .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
        }
        Cmd::Selfcheck => {
            let (ok, report) = run_selfcheck(&cfg, args.seed);
            emit(args, &report)?;
            if !ok {
                return Ok(4);
            }
        }
        Cmd::CalibrateC { points } => {
            let (_, report) = run_calibrate(&cfg, points)?;
            emit(args, &report)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
