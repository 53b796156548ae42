//! kerrtrap: batch front-end exposing the trapped-set computations as
//! subcommands with CSV/JSON output.
//!
//! Exit codes: 0 success; 1 usage or runtime error; 2 the computation
//! succeeded but the checked property fails (not subextremal, bound or
//! residual violated).

mod config;
mod schema;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use kerrtrap::flow::{integrate_hp, trajectory_to_csv, IntegratorSpec, Rescale};
use kerrtrap::normal_form::{
    verify_canonical_with, BracketMode, BracketResidual, NormalFormConfig,
};
use kerrtrap::phase::PhasePoint;
use kerrtrap::spacetime::classify_subextremal;
use kerrtrap::symbol::{estimate_orders, BuiltinSymbol, SymbolGrid};
use kerrtrap::trapping::{
    expansion_rate, nu_bounds, sample_near_gamma, sample_trapped_set, GridSpec,
};

use config::{Format, RunConfig};

#[derive(Parser)]
#[command(
    name = "kerrtrap",
    version,
    about = "Kerr(-de Sitter) trapped-set toolkit"
)]
struct Cli {
    /// Flat key=value config file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Black-hole mass (geometric units).
    #[arg(long, global = true, allow_negative_numbers = true)]
    mass: Option<f64>,

    /// Angular momentum.
    #[arg(long, global = true, allow_negative_numbers = true)]
    spin: Option<f64>,

    /// Cosmological constant.
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,

    /// Blow-up order for symbol estimates.
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,

    /// RNG seed for sampling commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Grid resolution (momentum angles) for sweeps.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format where a command supports both.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Adaptive integrator tolerance.
    #[arg(long = "tol-integrator", global = true)]
    tol_integrator: Option<f64>,

    /// Pass threshold on the canonical bracket residual.
    #[arg(long = "tol-canonical", global = true)]
    tol_canonical: Option<f64>,

    /// Floor for the generating-function rank check.
    #[arg(long = "tol-rank", global = true)]
    tol_rank: Option<f64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify the horizon structure of the parameter set.
    Subextremal,
    /// Sample the trapped set; CSV columns
    /// xi_t,xi_phi,r_crit,theta,xi_theta,w_u,w_s.
    TrappedSet {
        /// Number of samples.
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Global expansion-rate bounds over the trapped set (JSON).
    Rates,
    /// Integrate the H_p flow from an initial phase point (trajectory CSV).
    Flow {
        /// Initial point "t,r,theta,phi,xi_t,xi_r,xi_theta,xi_phi".
        #[arg(long)]
        init: String,
        /// Flow-parameter duration (may be negative).
        #[arg(long, allow_negative_numbers = true)]
        duration: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Adaptive)]
        method: MethodArg,
        /// Fixed step size (fixed method).
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Normalize the field by (xi_t^2 + xi_phi^2)^{-1/2}.
        #[arg(long, default_value_t = false)]
        rescale: bool,
    },
    /// Canonical-bracket verification reports at near-Gamma samples (JSON).
    NormalForm {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Dual)]
        mode: ModeArg,
    },
    /// Estimate the (m, m-tilde) orders of a builtin model symbol (JSON).
    SymbolOrder {
        /// One of: x1, rho_hat_inv, rho_tilde_inv.
        #[arg(long)]
        symbol: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Fixed,
    Adaptive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Dual,
    Fd,
}

/// Property-level failure: computation fine, assertion not met.
struct PropertyFailure(String);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let wants_exit_zero = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if wants_exit_zero {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    if let Ok(threads) = std::env::var("KERRTRAP_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: KERRTRAP_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(PropertyFailure(msg))) => {
            eprintln!("property failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Option<PropertyFailure>> {
    let cfg = RunConfig::assemble(&cli)?;
    match &cli.cmd {
        Cmd::Subextremal => cmd_subextremal(&cfg),
        Cmd::TrappedSet { n } => cmd_trapped_set(&cfg, *n),
        Cmd::Rates => cmd_rates(&cfg),
        Cmd::Flow {
            init,
            duration,
            method,
            step,
            rescale,
        } => cmd_flow(&cfg, init, *duration, *method, *step, *rescale),
        Cmd::NormalForm { n, mode } => cmd_normal_form(&cfg, *n, *mode),
        Cmd::SymbolOrder { symbol } => cmd_symbol_order(&cfg, symbol),
    }
}

fn write_output(cfg: &RunConfig, content: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json(
    cfg: &RunConfig,
    value: serde_json::Value,
    validate: fn(&serde_json::Value) -> Result<(), String>,
) -> Result<()> {
    validate(&value).map_err(|e| anyhow!("internal: output failed its schema check: {e}"))?;
    write_output(cfg, &format!("{}\n", serde_json::to_string_pretty(&value)?))
}

fn cmd_subextremal(cfg: &RunConfig) -> Result<Option<PropertyFailure>> {
    let report = classify_subextremal(&cfg.params)?;
    let value = serde_json::to_value(&report)?;
    emit_json(cfg, value, schema::validate_subextremal)?;
    if report.is_subextremal {
        Ok(None)
    } else {
        Ok(Some(PropertyFailure(
            "parameters are not subextremal".into(),
        )))
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_trapped_set(cfg: &RunConfig, n: usize) -> Result<Option<PropertyFailure>> {
    let sample = sample_trapped_set(&cfg.params, n, cfg.seed)?;
    match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("xi_t,xi_phi,r_crit,theta,xi_theta,w_u,w_s\n");
            for d in &sample.data {
                let (wu, ws) = expansion_rate(&cfg.params, &d.phase_point())?;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt17(d.xi_t),
                    fmt17(d.xi_phi),
                    fmt17(d.r_crit),
                    fmt17(d.point.theta),
                    fmt17(d.point.xi_theta),
                    fmt17(wu),
                    fmt17(ws)
                ));
            }
            write_output(cfg, &out)?;
        }
        Format::Json => {
            let value = serde_json::to_value(&sample)?;
            emit_json(cfg, value, schema::validate_trapped_set)?;
        }
    }
    Ok(None)
}

fn cmd_rates(cfg: &RunConfig) -> Result<Option<PropertyFailure>> {
    let grid = GridSpec {
        n_angle: cfg.grid,
        n_theta: (cfg.grid / 2).max(4),
    };
    let bounds = nu_bounds(&cfg.params, grid)?;
    let value = serde_json::to_value(&bounds)?;
    emit_json(cfg, value, schema::validate_rates)?;
    if bounds.nu_min > 0.0 && bounds.nu_min <= bounds.nu_max {
        Ok(None)
    } else {
        Ok(Some(PropertyFailure(format!(
            "rate bounds violated: nu_min = {}, nu_max = {}",
            bounds.nu_min, bounds.nu_max
        ))))
    }
}

fn parse_init(init: &str) -> Result<PhasePoint<f64>> {
    let parts: Vec<f64> = init
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .context("parsing --init")?;
    if parts.len() != 8 {
        bail!(
            "--init needs 8 comma-separated numbers, got {}",
            parts.len()
        );
    }
    Ok(PhasePoint::from_array([
        parts[0], parts[1], parts[2], parts[3], parts[4], parts[5], parts[6], parts[7],
    ]))
}

fn cmd_flow(
    cfg: &RunConfig,
    init: &str,
    duration: f64,
    method: MethodArg,
    step: f64,
    rescale: bool,
) -> Result<Option<PropertyFailure>> {
    if cfg.format == Some(Format::Json) {
        bail!("flow emits trajectory CSV only");
    }
    let init = parse_init(init)?;
    let spec = match method {
        MethodArg::Fixed => IntegratorSpec::fixed(step)?,
        MethodArg::Adaptive => IntegratorSpec::adaptive(cfg.tol_integrator)?,
    };
    let traj = integrate_hp(
        &cfg.params,
        &init,
        duration,
        &spec,
        Rescale::from_flag(rescale),
    )?;
    write_output(cfg, &trajectory_to_csv(&cfg.params, &traj))?;
    Ok(None)
}

fn cmd_normal_form(cfg: &RunConfig, n: usize, mode: ModeArg) -> Result<Option<PropertyFailure>> {
    let mode = match mode {
        ModeArg::Dual => BracketMode::DualNumber,
        ModeArg::Fd => BracketMode::FiniteDifference,
    };
    let nf_cfg = NormalFormConfig {
        rank_floor: cfg.tol_rank,
        ..NormalFormConfig::default()
    };
    let pts = sample_near_gamma(&cfg.params, n, cfg.seed, 0.05, false)?;
    use rayon::prelude::*;
    let reports: Vec<BracketResidual> = pts
        .par_iter()
        .map(|pt| verify_canonical_with(&cfg.params, pt, mode, &nf_cfg))
        .collect::<kerrtrap::Result<_>>()?;
    let max_residual = reports.iter().fold(0.0_f64, |m, r| m.max(r.max_residual));
    let value = serde_json::json!({
        "reports": reports,
        "max_residual": max_residual,
        "mode": match mode {
            BracketMode::DualNumber => "dual-number",
            BracketMode::FiniteDifference => "finite-difference",
        },
    });
    emit_json(cfg, value, schema::validate_normal_form)?;
    let threshold = match mode {
        BracketMode::DualNumber => cfg.tol_canonical,
        BracketMode::FiniteDifference => cfg.tol_canonical.max(1e-3),
    };
    if max_residual < threshold {
        Ok(None)
    } else {
        Ok(Some(PropertyFailure(format!(
            "canonical bracket residual {max_residual:.3e} above {threshold:.3e}"
        ))))
    }
}

fn cmd_symbol_order(cfg: &RunConfig, symbol: &str) -> Result<Option<PropertyFailure>> {
    let builtin = BuiltinSymbol::from_name(symbol)?;
    let grid = SymbolGrid::default();
    let est = estimate_orders(builtin.evaluator(cfg.alpha), cfg.alpha, &grid)?;
    let value = serde_json::to_value(&est)?;
    emit_json(cfg, value, schema::validate_symbol_order)?;
    let (m_ref, mt_ref) = builtin.reference_orders(cfg.alpha);
    if (est.m_est - m_ref).abs() < 0.05 && (est.m_tilde_est - mt_ref).abs() < 0.05 {
        Ok(None)
    } else {
        Ok(Some(PropertyFailure(format!(
            "estimated orders ({:.3}, {:.3}) disagree with the reference ({m_ref}, {mt_ref})",
            est.m_est, est.m_tilde_est
        ))))
    }
}
