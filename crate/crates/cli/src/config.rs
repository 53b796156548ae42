//! Run configuration: defaults, flat key=value config file, flag overrides.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use kerrtrap::BlackHoleParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Assembled configuration for one command invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: BlackHoleParams,
    pub alpha: f64,
    pub seed: u64,
    pub grid: usize,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub tol_integrator: f64,
    pub tol_canonical: f64,
    pub tol_rank: f64,
}

impl RunConfig {
    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn assemble(cli: &crate::Cli) -> Result<Self> {
        let mut b = Builder::default();
        if let Some(path) = &cli.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            b.apply_file(&text)?;
        }
        // flags win
        b.mass = cli.mass.or(b.mass);
        b.spin = cli.spin.or(b.spin);
        b.lambda = cli.lambda.or(b.lambda);
        b.alpha = cli.alpha.or(b.alpha);
        b.seed = cli.seed.or(b.seed);
        b.grid = cli.grid.or(b.grid);
        b.output = cli.output.clone().or(b.output);
        b.format = cli.format.or(b.format);
        b.tol_integrator = cli.tol_integrator.or(b.tol_integrator);
        b.tol_canonical = cli.tol_canonical.or(b.tol_canonical);
        b.tol_rank = cli.tol_rank.or(b.tol_rank);
        b.build()
    }
}

#[derive(Debug, Default)]
struct Builder {
    mass: Option<f64>,
    spin: Option<f64>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    seed: Option<u64>,
    grid: Option<usize>,
    output: Option<PathBuf>,
    format: Option<Format>,
    tol_integrator: Option<f64>,
    tol_canonical: Option<f64>,
    tol_rank: Option<f64>,
}

impl Builder {
    fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "config line {}: expected key=value, got '{raw}'",
                    lineno + 1
                );
            };
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("config line {}: key '{key}'", lineno + 1);
            match key {
                "mass" => self.mass = Some(value.parse().with_context(ctx)?),
                "spin" => self.spin = Some(value.parse().with_context(ctx)?),
                "lambda" => self.lambda = Some(value.parse().with_context(ctx)?),
                "alpha" => self.alpha = Some(value.parse().with_context(ctx)?),
                "seed" => self.seed = Some(value.parse().with_context(ctx)?),
                "grid" => self.grid = Some(value.parse().with_context(ctx)?),
                "output" => self.output = Some(PathBuf::from(value)),
                "format" => {
                    self.format = Some(match value {
                        "csv" => Format::Csv,
                        "json" => Format::Json,
                        other => bail!("config line {}: unknown format '{other}'", lineno + 1),
                    })
                }
                "tol-integrator" => self.tol_integrator = Some(value.parse().with_context(ctx)?),
                "tol-canonical" => self.tol_canonical = Some(value.parse().with_context(ctx)?),
                "tol-rank" => self.tol_rank = Some(value.parse().with_context(ctx)?),
                other if other.starts_with("tol-") => {
                    bail!(
                        "config line {}: unknown tolerance '{other}' \
                         (known: tol-integrator, tol-canonical, tol-rank)",
                        lineno + 1
                    )
                }
                other => bail!("config line {}: unknown key '{other}'", lineno + 1),
            }
        }
        Ok(())
    }

    fn build(self) -> Result<RunConfig> {
        let params = BlackHoleParams::new(
            self.mass.unwrap_or(1.0),
            self.spin.unwrap_or(0.0),
            self.lambda.unwrap_or(0.0),
        )?;
        Ok(RunConfig {
            params,
            alpha: self.alpha.unwrap_or(0.5),
            seed: self.seed.unwrap_or(0),
            grid: self.grid.unwrap_or(64),
            output: self.output,
            format: self.format,
            tol_integrator: self.tol_integrator.unwrap_or(1e-10),
            tol_canonical: self.tol_canonical.unwrap_or(1e-5),
            tol_rank: self.tol_rank.unwrap_or(1e-6),
        })
    }
}
