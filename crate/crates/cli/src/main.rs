//! bridge-lab: simulate pinned diffusions, compute their moments, identify
//! generating drifts, and compare laws. Emits CSV and JSON for offline
//! plotting; everything is deterministic given the config and seed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{BridgeConfig, ConfigDraft, GridConfig, SchemeConfig};

/// Exit codes: 0 success, 2 usage/config error, 3 numerical failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn config(e: bridge_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<bridge_core::Error> for CliError {
    fn from(e: bridge_core::Error) -> Self {
        use bridge_core::Error::*;
        match e {
            InvalidSpec(_) | InvalidGrid(_) | GridBeyondHorizon { .. }
            | HorizonMismatch { .. } | InvalidC(_) | EmptySample => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bridge-lab",
    about = "Pinned-diffusion laboratory: samplers, moments, drift identification, law equivalence",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every spec-consuming subcommand; they override values
/// from `--config`.
#[derive(Args, Debug, Clone)]
struct SpecArgs {
    /// JSON run configuration (flags below override its fields)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Alpha-bridge drift rate, e.g. const:1, poly1p:2, poly1m:0.5, coth:1, table:f.csv
    #[arg(long)]
    alpha: Option<String>,
    /// OU drift, e.g. const:1, zero, recip:2, table:f.csv (selects an OU bridge)
    #[arg(long)]
    q: Option<String>,
    /// OU diffusion, e.g. const:1 (default) or table:f.csv
    #[arg(long)]
    sigma: Option<String>,
    /// OU bridge start value
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// OU bridge end value
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Horizon T > 0
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Uniform grid: number of points on [0, --grid-upto]
    #[arg(long)]
    grid_points: Option<usize>,
    /// Upper end of the uniform grid (defaults to 0.9 T)
    #[arg(long)]
    grid_upto: Option<f64>,
    /// Number of sample paths
    #[arg(long)]
    paths: Option<usize>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling scheme: exact | euler
    #[arg(long)]
    scheme: Option<String>,
    /// Euler substeps per grid interval
    #[arg(long)]
    substeps: Option<u32>,
    /// Identification family constant C > 0
    #[arg(long = "C", allow_negative_numbers = true)]
    c: Option<f64>,
    /// Equivalence tolerance
    #[arg(long)]
    tol: Option<f64>,
}

impl SpecArgs {
    fn draft(&self) -> Result<ConfigDraft, CliError> {
        let mut draft = match &self.config {
            Some(path) => ConfigDraft::from_file(path)?,
            None => ConfigDraft::default(),
        };
        match (&self.alpha, &self.q) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "--alpha and --q are mutually exclusive".into(),
                ))
            }
            (Some(alpha), None) => {
                draft.bridge = Some(BridgeConfig::Alpha {
                    alpha: alpha.clone(),
                });
            }
            (None, Some(q)) => {
                draft.bridge = Some(BridgeConfig::Ou {
                    q: q.clone(),
                    sigma: self.sigma.clone().unwrap_or_else(|| "const:1".into()),
                    a: self.a.unwrap_or(0.0),
                    b: self.b.unwrap_or(0.0),
                });
            }
            (None, None) => {
                // Sigma/a/b tweaks on top of a config-file OU bridge.
                if let Some(BridgeConfig::Ou { sigma, a, b, .. }) = &mut draft.bridge {
                    if let Some(s) = &self.sigma {
                        *sigma = s.clone();
                    }
                    if let Some(x) = self.a {
                        *a = x;
                    }
                    if let Some(x) = self.b {
                        *b = x;
                    }
                }
            }
        }
        if let Some(t) = self.horizon {
            draft.horizon = Some(t);
        }
        if let Some(n) = self.grid_points {
            let horizon = draft
                .horizon
                .ok_or_else(|| CliError::Config("missing --T (horizon)".into()))?;
            draft.grid = Some(GridConfig::Uniform {
                points: n,
                upto: self.grid_upto.unwrap_or(0.9 * horizon),
            });
        } else if let Some(upto) = self.grid_upto {
            draft.grid = Some(GridConfig::Uniform { points: 256, upto });
        }
        if let Some(n) = self.paths {
            draft.paths = Some(n);
        }
        if let Some(s) = self.seed {
            draft.seed = Some(s);
        }
        match self.scheme.as_deref() {
            None => {
                if let Some(k) = self.substeps {
                    draft.scheme = Some(SchemeConfig::Euler { substeps: k });
                }
            }
            Some("exact") => draft.scheme = Some(SchemeConfig::Exact),
            Some("euler") => {
                draft.scheme = Some(SchemeConfig::Euler {
                    substeps: self.substeps.unwrap_or(64),
                })
            }
            Some(other) => {
                return Err(CliError::Config(format!(
                    "unknown scheme `{other}` (expected exact or euler)"
                )))
            }
        }
        if let Some(c) = self.c {
            draft.c = Some(c);
        }
        if let Some(tol) = self.tol {
            draft.tol = Some(tol);
        }
        Ok(draft)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample paths and write them as CSV or binary, plus a JSON sidecar
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Output path for the ensemble
        #[arg(long)]
        out: PathBuf,
        /// Output format: csv | binary
        #[arg(long, default_value = "csv")]
        format: String,
        /// Sidecar JSON path (default: `<out>.meta.json`)
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Also write the endpoint decay/growth table to this CSV
        #[arg(long)]
        endpoint_study: Option<PathBuf>,
    },
    /// Write analytic moments: t, mean, var (and optional pairwise covariances)
    Moments {
        #[command(flatten)]
        spec: SpecArgs,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Optional covariance table CSV (rows s, t, cov)
        #[arg(long)]
        cov_out: Option<PathBuf>,
    },
    /// Identify the OU drifts whose 0-to-0 bridge matches an alpha bridge
    Identify {
        #[command(flatten)]
        spec: SpecArgs,
        /// CSV output for the identified drift (t, q_C)
        #[arg(long)]
        out: PathBuf,
        /// Verdict JSON path (default: `<out>.verdict.json`)
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare the laws of two bridge specs
    Equivalence {
        /// JSON run config of the first spec
        #[arg(long)]
        spec_a: PathBuf,
        /// JSON run config of the second spec
        #[arg(long)]
        spec_b: PathBuf,
        /// Compare sampled ensembles instead of analytic moments
        #[arg(long)]
        mc: bool,
        /// Paths per side for --mc
        #[arg(long)]
        paths: Option<usize>,
        /// Seed for --mc
        #[arg(long)]
        seed: Option<u64>,
        /// Number of interior test times (capped at 32)
        #[arg(long, default_value_t = 32)]
        grid_points: usize,
        /// Report JSON path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            spec,
            out,
            format,
            sidecar,
            endpoint_study,
        } => commands::simulate(&spec, &out, &format, sidecar, endpoint_study),
        Command::Moments { spec, out, cov_out } => commands::moments(&spec, &out, cov_out),
        Command::Identify { spec, out, json } => commands::identify(&spec, &out, json),
        Command::Equivalence {
            spec_a,
            spec_b,
            mc,
            paths,
            seed,
            grid_points,
            out,
        } => commands::equivalence(&spec_a, &spec_b, mc, paths, seed, grid_points, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            eprintln!("run `bridge-lab <command> --help` for usage");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
