use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use bridge_core::{
    analytic_equivalence, classify_identical_bridge, endpoint_regime, endpoint_study,
    mc_equivalence, sample_euler, sample_exact, BridgeLaw, BridgeSpec64, BridgeVerdict,
    EndpointRegime, LimitProbe, PathEnsemble64, Scheme, TimeGrid64,
};

use crate::config::{build_bridge, build_grid, scheme_of, BridgeConfig, ConfigDraft, RunConfig};
use crate::{CliError, SpecArgs};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Numeric(format!("cannot serialize {}: {e}", path.display())))?;
    w.write_all(b"\n")
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a RunConfig,
    spec_digest: String,
    scheme: Scheme,
    seed: u64,
    n_paths: usize,
    n_times: usize,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    endpoint_regime: Option<EndpointRegime>,
}

fn run_sampler(
    config: &RunConfig,
    spec: &BridgeSpec64,
    grid: &TimeGrid64,
) -> Result<PathEnsemble64, CliError> {
    match scheme_of(config) {
        Scheme::Exact => Ok(sample_exact(spec, grid, config.paths, config.seed)?),
        Scheme::EulerMaruyama { substeps } => {
            Ok(sample_euler(spec, grid, config.paths, config.seed, substeps)?)
        }
    }
}

pub fn simulate(
    args: &SpecArgs,
    out: &Path,
    format: &str,
    sidecar: Option<PathBuf>,
    endpoint_table: Option<PathBuf>,
) -> Result<(), CliError> {
    let config = args.draft()?.resolve()?;
    let spec = build_bridge(&config)?;
    let grid = build_grid(&config)?;
    let ensemble = run_sampler(&config, &spec, &grid)?;

    match format {
        "csv" => ensemble.write_csv(create(out)?)?,
        "binary" => ensemble.write_binary(create(out)?)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown format `{other}` (expected csv or binary)"
            )))
        }
    }
    let mut outputs = vec![out.display().to_string()];

    let regime = match &spec {
        BridgeSpec64::Alpha(a) => Some(endpoint_regime(a)),
        BridgeSpec64::Ou(_) => None,
    };

    if let Some(table_path) = &endpoint_table {
        let BridgeSpec64::Alpha(alpha_spec) = &spec else {
            return Err(CliError::Config(
                "--endpoint-study applies to alpha bridges only".into(),
            ));
        };
        let rows = endpoint_study(alpha_spec, config.paths, config.seed)?;
        let mut w = create(table_path)?;
        writeln!(w, "k,t,mean_abs,mean_square").map_err(|e| CliError::Numeric(e.to_string()))?;
        for r in rows {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e}", r.k, r.t, r.mean_abs, r.mean_square)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
        }
        outputs.push(table_path.display().to_string());
    }

    let sidecar_path =
        sidecar.unwrap_or_else(|| PathBuf::from(format!("{}.meta.json", out.display())));
    write_json(
        &sidecar_path,
        &Sidecar {
            config: &config,
            spec_digest: ensemble.spec_digest.clone(),
            scheme: ensemble.scheme,
            seed: ensemble.seed,
            n_paths: ensemble.n_paths(),
            n_times: ensemble.n_times(),
            outputs,
            endpoint_regime: regime,
        },
    )
}

pub fn moments(args: &SpecArgs, out: &Path, cov_out: Option<PathBuf>) -> Result<(), CliError> {
    let config = args.draft()?.resolve()?;
    let spec = build_bridge(&config)?;
    let grid = build_grid(&config)?;
    let law = BridgeLaw::new(&spec)?;

    let mut w = create(out)?;
    writeln!(w, "t,mean,var").map_err(|e| CliError::Numeric(e.to_string()))?;
    for &t in grid.points() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e}",
            t,
            law.mean(t)?,
            law.variance(t)?
        )
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    }

    if let Some(cov_path) = cov_out {
        let mut w = create(&cov_path)?;
        writeln!(w, "s,t,cov").map_err(|e| CliError::Numeric(e.to_string()))?;
        for (i, &t) in grid.points().iter().enumerate() {
            for &s in &grid.points()[..=i] {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", s, t, law.covariance(s, t)?)
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct IdentifyOutput {
    verdict: BridgeVerdict<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    limit_at_horizon: Option<LimitProbe<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift_csv: Option<String>,
}

pub fn identify(args: &SpecArgs, out: &Path, json: Option<PathBuf>) -> Result<(), CliError> {
    let config = args.draft()?.resolve()?;
    let BridgeConfig::Alpha { alpha } = &config.bridge else {
        return Err(CliError::Config(
            "identify needs an alpha bridge (pass --alpha)".into(),
        ));
    };
    let alpha = crate::config::parse_alpha(alpha, config.horizon)?;
    let grid = build_grid(&config)?;
    let verdict = classify_identical_bridge(&alpha, config.horizon)?;
    let json_path =
        json.unwrap_or_else(|| PathBuf::from(format!("{}.verdict.json", out.display())));

    let mut output = IdentifyOutput {
        verdict,
        c: None,
        limit_at_horizon: None,
        drift_csv: None,
    };

    if !matches!(output.verdict, BridgeVerdict::ImpossibleLimitNotOne { .. }) {
        let c = config.c.unwrap_or(config.horizon);
        let ident = bridge_core::identify(&alpha, config.horizon, c)?;
        let mut w = create(out)?;
        writeln!(w, "t,q_C").map_err(|e| CliError::Numeric(e.to_string()))?;
        for &t in grid.points() {
            writeln!(w, "{:.16e},{:.16e}", t, ident.q_c().eval(t))
                .map_err(|e| CliError::Numeric(e.to_string()))?;
        }
        output.c = Some(c);
        output.limit_at_horizon = Some(ident.limit_at_horizon());
        output.drift_csv = Some(out.display().to_string());
    }
    write_json(&json_path, &output)
}


pub fn equivalence(
    spec_a: &Path,
    spec_b: &Path,
    mc: bool,
    paths: Option<usize>,
    seed: Option<u64>,
    grid_points: usize,
    out: &Path,
) -> Result<(), CliError> {
    let config_a = ConfigDraft::from_file(spec_a)?.resolve()?;
    let config_b = ConfigDraft::from_file(spec_b)?.resolve()?;
    let a = build_bridge(&config_a)?;
    let b = build_bridge(&config_b)?;
    let grid = TimeGrid64::interior(grid_points.clamp(1, 32), config_a.horizon)
        .map_err(CliError::config)?;

    let report = if mc {
        let n = paths.unwrap_or(20_000);
        mc_equivalence(&a, &b, &grid, n, seed.unwrap_or(config_a.seed))?
    } else {
        analytic_equivalence(&a, &b, &grid, config_a.tol)?
    };
    write_json(
        out,
        &json!({
            "spec_a": config_a,
            "spec_b": config_b,
            "mode": if mc { "mc" } else { "analytic" },
            "report": report,
        }),
    )
}
