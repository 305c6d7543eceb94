//! Run configuration: JSON file schema, flag overrides, and the builtin
//! coefficient registry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use bridge_core::{
    families, AlphaBridge, BridgeSpec64, CoefficientFn, CoefficientFn64, OuBridge, OuSpec,
    Scheme, TimeGrid64,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BridgeConfig {
    /// dX = -(α(t)/(T-t)) X dt + dB from 0.
    Alpha { alpha: String },
    /// Bridge of dZ = q Z dt + σ dB, conditioned from a to b.
    Ou {
        q: String,
        #[serde(default = "default_sigma")]
        sigma: String,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
}

fn default_sigma() -> String {
    "const:1".to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    /// 256 uniform points on [0, 0.9T] plus a geometric endpoint tail.
    #[default]
    Default,
    /// `points` evenly spaced times on [0, upto].
    Uniform { points: usize, upto: f64 },
    /// Interior grid i T/(n+1), i = 1..n: the equivalence-harness layout.
    Interior { points: usize },
    /// Explicit times.
    Explicit { times: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    #[default]
    Exact,
    Euler {
        #[serde(default = "default_substeps")]
        substeps: u32,
    },
}

fn default_substeps() -> u32 {
    64
}

/// One fully resolved run; the sidecar embeds it and it must re-parse to an
/// identical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bridge: BridgeConfig,
    pub horizon: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Family constant for drift identification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_paths() -> usize {
    1000
}

fn default_tol() -> f64 {
    1e-6
}

/// Unvalidated accumulation of config-file values and flag overrides.
#[derive(Debug, Default, Clone)]
pub struct ConfigDraft {
    pub bridge: Option<BridgeConfig>,
    pub horizon: Option<f64>,
    pub grid: Option<GridConfig>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub scheme: Option<SchemeConfig>,
    pub c: Option<f64>,
    pub tol: Option<f64>,
}

impl ConfigDraft {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        Ok(ConfigDraft {
            bridge: Some(parsed.bridge),
            horizon: Some(parsed.horizon),
            grid: Some(parsed.grid),
            paths: Some(parsed.paths),
            seed: Some(parsed.seed),
            scheme: Some(parsed.scheme),
            c: parsed.c,
            tol: Some(parsed.tol),
        })
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let bridge = self.bridge.ok_or_else(|| {
            CliError::Config("no bridge specified: pass --alpha or --q, or a --config file".into())
        })?;
        let horizon = self
            .horizon
            .ok_or_else(|| CliError::Config("missing --T (horizon)".into()))?;
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(CliError::Config(format!("bad horizon {horizon}")));
        }
        Ok(RunConfig {
            bridge,
            horizon,
            grid: self.grid.unwrap_or_default(),
            paths: self.paths.unwrap_or_else(default_paths),
            seed: self.seed.unwrap_or(0),
            scheme: self.scheme.unwrap_or_default(),
            c: self.c,
            tol: self.tol.unwrap_or_else(default_tol),
        })
    }
}

/// Parse `name:param` coefficient notation.
fn split_spec(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((name, param)) => (name, Some(param)),
        None => (s, None),
    }
}

fn param_f64(kind: &str, raw: Option<&str>) -> Result<f64, CliError> {
    let raw = raw.ok_or_else(|| CliError::Config(format!("{kind} needs a parameter")))?;
    raw.parse::<f64>()
        .map_err(|_| CliError::Config(format!("{kind}: cannot parse `{raw}` as a number")))
}

fn load_table(path: &str) -> Result<CoefficientFn64, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read table {path}: {e}")))?;
    let mut points = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            continue;
        };
        if let (Ok(t), Ok(v)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            points.push((t, v));
        }
        // Non-numeric rows (headers) are skipped.
    }
    CoefficientFn::tabulated(points)
        .map_err(|e| CliError::Config(format!("table {path}: {e}")))
}

/// Builtin α families: `const:a`, `poly1p:beta` (1+(T-t)^β),
/// `poly1m:beta` (1-(T-t)^β), `coth:q0`, `table:path`.
pub fn parse_alpha(spec: &str, horizon: f64) -> Result<CoefficientFn64, CliError> {
    let (name, param) = split_spec(spec);
    match name {
        "const" => Ok(CoefficientFn::constant(param_f64(name, param)?)),
        "poly1p" => Ok(families::alpha_poly(1.0, param_f64(name, param)?, horizon)),
        "poly1m" => Ok(families::alpha_poly(-1.0, param_f64(name, param)?, horizon)),
        "coth" => {
            let q0 = param_f64(name, param)?;
            if q0 == 0.0 {
                return Err(CliError::Config("coth: q0 must be nonzero".into()));
            }
            Ok(families::alpha_coth(q0, horizon))
        }
        "table" => load_table(param.ok_or_else(|| {
            CliError::Config("table needs a file path, e.g. table:alpha.csv".into())
        })?),
        other => Err(CliError::Config(format!(
            "unknown alpha family `{other}` (expected const, poly1p, poly1m, coth, table)"
        ))),
    }
}

/// Builtin drift families for OU processes: `const:q0`, `zero`,
/// `recip:c` (1/(t+c)), `table:path`.
pub fn parse_q(spec: &str) -> Result<CoefficientFn64, CliError> {
    let (name, param) = split_spec(spec);
    match name {
        "const" => Ok(CoefficientFn::constant(param_f64(name, param)?)),
        "zero" => Ok(CoefficientFn::constant(0.0)),
        "recip" => Ok(families::q_recip(param_f64(name, param)?)),
        "table" => load_table(param.ok_or_else(|| {
            CliError::Config("table needs a file path, e.g. table:q.csv".into())
        })?),
        other => Err(CliError::Config(format!(
            "unknown drift family `{other}` (expected const, zero, recip, table)"
        ))),
    }
}

/// Diffusion families: `const:s`, `table:path`.
pub fn parse_sigma(spec: &str) -> Result<CoefficientFn64, CliError> {
    let (name, param) = split_spec(spec);
    match name {
        "const" => Ok(CoefficientFn::constant(param_f64(name, param)?)),
        "table" => load_table(param.ok_or_else(|| {
            CliError::Config("table needs a file path, e.g. table:sigma.csv".into())
        })?),
        other => Err(CliError::Config(format!(
            "unknown diffusion family `{other}` (expected const, table)"
        ))),
    }
}

pub fn build_bridge(config: &RunConfig) -> Result<BridgeSpec64, CliError> {
    match &config.bridge {
        BridgeConfig::Alpha { alpha } => {
            let alpha = parse_alpha(alpha, config.horizon)?;
            Ok(BridgeSpec64::Alpha(
                AlphaBridge::new(alpha, config.horizon).map_err(CliError::config)?,
            ))
        }
        BridgeConfig::Ou { q, sigma, a, b } => {
            let q = parse_q(q)?;
            let sigma = parse_sigma(sigma)?;
            let ou = OuSpec::new(q, sigma, config.horizon).map_err(CliError::config)?;
            Ok(BridgeSpec64::Ou(OuBridge::new(ou, *a, *b)))
        }
    }
}

pub fn build_grid(config: &RunConfig) -> Result<TimeGrid64, CliError> {
    let horizon = config.horizon;
    let grid = match &config.grid {
        GridConfig::Default => TimeGrid64::refined_default(horizon),
        GridConfig::Uniform { points, upto } => TimeGrid64::uniform(*points, *upto, horizon),
        GridConfig::Interior { points } => TimeGrid64::interior(*points, horizon),
        GridConfig::Explicit { times } => TimeGrid64::new(
            times.clone(),
            horizon,
            TimeGrid64::default_eps_end(horizon),
        ),
    };
    grid.map_err(CliError::config)
}

pub fn scheme_of(config: &RunConfig) -> Scheme {
    match config.scheme {
        SchemeConfig::Exact => Scheme::Exact,
        SchemeConfig::Euler { substeps } => Scheme::EulerMaruyama { substeps },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"bridge":{"kind":"alpha","alpha":"const:1"},"horizon":1.0,"bogus":3}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn minimal_config_round_trips() {
        let text = r#"{"bridge":{"kind":"ou","q":"recip:1","a":0.5},"horizon":2.0}"#;
        let parsed: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(parsed.paths, 1000);
        let re: RunConfig =
            serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
        assert_eq!(parsed, re);
    }

    #[test]
    fn alpha_registry_covers_families() {
        assert!(parse_alpha("const:1", 1.0).is_ok());
        assert!(parse_alpha("poly1p:2", 1.0).is_ok());
        assert!(parse_alpha("poly1m:0.5", 1.0).is_ok());
        assert!(parse_alpha("coth:1", 1.0).is_ok());
        assert!(parse_alpha("nope:1", 1.0).is_err());
        assert!(parse_alpha("const", 1.0).is_err());
    }
}
