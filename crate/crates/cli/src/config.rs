//! Config-file loading, flag/config merging, grid parsing, provenance
//! hashing and atomic file output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use facdyn::{OriginalParams, ParamSpec, SmoothParams};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Loads the JSON config; a manifest produced by an earlier run (an object
/// with a "config" key) is accepted and unwrapped, so runs can be repeated
/// byte-exactly from their manifests.
pub fn load_config(path: Option<&PathBuf>) -> Result<Value> {
    match path {
        None => Ok(Value::Null),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            let v: Value = serde_json::from_str(&text)
                .with_context(|| format!("config {} is not valid JSON", p.display()))?;
            if let Some(inner) = v.get("config") {
                Ok(inner.clone())
            } else {
                Ok(v)
            }
        }
    }
}

/// Individual parameter flags; either the full smooth set or the full
/// original set must be given (or neither, with `params` in the config).
#[derive(Debug, Clone, clap::Args)]
pub struct ParamFlags {
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub x1: Option<f64>,
    #[arg(long)]
    pub xe: Option<f64>,
    #[arg(long = "F")]
    pub f: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "D")]
    pub d: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "epsS")]
    pub eps_s: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

impl ParamFlags {
    fn any_smooth(&self) -> bool {
        self.x0.is_some() || self.x1.is_some() || self.xe.is_some() || self.f.is_some()
    }
    fn any_original(&self) -> bool {
        self.alpha.is_some()
            || self.d.is_some()
            || self.eps.is_some()
            || self.eps_s.is_some()
            || self.mu.is_some()
            || self.delta.is_some()
    }

    /// Resolves the parameter set from flags, falling back to the config's
    /// `params` block. Missing flags of a started family are reported by
    /// name.
    pub fn resolve(&self, config: &Value) -> Result<ParamSpec> {
        if self.any_smooth() && self.any_original() {
            bail!("give either the smooth set (--x0 --x1 --xe --F) or the original set, not both");
        }
        if self.any_smooth() {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| anyhow!("missing required flag --{name}"))
            };
            let p = SmoothParams::new(
                need(self.x0, "x0")?,
                need(self.x1, "x1")?,
                need(self.xe, "xe")?,
                need(self.f, "F")?,
            )?;
            return Ok(ParamSpec::Smooth(p));
        }
        if self.any_original() {
            let need = |v: Option<f64>, name: &str| {
                v.ok_or_else(|| anyhow!("missing required flag --{name}"))
            };
            let p = OriginalParams::new(
                need(self.alpha, "alpha")?,
                need(self.d, "D")?,
                need(self.eps, "eps")?,
                need(self.eps_s, "epsS")?,
                need(self.mu, "mu")?,
                need(self.delta, "delta")?,
            )?;
            return Ok(ParamSpec::Original(p));
        }
        let block = config.get("params").ok_or_else(|| {
            anyhow!("no parameters: pass flags or a config with a `params` block")
        })?;
        Ok(serde_json::from_value(block.clone())?)
    }
}

/// Saddle-pair flags for the commands that sweep xe and F themselves.
#[derive(Debug, Clone, clap::Args)]
pub struct PairFlags {
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub x1: Option<f64>,
}

impl PairFlags {
    /// Resolves (x0, x1) from flags, else from the config: either bare
    /// `x0`/`x1` entries (the manifest form) or a full `params` block
    /// (converted to the equilibrium form when given as original rates).
    pub fn resolve(&self, config: &Value) -> Result<(f64, f64)> {
        match (self.x0, self.x1) {
            (Some(x0), Some(x1)) => Ok((x0, x1)),
            (Some(_), None) => bail!("missing required flag --x1"),
            (None, Some(_)) => bail!("missing required flag --x0"),
            (None, None) => {
                if let (Some(x0), Some(x1)) = (
                    config.get("x0").and_then(Value::as_f64),
                    config.get("x1").and_then(Value::as_f64),
                ) {
                    return Ok((x0, x1));
                }
                let block = config.get("params").ok_or_else(|| {
                    anyhow!("no parameters: pass --x0/--x1 or a config with a `params` block")
                })?;
                let spec: ParamSpec = serde_json::from_value(block.clone())?;
                let p = spec.to_smooth()?;
                Ok((p.x0(), p.x1()))
            }
        }
    }
}

/// Parses `start:stop:count` (inclusive, count points) or a comma-separated
/// value list.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("grid `{spec}` must be start:stop:count");
        }
        let start: f64 = parts[0].parse().context("grid start")?;
        let stop: f64 = parts[1].parse().context("grid stop")?;
        let count: usize = parts[2].parse().context("grid count")?;
        if count == 0 {
            bail!("grid `{spec}` has zero points");
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        Ok((0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| anyhow!("value `{s}`: {e}"))
            })
            .collect()
    }
}

/// Axis from a flag, else from a config key (string spec or number array).
pub fn resolve_axis(flag: Option<&String>, config: &Value, key: &str) -> Result<Option<Vec<f64>>> {
    if let Some(s) = flag {
        return Ok(Some(parse_axis(s)?));
    }
    match config.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(parse_axis(s)?)),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| anyhow!("config `{key}` holds a non-number"))
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some),
        Some(other) => bail!("config `{key}` must be a grid string or array, got {other}"),
    }
}

pub fn config_f64(config: &Value, key: &str) -> Option<f64> {
    config.get(key).and_then(Value::as_f64)
}

/// SHA-256 of the resolved configuration, truncated for the provenance line.
pub fn config_hash(resolved: &Value) -> String {
    let bytes = serde_json::to_vec(resolved).expect("resolved config serializes");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes a file atomically (write-then-rename) with the provenance comment
/// and the body produced by `fill`.
pub fn write_atomic<F>(dir: &Path, name: &str, hash: &str, fill: F) -> Result<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    let mut buf = Vec::new();
    use std::io::Write;
    writeln!(&mut buf, "# config-hash: {hash}")?;
    fill(&mut buf)?;
    let final_path = dir.join(name);
    let tmp_path = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp_path, &buf).with_context(|| format!("cannot write {}", tmp_path.display()))?;
    fs::rename(&tmp_path, &final_path)
        .with_context(|| format!("cannot rename into {}", final_path.display()))?;
    Ok(final_path)
}
