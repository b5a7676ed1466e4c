//! Run configuration. Numbers that feed extended-precision arithmetic are
//! kept as decimal strings until the working precision is known.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rug::Float;
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Vec<u32>,
    pub epsilon: String,
    pub depth: usize,
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub count: CountSection,
    #[serde(default)]
    pub coarse: CoarseSection,
    #[serde(default)]
    pub check: CheckSection,
}

fn default_precision() -> u32 {
    256
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub construction: Option<PathBuf>,
    pub audit: Option<PathBuf>,
    pub count: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub coarse: Option<PathBuf>,
    pub check: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountSection {
    pub radius: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseSection {
    pub radius: Option<String>,
    pub resolution: Option<usize>,
    pub delta_min: Option<String>,
    pub delta_max: Option<String>,
    pub delta_count: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            bail!("n must be a non-empty list of positive integers");
        }
        if self.depth == 0 || self.depth > self.n.len() {
            bail!("depth {} must lie in 1..={}", self.depth, self.n.len());
        }
        if self.precision < harmzero::assembly::MIN_PRECISION {
            bail!("precision must be at least {} bits", harmzero::assembly::MIN_PRECISION);
        }
        let eps = self.epsilon_float()?;
        if eps <= 0 {
            bail!("epsilon must be positive, got {}", self.epsilon);
        }
        Ok(())
    }

    pub fn epsilon_float(&self) -> Result<Float> {
        parse_decimal(&self.epsilon, self.precision).context("epsilon")
    }
}

/// Parses a decimal string at `prec` bits.
pub fn parse_decimal(s: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(s.trim()).map_err(|e| anyhow::anyhow!("invalid number {s:?}: {e}"))?;
    let v = Float::with_val(prec, parsed);
    if !v.is_finite() {
        bail!("number {s:?} is not finite");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config() {
        let cfg = parse("n = [1, 2]\nepsilon = \"0.5\"\ndepth = 2\n").unwrap();
        assert_eq!(cfg.precision, 256);
        assert!(cfg.paths.construction.is_none());
    }

    #[test]
    fn invalid_configs() {
        assert!(parse("n = [1, 2]\nepsilon = \"0\"\ndepth = 2\n").is_err());
        assert!(parse("n = [1, 2]\nepsilon = \"0.5\"\ndepth = 3\n").is_err());
        assert!(parse("n = [1, 0]\nepsilon = \"0.5\"\ndepth = 2\n").is_err());
        assert!(parse("n = [1]\nepsilon = \"0.5\"\ndepth = 1\nprecision = 20\n").is_err());
        assert!(parse("n = [1]\nepsilon = \"abc\"\ndepth = 1\n").is_err());
        assert!(parse("n = [1]\nepsilon = \"0.5\"\ndepth = 1\nbogus = 3\n").is_err());
    }
}
