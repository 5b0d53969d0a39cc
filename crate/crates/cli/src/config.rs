//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # cost block
//! cost.kind = anisotropic
//! cost.p = 4
//! cost.dim = 2
//! cost.matrix = 1 0 0 4
//!
//! quad.order = 16
//! tol = 1e-9
//! seed = 7
//! check.max_cycle = 4
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use hmono::cost::CostSpec;
use hmono::form::{ErrorEstimator, QuadratureConfig};
use hmono::DMatrix;

use crate::CliError;

/// Sections whose keys are read by individual subcommands.
const COMMAND_SECTIONS: [&str; 5] = ["check", "angles", "rectify", "measure", "generate"];

#[derive(Clone, Debug, PartialEq)]
pub enum CostKindConfig {
    Power,
    Anisotropic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostBlock {
    pub kind: CostKindConfig,
    pub p: f64,
    pub dim: usize,
    pub matrix: Option<Vec<f64>>,
}

impl Default for CostBlock {
    fn default() -> Self {
        Self {
            kind: CostKindConfig::Power,
            p: 2.0,
            dim: 1,
            matrix: None,
        }
    }
}

impl CostBlock {
    pub fn build(&self) -> Result<CostSpec, CliError> {
        let spec = match self.kind {
            CostKindConfig::Power => CostSpec::power(self.dim, self.p)?,
            CostKindConfig::Anisotropic => {
                let entries = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| CliError::Input("cost.matrix is required for anisotropic costs".into()))?;
                if entries.len() != self.dim * self.dim {
                    return Err(CliError::Input(format!(
                        "cost.matrix has {} entries, expected {}",
                        entries.len(),
                        self.dim * self.dim
                    )));
                }
                CostSpec::anisotropic(DMatrix::from_row_slice(self.dim, self.dim, entries), self.p)?
            }
        };
        Ok(spec)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub cost: CostBlock,
    pub quad: QuadratureConfig,
    pub tol: Option<f64>,
    pub seed: u64,
    /// Keys of the command sections, e.g. `check.max_cycle`.
    pub sections: BTreeMap<String, String>,
}


fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Input(format!("{key}: cannot parse '{value}'")))
}

/// Whitespace- or comma-separated list of reals.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "cost.kind" => {
                self.cost.kind = match value {
                    "power" => CostKindConfig::Power,
                    "anisotropic" => CostKindConfig::Anisotropic,
                    other => return Err(CliError::Input(format!("cost.kind: unknown kind '{other}'"))),
                }
            }
            "cost.p" => self.cost.p = parse_num(key, value)?,
            "cost.dim" => self.cost.dim = parse_num(key, value)?,
            "cost.matrix" => self.cost.matrix = Some(parse_list(key, value)?),
            "quad.order" => self.quad.order = parse_num(key, value)?,
            "quad.max_depth" => self.quad.max_depth = parse_num(key, value)?,
            "quad.refine_tol" => self.quad.refine_tol = parse_num(key, value)?,
            "quad.max_error" => self.quad.max_error = Some(parse_num(key, value)?),
            "quad.estimator" => {
                self.quad.estimator = match value {
                    "halving" => ErrorEstimator::Halving,
                    "previous" => ErrorEstimator::PreviousOrder,
                    other => return Err(CliError::Input(format!("quad.estimator: unknown estimator '{other}'"))),
                }
            }
            "tol" => self.tol = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num(key, value)?,
            _ => {
                let section = key.split('.').next().unwrap_or("");
                if !COMMAND_SECTIONS.contains(&section) || !key.contains('.') {
                    return Err(CliError::Input(format!("unknown config key '{key}'")));
                }
                self.sections.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.cost.dim == 0 {
            return Err(CliError::Input("cost.dim must be at least 1".into()));
        }
        if !(self.cost.p >= 2.0) {
            return Err(CliError::Input(format!("cost.p must be >= 2, got {}", self.cost.p)));
        }
        if self.quad.order < 2 {
            return Err(CliError::Input(format!("quad.order must be >= 2, got {}", self.quad.order)));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Input(format!("tol must be a finite non-negative number, got {t}")));
            }
        }
        Ok(())
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.sections.get(key).map(|v| parse_num(key, v)).transpose()
    }

    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.sections.get(key).map(|v| parse_list(key, v)).transpose()
    }
}
