//! Flat key/value run configuration read from a TOML file.
//!
//! ```toml
//! scale = [16, 60, 120, 180, 240]
//! scale_division = [3]
//! dynamic = [0.6, 1.2, 2.4]
//! level = ["uniform", "low", "high"]
//! threshold = [127]
//! stripes = 5            # or: lattice = "3x3"
//! scalar_mode = "brightness"
//! epsilon = 0.001
//! tau = 1.0
//! mu = 1.0
//! rank_key = "max-vvo"
//! workers = 8
//! ```
//!
//! Command-line flags override file values key by key.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use defog_core::metrics::parse_lattice;
use defog_core::{Error, Result};

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scale: Option<Vec<u32>>,
    pub scale_division: Option<Vec<u32>>,
    pub dynamic: Option<Vec<f64>>,
    pub level: Option<Vec<String>>,
    pub threshold: Option<Vec<u32>>,
    pub stripes: Option<usize>,
    pub lattice: Option<String>,
    pub scalar_mode: Option<String>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub mu: Option<f64>,
    pub rank_key: Option<String>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config file",
            message: e.to_string(),
        })?;
        if cfg.stripes.is_some() && cfg.lattice.is_some() {
            return Err(Error::InvalidParams(
                "config sets both 'stripes' and 'lattice'".into(),
            ));
        }
        if let Some(l) = &cfg.lattice {
            parse_lattice(l).ok_or_else(|| {
                Error::InvalidParams(format!("cannot parse lattice '{l}' (expected RxC)"))
            })?;
        }
        Ok(cfg)
    }
}
