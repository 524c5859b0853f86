//! INI-style configuration file.
//!
//! ```ini
//! [dataset]
//! preset = highd          ; interaction | highd | citysim, then overrides
//! history_len = 15
//! threshold = 200
//!
//! [attention]
//! horizon = 30
//! epsilon = 1
//! variant = ab
//! ```

use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::attention::{CoefficientConfig, CoefficientVariant};
use crate::error::{Error, Result};
use crate::ingest::DatasetConfig;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub coefficients: CoefficientConfig,
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {value:?}")))
}

impl PipelineConfig {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = PipelineConfig::default();

        if let Some(sec) = ini.section(Some("dataset")) {
            if let Some(preset) = sec.get("preset") {
                cfg.dataset = match preset.trim().to_ascii_lowercase().as_str() {
                    "interaction" => DatasetConfig::interaction(),
                    "highd" => DatasetConfig::highd(),
                    "citysim" => DatasetConfig::citysim(),
                    other => return Err(Error::Config(format!("unknown dataset preset {other:?}"))),
                };
            }
            for (key, value) in sec.iter() {
                let d = &mut cfg.dataset;
                match key {
                    "preset" => {}
                    "dt_raw" => d.dt_raw = parse("dataset", key, value)?,
                    "downsample_factor" => d.downsample_factor = parse("dataset", key, value)?,
                    "history_len" => d.history_len = parse("dataset", key, value)?,
                    "future_len" => d.future_len = parse("dataset", key, value)?,
                    "threshold" => d.threshold = parse("dataset", key, value)?,
                    other => return Err(Error::Config(format!("unknown key [dataset] {other}"))),
                }
            }
        }
        if let Some(sec) = ini.section(Some("attention")) {
            for (key, value) in sec.iter() {
                let c = &mut cfg.coefficients;
                match key {
                    "horizon" => c.horizon = parse("attention", key, value)?,
                    "epsilon" => c.epsilon = parse("attention", key, value)?,
                    "variant" => c.variant = CoefficientVariant::from_str(value.trim())?,
                    other => return Err(Error::Config(format!("unknown key [attention] {other}"))),
                }
            }
        }
        cfg.dataset.validate()?;
        cfg.coefficients.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text)
    }
}
