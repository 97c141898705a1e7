//! Sectioned TOML run configuration.
//!
//! ```toml
//! [loop]
//! eta_l = 0.9
//! overlap = 1.0
//!
//! [engine]
//! n_roundtrips = 20
//! n_max = 8
//!
//! [source]
//! a = 0.24
//!
//! [sweep]
//! m_start = 0.0
//! m_stop = 1.0
//! m_steps = 11
//! ```
//!
//! Every key is optional; missing keys take the library defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlations::{DetectionParams, SourceParams};
use crate::elements::LoopParams;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub n_roundtrips: usize,
    pub n_max: u32,
    pub eps_amp: f64,
    pub retained_bins: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineConfig::default();
        EngineSection { n_roundtrips: e.n_roundtrips, n_max: e.n_max, eps_amp: e.eps_amp, retained_bins: e.retained_bins }
    }
}

/// Overlap values for a sweep, evenly spaced and inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxis {
    pub m_start: f64,
    pub m_stop: f64,
    pub m_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SweepAxis {
    fn default() -> Self {
        SweepAxis { m_start: 0.0, m_stop: 1.0, m_steps: 11, workers: None }
    }
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        match self.m_steps {
            0 => Vec::new(),
            1 => vec![self.m_start],
            n => {
                let step = (self.m_stop - self.m_start) / (n - 1) as f64;
                (0..n).map(|i| if i == n - 1 { self.m_stop } else { self.m_start + i as f64 * step }).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_steps == 0 {
            return Err(Error::invalid("sweep needs at least one step"));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.m_start) || !unit.contains(&self.m_stop) {
            return Err(Error::invalid("sweep overlap range must lie in [0,1]"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::invalid(format!("unknown output format '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Destination file; stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "loop")]
    pub loop_params: LoopParams,
    pub engine: EngineSection,
    pub source: SourceParams,
    pub detection: DetectionParams,
    pub sweep: SweepAxis,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.message()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            loop_params: self.loop_params,
            n_roundtrips: self.engine.n_roundtrips,
            n_max: self.engine.n_max,
            eps_amp: self.engine.eps_amp,
            retained_bins: self.engine.retained_bins,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine_config().validate()?;
        self.source.validate()?;
        self.detection.validate()?;
        self.sweep.validate()
    }
}
