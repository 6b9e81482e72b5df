//! Run manifests: everything needed to reproduce a CLI run.

use std::collections::BTreeMap;

use protoselect::{KernelSpec, Method, SelectionConfig};
use serde::{Deserialize, Serialize};

/// Version of every JSON document this tool writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed,
    Median,
    /// Picked from `candidates` by held-out score.
    CrossValidated {
        candidates: Vec<f64>,
    },
    /// The kernel has no bandwidth.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub kernel_seconds: f64,
    pub selection_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub header: bool,
    pub standardize: bool,
    pub bandwidth: Option<BandwidthRule>,
    /// Kernel actually used, after bandwidth resolution.
    pub kernel: Option<KernelSpec>,
    pub method: Option<Method>,
    pub selection: Option<SelectionConfig>,
    pub seed: u64,
    /// Subcommand-specific settings.
    pub options: BTreeMap<String, serde_json::Value>,
    /// Present only when timings were requested, so default outputs stay reproducible.
    pub timings: Option<Timings>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            inputs: Vec::new(),
            header: false,
            standardize: false,
            bandwidth: None,
            kernel: None,
            method: None,
            selection: None,
            seed: 0,
            options: BTreeMap::new(),
            timings: None,
        }
    }

    pub fn option(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.options.insert(key.to_string(), value);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use protoselect::{KernelSpec, SelectionConfig};

    #[test]
    fn round_trips_losslessly() {
        let mut manifest = RunManifest::new("select")
            .option("criticisms", 3)
            .option("cv_scores", vec![0.1f64 / 3.0, 2.0f64.sqrt()]);
        manifest.inputs = vec!["a.csv".into(), "b.csv".into()];
        manifest.kernel = Some(KernelSpec::gaussian(1.0 / 3.0).unwrap());
        manifest.bandwidth = Some(BandwidthRule::CrossValidated {
            candidates: vec![0.1, 0.7, std::f64::consts::PI],
        });
        manifest.method = Some(Method::ProtoDash);
        manifest.selection = Some(SelectionConfig::epsilon(1e-7).with_seed(u64::MAX));
        manifest.timings = Some(Timings {
            kernel_seconds: 1e-9,
            selection_seconds: 0.123456789012345,
            total_seconds: 7.0 / 9.0,
        });
        let text = serde_json::to_string_pretty(&manifest).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }
}
