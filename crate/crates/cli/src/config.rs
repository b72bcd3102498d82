use std::path::Path;

use serde::Deserialize;

use crate::args::OrientationArg;
use crate::failure::UsageError;

/// Defaults loaded from `--config`; command-line flags take precedence.
///
/// ```toml
/// threads = 4
/// method = "mfs"
/// criterion = "hd"
/// lambda_grid = "0.1:20:24"
/// grid = 50
/// k = 95
/// c = 300
/// samples = 20000
/// seed = 7
/// refine = true
/// normals_k = 12
/// orientation = "spanning-tree"
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub threads: Option<usize>,
    pub method: Option<String>,
    pub criterion: Option<String>,
    pub lambda_grid: Option<String>,
    pub grid: Option<usize>,
    pub k: Option<f64>,
    pub c: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub refine: Option<bool>,
    pub normals_k: Option<usize>,
    pub orientation: Option<OrientationArg>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("bad config {}: {e}", path.display())).into())
    }

    /// Parses an optional string setting with `T::from_str`.
    pub fn parsed<T>(&self, key: &str, value: &Option<String>) -> anyhow::Result<Option<T>>
    where
        T: std::str::FromStr<Err = meshless::Error>,
    {
        value
            .as_deref()
            .map(|s| {
                s.parse().map_err(|e: meshless::Error| {
                    UsageError(format!("config key '{key}': {e}")).into()
                })
            })
            .transpose()
    }
}
