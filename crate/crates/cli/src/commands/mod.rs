pub mod fit;
pub mod reproduce;
pub mod simulate;

use std::path::Path;

use mefm_core::dgp::{preset_with, DGPConfig, PresetOverrides};

use crate::CliError;

/// Ensures the output directory exists.
pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

/// Resolves a configuration from a named setting or a config file, applying
/// dimension overrides.
pub fn resolve_config(
    setting: Option<&str>,
    config_path: Option<&Path>,
    overrides: &PresetOverrides,
) -> Result<DGPConfig, CliError> {
    match (setting, config_path) {
        (Some(name), None) => Ok(preset_with(name, overrides)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            let mut config = DGPConfig::from_kv_str(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            if let Some(p) = overrides.p {
                config.p = p;
            }
            if let Some(q) = overrides.q {
                config.q = q;
            }
            if let Some(t) = overrides.t_len {
                config.t_len = t;
            }
            if let Some(seed) = overrides.seed {
                config.seed = seed;
            }
            Ok(config)
        }
        _ => Err(CliError::usage(
            "exactly one of --setting and --config is required",
        )),
    }
}
