//! Config and overlay files: TOML on disk, validated before anything runs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use vaxsim_core::config::{ConfigError, ModelConfig};
use vaxsim_core::plan::{Params, Plan};
use vaxsim_core::scenario::{CompiledScenario, ScenarioSpec};

/// A config that compiled cleanly.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub sha256: String,
    pub config: ModelConfig,
    pub plan: Plan,
    pub params: Params,
}

#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub path: PathBuf,
    pub sha256: String,
    pub spec: ScenarioSpec,
    pub compiled: CompiledScenario,
}

/// Why an input file was refused. Serializes to the JSON printed on stderr.
#[derive(Debug, Clone, Serialize)]
pub struct InputError {
    pub file: String,
    pub errors: Vec<ConfigError>,
}

impl InputError {
    fn single(file: &Path, path: &str, message: impl Into<String>) -> Self {
        InputError {
            file: file.display().to_string(),
            errors: vec![ConfigError::new(path, message)],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} error(s)", self.file, self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for InputError {}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError::single(path, "", format!("cannot read file: {e}")))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, InputError> {
    toml::from_str(text).map_err(|e| InputError::single(path, "", e.message().to_string()))
}

pub fn parse_config(path: &Path, text: &str) -> Result<LoadedConfig, InputError> {
    let config: ModelConfig = parse(path, text)?;
    let (plan, params) = config.compile().map_err(|errors| InputError {
        file: path.display().to_string(),
        errors,
    })?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
        config,
        plan,
        params,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, InputError> {
    parse_config(path, &read(path)?)
}

pub fn load_scenario(path: &Path, cfg: &LoadedConfig) -> Result<LoadedScenario, InputError> {
    let text = read(path)?;
    let spec: ScenarioSpec = parse(path, &text)?;
    let compiled = spec.compile(&cfg.plan, &cfg.params).map_err(|errors| InputError {
        file: path.display().to_string(),
        errors,
    })?;
    Ok(LoadedScenario {
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
        spec,
        compiled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_are_reported_not_raised() {
        let e = parse_config(Path::new("x.toml"), "stages = 3").unwrap_err();
        assert_eq!(e.errors.len(), 1);
        assert!(e.to_json().starts_with("{\"file\":\"x.toml\""));
    }

    #[test]
    fn digest_is_lowercase_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
