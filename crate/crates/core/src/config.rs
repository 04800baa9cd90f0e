//! Data-path resolution: command-line flags, then `UNSAFE_PROPS_*`
//! environment variables, then the `unsafe-props.toml` config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const CONFIG_FILE: &str = "unsafe-props.toml";
pub const ENV_PREFIX: &str = "UNSAFE_PROPS_";

/// Paths to the data files. `None` selects the shipped default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub catalog: Option<PathBuf>,
    pub database: Option<PathBuf>,
    pub cves: Option<PathBuf>,
    pub safe_names: Option<PathBuf>,
}

impl DataPaths {
    /// Fills every unset field from `other`.
    pub fn or(self, other: DataPaths) -> DataPaths {
        DataPaths {
            catalog: self.catalog.or(other.catalog),
            database: self.database.or(other.database),
            cves: self.cves.or(other.cves),
            safe_names: self.safe_names.or(other.safe_names),
        }
    }

    fn relative_to(mut self, base: &Path) -> Self {
        for p in [&mut self.catalog, &mut self.database, &mut self.cves, &mut self.safe_names].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }

    /// Reads the `UNSAFE_PROPS_CATALOG`, `_DATABASE`, `_CVES` and
    /// `_SAFE_NAMES` variables through `env`.
    pub fn from_env(env: impl Fn(&str) -> Option<String>) -> Self {
        let var = |name: &str| env(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty()).map(PathBuf::from);
        DataPaths { catalog: var("CATALOG"), database: var("DATABASE"), cves: var("CVES"), safe_names: var("SAFE_NAMES") }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// The config file in effect: `explicit`, else `UNSAFE_PROPS_CONFIG`, else
/// the first of `cwd` and `user_dir` holding `unsafe-props.toml`.
pub fn locate(explicit: Option<&Path>, env: impl Fn(&str) -> Option<String>, cwd: &Path, user_dir: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    if let Some(p) = env(&format!("{ENV_PREFIX}CONFIG")).filter(|v| !v.is_empty()) {
        return Some(PathBuf::from(p));
    }
    [Some(cwd), user_dir].into_iter().flatten().map(|d| d.join(CONFIG_FILE)).find(|p| p.is_file())
}

/// Parses a config file. Relative paths inside it are taken relative to
/// the file's directory.
pub fn load_config(path: &Path) -> Result<DataPaths, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let paths: DataPaths = toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(paths.relative_to(path.parent().unwrap_or(Path::new("."))))
}

/// Resolves the data paths in precedence order.
pub fn resolve_paths(
    flags: DataPaths,
    explicit_config: Option<&Path>,
    env: impl Fn(&str) -> Option<String>,
    cwd: &Path,
    user_dir: Option<&Path>,
) -> Result<DataPaths, ConfigError> {
    let from_env = DataPaths::from_env(&env);
    let from_file = match locate(explicit_config, &env, cwd, user_dir) {
        Some(path) => load_config(&path)?,
        None => DataPaths::default(),
    };
    Ok(flags.or(from_env).or(from_file))
}
