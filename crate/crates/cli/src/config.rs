//! Settings resolution. Precedence: command-line flags, then environment,
//! then the TOML config file, then built-in defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use setscope_rag::generator::client::{ENV_KEY, ENV_MODEL, ENV_URL};
use setscope_rag::generator::{file_client, GroundedEchoClient, LiveClient, ModelClient};

use crate::error::CliError;

pub const ENV_STORE: &str = "SETSCOPE_STORE";
pub const ENV_CONFIG: &str = "SETSCOPE_CONFIG";
pub const ENV_EMBEDDING_MODEL: &str = "SETSCOPE_EMBEDDING_MODEL";
pub const DEFAULT_SESSION_TTL_SECS: u64 = 1800;

/// Contents of the optional TOML config file. Unknown keys are rejected so
/// typos do not silently fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub model_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub embedding_model: Option<String>,
    pub session_ttl_secs: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub store: Option<PathBuf>,
    pub model_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub embedding_model: Option<String>,
    pub session_ttl_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub store: Option<PathBuf>,
    pub model_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub embedding_model: Option<String>,
    pub session_ttl_secs: u64,
}

impl Settings {
    pub fn resolve(flags: Overrides, env: &dyn Fn(&str) -> Option<String>, file: FileConfig) -> Settings {
        let env = |k: &str| env(k).filter(|v| !v.is_empty());
        Settings {
            store: flags.store.or_else(|| env(ENV_STORE).map(PathBuf::from)).or(file.store),
            model_url: flags.model_url.or_else(|| env(ENV_URL)).or(file.model_url),
            model: flags.model.or_else(|| env(ENV_MODEL)).or(file.model),
            api_key: flags.api_key.or_else(|| env(ENV_KEY)).or(file.api_key),
            embedding_model: flags.embedding_model.or_else(|| env(ENV_EMBEDDING_MODEL)).or(file.embedding_model),
            session_ttl_secs: flags.session_ttl_secs.or(file.session_ttl_secs).unwrap_or(DEFAULT_SESSION_TTL_SECS),
        }
    }

    /// Reads the config file named by `config` or `SETSCOPE_CONFIG`, if any,
    /// and merges it with the process environment.
    pub fn from_process(flags: Overrides, config: Option<PathBuf>) -> Result<Settings, CliError> {
        let path = config.or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from));
        let file = match path {
            Some(p) => FileConfig::load(&p)?,
            None => FileConfig::default(),
        };
        Ok(Settings::resolve(flags, &|k| std::env::var(k).ok(), file))
    }

    pub fn store_path(&self) -> Result<&Path, CliError> {
        self.store
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("no store given; pass --store or set {ENV_STORE}")))
    }
}

/// Which model client answers questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientKind {
    /// Deterministic offline client that answers only from the evidence.
    Mock,
    /// OpenAI-compatible HTTP endpoint.
    Live,
    /// Replays completions from a JSON array of strings.
    Script(PathBuf),
}

impl FromStr for ClientKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(ClientKind::Mock),
            "live" => Ok(ClientKind::Live),
            _ => match s.strip_prefix("script:") {
                Some(p) if !p.is_empty() => Ok(ClientKind::Script(PathBuf::from(p))),
                _ => Err(format!("unknown client `{s}`; expected mock, live or script:<file>")),
            },
        }
    }
}

pub fn make_client(kind: &ClientKind, settings: &Settings) -> Result<Box<dyn ModelClient>, CliError> {
    Ok(match kind {
        ClientKind::Mock => Box::new(GroundedEchoClient),
        ClientKind::Script(p) => Box::new(file_client(p)?),
        ClientKind::Live => {
            let url = settings
                .model_url
                .clone()
                .ok_or_else(|| CliError::Usage(format!("live client needs --model-url or {ENV_URL}")))?;
            let model =
                settings.model.clone().ok_or_else(|| CliError::Usage(format!("live client needs --model or {ENV_MODEL}")))?;
            let mut c = LiveClient::new(url, model, settings.api_key.clone());
            c.embedding_model = settings.embedding_model.clone();
            Box::new(c)
        }
    })
}
