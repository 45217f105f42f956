use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SEPARATOR: &str = "_evictions_";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("invalid identifier `{0}`: must be non-empty and contain only [a-z0-9_]")]
    InvalidIdentifier(String),
    #[error("`{0}` is not of the form <workload>_evictions_<policy>")]
    Malformed(String),
}

/// Identifies one trace bundle: a workload replayed under one policy.
///
/// Rendered as `<workload>_evictions_<policy>`, e.g. `lbm_evictions_lru`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceKey {
    workload: String,
    policy: String,
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl TraceKey {
    pub fn new(workload: impl Into<String>, policy: impl Into<String>) -> Result<Self, KeyError> {
        let workload = workload.into();
        let policy = policy.into();
        for id in [&workload, &policy] {
            if !valid_identifier(id) {
                return Err(KeyError::InvalidIdentifier(id.clone()));
            }
        }
        let key = Self { workload, policy };
        // the separator must occur exactly once or parsing the id is ambiguous
        let id = key.canonical_id();
        if id.matches(SEPARATOR).count() != 1 || key.workload.ends_with("_evictions") {
            return Err(KeyError::Malformed(id));
        }
        Ok(key)
    }

    pub fn workload(&self) -> &str {
        &self.workload
    }

    pub fn policy(&self) -> &str {
        &self.policy
    }

    pub fn canonical_id(&self) -> String {
        format!("{}{SEPARATOR}{}", self.workload, self.policy)
    }
}

impl fmt::Display for TraceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{SEPARATOR}{}", self.workload, self.policy)
    }
}

impl FromStr for TraceKey {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (workload, policy) = s
            .split_once(SEPARATOR)
            .ok_or_else(|| KeyError::Malformed(s.to_string()))?;
        TraceKey::new(workload, policy)
    }
}

impl Serialize for TraceKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TraceKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
