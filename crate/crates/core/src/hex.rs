//! 64-bit code and data addresses.
//!
//! Both are stored as plain `u64` and rendered as `0x`-prefixed lowercase hex,
//! which is also their serialized form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Error returned when a hex token cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid hex value `{0}`")]
pub struct HexParseError(pub String);

/// Parse `0x`-prefixed (or bare) hex into a `u64`.
pub fn parse_hex_u64(s: &str) -> Result<u64, HexParseError> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    if digits.is_empty() || digits.len() > 16 {
        return Err(HexParseError(s.to_string()));
    }
    u64::from_str_radix(digits, 16).map_err(|_| HexParseError(s.to_string()))
}

macro_rules! hex_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub u64);

        impl $name {
            pub const fn get(self) -> u64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:#x}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = HexParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_hex_u64(s.trim()).map($name)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                $name(v)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_newtype!(
    /// Program counter of the instruction issuing an access.
    Pc
);
hex_newtype!(
    /// Data address of an access (line granular in simulated traces).
    Address
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_lowercase_prefixed() {
        assert_eq!(Pc(0x401E31).to_string(), "0x401e31");
        assert_eq!(Address(0x35e798a637f).to_string(), "0x35e798a637f");
        assert_eq!(Address(0).to_string(), "0x0");
    }

    #[test]
    fn parses_with_and_without_prefix() {
        assert_eq!("0x401E31".parse::<Pc>().unwrap(), Pc(0x401e31));
        assert_eq!("401e31".parse::<Pc>().unwrap(), Pc(0x401e31));
        assert!("0xZZ".parse::<Pc>().is_err());
        assert!("0x".parse::<Pc>().is_err());
        assert!("0x11112222333344445".parse::<Address>().is_err());
    }

    #[test]
    fn serde_uses_hex_strings() {
        let json = serde_json::to_string(&Address(0x2a9e6a48d9d)).unwrap();
        assert_eq!(json, "\"0x2a9e6a48d9d\"");
        let back: Address = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Address(0x2a9e6a48d9d));
    }
}
