//! Hierarchical administrative keys: 2 digits state, 5 district, 8 municipality.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ags(String);

impl Ags {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn prefix(&self, level: Level) -> &str {
        &self.0[..level.key_len()]
    }
}

impl FromStr for Ags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Ags(s.to_string()))
        } else {
            Err(Error::MalformedAgs(s.to_string()))
        }
    }
}

impl TryFrom<String> for Ags {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Ags> for String {
    fn from(a: Ags) -> String {
        a.0
    }
}

impl fmt::Display for Ags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Municipality,
    District,
    State,
    National,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Municipality, Level::District, Level::State, Level::National];

    pub fn key_len(self) -> usize {
        match self {
            Level::Municipality => 8,
            Level::District => 5,
            Level::State => 2,
            Level::National => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Municipality => "municipality",
            Level::District => "district",
            Level::State => "state",
            Level::National => "national",
        }
    }

    /// Level addressed by a key or key prefix; rejects anything that is not
    /// 0, 2, 5 or 8 decimal digits.
    pub fn of_key(key: &str) -> Result<Level, Error> {
        if !key.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedAgs(key.to_string()));
        }
        Level::ALL
            .into_iter()
            .find(|l| l.key_len() == key.len())
            .ok_or_else(|| Error::MalformedAgs(key.to_string()))
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_prefix() {
        let a: Ags = "09162000".parse().unwrap();
        assert_eq!(a.prefix(Level::State), "09");
        assert_eq!(a.prefix(Level::District), "09162");
        assert_eq!(a.prefix(Level::National), "");
        assert!("0916200".parse::<Ags>().is_err());
        assert!("0916200x".parse::<Ags>().is_err());
    }

    #[test]
    fn level_from_key_length() {
        assert_eq!(Level::of_key("").unwrap(), Level::National);
        assert_eq!(Level::of_key("09").unwrap(), Level::State);
        assert_eq!(Level::of_key("09162").unwrap(), Level::District);
        assert_eq!(Level::of_key("09162000").unwrap(), Level::Municipality);
        assert!(Level::of_key("091").is_err());
        assert!(Level::of_key("ab").is_err());
    }
}
