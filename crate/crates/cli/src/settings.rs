use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Flat `key = value` configuration; command-line flags take precedence.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", i + 1)))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Settings { values })
    }

    /// `flag`, else the config entry `key`, else `default`.
    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::usage(format!("config `{key}`: cannot parse `{s}`"))),
            None => Ok(default),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|s| s.parse().map_err(|_| CliError::usage(format!("config `{key}`: cannot parse `{s}`"))))
            .transpose()
    }
}

/// Independent seed for the named consumer of a run seed.
pub fn substream(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the seed by splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let s = Settings::parse("hours = 2\n# note\nbase-period = 600\n").unwrap();
        assert_eq!(s.get("hours", None, 35.0).unwrap(), 2.0);
        assert_eq!(s.get("hours", Some(5.0), 35.0).unwrap(), 5.0);
        assert_eq!(s.get("base_period", None, 1200.0).unwrap(), 600.0);
        assert_eq!(s.get("d", None, 10.0).unwrap(), 10.0);
        assert!(s.get::<u64>("hours", None, 1).is_ok());
        assert!(Settings::parse("nonsense").is_err());
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream(1, "plant"), substream(1, "prbs"));
        assert_ne!(substream(1, "plant"), substream(2, "plant"));
        assert_eq!(substream(7, "plant"), substream(7, "plant"));
    }
}
