use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use phigamma::herr::HerrParams;
use phigamma::padic::{is_odd_prime, Modulus};

use crate::jobs::Job;

/// Everything a run depends on. Two runs with equal configs write equal reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::p")]
    pub p: u64,
    #[serde(rename = "N", default = "defaults::n")]
    pub n: u32,
    #[serde(rename = "G", default = "defaults::g")]
    pub g: u32,
    #[serde(rename = "D", default = "defaults::d")]
    pub d: i64,
    #[serde(default = "defaults::m")]
    pub m: u32,
    #[serde(default = "defaults::witt_length")]
    pub witt_length: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub jobs: Vec<Job>,
}

mod defaults {
    pub fn p() -> u64 {
        3
    }
    pub fn n() -> u32 {
        12
    }
    pub fn g() -> u32 {
        4
    }
    pub fn d() -> i64 {
        60
    }
    pub fn m() -> u32 {
        3
    }
    pub fn witt_length() -> usize {
        3
    }
    pub fn seed() -> u64 {
        0x5eed
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: defaults::p(),
            n: defaults::n(),
            g: defaults::g(),
            d: defaults::d(),
            m: defaults::m(),
            witt_length: defaults::witt_length(),
            seed: defaults::seed(),
            jobs: Vec::new(),
        }
    }
}

/// Flag values that override the file (or the defaults).
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub p: Option<u64>,
    pub n: Option<u32>,
    pub g: Option<u32>,
    pub d: Option<i64>,
    pub m: Option<u32>,
    pub witt_length: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse_config(path: Option<&Path>, o: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut c = match path {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("malformed config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    c.p = o.p.unwrap_or(c.p);
    c.n = o.n.unwrap_or(c.n);
    c.g = o.g.unwrap_or(c.g);
    c.d = o.d.unwrap_or(c.d);
    c.m = o.m.unwrap_or(c.m);
    c.witt_length = o.witt_length.unwrap_or(c.witt_length);
    c.seed = o.seed.unwrap_or(c.seed);
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !is_odd_prime(self.p) {
            return Err(ConfigError(format!("p = {} is not an odd prime", self.p)));
        }
        if self.g < 1 || self.n <= self.g {
            return Err(ConfigError(format!("need N > G >= 1, got N = {}, G = {}", self.n, self.g)));
        }
        if self.d < self.p as i64 {
            return Err(ConfigError(format!("need D >= p, got D = {}", self.d)));
        }
        if !(1..=4).contains(&self.witt_length) {
            return Err(ConfigError(format!("witt length {} outside 1..=4", self.witt_length)));
        }
        if self.witt_length as u32 > self.n {
            return Err(ConfigError("witt length exceeds N".into()));
        }
        if self.m < 1 {
            return Err(ConfigError("cyclotomic level m must be at least 1".into()));
        }
        Modulus::new(self.p, self.n + self.g).map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    pub fn params(&self) -> HerrParams {
        HerrParams::new(self.p, self.n, self.d, self.g).expect("validated")
    }

    /// Coefficient ring of the input modules, at the refined precision `N + G`.
    pub fn module_modulus(&self) -> Modulus {
        Modulus::new(self.p, self.n + self.g).expect("validated")
    }
}
