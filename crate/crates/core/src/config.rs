//! Run configuration: a flat `key = value` file whose entries can be
//! overridden one by one (the CLI applies its flags this way).

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use crate::combiners::{GreedyConfig, Method};
use crate::detectors::{DetectorConfig, Regime};
use crate::error::{invalid, Result};
use crate::experiment::ExperimentConfig;
use crate::irt::FitConfig;
use crate::model::DEFAULT_EPSILON;

/// Which combiners to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSelection {
    All,
    One(Method),
}

impl std::str::FromStr for MethodSelection {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            Ok(Self::All)
        } else {
            s.parse().map(Self::One)
        }
    }
}

impl MethodSelection {
    pub fn methods(self) -> Vec<Method> {
        match self {
            Self::All => Method::ALL.to_vec(),
            Self::One(m) => vec![m],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub regime: Regime,
    /// Explicit neighborhood sizes; each overrides the regime's value.
    pub k: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub method: MethodSelection,
    /// Greedy κ. `None` means 5, or the planted anomaly count in experiments.
    pub kappa: Option<usize>,
    pub kappa_range: RangeInclusive<usize>,
    pub fit: FitConfig,
    pub epsilon: f64,
    pub seed: u64,
    pub iterations: usize,
    pub repetitions: usize,
    pub out_dir: PathBuf,
    /// Treat IRT non-convergence as an error.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            regime: Regime::T1,
            k: None,
            k_min: None,
            k_max: None,
            method: MethodSelection::All,
            kappa: None,
            kappa_range: 1..=10,
            fit: FitConfig::default(),
            epsilon: DEFAULT_EPSILON,
            seed: 1,
            iterations: 10,
            repetitions: 10,
            out_dir: PathBuf::from("out"),
            strict: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .or_else(|_| invalid(format!("`{key}`: cannot parse `{value}`")))
}

/// Accepts `a..b`, `a..=b`, `a-b` or `a:b`, all inclusive.
pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>> {
    let s = s.trim();
    let (a, b) = ["..=", "..", "-", ":"]
        .iter()
        .find_map(|sep| s.split_once(sep))
        .ok_or_else(|| crate::Error::InvalidInput(format!("`{s}` is not a range like 1..10")))?;
    let lo = parse::<usize>("range", a.trim())?;
    let hi = parse::<usize>("range", b.trim())?;
    if lo == 0 || lo > hi {
        return invalid(format!("range {lo}..{hi} must satisfy 1 <= lo <= hi"));
    }
    Ok(lo..=hi)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => invalid(format!("`{key}`: `{v}` is not a boolean")),
    }
}

impl RunConfig {
    /// Parses a config file body. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                crate::Error::InvalidInput(format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| crate::Error::InvalidInput(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one entry by key. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_").to_ascii_lowercase();
        match key.as_str() {
            "regime" => self.regime = value.parse()?,
            "k" => self.k = Some(parse(&key, value)?),
            "k_min" => self.k_min = Some(parse(&key, value)?),
            "k_max" => self.k_max = Some(parse(&key, value)?),
            "method" => self.method = value.parse()?,
            "kappa" => self.kappa = Some(parse(&key, value)?),
            "kappa_range" => self.kappa_range = parse_range(value)?,
            "max_iter" => self.fit.max_iter = parse(&key, value)?,
            "tol" => self.fit.tol = parse(&key, value)?,
            "init_alpha" => self.fit.init_alpha = parse(&key, value)?,
            "init_beta" => self.fit.init_beta = parse(&key, value)?,
            "init_gamma" => self.fit.init_gamma = parse(&key, value)?,
            "epsilon" => self.epsilon = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "iterations" => self.iterations = parse(&key, value)?,
            "repetitions" => self.repetitions = parse(&key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "strict" => self.strict = parse_bool(&key, value)?,
            _ => return invalid(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return invalid(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon));
        }
        if self.iterations == 0 || self.repetitions == 0 {
            return invalid("iterations and repetitions must be at least 1");
        }
        if self.kappa == Some(0) {
            return invalid("kappa must be at least 1");
        }
        let explicit = [self.k, self.k_min, self.k_max].iter().filter(|v| v.is_some()).count();
        if self.regime == Regime::T2 && explicit != 0 && explicit != 3 {
            return invalid("with regime t2, set all of k, k_min and k_max or none of them");
        }
        let probe = self.detector_config(1_000);
        DetectorConfig::new(probe.k, probe.k_min, probe.k_max)?;
        Ok(())
    }

    /// Detector sizes for a dataset of `n_obs` rows.
    pub fn detector_config(&self, n_obs: usize) -> DetectorConfig {
        let base = DetectorConfig::for_regime(self.regime, n_obs);
        DetectorConfig {
            k: self.k.unwrap_or(base.k),
            k_min: self.k_min.unwrap_or(base.k_min),
            k_max: self.k_max.unwrap_or(base.k_max),
        }
    }

    fn has_explicit_k(&self) -> bool {
        self.k.is_some() || self.k_min.is_some() || self.k_max.is_some()
    }

    pub fn greedy(&self) -> Result<GreedyConfig> {
        GreedyConfig::new(self.kappa.unwrap_or(5), self.kappa_range.clone())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            regime: self.regime,
            detectors: self.has_explicit_k().then(|| self.detector_config(1_000)),
            kappa: self.kappa,
            kappa_range: self.kappa_range.clone(),
            fit: self.fit,
            epsilon: self.epsilon,
        }
    }

    /// Serializes every entry; `parse` of the output reproduces `self`.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let regime = match self.regime {
            Regime::T1 => "t1",
            Regime::T2 => "t2",
        };
        let _ = writeln!(s, "regime = {regime}");
        for (key, v) in [("k", self.k), ("k_min", self.k_min), ("k_max", self.k_max), ("kappa", self.kappa)] {
            if let Some(v) = v {
                let _ = writeln!(s, "{key} = {v}");
            }
        }
        let method = match self.method {
            MethodSelection::All => "all".to_string(),
            MethodSelection::One(m) => m.name().to_string(),
        };
        let _ = writeln!(s, "method = {method}");
        let _ = writeln!(s, "kappa_range = {}..{}", self.kappa_range.start(), self.kappa_range.end());
        let _ = writeln!(s, "max_iter = {}", self.fit.max_iter);
        let _ = writeln!(s, "tol = {}", self.fit.tol);
        let _ = writeln!(s, "init_alpha = {}", self.fit.init_alpha);
        let _ = writeln!(s, "init_beta = {}", self.fit.init_beta);
        let _ = writeln!(s, "init_gamma = {}", self.fit.init_gamma);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "repetitions = {}", self.repetitions);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "strict = {}", self.strict);
        s
    }
}
