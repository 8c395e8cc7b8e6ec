//! JSON experiment configuration.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::DomainSpec;
use crate::landscape::Landscape;
use crate::measures::{make_init, Atom, ExtendedInit, DEFAULT_CAP};
use crate::{Error, Result};

/// `t₀` is written as a number or as the string `"inf"`.
mod t0_format {
    use super::*;

    pub fn serialize<S: Serializer>(t0: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if t0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*t0)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "+inf" | "infinity") => {
                Ok(f64::INFINITY)
            }
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid t0 `{s}`"))),
        }
    }
}

/// Initial condition `(x₀, t₀, μ₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub x0: Vec<f64>,
    #[serde(default, with = "t0_format")]
    pub t0: f64,
    #[serde(default)]
    pub mu0: Vec<Atom>,
}

impl InitSpec {
    pub fn at(x0: Vec<f64>) -> Self {
        Self { x0, t0: 0.0, mu0: Vec::new() }
    }

    pub fn build(&self) -> Result<ExtendedInit> {
        make_init(self.t0, self.mu0.iter().map(|a| (a.point.clone(), a.weight)).collect(), self.x0.clone())
    }
}

fn default_dim() -> usize {
    1
}
fn default_horizon_cap() -> f64 {
    1e6
}
fn default_eps() -> f64 {
    0.5
}
fn default_snapshot_every() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_cap() -> usize {
    DEFAULT_CAP
}

/// One exit-time campaign.
///
/// Optional fields fall back to: `dt = 0.01 / max(Lip_∇V + Lip_∇F, 1)`, the
/// attractor reached from `x₀`, `ρ = 0.1 ·` inradius of `G` about the
/// attractor, and `T_st =` twice the time the noiseless system needs to enter
/// `B_{ρ/2}(a)`. The per-σ horizon is `min(horizon_cap, exp(2(H+1)/σ²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub landscape: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub domain: DomainSpec,
    pub init: InitSpec,
    pub sigma_grid: Vec<f64>,
    pub trajectories_per_sigma: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub attractor: Option<Vec<f64>>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub t_st: Option<f64>,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// evaluate `W₂(μ_t, δ_a)` to detect `γ`
    #[serde(default = "default_true")]
    pub track_gamma: bool,
    #[serde(default = "default_cap")]
    pub measure_cap: usize,
    /// worker threads; `None` uses the global pool
    #[serde(default)]
    pub threads: Option<usize>,
    /// directory for `records.csv` and `summary.json`
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal configuration; everything else takes its default.
    pub fn new(
        landscape: &str,
        dim: usize,
        domain: DomainSpec,
        x0: Vec<f64>,
        sigma_grid: Vec<f64>,
        trajectories_per_sigma: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            landscape: landscape.to_string(),
            dim,
            domain,
            init: InitSpec::at(x0),
            sigma_grid,
            trajectories_per_sigma,
            dt: None,
            horizon_cap: default_horizon_cap(),
            master_seed,
            attractor: None,
            rho: None,
            eps: default_eps(),
            t_st: None,
            snapshot_every: default_snapshot_every(),
            track_gamma: true,
            measure_cap: DEFAULT_CAP,
            threads: None,
            output: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("sigma_grid must be nonempty and strictly positive");
        }
        if self.trajectories_per_sigma == 0 {
            return bad("trajectories_per_sigma must be at least 1");
        }
        if self.dt.is_some_and(|dt| !(dt > 0.0)) {
            return bad("dt must be positive");
        }
        if !(self.horizon_cap > 0.0) {
            return bad("horizon_cap must be positive");
        }
        if self.rho.is_some_and(|r| !(r > 0.0)) || !(self.eps > 0.0) {
            return bad("rho and eps must be positive");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        self.domain.validate()?;
        if self.domain.dim() != self.dim || self.init.x0.len() != self.dim {
            return bad("dimension of domain, x0 and landscape must agree");
        }
        if !self.domain.contains(&self.init.x0) {
            return bad("x0 must lie inside the domain");
        }
        Landscape::preset(&self.landscape, self.dim)?;
        self.init.build()?;
        Ok(())
    }
}

/// Parses a domain from JSON or from the shorthands `interval:lo:hi`
/// (`inf` allowed), `ball:c1,c2,..:r` and `box:lo1,..:hi1,..`.
pub fn parse_domain(s: &str) -> Result<DomainSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        let d: DomainSpec = serde_json::from_str(s)?;
        d.validate()?;
        return Ok(d);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| -> Result<f64> {
        match v.trim() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            t => t.parse().map_err(|_| Error::Config(format!("bad number `{t}` in domain `{s}`"))),
        }
    };
    let list = |v: &str| -> Result<Vec<f64>> { v.split(',').map(num).collect() };
    let d = match parts.as_slice() {
        ["interval", lo, hi] => DomainSpec::interval(num(lo)?, num(hi)?),
        ["ball", c, r] => DomainSpec::ball(list(c)?, num(r)?),
        ["box", lo, hi] => DomainSpec::Box { lo: list(lo)?, hi: list(hi)? },
        _ => return Err(Error::Config(format!("unrecognized domain `{s}`"))),
    };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults_and_round_trip() {
        let js = r#"{
            "landscape": "ou",
            "domain": {"kind": "interval", "lo": -1.0, "hi": 1.0},
            "init": {"x0": [0.0]},
            "sigma_grid": [0.5],
            "trajectories_per_sigma": 10,
            "master_seed": 7
        }"#;
        let c = ExperimentConfig::from_json_str(js).unwrap();
        assert_eq!(c.dim, 1);
        assert_eq!(c.eps, 0.5);
        assert_eq!(c.snapshot_every, 100);
        assert_eq!(c.measure_cap, DEFAULT_CAP);
        c.validate().unwrap();
        let back = ExperimentConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn infinite_t0_round_trips() {
        let i: InitSpec = serde_json::from_str(r#"{"x0": [0.0], "t0": "inf", "mu0": [{"point": [1.0], "weight": 1.0}]}"#).unwrap();
        assert!(i.t0.is_infinite());
        assert!(i.build().unwrap().is_frozen());
        let s = serde_json::to_string(&i).unwrap();
        assert!(s.contains("\"inf\""));
        assert!(serde_json::from_str::<InitSpec>(r#"{"x0": [0.0], "t0": "soon"}"#).is_err());
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut c = ExperimentConfig::new("ou", 1, DomainSpec::interval(-1.0, 1.0), vec![0.0], vec![0.5], 4, 1);
        c.validate().unwrap();
        c.sigma_grid = vec![0.5, 0.0];
        assert!(c.validate().is_err());
        c.sigma_grid = vec![0.5];
        c.trajectories_per_sigma = 0;
        assert!(c.validate().is_err());
        c.trajectories_per_sigma = 1;
        c.init.x0 = vec![3.0];
        assert!(c.validate().is_err());
        c.init.x0 = vec![0.0];
        c.landscape = "nope".into();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"landscape": "ou", "bogus": 1}"#).is_err());
    }

    #[test]
    fn domain_shorthands() {
        assert_eq!(parse_domain("interval:-1:1").unwrap(), DomainSpec::interval(-1.0, 1.0));
        assert_eq!(
            parse_domain("interval:-2:inf").unwrap(),
            DomainSpec::Interval { lo: Some(-2.0), hi: None }
        );
        assert_eq!(parse_domain("ball:0,0:1").unwrap(), DomainSpec::ball(vec![0.0, 0.0], 1.0));
        assert!(parse_domain("box:0,0:1,1").is_ok());
        assert!(parse_domain(r#"{"kind": "ball", "center": [0.0], "radius": 2.0}"#).is_ok());
        assert!(parse_domain("ball:0:-1").is_err());
        assert!(parse_domain("disk:0:1").is_err());
    }
}
