//! Campaign output: `records.csv` and `summary.json`.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::stats::{ExitStats, SlopeFit};
use crate::dynamics::ExitRecord;
use crate::{Error, Result};

/// SHA-256 of the config's JSON serialization, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub dt: f64,
    pub attractor: Vec<f64>,
    /// `None` when the boundary cannot be sampled
    pub barrier: Option<f64>,
    pub z_star: Option<Vec<f64>>,
    pub rho: f64,
    pub t_st: f64,
    /// `(σ, horizon)`
    pub horizons: Vec<(f64, f64)>,
    pub stats: Vec<ExitStats>,
    pub slope: Option<SlopeFit>,
}

/// Columns: `sigma,seed,exit_time,censored,steps,gamma_before_exit,x1..xd`;
/// coordinates are empty for censored records.
pub fn write_records_csv(path: &FsPath, records: &[ExitRecord], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> =
        ["sigma", "seed", "exit_time", "censored", "steps", "gamma_before_exit"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=dim).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.sigma.to_string(),
            r.seed.to_string(),
            r.exit_time.to_string(),
            r.censored.to_string(),
            r.steps.to_string(),
            r.gamma_before_exit.to_string(),
        ];
        match &r.exit_point {
            Some(z) => row.extend(z.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), dim)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &FsPath) -> Result<Vec<ExitRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let parse_err = |what: &str| Error::Config(format!("malformed records file: {what}"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let get = |i: usize| row.get(i).ok_or_else(|| parse_err("missing column"));
        let num = |i: usize| -> Result<f64> { get(i)?.parse().map_err(|_| parse_err("number")) };
        let coords: Vec<&str> = row.iter().skip(6).collect();
        let exit_point = if coords.iter().all(|c| c.is_empty()) {
            None
        } else {
            Some(coords.iter().map(|c| c.parse().map_err(|_| parse_err("coordinate"))).collect::<Result<Vec<f64>>>()?)
        };
        out.push(ExitRecord {
            sigma: num(0)?,
            seed: get(1)?.parse().map_err(|_| parse_err("seed"))?,
            exit_time: num(2)?,
            censored: get(3)?.parse().map_err(|_| parse_err("censored"))?,
            steps: get(4)?.parse().map_err(|_| parse_err("steps"))?,
            gamma_before_exit: get(5)?.parse().map_err(|_| parse_err("gamma"))?,
            exit_point,
        });
    }
    Ok(out)
}

pub fn write_summary_json(path: &FsPath, summary: &CampaignSummary) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

pub fn read_summary_json(path: &FsPath) -> Result<CampaignSummary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
