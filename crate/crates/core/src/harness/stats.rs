//! Exit statistics: per-σ summaries, the Kramers window, slope regression and
//! exit-location mass.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dynamics::ExitRecord;
use crate::{Error, Result};

fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub sigma: f64,
    pub count: usize,
    pub censored: usize,
    /// over non-censored records; NaN (`null` in JSON) when all are censored
    #[serde(deserialize_with = "nullable_f64")]
    pub mean_exit_time: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub median_exit_time: f64,
    /// `ln(mean_exit_time)`
    #[serde(deserialize_with = "nullable_f64")]
    pub log_mean: f64,
    pub exit_points: Vec<Vec<f64>>,
    pub gamma_before_exit_fraction: f64,
}

/// Groups records by σ, in order of first appearance.
pub fn exit_stats(records: &[ExitRecord]) -> Vec<ExitStats> {
    let mut sigmas: Vec<f64> = Vec::new();
    for r in records {
        if !sigmas.contains(&r.sigma) {
            sigmas.push(r.sigma);
        }
    }
    sigmas
        .into_iter()
        .map(|sigma| {
            let group: Vec<&ExitRecord> = records.iter().filter(|r| r.sigma == sigma).collect();
            let mut times: Vec<f64> = group.iter().filter(|r| !r.censored).map(|r| r.exit_time).collect();
            times.sort_by(f64::total_cmp);
            let mean = if times.is_empty() { f64::NAN } else { times.iter().sum::<f64>() / times.len() as f64 };
            let median = match times.len() {
                0 => f64::NAN,
                n if n % 2 == 1 => times[n / 2],
                n => 0.5 * (times[n / 2 - 1] + times[n / 2]),
            };
            ExitStats {
                sigma,
                count: group.len(),
                censored: group.iter().filter(|r| r.censored).count(),
                mean_exit_time: mean,
                median_exit_time: median,
                log_mean: mean.ln(),
                exit_points: group.iter().filter_map(|r| r.exit_point.clone()).collect(),
                gamma_before_exit_fraction: group.iter().filter(|r| r.gamma_before_exit).count() as f64
                    / group.len() as f64,
            }
        })
        .collect()
}

fn in_window(r: &ExitRecord, h: f64, delta: f64) -> bool {
    if r.censored {
        return false;
    }
    let s2 = r.sigma * r.sigma;
    let lo = (2.0 * (h - delta) / s2).exp();
    let hi = (2.0 * (h + delta) / s2).exp();
    lo < r.exit_time && r.exit_time < hi
}

/// Fraction of records with `e^{2(H−δ)/σ²} < τ < e^{2(H+δ)/σ²}`, each record
/// using its own σ. Censored records count as outside.
pub fn kramers_window_fraction(records: &[ExitRecord], h: f64, delta: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyRecords("no records for the window statistic".into()));
    }
    Ok(records.iter().filter(|r| in_window(r, h, delta)).count() as f64 / records.len() as f64)
}

/// [`kramers_window_fraction`] per σ.
pub fn kramers_window_fraction_by_sigma(records: &[ExitRecord], h: f64, delta: f64) -> Result<Vec<(f64, f64)>> {
    let stats = exit_stats(records);
    if stats.is_empty() {
        return Err(Error::EmptyRecords("no records for the window statistic".into()));
    }
    stats
        .iter()
        .map(|s| {
            let group: Vec<ExitRecord> = records.iter().filter(|r| r.sigma == s.sigma).cloned().collect();
            kramers_window_fraction(&group, h, delta).map(|f| (s.sigma, f))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SlopeStatistic {
    #[default]
    Mean,
    Median,
}

/// Least-squares fit of `ln τ` against `1/σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// estimates `2H`
    pub slope: f64,
    pub intercept: f64,
    /// zero when the fit has no residual degrees of freedom
    pub stderr: f64,
    /// two-sided 90% t-interval for the slope; `None` with two points
    pub ci90: Option<(f64, f64)>,
    pub points: usize,
}

/// Fits `ln τ = intercept + slope/σ²` to `(σ, τ)` pairs.
pub fn fit_log_times(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut xs: Vec<f64> = points.iter().map(|(s, _)| 1.0 / (s * s)).collect();
    let ys: Vec<f64> = points.iter().map(|(_, t)| t.ln()).collect();
    if ys.iter().chain(&xs).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite point".into()));
    }
    let n = points.len();
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateFit("need at least two distinct sigma values".into()));
    }
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    xs.iter_mut().for_each(|x| *x -= xm);
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - ym - slope * x).powi(2)).sum();
    let dof = n - 2;
    let (stderr, ci90) = if dof == 0 {
        (0.0, None)
    } else {
        let se = (ssr / dof as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof as f64)
            .map_err(|e| Error::DegenerateFit(e.to_string()))?
            .inverse_cdf(0.95);
        (se, Some((slope - t * se, slope + t * se)))
    };
    Ok(SlopeFit { slope, intercept, stderr, ci90, points: n })
}

/// Regresses `ln(mean τ)` (or the median) on `1/σ²`. σ values whose
/// records are all censored are skipped; censored records inside a σ group
/// are excluded with a warning.
pub fn estimate_kramers_slope(stats: &[ExitStats], statistic: SlopeStatistic) -> Result<SlopeFit> {
    let mut pts = Vec::new();
    for s in stats {
        if s.censored > 0 {
            log::warn!("sigma {}: {} censored records excluded from the slope", s.sigma, s.censored);
        }
        let v = match statistic {
            SlopeStatistic::Mean => s.mean_exit_time,
            SlopeStatistic::Median => s.median_exit_time,
        };
        if v.is_finite() && v > 0.0 {
            pts.push((s.sigma, v));
        }
    }
    fit_log_times(&pts)
}

/// Fraction of non-censored exits whose exit point satisfies `region`.
pub fn exit_location_mass(records: &[ExitRecord], region: impl Fn(&[f64]) -> bool) -> Result<f64> {
    let exits: Vec<&Vec<f64>> = records.iter().filter(|r| !r.censored).filter_map(|r| r.exit_point.as_ref()).collect();
    if exits.is_empty() {
        return Err(Error::EmptyRecords("all records are censored".into()));
    }
    Ok(exits.iter().filter(|z| region(z)).count() as f64 / exits.len() as f64)
}
