//! Parallel exit-time campaigns.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::persist::{config_hash, write_records_csv, write_summary_json, CampaignSummary};
use super::stats::{estimate_kramers_slope, exit_stats, ExitStats, SlopeStatistic};
use crate::action::{compute_h, Barrier};
use crate::dynamics::{find_attractor, simulate_sid, ExitRecord, SimOptions, Watch};
use crate::landscape::Landscape;
use crate::measures::{ExtendedInit, OccupationMeasure};
use crate::rng::derive_seed;
use crate::{dist, Error, Result};

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub records: Vec<ExitRecord>,
    pub stats: Vec<ExitStats>,
    pub summary: CampaignSummary,
}

/// `0.01 / max(Lip_∇V + Lip_∇F, 1)`, or `1e-3` when no constant is known.
pub fn default_dt(landscape: &Landscape) -> f64 {
    landscape.lipschitz_sum().map_or(1e-3, |l| 0.01 / l.max(1.0))
}

/// Twice the time the noiseless system from `init` needs to enter `B_{ρ/2}(a)`.
pub fn default_t_st(init: &ExtendedInit, landscape: &Landscape, a: &[f64], rho: f64, dt: f64, cap: usize) -> f64 {
    let d = landscape.dim();
    let mut mu = OccupationMeasure::new(init, cap);
    let mut x = init.x0().to_vec();
    let mut drift = vec![0.0; d];
    let t_limit = 1e4;
    let mut t = 0.0;
    while dist(&x, a) >= 0.5 * rho {
        if t > t_limit || x.iter().any(|v| !v.is_finite()) {
            log::warn!("noiseless system did not reach B_(ρ/2)(a) by t = {t_limit}; using T_st = 0");
            return 0.0;
        }
        landscape.grad_v_into(&x, &mut drift);
        mu.add_interaction_drift(landscape, &x, 1.0, &mut drift);
        mu.push_sample(&x, dt);
        for k in 0..d {
            x[k] -= drift[k] * dt;
        }
        t += dt;
    }
    2.0 * t
}

/// Runs `trajectories_per_sigma` trajectories for each σ.
///
/// Trajectory `j` at σ index `i` uses the seed `derive_seed(master, i, j)`;
/// records come back ordered by `(i, j)` whatever the worker count, so the
/// output is bit-identical across thread counts. Writes `records.csv` and
/// `summary.json` when `output` is set.
pub fn run_exit_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let landscape = Landscape::preset(&cfg.landscape, cfg.dim)?;
    let init = cfg.init.build()?;
    let dt = cfg.dt.unwrap_or_else(|| default_dt(&landscape));
    let a = match &cfg.attractor {
        Some(a) if a.len() == cfg.dim => a.clone(),
        Some(_) => return Err(Error::Config("attractor dimension mismatch".into())),
        None => find_attractor(init.x0(), &landscape, 0.01, 1e-8, 1e4)?,
    };
    if !cfg.domain.contains(&a) {
        return Err(Error::Config("attractor lies outside the domain".into()));
    }
    let barrier: Option<Barrier> = match compute_h(&landscape, &cfg.domain, &a, 256, cfg.master_seed) {
        Ok(b) => Some(b),
        Err(Error::UnboundedBoundary) => None,
        Err(e) => return Err(e),
    };
    let inradius = cfg.domain.inradius_about(&a);
    let rho = cfg.rho.unwrap_or(0.1 * inradius);
    let t_st = cfg.t_st.unwrap_or_else(|| default_t_st(&init, &landscape, &a, rho, dt, cfg.measure_cap));

    let horizons: Vec<(f64, f64)> = cfg
        .sigma_grid
        .iter()
        .map(|s| {
            let kramers = barrier.as_ref().map_or(f64::INFINITY, |b| (2.0 * (b.h + 1.0) / (s * s)).exp());
            (*s, cfg.horizon_cap.min(kramers))
        })
        .collect();
    for s in &cfg.sigma_grid {
        if s * dt.sqrt() > 0.1 * inradius {
            log::warn!("sigma {s}: noise increment σ√dt exceeds 10% of the domain inradius");
        }
    }

    let opts = SimOptions {
        domain: Some(cfg.domain.clone()),
        decimation: None,
        watch: cfg.track_gamma.then(|| Watch {
            a: a.clone(),
            rho,
            eps: cfg.eps,
            t_st,
            snapshot_every: cfg.snapshot_every,
        }),
        measure_cap: cfg.measure_cap,
        keep_w2_trace: false,
    };
    let jobs: Vec<(usize, usize)> =
        (0..cfg.sigma_grid.len()).flat_map(|i| (0..cfg.trajectories_per_sigma).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| -> Result<ExitRecord> {
        let (sigma, horizon) = horizons[i];
        let seed = derive_seed(cfg.master_seed, i as u64, j as u64);
        simulate_sid(&init, &landscape, sigma, dt, horizon, seed, &opts).map(|o| o.record)
    };
    let records: Vec<ExitRecord> = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| jobs.par_iter().map(run).collect::<Result<Vec<_>>>())?,
        None => jobs.par_iter().map(run).collect::<Result<Vec<_>>>()?,
    };

    let stats = exit_stats(&records);
    let slope = if stats.len() >= 2 { estimate_kramers_slope(&stats, SlopeStatistic::Mean).ok() } else { None };
    let summary = CampaignSummary {
        config: cfg.clone(),
        config_hash: config_hash(cfg)?,
        dt,
        attractor: a,
        barrier: barrier.as_ref().map(|b| b.h),
        z_star: barrier.map(|b| b.z_star),
        rho,
        t_st,
        horizons,
        stats: stats.clone(),
        slope,
    };
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir)?;
        write_records_csv(&dir.join("records.csv"), &records, cfg.dim)?;
        write_summary_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(CampaignResult { records, stats, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::new("ou", 1, DomainSpec::interval(-1.0, 1.0), vec![0.0], vec![1.0, 0.8], 16, 9);
        c.dt = Some(1e-3);
        c
    }

    #[test]
    fn counts_and_determinism() {
        let c = small();
        let r1 = run_exit_campaign(&c).unwrap();
        let r2 = run_exit_campaign(&c).unwrap();
        assert_eq!(r1.records, r2.records);
        assert_eq!(r1.stats, r2.stats);
        assert!(r1.stats.iter().all(|s| s.count == 16));
        assert_eq!(r1.summary.barrier, Some(0.5));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut c = small();
        c.threads = Some(1);
        let serial = run_exit_campaign(&c).unwrap();
        c.threads = Some(3);
        let parallel = run_exit_campaign(&c).unwrap();
        assert_eq!(serial.records, parallel.records);
        assert_eq!(serial.stats, parallel.stats);
    }

    #[test]
    fn writes_output_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small();
        c.output = Some(dir.path().to_path_buf());
        let r = run_exit_campaign(&c).unwrap();
        let back = super::super::persist::read_records_csv(&dir.path().join("records.csv")).unwrap();
        assert_eq!(back, r.records);
        let s = super::super::persist::read_summary_json(&dir.path().join("summary.json")).unwrap();
        assert_eq!(s.config_hash, r.summary.config_hash);
    }

    #[test]
    fn default_dt_follows_stiffness() {
        assert_eq!(default_dt(&Landscape::preset("ou", 1).unwrap()), 0.01);
        assert_eq!(default_dt(&Landscape::preset("quad-attract(1)", 1).unwrap()), 0.005);
    }
}
