use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sidlab::action::{build_psi, compute_h, minimize_action, MinimizeOptions, PsiParams};
use sidlab::dynamics::{find_attractor, simulate_sid, SimOptions, Watch};
use sidlab::geometry::{check_flow_stability, check_sublevel, level_set_min_gradient, DomainSpec};
use sidlab::harness::config::parse_domain;
use sidlab::harness::{bvp_mean_exit_1d, run_exit_campaign, ExperimentConfig, InitSpec};
use sidlab::landscape::{check_strong_attraction, Landscape};
use sidlab::measures::ExtendedInit;
use sidlab::{Error, Result};

#[derive(Parser)]
#[command(name = "sidlab", version, about = "Exit problems for self-interacting diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Problem {
    /// landscape preset, e.g. `ou`, `dw`, `quad-attract(1)`, `dw+gauss-repel(0.5)`
    #[arg(long, default_value = "ou")]
    landscape: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// `interval:lo:hi`, `ball:c1,c2:r`, `box:lo1,lo2:hi1,hi2` or JSON
    #[arg(long, default_value = "interval:-1:1")]
    domain: String,
    /// attractor; found from x0 when omitted
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    attractor: Option<Vec<f64>>,
}

impl Problem {
    fn load(&self) -> Result<(Landscape, DomainSpec)> {
        let l = Landscape::preset(&self.landscape, self.dim)?;
        let g = parse_domain(&self.domain)?;
        if g.dim() != self.dim {
            return Err(Error::Config("domain dimension differs from --dim".into()));
        }
        Ok((l, g))
    }

    fn attractor(&self, l: &Landscape, from: &[f64]) -> Result<Vec<f64>> {
        match &self.attractor {
            Some(a) => Ok(a.clone()),
            None => find_attractor(from, l, 0.01, 1e-8, 1e4),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and dump its path and excursion trace
    Simulate {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1e3)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// keep every k-th state
        #[arg(long, default_value_t = 10)]
        decimation: usize,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        t_st: f64,
        /// CSV file for the decimated path
        #[arg(long)]
        path_csv: Option<PathBuf>,
    },
    /// Run an exit-time campaign from a JSON config
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon_cap: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Barrier height and a minimum action cross-check
    Barrier {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        n_boundary: usize,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// CSV file for the minimum action path
        #[arg(long)]
        path_csv: Option<PathBuf>,
    },
    /// Report the assumption checkers
    Check {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean exit time from the 1D boundary value problem (no interaction)
    Bvp {
        #[arg(long, default_value = "ou")]
        landscape: String,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 2048)]
        grid_n: usize,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<f64>,
        /// CSV file for the solution on the grid
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build the four-piece exit path and score it
    Psi {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long)]
        rho: f64,
        /// action margin as a fraction of H
        #[arg(long, default_value_t = 0.1)]
        eta_frac: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 10.0)]
        t_a: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        path_csv: Option<PathBuf>,
    },
}

fn print(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("JSON value");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { problem, x0, sigma, dt, horizon, seed, decimation, rho, eps, t_st, path_csv } => {
            let (l, g) = problem.load()?;
            let a = problem.attractor(&l, &x0)?;
            let rho = rho.unwrap_or(0.1 * g.inradius_about(&a));
            let opts = SimOptions {
                domain: Some(g),
                decimation: Some(decimation.max(1)),
                watch: Some(Watch { a, rho, eps, t_st, snapshot_every: 100 }),
                keep_w2_trace: true,
                ..Default::default()
            };
            let out = simulate_sid(&ExtendedInit::at_point(x0), &l, sigma, dt, horizon, seed, &opts)?;
            if let (Some(p), Some(path)) = (path_csv, &out.path) {
                path.write_csv(File::create(p)?)?;
            }
            print(&json!({ "record": out.record, "trace": out.trace }));
        }
        Command::Campaign { config, seed, sigmas, trajectories, dt, horizon_cap, threads, output } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.master_seed = seed;
            if let Some(s) = sigmas {
                cfg.sigma_grid = s;
            }
            if let Some(n) = trajectories {
                cfg.trajectories_per_sigma = n;
            }
            if dt.is_some() {
                cfg.dt = dt;
            }
            if let Some(h) = horizon_cap {
                cfg.horizon_cap = h;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            if output.is_some() {
                cfg.output = output;
            }
            let r = run_exit_campaign(&cfg)?;
            let mut summary = serde_json::to_value(&r.summary)?;
            if let Some(stats) = summary.get_mut("stats").and_then(|s| s.as_array_mut()) {
                for s in stats {
                    s.as_object_mut().map(|o| o.remove("exit_points"));
                }
            }
            print(&summary);
        }
        Command::Barrier { problem, x0, n_boundary, dt, path_csv } => {
            let (l, g) = problem.load()?;
            let a = problem.attractor(&l, &x0)?;
            let b = compute_h(&l, &g, &a, n_boundary, 0)?;
            let m = minimize_action(&l, &a, &b.z_star, &MinimizeOptions { dt, ..Default::default() })?;
            if let Some(p) = path_csv {
                m.path.write_csv(File::create(p)?)?;
            }
            print(&json!({ "attractor": a, "H": b.h, "z_star": b.z_star, "min_action": m }));
        }
        Command::Check { problem, x0, resolution, seed } => {
            let (l, g) = problem.load()?;
            let a = problem.attractor(&l, &x0)?;
            let b = compute_h(&l, &g, &a, 256, seed)?;
            let sub = if l.dim() <= 3 { Some(check_sublevel(&l, &a, b.h, &g, resolution, None)?) } else { None };
            let grad = level_set_min_gradient(&l, &a, b.h, &g, 256, seed).ok();
            let flow = check_flow_stability(&l, &a, &g, 64, 50.0, 1e-3, seed)?;
            let rho = 0.1 * g.inradius_about(&a);
            let strong = check_strong_attraction(&l, &a, rho, rho, 2000, seed)?;
            print(&json!({
                "landscape": l.name,
                "attractor": a,
                "H": b.h,
                "z_star": b.z_star,
                "flags": l.flags,
                "coverage": l.coverage,
                "sublevel": sub,
                "level_set_min_gradient": grad,
                "flow_stability": flow,
                "strong_attraction": strong,
            }));
        }
        Command::Bvp { landscape, lo, hi, sigma, grid_n, x0, csv } => {
            let l = Landscape::preset(&landscape, 1)?;
            let sol = bvp_mean_exit_1d(&l, lo, hi, sigma, grid_n)?;
            if let Some(p) = csv {
                let mut w = csv::Writer::from_path(p).map_err(Error::from)?;
                w.write_record(["x", "u"]).map_err(Error::from)?;
                for (x, u) in sol.x.iter().zip(&sol.u) {
                    w.write_record([x.to_string(), u.to_string()]).map_err(Error::from)?;
                }
                w.flush()?;
            }
            let x0 = x0.unwrap_or(0.5 * (lo + hi));
            print(&json!({ "x0": x0, "mean_exit_time": sol.at(x0), "max": sol.u.iter().cloned().fold(0.0, f64::max) }));
        }
        Command::Psi { problem, x0, rho, eta_frac, eps, t_a, dt, path_csv } => {
            let (l, g) = problem.load()?;
            let a = problem.attractor(&l, &x0)?;
            let h = compute_h(&l, &g, &a, 256, 0)?.h;
            let params = PsiParams { eps, t_a, dt, ..PsiParams::new(rho, eta_frac * h) };
            let init = InitSpec::at(x0).build()?;
            let r = build_psi(&init, &l, &g, &a, &params)?;
            if let Some(p) = path_csv {
                r.path.write_csv(File::create(p)?)?;
            }
            print(&json!(r));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
