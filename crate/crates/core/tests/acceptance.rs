//! Acceptance criteria 1 to 10. Each test prints one `PASS` or `FAIL` line
//! before asserting. Campaigns shared between criteria run once.

use std::sync::OnceLock;

use sidlab::action::{
    action_effective, action_full, action_gradient, build_psi, compute_h, minimize_action, occupation_w2_trace_max,
    MinimizeOptions, PsiParams,
};
use sidlab::dynamics::{integrate_deterministic, simulate_sid, Path, SimOptions};
use sidlab::geometry::DomainSpec;
use sidlab::harness::{
    bvp_mean_exit_1d, estimate_kramers_slope, exit_location_mass, kramers_window_fraction, run_exit_campaign,
    CampaignResult, ExperimentConfig, SlopeStatistic,
};
use sidlab::landscape::Landscape;
use sidlab::measures::{make_init, ExtendedInit, OccupationMeasure};

const SLOPE_GRID: [f64; 5] = [0.7, 0.6, 0.5, 0.45, 0.4];

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn interval_campaign(landscape: &str, sigmas: &[f64], n: usize, dt: f64, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(landscape, 1, DomainSpec::interval(-1.0, 1.0), vec![0.0], sigmas.to_vec(), n, seed);
    c.dt = Some(dt);
    c.attractor = Some(vec![0.0]);
    c.track_gamma = false;
    c
}

fn ou_slope_campaign() -> &'static CampaignResult {
    static C: OnceLock<CampaignResult> = OnceLock::new();
    C.get_or_init(|| run_exit_campaign(&interval_campaign("ou", &SLOPE_GRID, 500, 1e-3, 2)).unwrap())
}

/// dt follows the stiffness guidance `0.01 / (Lip_∇V + Lip_∇F)` = 0.005.
fn qa_slope_campaign() -> &'static CampaignResult {
    static C: OnceLock<CampaignResult> = OnceLock::new();
    C.get_or_init(|| run_exit_campaign(&interval_campaign("quad-attract(1)", &SLOPE_GRID, 500, 5e-3, 3)).unwrap())
}

#[test]
fn criterion_01_bvp_oracle() {
    let r = run_exit_campaign(&interval_campaign("ou", &[1.0, 0.7, 0.5], 2000, 1e-3, 1)).unwrap();
    let ou = Landscape::preset("ou", 1).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &r.stats {
        let oracle = bvp_mean_exit_1d(&ou, -1.0, 1.0, s.sigma, 4096).unwrap().at(0.0);
        let rel = (s.mean_exit_time - oracle).abs() / oracle;
        pass &= rel <= 0.10 && s.censored == 0 && s.count == 2000;
        parts.push(format!("σ={} mc={:.4} bvp={:.4} rel={:.3}", s.sigma, s.mean_exit_time, oracle, rel));
    }
    verdict(1, "Monte Carlo mean exit time within 10% of the BVP oracle", pass, parts.join("; "));
}

#[test]
fn criterion_02_kramers_slope_without_interaction() {
    let r = ou_slope_campaign();
    let fit = estimate_kramers_slope(&r.stats, SlopeStatistic::Mean).unwrap();
    let pass = (fit.slope - 1.0).abs() <= 0.2 && r.stats.iter().all(|s| s.count >= 500 && s.censored == 0);
    verdict(2, "slope within 20% of 2H = 1", pass, format!("slope={:.4} stderr={:.4}", fit.slope, fit.stderr));
}

#[test]
fn criterion_03_interaction_raises_the_barrier() {
    let g = DomainSpec::interval(-1.0, 1.0);
    let h_ou = compute_h(&Landscape::preset("ou", 1).unwrap(), &g, &[0.0], 256, 0).unwrap().h;
    let h_qa = compute_h(&Landscape::preset("quad-attract(1)", 1).unwrap(), &g, &[0.0], 256, 0).unwrap().h;
    let s_ou = estimate_kramers_slope(&ou_slope_campaign().stats, SlopeStatistic::Mean).unwrap().slope;
    let qa = qa_slope_campaign();
    let s_qa = estimate_kramers_slope(&qa.stats, SlopeStatistic::Mean).unwrap().slope;
    let ratio = s_qa / s_ou;
    let pass = (h_qa - 1.0).abs() <= 1e-10
        && (h_ou - 0.5).abs() <= 1e-10
        && (1.5..=2.5).contains(&ratio)
        && qa.stats.iter().all(|s| s.censored == 0);
    verdict(
        3,
        "H = 1 vs 0.5 and slope ratio in [1.5, 2.5]",
        pass,
        format!("H_qa={h_qa} H_ou={h_ou} slope_qa={s_qa:.4} slope_ou={s_ou:.4} ratio={ratio:.3}"),
    );
}

#[test]
fn criterion_04_kramers_window() {
    let g = DomainSpec::interval(-1.0, 1.0);
    let h = compute_h(&Landscape::preset("quad-attract(1)", 1).unwrap(), &g, &[0.0], 256, 0).unwrap().h;
    let recs: Vec<_> = qa_slope_campaign().records.iter().filter(|r| r.sigma == 0.4).cloned().collect();
    let frac = kramers_window_fraction(&recs, h, 0.3 * h).unwrap();
    let pass = recs.len() >= 500 && frac >= 0.8;
    verdict(4, "window fraction at σ = 0.4, δ = 0.3H is at least 0.8", pass, format!("H={h} n={} fraction={frac:.4}", recs.len()));
}

#[test]
fn criterion_05_quasipotential_identity() {
    let opts = MinimizeOptions::default();
    let cases = [("ou", 0.0, 1.0, 0.5), ("quad-attract(1)", 0.0, 1.0, 1.0), ("dw", -1.0, 0.0, 0.25)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, a, z, want) in cases {
        let l = Landscape::preset(name, 1).unwrap();
        let v = minimize_action(&l, &[a], &[z], &opts).unwrap().value;
        let rel = (v - want).abs() / want;
        pass &= rel <= 0.02;
        parts.push(format!("{name}: {v:.5} vs {want} (rel {rel:.4})"));
    }

    // gradient against central differences on a wiggly path in d = 2
    let l = Landscape::preset("dw+gauss-repel(0.5)", 2).unwrap();
    let a = [-1.0, 0.0];
    let n = 40;
    let pts: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            vec![-1.0 + 1.2 * s, 0.3 * (3.0 * s).sin() * s]
        })
        .collect();
    let path = Path::from_points(0.05, &pts).unwrap();
    let grad = action_gradient(&path, &l, &a).unwrap();
    let h = 1e-6;
    let mut fd = Vec::with_capacity(grad.len());
    for node in 1..n {
        for k in 0..2 {
            let mut p = pts.clone();
            p[node][k] += h;
            let up = action_effective(&Path::from_points(0.05, &p).unwrap(), &l, &a).unwrap();
            p[node][k] -= 2.0 * h;
            let down = action_effective(&Path::from_points(0.05, &p).unwrap(), &l, &a).unwrap();
            fd.push((up - down) / (2.0 * h));
        }
    }
    let num: f64 = grad.iter().zip(&fd).map(|(g, f)| (g - f).powi(2)).sum::<f64>().sqrt();
    let den: f64 = fd.iter().map(|f| f * f).sum::<f64>().sqrt();
    let grad_rel = num / den;
    pass &= grad.len() == fd.len() && grad_rel <= 1e-5;
    parts.push(format!("gradient rel err {grad_rel:.2e}"));
    verdict(5, "minimum action within 2% of W_a(z) − W_a(a)", pass, parts.join("; "));
}

#[test]
fn criterion_06_zero_action_on_the_flow() {
    let dt = 1e-3;
    let cases: [(&str, usize, Vec<f64>); 9] = [
        ("ou", 1, vec![0.8]),
        ("free", 1, vec![0.3]),
        ("dw", 1, vec![-0.4]),
        ("quad-attract(1)", 1, vec![0.9]),
        ("gauss-attract(1)", 1, vec![-0.7]),
        ("gauss-repel(1)", 1, vec![0.5]),
        ("dw+gauss-repel(0.5)", 2, vec![0.6, -0.3]),
        ("ou+quad-attract(2)", 2, vec![0.5, 0.5]),
        ("gauss-attract(1)", 3, vec![0.2, -0.4, 0.6]),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, dim, x0) in cases {
        let l = Landscape::preset(name, dim).unwrap();
        let init = ExtendedInit::at_point(x0);
        let p = integrate_deterministic(&init, &l, dt, 5.0).unwrap();
        let s = action_full(&p, &init, &l).unwrap();
        worst = worst.max(s);
        parts.push(format!("{name}(d={dim}) {s:.2e}"));
    }
    verdict(6, "action of the deterministic flow below 10·dt", worst < 10.0 * dt, parts.join("; "));
}

#[test]
fn criterion_07_psi_construction() {
    let l = Landscape::preset("ou", 2).unwrap();
    let g = DomainSpec::ball(vec![0.0, 0.0], 1.0);
    let a = [0.0, 0.0];
    let h = compute_h(&l, &g, &a, 256, 0).unwrap().h;
    let params = PsiParams::new(0.05, 0.1 * h);
    // start inside B_ρ(a) with a prior inside the W₂ ball of radius ρ
    let init = make_init(1.0, vec![(vec![0.04, 0.0], 1.0)], vec![0.03, 0.02]).unwrap();
    let psi = build_psi(&init, &l, &g, &a, &params).unwrap();
    let action = action_full(&psi.path, &init, &l).unwrap();
    let w2 = occupation_w2_trace_max(&psi.path, &init, &a);
    let bound = (1.0 + params.eps) * params.rho;
    let exits = g.level(psi.path.last()) > 0.0;
    let pass = action <= h + params.eta && w2 <= bound && exits;
    verdict(
        7,
        "action(ψ) ≤ H + η and the occupation trace stays within (1+ε)ρ",
        pass,
        format!("H={h:.4} η={:.4} action={action:.5} max W₂={w2:.5} bound={bound:.4} T_a={}", params.eta, psi.t_a),
    );
}

#[test]
fn criterion_08_occupation_stabilization() {
    let mut c = interval_campaign("quad-attract(1)", &[0.3], 500, 5e-3, 8);
    c.track_gamma = true;
    c.rho = Some(0.2);
    c.eps = 0.5;
    c.horizon_cap = 1000.0;
    let r = run_exit_campaign(&c).unwrap();
    let s = &r.stats[0];
    let pass = s.count == 500 && s.gamma_before_exit_fraction <= 0.05;
    verdict(
        8,
        "γ-before-exit fraction at most 5%",
        pass,
        format!(
            "ρ={} ε={} T_st={} horizon={} fraction={:.4} censored={}",
            r.summary.rho, c.eps, r.summary.t_st, c.horizon_cap, s.gamma_before_exit_fraction, s.censored
        ),
    );
}

#[test]
fn criterion_09_exit_location() {
    let mut c = ExperimentConfig::new("dw", 1, DomainSpec::interval(-2.0, -0.05), vec![-1.0], vec![0.35], 500, 9);
    c.attractor = Some(vec![-1.0]);
    c.track_gamma = false;
    let r = run_exit_campaign(&c).unwrap();
    let low = exit_location_mass(&r.records, |z| (z[0] + 0.05).abs() <= 0.1).unwrap();
    let high = exit_location_mass(&r.records, |z| (z[0] + 2.0).abs() <= 0.1).unwrap();
    let censored = r.stats[0].censored;
    let pass = low >= 0.9 && high <= 0.05 && censored == 0;
    verdict(
        9,
        "exits concentrate at the low-barrier end",
        pass,
        format!("dt={} low-end mass={low:.4} high-end mass={high:.4} censored={censored}", r.summary.dt),
    );
}

#[test]
fn criterion_10_infrastructure_invariants() {
    // reruns under different worker counts
    let mut c = interval_campaign("quad-attract(1)", &[0.8, 0.6], 64, 5e-3, 10);
    c.track_gamma = true;
    c.threads = Some(1);
    let one = run_exit_campaign(&c).unwrap();
    c.threads = Some(4);
    let four = run_exit_campaign(&c).unwrap();
    let identical = one.records == four.records && one.stats == four.stats;

    // second-moment identity
    let atoms = vec![(vec![0.3, -1.2], 0.2), (vec![1.7, 0.4], 0.5), (vec![-0.6, 2.2], 0.3)];
    let m = OccupationMeasure::new(&make_init(f64::INFINITY, atoms.clone(), vec![0.0, 0.0]).unwrap(), 64);
    let a = [0.25, -0.5];
    let direct: f64 = atoms.iter().map(|(p, w)| w * ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2))).sum();
    let moment_err = (m.w2_to_dirac(&a).powi(2) - direct).abs();

    // capped vs uncapped measure along a 10⁵-step trajectory
    let l = Landscape::preset("ou+gauss-attract(1)", 2).unwrap();
    let opts = SimOptions { decimation: Some(1), ..Default::default() };
    let out = simulate_sid(&ExtendedInit::at_point(vec![0.5, 0.0]), &l, 0.7, 1e-3, 100.0, 11, &opts).unwrap();
    let path = out.path.unwrap();
    let init = ExtendedInit::at_point(vec![0.5, 0.0]);
    let mut full = OccupationMeasure::uncapped(&init);
    let mut capped = OccupationMeasure::new(&init, 4096);
    for i in 0..path.len() - 1 {
        full.push_sample(path.point(i), path.dt);
        capped.push_sample(path.point(i), path.dt);
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(12);
    let mut worst_pointwise: f64 = 0.0;
    let (mut err_max, mut scale): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let x = [rand::Rng::random_range(&mut rng, -1.5..1.5), rand::Rng::random_range(&mut rng, -1.5..1.5)];
        let df = full.interaction_drift(&l, &x);
        let dc = capped.interaction_drift(&l, &x);
        let e = ((df[0] - dc[0]).powi(2) + (df[1] - dc[1]).powi(2)).sqrt();
        let n = (df[0] * df[0] + df[1] * df[1]).sqrt();
        worst_pointwise = worst_pointwise.max(e / n);
        err_max = err_max.max(e);
        scale = scale.max(n);
    }
    let drift_rel = err_max / scale;
    let pass = identical && moment_err <= 1e-12 && worst_pointwise < 1e-3 && full.path_len() == 100_000;
    verdict(
        10,
        "worker-count invariance, W₂ identity, capped drift accuracy",
        pass,
        format!(
            "identical={identical} moment err={moment_err:.1e} atoms={} max pointwise drift rel err={worst_pointwise:.2e} (vs sup norm {drift_rel:.2e})",
            capped.path_len()
        ),
    );
}
