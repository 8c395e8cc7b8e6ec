//! Discretized rate functionals, minimum action paths, the barrier height `H`
//! and the glued exit path `ψ`.
//!
//! Both functionals use left-Riemann sums with forward differences,
//!
//! ```text
//! S = ¼ Σ_k |(f_{k+1} − f_k)/dt + b_k(f_k)|² dt,
//! ```
//!
//! which is the exact dual of the Euler scheme in [`crate::dynamics`]: a
//! noiseless simulation scores zero up to rounding.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::Path;
use crate::geometry::DomainSpec;
use crate::landscape::Landscape;
use crate::measures::{ExtendedInit, OccupationMeasure};
use crate::{dist, dot, norm, Error, Result};

fn check_path(path: &Path, d: usize) -> Result<()> {
    if path.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: path.dim });
    }
    if path.len() < 2 || !(path.dt > 0.0) {
        return Err(Error::InvalidArgument("path needs at least two nodes and dt > 0".into()));
    }
    Ok(())
}

/// Self-interacting action of `path` from the extended initial condition
/// `init`; the interaction uses the path's own occupation measure.
pub fn action_full(path: &Path, init: &ExtendedInit, landscape: &Landscape) -> Result<f64> {
    action_full_with_measure(path, init, landscape).map(|(s, _)| s)
}

/// [`action_full`] and the occupation measure after the last interval.
pub fn action_full_with_measure(
    path: &Path,
    init: &ExtendedInit,
    landscape: &Landscape,
) -> Result<(f64, OccupationMeasure)> {
    let d = landscape.dim();
    check_path(path, d)?;
    if init.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: init.dim() });
    }
    if dist(path.point(0), init.x0()) > 1e-9 {
        return Err(Error::PathMismatch("path does not start at x0".into()));
    }
    let dt = path.dt;
    let mut mu = OccupationMeasure::uncapped(init);
    let mut r = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..path.len() - 1 {
        let (f, g) = (path.point(k), path.point(k + 1));
        landscape.grad_v_into(f, &mut r);
        mu.add_interaction_drift(landscape, f, 1.0, &mut r);
        for i in 0..d {
            r[i] += (g[i] - f[i]) / dt;
        }
        total += dot(&r, &r);
        mu.push_sample(f, dt);
    }
    Ok((0.25 * total * dt, mu))
}

/// Residual `(f_{k+1} − f_k)/dt + ∇W_a(f_k)` of interval `k`.
fn effective_residual(path: &Path, landscape: &Landscape, a: &[f64], k: usize, r: &mut [f64]) {
    let (f, g) = (path.point(k), path.point(k + 1));
    landscape.effective_gradient_into(a, f, r);
    for i in 0..r.len() {
        r[i] += (g[i] - f[i]) / path.dt;
    }
}

/// Action with the measure frozen at `δ_a`: `¼ ∫ |ḟ + ∇W_a(f)|²`.
pub fn action_effective(path: &Path, landscape: &Landscape, a: &[f64]) -> Result<f64> {
    let d = landscape.dim();
    check_path(path, d)?;
    if a.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.len() });
    }
    let mut r = vec![0.0; d];
    let mut total = 0.0;
    for k in 0..path.len() - 1 {
        effective_residual(path, landscape, a, k, &mut r);
        total += dot(&r, &r);
    }
    Ok(0.25 * total * path.dt)
}

/// Exact gradient of [`action_effective`] with respect to the interior nodes
/// `1..len−1`, flattened row-major.
///
/// `∂S/∂f_k = ½ (r_{k−1} − r_k) + (dt/2) ∇²W_a(f_k) r_k`.
pub fn action_gradient(path: &Path, landscape: &Landscape, a: &[f64]) -> Result<Vec<f64>> {
    let d = landscape.dim();
    check_path(path, d)?;
    if path.len() < 3 {
        return Err(Error::InvalidArgument("gradient needs at least one interior node".into()));
    }
    let mut grad = vec![0.0; (path.len() - 2) * d];
    action_value_and_gradient(path, landscape, a, &mut grad);
    Ok(grad)
}

fn action_value_and_gradient(path: &Path, landscape: &Landscape, a: &[f64], grad: &mut [f64]) -> f64 {
    let d = path.dim;
    let n = path.len() - 1;
    let dt = path.dt;
    let mut residuals = vec![0.0; n * d];
    let mut total = 0.0;
    for k in 0..n {
        let r = &mut residuals[k * d..(k + 1) * d];
        effective_residual(path, landscape, a, k, r);
        total += dot(r, r);
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut u = vec![0.0; d];
    for k in 1..n {
        let out = &mut grad[(k - 1) * d..k * d];
        let (rp, rk) = (&residuals[(k - 1) * d..k * d], &residuals[k * d..(k + 1) * d]);
        for i in 0..d {
            out[i] = 0.5 * (rp[i] - rk[i]);
        }
        let f = path.point(k);
        landscape.add_hess_v_vec(f, rk, 0.5 * dt, out);
        if landscape.has_interaction() {
            for i in 0..d {
                u[i] = f[i] - a[i];
            }
            landscape.add_hess_f_vec(&u, rk, 0.5 * dt, out);
        }
    }
    0.25 * total * dt
}

/// Options for [`minimize_action`].
#[derive(Debug, Clone, Serialize)]
pub struct MinimizeOptions {
    /// horizons tried; the best value over the grid is reported
    pub t_grid: Vec<f64>,
    /// time step; each horizon uses `max(8, round(T/dt))` intervals
    pub dt: f64,
    /// iteration budget per horizon
    pub budget: usize,
    /// gradient-norm tolerance
    pub tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { t_grid: vec![1.0, 2.0, 4.0, 8.0, 16.0], dt: 0.01, budget: 5000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonResult {
    pub horizon: f64,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinActionResult {
    #[serde(skip)]
    pub path: Path,
    /// upper bound on the quasipotential `W_a(z) − W_a(a)`
    pub value: f64,
    pub horizon: f64,
    /// every horizon converged below the gradient tolerance
    pub converged: bool,
    pub per_horizon: Vec<HorizonResult>,
}

/// Minimizes [`action_effective`] over paths pinned at `a` and `z`, for each
/// horizon of the grid, from the straight-line initialization.
///
/// Uses L-BFGS preconditioned by the kinetic part of the Hessian with
/// Armijo backtracking. Horizons run in parallel.
pub fn minimize_action(landscape: &Landscape, a: &[f64], z: &[f64], opts: &MinimizeOptions) -> Result<MinActionResult> {
    let d = landscape.dim();
    if a.len() != d || z.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.len().min(z.len()) });
    }
    if dist(a, z) == 0.0 {
        return Err(Error::InvalidArgument("endpoint must differ from the attractor".into()));
    }
    if opts.t_grid.is_empty() || opts.t_grid.iter().any(|t| !(*t > 0.0)) || !(opts.dt > 0.0) {
        return Err(Error::InvalidArgument("horizons and dt must be positive".into()));
    }
    let runs: Vec<(Path, HorizonResult)> = opts
        .t_grid
        .par_iter()
        .map(|&t| {
            let n = ((t / opts.dt).round() as usize).max(8);
            minimize_fixed_horizon(landscape, a, z, t, n, opts.budget, opts.tol)
        })
        .collect();
    let converged = runs.iter().all(|(_, h)| h.converged);
    let per_horizon: Vec<HorizonResult> = runs.iter().map(|(_, h)| h.clone()).collect();
    let (path, best) = runs
        .into_iter()
        .min_by(|x, y| x.1.value.total_cmp(&y.1.value))
        .expect("nonempty horizon grid");
    if !converged {
        log::warn!("minimum action search stopped before the gradient tolerance on some horizons");
    }
    Ok(MinActionResult { path, value: best.value, horizon: best.horizon, converged, per_horizon })
}

/// Straight line from `a` to `z` with `n` intervals over `[0, T]`.
pub fn straight_path(a: &[f64], z: &[f64], t: f64, n: usize) -> Path {
    let mut p = Path::new(a.len(), t / n as f64);
    for k in 0..=n {
        let s = k as f64 / n as f64;
        let x: Vec<f64> = a.iter().zip(z).map(|(ai, zi)| ai + s * (zi - ai)).collect();
        p.push(&x);
    }
    p
}

/// Solves `(K/(2dt) + c I) y = q` per coordinate, `K = tridiag(−1, 2, −1)`.
fn apply_preconditioner(q: &[f64], m: usize, d: usize, dt: f64, c: f64, y: &mut [f64]) {
    let diag = 1.0 / dt + c;
    let off = -0.5 / dt;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for k in 0..d {
        for i in 0..m {
            let denom = diag - if i > 0 { off * cp[i - 1] } else { 0.0 };
            cp[i] = off / denom;
            let prev = if i > 0 { dp[i - 1] } else { 0.0 };
            dp[i] = (q[i * d + k] - off * prev) / denom;
        }
        for i in (0..m).rev() {
            y[i * d + k] = dp[i] - if i + 1 < m { cp[i] * y[(i + 1) * d + k] } else { 0.0 };
        }
    }
}

fn minimize_fixed_horizon(
    landscape: &Landscape,
    a: &[f64],
    z: &[f64],
    t: f64,
    n: usize,
    budget: usize,
    tol: f64,
) -> (Path, HorizonResult) {
    const MEMORY: usize = 10;
    let d = a.len();
    let m = n - 1;
    let mut path = straight_path(a, z, t, n);
    let dt = path.dt;
    let lip = landscape.lipschitz_sum().unwrap_or(1.0).max(1.0);
    let c = 0.5 * dt * lip * lip;

    let nvar = m * d;
    let mut g = vec![0.0; nvar];
    let mut f = action_value_and_gradient(&path, landscape, a, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut dir = vec![0.0; nvar];
    let mut trial = path.clone();
    let mut g_new = vec![0.0; nvar];
    let mut iterations = 0;
    let mut stall = 0;
    while iterations < budget {
        let gn = norm(&g);
        if gn < tol {
            break;
        }
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let alpha = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= alpha * yi);
            alphas.push((alpha, rho));
        }
        apply_preconditioner(&q, m, d, dt, c, &mut dir);
        for ((s, y), (alpha, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(r, si)| *r += (alpha - beta) * si);
        }
        let mut slope = -dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction: restart from the preconditioned gradient
            s_hist.clear();
            y_hist.clear();
            apply_preconditioner(&g, m, d, dt, c, &mut dir);
            slope = -dot(&g, &dir);
        }
        // Armijo backtracking along −dir
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            trial.points.copy_from_slice(&path.points);
            for (i, v) in dir.iter().enumerate() {
                trial.points[d + i] -= step * v;
            }
            let f_new = action_value_and_gradient(&trial, landscape, a, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else { break };
        let s: Vec<f64> = dir.iter().map(|v| -step * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-16 * norm(&s) * norm(&y) {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        std::mem::swap(&mut path, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        stall = if f - f_new <= 1e-15 * f.abs().max(1e-300) { stall + 1 } else { 0 };
        f = f_new;
        if stall >= 20 {
            break;
        }
    }
    let grad_norm = norm(&g);
    let result =
        HorizonResult { horizon: t, value: f, iterations, grad_norm, converged: grad_norm < tol };
    (path, result)
}

/// Barrier height and its argmin on `∂G`.
#[derive(Debug, Clone, Serialize)]
pub struct Barrier {
    pub h: f64,
    pub z_star: Vec<f64>,
}

/// `H = inf_{∂G} W_a`, minimized over boundary samples and refined by
/// projected descent along the boundary.
pub fn compute_h(landscape: &Landscape, domain: &DomainSpec, a: &[f64], n_boundary: usize, seed: u64) -> Result<Barrier> {
    let d = landscape.dim();
    if a.len() != d || domain.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.len() });
    }
    if !domain.contains(a) {
        return Err(Error::OutsideDomain);
    }
    let samples = domain.sample_boundary(n_boundary, seed)?;
    let mut best = samples
        .into_iter()
        .map(|z| (landscape.effective_value(a, &z), z))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .ok_or_else(|| Error::InvalidArgument("empty boundary sample".into()))?;
    if d > 1 {
        best = refine_on_boundary(landscape, domain, a, best);
    }
    Ok(Barrier { h: best.0, z_star: best.1 })
}

fn refine_on_boundary(landscape: &Landscape, domain: &DomainSpec, a: &[f64], start: (f64, Vec<f64>)) -> (f64, Vec<f64>) {
    let (mut w, mut z) = start;
    let mut step = 0.1 * domain.bounding_box().map_or(1.0, |b| b.diagonal());
    for _ in 0..500 {
        let Ok(n) = domain.inner_normal(&z) else { break };
        let g = landscape.effective_gradient(a, &z);
        let gn = dot(&g, &n);
        let tangential: Vec<f64> = g.iter().zip(&n).map(|(gi, ni)| gi - gn * ni).collect();
        let tn = norm(&tangential);
        if tn < 1e-12 {
            break;
        }
        let mut improved = false;
        while step > 1e-14 {
            let cand: Vec<f64> = z.iter().zip(&tangential).map(|(zi, ti)| zi - step * ti / tn).collect();
            if let Some(p) = domain.project_to_boundary(&cand) {
                let wp = landscape.effective_value(a, &p);
                if wp < w {
                    w = wp;
                    z = p;
                    improved = true;
                    step *= 1.5;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (w, z)
}

/// `C(ρ) = Lip_∇F (1 + ε) ρ √H`, the first-order gap between the
/// frozen-measure quasipotential and `H`.
pub fn frozen_gap_bound(rho: f64, eps: f64, lip_f: f64, h: f64) -> f64 {
    lip_f * (1.0 + eps) * rho * h.max(0.0).sqrt()
}

/// Parameters of [`build_psi`].
#[derive(Debug, Clone, Serialize)]
pub struct PsiParams {
    pub rho: f64,
    /// admissible action excess over `H`
    pub eta: f64,
    pub eps: f64,
    /// initial waiting time at `a`, doubled until the measure trace stays in
    /// the `(1+ε)ρ` ball
    pub t_a: f64,
    pub max_doublings: usize,
    pub dt: f64,
    /// length of the final segment beyond `∂G`
    pub exit_length: f64,
    pub n_boundary: usize,
    pub minimize: MinimizeOptions,
}

impl PsiParams {
    pub fn new(rho: f64, eta: f64) -> Self {
        Self {
            rho,
            eta,
            eps: 0.5,
            t_a: 10.0,
            max_doublings: 12,
            dt: 0.01,
            exit_length: 0.1 * rho,
            n_boundary: 256,
            minimize: MinimizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiResult {
    #[serde(skip)]
    pub path: Path,
    pub t_a: f64,
    pub h: f64,
    pub z_star: Vec<f64>,
    /// action of the middle (minimum action) piece
    pub min_action: f64,
    /// self-interacting action of the whole path
    pub action: f64,
    pub within_eta: bool,
    /// `max_t W₂(μ_t, δ_a)` along the path
    pub max_w2: f64,
    pub trace_ok: bool,
    /// first node of each of the four pieces
    pub segment_starts: [usize; 4],
}

/// Maximum over nodes of `W₂(μ_{t_k}, δ_a)` for the occupation measure of `path` from `init`.
pub fn occupation_w2_trace_max(path: &Path, init: &ExtendedInit, a: &[f64]) -> f64 {
    let sq = |z: &[f64]| -> f64 { z.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum() };
    let t0 = init.t0();
    let prior: f64 = init.mu0().iter().map(|(p, w)| w * sq(p)).sum();
    if t0.is_infinite() {
        return prior.sqrt();
    }
    let mut acc = 0.0;
    let mut best = if t0 == 0.0 { sq(init.x0()) } else { prior };
    for k in 1..path.len() {
        acc += path.dt * sq(path.point(k - 1));
        let t = k as f64 * path.dt;
        best = best.max((t0 * prior + acc) / (t0 + t));
    }
    best.sqrt()
}

/// Builds the four-piece exit path: a unit-speed segment `x₀ → a`, a rest at
/// `a` for `T_a`, the minimum action path `a → z*`, and a short segment along
/// the outward normal that ends strictly outside `Ḡ`.
pub fn build_psi(
    init: &ExtendedInit,
    landscape: &Landscape,
    domain: &DomainSpec,
    a: &[f64],
    params: &PsiParams,
) -> Result<PsiResult> {
    let d = landscape.dim();
    let x0 = init.x0();
    if !domain.contains(x0) || !domain.contains(a) {
        return Err(Error::OutsideDomain);
    }
    if !(params.rho > 0.0) || domain.inradius_about(a) <= params.rho {
        return Err(Error::InvalidArgument("need 0 < ρ with B_ρ(a) inside G".into()));
    }
    let dt = params.dt;
    let barrier = compute_h(landscape, domain, a, params.n_boundary, 0)?;
    let mut mopts = params.minimize.clone();
    mopts.dt = dt;
    let mam = minimize_action(landscape, a, &barrier.z_star, &mopts)?;

    // straight segment x0 → a
    let mut head = Path::new(d, dt);
    head.push(x0);
    let len = dist(x0, a);
    let n0 = (len / dt).ceil() as usize;
    for k in 1..=n0 {
        let s = k as f64 / n0 as f64;
        let p: Vec<f64> = x0.iter().zip(a).map(|(xi, ai)| xi + s * (ai - xi)).collect();
        head.push(&p);
    }

    // exit segment along the outward normal
    let outward: Vec<f64> = domain.inner_normal(&barrier.z_star)?.iter().map(|v| -v).collect();
    let speed = norm(&landscape.effective_gradient(a, &barrier.z_star)).max(1.0);
    let n3 = ((params.exit_length / (speed * dt)).ceil() as usize).max(1);
    let mut tail = Path::new(d, dt);
    for k in 0..=n3 {
        let s = k as f64 * params.exit_length / n3 as f64;
        let p: Vec<f64> = barrier.z_star.iter().zip(&outward).map(|(zi, ni)| zi + s * ni).collect();
        tail.push(&p);
    }
    if !(domain.level(tail.last()) > 0.0) {
        return Err(Error::InvalidArgument("exit segment does not leave the closed domain".into()));
    }

    let bound = (1.0 + params.eps) * params.rho;
    let mut t_a = params.t_a.max(dt);
    let mut doublings = 0;
    loop {
        let mut path = head.clone();
        let n_rest = (t_a / dt).round() as usize;
        let mut rest = Path::new(d, dt);
        for _ in 0..=n_rest {
            rest.push(a);
        }
        let s1 = path.len() - 1;
        path.glue(&rest)?;
        let s2 = path.len() - 1;
        path.glue(&mam.path)?;
        let s3 = path.len() - 1;
        path.glue(&tail)?;
        let max_w2 = occupation_w2_trace_max(&path, init, a);
        let trace_ok = max_w2 <= bound;
        if trace_ok || doublings >= params.max_doublings {
            let action = action_full(&path, init, landscape)?;
            return Ok(PsiResult {
                path,
                t_a,
                h: barrier.h,
                z_star: barrier.z_star,
                min_action: mam.value,
                action,
                within_eta: action <= barrier.h + params.eta,
                max_w2,
                trace_ok,
                segment_starts: [0, s1, s2, s3],
            });
        }
        t_a *= 2.0;
        doublings += 1;
    }
}
