//! Euler–Maruyama for the SID, its noiseless counterpart and the effective
//! flow `φ̇ = −∇W_a(φ)`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::DomainSpec;
use crate::harness::excursions::{ExcursionTrace, ExcursionTracer};
use crate::landscape::Landscape;
use crate::measures::{ExtendedInit, OccupationMeasure, DEFAULT_CAP};
use crate::rng::trajectory_rng;
use crate::{dist, Error, Result};

/// Uniformly sampled path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub dim: usize,
    pub dt: f64,
    /// row-major, `len() × dim`
    pub points: Vec<f64>,
    pub start_time_offset: f64,
}

impl Path {
    pub fn new(dim: usize, dt: f64) -> Self {
        Self { dim, dt, points: Vec::new(), start_time_offset: 0.0 }
    }

    pub fn from_points(dt: f64, pts: &[Vec<f64>]) -> Result<Self> {
        let dim = pts.first().map_or(0, |p| p.len());
        if dim == 0 {
            return Err(Error::InvalidArgument("path needs at least one nonempty point".into()));
        }
        let mut p = Self::new(dim, dt);
        for x in pts {
            if x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
            }
            p.push(x);
        }
        Ok(p)
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.points.extend_from_slice(x);
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time_offset + i as f64 * self.dt
    }

    /// Total time spanned by the nodes.
    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    /// Nodes `from..=to` as a new path with its time offset carried over.
    pub fn slice(&self, from: usize, to: usize) -> Path {
        Path {
            dim: self.dim,
            dt: self.dt,
            points: self.points[from * self.dim..(to + 1) * self.dim].to_vec(),
            start_time_offset: self.time(from),
        }
    }

    /// Appends `other`, dropping its first node (it must equal our last one).
    pub fn glue(&mut self, other: &Path) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if (other.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::PathMismatch("glued paths need the same dt".into()));
        }
        if self.is_empty() {
            self.points.extend_from_slice(&other.points);
            return Ok(());
        }
        if dist(self.last(), other.point(0)) > 1e-9 {
            return Err(Error::PathMismatch("glued paths must share the junction node".into()));
        }
        self.points.extend_from_slice(&other.points[self.dim..]);
        Ok(())
    }

    /// CSV with header `t,x1,..,xd`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.time(i).to_string()];
            row.extend(self.point(i).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Outcome of one simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub sigma: f64,
    pub seed: u64,
    /// exit time, or the horizon when censored
    pub exit_time: f64,
    pub censored: bool,
    pub exit_point: Option<Vec<f64>>,
    pub gamma_before_exit: bool,
    pub steps: u64,
}

/// Stabilization watch: tracks `γ` and the excursion times around `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Watch {
    pub a: Vec<f64>,
    pub rho: f64,
    pub eps: f64,
    pub t_st: f64,
    /// steps between `W₂(μ_t, δ_a)` evaluations
    pub snapshot_every: usize,
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub domain: Option<DomainSpec>,
    /// keep every k-th state in the returned path
    pub decimation: Option<usize>,
    pub watch: Option<Watch>,
    pub measure_cap: usize,
    /// keep the sampled `(t, W₂)` pairs in the trace
    pub keep_w2_trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { domain: None, decimation: None, watch: None, measure_cap: DEFAULT_CAP, keep_w2_trace: false }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub record: ExitRecord,
    pub path: Option<Path>,
    pub measure: OccupationMeasure,
    pub trace: Option<ExcursionTrace>,
}

/// One Euler–Maruyama step: `x − (∇V(x) + ∇F*μ(x)) dt + σ √dt ξ`.
pub fn step_sid(
    x: &[f64],
    mu: &OccupationMeasure,
    landscape: &Landscape,
    sigma: f64,
    dt: f64,
    xi: &[f64],
) -> Vec<f64> {
    let mut drift = vec![0.0; x.len()];
    landscape.grad_v_into(x, &mut drift);
    mu.add_interaction_drift(landscape, x, 1.0, &mut drift);
    let s = sigma * dt.sqrt();
    x.iter().zip(&drift).zip(xi).map(|((xi0, b), n)| xi0 - b * dt + s * n).collect()
}

/// Simulates the SID from `init` until it leaves the domain or reaches the horizon.
///
/// The state held during each step is pushed into the occupation measure
/// after the drift is evaluated, so the measure seen at step `n` holds the
/// states `0..n`. Exits are located on the last step segment by
/// [`DomainSpec::detect_crossing`] and the exit time is interpolated.
pub fn simulate_sid(
    init: &ExtendedInit,
    landscape: &Landscape,
    sigma: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimOutput> {
    let d = landscape.dim();
    if init.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: init.dim() });
    }
    if !(dt > 0.0) || !(horizon > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument("dt and horizon must be positive, sigma nonnegative".into()));
    }
    if let Some(g) = &opts.domain {
        if g.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
        }
        if !g.contains(init.x0()) {
            return Err(Error::OutsideDomain);
        }
    }
    let mut rng = trajectory_rng(seed);
    let mut mu = OccupationMeasure::new(init, opts.measure_cap);
    let n_steps = (horizon / dt).ceil() as u64;
    let noise = sigma * dt.sqrt();

    let mut x = init.x0().to_vec();
    let mut next = vec![0.0; d];
    let mut drift = vec![0.0; d];
    let mut path = opts.decimation.map(|_| {
        let mut p = Path::new(d, dt * opts.decimation.unwrap_or(1) as f64);
        p.push(&x);
        p
    });
    let mut tracer = opts
        .watch
        .as_ref()
        .map(|w| ExcursionTracer::new(w.a.clone(), w.rho, w.eps, w.t_st, opts.keep_w2_trace));
    if let Some(tr) = tracer.as_mut() {
        tr.observe_point(0.0, &x, false);
    }

    let mut record = ExitRecord {
        sigma,
        seed,
        exit_time: n_steps as f64 * dt,
        censored: true,
        exit_point: None,
        gamma_before_exit: false,
        steps: n_steps,
    };

    for step in 0..n_steps {
        landscape.grad_v_into(&x, &mut drift);
        mu.add_interaction_drift(landscape, &x, 1.0, &mut drift);
        for k in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            next[k] = x[k] - drift[k] * dt + noise * xi;
        }
        let t_prev = step as f64 * dt;
        let t = (step + 1) as f64 * dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step as usize + 1, time: t });
        }
        mu.push_sample(&x, dt);

        if let Some(g) = &opts.domain {
            if !g.contains(&next) {
                let c = g.crossing_unchecked(&x, &next);
                record.exit_time = t_prev + c.lambda * dt;
                record.censored = false;
                record.exit_point = Some(c.point.clone());
                record.steps = step + 1;
                if let Some(tr) = tracer.as_mut() {
                    tr.observe_point(record.exit_time, &c.point, true);
                }
                if let Some(p) = path.as_mut() {
                    p.push(&c.point);
                }
                break;
            }
        }
        if let Some(tr) = tracer.as_mut() {
            tr.observe_point(t, &next, false);
            let w = opts.watch.as_ref().unwrap();
            if (step + 1) % w.snapshot_every.max(1) as u64 == 0 && tr.wants_w2(t) {
                tr.observe_w2(t, mu.w2_to_dirac(&w.a));
            }
        }
        if let (Some(p), Some(k)) = (path.as_mut(), opts.decimation) {
            if (step + 1) % k.max(1) as u64 == 0 {
                p.push(&next);
            }
        }
        std::mem::swap(&mut x, &mut next);
    }

    let trace = tracer.map(|tr| tr.finish(record.exit_time));
    // the tracer only sees times up to the exit (or the horizon)
    record.gamma_before_exit = trace.as_ref().is_some_and(|tr| tr.gamma.is_some());
    Ok(SimOutput { record, path, measure: mu, trace })
}

/// Euler integration of `ẋ = −∇V(x) − ∇F*μ_t(x)` with the full, uncapped
/// occupation measure of the path itself.
pub fn integrate_deterministic(init: &ExtendedInit, landscape: &Landscape, dt: f64, t_end: f64) -> Result<Path> {
    let (path, _) = integrate_deterministic_with_measure(init, landscape, dt, t_end)?;
    Ok(path)
}

pub(crate) fn integrate_deterministic_with_measure(
    init: &ExtendedInit,
    landscape: &Landscape,
    dt: f64,
    t_end: f64,
) -> Result<(Path, OccupationMeasure)> {
    let d = landscape.dim();
    if init.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: init.dim() });
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("dt must be positive and T nonnegative".into()));
    }
    let n = (t_end / dt).round() as usize;
    let mut mu = OccupationMeasure::uncapped(init);
    let mut path = Path::new(d, dt);
    let mut x = init.x0().to_vec();
    let mut drift = vec![0.0; d];
    path.push(&x);
    for step in 0..n {
        landscape.grad_v_into(&x, &mut drift);
        mu.add_interaction_drift(landscape, &x, 1.0, &mut drift);
        mu.push_sample(&x, dt);
        for k in 0..d {
            x[k] -= drift[k] * dt;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1, time: (step + 1) as f64 * dt });
        }
        path.push(&x);
    }
    Ok((path, mu))
}

/// Euler integration of `φ̇ = −∇V(φ) − ∇F(φ − a)`.
pub fn integrate_effective_flow(x0: &[f64], a: &[f64], landscape: &Landscape, dt: f64, t_end: f64) -> Result<Path> {
    let d = landscape.dim();
    if x0.len() != d || a.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len().min(a.len()) });
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("dt must be positive and T nonnegative".into()));
    }
    let n = (t_end / dt).round() as usize;
    let mut path = Path::new(d, dt);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    path.push(&x);
    for step in 0..n {
        landscape.effective_gradient_into(a, &x, &mut g);
        for k in 0..d {
            x[k] -= g[k] * dt;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1, time: (step + 1) as f64 * dt });
        }
        path.push(&x);
    }
    Ok(path)
}

/// Locates the attractor reached from `x0`.
///
/// The self-interacting system is integrated until the step speed drops
/// below `tol` (or `T_max`). Since its convergence can be slow, the candidate
/// is then polished by gradient flow on `V`, and `|∇V(a) + ∇F(0)| < tol` is
/// verified.
pub fn find_attractor(x0: &[f64], landscape: &Landscape, dt: f64, tol: f64, t_max: f64) -> Result<Vec<f64>> {
    let d = landscape.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if !(tol > 0.0) || !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidArgument("tol, dt and T_max must be positive".into()));
    }
    let init = ExtendedInit::at_point(x0.to_vec());
    let mut mu = OccupationMeasure::new(&init, DEFAULT_CAP);
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let n = (t_max / dt).ceil() as usize;
    for step in 0..n {
        landscape.grad_v_into(&x, &mut drift);
        mu.add_interaction_drift(landscape, &x, 1.0, &mut drift);
        mu.push_sample(&x, dt);
        let speed = crate::norm(&drift);
        for k in 0..d {
            x[k] -= drift[k] * dt;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1, time: (step + 1) as f64 * dt });
        }
        if speed < tol {
            break;
        }
    }
    // polish by gradient flow on V from the candidate
    let mut g = vec![0.0; d];
    let h = dt.min(0.1);
    for _ in 0..(t_max / h).ceil() as usize {
        landscape.grad_v_into(&x, &mut g);
        if crate::norm(&g) < 1e-3 * tol {
            break;
        }
        for k in 0..d {
            x[k] -= g[k] * h;
        }
    }
    landscape.grad_v_into(&x, &mut g);
    landscape.add_grad_f(&vec![0.0; d], 1.0, &mut g);
    let residual = crate::norm(&g);
    if residual < tol {
        Ok(x)
    } else {
        log::debug!("attractor residual {residual:e}");
        Err(Error::NoConvergence(t_max))
    }
}
