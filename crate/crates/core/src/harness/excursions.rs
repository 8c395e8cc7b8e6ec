//! Stopping times around the attractor.
//!
//! After the stabilization time `T_st`, `τ_m` are the hitting times of
//! `B_ρ(a) ∪ ∂G` and `θ_m` those of the sphere `S_{(1+ε)ρ}(a)`, alternating.
//! `γ` is the first time after `T_st` at which `W₂(μ_t, δ_a) > (1+ε)ρ`.

use serde::{Deserialize, Serialize};

use crate::dynamics::Path;
use crate::geometry::DomainSpec;
use crate::{dist, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExcursionTrace {
    pub tau_list: Vec<f64>,
    pub theta_list: Vec<f64>,
    /// `None` when censored
    pub gamma: Option<f64>,
    /// time spent between a `τ` and the following `θ`
    pub t_in_total: f64,
    /// time spent between a `θ` and the following `τ`
    pub t_out_total: f64,
    /// sampled `(t, W₂(μ_t, δ_a))`
    pub w2_trace: Vec<(f64, f64)>,
}

impl ExcursionTrace {
    /// `τ₁ ≤ θ₁ ≤ τ₂ ≤ θ₂ ≤ …`
    pub fn is_interleaved(&self) -> bool {
        let n = self.tau_list.len();
        if !(self.theta_list.len() == n || self.theta_list.len() + 1 == n) {
            return false;
        }
        let mut merged = Vec::with_capacity(2 * n);
        for i in 0..n {
            merged.push(self.tau_list[i]);
            if let Some(th) = self.theta_list.get(i) {
                merged.push(*th);
            }
        }
        merged.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Waiting,
    Inside,
    Outside,
}

/// Online version of [`trace_excursions`], fed one state at a time.
#[derive(Debug, Clone)]
pub struct ExcursionTracer {
    a: Vec<f64>,
    rho: f64,
    outer: f64,
    t_st: f64,
    keep_w2: bool,
    phase: Phase,
    last_switch: f64,
    trace: ExcursionTrace,
}

impl ExcursionTracer {
    pub fn new(a: Vec<f64>, rho: f64, eps: f64, t_st: f64, keep_w2: bool) -> Self {
        Self {
            a,
            rho,
            outer: (1.0 + eps) * rho,
            t_st,
            keep_w2,
            phase: Phase::Waiting,
            last_switch: 0.0,
            trace: ExcursionTrace::default(),
        }
    }

    /// State `x` at time `t`; `on_boundary` marks the exit point.
    pub fn observe_point(&mut self, t: f64, x: &[f64], on_boundary: bool) {
        let r = dist(x, &self.a);
        if self.phase == Phase::Waiting && t >= self.t_st && (r <= self.rho || on_boundary) {
            self.trace.tau_list.push(t);
            self.last_switch = t;
            self.phase = Phase::Inside;
            return;
        }
        if self.phase == Phase::Inside && (r >= self.outer || on_boundary) {
            self.trace.theta_list.push(t);
            self.trace.t_in_total += t - self.last_switch;
            self.last_switch = t;
            self.phase = Phase::Outside;
        }
        if self.phase == Phase::Outside && (r <= self.rho || on_boundary) {
            self.trace.tau_list.push(t);
            self.trace.t_out_total += t - self.last_switch;
            self.last_switch = t;
            self.phase = Phase::Inside;
        }
    }

    /// Whether a `W₂` sample at time `t` can still change the trace.
    pub fn wants_w2(&self, t: f64) -> bool {
        self.keep_w2 || (t >= self.t_st && self.trace.gamma.is_none())
    }

    pub fn observe_w2(&mut self, t: f64, w2: f64) {
        if self.keep_w2 {
            self.trace.w2_trace.push((t, w2));
        }
        if self.trace.gamma.is_none() && t >= self.t_st && w2 > self.outer {
            self.trace.gamma = Some(t);
        }
    }

    /// Closes the running interval at `t_end`.
    pub fn finish(mut self, t_end: f64) -> ExcursionTrace {
        let open = (t_end - self.last_switch).max(0.0);
        match self.phase {
            Phase::Inside => self.trace.t_in_total += open,
            Phase::Outside => self.trace.t_out_total += open,
            Phase::Waiting => {}
        }
        self.trace
    }
}

/// Excursion times of a stored path together with `(t, W₂(μ_t, δ_a))`
/// snapshots. Points outside `domain` count as boundary hits.
pub fn trace_excursions(
    path: &Path,
    snapshots: &[(f64, f64)],
    a: &[f64],
    rho: f64,
    eps: f64,
    t_st: f64,
    domain: Option<&DomainSpec>,
) -> Result<ExcursionTrace> {
    if !(rho > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("ρ and ε must be positive".into()));
    }
    if path.is_empty() {
        return Err(Error::InvalidArgument("empty path".into()));
    }
    if a.len() != path.dim {
        return Err(Error::DimensionMismatch { expected: path.dim, got: a.len() });
    }
    let t_end = path.time(path.len() - 1);
    let t_start = path.time(0);
    if snapshots.windows(2).any(|w| !(w[0].0 < w[1].0))
        || snapshots.iter().any(|s| s.0 < t_start - 1e-12 || s.0 > t_end + 1e-12)
    {
        return Err(Error::InvalidArgument("snapshot times must increase within the path span".into()));
    }
    let mut tracer = ExcursionTracer::new(a.to_vec(), rho, eps, t_st, true);
    let mut snaps = snapshots.iter().peekable();
    for i in 0..path.len() {
        let t = path.time(i);
        while let Some(s) = snaps.next_if(|s| s.0 <= t) {
            tracer.observe_w2(s.0, s.1);
        }
        let x = path.point(i);
        let on_boundary = domain.is_some_and(|g| !g.contains(x));
        tracer.observe_point(t, x, on_boundary);
        if on_boundary {
            break;
        }
    }
    for s in snaps {
        tracer.observe_w2(s.0, s.1);
    }
    Ok(tracer.finish(t_end))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_1d(dt: f64, f: impl Fn(f64) -> f64, t_end: f64) -> Path {
        let n = (t_end / dt).round() as usize;
        let pts: Vec<Vec<f64>> = (0..=n).map(|k| vec![f(k as f64 * dt)]).collect();
        Path::from_points(dt, &pts).unwrap()
    }

    #[test]
    fn entering_and_staying() {
        let p = path_1d(0.01, |t| if t < 2.0 { 1.0 - 0.45 * t } else { 0.05 }, 10.0);
        let tr = trace_excursions(&p, &[], &[0.0], 0.1, 0.5, 0.0, None).unwrap();
        assert_eq!(tr.tau_list.len(), 1);
        assert!((tr.tau_list[0] - 2.0).abs() < 0.011);
        assert!(tr.theta_list.is_empty());
        assert!(tr.gamma.is_none());
        assert!((tr.t_in_total - (10.0 - tr.tau_list[0])).abs() < 1e-9);
    }

    #[test]
    fn oscillation_interleaves() {
        let p = path_1d(0.01, |t| 0.2 * (t).sin(), 40.0);
        let tr = trace_excursions(&p, &[], &[0.0], 0.05, 0.5, 0.0, None).unwrap();
        assert!(tr.tau_list.len() >= 5 && tr.theta_list.len() >= 5);
        assert!(tr.is_interleaved());
        let strictly = tr.tau_list.iter().zip(&tr.theta_list).all(|(t, th)| t < th);
        assert!(strictly);
        let elapsed = 40.0 - tr.tau_list[0];
        assert!(tr.t_in_total + tr.t_out_total <= elapsed + 1e-9);
    }

    #[test]
    fn gamma_from_constructed_trace() {
        let dt = 0.01;
        let p = path_1d(dt, |_| 0.0, 10.0);
        let snaps: Vec<(f64, f64)> = (0..=1000).map(|k| (k as f64 * dt, if k as f64 * dt < 7.0 { 0.1 } else { 0.2 })).collect();
        let tr = trace_excursions(&p, &snaps, &[0.0], 0.1, 0.5, 1.0, None).unwrap();
        assert!((tr.gamma.unwrap() - 7.0).abs() <= dt);
        assert_eq!(tr.w2_trace.len(), snaps.len());
    }

    #[test]
    fn stabilization_time_delays_tau() {
        let p = path_1d(0.01, |_| 0.0, 5.0);
        let tr = trace_excursions(&p, &[], &[0.0], 0.1, 0.5, 3.0, None).unwrap();
        assert!((tr.tau_list[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_counts_as_tau() {
        let g = DomainSpec::interval(-1.0, 1.0);
        let p = path_1d(0.01, |t| 0.0 + 0.6 * t, 2.0);
        let tr = trace_excursions(&p, &[], &[0.0], 0.1, 0.5, 0.0, Some(&g)).unwrap();
        // τ₁ = 0, θ₁ at the sphere, τ₂ at ∂G
        assert_eq!(tr.tau_list.len(), 2);
        assert_eq!(tr.theta_list.len(), 1);
        assert!((tr.tau_list[1] - 1.0 / 0.6).abs() < 0.011);
    }

    #[test]
    fn rejects_bad_snapshots() {
        let p = path_1d(0.01, |_| 0.0, 1.0);
        assert!(trace_excursions(&p, &[(0.5, 0.0), (0.4, 0.0)], &[0.0], 0.1, 0.5, 0.0, None).is_err());
        assert!(trace_excursions(&p, &[(2.0, 0.0)], &[0.0], 0.1, 0.5, 0.0, None).is_err());
        assert!(trace_excursions(&p, &[], &[0.0], 0.0, 0.5, 0.0, None).is_err());
    }
}
