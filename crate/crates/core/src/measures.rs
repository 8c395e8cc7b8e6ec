//! Occupation measures `μ_t = t₀/(t₀+t) μ₀ + 1/(t₀+t) ∫₀ᵗ δ_{X_s} ds` and the
//! extended initial condition `(t₀, μ₀, x₀)`.

use serde::{Deserialize, Serialize};

use crate::landscape::Landscape;
use crate::{dist, Error, Result};

/// Default number of stored path atoms before thinning.
pub const DEFAULT_CAP: usize = 4096;
/// Smallest cap accepted by [`OccupationMeasure::thin`].
pub const MIN_CAP: usize = 16;

/// Extended initial condition: prior time mass `t₀` (possibly infinite),
/// prior measure `μ₀` and starting point `x₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedInit {
    t0: f64,
    atoms: Vec<(Vec<f64>, f64)>,
    x0: Vec<f64>,
}

/// Builds an [`ExtendedInit`], normalizing the prior weights to 1.
///
/// With `t₀ = 0` the atoms are irrelevant and may be empty.
pub fn make_init(t0: f64, mu0_atoms: Vec<(Vec<f64>, f64)>, x0: Vec<f64>) -> Result<ExtendedInit> {
    if !(t0 >= 0.0) {
        return Err(Error::InvalidArgument("t0 must be nonnegative or +inf".into()));
    }
    if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("x0 must be a finite, nonempty point".into()));
    }
    if t0 > 0.0 && mu0_atoms.is_empty() {
        return Err(Error::InvalidArgument("t0 > 0 needs at least one prior atom".into()));
    }
    let d = x0.len();
    let mut total = 0.0;
    for (p, w) in &mu0_atoms {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        if !(*w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument("prior weights must be positive".into()));
        }
        total += w;
    }
    let atoms = mu0_atoms.into_iter().map(|(p, w)| (p, w / total)).collect();
    Ok(ExtendedInit { t0, atoms, x0 })
}

impl ExtendedInit {
    /// `t₀ = 0`, no prior: the measure starts as `δ_{x₀}`.
    pub fn at_point(x0: Vec<f64>) -> Self {
        Self { t0: 0.0, atoms: Vec::new(), x0 }
    }

    /// Frozen regime `t₀ = +∞` with `μ₀ = δ_b`.
    pub fn frozen_at(b: Vec<f64>, x0: Vec<f64>) -> Self {
        Self { t0: f64::INFINITY, atoms: vec![(b, 1.0)], x0 }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn mu0(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn is_frozen(&self) -> bool {
        self.t0.is_infinite()
    }

    /// Same prior with another starting point.
    pub fn with_x0(&self, x0: Vec<f64>) -> Self {
        Self { x0, ..self.clone() }
    }
}

/// Time-weighted occupation measure.
///
/// Prior atoms carry normalized weights `t₀/(t₀+t) · w_i`; every pushed path
/// atom carries `dt/(t₀+t)`. Path atoms are stored in time order and merged
/// by [`thin`](Self::thin) when their count exceeds the cap. Before the first
/// push with `t₀ = 0` the measure is `δ_{x₀}`.
#[derive(Debug, Clone)]
pub struct OccupationMeasure {
    dim: usize,
    t0: f64,
    x0: Vec<f64>,
    prior_points: Vec<f64>,
    prior_weights: Vec<f64>,
    prior_mean: Vec<f64>,
    path_points: Vec<f64>,
    path_weights: Vec<f64>,
    // distance from each stored atom to the farthest original sample merged into it
    path_radius: Vec<f64>,
    /// marks the first atom of each group produced by one thinned run
    path_group_start: Vec<bool>,
    // Σ dt·x over the path; thinning keeps it exact
    path_sum: Vec<f64>,
    elapsed: f64,
    cap: usize,
}

impl OccupationMeasure {
    pub fn new(init: &ExtendedInit, cap: usize) -> Self {
        let dim = init.dim();
        let mut prior_points = Vec::with_capacity(init.atoms.len() * dim);
        let mut prior_weights = Vec::with_capacity(init.atoms.len());
        let mut prior_mean = vec![0.0; dim];
        for (p, w) in &init.atoms {
            prior_points.extend_from_slice(p);
            prior_weights.push(*w);
            for (m, pi) in prior_mean.iter_mut().zip(p) {
                *m += w * pi;
            }
        }
        Self {
            dim,
            t0: init.t0,
            x0: init.x0.clone(),
            prior_points,
            prior_weights,
            prior_mean,
            path_points: Vec::new(),
            path_weights: Vec::new(),
            path_radius: Vec::new(),
            path_group_start: Vec::new(),
            path_sum: vec![0.0; dim],
            elapsed: 0.0,
            cap: cap.max(MIN_CAP),
        }
    }

    /// Measure that stores every pushed atom.
    pub fn uncapped(init: &ExtendedInit) -> Self {
        Self::new(init, usize::MAX)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Prior time mass `t₀` (infinite in the frozen regime).
    pub fn prior_weight(&self) -> f64 {
        self.t0
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of stored path atoms.
    pub fn path_len(&self) -> usize {
        self.path_weights.len()
    }

    fn is_frozen(&self) -> bool {
        self.t0.is_infinite()
    }

    fn is_point_mass_at_start(&self) -> bool {
        self.t0 == 0.0 && self.elapsed == 0.0
    }

    /// Normalized prior mass `t₀/(t₀+t)`.
    pub fn prior_fraction(&self) -> f64 {
        if self.is_frozen() {
            1.0
        } else if self.t0 == 0.0 {
            0.0
        } else {
            self.t0 / (self.t0 + self.elapsed)
        }
    }

    /// Normalizer applied to raw path weights.
    fn path_scale(&self) -> f64 {
        if self.is_frozen() || self.elapsed == 0.0 {
            0.0
        } else {
            1.0 / (self.t0 + self.elapsed)
        }
    }

    /// Sum of normalized weights.
    pub fn total_mass(&self) -> f64 {
        if self.is_point_mass_at_start() {
            return 1.0;
        }
        self.prior_fraction() * self.prior_weights.iter().sum::<f64>()
            + self.path_scale() * self.path_weights.iter().sum::<f64>()
    }

    /// Largest distance between a stored path atom and a sample merged into it.
    pub fn merge_radius(&self) -> f64 {
        self.path_radius.iter().copied().fold(0.0, f64::max)
    }

    /// `(point, normalized weight)` for every atom, prior block first.
    pub fn atoms(&self) -> Vec<(Vec<f64>, f64)> {
        if self.is_point_mass_at_start() {
            return vec![(self.x0.clone(), 1.0)];
        }
        let pf = self.prior_fraction();
        let ps = self.path_scale();
        let d = self.dim;
        let prior = self
            .prior_weights
            .iter()
            .enumerate()
            .filter(|_| pf > 0.0)
            .map(|(i, w)| (self.prior_points[i * d..(i + 1) * d].to_vec(), pf * w));
        let path = self
            .path_weights
            .iter()
            .enumerate()
            .filter(|_| ps > 0.0)
            .map(|(i, w)| (self.path_points[i * d..(i + 1) * d].to_vec(), ps * w));
        prior.chain(path).collect()
    }

    /// Records the state `x` held for a step of length `dt`.
    pub fn push_sample(&mut self, x: &[f64], dt: f64) {
        debug_assert!(dt > 0.0);
        debug_assert_eq!(x.len(), self.dim);
        self.elapsed += dt;
        if self.is_frozen() {
            return;
        }
        self.path_points.extend_from_slice(x);
        self.path_weights.push(dt);
        self.path_radius.push(0.0);
        self.path_group_start.push(true);
        for (s, xi) in self.path_sum.iter_mut().zip(x) {
            *s += dt * xi;
        }
        if self.path_weights.len() > self.cap {
            // leave room for `cap / 3` pushes before the next merge
            self.merge_into((self.cap.max(MIN_CAP) / (3 * self.dim)).max(1));
        }
    }

    /// Mean of the measure.
    pub fn mean(&self) -> Vec<f64> {
        if self.is_point_mass_at_start() {
            return self.x0.clone();
        }
        let pf = self.prior_fraction();
        let ps = self.path_scale();
        self.prior_mean.iter().zip(&self.path_sum).map(|(m, s)| pf * m + ps * s).collect()
    }

    /// `out += scale · (∇F * μ)(x)`.
    ///
    /// Quadratic and zero interactions use the exact identity
    /// `∇F * μ(x) = β (x − mean μ)` and cost O(d).
    pub fn add_interaction_drift(&self, landscape: &Landscape, x: &[f64], scale: f64, out: &mut [f64]) {
        let interaction = landscape.interaction();
        if let Some(beta) = interaction.linear_gradient() {
            if beta == 0.0 {
                return;
            }
            let pf = self.prior_fraction();
            let ps = self.path_scale();
            for k in 0..self.dim {
                let mean = if self.is_point_mass_at_start() {
                    self.x0[k]
                } else {
                    pf * self.prior_mean[k] + ps * self.path_sum[k]
                };
                out[k] += scale * beta * (x[k] - mean);
            }
            return;
        }
        let d = self.dim;
        let mut u = vec![0.0; d];
        let mut add_atom = |z: &[f64], w: f64, out: &mut [f64]| {
            for k in 0..d {
                u[k] = x[k] - z[k];
            }
            landscape.add_grad_f(&u, scale * w, out);
        };
        if self.is_point_mass_at_start() {
            add_atom(&self.x0, 1.0, out);
            return;
        }
        let pf = self.prior_fraction();
        if pf > 0.0 {
            for (i, w) in self.prior_weights.iter().enumerate() {
                add_atom(&self.prior_points[i * d..(i + 1) * d], pf * w, out);
            }
        }
        let ps = self.path_scale();
        if ps > 0.0 {
            for (i, w) in self.path_weights.iter().enumerate() {
                add_atom(&self.path_points[i * d..(i + 1) * d], ps * w, out);
            }
        }
    }

    /// `(∇F * μ)(x)`.
    pub fn interaction_drift(&self, landscape: &Landscape, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.add_interaction_drift(landscape, x, 1.0, &mut out);
        out
    }

    /// `Σ w_i |z_i − a|²`.
    pub fn second_moment(&self, a: &[f64]) -> f64 {
        if self.is_point_mass_at_start() {
            return dist(&self.x0, a).powi(2);
        }
        let d = self.dim;
        let sq = |z: &[f64]| -> f64 { z.iter().zip(a).map(|(zi, ai)| (zi - ai) * (zi - ai)).sum() };
        let pf = self.prior_fraction();
        let ps = self.path_scale();
        let mut total = 0.0;
        if pf > 0.0 {
            for (i, w) in self.prior_weights.iter().enumerate() {
                total += pf * w * sq(&self.prior_points[i * d..(i + 1) * d]);
            }
        }
        if ps > 0.0 {
            for (i, w) in self.path_weights.iter().enumerate() {
                total += ps * w * sq(&self.path_points[i * d..(i + 1) * d]);
            }
        }
        total
    }

    /// `W₂(μ, δ_a)`, exact since the coupling with a point mass is unique.
    pub fn w2_to_dirac(&self, a: &[f64]) -> f64 {
        self.second_moment(a).sqrt()
    }

    /// If more than `cap` path atoms are stored, merges them into at most
    /// `cap / (2d)` time-adjacent runs of nearly equal weight. A run becomes
    /// the `2d` equal-weight atoms `m ± √d·L_k`, where `m` is its barycenter
    /// and `L_k` are the columns of the Cholesky factor of its covariance, so
    /// the run's mean and covariance are kept and its odd moments vanish. The
    /// prior block, the total mass, the first moment and the second moment
    /// about any point are unchanged, so `w2_to_dirac` is preserved exactly.
    /// Automatic thinning in [`push_sample`](Self::push_sample) uses
    /// `cap / (3d)` runs to leave room for further samples.
    ///
    /// The drift moves by at most `Lip_∇F · merge_radius()` times the path
    /// fraction of the mass.
    pub fn thin(&mut self, cap: usize) {
        let cap = cap.max(MIN_CAP);
        if self.path_weights.len() > cap {
            self.merge_into((cap / (2 * self.dim)).max(1));
        }
    }

    fn merge_into(&mut self, runs: usize) {
        let d = self.dim;
        let merged =
            merge_runs(&self.path_points, &self.path_weights, &self.path_radius, &self.path_group_start, d, runs);
        self.path_points = merged.0;
        self.path_weights = merged.1;
        self.path_radius = merged.2;
        self.path_group_start = merged.3;
    }

    /// JSON-friendly dump with normalized atoms.
    pub fn dump(&self) -> MeasureDump {
        MeasureDump {
            prior_weight: self.t0.is_finite().then_some(self.t0),
            atoms: self.atoms().into_iter().map(|(point, weight)| Atom { point, weight }).collect(),
            elapsed: self.elapsed,
        }
    }

    /// The current measure as a prior for a continuation starting at `x0`:
    /// `t₀' = t₀ + t`, `μ₀' = μ_t`.
    pub fn as_init(&self, x0: Vec<f64>) -> ExtendedInit {
        if self.is_frozen() {
            return ExtendedInit { t0: self.t0, atoms: self.atoms(), x0 };
        }
        if self.is_point_mass_at_start() {
            return ExtendedInit::at_point(x0);
        }
        ExtendedInit { t0: self.t0 + self.elapsed, atoms: self.atoms(), x0 }
    }
}

type Merged = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>);

/// Splits the atoms into at most `runs` time-adjacent runs of nearly equal
/// weight: a group of atoms joins run `⌊(c + w/2)·runs/total⌋`, where `c` is
/// the weight before it and `w` its own weight. Groups from earlier thinnings
/// are never split. Runs of one atom, or of coincident atoms, stay single.
fn merge_runs(points: &[f64], weights: &[f64], radius: &[f64], group_start: &[bool], d: usize, runs: usize) -> Merged {
    let n = weights.len();
    let scale = runs as f64 / weights.iter().sum::<f64>();
    let mut out_p = Vec::with_capacity(2 * runs * d * d);
    let mut out_w = Vec::with_capacity(2 * runs * d);
    let mut out_r = Vec::with_capacity(2 * runs * d);
    let mut out_g = Vec::with_capacity(2 * runs * d);
    let mut bary = vec![0.0; d];
    let mut cov = vec![0.0; d * d];
    let group_end = |i: usize| (i + 1..n).find(|&j| group_start[j]).unwrap_or(n);
    let label = |cum: f64, w: f64| (((cum + 0.5 * w) * scale) as usize).min(runs - 1);
    let mut cum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = group_end(start);
        let mut w: f64 = weights[start..end].iter().sum();
        let run = label(cum, w);
        while end < n {
            let next = group_end(end);
            let gw: f64 = weights[end..next].iter().sum();
            if label(cum + w, gw) != run {
                break;
            }
            w += gw;
            end = next;
        }
        cum += w;
        let pts = &points[start * d..end * d];
        let ws = &weights[start..end];

        bary.iter_mut().for_each(|b| *b = 0.0);
        for (x, wi) in pts.chunks_exact(d).zip(ws) {
            for k in 0..d {
                bary[k] += wi * x[k];
            }
        }
        bary.iter_mut().for_each(|b| *b /= w);
        let (mut var, mut far2) = (0.0, 0.0f64);
        cov.iter_mut().for_each(|c| *c = 0.0);
        for (x, wi) in pts.chunks_exact(d).zip(ws) {
            let mut r2 = 0.0;
            for k in 0..d {
                let u = x[k] - bary[k];
                r2 += u * u;
                for j in 0..=k {
                    cov[k * d + j] += wi * u * (x[j] - bary[j]);
                }
            }
            var += wi * r2;
            far2 = far2.max(r2);
        }
        let spread = (var / w).sqrt();
        let r0 = far2.sqrt() + radius[start..end].iter().copied().fold(0.0, f64::max);
        if end - start == 1 || spread == 0.0 {
            out_p.extend_from_slice(&bary);
            out_w.push(w);
            out_r.push(r0);
            out_g.push(true);
            start = end;
            continue;
        }
        // m ± √d·L_k over the columns of the Cholesky factor of the covariance
        for k in 0..d {
            for j in 0..=k {
                cov[k * d + j] /= w;
                cov[j * d + k] = cov[k * d + j];
            }
        }
        let chol = semidefinite_cholesky(&cov, d);
        let root_d = (d as f64).sqrt();
        // every column has norm at most the spread
        let reach = root_d * spread;
        let first = out_w.len();
        for k in 0..d {
            let col: Vec<f64> = (0..d).map(|i| root_d * chol[i * d + k]).collect();
            if col.iter().all(|c| *c == 0.0) {
                out_p.extend_from_slice(&bary);
                out_w.push(w / d as f64);
                out_r.push(r0);
                out_g.push(out_w.len() == first + 1);
                continue;
            }
            for sign in [-1.0, 1.0] {
                out_p.extend(bary.iter().zip(&col).map(|(b, c)| b + sign * c));
                out_w.push(0.5 * w / d as f64);
                out_r.push(r0 + reach);
                out_g.push(out_w.len() == first + 1);
            }
        }
        start = end;
    }
    (out_p, out_w, out_r, out_g)
}

/// Lower-triangular `L` with `L Lᵀ = c` for a positive semidefinite `c`
/// (row-major, `d × d`); columns with a vanishing pivot are left at zero.
fn semidefinite_cholesky(c: &[f64], d: usize) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    let tol = 1e-14 * (0..d).map(|k| c[k * d + k]).sum::<f64>();
    for j in 0..d {
        let pivot = c[j * d + j] - (0..j).map(|k| l[j * d + k] * l[j * d + k]).sum::<f64>();
        if pivot <= tol {
            continue;
        }
        let p = pivot.sqrt();
        l[j * d + j] = p;
        for i in j + 1..d {
            let s = c[j * d + i] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            l[i * d + j] = s / p;
        }
    }
    l
}

/// Returns a thinned copy; see [`OccupationMeasure::thin`].
pub fn thin(mu: &OccupationMeasure, cap: usize) -> OccupationMeasure {
    let mut m = mu.clone();
    m.thin(cap);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Serialized measure. `prior_weight` is `null` in the frozen regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDump {
    pub prior_weight: Option<f64>,
    pub atoms: Vec<Atom>,
    pub elapsed: f64,
}

/// Exact `W₂` between two one-dimensional discrete measures of equal mass,
/// by the monotone (quantile) coupling.
pub fn w2_discrete_1d(p: &[(Vec<f64>, f64)], q: &[(Vec<f64>, f64)]) -> Result<f64> {
    if let Some((pt, _)) = p.iter().chain(q).find(|(pt, _)| pt.len() != 1) {
        return Err(Error::DimensionMismatch { expected: 1, got: pt.len() });
    }
    let mass_p: f64 = p.iter().map(|a| a.1).sum();
    let mass_q: f64 = q.iter().map(|a| a.1).sum();
    if (mass_p - mass_q).abs() > 1e-12 * mass_p.max(mass_q).max(1.0) {
        return Err(Error::InvalidArgument(format!("unequal masses {mass_p} and {mass_q}")));
    }
    let sorted = |v: &[(Vec<f64>, f64)]| {
        let mut s: Vec<(f64, f64)> = v.iter().map(|(x, w)| (x[0], *w)).collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s
    };
    let (sp, sq) = (sorted(p), sorted(q));
    let (mut i, mut j) = (0, 0);
    let (mut rp, mut rq) = (sp.first().map_or(0.0, |a| a.1), sq.first().map_or(0.0, |a| a.1));
    let mut cost = 0.0;
    while i < sp.len() && j < sq.len() {
        let m = rp.min(rq);
        cost += m * (sp[i].0 - sq[j].0).powi(2);
        rp -= m;
        rq -= m;
        if rp <= 1e-15 * mass_p {
            i += 1;
            rp = sp.get(i).map_or(0.0, |a| a.1);
        }
        if rq <= 1e-15 * mass_q {
            j += 1;
            rq = sq.get(j).map_or(0.0, |a| a.1);
        }
    }
    Ok(cost.sqrt())
}
