//! Potential pairs `(V, F)`: analytic fields, presets, clamping and the
//! regularity / strong-attraction checkers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;
use crate::rng::trajectory_rng;
use crate::{dot, Error, Result};

/// Analytic scalar field on ℝ^d with gradient and Hessian-vector product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Field {
    Zero,
    /// `k|x|²/2`
    Quadratic { stiffness: f64 },
    /// `(|x|² − 1)²/4`
    DoubleWell,
    /// `A(1 − exp(−|x|²/2))`; `A > 0` attracts, `A < 0` repels.
    Gaussian { amplitude: f64 },
    Clamped(Box<ClampedField>),
}

/// A field kept verbatim on the ball `|x| ≤ radius`, blended with a C¹
/// smoothstep over the shell `[radius, radius + shell]` into the quadratic
/// cap `offset + stiffness·|x|²/2`.
///
/// Outside the shell the gradient is exactly `stiffness·x`, so
/// `|∇f(x)| ≤ stiffness·|x|` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampedField {
    pub inner: Field,
    pub radius: f64,
    pub shell: f64,
    pub stiffness: f64,
    pub offset: f64,
}

fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t), 6.0 - 12.0 * t)
    }
}

impl Field {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Field::Zero => 0.0,
            Field::Quadratic { stiffness } => 0.5 * stiffness * dot(x, x),
            Field::DoubleWell => {
                let r2m1 = dot(x, x) - 1.0;
                0.25 * r2m1 * r2m1
            }
            Field::Gaussian { amplitude } => amplitude * (1.0 - (-0.5 * dot(x, x)).exp()),
            Field::Clamped(c) => c.value(x),
        }
    }

    /// `out += scale · ∇f(x)`
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Field::Zero => {}
            Field::Quadratic { stiffness } => {
                let s = scale * stiffness;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += s * xi;
                }
            }
            Field::DoubleWell => {
                let s = scale * (dot(x, x) - 1.0);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += s * xi;
                }
            }
            Field::Gaussian { amplitude } => {
                let s = scale * amplitude * (-0.5 * dot(x, x)).exp();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += s * xi;
                }
            }
            Field::Clamped(c) => c.add_gradient(x, scale, out),
        }
    }

    /// `out += scale · ∇²f(x) v`
    pub fn add_hessian_vec(&self, x: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Field::Zero => {}
            Field::Quadratic { stiffness } => {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += scale * stiffness * vi;
                }
            }
            Field::DoubleWell => {
                let r2m1 = dot(x, x) - 1.0;
                let xv = dot(x, v);
                for ((o, vi), xi) in out.iter_mut().zip(v).zip(x) {
                    *o += scale * (r2m1 * vi + 2.0 * xi * xv);
                }
            }
            Field::Gaussian { amplitude } => {
                let e = amplitude * (-0.5 * dot(x, x)).exp();
                let xv = dot(x, v);
                for ((o, vi), xi) in out.iter_mut().zip(v).zip(x) {
                    *o += scale * e * (vi - xi * xv);
                }
            }
            Field::Clamped(c) => c.add_hessian_vec(x, v, scale, out),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.add_gradient(x, 1.0, &mut g);
        g
    }

    /// Whether `∇f` is linear, i.e. `∇f(u) = β u` for some β (0 for `Zero`).
    pub fn linear_gradient(&self) -> Option<f64> {
        match self {
            Field::Zero => Some(0.0),
            Field::Quadratic { stiffness } => Some(*stiffness),
            _ => None,
        }
    }
}

impl ClampedField {
    fn cap_value(&self, r2: f64) -> f64 {
        self.offset + 0.5 * self.stiffness * r2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r2 = dot(x, x);
        let r = r2.sqrt();
        if r <= self.radius {
            return self.inner.value(x);
        }
        let q = self.cap_value(r2);
        if r >= self.radius + self.shell {
            return q;
        }
        let (c, _, _) = smoothstep((r - self.radius) / self.shell);
        (1.0 - c) * self.inner.value(x) + c * q
    }

    fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let r2 = dot(x, x);
        let r = r2.sqrt();
        if r <= self.radius {
            self.inner.add_gradient(x, scale, out);
            return;
        }
        if r >= self.radius + self.shell {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += scale * self.stiffness * xi;
            }
            return;
        }
        let (c, dc, _) = smoothstep((r - self.radius) / self.shell);
        let dc = dc / self.shell;
        let gap = self.cap_value(r2) - self.inner.value(x);
        self.inner.add_gradient(x, scale * (1.0 - c), out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += scale * (c * self.stiffness * xi + dc * gap * xi / r);
        }
    }

    fn add_hessian_vec(&self, x: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        let r2 = dot(x, x);
        let r = r2.sqrt();
        if r <= self.radius {
            self.inner.add_hessian_vec(x, v, scale, out);
            return;
        }
        if r >= self.radius + self.shell {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += scale * self.stiffness * vi;
            }
            return;
        }
        let d = x.len();
        let (c, dc, ddc) = smoothstep((r - self.radius) / self.shell);
        let dc = dc / self.shell;
        let ddc = ddc / (self.shell * self.shell);
        let gap = self.cap_value(r2) - self.inner.value(x);
        // diff = ∇Q − ∇f
        let mut diff: Vec<f64> = x.iter().map(|xi| self.stiffness * xi).collect();
        self.inner.add_gradient(x, -1.0, &mut diff);
        let rhat: Vec<f64> = x.iter().map(|xi| xi / r).collect();
        let rv = dot(&rhat, v);
        let dv = dot(&diff, v);
        self.inner.add_hessian_vec(x, v, scale * (1.0 - c), out);
        for i in 0..d {
            let mut h = c * self.stiffness * v[i];
            h += dc * (diff[i] * rv + rhat[i] * dv);
            h += ddc * gap * rhat[i] * rv;
            h += dc * gap * (v[i] - rhat[i] * rv) / r;
            out[i] += scale * h;
        }
    }
}

/// Whether a regularity property holds everywhere, only on a stated ball, or
/// is merely recorded without a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coverage {
    Global { constant: Option<f64> },
    OnBall { radius: f64, constant: Option<f64> },
    Recorded,
    Unknown,
}

impl Coverage {
    pub fn constant(&self) -> Option<f64> {
        match self {
            Coverage::Global { constant } | Coverage::OnBall { constant, .. } => *constant,
            _ => None,
        }
    }
}

/// Global constants known analytically for a landscape.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularityFlags {
    pub grad_v_lipschitz: Option<f64>,
    pub grad_f_lipschitz: Option<f64>,
    pub grad_f_bounded: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCoverage {
    /// `V, F ∈ C²`
    pub smooth_potentials: Coverage,
    /// Lipschitz `∇V` (constant stored when known)
    pub lipschitz_grad_v: Coverage,
    /// Lipschitz `∇F`
    pub lipschitz_grad_f: Coverage,
    /// bounded `∇F`
    pub bounded_grad_f: Coverage,
    /// growth control `ΔV ≤ αV` at infinity; recorded, never verified
    pub confinement_at_infinity: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub name: String,
    dim: usize,
    confinement: Field,
    interaction: Field,
    confinement_offset: f64,
    interaction_zero: f64,
    pub flags: RegularityFlags,
    pub coverage: AssumptionCoverage,
}

/// Radius of the ball on which local constants of non-global presets are stated.
pub const LOCAL_BALL_RADIUS: f64 = 2.0;

impl Landscape {
    /// Builds a landscape and normalizes `F` so that `F(0) = 0`.
    pub fn new(name: impl Into<String>, dim: usize, confinement: Field, interaction: Field) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let zero = vec![0.0; dim];
        let interaction_zero = interaction.value(&zero);
        Ok(Self {
            name: name.into(),
            dim,
            confinement,
            interaction,
            confinement_offset: 0.0,
            interaction_zero,
            flags: RegularityFlags::default(),
            coverage: AssumptionCoverage {
                smooth_potentials: Coverage::Unknown,
                lipschitz_grad_v: Coverage::Unknown,
                lipschitz_grad_f: Coverage::Unknown,
                bounded_grad_f: Coverage::Unknown,
                confinement_at_infinity: Coverage::Unknown,
            },
        })
    }

    /// Parses a preset name.
    ///
    /// Grammar: `base[+interaction]`. Bases: `ou`, `dw`, `free`,
    /// `quad-attract(β)`, `gauss-attract(γ)`, `gauss-repel(γ)`. The optional
    /// suffix replaces the interaction with that of `quad-attract(β)`,
    /// `gauss-attract(γ)`, `gauss-repel(γ)` or `none`.
    pub fn preset(spec: &str, dim: usize) -> Result<Self> {
        let spec = spec.trim();
        let (base, extra) = match spec.split_once('+') {
            Some((b, e)) => (b.trim(), Some(e.trim())),
            None => (spec, None),
        };
        let (v, mut f) = parse_base(base)?;
        if let Some(extra) = extra {
            f = parse_interaction(extra)?;
        }
        if matches!(v, Field::DoubleWell) && dim != 1 {
            log::debug!("double well used in d = {dim}: radial form (|x|²−1)²/4");
        }
        let mut l = Self::new(spec, dim, v, f)?;
        l.fill_known_regularity();
        Ok(l)
    }

    fn fill_known_regularity(&mut self) {
        let r = LOCAL_BALL_RADIUS;
        let (lip_v, cov_v) = match &self.confinement {
            Field::Zero => (Some(0.0), Coverage::Global { constant: Some(0.0) }),
            Field::Quadratic { stiffness } => (Some(*stiffness), Coverage::Global { constant: Some(*stiffness) }),
            Field::DoubleWell => (None, Coverage::OnBall { radius: r, constant: Some(3.0 * r * r - 1.0) }),
            Field::Gaussian { amplitude } => {
                (Some(amplitude.abs()), Coverage::Global { constant: Some(amplitude.abs()) })
            }
            Field::Clamped(_) => (None, Coverage::Global { constant: None }),
        };
        let (lip_f, cov_f, bound_f, cov_bf) = match &self.interaction {
            Field::Zero => (
                Some(0.0),
                Coverage::Global { constant: Some(0.0) },
                Some(0.0),
                Coverage::Global { constant: Some(0.0) },
            ),
            Field::Quadratic { stiffness } => (
                Some(stiffness.abs()),
                Coverage::Global { constant: Some(stiffness.abs()) },
                None,
                Coverage::OnBall { radius: r, constant: Some(stiffness.abs() * r) },
            ),
            Field::Gaussian { amplitude } => {
                let b = amplitude.abs() * (-0.5f64).exp();
                (
                    Some(amplitude.abs()),
                    Coverage::Global { constant: Some(amplitude.abs()) },
                    Some(b),
                    Coverage::Global { constant: Some(b) },
                )
            }
            Field::DoubleWell => (
                None,
                Coverage::OnBall { radius: r, constant: Some(3.0 * r * r - 1.0) },
                None,
                Coverage::OnBall { radius: r, constant: Some(r * (r * r - 1.0).abs()) },
            ),
            Field::Clamped(_) => (None, Coverage::Global { constant: None }, None, Coverage::Unknown),
        };
        self.flags = RegularityFlags { grad_v_lipschitz: lip_v, grad_f_lipschitz: lip_f, grad_f_bounded: bound_f };
        self.coverage = AssumptionCoverage {
            smooth_potentials: Coverage::Global { constant: None },
            lipschitz_grad_v: cov_v,
            lipschitz_grad_f: cov_f,
            bounded_grad_f: cov_bf,
            confinement_at_infinity: Coverage::Recorded,
        };
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn confinement(&self) -> &Field {
        &self.confinement
    }

    pub fn interaction(&self) -> &Field {
        &self.interaction
    }

    pub fn has_interaction(&self) -> bool {
        !matches!(self.interaction, Field::Zero)
    }

    /// Returns a copy with `V ↦ V + c`. Gradients and dynamics are unchanged.
    pub fn with_confinement_offset(&self, c: f64) -> Self {
        let mut l = self.clone();
        l.confinement_offset += c;
        l
    }

    /// `Lip_∇V + Lip_∇F`, using ball-local constants when no global one exists.
    pub fn lipschitz_sum(&self) -> Option<f64> {
        let v = self.flags.grad_v_lipschitz.or(self.coverage.lipschitz_grad_v.constant())?;
        let f = self.flags.grad_f_lipschitz.or(self.coverage.lipschitz_grad_f.constant())?;
        Some(v + f)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    pub fn v_value(&self, x: &[f64]) -> f64 {
        self.confinement.value(x) + self.confinement_offset
    }

    pub fn f_value(&self, u: &[f64]) -> f64 {
        self.interaction.value(u) - self.interaction_zero
    }

    /// `out = ∇V(x)`
    #[inline]
    pub fn grad_v_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.confinement.add_gradient(x, 1.0, out);
    }

    /// `out += scale · ∇F(u)`
    #[inline]
    pub fn add_grad_f(&self, u: &[f64], scale: f64, out: &mut [f64]) {
        self.interaction.add_gradient(u, scale, out);
    }

    pub fn add_hess_v_vec(&self, x: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        self.confinement.add_hessian_vec(x, v, scale, out);
    }

    pub fn add_hess_f_vec(&self, u: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
        self.interaction.add_hessian_vec(u, v, scale, out);
    }

    /// `(V(x), ∇V(x))`
    pub fn potential_eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        Ok((self.v_value(x), self.confinement.gradient(x)))
    }

    /// `(F(u), ∇F(u))` with `F(0) = 0`.
    pub fn interaction_eval(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(u)?;
        Ok((self.f_value(u), self.interaction.gradient(u)))
    }

    /// `W_a(x) = V(x) + F(x − a) − V(a)` and `∇W_a(x) = ∇V(x) + ∇F(x − a)`.
    pub fn effective_potential(&self, a: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(a)?;
        self.check_dim(x)?;
        Ok((self.effective_value(a, x), self.effective_gradient(a, x)))
    }

    pub(crate) fn effective_value(&self, a: &[f64], x: &[f64]) -> f64 {
        let u: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - ai).collect();
        // the confinement offset cancels exactly
        self.confinement.value(x) + self.f_value(&u) - self.confinement.value(a)
    }

    pub(crate) fn effective_gradient(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.effective_gradient_into(a, x, &mut g);
        g
    }

    pub(crate) fn effective_gradient_into(&self, a: &[f64], x: &[f64], out: &mut [f64]) {
        self.grad_v_into(x, out);
        if self.has_interaction() {
            let u: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - ai).collect();
            self.add_grad_f(&u, 1.0, out);
        }
    }
}

fn parse_param(s: &str, head: &str) -> Result<Option<f64>> {
    let Some(rest) = s.strip_prefix(head) else { return Ok(None) };
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::UnknownPreset(s.to_string()))?;
    let p: f64 = inner.trim().parse().map_err(|_| Error::UnknownPreset(s.to_string()))?;
    if !p.is_finite() {
        return Err(Error::UnknownPreset(s.to_string()));
    }
    Ok(Some(p))
}

fn parse_interaction(s: &str) -> Result<Field> {
    if s == "none" {
        return Ok(Field::Zero);
    }
    if let Some(b) = parse_param(s, "quad-attract")? {
        return Ok(Field::Quadratic { stiffness: b });
    }
    if let Some(g) = parse_param(s, "gauss-attract")? {
        return Ok(Field::Gaussian { amplitude: g });
    }
    if let Some(g) = parse_param(s, "gauss-repel")? {
        return Ok(Field::Gaussian { amplitude: -g });
    }
    Err(Error::UnknownPreset(s.to_string()))
}

fn parse_base(s: &str) -> Result<(Field, Field)> {
    match s {
        "ou" => return Ok((Field::Quadratic { stiffness: 1.0 }, Field::Zero)),
        "dw" => return Ok((Field::DoubleWell, Field::Zero)),
        "free" => return Ok((Field::Zero, Field::Zero)),
        _ => {}
    }
    let f = parse_interaction(s)?;
    if matches!(f, Field::Zero) {
        return Err(Error::UnknownPreset(s.to_string()));
    }
    Ok((Field::Quadratic { stiffness: 1.0 }, f))
}

/// One entry of the preset catalog.
#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub confinement: &'static str,
    pub interaction: &'static str,
    pub coverage: AssumptionCoverage,
}

/// Named presets with a representative parameter of 1.
pub fn catalog() -> Vec<PresetInfo> {
    let entries: [(&str, &str, &str); 6] = [
        ("ou", "|x|²/2", "0"),
        ("free", "0", "0"),
        ("dw", "(|x|²−1)²/4", "0"),
        ("quad-attract(1)", "|x|²/2", "β|u|²/2"),
        ("gauss-attract(1)", "|x|²/2", "γ(1−exp(−|u|²/2))"),
        ("gauss-repel(1)", "|x|²/2", "−γ(1−exp(−|u|²/2))"),
    ];
    entries
        .iter()
        .map(|(name, v, f)| PresetInfo {
            name,
            confinement: v,
            interaction: f,
            coverage: Landscape::preset(name, 1).expect("catalog preset").coverage,
        })
        .collect()
}

/// Clamps both potentials outside the ball `B(0, r_mod)`.
///
/// Values and gradients are bit-identical to the input for `|x| ≤ r_mod`.
/// Over `[r_mod, r_mod + shell]` each field is blended into a quadratic cap,
/// giving globally Lipschitz gradients. The blend is C¹, not C².
pub fn clamp_landscape(landscape: &Landscape, r_mod: f64, shell: f64) -> Result<Landscape> {
    if !(r_mod > 0.0) || !(shell > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clamp radius and shell must be positive (got {r_mod}, {shell})"
        )));
    }
    let dirs = probe_directions(landscape.dim);
    let clamp = |f: &Field| -> Field {
        if matches!(f, Field::Zero) {
            return Field::Zero;
        }
        let mut kappa: f64 = 0.0;
        let mut mean_val = 0.0;
        for u in &dirs {
            let p: Vec<f64> = u.iter().map(|ui| ui * r_mod).collect();
            let g = f.gradient(&p);
            kappa = kappa.max(crate::norm(&g) / r_mod);
            mean_val += f.value(&p);
        }
        mean_val /= dirs.len() as f64;
        Field::Clamped(Box::new(ClampedField {
            inner: f.clone(),
            radius: r_mod,
            shell,
            stiffness: kappa,
            offset: mean_val - 0.5 * kappa * r_mod * r_mod,
        }))
    };
    let mut out = landscape.clone();
    out.name = format!("clamp({}, {r_mod}, {shell})", landscape.name);
    out.confinement = clamp(&landscape.confinement);
    out.interaction = clamp(&landscape.interaction);
    out.flags = RegularityFlags::default();
    out.coverage.lipschitz_grad_v = Coverage::Global { constant: None };
    out.coverage.lipschitz_grad_f = Coverage::Global { constant: None };
    out.coverage.bounded_grad_f = Coverage::OnBall { radius: r_mod, constant: None };
    // C¹ blend only
    out.coverage.smooth_potentials = Coverage::OnBall { radius: r_mod, constant: None };
    Ok(out)
}

fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            dirs.push(e);
        }
    }
    if dim > 1 {
        let mut rng = trajectory_rng(0x5eed);
        for _ in 0..62 {
            dirs.push(random_unit(&mut rng, dim));
        }
    }
    dirs
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = crate::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform sample from the ball `B(center, radius)`.
pub(crate) fn random_in_ball<R: Rng>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let u = random_unit(rng, d);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    center.iter().zip(&u).map(|(c, ui)| c + r * ui).collect()
}

/// Sampled lower bound on the Lipschitz constant of a vector field on a box.
///
/// Each sample `x` is paired with a nearby point (scale `1e-4` of the box
/// diagonal) and with the previous sample; the largest difference quotient is
/// returned. The true constant over the region is at least this value.
pub fn estimate_lipschitz<G>(field: G, region: &Aabb, n_samples: usize, seed: u64) -> Result<f64>
where
    G: Fn(&[f64], &mut [f64]),
{
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    if region.volume() <= 0.0 {
        return Err(Error::DegenerateRegion("Lipschitz region has zero volume".into()));
    }
    let d = region.dim();
    let h = 1e-4 * region.diagonal();
    let mut rng = trajectory_rng(seed);
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut best: f64 = 0.0;
    let quotient = |x: &[f64], y: &[f64], gx: &[f64], gy: &[f64]| -> f64 {
        let dx = crate::dist(x, y);
        if dx <= 0.0 {
            0.0
        } else {
            crate::dist(gx, gy) / dx
        }
    };
    for _ in 0..n_samples {
        let x = region.sample(&mut rng);
        let dir = random_unit(&mut rng, d);
        let y = region.clip(&x.iter().zip(&dir).map(|(xi, di)| xi + h * di).collect::<Vec<_>>());
        field(&x, &mut gx);
        field(&y, &mut gy);
        best = best.max(quotient(&x, &y, &gx, &gy));
        if let Some((px, pg)) = &prev {
            best = best.max(quotient(&x, px, &gx, pg));
        }
        prev = Some((x, gx.clone()));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongAttraction {
    pub k_est: f64,
    pub pass: bool,
}

/// Samples the Rayleigh quotient `⟨∇V(x) + ∇F*μ(x), x−a⟩ / |x−a|²`.
///
/// Points `x` are drawn from `B(a, delta_x) \ {a}`. Test measures are `δ_a`,
/// Dirac masses `δ_y` with `|y − a| ≤ delta_mu` (including the two extreme
/// atoms along `x − a`), and two-atom mixtures inside the W₂ ball of radius
/// `delta_mu` around `δ_a`. This only samples a necessary condition: the W₂
/// ball is not exhausted.
pub fn check_strong_attraction(
    landscape: &Landscape,
    a: &[f64],
    delta_x: f64,
    delta_mu: f64,
    n_samples: usize,
    seed: u64,
) -> Result<StrongAttraction> {
    if !(delta_x > 0.0) || !(delta_mu > 0.0) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    landscape.check_dim(a)?;
    let d = landscape.dim;
    let mut rng = trajectory_rng(seed);
    let mut k_est = f64::INFINITY;
    let mut g = vec![0.0; d];
    let mut u = vec![0.0; d];
    let mut quotient = |x: &[f64], atoms: &[(Vec<f64>, f64)]| -> f64 {
        landscape.grad_v_into(x, &mut g);
        for (y, w) in atoms {
            for k in 0..d {
                u[k] = x[k] - y[k];
            }
            landscape.add_grad_f(&u, *w, &mut g);
        }
        let xa: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - ai).collect();
        dot(&g, &xa) / dot(&xa, &xa)
    };
    for _ in 0..n_samples.max(1) {
        let x = loop {
            let x = random_in_ball(&mut rng, a, delta_x);
            if crate::dist(&x, a) > 1e-12 * delta_x {
                break x;
            }
        };
        let xa_norm = crate::dist(&x, a);
        let along: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| (xi - ai) / xa_norm).collect();
        let mut measures: Vec<Vec<(Vec<f64>, f64)>> = vec![vec![(a.to_vec(), 1.0)]];
        for s in [1.0, -1.0] {
            let y: Vec<f64> = a.iter().zip(&along).map(|(ai, ei)| ai + s * delta_mu * ei).collect();
            measures.push(vec![(y, 1.0)]);
        }
        measures.push(vec![(random_in_ball(&mut rng, a, delta_mu), 1.0)]);
        // two-atom mixture with w r1² + (1−w) r2² ≤ Δμ²
        let w: f64 = rng.random_range(0.05..0.95);
        let budget = delta_mu * delta_mu * rng.random::<f64>();
        let split: f64 = rng.random();
        let r1 = (budget * split / w).sqrt();
        let r2 = (budget * (1.0 - split) / (1.0 - w)).sqrt();
        let e1 = random_unit(&mut rng, d);
        let e2 = random_unit(&mut rng, d);
        let y1: Vec<f64> = a.iter().zip(&e1).map(|(ai, ei)| ai + r1 * ei).collect();
        let y2: Vec<f64> = a.iter().zip(&e2).map(|(ai, ei)| ai + r2 * ei).collect();
        measures.push(vec![(y1, w), (y2, 1.0 - w)]);
        for m in &measures {
            k_est = k_est.min(quotient(&x, m));
        }
    }
    Ok(StrongAttraction { k_est, pass: k_est > 0.0 })
}
