//! Mean exit time of a one-dimensional gradient diffusion without
//! interaction: `(σ²/2) u″ − V′ u′ = −1` on `(l, r)`, `u(l) = u(r) = 0`.

use serde::Serialize;

use crate::landscape::Landscape;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct BvpSolution {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl BvpSolution {
    /// Linear interpolation of `u`.
    pub fn at(&self, x: f64) -> f64 {
        let (l, r) = (self.x[0], self.x[self.x.len() - 1]);
        if x <= l || x >= r {
            return 0.0;
        }
        let h = (r - l) / (self.x.len() - 1) as f64;
        let i = (((x - l) / h).floor() as usize).min(self.x.len() - 2);
        let s = (x - self.x[i]) / h;
        (1.0 - s) * self.u[i] + s * self.u[i + 1]
    }
}

/// Second-order central differences on `grid_n` intervals, solved with the
/// Thomas algorithm.
pub fn bvp_mean_exit_1d(landscape: &Landscape, lo: f64, hi: f64, sigma: f64, grid_n: usize) -> Result<BvpSolution> {
    if landscape.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: landscape.dim() });
    }
    if landscape.has_interaction() {
        return Err(Error::InvalidArgument("the mean exit time equation needs F ≡ 0".into()));
    }
    if grid_n < 64 {
        return Err(Error::InvalidArgument("grid_n must be at least 64".into()));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || !(sigma > 0.0) {
        return Err(Error::InvalidArgument("need a finite interval lo < hi and sigma > 0".into()));
    }
    let h = (hi - lo) / grid_n as f64;
    let x: Vec<f64> = (0..=grid_n).map(|i| lo + i as f64 * h).collect();
    let m = grid_n - 1;
    let diff = 0.5 * sigma * sigma / (h * h);
    let mut g = [0.0];
    let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        landscape.grad_v_into(&[x[i + 1]], &mut g);
        let adv = g[0] / (2.0 * h);
        sub[i] = diff + adv;
        diag[i] = -2.0 * diff;
        sup[i] = diff - adv;
    }
    let rhs = vec![-1.0; m];
    let inner = thomas(&sub, &diag, &sup, &rhs)?;
    let mut u = vec![0.0; grid_n + 1];
    u[1..=m].copy_from_slice(&inner);
    Ok(BvpSolution { x, u })
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let denom = diag[i] - if i > 0 { sub[i] * c[i - 1] } else { 0.0 };
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(Error::SingularSystem(i));
        }
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - if i > 0 { sub[i] * d[i - 1] } else { 0.0 }) / denom;
    }
    let mut out = vec![0.0; n];
    for i in (0..n).rev() {
        out[i] = d[i] - if i + 1 < n { c[i] * out[i + 1] } else { 0.0 };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Classical formula with scale density `s = e^{2V/σ²}` and speed density
    /// `m = 2/(σ² s)`, by composite Simpson quadrature.
    fn quadrature(v: impl Fn(f64) -> f64, l: f64, r: f64, sigma: f64, x: f64) -> f64 {
        let n = 20_000;
        let s2 = sigma * sigma;
        let s = |y: f64| (2.0 * v(y) / s2).exp();
        let m = |y: f64| 2.0 / (s2 * s(y));
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        // M(y) = ∫_l^y m on a fine grid, cumulative trapezoid
        let fine = 200_000;
        let hf = (r - l) / fine as f64;
        let mut cum = vec![0.0; fine + 1];
        for i in 1..=fine {
            let (a, b) = (l + (i - 1) as f64 * hf, l + i as f64 * hf);
            cum[i] = cum[i - 1] + 0.5 * hf * (m(a) + m(b));
        }
        let big_m = |y: f64| {
            let t = ((y - l) / hf).clamp(0.0, fine as f64);
            let i = (t.floor() as usize).min(fine - 1);
            cum[i] + (t - i as f64) * (cum[i + 1] - cum[i])
        };
        let inner = |y: f64| s(y) * big_m(y);
        let a_x = simpson(&inner, l, x);
        let a_r = simpson(&inner, l, r);
        let s_x = simpson(&s, l, x);
        let s_r = simpson(&s, l, r);
        -a_x + s_x / s_r * a_r
    }

    #[test]
    fn brownian_closed_form() {
        let free = Landscape::preset("free", 1).unwrap();
        let sol = bvp_mean_exit_1d(&free, -1.0, 1.0, 1.0, 256).unwrap();
        assert!((sol.at(0.0) - 1.0).abs() < 1e-4);
        for (x, u) in sol.x.iter().zip(&sol.u) {
            assert!((u - (1.0 - x * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn ou_matches_quadrature() {
        let ou = Landscape::preset("ou", 1).unwrap();
        let q = quadrature(|y| 0.5 * y * y, -1.0, 1.0, 1.0, 0.0);
        let sol = bvp_mean_exit_1d(&ou, -1.0, 1.0, 1.0, 1024).unwrap();
        assert!((sol.at(0.0) - q).abs() < 1e-3, "{} vs {q}", sol.at(0.0));
    }

    #[test]
    fn second_order_convergence() {
        let dw = Landscape::preset("dw", 1).unwrap();
        let (l, r, sigma, x0) = (-2.0, 0.0, 0.7, -1.0);
        let q = quadrature(|y| 0.25 * (y * y - 1.0).powi(2), l, r, sigma, x0);
        let e1 = (bvp_mean_exit_1d(&dw, l, r, sigma, 64).unwrap().at(x0) - q).abs();
        let e2 = (bvp_mean_exit_1d(&dw, l, r, sigma, 128).unwrap().at(x0) - q).abs();
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_input() {
        let qa = Landscape::preset("quad-attract(1)", 1).unwrap();
        assert!(bvp_mean_exit_1d(&qa, -1.0, 1.0, 1.0, 128).is_err());
        let ou = Landscape::preset("ou", 1).unwrap();
        assert!(bvp_mean_exit_1d(&ou, -1.0, 1.0, 1.0, 32).is_err());
        assert!(bvp_mean_exit_1d(&ou, 1.0, -1.0, 1.0, 128).is_err());
        let ou2 = Landscape::preset("ou", 2).unwrap();
        assert!(bvp_mean_exit_1d(&ou2, -1.0, 1.0, 1.0, 128).is_err());
    }
}
