use super::{whole_space, ChartField, Jet};
use crate::error::{Error, Result};
use crate::geom::RegionExpr;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Profile `ψ(q) = exp(1 - 1/(1-q))` of the bump in terms of `q = t²`, with its
/// first two derivatives in `q`. Zero for `q >= 1`.
#[inline]
pub fn bump_profile(q: f64) -> (f64, f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - q;
    let psi = (1.0 - 1.0 / u).exp();
    let u2 = u * u;
    let d1 = -psi / u2;
    let d2 = psi / (u2 * u2) - 2.0 * psi / (u2 * u);
    (psi, d1, d2)
}

/// Jet of `x ↦ ψ(|x-c|²/r²)` at `x`, accumulated into a scalar jet.
pub(crate) fn bump_jet_at(x: &[f64], c: &[f64], r: f64, out: &mut Jet) {
    let d = x.len();
    let r2 = r * r;
    let q: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2;
    let (p, p1, p2) = bump_profile(q);
    out.value[0] = p;
    for i in 0..d {
        let qi = 2.0 * (x[i] - c[i]) / r2;
        out.grad[i] = p1 * qi;
        for j in 0..d {
            let qj = 2.0 * (x[j] - c[j]) / r2;
            let qij = if i == j { 2.0 / r2 } else { 0.0 };
            out.hess[i * d + j] = p2 * qi * qj + p1 * qij;
        }
    }
}

/// Standard flat bump of the given radius: `exp(1 - 1/(1-t²))` for `t = |x-c|/r < 1`.
pub fn bump(center: &[f64], radius: f64) -> Result<ChartField> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("bump radius must be positive, got {radius}")));
    }
    let c = center.to_vec();
    let c2 = c.clone();
    let r2 = radius * radius;
    Ok(ChartField::new(whole_space(center.len()), 1, move |x, out| {
        let q: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2;
        out[0] = bump_profile(q).0;
    })
    .with_smooth(RegionExpr::All)
    .with_jet(2, move |x, j| bump_jet_at(x, &c2, radius, j)))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// `∫_{|u|<1} ψ(|u|²) du` in dimension `d` (1 to 3).
pub fn kernel_normalization(d: usize) -> f64 {
    static CACHE: OnceLock<[f64; 3]> = OnceLock::new();
    let c = CACHE.get_or_init(|| {
        let (x, w) = gauss_legendre(20);
        let panels = 64;
        let radial = |p: i32| -> f64 {
            let h = 1.0 / panels as f64;
            let mut s = 0.0;
            for k in 0..panels {
                let c = (k as f64 + 0.5) * h;
                for (xi, wi) in x.iter().zip(&w) {
                    let rho: f64 = c + 0.5 * h * xi;
                    s += wi * 0.5 * h * bump_profile(rho * rho).0 * rho.powi(p);
                }
            }
            s
        };
        [2.0 * radial(0), 2.0 * PI * radial(1), 4.0 * PI * radial(2)]
    });
    c[d - 1]
}

/// Normalized bump kernel `K(x) = ψ(|x-c|²/r²) / (c_d r^d)`.
#[derive(Clone, Debug)]
pub struct BumpKernel {
    pub center: Vec<f64>,
    pub radius: f64,
    pub normalization: f64,
}

impl BumpKernel {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("kernel radius must be positive, got {radius}")));
        }
        let d = center.len();
        let normalization = kernel_normalization(d) * radius.powi(d as i32);
        Ok(BumpKernel { center, radius, normalization })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q: f64 =
            x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (self.radius * self.radius);
        bump_profile(q).0 / self.normalization
    }
}
