use super::kernel::bump_profile;
use super::{ChartField, Jet};
use crate::error::{Error, Result};
use crate::geom::RegionExpr;
use dashmap::DashMap;
use std::sync::Arc;

/// Lattice points per axis across one kernel diameter, 1-D default.
pub const DEFAULT_QUADRATURE_1D: usize = 256;
/// Lattice points per axis across one kernel diameter, 2-D default.
pub const DEFAULT_QUADRATURE_2D: usize = 32;

type Key = [i64; 3];

/// Kernel nodes per value node and axis.
const FINE: usize = 8;

/// Cubic Lagrange basis on the nodes `-1, 0, 1, 2`, at `j / FINE` for each `j`.
fn lagrange_table() -> &'static [[f64; 4]; FINE] {
    static T: std::sync::OnceLock<[[f64; 4]; FINE]> = std::sync::OnceLock::new();
    T.get_or_init(|| {
        let nodes = [-1.0, 0.0, 1.0, 2.0];
        let mut t = [[0.0; 4]; FINE];
        for (j, row) in t.iter_mut().enumerate() {
            let u = j as f64 / FINE as f64;
            for a in 0..4 {
                row[a] = (0..4).filter(|&b| b != a).map(|b| (u - nodes[b]) / (nodes[a] - nodes[b])).product();
            }
        }
        t
    })
}

/// Convolution with the bump kernel, discretized on lattices that are fixed in
/// the integration variable.
///
/// In `d` dimensions the kernel is the product of one-dimensional bumps of
/// radius `r/√d`, so its support is the cube inscribed in the `r`-ball, and the
/// weights factor over the axes. Values of `f` are taken on a coarse lattice and
/// interpolated; the kernel is summed on a finer one with weights corrected to
/// reproduce affine functions exactly.
struct Mollifier {
    f: ChartField,
    /// Per-axis kernel radius.
    half: f64,
    dy: f64,
    origin: Vec<f64>,
    block: i64,
    cache: DashMap<Key, Arc<Vec<f64>>>,
}

/// Arithmetic shared by plain values and second-order jets in one variable.
trait Num:
    Copy + From<f64> + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<Output = Self> + std::ops::Div<Output = Self>
{
    /// `value + slope · (x - x₀)` as a function of `x`.
    fn affine(value: f64, slope: f64) -> Self;
    /// `ψ(q)` for the bump profile `ψ`.
    fn profile(q: Self) -> Self;
    fn value(&self) -> f64;
}

impl Num for f64 {
    fn affine(value: f64, _: f64) -> Self {
        value
    }
    fn profile(q: Self) -> Self {
        bump_profile(q).0
    }
    fn value(&self) -> f64 {
        *self
    }
}

/// Value with first and second derivative.
#[derive(Clone, Copy, Debug)]
struct D2(f64, f64, f64);

impl From<f64> for D2 {
    fn from(v: f64) -> Self {
        D2(v, 0.0, 0.0)
    }
}

impl std::ops::Add for D2 {
    type Output = D2;
    fn add(self, o: D2) -> D2 {
        D2(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }
}

impl std::ops::Sub for D2 {
    type Output = D2;
    fn sub(self, o: D2) -> D2 {
        D2(self.0 - o.0, self.1 - o.1, self.2 - o.2)
    }
}

impl std::ops::Mul for D2 {
    type Output = D2;
    fn mul(self, o: D2) -> D2 {
        D2(self.0 * o.0, self.1 * o.0 + self.0 * o.1, self.2 * o.0 + 2.0 * self.1 * o.1 + self.0 * o.2)
    }
}

impl std::ops::Div for D2 {
    type Output = D2;
    fn div(self, o: D2) -> D2 {
        let v = o.0;
        let inv = D2(1.0 / v, -o.1 / (v * v), 2.0 * o.1 * o.1 / (v * v * v) - o.2 / (v * v));
        self * inv
    }
}

impl Num for D2 {
    fn affine(value: f64, slope: f64) -> Self {
        D2(value, slope, 0.0)
    }
    fn profile(q: Self) -> Self {
        let (p, p1, p2) = bump_profile(q.0);
        D2(p, p1 * q.1, p2 * q.1 * q.1 + p1 * q.2)
    }
    fn value(&self) -> f64 {
        self.0
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Odometer step over the box `lo..=hi`, last axis fastest. Returns false after
/// the last index.
fn advance(idx: &mut [i64], lo: &[i64], hi: &[i64]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] <= hi[a] {
            return true;
        }
        idx[a] = lo[a];
    }
    false
}

impl Mollifier {
    fn node(&self, axis: usize, k: i64) -> f64 {
        self.origin[axis] + k as f64 * self.dy
    }

    fn block_values(&self, key: Key) -> Arc<Vec<f64>> {
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let d = self.f.dim();
        let m = self.f.value_dim;
        let b = self.block as usize;
        let count = b.pow(d as u32);
        let mut vals = vec![0.0; count * m];
        let mut y = vec![0.0; d];
        let mut yc = vec![0.0; d];
        for idx in 0..count {
            let mut rem = idx;
            for a in (0..d).rev() {
                let local = (rem % b) as i64;
                rem /= b;
                y[a] = self.node(a, key[a] * self.block + local);
            }
            self.f.domain.project(&y, &mut yc);
            self.f.eval_into(&yc, &mut vals[idx * m..(idx + 1) * m]);
        }
        let arc = Arc::new(vals);
        self.cache.entry(key).or_insert(arc).clone()
    }

    /// Weights of the coarse lattice nodes on `axis` for the point `x`, with the
    /// index of the first node. `None` when no fine node is inside the support.
    ///
    /// The kernel is sampled on a lattice `FINE` times finer than the one carrying
    /// values of `f`; fine-node values come from the 4-point Lagrange interpolant
    /// of the coarse values, so each fine weight is spread over four coarse nodes.
    fn axis_weights<T: Num>(&self, axis: usize, x: f64) -> Option<(i64, Vec<T>)> {
        let n = FINE as i64;
        let dyf = self.dy / FINE as f64;
        let lo = ((x - self.half - self.origin[axis]) / dyf).floor() as i64;
        let hi = ((x + self.half - self.origin[axis]) / dyf).ceil() as i64;
        let mut fine = Vec::new();
        for i in lo..=hi {
            let u = (self.origin[axis] + i as f64 * dyf - x) / self.half;
            if u * u < 1.0 {
                fine.push((i, T::affine(u, -1.0 / self.half)));
            }
        }
        let (i0, i1) = (fine.first()?.0, fine.last()?.0);
        let w: Vec<T> = fine.iter().map(|&(_, u)| T::profile(u * u)).collect();
        let zero = T::from(0.0);
        let (mut s0, mut s1, mut s2) = (zero, zero, zero);
        for (&wk, &(_, u)) in w.iter().zip(&fine) {
            s0 = s0 + wk;
            s1 = s1 + wk * u;
            s2 = s2 + wk * u * u;
        }
        // affine-exact weights on the fine lattice
        let det = s0 * s2 - s1 * s1;
        let exact = det.value() > 1e-9 * s0.value() * s2.value();
        let first = i0.div_euclid(n) - 1;
        let last = i1.div_euclid(n) + 2;
        let mut out = vec![zero; (last - first + 1) as usize];
        let table = lagrange_table();
        for (&wk, &(i, u)) in w.iter().zip(&fine) {
            let a = if exact { wk * (s2 - s1 * u) / det } else { wk / s0 };
            let (k, j) = (i.div_euclid(n), i.rem_euclid(n) as usize);
            for (o, &l) in table[j].iter().enumerate() {
                if l != 0.0 {
                    let slot = (k - 1 + o as i64 - first) as usize;
                    out[slot] = out[slot] + a * T::from(l);
                }
            }
        }
        Some((first, out))
    }

    /// `Σ_k Π_a w_a[k_a - lo_a] f(y_k)` over the node box starting at `lo`.
    fn weighted(&self, lo: &[i64], w: &[&[f64]], out: &mut [f64]) {
        let d = lo.len();
        let m = self.f.value_dim;
        let b = self.block;
        let hi: Vec<i64> = (0..d).map(|a| lo[a] + w[a].len() as i64 - 1).collect();
        let blo: Vec<i64> = lo.iter().map(|&v| floor_div(v, b)).collect();
        let bhi: Vec<i64> = hi.iter().map(|&v| floor_div(v, b)).collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut bidx = blo.clone();
        loop {
            let mut key = [0i64; 3];
            key[..d].copy_from_slice(&bidx);
            let vals = self.block_values(key);
            let klo: Vec<i64> = (0..d).map(|a| lo[a].max(bidx[a] * b)).collect();
            let khi: Vec<i64> = (0..d).map(|a| hi[a].min(bidx[a] * b + b - 1)).collect();
            let mut k = klo.clone();
            loop {
                let mut wt = 1.0;
                let mut local = 0usize;
                for a in 0..d {
                    wt *= w[a][(k[a] - lo[a]) as usize];
                    local = local * b as usize + (k[a] - bidx[a] * b) as usize;
                }
                if wt != 0.0 {
                    for c in 0..m {
                        out[c] += wt * vals[local * m + c];
                    }
                }
                if !advance(&mut k, &klo, &khi) {
                    break;
                }
            }
            if !advance(&mut bidx, &blo, &bhi) {
                break;
            }
        }
    }

    fn fallback(&self, x: &[f64], out: &mut [f64]) {
        let mut xc = x.to_vec();
        self.f.domain.project(x, &mut xc);
        self.f.eval_into(&xc, out);
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut lo = Vec::with_capacity(x.len());
        let mut ws = Vec::with_capacity(x.len());
        for (a, &v) in x.iter().enumerate() {
            match self.axis_weights::<f64>(a, v) {
                Some((k, w)) => {
                    lo.push(k);
                    ws.push(w);
                }
                None => return self.fallback(x, out),
            }
        }
        let refs: Vec<&[f64]> = ws.iter().map(|w| w.as_slice()).collect();
        self.weighted(&lo, &refs, out);
    }

    fn jet(&self, x: &[f64], out: &mut Jet) {
        let d = x.len();
        let m = self.f.value_dim;
        *out = Jet::zeros(d, m);
        let mut lo = Vec::with_capacity(d);
        // per axis: value, first and second derivative weights
        let mut ws: Vec<[Vec<f64>; 3]> = Vec::with_capacity(d);
        for (a, &v) in x.iter().enumerate() {
            match self.axis_weights::<D2>(a, v) {
                Some((k, w)) => {
                    lo.push(k);
                    ws.push([w.iter().map(|t| t.0).collect(), w.iter().map(|t| t.1).collect(), w.iter().map(|t| t.2).collect()]);
                }
                None => return self.fallback(x, &mut out.value),
            }
        }
        let mut buf = vec![0.0; m];
        let run = |orders: &[usize], buf: &mut Vec<f64>| {
            let refs: Vec<&[f64]> = (0..d).map(|a| ws[a][orders[a]].as_slice()).collect();
            self.weighted(&lo, &refs, buf);
        };
        let mut orders = vec![0usize; d];
        run(&orders, &mut buf);
        out.value.copy_from_slice(&buf);
        for i in 0..d {
            for j in i..d {
                orders.iter_mut().for_each(|o| *o = 0);
                orders[i] += 1;
                orders[j] += 1;
                run(&orders, &mut buf);
                for c in 0..m {
                    out.hess[(c * d + i) * d + j] = buf[c];
                    out.hess[(c * d + j) * d + i] = buf[c];
                }
            }
            orders.iter_mut().for_each(|o| *o = 0);
            orders[i] = 1;
            run(&orders, &mut buf);
            for c in 0..m {
                out.grad[c * d + i] = buf[c];
            }
        }
    }
}

/// Mollification of `f` with the bump kernel of the given radius.
///
/// `quadrature_points` is the number of lattice nodes per axis across one kernel
/// diameter. Beyond its domain `f` is extended by nearest-point projection.
pub fn mollify(f: &ChartField, radius: f64, quadrature_points: usize) -> Result<ChartField> {
    if quadrature_points < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 quadrature points, got {quadrature_points}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("mollifier radius must be positive, got {radius}")));
    }
    let d = f.dim();
    if d == 0 || d > 3 {
        return Err(Error::InvalidArgument(format!("unsupported dimension {d}")));
    }
    let origin = f.domain.axes.iter().map(|i| if i.lo.is_finite() { i.lo } else { 0.0 }).collect();
    let block = match d {
        1 => 64,
        2 => 16,
        _ => 8,
    };
    let half = radius / (d as f64).sqrt();
    let mol = Arc::new(Mollifier {
        f: f.clone(),
        half,
        dy: 2.0 * half / quadrature_points as f64,
        origin,
        block,
        cache: DashMap::new(),
    });
    let m2 = mol.clone();
    Ok(ChartField::new(f.domain.clone(), f.value_dim, move |x, out| mol.eval(x, out))
        .with_smooth(RegionExpr::All)
        .with_jet(2, move |x, j| m2.jet(x, j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;

    fn unit() -> Rect {
        Rect::closed(&[0.0], &[1.0])
    }

    #[test]
    fn reproduces_constants() {
        let f = ChartField::constant(unit(), vec![3.25]);
        let g = mollify(&f, 0.1, 64).unwrap();
        for x in [0.0, 0.03, 0.5, 0.97, 1.0] {
            assert!((g.eval1(&[x]) - 3.25).abs() < 1e-10);
        }
    }

    #[test]
    fn reproduces_linear_in_interior() {
        let f = ChartField::scalar(unit(), |x| 1.7 * x[0]);
        let g = mollify(&f, 0.1, DEFAULT_QUADRATURE_1D).unwrap();
        for x in [0.2, 0.33, 0.5, 0.8] {
            assert!((g.eval1(&[x]) - 1.7 * x).abs() < 1e-8);
        }
    }

    // ∫ K_{0.1}(s) |s| ds, frozen from an independent adaptive quadrature.
    const ABS_MOMENT_01: f64 = 0.03344539977099741;

    #[test]
    fn kink_value() {
        let f = ChartField::scalar(unit(), |x| (x[0] - 0.5).abs());
        let err = |q| mollify(&f, 0.1, q).unwrap().eval1(&[0.5]) - ABS_MOMENT_01;
        let (e1, e2) = (err(256), err(512));
        assert!(e2.abs() < 1e-6, "{e2}");
        // second order in the lattice spacing
        assert!((e1 / e2 - 4.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn too_few_points() {
        let f = ChartField::constant(unit(), vec![0.0]);
        assert!(matches!(mollify(&f, 0.1, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn jet_agrees_with_differences() {
        let f = ChartField::new(Rect::closed(&[0.0, 0.0], &[1.0, 1.0]), 1, |x, o| {
            o[0] = (x[0] - 0.5).abs() + x[1] * x[0]
        });
        let g = mollify(&f, 0.1, 32).unwrap();
        let x = [0.47, 0.6];
        let j = g.jet(&x).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (g.eval1(&xp) - g.eval1(&xm)) / (2.0 * h);
            assert!((fd - j.grad[i]).abs() < 1e-6, "{fd} {}", j.grad[i]);
            let fdd = (g.eval1(&xp) - 2.0 * g.eval1(&x) + g.eval1(&xm)) / (h * h);
            assert!((fdd - j.hess[i * 2 + i]).abs() < 1e-2 * (1.0 + fdd.abs()), "{fdd} {}", j.hess[i * 3]);
        }
        assert!((j.value[0] - g.eval1(&x)).abs() < 1e-14);
    }

    #[test]
    fn locality() {
        let f = ChartField::scalar(unit(), |x| if x[0] < 0.3 { 2.0 } else { (x[0] - 0.3) * 5.0 + 2.0 });
        let g = mollify(&f, 0.05, 128).unwrap();
        assert!((g.eval1(&[0.2]) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn vector_valued() {
        let f = ChartField::new(unit(), 2, |x, o| {
            o[0] = 1.0;
            o[1] = x[0];
        });
        let g = mollify(&f, 0.05, 128).unwrap();
        let v = g.eval(&[0.5]);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-8);
    }
}
