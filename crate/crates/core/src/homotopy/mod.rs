//! Homotopies of sections: convex steps, concatenation, flat reparametrization,
//! base-point flattening and smoothing through the pull-back bundle.

mod catalog;
mod smooth;

pub use catalog::{builtin_homotopy, HOMOTOPY_CATALOG};
pub use smooth::{basepoint_cutoff, smooth_homotopy, HomotopyOptions, HomotopyOutcome};

use crate::bundle::{glued_value, Bundle, FibreChart, Section};
use crate::error::{Error, Result};
use crate::fields::{bump_profile, gauss_legendre, ChartField};
use crate::geom::{Interval, Rect, RegionExpr};
use crate::manifold::{max_abs_diff, GridPoint, Region};
use std::fmt;
use std::sync::{Arc, OnceLock};

pub type TimeEval = Arc<dyn Fn(f64, usize, &[f64], &mut [f64]) + Send + Sync>;

/// Family of sections `F(t, ·)`, `t ∈ [0, 1]`, evaluated per trivialization.
#[derive(Clone)]
pub struct Homotopy {
    pub domains: Vec<Rect>,
    pub value_dim: usize,
    eval: TimeEval,
    /// Base points where `F(t, x)` does not depend on `t`.
    pub fixed: Region,
    /// Where `F` is jointly smooth, per chart in `(t, x)` coordinates.
    pub smooth: Region,
}

impl fmt::Debug for Homotopy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Homotopy").field("domains", &self.domains).field("value_dim", &self.value_dim).finish()
    }
}

/// `σ`'s smooth region times the time axis; parts that cannot be lifted are dropped.
pub fn lift_region(r: &Region) -> Region {
    Region::from_exprs(r.exprs.iter().map(|e| e.prepend_axis().unwrap_or(RegionExpr::Empty)).collect())
}

impl Homotopy {
    pub fn new(
        bundle: &Bundle,
        eval: impl Fn(f64, usize, &[f64], &mut [f64]) + Send + Sync + 'static,
        fixed: Region,
        smooth: Region,
    ) -> Self {
        Homotopy {
            domains: bundle.base.charts.iter().map(|c| c.domain.clone()).collect(),
            value_dim: bundle.fibre.dim(),
            eval: Arc::new(eval),
            fixed,
            smooth,
        }
    }

    pub fn constant(bundle: &Bundle, s: &Section) -> Self {
        let s2 = s.clone();
        Homotopy::new(bundle, move |_, c, x, out| s2.reps[c].eval_into(x, out), Region::all(&bundle.base), lift_region(&s.smooth))
    }

    pub fn eval(&self, t: f64, chart: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.value_dim];
        (self.eval)(t, chart, x, &mut out);
        out
    }

    pub fn evaluator(&self) -> TimeEval {
        self.eval.clone()
    }

    /// The section `F(t, ·)`. Its smooth region is not tracked.
    pub fn slice(&self, t: f64) -> Section {
        let reps = self
            .domains
            .iter()
            .enumerate()
            .map(|(c, d)| {
                let e = self.eval.clone();
                ChartField::new(d.clone(), self.value_dim, move |x, out| e(t, c, x, out))
            })
            .collect();
        Section { reps, smooth: Region::from_exprs(vec![RegionExpr::Empty; self.domains.len()]) }
    }

    /// `F` as a section of the pull-back bundle over `[0,1] × M`.
    pub fn to_pullback_section(&self, pull: &Bundle) -> Section {
        let reps = pull
            .base
            .charts
            .iter()
            .map(|c| {
                let e = self.eval.clone();
                let id = c.id;
                ChartField::new(c.domain.clone(), self.value_dim, move |y, out| e(y[0], id, &y[1..], out))
            })
            .collect();
        let mut s = Section { reps, smooth: self.smooth.clone() };
        s.sync_field_smoothness();
        s
    }

    /// Inverse of [`Homotopy::to_pullback_section`].
    pub fn from_pullback_section(bundle: &Bundle, s: &Section, fixed: Region) -> Self {
        let s2 = s.clone();
        Homotopy::new(
            bundle,
            move |t, c, x, out| {
                let mut y = Vec::with_capacity(x.len() + 1);
                y.push(t);
                y.extend_from_slice(x);
                s2.reps[c].eval_into(&y, out)
            },
            fixed,
            s.smooth.clone(),
        )
    }
}

/// `(1-t) g + t h`, returning `g` and `h` themselves at the ends and when equal.
pub fn lerp(t: f64, g: &[f64], h: &[f64]) -> Vec<f64> {
    if t == 0.0 || g == h {
        return g.to_vec();
    }
    if t == 1.0 {
        return h.to_vec();
    }
    g.iter().zip(h).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

/// Convex interpolation from `g` to `h` (fibre-chart coordinates of `z`, base chart
/// `a`) over `glue`, equal to `fallback` elsewhere.
///
/// `g` and `h` must agree at the given points of chart `a` outside `glue`.
pub fn step_homotopy(
    bundle: &Bundle,
    g: &ChartField,
    h: &ChartField,
    z: &FibreChart,
    a: usize,
    glue: &RegionExpr,
    fallback: &Section,
    points: &[Vec<f64>],
) -> Result<Homotopy> {
    for x in points {
        if glue.contains(x) || !g.domain.contains_tol(x, 0.0) {
            continue;
        }
        let dev = max_abs_diff(&g.eval(x), &h.eval(x));
        if !(dev <= 1e-9) {
            return Err(Error::SeamMismatch { chart: a, point: x.clone(), deviation: dev });
        }
    }
    let shared = Arc::new((bundle.clone(), g.clone(), h.clone(), z.clone(), glue.clone(), fallback.clone()));
    let fixed = Region::all(&bundle.base).difference(&Region::from_chart(&bundle.base, a, glue.clone()));
    Ok(Homotopy::new(
        bundle,
        move |t, j, x, out| {
            let (b, g, h, z, glue, fb) = &*shared;
            let field = |y: &[f64]| lerp(t, &g.eval(y), &h.eval(y));
            out.copy_from_slice(&glued_value(b, &field, z, a, glue, fb, j, x));
        },
        fixed,
        Region::empty(&bundle.base),
    ))
}

/// Runs the steps one after another, step `a` (from 1) on `[(a-1)/K, a/K]`.
///
/// Consecutive steps must agree bit for bit at the junction on `points`.
pub fn concat_homotopies(bundle: &Bundle, steps: Vec<Homotopy>, points: &[GridPoint]) -> Result<Homotopy> {
    let k = steps.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no homotopies to concatenate".into()));
    }
    for i in 0..k - 1 {
        for p in points {
            if steps[i].eval(1.0, p.chart, &p.x) != steps[i + 1].eval(0.0, p.chart, &p.x) {
                return Err(Error::ConcatMismatch { junction: i + 1 });
            }
        }
    }
    if k == 1 {
        return Ok(steps.into_iter().next().unwrap());
    }
    let fixed = steps.iter().skip(1).fold(steps[0].fixed.clone(), |acc, s| acc.intersection(&s.fixed));
    let evals: Vec<TimeEval> = steps.iter().map(|s| s.evaluator()).collect();
    let kf = k as f64;
    Ok(Homotopy::new(
        bundle,
        move |t, c, x, out| {
            let a = ((t * kf).floor().max(0.0) as usize).min(k - 1);
            let s = (t * kf - a as f64).clamp(0.0, 1.0);
            evals[a](s, c, x, out)
        },
        fixed,
        Region::empty(&bundle.base),
    ))
}

/// `∫_{-1}^{u} ψ(v²) dv` by composite Gauss–Legendre, smooth in `u`.
fn bump_primitive(u: f64) -> f64 {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| gauss_legendre(12));
    let panels = 8;
    let w = (u + 1.0) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = -1.0 + (p as f64 + 0.5) * w;
        for (xi, wi) in nodes.iter().zip(weights) {
            let v: f64 = c + 0.5 * w * xi;
            s += wi * 0.5 * w * bump_profile(v * v).0;
        }
    }
    s
}

/// Smooth monotone step on `[0,1]`: 0 on `[0, ε]`, 1 on `[1-ε, 1]`, `γ(1/2) = 1/2`
/// and `γ(1-t) = 1 - γ(t)`. Built from the primitive of the bump on `[ε, 1-ε]`.
pub fn flat_step(eps: f64) -> impl Fn(f64) -> f64 + Clone + Send + Sync {
    let half = bump_primitive(0.0);
    move |t: f64| {
        let left = |t: f64| {
            if t <= eps {
                return 0.0;
            }
            let u = ((2.0 * t - 1.0) / (1.0 - 2.0 * eps)).min(0.0);
            0.5 * bump_primitive(u) / half
        };
        if t < 0.5 {
            left(t)
        } else if t == 0.5 {
            0.5
        } else if t >= 1.0 - eps {
            1.0
        } else {
            1.0 - left(1.0 - t)
        }
    }
}

/// Time `t` with `γ(t) = s`, by bisection.
fn flat_step_inverse(gamma: &impl Fn(f64) -> f64, s: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if gamma(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn map_time(e: &RegionExpr, f: &impl Fn(f64) -> f64) -> RegionExpr {
    match e {
        RegionExpr::Empty | RegionExpr::All => e.clone(),
        RegionExpr::Shape(crate::geom::Shape::Rect(r)) => {
            let mut axes = r.axes.clone();
            let i = &r.axes[0];
            axes[0] = Interval { lo: if i.lo.is_finite() { f(i.lo) } else { i.lo }, hi: if i.hi.is_finite() { f(i.hi) } else { i.hi }, ..i.clone() };
            RegionExpr::rect(Rect::new(axes))
        }
        RegionExpr::Union(v) => RegionExpr::union(v.iter().map(|x| map_time(x, f)).collect()),
        RegionExpr::Intersection(v) => RegionExpr::intersection(v.iter().map(|x| map_time(x, f)).collect()),
        RegionExpr::Difference(a, b) => RegionExpr::difference(map_time(a, f), map_time(b, f)),
        // other shapes are not transported; dropping them keeps the claim conservative
        // only inside unions, so they become empty
        _ => RegionExpr::Empty,
    }
}

/// `F''(t, x) = F(γ(t), x)` with the flat step `γ` of [`flat_step`].
pub fn reparametrize_flat(f: &Homotopy, eps: f64) -> Result<Homotopy> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!("flat margin must lie in (0, 1/2), got {eps}")));
    }
    let gamma = flat_step(eps);
    let inner = f.evaluator();
    let g2 = gamma.clone();
    let inv = move |s: f64| if s <= 0.0 { 0.0 } else if s >= 1.0 { 1.0 } else { flat_step_inverse(&g2, s) };
    let smooth = Region::from_exprs(f.smooth.exprs.iter().map(|e| map_time(e, &inv)).collect());
    Ok(Homotopy {
        domains: f.domains.clone(),
        value_dim: f.value_dim,
        eval: Arc::new(move |t, c, x, out| inner(gamma(t), c, x, out)),
        fixed: f.fixed.clone(),
        smooth,
    })
}

/// `G(t, x) = Z⁻¹((1 - tλ(x)) z(σ(x)) + tλ(x) z(σ(x₀)))` over `support` (chart `chart`
/// coordinates), `σ` elsewhere. Returns `σ' = G(1, ·)` and `G`.
pub fn basepoint_flatten(
    bundle: &Bundle,
    sigma: &Section,
    chart: usize,
    x0: &[f64],
    lambda: &ChartField,
    z: &FibreChart,
    support: &RegionExpr,
    points: &[Vec<f64>],
) -> Result<(Section, Homotopy)> {
    for x in points.iter().filter(|x| support.contains(x)) {
        if !z.contains(&sigma.eval(chart, x)) {
            return Err(Error::ChartOverflow { chart, point: x.clone() });
        }
    }
    if !z.contains(&sigma.eval(chart, x0)) {
        return Err(Error::ChartOverflow { chart, point: x0.to_vec() });
    }
    let b = z.to_chart(&sigma.eval(chart, x0));
    let shared = Arc::new((bundle.clone(), lambda.clone(), z.clone(), support.clone(), sigma.clone(), b));
    let fixed = Region::all(&bundle.base).difference(&Region::from_chart(&bundle.base, chart, support.clone()));
    let g = Homotopy::new(
        bundle,
        move |t, j, x, out| {
            let (bd, lam, z, sup, sg, b) = &*shared;
            let field = |y: &[f64]| {
                let a = z.to_chart(&sg.eval(chart, y));
                let s = t * lam.eval1(y);
                if s == 1.0 {
                    return b.clone();
                }
                a.iter().zip(b).map(|(ai, bi)| ai + s * (bi - ai)).collect()
            };
            out.copy_from_slice(&glued_value(bd, &field, z, chart, sup, sg, j, x));
        },
        fixed,
        lift_region(&sigma.smooth),
    );
    let mut s1 = g.slice(1.0);
    s1.smooth = sigma.smooth.clone();
    s1.sync_field_smoothness();
    Ok((s1, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{builtin_bundle, builtin_section, Fibre};
    use crate::manifold::{builtin_manifold, circle};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn line() -> Bundle {
        Bundle::trivial(builtin_manifold("interval", &BTreeMap::new()).unwrap(), Fibre::Line { dim: 1 })
    }

    fn formula(b: &Bundle, f: fn(f64) -> f64) -> Section {
        Section::from_formula(b, move |x, o| o[0] = f(x[0]), Region::all(&b.base))
    }

    #[test]
    fn flat_step_shape() {
        let g = flat_step(0.1);
        assert_eq!(g(0.05), 0.0);
        assert_eq!(g(0.1), 0.0);
        assert_eq!(g(0.95), 1.0);
        assert_eq!(g(0.5), 0.5);
        for k in 1..100 {
            let t = k as f64 / 100.0;
            assert!((g(t) + g(1.0 - t) - 1.0).abs() < 1e-15);
            assert!(g(t + 0.001) >= g(t));
        }
        // continuity across the midpoint
        assert!((g(0.5 - 1e-9) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn step_endpoints_and_midpoint() {
        let b = line();
        let s = formula(&b, |x| (x - 0.5).abs());
        let g = crate::bundle::section_to_fibre_field(&s, 0);
        let h = ChartField::scalar(g.domain.clone(), |x| (x[0] - 0.5).abs() + 0.1 * (0.25 - (x[0] - 0.5).powi(2)).max(0.0));
        let glue = RegionExpr::rect(Rect::closed(&[0.0], &[1.0]));
        let f = step_homotopy(&b, &g, &h, &b.fibre_charts[0], 0, &glue, &s, &[]).unwrap();
        for k in 0..=20 {
            let x = [k as f64 / 20.0];
            assert_eq!(f.eval(0.0, 0, &x), s.eval(0, &x));
            assert_eq!(f.eval(1.0, 0, &x), h.eval(&x));
            let mid = f.eval(0.5, 0, &x)[0];
            assert!((mid - 0.5 * (g.eval1(&x) + h.eval1(&x))).abs() < 1e-15);
        }
    }

    #[test]
    fn step_seam_checked() {
        let b = line();
        let s = formula(&b, |x| x);
        let g = crate::bundle::section_to_fibre_field(&s, 0);
        let h = ChartField::scalar(g.domain.clone(), |x| x[0] + 1.0);
        let glue = RegionExpr::rect(Rect::closed(&[0.4], &[0.6]));
        let pts: Vec<Vec<f64>> = (0..=10).map(|k| vec![k as f64 / 10.0]).collect();
        assert!(matches!(
            step_homotopy(&b, &g, &h, &b.fibre_charts[0], 0, &glue, &s, &pts),
            Err(Error::SeamMismatch { .. })
        ));
    }

    // midpoint of the arcs 0.2 and 2.8 in the chart centred at π/2 is 1.5, not the
    // short-way midpoint through 0 or π
    #[test]
    fn circle_step_midpoint_in_angle_chart() {
        let b = builtin_bundle("circle_fibre", circle()).unwrap();
        let s = Section::from_formula(&b, |_, o| o[0] = 0.2, Region::all(&b.base));
        let z = b.fibre_charts[1].clone();
        let g = to_chart_field(&s, &z);
        let h = ChartField::constant(b.base.charts[0].domain.clone(), vec![2.8]);
        let f = step_homotopy(&b, &g, &h, &z, 0, &RegionExpr::All, &s, &[]).unwrap();
        assert!((f.eval(0.5, 0, &[1.0])[0] - 1.5).abs() < 1e-15);
        // chart 1 sees the same point of the circle
        let v = f.eval(0.5, 1, &[-0.5])[0];
        assert!((crate::bundle::wrap_angle(v - 1.5)).abs() < 1e-15);
    }

    fn to_chart_field(s: &Section, z: &FibreChart) -> ChartField {
        crate::bundle::to_fibre_chart(&s.reps[0], z)
    }

    #[test]
    fn concat_schedule() {
        let b = line();
        let s0 = formula(&b, |_| 0.0);
        let mk = |v0: f64, v1: f64| {
            Homotopy::new(&b, move |t, _, _, o| o[0] = if t == 1.0 { v1 } else { v0 + t * (v1 - v0) }, Region::empty(&b.base), Region::empty(&b.base))
        };
        let pts = b.base.sample_grid(5);
        let f = concat_homotopies(&b, vec![mk(0.0, 1.0), mk(1.0, 2.0), mk(2.0, 3.0)], &pts).unwrap();
        assert_eq!(f.eval(0.0, 0, &[0.3]), vec![0.0]);
        assert_eq!(f.eval(1.0, 0, &[0.3]), vec![3.0]);
        let a = f.eval(1.0 / 3.0 - 1e-9, 0, &[0.3])[0];
        let c = f.eval(1.0 / 3.0 + 1e-9, 0, &[0.3])[0];
        assert!((a - c).abs() < 1e-6);
        assert!(matches!(concat_homotopies(&b, vec![mk(0.0, 1.0), mk(2.0, 3.0)], &pts), Err(Error::ConcatMismatch { junction: 1 })));
        let one = concat_homotopies(&b, vec![Homotopy::constant(&b, &s0)], &pts).unwrap();
        assert_eq!(one.eval(0.7, 0, &[0.1]), vec![0.0]);
    }

    #[test]
    fn flat_reparametrization_ends() {
        let b = line();
        let f = Homotopy::new(&b, |t, _, x, o| o[0] = x[0] + t, Region::empty(&b.base), Region::empty(&b.base));
        let g = reparametrize_flat(&f, 0.2).unwrap();
        assert_eq!(g.eval(0.1, 0, &[0.3]), f.eval(0.0, 0, &[0.3]));
        assert_eq!(g.eval(0.9, 0, &[0.3]), f.eval(1.0, 0, &[0.3]));
        assert_eq!(g.eval(0.5, 0, &[0.3]), f.eval(0.5, 0, &[0.3]));
        assert!(reparametrize_flat(&f, 0.5).is_err());
        assert!(reparametrize_flat(&f, 0.0).is_err());
    }

    #[test]
    fn basepoint_formula() {
        let b = line();
        let s = formula(&b, |x| x * x);
        let dom = b.base.charts[0].domain.clone();
        let lam = ChartField::scalar(dom.clone(), |x| if x[0] < 0.5 { 1.0 } else { 0.5 });
        let (s1, g) =
            basepoint_flatten(&b, &s, 0, &[0.2], &lam, &b.fibre_charts[0], &RegionExpr::All, &[]).unwrap();
        assert_eq!(s1.eval(0, &[0.1]), s.eval(0, &[0.2]));
        // t = 1/2 where λ = 1/2: (1 - 1/4) f(x) + 1/4 f(x0)
        let x = 0.8;
        let want = 0.75 * x * x + 0.25 * 0.2 * 0.2;
        assert!((g.eval(0.5, 0, &[x])[0] - want).abs() < 1e-15);
        for k in 0..=10 {
            assert_eq!(g.eval(k as f64 / 10.0, 0, &[0.2]), vec![0.2 * 0.2]);
        }
    }

    #[test]
    fn basepoint_overflow() {
        let b = builtin_bundle("circle_fibre", circle()).unwrap();
        let s = builtin_section("winding", &BTreeMap::new(), &b).unwrap();
        let lam = ChartField::constant(b.base.charts[0].domain.clone(), vec![1.0]);
        let pts: Vec<Vec<f64>> = b.base.charts[0].grid(33);
        let r = basepoint_flatten(&b, &s, 0, &[PI / 2.0], &lam, &b.fibre_charts[1], &RegionExpr::All, &pts);
        assert!(matches!(r, Err(Error::ChartOverflow { .. })));
    }
}
