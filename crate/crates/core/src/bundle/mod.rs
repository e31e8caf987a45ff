//! Locally trivial bundles with trivializations over the base charts, fibre charts,
//! sections and tubes around sections.

mod catalog;

pub use catalog::{
    builtin_bundle, builtin_section, builtin_width, BUNDLE_CATALOG, SECTION_CATALOG, WIDTH_CATALOG,
};

use crate::error::{Error, Result};
use crate::fields::{ChartField, ConvexSet};
use crate::geom::{Rect, RegionExpr};
use crate::manifold::{interval, max_abs_diff, product, Atlas, GridPoint, Region};
use serde::Serialize;
use std::f64::consts::PI;

/// Wraps an angle difference into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI {
        y + 2.0 * PI
    } else if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Typical fibre.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Fibre {
    Line { dim: usize },
    /// Angles, values stored as real lifts.
    Circle,
}

impl Fibre {
    pub fn dim(&self) -> usize {
        match self {
            Fibre::Line { dim } => *dim,
            Fibre::Circle => 1,
        }
    }

    /// Distance between two fibre values (geodesic for the circle).
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Fibre::Line { .. } => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Fibre::Circle => wrap_angle(a[0] - b[0]).abs(),
        }
    }

    /// Componentwise difference `a - b`, wrapped for the circle.
    pub fn diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match self {
            Fibre::Line { .. } => a.iter().zip(b).map(|(x, y)| x - y).collect(),
            Fibre::Circle => vec![wrap_angle(a[0] - b[0])],
        }
    }

    /// Representative of `v` closest to `near`.
    pub fn relift(&self, v: &[f64], near: &[f64]) -> Vec<f64> {
        match self {
            Fibre::Line { .. } => v.to_vec(),
            Fibre::Circle => vec![near[0] + wrap_angle(v[0] - near[0])],
        }
    }
}

/// Chart of the typical fibre onto a convex set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FibreChart {
    Euclidean { dim: usize },
    /// Open arc `(center - half_width, center + half_width)` of the circle.
    Arc { center: f64, half_width: f64 },
}

impl FibreChart {
    pub fn to_chart(&self, v: &[f64]) -> Vec<f64> {
        match self {
            FibreChart::Euclidean { .. } => v.to_vec(),
            FibreChart::Arc { center, .. } => vec![center + wrap_angle(v[0] - center)],
        }
    }

    /// Fibre value with chart coordinate `z`, lifted next to `near`.
    pub fn from_chart_near(&self, z: &[f64], near: &[f64]) -> Vec<f64> {
        match self {
            FibreChart::Euclidean { .. } => z.to_vec(),
            FibreChart::Arc { .. } => {
                let zn = self.to_chart(near);
                if zn[0] == z[0] {
                    return near.to_vec();
                }
                vec![near[0] + wrap_angle(z[0] - zn[0])]
            }
        }
    }

    pub fn convex_set(&self) -> ConvexSet {
        match self {
            FibreChart::Euclidean { dim } => ConvexSet::Whole(*dim),
            FibreChart::Arc { center, half_width } => {
                ConvexSet::Box(Rect::open(&[center - half_width], &[center + half_width]))
            }
        }
    }

    /// Distance from `v` to the edge of the chart domain (infinite for Euclidean).
    pub fn slack(&self, v: &[f64]) -> f64 {
        match self {
            FibreChart::Euclidean { .. } => f64::INFINITY,
            FibreChart::Arc { center, half_width } => half_width - wrap_angle(v[0] - center).abs(),
        }
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.slack(v) > 0.0
    }
}

/// Fibre part of a transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FibreMap {
    Identity,
    Negate,
}

impl FibreMap {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            FibreMap::Identity => v.to_vec(),
            FibreMap::Negate => v.iter().map(|x| -x).collect(),
        }
    }

    pub fn inverse(&self) -> FibreMap {
        *self
    }
}

/// Bundle whose trivializations are indexed by the base charts.
#[derive(Clone, Debug, Serialize)]
pub struct Bundle {
    pub name: String,
    pub base: Atlas,
    pub fibre: Fibre,
    /// Fibre map of each transition piece of the base atlas.
    pub fibre_maps: Vec<FibreMap>,
    pub fibre_charts: Vec<FibreChart>,
}

impl Bundle {
    pub fn trivial(base: Atlas, fibre: Fibre) -> Self {
        let fibre_charts = match fibre {
            Fibre::Line { dim } => vec![FibreChart::Euclidean { dim }],
            Fibre::Circle => (0..4)
                .map(|k| FibreChart::Arc { center: k as f64 * PI / 2.0, half_width: 0.75 * PI })
                .collect(),
        };
        let name = match fibre {
            Fibre::Line { .. } => "trivial_line",
            Fibre::Circle => "circle_fibre",
        };
        Bundle { name: name.into(), fibre_maps: vec![FibreMap::Identity; base.pieces.len()], base, fibre, fibre_charts }
    }

    pub fn trivializations(&self) -> usize {
        self.base.charts.len()
    }

    /// Image of the point and of the fibre value `v` under the transition `from → to`.
    pub fn transport(&self, from: usize, to: usize, x: &[f64], v: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if from == to {
            return Some((x.to_vec(), v.to_vec()));
        }
        self.base.locate(from, to, x).map(|(p, y)| (y, self.fibre_maps[p].apply(v)))
    }

    /// Bundle over `[0,1] × base` pulled back along the projection.
    pub fn pullback_over_interval(&self) -> Bundle {
        let base = product(&interval(0.0, 1.0), &self.base);
        let n = self.base.charts.len();
        let fibre_maps = base
            .pieces
            .iter()
            .map(|p| {
                self.base
                    .pieces
                    .iter()
                    .position(|q| {
                        q.from == p.from % n && q.to == p.to % n && q.overlap.axes[..] == p.overlap.axes[1..]
                    })
                    .map(|i| self.fibre_maps[i])
                    .unwrap_or(FibreMap::Identity)
            })
            .collect();
        Bundle {
            name: format!("{}_pullback", self.name),
            base,
            fibre: self.fibre.clone(),
            fibre_maps,
            fibre_charts: self.fibre_charts.clone(),
        }
    }
}

/// Section given by one local representative per trivialization.
#[derive(Clone, Debug)]
pub struct Section {
    pub reps: Vec<ChartField>,
    pub smooth: Region,
}

impl Section {
    pub fn eval(&self, chart: usize, x: &[f64]) -> Vec<f64> {
        self.reps[chart].eval(x)
    }

    pub fn with_smooth(mut self, smooth: Region) -> Self {
        self.smooth = smooth;
        self
    }

    /// Same formula in every chart; valid when the formula respects the transitions.
    pub fn from_formula(
        bundle: &Bundle,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + Clone + 'static,
        smooth: Region,
    ) -> Self {
        let m = bundle.fibre.dim();
        let reps = bundle.base.charts.iter().map(|c| ChartField::new(c.domain.clone(), m, f.clone())).collect();
        let mut s = Section { reps, smooth: smooth.clone() };
        s.sync_field_smoothness();
        s
    }

    /// Copies the section's smooth region into the per-chart fields.
    pub fn sync_field_smoothness(&mut self) {
        for (r, e) in self.reps.iter_mut().zip(&self.smooth.exprs) {
            r.smooth = e.clone();
        }
    }

    /// Largest disagreement between representatives on overlaps, with its location.
    pub fn compatibility_error(&self, bundle: &Bundle, res: usize) -> (f64, usize, Vec<f64>) {
        let mut worst = (0.0, 0, vec![]);
        for c in &bundle.base.charts {
            for x in c.grid(res) {
                let v = self.eval(c.id, &x);
                for d in &bundle.base.charts {
                    if d.id == c.id {
                        continue;
                    }
                    if let Some((y, w)) = bundle.transport(c.id, d.id, &x, &v) {
                        let e = bundle.fibre.distance(&w, &self.eval(d.id, &y));
                        if e > worst.0 {
                            worst = (e, c.id, x.clone());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Local representative over trivialization `a`.
pub fn section_to_fibre_field(section: &Section, a: usize) -> ChartField {
    let mut f = section.reps[a].clone();
    f.smooth = section.smooth.exprs[a].clone();
    f
}

/// Representative in fibre-chart coordinates.
pub fn to_fibre_chart(field: &ChartField, z: &FibreChart) -> ChartField {
    let f = field.clone();
    let zc = z.clone();
    ChartField::new(field.domain.clone(), field.value_dim, move |x, out| {
        let v = f.eval(x);
        out.copy_from_slice(&zc.to_chart(&v));
    })
    .with_smooth(field.smooth.clone())
}

/// Section equal to the field (in chart coordinates of `z`) over `glue` (closed,
/// in coordinates of chart `a`) and to `fallback` elsewhere.
///
/// Near the rim of `glue` (width `seam_band`) the field must agree with the
/// fallback to within 1e-9 at the given points of chart `a`.
pub fn fibre_field_to_section(
    bundle: &Bundle,
    field: &ChartField,
    z: &FibreChart,
    a: usize,
    glue: &RegionExpr,
    fallback: &Section,
    seam_points: &[Vec<f64>],
    seam_band: f64,
) -> Result<Section> {
    if matches!(glue, RegionExpr::Empty) {
        return Ok(fallback.clone());
    }
    let frame = bundle.base.charts[a].frame();
    let mut w = false;
    let inner = glue.shrink(seam_band, &frame, &mut w);
    for x in seam_points {
        if !glue.contains(x) || inner.contains(x) {
            continue;
        }
        let fb = z.to_chart(&fallback.eval(a, x));
        let fv = field.eval(x);
        let dev = max_abs_diff(&fb, &fv);
        if !(dev <= 1e-9) {
            return Err(Error::SeamMismatch { chart: a, point: x.clone(), deviation: dev });
        }
    }
    let shared = std::sync::Arc::new((bundle.clone(), field.clone(), z.clone(), glue.clone(), fallback.clone()));
    let reps = (0..bundle.trivializations())
        .map(|j| {
            let sh = shared.clone();
            ChartField::new(fallback.reps[j].domain.clone(), fallback.reps[j].value_dim, move |x, out| {
                let (b, f, z, g, fb) = &*sh;
                out.copy_from_slice(&glued_value(b, &|y| f.eval(y), z, a, g, fb, j, x));
            })
        })
        .collect();
    let g = Region::from_chart(&bundle.base, a, glue.clone());
    let sf = Region::from_chart(&bundle.base, a, RegionExpr::intersection(vec![glue.clone(), field.smooth.clone()]));
    let mut s = Section { reps, smooth: fallback.smooth.difference(&g).union(&sf) };
    s.sync_field_smoothness();
    Ok(s)
}

/// Value in trivialization `j` at `x` of the section that equals `field` (fibre
/// chart `z`, base chart `a`) over `glue` and `fallback` elsewhere. Where the field
/// reproduces the fallback the fallback's own value is returned unchanged.
#[allow(clippy::too_many_arguments)]
pub fn glued_value(
    bundle: &Bundle,
    field: &dyn Fn(&[f64]) -> Vec<f64>,
    z: &FibreChart,
    a: usize,
    glue: &RegionExpr,
    fallback: &Section,
    j: usize,
    x: &[f64],
) -> Vec<f64> {
    let located = if j == a { Some((usize::MAX, x.to_vec())) } else { bundle.base.locate(j, a, x) };
    if let Some((piece, xa)) = located {
        if glue.contains(&xa) {
            let fa = fallback.eval(a, &xa);
            let zv = field(&xa);
            if zv == z.to_chart(&fa) {
                return if j == a { fa } else { fallback.eval(j, x) };
            }
            let v = z.from_chart_near(&zv, &fa);
            if j == a {
                return v;
            }
            let w = bundle.fibre_maps[piece].inverse().apply(&v);
            return bundle.fibre.relift(&w, &fallback.eval(j, x));
        }
    }
    fallback.eval(j, x)
}

/// Tube of fibre-distance width around a section.
#[derive(Clone, Debug)]
pub struct Tube {
    pub sigma: Section,
    /// Positive scalar field per chart.
    pub width: Vec<ChartField>,
}

impl Tube {
    pub fn width_at(&self, chart: usize, x: &[f64]) -> f64 {
        self.width[chart].eval1(x)
    }

    pub fn constant(bundle: &Bundle, sigma: Section, w: f64) -> Self {
        let width = bundle.base.charts.iter().map(|c| ChartField::constant(c.domain.clone(), vec![w])).collect();
        Tube { sigma, width }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TubeReport {
    pub max_ratio: f64,
    /// Largest distance to `σ`, wherever it occurs.
    pub max_distance: f64,
    pub chart: usize,
    pub point: Vec<f64>,
}

/// Largest `distance(candidate, σ) / ε` over the points.
pub fn tube_contains(bundle: &Bundle, tube: &Tube, candidate: &Section, points: &[GridPoint]) -> TubeReport {
    use rayon::prelude::*;
    let dist: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let d = bundle.fibre.distance(&candidate.eval(p.chart, &p.x), &tube.sigma.eval(p.chart, &p.x));
            (d, d / tube.width_at(p.chart, &p.x))
        })
        .collect();
    let mut rep = TubeReport { max_ratio: 0.0, max_distance: 0.0, chart: 0, point: vec![] };
    for (p, (d, r)) in points.iter().zip(dist) {
        rep.max_distance = rep.max_distance.max(d);
        if r > rep.max_ratio || rep.point.is_empty() {
            rep.max_ratio = r;
            rep.chart = p.chart;
            rep.point = p.x.clone();
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{builtin_manifold, circle};
    use std::collections::BTreeMap;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn arc_chart_round_trip() {
        let z = FibreChart::Arc { center: PI / 2.0, half_width: 0.75 * PI };
        for v in [-0.5, 0.0, 1.0, 2.0, 3.5] {
            let near = v + 4.0 * PI;
            let back = z.from_chart_near(&z.to_chart(&[v]), &[near]);
            assert!((back[0] - near).abs() < 1e-12);
        }
        assert!(z.contains(&[0.0]) && !z.contains(&[-PI / 2.0]));
    }

    #[test]
    fn trivial_projection() {
        let a = builtin_manifold("interval", &BTreeMap::new()).unwrap();
        let b = Bundle::trivial(a.clone(), Fibre::Line { dim: 1 });
        let s = Section::from_formula(&b, |x, o| o[0] = x[0] * x[0], Region::all(&a));
        let f = section_to_fibre_field(&s, 0);
        assert_eq!(f.eval1(&[0.3]), 0.09);
    }

    #[test]
    fn mobius_sign_flip() {
        let b = builtin_bundle("mobius_line", circle()).unwrap();
        let zero = Section::from_formula(&b, |_, o| o[0] = 0.0, Region::all(&b.base));
        assert_eq!(zero.compatibility_error(&b, 33).0, 0.0);
        // constant 1 in trivialization 0, carried to trivialization 1
        let (y, v) = b.transport(0, 1, &[PI], &[1.0]).unwrap();
        assert!((y[0] + PI).abs() < 1e-15);
        assert_eq!(v, vec![-1.0]);
        let (_, v) = b.transport(0, 1, &[0.1], &[1.0]).unwrap();
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn glue_everything_reproduces() {
        let a = builtin_manifold("interval", &BTreeMap::new()).unwrap();
        let b = Bundle::trivial(a.clone(), Fibre::Line { dim: 1 });
        let s = Section::from_formula(&b, |x, o| o[0] = (x[0] * 3.0).cos(), Region::all(&a));
        let other = Section::from_formula(&b, |_, o| o[0] = 7.0, Region::all(&a));
        let f = section_to_fibre_field(&s, 0);
        let z = &b.fibre_charts[0];
        let t = fibre_field_to_section(&b, &f, z, 0, &RegionExpr::All, &other, &[], 0.01).unwrap();
        for k in 0..=10 {
            let x = [k as f64 / 10.0];
            assert!((t.eval(0, &x)[0] - s.eval(0, &x)[0]).abs() < 1e-12);
        }
        let e = fibre_field_to_section(&b, &f, z, 0, &RegionExpr::Empty, &other, &[], 0.01).unwrap();
        assert_eq!(e.eval(0, &[0.4]), vec![7.0]);
    }

    #[test]
    fn seam_mismatch_detected() {
        let a = builtin_manifold("interval", &BTreeMap::new()).unwrap();
        let b = Bundle::trivial(a.clone(), Fibre::Line { dim: 1 });
        let s = Section::from_formula(&b, |x, o| o[0] = x[0], Region::all(&a));
        let f = ChartField::constant(a.charts[0].domain.clone(), vec![5.0]);
        let glue = RegionExpr::rect(Rect::closed(&[0.25], &[0.75]));
        let pts = a.charts[0].grid(101);
        let r = fibre_field_to_section(&b, &f, &b.fibre_charts[0], 0, &glue, &s, &pts, 0.02);
        assert!(matches!(r, Err(Error::SeamMismatch { .. })));
    }

    #[test]
    fn tube_ratios() {
        let a = builtin_manifold("interval", &BTreeMap::new()).unwrap();
        let b = Bundle::trivial(a.clone(), Fibre::Line { dim: 1 });
        let s = Section::from_formula(&b, |x, o| o[0] = x[0].sin(), Region::all(&a));
        let moved = Section::from_formula(&b, |x, o| o[0] = x[0].sin() + 0.01, Region::all(&a));
        let tube = Tube::constant(&b, s.clone(), 0.02);
        let g = a.sample_grid(17);
        assert_eq!(tube_contains(&b, &tube, &s, &g).max_ratio, 0.0);
        assert!((tube_contains(&b, &tube, &moved, &g).max_ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pullback_keeps_sign_flip() {
        let b = builtin_bundle("mobius_line", circle()).unwrap();
        let p = b.pullback_over_interval();
        assert_eq!(p.base.charts.len(), 2);
        let (_, v) = p.transport(0, 1, &[0.5, PI], &[2.0]).unwrap();
        assert_eq!(v, vec![-2.0]);
        let (_, v) = p.transport(0, 1, &[0.5, 0.0], &[2.0]).unwrap();
        assert_eq!(v, vec![2.0]);
    }
}
