//! Grid certificates: exactness, tube containment, finite-difference smoothness,
//! compatibility and winding numbers.

use crate::bundle::{tube_contains, wrap_angle, Bundle, Fibre, Section, Tube, TubeReport};
use crate::error::{Error, Result};
use crate::fields::ChartField;
use crate::geom::Rect;
use crate::homotopy::Homotopy;
use crate::manifold::{Atlas, GridPoint};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    OffUExact,
    Tube,
    Smoothness,
    Compatibility,
    Endpoint,
    Degree,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Location {
    pub chart: usize,
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub passed: bool,
    pub worst_value: f64,
    pub worst_location: Option<Location>,
    pub parameters: BTreeMap<String, f64>,
}

impl Certificate {
    fn new(kind: CertificateKind, passed: bool, worst_value: f64, at: Option<Location>) -> Self {
        Certificate { kind, passed, worst_value, worst_location: at, parameters: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.parameters.insert(key.into(), v);
        self
    }
}

/// Step sizes and order of the difference quotients.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessSteps {
    /// Decreasing, each half of the previous.
    pub steps: Vec<f64>,
    pub order: usize,
    /// Changes below this count as converged.
    pub floor: f64,
}

impl Default for SmoothnessSteps {
    fn default() -> Self {
        SmoothnessSteps { steps: vec![1e-2, 5e-3, 2.5e-3], order: 2, floor: 1e-7 }
    }
}

impl SmoothnessSteps {
    pub fn with_order(order: usize) -> Self {
        SmoothnessSteps { order, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if self.steps.len() < 3 {
            return Err(Error::InvalidArgument("smoothness certificate needs at least three steps".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("difference order must be at least 1".into()));
        }
        for w in self.steps.windows(2) {
            if !(w[0] > 0.0) || (w[1] - 0.5 * w[0]).abs() > 1e-12 * w[0] {
                return Err(Error::InvalidArgument(format!("steps must halve: {:?}", self.steps)));
            }
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Defect of one point: last change of the difference quotient, and whether the
/// changes shrink (or stay below the floor) along the step list.
fn defect_at(
    eval: &dyn Fn(&[f64]) -> Vec<f64>,
    dom: &Rect,
    x: &[f64],
    s: &SmoothnessSteps,
    angular: bool,
) -> (f64, bool) {
    let n = s.order;
    let base = eval(x);
    let mut worst = 0.0f64;
    let mut ok = true;
    for k in 0..x.len() {
        let mut quotients: Vec<Vec<f64>> = Vec::new();
        for &h in &s.steps {
            // central if it fits, else one-sided towards the interior
            let span = n as f64 * h;
            let (i, v) = (&dom.axes[k], x[k]);
            let start = if v - 0.5 * span >= i.lo && v + 0.5 * span <= i.hi {
                v - 0.5 * span
            } else if v + span <= i.hi {
                v
            } else if v - span >= i.lo {
                v - span
            } else {
                quotients.clear();
                break;
            };
            let mut acc = vec![0.0; base.len()];
            let mut y = x.to_vec();
            for j in 0..=n {
                y[k] = start + j as f64 * h;
                let mut f = eval(&y);
                if angular {
                    for (a, b) in f.iter_mut().zip(&base) {
                        *a = b + wrap_angle(*a - b);
                    }
                }
                let w = binomial(n, j) * if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
                for (a, fv) in acc.iter_mut().zip(&f) {
                    *a += w * fv;
                }
            }
            quotients.push(acc.iter().map(|a| a / h.powi(n as i32)).collect());
        }
        if quotients.len() < 3 {
            continue;
        }
        let changes: Vec<f64> = quotients
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect();
        for w in changes.windows(2) {
            if !(w[1] < w[0] || w[1] < s.floor) {
                ok = false;
            }
        }
        worst = worst.max(*changes.last().unwrap());
    }
    (worst, ok)
}

fn fold_defects(items: Vec<(Location, f64, bool)>) -> (bool, f64, Option<Location>) {
    let passed = items.iter().all(|i| i.2);
    let mut best: Option<(Location, f64)> = None;
    for (loc, v, ok) in items {
        if (passed || !ok) && best.as_ref().map_or(true, |b| v > b.1) {
            best = Some((loc, v));
        }
    }
    match best {
        Some((l, v)) => (passed, v, Some(l)),
        None => (passed, 0.0, None),
    }
}

/// Representation of a point farthest from the chart edges that are not faces.
pub fn deepest_representation(atlas: &Atlas, chart: usize, x: &[f64]) -> (usize, Vec<f64>) {
    let depth = |c: usize, y: &[f64]| {
        let ch = &atlas.charts[c];
        ch.domain
            .axes
            .iter()
            .enumerate()
            .map(|(k, i)| {
                let lo = if ch.face_lo[k] { f64::INFINITY } else { y[k] - i.lo };
                let hi = if ch.face_hi[k] { f64::INFINITY } else { i.hi - y[k] };
                lo.min(hi)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = (chart, x.to_vec());
    let mut d = depth(chart, x);
    for (c, y) in atlas.representations(chart, x) {
        let e = depth(c, &y);
        if e > d {
            best = (c, y);
            d = e;
        }
    }
    best
}

/// Difference-quotient defect of a section at one point, as used by
/// [`smoothness_certificate`].
pub fn smoothness_defect(bundle: &Bundle, s: &Section, chart: usize, x: &[f64], steps: &SmoothnessSteps) -> (f64, bool) {
    let (c, y) = deepest_representation(&bundle.base, chart, x);
    let rep = &s.reps[c];
    defect_at(&|p| rep.eval(p), &rep.domain.closure(), &y, steps, matches!(bundle.fibre, Fibre::Circle))
}

/// Passes iff the difference quotients of order `steps.order` converge along
/// the step list at every point and axis.
pub fn smoothness_certificate(bundle: &Bundle, s: &Section, points: &[GridPoint], steps: &SmoothnessSteps) -> Result<Certificate> {
    steps.check()?;
    for p in points {
        if p.chart >= bundle.base.charts.len() || !bundle.base.charts[p.chart].contains(&p.x) {
            return Err(Error::InvalidRegion(format!("point {:?} outside chart {}", p.x, p.chart)));
        }
    }
    let items: Vec<(Location, f64, bool)> = points
        .par_iter()
        .map(|p| {
            let (v, ok) = smoothness_defect(bundle, s, p.chart, &p.x, steps);
            (Location { chart: p.chart, point: p.x.clone(), t: None }, v, ok)
        })
        .collect();
    let (passed, worst, at) = fold_defects(items);
    Ok(Certificate::new(CertificateKind::Smoothness, passed, worst, at)
        .with("order", steps.order as f64)
        .with("min_step", *steps.steps.last().unwrap())
        .with("floor", steps.floor)
        .with("points", points.len() as f64))
}

/// Certificate for a single field at the given points of its domain.
pub fn field_smoothness_certificate(f: &ChartField, points: &[Vec<f64>], steps: &SmoothnessSteps) -> Result<Certificate> {
    steps.check()?;
    let dom = f.domain.closure();
    if let Some(p) = points.iter().find(|p| !dom.contains(p)) {
        return Err(Error::InvalidRegion(format!("point {p:?} outside {}", dom.describe())));
    }
    let items = points
        .par_iter()
        .map(|x| {
            let (v, ok) = defect_at(&|p| f.eval(p), &dom, x, steps, false);
            (Location { chart: 0, point: x.clone(), t: None }, v, ok)
        })
        .collect();
    let (passed, worst, at) = fold_defects(items);
    Ok(Certificate::new(CertificateKind::Smoothness, passed, worst, at).with("order", steps.order as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompareMode {
    BitExact,
    /// Passes when the sup distance is at most the value.
    Tolerance(f64),
}

/// Compares two sections at the points, in every representation of each point.
pub fn compare_sections(bundle: &Bundle, a: &Section, b: &Section, points: &[GridPoint], mode: CompareMode) -> Certificate {
    let items: Vec<(Location, f64, bool)> = points
        .par_iter()
        .map(|p| {
            let mut worst = 0.0f64;
            let mut equal = true;
            let mut at = Location { chart: p.chart, point: p.x.clone(), t: None };
            for (c, y) in std::iter::once((p.chart, p.x.clone())).chain(bundle.base.representations(p.chart, &p.x)) {
                let (u, v) = (a.eval(c, &y), b.eval(c, &y));
                equal &= u == v;
                let d = bundle.fibre.distance(&u, &v);
                if d > worst {
                    worst = d;
                    at = Location { chart: c, point: y, t: None };
                }
            }
            (at, worst, equal)
        })
        .collect();
    let mut cert = match mode {
        CompareMode::BitExact => {
            let (passed, worst, at) = fold_defects(items);
            Certificate::new(CertificateKind::OffUExact, passed, worst, at)
        }
        CompareMode::Tolerance(tol) => {
            let (_, worst, at) = fold_defects(items.into_iter().map(|(l, v, _)| (l, v, true)).collect());
            Certificate::new(CertificateKind::OffUExact, worst <= tol, worst, at).with("tolerance", tol)
        }
    };
    cert.parameters.insert("points".into(), points.len() as f64);
    cert
}

pub fn tube_certificate(r: &TubeReport, resolution: usize) -> Certificate {
    let at = (!r.point.is_empty()).then(|| Location { chart: r.chart, point: r.point.clone(), t: None });
    Certificate::new(CertificateKind::Tube, r.max_ratio < 1.0, r.max_ratio, at).with("resolution", resolution as f64)
}

pub fn compatibility_certificate(bundle: &Bundle, s: &Section, resolution: usize, tol: f64) -> Certificate {
    let (e, c, x) = s.compatibility_error(bundle, resolution);
    let at = (!x.is_empty()).then(|| Location { chart: c, point: x, t: None });
    Certificate::new(CertificateKind::Compatibility, e <= tol, e, at)
        .with("resolution", resolution as f64)
        .with("tolerance", tol)
}

/// `F(0, ·) = σ` and `F(1, ·) = τ` bit for bit at the points.
pub fn endpoint_certificate(bundle: &Bundle, f: &Homotopy, sigma: &Section, tau: &Section, points: &[GridPoint]) -> Certificate {
    let mut worst = (0.0f64, None);
    let mut passed = true;
    for p in points {
        for (t, s) in [(0.0, sigma), (1.0, tau)] {
            let (u, v) = (f.eval(t, p.chart, &p.x), s.eval(p.chart, &p.x));
            if u != v {
                let d = bundle.fibre.distance(&u, &v);
                if passed || d > worst.0 {
                    worst = (d, Some(Location { chart: p.chart, point: p.x.clone(), t: Some(t) }));
                }
                passed = false;
            }
        }
    }
    Certificate::new(CertificateKind::Endpoint, passed, worst.0, worst.1).with("points", points.len() as f64)
}

/// `F(t, x) = σ(x)` bit for bit at every sampled time and point.
pub fn fixed_certificate(bundle: &Bundle, f: &Homotopy, sigma: &Section, points: &[GridPoint], times: &[f64]) -> Certificate {
    let items: Vec<(Location, f64, bool)> = points
        .par_iter()
        .flat_map_iter(|p| {
            let s = sigma.eval(p.chart, &p.x);
            times.iter().map(move |&t| {
                let u = f.eval(t, p.chart, &p.x);
                (Location { chart: p.chart, point: p.x.clone(), t: Some(t) }, bundle.fibre.distance(&u, &s), u == s)
            })
        })
        .collect();
    let (passed, worst, at) = fold_defects(items);
    Certificate::new(CertificateKind::OffUExact, passed, worst, at).with("times", times.len() as f64)
}

/// Largest tube ratio of the slices `F(t, ·)` at the sampled times.
pub fn homotopy_tube_certificate(bundle: &Bundle, tube: &Tube, f: &Homotopy, points: &[GridPoint], times: &[f64]) -> Certificate {
    let mut worst = TubeReport { max_ratio: 0.0, max_distance: 0.0, chart: 0, point: vec![] };
    let mut wt = 0.0;
    for &t in times {
        let r = tube_contains(bundle, tube, &f.slice(t), points);
        let d = worst.max_distance.max(r.max_distance);
        if r.max_ratio > worst.max_ratio || worst.point.is_empty() {
            worst = r;
            wt = t;
        }
        worst.max_distance = d;
    }
    let mut c = tube_certificate(&worst, 0);
    c.parameters.clear();
    if let Some(l) = c.worst_location.as_mut() {
        l.t = Some(wt);
    }
    c.with("times", times.len() as f64)
}

/// Base-circle parameter `θ ∈ [-π/4, 7π/4)` as a chart point.
fn circle_point(atlas: &Atlas, theta: f64) -> Option<(usize, f64)> {
    for c in &atlas.charts {
        for m in [0.0, -1.0, 1.0] {
            let y = theta + 2.0 * PI * m;
            if c.contains(&[y]) {
                return Some((c.id, y));
            }
        }
    }
    None
}

/// Degree of a circle-valued section over the circle, from wrapped increments.
pub fn winding_number(bundle: &Bundle, s: &Section, resolution: usize) -> Result<i64> {
    winding_of(bundle, resolution, &|c, x| s.eval(c, x)[0])
}

/// [`winding_number`] of the slice `F(t, ·)`.
pub fn winding_number_at(bundle: &Bundle, f: &Homotopy, t: f64, resolution: usize) -> Result<i64> {
    winding_of(bundle, resolution, &|c, x| f.eval(t, c, x)[0])
}

fn winding_of(bundle: &Bundle, resolution: usize, eval: &dyn Fn(usize, &[f64]) -> f64) -> Result<i64> {
    if !matches!(bundle.fibre, Fibre::Circle) || bundle.base.dim != 1 || bundle.base.periodic != [true] {
        return Err(Error::InvalidArgument("winding number needs a circle-valued section over the circle".into()));
    }
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!("winding resolution {resolution} is below 16")));
    }
    let start = -PI / 4.0;
    let value = |k: usize| -> Result<f64> {
        let theta = start + 2.0 * PI * (k % resolution) as f64 / resolution as f64;
        let (c, y) = circle_point(&bundle.base, theta)
            .ok_or_else(|| Error::InvalidArgument(format!("angle {theta} in no chart")))?;
        Ok(eval(c, &[y]))
    };
    let mut total = 0.0;
    let mut prev = value(0)?;
    for k in 1..=resolution {
        let v = value(k)?;
        let inc = wrap_angle(v - prev);
        if inc.abs() > PI / 2.0 {
            return Err(Error::CoarseResolution { increment: inc });
        }
        total += inc;
        prev = v;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

pub fn degree_certificate(expected: i64, degrees: &[(f64, i64)]) -> Certificate {
    let bad = degrees.iter().find(|(_, d)| *d != expected);
    let worst = bad.map_or(0.0, |(_, d)| (*d - expected).abs() as f64);
    let at = bad.map(|(t, _)| Location { chart: 0, point: vec![], t: Some(*t) });
    Certificate::new(CertificateKind::Degree, bad.is_none(), worst, at)
        .with("expected", expected as f64)
        .with("slices", degrees.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{builtin_bundle, builtin_section};
    use crate::fields::mollify;
    use crate::manifold::{builtin_manifold, circle, Region};

    fn line_bundle() -> Bundle {
        Bundle::trivial(builtin_manifold("interval", &BTreeMap::new()).unwrap(), Fibre::Line { dim: 1 })
    }

    fn unit_points(res: usize) -> Vec<Vec<f64>> {
        (0..res).map(|k| vec![k as f64 / (res - 1) as f64]).collect()
    }

    #[test]
    fn quadratic_passes() {
        let f = ChartField::scalar(Rect::closed(&[0.0], &[1.0]), |x| x[0] * x[0]);
        let c = field_smoothness_certificate(&f, &unit_points(65), &SmoothnessSteps::default()).unwrap();
        assert!(c.passed);
        assert!(c.worst_value < 1e-7);
    }

    #[test]
    fn kink_fails_at_its_grid_point() {
        let f = ChartField::scalar(Rect::closed(&[0.0], &[1.0]), |x| (x[0] - 0.5).abs());
        let c = field_smoothness_certificate(&f, &unit_points(65), &SmoothnessSteps::default()).unwrap();
        assert!(!c.passed);
        assert_eq!(c.worst_location.unwrap().point, vec![0.5]);
    }

    #[test]
    fn mollified_kink_passes() {
        let f = ChartField::scalar(Rect::closed(&[0.0], &[1.0]), |x| (x[0] - 0.5).abs());
        let g = mollify(&f, 0.1, 512).unwrap();
        let pts: Vec<Vec<f64>> = (0..=40).map(|k| vec![0.4 + 0.2 * k as f64 / 40.0]).collect();
        let c = field_smoothness_certificate(&g, &pts, &SmoothnessSteps::default()).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn steps_must_halve() {
        let f = ChartField::scalar(Rect::closed(&[0.0], &[1.0]), |x| x[0]);
        let s = SmoothnessSteps { steps: vec![1e-2, 4e-3, 2e-3], ..Default::default() };
        assert!(field_smoothness_certificate(&f, &unit_points(5), &s).is_err());
        let s = SmoothnessSteps { steps: vec![1e-2, 5e-3], ..Default::default() };
        assert!(field_smoothness_certificate(&f, &unit_points(5), &s).is_err());
    }

    #[test]
    fn worst_location_reproduces_value() {
        let b = line_bundle();
        let s = Section::from_formula(&b, |x, o| o[0] = (x[0] - 0.3).abs() + x[0].sin(), Region::all(&b.base));
        let pts = b.base.sample_grid(41);
        let st = SmoothnessSteps::default();
        let c = smoothness_certificate(&b, &s, &pts, &st).unwrap();
        let at = c.worst_location.unwrap();
        let (v, _) = smoothness_defect(&b, &s, at.chart, &at.point, &st);
        assert!((v - c.worst_value).abs() <= 1e-12);
    }

    #[test]
    fn winding_examples() {
        let b = builtin_bundle("circle_fibre", circle()).unwrap();
        let mut p = BTreeMap::new();
        let id = builtin_section("winding", &p, &b).unwrap();
        assert_eq!(winding_number(&b, &id, 64).unwrap(), 1);
        p.insert("value".into(), 0.4);
        let c = builtin_section("constant", &p, &b).unwrap();
        assert_eq!(winding_number(&b, &c, 64).unwrap(), 0);
        let two = Section::from_formula(&b, |x, o| o[0] = 2.0 * x[0] + 0.3 * x[0].sin(), Region::all(&b.base));
        assert_eq!(winding_number(&b, &two, 1024).unwrap(), 2);
        assert_eq!(winding_number(&b, &two, 16).unwrap(), 2);
        let five = Section::from_formula(&b, |x, o| o[0] = 5.0 * x[0], Region::all(&b.base));
        assert!(matches!(winding_number(&b, &five, 16), Err(Error::CoarseResolution { .. })));
        assert!(winding_number(&b, &id, 8).is_err());
    }

    #[test]
    fn compare_modes() {
        let b = line_bundle();
        let s = Section::from_formula(&b, |x, o| o[0] = x[0], Region::all(&b.base));
        let t = Section::from_formula(&b, |x, o| o[0] = x[0] + 1e-3, Region::all(&b.base));
        let pts = b.base.sample_grid(11);
        let same = compare_sections(&b, &s, &s, &pts, CompareMode::BitExact);
        assert!(same.passed);
        assert_eq!(same.worst_value, 0.0);
        assert!(compare_sections(&b, &s, &s, &pts, CompareMode::Tolerance(0.0)).passed);
        let d = compare_sections(&b, &s, &t, &pts, CompareMode::Tolerance(2e-3));
        assert!(d.passed);
        assert!((d.worst_value - 1e-3).abs() < 1e-12);
        assert!(!compare_sections(&b, &s, &t, &pts, CompareMode::BitExact).passed);
    }
}
