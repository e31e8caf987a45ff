use super::{chart_points, SmoothingProblem};
use crate::bundle::{wrap_angle, Fibre, FibreChart};
use crate::error::{Error, Result};
use crate::geom::{Interval, Rect, RegionExpr};
use crate::manifold::{box_grid, Region, CHART_TOL};
use serde::Serialize;

/// One trivializing box of the cover, with the sets derived from it in its chart.
#[derive(Clone, Debug, Serialize)]
pub struct CoverEntry {
    pub chart: usize,
    /// Bisection path from the chart's core: `0` lower half, `1` upper half.
    pub path: String,
    pub leaf: Rect,
    pub v: Rect,
    pub v_prime: Rect,
    pub fibre_chart: usize,
    #[serde(skip)]
    pub u: RegionExpr,
    #[serde(skip)]
    pub l: RegionExpr,
}

#[derive(Clone, Debug, Serialize)]
pub struct Cover {
    pub entries: Vec<CoverEntry>,
}

fn grow(leaf: &Rect, dom: &Rect, face_lo: &[bool], face_hi: &[bool], by: f64, inset: Option<f64>) -> Rect {
    let axes = leaf
        .axes
        .iter()
        .zip(&dom.axes)
        .enumerate()
        .map(|(k, (q, d))| {
            let mut i = Interval::open(q.lo - by, q.hi + by);
            if i.lo <= d.lo + CHART_TOL {
                if face_lo[k] {
                    i.lo = d.lo;
                    i.lo_closed = true;
                } else {
                    i.lo = d.lo + inset.unwrap_or(0.0);
                }
            } else if !face_lo[k] {
                if let Some(s) = inset {
                    i.lo = i.lo.max(d.lo + s);
                }
            }
            if i.hi >= d.hi - CHART_TOL {
                if face_hi[k] {
                    i.hi = d.hi;
                    i.hi_closed = true;
                } else {
                    i.hi = d.hi - inset.unwrap_or(0.0);
                }
            } else if !face_hi[k] {
                if let Some(s) = inset {
                    i.hi = i.hi.min(d.hi - s);
                }
            }
            i
        })
        .collect();
    Rect::new(axes)
}

/// Fibre chart holding `σ ± ε` over the closed box with the required slack.
fn fit(problem: &SmoothingProblem, chart: usize, b: &Rect) -> Option<usize> {
    let bundle = &problem.bundle;
    if !matches!(bundle.fibre, Fibre::Circle) {
        return Some(0);
    }
    let spacing = bundle.base.charts[chart].spacing(problem.resolution);
    let n = b
        .axes
        .iter()
        .zip(&spacing)
        .map(|(i, s)| (((i.hi - i.lo) / s).ceil() as usize + 1).max(3))
        .max()
        .unwrap_or(3);
    let pts = box_grid(b, n);
    let reference = problem.sigma.eval(chart, &pts[0])[0];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in &pts {
        let d = wrap_angle(problem.sigma.eval(chart, x)[0] - reference);
        let w = problem.tube.width_at(chart, x);
        lo = lo.min(d - w);
        hi = hi.max(d + w);
    }
    if !(hi - lo < std::f64::consts::PI) {
        return None;
    }
    let center = reference + 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut best: Option<(usize, f64)> = None;
    for (k, z) in bundle.fibre_charts.iter().enumerate() {
        if let FibreChart::Arc { center: zc, half_width } = z {
            let room = half_width - wrap_angle(center - zc).abs() - half;
            if best.map_or(true, |(_, r)| room > r) {
                best = Some((k, room));
            }
        }
    }
    best.filter(|&(_, r)| r >= problem.margins.fibre_slack).map(|(k, _)| k)
}

fn bisect(r: &Rect) -> (Rect, Rect) {
    let k = (0..r.dim())
        .max_by(|&a, &b| r.axes[a].width().partial_cmp(&r.axes[b].width()).unwrap().then(b.cmp(&a)))
        .unwrap();
    let mid = 0.5 * (r.axes[k].lo + r.axes[k].hi);
    let (mut lo, mut hi) = (r.clone(), r.clone());
    lo.axes[k].hi = mid;
    hi.axes[k].lo = mid;
    (lo, hi)
}

/// Bisects each chart's core until the grown boxes fit a fibre chart, then derives
/// `V'`, `U_i` and `L_i` and checks the cover on the grid.
pub fn build_cover(problem: &SmoothingProblem) -> Result<Cover> {
    let atlas = &problem.bundle.base;
    let m = &problem.margins;
    let mut entries: Vec<CoverEntry> = Vec::new();
    for chart in &atlas.charts {
        let c = chart.id;
        let mut stack = vec![(atlas.core(c), String::new())];
        while let Some((leaf, path)) = stack.pop() {
            let v = grow(&leaf, &chart.domain, &chart.face_lo, &chart.face_hi, m.cover, None);
            match fit(problem, c, &v.closure()) {
                Some(z) => {
                    let v_prime =
                        grow(&leaf, &chart.domain, &chart.face_lo, &chart.face_hi, 0.5 * m.cover, Some(0.25 * m.cover));
                    entries.push(CoverEntry {
                        chart: c,
                        path,
                        leaf,
                        v,
                        v_prime,
                        fibre_chart: z,
                        u: RegionExpr::Empty,
                        l: RegionExpr::Empty,
                    });
                }
                None if path.len() >= m.max_depth => {
                    return Err(Error::CoverConstructionFailed { chart: c, region: leaf.describe() });
                }
                None => {
                    let (lo, hi) = bisect(&leaf);
                    // popped in path order: lower half first
                    stack.push((hi, format!("{path}1")));
                    stack.push((lo, format!("{path}0")));
                }
            }
        }
    }

    let frames: Vec<_> = atlas.charts.iter().map(|c| c.frame()).collect();
    let mut earlier: Vec<Region> = Vec::new();
    for e in entries.iter_mut() {
        let c = e.chart;
        let mut emptied = false;
        e.u = RegionExpr::intersection(vec![RegionExpr::rect(e.v.clone()), problem.u.exprs[c].clone()])
            .shrink(m.u_shrink, &frames[c], &mut emptied);
        let before = RegionExpr::union(earlier.iter().map(|r| r.exprs[c].clone()).collect());
        e.l = RegionExpr::difference(
            RegionExpr::intersection(vec![problem.l.exprs[c].clone(), RegionExpr::rect(e.v_prime.closure())]),
            before,
        );
        earlier.push(Region::from_chart(atlas, c, RegionExpr::rect(e.v_prime.clone())));
    }

    let grid = problem.grid();
    for p in &grid {
        let covered = atlas
            .representations(p.chart, &p.x)
            .iter()
            .any(|(cid, y)| entries.iter().any(|e| e.chart == *cid && e.v_prime.contains(y)));
        if !covered {
            return Err(Error::CoverGap { chart: p.chart, point: p.x.clone() });
        }
    }
    let ap = problem.a_prime();
    for e in &entries {
        for y in chart_points(problem, &grid, e.chart, &e.v.closure()) {
            if e.l.contains(&y) && !ap.exprs[e.chart].contains(&y) && !e.u.contains(&y) {
                return Err(Error::InvalidRegion(format!(
                    "point {y:?} of chart {} lies in L outside A' but not inside U shrunk by {}",
                    e.chart, m.u_shrink
                )));
            }
        }
    }
    Ok(Cover { entries })
}
