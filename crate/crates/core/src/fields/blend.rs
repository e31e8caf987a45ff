use super::mollify::mollify;
use super::partition::plateau;
use super::{ChartField, ConvexSet};
use crate::error::{Error, Result};
use crate::geom::{Frame, Interval, Rect, RegionExpr};
use crate::manifold::box_grid;
use rayon::prelude::*;

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest power of two not above `x`, so nearby inputs start from the same radius.
fn pow2_floor(x: f64) -> f64 {
    2f64.powi(x.log2().floor() as i32)
}

/// `λ1 γ + λ2 f`, delegating to `f` wherever `λ1 = 0` and to `γ` wherever
/// `λ1 = 1, λ2 = 0`.
pub fn blend(f: &ChartField, gamma: &ChartField, l1: &ChartField, l2: &ChartField) -> Result<ChartField> {
    let d = f.dim();
    if gamma.dim() != d || l1.dim() != d || l2.dim() != d {
        return Err(Error::InvalidArgument("blend inputs have different dimensions".into()));
    }
    if gamma.value_dim != f.value_dim || l1.value_dim != 1 || l2.value_dim != 1 {
        return Err(Error::InvalidArgument("blend inputs have incompatible value dimensions".into()));
    }
    let bounded = f.domain.axes.iter().all(|i| i.lo.is_finite() && i.hi.is_finite());
    if bounded {
        let res = if d == 1 { 257 } else { 33 };
        for x in box_grid(&f.domain, res) {
            let s = l1.eval1(&x) + l2.eval1(&x);
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPartition { sum: s, point: x });
            }
        }
    }
    let mut smooth = vec![RegionExpr::intersection(vec![gamma.smooth.clone(), f.smooth.clone()])];
    if let Some(lv) = &l1.levels {
        smooth.push(RegionExpr::intersection(vec![lv.ones.clone(), gamma.smooth.clone()]));
        smooth.push(RegionExpr::intersection(vec![lv.zeros.clone(), f.smooth.clone()]));
    }
    let smooth = RegionExpr::intersection(vec![
        RegionExpr::union(smooth),
        l1.smooth.clone(),
        l2.smooth.clone(),
    ]);
    let (f, g, a, b) = (f.clone(), gamma.clone(), l1.clone(), l2.clone());
    let m = f.value_dim;
    let domain = f.domain.clone();
    Ok(ChartField::new(domain, m, move |x, out| {
        let w1 = a.eval1(x);
        if w1 == 0.0 {
            f.eval_into(x, out);
            return;
        }
        let w2 = b.eval1(x);
        if w1 == 1.0 && w2 == 0.0 {
            g.eval_into(x, out);
            return;
        }
        let mut gv = vec![0.0; m];
        g.eval_into(x, &mut gv);
        f.eval_into(x, out);
        for c in 0..m {
            out[c] = w1 * gv[c] + w2 * out[c];
        }
    })
    .with_smooth(smooth))
}

/// Largest forward difference quotient `|f(x + s_k e_k) - f(x)| / s_k` over the
/// points whose shifted neighbour stays in the domain.
pub fn lipschitz_estimate(f: &ChartField, points: &[Vec<f64>], spacing: &[f64]) -> f64 {
    points
        .par_iter()
        .map(|x| {
            let fx = f.eval(x);
            let mut best: f64 = 0.0;
            for (k, &s) in spacing.iter().enumerate() {
                let mut y = x.clone();
                y[k] += s;
                if !f.domain.contains_tol(&y, 1e-12) {
                    continue;
                }
                best = best.max(norm_diff(&f.eval(&y), &fx) / s);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Parameters of the radius search.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RadiusSchedule {
    /// Starting radius. If unset: tolerance / (2 Lip), rounded down to a power of two.
    pub h0: Option<f64>,
    pub max_halvings: usize,
    pub quadrature_points: usize,
    /// Width of the transition zone of the cut-off weight.
    pub plateau_margin: f64,
    pub margin_halvings: usize,
    pub min_radius: f64,
    /// Upper bound for the starting radius.
    pub max_radius: f64,
}

impl RadiusSchedule {
    pub fn for_dim(d: usize) -> Self {
        RadiusSchedule {
            h0: None,
            max_halvings: 20,
            quadrature_points: if d == 1 { super::DEFAULT_QUADRATURE_1D } else { super::DEFAULT_QUADRATURE_2D },
            plateau_margin: 0.2,
            margin_halvings: 6,
            min_radius: 1e-12,
            max_radius: 0.25,
        }
    }
}

/// Bisection pieces of `b` not covered according to `covered`, at most `depth`
/// levels deep.
fn uncovered_parts(b: Rect, depth: usize, covered: &dyn Fn(&Rect) -> bool) -> Vec<Rect> {
    if covered(&b) {
        return vec![];
    }
    if depth == 0 {
        return vec![b];
    }
    let k = (0..b.axes.len()).max_by(|&i, &j| b.axes[i].width().total_cmp(&b.axes[j].width())).unwrap();
    let mid = 0.5 * (b.axes[k].lo + b.axes[k].hi);
    let (mut lo, mut hi) = (b.clone(), b);
    lo.axes[k] = Interval::closed(lo.axes[k].lo, mid);
    hi.axes[k] = Interval::closed(mid, hi.axes[k].hi);
    let mut out = uncovered_parts(lo, depth - 1, covered);
    out.extend(uncovered_parts(hi, depth - 1, covered));
    out
}

/// Inputs of [`smooth_on_region`] besides the field.
pub struct LocalSmoothing<'a> {
    /// Closed set that must end up in the smooth part.
    pub l: RegionExpr,
    /// Open set where changes are allowed.
    pub u: RegionExpr,
    /// Open set where the field is already smooth.
    pub a: RegionExpr,
    pub w: ConvexSet,
    pub tolerance: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// Chart frame used to place the cut-off weight.
    pub frame: Frame,
    /// Verification points inside the field's domain.
    pub points: Vec<Vec<f64>>,
    /// Per-axis step for the Lipschitz estimate.
    pub spacing: Vec<f64>,
    pub schedule: RadiusSchedule,
}

impl<'a> LocalSmoothing<'a> {
    /// Verification on a uniform grid of the field's domain.
    pub fn on_grid(
        f: &ChartField,
        l: RegionExpr,
        u: RegionExpr,
        a: RegionExpr,
        w: ConvexSet,
        tolerance: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        frame: Frame,
        res: usize,
    ) -> Self {
        let spacing = f.domain.axes.iter().map(|i| (i.hi - i.lo) / (res - 1) as f64).collect();
        LocalSmoothing {
            l,
            u,
            a,
            w,
            tolerance,
            frame,
            points: box_grid(&f.domain, res),
            spacing,
            schedule: RadiusSchedule::for_dim(f.dim()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothOutcome {
    pub field: ChartField,
    pub changed: bool,
    pub radius: Option<f64>,
    pub halvings: usize,
    pub margin: Option<f64>,
    pub sup_distance: f64,
    pub max_ratio: f64,
}

/// Replaces `f` inside `u` by a blend with its mollification so that the result is
/// smooth near `l`, stays within the tolerance of `f` and inside `w`, and equals `f`
/// off `u`.
pub fn smooth_on_region(f: &ChartField, p: &LocalSmoothing<'_>) -> Result<SmoothOutcome> {
    let unchanged = |f: &ChartField| SmoothOutcome {
        field: f.clone(),
        changed: false,
        radius: None,
        halvings: 0,
        margin: None,
        sup_distance: 0.0,
        max_ratio: 0.0,
    };
    let l_box = p.l.bounding();
    let cell = |x: &[f64]| {
        let b = Rect::new(
            x.iter().zip(&p.spacing).map(|(&v, &s)| Interval::closed(v - s, v + s)).collect(),
        );
        let b = b.intersect(&p.frame.domain.closure());
        match &l_box {
            Some(l) => b.intersect(l),
            None => b,
        }
    };
    // pieces of the neighbourhood cells of grid points in L that may contain a
    // non-smooth point of L \ A
    let covered = |b: &Rect| p.a.covers_box(b) || f.smooth.covers_box(b);
    let targets: Vec<Rect> = p
        .points
        .iter()
        .filter(|x| p.l.contains(x))
        .flat_map(|x| uncovered_parts(cell(x), 6, &covered))
        .collect();
    if targets.is_empty() {
        return Ok(unchanged(f));
    }
    // cut-off weight: largest margin whose plateau is 1 on every target cell
    let mut margin = p.schedule.plateau_margin;
    let mut found = false;
    for _ in 0..=p.schedule.margin_halvings {
        if targets.iter().all(|b| p.u.plateau_one_on(b, margin, &p.frame)) {
            found = true;
            break;
        }
        margin *= 0.5;
    }
    if !found {
        let bad = targets.iter().find(|b| !p.u.plateau_one_on(b, margin * 2.0, &p.frame)).unwrap();
        return Err(Error::InvalidRegion(format!(
            "points of L outside the smooth set are not interior to U, e.g. near {}",
            bad.describe()
        )));
    }
    // after a halving, widen the ramp back towards the rejected margin; a narrow
    // ramp over a region where the mollification differs from f is steep
    if margin < p.schedule.plateau_margin {
        let (mut ok, mut bad) = (margin, 2.0 * margin);
        for _ in 0..6 {
            let mid = 0.5 * (ok + bad);
            if targets.iter().all(|b| p.u.plateau_one_on(b, mid, &p.frame)) {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        margin = ok;
    }
    let l1 = plateau(&p.u, margin, &p.frame)?;
    let l1c = l1.clone();
    let l2 = ChartField::new(l1.domain.clone(), 1, move |x, o| o[0] = 1.0 - l1c.eval1(x)).with_smooth(RegionExpr::All);

    let active: Vec<&Vec<f64>> = p.points.iter().filter(|x| l1.eval1(x) > 0.0).collect();
    let near_u: Vec<Vec<f64>> = p.points.iter().filter(|x| p.u.closure().contains(x)).cloned().collect();
    let tol_min = active.iter().map(|x| (p.tolerance)(x)).fold(f64::INFINITY, f64::min);
    if !(tol_min > 0.0) {
        return Err(Error::TubeTooTight { achieved: 0.0, ratio: f64::INFINITY });
    }
    let lip = lipschitz_estimate(f, &near_u, &p.spacing);
    let mut h = match p.schedule.h0 {
        Some(h) => h,
        None if lip > 0.0 => pow2_floor((tol_min / (2.0 * lip)).min(p.schedule.max_radius)),
        None => pow2_floor(p.schedule.max_radius),
    };
    let mut best = (f64::INFINITY, f64::INFINITY);
    for k in 0..=p.schedule.max_halvings {
        if h < p.schedule.min_radius {
            break;
        }
        let gamma = mollify(f, h, p.schedule.quadrature_points)?;
        let g = blend(f, &gamma, &l1, &l2)?;
        let (sup, ratio, inside) = active
            .par_iter()
            .map(|x| {
                let gv = g.eval(x);
                let d = norm_diff(&gv, &f.eval(x));
                let r = d / (p.tolerance)(x);
                (d, if r.is_nan() { f64::INFINITY } else { r }, p.w.contains(&gv))
            })
            .reduce(|| (0.0, 0.0, true), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2 && b.2));
        if ratio < 1.0 && inside {
            return Ok(SmoothOutcome {
                field: g,
                changed: true,
                radius: Some(h),
                halvings: k,
                margin: Some(margin),
                sup_distance: sup,
                max_ratio: ratio,
            });
        }
        if ratio < best.1 {
            best = (sup, ratio);
        }
        h *= 0.5;
    }
    Err(Error::TubeTooTight { achieved: best.0, ratio: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;

    fn unit() -> Rect {
        Rect::closed(&[0.0], &[1.0])
    }

    fn frame() -> Frame {
        Frame { domain: unit(), face_lo: vec![true], face_hi: vec![true] }
    }

    fn kink() -> ChartField {
        ChartField::scalar(unit(), |x| (x[0] - 0.5).abs())
            .with_smooth(RegionExpr::difference(RegionExpr::All, RegionExpr::rect(Rect::closed(&[0.5], &[0.5]))))
    }

    #[test]
    fn blend_extremes() {
        let f = kink();
        let g = ChartField::scalar(unit(), |x| x[0] * x[0]).with_smooth(RegionExpr::All);
        let one = ChartField::constant(unit(), vec![1.0]);
        let zero = ChartField::constant(unit(), vec![0.0]);
        let b = blend(&f, &g, &one, &zero).unwrap();
        let c = blend(&f, &g, &zero, &one).unwrap();
        let d = blend(&f, &f, &ChartField::constant(unit(), vec![0.3]), &ChartField::constant(unit(), vec![0.7])).unwrap();
        for k in 0..=20 {
            let x = [k as f64 / 20.0];
            assert_eq!(b.eval1(&x), g.eval1(&x));
            assert_eq!(c.eval1(&x), f.eval1(&x));
            assert!((d.eval1(&x) - f.eval1(&x)).abs() < 1e-15);
        }
    }

    #[test]
    fn blend_rejects_bad_partition() {
        let f = kink();
        let half = ChartField::constant(unit(), vec![0.5]);
        let bad = ChartField::constant(unit(), vec![0.6]);
        assert!(matches!(blend(&f, &f, &half, &bad), Err(Error::InvalidPartition { .. })));
    }

    #[test]
    fn nothing_to_change() {
        let f = ChartField::scalar(unit(), |x| x[0].sin()).with_smooth(RegionExpr::All);
        let tol = |_: &[f64]| 0.05;
        let p = LocalSmoothing::on_grid(
            &f,
            RegionExpr::All,
            RegionExpr::Empty,
            RegionExpr::All,
            ConvexSet::Whole(1),
            &tol,
            frame(),
            257,
        );
        let out = smooth_on_region(&f, &p).unwrap();
        assert!(!out.changed);
        assert_eq!(out.field.eval1(&[0.3]), f.eval1(&[0.3]));
    }

    fn kink_problem(tol: &(dyn Fn(&[f64]) -> f64 + Sync)) -> LocalSmoothing<'_> {
        let f = kink();
        LocalSmoothing::on_grid(
            &f,
            RegionExpr::All,
            RegionExpr::rect(Rect::open(&[0.25], &[0.75])),
            f.smooth.clone(),
            ConvexSet::Whole(1),
            tol,
            frame(),
            257,
        )
    }

    #[test]
    fn kink_is_smoothed_inside_u() {
        let tol = |_: &[f64]| 0.05;
        let p = kink_problem(&tol);
        let f = kink();
        let out = smooth_on_region(&f, &p).unwrap();
        assert!(out.changed && out.max_ratio < 1.0);
        let g = &out.field;
        for k in 0..=256 {
            let x = [k as f64 / 256.0];
            if x[0] <= 0.25 || x[0] >= 0.75 {
                assert_eq!(g.eval1(&x).to_bits(), f.eval1(&x).to_bits());
            }
            assert!((g.eval1(&x) - f.eval1(&x)).abs() < 0.05);
        }
        let d2 = |h: f64| (g.eval1(&[0.5 + h]) - 2.0 * g.eval1(&[0.5]) + g.eval1(&[0.5 - h])) / (h * h);
        let (a, b, c) = (d2(1e-2), d2(5e-3), d2(2.5e-3));
        assert!((c - b).abs() < (b - a).abs(), "{a} {b} {c}");
        assert!(a.abs() < 1e3 && b.abs() < 1e3 && c.abs() < 1e3);
        assert!(g.is_smooth_at(&[0.5]));
    }

    #[test]
    fn impossible_tolerance() {
        let tol = |_: &[f64]| 1e-15;
        let p = kink_problem(&tol);
        assert!(matches!(smooth_on_region(&kink(), &p), Err(Error::TubeTooTight { .. })));
    }

    #[test]
    fn lipschitz_of_linear() {
        let f = ChartField::scalar(unit(), |x| 3.0 * x[0]);
        let pts = box_grid(&unit(), 11);
        assert!((lipschitz_estimate(&f, &pts, &[0.1]) - 3.0).abs() < 1e-12);
    }
}
