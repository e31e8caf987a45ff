use super::Atlas;
use crate::geom::RegionExpr;
use serde::Serialize;

/// Subset of a manifold, stored as one expression per chart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Region {
    pub exprs: Vec<RegionExpr>,
    /// Set when a shrink collapsed some primitive.
    pub emptied_warning: bool,
}

impl Region {
    pub fn from_exprs(exprs: Vec<RegionExpr>) -> Self {
        Region { exprs, emptied_warning: false }
    }

    pub fn empty(atlas: &Atlas) -> Self {
        Self::from_exprs(vec![RegionExpr::Empty; atlas.charts.len()])
    }

    pub fn all(atlas: &Atlas) -> Self {
        Self::from_exprs(vec![RegionExpr::All; atlas.charts.len()])
    }

    /// The same expression in every chart. Only meaningful when the expression is
    /// invariant under the transitions.
    pub fn uniform(atlas: &Atlas, e: RegionExpr) -> Self {
        Self::from_exprs(vec![e; atlas.charts.len()])
    }

    /// Set described in one chart, transported to the others through the overlaps.
    pub fn from_chart(atlas: &Atlas, chart: usize, e: RegionExpr) -> Self {
        let exprs = atlas
            .charts
            .iter()
            .map(|c| {
                if c.id == chart {
                    return e.clone();
                }
                let parts: Vec<RegionExpr> = atlas
                    .pieces
                    .iter()
                    .filter(|p| p.from == chart && p.to == c.id)
                    .map(|p| {
                        RegionExpr::Clip(p.overlap.translate(&p.shift), Box::new(e.translate(&p.shift))).simplify()
                    })
                    .collect();
                RegionExpr::union(parts)
            })
            .collect();
        Self::from_exprs(exprs)
    }

    pub fn chart_expr(&self, chart: usize) -> &RegionExpr {
        &self.exprs[chart]
    }

    pub fn contains(&self, chart: usize, x: &[f64]) -> bool {
        self.exprs[chart].contains(x)
    }

    fn zip(&self, o: &Region, f: impl Fn(RegionExpr, RegionExpr) -> RegionExpr) -> Region {
        Region {
            exprs: self.exprs.iter().zip(&o.exprs).map(|(a, b)| f(a.clone(), b.clone())).collect(),
            emptied_warning: self.emptied_warning || o.emptied_warning,
        }
    }

    pub fn union(&self, o: &Region) -> Region {
        self.zip(o, |a, b| RegionExpr::union(vec![a, b]))
    }

    pub fn intersection(&self, o: &Region) -> Region {
        self.zip(o, |a, b| RegionExpr::intersection(vec![a, b]))
    }

    pub fn difference(&self, o: &Region) -> Region {
        self.zip(o, RegionExpr::difference)
    }

    pub fn closure(&self) -> Region {
        Region { exprs: self.exprs.iter().map(|e| e.closure()).collect(), emptied_warning: self.emptied_warning }
    }

    pub fn interior(&self) -> Region {
        Region { exprs: self.exprs.iter().map(|e| e.interior()).collect(), emptied_warning: self.emptied_warning }
    }

    pub fn shrink(&self, atlas: &Atlas, margin: f64) -> Region {
        let mut warned = self.emptied_warning;
        let exprs = self
            .exprs
            .iter()
            .zip(&atlas.charts)
            .map(|(e, c)| e.shrink(margin, &c.frame(), &mut warned))
            .collect();
        Region { exprs, emptied_warning: warned }
    }

    pub fn expand(&self, atlas: &Atlas, margin: f64) -> Region {
        let mut warned = self.emptied_warning;
        let exprs = self
            .exprs
            .iter()
            .zip(&atlas.charts)
            .map(|(e, c)| e.expand(margin, &c.frame(), &mut warned))
            .collect();
        Region { exprs, emptied_warning: warned }
    }

    /// Overlap sample points where membership disagrees between charts, skipping
    /// points within `tol` of a boundary.
    pub fn consistency_violations(&self, atlas: &Atlas, res: usize, tol: f64) -> Vec<(usize, Vec<f64>)> {
        let mut bad = Vec::new();
        for c in &atlas.charts {
            for x in c.grid(res) {
                let here = self.contains(c.id, &x);
                for (d, y) in atlas.representations(c.id, &x) {
                    if d == c.id || self.contains(d, &y) == here {
                        continue;
                    }
                    if !self.near_boundary(c.id, &x, tol) {
                        bad.push((c.id, x.clone()));
                    }
                }
            }
        }
        bad
    }

    fn near_boundary(&self, chart: usize, x: &[f64], tol: f64) -> bool {
        let here = self.contains(chart, x);
        (0..x.len()).any(|k| {
            [-tol, tol].iter().any(|&s| {
                let mut y = x.to_vec();
                y[k] += s;
                self.contains(chart, &y) != here
            })
        })
    }

    /// Grid points of the deduplicated sample grid lying in the region.
    pub fn grid_points(&self, atlas: &Atlas, res: usize) -> Vec<super::GridPoint> {
        atlas.sample_grid(res).into_iter().filter(|p| self.contains(p.chart, &p.x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::manifold::{circle, interval};
    use std::f64::consts::PI;

    #[test]
    fn transported_arc() {
        let a = circle();
        let r = Region::from_chart(&a, 0, RegionExpr::rect(Rect::open(&[PI - 0.15], &[PI + 0.15])));
        assert!(r.contains(0, &[PI]));
        assert!(r.contains(1, &[-PI]));
        assert!(!r.contains(1, &[PI]));
        assert!(r.consistency_violations(&a, 65, 1e-9).is_empty());
    }

    #[test]
    fn shrink_on_interval_keeps_faces() {
        let a = interval(0.0, 1.0);
        let all = Region::all(&a);
        assert_eq!(all.shrink(&a, 0.1), all);
        let r = Region::uniform(&a, RegionExpr::rect(Rect::closed(&[0.0], &[1.0])));
        let s = r.shrink(&a, 0.1);
        assert!(s.contains(0, &[0.0]) && s.contains(0, &[1.0]));
        let u = Region::uniform(&a, RegionExpr::rect(Rect::open(&[0.25], &[0.75])));
        let s = u.shrink(&a, 0.1);
        assert!(s.contains(0, &[0.36]) && !s.contains(0, &[0.34]));
    }

    #[test]
    fn algebra() {
        let a = interval(0.0, 1.0);
        let p = Region::uniform(&a, RegionExpr::rect(Rect::closed(&[0.0], &[0.6])));
        let q = Region::uniform(&a, RegionExpr::rect(Rect::closed(&[0.4], &[1.0])));
        let i = p.intersection(&q);
        assert_eq!(i.exprs[0], RegionExpr::rect(Rect::closed(&[0.4], &[0.6])));
        let d = p.difference(&Region::empty(&a));
        assert_eq!(d, p);
        let u = p.union(&q);
        assert!(u.contains(0, &[0.9]) && u.contains(0, &[0.1]));
    }
}
