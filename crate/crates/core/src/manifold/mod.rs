//! Manifolds with corners as finite atlases of boxes with translation transitions.

mod catalog;
mod region;

pub use catalog::{builtin_manifold, interval, circle, product, MANIFOLD_CATALOG};
pub use region::Region;

use crate::error::{Error, Result};
use crate::geom::{Frame, Interval, Rect};
use serde::Serialize;

/// Containment slack for chart and overlap boxes.
pub const CHART_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct Chart {
    pub id: usize,
    /// Closed coordinate box.
    pub domain: Rect,
    pub face_lo: Vec<bool>,
    pub face_hi: Vec<bool>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn frame(&self) -> Frame {
        Frame { domain: self.domain.clone(), face_lo: self.face_lo.clone(), face_hi: self.face_hi.clone() }
    }

    /// The chart's open subset of the manifold: closed at faces, open elsewhere.
    pub fn open_domain(&self) -> Rect {
        Rect::new(
            self.domain
                .axes
                .iter()
                .enumerate()
                .map(|(k, i)| Interval { lo: i.lo, hi: i.hi, lo_closed: self.face_lo[k], hi_closed: self.face_hi[k] })
                .collect(),
        )
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.domain.contains_tol(x, CHART_TOL)
    }

    pub fn face_count(&self) -> usize {
        self.face_lo.iter().chain(&self.face_hi).filter(|&&f| f).count()
    }

    /// Evenly spaced points, last axis fastest.
    pub fn grid(&self, res: usize) -> Vec<Vec<f64>> {
        box_grid(&self.domain, res)
    }

    pub fn spacing(&self, res: usize) -> Vec<f64> {
        self.domain.axes.iter().map(|i| (i.hi - i.lo) / (res - 1) as f64).collect()
    }
}

/// `res` points per axis of a closed box, last axis fastest.
pub fn box_grid(b: &Rect, res: usize) -> Vec<Vec<f64>> {
    let d = b.dim();
    let axes: Vec<Vec<f64>> = b
        .axes
        .iter()
        .map(|i| (0..res).map(|k| grid_coord(i.lo, i.hi, k, res)).collect())
        .collect();
    let total = res.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        out.push((0..d).map(|a| axes[a][idx[a]]).collect());
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < res {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

fn grid_coord(lo: f64, hi: f64, k: usize, res: usize) -> f64 {
    if k + 1 == res {
        hi
    } else {
        lo + k as f64 * (hi - lo) / (res - 1) as f64
    }
}

/// One connected component of a chart overlap, with its translation.
#[derive(Clone, Debug, Serialize)]
pub struct TransitionPiece {
    pub from: usize,
    pub to: usize,
    /// Closed overlap box in `from` coordinates.
    pub overlap: Rect,
    pub shift: Vec<f64>,
}

impl TransitionPiece {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, s)| a + s).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Atlas {
    pub name: String,
    pub dim: usize,
    pub charts: Vec<Chart>,
    pub pieces: Vec<TransitionPiece>,
    /// Axes carrying an angle coordinate.
    pub periodic: Vec<bool>,
}

/// A deduplicated sample point of the manifold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub chart: usize,
    pub x: Vec<f64>,
}

impl Atlas {
    pub fn chart(&self, id: usize) -> &Chart {
        &self.charts[id]
    }

    /// Piece index and image of `x` under the transition `from → to`, if `x` is in the overlap.
    pub fn locate(&self, from: usize, to: usize, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        if from == to {
            return if self.charts[from].contains(x) { Some((usize::MAX, x.to_vec())) } else { None };
        }
        self.pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.from == from && p.to == to)
            .find(|(_, p)| p.overlap.contains_tol(x, CHART_TOL))
            .map(|(i, p)| (i, p.apply(x)))
    }

    pub fn transition_point(&self, from: usize, to: usize, x: &[f64]) -> Result<Vec<f64>> {
        if from >= self.charts.len() || to >= self.charts.len() {
            return Err(Error::InvalidArgument(format!("chart index out of range ({from}, {to})")));
        }
        if from == to {
            return Err(Error::OutOfOverlap { from, to, point: x.to_vec() });
        }
        self.locate(from, to, x)
            .map(|(_, y)| y)
            .ok_or_else(|| Error::OutOfOverlap { from, to, point: x.to_vec() })
    }

    /// Lowest chart id containing the manifold point `(chart, x)`.
    pub fn owner(&self, chart: usize, x: &[f64]) -> usize {
        (0..chart).find(|&c| self.locate(chart, c, x).is_some()).unwrap_or(chart)
    }

    /// Uniform grid per chart, each manifold point kept only in its lowest chart.
    pub fn sample_grid(&self, res: usize) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for c in &self.charts {
            for x in c.grid(res) {
                if self.owner(c.id, &x) == c.id {
                    out.push(GridPoint { chart: c.id, x });
                }
            }
        }
        out
    }

    /// All representations of a manifold point in every chart containing it.
    pub fn representations(&self, chart: usize, x: &[f64]) -> Vec<(usize, Vec<f64>)> {
        self.charts
            .iter()
            .filter_map(|c| self.locate(chart, c.id, x).map(|(_, y)| (c.id, y)))
            .collect()
    }

    /// Closed box of chart `chart` cut at the middle of every slab it shares with
    /// another chart. The cores of all charts cover the manifold, and each keeps
    /// half an overlap of room inside its chart.
    pub fn core(&self, chart: usize) -> Rect {
        let dom = &self.charts[chart].domain;
        let mut core = dom.closure();
        for p in self.pieces.iter().filter(|p| p.from == chart && p.to != chart) {
            let partial: Vec<usize> = (0..self.dim)
                .filter(|&k| {
                    let (o, d) = (&p.overlap.axes[k], &dom.axes[k]);
                    o.lo > d.lo + CHART_TOL || o.hi < d.hi - CHART_TOL
                })
                .collect();
            let [k] = partial[..] else { continue };
            let (o, d) = (&p.overlap.axes[k], &dom.axes[k]);
            let c = &mut core.axes[k];
            let mid = 0.5 * (o.lo + o.hi);
            if o.lo <= d.lo + CHART_TOL {
                c.lo = c.lo.max(mid);
            } else {
                c.hi = c.hi.min(mid);
            }
        }
        core
    }

    /// Largest `|T_jk(T_ij(x)) - T_ik(x)|` over sampled triple overlaps, and the
    /// largest round-trip error.
    pub fn cocycle_error(&self, res: usize) -> (f64, f64) {
        let mut cocycle: f64 = 0.0;
        let mut round: f64 = 0.0;
        for ci in &self.charts {
            for x in ci.grid(res) {
                for cj in &self.charts {
                    if cj.id == ci.id {
                        continue;
                    }
                    let Some((_, y)) = self.locate(ci.id, cj.id, &x) else { continue };
                    if let Some((_, back)) = self.locate(cj.id, ci.id, &y) {
                        round = round.max(max_abs_diff(&back, &x));
                    }
                    for ck in &self.charts {
                        if ck.id == ci.id || ck.id == cj.id {
                            continue;
                        }
                        let (Some((_, z1)), Some((_, z2))) =
                            (self.locate(cj.id, ck.id, &y), self.locate(ci.id, ck.id, &x))
                        else {
                            continue;
                        };
                        cocycle = cocycle.max(max_abs_diff(&z1, &z2));
                    }
                }
            }
        }
        (cocycle, round)
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
