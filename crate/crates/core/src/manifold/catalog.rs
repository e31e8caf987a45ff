use super::{Atlas, Chart, TransitionPiece};
use crate::error::{Error, Result};
use crate::geom::Rect;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Catalog ids with one-line descriptions.
pub const MANIFOLD_CATALOG: &[(&str, &str)] = &[
    ("interval", "[0,1] (params lo, hi), one chart, two boundary faces"),
    ("square", "[0,1]^2, one chart, four boundary faces"),
    ("circle", "S^1 as two angle charts [-pi/4, 5pi/4] and [-5pi/4, pi/4]"),
    ("torus", "S^1 x S^1, four product charts"),
    ("cylinder", "[0,1] x S^1, two charts, boundary faces at t = 0 and t = 1"),
];

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

pub fn builtin_manifold(id: &str, params: &BTreeMap<String, f64>) -> Result<Atlas> {
    let lo = param(params, "lo", 0.0);
    let hi = param(params, "hi", 1.0);
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
    }
    let mut atlas = match id {
        "interval" => interval(lo, hi),
        "square" => product(&interval(lo, hi), &interval(lo, hi)),
        "circle" => circle(),
        "torus" => product(&circle(), &circle()),
        "cylinder" => product(&interval(lo, hi), &circle()),
        other => return Err(Error::InvalidArgument(format!("unknown manifold '{other}'"))),
    };
    atlas.name = id.to_string();
    Ok(atlas)
}

pub fn interval(lo: f64, hi: f64) -> Atlas {
    Atlas {
        name: "interval".into(),
        dim: 1,
        charts: vec![Chart { id: 0, domain: Rect::closed(&[lo], &[hi]), face_lo: vec![true], face_hi: vec![true] }],
        pieces: vec![],
        periodic: vec![false],
    }
}

pub fn circle() -> Atlas {
    let q = PI / 4.0;
    let a = Chart { id: 0, domain: Rect::closed(&[-q], &[5.0 * q]), face_lo: vec![false], face_hi: vec![false] };
    let b = Chart { id: 1, domain: Rect::closed(&[-5.0 * q], &[q]), face_lo: vec![false], face_hi: vec![false] };
    let pieces = vec![
        TransitionPiece { from: 0, to: 1, overlap: Rect::closed(&[-q], &[q]), shift: vec![0.0] },
        TransitionPiece { from: 0, to: 1, overlap: Rect::closed(&[3.0 * q], &[5.0 * q]), shift: vec![-2.0 * PI] },
        TransitionPiece { from: 1, to: 0, overlap: Rect::closed(&[-q], &[q]), shift: vec![0.0] },
        TransitionPiece { from: 1, to: 0, overlap: Rect::closed(&[-5.0 * q], &[-3.0 * q]), shift: vec![2.0 * PI] },
    ];
    Atlas { name: "circle".into(), dim: 1, charts: vec![a, b], pieces, periodic: vec![true] }
}

fn axis_pieces(a: &Atlas, from: usize, to: usize) -> Vec<(Rect, Vec<f64>)> {
    if from == to {
        return vec![(a.charts[from].domain.clone(), vec![0.0; a.dim])];
    }
    a.pieces
        .iter()
        .filter(|p| p.from == from && p.to == to)
        .map(|p| (p.overlap.clone(), p.shift.clone()))
        .collect()
}

/// Product atlas; chart `(i, j)` gets id `i * n2 + j`.
pub fn product(a: &Atlas, b: &Atlas) -> Atlas {
    let n2 = b.charts.len();
    let mut charts = Vec::new();
    for ca in &a.charts {
        for cb in &b.charts {
            let mut axes = ca.domain.axes.clone();
            axes.extend(cb.domain.axes.iter().cloned());
            charts.push(Chart {
                id: ca.id * n2 + cb.id,
                domain: Rect::new(axes),
                face_lo: ca.face_lo.iter().chain(&cb.face_lo).copied().collect(),
                face_hi: ca.face_hi.iter().chain(&cb.face_hi).copied().collect(),
            });
        }
    }
    let mut pieces = Vec::new();
    for from in 0..charts.len() {
        for to in 0..charts.len() {
            if from == to {
                continue;
            }
            let (fa, fb) = (from / n2, from % n2);
            let (ta, tb) = (to / n2, to % n2);
            for (ra, sa) in axis_pieces(a, fa, ta) {
                for (rb, sb) in axis_pieces(b, fb, tb) {
                    let mut axes = ra.axes.clone();
                    axes.extend(rb.axes.iter().cloned());
                    let mut shift = sa.clone();
                    shift.extend(sb.iter().copied());
                    pieces.push(TransitionPiece { from, to, overlap: Rect::new(axes), shift });
                }
            }
        }
    }
    Atlas {
        name: format!("{}x{}", a.name, b.name),
        dim: a.dim + b.dim,
        charts,
        pieces,
        periodic: a.periodic.iter().chain(&b.periodic).copied().collect(),
    }
}
