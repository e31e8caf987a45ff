//! Boxes, balls and set expressions in chart coordinates.

use serde::Serialize;

/// Tolerance used when deciding whether a box side sits on a chart edge.
pub const EDGE_TOL: f64 = 1e-12;

/// Interval with independently open or closed ends. Infinite ends are allowed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn everything() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > o.lo {
            (self.lo, self.lo_closed)
        } else if o.lo > self.lo {
            (o.lo, o.lo_closed)
        } else {
            (self.lo, self.lo_closed && o.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < o.hi {
            (self.hi, self.hi_closed)
        } else if o.hi < self.hi {
            (o.hi, o.hi_closed)
        } else {
            (self.hi, self.hi_closed && o.hi_closed)
        };
        Interval { lo, hi, lo_closed, hi_closed }
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
            lo_closed: true,
            hi_closed: true,
        }
    }
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub axes: Vec<Interval>,
}

impl Rect {
    pub fn new(axes: Vec<Interval>) -> Self {
        Self { axes }
    }

    pub fn closed(lo: &[f64], hi: &[f64]) -> Self {
        Self { axes: lo.iter().zip(hi).map(|(&a, &b)| Interval::closed(a, b)).collect() }
    }

    pub fn open(lo: &[f64], hi: &[f64]) -> Self {
        Self { axes: lo.iter().zip(hi).map(|(&a, &b)| Interval::open(a, b)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn lo(&self) -> Vec<f64> {
        self.axes.iter().map(|i| i.lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.axes.iter().map(|i| i.hi).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(x).all(|(i, &v)| i.contains(v))
    }

    /// Closed containment with slack `tol` on every side.
    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        self.axes.iter().zip(x).all(|(i, &v)| v >= i.lo - tol && v <= i.hi + tol)
    }

    pub fn is_empty(&self) -> bool {
        self.axes.iter().any(Interval::is_empty)
    }

    pub fn intersect(&self, o: &Rect) -> Rect {
        Rect { axes: self.axes.iter().zip(&o.axes).map(|(a, b)| a.intersect(b)).collect() }
    }

    pub fn hull(&self, o: &Rect) -> Rect {
        Rect { axes: self.axes.iter().zip(&o.axes).map(|(a, b)| a.hull(b)).collect() }
    }

    pub fn translate(&self, shift: &[f64]) -> Rect {
        Rect {
            axes: self
                .axes
                .iter()
                .zip(shift)
                .map(|(i, &s)| Interval { lo: i.lo + s, hi: i.hi + s, ..i.clone() })
                .collect(),
        }
    }

    pub fn closure(&self) -> Rect {
        Rect {
            axes: self.axes.iter().map(|i| Interval { lo_closed: true, hi_closed: true, ..i.clone() }).collect(),
        }
    }

    pub fn interior(&self) -> Rect {
        Rect {
            axes: self.axes.iter().map(|i| Interval { lo_closed: false, hi_closed: false, ..i.clone() }).collect(),
        }
    }

    /// Nearest point of the closed box.
    pub fn project(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &v), i) in out.iter_mut().zip(x).zip(&self.axes) {
            *o = v.clamp(i.lo, i.hi);
        }
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|i| {
                format!(
                    "{}{}, {}{}",
                    if i.lo_closed { '[' } else { '(' },
                    i.lo,
                    i.hi,
                    if i.hi_closed { ']' } else { ')' }
                )
            })
            .collect();
        parts.join(" x ")
    }
}

/// Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub closed: bool,
}

impl Ball {
    pub fn dist(&self, x: &[f64]) -> f64 {
        self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d = self.dist(x);
        if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        }
    }
}

/// `exp(-1/u)` for `u > 0`, else 0.
pub fn flat_exp(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step, 0 for `u <= 0` and exactly 1 for `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = flat_exp(u);
    a / (a + flat_exp(1.0 - u))
}

fn rect_plateau(r: &Rect, x: &[f64], half: f64, offset: f64, frame: &Frame) -> f64 {
    let mut p = 1.0;
    for (k, (i, &v)) in r.axes.iter().zip(x).enumerate() {
        if frame.lo_is_boundary(k, i) {
            p *= smooth_step((v - i.lo - offset) / half);
        }
        if frame.hi_is_boundary(k, i) {
            p *= smooth_step((i.hi - v - offset) / half);
        }
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

/// Safety distance for the conservative box queries.
const COVER_SLACK: f64 = 1e-9;

fn corners(b: &Rect) -> Vec<Vec<f64>> {
    let d = b.dim();
    (0..1usize << d)
        .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { b.axes[k].hi } else { b.axes[k].lo }).collect())
        .collect()
}

/// Whether both halves of `b`, split along its longest axis, pass `test`,
/// recursing at most `depth` times. Lets unions cover boxes jointly.
fn split_covered(b: &Rect, depth: usize, test: &dyn Fn(&Rect) -> bool) -> bool {
    if depth == 0 || b.dim() == 0 {
        return false;
    }
    let k = (0..b.dim()).max_by(|&i, &j| b.axes[i].width().partial_cmp(&b.axes[j].width()).unwrap()).unwrap();
    let mid = 0.5 * (b.axes[k].lo + b.axes[k].hi);
    let (mut lo, mut hi) = (b.clone(), b.clone());
    lo.axes[k].hi = mid;
    hi.axes[k].lo = mid;
    let covered = |h: &Rect| test(h) || split_covered(h, depth - 1, test);
    covered(&lo) && covered(&hi)
}

fn box_dist(b: &Rect, x: &[f64]) -> f64 {
    b.axes.iter().zip(x).map(|(i, &v)| (v - v.clamp(i.lo, i.hi)).powi(2)).sum::<f64>().sqrt()
}

fn rect_one_on(r: &Rect, b: &Rect, m: f64, frame: &Frame) -> bool {
    r.axes.iter().zip(&b.axes).enumerate().all(|(k, (i, j))| {
        (!frame.lo_is_boundary(k, i) || j.lo >= i.lo + m + COVER_SLACK)
            && (!frame.hi_is_boundary(k, i) || j.hi <= i.hi - m - COVER_SLACK)
    })
}

fn rect_outer_zero_on(r: &Rect, b: &Rect, m: f64, frame: &Frame) -> bool {
    r.axes.iter().zip(&b.axes).enumerate().any(|(k, (i, j))| {
        (frame.lo_is_boundary(k, i) && j.hi <= i.lo - m - COVER_SLACK)
            || (frame.hi_is_boundary(k, i) && j.lo >= i.hi + m + COVER_SLACK)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Shape {
    Rect(Rect),
    Ball(Ball),
}

impl Shape {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Rect(r) => r.contains(x),
            Shape::Ball(b) => b.contains(x),
        }
    }

    pub fn bounding(&self) -> Rect {
        match self {
            Shape::Rect(r) => r.closure(),
            Shape::Ball(b) => Rect::closed(
                &b.center.iter().map(|c| c - b.radius).collect::<Vec<_>>(),
                &b.center.iter().map(|c| c + b.radius).collect::<Vec<_>>(),
            ),
        }
    }
}

/// Chart domain together with the sides that are genuine boundary of the manifold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub domain: Rect,
    pub face_lo: Vec<bool>,
    pub face_hi: Vec<bool>,
}

impl Frame {
    pub fn unbounded(dim: usize) -> Self {
        Frame {
            domain: Rect::new(vec![Interval::everything(); dim]),
            face_lo: vec![false; dim],
            face_hi: vec![false; dim],
        }
    }

    /// Whether the lower side of `i` on `axis` is part of the topological boundary
    /// of the set inside the manifold.
    pub fn lo_is_boundary(&self, axis: usize, i: &Interval) -> bool {
        if i.lo.is_infinite() {
            return false;
        }
        let d = self.domain.axes[axis].lo;
        if self.face_lo[axis] && i.lo <= d + EDGE_TOL && (i.lo_closed || i.lo < d - EDGE_TOL) {
            return false;
        }
        true
    }

    pub fn hi_is_boundary(&self, axis: usize, i: &Interval) -> bool {
        if i.hi.is_infinite() {
            return false;
        }
        let d = self.domain.axes[axis].hi;
        if self.face_hi[axis] && i.hi >= d - EDGE_TOL && (i.hi_closed || i.hi > d + EDGE_TOL) {
            return false;
        }
        true
    }
}

/// Set expression over boxes and balls.
///
/// `Clip(r, e)` is `e ∩ r` where `r` only records which part of a transported
/// expression is meaningful; shrinking and expanding leave `r` alone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RegionExpr {
    Empty,
    All,
    Shape(Shape),
    Union(Vec<RegionExpr>),
    Intersection(Vec<RegionExpr>),
    Difference(Box<RegionExpr>, Box<RegionExpr>),
    Clip(Rect, Box<RegionExpr>),
    /// Where the plateau of `expr` (see [`RegionExpr::plateau`]) equals one or zero.
    Level { expr: Box<RegionExpr>, margin: f64, frame: Frame, one: bool },
}

impl RegionExpr {
    pub fn rect(r: Rect) -> Self {
        RegionExpr::Shape(Shape::Rect(r))
    }

    pub fn ball(center: Vec<f64>, radius: f64, closed: bool) -> Self {
        RegionExpr::Shape(Shape::Ball(Ball { center, radius, closed }))
    }

    pub fn union(parts: Vec<RegionExpr>) -> Self {
        RegionExpr::Union(parts).simplify()
    }

    pub fn intersection(parts: Vec<RegionExpr>) -> Self {
        RegionExpr::Intersection(parts).simplify()
    }

    pub fn difference(a: RegionExpr, b: RegionExpr) -> Self {
        RegionExpr::Difference(Box::new(a), Box::new(b)).simplify()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            RegionExpr::Empty => false,
            RegionExpr::All => true,
            RegionExpr::Shape(s) => s.contains(x),
            RegionExpr::Union(v) => v.iter().any(|e| e.contains(x)),
            RegionExpr::Intersection(v) => v.iter().all(|e| e.contains(x)),
            RegionExpr::Difference(a, b) => a.contains(x) && !b.contains(x),
            RegionExpr::Clip(r, e) => r.contains(x) && e.contains(x),
            RegionExpr::Level { expr, margin, frame, one } => {
                let v = expr.plateau(x, *margin, frame);
                if *one {
                    v == 1.0
                } else {
                    v == 0.0
                }
            }
        }
    }

    pub fn translate(&self, shift: &[f64]) -> RegionExpr {
        match self {
            RegionExpr::Empty | RegionExpr::All => self.clone(),
            RegionExpr::Shape(Shape::Rect(r)) => RegionExpr::rect(r.translate(shift)),
            RegionExpr::Shape(Shape::Ball(b)) => RegionExpr::Shape(Shape::Ball(Ball {
                center: b.center.iter().zip(shift).map(|(c, s)| c + s).collect(),
                ..b.clone()
            })),
            RegionExpr::Union(v) => RegionExpr::Union(v.iter().map(|e| e.translate(shift)).collect()),
            RegionExpr::Intersection(v) => {
                RegionExpr::Intersection(v.iter().map(|e| e.translate(shift)).collect())
            }
            RegionExpr::Difference(a, b) => {
                RegionExpr::Difference(Box::new(a.translate(shift)), Box::new(b.translate(shift)))
            }
            RegionExpr::Clip(r, e) => RegionExpr::Clip(r.translate(shift), Box::new(e.translate(shift))),
            RegionExpr::Level { expr, margin, frame, one } => RegionExpr::Level {
                expr: Box::new(expr.translate(shift)),
                margin: *margin,
                frame: Frame { domain: frame.domain.translate(shift), ..frame.clone() },
                one: *one,
            },
        }
    }

    /// Superset of the closure (exact for unions and differences of primitives).
    pub fn closure(&self) -> RegionExpr {
        match self {
            RegionExpr::Empty | RegionExpr::All => self.clone(),
            RegionExpr::Shape(Shape::Rect(r)) => RegionExpr::rect(r.closure()),
            RegionExpr::Shape(Shape::Ball(b)) => {
                RegionExpr::Shape(Shape::Ball(Ball { closed: true, ..b.clone() }))
            }
            RegionExpr::Union(v) => RegionExpr::Union(v.iter().map(|e| e.closure()).collect()),
            RegionExpr::Intersection(v) => RegionExpr::Intersection(v.iter().map(|e| e.closure()).collect()),
            RegionExpr::Difference(a, b) => {
                RegionExpr::Difference(Box::new(a.closure()), Box::new(b.interior()))
            }
            RegionExpr::Clip(r, e) => RegionExpr::Clip(r.clone(), Box::new(e.closure())),
            RegionExpr::Level { .. } => self.clone(),
        }
    }

    /// Subset of the interior, dual to [`RegionExpr::closure`].
    pub fn interior(&self) -> RegionExpr {
        match self {
            RegionExpr::Empty | RegionExpr::All => self.clone(),
            RegionExpr::Shape(Shape::Rect(r)) => RegionExpr::rect(r.interior()),
            RegionExpr::Shape(Shape::Ball(b)) => {
                RegionExpr::Shape(Shape::Ball(Ball { closed: false, ..b.clone() }))
            }
            RegionExpr::Union(v) => RegionExpr::Union(v.iter().map(|e| e.interior()).collect()),
            RegionExpr::Intersection(v) => {
                RegionExpr::Intersection(v.iter().map(|e| e.interior()).collect())
            }
            RegionExpr::Difference(a, b) => {
                RegionExpr::Difference(Box::new(a.interior()), Box::new(b.closure()))
            }
            RegionExpr::Clip(r, e) => RegionExpr::Clip(r.clone(), Box::new(e.interior())),
            RegionExpr::Level { .. } => self.clone(),
        }
    }

    /// Contracts every boundary side by `m`. Sides lying on a manifold face are kept.
    /// `emptied` is set when some primitive collapses.
    pub fn shrink(&self, m: f64, frame: &Frame, emptied: &mut bool) -> RegionExpr {
        match self {
            RegionExpr::Empty | RegionExpr::All => self.clone(),
            RegionExpr::Shape(Shape::Rect(r)) => {
                let axes: Vec<Interval> = r
                    .axes
                    .iter()
                    .enumerate()
                    .map(|(k, i)| {
                        let mut j = i.clone();
                        if frame.lo_is_boundary(k, i) {
                            j.lo += m;
                        }
                        if frame.hi_is_boundary(k, i) {
                            j.hi -= m;
                        }
                        j
                    })
                    .collect();
                let out = Rect::new(axes);
                if out.is_empty() {
                    *emptied = true;
                    RegionExpr::Empty
                } else {
                    RegionExpr::rect(out)
                }
            }
            RegionExpr::Shape(Shape::Ball(b)) => {
                if b.radius - m <= 0.0 {
                    *emptied = true;
                    RegionExpr::Empty
                } else {
                    RegionExpr::Shape(Shape::Ball(Ball { radius: b.radius - m, ..b.clone() }))
                }
            }
            RegionExpr::Union(v) => RegionExpr::Union(v.iter().map(|e| e.shrink(m, frame, emptied)).collect()),
            RegionExpr::Intersection(v) => {
                RegionExpr::Intersection(v.iter().map(|e| e.shrink(m, frame, emptied)).collect())
            }
            RegionExpr::Difference(a, b) => RegionExpr::Difference(
                Box::new(a.shrink(m, frame, emptied)),
                Box::new(b.expand(m, frame, emptied)),
            ),
            RegionExpr::Clip(r, e) => RegionExpr::Clip(r.clone(), Box::new(e.shrink(m, frame, emptied))),
            // level sets are bookkeeping for smoothness claims and are not resized
            RegionExpr::Level { .. } => self.clone(),
        }
        .simplify()
    }

    /// Grows every side by `m`.
    pub fn expand(&self, m: f64, frame: &Frame, emptied: &mut bool) -> RegionExpr {
        match self {
            RegionExpr::Empty | RegionExpr::All => self.clone(),
            RegionExpr::Shape(Shape::Rect(r)) => RegionExpr::rect(Rect::new(
                r.axes
                    .iter()
                    .map(|i| Interval { lo: i.lo - m, hi: i.hi + m, ..i.clone() })
                    .collect(),
            )),
            RegionExpr::Shape(Shape::Ball(b)) => {
                RegionExpr::Shape(Shape::Ball(Ball { radius: b.radius + m, ..b.clone() }))
            }
            RegionExpr::Union(v) => RegionExpr::Union(v.iter().map(|e| e.expand(m, frame, emptied)).collect()),
            RegionExpr::Intersection(v) => {
                RegionExpr::Intersection(v.iter().map(|e| e.expand(m, frame, emptied)).collect())
            }
            RegionExpr::Difference(a, b) => RegionExpr::Difference(
                Box::new(a.expand(m, frame, emptied)),
                Box::new(b.shrink(m, frame, emptied)),
            ),
            RegionExpr::Clip(r, e) => RegionExpr::Clip(r.clone(), Box::new(e.expand(m, frame, emptied))),
            RegionExpr::Level { .. } => self.clone(),
        }
        .simplify()
    }

    /// Closed box containing the set, `None` if unbounded.
    pub fn bounding(&self) -> Option<Rect> {
        match self {
            RegionExpr::Empty => Some(Rect::new(vec![])),
            RegionExpr::All => None,
            RegionExpr::Shape(s) => Some(s.bounding()),
            RegionExpr::Union(v) => {
                let mut acc: Option<Rect> = None;
                for e in v {
                    if matches!(e, RegionExpr::Empty) {
                        continue;
                    }
                    let b = e.bounding()?;
                    acc = Some(match acc {
                        None => b,
                        Some(a) => a.hull(&b),
                    });
                }
                Some(acc.unwrap_or_else(|| Rect::new(vec![])))
            }
            RegionExpr::Intersection(v) => {
                let mut acc: Option<Rect> = None;
                for e in v {
                    if let Some(b) = e.bounding() {
                        if b.dim() == 0 {
                            return Some(b);
                        }
                        acc = Some(match acc {
                            None => b,
                            Some(a) => a.intersect(&b),
                        });
                    }
                }
                acc
            }
            RegionExpr::Difference(a, _) => a.bounding(),
            RegionExpr::Clip(r, e) => match e.bounding() {
                Some(b) if b.dim() == 0 => Some(b),
                Some(b) => Some(r.closure().intersect(&b)),
                None => Some(r.closure()),
            },
            RegionExpr::Level { expr, one: true, .. } => expr.bounding(),
            RegionExpr::Level { .. } => None,
        }
    }

    /// Smooth plateau of the set: equals 1 on `shrink(self, m)`, vanishes outside
    /// `shrink(self, m/2)`, values in [0, 1].
    pub fn plateau(&self, x: &[f64], m: f64, frame: &Frame) -> f64 {
        self.plateau_mode(x, m, frame, true)
    }

    /// Outer plateau: 1 on `expand(self, m/2)`, 0 outside `expand(self, m)`.
    pub fn outer_plateau(&self, x: &[f64], m: f64, frame: &Frame) -> f64 {
        self.plateau_mode(x, m, frame, false)
    }

    fn plateau_mode(&self, x: &[f64], m: f64, frame: &Frame, inner: bool) -> f64 {
        let half = 0.5 * m;
        let offset = if inner { half } else { -m };
        match self {
            RegionExpr::Empty => 0.0,
            RegionExpr::All => 1.0,
            RegionExpr::Shape(Shape::Rect(r)) => rect_plateau(r, x, half, offset, frame),
            RegionExpr::Shape(Shape::Ball(b)) => smooth_step((b.radius - b.dist(x) - offset) / half),
            RegionExpr::Union(v) => {
                1.0 - v.iter().map(|e| 1.0 - e.plateau_mode(x, m, frame, inner)).product::<f64>()
            }
            RegionExpr::Intersection(v) => v.iter().map(|e| e.plateau_mode(x, m, frame, inner)).product(),
            RegionExpr::Difference(a, b) => {
                let pa = a.plateau_mode(x, m, frame, inner);
                if pa == 0.0 {
                    return 0.0;
                }
                pa * (1.0 - b.plateau_mode(x, m, frame, !inner))
            }
            RegionExpr::Clip(r, e) => {
                let pr = rect_plateau(r, x, half, offset, frame);
                if pr == 0.0 {
                    return 0.0;
                }
                pr * e.plateau_mode(x, m, frame, inner)
            }
            RegionExpr::Level { .. } => {
                if self.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether the closed box `b` certainly lies inside the set. May answer
    /// `false` for boxes that are covered only jointly by several parts.
    pub fn covers_box(&self, b: &Rect) -> bool {
        match self {
            RegionExpr::Empty => false,
            RegionExpr::All => true,
            RegionExpr::Shape(Shape::Rect(r)) => r.axes.iter().zip(&b.axes).all(|(i, j)| {
                (i.lo < j.lo || (i.lo == j.lo && i.lo_closed)) && (i.hi > j.hi || (i.hi == j.hi && i.hi_closed))
            }),
            RegionExpr::Shape(Shape::Ball(ball)) => corners(b).iter().all(|c| ball.contains(c)),
            RegionExpr::Union(v) => v.iter().any(|e| e.covers_box(b)) || split_covered(b, 6, &|h| v.iter().any(|e| e.covers_box(h))),
            RegionExpr::Intersection(v) => v.iter().all(|e| e.covers_box(b)),
            RegionExpr::Difference(a, c) => a.covers_box(b) && !c.meets_box(b),
            RegionExpr::Clip(r, e) => RegionExpr::rect(r.clone()).covers_box(b) && e.covers_box(b),
            RegionExpr::Level { expr, margin, frame, one: true } => expr.plateau_one_on(b, *margin, frame),
            RegionExpr::Level { .. } => false,
        }
    }

    /// Whether the closed box `b` may intersect the set; `false` is certain.
    pub fn meets_box(&self, b: &Rect) -> bool {
        match self {
            RegionExpr::Empty => false,
            RegionExpr::All => true,
            RegionExpr::Shape(Shape::Rect(r)) => r.axes.iter().zip(&b.axes).all(|(i, j)| i.lo <= j.hi && j.lo <= i.hi),
            RegionExpr::Shape(Shape::Ball(ball)) => box_dist(b, &ball.center) <= ball.radius,
            RegionExpr::Union(v) => v.iter().any(|e| e.meets_box(b)),
            RegionExpr::Intersection(v) => v.iter().all(|e| e.meets_box(b)),
            RegionExpr::Difference(a, c) => a.meets_box(b) && !c.covers_box(b),
            RegionExpr::Clip(r, e) => RegionExpr::rect(r.clone()).meets_box(b) && e.meets_box(b),
            RegionExpr::Level { .. } => true,
        }
    }

    /// Whether the plateau with margin `m` certainly equals 1 on the box.
    pub fn plateau_one_on(&self, b: &Rect, m: f64, frame: &Frame) -> bool {
        match self {
            RegionExpr::Empty => false,
            RegionExpr::All => true,
            RegionExpr::Shape(Shape::Rect(r)) => rect_one_on(r, b, m, frame),
            RegionExpr::Shape(Shape::Ball(ball)) => {
                corners(b).iter().all(|c| ball.dist(c) <= ball.radius - m - COVER_SLACK)
            }
            RegionExpr::Union(v) => v.iter().any(|e| e.plateau_one_on(b, m, frame)),
            RegionExpr::Intersection(v) => v.iter().all(|e| e.plateau_one_on(b, m, frame)),
            RegionExpr::Difference(a, c) => a.plateau_one_on(b, m, frame) && c.outer_zero_on(b, m, frame),
            RegionExpr::Clip(r, e) => rect_one_on(r, b, m, frame) && e.plateau_one_on(b, m, frame),
            RegionExpr::Level { .. } => false,
        }
    }

    /// Whether the outer plateau with margin `m` certainly vanishes on the box.
    fn outer_zero_on(&self, b: &Rect, m: f64, frame: &Frame) -> bool {
        match self {
            RegionExpr::Empty => true,
            RegionExpr::All => false,
            RegionExpr::Shape(Shape::Rect(r)) => rect_outer_zero_on(r, b, m, frame),
            RegionExpr::Shape(Shape::Ball(ball)) => box_dist(b, &ball.center) >= ball.radius + m + COVER_SLACK,
            RegionExpr::Union(v) => v.iter().all(|e| e.outer_zero_on(b, m, frame)),
            RegionExpr::Intersection(v) => v.iter().any(|e| e.outer_zero_on(b, m, frame)),
            RegionExpr::Difference(a, _) => a.outer_zero_on(b, m, frame),
            RegionExpr::Clip(r, e) => rect_outer_zero_on(r, b, m, frame) || e.outer_zero_on(b, m, frame),
            RegionExpr::Level { .. } => false,
        }
    }

    /// The set times the whole line, as a set in one more dimension with the new
    /// axis first. `None` when a ball is involved.
    pub fn prepend_axis(&self) -> Option<RegionExpr> {
        Some(match self {
            RegionExpr::Empty | RegionExpr::All => self.clone(),
            RegionExpr::Shape(Shape::Rect(r)) => {
                let mut axes = vec![Interval::everything()];
                axes.extend(r.axes.iter().cloned());
                RegionExpr::rect(Rect::new(axes))
            }
            RegionExpr::Shape(Shape::Ball(_)) => return None,
            RegionExpr::Union(v) => RegionExpr::Union(v.iter().map(|e| e.prepend_axis()).collect::<Option<_>>()?),
            RegionExpr::Intersection(v) => {
                RegionExpr::Intersection(v.iter().map(|e| e.prepend_axis()).collect::<Option<_>>()?)
            }
            RegionExpr::Difference(a, b) => {
                RegionExpr::Difference(Box::new(a.prepend_axis()?), Box::new(b.prepend_axis()?))
            }
            RegionExpr::Clip(r, e) => {
                let mut axes = vec![Interval::everything()];
                axes.extend(r.axes.iter().cloned());
                RegionExpr::Clip(Rect::new(axes), Box::new(e.prepend_axis()?))
            }
            RegionExpr::Level { expr, margin, frame, one } => {
                let mut axes = vec![Interval::everything()];
                axes.extend(frame.domain.axes.iter().cloned());
                let mut face_lo = vec![false];
                face_lo.extend(&frame.face_lo);
                let mut face_hi = vec![false];
                face_hi.extend(&frame.face_hi);
                RegionExpr::Level {
                    expr: Box::new(expr.prepend_axis()?),
                    margin: *margin,
                    frame: Frame { domain: Rect::new(axes), face_lo, face_hi },
                    one: *one,
                }
            }
        })
    }

    pub fn is_trivially_empty(&self) -> bool {
        matches!(self, RegionExpr::Empty)
    }

    /// Structural simplification; never changes membership.
    pub fn simplify(self) -> RegionExpr {
        match self {
            RegionExpr::Shape(Shape::Rect(r)) if r.is_empty() => RegionExpr::Empty,
            RegionExpr::Union(v) => {
                let mut out = Vec::new();
                for e in v {
                    match e.simplify() {
                        RegionExpr::Empty => {}
                        RegionExpr::All => return RegionExpr::All,
                        RegionExpr::Union(w) => out.extend(w),
                        e => out.push(e),
                    }
                }
                match out.len() {
                    0 => RegionExpr::Empty,
                    1 => out.pop().unwrap(),
                    _ => RegionExpr::Union(out),
                }
            }
            RegionExpr::Intersection(v) => {
                let mut out: Vec<RegionExpr> = Vec::new();
                let mut rect: Option<Rect> = None;
                for e in v {
                    match e.simplify() {
                        RegionExpr::Empty => return RegionExpr::Empty,
                        RegionExpr::All => {}
                        RegionExpr::Shape(Shape::Rect(r)) => {
                            rect = Some(match rect {
                                None => r,
                                Some(a) => a.intersect(&r),
                            })
                        }
                        RegionExpr::Intersection(w) => out.extend(w),
                        e => out.push(e),
                    }
                }
                if let Some(r) = rect {
                    if r.is_empty() {
                        return RegionExpr::Empty;
                    }
                    out.insert(0, RegionExpr::rect(r));
                }
                match out.len() {
                    0 => RegionExpr::All,
                    1 => out.pop().unwrap(),
                    _ => RegionExpr::Intersection(out),
                }
            }
            RegionExpr::Difference(a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match (&a, &b) {
                    (RegionExpr::Empty, _) => RegionExpr::Empty,
                    (_, RegionExpr::Empty) => a,
                    (_, RegionExpr::All) => RegionExpr::Empty,
                    _ => RegionExpr::Difference(Box::new(a), Box::new(b)),
                }
            }
            RegionExpr::Clip(r, e) => match e.simplify() {
                RegionExpr::Empty => RegionExpr::Empty,
                e => {
                    if r.is_empty() {
                        RegionExpr::Empty
                    } else {
                        RegionExpr::Clip(r, Box::new(e))
                    }
                }
            },
            e => e,
        }
    }
}
