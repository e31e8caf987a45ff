//! Inductive smoothing of a section over a finite cover of trivializing boxes.

mod cover;

pub use cover::{build_cover, Cover, CoverEntry};

use crate::bundle::{fibre_field_to_section, tube_contains, Bundle, FibreChart, Section, Tube, TubeReport};
use crate::error::{Error, Result};
use crate::fields::{smooth_on_region, ChartField, LocalSmoothing, RadiusSchedule};
use crate::geom::RegionExpr;
use crate::homotopy::{concat_homotopies, step_homotopy, Homotopy};
use crate::manifold::{GridPoint, Region};
use crate::verify::{compare_sections, smoothness_certificate, Certificate, CompareMode, SmoothnessSteps};
use serde::Serialize;

/// Geometric margins of the cover and of the derived sets.
#[derive(Clone, Debug, Serialize)]
pub struct Margins {
    /// Growth of a bisection leaf into `V`.
    pub cover: f64,
    /// Contraction of `V ∩ U` into `U_i`.
    pub u_shrink: f64,
    /// Contraction of `A` into `A'`.
    pub a_shrink: f64,
    pub max_depth: usize,
    /// Required distance between the `σ ± ε` image and the edge of a fibre chart.
    pub fibre_slack: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { cover: 0.5, u_shrink: 0.02, a_shrink: 0.02, max_depth: 12, fibre_slack: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothingProblem {
    pub bundle: Bundle,
    pub sigma: Section,
    /// Closed set where the result must be smooth.
    pub l: Region,
    /// Open set where changes are allowed.
    pub u: Region,
    /// Open set where `σ` is already smooth.
    pub a: Region,
    pub tube: Tube,
    /// Grid points per chart axis.
    pub resolution: usize,
    pub schedule: RadiusSchedule,
    pub margins: Margins,
    /// Steps of the smoothness certificate in the report.
    pub certify: SmoothnessSteps,
}

impl SmoothingProblem {
    /// Problem with `A` = the smooth region of `σ` and default margins.
    pub fn new(bundle: Bundle, sigma: Section, l: Region, u: Region, tube: Tube, resolution: usize) -> Self {
        let a = sigma.smooth.clone();
        let schedule = RadiusSchedule::for_dim(bundle.base.dim);
        SmoothingProblem {
            bundle,
            sigma,
            l,
            u,
            a,
            tube,
            resolution,
            schedule,
            margins: Margins::default(),
            certify: SmoothnessSteps::default(),
        }
    }

    pub fn a_prime(&self) -> Region {
        self.a.shrink(&self.bundle.base, self.margins.a_shrink)
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        self.bundle.base.sample_grid(self.resolution)
    }

    /// `L ∖ U ⊂ A'` and `A ⊂` smooth region of `σ`, both on the grid.
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 3 {
            return Err(Error::InvalidArgument(format!("resolution {} is below 3", self.resolution)));
        }
        let n = self.bundle.base.charts.len();
        for (name, r) in [("L", &self.l), ("U", &self.u), ("A", &self.a)] {
            if r.exprs.len() != n {
                return Err(Error::InvalidRegion(format!("{name} has {} chart expressions, atlas has {n}", r.exprs.len())));
            }
        }
        let ap = self.a_prime();
        for p in self.grid() {
            if self.l.contains(p.chart, &p.x) && !self.u.contains(p.chart, &p.x) && !ap.contains(p.chart, &p.x) {
                return Err(Error::InvalidRegion(format!(
                    "point {:?} of chart {} is in L outside U but not in the shrunk smooth set A'",
                    p.x, p.chart
                )));
            }
            if self.a.contains(p.chart, &p.x) && !self.sigma.smooth.contains(p.chart, &p.x) {
                return Err(Error::InvalidRegion(format!(
                    "A contains point {:?} of chart {} where the section is not declared smooth",
                    p.x, p.chart
                )));
            }
            if !(self.tube.width_at(p.chart, &p.x) > 0.0) {
                return Err(Error::InvalidArgument(format!("tube width not positive at {:?}", p.x)));
            }
        }
        Ok(())
    }
}

/// What one inductive step did.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub chart: usize,
    pub changed: bool,
    pub radius: Option<f64>,
    pub halvings: usize,
    pub plateau_margin: Option<f64>,
    pub sup_distance: f64,
    pub tolerance_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    pub k: usize,
    pub cover: Vec<CoverEntry>,
    pub steps: Vec<StepRecord>,
    pub tube: TubeReport,
    /// Largest `|τ - σ|` over grid points outside `U`; zero when exact.
    pub off_u_max_deviation: f64,
    pub certificates: Vec<Certificate>,
}

#[derive(Clone, Debug)]
pub struct SmoothingResult {
    pub tau: Section,
    pub homotopy: Homotopy,
    pub report: SmoothingReport,
}

/// Representations in chart `c` of the grid points that fall in the closed box.
pub(crate) fn chart_points(problem: &SmoothingProblem, grid: &[GridPoint], c: usize, b: &crate::geom::Rect) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for p in grid {
        for (cid, y) in problem.bundle.base.representations(p.chart, &p.x) {
            if cid == c && b.contains(&y) {
                out.push(y);
            }
        }
    }
    out
}

/// Step `a` (from 0): smooths `τ_prev` near `L_a'` inside `U_a`, in the fibre
/// chart of the entry. Returns `τ_prev` itself when nothing needs smoothing.
pub fn inductive_step(
    problem: &SmoothingProblem,
    cover: &Cover,
    a: usize,
    tau_prev: &Section,
) -> Result<(Section, Homotopy, StepRecord)> {
    let bundle = &problem.bundle;
    let e = &cover.entries[a];
    let c = e.chart;
    let frame = bundle.base.charts[c].frame();
    let z = &bundle.fibre_charts[e.fibre_chart];
    let vbox = e.v.closure();
    let grid = problem.grid();
    let points = chart_points(problem, &grid, c, &vbox);
    let spacing = bundle.base.charts[c].spacing(problem.resolution);

    let prev = tau_prev.reps[c].clone();
    let zc = z.clone();
    let f = ChartField::new(vbox.clone(), prev.value_dim, move |x, out| {
        out.copy_from_slice(&zc.to_chart(&prev.eval(x)));
    })
    .with_smooth(tau_prev.smooth.exprs[c].clone());

    let ap = problem.a_prime();
    // the other half of L_a', cl(A') ∩ V_a, lies in the smooth set of τ_prev already
    let l_a = RegionExpr::intersection(vec![problem.l.exprs[c].clone(), RegionExpr::rect(e.v_prime.closure())]);
    // entries with a bounded fibre chart constrain the values over their closed boxes
    let constraints: Vec<&CoverEntry> = cover
        .entries
        .iter()
        .filter(|w| !matches!(bundle.fibre_charts[w.fibre_chart], FibreChart::Euclidean { .. }))
        .collect();
    let tolerance = |x: &[f64]| -> f64 {
        let cur = tau_prev.eval(c, x);
        let mut t = problem.tube.width_at(c, x) - bundle.fibre.distance(&cur, &problem.tube.sigma.eval(c, x));
        for w in &constraints {
            let located = if w.chart == c { Some(x.to_vec()) } else { bundle.base.locate(c, w.chart, x).map(|(_, y)| y) };
            if let Some(y) = located {
                if w.v.closure().contains(&y) {
                    let v = tau_prev.eval(w.chart, &y);
                    t = t.min(bundle.fibre_charts[w.fibre_chart].slack(&v));
                }
            }
        }
        t
    };
    let local = LocalSmoothing {
        l: l_a,
        u: e.u.clone(),
        a: ap.exprs[c].clone(),
        w: z.convex_set(),
        tolerance: &tolerance,
        frame: frame.clone(),
        points: points.clone(),
        spacing,
        schedule: problem.schedule.clone(),
    };
    let out = smooth_on_region(&f, &local)?;
    let record = StepRecord {
        index: a,
        chart: c,
        changed: out.changed,
        radius: out.radius,
        halvings: out.halvings,
        plateau_margin: out.margin,
        sup_distance: out.sup_distance,
        tolerance_ratio: out.max_ratio,
    };
    if !out.changed {
        return Ok((tau_prev.clone(), Homotopy::constant(bundle, tau_prev), record));
    }
    let margin = out.margin.unwrap_or(problem.schedule.plateau_margin);
    let glue = e.u.closure();
    let mut tau = fibre_field_to_section(bundle, &out.field, z, c, &glue, tau_prev, &points, margin / 4.0)?;
    let one = RegionExpr::Level { expr: Box::new(e.u.clone()), margin, frame, one: true };
    tau.smooth = tau_prev.smooth.union(&Region::from_chart(&bundle.base, c, one));
    tau.sync_field_smoothness();
    let hom = step_homotopy(bundle, &f, &out.field, z, c, &glue, tau_prev, &points)?;

    // (a) unchanged off the glue set, (b) inside every W_j, (c) inside the tube
    for p in &grid {
        let inside = bundle
            .base
            .representations(p.chart, &p.x)
            .into_iter()
            .any(|(cid, y)| cid == c && glue.contains(&y));
        if !inside && tau.eval(p.chart, &p.x) != tau_prev.eval(p.chart, &p.x) {
            return Err(Error::Postcondition {
                condition: "unchanged off the closure of U_a".into(),
                detail: format!("chart {} point {:?}", p.chart, p.x),
            });
        }
    }
    for (j, w) in cover.entries.iter().enumerate() {
        let zj = &bundle.fibre_charts[w.fibre_chart];
        for y in chart_points(problem, &grid, w.chart, &w.v.closure()) {
            if !zj.contains(&tau.eval(w.chart, &y)) {
                return Err(Error::NeighborhoodViolation { j, chart: w.chart, point: y });
            }
        }
    }
    let tr = tube_contains(bundle, &problem.tube, &tau, &grid);
    if !(tr.max_ratio < 1.0) {
        return Err(Error::Postcondition {
            condition: "tube".into(),
            detail: format!("ratio {} at chart {} point {:?}", tr.max_ratio, tr.chart, tr.point),
        });
    }
    let (err, chart, point) = tau.compatibility_error(bundle, problem.resolution);
    if !(err <= 1e-10) {
        return Err(Error::Postcondition {
            condition: "compatibility".into(),
            detail: format!("{err:e} at chart {chart} point {point:?}"),
        });
    }
    Ok((tau, hom, record))
}

/// Smooths `σ` near `L` inside `U` and the tube; returns `τ`, a homotopy from `σ`
/// to `τ` and a report.
pub fn steenrod_smooth(problem: &SmoothingProblem) -> Result<SmoothingResult> {
    problem.validate()?;
    let cover = build_cover(problem)?;
    let grid = problem.grid();
    let mut tau = problem.sigma.clone();
    let mut homs = Vec::with_capacity(cover.entries.len());
    let mut steps = Vec::with_capacity(cover.entries.len());
    for a in 0..cover.entries.len() {
        let (next, h, rec) =
            inductive_step(problem, &cover, a, &tau).map_err(|e| Error::Step { index: a, source: Box::new(e) })?;
        tau = next;
        homs.push(h);
        steps.push(rec);
    }
    let homotopy = concat_homotopies(&problem.bundle, homs, &grid)?;
    let report = report(problem, &cover, steps, &tau)?;
    Ok(SmoothingResult { tau, homotopy, report })
}

fn report(problem: &SmoothingProblem, cover: &Cover, steps: Vec<StepRecord>, tau: &Section) -> Result<SmoothingReport> {
    let bundle = &problem.bundle;
    let grid = problem.grid();
    let outside: Vec<GridPoint> = grid.iter().filter(|p| !problem.u.contains(p.chart, &p.x)).cloned().collect();
    let tube = tube_contains(bundle, &problem.tube, tau, &grid);
    let off_exact = compare_sections(bundle, &problem.sigma, tau, &outside, CompareMode::BitExact);
    let off_dev = compare_sections(bundle, &problem.sigma, tau, &outside, CompareMode::Tolerance(0.0));
    let near_l: Vec<GridPoint> = grid.iter().filter(|p| problem.l.contains(p.chart, &p.x)).cloned().collect();
    let smooth = smoothness_certificate(bundle, tau, &near_l, &problem.certify)?;
    let tube_cert = crate::verify::tube_certificate(&tube, problem.resolution);
    let compat = crate::verify::compatibility_certificate(bundle, tau, problem.resolution, 1e-10);
    Ok(SmoothingReport {
        k: cover.entries.len(),
        cover: cover.entries.clone(),
        steps,
        tube,
        off_u_max_deviation: off_dev.worst_value,
        certificates: vec![off_exact, tube_cert, smooth, compat],
    })
}
