use super::{basepoint_flatten, reparametrize_flat, Homotopy};
use crate::bundle::{Bundle, Section, Tube};
use crate::error::{Error, Result};
use crate::fields::{ChartField, RadiusSchedule};
use crate::geom::{smooth_step, Interval, Rect, RegionExpr};
use crate::manifold::Region;
use crate::smoothing::{steenrod_smooth, Margins, SmoothingProblem, SmoothingResult};
use crate::verify::{smoothness_certificate, SmoothnessSteps};

/// Radii around the base point: flattened inside the first, kept fixed inside
/// the second, cut-off vanishing beyond the third.
const BASE_FIXED: f64 = 0.1;
const BASE_FLAT: f64 = 0.3;
const BASE_SUPPORT: f64 = 0.6;

#[derive(Clone, Debug)]
pub struct HomotopyOptions {
    /// Length of the flat ends of the time reparametrization.
    pub flat: f64,
    /// Base point as (chart, coordinates).
    pub basepoint: Option<(usize, Vec<f64>)>,
    /// Grid points per axis of `[0,1] × M`.
    pub resolution: usize,
    /// Base grid resolution for the endpoint checks.
    pub base_resolution: usize,
    pub schedule: Option<RadiusSchedule>,
    pub margins: Margins,
    pub certify: SmoothnessSteps,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            flat: 0.2,
            basepoint: None,
            resolution: 33,
            base_resolution: 65,
            schedule: None,
            margins: Margins::default(),
            certify: SmoothnessSteps::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HomotopyOutcome {
    pub homotopy: Homotopy,
    pub pullback: Bundle,
    pub problem: SmoothingProblem,
    pub result: SmoothingResult,
}

/// `μ(t) λ₀(x)`: zero for `t <= ε/8` and `t >= 1-ε/8`, one on
/// `[7ε/8, 1-7ε/8] × B(x₀, 0.3)`, zero outside `B(x₀, 0.6)`. The ramp of `μ` is
/// kept wide; `F` does not depend on `t` there anyway.
pub fn basepoint_cutoff(domain: Rect, x0: Vec<f64>, eps: f64) -> ChartField {
    let (q, w) = (eps / 8.0, 0.75 * eps);
    ChartField::scalar(domain, move |y| {
        let t = y[0];
        let mu = smooth_step((t - q) / w) * smooth_step((1.0 - t - q) / w);
        if mu == 0.0 {
            return 0.0;
        }
        let r = y[1..].iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        mu * smooth_step((BASE_SUPPORT - r) / (BASE_SUPPORT - BASE_FLAT))
    })
    .with_smooth(RegionExpr::All)
}

fn slab(d: usize, t: Interval, around: Option<(&[f64], f64, bool)>) -> RegionExpr {
    let mut axes = vec![t];
    match around {
        None => axes.extend((0..d).map(|_| Interval::everything())),
        Some((x0, r, closed)) => axes.extend(x0.iter().map(|&v| {
            if closed {
                Interval::closed(v - r, v + r)
            } else {
                Interval::open(v - r, v + r)
            }
        })),
    }
    RegionExpr::rect(Rect::new(axes))
}

/// Smooth homotopy from `σ` to `τ` obtained by smoothing `F` as a section of the
/// pull-back bundle over `[0,1] × M`, with both end slices kept bit for bit.
pub fn smooth_homotopy(
    bundle: &Bundle,
    sigma: &Section,
    tau: &Section,
    f: &Homotopy,
    tube: &Tube,
    opts: &HomotopyOptions,
) -> Result<HomotopyOutcome> {
    let base_grid = bundle.base.sample_grid(opts.base_resolution);
    for p in &base_grid {
        if f.eval(0.0, p.chart, &p.x) != sigma.eval(p.chart, &p.x) || f.eval(1.0, p.chart, &p.x) != tau.eval(p.chart, &p.x) {
            return Err(Error::InvalidArgument(format!(
                "homotopy endpoints differ from the sections at chart {} point {:?}",
                p.chart, p.x
            )));
        }
    }
    for (name, s) in [("sigma", sigma), ("tau", tau)] {
        let c = smoothness_certificate(bundle, s, &base_grid, &opts.certify)?;
        if !c.passed {
            return Err(Error::NotSmoothEndpoints(format!(
                "{name} fails the difference test at {:?} (change {:e})",
                c.worst_location, c.worst_value
            )));
        }
    }
    let eps = opts.flat;
    let f2 = reparametrize_flat(f, eps)?;
    let pull = bundle.pullback_over_interval();
    let d = bundle.base.dim;
    let atlas = &pull.base;

    let ends = RegionExpr::union(vec![
        slab(d, Interval { lo: 0.0, hi: eps, lo_closed: true, hi_closed: false }, None),
        slab(d, Interval { lo: 1.0 - eps, hi: 1.0, lo_closed: false, hi_closed: true }, None),
    ]);
    let mut a = Region::uniform(atlas, ends).union(&f2.smooth);
    let mut u = Region::uniform(atlas, slab(d, Interval::open(0.0, 1.0), None));
    let mut sigma_pull = f2.to_pullback_section(&pull);
    let mut fixed = Region::empty(&bundle.base);

    if let Some((c0, x0)) = &opts.basepoint {
        let (c0, x0) = (*c0, x0.clone());
        if c0 >= bundle.base.charts.len() || !bundle.base.charts[c0].contains(&x0) {
            return Err(Error::InvalidArgument(format!("base point {x0:?} is not in chart {c0}")));
        }
        let s0 = sigma.eval(c0, &x0);
        for k in 0..=opts.resolution {
            let t = k as f64 / opts.resolution as f64;
            if f.eval(t, c0, &x0) != s0 {
                return Err(Error::InvalidArgument(format!("homotopy moves the base point at t = {t}")));
            }
        }
        let dom = atlas.charts[c0].domain.clone();
        let lambda = basepoint_cutoff(dom.clone(), x0.clone(), eps);
        let support = slab(d, Interval::open(eps / 8.0, 1.0 - eps / 8.0), Some((&x0, BASE_SUPPORT, false)));
        let pts: Vec<Vec<f64>> = atlas.charts[c0].grid(opts.resolution).into_iter().filter(|y| support.contains(y)).collect();
        // fibre chart with the most room for σ near the base point
        let z = pull
            .fibre_charts
            .iter()
            .max_by(|p, q| {
                let room = |zc: &crate::bundle::FibreChart| {
                    pts.iter().map(|y| zc.slack(&sigma_pull.eval(c0, y))).fold(f64::INFINITY, f64::min)
                };
                room(p).partial_cmp(&room(q)).unwrap()
            })
            .unwrap()
            .clone();
        let mid: Vec<f64> = std::iter::once(0.5).chain(x0.iter().copied()).collect();
        let (flat, _) = basepoint_flatten(&pull, &sigma_pull, c0, &mid, &lambda, &z, &support, &pts)?;
        sigma_pull = flat;
        let strip = slab(d, Interval::closed(0.0, 1.0), Some((&x0, BASE_FLAT, false)));
        a = a.union(&Region::from_chart(atlas, c0, strip));
        let keep = slab(d, Interval::everything(), Some((&x0, BASE_FIXED, true)));
        u = u.difference(&Region::from_chart(atlas, c0, keep));
        let around = Rect::new(x0.iter().map(|&v| Interval::closed(v - BASE_FIXED, v + BASE_FIXED)).collect());
        fixed = Region::from_chart(&bundle.base, c0, RegionExpr::rect(around));
    }
    sigma_pull.smooth = sigma_pull.smooth.union(&a);
    sigma_pull.sync_field_smoothness();

    let widths = atlas
        .charts
        .iter()
        .map(|c| {
            let w = tube.width[c.id].clone();
            ChartField::scalar(c.domain.clone(), move |y| w.eval1(&y[1..]))
        })
        .collect();
    let pull_tube = Tube { sigma: sigma_pull.clone(), width: widths };
    let mut problem = SmoothingProblem::new(pull.clone(), sigma_pull, Region::all(atlas), u, pull_tube, opts.resolution);
    problem.a = a;
    if let Some(s) = &opts.schedule {
        problem.schedule = s.clone();
    }
    problem.margins = opts.margins.clone();
    problem.certify = opts.certify.clone();
    let result = steenrod_smooth(&problem)?;
    let homotopy = Homotopy::from_pullback_section(bundle, &result.tau, fixed);
    Ok(HomotopyOutcome { homotopy, pullback: pull, problem, result })
}
