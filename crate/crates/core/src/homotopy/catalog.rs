use super::{lift_region, Homotopy};
use crate::bundle::{Bundle, Fibre, Section};
use crate::error::{Error, Result};
use crate::geom::{Interval, Rect, RegionExpr};
use crate::manifold::Region;

pub const HOMOTOPY_CATALOG: &[(&str, &str)] = &[
    ("straight", "sigma + s (tau - sigma), smooth in s"),
    ("kinked", "sigma + min(1, 2s) (tau - sigma), reaches tau at s = 1/2 with a kink"),
];

/// Homotopy from `σ` to `τ` along fibre differences; the difference must stay
/// below `π - 0.1` on circle fibres so that it is continuous.
pub fn builtin_homotopy(id: &str, bundle: &Bundle, sigma: &Section, tau: &Section, resolution: usize) -> Result<Homotopy> {
    let ramp: fn(f64) -> f64 = match id {
        "straight" => |s| s,
        "kinked" => |s| (2.0 * s).min(1.0),
        other => return Err(Error::InvalidArgument(format!("unknown homotopy '{other}'"))),
    };
    if matches!(bundle.fibre, Fibre::Circle) {
        for p in bundle.base.sample_grid(resolution) {
            let d = bundle.fibre.diff(&tau.eval(p.chart, &p.x), &sigma.eval(p.chart, &p.x))[0];
            if d.abs() > std::f64::consts::PI - 0.1 {
                return Err(Error::InvalidArgument(format!(
                    "sections differ by {d} at chart {} point {:?}; no canonical path",
                    p.chart, p.x
                )));
            }
        }
    }
    let both = sigma.smooth.intersection(&tau.smooth);
    let mut smooth = lift_region(&both);
    if id == "kinked" {
        let d = bundle.base.dim;
        let mut axes = vec![Interval::closed(0.5, 0.5)];
        axes.extend((0..d).map(|_| Interval::everything()));
        let kink = RegionExpr::rect(Rect::new(axes));
        smooth = smooth.difference(&Region::uniform(&bundle.base, kink));
    }
    let (b, s, t) = (bundle.clone(), sigma.clone(), tau.clone());
    Ok(Homotopy::new(
        bundle,
        move |time, c, x, out| {
            let a = ramp(time);
            let sv = s.eval(c, x);
            if a == 0.0 {
                out.copy_from_slice(&sv);
                return;
            }
            let tv = t.eval(c, x);
            if a == 1.0 {
                out.copy_from_slice(&tv);
                return;
            }
            let d = b.fibre.diff(&tv, &sv);
            for k in 0..out.len() {
                out[k] = sv[k] + a * d[k];
            }
        },
        Region::empty(&bundle.base),
        smooth,
    ))
}
