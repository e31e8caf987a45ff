use super::{Bundle, Fibre, FibreMap, Section, Tube};
use crate::error::{Error, Result};
use crate::fields::ChartField;
use crate::geom::{Interval, Rect, RegionExpr};
use crate::manifold::{Atlas, Region};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const BUNDLE_CATALOG: &[(&str, &str)] = &[
    ("trivial_line", "M x R over any catalog manifold"),
    ("mobius_line", "Moebius line bundle over the circle, sign flip on one overlap component"),
    ("circle_fibre", "M x S^1 with four angle-arc fibre charts"),
];

pub const SECTION_CATALOG: &[(&str, &str)] = &[
    ("constant", "constant fibre value (param value)"),
    ("abs_kink", "slope*|x0 - center| (2|sin((x0-center)/2)| on periodic axes), line fibres"),
    ("double_kink", "|x0 - c1| - 0.5|x0 - c2|, line fibres"),
    ("smooth_wave", "amp * sum of sin over axes, smooth everywhere, line fibres"),
    ("mobius_kink", "cos((t-center)/2)(1 + amp|sin((t-center)/2)|), Moebius bundle"),
    ("mobius_smooth", "amp * cos(t/2), Moebius bundle"),
    ("kinked_map", "degree*t + amp|sin(t - phase)|, circle fibre, kinks at phase and phase + pi"),
    ("winding", "degree*t + amp*sin t + phase, circle fibre"),
];

pub const WIDTH_CATALOG: &[(&str, &str)] = &[
    ("constant", "constant tube width (param width)"),
    ("ramp", "w0 + w1*(1+cos x0)/2 on periodic axes, w0 + w1*x0 otherwise"),
];

fn check_params(kind: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::InvalidArgument(format!("unknown parameter '{k}' for {kind}")));
        }
    }
    Ok(())
}

fn p(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

pub fn builtin_bundle(id: &str, base: Atlas) -> Result<Bundle> {
    match id {
        "trivial_line" => Ok(Bundle::trivial(base, Fibre::Line { dim: 1 })),
        "circle_fibre" => Ok(Bundle::trivial(base, Fibre::Circle)),
        "mobius_line" => {
            if base.name != "circle" {
                return Err(Error::InvalidArgument(format!("mobius_line needs the circle base, got '{}'", base.name)));
            }
            let mut b = Bundle::trivial(base, Fibre::Line { dim: 1 });
            b.name = "mobius_line".into();
            b.fibre_maps =
                b.base.pieces.iter().map(|p| if p.shift[0] != 0.0 { FibreMap::Negate } else { FibreMap::Identity }).collect();
            Ok(b)
        }
        other => Err(Error::InvalidArgument(format!("unknown bundle '{other}'"))),
    }
}

/// Hyperplanes `x_axis = v` (and their 2π translates on periodic axes) in every chart.
fn kink_set(base: &Atlas, kinks: &[(usize, f64)]) -> Region {
    let exprs = base
        .charts
        .iter()
        .map(|c| {
            let mut parts = vec![];
            for &(axis, v) in kinks {
                let shifts: Vec<f64> =
                    if base.periodic[axis] { (-2..=2).map(|k| v + 2.0 * PI * k as f64).collect() } else { vec![v] };
                for s in shifts {
                    if c.domain.axes[axis].contains(s) {
                        let mut axes = vec![Interval::everything(); base.dim];
                        axes[axis] = Interval::closed(s, s);
                        parts.push(RegionExpr::rect(Rect::new(axes)));
                    }
                }
            }
            RegionExpr::union(parts)
        })
        .collect();
    Region::from_exprs(exprs)
}

fn smooth_off(base: &Atlas, kinks: &[(usize, f64)]) -> Region {
    Region::all(base).difference(&kink_set(base, kinks))
}

/// Catalog section; fails when the formula is not a section of `bundle`.
pub fn builtin_section(id: &str, params: &BTreeMap<String, f64>, bundle: &Bundle) -> Result<Section> {
    let base = &bundle.base;
    let periodic0 = base.periodic[0];
    let line = matches!(bundle.fibre, Fibre::Line { .. });
    let mobius = bundle.name.starts_with("mobius");
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("section '{id}' needs {what}, bundle is '{}'", bundle.name)))
        }
    };
    let s = match id {
        "constant" => {
            check_params(id, params, &["value"])?;
            let v = p(params, "value", 0.0);
            Section::from_formula(bundle, move |_, o| o.iter_mut().for_each(|x| *x = v), Region::all(base))
        }
        "abs_kink" => {
            check_params(id, params, &["center", "slope"])?;
            need(line && !mobius, "a trivial line bundle")?;
            let c = p(params, "center", if periodic0 { 0.0 } else { 0.5 });
            let k = p(params, "slope", 1.0);
            let smooth = smooth_off(base, &[(0, c)]);
            if periodic0 {
                Section::from_formula(bundle, move |x, o| o[0] = 2.0 * k * ((x[0] - c) / 2.0).sin().abs(), smooth)
            } else {
                Section::from_formula(bundle, move |x, o| o[0] = k * (x[0] - c).abs(), smooth)
            }
        }
        "double_kink" => {
            check_params(id, params, &["c1", "c2"])?;
            need(line && !mobius && !periodic0, "a trivial line bundle over a non-periodic first axis")?;
            let c1 = p(params, "c1", 0.3);
            let c2 = p(params, "c2", 0.7);
            let smooth = smooth_off(base, &[(0, c1), (0, c2)]);
            Section::from_formula(bundle, move |x, o| o[0] = (x[0] - c1).abs() - 0.5 * (x[0] - c2).abs(), smooth)
        }
        "smooth_wave" => {
            check_params(id, params, &["amp"])?;
            need(line && !mobius, "a trivial line bundle")?;
            let a = p(params, "amp", 0.5);
            let per = base.periodic.clone();
            Section::from_formula(
                bundle,
                move |x, o| {
                    o[0] = x
                        .iter()
                        .zip(&per)
                        .map(|(v, &pr)| a * if pr { v.sin() } else { (2.0 * PI * v).sin() })
                        .sum()
                },
                Region::all(base),
            )
        }
        "mobius_kink" => {
            check_params(id, params, &["center", "amp"])?;
            need(mobius, "the Moebius bundle")?;
            let c = p(params, "center", PI / 2.0);
            let a = p(params, "amp", 0.5);
            let smooth = smooth_off(base, &[(0, c)]);
            Section::from_formula(
                bundle,
                move |x, o| {
                    let h = (x[0] - c) / 2.0;
                    o[0] = h.cos() * (1.0 + a * h.sin().abs())
                },
                smooth,
            )
        }
        "mobius_smooth" => {
            check_params(id, params, &["amp"])?;
            need(mobius, "the Moebius bundle")?;
            let a = p(params, "amp", 1.0);
            Section::from_formula(bundle, move |x, o| o[0] = a * (x[0] / 2.0).cos(), Region::all(base))
        }
        "kinked_map" => {
            check_params(id, params, &["degree", "amp", "phase"])?;
            need(bundle.fibre == Fibre::Circle && periodic0, "the circle fibre over a periodic axis")?;
            let n = p(params, "degree", 1.0);
            let a = p(params, "amp", 0.2);
            let ph = p(params, "phase", 0.0);
            let smooth = smooth_off(base, &[(0, ph), (0, ph + PI)]);
            Section::from_formula(bundle, move |x, o| o[0] = n * x[0] + a * (x[0] - ph).sin().abs(), smooth)
        }
        "winding" => {
            check_params(id, params, &["degree", "amp", "phase"])?;
            need(bundle.fibre == Fibre::Circle && periodic0, "the circle fibre over a periodic axis")?;
            let n = p(params, "degree", 1.0);
            let a = p(params, "amp", 0.0);
            let ph = p(params, "phase", 0.0);
            Section::from_formula(bundle, move |x, o| o[0] = n * x[0] + a * x[0].sin() + ph, Region::all(base))
        }
        other => return Err(Error::InvalidArgument(format!("unknown section '{other}'"))),
    };
    if let Some(n) = params.get("degree") {
        if n.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!("degree must be an integer, got {n}")));
        }
    }
    let (err, chart, point) = s.compatibility_error(bundle, 65);
    if err > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "section '{id}' is not compatible with bundle '{}' (deviation {err:e} at chart {chart}, {point:?})",
            bundle.name
        )));
    }
    Ok(s)
}

/// Tube of a catalog width field around `sigma`.
pub fn builtin_width(id: &str, params: &BTreeMap<String, f64>, bundle: &Bundle, sigma: Section) -> Result<Tube> {
    let base = &bundle.base;
    let width: Vec<ChartField> = match id {
        "constant" => {
            check_params(id, params, &["width"])?;
            let w = p(params, "width", 0.05);
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("tube width must be positive, got {w}")));
            }
            return Ok(Tube::constant(bundle, sigma, w));
        }
        "ramp" => {
            check_params(id, params, &["w0", "w1"])?;
            let w0 = p(params, "w0", 0.05);
            let w1 = p(params, "w1", 0.05);
            if !(w0 > 0.0) || w1 < 0.0 {
                return Err(Error::InvalidArgument(format!("ramp needs w0 > 0 and w1 >= 0, got {w0}, {w1}")));
            }
            let per = base.periodic[0];
            base.charts
                .iter()
                .map(|c| {
                    ChartField::scalar(c.domain.clone(), move |x| {
                        w0 + w1 * if per { (1.0 + x[0].cos()) / 2.0 } else { x[0].clamp(0.0, 1.0) }
                    })
                })
                .collect()
        }
        other => return Err(Error::InvalidArgument(format!("unknown tube width '{other}'"))),
    };
    Ok(Tube { sigma, width })
}
