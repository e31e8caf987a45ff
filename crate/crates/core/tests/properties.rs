use proptest::prelude::*;
use smoothsec::bundle::{builtin_bundle, builtin_section, wrap_angle, Fibre};
use smoothsec::fields::{blend, mollify, partition_of_unity, plateau, ChartField, DEFAULT_QUADRATURE_1D, DEFAULT_QUADRATURE_2D};
use smoothsec::geom::{smooth_step, Frame, Interval, Rect, RegionExpr};
use smoothsec::homotopy::flat_step;
use smoothsec::manifold::{box_grid, builtin_manifold, circle};
use smoothsec::verify::winding_number;
use std::collections::BTreeMap;
use std::f64::consts::PI;

fn unit(d: usize) -> Rect {
    Rect::closed(&vec![0.0; d], &vec![1.0; d])
}

fn unit_frame() -> Frame {
    Frame { domain: unit(1), face_lo: vec![true], face_hi: vec![true] }
}

fn quadrature(d: usize) -> usize {
    if d == 1 {
        DEFAULT_QUADRATURE_1D
    } else {
        DEFAULT_QUADRATURE_2D
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wrap_angle_lands_in_half_open_range(x in -1e3f64..1e3) {
        let w = wrap_angle(x);
        prop_assert!(w > -PI && w <= PI);
        let turns = (x - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn smooth_step_is_a_monotone_symmetric_step(u in -0.5f64..1.5, du in 0.0f64..0.1) {
        let s = smooth_step(u);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(smooth_step(u + du) >= s);
        prop_assert!((s + smooth_step(1.0 - u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_step_is_flat_at_both_ends(eps in 0.01f64..0.4, t in 0.0f64..1.0) {
        let g = flat_step(eps);
        let v = g(t);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v + g(1.0 - t) - 1.0).abs() < 1e-12);
        if t <= eps {
            prop_assert_eq!(v, 0.0);
        }
        if t >= 1.0 - eps {
            prop_assert_eq!(v, 1.0);
        }
        prop_assert!(g((t + 0.01).min(1.0)) >= v);
    }

    #[test]
    fn mollified_constant_is_the_constant(c in -5.0f64..5.0, h in 0.02f64..0.3, d in 1usize..=2, x in prop::collection::vec(0.0f64..1.0, 2)) {
        let m = mollify(&ChartField::constant(unit(d), vec![c]), h, quadrature(d)).unwrap();
        prop_assert!((m.eval1(&x[..d]) - c).abs() <= 1e-10);
    }

    #[test]
    fn mollifier_reproduces_linear_functions_inside(
        a in prop::collection::vec(-3.0f64..3.0, 2),
        b in -1.0f64..1.0,
        h in 0.02f64..0.2,
        d in 1usize..=2,
        s in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let coef = a.clone();
        let f = ChartField::scalar(unit(d), move |x| x.iter().zip(&coef).map(|(u, v)| u * v).sum::<f64>() + b);
        let m = mollify(&f, h, quadrature(d)).unwrap();
        // deep interior: farther than h from every face
        let x: Vec<f64> = s[..d].iter().map(|u| h + 1e-3 + u * (1.0 - 2.0 * h - 2e-3)).collect();
        prop_assert!((m.eval1(&x) - f.eval1(&x)).abs() <= 1e-8);
    }

    #[test]
    fn mollifier_is_local(c in -2.0f64..2.0, r in 0.02f64..0.1, h in 0.02f64..0.1, x0 in 0.3f64..0.7, s in -1.0f64..1.0) {
        // constant on the ball of radius r + h around x0, a ramp outside
        let reach = r + h;
        let f = ChartField::scalar(unit(1), move |x| c + 3.0 * ((x[0] - x0).abs() - reach).max(0.0));
        let m = mollify(&f, h, DEFAULT_QUADRATURE_1D).unwrap();
        let x = [x0 + s * r];
        prop_assert!((m.eval1(&x) - c).abs() <= 1e-10);
    }

    #[test]
    fn mollifier_stays_within_lip_times_h(k in 0.1f64..3.0, c0 in 0.1f64..0.9, h in 0.02f64..0.25) {
        let f = ChartField::scalar(unit(1), move |x| k * (x[0] - c0).abs());
        let m = mollify(&f, h, DEFAULT_QUADRATURE_1D).unwrap();
        for x in box_grid(&unit(1), 101) {
            prop_assert!((m.eval1(&x) - f.eval1(&x)).abs() <= k * h + 1e-8);
        }
    }

    #[test]
    fn partition_sums_to_one(split in 0.3f64..0.7, overlap in 0.1f64..0.2, margin in 0.02f64..0.05) {
        let left = RegionExpr::rect(Rect::new(vec![Interval { lo: 0.0, hi: split + overlap, lo_closed: true, hi_closed: false }]));
        let right = RegionExpr::rect(Rect::new(vec![Interval { lo: split - overlap, hi: 1.0, lo_closed: false, hi_closed: true }]));
        let regions = [left, right];
        let frame = unit_frame();
        let parts = partition_of_unity(&regions, margin, &frame, None).unwrap();
        for x in box_grid(&unit(1), 257) {
            let vals: Vec<f64> = parts.iter().map(|p| p.eval1(&x)).collect();
            prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for (v, r) in vals.iter().zip(&regions) {
                prop_assert!(*v >= -1e-12 && *v <= 1.0 + 1e-12);
                if !r.contains(&x) {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn blend_delegates_to_f_where_the_weight_vanishes(lo in 0.1f64..0.4, width in 0.2f64..0.5, margin in 0.02f64..0.08) {
        let frame = unit_frame();
        let region = RegionExpr::rect(Rect::open(&[lo], &[lo + width]));
        let l1 = plateau(&region, margin, &frame).unwrap();
        let w = l1.clone();
        let l2 = ChartField::scalar(unit(1), move |x| 1.0 - w.eval1(x));
        let f = ChartField::scalar(unit(1), |x| (x[0] - 0.5).abs() + 0.1 * (7.0 * x[0]).sin());
        let gamma = ChartField::scalar(unit(1), |x| x[0] * x[0]);
        let g = blend(&f, &gamma, &l1, &l2).unwrap();
        for x in box_grid(&unit(1), 257) {
            if l1.eval1(&x) == 0.0 {
                prop_assert_eq!(g.eval(&x), f.eval(&x));
            }
        }
    }

    #[test]
    fn winding_number_is_stable_under_refinement(n in -3i32..=3, amp in 0.0f64..0.9, phase in -3.0f64..3.0) {
        let b = builtin_bundle("circle_fibre", circle()).unwrap();
        let params: BTreeMap<String, f64> =
            [("degree", n as f64), ("amp", amp), ("phase", phase)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let s = builtin_section("winding", &params, &b).unwrap();
        for res in [64, 256, 1024] {
            prop_assert_eq!(winding_number(&b, &s, res).unwrap(), n as i64);
        }
    }
}

#[test]
fn catalog_atlases_satisfy_the_cocycle_identity() {
    for id in ["interval", "square", "circle", "torus", "cylinder"] {
        let atlas = builtin_manifold(id, &BTreeMap::new()).unwrap();
        let (cocycle, round_trip) = atlas.cocycle_error(17);
        assert!(cocycle <= 1e-10 && round_trip <= 1e-10, "{id}: {cocycle:e} {round_trip:e}");
    }
}

#[test]
fn catalog_sections_are_compatible() {
    let cases: [(&str, &str, &str); 5] = [
        ("interval", "trivial_line", "abs_kink"),
        ("torus", "trivial_line", "smooth_wave"),
        ("circle", "mobius_line", "mobius_kink"),
        ("circle", "mobius_line", "mobius_smooth"),
        ("circle", "circle_fibre", "kinked_map"),
    ];
    for (m, b, s) in cases {
        let base = builtin_manifold(m, &BTreeMap::new()).unwrap();
        let bundle = builtin_bundle(b, base).unwrap();
        let sec = builtin_section(s, &BTreeMap::new(), &bundle).unwrap();
        let (err, _, _) = sec.compatibility_error(&bundle, 129);
        assert!(err <= 1e-10, "{m}/{b}/{s}: {err:e}");
    }
}

#[test]
fn mobius_zero_section_is_zero_everywhere() {
    let b = builtin_bundle("mobius_line", circle()).unwrap();
    assert!(matches!(b.fibre, Fibre::Line { .. }));
    let params: BTreeMap<String, f64> = [("value".to_string(), 0.0)].into();
    let s = builtin_section("constant", &params, &b).unwrap();
    for p in b.base.sample_grid(65) {
        for (c, y) in b.base.representations(p.chart, &p.x) {
            assert_eq!(s.eval(c, &y), vec![0.0]);
        }
    }
}
