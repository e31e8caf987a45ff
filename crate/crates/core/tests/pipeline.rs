use smoothsec::bundle::{builtin_bundle, builtin_section, Bundle, Fibre, Section, Tube};
use smoothsec::fields::RadiusSchedule;
use smoothsec::geom::{Interval, Rect, RegionExpr};
use smoothsec::homotopy::{builtin_homotopy, smooth_homotopy, HomotopyOptions};
use smoothsec::manifold::{builtin_manifold, circle, Region};
use smoothsec::smoothing::{build_cover, steenrod_smooth, SmoothingProblem};
use smoothsec::verify::{endpoint_certificate, fixed_certificate, homotopy_tube_certificate, CertificateKind};
use smoothsec::Error;
use std::collections::BTreeMap;
use std::f64::consts::PI;

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn interval_bundle() -> Bundle {
    Bundle::trivial(builtin_manifold("interval", &BTreeMap::new()).unwrap(), Fibre::Line { dim: 1 })
}

fn interval_problem(width: f64) -> SmoothingProblem {
    let b = interval_bundle();
    let s = builtin_section("abs_kink", &params(&[("center", 0.5)]), &b).unwrap();
    let u = Region::uniform(&b.base, RegionExpr::rect(Rect::open(&[0.25], &[0.75])));
    let tube = Tube::constant(&b, s.clone(), width);
    SmoothingProblem::new(b.clone(), s, Region::all(&b.base), u, tube, 129)
}

fn mobius_problem() -> SmoothingProblem {
    let b = builtin_bundle("mobius_line", circle()).unwrap();
    let s = builtin_section("mobius_kink", &BTreeMap::new(), &b).unwrap();
    let arc = RegionExpr::rect(Rect::new(vec![Interval::open(PI / 2.0 - 0.3, PI / 2.0 + 0.3)]));
    let u = Region::from_chart(&b.base, 0, arc);
    let tube = Tube::constant(&b, s.clone(), 0.05);
    SmoothingProblem::new(b.clone(), s, Region::all(&b.base), u, tube, 129)
}

#[test]
fn interval_kink_reference_run() {
    let out = steenrod_smooth(&interval_problem(0.05)).unwrap();
    assert_eq!(out.report.k, 1);
    assert_eq!(out.report.steps[0].radius, Some(0.015625));
    assert!((out.report.tube.max_ratio - 0.10451424037699296).abs() < 1e-9, "{}", out.report.tube.max_ratio);
    assert!(out.report.certificates.iter().all(|c| c.passed));
}

#[test]
fn mobius_reference_run() {
    let p = mobius_problem();
    let cover = build_cover(&p).unwrap();
    assert_eq!(cover.entries.len(), 2);
    assert_eq!(cover.entries.iter().map(|e| e.chart).collect::<Vec<_>>(), vec![0, 1]);
    let out = steenrod_smooth(&p).unwrap();
    assert!((out.report.tube.max_ratio - 0.10295256734001335).abs() < 1e-9, "{}", out.report.tube.max_ratio);
    let compat = out.report.certificates.iter().find(|c| c.kind == CertificateKind::Compatibility).unwrap();
    assert!(compat.worst_value <= 1e-10);
    assert!(out.report.certificates.iter().all(|c| c.passed));
}

#[test]
fn every_step_leaves_sigma_alone_off_u() {
    let p = mobius_problem();
    let out = steenrod_smooth(&p).unwrap();
    let outside: Vec<_> = p.grid().into_iter().filter(|q| !p.u.contains(q.chart, &q.x)).collect();
    // the concatenated homotopy passes through every τ_a
    let times: Vec<f64> = (0..=32).map(|k| k as f64 / 32.0).collect();
    let c = fixed_certificate(&p.bundle, &out.homotopy, &p.sigma, &outside, &times);
    assert!(c.passed, "{c:?}");
    let t = homotopy_tube_certificate(&p.bundle, &p.tube, &out.homotopy, &p.grid(), &times);
    assert!(t.passed, "{t:?}");
}

#[test]
fn hopelessly_thin_tube_is_reported() {
    match steenrod_smooth(&interval_problem(1e-15)) {
        Err(Error::Step { source, .. }) => assert!(matches!(*source, Error::TubeTooTight { .. }), "{source}"),
        other => panic!("expected a tube error, got {:?}", other.map(|r| r.report.tube.max_ratio)),
    }
}

/// Two smooth sections of the line bundle over the interval that agree at 0.5.
fn interval_homotopy_data() -> (Bundle, Section, Section) {
    let b = interval_bundle();
    let sigma = builtin_section("constant", &params(&[("value", 0.0)]), &b).unwrap();
    let tau = Section::from_formula(&b, |x, o| o[0] = 0.1 * (x[0] - 0.5) * (1.0 + x[0]), Region::all(&b.base));
    (b, sigma, tau)
}

fn homotopy_options(basepoint: Option<(usize, Vec<f64>)>) -> HomotopyOptions {
    let schedule = RadiusSchedule { h0: Some(0.125), ..RadiusSchedule::for_dim(2) };
    HomotopyOptions { flat: 0.25, basepoint, resolution: 33, base_resolution: 65, schedule: Some(schedule), ..HomotopyOptions::default() }
}

fn check_homotopy(basepoint: Option<(usize, Vec<f64>)>) {
    let (b, sigma, tau) = interval_homotopy_data();
    let f = builtin_homotopy("kinked", &b, &sigma, &tau, 65).unwrap();
    let tube = Tube::constant(&b, sigma.clone(), 0.05);
    let out = smooth_homotopy(&b, &sigma, &tau, &f, &tube, &homotopy_options(basepoint.clone())).unwrap();
    for c in &out.result.report.certificates {
        assert!(c.passed, "{c:?}");
    }
    let grid = b.base.sample_grid(65);
    assert!(endpoint_certificate(&b, &out.homotopy, &sigma, &tau, &grid).passed);
    if let Some((c, x)) = basepoint {
        let times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let at = [smoothsec::manifold::GridPoint { chart: c, x }];
        let cert = fixed_certificate(&b, &out.homotopy, &sigma, &at, &times);
        assert!(cert.passed, "{cert:?}");
    }
}

#[test]
fn kinked_interval_homotopy_is_smoothed() {
    check_homotopy(None);
}

#[test]
fn kinked_interval_homotopy_keeps_its_base_point() {
    check_homotopy(Some((0, vec![0.5])));
}

#[test]
fn homotopy_with_wrong_endpoint_is_rejected() {
    let (b, sigma, tau) = interval_homotopy_data();
    let f = builtin_homotopy("kinked", &b, &sigma, &tau, 65).unwrap();
    let tube = Tube::constant(&b, sigma.clone(), 0.05);
    let r = smooth_homotopy(&b, &sigma, &sigma, &f, &tube, &homotopy_options(None));
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}
