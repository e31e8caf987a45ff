//! Pipeline execution, certificates and report assembly.

use crate::scenario::{Built, Plan, Task};
use serde::Serialize;
use smoothsec::bundle::{Bundle, Section};
use smoothsec::homotopy::{smooth_homotopy, Homotopy};
use smoothsec::geom::RegionExpr;
use smoothsec::manifold::GridPoint;
use smoothsec::smoothing::{steenrod_smooth, CoverEntry, SmoothingProblem, SmoothingResult, StepRecord};
use smoothsec::verify::{
    compare_sections, degree_certificate, endpoint_certificate, fixed_certificate, homotopy_tube_certificate, winding_number,
    winding_number_at, Certificate, CompareMode,
};
use std::collections::BTreeMap;
use std::time::Instant;

pub const REPORT_VERSION: u32 = 1;

/// Points per turn for degree computations.
const WINDING_RESOLUTION: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct NamedCertificate {
    pub name: String,
    #[serde(flatten)]
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverSummary {
    #[serde(rename = "K")]
    pub k: usize,
    pub entries: Vec<CoverEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub grid_space: usize,
    pub grid_time: usize,
    pub certify_order: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub scenario: String,
    pub task: Task,
    pub scenario_hash: String,
    pub settings: Settings,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub certificates: Vec<NamedCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSummary>,
    pub steps: Vec<StepRecord>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name).map(|c| &c.certificate)
    }

    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Passed {
            0
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub pipeline_seconds: f64,
    pub certificates_seconds: f64,
    pub samples_seconds: f64,
}

/// A CSV file to be written next to the report.
#[derive(Clone, Debug)]
pub struct Sample {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Results kept for callers that inspect more than the report.
#[derive(Clone, Debug)]
pub enum Outcome {
    Section(Box<SmoothingResult>),
    Homotopy { homotopy: Homotopy, result: Box<SmoothingResult> },
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub timings: Timings,
    pub samples: Vec<Sample>,
    pub outcome: Option<Outcome>,
}

fn named(name: &str, c: Certificate) -> NamedCertificate {
    NamedCertificate { name: name.into(), certificate: c }
}

fn report_certificates(prefix: &str, r: &SmoothingResult) -> Vec<NamedCertificate> {
    let names = ["off_u_exact", "tube", "smoothness", "compatibility"];
    r.report.certificates.iter().zip(names).map(|(c, n)| named(&format!("{prefix}{n}"), c.clone())).collect()
}

fn degrees(bundle: &Bundle, f: &Homotopy, times: &[f64]) -> smoothsec::Result<Vec<(f64, i64)>> {
    times.iter().map(|&t| Ok((t, winding_number_at(bundle, f, t, WINDING_RESOLUTION)?))).collect()
}

fn section_run(built: &Built, p: &SmoothingProblem, timings: &mut Timings) -> smoothsec::Result<(Vec<NamedCertificate>, SmoothingResult)> {
    let start = Instant::now();
    let r = steenrod_smooth(p)?;
    timings.pipeline_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let bundle = &p.bundle;
    let grid = p.grid();
    let times = built.scenario.times();
    let mut certs = report_certificates("", &r);
    let outside: Vec<GridPoint> = grid.iter().filter(|q| !p.u.contains(q.chart, &q.x)).cloned().collect();
    certs.push(named("homotopy_endpoints", endpoint_certificate(bundle, &r.homotopy, &p.sigma, &r.tau, &grid)));
    certs.push(named("homotopy_fixed_off_u", fixed_certificate(bundle, &r.homotopy, &p.sigma, &outside, &times)));
    certs.push(named("homotopy_tube", homotopy_tube_certificate(bundle, &p.tube, &r.homotopy, &grid, &times)));
    if p.a.exprs.iter().all(|e| matches!(e, RegionExpr::All)) {
        certs.push(named("tau_equals_sigma", compare_sections(bundle, &p.sigma, &r.tau, &grid, CompareMode::BitExact)));
    }
    if built.scenario.task == Task::SmoothMap && built.has_degree() {
        let expected = winding_number(bundle, &p.sigma, WINDING_RESOLUTION)?;
        certs.push(named("degree", degree_certificate(expected, &degrees(bundle, &r.homotopy, &times)?)));
    }
    timings.certificates_seconds = start.elapsed().as_secs_f64();
    Ok((certs, r))
}

fn homotopy_run(
    built: &Built,
    tau: &Section,
    f: &Homotopy,
    tube: &smoothsec::bundle::Tube,
    opts: &smoothsec::homotopy::HomotopyOptions,
    timings: &mut Timings,
) -> smoothsec::Result<(Vec<NamedCertificate>, Homotopy, SmoothingResult)> {
    let start = Instant::now();
    let out = smooth_homotopy(&built.bundle, &built.sigma, tau, f, tube, opts)?;
    timings.pipeline_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let bundle = &built.bundle;
    let grid = built.grid();
    let times = built.scenario.times();
    let mut certs = report_certificates("joint_", &out.result);
    certs.push(named("endpoints", endpoint_certificate(bundle, &out.homotopy, &built.sigma, tau, &grid)));
    if built.has_degree() {
        let expected = winding_number(bundle, &built.sigma, WINDING_RESOLUTION)?;
        certs.push(named("degree", degree_certificate(expected, &degrees(bundle, &out.homotopy, &times)?)));
    }
    if let Some((c, x)) = &opts.basepoint {
        let at = [GridPoint { chart: *c, x: x.clone() }];
        certs.push(named("basepoint_fixed", fixed_certificate(bundle, &out.homotopy, &built.sigma, &at, &times)));
    }
    timings.certificates_seconds = start.elapsed().as_secs_f64();
    Ok((certs, out.homotopy, out.result))
}

fn section_sample(name: &str, bundle: &Bundle, s: &Section, grid: &[GridPoint]) -> Sample {
    let d = bundle.base.dim;
    let m = bundle.fibre.dim();
    let mut header = vec!["chart_id".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend((0..m).map(|k| format!("v{k}")));
    let rows = grid
        .iter()
        .map(|p| {
            let mut r = vec![p.chart as f64];
            r.extend(&p.x);
            r.extend(s.eval(p.chart, &p.x));
            r
        })
        .collect();
    Sample { name: name.into(), header, rows }
}

fn homotopy_sample(name: &str, bundle: &Bundle, f: &Homotopy, grid: &[GridPoint], times: &[f64]) -> Sample {
    let d = bundle.base.dim;
    let m = bundle.fibre.dim();
    let mut header = vec!["t".to_string(), "chart_id".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend((0..m).map(|k| format!("v{k}")));
    let mut rows = Vec::with_capacity(times.len() * grid.len());
    for &t in times {
        for p in grid {
            let mut r = vec![t, p.chart as f64];
            r.extend(&p.x);
            r.extend(f.eval(t, p.chart, &p.x));
            rows.push(r);
        }
    }
    Sample { name: name.into(), header, rows }
}

/// Times of the homotopy CSV: nine evenly spaced slices.
fn sample_times() -> Vec<f64> {
    (0..9).map(|k| k as f64 / 8.0).collect()
}

/// Runs the scenario. Pipeline failures end up in the report, not in the result.
pub fn execute(built: &Built, scenario_hash: &str) -> RunOutput {
    let s = &built.scenario;
    let mut timings = Timings::default();
    let mut report = Report {
        report_version: REPORT_VERSION,
        scenario: s.name.clone(),
        task: s.task,
        scenario_hash: scenario_hash.into(),
        settings: Settings { grid_space: s.grid.space, grid_time: s.grid.time, certify_order: s.certify.order },
        status: Status::Error,
        error: None,
        certificates: vec![],
        cover: None,
        steps: vec![],
        metrics: BTreeMap::new(),
        artifacts: vec![],
    };
    let grid = built.grid();
    let mut samples = vec![section_sample("sigma.csv", &built.bundle, &built.sigma, &grid)];
    let run = match &built.plan {
        Plan::Section(p) => section_run(built, p, &mut timings).map(|(c, r)| {
            let h = r.homotopy.clone();
            (c, h, Outcome::Section(Box::new(r)))
        }),
        Plan::Homotopy { tau, f, tube, opts } => homotopy_run(built, tau, f, tube, opts, &mut timings)
            .map(|(c, h, r)| (c, h.clone(), Outcome::Homotopy { homotopy: h, result: Box::new(r) })),
    };
    let outcome = match run {
        Err(e) => {
            report.error = Some(e.to_string());
            None
        }
        Ok((certs, hom, outcome)) => {
            let result = match &outcome {
                Outcome::Section(r) => r.as_ref(),
                Outcome::Homotopy { result, .. } => result.as_ref(),
            };
            report.status = if certs.iter().all(|c| c.certificate.passed) { Status::Passed } else { Status::Failed };
            report.certificates = certs;
            report.cover = Some(CoverSummary { k: result.report.k, entries: result.report.cover.clone() });
            report.steps = result.report.steps.clone();
            report.metrics.insert("tube_max_ratio".into(), result.report.tube.max_ratio);
            report.metrics.insert("sup_distance".into(), result.report.tube.max_distance);
            report.metrics.insert("off_u_max_deviation".into(), result.report.off_u_max_deviation);
            let start = Instant::now();
            let tau = hom.slice(1.0);
            samples.push(section_sample("tau.csv", &built.bundle, &tau, &grid));
            samples.push(homotopy_sample("homotopy.csv", &built.bundle, &hom, &grid, &sample_times()));
            timings.samples_seconds = start.elapsed().as_secs_f64();
            Some(outcome)
        }
    };
    report.artifacts = std::iter::once("report.json".to_string())
        .chain(samples.iter().map(|s| s.name.clone()))
        .chain(std::iter::once("timings.json".to_string()))
        .collect();
    RunOutput { report, timings, samples, outcome }
}
