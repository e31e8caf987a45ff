//! Scenario files: parsing, validation and construction of the pipeline inputs.

use crate::error::CliError;
use serde::Deserialize;
use smoothsec::bundle::{builtin_bundle, builtin_section, builtin_width, Bundle, Fibre, Section, Tube};
use smoothsec::fields::RadiusSchedule;
use smoothsec::geom::{Interval, Rect, RegionExpr};
use smoothsec::homotopy::{builtin_homotopy, Homotopy, HomotopyOptions};
use smoothsec::manifold::{builtin_manifold, Atlas, GridPoint, Region};
use smoothsec::smoothing::SmoothingProblem;
use smoothsec::verify::SmoothnessSteps;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    SmoothSection,
    SmoothMap,
    SmoothHomotopy,
    BasepointHomotopy,
}

impl Task {
    pub fn is_homotopy(self) -> bool {
        matches!(self, Task::SmoothHomotopy | Task::BasepointHomotopy)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogRef {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleRef {
    pub id: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePoint {
    pub chart: usize,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopySpec {
    pub id: String,
    /// Length of the flat ends of the time reparametrization.
    #[serde(default = "default_flat")]
    pub flat: f64,
    pub basepoint: Option<BasePoint>,
}

fn default_flat() -> f64 {
    HomotopyOptions::default().flat
}

/// A region: one shape per leaf, given in one chart and transported to the
/// others, or the same expression in every chart when `chart` is absent.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    All,
    Empty,
    /// Where the section is declared smooth; only for `a`.
    Smooth,
    Rect {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default)]
        closed: bool,
        chart: Option<usize>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        closed: bool,
        chart: Option<usize>,
    },
    Union {
        parts: Vec<RegionSpec>,
    },
    Intersection {
        parts: Vec<RegionSpec>,
    },
    Difference {
        from: Box<RegionSpec>,
        remove: Box<RegionSpec>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regions {
    #[serde(default = "all_region")]
    pub l: RegionSpec,
    pub u: RegionSpec,
    pub a: Option<RegionSpec>,
}

fn all_region() -> RegionSpec {
    RegionSpec::All
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Points per chart axis of the base grid.
    #[serde(default = "default_space")]
    pub space: usize,
    /// Sampled times; for homotopy tasks also the points per axis of the
    /// `[0,1] × M` grid.
    #[serde(default = "default_time")]
    pub time: usize,
}

fn default_space() -> usize {
    129
}

fn default_time() -> usize {
    33
}

impl Default for Grid {
    fn default() -> Self {
        Grid { space: default_space(), time: default_time() }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub h0: Option<f64>,
    pub max_halvings: Option<usize>,
    pub quadrature_points: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    2
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec { order: default_order() }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub task: Task,
    pub manifold: CatalogRef,
    pub bundle: BundleRef,
    pub section: CatalogRef,
    /// End section `τ` of the homotopy tasks.
    pub target: Option<CatalogRef>,
    pub homotopy: Option<HomotopySpec>,
    pub regions: Option<Regions>,
    pub tube: CatalogRef,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub radius_schedule: ScheduleSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line overrides applied on top of a scenario.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid_space: Option<usize>,
    pub grid_time: Option<usize>,
    pub certify_order: Option<usize>,
}

/// Parses `N` or `N,M` (space, time).
pub fn parse_grid_override(s: &str) -> Result<(usize, Option<usize>), String> {
    let mut it = s.split(',').map(|p| p.trim().parse::<usize>());
    let space = it.next().and_then(|r| r.ok()).ok_or_else(|| format!("bad grid override '{s}'"))?;
    let time = match it.next() {
        None => None,
        Some(Ok(t)) => Some(t),
        Some(Err(_)) => return Err(format!("bad grid override '{s}'")),
    };
    if it.next().is_some() {
        return Err(format!("bad grid override '{s}'"));
    }
    Ok((space, time))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(CliError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                s.schema_version
            )));
        }
        Ok(s)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.grid_space {
            self.grid.space = n;
        }
        if let Some(n) = o.grid_time {
            self.grid.time = n;
        }
        if let Some(n) = o.certify_order {
            self.certify.order = n;
        }
    }

    /// Sampled times `k / (time - 1)`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.grid.time.max(2);
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }
}

/// Scenario file contents with the parsed scenario.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub path: PathBuf,
    pub text: String,
    pub scenario: Scenario,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Read { path: path.to_path_buf(), source: e })?;
    let scenario = Scenario::from_toml(&text)?;
    Ok(Loaded { path: path.to_path_buf(), text, scenario })
}

/// What the runner executes.
#[derive(Clone, Debug)]
pub enum Plan {
    Section(Box<SmoothingProblem>),
    Homotopy { tau: Section, f: Homotopy, tube: Tube, opts: Box<HomotopyOptions> },
}

#[derive(Clone, Debug)]
pub struct Built {
    pub scenario: Scenario,
    pub bundle: Bundle,
    pub sigma: Section,
    pub plan: Plan,
}

fn invalid<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Invalid(format!("{what}: {e}"))
}

fn leaf(atlas: &Atlas, e: RegionExpr, chart: Option<usize>, dims: &[usize]) -> Result<Region, CliError> {
    for &d in dims {
        if d != atlas.dim {
            return Err(CliError::Invalid(format!("region coordinates have length {d}, manifold has dimension {}", atlas.dim)));
        }
    }
    match chart {
        None => Ok(Region::uniform(atlas, e)),
        Some(c) if c < atlas.charts.len() => Ok(Region::from_chart(atlas, c, e)),
        Some(c) => Err(CliError::Invalid(format!("region chart {c} does not exist ({} charts)", atlas.charts.len()))),
    }
}

pub fn build_region(spec: &RegionSpec, atlas: &Atlas, sigma: &Section) -> Result<Region, CliError> {
    Ok(match spec {
        RegionSpec::All => Region::all(atlas),
        RegionSpec::Empty => Region::empty(atlas),
        RegionSpec::Smooth => sigma.smooth.clone(),
        RegionSpec::Rect { lo, hi, closed, chart } => {
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(CliError::Invalid(format!("rect with lo {lo:?} not below hi {hi:?}")));
            }
            let axes = lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| if *closed { Interval::closed(a, b) } else { Interval::open(a, b) })
                .collect();
            leaf(atlas, RegionExpr::rect(Rect::new(axes)), *chart, &[lo.len(), hi.len()])?
        }
        RegionSpec::Ball { center, radius, closed, chart } => {
            if !(*radius > 0.0) {
                return Err(CliError::Invalid(format!("ball radius must be positive, got {radius}")));
            }
            leaf(atlas, RegionExpr::ball(center.clone(), *radius, *closed), *chart, &[center.len()])?
        }
        RegionSpec::Union { parts } => {
            let mut r = Region::empty(atlas);
            for p in parts {
                r = r.union(&build_region(p, atlas, sigma)?);
            }
            r
        }
        RegionSpec::Intersection { parts } => {
            let mut r = Region::all(atlas);
            for p in parts {
                r = r.intersection(&build_region(p, atlas, sigma)?);
            }
            r
        }
        RegionSpec::Difference { from, remove } => build_region(from, atlas, sigma)?.difference(&build_region(remove, atlas, sigma)?),
    })
}

fn uses_smooth(spec: &RegionSpec) -> bool {
    match spec {
        RegionSpec::Smooth => true,
        RegionSpec::Union { parts } | RegionSpec::Intersection { parts } => parts.iter().any(uses_smooth),
        RegionSpec::Difference { from, remove } => uses_smooth(from) || uses_smooth(remove),
        _ => false,
    }
}

/// Regions whose membership must agree across charts on the grid.
fn check_consistent(name: &str, r: &Region, atlas: &Atlas, res: usize) -> Result<(), CliError> {
    match r.consistency_violations(atlas, res, 1e-9).first() {
        None => Ok(()),
        Some((c, x)) => Err(CliError::Invalid(format!(
            "region {name} disagrees between charts at chart {c} point {x:?}; give it with a chart"
        ))),
    }
}

fn schedule(s: &Scenario, dim: usize) -> Result<RadiusSchedule, CliError> {
    let mut r = RadiusSchedule::for_dim(dim);
    if let Some(h) = s.radius_schedule.h0 {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Invalid(format!("h0 must be positive, got {h}")));
        }
        r.h0 = Some(h);
    }
    if let Some(n) = s.radius_schedule.max_halvings {
        r.max_halvings = n;
    }
    if let Some(q) = s.radius_schedule.quadrature_points {
        if q < 3 {
            return Err(CliError::Invalid(format!("quadrature_points must be at least 3, got {q}")));
        }
        r.quadrature_points = q;
    }
    Ok(r)
}

impl Scenario {
    /// Builds every catalog object and checks the scenario against the atlas.
    pub fn build(&self) -> Result<Built, CliError> {
        if self.grid.space < 3 || self.grid.time < 3 {
            return Err(CliError::Invalid(format!("grid resolutions must be at least 3, got {:?}", self.grid)));
        }
        if self.certify.order == 0 {
            return Err(CliError::Invalid("certify order must be at least 1".into()));
        }
        let atlas = builtin_manifold(&self.manifold.id, &self.manifold.params).map_err(invalid("manifold"))?;
        let bundle = builtin_bundle(&self.bundle.id, atlas).map_err(invalid("bundle"))?;
        let sigma = builtin_section(&self.section.id, &self.section.params, &bundle).map_err(invalid("section"))?;
        let tube = builtin_width(&self.tube.id, &self.tube.params, &bundle, sigma.clone()).map_err(invalid("tube"))?;
        let certify = SmoothnessSteps::with_order(self.certify.order);
        let atlas = &bundle.base;
        let plan = if self.task.is_homotopy() {
            if self.regions.is_some() {
                return Err(CliError::Invalid("homotopy tasks fix L and U; remove [regions]".into()));
            }
            let target = self.target.as_ref().ok_or_else(|| CliError::Invalid("homotopy tasks need [target]".into()))?;
            let spec = self.homotopy.as_ref().ok_or_else(|| CliError::Invalid("homotopy tasks need [homotopy]".into()))?;
            let tau = builtin_section(&target.id, &target.params, &bundle).map_err(invalid("target"))?;
            let f = builtin_homotopy(&spec.id, &bundle, &sigma, &tau, self.grid.space).map_err(invalid("homotopy"))?;
            let mut opts = HomotopyOptions {
                flat: spec.flat,
                resolution: self.grid.time,
                base_resolution: self.grid.space,
                certify,
                ..HomotopyOptions::default()
            };
            if !(spec.flat > 0.0 && spec.flat < 0.5) {
                return Err(CliError::Invalid(format!("flat must lie in (0, 1/2), got {}", spec.flat)));
            }
            match (self.task, &spec.basepoint) {
                (Task::BasepointHomotopy, Some(b)) => {
                    if b.chart >= atlas.charts.len() || !atlas.charts[b.chart].contains(&b.x) {
                        return Err(CliError::Invalid(format!("base point {:?} is not in chart {}", b.x, b.chart)));
                    }
                    opts.basepoint = Some((b.chart, b.x.clone()));
                }
                (Task::BasepointHomotopy, None) => {
                    return Err(CliError::Invalid("basepoint_homotopy needs homotopy.basepoint".into()))
                }
                (_, Some(_)) => return Err(CliError::Invalid("homotopy.basepoint needs task basepoint_homotopy".into())),
                _ => {}
            }
            opts.schedule = Some(schedule(self, atlas.dim + 1)?);
            Plan::Homotopy { tau, f, tube, opts: Box::new(opts) }
        } else {
            if self.target.is_some() || self.homotopy.is_some() {
                return Err(CliError::Invalid("[target] and [homotopy] only apply to homotopy tasks".into()));
            }
            if self.task == Task::SmoothMap && bundle.name != "trivial_line" && bundle.name != "circle_fibre" {
                return Err(CliError::Invalid(format!("smooth_map needs a product bundle, got '{}'", bundle.name)));
            }
            let regions = self.regions.as_ref().ok_or_else(|| CliError::Invalid("[regions] with at least u is required".into()))?;
            if uses_smooth(&regions.l) || uses_smooth(&regions.u) {
                return Err(CliError::Invalid("kind = \"smooth\" is only allowed for a".into()));
            }
            let l = build_region(&regions.l, atlas, &sigma)?;
            let u = build_region(&regions.u, atlas, &sigma)?;
            for (name, r) in [("l", &l), ("u", &u)] {
                check_consistent(name, r, atlas, self.grid.space)?;
            }
            let mut p = SmoothingProblem::new(bundle.clone(), sigma.clone(), l, u, tube, self.grid.space);
            if let Some(a) = &regions.a {
                p.a = build_region(a, atlas, &sigma)?;
            }
            p.schedule = schedule(self, atlas.dim)?;
            p.certify = certify;
            p.validate().map_err(invalid("regions"))?;
            Plan::Section(Box::new(p))
        };
        Ok(Built { scenario: self.clone(), bundle, sigma, plan })
    }
}

impl Built {
    pub fn grid(&self) -> Vec<GridPoint> {
        self.bundle.base.sample_grid(self.scenario.grid.space)
    }

    /// Circle-valued sections over the circle have a degree.
    pub fn has_degree(&self) -> bool {
        matches!(self.bundle.fibre, Fibre::Circle) && self.bundle.base.dim == 1 && self.bundle.base.periodic == [true]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
task = "smooth_section"
manifold = { id = "interval" }
bundle = { id = "trivial_line" }
section = { id = "abs_kink", params = { center = 0.5 } }
tube = { id = "constant", params = { width = 0.05 } }
[regions]
u = { kind = "rect", lo = [0.25], hi = [0.75] }
"#;

    #[test]
    fn minimal_scenario_builds() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.grid.space, 129);
        let b = s.build().unwrap();
        assert!(matches!(b.plan, Plan::Section(_)));
    }

    #[test]
    fn wrong_schema_version() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(Scenario::from_toml(&text), Err(CliError::Invalid(_))));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let text = format!("{MINIMAL}\n[grid]\nspace = 65\nbogus = 1\n");
        assert!(matches!(Scenario::from_toml(&text), Err(CliError::Parse(_))));
    }

    #[test]
    fn unknown_catalog_id() {
        let text = MINIMAL.replace("abs_kink", "no_such_section");
        let s = Scenario::from_toml(&text).unwrap();
        assert!(matches!(s.build(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn region_dimension_checked() {
        let text = MINIMAL.replace("lo = [0.25], hi = [0.75]", "lo = [0.25, 0.0], hi = [0.75, 1.0]");
        let s = Scenario::from_toml(&text).unwrap();
        assert!(matches!(s.build(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn uniform_arc_on_circle_is_inconsistent() {
        let text = MINIMAL
            .replace("\"interval\"", "\"circle\"")
            .replace("lo = [0.25], hi = [0.75]", "lo = [0.2], hi = [0.8]");
        let s = Scenario::from_toml(&text).unwrap();
        assert!(s.build().is_ok());
        let text = MINIMAL
            .replace("\"interval\"", "\"circle\"")
            .replace("lo = [0.25], hi = [0.75]", "lo = [2.9], hi = [3.4]");
        let s = Scenario::from_toml(&text).unwrap();
        assert!(matches!(s.build(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn grid_override_syntax() {
        assert_eq!(parse_grid_override("65").unwrap(), (65, None));
        assert_eq!(parse_grid_override("65,17").unwrap(), (65, Some(17)));
        assert!(parse_grid_override("x").is_err());
        assert!(parse_grid_override("1,2,3").is_err());
    }
}
