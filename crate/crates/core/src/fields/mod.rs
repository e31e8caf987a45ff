//! Fields on chart domains, bump kernels, mollification and partitions of unity.

mod blend;
mod kernel;
mod mollify;
mod partition;

pub use blend::{blend, lipschitz_estimate, smooth_on_region, LocalSmoothing, RadiusSchedule, SmoothOutcome};
pub use kernel::{bump, bump_profile, gauss_legendre, kernel_normalization, BumpKernel};
pub use mollify::{mollify, DEFAULT_QUADRATURE_1D, DEFAULT_QUADRATURE_2D};
pub use partition::{partition_of_unity, plateau};

use crate::geom::{Interval, Rect, RegionExpr};
use std::fmt;
use std::sync::Arc;

pub type EvalFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type JetFn = Arc<dyn Fn(&[f64], &mut Jet) + Send + Sync>;

/// Value, gradient and Hessian of a vector field at a point.
///
/// `grad[c * d + i]` is `∂_i f_c`, `hess[(c * d + i) * d + j]` is `∂_i ∂_j f_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub dim: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn zeros(dim: usize, value_dim: usize) -> Self {
        Jet {
            dim,
            value: vec![0.0; value_dim],
            grad: vec![0.0; value_dim * dim],
            hess: vec![0.0; value_dim * dim * dim],
        }
    }
}

/// Sets where a weight field is identically one or zero.
#[derive(Clone, Debug)]
pub struct Levels {
    pub ones: RegionExpr,
    pub zeros: RegionExpr,
}

/// Field on a closed coordinate box with values in `R^value_dim`.
#[derive(Clone)]
pub struct ChartField {
    pub domain: Rect,
    pub value_dim: usize,
    eval: EvalFn,
    jet: Option<JetFn>,
    /// Where the field is declared smooth.
    pub smooth: RegionExpr,
    /// Highest derivative order available in closed form (0 if evaluation only).
    pub derivative_order: usize,
    pub levels: Option<Levels>,
}

impl fmt::Debug for ChartField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartField")
            .field("domain", &self.domain.describe())
            .field("value_dim", &self.value_dim)
            .field("derivative_order", &self.derivative_order)
            .finish()
    }
}

impl ChartField {
    /// Field from a closure; declared smooth nowhere.
    pub fn new(domain: Rect, value_dim: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        ChartField {
            domain,
            value_dim,
            eval: Arc::new(f),
            jet: None,
            smooth: RegionExpr::Empty,
            derivative_order: 0,
            levels: None,
        }
    }

    pub fn from_arc(domain: Rect, value_dim: usize, eval: EvalFn) -> Self {
        ChartField { domain, value_dim, eval, jet: None, smooth: RegionExpr::Empty, derivative_order: 0, levels: None }
    }

    /// Scalar field from a closure of one point.
    pub fn scalar(domain: Rect, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(domain, 1, move |x, out| out[0] = f(x))
    }

    pub fn constant(domain: Rect, value: Vec<f64>) -> Self {
        let m = value.len();
        let d = domain.dim();
        let v2 = value.clone();
        Self::new(domain, m, move |_, out| out.copy_from_slice(&value))
            .with_smooth(RegionExpr::All)
            .with_jet(usize::MAX, move |_, j| {
                *j = Jet::zeros(d, v2.len());
                j.value.copy_from_slice(&v2);
            })
    }

    pub fn with_smooth(mut self, smooth: RegionExpr) -> Self {
        self.smooth = smooth;
        self
    }

    pub fn with_jet(mut self, order: usize, j: impl Fn(&[f64], &mut Jet) + Send + Sync + 'static) -> Self {
        self.jet = Some(Arc::new(j));
        self.derivative_order = order.min(2);
        self
    }

    pub fn with_levels(mut self, levels: Levels) -> Self {
        self.levels = Some(levels);
        self
    }

    /// Same evaluator on a different domain box.
    pub fn restrict(&self, domain: Rect) -> Self {
        ChartField { domain, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn evaluator(&self) -> &EvalFn {
        &self.eval
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.value_dim];
        (self.eval)(x, &mut out);
        out
    }

    pub fn eval1(&self, x: &[f64]) -> f64 {
        self.eval(x)[0]
    }

    pub fn jet(&self, x: &[f64]) -> Option<Jet> {
        self.jet.as_ref().map(|j| {
            let mut out = Jet::zeros(self.dim(), self.value_dim);
            j(x, &mut out);
            out
        })
    }

    pub fn is_smooth_at(&self, x: &[f64]) -> bool {
        self.smooth.contains(x)
    }
}

/// Unbounded box of the given dimension.
pub fn whole_space(dim: usize) -> Rect {
    Rect::new(vec![Interval::everything(); dim])
}

/// Convex target set in fibre-chart coordinates.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub enum ConvexSet {
    Whole(usize),
    Box(Rect),
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConvexSet {
    pub fn contains(&self, v: &[f64]) -> bool {
        self.slack(v) > 0.0
    }

    /// Distance from `v` to the complement; negative outside.
    pub fn slack(&self, v: &[f64]) -> f64 {
        match self {
            ConvexSet::Whole(_) => f64::INFINITY,
            ConvexSet::Box(r) => r
                .axes
                .iter()
                .zip(v)
                .map(|(i, &x)| (x - i.lo).min(i.hi - x))
                .fold(f64::INFINITY, f64::min),
            ConvexSet::Ball { center, radius } => {
                radius - center.iter().zip(v).map(|(c, x)| (x - c) * (x - c)).sum::<f64>().sqrt()
            }
        }
    }
}
