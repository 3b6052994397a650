//! Min-max problem oracles, points, the example registry, and the envelope
//! `φ(x) = max_{y∈Y} f(x, y)`.

mod examples;
mod relu;

pub use examples::{build_example, ExampleId};
pub use relu::ReluNet;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{PolyhedralSet, Tolerances};
use crate::grid::{grid_maximize, set_lattice, GridOptimum, GridSpec};

pub type ValueFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

/// A candidate point `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Point {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    /// Parses `"x1,x2;y1"`. Without a semicolon the first `n` numbers form
    /// the x-block and the remaining `m` the y-block.
    pub fn parse(s: &str, n: usize, m: usize) -> Result<Self> {
        let nums = |part: &str| -> Result<Vec<f64>> {
            part.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    let v: f64 = t.parse().map_err(|_| Error::InvalidParams(format!("not a number: `{t}`")))?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::InvalidParams(format!("non-finite coordinate `{t}`")))
                    }
                })
                .collect()
        };
        let (x, y) = match s.split_once(';') {
            Some((a, b)) => (nums(a)?, nums(b)?),
            None => {
                let all = nums(s)?;
                check_dim(n + m, all.len())?;
                let (a, b) = all.split_at(n);
                (a.to_vec(), b.to_vec())
            }
        };
        check_dim(n, x.len())?;
        check_dim(m, y.len())?;
        Ok(Self { x, y })
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",");
        write!(f, "{};{}", join(&self.x), join(&self.y))
    }
}

/// Declared smoothness class of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    #[serde(rename = "smooth-C2")]
    SmoothC2,
    #[serde(rename = "smooth-C1")]
    SmoothC1,
    LocallyLipschitz,
}

impl Smoothness {
    pub fn is_c1(self) -> bool {
        !matches!(self, Smoothness::LocallyLipschitz)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Smoothness::SmoothC2 => "smooth-C2",
            Smoothness::SmoothC1 => "smooth-C1",
            Smoothness::LocallyLipschitz => "locally-Lipschitz",
        }
    }
}

/// `min_{x∈X} max_{y∈Y} f(x, y)` with optional derivative oracles.
#[derive(Clone)]
pub struct MinMaxProblem {
    name: String,
    n: usize,
    m: usize,
    eval: ValueFn,
    grad_x: Option<GradFn>,
    grad_y: Option<GradFn>,
    hess_xx: Option<HessFn>,
    hess_yy: Option<HessFn>,
    x_set: PolyhedralSet,
    y_set: PolyhedralSet,
    smoothness: Smoothness,
}

impl fmt::Debug for MinMaxProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinMaxProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("smoothness", &self.smoothness)
            .finish_non_exhaustive()
    }
}

const FD_STEP: f64 = 1e-6;

impl MinMaxProblem {
    pub fn new<F>(name: &str, x_set: PolyhedralSet, y_set: PolyhedralSet, smoothness: Smoothness, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            n: x_set.dim(),
            m: y_set.dim(),
            eval: Arc::new(eval),
            grad_x: None,
            grad_y: None,
            hess_xx: None,
            hess_yy: None,
            x_set,
            y_set,
            smoothness,
        }
    }

    pub fn with_gradients<GX, GY>(mut self, gx: GX, gy: GY) -> Self
    where
        GX: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        GY: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.grad_x = Some(Arc::new(gx));
        self.grad_y = Some(Arc::new(gy));
        self
    }

    pub fn with_hessians<HX, HY>(mut self, hx: HX, hy: HY) -> Self
    where
        HX: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        HY: Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hess_xx = Some(Arc::new(hx));
        self.hess_yy = Some(Arc::new(hy));
        self
    }

    /// Replaces the feasible sets (dimensions must match).
    pub fn with_sets(mut self, x_set: PolyhedralSet, y_set: PolyhedralSet) -> Result<Self> {
        check_dim(self.n, x_set.dim())?;
        check_dim(self.m, y_set.dim())?;
        self.x_set = x_set;
        self.y_set = y_set;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn x_set(&self) -> &PolyhedralSet {
        &self.x_set
    }
    pub fn y_set(&self) -> &PolyhedralSet {
        &self.y_set
    }
    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }
    pub fn has_gradients(&self) -> bool {
        self.grad_x.is_some() && self.grad_y.is_some()
    }
    pub fn has_hessians(&self) -> bool {
        self.hess_xx.is_some() && self.hess_yy.is_some()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.eval)(x, y)
    }

    pub fn eval_point(&self, p: &Point) -> f64 {
        self.eval(&p.x, &p.y)
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        check_dim(self.n, p.x.len())?;
        check_dim(self.m, p.y.len())?;
        let tol = Tolerances::default();
        if !self.x_set.contains(&p.x, &tol) {
            return Err(Error::Infeasible(format!("x = {:?} is outside X", p.x)));
        }
        if !self.y_set.contains(&p.y, &tol) {
            return Err(Error::Infeasible(format!("y = {:?} is outside Y", p.y)));
        }
        Ok(())
    }

    /// Analytic `∇_x f` if available.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        self.grad_x.as_ref().map(|g| g(x, y))
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        self.grad_y.as_ref().map(|g| g(x, y))
    }

    pub fn hess_xx(&self, x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        self.hess_xx.as_ref().map(|h| h(x, y))
    }

    pub fn hess_yy(&self, x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        self.hess_yy.as_ref().map(|h| h(x, y))
    }

    /// Central-difference `∇_x f` with step `1e-6`.
    pub fn fd_grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        central_gradient(&|z: &[f64]| self.eval(z, y), x, FD_STEP)
    }

    pub fn fd_grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        central_gradient(&|z: &[f64]| self.eval(x, z), y, FD_STEP)
    }

    /// Analytic gradient when present, otherwise central differences; the flag
    /// reports whether differences were used.
    pub fn grad_x_or_fd(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, bool) {
        match self.grad_x(x, y) {
            Some(g) => (g, false),
            None => (self.fd_grad_x(x, y), true),
        }
    }

    pub fn grad_y_or_fd(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, bool) {
        match self.grad_y(x, y) {
            Some(g) => (g, false),
            None => (self.fd_grad_y(x, y), true),
        }
    }
}

pub fn central_gradient(f: &dyn Fn(&[f64]) -> f64, z: &[f64], h: f64) -> Vec<f64> {
    let mut probe = z.to_vec();
    (0..z.len())
        .map(|i| {
            probe[i] = z[i] + h;
            let fp = f(&probe);
            probe[i] = z[i] - h;
            let fm = f(&probe);
            probe[i] = z[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Refined maximizers of `f(x, ·)` over the Y grid, best first.
pub fn inner_maximizers(problem: &MinMaxProblem, x: &[f64], grid: &GridSpec, keep: usize) -> Result<Vec<GridOptimum>> {
    check_dim(problem.n(), x.len())?;
    if !problem.x_set().contains(x, &Tolerances::default()) {
        return Err(Error::Infeasible(format!("x = {x:?} is outside X")));
    }
    let lat = set_lattice(problem.y_set(), grid)?;
    let f = |y: &[f64]| problem.eval(x, y);
    Ok(grid_maximize(&f, problem.y_set(), &lat, grid.refine_width, keep))
}

/// `φ(x) = max_{y∈Y} f(x, y)`: grid maximum followed by golden-section
/// refinement around the leading grid-local maxima.
pub fn envelope_phi(problem: &MinMaxProblem, x: &[f64], grid: &GridSpec) -> Result<f64> {
    let best = inner_maximizers(problem, x, grid, 4)?;
    best.first()
        .map(|o| o.value)
        .ok_or_else(|| Error::Infeasible("Y grid has no feasible node".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_points() {
        let p = Point::parse("0.1,0.2;0.3", 2, 1).unwrap();
        assert_eq!(p, Point::new(vec![0.1, 0.2], vec![0.3]));
        let q = Point::parse("0,2.75", 1, 1).unwrap();
        assert_eq!(q.y, vec![2.75]);
        assert!(Point::parse("0,1,2", 1, 1).is_err());
        assert!(Point::parse("a;1", 1, 1).is_err());
        assert!(Point::parse("0;1", 2, 1).is_err());
    }

    #[test]
    fn display_round_trips() {
        let p = Point::new(vec![0.25, -1.0], vec![3.5]);
        assert_eq!(Point::parse(&p.to_string(), 2, 1).unwrap(), p);
    }
}
