use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{PolyhedralSet, Tolerances};
use crate::problem::MinMaxProblem;
use crate::vecops::norm;

/// `center` followed by `count` seeded points of `B(center, radius) ∩ set`.
/// Box sets clamp; other sets pull infeasible draws back toward the centre.
pub(crate) fn ball_points(set: &PolyhedralSet, center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = center.len();
    let mut out = vec![center.to_vec()];
    for _ in 0..count {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nu = norm(&u).max(f64::MIN_POSITIVE);
        let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
        u.iter_mut().for_each(|c| *c *= r / nu);
        let mut p: Vec<f64> = center.iter().zip(&u).map(|(c, d)| c + d).collect();
        if let Some(q) = set.clamp(&p) {
            p = q;
        } else {
            let mut shrink = 1.0;
            while !set.contains(&p, &tol) && shrink > 1e-18 {
                shrink *= 0.5;
                p = center.iter().zip(&u).map(|(c, d)| c + shrink * d).collect();
            }
            if !set.contains(&p, &tol) {
                continue;
            }
        }
        out.push(p);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Block {
    X,
    Y,
}

/// Evaluates `vᵀ∇²f v` for one block, preferring the analytic Hessian, then
/// central differences of the gradient (step `1e-4`), then a second
/// difference of `f`.
pub(crate) struct QuadraticForm<'a> {
    problem: &'a MinMaxProblem,
    x: &'a [f64],
    y: &'a [f64],
    block: Block,
    hessian: Option<DMatrix<f64>>,
}

pub(crate) const HVP_STEP: f64 = 1e-4;

impl<'a> QuadraticForm<'a> {
    pub(crate) fn new(problem: &'a MinMaxProblem, x: &'a [f64], y: &'a [f64], block: Block) -> Self {
        let hessian = match block {
            Block::X => problem.hess_xx(x, y),
            Block::Y => problem.hess_yy(x, y),
        };
        Self { problem, x, y, block, hessian }
    }

    pub(crate) fn source(&self) -> &'static str {
        match (&self.hessian, self.problem.has_gradients()) {
            (Some(_), _) => "analytic Hessian",
            (None, true) => "finite-difference Hessian-vector products",
            (None, false) => "second differences of the objective",
        }
    }

    pub(crate) fn is_analytic(&self) -> bool {
        self.hessian.is_some()
    }

    pub(crate) fn hessian_norm(&self) -> Option<f64> {
        self.hessian.as_ref().map(|h| h.norm())
    }

    fn shifted(&self, v: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
        let shift = |z: &[f64]| z.iter().zip(v).map(|(a, b)| a + h * b).collect::<Vec<_>>();
        match self.block {
            Block::X => (shift(self.x), self.y.to_vec()),
            Block::Y => (self.x.to_vec(), shift(self.y)),
        }
    }

    fn grad(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        match self.block {
            Block::X => self.problem.grad_x(x, y),
            Block::Y => self.problem.grad_y(x, y),
        }
    }

    pub(crate) fn eval(&self, v: &[f64]) -> f64 {
        if let Some(h) = &self.hessian {
            let hv = h * nalgebra::DVector::from_column_slice(v);
            return v.iter().zip(hv.iter()).map(|(a, b)| a * b).sum();
        }
        let (xp, yp) = self.shifted(v, HVP_STEP);
        let (xm, ym) = self.shifted(v, -HVP_STEP);
        if let (Some(gp), Some(gm)) = (self.grad(&xp, &yp), self.grad(&xm, &ym)) {
            return v.iter().zip(gp.iter().zip(&gm)).map(|(a, (p, m))| a * (p - m) / (2.0 * HVP_STEP)).sum();
        }
        let f0 = self.problem.eval(self.x, self.y);
        (self.problem.eval(&xp, &yp) - 2.0 * f0 + self.problem.eval(&xm, &ym)) / (HVP_STEP * HVP_STEP)
    }
}
