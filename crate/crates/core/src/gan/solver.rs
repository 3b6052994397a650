use serde::Serialize;

use super::GanSaaInstance;
use crate::problem::Point;
use crate::vecops::norm;

/// Simultaneous projected gradient descent-ascent settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GdaConfig {
    pub step_x: f64,
    pub step_y: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self { step_x: 1e-2, step_y: 1e-2, tol: 1e-6, max_iter: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GdaOutcome {
    pub point: Point,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp_all(v: &mut [f64], b: [f64; 2]) {
    v.iter_mut().for_each(|c| *c = c.clamp(b[0], b[1]));
}

fn natural_residual(x: &[f64], y: &[f64], gx: &[f64], gy: &[f64], xb: [f64; 2], yb: [f64; 2]) -> f64 {
    let rx: Vec<f64> = x.iter().zip(gx).map(|(a, g)| a - (a - g).clamp(xb[0], xb[1])).collect();
    let ry: Vec<f64> = y.iter().zip(gy).map(|(a, g)| a - (a + g).clamp(yb[0], yb[1])).collect();
    norm(&rx) + norm(&ry)
}

/// Natural-map residual `‖x − Π_X(x − ∇_x f)‖ + ‖y − Π_Y(y + ∇_y f)‖`; zero
/// exactly at first-order stationary points of the box-constrained problem.
pub fn first_order_residual(instance: &GanSaaInstance, point: &Point) -> f64 {
    let (gx, gy) = instance.gradients_unchecked(&point.x, &point.y);
    natural_residual(&point.x, &point.y, &gx, &gy, instance.config.x_box, instance.config.y_box)
}

/// Runs projected GDA from `start` until the natural-map residual drops
/// below `tol` or `max_iter` is reached.
pub fn solve_gda(instance: &GanSaaInstance, start: &Point, config: &GdaConfig) -> GdaOutcome {
    let (xb, yb) = (instance.config.x_box, instance.config.y_box);
    let mut x = start.x.clone();
    let mut y = start.y.clone();
    clamp_all(&mut x, xb);
    clamp_all(&mut y, yb);
    let mut iterations = 0;
    loop {
        let (gx, gy) = instance.gradients_unchecked(&x, &y);
        let residual = natural_residual(&x, &y, &gx, &gy, xb, yb);
        if residual < config.tol || iterations >= config.max_iter {
            return GdaOutcome {
                point: Point::new(x, y),
                residual,
                iterations,
                converged: residual < config.tol,
            };
        }
        x.iter_mut().zip(&gx).for_each(|(a, g)| *a = (*a - config.step_x * g).clamp(xb[0], xb[1]));
        y.iter_mut().zip(&gy).for_each(|(a, g)| *a = (*a + config.step_y * g).clamp(yb[0], yb[1]));
        iterations += 1;
    }
}
