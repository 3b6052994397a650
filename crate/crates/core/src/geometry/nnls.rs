//! Nonnegative least squares: `min ½‖Σ αᵢ rᵢ − g‖²` subject to `α ≥ 0`.
//!
//! Projected gradient with Armijo backtracking, followed by an exact
//! least-squares solve on the detected support.

use nalgebra::{DMatrix, DVector};

use crate::vecops::{dot, norm};

const MAX_ITER: usize = 10_000;
const ARMIJO: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub coef: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn combine(rows: &[Vec<f64>], coef: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (r, c) in rows.iter().zip(coef) {
        if *c != 0.0 {
            for (o, ri) in out.iter_mut().zip(r) {
                *o += c * ri;
            }
        }
    }
    out
}

fn residual_vec(rows: &[Vec<f64>], coef: &[f64], g: &[f64]) -> Vec<f64> {
    let mut r = combine(rows, coef, g.len());
    for (ri, gi) in r.iter_mut().zip(g) {
        *ri -= gi;
    }
    r
}

fn objective(rows: &[Vec<f64>], coef: &[f64], g: &[f64]) -> f64 {
    let r = residual_vec(rows, coef, g);
    0.5 * dot(&r, &r)
}

pub fn nnls(rows: &[Vec<f64>], g: &[f64]) -> NnlsSolution {
    let p = rows.len();
    if p == 0 {
        return NnlsSolution { coef: vec![], residual: norm(g), iterations: 0, converged: true };
    }
    let lipschitz: f64 = rows.iter().map(|r| dot(r, r)).sum::<f64>().max(1e-300);
    let scale = 1.0 + norm(g);
    let mut coef = vec![0.0; p];
    let mut f = objective(rows, &coef, g);
    let mut step = 1.0 / lipschitz;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..MAX_ITER {
        iterations = it + 1;
        let r = residual_vec(rows, &coef, g);
        let grad: Vec<f64> = rows.iter().map(|ri| dot(ri, &r)).collect();
        // Projected-gradient stationarity measure.
        let pg: f64 = coef
            .iter()
            .zip(&grad)
            .map(|(c, d)| if *c > 0.0 { d * d } else { d.min(0.0).powi(2) })
            .sum::<f64>()
            .sqrt();
        if pg <= 1e-15 * scale * lipschitz.sqrt() {
            converged = true;
            break;
        }
        let mut s = (step * 2.0).min(1e6 / lipschitz);
        loop {
            let trial: Vec<f64> = coef.iter().zip(&grad).map(|(c, d)| (c - s * d).max(0.0)).collect();
            let ft = objective(rows, &trial, g);
            let decrease: f64 = grad.iter().zip(trial.iter().zip(&coef)).map(|(d, (t, c))| d * (t - c)).sum();
            if ft <= f + ARMIJO * decrease || s < 1e-20 / lipschitz {
                let moved = trial.iter().zip(&coef).map(|(t, c)| (t - c).abs()).fold(0.0, f64::max);
                coef = trial;
                f = ft;
                step = s;
                if moved == 0.0 {
                    converged = true;
                }
                break;
            }
            s *= 0.5;
        }
        if converged {
            break;
        }
    }

    polish(rows, g, &mut coef);
    let residual = norm(&residual_vec(rows, &coef, g));
    NnlsSolution { coef, residual, iterations, converged }
}

/// Exact least squares on the positive support; kept only when it stays
/// nonnegative and does not increase the residual.
fn polish(rows: &[Vec<f64>], g: &[f64], coef: &mut [f64]) {
    let support: Vec<usize> = (0..coef.len()).filter(|&i| coef[i] > 0.0).collect();
    if support.is_empty() {
        return;
    }
    let n = g.len();
    let m = DMatrix::from_fn(n, support.len(), |r, c| rows[support[c]][r]);
    let rhs = DVector::from_column_slice(g);
    let svd = m.svd(true, true);
    let Ok(sol) = svd.solve(&rhs, 1e-12) else { return };
    if sol.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return;
    }
    let mut candidate = vec![0.0; coef.len()];
    for (k, &i) in support.iter().enumerate() {
        candidate[i] = sol[k];
    }
    let before = norm(&residual_vec(rows, coef, g));
    let after = norm(&residual_vec(rows, &candidate, g));
    if after <= before {
        coef.copy_from_slice(&candidate);
    }
}
