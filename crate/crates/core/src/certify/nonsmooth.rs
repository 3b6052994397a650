use rayon::prelude::*;

use super::sampling::ball_points;
use super::{CertifyConfig, ConditionOutcome, ConditionResult, NONS1ST_1, NONS1ST_2, NONS2ED_1, NONS2ED_2};
use crate::deriv::{clarke_directional, generalized_second, second_subderivative, subderivative, DerivativeEstimate};
use crate::error::Result;
use crate::geometry::{sample_cone_directions, ConeMode};
use crate::problem::{MinMaxProblem, Point};
use crate::seeds::derive_seed;

/// Sign test `sign · value ≥ −tol` over estimates paired with their directions.
fn sign_condition(
    id: &'static str,
    dirs: &[Vec<f64>],
    estimates: &[DerivativeEstimate],
    sign: f64,
    tol: f64,
    empty_note: &str,
) -> ConditionResult {
    let mut worst: Option<(usize, f64)> = None;
    let mut unreliable = 0;
    for (i, e) in estimates.iter().enumerate() {
        if !e.is_reliable() {
            unreliable += 1;
            continue;
        }
        let s = sign * e.value;
        if s < -tol && worst.is_none_or(|(_, w)| s < w) {
            worst = Some((i, s));
        }
    }
    let residual = worst.map_or(0.0, |(_, s)| -s);
    let outcome = match worst {
        Some((i, _)) => ConditionOutcome::Fail { witness: dirs[i].clone(), value: estimates[i].value },
        None if unreliable > 0 => ConditionOutcome::NotCheckable {
            reason: format!("{unreliable} of {} directional estimates did not converge", estimates.len()),
        },
        None if estimates.is_empty() => ConditionOutcome::pass_with(empty_note),
        None => ConditionOutcome::pass(),
    };
    ConditionResult::new(id, outcome).residual(residual).samples(estimates.len())
}

/// Directional necessary conditions for locally Lipschitz objectives:
///
/// * `NonS1st-1`: `f_x°(x̂,ŷ; v) ≥ 0` for `v ∈ T_X(x̂)`;
/// * `NonS1st-2`: `d_y f(x̂,ŷ)(w) ≤ 0` for `w ∈ T_Y(ŷ)`;
/// * `NonS2ed-1`: `f_x°°(x̂,ŷ; v, v) ≥ 0` for tangent `v` with
///   `d_x f(x̂,y′)(v) = 0` for all sampled `y′` in some ball around `ŷ`;
/// * `NonS2ed-2`: `d²_y f(x̂,ŷ)(w) ≤ 0` for tangent `w` with `d_y f(x̂,ŷ)(w) = 0`.
pub fn check_d_stationarity(
    problem: &MinMaxProblem,
    point: &Point,
    order: u8,
    config: &CertifyConfig,
) -> Result<Vec<ConditionResult>> {
    problem.check_point(point)?;
    config.validate()?;
    let (x, y) = (point.x.as_slice(), point.y.as_slice());
    let scheme = &config.scheme;
    let gx = |z: &[f64]| problem.eval(z, y);
    let gy = |z: &[f64]| problem.eval(x, z);

    let dirs_x = sample_cone_directions(
        problem.x_set(),
        x,
        config.direction_count,
        derive_seed(&[config.seed, 81]),
        &ConeMode::Tangent,
        &config.tol,
    )?;
    let dirs_y = sample_cone_directions(
        problem.y_set(),
        y,
        config.direction_count,
        derive_seed(&[config.seed, 82]),
        &ConeMode::Tangent,
        &config.tol,
    )?;

    let clarke: Vec<DerivativeEstimate> =
        dirs_x.par_iter().map(|v| clarke_directional(&gx, x, v, scheme)).collect::<Result<_>>()?;
    let sub_y: Vec<DerivativeEstimate> =
        dirs_y.par_iter().map(|w| subderivative(&gy, y, w, scheme)).collect::<Result<_>>()?;
    let tol = config.tol_dir;
    let mut out = vec![
        sign_condition(NONS1ST_1, &dirs_x, &clarke, 1.0, tol, "T_X is {0}"),
        sign_condition(NONS1ST_2, &dirs_y, &sub_y, -1.0, tol, "T_Y is {0}"),
    ];
    if order < 2 {
        return Ok(out);
    }

    let zero_tol = config.tol.orth * (1.0 + problem.eval(x, y).abs());
    let is_zero = |e: &DerivativeEstimate| e.is_reliable() && e.value.abs() <= zero_tol;

    // Directions whose x-subderivative vanishes on a whole sampled ball of y′.
    let mut keep = vec![false; dirs_x.len()];
    for (k, &delta) in config.delta_list.iter().enumerate() {
        let ys = ball_points(problem.y_set(), y, delta, config.y_samples, derive_seed(&[config.seed, 83, k as u64]));
        let flags: Vec<bool> = dirs_x
            .par_iter()
            .map(|v| {
                for yp in &ys {
                    let g = |z: &[f64]| problem.eval(z, yp);
                    if !is_zero(&subderivative(&g, x, v, scheme)?) {
                        return Ok(false);
                    }
                }
                Ok(true)
            })
            .collect::<Result<_>>()?;
        keep.iter_mut().zip(flags).for_each(|(k, f)| *k |= f);
    }
    let surv_x: Vec<Vec<f64>> = dirs_x.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v.clone()).collect();
    let gen: Vec<DerivativeEstimate> =
        surv_x.par_iter().map(|v| generalized_second(&gx, x, v, v, scheme)).collect::<Result<_>>()?;
    out.push(sign_condition(NONS2ED_1, &surv_x, &gen, 1.0, tol, "no direction has a vanishing subderivative; holds vacuously"));

    let surv_y: Vec<Vec<f64>> =
        dirs_y.iter().zip(&sub_y).filter(|(_, e)| is_zero(e)).map(|(w, _)| w.clone()).collect();
    let sec: Vec<DerivativeEstimate> =
        surv_y.par_iter().map(|w| second_subderivative(&gy, y, w, scheme)).collect::<Result<_>>()?;
    out.push(sign_condition(NONS2ED_2, &surv_y, &sec, -1.0, tol, "no direction has a vanishing subderivative; holds vacuously"));
    Ok(out)
}
