use serde::Serialize;

use super::sampling::{ball_points, Block, QuadraticForm};
use super::{CertifyConfig, ConditionOutcome, ConditionResult, FKKT, GS2_1, GS2_2, GS6_1, GS6_2, SKKT};
use crate::error::Result;
use crate::geometry::{nnls, sample_cone_directions, ConeMode, PolyhedralSet};
use crate::problem::{MinMaxProblem, Point};
use crate::seeds::derive_seed;
use crate::vecops::{dot, norm, normalize};

fn gradients(problem: &MinMaxProblem, p: &Point, notes: &mut Vec<String>) -> (Vec<f64>, Vec<f64>) {
    let (gx, fdx) = problem.grad_x_or_fd(&p.x, &p.y);
    let (gy, fdy) = problem.grad_y_or_fd(&p.x, &p.y);
    if fdx || fdy {
        notes.push("gradients estimated by central differences (h = 1e-6)".into());
    }
    (gx, gy)
}

/// Unit feasible direction along which `⟨g, v⟩ > 0`, i.e. the projection of
/// `g` onto the tangent cone; falls back to `g` itself.
fn ascent_witness(set: &PolyhedralSet, z: &[f64], g: &[f64], config: &CertifyConfig) -> Result<Vec<f64>> {
    let mut v = set.project_tangent(z, g, &config.tol)?;
    if !normalize(&mut v, 1e-14) {
        v = g.to_vec();
        normalize(&mut v, 0.0);
    }
    Ok(v)
}

/// `0 ∈ ∇_x f + N_X(x̂)` and `0 ∈ −∇_y f + N_Y(ŷ)` by normal-cone membership.
pub fn check_first_order_smooth(
    problem: &MinMaxProblem,
    point: &Point,
    config: &CertifyConfig,
) -> Result<(Vec<ConditionResult>, Vec<String>)> {
    problem.check_point(point)?;
    let mut notes = Vec::new();
    let (gx, gy) = gradients(problem, point, &mut notes);
    let neg_gx: Vec<f64> = gx.iter().map(|v| -v).collect();
    let mut out = Vec::new();
    for (id, set, z, g) in [(GS2_1, problem.x_set(), &point.x, &neg_gx), (GS2_2, problem.y_set(), &point.y, &gy)] {
        let fit = set.normal_cone(z, g, &config.tol)?;
        let outcome = if !fit.converged {
            ConditionOutcome::NotCheckable { reason: "normal-cone fit did not converge".into() }
        } else if fit.member {
            ConditionOutcome::pass()
        } else {
            // A tangent direction along which the block player improves.
            let w = ascent_witness(set, z, g, config)?;
            ConditionOutcome::Fail { value: dot(g, &w), witness: w }
        };
        out.push(ConditionResult::new(id, outcome).residual(fit.residual));
    }
    Ok((out, notes))
}

/// Outward KKT multipliers for both blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktFit {
    /// One entry per row of X (zero on inactive rows).
    pub alpha: Vec<f64>,
    /// One entry per row of Y (zero on inactive rows).
    pub beta: Vec<f64>,
    /// `‖∇_x f + Σ αᵢAᵢ‖`.
    pub residual_x: f64,
    /// `‖−∇_y f + Σ βⱼCⱼ‖`.
    pub residual_y: f64,
    pub residual: f64,
    pub converged: bool,
    pub accepted: bool,
    /// Stacked `(x, y)` direction exposing the violation, if any.
    pub witness: Option<Vec<f64>>,
}

impl KktFit {
    pub(crate) fn condition(&self) -> ConditionResult {
        let outcome = if !self.converged {
            ConditionOutcome::NotCheckable { reason: "multiplier fit did not converge".into() }
        } else if self.accepted {
            ConditionOutcome::pass()
        } else {
            ConditionOutcome::Fail {
                witness: self.witness.clone().unwrap_or_default(),
                value: self.residual,
            }
        };
        ConditionResult::new(FKKT, outcome).residual(self.residual)
    }
}

/// Nonnegative least squares of `target` on the active rows of `set`.
fn fit_rows(set: &PolyhedralSet, z: &[f64], target: &[f64], config: &CertifyConfig) -> Result<(Vec<f64>, f64, bool)> {
    let active: Vec<usize> = set.active_set(z, &config.tol)?.into_iter().map(|c| c.row()).collect();
    let rows: Vec<Vec<f64>> = active.iter().map(|&i| set.row(i).0).collect();
    let sol = nnls(&rows, target);
    let mut coef = vec![0.0; set.num_rows()];
    for (k, &i) in active.iter().enumerate() {
        coef[i] = sol.coef[k];
    }
    let mut r = target.to_vec();
    for (row, c) in rows.iter().zip(&sol.coef) {
        r.iter_mut().zip(row).for_each(|(ri, a)| *ri -= c * a);
    }
    Ok((coef, norm(&r), sol.converged))
}

/// Recovers `α, β ≥ 0` on active rows with `−∇_x f = Σ αᵢAᵢ` and
/// `∇_y f = Σ βⱼCⱼ`. Inactive rows carry zero multipliers, which is the
/// complementarity condition.
pub fn recover_kkt(problem: &MinMaxProblem, point: &Point, config: &CertifyConfig) -> Result<KktFit> {
    problem.check_point(point)?;
    let mut notes = Vec::new();
    let (gx, gy) = gradients(problem, point, &mut notes);
    let neg_gx: Vec<f64> = gx.iter().map(|v| -v).collect();
    let (alpha, residual_x, cx) = fit_rows(problem.x_set(), &point.x, &neg_gx, config)?;
    let (beta, residual_y, cy) = fit_rows(problem.y_set(), &point.y, &gy, config)?;
    let residual = residual_x + residual_y;
    let accepted = residual <= config.tol.kkt * (1.0 + norm(&gx) + norm(&gy));
    let witness = if accepted {
        None
    } else {
        let mut w = problem.x_set().project_tangent(&point.x, &neg_gx, &config.tol)?;
        w.extend(problem.y_set().project_tangent(&point.y, &gy, &config.tol)?);
        normalize(&mut w, 0.0);
        Some(w)
    };
    Ok(KktFit { alpha, beta, residual_x, residual_y, residual, converged: cx && cy, accepted, witness })
}

struct FormTest {
    worst: Option<(Vec<f64>, f64)>,
    tested: usize,
    tol: f64,
}

/// Tests `sign · vᵀHv ≥ −tol` over `dirs`; records the worst violation.
fn test_form(form: &QuadraticForm, dirs: &[Vec<f64>], sign: f64, config: &CertifyConfig) -> FormTest {
    let values: Vec<f64> = dirs.iter().map(|v| form.eval(v)).collect();
    let scale = form
        .hessian_norm()
        .unwrap_or_else(|| values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut tol = config.tol_form * (1.0 + scale);
    if !form.is_analytic() {
        // Difference stencils at step 1e-4 carry errors near 1e-8.
        tol = tol.max(1e-6 * (1.0 + scale));
    }
    let mut worst: Option<(Vec<f64>, f64)> = None;
    for (v, q) in dirs.iter().zip(&values) {
        if sign * q < -tol && worst.as_ref().is_none_or(|(_, w)| sign * q < sign * w) {
            worst = Some((v.clone(), *q));
        }
    }
    FormTest { worst, tested: dirs.len(), tol }
}

fn form_outcome(id: &'static str, t: FormTest, empty_note: &str) -> ConditionResult {
    let residual = t.worst.as_ref().map_or(0.0, |(_, q)| q.abs());
    let outcome = match t.worst {
        Some((witness, value)) => ConditionOutcome::Fail { witness, value },
        None if t.tested == 0 => ConditionOutcome::pass_with(empty_note),
        None => ConditionOutcome::pass_with(format!("quadratic form within {:.1e} on all sampled directions", t.tol)),
    };
    ConditionResult::new(id, outcome).residual(residual).samples(t.tested)
}

/// Second-order conditions on the Γ cones.
///
/// `gs6-1`: `vᵀ∇²_xx f v ≥ 0` for directions `v ∈ T_X(x̂)` orthogonal to
/// `∇_x f(x̂, y′)` for every sampled `y′` in some ball `B(ŷ, δ)`.
/// `gs6-2`: `wᵀ∇²_yy f w ≤ 0` for `w ∈ T_Y(ŷ)` orthogonal to `∇_y f(x̂, ŷ)`.
pub fn check_second_order_smooth(
    problem: &MinMaxProblem,
    point: &Point,
    config: &CertifyConfig,
) -> Result<(Vec<ConditionResult>, Vec<String>)> {
    problem.check_point(point)?;
    let mut notes = Vec::new();
    let (x, y) = (&point.x, &point.y);

    let mut dirs_x: Vec<Vec<f64>> = Vec::new();
    for (k, &delta) in config.delta_list.iter().enumerate() {
        let ys = ball_points(problem.y_set(), y, delta, config.y_samples, derive_seed(&[config.seed, 61, k as u64]));
        let grads: Vec<Vec<f64>> = ys.iter().map(|yp| problem.grad_x_or_fd(x, yp).0).collect();
        let dirs = sample_cone_directions(
            problem.x_set(),
            x,
            config.direction_count,
            derive_seed(&[config.seed, 62, k as u64]),
            &ConeMode::Gamma(grads),
            &config.tol,
        )?;
        dirs_x.extend(dirs);
    }
    let qx = QuadraticForm::new(problem, x, y, Block::X);
    let qy = QuadraticForm::new(problem, x, y, Block::Y);
    for q in [&qx, &qy] {
        if !q.is_analytic() {
            notes.push(format!("Hessian blocks evaluated by {}", q.source()));
        }
    }
    let r1 = form_outcome(GS6_1, test_form(&qx, &dirs_x, 1.0, config), "no sampled direction survives the orthogonality filter; holds vacuously");

    let (gy, _) = problem.grad_y_or_fd(x, y);
    let dirs_y = sample_cone_directions(
        problem.y_set(),
        y,
        config.direction_count,
        derive_seed(&[config.seed, 63]),
        &ConeMode::Gamma(vec![gy]),
        &config.tol,
    )?;
    let r2 = form_outcome(GS6_2, test_form(&qy, &dirs_y, -1.0, config), "Γ₂ is {0}; holds vacuously");
    Ok((vec![r1, r2], notes))
}

/// Second-order KKT test. The x-side cone keeps tangent directions
/// orthogonal to the active rows with positive multipliers and to
/// `∇_x f(x̂, y′)` for sampled `y′` near `ŷ`; the y-side cone keeps those
/// orthogonal to the supported rows of `β`.
pub fn check_skkt(problem: &MinMaxProblem, point: &Point, kkt: &KktFit, config: &CertifyConfig) -> Result<ConditionResult> {
    if !kkt.accepted {
        return Ok(ConditionResult::new(
            SKKT,
            ConditionOutcome::NotCheckable { reason: "first-order KKT system has no solution".into() },
        ));
    }
    let support = |set: &PolyhedralSet, mult: &[f64]| -> Vec<Vec<f64>> {
        let scale = 1.0 + mult.iter().fold(0.0f64, |m, v| m.max(*v));
        mult.iter()
            .enumerate()
            .filter(|(_, a)| **a > config.tol.active * scale)
            .map(|(i, _)| set.row(i).0)
            .collect()
    };
    let (x, y) = (&point.x, &point.y);
    let rows_x = support(problem.x_set(), &kkt.alpha);
    let mut dirs_x: Vec<Vec<f64>> = Vec::new();
    for (k, &delta) in config.delta_list.iter().enumerate() {
        let ys = ball_points(problem.y_set(), y, delta, config.y_samples, derive_seed(&[config.seed, 73, k as u64]));
        let mut constraints = rows_x.clone();
        constraints.extend(ys.iter().map(|yp| problem.grad_x_or_fd(x, yp).0));
        dirs_x.extend(sample_cone_directions(
            problem.x_set(),
            x,
            config.direction_count,
            derive_seed(&[config.seed, 71, k as u64]),
            &ConeMode::Gamma(constraints),
            &config.tol,
        )?);
    }
    let dirs_y = sample_cone_directions(
        problem.y_set(),
        y,
        config.direction_count,
        derive_seed(&[config.seed, 72]),
        &ConeMode::Gamma(support(problem.y_set(), &kkt.beta)),
        &config.tol,
    )?;
    let tx = test_form(&QuadraticForm::new(problem, x, y, Block::X), &dirs_x, 1.0, config);
    let ty = test_form(&QuadraticForm::new(problem, x, y, Block::Y), &dirs_y, -1.0, config);
    let tested = tx.tested + ty.tested;
    let n = problem.n();
    let worst = match (tx.worst, ty.worst) {
        (Some((v, q)), _) => Some((v.into_iter().chain(std::iter::repeat_n(0.0, problem.m())).collect::<Vec<_>>(), q)),
        (None, Some((w, q))) => Some((std::iter::repeat_n(0.0, n).chain(w).collect(), q)),
        (None, None) => None,
    };
    let residual = worst.as_ref().map_or(0.0, |(_, q)| q.abs());
    let outcome = match worst {
        Some((witness, value)) => ConditionOutcome::Fail { witness, value },
        None if tested == 0 => ConditionOutcome::pass_with("critical cones are {0}; holds vacuously"),
        None => ConditionOutcome::pass(),
    };
    Ok(ConditionResult::new(SKKT, outcome).residual(residual).samples(tested))
}
