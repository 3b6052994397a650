//! Difference-quotient estimators for first- and second-order directional
//! quantities: subderivatives, Clarke derivatives, one-sided directional
//! derivatives and their second-order counterparts.
//!
//! Every estimator evaluates a quotient on a geometric `t` ladder over a
//! seeded sample cloud. Each cloud member is extrapolated to `t = 0` by
//! Richardson steps over the finest three levels (falling back to two levels,
//! then to raw quotients, when those do not settle), and the estimate is the
//! extremum (liminf or limsup) over the cloud. The cloud radius
//! shrinks with `t`, so perturbed directions and base points converge to the
//! nominal ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops::norm;


/// Magnitude reported for quotients that blow up as `t ↓ 0`.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Parameters of the finite surrogate for the limit operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuotientScheme {
    /// Step ladder for first-order quotients, strictly decreasing.
    pub t_sequence: Vec<f64>,
    /// Step ladder for second-order quotients, strictly decreasing.
    pub second_order_t_sequence: Vec<f64>,
    /// Direction perturbation radius relative to `t‖v‖`. Ladder values are
    /// distances: the step along `v` is `t/‖v‖`.
    pub perturbation_radius: f64,
    /// Random cloud members on top of the centre and the `±eᵢ` members.
    pub perturbation_count: usize,
    /// Base-point perturbation radius relative to `t`.
    pub base_point_radius: f64,
    pub seed: u64,
    /// Relative agreement required between the two finest extrapolations.
    pub tol_conv: f64,
}

impl Default for QuotientScheme {
    fn default() -> Self {
        Self {
            t_sequence: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            second_order_t_sequence: vec![1e-1, 1e-2, 1e-3, 1e-4],
            perturbation_radius: 0.1,
            perturbation_count: 32,
            base_point_radius: 2.0,
            seed: 0,
            tol_conv: 1e-4,
        }
    }
}

impl QuotientScheme {
    pub fn validate(&self) -> Result<()> {
        for (name, ts) in [("t_sequence", &self.t_sequence), ("second_order_t_sequence", &self.second_order_t_sequence)] {
            if ts.len() < 3 {
                return Err(Error::InvalidScheme(format!("{name} needs at least 3 levels")));
            }
            if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) || ts.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::InvalidScheme(format!("{name} must be positive and strictly decreasing")));
            }
        }
        for (name, r) in [("perturbation_radius", self.perturbation_radius), ("base_point_radius", self.base_point_radius)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidScheme(format!("{name} must be finite and nonnegative")));
            }
        }
        if self.perturbation_count == 0 {
            return Err(Error::InvalidScheme("perturbation_count must be at least 1".into()));
        }
        if !(self.tol_conv.is_finite() && self.tol_conv > 0.0) {
            return Err(Error::InvalidScheme("tol_conv must be positive".into()));
        }
        Ok(())
    }

    /// Unit-ball offsets: the centre, `±eᵢ`, then seeded random members.
    pub fn cloud(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; dim]];
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = s;
                out.push(e);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.perturbation_count {
            let mut d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let nd = norm(&d);
            let r: f64 = rng.gen();
            if nd > 0.0 {
                d.iter_mut().for_each(|c| *c *= r / nd);
            }
            out.push(d);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitMode {
    Liminf,
    Limsup,
    Limit,
}

/// A numerical surrogate for one directional quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    /// Max minus min of the raw quotients over the cloud at the finest step.
    pub spread: f64,
    pub converged: bool,
    /// The quotient grows without bound; `value` holds `±DIVERGENCE_CAP`.
    pub diverged: bool,
    pub mode: LimitMode,
    #[serde(skip)]
    pub scheme: QuotientScheme,
}

impl DerivativeEstimate {
    /// Converged and not capped.
    pub fn is_reliable(&self) -> bool {
        self.converged && !self.diverged && self.value.is_finite()
    }
}

fn richardson(t0: f64, q0: f64, t1: f64, q1: f64) -> f64 {
    (t0 * q1 - t1 * q0) / (t0 - t1)
}

fn extremum(values: impl Iterator<Item = f64>, mode: LimitMode) -> Option<f64> {
    values.filter(|v| v.is_finite()).reduce(|a, b| match mode {
        LimitMode::Liminf => a.min(b),
        LimitMode::Limsup | LimitMode::Limit => a.max(b),
    })
}

/// Evaluates `quotient(member, t)` on the ladder and reduces it to an estimate.
fn reduce<Q>(scheme: &QuotientScheme, ts: &[f64], members: usize, mode: LimitMode, quotient: Q) -> DerivativeEstimate
where
    Q: Fn(usize, f64) -> f64,
{
    let k = ts.len();
    let table: Vec<Vec<f64>> = (0..members).map(|s| ts.iter().map(|&t| quotient(s, t)).collect()).collect();
    let all_finite = table.iter().flatten().all(|q| q.is_finite());
    let extrapolated = |level: usize| {
        extremum(
            table.iter().map(|row| richardson(ts[level - 1], row[level - 1], ts[level], row[level])),
            mode,
        )
    };
    let fine = extrapolated(k - 1);
    let coarse = extrapolated(k - 2);
    // Second Neville step over three consecutive levels ending at `level`.
    let extrapolated2 = |level: usize| {
        let (a, b, c) = (ts[level - 2], ts[level - 1], ts[level]);
        extremum(
            table.iter().map(|row| {
                let lo = richardson(a, row[level - 2], b, row[level - 1]);
                let hi = richardson(b, row[level - 1], c, row[level]);
                (a * hi - c * lo) / (a - c)
            }),
            mode,
        )
    };
    let (fine2, coarse2) = if k >= 4 { (extrapolated2(k - 1), extrapolated2(k - 2)) } else { (None, None) };
    let raw_fine = extremum(table.iter().map(|r| r[k - 1]), mode);
    let raw_coarse = extremum(table.iter().map(|r| r[k - 2]), mode);
    let finest: Vec<f64> = table.iter().map(|r| r[k - 1]).filter(|q| q.is_finite()).collect();
    let spread = match (
        finest.iter().cloned().reduce(f64::max),
        finest.iter().cloned().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => f64::NAN,
    };

    let agree = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(f), Some(c)) => all_finite && (f - c).abs() < scheme.tol_conv * (1.0 + f.abs()),
        _ => false,
    };
    // Extrapolation overshoots when the quotient decays faster than linearly
    // in t; the raw quotients then settle first.
    let (mut value, converged) = if agree(fine2, coarse2) {
        (fine2.unwrap_or(f64::NAN), true)
    } else if agree(fine, coarse) {
        (fine.unwrap_or(f64::NAN), true)
    } else if agree(raw_fine, raw_coarse) {
        (raw_fine.unwrap_or(f64::NAN), true)
    } else {
        (fine.unwrap_or(f64::NAN), false)
    };
    let mut diverged = false;
    if !converged && value.is_finite() && value.abs() > 1.0 {
        if let (Some(a), Some(b)) = (raw_fine, raw_coarse) {
            if a.abs() >= 5.0 * b.abs() {
                diverged = true;
                value = DIVERGENCE_CAP.copysign(value);
            }
        }
    }
    DerivativeEstimate { value, spread, converged, diverged, mode, scheme: scheme.clone() }
}

fn offset(base: &[f64], dir: &[f64], scale: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + scale * d).collect()
}

/// Length that converts ladder values into step sizes, so every probe moves
/// `t` in distance whatever the scale of the direction.
fn unit_length(v: &[f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 { n } else { 1.0 }
}

fn check(scheme: &QuotientScheme, x: &[f64], v: &[f64]) -> Result<()> {
    scheme.validate()?;
    check_dim(x.len(), v.len())
}

/// `d g(x)(v)`: liminf over perturbed directions `v′ → v` of `(g(x+tv′) − g(x))/t`.
pub fn subderivative<G>(g: &G, x: &[f64], v: &[f64], scheme: &QuotientScheme) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, v)?;
    let cloud = scheme.cloud(x.len());
    let g0 = g(x);
    let nv = unit_length(v);
    Ok(reduce(scheme, &scheme.t_sequence, cloud.len(), LimitMode::Liminf, |s, t| {
        let vp = offset(v, &cloud[s], scheme.perturbation_radius * t * nv);
        let h = t / nv;
        (g(&offset(x, &vp, h)) - g0) / h
    }))
}

/// `g°(x;v)`: limsup over nearby base points `x′ → x` of `(g(x′+tv) − g(x′))/t`.
pub fn clarke_directional<G>(g: &G, x: &[f64], v: &[f64], scheme: &QuotientScheme) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, v)?;
    let cloud = scheme.cloud(x.len());
    let nv = unit_length(v);
    Ok(reduce(scheme, &scheme.t_sequence, cloud.len(), LimitMode::Limsup, |s, t| {
        let xp = offset(x, &cloud[s], scheme.base_point_radius * t);
        let h = t / nv;
        (g(&offset(&xp, v, h)) - g(&xp)) / h
    }))
}

/// `g′(x;v)`: one-sided limit of `(g(x+tv) − g(x))/t`.
pub fn directional<G>(g: &G, x: &[f64], v: &[f64], scheme: &QuotientScheme) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, v)?;
    let g0 = g(x);
    let nv = unit_length(v);
    Ok(reduce(scheme, &scheme.t_sequence, 1, LimitMode::Limit, |_, t| {
        let h = t / nv;
        (g(&offset(x, v, h)) - g0) / h
    }))
}

/// Second difference `[g(x+2tw) − 2g(x+tw) + g(x)]/t²`. It equals the
/// second-order quotient `(g(x+tw) − g(x) − t·dg(x)(w))/(½t²)` with the first
/// derivative replaced by its one-sided second-order difference.
fn second_difference<G>(g: &G, x: &[f64], w: &[f64], t: f64) -> f64
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    (g(&offset(x, w, 2.0 * t)) - 2.0 * g(&offset(x, w, t)) + g(x)) / (t * t)
}

/// `d²g(x)(w)`: liminf over `w′ → w` of the second-order quotient.
pub fn second_subderivative<G>(g: &G, x: &[f64], w: &[f64], scheme: &QuotientScheme) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, w)?;
    let cloud = scheme.cloud(x.len());
    let nw = unit_length(w);
    Ok(reduce(scheme, &scheme.second_order_t_sequence, cloud.len(), LimitMode::Liminf, |s, t| {
        let wp = offset(w, &cloud[s], scheme.perturbation_radius * t * nw);
        second_difference(g, x, &wp, t / nw)
    }))
}

/// `d²g(x|v)(w)`: liminf over `w′ → w` of `(g(x+tw′) − g(x) − t⟨v,w′⟩)/(½t²)`.
pub fn second_subderivative_pinned<G>(
    g: &G,
    x: &[f64],
    v: &[f64],
    w: &[f64],
    scheme: &QuotientScheme,
) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, w)?;
    check_dim(x.len(), v.len())?;
    let cloud = scheme.cloud(x.len());
    let g0 = g(x);
    let nw = unit_length(w);
    Ok(reduce(scheme, &scheme.second_order_t_sequence, cloud.len(), LimitMode::Liminf, |s, t| {
        let wp = offset(w, &cloud[s], scheme.perturbation_radius * t * nw);
        let lin: f64 = v.iter().zip(&wp).map(|(a, b)| a * b).sum();
        let h = t / nw;
        (g(&offset(x, &wp, h)) - g0 - h * lin) / (0.5 * h * h)
    }))
}

/// `g⁽²⁾(x;v)`: one-sided limit of the second difference along `v`.
pub fn second_directional<G>(g: &G, x: &[f64], v: &[f64], scheme: &QuotientScheme) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, v)?;
    let nv = unit_length(v);
    Ok(reduce(scheme, &scheme.second_order_t_sequence, 1, LimitMode::Limit, |_, t| second_difference(g, x, v, t / nv)))
}

/// `g°°(x;u,v)`: limsup over base points `x′ → x` of the mixed difference
/// `(g(x′+δu+tv) − g(x′+δu) − g(x′+tv) + g(x′))/(δt)` with `δ = t`.
pub fn generalized_second<G>(
    g: &G,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    scheme: &QuotientScheme,
) -> Result<DerivativeEstimate>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check(scheme, x, v)?;
    check_dim(x.len(), u.len())?;
    let cloud = scheme.cloud(x.len());
    let mean = 0.5 * (norm(u) + norm(v));
    let scale = if mean > 0.0 { mean } else { 1.0 };
    Ok(reduce(scheme, &scheme.second_order_t_sequence, cloud.len(), LimitMode::Limsup, |s, t| {
        let xp = offset(x, &cloud[s], scheme.base_point_radius * t);
        let h = t / scale;
        let xu = offset(&xp, u, h);
        (g(&offset(&xu, v, h)) - g(&xu) - g(&offset(&xp, v, h)) + g(&xp)) / (h * h)
    }))
}
