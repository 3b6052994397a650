use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_first_order_smooth, verify, CertifyConfig, StationarityReport, VerifyOptions, GS2_1, GS2_2, GS6_1, GS6_2,
    NONS1ST_1, NONS1ST_2, NONS2ED_1, NONS2ED_2,
};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{sample_cone_directions, ConeMode, PolyhedralSet, Tolerances};
use crate::grid::{ball_lattice, grid_maximize, grid_minimize, lattice, refine_max, set_lattice, GridOptimum, GridSpec, Lattice};
use crate::problem::{MinMaxProblem, Point};
use crate::seeds::derive_seed;
use crate::vecops::{norm, sub};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Saddle,
    LocalSaddle,
    GlobalMinimax,
    LocalMinimax,
    FirstOrderStationary,
    SecondOrderStationary,
    None,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Saddle => "saddle",
            Label::LocalSaddle => "local-saddle",
            Label::GlobalMinimax => "global-minimax",
            Label::LocalMinimax => "local-minimax",
            Label::FirstOrderStationary => "first-order-stationary",
            Label::SecondOrderStationary => "second-order-stationary",
            Label::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifyConfig {
    /// Resolution of the full X and Y grids.
    pub grid: GridSpec,
    /// Nodes per coordinate of the ball grids used by local checks.
    pub local_nodes: usize,
    /// Ball radii as fractions of `min(diam X, diam Y)`, decreasing.
    pub ladder: Vec<f64>,
    /// Exponents of the radius family `τ(δ) = c·δᵖ`.
    pub powers: Vec<f64>,
    pub c_min: f64,
    pub c_max: f64,
    /// Resolution of the logarithmic `c` grid used when the motion fit fails.
    pub c_per_decade: usize,
    /// Relative slack of every inequality test.
    pub tol_class: f64,
    pub certify: CertifyConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            local_nodes: 41,
            ladder: vec![0.2, 0.1, 0.05, 0.02, 0.01],
            powers: vec![1.0, 1.5, 2.0, 3.0],
            c_min: 1e-2,
            c_max: 1e2,
            c_per_decade: 8,
            tol_class: 1e-9,
            certify: CertifyConfig::default(),
        }
    }
}

impl ClassifyConfig {
    fn validate(&self) -> Result<()> {
        self.certify.validate()?;
        if self.grid.nodes < 2 || self.local_nodes < 2 {
            return Err(Error::InvalidParams("grids need at least 2 nodes per coordinate".into()));
        }
        if self.ladder.len() < 2
            || self.ladder.iter().any(|d| !(d.is_finite() && *d > 0.0))
            || self.ladder.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidParams("delta ladder needs at least 2 positive decreasing levels".into()));
        }
        if self.powers.is_empty() || self.powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidParams("tau powers must be positive".into()));
        }
        if !(self.c_min > 0.0 && self.c_min < self.c_max && self.c_per_decade > 0) {
            return Err(Error::InvalidParams("tau coefficient range must satisfy 0 < c_min < c_max".into()));
        }
        Ok(())
    }
}

/// `τ(δ) = c·δᵖ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TauFit {
    pub c: f64,
    pub p: f64,
}

impl TauFit {
    pub fn tau(&self, delta: f64) -> f64 {
        self.c * delta.powf(self.p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelEvidence {
    pub delta: f64,
    /// `max f(x̂, ·)` over `Y ∩ B(ŷ, δ)`.
    pub inner_ball_max: f64,
    /// `min f(·, ŷ)` over `X ∩ B(x̂, δ)`.
    pub outer_ball_min: f64,
    /// Largest distance from `ŷ` of the tracked local maximizer over `x ∈ B(x̂, δ)`.
    pub motion: f64,
    pub tau: Option<f64>,
    /// `min` over `x ∈ B(x̂, δ)` of `max f(x, ·)` over `Y ∩ B(ŷ, τ(δ))`.
    pub restricted_min: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InnerLimitEvidence {
    /// Global inner maximizers converge to `ŷ` along every probed approach.
    pub holds: bool,
    pub jump_direction: Option<Vec<f64>>,
    pub jump_distance: f64,
    pub probes: usize,
    /// The global inner maximizer is a single cluster at `x̂` and at every probe.
    pub inner_unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub value: f64,
    pub tol: f64,
    /// `φ(x̂) = max_y f(x̂, y)`.
    pub inner_max: f64,
    pub inner_argmax: Vec<f64>,
    /// `min_x f(x, ŷ)`.
    pub outer_min: f64,
    /// `min_x φ(x)` over the refined X grid.
    pub envelope_min: f64,
    pub envelope_argmin: Vec<f64>,
    pub ladder: Vec<LevelEvidence>,
    pub inner_limit: InnerLimitEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimaxClassification {
    pub point: Point,
    pub labels: BTreeSet<Label>,
    pub tau_fit: Option<TauFit>,
    pub delta0: Option<f64>,
    pub evidence: Evidence,
    pub stationarity: StationarityReport,
    pub diagnostics: Vec<String>,
}

impl MinimaxClassification {
    pub fn has(&self, label: Label) -> bool {
        self.labels.contains(&label)
    }
}

type Scalar<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

fn width(cfg: &ClassifyConfig) -> f64 {
    cfg.grid.refine_width
}

fn best_of(opts: Vec<GridOptimum>, set: &str) -> Result<GridOptimum> {
    opts.into_iter()
        .next()
        .ok_or_else(|| Error::Infeasible(format!("{set} grid has no feasible node")))
}

/// Maximum over `set ∩ B(center, radius)`, never below the centre value.
fn ball_max(f: &Scalar, set: &PolyhedralSet, center: &[f64], radius: f64, cfg: &ClassifyConfig) -> Result<GridOptimum> {
    let at_center = GridOptimum { point: center.to_vec(), value: f(center) };
    if radius <= 0.0 {
        return Ok(at_center);
    }
    let lat = ball_lattice(set, center, radius, cfg.local_nodes, cfg.grid.max_nodes)?;
    let r2 = radius * (1.0 + 1e-12);
    let masked = |z: &[f64]| if norm(&sub(z, center)) <= r2 { f(z) } else { f64::NEG_INFINITY };
    let found = grid_maximize(&masked, set, &lat, width(cfg), 2);
    Ok(match found.into_iter().next() {
        Some(o) if o.value > at_center.value => o,
        _ => at_center,
    })
}

fn ball_min(f: &Scalar, set: &PolyhedralSet, center: &[f64], radius: f64, cfg: &ClassifyConfig) -> Result<GridOptimum> {
    let neg = |z: &[f64]| -f(z);
    let o = ball_max(&neg, set, center, radius, cfg)?;
    Ok(GridOptimum { point: o.point, value: -o.value })
}

/// Coordinate pattern search for a local maximizer of `f` starting at `start`.
fn hill_climb(f: &Scalar, set: &PolyhedralSet, start: &[f64], diam: f64) -> Vec<f64> {
    let tol = Tolerances::default();
    let mut y = start.to_vec();
    let mut fy = f(&y);
    let mut step = 1e-3 * diam;
    let floor = 1e-11 * diam;
    let mut iters = 0;
    while step >= floor && iters < 200_000 {
        iters += 1;
        let mut moved = false;
        'coords: for i in 0..y.len() {
            for s in [1.0, -1.0] {
                let mut cand = y.clone();
                cand[i] += s * step;
                let cand = match set.clamp(&cand) {
                    Some(c) => c,
                    None if set.contains(&cand, &tol) => cand,
                    None => continue,
                };
                let fc = f(&cand);
                if fc > fy {
                    y = cand;
                    fy = fc;
                    moved = true;
                    break 'coords;
                }
            }
        }
        step = if moved { 2.0 * step } else { 0.5 * step };
    }
    y
}

/// Clusters of near-tie global maximizers, one representative each.
fn tie_clusters(opts: &[GridOptimum], tie: f64, sep: f64) -> Vec<GridOptimum> {
    let Some(best) = opts.first() else { return vec![] };
    let mut reps: Vec<GridOptimum> = Vec::new();
    for o in opts.iter().filter(|o| o.value >= best.value - tie) {
        if reps.iter().all(|r| norm(&sub(&r.point, &o.point)) > sep) {
            reps.push(o.clone());
        }
    }
    reps
}

struct Level {
    delta: f64,
    inner_ball_max: f64,
    outer_ball_min: f64,
    xs: Vec<Vec<f64>>,
    /// Tracked local maximizer and its value for each `xs` entry.
    tracked: Vec<(Vec<f64>, f64)>,
    motion: f64,
}

struct Ctx<'a> {
    problem: &'a MinMaxProblem,
    point: &'a Point,
    cfg: &'a ClassifyConfig,
    value: f64,
    tol: f64,
    diam_y: f64,
}

impl Ctx<'_> {
    fn build_level(&self, delta: f64) -> Result<Level> {
        let (p, x, y) = (self.problem, &self.point.x, &self.point.y);
        let fy = |z: &[f64]| p.eval(x, z);
        let fx = |z: &[f64]| p.eval(z, y);
        let inner_ball_max = ball_max(&fy, p.y_set(), y, delta, self.cfg)?.value;
        let outer_ball_min = ball_min(&fx, p.x_set(), x, delta, self.cfg)?.value;
        let lat = ball_lattice(p.x_set(), x, delta, self.cfg.local_nodes, self.cfg.grid.max_nodes)?;
        let mut xs: Vec<Vec<f64>> = lat.points.iter().zip(&lat.feasible).filter(|(_, ok)| **ok).map(|(q, _)| q.clone()).collect();
        xs.push(x.clone());
        let tracked: Vec<(Vec<f64>, f64)> = xs
            .par_iter()
            .map(|xp| {
                let g = |z: &[f64]| p.eval(xp, z);
                let yb = hill_climb(&g, p.y_set(), y, self.diam_y);
                let v = g(&yb);
                (yb, v)
            })
            .collect();
        let motion = tracked.iter().map(|(yb, _)| norm(&sub(yb, y))).fold(0.0, f64::max);
        Ok(Level { delta, inner_ball_max, outer_ball_min, xs, tracked, motion })
    }

    /// `min` over the x-ball of the `τ`-restricted inner maximum.
    fn restricted_min(&self, level: &Level, tau: f64) -> Result<f64> {
        let (p, y) = (self.problem, &self.point.y);
        let reach = tau * (1.0 + 1e-9);
        let values: Vec<f64> = level
            .xs
            .par_iter()
            .zip(&level.tracked)
            .map(|(xp, (yb, vb))| {
                let g = |z: &[f64]| p.eval(xp, z);
                let grid = ball_max(&g, p.y_set(), y, tau, self.cfg)?.value;
                let tracked = if norm(&sub(yb, y)) <= reach { *vb } else { f64::NEG_INFINITY };
                Ok(grid.max(tracked))
            })
            .collect::<Result<_>>()?;
        Ok(values.into_iter().fold(f64::INFINITY, f64::min))
    }

    fn inner_ok(&self, level: &Level) -> bool {
        level.inner_ball_max <= self.value + self.tol
    }

    /// Checks every level with the given radius function.
    fn check_levels(&self, levels: &[&Level], fit: &TauFit) -> Result<(bool, Vec<LevelEvidence>)> {
        let mut ok = true;
        let mut ev = Vec::new();
        for l in levels {
            let tau = fit.tau(l.delta);
            let rmin = self.restricted_min(l, tau)?;
            let passed = self.inner_ok(l) && rmin >= self.value - self.tol;
            ok &= passed;
            ev.push(LevelEvidence {
                delta: l.delta,
                inner_ball_max: l.inner_ball_max,
                outer_ball_min: l.outer_ball_min,
                motion: l.motion,
                tau: Some(tau),
                restricted_min: Some(rmin),
                passed,
            });
            if !passed {
                break;
            }
        }
        Ok((ok, ev))
    }

    /// Fits `c·δᵖ` to the tracked maximizer motion: the exponent with the
    /// flattest ratio profile, then the smallest coefficient covering every level.
    fn motion_fit(&self, levels: &[&Level]) -> Option<TauFit> {
        let floor = 1e-10 * self.diam_y;
        let moving: Vec<&&Level> = levels.iter().filter(|l| l.motion > floor).collect();
        if moving.is_empty() {
            return Some(TauFit { c: self.cfg.c_min, p: *self.cfg.powers.iter().fold(&0.0, |a, b| if b > a { b } else { a }) });
        }
        let mut best: Option<(f64, TauFit)> = None;
        for &p in &self.cfg.powers {
            let logs: Vec<f64> = moving.iter().map(|l| (l.motion / l.delta.powf(p)).ln()).collect();
            let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = hi - lo;
            if best.as_ref().is_none_or(|(s, _)| spread < *s - 1e-9) {
                best = Some((spread, TauFit { c: hi.exp().max(self.cfg.c_min), p }));
            }
        }
        best.map(|(_, f)| f).filter(|f| f.c <= self.cfg.c_max)
    }

    fn c_grid(&self) -> Vec<f64> {
        let decades = (self.cfg.c_max / self.cfg.c_min).log10();
        let steps = (decades * self.cfg.c_per_decade as f64).round() as usize;
        (0..=steps)
            .map(|k| self.cfg.c_min * 10f64.powf(k as f64 / self.cfg.c_per_decade as f64))
            .collect()
    }
}

/// Grid classification against the saddle, local saddle, global minimax and
/// local minimax definitions, plus the stationarity labels.
pub fn classify_point(problem: &MinMaxProblem, point: &Point, cfg: &ClassifyConfig) -> Result<MinimaxClassification> {
    cfg.validate()?;
    problem.check_point(point)?;
    let (xs, ys) = (problem.x_set(), problem.y_set());
    let diam_x = xs.diameter()?;
    let diam_y = ys.diameter()?;
    let (x, y) = (&point.x, &point.y);
    let value = problem.eval(x, y);
    let tol = cfg.tol_class * (1.0 + value.abs());
    let w = width(cfg);
    let lat_x = set_lattice(xs, &cfg.grid)?;
    let lat_y = set_lattice(ys, &cfg.grid)?;
    let mut diagnostics = Vec::new();

    // Global checks.
    let fy = |z: &[f64]| problem.eval(x, z);
    let fx = |z: &[f64]| problem.eval(z, y);
    let inner = grid_maximize(&fy, ys, &lat_y, w, 8);
    let inner_best = best_of(inner.clone(), "Y")?;
    let (inner_max, inner_argmax) =
        if inner_best.value >= value { (inner_best.value, inner_best.point.clone()) } else { (value, y.clone()) };
    let inner_global = inner_max <= value + tol;
    let outer_min = best_of(grid_minimize(&fx, xs, &lat_x, w, 2), "X")?.value.min(value);
    let saddle = inner_global && outer_min >= value - tol;

    let phi = |z: &[f64]| -> f64 {
        let g = |q: &[f64]| problem.eval(z, q);
        grid_maximize(&g, ys, &lat_y, w, 4).first().map_or(f64::NEG_INFINITY, |o| o.value)
    };
    let env = envelope_argmin(&phi, xs, &lat_x, w)?;
    let envelope_min = env.value.min(inner_max);
    let global_minimax = inner_global && envelope_min >= value - tol;

    // Local checks on the ladder.
    let scale = diam_x.min(diam_y);
    let ctx = Ctx { problem, point, cfg, value, tol, diam_y };
    let levels: Vec<Level> = cfg.ladder.iter().map(|f| ctx.build_level(f * scale)).collect::<Result<_>>()?;
    let k = levels.len();
    let local_saddle = levels[k - 2..].iter().all(|l| ctx.inner_ok(l) && l.outer_ball_min >= value - tol);

    let mut tau_fit = None;
    let mut delta0 = None;
    let mut ladder_ev: Vec<LevelEvidence> = levels
        .iter()
        .map(|l| LevelEvidence {
            delta: l.delta,
            inner_ball_max: l.inner_ball_max,
            outer_ball_min: l.outer_ball_min,
            motion: l.motion,
            tau: None,
            restricted_min: None,
            passed: false,
        })
        .collect();
    let record = |ev: &mut Vec<LevelEvidence>, got: Vec<LevelEvidence>| {
        for g in got {
            if let Some(slot) = ev.iter_mut().find(|e| e.delta == g.delta) {
                *slot = g;
            }
        }
    };

    let refs: Vec<&Level> = levels.iter().collect();
    if levels[k - 2..].iter().all(|l| ctx.inner_ok(l)) {
        'motion: for start in 0..=k - 2 {
            let sub_levels = &refs[start..];
            if let Some(fit) = ctx.motion_fit(sub_levels) {
                let (ok, ev) = ctx.check_levels(sub_levels, &fit)?;
                if ok {
                    record(&mut ladder_ev, ev);
                    tau_fit = Some(fit);
                    delta0 = Some(sub_levels[0].delta);
                    break 'motion;
                }
            }
        }
        if tau_fit.is_none() {
            // The widest radius in the family bounds what any member can achieve.
            let p_min = cfg.powers.iter().cloned().fold(f64::INFINITY, f64::min);
            let widest = TauFit { c: cfg.c_max, p: p_min };
            let (feasible, ev) = ctx.check_levels(&refs[k - 2..], &widest)?;
            if feasible {
                let grid = ctx.c_grid();
                'family: for start in 0..=k - 2 {
                    for &p in &cfg.powers {
                        for &c in &grid {
                            let fit = TauFit { c, p };
                            let (ok, ev) = ctx.check_levels(&refs[start..], &fit)?;
                            if ok {
                                record(&mut ladder_ev, ev);
                                tau_fit = Some(fit);
                                delta0 = Some(refs[start].delta);
                                break 'family;
                            }
                        }
                    }
                }
                if tau_fit.is_some() {
                    diagnostics.push("tau fitted by family search; maximizer-motion fit did not pass".into());
                }
            } else {
                record(&mut ladder_ev, ev);
            }
            if tau_fit.is_none() {
                diagnostics.push(
                    "no tau(delta) = c*delta^p in the family passes; not local minimax at the tested resolution".into(),
                );
            }
        }
    } else {
        diagnostics.push("y-hat is not a local maximizer of f(x-hat, .) on the smallest balls".into());
    }
    let local_minimax = tau_fit.is_some();

    // Stationarity.
    let smooth = problem.smoothness().is_c1();
    let options = VerifyOptions { order: 2, nonsmooth: !smooth, assume_smooth: false };
    let stationarity = verify(problem, point, &options, &cfg.certify)?;
    let (first_ids, second_ids) =
        if smooth { ([GS2_1, GS2_2], [GS6_1, GS6_2]) } else { ([NONS1ST_1, NONS1ST_2], [NONS2ED_1, NONS2ED_2]) };
    let first = first_ids.iter().all(|id| stationarity.passed(id));
    let second = first && second_ids.iter().all(|id| stationarity.passed(id));

    let inner_limit = inner_limit_evidence(problem, point, &inner, &lat_y, levels[k - 1].delta, cfg)?;

    let mut labels = BTreeSet::new();
    for (flag, label) in [
        (saddle, Label::Saddle),
        (local_saddle, Label::LocalSaddle),
        (global_minimax, Label::GlobalMinimax),
        (local_minimax, Label::LocalMinimax),
        (first, Label::FirstOrderStationary),
        (second, Label::SecondOrderStationary),
    ] {
        if flag {
            labels.insert(label);
        }
    }
    if saddle && !global_minimax {
        diagnostics.push("containment violated: saddle without global-minimax".into());
    }
    if local_saddle && !local_minimax {
        diagnostics.push("containment violated: local-saddle without local-minimax".into());
    }
    if smooth && local_minimax && !first {
        diagnostics.push("containment violated: local-minimax without first-order stationarity".into());
    }
    if global_minimax {
        if let Some(d) = &inner_limit.jump_direction {
            diagnostics.push(format!(
                "inner maximizers jump by {:.6e} when approaching x-hat along {d:?}; first-order conditions need not hold",
                inner_limit.jump_distance
            ));
        } else if smooth && !first {
            diagnostics.push("inner maximizers converge to y-hat yet first-order conditions fail".into());
        }
        if inner_limit.inner_unique && !local_minimax {
            diagnostics.push("inner maximizer is unique near x-hat yet local-minimax was not certified".into());
        }
    }
    if labels.is_empty() {
        labels.insert(Label::None);
    }

    Ok(MinimaxClassification {
        point: point.clone(),
        labels,
        tau_fit,
        delta0,
        evidence: Evidence {
            value,
            tol,
            inner_max,
            inner_argmax,
            outer_min,
            envelope_min,
            envelope_argmin: env.point,
            ladder: ladder_ev,
            inner_limit,
        },
        stationarity,
        diagnostics,
    })
}

/// Minimizer of the envelope on the X grid followed by golden refinement.
fn envelope_argmin(phi: &Scalar, xs: &PolyhedralSet, lat_x: &Lattice, w: f64) -> Result<GridOptimum> {
    let values: Vec<f64> = lat_x
        .points
        .par_iter()
        .zip(&lat_x.feasible)
        .map(|(q, ok)| if *ok { phi(q) } else { f64::INFINITY })
        .collect();
    let best = (0..values.len())
        .filter(|&i| lat_x.feasible[i])
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .ok_or_else(|| Error::Infeasible("X grid has no feasible node".into()))?;
    let neg = |z: &[f64]| -phi(z);
    let (p, v) = refine_max(&neg, xs, &lat_x.points[best], -values[best], &lat_x.spacing(), w);
    Ok(GridOptimum { point: p, value: -v })
}

/// Inner maximizer distances from `ŷ` after stepping `eps` and `eps/10` along `dir`.
struct Probe {
    dir: Vec<f64>,
    far: f64,
    near: f64,
    unique: bool,
}

fn inner_limit_evidence(
    problem: &MinMaxProblem,
    point: &Point,
    inner_at_center: &[GridOptimum],
    lat_y: &Lattice,
    eps: f64,
    cfg: &ClassifyConfig,
) -> Result<InnerLimitEvidence> {
    let (x, y) = (&point.x, &point.y);
    let xs = problem.x_set();
    let h = lat_y.spacing().iter().cloned().fold(0.0, f64::max);
    let sep = 4.0 * h;
    let n = problem.n();
    let mut dirs =
        sample_cone_directions(xs, x, 2 * n + 4, derive_seed(&[cfg.certify.seed, 91]), &ConeMode::Tangent, &cfg.certify.tol)?;
    dirs.truncate(2 * n + 4);
    let tie = |v: f64| 1e-9 * (1.0 + v.abs());
    let mut unique = tie_clusters(inner_at_center, tie(inner_at_center.first().map_or(0.0, |o| o.value)), sep).len() <= 1;
    let tol = Tolerances::default();
    let results: Vec<Option<Probe>> = dirs
        .par_iter()
        .map(|d| {
            let mut dist = [0.0; 2];
            let mut uniq = true;
            for (slot, e) in [eps, eps / 10.0].into_iter().enumerate() {
                let xp: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + e * b).collect();
                if !xs.contains(&xp, &tol) {
                    return None;
                }
                let g = |q: &[f64]| problem.eval(&xp, q);
                let opts = grid_maximize(&g, problem.y_set(), lat_y, width(cfg), 8);
                let best = opts.first()?;
                dist[slot] = norm(&sub(&best.point, y));
                if slot == 0 {
                    uniq = tie_clusters(&opts, tie(best.value), sep).len() <= 1;
                }
            }
            Some(Probe { dir: d.clone(), far: dist[0], near: dist[1], unique: uniq })
        })
        .collect();
    let mut jump: Option<(Vec<f64>, f64)> = None;
    let mut probes = 0;
    for Probe { dir: d, far, near, unique: uniq } in results.into_iter().flatten() {
        probes += 1;
        unique &= uniq;
        let converging = near <= sep || near <= 0.5 * far + sep;
        if !converging && jump.as_ref().is_none_or(|(_, j)| near > *j) {
            jump = Some((d, near));
        }
    }
    check_dim(n, x.len())?;
    Ok(InnerLimitEvidence {
        holds: jump.is_none(),
        jump_distance: jump.as_ref().map_or(0.0, |(_, j)| *j),
        jump_direction: jump.map(|(d, _)| d),
        probes,
        inner_unique: unique,
    })
}

/// Candidate global minimax points: minimizers of the grid envelope paired
/// with every near-tie global maximizer of the inner problem.
pub fn search_global_minimax(problem: &MinMaxProblem, cfg: &ClassifyConfig) -> Result<Vec<Point>> {
    cfg.validate()?;
    let (xs, ys) = (problem.x_set(), problem.y_set());
    let lat_x = set_lattice(xs, &cfg.grid)?;
    let lat_y = set_lattice(ys, &cfg.grid)?;
    let w = width(cfg);
    let phi = |z: &[f64]| -> f64 {
        let g = |q: &[f64]| problem.eval(z, q);
        grid_maximize(&g, ys, &lat_y, w, 4).first().map_or(f64::NEG_INFINITY, |o| o.value)
    };
    let env = envelope_argmin(&phi, xs, &lat_x, w)?;
    let x_star = env.point;
    let g = |q: &[f64]| problem.eval(&x_star, q);
    let opts = grid_maximize(&g, ys, &lat_y, w, 8);
    let best = opts.first().map_or(0.0, |o| o.value);
    let h = lat_y.spacing().iter().cloned().fold(0.0, f64::max);
    Ok(tie_clusters(&opts, 1e-6 * (1.0 + best.abs()), 4.0 * h)
        .into_iter()
        .map(|o| Point::new(x_star.clone(), o.point))
        .collect())
}

/// Box `[c − δ, c + δ]` clipped to the bounding box of `set`.
fn clipped_box(set: &PolyhedralSet, center: &[f64], delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = set.bounding_box()?;
    let l: Vec<f64> = center.iter().zip(&lo).map(|(c, b)| (c - delta).max(*b)).collect();
    let u: Vec<f64> = center.iter().zip(&hi).map(|(c, b)| (c + delta).min(*b)).collect();
    if l.iter().zip(&u).any(|(a, b)| a > b) {
        return Err(Error::Infeasible("the delta box misses the feasible set".into()));
    }
    Ok((l, u))
}

fn in_box(z: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    z.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
}

/// `max_y min_x f − min_x max_y f` over the boxes of half-width `δ` around
/// `center` intersected with X and Y, on nested grids of `nodes` per
/// coordinate with golden refinement.
pub fn maxmin_gap(problem: &MinMaxProblem, center: &Point, delta: f64, nodes: usize, width: f64) -> Result<f64> {
    check_dim(problem.n(), center.x.len())?;
    check_dim(problem.m(), center.y.len())?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParams("delta must be positive".into()));
    }
    let (xs, ys) = (problem.x_set(), problem.y_set());
    let (xl, xh) = clipped_box(xs, &center.x, delta)?;
    let (yl, yh) = clipped_box(ys, &center.y, delta)?;
    let max_nodes = GridSpec::default().max_nodes;
    let lat_x = lattice(xs, &xl, &xh, nodes, None, max_nodes)?;
    let lat_y = lattice(ys, &yl, &yh, nodes, None, max_nodes)?;

    // Inner optimum of `sign·f` over the x box (sign = −1 gives a minimum).
    let inner_x = |yv: &[f64]| -> f64 {
        let g = |q: &[f64]| if in_box(q, &xl, &xh) { -problem.eval(q, yv) } else { f64::NEG_INFINITY };
        -grid_maximize(&g, xs, &lat_x, width, 2).first().map_or(f64::NEG_INFINITY, |o| o.value)
    };
    let inner_y = |xv: &[f64]| -> f64 {
        let g = |q: &[f64]| if in_box(q, &yl, &yh) { problem.eval(xv, q) } else { f64::NEG_INFINITY };
        grid_maximize(&g, ys, &lat_y, width, 2).first().map_or(f64::NEG_INFINITY, |o| o.value)
    };
    let outer_max = |q: &[f64]| if in_box(q, &yl, &yh) { inner_x(q) } else { f64::NEG_INFINITY };
    let maxmin = best_of(grid_maximize(&outer_max, ys, &lat_y, width, 2), "Y")?.value;
    let outer_min = |q: &[f64]| if in_box(q, &xl, &xh) { inner_y(q) } else { f64::INFINITY };
    let minmax = best_of(grid_minimize(&outer_min, xs, &lat_x, width, 2), "X")?.value;
    Ok(maxmin - minmax)
}

/// Grid points of `X × Y` (`nodes` per coordinate) that pass both
/// first-order smooth conditions.
pub fn first_order_scan(problem: &MinMaxProblem, nodes: usize, config: &CertifyConfig) -> Result<Vec<Point>> {
    let spec = GridSpec { nodes, ..GridSpec::default() };
    let lat_x = set_lattice(problem.x_set(), &spec)?;
    let lat_y = set_lattice(problem.y_set(), &spec)?;
    let xs: Vec<&Vec<f64>> = lat_x.points.iter().zip(&lat_x.feasible).filter(|(_, ok)| **ok).map(|(p, _)| p).collect();
    let ys: Vec<&Vec<f64>> = lat_y.points.iter().zip(&lat_y.feasible).filter(|(_, ok)| **ok).map(|(p, _)| p).collect();
    let found: Vec<Vec<Point>> = xs
        .par_iter()
        .map(|x| {
            let mut hits = Vec::new();
            for y in &ys {
                let p = Point::new((*x).clone(), (*y).clone());
                let (res, _) = check_first_order_smooth(problem, &p, config)?;
                if res.iter().all(|r| r.outcome.is_pass()) {
                    hits.push(p);
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}
