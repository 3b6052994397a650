//! Certification engines: smooth first/second-order conditions, polyhedral
//! KKT systems, nonsmooth d-stationarity, and grid classification of saddle
//! and minimax points.

mod classify;
mod nonsmooth;
mod sampling;
mod smooth;
#[cfg(test)]
mod tests;

pub use classify::{
    classify_point, first_order_scan, maxmin_gap, search_global_minimax, ClassifyConfig, Evidence, InnerLimitEvidence,
    Label, LevelEvidence, MinimaxClassification, TauFit,
};
pub use nonsmooth::check_d_stationarity;
pub use smooth::{check_first_order_smooth, check_second_order_smooth, check_skkt, recover_kkt, KktFit};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::deriv::QuotientScheme;
use crate::error::{Error, Result};
use crate::geometry::Tolerances;
use crate::problem::{MinMaxProblem, Point};

pub const GS2_1: &str = "gs2-1";
pub const GS2_2: &str = "gs2-2";
pub const GS6_1: &str = "gs6-1";
pub const GS6_2: &str = "gs6-2";
pub const FKKT: &str = "FKKT";
pub const SKKT: &str = "SKKT";
pub const NONS1ST_1: &str = "NonS1st-1";
pub const NONS1ST_2: &str = "NonS1st-2";
pub const NONS2ED_1: &str = "NonS2ed-1";
pub const NONS2ED_2: &str = "NonS2ed-2";

pub const ALL_CONDITIONS: [&str; 10] =
    [GS2_1, GS2_2, GS6_1, GS6_2, FKKT, SKKT, NONS1ST_1, NONS1ST_2, NONS2ED_1, NONS2ED_2];

/// Outcome of one condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ConditionOutcome {
    Pass {
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    /// A sampled direction (or stacked `(x, y)` direction) violating the condition.
    Fail { witness: Vec<f64>, value: f64 },
    NotCheckable { reason: String },
    Skipped { reason: String },
}

impl ConditionOutcome {
    pub fn pass() -> Self {
        ConditionOutcome::Pass { note: None }
    }

    pub fn pass_with(note: impl Into<String>) -> Self {
        ConditionOutcome::Pass { note: Some(note.into()) }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, ConditionOutcome::Pass { .. })
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, ConditionOutcome::Fail { .. })
    }
}

/// One evaluated condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResult {
    pub id: &'static str,
    pub outcome: ConditionOutcome,
    pub residual: Option<f64>,
    /// Number of sampled directions the condition was tested on.
    pub samples: Option<usize>,
}

impl ConditionResult {
    fn new(id: &'static str, outcome: ConditionOutcome) -> Self {
        Self { id, outcome, residual: None, samples: None }
    }

    fn residual(mut self, r: f64) -> Self {
        self.residual = Some(r);
        self
    }

    fn samples(mut self, k: usize) -> Self {
        self.samples = Some(k);
        self
    }
}

/// Multipliers of the outward KKT system: `−∇_x f = Σ αᵢAᵢ`, `∇_y f = Σ βⱼCⱼ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Multipliers {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSamples {
    pub seed: u64,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub point: Point,
    pub conditions: BTreeMap<String, ConditionOutcome>,
    pub residuals: BTreeMap<String, f64>,
    pub multipliers: Option<Multipliers>,
    pub direction_samples: DirectionSamples,
    pub notes: Vec<String>,
    pub extras: BTreeMap<String, f64>,
}

impl StationarityReport {
    pub fn new(point: Point, seed: u64) -> Self {
        let conditions = ALL_CONDITIONS
            .iter()
            .map(|id| (id.to_string(), ConditionOutcome::Skipped { reason: "not requested".into() }))
            .collect();
        Self {
            point,
            conditions,
            residuals: BTreeMap::new(),
            multipliers: None,
            direction_samples: DirectionSamples { seed, counts: BTreeMap::new() },
            notes: Vec::new(),
            extras: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, result: ConditionResult) {
        if let Some(r) = result.residual {
            self.residuals.insert(result.id.to_string(), r);
        }
        if let Some(k) = result.samples {
            self.direction_samples.counts.insert(result.id.to_string(), k);
        }
        self.conditions.insert(result.id.to_string(), result.outcome);
    }

    pub fn record_all(&mut self, results: Vec<ConditionResult>) {
        results.into_iter().for_each(|r| self.record(r));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    pub fn outcome(&self, id: &str) -> Option<&ConditionOutcome> {
        self.conditions.get(id)
    }

    /// True when `id` was evaluated and passed.
    pub fn passed(&self, id: &str) -> bool {
        self.outcome(id).is_some_and(ConditionOutcome::is_pass)
    }

    pub fn any_failed(&self) -> bool {
        self.conditions.values().any(ConditionOutcome::is_fail)
    }

    /// Every evaluated condition passed; skipped ones are ignored.
    pub fn all_evaluated_pass(&self) -> bool {
        self.conditions
            .values()
            .all(|o| matches!(o, ConditionOutcome::Pass { .. } | ConditionOutcome::Skipped { .. }))
    }
}

/// Tolerances and sample sizes shared by the certifiers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyConfig {
    pub tol: Tolerances,
    /// Quadratic-form slack relative to `1 + ‖H‖`.
    pub tol_form: f64,
    /// Slack for sign tests on directional estimates.
    pub tol_dir: f64,
    /// Radii of the balls around `ŷ` used for second-order direction sets.
    pub delta_list: Vec<f64>,
    /// Random `y′` per radius, in addition to `ŷ` itself.
    pub y_samples: usize,
    /// Random cone directions on top of the coordinate rays.
    pub direction_count: usize,
    pub seed: u64,
    pub scheme: QuotientScheme,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            tol_form: 1e-8,
            tol_dir: 1e-6,
            delta_list: vec![1e-1, 1e-2, 1e-3],
            y_samples: 16,
            direction_count: 64,
            seed: 0,
            scheme: QuotientScheme::default(),
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.delta_list.is_empty() || self.delta_list.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidParams("delta list must hold positive radii".into()));
        }
        if self.direction_count == 0 {
            return Err(Error::InvalidParams("direction count must be at least 1".into()));
        }
        for t in [self.tol_form, self.tol_dir, self.tol.active, self.tol.orth, self.tol.kkt, self.tol.feas] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParams("tolerances must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyOptions {
    /// 1 for first-order conditions only, 2 to add second-order conditions.
    pub order: u8,
    /// Use the directional-derivative (d-stationarity) conditions.
    pub nonsmooth: bool,
    /// Run the smooth conditions even if the problem is tagged locally Lipschitz.
    pub assume_smooth: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { order: 2, nonsmooth: false, assume_smooth: false }
    }
}

/// Runs the requested condition set. Conditions outside the request are
/// reported as skipped.
pub fn verify(
    problem: &MinMaxProblem,
    point: &Point,
    options: &VerifyOptions,
    config: &CertifyConfig,
) -> Result<StationarityReport> {
    problem.check_point(point)?;
    config.validate()?;
    if !(1..=2).contains(&options.order) {
        return Err(Error::InvalidParams(format!("order must be 1 or 2, got {}", options.order)));
    }
    let mut report = StationarityReport::new(point.clone(), config.seed);
    if options.nonsmooth {
        let results = check_d_stationarity(problem, point, options.order, config)?;
        report.record_all(results);
        report.note("directional estimates are certified only on the sampled cloud and step ladder");
        return Ok(report);
    }
    if !(problem.smoothness().is_c1() || options.assume_smooth) {
        for id in [GS2_1, GS2_2, FKKT] {
            report.record(ConditionResult::new(
                id,
                ConditionOutcome::NotCheckable { reason: "objective is declared locally Lipschitz".into() },
            ));
        }
        return Ok(report);
    }
    let (first, notes) = check_first_order_smooth(problem, point, config)?;
    report.record_all(first);
    notes.into_iter().for_each(|n| report.note(n));
    let kkt = recover_kkt(problem, point, config)?;
    report.record(kkt.condition());
    if kkt.accepted {
        report.multipliers = Some(Multipliers { alpha: kkt.alpha.clone(), beta: kkt.beta.clone() });
    }
    if options.order == 2 {
        let (second, notes) = check_second_order_smooth(problem, point, config)?;
        report.record_all(second);
        notes.into_iter().for_each(|n| report.note(n));
        report.record(check_skkt(problem, point, &kkt, config)?);
        report.note("gs6-1 directions are sampled; boundary directions of the closure may be missed");
    }
    Ok(report)
}
