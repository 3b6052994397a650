//! Polyhedral feasible sets and their cones.
//!
//! A set is either a finite box `[lower, upper]` or an intersection of
//! halfspaces `{z : Az ≤ b}`. For a box, coordinate `i` contributes two rows:
//! row `2i` is `−zᵢ ≤ −lowerᵢ` and row `2i+1` is `zᵢ ≤ upperᵢ`, so multipliers
//! for both representations share one indexing scheme.
//!
//! Normal vectors are outward: `g ∈ N(z)` iff `g = Σ αᵢ Aᵢ` over active rows
//! with `α ≥ 0`.

mod nnls;
mod sampling;

pub use nnls::{nnls, NnlsSolution};
pub use sampling::{sample_cone_directions, ConeMode, GammaCone, GammaSide};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops::{dot, norm};

/// Tolerances for cone and feasibility queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub active: f64,
    pub orth: f64,
    pub kkt: f64,
    pub feas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { active: 1e-9, orth: 1e-8, kkt: 1e-7, feas: 1e-9 }
    }
}

/// One active constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "index")]
pub enum ActiveConstraint {
    Lower(usize),
    Upper(usize),
    Row(usize),
}

impl ActiveConstraint {
    /// Index into the unified row numbering.
    pub fn row(self) -> usize {
        match self {
            ActiveConstraint::Lower(i) => 2 * i,
            ActiveConstraint::Upper(i) => 2 * i + 1,
            ActiveConstraint::Row(i) => i,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Halfspaces { a: Vec<Vec<f64>>, b: Vec<f64> },
}

/// A nonempty polyhedron.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralSet {
    kind: Kind,
    dim: usize,
}

/// Result of a normal-cone query.
#[derive(Clone, Debug, Serialize)]
pub struct NormalFit {
    pub member: bool,
    /// Euclidean distance from `g` to the normal cone.
    pub residual: f64,
    /// One multiplier per row (zero on inactive rows).
    pub multipliers: Vec<f64>,
    pub converged: bool,
}

impl PolyhedralSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidSet("box must have at least one coordinate".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::InvalidSet(format!("box bounds must be finite (coordinate {i})")));
            }
            if l >= u {
                return Err(Error::InvalidSet(format!("lower >= upper at coordinate {i}")));
            }
        }
        let dim = lower.len();
        Ok(Self { kind: Kind::Box { lower, upper }, dim })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    /// `{z : Az ≤ b}`; rejects empty sets via a phase-1 linear program.
    pub fn halfspaces(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        check_dim(a.len(), b.len())?;
        let dim = a.first().map(Vec::len).ok_or_else(|| Error::InvalidSet("no rows".into()))?;
        if dim == 0 {
            return Err(Error::InvalidSet("rows must have at least one column".into()));
        }
        for row in &a {
            check_dim(dim, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSet("non-finite coefficient".into()));
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("non-finite right-hand side".into()));
        }
        let set = Self { kind: Kind::Halfspaces { a, b }, dim };
        if set.lp_extreme(None, false)?.is_none() {
            return Err(Error::InvalidSet("halfspace system is infeasible".into()));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_box(&self) -> bool {
        matches!(self.kind, Kind::Box { .. })
    }

    /// Box bounds, if this set is a box.
    pub fn box_bounds(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            Kind::Box { lower, upper } => Some((lower, upper)),
            Kind::Halfspaces { .. } => None,
        }
    }

    pub fn num_rows(&self) -> usize {
        match &self.kind {
            Kind::Box { .. } => 2 * self.dim,
            Kind::Halfspaces { b, .. } => b.len(),
        }
    }

    /// Row `i` of the unified description `Az ≤ b`.
    pub fn row(&self, i: usize) -> (Vec<f64>, f64) {
        match &self.kind {
            Kind::Box { lower, upper } => {
                let c = i / 2;
                let mut r = vec![0.0; self.dim];
                if i.is_multiple_of(2) {
                    r[c] = -1.0;
                    (r, -lower[c])
                } else {
                    r[c] = 1.0;
                    (r, upper[c])
                }
            }
            Kind::Halfspaces { a, b } => (a[i].clone(), b[i]),
        }
    }

    /// Signed slacks `b − Az` for every row.
    fn slacks(&self, z: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Box { lower, upper } => {
                let mut s = Vec::with_capacity(2 * self.dim);
                for i in 0..self.dim {
                    s.push(z[i] - lower[i]);
                    s.push(upper[i] - z[i]);
                }
                s
            }
            Kind::Halfspaces { a, b } => a.iter().zip(b).map(|(r, bi)| bi - dot(r, z)).collect(),
        }
    }

    /// Row products `Aᵢ v`.
    fn row_products(&self, v: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Box { .. } => v.iter().flat_map(|vi| [-vi, *vi]).collect(),
            Kind::Halfspaces { a, .. } => a.iter().map(|r| dot(r, v)).collect(),
        }
    }

    pub fn contains(&self, z: &[f64], tol: &Tolerances) -> bool {
        z.len() == self.dim && z.iter().all(|v| v.is_finite()) && self.slacks(z).iter().all(|s| *s >= -tol.feas)
    }

    fn require_feasible(&self, z: &[f64], tol: &Tolerances) -> Result<()> {
        check_dim(self.dim, z.len())?;
        if self.contains(z, tol) {
            Ok(())
        } else {
            Err(Error::Infeasible(format!("{z:?} violates the feasible set")))
        }
    }

    pub fn active_set(&self, z: &[f64], tol: &Tolerances) -> Result<Vec<ActiveConstraint>> {
        self.require_feasible(z, tol)?;
        Ok(self
            .slacks(z)
            .iter()
            .enumerate()
            .filter(|(_, s)| **s <= tol.active)
            .map(|(i, _)| match self.kind {
                Kind::Box { .. } if i % 2 == 0 => ActiveConstraint::Lower(i / 2),
                Kind::Box { .. } => ActiveConstraint::Upper(i / 2),
                Kind::Halfspaces { .. } => ActiveConstraint::Row(i),
            })
            .collect())
    }

    fn active_rows(&self, z: &[f64], tol: &Tolerances) -> Result<Vec<usize>> {
        Ok(self.active_set(z, tol)?.into_iter().map(ActiveConstraint::row).collect())
    }

    /// `Aᵢ v ≤ tol_orth` on every active row.
    pub fn in_tangent_cone(&self, z: &[f64], v: &[f64], tol: &Tolerances) -> Result<bool> {
        check_dim(self.dim, v.len())?;
        let active = self.active_rows(z, tol)?;
        let prods = self.row_products(v);
        Ok(active.iter().all(|&i| prods[i] <= tol.orth))
    }

    /// Membership in `{w : z + λw ∈ set for some λ > 0}`. For polyhedra this is
    /// the tangent cone, so the algebraic test is used.
    pub fn in_t_circle(&self, z: &[f64], v: &[f64], tol: &Tolerances) -> Result<bool> {
        self.in_tangent_cone(z, v, tol)
    }

    /// Same cone tested by stepping `λ ∈ {1e-1, …, 1e-12}` along `v`.
    ///
    /// A step is accepted when no row loses more than `λ·tol_orth` of slack
    /// below `min(slack, 0)`.
    pub fn in_t_circle_line_search(&self, z: &[f64], v: &[f64], tol: &Tolerances) -> Result<bool> {
        self.require_feasible(z, tol)?;
        check_dim(self.dim, v.len())?;
        let s = self.slacks(z);
        let d = self.row_products(v);
        Ok((1..=12).any(|k| {
            let lambda = 10f64.powi(-k);
            s.iter().zip(&d).all(|(si, di)| si - lambda * di >= si.min(0.0) - lambda * tol.orth)
        }))
    }

    /// Fits `g = Σ αᵢ Aᵢ` over active rows with `α ≥ 0`.
    pub fn normal_cone(&self, z: &[f64], g: &[f64], tol: &Tolerances) -> Result<NormalFit> {
        check_dim(self.dim, g.len())?;
        let active = self.active_set(z, tol)?;
        let mut multipliers = vec![0.0; self.num_rows()];
        let (residual, converged) = match &self.kind {
            Kind::Box { .. } => {
                let mut at = vec![None; self.dim];
                for c in &active {
                    match *c {
                        ActiveConstraint::Lower(i) => at[i] = Some(false),
                        ActiveConstraint::Upper(i) => at[i] = Some(true),
                        ActiveConstraint::Row(_) => unreachable!("box sets only report bounds"),
                    }
                }
                let mut sq = 0.0;
                for (i, gi) in g.iter().enumerate() {
                    match at[i] {
                        Some(true) if *gi >= 0.0 => multipliers[2 * i + 1] = *gi,
                        Some(false) if *gi <= 0.0 => multipliers[2 * i] = -gi,
                        _ => sq += gi * gi,
                    }
                }
                (sq.sqrt(), true)
            }
            Kind::Halfspaces { a, .. } => {
                let idx: Vec<usize> = active.iter().map(|c| c.row()).collect();
                let rows: Vec<Vec<f64>> = idx.iter().map(|&i| a[i].clone()).collect();
                let sol = nnls(&rows, g);
                for (k, &i) in idx.iter().enumerate() {
                    multipliers[i] = sol.coef[k];
                }
                (sol.residual, sol.converged)
            }
        };
        Ok(NormalFit { member: residual <= tol.kkt * (1.0 + norm(g)), residual, multipliers, converged })
    }

    /// Euclidean projection of `w` onto the tangent cone at `z`.
    pub fn project_tangent(&self, z: &[f64], w: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
        check_dim(self.dim, w.len())?;
        let active = self.active_set(z, tol)?;
        match &self.kind {
            Kind::Box { .. } => {
                let mut v = w.to_vec();
                for c in active {
                    match c {
                        ActiveConstraint::Lower(i) => v[i] = v[i].max(0.0),
                        ActiveConstraint::Upper(i) => v[i] = v[i].min(0.0),
                        ActiveConstraint::Row(_) => unreachable!("box sets only report bounds"),
                    }
                }
                Ok(v)
            }
            Kind::Halfspaces { a, .. } => {
                // Moreau: w = P_T(w) + P_N(w) with N the cone generated by active rows.
                let rows: Vec<Vec<f64>> = active.iter().map(|c| a[c.row()].clone()).collect();
                let sol = nnls(&rows, w);
                let mut v = w.to_vec();
                for (r, c) in rows.iter().zip(&sol.coef) {
                    for (vi, ri) in v.iter_mut().zip(r) {
                        *vi -= c * ri;
                    }
                }
                Ok(v)
            }
        }
    }

    /// Euclidean projection of a point onto a box set. Halfspace sets are not
    /// supported here.
    pub fn clamp(&self, z: &[f64]) -> Option<Vec<f64>> {
        let (lo, hi) = self.box_bounds()?;
        Some(z.iter().zip(lo.iter().zip(hi)).map(|(v, (l, u))| v.clamp(*l, *u)).collect())
    }

    /// Smallest axis-aligned box containing the set.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            Kind::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
            Kind::Halfspaces { .. } => {
                let mut lo = vec![0.0; self.dim];
                let mut hi = vec![0.0; self.dim];
                for i in 0..self.dim {
                    lo[i] = self.lp_extreme(Some(i), false)?.expect("set was checked nonempty");
                    hi[i] = self.lp_extreme(Some(i), true)?.expect("set was checked nonempty");
                }
                Ok((lo, hi))
            }
        }
    }

    pub fn diameter(&self) -> Result<f64> {
        let (lo, hi) = self.bounding_box()?;
        Ok(lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt())
    }

    /// Optimizes coordinate `coord` over the set (or just tests feasibility
    /// when `coord` is `None`). Returns `None` when the set is empty.
    fn lp_extreme(&self, coord: Option<usize>, maximize: bool) -> Result<Option<f64>> {
        use minilp::{ComparisonOp, OptimizationDirection, Problem};
        let Kind::Halfspaces { a, b } = &self.kind else {
            unreachable!("only halfspace sets need linear programs")
        };
        let dir = if maximize { OptimizationDirection::Maximize } else { OptimizationDirection::Minimize };
        let mut lp = Problem::new(dir);
        let vars: Vec<_> = (0..self.dim)
            .map(|j| lp.add_var(if Some(j) == coord { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        for (row, bi) in a.iter().zip(b) {
            let expr: Vec<_> = vars.iter().zip(row).map(|(v, c)| (*v, *c)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, *bi);
        }
        match lp.solve() {
            Ok(sol) => Ok(Some(sol.objective())),
            Err(minilp::Error::Infeasible) => Ok(None),
            Err(minilp::Error::Unbounded) => {
                Err(Error::Unbounded(format!("coordinate {} is unbounded", coord.unwrap_or(0))))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BoxJson {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SetJson {
    Box {
        #[serde(rename = "box")]
        bounds: BoxJson,
    },
    Halfspaces {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

impl Serialize for PolyhedralSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.kind {
            Kind::Box { lower, upper } => {
                SetJson::Box { bounds: BoxJson { lower: lower.clone(), upper: upper.clone() } }.serialize(s)
            }
            Kind::Halfspaces { a, b } => SetJson::Halfspaces { a: a.clone(), b: b.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PolyhedralSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SetJson::deserialize(d)?;
        let built = match raw {
            SetJson::Box { bounds } => PolyhedralSet::new_box(bounds.lower, bounds.upper),
            SetJson::Halfspaces { a, b } => PolyhedralSet::halfspaces(a, b),
        };
        built.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn unit_box() -> PolyhedralSet {
        PolyhedralSet::cube(1, -1.0, 1.0).unwrap()
    }

    #[test]
    fn box_active_sets() {
        let b = unit_box();
        assert_eq!(b.active_set(&[1.0], &tol()).unwrap(), vec![ActiveConstraint::Upper(0)]);
        assert!(b.active_set(&[0.0], &tol()).unwrap().is_empty());
        assert!(b.active_set(&[1.5], &tol()).is_err());
    }

    #[test]
    fn halfspace_active_set() {
        let h = PolyhedralSet::halfspaces(vec![vec![1.0, 1.0], vec![-1.0, 0.0]], vec![1.0, 0.0]).unwrap();
        assert_eq!(h.active_set(&[1.0, 0.0], &tol()).unwrap(), vec![ActiveConstraint::Row(0)]);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(PolyhedralSet::new_box(vec![1.0], vec![1.0]).is_err());
        assert!(PolyhedralSet::halfspaces(vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn box_tangent_cone_signs() {
        let b = unit_box();
        assert!(b.in_tangent_cone(&[1.0], &[-0.5], &tol()).unwrap());
        assert!(!b.in_tangent_cone(&[1.0], &[0.5], &tol()).unwrap());
        assert!(b.in_tangent_cone(&[0.3], &[0.0], &tol()).unwrap());
    }

    #[test]
    fn t_circle_examples() {
        let b2 = PolyhedralSet::cube(2, -1.0, 1.0).unwrap();
        assert!(b2.in_t_circle(&[1.0, 0.0], &[-1.0, 1.0], &tol()).unwrap());
        assert!(b2.in_t_circle_line_search(&[1.0, 0.0], &[-1.0, 1.0], &tol()).unwrap());
        let b = unit_box();
        assert!(!b.in_t_circle(&[1.0], &[1.0], &tol()).unwrap());
        assert!(!b.in_t_circle_line_search(&[1.0], &[1.0], &tol()).unwrap());
    }

    #[test]
    fn box_normal_cone_examples() {
        let b = unit_box();
        let fit = b.normal_cone(&[1.0], &[2.0], &tol()).unwrap();
        assert!(fit.member);
        assert_eq!(fit.multipliers, vec![0.0, 2.0]);
        assert!(!b.normal_cone(&[0.0], &[0.1], &tol()).unwrap().member);
        assert!(b.normal_cone(&[0.0], &[0.0], &tol()).unwrap().member);
    }

    #[test]
    fn halfspace_normal_cone_matches_box() {
        let h = PolyhedralSet::halfspaces(vec![vec![-1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let fit = h.normal_cone(&[1.0], &[2.0], &tol()).unwrap();
        assert!(fit.member);
        assert!((fit.multipliers[1] - 2.0).abs() < 1e-12);
        assert!(!h.normal_cone(&[1.0], &[-2.0], &tol()).unwrap().member);
    }

    #[test]
    fn bounding_box_of_triangle() {
        let h = PolyhedralSet::halfspaces(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 2.0],
        )
        .unwrap();
        let (lo, hi) = h.bounding_box().unwrap();
        assert!(lo.iter().all(|v| v.abs() < 1e-12));
        assert!(hi.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let open = PolyhedralSet::halfspaces(vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
        assert!(open.bounding_box().is_err());
    }

    #[test]
    fn json_round_trip() {
        let b: PolyhedralSet = serde_json::from_str(r#"{"box":{"lower":[-1],"upper":[1]}}"#).unwrap();
        assert_eq!(b, unit_box());
        let h: PolyhedralSet = serde_json::from_str(r#"{"A":[[1,1],[-1,0]],"b":[1,0]}"#).unwrap();
        assert_eq!(h.num_rows(), 2);
        let back: PolyhedralSet = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<PolyhedralSet>(r#"{"box":{"lower":[1],"upper":[0]}}"#).is_err());
    }
}
