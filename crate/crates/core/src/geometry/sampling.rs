//! Seeded direction sampling inside tangent cones and their Γ subcones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{PolyhedralSet, Tolerances};
use crate::error::{check_dim, Result};
use crate::vecops::{dot, norm, normalize, unit};

/// Which cone to sample.
#[derive(Clone, Debug)]
pub enum ConeMode {
    Tangent,
    TCircle,
    /// Tangent directions orthogonal to every listed vector.
    Gamma(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GammaSide {
    /// Tangent directions of the minimizing block orthogonal to its gradient.
    Gamma1,
    /// Tangent directions of the maximizing block orthogonal to its gradient.
    Gamma2,
}

/// `{v ∈ T(base) : v ⊥ gradient}` with a relative orthogonality tolerance.
#[derive(Clone, Debug)]
pub struct GammaCone {
    pub side: GammaSide,
    pub base: Vec<f64>,
    pub gradient: Vec<f64>,
    pub tol_orth: f64,
}

impl GammaCone {
    pub fn contains(&self, set: &PolyhedralSet, v: &[f64], tol: &Tolerances) -> Result<bool> {
        Ok(set.in_tangent_cone(&self.base, v, tol)? && orthogonal(v, &self.gradient, self.tol_orth))
    }
}

pub(crate) fn orthogonal(v: &[f64], g: &[f64], tol_orth: f64) -> bool {
    dot(v, g).abs() <= tol_orth * (1.0 + norm(v) * norm(g))
}

/// Orthonormal basis of the span of the non-negligible vectors in `vs`.
fn orthonormal_basis(vs: &[Vec<f64>], tol_orth: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for g in vs {
        let gn = norm(g);
        if gn <= tol_orth {
            continue;
        }
        let mut r = g.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&r, q);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        if norm(&r) > 1e-10 * gn && normalize(&mut r, 0.0) {
            basis.push(r);
        }
    }
    basis
}

struct Projector<'a> {
    set: &'a PolyhedralSet,
    z: &'a [f64],
    tol: &'a Tolerances,
    basis: Vec<Vec<f64>>,
    constraints: Vec<Vec<f64>>,
}

impl Projector<'_> {
    fn remove_span(&self, v: &mut [f64]) {
        for q in &self.basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
        }
    }

    /// Alternating projections onto the cone and the orthogonal complement.
    fn project(&self, w: &[f64]) -> Result<Option<Vec<f64>>> {
        let start = norm(w);
        let mut v = self.set.project_tangent(self.z, w, self.tol)?;
        if !self.basis.is_empty() {
            for _ in 0..200 {
                self.remove_span(&mut v);
                v = self.set.project_tangent(self.z, &v, self.tol)?;
                let nv = norm(&v);
                if nv <= 1e-9 * start {
                    break;
                }
                if self.basis.iter().all(|q| dot(&v, q).abs() <= 1e-14 * nv) {
                    break;
                }
            }
        }
        if !normalize(&mut v, 1e-9 * start.max(1e-300)) {
            return Ok(None);
        }
        let ok = self.set.in_tangent_cone(self.z, &v, self.tol)?
            && self.constraints.iter().all(|g| orthogonal(&v, g, self.tol.orth));
        Ok(ok.then_some(v))
    }
}

/// Deterministic unit directions in the requested cone.
///
/// The projected coordinate rays come first (for a box these are exactly the
/// admissible `±eᵢ`), followed by projected Gaussian draws until the list
/// holds `max(count, rays)` entries. Returns an empty list when the cone is
/// `{0}`.
pub fn sample_cone_directions(
    set: &PolyhedralSet,
    z: &[f64],
    count: usize,
    seed: u64,
    mode: &ConeMode,
    tol: &Tolerances,
) -> Result<Vec<Vec<f64>>> {
    let n = set.dim();
    check_dim(n, z.len())?;
    let constraints: Vec<Vec<f64>> = match mode {
        ConeMode::Tangent | ConeMode::TCircle => vec![],
        ConeMode::Gamma(gs) => {
            for g in gs {
                check_dim(n, g.len())?;
            }
            gs.iter().filter(|g| norm(g) > tol.orth).cloned().collect()
        }
    };
    let proj = Projector { set, z, tol, basis: orthonormal_basis(&constraints, tol.orth), constraints };

    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            if let Some(v) = proj.project(&unit(n, i, sign))? {
                if !out.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12)) {
                    out.push(v);
                }
            }
        }
    }
    let target = count.max(out.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 50 * count.max(1) + 100;
    let mut attempts = 0;
    while out.len() < target && attempts < max_attempts {
        attempts += 1;
        let w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Some(v) = proj.project(&w)? {
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn interior_box_spans_both_axes() {
        let b = PolyhedralSet::cube(1, -1.0, 1.0).unwrap();
        let dirs = sample_cone_directions(&b, &[0.0], 4, 1, &ConeMode::Tangent, &tol()).unwrap();
        assert_eq!(dirs.len(), 4);
        assert!(dirs.iter().any(|v| v[0] == 1.0));
        assert!(dirs.iter().any(|v| v[0] == -1.0));
    }

    #[test]
    fn upper_bound_directions_point_inward() {
        let b = PolyhedralSet::cube(3, -1.0, 1.0).unwrap();
        let z = [1.0, 0.0, -1.0];
        let dirs = sample_cone_directions(&b, &z, 64, 2, &ConeMode::Tangent, &tol()).unwrap();
        assert!(dirs.len() >= 64);
        for v in &dirs {
            assert!(v[0] <= 0.0 && v[2] >= 0.0);
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_mode_is_orthogonal() {
        let b = PolyhedralSet::cube(3, -1.0, 1.0).unwrap();
        let g = vec![1.0, 0.0, 0.0];
        let dirs = sample_cone_directions(&b, &[0.0; 3], 32, 3, &ConeMode::Gamma(vec![g]), &tol()).unwrap();
        assert!(!dirs.is_empty());
        assert!(dirs.iter().all(|v| v[0].abs() <= 1e-8));
    }

    #[test]
    fn empty_gamma_cone() {
        let b = PolyhedralSet::cube(1, -1.0, 1.0).unwrap();
        let dirs = sample_cone_directions(&b, &[1.0], 8, 4, &ConeMode::Gamma(vec![vec![1.0]]), &tol()).unwrap();
        assert!(dirs.is_empty());
    }

    #[test]
    fn halfspace_directions_stay_in_cone() {
        let h = PolyhedralSet::halfspaces(vec![vec![1.0, 1.0], vec![-1.0, 0.0]], vec![1.0, 0.0]).unwrap();
        let z = [0.0, 1.0];
        let dirs = sample_cone_directions(&h, &z, 64, 5, &ConeMode::Tangent, &tol()).unwrap();
        assert!(dirs.len() >= 64);
        for v in &dirs {
            assert!(h.in_tangent_cone(&z, v, &tol()).unwrap());
        }
    }
}
