//! Lattice grids over feasible sets, golden-section refinement, and grid
//! maximization with local refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PolyhedralSet, Tolerances};

/// Resolution of a lattice grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Nodes per coordinate (including both endpoints).
    pub nodes: usize,
    /// Final bracket width of the golden-section refinement.
    pub refine_width: f64,
    /// Upper bound on the number of lattice nodes.
    pub max_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nodes: 401, refine_width: 1e-10, max_nodes: 4_000_000 }
    }
}

impl GridSpec {
    pub fn with_nodes(nodes: usize) -> Self {
        Self { nodes, ..Self::default() }
    }

    /// Same spec with roughly twice the node density.
    pub fn doubled(&self) -> Self {
        Self { nodes: 2 * self.nodes - 1, ..*self }
    }
}

/// A rectangular lattice, possibly with infeasible nodes masked out.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: usize,
    /// Coordinates of every node in row-major multi-index order.
    pub points: Vec<Vec<f64>>,
    /// Whether each node lies in the set (and ball, if any).
    pub feasible: Vec<bool>,
}

impl Lattice {
    pub fn spacing(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if self.nodes > 1 { (u - l) / (self.nodes - 1) as f64 } else { 0.0 })
            .collect()
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.nodes + k)
    }

    fn multi_of(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            m[k] = idx % self.nodes;
            idx /= self.nodes;
        }
        m
    }

    /// Indices of axis neighbours of node `idx`.
    pub fn neighbours(&self, idx: usize) -> Vec<usize> {
        let multi = self.multi_of(idx);
        let mut out = Vec::with_capacity(2 * self.dim());
        for k in 0..self.dim() {
            if multi[k] > 0 {
                let mut m = multi.clone();
                m[k] -= 1;
                out.push(self.index_of(&m));
            }
            if multi[k] + 1 < self.nodes {
                let mut m = multi.clone();
                m[k] += 1;
                out.push(self.index_of(&m));
            }
        }
        out
    }
}

fn node_coord(lo: f64, hi: f64, nodes: usize, k: usize) -> f64 {
    if nodes <= 1 {
        0.5 * (lo + hi)
    } else if k + 1 == nodes {
        hi
    } else {
        lo + (hi - lo) * (k as f64) / ((nodes - 1) as f64)
    }
}

/// Lattice over `[lower, upper]` masked by `set` and optionally by a ball.
pub fn lattice(
    set: &PolyhedralSet,
    lower: &[f64],
    upper: &[f64],
    nodes: usize,
    ball: Option<(&[f64], f64)>,
    max_nodes: usize,
) -> Result<Lattice> {
    let dim = lower.len();
    let nodes = nodes.max(1);
    let total = (nodes as f64).powi(dim as i32);
    if total > max_nodes as f64 {
        return Err(Error::GridTooLarge(format!(
            "{nodes} nodes per coordinate in dimension {dim} exceeds the {max_nodes}-node budget"
        )));
    }
    let total = total as usize;
    let tol = Tolerances::default();
    let mut points = Vec::with_capacity(total);
    let mut feasible = Vec::with_capacity(total);
    let mut multi = vec![0usize; dim];
    for _ in 0..total {
        let p: Vec<f64> = (0..dim).map(|k| node_coord(lower[k], upper[k], nodes, multi[k])).collect();
        let in_ball = ball.is_none_or(|(c, r)| {
            p.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= r * (1.0 + 1e-12)
        });
        feasible.push(in_ball && set.contains(&p, &tol));
        points.push(p);
        for k in (0..dim).rev() {
            multi[k] += 1;
            if multi[k] < nodes {
                break;
            }
            multi[k] = 0;
        }
    }
    Ok(Lattice { lower: lower.to_vec(), upper: upper.to_vec(), nodes, points, feasible })
}

/// Lattice over the whole set.
pub fn set_lattice(set: &PolyhedralSet, grid: &GridSpec) -> Result<Lattice> {
    let (lo, hi) = set.bounding_box()?;
    lattice(set, &lo, &hi, grid.nodes, None, grid.max_nodes)
}

/// Lattice over `set ∩ B(center, radius)`.
pub fn ball_lattice(
    set: &PolyhedralSet,
    center: &[f64],
    radius: f64,
    nodes: usize,
    max_nodes: usize,
) -> Result<Lattice> {
    let (blo, bhi) = set.bounding_box()?;
    let lo: Vec<f64> = center.iter().zip(&blo).map(|(c, b)| (c - radius).max(*b)).collect();
    let hi: Vec<f64> = center.iter().zip(&bhi).map(|(c, b)| (c + radius).min(*b)).collect();
    lattice(set, &lo, &hi, nodes, Some((center, radius)), max_nodes)
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a) > width && iters < 200 {
        iters += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One pass of coordinatewise golden-section refinement inside the box
/// `start ± spacing`, clipped to `set`. Returns the improved point and value.
pub fn refine_max<F>(
    f: &F,
    set: &PolyhedralSet,
    start: &[f64],
    start_value: f64,
    spacing: &[f64],
    width: f64,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let tol = Tolerances::default();
    let (lo, hi) = match set.box_bounds() {
        Some((l, u)) => (l.to_vec(), u.to_vec()),
        None => (vec![f64::NEG_INFINITY; start.len()], vec![f64::INFINITY; start.len()]),
    };
    let mut best = start.to_vec();
    let mut best_val = start_value;
    for k in 0..start.len() {
        let a = (best[k] - spacing[k]).max(lo[k]);
        let b = (best[k] + spacing[k]).min(hi[k]);
        if b - a <= width {
            continue;
        }
        let mut probe = best.clone();
        let g = |t: f64| {
            probe[k] = t;
            if set.contains(&probe, &tol) {
                f(&probe)
            } else {
                f64::NEG_INFINITY
            }
        };
        let (t, v) = golden_max(g, a, b, width);
        if v > best_val {
            best[k] = t;
            best_val = v;
        }
    }
    (best, best_val)
}

/// A refined local maximizer found from a grid.
#[derive(Clone, Debug, Serialize)]
pub struct GridOptimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Maximizes `f` over the feasible nodes of `lat`, then refines the best
/// `keep` grid-local maxima. Results are sorted by decreasing value; the first
/// entry is never below the best grid value.
pub fn grid_maximize<F>(f: &F, set: &PolyhedralSet, lat: &Lattice, width: f64, keep: usize) -> Vec<GridOptimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = lat
        .points
        .par_iter()
        .zip(&lat.feasible)
        .map(|(p, ok)| if *ok { f(p) } else { f64::NEG_INFINITY })
        .collect();
    let mut peaks: Vec<usize> = (0..values.len())
        .filter(|&i| {
            lat.feasible[i] && values[i].is_finite() && lat.neighbours(i).iter().all(|&j| values[j] <= values[i])
        })
        .collect();
    if peaks.is_empty() {
        // Flat or non-finite landscape: fall back to the best feasible node.
        if let Some(best) = (0..values.len()).filter(|&i| lat.feasible[i]).max_by(|&a, &b| values[a].total_cmp(&values[b]))
        {
            peaks.push(best);
        }
    }
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks.truncate(keep.max(1));
    let spacing = lat.spacing();
    let mut out: Vec<GridOptimum> = peaks
        .par_iter()
        .map(|&i| {
            let (p, v) = refine_max(f, set, &lat.points[i], values[i], &spacing, width);
            GridOptimum { point: p, value: v }
        })
        .collect();
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    out
}

/// Minimization counterpart of [`grid_maximize`].
pub fn grid_minimize<F>(f: &F, set: &PolyhedralSet, lat: &Lattice, width: f64, keep: usize) -> Vec<GridOptimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let neg = |p: &[f64]| -f(p);
    grid_maximize(&neg, set, lat, width, keep)
        .into_iter()
        .map(|o| GridOptimum { point: o.point, value: -o.value })
        .collect()
}
