//! Deterministic pairwise reductions.
//!
//! The reduction tree depends only on the item count, never on the number of
//! worker threads, so results are bit-identical across runs and machines.

const LEAF: usize = 32;
const PAR_MIN: usize = 512;

/// Sums `dim`-vectors produced by `leaf` over `0..count`.
///
/// `leaf(range, acc)` must add the contributions of the items in `range` into
/// `acc` (which starts zeroed) sequentially.
pub fn pairwise_reduce<F>(count: usize, dim: usize, leaf: &F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; dim];
    reduce_into(0, count, leaf, &mut out);
    out
}

fn reduce_into<F>(lo: usize, hi: usize, leaf: &F, out: &mut [f64])
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let len = hi - lo;
    if len <= LEAF {
        leaf(lo..hi, out);
        return;
    }
    let mid = lo + split_point(len);
    let mut right = vec![0.0; out.len()];
    if len >= PAR_MIN {
        rayon::join(
            || reduce_into(lo, mid, leaf, out),
            || reduce_into(mid, hi, leaf, &mut right),
        );
    } else {
        reduce_into(lo, mid, leaf, out);
        reduce_into(mid, hi, leaf, &mut right);
    }
    for (a, b) in out.iter_mut().zip(&right) {
        *a += b;
    }
}

/// Left part of a split: the largest multiple of `LEAF` not exceeding half.
fn split_point(len: usize) -> usize {
    let half = len / 2;
    let aligned = (half / LEAF) * LEAF;
    if aligned == 0 {
        half
    } else {
        aligned
    }
}

#[cfg(test)]
/// Pairwise sum of a slice of scalars.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_reduce(values.len(), 1, &|r: std::ops::Range<usize>, acc: &mut [f64]| {
        for v in &values[r] {
            acc[0] += v;
        }
    })[0]
}
