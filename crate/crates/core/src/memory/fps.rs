//! Farthest-point sampling over 3D points.
//!
//! Greedy max-min selection: starting from a seed index, repeatedly pick the
//! point whose squared distance to the nearest already-selected point is
//! largest, preferring the lowest index on ties. Output is in selection
//! order, and already-selected points are never picked again (their
//! distances are parked at a negative sentinel).
//!
//! The parallel variant reduces the argmax with an associative
//! (distance, index) maximum and updates nearest-distances elementwise, both
//! of which are bit-identical to the sequential scan — the two paths agree
//! exactly, not just approximately.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::scene::Vec3;

/// Below this many points the parallel path would mostly pay threading
/// overhead, so the dispatcher stays sequential.
const PARALLEL_THRESHOLD: usize = 2048;

/// Distance value that marks an index as already selected.
const TAKEN: f64 = -1.0;

fn argmax(dists: &[f64]) -> usize {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, &d) in dists.iter().enumerate() {
        if d > best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Selects `k` indices sequentially. `start` seeds the selection.
///
/// # Panics
/// If `k > points.len()` or `start >= points.len()` (with `k > 0`).
#[must_use]
pub fn fps_seq(points: &[Vec3], k: usize, start: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    assert!(
        k <= points.len(),
        "cannot select {k} of {} points",
        points.len()
    );
    assert!(start < points.len(), "start index {start} out of range");
    let mut selected = Vec::with_capacity(k);
    let mut dists: Vec<f64> = points.iter().map(|p| p.dist2(points[start])).collect();
    dists[start] = TAKEN;
    selected.push(start);
    while selected.len() < k {
        let next = argmax(&dists);
        dists[next] = TAKEN;
        for (i, d) in dists.iter_mut().enumerate() {
            if *d != TAKEN {
                let nd = points[i].dist2(points[next]);
                if nd < *d {
                    *d = nd;
                }
            }
        }
        selected.push(next);
    }
    selected
}

/// Parallel twin of [`fps_seq`]; returns exactly the same indices.
#[cfg(feature = "parallel")]
#[must_use]
pub fn fps_par(points: &[Vec3], k: usize, start: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    assert!(
        k <= points.len(),
        "cannot select {k} of {} points",
        points.len()
    );
    assert!(start < points.len(), "start index {start} out of range");
    let mut selected = Vec::with_capacity(k);
    let mut dists: Vec<f64> = points.par_iter().map(|p| p.dist2(points[start])).collect();
    dists[start] = TAKEN;
    selected.push(start);
    while selected.len() < k {
        // (distance, index) maximum with lowest-index ties is associative,
        // so any reduction tree lands on the sequential answer.
        let next = dists
            .par_iter()
            .enumerate()
            .map(|(i, &d)| (d, i))
            .reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| {
                    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            )
            .1;
        dists[next] = TAKEN;
        let anchor = points[next];
        dists.par_iter_mut().enumerate().for_each(|(i, d)| {
            if *d != TAKEN {
                let nd = points[i].dist2(anchor);
                if nd < *d {
                    *d = nd;
                }
            }
        });
        selected.push(next);
    }
    selected
}

/// Selects `k` of `points` by farthest-point sampling, dispatching to the
/// parallel path for large inputs when it is compiled in.
#[must_use]
pub fn fps(points: &[Vec3], k: usize, start: usize) -> Vec<usize> {
    #[cfg(feature = "parallel")]
    if points.len() >= PARALLEL_THRESHOLD {
        return fps_par(points, k, start);
    }
    fps_seq(points, k, start)
}
