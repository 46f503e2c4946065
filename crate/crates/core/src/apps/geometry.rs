//! Fixed-point distances and nearest-centroid search.

use crate::blocks::Point;
use crate::oprim::{o_greater, o_less, o_select};
use crate::trace::InstrumentedBuffer;

/// `|a - b|` without branching.
#[inline]
fn abs_diff(a: u64, b: u64) -> u64 {
    o_select(o_greater(a, b), a.wrapping_sub(b), b.wrapping_sub(a))
}

/// Squared distance in 16.16 fixed point: each squared coordinate delta is
/// rescaled before the two are added, so the sum never overflows.
#[inline]
pub fn squared_distance(a: Point, b: Point) -> u64 {
    let dx = abs_diff(u64::from(a.x()), u64::from(b.x()));
    let dy = abs_diff(u64::from(a.y()), u64::from(b.y()));
    ((dx * dx) >> 16) + ((dy * dy) >> 16)
}

/// Index of the closest centroid, lowest index on ties. Reads every
/// centroid exactly once.
///
/// # Panics
///
/// If `centroids` is empty.
pub fn find_nearest_centroid(p: Point, centroids: &InstrumentedBuffer<Point>) -> u64 {
    assert!(!centroids.is_empty(), "need at least one centroid");
    let mut best = 0u64;
    let mut best_d = squared_distance(p, centroids.read(0));
    for i in 1..centroids.len() {
        let d = squared_distance(p, centroids.read(i));
        let closer = o_less(d, best_d);
        best = o_select(closer, i as u64, best);
        best_d = o_select(closer, d, best_d);
    }
    best
}

/// Branching argmin, same tie rule.
pub fn nearest_centroid_plain(p: Point, centroids: &[Point]) -> u64 {
    let mut best = 0;
    let mut best_d = u64::MAX;
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, *c);
        if d < best_d {
            best = i as u64;
            best_d = d;
        }
    }
    best
}
