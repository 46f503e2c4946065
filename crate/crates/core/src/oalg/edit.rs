//! Levenshtein distance with a data-independent access pattern.
//!
//! Lengths are public; characters are secret. Each cell reads its three
//! neighbours and both characters, then writes one value, in an order fixed
//! by the lengths alone.

use crate::oprim::{o_equal, o_min};
use crate::trace::InstrumentedBuffer;

/// Storage for the DP table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DpLayout {
    /// Two rows of `len2 + 1` cells reused in turn.
    #[default]
    RollingRows,
    /// The whole `(len1 + 1) x (len2 + 1)` table, handy when debugging.
    FullMatrix,
}

impl DpLayout {
    fn rows(self, len1: usize) -> usize {
        match self {
            DpLayout::RollingRows => 2,
            DpLayout::FullMatrix => len1 + 1,
        }
    }
}

pub fn o_edit_distance(s1: &InstrumentedBuffer<u8>, s2: &InstrumentedBuffer<u8>) -> u64 {
    o_edit_distance_with(s1, s2, DpLayout::RollingRows)
}

pub fn o_edit_distance_with(
    s1: &InstrumentedBuffer<u8>,
    s2: &InstrumentedBuffer<u8>,
    layout: DpLayout,
) -> u64 {
    let (m, n) = (s1.len(), s2.len());
    let width = n + 1;
    let rows = layout.rows(m);
    let mut dp = InstrumentedBuffer::filled(rows * width, 0u64);
    let at = |i: usize, j: usize| (i % rows) * width + j;

    for j in 0..=n {
        dp.write(at(0, j), j as u64);
    }
    for i in 1..=m {
        let a = s1.read(i - 1) as u64;
        dp.write(at(i, 0), i as u64);
        for j in 1..=n {
            let b = s2.read(j - 1) as u64;
            let diag = dp.read(at(i - 1, j - 1));
            let up = dp.read(at(i - 1, j));
            let left = dp.read(at(i, j - 1));
            // Substitution is free exactly when the characters match.
            let subst = diag + (!o_equal(a, b)).bit();
            let cell = o_min(o_min(up + 1, left + 1), subst);
            dp.write(at(i, j), cell);
        }
    }
    dp.read(at(m, n))
}

/// Branching twin used as a baseline.
pub fn edit_distance_plain(s1: &[u8], s2: &[u8]) -> u64 {
    let n = s2.len();
    let mut prev: Vec<u64> = (0..=n as u64).collect();
    let mut cur = vec![0u64; n + 1];
    for (i, &a) in s1.iter().enumerate() {
        cur[0] = i as u64 + 1;
        for (j, &b) in s2.iter().enumerate() {
            cur[j + 1] = if a == b {
                prev[j]
            } else {
                1 + prev[j].min(prev[j + 1]).min(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}
