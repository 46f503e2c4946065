//! All-pairs shortest paths over a dense matrix.

use crate::oprim::o_min;
use crate::trace::InstrumentedBuffer;

/// Distance for "no path". Sums of two entries never wrap.
pub const INF: u64 = 1 << 62;

/// `a + b` capped at [`INF`].
#[inline]
pub fn sat_add(a: u64, b: u64) -> u64 {
    o_min(o_min(a, INF) + o_min(b, INF), INF)
}

/// Row-major `n x n` distance matrix.
#[derive(Debug)]
pub struct DistMatrix {
    n: usize,
    cells: InstrumentedBuffer<u64>,
}

impl DistMatrix {
    /// Zero diagonal, `INF` everywhere else.
    pub fn new(n: usize) -> Self {
        let mut cells = vec![INF; n * n];
        for i in 0..n {
            cells[i * n + i] = 0;
        }
        Self {
            n,
            cells: InstrumentedBuffer::new(cells),
        }
    }

    /// Builds a matrix from `n * n` row-major entries, capping at `INF` and
    /// forcing the diagonal to zero.
    pub fn from_entries(n: usize, entries: &[u64]) -> Self {
        assert_eq!(entries.len(), n * n, "expected {} entries", n * n);
        let mut m = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.set_untraced(i, j, entries[i * n + j]);
                }
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Keeps the lighter of parallel edges. Setup only, not traced.
    pub fn add_edge(&mut self, u: usize, v: usize, w: u64) {
        if u == v {
            return;
        }
        let cur = self.get(u, v);
        self.set_untraced(u, v, cur.min(w));
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.cells.as_slice()[i * self.n + j]
    }

    fn set_untraced(&mut self, i: usize, j: usize, w: u64) {
        let n = self.n;
        self.cells.as_mut_slice_untraced()[i * n + j] = w.min(INF);
    }

    pub fn entries(&self) -> &[u64] {
        self.cells.as_slice()
    }

    pub fn set_recording(&mut self, on: bool) {
        self.cells.set_recording(on);
    }
}

/// Relaxes every cell through every intermediate node. Each of the `n^3`
/// steps reads `m[i][k]`, `m[k][j]` and `m[i][j]` and writes `m[i][j]` back.
pub fn o_floyd_warshall(m: &mut DistMatrix) {
    let n = m.n;
    let cells = &mut m.cells;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let ik = cells.read(i * n + k);
                let kj = cells.read(k * n + j);
                let ij = cells.read(i * n + j);
                cells.write(i * n + j, o_min(ij, sat_add(ik, kj)));
            }
        }
    }
}

/// Branching twin on a plain row-major slice.
pub fn floyd_warshall_plain(n: usize, d: &mut [u64]) {
    assert_eq!(d.len(), n * n);
    for k in 0..n {
        for i in 0..n {
            let ik = d[i * n + k];
            if ik >= INF {
                continue;
            }
            for j in 0..n {
                let via = ik + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
}
