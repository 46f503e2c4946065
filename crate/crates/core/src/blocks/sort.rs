//! Sorting a whole block store.

use super::block::{Block, BlockRecord};
use super::merge::{merge_split, sort_block, MergeScratch};
use super::store::BlockStore;
use super::BlockError;
use crate::oalg::for_each_comparator;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlockSortStats {
    /// Merge-splits executed by the block-level network.
    pub block_comparators: u64,
    /// Record compare-exchanges, including the per-block presort.
    pub record_comparators: u64,
}

/// Sorts all records of `store` ascending by key.
///
/// When `presort` is set each block is first sorted in place; otherwise
/// every block must already be internally sorted. The block count is padded
/// to a power of two with empty blocks for the duration of the sort. On
/// return the records fill the leading blocks completely, in order.
pub fn block_bitonic_sort<R: BlockRecord>(
    store: &mut BlockStore,
    presort: bool,
) -> Result<BlockSortStats, BlockError> {
    let n = store.len();
    let mut stats = BlockSortStats::default();
    let mut scratch = MergeScratch::<R>::new();

    if presort {
        for i in 0..n {
            let mut b = store.read_block(i)?;
            stats.record_comparators += sort_block(&mut b, &mut scratch);
            store.write_block(i, &b)?;
        }
    }
    if n < 2 {
        return Ok(stats);
    }

    let padded = n.next_power_of_two();
    if padded > n {
        store.resize(padded)?;
        let empty = Block::empty::<R>();
        for i in n..padded {
            store.write_block(i, &empty)?;
        }
    }

    let mut failed = None;
    for_each_comparator(padded, |lo, hi| {
        if failed.is_some() {
            return;
        }
        let mut step = || -> Result<u64, BlockError> {
            let mut a = store.read_block(lo)?;
            let mut b = store.read_block(hi)?;
            let c = merge_split(&mut a, &mut b, true, &mut scratch);
            store.write_block(lo, &a)?;
            store.write_block(hi, &b)?;
            Ok(c)
        };
        match step() {
            Ok(c) => {
                stats.block_comparators += 1;
                stats.record_comparators += c;
            }
            Err(e) => failed = Some(e),
        }
    });
    if let Some(e) = failed {
        return Err(e);
    }

    store.resize(n)?;
    Ok(stats)
}

/// Unprotected baseline: sorts each block, then merges runs pairwise until
/// one run remains. Output layout matches [`block_bitonic_sort`].
pub fn external_sort_plain<R: BlockRecord>(store: &mut BlockStore) -> Result<(), BlockError> {
    let n = store.len();
    for i in 0..n {
        let b = store.read_block(i)?;
        let mut recs = b.records::<R>();
        recs.sort_unstable_by_key(R::order_key);
        store.write_block(i, &Block::from_records(&recs))?;
    }
    if n < 2 {
        return Ok(());
    }

    let mut other = BlockStore::scratch(n)?;
    let mut in_store = false;
    let mut width = 1;
    while width < n {
        {
            let (src, dst): (&BlockStore, &mut BlockStore) = if in_store {
                (&other, &mut *store)
            } else {
                (&*store, &mut other)
            };
            let mut start = 0;
            while start < n {
                let mid = (start + width).min(n);
                let end = (start + 2 * width).min(n);
                merge_runs::<R>(src, dst, start, mid, end)?;
                start = end;
            }
        }
        in_store = !in_store;
        width *= 2;
    }
    if in_store {
        for i in 0..n {
            let b = other.read_block(i)?;
            store.write_block(i, &b)?;
        }
    }
    Ok(())
}

/// Streams one record at a time out of a run of blocks.
struct RunReader<'a, R> {
    src: &'a BlockStore,
    next_block: usize,
    end: usize,
    buf: Vec<R>,
    pos: usize,
}

impl<'a, R: BlockRecord> RunReader<'a, R> {
    fn new(src: &'a BlockStore, start: usize, end: usize) -> Self {
        Self {
            src,
            next_block: start,
            end,
            buf: Vec::new(),
            pos: 0,
        }
    }

    fn peek(&mut self) -> Result<Option<R>, BlockError> {
        while self.pos == self.buf.len() {
            if self.next_block == self.end {
                return Ok(None);
            }
            self.buf = self.src.read_block(self.next_block)?.records();
            self.next_block += 1;
            self.pos = 0;
        }
        Ok(Some(self.buf[self.pos]))
    }

    fn advance(&mut self) {
        self.pos += 1;
    }
}

fn merge_runs<R: BlockRecord>(
    src: &BlockStore,
    dst: &mut BlockStore,
    start: usize,
    mid: usize,
    end: usize,
) -> Result<(), BlockError> {
    let mut left = RunReader::<R>::new(src, start, mid);
    let mut right = RunReader::<R>::new(src, mid, end);
    let mut out = Vec::with_capacity(R::PER_BLOCK);
    let mut next_out = start;
    loop {
        let pick = match (left.peek()?, right.peek()?) {
            (None, None) => break,
            (Some(a), None) => (a, true),
            (None, Some(b)) => (b, false),
            (Some(a), Some(b)) => {
                if b.order_key() < a.order_key() {
                    (b, false)
                } else {
                    (a, true)
                }
            }
        };
        if pick.1 {
            left.advance();
        } else {
            right.advance();
        }
        out.push(pick.0);
        if out.len() == R::PER_BLOCK {
            dst.write_block(next_out, &Block::from_records(&out))?;
            next_out += 1;
            out.clear();
        }
    }
    if !out.is_empty() {
        dst.write_block(next_out, &Block::from_records(&out))?;
        next_out += 1;
    }
    let empty = Block::empty::<R>();
    for i in next_out..end {
        dst.write_block(i, &empty)?;
    }
    Ok(())
}
