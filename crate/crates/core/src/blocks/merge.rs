//! In-block sorting and the block-level comparator.

use super::block::{Block, BlockRecord};
use crate::oalg::sort::compare_exchange;
use crate::oalg::{for_each_comparator, Sortable};
use crate::trace::InstrumentedBuffer;

fn gt<R: Sortable>(a: &R, b: &R) -> crate::oprim::Mask {
    a.ct_gt(b)
}

/// Working memory reused across merge-splits so that a sort allocates (and
/// registers trace regions) once.
#[derive(Debug)]
pub struct MergeScratch<R> {
    pair: InstrumentedBuffer<R>,
    single: InstrumentedBuffer<R>,
}

impl<R: BlockRecord> Default for MergeScratch<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: BlockRecord> MergeScratch<R> {
    pub fn new() -> Self {
        Self {
            pair: InstrumentedBuffer::filled(pair_width::<R>(), R::sentinel()),
            single: InstrumentedBuffer::filled(R::PER_BLOCK.next_power_of_two(), R::sentinel()),
        }
    }

    pub fn set_recording(&mut self, on: bool) {
        self.pair.set_recording(on);
        self.single.set_recording(on);
    }
}

fn pair_width<R: BlockRecord>() -> usize {
    (2 * R::PER_BLOCK).next_power_of_two()
}

/// Compare-exchanges performed by one [`merge_split`].
pub fn merge_split_comparators<R: BlockRecord>() -> u64 {
    let w = pair_width::<R>();
    (w / 2 * w.trailing_zeros() as usize) as u64
}

/// Compare-exchanges performed by one [`sort_block`].
pub fn sort_block_comparators<R: BlockRecord>() -> u64 {
    crate::oalg::comparator_count(R::PER_BLOCK)
}

/// Sorts every slot of `b` ascending (sentinels last) and recounts it.
pub fn sort_block<R: BlockRecord>(b: &mut Block, scratch: &mut MergeScratch<R>) -> u64 {
    let p = R::PER_BLOCK;
    let buf = &mut scratch.single;
    for i in 0..p {
        buf.write(i, b.get::<R>(i));
    }
    for i in p..buf.len() {
        buf.write(i, R::sentinel());
    }
    let mut n = 0;
    for_each_comparator(buf.len(), |lo, hi| {
        compare_exchange(buf, lo, hi, &gt::<R>);
        n += 1;
    });
    for i in 0..p {
        b.set(i, &buf.read(i));
    }
    b.recount::<R>();
    n
}

/// Redistributes two internally sorted blocks so that one holds the
/// `PER_BLOCK` smallest records and the other the largest. With `ascending`
/// the small half lands in `a`; otherwise in `b`. Both outputs stay sorted
/// ascending. The work is a fixed half-cleaner cascade over `a`, padding and
/// reversed `b`, which together form a bitonic sequence.
pub fn merge_split<R: BlockRecord>(
    a: &mut Block,
    b: &mut Block,
    ascending: bool,
    scratch: &mut MergeScratch<R>,
) -> u64 {
    let p = R::PER_BLOCK;
    let buf = &mut scratch.pair;
    let w = buf.len();
    for i in 0..p {
        buf.write(i, a.get::<R>(i));
    }
    for i in p..w - p {
        buf.write(i, R::sentinel());
    }
    for i in 0..p {
        buf.write(w - 1 - i, b.get::<R>(i));
    }

    let mut n = 0;
    let mut stride = w / 2;
    while stride > 0 {
        for lo in 0..w {
            if lo & stride == 0 {
                compare_exchange(buf, lo, lo + stride, &gt::<R>);
                n += 1;
            }
        }
        stride /= 2;
    }

    let (low, high) = if ascending { (a, b) } else { (b, a) };
    for i in 0..p {
        low.set(i, &buf.read(i));
        high.set(i, &buf.read(p + i));
    }
    low.recount::<R>();
    high.recount::<R>();
    n
}
