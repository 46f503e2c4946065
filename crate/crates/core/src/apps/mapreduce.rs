//! A small oblivious map-reduce over block stores.
//!
//! Each input block is mapped to a fixed number of records (sentinels stand
//! in for "nothing"), so the intermediate store size depends only on the
//! input block count. The pipeline is then: block sort, one linear sweep
//! that folds runs of equal keys, and a second block sort that moves the
//! sentinels left by the sweep to the end. Only the final record count is
//! revealed.

use super::AppError;
use crate::blocks::{block_bitonic_sort, Block, BlockRecord, BlockSortStats, BlockStore};

pub trait Mapper {
    type Out: BlockRecord;

    /// Records emitted per input block. Must not depend on block contents.
    fn emissions_per_block(&self) -> usize;

    /// Appends exactly [`emissions_per_block`](Self::emissions_per_block)
    /// records for `input` to `out`.
    fn map_block(&mut self, input: &Block, out: &mut Vec<Self::Out>);
}

pub trait Reducer<R> {
    /// Folds `next` into `acc`. Called only for equal keys; must be
    /// associative and keep the key.
    fn combine(&self, acc: &R, next: &R) -> R;
}

impl<R, F: Fn(&R, &R) -> R> Reducer<R> for F {
    fn combine(&self, acc: &R, next: &R) -> R {
        self(acc, next)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrConfig {
    /// Upper bound on intermediate blocks.
    pub max_intermediate_blocks: usize,
}

impl Default for MrConfig {
    fn default() -> Self {
        Self {
            max_intermediate_blocks: 1 << 20,
        }
    }
}

#[derive(Debug)]
pub struct MrOutput {
    /// Reduced records, sorted by key and packed from the first block.
    pub store: BlockStore,
    /// Published number of output records.
    pub records: u64,
    pub intermediate_blocks: usize,
    /// Both sorts combined.
    pub sort: BlockSortStats,
}

/// Writes a stream of records into consecutive blocks of a store. The
/// position of every write depends only on how many records were pushed.
pub struct RecordWriter<R: BlockRecord> {
    store: BlockStore,
    block: Block,
    fill: usize,
    next: usize,
    _r: std::marker::PhantomData<R>,
}

impl<R: BlockRecord> RecordWriter<R> {
    /// A writer over a scratch store sized for `records` records.
    pub fn with_capacity(records: usize) -> Result<Self, AppError> {
        Ok(Self {
            store: BlockStore::scratch(records.div_ceil(R::PER_BLOCK))?,
            block: Block::empty::<R>(),
            fill: 0,
            next: 0,
            _r: std::marker::PhantomData,
        })
    }

    pub fn push(&mut self, r: &R) -> Result<(), AppError> {
        self.block.set(self.fill, r);
        self.fill += 1;
        if self.fill == R::PER_BLOCK {
            self.emit()?;
        }
        Ok(())
    }

    fn emit(&mut self) -> Result<(), AppError> {
        self.block.recount::<R>();
        self.store.write_block(self.next, &self.block)?;
        self.next += 1;
        self.block = Block::empty::<R>();
        self.fill = 0;
        Ok(())
    }

    pub fn finish(mut self) -> Result<BlockStore, AppError> {
        if self.fill > 0 {
            self.emit()?;
        }
        Ok(self.store)
    }
}

/// Runs `map` over every input block, collecting exactly `per_block`
/// records per block into a fresh store.
pub fn map_phase<R, F>(
    input: &BlockStore,
    per_block: usize,
    cfg: &MrConfig,
    mut map: F,
) -> Result<BlockStore, AppError>
where
    R: BlockRecord,
    F: FnMut(&Block, &mut Vec<R>),
{
    let total = input.len() * per_block;
    let blocks = total.div_ceil(R::PER_BLOCK);
    if blocks > cfg.max_intermediate_blocks {
        return Err(AppError::Capacity {
            needed: blocks,
            limit: cfg.max_intermediate_blocks,
        });
    }
    let mut w = RecordWriter::<R>::with_capacity(total)?;
    let mut out = Vec::with_capacity(per_block);
    for i in 0..input.len() {
        let b = input.read_block(i)?;
        out.clear();
        map(&b, &mut out);
        if out.len() != per_block {
            return Err(AppError::Contract {
                expected: per_block,
                got: out.len(),
            });
        }
        for r in &out {
            w.push(r)?;
        }
    }
    w.finish()
}

/// One pass over every slot of a key-sorted store. Each run of equal keys
/// is folded with `reducer` and emitted once, at the position of its last
/// record; every other position emits a sentinel. The output has the same
/// number of slots as the input.
pub fn reduce_sweep<R, Rd>(sorted: &BlockStore, reducer: &Rd) -> Result<BlockStore, AppError>
where
    R: BlockRecord,
    Rd: Reducer<R> + ?Sized,
{
    let slots = sorted.len() * R::PER_BLOCK;
    let mut w = RecordWriter::<R>::with_capacity(slots)?;
    let sentinel = R::sentinel();
    let mut acc: Option<R> = None;
    for i in 0..sorted.len() {
        let b = sorted.read_block(i)?;
        for s in 0..R::PER_BLOCK {
            let r = b.get::<R>(s);
            // Only the very first slot is special, and that is public.
            let Some(a) = acc else {
                acc = Some(r);
                continue;
            };
            let same = a.ct_key_eq(&r);
            let done = R::cond_select(same, &sentinel, &a);
            w.push(&R::cond_select(done.is_sentinel(), &sentinel, &done))?;
            acc = Some(R::cond_select(same, &reducer.combine(&a, &r), &r));
        }
    }
    if let Some(a) = acc {
        w.push(&R::cond_select(a.is_sentinel(), &sentinel, &a))?;
    }
    w.finish()
}

/// Sorts the reduced store, publishes the record count and trims trailing
/// empty blocks.
pub fn compact_output<R: BlockRecord>(
    mut store: BlockStore,
) -> Result<(BlockStore, u64, BlockSortStats), AppError> {
    let st = block_bitonic_sort::<R>(&mut store, true)?;
    let mut records = 0;
    for i in 0..store.len() {
        records += store.read_block(i)?.record_count();
    }
    store.resize((records as usize).div_ceil(R::PER_BLOCK))?;
    Ok((store, records, st))
}

pub fn mr_run<M, Rd>(
    input: &BlockStore,
    mapper: &mut M,
    reducer: &Rd,
    cfg: &MrConfig,
) -> Result<MrOutput, AppError>
where
    M: Mapper,
    Rd: Reducer<M::Out>,
{
    let per_block = mapper.emissions_per_block();
    let mut inter = map_phase(input, per_block, cfg, |b, out| mapper.map_block(b, out))?;
    let intermediate_blocks = inter.len();
    let first = block_bitonic_sort::<M::Out>(&mut inter, true)?;
    let reduced = reduce_sweep(&inter, reducer)?;
    drop(inter);
    let (store, records, second) = compact_output::<M::Out>(reduced)?;
    Ok(MrOutput {
        store,
        records,
        intermediate_blocks,
        sort: BlockSortStats {
            block_comparators: first.block_comparators + second.block_comparators,
            record_comparators: first.record_comparators + second.record_comparators,
        },
    })
}
