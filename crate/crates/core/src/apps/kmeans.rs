//! Lloyd's algorithm over blocks of fixed-point points.
//!
//! All variants assign points with [`find_nearest_centroid`] and run a fixed
//! number of iterations; they differ only in how per-cluster sums are
//! accumulated. Integer arithmetic makes their results bit-identical.

use std::io::{Read, Write};
use std::path::Path;

use super::geometry::find_nearest_centroid;
use super::mapreduce::{mr_run, Mapper, MrConfig};
use super::AppError;
use crate::blocks::{
    AggRecord, Block, BlockRecord, BlockStore, BufferConfig, BufferManager, BufferStats, Point,
    DEFAULT_CACHE_BLOCKS,
};
use crate::oalg::Sortable;
use crate::oprim::{o_array_update, o_equal, o_is_zero, o_less, o_select, CondSelect};
use crate::trace::InstrumentedBuffer;

pub const DEFAULT_ITERATIONS: usize = 10;
pub const CENTROID_RECORD_BYTES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KMeansImpl {
    Unprotected,
    ManualCmov,
    OramHash,
    Framework,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub iterations: usize,
    /// Cache size for the ORAM-backed variant.
    pub cache_blocks: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            iterations: DEFAULT_ITERATIONS,
            cache_blocks: DEFAULT_CACHE_BLOCKS,
            seed: 0,
        }
    }

    pub fn iterations(mut self, n: usize) -> Self {
        self.iterations = n;
        self
    }

    pub fn cache_blocks(mut self, m: usize) -> Self {
        self.cache_blocks = m;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Centroid {
    pub index: u64,
    pub mean: Point,
    /// Sums and count from the last assignment step.
    pub sum_x: u64,
    pub sum_y: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KMeansResult {
    pub centroids: Vec<Centroid>,
    /// Cache statistics summed over iterations, ORAM-backed variant only.
    pub buffer_stats: Option<BufferStats>,
}

/// The first `k` points of the store, read without tracing.
pub fn initial_centroids(store: &BlockStore, k: usize) -> Result<Vec<Point>, AppError> {
    let mut out = Vec::with_capacity(k);
    for i in 0..store.len() {
        for p in store.peek(i)?.records::<Point>() {
            if out.len() == k {
                return Ok(out);
            }
            out.push(p);
        }
    }
    if out.len() < k {
        return Err(AppError::Config(format!(
            "{k} clusters requested but the input holds {} points",
            out.len()
        )));
    }
    Ok(out)
}

pub fn kmeans(store: &BlockStore, cfg: &KMeansConfig, imp: KMeansImpl) -> Result<KMeansResult, AppError> {
    if cfg.k == 0 {
        return Err(AppError::Config("k must be at least 1".into()));
    }
    let k = cfg.k;
    let mut means = InstrumentedBuffer::new(initial_centroids(store, k)?);
    let mut aggs = vec![AggRecord::default(); k];
    let mut stats: Option<BufferStats> = None;
    for iter in 0..cfg.iterations {
        aggs = match imp {
            KMeansImpl::Unprotected => aggregate_plain(store, &means)?,
            KMeansImpl::ManualCmov => aggregate_cmov(store, &means)?,
            KMeansImpl::OramHash => {
                let (a, s) = aggregate_oram_hash(store, &means, cfg, iter as u64)?;
                let total = stats.get_or_insert_with(BufferStats::default);
                total.hits += s.hits;
                total.misses += s.misses;
                total.evictions += s.evictions;
                total.miss_log.extend(s.miss_log);
                a
            }
            KMeansImpl::Framework => aggregate_framework(store, &means)?,
        };
        update_means(&mut means, &aggs);
    }
    let centroids = aggs
        .iter()
        .enumerate()
        .map(|(c, a)| Centroid {
            index: c as u64,
            mean: means.as_slice()[c],
            sum_x: a.sum_x,
            sum_y: a.sum_y,
            count: a.count,
        })
        .collect();
    Ok(KMeansResult {
        centroids,
        buffer_stats: stats,
    })
}

/// New mean per cluster; an empty cluster keeps its previous mean.
fn update_means(means: &mut InstrumentedBuffer<Point>, aggs: &[AggRecord]) {
    for (c, a) in aggs.iter().enumerate() {
        let prev = means.read(c);
        let empty = o_is_zero(a.count);
        let d = o_select(empty, 1, a.count);
        let next = Point::new((a.sum_x / d) as u32, (a.sum_y / d) as u32);
        means.write(c, Point::cond_select(empty, &prev, &next));
    }
}

/// Contribution of slot `i` of `b`, zeroed when the slot is past the record
/// count, and the cluster it belongs to.
#[inline]
fn contribution(b: &Block, i: usize, means: &InstrumentedBuffer<Point>) -> (u64, AggRecord) {
    let p = b.get::<Point>(i);
    let live = o_less(i as u64, b.record_count()).word();
    let c = find_nearest_centroid(p, means);
    (
        c,
        AggRecord {
            key: 0,
            sum_x: u64::from(p.x()) & live,
            sum_y: u64::from(p.y()) & live,
            count: 1 & live,
        },
    )
}

fn fresh_slots(k: usize) -> InstrumentedBuffer<AggRecord> {
    InstrumentedBuffer::new(
        (0..k as u64)
            .map(|key| AggRecord {
                key,
                ..Default::default()
            })
            .collect(),
    )
}

/// Folds every point slot of one block into `slots` by oblivious update.
fn accumulate_block(b: &Block, means: &InstrumentedBuffer<Point>, slots: &mut InstrumentedBuffer<AggRecord>) {
    for i in 0..Point::PER_BLOCK {
        let (c, add) = contribution(b, i, means);
        o_array_update(slots, c, |a| a.merged(&add));
    }
}

fn aggregate_plain(store: &BlockStore, means: &InstrumentedBuffer<Point>) -> Result<Vec<AggRecord>, AppError> {
    let mut acc: Vec<AggRecord> = fresh_slots(means.len()).into_inner();
    for i in 0..store.len() {
        let b = store.read_block(i)?;
        for p in b.records::<Point>() {
            let c = find_nearest_centroid(p, means) as usize;
            let a = &mut acc[c];
            a.sum_x += u64::from(p.x());
            a.sum_y += u64::from(p.y());
            a.count += 1;
        }
    }
    Ok(acc)
}

fn aggregate_cmov(store: &BlockStore, means: &InstrumentedBuffer<Point>) -> Result<Vec<AggRecord>, AppError> {
    let mut slots = fresh_slots(means.len());
    for i in 0..store.len() {
        let b = store.read_block(i)?;
        accumulate_block(&b, means, &mut slots);
    }
    Ok((0..slots.len()).map(|c| slots.read(c)).collect())
}

/// Per input block: aggregate into a local k-slot map, then merge every
/// slot into the cluster record held by the buffer manager, creating it on
/// first sight. Finally drain all blocks and sum per cluster.
fn aggregate_oram_hash(
    store: &BlockStore,
    means: &InstrumentedBuffer<Point>,
    cfg: &KMeansConfig,
    iter: u64,
) -> Result<(Vec<AggRecord>, BufferStats), AppError> {
    let k = means.len();
    let capacity = k.div_ceil(AggRecord::PER_BLOCK) as u64 + 1;
    let bcfg = BufferConfig::new(capacity)
        .cache_blocks(cfg.cache_blocks)
        .seed(cfg.seed.wrapping_add(iter));
    let mut bm = BufferManager::<AggRecord>::new(bcfg)?;
    for i in 0..store.len() {
        let b = store.read_block(i)?;
        let mut local = fresh_slots(k);
        accumulate_block(&b, means, &mut local);
        for c in 0..k {
            let entry = local.read(c);
            // Only centroids present in this block are combined. This branch
            // is the residual leak: the cache sees which centroids occur.
            if entry.count == 0 {
                continue;
            }
            match bm.lookup(c as u64) {
                None => {
                    let id = bm.add_record(&entry)?;
                    bm.bind(c as u64, id);
                }
                Some(id) => {
                    let blk = bm.get_block(id)?;
                    for s in 0..AggRecord::PER_BLOCK {
                        let r = blk.get::<AggRecord>(s);
                        let hit = o_equal(r.key, c as u64);
                        blk.set(s, &AggRecord::cond_select(hit, &r.merged(&entry), &r));
                    }
                }
            }
        }
    }
    let stats = bm.stats().clone();
    let blocks = bm.drain()?;
    Ok((collect_aggregates(&blocks, k), stats))
}

/// Sums every live aggregate record into its cluster slot.
fn collect_aggregates(blocks: &[Block], k: usize) -> Vec<AggRecord> {
    let mut slots = fresh_slots(k);
    for b in blocks {
        let n = b.record_count();
        for s in 0..AggRecord::PER_BLOCK {
            let r = b.get::<AggRecord>(s);
            let live = o_less(s as u64, n) & !r.is_sentinel();
            let add = AggRecord::cond_select(live, &r, &AggRecord::default());
            o_array_update(&mut slots, r.key, |a| a.merged(&add));
        }
    }
    slots.into_inner()
}

/// Emits one partial aggregate per cluster for every input block.
struct KMeansMapper<'a> {
    means: &'a InstrumentedBuffer<Point>,
}

impl Mapper for KMeansMapper<'_> {
    type Out = AggRecord;

    fn emissions_per_block(&self) -> usize {
        self.means.len()
    }

    fn map_block(&mut self, input: &Block, out: &mut Vec<AggRecord>) {
        let mut local = fresh_slots(self.means.len());
        accumulate_block(input, self.means, &mut local);
        out.extend((0..local.len()).map(|c| local.read(c)));
    }
}

fn aggregate_framework(store: &BlockStore, means: &InstrumentedBuffer<Point>) -> Result<Vec<AggRecord>, AppError> {
    let k = means.len();
    let merge = |a: &AggRecord, b: &AggRecord| a.merged(b);
    let out = mr_run(store, &mut KMeansMapper { means }, &merge, &MrConfig::default())?;
    let mut blocks = Vec::with_capacity(out.store.len());
    for i in 0..out.store.len() {
        blocks.push(out.store.read_block(i)?);
    }
    Ok(collect_aggregates(&blocks, k))
}

/// Writes `k` fixed 24-byte records: index, mean x, mean y, count.
pub fn write_centroids(path: impl AsRef<Path>, centroids: &[Centroid]) -> Result<(), AppError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in centroids {
        f.write_all(&c.index.to_le_bytes())?;
        f.write_all(&c.mean.x().to_le_bytes())?;
        f.write_all(&c.mean.y().to_le_bytes())?;
        f.write_all(&c.count.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Reads a centroid file. Sums are not stored and come back as zero.
pub fn read_centroids(path: impl AsRef<Path>) -> Result<Vec<Centroid>, AppError> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() % CENTROID_RECORD_BYTES != 0 {
        return Err(AppError::Format(format!(
            "centroid file length {} is not a multiple of {CENTROID_RECORD_BYTES}",
            raw.len()
        )));
    }
    Ok(raw
        .chunks_exact(CENTROID_RECORD_BYTES)
        .map(|r| {
            let u64_at = |o: usize| u64::from_le_bytes(r[o..o + 8].try_into().expect("8 bytes"));
            let u32_at = |o: usize| u32::from_le_bytes(r[o..o + 4].try_into().expect("4 bytes"));
            Centroid {
                index: u64_at(0),
                mean: Point::new(u32_at(8), u32_at(12)),
                sum_x: 0,
                sum_y: 0,
                count: u64_at(16),
            }
        })
        .collect())
}
