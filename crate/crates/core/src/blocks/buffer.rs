//! Working block, LRU block cache and ORAM backing store for hash-style
//! aggregation.
//!
//! Cache hits and misses depend on the key sequence, so only the ORAM side of
//! this structure hides which block is touched. `stats().miss_log` records
//! the ids fetched from the ORAM so that residual leakage can be measured.

use std::collections::HashMap;
use std::marker::PhantomData;

use super::block::{Block, BlockRecord};
use super::BlockError;
use crate::oram::{OramConfig, PathOram};

pub type BlockId = u64;

pub const DEFAULT_CACHE_BLOCKS: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferConfig {
    /// Blocks held in the LRU cache, not counting the working block.
    pub cache_blocks: usize,
    /// Most blocks that can ever be created.
    pub capacity: u64,
    pub seed: u64,
}

impl BufferConfig {
    pub fn new(capacity: u64) -> Self {
        Self {
            cache_blocks: DEFAULT_CACHE_BLOCKS,
            capacity,
            seed: 0,
        }
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

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BufferStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    /// Ids fetched from the ORAM, in order.
    pub miss_log: Vec<BlockId>,
}

#[derive(Debug)]
struct CacheEntry {
    id: BlockId,
    block: Block,
    last_used: u64,
}

pub struct BufferManager<R> {
    working: Block,
    working_id: BlockId,
    cache: Vec<CacheEntry>,
    cache_blocks: usize,
    tick: u64,
    next_id: BlockId,
    capacity: u64,
    oram: PathOram<Block>,
    index: HashMap<u64, BlockId>,
    stats: BufferStats,
    _records: PhantomData<R>,
}

impl<R: BlockRecord> BufferManager<R> {
    pub fn new(cfg: BufferConfig) -> Result<Self, BlockError> {
        if cfg.cache_blocks == 0 || cfg.capacity == 0 {
            return Err(BlockError::Config(
                "cache size and capacity must be at least one block".into(),
            ));
        }
        let oram = PathOram::new(OramConfig::new(cfg.capacity).seed(cfg.seed))?;
        Ok(Self {
            working: Block::empty::<R>(),
            working_id: 0,
            cache: Vec::with_capacity(cfg.cache_blocks),
            cache_blocks: cfg.cache_blocks,
            tick: 0,
            next_id: 1,
            capacity: cfg.capacity,
            oram,
            index: HashMap::new(),
            stats: BufferStats::default(),
            _records: PhantomData,
        })
    }

    pub fn stats(&self) -> &BufferStats {
        &self.stats
    }

    pub fn working_id(&self) -> BlockId {
        self.working_id
    }

    /// Blocks created so far, including the working block.
    pub fn block_count(&self) -> u64 {
        self.next_id
    }

    /// Cached ids, least recently used first.
    pub fn cached_ids(&self) -> Vec<BlockId> {
        let mut v: Vec<_> = self.cache.iter().map(|e| (e.last_used, e.id)).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, id)| id).collect()
    }

    pub fn lookup(&self, key: u64) -> Option<BlockId> {
        self.index.get(&key).copied()
    }

    pub fn bind(&mut self, key: u64, id: BlockId) {
        self.index.insert(key, id);
    }

    pub fn set_recording(&mut self, on: bool) {
        self.oram.set_recording(on);
    }

    fn touch(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    /// Writes the least recently used block back to the ORAM if the cache
    /// is full.
    fn make_room(&mut self) -> Result<(), BlockError> {
        if self.cache.len() < self.cache_blocks {
            return Ok(());
        }
        let victim = self
            .cache
            .iter()
            .enumerate()
            .min_by_key(|(_, e)| e.last_used)
            .map(|(i, _)| i)
            .expect("cache is full so not empty");
        let e = self.cache.swap_remove(victim);
        self.oram.write(e.id, e.block)?;
        self.stats.evictions += 1;
        Ok(())
    }

    /// The block `id`, from the working slot, the cache or the ORAM.
    pub fn get_block(&mut self, id: BlockId) -> Result<&mut Block, BlockError> {
        if id == self.working_id {
            self.stats.hits += 1;
            return Ok(&mut self.working);
        }
        let t = self.touch();
        if let Some(pos) = self.cache.iter().position(|e| e.id == id) {
            self.stats.hits += 1;
            self.cache[pos].last_used = t;
            return Ok(&mut self.cache[pos].block);
        }
        if id >= self.next_id {
            return Err(BlockError::UnknownBlock { id });
        }
        self.stats.misses += 1;
        self.stats.miss_log.push(id);
        self.make_room()?;
        let block = self.oram.read(id)?;
        self.cache.push(CacheEntry {
            id,
            block,
            last_used: t,
        });
        Ok(&mut self.cache.last_mut().expect("just pushed").block)
    }

    /// Appends `rec` to the working block, first retiring a full working
    /// block into the cache. Returns the id of the block now holding `rec`.
    pub fn add_record(&mut self, rec: &R) -> Result<BlockId, BlockError> {
        if self.working.record_count() as usize >= R::PER_BLOCK {
            if self.next_id >= self.capacity {
                return Err(BlockError::Capacity {
                    capacity: self.capacity,
                });
            }
            self.make_room()?;
            let t = self.touch();
            let full = std::mem::replace(&mut self.working, Block::empty::<R>());
            self.cache.push(CacheEntry {
                id: self.working_id,
                block: full,
                last_used: t,
            });
            self.working_id = self.next_id;
            self.next_id += 1;
        }
        let n = self.working.record_count();
        self.working.set(n as usize, rec);
        self.working.set_record_count(n + 1);
        Ok(self.working_id)
    }

    /// Writes the cache and the working block back to the ORAM and empties
    /// the cache.
    pub fn flush(&mut self) -> Result<(), BlockError> {
        for e in self.cache.drain(..) {
            self.oram.write(e.id, e.block)?;
        }
        self.oram.write(self.working_id, self.working)?;
        Ok(())
    }

    /// Every block ever created, in id order, read back from the ORAM.
    pub fn drain(mut self) -> Result<Vec<Block>, BlockError> {
        self.flush()?;
        (0..self.next_id)
            .map(|id| Ok(self.oram.read(id)?))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::KVRecord;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::collections::VecDeque;

    fn kv(i: u32) -> KVRecord {
        KVRecord::new(format!("k{i}").as_bytes(), i)
    }

    fn manager(m: usize, cap: u64) -> BufferManager<KVRecord> {
        BufferManager::new(BufferConfig::new(cap).cache_blocks(m).seed(5)).unwrap()
    }

    #[test]
    fn sixty_fourth_add_opens_a_new_block() {
        let mut bm = manager(4, 16);
        let ids: Vec<_> = (0..64).map(|i| bm.add_record(&kv(i)).unwrap()).collect();
        assert!(ids[..63].iter().all(|&id| id == ids[0]));
        assert_ne!(ids[63], ids[0]);
        let b = bm.get_block(ids[0]).unwrap();
        assert_eq!(b.record_count(), 63);
        assert_eq!(b.get::<KVRecord>(5), kv(5));
    }

    #[test]
    fn repeated_get_is_a_hit() {
        let mut bm = manager(4, 16);
        for i in 0..200 {
            bm.add_record(&kv(i)).unwrap();
        }
        bm.flush().unwrap();
        bm.get_block(1).unwrap();
        let before = bm.stats().clone();
        bm.get_block(1).unwrap();
        assert_eq!(bm.stats().misses, before.misses);
        assert_eq!(bm.stats().hits, before.hits + 1);
    }

    #[test]
    fn lru_victim() {
        let mut bm = manager(2, 16);
        for i in 0..63 * 5 {
            bm.add_record(&kv(i)).unwrap();
        }
        bm.flush().unwrap();
        let before = bm.stats().evictions;
        for id in [1, 2, 3] {
            bm.get_block(id).unwrap();
        }
        assert_eq!(bm.cached_ids(), vec![2, 3]);
        assert_eq!(bm.stats().evictions, before + 1);
    }

    #[test]
    fn capacity_exhaustion_is_an_error() {
        let mut bm = manager(2, 2);
        for i in 0..126 {
            bm.add_record(&kv(i)).unwrap();
        }
        assert!(matches!(
            bm.add_record(&kv(0)),
            Err(BlockError::Capacity { capacity: 2 })
        ));
    }

    #[test]
    fn ten_thousand_adds_are_recoverable() {
        let mut bm = manager(8, 200);
        let recs: Vec<_> = (0..10_000).map(kv).collect();
        for r in &recs {
            bm.add_record(r).unwrap();
        }
        let got: Vec<KVRecord> = bm
            .drain()
            .unwrap()
            .iter()
            .flat_map(|b| b.records::<KVRecord>())
            .collect();
        assert_eq!(got, recs);
    }

    // Reference model: a plain map of block contents plus an LRU list.
    #[test]
    fn matches_lru_and_direct_store_model() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
        let m = 4;
        let mut bm = manager(m, 64);
        let mut contents: Vec<Vec<KVRecord>> = vec![Vec::new()];
        let mut lru: VecDeque<u64> = VecDeque::new();
        let mut working = 0u64;
        let (mut hits, mut misses) = (0u64, 0u64);
        for step in 0..10_000u32 {
            if contents.len() < 40 && rng.random_bool(0.6) {
                if contents[working as usize].len() == 63 {
                    if lru.len() == m {
                        lru.pop_front();
                    }
                    lru.push_back(working);
                    working = contents.len() as u64;
                    contents.push(Vec::new());
                }
                let r = kv(step);
                assert_eq!(bm.add_record(&r).unwrap(), working);
                contents[working as usize].push(r);
            } else {
                let id = rng.random_range(0..contents.len() as u64);
                let slot = rng.random_range(0..63);
                let b = bm.get_block(id).unwrap();
                if id == working {
                    hits += 1;
                } else if let Some(p) = lru.iter().position(|&x| x == id) {
                    hits += 1;
                    lru.remove(p);
                    lru.push_back(id);
                } else {
                    misses += 1;
                    if lru.len() == m {
                        lru.pop_front();
                    }
                    lru.push_back(id);
                }
                // In-place update of an existing record.
                if slot < contents[id as usize].len() {
                    let r = b.get::<KVRecord>(slot).with_value(step);
                    b.set(slot, &r);
                    contents[id as usize][slot] = r;
                }
            }
            assert_eq!(bm.cached_ids(), lru.iter().copied().collect::<Vec<_>>());
        }
        assert_eq!((bm.stats().hits, bm.stats().misses), (hits, misses));
        let drained = bm.drain().unwrap();
        let got: Vec<Vec<KVRecord>> = drained.iter().map(|b| b.records()).collect();
        assert_eq!(got, contents);
    }
}
