//! Non-recursive Path ORAM.
//!
//! The tree and the stash are instrumented buffers; the position map is
//! client-private state and is not part of the observable channel. Every
//! access reads one full root-to-leaf path and the whole stash, works on a
//! private copy, then writes the path (leaf to root) and the whole stash back.
//! The number and order of touched slots is therefore fixed; only the path
//! itself varies, and it is a fresh uniform leaf on every access.
//!
//! Randomness comes from a seeded SplitMix64 generator so that runs replay
//! exactly under a fixed seed.

use std::mem;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::oprim::{o_equal, o_less, o_select, CondSelect, Mask};
use crate::trace::InstrumentedBuffer;

/// Reserved id of an empty slot.
pub const DUMMY_ID: u64 = u64::MAX;
pub const DEFAULT_BUCKET_SIZE: usize = 4;
pub const DEFAULT_STASH_CAPACITY: usize = 128;
/// Keeps leaf arithmetic far from overflow.
pub const MAX_CAPACITY: u64 = 1 << 48;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OramError {
    #[error("invalid ORAM configuration: {0}")]
    Config(String),
    #[error("stash overflow: more than {capacity} blocks could not be evicted")]
    StashOverflow { capacity: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OramConfig {
    /// Number of logical blocks `N`.
    pub capacity: u64,
    /// Slots per bucket `Z`.
    pub bucket_size: usize,
    pub stash_capacity: usize,
    pub seed: u64,
}

impl OramConfig {
    pub fn new(capacity: u64) -> Self {
        Self {
            capacity,
            bucket_size: DEFAULT_BUCKET_SIZE,
            stash_capacity: DEFAULT_STASH_CAPACITY,
            seed: 0,
        }
    }

    pub fn bucket_size(mut self, z: usize) -> Self {
        self.bucket_size = z;
        self
    }

    pub fn stash_capacity(mut self, s: usize) -> Self {
        self.stash_capacity = s;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Next power of two at or above `max(N, 2)`.
    pub fn leaves(&self) -> u64 {
        self.capacity.max(2).next_power_of_two()
    }

    pub fn levels(&self) -> usize {
        self.leaves().trailing_zeros() as usize + 1
    }

    pub fn bucket_count(&self) -> usize {
        (self.leaves() * 2 - 1) as usize
    }

    pub fn validate(&self) -> Result<(), OramError> {
        if self.capacity == 0 {
            return Err(OramError::Config("capacity must be at least 1".into()));
        }
        if self.capacity > MAX_CAPACITY {
            return Err(OramError::Config(format!("capacity above {MAX_CAPACITY}")));
        }
        if self.bucket_size == 0 {
            return Err(OramError::Config("bucket size must be at least 1".into()));
        }
        if self.stash_capacity < self.bucket_size {
            return Err(OramError::Config(format!(
                "stash capacity {} is smaller than the bucket size {}",
                self.stash_capacity, self.bucket_size
            )));
        }
        Ok(())
    }

    /// Slot reads and slot writes per access, stash scan included.
    pub fn trace_shape(&self) -> (usize, usize) {
        let per = self.levels() * self.bucket_size + self.stash_capacity;
        (per, per)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OramOp {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slot<P> {
    id: u64,
    leaf: u64,
    payload: P,
}

impl<P: Default> Slot<P> {
    fn dummy() -> Self {
        Slot {
            id: DUMMY_ID,
            leaf: 0,
            payload: P::default(),
        }
    }
}

impl<P: CondSelect> CondSelect for Slot<P> {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        Slot {
            id: o_select(c, a.id, b.id),
            leaf: o_select(c, a.leaf, b.leaf),
            payload: P::cond_select(c, &a.payload, &b.payload),
        }
    }
}

/// Eviction destination of an entry that stays in the stash.
const UNPLACED: u64 = u64::MAX;

#[inline]
fn is_real(id: u64) -> Mask {
    !o_equal(id, DUMMY_ID)
}

/// Path ORAM over payloads of type `P`. `P::default()` is the all-zero block.
pub struct PathOram<P> {
    cfg: OramConfig,
    leaves: u64,
    levels: usize,
    tree: InstrumentedBuffer<Slot<P>>,
    stash: InstrumentedBuffer<Slot<P>>,
    position_map: Vec<u64>,
    rng: SplitMix64,
    pool: Vec<Slot<P>>,
    reach: Vec<u64>,
    dest: Vec<u64>,
    last_leaf: u64,
    stash_occupancy: usize,
    max_stash_occupancy: usize,
}

impl<P: CondSelect + Copy + Default> PathOram<P> {
    /// Empty ORAM: every slot dummy, every id on an independent uniform leaf.
    pub fn new(cfg: OramConfig) -> Result<Self, OramError> {
        cfg.validate()?;
        let leaves = cfg.leaves();
        let levels = cfg.levels();
        let mut rng = SplitMix64::seed_from_u64(cfg.seed);
        let position_map = (0..cfg.capacity).map(|_| rng.random_range(0..leaves)).collect();
        let tree = InstrumentedBuffer::new(vec![Slot::dummy(); cfg.bucket_count() * cfg.bucket_size]);
        let stash = InstrumentedBuffer::new(vec![Slot::dummy(); cfg.stash_capacity]);
        let pool = Vec::with_capacity(levels * cfg.bucket_size + cfg.stash_capacity);
        Ok(Self {
            cfg,
            leaves,
            levels,
            tree,
            stash,
            position_map,
            rng,
            pool,
            reach: Vec::new(),
            dest: Vec::new(),
            last_leaf: 0,
            stash_occupancy: 0,
            max_stash_occupancy: 0,
        })
    }

    /// Initializes with `values[i]` stored under id `i`. Placement happens
    /// before any secret access and depends only on the public position map.
    pub fn load(cfg: OramConfig, values: &[P]) -> Result<Self, OramError> {
        if values.len() as u64 > cfg.capacity {
            return Err(OramError::Config(format!(
                "{} initial values exceed capacity {}",
                values.len(),
                cfg.capacity
            )));
        }
        let mut oram = Self::new(cfg)?;
        let z = oram.cfg.bucket_size;
        let mut stashed = 0;
        let tree = oram.tree.as_mut_slice_untraced();
        for (id, value) in values.iter().enumerate() {
            let leaf = oram.position_map[id];
            let slot = Slot {
                id: id as u64,
                leaf,
                payload: *value,
            };
            let free = (0..oram.levels).rev().find_map(|level| {
                let base = path_node(oram.leaves, oram.levels, leaf, level) * z;
                (base..base + z).find(|&i| tree[i].id == DUMMY_ID)
            });
            match free {
                Some(i) => tree[i] = slot,
                None => {
                    if stashed == oram.cfg.stash_capacity {
                        return Err(OramError::StashOverflow {
                            capacity: oram.cfg.stash_capacity,
                        });
                    }
                    oram.stash.as_mut_slice_untraced()[stashed] = slot;
                    stashed += 1;
                }
            }
        }
        oram.stash_occupancy = stashed;
        oram.max_stash_occupancy = stashed;
        Ok(oram)
    }

    pub fn config(&self) -> &OramConfig {
        &self.cfg
    }

    pub fn capacity(&self) -> u64 {
        self.cfg.capacity
    }

    pub fn leaves(&self) -> u64 {
        self.leaves
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn block_bytes(&self) -> usize {
        mem::size_of::<P>()
    }

    /// Constant `(reads, writes)` per access, stash scan included.
    pub fn trace_shape(&self) -> (usize, usize) {
        self.cfg.trace_shape()
    }

    /// Leaf whose path the most recent access read.
    pub fn last_leaf(&self) -> u64 {
        self.last_leaf
    }

    pub fn stash_occupancy(&self) -> usize {
        self.stash_occupancy
    }

    pub fn max_stash_occupancy(&self) -> usize {
        self.max_stash_occupancy
    }

    pub fn set_recording(&mut self, on: bool) {
        self.tree.set_recording(on);
        self.stash.set_recording(on);
    }

    pub fn read(&mut self, id: u64) -> Result<P, OramError> {
        self.access(OramOp::Read, id, None)
    }

    pub fn write(&mut self, id: u64, data: P) -> Result<P, OramError> {
        self.access(OramOp::Write, id, Some(&data))
    }

    /// One oblivious access. Returns the payload stored before the access
    /// (zeroed if the id was never written). An id outside `0..N` performs a
    /// dummy access on a random path and returns zero.
    ///
    /// # Panics
    ///
    /// If `op` is `Write` and no payload is given.
    pub fn access(&mut self, op: OramOp, id: u64, data: Option<&P>) -> Result<P, OramError> {
        let is_write = Mask::from_bool(op == OramOp::Write);
        let new_data = match op {
            OramOp::Write => *data.expect("write access needs a payload"),
            OramOp::Read => P::default(),
        };
        let z = self.cfg.bucket_size;
        let path_slots = self.levels * z;

        let valid = o_less(id, self.cfg.capacity);
        let map_index = o_select(valid, id, 0) as usize;
        let random_leaf = self.rng.random_range(0..self.leaves);
        let new_leaf = self.rng.random_range(0..self.leaves);
        let leaf = o_select(valid, self.position_map[map_index], random_leaf);
        self.position_map[map_index] = o_select(valid, new_leaf, self.position_map[map_index]);
        self.last_leaf = leaf;

        let mut pool = mem::take(&mut self.pool);
        pool.clear();
        for level in 0..self.levels {
            let base = path_node(self.leaves, self.levels, leaf, level) * z;
            for i in base..base + z {
                pool.push(self.tree.read(i));
            }
        }
        for j in 0..self.stash.len() {
            pool.push(self.stash.read(j));
        }

        // The requested block, if it sits on the path, is lifted into the
        // stash part. Every block left in the path part was legally placed
        // on this path before, so the eviction below can always put it back.
        let mut out = P::default();
        let mut found = Mask::FALSE;
        let mut carry = Slot::dummy();
        let (path_part, stash_part) = pool.split_at_mut(path_slots);
        for e in path_part.iter_mut().chain(stash_part.iter_mut()) {
            let hit = o_equal(e.id, id) & valid;
            out.cond_assign(hit, &e.payload);
            e.payload.cond_assign(hit & is_write, &new_data);
            e.leaf = o_select(hit, new_leaf, e.leaf);
            found |= hit;
        }
        for e in path_part.iter_mut() {
            let hit = o_equal(e.id, id) & valid;
            carry.cond_assign(hit, e);
            e.id = o_select(hit, DUMMY_ID, e.id);
        }
        let fresh = Slot {
            id,
            leaf: new_leaf,
            payload: new_data,
        };
        carry.cond_assign(is_write & valid & !found, &fresh);
        let mut pending = is_real(carry.id);
        for e in stash_part.iter_mut() {
            let take = !is_real(e.id) & pending;
            e.cond_assign(take, &carry);
            pending &= !take;
        }

        // Greedy eviction, deepest level first. `reach[j]` is one past the
        // deepest level entry j may occupy (0 for dummies). Each level takes
        // its first Z candidates in pool order, so path blocks win over
        // stash blocks and are never displaced.
        let mut reach = mem::take(&mut self.reach);
        let mut dest = mem::take(&mut self.dest);
        reach.clear();
        dest.clear();
        for e in pool.iter() {
            let real = is_real(e.id);
            let x = e.leaf ^ leaf;
            let mut r = 0;
            for level in 0..self.levels {
                let shift = (self.levels - 1 - level) as u32;
                r += (o_equal(x >> shift, 0) & real).bit();
            }
            reach.push(r);
            dest.push(UNPLACED);
        }
        for level in (0..self.levels).rev() {
            // Candidates before this one; only the first Z are taken.
            let mut seen = 0u64;
            for (d, &r) in dest.iter_mut().zip(&reach) {
                let cand = o_less(level as u64, r) & o_equal(*d, UNPLACED);
                let take = cand & o_less(seen, z as u64);
                *d = o_select(take, (level * z) as u64 + seen, *d);
                seen += cand.bit();
            }
        }
        for level in (0..self.levels).rev() {
            let base = path_node(self.leaves, self.levels, leaf, level) * z;
            for i in 0..z {
                let target = (level * z + i) as u64;
                let mut slot = Slot::dummy();
                for (e, &d) in pool.iter().zip(&dest) {
                    slot.cond_assign(o_equal(d, target), e);
                }
                self.tree.write(base + i, slot);
            }
        }
        let mut stranded = Mask::FALSE;
        for (j, (e, &d)) in pool.iter_mut().zip(&dest).enumerate() {
            let placed = !o_equal(d, UNPLACED);
            e.id = o_select(placed, DUMMY_ID, e.id);
            if j < path_slots {
                stranded |= is_real(e.id);
            }
        }
        assert!(!stranded.reveal(), "eviction left a path block behind");
        self.reach = reach;
        self.dest = dest;
        let stash_part = &mut pool[path_slots..];

        let mut occupancy = 0u64;
        let zero = P::default();
        for (j, s) in stash_part.iter_mut().enumerate() {
            let empty = !is_real(s.id);
            s.payload.cond_assign(empty, &zero);
            s.leaf = o_select(empty, 0, s.leaf);
            occupancy += 1 - empty.bit();
            self.stash.write(j, *s);
        }
        self.pool = pool;

        self.stash_occupancy = occupancy as usize;
        self.max_stash_occupancy = self.max_stash_occupancy.max(self.stash_occupancy);
        if pending.reveal() {
            return Err(OramError::StashOverflow {
                capacity: self.cfg.stash_capacity,
            });
        }
        Ok(out)
    }

    /// Untraced census of real ids in tree and stash, for audits.
    pub fn resident_ids(&self) -> Vec<u64> {
        self.tree
            .as_slice()
            .iter()
            .chain(self.stash.as_slice())
            .filter(|s| s.id != DUMMY_ID)
            .map(|s| s.id)
            .collect()
    }

    /// Checks the structural invariants: no id stored twice, every stored
    /// block on the path of its mapped leaf, stash within capacity.
    pub fn audit(&self) -> Result<(), String> {
        let mut seen = vec![false; self.cfg.capacity as usize];
        let z = self.cfg.bucket_size;
        for (i, s) in self.tree.as_slice().iter().enumerate() {
            if s.id == DUMMY_ID {
                continue;
            }
            let id = s.id as usize;
            if std::mem::replace(&mut seen[id], true) {
                return Err(format!("id {id} stored twice"));
            }
            if s.leaf != self.position_map[id] {
                return Err(format!("id {id} carries a stale leaf"));
            }
            let bucket = i / z;
            let level = (usize::BITS - 1 - (bucket + 1).leading_zeros()) as usize;
            if path_node(self.leaves, self.levels, s.leaf, level) != bucket {
                return Err(format!("id {id} is off its path"));
            }
        }
        for s in self.stash.as_slice() {
            if s.id == DUMMY_ID {
                continue;
            }
            let id = s.id as usize;
            if std::mem::replace(&mut seen[id], true) {
                return Err(format!("id {id} stored twice"));
            }
        }
        Ok(())
    }
}

/// Heap index of the bucket at `level` on the path to `leaf` (root = level 0).
#[inline]
fn path_node(leaves: u64, levels: usize, leaf: u64, level: usize) -> usize {
    (((leaves + leaf) >> (levels - 1 - level)) - 1) as usize
}
