//! The 1 KiB block and the fixed-width records it carries.
//!
//! A block is 128 little-endian 64-bit lanes. Lanes 0 and 1 form a 16-byte
//! header whose low 16 bits hold the record count; the remaining 126 lanes
//! hold records packed back to back. Slots past the record count hold the
//! record type's sentinel.

use std::fmt;

use crate::oalg::Sortable;
use crate::oprim::{o_equal, o_greater, o_select, CondSelect, Mask};

pub const BLOCK_BYTES: usize = 1024;
pub const BLOCK_LANES: usize = BLOCK_BYTES / 8;
pub const HEADER_LANES: usize = 2;
pub const BODY_LANES: usize = BLOCK_LANES - HEADER_LANES;

const COUNT_MASK: u64 = 0xFFFF;

/// A fixed-width record stored in block lanes.
pub trait BlockRecord: Sortable + PartialEq + fmt::Debug {
    const LANES: usize;
    const PER_BLOCK: usize = BODY_LANES / Self::LANES;

    fn to_lanes(&self, out: &mut [u64]);
    fn from_lanes(lanes: &[u64]) -> Self;
    /// Plain integer with the same order as `ct_gt`, for branching code.
    fn order_key(&self) -> u128;
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(C, align(8))]
pub struct Block {
    lanes: [u64; BLOCK_LANES],
}

impl Default for Block {
    fn default() -> Self {
        Self::zeroed()
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Block")
            .field("record_count", &self.record_count())
            .finish_non_exhaustive()
    }
}

impl CondSelect for Block {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        let mut lanes = [0u64; BLOCK_LANES];
        for (i, lane) in lanes.iter_mut().enumerate() {
            *lane = o_select(c, a.lanes[i], b.lanes[i]);
        }
        Block { lanes }
    }

    #[inline]
    fn cond_assign(&mut self, c: Mask, src: &Self) {
        for (dst, s) in self.lanes.iter_mut().zip(src.lanes.iter()) {
            *dst = o_select(c, *s, *dst);
        }
    }
}

impl Block {
    pub fn zeroed() -> Self {
        Block {
            lanes: [0; BLOCK_LANES],
        }
    }

    /// No records; every slot holds `R`'s sentinel.
    pub fn empty<R: BlockRecord>() -> Self {
        let mut b = Self::zeroed();
        let s = R::sentinel();
        for i in 0..R::PER_BLOCK {
            b.set(i, &s);
        }
        b
    }

    /// # Panics
    ///
    /// If `records` does not fit in one block.
    pub fn from_records<R: BlockRecord>(records: &[R]) -> Self {
        assert!(
            records.len() <= R::PER_BLOCK,
            "{} records exceed block capacity {}",
            records.len(),
            R::PER_BLOCK
        );
        let mut b = Self::empty::<R>();
        for (i, r) in records.iter().enumerate() {
            b.set(i, r);
        }
        b.set_record_count(records.len() as u64);
        b
    }

    pub fn lanes(&self) -> &[u64; BLOCK_LANES] {
        &self.lanes
    }

    pub fn lanes_mut(&mut self) -> &mut [u64; BLOCK_LANES] {
        &mut self.lanes
    }

    pub fn record_count(&self) -> u64 {
        self.lanes[0] & COUNT_MASK
    }

    pub fn set_record_count(&mut self, n: u64) {
        self.lanes[0] = (self.lanes[0] & !COUNT_MASK) | (n & COUNT_MASK);
    }

    /// Record in slot `i`, whether or not it is below the record count.
    #[inline]
    pub fn get<R: BlockRecord>(&self, i: usize) -> R {
        let at = HEADER_LANES + i * R::LANES;
        R::from_lanes(&self.lanes[at..at + R::LANES])
    }

    #[inline]
    pub fn set<R: BlockRecord>(&mut self, i: usize, r: &R) {
        let at = HEADER_LANES + i * R::LANES;
        r.to_lanes(&mut self.lanes[at..at + R::LANES]);
    }

    /// The first `record_count` records.
    pub fn records<R: BlockRecord>(&self) -> Vec<R> {
        let n = (self.record_count() as usize).min(R::PER_BLOCK);
        (0..n).map(|i| self.get(i)).collect()
    }

    /// Recomputes the record count as the number of non-sentinel slots,
    /// touching every slot.
    pub fn recount<R: BlockRecord>(&mut self) {
        let mut n = 0u64;
        for i in 0..R::PER_BLOCK {
            n += (!self.get::<R>(i).is_sentinel()).bit();
        }
        self.set_record_count(n);
    }

    pub fn to_bytes(&self) -> [u8; BLOCK_BYTES] {
        let mut out = [0u8; BLOCK_BYTES];
        for (chunk, lane) in out.chunks_exact_mut(8).zip(self.lanes.iter()) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; BLOCK_BYTES]) -> Self {
        let mut b = Self::zeroed();
        for (lane, chunk) in b.lanes.iter_mut().zip(bytes.chunks_exact(8)) {
            *lane = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        b
    }
}

#[inline]
fn gt_pair(a_hi: u64, a_lo: u64, b_hi: u64, b_lo: u64) -> Mask {
    o_greater(a_hi, b_hi) | (o_equal(a_hi, b_hi) & o_greater(a_lo, b_lo))
}

pub const KEY_BYTES: usize = 12;

/// A 12-byte key and a 32-bit value. Keys compare as big-endian integers,
/// which for zero-padded ASCII is dictionary order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KVRecord {
    lanes: [u64; 2],
}

impl KVRecord {
    /// Keys longer than 12 bytes are truncated.
    pub fn new(key: &[u8], value: u32) -> Self {
        let mut k = [0u8; KEY_BYTES];
        let n = key.len().min(KEY_BYTES);
        k[..n].copy_from_slice(&key[..n]);
        Self::from_key(k, value)
    }

    pub fn from_key(key: [u8; KEY_BYTES], value: u32) -> Self {
        let lo = u64::from_le_bytes(key[..8].try_into().expect("8 bytes"));
        let hi = u32::from_le_bytes(key[8..].try_into().expect("4 bytes"));
        KVRecord {
            lanes: [lo, u64::from(hi) | (u64::from(value) << 32)],
        }
    }

    pub fn key(&self) -> [u8; KEY_BYTES] {
        let mut k = [0u8; KEY_BYTES];
        k[..8].copy_from_slice(&self.lanes[0].to_le_bytes());
        k[8..].copy_from_slice(&(self.lanes[1] as u32).to_le_bytes());
        k
    }

    /// Key with trailing zero padding removed.
    pub fn key_str(&self) -> String {
        let k = self.key();
        let end = k.iter().position(|&b| b == 0).unwrap_or(KEY_BYTES);
        String::from_utf8_lossy(&k[..end]).into_owned()
    }

    pub fn value(&self) -> u32 {
        (self.lanes[1] >> 32) as u32
    }

    pub fn with_value(&self, value: u32) -> Self {
        KVRecord {
            lanes: [
                self.lanes[0],
                (self.lanes[1] & 0xFFFF_FFFF) | (u64::from(value) << 32),
            ],
        }
    }

    #[inline]
    fn order_words(&self) -> (u64, u64) {
        (
            self.lanes[0].swap_bytes(),
            u64::from((self.lanes[1] as u32).swap_bytes()),
        )
    }
}

impl fmt::Debug for KVRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_sentinel().reveal() {
            return f.write_str("KV(sentinel)");
        }
        write!(f, "KV({:?}: {})", self.key_str(), self.value())
    }
}

impl CondSelect for KVRecord {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        KVRecord {
            lanes: <[u64; 2]>::cond_select(c, &a.lanes, &b.lanes),
        }
    }
}

impl Sortable for KVRecord {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        let (ah, al) = self.order_words();
        let (bh, bl) = other.order_words();
        gt_pair(ah, al, bh, bl)
    }

    #[inline]
    fn ct_key_eq(&self, other: &Self) -> Mask {
        o_equal(self.lanes[0], other.lanes[0])
            & o_equal(self.lanes[1] & 0xFFFF_FFFF, other.lanes[1] & 0xFFFF_FFFF)
    }

    fn sentinel() -> Self {
        KVRecord {
            lanes: [u64::MAX, 0xFFFF_FFFF],
        }
    }

    #[inline]
    fn is_sentinel(&self) -> Mask {
        self.ct_key_eq(&Self::sentinel())
    }
}

impl BlockRecord for KVRecord {
    const LANES: usize = 2;

    fn order_key(&self) -> u128 {
        let (hi, lo) = self.order_words();
        (u128::from(hi) << 32) | u128::from(lo)
    }

    #[inline]
    fn to_lanes(&self, out: &mut [u64]) {
        out.copy_from_slice(&self.lanes);
    }

    #[inline]
    fn from_lanes(lanes: &[u64]) -> Self {
        KVRecord {
            lanes: [lanes[0], lanes[1]],
        }
    }
}

/// Per-key running sums, used for cluster aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct AggRecord {
    pub key: u64,
    pub sum_x: u64,
    pub sum_y: u64,
    pub count: u64,
}

impl AggRecord {
    /// Field-wise sum, keeping `self`'s key.
    #[inline]
    pub fn merged(&self, other: &Self) -> Self {
        AggRecord {
            key: self.key,
            sum_x: self.sum_x.wrapping_add(other.sum_x),
            sum_y: self.sum_y.wrapping_add(other.sum_y),
            count: self.count.wrapping_add(other.count),
        }
    }
}

impl CondSelect for AggRecord {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        AggRecord {
            key: o_select(c, a.key, b.key),
            sum_x: o_select(c, a.sum_x, b.sum_x),
            sum_y: o_select(c, a.sum_y, b.sum_y),
            count: o_select(c, a.count, b.count),
        }
    }
}

impl Sortable for AggRecord {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        o_greater(self.key, other.key)
    }
    #[inline]
    fn ct_key_eq(&self, other: &Self) -> Mask {
        o_equal(self.key, other.key)
    }
    fn sentinel() -> Self {
        AggRecord {
            key: u64::MAX,
            ..Default::default()
        }
    }
    #[inline]
    fn is_sentinel(&self) -> Mask {
        o_equal(self.key, u64::MAX)
    }
}

impl BlockRecord for AggRecord {
    const LANES: usize = 4;

    fn order_key(&self) -> u128 {
        u128::from(self.key)
    }

    fn to_lanes(&self, out: &mut [u64]) {
        out.copy_from_slice(&[self.key, self.sum_x, self.sum_y, self.count]);
    }

    fn from_lanes(l: &[u64]) -> Self {
        AggRecord {
            key: l[0],
            sum_x: l[1],
            sum_y: l[2],
            count: l[3],
        }
    }
}

/// Two 16.16 fixed-point coordinates packed in one lane: `x` in the low
/// half, `y` in the high half.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Point(pub u64);

impl Point {
    pub const ONE: u32 = 1 << 16;

    pub fn new(x: u32, y: u32) -> Self {
        Point(u64::from(x) | (u64::from(y) << 32))
    }

    /// Rounds to the nearest representable point, clamping to the grid.
    /// The largest grid value is kept free for the sentinel.
    pub fn from_f64(x: f64, y: f64) -> Self {
        let fix = |v: f64| (v * f64::from(Self::ONE)).round().clamp(0.0, f64::from(u32::MAX - 1)) as u32;
        Point::new(fix(x), fix(y))
    }

    pub fn x(&self) -> u32 {
        self.0 as u32
    }

    pub fn y(&self) -> u32 {
        (self.0 >> 32) as u32
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let one = f64::from(Self::ONE);
        (f64::from(self.x()) / one, f64::from(self.y()) / one)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (x, y) = self.to_f64();
        write!(f, "Point({x:.4}, {y:.4})")
    }
}

impl CondSelect for Point {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        Point(o_select(c, a.0, b.0))
    }
}

impl Sortable for Point {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        o_greater(self.0, other.0)
    }
    #[inline]
    fn ct_key_eq(&self, other: &Self) -> Mask {
        o_equal(self.0, other.0)
    }
    fn sentinel() -> Self {
        Point(u64::MAX)
    }
    #[inline]
    fn is_sentinel(&self) -> Mask {
        o_equal(self.0, u64::MAX)
    }
}

impl BlockRecord for Point {
    const LANES: usize = 1;

    fn order_key(&self) -> u128 {
        u128::from(self.0)
    }

    fn to_lanes(&self, out: &mut [u64]) {
        out[0] = self.0;
    }

    fn from_lanes(l: &[u64]) -> Self {
        Point(l[0])
    }
}

pub const TEXT_SLOT_BYTES: usize = 16;

/// Sixteen raw bytes of input text, normally one whitespace-free word padded
/// with zeros.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TextSlot {
    lanes: [u64; 2],
}

impl TextSlot {
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut raw = [0u8; TEXT_SLOT_BYTES];
        let n = bytes.len().min(TEXT_SLOT_BYTES);
        raw[..n].copy_from_slice(&bytes[..n]);
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: [u8; TEXT_SLOT_BYTES]) -> Self {
        TextSlot {
            lanes: [
                u64::from_le_bytes(raw[..8].try_into().expect("8 bytes")),
                u64::from_le_bytes(raw[8..].try_into().expect("8 bytes")),
            ],
        }
    }

    pub fn bytes(&self) -> [u8; TEXT_SLOT_BYTES] {
        let mut out = [0u8; TEXT_SLOT_BYTES];
        out[..8].copy_from_slice(&self.lanes[0].to_le_bytes());
        out[8..].copy_from_slice(&self.lanes[1].to_le_bytes());
        out
    }
}

impl fmt::Debug for TextSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TextSlot({:?})", String::from_utf8_lossy(&self.bytes()))
    }
}

impl CondSelect for TextSlot {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        TextSlot {
            lanes: <[u64; 2]>::cond_select(c, &a.lanes, &b.lanes),
        }
    }
}

impl Sortable for TextSlot {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        gt_pair(
            self.lanes[0].swap_bytes(),
            self.lanes[1].swap_bytes(),
            other.lanes[0].swap_bytes(),
            other.lanes[1].swap_bytes(),
        )
    }
    #[inline]
    fn ct_key_eq(&self, other: &Self) -> Mask {
        o_equal(self.lanes[0], other.lanes[0]) & o_equal(self.lanes[1], other.lanes[1])
    }
    fn sentinel() -> Self {
        TextSlot {
            lanes: [u64::MAX; 2],
        }
    }
    #[inline]
    fn is_sentinel(&self) -> Mask {
        self.ct_key_eq(&Self::sentinel())
    }
}

impl BlockRecord for TextSlot {
    const LANES: usize = 2;

    fn order_key(&self) -> u128 {
        (u128::from(self.lanes[0].swap_bytes()) << 64) | u128::from(self.lanes[1].swap_bytes())
    }

    fn to_lanes(&self, out: &mut [u64]) {
        out.copy_from_slice(&self.lanes);
    }

    fn from_lanes(l: &[u64]) -> Self {
        TextSlot {
            lanes: [l[0], l[1]],
        }
    }
}
