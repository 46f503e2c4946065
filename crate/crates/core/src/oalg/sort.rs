//! Bitonic sorting network.
//!
//! The network used here is the variant in which every comparator moves the
//! smaller element to the lower index: the first step of each merge stage
//! compares mirrored positions instead of flipping the direction. It performs
//! `n * k * (k + 1) / 4` compare-exchanges for `n = 2^k`, and because all
//! comparators point the same way it remains a valid sorting network when
//! compare-exchange is replaced by block merge-split.

use crate::oprim::{o_equal, o_select, CondSelect, Mask, ObliviousOrd};
use crate::trace::{is_recording, InstrumentedBuffer};

/// Record ordered by key under oblivious comparison.
pub trait Sortable: CondSelect + Copy {
    /// Strict key order.
    fn ct_gt(&self, other: &Self) -> Mask;
    fn ct_key_eq(&self, other: &Self) -> Mask;
    /// Record with the maximal key, used for padding.
    fn sentinel() -> Self;
    fn is_sentinel(&self) -> Mask;
}

impl Sortable for u64 {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        ObliviousOrd::ct_gt(self, other)
    }
    #[inline]
    fn ct_key_eq(&self, other: &Self) -> Mask {
        o_equal(*self, *other)
    }
    fn sentinel() -> Self {
        u64::MAX
    }
    #[inline]
    fn is_sentinel(&self) -> Mask {
        o_equal(*self, u64::MAX)
    }
}

/// 16-byte sort record: a key and an opaque payload.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
#[repr(C)]
pub struct SortRecord {
    pub key: u64,
    pub payload: u64,
}

impl SortRecord {
    pub fn new(key: u64, payload: u64) -> Self {
        Self { key, payload }
    }
}

impl CondSelect for SortRecord {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        SortRecord {
            key: o_select(c, a.key, b.key),
            payload: o_select(c, a.payload, b.payload),
        }
    }
}

impl Sortable for SortRecord {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        ObliviousOrd::ct_gt(&self.key, &other.key)
    }
    #[inline]
    fn ct_key_eq(&self, other: &Self) -> Mask {
        o_equal(self.key, other.key)
    }
    fn sentinel() -> Self {
        SortRecord {
            key: u64::MAX,
            payload: 0,
        }
    }
    #[inline]
    fn is_sentinel(&self) -> Mask {
        o_equal(self.key, u64::MAX)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SortStats {
    pub comparators: u64,
}

/// `n * k * (k + 1) / 4` for `n = 2^k`, the size of the network for `n`
/// elements after padding to a power of two.
pub fn comparator_count(n: usize) -> u64 {
    if n < 2 {
        return 0;
    }
    let padded = n.next_power_of_two() as u64;
    let k = padded.trailing_zeros() as u64;
    padded * k * (k + 1) / 4
}

/// Visits the comparators `(lo, hi)` of the network for `n = 2^k` elements in
/// execution order.
///
/// # Panics
///
/// If `n` is not a power of two.
#[inline]
pub fn for_each_comparator(n: usize, mut f: impl FnMut(usize, usize)) {
    if n < 2 {
        return;
    }
    assert!(n.is_power_of_two(), "network size must be a power of two");
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        for start in (0..n).step_by(size) {
            for off in 0..half {
                f(start + off, start + size - 1 - off);
            }
        }
        let mut stride = half / 2;
        while stride > 0 {
            for block in (0..n).step_by(2 * stride) {
                for lo in block..block + stride {
                    f(lo, lo + stride);
                }
            }
            stride /= 2;
        }
        size *= 2;
    }
}

#[inline]
pub(crate) fn compare_exchange<T: CondSelect + Copy>(
    buf: &mut InstrumentedBuffer<T>,
    lo: usize,
    hi: usize,
    out_of_order: &impl Fn(&T, &T) -> Mask,
) {
    let mut a = buf.read(lo);
    let mut b = buf.read(hi);
    let swap = out_of_order(&a, &b);
    T::cond_swap(swap, &mut a, &mut b);
    buf.write(lo, a);
    buf.write(hi, b);
}

fn run_network<T: CondSelect + Copy>(
    buf: &mut InstrumentedBuffer<T>,
    out_of_order: impl Fn(&T, &T) -> Mask,
) -> u64 {
    let n = buf.len();
    if buf.recording() && is_recording() {
        let mut count = 0;
        for_each_comparator(n, |lo, hi| {
            compare_exchange(buf, lo, hi, &out_of_order);
            count += 1;
        });
        return count;
    }
    // Same schedule on the raw slice when nothing would be recorded.
    let v = buf.as_mut_slice_untraced();
    for_each_comparator(n, |lo, hi| {
        let (mut a, mut b) = (v[lo], v[hi]);
        T::cond_swap(out_of_order(&a, &b), &mut a, &mut b);
        v[lo] = a;
        v[hi] = b;
    });
    comparator_count(n)
}

#[derive(Clone, Copy)]
struct Padded<T> {
    item: T,
    pad: u64,
}

impl<T: CondSelect> CondSelect for Padded<T> {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        Padded {
            item: T::cond_select(c, &a.item, &b.item),
            pad: o_select(c, a.pad, b.pad),
        }
    }
}

/// Sorts `buf` by key with a fixed compare-exchange schedule. Lengths that
/// are not a power of two are padded with sentinel records in a scratch
/// buffer; padding always sorts last and is stripped by position. Equal keys
/// may be reordered.
pub fn bitonic_sort<T: Sortable>(buf: &mut InstrumentedBuffer<T>, ascending: bool) -> SortStats {
    let n = buf.len();
    let after = move |a: &T, b: &T| if ascending { a.ct_gt(b) } else { b.ct_gt(a) };
    if n.is_power_of_two() || n < 2 {
        let comparators = run_network(buf, after);
        return SortStats { comparators };
    }

    let padded = n.next_power_of_two();
    let filler = Padded {
        item: T::sentinel(),
        pad: 1,
    };
    let mut work = InstrumentedBuffer::filled(padded, filler);
    work.set_recording(buf.recording());
    for i in 0..n {
        work.write(i, Padded { item: buf.read(i), pad: 0 });
    }
    for i in n..padded {
        work.write(i, filler);
    }
    // Padding sorts after every real record, whatever the direction.
    let comparators = run_network(&mut work, |a: &Padded<T>, b: &Padded<T>| {
        let pad_first = Mask::from_bit(a.pad & !b.pad);
        let same_class = o_equal(a.pad, b.pad);
        pad_first | (same_class & after(&a.item, &b.item))
    });
    for i in 0..n {
        buf.write(i, work.read(i).item);
    }
    SortStats { comparators }
}
