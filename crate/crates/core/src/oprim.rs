//! Branch-free oblivious primitives.
//!
//! Conditions are carried as a [`Mask`] (all zeros or all ones) and every
//! selection reads both candidates. None of the functions here branch on or
//! index by secret values; the array helpers touch every element once, in
//! order, regardless of the secret index.

use std::ops::{BitAnd, BitOr, BitXor, Not};

use crate::trace::InstrumentedBuffer;

/// A 64-bit secret data lane.
pub type SecretWord = u64;

/// Condition flag: `0` for false, `u64::MAX` for true.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mask(u64);

impl Mask {
    pub const TRUE: Mask = Mask(u64::MAX);
    pub const FALSE: Mask = Mask(0);

    /// Expands the low bit of `bit` into a mask.
    #[inline]
    pub fn from_bit(bit: u64) -> Mask {
        Mask(0u64.wrapping_sub(bit & 1))
    }

    #[inline]
    pub fn from_bool(b: bool) -> Mask {
        Mask::from_bit(b as u64)
    }

    #[inline]
    pub fn word(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn bit(self) -> u64 {
        self.0 & 1
    }

    /// Declassifies the condition. Only for public decisions and tests.
    pub fn reveal(self) -> bool {
        self.0 != 0
    }
}

impl BitAnd for Mask {
    type Output = Mask;
    #[inline]
    fn bitand(self, rhs: Mask) -> Mask {
        Mask(self.0 & rhs.0)
    }
}

impl BitOr for Mask {
    type Output = Mask;
    #[inline]
    fn bitor(self, rhs: Mask) -> Mask {
        Mask(self.0 | rhs.0)
    }
}

impl BitXor for Mask {
    type Output = Mask;
    #[inline]
    fn bitxor(self, rhs: Mask) -> Mask {
        Mask(self.0 ^ rhs.0)
    }
}

impl Not for Mask {
    type Output = Mask;
    #[inline]
    fn not(self) -> Mask {
        Mask(!self.0)
    }
}

impl std::ops::BitAndAssign for Mask {
    #[inline]
    fn bitand_assign(&mut self, rhs: Mask) {
        self.0 &= rhs.0;
    }
}

impl std::ops::BitOrAssign for Mask {
    #[inline]
    fn bitor_assign(&mut self, rhs: Mask) {
        self.0 |= rhs.0;
    }
}

/// `a` if `c` else `b`.
#[inline]
pub fn o_select(c: Mask, a: SecretWord, b: SecretWord) -> SecretWord {
    b ^ ((a ^ b) & c.0)
}

/// `a > b`, from the borrow of `b - a` computed at 128 bits.
#[inline]
pub fn o_greater(a: SecretWord, b: SecretWord) -> Mask {
    let diff = (b as u128).wrapping_sub(a as u128);
    Mask::from_bit((diff >> 127) as u64)
}

#[inline]
pub fn o_less(a: SecretWord, b: SecretWord) -> Mask {
    o_greater(b, a)
}

#[inline]
pub fn o_equal(a: SecretWord, b: SecretWord) -> Mask {
    let x = a ^ b;
    // Top bit of (x | -x) is set iff x != 0.
    let nonzero = (x | x.wrapping_neg()) >> 63;
    Mask::from_bit(nonzero ^ 1)
}

#[inline]
pub fn o_is_zero(a: SecretWord) -> Mask {
    o_equal(a, 0)
}

/// Writes `src` into `dst` when `c` holds; `dst` is written either way.
#[inline]
pub fn o_move(c: Mask, dst: &mut SecretWord, src: SecretWord) {
    *dst = o_select(c, src, *dst);
}

/// Exchanges `x` and `y` when `c` holds.
#[inline]
pub fn o_swap(c: Mask, x: &mut SecretWord, y: &mut SecretWord) {
    let t = (*x ^ *y) & c.0;
    *x ^= t;
    *y ^= t;
}

#[inline]
pub fn o_min(a: SecretWord, b: SecretWord) -> SecretWord {
    o_select(o_greater(a, b), b, a)
}

#[inline]
pub fn o_max(a: SecretWord, b: SecretWord) -> SecretWord {
    o_select(o_greater(a, b), a, b)
}

/// Types that can be selected lane by lane without branching.
pub trait CondSelect: Sized {
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self;

    #[inline]
    fn cond_assign(&mut self, c: Mask, src: &Self) {
        *self = Self::cond_select(c, src, self);
    }

    #[inline]
    fn cond_swap(c: Mask, a: &mut Self, b: &mut Self) {
        let new_a = Self::cond_select(c, b, a);
        let new_b = Self::cond_select(c, a, b);
        *a = new_a;
        *b = new_b;
    }
}

impl CondSelect for u64 {
    #[inline]
    fn cond_select(c: Mask, a: &u64, b: &u64) -> u64 {
        o_select(c, *a, *b)
    }

    #[inline]
    fn cond_swap(c: Mask, a: &mut u64, b: &mut u64) {
        o_swap(c, a, b);
    }
}

impl CondSelect for u32 {
    #[inline]
    fn cond_select(c: Mask, a: &u32, b: &u32) -> u32 {
        o_select(c, u64::from(*a), u64::from(*b)) as u32
    }
}

impl CondSelect for u8 {
    #[inline]
    fn cond_select(c: Mask, a: &u8, b: &u8) -> u8 {
        o_select(c, u64::from(*a), u64::from(*b)) as u8
    }
}

impl<T: CondSelect + Copy, const N: usize> CondSelect for [T; N] {
    #[inline]
    fn cond_select(c: Mask, a: &Self, b: &Self) -> Self {
        let mut out = *b;
        for (o, x) in out.iter_mut().zip(a.iter()) {
            o.cond_assign(c, x);
        }
        out
    }
}

/// Strict ordering computed without branches.
pub trait ObliviousOrd {
    fn ct_gt(&self, other: &Self) -> Mask;
}

impl ObliviousOrd for u64 {
    #[inline]
    fn ct_gt(&self, other: &Self) -> Mask {
        o_greater(*self, *other)
    }
}

/// Selects between two slots of `buf`, reading both.
pub fn o_select_at<T: CondSelect + Copy>(
    buf: &InstrumentedBuffer<T>,
    c: Mask,
    i: usize,
    j: usize,
) -> T {
    let a = buf.read(i);
    let b = buf.read(j);
    T::cond_select(c, &a, &b)
}

/// Swaps slots `i` and `j` of `buf` when `c` holds: two reads and two writes
/// happen unconditionally.
pub fn o_swap_at<T: CondSelect + Copy>(buf: &mut InstrumentedBuffer<T>, c: Mask, i: usize, j: usize) {
    let mut a = buf.read(i);
    let mut b = buf.read(j);
    T::cond_swap(c, &mut a, &mut b);
    buf.write(i, a);
    buf.write(j, b);
}

/// Reads element `i` by scanning the whole buffer. An out-of-range index
/// yields `T::default()`.
pub fn o_array_read<T: CondSelect + Copy + Default>(buf: &InstrumentedBuffer<T>, i: SecretWord) -> T {
    let mut acc = T::default();
    for j in 0..buf.len() {
        let x = buf.read(j);
        acc.cond_assign(o_equal(j as u64, i), &x);
    }
    acc
}

/// Writes `v` at index `i` by rewriting every element. An out-of-range index
/// leaves the buffer unchanged.
pub fn o_array_write<T: CondSelect + Copy>(buf: &mut InstrumentedBuffer<T>, i: SecretWord, v: T) {
    for j in 0..buf.len() {
        let x = buf.read(j);
        buf.write(j, T::cond_select(o_equal(j as u64, i), &v, &x));
    }
}

/// Replaces element `i` with `f(element)`. `f` runs on every element so its
/// cost does not reveal `i`.
pub fn o_array_update<T, F>(buf: &mut InstrumentedBuffer<T>, i: SecretWord, mut f: F)
where
    T: CondSelect + Copy,
    F: FnMut(&T) -> T,
{
    for j in 0..buf.len() {
        let x = buf.read(j);
        let y = f(&x);
        buf.write(j, T::cond_select(o_equal(j as u64, i), &y, &x));
    }
}
