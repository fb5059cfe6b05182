//! Exact integer primitives: bit length, jump points, sign, floor halving,
//! smash and positional bits.
//!
//! Everything works on [`Int`] (arbitrary precision) so no operation can
//! overflow. Functions documented as taking naturals expect a nonnegative
//! argument; callers that may hold negative values check first.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Int = BigInt;

/// Number of binary digits of `x`; `len(0) = 0`. Expects `x >= 0`.
pub fn len(x: &Int) -> u64 {
    debug_assert!(!x.is_negative(), "len of a negative value");
    x.bits()
}

/// `len(len(x))`.
pub fn len2(x: &Int) -> u64 {
    let l = len(x);
    64 - l.leading_zeros() as u64
}

/// Bit length of a machine integer.
pub fn len_u64(x: u64) -> u64 {
    64 - x.leading_zeros() as u64
}

/// Greatest integer of length `u`: `2^u - 1`.
pub fn alpha(u: u64) -> Int {
    (Int::one() << u) - 1
}

/// Greatest integer `t` with `len2(t) = u`: `2^(2^u - 1) - 1`.
///
/// Panics for `u >= 64`; such values have more bits than any machine can hold.
pub fn alpha2(u: u64) -> Int {
    assert!(u < 64, "alpha2({u}) is too large to materialize");
    let e = (1u64 << u) - 1;
    (Int::one() << e) - 1
}

pub fn sg(x: &Int) -> Int {
    if x.is_positive() {
        Int::one()
    } else {
        Int::zero()
    }
}

pub fn cosg(x: &Int) -> Int {
    if x.is_positive() {
        Int::zero()
    } else {
        Int::one()
    }
}

/// Floor division by two.
pub fn div2(x: &Int) -> Int {
    x.div_floor(&Int::from(2))
}

/// `2^(len(x) * len(y))`. Expects nonnegative arguments.
pub fn smash(x: &Int, y: &Int) -> Int {
    Int::one() << (len(x) * len(y))
}

/// Coefficient of `2^i` in `y`. Negative positions give 0; negative `y` is
/// read in two's complement, so high positions of a negative value give 1.
pub fn bit(i: &Int, y: &Int) -> Int {
    if i.is_negative() {
        return Int::zero();
    }
    let set = match i.to_u64() {
        Some(pos) => y.bit(pos),
        None => y.is_negative(),
    };
    if set {
        Int::one()
    } else {
        Int::zero()
    }
}

/// Serializes an [`Int`] as its decimal string, for use with
/// `#[serde(serialize_with = "...")]`.
pub fn serialize_int<S: serde::Serializer>(v: &Int, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Positional bit for machine indices.
pub fn bit_at(pos: u64, y: &Int) -> bool {
    y.bit(pos)
}
