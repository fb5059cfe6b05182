//! Reference values computed straight from the definitions of the example
//! functions: elementary bit arithmetic, or structural recursion over the
//! binary string of the argument. Nothing here calls the evaluator or the
//! circuit code.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Int = BigInt;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("unknown oracle `{0}`")]
    Unknown(String),
    #[error("oracle `{name}` takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("oracle `{name}` expects nonnegative arguments")]
    Negative { name: String },
}

pub const ORACLES: [&str; 13] = [
    "popcount",
    "parity",
    "shift",
    "bit",
    "allones",
    "kk_reset",
    "crn_direct",
    "crn_b_direct",
    "crn_c_direct",
    "fourbrn_direct",
    "fourbrn_b_direct",
    "fourbrn_c_direct",
    "logadd_direct",
];

fn arity(name: &str) -> usize {
    match name {
        "popcount" | "parity" => 1,
        "crn_direct" | "crn_b_direct" | "crn_c_direct" => 3,
        _ => 2,
    }
}

/// Evaluates the named oracle.
pub fn oracle(name: &str, args: &[Int]) -> Result<Int, OracleError> {
    if !ORACLES.contains(&name) {
        return Err(OracleError::Unknown(name.into()));
    }
    if args.len() != arity(name) {
        return Err(OracleError::Arity { name: name.into(), expected: arity(name), got: args.len() });
    }
    if args.iter().any(|a| a.is_negative()) {
        return Err(OracleError::Negative { name: name.into() });
    }
    let a = |i: usize| &args[i];
    Ok(match name {
        "popcount" => Int::from(popcount(a(0))),
        "parity" => Int::from(popcount(a(0)) % 2),
        "shift" => shift(a(0), a(1)),
        "bit" => flag(bit(a(1), small(a(0)))),
        "allones" => flag(allones(small(a(0)), a(1))),
        "kk_reset" => flag(kk_reset(a(0), a(1))),
        "crn_direct" => crn(Crn::A, a(0), a(1), a(2)),
        "crn_b_direct" => crn(Crn::B, a(0), a(1), a(2)),
        "crn_c_direct" => crn(Crn::C, a(0), a(1), a(2)),
        "fourbrn_direct" => Int::from(fourbrn(Brn::A, a(0), a(1))),
        "fourbrn_b_direct" => Int::from(fourbrn(Brn::B, a(0), a(1))),
        "fourbrn_c_direct" => Int::from(fourbrn(Brn::C, a(0), a(1))),
        "logadd_direct" => logadd(a(0), a(1)),
        _ => unreachable!(),
    })
}

fn small(v: &Int) -> u64 {
    v.to_u64().unwrap_or(u64::MAX)
}

fn flag(b: bool) -> Int {
    if b {
        Int::one()
    } else {
        Int::zero()
    }
}

/// Binary digits, most significant first; empty for zero.
fn digits(v: &Int) -> Vec<bool> {
    if v.is_zero() {
        return vec![];
    }
    v.to_str_radix(2).chars().map(|c| c == '1').collect()
}

fn length(v: &Int) -> usize {
    digits(v).len()
}

/// Bit `i` of `v`, counted from the least significant end.
fn bit(v: &Int, i: u64) -> bool {
    let d = digits(v);
    (i as usize) < d.len() && d[d.len() - 1 - i as usize]
}

fn popcount(v: &Int) -> u64 {
    digits(v).iter().filter(|b| **b).count() as u64
}

/// `y` with its last `len(x)` digits removed.
fn shift(x: &Int, y: &Int) -> Int {
    let d = digits(y);
    let keep = d.len().saturating_sub(length(x));
    d[..keep].iter().fold(Int::zero(), |acc, b| 2 * acc + u8::from(*b))
}

fn allones(k: u64, y: &Int) -> bool {
    (0..k).all(|i| bit(y, i))
}

/// Scans `y` from bit 0 up to `len(x) - 1`; a set bit `u` resets the value
/// to the complement of bit `u + 1`.
fn kk_reset(x: &Int, y: &Int) -> bool {
    let mut v = false;
    for u in 0..length(x) as u64 {
        if bit(y, u) {
            v = !bit(y, u + 1);
        }
    }
    v
}

/// The leading `len(x)` digits of `y`, padded with zeros when `y` is shorter.
fn prefix(x: &Int, y: &Int) -> Vec<bool> {
    let mut d = digits(y);
    d.resize(length(x).max(d.len()), false);
    d.truncate(length(x));
    d
}

#[derive(Clone, Copy)]
enum Crn {
    A,
    B,
    C,
}

/// `f(e) = g(z)` and `f(wb) = 2 f(w) + h_b(|w|, z)`.
fn crn(which: Crn, x: &Int, y: &Int, z: &Int) -> Int {
    let g = match which {
        Crn::A => 0,
        Crn::B => 1,
        Crn::C => u8::from(bit(z, 0)),
    };
    let h = |b: bool, w: usize| -> u8 {
        match which {
            Crn::A => u8::from(b),
            Crn::B => u8::from(!b),
            Crn::C => u8::from(bit(z, w as u64) != b),
        }
    };
    fn go(s: &[bool], g: u8, h: &dyn Fn(bool, usize) -> u8) -> Int {
        match s.split_last() {
            None => Int::from(g),
            Some((b, w)) => 2 * go(w, g, h) + h(*b, w.len()),
        }
    }
    go(&prefix(x, y), g, &h)
}

#[derive(Clone, Copy)]
enum Brn {
    A,
    B,
    C,
}

/// `f(e) = g` and `f(wb) = h_b(|w|, f(w))`, values in 0..=4.
fn fourbrn(which: Brn, x: &Int, y: &Int) -> u8 {
    let (g, h): (u8, fn(bool, usize, u8) -> u8) = match which {
        Brn::A => (2, |b, _, v| match (b, v) {
            (false, 4) => 0,
            (false, v) => v + 1,
            (true, v) => v / 2,
        }),
        Brn::B => (0, |b, t, v| {
            if b {
                if v <= 1 {
                    4
                } else {
                    v / 2
                }
            } else {
                (v as usize + t).min(4) as u8
            }
        }),
        Brn::C => (4, |b, t, v| {
            if b {
                if v == 0 {
                    0
                } else {
                    (v + 3) / 2
                }
            } else if (t + v as usize) % 2 == 1 {
                3
            } else {
                0
            }
        }),
    };
    fn go(s: &[bool], g: u8, h: fn(bool, usize, u8) -> u8) -> u8 {
        match s.split_last() {
            None => g,
            Some((b, w)) => h(*b, w.len(), go(w, g, h)),
        }
    }
    go(&prefix(x, y), g, h)
}

/// `y` plus one term `floor(y/2) + bit(2^u - 1, y)` for every `u` below
/// the length of the length of `x`.
fn logadd(x: &Int, y: &Int) -> Int {
    let steps = length(&Int::from(length(x)));
    let mut v = y.clone();
    for u in 0..steps {
        v += y / 2 + u8::from(bit(y, (1u64 << u) - 1));
    }
    v
}

/// Reference value of a stdlib function, when one exists. `None` means the
/// function has no oracle or the arguments fall outside its domain (`bitp`
/// is only characterized at `x = 2^u - 1`).
pub fn reference(fun: &str, args: &[Int]) -> Option<Int> {
    if args.iter().any(|a| a.is_negative()) {
        return None;
    }
    let two = |name: &str| oracle(name, &args[..2]).ok();
    match (fun, args.len()) {
        ("rsh", 2) => two("shift"),
        ("bitp", 2) => {
            let x = &args[0];
            let jump = digits(x).iter().all(|b| *b);
            jump.then(|| oracle("bit", &[Int::from(length(x)), args[1].clone()]).ok()).flatten()
        }
        ("parity", 2) => {
            let low = low_bits(&args[1], length(&args[0]) + 1);
            oracle("parity", &[low]).ok()
        }
        ("bcount", 2) => oracle("popcount", &[low_bits(&args[1], length(&args[0]))]).ok(),
        ("bsearch", 2) => oracle("allones", &[Int::from(length(&args[0]).max(1)), args[1].clone()]).ok(),
        ("kk_mod2", 2) => two("kk_reset"),
        ("crn", 3) => oracle("crn_direct", args).ok(),
        ("crn_b", 3) => oracle("crn_b_direct", args).ok(),
        ("crn_c", 3) => oracle("crn_c_direct", args).ok(),
        ("crn_diag", 2) => oracle("crn_direct", &[args[0].clone(), args[0].clone(), args[1].clone()]).ok(),
        ("fourbrn", 2) => two("fourbrn_direct"),
        ("fourbrn_b", 2) => two("fourbrn_b_direct"),
        ("fourbrn_c", 2) => two("fourbrn_c_direct"),
        ("fourbrn_diag", 1) => oracle("fourbrn_direct", &[args[0].clone(), args[0].clone()]).ok(),
        ("logitadd", 2) => two("logadd_direct"),
        _ => None,
    }
}

fn low_bits(y: &Int, k: usize) -> Int {
    let d = digits(y);
    let start = d.len().saturating_sub(k);
    d[start..].iter().fold(Int::zero(), |acc, b| 2 * acc + u8::from(*b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i(v: i64) -> Int {
        Int::from(v)
    }

    fn o(name: &str, args: &[i64]) -> i64 {
        let args: Vec<Int> = args.iter().map(|v| i(*v)).collect();
        oracle(name, &args).unwrap().to_i64().unwrap()
    }

    #[test]
    fn elementary() {
        assert_eq!(o("parity", &[11]), 1);
        assert_eq!(o("popcount", &[11]), 3);
        assert_eq!(o("shift", &[5, 53]), 6);
        assert_eq!(o("shift", &[0, 53]), 53);
        assert_eq!(o("shift", &[1000, 53]), 0);
        assert_eq!(o("bit", &[2, 0b100]), 1);
        assert_eq!(o("allones", &[3, 0b1011]), 0);
        assert_eq!(o("allones", &[2, 0b1011]), 1);
        assert_eq!(o("kk_reset", &[7, 0b0001]), 1);
        assert_eq!(o("kk_reset", &[7, 0b0011]), 1);
        assert_eq!(o("kk_reset", &[7, 0b1110]), 0);
        assert_eq!(o("kk_reset", &[0, 0b1]), 0);
    }

    #[test]
    fn crn_reads_the_leading_digits() {
        // h0 = 0, h1 = 1, g = 0 rebuilds the prefix.
        for x in 0..200 {
            assert_eq!(o("crn_direct", &[x, x, 5]), x);
        }
        assert_eq!(o("crn_direct", &[7, 0b10110, 0]), 0b101);
        assert_eq!(o("crn_direct", &[7, 0b1, 0]), 0b100);
        // g = 1 and complemented digits.
        assert_eq!(o("crn_b_direct", &[6, 6, 0]), 0b1001);
        // h_b(u, z) = bit(u, z) xor b, g = bit(0, z).
        assert_eq!(o("crn_c_direct", &[3, 0b10, 0b11]), 0b101);
    }

    #[test]
    fn fourbrn_values() {
        assert_eq!(o("fourbrn_direct", &[0, 0]), 2);
        // 9 = 1001: 2 -> 1 -> 2 -> 3 -> 1
        assert_eq!(o("fourbrn_direct", &[9, 9]), 1);
        for x in 0..1024 {
            assert!((0..=4).contains(&o("fourbrn_direct", &[x, x])));
            assert!((0..=4).contains(&o("fourbrn_b_direct", &[x, x])));
            assert!((0..=4).contains(&o("fourbrn_c_direct", &[x, x])));
        }
        // fourbrn_b on 10: digit 1 sends 0 to 4, then adding 1 saturates.
        assert_eq!(o("fourbrn_b_direct", &[2, 2]), 4);
    }

    #[test]
    fn logadd_terms() {
        assert_eq!(o("logadd_direct", &[0, 9]), 9);
        // len(len(1)) = 1: one term, bit 0.
        assert_eq!(o("logadd_direct", &[1, 9]), 9 + 4 + 1);
        // len(len(255)) = 4: bits 0, 1, 3, 7 of 9 = 1001.
        assert_eq!(o("logadd_direct", &[255, 9]), 9 + 4 * 4 + 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(oracle("nope", &[]), Err(OracleError::Unknown(_))));
        assert!(matches!(oracle("shift", &[i(1)]), Err(OracleError::Arity { .. })));
        assert!(matches!(oracle("parity", &[i(-1)]), Err(OracleError::Negative { .. })));
    }

    #[test]
    fn references() {
        assert_eq!(reference("parity", &[i(11), i(11)]), Some(i(1)));
        assert_eq!(reference("bcount", &[i(11), i(11)]), Some(i(3)));
        assert_eq!(reference("bitp", &[i(7), i(0b1000)]), Some(i(1)));
        assert_eq!(reference("bitp", &[i(6), i(0b1000)]), None);
        assert_eq!(reference("bsearch", &[i(0), i(1)]), Some(i(1)));
        assert_eq!(reference("itadd", &[i(1), i(1)]), None);
    }
}
