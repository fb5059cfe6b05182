//! Integer words: little-endian two's-complement bit vectors with a known
//! value interval, and the arithmetic circuits over them.

use lode_core::basis::{self, Int};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::builder::Builder;
use crate::ir::{Arg, FaninMode};

/// `bits` are sign-extended beyond their length; every value the word can
/// carry lies in `lo..=hi`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    pub bits: Vec<Arg>,
    pub lo: Int,
    pub hi: Int,
}

/// Bits needed to hold `v` in two's complement.
pub fn tc_bits(v: &Int) -> usize {
    if v.is_negative() {
        basis::len(&(-v - 1u32)) as usize + 1
    } else {
        basis::len(v) as usize + 1
    }
}

pub fn tc_width(lo: &Int, hi: &Int) -> usize {
    tc_bits(lo).max(tc_bits(hi))
}

impl Word {
    pub fn constant(v: &Int) -> Word {
        let w = tc_bits(v);
        let bits = (0..w as u64).map(|i| Arg::Const(basis::bit_at(i, v))).collect();
        Word { bits, lo: v.clone(), hi: v.clone() }
    }

    pub fn from_i64(v: i64) -> Word {
        Word::constant(&Int::from(v))
    }

    /// A nonnegative word from raw bits, least significant first.
    pub fn unsigned(mut bits: Vec<Arg>) -> Word {
        let hi = (Int::one() << bits.len()) - 1;
        bits.push(Arg::Const(false));
        Word { bits, lo: Int::zero(), hi }
    }

    /// A 0/1 word.
    pub fn boolean(b: Arg) -> Word {
        match b {
            Arg::Const(v) => Word::from_i64(v as i64),
            _ => Word { bits: vec![b, Arg::Const(false)], lo: Int::zero(), hi: Int::one() },
        }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bit(&self, i: usize) -> Arg {
        if i < self.bits.len() {
            self.bits[i]
        } else {
            *self.bits.last().expect("words have at least one bit")
        }
    }

    pub fn sign(&self) -> Arg {
        self.bit(self.bits.len() - 1)
    }

    pub fn as_const(&self) -> Option<Int> {
        if self.lo == self.hi {
            return Some(self.lo.clone());
        }
        let mut v = Int::zero();
        for (i, b) in self.bits.iter().enumerate() {
            match b {
                Arg::Const(true) => v += Int::one() << i,
                Arg::Const(false) => {}
                _ => return None,
            }
        }
        if self.sign() == Arg::Const(true) {
            v -= Int::one() << self.bits.len();
        }
        Some(v)
    }

    pub fn is_boolean(&self) -> bool {
        !self.lo.is_negative() && self.hi <= Int::one()
    }

    /// The bit of a word known to be 0 or 1.
    pub fn as_bit(&self) -> Arg {
        debug_assert!(self.is_boolean());
        self.bit(0)
    }

    /// The low `w` bits reinterpreted with a tighter interval; the caller
    /// guarantees the value fits.
    fn fit(&self, lo: Int, hi: Int) -> Word {
        let w = tc_width(&lo, &hi);
        Word { bits: (0..w).map(|i| self.bit(i)).collect(), lo, hi }
    }

    /// Multiplication by `2^k`: pure wiring.
    pub fn shl(&self, k: usize) -> Word {
        let mut bits = vec![Arg::Const(false); k];
        bits.extend(self.bits.iter().copied());
        Word { bits, lo: &self.lo << k, hi: &self.hi << k }
    }

    /// Floor division by `2^k`: pure wiring.
    pub fn shr(&self, k: usize) -> Word {
        let bits: Vec<Arg> = if k >= self.bits.len() { vec![self.sign()] } else { self.bits[k..].to_vec() };
        let d = Int::one() << k;
        Word { bits, lo: self.lo.div_floor(&d), hi: self.hi.div_floor(&d) }
    }

    /// `g * 2^n + low`, where `low` are `n` bits least significant first.
    pub fn concat_below(&self, low: Vec<Arg>) -> Word {
        let n = low.len();
        let mut bits = low;
        bits.extend(self.bits.iter().copied());
        let top = (Int::one() << n) - 1;
        Word { bits, lo: &self.lo << n, hi: (&self.hi << n) + top }
    }
}

impl Builder {
    /// `a + b + cin` modulo `2^m` on `m`-bit operands.
    pub(crate) fn add_bits(&mut self, a: &[Arg], b: &[Arg], cin: Arg) -> Vec<Arg> {
        let m = a.len();
        let g: Vec<Arg> = (0..m).map(|i| self.and2(a[i], b[i])).collect();
        let p: Vec<Arg> = (0..m).map(|i| self.xor2(a[i], b[i])).collect();
        let carries = match self.mode() {
            FaninMode::Unbounded => {
                // c_{i+1} = OR_j (g_j AND p_{j+1..=i}) OR (cin AND p_{0..=i}),
                // using a_k OR b_k as the propagate signal.
                let t: Vec<Arg> = (0..m).map(|i| self.or2(a[i], b[i])).collect();
                let mut c = vec![cin];
                for i in 0..m.saturating_sub(1) {
                    let mut terms = Vec::with_capacity(i + 2);
                    for j in 0..=i {
                        let mut lits = vec![g[j]];
                        lits.extend_from_slice(&t[j + 1..=i]);
                        terms.push(self.and(lits));
                    }
                    let mut lits = vec![cin];
                    lits.extend_from_slice(&t[0..=i]);
                    terms.push(self.and(lits));
                    c.push(self.or(terms));
                }
                c
            }
            FaninMode::Bounded2 => {
                // Sklansky prefix over positions 0..=m-1, slot 0 holding cin.
                let mut gg: Vec<Arg> = std::iter::once(cin).chain(g.iter().copied()).take(m).collect();
                let mut pp: Vec<Arg> = std::iter::once(Arg::Const(false)).chain(p.iter().copied()).take(m).collect();
                let mut d = 0;
                while (1usize << d) < m {
                    let (og, op) = (gg.clone(), pp.clone());
                    for q in 0..m {
                        if (q >> d) & 1 == 1 {
                            let j = ((q >> d) << d) - 1;
                            let t = self.and2(op[q], og[j]);
                            gg[q] = self.or2(og[q], t);
                            pp[q] = self.and2(op[q], op[j]);
                        }
                    }
                    d += 1;
                }
                gg
            }
        };
        (0..m).map(|i| self.xor2(p[i], carries[i])).collect()
    }

    fn add_impl(&mut self, a: &Word, b: &Word, subtract: bool) -> Word {
        let (lo, hi) = if subtract { (&a.lo - &b.hi, &a.hi - &b.lo) } else { (&a.lo + &b.lo, &a.hi + &b.hi) };
        if lo == hi {
            return Word::constant(&lo);
        }
        if b.as_const().is_some_and(|v| v.is_zero()) {
            return a.clone();
        }
        if !subtract && a.as_const().is_some_and(|v| v.is_zero()) {
            return b.clone();
        }
        let m = tc_width(&lo, &hi).max(a.width()).max(b.width());
        let av: Vec<Arg> = (0..m).map(|i| a.bit(i)).collect();
        let bv: Vec<Arg> = (0..m).map(|i| if subtract { self.not(b.bit(i)) } else { b.bit(i) }).collect();
        let bits = self.add_bits(&av, &bv, Arg::Const(subtract));
        Word { bits, lo: Int::zero(), hi: Int::zero() }.fit(lo, hi)
    }

    pub fn w_add(&mut self, a: &Word, b: &Word) -> Word {
        self.add_impl(a, b, false)
    }

    pub fn w_sub(&mut self, a: &Word, b: &Word) -> Word {
        self.add_impl(a, b, true)
    }

    /// Sum by a balanced tree of two-operand adders.
    pub fn w_sum_tree(&mut self, words: &[Word]) -> Word {
        match words.len() {
            0 => Word::from_i64(0),
            1 => words[0].clone(),
            n => {
                let l = self.w_sum_tree(&words[..n / 2]);
                let r = self.w_sum_tree(&words[n / 2..]);
                self.w_add(&l, &r)
            }
        }
    }

    /// `a` where `s = 1`, zero where `s = 0`.
    pub fn w_mask(&mut self, a: &Word, s: Arg) -> Word {
        let bits = a.bits.iter().map(|&b| self.and2(b, s)).collect();
        let z = Int::zero();
        Word { bits, lo: a.lo.clone().min(z.clone()), hi: a.hi.clone().max(z) }
    }

    pub fn w_mul(&mut self, a: &Word, b: &Word) -> Word {
        let (ca, cb) = (a.as_const(), b.as_const());
        if let (Some(x), Some(y)) = (&ca, &cb) {
            return Word::constant(&(x * y));
        }
        if b.is_boolean() && cb.is_none() {
            return self.w_mask(a, b.as_bit());
        }
        if a.is_boolean() && ca.is_none() {
            return self.w_mask(b, a.as_bit());
        }
        if let Some(c) = ca {
            return self.w_mul_const(b, &c);
        }
        if let Some(c) = cb {
            return self.w_mul_const(a, &c);
        }
        // Partial products; the sign bit of b has negative weight.
        let wb = b.width();
        let mut pos = Vec::new();
        for i in 0..wb - 1 {
            let m = self.w_mask(a, b.bit(i));
            pos.push(m.shl(i));
        }
        let mut total = self.w_sum_tree(&pos);
        if b.lo.is_negative() {
            let m = self.w_mask(a, b.sign()).shl(wb - 1);
            total = self.w_sub(&total, &m);
        }
        let corners = [&a.lo * &b.lo, &a.lo * &b.hi, &a.hi * &b.lo, &a.hi * &b.hi];
        let lo = corners.iter().min().unwrap().clone();
        let hi = corners.iter().max().unwrap().clone();
        total.fit(lo, hi)
    }

    pub fn w_mul_const(&mut self, a: &Word, c: &Int) -> Word {
        if c.is_zero() {
            return Word::from_i64(0);
        }
        if c.is_negative() {
            let p = self.w_mul_const(a, &-c);
            return self.w_sub(&Word::from_i64(0), &p);
        }
        let parts: Vec<Word> = (0..basis::len(c)).filter(|&i| c.bit(i)).map(|i| a.shl(i as usize)).collect();
        self.w_sum_tree(&parts)
    }

    /// `1` iff the value is positive.
    pub fn w_sg(&mut self, a: &Word) -> Arg {
        if a.lo.is_positive() {
            return Arg::Const(true);
        }
        if !a.hi.is_positive() {
            return Arg::Const(false);
        }
        if a.is_boolean() {
            return a.as_bit();
        }
        let w = a.width();
        let nonzero = self.or(a.bits[..w - 1].iter().copied());
        let ns = self.not(a.sign());
        self.and2(ns, nonzero)
    }

    /// Bit length of a nonnegative word, by priority encoding.
    pub fn w_len(&mut self, a: &Word) -> Word {
        debug_assert!(!a.lo.is_negative());
        if let Some(c) = a.as_const() {
            return Word::constant(&Int::from(basis::len(&c)));
        }
        let top = basis::len(&a.hi) as usize;
        // first[i]: bit i is the highest set bit.
        let mut first = Vec::with_capacity(top);
        for i in 0..top {
            let higher = self.or(a.bits[i + 1..top].iter().copied());
            let nh = self.not(higher);
            first.push(self.and2(a.bits[i], nh));
        }
        let out_w = basis::len_u64(top as u64) as usize;
        let mut bits = Vec::with_capacity(out_w + 1);
        for j in 0..out_w {
            let sel: Vec<Arg> = (0..top).filter(|i| ((i + 1) >> j) & 1 == 1).map(|i| first[i]).collect();
            bits.push(self.or(sel));
        }
        bits.push(Arg::Const(false));
        Word { bits, lo: Int::from(basis::len(&a.lo)), hi: Int::from(top) }
    }

    /// `1` iff the word equals `c`.
    pub fn w_eq_const(&mut self, a: &Word, c: &Int) -> Arg {
        if c < &a.lo || c > &a.hi {
            return Arg::Const(false);
        }
        if a.lo == a.hi {
            return Arg::Const(true);
        }
        let lits: Vec<Arg> = (0..a.width()).map(|i| if basis::bit_at(i as u64, c) { a.bits[i] } else { self.not(a.bits[i]) }).collect();
        self.and(lits)
    }

    /// `1` iff the word is less than `c`.
    pub fn w_lt_const(&mut self, a: &Word, c: &Int) -> Arg {
        if &a.hi < c {
            return Arg::Const(true);
        }
        if &a.lo >= c {
            return Arg::Const(false);
        }
        let d = self.w_sub(a, &Word::constant(c));
        d.sign()
    }

    /// Bit `i` of `y` for a variable position `i`; negative positions give 0.
    pub fn w_bit_var(&mut self, i: &Word, y: &Word) -> Arg {
        if let Some(c) = i.as_const() {
            return bit_const(&c, y);
        }
        let lo = i.lo.clone().max(Int::zero());
        let hi = i.hi.clone();
        let mut terms = Vec::new();
        let mut p = lo;
        // Positions at or beyond the width all read the sign bit.
        let cap = Int::from(y.width());
        while p <= hi && p < cap {
            let e = self.w_eq_const(i, &p);
            let b = bit_const(&p, y);
            terms.push(self.and2(e, b));
            p += 1;
        }
        if hi >= cap {
            let beyond = self.w_lt_const(i, &cap);
            let nb = self.not(beyond);
            terms.push(self.and2(nb, y.sign()));
        }
        self.or(terms)
    }

    /// Bitwise `s ? a : b`.
    pub fn w_mux(&mut self, s: Arg, a: &Word, b: &Word) -> Word {
        match s {
            Arg::Const(true) => return a.clone(),
            Arg::Const(false) => return b.clone(),
            _ => {}
        }
        let w = a.width().max(b.width());
        let bits = (0..w).map(|i| self.mux(s, a.bit(i), b.bit(i))).collect();
        Word { bits, lo: a.lo.clone().min(b.lo.clone()), hi: a.hi.clone().max(b.hi.clone()) }
    }

    /// `OR_k (sel_k AND words_k)` for a one-hot selector.
    pub fn w_select(&mut self, sel: &[Arg], words: &[Word]) -> Word {
        assert_eq!(sel.len(), words.len());
        let live: Vec<usize> = (0..sel.len()).filter(|&k| sel[k] != Arg::Const(false)).collect();
        if live.is_empty() {
            return Word::from_i64(0);
        }
        let w = live.iter().map(|&k| words[k].width()).max().unwrap();
        let bits = (0..w)
            .map(|i| {
                let terms: Vec<Arg> = live.iter().map(|&k| self.and2(sel[k], words[k].bit(i))).collect();
                self.or(terms)
            })
            .collect();
        let lo = live.iter().map(|&k| words[k].lo.clone()).min().unwrap();
        let hi = live.iter().map(|&k| words[k].hi.clone()).max().unwrap();
        Word { bits, lo, hi }
    }
}

fn bit_const(p: &Int, y: &Word) -> Arg {
    if p.is_negative() {
        return Arg::Const(false);
    }
    match p.to_usize() {
        Some(i) => y.bit(i),
        None => y.sign(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Circuit;
    use proptest::prelude::*;

    fn value(bits: &[bool]) -> i64 {
        let mut v = 0i64;
        for (i, b) in bits.iter().enumerate() {
            if *b {
                v |= 1 << i;
            }
        }
        if *bits.last().unwrap() {
            v -= 1 << bits.len();
        }
        v
    }

    // Builds a two-operand circuit over signed 5-bit inputs and checks it
    // against `f` on all operand pairs.
    fn check2(mode: FaninMode, op: impl Fn(&mut Builder, &Word, &Word) -> Word, f: impl Fn(i64, i64) -> i64) {
        let w = 5;
        let mut b = Builder::new(2 * w, mode, mode == FaninMode::Unbounded, false);
        let x = Word { bits: (0..w).map(|i| b.input(i)).collect(), lo: Int::from(-16), hi: Int::from(15) };
        let y = Word { bits: (0..w).map(|i| b.input(w + i)).collect(), lo: Int::from(-16), hi: Int::from(15) };
        let r = op(&mut b, &x, &y);
        let (lo, hi) = (r.lo.clone(), r.hi.clone());
        let c: Circuit = b.finish(r.bits);
        for v in 0u32..(1 << (2 * w)) {
            let inp: Vec<bool> = (0..2 * w).map(|i| (v >> i) & 1 == 1).collect();
            let xv = value(&inp[..w]);
            let yv = value(&inp[w..]);
            let got = value(&c.eval(&inp).unwrap());
            let want = f(xv, yv);
            assert_eq!(got, want, "{xv} {yv}");
            assert!(Int::from(want) >= lo && Int::from(want) <= hi);
        }
    }

    #[test]
    fn adders_in_both_modes() {
        for mode in [FaninMode::Unbounded, FaninMode::Bounded2] {
            check2(mode, |b, x, y| b.w_add(x, y), |x, y| x + y);
            check2(mode, |b, x, y| b.w_sub(x, y), |x, y| x - y);
            check2(mode, |b, x, y| b.w_mul(x, y), |x, y| x * y);
            check2(mode, |b, x, _| b.w_mul_const(x, &Int::from(-3)), |x, _| -3 * x);
            check2(mode, |_, x, _| x.shr(1), |x, _| x.div_euclid(2));
            check2(mode, |b, x, _| Word::boolean(b.w_sg(x)), |x, _| (x > 0) as i64);
            check2(mode, |b, x, y| Word::boolean(b.w_bit_var(x, y)), |x, y| if x < 0 { 0 } else { (y >> x.min(62)) & 1 });
            check2(mode, |b, x, _| Word::boolean(b.w_lt_const(x, &Int::from(3))), |x, _| (x < 3) as i64);
            check2(mode, |b, x, _| Word::boolean(b.w_eq_const(x, &Int::from(-2))), |x, _| (x == -2) as i64);
            check2(mode, |b, x, y| { let s = b.w_sg(y); b.w_mux(s, x, y) }, |x, y| if y > 0 { x } else { y });
        }
    }

    #[test]
    fn length_encoder() {
        for mode in [FaninMode::Unbounded, FaninMode::Bounded2] {
            let mut b = Builder::new(6, mode, false, false);
            let x = Word::unsigned((0..6).map(|i| b.input(i)).collect());
            let l = b.w_len(&x);
            let c = b.finish(l.bits);
            for v in 0u32..64 {
                let inp: Vec<bool> = (0..6).map(|i| (v >> i) & 1 == 1).collect();
                assert_eq!(value(&c.eval(&inp).unwrap()), (32 - v.leading_zeros()) as i64);
            }
        }
    }

    proptest! {
        #[test]
        fn constants_round_trip(v in any::<i64>()) {
            let w = Word::constant(&Int::from(v));
            prop_assert_eq!(w.as_const(), Some(Int::from(v)));
            prop_assert_eq!(w.width(), tc_bits(&Int::from(v)));
        }

        #[test]
        fn constant_arithmetic_folds(a in -1000i64..1000, b in -1000i64..1000) {
            let mut bl = Builder::new(0, FaninMode::Unbounded, false, false);
            let (x, y) = (Word::from_i64(a), Word::from_i64(b));
            prop_assert_eq!(bl.w_add(&x, &y).as_const(), Some(Int::from(a + b)));
            prop_assert_eq!(bl.w_mul(&x, &y).as_const(), Some(Int::from(a * b)));
        }
    }
}
