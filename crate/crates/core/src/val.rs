//! Evaluator values: machine integers while they fit, [`Int`] otherwise.
//! Every operation agrees with the corresponding function in `basis`.

use num_traits::{Signed, ToPrimitive};

use crate::basis::{self, Int};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Val {
    S(i64),
    B(Box<Int>),
}

use Val::{B, S};

impl Val {
    pub fn of(v: &Int) -> Val {
        v.to_i64().map_or_else(|| B(Box::new(v.clone())), S)
    }

    fn norm(v: Int) -> Val {
        v.to_i64().map_or_else(|| B(Box::new(v)), S)
    }

    pub fn int(self) -> Int {
        match self {
            S(a) => Int::from(a),
            B(a) => *a,
        }
    }

    fn big(&self) -> Int {
        match self {
            S(a) => Int::from(*a),
            B(a) => (**a).clone(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            S(a) => *a < 0,
            B(a) => a.is_negative(),
        }
    }

    pub fn add(self, o: Val) -> Val {
        match (&self, &o) {
            (S(a), S(b)) => a.checked_add(*b).map_or_else(|| B(Box::new(Int::from(*a) + b)), S),
            _ => Val::norm(self.int() + o.int()),
        }
    }

    pub fn sub(self, o: Val) -> Val {
        match (&self, &o) {
            (S(a), S(b)) => a.checked_sub(*b).map_or_else(|| B(Box::new(Int::from(*a) - b)), S),
            _ => Val::norm(self.int() - o.int()),
        }
    }

    pub fn mul(self, o: Val) -> Val {
        match (&self, &o) {
            (S(a), S(b)) => a.checked_mul(*b).map_or_else(|| B(Box::new(Int::from(*a) * b)), S),
            _ => Val::norm(self.int() * o.int()),
        }
    }

    pub fn div2(self) -> Val {
        match self {
            // Arithmetic shift rounds toward negative infinity.
            S(a) => S(a >> 1),
            B(a) => Val::norm(basis::div2(&a)),
        }
    }

    pub fn sg(&self) -> Val {
        S(i64::from(!self.is_negative() && *self != S(0)))
    }

    pub fn cosg(&self) -> Val {
        S(1 - self.sg_bit())
    }

    fn sg_bit(&self) -> i64 {
        i64::from(!self.is_negative() && *self != S(0))
    }

    /// Bit length of a nonnegative value.
    pub fn len(&self) -> u64 {
        match self {
            S(a) => 64 - (*a as u64).leading_zeros() as u64,
            B(a) => basis::len(a),
        }
    }

    pub fn bit(&self, y: &Val) -> Val {
        match (self, y) {
            (S(i), _) if *i < 0 => S(0),
            (S(i), S(y)) => S(if *i >= 63 { i64::from(*y < 0) } else { (y >> i) & 1 }),
            _ => Val::norm(basis::bit(&self.big(), &y.big())),
        }
    }
}
