//! Gate-level circuits: representation, evaluation, metrics and gate-set
//! validation.

use std::collections::BTreeMap;
use std::fmt;

use lode_core::basis::Int;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    In(usize),
    Const(bool),
    Not,
    And,
    Or,
    /// Sum of the arguments modulo 2.
    Xor,
    /// 1 iff at least `k` arguments are 1.
    Th(usize),
    /// Non-primitive block, evaluated by name (see [`eval_macro`]).
    Macro(String),
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::In(_) => "IN",
            Op::Const(_) => "CONST",
            Op::Not => "NOT",
            Op::And => "AND",
            Op::Or => "OR",
            Op::Xor => "XOR",
            Op::Th(_) => "TH",
            Op::Macro(_) => "MACRO",
        }
    }

    fn is_source(&self) -> bool {
        matches!(self, Op::In(_) | Op::Const(_))
    }
}

/// A gate argument: an earlier gate, a circuit input, or a constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Gate(usize),
    Input(usize),
    Const(bool),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Gate(g) => write!(f, "g{g}"),
            Arg::Input(i) => write!(f, "in{i}"),
            Arg::Const(b) => write!(f, "const{}", *b as u8),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub op: Op,
    pub args: Vec<Arg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FaninMode {
    Bounded2,
    Unbounded,
}

impl FaninMode {
    pub fn keyword(self) -> &'static str {
        match self {
            FaninMode::Bounded2 => "bounded2",
            FaninMode::Unbounded => "unbounded",
        }
    }
}

/// Gates are topologically ordered: gate `i` only reads gates `< i`.
/// Outputs are listed least significant first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub n_inputs: usize,
    pub mode: FaninMode,
    pub gates: Vec<Gate>,
    pub outputs: Vec<Arg>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("expected {expected} input bits, got {got}")]
    InputArity { expected: usize, got: usize },
    #[error("gate g{gate}: {message}")]
    Structure { gate: usize, message: String },
    #[error("gate g{gate}: unknown macro `{name}`")]
    UnknownMacro { gate: usize, name: String },
}

impl Circuit {
    /// The circuit with no gates whose outputs are its inputs.
    pub fn identity(n: usize, mode: FaninMode) -> Circuit {
        Circuit { n_inputs: n, mode, gates: vec![], outputs: (0..n).map(Arg::Input).collect() }
    }

    /// Checks ordering, argument ranges and operator arities.
    pub fn check_structure(&self) -> Result<(), CircuitError> {
        let arg_ok = |id: usize, a: &Arg| match a {
            Arg::Gate(g) if *g >= id => Err(format!("argument g{g} is not an earlier gate")),
            Arg::Input(i) if *i >= self.n_inputs => Err(format!("input in{i} out of range")),
            _ => Ok(()),
        };
        for (id, g) in self.gates.iter().enumerate() {
            let err = |message: String| CircuitError::Structure { gate: id, message };
            for a in &g.args {
                arg_ok(id, a).map_err(err)?;
            }
            match g.op {
                Op::In(i) if i >= self.n_inputs => return Err(err(format!("input {i} out of range"))),
                Op::In(_) | Op::Const(_) if !g.args.is_empty() => return Err(err("source gate with arguments".into())),
                Op::Not if g.args.len() != 1 => return Err(err("NOT takes one argument".into())),
                _ => {}
            }
        }
        for a in &self.outputs {
            arg_ok(self.gates.len(), a).map_err(|message| CircuitError::Structure { gate: self.gates.len(), message })?;
        }
        Ok(())
    }

    pub fn eval(&self, input: &[bool]) -> Result<Vec<bool>, CircuitError> {
        if input.len() != self.n_inputs {
            return Err(CircuitError::InputArity { expected: self.n_inputs, got: input.len() });
        }
        let mut vals = Vec::with_capacity(self.gates.len());
        for (id, g) in self.gates.iter().enumerate() {
            let get = |a: &Arg| match *a {
                Arg::Gate(j) => vals[j],
                Arg::Input(i) => input[i],
                Arg::Const(b) => b,
            };
            let v = match &g.op {
                Op::In(i) => input[*i],
                Op::Const(b) => *b,
                Op::Not => !get(&g.args[0]),
                Op::And => g.args.iter().all(get),
                Op::Or => g.args.iter().any(get),
                Op::Xor => g.args.iter().filter(|a| get(a)).count() % 2 == 1,
                Op::Th(k) => g.args.iter().filter(|a| get(a)).count() >= *k,
                Op::Macro(name) => {
                    let bits: Vec<bool> = g.args.iter().map(get).collect();
                    eval_macro(name, &bits).ok_or_else(|| CircuitError::UnknownMacro { gate: id, name: name.clone() })?
                }
            };
            vals.push(v);
        }
        Ok(self
            .outputs
            .iter()
            .map(|a| match *a {
                Arg::Gate(j) => vals[j],
                Arg::Input(i) => input[i],
                Arg::Const(b) => b,
            })
            .collect())
    }

    /// Evaluates 64 inputs at once: bit `l` of `lanes[i]` is input `i` of
    /// lane `l`, and likewise for the returned outputs.
    pub fn eval_batch(&self, lanes: &[u64]) -> Result<Vec<u64>, CircuitError> {
        if lanes.len() != self.n_inputs {
            return Err(CircuitError::InputArity { expected: self.n_inputs, got: lanes.len() });
        }
        let word = |b: bool| if b { u64::MAX } else { 0 };
        let mut vals: Vec<u64> = Vec::with_capacity(self.gates.len());
        for (id, g) in self.gates.iter().enumerate() {
            let get = |a: &Arg| match *a {
                Arg::Gate(j) => vals[j],
                Arg::Input(i) => lanes[i],
                Arg::Const(b) => word(b),
            };
            let v = match &g.op {
                Op::In(i) => lanes[*i],
                Op::Const(b) => word(*b),
                Op::Not => !get(&g.args[0]),
                Op::And => g.args.iter().fold(u64::MAX, |acc, a| acc & get(a)),
                Op::Or => g.args.iter().fold(0, |acc, a| acc | get(a)),
                Op::Xor => g.args.iter().fold(0, |acc, a| acc ^ get(a)),
                Op::Th(k) => threshold_lanes(*k, g.args.iter().map(get)),
                Op::Macro(name) => {
                    let args: Vec<u64> = g.args.iter().map(get).collect();
                    let mut out = 0u64;
                    for lane in 0..64 {
                        let bits: Vec<bool> = args.iter().map(|w| (w >> lane) & 1 == 1).collect();
                        let b = eval_macro(name, &bits)
                            .ok_or_else(|| CircuitError::UnknownMacro { gate: id, name: name.clone() })?;
                        out |= (b as u64) << lane;
                    }
                    out
                }
            };
            vals.push(v);
        }
        Ok(self
            .outputs
            .iter()
            .map(|a| match *a {
                Arg::Gate(j) => vals[j],
                Arg::Input(i) => lanes[i],
                Arg::Const(b) => word(b),
            })
            .collect())
    }

    /// Longest input-to-output path, counting every non-source gate. Gates
    /// fed only by constants lie on no such path.
    pub fn depth(&self) -> usize {
        let levels = self.levels();
        self.outputs.iter().filter_map(|a| arg_level(&levels, a)).max().unwrap_or(0)
    }

    /// Gate ids along one longest path, from the input side.
    pub fn critical_path(&self) -> Vec<usize> {
        let levels = self.levels();
        let mut cur = self.outputs.iter().filter(|a| arg_level(&levels, a).is_some()).max_by_key(|a| arg_level(&levels, a)).copied();
        let mut path = Vec::new();
        while let Some(Arg::Gate(g)) = cur {
            path.push(g);
            cur = self.gates[g].args.iter().filter(|a| arg_level(&levels, a).is_some()).max_by_key(|a| arg_level(&levels, a)).copied();
        }
        path.reverse();
        path
    }

    fn levels(&self) -> Vec<Option<usize>> {
        let mut lv: Vec<Option<usize>> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let l = match g.op {
                Op::In(_) => Some(0),
                Op::Const(_) => None,
                _ => g.args.iter().filter_map(|a| arg_level(&lv, a)).max().map(|d| d + 1),
            };
            lv.push(l);
        }
        lv
    }

    /// Number of gates other than inputs and constants.
    pub fn size(&self) -> usize {
        self.gates.iter().filter(|g| !g.op.is_source()).count()
    }

    pub fn histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut h = BTreeMap::new();
        for g in self.gates.iter().filter(|g| !g.op.is_source()) {
            *h.entry(g.op.kind()).or_insert(0) += 1;
        }
        h
    }

    pub fn max_fanin(&self) -> usize {
        self.gates.iter().map(|g| g.args.len()).max().unwrap_or(0)
    }

    pub fn macro_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g.op, Op::Macro(_))).count()
    }
}

fn arg_level(lv: &[Option<usize>], a: &Arg) -> Option<usize> {
    match *a {
        Arg::Gate(j) => lv[j],
        Arg::Input(_) => Some(0),
        Arg::Const(_) => None,
    }
}

/// Per-lane "at least k ones" via bit-sliced counters.
fn threshold_lanes(k: usize, args: impl Iterator<Item = u64>) -> u64 {
    if k == 0 {
        return u64::MAX;
    }
    // planes[j] holds bit j of each lane's count; saturates at 2^planes.len().
    let width = (usize::BITS - k.leading_zeros()) as usize + 1;
    let mut planes = vec![0u64; width];
    let mut overflow = 0u64;
    for a in args {
        let mut carry = a;
        for p in planes.iter_mut() {
            let next = *p & carry;
            *p ^= carry;
            carry = next;
        }
        overflow |= carry;
    }
    // count >= k, compared from the top plane down.
    let mut gt = overflow;
    let mut eq = !overflow;
    for j in (0..width).rev() {
        let kb = if (k >> j) & 1 == 1 { u64::MAX } else { 0 };
        gt |= eq & planes[j] & !kb;
        eq &= !(planes[j] ^ kb);
    }
    gt | eq
}

/// Semantics of the non-primitive gates. `ITMULT/w/n/j` reads a `w`-bit
/// two's-complement `g` followed by `n` pairs of `w`-bit words `A_u, B_u`,
/// runs `f <- f + A_u f + B_u` and returns bit `j` of the result.
pub fn eval_macro(name: &str, args: &[bool]) -> Option<bool> {
    let mut parts = name.split('/');
    if parts.next()? != "ITMULT" {
        return None;
    }
    let w: usize = parts.next()?.parse().ok()?;
    let n: usize = parts.next()?.parse().ok()?;
    let j: u64 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || args.len() != w * (1 + 2 * n) || w == 0 {
        return None;
    }
    let word = |k: usize| -> Int {
        let bits = &args[k * w..(k + 1) * w];
        let mut v = Int::zero();
        for (i, b) in bits.iter().enumerate() {
            if *b {
                v += Int::one() << i;
            }
        }
        if bits[w - 1] {
            v -= Int::one() << w;
        }
        v
    };
    let mut f = word(0);
    for u in 0..n {
        let a = word(1 + 2 * u);
        let b = word(2 + 2 * u);
        f = &f + &a * &f + b;
    }
    Some(f.bit(j))
}

/// Allowed gate kinds together with a fan-in discipline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSet {
    pub name: &'static str,
    pub mode: FaninMode,
    pub xor: bool,
    pub th: bool,
}

impl GateSet {
    pub fn ac0() -> GateSet {
        GateSet { name: "AC0", mode: FaninMode::Unbounded, xor: false, th: false }
    }

    pub fn acc2() -> GateSet {
        GateSet { name: "ACC2", mode: FaninMode::Unbounded, xor: true, th: false }
    }

    pub fn tc0() -> GateSet {
        GateSet { name: "TC0", mode: FaninMode::Unbounded, xor: false, th: true }
    }

    pub fn nc1() -> GateSet {
        GateSet { name: "NC1", mode: FaninMode::Bounded2, xor: false, th: false }
    }
}

/// Lists every violation of `set`; an empty list means the circuit is in
/// the gate set. Macro gates are always reported.
pub fn validate(c: &Circuit, set: &GateSet) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = c.check_structure() {
        out.push(e.to_string());
    }
    if c.mode != set.mode {
        out.push(format!("circuit declares {} fan-in, {} requires {}", c.mode.keyword(), set.name, set.mode.keyword()));
    }
    for (id, g) in c.gates.iter().enumerate() {
        match &g.op {
            Op::Xor if !set.xor => out.push(format!("g{id}: XOR not allowed in {}", set.name)),
            Op::Th(_) if !set.th => out.push(format!("g{id}: TH not allowed in {}", set.name)),
            Op::Macro(name) => out.push(format!("g{id}: non-primitive MACRO {name}")),
            _ => {}
        }
        if set.mode == FaninMode::Bounded2 && matches!(g.op, Op::And | Op::Or | Op::Xor) && g.args.len() > 2 {
            out.push(format!("g{id}: fan-in {} exceeds 2", g.args.len()));
        }
    }
    out
}

/// Depth, size and gate counts of one compiled circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DepthRow {
    pub n: usize,
    pub depth: usize,
    pub size: usize,
    pub histogram: BTreeMap<&'static str, usize>,
    /// Non-primitive gates present; such circuits never validate.
    pub macros: usize,
}

impl DepthRow {
    pub fn of(n: usize, c: &Circuit) -> DepthRow {
        DepthRow { n, depth: c.depth(), size: c.size(), histogram: c.histogram(), macros: c.macro_count() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate(op: Op, args: Vec<Arg>) -> Gate {
        Gate { op, args }
    }

    fn over(op: Op, n: usize) -> Circuit {
        Circuit {
            n_inputs: n,
            mode: FaninMode::Unbounded,
            gates: vec![gate(op, (0..n).map(Arg::Input).collect())],
            outputs: vec![Arg::Gate(0)],
        }
    }

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn gate_semantics() {
        assert_eq!(over(Op::Xor, 4).eval(&bits("1011")).unwrap(), vec![true]);
        assert_eq!(over(Op::Th(3), 4).eval(&bits("1011")).unwrap(), vec![true]);
        assert_eq!(over(Op::Th(4), 4).eval(&bits("1011")).unwrap(), vec![false]);
        let id = Circuit::identity(3, FaninMode::Bounded2);
        assert_eq!(id.eval(&bits("101")).unwrap(), bits("101"));
        assert!(matches!(id.eval(&bits("1")), Err(CircuitError::InputArity { .. })));
    }

    #[test]
    fn metrics() {
        let c = over(Op::And, 8);
        assert_eq!((c.depth(), c.size()), (1, 1));
        let mut t = Circuit { n_inputs: 8, mode: FaninMode::Bounded2, gates: vec![], outputs: vec![] };
        let mut layer: Vec<Arg> = (0..8).map(Arg::Input).collect();
        while layer.len() > 1 {
            layer = layer
                .chunks(2)
                .map(|p| {
                    t.gates.push(gate(Op::And, p.to_vec()));
                    Arg::Gate(t.gates.len() - 1)
                })
                .collect();
        }
        t.outputs = layer;
        assert_eq!(t.depth(), 3);
        assert_eq!(t.size(), 7);
        assert!(validate(&t, &GateSet::nc1()).is_empty());
    }

    #[test]
    fn constant_only_gates_have_no_depth() {
        let c = Circuit {
            n_inputs: 1,
            mode: FaninMode::Unbounded,
            gates: vec![gate(Op::Not, vec![Arg::Const(true)]), gate(Op::And, vec![Arg::Gate(0), Arg::Input(0)])],
            outputs: vec![Arg::Gate(0), Arg::Gate(1)],
        };
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn validation_flags_foreign_gates() {
        let p = over(Op::Xor, 4);
        assert!(!validate(&p, &GateSet::ac0()).is_empty());
        assert!(validate(&p, &GateSet::acc2()).is_empty());
        let t = over(Op::Th(2), 4);
        assert!(!validate(&t, &GateSet::acc2()).is_empty());
        assert!(validate(&t, &GateSet::tc0()).is_empty());
        let mut b = over(Op::And, 3);
        b.mode = FaninMode::Bounded2;
        assert!(!validate(&b, &GateSet::nc1()).is_empty());
        let m = over(Op::Macro("ITMULT/1/1/0".into()), 3);
        assert!(!validate(&m, &GateSet::tc0()).is_empty());
    }

    #[test]
    fn structure_errors() {
        let c = Circuit {
            n_inputs: 1,
            mode: FaninMode::Unbounded,
            gates: vec![gate(Op::Not, vec![Arg::Gate(0)])],
            outputs: vec![Arg::Gate(0)],
        };
        assert!(c.check_structure().is_err());
    }

    #[test]
    fn batch_matches_single_lane() {
        let c = Circuit {
            n_inputs: 5,
            mode: FaninMode::Unbounded,
            gates: vec![
                gate(Op::Th(3), (0..5).map(Arg::Input).collect()),
                gate(Op::Xor, vec![Arg::Input(0), Arg::Input(3), Arg::Gate(0)]),
                gate(Op::Th(6), (0..5).map(Arg::Input).chain([Arg::Const(true)]).collect()),
                gate(Op::Not, vec![Arg::Gate(1)]),
            ],
            outputs: vec![Arg::Gate(0), Arg::Gate(2), Arg::Gate(3), Arg::Input(4)],
        };
        let lanes: Vec<u64> = (0..5).map(|i| (0u64..32).filter(|v| (v >> i) & 1 == 1).fold(0, |acc, v| acc | (1 << v))).collect();
        let out = c.eval_batch(&lanes).unwrap();
        for v in 0u64..32 {
            let inp: Vec<bool> = (0..5).map(|i| (v >> i) & 1 == 1).collect();
            let want = c.eval(&inp).unwrap();
            let got: Vec<bool> = out.iter().map(|w| (w >> v) & 1 == 1).collect();
            assert_eq!(got, want, "{v}");
        }
    }

    #[test]
    fn itmult_macro() {
        // w = 3, n = 1: g = 2, A = 1, B = -1 -> 2 + 2 - 1 = 3 = 0b011
        let mut args = vec![false, true, false];
        args.extend([true, false, false]);
        args.extend([true, true, true]);
        assert_eq!(eval_macro("ITMULT/3/1/0", &args), Some(true));
        assert_eq!(eval_macro("ITMULT/3/1/1", &args), Some(true));
        assert_eq!(eval_macro("ITMULT/3/1/2", &args), Some(false));
        assert_eq!(eval_macro("ITMULT/3/2/0", &args), None);
        assert_eq!(eval_macro("OTHER", &args), None);
    }
}
