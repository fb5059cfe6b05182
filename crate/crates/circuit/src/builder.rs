//! Circuit construction with hash-consing and constant folding.
//!
//! The builder knows the target fan-in mode and which gate kinds it may
//! emit: in bounded mode wide gates become balanced trees, and XOR is
//! rewritten into AND/OR/NOT (or thresholds) when it is not available.

use std::collections::{HashMap, HashSet};

use crate::ir::{Arg, Circuit, FaninMode, Gate, Op};

pub struct Builder {
    n_inputs: usize,
    mode: FaninMode,
    allow_xor: bool,
    allow_th: bool,
    gates: Vec<Gate>,
    cons: HashMap<Gate, usize>,
    /// Gates built by [`Builder::raw`]; never spliced into a parent.
    raw: HashSet<usize>,
    uniform: bool,
}

impl Builder {
    pub fn new(n_inputs: usize, mode: FaninMode, allow_xor: bool, allow_th: bool) -> Builder {
        Builder { n_inputs, mode, allow_xor, allow_th, gates: vec![], cons: HashMap::new(), raw: HashSet::new(), uniform: false }
    }

    /// Uniform mode keeps constant folding but otherwise emits every gate
    /// as asked: no splicing, no single-argument collapse, no cancelling of
    /// double negations. The depth of a signal then follows the shape of
    /// the construction rather than which operands happened to fold.
    pub fn uniform(mut self) -> Builder {
        self.uniform = true;
        self
    }

    pub fn mode(&self) -> FaninMode {
        self.mode
    }

    pub fn allows_th(&self) -> bool {
        self.allow_th
    }

    pub fn allows_xor(&self) -> bool {
        self.allow_xor
    }

    pub fn input(&self, i: usize) -> Arg {
        assert!(i < self.n_inputs, "input {i} out of range");
        Arg::Input(i)
    }

    pub fn constant(&self, b: bool) -> Arg {
        Arg::Const(b)
    }

    fn push(&mut self, op: Op, args: Vec<Arg>) -> Arg {
        let g = Gate { op, args };
        if let Some(&id) = self.cons.get(&g) {
            return Arg::Gate(id);
        }
        let id = self.gates.len();
        self.cons.insert(g.clone(), id);
        self.gates.push(g);
        Arg::Gate(id)
    }

    /// A gate emitted exactly as given: no folding, no splicing. Used where
    /// uniform depth matters more than size.
    pub fn raw(&mut self, op: Op, args: Vec<Arg>) -> Arg {
        let a = self.push(op, args);
        if let Arg::Gate(id) = a {
            self.raw.insert(id);
        }
        a
    }

    fn gate(&self, a: Arg) -> Option<&Gate> {
        match a {
            Arg::Gate(id) => Some(&self.gates[id]),
            _ => None,
        }
    }

    /// Splits off a top-level negation.
    fn literal(&self, a: Arg) -> (Arg, bool) {
        match self.gate(a) {
            Some(Gate { op: Op::Not, args }) => (args[0], true),
            _ => (a, false),
        }
    }

    pub fn not(&mut self, a: Arg) -> Arg {
        match a {
            Arg::Const(b) => Arg::Const(!b),
            _ if self.uniform => self.push(Op::Not, vec![a]),
            _ => match self.literal(a) {
                (inner, true) => inner,
                _ => self.push(Op::Not, vec![a]),
            },
        }
    }

    pub fn and(&mut self, args: impl IntoIterator<Item = Arg>) -> Arg {
        self.junction(Op::And, args.into_iter().collect())
    }

    pub fn or(&mut self, args: impl IntoIterator<Item = Arg>) -> Arg {
        self.junction(Op::Or, args.into_iter().collect())
    }

    pub fn and2(&mut self, a: Arg, b: Arg) -> Arg {
        self.and([a, b])
    }

    pub fn or2(&mut self, a: Arg, b: Arg) -> Arg {
        self.or([a, b])
    }

    fn junction(&mut self, op: Op, args: Vec<Arg>) -> Arg {
        let (unit, zero) = if op == Op::And { (true, false) } else { (false, true) };
        if self.uniform {
            let mut flat = Vec::with_capacity(args.len());
            for a in args {
                match a {
                    Arg::Const(b) if b == unit => {}
                    Arg::Const(_) => return Arg::Const(zero),
                    _ => flat.push(a),
                }
            }
            flat.sort();
            flat.dedup();
            if flat.is_empty() {
                return Arg::Const(unit);
            }
            return self.push(op, flat);
        }
        let mut flat = Vec::with_capacity(args.len());
        let mut stack = args;
        stack.reverse();
        while let Some(a) = stack.pop() {
            match a {
                Arg::Const(b) if b == unit => {}
                Arg::Const(_) => return Arg::Const(zero),
                Arg::Gate(id) if self.mode == FaninMode::Unbounded && !self.raw.contains(&id) && self.gates[id].op == op => {
                    stack.extend(self.gates[id].args.iter().rev().copied());
                }
                _ => flat.push(a),
            }
        }
        flat.sort();
        flat.dedup();
        for &a in &flat {
            if let (inner, true) = self.literal(a) {
                if flat.binary_search(&inner).is_ok() {
                    return Arg::Const(zero);
                }
            }
        }
        self.tree(op, flat, unit)
    }

    /// One gate in unbounded mode, a balanced binary tree otherwise.
    fn tree(&mut self, op: Op, args: Vec<Arg>, empty: bool) -> Arg {
        match args.len() {
            0 => Arg::Const(empty),
            1 => args[0],
            _ if self.mode == FaninMode::Unbounded => self.push(op, args),
            _ => {
                let mut layer = args;
                while layer.len() > 1 {
                    let mut next = Vec::with_capacity(layer.len().div_ceil(2));
                    for pair in layer.chunks(2) {
                        next.push(if pair.len() == 2 {
                            let mut p = pair.to_vec();
                            p.sort();
                            self.push(op.clone(), p)
                        } else {
                            pair[0]
                        });
                    }
                    layer = next;
                }
                layer[0]
            }
        }
    }

    pub fn xor(&mut self, args: impl IntoIterator<Item = Arg>) -> Arg {
        if self.uniform {
            return self.xor_uniform(args.into_iter().collect());
        }
        let mut flip = false;
        let mut flat = Vec::new();
        let mut stack: Vec<Arg> = args.into_iter().collect();
        while let Some(a) = stack.pop() {
            let (a, neg) = self.literal(a);
            flip ^= neg;
            match a {
                Arg::Const(b) => flip ^= b,
                Arg::Gate(id) if self.allow_xor && self.mode == FaninMode::Unbounded && !self.raw.contains(&id) && self.gates[id].op == Op::Xor => {
                    stack.extend(self.gates[id].args.iter().copied());
                }
                _ => flat.push(a),
            }
        }
        flat.sort();
        // Equal pairs cancel.
        let mut odd: Vec<Arg> = Vec::with_capacity(flat.len());
        for a in flat {
            if odd.last() == Some(&a) {
                odd.pop();
            } else {
                odd.push(a);
            }
        }
        let r = match odd.len() {
            0 => Arg::Const(false),
            1 => odd[0],
            _ if self.allow_xor => self.tree(Op::Xor, odd, false),
            _ if self.allow_th && odd.len() > 3 => self.parity_by_threshold(&odd),
            _ if self.mode == FaninMode::Unbounded => self.parity_dnf(&odd),
            _ => {
                let mut layer = odd;
                while layer.len() > 1 {
                    let mut next = Vec::new();
                    for pair in layer.chunks(2) {
                        next.push(if pair.len() == 2 { self.parity_dnf(pair) } else { pair[0] });
                    }
                    layer = next;
                }
                layer[0]
            }
        };
        if flip {
            self.not(r)
        } else {
            r
        }
    }

    pub fn xor2(&mut self, a: Arg, b: Arg) -> Arg {
        self.xor([a, b])
    }

    fn xor_uniform(&mut self, args: Vec<Arg>) -> Arg {
        let mut flip = false;
        let mut vars = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Arg::Const(b) => flip ^= b,
                _ => vars.push(a),
            }
        }
        vars.sort();
        if vars.is_empty() {
            return Arg::Const(flip);
        }
        if self.allow_xor {
            if flip {
                vars.push(Arg::Const(true));
            }
            return self.push(Op::Xor, vars);
        }
        if self.allow_th {
            return self.parity_th_uniform(&vars, flip);
        }
        self.parity_dnf_uniform(&vars, flip)
    }

    /// Minterm form with a literal layer: positive literals pass through a
    /// one-input OR so both polarities sit at the same depth.
    fn parity_dnf_uniform(&mut self, args: &[Arg], flip: bool) -> Arg {
        if args.len() > 4 {
            let parts: Vec<Arg> = args.chunks(4).map(|c| self.parity_dnf_uniform(c, false)).collect();
            return self.parity_dnf_uniform(&parts, flip);
        }
        let k = args.len();
        let pos: Vec<Arg> = args.iter().map(|&a| self.push(Op::Or, vec![a])).collect();
        let neg: Vec<Arg> = args.iter().map(|&a| self.push(Op::Not, vec![a])).collect();
        let want = if flip { 0 } else { 1 };
        let mut terms = Vec::new();
        for m in 0u32..(1 << k) {
            if m.count_ones() % 2 == want {
                let lits: Vec<Arg> = (0..k).map(|i| if (m >> i) & 1 == 1 { pos[i] } else { neg[i] }).collect();
                terms.push(self.push(Op::And, lits));
            }
        }
        self.push(Op::Or, terms)
    }

    fn parity_th_uniform(&mut self, args: &[Arg], flip: bool) -> Arg {
        let m = args.len();
        let t: Vec<Arg> = (1..=m + 1).map(|v| self.push(Op::Th(v), args.to_vec())).collect();
        let mut terms = Vec::new();
        for v in 0..=m {
            if (v % 2 == 1) != flip {
                let nm = self.push(Op::Not, vec![t[v]]);
                let lits = if v == 0 { vec![nm] } else { vec![t[v - 1], nm] };
                terms.push(self.push(Op::And, lits));
            }
        }
        self.push(Op::Or, terms)
    }

    /// Parity as a sum of minterms, in groups of at most four.
    fn parity_dnf(&mut self, args: &[Arg]) -> Arg {
        if args.len() > 4 {
            let parts: Vec<Arg> = args.chunks(4).map(|c| self.parity_dnf(c)).collect();
            return self.parity_dnf(&parts);
        }
        let k = args.len();
        let mut terms = Vec::new();
        for m in 0u32..(1 << k) {
            if m.count_ones() % 2 == 1 {
                let lits: Vec<Arg> =
                    (0..k).map(|i| if (m >> i) & 1 == 1 { args[i] } else { self.not(args[i]) }).collect();
                terms.push(self.and(lits));
            }
        }
        self.or(terms)
    }

    /// Parity as OR over odd v of "exactly v ones".
    fn parity_by_threshold(&mut self, args: &[Arg]) -> Arg {
        let m = args.len();
        let mut terms = Vec::new();
        for v in (1..=m).step_by(2) {
            let at_least = self.th(v, args.to_vec());
            let more = self.th(v + 1, args.to_vec());
            let nm = self.not(more);
            terms.push(self.and2(at_least, nm));
        }
        self.or(terms)
    }

    /// At least `k` of `args`. Requires threshold gates unless it folds.
    pub fn th(&mut self, k: usize, args: Vec<Arg>) -> Arg {
        let mut k = k as i64;
        let mut rest = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Arg::Const(true) => k -= 1,
                Arg::Const(false) => {}
                _ => rest.push(a),
            }
        }
        if k <= 0 {
            return Arg::Const(true);
        }
        if k as usize > rest.len() {
            return Arg::Const(false);
        }
        if !(self.uniform && self.allow_th) {
            if k == 1 {
                return self.or(rest);
            }
            if k as usize == rest.len() {
                return self.and(rest);
            }
        }
        assert!(self.allow_th, "threshold gate requested in a backend without TH");
        rest.sort();
        self.push(Op::Th(k as usize), rest)
    }

    /// `s ? a : b`.
    pub fn mux(&mut self, s: Arg, a: Arg, b: Arg) -> Arg {
        if let Arg::Const(c) = s {
            return if c { a } else { b };
        }
        if self.uniform {
            if let (Arg::Const(x), Arg::Const(y)) = (a, b) {
                if x == y {
                    return a;
                }
            }
        } else if a == b {
            return a;
        }
        match (a, b) {
            _ if self.uniform => {}
            (Arg::Const(true), Arg::Const(false)) => return s,
            (Arg::Const(false), Arg::Const(true)) => return self.not(s),
            _ => {}
        }
        let ns = self.not(s);
        let l = self.and2(s, a);
        let r = self.and2(ns, b);
        self.or2(l, r)
    }

    /// Keeps only gates reachable from `outputs`, renumbered in order.
    pub fn finish(self, outputs: Vec<Arg>) -> Circuit {
        let mut live = vec![false; self.gates.len()];
        let mut stack: Vec<usize> = outputs.iter().filter_map(|a| if let Arg::Gate(g) = a { Some(*g) } else { None }).collect();
        while let Some(g) = stack.pop() {
            if live[g] {
                continue;
            }
            live[g] = true;
            for a in &self.gates[g].args {
                if let Arg::Gate(h) = a {
                    stack.push(*h);
                }
            }
        }
        let mut new_id = vec![usize::MAX; self.gates.len()];
        let mut gates = Vec::new();
        let remap = |a: Arg, new_id: &[usize]| match a {
            Arg::Gate(g) => Arg::Gate(new_id[g]),
            other => other,
        };
        for (g, gate) in self.gates.into_iter().enumerate() {
            if live[g] {
                new_id[g] = gates.len();
                let args = gate.args.into_iter().map(|a| remap(a, &new_id)).collect();
                gates.push(Gate { op: gate.op, args });
            }
        }
        let outputs = outputs.into_iter().map(|a| remap(a, &new_id)).collect();
        Circuit { n_inputs: self.n_inputs, mode: self.mode, gates, outputs }
    }
}
