//! Text format for circuits:
//!
//! ```text
//! circ v1 inputs=2 mode=unbounded
//! g0 = AND(in0, in1)
//! g1 = TH[2](in0, in1, g0)
//! outputs = g1, g0
//! ```
//!
//! `IN[i]()` and `CONST[b]()` declare source gates, `TH[k]` and
//! `MACRO[name]` carry their parameter in brackets. Arguments are `g<id>`,
//! `in<index>`, `const0` or `const1`. Ids count up from 0 and may only refer
//! backwards.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ir::{Arg, Circuit, FaninMode, Gate, Op};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {col}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub fn serialize(c: &Circuit) -> String {
    let mut s = String::new();
    writeln!(s, "circ v1 inputs={} mode={}", c.n_inputs, c.mode.keyword()).unwrap();
    for (id, g) in c.gates.iter().enumerate() {
        let head = match &g.op {
            Op::In(i) => format!("IN[{i}]"),
            Op::Const(b) => format!("CONST[{}]", *b as u8),
            Op::Th(k) => format!("TH[{k}]"),
            Op::Macro(name) => format!("MACRO[{name}]"),
            op => op.kind().to_string(),
        };
        writeln!(s, "g{id} = {head}({})", join(&g.args)).unwrap();
    }
    writeln!(s, "outputs = {}", join(&c.outputs)).unwrap();
    s
}

fn join(args: &[Arg]) -> String {
    args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn deserialize(text: &str) -> Result<Circuit, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines.next().ok_or(FormatError { line: 1, col: 1, message: "empty input".into() })?;
    let (n_inputs, mode) = parse_header(ln, header)?;
    let mut c = Circuit { n_inputs, mode, gates: vec![], outputs: vec![] };
    let mut saw_outputs = false;
    for (ln, line) in lines {
        if saw_outputs {
            return Err(err(ln, 1, "text after the outputs line"));
        }
        let mut cur = Cursor { line: ln, text: line, pos: 0 };
        cur.skip_ws();
        if cur.rest().starts_with("outputs") {
            cur.pos += "outputs".len();
            cur.expect("=")?;
            c.outputs = cur.arg_list(&c, None)?;
            cur.end()?;
            saw_outputs = true;
            continue;
        }
        let id_col = cur.col();
        cur.expect("g")?;
        let id = cur.number()?;
        if id != c.gates.len() {
            return Err(err(ln, id_col, format!("expected gate id g{}, found g{id}", c.gates.len())));
        }
        cur.expect("=")?;
        let op = cur.op(n_inputs)?;
        cur.expect("(")?;
        let args = cur.arg_list(&c, Some(id))?;
        cur.expect(")")?;
        cur.end()?;
        let arity_ok = match op {
            Op::In(_) | Op::Const(_) => args.is_empty(),
            Op::Not => args.len() == 1,
            _ => true,
        };
        if !arity_ok {
            return Err(err(ln, id_col, format!("wrong number of arguments for {}", op.kind())));
        }
        c.gates.push(Gate { op, args });
    }
    if !saw_outputs {
        return Err(err(text.lines().count().max(1), 1, "missing outputs line"));
    }
    Ok(c)
}

fn err(line: usize, col: usize, message: impl Into<String>) -> FormatError {
    FormatError { line, col, message: message.into() }
}

fn parse_header(ln: usize, line: &str) -> Result<(usize, FaninMode), FormatError> {
    let mut cur = Cursor { line: ln, text: line, pos: 0 };
    cur.expect("circ")?;
    cur.expect("v1")?;
    cur.expect("inputs=")?;
    let n = cur.number()?;
    cur.expect("mode=")?;
    let col = cur.col();
    let mode = if cur.rest().starts_with("bounded2") {
        cur.pos += "bounded2".len();
        FaninMode::Bounded2
    } else if cur.rest().starts_with("unbounded") {
        cur.pos += "unbounded".len();
        FaninMode::Unbounded
    } else {
        return Err(err(ln, col, "mode must be bounded2 or unbounded"));
    };
    cur.end()?;
    Ok((n, mode))
}

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> FormatError {
        err(self.line, self.col(), message)
    }

    fn expect(&mut self, tok: &str) -> Result<(), FormatError> {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    fn end(&mut self) -> Result<(), FormatError> {
        self.skip_ws();
        if self.rest().is_empty() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing text"))
        }
    }

    fn number(&mut self) -> Result<usize, FormatError> {
        let digits = self.rest().bytes().take_while(|b| b.is_ascii_digit()).count();
        if digits == 0 {
            return Err(self.error("expected a number"));
        }
        let v = self.rest()[..digits].parse().map_err(|_| self.error("number out of range"))?;
        self.pos += digits;
        Ok(v)
    }

    fn bracket(&mut self) -> Result<&'a str, FormatError> {
        self.expect("[")?;
        let close = self.rest().find(']').ok_or_else(|| self.error("unclosed `[`"))?;
        let inner = &self.rest()[..close];
        self.pos += close + 1;
        Ok(inner)
    }

    fn op(&mut self, n_inputs: usize) -> Result<Op, FormatError> {
        self.skip_ws();
        let col = self.col();
        let word_len = self.rest().bytes().take_while(|b| b.is_ascii_uppercase()).count();
        let word = self.rest()[..word_len].to_string();
        self.pos += word_len;
        let line = self.line;
        let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(line, col, format!("bad {what} `{s}`")));
        Ok(match word.as_str() {
            "NOT" => Op::Not,
            "AND" => Op::And,
            "OR" => Op::Or,
            "XOR" => Op::Xor,
            "TH" => Op::Th(num(self.bracket()?, "threshold")?),
            "IN" => {
                let i = num(self.bracket()?, "input index")?;
                if i >= n_inputs {
                    return Err(err(self.line, col, format!("input index {i} out of range")));
                }
                Op::In(i)
            }
            "CONST" => match self.bracket()? {
                "0" => Op::Const(false),
                "1" => Op::Const(true),
                other => return Err(err(self.line, col, format!("bad constant `{other}`"))),
            },
            "MACRO" => {
                let name = self.bracket()?;
                if name.is_empty() {
                    return Err(err(self.line, col, "empty macro name"));
                }
                Op::Macro(name.to_string())
            }
            _ => return Err(err(self.line, col, format!("unknown operator `{word}`"))),
        })
    }

    /// Comma-separated arguments up to `)` or end of line.
    fn arg_list(&mut self, c: &Circuit, current: Option<usize>) -> Result<Vec<Arg>, FormatError> {
        let mut out = Vec::new();
        self.skip_ws();
        if self.rest().is_empty() || self.rest().starts_with(')') {
            return Ok(out);
        }
        loop {
            self.skip_ws();
            let col = self.col();
            let a = if self.rest().starts_with("const") {
                self.pos += 5;
                match self.number()? {
                    0 => Arg::Const(false),
                    1 => Arg::Const(true),
                    _ => return Err(err(self.line, col, "constant must be 0 or 1")),
                }
            } else if self.rest().starts_with("in") {
                self.pos += 2;
                let i = self.number()?;
                if i >= c.n_inputs {
                    return Err(err(self.line, col, format!("input in{i} out of range")));
                }
                Arg::Input(i)
            } else if self.rest().starts_with('g') {
                self.pos += 1;
                let g = self.number()?;
                let limit = current.unwrap_or(c.gates.len());
                if g >= limit {
                    return Err(err(self.line, col, format!("reference to g{g} is not to an earlier gate")));
                }
                Arg::Gate(g)
            } else {
                return Err(self.error("expected an argument"));
            };
            out.push(a);
            self.skip_ws();
            if self.rest().starts_with(',') {
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_circuit(rng: &mut ChaCha8Rng) -> Circuit {
        let n_inputs = rng.gen_range(0..6);
        let mode = if rng.gen_bool(0.5) { FaninMode::Bounded2 } else { FaninMode::Unbounded };
        let mut c = Circuit { n_inputs, mode, gates: vec![], outputs: vec![] };
        let n_gates = rng.gen_range(0..30);
        for id in 0..n_gates {
            let arg = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
                0 if id > 0 => Arg::Gate(rng.gen_range(0..id)),
                1 if n_inputs > 0 => Arg::Input(rng.gen_range(0..n_inputs)),
                _ => Arg::Const(rng.gen_bool(0.5)),
            };
            let op = match rng.gen_range(0..8) {
                0 if n_inputs > 0 => Op::In(rng.gen_range(0..n_inputs)),
                1 => Op::Const(rng.gen_bool(0.5)),
                2 => Op::Not,
                3 => Op::And,
                4 => Op::Or,
                5 => Op::Xor,
                6 => Op::Th(rng.gen_range(0..5)),
                _ => Op::Macro(format!("M{}/x", rng.gen_range(0..9))),
            };
            let args = match op {
                Op::In(_) | Op::Const(_) => vec![],
                Op::Not => vec![arg(rng)],
                _ => (0..rng.gen_range(0..5)).map(|_| arg(rng)).collect(),
            };
            c.gates.push(Gate { op, args });
        }
        c.outputs = (0..rng.gen_range(0..5))
            .map(|_| match rng.gen_range(0..3) {
                0 if n_gates > 0 => Arg::Gate(rng.gen_range(0..n_gates)),
                1 if n_inputs > 0 => Arg::Input(rng.gen_range(0..n_inputs)),
                _ => Arg::Const(rng.gen_bool(0.5)),
            })
            .collect();
        c
    }

    #[test]
    fn round_trip_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let c = random_circuit(&mut rng);
            let text = serialize(&c);
            let back = deserialize(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            assert_eq!(back, c);
            assert_eq!(serialize(&back), text);
        }
    }

    #[test]
    fn rejects_forward_references() {
        let e = deserialize("circ v1 inputs=1 mode=unbounded\ng0 = AND(in0, g1)\ng1 = NOT(in0)\noutputs = g0\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 15));
        let e = deserialize("circ v1 inputs=1 mode=unbounded\ng1 = NOT(in0)\noutputs = g1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = deserialize("circ v1 inputs=1 mode=unbounded\noutputs = g0\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            "",
            "circ v2 inputs=1 mode=unbounded\noutputs =\n",
            "circ v1 inputs=1 mode=wide\noutputs =\n",
            "circ v1 inputs=1 mode=unbounded\ng0 = FOO(in0)\noutputs = g0\n",
            "circ v1 inputs=1 mode=unbounded\ng0 = AND(in3)\noutputs = g0\n",
            "circ v1 inputs=1 mode=unbounded\ng0 = NOT(in0, in0)\noutputs = g0\n",
            "circ v1 inputs=1 mode=unbounded\ng0 = AND(in0\noutputs = g0\n",
            "circ v1 inputs=1 mode=unbounded\ng0 = AND(in0)\n",
            "circ v1 inputs=1 mode=unbounded\noutputs = const2\n",
        ] {
            assert!(deserialize(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn empty_lists() {
        let c = Circuit { n_inputs: 0, mode: FaninMode::Unbounded, gates: vec![Gate { op: Op::And, args: vec![] }], outputs: vec![] };
        let text = serialize(&c);
        assert_eq!(text, "circ v1 inputs=0 mode=unbounded\ng0 = AND()\noutputs = \n");
        assert_eq!(deserialize(&text).unwrap(), c);
    }
}
