//! Surface syntax for `.lode` files: lexer, recursive-descent parser and a
//! pretty-printer whose output parses back to the same tree.
//!
//! ```text
//! fun rsh(x, y) { init: y; d/dl: div2(f) - f; }
//! fun bitp(x, y) = rsh(x, y) - 2 * rsh(x + 1, y);
//! ```

use std::fmt;

use thiserror::Error;

use crate::basis::Int;
use crate::expr::Expr;
use crate::schema::{wellformed, Along, Annotation, Body, Defn, Ode, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

/// A diagnostic tied to a source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceDiagnostic {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for SourceDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

/// A parsed file with the start position of each definition.
#[derive(Clone, Debug)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    pub program: Program,
    pub spans: Vec<(String, Pos)>,
}

impl SourceFile {
    /// Parses and checks well-formedness; diagnostics carry positions.
    pub fn parse(path: &str, text: &str) -> Result<SourceFile, Vec<SourceDiagnostic>> {
        let (program, spans) = parse_unchecked(text)
            .map_err(|e| vec![SourceDiagnostic { pos: e.pos, message: e.message }])?;
        let diags = wellformed(&program);
        if !diags.is_empty() {
            return Err(diags
                .into_iter()
                .map(|d| {
                    let pos = spans.iter().find(|(n, _)| *n == d.defn).map(|s| s.1).unwrap_or(Pos { line: 1, col: 1 });
                    SourceDiagnostic { pos, message: d.to_string() }
                })
                .collect());
        }
        Ok(SourceFile { path: path.into(), text: text.into(), program, spans })
    }
}

/// Parses a program and runs the well-formedness checks.
pub fn parse_program(text: &str) -> Result<Program, Vec<SourceDiagnostic>> {
    SourceFile::parse("<input>", text).map(|s| s.program)
}

/// Parses without semantic checks.
pub fn parse_unchecked(text: &str) -> Result<(Program, Vec<(String, Pos)>), SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0 };
    let mut defs = Vec::new();
    let mut spans = Vec::new();
    while !p.at_end() {
        let pos = p.pos();
        let d = p.defn()?;
        spans.push((d.name.clone(), pos));
        defs.push(d);
    }
    Ok((Program::new(defs), spans))
}

/// Parses a single expression.
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0 };
    let e = p.expr()?;
    if !p.at_end() {
        return Err(p.error("unexpected input after expression"));
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(Int),
    Ident(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push((Tok::Int(s.parse().expect("digits")), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if "(){},;=+-*:/".contains(c) {
            i += 1;
            col += 1;
            out.push((Tok::Sym(c), pos));
        } else {
            return Err(SyntaxError { pos, message: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::End, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

const UNARY_BUILTINS: [&str; 5] = ["sg", "cosg", "div2", "len", "len2"];
const BINARY_BUILTINS: [&str; 2] = ["bit", "smash"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn at_end(&self) -> bool {
        *self.peek() == Tok::End
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError { pos: self.pos(), message: message.into() }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`, found {}", self.peek())))
        }
    }

    fn is_sym(&self, c: char) -> bool {
        *self.peek() == Tok::Sym(c)
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected {what}, found {other}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            other => Err(self.error(format!("expected `{kw}`, found {other}"))),
        }
    }

    fn defn(&mut self) -> Result<Defn, SyntaxError> {
        self.keyword("fun")?;
        let name = self.ident("a function name")?;
        self.expect_sym('(')?;
        let mut params = vec![self.ident("a parameter name")?];
        while self.is_sym(',') {
            self.bump();
            params.push(self.ident("a parameter name")?);
        }
        self.expect_sym(')')?;
        if self.is_sym('=') {
            self.bump();
            let body = self.expr()?;
            self.expect_sym(';')?;
            return Ok(Defn { name, params, body: Body::Explicit(body) });
        }
        self.expect_sym('{')?;
        self.keyword("init")?;
        self.expect_sym(':')?;
        let init = self.expr()?;
        self.expect_sym(';')?;
        self.keyword("d")?;
        self.expect_sym('/')?;
        let along = match self.peek() {
            Tok::Ident(s) if s == "dl" => Along::L,
            Tok::Ident(s) if s == "dl2" => Along::L2,
            other => return Err(self.error(format!("expected `dl` or `dl2`, found {other}"))),
        };
        self.bump();
        self.expect_sym(':')?;
        let rhs = self.expr()?;
        self.expect_sym(';')?;
        let mut annotations = Vec::new();
        while !self.is_sym('}') {
            let a = match self.peek() {
                Tok::Ident(s) if s == "nonneg" => Annotation::Nonneg,
                Tok::Ident(s) if s == "bool01" => Annotation::Bool01,
                other => return Err(self.error(format!("expected `nonneg`, `bool01` or `}}`, found {other}"))),
            };
            self.bump();
            self.expect_sym(';')?;
            annotations.push(a);
        }
        self.expect_sym('}')?;
        Ok(Defn { name, params, body: Body::Ode(Ode { along, init, rhs, annotations }) })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut acc = self.product()?;
        loop {
            if self.is_sym('+') {
                self.bump();
                acc = acc + self.product()?;
            } else if self.is_sym('-') {
                self.bump();
                acc = acc - self.product()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, SyntaxError> {
        let mut acc = self.unary()?;
        while self.is_sym('*') {
            self.bump();
            acc = acc * self.unary()?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.is_sym('-') {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_sym('(')?;
        let mut args = vec![self.expr()?];
        while self.is_sym(',') {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect_sym(')')?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                let call = *self.peek() == Tok::Sym('(');
                if name == "f" {
                    if call {
                        return Err(SyntaxError { pos, message: "`f` cannot be called; it denotes the function being defined".into() });
                    }
                    return Ok(Expr::SelfRef);
                }
                if !call {
                    return Ok(Expr::Var(name));
                }
                let args = self.args()?;
                let arity = |n: usize| -> Result<(), SyntaxError> {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(SyntaxError { pos, message: format!("`{name}` takes {n} argument(s), got {}", args.len()) })
                    }
                };
                if UNARY_BUILTINS.contains(&name.as_str()) {
                    arity(1)?;
                    let a = Box::new(args.into_iter().next().expect("one argument"));
                    return Ok(match name.as_str() {
                        "sg" => Expr::Sg(a),
                        "cosg" => Expr::Cosg(a),
                        "div2" => Expr::Div2(a),
                        "len" => Expr::Len(a),
                        _ => Expr::Len2(a),
                    });
                }
                if BINARY_BUILTINS.contains(&name.as_str()) {
                    arity(2)?;
                    let mut it = args.into_iter();
                    let a = Box::new(it.next().expect("two arguments"));
                    let b = Box::new(it.next().expect("two arguments"));
                    return Ok(if name == "bit" { Expr::Bit(a, b) } else { Expr::Smash(a, b) });
                }
                Ok(Expr::Call(name, args))
            }
            other => Err(SyntaxError { pos, message: format!("expected an expression, found {other}") }),
        }
    }
}

/// Renders an expression with the fewest parentheses that preserve its tree.
pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(e, 0, &mut s);
    s
}

// Levels: 0 sum, 1 product, 2 unary, 3 atom.
fn write_expr(e: &Expr, ctx: u8, out: &mut String) {
    let (level, text) = match e {
        Expr::Sub(a, b) if a.is_zero_const() => {
            let mut s = String::from("-");
            write_expr(b, 2, &mut s);
            (2, s)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let mut s = String::new();
            write_expr(a, 0, &mut s);
            s.push_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " });
            write_expr(b, 1, &mut s);
            (0, s)
        }
        Expr::Mul(a, b) => {
            let mut s = String::new();
            write_expr(a, 1, &mut s);
            s.push_str(" * ");
            write_expr(b, 2, &mut s);
            (1, s)
        }
        Expr::Const(c) => (if c.sign() == num_bigint::Sign::Minus { 2 } else { 3 }, c.to_string()),
        Expr::Var(v) => (3, v.clone()),
        Expr::SelfRef => (3, "f".to_string()),
        Expr::Call(name, args) => (3, format!("{name}({})", args.iter().map(print_expr).collect::<Vec<_>>().join(", "))),
        Expr::Div2(a) => (3, format!("div2({})", print_expr(a))),
        Expr::Sg(a) => (3, format!("sg({})", print_expr(a))),
        Expr::Cosg(a) => (3, format!("cosg({})", print_expr(a))),
        Expr::Len(a) => (3, format!("len({})", print_expr(a))),
        Expr::Len2(a) => (3, format!("len2({})", print_expr(a))),
        Expr::Bit(a, b) => (3, format!("bit({}, {})", print_expr(a), print_expr(b))),
        Expr::Smash(a, b) => (3, format!("smash({}, {})", print_expr(a), print_expr(b))),
    };
    if level < ctx {
        out.push('(');
        out.push_str(&text);
        out.push(')');
    } else {
        out.push_str(&text);
    }
}

pub fn print_defn(d: &Defn) -> String {
    let head = format!("fun {}({})", d.name, d.params.join(", "));
    match &d.body {
        Body::Explicit(e) => format!("{head} = {};\n", print_expr(e)),
        Body::Ode(ode) => {
            let along = match ode.along {
                Along::L => "d/dl",
                Along::L2 => "d/dl2",
            };
            let mut s = format!("{head} {{\n    init: {};\n    {along}: {};\n", print_expr(&ode.init), print_expr(&ode.rhs));
            for a in &ode.annotations {
                s.push_str(&format!("    {};\n", a.keyword()));
            }
            s.push_str("}\n");
            s
        }
    }
}

pub fn print_program(p: &Program) -> String {
    p.defs().iter().map(print_defn).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;
    use crate::schema::{classify, Family};
    use proptest::prelude::*;

    #[test]
    fn precedence() {
        assert_eq!(parse_expr("-k * f").unwrap(), (cst(0) - var("k")) * selfref());
        assert_eq!(parse_expr("a - b - c").unwrap(), (var("a") - var("b")) - var("c"));
        assert_eq!(parse_expr("a - (b - c)").unwrap(), var("a") - (var("b") - var("c")));
        assert_eq!(parse_expr("a + b * c").unwrap(), var("a") + var("b") * var("c"));
        assert_eq!(parse_expr("--a").unwrap(), cst(0) - (cst(0) - var("a")));
        assert_eq!(parse_expr("bit(len(x) + 1, y)").unwrap(), bit(len(var("x")) + cst(1), var("y")));
    }

    #[test]
    fn halving_defn() {
        let p = parse_program("fun g(x,y) { init: y; d/dl: div2(f) - f; }").unwrap();
        assert_eq!(classify(&p, "g").unwrap().family, Family::ODE3);
    }

    #[test]
    fn diagnostics() {
        let err = parse_program("fun bad(x) = f;").unwrap_err();
        assert!(err[0].message.contains("self reference"), "{err:?}");
        let err = parse_unchecked("fun g(x) = x +;\n").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 15 });
        let err = parse_unchecked("\n\nfun g(x) { init: 0; d/dq: f; }").unwrap_err();
        assert_eq!(err.pos.line, 3);
        assert!(parse_unchecked("fun g(x) = sg(x, x);").is_err());
        assert!(parse_unchecked("fun g(x) = x $ 1;").is_err());
        let err = parse_program("fun a(x) = 1;\n# note\nfun b(x) { init: x; d/dl: f; }\n").unwrap_err();
        assert_eq!(err[0].pos.line, 3);
    }

    #[test]
    fn annotations_parse() {
        let p = parse_program("fun g(x, y) { init: y; d/dl: -f + sg(f) * y; nonneg; bool01; }").unwrap();
        assert_eq!(p.get("g").unwrap().as_ode().unwrap().annotations, vec![Annotation::Nonneg, Annotation::Bool01]);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0i64..100).prop_map(cst),
            Just(var("x")),
            Just(var("y")),
            Just(selfref()),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                inner.clone().prop_map(|a| -a),
                inner.clone().prop_map(sg),
                inner.clone().prop_map(div2),
                inner.clone().prop_map(len),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| bit(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| call("h", vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(e in arb_expr()) {
            let text = print_expr(&e);
            prop_assert_eq!(parse_expr(&text).unwrap(), e);
        }
    }
}
