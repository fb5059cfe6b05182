//! Schema programs to circuit families.
//!
//! A function `fun(x, y1, .., yk)` is compiled for one input length `n`: the
//! first argument is fixed to `alpha(n)` and each `y` parameter becomes `n`
//! input bits, least significant first, in parameter order. Outputs are the
//! two's-complement bits of the result, least significant first.
//!
//! Each ODE family has its own construction; see the `fam_*` methods.

use std::collections::{BTreeSet, HashMap};

use lode_core::basis::{self, Int};
use lode_core::expr::{call_form, Expr};
use lode_core::interp::{EvalError, Interp, Mode};
use lode_core::schema::{classify, decompose_linear, Along, Body, Class, ClassReport, Family, LinearDecomposition, Ode, Program};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::builder::Builder;
use crate::ir::{Arg, Circuit, FaninMode, GateSet, Op};
use crate::word::{tc_width, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Fac0,
    Acc2,
    Tc0,
    Nc1,
}

impl Backend {
    pub const ALL: [Backend; 4] = [Backend::Fac0, Backend::Acc2, Backend::Tc0, Backend::Nc1];

    pub fn class(self) -> Class {
        match self {
            Backend::Fac0 => Class::FAC0,
            Backend::Acc2 => Class::FACC2,
            Backend::Tc0 => Class::FTC0,
            Backend::Nc1 => Class::FNC1,
        }
    }

    pub fn gate_set(self) -> GateSet {
        match self {
            Backend::Fac0 => GateSet::ac0(),
            Backend::Acc2 => GateSet::acc2(),
            Backend::Tc0 => GateSet::tc0(),
            Backend::Nc1 => GateSet::nc1(),
        }
    }

    /// The smallest backend covering `class`.
    pub fn for_class(class: Class) -> Option<Backend> {
        Backend::ALL.into_iter().find(|b| class <= b.class())
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Fac0 => "fac0",
            Backend::Acc2 => "acc2",
            Backend::Tc0 => "tc0",
            Backend::Nc1 => "nc1",
        }
    }

    pub fn parse(s: &str) -> Option<Backend> {
        Backend::ALL.into_iter().find(|b| b.name() == s)
    }

    fn builder(self, n_inputs: usize) -> Builder {
        match self {
            Backend::Fac0 => Builder::new(n_inputs, FaninMode::Unbounded, false, false).uniform(),
            Backend::Acc2 => Builder::new(n_inputs, FaninMode::Unbounded, true, false).uniform(),
            Backend::Tc0 => Builder::new(n_inputs, FaninMode::Unbounded, false, true).uniform(),
            Backend::Nc1 => Builder::new(n_inputs, FaninMode::Bounded2, false, false),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    /// Widest intermediate word (two's-complement bits) the NC1 backend
    /// accepts for arithmetic results.
    pub width: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { width: 64 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{fun}` has family {family}, which has no circuit construction")]
    NotCompilable { fun: String, family: Family },
    #[error("`{fun}` has class {class}, above the {backend} backend")]
    ClassTooHigh { fun: String, class: Class, backend: &'static str },
    #[error("call of `{0}` with a non-constant first argument")]
    NonConstantX(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("`f` outside a right-hand side")]
    SelfOutside,
    #[error("{op} of a possibly negative value")]
    Domain { op: &'static str },
    #[error("smash needs constant operands")]
    NonConstantSmash,
    #[error("intermediate value needs {needed} bits, limit is {limit}")]
    Width { needed: usize, limit: usize },
    #[error("`{fun}`: {message}")]
    Unsupported { fun: String, message: String },
    #[error("constant evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// A compiled function. Outputs are plain binary when the result can not
/// be negative, two's complement otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compiled {
    pub backend: Backend,
    pub circuit: Circuit,
    pub signed: bool,
}

impl Compiled {
    pub fn decode(&self, outputs: &[bool]) -> Int {
        decode_output(outputs, self.signed)
    }
}

/// Compiles with the smallest backend covering the function's class.
pub fn compile(p: &Program, fun: &str, n: usize, opts: &CompileOptions) -> Result<Compiled, CompileError> {
    let report = classify(p, fun).map_err(|_| CompileError::UnknownFunction(fun.into()))?;
    if !compilable(report.family) {
        return Err(CompileError::NotCompilable { fun: fun.into(), family: report.family });
    }
    let backend = Backend::for_class(report.effective_class).ok_or_else(|| CompileError::NotCompilable { fun: fun.into(), family: report.family })?;
    compile_with(p, fun, n, backend, opts)
}

pub fn compile_fac0(p: &Program, fun: &str, n: usize) -> Result<Circuit, CompileError> {
    compile_with(p, fun, n, Backend::Fac0, &CompileOptions::default()).map(|c| c.circuit)
}

pub fn compile_acc2(p: &Program, fun: &str, n: usize) -> Result<Circuit, CompileError> {
    compile_with(p, fun, n, Backend::Acc2, &CompileOptions::default()).map(|c| c.circuit)
}

pub fn compile_tc0(p: &Program, fun: &str, n: usize) -> Result<Circuit, CompileError> {
    compile_with(p, fun, n, Backend::Tc0, &CompileOptions::default()).map(|c| c.circuit)
}

pub fn compile_nc1(p: &Program, fun: &str, n: usize, opts: &CompileOptions) -> Result<Circuit, CompileError> {
    compile_with(p, fun, n, Backend::Nc1, opts).map(|c| c.circuit)
}

/// Number of `y` parameters, i.e. input blocks of `n` bits each.
pub fn input_blocks(p: &Program, fun: &str) -> Result<usize, CompileError> {
    let d = p.get(fun).ok_or_else(|| CompileError::UnknownFunction(fun.into()))?;
    Ok(d.params.len().saturating_sub(1))
}

/// Splits circuit input bits into the `y` arguments.
pub fn decode_inputs(bits: &[bool], n: usize, blocks: usize) -> Vec<Int> {
    (0..blocks)
        .map(|j| {
            let block = &bits[j * n..(j + 1) * n];
            block.iter().enumerate().filter(|(_, b)| **b).fold(Int::zero(), |acc, (i, _)| acc + (Int::one() << i))
        })
        .collect()
}

/// Reads output bits, least significant first.
pub fn decode_output(bits: &[bool], signed: bool) -> Int {
    let mut v = Int::zero();
    for (i, b) in bits.iter().enumerate() {
        if *b {
            v += Int::one() << i;
        }
    }
    if signed && bits.last() == Some(&true) {
        v -= Int::one() << bits.len();
    }
    v
}

pub fn compile_with(p: &Program, fun: &str, n: usize, backend: Backend, opts: &CompileOptions) -> Result<Compiled, CompileError> {
    let d = p.get(fun).ok_or_else(|| CompileError::UnknownFunction(fun.into()))?;
    let k = d.params.len().saturating_sub(1);
    let mut c = Compiler {
        prog: p,
        interp: Interp::new(p),
        b: backend.builder(n * k),
        backend,
        width: if backend == Backend::Nc1 { Some(opts.width) } else { None },
        reports: HashMap::new(),
        memo: HashMap::new(),
    };
    c.admit(fun)?;
    let mut args = vec![Word::constant(&basis::alpha(n as u64))];
    for j in 0..k {
        args.push(Word::unsigned((0..n).map(|i| Arg::Input(j * n + i)).collect()));
    }
    let out = c.call(fun, args)?;
    let signed = out.lo.is_negative();
    let mut bits = out.bits;
    if !signed && bits.len() > 1 {
        bits.pop();
    }
    Ok(Compiled { backend, circuit: c.b.finish(bits), signed })
}

#[derive(Clone, Default)]
struct Env {
    vars: HashMap<String, Word>,
    f: Option<Word>,
}

impl Env {
    fn with_f(&self, f: Word) -> Env {
        Env { vars: self.vars.clone(), f: Some(f) }
    }
}

/// Iterated-addition counter blocks.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Counter {
    Threshold,
    Dnf,
}

struct Compiler<'p> {
    prog: &'p Program,
    interp: Interp<'p>,
    b: Builder,
    backend: Backend,
    width: Option<usize>,
    reports: HashMap<String, ClassReport>,
    memo: HashMap<(String, Vec<Word>), Word>,
}

fn compilable(f: Family) -> bool {
    use Family::*;
    matches!(
        f,
        ODE1 | ODE3 | ODE0 | RESET | ACODE | ACODE_OFFSET | KK_ACC2 | B0ODE | PODE_STRICT | TCODE_SUM | NC1_CONCAT | BODE | L2_STRICT | EXPLICIT
    )
}

impl<'p> Compiler<'p> {
    fn report(&mut self, fun: &str) -> Result<ClassReport, CompileError> {
        if let Some(r) = self.reports.get(fun) {
            return Ok(r.clone());
        }
        let r = classify(self.prog, fun).map_err(|_| CompileError::UnknownFunction(fun.into()))?;
        self.reports.insert(fun.into(), r.clone());
        Ok(r)
    }

    /// A function may be compiled here if its family has a construction and
    /// its class fits the backend.
    fn admit(&mut self, fun: &str) -> Result<ClassReport, CompileError> {
        let r = self.report(fun)?;
        if !compilable(r.family) {
            return Err(CompileError::NotCompilable { fun: fun.into(), family: r.family });
        }
        if r.effective_class > self.backend.class() {
            return Err(CompileError::ClassTooHigh { fun: fun.into(), class: r.effective_class, backend: self.backend.name() });
        }
        Ok(r)
    }

    fn check_width(&self, w: Word) -> Result<Word, CompileError> {
        if let Some(limit) = self.width {
            let needed = tc_width(&w.lo, &w.hi);
            if needed > limit {
                return Err(CompileError::Width { needed, limit });
            }
        }
        Ok(w)
    }

    fn expr(&mut self, e: &Expr, env: &Env) -> Result<Word, CompileError> {
        Ok(match e {
            Expr::Const(c) => Word::constant(c),
            Expr::Var(v) => env.vars.get(v).cloned().ok_or_else(|| CompileError::Unbound(v.clone()))?,
            Expr::SelfRef => env.f.clone().ok_or(CompileError::SelfOutside)?,
            Expr::Add(a, b) => {
                let (a, b) = (self.expr(a, env)?, self.expr(b, env)?);
                let w = self.b.w_add(&a, &b);
                self.check_width(w)?
            }
            Expr::Sub(a, b) => {
                let (a, b) = (self.expr(a, env)?, self.expr(b, env)?);
                let w = self.b.w_sub(&a, &b);
                self.check_width(w)?
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.expr(a, env)?, self.expr(b, env)?);
                let w = self.b.w_mul(&a, &b);
                self.check_width(w)?
            }
            Expr::Div2(a) => self.expr(a, env)?.shr(1),
            Expr::Sg(a) => {
                let a = self.expr(a, env)?;
                Word::boolean(self.b.w_sg(&a))
            }
            Expr::Cosg(a) => {
                let a = self.expr(a, env)?;
                let s = self.b.w_sg(&a);
                Word::boolean(self.b.not(s))
            }
            Expr::Len(a) => {
                let a = self.expr(a, env)?;
                if a.lo.is_negative() {
                    return Err(CompileError::Domain { op: "len" });
                }
                self.b.w_len(&a)
            }
            Expr::Len2(a) => {
                let a = self.expr(a, env)?;
                if a.lo.is_negative() {
                    return Err(CompileError::Domain { op: "len2" });
                }
                let l = self.b.w_len(&a);
                self.b.w_len(&l)
            }
            Expr::Bit(i, y) => {
                let (i, y) = (self.expr(i, env)?, self.expr(y, env)?);
                Word::boolean(self.b.w_bit_var(&i, &y))
            }
            Expr::Smash(a, b) => {
                let (a, b) = (self.expr(a, env)?, self.expr(b, env)?);
                match (a.as_const(), b.as_const()) {
                    (Some(a), Some(b)) if !a.is_negative() && !b.is_negative() => Word::constant(&basis::smash(&a, &b)),
                    _ => return Err(CompileError::NonConstantSmash),
                }
            }
            Expr::Call(name, args) => {
                let mut ws = Vec::with_capacity(args.len());
                for a in args {
                    ws.push(self.expr(a, env)?);
                }
                self.call(name, ws)?
            }
        })
    }

    fn call(&mut self, name: &str, args: Vec<Word>) -> Result<Word, CompileError> {
        let prog = self.prog;
        let d = prog.get(name).ok_or_else(|| CompileError::UnknownFunction(name.into()))?;
        if d.params.len() != args.len() {
            return Err(CompileError::Unsupported { fun: name.into(), message: format!("called with {} arguments", args.len()) });
        }
        let consts: Option<Vec<Int>> = args.iter().map(|w| w.as_const()).collect();
        if let Some(vals) = consts {
            return Ok(Word::constant(&self.interp.eval(name, &vals, Mode::Fast)?));
        }
        let key = (name.to_string(), args);
        if let Some(w) = self.memo.get(&key) {
            return Ok(w.clone());
        }
        let args = key.1.clone();
        let out = match &d.body {
            Body::Explicit(body) => {
                let env = Env { vars: d.params.iter().cloned().zip(args).collect(), f: None };
                self.expr(body, &env)?
            }
            Body::Ode(ode) => {
                let x = args[0].as_const().ok_or_else(|| CompileError::NonConstantX(name.into()))?;
                let report = self.admit(name)?;
                self.ode(name, &d.params, ode, report.family, &x, &args[1..])?
            }
        };
        self.memo.insert(key, out.clone());
        Ok(out)
    }

    fn ode(&mut self, fun: &str, params: &[String], ode: &Ode, family: Family, x: &Int, ys: &[Word]) -> Result<Word, CompileError> {
        if x.is_negative() {
            return Err(CompileError::Domain { op: "call" });
        }
        let steps = match ode.along {
            Along::L => basis::len(x),
            Along::L2 => basis::len2(x),
        } as usize;
        let mut init_env = Env::default();
        for (p, y) in params[1..].iter().zip(ys) {
            init_env.vars.insert(p.clone(), y.clone());
        }
        let g = self.expr(&ode.init, &init_env)?;
        let mut envs = Vec::with_capacity(steps);
        for u in 0..steps {
            let t = match ode.along {
                Along::L => basis::alpha(u as u64),
                Along::L2 => basis::alpha2(u as u64),
            };
            let mut env = init_env.clone();
            env.vars.insert(params[0].clone(), Word::constant(&t));
            envs.push(env);
        }
        let unsupported = |m: &str| CompileError::Unsupported { fun: fun.into(), message: m.into() };
        let dec = decompose_linear(&ode.rhs).ok_or_else(|| unsupported("right-hand side is not linear in f"))?;
        let cx = Step { fun, ode, dec: &dec, g, envs };
        match family {
            Family::ODE3 => Ok(cx.g.shr(steps)),
            Family::ODE1 => self.fam_concat_strict(&cx),
            Family::RESET => self.fam_reset(&cx),
            Family::ODE0 | Family::ACODE | Family::ACODE_OFFSET => self.fam_kill(&cx),
            Family::KK_ACC2 => self.fam_kk(&cx),
            Family::B0ODE => self.fam_b0(&cx),
            Family::PODE_STRICT => self.fam_pode(&cx),
            Family::L2_STRICT => self.fam_sum(&cx),
            Family::TCODE_SUM => self.fam_tcode_sum(&cx),
            Family::NC1_CONCAT => self.fam_nc1_concat(&cx),
            Family::BODE => self.fam_bode(&cx),
            other => Err(CompileError::NotCompilable { fun: fun.into(), family: other }),
        }
    }

    /// Bit 0 of a value the classifier proved to be 0 or 1.
    fn bit_of(&mut self, e: &Expr, env: &Env) -> Result<Arg, CompileError> {
        let w = self.expr(e, env)?;
        Ok(if w.is_boolean() { w.as_bit() } else { w.bit(0) })
    }

    fn at_each(&mut self, cx: &Step, e: &Expr, f: Option<&Word>) -> Result<Vec<Word>, CompileError> {
        let mut out = Vec::with_capacity(cx.envs.len());
        for env in &cx.envs {
            let env = match f {
                Some(f) => env.with_f(f.clone()),
                None => env.clone(),
            };
            out.push(self.expr(e, &env)?);
        }
        Ok(out)
    }

    fn bits_at_each(&mut self, cx: &Step, e: &Expr, f: Option<&Word>) -> Result<Vec<Arg>, CompileError> {
        let ws = self.at_each(cx, e, f)?;
        Ok(ws.iter().map(|w| if w.is_boolean() { w.as_bit() } else { w.bit(0) }).collect())
    }

    /// `f <- 2 f + B_u`: the B bits are appended below `g`.
    fn fam_concat_strict(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let bs = self.bits_at_each(cx, &cx.dec.b(), None)?;
        Ok(cx.g.concat_below(bs.into_iter().rev().collect()))
    }

    /// `f <- B_u`: the last B, or `g` with no steps.
    fn fam_reset(&mut self, cx: &Step) -> Result<Word, CompileError> {
        match cx.envs.last() {
            None => Ok(cx.g.clone()),
            Some(env) => {
                let env = env.clone();
                Ok(Word::boolean(self.bit_of(&cx.dec.b(), &env)?))
            }
        }
    }

    /// `f <- K_u f`: `g` survives iff every `K` is 1. Until the first zero
    /// `f` is still `g`, so `K` may read `f` through guards.
    fn fam_kill(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let k = cx.dec.a_as_k_minus_one().ok_or_else(|| self.unsupported(cx, "A is not K - 1"))?;
        let ks = self.bits_at_each(cx, &k, Some(&cx.g))?;
        let alive = self.b.and(ks);
        Ok(self.b.w_mask(&cx.g, alive))
    }

    /// `f <- k ? k' : f`: the last selected `k'`, else `g`.
    fn fam_kk(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let k = cx.dec.a_as_neg_k().ok_or_else(|| self.unsupported(cx, "A is not -k"))?;
        let k2 = cx.dec.b_as_multiple_of(&k).ok_or_else(|| self.unsupported(cx, "B is not a multiple of k"))?;
        let ks = self.bits_at_each(cx, &k, None)?;
        let vals = self.at_each(cx, &k2, None)?;
        let n = ks.len();
        let mut sel = Vec::with_capacity(n + 1);
        let mut words = vals;
        for u in 0..n {
            let later: Vec<Arg> = ks[u + 1..].iter().map(|&a| self.b.not(a)).collect();
            let mut lits = later;
            lits.push(ks[u]);
            sel.push(self.b.and(lits));
        }
        let none: Vec<Arg> = ks.iter().map(|&a| self.b.not(a)).collect();
        sel.push(self.b.and(none));
        words.push(cx.g.clone());
        Ok(self.b.w_select(&sel, &words))
    }

    /// `f <- B_t(f)` with boolean `B` reading `f` only through guards. For
    /// `t >= 1`, `f` is already 0 or 1, so each step is constant, identity
    /// or negation; the answer is the value at the last constant step, XORed
    /// with the negations after it.
    fn fam_b0(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let n = cx.envs.len();
        if n == 0 {
            return Ok(cx.g.clone());
        }
        let b = cx.dec.b();
        let env0 = cx.envs[0].with_f(cx.g.clone());
        let v0 = self.bit_of(&b, &env0)?;
        let zero = Word::from_i64(0);
        let one = Word::from_i64(1);
        let mut vals = vec![v0];
        let mut consts = vec![Arg::Const(true)];
        let mut negs = vec![Arg::Const(false)];
        for env in &cx.envs[1..] {
            let k0 = self.bit_of(&b, &env.with_f(zero.clone()))?;
            let k1 = self.bit_of(&b, &env.with_f(one.clone()))?;
            let x = self.b.xor2(k0, k1);
            consts.push(self.b.not(x));
            let nk1 = self.b.not(k1);
            negs.push(self.b.and2(k0, nk1));
            vals.push(k0);
        }
        let mut terms = Vec::with_capacity(n);
        for t in 0..n {
            let mut lits = vec![consts[t]];
            for &c in &consts[t + 1..] {
                lits.push(self.b.not(c));
            }
            let last = self.b.and(lits);
            let mut flips = vec![vals[t]];
            flips.extend_from_slice(&negs[t + 1..]);
            let v = self.b.xor(flips);
            terms.push(self.b.and2(last, v));
        }
        Ok(Word::boolean(self.b.or(terms)))
    }

    /// `f <- (1 + A_u) f + B_u` with coefficients free of `f`.
    fn fam_pode(&mut self, cx: &Step) -> Result<Word, CompileError> {
        if cx.dec.a_is_zero() {
            return self.fam_sum(cx);
        }
        let a_vals = self.at_each(cx, &cx.dec.a(), None)?;
        let b_vals = self.at_each(cx, &cx.dec.b(), None)?;
        if a_vals.iter().all(|w| w.as_const().is_some_and(|c| c.is_zero())) {
            let mut words = vec![cx.g.clone()];
            words.extend(b_vals);
            return Ok(self.iterated_add(words));
        }
        let n = a_vals.len();
        let mut w = cx.g.width();
        for u in 0..n {
            w = w.max(a_vals[u].width()).max(b_vals[u].width());
        }
        let mag = |x: &Word| x.lo.abs().max(x.hi.abs());
        let mut m = mag(&cx.g);
        for u in 0..n {
            m = &m + mag(&a_vals[u]) * &m + mag(&b_vals[u]);
        }
        let (lo, hi) = (-m.clone(), m);
        let out_w = tc_width(&lo, &hi);
        let mut args = Vec::with_capacity(w * (1 + 2 * n));
        args.extend((0..w).map(|i| cx.g.bit(i)));
        for u in 0..n {
            args.extend((0..w).map(|i| a_vals[u].bit(i)));
            args.extend((0..w).map(|i| b_vals[u].bit(i)));
        }
        let bits = (0..out_w).map(|j| self.b.raw(Op::Macro(format!("ITMULT/{w}/{n}/{j}")), args.clone())).collect();
        Ok(Word { bits, lo, hi })
    }

    /// `f <- f + B_u`: iterated addition of `g` and every `B`.
    fn fam_sum(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let mut words = vec![cx.g.clone()];
        words.extend(self.at_each(cx, &cx.dec.b(), None)?);
        Ok(self.iterated_add(words))
    }

    /// `f <- f + B_u(sg f)` with `g >= 0`: once `f` is positive it stays so.
    fn fam_tcode_sum(&mut self, cx: &Step) -> Result<Word, CompileError> {
        if cx.g.lo.is_negative() {
            return Err(self.unsupported(cx, "initial value may be negative"));
        }
        let b = cx.dec.b();
        let zero = Word::from_i64(0);
        let one = Word::from_i64(1);
        let pos = self.b.w_sg(&cx.g);
        let mut words = vec![cx.g.clone()];
        let mut seen = vec![pos];
        for env in &cx.envs {
            let b0 = self.bit_of(&b, &env.with_f(zero.clone()))?;
            let b1 = self.bit_of(&b, &env.with_f(one.clone()))?;
            let s = self.b.or(seen.iter().copied());
            words.push(Word::boolean(self.b.mux(s, b1, b0)));
            seen.push(b0);
        }
        Ok(self.iterated_add(words))
    }

    fn unsupported(&self, cx: &Step, m: &str) -> CompileError {
        CompileError::Unsupported { fun: cx.fun.into(), message: m.into() }
    }

    /// Values `f` is compared against, as an abstraction of the state.
    fn states(&self, cx: &Step) -> Result<States, CompileError> {
        let offsets: BTreeSet<Int> = call_form(&cx.dec.b()).offsets().ok_or_else(|| self.unsupported(cx, "f appears outside guards"))?;
        let lo = offsets.iter().min().cloned().unwrap_or_default().min(Int::zero());
        let hi = offsets.iter().max().cloned().unwrap_or_default().max(Int::zero());
        let _ = cx.ode;
        let span = (&hi - &lo).to_usize().ok_or_else(|| self.unsupported(cx, "guard offsets too far apart"))?;
        Ok(States { lo, count: span + 3 })
    }

    /// One-hot abstraction of a word.
    fn abstract_word(&mut self, st: &States, w: &Word) -> Vec<Arg> {
        let mut out = Vec::with_capacity(st.count);
        out.push(self.b.w_lt_const(w, &st.lo));
        for s in 1..st.count - 1 {
            out.push(self.b.w_eq_const(w, &st.rep(s)));
        }
        let above = self.b.w_lt_const(w, &(st.rep(st.count - 1)));
        out.push(self.b.not(above));
        out
    }

    /// `rows[i][s']` of `m1` then `m2`.
    fn compose(&mut self, m1: &Matrix, m2: &Matrix) -> Matrix {
        let cols = m2.first().map_or(0, |r| r.len());
        m1.iter()
            .map(|row| {
                (0..cols)
                    .map(|c| {
                        let terms: Vec<Arg> = row.iter().enumerate().map(|(s, &a)| self.b.and2(a, m2[s][c])).collect();
                        self.b.or(terms)
                    })
                    .collect()
            })
            .collect()
    }

    /// Balanced product of a chain.
    fn chain(&mut self, ms: &[Matrix]) -> Matrix {
        match ms.len() {
            1 => ms[0].clone(),
            n => {
                let l = self.chain(&ms[..n / 2]);
                let r = self.chain(&ms[n / 2..]);
                self.compose(&l, &r)
            }
        }
    }

    /// All prefix products of a chain, Sklansky style.
    fn prefixes(&mut self, ms: &[Matrix]) -> Vec<Matrix> {
        let mut acc: Vec<Matrix> = ms.to_vec();
        let n = acc.len();
        let mut d = 0;
        while (1usize << d) < n {
            for q in 0..n {
                if (q >> d) & 1 == 1 {
                    let j = ((q >> d) << d) - 1;
                    let prev = acc[j].clone();
                    acc[q] = self.compose(&prev, &acc[q]);
                }
            }
            d += 1;
        }
        acc
    }

    /// `f <- 2 f + B_u(f)`: `B` depends on `f` only through comparisons
    /// with small constants, so a finite state abstraction of `f` is
    /// propagated by parallel prefix and read back bit by bit.
    fn fam_nc1_concat(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let n = cx.envs.len();
        if n == 0 {
            return Ok(cx.g.clone());
        }
        let st = self.states(cx)?;
        let b = cx.dec.b();
        // kbits[u][s]: B_u at the representative of state s.
        let mut kbits = Vec::with_capacity(n);
        for env in &cx.envs {
            let mut row = Vec::with_capacity(st.count);
            for s in 0..st.count {
                row.push(self.bit_of(&b, &env.with_f(Word::constant(&st.rep(s))))?);
            }
            kbits.push(row);
        }
        let start = self.abstract_word(&st, &cx.g);
        let mut chain: Vec<Matrix> = vec![vec![start]];
        for row in kbits.iter().take(n - 1) {
            let mut m = Vec::with_capacity(st.count);
            for s in 0..st.count {
                let (t0, t1) = st.doubled(s);
                let mut r = vec![Arg::Const(false); st.count];
                if t0 == t1 {
                    r[t0] = Arg::Const(true);
                } else {
                    r[t0] = self.b.not(row[s]);
                    r[t1] = row[s];
                }
                m.push(r);
            }
            chain.push(m);
        }
        let sigmas = self.prefixes(&chain);
        let mut out = Vec::with_capacity(n);
        for u in 0..n {
            let sigma = &sigmas[u][0];
            let terms: Vec<Arg> = (0..st.count).map(|s| self.b.and2(sigma[s], kbits[u][s])).collect();
            out.push(self.b.or(terms));
        }
        Ok(cx.g.concat_below(out.into_iter().rev().collect()))
    }

    /// `f <- B_u(f)` with `B` reading `f` through comparisons only: the
    /// state after each step is one of finitely many classes, composed by a
    /// balanced tree; the last step is then evaluated at the selected class.
    fn fam_bode(&mut self, cx: &Step) -> Result<Word, CompileError> {
        let n = cx.envs.len();
        if n == 0 {
            return Ok(cx.g.clone());
        }
        let st = self.states(cx)?;
        let b = cx.dec.b();
        let mut vals = Vec::with_capacity(n);
        for env in &cx.envs {
            let mut row = Vec::with_capacity(st.count);
            for s in 0..st.count {
                row.push(self.expr(&b, &env.with_f(Word::constant(&st.rep(s))))?);
            }
            vals.push(row);
        }
        let start = self.abstract_word(&st, &cx.g);
        let mut chain: Vec<Matrix> = vec![vec![start]];
        for row in vals.iter().take(n - 1) {
            let mut m = Vec::with_capacity(st.count);
            for w in row {
                m.push(self.abstract_word(&st, w));
            }
            chain.push(m);
        }
        let sigma = self.chain(&chain).remove(0);
        Ok(self.b.w_select(&sigma, &vals[n - 1]))
    }

    /// Sum of many words. Unbounded backends use a fixed number of raw
    /// counting rounds, so depth does not depend on the number of addends.
    fn iterated_add(&mut self, words: Vec<Word>) -> Word {
        let counter = match self.backend {
            Backend::Tc0 => Counter::Threshold,
            Backend::Fac0 | Backend::Acc2 => Counter::Dnf,
            Backend::Nc1 => return self.b.w_sum_tree(&words),
        };
        let lo: Int = words.iter().map(|w| w.lo.clone()).sum();
        let hi: Int = words.iter().map(|w| w.hi.clone()).sum();
        let live: Vec<&Word> = words.iter().filter(|w| w.as_const().is_none()).collect();
        if live.len() <= 1 {
            return self.b.w_sum_tree(&words);
        }
        let m = tc_width(&lo, &hi).max(words.iter().map(|w| w.width()).max().unwrap_or(1));
        let modulus = Int::one() << m;
        let mut konst = Int::zero();
        let mut cols: Vec<Vec<Arg>> = vec![Vec::new(); m];
        for w in &words {
            for (j, col) in cols.iter_mut().enumerate() {
                match w.bit(j) {
                    Arg::Const(true) => konst += Int::one() << j,
                    Arg::Const(false) => {}
                    a => col.push(a),
                }
            }
        }
        konst = ((konst % &modulus) + &modulus) % &modulus;
        let rounds = match counter {
            Counter::Threshold => 4,
            Counter::Dnf => 3,
        };
        let mut done = 0;
        let height = |cols: &[Vec<Arg>]| cols.iter().map(|c| c.len()).max().unwrap_or(0);
        let needed = height(&cols) >= 2;
        // A single round that already leaves one number ends the sum; else
        // the round count is fixed so depth does not vary with the heights.
        while needed && !(done == 1 && height(&cols) <= 1) && (done < rounds || height(&cols) > 2) {
            let mut next: Vec<Vec<Arg>> = vec![Vec::new(); m];
            for j in 0..m {
                if cols[j].is_empty() {
                    continue;
                }
                let bits = match counter {
                    Counter::Threshold => self.count_th(&cols[j]),
                    Counter::Dnf => self.count_dnf(&cols[j]),
                };
                for (b, a) in bits.into_iter().enumerate() {
                    if j + b < m && a != Arg::Const(false) {
                        next[j + b].push(a);
                    }
                }
            }
            cols = next;
            done += 1;
        }
        if done == 1 && height(&cols) <= 1 && konst.is_zero() {
            let w = tc_width(&lo, &hi);
            let bits = (0..w).map(|j| cols.get(j).and_then(|c| c.first().copied()).unwrap_or(Arg::Const(false))).collect();
            return Word { bits, lo, hi };
        }
        // Two rows plus the constant: one carry-save layer, then an adder.
        let mut sum = Vec::with_capacity(m);
        let mut carry = vec![Arg::Const(false)];
        for (j, col) in cols.iter().enumerate() {
            let a = col.first().copied().unwrap_or(Arg::Const(false));
            let b = col.get(1).copied().unwrap_or(Arg::Const(false));
            let k = konst.bit(j as u64);
            let x = self.b.xor2(a, b);
            if k {
                sum.push(self.b.not(x));
                carry.push(self.b.or2(a, b));
            } else {
                sum.push(x);
                carry.push(self.b.and2(a, b));
            }
        }
        carry.truncate(m);
        let total = self.b.add_bits(&sum, &carry, Arg::Const(false));
        let w = tc_width(&lo, &hi);
        Word { bits: (0..w).map(|i| total[i]).collect(), lo, hi }
    }

    /// Binary count of `xs` from threshold gates, depth 4 for any height.
    fn count_th(&mut self, xs: &[Arg]) -> Vec<Arg> {
        let h = xs.len();
        let t: Vec<Arg> = (1..=h + 1).map(|v| self.b.raw(Op::Th(v), xs.to_vec())).collect();
        // exactly[v]: count is v.
        let mut exactly = Vec::with_capacity(h + 1);
        for v in 0..=h {
            let nm = self.b.raw(Op::Not, vec![t[v]]);
            let args = if v == 0 { vec![nm] } else { vec![t[v - 1], nm] };
            exactly.push(self.b.raw(Op::And, args));
        }
        self.pack(&exactly)
    }

    /// Binary count of `xs` as a DNF over all assignments, depth 3.
    fn count_dnf(&mut self, xs: &[Arg]) -> Vec<Arg> {
        let h = xs.len();
        assert!(h <= 12, "counting block of height {h} is too large for a DNF");
        let negs: Vec<Arg> = xs.iter().map(|&x| self.b.raw(Op::Not, vec![x])).collect();
        let pos: Vec<Arg> = xs.iter().map(|&x| self.b.raw(Op::Or, vec![x])).collect();
        let mut by_count: Vec<Vec<Arg>> = vec![Vec::new(); h + 1];
        for a in 0u32..(1 << h) {
            let lits = (0..h).map(|i| if (a >> i) & 1 == 1 { pos[i] } else { negs[i] }).collect();
            let term = self.b.raw(Op::And, lits);
            by_count[a.count_ones() as usize].push(term);
        }
        let w = basis::len_u64(h as u64) as usize;
        (0..w)
            .map(|b| {
                let terms: Vec<Arg> = (0..=h).filter(|v| (v >> b) & 1 == 1).flat_map(|v| by_count[v].clone()).collect();
                self.b.raw(Op::Or, terms)
            })
            .collect()
    }

    fn pack(&mut self, exactly: &[Arg]) -> Vec<Arg> {
        let h = exactly.len() - 1;
        let w = basis::len_u64(h as u64) as usize;
        (0..w)
            .map(|b| {
                let terms: Vec<Arg> = (0..=h).filter(|v| (v >> b) & 1 == 1).map(|v| exactly[v]).collect();
                self.b.raw(Op::Or, terms)
            })
            .collect()
    }
}

type Matrix = Vec<Vec<Arg>>;

struct Step<'a> {
    fun: &'a str,
    ode: &'a Ode,
    dec: &'a LinearDecomposition,
    g: Word,
    envs: Vec<Env>,
}

/// States: below `lo`, each value in `lo..=lo + count - 3`, above.
struct States {
    lo: Int,
    count: usize,
}

impl States {
    fn rep(&self, s: usize) -> Int {
        &self.lo - 1 + Int::from(s)
    }

    fn index(&self, v: &Int) -> usize {
        if v < &self.lo {
            0
        } else {
            (v - &self.lo + 1u32).to_usize().map_or(self.count - 1, |i| i.min(self.count - 1))
        }
    }

    /// Successor states of `s` under `f <- 2 f + b` for `b = 0, 1`.
    fn doubled(&self, s: usize) -> (usize, usize) {
        if s == 0 || s == self.count - 1 {
            return (s, s);
        }
        let v = self.rep(s);
        (self.index(&(&v * 2)), self.index(&(&v * 2 + 1)))
    }
}
