//! Exact evaluators for programs: naive stepping over every `t < x`, jump
//! evaluation at the points where the length changes, and the closed
//! sum-of-products form for strict linear definitions.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use smallvec::SmallVec;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::basis::{self, Int};
use crate::expr::Expr;
use crate::val::Val;
use crate::schema::{classify, decompose_linear, Along, Annotation, Body, Defn, Ode, Program, Special};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Naive,
    Fast,
    Closed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{fun}` takes {expected} arguments, got {got}")]
    Arity { fun: String, expected: usize, got: usize },
    #[error("argument {index} of `{fun}` is negative ({value})")]
    NegativeArgument { fun: String, index: usize, value: Int },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("`f` used outside a right-hand side")]
    SelfOutsideOde,
    #[error("{op} of negative value {value}")]
    Domain { op: &'static str, value: Int },
    #[error("annotation `{annotation}` of `{fun}` violated at t = {t}: B = {value}")]
    Assertion { fun: String, annotation: &'static str, t: Int, value: Int },
    #[error("naive evaluation of `{fun}` refused: x = {x} exceeds the limit {limit}")]
    NaiveGuard { fun: String, x: Int, limit: Int },
    #[error("`{fun}` has family {family}, which has no closed form")]
    NotStrict { fun: String, family: String },
    #[error("value too large: {0}")]
    TooLarge(String),
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Largest `x` accepted by naive evaluation.
    pub naive_limit: Int,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { naive_limit: Int::one() << 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    pub u: u64,
    #[serde(serialize_with = "basis::serialize_int")]
    pub jump_point: Int,
    #[serde(serialize_with = "basis::serialize_int")]
    pub f_before: Int,
    #[serde(serialize_with = "basis::serialize_int")]
    pub f_after: Int,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssertionRecord {
    pub annotation: &'static str,
    #[serde(serialize_with = "basis::serialize_int")]
    pub t: Int,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EvalTrace {
    pub along: Along,
    pub steps: Vec<Step>,
    pub assertions: Vec<AssertionRecord>,
    #[serde(serialize_with = "basis::serialize_int")]
    pub value: Int,
}

type Env = BTreeMap<String, Int>;

/// Argument values of one call, in parameter order.
type Slots = SmallVec<[Val; 4]>;

/// An expression with variables resolved to argument slots and calls to
/// definition indices.
#[derive(Clone, Debug)]
enum Code {
    Const(Val),
    Slot(usize),
    Unbound(String),
    SelfRef,
    Call(Option<usize>, String, Vec<Code>),
    Add(Box<Code>, Box<Code>),
    Sub(Box<Code>, Box<Code>),
    Mul(Box<Code>, Box<Code>),
    Div2(Box<Code>),
    Sg(Box<Code>),
    Cosg(Box<Code>),
    Len(Box<Code>),
    Len2(Box<Code>),
    Bit(Box<Code>, Box<Code>),
    Smash(Box<Code>, Box<Code>),
}

impl Code {
    fn of(e: &Expr, names: &[String], prog: &Program) -> Code {
        let r = |e: &Expr| Box::new(Code::of(e, names, prog));
        match e {
            Expr::Const(c) => Code::Const(Val::of(c)),
            Expr::Var(v) => names.iter().position(|n| n == v).map_or_else(|| Code::Unbound(v.clone()), Code::Slot),
            Expr::SelfRef => Code::SelfRef,
            Expr::Call(name, args) => {
                Code::Call(prog.position(name), name.clone(), args.iter().map(|a| Code::of(a, names, prog)).collect())
            }
            Expr::Add(a, b) => Code::Add(r(a), r(b)),
            Expr::Sub(a, b) => Code::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Code::Mul(r(a), r(b)),
            Expr::Div2(a) => Code::Div2(r(a)),
            Expr::Sg(a) => Code::Sg(r(a)),
            Expr::Cosg(a) => Code::Cosg(r(a)),
            Expr::Len(a) => Code::Len(r(a)),
            Expr::Len2(a) => Code::Len2(r(a)),
            Expr::Bit(i, y) => Code::Bit(r(i), r(y)),
            Expr::Smash(a, b) => Code::Smash(r(a), r(b)),
        }
    }
}

struct OdeCode {
    /// Over the parameters after `x`.
    init: Code,
    rhs: Code,
    /// `B` of the linear decomposition, present when annotations need it.
    b: Option<Code>,
}

enum DefCode {
    Explicit(Code),
    Ode(OdeCode),
}

impl DefCode {
    fn of(d: &Defn, prog: &Program) -> DefCode {
        match &d.body {
            Body::Explicit(e) => DefCode::Explicit(Code::of(e, &d.params, prog)),
            Body::Ode(ode) => {
                let b = if ode.annotations.is_empty() { None } else { decompose_linear(&ode.rhs).map(|dec| dec.b()) };
                DefCode::Ode(OdeCode {
                    init: Code::of(&ode.init, &d.params[1..], prog),
                    rhs: Code::of(&ode.rhs, &d.params, prog),
                    b: b.map(|b| Code::of(&b, &d.params, prog)),
                })
            }
        }
    }
}

/// Evaluator over one program. The memo table is cleared at the start of
/// every top-level evaluation.
pub struct Interp<'p> {
    prog: &'p Program,
    opts: EvalOptions,
    memo: RefCell<HashMap<(String, Vec<Int>, Mode), Int>>,
    depth: Cell<usize>,
    call_mode: Cell<Mode>,
    /// Naive trajectories of called ODEs by `(fun, ys)`; kept across
    /// evaluations since the program does not change.
    trajectories: RefCell<HashMap<(String, Vec<Int>), Vec<Int>>>,
    closed_parts: RefCell<HashMap<String, ClosedParts>>,
    code: Vec<DefCode>,
}

type ClosedParts = Result<Rc<(Special, Code, Code)>, String>;

impl<'p> Interp<'p> {
    pub fn new(prog: &'p Program) -> Self {
        Self::with_options(prog, EvalOptions::default())
    }

    pub fn with_options(prog: &'p Program, opts: EvalOptions) -> Self {
        Interp {
            prog,
            opts,
            memo: RefCell::new(HashMap::new()),
            depth: Cell::new(0),
            call_mode: Cell::new(Mode::Fast),
            trajectories: RefCell::new(HashMap::new()),
            closed_parts: RefCell::new(HashMap::new()),
            code: prog.defs().iter().map(|d| DefCode::of(d, prog)).collect(),
        }
    }

    pub fn program(&self) -> &Program {
        self.prog
    }

    pub fn eval(&self, fun: &str, args: &[Int], mode: Mode) -> Result<Int, EvalError> {
        let top = self.depth.get() == 0;
        if top {
            self.memo.borrow_mut().clear();
            self.call_mode.set(if mode == Mode::Naive { Mode::Naive } else { Mode::Fast });
        }
        self.depth.set(self.depth.get() + 1);
        let r = self.eval_inner(fun, args, mode, None);
        self.depth.set(self.depth.get() - 1);
        r
    }

    pub fn eval_naive(&self, fun: &str, args: &[Int]) -> Result<Int, EvalError> {
        self.eval(fun, args, Mode::Naive)
    }

    pub fn eval_fast(&self, fun: &str, args: &[Int]) -> Result<Int, EvalError> {
        self.eval(fun, args, Mode::Fast)
    }

    pub fn eval_closed_strict(&self, fun: &str, args: &[Int]) -> Result<Int, EvalError> {
        self.eval(fun, args, Mode::Closed)
    }

    /// Jump sequence of a fast evaluation.
    pub fn trace(&self, fun: &str, args: &[Int]) -> Result<EvalTrace, EvalError> {
        let d = self.lookup(fun, args)?;
        let Body::Ode(ode) = &d.body else {
            let v = self.eval(fun, args, Mode::Fast)?;
            return Ok(EvalTrace { along: Along::L, steps: vec![], assertions: vec![], value: v });
        };
        self.memo.borrow_mut().clear();
        self.call_mode.set(Mode::Fast);
        self.depth.set(self.depth.get() + 1);
        let mut tr = EvalTrace { along: ode.along, steps: vec![], assertions: vec![], value: Int::zero() };
        let r = self.fast(d, ode, args, Some(&mut tr));
        self.depth.set(self.depth.get() - 1);
        tr.value = r?;
        Ok(tr)
    }

    /// `f(t, ys)` for every `t` in `0..=x_max`, by naive stepping.
    pub fn naive_trajectory(&self, fun: &str, x_max: u64, ys: &[Int]) -> Result<Vec<Int>, EvalError> {
        let mut args = vec![Int::from(x_max)];
        args.extend_from_slice(ys);
        let d = self.lookup(fun, &args)?;
        self.memo.borrow_mut().clear();
        self.call_mode.set(Mode::Naive);
        self.depth.set(self.depth.get() + 1);
        let r = match &d.body {
            Body::Ode(ode) => self.naive(d, ode, &args, true),
            Body::Explicit(_) => Err(EvalError::UnknownFunction(format!("{fun} (not an ODE definition)"))),
        };
        self.depth.set(self.depth.get() - 1);
        r
    }

    fn lookup(&self, fun: &str, args: &[Int]) -> Result<&'p Defn, EvalError> {
        let d = self.prog.get(fun).ok_or_else(|| EvalError::UnknownFunction(fun.into()))?;
        if d.params.len() != args.len() {
            return Err(EvalError::Arity { fun: fun.into(), expected: d.params.len(), got: args.len() });
        }
        if let Some((index, value)) = args.iter().enumerate().find(|(_, a)| a.is_negative()) {
            return Err(EvalError::NegativeArgument { fun: fun.into(), index, value: value.clone() });
        }
        Ok(d)
    }

    fn eval_inner(&self, fun: &str, args: &[Int], mode: Mode, tr: Option<&mut EvalTrace>) -> Result<Int, EvalError> {
        let d = self.lookup(fun, args)?;
        match &d.body {
            Body::Explicit(_) => {
                let DefCode::Explicit(body) = self.code_of(d) else { unreachable!("code follows the body") };
                self.ev(body, &slots(args), None).map(Val::int)
            }
            Body::Ode(ode) => match mode {
                Mode::Fast => self.fast(d, ode, args, tr),
                Mode::Naive => self.naive(d, ode, args, false).map(|mut v| v.pop().expect("nonempty trajectory")),
                Mode::Closed => self.closed(d, ode, args),
            },
        }
    }

    /// Naive value of a called ODE, read from a trajectory that is extended
    /// by doubling so repeated calls with growing `x` stay linear overall.
    fn naive_call(&self, d: &Defn, ode: &Ode, args: &[Int]) -> Result<Option<Int>, EvalError> {
        let Some(x) = args[0].to_u64() else { return Ok(None) };
        let limit = self.opts.naive_limit.to_u64().unwrap_or(u64::MAX);
        if x > limit {
            return Ok(None);
        }
        let key = (d.name.clone(), args[1..].to_vec());
        if let Some(t) = self.trajectories.borrow().get(&key) {
            if let Some(v) = t.get(x as usize) {
                return Ok(Some(v.clone()));
            }
        }
        let have = self.trajectories.borrow().get(&key).map_or(0, |t| t.len() as u64);
        let bound = x.max(2 * have).max(63).min(limit);
        let mut full = vec![Int::from(bound)];
        full.extend_from_slice(&args[1..]);
        let traj = self.naive(d, ode, &full, true)?;
        let v = traj[x as usize].clone();
        self.trajectories.borrow_mut().insert(key, traj);
        Ok(Some(v))
    }

    pub fn clear_trajectories(&self) {
        self.trajectories.borrow_mut().clear();
    }

    fn code_of(&self, d: &Defn) -> &DefCode {
        &self.code[self.prog.position(&d.name).expect("definition of this program")]
    }

    fn call(&self, idx: Option<usize>, fun: &str, vals: Slots) -> Result<Val, Box<EvalError>> {
        let i = idx.ok_or_else(|| EvalError::UnknownFunction(fun.into()))?;
        let d = &self.prog.defs()[i];
        if let (DefCode::Explicit(body), true) = (&self.code[i], d.params.len() == vals.len()) {
            if let Some(index) = vals.iter().position(Val::is_negative) {
                let value = vals[index].clone().int();
                return Err(Box::new(EvalError::NegativeArgument { fun: fun.into(), index, value }));
            }
            // Explicit bodies are cheap next to hashing their arguments.
            self.depth.set(self.depth.get() + 1);
            let r = self.run(body, &vals, None);
            self.depth.set(self.depth.get() - 1);
            return r;
        }
        let args: Vec<Int> = vals.into_iter().map(Val::int).collect();
        Ok(Val::of(&self.call_ode(fun, args)?))
    }

    fn call_ode(&self, fun: &str, args: Vec<Int>) -> Result<Int, EvalError> {
        let mode = self.call_mode.get();
        if mode == Mode::Naive {
            let d = self.lookup(fun, &args)?;
            if let Body::Ode(ode) = &d.body {
                self.depth.set(self.depth.get() + 1);
                let r = self.naive_call(d, ode, &args);
                self.depth.set(self.depth.get() - 1);
                if let Some(v) = r? {
                    return Ok(v);
                }
            }
        }
        let key = (fun.to_string(), args, mode);
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(v.clone());
        }
        self.depth.set(self.depth.get() + 1);
        let r = self.eval_inner(fun, &key.1, mode, None);
        self.depth.set(self.depth.get() - 1);
        let v = r?;
        self.memo.borrow_mut().insert(key, v.clone());
        Ok(v)
    }

    fn ode_code(&self, d: &Defn) -> &OdeCode {
        let DefCode::Ode(c) = self.code_of(d) else { unreachable!("code follows the body") };
        c
    }

    fn init_value(&self, c: &OdeCode, args: &[Int]) -> Result<Int, EvalError> {
        self.ev(&c.init, &slots(&args[1..]), None).map(Val::int)
    }

    /// Evaluates the right-hand side at `t`, checking annotations first.
    fn step(
        &self,
        d: &Defn,
        ode: &Ode,
        c: &OdeCode,
        env: &mut Slots,
        t: &Int,
        f: &Int,
        log: Option<&mut Vec<AssertionRecord>>,
    ) -> Result<Int, EvalError> {
        env[0] = Val::of(t);
        let f = &Val::of(f);
        if let Some(b) = &c.b {
            let bv = self.ev(b, env, Some(f))?.int();
            let mut log = log;
            for a in &ode.annotations {
                let ok = match a {
                    Annotation::Nonneg => !bv.is_negative(),
                    Annotation::Bool01 => bv.is_zero() || bv.is_one(),
                };
                if let Some(l) = log.as_deref_mut() {
                    l.push(AssertionRecord { annotation: a.keyword(), t: t.clone(), ok });
                }
                if !ok {
                    return Err(EvalError::Assertion { fun: d.name.clone(), annotation: a.keyword(), t: t.clone(), value: bv });
                }
            }
        }
        self.ev(&c.rhs, env, Some(f)).map(Val::int)
    }

    fn fast(&self, d: &Defn, ode: &Ode, args: &[Int], mut tr: Option<&mut EvalTrace>) -> Result<Int, EvalError> {
        let x = &args[0];
        let n = match ode.along {
            Along::L => basis::len(x),
            Along::L2 => basis::len2(x),
        };
        let c = self.ode_code(d);
        let mut f = self.init_value(c, args)?;
        let mut env = slots(args);
        for u in 0..n {
            let t = jump_point(ode.along, u)?;
            let log = tr.as_deref_mut().map(|t| &mut t.assertions);
            let h = self.step(d, ode, c, &mut env, &t, &f, log)?;
            let next = &f + h;
            if let Some(tr) = tr.as_deref_mut() {
                tr.steps.push(Step { u, jump_point: t, f_before: f.clone(), f_after: next.clone() });
            }
            f = next;
        }
        Ok(f)
    }

    /// Steps every `t < x`; returns the whole trajectory when asked, else
    /// only the final value.
    fn naive(&self, d: &Defn, ode: &Ode, args: &[Int], keep: bool) -> Result<Vec<Int>, EvalError> {
        let x = &args[0];
        if x > &self.opts.naive_limit {
            return Err(EvalError::NaiveGuard { fun: d.name.clone(), x: x.clone(), limit: self.opts.naive_limit.clone() });
        }
        let x = x.to_u64().ok_or_else(|| EvalError::TooLarge(x.to_string()))?;
        let lam = |t: u64| match ode.along {
            Along::L => basis::len_u64(t),
            Along::L2 => basis::len_u64(basis::len_u64(t)),
        };
        let c = self.ode_code(d);
        let mut f = self.init_value(c, args)?;
        let mut env = slots(args);
        let mut out = Vec::new();
        for t in 0..x {
            if keep {
                out.push(f.clone());
            }
            let delta = lam(t + 1) - lam(t);
            // A zero difference multiplies the right-hand side away.
            if delta != 0 {
                let h = self.step(d, ode, c, &mut env, &Int::from(t), &f, None)?;
                f += Int::from(delta) * h;
            }
        }
        out.push(f);
        Ok(out)
    }

    /// `(A, B)` of a strict definition, or its family name when not strict.
    fn strict_parts(&self, d: &Defn, ode: &Ode) -> Result<ClosedParts, EvalError> {
        if let Some(p) = self.closed_parts.borrow().get(&d.name) {
            return Ok(p.clone());
        }
        let report = classify(self.prog, &d.name).map_err(|_| EvalError::UnknownFunction(d.name.clone()))?;
        let parts = if report.family.is_strict() {
            let dec = decompose_linear(&ode.rhs).expect("strict families decompose");
            let code = |e: &Expr| Code::of(e, &d.params, self.prog);
            Ok(Rc::new((dec.special, code(&dec.a()), code(&dec.b()))))
        } else {
            Err(report.family.to_string())
        };
        self.closed_parts.borrow_mut().insert(d.name.clone(), parts.clone());
        Ok(parts)
    }

    fn closed(&self, d: &Defn, ode: &Ode, args: &[Int]) -> Result<Int, EvalError> {
        let parts =
            self.strict_parts(d, ode)?.map_err(|family| EvalError::NotStrict { fun: d.name.clone(), family })?;
        let (special, a, b) = &*parts;
        let x = &args[0];
        let n = match ode.along {
            Along::L => basis::len(x),
            Along::L2 => basis::len2(x),
        };
        let g = self.init_value(self.ode_code(d), args)?;
        if *special == Special::Halving {
            return Ok(num_integer::Integer::div_floor(&g, &(Int::one() << n)));
        }
        let mut env = slots(args);
        let mut a_vals = Vec::new();
        let mut b_vals = Vec::new();
        for u in 0..n {
            env[0] = Val::of(&jump_point(ode.along, u)?);
            a_vals.push(self.ev(a, &env, None)?.int());
            b_vals.push(self.ev(b, &env, None)?.int());
        }
        // f = g * prod_{t} (1 + A_t) + sum_u B_u * prod_{t > u} (1 + A_t)
        let mut suffix = Int::one();
        let mut acc = Int::zero();
        for u in (0..n as usize).rev() {
            acc += &b_vals[u] * &suffix;
            suffix *= Int::one() + &a_vals[u];
        }
        Ok(acc + g * suffix)
    }

    pub fn eval_expr(&self, e: &Expr, env: &Env, self_value: Option<&Int>) -> Result<Int, EvalError> {
        let names: Vec<String> = env.keys().cloned().collect();
        let vals: Slots = env.values().map(Val::of).collect();
        let f = self_value.map(Val::of);
        self.ev(&Code::of(e, &names, self.prog), &vals, f.as_ref()).map(Val::int)
    }

    fn ev(&self, e: &Code, env: &[Val], self_value: Option<&Val>) -> Result<Val, EvalError> {
        self.run(e, env, self_value).map_err(|e| *e)
    }

    // Errors are boxed on the hot path so results stay two words wide.
    fn run(&self, e: &Code, env: &[Val], self_value: Option<&Val>) -> Result<Val, Box<EvalError>> {
        let ev = |e: &Code| self.run(e, env, self_value);
        let nat = |op: &'static str, v: Val| -> Result<Val, Box<EvalError>> {
            if v.is_negative() {
                Err(Box::new(EvalError::Domain { op, value: v.int() }))
            } else {
                Ok(v)
            }
        };
        Ok(match e {
            Code::Const(c) => c.clone(),
            Code::Slot(i) => env[*i].clone(),
            Code::Unbound(v) => return Err(Box::new(EvalError::Unbound(v.clone()))),
            Code::SelfRef => self_value.cloned().ok_or(EvalError::SelfOutsideOde)?,
            Code::Call(idx, name, args) => {
                let vals = args.iter().map(ev).collect::<Result<Slots, _>>()?;
                self.call(*idx, name, vals)?
            }
            Code::Add(a, b) => ev(a)?.add(ev(b)?),
            Code::Sub(a, b) => ev(a)?.sub(ev(b)?),
            Code::Mul(a, b) => ev(a)?.mul(ev(b)?),
            Code::Div2(a) => ev(a)?.div2(),
            Code::Sg(a) => ev(a)?.sg(),
            Code::Cosg(a) => ev(a)?.cosg(),
            Code::Len(a) => Val::S(nat("len", ev(a)?)?.len() as i64),
            Code::Len2(a) => Val::S(basis::len_u64(nat("len2", ev(a)?)?.len()) as i64),
            Code::Bit(i, y) => ev(i)?.bit(&ev(y)?),
            Code::Smash(a, b) => {
                let a = nat("smash", ev(a)?)?.int();
                let b = nat("smash", ev(b)?)?.int();
                let bits = basis::len(&a) * basis::len(&b);
                if bits > 1 << 32 {
                    return Err(Box::new(EvalError::TooLarge(format!("smash exponent {bits}"))));
                }
                Val::of(&basis::smash(&a, &b))
            }
        })
    }
}

fn slots(args: &[Int]) -> Slots {
    args.iter().map(Val::of).collect()
}

fn jump_point(along: Along, u: u64) -> Result<Int, EvalError> {
    match along {
        Along::L => Ok(basis::alpha(u)),
        Along::L2 if u < 40 => Ok(basis::alpha2(u)),
        Along::L2 => Err(EvalError::TooLarge(format!("alpha2({u})"))),
    }
}
