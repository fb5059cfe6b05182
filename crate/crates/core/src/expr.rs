//! Expression trees over the sg-polynomial signature, the degree calculus
//! and the syntactic shape analyses used by the classifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::basis::Int;
use crate::schema::{Body, Program};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(Int),
    Var(String),
    /// The function being defined, `f`.
    SelfRef,
    Call(String, Vec<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div2(Box<Expr>),
    Sg(Box<Expr>),
    Cosg(Box<Expr>),
    Len(Box<Expr>),
    Len2(Box<Expr>),
    Bit(Box<Expr>, Box<Expr>),
    Smash(Box<Expr>, Box<Expr>),
}

pub fn cst(v: i64) -> Expr {
    Expr::Const(Int::from(v))
}

pub fn var(name: &str) -> Expr {
    Expr::Var(name.to_string())
}

pub fn selfref() -> Expr {
    Expr::SelfRef
}

pub fn call(name: &str, args: Vec<Expr>) -> Expr {
    Expr::Call(name.to_string(), args)
}

pub fn sg(e: Expr) -> Expr {
    Expr::Sg(Box::new(e))
}

pub fn cosg(e: Expr) -> Expr {
    Expr::Cosg(Box::new(e))
}

pub fn div2(e: Expr) -> Expr {
    Expr::Div2(Box::new(e))
}

pub fn len(e: Expr) -> Expr {
    Expr::Len(Box::new(e))
}

pub fn len2(e: Expr) -> Expr {
    Expr::Len2(Box::new(e))
}

pub fn bit(i: Expr, y: Expr) -> Expr {
    Expr::Bit(Box::new(i), Box::new(y))
}

pub fn smash(a: Expr, b: Expr) -> Expr {
    Expr::Smash(Box::new(a), Box::new(b))
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

/// Unary minus, represented as `0 - e` like the surface syntax.
impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        cst(0) - self
    }
}

impl Expr {
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::SelfRef => vec![],
            Expr::Call(_, args) => args.iter().collect(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Bit(a, b)
            | Expr::Smash(a, b) => vec![a, b],
            Expr::Div2(a) | Expr::Sg(a) | Expr::Cosg(a) | Expr::Len(a) | Expr::Len2(a) => vec![a],
        }
    }

    pub fn contains_self(&self) -> bool {
        matches!(self, Expr::SelfRef) || self.children().iter().any(|c| c.contains_self())
    }

    /// True if `f` occurs outside every `sg`/`cosg`.
    pub fn has_bare_self(&self) -> bool {
        match self {
            Expr::SelfRef => true,
            Expr::Sg(_) | Expr::Cosg(_) => false,
            _ => self.children().iter().any(|c| c.has_bare_self()),
        }
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        match self {
            Expr::Var(v) => v == name,
            _ => self.children().iter().any(|c| c.mentions_var(name)),
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        if let Expr::Var(v) = self {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.vars(out);
        }
    }

    pub fn calls(&self, out: &mut BTreeSet<String>) {
        if let Expr::Call(name, _) = self {
            out.insert(name.clone());
        }
        for c in self.children() {
            c.calls(out);
        }
    }

    /// Replaces every `f` with `e`.
    pub fn subst_self(&self, e: &Expr) -> Expr {
        self.map(&|node| match node {
            Expr::SelfRef => Some(e.clone()),
            _ => None,
        })
    }

    /// Bottom-up rewrite: `rule` returns a replacement or `None` to recurse.
    pub fn map(&self, rule: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(r) = rule(self) {
            return r;
        }
        let m = |e: &Expr| Box::new(e.map(rule));
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::SelfRef => self.clone(),
            Expr::Call(n, args) => Expr::Call(n.clone(), args.iter().map(|a| a.map(rule)).collect()),
            Expr::Add(a, b) => Expr::Add(m(a), m(b)),
            Expr::Sub(a, b) => Expr::Sub(m(a), m(b)),
            Expr::Mul(a, b) => Expr::Mul(m(a), m(b)),
            Expr::Bit(a, b) => Expr::Bit(m(a), m(b)),
            Expr::Smash(a, b) => Expr::Smash(m(a), m(b)),
            Expr::Div2(a) => Expr::Div2(m(a)),
            Expr::Sg(a) => Expr::Sg(m(a)),
            Expr::Cosg(a) => Expr::Cosg(m(a)),
            Expr::Len(a) => Expr::Len(m(a)),
            Expr::Len2(a) => Expr::Len2(m(a)),
        }
    }

    pub fn as_const(&self) -> Option<&Int> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }
}

/// A member of a variable set: a named parameter or the self reference.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarRef {
    Named(String),
    SelfRef,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarSet(pub BTreeSet<VarRef>);

impl VarSet {
    pub fn of(names: &[&str]) -> VarSet {
        VarSet(names.iter().map(|n| if *n == "f" { VarRef::SelfRef } else { VarRef::Named(n.to_string()) }).collect())
    }

    pub fn self_only() -> VarSet {
        VarSet([VarRef::SelfRef].into_iter().collect())
    }

    fn has_named(&self, n: &str) -> bool {
        self.0.contains(&VarRef::Named(n.to_string()))
    }

    fn has_self(&self) -> bool {
        self.0.contains(&VarRef::SelfRef)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

/// Syntactic degree of `vars` in `e`.
///
/// Variables and `f` in the set count 1; `sg`, `cosg` and the length-valued
/// atoms count 0; `+`/`-` take the max, `*` the sum and `div2` is transparent.
/// A call is opaque: it contributes the largest degree among its arguments.
pub fn degree(vars: &VarSet, e: &Expr) -> u32 {
    match e {
        Expr::Const(_) => 0,
        Expr::Var(v) => u32::from(vars.has_named(v)),
        Expr::SelfRef => u32::from(vars.has_self()),
        Expr::Call(_, args) => args.iter().map(|a| degree(vars, a)).max().unwrap_or(0),
        Expr::Add(a, b) | Expr::Sub(a, b) => degree(vars, a).max(degree(vars, b)),
        Expr::Mul(a, b) => degree(vars, a) + degree(vars, b),
        Expr::Div2(a) => degree(vars, a),
        Expr::Sg(_) | Expr::Cosg(_) | Expr::Len(_) | Expr::Len2(_) | Expr::Bit(..) | Expr::Smash(..) => 0,
    }
}

/// [`degree`] with a scope check: every variable must be a listed parameter.
pub fn degree_in(params: &[String], vars: &VarSet, e: &Expr) -> Result<u32, AnalysisError> {
    let mut used = BTreeSet::new();
    e.vars(&mut used);
    if let Some(v) = used.into_iter().find(|v| !params.contains(v)) {
        return Err(AnalysisError::Unbound(v));
    }
    Ok(degree(vars, e))
}

/// No multiplication and no smash.
pub fn is_limited(e: &Expr) -> bool {
    !matches!(e, Expr::Mul(..) | Expr::Smash(..)) && e.children().iter().all(|c| is_limited(c))
}

pub fn is_sg_free(e: &Expr) -> bool {
    !matches!(e, Expr::Sg(_) | Expr::Cosg(_)) && e.children().iter().all(|c| is_sg_free(c))
}

/// How `f` occurs in an expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CallForm {
    NoCall,
    /// Only `sg(f)` / `cosg(f)`.
    Simple,
    /// Only `sg(f - c)` / `cosg(f - c)` with literal `c >= 0`.
    Offset(BTreeSet<Int>),
    General,
}

impl CallForm {
    /// Constants `c` against which `f` is compared, `{0}` for simple calls.
    pub fn offsets(&self) -> Option<BTreeSet<Int>> {
        match self {
            CallForm::NoCall => Some(BTreeSet::new()),
            CallForm::Simple => Some([Int::zero()].into_iter().collect()),
            CallForm::Offset(cs) => Some(cs.clone()),
            CallForm::General => None,
        }
    }

    pub fn is_simple_or_offset(&self) -> bool {
        matches!(self, CallForm::Simple | CallForm::Offset(_))
    }
}

impl fmt::Display for CallForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallForm::NoCall => write!(f, "none"),
            CallForm::Simple => write!(f, "simple"),
            CallForm::Offset(cs) => {
                let list: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "offset{{{}}}", list.join(","))
            }
            CallForm::General => write!(f, "general"),
        }
    }
}

#[derive(Default)]
struct CallScan {
    simple: bool,
    offsets: BTreeSet<Int>,
    general: bool,
}

fn scan_calls(e: &Expr, acc: &mut CallScan) {
    match e {
        Expr::SelfRef => acc.general = true,
        Expr::Sg(inner) | Expr::Cosg(inner) => match inner.as_ref() {
            Expr::SelfRef => acc.simple = true,
            Expr::Sub(a, c) if matches!(a.as_ref(), Expr::SelfRef) => match c.as_ref() {
                Expr::Const(v) if !v.is_negative() => {
                    acc.offsets.insert(v.clone());
                }
                _ => acc.general = true,
            },
            other => scan_calls(other, acc),
        },
        _ => {
            for c in e.children() {
                scan_calls(c, acc);
            }
        }
    }
}

pub fn call_form(e: &Expr) -> CallForm {
    let mut acc = CallScan::default();
    scan_calls(e, &mut acc);
    if acc.general {
        CallForm::General
    } else if acc.offsets.is_empty() {
        if acc.simple {
            CallForm::Simple
        } else {
            CallForm::NoCall
        }
    } else {
        let mut cs = acc.offsets;
        if acc.simple {
            cs.insert(Int::zero());
        }
        CallForm::Offset(cs)
    }
}

/// A summand with its sign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub neg: bool,
    pub expr: Expr,
}

/// Flattens nested `+`/`-` into signed summands, dropping literal zeros and
/// moving the sign of negative literals onto the term.
pub fn flatten_sum(e: &Expr) -> Vec<Term> {
    let mut out = Vec::new();
    push_terms(e, false, &mut out);
    out
}

fn push_terms(e: &Expr, neg: bool, out: &mut Vec<Term>) {
    match e {
        Expr::Add(a, b) => {
            push_terms(a, neg, out);
            push_terms(b, neg, out);
        }
        Expr::Sub(a, b) => {
            push_terms(a, neg, out);
            push_terms(b, !neg, out);
        }
        Expr::Const(c) if c.is_zero() => {}
        Expr::Const(c) if c.is_negative() => out.push(Term { neg: !neg, expr: Expr::Const(-c) }),
        _ => out.push(Term { neg, expr: e.clone() }),
    }
}

/// Rebuilds a sum; the empty sum is `0`.
pub fn sum_of(terms: &[Term]) -> Expr {
    let mut acc: Option<Expr> = None;
    for t in terms {
        acc = Some(match acc {
            None if t.neg => -t.expr.clone(),
            None => t.expr.clone(),
            Some(a) if t.neg => a - t.expr.clone(),
            Some(a) => a + t.expr.clone(),
        });
    }
    acc.unwrap_or_else(|| cst(0))
}

/// Flattens nested products into factors.
pub fn flatten_product(e: &Expr) -> Vec<Expr> {
    let mut out = Vec::new();
    fn go(e: &Expr, out: &mut Vec<Expr>) {
        match e {
            Expr::Mul(a, b) => {
                go(a, out);
                go(b, out);
            }
            _ => out.push(e.clone()),
        }
    }
    go(e, &mut out);
    out
}

pub fn product_of(factors: &[Expr]) -> Expr {
    let mut it = factors.iter();
    match it.next() {
        None => cst(1),
        Some(first) => it.fold(first.clone(), |acc, f| acc * f.clone()),
    }
}

/// Guard of a factor: `Some((arg, positive))` for `sg(arg)` (positive) and
/// `cosg(arg)` or `1 - sg(arg)` (negative).
fn guard_of(e: &Expr) -> Option<(&Expr, bool)> {
    match e {
        Expr::Sg(a) => Some((a, true)),
        Expr::Cosg(a) => Some((a, false)),
        Expr::Sub(one, s) if matches!(one.as_ref(), Expr::Const(c) if c.is_one()) => match s.as_ref() {
            Expr::Sg(a) => Some((a, false)),
            Expr::Cosg(a) => Some((a, true)),
            _ => None,
        },
        _ => None,
    }
}

/// Conservative witness that `e` only takes values in `{0, 1}`.
pub fn is_boolean_shaped(e: &Expr, prog: &Program) -> bool {
    boolean_shaped(e, prog, 0)
}

fn boolean_shaped(e: &Expr, prog: &Program, depth: usize) -> bool {
    if depth > 64 {
        return false;
    }
    if guard_of(e).is_some() {
        return true;
    }
    match e {
        Expr::Const(c) => c.is_zero() || c.is_one(),
        Expr::Bit(..) => true,
        Expr::Mul(..) => flatten_product(e).iter().all(|f| boolean_shaped(f, prog, depth + 1)),
        Expr::Call(name, _) => match prog.get(name).map(|d| &d.body) {
            Some(Body::Explicit(body)) => boolean_shaped(body, prog, depth + 1),
            _ => false,
        },
        Expr::Add(..) | Expr::Sub(..) => {
            let terms = flatten_sum(e);
            match terms.as_slice() {
                [] => true,
                [t] => !t.neg && boolean_shaped(&t.expr, prog, depth + 1),
                [t1, t2] => !t1.neg && !t2.neg && complementary(&t1.expr, &t2.expr, prog, depth),
                _ => false,
            }
        }
        _ => false,
    }
}

/// `a * s + b * (1 - s)` with `a`, `b` boolean-shaped.
fn complementary(p: &Expr, q: &Expr, prog: &Program, depth: usize) -> bool {
    let pf = flatten_product(p);
    let qf = flatten_product(q);
    for (i, fp) in pf.iter().enumerate() {
        let Some((arg_p, pos_p)) = guard_of(fp) else { continue };
        for (j, fq) in qf.iter().enumerate() {
            let Some((arg_q, pos_q)) = guard_of(fq) else { continue };
            if arg_p == arg_q && pos_p != pos_q {
                let rest_ok = |fs: &[Expr], skip: usize| {
                    fs.iter().enumerate().filter(|(k, _)| *k != skip).all(|(_, f)| boolean_shaped(f, prog, depth + 1))
                };
                if rest_ok(&pf, i) && rest_ok(&qf, j) {
                    return true;
                }
            }
        }
    }
    false
}

/// Conservative witness that `e` is never negative. Parameters are natural
/// numbers; `f` itself is not assumed nonnegative.
pub fn is_nonneg_shaped(e: &Expr, prog: &Program) -> bool {
    nonneg_shaped(e, prog, 0)
}

fn nonneg_shaped(e: &Expr, prog: &Program, depth: usize) -> bool {
    if depth > 64 {
        return false;
    }
    match e {
        Expr::Const(c) => !c.is_negative(),
        Expr::Var(_) => true,
        Expr::SelfRef => false,
        Expr::Add(a, b) | Expr::Mul(a, b) => nonneg_shaped(a, prog, depth + 1) && nonneg_shaped(b, prog, depth + 1),
        Expr::Div2(a) => nonneg_shaped(a, prog, depth + 1),
        Expr::Sg(_) | Expr::Cosg(_) | Expr::Bit(..) => true,
        Expr::Len(a) | Expr::Len2(a) => nonneg_shaped(a, prog, depth + 1),
        Expr::Smash(a, b) => nonneg_shaped(a, prog, depth + 1) && nonneg_shaped(b, prog, depth + 1),
        Expr::Sub(..) => guard_of(e).is_some(),
        Expr::Call(name, _) => match prog.get(name).map(|d| &d.body) {
            Some(Body::Explicit(body)) => nonneg_shaped(body, prog, depth + 1),
            _ => false,
        },
    }
}

/// Evaluates `e` under `env`, dispatching calls to the fast evaluator.
pub fn eval_expr(
    e: &Expr,
    env: &BTreeMap<String, Int>,
    self_value: Option<&Int>,
    prog: &Program,
) -> Result<Int, crate::interp::EvalError> {
    let interp = crate::interp::Interp::new(prog);
    interp.eval_expr(e, env, self_value)
}
