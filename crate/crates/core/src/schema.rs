//! Programs of explicit definitions and initial-value problems, and the
//! classifier mapping each definition to a schema family and circuit class.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::basis::Int;
use crate::expr::{
    call_form, flatten_product, flatten_sum, is_boolean_shaped, is_limited, is_nonneg_shaped, product_of, sum_of,
    CallForm, Expr, Term,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Along {
    L,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Annotation {
    Nonneg,
    Bool01,
}

impl Annotation {
    pub fn keyword(self) -> &'static str {
        match self {
            Annotation::Nonneg => "nonneg",
            Annotation::Bool01 => "bool01",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ode {
    pub along: Along,
    pub init: Expr,
    pub rhs: Expr,
    pub annotations: Vec<Annotation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    Explicit(Expr),
    Ode(Ode),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Defn {
    pub name: String,
    pub params: Vec<String>,
    pub body: Body,
}

impl Defn {
    pub fn explicit(name: &str, params: &[&str], body: Expr) -> Defn {
        Defn { name: name.into(), params: params.iter().map(|p| p.to_string()).collect(), body: Body::Explicit(body) }
    }

    pub fn ode(name: &str, params: &[&str], along: Along, init: Expr, rhs: Expr) -> Defn {
        Defn {
            name: name.into(),
            params: params.iter().map(|p| p.to_string()).collect(),
            body: Body::Ode(Ode { along, init, rhs, annotations: vec![] }),
        }
    }

    pub fn with_annotation(mut self, a: Annotation) -> Defn {
        if let Body::Ode(ode) = &mut self.body {
            ode.annotations.push(a);
        }
        self
    }

    pub fn as_ode(&self) -> Option<&Ode> {
        match &self.body {
            Body::Ode(o) => Some(o),
            Body::Explicit(_) => None,
        }
    }
}

/// Ordered definitions; calls may only target earlier definitions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    defs: Vec<Defn>,
    // Programs are small; ordered lookup beats hashing the name.
    index: BTreeMap<String, usize>,
}

impl Program {
    pub fn new(defs: Vec<Defn>) -> Program {
        let mut index = BTreeMap::new();
        for (i, d) in defs.iter().enumerate() {
            index.entry(d.name.clone()).or_insert(i);
        }
        Program { defs, index }
    }

    pub fn defs(&self) -> &[Defn] {
        &self.defs
    }

    pub fn get(&self, name: &str) -> Option<&Defn> {
        self.index.get(name).map(|&i| &self.defs[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn push(&mut self, d: Defn) {
        self.index.entry(d.name.clone()).or_insert(self.defs.len());
        self.defs.push(d);
    }
}

pub const BUILTINS: [&str; 7] = ["sg", "cosg", "div2", "len", "len2", "bit", "smash"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DiagKind {
    Duplicate,
    Reserved,
    Scope,
    SelfRefInExplicit,
    Cycle,
    Unresolved,
    ForwardReference,
    Arity,
    Annotation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub defn: String,
    pub kind: DiagKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in `{}`: {}", self.defn, self.message)
    }
}

pub fn wellformed(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (pos, d) in p.defs().iter().enumerate() {
        let mut diag = |kind, message: String| out.push(Diagnostic { defn: d.name.clone(), kind, message });
        if !seen.insert(d.name.clone()) {
            diag(DiagKind::Duplicate, format!("duplicate definition of `{}`", d.name));
        }
        if BUILTINS.contains(&d.name.as_str()) || d.name == "f" {
            diag(DiagKind::Reserved, format!("`{}` is a reserved name", d.name));
        }
        let mut params = BTreeSet::new();
        for prm in &d.params {
            if !params.insert(prm) {
                diag(DiagKind::Duplicate, format!("duplicate parameter `{prm}`"));
            }
            if prm == "f" || BUILTINS.contains(&prm.as_str()) {
                diag(DiagKind::Reserved, format!("parameter `{prm}` uses a reserved name"));
            }
        }
        let mut bodies: Vec<&Expr> = Vec::new();
        match &d.body {
            Body::Explicit(e) => {
                if e.contains_self() {
                    diag(DiagKind::SelfRefInExplicit, "self reference `f` in an explicit body".into());
                }
                bodies.push(e);
            }
            Body::Ode(ode) => {
                if d.params.is_empty() {
                    diag(DiagKind::Scope, "an ODE definition needs a derivation parameter".into());
                }
                if ode.init.contains_self() {
                    diag(DiagKind::Scope, "initial value refers to `f`".into());
                }
                if let Some(x) = d.params.first() {
                    if ode.init.mentions_var(x) {
                        diag(DiagKind::Scope, format!("initial value refers to the derivation variable `{x}`"));
                    }
                }
                let mut anns = BTreeSet::new();
                for a in &ode.annotations {
                    if !anns.insert(*a) {
                        diag(DiagKind::Annotation, format!("annotation `{}` repeated", a.keyword()));
                    }
                }
                if !ode.annotations.is_empty() && decompose_linear(&ode.rhs).is_none() {
                    diag(DiagKind::Annotation, "annotations need a right-hand side linear in `f`".into());
                }
                bodies.push(&ode.init);
                bodies.push(&ode.rhs);
            }
        }
        for e in bodies {
            let mut vars = BTreeSet::new();
            e.vars(&mut vars);
            for v in vars {
                if !d.params.contains(&v) {
                    diag(DiagKind::Scope, format!("unbound variable `{v}`"));
                }
            }
            check_calls(e, p, pos, d, &mut diag);
        }
    }
    out
}

fn check_calls(e: &Expr, p: &Program, pos: usize, d: &Defn, diag: &mut impl FnMut(DiagKind, String)) {
    if let Expr::Call(name, args) = e {
        if name == &d.name {
            diag(DiagKind::Cycle, format!("`{name}` calls itself"));
        } else {
            match p.position(name) {
                None => diag(DiagKind::Unresolved, format!("call to undefined function `{name}`")),
                Some(i) if i > pos => diag(DiagKind::ForwardReference, format!("call to later definition `{name}`")),
                Some(i) => {
                    let want = p.defs()[i].params.len();
                    if want != args.len() {
                        diag(DiagKind::Arity, format!("`{name}` takes {want} arguments, got {}", args.len()));
                    }
                }
            }
        }
    }
    for c in e.children() {
        check_calls(c, p, pos, d, diag);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Special {
    None,
    Halving,
}

/// `rhs = A * f + B`, with `A` kept as its list of signed summands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearDecomposition {
    pub a_terms: Vec<Term>,
    pub b_terms: Vec<Term>,
    pub special: Special,
}

impl LinearDecomposition {
    pub fn a(&self) -> Expr {
        sum_of(&self.a_terms)
    }

    pub fn b(&self) -> Expr {
        sum_of(&self.b_terms)
    }

    /// No occurrence of `f` in the coefficients at all.
    pub fn is_strict(&self) -> bool {
        self.special == Special::Halving
            || !(self.a_terms.iter().chain(&self.b_terms).any(|t| t.expr.contains_self()))
    }

    pub fn a_is_zero(&self) -> bool {
        self.special == Special::None && self.a_terms.is_empty()
    }

    pub fn b_is_zero(&self) -> bool {
        self.b_terms.is_empty()
    }

    /// `A` is the single literal `c`.
    pub fn a_is_const(&self, c: i64) -> bool {
        match self.a_terms.as_slice() {
            [t] => match t.expr.as_const() {
                Some(v) => {
                    let v = if t.neg { -v.clone() } else { v.clone() };
                    v == Int::from(c)
                }
                None => false,
            },
            _ => false,
        }
    }

    /// `A = K - 1` where `K` is the sum of the remaining summands.
    pub fn a_as_k_minus_one(&self) -> Option<Expr> {
        let minus_one = self.a_terms.iter().filter(|t| t.neg && t.expr.as_const().is_some_and(|c| c.is_one())).count();
        if minus_one != 1 || self.a_terms.len() < 2 {
            return None;
        }
        let rest: Vec<Term> = self
            .a_terms
            .iter()
            .filter(|t| !(t.neg && t.expr.as_const().is_some_and(|c| c.is_one())))
            .cloned()
            .collect();
        if rest.iter().any(|t| t.neg || t.expr.as_const().is_some()) {
            return None;
        }
        Some(sum_of(&rest))
    }

    /// `A = -K` with `K` a single non-literal summand.
    pub fn a_as_neg_k(&self) -> Option<Expr> {
        match self.a_terms.as_slice() {
            [t] if t.neg && t.expr.as_const().is_none() => Some(t.expr.clone()),
            _ => None,
        }
    }

    /// `A` is one positive non-literal summand.
    pub fn a_single_positive(&self) -> Option<Expr> {
        match self.a_terms.as_slice() {
            [t] if !t.neg && t.expr.as_const().is_none() => Some(t.expr.clone()),
            _ => None,
        }
    }

    /// `B = k * k'`; returns `k'`.
    pub fn b_as_multiple_of(&self, k: &Expr) -> Option<Expr> {
        match self.b_terms.as_slice() {
            [] => Some(crate::expr::cst(0)),
            [t] if !t.neg => {
                let mut factors = flatten_product(&t.expr);
                let kf = flatten_product(k);
                for f in &kf {
                    let i = factors.iter().position(|g| g == f)?;
                    factors.remove(i);
                }
                Some(product_of(&factors))
            }
            _ => None,
        }
    }
}

impl fmt::Display for LinearDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.special {
            Special::Halving => write!(f, "halving"),
            Special::None => write!(f, "A = {}, B = {}", crate::syntax::print_expr(&self.a()), crate::syntax::print_expr(&self.b())),
        }
    }
}

enum Piece {
    B(Term),
    A(Term),
}

/// Splits `rhs` into `A * f + B`, or recognizes `div2(f) - f`.
pub fn decompose_linear(rhs: &Expr) -> Option<LinearDecomposition> {
    let terms = flatten_sum(rhs);
    let halving = terms.len() == 2
        && terms.iter().any(|t| !t.neg && matches!(&t.expr, Expr::Div2(a) if matches!(a.as_ref(), Expr::SelfRef)))
        && terms.iter().any(|t| t.neg && t.expr == Expr::SelfRef);
    if halving {
        return Some(LinearDecomposition { a_terms: vec![], b_terms: vec![], special: Special::Halving });
    }
    let mut a_terms = Vec::new();
    let mut b_terms = Vec::new();
    for t in terms {
        for piece in classify_term(t, 0)? {
            match piece {
                Piece::A(t) => a_terms.push(t),
                Piece::B(t) => b_terms.push(t),
            }
        }
    }
    Some(LinearDecomposition { a_terms, b_terms, special: Special::None })
}

fn classify_term(t: Term, depth: usize) -> Option<Vec<Piece>> {
    if depth > 16 {
        return None;
    }
    if !t.expr.has_bare_self() {
        return Some(vec![Piece::B(t)]);
    }
    let factors = flatten_product(&t.expr);
    let bare: Vec<usize> = (0..factors.len()).filter(|&i| factors[i].has_bare_self()).collect();
    if bare.len() != 1 {
        return None;
    }
    let i = bare[0];
    let rest: Vec<Expr> = factors.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.clone()).collect();
    match &factors[i] {
        Expr::SelfRef => {
            // A coefficient that is a sum is split into one summand per term.
            let coef = product_of(&rest);
            let mut out = Vec::new();
            if rest.len() == 1 {
                for s in flatten_sum(&rest[0]) {
                    out.push(Piece::A(Term { neg: s.neg != t.neg, expr: s.expr }));
                }
            } else {
                out.push(Piece::A(Term { neg: t.neg, expr: coef }));
            }
            Some(out)
        }
        sum @ (Expr::Add(..) | Expr::Sub(..)) => {
            let mut out = Vec::new();
            for s in flatten_sum(sum) {
                let mut fs = rest.clone();
                fs.insert(0, s.expr);
                let term = Term { neg: s.neg != t.neg, expr: product_of(&fs) };
                out.extend(classify_term(term, depth + 1)?);
            }
            Some(out)
        }
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Class {
    FAC0,
    FACC2,
    FTC0,
    FNC1,
    FAC1,
    FP,
    UNKNOWN,
}

impl Class {
    pub fn join(self, other: Class) -> Class {
        self.max(other)
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    ODE1,
    ODE3,
    ODE0,
    /// Strict `-f + K` with boolean `K`: the value is the last `K`.
    RESET,
    ACODE,
    ACODE_OFFSET,
    KK_ACC2,
    B0ODE,
    PODE_STRICT,
    TCODE_SUM,
    TCODE_PROD,
    NC1_CONCAT,
    BODE,
    AC1_SUM,
    L2_STRICT,
    L2_NONSTRICT,
    L2_LINEAR,
    FP_LINEAR,
    /// An explicit definition; its class comes from its body and callees.
    EXPLICIT,
    UNKNOWN,
}

impl Family {
    /// Circuit class attached to a family. `EXPLICIT` has none of its own.
    pub fn class(self) -> Class {
        use Family::*;
        match self {
            ODE1 | ODE3 | ODE0 | RESET | ACODE | ACODE_OFFSET | L2_STRICT => Class::FAC0,
            KK_ACC2 | B0ODE => Class::FACC2,
            PODE_STRICT | TCODE_SUM | TCODE_PROD | L2_NONSTRICT => Class::FTC0,
            NC1_CONCAT | BODE | L2_LINEAR => Class::FNC1,
            AC1_SUM => Class::FAC1,
            FP_LINEAR => Class::FP,
            EXPLICIT => Class::FAC0,
            UNKNOWN => Class::UNKNOWN,
        }
    }

    /// Families whose right-hand side never refers to `f` under a guard, so
    /// the sum-of-products solution applies.
    pub fn is_strict(self) -> bool {
        use Family::*;
        matches!(self, ODE1 | ODE3 | ODE0 | RESET | KK_ACC2 | PODE_STRICT | L2_STRICT)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub check: String,
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub fun: String,
    pub family: Family,
    pub class: Class,
    /// Class after joining with every callee's class.
    pub effective_class: Class,
    pub annotation_trusted: bool,
    pub evidence: Vec<Evidence>,
}

impl ClassReport {
    pub fn render(&self) -> String {
        let mut s = format!("{}: family={} class={} effective={}", self.fun, self.family, self.class, self.effective_class);
        if self.annotation_trusted {
            s.push_str(" (annotation-trusted)");
        }
        for e in &self.evidence {
            s.push_str(&format!("\n  {}: {}", e.check, e.outcome));
        }
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

struct Ctx<'a> {
    prog: &'a Program,
    ode: &'a Ode,
    evidence: Vec<Evidence>,
    trusted: bool,
}

impl Ctx<'_> {
    fn note(&mut self, check: &str, outcome: impl Into<String>) {
        self.evidence.push(Evidence { check: check.into(), outcome: outcome.into() });
    }

    fn has(&self, a: Annotation) -> bool {
        self.ode.annotations.contains(&a)
    }

    /// Syntactic check, or the `bool01` annotation.
    fn b_boolean(&mut self, b: &Expr) -> bool {
        if is_boolean_shaped(b, self.prog) {
            self.note("B boolean", "syntactic");
            true
        } else if self.has(Annotation::Bool01) {
            self.note("B boolean", "annotation-trusted");
            self.trusted = true;
            true
        } else {
            self.note("B boolean", "no");
            false
        }
    }

    fn b_nonneg(&mut self, b: &Expr) -> bool {
        if is_nonneg_shaped(b, self.prog) {
            self.note("B nonnegative", "syntactic");
            true
        } else if self.has(Annotation::Nonneg) || self.has(Annotation::Bool01) {
            self.note("B nonnegative", "annotation-trusted");
            self.trusted = true;
            true
        } else {
            self.note("B nonnegative", "no");
            false
        }
    }

    fn boolean(&mut self, what: &str, e: &Expr) -> bool {
        let ok = is_boolean_shaped(e, self.prog);
        self.note(what, if ok { "syntactic" } else { "no" });
        ok
    }
}

pub fn classify(p: &Program, fun: &str) -> Result<ClassReport, ClassifyError> {
    let d = p.get(fun).ok_or_else(|| ClassifyError::UnknownFunction(fun.into()))?;
    let mut callees = BTreeSet::new();
    let (family, evidence, trusted) = match &d.body {
        Body::Explicit(e) => {
            e.calls(&mut callees);
            let mut ev = vec![Evidence { check: "body".into(), outcome: "explicit composition".into() }];
            let mul = has_general_mul(e);
            ev.push(Evidence { check: "general multiplication".into(), outcome: mul.to_string() });
            (Family::EXPLICIT, ev, false)
        }
        Body::Ode(ode) => {
            ode.init.calls(&mut callees);
            ode.rhs.calls(&mut callees);
            let mut ctx = Ctx { prog: p, ode, evidence: vec![], trusted: false };
            let fam = classify_ode(&mut ctx);
            (fam, ctx.evidence, ctx.trusted)
        }
    };
    let mut class = family.class();
    if let (Body::Explicit(e), Family::EXPLICIT) = (&d.body, family) {
        if has_general_mul(e) {
            class = Class::FTC0;
        }
    }
    let mut effective = class;
    for c in &callees {
        if c == fun {
            continue;
        }
        if let Ok(r) = classify(p, c) {
            effective = effective.join(r.effective_class);
        } else {
            effective = Class::UNKNOWN;
        }
    }
    Ok(ClassReport {
        fun: fun.into(),
        family,
        class,
        effective_class: effective,
        annotation_trusted: trusted,
        evidence,
    })
}

/// Multiplication where neither side is a literal.
fn has_general_mul(e: &Expr) -> bool {
    if let Expr::Mul(a, b) = e {
        if a.as_const().is_none() && b.as_const().is_none() {
            return true;
        }
    }
    matches!(e, Expr::Smash(..)) || e.children().iter().any(|c| has_general_mul(c))
}

fn classify_ode(ctx: &mut Ctx) -> Family {
    let along = ctx.ode.along;
    ctx.note("along", format!("{along:?}"));
    let Some(dec) = decompose_linear(&ctx.ode.rhs) else {
        ctx.note("linear in f", "no");
        return Family::UNKNOWN;
    };
    ctx.note("linear in f", dec.to_string());
    let strict = dec.is_strict();
    ctx.note("strict", strict.to_string());
    let a = dec.a();
    let b = dec.b();
    let form = if dec.special == Special::Halving {
        CallForm::NoCall
    } else {
        call_form(&sum_of(&[dec.a_terms.clone(), dec.b_terms.clone()].concat()))
    };
    ctx.note("calls", form.to_string());

    if along == Along::L2 {
        if dec.special == Special::Halving {
            ctx.note("halving along len2", "not covered");
            return Family::UNKNOWN;
        }
        if strict && dec.a_is_zero() {
            let lim = is_limited(&b);
            ctx.note("B limited", lim.to_string());
            if lim {
                return Family::L2_STRICT;
            }
        }
        if dec.a_is_zero() {
            return Family::L2_NONSTRICT;
        }
        return Family::L2_LINEAR;
    }

    if strict {
        if dec.special == Special::Halving {
            return Family::ODE3;
        }
        if dec.a_is_const(1) && ctx.b_boolean(&b) {
            return Family::ODE1;
        }
        if dec.a_is_const(-1) && ctx.b_boolean(&b) {
            return Family::RESET;
        }
        if let Some(k) = dec.a_as_k_minus_one() {
            if dec.b_is_zero() && ctx.boolean("K boolean", &k) {
                return Family::ODE0;
            }
        }
        if let Some(k) = dec.a_as_neg_k() {
            if ctx.boolean("k boolean", &k) {
                if let Some(k2) = dec.b_as_multiple_of(&k) {
                    if ctx.boolean("k' boolean", &k2) {
                        return Family::KK_ACC2;
                    }
                }
            }
        }
        ctx.note("A", crate::syntax::print_expr(&a));
        return Family::PODE_STRICT;
    }

    if let Some(k) = dec.a_as_k_minus_one() {
        if dec.b_is_zero() && form.is_simple_or_offset() && ctx.boolean("K boolean", &k) {
            return if form == CallForm::Simple { Family::ACODE } else { Family::ACODE_OFFSET };
        }
    }
    if dec.a_is_const(-1) && !a.contains_self() && ctx.b_boolean(&b) {
        return Family::B0ODE;
    }
    if dec.a_is_zero() && form == CallForm::Simple && ctx.b_boolean(&b) {
        return Family::TCODE_SUM;
    }
    if let Some(k) = dec.a_single_positive() {
        if dec.b_is_zero() && form == CallForm::Simple && ctx.boolean("A boolean", &k) {
            return Family::TCODE_PROD;
        }
    }
    if dec.a_is_const(1) && form.is_simple_or_offset() && ctx.b_boolean(&b) {
        return Family::NC1_CONCAT;
    }
    if dec.a_is_const(-1) && form.is_simple_or_offset() && ctx.b_nonneg(&b) {
        return Family::BODE;
    }
    if dec.a_is_zero() && form == CallForm::Simple && ctx.b_nonneg(&b) {
        return Family::AC1_SUM;
    }
    Family::FP_LINEAR
}

/// Strictness of the right-hand side as seen by [`classify`].
pub fn ode_is_strict(rhs: &Expr) -> bool {
    decompose_linear(rhs).is_some_and(|d| d.is_strict())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    fn x() -> Expr {
        var("x")
    }
    fn y() -> Expr {
        var("y")
    }
    fn f() -> Expr {
        selfref()
    }

    fn one(d: Defn) -> Program {
        Program::new(vec![d])
    }

    fn fam(p: &Program, name: &str) -> (Family, Class) {
        let r = classify(p, name).unwrap();
        (r.family, r.class)
    }

    #[test]
    fn decomposition_examples() {
        let k = call("k", vec![x(), y()]);
        let d = decompose_linear(&(-f() + k.clone())).unwrap();
        assert!(d.a_is_const(-1));
        assert_eq!(d.b(), k);
        let d = decompose_linear(&((k.clone() - cst(1)) * f())).unwrap();
        assert_eq!(d.a_as_k_minus_one(), Some(k));
        assert!(d.b_is_zero());
        let d = decompose_linear(&(div2(f()) - f())).unwrap();
        assert_eq!(d.special, Special::Halving);
        assert!(decompose_linear(&(f() * f())).is_none());
        assert!(decompose_linear(&div2(f())).is_none());
    }

    #[test]
    fn wellformed_diagnostics() {
        let p = Program::new(vec![Defn::explicit("g", &["x"], call("g", vec![x()]))]);
        assert!(wellformed(&p).iter().any(|d| d.kind == DiagKind::Cycle));
        let p = one(Defn::ode("h", &["x", "y"], Along::L, x(), f()));
        assert!(wellformed(&p).iter().any(|d| d.kind == DiagKind::Scope));
        let p = one(Defn::explicit("bad", &["x"], f()));
        assert!(wellformed(&p).iter().any(|d| d.kind == DiagKind::SelfRefInExplicit));
        let p = Program::new(vec![
            Defn::explicit("a", &["x"], call("b", vec![x()])),
            Defn::explicit("b", &["x"], x()),
        ]);
        assert!(wellformed(&p).iter().any(|d| d.kind == DiagKind::ForwardReference));
        let p = Program::new(vec![Defn::explicit("a", &["x"], x()), Defn::explicit("b", &["x"], call("a", vec![x(), x()]))]);
        assert!(wellformed(&p).iter().any(|d| d.kind == DiagKind::Arity));
        let p = one(Defn::explicit("a", &["x"], y()));
        assert!(wellformed(&p).iter().any(|d| d.kind == DiagKind::Scope));
    }

    #[test]
    fn strict_families() {
        let b = bit(len(x()), y());
        let p = one(Defn::ode("r", &["x", "y"], Along::L, y(), div2(f()) - f()));
        assert_eq!(fam(&p, "r"), (Family::ODE3, Class::FAC0));
        let p = one(Defn::ode("c", &["x", "y"], Along::L, cst(0), f() + b.clone()));
        assert_eq!(fam(&p, "c"), (Family::ODE1, Class::FAC0));
        let p = one(Defn::ode("c", &["x", "y"], Along::L, cst(0), -f() + b.clone()));
        assert_eq!(fam(&p, "c"), (Family::RESET, Class::FAC0));
        let p = one(Defn::ode("c", &["x", "y"], Along::L, y(), (b.clone() - cst(1)) * f()));
        assert_eq!(fam(&p, "c"), (Family::ODE0, Class::FAC0));
        let p = one(Defn::ode("c", &["x", "y"], Along::L, cst(0), -b.clone() * f() + b.clone() * sg(y())));
        assert_eq!(fam(&p, "c"), (Family::KK_ACC2, Class::FACC2));
        let p = one(Defn::ode("c", &["x", "y"], Along::L, cst(0), b.clone()));
        assert_eq!(fam(&p, "c"), (Family::PODE_STRICT, Class::FTC0));
        let p = one(Defn::ode("c", &["x", "y"], Along::L, cst(0), cst(3) * f() + y() * y()));
        assert_eq!(fam(&p, "c"), (Family::PODE_STRICT, Class::FTC0));
    }

    #[test]
    fn nonstrict_families() {
        let b = bit(len(x()), y());
        let cases = vec![
            ((sg(f()) * b.clone() - cst(1)) * f(), Family::ACODE),
            ((sg(f() - cst(3)) - cst(1)) * f(), Family::ACODE_OFFSET),
            (-f() + (sg(f()) * cosg(b.clone()) + cosg(f()) * sg(b.clone())), Family::B0ODE),
            (sg(f()) * b.clone(), Family::TCODE_SUM),
            (sg(f()) * b.clone() * f(), Family::TCODE_PROD),
            (f() + sg(f()) * b.clone(), Family::NC1_CONCAT),
            (-f() + sg(f() - cst(2)) * y() + cosg(f()) * cst(3), Family::BODE),
            (sg(f()) * y() + b.clone(), Family::AC1_SUM),
            (sg(f()) * f() + y(), Family::FP_LINEAR),
            (f() * f(), Family::UNKNOWN),
        ];
        for (rhs, want) in cases {
            let p = one(Defn::ode("g", &["x", "y"], Along::L, y(), rhs.clone()));
            assert_eq!(classify(&p, "g").unwrap().family, want, "{rhs:?}");
        }
    }

    #[test]
    fn len2_families() {
        let cases = vec![
            (div2(y()) + bit(len(x()), y()), Family::L2_STRICT),
            (y() * y(), Family::L2_NONSTRICT),
            (sg(f()) * y(), Family::L2_NONSTRICT),
            (bit(len(x()), y()) * f() + y(), Family::L2_LINEAR),
        ];
        for (rhs, want) in cases {
            let p = one(Defn::ode("g", &["x", "y"], Along::L2, y(), rhs));
            assert_eq!(classify(&p, "g").unwrap().family, want);
        }
    }

    #[test]
    fn annotations_are_recorded() {
        let p = one(Defn::ode("g", &["x", "y"], Along::L, y(), -f() + sg(f()) * (y() - x())).with_annotation(Annotation::Nonneg));
        let r = classify(&p, "g").unwrap();
        assert_eq!(r.family, Family::BODE);
        assert!(r.annotation_trusted);
        let p = one(Defn::ode("g", &["x", "y"], Along::L, y(), -f() + sg(f()) * (y() - x())));
        assert_eq!(classify(&p, "g").unwrap().family, Family::FP_LINEAR);
    }

    #[test]
    fn bare_self_demotes_b0ode() {
        let b = bit(len(x()), y());
        let base = -f() + (sg(f()) * cosg(b.clone()) + cosg(f()) * sg(b.clone()));
        let p = one(Defn::ode("g", &["x", "y"], Along::L, y(), base.clone()));
        assert_eq!(fam(&p, "g").1, Class::FACC2);
        for extra in [f(), f() * b.clone(), sg(y()) * f()] {
            let p = one(Defn::ode("g", &["x", "y"], Along::L, y(), base.clone() + extra));
            let fa = classify(&p, "g").unwrap().family;
            assert!(matches!(fa, Family::FP_LINEAR | Family::UNKNOWN), "{fa:?}");
        }
    }

    #[test]
    fn reordering_is_stable() {
        let b = bit(len(x()), y());
        let r1 = -f() + (sg(f()) * cosg(b.clone()) + cosg(f()) * sg(b.clone()));
        let r2 = (cosg(f()) * sg(b.clone()) + cosg(b.clone()) * sg(f())) - f();
        let p1 = one(Defn::ode("g", &["x", "y"], Along::L, y(), r1));
        let p2 = one(Defn::ode("g", &["x", "y"], Along::L, y(), r2));
        assert_eq!(fam(&p1, "g"), fam(&p2, "g"));
        let rn = -f() + (sg(f()) * cosg(bit(len(var("t")), var("u"))) + cosg(f()) * sg(bit(len(var("t")), var("u"))));
        let p3 = one(Defn::ode("g", &["t", "u"], Along::L, var("u"), rn));
        assert_eq!(fam(&p1, "g"), fam(&p3, "g"));
    }

    #[test]
    fn explicit_class_joins_callees() {
        let p = Program::new(vec![
            Defn::ode("par", &["x", "y"], Along::L, cst(0), -f() + (sg(f()) * cosg(bit(len(x()), y())) + cosg(f()) * sg(bit(len(x()), y())))),
            Defn::explicit("d", &["x"], call("par", vec![x(), x()])),
        ]);
        let r = classify(&p, "d").unwrap();
        assert_eq!(r.family, Family::EXPLICIT);
        assert_eq!(r.effective_class, Class::FACC2);
        assert!(classify(&p, "nope").is_err());
    }
}
