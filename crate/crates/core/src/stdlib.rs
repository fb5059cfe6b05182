//! The example corpus. Each entry ships a `.lode` source and an equivalent
//! program built directly from expression constructors; tests check the two
//! agree.

use thiserror::Error;

use crate::expr::{bit, call, cosg, cst, div2, len, sg, selfref, var, Expr};
use crate::schema::{Along, Class, Defn, Family, Program};

/// One classified function of an entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub fun: &'static str,
    pub family: Family,
    pub class: Class,
}

#[derive(Clone, Debug)]
pub struct StdEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub program: Program,
    /// Function checked by default; also `instances[0].fun`.
    pub main: &'static str,
    pub expected_family: Family,
    pub expected_class: Class,
    /// All ODE instantiations shipped with the entry, main first.
    pub instances: Vec<Instance>,
    /// Name of the reference oracle in the verification crate, if any.
    pub oracle: Option<&'static str>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no stdlib entry named `{0}`")]
pub struct UnknownEntry(pub String);

const NAMES: [&str; 14] = [
    "rsh", "bitp", "crn", "parity", "bsearch", "bcount", "itadd", "kk_mod2", "concat1", "fourbrn",
    "sum_calls", "logitadd", "l2_guess", "l2_linear",
];

pub fn stdlib_list() -> Vec<&'static str> {
    NAMES.to_vec()
}

pub fn stdlib_get(name: &str) -> Result<StdEntry, UnknownEntry> {
    let name = NAMES.iter().copied().find(|n| *n == name).ok_or_else(|| UnknownEntry(name.to_string()))?;
    let e = match name {
        "rsh" => entry(name, include_str!("../stdlib/rsh.lode"), rsh_defs(), Some("shift"), &[("rsh", Family::ODE3)]),
        "bitp" => {
            let mut defs = rsh_defs();
            defs.push(Defn::explicit(
                "bitp",
                &["x", "y"],
                call("rsh", vec![x(), y()]) - cst(2) * call("rsh", vec![x() + cst(1), y()]),
            ));
            entry(name, include_str!("../stdlib/bitp.lode"), defs, Some("bit"), &[("bitp", Family::EXPLICIT)])
        }
        "crn" => entry(
            name,
            include_str!("../stdlib/crn.lode"),
            crn_defs(),
            Some("crn_direct"),
            &[("crn", Family::ODE1), ("crn_b", Family::ODE1), ("crn_c", Family::ODE1)],
        ),
        "parity" => entry(name, include_str!("../stdlib/parity.lode"), parity_defs(), Some("parity"), &[("parity", Family::B0ODE)]),
        "bsearch" => entry(
            name,
            include_str!("../stdlib/bsearch.lode"),
            bsearch_defs(),
            Some("allones"),
            &[
                ("bsearch", Family::ODE0),
                ("bsearch2", Family::ODE0),
                ("bsearch3", Family::ODE0),
                ("bsearch_simple", Family::ACODE),
                ("bsearch_bound", Family::ACODE_OFFSET),
            ],
        ),
        "bcount" => entry(
            name,
            include_str!("../stdlib/bcount.lode"),
            vec![Defn::ode("bcount", &["x", "y"], Along::L, cst(0), bit(len(x()), y()))],
            Some("popcount"),
            &[("bcount", Family::PODE_STRICT)],
        ),
        "itadd" => entry(
            name,
            include_str!("../stdlib/itadd.lode"),
            itadd_defs(),
            None,
            &[("itadd", Family::PODE_STRICT), ("itadd2", Family::PODE_STRICT), ("itadd3", Family::PODE_STRICT)],
        ),
        "kk_mod2" => entry(
            name,
            include_str!("../stdlib/kk_mod2.lode"),
            kk_defs(),
            Some("kk_reset"),
            &[("kk_mod2", Family::KK_ACC2), ("kk_last", Family::KK_ACC2), ("kk_pair", Family::KK_ACC2)],
        ),
        "concat1" => entry(
            name,
            include_str!("../stdlib/concat1.lode"),
            concat_defs(),
            None,
            &[("concat1", Family::NC1_CONCAT), ("concat_indep", Family::NC1_CONCAT), ("concat_offset", Family::NC1_CONCAT)],
        ),
        "fourbrn" => entry(
            name,
            include_str!("../stdlib/fourbrn.lode"),
            fourbrn_defs(),
            Some("fourbrn_direct"),
            &[("fourbrn", Family::BODE), ("fourbrn_b", Family::BODE), ("fourbrn_c", Family::BODE)],
        ),
        "sum_calls" => entry(
            name,
            include_str!("../stdlib/sum_calls.lode"),
            sum_calls_defs(),
            None,
            &[("sum_calls", Family::AC1_SUM), ("sum_calls2", Family::AC1_SUM), ("sum_calls3", Family::AC1_SUM)],
        ),
        "logitadd" => entry(
            name,
            include_str!("../stdlib/logitadd.lode"),
            logitadd_defs(),
            Some("logadd_direct"),
            &[("logitadd", Family::L2_STRICT), ("logitadd2", Family::L2_STRICT), ("logitadd3", Family::L2_STRICT)],
        ),
        "l2_guess" => entry(
            name,
            include_str!("../stdlib/l2_guess.lode"),
            l2_guess_defs(),
            None,
            &[("l2_guess", Family::L2_NONSTRICT), ("l2_guess2", Family::L2_NONSTRICT), ("l2_guess3", Family::L2_NONSTRICT)],
        ),
        "l2_linear" => entry(
            name,
            include_str!("../stdlib/l2_linear.lode"),
            l2_linear_defs(),
            None,
            &[("l2_linear", Family::L2_LINEAR), ("l2_linear2", Family::L2_LINEAR), ("l2_linear3", Family::L2_LINEAR)],
        ),
        _ => unreachable!("catalog name without a definition"),
    };
    Ok(e)
}

/// Every entry in catalog order.
pub fn stdlib_all() -> Vec<StdEntry> {
    NAMES.iter().map(|n| stdlib_get(n).expect("catalog name")).collect()
}

fn entry(
    name: &'static str,
    source: &'static str,
    defs: Vec<Defn>,
    oracle: Option<&'static str>,
    instances: &[(&'static str, Family)],
) -> StdEntry {
    let instances: Vec<Instance> = instances
        .iter()
        .map(|&(fun, family)| Instance { fun, family, class: family.class() })
        .collect();
    StdEntry {
        name,
        source,
        program: Program::new(defs),
        main: instances[0].fun,
        expected_family: instances[0].family,
        expected_class: instances[0].class,
        instances,
        oracle,
    }
}

fn x() -> Expr {
    var("x")
}

fn y() -> Expr {
    var("y")
}

fn z() -> Expr {
    var("z")
}

fn t() -> Expr {
    var("t")
}

fn v() -> Expr {
    var("v")
}

fn f() -> Expr {
    selfref()
}

fn xy() -> Vec<Expr> {
    vec![x(), y()]
}

fn lx() -> Expr {
    len(x())
}

fn ode(name: &str, params: &[&str], init: Expr, rhs: Expr) -> Defn {
    Defn::ode(name, params, Along::L, init, rhs)
}

fn ode2(name: &str, params: &[&str], init: Expr, rhs: Expr) -> Defn {
    Defn::ode(name, params, Along::L2, init, rhs)
}

fn rsh_defs() -> Vec<Defn> {
    vec![ode("rsh", &["x", "y"], y(), div2(f()) - f())]
}

fn crn_defs() -> Vec<Defn> {
    let sel = || call("crn_sel", xy());
    let rhs = |h0: &str, h1: &str| {
        f() + call(h0, vec![x(), z()]) * cosg(sel()) + call(h1, vec![x(), z()]) * sg(sel())
    };
    let p = &["x", "y", "z"];
    vec![
        Defn::explicit("crn_sel", &["x", "y"], bit(len(y()) - len(x()) - cst(1), y())),
        Defn::explicit("crn_h0", &["x", "z"], cst(0)),
        Defn::explicit("crn_h1", &["x", "z"], cst(1)),
        ode("crn", p, cst(0), rhs("crn_h0", "crn_h1")),
        Defn::explicit("crn_diag", &["x", "z"], call("crn", vec![x(), x(), z()])),
        Defn::explicit("crn_b_h0", &["x", "z"], cst(1)),
        Defn::explicit("crn_b_h1", &["x", "z"], cst(0)),
        ode("crn_b", p, cst(1), rhs("crn_b_h0", "crn_b_h1")),
        Defn::explicit("crn_c_h0", &["x", "z"], bit(lx(), z())),
        Defn::explicit("crn_c_h1", &["x", "z"], cosg(bit(lx(), z()))),
        ode("crn_c", p, bit(cst(0), z()), rhs("crn_c_h0", "crn_c_h1")),
    ]
}

fn parity_defs() -> Vec<Defn> {
    let next = || bit(lx() + cst(1), y());
    vec![ode(
        "parity",
        &["x", "y"],
        bit(cst(0), y()),
        -f() + (sg(f()) * cosg(next()) + cosg(f()) * sg(next())),
    )]
}

fn bsearch_defs() -> Vec<Defn> {
    let mut defs = vec![];
    let preds = [
        ("bsearch_r", "bsearch", bit(lx(), y())),
        ("bsearch_r2", "bsearch2", cosg(bit(lx(), y()))),
        ("bsearch_r3", "bsearch3", sg(bit(lx(), y()) + bit(lx() + cst(1), y()))),
    ];
    for (r, name, body) in preds {
        defs.push(Defn::explicit(r, &["x", "y"], body));
        defs.push(ode(
            name,
            &["x", "y"],
            sg(call(r, vec![cst(0), y()])),
            (call(r, xy()) - cst(1)) * f(),
        ));
    }
    defs.push(ode("bsearch_simple", &["x", "y"], y(), (sg(f()) * call("bsearch_r", xy()) - cst(1)) * f()));
    defs.push(ode("bsearch_bound", &["x", "y"], y(), (sg(f() - cst(3)) - cst(1)) * f()));
    defs
}

fn itadd_defs() -> Vec<Defn> {
    vec![
        Defn::explicit("itadd_h", &["x", "y"], div2(y()) + lx()),
        ode("itadd", &["x", "y"], y(), call("itadd_h", xy())),
        ode("itadd2", &["x", "y"], cst(0), lx() * bit(lx(), y())),
        ode("itadd3", &["x", "y"], cst(1), y() - cst(2) * lx() - cst(1)),
    ]
}

fn kk_defs() -> Vec<Defn> {
    let k = || call("kk_k", xy());
    let one = || call("kk_one", vec![x()]);
    let pair = || bit(lx(), y()) * bit(lx() + cst(1), y());
    vec![
        Defn::explicit("kk_k", &["x", "y"], bit(lx(), y())),
        ode("kk_mod2", &["x", "y"], cst(0), -k() * f() + k() * cosg(bit(lx() + cst(1), y()))),
        Defn::explicit("kk_one", &["x"], cst(1)),
        ode("kk_last", &["x", "y"], cst(0), -one() * f() + one() * bit(lx(), y())),
        ode("kk_pair", &["x", "y"], cst(1), -pair() * f() + pair() * cosg(bit(lx() + cst(2), y()))),
    ]
}

fn concat_defs() -> Vec<Defn> {
    let b = |d: i64| if d == 0 { bit(lx(), y()) } else { bit(lx() + cst(d), y()) };
    vec![
        ode("concat1", &["x", "y"], bit(cst(0), y()), f() + (sg(f()) * cosg(b(1)) + cosg(f()) * b(1))),
        ode("concat_indep", &["x", "y"], cst(1), f() + (sg(f()) * b(0) + cosg(f()) * b(0))),
        ode(
            "concat_offset",
            &["x", "y"],
            cst(0),
            f() + (sg(f() - cst(2)) * cosg(b(0)) + cosg(f() - cst(2)) * b(0)),
        ),
    ]
}

/// The `-f + sum h(v) * [f = v]` encoding over values 0..4.
fn fourbrn_rhs(h: &str) -> Expr {
    let hv = |val: i64| call(h, vec![lx(), call("fb_z", xy()), cst(val)]);
    let mut rhs = -f() + hv(0) * cosg(f());
    rhs = rhs + hv(1) * sg(f()) * cosg(f() - cst(1));
    for val in 2..=4 {
        rhs = rhs + hv(val) * sg(f() - cst(val - 1)) * cosg(f() - cst(val));
    }
    rhs
}

fn fourbrn_instance(prefix: &str, h0: Expr, h1: Expr, init: i64) -> Vec<Defn> {
    let n0 = format!("{prefix}_h0");
    let n1 = format!("{prefix}_h1");
    let nh = format!("{prefix}_h");
    let tv = || vec![t(), v()];
    vec![
        Defn::explicit(&n0, &["t", "v"], h0),
        Defn::explicit(&n1, &["t", "v"], h1),
        Defn::explicit(&nh, &["t", "z", "v"], call(&n0, tv()) * cosg(z()) + call(&n1, tv()) * sg(z())),
        ode(prefix, &["x", "y"], cst(init), fourbrn_rhs(&nh)),
    ]
}

fn fourbrn_defs() -> Vec<Defn> {
    let mut defs = vec![Defn::explicit("fb_z", &["x", "y"], bit(len(y()) - len(x()) - cst(1), y()))];
    defs.extend(fourbrn_instance("fourbrn", cosg(v() - cst(3)) * (v() + cst(1)), div2(v()), 2));
    defs.push(Defn::explicit("fourbrn_diag", &["x"], call("fourbrn", vec![x(), x()])));
    defs.extend(fourbrn_instance(
        "fourbrn_b",
        cosg(v() + t() - cst(4)) * (v() + t()) + sg(v() + t() - cst(4)) * cst(4),
        cosg(v() - cst(1)) * cst(4) + sg(v() - cst(1)) * div2(v()),
        0,
    ));
    defs.extend(fourbrn_instance(
        "fourbrn_c",
        bit(cst(0), t() + v()) * cst(3),
        sg(v()) * div2(v() + cst(3)),
        4,
    ));
    defs
}

fn sum_calls_defs() -> Vec<Defn> {
    vec![
        ode("sum_calls", &["x", "y"], bit(cst(0), y()), sg(f()) * lx() + bit(lx(), y())),
        ode("sum_calls2", &["x", "y"], cst(0), cosg(f()) * y() + sg(f()) * bit(lx(), y())),
        ode("sum_calls3", &["x", "y"], y(), sg(f()) * div2(y())),
    ]
}

fn logitadd_defs() -> Vec<Defn> {
    vec![
        ode2("logitadd", &["x", "y"], y(), div2(y()) + bit(lx(), y())),
        ode2("logitadd2", &["x", "y"], cst(0), y()),
        ode2("logitadd3", &["x", "y"], cst(1), y() - len(lx()) - cst(1)),
    ]
}

fn l2_guess_defs() -> Vec<Defn> {
    vec![
        ode2("l2_guess", &["x", "y"], y(), sg(f() - lx()) * bit(lx(), y()) + cst(1)),
        ode2("l2_guess2", &["x", "y"], cst(0), sg(f()) * y() + cosg(f()) * cst(1)),
        ode2("l2_guess3", &["x", "y"], bit(cst(0), y()), cosg(f() - cst(2)) * (y() + lx())),
    ]
}

fn l2_linear_defs() -> Vec<Defn> {
    vec![
        ode2("l2_linear", &["x", "y"], cst(1), bit(lx(), y()) * f() + sg(f() - cst(3)) * y()),
        ode2("l2_linear2", &["x", "y"], y(), f() + cst(1)),
        ode2("l2_linear3", &["x", "y"], cst(2), (y() - cst(1)) * f() - lx()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Int;
    use crate::interp::{Interp, Mode};
    use crate::schema::{classify, wellformed};
    use crate::syntax::{parse_program, print_program};

    #[test]
    fn catalog_size_and_lookup() {
        assert_eq!(stdlib_list().len(), 14);
        assert!(stdlib_get("nope").is_err());
        assert_eq!(stdlib_get("parity").unwrap().expected_class, Class::FACC2);
    }

    #[test]
    fn sources_match_builtin_forms() {
        for e in stdlib_all() {
            let parsed = parse_program(e.source).unwrap_or_else(|d| panic!("{}: {:?}", e.name, d));
            assert_eq!(parsed, e.program, "{}", e.name);
            assert!(wellformed(&e.program).is_empty(), "{}", e.name);
        }
    }

    #[test]
    fn print_reparse_fixed_point() {
        for e in stdlib_all() {
            let printed = print_program(&e.program);
            let again = parse_program(&printed).unwrap();
            assert_eq!(again, e.program, "{}", e.name);
            assert_eq!(print_program(&again), printed);
        }
    }

    #[test]
    fn every_instance_classifies_as_expected() {
        for e in stdlib_all() {
            for inst in &e.instances {
                let r = classify(&e.program, inst.fun).unwrap();
                assert_eq!((r.family, r.effective_class), (inst.family, inst.class), "{}\n{}", inst.fun, r.render());
            }
        }
    }

    #[test]
    fn rsh_example() {
        let e = stdlib_get("rsh").unwrap();
        let v = Interp::new(&e.program).eval("rsh", &[Int::from(5), Int::from(53)], Mode::Fast).unwrap();
        assert_eq!(v, Int::from(53 >> 3));
    }
}
