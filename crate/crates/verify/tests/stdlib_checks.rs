use lode_circuit::{Backend, CompileOptions};
use lode_core::expr::{bit, cosg, cst, len, selfref, sg, var};
use lode_core::schema::{Along, Defn};
use lode_core::stdlib::{stdlib_all, stdlib_get};
use lode_core::{Class, Family, Int, Program};
use lode_verify::*;
use proptest::prelude::*;

fn i(v: u64) -> Int {
    Int::from(v)
}

fn small_cfg() -> VerifyConfig {
    VerifyConfig {
        x_bound: 300,
        y_samples: 6,
        circuit_samples: 200,
        circuit_sizes: vec![2, 5],
        depth_sizes: vec![4, 8],
        nc1_depth_sizes: vec![8, 16],
        exhaustive_bits: 10,
        ..VerifyConfig::default()
    }
}

#[test]
fn every_entry_verifies() {
    for e in stdlib_all() {
        for r in verify_entry(&e, &small_cfg()) {
            assert!(r.passed(), "{}: {}", e.name, r.render());
        }
    }
}

#[test]
fn oracle_examples() {
    let e = stdlib_get("parity").unwrap();
    let cases = (0..1 << 9).map(|x| vec![i(x), i(x)]);
    let r = check_oracle(&e.program, "parity", "x < 2^9", cases);
    assert!(r.passed(), "{}", r.render());
    assert_eq!(r.cases, 512);

    let e = stdlib_get("rsh").unwrap();
    let cases = (0..64).flat_map(|x| (0..64).map(move |y| vec![i(x), i(y)]));
    assert!(check_oracle(&e.program, "rsh", "x, y < 64", cases).passed());

    let e = stdlib_get("crn").unwrap();
    for fun in ["crn", "crn_b", "crn_c"] {
        let cases = (0..256).flat_map(|x| [0u64, 5, 1023].map(|z| vec![i(x), i(x), i(z)]));
        let r = check_oracle(&e.program, fun, "x < 2^8", cases);
        assert!(r.passed(), "{}", r.render());
    }
    let r = check_oracle(&e.program, "crn_diag", "x < 2^8", (0..256).map(|x| vec![i(x), i(3)]));
    assert!(r.passed(), "{}", r.render());

    let e = stdlib_get("fourbrn").unwrap();
    for fun in ["fourbrn", "fourbrn_b", "fourbrn_c"] {
        let r = check_oracle(&e.program, fun, "x < 2^8", (0..256).map(|x| vec![i(x), i(x)]));
        assert!(r.passed(), "{}", r.render());
    }
}

#[test]
fn oracle_catches_a_perturbed_definition() {
    // parity with the flip reading bit len(x) instead of len(x) + 1.
    let b = bit(len(var("x")), var("y"));
    let f = selfref;
    let wrong = Program::new(vec![Defn::ode(
        "parity",
        &["x", "y"],
        Along::L,
        bit(cst(0), var("y")),
        -f() + (sg(f()) * cosg(b.clone()) + cosg(f()) * sg(b)),
    )]);
    let r = check_oracle(&wrong, "parity", "x < 2^8", (0..256).map(|x| vec![i(x), i(x)]));
    assert!(!r.passed());
    assert!(r.failed > 0 && !r.failures.is_empty());
}

#[test]
fn circuit_examples() {
    let opts = CompileOptions::default();
    let p = stdlib_get("parity").unwrap().program;
    let r = check_circuit(&p, "parity", 12, 12, 0, 1, None, &opts);
    assert!(r.passed(), "{}", r.render());
    assert_eq!(r.cases, 4096);
    assert!(r.name.ends_with("acc2"));

    let p = stdlib_get("bcount").unwrap().program;
    let r = check_circuit(&p, "bcount", 10, 12, 0, 1, None, &opts);
    assert!(r.passed() && r.cases == 1024, "{}", r.render());

    let p = stdlib_get("fourbrn").unwrap().program;
    let r = check_circuit(&p, "fourbrn", 16, 12, 500, 9, None, &opts);
    assert!(r.passed() && r.cases == 500 && r.seed == Some(9), "{}", r.render());

    // Forcing a backend below the class is an error, reported not panicked.
    let p = stdlib_get("bcount").unwrap().program;
    let r = check_circuit(&p, "bcount", 4, 12, 0, 1, Some(Backend::Fac0), &opts);
    assert!(!r.passed() && r.error.is_some());
}

#[test]
fn class_examples() {
    let p = stdlib_get("parity").unwrap().program;
    assert!(check_class(&p, "parity", Family::B0ODE, Class::FACC2).passed());
    assert!(!check_class(&p, "parity", Family::B0ODE, Class::FAC0).passed());
    let p = stdlib_get("bcount").unwrap().program;
    assert!(check_class(&p, "bcount", Family::PODE_STRICT, Class::FTC0).passed());
    let p = stdlib_get("sum_calls").unwrap().program;
    assert!(check_class(&p, "sum_calls", Family::AC1_SUM, Class::FAC1).passed());
}

#[test]
fn depth_examples() {
    let opts = CompileOptions::default();
    let p = stdlib_get("parity").unwrap().program;
    let t = depth_growth(&p, "parity", &[4, 8, 16, 32, 64], None, &opts).unwrap();
    assert!(t.is_flat(), "{}", t.render());
    assert!(check_depth(&t).passed());

    let p = stdlib_get("bsearch").unwrap().program;
    let t = depth_growth(&p, "bsearch", &[4, 8, 16, 32, 64], None, &opts).unwrap();
    assert!(t.is_flat() && check_depth(&t).passed(), "{}", t.render());

    let p = stdlib_get("fourbrn").unwrap().program;
    let t = depth_growth(&p, "fourbrn", &[8, 16, 32, 64], None, &opts).unwrap();
    assert_eq!(t.backend, "nc1");
    assert!(check_depth(&t).passed(), "{}", t.render());
    let step = t.max_step().unwrap();
    assert!(step <= NC1_STEP);
    let (c, _, resid) = t.log_fit().unwrap();
    assert!(c > 0.0 && c <= NC1_STEP as f64, "slope {c}");
    // Rounding the fit up by its residual covers every measured depth.
    let (c, d, _) = t.log_fit().unwrap();
    for r in &t.rows {
        assert!((r.depth as f64) <= c * (r.n as f64).log2() + d + resid.ceil());
    }
}

#[test]
fn reports_are_reproducible() {
    let p = stdlib_get("kk_mod2").unwrap().program;
    let a = check_fast_vs_naive(&p, "kk_mod2", 200, 8, 12, 42);
    let b = check_fast_vs_naive(&p, "kk_mod2", 200, 8, 12, 42);
    assert_eq!((a.cases, a.failed, a.seed), (b.cases, b.failed, b.seed));
    assert_eq!(a.cases, 8 * 201);
    let closed = check_closed_vs_fast(&p, "kk_mod2", 200, 8, 12, 42);
    assert!(closed.passed(), "{}", closed.render());
}

proptest! {
    #[test]
    fn shift_oracle_matches_machine_shift(x in 0u64..1 << 20, y in 0u64..1 << 40) {
        let bits = 64 - x.leading_zeros();
        let expect = if bits >= 64 { 0 } else { y >> bits };
        prop_assert_eq!(oracle("shift", &[i(x), i(y)]).unwrap(), i(expect));
    }

    #[test]
    fn parity_is_popcount_mod_two(y in 0u64..u64::MAX) {
        let p = oracle("parity", &[i(y)]).unwrap();
        prop_assert_eq!(p, i(u64::from(y.count_ones()) % 2));
    }

    #[test]
    fn crn_identity_instance_returns_the_prefix(x in 0u64..1 << 30, z in 0u64..1 << 10) {
        prop_assert_eq!(oracle("crn_direct", &[i(x), i(x), i(z)]).unwrap(), i(x));
    }

    #[test]
    fn fourbrn_stays_in_range(x in 0u64..1 << 40, y in 0u64..1 << 40) {
        for name in ["fourbrn_direct", "fourbrn_b_direct", "fourbrn_c_direct"] {
            let v = oracle(name, &[i(x), i(y)]).unwrap();
            prop_assert!(v >= i(0) && v <= i(4));
        }
    }
}
