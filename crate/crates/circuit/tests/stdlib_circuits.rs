// Compiled stdlib functions against the fast evaluator, on every backend
// that accepts them.

use lode_circuit::compile::{compile, compile_with, decode_inputs, input_blocks, Backend, CompileError, Compiled};
use lode_circuit::{validate, CompileOptions};
use lode_core::basis::alpha;
use lode_core::interp::Interp;
use lode_core::schema::Family;
use lode_core::stdlib::{stdlib_all, stdlib_get};
use lode_core::Program;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn agree(prog: &Program, fun: &str, n: usize, c: &Compiled, rng: &mut ChaCha8Rng) {
    let k = input_blocks(prog, fun).unwrap();
    let bits = n * k;
    let it = Interp::new(prog);
    let cases: Vec<Vec<bool>> = if bits <= 10 {
        (0..1u64 << bits).map(|v| (0..bits).map(|i| (v >> i) & 1 == 1).collect()).collect()
    } else {
        (0..200).map(|_| (0..bits).map(|_| rng.gen()).collect()).collect()
    };
    for input in cases {
        let mut args = vec![alpha(n as u64)];
        args.extend(decode_inputs(&input, n, k));
        let want = it.eval_fast(fun, &args).unwrap();
        let got = c.decode(&c.circuit.eval(&input).unwrap());
        assert_eq!(got, want, "{fun} n={n} args={args:?}");
    }
}

#[test]
fn every_backend_matches_eval_fast() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut compiled = 0;
    for e in stdlib_all() {
        for inst in &e.instances {
            for backend in Backend::ALL {
                for n in [0usize, 1, 2, 3, 4, 5, 8, 13] {
                    let c = match compile_with(&e.program, inst.fun, n, backend, &CompileOptions::default()) {
                        Ok(c) => c,
                        Err(CompileError::ClassTooHigh { .. } | CompileError::NotCompilable { .. }) => break,
                        Err(err) => panic!("{} {backend:?} n={n}: {err}", inst.fun),
                    };
                    let problems = validate(&c.circuit, &backend.gate_set());
                    let macros = c.circuit.macro_count() > 0;
                    assert!(problems.is_empty() || macros, "{} {backend:?} n={n}: {problems:?}", inst.fun);
                    agree(&e.program, inst.fun, n, &c, &mut rng);
                    compiled += 1;
                }
            }
        }
    }
    assert!(compiled > 300, "only {compiled} circuits compiled");
}

#[test]
fn automatic_backend_follows_the_class() {
    for e in stdlib_all() {
        let expect = match e.expected_family {
            Family::AC1_SUM | Family::L2_NONSTRICT | Family::L2_LINEAR => None,
            _ => Backend::for_class(e.expected_class),
        };
        match compile(&e.program, e.main, 4, &CompileOptions::default()) {
            Ok(c) => assert_eq!(Some(c.backend), expect, "{}", e.main),
            Err(err) => assert!(expect.is_none(), "{}: {err}", e.main),
        }
    }
}

#[test]
fn forcing_a_smaller_backend_is_refused() {
    let p = stdlib_get("parity").unwrap();
    assert!(matches!(
        compile_with(&p.program, "parity", 4, Backend::Fac0, &CompileOptions::default()),
        Err(CompileError::ClassTooHigh { .. })
    ));
    let b = stdlib_get("bcount").unwrap();
    assert!(matches!(compile_with(&b.program, "bcount", 4, Backend::Acc2, &CompileOptions::default()), Err(CompileError::ClassTooHigh { .. })));
    let l = stdlib_get("l2_linear").unwrap();
    assert!(matches!(compile_with(&l.program, "l2_linear", 4, Backend::Nc1, &CompileOptions::default()), Err(CompileError::NotCompilable { .. })));
}

#[test]
fn iterated_products_are_macros() {
    let p = lode_core::syntax::parse_program("fun prod(x, y) {\n    init: 1;\n    d/dl: bit(len(x), y) * f;\n}\n").unwrap();
    let c = compile_with(&p, "prod", 4, Backend::Tc0, &CompileOptions::default()).unwrap();
    assert!(c.circuit.macro_count() > 0);
    assert!(validate(&c.circuit, &Backend::Tc0.gate_set()).iter().any(|m| m.contains("MACRO")));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    agree(&p, "prod", 4, &c, &mut rng);
}

#[test]
fn narrow_words_are_rejected_on_nc1() {
    let e = stdlib_get("itadd").unwrap();
    let opts = CompileOptions { width: 8 };
    assert!(matches!(compile_with(&e.program, "itadd", 16, Backend::Nc1, &opts), Err(CompileError::Width { .. })));
    assert!(compile_with(&e.program, "itadd", 4, Backend::Nc1, &opts).is_ok());
}
