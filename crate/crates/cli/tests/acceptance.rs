//! Acceptance run: one PASS/FAIL line per criterion, written straight to
//! stderr so it shows up without `--nocapture`. Criteria run one after
//! another in a single test so the timed ones are not competing for CPU.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use lode_circuit::{compile_with, deserialize, serialize, validate, Arg, Backend, Circuit, CompileError, CompileOptions, FaninMode, Gate, Op};
use lode_core::expr::{degree, div2, selfref, sg, var, Expr, VarSet};
use lode_core::schema::{Along, Body, Defn};
use lode_core::stdlib::{stdlib_all, stdlib_get};
use lode_core::syntax::{parse_expr, parse_program, print_program};
use lode_core::{classify, EvalError, Family, Int, Interp, Program};
use lode_verify::{check_circuit, check_depth, check_oracle, depth_growth, evaluator_checks, oracle, oracle_cases, CheckReport, NC1_STEP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const C1_X_BOUND: u64 = 4096;
const C1_Y_SAMPLES: usize = 64;
const C1_Y_BITS: usize = 16;
const C1_BUDGET: Duration = Duration::from_secs(60);
const C4_RANDOM_CHECKS: usize = 10_000;
const C5_EXHAUSTIVE_N: usize = 12;
const C5_SAMPLED_N: [usize; 2] = [16, 20];
const C5_SAMPLES: usize = 10_000;
const C5_BUDGET: Duration = Duration::from_secs(300);
const C6_FLAT_SIZES: [usize; 5] = [4, 8, 16, 32, 64];
const C6_NC1_SIZES: [usize; 4] = [8, 16, 32, 64];
const C7_BITS: u64 = 1000;
const C7_BUDGET: Duration = Duration::from_secs(1);
const C8_RANDOM_CIRCUITS: usize = 100;

struct Outcome {
    pass: bool,
    summary: String,
    problems: Vec<String>,
}

fn line(n: usize, title: &str, o: &Outcome) {
    let mut e = std::io::stderr();
    let _ = writeln!(e, "{} criterion {n} ({title}): {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
    for p in o.problems.iter().take(10) {
        let _ = writeln!(e, "    {p}");
    }
}

fn collect(reports: &[CheckReport]) -> (u64, u64, Vec<String>) {
    let cases = reports.iter().map(|r| r.cases).sum();
    let failed = reports.iter().map(|r| r.failed + u64::from(r.error.is_some())).sum();
    let problems = reports.iter().filter(|r| !r.passed()).map(|r| r.render()).collect();
    (cases, failed, problems)
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut reports = vec![];
    for e in stdlib_all() {
        let strict = e.expected_family.is_strict();
        reports.extend(evaluator_checks(&e.program, e.main, C1_X_BOUND, C1_Y_SAMPLES, C1_Y_BITS, SEED, strict));
    }
    let took = start.elapsed();
    let (cases, failed, mut problems) = collect(&reports);
    let closed = reports.iter().filter(|r| r.name.starts_with("closed")).count();
    if took > C1_BUDGET {
        problems.push(format!("took {:.1} s, budget {} s", took.as_secs_f64(), C1_BUDGET.as_secs()));
    }
    Outcome {
        pass: failed == 0 && took <= C1_BUDGET,
        summary: format!(
            "14 entries x <= {C1_X_BOUND}, {C1_Y_SAMPLES} y each, {closed} closed-form families, {cases} cases, {failed} failures, {:.1} s (budget {} s)",
            took.as_secs_f64(),
            C1_BUDGET.as_secs()
        ),
        problems,
    }
}

fn criterion2() -> Outcome {
    let mut reports = vec![];
    for (entry, funs) in [
        ("parity", &["parity"][..]),
        ("bcount", &["bcount"]),
        ("rsh", &["rsh"]),
        ("crn", &["crn", "crn_b", "crn_c"]),
        ("fourbrn", &["fourbrn", "fourbrn_b", "fourbrn_c"]),
    ] {
        let p = stdlib_get(entry).unwrap().program;
        for fun in funs {
            let (population, cases) = oracle_cases(&p, fun, SEED);
            reports.push(check_oracle(&p, fun, &population, cases));
        }
    }
    let (cases, failed, problems) = collect(&reports);
    Outcome {
        pass: failed == 0,
        summary: format!("{} oracle checks, {cases} cases, {failed} failures", reports.len()),
        problems,
    }
}

fn criterion3() -> Outcome {
    let mut problems = vec![];
    let mut ok = 0;
    for e in stdlib_all() {
        match classify(&e.program, e.main) {
            Ok(r) if (r.family, r.effective_class) == (e.expected_family, e.expected_class) => ok += 1,
            Ok(r) => problems.push(format!("{}: got {}/{}, expected {}/{}", e.name, r.family, r.effective_class, e.expected_family, e.expected_class)),
            Err(err) => problems.push(format!("{}: {err}", e.name)),
        }
    }
    // Demotion: a bare f added to the parity right-hand side.
    let parity = stdlib_get("parity").unwrap().program;
    let Body::Ode(ode) = &parity.get("parity").unwrap().body else { unreachable!() };
    let y = || var("y");
    let extras = [selfref(), selfref() * y(), sg(y()) * selfref(), div2(selfref())];
    let mut demoted = 0;
    for extra in &extras {
        let rhs = ode.rhs.clone() + extra.clone();
        let p = Program::new(vec![Defn::ode("g", &["x", "y"], Along::L, ode.init.clone(), rhs)]);
        let fam = classify(&p, "g").unwrap().family;
        if matches!(fam, Family::FP_LINEAR | Family::UNKNOWN) {
            demoted += 1;
        } else {
            problems.push(format!("parity + {extra:?} classified {fam}"));
        }
    }
    Outcome {
        pass: ok == 14 && demoted == extras.len(),
        summary: format!("{ok}/14 entries classified as expected, {demoted}/{} demotions", extras.len()),
        problems,
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    const VARS: [&str; 4] = ["x1", "x2", "x3", "f"];
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => Expr::Const(Int::from(rng.gen_range(-3..4))),
            _ => {
                let v = VARS[rng.gen_range(0..VARS.len())];
                if v == "f" {
                    selfref()
                } else {
                    var(v)
                }
            }
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..6) {
        0 => a + random_expr(rng, depth - 1),
        1 => a - random_expr(rng, depth - 1),
        2 => a * random_expr(rng, depth - 1),
        3 => sg(a),
        4 => div2(a),
        _ => Expr::Cosg(Box::new(a)),
    }
}

fn criterion4() -> Outcome {
    let mut problems = vec![];
    let p = parse_expr("3 * x1 * x3 + 2 * x2 * x3").unwrap();
    let q = parse_expr("x1 * sg((x1 - x3) * x2) + x2 * x2 * x2").unwrap();
    let d = |names: &[&str], e: &Expr| degree(&VarSet::of(names), e);
    let examples = [
        ("deg_{x1,x2,x3} P = 2", d(&["x1", "x2", "x3"], &p) == 2),
        ("deg_{x1} P = 1", d(&["x1"], &p) == 1),
        ("deg_{x1} P' = 1", d(&["x1"], &q) == 1),
        ("P' not linear in x2", d(&["x2"], &q) > 1),
        ("deg_{x3} P' = 0", d(&["x3"], &q) == 0),
    ];
    let good = examples.iter().filter(|e| e.1).count();
    problems.extend(examples.iter().filter(|e| !e.1).map(|e| format!("worked degree value {} does not hold", e.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let sets = [VarSet::of(&["x1"]), VarSet::of(&["x2", "f"]), VarSet::of(&["x1", "x2", "x3"]), VarSet::self_only()];
    let mut fails = 0;
    for k in 0..C4_RANDOM_CHECKS {
        let a = random_expr(&mut rng, 4);
        let b = random_expr(&mut rng, 4);
        let vs = &sets[k % sets.len()];
        let (da, db) = (degree(vs, &a), degree(vs, &b));
        let ok = match k % 3 {
            0 => degree(vs, &(a.clone() + b.clone())) == da.max(db),
            1 => degree(vs, &(a.clone() * b.clone())) == da + db,
            _ => degree(vs, &sg(a.clone())) == 0,
        };
        if !ok {
            fails += 1;
            problems.push(format!("rule {} fails on {a:?} and {b:?}", k % 3));
        }
    }
    Outcome {
        pass: good == 5 && fails == 0,
        summary: format!("{good}/5 worked degree values, {C4_RANDOM_CHECKS} randomized rule checks, {fails} failures"),
        problems,
    }
}

fn criterion5() -> Outcome {
    let start = Instant::now();
    let opts = CompileOptions::default();
    let mut reports = vec![];
    for (entry, fun) in [
        ("parity", "parity"),
        ("bcount", "bcount"),
        ("bsearch", "bsearch"),
        ("kk_mod2", "kk_mod2"),
        ("logitadd", "logitadd"),
        ("concat1", "concat1"),
        ("fourbrn", "fourbrn"),
    ] {
        let p = stdlib_get(entry).unwrap().program;
        for n in 0..=C5_EXHAUSTIVE_N {
            reports.push(check_circuit(&p, fun, n, C5_EXHAUSTIVE_N, 0, SEED, None, &opts));
        }
        for n in C5_SAMPLED_N {
            reports.push(check_circuit(&p, fun, n, C5_EXHAUSTIVE_N, C5_SAMPLES, SEED, None, &opts));
        }
    }
    let took = start.elapsed();
    let (cases, failed, mut problems) = collect(&reports);
    if took > C5_BUDGET {
        problems.push(format!("took {:.1} s, budget {} s", took.as_secs_f64(), C5_BUDGET.as_secs()));
    }
    Outcome {
        pass: failed == 0 && took <= C5_BUDGET,
        summary: format!(
            "7 functions, {} circuits, {cases} inputs, {failed} failures, {:.1} s (budget {} s)",
            reports.len(),
            took.as_secs_f64(),
            C5_BUDGET.as_secs()
        ),
        problems,
    }
}

fn criterion6() -> Outcome {
    let opts = CompileOptions::default();
    let mut problems = vec![];
    let (mut flat, mut nc1, mut validated) = (0, 0, 0);
    for e in stdlib_all() {
        for inst in &e.instances {
            let Some(backend) = Backend::for_class(inst.class) else { continue };
            let sizes: &[usize] = if backend == Backend::Nc1 { &C6_NC1_SIZES } else { &C6_FLAT_SIZES };
            let t = match depth_growth(&e.program, inst.fun, sizes, None, &opts) {
                Ok(t) => t,
                Err(CompileError::NotCompilable { .. }) => continue,
                Err(err) => {
                    problems.push(format!("{}: {err}", inst.fun));
                    continue;
                }
            };
            let r = check_depth(&t);
            if !r.passed() {
                problems.push(format!("{}\n{}", r.render(), t.render()));
            } else if backend == Backend::Nc1 {
                nc1 += 1;
            } else {
                flat += 1;
            }
            // Every backend at or above the class must stay in its gate set.
            for b in Backend::ALL.into_iter().filter(|b| b.class() >= inst.class) {
                match compile_with(&e.program, inst.fun, 8, b, &opts) {
                    Ok(c) => {
                        let v = validate(&c.circuit, &b.gate_set());
                        if v.is_empty() {
                            validated += 1;
                        } else {
                            problems.push(format!("{} on {}: {}", inst.fun, b.name(), v.join("; ")));
                        }
                    }
                    Err(CompileError::Width { .. }) if b == Backend::Nc1 => {}
                    Err(err) => problems.push(format!("{} on {}: {err}", inst.fun, b.name())),
                }
            }
        }
    }
    Outcome {
        pass: problems.is_empty(),
        summary: format!(
            "{flat} constant-depth tables flat over {C6_FLAT_SIZES:?}, {nc1} NC1 tables with depth(2n) - depth(n) <= {NC1_STEP}, {validated} circuits in their gate sets"
        ),
        problems,
    }
}

fn criterion7() -> Outcome {
    let p = stdlib_get("parity").unwrap().program;
    let it = Interp::new(&p);
    let x: Int = (Int::from(1) << C7_BITS) - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut problems = vec![];
    let mut worst = Duration::ZERO;
    let mut ys = vec![x.clone()];
    ys.extend((0..3).map(|_| {
        let bits: String = (0..=C7_BITS).map(|_| if rng.gen_bool(0.5) { '1' } else { '0' }).collect();
        Int::parse_bytes(bits.as_bytes(), 2).unwrap()
    }));
    for y in &ys {
        let start = Instant::now();
        let v = it.eval_fast("parity", &[x.clone(), y.clone()]);
        worst = worst.max(start.elapsed());
        let expect = oracle("parity", &[y % (Int::from(1) << (C7_BITS + 1))]).unwrap();
        if v.as_ref() != Ok(&expect) {
            problems.push(format!("parity(2^{C7_BITS} - 1, y): expected {expect}, got {v:?}"));
        }
    }
    let trace_steps = it.trace("parity", &[x.clone(), x.clone()]).map(|t| t.steps.len()).unwrap_or(0);
    if trace_steps != C7_BITS as usize {
        problems.push(format!("expected {C7_BITS} jump steps, traced {trace_steps}"));
    }
    let guarded = matches!(it.eval_naive("parity", &[x.clone(), x]), Err(EvalError::NaiveGuard { .. }));
    if !guarded {
        problems.push("naive evaluation was not refused".into());
    }
    if worst > C7_BUDGET {
        problems.push(format!("slowest evaluation {:.3} s", worst.as_secs_f64()));
    }
    Outcome {
        pass: problems.is_empty(),
        summary: format!(
            "x = 2^{C7_BITS} - 1: {trace_steps} steps, slowest of {} fast evaluations {:.2} ms (budget {} s), naive guarded: {guarded}",
            ys.len(),
            worst.as_secs_f64() * 1e3,
            C7_BUDGET.as_secs()
        ),
        problems,
    }
}

fn random_circuit(rng: &mut ChaCha8Rng) -> Circuit {
    let n_inputs = rng.gen_range(0..8);
    let mode = if rng.gen_bool(0.5) { FaninMode::Bounded2 } else { FaninMode::Unbounded };
    let mut gates: Vec<Gate> = vec![];
    let n_gates = rng.gen_range(0..40);
    let arg = |rng: &mut ChaCha8Rng, id: usize| -> Arg {
        match rng.gen_range(0..6) {
            0 => Arg::Const(rng.gen_bool(0.5)),
            1 | 2 if n_inputs > 0 => Arg::Input(rng.gen_range(0..n_inputs)),
            _ if id > 0 => Arg::Gate(rng.gen_range(0..id)),
            _ => Arg::Const(true),
        }
    };
    for id in 0..n_gates {
        let max = if mode == FaninMode::Bounded2 { 2 } else { 6 };
        let k = rng.gen_range(1..=max);
        let args: Vec<Arg> = (0..k).map(|_| arg(rng, id)).collect();
        let g = match rng.gen_range(0..8) {
            0 if n_inputs > 0 => Gate { op: Op::In(rng.gen_range(0..n_inputs)), args: vec![] },
            1 => Gate { op: Op::Const(rng.gen_bool(0.5)), args: vec![] },
            2 => Gate { op: Op::Not, args: vec![args[0]] },
            3 => Gate { op: Op::And, args },
            4 => Gate { op: Op::Or, args },
            5 => Gate { op: Op::Xor, args },
            6 => Gate { op: Op::Th(rng.gen_range(0..=args.len())), args },
            _ => Gate { op: Op::Macro("ITMULT/1/1/0".into()), args: (0..3).map(|_| arg(rng, id)).collect() },
        };
        gates.push(g);
    }
    let outputs = (0..rng.gen_range(0..5)).map(|_| arg(rng, n_gates)).collect();
    Circuit { n_inputs, mode, gates, outputs }
}

fn corpus_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "core", "stdlib"].iter().collect()
}

fn criterion8() -> Outcome {
    let mut problems = vec![];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut round_trips = 0;
    for k in 0..C8_RANDOM_CIRCUITS {
        let c = random_circuit(&mut rng);
        let text = serialize(&c);
        match deserialize(&text) {
            Ok(back) if back == c && serialize(&back) == text => round_trips += 1,
            Ok(_) => problems.push(format!("circuit {k} changed in a round trip")),
            Err(e) => problems.push(format!("circuit {k}: {e}\n{text}")),
        }
    }
    let mut fixed = 0;
    for e in stdlib_all() {
        let p1 = parse_program(e.source).unwrap();
        let printed = print_program(&p1);
        match parse_program(&printed) {
            Ok(p2) if p2 == p1 && print_program(&p2) == printed => fixed += 1,
            _ => problems.push(format!("{}: parse/print/parse is not a fixed point", e.name)),
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let circ = dir.path().join("p8.circ");
    let bad = dir.path().join("bad.lode");
    let unknown = dir.path().join("unknown.lode");
    std::fs::write(&bad, "fun g(x) { init: 1 d/dl: f; }\n").unwrap();
    std::fs::write(&unknown, "fun sq(x, y) { init: y; d/dl: f * f; }\n").unwrap();
    let parity = corpus_dir().join("parity.lode");
    let s = |p: &PathBuf| p.to_string_lossy().into_owned();
    let runs: Vec<(Vec<String>, i32, Option<&str>)> = vec![
        (vec!["eval".into(), s(&parity), "--fun".into(), "parity".into(), "--args".into(), "11,11".into()], 0, Some("1")),
        (vec!["compile".into(), s(&parity), "--fun".into(), "parity".into(), "--n".into(), "8".into(), "--out".into(), s(&circ)], 0, None),
        (vec!["simulate".into(), "--circ".into(), s(&circ), "--input".into(), "00101101".into()], 0, Some("0")),
        (vec!["check".into(), s(&unknown)], 1, None),
        (vec!["eval".into(), s(&parity), "--fun".into()], 2, None),
        (vec!["check".into(), s(&bad)], 3, None),
    ];
    let mut exits = 0;
    for (args, code, stdout) in &runs {
        let o = Command::new(env!("CARGO_BIN_EXE_lode")).args(args).output().unwrap();
        let out = String::from_utf8_lossy(&o.stdout);
        if o.status.code() == Some(*code) && stdout.map_or(true, |want| out.trim() == want) {
            exits += 1;
        } else {
            problems.push(format!("lode {}: exit {:?}, stdout {:?}; expected exit {code}", args.join(" "), o.status.code(), out.trim()));
        }
    }
    Outcome {
        pass: problems.is_empty(),
        summary: format!(
            "{round_trips}/{C8_RANDOM_CIRCUITS} circuits round-trip, {fixed}/14 corpus files at a print fixed point, {exits}/{} CLI exit codes",
            runs.len()
        ),
        problems,
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("evaluator coherence", criterion1),
        ("example correctness", criterion2),
        ("classification fidelity", criterion3),
        ("degree calculus", criterion4),
        ("circuit/interpreter agreement", criterion5),
        ("depth witnesses", criterion6),
        ("jump-evaluator scaling", criterion7),
        ("format stability", criterion8),
    ];
    let mut failed = vec![];
    for (i, (title, run)) in criteria.iter().enumerate() {
        let o = run();
        line(i + 1, title, &o);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
