//! Equivalence harnesses: evaluator against evaluator, evaluator against
//! oracle, circuit against evaluator, classifier against expectation, and
//! depth measurements.

use std::time::{Duration, Instant};

use lode_circuit::compile::{decode_inputs, input_blocks};
use lode_circuit::{compile, compile_with, validate, Backend, CompileError, CompileOptions, Compiled, DepthRow};
use lode_core::basis::alpha;
use lode_core::schema::Body;
use lode_core::stdlib::{stdlib_all, StdEntry};
use lode_core::{classify, Class, EvalError, Family, Int, Interp, Program};
use serde::Serialize;

use crate::oracle::reference;
use crate::report::CheckReport;
use crate::sample::{all_vectors, Sampler};

/// Largest accepted `depth(2n) - depth(n)` for the NC1 backend.
pub const NC1_STEP: usize = 12;

fn outcome(r: &Result<Int, EvalError>) -> String {
    match r {
        Ok(v) => v.to_string(),
        // Modes may word the same failure differently; compare the kind.
        Err(e) => {
            let dbg = format!("{e:?}");
            let kind: String = dbg.chars().take_while(|c| c.is_alphanumeric()).collect();
            format!("error {kind}")
        }
    }
}

fn show(args: &[Int]) -> Vec<String> {
    args.iter().map(|a| a.to_string()).collect()
}

fn y_arity(p: &Program, fun: &str) -> usize {
    p.get(fun).map_or(0, |d| d.params.len().saturating_sub(1))
}

/// `count` tuples of `k` values below `2^bits`, corners first.
pub fn y_tuples(k: usize, bits: usize, count: usize, sampler: &mut Sampler) -> Vec<Vec<Int>> {
    if k == 0 {
        return vec![vec![]];
    }
    let cols: Vec<Vec<Int>> = (0..k).map(|_| sampler.values(bits, count)).collect();
    (0..count).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect()
}

/// Naive against fast evaluation for every `x <= x_bound` and each sampled
/// tuple of remaining arguments.
pub fn check_fast_vs_naive(p: &Program, fun: &str, x_bound: u64, y_samples: usize, y_bits: usize, seed: u64) -> CheckReport {
    evaluator_checks(p, fun, x_bound, y_samples, y_bits, seed, false).remove(0)
}

/// Closed sum-of-products form against fast evaluation; only meaningful
/// for strict families.
pub fn check_closed_vs_fast(p: &Program, fun: &str, x_bound: u64, y_samples: usize, y_bits: usize, seed: u64) -> CheckReport {
    evaluator_checks(p, fun, x_bound, y_samples, y_bits, seed, true).pop().expect("closed report")
}

/// Both evaluator comparisons over the same population, sharing the fast
/// values: fast vs naive, then closed vs fast when `closed` is set.
pub fn evaluator_checks(
    p: &Program,
    fun: &str,
    x_bound: u64,
    y_samples: usize,
    y_bits: usize,
    seed: u64,
    closed: bool,
) -> Vec<CheckReport> {
    let population = format!("x <= {x_bound}, {y_samples} sampled y tuples of {y_bits} bits");
    let mut rn = CheckReport::new(format!("fast_vs_naive {fun}"), population.clone()).with_seed(seed);
    let mut rc = CheckReport::new(format!("closed_vs_fast {fun}"), population).with_seed(seed);
    let Some(d) = p.get(fun) else {
        rn.set_error(format!("unknown function `{fun}`"));
        rc.set_error(format!("unknown function `{fun}`"));
        return if closed { vec![rn, rc] } else { vec![rn] };
    };
    let (mut tn, mut tc) = (Duration::ZERO, Duration::ZERO);
    let it = Interp::new(p);
    for ys in y_tuples(y_arity(p, fun), y_bits, y_samples, &mut Sampler::new(seed)) {
        let start = Instant::now();
        let naive: Vec<Result<Int, EvalError>> = match &d.body {
            Body::Ode(_) => match it.naive_trajectory(fun, x_bound, &ys) {
                Ok(traj) => traj.into_iter().map(Ok).collect(),
                Err(_) => (0..=x_bound).map(|x| it.eval_naive(fun, &args(x, &ys))).collect(),
            },
            Body::Explicit(_) => (0..=x_bound).map(|x| it.eval_naive(fun, &args(x, &ys))).collect(),
        };
        tn += start.elapsed();
        for (x, nv) in naive.iter().enumerate() {
            let start = Instant::now();
            let a = args(x as u64, &ys);
            let fv = outcome(&it.eval_fast(fun, &a));
            rn.case(|| show(&a), &outcome(nv), &fv);
            tn += start.elapsed();
            if closed {
                let start = Instant::now();
                let cv = it.eval_closed_strict(fun, &a);
                rc.case(|| show(&a), &fv, &outcome(&cv));
                tc += start.elapsed();
            }
        }
    }
    rn.set_time(tn);
    rc.set_time(tc);
    if closed {
        vec![rn, rc]
    } else {
        vec![rn]
    }
}

fn args(x: u64, ys: &[Int]) -> Vec<Int> {
    let mut a = vec![Int::from(x)];
    a.extend_from_slice(ys);
    a
}

/// Fast evaluation against the reference oracle. Argument tuples without a
/// reference value are skipped and not counted.
pub fn check_oracle(p: &Program, fun: &str, population: &str, cases: impl IntoIterator<Item = Vec<Int>>) -> CheckReport {
    let start = Instant::now();
    let mut r = CheckReport::new(format!("oracle {fun}"), population);
    let it = Interp::new(p);
    for a in cases {
        let Some(expected) = reference(fun, &a) else { continue };
        let got = it.eval_fast(fun, &a);
        r.case(|| show(&a), &expected.to_string(), &outcome(&got));
    }
    if r.cases == 0 {
        r.set_error(format!("no reference values for `{fun}`"));
    }
    r.set_time(start.elapsed());
    r
}

/// The oracle population used for stdlib functions: diagonal or full grids
/// where the function is characterized, sampled `y` otherwise.
pub fn oracle_cases(p: &Program, fun: &str, seed: u64) -> (String, Vec<Vec<Int>>) {
    let i = |v: u64| Int::from(v);
    match fun {
        "parity" | "bcount" => ("(x, x) for x < 2^12".into(), (0..1 << 12).map(|x| vec![i(x), i(x)]).collect()),
        "rsh" => (
            "x, y < 2^10".into(),
            (0..1u64 << 10).flat_map(|x| (0..1u64 << 10).map(move |y| vec![i(x), i(y)])).collect(),
        ),
        "crn" | "crn_b" | "crn_c" => {
            let zs = Sampler::new(seed).values(10, 8);
            let cases = (0..1 << 10).flat_map(|x| zs.iter().map(move |z| vec![i(x), i(x), z.clone()])).collect();
            (format!("(x, x, z) for x < 2^10, 8 sampled z, seed {seed}"), cases)
        }
        "fourbrn" | "fourbrn_b" | "fourbrn_c" => ("(x, x) for x < 2^10".into(), (0..1 << 10).map(|x| vec![i(x), i(x)]).collect()),
        _ => {
            let k = y_arity(p, fun);
            let tuples = y_tuples(k, 16, 16, &mut Sampler::new(seed));
            let cases = (0..1 << 10).flat_map(|x| tuples.iter().map(move |ys| args(x, ys))).collect();
            (format!("x < 2^10, 16 sampled y tuples, seed {seed}"), cases)
        }
    }
}

/// Compiled circuit against fast evaluation at `x = 2^n - 1`: every input
/// when there are at most `exhaustive_bound` input bits, otherwise
/// `samples` seeded inputs. `backend` forces a backend; `None` picks the
/// smallest one covering the class.
pub fn check_circuit(
    p: &Program,
    fun: &str,
    n: usize,
    exhaustive_bound: usize,
    samples: usize,
    seed: u64,
    backend: Option<Backend>,
    opts: &CompileOptions,
) -> CheckReport {
    let start = Instant::now();
    let compiled = match backend {
        Some(b) => compile_with(p, fun, n, b, opts),
        None => compile(p, fun, n, opts),
    };
    let blocks = input_blocks(p, fun).unwrap_or(0);
    let bits = n * blocks;
    let exhaustive = bits <= exhaustive_bound;
    let population = if exhaustive {
        format!("all {} inputs", 1u64 << bits)
    } else {
        format!("{samples} sampled inputs with corners")
    };
    let label = |c: Option<&Compiled>| match (c, backend) {
        (Some(c), _) => c.backend.name(),
        (None, Some(b)) => b.name(),
        (None, None) => "auto",
    };
    let mut r = CheckReport::new(format!("circuit {fun} n={n} {}", label(compiled.as_ref().ok())), population);
    if !exhaustive {
        r = r.with_seed(seed);
    }
    let c = match compiled {
        Ok(c) => c,
        Err(e) => {
            r.set_error(e);
            return r;
        }
    };
    let problems = validate(&c.circuit, &c.backend.gate_set());
    if !problems.is_empty() {
        r.set_error(format!("gate set {}: {}", c.backend.gate_set().name, problems.join("; ")));
        return r;
    }
    let inputs: Box<dyn Iterator<Item = Vec<bool>>> = if exhaustive {
        Box::new(all_vectors(bits))
    } else {
        Box::new(Sampler::new(seed).vectors(bits, samples).into_iter())
    };
    let it = Interp::new(p);
    let x = alpha(n as u64);
    let mut batch: Vec<Vec<bool>> = Vec::with_capacity(64);
    let flush = |batch: &mut Vec<Vec<bool>>, r: &mut CheckReport| {
        if batch.is_empty() {
            return;
        }
        let lanes: Vec<u64> = (0..bits)
            .map(|i| batch.iter().enumerate().fold(0u64, |acc, (l, v)| acc | (u64::from(v[i]) << l)))
            .collect();
        let out = match c.circuit.eval_batch(&lanes) {
            Ok(o) => o,
            Err(e) => {
                r.set_error(e);
                batch.clear();
                return;
            }
        };
        for (l, v) in batch.iter().enumerate() {
            let ys = decode_inputs(v, n, blocks);
            let mut a = vec![x.clone()];
            a.extend(ys);
            let out_bits: Vec<bool> = out.iter().map(|w| (w >> l) & 1 == 1).collect();
            let got = c.decode(&out_bits);
            let expected = it.eval_fast(fun, &a);
            r.case(|| show(&a), &outcome(&expected), &got.to_string());
        }
        batch.clear();
    };
    for v in inputs {
        batch.push(v);
        if batch.len() == 64 {
            flush(&mut batch, &mut r);
        }
    }
    flush(&mut batch, &mut r);
    r.set_time(start.elapsed());
    r
}

/// Classification against an expected family and class.
pub fn check_class(p: &Program, fun: &str, family: Family, class: Class) -> CheckReport {
    let start = Instant::now();
    let mut r = CheckReport::new(format!("class {fun}"), "classifier output");
    match classify(p, fun) {
        Ok(c) => r.case(
            || vec![fun.into()],
            &format!("{family}/{class}"),
            &format!("{}/{}", c.family, c.effective_class),
        ),
        Err(e) => r.set_error(e),
    }
    r.set_time(start.elapsed());
    r
}

/// Depth and size of one function's circuits over several sizes.
#[derive(Clone, Debug, Serialize)]
pub struct DepthTable {
    pub fun: String,
    pub backend: String,
    pub rows: Vec<DepthRow>,
    /// Gate-set violations per row, same order as `rows`.
    pub violations: Vec<Vec<String>>,
}

impl DepthTable {
    pub fn constant_depth(&self) -> bool {
        self.backend != Backend::Nc1.name()
    }

    pub fn is_flat(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].depth == w[1].depth)
    }

    /// Largest `depth(2n) - depth(n)` over sizes present in the table.
    pub fn max_step(&self) -> Option<usize> {
        let depth = |n: usize| self.rows.iter().find(|r| r.n == n).map(|r| r.depth);
        self.rows
            .iter()
            .filter_map(|r| Some(depth(2 * r.n)?.saturating_sub(r.depth)))
            .max()
    }

    /// Least-squares fit `depth ~ c log2 n + d`, with the largest absolute
    /// residual. Needs two distinct positive sizes.
    pub fn log_fit(&self) -> Option<(f64, f64, f64)> {
        let pts: Vec<(f64, f64)> = self.rows.iter().filter(|r| r.n > 0).map(|r| ((r.n as f64).log2(), r.depth as f64)).collect();
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let den = m * sxx - sx * sx;
        if pts.len() < 2 || den.abs() < 1e-9 {
            return None;
        }
        let c = (m * sxy - sx * sy) / den;
        let d = (sy - c * sx) / m;
        let resid = pts.iter().map(|p| (p.1 - (c * p.0 + d)).abs()).fold(0.0, f64::max);
        Some((c, d, resid))
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} on {}\n{:>6} {:>6} {:>8}  gates", self.fun, self.backend, "n", "depth", "size");
        for r in &self.rows {
            let hist: Vec<String> = r.histogram.iter().map(|(k, v)| format!("{k}={v}")).collect();
            s.push_str(&format!("\n{:>6} {:>6} {:>8}  {}", r.n, r.depth, r.size, hist.join(" ")));
        }
        s
    }
}

pub fn depth_growth(p: &Program, fun: &str, sizes: &[usize], backend: Option<Backend>, opts: &CompileOptions) -> Result<DepthTable, CompileError> {
    let mut rows = vec![];
    let mut violations = vec![];
    let mut used = backend;
    for &n in sizes {
        let c = match used {
            Some(b) => compile_with(p, fun, n, b, opts)?,
            None => compile(p, fun, n, opts)?,
        };
        used = Some(c.backend);
        violations.push(validate(&c.circuit, &c.backend.gate_set()));
        rows.push(DepthRow::of(n, &c.circuit));
    }
    let backend = used.map_or("none", |b| b.name()).to_string();
    Ok(DepthTable { fun: fun.into(), backend, rows, violations })
}

/// Constant-depth backends must give one depth for every size; the NC1
/// backend must grow by at most [`NC1_STEP`] per doubling. Every circuit
/// must stay in its gate set.
pub fn check_depth(t: &DepthTable) -> CheckReport {
    let sizes: Vec<String> = t.rows.iter().map(|r| r.n.to_string()).collect();
    let mut r = CheckReport::new(format!("depth {} {}", t.fun, t.backend), format!("n in {{{}}}", sizes.join(",")));
    for (row, v) in t.rows.iter().zip(&t.violations) {
        r.case(|| vec![format!("n={}", row.n)], "in gate set", if v.is_empty() { "in gate set" } else { &v[0] });
    }
    let depths: Vec<String> = t.rows.iter().map(|r| r.depth.to_string()).collect();
    if t.constant_depth() {
        r.case(|| depths.clone(), "flat", if t.is_flat() { "flat" } else { "varies" });
    } else if let Some(step) = t.max_step() {
        let ok = step <= NC1_STEP;
        r.case(|| depths.clone(), &format!("step <= {NC1_STEP}"), &if ok { format!("step <= {NC1_STEP}") } else { format!("step {step}") });
    }
    r
}

/// Stdlib entry whose definitions are exactly those of `p`.
pub fn matching_entry(p: &Program) -> Option<StdEntry> {
    stdlib_all().into_iter().find(|e| e.program.defs() == p.defs())
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub x_bound: u64,
    pub y_samples: usize,
    pub y_bits: usize,
    /// Circuits with at most this many input bits are checked exhaustively.
    pub exhaustive_bits: usize,
    pub circuit_samples: usize,
    pub circuit_sizes: Vec<usize>,
    pub depth_sizes: Vec<usize>,
    pub nc1_depth_sizes: Vec<usize>,
    pub compile: CompileOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: crate::sample::DEFAULT_SEED,
            x_bound: 1024,
            y_samples: 16,
            y_bits: 16,
            exhaustive_bits: 12,
            circuit_samples: 1000,
            circuit_sizes: vec![1, 3, 4, 8, 12, 16],
            depth_sizes: vec![4, 8, 16, 32, 64],
            nc1_depth_sizes: vec![8, 16, 32, 64],
            compile: CompileOptions::default(),
        }
    }
}

/// Every applicable check for the given functions of `p`. When `p` is a
/// stdlib entry the expected classes and oracles are checked too.
pub fn verify_program(p: &Program, funs: &[String], cfg: &VerifyConfig) -> Vec<CheckReport> {
    let entry = matching_entry(p);
    let mut out = vec![];
    for fun in funs {
        let expected = entry.as_ref().and_then(|e| e.instances.iter().find(|i| i.fun == fun));
        let report = classify(p, fun);
        match (expected, &report) {
            (Some(i), _) => out.push(check_class(p, fun, i.family, i.class)),
            (None, Ok(c)) => out.push(check_class(p, fun, c.family, c.effective_class)),
            (None, Err(e)) => {
                let mut r = CheckReport::new(format!("class {fun}"), "classifier output");
                r.set_error(e);
                out.push(r);
                continue;
            }
        }
        let strict = report.as_ref().is_ok_and(|c| c.family.is_strict());
        out.extend(evaluator_checks(p, fun, cfg.x_bound, cfg.y_samples, cfg.y_bits, cfg.seed, strict));
        if entry.is_some() && reference(fun, &args(1, &vec![Int::from(1); y_arity(p, fun)])).is_some() {
            let (population, cases) = oracle_cases(p, fun, cfg.seed);
            out.push(check_oracle(p, fun, &population, cases));
        }
        if let Err(CompileError::NotCompilable { .. }) = compile(p, fun, 1, &cfg.compile) {
            continue;
        }
        for &n in &cfg.circuit_sizes {
            out.push(check_circuit(p, fun, n, cfg.exhaustive_bits, cfg.circuit_samples, cfg.seed, None, &cfg.compile));
        }
        let nc1 = report.as_ref().is_ok_and(|c| Backend::for_class(c.effective_class) == Some(Backend::Nc1));
        let sizes = if nc1 { &cfg.nc1_depth_sizes } else { &cfg.depth_sizes };
        match depth_growth(p, fun, sizes, None, &cfg.compile) {
            Ok(t) => out.push(check_depth(&t)),
            Err(e) => {
                let mut r = CheckReport::new(format!("depth {fun}"), "compiled sizes");
                r.set_error(e);
                out.push(r);
            }
        }
    }
    out
}

/// Checks of a stdlib entry over all its shipped instances.
pub fn verify_entry(e: &StdEntry, cfg: &VerifyConfig) -> Vec<CheckReport> {
    let funs: Vec<String> = e.instances.iter().map(|i| i.fun.to_string()).collect();
    verify_program(&e.program, &funs, cfg)
}

/// Default functions to verify: the shipped instances of a stdlib entry,
/// otherwise every ODE definition.
pub fn default_functions(p: &Program) -> Vec<String> {
    if let Some(e) = matching_entry(p) {
        return e.instances.iter().map(|i| i.fun.to_string()).collect();
    }
    p.defs().iter().filter(|d| matches!(d.body, Body::Ode(_))).map(|d| d.name.clone()).collect()
}
