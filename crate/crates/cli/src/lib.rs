//! The `lode` command: check, eval, compile, simulate, verify and bench.
//!
//! Exit codes: 0 success, 1 check or verify failure (or an evaluation or
//! compile error), 2 usage error, 3 parse error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};
use lode_circuit::{compile, compile_with, deserialize, serialize, Backend, CompileOptions};
use lode_core::syntax::SourceFile;
use lode_core::{classify, Class, Family, Int, Interp, Mode, Program};
use lode_verify::{default_functions, depth_growth, verify_program, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lode", version, about = "Length-derivative ODE programs: classify, evaluate, compile to circuits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Classify definitions; fails if any is UNKNOWN.
    Check {
        file: String,
        #[arg(long)]
        fun: Option<String>,
        #[arg(long)]
        json: bool,
        /// Succeed even when some definition is UNKNOWN.
        #[arg(long)]
        allow_unknown: bool,
    },
    /// Evaluate a function on integer arguments, derivation variable first.
    Eval {
        file: String,
        #[arg(long)]
        fun: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        args: Vec<String>,
        #[arg(long, value_enum, default_value = "fast")]
        mode: EvalMode,
        /// Also print the jump sequence of the fast evaluator.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compile a function at x = 2^n - 1 into a circuit file.
    Compile {
        file: String,
        #[arg(long)]
        fun: String,
        #[arg(long)]
        n: usize,
        /// Word width of the NC1 backend.
        #[arg(long, default_value_t = 64)]
        width: usize,
        /// Force a backend (fac0, acc2, tc0, nc1) instead of the smallest fitting one.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        out: String,
    },
    /// Run a circuit file on one input.
    ///
    /// The input bitstring is LSB-first: its first character is input 0,
    /// which is bit 0 of the first argument. Outputs print the same way.
    Simulate {
        #[arg(long)]
        circ: String,
        /// Input bits, LSB-first.
        #[arg(long)]
        input: String,
    },
    /// Run evaluator, oracle, circuit and depth checks.
    Verify {
        file: String,
        #[arg(long)]
        fun: Option<String>,
        #[arg(long, default_value_t = lode_verify::sample::DEFAULT_SEED)]
        seed: u64,
        /// Circuits with at most this many input bits are checked exhaustively.
        #[arg(long, default_value_t = 12)]
        exhaustive_bits: usize,
        #[arg(long)]
        json: bool,
    },
    /// Depth and size of compiled circuits over several n.
    Bench {
        file: String,
        #[arg(long)]
        fun: String,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalMode {
    Fast,
    Naive,
    Closed,
}

struct Fail {
    code: i32,
    message: String,
}

fn usage(m: impl Into<String>) -> Fail {
    Fail { code: EXIT_USAGE, message: m.into() }
}

fn failure(m: impl ToString) -> Fail {
    Fail { code: EXIT_FAILURE, message: m.to_string() }
}

type Res = Result<i32, Fail>;

/// Runs the tool on `argv` (program name first), writing to `out` and `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let r = match cli.cmd {
        Cmd::Check { file, fun, json, allow_unknown } => check(&file, fun.as_deref(), json, allow_unknown, out),
        Cmd::Eval { file, fun, args, mode, trace, json } => eval(&file, &fun, &args, mode, trace, json, out),
        Cmd::Compile { file, fun, n, width, backend, out: path } => compile_cmd(&file, &fun, n, width, backend.as_deref(), &path, out),
        Cmd::Simulate { circ, input } => simulate(&circ, &input, out),
        Cmd::Verify { file, fun, seed, exhaustive_bits, json } => verify(&file, fun.as_deref(), seed, exhaustive_bits, json, out),
        Cmd::Bench { file, fun, sizes, backend, width, json } => bench(&file, &fun, &sizes, backend.as_deref(), width, json, out),
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(path: &str) -> Result<Program, Fail> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    SourceFile::parse(path, &text).map(|s| s.program).map_err(|diags| Fail {
        code: EXIT_PARSE,
        message: diags.iter().map(|d| format!("{path}:{d}")).collect::<Vec<_>>().join("\n"),
    })
}

fn need_fun(p: &Program, fun: &str) -> Result<(), Fail> {
    match p.get(fun) {
        Some(_) => Ok(()),
        None => Err(usage(format!("no definition named `{fun}`"))),
    }
}

fn backend_arg(b: Option<&str>) -> Result<Option<Backend>, Fail> {
    b.map(|s| Backend::parse(s).ok_or_else(|| usage(format!("unknown backend `{s}` (fac0, acc2, tc0, nc1)")))).transpose()
}

fn check(file: &str, fun: Option<&str>, json: bool, allow_unknown: bool, out: &mut dyn Write) -> Res {
    let p = load(file)?;
    let names: Vec<String> = match fun {
        Some(f) => {
            need_fun(&p, f)?;
            vec![f.to_string()]
        }
        None => p.defs().iter().map(|d| d.name.clone()).collect(),
    };
    let mut unknown = false;
    for name in &names {
        let r = classify(&p, name).map_err(failure)?;
        unknown |= r.family == Family::UNKNOWN || r.effective_class == Class::UNKNOWN;
        if json {
            let _ = writeln!(out, "{}", serde_json::to_string(&r).expect("report serializes"));
        } else {
            let _ = writeln!(out, "{}", r.render());
        }
    }
    Ok(if unknown && !allow_unknown { EXIT_FAILURE } else { EXIT_OK })
}

fn eval(file: &str, fun: &str, args: &[String], mode: EvalMode, trace: bool, json: bool, out: &mut dyn Write) -> Res {
    let p = load(file)?;
    need_fun(&p, fun)?;
    let vals = args
        .iter()
        .map(|a| a.trim().parse::<Int>().map_err(|_| usage(format!("`{a}` is not an integer"))))
        .collect::<Result<Vec<_>, _>>()?;
    let it = Interp::new(&p);
    let mode = match mode {
        EvalMode::Fast => Mode::Fast,
        EvalMode::Naive => Mode::Naive,
        EvalMode::Closed => Mode::Closed,
    };
    let v = it.eval(fun, &vals, mode).map_err(failure)?;
    let tr = if trace { Some(it.trace(fun, &vals).map_err(failure)?) } else { None };
    if json {
        let mut rec = serde_json::json!({ "fun": fun, "args": args, "value": v.to_string() });
        if let Some(tr) = &tr {
            rec["trace"] = serde_json::to_value(tr).expect("trace serializes");
        }
        let _ = writeln!(out, "{rec}");
        return Ok(EXIT_OK);
    }
    if let Some(tr) = &tr {
        for s in &tr.steps {
            let _ = writeln!(out, "u={} t={} f: {} -> {}", s.u, s.jump_point, s.f_before, s.f_after);
        }
        for a in tr.assertions.iter().filter(|a| !a.ok) {
            let _ = writeln!(out, "assertion {} failed at t={}", a.annotation, a.t);
        }
    }
    let _ = writeln!(out, "{v}");
    Ok(EXIT_OK)
}

fn compile_cmd(file: &str, fun: &str, n: usize, width: usize, backend: Option<&str>, path: &str, out: &mut dyn Write) -> Res {
    let p = load(file)?;
    need_fun(&p, fun)?;
    let opts = CompileOptions { width };
    let c = match backend_arg(backend)? {
        Some(b) => compile_with(&p, fun, n, b, &opts),
        None => compile(&p, fun, n, &opts),
    }
    .map_err(failure)?;
    fs::write(path, serialize(&c.circuit)).map_err(|e| failure(format!("cannot write {path}: {e}")))?;
    let _ = writeln!(
        out,
        "{path}: {} backend, {} inputs, {} outputs ({}), depth {}, size {}",
        c.backend.name(),
        c.circuit.n_inputs,
        c.circuit.outputs.len(),
        if c.signed { "two's complement" } else { "unsigned" },
        c.circuit.depth(),
        c.circuit.size()
    );
    Ok(EXIT_OK)
}

fn simulate(path: &str, input: &str, out: &mut dyn Write) -> Res {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    let c = deserialize(&text).map_err(|e| Fail { code: EXIT_PARSE, message: format!("{path}: {e}") })?;
    let bits = input
        .chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(usage(format!("input must be a string of 0 and 1, found `{ch}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if bits.len() != c.n_inputs {
        return Err(usage(format!("circuit has {} inputs, got {} bits", c.n_inputs, bits.len())));
    }
    let o = c.eval(&bits).map_err(failure)?;
    let s: String = o.iter().map(|b| if *b { '1' } else { '0' }).collect();
    let _ = writeln!(out, "{s}");
    Ok(EXIT_OK)
}

fn verify(file: &str, fun: Option<&str>, seed: u64, exhaustive_bits: usize, json: bool, out: &mut dyn Write) -> Res {
    let p = load(file)?;
    let funs = match fun {
        Some(f) => {
            need_fun(&p, f)?;
            vec![f.to_string()]
        }
        None => default_functions(&p),
    };
    let cfg = VerifyConfig { seed, exhaustive_bits, ..VerifyConfig::default() };
    let reports = verify_program(&p, &funs, &cfg);
    for r in &reports {
        let line = if json { r.to_json() } else { r.render() };
        let _ = writeln!(out, "{line}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if !json {
        let _ = writeln!(out, "{} checks, {} failed", reports.len(), failed);
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn bench(file: &str, fun: &str, sizes: &[usize], backend: Option<&str>, width: usize, json: bool, out: &mut dyn Write) -> Res {
    let p = load(file)?;
    need_fun(&p, fun)?;
    let t = depth_growth(&p, fun, sizes, backend_arg(backend)?, &CompileOptions { width }).map_err(failure)?;
    if json {
        for (row, v) in t.rows.iter().zip(&t.violations) {
            let rec = serde_json::json!({
                "fun": t.fun, "backend": t.backend, "n": row.n, "depth": row.depth,
                "size": row.size, "gates": row.histogram, "gate_set_ok": v.is_empty(),
            });
            let _ = writeln!(out, "{rec}");
        }
    } else {
        let _ = writeln!(out, "{}", t.render());
    }
    Ok(EXIT_OK)
}
