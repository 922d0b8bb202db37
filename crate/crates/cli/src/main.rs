mod config;
mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::Integer;
use serde_json::json;

use tmflow::encoding::{self, EncodedConfig};
use tmflow::expr::{build_kernel, compose, KernelId};
use tmflow::noise::{NoiseMode, NoiseSpec};
use tmflow::numerics::real::{default_precision, PRECISION_ENV};
use tmflow::numerics::Real;
use tmflow::ode_sim::{iterate_ode, omega_tilde_batch, simulate_2d, IterationOde, Reading, SimulationParams, SolverSettings, Unpairing};
use tmflow::robust_map::{compile_map_with, iterate_noisy, margins, Variant};
use tmflow::sphere::{run_on_sphere, stereo_inv, SphereField};
use tmflow::tm::{parse_tm, TuringMachine, BB2_TM, FLIP_TM, SUCC_TM};
use tmflow::verify::{run_suite, Suite, SuiteReport, VerifyConfig, Workload};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "tmflow", version, about = "Robust analytic maps, ODEs and sphere flows that simulate Turing machines")]
struct Cli {
    /// `key = value` file with run settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Working precision in bits (sets TA_PRECISION_BITS).
    #[arg(long, global = true, value_name = "BITS")]
    precision: Option<String>,
    #[arg(long, global = true)]
    abs_tol: Option<String>,
    #[arg(long, global = true)]
    rel_tol: Option<String>,
    #[arg(long, global = true)]
    max_step: Option<String>,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by the workflow subcommands. All of them may also come
/// from the config file.
#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    /// Machine file, or one of the bundled machines `succ`, `flip`, `bb2`.
    #[arg(long, value_name = "FILE")]
    tm: Option<String>,
    /// Input word, one character per symbol.
    #[arg(long, default_value = "")]
    input: String,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// none, uniform, const+, const- or alternating.
    #[arg(long)]
    noise: Option<String>,
    /// Added to the initial code before iterating.
    #[arg(long)]
    offset: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Where to write the JSON report (default: stdout).
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the code of the initial configuration on an input word.
    Encode {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the configuration a code stands for.
    Decode {
        code: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compile the robust map of a machine.
    Compile {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = VariantArg::Analytic)]
        variant: VariantArg,
        /// Print the closed-form pairing and contraction stage.
        #[arg(long)]
        emit_expr: bool,
        #[arg(long, value_enum, default_value_t = ExprFormat::Infix)]
        format: ExprFormat,
    },
    /// Iterate the compiled map under noise and write the orbit as CSV.
    IterateMap {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = VariantArg::Analytic)]
        variant: VariantArg,
    },
    /// Integrate the two-dimensional simulation ODE and report each window.
    SimulateOde {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Integrate the unpairing ODEs on 0..=steps.
    OmegaOde {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, ignore_case = true)]
        which: Option<WhichArg>,
        #[arg(long, value_enum, default_value_t = ReadingArg::Corrected)]
        reading: ReadingArg,
    },
    /// Carry the simulation onto the sphere and write the orbit as CSV.
    Sphere {
        #[command(flatten)]
        run: RunArgs,
        /// Last planar time; defaults to `steps + 3/4`.
        #[arg(long)]
        t_end: Option<String>,
        /// Rows per unit of planar time.
        #[arg(long, default_value_t = 8)]
        samples: u32,
    },
    /// Run verification suites and print a JSON report.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// A suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Multiplier on the sample counts of randomized checks.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Write `z₂(t)` against the code orbit as CSV and SVG.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        /// Iterate `2ˣ` from 1 instead of a machine.
        #[arg(long)]
        exp2: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Analytic,
    Smooth,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Analytic => Variant::Analytic,
            VariantArg::Smooth => Variant::Smooth,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExprFormat {
    Infix,
    Sexpr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WhichArg {
    J21,
    J22,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReadingArg {
    Corrected,
    Printed,
}

/// Why a command did not succeed, and the exit code that goes with it.
#[derive(Debug)]
enum Failure {
    Usage(Vec<String>),
    Violation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Violation(_) | Failure::Runtime(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(vec![msg.into()])
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Outcome = Result<(), Failure>;

/// Resolved settings of one invocation.
#[derive(Debug, Clone)]
struct RunConfig {
    settings: SolverSettings,
    tolerances_given: bool,
    delta: Option<Real>,
    epsilon: Real,
    seed: u64,
    steps: Option<usize>,
    noise: Option<NoiseMode>,
    offset: Option<Real>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
}

impl RunConfig {
    fn delta_or(&self, fallback: &str) -> Real {
        self.delta.clone().unwrap_or_else(|| Real::parse(fallback, default_precision()).expect("literal"))
    }

    fn offset_or(&self, fallback: &str) -> Real {
        self.offset.clone().unwrap_or_else(|| Real::parse(fallback, default_precision()).expect("literal"))
    }
}

/// Collects every invalid setting instead of stopping at the first.
struct Resolver<'a> {
    file: &'a FileConfig,
    problems: Vec<String>,
}

impl Resolver<'_> {
    fn raw<'b>(&'b self, key: &str, flag: &'b Option<String>) -> Option<(&'static str, &'b str)> {
        match flag {
            Some(v) => Some(("flag", v.as_str())),
            None => self.file.get(key).map(|v| ("config", v)),
        }
    }

    fn parsed<T>(&mut self, key: &str, flag: &Option<String>, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let (source, text) = self.raw(key, flag)?;
        match parse(text) {
            Ok(v) => Some(v),
            Err(e) => {
                self.problems.push(format!("{source} {key}: {e}"));
                None
            }
        }
    }
}

fn real_arg(text: &str) -> Result<Real, String> {
    Real::parse(text, default_precision()).map_err(|e| e.to_string())
}

fn nonneg_f64(text: &str) -> Result<f64, String> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err(format!("`{text}` must be positive")),
        Err(e) => Err(format!("`{text}`: {e}")),
    }
}

/// The precision has to be fixed before anything touches the default, so
/// it is resolved on its own first.
fn apply_precision(cli: &Cli, file: &FileConfig) -> Result<(), Vec<String>> {
    let (source, text) = match (&cli.precision, file.get("precision_bits")) {
        (Some(v), _) => ("flag", v.as_str()),
        (None, Some(v)) => ("config", v),
        (None, None) => return Ok(()),
    };
    match text.trim().parse::<u32>() {
        Ok(bits) if (64..=1 << 20).contains(&bits) => {
            std::env::set_var(PRECISION_ENV, bits.to_string());
            Ok(())
        }
        _ => Err(vec![format!("{source} precision_bits: `{text}` is not a bit count in 64..=1048576")]),
    }
}

fn resolve(cli: &Cli, run: &RunArgs, file: &FileConfig) -> Result<RunConfig, Failure> {
    let mut r = Resolver { file, problems: Vec::new() };
    let defaults = SolverSettings::default();
    let abs_tol = r.parsed("abs_tol", &cli.abs_tol, nonneg_f64);
    let rel_tol = r.parsed("rel_tol", &cli.rel_tol, nonneg_f64);
    let max_step = r.parsed("max_step", &cli.max_step, nonneg_f64);
    let tolerances_given = abs_tol.is_some() || rel_tol.is_some() || max_step.is_some();
    let settings = SolverSettings {
        abs_tol: abs_tol.unwrap_or(defaults.abs_tol),
        rel_tol: rel_tol.unwrap_or(defaults.rel_tol),
        max_step: max_step.unwrap_or(defaults.max_step),
    };
    let delta = r.parsed("delta", &run.delta, |s| {
        let d = real_arg(s)?;
        if d.is_sign_negative() && !d.is_zero() || d >= 0.2 {
            return Err(format!("`{s}` is outside [0, 1/5)"));
        }
        Ok(d)
    });
    let epsilon = r.parsed("epsilon", &run.epsilon, |s| {
        let e = real_arg(s)?;
        if e.signum_i32() <= 0 || e > 0.2 {
            return Err(format!("`{s}` is outside (0, 1/5]"));
        }
        Ok(e)
    });
    let seed = r.parsed("seed", &run.seed, |s| s.trim().parse::<u64>().map_err(|e| format!("`{s}`: {e}")));
    let steps = r.parsed("steps", &run.steps, |s| s.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}")));
    let noise = r.parsed("noise", &run.noise, |s| s.parse::<NoiseMode>());
    let offset = r.parsed("offset", &run.offset, |s| {
        let o = real_arg(s)?;
        if o.abs() > 0.2 {
            return Err(format!("`{s}` is farther than 1/5 from the code"));
        }
        Ok(o)
    });
    let path = |key: &str, flag: &Option<PathBuf>| flag.clone().or_else(|| file.get(key).map(PathBuf::from));
    let epsilon = epsilon.unwrap_or_else(|| Real::ratio(1, 5, default_precision()));
    if let Some(d) = &delta {
        if *d >= epsilon {
            r.problems.push(format!("delta {} must be below epsilon {}", d.to_short(6), epsilon.to_short(6)));
        }
    }
    if !r.problems.is_empty() {
        return Err(Failure::Usage(r.problems));
    }
    Ok(RunConfig {
        settings,
        tolerances_given,
        delta,
        epsilon,
        seed: seed.unwrap_or(0),
        steps,
        noise,
        offset,
        out: path("out", &run.out),
        report: path("report", &run.report),
    })
}

fn load_machine(run: &RunArgs) -> Result<(Arc<TuringMachine>, Vec<usize>), Failure> {
    let name = run.tm.as_deref().ok_or_else(|| usage("--tm is required"))?;
    let text = if Path::new(name).exists() {
        fs::read_to_string(name).map_err(|e| usage(format!("{name}: {e}")))?
    } else {
        match name {
            "succ" => SUCC_TM.to_string(),
            "flip" => FLIP_TM.to_string(),
            "bb2" => BB2_TM.to_string(),
            _ => return Err(usage(format!("{name}: no such file or bundled machine"))),
        }
    };
    let m = parse_tm(&text).map_err(|e| usage(format!("{name}: {e}")))?;
    let input = m.parse_word(&run.input).map_err(|e| usage(format!("--input: {e}")))?;
    Ok((Arc::new(m), input))
}

/// Open `path` for writing, or stdout when there is none.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => Ok(Box::new(io::BufWriter::new(fs::File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?))),
        None => Ok(Box::new(io::BufWriter::new(io::stdout().lock()))),
    }
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Outcome {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)
}

/// `v` holds the head cell followed by the cells to its left, `u` the
/// cells to its right.
fn config_display(m: &TuringMachine, u: &[usize], v: &[usize]) -> String {
    let left: Vec<usize> = v.iter().skip(1).rev().copied().collect();
    let head = v.first().copied().unwrap_or(0);
    format!("{}[{}]{}", m.render_word(&left), m.symbol_name(head), m.render_word(u))
}

fn cmd_encode(run: &RunArgs) -> Outcome {
    let (m, input) = load_machine(run)?;
    let cfg = m.initial(&input);
    let e = encoding::encode_config(&m, &cfg);
    println!("c = {}", e.c);
    println!("(y1, y2, q) = ({}, {}, {})", e.y1, e.y2, e.q);
    Ok(())
}

fn cmd_decode(code: &str, run: &RunArgs) -> Outcome {
    let (m, _) = load_machine(run)?;
    let c: Integer = code.trim().parse().map_err(|_| usage(format!("`{code}` is not a natural number")))?;
    if c < 0 {
        return Err(usage(format!("`{code}` is negative")));
    }
    let e = EncodedConfig::from_code(&c, m.k());
    println!("(y1, y2, q) = ({}, {}, {})", e.y1, e.y2, e.q);
    let cfg = encoding::decode_config(&m, &e).map_err(|e| usage(e.to_string()))?;
    println!("state = {}", m.states()[cfg.state]);
    println!("tape = {}", config_display(&m, &cfg.u, &cfg.v));
    if m.is_halted(&cfg) {
        println!("halted");
    }
    Ok(())
}

fn cmd_compile(run: &RunArgs, cfg: &RunConfig, variant: VariantArg, emit: bool, format: ExprFormat) -> Outcome {
    let (m, _) = load_machine(run)?;
    let delta = cfg.delta_or("0.1");
    let map = compile_map_with(m.clone(), &delta, variant.into()).map_err(runtime)?;
    println!("states = {}, symbols = {}", m.m(), m.k());
    println!("delta = {}", delta.to_short(8));
    println!("variant = {:?}", map.variant());
    println!("contraction depth j = {}", map.j_contract());
    if emit {
        if let VariantArg::Smooth = variant {
            return Err(usage("--emit-expr renders the analytic variant only"));
        }
        let stage = compose(&build_kernel(KernelId::SigmaIter(map.j_contract())), &[build_kernel(KernelId::UpsilonK(3))]).map_err(runtime)?;
        println!("pairing and contraction stage ({} nodes):", stage.body.size());
        match format {
            ExprFormat::Infix => println!("{}", stage.to_infix()),
            ExprFormat::Sexpr => println!("{}", stage.to_sexpr()),
        }
        for (name, origin) in stage.provenance() {
            println!("  {name}: {origin}");
        }
    }
    Ok(())
}

fn cmd_iterate_map(run: &RunArgs, cfg: &RunConfig, variant: VariantArg) -> Outcome {
    let (m, input) = load_machine(run)?;
    let delta = cfg.delta_or("0.1");
    let steps = cfg.steps.unwrap_or(20);
    let map = compile_map_with(m.clone(), &delta, variant.into()).map_err(runtime)?;
    let p = map.prec();
    let x0 = encoding::input_code(&m, &input);
    let orbit = encoding::psi_orbit(&m, &x0, steps).map_err(runtime)?;
    let mode = cfg.noise.unwrap_or(if delta.is_zero() { NoiseMode::None } else { NoiseMode::Uniform });
    let noise = NoiseSpec::new(mode, delta.clone(), cfg.seed);
    let start = Real::from_integer(&x0, p) + &cfg.offset_or("0");
    let xs = iterate_noisy(&map, &start, steps, &noise).map_err(runtime)?;

    let mut w = sink(cfg.out.as_deref())?;
    let mut bad = Vec::new();
    let mut rows = String::from("step,value,nearest,expected,distance,ok\n");
    for (mg, want) in margins(&xs).iter().zip(&orbit) {
        let ok = mg.distance <= cfg.epsilon && mg.nearest == *want;
        if !ok {
            bad.push(mg.step);
        }
        rows.push_str(&format!("{},{},{},{},{},{}\n", mg.step, mg.value.to_short(40), mg.nearest, want, mg.distance.to_short(12), ok));
    }
    w.write_all(rows.as_bytes()).and_then(|_| w.flush()).map_err(runtime)?;
    match bad.first() {
        None => Ok(()),
        Some(step) => Err(Failure::Violation(format!("{} of {} iterates left the {} band, first at step {step}", bad.len(), xs.len(), cfg.epsilon.to_short(4)))),
    }
}

fn cmd_simulate(run: &RunArgs, cfg: &RunConfig) -> Outcome {
    let (m, input) = load_machine(run)?;
    let delta = cfg.delta_or("0.1");
    let params = SimulationParams::new(&delta).map_err(runtime)?;
    let p = params.gamma.prec();
    let x0 = encoding::input_code(&m, &input);
    let start = Real::from_integer(&x0, p) + &cfg.offset_or("0.19");
    let mode = cfg.noise.unwrap_or(if delta.is_zero() { NoiseMode::None } else { NoiseMode::Uniform });
    let noise = NoiseSpec::new(mode, delta.clone(), cfg.seed);
    let steps = cfg.steps.unwrap_or(10);
    let rep = simulate_2d(m, &params, &x0, &start, &start, steps, &noise, &cfg.settings).map_err(runtime)?;
    if let (Some(path), Some(tr)) = (&cfg.out, &rep.trajectory) {
        let f = fs::File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        tr.write_csv(io::BufWriter::new(f)).map_err(runtime)?;
    }
    write_json(cfg.report.as_deref(), &serde_json::to_value(&rep).map_err(runtime)?)?;
    match rep.first_violation() {
        None if rep.pass => Ok(()),
        None => Err(Failure::Violation("halting bound violated".into())),
        Some(e) => Err(Failure::Violation(e.to_string())),
    }
}

fn cmd_omega(cfg: &RunConfig, which: Option<WhichArg>, reading: ReadingArg) -> Outcome {
    let n = cfg.steps.unwrap_or(30) as u64;
    let reading = match reading {
        ReadingArg::Corrected => Reading::Corrected,
        ReadingArg::Printed => Reading::Printed,
    };
    let systems = match which {
        Some(WhichArg::J21) => vec![Unpairing::J21],
        Some(WhichArg::J22) => vec![Unpairing::J22],
        None => vec![Unpairing::J21, Unpairing::J22],
    };
    let mut out = Vec::new();
    let mut failures = 0;
    for u in systems {
        let (samples, _) = omega_tilde_batch(u, reading, n, &cfg.settings).map_err(runtime)?;
        let misses = samples.iter().filter(|s| (s.wrapped - s.expected as f64).abs() > 0.2).count();
        failures += misses;
        out.push(json!({ "which": u, "reading": reading, "pass": misses == 0, "samples": samples }));
    }
    write_json(cfg.report.as_deref(), &serde_json::Value::Array(out))?;
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{failures} outputs farther than 1/5 from the unpairing")))
    }
}

fn cmd_sphere(run: &RunArgs, cfg: &RunConfig, t_end: Option<&str>, samples: u32) -> Outcome {
    let (m, input) = load_machine(run)?;
    let p = default_precision();
    let steps = cfg.steps.unwrap_or(5);
    let tau_end = match t_end {
        Some(s) => real_arg(s).map_err(|e| usage(format!("--t-end: {e}")))?,
        None => Real::from_i64(steps as i64, p) + Real::ratio(3, 4, p),
    };
    if tau_end.signum_i32() <= 0 {
        return Err(usage("--t-end must be positive"));
    }
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let params = SimulationParams::new(&Real::zero(p)).map_err(runtime)?;
    let field = SphereField::simulating(m.clone(), params).map_err(runtime)?;
    let x0 = encoding::input_code(&m, &input);
    let start = Real::from_integer(&x0, p) + &cfg.offset_or("0.19");
    let sphere = run_on_sphere(&field, &[start.clone(), start], &tau_end, 20, &cfg.settings).map_err(runtime)?;
    let units = (&tau_end * samples as i32).floor().to_integer().and_then(|n| n.to_u32()).unwrap_or(0);
    let orbit = encoding::psi_orbit(&m, &x0, units as usize / samples as usize + 1).map_err(runtime)?;

    let mut rows = String::from("t,y0,y1,y2,decoded_code,margin\n");
    let mut wrong = Vec::new();
    for i in 0..=units {
        let a = Real::ratio(i as i64, samples as i64, p);
        let t = sphere.planar.tau_inv(&a).map_err(runtime)?;
        let y = sphere.point(&t).map_err(runtime)?;
        let x = stereo_inv(&y).map_err(runtime)?;
        let nearest = x[1].round();
        let margin = (&x[1] - &nearest).abs();
        let code = nearest.to_integer().unwrap_or_default();
        // a quarter into each unit the second coordinate must hold the code
        if i % samples == samples / 4 && samples.is_multiple_of(4) && orbit.get((i / samples) as usize) != Some(&code) {
            wrong.push(a.to_short(6));
        }
        rows.push_str(&format!("{},{},{},{},{},{}\n", t.to_short(17), y[0].to_short(17), y[1].to_short(17), y[2].to_short(17), code, margin.to_short(6)));
    }
    let mut w = sink(cfg.out.as_deref())?;
    w.write_all(rows.as_bytes()).and_then(|_| w.flush()).map_err(runtime)?;
    if wrong.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("decoded code differs from the orbit at planar times {}", wrong.join(", "))))
    }
}

fn cmd_verify(run: &RunArgs, cfg: &RunConfig, suite: &str, scale: Option<f64>) -> Outcome {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        let mut out = Vec::new();
        let mut unknown = Vec::new();
        for name in suite.split(',') {
            match name.trim().parse::<Suite>() {
                Ok(s) => out.push(s),
                Err(e) => unknown.push(e.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(Failure::Usage(unknown));
        }
        out
    };
    let mut vc = VerifyConfig { seed: cfg.seed, steps: cfg.steps, ..VerifyConfig::default() };
    if let Some(d) = &cfg.delta {
        vc.delta = d.clone();
    }
    if cfg.tolerances_given {
        vc.settings = cfg.settings;
    }
    if let Some(s) = scale {
        if !(s.is_finite() && s > 0.0) {
            return Err(usage("--scale must be positive"));
        }
        vc.scale = s;
    }
    if run.tm.is_some() {
        let (m, input) = load_machine(run)?;
        let name = run.tm.as_deref().map(|n| Path::new(n).file_stem().map_or(n.to_string(), |s| s.to_string_lossy().into_owned()));
        vc.workloads = vec![Workload::new(name.unwrap_or_default(), m, input)];
    }
    let reports: Vec<SuiteReport> = suites.iter().map(|&s| run_suite(s, &vc)).collect();
    for rep in &reports {
        for check in &rep.checks {
            eprintln!("[{}] {check}", rep.suite);
        }
    }
    let value = if reports.len() == 1 {
        serde_json::to_value(&reports[0])
    } else {
        serde_json::to_value(&reports)
    }
    .map_err(runtime)?;
    write_json(cfg.report.as_deref(), &value)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.suite.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("failing suites: {}", failed.join(", "))))
    }
}

/// Uniform samples of component `k` on `[0, t_end]`, `per_unit` per unit.
fn sample(tr: &tmflow::numerics::Trajectory, k: usize, per_unit: i64) -> Result<Vec<(Real, Real)>, Failure> {
    let p = tr.t0().prec();
    let n = (tr.t_end() * per_unit as i32).floor().to_integer().and_then(|n| n.to_i64()).unwrap_or(0);
    (0..=n)
        .map(|i| {
            let t = Real::ratio(i, per_unit, p);
            Ok((t.clone(), tr.eval_component(&t, k).map_err(runtime)?))
        })
        .collect()
}

fn cmd_trace(run: &RunArgs, cfg: &RunConfig, exp2: bool) -> Outcome {
    let prefix = cfg.out.clone().ok_or_else(|| usage("--out PREFIX is required"))?;
    let p = default_precision();
    let (title, traj, orbit, log_scale) = if exp2 {
        let settings = if cfg.tolerances_given { cfg.settings } else { SolverSettings { abs_tol: 1e-8, rel_tol: 1e-8, ..cfg.settings } };
        let two = Real::from_i64(2, p);
        let ode = IterationOde::new(Arc::new(move |x: &Real| two.pow(x))).settle(1e-7);
        let tr = iterate_ode(&ode, &Real::one(p), &Real::ratio(9, 2, p), &settings).map_err(runtime)?;
        let orbit: Vec<Real> = [1, 2, 4, 16, 65536].iter().map(|&v| Real::from_i64(v, p)).collect();
        ("iterating 2^x from 1".to_string(), tr, orbit, true)
    } else {
        let (m, input) = load_machine(run)?;
        let delta = cfg.delta_or("0");
        let params = SimulationParams::new(&delta).map_err(runtime)?;
        let x0 = encoding::input_code(&m, &input);
        let start = Real::from_integer(&x0, p) + &cfg.offset_or("0.19");
        let mode = cfg.noise.unwrap_or(if delta.is_zero() { NoiseMode::None } else { NoiseMode::Uniform });
        let noise = NoiseSpec::new(mode, delta.clone(), cfg.seed);
        let steps = cfg.steps.unwrap_or(6);
        let rep = simulate_2d(m.clone(), &params, &x0, &start, &start, steps, &noise, &cfg.settings).map_err(runtime)?;
        let orbit = encoding::psi_orbit(&m, &x0, steps).map_err(runtime)?;
        let title = format!("{} on \"{}\", delta {}", run.tm.as_deref().unwrap_or(""), run.input, delta.to_short(3));
        let tr = rep.trajectory.ok_or_else(|| runtime("simulation kept no trajectory"))?;
        (title, tr, orbit.iter().map(|c| Real::from_integer(c, p)).collect(), true)
    };

    let samples = sample(&traj, 1, 32)?;
    let z1 = sample(&traj, 0, 32)?;
    let mut csv = String::from("t,z1,z2,orbit\n");
    for ((t, z2), (_, z1)) in samples.iter().zip(&z1) {
        let j = t.floor().to_integer().and_then(|j| j.to_usize()).unwrap_or(0).min(orbit.len() - 1);
        csv.push_str(&format!("{},{},{},{}\n", t.to_f64(), z1.to_short(17), z2.to_short(17), orbit[j].to_short(17)));
    }
    let curve: Vec<(f64, f64)> = samples.iter().map(|(t, z)| (t.to_f64(), z.to_f64())).collect();
    let steps: Vec<(f64, f64, f64)> = orbit.iter().enumerate().map(|(j, v)| (j as f64, j as f64 + 1.0, v.to_f64())).collect();
    let plot = svg::Plot { title: &title, curve: &curve, steps: &steps, log_scale };

    let csv_path = prefix.with_extension("csv");
    let svg_path = prefix.with_extension("svg");
    fs::write(&csv_path, csv).map_err(|e| runtime(format!("{}: {e}", csv_path.display())))?;
    fs::write(&svg_path, plot.render()).map_err(|e| runtime(format!("{}: {e}", svg_path.display())))?;
    eprintln!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    apply_precision(cli, &file).map_err(Failure::Usage)?;
    let run = match &cli.command {
        Command::Encode { run }
        | Command::Decode { run, .. }
        | Command::Compile { run, .. }
        | Command::IterateMap { run, .. }
        | Command::SimulateOde { run }
        | Command::OmegaOde { run, .. }
        | Command::Sphere { run, .. }
        | Command::Verify { run, .. }
        | Command::Trace { run, .. } => run,
    };
    let cfg = resolve(cli, run, &file)?;
    match &cli.command {
        Command::Encode { run } => cmd_encode(run),
        Command::Decode { code, run } => cmd_decode(code, run),
        Command::Compile { run, variant, emit_expr, format } => cmd_compile(run, &cfg, *variant, *emit_expr, *format),
        Command::IterateMap { run, variant } => cmd_iterate_map(run, &cfg, *variant),
        Command::SimulateOde { run } => cmd_simulate(run, &cfg),
        Command::OmegaOde { which, reading, .. } => cmd_omega(&cfg, *which, *reading),
        Command::Sphere { run, t_end, samples } => cmd_sphere(run, &cfg, t_end.as_deref(), *samples),
        Command::Verify { run, suite, scale } => cmd_verify(run, &cfg, suite, *scale),
        Command::Trace { run, exp2 } => cmd_trace(run, &cfg, *exp2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(problems) => {
                    for p in problems {
                        eprintln!("error: {p}");
                    }
                }
                Failure::Violation(msg) => eprintln!("violation: {msg}"),
                Failure::Runtime(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
