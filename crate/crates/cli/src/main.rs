use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hjb_core::domain::Domain;
use hjb_core::model::{load_problem, Case, Problem};
use hjb_core::plot::{minimizers, phase_svg};
use hjb_core::registry::{self, Entry};
use hjb_core::sim::{integrate, ClosedLoop, SimConfig, SimError};
use hjb_core::synth::{select_cost, synthesize, SynthError, SynthesisResult};
use hjb_core::verify::{default_resolution, initial_conditions, verify_all, Overall, VerifyOptions};

const EXIT_FAIL: u8 = 1;
const EXIT_UNSUPPORTED: u8 = 3;
const EXIT_DIVERGED: u8 = 4;
const EXIT_USAGE: u8 = 64;

/// Inverse-optimal controller synthesis and verification.
#[derive(Parser)]
#[command(name = "hjb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize u, L and V for a system.
    Synthesize {
        #[command(flatten)]
        input: Input,
        /// Write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a synthesized result on a grid and along trajectories.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Grid points per axis.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the closed loop and write trajectories.
    Simulate {
        #[command(flatten)]
        input: Input,
        /// Initial state `a,b[,c]`; repeat for several runs. Defaults to the
        /// domain corners.
        #[arg(long, allow_hyphen_values = true)]
        x0: Vec<String>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 50.0)]
        tmax: f64,
        /// CSV output; with several runs the run index is appended to the stem.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one CSV row per this many steps.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Phase-plane plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Built-in worked examples.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Subcommand)]
enum ExamplesAction {
    /// Print the registry.
    List {
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Synthesize, compare and verify every entry.
    RunAll {
        /// Directory of system files to use instead of the built-in registry.
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Input {
    /// System file (TOML or JSON).
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    system: Option<PathBuf>,
    /// Registry entry name.
    #[arg(long)]
    example: Option<String>,
    /// auto, I, Ib, II, III or third.
    #[arg(long, default_value = "auto")]
    case: String,
    /// e.g. `x1=-2:2,x2=-2:2`.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Failure {
        Failure::new(EXIT_USAGE, message)
    }

    fn io(path: &Path, e: io::Error) -> Failure {
        Failure::new(EXIT_FAIL, format!("{}: {e}", path.display()))
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Failure {
        let code = match e {
            SynthError::Unsupported(_) | SynthError::Precondition(_) => EXIT_UNSUPPORTED,
            SynthError::Expr(_) | SynthError::Model(_) => EXIT_USAGE,
        };
        Failure::new(code, e.to_string())
    }
}

struct Loaded {
    problem: Problem,
    domain: Domain,
    result: SynthesisResult,
}

fn load(input: &Input) -> Result<Loaded, Failure> {
    let problem = match (&input.system, &input.example) {
        (Some(path), _) => load_problem(path).map_err(|e| Failure::usage(e.to_string()))?,
        (None, Some(name)) => {
            registry::get(name)
                .ok_or_else(|| {
                    let names: Vec<_> = registry::names().collect();
                    Failure::usage(format!("unknown example `{name}` (one of: {})", names.join(", ")))
                })?
                .problem
        }
        (None, None) => return Err(Failure::usage("either --system or --example is required")),
    };
    let choice = match input.case.as_str() {
        "auto" => None,
        s => Some(s.parse::<Case>().map_err(Failure::usage)?),
    };
    let domain = match &input.domain {
        Some(s) => s.parse::<Domain>().map_err(|e| Failure::usage(e.to_string()))?,
        None => problem.domain_or_default(),
    };
    if domain.dim() != problem.system.order() {
        return Err(Failure::usage(format!(
            "domain has {} axes, the system has order {}",
            domain.dim(),
            problem.system.order()
        )));
    }
    let cost = select_cost(&problem, choice)?;
    let result = synthesize(&problem.system, &cost, &domain)?;
    Ok(Loaded {
        problem,
        domain,
        result,
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn print_result(r: &SynthesisResult) {
    println!("case: {}", r.case);
    println!("u = {}", r.u);
    println!("V = {}", r.value);
    println!("L = {} + r*u^2", r.l_state);
    for (k, v) in &r.gains {
        println!("{k} = {v}");
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    for c in &r.conditions {
        println!("condition {:<32} {:?}: {}", c.id, c.status, c.description);
    }
}

fn cmd_synthesize(input: &Input, out: Option<&Path>) -> Result<u8, Failure> {
    let l = load(input)?;
    print_result(&l.result);
    if let Some(p) = out {
        write_json(p, &l.result)?;
    }
    Ok(0)
}

fn cmd_verify(
    input: &Input,
    resolution: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let l = load(input)?;
    let res = resolution.unwrap_or_else(|| default_resolution(l.domain.dim()));
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let report = verify_all(&l.problem.system, &l.result, &l.domain, res, &opts);
    println!("{report}");
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    Ok(report.overall.exit_code() as u8)
}

fn parse_state(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("cannot parse initial state `{s}`")))
}

fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{i}.{ext}"),
        None => format!("{stem}_{i}"),
    };
    path.with_file_name(name)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    input: &Input,
    x0: &[String],
    dt: f64,
    tmax: f64,
    out: Option<&Path>,
    stride: usize,
    svg: Option<&Path>,
) -> Result<u8, Failure> {
    let l = load(input)?;
    let n = l.problem.system.order();
    let starts = if x0.is_empty() {
        initial_conditions(&l.domain, 0, 0)
    } else {
        x0.iter().map(|s| parse_state(s)).collect::<Result<_, _>>()?
    };
    if let Some(bad) = starts.iter().find(|x| x.len() != n) {
        return Err(Failure::usage(format!(
            "initial state has {} coordinates, the system has order {n}",
            bad.len()
        )));
    }
    let cfg = SimConfig {
        dt,
        t_max: tmax,
        ..SimConfig::default()
    };
    let cl = ClosedLoop::from_result(&l.problem.system, &l.result);
    let mut trajs = Vec::new();
    for (i, x) in starts.iter().enumerate() {
        let t = integrate(&cl, x, &cfg).map_err(|e| match e {
            SimError::Diverged { .. } => Failure::new(EXIT_DIVERGED, e.to_string()),
            _ => Failure::usage(e.to_string()),
        })?;
        let end = t.terminal();
        println!(
            "run {i}: x0 = {x:?}, t = {:.3}, x(T) = {end:?}, cost = {:.6}, converged = {}",
            t.times.last().copied().unwrap_or(0.0),
            t.cost_integral,
            t.converged_to.is_some()
        );
        if let Some(p) = out {
            let path = if starts.len() == 1 { p.to_path_buf() } else { numbered(p, i) };
            let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
            let mut w = BufWriter::new(file);
            t.write_csv(&cl, stride, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Failure::io(&path, e))?;
        }
        trajs.push(t);
    }
    if let Some(p) = svg {
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for s in trajs.iter().flat_map(|t| &t.states) {
            for k in 0..n {
                lo[k] = lo[k].min(s[k]);
                hi[k] = hi[k].max(s[k]);
            }
        }
        let bounds = lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| {
                let pad = 0.05 * (b - a).max(1.0);
                ((a - pad).min(-pad), (b + pad).max(pad))
            })
            .collect();
        let view = Domain::new(bounds).expect("padded bounds are ordered");
        let marks = minimizers(&cl, &view, 200);
        fs::write(p, phase_svg(&trajs, &marks, None)).map_err(|e| Failure::io(p, e))?;
    }
    Ok(0)
}

fn registry_entries(dir: Option<&Path>) -> Result<Vec<Entry>, Failure> {
    match dir {
        Some(d) => registry::load_dir(d).map_err(|e| Failure::usage(e.to_string())),
        None => Ok(registry::builtin()),
    }
}

fn cmd_list(dir: Option<&Path>) -> Result<u8, Failure> {
    for e in registry_entries(dir)? {
        println!("{:<20} {}", e.name, e.source);
    }
    Ok(0)
}

fn cmd_run_all(dir: Option<&Path>, seed: u64) -> Result<u8, Failure> {
    let entries = registry_entries(dir)?;
    let mut ok = 0;
    for e in &entries {
        let Some(expected) = &e.problem.expected else {
            println!("{:<20} SKIP (no expected forms)", e.name);
            continue;
        };
        let domain = e.problem.domain_or_default();
        let result = match select_cost(&e.problem, None)
            .and_then(|c| synthesize(&e.problem.system, &c, &domain))
        {
            Ok(r) => r,
            Err(err) => {
                println!("{:<20} ERROR {err}", e.name);
                continue;
            }
        };
        let cmp = registry::compare(e, &result, &domain);
        let opts = VerifyOptions {
            seed,
            ..VerifyOptions::default()
        };
        let report = verify_all(
            &e.problem.system,
            &result,
            &domain,
            default_resolution(domain.dim()),
            &opts,
        );
        let want = match expected.overall.as_deref() {
            None => Overall::Pass,
            Some(s) => s.parse().map_err(Failure::usage)?,
        };
        let verified = report.overall == want;
        let tag = if cmp.is_match() && verified { "ok" } else { "MISMATCH" };
        println!(
            "{:<20} {tag:<8} {:<10} verify {} (expected {want})",
            e.name, result.case, report.overall
        );
        if !cmp.is_match() {
            print!("{cmp}");
        }
        if cmp.is_match() && verified {
            ok += 1;
        }
    }
    println!("{ok}/{} match", entries.len());
    Ok(if ok == entries.len() { 0 } else { EXIT_FAIL })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Synthesize { input, out } => cmd_synthesize(&input, out.as_deref()),
        Command::Verify {
            input,
            resolution,
            seed,
            out,
        } => cmd_verify(&input, resolution, seed, out.as_deref()),
        Command::Simulate {
            input,
            x0,
            dt,
            tmax,
            out,
            stride,
            svg,
        } => cmd_simulate(&input, &x0, dt, tmax, out.as_deref(), stride, svg.as_deref()),
        Command::Examples { action } => match action {
            ExamplesAction::List { registry } => cmd_list(registry.as_deref()),
            ExamplesAction::RunAll { registry, seed } => cmd_run_all(registry.as_deref(), seed),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
