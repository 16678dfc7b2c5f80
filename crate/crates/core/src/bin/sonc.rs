use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sonc_core::bnb::{branch_and_bound, BnbOptions, NodeStrategy, SageMode};
use sonc_core::bounds::{sage_bound_with, sonc_bound_with, BoundOptions};
use sonc_core::circuits::CoveringStrategy;
use sonc_core::error::Error;
use sonc_core::generate::{generate, GeneratorSpec};
use sonc_core::minima::{sonc_min, sonc_min_signed};
use sonc_core::orthants::{fork_bound_with, minimal_orthants, ForkMethod, SignVector};
use sonc_core::poly::Polynomial;
use sonc_core::report::{self, Instance, Method, RunConfig, SCHEMA_VERSION};
use sonc_core::solver::DEFAULT_TOL;

const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "sonc", version, about = "Certified lower bounds for sparse polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower bound for the polynomial in FILE ('-' reads stdin).
    Bound {
        file: PathBuf,
        #[command(flatten)]
        opts: Shared,
        /// Print the bound of every minimal orthant (fork method).
        #[arg(long)]
        list_orthants: bool,
    },
    /// Candidate minimizer from the circuit heuristic.
    Min {
        file: PathBuf,
        /// Restrict to a sign cone, e.g. "+,-,0".
        #[arg(long)]
        cone: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Minimal orthants of the polynomial.
    Orthants {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Random instance with a full-dimensional Newton polytope.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        coeff_range: f64,
        #[arg(long, default_value_t = 1.0)]
        nonsquare_fraction: f64,
        /// Write JSON instead of text.
        #[arg(long)]
        json: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Runs methods over a directory of instances or a generated grid.
    Bench {
        /// Directory of polynomial files; overrides the grid.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3])]
        grid_n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [4u32])]
        grid_d: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [6usize, 9])]
        grid_t: Vec<usize>,
        /// Seeds per grid cell, counted from --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [MethodArg::Sonc, MethodArg::Bnb])]
        methods: Vec<MethodArg>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// CSV destination; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: Shared,
    },
}

#[derive(Args, Clone)]
struct Shared {
    #[arg(long, value_enum, default_value_t = MethodArg::Sonc)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::Worst)]
    strategy: StrategyArg,
    #[arg(long)]
    sparse: bool,
    #[arg(long, value_enum, default_value_t = CoveringArg::Simple)]
    covering: CoveringArg,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = SageArg::Eager)]
    sage: SageArg,
    /// Bounds used by the fork method on each orthant.
    #[arg(long, value_enum, default_value_t = ForkArg::Both)]
    fork: ForkArg,
    /// Maximum search tree size for bnb.
    #[arg(long)]
    node_budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds per instance and method.
    #[arg(long, default_value_t = report::DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sonc,
    Sage,
    Fork,
    Bnb,
}

impl std::fmt::Display for MethodArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(Method::from(*self).as_str())
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sonc => Method::Sonc,
            MethodArg::Sage => Method::Sage,
            MethodArg::Fork => Method::Fork,
            MethodArg::Bnb => Method::Bnb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Worst,
    Dfs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoveringArg {
    Simple,
    Extended,
}

#[derive(Clone, Copy, ValueEnum)]
enum SageArg {
    Off,
    Eager,
    Deferred,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForkArg {
    Sonc,
    Sage,
    Both,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: e.to_string() }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INTERNAL, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidPolynomial(_)
            | Error::Domain(_)
            | Error::TooManyVariables(_)
            | Error::InvalidSpec(_)
            | Error::Io(_)
            | Error::Json(_) => Failure::input(e),
            Error::UnboundedRelaxation(_) | Error::Numerical(_) | Error::Csv(_) => Failure::internal(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

impl Shared {
    fn bound_options(&self) -> BoundOptions {
        BoundOptions { covering: self.covering_strategy(), ..BoundOptions::default() }
    }

    fn covering_strategy(&self) -> CoveringStrategy {
        match self.covering {
            CoveringArg::Simple => CoveringStrategy::Simple,
            CoveringArg::Extended => CoveringStrategy::Extended,
        }
    }

    fn fork_method(&self) -> ForkMethod {
        match self.fork {
            ForkArg::Sonc => ForkMethod::Sonc,
            ForkArg::Sage => ForkMethod::Sage,
            ForkArg::Both => ForkMethod::Both,
        }
    }

    fn timeout(&self) -> CliResult<Duration> {
        Duration::try_from_secs_f64(self.timeout).map_err(|_| Failure::input(format!("invalid timeout {}", self.timeout)))
    }

    fn bnb_options(&self) -> CliResult<BnbOptions> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Failure::input(format!("--eps must be positive, got {}", self.eps)));
        }
        Ok(BnbOptions {
            strategy: match self.strategy {
                StrategyArg::Worst => NodeStrategy::WorstFirst,
                StrategyArg::Dfs => NodeStrategy::Dfs,
            },
            sparse: self.sparse,
            eps: self.eps,
            node_budget: self.node_budget,
            sage: match self.sage {
                SageArg::Off => SageMode::Off,
                SageArg::Eager => SageMode::Eager,
                SageArg::Deferred => SageMode::Deferred,
            },
            covering: self.covering_strategy(),
            timeout: Some(self.timeout()?),
            ..BnbOptions::default()
        })
    }

    fn run_config(&self) -> CliResult<RunConfig> {
        Ok(RunConfig { bound: self.bound_options(), bnb: self.bnb_options()?, fork: self.fork_method(), timeout: self.timeout()? })
    }
}

/// JSON number, or a string for values JSON cannot hold.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn read_polynomial(path: &Path) -> CliResult<Polynomial> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(Failure::input)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
    };
    Ok(Polynomial::from_text_or_json(&text)?)
}

fn emit(out: &mut impl Write, json: bool, record: Value, text: impl FnOnce() -> String) -> CliResult<()> {
    let line = if json {
        let mut record = record;
        record["schema_version"] = json!(SCHEMA_VERSION);
        record.to_string()
    } else {
        text()
    };
    writeln!(out, "{line}").map_err(Failure::internal)
}

fn cmd_bound(file: &Path, opts: &Shared, list_orthants: bool) -> CliResult<()> {
    let p = read_polynomial(file)?;
    let mut out = io::stdout().lock();
    let method = Method::from(opts.method);
    match opts.method {
        MethodArg::Sonc | MethodArg::Sage => {
            let r = if method == Method::Sonc {
                sonc_bound_with(&p, &opts.bound_options())
            } else {
                sage_bound_with(&p, &opts.bound_options())
            };
            let record = json!({
                "command": "bound",
                "method": method.as_str(),
                "lower_bound": num(r.lower_bound),
                "status": r.status,
                "wall_time": r.wall_time,
            });
            emit(&mut out, opts.json, record, || format!("{} lower bound: {} ({:?})", method, r.lower_bound, r.status))
        }
        MethodArg::Fork => {
            let r = fork_bound_with(&p, opts.fork_method(), &opts.bound_options())?;
            let orthants: Vec<Value> = r
                .orthants
                .iter()
                .map(|o| json!({ "orthant": o.orthant.to_string(), "lower_bound": num(o.lower_bound), "status": o.status }))
                .collect();
            let mut record = json!({
                "command": "bound",
                "method": "fork",
                "lower_bound": num(r.lower_bound),
                "status": r.status,
                "orthant_count": r.orthants.len(),
                "wall_time": r.wall_time,
            });
            if list_orthants {
                record["orthants"] = Value::Array(orthants);
            }
            emit(&mut out, opts.json, record, || {
                let mut s = format!("fork lower bound: {} ({:?}) over {} orthants", r.lower_bound, r.status, r.orthants.len());
                if list_orthants {
                    for o in &r.orthants {
                        s.push_str(&format!("\n  {} {} ({:?})", o.orthant, o.lower_bound, o.status));
                    }
                }
                s
            })
        }
        MethodArg::Bnb => {
            let r = branch_and_bound(&p, &opts.bnb_options()?)?;
            let gap = report::gap(r.lower_bound, r.best_value);
            let record = json!({
                "command": "bound",
                "method": "bnb",
                "lower_bound": num(r.lower_bound),
                "best_value": num(r.best_value),
                "gap": num(gap),
                "minimizer": nums(&r.minimizer),
                "nodes_expanded": r.nodes_expanded,
                "stop_reason": r.stop_reason,
                "failures": r.failures,
                "wall_time": r.wall_time,
            });
            emit(&mut out, opts.json, record, || {
                format!(
                    "bnb lower bound: {}\nbest value: {} at {:?}\ngap: {}\nnodes: {} ({:?})",
                    r.lower_bound, r.best_value, r.minimizer, gap, r.nodes_expanded, r.stop_reason
                )
            })
        }
    }
}

fn parse_cone(text: &str, n: usize) -> CliResult<SignVector> {
    let signs: CliResult<Vec<i8>> = text
        .split(',')
        .map(|s| match s.trim() {
            "+" | "1" | "+1" => Ok(1),
            "-" | "-1" => Ok(-1),
            "0" => Ok(0),
            other => Err(Failure::input(format!("bad sign '{other}' in --cone"))),
        })
        .collect();
    let signs = signs?;
    if signs.len() != n {
        return Err(Failure::input(format!("--cone has {} signs for {} variables", signs.len(), n)));
    }
    SignVector::new(signs).map_err(Failure::from)
}

fn cmd_min(file: &Path, cone: Option<&str>, json: bool) -> CliResult<()> {
    let p = read_polynomial(file)?;
    let r = match cone {
        Some(c) => sonc_min_signed(&p, &parse_cone(c, p.nvars())?),
        None => sonc_min(&p),
    };
    let record = json!({
        "command": "min",
        "value": num(r.value),
        "candidate": nums(&r.candidate),
        "relaxed_candidate": nums(&r.relaxed_candidate),
        "circuit_minimizers": r.circuit_minimizers.iter().map(|m| nums(m)).collect::<Vec<_>>(),
        "iterations": r.iterations,
        "converged": r.converged,
    });
    emit(&mut io::stdout().lock(), json, record, || format!("value {} at {:?}", r.value, r.candidate))
}

fn cmd_orthants(file: &Path, json: bool) -> CliResult<()> {
    let p = read_polynomial(file)?;
    let list = minimal_orthants(&p)?;
    let signs: Vec<String> = list.iter().map(|e| e.sign_vector().to_string()).collect();
    let record = json!({ "command": "orthants", "count": signs.len(), "orthants": signs });
    emit(&mut io::stdout().lock(), json, record, || signs.join("\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(n: usize, d: u32, t: usize, seed: u64, coeff_range: f64, nonsquare_fraction: f64, json: bool, out: Option<&Path>) -> CliResult<()> {
    let spec = GeneratorSpec { coeff_range, nonsquare_fraction, ..GeneratorSpec::new(n, d, t, seed) };
    let p = generate(&spec)?;
    let text = if json { p.to_json() } else { p.to_string() };
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => writeln!(io::stdout().lock(), "{text}").map_err(Failure::internal),
    }
}

fn load_dir(dir: &Path) -> CliResult<Vec<Instance>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|path| {
            let polynomial = read_polynomial(path).map_err(|f| Failure::input(format!("{}: {}", path.display(), f.message)))?;
            let id = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok(Instance { id, seed: None, polynomial })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    dir: Option<&Path>,
    grid_n: &[usize],
    grid_d: &[u32],
    grid_t: &[usize],
    seeds: u64,
    methods: &[MethodArg],
    workers: usize,
    out: Option<&Path>,
    opts: &Shared,
) -> CliResult<()> {
    let instances = match dir {
        Some(d) => load_dir(d)?,
        None => {
            let mut v = Vec::new();
            for &n in grid_n {
                for &d in grid_d {
                    for &t in grid_t {
                        for s in opts.seed..opts.seed + seeds {
                            v.push(Instance::generated(&GeneratorSpec::new(n, d, t, s))?);
                        }
                    }
                }
            }
            v
        }
    };
    let methods: Vec<Method> = methods.iter().map(|&m| m.into()).collect();
    let rows = report::bench(&instances, &methods, &opts.run_config()?, workers)?;
    let summary = report::summarize(&rows);
    let summary_text = if opts.json {
        serde_json::to_string(&summary).map_err(Failure::internal)?
    } else {
        summary.to_string()
    };
    match out {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            report::write_csv(&rows, f).map_err(Failure::internal)?;
            writeln!(io::stdout().lock(), "{summary_text}").map_err(Failure::internal)
        }
        None => {
            report::write_csv(&rows, io::stdout().lock()).map_err(Failure::internal)?;
            writeln!(io::stderr().lock(), "{summary_text}").map_err(Failure::internal)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Bound { file, opts, list_orthants } => cmd_bound(&file, &opts, list_orthants),
        Command::Min { file, cone, json } => cmd_min(&file, cone.as_deref(), json),
        Command::Orthants { file, json } => cmd_orthants(&file, json),
        Command::Gen { n, d, t, seed, coeff_range, nonsquare_fraction, json, out } => {
            cmd_gen(n, d, t, seed, coeff_range, nonsquare_fraction, json, out.as_deref())
        }
        Command::Bench { dir, grid_n, grid_d, grid_t, seeds, methods, workers, out, opts } => {
            cmd_bench(dir.as_deref(), &grid_n, &grid_d, &grid_t, seeds, &methods, workers, out.as_deref(), &opts)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
