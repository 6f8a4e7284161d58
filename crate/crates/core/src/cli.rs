//! The `gwsdp` command line: `solve`, `round`, `bench`, `estimate`, `oracle`.
//!
//! Settings resolve as flags over a TOML `--config` file over built-in
//! defaults. The effective [`RunConfig`] and [`VERSION`](crate::VERSION)
//! are embedded in every artifact. CSV files start with `#` comment lines
//! carrying that provenance, then a header row.
//!
//! Exit codes: 0 success, 1 non-convergence, 2 usage or I/O error, 3 internal
//! invariant violation. Errors are printed to stdout as JSON.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::graph::Graph;
use crate::hwmodel::{self, HwParams};
use crate::ipm::{self, IpmConfig, SdpProblem, SolveOutput, Status};
use crate::linalg::SymMatrix;
use crate::rounding;
use crate::VERSION;

/// A seeded random graph requested on the command line as
/// `n:density:seed[:w_min:w_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomGraphSpec {
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub w_min: i64,
    #[serde(default = "one")]
    pub w_max: i64,
}

fn one() -> i64 {
    1
}

impl RandomGraphSpec {
    pub fn name(&self) -> String {
        format!("rand-n{}-d{}-s{}-w{}_{}", self.n, self.density, self.seed, self.w_min, self.w_max)
    }
}

impl std::str::FromStr for RandomGraphSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = s.split(':').collect();
        if f.len() != 3 && f.len() != 5 {
            return Err(format!("expected n:density:seed[:w_min:w_max], got {s:?}"));
        }
        let bad = |what: &str| format!("bad {what} in {s:?}");
        let mut spec = RandomGraphSpec {
            n: f[0].parse().map_err(|_| bad("n"))?,
            density: f[1].parse().map_err(|_| bad("density"))?,
            seed: f[2].parse().map_err(|_| bad("seed"))?,
            w_min: 1,
            w_max: 1,
        };
        if f.len() == 5 {
            spec.w_min = f[3].parse().map_err(|_| bad("w_min"))?;
            spec.w_max = f[4].parse().map_err(|_| bad("w_max"))?;
        }
        Ok(spec)
    }
}

/// Everything a run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub graphs: Vec<PathBuf>,
    pub random: Vec<RandomGraphSpec>,
    pub precisions: Vec<u32>,
    pub tol_sdp: f64,
    pub tol_cg: f64,
    pub eta: f64,
    pub theta: Option<f64>,
    pub max_iter: usize,
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub jobs: usize,
    pub best_known: Option<f64>,
    pub hw: HwParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ipm = IpmConfig::default();
        Self {
            graphs: Vec::new(),
            random: Vec::new(),
            precisions: vec![64],
            tol_sdp: ipm.tol_sdp,
            tol_cg: ipm.tol_cg,
            eta: ipm.eta,
            theta: ipm.theta,
            max_iter: ipm.max_iter,
            seed: 0,
            trials: 10,
            out: PathBuf::from("out"),
            jobs: 1,
            best_known: None,
            hw: HwParams::default(),
        }
    }
}

impl RunConfig {
    pub fn ipm_config(&self, bits: u32) -> IpmConfig {
        IpmConfig {
            tol_sdp: self.tol_sdp,
            tol_cg: self.tol_cg,
            theta: self.theta,
            eta: self.eta,
            bits,
            max_iter: self.max_iter,
            ..IpmConfig::default()
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.precisions.is_empty() {
            return Err(CliError::usage("at least one precision is required"));
        }
        for &b in &self.precisions {
            self.ipm_config(b).validate().map_err(CliError::from)?;
        }
        if self.jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        self.hw.validate().map_err(CliError::from)?;
        Ok(())
    }

    fn json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[derive(Parser, Debug)]
#[command(name = "gwsdp", version, about = "Max-Cut SDP relaxation with extended-precision CG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the relaxation at each requested precision; write traces and solutions.
    Solve(Common),
    /// Round a solution by random hyperplanes.
    Round {
        #[command(flatten)]
        common: Common,
        /// Solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
    },
    /// Sweep graphs × precisions and tabulate CG iteration totals.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Random graph `n:density:seed[:w_min:w_max]` (repeatable).
        #[arg(long = "random")]
        random: Vec<RandomGraphSpec>,
    },
    /// Turn CG iteration traces into hardware time estimates.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Trace CSV from `solve` or step CSV from `bench` (repeatable).
        #[arg(long = "trace", required = true)]
        traces: Vec<PathBuf>,
        /// Compare precisions over their common steps when step counts differ.
        #[arg(long)]
        truncate: bool,
        /// Also evaluate the probing schedule with this period (in steps).
        #[arg(long)]
        online_period: Option<usize>,
        /// Relative gain needed for the probing schedule to switch.
        #[arg(long, default_value_t = 0.1)]
        online_threshold: f64,
    },
    /// Exact maximum cut by enumeration (n <= 22).
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Compare against the bound of this solution.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Gset graph file (repeatable).
    #[arg(long = "graph")]
    graphs: Vec<PathBuf>,
    /// Comma-separated mantissa widths, e.g. 64,256,1024.
    #[arg(long, value_delimiter = ',')]
    precisions: Option<Vec<u32>>,
    #[arg(long)]
    tol_sdp: Option<f64>,
    #[arg(long)]
    tol_cg: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    best_known: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Memory bandwidth in bytes/s.
    #[arg(long)]
    hw_bandwidth: Option<f64>,
    /// Core clock in Hz.
    #[arg(long)]
    hw_clock: Option<f64>,
    /// TOML file with any `RunConfig` field.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, random: &[RandomGraphSpec]) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read_file(path)?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if !self.graphs.is_empty() {
            cfg.graphs = self.graphs.clone();
        }
        if !random.is_empty() {
            cfg.random = random.to_vec();
        }
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { cfg.$field = v; } )* };
        }
        take!(precisions, tol_sdp, tol_cg, eta, max_iter, seed, trials, out, jobs);
        if self.theta.is_some() {
            cfg.theta = self.theta;
        }
        if self.best_known.is_some() {
            cfg.best_known = self.best_known;
        }
        if let Some(b) = self.hw_bandwidth {
            cfg.hw.mem_bandwidth = b;
        }
        if let Some(c) = self.hw_clock {
            cfg.hw.clock_hz = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "usage", message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: 2, kind: "io", message: format!("{}: {e}", path.display()) }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { code: 3, kind: "internal", message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Parse { .. } | Error::InvalidGraph(_) => "input",
            Error::UnsupportedPrecision(_) | Error::Config(_) | Error::TooLarge { .. } => "usage",
            Error::ScheduleMismatch(_) => "trace-schema",
            Error::NotPsd { .. } | Error::InvalidAssignment(_) | Error::Domain(_) => "input",
            Error::LengthMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::NotPositiveDefinite
            | Error::StepFailure(_) => return CliError::internal(e.to_string()),
        };
        Self { code: 2, kind, message: e.to_string() }
    }
}

/// Parses `args` (including the program name), runs the command, writes the
/// result document to `stdout` and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            return emit_error(stdout, &CliError::usage(e.to_string().trim_end().to_string()));
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli.command)));
    match result {
        Ok(Ok((doc, code))) => {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("json"));
            code
        }
        Ok(Err(e)) => emit_error(stdout, &e),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            emit_error(stdout, &CliError::internal(msg))
        }
    }
}

fn emit_error(stdout: &mut dyn Write, e: &CliError) -> i32 {
    let doc = json!({ "version": VERSION, "error": { "kind": e.kind, "message": e.message, "exit_code": e.code } });
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("json"));
    e.code
}

fn dispatch(cmd: Command) -> Result<(Value, i32), CliError> {
    match cmd {
        Command::Solve(common) => cmd_solve(&common.resolve(&[])?),
        Command::Round { common, solution } => cmd_round(&common.resolve(&[])?, &solution),
        Command::Bench { common, random } => cmd_bench(&common.resolve(&random)?),
        Command::Estimate { common, traces, truncate, online_period, online_threshold } => {
            let cfg = common.resolve(&[])?;
            cmd_estimate(&cfg, &traces, truncate, online_period.map(|p| (p, online_threshold)))
        }
        Command::Oracle { common, solution } => cmd_oracle(&common.resolve(&[])?, solution.as_deref()),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_out(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned())
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    Ok(Graph::parse_gset(&read_file(path)?).map_err(|e| CliError {
        message: format!("{}: {e}", path.display()),
        ..CliError::from(e)
    })?)
}

/// Loads every file and random graph in `cfg`, named by file stem or spec.
fn load_graphs(cfg: &RunConfig) -> Result<Vec<(String, Graph)>, CliError> {
    let mut out = Vec::new();
    for p in &cfg.graphs {
        out.push((stem(p), load_graph(p)?));
    }
    for spec in &cfg.random {
        let g = Graph::random(spec.n, spec.density, spec.w_min, spec.w_max, spec.seed)?;
        out.push((spec.name(), g));
    }
    let mut names: Vec<&String> = out.iter().map(|(n, _)| n).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::usage(format!("two graphs share the name {:?}", w[0])));
    }
    Ok(out)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn preamble(cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!("# {VERSION}\n# config: {}\n", serde_json::to_string(&cfg.json()).expect("json"));
    for (k, v) in extra {
        let _ = writeln!(s, "# {k}: {v}");
    }
    s
}

/// Runs `jobs` with up to `workers` threads; results come back in job order.
fn run_parallel<J: Sync, R: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(jobs.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                *slots[i].lock().expect("slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot").expect("job ran")).collect()
}

fn status_str(s: &Status) -> String {
    match s {
        Status::Converged => "converged".into(),
        Status::IterationLimit => "iteration-limit".into(),
        Status::StepFailure(r) => format!("step-failure: {r}"),
    }
}

/// Trace CSV for one solve.
pub fn trace_csv(cfg: &RunConfig, name: &str, n: usize, bits: u32, out: &SolveOutput) -> String {
    let mut s = preamble(cfg, &[("graph", name.to_string()), ("n", n.to_string()), ("bits", bits.to_string())]);
    s.push_str("k,mu,rp,rd,gap,cg_iters,kappa,alpha,wall_s\n");
    for r in &out.trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f(r.mu),
            fmt_f(r.rp),
            fmt_f(r.rd),
            fmt_f(r.gap),
            r.cg_iters,
            fmt_f(r.kappa),
            fmt_f(r.alpha),
            fmt_f(r.wall_s)
        );
    }
    s
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    version: String,
    config: Value,
    graph: String,
    n: usize,
    bits: u32,
    status: String,
    steps: usize,
    total_cg_iterations: usize,
    final_rp: f64,
    final_rd: f64,
    final_gap: f64,
    primal_objective: f64,
    sdp_cut_bound: f64,
    dual_damping: Vec<(usize, f64)>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn solve_one(cfg: &RunConfig, name: &str, g: &Graph, bits: u32) -> Result<(Value, bool), CliError> {
    let problem = SdpProblem::from_graph(g)?;
    let out = ipm::solve(&problem, &cfg.ipm_config(bits))?;
    let n = g.n();
    let trace_path = cfg.out.join(format!("trace_{name}_{bits}.csv"));
    write_file(&trace_path, &trace_csv(cfg, name, n, bits, &out))?;
    let objective = ipm::trace_product(problem.c(), &out.state.x).to_f64();
    let bound = rounding::sdp_cut_bound(g, &out.state.x)?;
    let x = out.state.x.to_f64();
    let sol = SolutionFile {
        version: VERSION.into(),
        config: cfg.json(),
        graph: name.into(),
        n,
        bits,
        status: status_str(&out.status),
        steps: out.trace.len(),
        total_cg_iterations: out.total_cg_iterations(),
        final_rp: out.final_rp,
        final_rd: out.final_rd,
        final_gap: out.final_gap,
        primal_objective: objective,
        sdp_cut_bound: bound,
        dual_damping: out.trace.iter().filter(|r| r.dual_beta < 1.0).map(|r| (r.k, r.dual_beta)).collect(),
        x: (0..n).map(|i| x.row(i).to_vec()).collect(),
        y: out.state.y.to_f64s(),
    };
    let sol_path = cfg.out.join(format!("solution_{name}_{bits}.json"));
    write_file(&sol_path, &serde_json::to_string_pretty(&sol).expect("json"))?;
    let summary = json!({
        "graph": name,
        "n": n,
        "bits": bits,
        "status": sol.status,
        "steps": sol.steps,
        "total_cg_iterations": sol.total_cg_iterations,
        "final_rp": sol.final_rp,
        "final_rd": sol.final_rd,
        "final_gap": sol.final_gap,
        "primal_objective": objective,
        "sdp_cut_bound": bound,
        "trace": trace_path,
        "solution": sol_path,
    });
    Ok((summary, out.converged()))
}

fn cmd_solve(cfg: &RunConfig) -> Result<(Value, i32), CliError> {
    let graphs = load_graphs(cfg)?;
    if graphs.is_empty() {
        return Err(CliError::usage("no graph given (use --graph)"));
    }
    ensure_out(cfg)?;
    let jobs: Vec<(usize, u32)> =
        (0..graphs.len()).flat_map(|g| cfg.precisions.iter().map(move |&b| (g, b))).collect();
    let results = run_parallel(&jobs, cfg.jobs, |&(gi, bits)| solve_one(cfg, &graphs[gi].0, &graphs[gi].1, bits));
    let mut runs = Vec::new();
    let mut all = true;
    for r in results {
        let (summary, ok) = r?;
        all &= ok;
        runs.push(summary);
    }
    Ok((json!({ "version": VERSION, "config": cfg.json(), "runs": runs }), if all { 0 } else { 1 }))
}

fn cmd_round(cfg: &RunConfig, solution: &Path) -> Result<(Value, i32), CliError> {
    if cfg.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let [path] = cfg.graphs.as_slice() else {
        return Err(CliError::usage("round needs exactly one --graph"));
    };
    let g = load_graph(path)?;
    let sol: SolutionFile = serde_json::from_str(&read_file(solution)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", solution.display())))?;
    if sol.n != g.n() || sol.x.len() != g.n() || sol.x.iter().any(|r| r.len() != g.n()) {
        return Err(CliError::usage(format!("solution has order {} but the graph has {} vertices", sol.n, g.n())));
    }
    let x = SymMatrix::from_fn_f64(g.n(), |i, j| 0.5 * (sol.x[i][j] + sol.x[j][i]));
    let res = rounding::best_of_rounds(&g, &x, cfg.trials, cfg.seed)?;
    if rounding::cut_value(&g, &res.assignment)? != res.cut {
        return Err(CliError::internal("reported cut does not match its assignment"));
    }
    let ratio = cfg.best_known.map(|b| res.cut as f64 / b);
    let name = stem(path);
    let doc = json!({
        "version": VERSION,
        "config": cfg.json(),
        "graph": name,
        "solution": solution,
        "assignment": res.assignment,
        "cut": res.cut,
        "trials": res.trials,
        "seed": res.seed,
        "mean_cut": res.mean_cut,
        "sdp_cut_bound": sol.sdp_cut_bound,
        "ratio_to_best_known": ratio,
    });
    ensure_out(cfg)?;
    write_file(
        &cfg.out.join(format!("cut_{name}_{}.json", sol.bits)),
        &serde_json::to_string_pretty(&doc).expect("json"),
    )?;
    Ok((doc, 0))
}

struct BenchRow {
    graph: String,
    n: usize,
    bits: u32,
    status: String,
    converged: bool,
    records: Vec<ipm::StepRecord>,
}

fn cmd_bench(cfg: &RunConfig) -> Result<(Value, i32), CliError> {
    if cfg.graphs.is_empty() && cfg.random.is_empty() {
        return Err(CliError::usage("bench needs at least one --graph or --random"));
    }
    ensure_out(cfg)?;
    // A graph that fails to load becomes a failed row; the sweep continues.
    let mut graphs: Vec<(String, Result<Graph, String>)> = Vec::new();
    for p in &cfg.graphs {
        graphs.push((stem(p), load_graph(p).map_err(|e| e.message)));
    }
    for spec in &cfg.random {
        let g = Graph::random(spec.n, spec.density, spec.w_min, spec.w_max, spec.seed).map_err(|e| e.to_string());
        graphs.push((spec.name(), g));
    }
    let jobs: Vec<(usize, u32)> =
        (0..graphs.len()).flat_map(|g| cfg.precisions.iter().map(move |&b| (g, b))).collect();
    let rows = run_parallel(&jobs, cfg.jobs, |&(gi, bits)| {
        let (name, g) = &graphs[gi];
        let mut row =
            BenchRow { graph: name.clone(), n: 0, bits, status: String::new(), converged: false, records: Vec::new() };
        match g {
            Err(e) => row.status = format!("error: {e}"),
            Ok(g) => {
                row.n = g.n();
                match SdpProblem::from_graph(g).and_then(|p| ipm::solve(&p, &cfg.ipm_config(bits))) {
                    Ok(out) => {
                        row.status = status_str(&out.status);
                        row.converged = out.converged();
                        row.records = out.trace;
                    }
                    Err(e) => row.status = format!("error: {e}"),
                }
            }
        }
        row
    });

    let totals: BTreeMap<(String, u32), usize> = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| ((r.graph.clone(), r.bits), r.records.iter().map(|s| s.cg_iters).sum()))
        .collect();
    let mut sweep = preamble(cfg, &[]);
    sweep.push_str("graph,n,bits,status,steps,total_cg_iters,normalized_to_64,initial_kappa,final_kappa\n");
    let mut steps = preamble(cfg, &[]);
    steps.push_str("graph,n,bits,k,mu,rp,rd,gap,cg_iters,kappa,alpha\n");
    for r in &rows {
        let total: usize = r.records.iter().map(|s| s.cg_iters).sum();
        let norm = match totals.get(&(r.graph.clone(), 64)) {
            Some(&t64) if r.converged && t64 > 0 => fmt_f(total as f64 / t64 as f64),
            _ => String::new(),
        };
        let k0 = r.records.first().map_or(String::new(), |s| fmt_f(s.kappa));
        let kf = r.records.last().map_or(String::new(), |s| fmt_f(s.kappa));
        let _ = writeln!(
            sweep,
            "{},{},{},{},{},{},{},{},{}",
            r.graph,
            r.n,
            r.bits,
            csv_field(&r.status),
            r.records.len(),
            total,
            norm,
            k0,
            kf
        );
        for s in &r.records {
            let _ = writeln!(
                steps,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.graph,
                r.n,
                r.bits,
                s.k,
                fmt_f(s.mu),
                fmt_f(s.rp),
                fmt_f(s.rd),
                fmt_f(s.gap),
                s.cg_iters,
                fmt_f(s.kappa),
                fmt_f(s.alpha)
            );
        }
    }
    let sweep_path = cfg.out.join("bench_sweep.csv");
    let steps_path = cfg.out.join("bench_steps.csv");
    write_file(&sweep_path, &sweep)?;
    write_file(&steps_path, &steps)?;
    let all = rows.iter().all(|r| r.converged);
    let manifest = json!({
        "version": VERSION,
        "config": cfg.json(),
        "files": [sweep_path, steps_path],
        "rows": rows.iter().map(|r| json!({
            "graph": r.graph,
            "n": r.n,
            "bits": r.bits,
            "status": r.status,
            "total_cg_iterations": r.records.iter().map(|s| s.cg_iters).sum::<usize>(),
        })).collect::<Vec<_>>(),
    });
    write_file(&cfg.out.join("bench_manifest.json"), &serde_json::to_string_pretty(&manifest).expect("json"))?;
    Ok((manifest, if all { 0 } else { 1 }))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-graph iteration traces: name → (n, bits → per-step CG iterations).
type TraceSet = BTreeMap<String, (usize, BTreeMap<u32, Vec<usize>>)>;

/// Reads `solve` trace CSVs and `bench` step CSVs.
pub fn read_traces(paths: &[PathBuf]) -> Result<BTreeMap<String, (usize, BTreeMap<u32, Vec<usize>>)>, Error> {
    let mut set = TraceSet::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ScheduleMismatch(format!("{}: {e}", path.display())))?;
        parse_trace_text(&text, &mut set).map_err(|e| match e {
            Error::ScheduleMismatch(m) => Error::ScheduleMismatch(format!("{}: {m}", path.display())),
            other => other,
        })?;
    }
    Ok(set)
}

fn parse_trace_text(text: &str, set: &mut TraceSet) -> Result<(), Error> {
    let bad = |m: String| Error::ScheduleMismatch(m);
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut header: Option<Vec<String>> = None;
    for (lineno, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let Some(h) = &header else {
            header = Some(fields.iter().map(|s| s.trim().to_string()).collect());
            continue;
        };
        if fields.len() != h.len() {
            return Err(bad(format!("line {}: {} fields, header has {}", lineno + 1, fields.len(), h.len())));
        }
        let get = |name: &str| -> Result<String, Error> {
            if let Some(i) = h.iter().position(|c| c == name) {
                return Ok(fields[i].trim().to_string());
            }
            meta.get(name).cloned().ok_or_else(|| bad(format!("no {name:?} column or metadata")))
        };
        let parse = |name: &str| -> Result<usize, Error> {
            get(name)?.parse::<usize>().map_err(|e| bad(format!("line {}: {name}: {e}", lineno + 1)))
        };
        let graph = get("graph")?;
        let n = parse("n")?;
        let bits = u32::try_from(parse("bits")?).map_err(|e| bad(e.to_string()))?;
        let k = parse("k")?;
        let iters = parse("cg_iters")?;
        let entry = set.entry(graph.clone()).or_insert_with(|| (n, BTreeMap::new()));
        if entry.0 != n {
            return Err(bad(format!("graph {graph} appears with n = {} and n = {n}", entry.0)));
        }
        let v = entry.1.entry(bits).or_default();
        if v.len() != k {
            return Err(bad(format!("graph {graph}, {bits}-bit: step {k} out of order")));
        }
        v.push(iters);
    }
    if header.is_none() {
        return Err(bad("no header row".into()));
    }
    Ok(())
}

fn cmd_estimate(
    cfg: &RunConfig,
    traces: &[PathBuf],
    truncate: bool,
    online: Option<(usize, f64)>,
) -> Result<(Value, i32), CliError> {
    let set = read_traces(traces)?;
    if set.is_empty() {
        return Err(CliError::from(Error::ScheduleMismatch("traces contain no steps".into())));
    }
    ensure_out(cfg)?;
    let hw = &cfg.hw;
    let mut graphs = serde_json::Map::new();
    for (name, (n, per_bits)) in &set {
        let mut per_bits = per_bits.clone();
        let min_len = per_bits.values().map(Vec::len).min().unwrap_or(0);
        let truncated = truncate && per_bits.values().any(|v| v.len() != min_len);
        if truncate {
            per_bits.values_mut().for_each(|v| v.truncate(min_len));
        }
        let schedule = hwmodel::adaptive_schedule(&per_bits, *n, hw)?;
        let mut steps = preamble(cfg, &[("graph", name.clone()), ("n", n.to_string())]);
        steps.push_str("k,bits,est_seconds\n");
        for k in 0..min_len {
            for (b, t) in &schedule.per_precision_step_s {
                let _ = writeln!(steps, "{k},{b},{}", fmt_f(t[k]));
            }
        }
        let mut chosen = preamble(cfg, &[("graph", name.clone()), ("n", n.to_string()), ("schedule", "adaptive".into())]);
        chosen.push_str("k,bits,est_seconds\n");
        for (k, (b, t)) in schedule.chosen_bits.iter().zip(&schedule.step_seconds).enumerate() {
            let _ = writeln!(chosen, "{k},{b},{}", fmt_f(*t));
        }
        write_file(&cfg.out.join(format!("hw_steps_{name}.csv")), &steps)?;
        write_file(&cfg.out.join(format!("hw_schedule_{name}.csv")), &chosen)?;
        let mut entry = json!({
            "n": n,
            "steps": min_len,
            "truncated": truncated,
            "per_precision_total_s": schedule.per_precision_total_s,
            "adaptive_total_s": schedule.total_s,
            "gain_vs_64b": schedule.gain_vs_64b,
            "gain_vs_1024b": schedule.gain_vs_1024b,
            "chosen_bits": schedule.chosen_bits,
            "cg_iter_time_s": cfg.precisions.iter().chain(per_bits.keys()).map(|&b| {
                (b.to_string(), json!(hwmodel::cg_iter_time(*n, b, hw).ok()))
            }).collect::<serde_json::Map<_, _>>(),
        });
        if let Some((period, threshold)) = online {
            let s = hwmodel::online_schedule(&per_bits, *n, hw, period, threshold)?;
            entry["online"] = json!({
                "period": period,
                "threshold": threshold,
                "total_s": s.total_s,
                "gain_vs_64b": s.gain_vs_64b,
                "gain_vs_1024b": s.gain_vs_1024b,
                "chosen_bits": s.chosen_bits,
            });
        }
        graphs.insert(name.clone(), entry);
    }
    let doc = json!({
        "version": VERSION,
        "config": cfg.json(),
        "label": "estimated hardware time (model, not measured)",
        "traces": traces,
        "cores_to_saturate": hwmodel::cores_to_saturate(hw),
        "graphs": graphs,
    });
    write_file(&cfg.out.join("hw_summary.json"), &serde_json::to_string_pretty(&doc).expect("json"))?;
    Ok((doc, 0))
}

fn cmd_oracle(cfg: &RunConfig, solution: Option<&Path>) -> Result<(Value, i32), CliError> {
    let [path] = cfg.graphs.as_slice() else {
        return Err(CliError::usage("oracle needs exactly one --graph"));
    };
    let g = load_graph(path)?;
    let (maxcut, assignment) = rounding::brute_force_maxcut(&g)?;
    let mut doc = json!({
        "version": VERSION,
        "config": cfg.json(),
        "graph": stem(path),
        "n": g.n(),
        "maxcut": maxcut,
        "assignment": assignment,
    });
    if let Some(sp) = solution {
        let sol: SolutionFile = serde_json::from_str(&read_file(sp)?)
            .map_err(|e| CliError::usage(format!("{}: {e}", sp.display())))?;
        doc["sdp_cut_bound"] = json!(sol.sdp_cut_bound);
        doc["bound_minus_maxcut"] = json!(sol.sdp_cut_bound - maxcut as f64);
    }
    Ok((doc, 0))
}
