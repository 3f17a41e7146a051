mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use parisi_hj::finite_n::{cascade_overlaps, free_energy_samples, overlap_targets, sample_cascade_with, TailMass, MAX_SPINS};
use parisi_hj::hopflax::{classical_functional_with, hj_residual, solve, HopfLaxProblem};
use parisi_hj::initial_condition::psi_ising_pde;
use parisi_hj::measures::pushforward_txiprime;
use parisi_hj::{
    DiscreteMeasure, FieldGrid, HopfLaxResult, MeanEstimate, MeasureCDF, MixtureSpec, PsiEvaluator, PsiKind, SingleSiteLaw,
    SolveOptions,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use output::{join, sig12, Run, Table};

#[derive(Parser, Debug)]
#[command(name = "parisi-hj", version, about = "Parisi free energies through the Hopf-Lax formula")]
struct Cli {
    /// Directory for CSV/JSON outputs and the run manifest.
    #[arg(long, global = true, env = "PARISI_HJ_OUT", default_value = ".")]
    out: PathBuf,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// xi, xi', xi'' and the convex dual xi* at a point.
    Xi(XiArgs),
    /// Initial condition psi of a discrete measure.
    Psi(PsiArgs),
    /// Hopf-Lax value f^(k)(t, x) at a given base point.
    Hopflax(HopfLaxArgs),
    /// Parisi value f^(k)(t, delta_0).
    Parisi(ParisiArgs),
    /// Classical Parisi functional at a measure on [0, 1].
    Classical(ClassicalArgs),
    /// Finite-difference residual of the finite-dimensional HJ equation.
    Residual(ResidualArgs),
    /// Exhaustive-enumeration free energy of the Ising model.
    #[command(name = "finite-n")]
    FiniteN(FiniteNArgs),
    /// Overlap statistics of Poisson-Dirichlet cascades.
    Cascade(CascadeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Ising,
    Spherical,
    Product,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Cascade,
    Pde,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Tail {
    Drop,
    Expected,
}

/// Reference measure selection shared by the psi-based commands.
#[derive(Args, Debug, Serialize)]
struct KindArgs {
    #[arg(long, value_enum, default_value = "ising")]
    kind: Kind,
    /// Single-site law for `--kind product`, e.g. {"atoms":[-1,1],"probs":[0.5,0.5]}.
    #[arg(long)]
    p1: Option<String>,
    /// Field-grid nodes for the Ising/product evaluator.
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = SolveOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SolveOptions::default().grid_points)]
    grid_points: usize,
    #[arg(long, default_value_t = SolveOptions::default().random_starts)]
    random_starts: usize,
    #[arg(long, default_value_t = SolveOptions::default().max_evals)]
    max_evals: usize,
    #[arg(long, default_value_t = 1.0)]
    box_scale: f64,
}

#[derive(Args, Debug, Serialize)]
struct XiArgs {
    /// Mixture as JSON (file path or inline), e.g. {"2":1}.
    #[arg(long)]
    mixture: String,
    #[arg(long, allow_negative_numbers = true)]
    s: f64,
}

#[derive(Args, Debug, Serialize)]
struct PsiArgs {
    #[command(flatten)]
    kind: KindArgs,
    /// Measure as JSON {"atoms":[..],"weights":[..]}.
    #[arg(long, required_unless_present = "cdf")]
    measure: Option<String>,
    /// Cumulative distribution {"breakpoints":[..],"values":[..]} (Ising PDE only).
    #[arg(long, conflicts_with = "measure")]
    cdf: Option<String>,
    /// Ising evaluator: cascade recursion or the PDE.
    #[arg(long, value_enum, default_value = "cascade")]
    method: Method,
}

#[derive(Args, Debug, Serialize)]
struct HopfLaxArgs {
    #[arg(long)]
    mixture: String,
    #[arg(long)]
    t: f64,
    /// Base point as a JSON list, e.g. [0.1,0.4].
    #[arg(long)]
    base: String,
    #[command(flatten)]
    kind: KindArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Serialize)]
struct ParisiArgs {
    #[arg(long)]
    mixture: String,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    k: usize,
    /// Also solve k = 1, 2, 4, .. up to k and tabulate the doubling sequence.
    #[arg(long)]
    k_sweep: bool,
    #[command(flatten)]
    kind: KindArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Serialize)]
struct ClassicalArgs {
    #[arg(long)]
    mixture: String,
    #[arg(long)]
    t: f64,
    /// Measure on [0, 1] as JSON.
    #[arg(long)]
    nu: String,
    #[command(flatten)]
    kind: KindArgs,
}

#[derive(Args, Debug, Serialize)]
struct ResidualArgs {
    #[arg(long)]
    mixture: String,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    base: String,
    /// Finite-difference steps.
    #[arg(long, value_delimiter = ',', default_value = "1e-3")]
    h: Vec<f64>,
    #[command(flatten)]
    kind: KindArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Serialize)]
struct FiniteNArgs {
    #[arg(long)]
    mixture: String,
    /// Number of spins; a comma-separated list runs a sweep.
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct CascadeArgs {
    /// Cascade levels zeta_1 < .. < zeta_k in (0, 1), comma separated.
    #[arg(long, value_delimiter = ',')]
    zeta: Vec<f64>,
    #[arg(long = "M", default_value_t = parisi_hj::finite_n::DEFAULT_TRUNCATION)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "expected")]
    tail: Tail,
}

/// Bad input that should exit with the usage code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

// Parsed JSON inputs, recorded in the manifest so a run can be replayed
// without the original files.
static INPUTS: Mutex<Vec<(String, Value)>> = Mutex::new(Vec::new());

/// Parses a JSON argument given inline or as a file path.
fn load<T: DeserializeOwned>(what: &str, src: &str) -> Result<T> {
    let trimmed = src.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        src.to_string()
    } else {
        fs::read_to_string(src).map_err(|e| Usage(format!("cannot read {what} file {src}: {e}")))?
    };
    let raw: Value = serde_json::from_str(&text).map_err(|e| Usage(format!("invalid {what}: {e}")))?;
    let parsed = T::deserialize(&raw).map_err(|e| Usage(format!("invalid {what}: {e}")))?;
    INPUTS.lock().unwrap().push((what.to_string(), raw));
    Ok(parsed)
}

fn recorded_inputs() -> Value {
    let inputs = INPUTS.lock().unwrap();
    Value::Object(inputs.iter().cloned().collect())
}

fn psi_kind(k: &KindArgs) -> Result<PsiKind> {
    Ok(match (k.kind, &k.p1) {
        (Kind::Ising, None) => PsiKind::Ising,
        (Kind::Spherical, None) => PsiKind::Spherical,
        (Kind::Product, Some(p)) => PsiKind::Product(load::<SingleSiteLaw>("single-site law", p)?),
        (Kind::Product, None) => return usage("--kind product needs --p1"),
        (_, Some(_)) => return usage("--p1 only applies to --kind product"),
    })
}

fn evaluator(k: &KindArgs) -> Result<PsiEvaluator> {
    let ev = PsiEvaluator::new(psi_kind(k)?);
    Ok(match k.nodes {
        Some(n) => ev.with_nodes(n),
        None => ev,
    })
}

fn solve_options(s: &SolverArgs) -> SolveOptions {
    SolveOptions {
        seed: s.seed,
        grid_points: s.grid_points,
        random_starts: s.random_starts,
        max_evals: s.max_evals,
        box_scale: s.box_scale,
        ..Default::default()
    }
}

fn problem(mixture: &str, t: f64, base: Vec<f64>, k: &KindArgs) -> Result<HopfLaxProblem> {
    let m: MixtureSpec = load("mixture", mixture)?;
    let mut p = HopfLaxProblem::new(m, t, base, psi_kind(k)?)?;
    if let Some(n) = k.nodes {
        p = p.with_nodes(n);
    }
    Ok(p)
}

const SOLVE_HEADER: [&str; 6] = ["t", "k", "value", "converged", "agreeing_restarts", "maximizer"];

fn solve_row(t: f64, r: &HopfLaxResult) -> Vec<String> {
    vec![
        sig12(t),
        r.maximizer.len().to_string(),
        sig12(r.value),
        r.converged.to_string(),
        r.agreeing_restarts.to_string(),
        join(&r.maximizer, ";"),
    ]
}

/// What a subcommand hands back for the manifest.
struct Report {
    seed: Option<u64>,
    outputs: Value,
}

fn run(cli: &Cli, run: &mut Run) -> Result<Report> {
    match &cli.command {
        Command::Xi(a) => {
            let m: MixtureSpec = load("mixture", &a.mixture)?;
            let vals = [a.s, m.xi(a.s), m.xi_prime(a.s), m.xi_second(a.s), m.dual(a.s)?];
            let mut table = Table::new(&["s", "xi", "xi_prime", "xi_second", "xi_dual"]);
            table.row(vals.iter().map(|&v| sig12(v)).collect());
            println!("{}", table.to_csv().trim_end());
            run.csv(&table);
            Ok(Report {
                seed: None,
                outputs: json!({"xi": vals[1], "xi_prime": vals[2], "xi_second": vals[3], "xi_dual": vals[4]}),
            })
        }
        Command::Psi(a) => {
            let value = match (&a.measure, &a.cdf) {
                (_, Some(c)) => {
                    if !matches!(a.kind.kind, Kind::Ising) {
                        return usage("--cdf is only supported for --kind ising");
                    }
                    let cdf: MeasureCDF = load("cdf", c)?;
                    let q = cdf.support_end();
                    psi_ising_pde(&cdf, q, &grid(q, a.kind.nodes))?
                }
                (Some(m), None) => {
                    let mu: DiscreteMeasure = load("measure", m)?;
                    match (a.method, a.kind.kind) {
                        (Method::Pde, Kind::Ising) => {
                            let q = mu.max_atom();
                            psi_ising_pde(&mu.to_cdf(), q, &grid(q, a.kind.nodes))?
                        }
                        (Method::Pde, _) => return usage("--method pde is only supported for --kind ising"),
                        (Method::Cascade, _) => evaluator(&a.kind)?.eval(&mu)?,
                    }
                }
                (None, None) => return usage("need --measure or --cdf"),
            };
            println!("psi = {}", sig12(value));
            run.json(&json!({ "psi": value }))?;
            Ok(Report { seed: None, outputs: json!({ "psi": value }) })
        }
        Command::Hopflax(a) => {
            let base: Vec<f64> = load("base", &a.base)?;
            let p = problem(&a.mixture, a.t, base, &a.kind)?;
            let r = solve(&p, &solve_options(&a.solver))?;
            println!("value = {}", sig12(r.value));
            println!("maximizer = [{}]", join(&r.maximizer, ", "));
            if !r.converged {
                eprintln!("warning: optimizer hit its evaluation budget before converging");
            }
            let mut table = Table::new(&SOLVE_HEADER);
            table.row(solve_row(a.t, &r));
            run.csv(&table);
            run.json(&r)?;
            Ok(Report { seed: Some(r.seed), outputs: json!({ "value": r.value, "maximizer": r.maximizer }) })
        }
        Command::Parisi(a) => {
            if a.k == 0 {
                return usage("--k must be at least 1");
            }
            let ks: Vec<usize> = if a.k_sweep {
                std::iter::successors(Some(1usize), |k| Some(k * 2)).take_while(|&k| k < a.k).chain([a.k]).collect()
            } else {
                vec![a.k]
            };
            let opts = solve_options(&a.solver);
            let mut table = Table::new(&SOLVE_HEADER);
            let mut results = Vec::new();
            for &k in &ks {
                let p = problem(&a.mixture, a.t, vec![0.0; k], &a.kind)?;
                let r = solve(&p, &opts)?;
                println!("k = {k}: value = {}  maximizer = [{}]", sig12(r.value), join(&r.maximizer, ", "));
                table.row(solve_row(a.t, &r));
                results.push(r);
            }
            run.csv(&table);
            run.json(&results)?;
            let values: Vec<Value> = results.iter().map(|r| json!({ "k": r.maximizer.len(), "value": r.value })).collect();
            Ok(Report { seed: Some(opts.seed), outputs: json!({ "values": values }) })
        }
        Command::Classical(a) => {
            let m: MixtureSpec = load("mixture", &a.mixture)?;
            let nu: DiscreteMeasure = load("nu", &a.nu)?;
            let ev = evaluator(&a.kind)?;
            let value = classical_functional_with(&m, a.t, &nu, &ev)?;
            let mu = pushforward_txiprime(&m, &nu, a.t)?;
            println!("value = {}", sig12(value));
            println!("image atoms = [{}]", join(mu.atoms(), ", "));
            let out = json!({ "value": value, "image": mu });
            run.json(&out)?;
            Ok(Report { seed: None, outputs: out })
        }
        Command::Residual(a) => {
            let base: Vec<f64> = load("base", &a.base)?;
            let p = problem(&a.mixture, a.t, base, &a.kind)?;
            let opts = solve_options(&a.solver);
            let mut table = Table::new(&["h", "residual"]);
            let mut rows = Vec::new();
            for &h in &a.h {
                let r = hj_residual(&p, h, &opts)?;
                println!("h = {}: residual = {}", sig12(h), sig12(r));
                table.row(vec![sig12(h), sig12(r)]);
                rows.push(json!({ "h": h, "residual": r }));
            }
            run.csv(&table);
            Ok(Report { seed: Some(opts.seed), outputs: json!({ "residuals": rows }) })
        }
        Command::FiniteN(a) => {
            let m: MixtureSpec = load("mixture", &a.mixture)?;
            if a.n.is_empty() {
                return usage("--N needs at least one value");
            }
            if let Some(&n) = a.n.iter().find(|&&n| n == 0 || n > MAX_SPINS) {
                return usage(format!("N = {n} outside 1..={MAX_SPINS}"));
            }
            let mut table = Table::new(&["N", "t", "samples", "mean", "std_error"]);
            let mut rows = Vec::new();
            for &n in &a.n {
                let xs = free_energy_samples(&m, n, a.t, a.samples, a.seed)?;
                let e = MeanEstimate::from_samples(&xs);
                println!("N = {n}: {} ± {}", sig12(e.mean), sig12(e.std_error));
                table.row(vec![n.to_string(), sig12(a.t), e.n.to_string(), sig12(e.mean), sig12(e.std_error)]);
                rows.push(json!({ "N": n, "mean": e.mean, "std_error": e.std_error, "samples": xs }));
            }
            run.csv(&table);
            run.json(&rows)?;
            let summary: Vec<Value> = rows.iter().map(|r| json!({ "N": r["N"], "mean": r["mean"], "std_error": r["std_error"] })).collect();
            Ok(Report { seed: Some(a.seed), outputs: json!({ "estimates": summary }) })
        }
        Command::Cascade(a) => {
            let tail = match a.tail {
                Tail::Drop => TailMass::Drop,
                Tail::Expected => TailMass::Expected,
            };
            let est = cascade_overlaps(&a.zeta, a.m, a.replicas, a.seed, tail)?;
            let targets = overlap_targets(&a.zeta);
            let truncation = sample_cascade_with(&a.zeta, a.m, a.seed, 0, tail)?.truncation;
            let mut table = Table::new(&["level", "estimate", "std_error", "target", "z_score"]);
            let mut rows = Vec::new();
            for (l, (e, &target)) in est.iter().zip(&targets).enumerate() {
                let z = if e.std_error > 0.0 { (e.mean - target) / e.std_error } else { 0.0 };
                println!("level {l}: {} ± {} (target {})", sig12(e.mean), sig12(e.std_error), sig12(target));
                table.row(vec![l.to_string(), sig12(e.mean), sig12(e.std_error), sig12(target), sig12(z)]);
                rows.push(json!({ "level": l, "estimate": e.mean, "std_error": e.std_error, "target": target }));
            }
            println!("truncation ratio (first replica) = {}", sig12(truncation));
            run.csv(&table);
            Ok(Report { seed: Some(a.seed), outputs: json!({ "levels": rows, "truncation": truncation }) })
        }
    }
}

fn grid(q: f64, nodes: Option<usize>) -> FieldGrid {
    match nodes {
        Some(n) => FieldGrid::with_nodes(q, n),
        None => FieldGrid::for_support(q),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Xi(_) => "xi",
        Command::Psi(_) => "psi",
        Command::Hopflax(_) => "hopflax",
        Command::Parisi(_) => "parisi",
        Command::Classical(_) => "classical",
        Command::Residual(_) => "residual",
        Command::FiniteN(_) => "finite-n",
        Command::Cascade(_) => "cascade",
    }
}

fn params(c: &Command, inputs: Value) -> Result<Value> {
    let mut v = match c {
        Command::Xi(a) => serde_json::to_value(a)?,
        Command::Psi(a) => serde_json::to_value(a)?,
        Command::Hopflax(a) => serde_json::to_value(a)?,
        Command::Parisi(a) => serde_json::to_value(a)?,
        Command::Classical(a) => serde_json::to_value(a)?,
        Command::Residual(a) => serde_json::to_value(a)?,
        Command::FiniteN(a) => serde_json::to_value(a)?,
        Command::Cascade(a) => serde_json::to_value(a)?,
    };
    v["inputs"] = inputs;
    Ok(v)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let is_usage = e.chain().any(|c| {
        c.downcast_ref::<Usage>().is_some() || matches!(c.downcast_ref::<parisi_hj::Error>(), Some(parisi_hj::Error::Argument(_)))
    });
    if is_usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let name = command_name(&cli.command);
    let mut out = Run::new(&cli.out, name);
    let result = run(&cli, &mut out).and_then(|report| {
        let path = out
            .finish(std::env::args().collect(), params(&cli.command, recorded_inputs())?, report.seed, report.outputs, start.elapsed())
            .context("writing run outputs")?;
        eprintln!("manifest: {}", path.display());
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
