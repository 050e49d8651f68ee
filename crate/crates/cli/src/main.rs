use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netrec_core::config::{ClickSpec, ScenarioConfig};
use netrec_core::data::{self, ComponentOrder, IngestOptions};
use netrec_core::lp_solve::{Backend, ExternalSolver, SolveOptions};
use netrec_core::model::{validate_policy, Scenario};
use netrec_core::policies::{compute, PolicyKind};
use netrec_core::{amc, sim};

use netrec_cli::metrics::{mph, or_na};
use netrec_cli::policy_io::{load_policy, save_policy};
use netrec_cli::sweep::{run_sweep, write_sweep_csv, Axis, SweepSpec};
use netrec_cli::CliError;

#[derive(Parser)]
#[command(name = "netrec", version, about = "Network-friendly recommendation policies: solve, evaluate, simulate, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random (Erdős–Rényi) similarity graph as an edge list.
    Gen(GenArgs),
    /// Read an edge list, clean it and print its statistics.
    Ingest(IngestArgs),
    /// Compute a policy and write it as CSV.
    Solve(SolveArgs),
    /// Evaluate a policy file analytically.
    Eval(EvalArgs),
    /// Simulate a policy and compare with the analytic cost.
    Sim(SimArgs),
    /// Sweep one parameter and write a CSV of hit rates.
    Sweep(SweepArgs),
    /// Best deterministic policy by exhaustive enumeration (small catalogs).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long, default_value_t = 8.0)]
    mean_degree: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// Weights above this become 1, others are dropped; negative keeps raw weights.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    threshold: f64,
    #[arg(long, default_value = "saturate-first")]
    order: ComponentOrder,
    /// Write the cleaned, renumbered edge list here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Scenario source plus flag overrides of config keys.
#[derive(Args, Clone)]
struct ScenarioArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    /// Popularity Zipf exponent.
    #[arg(long)]
    s: Option<f64>,
    /// Cache size.
    #[arg(long = "C")]
    cache: Option<usize>,
    /// Click model: `uniform`, `zipf:<exponent>` or comma-separated probabilities.
    #[arg(long)]
    clicks: Option<String>,
}

impl ScenarioArgs {
    fn config(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.s {
            cfg.s = Some(v);
            cfg.p0 = None;
        }
        if let Some(v) = self.cache {
            cfg.cache = Some(v);
            cfg.c = None;
        }
        if let Some(v) = &self.clicks {
            cfg.v = parse_clicks(v)?;
        }
        Ok(cfg)
    }

    fn scenario(&self) -> Result<Scenario, CliError> {
        Ok(self.config()?.build()?.scenario)
    }
}

fn parse_clicks(text: &str) -> Result<ClickSpec, CliError> {
    if text == "uniform" {
        return Ok(ClickSpec::default());
    }
    if let Some(e) = text.strip_prefix("zipf:") {
        let zipf = e.parse().map_err(|_| CliError::Invalid(format!("bad zipf exponent `{e}`")))?;
        return Ok(ClickSpec::Zipf { zipf });
    }
    Ok(ClickSpec::Explicit(parse_list(text)?))
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Invalid(format!("bad list entry `{x}`"))))
        .collect()
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    /// Built-in simplex for small problems, sparse solver for large ones.
    Auto,
    /// Built-in dense simplex.
    Builtin,
    Sparse,
    /// Run `--external-cmd`.
    External,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "auto")]
    solver: SolverChoice,
    /// Shell command with `{lp}` and `{sol}` placeholders.
    #[arg(long)]
    external_cmd: Option<String>,
}

impl SolverArgs {
    fn options(&self) -> Result<SolveOptions, CliError> {
        let backend = match self.solver {
            SolverChoice::Auto => Backend::Auto,
            SolverChoice::Builtin => Backend::Dense,
            SolverChoice::Sparse => Backend::Sparse,
            SolverChoice::External => {
                let cmd = self
                    .external_cmd
                    .clone()
                    .ok_or_else(|| CliError::Invalid("--solver external needs --external-cmd".into()))?;
                Backend::External(ExternalSolver::new(cmd))
            }
        };
        Ok(SolveOptions::with_backend(backend))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// baseline, P1 (greedy), P2 (uni) or P3 (pref).
    #[arg(long, default_value = "P2")]
    policy: PolicyKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    policy_file: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Policy file to simulate; otherwise `--policy` is computed first.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    #[arg(long, default_value = "P2")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[arg(long, default_value_t = 1)]
    replications: u64,
    /// Simulation seed (the scenario seed is `--seed`).
    #[arg(long, default_value_t = 0)]
    sim_seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    axis: Axis,
    /// Comma-separated axis values.
    #[arg(long)]
    values: String,
    /// Comma-separated policies.
    #[arg(long, default_value = "P1,P2")]
    policies: String,
    /// Policy the gain column is relative to.
    #[arg(long, default_value = "P1")]
    reference: PolicyKind,
    /// Comma-separated scenario seeds; defaults to the config seed.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Add a wall-time column (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Maximum number of policies to enumerate.
    #[arg(long, default_value_t = sim::BRUTE_FORCE_CAP)]
    cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn gen(args: GenArgs) -> Result<(), CliError> {
    let (u, stats) = data::gen_poisson_graph(args.k, args.mean_degree, args.seed)?;
    let mut text = format!("# poisson graph K={} mean_degree={} seed={}\n", args.k, args.mean_degree, args.seed);
    for i in 0..u.nrows() {
        for j in i + 1..u.ncols() {
            if u[(i, j)] != 0.0 {
                text.push_str(&format!("{i} {j}\n"));
            }
        }
    }
    match &args.out {
        Some(path) => create(path)?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    eprintln!("nodes {} arcs {} mean_neighbors {:.4} std_neighbors {:.4}", stats.nodes, stats.arcs, stats.mean_neighbors, stats.std_neighbors);
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let g = data::load_edgelist(&args.input, IngestOptions { threshold: args.threshold, order: args.order })?;
    println!(
        "nodes {} arcs {} mean_neighbors {:.4} std_neighbors {:.4}",
        g.stats.nodes, g.stats.arcs, g.stats.mean_neighbors, g.stats.std_neighbors
    );
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        writeln!(out, "# cleaned from {}; line k of the id map is the original id of item k", args.input.display())?;
        for (k, id) in g.ids.iter().enumerate() {
            writeln!(out, "# id {k} {id}")?;
        }
        for i in 0..g.u.nrows() {
            for j in i + 1..g.u.ncols() {
                if g.u[(i, j)] != 0.0 {
                    writeln!(out, "{i} {j} {}", g.u[(i, j)])?;
                }
            }
        }
        out.flush()?;
    }
    Ok(())
}

fn print_eval(s: &Scenario, report: &amc::EvalReport) {
    println!("ltec {}", report.ltec);
    println!("chr {}", or_na(report.chr));
    println!("mph_pct {}", or_na(mph(s.popularity(), s.costs())));
    println!("cycle_length {}", report.cycle_length);
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let s = args.scenario.scenario()?;
    let opts = args.solver.options()?;
    let start = Instant::now();
    let solved = compute(args.policy, &s, &opts)?;
    let secs = start.elapsed().as_secs_f64();
    println!("policy {}", args.policy);
    print_eval(&s, &solved.report);
    let q = &solved.quality;
    println!("quality_min {}", q.min());
    println!("quality_mean {}", q.mean());
    println!("iterations {}", solved.iterations);
    if let Some(rec) = &solved.recovered {
        println!("lp_objective {}", rec.objective_value);
        println!("lp_residual {:e}", rec.residual);
    }
    println!("solve_seconds {secs:.3}");
    if let Some(path) = &args.out {
        save_policy(path, &solved.policy, args.policy.label())?;
    }
    Ok(())
}

fn load_checked(path: &Path, s: &Scenario) -> Result<netrec_core::model::Policy, CliError> {
    let (p, _) = load_policy(path)?;
    if p.k() != s.k() {
        return Err(CliError::Invalid(format!("policy has K = {}, scenario has K = {}", p.k(), s.k())));
    }
    let violations = validate_policy(&p, s, 1e-6)?;
    if let Some(v) = violations.first() {
        return Err(CliError::Invalid(format!("policy is invalid: {v} ({} violations)", violations.len())));
    }
    Ok(p)
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let s = args.scenario.scenario()?;
    let p = load_checked(&args.policy_file, &s)?;
    print_eval(&s, &amc::ltec(&p, &s)?);
    Ok(())
}

fn simulate(args: SimArgs) -> Result<(), CliError> {
    let s = args.scenario.scenario()?;
    let p = match &args.policy_file {
        Some(path) => load_checked(path, &s)?,
        None => compute(args.policy, &s, &args.solver.options()?)?.policy,
    };
    let exact = amc::ltec(&p, &s)?;
    let rep = sim::simulate_replicated(&p, &s, args.steps, args.replications, args.sim_seed)?;
    println!("steps {}", rep.steps);
    println!("empirical_cost_rate {}", rep.empirical_cost_rate);
    println!("stderr {}", rep.stderr);
    println!("analytic_ltec {}", exact.ltec);
    println!("z_score {}", (rep.empirical_cost_rate - exact.ltec) / rep.stderr);
    println!("empirical_chr {}", or_na(rep.empirical_chr));
    println!("mean_cycle_length {}", rep.mean_cycle_length);
    println!("expected_cycle_length {}", exact.cycle_length);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let template = args.scenario.config()?;
    let seeds = match &args.seeds {
        Some(list) => parse_list(list)?,
        None => vec![template.seed],
    };
    let policies = args
        .policies
        .split(',')
        .map(|p| p.trim().parse::<PolicyKind>().map_err(CliError::Invalid))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        template,
        axis: args.axis,
        values: parse_list(&args.values)?,
        policies,
        reference: args.reference,
        seeds,
    };
    let rows = run_sweep(&spec, &args.solver.options()?, args.workers.max(1))?;
    match &args.out {
        Some(path) => write_sweep_csv(create(path)?, &spec, &rows, args.timing)?,
        None => write_sweep_csv(std::io::stdout().lock(), &spec, &rows, args.timing)?,
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed; see the status and note columns", rows.len());
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let s = args.scenario.scenario()?;
    let bf = sim::brute_force_optimum_capped(&s, args.cap)?;
    let report = amc::ltec(&bf.policy, &s)?;
    println!("evaluated {}", bf.evaluated);
    print_eval(&s, &report);
    if let Some(path) = &args.out {
        save_policy(path, &bf.policy, "oracle")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Ingest(a) => ingest(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Sim(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netrec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
