//! The `dayplan` command line: plan, validate, reflect, gen, bench, serve.
//!
//! Exit codes are 0 on success, 1 on domain errors (unreadable or invalid
//! input, remote failures) and 2 on usage errors. A request that needed
//! relaxation still plans and exits 0.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dayplan::bench::{run_benchmark, Planner};
use dayplan::datagen::{generate_personas, read_personas, write_personas, Persona};
use dayplan::model::{Plan, PlanRequest};
use dayplan::reflect::{parse_plan_text, reflect_loop, CommonsenseOracle, LookupOracle, PlanGenerator, SymbolicGenerator};
use dayplan::scheduler::ScheduleResult;
use dayplan::stn::SolverConfig;
use dayplan::validator::{
    check_commonsense, check_plan, compute_metrics, verbalize_violations, CommonsenseDb, MetricsReport,
};

use crate::{run_planner, PlannerKind, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "dayplan", version, about = "Constraint-based day planner")]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct SharedOpts {
    /// Relaxation attempts per conflicting constraint before it is dropped.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Minutes added to a conflicting constraint per attempt.
    #[arg(long, global = true)]
    pub delta_t: Option<i64>,
    /// Search cutoff per plan in milliseconds.
    #[arg(long, global = true)]
    pub max_search_ms: Option<u64>,
    /// Feedback rounds in the reflection loop.
    #[arg(long, global = true)]
    pub max_reflect_iters: Option<u32>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// JSON file of commonsense rules, replacing the bundled set.
    #[arg(long, global = true)]
    pub commonsense_db: Option<PathBuf>,
}

impl SharedOpts {
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(d) = self.delta_t {
            cfg.delta_t = d;
        }
        if let Some(ms) = self.max_search_ms {
            cfg.max_search_time = Duration::from_millis(ms);
        }
        if let Some(n) = self.max_reflect_iters {
            cfg.max_reflect_iters = n;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerArg {
    Symplan,
    SymplanPlus,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Symplan => PlannerKind::Symplan,
            PlannerArg::SymplanPlus => PlannerKind::SymplanPlus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchPlanner {
    Symplan,
    SymplanPlus,
    /// The reflection loop with the symbolic planner as generator.
    Reflect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    Symbolic,
    /// A chat-completion endpoint named by DAYPLAN_LLM_ENDPOINT.
    Remote,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a request (JSON, or one event line per line) and print the schedule.
    Plan {
        #[arg(long)]
        input: PathBuf,
        /// Write the plan as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "symplan")]
        planner: PlannerArg,
    },
    /// Score a plan against its request.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// Plan as JSON or as "HH:MM - HH:MM  event" lines.
        #[arg(long)]
        plan: PathBuf,
    },
    /// Run the generate, check, feedback loop.
    Reflect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "symbolic")]
        generator: GeneratorArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic personas into a directory.
    Gen {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a planner over a persona set.
    Bench {
        /// Directory of persona JSON files. Generated from --seed when absent.
        #[arg(long)]
        personas: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_enum, default_value = "symplan")]
        planner: BenchPlanner,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory served for paths outside the API.
        #[arg(long, default_value = "webui/dist")]
        static_dir: PathBuf,
        /// Seconds before an unused session is discarded.
        #[arg(long, default_value_t = 3600)]
        idle_secs: u64,
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

fn domain(e: impl fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

/// Reads a request from JSON (a persona file works too) or from event lines.
pub fn load_request(path: &Path) -> Result<PlanRequest, CliError> {
    let text = read(path)?;
    let req = if text.trim_start().starts_with('{') {
        serde_json::from_str::<PlanRequest>(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?
    } else {
        PlanRequest::from_lines(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?
    };
    req.validate().map_err(domain)?;
    Ok(req)
}

/// Reads a plan from JSON (a bare plan or a schedule result) or from
/// "HH:MM - HH:MM  event" lines.
pub fn load_plan(path: &Path) -> Result<Plan, CliError> {
    let text = read(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        serde_json::from_str(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
    } else if trimmed.starts_with('{') {
        serde_json::from_str::<ScheduleResult>(&text)
            .map(|r| r.plan)
            .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
    } else {
        Ok(parse_plan_text(&text))
    }
}

fn commonsense_db(opts: &SharedOpts) -> Result<CommonsenseDb, CliError> {
    match &opts.commonsense_db {
        Some(path) => CommonsenseDb::load(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display()))),
        None => Ok(CommonsenseDb::bundled().clone()),
    }
}

fn oracle() -> Result<(Arc<dyn CommonsenseOracle>, bool), CliError> {
    #[cfg(feature = "remote")]
    if dayplan::reflect::remote::RemoteConfig::from_env().is_some() {
        let o = dayplan::reflect::remote::RemoteOracle::from_env().map_err(domain)?;
        return Ok((Arc::new(o), true));
    }
    Ok((Arc::new(LookupOracle::bundled().clone()), false))
}

fn generator(arg: GeneratorArg, cfg: &SolverConfig) -> Result<Box<dyn PlanGenerator>, CliError> {
    match arg {
        GeneratorArg::Symbolic => Ok(Box::new(SymbolicGenerator { cfg: cfg.clone() })),
        #[cfg(feature = "remote")]
        GeneratorArg::Remote => Ok(Box::new(dayplan::reflect::remote::RemoteGenerator::from_env().map_err(domain)?)),
        #[cfg(not(feature = "remote"))]
        GeneratorArg::Remote => Err(CliError::Usage("this build has no remote generator; rebuild with --features remote".into())),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn print_result(out: &mut dyn Write, req: &PlanRequest, r: &ScheduleResult) -> std::io::Result<()> {
    write!(out, "{}", r.plan.to_table())?;
    writeln!(out, "makespan {}", r.makespan)?;
    if !r.complete {
        writeln!(out, "incomplete: {} of {} events placed", r.plan.len(), req.events.len())?;
    }
    if !r.search_exhausted {
        writeln!(out, "search cut off; best plan found so far")?;
    }
    for line in r.relaxation.summary(req) {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.shared.solver_config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let io = |e: std::io::Error| CliError::Domain(e.to_string());

    match cli.command {
        Command::Plan { input, out: dest, planner } => {
            let req = load_request(&input)?;
            let (oracle, _) = oracle()?;
            let r = run_planner(planner.into(), &req, &cfg, oracle.as_ref()).map_err(domain)?;
            print_result(out, &req, &r).map_err(io)?;
            if let Some(dest) = dest {
                write(&dest, &to_json(&r.plan))?;
            }
        }
        Command::Validate { input, plan } => {
            let db = commonsense_db(&cli.shared)?;
            let req = load_request(&input)?;
            let plan = load_plan(&plan)?;
            let cs = check_commonsense(&plan, &db);
            let metrics = compute_metrics(&req, &plan).with_commonsense(&cs);
            writeln!(out, "{}\n{}", MetricsReport::header(), metrics.row()).map_err(io)?;
            for line in verbalize_violations(&check_plan(&req, &plan)) {
                writeln!(out, "- {line}").map_err(io)?;
            }
        }
        Command::Reflect { input, generator: g, out: dest } => {
            let req = load_request(&input)?;
            let generator = generator(g, &cfg)?;
            let (best, trace) = reflect_loop(&req, generator.as_ref(), &cfg).map_err(domain)?;
            for (i, it) in trace.iterations.iter().enumerate() {
                writeln!(out, "iteration {i}: {} violation(s)", it.violations.count()).map_err(io)?;
                for f in &it.feedback {
                    writeln!(out, "  {f}").map_err(io)?;
                }
            }
            writeln!(out, "selected iteration {}", trace.selected_index).map_err(io)?;
            write!(out, "{}", best.to_table()).map_err(io)?;
            if let Some(dest) = dest {
                write(&dest, &to_json(&trace))?;
            }
        }
        Command::Gen { n, out: dir } => {
            let personas = generate_personas(cli.shared.seed, n).map_err(domain)?;
            write_personas(&dir, &personas).map_err(io)?;
            writeln!(out, "wrote {} personas to {}", personas.len(), dir.display()).map_err(io)?;
        }
        Command::Bench { personas, n, planner, out: dest } => {
            let db = commonsense_db(&cli.shared)?;
            let personas: Vec<Persona> = match personas {
                Some(dir) => read_personas(&dir).map_err(|e| CliError::Domain(format!("{}: {e}", dir.display())))?,
                None => generate_personas(cli.shared.seed, n).map_err(domain)?,
            };
            let planner = match planner {
                BenchPlanner::Symplan => Planner::SymPlan,
                BenchPlanner::SymplanPlus => Planner::SymPlanPlus(oracle()?.0),
                BenchPlanner::Reflect => Planner::Reflect {
                    name: "reflect".into(),
                    generator: Arc::new(SymbolicGenerator { cfg: cfg.clone() }),
                },
            };
            let report = run_benchmark(&personas, &planner, &db, &cfg);
            write!(out, "{}", report.to_table()).map_err(io)?;
            if let Some(dest) = dest {
                write(&dest, &to_json(&report))?;
            }
        }
        Command::Serve {
            addr,
            static_dir,
            idle_secs,
            cors_origin,
        } => {
            let (oracle, remote_oracle) = oracle()?;
            let service = ServiceConfig {
                solver: cfg,
                db: commonsense_db(&cli.shared)?,
                oracle,
                remote_oracle,
                idle_timeout: Duration::from_secs(idle_secs),
                static_dir: Some(static_dir),
                cors_origin,
            };
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(io)?;
            rt.block_on(crate::serve(addr, service)).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e @ CliError::Usage(_)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
