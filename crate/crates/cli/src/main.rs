mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use eigslab::dims::{self, format_table, format_table_csv, TableRow};
use eigslab::level::{build, predict_counts, Graph, DEFAULT_EDGE_CAP};
use eigslab::percolation::{self, trajectory_csv};
use eigslab::psi::{self, psi_eigenpair, trace as psi_trace};
use eigslab::resistance::{effective_resistance_with, Backend};
use eigslab::spectral;
use eigslab::validate::{ensure_analysable, validate_canonical, validate_distance_positive};
use eigslab::walker::{self, Adjacency, ReturnMethod, WalkConfig, DEFAULT_SEED};
use eigslab::{presets, EigSystem};

use manifest::{manifest_path, ManifestBuilder};

#[derive(Parser)]
#[command(
    name = "eigslab",
    version,
    about = "Edge iterated graph systems: build, analyse, simulate"
)]
struct Cli {
    /// Worker threads for parallel sections (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write the primary result here instead of stdout; a run manifest is
    /// written to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Refuse to build levels with more edges than this.
    #[arg(long, global = true, env = "EIGSLAB_EDGE_CAP", default_value_t = DEFAULT_EDGE_CAP)]
    edge_cap: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check canonicality and distance positivity.
    Validate(ConfigArg),
    /// Build level n and export it.
    Build {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
    /// Mass, degree and distance matrices with spectral radii.
    Matrices {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        json: bool,
    },
    /// Iterate the renormalisation map and compute its eigenpair.
    Psi {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of unnormalised iterates to print.
        #[arg(long, default_value_t = 3)]
        iters: usize,
        #[arg(long, default_value_t = psi::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = psi::DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Print the iterates before the eigenpair.
        #[arg(long)]
        trace: bool,
        /// Starting vector for the trace (default all ones).
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
    },
    /// Effective resistance on a built level.
    Resistance {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        level: u32,
        /// Per-colour resistances (default all ones).
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value = "terminal+")]
        from: String,
        #[arg(long, default_value = "terminal-")]
        to: String,
        #[arg(long, value_enum, default_value_t = BackendArg::Laplacian)]
        backend: BackendArg,
    },
    /// Dimension report for one system.
    Dims {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// The dimension table over the bundled presets.
    Table1 {
        #[arg(long)]
        csv: bool,
        /// Quenched exponent used to fill the percolation row.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Random walk experiments on a built level.
    Walk(WalkArgs),
    /// Percolation recursion on the diamond lattice.
    Perc {
        #[command(subcommand)]
        command: PercCommand,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Config file, or a preset name (dhl, fig2, vicsek, laakso, xi,
    /// binary-tree, flower-U-V).
    config: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Laplacian,
    Reduction,
}

#[derive(Clone, Copy, ValueEnum)]
enum WalkMode {
    Exit,
    Commute,
    Return,
    Trace,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReturnMethodArg {
    Auto,
    Exact,
    Mc,
}

#[derive(Args)]
struct WalkArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    level: u32,
    /// `terminal+`, `terminal-` or a vertex id.
    #[arg(long, default_value = "terminal+")]
    start: String,
    #[arg(long, value_enum)]
    mode: WalkMode,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Exit mode: radius exponents m, with r = rho_min^m.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    radii: Vec<u32>,
    /// Commute mode: the other endpoint.
    #[arg(long, default_value = "terminal-")]
    to: String,
    /// Return mode: half-step times t (default 4, 8, ..., 512).
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value_t = ReturnMethodArg::Auto)]
    method: ReturnMethodArg,
    /// Trace mode: number of steps.
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Trace mode: also write a DOT overlay here.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PercCommand {
    /// Population-dynamics estimate of the quenched exponent.
    Alpha {
        /// Occupation probability, or `pc`.
        #[arg(long, default_value = "pc")]
        p: String,
        #[arg(long, default_value_t = percolation::DEFAULT_POPULATION)]
        population: usize,
        #[arg(long, default_value_t = percolation::DEFAULT_LEVELS)]
        levels: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Per-level CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Exact law of R_n for n <= 3.
    Exact {
        #[arg(long)]
        p: String,
        #[arg(long)]
        levels: u32,
    },
    /// Cluster dimensions from the mean matrices.
    Dims {
        #[arg(long, default_value = "pc")]
        p: String,
        /// Exponent estimate, or `auto` to run the default population.
        #[arg(long, default_value = "auto")]
        alpha: String,
        #[arg(long, default_value_t = percolation::DEFAULT_POPULATION)]
        population: usize,
        #[arg(long, default_value_t = percolation::DEFAULT_LEVELS)]
        levels: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// Failures that end the run with exit code 1.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<eigslab::Error> for Failure {
    fn from(e: eigslab::Error) -> Self {
        match e {
            eigslab::Error::Invalid(_) | eigslab::Error::Parse { .. } => {
                Failure::Invalid(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Session {
    out: Option<PathBuf>,
    edge_cap: u64,
    manifest: ManifestBuilder,
    /// Set when the command wants exit code 1 after printing its result.
    failed: bool,
}

impl Session {
    fn emit(&mut self, text: &str) -> Outcome<()> {
        match self.out.clone() {
            Some(path) => self.write_file(&path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn write_file(&mut self, path: &Path, text: &str) -> Outcome<()> {
        std::fs::write(path, text)?;
        self.manifest.output(path);
        Ok(())
    }

    fn load(&mut self, source: &str) -> Outcome<EigSystem> {
        let sys = if Path::new(source).is_file() {
            EigSystem::from_path(source)?
        } else if let Some(sys) = presets::by_name(source) {
            sys
        } else {
            return Err(Failure::Runtime(format!(
                "{source}: no such config file or preset"
            )));
        };
        self.manifest.config(&sys.to_json());
        Ok(sys)
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn parse_p(s: &str) -> Outcome<f64> {
    if s.eq_ignore_ascii_case("pc") {
        Ok(percolation::p_c())
    } else {
        s.parse()
            .map_err(|_| Failure::Runtime(format!("cannot parse p = {s}")))
    }
}

fn parse_vertex(s: &str, n: usize) -> Outcome<usize> {
    let v = match s {
        "terminal+" | "plus" => 0,
        "terminal-" | "minus" => 1,
        _ => s
            .parse()
            .map_err(|_| Failure::Runtime(format!("cannot parse vertex {s}")))?,
    };
    if v >= n {
        return Err(Failure::Runtime(format!("vertex {v} out of range 0..{n}")));
    }
    Ok(v)
}

fn fmt_vec(x: &[f64]) -> String {
    let cells: Vec<String> = x.iter().map(|v| format!("{v:.8}")).collect();
    format!("({})", cells.join(", "))
}

fn run(cli: Cli, session: &mut Session) -> Outcome<()> {
    match cli.command {
        Command::Validate(c) => {
            let sys = session.load(&c.config)?;
            #[derive(Serialize)]
            struct Report {
                canonical: Vec<eigslab::validate::Violation>,
                distance_positive: Vec<eigslab::validate::Violation>,
            }
            let r = Report {
                canonical: validate_canonical(&sys),
                distance_positive: validate_distance_positive(&sys),
            };
            session.failed = !(r.canonical.is_empty() && r.distance_positive.is_empty());
            for v in r.canonical.iter().chain(&r.distance_positive) {
                eprintln!("violation: {v}");
            }
            session.emit(&json(&r))
        }
        Command::Build {
            config,
            level,
            format,
        } => {
            let sys = session.load(&config.config)?;
            ensure_analysable(&sys)?;
            let g = build(&sys, level, session.edge_cap)?;
            let predicted = predict_counts(&sys, level);
            debug_assert_eq!(predicted.edges_u64(), Some(g.edge_count() as u64));
            let text = match format {
                GraphFormat::Json => {
                    let mut s = g.to_json();
                    s.push('\n');
                    s
                }
                GraphFormat::Dot => g.to_dot(),
            };
            eprintln!(
                "level {level}: {} vertices, {} edges",
                g.vertex_count(),
                g.edge_count()
            );
            session.emit(&text)
        }
        Command::Matrices {
            config,
            json: as_json,
        } => {
            let sys = session.load(&config.config)?;
            let s = spectral::summary(&sys)?;
            if as_json {
                return session.emit(&json(&s));
            }
            let mut t = String::new();
            writeln!(t, "M (rho = {:.10}):\n{}", s.rho_mass, s.mass).unwrap();
            writeln!(t, "N (rho = {:.10}):\n{}", s.rho_degree, s.degree).unwrap();
            writeln!(
                t,
                "distance family ({} matrices, rho_min = {:.10}):",
                s.distance.matrices.len(),
                s.rho_min
            )
            .unwrap();
            for m in &s.distance.matrices {
                writeln!(t, "rho = {:.10}\n{}", m.spectral_radius(), m).unwrap();
            }
            session.emit(&t)
        }
        Command::Psi {
            config,
            iters,
            tol,
            max_iter,
            trace,
            x0,
        } => {
            let sys = session.load(&config.config)?;
            ensure_analysable(&sys)?;
            let mut t = String::new();
            if trace {
                let start = x0.unwrap_or_else(|| vec![1.0; sys.colours()]);
                for (k, x) in psi_trace(&sys, &start, iters)?.iter().enumerate() {
                    writeln!(t, "x^({k}) = {}", fmt_vec(x)).unwrap();
                }
            }
            let pair = psi_eigenpair(&sys, tol, max_iter)?;
            t.push_str(&json(&pair));
            session.emit(&t)
        }
        Command::Resistance {
            config,
            level,
            weights,
            from,
            to,
            backend,
        } => {
            let sys = session.load(&config.config)?;
            let x = weights.unwrap_or_else(|| vec![1.0; sys.colours()]);
            if x.len() != sys.colours() {
                return Err(Failure::Runtime(format!(
                    "expected {} weights, got {}",
                    sys.colours(),
                    x.len()
                )));
            }
            let g = build(&sys, level, session.edge_cap)?;
            let a = parse_vertex(&from, g.vertex_count())?;
            let b = parse_vertex(&to, g.vertex_count())?;
            let backend = match backend {
                BackendArg::Laplacian => Backend::Laplacian,
                BackendArg::Reduction => Backend::Reduction,
            };
            let r = effective_resistance_with(&g, &g.edge_weights(&x), a, b, backend)?;
            #[derive(Serialize)]
            struct Report {
                level: u32,
                from: usize,
                to: usize,
                #[serde(serialize_with = "finite_or_string")]
                resistance: f64,
                renormalised: Option<f64>,
            }
            let renormalised = if a == 0 && b == 1 {
                Some(
                    psi_trace(&sys, &x, level as usize)?[level as usize]
                        [sys.initial_colour().slot()],
                )
            } else {
                None
            };
            session.emit(&json(&Report {
                level,
                from: a,
                to: b,
                resistance: r,
                renormalised,
            }))
        }
        Command::Dims {
            config,
            json: as_json,
            csv,
        } => {
            let sys = session.load(&config.config)?;
            let r = dims::dimensions(&sys)?;
            let label = sys.name().unwrap_or(&config.config).to_string();
            let row = TableRow {
                label,
                dim_b: Some(r.dim_b),
                dim_d: Some(r.dim_d),
                dim_r: Some(r.dim_r),
                dim_w: Some(r.dim_w),
                dim_s_finite_born: Some(r.dim_s_finite_born),
                dim_s_generic: Some(r.dim_s_generic),
                recurrent: Some(r.recurrent),
                heuristic: false,
            };
            let text = if as_json {
                json(&r)
            } else if csv {
                format_table_csv(&[row])
            } else {
                format_table(&[row])
            };
            session.emit(&text)
        }
        Command::Table1 { csv, alpha } => {
            let rows = dims::table1(alpha)?;
            let text = if csv {
                format_table_csv(&rows)
            } else {
                format_table(&rows)
            };
            session.emit(&text)
        }
        Command::Walk(args) => walk(args, session),
        Command::Perc { command } => perc(command, session),
    }
}

fn finite_or_string<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str("inf")
    }
}

fn walk(args: WalkArgs, session: &mut Session) -> Outcome<()> {
    let sys = session.load(&args.config.config)?;
    ensure_analysable(&sys)?;
    session.manifest.seed(args.seed);
    let g = build(&sys, args.level, session.edge_cap)?;
    let start = parse_vertex(&args.start, g.vertex_count())?;
    let cfg = WalkConfig::new(args.trials, args.max_steps, args.seed)?;
    match args.mode {
        WalkMode::Exit => {
            let base = spectral::rho_min(&spectral::distance_family(&sys)?);
            let adj = Adjacency::new(&g);
            let samples = walker::exit_times(&adj, start, base, &args.radii, &cfg)?;
            let usable: Vec<_> = samples.iter().filter(|s| s.mean_tau.is_finite()).collect();
            if usable.len() >= 3 {
                let (x, y): (Vec<f64>, Vec<f64>) = usable
                    .iter()
                    .map(|s| (s.radius.ln(), s.mean_tau.ln()))
                    .unzip();
                let fit = eigslab::stats::linear_fit(&x, &y);
                eprintln!(
                    "walk dimension estimate: {:.4} +- {:.4}",
                    fit.slope, fit.slope_stderr
                );
            }
            session.emit(&walker::exit_times_csv(&samples))
        }
        WalkMode::Commute => {
            let b = parse_vertex(&args.to, g.vertex_count())?;
            let c = walker::commute_time(&g, start, b, &cfg)?;
            session.emit(&json(&c))
        }
        WalkMode::Return => {
            let times = args
                .times
                .unwrap_or_else(|| walker::geometric_times(4.0, 8));
            let method = match args.method {
                ReturnMethodArg::Exact => ReturnMethod::Exact,
                ReturnMethodArg::Mc => ReturnMethod::MonteCarlo,
                ReturnMethodArg::Auto if g.vertex_count() <= walker::EXACT_RETURN_LIMIT => {
                    ReturnMethod::Exact
                }
                ReturnMethodArg::Auto => ReturnMethod::MonteCarlo,
            };
            let r = walker::return_probability(&g, start, &times, method, &cfg)?;
            if let Some(d) = r.spectral_dim_estimate {
                eprintln!("return-probability spectral estimate (heuristic): {d:.4}");
            }
            let mut s = String::from("t,probability,stderr,excluded\n");
            for p in &r.points {
                writeln!(s, "{},{},{},{}", p.t, p.probability, p.stderr, p.excluded).unwrap();
            }
            session.emit(&s)
        }
        WalkMode::Trace => {
            let path = walker::trace(&g, start, args.steps, args.seed)?;
            if let Some(dot) = &args.dot {
                session.write_file(dot, &walker::trace_dot(&g, &path))?;
            }
            session.emit(&walker::trace_csv(&path))
        }
    }
}

fn perc(command: PercCommand, session: &mut Session) -> Outcome<()> {
    match command {
        PercCommand::Alpha {
            p,
            population,
            levels,
            seed,
            trajectory,
        } => {
            session.manifest.seed(seed);
            let run = percolation::estimate_alpha(parse_p(&p)?, population, levels, seed)?;
            if let Some(path) = &trajectory {
                session.write_file(path, &trajectory_csv(&run.trajectory))?;
            }
            session.emit(&json(&run.estimate))
        }
        PercCommand::Exact { p, levels } => {
            let p = parse_p(&p)?;
            let d = percolation::exact_distribution(p, levels)?;
            let mut s = String::from("value,numerator,denominator,probability\n");
            for ((v, pr), (value, _)) in d.atoms.iter().zip(d.atoms_f64()) {
                writeln!(s, "{value},{},{},{pr}", v.numer(), v.denom()).unwrap();
            }
            session.emit(&s)
        }
        PercCommand::Dims {
            p,
            alpha,
            population,
            levels,
            seed,
        } => {
            let p = parse_p(&p)?;
            let alpha = if alpha == "auto" {
                session.manifest.seed(seed);
                percolation::estimate_alpha(p, population, levels, seed)?
                    .estimate
                    .quenched
            } else {
                alpha
                    .parse()
                    .map_err(|_| Failure::Runtime(format!("cannot parse alpha = {alpha}")))?
            };
            let report = percolation::cluster_dimension_report(p, alpha)?;
            session.emit(&json(&report))
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let mut session = Session {
        out: cli.out.clone(),
        edge_cap: cli.edge_cap,
        manifest: ManifestBuilder::start(argv),
        failed: false,
    };
    let result = run(cli, &mut session);
    let failed = session.failed;
    let manifest = session.manifest.finish();
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("serialisable");
    if manifest.outputs.is_empty() {
        eprintln!(
            "manifest: {}",
            serde_json::to_string(&manifest).expect("serialisable")
        );
    }
    for path in &manifest.outputs {
        if let Err(e) = std::fs::write(manifest_path(path), &manifest_json) {
            eprintln!("error: cannot write manifest: {e}");
            return ExitCode::from(1);
        }
    }
    match result {
        Ok(()) if !failed => ExitCode::SUCCESS,
        Ok(()) => ExitCode::from(1),
        Err(Failure::Invalid(m)) => {
            eprintln!("invalid: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
