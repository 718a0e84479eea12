use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use covinstr_core::document::{format_profile, parse_profile, SchemeDocument};
use covinstr_core::generators::{gen_diamond_chain, gen_layered, gen_random, gen_selfloop_path, random_corpus};
use covinstr_core::oracle::{impossibility_witness, is_valid_scheme, min_size, round_trip_exact, Trace};
use covinstr_core::ve::approx_ve_detailed;
use covinstr_core::{analyze, parse_cfg, to_dot, Cfg, DotAnnotations, Element, Error, Mode, ReachabilityOracle};

/// Writes to stdout, exiting quietly once the reader has gone away (as with
/// `covinstr ... | head`).
fn out(args: std::fmt::Arguments<'_>) {
    let mut stdout = io::stdout().lock();
    if let Err(e) = stdout.write_fmt(args) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(2);
    }
}

macro_rules! outln {
    ($($arg:tt)*) => {
        out(format_args!("{}\n", format_args!($($arg)*)))
    };
}

#[derive(Parser)]
#[command(name = "covinstr", version, about = "Minimal coverage probes for control-flow graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a probe set and inference plan.
    Analyze {
        input: PathBuf,
        #[arg(long, short, default_value = "vv")]
        mode: Mode,
        /// Scheme output path (stdout if omitted).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Recover full coverage from probe readings.
    Infer {
        scheme: PathBuf,
        profile: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a computed scheme against brute force.
    Verify {
        /// Graph to check; omit with --corpus.
        input: Option<PathBuf>,
        #[arg(long, short, default_value = "vv")]
        mode: Mode,
        /// Report instrumented fractions over a generated corpus instead.
        #[arg(long)]
        corpus: bool,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        max_nodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a generated graph.
    Gen {
        family: Family,
        /// Size parameter for diamond-chain and selfloop-path.
        #[arg(long, short, default_value_t = 3)]
        k: usize,
        /// Layer widths for layered, e.g. 1,2,2,1.
        #[arg(long, value_delimiter = ',', default_value = "1,2,2,1")]
        widths: Vec<usize>,
        /// Node count for random.
        #[arg(long, short, default_value_t = 8)]
        n: usize,
        /// Edge probability for random.
        #[arg(long, short, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Show two traces that block coverage cannot tell apart but jump coverage can.
    DemoImpossibility {
        /// Graph to search (defaults to the 1-2-2-1 layered graph).
        input: Option<PathBuf>,
    },
    /// Time the solver on growing members of a family.
    Bench {
        family: Family,
        #[arg(long, value_delimiter = ',', default_value = "10000,20000,40000,80000")]
        sizes: Vec<usize>,
        #[arg(long, short, default_value = "vv")]
        mode: Mode,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
    },
    /// Dominator and post-dominator depth histograms.
    Stats { input: PathBuf },
    /// Graphviz rendering, with probes highlighted when a mode is given.
    Dot {
        input: PathBuf,
        #[arg(long, short)]
        mode: Option<Mode>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    DiamondChain,
    SelfloopPath,
    Layered,
    Random,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidCfg(_) | Error::SizeGuard { .. } => 1,
            Error::Parse(_) | Error::Document(_) => 2,
            Error::DomainMismatch { .. } | Error::CyclicInference(_) | Error::Internal(_) => 3,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Analyze { input, mode, output } => cmd_analyze(&input, mode, output.as_deref()),
        Command::Infer { scheme, profile, output } => cmd_infer(&scheme, &profile, output.as_deref()),
        Command::Verify { corpus: true, mode: _, count, max_nodes, seed, .. } => cmd_verify_corpus(count, max_nodes, seed),
        Command::Verify { input: Some(input), mode, .. } => cmd_verify(&input, mode),
        Command::Verify { input: None, .. } => Err(Failure::new(2, "verify needs an input graph or --corpus")),
        Command::Gen { family, k, widths, n, p, seed, output } => {
            let cfg = generate(family, k, &widths, n, p, seed)?;
            emit(output.as_deref(), &cfg.to_text())
        }
        Command::DemoImpossibility { input } => cmd_demo(input.as_deref()),
        Command::Bench { family, sizes, mode, repeat } => cmd_bench(family, &sizes, mode, repeat.max(1)),
        Command::Stats { input } => cmd_stats(&input),
        Command::Dot { input, mode, output } => cmd_dot(&input, mode, output.as_deref()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Cfg, Failure> {
    let text = read(path)?;
    parse_cfg(&text).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> CmdResult {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(2, format!("{}: {e}", p.display()))),
        None => {
            out(format_args!("{text}"));
            Ok(())
        }
    }
}

fn cmd_analyze(input: &Path, mode: Mode, output: Option<&Path>) -> CmdResult {
    let cfg = load(input)?;
    let scheme = analyze(&cfg, mode)?;
    let doc = SchemeDocument::new(&cfg, &scheme);
    emit(output, &doc.to_json())?;
    eprintln!(
        "{}: {} probes, {:.1}% instrumented, {} components, {} fallbacks",
        mode.describe(),
        scheme.stats.probes,
        100.0 * doc.stats.instrumented_fraction,
        scheme.stats.components,
        scheme.stats.fallbacks
    );
    Ok(())
}

fn cmd_infer(scheme: &Path, profile: &Path, output: Option<&Path>) -> CmdResult {
    let doc = SchemeDocument::from_json(&read(scheme)?)?;
    let readings = parse_profile(&read(profile)?).map_err(|e| Failure::new(2, format!("{}: {e}", profile.display())))?;
    let full = doc.infer(&readings)?;
    emit(output, &format_profile(&full))
}

fn cmd_verify(input: &Path, mode: Mode) -> CmdResult {
    let cfg = load(input)?;
    let scheme = analyze(&cfg, mode)?;
    let valid = is_valid_scheme(&cfg, &scheme.probes, mode)?;
    let exact = round_trip_exact(&cfg, &scheme)?;
    let optimum = min_size(&cfg, mode)?;
    let size = scheme.size();
    let (bound_ok, relation) = match mode {
        Mode::Ve => (size <= 2 * optimum, format!("size {size} <= 2 x optimal {optimum}")),
        _ => (size == optimum, format!("size {size} = optimal {optimum}")),
    };
    let verdict = if valid && exact { "valid" } else { "INVALID" };
    let relation = if bound_ok { relation } else { format!("size {size} vs optimal {optimum}: bound violated") };
    outln!("{verdict}, {relation}");
    if mode == Mode::Ve {
        outln!("fallbacks: {}", scheme.stats.fallbacks);
    }
    if valid && exact && bound_ok {
        Ok(())
    } else {
        Err(Failure::new(3, "verification failed"))
    }
}

fn cmd_verify_corpus(count: usize, max_nodes: usize, seed: u64) -> CmdResult {
    let corpus = random_corpus(count, max_nodes, seed);
    outln!("corpus: {} graphs, 2..={} nodes, seed {}", corpus.len(), max_nodes, seed);
    outln!("mode  graphs     min     p25  median     p75     max    mean  fallbacks");
    for mode in Mode::ALL {
        let mut fractions = Vec::with_capacity(corpus.len());
        let mut fallbacks = 0;
        for cfg in &corpus {
            let scheme = analyze(cfg, mode)?;
            fallbacks += scheme.stats.fallbacks;
            fractions.push(scheme.stats.instrumented_fraction(mode));
        }
        fractions.sort_by(f64::total_cmp);
        let q = |p: f64| fractions[((fractions.len() - 1) as f64 * p).round() as usize];
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        outln!(
            "{:<4}  {:>6}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>9}",
            mode.as_str(),
            fractions.len(),
            q(0.0),
            q(0.25),
            q(0.5),
            q(0.75),
            q(1.0),
            mean,
            fallbacks
        );
    }
    Ok(())
}

fn generate(family: Family, k: usize, widths: &[usize], n: usize, p: f64, seed: u64) -> Result<Cfg, Failure> {
    let bad = |m: &str| Err(Failure::new(2, m));
    match family {
        Family::DiamondChain if k == 0 => bad("diamond-chain needs k >= 1"),
        Family::DiamondChain => Ok(gen_diamond_chain(k)),
        Family::SelfloopPath if k < 2 => bad("selfloop-path needs k >= 2"),
        Family::SelfloopPath => Ok(gen_selfloop_path(k)),
        Family::Layered if widths.len() < 2 || widths[0] != 1 || widths[widths.len() - 1] != 1 || widths.contains(&0) => {
            bad("layered needs at least two nonempty layers, the first and last of width 1")
        }
        Family::Layered => Ok(gen_layered(widths)),
        Family::Random if n < 2 => bad("random needs n >= 2"),
        Family::Random => Ok(gen_random(n, p, seed)),
    }
}

fn trace_rows(cfg: &Cfg, trace: &Trace) -> (String, String) {
    let mut vertices = String::new();
    let nodes = trace.vertex_profile();
    for u in cfg.nodes() {
        let _ = write!(vertices, " {}={}", cfg.label(u), u8::from(nodes.contains(&u)));
    }
    let mut edges = String::new();
    let covered = trace.edge_profile();
    for e in cfg.edge_ids() {
        let _ = write!(edges, " {}={}", cfg.edge_label(e), u8::from(covered.contains(&e)));
    }
    (vertices, edges)
}

fn cmd_demo(input: Option<&Path>) -> CmdResult {
    let cfg = match input {
        Some(p) => load(p)?,
        None => gen_layered(&[1, 2, 2, 1]),
    };
    cfg.ensure_valid()?;
    let Some((a, b)) = impossibility_witness(&cfg)? else {
        outln!("no witness: block coverage determines jump coverage on this graph");
        return Ok(());
    };
    for (name, trace) in [("A", &a), ("B", &b)] {
        outln!("trace {name}:");
        for w in &trace.walks {
            let path: Vec<&str> = w.nodes.iter().map(|&u| cfg.label(u)).collect();
            outln!("  walk {}", path.join(" "));
        }
    }
    let (va, ea) = trace_rows(&cfg, &a);
    let (vb, eb) = trace_rows(&cfg, &b);
    outln!("vertices A:{va}");
    outln!("vertices B:{vb}");
    outln!("edges A:{ea}");
    outln!("edges B:{eb}");
    outln!("vertex profiles equal: {}", va == vb);
    outln!("edge profiles equal: {}", ea == eb);
    Ok(())
}

fn cmd_bench(family: Family, sizes: &[usize], mode: Mode, repeat: usize) -> CmdResult {
    outln!("{:>10} {:>10} {:>10} {:>10} {:>12} {:>7}", "size", "nodes", "edges", "probes", "best ms", "ratio");
    let mut prev: Option<f64> = None;
    for &size in sizes {
        let cfg = generate(family, size, &[1, size, size, 1], size, 2.0 / size.max(2) as f64, 1)?;
        let mut best = f64::INFINITY;
        let mut probes = 0;
        for _ in 0..repeat {
            let start = Instant::now();
            let scheme = analyze(&cfg, mode)?;
            best = best.min(start.elapsed().as_secs_f64() * 1e3);
            probes = scheme.size();
        }
        let ratio = prev.map_or("-".to_owned(), |p| format!("{:.2}", best / p));
        outln!(
            "{:>10} {:>10} {:>10} {:>10} {:>12.2} {:>7}",
            size,
            cfg.node_count(),
            cfg.edge_count(),
            probes,
            best,
            ratio
        );
        prev = Some(best);
    }
    Ok(())
}

fn cmd_stats(input: &Path) -> CmdResult {
    let cfg = load(input)?;
    cfg.ensure_valid()?;
    let oracle = ReachabilityOracle::build(&cfg);
    outln!("nodes {} edges {}", cfg.node_count(), cfg.edge_count());
    for (name, tree) in [("dominator", oracle.dominators()), ("post-dominator", oracle.post_dominators())] {
        outln!("{name} depth histogram:");
        for (depth, count) in tree.depth_histogram().iter().enumerate() {
            outln!("  {depth:>4} {count}");
        }
    }
    Ok(())
}

fn cmd_dot(input: &Path, mode: Option<Mode>, output: Option<&Path>) -> CmdResult {
    let cfg = load(input)?;
    let mut notes = DotAnnotations::default();
    if let Some(mode) = mode {
        let scheme = if mode == Mode::Ve { approx_ve_detailed(&cfg)?.scheme } else { analyze(&cfg, mode)? };
        for p in &scheme.probes {
            match *p {
                Element::Node(u) => {
                    notes.highlight_nodes.insert(u);
                }
                Element::Edge(e) => {
                    notes.highlight_edges.insert(e);
                }
            }
        }
    }
    emit(output, &to_dot(&cfg, &notes))
}
