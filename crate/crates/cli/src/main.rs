//! `sftlab` command-line front end.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sftlab::chaos::{classify_pair, distributional_profile, ChaosConfig, Evidence};
use sftlab::checks::{run_all, run_suite};
use sftlab::entropy::{g_omega_counts, Target};
use sftlab::error::{Error, Result};
use sftlab::interval::Interval;
use sftlab::markov::MarkovMeasure;
use sftlab::moran::{
    assemble_moran, band_design_full_shift, build_alpha_chain, build_schedule, ml_witness, moran_entropy_report,
    BlockLibrary, GapMode, GrowthPolicy, TargetSet,
};
use sftlab::point::Point;
use sftlab::potential::Potential;
use sftlab::pressure::{legendre_spectrum, Enumeration, SearchControl};
use sftlab::sft::Sft;
use sftlab::sums::{check_budget, DEFAULT_BUDGET};
use sftlab::transfer::{
    check_admissibility, check_bilipschitz, check_equivariance, check_involution, phi_encode, phi_full, phi_sft,
    sample_triples, BlockCodebook, BlockLayout, MapKind,
};

use output::{g9, manifest_path, Csv, Manifest};

/// Exit code for an unknown flag.
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Serialize)]
#[command(name = "sftlab", version, about = "Shifts of finite type: entropy, pressure, spectra, chaos and Moran sets")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Serialize, Clone)]
struct Common {
    /// Transition matrix file (`K`, then `K` rows of 0/1), or `golden`, or `full:K`
    #[arg(long, global = true)]
    matrix: Option<String>,
    /// Markov measure file (`K`, then `K` rows of P, optional π row); default: Parry measure
    #[arg(long, global = true)]
    measure: Option<PathBuf>,
    /// Potential file, or `frequency:<symbol>`, or `metric`
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Maximum number of words any enumeration may visit
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Worker threads (default: all cores); never changes output bytes
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; a `<out>.manifest.json` is written next to it
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Cmd {
    /// Irreducibility, period, primitivity exponent and connecting words
    Classify,
    /// Topological entropy (nats) and dimension h / log K
    Entropy,
    /// Exact word counts per depth, or the word list at one depth
    Words {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        depths: Vec<usize>,
        /// List the words of the (single) depth instead of counting
        #[arg(long)]
        list: bool,
    },
    /// Legendre spectrum α ↦ inf_p P_ν(⟨p, f − α⟩)
    Spectrum {
        /// `lo:hi:step`, or `a,b,…`; for d > 1 separate points by `;` and coordinates by `,`
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long)]
        hull_period: Option<usize>,
    },
    /// Counts of words whose Birkhoff averages come within δ of a target set
    Gcount {
        #[arg(long)]
        omega: String,
        /// Point `a,b,…` (points separated by `;`), or a box with `lo:hi` coordinates
        #[arg(long)]
        target: String,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_delimiter = ',')]
        depths: Vec<usize>,
    },
    /// Li–Yorke / mean Li–Yorke / DC evidence for a pair, with the distributional profile
    ChaosPair {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 100_000)]
        horizon: usize,
        #[arg(long, default_value = "0.01:1:0.01")]
        eps: String,
        #[arg(long, default_value_t = 0.05)]
        close: f64,
        #[arg(long, default_value_t = 0.3)]
        apart: f64,
    },
    /// Explicit block maps and their law checks
    Transfer {
        #[command(subcommand)]
        map: TransferMap,
    },
    /// Moran-set builds and mean Li–Yorke witnesses
    Moran {
        #[command(subcommand)]
        action: MoranCmd,
    },
    /// Invariant suites (`all` or one suite name)
    Check {
        #[arg(default_value = "all")]
        suite: String,
        /// Reduced sizes
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TransferMap {
    /// φ_{ω,ω′} on a full shift
    Full(TransferArgs),
    /// Block map φ^M_{ω,ω′} on an aperiodic shift
    Sft(TransferArgs),
    /// Encoding φ^M_ω of a point over the codebook alphabet (`--x` is the code z)
    Encode(TransferArgs),
}

#[derive(Args, Serialize)]
struct TransferArgs {
    #[arg(long)]
    omega: String,
    #[arg(long)]
    omega2: Option<String>,
    #[arg(long)]
    x: String,
    #[arg(short = 'M', default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 200)]
    depth: usize,
    /// `all` runs the law checks on the given inputs and on seeded samples
    #[arg(long)]
    check: Option<String>,
    /// Seeded samples used by `--check all`
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MoranCmd {
    Build(BuildArgs),
    Witness(WitnessArgs),
}

#[derive(Args, Serialize)]
struct BuildArgs {
    /// Per-stage frequency targets `a,b,…` (the last repeats)
    #[arg(long, default_value = "0.5")]
    target: String,
    /// Per-stage tolerances (the last repeats); also the ε′_j of the default growth
    #[arg(long, default_value = "0.1")]
    tol: String,
    /// Symbol whose frequency is constrained
    #[arg(long, default_value_t = 1)]
    symbol: u8,
    /// Take targets from an α-chain over `lo:hi` (ε halves per level, starting at `--tol`)
    #[arg(long)]
    chain: Option<String>,
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Use every admissible word instead of a frequency library
    #[arg(long)]
    all_words: bool,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long, default_value_t = 64)]
    t1: usize,
    /// `default`, `capped:<max factor>` or `ratio:<q>`
    #[arg(long, default_value = "default")]
    growth: String,
    /// `auto`, `none` or `connect`
    #[arg(long, default_value = "auto")]
    gaps: String,
    /// Design entropy for the μ̂ checks (default: the band value on full shifts)
    #[arg(long)]
    design: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Sample points for the μ̂ checks
    #[arg(long, default_value_t = 8)]
    samples: usize,
}

#[derive(Args, Serialize)]
struct WitnessArgs {
    #[arg(long)]
    omega: String,
    #[arg(long, default_value_t = 64)]
    t1: usize,
    #[arg(long, default_value_t = 16.0)]
    ratio: f64,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    #[arg(long, default_value_t = 100_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    close: f64,
    #[arg(long, default_value_t = 0.3)]
    apart: f64,
}

/// Console text plus an optional artifact for `--out` (the text itself otherwise).
struct Output {
    text: String,
    file: Option<String>,
    /// A law check failed: exit 1 after writing everything.
    failed: bool,
}

impl Output {
    fn text(text: String) -> Self {
        Output { text, file: None, failed: false }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Resource(_) => 3,
        Error::Internal(_) => 70,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::UnknownArgument => EXIT_USAGE,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(3);
        }
    }
    let started = Instant::now();
    match run(&cli) {
        Ok(out) => {
            if let Some(path) = &cli.common.out {
                if let Err(e) = write_outputs(&cli, path, &out, started) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
                print!("{}", out.text);
            } else {
                print!("{}", if out.text.is_empty() { out.file.as_deref().unwrap_or("") } else { &out.text });
            }
            if out.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Classify => "classify",
        Cmd::Entropy => "entropy",
        Cmd::Words { .. } => "words",
        Cmd::Spectrum { .. } => "spectrum",
        Cmd::Gcount { .. } => "gcount",
        Cmd::ChaosPair { .. } => "chaos-pair",
        Cmd::Transfer { map: TransferMap::Full(_) } => "transfer full",
        Cmd::Transfer { map: TransferMap::Sft(_) } => "transfer sft",
        Cmd::Transfer { map: TransferMap::Encode(_) } => "transfer encode",
        Cmd::Moran { action: MoranCmd::Build(_) } => "moran build",
        Cmd::Moran { action: MoranCmd::Witness(_) } => "moran witness",
        Cmd::Check { .. } => "check",
    }
}

fn write_outputs(cli: &Cli, path: &Path, out: &Output, started: Instant) -> std::io::Result<()> {
    let body = out.file.as_deref().unwrap_or(&out.text);
    std::fs::write(path, body)?;
    let manifest = Manifest {
        command: command_name(&cli.cmd),
        parameters: cli,
        seed: cli.common.seed,
        budget: cli.common.budget,
        threads: cli.common.threads,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
        output: path.display().to_string(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(manifest_path(path), json + "\n")
}

fn run(cli: &Cli) -> Result<Output> {
    let c = &cli.common;
    match &cli.cmd {
        Cmd::Classify => classify(&load_sft(c)?),
        Cmd::Entropy => entropy(c),
        Cmd::Words { depths, list } => words(c, depths, *list),
        Cmd::Spectrum { alpha, n, samples, eta, tolerance, hull_period } => {
            let control = SearchControl {
                n: *n,
                samples: *samples,
                seed: c.seed,
                eta: *eta,
                tolerance: *tolerance,
                hull_period: *hull_period,
                enumeration: Enumeration { budget: c.budget },
            };
            spectrum(c, alpha, &control)
        }
        Cmd::Gcount { omega, target, delta, depths } => gcount(c, omega, target, *delta, depths),
        Cmd::ChaosPair { x, y, horizon, eps, close, apart } => chaos_pair(c, x, y, *horizon, eps, *close, *apart),
        Cmd::Transfer { map } => transfer(c, map),
        Cmd::Moran { action: MoranCmd::Build(a) } => moran_build(c, a),
        Cmd::Moran { action: MoranCmd::Witness(a) } => moran_witness(c, a),
        Cmd::Check { suite, quick } => check(suite, *quick, c.seed),
    }
}

fn load_sft(c: &Common) -> Result<Sft> {
    let spec = c.matrix.as_deref().ok_or_else(|| Error::Input("--matrix is required".into()))?;
    if spec == "golden" {
        return Ok(Sft::golden_mean());
    }
    if let Some(k) = spec.strip_prefix("full:") {
        let k = k.parse().map_err(|_| Error::Input(format!("bad alphabet size in {spec:?}")))?;
        return Sft::full_shift(k);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Error::Input(format!("cannot read matrix file {spec:?}: {e}")))?;
    Sft::from_text(&text)
}

fn load_measure(c: &Common, sft: &Sft) -> Result<MarkovMeasure> {
    match &c.measure {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Input(format!("cannot read measure file {}: {e}", path.display())))?;
            let m = MarkovMeasure::from_text(&text)?;
            m.check_compatible(sft)?;
            Ok(m)
        }
        None => MarkovMeasure::parry(sft),
    }
}

fn load_potential(c: &Common, k: usize) -> Result<Potential> {
    let spec = c.potential.as_deref().ok_or_else(|| Error::Input("--potential is required".into()))?;
    if spec == "metric" {
        return Ok(Potential::metric(k));
    }
    if let Some(s) = spec.strip_prefix("frequency:") {
        let s: u8 = s.parse().map_err(|_| Error::Input(format!("bad symbol in {spec:?}")))?;
        if s as usize >= k {
            return Err(Error::Input(format!("symbol {s} out of range for {k} symbols")));
        }
        return Ok(Potential::frequency(k, s));
    }
    Potential::load(Path::new(spec), k)
}

fn parse_f64(t: &str) -> Result<f64> {
    t.trim().parse().map_err(|_| Error::Input(format!("bad number {t:?}")))
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(parse_f64).collect()
}

/// `lo:hi:step` (inclusive, snapped to the step) or a comma list.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (parse_f64(lo)?, parse_f64(hi)?, parse_f64(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::Input(format!("bad grid {text:?}: need lo ≤ hi and step > 0")));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            if count > 1_000_000 {
                return Err(Error::Input(format!("grid {text:?} has too many points")));
            }
            Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        [_] => parse_list(text),
        _ => Err(Error::Input(format!("bad grid {text:?}; use lo:hi:step or a comma list"))),
    }
}

fn symbols(w: &[u8], k: usize) -> String {
    if k <= 10 {
        w.iter().map(|s| char::from(b'0' + s)).collect()
    } else {
        w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn evidence(e: Evidence) -> &'static str {
    match e {
        Evidence::For => "for",
        Evidence::Against => "against",
        Evidence::Inconclusive => "inconclusive",
    }
}

fn interval(iv: Interval) -> String {
    format!("[{}, {}]", g9(iv.lo), g9(iv.hi))
}

fn classify(sft: &Sft) -> Result<Output> {
    let cl = sft.classify();
    let mut text = format!(
        "irreducible={} aperiodic={} p={} r={}\n",
        cl.irreducible,
        cl.aperiodic,
        cl.period,
        cl.primitivity_r.map_or("none".to_string(), |r| r.to_string())
    );
    if let Some(cw) = &cl.connecting_words {
        let k = sft.alphabet_size() as u8;
        for a in 0..k {
            for b in 0..k {
                text += &format!("W({a},{b})={}\n", symbols(cw.get(a, b), k as usize));
            }
        }
    }
    Ok(Output::text(text))
}

fn entropy(c: &Common) -> Result<Output> {
    let sft = load_sft(c)?;
    let h = sft.topological_entropy()?;
    let k = sft.alphabet_size() as f64;
    let mut text = format!("entropy={} nats\ndimension={}\n", g9(h), g9(h / k.ln()));
    if c.measure.is_some() {
        let m = load_measure(c, &sft)?;
        text += &format!("measure_entropy_rate={}\n", g9(m.entropy_rate()));
    }
    Ok(Output::text(text))
}

fn words(c: &Common, depths: &[usize], list: bool) -> Result<Output> {
    let sft = load_sft(c)?;
    if list {
        let [n] = depths else {
            return Err(Error::Input("--list needs exactly one depth".into()));
        };
        check_budget(&sft, *n, c.budget)?;
        let k = sft.alphabet_size();
        let file: String = sft.words(*n).map(|w| symbols(&w, k) + "\n").collect();
        return Ok(Output { text: String::new(), file: Some(file), failed: false });
    }
    let mut csv = Csv::new(&["n", "count", "slope"]);
    for &n in depths {
        let count = sft.count_words(n)?;
        let slope = if n == 0 { f64::NAN } else { sftlab::moran::big_ln(&count) / n as f64 };
        csv.row(&[n.to_string(), count.to_string(), g9(slope)]);
    }
    Ok(Output { text: String::new(), file: Some(csv.into_string()), failed: false })
}

fn parse_alphas(text: &str, d: usize) -> Result<Vec<Vec<f64>>> {
    if d == 1 {
        return Ok(parse_grid(text)?.into_iter().map(|a| vec![a]).collect());
    }
    text.split(';').map(parse_list).collect()
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| g9(*x)).collect::<Vec<_>>().join(" ")
}

fn spectrum(c: &Common, alpha: &str, control: &SearchControl) -> Result<Output> {
    let sft = load_sft(c)?;
    let f = load_potential(c, sft.alphabet_size())?;
    let nu = load_measure(c, &sft)?;
    let alphas = parse_alphas(alpha, f.dim())?;
    let curve = legendre_spectrum(&sft, &f, &nu, &alphas, control)?;
    let mut csv = Csv::new(&["alpha", "p_star", "value", "lower", "upper", "iterations"]);
    for p in &curve.points {
        csv.row(&[joined(&p.alpha), joined(&p.p_star), g9(p.value), g9(p.lower), g9(p.upper), p.iterations.to_string()]);
    }
    let hits = curve.points.iter().filter(|p| p.boundary_hit).count();
    let text = format!(
        "points={} counting_bound={} concavity_defect={} boundary_hits={hits}\n",
        curve.points.len(),
        g9(curve.counting_bound),
        g9(curve.concavity_defect)
    );
    let file = csv.into_string();
    Ok(Output { text: if c.out.is_some() { text } else { file.clone() + &text }, file: Some(file), failed: false })
}

fn parse_target(text: &str) -> Result<Target> {
    if text.contains(':') {
        let coords = text
            .split(',')
            .map(|t| match t.split_once(':') {
                Some((a, b)) => Ok(Interval::new(parse_f64(a)?, parse_f64(b)?)),
                None => Ok(Interval::point(parse_f64(t)?)),
            })
            .collect::<Result<Vec<_>>>()?;
        if coords.iter().any(|iv| iv.lo > iv.hi) {
            return Err(Error::Input(format!("empty box in target {text:?}")));
        }
        return Ok(Target::Box(coords));
    }
    Ok(Target::Points(text.split(';').map(parse_list).collect::<Result<_>>()?))
}

fn gcount(c: &Common, omega: &str, target: &str, delta: f64, depths: &[usize]) -> Result<Output> {
    let sft = load_sft(c)?;
    let k = sft.alphabet_size();
    let f = load_potential(c, k)?;
    let omega = Point::parse(omega, k)?;
    if depths.is_empty() {
        return Err(Error::Input("--depths is required".into()));
    }
    let rows = g_omega_counts(&sft, &f, &omega, &parse_target(target)?, delta, depths, c.budget)?;
    let mut csv = Csv::new(&["n", "count", "slope"]);
    for r in rows {
        csv.row(&[r.n.to_string(), r.count.to_string(), g9(r.slope)]);
    }
    Ok(Output { text: String::new(), file: Some(csv.into_string()), failed: false })
}

fn chaos_pair(c: &Common, x: &str, y: &str, horizon: usize, eps: &str, close: f64, apart: f64) -> Result<Output> {
    let sft = load_sft(c)?;
    let k = sft.alphabet_size();
    let (x, y) = (Point::parse(x, k)?, Point::parse(y, k)?);
    let config = ChaosConfig::new(close, apart)?;
    let v = classify_pair(&x, &y, horizon, &config)?;
    let text = format!(
        "ly={} mean_ly={} dc1={} dc2={} dc3={}\nrho_min={} rho_max={}\navg_min={} avg_max={}\n",
        evidence(v.ly),
        evidence(v.mean_ly),
        evidence(v.dc1),
        evidence(v.dc2),
        evidence(v.dc3),
        interval(v.rho_min),
        interval(v.rho_max),
        interval(v.avg_min),
        interval(v.avg_max)
    );
    let grid = parse_grid(eps)?;
    let profile = distributional_profile(&x, &y, &grid, horizon, &config)?;
    let mut csv = Csv::new(&["eps", "n", "proportion", "proportion_upper"]);
    for r in &profile.rows {
        csv.row(&[g9(r.eps), r.n.to_string(), g9(r.proportion), g9(r.proportion_upper)]);
    }
    Ok(Output { text, file: Some(csv.into_string()), failed: false })
}

#[derive(Serialize)]
struct TransferReport {
    map: &'static str,
    image: String,
    checks: Vec<CheckLine>,
}

#[derive(Serialize)]
struct CheckLine {
    name: String,
    passed: bool,
    detail: String,
}

fn transfer(c: &Common, map: &TransferMap) -> Result<Output> {
    let sft = load_sft(c)?;
    let k = sft.alphabet_size();
    let (name, a) = match map {
        TransferMap::Full(a) => ("full", a),
        TransferMap::Sft(a) => ("sft", a),
        TransferMap::Encode(a) => ("encode", a),
    };
    let run_checks = match a.check.as_deref() {
        None | Some("none") => false,
        Some("all") => true,
        Some(other) => return Err(Error::Input(format!("--check takes all or none, got {other:?}"))),
    };
    let omega = Point::parse(&a.omega, k)?;
    let omega2 = || -> Result<Point> {
        Point::parse(a.omega2.as_deref().ok_or_else(|| Error::Input("--omega2 is required".into()))?, k)
    };
    let mut checks = Vec::new();
    let mut line = |name: String, passed: bool, detail: String| checks.push(CheckLine { name, passed, detail });
    let image = match map {
        TransferMap::Full(_) => {
            let (w2, x) = (omega2()?, Point::parse(&a.x, k)?);
            let img = phi_full(&sft, &omega, &w2, &x)?.prefix(a.depth);
            if run_checks {
                let parry = MarkovMeasure::parry(&sft)?;
                let mut samples = vec![x];
                for i in 0..a.samples as u64 {
                    samples.push(Point::explicit(k, parry.sample(c.seed.wrapping_add(i), a.depth))?);
                }
                let rep = check_involution(&sft, &omega, &w2, &samples, a.depth)?;
                line("involution".into(), rep.passed(), format!("{rep:?}"));
            }
            img
        }
        TransferMap::Sft(_) => {
            let (w2, x) = (omega2()?, Point::parse(&a.x, k)?);
            let img = phi_sft(&sft, &omega, &w2, &x, a.m)?.prefix(a.depth);
            if run_checks {
                let v = sft.first_violation(&img);
                line("admissibility".into(), v.is_none(), format!("first violation {v:?}"));
                let eq = check_equivariance(&sft, &omega, &w2, &x, a.m, a.depth)?;
                line("equivariance".into(), eq.holds(), format!("{eq:?}"));
                let r = sft.classify().primitivity_r.unwrap_or(0);
                let triples = sample_triples(&sft, BlockLayout::new(a.m, r)?, a.samples, a.depth, c.seed);
                let adm = check_admissibility(&sft, a.m, &triples)?;
                line("sampled admissibility".into(), adm.violations == 0, format!("{adm:?}"));
                let b = check_bilipschitz(&sft, MapKind::Sft, a.m, a.samples, a.depth, c.seed)?;
                line("bi-lipschitz".into(), b.passed(), format!("{b:?}"));
            }
            img
        }
        TransferMap::Encode(_) => {
            let l = BlockCodebook::new(&sft, a.m)?.len();
            let z = Point::parse(&a.x, l)?;
            let img = phi_encode(&sft, &omega, &z, a.m, a.depth)?.prefix(a.depth);
            if run_checks {
                let v = sft.first_violation(&img);
                line("admissibility".into(), v.is_none(), format!("first violation {v:?}"));
                let b = check_bilipschitz(&sft, MapKind::Encode, a.m, a.samples, a.depth, c.seed)?;
                line("bi-lipschitz".into(), b.passed(), format!("{b:?}"));
            }
            img
        }
    };
    let report = TransferReport { map: name, image: symbols(&image, k), checks };
    let mut text = format!("image={}\n", report.image);
    for ch in &report.checks {
        text += &format!("check {}: {}\n", ch.name, if ch.passed { "pass" } else { "FAIL" });
    }
    let failed = report.checks.iter().any(|ch| !ch.passed);
    let file = serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))? + "\n";
    Ok(Output { text, file: Some(file), failed })
}

fn growth_policy(text: &str) -> Result<GrowthPolicy> {
    match text.split_once(':') {
        None if text == "default" => Ok(GrowthPolicy::Default),
        Some(("ratio", q)) => Ok(GrowthPolicy::Ratio(parse_f64(q)?)),
        Some(("capped", m)) => Ok(GrowthPolicy::Capped(parse_f64(m)?)),
        _ => Err(Error::Input(format!("bad growth policy {text:?}; use default, ratio:<q> or capped:<max>"))),
    }
}

fn gap_mode(text: &str) -> Result<GapMode> {
    match text {
        "auto" => Ok(GapMode::Auto),
        "none" => Ok(GapMode::None),
        "connect" | "r" => Ok(GapMode::Connect),
        other => Err(Error::Input(format!("bad gap mode {other:?}; use auto, none or connect"))),
    }
}

#[derive(Serialize)]
struct BuildReport<'a> {
    schedule: &'a sftlab::moran::MoranSchedule,
    library: &'a BlockLibrary,
    gap: Option<usize>,
    pieces: usize,
    counts: &'a [sftlab::moran::BreakpointCount],
    entropy: Option<sftlab::moran::MoranEntropyReport>,
}

fn moran_build(c: &Common, a: &BuildArgs) -> Result<Output> {
    let sft = load_sft(c)?;
    let tols = parse_list(&a.tol)?;
    let (library, eps) = if a.all_words {
        (BlockLibrary::AllWords, tols.clone())
    } else if let Some(range) = &a.chain {
        let (lo, hi) = range
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("--chain takes lo:hi, got {range:?}")))?;
        let ladder: Vec<f64> = (0..a.levels.max(1)).map(|l| tols[0] * 0.5f64.powi(l as i32)).collect();
        let chain = build_alpha_chain(&TargetSet::Interval(parse_f64(lo)?, parse_f64(hi)?), &ladder, 1e-3, None)?;
        let eps = chain.eps_prime.clone();
        (BlockLibrary::from_chain(a.symbol, &chain)?, eps)
    } else {
        (BlockLibrary::Frequency { symbol: a.symbol, targets: parse_list(&a.target)?, tols: tols.clone() }, tols.clone())
    };
    let schedule = build_schedule(a.t1, growth_policy(&a.growth)?, a.stages, &eps)?;
    let set = assemble_moran(&sft, &schedule, &library, gap_mode(&a.gaps)?)?;
    let design = a.design.or_else(|| match (&library, sft.is_full_shift()) {
        (BlockLibrary::Frequency { targets, tols, .. }, true) => Some(band_design_full_shift(
            *targets.last().unwrap(),
            *tols.last().unwrap(),
            sft.alphabet_size(),
        )),
        (BlockLibrary::AllWords, _) => sft.topological_entropy().ok(),
        _ => None,
    });
    let entropy = design.map(|d| moran_entropy_report(&set, d, a.margin, a.samples, c.seed)).transpose()?;
    let mut text = format!(
        "stages={} final_breakpoint={} pieces={} gap={}\n",
        schedule.stages.len(),
        schedule.total_len(),
        set.pieces().len(),
        set.gap.map_or("none".into(), |g| g.to_string())
    );
    if let Some(last) = set.counts.last() {
        text += &format!("final_slope={}\n", g9(last.slope));
    }
    if let Some(r) = &entropy {
        text += &format!(
            "design={} relative_error={} below_stable={} above_diverging={}\n",
            g9(r.design),
            g9(r.relative_error),
            r.below.stable,
            r.above.diverging
        );
    }
    let csv_out = c.out.as_ref().and_then(|p| p.extension()).is_some_and(|e| e == "csv");
    let file = if csv_out {
        let mut csv = Csv::new(&["breakpoint", "count_log", "slope"]);
        for r in &set.counts {
            csv.row(&[r.breakpoint.to_string(), g9(r.count_log), g9(r.slope)]);
        }
        csv.into_string()
    } else {
        let report = BuildReport {
            schedule: &schedule,
            library: &library,
            gap: set.gap,
            pieces: set.pieces().len(),
            counts: &set.counts,
            entropy,
        };
        serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))? + "\n"
    };
    Ok(Output { text, file: Some(file), failed: false })
}

fn moran_witness(c: &Common, a: &WitnessArgs) -> Result<Output> {
    let sft = load_sft(c)?;
    let k = sft.alphabet_size();
    let omega = Point::parse(&a.omega, k)?;
    let schedule = build_schedule(a.t1, GrowthPolicy::Ratio(a.ratio), a.stages, &[])?;
    let w = ml_witness(&omega, &sft, &schedule)?;
    let pred = w.predictions(a.horizon, 0.01)?;
    let v = classify_pair(&w.point, &omega, a.horizon, &ChaosConfig::new(a.close, a.apart)?)?;
    let text = format!(
        "mean_ly={} ly={}\npredicted_min_average={} realized={}\npredicted_max_average={} realized={}\n",
        evidence(v.mean_ly),
        evidence(v.ly),
        g9(pred.min_average),
        interval(v.avg_min),
        g9(pred.max_average),
        interval(v.avg_max)
    );
    let mut csv = Csv::new(&["stage", "start", "end", "copy", "deviation_density", "mean_distance", "average_at_end"]);
    for s in &pred.stages {
        csv.row(&[
            s.stage.to_string(),
            s.start.to_string(),
            s.end.to_string(),
            s.copy.to_string(),
            g9(s.deviation_density),
            g9(s.mean_distance),
            g9(s.average_at_end),
        ]);
    }
    Ok(Output { text, file: Some(csv.into_string()), failed: false })
}

fn check(suite: &str, quick: bool, seed: u64) -> Result<Output> {
    let outcomes = if suite == "all" { run_all(quick, seed)? } else { vec![run_suite(suite, quick, seed)?] };
    let mut text = String::new();
    for o in &outcomes {
        text += &format!(
            "{:<15} {} cases={} failures={} worst_margin={}\n",
            o.suite,
            if o.passed() { "PASS" } else { "FAIL" },
            o.cases,
            o.failures,
            g9(o.worst_margin)
        );
        if let Some(f) = &o.first_failure {
            text += &format!("  first failure: {f}\n");
        }
    }
    let failed = outcomes.iter().any(|o| !o.passed());
    let file = serde_json::to_string_pretty(&outcomes).map_err(|e| Error::Internal(e.to_string()))? + "\n";
    Ok(Output { text, file: Some(file), failed })
}
