//! `wmode`: boundary curves, certification, click simulation and witness
//! utilities for four-mode single-excitation entanglement.

mod parse;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use wmode::atlas::{self, analytic, CurveConfig, CurveMethod, ScanOptions, Witness4};
use wmode::certify::{Certifier, Measurement};
use wmode::families::ClassTag;
use wmode::numeric::logspace;
use wmode::optics::{self, lossy_projectors};
use wmode::witness::{optimize_phases, state_variance, witness_basis};
use wmode::TOOL_VERSION;

const THREADS_ENV: &str = "WMODE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "wmode", version, about = "Witness boundaries and certification for four-mode W-type entanglement")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads (default: $WMODE_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with default flag values for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum-variance boundary of a class at fixed q, as CSV.
    Curve(CurveArgs),
    /// Classify a measured (q, r, delta) point, as JSON.
    Certify(CertifyArgs),
    /// Monte Carlo click counts for a state sent through the network.
    Simulate(SimulateArgs),
    /// Local phases minimizing the witness variance of a state.
    Phases(PhasesArgs),
    /// Projector states of the ideal witness or of a network.
    Wbasis(WbasisArgs),
    /// Zero-variance limits on r for each class.
    Thresholds(ThresholdArgs),
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long)]
    class: String,
    #[arg(long)]
    q: f64,
    /// Largest r of the grid (0 gives the single point r = 0).
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Closed-form curve (biseparable classes only).
    #[arg(long)]
    analytic: bool,
    /// pure | envelope | analytic.
    #[arg(long)]
    method: Option<String>,
    /// Network description; boundaries then use its conditional projectors.
    #[arg(long)]
    network: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 24)]
    restarts: usize,
    /// Search all sign/phase patterns instead of the closed forms.
    #[arg(long)]
    exhaustive: bool,
    /// Random class states checked against the curve.
    #[arg(long, default_value_t = 0)]
    verify: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, required_unless_present = "estimate")]
    q: Option<f64>,
    #[arg(long, required_unless_present = "estimate")]
    r: Option<f64>,
    #[arg(long, required_unless_present = "estimate")]
    delta: Option<f64>,
    /// `delta` is a raw measured variance; apply the loss correction.
    #[arg(long)]
    measured: bool,
    /// Path transmission probability |T|^2.
    #[arg(long)]
    transmission: Option<f64>,
    /// Estimate JSON written by `simulate`.
    #[arg(long, conflicts_with_all = ["q", "r", "delta"])]
    estimate: Option<PathBuf>,
    #[arg(long)]
    network: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    state: String,
    #[arg(long, default_value = "balanced")]
    network: String,
    #[arg(long, default_value_t = 1_000_000)]
    shots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Counts CSV (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimate JSON (stdout if absent).
    #[arg(long)]
    estimate: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhasesArgs {
    #[arg(long)]
    state: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 24)]
    restarts: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WbasisArgs {
    /// Comma-separated local phases for modes 2..4.
    #[arg(long, value_delimiter = ',')]
    phases: Vec<f64>,
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[arg(long)]
    q: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Header {
    command: String,
    seed: Option<u64>,
}

impl Header {
    fn csv(&self) -> String {
        let mut s = format!("# tool_version: {TOOL_VERSION}\n# command: {}\n", self.command);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed: {seed}");
        }
        s
    }

    fn json(&self, mut v: serde_json::Value) -> String {
        if let Some(o) = v.as_object_mut() {
            o.insert("tool_version".into(), TOOL_VERSION.into());
            o.insert("command".into(), self.command.clone().into());
            if let Some(seed) = self.seed {
                o.insert("seed".into(), seed.into());
            }
        }
        let mut s = serde_json::to_string_pretty(&v).expect("json");
        s.push('\n');
        s
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn witness_for(network: &Option<String>) -> Result<Witness4> {
    match network {
        None => Ok(Witness4::ideal()),
        Some(n) => Ok(Witness4::from_projectors(lossy_projectors(&parse::parse_network(n)?)?.projectors())?),
    }
}

fn cmd_curve(a: &CurveArgs, h: &Header) -> Result<String> {
    let tag = ClassTag::parse(&a.class)?;
    let method = match (a.analytic, a.method.as_deref()) {
        (true, _) | (_, Some("analytic")) => CurveMethod::Analytic,
        (_, Some("pure")) => CurveMethod::PureScan,
        (_, Some("envelope")) => CurveMethod::ConvexEnvelope,
        (_, Some(m)) => bail!(wmode::Error::InvalidParameter(format!("unknown method `{m}`"))),
        (_, None) => CurveMethod::default_for(tag),
    };
    if method == CurveMethod::Analytic && a.network.is_some() {
        bail!(wmode::Error::InvalidParameter("closed forms exist only for the ideal network".into()));
    }
    let grid = match a.r_max {
        Some(m) if m < 0.0 => bail!(wmode::Error::InvalidParameter("--r-max must be non-negative".into())),
        Some(m) if m == 0.0 || a.points < 2 => Some(vec![0.0]),
        Some(m) => {
            let mut g = vec![0.0];
            g.extend(logspace(1e-5f64.min(m * 1e-3), m, a.points - 1));
            Some(g)
        }
        None if a.points != 200 => {
            let top = *atlas::default_grid(tag, a.q, method).last().unwrap_or(&0.0);
            let mut g = vec![0.0];
            if a.points > 1 {
                g.extend(logspace(1e-5f64.min(top * 1e-3), top, a.points - 1));
            }
            Some(g)
        }
        None => None,
    };
    let cfg = CurveConfig {
        witness: witness_for(&a.network)?,
        scan: ScanOptions { restarts: a.restarts, seed: a.seed, exhaustive: a.exhaustive },
        grid,
        method: Some(method),
        verify_samples: a.verify,
        ..CurveConfig::default()
    };
    let curve = atlas::min_variance_curve(tag, a.q, &cfg)?;
    let mut s = h.csv();
    if let Some(v) = curve.verification {
        let _ = writeln!(s, "# verified: {} samples, {} exact checks, worst margin {}", v.samples, v.exact_checks, sci(v.worst_margin));
    }
    for r in &curve.infeasible {
        let _ = writeln!(s, "# infeasible: r={}", sci(*r));
    }
    s.push_str("class,q,method,r,R,delta_min\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{},{},{},{}", tag.name(), sci(a.q), method.name(), sci(p.r), sci(p.big_r), sci(p.delta));
    }
    Ok(s)
}

fn cmd_certify(a: &CertifyArgs, h: &Header) -> Result<String> {
    let m = match &a.estimate {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(wmode::Error::from)?;
            let field = |k: &str| {
                v.get(k).and_then(|x| x.as_f64()).ok_or_else(|| wmode::Error::Parse(format!("estimate lacks `{k}`")))
            };
            let t2 = a.transmission.or_else(|| v.get("transmission").and_then(|x| x.as_f64()));
            let Some(t2) = t2 else {
                bail!(wmode::Error::InvalidParameter("unbalanced losses: pass --transmission".into()))
            };
            Measurement::measured(field("q_hat")?, field("r_hat")?, field("delta_m_hat")?, t2)
        }
        None => {
            let (q, r, d) = (a.q.unwrap_or_default(), a.r.unwrap_or_default(), a.delta.unwrap_or_default());
            if a.measured {
                let Some(t2) = a.transmission else {
                    bail!(wmode::Error::InvalidParameter("--measured needs --transmission".into()))
                };
                Measurement::measured(q, r, d, t2)
            } else {
                Measurement::new(q, r, d)
            }
        }
    };
    let cfg = CurveConfig {
        witness: witness_for(&a.network)?,
        scan: ScanOptions { seed: a.seed, ..ScanOptions::default() },
        ..CurveConfig::default()
    };
    let res = Certifier::new(cfg).classify(&m)?;
    Ok(h.json(res.to_json()))
}

fn cmd_simulate(a: &SimulateArgs, h: &Header) -> Result<(String, String)> {
    let rho = parse::parse_state(&a.state)?;
    let net = parse::parse_network(&a.network)?;
    let exact = optics::measured_variance(&rho, &net)?;
    let counts = optics::simulate_clicks(&rho, &net, a.shots, a.seed)?;
    let prof = rho.excitation_profile();
    let mut csv = h.csv();
    csv.push_str("output_mode,count\n");
    for (k, c) in counts.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", k + 1, c);
    }
    let _ = writeln!(csv, "none,{}", counts.no_click);
    let json = h.json(serde_json::json!({
        "state": a.state,
        "network": a.network,
        "shots": a.shots,
        "counts": counts.counts,
        "no_click": counts.no_click,
        "estimated_probabilities": counts.estimated,
        "q_hat": prof.q,
        "r_hat": prof.r,
        "delta_m_hat": counts.delta_m_hat,
        "delta_m_exact": exact.delta_m,
        "transmission": parse::uniform_transmission(&net),
    }));
    Ok((csv, json))
}

fn cmd_phases(a: &PhasesArgs, h: &Header) -> Result<String> {
    let rho = parse::parse_state(&a.state)?;
    let one = rho.excitation_profile().rho_one.ok_or(wmode::Error::NoSingleExcitation)?;
    let zero = state_variance(&rho, &witness_basis(4, &[0.0; 3])?)?.delta;
    let (phases, delta) = optimize_phases(&one, a.seed, a.restarts)?;
    Ok(h.json(serde_json::json!({ "state": a.state, "phases": phases, "delta": delta, "delta_zero_phases": zero })))
}

fn cmd_wbasis(a: &WbasisArgs, h: &Header) -> Result<String> {
    let pairs = |v: &[num_complex::Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let v = match &a.network {
        None => {
            let phases = if a.phases.is_empty() { vec![0.0; 3] } else { a.phases.clone() };
            let b = witness_basis(4, &phases)?;
            serde_json::json!({ "phases": phases, "vectors": b.vectors().iter().map(|x| pairs(x)).collect::<Vec<_>>() })
        }
        Some(n) => {
            let p = lossy_projectors(&parse::parse_network(n)?)?;
            serde_json::json!({
                "network": n,
                "vectors": p.states.iter().map(|x| pairs(x)).collect::<Vec<_>>(),
                "efficiencies": p.efficiencies,
                "gram_deviation": p.gram_deviation(),
            })
        }
    };
    Ok(h.json(v))
}

fn cmd_thresholds(a: &ThresholdArgs, h: &Header) -> Result<String> {
    let mut s = h.csv();
    s.push_str("class,q,r_max,R,residual\n");
    for tag in ClassTag::ALL {
        let r = atlas::zero_variance_threshold(tag, a.q)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            tag.name(),
            sci(a.q),
            sci(r),
            sci(atlas::scaled_r(a.q, r)),
            sci(analytic::threshold_residual(tag, a.q, r))
        );
    }
    Ok(s)
}

fn quote(arg: &str) -> String {
    if arg.is_empty() || arg.contains(|c: char| c.is_whitespace() || c == '"' || c == '\'') {
        format!("'{}'", arg.replace('\'', "'\\''"))
    } else {
        arg.to_string()
    }
}

/// Insert `--key value` pairs from the config file right after the subcommand,
/// so that flags given on the command line take precedence.
fn with_config(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(i) = argv.iter().position(|a| a == "--config") else { return Ok(argv) };
    let path = argv.get(i + 1).context("--config needs a path")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let obj = v.as_object().context("config must be a JSON object")?;
    let names = ["curve", "certify", "simulate", "phases", "wbasis", "thresholds"];
    let Some(sub) = argv.iter().position(|a| names.contains(&a.as_str())) else { return Ok(argv) };
    let mut extra = Vec::new();
    for (k, v) in obj {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => extra.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => extra.extend([flag, s.clone()]),
            serde_json::Value::Array(xs) => {
                let joined: Vec<String> = xs.iter().map(|x| x.to_string().trim_matches('"').to_string()).collect();
                extra.extend([flag, joined.join(",")]);
            }
            other => extra.extend([flag, other.to_string()]),
        }
    }
    let mut out = argv[..=sub].to_vec();
    out.extend(extra);
    out.extend(argv[sub + 1..].iter().cloned());
    Ok(out)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use wmode::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Consistency(_)) => 4,
        Some(E::Infeasible(_)
        | E::NoRoot(_)
        | E::Unattainable(_)
        | E::NoSingleExcitation
        | E::Leakage(_)
        | E::Truncation(_)) => 3,
        _ => 2,
    }
}

fn run(cli: Cli, command: String) -> Result<()> {
    let threads = cli.threads.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    match &cli.command {
        Command::Curve(a) => emit(&a.out, &cmd_curve(a, &Header { command, seed: Some(a.seed) })?),
        Command::Certify(a) => emit(&a.out, &cmd_certify(a, &Header { command, seed: Some(a.seed) })?),
        Command::Simulate(a) => {
            let (csv, json) = cmd_simulate(a, &Header { command, seed: Some(a.seed) })?;
            emit(&a.out, &csv)?;
            emit(&a.estimate, &json)
        }
        Command::Phases(a) => emit(&a.out, &cmd_phases(a, &Header { command, seed: Some(a.seed) })?),
        Command::Wbasis(a) => emit(&a.out, &cmd_wbasis(a, &Header { command, seed: None })?),
        Command::Thresholds(a) => emit(&a.out, &cmd_thresholds(a, &Header { command, seed: None })?),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let command = std::iter::once("wmode".to_string()).chain(argv[1..].iter().map(|a| quote(a))).collect::<Vec<_>>().join(" ");
    let expanded = match with_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::command().try_get_matches_from(expanded).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
