use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use idgraph::controllability::check_certificate_with;
use idgraph::crosscheck::cross_check;
use idgraph::observability::Rule;
use idgraph::unroll::{parse_unroll_spec, unroll};
use idgraph::{
    check_controllability_with, closure_with, export_dot, parse_diagram, serialize_diagram,
    validate, ClosureOptions, ControlOptions, ControlQuery, DotAnnotations, InfluenceDiagram,
    Justification, ObservabilityReport, PathCertificate, Verdict,
};

const HOLDS: u8 = 0;
const FAILS: u8 = 1;
const INCONCLUSIVE: u8 = 2;
const INVALID: u8 = 3;
const INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "idgraph", version, about = "Structural observability and controllability of influence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model document for cycles and misplaced node kinds.
    Validate {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Compute which nodes are determined by the observed ones.
    Observe(ObserveArgs),
    /// Decide whether decisions can drive a target set.
    Control(ControlArgs),
    /// Unroll a linear system pattern into a dynamic diagram.
    Unroll {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-check a path certificate against a model.
    Verify(VerifyArgs),
    /// Compare structural verdicts with random linear instantiations.
    CrossCheck(CrossCheckArgs),
    /// Export Graphviz DOT, optionally highlighting a report.
    Dot {
        model: PathBuf,
        /// Observability report, control report or bare certificate.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ObserveArgs {
    model: PathBuf,
    /// Extra observed nodes on top of the file's flags.
    #[arg(long, value_delimiter = ',')]
    observed: Vec<String>,
    /// Exit status reports whether this node is known.
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    json: bool,
    /// Treat decision nodes as known.
    #[arg(long)]
    decisions_known: bool,
}

#[derive(Args)]
struct ControlArgs {
    model: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<String>,
    /// Decisions that may be used (default: all).
    #[arg(long, value_delimiter = ',')]
    decisions: Option<Vec<String>>,
    #[arg(long, default_value_t = idgraph::controllability::DEFAULT_RETRY_LIMIT)]
    retry_limit: usize,
    #[arg(long, default_value_t = idgraph::controllability::DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    /// Do not count decision values as known for side conditions.
    #[arg(long)]
    decisions_unknown: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    model: PathBuf,
    /// Certificate JSON, or a controllable report containing one.
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    decisions: Option<Vec<String>>,
    #[arg(long)]
    decisions_unknown: bool,
}

#[derive(Args)]
struct CrossCheckArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// First seed; later seeds count up from it.
    #[arg(long, env = "IDGRAPH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

/// Failure carrying the exit status it maps to.
struct Failure {
    status: u8,
    message: String,
}

fn invalid(message: impl ToString) -> Failure {
    Failure {
        status: INVALID,
        message: message.to_string(),
    }
}

fn internal(message: impl ToString) -> Failure {
    Failure {
        status: INTERNAL,
        message: message.to_string(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<InfluenceDiagram, Failure> {
    parse_diagram(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Loads a model and refuses it unless it validates.
fn load_valid(path: &Path) -> Result<InfluenceDiagram, Failure> {
    let d = load_model(path)?;
    let report = validate(&d);
    if let Some(v) = report.violations.first() {
        return Err(invalid(format!("{}: {}", path.display(), v.message)));
    }
    Ok(d)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(internal)?;
    s.push('\n');
    Ok(s)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| internal(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { INVALID } else { HOLDS };
            let _ = e.print();
            return ExitCode::from(status);
        }
    };
    match run(cli.command) {
        Ok(status) => ExitCode::from(status),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Validate { model, json } => {
            let d = load_model(&model)?;
            let report = validate(&d);
            if json {
                print!("{}", to_json(&report)?);
            } else if report.ok {
                println!("ok: {} nodes, {} arcs", d.len(), d.arc_count());
            } else {
                for v in &report.violations {
                    println!("violation: {}", v.message);
                }
            }
            Ok(if report.ok { HOLDS } else { INVALID })
        }
        Command::Observe(args) => observe(args),
        Command::Control(args) => control(args),
        Command::Unroll { spec, output } => {
            let spec = parse_unroll_spec(&read(&spec)?).map_err(invalid)?;
            let d = unroll(&spec).map_err(invalid)?;
            emit(&serialize_diagram(&d), output.as_deref())?;
            Ok(HOLDS)
        }
        Command::Verify(args) => verify(args),
        Command::CrossCheck(args) => crosscheck(args),
        Command::Dot {
            model,
            report,
            output,
        } => {
            let d = load_model(&model)?;
            let annotations = match report {
                Some(path) => Some(read_annotations(&read(&path)?).map_err(|e| {
                    invalid(format!("{}: not an observability report or certificate: {e}", path.display()))
                })?),
                None => None,
            };
            emit(&export_dot(&d, annotations.as_ref()), output.as_deref())?;
            Ok(HOLDS)
        }
    }
}

fn read_annotations(text: &str) -> Result<DotAnnotations, serde_json::Error> {
    match serde_json::from_str::<ObservabilityReport>(text) {
        Ok(report) => Ok(DotAnnotations::from_observability(&report)),
        Err(_) => serde_json::from_str::<PathCertificate>(text).map(|c| DotAnnotations::from_certificate(&c)),
    }
}

fn list(ids: &[String]) -> String {
    if ids.is_empty() {
        "(none)".to_owned()
    } else {
        ids.join(", ")
    }
}

fn observe(args: ObserveArgs) -> Result<u8, Failure> {
    let d = load_valid(&args.model)?;
    let opts = ClosureOptions {
        observed: args.observed,
        decisions_known: args.decisions_known,
        ..Default::default()
    };
    let report = closure_with(&d, &opts).map_err(invalid)?;
    if let Some(q) = &args.query {
        if d.index_of(q).is_none() {
            return Err(invalid(format!("query: unknown node \"{q}\"")));
        }
    }

    if args.json {
        print!("{}", to_json(&report)?);
    } else {
        let mut out = String::new();
        let _ = writeln!(out, "known initially: {}", list(&report.known_initial));
        let _ = writeln!(out, "observable: {}", list(&report.observable));
        let _ = writeln!(out, "unknown: {}", list(&report.unknown));
        if !report.trace.is_empty() {
            let _ = writeln!(out, "trace:");
        }
        for (i, f) in report.trace.iter().enumerate() {
            let rule = match f.rule {
                Rule::AllParentsKnown => "all parents known",
                Rule::KByKMatching => "matching",
            };
            let _ = writeln!(
                out,
                "  {}. {}: {} from {}",
                i + 1,
                rule,
                f.newly_known.join(", "),
                f.premises.join(", ")
            );
        }
        for w in &report.redundancy_warnings {
            let _ = writeln!(
                out,
                "warning: {} over-determine {}",
                w.children.join(", "),
                list(&w.parents)
            );
        }
        if let Some(q) = &args.query {
            let state = if report.is_known(q) { "known" } else { "not observable" };
            let _ = writeln!(out, "{q}: {state}");
        }
        print!("{out}");
    }
    Ok(match &args.query {
        Some(q) if !report.is_known(q) => FAILS,
        _ => HOLDS,
    })
}

fn control_options(retry_limit: usize, max_depth: usize, decisions_unknown: bool) -> ControlOptions {
    ControlOptions {
        retry_limit,
        max_depth,
        decisions_known: !decisions_unknown,
    }
}

fn query(targets: &[String], decisions: &Option<Vec<String>>) -> ControlQuery {
    let q = ControlQuery::new(targets);
    match decisions {
        Some(ds) => q.with_decisions(ds),
        None => q,
    }
}

fn describe_certificate(out: &mut String, cert: &PathCertificate, indent: usize) {
    let pad = " ".repeat(indent);
    for p in &cert.paths {
        let _ = writeln!(out, "{pad}path: {}", p.join(" -> "));
    }
    for s in &cert.side_conditions {
        match &s.justification {
            Justification::Observable { .. } => {
                let _ = writeln!(out, "{pad}side condition: {} observable", s.node);
            }
            Justification::Controllable { certificate } => {
                let _ = writeln!(out, "{pad}side condition: {} controllable", s.node);
                describe_certificate(out, certificate, indent + 2);
            }
        }
    }
}

fn control(args: ControlArgs) -> Result<u8, Failure> {
    let d = load_valid(&args.model)?;
    let q = query(&args.targets, &args.decisions);
    let opts = control_options(args.retry_limit, args.max_depth, args.decisions_unknown);
    let report = check_controllability_with(&d, &q, opts).map_err(invalid)?;
    if args.json {
        print!("{}", to_json(&report)?);
    } else {
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", report.verdict.label().replace('_', " "));
        match &report.verdict {
            Verdict::Controllable(cert) => describe_certificate(&mut out, cert, 0),
            Verdict::NotControllable(r) | Verdict::Inconclusive(r) => {
                let detail = serde_json::to_value(r).map_err(internal)?;
                let _ = writeln!(out, "reason: {}", compact(&detail));
            }
        }
        let _ = writeln!(out, "attempts: {}", report.attempts);
        for n in &report.notes {
            let _ = writeln!(out, "note: {n}");
        }
        print!("{out}");
    }
    Ok(match report.verdict {
        Verdict::Controllable(_) => HOLDS,
        Verdict::NotControllable(_) => FAILS,
        Verdict::Inconclusive(_) => INCONCLUSIVE,
    })
}

/// `reason (key value, ...)` from a tagged refusal.
fn compact(v: &serde_json::Value) -> String {
    let Some(map) = v.as_object() else {
        return v.to_string();
    };
    let reason = map.get("reason").and_then(|r| r.as_str()).unwrap_or("?").replace('_', " ");
    let rest: Vec<String> = map
        .iter()
        .filter(|(k, _)| k.as_str() != "reason")
        .map(|(k, v)| format!("{} {}", k.replace('_', " "), v))
        .collect();
    if rest.is_empty() {
        reason
    } else {
        format!("{reason} ({})", rest.join(", "))
    }
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let d = load_valid(&args.model)?;
    let text = read(&args.certificate)?;
    let cert: PathCertificate = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("{}: {e}", args.certificate.display())))?;
    let q = query(&args.targets, &args.decisions);
    let opts = control_options(1, idgraph::controllability::DEFAULT_MAX_DEPTH, args.decisions_unknown);
    match check_certificate_with(&d, &q, &cert, opts) {
        Ok(()) => {
            println!("certificate valid");
            Ok(HOLDS)
        }
        Err(e) => {
            println!("certificate invalid: {e}");
            Ok(FAILS)
        }
    }
}

fn crosscheck(args: CrossCheckArgs) -> Result<u8, Failure> {
    let d = load_valid(&args.model)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|k| args.seed.wrapping_add(k)).collect();
    let report = cross_check(&d, &seeds).map_err(internal)?;
    if args.json {
        print!("{}", to_json(&report)?);
    } else {
        let mut out = String::new();
        let _ = writeln!(out, "seeds: {}", list(&seeds.iter().map(u64::to_string).collect::<Vec<_>>()));
        for (name, t) in [("observability", &report.observability), ("controllability", &report.controllability)] {
            let _ = writeln!(
                out,
                "{name}: {} queries, {} structural, {} numeric, completeness {:.3}, {} indeterminate, {} violations",
                t.queries,
                t.structural,
                t.numeric,
                t.completeness(),
                t.indeterminate,
                t.violations.len()
            );
            for v in &t.violations {
                let _ = writeln!(out, "  violation: seed {} on {}", v.seed, v.nodes.join(", "));
            }
        }
        print!("{out}");
    }
    Ok(if report.is_sound() { HOLDS } else { FAILS })
}
