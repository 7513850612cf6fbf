//! `ultramono`: classify sequences, extract monotone subsequences, take
//! standard parts and intersect nested interval families from the shell.
//!
//! Exit codes: 0 success, 2 parse or usage error, 3 undecided at the
//! horizon, 4 failed precondition, 5 internal invariant violation.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::{json, Map, Value};

use ultramono::dsl::{parse_family, parse_rational, parse_residue, parse_sequence, parse_set, DslError};
use ultramono::monotone::{self, DEFAULT_SEARCH_BOUND};
use ultramono::oracle::DEFAULT_WITNESS_QUOTA;
use ultramono::rational::approx;
use ultramono::saturation::{self, DEFAULT_DEPTH};
use ultramono::ultrapower::default_eps;
use ultramono::{
    Decision, Extraction, Hyper, IndexSet, IndexSetError, MonotoneError, OracleError, OracleState,
    Rational, SaturationError, SharedOracle, UltraError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Verb {
    /// Split ℕ around the class of --seq and report which part has measure 1.
    Classify,
    /// Extract --count terms of the monotone subsequence for --seq.
    Extract,
    /// Prefix peaks of --seq over --prefix terms.
    Peaks,
    /// Strictly decreasing subsequence above the standard part of --seq.
    PropDecreasing,
    /// Compare the classes of two --seq values.
    Compare,
    /// Standard part of --seq.
    St,
    /// Measure --set under the oracle.
    Measure,
    /// Standard common point of the nested --family.
    Cantor,
    /// Diagonal witness of the nested --family with its membership tails.
    Saturate,
    /// Re-measure the decisions recorded in --trace and check the verdicts.
    TraceReplay,
}

#[derive(Parser, Debug)]
#[command(name = "ultramono", version, about = "Ultrapower arithmetic over the rationals")]
struct Cli {
    #[arg(value_enum)]
    verb: Verb,
    /// Sequence in n, e.g. "1/(n+1)" or "per[1,-1]"; repeat for compare.
    #[arg(long = "seq")]
    seq: Vec<String>,
    /// Index set, e.g. "mod(6,{0,3}) & !finite{0}".
    #[arg(long)]
    set: Option<String>,
    /// Interval family in n, e.g. "[0, 1/(n+1)] u [2, 3]".
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    prefix: Option<usize>,
    /// Precision for approximate standard parts (default 1e-9).
    #[arg(long)]
    eps: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: u64,
    #[arg(long = "search-bound", default_value_t = DEFAULT_SEARCH_BOUND)]
    search_bound: u64,
    /// Commit residue r modulo m before anything else, as "m:r".
    #[arg(long = "force-residue")]
    force_residue: Vec<String>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long = "witness-quota")]
    witness_quota: Option<u64>,
    /// Start from a saved oracle state.
    #[arg(long = "oracle-state")]
    oracle_state: Option<PathBuf>,
    /// Write the oracle state after the command.
    #[arg(long = "save-oracle")]
    save_oracle: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Decision trace: written as JSON lines, or read by trace-replay.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Horizon(String),
    Precondition(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Horizon(_) => 3,
            CliError::Precondition(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Horizon(m) | CliError::Precondition(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<DslError> for CliError {
    fn from(e: DslError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        let m = e.to_string();
        match e {
            OracleError::AmbiguousAtHorizon { .. } => CliError::Horizon(m),
            OracleError::InconsistentLedger(_) => CliError::Internal(m),
            OracleError::IncompatibleResidue { .. }
            | OracleError::ConflictsWithLedger { .. }
            | OracleError::InvalidResidue { .. } => CliError::Precondition(m),
        }
    }
}

impl From<IndexSetError> for CliError {
    fn from(e: IndexSetError) -> Self {
        let m = e.to_string();
        match e {
            IndexSetError::ExhaustedAtHorizon { .. }
            | IndexSetError::BeyondHorizon { .. }
            | IndexSetError::UndecidableOnSampled => CliError::Horizon(m),
            IndexSetError::Malformed(_) => CliError::Parse(m),
            IndexSetError::EmptySet | IndexSetError::TooFewMembers { .. } => CliError::Precondition(m),
        }
    }
}

impl From<UltraError> for CliError {
    fn from(e: UltraError) -> Self {
        let m = e.to_string();
        match e {
            UltraError::Oracle(o) => o.into(),
            UltraError::NotDecidedAtBound { .. } => CliError::Horizon(m),
            UltraError::UndefinedAtIndex { .. }
            | UltraError::DivisionByZeroClass
            | UltraError::NotFinite
            | UltraError::UndefinedClass => CliError::Precondition(m),
            UltraError::MixedOracles => CliError::Internal(m),
        }
    }
}

impl From<MonotoneError> for CliError {
    fn from(e: MonotoneError) -> Self {
        let m = e.to_string();
        match e {
            MonotoneError::SearchBoundExceeded { .. } => CliError::Horizon(m),
            MonotoneError::PrefixTooShort | MonotoneError::PreconditionFailed(_) => CliError::Precondition(m),
            MonotoneError::Ultra(u) => u.into(),
            MonotoneError::IndexSet(i) => i.into(),
        }
    }
}

impl From<SaturationError> for CliError {
    fn from(e: SaturationError) -> Self {
        let m = e.to_string();
        match e {
            SaturationError::MembershipUndecided(o) => o.into(),
            SaturationError::Ultra(u) => u.into(),
            SaturationError::WitnessOutsideLevel { .. } | SaturationError::NotInLevel { .. } => {
                CliError::Internal(m)
            }
            _ => CliError::Precondition(m),
        }
    }
}

/// The result document. Every verb fills the shared keys it can and adds
/// its own under `details`.
#[derive(Default)]
struct Report {
    case: Option<String>,
    verdicts: Vec<Value>,
    indices: Vec<u64>,
    values: Vec<Rational>,
    details: Map<String, Value>,
    lines: Vec<String>,
}

impl Report {
    fn detail(&mut self, key: &str, value: impl Into<Value>) {
        self.details.insert(key.to_string(), value.into());
    }

    fn extraction(&mut self, ex: &Extraction) {
        self.indices = ex.indices.clone();
        self.values = ex.values.clone();
        self.detail("direction", ex.direction.to_string());
        self.lines.push(format!("direction: {}", ex.direction));
        for (i, v) in ex.indices.iter().zip(&ex.values) {
            self.lines.push(format!("  n = {i:>6}   u_n = {v}   (≈ {})", approx(v)));
        }
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Parse(format!("this command needs --{flag}")))
}

fn one_seq(cli: &Cli) -> Result<ultramono::SequenceExpr, CliError> {
    match cli.seq.as_slice() {
        [text] => Ok(parse_sequence(text)?),
        [] => Err(CliError::Parse("this command needs --seq".into())),
        _ => Err(CliError::Parse("this command takes a single --seq".into())),
    }
}

fn eps(cli: &Cli) -> Result<Rational, CliError> {
    match &cli.eps {
        None => Ok(default_eps()),
        Some(text) => {
            let q = parse_rational(text)?;
            if q <= Rational::from_integer(0.into()) {
                return Err(CliError::Parse("--eps must be positive".into()));
            }
            Ok(q)
        }
    }
}

fn load_oracle(cli: &Cli) -> Result<SharedOracle, CliError> {
    let mut state = match &cli.oracle_state {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Precondition(format!("cannot read {}: {e}", path.display())))?;
            let state: OracleState = serde_json::from_str(&text).map_err(|e| {
                CliError::Internal(format!("oracle state {} is invalid: {e}", path.display()))
            })?;
            if cli.horizon.is_some_and(|h| h != state.horizon())
                || cli.witness_quota.is_some_and(|w| w != state.witness_quota())
            {
                return Err(CliError::Precondition(
                    "--horizon/--witness-quota disagree with the saved oracle state".into(),
                ));
            }
            state
        }
        None => OracleState::new(
            cli.horizon.unwrap_or(ultramono::index_sets::DEFAULT_HORIZON),
            cli.witness_quota.unwrap_or(DEFAULT_WITNESS_QUOTA),
        ),
    };
    for text in &cli.force_residue {
        let (m, r) = parse_residue(text)?;
        state.force_residue(m, r)?;
    }
    Ok(SharedOracle::new(state))
}

fn ordering_name(o: std::cmp::Ordering) -> &'static str {
    match o {
        std::cmp::Ordering::Less => "LT",
        std::cmp::Ordering::Equal => "EQ",
        std::cmp::Ordering::Greater => "GT",
    }
}

fn run_verb(cli: &Cli, oracle: &SharedOracle) -> Result<Report, CliError> {
    let mut r = Report::default();
    match cli.verb {
        Verb::Classify | Verb::Extract => {
            let seq = one_seq(cli)?;
            let tri = monotone::classify(&seq, oracle)?;
            let measures = tri.measures()?;
            r.case = Some(tri.case.to_string());
            r.verdicts = measures.iter().map(|&m| json!(m)).collect();
            r.detail("below", tri.below.label());
            r.detail("equal", tri.equal.label());
            r.detail("above", tri.above.label());
            r.lines.push(format!("case: {}", tri.case));
            for (name, set, m) in [
                ("A (below)", &tri.below, measures[0]),
                ("B (equal)", &tri.equal, measures[1]),
                ("C (above)", &tri.above, measures[2]),
            ] {
                r.lines.push(format!("{name}: {set}   measure {m}"));
            }
            if cli.verb == Verb::Extract {
                let count = *required(&cli.count, "count")?;
                let ex = monotone::extract(&tri, count, cli.search_bound)?;
                r.extraction(&ex);
            }
        }
        Verb::Peaks => {
            let seq = one_seq(cli)?;
            let ex = monotone::peaks(&seq, *required(&cli.prefix, "prefix")?)?;
            r.extraction(&ex);
        }
        Verb::PropDecreasing => {
            let seq = one_seq(cli)?;
            let count = *required(&cli.count, "count")?;
            let st = Hyper::new(seq.clone(), oracle).standard_part(&eps(cli)?)?;
            r.detail("standard_part", st.value.to_string());
            r.lines.push(format!("standard part: {}", st.value));
            let ex = monotone::extract_decreasing_above_st(&seq, oracle, count, cli.search_bound)?;
            r.extraction(&ex);
        }
        Verb::Compare => {
            let [a, b] = cli.seq.as_slice() else {
                return Err(CliError::Parse("compare needs exactly two --seq".into()));
            };
            let u = Hyper::new(parse_sequence(a)?, oracle);
            let v = Hyper::new(parse_sequence(b)?, oracle);
            let verdict = ordering_name(u.compare(&v)?);
            r.verdicts = vec![json!(verdict)];
            r.lines.push(format!("{u} {verdict} {v}"));
        }
        Verb::St => {
            let u = Hyper::new(one_seq(cli)?, oracle);
            let st = u.standard_part(&eps(cli)?)?;
            r.values = vec![st.value.clone()];
            r.detail("exact", st.exact);
            let note = if st.exact { "exact" } else { "within eps" };
            r.lines.push(format!("st {u} = {}   ({note}, ≈ {})", st.value, approx(&st.value)));
        }
        Verb::Measure => {
            let set = parse_set(required(&cli.set, "set")?)?;
            let m = oracle.measure(&IndexSet::Exact(set.clone()))?;
            r.verdicts = vec![json!(m)];
            r.lines.push(format!("measure({set}) = {m}"));
        }
        Verb::Cantor => {
            let fam = parse_family(required(&cli.family, "family")?, cli.depth)?;
            let p = saturation::cantor_intersection(&fam, oracle, &eps(cli)?)?;
            r.values = vec![p.value.clone()];
            r.detail("exact", p.exact);
            let note = if p.exact { "exact" } else { "within eps" };
            r.lines.push(format!(
                "common point of {} levels: {}   ({note}, ≈ {})",
                cli.depth,
                p.value,
                approx(&p.value)
            ));
        }
        Verb::Saturate => {
            let fam = parse_family(required(&cli.family, "family")?, cli.depth)?;
            let w = saturation::saturation_witness(&fam, oracle)?;
            r.detail("witness", w.sequence().to_string());
            r.verdicts = w.levels.iter().map(|l| json!(l.verdict)).collect();
            r.indices = w.levels.iter().map(|l| l.level).collect();
            r.detail(
                "tails",
                w.levels
                    .iter()
                    .map(|l| json!({"level": l.level, "set": l.set.label(), "contains_tail": l.contains_tail}))
                    .collect::<Vec<_>>(),
            );
            r.lines.push(format!("witness: {}", w.point));
            for l in &w.levels {
                r.lines.push(format!("  level {:>3}: {{n : c_n ∈ A}} = {}   measure {}", l.level, l.set, l.verdict));
            }
        }
        Verb::TraceReplay => {
            let path = required(&cli.trace, "trace")?;
            let decisions = read_trace(path)?;
            let mut guard = oracle.lock();
            for (i, d) in decisions.iter().enumerate() {
                let verdict = guard.measure(&d.set)?;
                if verdict != d.verdict {
                    return Err(CliError::Internal(format!(
                        "trace line {}: {} measured {verdict}, recorded {}",
                        i + 1,
                        d.set,
                        d.verdict
                    )));
                }
                r.verdicts.push(json!(verdict));
            }
            r.detail("replayed", decisions.len());
            r.lines.push(format!("replayed {} decisions, all verdicts match", decisions.len()));
        }
    }
    Ok(r)
}

fn read_trace(path: &Path) -> Result<Vec<Decision>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Precondition(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Parse(format!("trace line {}: {e}", i + 1)))
        })
        .collect()
}

fn write_trace(path: &Path, decisions: &[Decision]) -> Result<(), CliError> {
    let mut out = Vec::new();
    for d in decisions {
        serde_json::to_writer(&mut out, d).expect("decisions serialize");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| CliError::Precondition(format!("cannot write {}: {e}", path.display())))
}

fn render(cli: &Cli, report: Report, oracle: &OracleState) -> String {
    let tower: Vec<[u64; 2]> = oracle.tower().iter().map(|(&m, &r)| [m, r]).collect();
    let digest = oracle.ledger_digest();
    if cli.json {
        let doc = json!({
            "verb": cli.verb.to_possible_value().expect("named verb").get_name(),
            "case": report.case,
            "verdicts": report.verdicts,
            "indices": report.indices,
            "values": report.values.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "details": report.details,
            "oracle": {"tower": tower, "ledger_digest": digest},
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    } else {
        let mut s = String::new();
        for line in report.lines {
            s.push_str(&line);
            s.push('\n');
        }
        let tower: Vec<String> = tower.iter().map(|[m, r]| format!("r_{m}={r}")).collect();
        s.push_str(&format!(
            "oracle: tower [{}], {} decisions, ledger {}\n",
            tower.join(", "),
            oracle.ledger().len(),
            &digest[..16]
        ));
        s
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let oracle = load_oracle(cli)?;
    let start = oracle.lock().ledger().len();
    let report = run_verb(cli, &oracle)?;
    let state = oracle.snapshot();
    if cli.verb != Verb::TraceReplay {
        if let Some(path) = &cli.trace {
            write_trace(path, &state.ledger()[start..])?;
        }
    }
    if let Some(path) = &cli.save_oracle {
        let text = serde_json::to_string(&state).expect("oracle state serializes");
        fs::write(path, text)
            .map_err(|e| CliError::Precondition(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(render(cli, report, &state))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
