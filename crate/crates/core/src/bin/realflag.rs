use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use realflag::einstein::table1_flags;
use realflag::{
    check_flag, enumerate_small_flags, parse_flag, solve, table1_row, Error, Family, FlagSpec, SolveMode, Table1Row,
    TableFamily,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "realflag",
    version,
    about = "Invariant Einstein metrics on real flag manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate flags with two or three isotropy summands.
    List {
        /// A, B, C or D.
        #[arg(value_parser = parse_family)]
        family: Family,
        l: usize,
    },
    /// Find the invariant Einstein metrics of a flag, e.g. `A:3:[2,1,1]:-`.
    Solve {
        #[arg(value_parser = parse_spec)]
        flag: FlagSpec,
        #[command(flatten)]
        mode: ModeArgs,
        /// Write the JSON report here (`-` for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Reproduce the classification table of two- and three-summand flags.
    Table1 {
        #[arg(long, default_value_t = 6)]
        max_l: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the invariant suite on a flag.
    Check {
        #[arg(value_parser = parse_spec)]
        flag: FlagSpec,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct ModeArgs {
    #[arg(long)]
    numeric: bool,
    #[arg(long)]
    closed_form: bool,
    #[arg(long)]
    both: bool,
}

impl ModeArgs {
    fn mode(&self) -> SolveMode {
        if self.numeric {
            SolveMode::Numeric
        } else if self.closed_form {
            SolveMode::ClosedForm
        } else {
            SolveMode::Both
        }
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Family::from_letter(c.to_ascii_uppercase()),
        _ => None,
    }
    .ok_or_else(|| format!("unknown family '{s}'"))
}

fn parse_spec(s: &str) -> Result<FlagSpec, String> {
    parse_flag(s).map_err(|e| e.to_string())
}

enum Failure {
    Unimplemented(Error),
    Invariant(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnimplementedCase(_) | Error::NoCatalogEntry(_) | Error::TooManyParameters { .. } => {
                Failure::Unimplemented(e)
            }
            Error::ConvergenceGap { .. } | Error::NotPositiveDefinite { .. } | Error::ClosureViolation { .. } => {
                Failure::Invariant(e.to_string())
            }
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn command_echo() -> Vec<String> {
    std::env::args().skip(1).collect()
}

/// Report envelope; the timing field is last so the payload above it is stable.
fn report(flag: &str, payload: impl Serialize, seconds: f64) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command_echo(),
        "flag": flag,
        "result": payload,
        "timing_seconds": seconds,
    })
}

fn emit_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    if path == Path::new("-") {
        println!("{text}");
    } else {
        fs::write(path, text + "\n")?;
    }
    Ok(())
}

fn list(family: Family, l: usize) -> Result<(), Failure> {
    for spec in enumerate_small_flags(family, l)? {
        let title = TableFamily::classify(&spec).map(|t| t.title()).unwrap_or_default();
        println!("{:<20} {title}", spec.canonical());
    }
    Ok(())
}

fn run_solve(spec: &FlagSpec, mode: SolveMode, json_out: Option<&Path>) -> Result<(), Failure> {
    let start = Instant::now();
    let set = solve(spec, mode)?;
    let seconds = start.elapsed().as_secs_f64();
    let to_stdout = json_out.is_some_and(|p| p == Path::new("-"));
    if !to_stdout {
        println!(
            "{}: {} Einstein metric(s) up to homothety",
            spec.canonical(),
            set.count()
        );
        for (i, s) in set.solutions.iter().enumerate() {
            let coeffs: Vec<String> = s.coeffs().iter().map(|c| format!("{c:.10}")).collect();
            println!(
                "  [{i}] {:<10} ({}) residual {:.1e} c_hat {:.9}",
                s.rule_id,
                coeffs.join(", "),
                s.defect.residual,
                s.defect.normalized_constant
            );
        }
        for g in &set.equivalence_groups {
            println!("  group {:?}: {:?}", g.members, g.status);
        }
        for (name, c) in [("catalog", &set.catalog_check), ("elimination", &set.polynomial_check)] {
            if let Some(c) = c {
                println!(
                    "  {name} check: {} vs {} numeric, gap {:.1e}, agrees {}",
                    c.reference, c.numeric, c.max_gap, c.agrees
                );
            }
        }
    }
    if let Some(path) = json_out {
        emit_json(path, &report(&spec.canonical(), &set, seconds))?;
    }
    let disagree = [&set.catalog_check, &set.polynomial_check]
        .into_iter()
        .flatten()
        .any(|c| !c.agrees);
    if disagree {
        return Err(Failure::Invariant("numeric and reference solutions disagree".into()));
    }
    Ok(())
}

fn mark(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn run_table1(max_l: usize, csv_out: Option<&Path>) -> Result<(), Failure> {
    let flags = table1_flags(max_l)?;
    let mut rows: Vec<(String, Result<Table1Row, Error>)> = Vec::new();
    println!("| flag | manifold | summands | equiv | count | expected | normal Einstein | expected normal | rules | status |");
    println!("|---|---|---|---|---|---|---|---|---|---|");
    for spec in &flags {
        let row = table1_row(spec);
        match &row {
            Ok(r) => println!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                r.flag,
                r.manifold,
                r.summands,
                mark(r.equivalent_summands),
                r.count,
                r.expected.count,
                mark(r.normal_einstein),
                mark(r.expected.normal_einstein),
                r.rules.join(" "),
                if r.matches { "MATCH" } else { "MISMATCH" }
            ),
            Err(e) => println!("| {} | | | | | | | | | ERROR: {e} |", spec.canonical()),
        }
        std::io::stdout().flush()?;
        rows.push((spec.canonical(), row));
    }
    if let Some(path) = csv_out {
        let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Other(e.to_string()))?;
        let io = |e: csv::Error| Failure::Other(e.to_string());
        w.write_record([
            "flag",
            "summands",
            "equiv",
            "count",
            "normal_einstein",
            "expected_count",
            "match",
        ])
        .map_err(io)?;
        for (flag, row) in &rows {
            let record = match row {
                Ok(r) => vec![
                    r.flag.clone(),
                    r.summands.to_string(),
                    r.equivalent_summands.to_string(),
                    r.count.to_string(),
                    r.normal_einstein.to_string(),
                    r.expected.count.to_string(),
                    if r.matches { "MATCH" } else { "MISMATCH" }.to_string(),
                ],
                Err(e) => vec![
                    flag.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("ERROR: {e}"),
                ],
            };
            w.write_record(&record).map_err(io)?;
        }
        w.flush()?;
    }
    let errors = rows.iter().filter(|(_, r)| r.is_err()).count();
    if errors > 0 {
        return Err(Failure::Invariant(format!("{errors} row(s) could not be computed")));
    }
    Ok(())
}

fn run_check(spec: &FlagSpec, json_out: Option<&Path>) -> Result<(), Failure> {
    let start = Instant::now();
    let r = check_flag(spec)?;
    let seconds = start.elapsed().as_secs_f64();
    for o in &r.outcomes {
        println!("{} {:<28} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if let Some(path) = json_out {
        emit_json(path, &report(&spec.canonical(), &r, seconds))?;
    }
    match r.failures().as_slice() {
        [] => Ok(()),
        f => Err(Failure::Invariant(format!("failed: {}", f.join(", ")))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::List { family, l } => list(*family, *l),
        Command::Solve { flag, mode, json } => run_solve(flag, mode.mode(), json.as_deref()),
        Command::Table1 { max_l, csv } => run_table1(*max_l, csv.as_deref()),
        Command::Check { flag, json } => run_check(flag, json.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unimplemented(e)) => {
            eprintln!("unimplemented: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
