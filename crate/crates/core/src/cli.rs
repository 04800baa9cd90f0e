//! The `unsafe-props` command line.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{build_matrix, correlate, load_label_matrix, report_pairs, small_dataset, CorrelationMatrix, PairReport};
use crate::config::{resolve_paths, DataPaths};
use crate::cvebench::{distribution, export_benchmark, load_cves, records_to_csv, timeline_fraction, CveDataset, SEED_CVES};
use crate::docstore::{export_canonical, lint_source, load_database, record_json, render_doc, DocDatabase, SEED_DATABASE};
use crate::exec::Execution;
use crate::scanner::{build_dictionary, parse_name_list, scan_corpus, top_n, EcosystemReport, RankKey, ScanConfig, SHIPPED_SAFE_NAMES};
use crate::taxonomy::{load_catalog, validate_catalog, PropertyCatalog, SHIPPED_CATALOG};
use crate::Diagnostic;

#[derive(Debug, Parser)]
#[command(name = "unsafe-props", version, about = "Safety-property tooling for unsafe Rust APIs")]
struct Cli {
    #[command(flatten)]
    data: DataFlags,
    /// Output format for tabular results.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataFlags {
    /// Config file, instead of searching for unsafe-props.toml.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    catalog: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    database: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    cves: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the catalog, the database and the CVE dataset.
    Validate,
    /// Print the canonical JSON export of the database.
    Build {
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Print one record as JSON.
    Query { identifier: String },
    /// Print the safety document of one record.
    Render { identifier: String },
    /// Correlation matrices and the pair report.
    Correlate {
        #[arg(long, default_value_t = 0.4)]
        threshold: f64,
        /// Show the small-dataset matrix instead of the large one.
        #[arg(long)]
        small: bool,
        /// Label file to use instead of the database labels.
        #[arg(long, value_name = "PATH")]
        full_labels: Option<PathBuf>,
    },
    /// Count unsafe API usage in a local source corpus.
    Scan(ScanArgs),
    /// CVE dataset queries.
    #[command(subcommand)]
    Cve(CveCommand),
    /// Run the hover server on stdin/stdout.
    ServeLsp,
}

#[derive(Debug, Args)]
struct ScanArgs {
    root: PathBuf,
    /// Only print the N most used names.
    #[arg(long, value_name = "N")]
    top: Option<usize>,
    #[arg(long, value_enum, default_value_t = Rank::Packages)]
    rank_by: Rank,
    /// Count matches inside comments and string literals too.
    #[arg(long)]
    no_strip: bool,
    /// Count files that never use the unsafe keyword too.
    #[arg(long)]
    no_unsafe_gate: bool,
    /// Count every whole-token match, not only calls.
    #[arg(long)]
    bare_token: bool,
    /// Names to leave out of the dictionary, one per line.
    #[arg(long, value_name = "PATH")]
    exclude_list: Option<PathBuf>,
    /// Package names to skip, one per line.
    #[arg(long, value_name = "PATH")]
    yanked: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
    /// Report skipped files on stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rank {
    Packages,
    Occurrences,
}

#[derive(Debug, Subcommand)]
enum CveCommand {
    /// Per-property and root-cause distribution.
    Report,
    /// Records violating one property.
    Benchmark { property: String },
    /// Share of records published within a date range.
    Timeline {
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
    },
}

/// A failed invocation: message for stderr and exit status.
struct Failure(String, i32);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string(), 1)
    }
}

type Outcome = Result<i32, Failure>;

struct Context<'a> {
    paths: DataPaths,
    format: Format,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Context<'_> {
    fn read(&self, path: &Path) -> Result<String, Failure> {
        std::fs::read_to_string(path).map_err(|e| Failure(format!("cannot read {}: {e}", path.display()), 1))
    }

    fn catalog_source(&self) -> Result<String, Failure> {
        match &self.paths.catalog {
            Some(p) => self.read(p),
            None => Ok(SHIPPED_CATALOG.to_string()),
        }
    }

    fn catalog(&self) -> Result<PropertyCatalog, Failure> {
        Ok(load_catalog(&self.catalog_source()?)?)
    }

    fn database_source(&self) -> Result<String, Failure> {
        match &self.paths.database {
            Some(p) => self.read(p),
            None => Ok(SEED_DATABASE.to_string()),
        }
    }

    fn database(&self, catalog: &PropertyCatalog) -> Result<DocDatabase, Failure> {
        Ok(load_database(&self.database_source()?, catalog)?)
    }

    fn cves(&self, catalog: &PropertyCatalog) -> Result<CveDataset, Failure> {
        let source = match &self.paths.cves {
            Some(p) => self.read(p)?,
            None => SEED_CVES.to_string(),
        };
        Ok(load_cves(&source, catalog)?)
    }

    fn json(&mut self, value: &impl Serialize) -> Outcome {
        let text = serde_json::to_string_pretty(value)?;
        writeln!(self.out, "{text}")?;
        Ok(0)
    }
}

fn csv_text<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Failure(e.to_string(), 1))?)?)
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, input: impl BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let flags = DataPaths { catalog: cli.data.catalog.clone(), database: cli.data.database.clone(), cves: cli.data.cves.clone(), safe_names: None };
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    let user_dir = dirs::config_dir();
    let paths = match resolve_paths(flags, cli.data.config.as_deref(), |k| std::env::var(k).ok(), &cwd, user_dir.as_deref()) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let mut cx = Context { paths, format: cli.format, out, err };
    let result = dispatch(&mut cx, cli.command, input);
    match result {
        Ok(code) => code,
        Err(Failure(message, code)) => {
            let _ = writeln!(cx.err, "error: {message}");
            code
        }
    }
}

fn dispatch(cx: &mut Context, command: Command, input: impl BufRead) -> Outcome {
    match command {
        Command::Validate => validate(cx),
        Command::Build { output } => {
            let cat = cx.catalog()?;
            let bytes = export_canonical(&cx.database(&cat)?, &cat);
            match output {
                Some(p) => std::fs::write(&p, bytes).map_err(|e| Failure(format!("cannot write {}: {e}", p.display()), 1))?,
                None => cx.out.write_all(&bytes)?,
            }
            Ok(0)
        }
        Command::Query { identifier } => {
            let cat = cx.catalog()?;
            let db = cx.database(&cat)?;
            let record = db.lookup(&identifier).ok_or_else(|| Failure(format!("no record `{identifier}`"), 1))?;
            cx.json(&record_json(record, &cat))
        }
        Command::Render { identifier } => {
            let cat = cx.catalog()?;
            let db = cx.database(&cat)?;
            let record = db.lookup(&identifier).ok_or_else(|| Failure(format!("no record `{identifier}`"), 1))?;
            write!(cx.out, "{}", render_doc(record, &cat))?;
            Ok(0)
        }
        Command::Correlate { threshold, small, full_labels } => correlate_cmd(cx, threshold, small, full_labels),
        Command::Scan(args) => scan(cx, args),
        Command::Cve(c) => cve(cx, c),
        Command::ServeLsp => {
            let cat = cx.catalog()?;
            let db = cx.database(&cat)?;
            Ok(crate::lsp::serve(input, &mut *cx.out, &db, &cat))
        }
    }
}

fn validate(cx: &mut Context) -> Outcome {
    let source = cx.catalog_source()?;
    let mut diags: Vec<Diagnostic> = Vec::new();
    match load_catalog(&source) {
        Err(e) => diags.push(Diagnostic::new("catalog load error", "catalog", e.to_string())),
        Ok(cat) => {
            diags.extend(validate_catalog(&cat));
            diags.extend(lint_source(&cx.database_source()?, &cat));
            if let Err(e) = cx.cves(&cat) {
                diags.push(Diagnostic::new("cve load error", "cves", e.0));
            }
        }
    }
    match cx.format {
        Format::Json => {
            cx.json(&diags)?;
        }
        Format::Csv => write!(cx.out, "{}", csv_text(&diags)?)?,
        Format::Text => {
            for d in &diags {
                writeln!(cx.out, "{d}")?;
            }
            if diags.is_empty() {
                writeln!(cx.out, "ok")?;
            }
        }
    }
    Ok(i32::from(!diags.is_empty()))
}

fn correlate_cmd(cx: &mut Context, threshold: f64, small: bool, full_labels: Option<PathBuf>) -> Outcome {
    let cat = cx.catalog()?;
    let large = match &full_labels {
        Some(p) => load_label_matrix(&cx.read(p)?, &cat)?,
        None => build_matrix(&cx.database(&cat)?, &cat, true),
    };
    let reduced = small_dataset(&large);
    let (cl, cs) = (correlate(&large), correlate(&reduced));
    let report = report_pairs(&cl, &cs, threshold)?;
    let shown = if small { &cs } else { &cl };
    match cx.format {
        Format::Json => cx.json(&json!({
            "rows_large": large.len(),
            "rows_small": reduced.len(),
            "large": cl,
            "small": cs,
            "pairs": report,
        })),
        Format::Csv => {
            write!(cx.out, "{}", csv_text(&report.rows)?)?;
            Ok(0)
        }
        Format::Text => {
            let (label, rows) = if small { ("small", reduced.len()) } else { ("large", large.len()) };
            writeln!(cx.out, "{label} dataset: {rows} rows")?;
            write_matrix(cx.out, shown)?;
            writeln!(cx.out)?;
            write_pairs(cx.out, &report)?;
            Ok(0)
        }
    }
}

fn write_matrix(out: &mut dyn Write, m: &CorrelationMatrix) -> std::io::Result<()> {
    let width = m.labels.iter().map(|l| l.len()).max().unwrap_or(0);
    write!(out, "{:width$}", "")?;
    for l in &m.labels {
        write!(out, " {:>6}", &l[..l.len().min(6)])?;
    }
    writeln!(out)?;
    for (l, row) in m.labels.iter().zip(&m.values) {
        write!(out, "{l:width$}")?;
        for v in row {
            match v {
                Some(v) => write!(out, " {v:>6.2}")?,
                None => write!(out, " {:>6}", "-")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

fn write_pairs(out: &mut dyn Write, report: &PairReport) -> std::io::Result<()> {
    writeln!(out, "pairs with average CC > {}:", report.threshold)?;
    for r in &report.rows {
        writeln!(out, "{}-{}  large {:.2}  small {:.2}  avg {:.2}", r.sp1, r.sp2, r.cc_large, r.cc_small, r.avg_cc)?;
    }
    if report.rows.is_empty() {
        writeln!(out, "(none)")?;
    }
    Ok(())
}

fn scan(cx: &mut Context, args: ScanArgs) -> Outcome {
    let cat = cx.catalog()?;
    let db = cx.database(&cat)?;
    let safe: BTreeSet<String> = match args.exclude_list.as_ref().or(cx.paths.safe_names.as_ref()) {
        Some(p) => parse_name_list(&cx.read(p)?),
        None => parse_name_list(SHIPPED_SAFE_NAMES),
    };
    let dict = build_dictionary(&db, &safe);
    let mut cfg = ScanConfig::new(&args.root);
    cfg.strip_comments_and_strings = !args.no_strip;
    cfg.require_unsafe_in_file = !args.no_unsafe_gate;
    cfg.bare_token = args.bare_token;
    if let Some(p) = &args.yanked {
        cfg.yanked = parse_name_list(&cx.read(p)?);
    }
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    let report = scan_corpus(&cfg, &dict)?;
    if args.verbose {
        for s in &report.skipped_files {
            writeln!(cx.err, "skipped {}: {}", s.path, s.reason)?;
        }
    }
    let key = match args.rank_by {
        Rank::Packages => RankKey::PackageCount,
        Rank::Occurrences => RankKey::TotalOccurrences,
    };
    let rows = top_n(&report, args.top.unwrap_or(usize::MAX), key);
    match cx.format {
        Format::Json => match args.top {
            Some(_) => cx.json(&json!({"dictionary_size": dict.names.len(), "top": rows, "report": report})),
            None => cx.json(&json!({"dictionary_size": dict.names.len(), "report": report})),
        },
        Format::Csv => {
            write!(cx.out, "{}", csv_text(&rows)?)?;
            Ok(0)
        }
        Format::Text => {
            write_scan(cx.out, &report, &rows, dict.names.len())?;
            Ok(0)
        }
    }
}

fn write_scan(out: &mut dyn Write, report: &EcosystemReport, rows: &[crate::scanner::TopRow], dict: usize) -> std::io::Result<()> {
    writeln!(out, "dictionary: {dict} names")?;
    writeln!(out, "packages scanned: {}", report.scanned_packages)?;
    writeln!(out, "packages using unsafe: {}", report.packages_with_unsafe)?;
    writeln!(out, "{:<32} {:>8} {:>11}", "name", "packages", "occurrences")?;
    for r in rows {
        writeln!(out, "{:<32} {:>8} {:>11}", r.name, r.package_count, r.total_occurrences)?;
    }
    if !report.skipped_files.is_empty() {
        writeln!(out, "skipped files: {}", report.skipped_files.len())?;
    }
    Ok(())
}

fn cve(cx: &mut Context, command: CveCommand) -> Outcome {
    let cat = cx.catalog()?;
    let ds = cx.cves(&cat)?;
    match command {
        CveCommand::Report => {
            let report = distribution(&ds, &cat);
            match cx.format {
                Format::Json => cx.json(&report),
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row<'a> {
                        property: &'a str,
                        count: u64,
                    }
                    let rows = report.per_property.iter().map(|(property, &count)| Row { property, count });
                    write!(cx.out, "{}", csv_text(rows)?)?;
                    Ok(0)
                }
                Format::Text => {
                    writeln!(cx.out, "records: {}", report.total)?;
                    for p in cat.primary_ids() {
                        writeln!(cx.out, "{p:<12} {}", report.per_property[p])?;
                    }
                    writeln!(cx.out, "zero-count properties: {}", report.zero_properties.join(", "))?;
                    for (c, f) in &report.root_cause_fractions {
                        writeln!(cx.out, "{c:?}: {f:.4}")?;
                    }
                    Ok(0)
                }
            }
        }
        CveCommand::Benchmark { property } => {
            let records = export_benchmark(&ds, &cat, &property)?;
            match cx.format {
                Format::Json => cx.json(&records),
                Format::Csv => {
                    write!(cx.out, "{}", records_to_csv(&records))?;
                    Ok(0)
                }
                Format::Text => {
                    for r in &records {
                        writeln!(cx.out, "{} {} {}", r.id, r.published, r.package)?;
                    }
                    Ok(0)
                }
            }
        }
        CveCommand::Timeline { from, to } => {
            let fraction = timeline_fraction(&ds, from, to)?;
            match cx.format {
                Format::Json => cx.json(&json!({"from": from, "to": to, "fraction": fraction})),
                Format::Csv => {
                    writeln!(cx.out, "from,to,fraction\n{from},{to},{fraction}")?;
                    Ok(0)
                }
                Format::Text => {
                    writeln!(cx.out, "{fraction:.4}")?;
                    Ok(0)
                }
            }
        }
    }
}
