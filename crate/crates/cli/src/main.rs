//! `loft`: command-line front end for logic-form table-to-text generation.
//!
//! Data goes to files or stdout, logs to stderr. Exit codes: 0 success,
//! 1 usage error, 2 data error, 3 hook failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use loft_core::demo::{run_demo, write_demo, DemoOptions};
use loft_core::dsl::{parse_logic_form, type_check};
use loft_core::executor::{execute, verify};
use loft_core::metrics::score;
use loft_core::pipeline::{
    read_output, run_pipeline, synthesize_corpus, write_candidates, write_output, HookCommand, HookConfig, HookRole,
    PipelineConfig, SamplingStrategy, Shortfall,
};
use loft_core::realize::{serialize_table, to_readable_with, PhraseTable};
use loft_core::synth::SynthesisConfig;
use loft_core::table::{load_corpus, load_table, write_json_corpus, CorpusEntry, CorpusFormat};
use loft_core::templates::{
    build_distribution, load_distribution, read_logic_forms, save_distribution, TemplateDistribution,
};

#[derive(Parser)]
#[command(name = "loft", version, about = "Logic-form controlled table-to-text generation")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "LOFT_SEED", default_value_t = 13)]
    seed: u64,
    /// Log filter for stderr, e.g. warn, info, debug.
    #[arg(long, global = true, env = "LOFT_LOG", default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize a corpus into JSON lines.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_parser = ["json", "csv"])]
        format: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a template distribution from a file of logic forms.
    MineTemplates {
        #[arg(long)]
        forms: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label stored with the distribution; defaults to the input path.
        #[arg(long)]
        provenance: Option<String>,
    },
    /// Synthesize candidate logic forms for every corpus table.
    Synthesize {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a logic form as text and/or serialize a table.
    Realize {
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Comma-separated column indices for table serialization.
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<usize>>,
        #[arg(long)]
        phrases: Option<PathBuf>,
    },
    /// Execute a logic form against a table.
    Execute {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        form: String,
    },
    /// Check whether a logic form holds on a table.
    Verify {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        form: String,
    },
    /// Synthesize, generate, verify and sample statements.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a pipeline output file.
    Score {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every stage on the bundled corpus with builtin hooks.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "random")]
        strategy: SamplingStrategy,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Template distribution; the bundled default when omitted.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Candidates per column set.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    retries: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    max_column_sets: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Statements kept per table.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value = "random")]
    strategy: SamplingStrategy,
    /// `builtin` or `cmd:<program> <args>`.
    #[arg(long, default_value = "builtin")]
    generator: String,
    #[arg(long, default_value = "builtin")]
    verifier: String,
    /// Per-request hook timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long)]
    phrases: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
    Hook(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Hook(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Hook(m) => m,
        }
    }
}

/// Writes a line of data to stdout. A closed pipe is not an error.
fn emit(text: impl std::fmt::Display) -> Result<(), Failure> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(data(e)),
        _ => Ok(()),
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn write_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Data(format!("cannot write {}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(write_err(path))
}

fn load_entries(path: &Path) -> Result<Vec<CorpusEntry>, Failure> {
    let loaded = load_corpus(path, CorpusFormat::from_path(path)).map_err(data)?;
    if !loaded.skipped.is_empty() {
        log::warn!("{}: skipped {} invalid entries", path.display(), loaded.skipped.len());
    }
    Ok(loaded.entries)
}

fn load_dist(path: Option<&Path>) -> Result<TemplateDistribution, Failure> {
    match path {
        Some(p) => load_distribution(p).map_err(data),
        None => Ok(TemplateDistribution::bundled_default()),
    }
}

fn synth_config(args: &SynthArgs, seed: u64) -> SynthesisConfig {
    SynthesisConfig {
        candidates_per_column_set: args.n as usize,
        retries_per_template: args.retries as usize,
        seed,
        max_column_sets: args.max_column_sets as usize,
    }
}

fn hook_config(spec: &str, timeout: f64, role: HookRole) -> Result<HookConfig, Failure> {
    let command = HookCommand::parse(spec).map_err(|e| Failure::Usage(e.to_string()))?;
    if !(timeout.is_finite() && timeout > 0.0) {
        return Err(Failure::Usage(format!("--timeout must be positive, got {timeout}")));
    }
    HookConfig::new(command, Duration::from_secs_f64(timeout), role).map_err(|e| Failure::Usage(e.to_string()))
}

fn load_phrases(path: Option<&Path>) -> Result<PhraseTable, Failure> {
    match path {
        Some(p) => PhraseTable::load(p).map_err(data),
        None => Ok(PhraseTable::bundled().clone()),
    }
}

fn report_shortfalls(shortfalls: &[Shortfall]) {
    for s in shortfalls {
        log::info!(
            "table {} column set {:?}: {} of {} candidates",
            s.table_id,
            s.column_set,
            s.produced,
            s.requested
        );
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest { corpus, format, out } => {
            let format = match format.as_deref() {
                Some("csv") => CorpusFormat::Csv,
                Some(_) => CorpusFormat::Json,
                None => CorpusFormat::from_path(&corpus),
            };
            let loaded = load_corpus(&corpus, format).map_err(data)?;
            for s in &loaded.skipped {
                log::warn!("line {}: skipped {:?}: {}", s.line, s.table_id, s.reason);
            }
            write_json_corpus(&loaded.entries, create(&out)?).map_err(data)?;
            eprintln!(
                "ingested {} tables, skipped {}",
                loaded.entries.len(),
                loaded.skipped.len()
            );
        }
        Command::MineTemplates { forms, out, provenance } => {
            let file =
                File::open(&forms).map_err(|e| Failure::Data(format!("cannot read {}: {e}", forms.display())))?;
            let lfs = read_logic_forms(BufReader::new(file))
                .map_err(|e| Failure::Data(format!("{}: {e}", forms.display())))?;
            let provenance = provenance.unwrap_or_else(|| forms.display().to_string());
            let dist = build_distribution(&lfs, provenance).map_err(data)?;
            save_distribution(&dist, &out).map_err(data)?;
            eprintln!("mined {} templates from {} logic forms", dist.len(), lfs.len());
        }
        Command::Synthesize { corpus, synth, out } => {
            let entries = load_entries(&corpus)?;
            let dist = load_dist(synth.dist.as_deref())?;
            let config = synth_config(&synth, seed);
            let tables = synthesize_corpus(&entries, &config, &dist);
            let shortfalls: Vec<Shortfall> = tables
                .iter()
                .flat_map(|t| {
                    t.result
                        .column_sets
                        .iter()
                        .filter(|s| s.shortfall > 0)
                        .map(|s| Shortfall {
                            table_id: t.table_id.clone(),
                            column_set: s.columns.clone(),
                            produced: s.forms.len(),
                            requested: config.candidates_per_column_set,
                        })
                })
                .collect();
            report_shortfalls(&shortfalls);
            write_candidates(&tables, create(&out)?).map_err(write_err(&out))?;
            let total: usize = tables.iter().map(|t| t.result.total()).sum();
            eprintln!(
                "synthesized {total} candidates for {} tables ({} column sets short)",
                tables.len(),
                shortfalls.len()
            );
        }
        Command::Realize {
            form,
            table,
            columns,
            phrases,
        } => {
            if form.is_none() && table.is_none() {
                return Err(Failure::Usage("realize needs --form and/or --table".into()));
            }
            if let Some(form) = form {
                let phrases = load_phrases(phrases.as_deref())?;
                let lf = parse_logic_form(&form).map_err(data)?;
                emit(to_readable_with(&lf, &phrases).text)?;
            }
            if let Some(path) = table {
                let t = load_table(&path).map_err(data)?;
                let cols = columns.unwrap_or_else(|| (0..t.num_columns()).collect());
                if let Some(bad) = cols.iter().find(|&&c| c >= t.num_columns()) {
                    return Err(Failure::Data(format!(
                        "column {bad} out of range; table has {} columns",
                        t.num_columns()
                    )));
                }
                emit(serialize_table(&t, &cols))?;
            }
        }
        Command::Execute { table, form } => {
            let t = load_table(&table).map_err(data)?;
            let lf = parse_logic_form(&form).map_err(data)?;
            let result = match type_check(&lf, &t) {
                Err(e) => Err(serde_json::json!({"error": e.to_string(), "kind": "type"})),
                Ok(_) => execute(&lf, &t).map_err(|e| e.to_json()),
            };
            match result {
                Ok(v) => emit(v.to_json())?,
                Err(e) => {
                    emit(&e)?;
                    return Err(Failure::Data(format!("execution failed: {}", e["error"])));
                }
            }
        }
        Command::Verify { table, form } => {
            let t = load_table(&table).map_err(data)?;
            let lf = parse_logic_form(&form).map_err(data)?;
            emit(serde_json::json!({"verified": verify(&lf, &t)}))?;
        }
        Command::Pipeline {
            corpus,
            synth,
            run,
            out,
            report,
        } => {
            let entries = load_entries(&corpus)?;
            let dist = load_dist(synth.dist.as_deref())?;
            let config = PipelineConfig {
                synth: synth_config(&synth, seed),
                k: run.k as usize,
                strategy: run.strategy,
                generator: hook_config(&run.generator, run.timeout, HookRole::Generator)?,
                verifier: hook_config(&run.verifier, run.timeout, HookRole::Verifier)?,
                phrases: load_phrases(run.phrases.as_deref())?,
            };
            let result = run_pipeline(&entries, &dist, &config).map_err(|e| Failure::Hook(e.to_string()))?;
            report_shortfalls(&result.report.shortfalls);
            write_output(&result.outputs, create(&out)?).map_err(write_err(&out))?;
            let json = result.report.to_json();
            match report {
                Some(p) => writeln!(create(&p)?, "{json}").map_err(write_err(&p))?,
                None => eprintln!("{json}"),
            }
            if !result.report.failures.is_empty() {
                return Err(Failure::Hook(format!(
                    "{} table(s) failed; see the run report",
                    result.report.failures.len()
                )));
            }
        }
        Command::Score { output, corpus, report } => {
            let entries = load_entries(&corpus)?;
            let file =
                File::open(&output).map_err(|e| Failure::Data(format!("cannot read {}: {e}", output.display())))?;
            let records =
                read_output(BufReader::new(file)).map_err(|e| Failure::Data(format!("{}: {e}", output.display())))?;
            let metrics = score(&records, &entries).map_err(data)?;
            match report {
                Some(p) => writeln!(create(&p)?, "{}", metrics.to_json()).map_err(write_err(&p))?,
                None => emit(metrics.to_json())?,
            }
        }
        Command::Demo { out, k, strategy } => {
            if k == 0 {
                return Err(Failure::Usage("--k must be at least 1".into()));
            }
            let demo = run_demo(DemoOptions { seed, k, strategy });
            let written = write_demo(&demo, &out).map_err(write_err(&out))?;
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            emit(demo.metrics.to_json())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
