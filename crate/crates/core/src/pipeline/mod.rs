//! End-to-end inference: synthesize candidates per table, turn them into
//! statements, keep the verified ones and sample the final output.
//!
//! Synthesis runs in parallel over tables. Hook stages run table by table
//! in `table_id` order with one request in flight, so output files never
//! depend on scheduling.

mod hook;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use hook::{CallFailure, HookCommand, HookConfig, HookError, HookProcess, HookRole, DEFAULT_HOOK_TIMEOUT};

use crate::dsl::{parse_logic_form, Category, LogicForm};
use crate::executor::Executor;
use crate::realize::{serialize_table, PhraseTable};
use crate::synth::{column_sets_for, synthesize_candidates, table_rng, SynthesisConfig, SynthesisResult};
use crate::table::{CorpusEntry, Table};
use crate::templates::TemplateDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifierKind {
    Execution,
    External,
}

/// A synthesized logic form bound to its table and column set.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub table_id: String,
    pub columns: Vec<usize>,
    pub form: LogicForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStatement {
    pub table_id: String,
    pub columns: Vec<usize>,
    pub logic_form: String,
    pub category: Category,
    pub statement: String,
    pub verified: bool,
    pub verifier: Option<VerifierKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    #[default]
    Random,
    /// One statement per distinct category first, then uniform fill.
    Stratified,
}

impl FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SamplingStrategy::Random),
            "stratified" => Ok(SamplingStrategy::Stratified),
            _ => Err(format!("unknown strategy {s:?}, expected random or stratified")),
        }
    }
}

/// An external hook plus its running process, restarted on demand after
/// the process dies.
pub struct Hook {
    config: HookConfig,
    process: Option<HookProcess>,
}

impl Hook {
    /// Launches external hooks immediately so an unlaunchable command fails
    /// before any work is done.
    pub fn start(config: HookConfig) -> Result<Self, HookError> {
        let mut hook = Hook { config, process: None };
        hook.process()?;
        Ok(hook)
    }

    pub fn config(&self) -> &HookConfig {
        &self.config
    }

    fn process(&mut self) -> Result<Option<&mut HookProcess>, HookError> {
        let HookCommand::External(argv) = &self.config.command else {
            return Ok(None);
        };
        if self.process.is_none() {
            self.process = Some(HookProcess::spawn(argv, self.config.timeout, self.config.role)?);
        }
        Ok(self.process.as_mut())
    }
}

/// Items kept by a stage and how many were dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageOutcome {
    pub kept: Vec<CandidateStatement>,
    pub dropped: usize,
}

/// Failure that ends processing of one table.
#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0} hook exited")]
    Exited(&'static str),
    #[error(transparent)]
    Launch(#[from] HookError),
}

fn drop_warning(role: HookRole, id: &str, failure: &CallFailure) {
    match failure {
        CallFailure::Timeout => log::warn!("{} hook timed out on {id}; item dropped", role.as_str()),
        CallFailure::Malformed(line) => {
            log::warn!(
                "{} hook sent a malformed response for {id}: {line:?}; item dropped",
                role.as_str()
            )
        }
        CallFailure::Exited => {}
    }
}

/// Renders each candidate as a statement, with the bundled phrase table or
/// the external generator.
pub fn generate_statements(
    table: &Table,
    candidates: &[Candidate],
    hook: &mut Hook,
    phrases: &PhraseTable,
) -> Result<StageOutcome, StageError> {
    let mut out = StageOutcome::default();
    for (i, c) in candidates.iter().enumerate() {
        let logic_form = c.form.canonical();
        let readable = phrases.render(&c.form);
        let statement = match hook.process()? {
            None => Some(readable),
            Some(process) => {
                let id = format!("{}#g{i}", c.table_id);
                let request = json!({
                    "id": id,
                    "table_text": serialize_table(table, &c.columns),
                    "logic_form": logic_form,
                    "readable": readable,
                });
                match process.call(&id, &request) {
                    Ok(resp) => match resp.get("statement").and_then(|s| s.as_str()) {
                        Some(s) if !s.trim().is_empty() => Some(s.to_string()),
                        _ => {
                            drop_warning(HookRole::Generator, &id, &CallFailure::Malformed(resp.to_string()));
                            None
                        }
                    },
                    Err(CallFailure::Exited) => {
                        hook.process = None;
                        return Err(StageError::Exited("generator"));
                    }
                    Err(f) => {
                        drop_warning(HookRole::Generator, &id, &f);
                        None
                    }
                }
            }
        };
        match statement {
            Some(statement) => out.kept.push(CandidateStatement {
                table_id: c.table_id.clone(),
                columns: c.columns.clone(),
                category: c.form.category(),
                logic_form,
                statement,
                verified: false,
                verifier: None,
            }),
            None => out.dropped += 1,
        }
    }
    Ok(out)
}

/// Keeps the statements judged faithful: by re-executing the logic form
/// (builtin) or by the external verifier's entailment decision.
pub fn verify_statements(
    table: &Table,
    batch: Vec<CandidateStatement>,
    hook: &mut Hook,
) -> Result<StageOutcome, StageError> {
    let exec = Executor::default();
    let mut out = StageOutcome::default();
    for (i, mut item) in batch.into_iter().enumerate() {
        let entailed = match hook.process()? {
            None => {
                item.verifier = Some(VerifierKind::Execution);
                parse_logic_form(&item.logic_form).is_ok_and(|lf| exec.verify(&lf, table))
            }
            Some(process) => {
                item.verifier = Some(VerifierKind::External);
                let id = format!("{}#v{i}", item.table_id);
                let request = json!({
                    "id": id,
                    "table_text": serialize_table(table, &item.columns),
                    "statement": item.statement,
                });
                match process.call(&id, &request) {
                    Ok(resp) => match resp.get("entailed").and_then(|e| e.as_bool()) {
                        Some(e) => e,
                        None => {
                            drop_warning(HookRole::Verifier, &id, &CallFailure::Malformed(resp.to_string()));
                            false
                        }
                    },
                    Err(CallFailure::Exited) => {
                        hook.process = None;
                        return Err(StageError::Exited("verifier"));
                    }
                    Err(f) => {
                        drop_warning(HookRole::Verifier, &id, &f);
                        false
                    }
                }
            }
        };
        if entailed {
            item.verified = true;
            out.kept.push(item);
        } else {
            out.dropped += 1;
        }
    }
    Ok(out)
}

/// Picks up to `k` statements. The result keeps the sampled order.
pub fn sample_outputs<R: Rng + ?Sized>(
    verified: &[CandidateStatement],
    k: usize,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Vec<CandidateStatement> {
    let take = k.min(verified.len());
    let picked: Vec<usize> = match strategy {
        SamplingStrategy::Random => index::sample(rng, verified.len(), take).into_vec(),
        SamplingStrategy::Stratified => {
            let mut by_category: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
            for (i, c) in verified.iter().enumerate() {
                by_category.entry(c.category).or_default().push(i);
            }
            let mut groups: Vec<Vec<usize>> = by_category.into_values().collect();
            groups.shuffle(rng);
            let mut picked: Vec<usize> = groups
                .iter()
                .take(take)
                .map(|g| *g.choose(rng).expect("groups are non-empty"))
                .collect();
            let chosen: HashSet<usize> = picked.iter().copied().collect();
            let mut rest: Vec<usize> = (0..verified.len()).filter(|i| !chosen.contains(i)).collect();
            rest.shuffle(rng);
            picked.extend(rest.into_iter().take(take - picked.len()));
            picked
        }
    };
    picked.into_iter().map(|i| verified[i].clone()).collect()
}

/// One line of the output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub table_id: String,
    pub statements: Vec<OutputStatement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputStatement {
    pub text: String,
    pub logic_form: String,
    pub category: Category,
}

impl OutputRecord {
    pub fn from_sample(table_id: &str, sample: &[CandidateStatement]) -> Self {
        OutputRecord {
            table_id: table_id.to_string(),
            statements: sample
                .iter()
                .map(|s| OutputStatement {
                    text: s.statement.clone(),
                    logic_form: s.logic_form.clone(),
                    category: s.category,
                })
                .collect(),
        }
    }
}

pub fn write_output(records: &[OutputRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn read_output(reader: impl BufRead) -> Result<Vec<OutputRecord>, OutputError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| OutputError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Synthesis results for one table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCandidates {
    pub table_id: String,
    pub result: SynthesisResult,
}

impl TableCandidates {
    /// All candidates, deduplicated across column sets by canonical form.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut seen = HashSet::new();
        self.result
            .forms()
            .filter(|(_, f)| seen.insert(f.canonical()))
            .map(|(cols, f)| Candidate {
                table_id: self.table_id.clone(),
                columns: cols.to_vec(),
                form: f.clone(),
            })
            .collect()
    }
}

/// One JSON line per candidate: table id, column set, canonical form and
/// category.
pub fn write_candidates(tables: &[TableCandidates], mut out: impl Write) -> std::io::Result<()> {
    for t in tables {
        for (columns, form) in t.result.forms() {
            let line = json!({
                "table_id": t.table_id,
                "column_set": columns,
                "logic_form": form.canonical(),
                "category": form.category(),
            });
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

/// Synthesizes every table in parallel. Output follows input order.
pub fn synthesize_corpus(
    entries: &[CorpusEntry],
    config: &SynthesisConfig,
    dist: &TemplateDistribution,
) -> Vec<TableCandidates> {
    entries
        .par_iter()
        .map(|e| {
            let sets = column_sets_for(&e.table, &e.selected_column_sets, config);
            TableCandidates {
                table_id: e.table.table_id().to_string(),
                result: synthesize_candidates(&e.table, &sets, config, dist),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub synth: SynthesisConfig,
    pub k: usize,
    pub strategy: SamplingStrategy,
    pub generator: HookConfig,
    pub verifier: HookConfig,
    pub phrases: PhraseTable,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            synth: SynthesisConfig::default(),
            k: 5,
            strategy: SamplingStrategy::Random,
            generator: HookConfig::builtin(HookRole::Generator),
            verifier: HookConfig::builtin(HookRole::Verifier),
            phrases: PhraseTable::bundled().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shortfall {
    pub table_id: String,
    pub column_set: Vec<usize>,
    pub produced: usize,
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableFailure {
    pub table_id: String,
    pub error: String,
}

/// Per-stage counts. `per_category` counts sampled statements.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunReport {
    pub tables: usize,
    pub synthesized: usize,
    pub generated: usize,
    pub verified: usize,
    pub sampled: usize,
    pub generation_dropped: usize,
    pub verification_dropped: usize,
    pub per_category: BTreeMap<Category, usize>,
    pub shortfalls: Vec<Shortfall>,
    pub failures: Vec<TableFailure>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug)]
pub struct PipelineRun {
    pub candidates: Vec<TableCandidates>,
    pub outputs: Vec<OutputRecord>,
    pub report: RunReport,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Hook(#[from] HookError),
}

/// Runs every stage over the corpus. Only an unlaunchable hook aborts the
/// run; other per-table problems are recorded in the report.
pub fn run_pipeline(
    entries: &[CorpusEntry],
    dist: &TemplateDistribution,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    let mut generator = Hook::start(config.generator.clone())?;
    let mut verifier = Hook::start(config.verifier.clone())?;

    let mut order: Vec<&CorpusEntry> = entries.iter().collect();
    order.sort_by(|a, b| a.table.table_id().cmp(b.table.table_id()));
    let sorted: Vec<CorpusEntry> = order.into_iter().cloned().collect();
    let candidates = synthesize_corpus(&sorted, &config.synth, dist);

    let mut report = RunReport {
        tables: sorted.len(),
        ..RunReport::default()
    };
    let mut outputs = Vec::with_capacity(sorted.len());
    for (entry, tc) in sorted.iter().zip(&candidates) {
        for set in &tc.result.column_sets {
            if set.shortfall > 0 {
                report.shortfalls.push(Shortfall {
                    table_id: tc.table_id.clone(),
                    column_set: set.columns.clone(),
                    produced: set.forms.len(),
                    requested: config.synth.candidates_per_column_set,
                });
            }
        }
        let batch = tc.candidates();
        report.synthesized += batch.len();
        let table = &entry.table;
        let staged = generate_statements(table, &batch, &mut generator, &config.phrases).and_then(|generated| {
            report.generated += generated.kept.len();
            report.generation_dropped += generated.dropped;
            verify_statements(table, generated.kept, &mut verifier)
        });
        let verified = match staged {
            Ok(v) => v,
            Err(StageError::Launch(e)) => return Err(e.into()),
            Err(e) => {
                log::warn!("table {}: {e}", tc.table_id);
                report.failures.push(TableFailure {
                    table_id: tc.table_id.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        report.verified += verified.kept.len();
        report.verification_dropped += verified.dropped;
        let mut rng = table_rng(config.synth.seed, &tc.table_id, "sample");
        let sample = sample_outputs(&verified.kept, config.k, config.strategy, &mut rng);
        report.sampled += sample.len();
        for s in &sample {
            *report.per_category.entry(s.category).or_default() += 1;
        }
        outputs.push(OutputRecord::from_sample(&tc.table_id, &sample));
    }
    Ok(PipelineRun {
        candidates,
        outputs,
        report,
    })
}

/// Distinct categories in a sample.
pub fn category_count(sample: &[CandidateStatement]) -> usize {
    sample.iter().map(|s| s.category).collect::<BTreeSet<_>>().len()
}
