//! Self-contained run over the bundled corpus: mine templates from the
//! bundled example forms, synthesize, generate and verify with builtin
//! hooks, sample and score.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dsl::LogicForm;
use crate::metrics::{score, MetricsReport};
use crate::pipeline::{run_pipeline, write_candidates, write_output, PipelineConfig, PipelineRun, SamplingStrategy};
use crate::table::{read_json_corpus, write_json_corpus, CorpusEntry};
use crate::templates::{build_distribution, read_logic_forms, TemplateDistribution};

const DEMO_CORPUS: &str = include_str!("../data/demo_corpus.jsonl");
const DEMO_FORMS: &str = include_str!("../data/demo_forms.txt");

pub fn demo_corpus() -> Vec<CorpusEntry> {
    let loaded = read_json_corpus(DEMO_CORPUS.as_bytes(), "demo_corpus.jsonl").expect("bundled corpus parses");
    assert!(loaded.skipped.is_empty(), "bundled corpus is clean");
    loaded.entries
}

pub fn demo_forms() -> Vec<LogicForm> {
    read_logic_forms(DEMO_FORMS.as_bytes()).expect("bundled forms parse")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoOptions {
    pub seed: u64,
    pub k: usize,
    pub strategy: SamplingStrategy,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            seed: 13,
            k: 5,
            strategy: SamplingStrategy::Random,
        }
    }
}

#[derive(Debug)]
pub struct DemoRun {
    pub corpus: Vec<CorpusEntry>,
    pub distribution: TemplateDistribution,
    pub run: PipelineRun,
    pub metrics: MetricsReport,
}

pub fn run_demo(options: DemoOptions) -> DemoRun {
    let corpus = demo_corpus();
    let distribution = build_distribution(&demo_forms(), "demo_forms.txt").expect("bundled forms are non-empty");
    let mut config = PipelineConfig {
        k: options.k,
        strategy: options.strategy,
        ..PipelineConfig::default()
    };
    config.synth.seed = options.seed;
    let run = run_pipeline(&corpus, &distribution, &config).expect("builtin hooks always launch");
    let metrics = score(&run.outputs, &corpus).expect("outputs come from the corpus");
    DemoRun {
        corpus,
        distribution,
        run,
        metrics,
    }
}

/// Writes every artifact of `demo` into `dir` and returns the paths.
pub fn write_demo(demo: &DemoRun, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: &str| -> io::Result<BufWriter<File>> {
        let path = dir.join(name);
        written.push(path.clone());
        Ok(BufWriter::new(File::create(path)?))
    };
    write_json_corpus(&demo.corpus, create("corpus.jsonl")?).map_err(io::Error::other)?;
    writeln!(create("templates.json")?, "{}", demo.distribution.to_json())?;
    write_candidates(&demo.run.candidates, create("candidates.jsonl")?)?;
    write_output(&demo.run.outputs, create("output.jsonl")?)?;
    writeln!(create("run_report.json")?, "{}", demo.run.report.to_json())?;
    writeln!(create("metrics.json")?, "{}", demo.metrics.to_json())?;
    Ok(written)
}
