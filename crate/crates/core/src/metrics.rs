//! Surface and diversity metrics for generated statements.
//!
//! BLEU uses per-sentence clipped n-gram precision with zero precisions
//! floored at `0.01 / candidate_length`, a brevity penalty against the
//! closest reference length, and an effective order of
//! `min(max_n, candidate_length)`. Scores are percentages.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{parse_logic_form, Category};
use crate::executor::verify;
use crate::pipeline::OutputRecord;
use crate::table::{CorpusEntry, Table};

/// Lowercases and splits on whitespace; every punctuation character is a
/// token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() || (!ch.is_alphanumeric() && !ch.is_whitespace()) {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_lowercase().collect());
            }
        } else {
            word.extend(ch.to_lowercase());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU of pre-tokenized input, as a percentage.
pub fn bleu_tokens(candidate: &[String], references: &[Vec<String>], max_n: usize) -> f64 {
    let len = candidate.len();
    if len == 0 || references.is_empty() || max_n == 0 {
        return 0.0;
    }
    let order = max_n.min(len);
    let epsilon = 0.01 / len as f64;
    let mut log_sum = 0.0;
    for n in 1..=order {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r, n) {
                let slot = max_ref.entry(g).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        let clipped: usize = cand.iter().map(|(g, &c)| c.min(*max_ref.get(g).unwrap_or(&0))).sum();
        let total = len + 1 - n;
        let p = if clipped == 0 {
            epsilon
        } else {
            clipped as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let closest = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .expect("references non-empty");
    let bp = if len > closest {
        1.0
    } else {
        (1.0 - closest as f64 / len as f64).exp()
    };
    100.0 * bp * (log_sum / order as f64).exp()
}

pub fn bleu(candidate: &str, references: &[String], max_n: usize) -> f64 {
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    bleu_tokens(&tokenize(candidate), &refs, max_n)
}

/// Mean sentence BLEU over `(candidate, references)` pairs.
pub fn corpus_bleu<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [String])>, max_n: usize) -> Option<f64> {
    let scores: Vec<f64> = pairs.into_iter().map(|(c, r)| bleu(c, r, max_n)).collect();
    mean(&scores)
}

/// Denominator for Distinct-n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistinctDenominator {
    /// Total token count over all statements.
    #[default]
    Tokens,
    /// Total n-gram count over all statements.
    Ngrams,
}

pub fn distinct_n(statements: &[String], n: usize) -> f64 {
    distinct_n_with(statements, n, DistinctDenominator::Tokens)
}

pub fn distinct_n_with(statements: &[String], n: usize, denominator: DistinctDenominator) -> f64 {
    let mut distinct: HashSet<Vec<String>> = HashSet::new();
    let mut tokens = 0usize;
    let mut ngrams = 0usize;
    for s in statements {
        let t = tokenize(s);
        tokens += t.len();
        if n > 0 && t.len() >= n {
            ngrams += t.len() + 1 - n;
            distinct.extend(t.windows(n).map(<[String]>::to_vec));
        }
    }
    let denom = match denominator {
        DistinctDenominator::Tokens => tokens,
        DistinctDenominator::Ngrams => ngrams,
    };
    if denom == 0 {
        0.0
    } else {
        distinct.len() as f64 / denom as f64
    }
}

/// Mean BLEU-n of each statement against all the others. `None` with fewer
/// than two statements.
pub fn self_bleu(statements: &[String], n: usize) -> Option<f64> {
    if statements.len() < 2 {
        return None;
    }
    let toks: Vec<Vec<String>> = statements.iter().map(|s| tokenize(s)).collect();
    let scores: Vec<f64> = (0..toks.len())
        .map(|i| {
            let others: Vec<Vec<String>> = toks
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, t)| t.clone())
                .collect();
            bleu_tokens(&toks[i], &others, n)
        })
        .collect();
    mean(&scores)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogicDiversity {
    pub category_count: usize,
    pub column_coverage: f64,
    /// Forms that failed to parse and were left out.
    pub skipped: usize,
}

/// Distinct root categories and the fraction of table columns referenced.
pub fn logic_diversity<'a>(forms: impl IntoIterator<Item = &'a str>, table: &Table) -> LogicDiversity {
    let mut categories: BTreeSet<Category> = BTreeSet::new();
    let mut columns: BTreeSet<usize> = BTreeSet::new();
    let mut skipped = 0;
    for text in forms {
        let Ok(lf) = parse_logic_form(text) else {
            skipped += 1;
            continue;
        };
        categories.insert(lf.category());
        columns.extend(lf.columns().into_iter().filter_map(|c| table.column_index(c)));
    }
    let column_coverage = if table.num_columns() == 0 {
        0.0
    } else {
        columns.len() as f64 / table.num_columns() as f64
    };
    LogicDiversity {
        category_count: categories.len(),
        column_coverage,
        skipped,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Aggregate scores for one output file. Diversity metrics are computed
/// per table and averaged over tables; BLEU is averaged over statements
/// whose table has references.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tables: usize,
    pub statements: usize,
    pub bleu_1: Option<f64>,
    pub bleu_2: Option<f64>,
    pub bleu_3: Option<f64>,
    pub distinct_2: Option<f64>,
    pub self_bleu_4: Option<f64>,
    pub category_coverage: Option<f64>,
    pub column_coverage: Option<f64>,
    /// Fraction of output logic forms that execute to true on their table.
    pub execution_faithfulness: Option<f64>,
    pub unparseable_forms: usize,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("output refers to table {0:?}, which is not in the corpus")]
    UnknownTable(String),
}

pub fn score(outputs: &[OutputRecord], corpus: &[CorpusEntry]) -> Result<MetricsReport, ScoreError> {
    let by_id: HashMap<&str, &CorpusEntry> = corpus.iter().map(|e| (e.table.table_id(), e)).collect();
    let mut bleu_pairs: Vec<(&str, &[String])> = Vec::new();
    let mut distinct = Vec::new();
    let mut self_bleus = Vec::new();
    let mut categories = Vec::new();
    let mut coverages = Vec::new();
    let mut faithful = 0usize;
    let mut statements = 0usize;
    let mut unparseable = 0usize;
    for rec in outputs {
        let entry = by_id
            .get(rec.table_id.as_str())
            .ok_or_else(|| ScoreError::UnknownTable(rec.table_id.clone()))?;
        let texts: Vec<String> = rec.statements.iter().map(|s| s.text.clone()).collect();
        statements += texts.len();
        if !entry.references.is_empty() {
            bleu_pairs.extend(
                rec.statements
                    .iter()
                    .map(|s| (s.text.as_str(), entry.references.as_slice())),
            );
        }
        if texts.is_empty() {
            continue;
        }
        distinct.push(distinct_n(&texts, 2));
        if let Some(sb) = self_bleu(&texts, 4) {
            self_bleus.push(sb);
        }
        let div = logic_diversity(rec.statements.iter().map(|s| s.logic_form.as_str()), &entry.table);
        unparseable += div.skipped;
        categories.push(div.category_count as f64);
        coverages.push(div.column_coverage);
        faithful += rec
            .statements
            .iter()
            .filter(|s| parse_logic_form(&s.logic_form).is_ok_and(|lf| verify(&lf, &entry.table)))
            .count();
    }
    Ok(MetricsReport {
        tables: outputs.len(),
        statements,
        bleu_1: corpus_bleu(bleu_pairs.iter().copied(), 1),
        bleu_2: corpus_bleu(bleu_pairs.iter().copied(), 2),
        bleu_3: corpus_bleu(bleu_pairs.iter().copied(), 3),
        distinct_2: mean(&distinct),
        self_bleu_4: mean(&self_bleus),
        category_coverage: mean(&categories),
        column_coverage: mean(&coverages),
        execution_faithfulness: (statements > 0).then(|| faithful as f64 / statements as f64),
        unparseable_forms: unparseable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("There are 3 rows."), s(&["there", "are", "3", "rows", "."]));
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("a,b"), s(&["a", ",", "b"]));
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        for n in 1..=4 {
            assert!((bleu("the cat sat", &s(&["the cat sat"]), n) - 100.0).abs() < 1e-9);
        }
        let near_zero = bleu("x y z", &s(&["a b c"]), 1);
        assert!(near_zero > 0.0 && near_zero < 1.0);
        assert_eq!(bleu("", &s(&["a"]), 2), 0.0);
    }

    #[test]
    fn bleu_unigram_precision() {
        assert!((bleu("a b c d", &s(&["a b x d"]), 1) - 75.0).abs() < 1e-9);
    }

    #[test]
    fn brevity_penalty_uses_closest_reference() {
        // candidate of 2 tokens, closest reference 4 tokens: bp = e^(1 - 2)
        let got = bleu("a b", &s(&["a b c d", "a b c d e f g h"]), 1);
        assert!((got - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn distinct_counts() {
        assert!((distinct_n(&s(&["a b", "a b"]), 2) - 0.25).abs() < 1e-12);
        assert!((distinct_n(&s(&["a b c"]), 2) - 2.0 / 3.0).abs() < 1e-12);
        assert!((distinct_n_with(&s(&["a b c"]), 2, DistinctDenominator::Ngrams) - 1.0).abs() < 1e-12);
        assert_eq!(distinct_n(&s(&["", ""]), 2), 0.0);
        let same = s(&["a b c"; 5]);
        let diff = s(&["a b c", "d e f", "g h i", "j k l", "m n o"]);
        assert!(distinct_n(&diff, 2) > distinct_n(&same, 2));
    }

    #[test]
    fn self_bleu_cases() {
        assert_eq!(self_bleu(&s(&["only one"]), 4), None);
        let same = s(&["the team won the cup"; 5]);
        assert!((self_bleu(&same, 4).unwrap() - 100.0).abs() < 1e-9);
        let disjoint = s(&["a b c d", "e f g h", "i j k l"]);
        assert!(self_bleu(&disjoint, 4).unwrap() < 1.0);
    }

    #[test]
    fn logic_diversity_counts() {
        let t = Table::from_raw("t", "", &["a", "b", "c", "d"], &[vec!["1", "2", "3", "4"]]).unwrap();
        let forms = [
            "eq { count { all_rows } ; 1 }",
            "eq { count { filter_eq { all_rows ; a ; 1 } } ; 1 }",
            "nope {",
        ];
        let d = logic_diversity(forms, &t);
        assert_eq!(d.category_count, 1);
        assert!((d.column_coverage - 0.25).abs() < 1e-12);
        assert_eq!(d.skipped, 1);
    }
}
