//! Readable renderings of logic forms and the linear table serialization
//! fed to statement generators.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

use crate::dsl::{ArgKind, LogicForm, CATALOG};
use crate::table::Table;

const DEFAULT_PHRASES: &str = include_str!("../data/phrases.json");

/// Key for the whole-table view.
const ALL_ROWS_KEY: &str = "all_rows";
/// Key for the suffix appended when a pattern has no `{inner}` slot but its
/// view argument is not the whole table.
const SCOPE_KEY: &str = "_scope";

#[derive(Debug, Error, PartialEq)]
pub enum PhraseError {
    #[error("malformed phrase table: {0}")]
    Malformed(String),
    #[error("phrase table has no entry for {0:?}")]
    Missing(String),
    #[error("pattern for {key:?} {problem}")]
    BadPattern { key: String, problem: String },
    #[error("cannot read phrase table {path}: {message}")]
    Io { path: String, message: String },
}

/// Per-function patterns with `{col}`, `{obj}`, `{inner}`, `{left}` and
/// `{right}` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTable {
    patterns: HashMap<String, String>,
}

/// A logic form with its English rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadableForm {
    pub text: String,
    pub source: LogicForm,
}

fn slot_names(kinds: &[ArgKind]) -> Vec<&'static str> {
    if kinds.len() == 2 && !matches!(kinds[1], ArgKind::Header | ArgKind::NumericHeader) {
        return vec!["left", "right"];
    }
    kinds
        .iter()
        .map(|k| match k {
            ArgKind::View => "inner",
            ArgKind::Header | ArgKind::NumericHeader => "col",
            ArgKind::Object | ArgKind::Ordinal => "obj",
            ArgKind::Bool => "left",
        })
        .collect()
}

/// Slot names appearing in `pattern`, in order.
fn pattern_slots(pattern: &str) -> Result<Vec<&str>, String> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(start) = rest.find('{') {
        let end = rest[start..].find('}').ok_or("has an unclosed slot")? + start;
        out.push(&rest[start + 1..end]);
        rest = &rest[end + 1..];
    }
    if rest.contains('}') {
        return Err("has an unmatched '}'".into());
    }
    Ok(out)
}

fn expand(pattern: &str, slots: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(pattern.len() + 32);
    let mut rest = pattern;
    while let Some(start) = rest.find('{') {
        let end = rest[start..].find('}').expect("validated") + start;
        out.push_str(&rest[..start]);
        let name = &rest[start + 1..end];
        if let Some((_, v)) = slots.iter().find(|(n, _)| *n == name) {
            out.push_str(v);
        }
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

impl PhraseTable {
    pub fn from_json(text: &str) -> Result<Self, PhraseError> {
        let patterns: HashMap<String, String> =
            serde_json::from_str(text).map_err(|e| PhraseError::Malformed(e.to_string()))?;
        let bad = |key: &str, problem: String| PhraseError::BadPattern {
            key: key.to_string(),
            problem,
        };
        let get = |key: &str| patterns.get(key).ok_or_else(|| PhraseError::Missing(key.to_string()));
        if !pattern_slots(get(ALL_ROWS_KEY)?)
            .map_err(|p| bad(ALL_ROWS_KEY, p))?
            .is_empty()
        {
            return Err(bad(ALL_ROWS_KEY, "must not contain slots".into()));
        }
        if pattern_slots(get(SCOPE_KEY)?).map_err(|p| bad(SCOPE_KEY, p))? != ["inner"] {
            return Err(bad(SCOPE_KEY, "must contain exactly one {inner} slot".into()));
        }
        for sig in CATALOG {
            let pattern = get(sig.name)?;
            let found = pattern_slots(pattern).map_err(|p| bad(sig.name, p))?;
            let allowed = slot_names(sig.args);
            for slot in &found {
                if !allowed.contains(slot) {
                    return Err(bad(sig.name, format!("uses unknown slot {{{slot}}}")));
                }
            }
            for slot in &allowed {
                let count = found.iter().filter(|s| *s == slot).count();
                if *slot != "inner" && count != 1 {
                    return Err(bad(sig.name, format!("must contain {{{slot}}} exactly once")));
                }
                if count > 1 {
                    return Err(bad(sig.name, format!("repeats {{{slot}}}")));
                }
            }
        }
        Ok(PhraseTable { patterns })
    }

    pub fn load(path: &Path) -> Result<Self, PhraseError> {
        let text = std::fs::read_to_string(path).map_err(|e| PhraseError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn bundled() -> &'static PhraseTable {
        static TABLE: OnceLock<PhraseTable> = OnceLock::new();
        TABLE.get_or_init(|| PhraseTable::from_json(DEFAULT_PHRASES).expect("bundled phrase table is valid"))
    }

    pub fn render(&self, lf: &LogicForm) -> String {
        match lf {
            LogicForm::AllRows => self.patterns[ALL_ROWS_KEY].clone(),
            LogicForm::Column(c) => c.clone(),
            LogicForm::Literal(l) => l.clone(),
            LogicForm::Apply(f, args) => {
                let pattern = &self.patterns[f.name()];
                let names = slot_names(f.args());
                let slots: Vec<(&str, String)> = names
                    .iter()
                    .zip(args.iter().zip(f.args()))
                    .map(|(&name, (arg, kind))| {
                        let text = self.render(arg);
                        let text = match kind {
                            ArgKind::Ordinal => ordinal_word(&text),
                            _ => text,
                        };
                        (name, text)
                    })
                    .collect();
                let mut out = expand(pattern, &slots);
                let has_inner = pattern_slots(pattern).is_ok_and(|s| s.contains(&"inner"));
                if !has_inner {
                    if let Some((_, inner)) = slots.iter().find(|(n, _)| *n == "inner") {
                        if args[0] != LogicForm::AllRows {
                            out.push_str(&expand(&self.patterns[SCOPE_KEY], &[("inner", inner.clone())]));
                        }
                    }
                }
                out
            }
        }
    }
}

/// `1` → `1st`, `12` → `12th`, `23` → `23rd`; other text passes through.
pub fn ordinal_word(text: &str) -> String {
    let Ok(n) = text.parse::<u64>() else {
        return text.to_string();
    };
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

pub fn to_readable(lf: &LogicForm) -> ReadableForm {
    to_readable_with(lf, PhraseTable::bundled())
}

pub fn to_readable_with(lf: &LogicForm, phrases: &PhraseTable) -> ReadableForm {
    ReadableForm {
        text: phrases.render(lf),
        source: lf.clone(),
    }
}

/// `title : T | col : h1 | h2 || row 1 : v11 | v12 || ...`, restricted to
/// `columns` in the given order. Out-of-range indices are skipped.
pub fn serialize_table(table: &Table, columns: &[usize]) -> String {
    let columns: Vec<usize> = columns.iter().copied().filter(|&c| c < table.num_columns()).collect();
    let headers: Vec<&str> = columns.iter().map(|&c| table.headers()[c].as_str()).collect();
    let mut out = format!("title : {} | col : {}", table.title(), headers.join(" | "));
    for r in 0..table.num_rows() {
        let cells: Vec<&str> = columns.iter().map(|&c| table.cell(r, c).text()).collect();
        out.push_str(&format!(" || row {} : {}", r + 1, cells.join(" | ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_logic_form;

    fn render(s: &str) -> String {
        to_readable(&parse_logic_form(s).unwrap()).text
    }

    fn mt() -> Table {
        Table::from_raw(
            "mt",
            "mt",
            &["team", "points"],
            &[vec!["a", "3"], vec!["b", "5"], vec!["c", "2"]],
        )
        .unwrap()
    }

    #[test]
    fn renders_reference_examples() {
        assert_eq!(
            render("eq { count { filter_eq { all_rows ; team ; a } } ; 1 }"),
            "the number of rows whose team is a is equal to 1"
        );
        assert_eq!(
            render("hop { argmax { all_rows ; points } ; team }"),
            "the team of the row with the highest points"
        );
    }

    #[test]
    fn scoped_superlatives_mention_their_scope() {
        assert_eq!(
            render("hop { nth_argmin { filter_eq { all_rows ; team ; a } ; points ; 2 } ; team }"),
            "the team of the row with the 2nd lowest points among rows whose team is a"
        );
    }

    #[test]
    fn ordinal_suffixes() {
        let got: Vec<String> = ["1", "2", "3", "4", "11", "12", "13", "21", "102", "x"]
            .iter()
            .map(|s| ordinal_word(s))
            .collect();
        assert_eq!(
            got,
            ["1st", "2nd", "3rd", "4th", "11th", "12th", "13th", "21st", "102nd", "x"]
        );
    }

    #[test]
    fn slot_text_is_not_reexpanded() {
        assert_eq!(render("eq { \\{col\\} ; \\{right\\} }"), "{col} is equal to {right}");
    }

    #[test]
    fn serializes_tables() {
        let t = mt();
        assert_eq!(
            serialize_table(&t, &[0, 1]),
            "title : mt | col : team | points || row 1 : a | 3 || row 2 : b | 5 || row 3 : c | 2"
        );
        assert_eq!(
            serialize_table(&t, &[1]),
            "title : mt | col : points || row 1 : 3 || row 2 : 5 || row 3 : 2"
        );
        let untitled = Table::from_raw("u", "", &["x"], &[vec!["1"]]).unwrap();
        assert_eq!(serialize_table(&untitled, &[0]), "title :  | col : x || row 1 : 1");
    }

    #[test]
    fn phrase_table_validation() {
        assert!(PhraseTable::from_json("{}").is_err());
        let mut map: HashMap<String, String> = serde_json::from_str(DEFAULT_PHRASES).unwrap();
        map.insert("hop".into(), "the value of {inner}".into());
        let text = serde_json::to_string(&map).unwrap();
        assert!(matches!(
            PhraseTable::from_json(&text),
            Err(PhraseError::BadPattern { .. })
        ));
        map.insert("hop".into(), "the {col} of {inner} {obj}".into());
        let text = serde_json::to_string(&map).unwrap();
        assert!(matches!(
            PhraseTable::from_json(&text),
            Err(PhraseError::BadPattern { .. })
        ));
    }

    #[test]
    fn custom_phrases_override_wording() {
        let mut map: HashMap<String, String> = serde_json::from_str(DEFAULT_PHRASES).unwrap();
        map.insert("count".into(), "how many {inner}".into());
        let phrases = PhraseTable::from_json(&serde_json::to_string(&map).unwrap()).unwrap();
        let lf = parse_logic_form("count { all_rows }").unwrap();
        assert_eq!(to_readable_with(&lf, &phrases).text, "how many rows");
    }
}
