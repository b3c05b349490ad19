//! Logic-form templates: entity masking, function grouping and the weighted
//! template distribution that drives synthesis.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_raw, ArgKind, Category, Function, Group, LogicForm, ParseError, RawNode, ValueType};

/// Template tree. Placeholders are numbered from 1, left to right, with a
/// separate counter per kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Skeleton {
    Apply(Group, Vec<Skeleton>),
    AllRows,
    Col(usize),
    Obj(usize),
    Ord(usize),
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Skeleton::Apply(g, args) => {
                write!(f, "{} {{ ", g.token())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(" }")
            }
            Skeleton::AllRows => f.write_str("all_rows"),
            Skeleton::Col(i) => write!(f, "COL_{i}"),
            Skeleton::Obj(i) => write!(f, "OBJ_{i}"),
            Skeleton::Ord(i) => write!(f, "ORD_{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    skeleton: Skeleton,
    category: Category,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.skeleton.fmt(f)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown function group {0:?}")]
    UnknownGroup(String),
    #[error("invalid template: {0}")]
    Invalid(String),
    #[error("cannot build a distribution from an empty corpus")]
    EmptyCorpus,
    #[error("malformed distribution file: {0}")]
    Malformed(String),
    #[error("cannot access distribution file {path}: {message}")]
    Io { path: String, message: String },
}

/// Whether a literal at `position` of `function` is an ordinal-like
/// placeholder: the `n` of `nth_*`, or a number compared against a count.
fn is_ordinal_position(function_args: &[ArgKind], position: usize, sibling_is_count: bool) -> bool {
    function_args[position] == ArgKind::Ordinal
        || (function_args == [ArgKind::Object, ArgKind::Object] && sibling_is_count)
}

/// Masks columns and literals and replaces functions by their groups.
pub fn abstract_form(lf: &LogicForm) -> Template {
    let mut counters = [0usize; 3];
    let skeleton = mask(lf, &mut counters, false);
    let category = skeleton_category(&skeleton);
    Template { skeleton, category }
}

fn mask(lf: &LogicForm, counters: &mut [usize; 3], ordinal: bool) -> Skeleton {
    match lf {
        LogicForm::Apply(f, args) => {
            let kinds = f.args();
            let masked = args
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let sibling_is_count = args.len() == 2 && args[1 - i].function() == Some(Function::Count);
                    let ord = kinds
                        .get(i)
                        .is_some_and(|_| is_ordinal_position(kinds, i, sibling_is_count));
                    mask(a, counters, ord)
                })
                .collect();
            Skeleton::Apply(f.group(), masked)
        }
        LogicForm::AllRows => Skeleton::AllRows,
        LogicForm::Column(_) => {
            counters[0] += 1;
            Skeleton::Col(counters[0])
        }
        LogicForm::Literal(_) if ordinal => {
            counters[2] += 1;
            Skeleton::Ord(counters[2])
        }
        LogicForm::Literal(_) => {
            counters[1] += 1;
            Skeleton::Obj(counters[1])
        }
    }
}

fn skeleton_category(s: &Skeleton) -> Category {
    let Skeleton::Apply(g, args) = s else {
        return Category::Other;
    };
    if matches!(g, Group::CompareEq | Group::CompareRound) {
        let is_lit = |a: &Skeleton| matches!(a, Skeleton::Obj(_) | Skeleton::Ord(_));
        let quantity = match (&args[0], &args[1]) {
            (a, other) | (other, a) if is_lit(a) && matches!(other, Skeleton::Apply(..)) => Some(other),
            _ => None,
        };
        if let Some(Skeleton::Apply(inner, inner_args)) = quantity {
            return match (inner, inner_args.first()) {
                (Group::Hop, Some(Skeleton::Apply(view, _))) => view.signature().category,
                (Group::Hop, _) => Category::Other,
                (other, _) => other.signature().category,
            };
        }
    }
    g.signature().category
}

impl Template {
    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn category(&self) -> Category {
        self.category
    }

    /// Parses and validates a skeleton string such as
    /// `hop { SUPER_ARG { all_rows ; COL_1 } ; COL_2 }`.
    pub fn parse(text: &str) -> Result<Template, TemplateError> {
        let skeleton = from_raw(parse_raw(text)?)?;
        let mut counters = [0usize; 3];
        validate(&skeleton, None, false, &mut counters)?;
        let category = skeleton_category(&skeleton);
        Ok(Template { skeleton, category })
    }
}

fn from_raw(node: RawNode) -> Result<Skeleton, TemplateError> {
    match node {
        RawNode::Apply { name, args, .. } => {
            let group = Group::from_token(&name).ok_or(TemplateError::UnknownGroup(name))?;
            let expected = group.signature().args.len();
            if args.len() != expected {
                return Err(TemplateError::Invalid(format!(
                    "{} takes {expected} argument(s), found {}",
                    group.token(),
                    args.len()
                )));
            }
            Ok(Skeleton::Apply(
                group,
                args.into_iter().map(from_raw).collect::<Result<_, _>>()?,
            ))
        }
        RawNode::Atom {
            text, escaped: false, ..
        } if text == "all_rows" => Ok(Skeleton::AllRows),
        RawNode::Atom { text, .. } => {
            let placeholder = text.split_once('_').and_then(|(kind, n)| {
                let n: usize = n.parse().ok().filter(|&n| n >= 1)?;
                match kind {
                    "COL" => Some(Skeleton::Col(n)),
                    "OBJ" => Some(Skeleton::Obj(n)),
                    "ORD" => Some(Skeleton::Ord(n)),
                    _ => None,
                }
            });
            placeholder.ok_or_else(|| TemplateError::Invalid(format!("unexpected atom {text:?}")))
        }
    }
}

fn result_type(s: &Skeleton) -> Option<ValueType> {
    match s {
        Skeleton::Apply(g, _) => Some(g.signature().returns),
        Skeleton::AllRows => Some(ValueType::View),
        _ => None,
    }
}

/// Checks slot compatibility and placeholder numbering, mirroring the rules
/// `abstract_form` uses so every valid template is closed under
/// instantiate-then-abstract.
fn validate(
    s: &Skeleton,
    slot: Option<ArgKind>,
    ordinal: bool,
    counters: &mut [usize; 3],
) -> Result<(), TemplateError> {
    let invalid = |msg: String| Err(TemplateError::Invalid(msg));
    let mut number = |idx: usize, n: usize, name: &str| {
        counters[idx] += 1;
        if counters[idx] == n {
            Ok(())
        } else {
            invalid(format!("{name}_{n} out of order, expected {name}_{}", counters[idx]))
        }
    };
    match (s, slot) {
        (Skeleton::Col(n), Some(ArgKind::Header | ArgKind::NumericHeader)) => number(0, *n, "COL"),
        (Skeleton::Col(_), _) => invalid(format!("{s} outside a header position")),
        (Skeleton::Obj(n), Some(ArgKind::Object)) if !ordinal => number(1, *n, "OBJ"),
        (Skeleton::Ord(n), Some(ArgKind::Object | ArgKind::Ordinal)) if ordinal => number(2, *n, "ORD"),
        (Skeleton::Obj(_) | Skeleton::Ord(_), _) => invalid(format!("{s} in the wrong position")),
        (Skeleton::AllRows | Skeleton::Apply(..), Some(kind)) => {
            let ty = result_type(s).expect("node has a type");
            let ok = match kind {
                ArgKind::View => ty.is_view(),
                ArgKind::Object => ty.is_object(),
                ArgKind::Bool => ty == ValueType::Bool,
                ArgKind::Header | ArgKind::NumericHeader | ArgKind::Ordinal => false,
            };
            if !ok {
                return invalid(format!("{s} cannot fill a {kind:?} slot"));
            }
            validate_children(s, counters)
        }
        (_, None) => validate_children(s, counters),
    }
}

fn validate_children(s: &Skeleton, counters: &mut [usize; 3]) -> Result<(), TemplateError> {
    let Skeleton::Apply(g, args) = s else {
        return match s {
            Skeleton::AllRows => Ok(()),
            _ => Err(TemplateError::Invalid(format!("{s} cannot stand alone"))),
        };
    };
    let kinds = g.signature().args;
    for (i, a) in args.iter().enumerate() {
        let sibling_is_count = args.len() == 2 && matches!(&args[1 - i], Skeleton::Apply(Group::Count, _));
        validate(
            a,
            Some(kinds[i]),
            is_ordinal_position(kinds, i, sibling_is_count),
            counters,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTemplate {
    pub template: Template,
    pub weight: f64,
}

/// Templates with sampling weights that sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDistribution {
    provenance: String,
    entries: Vec<WeightedTemplate>,
}

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl TemplateDistribution {
    pub fn new(provenance: impl Into<String>, entries: Vec<WeightedTemplate>) -> Result<Self, TemplateError> {
        if entries.is_empty() {
            return Err(TemplateError::Malformed("no templates".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(TemplateError::Malformed(format!(
                    "weight {} of {} is not positive",
                    e.weight, e.template
                )));
            }
            if !seen.insert(e.template.to_string()) {
                return Err(TemplateError::Malformed(format!("duplicate template {}", e.template)));
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(TemplateError::Malformed(format!("weights sum to {total}, not 1")));
        }
        Ok(TemplateDistribution {
            provenance: provenance.into(),
            entries,
        })
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn entries(&self) -> &[WeightedTemplate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One hand-written template per reasoning operation, equally weighted.
    pub fn bundled_default() -> Self {
        let entries: Vec<WeightedTemplate> = DEFAULT_TEMPLATES
            .iter()
            .map(|s| WeightedTemplate {
                template: Template::parse(s).expect("bundled template is valid"),
                weight: 1.0 / DEFAULT_TEMPLATES.len() as f64,
            })
            .collect();
        TemplateDistribution::new("bundled-default", entries).expect("bundled distribution is valid")
    }

    pub fn to_json(&self) -> String {
        let file = DistributionFile {
            provenance: self.provenance.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| EntryRecord {
                    skeleton: e.template.to_string(),
                    category: e.template.category(),
                    weight: e.weight,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let file: DistributionFile = serde_json::from_str(text).map_err(|e| TemplateError::Malformed(e.to_string()))?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for rec in file.entries {
            let template = Template::parse(&rec.skeleton)?;
            if template.category() != rec.category {
                return Err(TemplateError::Malformed(format!(
                    "{} is {}, file says {}",
                    rec.skeleton,
                    template.category(),
                    rec.category
                )));
            }
            entries.push(WeightedTemplate {
                template,
                weight: rec.weight,
            });
        }
        TemplateDistribution::new(file.provenance, entries)
    }
}

/// The hand-written default templates, one per reasoning operation.
pub const DEFAULT_TEMPLATES: [&str; 8] = [
    "only { FILTER { all_rows ; COL_1 ; OBJ_1 } }",
    "round_eq { AGGREGATION { FILTER { all_rows ; COL_1 ; OBJ_1 } ; COL_2 } ; OBJ_2 }",
    "COMPARE_EQ { count { FILTER { all_rows ; COL_1 ; OBJ_1 } } ; ORD_1 }",
    "COMPARE_EQ { hop { ORD_ARG { all_rows ; COL_1 ; ORD_1 } ; COL_2 } ; OBJ_1 }",
    "COMPARE_GT { hop { FILTER { all_rows ; COL_1 ; OBJ_1 } ; COL_2 } ; hop { FILTER { all_rows ; COL_3 ; OBJ_2 } ; COL_4 } }",
    "MAJORITY_MOST_GT { FILTER { all_rows ; COL_1 ; OBJ_1 } ; COL_2 ; OBJ_2 }",
    "COMPARE_EQ { hop { FILTER { FILTER { all_rows ; COL_1 ; OBJ_1 } ; COL_2 ; OBJ_2 } ; COL_3 } ; OBJ_3 }",
    "and { COMPARE_EQ { hop { SUPER_ARG { all_rows ; COL_1 } ; COL_2 } ; OBJ_1 } ; COMPARE_EQ { hop { SUPER_ARG { all_rows ; COL_3 } ; COL_4 } ; OBJ_2 } }",
];

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    provenance: String,
    entries: Vec<EntryRecord>,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    skeleton: String,
    category: Category,
    weight: f64,
}

/// Weight of each template is its share of the corpus. Entries are sorted
/// by descending weight, then skeleton text.
pub fn build_distribution(
    corpus: &[LogicForm],
    provenance: impl Into<String>,
) -> Result<TemplateDistribution, TemplateError> {
    if corpus.is_empty() {
        return Err(TemplateError::EmptyCorpus);
    }
    let mut counts: BTreeMap<String, (Template, usize)> = BTreeMap::new();
    for lf in corpus {
        if !matches!(lf, LogicForm::Apply(..)) {
            return Err(TemplateError::Invalid(format!("{lf} is not a function application")));
        }
        let t = abstract_form(lf);
        counts.entry(t.to_string()).or_insert((t, 0)).1 += 1;
    }
    let n = corpus.len() as f64;
    let mut ranked: Vec<(String, Template, usize)> = counts.into_iter().map(|(k, (t, c))| (k, t, c)).collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    let entries = ranked
        .into_iter()
        .map(|(_, template, c)| WeightedTemplate {
            template,
            weight: c as f64 / n,
        })
        .collect();
    TemplateDistribution::new(provenance, entries)
}

/// Reads logic forms, one per line. Blank lines and `#` comments are
/// skipped; a line starting with `{` is a JSON object whose `logic_form`
/// field holds the form, as written by `synthesize`.
pub fn read_logic_forms(reader: impl std::io::BufRead) -> Result<Vec<LogicForm>, FormsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| FormsError::Line { line: i + 1, message };
        let line = line.map_err(|e| FormsError::Io(e.to_string()))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let form_text = if text.starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
            match v.get("logic_form").and_then(|f| f.as_str()) {
                Some(f) => f.to_string(),
                None => return Err(err("missing \"logic_form\" field".into())),
            }
        } else {
            text.to_string()
        };
        out.push(crate::dsl::parse_logic_form(&form_text).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq)]
pub enum FormsError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("cannot read logic forms: {0}")]
    Io(String),
}

pub fn save_distribution(dist: &TemplateDistribution, path: &Path) -> Result<(), TemplateError> {
    fs::write(path, dist.to_json() + "\n").map_err(|e| TemplateError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_distribution(path: &Path) -> Result<TemplateDistribution, TemplateError> {
    let text = fs::read_to_string(path).map_err(|e| TemplateError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    TemplateDistribution::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_logic_form;

    fn abs(s: &str) -> Template {
        abstract_form(&parse_logic_form(s).unwrap())
    }

    #[test]
    fn masks_columns_and_groups_functions() {
        assert_eq!(
            abs("hop { argmax { all_rows ; points } ; team }").to_string(),
            "hop { SUPER_ARG { all_rows ; COL_1 } ; COL_2 }"
        );
        assert_eq!(
            abs("eq { count { filter_eq { all_rows ; team ; a } } ; 1 }").to_string(),
            "COMPARE_EQ { count { FILTER { all_rows ; COL_1 ; OBJ_1 } } ; ORD_1 }"
        );
        assert_eq!(
            abs("nth_max { all_rows ; points ; 2 }").to_string(),
            "ORDINAL { all_rows ; COL_1 ; ORD_1 }"
        );
    }

    #[test]
    fn direction_variants_share_templates() {
        assert_eq!(abs("greater { 5 ; 2 }"), abs("less { 7 ; 1 }"));
        assert_eq!(abs("greater { 5 ; 2 }").to_string(), "COMPARE_GT { OBJ_1 ; OBJ_2 }");
        assert_ne!(abs("eq { 5 ; 2 }"), abs("greater { 5 ; 2 }"));
    }

    #[test]
    fn abstraction_is_idempotent_through_parse() {
        for s in DEFAULT_TEMPLATES {
            let t = Template::parse(s).unwrap();
            assert_eq!(t.to_string(), s);
            assert_eq!(Template::parse(&t.to_string()).unwrap(), t);
        }
    }

    #[test]
    fn default_templates_cover_every_category() {
        let cats: HashSet<Category> = TemplateDistribution::bundled_default()
            .entries()
            .iter()
            .map(|e| e.template.category())
            .collect();
        assert_eq!(cats.len(), 8);
    }

    #[test]
    fn template_category_matches_form_category() {
        for s in [
            "eq { count { filter_eq { all_rows ; team ; a } } ; 1 }",
            "eq { hop { argmax { all_rows ; p } ; t } ; x }",
            "round_eq { sum { all_rows ; p } ; 3 }",
            "eq { hop { all_rows ; p } ; 3 }",
            "greater { 1 ; 2 }",
        ] {
            let lf = parse_logic_form(s).unwrap();
            assert_eq!(abstract_form(&lf).category(), lf.category(), "{s}");
        }
    }

    #[test]
    fn rejects_invalid_templates() {
        let bad = [
            "COUNT { all_rows }",
            "count { COL_1 }",
            "hop { all_rows ; OBJ_1 }",
            "FILTER { all_rows ; COL_2 ; OBJ_1 }",
            "COMPARE_EQ { count { all_rows } ; OBJ_1 }",
            "ORDINAL { all_rows ; COL_1 ; OBJ_1 }",
            "COMPARE_EQ { OBJ_1 ; ORD_1 }",
            "count { all_rows ; all_rows }",
            "and { count { all_rows } ; only { all_rows } }",
            "COL_1",
        ];
        for s in bad {
            assert!(Template::parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn distribution_weights_count_forms() {
        let forms: Vec<LogicForm> = ["greater { 5 ; 2 }", "less { 1 ; 3 }", "count { all_rows }"]
            .iter()
            .map(|s| parse_logic_form(s).unwrap())
            .collect();
        let d = build_distribution(&forms, "test").unwrap();
        let weights: Vec<f64> = d.entries().iter().map(|e| e.weight).collect();
        assert_eq!(weights, vec![2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(d.entries()[0].template.to_string(), "COMPARE_GT { OBJ_1 ; OBJ_2 }");

        let same = vec![forms[2].clone(); 4];
        let d = build_distribution(&same, "test").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries()[0].weight, 1.0);

        assert_eq!(build_distribution(&[], "x"), Err(TemplateError::EmptyCorpus));
        let bare = [LogicForm::literal("3")];
        assert!(matches!(build_distribution(&bare, "x"), Err(TemplateError::Invalid(_))));
    }

    #[test]
    fn reads_form_files() {
        let text = "# comment\n\ncount { all_rows }\n{\"logic_form\": \"only { all_rows }\"}\n";
        let forms = read_logic_forms(text.as_bytes()).unwrap();
        assert_eq!(forms.len(), 2);
        assert!(matches!(
            read_logic_forms("count {".as_bytes()),
            Err(FormsError::Line { line: 1, .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let d = TemplateDistribution::bundled_default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        save_distribution(&d, &path).unwrap();
        assert_eq!(load_distribution(&path).unwrap(), d);
    }

    #[test]
    fn load_enforces_invariants() {
        let bad_sum =
            r#"{"provenance":"x","entries":[{"skeleton":"count { all_rows }","category":"count","weight":0.5}]}"#;
        assert!(matches!(
            TemplateDistribution::from_json(bad_sum),
            Err(TemplateError::Malformed(_))
        ));
        let dup = r#"{"provenance":"x","entries":[
            {"skeleton":"count { all_rows }","category":"count","weight":0.5},
            {"skeleton":"count {all_rows}","category":"count","weight":0.5}]}"#;
        assert!(matches!(
            TemplateDistribution::from_json(dup),
            Err(TemplateError::Malformed(_))
        ));
        let wrong_cat =
            r#"{"provenance":"x","entries":[{"skeleton":"count { all_rows }","category":"unique","weight":1.0}]}"#;
        assert!(TemplateDistribution::from_json(wrong_cat).is_err());
        assert!(TemplateDistribution::from_json("{").is_err());
    }
}
