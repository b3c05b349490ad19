//! Candidate logic-form synthesis: weighted template sampling followed by
//! bottom-up instantiation against a concrete table.
//!
//! Placeholders are filled innermost first. Columns come from the requested
//! column set; objects and ordinals come from pools built out of the live
//! values of the subtree already filled, and the last argument of every node
//! is only drawn from values that make that node hold. Execution remains the
//! final arbiter: a candidate is kept only if it verifies.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::{ArgKind, Function, LogicForm};
use crate::executor::{ExecValue, Executor};
use crate::table::Table;
use crate::templates::{Skeleton, Template, TemplateDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisConfig {
    pub candidates_per_column_set: usize,
    pub retries_per_template: usize,
    pub seed: u64,
    pub max_column_sets: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            candidates_per_column_set: 20,
            retries_per_template: 50,
            seed: 13,
            max_column_sets: 4,
        }
    }
}

/// Stable 64-bit FNV-1a hash, used to derive per-table generator seeds.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        // separator so ("ab","c") and ("a","bc") differ
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Private generator for one table and one pipeline stage. Independent of
/// scheduling, so parallel and serial runs agree.
pub fn table_rng(seed: u64, table_id: &str, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[
        &seed.to_le_bytes(),
        stage.as_bytes(),
        table_id.as_bytes(),
    ]))
}

/// Draws templates proportionally to their weights.
#[derive(Debug, Clone)]
pub struct TemplateSampler<'d> {
    dist: &'d TemplateDistribution,
    index: WeightedIndex<f64>,
}

impl<'d> TemplateSampler<'d> {
    pub fn new(dist: &'d TemplateDistribution) -> Self {
        let index =
            WeightedIndex::new(dist.entries().iter().map(|e| e.weight)).expect("distribution weights are positive");
        TemplateSampler { dist, index }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &'d Template {
        &self.dist.entries()[self.index.sample(rng)].template
    }
}

pub fn sample_template<'d, R: Rng + ?Sized>(dist: &'d TemplateDistribution, rng: &mut R) -> &'d Template {
    TemplateSampler::new(dist).sample(rng)
}

/// Fills `template` on `table` using only `columns`. `None` when no verified
/// instantiation was found within `retries` draws.
pub fn instantiate<R: Rng + ?Sized>(
    template: &Template,
    table: &Table,
    columns: &[usize],
    rng: &mut R,
    retries: usize,
) -> Option<LogicForm> {
    if columns.is_empty() || columns.iter().any(|&c| c >= table.num_columns()) {
        return None;
    }
    let exec = Executor::default();
    let mut filler = Filler {
        table,
        columns,
        exec,
        rng,
    };
    for _ in 0..retries {
        if let Some(lf) = filler.fill(template.skeleton()) {
            if exec.verify(&lf, table) {
                return Some(lf);
            }
        }
    }
    None
}

struct Filler<'a, R: ?Sized> {
    table: &'a Table,
    columns: &'a [usize],
    exec: Executor,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Filler<'_, R> {
    fn fill(&mut self, node: &Skeleton) -> Option<LogicForm> {
        let Skeleton::Apply(group, args) = node else {
            return match node {
                Skeleton::AllRows => Some(LogicForm::AllRows),
                _ => None,
            };
        };
        let members: Vec<Function> = group.members().collect();
        let f = *members.choose(self.rng)?;
        let kinds = f.args();
        let mut filled: Vec<LogicForm> = Vec::with_capacity(args.len());
        for (i, child) in args.iter().enumerate() {
            let arg = match child {
                Skeleton::Col(_) => self.pick_column(kinds[i])?,
                Skeleton::Obj(_) | Skeleton::Ord(_) => {
                    let pool = self.value_pool(f, i, &filled);
                    if i + 1 == args.len() {
                        self.pick_satisfying(f, &filled, pool)?
                    } else {
                        LogicForm::literal(pool.choose(self.rng)?)
                    }
                }
                _ => self.fill(child)?,
            };
            filled.push(arg);
        }
        let form = LogicForm::Apply(f, filled);
        self.holds(&form).then_some(form)
    }

    fn pick_column(&mut self, kind: ArgKind) -> Option<LogicForm> {
        let allowed: Vec<usize> = self
            .columns
            .iter()
            .copied()
            .filter(|&c| kind != ArgKind::NumericHeader || self.table.is_numeric(c))
            .collect();
        let c = *allowed.choose(self.rng)?;
        Some(LogicForm::column(&self.table.headers()[c]))
    }

    /// A completed node is usable when it executes, and boolean nodes are
    /// true and views non-empty.
    fn holds(&self, lf: &LogicForm) -> bool {
        match self.exec.execute(lf, self.table) {
            Ok(ExecValue::Bool(b)) => b,
            Ok(ExecValue::View(v)) => !v.is_empty(),
            Ok(_) => true,
            Err(_) => false,
        }
    }

    fn pick_satisfying(&mut self, f: Function, filled: &[LogicForm], pool: Vec<String>) -> Option<LogicForm> {
        let mut args = filled.to_vec();
        args.push(LogicForm::AllRows);
        let last = args.len() - 1;
        let good: Vec<LogicForm> = pool
            .iter()
            .filter_map(|text| {
                args[last] = LogicForm::literal(text);
                let form = LogicForm::Apply(f, args.clone());
                self.holds(&form).then(|| args[last].clone())
            })
            .collect();
        good.choose(self.rng).cloned()
    }

    fn column_of(&self, lf: &LogicForm) -> Option<usize> {
        match lf {
            LogicForm::Column(c) => self.table.column_index(c),
            _ => None,
        }
    }

    fn value_pool(&self, f: Function, position: usize, filled: &[LogicForm]) -> Vec<String> {
        let mut pool = Pool::default();
        let kinds = f.args();
        match kinds[position] {
            ArgKind::Ordinal => {
                // ranks 1..=k over the numeric cells of the scoped column
                if let (Ok(ExecValue::View(v)), Some(c)) =
                    (self.exec.execute(&filled[0], self.table), self.column_of(&filled[1]))
                {
                    let k = v.column(c).filter(|(_, cell)| cell.as_number().is_some()).count();
                    for n in 1..=k {
                        pool.push(n.to_string());
                    }
                }
            }
            _ if kinds.len() == 3 => {
                // filter / majority object: live cells of the column in scope
                let ordered = kinds[1] == ArgKind::NumericHeader;
                if let (Ok(ExecValue::View(v)), Some(c)) =
                    (self.exec.execute(&filled[0], self.table), self.column_of(&filled[1]))
                {
                    for (_, cell) in v.column(c) {
                        if !cell.is_empty() && (!ordered || cell.as_number().is_some()) {
                            pool.push(cell.text().to_string());
                        }
                    }
                }
            }
            _ if position == 1 && filled[0].function() == Some(Function::Count) => {
                for n in 0..=self.table.num_rows() {
                    pool.push(n.to_string());
                }
            }
            _ if position == 1 => match self.exec.execute(&filled[0], self.table) {
                Ok(ExecValue::Number(x)) => pool.numeric_variants(x),
                Ok(ExecValue::Object(cell)) => {
                    if let Some(x) = cell.as_number() {
                        pool.numeric_variants(x);
                    }
                    let source = match &filled[0] {
                        LogicForm::Apply(Function::Hop, a) => self.column_of(&a[1]),
                        _ => None,
                    };
                    match source {
                        Some(c) => self.push_column_cells(&mut pool, &[c]),
                        None => pool.push(cell.text().to_string()),
                    }
                }
                _ => {}
            },
            _ => self.push_column_cells(&mut pool, self.columns),
        }
        pool.items
    }

    fn push_column_cells(&self, pool: &mut Pool, columns: &[usize]) {
        for &c in columns {
            for r in 0..self.table.num_rows() {
                let cell = self.table.cell(r, c);
                if !cell.is_empty() {
                    pool.push(cell.text().to_string());
                }
            }
        }
    }
}

/// Insertion-ordered set of candidate literal texts.
#[derive(Default)]
struct Pool {
    items: Vec<String>,
    seen: HashSet<String>,
}

impl Pool {
    fn push(&mut self, text: String) {
        if !text.trim().is_empty() && self.seen.insert(text.clone()) {
            self.items.push(text);
        }
    }

    /// The exact value, its roundings, and nearby integers.
    fn numeric_variants(&mut self, x: f64) {
        if !x.is_finite() {
            return;
        }
        self.push(format_number(x));
        for digits in [2, 1, 0] {
            let scale = 10f64.powi(digits);
            self.push(format_number((x * scale).round() / scale));
        }
        let r = x.round();
        for delta in [-2.0, -1.0, 1.0, 2.0] {
            self.push(format_number(r + delta));
        }
    }
}

/// Integral values print without a fractional part; others use the
/// shortest representation that parses back to the same value.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Column subsets of size 2–3 (or the whole table when smaller), each with a
/// numeric column when the table has one. At most `max_sets`, distinct.
pub fn derive_column_sets<R: Rng + ?Sized>(table: &Table, max_sets: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = table.num_columns();
    if n <= 2 {
        return vec![(0..n).collect()];
    }
    let numeric: Vec<usize> = (0..n).filter(|&c| table.is_numeric(c)).collect();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for _ in 0..max_sets * 20 {
        if sets.len() >= max_sets {
            break;
        }
        let size = rng.gen_range(2..=3.min(n));
        let mut set = Vec::with_capacity(size);
        if let Some(&c) = numeric.choose(rng) {
            set.push(c);
        }
        let mut rest: Vec<usize> = (0..n).filter(|c| !set.contains(c)).collect();
        rest.shuffle(rng);
        set.extend(rest.into_iter().take(size - set.len()));
        set.sort_unstable();
        if !sets.contains(&set) {
            sets.push(set);
        }
    }
    sets
}

/// Candidates synthesized for one column set.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSetCandidates {
    pub columns: Vec<usize>,
    pub forms: Vec<LogicForm>,
    /// Template draws spent, including failed ones.
    pub attempts: usize,
    /// How many candidates short of the requested count.
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthesisResult {
    pub column_sets: Vec<ColumnSetCandidates>,
}

impl SynthesisResult {
    pub fn forms(&self) -> impl Iterator<Item = (&[usize], &LogicForm)> {
        self.column_sets
            .iter()
            .flat_map(|s| s.forms.iter().map(move |f| (s.columns.as_slice(), f)))
    }

    pub fn total(&self) -> usize {
        self.column_sets.iter().map(|s| s.forms.len()).sum()
    }
}

/// Column sets from the corpus when given, derived otherwise.
pub fn column_sets_for(table: &Table, given: &[Vec<usize>], config: &SynthesisConfig) -> Vec<Vec<usize>> {
    if given.is_empty() {
        let mut rng = table_rng(config.seed, table.table_id(), "columns");
        derive_column_sets(table, config.max_column_sets, &mut rng)
    } else {
        given.to_vec()
    }
}

/// Up to `candidates_per_column_set` distinct verified forms per column set.
pub fn synthesize_candidates(
    table: &Table,
    column_sets: &[Vec<usize>],
    config: &SynthesisConfig,
    dist: &TemplateDistribution,
) -> SynthesisResult {
    let sampler = TemplateSampler::new(dist);
    let mut rng = table_rng(config.seed, table.table_id(), "synthesize");
    let want = config.candidates_per_column_set;
    let budget = 20 * want;
    let column_sets = column_sets
        .iter()
        .map(|columns| {
            let mut seen = HashSet::new();
            let mut forms = Vec::new();
            let mut attempts = 0;
            while forms.len() < want && attempts < budget {
                attempts += 1;
                let template = sampler.sample(&mut rng);
                if let Some(lf) = instantiate(template, table, columns, &mut rng, config.retries_per_template) {
                    if seen.insert(lf.canonical()) {
                        forms.push(lf);
                    }
                }
            }
            if forms.len() < want {
                log::debug!(
                    "table {}: column set {:?} yielded {} of {} candidates",
                    table.table_id(),
                    columns,
                    forms.len(),
                    want
                );
            }
            ColumnSetCandidates {
                columns: columns.clone(),
                shortfall: want - forms.len(),
                forms,
                attempts,
            }
        })
        .collect();
    SynthesisResult { column_sets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_logic_form;
    use crate::executor::verify;
    use crate::templates::abstract_form;

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
    fn stable_hash_is_fixed() {
        assert_eq!(stable_hash(&[]), 0xcbf2_9ce4_8422_2325);
        assert_ne!(stable_hash(&[b"ab", b"c"]), stable_hash(&[b"a", b"bc"]));
    }

    #[test]
    fn count_template_always_verifies_on_mt() {
        let t = Template::parse("COMPARE_EQ { count { FILTER { all_rows ; COL_1 ; OBJ_1 } } ; ORD_1 }").unwrap();
        let table = mt();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let lf = instantiate(&t, &table, &[0, 1], &mut rng, 50).expect("satisfiable");
            assert!(verify(&lf, &table), "{lf}");
            assert_eq!(abstract_form(&lf), t);
        }
    }

    #[test]
    fn aggregation_fails_without_numeric_columns() {
        let table = Table::from_raw("t", "t", &["a", "b"], &[vec!["x", "y"], vec!["z", "w"]]).unwrap();
        let t = Template::parse(crate::templates::DEFAULT_TEMPLATES[1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(instantiate(&t, &table, &[0, 1], &mut rng, 50), None);
    }

    #[test]
    fn synthesis_on_mt_is_sound_and_deterministic() {
        let dist = TemplateDistribution::bundled_default();
        let cfg = SynthesisConfig::default();
        let a = synthesize_candidates(&mt(), &[vec![0, 1]], &cfg, &dist);
        let b = synthesize_candidates(&mt(), &[vec![0, 1]], &cfg, &dist);
        assert_eq!(a, b);
        assert!((1..=20).contains(&a.total()));
        let table = mt();
        let mut seen = HashSet::new();
        for (_, lf) in a.forms() {
            assert!(verify(lf, &table), "{lf}");
            assert!(seen.insert(lf.canonical()));
        }
    }

    #[test]
    fn tiny_table_still_yields_candidates() {
        let table = Table::from_raw("one", "", &["x"], &[vec!["7"]]).unwrap();
        let dist = TemplateDistribution::bundled_default();
        let r = synthesize_candidates(&table, &[vec![0]], &SynthesisConfig::default(), &dist);
        assert!(r.total() >= 1);
        assert_eq!(r.column_sets[0].shortfall, 20 - r.total());
    }

    #[test]
    fn column_discipline() {
        let table = Table::from_raw(
            "t",
            "",
            &["name", "score", "city", "year"],
            &[
                vec!["ann", "3", "oslo", "2001"],
                vec!["bob", "7", "rome", "2003"],
                vec!["cy", "5", "oslo", "2002"],
            ],
        )
        .unwrap();
        let dist = TemplateDistribution::bundled_default();
        let r = synthesize_candidates(&table, &[vec![0, 1]], &SynthesisConfig::default(), &dist);
        for (_, lf) in r.forms() {
            for c in lf.columns() {
                assert!(["name", "score"].contains(&c), "{lf}");
            }
        }
    }

    #[test]
    fn derived_column_sets_include_numeric() {
        let table = Table::from_raw(
            "t",
            "",
            &["a", "b", "c", "d"],
            &[vec!["x", "1", "y", "z"], vec!["p", "2", "q", "r"]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets = derive_column_sets(&table, 4, &mut rng);
        assert!(!sets.is_empty() && sets.len() <= 4);
        for s in &sets {
            assert!((2..=3).contains(&s.len()));
            assert!(s.contains(&1));
        }
    }

    #[test]
    fn weighted_sampling_single_template() {
        let lf = parse_logic_form("count { all_rows }").unwrap();
        let dist = crate::templates::build_distribution(&[lf], "t").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(sample_template(&dist, &mut rng).to_string(), "count { all_rows }");
        }
    }

    #[test]
    fn format_number_round_trips() {
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(-2.0), "-2");
        assert_eq!(format_number(3.25), "3.25");
        let x = 10.0 / 3.0;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }
}
