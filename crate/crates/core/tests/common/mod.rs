//! Random tables and logic forms shared by the integration suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use loft_core::dsl::{ArgKind, Comparator, Function, LogicForm, Quantifier, CATALOG};
use loft_core::executor::{ExecError, ExecValue};
use loft_core::table::{CellValue, Table};

const HEADERS: [&str; 8] = ["team", "points", "Score", "year", "home city", "rank", "name", "total"];
const WORDS: [&str; 7] = ["a", "b", "c", "red", "blue", "x y", "Oslo"];
const GAPS: [&str; 3] = ["", "-", "n/a"];

fn numeric_cell<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..10) {
        0 => format!("{}.5", rng.gen_range(0..10)),
        1 => format!("1,{:03}", rng.gen_range(0..1000)),
        2 => format!("-{}", rng.gen_range(1..5)),
        _ => rng.gen_range(0..10).to_string(),
    }
}

/// A table of `0..=max_rows` rows and `1..=max_cols` columns mixing
/// numeric, textual and empty cells.
pub fn random_table<R: Rng>(rng: &mut R, id: &str, max_rows: usize, max_cols: usize) -> Table {
    let cols = rng.gen_range(1..=max_cols);
    let rows = rng.gen_range(0..=max_rows);
    let mut headers: Vec<&str> = HEADERS.to_vec();
    headers.shuffle(rng);
    headers.truncate(cols);
    let numeric: Vec<bool> = (0..cols).map(|_| rng.gen_bool(0.55)).collect();
    let body: Vec<Vec<String>> = (0..rows)
        .map(|_| {
            numeric
                .iter()
                .map(|&num| match rng.gen_range(0..20) {
                    0 | 1 => GAPS.choose(rng).unwrap().to_string(),
                    2 => WORDS.choose(rng).unwrap().to_string(),
                    _ if num => numeric_cell(rng),
                    _ => WORDS.choose(rng).unwrap().to_string(),
                })
                .collect()
        })
        .collect();
    let headers: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    Table::from_raw(id, id, &headers, &body).expect("generated table is rectangular")
}

/// A table shaped like corpus data: 4..=10 rows, 2..=6 columns, at least
/// one numeric column, few gaps.
pub fn corpus_table<R: Rng>(rng: &mut R, id: &str) -> Table {
    let cols = rng.gen_range(2..=6);
    let rows = rng.gen_range(4..=10);
    let mut headers: Vec<&str> = HEADERS.to_vec();
    headers.shuffle(rng);
    headers.truncate(cols);
    let mut numeric: Vec<bool> = (0..cols).map(|_| rng.gen_bool(0.5)).collect();
    numeric[rng.gen_range(0..cols)] = true;
    let body: Vec<Vec<String>> = (0..rows)
        .map(|r| {
            numeric
                .iter()
                .map(|&num| {
                    if num {
                        rng.gen_range(0..30).to_string()
                    } else if rng.gen_bool(0.5) {
                        format!("{}{}", WORDS.choose(rng).unwrap(), r)
                    } else {
                        WORDS.choose(rng).unwrap().to_string()
                    }
                })
                .collect()
        })
        .collect();
    let headers: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    Table::from_raw(id, id, &headers, &body).expect("generated table is rectangular")
}

/// Generates type-correct logic forms for one table.
pub struct FormGen<'t, R> {
    pub table: &'t Table,
    pub rng: R,
}

impl<'t, R: Rng> FormGen<'t, R> {
    pub fn new(table: &'t Table, rng: R) -> Self {
        FormGen { table, rng }
    }

    fn numeric_columns(&self) -> Vec<usize> {
        (0..self.table.num_columns())
            .filter(|&c| self.table.is_numeric(c))
            .collect()
    }

    fn column(&mut self, c: usize) -> LogicForm {
        let h = &self.table.headers()[c];
        // header lookup ignores case
        if self.rng.gen_bool(0.2) {
            LogicForm::column(&h.to_uppercase())
        } else {
            LogicForm::column(h)
        }
    }

    fn any_column(&mut self) -> (usize, LogicForm) {
        let c = self.rng.gen_range(0..self.table.num_columns());
        (c, self.column(c))
    }

    fn numeric_column(&mut self) -> Option<(usize, LogicForm)> {
        let nums = self.numeric_columns();
        let c = *nums.choose(&mut self.rng)?;
        Some((c, self.column(c)))
    }

    fn literal(&mut self, column: Option<usize>) -> LogicForm {
        let t = self.table;
        if let Some(c) = column {
            if t.num_rows() > 0 && self.rng.gen_bool(0.7) {
                let r = self.rng.gen_range(0..t.num_rows());
                let text = t.cell(r, c).text();
                if !text.trim().is_empty() {
                    return LogicForm::literal(text);
                }
            }
        }
        match self.rng.gen_range(0..4) {
            0 => LogicForm::literal(WORDS.choose(&mut self.rng).unwrap()),
            1 => LogicForm::literal(&format!("{}.5", self.rng.gen_range(0..10))),
            _ => LogicForm::literal(&self.rng.gen_range(0..12).to_string()),
        }
    }

    fn ordinal(&mut self) -> LogicForm {
        LogicForm::literal(&self.rng.gen_range(1..=4).to_string())
    }

    pub fn view(&mut self, depth: usize) -> LogicForm {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return LogicForm::AllRows;
        }
        let d = depth - 1;
        loop {
            let form = match self.rng.gen_range(0..5) {
                0 => {
                    let f = *[Function::Filter(Comparator::Eq), Function::Filter(Comparator::NotEq)]
                        .choose(&mut self.rng)
                        .unwrap();
                    let v = self.view(d);
                    let (c, col) = self.any_column();
                    let obj = self.filter_object(d, c);
                    LogicForm::apply(f, vec![v, col, obj])
                }
                1 => {
                    let Some((c, col)) = self.numeric_column() else {
                        continue;
                    };
                    let cmp = *[
                        Comparator::Greater,
                        Comparator::Less,
                        Comparator::GreaterEq,
                        Comparator::LessEq,
                    ]
                    .choose(&mut self.rng)
                    .unwrap();
                    let v = self.view(d);
                    let obj = self.filter_object(d, c);
                    LogicForm::apply(Function::Filter(cmp), vec![v, col, obj])
                }
                2 => {
                    let v = self.view(d);
                    let (_, col) = self.any_column();
                    LogicForm::apply(Function::FilterAll, vec![v, col])
                }
                3 => {
                    let Some((_, col)) = self.numeric_column() else {
                        continue;
                    };
                    let f = *[Function::Argmax, Function::Argmin].choose(&mut self.rng).unwrap();
                    LogicForm::apply(f, vec![self.view(d), col])
                }
                _ => {
                    let Some((_, col)) = self.numeric_column() else {
                        continue;
                    };
                    let f = *[Function::NthArgmax, Function::NthArgmin]
                        .choose(&mut self.rng)
                        .unwrap();
                    let v = self.view(d);
                    LogicForm::apply(f, vec![v, col, self.ordinal()])
                }
            };
            return form;
        }
    }

    fn filter_object(&mut self, depth: usize, column: usize) -> LogicForm {
        if depth > 0 && self.rng.gen_bool(0.15) {
            self.object(depth)
        } else {
            self.literal(Some(column))
        }
    }

    pub fn object(&mut self, depth: usize) -> LogicForm {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.literal(None);
        }
        let d = depth - 1;
        loop {
            let form = match self.rng.gen_range(0..5) {
                0 => {
                    let v = self.view(d);
                    let (_, col) = self.any_column();
                    LogicForm::apply(Function::Hop, vec![v, col])
                }
                1 => LogicForm::apply(Function::Count, vec![self.view(d)]),
                2 => {
                    let Some((_, col)) = self.numeric_column() else {
                        continue;
                    };
                    let f = *[Function::Avg, Function::Sum].choose(&mut self.rng).unwrap();
                    LogicForm::apply(f, vec![self.view(d), col])
                }
                3 => {
                    let Some((_, col)) = self.numeric_column() else {
                        continue;
                    };
                    let f = *[Function::NthMax, Function::NthMin].choose(&mut self.rng).unwrap();
                    let v = self.view(d);
                    LogicForm::apply(f, vec![v, col, self.ordinal()])
                }
                _ => {
                    let a = self.object(d);
                    let b = self.object(d);
                    LogicForm::apply(Function::Diff, vec![a, b])
                }
            };
            return form;
        }
    }

    /// Boolean form; `depth` must be at least 1.
    pub fn boolean(&mut self, depth: usize) -> LogicForm {
        assert!(depth >= 1);
        let d = depth - 1;
        loop {
            let form = match self.rng.gen_range(0..5) {
                0 => LogicForm::apply(Function::Only, vec![self.view(d)]),
                1 | 2 => {
                    let f = *[
                        Function::Eq,
                        Function::NotEq,
                        Function::RoundEq,
                        Function::Greater,
                        Function::Less,
                    ]
                    .choose(&mut self.rng)
                    .unwrap();
                    let a = self.object(d);
                    let b = self.object(d);
                    LogicForm::apply(f, vec![a, b])
                }
                3 => {
                    let q = *[Quantifier::All, Quantifier::Most].choose(&mut self.rng).unwrap();
                    let cmp = *[
                        Comparator::Eq,
                        Comparator::NotEq,
                        Comparator::Greater,
                        Comparator::Less,
                        Comparator::GreaterEq,
                        Comparator::LessEq,
                    ]
                    .choose(&mut self.rng)
                    .unwrap();
                    let (c, col) = if cmp.is_ordered() {
                        match self.numeric_column() {
                            Some(x) => x,
                            None => continue,
                        }
                    } else {
                        self.any_column()
                    };
                    let v = self.view(d);
                    let obj = self.filter_object(d, c);
                    LogicForm::apply(Function::Majority(q, cmp), vec![v, col, obj])
                }
                _ => {
                    if d == 0 {
                        continue;
                    }
                    let a = self.boolean(d);
                    let b = self.boolean(d);
                    LogicForm::apply(Function::And, vec![a, b])
                }
            };
            return form;
        }
    }

    /// A function application of any result type, apply depth at most
    /// `max_depth`.
    pub fn any(&mut self, max_depth: usize) -> LogicForm {
        let depth = self.rng.gen_range(1..=max_depth);
        loop {
            let lf = match self.rng.gen_range(0..4) {
                0 => self.view(depth),
                1 => self.object(depth),
                _ => self.boolean(depth),
            };
            if matches!(lf, LogicForm::Apply(..)) {
                return lf;
            }
        }
    }
}

const NASTY: [&str; 12] = [
    "a", "B c", "{", "}", ";", "\\", "all_rows", "é", "  x  ", "1.5", "-", "hop",
];

fn nasty_text<R: Rng>(rng: &mut R) -> String {
    loop {
        let n = rng.gen_range(1..=3);
        let s: String = (0..n).map(|_| *NASTY.choose(rng).unwrap()).collect::<Vec<_>>().join("");
        if !s.trim().is_empty() {
            return s;
        }
    }
}

/// Structurally valid forms (correct arity and atom positions) with
/// arbitrary text in columns and literals. Not necessarily type-correct.
pub fn structural_form<R: Rng>(rng: &mut R, depth: usize) -> LogicForm {
    let sig = CATALOG.choose(rng).unwrap();
    let args = sig
        .args
        .iter()
        .map(|kind| match kind {
            ArgKind::Header | ArgKind::NumericHeader => LogicForm::column(&nasty_text(rng)),
            ArgKind::Ordinal => LogicForm::literal(&rng.gen_range(1..9).to_string()),
            _ if depth > 1 && rng.gen_bool(0.6) => structural_form(rng, depth - 1),
            ArgKind::View if rng.gen_bool(0.8) => LogicForm::AllRows,
            _ => LogicForm::literal(&nasty_text(rng)),
        })
        .collect();
    LogicForm::apply(sig.function, args)
}

/// Executor and oracle agree: same value (numbers within 1e-9 relative)
/// or the same error kind.
pub fn agree(a: &Result<ExecValue, ExecError>, b: &Result<ExecValue, ExecError>) -> bool {
    match (a, b) {
        (Ok(ExecValue::Number(x)), Ok(ExecValue::Number(y))) => close(*x, *y),
        (
            Ok(ExecValue::Object(CellValue::Number { value: x, .. })),
            Ok(ExecValue::Object(CellValue::Number { value: y, .. })),
        ) => close(*x, *y),
        (Ok(x), Ok(y)) => x == y,
        (Err(x), Err(y)) => x.kind() == y.kind(),
        _ => false,
    }
}

fn close(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs())
}
