//! Evaluation of logic forms over tables.
//!
//! Arguments are evaluated left to right and the first failure wins, so an
//! error's kind is a function of the form and the table alone. Within one
//! function, empty-scope checks come before rank and numeric checks.

pub mod oracle;

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::dsl::{parse_ordinal, type_check_with, Comparator, Function, LogicForm, Quantifier, TypeCheckMode};
use crate::table::{normalize_cell, normalize_header, CellValue, Table, View};

/// Result of executing a logic form.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecValue<'t> {
    Bool(bool),
    Number(f64),
    Object(CellValue),
    View(View<'t>),
}

impl ExecValue<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            ExecValue::Bool(_) => "bool",
            ExecValue::Number(_) => "number",
            ExecValue::Object(_) => "object",
            ExecValue::View(_) => "view",
        }
    }

    /// JSON rendering: `{"kind": ..., "value": ...}`.
    pub fn to_json(&self) -> Value {
        let value = match self {
            ExecValue::Bool(b) => json!(b),
            ExecValue::Number(n) => number_json(*n),
            ExecValue::Object(CellValue::Number { value, .. }) => number_json(*value),
            ExecValue::Object(cell) => json!(cell.text()),
            ExecValue::View(v) => json!(v.rows()),
        };
        json!({"kind": self.kind(), "value": value})
    }
}

fn number_json(n: f64) -> Value {
    if n.fract() == 0.0 && n.abs() < 9.007_199_254_740_992e15 {
        json!(n as i64)
    } else {
        json!(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecErrorKind {
    EmptyView,
    RankOutOfRange,
    NonNumeric,
    HopCardinality,
    UnknownColumn,
    Type,
}

impl ExecErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecErrorKind::EmptyView => "empty_view",
            ExecErrorKind::RankOutOfRange => "rank_out_of_range",
            ExecErrorKind::NonNumeric => "non_numeric",
            ExecErrorKind::HopCardinality => "hop_cardinality",
            ExecErrorKind::UnknownColumn => "unknown_column",
            ExecErrorKind::Type => "type",
        }
    }
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("{function}: no values in scope")]
    EmptyView { function: &'static str },
    #[error("{function}: rank {rank} out of range 1..={available}")]
    RankOutOfRange {
        function: &'static str,
        rank: usize,
        available: usize,
    },
    #[error("{function}: non-numeric operand")]
    NonNumeric { function: &'static str },
    #[error("hop needs exactly one row, view has {rows}")]
    HopCardinality { rows: usize },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("ill-typed form: {0}")]
    Type(String),
}

impl ExecError {
    pub fn kind(&self) -> ExecErrorKind {
        match self {
            ExecError::EmptyView { .. } => ExecErrorKind::EmptyView,
            ExecError::RankOutOfRange { .. } => ExecErrorKind::RankOutOfRange,
            ExecError::NonNumeric { .. } => ExecErrorKind::NonNumeric,
            ExecError::HopCardinality { .. } => ExecErrorKind::HopCardinality,
            ExecError::UnknownColumn(_) => ExecErrorKind::UnknownColumn,
            ExecError::Type(_) => ExecErrorKind::Type,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"error": self.to_string(), "kind": self.kind().as_str()})
    }
}

/// Tolerances for `round_eq`: `|a - b| <= max(abs_tol, rel_tol * |b|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            abs_tol: 1e-6,
            rel_tol: 1e-2,
        }
    }
}

pub fn execute<'t>(lf: &LogicForm, table: &'t Table) -> Result<ExecValue<'t>, ExecError> {
    Executor::default().execute(lf, table)
}

/// True iff `lf` type-checks and executes to `Bool(true)`. Never fails.
pub fn verify(lf: &LogicForm, table: &Table) -> bool {
    Executor::default().verify(lf, table)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Executor {
    pub options: ExecOptions,
    pub mode: TypeCheckMode,
}

impl Executor {
    pub fn new(options: ExecOptions) -> Self {
        Executor {
            options,
            mode: TypeCheckMode::default(),
        }
    }

    pub fn verify(&self, lf: &LogicForm, table: &Table) -> bool {
        type_check_with(lf, table, self.mode).is_ok() && matches!(self.execute(lf, table), Ok(ExecValue::Bool(true)))
    }

    pub fn execute<'t>(&self, lf: &LogicForm, table: &'t Table) -> Result<ExecValue<'t>, ExecError> {
        match lf {
            LogicForm::AllRows => Ok(ExecValue::View(table.all_rows())),
            LogicForm::Literal(text) => Ok(ExecValue::Object(normalize_cell(text))),
            LogicForm::Column(c) => Err(ExecError::Type(format!("bare column {c:?}"))),
            LogicForm::Apply(f, args) => {
                if args.len() != f.arity() {
                    return Err(ExecError::Type(format!("{f} arity")));
                }
                self.apply(*f, args, table)
            }
        }
    }

    fn view<'t>(&self, lf: &LogicForm, table: &'t Table) -> Result<View<'t>, ExecError> {
        match self.execute(lf, table)? {
            ExecValue::View(v) => Ok(v),
            other => Err(ExecError::Type(format!("expected view, got {}", other.kind()))),
        }
    }

    fn boolean(&self, lf: &LogicForm, table: &Table) -> Result<bool, ExecError> {
        match self.execute(lf, table)? {
            ExecValue::Bool(b) => Ok(b),
            other => Err(ExecError::Type(format!("expected bool, got {}", other.kind()))),
        }
    }

    fn object(&self, lf: &LogicForm, table: &Table) -> Result<Operand, ExecError> {
        match self.execute(lf, table)? {
            ExecValue::Number(n) => Ok(Operand::Number(n)),
            ExecValue::Object(cell) => Ok(Operand::from_cell(&cell)),
            other => Err(ExecError::Type(format!("expected object, got {}", other.kind()))),
        }
    }

    fn apply<'t>(&self, f: Function, args: &[LogicForm], table: &'t Table) -> Result<ExecValue<'t>, ExecError> {
        let name = f.name();
        match f {
            Function::Count => Ok(ExecValue::Number(self.view(&args[0], table)?.len() as f64)),
            Function::Only => Ok(ExecValue::Bool(self.view(&args[0], table)?.len() == 1)),
            Function::Avg | Function::Sum => {
                let view = self.view(&args[0], table)?;
                let col = column(&args[1], table)?;
                let values: Vec<f64> = view.column(col).filter_map(|(_, c)| c.as_number()).collect();
                if values.is_empty() {
                    return Err(ExecError::EmptyView { function: name });
                }
                let total: f64 = values.iter().sum();
                Ok(ExecValue::Number(if f == Function::Avg {
                    total / values.len() as f64
                } else {
                    total
                }))
            }
            Function::Argmax | Function::Argmin => {
                let view = self.view(&args[0], table)?;
                let col = column(&args[1], table)?;
                let ranked = ranked_rows(&view, col, f == Function::Argmax);
                match ranked.first() {
                    Some(&(row, _)) => Ok(ExecValue::View(View::single(table, row))),
                    None => Err(ExecError::EmptyView { function: name }),
                }
            }
            Function::NthArgmax | Function::NthArgmin | Function::NthMax | Function::NthMin => {
                let view = self.view(&args[0], table)?;
                let col = column(&args[1], table)?;
                let rank = ordinal(&args[2])?;
                let descending = matches!(f, Function::NthArgmax | Function::NthMax);
                let ranked = ranked_rows(&view, col, descending);
                if ranked.is_empty() {
                    return Err(ExecError::EmptyView { function: name });
                }
                let Some(&(row, value)) = ranked.get(rank - 1) else {
                    return Err(ExecError::RankOutOfRange {
                        function: name,
                        rank,
                        available: ranked.len(),
                    });
                };
                Ok(match f {
                    Function::NthArgmax | Function::NthArgmin => ExecValue::View(View::single(table, row)),
                    _ => ExecValue::Number(value),
                })
            }
            Function::Eq | Function::NotEq => {
                let a = self.object(&args[0], table)?;
                let b = self.object(&args[1], table)?;
                let cmp = if f == Function::Eq {
                    Comparator::Eq
                } else {
                    Comparator::NotEq
                };
                Ok(ExecValue::Bool(a.compare(&b, cmp, name)?))
            }
            Function::Greater | Function::Less => {
                let a = self.object(&args[0], table)?;
                let b = self.object(&args[1], table)?;
                let (x, y) = (a.number(name)?, b.number(name)?);
                Ok(ExecValue::Bool(if f == Function::Greater { x > y } else { x < y }))
            }
            Function::RoundEq => {
                let a = self.object(&args[0], table)?;
                let b = self.object(&args[1], table)?;
                let (a, b) = (a.number(name)?, b.number(name)?);
                let tol = self.options.abs_tol.max(self.options.rel_tol * b.abs());
                Ok(ExecValue::Bool((a - b).abs() <= tol))
            }
            Function::Diff => {
                let a = self.object(&args[0], table)?;
                let b = self.object(&args[1], table)?;
                let (a, b) = (a.number(name)?, b.number(name)?);
                Ok(ExecValue::Number(a - b))
            }
            Function::Majority(quantifier, cmp) => {
                let view = self.view(&args[0], table)?;
                let col = column(&args[1], table)?;
                let obj = self.object(&args[2], table)?;
                if view.is_empty() {
                    return Err(ExecError::EmptyView { function: name });
                }
                if cmp.is_ordered() {
                    obj.number(name)?;
                }
                let mut hits = 0usize;
                for (_, cell) in view.column(col) {
                    if Operand::from_cell(cell).compare(&obj, cmp, name).unwrap_or(false) {
                        hits += 1;
                    }
                }
                Ok(ExecValue::Bool(match quantifier {
                    Quantifier::All => hits == view.len(),
                    Quantifier::Most => 2 * hits > view.len(),
                }))
            }
            Function::Filter(cmp) => {
                let view = self.view(&args[0], table)?;
                let col = column(&args[1], table)?;
                let obj = self.object(&args[2], table)?;
                if cmp.is_ordered() {
                    obj.number(name)?;
                }
                Ok(ExecValue::View(view.filter(|r| {
                    Operand::from_cell(table.cell(r, col))
                        .compare(&obj, cmp, name)
                        .unwrap_or(false)
                })))
            }
            Function::FilterAll => {
                let view = self.view(&args[0], table)?;
                column(&args[1], table)?;
                Ok(ExecValue::View(view))
            }
            Function::Hop => {
                let view = self.view(&args[0], table)?;
                let col = column(&args[1], table)?;
                if view.len() != 1 {
                    return Err(ExecError::HopCardinality { rows: view.len() });
                }
                Ok(ExecValue::Object(table.cell(view.rows()[0], col).clone()))
            }
            Function::And => {
                let a = self.boolean(&args[0], table)?;
                let b = self.boolean(&args[1], table)?;
                Ok(ExecValue::Bool(a && b))
            }
        }
    }
}

fn column(lf: &LogicForm, table: &Table) -> Result<usize, ExecError> {
    match lf {
        LogicForm::Column(name) => table
            .column_index(name)
            .ok_or_else(|| ExecError::UnknownColumn(name.clone())),
        other => Err(ExecError::Type(format!("expected column, got {other}"))),
    }
}

fn ordinal(lf: &LogicForm) -> Result<usize, ExecError> {
    match lf {
        LogicForm::Literal(text) => parse_ordinal(text).ok_or_else(|| ExecError::Type(format!("bad ordinal {text:?}"))),
        other => Err(ExecError::Type(format!("expected ordinal, got {other}"))),
    }
}

/// Numeric cells of `col` within `view`, sorted by value with ties in row
/// order. Non-numeric cells are left out.
fn ranked_rows(view: &View<'_>, col: usize, descending: bool) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = view
        .column(col)
        .filter_map(|(r, c)| c.as_number().map(|v| (r, v)))
        .collect();
    ranked.sort_by(|a, b| {
        let ord = a.1.total_cmp(&b.1);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    ranked
}

/// Comparable operand: a number, a piece of text, or a gap.
#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Number(f64),
    Text(String),
    Empty,
}

impl Operand {
    fn from_cell(cell: &CellValue) -> Self {
        match cell {
            CellValue::Number { value, .. } => Operand::Number(*value),
            CellValue::Text(t) => Operand::Text(t.clone()),
            CellValue::Empty(_) => Operand::Empty,
        }
    }

    fn number(&self, function: &'static str) -> Result<f64, ExecError> {
        match self {
            Operand::Number(n) => Ok(*n),
            _ => Err(ExecError::NonNumeric { function }),
        }
    }

    fn text(&self) -> String {
        match self {
            Operand::Number(n) => n.to_string(),
            Operand::Text(t) => normalize_header(t),
            Operand::Empty => String::new(),
        }
    }

    /// Gaps never satisfy a comparison. Ordered comparisons need two numbers.
    fn compare(&self, other: &Operand, cmp: Comparator, function: &'static str) -> Result<bool, ExecError> {
        if matches!(self, Operand::Empty) || matches!(other, Operand::Empty) {
            return if cmp.is_ordered() {
                Err(ExecError::NonNumeric { function })
            } else {
                Ok(false)
            };
        }
        let equal = || match (self, other) {
            (Operand::Number(a), Operand::Number(b)) => a == b,
            _ => self.text() == other.text(),
        };
        Ok(match cmp {
            Comparator::Eq => equal(),
            Comparator::NotEq => !equal(),
            _ => {
                let (a, b) = (self.number(function)?, other.number(function)?);
                match cmp {
                    Comparator::Greater => a > b,
                    Comparator::Less => a < b,
                    Comparator::GreaterEq => a >= b,
                    Comparator::LessEq => a <= b,
                    Comparator::Eq | Comparator::NotEq => unreachable!(),
                }
            }
        })
    }
}
