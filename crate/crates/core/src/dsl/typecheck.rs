//! Static checking of logic forms against a table schema.
//!
//! Only headers and column types are consulted, never cell contents.

use thiserror::Error;

use super::ast::LogicForm;
use super::catalog::{ArgKind, Function, ValueType};
use crate::table::Table;

/// How `hop` arguments are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypeCheckMode {
    /// `hop` must read from a row selection (`argmax`, `nth_argmin`, ...).
    Strict,
    /// `hop` accepts any view; cardinality is checked at execution time.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("{function} expects a numeric column, {column:?} is textual")]
    NonNumericColumn { function: &'static str, column: String },
    #[error("argument {position} of {function}: expected {expected}, found {found}")]
    Mismatch {
        function: &'static str,
        position: usize,
        expected: &'static str,
        found: String,
    },
    #[error("ordinal {0:?} is not a positive integer")]
    InvalidOrdinal(String),
    #[error("{function} takes {expected} argument(s), found {found}")]
    Arity {
        function: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("a column reference cannot stand alone")]
    BareColumn,
}

/// A logic form that passed type checking, with its result type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypedForm<'a> {
    pub form: &'a LogicForm,
    pub result: ValueType,
}

pub fn type_check<'a>(lf: &'a LogicForm, table: &Table) -> Result<TypedForm<'a>, TypeError> {
    type_check_with(lf, table, TypeCheckMode::default())
}

pub fn type_check_with<'a>(lf: &'a LogicForm, table: &Table, mode: TypeCheckMode) -> Result<TypedForm<'a>, TypeError> {
    let result = match lf {
        LogicForm::Column(_) => return Err(TypeError::BareColumn),
        _ => check(lf, table, mode)?,
    };
    Ok(TypedForm { form: lf, result })
}

/// Positive integer ordinal, as accepted in `nth_*` positions.
pub fn parse_ordinal(text: &str) -> Option<usize> {
    text.parse::<usize>().ok().filter(|&n| n >= 1)
}

fn check(lf: &LogicForm, table: &Table, mode: TypeCheckMode) -> Result<ValueType, TypeError> {
    match lf {
        LogicForm::AllRows => Ok(ValueType::View),
        LogicForm::Literal(_) => Ok(ValueType::Object),
        LogicForm::Column(_) => Err(TypeError::BareColumn),
        LogicForm::Apply(f, args) => {
            let kinds = f.args();
            if kinds.len() != args.len() {
                return Err(TypeError::Arity {
                    function: f.name(),
                    expected: kinds.len(),
                    found: args.len(),
                });
            }
            for (position, (arg, &kind)) in args.iter().zip(kinds).enumerate() {
                check_arg(*f, position, arg, kind, table, mode)?;
            }
            Ok(f.returns())
        }
    }
}

fn describe(lf: &LogicForm, table: &Table, mode: TypeCheckMode) -> Result<String, TypeError> {
    Ok(match lf {
        LogicForm::Column(c) => format!("column {c:?}"),
        LogicForm::Literal(l) => format!("literal {l:?}"),
        other => format!("{:?}", check(other, table, mode)?).to_lowercase(),
    })
}

fn check_arg(
    f: Function,
    position: usize,
    arg: &LogicForm,
    kind: ArgKind,
    table: &Table,
    mode: TypeCheckMode,
) -> Result<(), TypeError> {
    let mismatch = |expected: &'static str| -> Result<(), TypeError> {
        Err(TypeError::Mismatch {
            function: f.name(),
            position,
            expected,
            found: describe(arg, table, mode)?,
        })
    };
    match kind {
        ArgKind::Header | ArgKind::NumericHeader => {
            let LogicForm::Column(name) = arg else {
                return mismatch("header");
            };
            let idx = table
                .column_index(name)
                .ok_or_else(|| TypeError::UnknownColumn(name.clone()))?;
            if kind == ArgKind::NumericHeader && !table.is_numeric(idx) {
                return Err(TypeError::NonNumericColumn {
                    function: f.name(),
                    column: name.clone(),
                });
            }
            Ok(())
        }
        ArgKind::Ordinal => match arg {
            LogicForm::Literal(text) if parse_ordinal(text).is_some() => Ok(()),
            LogicForm::Literal(text) => Err(TypeError::InvalidOrdinal(text.clone())),
            _ => mismatch("ordinal literal"),
        },
        ArgKind::View => {
            if matches!(arg, LogicForm::Column(_) | LogicForm::Literal(_)) {
                return mismatch("view");
            }
            let ty = check(arg, table, mode)?;
            if f == Function::Hop && mode == TypeCheckMode::Strict && ty != ValueType::Row {
                return mismatch("single-row view");
            }
            if ty.is_view() {
                Ok(())
            } else {
                mismatch("view")
            }
        }
        ArgKind::Object => {
            if matches!(arg, LogicForm::Column(_)) {
                return mismatch("object");
            }
            if check(arg, table, mode)?.is_object() {
                Ok(())
            } else {
                mismatch("object")
            }
        }
        ArgKind::Bool => {
            if matches!(arg, LogicForm::Column(_) | LogicForm::Literal(_)) {
                return mismatch("bool");
            }
            if check(arg, table, mode)? == ValueType::Bool {
                Ok(())
            } else {
                mismatch("bool")
            }
        }
    }
}
