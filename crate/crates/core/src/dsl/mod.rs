//! Logic forms: the function catalog, expression trees, the textual
//! grammar and static type checking.

mod ast;
pub mod catalog;
mod parser;
mod typecheck;

pub use ast::LogicForm;
pub use catalog::{ArgKind, Category, Comparator, Function, FunctionSignature, Group, Quantifier, ValueType, CATALOG};
pub use parser::{parse_logic_form, ParseError};
pub(crate) use parser::{parse_raw, RawNode};
pub use typecheck::{parse_ordinal, type_check, type_check_with, TypeCheckMode, TypeError, TypedForm};

/// Prints a logic form in canonical notation.
pub fn print_logic_form(lf: &LogicForm) -> String {
    lf.to_string()
}
