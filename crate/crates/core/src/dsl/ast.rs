use std::fmt;

use super::catalog::{Category, Function};

/// A logic form: an expression tree over the function catalog.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LogicForm {
    Apply(Function, Vec<LogicForm>),
    AllRows,
    Column(String),
    Literal(String),
}

/// Trims and collapses whitespace runs, the canonical form of literal and
/// column text inside a logic form.
pub(crate) fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl LogicForm {
    pub fn apply(function: Function, args: Vec<LogicForm>) -> Self {
        LogicForm::Apply(function, args)
    }

    pub fn column(name: &str) -> Self {
        LogicForm::Column(collapse_whitespace(name))
    }

    pub fn literal(text: &str) -> Self {
        LogicForm::Literal(collapse_whitespace(text))
    }

    /// Canonical printed form; parsing it yields `self` again.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn function(&self) -> Option<Function> {
        match self {
            LogicForm::Apply(f, _) => Some(*f),
            _ => None,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            LogicForm::Apply(_, args) => 1 + args.iter().map(LogicForm::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Column references in left-to-right order, repeats included.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let LogicForm::Column(c) = n {
                out.push(c.as_str());
            }
        });
        out
    }

    /// Literal values in left-to-right order, repeats included.
    pub fn literals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let LogicForm::Literal(l) = n {
                out.push(l.as_str());
            }
        });
        out
    }

    fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a LogicForm)) {
        visit(self);
        if let LogicForm::Apply(_, args) = self {
            for a in args {
                a.walk(visit);
            }
        }
    }

    /// The reasoning operation a statement built on this form exercises.
    ///
    /// An equality assertion against a literal (`eq { count { … } ; 3 }`)
    /// takes the category of the asserted quantity; a `hop` takes the
    /// category of the row selection it reads from.
    pub fn category(&self) -> Category {
        match self {
            LogicForm::Apply(f, args) if matches!(f, Function::Eq | Function::NotEq | Function::RoundEq) => {
                match (&args[0], &args[1]) {
                    (LogicForm::Literal(_), other) | (other, LogicForm::Literal(_)) if other.function().is_some() => {
                        quantity_category(other)
                    }
                    _ => f.category(),
                }
            }
            LogicForm::Apply(f, _) => f.category(),
            _ => Category::Other,
        }
    }
}

fn quantity_category(form: &LogicForm) -> Category {
    match form {
        LogicForm::Apply(Function::Hop, args) => match args[0].function() {
            Some(inner) => inner.category(),
            None => Category::Other,
        },
        LogicForm::Apply(f, _) => f.category(),
        _ => Category::Other,
    }
}

/// Escapes the structural characters of the grammar. A token spelled
/// exactly `all_rows` gets a leading escape so it stays a literal.
pub(crate) fn escape_atom(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    if text == "all_rows" {
        out.push('\\');
    }
    for c in text.chars() {
        if matches!(c, '{' | '}' | ';' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

impl fmt::Display for LogicForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicForm::Apply(func, args) => {
                write!(f, "{} {{ ", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(" }")
            }
            LogicForm::AllRows => f.write_str("all_rows"),
            LogicForm::Column(text) | LogicForm::Literal(text) => f.write_str(&escape_atom(text)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_logic_form;

    #[test]
    fn prints_canonical_spacing() {
        let lf = LogicForm::apply(Function::Count, vec![LogicForm::AllRows]);
        assert_eq!(lf.to_string(), "count { all_rows }");
    }

    #[test]
    fn literals_print_unquoted_and_escaped() {
        assert_eq!(LogicForm::literal("san jose").to_string(), "san jose");
        assert_eq!(LogicForm::literal("a;b{c}").to_string(), r"a\;b\{c\}");
        assert_eq!(LogicForm::literal("all_rows").to_string(), r"\all_rows");
    }

    #[test]
    fn categories() {
        let cat = |s: &str| parse_logic_form(s).unwrap().category();
        assert_eq!(cat("eq { count { all_rows } ; 3 }"), Category::Count);
        assert_eq!(cat("round_eq { avg { all_rows ; p } ; 3 }"), Category::Aggregation);
        assert_eq!(cat("eq { hop { argmax { all_rows ; p } ; t } ; b }"), Category::Ordinal);
        assert_eq!(
            cat("eq { hop { filter_eq { all_rows ; t ; a } ; p } ; 3 }"),
            Category::Conjunction
        );
        assert_eq!(cat("eq { hop { all_rows ; p } ; 3 }"), Category::Other);
        assert_eq!(
            cat("greater { hop { argmax { all_rows ; p } ; p } ; 3 }"),
            Category::Comparative
        );
        assert_eq!(cat("eq { 3 ; 3 }"), Category::Comparative);
        assert_eq!(cat("only { all_rows }"), Category::Unique);
        assert_eq!(cat("most_greater { all_rows ; p ; 2 }"), Category::Majority);
        assert_eq!(cat("and { only { all_rows } ; only { all_rows } }"), Category::Other);
    }

    #[test]
    fn entity_listing() {
        let lf = parse_logic_form("eq { hop { filter_eq { all_rows ; team ; a } ; points } ; 3 }").unwrap();
        assert_eq!(lf.columns(), vec!["team", "points"]);
        assert_eq!(lf.literals(), vec!["a", "3"]);
        assert_eq!(lf.depth(), 3);
    }
}
