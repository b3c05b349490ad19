//! Naive reference evaluator used to cross-check [`super::Executor`].
//!
//! Shares no evaluation code with the executor: views are boolean row
//! masks, ranks are computed by counting dominating rows instead of
//! sorting, and every predicate is a separate loop over all table rows.
//! Intended for small tables (a dozen rows) in tests.

// Index loops and negated comparisons keep it visibly unlike the executor.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use crate::dsl::{Comparator, Function, LogicForm, Quantifier};
use crate::table::{normalize_cell, CellValue, Table, View};

use super::{ExecError, ExecOptions, ExecValue};

enum Val {
    Bool(bool),
    Num(f64),
    Cell(CellValue),
    Rows(Vec<bool>),
}

pub fn oracle_execute<'t>(lf: &LogicForm, table: &'t Table) -> Result<ExecValue<'t>, ExecError> {
    oracle_execute_with(lf, table, ExecOptions::default())
}

pub fn oracle_execute_with<'t>(
    lf: &LogicForm,
    table: &'t Table,
    options: ExecOptions,
) -> Result<ExecValue<'t>, ExecError> {
    Ok(match eval(lf, table, &options)? {
        Val::Bool(b) => ExecValue::Bool(b),
        Val::Num(n) => ExecValue::Number(n),
        Val::Cell(c) => ExecValue::Object(c),
        Val::Rows(mask) => {
            let rows = (0..mask.len()).filter(|&i| mask[i]).collect();
            ExecValue::View(View::new(table, rows).expect("mask matches table"))
        }
    })
}

fn type_err(what: &str) -> ExecError {
    ExecError::Type(what.to_string())
}

fn eval(lf: &LogicForm, t: &Table, o: &ExecOptions) -> Result<Val, ExecError> {
    let (f, args) = match lf {
        LogicForm::AllRows => return Ok(Val::Rows(vec![true; t.num_rows()])),
        LogicForm::Literal(s) => return Ok(Val::Cell(normalize_cell(s))),
        LogicForm::Column(_) => return Err(type_err("bare column")),
        LogicForm::Apply(f, args) => (*f, args),
    };
    if args.len() != f.arity() {
        return Err(type_err("arity"));
    }
    let name = f.name();
    match f {
        Function::Count => {
            let m = mask(&args[0], t, o)?;
            Ok(Val::Num(m.iter().filter(|&&b| b).count() as f64))
        }
        Function::Only => {
            let m = mask(&args[0], t, o)?;
            Ok(Val::Bool(m.iter().filter(|&&b| b).count() == 1))
        }
        Function::Avg | Function::Sum => {
            let m = mask(&args[0], t, o)?;
            let c = col(&args[1], t)?;
            let mut total = 0.0;
            let mut n = 0usize;
            for r in 0..t.num_rows() {
                if m[r] {
                    if let CellValue::Number { value, .. } = t.cell(r, c) {
                        total += value;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                return Err(ExecError::EmptyView { function: name });
            }
            Ok(Val::Num(if f == Function::Avg { total / n as f64 } else { total }))
        }
        Function::Argmax
        | Function::Argmin
        | Function::NthArgmax
        | Function::NthArgmin
        | Function::NthMax
        | Function::NthMin => {
            let m = mask(&args[0], t, o)?;
            let c = col(&args[1], t)?;
            let n = match f {
                Function::Argmax | Function::Argmin => 1,
                _ => ord(&args[2])?,
            };
            let high = matches!(f, Function::Argmax | Function::NthArgmax | Function::NthMax);
            let candidates: Vec<(usize, f64)> = (0..t.num_rows())
                .filter(|&r| m[r])
                .filter_map(|r| match t.cell(r, c) {
                    CellValue::Number { value, .. } => Some((r, *value)),
                    _ => None,
                })
                .collect();
            if candidates.is_empty() {
                return Err(ExecError::EmptyView { function: name });
            }
            // rank of a row = 1 + rows that beat it (better value, or equal value earlier)
            let mut hit = None;
            for &(r, v) in &candidates {
                let mut beaten_by = 0;
                for &(s, w) in &candidates {
                    let better = if high { w > v } else { w < v };
                    if better || (w == v && s < r) {
                        beaten_by += 1;
                    }
                }
                if beaten_by + 1 == n {
                    hit = Some((r, v));
                }
            }
            let Some((r, v)) = hit else {
                return Err(ExecError::RankOutOfRange {
                    function: name,
                    rank: n,
                    available: candidates.len(),
                });
            };
            Ok(match f {
                Function::NthMax | Function::NthMin => Val::Num(v),
                _ => {
                    let mut single = vec![false; t.num_rows()];
                    single[r] = true;
                    Val::Rows(single)
                }
            })
        }
        Function::Eq | Function::NotEq => {
            let a = obj(&args[0], t, o)?;
            let b = obj(&args[1], t, o)?;
            let cmp = if f == Function::Eq {
                Comparator::Eq
            } else {
                Comparator::NotEq
            };
            Ok(Val::Bool(holds(&a, &b, cmp) == Some(true)))
        }
        Function::Greater | Function::Less | Function::RoundEq | Function::Diff => {
            let a = obj(&args[0], t, o)?;
            let b = obj(&args[1], t, o)?;
            let (Some(x), Some(y)) = (num_of(&a), num_of(&b)) else {
                return Err(ExecError::NonNumeric { function: name });
            };
            Ok(match f {
                Function::Greater => Val::Bool(x > y),
                Function::Less => Val::Bool(y > x),
                Function::RoundEq => {
                    let allowed = if o.rel_tol * y.abs() > o.abs_tol {
                        o.rel_tol * y.abs()
                    } else {
                        o.abs_tol
                    };
                    Val::Bool(!((x - y).abs() > allowed))
                }
                _ => Val::Num(x - y),
            })
        }
        Function::Majority(q, cmp) => {
            let m = mask(&args[0], t, o)?;
            let c = col(&args[1], t)?;
            let x = obj(&args[2], t, o)?;
            let size = m.iter().filter(|&&b| b).count();
            if size == 0 {
                return Err(ExecError::EmptyView { function: name });
            }
            if cmp.is_ordered() && num_of(&x).is_none() {
                return Err(ExecError::NonNumeric { function: name });
            }
            let mut yes = 0;
            let mut no = 0;
            for r in 0..t.num_rows() {
                if !m[r] {
                    continue;
                }
                if holds(&Oper::Cell(t.cell(r, c).clone()), &x, cmp) == Some(true) {
                    yes += 1;
                } else {
                    no += 1;
                }
            }
            Ok(Val::Bool(match q {
                Quantifier::All => no == 0,
                Quantifier::Most => yes > no,
            }))
        }
        Function::Filter(cmp) => {
            let m = mask(&args[0], t, o)?;
            let c = col(&args[1], t)?;
            let x = obj(&args[2], t, o)?;
            if cmp.is_ordered() && num_of(&x).is_none() {
                return Err(ExecError::NonNumeric { function: name });
            }
            let mut out = vec![false; t.num_rows()];
            for r in 0..t.num_rows() {
                out[r] = m[r] && holds(&Oper::Cell(t.cell(r, c).clone()), &x, cmp) == Some(true);
            }
            Ok(Val::Rows(out))
        }
        Function::FilterAll => {
            let m = mask(&args[0], t, o)?;
            col(&args[1], t)?;
            Ok(Val::Rows(m))
        }
        Function::Hop => {
            let m = mask(&args[0], t, o)?;
            let c = col(&args[1], t)?;
            let picked: Vec<usize> = (0..t.num_rows()).filter(|&r| m[r]).collect();
            if picked.len() != 1 {
                return Err(ExecError::HopCardinality { rows: picked.len() });
            }
            Ok(Val::Cell(t.cell(picked[0], c).clone()))
        }
        Function::And => {
            let a = boolean(&args[0], t, o)?;
            let b = boolean(&args[1], t, o)?;
            Ok(Val::Bool(if a { b } else { false }))
        }
    }
}

fn mask(lf: &LogicForm, t: &Table, o: &ExecOptions) -> Result<Vec<bool>, ExecError> {
    match eval(lf, t, o)? {
        Val::Rows(m) => Ok(m),
        _ => Err(type_err("expected view")),
    }
}

fn boolean(lf: &LogicForm, t: &Table, o: &ExecOptions) -> Result<bool, ExecError> {
    match eval(lf, t, o)? {
        Val::Bool(b) => Ok(b),
        _ => Err(type_err("expected bool")),
    }
}

enum Oper {
    Num(f64),
    Cell(CellValue),
}

fn obj(lf: &LogicForm, t: &Table, o: &ExecOptions) -> Result<Oper, ExecError> {
    match eval(lf, t, o)? {
        Val::Num(n) => Ok(Oper::Num(n)),
        Val::Cell(c) => Ok(Oper::Cell(c)),
        _ => Err(type_err("expected object")),
    }
}

fn col(lf: &LogicForm, t: &Table) -> Result<usize, ExecError> {
    let LogicForm::Column(name) = lf else {
        return Err(type_err("expected column"));
    };
    let wanted: Vec<String> = name.split_whitespace().map(str::to_lowercase).collect();
    for (i, h) in t.headers().iter().enumerate() {
        let have: Vec<String> = h.split_whitespace().map(str::to_lowercase).collect();
        if have == wanted {
            return Ok(i);
        }
    }
    Err(ExecError::UnknownColumn(name.clone()))
}

fn ord(lf: &LogicForm) -> Result<usize, ExecError> {
    let LogicForm::Literal(s) = lf else {
        return Err(type_err("expected ordinal"));
    };
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(type_err("bad ordinal"));
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(type_err("bad ordinal")),
    }
}

fn num_of(x: &Oper) -> Option<f64> {
    match x {
        Oper::Num(n) => Some(*n),
        Oper::Cell(CellValue::Number { value, .. }) => Some(*value),
        Oper::Cell(_) => None,
    }
}

fn is_gap(x: &Oper) -> bool {
    matches!(x, Oper::Cell(CellValue::Empty(_)))
}

fn words(x: &Oper) -> Vec<String> {
    match x {
        Oper::Num(n) => vec![format!("{n}")],
        Oper::Cell(c) => c.text().split_whitespace().map(str::to_lowercase).collect(),
    }
}

/// `None` when the predicate cannot hold (gaps, non-numbers in ordered
/// comparisons).
fn holds(a: &Oper, b: &Oper, cmp: Comparator) -> Option<bool> {
    if is_gap(a) || is_gap(b) {
        return None;
    }
    match cmp {
        Comparator::Eq | Comparator::NotEq => {
            let same = match (num_of(a), num_of(b)) {
                (Some(x), Some(y)) => x == y,
                _ => words(a) == words(b),
            };
            Some(same == (cmp == Comparator::Eq))
        }
        _ => {
            let (x, y) = (num_of(a)?, num_of(b)?);
            Some(match cmp {
                Comparator::Greater => x > y,
                Comparator::Less => y > x,
                Comparator::GreaterEq => !(x < y),
                Comparator::LessEq => !(y < x),
                _ => unreachable!(),
            })
        }
    }
}
