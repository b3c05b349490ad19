//! The fixed function catalog: names, categories, abstraction groups and
//! signatures of every logic-form function.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight reasoning operations a statement can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Unique,
    Aggregation,
    Count,
    Ordinal,
    Comparative,
    Majority,
    Conjunction,
    Other,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Unique,
        Category::Aggregation,
        Category::Count,
        Category::Ordinal,
        Category::Comparative,
        Category::Majority,
        Category::Conjunction,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Unique => "unique",
            Category::Aggregation => "aggregation",
            Category::Count => "count",
            Category::Ordinal => "ordinal",
            Category::Comparative => "comparative",
            Category::Majority => "majority",
            Category::Conjunction => "conjunction",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Abstraction groups used when turning logic forms into templates.
///
/// Functions that differ only in direction or polarity share a group.
/// Singleton groups are printed with the function's own name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Unique,
    Aggregation,
    Count,
    OrdArg,
    Ordinal,
    SuperArg,
    CompareEq,
    CompareRound,
    CompareGt,
    CompareDiff,
    MajorityAllEq,
    MajorityAllGt,
    MajorityAllGe,
    MajorityMostEq,
    MajorityMostGt,
    MajorityMostGe,
    Filter,
    FilterAll,
    Hop,
    And,
}

impl Group {
    /// Template token for the group: the shared name for multi-member
    /// groups, the function name otherwise.
    pub fn token(self) -> &'static str {
        match self {
            Group::Unique => "only",
            Group::Aggregation => "AGGREGATION",
            Group::Count => "count",
            Group::OrdArg => "ORD_ARG",
            Group::Ordinal => "ORDINAL",
            Group::SuperArg => "SUPER_ARG",
            Group::CompareEq => "COMPARE_EQ",
            Group::CompareRound => "round_eq",
            Group::CompareGt => "COMPARE_GT",
            Group::CompareDiff => "diff",
            Group::MajorityAllEq => "MAJORITY_ALL_EQ",
            Group::MajorityAllGt => "MAJORITY_ALL_GT",
            Group::MajorityAllGe => "MAJORITY_ALL_GE",
            Group::MajorityMostEq => "MAJORITY_MOST_EQ",
            Group::MajorityMostGt => "MAJORITY_MOST_GT",
            Group::MajorityMostGe => "MAJORITY_MOST_GE",
            Group::Filter => "FILTER",
            Group::FilterAll => "filter_all",
            Group::Hop => "hop",
            Group::And => "and",
        }
    }

    pub fn from_token(token: &str) -> Option<Group> {
        CATALOG.iter().map(|s| s.group).find(|g| g.token() == token)
    }

    pub fn members(self) -> impl Iterator<Item = Function> {
        CATALOG.iter().filter(move |s| s.group == self).map(|s| s.function)
    }

    /// All members share one signature shape; this is the first member's.
    pub fn signature(self) -> &'static FunctionSignature {
        CATALOG.iter().find(|s| s.group == self).expect("group has members")
    }
}

/// Comparison used by comparators, majority predicates and filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Eq,
    NotEq,
    Greater,
    Less,
    GreaterEq,
    LessEq,
}

impl Comparator {
    pub fn is_ordered(self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::NotEq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    All,
    Most,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Only,
    Avg,
    Sum,
    Count,
    NthArgmax,
    NthArgmin,
    NthMax,
    NthMin,
    Argmax,
    Argmin,
    Eq,
    NotEq,
    RoundEq,
    Greater,
    Less,
    Diff,
    Majority(Quantifier, Comparator),
    Filter(Comparator),
    FilterAll,
    Hop,
    And,
}

/// Argument slot kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    View,
    Header,
    /// A column that must be numeric.
    NumericHeader,
    Object,
    /// A positive integer literal.
    Ordinal,
    Bool,
}

/// Static result types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Bool,
    Number,
    Object,
    View,
    /// A view statically known to hold at most one row.
    Row,
}

impl ValueType {
    pub fn is_view(self) -> bool {
        matches!(self, ValueType::View | ValueType::Row)
    }

    pub fn is_object(self) -> bool {
        matches!(self, ValueType::Number | ValueType::Object)
    }
}

#[derive(Debug)]
pub struct FunctionSignature {
    pub name: &'static str,
    pub function: Function,
    pub category: Category,
    pub group: Group,
    pub args: &'static [ArgKind],
    pub returns: ValueType,
}

use ArgKind as A;
use Category as C;
use Comparator as Cmp;
use Function as F;
use Group as G;
use Quantifier as Q;
use ValueType as V;

const VIEW: &[ArgKind] = &[A::View];
const VIEW_NUM: &[ArgKind] = &[A::View, A::NumericHeader];
const VIEW_NUM_ORD: &[ArgKind] = &[A::View, A::NumericHeader, A::Ordinal];
const VIEW_HDR: &[ArgKind] = &[A::View, A::Header];
const VIEW_HDR_OBJ: &[ArgKind] = &[A::View, A::Header, A::Object];
const VIEW_NUM_OBJ: &[ArgKind] = &[A::View, A::NumericHeader, A::Object];
const OBJ_OBJ: &[ArgKind] = &[A::Object, A::Object];
const BOOL_BOOL: &[ArgKind] = &[A::Bool, A::Bool];

macro_rules! sig {
    ($name:literal, $f:expr, $c:expr, $g:expr, $args:expr, $ret:expr) => {
        FunctionSignature {
            name: $name,
            function: $f,
            category: $c,
            group: $g,
            args: $args,
            returns: $ret,
        }
    };
}

/// Every function in the language, in catalog order.
pub static CATALOG: &[FunctionSignature] = &[
    sig!("only", F::Only, C::Unique, G::Unique, VIEW, V::Bool),
    sig!("avg", F::Avg, C::Aggregation, G::Aggregation, VIEW_NUM, V::Number),
    sig!("sum", F::Sum, C::Aggregation, G::Aggregation, VIEW_NUM, V::Number),
    sig!("count", F::Count, C::Count, G::Count, VIEW, V::Number),
    sig!("nth_argmax", F::NthArgmax, C::Ordinal, G::OrdArg, VIEW_NUM_ORD, V::Row),
    sig!("nth_argmin", F::NthArgmin, C::Ordinal, G::OrdArg, VIEW_NUM_ORD, V::Row),
    sig!("nth_max", F::NthMax, C::Ordinal, G::Ordinal, VIEW_NUM_ORD, V::Number),
    sig!("nth_min", F::NthMin, C::Ordinal, G::Ordinal, VIEW_NUM_ORD, V::Number),
    sig!("argmax", F::Argmax, C::Ordinal, G::SuperArg, VIEW_NUM, V::Row),
    sig!("argmin", F::Argmin, C::Ordinal, G::SuperArg, VIEW_NUM, V::Row),
    sig!("eq", F::Eq, C::Comparative, G::CompareEq, OBJ_OBJ, V::Bool),
    sig!("not_eq", F::NotEq, C::Comparative, G::CompareEq, OBJ_OBJ, V::Bool),
    sig!(
        "round_eq",
        F::RoundEq,
        C::Comparative,
        G::CompareRound,
        OBJ_OBJ,
        V::Bool
    ),
    sig!("greater", F::Greater, C::Comparative, G::CompareGt, OBJ_OBJ, V::Bool),
    sig!("less", F::Less, C::Comparative, G::CompareGt, OBJ_OBJ, V::Bool),
    sig!("diff", F::Diff, C::Comparative, G::CompareDiff, OBJ_OBJ, V::Number),
    sig!(
        "all_eq",
        F::Majority(Q::All, Cmp::Eq),
        C::Majority,
        G::MajorityAllEq,
        VIEW_HDR_OBJ,
        V::Bool
    ),
    sig!(
        "all_not_eq",
        F::Majority(Q::All, Cmp::NotEq),
        C::Majority,
        G::MajorityAllEq,
        VIEW_HDR_OBJ,
        V::Bool
    ),
    sig!(
        "all_greater",
        F::Majority(Q::All, Cmp::Greater),
        C::Majority,
        G::MajorityAllGt,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "all_less",
        F::Majority(Q::All, Cmp::Less),
        C::Majority,
        G::MajorityAllGt,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "all_greater_eq",
        F::Majority(Q::All, Cmp::GreaterEq),
        C::Majority,
        G::MajorityAllGe,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "all_less_eq",
        F::Majority(Q::All, Cmp::LessEq),
        C::Majority,
        G::MajorityAllGe,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "most_eq",
        F::Majority(Q::Most, Cmp::Eq),
        C::Majority,
        G::MajorityMostEq,
        VIEW_HDR_OBJ,
        V::Bool
    ),
    sig!(
        "most_not_eq",
        F::Majority(Q::Most, Cmp::NotEq),
        C::Majority,
        G::MajorityMostEq,
        VIEW_HDR_OBJ,
        V::Bool
    ),
    sig!(
        "most_greater",
        F::Majority(Q::Most, Cmp::Greater),
        C::Majority,
        G::MajorityMostGt,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "most_less",
        F::Majority(Q::Most, Cmp::Less),
        C::Majority,
        G::MajorityMostGt,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "most_greater_eq",
        F::Majority(Q::Most, Cmp::GreaterEq),
        C::Majority,
        G::MajorityMostGe,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "most_less_eq",
        F::Majority(Q::Most, Cmp::LessEq),
        C::Majority,
        G::MajorityMostGe,
        VIEW_NUM_OBJ,
        V::Bool
    ),
    sig!(
        "filter_eq",
        F::Filter(Cmp::Eq),
        C::Conjunction,
        G::Filter,
        VIEW_HDR_OBJ,
        V::View
    ),
    sig!(
        "filter_not_eq",
        F::Filter(Cmp::NotEq),
        C::Conjunction,
        G::Filter,
        VIEW_HDR_OBJ,
        V::View
    ),
    sig!(
        "filter_greater",
        F::Filter(Cmp::Greater),
        C::Conjunction,
        G::Filter,
        VIEW_NUM_OBJ,
        V::View
    ),
    sig!(
        "filter_less",
        F::Filter(Cmp::Less),
        C::Conjunction,
        G::Filter,
        VIEW_NUM_OBJ,
        V::View
    ),
    sig!(
        "filter_greater_eq",
        F::Filter(Cmp::GreaterEq),
        C::Conjunction,
        G::Filter,
        VIEW_NUM_OBJ,
        V::View
    ),
    sig!(
        "filter_less_eq",
        F::Filter(Cmp::LessEq),
        C::Conjunction,
        G::Filter,
        VIEW_NUM_OBJ,
        V::View
    ),
    sig!(
        "filter_all",
        F::FilterAll,
        C::Conjunction,
        G::FilterAll,
        VIEW_HDR,
        V::View
    ),
    sig!("hop", F::Hop, C::Other, G::Hop, VIEW_HDR, V::Object),
    sig!("and", F::And, C::Other, G::And, BOOL_BOOL, V::Bool),
];

impl Function {
    pub fn from_name(name: &str) -> Option<Function> {
        CATALOG.iter().find(|s| s.name == name).map(|s| s.function)
    }

    pub fn signature(self) -> &'static FunctionSignature {
        CATALOG
            .iter()
            .find(|s| s.function == self)
            .expect("every function is in the catalog")
    }

    pub fn name(self) -> &'static str {
        self.signature().name
    }

    pub fn category(self) -> Category {
        self.signature().category
    }

    pub fn group(self) -> Group {
        self.signature().group
    }

    pub fn arity(self) -> usize {
        self.signature().args.len()
    }

    pub fn args(self) -> &'static [ArgKind] {
        self.signature().args
    }

    pub fn returns(self) -> ValueType {
        self.signature().returns
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
