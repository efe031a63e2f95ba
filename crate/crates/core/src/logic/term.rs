//! Terms, atoms, clauses and programs of the probabilistic logic language.

use std::collections::HashMap;
use std::fmt;

/// A first-order term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Logic variable; names start with an uppercase letter or `_`.
    Var(String),
    /// Symbolic constant such as `mary` or `x`.
    Sym(String),
    Int(i64),
    /// Functor applied to at least one argument.
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn sym(name: impl Into<String>) -> Self {
        Term::Sym(name.into())
    }

    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        assert!(!args.is_empty(), "compound terms need at least one argument");
        Term::Compound(functor.into(), args)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Sym(_) | Term::Int(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub(crate) fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Sym(v) => write!(f, "{v}"),
            Term::Int(i) => write!(f, "{i}"),
            Term::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// `predicate(args...)`; predicate name and arity identify the predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            return write!(f, "{}", self.predicate);
        }
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Body literal; `negated` is negation as failure (`\+`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "\\+")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// Probability annotation of a probabilistic clause.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbExpr {
    Value(f64),
    /// Named parameter, optionally indexed by an integer or a variable bound by the clause.
    Param { name: String, index: Option<Term> },
}

impl fmt::Display for ProbExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbExpr::Value(v) => write!(f, "{v}"),
            ProbExpr::Param { name, index: None } => write!(f, "{name}"),
            ProbExpr::Param {
                name,
                index: Some(i),
            } => write!(f, "{name}({i})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClauseLabel {
    Deterministic,
    Probabilistic(ProbExpr),
    /// `nn(network, Args...) :: head.`
    Neural { network: String, args: Vec<Term> },
}

/// Line/column of a clause in its source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourcePos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub label: ClauseLabel,
    pub pos: SourcePos,
}

impl Clause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Variables occurring in the head or body.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.head.args.iter().for_each(|a| a.collect_vars(&mut out));
        for lit in &self.body {
            lit.atom.args.iter().for_each(|a| a.collect_vars(&mut out));
        }
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            ClauseLabel::Deterministic => {}
            ClauseLabel::Probabilistic(p) => write!(f, "{p} :: ")?,
            ClauseLabel::Neural { network, args } => {
                write!(f, "nn({network}")?;
                for a in args {
                    write!(f, ",{a}")?;
                }
                write!(f, ") :: ")?;
            }
        }
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub queries: Vec<Atom>,
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        for q in &self.queries {
            writeln!(f, "?- {q}.")?;
        }
        Ok(())
    }
}

impl Program {
    /// Names of all parameters referenced by probabilistic clauses.
    pub fn parameter_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.clauses {
            if let ClauseLabel::Probabilistic(ProbExpr::Param { name, .. }) = &c.label {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }
}

/// Values of named probability parameters, keyed by `(name, index)`.
/// Unindexed references use index 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterTable {
    values: HashMap<(String, i64), f64>,
}

impl ParameterTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics when `value` is outside `[0, 1]`.
    pub fn set(&mut self, name: impl Into<String>, index: i64, value: f64) -> &mut Self {
        assert!(
            (0.0..=1.0).contains(&value),
            "parameter probability {value} outside [0,1]"
        );
        self.values.insert((name.into(), index), value);
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.set(name, 0, value);
        self
    }

    pub fn get(&self, name: &str, index: i64) -> Option<f64> {
        self.values.get(&(name.to_string(), index)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, i64), &f64)> {
        self.values.iter()
    }
}
