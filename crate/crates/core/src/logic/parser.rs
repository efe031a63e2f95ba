//! Reader for the program text format.
//!
//! Clauses end with `.`; `P :: Head :- Body.` and `P :: Head.` are probabilistic,
//! `nn(net, Args) :: Head.` declares a neural fact, `\+` negates a body literal,
//! `?- Atom.` or `query(Atom).` declares a query and `%` starts a line comment. Built-in
//! comparisons and `is` may be written prefix (`>(N,0)`) or infix (`N > 0`).

use thiserror::Error;

use super::term::{Atom, Clause, ClauseLabel, Literal, ProbExpr, Program, SourcePos, Term};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: SourcePos, message: String },
    #[error("{pos}: probability {value} outside [0,1]")]
    ProbabilityOutOfRange { pos: SourcePos, value: f64 },
    #[error("{pos}: label variable {var} does not occur in the clause")]
    UnboundLabelVariable { pos: SourcePos, var: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    ColonColon,
    Neck,
    QueryMark,
    Naf,
    Op(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Float(x) => format!("`{x}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::ColonColon => "`::`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::QueryMark => "`?-`".into(),
            Tok::Naf => "`\\+`".into(),
            Tok::Op(o) => format!("`{o}`"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn pos(&self) -> SourcePos {
        SourcePos {
            line: self.line,
            column: self.col,
        }
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len())
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, SourcePos)>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => break,
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some(c) => {
                    let pos = self.pos();
                    let tok = self.token(c, pos)?;
                    out.push((tok, pos));
                }
            }
        }
        Ok(out)
    }

    fn token(&mut self, c: char, pos: SourcePos) -> Result<Tok, ParseError> {
        let syntax = |message: String| ParseError::Syntax { pos, message };
        if c.is_ascii_digit() {
            let start = self.offset();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            let mut is_float = false;
            if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                self.bump();
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
            if matches!(self.peek(), Some('e') | Some('E')) {
                let save = (self.chars.clone(), self.line, self.col);
                self.bump();
                if matches!(self.peek(), Some('-') | Some('+')) {
                    self.bump();
                }
                if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    is_float = true;
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                    }
                } else {
                    (self.chars, self.line, self.col) = save;
                }
            }
            let end = self.offset();
            let text = &self.src[start..end];
            return if is_float {
                text.parse()
                    .map(Tok::Float)
                    .map_err(|_| syntax(format!("bad number `{text}`")))
            } else {
                text.parse()
                    .map(Tok::Int)
                    .map_err(|_| syntax(format!("bad integer `{text}`")))
            };
        }
        if c.is_alphabetic() || c == '_' {
            let start = self.offset();
            while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                self.bump();
            }
            let end = self.offset();
            let text = self.src[start..end].to_string();
            return Ok(if c.is_uppercase() || c == '_' {
                Tok::Var(text)
            } else {
                Tok::Ident(text)
            });
        }
        self.bump();
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            ':' => match self.peek() {
                Some(':') => {
                    self.bump();
                    Tok::ColonColon
                }
                Some('-') => {
                    self.bump();
                    Tok::Neck
                }
                _ => return Err(syntax("expected `::` or `:-`".into())),
            },
            '?' if self.peek() == Some('-') => {
                self.bump();
                Tok::QueryMark
            }
            '\\' if self.peek() == Some('+') => {
                self.bump();
                Tok::Naf
            }
            '>' if self.peek() == Some('=') => {
                self.bump();
                Tok::Op(">=")
            }
            '>' => Tok::Op(">"),
            '<' => Tok::Op("<"),
            '=' if self.peek() == Some('<') => {
                self.bump();
                Tok::Op("=<")
            }
            '=' => Tok::Op("="),
            other => return Err(syntax(format!("unexpected character `{other}`"))),
        };
        Ok(tok)
    }
}

struct Parser {
    toks: Vec<(Tok, SourcePos)>,
    at: usize,
    end: SourcePos,
}

const INFIX_GOALS: [&str; 5] = [">", "<", ">=", "=<", "="];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> SourcePos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.at += 1;
                Ok(())
            }
            Some(t) => self.err(format!("expected {}, found {}", want.describe(), t.describe())),
            None => self.err(format!("expected {}, found end of input", want.describe())),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut program = Program::default();
        while self.peek().is_some() {
            if self.peek() == Some(&Tok::QueryMark) {
                self.at += 1;
                let pos = self.pos();
                let t = self.term()?;
                let atom = to_atom(t, pos)?;
                self.expect(&Tok::Dot)?;
                program.queries.push(atom);
            } else if self.peek() == Some(&Tok::Ident("query".into()))
                && self.toks.get(self.at + 1).map(|(t, _)| t) == Some(&Tok::LParen)
            {
                let pos = self.pos();
                match self.term()? {
                    Term::Compound(_, mut args) if args.len() == 1 => {
                        let atom = to_atom(args.remove(0), pos)?;
                        self.expect(&Tok::Dot)?;
                        program.queries.push(atom);
                    }
                    _ => return self.err("query/1 takes one atom"),
                }
            } else {
                program.clauses.push(self.clause()?);
            }
        }
        Ok(program)
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let pos = self.pos();
        let literal_prob = match (self.peek(), self.toks.get(self.at + 1).map(|(t, _)| t)) {
            (Some(Tok::Float(x)), Some(Tok::ColonColon)) => Some(*x),
            (Some(Tok::Int(i)), Some(Tok::ColonColon)) => Some(*i as f64),
            _ => None,
        };
        if let Some(value) = literal_prob {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParseError::ProbabilityOutOfRange { pos, value });
            }
            self.at += 2;
            let head_pos = self.pos();
            let head = to_atom(self.term()?, head_pos)?;
            return self.finish_clause(ClauseLabel::Probabilistic(ProbExpr::Value(value)), head, pos);
        }
        let first = self.term()?;
        let (label, head) = if self.peek() == Some(&Tok::ColonColon) {
            self.at += 1;
            let label = to_label(first, pos)?;
            let head_pos = self.pos();
            let head = to_atom(self.term()?, head_pos)?;
            (label, head)
        } else {
            (ClauseLabel::Deterministic, to_atom(first, pos)?)
        };
        self.finish_clause(label, head, pos)
    }

    fn finish_clause(
        &mut self,
        label: ClauseLabel,
        head: Atom,
        pos: SourcePos,
    ) -> Result<Clause, ParseError> {
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::Neck) {
            self.at += 1;
            loop {
                body.push(self.literal()?);
                if self.peek() == Some(&Tok::Comma) {
                    self.at += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::Dot)?;
        let clause = Clause {
            head,
            body,
            label,
            pos,
        };
        check_label_vars(&clause)?;
        Ok(clause)
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negated = if self.peek() == Some(&Tok::Naf) {
            self.at += 1;
            true
        } else {
            false
        };
        let pos = self.pos();
        let lhs = self.term()?;
        let infix = match self.peek() {
            Some(Tok::Op(op)) if INFIX_GOALS.contains(op) => Some(op.to_string()),
            Some(Tok::Ident(s)) if s == "is" => Some("is".to_string()),
            _ => None,
        };
        let atom = match infix {
            Some(op) => {
                self.at += 1;
                let rhs = self.term()?;
                Atom::new(op, vec![lhs, rhs])
            }
            None => to_atom(lhs, pos)?,
        };
        Ok(Literal { atom, negated })
    }

    /// Additive expression over primaries; plain terms are the degenerate case.
    fn term(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.primary()?;
        while let Some(Tok::Op(op @ ("+" | "-"))) = self.peek() {
            let op = op.to_string();
            self.at += 1;
            let rhs = self.primary()?;
            lhs = Term::Compound(op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.next() {
            Some(Tok::Int(i)) => Ok(Term::Int(i)),
            Some(Tok::Float(_)) => {
                self.at -= 1;
                self.err("floating-point numbers may only appear as probabilities")
            }
            Some(Tok::Var(v)) => Ok(Term::Var(v)),
            Some(Tok::Op("-")) => match self.next() {
                Some(Tok::Int(i)) => Ok(Term::Int(-i)),
                _ => {
                    self.at -= 1;
                    self.err("expected an integer after unary `-`")
                }
            },
            Some(Tok::Ident(name)) => self.maybe_args(name),
            Some(Tok::Op(op)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.maybe_args(op.to_string())
                } else {
                    self.at -= 1;
                    self.err(format!("unexpected operator `{op}`"))
                }
            }
            Some(Tok::LParen) => {
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Some(t) => {
                self.at -= 1;
                self.err(format!("expected a term, found {}", t.describe()))
            }
            None => self.err("expected a term, found end of input"),
        }
    }

    fn maybe_args(&mut self, name: String) -> Result<Term, ParseError> {
        if self.peek() != Some(&Tok::LParen) {
            return Ok(Term::Sym(name));
        }
        self.at += 1;
        let mut args = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            args.push(self.term()?);
        }
        self.expect(&Tok::RParen)?;
        Ok(Term::Compound(name, args))
    }
}

fn to_atom(t: Term, pos: SourcePos) -> Result<Atom, ParseError> {
    match t {
        Term::Sym(name) => Ok(Atom::new(name, vec![])),
        Term::Compound(name, args) => Ok(Atom::new(name, args)),
        other => Err(ParseError::Syntax {
            pos,
            message: format!("expected an atom, found `{other}`"),
        }),
    }
}

fn to_label(t: Term, pos: SourcePos) -> Result<ClauseLabel, ParseError> {
    match t {
        Term::Sym(name) => Ok(ClauseLabel::Probabilistic(ProbExpr::Param { name, index: None })),
        Term::Compound(name, mut args) if name == "nn" => {
            let network = match args.remove(0) {
                Term::Sym(n) => n,
                other => {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!("network name must be a constant, found `{other}`"),
                    })
                }
            };
            Ok(ClauseLabel::Neural { network, args })
        }
        Term::Compound(name, mut args) if args.len() == 1 => match args.pop() {
            Some(idx @ (Term::Int(_) | Term::Var(_))) => Ok(ClauseLabel::Probabilistic(
                ProbExpr::Param {
                    name,
                    index: Some(idx),
                },
            )),
            _ => Err(ParseError::Syntax {
                pos,
                message: "parameter index must be an integer or a variable".into(),
            }),
        },
        other => Err(ParseError::Syntax {
            pos,
            message: format!("invalid probability label `{other}`"),
        }),
    }
}

fn check_label_vars(clause: &Clause) -> Result<(), ParseError> {
    let label_vars: Vec<&str> = match &clause.label {
        ClauseLabel::Deterministic => return Ok(()),
        ClauseLabel::Probabilistic(ProbExpr::Param {
            index: Some(idx), ..
        }) => {
            let mut v = Vec::new();
            idx.collect_vars(&mut v);
            v
        }
        ClauseLabel::Probabilistic(_) => Vec::new(),
        ClauseLabel::Neural { args, .. } => {
            if !clause.body.is_empty() {
                return Err(ParseError::Syntax {
                    pos: clause.pos,
                    message: "neural facts cannot have a body".into(),
                });
            }
            let mut v = Vec::new();
            args.iter().for_each(|a| a.collect_vars(&mut v));
            v
        }
    };
    let clause_vars = clause.vars();
    match label_vars.into_iter().find(|v| !clause_vars.contains(v)) {
        Some(var) => Err(ParseError::UnboundLabelVariable {
            pos: clause.pos,
            var: var.to_string(),
        }),
        None => Ok(()),
    }
}

/// Parses a complete program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(source).tokenize()?;
    let end = end_pos(source);
    Parser { toks, at: 0, end }.program()
}

/// Parses a single atom such as `gets_loan(mary)`; a trailing `.` is optional.
pub fn parse_atom(source: &str) -> Result<Atom, ParseError> {
    let toks = Lexer::new(source).tokenize()?;
    let end = end_pos(source);
    let mut p = Parser { toks, at: 0, end };
    let pos = p.pos();
    let atom = to_atom(p.term()?, pos)?;
    if p.peek() == Some(&Tok::Dot) {
        p.at += 1;
    }
    if let Some(t) = p.peek() {
        let d = t.describe();
        return p.err(format!("unexpected {d} after atom"));
    }
    Ok(atom)
}

fn end_pos(source: &str) -> SourcePos {
    let line = source.lines().count().max(1);
    let column = source.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    SourcePos { line, column }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilistic_rule() {
        let p = parse("0.1 :: neg_bias(A) :- poor_neighborhood(A).").unwrap();
        assert_eq!(p.clauses.len(), 1);
        let c = &p.clauses[0];
        assert_eq!(c.label, ClauseLabel::Probabilistic(ProbExpr::Value(0.1)));
        assert_eq!(c.head, Atom::new("neg_bias", vec![Term::var("A")]));
        assert_eq!(c.body.len(), 1);
    }

    #[test]
    fn plain_fact() {
        let p = parse("raining.").unwrap();
        assert_eq!(p.clauses.len(), 1);
        assert!(p.clauses[0].is_fact());
        assert_eq!(p.clauses[0].label, ClauseLabel::Deterministic);
    }

    #[test]
    fn comments_and_query() {
        let p = parse("% header\nwet :- raining. % trailing\n?- wet.\n").unwrap();
        assert_eq!(p.clauses.len(), 1);
        assert_eq!(p.queries, vec![Atom::new("wet", vec![])]);
        let q = parse("wet.\nquery(wet).\n").unwrap();
        assert_eq!(q.queries, p.queries);
    }

    #[test]
    fn indexed_parameter_and_negation() {
        let p = parse("p1(N) :: n_neg_bias(X_,N):- \\+ a(X_).").unwrap();
        let c = &p.clauses[0];
        assert_eq!(
            c.label,
            ClauseLabel::Probabilistic(ProbExpr::Param {
                name: "p1".into(),
                index: Some(Term::var("N"))
            })
        );
        assert!(c.body[0].negated);
    }

    #[test]
    fn builtins_prefix_and_infix() {
        let p = parse("d(N) :- >(N,0), is(N2,N-1), N2 >= 0, M is N2 + 1, M = N.").unwrap();
        let body = &p.clauses[0].body;
        assert_eq!(body[0].atom.predicate, ">");
        assert_eq!(
            body[1].atom.args[1],
            Term::Compound("-".into(), vec![Term::var("N"), Term::Int(1)])
        );
        assert_eq!(body[2].atom.predicate, ">=");
        assert_eq!(body[3].atom.predicate, "is");
        assert_eq!(body[4].atom.predicate, "=");
    }

    #[test]
    fn neural_fact() {
        let p = parse("nn(n,X_,N) :: n(X_,N).").unwrap();
        assert_eq!(
            p.clauses[0].label,
            ClauseLabel::Neural {
                network: "n".into(),
                args: vec![Term::var("X_"), Term::var("N")]
            }
        );
    }

    #[test]
    fn rejects_out_of_range_probability() {
        let err = parse("1.5 :: a.").unwrap_err();
        assert!(matches!(err, ParseError::ProbabilityOutOfRange { value, .. } if value == 1.5));
    }

    #[test]
    fn rejects_unbound_label_variable() {
        let err = parse("p(K) :: a(X) :- b(X).").unwrap_err();
        assert!(matches!(err, ParseError::UnboundLabelVariable { ref var, .. } if var == "K"));
        let err = parse("nn(h,Z) :: y(X).").unwrap_err();
        assert!(matches!(err, ParseError::UnboundLabelVariable { .. }));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse("a :- b.\nc :- d e.").unwrap_err();
        match err {
            ParseError::Syntax { pos, .. } => {
                assert_eq!(pos.line, 2);
                assert_eq!(pos.column, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("a :- b").is_err());
    }

    #[test]
    fn display_round_trips() {
        let src = "0.1 :: neg_bias(A) :- poor_neighborhood(A).\n\
                   gets_loan(A) :- can_pay_loan(A), \\+neg_bias(A).\n\
                   nn(h,X) :: y_h(X).\n?- gets_loan(mary).";
        let p = parse(src).unwrap();
        let again = parse(&p.to_string()).unwrap();
        assert_eq!(p.clauses.len(), again.clauses.len());
        for (a, b) in p.clauses.iter().zip(&again.clauses) {
            assert_eq!((&a.head, &a.body, &a.label), (&b.head, &b.body, &b.label));
        }
        assert_eq!(p.queries, again.queries);
    }
}
