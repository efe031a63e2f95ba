//! Top-down grounding of a query into a [`ProofCircuit`].
//!
//! Goals are resolved against program clauses depth-first. Every completed
//! subgoal is tabled by its variant, so a ground atom reached along several
//! proofs contributes one shared circuit node, and every ground probabilistic
//! or neural fact becomes exactly one leaf.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::circuit::{CircuitBuilder, LeafSource, NodeId, ProofCircuit, FALSE, TRUE};
use super::term::{Atom, ClauseLabel, Literal, ParameterTable, ProbExpr, Program, Term};
use super::EngineError;

/// What a neural predicate contributes for one grounded call.
#[derive(Debug, Clone, PartialEq)]
pub enum NeuralLeaf {
    /// A fixed probability, e.g. an attribute selector returning 0 or 1.
    /// Exact 0 and 1 fold into the circuit as constants.
    Constant(f64),
    /// A trainable classifier evaluated on these inputs; the probability is
    /// supplied at evaluation time and gradients flow back to this input.
    Classifier(Vec<f64>),
}

/// Evaluator behind `nn(name, Args) :: head.`
pub trait NeuralPredicate: Send + Sync {
    fn resolve(&self, args: &[Term], input: &[f64]) -> Result<NeuralLeaf, String>;
}

impl<F> NeuralPredicate for F
where
    F: Fn(&[Term], &[f64]) -> Result<NeuralLeaf, String> + Send + Sync,
{
    fn resolve(&self, args: &[Term], input: &[f64]) -> Result<NeuralLeaf, String> {
        self(args, input)
    }
}

/// Network name → evaluator.
#[derive(Clone, Default)]
pub struct NeuralBindings {
    predicates: HashMap<String, Arc<dyn NeuralPredicate>>,
}

impl fmt::Debug for NeuralBindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.predicates.keys().collect();
        names.sort();
        f.debug_struct("NeuralBindings").field("networks", &names).finish()
    }
}

impl NeuralBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, predicate: impl NeuralPredicate + 'static) -> &mut Self {
        self.predicates.insert(name.into(), Arc::new(predicate));
        self
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn NeuralPredicate>> {
        self.predicates.get(name)
    }
}

type Subst = HashMap<String, Term>;

fn walk<'a>(t: &'a Term, s: &'a Subst) -> &'a Term {
    let mut t = t;
    while let Term::Var(v) = t {
        match s.get(v) {
            Some(b) => t = b,
            None => break,
        }
    }
    t
}

fn resolve(t: &Term, s: &Subst) -> Term {
    match walk(t, s) {
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| resolve(a, s)).collect()),
        other => other.clone(),
    }
}

fn resolve_atom(a: &Atom, s: &Subst) -> Atom {
    Atom::new(a.predicate.clone(), a.args.iter().map(|t| resolve(t, s)).collect())
}

fn occurs(v: &str, t: &Term, s: &Subst) -> bool {
    match walk(t, s) {
        Term::Var(w) => w == v,
        Term::Compound(_, args) => args.iter().any(|a| occurs(v, a, s)),
        _ => false,
    }
}

fn unify(a: &Term, b: &Term, s: &mut Subst) -> bool {
    let a = walk(a, s).clone();
    let b = walk(b, s).clone();
    match (a, b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), t) | (t, Term::Var(x)) => {
            if occurs(&x, &t, s) {
                return false;
            }
            s.insert(x, t);
            true
        }
        (Term::Compound(f, fa), Term::Compound(g, ga)) => {
            f == g && fa.len() == ga.len() && fa.iter().zip(&ga).all(|(x, y)| unify(x, y, s))
        }
        (x, y) => x == y,
    }
}

fn unify_atoms(a: &Atom, b: &Atom, s: &mut Subst) -> bool {
    a.predicate == b.predicate
        && a.arity() == b.arity()
        && a.args.iter().zip(&b.args).all(|(x, y)| unify(x, y, s))
}

fn rename(t: &Term, suffix: &str) -> Term {
    match t {
        Term::Var(v) => Term::Var(format!("{v}#{suffix}")),
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| rename(a, suffix)).collect()),
        other => other.clone(),
    }
}

fn rename_atom(a: &Atom, suffix: &str) -> Atom {
    Atom::new(a.predicate.clone(), a.args.iter().map(|t| rename(t, suffix)).collect())
}

/// Canonical text of a goal up to variable renaming.
fn variant_key(a: &Atom) -> String {
    fn canon(t: &Term, names: &mut Vec<String>) -> Term {
        match t {
            Term::Var(v) => {
                let i = names.iter().position(|n| n == v).unwrap_or_else(|| {
                    names.push(v.clone());
                    names.len() - 1
                });
                Term::Var(format!("_V{i}"))
            }
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|x| canon(x, names)).collect()),
            other => other.clone(),
        }
    }
    let mut names = Vec::new();
    let args = a.args.iter().map(|t| canon(t, &mut names)).collect();
    format!("{}/{}", Atom::new(a.predicate.clone(), args), a.arity())
}

const BUILTINS: [&str; 7] = [">", "<", ">=", "=<", "=:=", "is", "="];

fn is_builtin(a: &Atom) -> bool {
    a.arity() == 2 && BUILTINS.contains(&a.predicate.as_str())
}

fn eval_arith(t: &Term, s: &Subst, goal: &Atom) -> Result<i64, EngineError> {
    match walk(t, s) {
        Term::Int(i) => Ok(*i),
        Term::Var(_) => Err(EngineError::NonGroundBuiltin(resolve_atom(goal, s).to_string())),
        Term::Compound(op, args) if args.len() == 2 => {
            let x = eval_arith(&args[0], s, goal)?;
            let y = eval_arith(&args[1], s, goal)?;
            let r = match op.as_str() {
                "+" => x.checked_add(y),
                "-" => x.checked_sub(y),
                "*" => x.checked_mul(y),
                _ => return Err(EngineError::Arithmetic(format!("unknown operator {op}"))),
            };
            r.ok_or_else(|| EngineError::Arithmetic(format!("overflow in {}", resolve(t, s))))
        }
        other => Err(EngineError::Arithmetic(format!("`{other}` is not an integer expression"))),
    }
}

/// Solutions of a built-in goal under `s`.
fn call_builtin(goal: &Atom, s: &Subst) -> Result<Vec<Subst>, EngineError> {
    let (lhs, rhs) = (&goal.args[0], &goal.args[1]);
    let holds = match goal.predicate.as_str() {
        "=" => {
            let mut s2 = s.clone();
            return Ok(if unify(lhs, rhs, &mut s2) { vec![s2] } else { vec![] });
        }
        "is" => {
            let value = eval_arith(rhs, s, goal)?;
            let mut s2 = s.clone();
            return Ok(if unify(lhs, &Term::Int(value), &mut s2) {
                vec![s2]
            } else {
                vec![]
            });
        }
        op => {
            let x = eval_arith(lhs, s, goal)?;
            let y = eval_arith(rhs, s, goal)?;
            match op {
                ">" => x > y,
                "<" => x < y,
                ">=" => x >= y,
                "=<" => x <= y,
                _ => x == y,
            }
        }
    };
    Ok(if holds { vec![s.clone()] } else { vec![] })
}

struct Grounder<'a> {
    program: &'a Program,
    params: &'a ParameterTable,
    neural: &'a NeuralBindings,
    input: &'a [f64],
    by_predicate: HashMap<(&'a str, usize), Vec<usize>>,
    builder: CircuitBuilder,
    table: HashMap<String, Vec<(Atom, NodeId)>>,
    /// Goals under resolution, with whether each was entered through a negation.
    stack: Vec<(String, bool)>,
    fresh: usize,
}

impl<'a> Grounder<'a> {
    fn solve_atom(&mut self, goal: &Atom, via_negation: bool) -> Result<Vec<(Atom, NodeId)>, EngineError> {
        let key = variant_key(goal);
        if let Some(answers) = self.table.get(&key) {
            return Ok(answers.clone());
        }
        if let Some(start) = self.stack.iter().position(|(k, _)| *k == key) {
            let negated = via_negation || self.stack[start + 1..].iter().any(|(_, n)| *n);
            return Err(if negated {
                EngineError::UnstratifiedNegation(goal.to_string())
            } else {
                EngineError::CyclicProgram(goal.to_string())
            });
        }
        self.stack.push((key.clone(), via_negation));
        let result = self.resolve_clauses(goal);
        self.stack.pop();
        let answers = result?;
        self.table.insert(key, answers.clone());
        Ok(answers)
    }

    fn resolve_clauses(&mut self, goal: &Atom) -> Result<Vec<(Atom, NodeId)>, EngineError> {
        let mut grouped: Vec<(Atom, Vec<NodeId>)> = Vec::new();
        let mut slot: HashMap<Atom, usize> = HashMap::new();
        let candidates = self
            .by_predicate
            .get(&(goal.predicate.as_str(), goal.arity()))
            .cloned()
            .unwrap_or_default();
        for ci in candidates {
            let clause = &self.program.clauses[ci];
            self.fresh += 1;
            let suffix = self.fresh.to_string();
            let head = rename_atom(&clause.head, &suffix);
            let mut s = Subst::new();
            if !unify_atoms(&head, goal, &mut s) {
                continue;
            }
            let body: Vec<Literal> = clause
                .body
                .iter()
                .map(|l| Literal {
                    atom: rename_atom(&l.atom, &suffix),
                    negated: l.negated,
                })
                .collect();
            let proofs = self.solve_body(&body, s, TRUE)?;
            for (s, body_node) in proofs {
                let answer = resolve_atom(&head, &s);
                if !answer.is_ground() {
                    return Err(EngineError::NonGroundAnswer(answer.to_string()));
                }
                let node = match &clause.label {
                    ClauseLabel::Deterministic => body_node,
                    ClauseLabel::Probabilistic(expr) => {
                        let p = self.probability(expr, &suffix, &s)?;
                        let key = format!("{}::{}#c{ci}", prob_label(expr, &suffix, &s), answer);
                        let leaf = self.builder.leaf(key, || LeafSource::Fixed(p));
                        self.builder.and([body_node, leaf])
                    }
                    ClauseLabel::Neural { network, args } => {
                        let args: Vec<Term> = args.iter().map(|a| resolve(&rename(a, &suffix), &s)).collect();
                        self.neural_leaf(network, args, &answer, ci)?
                    }
                };
                if node == FALSE {
                    continue;
                }
                match slot.get(&answer) {
                    Some(&i) => grouped[i].1.push(node),
                    None => {
                        slot.insert(answer.clone(), grouped.len());
                        grouped.push((answer, vec![node]));
                    }
                }
            }
        }
        Ok(grouped
            .into_iter()
            .map(|(atom, nodes)| {
                let n = self.builder.or(nodes);
                (atom, n)
            })
            .collect())
    }

    fn neural_leaf(&mut self, network: &str, args: Vec<Term>, head: &Atom, ci: usize) -> Result<NodeId, EngineError> {
        if let Some(bad) = args.iter().find(|a| !a.is_ground()) {
            return Err(EngineError::Neural {
                network: network.to_string(),
                message: format!("argument `{bad}` is not ground"),
            });
        }
        let predicate = self
            .neural
            .get(network)
            .ok_or_else(|| EngineError::UnboundNetwork(network.to_string()))?
            .clone();
        let out = predicate.resolve(&args, self.input).map_err(|message| EngineError::Neural {
            network: network.to_string(),
            message,
        })?;
        let key = format!("nn({network},{})::{head}#c{ci}", join(&args));
        Ok(match out {
            NeuralLeaf::Constant(p) if p == 1.0 => TRUE,
            NeuralLeaf::Constant(p) if p == 0.0 => FALSE,
            NeuralLeaf::Constant(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(EngineError::Neural {
                        network: network.to_string(),
                        message: format!("probability {p} outside [0,1]"),
                    });
                }
                self.builder.leaf(key, || LeafSource::Fixed(p))
            }
            NeuralLeaf::Classifier(features) => self.builder.leaf(key, || LeafSource::Neural {
                network: network.to_string(),
                args,
                features,
            }),
        })
    }

    fn probability(&self, expr: &ProbExpr, suffix: &str, s: &Subst) -> Result<f64, EngineError> {
        match expr {
            ProbExpr::Value(v) => Ok(*v),
            ProbExpr::Param { name, index } => {
                let idx = match index {
                    None => 0,
                    Some(t) => match resolve(&rename(t, suffix), s) {
                        Term::Int(i) => i,
                        other => return Err(EngineError::BadParameterIndex(other.to_string())),
                    },
                };
                self.params
                    .get(name, idx)
                    .ok_or_else(|| EngineError::UnresolvedParameter {
                        name: name.clone(),
                        index: idx,
                    })
            }
        }
    }

    fn solve_body(&mut self, body: &[Literal], s: Subst, node: NodeId) -> Result<Vec<(Subst, NodeId)>, EngineError> {
        let Some((lit, rest)) = body.split_first() else {
            return Ok(vec![(s, node)]);
        };
        let mut out = Vec::new();
        if is_builtin(&lit.atom) {
            let sols = call_builtin(&lit.atom, &s)?;
            if lit.negated {
                if sols.is_empty() {
                    out.extend(self.solve_body(rest, s, node)?);
                }
            } else {
                for s2 in sols {
                    out.extend(self.solve_body(rest, s2, node)?);
                }
            }
            return Ok(out);
        }
        let goal = resolve_atom(&lit.atom, &s);
        if lit.negated {
            if !goal.is_ground() {
                return Err(EngineError::NonGroundNegation(goal.to_string()));
            }
            let answers = self.solve_atom(&goal, true)?;
            let g = self.builder.or(answers.into_iter().map(|(_, n)| n));
            let ng = self.builder.not(g);
            let next = self.builder.and([node, ng]);
            if next != FALSE {
                out.extend(self.solve_body(rest, s, next)?);
            }
            return Ok(out);
        }
        for (answer, ans_node) in self.solve_atom(&goal, false)? {
            let mut s2 = s.clone();
            if !unify_atoms(&goal, &answer, &mut s2) {
                continue;
            }
            let next = self.builder.and([node, ans_node]);
            if next != FALSE {
                out.extend(self.solve_body(rest, s2, next)?);
            }
        }
        Ok(out)
    }
}

fn join(args: &[Term]) -> String {
    args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

fn prob_label(expr: &ProbExpr, suffix: &str, s: &Subst) -> String {
    match expr {
        ProbExpr::Param { name, index: Some(t) } => format!("{name}({})", resolve(&rename(t, suffix), s)),
        other => other.to_string(),
    }
}

/// Grounds `query` against `program` into a circuit whose value is the query's
/// success probability. `input` is the external feature vector handed to neural
/// predicates. Queries must be ground.
pub fn ground(
    program: &Program,
    query: &Atom,
    params: &ParameterTable,
    neural: &NeuralBindings,
    input: &[f64],
) -> Result<ProofCircuit, EngineError> {
    if !query.is_ground() {
        return Err(EngineError::NonGroundQuery(query.to_string()));
    }
    let mut by_predicate: HashMap<(&str, usize), Vec<usize>> = HashMap::new();
    for (i, c) in program.clauses.iter().enumerate() {
        by_predicate
            .entry((c.head.predicate.as_str(), c.head.arity()))
            .or_default()
            .push(i);
    }
    let mut g = Grounder {
        program,
        params,
        neural,
        input,
        by_predicate,
        builder: CircuitBuilder::new(),
        table: HashMap::new(),
        stack: Vec::new(),
        fresh: 0,
    };
    let root = if is_builtin(query) {
        if call_builtin(query, &Subst::new())?.is_empty() {
            FALSE
        } else {
            TRUE
        }
    } else {
        let answers = g.solve_atom(query, false)?;
        g.builder.or(answers.into_iter().map(|(_, n)| n))
    };
    Ok(g.builder.finish(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{evaluate, parse, parse_atom};

    const EXAMPLE_LOAN: &str = "
        poor_neighborhood(mary).
        can_pay_loan(mary).
        can_pay_loan(john).
        0.1 :: neg_bias(A) :- poor_neighborhood(A).
        gets_loan(A) :- can_pay_loan(A), \\+neg_bias(A).
    ";

    fn prob(src: &str, query: &str) -> f64 {
        let program = parse(src).unwrap();
        let c = ground(
            &program,
            &parse_atom(query).unwrap(),
            &ParameterTable::new(),
            &NeuralBindings::new(),
            &[],
        )
        .unwrap();
        let probs = c.leaf_probs(|_, _| unreachable!());
        evaluate(&c, &probs).unwrap().probability
    }

    #[test]
    fn loan_example() {
        let program = parse(EXAMPLE_LOAN).unwrap();
        let none = NeuralBindings::new();
        let params = ParameterTable::new();
        let mary = ground(&program, &parse_atom("gets_loan(mary)").unwrap(), &params, &none, &[]).unwrap();
        assert_eq!(mary.num_leaves(), 1);
        let john = ground(&program, &parse_atom("gets_loan(john)").unwrap(), &params, &none, &[]).unwrap();
        assert_eq!(john.num_leaves(), 0);
        assert_eq!(john.constant_value(), Some(true));
        assert!((prob(EXAMPLE_LOAN, "gets_loan(mary)") - 0.9).abs() < 1e-12);
        assert_eq!(prob(EXAMPLE_LOAN, "gets_loan(john)"), 1.0);
        assert_eq!(prob(EXAMPLE_LOAN, "gets_loan(bob)"), 0.0);
    }

    #[test]
    fn multiple_proofs_are_disjoined() {
        // P(a) = 1 - (1-0.5)(1-0.5*0.4)
        let p = prob("0.5 :: b. 0.5 :: c. 0.4 :: d. a :- b. a :- c, d.", "a");
        assert!((p - (1.0 - 0.5 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn same_fact_shared_across_proofs() {
        // a :- b. a :- b, c.  => P(a) = P(b)
        let program = parse("0.3 :: b. 0.6 :: c. a :- b. a :- b, c.").unwrap();
        let c = ground(
            &program,
            &parse_atom("a").unwrap(),
            &ParameterTable::new(),
            &NeuralBindings::new(),
            &[],
        )
        .unwrap();
        assert!((evaluate(&c, &c.leaf_probs(|_, _| 0.0)).unwrap().probability - 0.3).abs() < 1e-12);
    }

    #[test]
    fn parameters_and_indices() {
        let src = "p1 :: a. p2(N) :: b(N) :- n(N). n(3). q :- a, b(3).";
        let program = parse(src).unwrap();
        let mut params = ParameterTable::new();
        params.set("p1", 0, 0.5).set("p2", 3, 0.2);
        let c = ground(&program, &parse_atom("q").unwrap(), &params, &NeuralBindings::new(), &[]).unwrap();
        let r = evaluate(&c, &c.leaf_probs(|_, _| 0.0)).unwrap();
        assert!((r.probability - 0.1).abs() < 1e-12);

        let missing = ParameterTable::new().with("p1", 0.5);
        let err = ground(&program, &parse_atom("q").unwrap(), &missing, &NeuralBindings::new(), &[]).unwrap_err();
        assert_eq!(
            err,
            EngineError::UnresolvedParameter {
                name: "p2".into(),
                index: 3
            }
        );
    }

    #[test]
    fn builtins_count_down() {
        let src = "
            0.5 :: f(N).
            c(0).
            c(N) :- >(N,0), is(M,N-1), f(N), c(M).
            ";
        let p = prob(src, "c(3)");
        assert!((p - 0.125).abs() < 1e-12);
    }

    #[test]
    fn non_ground_builtin_rejected() {
        let program = parse("a :- >(X, 1).").unwrap();
        let err = ground(
            &program,
            &parse_atom("a").unwrap(),
            &ParameterTable::new(),
            &NeuralBindings::new(),
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::NonGroundBuiltin(_)));
    }

    #[test]
    fn cycles_and_unstratified_negation_rejected() {
        let none = NeuralBindings::new();
        let params = ParameterTable::new();
        let program = parse("0.5 :: b. a :- b, \\+a.").unwrap();
        let err = ground(&program, &parse_atom("a").unwrap(), &params, &none, &[]).unwrap_err();
        assert!(matches!(err, EngineError::UnstratifiedNegation(_)));

        let program = parse("0.5 :: c. a :- b. b :- a. b :- c.").unwrap();
        let err = ground(&program, &parse_atom("a").unwrap(), &params, &none, &[]).unwrap_err();
        assert!(matches!(err, EngineError::CyclicProgram(_)));
    }

    #[test]
    fn neural_bindings() {
        let program = parse("nn(h,X) :: y_h(X). nn(a,X) :: a(X). y(X) :- y_h(X), a(X).").unwrap();
        let mut nb = NeuralBindings::new();
        nb.bind("h", |_: &[Term], input: &[f64]| Ok(NeuralLeaf::Classifier(input[1..].to_vec())));
        nb.bind("a", |_: &[Term], input: &[f64]| Ok(NeuralLeaf::Constant(input[0])));
        let q = parse_atom("y(x)").unwrap();
        let params = ParameterTable::new();

        let c = ground(&program, &q, &params, &nb, &[1.0, 0.25, 0.5]).unwrap();
        assert_eq!(c.num_leaves(), 1);
        match &c.leaves()[0].source {
            LeafSource::Neural { features, network, .. } => {
                assert_eq!(network, "h");
                assert_eq!(features, &vec![0.25, 0.5]);
            }
            other => panic!("unexpected leaf {other:?}"),
        }
        let c0 = ground(&program, &q, &params, &nb, &[0.0, 0.25, 0.5]).unwrap();
        assert_eq!(c0.constant_value(), Some(false));

        let err = ground(&program, &q, &params, &NeuralBindings::new(), &[1.0]).unwrap_err();
        assert_eq!(err, EngineError::UnboundNetwork("h".into()));
    }

    #[test]
    fn non_ground_query_rejected() {
        let program = parse("a(1).").unwrap();
        let err = ground(
            &program,
            &parse_atom("a(X)").unwrap(),
            &ParameterTable::new(),
            &NeuralBindings::new(),
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::NonGroundQuery(_)));
    }
}
