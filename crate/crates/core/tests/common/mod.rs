//! Random acyclic, stratified programs and a possible-world oracle for them.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fairlog::logic::{evaluate, ground, parse, parse_atom, NeuralBindings, ParameterTable, ProofCircuit};

const CONSTS: [&str; 2] = ["c1", "c2"];

#[derive(Debug, Clone)]
struct Lit {
    pred: String,
    negated: bool,
}

#[derive(Debug, Clone)]
struct Rule {
    head: usize,
    prob: Option<f64>,
    body: Vec<Lit>,
}

/// Unary predicates over two constants: base predicates `f*` hold
/// probabilistic or certain facts, derived predicates `d*` only use
/// predicates with a smaller index, so the program is acyclic and stratified.
#[derive(Debug, Clone)]
pub struct RandomProgram {
    pub source: String,
    pub query: String,
    facts: Vec<(String, usize, Option<f64>)>,
    rules: Vec<Rule>,
    n_derived: usize,
}

impl RandomProgram {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_base = rng.random_range(1..=3usize);
        let n_derived = rng.random_range(1..=4usize);
        let mut facts = Vec::new();
        let mut choices = 0;
        for f in 0..n_base {
            for c in 0..CONSTS.len() {
                match rng.random_range(0..4) {
                    0 => {}
                    1 => facts.push((format!("f{f}"), c, None)),
                    _ if choices < 8 => {
                        choices += 1;
                        facts.push((format!("f{f}"), c, Some(rng.random_range(0.05..0.95))));
                    }
                    _ => {}
                }
            }
        }
        let mut rules = Vec::new();
        for d in 0..n_derived {
            for _ in 0..rng.random_range(1..=2) {
                let prob = if choices + 2 <= 10 && rng.random_bool(0.25) {
                    choices += 2;
                    Some(rng.random_range(0.05..0.95))
                } else {
                    None
                };
                let mut body = Vec::new();
                for k in 0..rng.random_range(1..=3) {
                    let pick = rng.random_range(0..n_base + d);
                    let pred = if pick < n_base { format!("f{pick}") } else { format!("d{}", pick - n_base) };
                    // the first literal stays positive so every rule binds X
                    body.push(Lit { pred, negated: k > 0 && rng.random_bool(0.35) });
                }
                rules.push(Rule { head: d, prob, body });
            }
        }
        let mut source = String::new();
        for (p, c, prob) in &facts {
            match prob {
                Some(pr) => source.push_str(&format!("{pr}::{p}({}).\n", CONSTS[*c])),
                None => source.push_str(&format!("{p}({}).\n", CONSTS[*c])),
            }
        }
        for r in &rules {
            let body: Vec<String> = r
                .body
                .iter()
                .map(|l| format!("{}{}(X)", if l.negated { "\\+" } else { "" }, l.pred))
                .collect();
            let head = format!("d{}(X)", r.head);
            match r.prob {
                Some(p) => source.push_str(&format!("{p}::{head} :- {}.\n", body.join(", "))),
                None => source.push_str(&format!("{head} :- {}.\n", body.join(", "))),
            }
        }
        let query = format!("d{}({})", n_derived - 1, CONSTS[rng.random_range(0..2)]);
        RandomProgram {
            source,
            query,
            facts,
            rules,
            n_derived,
        }
    }

    /// Number of independent probabilistic choices in the ground program.
    pub fn num_choices(&self) -> usize {
        self.facts.iter().filter(|f| f.2.is_some()).count()
            + self.rules.iter().filter(|r| r.prob.is_some()).count() * CONSTS.len()
    }

    /// Sums the weights of all worlds whose stratified model contains the query.
    pub fn oracle(&self) -> f64 {
        let fact_choices: Vec<usize> = (0..self.facts.len()).filter(|&i| self.facts[i].2.is_some()).collect();
        let rule_choices: Vec<(usize, usize)> = (0..self.rules.len())
            .filter(|&i| self.rules[i].prob.is_some())
            .flat_map(|i| (0..CONSTS.len()).map(move |c| (i, c)))
            .collect();
        let n = fact_choices.len() + rule_choices.len();
        let (qpred, qconst) = self.query.trim_end_matches(')').split_once('(').unwrap();
        let qd: usize = qpred[1..].parse().unwrap();
        let qc = CONSTS.iter().position(|c| *c == qconst).unwrap();
        let mut total = 0.0;
        for world in 0u32..(1 << n) {
            let on = |k: usize| world >> k & 1 == 1;
            let mut weight = 1.0;
            let mut fact_true = vec![false; self.facts.len()];
            for (i, f) in self.facts.iter().enumerate() {
                if f.2.is_none() {
                    fact_true[i] = true;
                }
            }
            for (k, &i) in fact_choices.iter().enumerate() {
                let p = self.facts[i].2.unwrap();
                fact_true[i] = on(k);
                weight *= if on(k) { p } else { 1.0 - p };
            }
            let mut rule_on = vec![[true; 2]; self.rules.len()];
            for (k, &(i, c)) in rule_choices.iter().enumerate() {
                let p = self.rules[i].prob.unwrap();
                let b = on(fact_choices.len() + k);
                rule_on[i][c] = b;
                weight *= if b { p } else { 1.0 - p };
            }
            let mut derived = vec![[false; 2]; self.n_derived];
            let holds = |pred: &str, c: usize, derived: &Vec<[bool; 2]>| -> bool {
                if let Some(d) = pred.strip_prefix('d') {
                    derived[d.parse::<usize>().unwrap()][c]
                } else {
                    self.facts.iter().zip(&fact_true).any(|((p, fc, _), &t)| t && p == pred && *fc == c)
                }
            };
            for d in 0..self.n_derived {
                for c in 0..CONSTS.len() {
                    let v = self.rules.iter().enumerate().filter(|(_, r)| r.head == d).any(|(i, r)| {
                        rule_on[i][c] && r.body.iter().all(|l| holds(&l.pred, c, &derived) != l.negated)
                    });
                    derived[d][c] = v;
                }
            }
            if derived[qd][qc] {
                total += weight;
            }
        }
        total
    }

    pub fn circuit(&self) -> ProofCircuit {
        let program = parse(&self.source).unwrap();
        ground(
            &program,
            &parse_atom(&self.query).unwrap(),
            &ParameterTable::new(),
            &NeuralBindings::new(),
            &[],
        )
        .unwrap_or_else(|e| panic!("{e}\n{}", self.source))
    }

    /// Engine probability of the query.
    pub fn probability(&self) -> f64 {
        let c = self.circuit();
        let probs = c.leaf_probs(|_, _| unreachable!("no neural predicates"));
        evaluate(&c, &probs).unwrap().probability
    }
}

pub const LOAN_PROGRAM: &str = "
poor_neighborhood(mary).
can_pay_loan(mary).
can_pay_loan(john).
0.1 :: neg_bias(A) :- poor_neighborhood(A).
gets_loan(A) :- can_pay_loan(A), \\+neg_bias(A).
";

use fairlog::loss::LossSpec;
use fairlog::net::{Mlp, Supervision};
use ndarray::Array2;

/// Mean loss over all examples and its gradient with respect to every network parameter.
pub fn loss_and_grad(mlp: &Mlp, data: &dyn Supervision, loss: &LossSpec) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut grad = vec![0.0; mlp.num_params()];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..data.len() {
        let mut rows = Vec::new();
        let k = data.inputs(i, &mut rows);
        let x = Array2::from_shape_vec((k, data.input_dim()), rows).unwrap();
        let tape = mlp.forward_batch(x.view(), false, &mut rng).unwrap();
        let outputs = tape.output().to_vec();
        let mut g = vec![0.0; k];
        total += data.loss_grad(i, &outputs, loss, &mut g).unwrap();
        let grads = mlp.backward(&tape, &g).unwrap();
        for (j, v) in grad.iter_mut().enumerate() {
            *v += grads.get(j);
        }
    }
    let n = data.len() as f64;
    (total / n, grad.into_iter().map(|g| g / n).collect())
}

fn loss_only(mlp: &Mlp, data: &dyn Supervision, loss: &LossSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..data.len() {
        let mut rows = Vec::new();
        let k = data.inputs(i, &mut rows);
        let x = Array2::from_shape_vec((k, data.input_dim()), rows).unwrap();
        let outputs = mlp.predict(x.view()).unwrap().to_vec();
        let mut g = vec![0.0; k];
        total += data.loss_grad(i, &outputs, loss, &mut g).unwrap();
    }
    total / data.len() as f64
}

/// True when `a` and `b` agree to relative tolerance `tol` (with a tiny absolute floor).
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) + 1e-9
}

/// Compares the analytic gradient with central differences on `samples`
/// parameters spread over all layers; returns (parameters checked, failures).
pub fn check_network_gradient(
    mlp: &mut Mlp,
    data: &dyn Supervision,
    loss: &LossSpec,
    samples: usize,
    seed: u64,
) -> (usize, Vec<String>) {
    let (_, grad) = loss_and_grad(mlp, data, loss);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let h = 1e-6;
    for _ in 0..samples {
        let k = rng.random_range(0..mlp.num_params());
        let v = mlp.param(k);
        mlp.set_param(k, v + h);
        let up = loss_only(mlp, data, loss);
        mlp.set_param(k, v - h);
        let down = loss_only(mlp, data, loss);
        mlp.set_param(k, v);
        let fd = (up - down) / (2.0 * h);
        if !close(grad[k], fd, 1e-4) {
            failures.push(format!("param {k}: analytic {} vs numeric {fd}", grad[k]));
        }
    }
    (samples, failures)
}

/// Leaf gradients of random programs against central differences; returns
/// (leaves checked, failures).
pub fn check_circuit_gradients(min_leaves: usize) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut failures = Vec::new();
    let h = 1e-6;
    let mut seed = 0;
    while checked < min_leaves {
        let p = RandomProgram::new(seed);
        seed += 1;
        let c = p.circuit();
        let probs = c.leaf_probs(|_, _| unreachable!());
        let g = evaluate(&c, &probs).unwrap().gradients;
        for i in 0..probs.len() {
            // leaves of certain facts sit at the boundary of [0,1]
            if probs[i] <= h || probs[i] >= 1.0 - h {
                continue;
            }
            let mut q = probs.clone();
            q[i] = probs[i] + h;
            let up = evaluate(&c, &q).unwrap().probability;
            q[i] = probs[i] - h;
            let down = evaluate(&c, &q).unwrap().probability;
            let fd = (up - down) / (2.0 * h);
            checked += 1;
            if !close(g[i], fd, 1e-4) {
                failures.push(format!("program {}: leaf {i} analytic {} vs numeric {fd}", seed - 1, g[i]));
            }
        }
    }
    (checked, failures)
}
