//! Exact inference by Shannon expansion.
//!
//! A [`ProofCircuit`] is compiled into a reduced ordered decision diagram by
//! expanding one leaf variable at a time, sharing identical sub-functions
//! (memoized on node and expanded-variable prefix). Probability and all leaf
//! partial derivatives then come from one upward and one downward pass.

use std::collections::HashMap;

use super::circuit::{LeafId, Node, ProofCircuit};
use super::EngineError;

const FALSE: u32 = 0;
const TRUE: u32 = 1;
const TERMINAL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct BddNode {
    level: u32,
    lo: u32,
    hi: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
}

struct Manager {
    nodes: Vec<BddNode>,
    unique: HashMap<BddNode, u32>,
    apply_memo: HashMap<(Op, u32, u32), u32>,
    not_memo: HashMap<u32, u32>,
}

impl Manager {
    fn new() -> Self {
        let terminal = BddNode {
            level: TERMINAL,
            lo: 0,
            hi: 0,
        };
        Manager {
            nodes: vec![terminal, terminal],
            unique: HashMap::new(),
            apply_memo: HashMap::new(),
            not_memo: HashMap::new(),
        }
    }

    fn mk(&mut self, level: u32, lo: u32, hi: u32) -> u32 {
        if lo == hi {
            return lo;
        }
        let node = BddNode { level, lo, hi };
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.unique.insert(node, id);
        id
    }

    fn level(&self, f: u32) -> u32 {
        self.nodes[f as usize].level
    }

    fn cofactors(&self, f: u32, level: u32) -> (u32, u32) {
        let n = self.nodes[f as usize];
        if n.level == level {
            (n.lo, n.hi)
        } else {
            (f, f)
        }
    }

    fn apply(&mut self, op: Op, f: u32, g: u32) -> u32 {
        match op {
            Op::And => {
                if f == FALSE || g == FALSE {
                    return FALSE;
                }
                if f == TRUE {
                    return g;
                }
                if g == TRUE || f == g {
                    return f;
                }
            }
            Op::Or => {
                if f == TRUE || g == TRUE {
                    return TRUE;
                }
                if f == FALSE {
                    return g;
                }
                if g == FALSE || f == g {
                    return f;
                }
            }
        }
        let key = (op, f.min(g), f.max(g));
        if let Some(&r) = self.apply_memo.get(&key) {
            return r;
        }
        let level = self.level(f).min(self.level(g));
        let (f0, f1) = self.cofactors(f, level);
        let (g0, g1) = self.cofactors(g, level);
        let lo = self.apply(op, f0, g0);
        let hi = self.apply(op, f1, g1);
        let r = self.mk(level, lo, hi);
        self.apply_memo.insert(key, r);
        r
    }

    fn not(&mut self, f: u32) -> u32 {
        match f {
            FALSE => return TRUE,
            TRUE => return FALSE,
            _ => {}
        }
        if let Some(&r) = self.not_memo.get(&f) {
            return r;
        }
        let n = self.nodes[f as usize];
        let lo = self.not(n.lo);
        let hi = self.not(n.hi);
        let r = self.mk(n.level, lo, hi);
        self.not_memo.insert(f, r);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Decision {
    leaf: LeafId,
    lo: u32,
    hi: u32,
}

/// Compiled form of a circuit, reusable across leaf-probability assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    /// Decision nodes; index `i` lives at diagram id `i + 2`, children always precede parents.
    decisions: Vec<Decision>,
    root: u32,
    num_leaves: usize,
}

/// Exact query probability with the partial derivative for every leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub probability: f64,
    /// `gradients[leaf]` is dP/dp_leaf; zero for leaves the query does not depend on.
    pub gradients: Vec<f64>,
}

impl CompiledCircuit {
    pub fn compile(circuit: &ProofCircuit) -> Self {
        let order = circuit.leaf_order();
        let mut level_of = vec![u32::MAX; circuit.num_leaves()];
        for (lvl, &leaf) in order.iter().enumerate() {
            level_of[leaf] = lvl as u32;
        }
        let mut mgr = Manager::new();
        let mut done: HashMap<usize, u32> = HashMap::new();
        let root = build(circuit, circuit.root(), &level_of, &mut mgr, &mut done);

        // keep only the reachable part, renumbered children-first
        let mut remap: HashMap<u32, u32> = HashMap::from([(FALSE, FALSE), (TRUE, TRUE)]);
        let mut decisions = Vec::new();
        let mut stack = vec![(root, false)];
        while let Some((f, expanded)) = stack.pop() {
            if remap.contains_key(&f) {
                continue;
            }
            let n = mgr.nodes[f as usize];
            if expanded {
                decisions.push(Decision {
                    leaf: order[n.level as usize],
                    lo: remap[&n.lo],
                    hi: remap[&n.hi],
                });
                remap.insert(f, decisions.len() as u32 + 1);
            } else {
                stack.push((f, true));
                stack.push((n.hi, false));
                stack.push((n.lo, false));
            }
        }
        CompiledCircuit {
            decisions,
            root: remap[&root],
            num_leaves: circuit.num_leaves(),
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    /// Number of decision nodes in the compiled diagram.
    pub fn size(&self) -> usize {
        self.decisions.len()
    }

    /// Probability of the root for the given leaf probabilities.
    pub fn probability(&self, probs: &[f64]) -> Result<f64, EngineError> {
        self.check(probs)?;
        Ok(self.forward(probs)[self.root as usize])
    }

    pub fn evaluate(&self, probs: &[f64]) -> Result<InferenceResult, EngineError> {
        let mut gradients = vec![0.0; self.num_leaves];
        let probability = self.evaluate_into(probs, &mut gradients)?;
        Ok(InferenceResult {
            probability,
            gradients,
        })
    }

    /// Like [`evaluate`](Self::evaluate) but writes gradients into a caller buffer.
    pub fn evaluate_into(&self, probs: &[f64], gradients: &mut [f64]) -> Result<f64, EngineError> {
        self.check(probs)?;
        let values = self.forward(probs);
        gradients.iter_mut().for_each(|g| *g = 0.0);
        let mut adjoint = vec![0.0; values.len()];
        adjoint[self.root as usize] = 1.0;
        for (i, d) in self.decisions.iter().enumerate().rev() {
            let a = adjoint[i + 2];
            if a == 0.0 {
                continue;
            }
            let p = probs[d.leaf];
            gradients[d.leaf] += a * (values[d.hi as usize] - values[d.lo as usize]);
            adjoint[d.hi as usize] += a * p;
            adjoint[d.lo as usize] += a * (1.0 - p);
        }
        Ok(values[self.root as usize])
    }

    fn forward(&self, probs: &[f64]) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.decisions.len() + 2);
        values.push(0.0);
        values.push(1.0);
        for d in &self.decisions {
            let p = probs[d.leaf];
            let v = p * values[d.hi as usize] + (1.0 - p) * values[d.lo as usize];
            values.push(v);
        }
        values
    }

    fn check(&self, probs: &[f64]) -> Result<(), EngineError> {
        if probs.len() < self.num_leaves {
            return Err(EngineError::MissingLeaf(probs.len()));
        }
        for (leaf, &p) in probs.iter().enumerate().take(self.num_leaves) {
            if !(0.0..=1.0).contains(&p) {
                return Err(EngineError::InvalidProbability { leaf, value: p });
            }
        }
        Ok(())
    }
}

fn build(
    circuit: &ProofCircuit,
    id: usize,
    level_of: &[u32],
    mgr: &mut Manager,
    done: &mut HashMap<usize, u32>,
) -> u32 {
    if let Some(&f) = done.get(&id) {
        return f;
    }
    let f = match circuit.node(id) {
        Node::True => TRUE,
        Node::False => FALSE,
        Node::Leaf(l) => mgr.mk(level_of[*l], FALSE, TRUE),
        Node::Not(c) => {
            let g = build(circuit, *c, level_of, mgr, done);
            mgr.not(g)
        }
        Node::And(cs) => {
            let mut acc = TRUE;
            for &c in cs {
                let g = build(circuit, c, level_of, mgr, done);
                acc = mgr.apply(Op::And, acc, g);
                if acc == FALSE {
                    break;
                }
            }
            acc
        }
        Node::Or(cs) => {
            let mut acc = FALSE;
            for &c in cs {
                let g = build(circuit, c, level_of, mgr, done);
                acc = mgr.apply(Op::Or, acc, g);
                if acc == TRUE {
                    break;
                }
            }
            acc
        }
    };
    done.insert(id, f);
    f
}

/// Exact probability and leaf gradients of `circuit` under `leaf_probs`.
pub fn evaluate(circuit: &ProofCircuit, leaf_probs: &[f64]) -> Result<InferenceResult, EngineError> {
    CompiledCircuit::compile(circuit).evaluate(leaf_probs)
}

/// Largest circuit the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_LEAVES: usize = 20;

/// Sums the weight of every complete leaf assignment that makes the root true.
/// Exponential; meant as a testing oracle.
pub fn brute_force(circuit: &ProofCircuit, leaf_probs: &[f64]) -> Result<f64, EngineError> {
    let n = circuit.num_leaves();
    if n > BRUTE_FORCE_MAX_LEAVES {
        return Err(EngineError::TooManyLeaves {
            leaves: n,
            limit: BRUTE_FORCE_MAX_LEAVES,
        });
    }
    if leaf_probs.len() < n {
        return Err(EngineError::MissingLeaf(leaf_probs.len()));
    }
    let mut total = 0.0;
    let mut assignment = vec![false; n];
    for world in 0u64..(1u64 << n) {
        let mut weight = 1.0;
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = world >> i & 1 == 1;
            weight *= if *slot { leaf_probs[i] } else { 1.0 - leaf_probs[i] };
        }
        if circuit.eval_bool(&assignment) {
            total += weight;
        }
    }
    Ok(total)
}
