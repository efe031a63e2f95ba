//! Grounded proof structure: a hash-consed AND/OR/NOT DAG over Bernoulli leaves.

use std::collections::HashMap;

use super::term::Term;

pub type NodeId = usize;
pub type LeafId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    True,
    False,
    Leaf(LeafId),
    Not(NodeId),
    And(Vec<NodeId>),
    Or(Vec<NodeId>),
}

/// Where a leaf's probability comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafSource {
    /// Probabilistic fact or clause with a resolved probability.
    Fixed(f64),
    /// Output of a trainable network on the given classifier input.
    Neural {
        network: String,
        args: Vec<Term>,
        features: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    /// Human-readable identity, e.g. `0.1::neg_bias(mary)`.
    pub label: String,
    pub source: LeafSource,
}

impl Leaf {
    pub fn is_neural(&self) -> bool {
        matches!(self.source, LeafSource::Neural { .. })
    }
}

/// Rooted DAG; every leaf is one independent Bernoulli variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofCircuit {
    pub(crate) nodes: Vec<Node>,
    pub(crate) leaves: Vec<Leaf>,
    pub(crate) root: NodeId,
}

impl ProofCircuit {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn neural_leaves(&self) -> impl Iterator<Item = (LeafId, &Leaf)> {
        self.leaves.iter().enumerate().filter(|(_, l)| l.is_neural())
    }

    pub fn fixed_leaves(&self) -> impl Iterator<Item = (LeafId, &Leaf)> {
        self.leaves.iter().enumerate().filter(|(_, l)| !l.is_neural())
    }

    /// True when the root is a constant (no probabilistic fact on any proof).
    pub fn constant_value(&self) -> Option<bool> {
        match self.nodes[self.root] {
            Node::True => Some(true),
            Node::False => Some(false),
            _ => None,
        }
    }

    /// Leaf probabilities with neural leaves filled by `neural`.
    pub fn leaf_probs(&self, mut neural: impl FnMut(LeafId, &Leaf) -> f64) -> Vec<f64> {
        self.leaves
            .iter()
            .enumerate()
            .map(|(i, l)| match l.source {
                LeafSource::Fixed(p) => p,
                LeafSource::Neural { .. } => neural(i, l),
            })
            .collect()
    }

    /// Boolean value of the root under a complete leaf assignment.
    pub fn eval_bool(&self, assignment: &[bool]) -> bool {
        let mut memo: Vec<Option<bool>> = vec![None; self.nodes.len()];
        self.eval_node(self.root, assignment, &mut memo)
    }

    fn eval_node(&self, id: NodeId, assignment: &[bool], memo: &mut [Option<bool>]) -> bool {
        if let Some(v) = memo[id] {
            return v;
        }
        let v = match &self.nodes[id] {
            Node::True => true,
            Node::False => false,
            Node::Leaf(l) => assignment[*l],
            Node::Not(c) => !self.eval_node(*c, assignment, memo),
            Node::And(cs) => cs.iter().all(|&c| self.eval_node(c, assignment, memo)),
            Node::Or(cs) => cs.iter().any(|&c| self.eval_node(c, assignment, memo)),
        };
        memo[id] = Some(v);
        v
    }

    /// Leaves in order of first appearance in a depth-first walk from the root.
    pub fn leaf_order(&self) -> Vec<LeafId> {
        let mut seen_nodes = vec![false; self.nodes.len()];
        let mut seen_leaves = vec![false; self.leaves.len()];
        let mut order = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if seen_nodes[id] {
                continue;
            }
            seen_nodes[id] = true;
            match &self.nodes[id] {
                Node::Leaf(l) => {
                    if !seen_leaves[*l] {
                        seen_leaves[*l] = true;
                        order.push(*l);
                    }
                }
                Node::Not(c) => stack.push(*c),
                Node::And(cs) | Node::Or(cs) => stack.extend(cs.iter().rev()),
                Node::True | Node::False => {}
            }
        }
        order
    }
}

/// Builder with structural sharing and constant folding.
#[derive(Debug, Default)]
pub struct CircuitBuilder {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
    leaves: Vec<Leaf>,
    leaf_index: HashMap<String, LeafId>,
}

pub const TRUE: NodeId = 0;
pub const FALSE: NodeId = 1;

impl CircuitBuilder {
    pub fn new() -> Self {
        let mut b = CircuitBuilder::default();
        b.intern(Node::True);
        b.intern(Node::False);
        b
    }

    fn intern(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    /// Returns the node of the leaf identified by `key`, creating it on first use.
    pub fn leaf(&mut self, key: String, source: impl FnOnce() -> LeafSource) -> NodeId {
        let id = match self.leaf_index.get(&key) {
            Some(&id) => id,
            None => {
                let id = self.leaves.len();
                self.leaves.push(Leaf {
                    label: key.clone(),
                    source: source(),
                });
                self.leaf_index.insert(key, id);
                id
            }
        };
        self.intern(Node::Leaf(id))
    }

    pub fn not(&mut self, c: NodeId) -> NodeId {
        match self.nodes[c] {
            Node::True => FALSE,
            Node::False => TRUE,
            Node::Not(inner) => inner,
            _ => self.intern(Node::Not(c)),
        }
    }

    pub fn and(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut cs = Vec::new();
        for c in children {
            match self.nodes[c] {
                Node::True => {}
                Node::False => return FALSE,
                _ => cs.push(c),
            }
        }
        cs.sort_unstable();
        cs.dedup();
        match cs.len() {
            0 => TRUE,
            1 => cs[0],
            _ => self.intern(Node::And(cs)),
        }
    }

    pub fn or(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut cs = Vec::new();
        for c in children {
            match self.nodes[c] {
                Node::False => {}
                Node::True => return TRUE,
                _ => cs.push(c),
            }
        }
        cs.sort_unstable();
        cs.dedup();
        match cs.len() {
            0 => FALSE,
            1 => cs[0],
            _ => self.intern(Node::Or(cs)),
        }
    }

    pub fn is_false(&self, id: NodeId) -> bool {
        id == FALSE
    }

    /// Finishes the circuit, keeping only leaves reachable from `root`.
    pub fn finish(self, root: NodeId) -> ProofCircuit {
        let full = ProofCircuit {
            nodes: self.nodes,
            leaves: self.leaves,
            root,
        };
        let order = full.leaf_order();
        if order.len() == full.leaves.len() {
            return full;
        }
        let mut remap = vec![usize::MAX; full.leaves.len()];
        let mut leaves = Vec::with_capacity(order.len());
        let mut sorted = order;
        sorted.sort_unstable();
        for (new, &old) in sorted.iter().enumerate() {
            remap[old] = new;
            leaves.push(full.leaves[old].clone());
        }
        let nodes = full
            .nodes
            .into_iter()
            .map(|n| match n {
                Node::Leaf(l) if remap[l] != usize::MAX => Node::Leaf(remap[l]),
                // unreachable leaf nodes are never visited; point them at a constant
                Node::Leaf(_) => Node::False,
                other => other,
            })
            .collect();
        ProofCircuit {
            nodes,
            leaves,
            root,
        }
    }
}
