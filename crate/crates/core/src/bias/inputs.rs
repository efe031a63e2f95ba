//! How an example's input vector is laid out, and the neural predicates that read it.

use serde::{Deserialize, Serialize};

use crate::logic::{NeuralBindings, NeuralLeaf, Term};

/// Input vector layout: one column per sensitive selector, then the features
/// the bias programs may flip.
///
/// Vector identifiers in programs are `x` (the observed vector) or
/// `x_(b1,...,bn)`, the observed vector with feature `i` flipped where `bi = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub selectors: Vec<String>,
    pub n_features: usize,
    /// Selectors (by position in `selectors`) also given to the classifier.
    pub classifier_selectors: Vec<usize>,
}

impl InputLayout {
    /// One sensitive attribute `a`, optionally visible to the classifier.
    pub fn single(n_features: usize, classifier_sees_a: bool) -> Self {
        InputLayout {
            selectors: vec!["a".into()],
            n_features,
            classifier_selectors: if classifier_sees_a { vec![0] } else { vec![] },
        }
    }

    pub fn input_len(&self) -> usize {
        self.selectors.len() + self.n_features
    }

    pub fn classifier_dim(&self) -> usize {
        self.n_features + self.classifier_selectors.len()
    }

    pub fn selector_column(&self, name: &str) -> Option<usize> {
        self.selectors.iter().position(|s| s == name)
    }

    /// Builds an input vector from selector values and features.
    pub fn input(&self, selectors: &[f64], features: &[f64]) -> Vec<f64> {
        assert_eq!(selectors.len(), self.selectors.len(), "selector count");
        assert_eq!(features.len(), self.n_features, "feature count");
        selectors.iter().chain(features).copied().collect()
    }

    /// Classifier input: features (with `flips` applied) followed by visible selectors.
    pub fn classifier_input(&self, input: &[f64], flips: &[bool]) -> Vec<f64> {
        let k = self.selectors.len();
        let mut out = Vec::with_capacity(self.classifier_dim());
        for (i, &v) in input[k..k + self.n_features].iter().enumerate() {
            out.push(if flips.get(i).copied().unwrap_or(false) { 1.0 - v } else { v });
        }
        out.extend(self.classifier_selectors.iter().map(|&s| input[s]));
        out
    }

    /// Flip pattern named by a vector identifier term.
    pub fn decode_vector(&self, t: &Term) -> Result<Vec<bool>, String> {
        match t {
            Term::Sym(s) if s == "x" => Ok(vec![false; self.n_features]),
            Term::Compound(f, args) if f == "x_" && args.len() == self.n_features => args
                .iter()
                .map(|a| match a {
                    Term::Int(0) => Ok(false),
                    Term::Int(1) => Ok(true),
                    other => Err(format!("flip flag `{other}` is not 0 or 1")),
                })
                .collect(),
            other => Err(format!("`{other}` does not name a feature vector of length {}", self.n_features)),
        }
    }

    /// Bindings for classifier `h`, every sensitive selector, and feature selector `n`.
    pub fn bindings(&self) -> NeuralBindings {
        let mut nb = NeuralBindings::new();
        let layout = self.clone();
        nb.bind("h", move |args: &[Term], input: &[f64]| {
            let [x] = args else {
                return Err(format!("expects one argument, got {}", args.len()));
            };
            let flips = layout.decode_vector(x)?;
            Ok(NeuralLeaf::Classifier(layout.classifier_input(input, &flips)))
        });
        for (col, name) in self.selectors.iter().enumerate() {
            let layout = self.clone();
            nb.bind(name.clone(), move |args: &[Term], input: &[f64]| {
                let [x] = args else {
                    return Err(format!("expects one argument, got {}", args.len()));
                };
                layout.decode_vector(x)?;
                Ok(NeuralLeaf::Constant(input[col]))
            });
        }
        let layout = self.clone();
        nb.bind("n", move |args: &[Term], input: &[f64]| {
            let [x, Term::Int(i)] = args else {
                return Err("expects a vector and a feature index".into());
            };
            let flips = layout.decode_vector(x)?;
            let i = usize::try_from(*i).ok().filter(|i| (1..=layout.n_features).contains(i));
            let i = i.ok_or_else(|| format!("feature index outside 1..={}", layout.n_features))?;
            let v = input[layout.selectors.len() + i - 1];
            Ok(NeuralLeaf::Constant(if flips[i - 1] { 1.0 - v } else { v }))
        });
        nb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_atom;

    #[test]
    fn vector_terms() {
        let l = InputLayout::single(3, true);
        let input = l.input(&[1.0], &[0.0, 1.0, 1.0]);
        assert_eq!(l.classifier_input(&input, &[false; 3]), vec![0.0, 1.0, 1.0, 1.0]);
        let t = &parse_atom("f(x_(1,0,1))").unwrap().args[0];
        let flips = l.decode_vector(t).unwrap();
        assert_eq!(l.classifier_input(&input, &flips), vec![1.0, 1.0, 0.0, 1.0]);
        assert!(l.decode_vector(&Term::sym("y")).is_err());
        let hidden = InputLayout::single(3, false);
        assert_eq!(hidden.classifier_dim(), 3);
    }
}
