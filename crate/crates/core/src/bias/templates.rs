//! Bias-mechanism programs.

use std::fmt::Write;

use crate::logic::{parse, parse_atom, Atom, Program};

use super::BiasError;

/// A generated program with the query used to supervise or predict.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasProgram {
    pub source: String,
    pub program: Program,
    pub query: Atom,
}

impl BiasProgram {
    fn from_source(source: String) -> Self {
        let program = parse(&source).expect("generated programs parse");
        let query = program.queries.last().cloned().expect("generated programs end with a query");
        BiasProgram { source, program, query }
    }
}

/// Label bias with respect to each sensitive attribute, chained in the given order.
///
/// One attribute gives the single-stage program with parameters `p1..p4`;
/// several give stages `y1, y2, ..., y_` with parameters `p1_<attr>..p4_<attr>`.
pub fn label_bias_program(sensitive: &[&str]) -> Result<BiasProgram, BiasError> {
    match sensitive {
        [] => Err(BiasError::NoSensitiveAttribute),
        [s] => Ok(BiasProgram::from_source(single_label_stage(s))),
        many => Ok(BiasProgram::from_source(chained_label_stages(many))),
    }
}

fn single_label_stage(s: &str) -> String {
    format!(
        "nn(h,X) :: y_h(X).
nn({s},X) :: {s}(X).

p1 :: label_neg_bias(X) :- {s}(X).
p2 :: label_neg_bias(X) :- \\+{s}(X).
p3 :: label_pos_bias(X) :- {s}(X).
p4 :: label_pos_bias(X) :- \\+{s}(X).

y_(X) :- y_h(X), \\+label_neg_bias(X).
y_(X) :- \\+y_h(X), label_pos_bias(X).

?- y_(x).
"
    )
}

fn chained_label_stages(attrs: &[&str]) -> String {
    let mut out = String::from("nn(h,X) :: y_h(X).\n\n");
    for s in attrs {
        writeln!(out, "nn({s},X) :: {s}(X).").unwrap();
    }
    for s in attrs {
        writeln!(out).unwrap();
        writeln!(out, "p1_{s} :: label_neg_bias_{s}(X):- {s}(X).").unwrap();
        writeln!(out, "p2_{s} :: label_neg_bias_{s}(X):- \\+{s}(X).").unwrap();
        writeln!(out, "p3_{s} :: label_pos_bias_{s}(X):- {s}(X).").unwrap();
        writeln!(out, "p4_{s} :: label_pos_bias_{s}(X):- \\+{s}(X).").unwrap();
    }
    let k = attrs.len();
    for (i, s) in attrs.iter().enumerate() {
        let prev = if i == 0 { "y_h".to_string() } else { format!("y{i}") };
        let this = if i + 1 == k { "y_".to_string() } else { format!("y{}", i + 1) };
        writeln!(out).unwrap();
        writeln!(out, "{this}(X) :- {prev}(X), \\+label_neg_bias_{s}(X).").unwrap();
        writeln!(out, "{this}(X) :- \\+{prev}(X), label_pos_bias_{s}(X).").unwrap();
    }
    out.push_str("\n?- y_(x).\n");
    out
}

/// Parameter name of cell `cell` (1..=4) for attribute `attr` in a program built
/// by [`label_bias_program`] over `n_attrs` attributes.
pub fn label_param_name(cell: usize, attr: &str, n_attrs: usize) -> String {
    if n_attrs == 1 {
        format!("p{cell}")
    } else {
        format!("p{cell}_{attr}")
    }
}

/// Measurement bias on every one of `n_features` binary features, debiased
/// recursively from feature `n_features` down to 1. Sensitive selector `a`,
/// feature selector `n`, classifier `h`.
pub fn measurement_bias_program(n_features: usize) -> Result<BiasProgram, BiasError> {
    if n_features == 0 {
        return Err(BiasError::NoFeatures);
    }
    let n = n_features;
    let vars: Vec<String> = (1..=n).map(|i| format!("V{i}")).collect();
    let mut out = String::from("nn(h,X)    :: y_h(X).\nnn(n,X_,N) :: n(X_,N).\nnn(a,X_)   :: a(X_).\n\n");
    for i in 0..n {
        let with = |bit: &str| {
            let mut v = vars.clone();
            v[i] = bit.to_string();
            format!("x_({})", v.join(","))
        };
        writeln!(out, "debias_n({}, {}, {}).", i + 1, with("0"), with("1")).unwrap();
    }
    out.push_str(
        "
p1(N) :: n_neg_bias(X_,N):- a(X_).
p2(N) :: n_neg_bias(X_,N):- \\+ a(X_).
p3(N) :: n_pos_bias(X_,N):- a(X_).
p4(N) :: n_pos_bias(X_,N):- \\+ a(X_).

n_biased(X_,N) :- \\+n(X_,N), n_neg_bias(X_,N).
n_biased(X_,N) :- n(X_,N), n_pos_bias(X_,N).

debias(X_, X_, 0).
debias(X_, X, N):- >(N,0), is(N2,N-1), n_biased(X_,N), debias_n(N,X_,Xf), debias(Xf,X,N2).
debias(X_, X, N):- >(N,0), is(N2,N-1), \\+n_biased(X_,N), debias(X_,X,N2).
",
    );
    let zeros = vec!["0"; n].join(",");
    writeln!(out, "\ny(X_):- debias(X_,X,{n}), y_h(X).\n\n?- y(x_({zeros})).").unwrap();
    Ok(BiasProgram::from_source(out))
}

/// Query `y(x_(0,...,0))` of the measurement program.
pub fn measurement_query(n_features: usize) -> Atom {
    parse_atom(&format!("y(x_({}))", vec!["0"; n_features].join(","))).expect("valid atom")
}
