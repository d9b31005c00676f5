//! Concrete grammars, ASTs, well-formedness checks and sugar expansion for
//! the program language and the epistemic assertion language.

pub mod ast;
pub mod check;
pub mod lexer;
pub mod normalize;
pub mod parser;
pub mod pretty;
pub mod subst;
pub mod sugar;

pub use ast::*;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynError {
    #[error("{span}: {msg}")]
    Parse { span: lexer::Span, msg: String },
    #[error(transparent)]
    Lex(#[from] lexer::LexError),
    #[error("unknown variable `{name}`")]
    UnknownVar { name: String },
    #[error("unknown test `{id}`")]
    UnknownTest { id: String },
    #[error("dataset {data} does not match the component shape of test {test}")]
    DatasetShape { data: String, test: String },
    #[error("history pair ({data}: {test}) is not declared")]
    UndeclaredPair { data: String, test: String },
    #[error("cannot substitute a non-variable term for dataset variable `{var}`")]
    DatasetSubstitution { var: String },
    #[error("{what}: expected {expected} argument(s), found {found}")]
    Arity {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("type error: {msg}")]
    Type { msg: String },
    #[error("variable `{var}` is invisible and cannot appear in a program")]
    NotObservable { var: String },
    #[error("parallel interference on {vars:?}: updated variables must not occur in the other component")]
    ParInterference { vars: Vec<String> },
    #[error("quantifier over `{var}` occurs inside the K modality")]
    QuantifierInK { var: String },
}

/// Declarations used across this crate's unit tests: three datasets, two
/// two-sample Z tests on (y1,y2) and (y1,y3), result variables a12/a13.
#[cfg(test)]
pub(crate) fn test_decls() -> Decls {
    use std::collections::BTreeMap;
    let list_real = Type::List(Box::new(Type::Real));
    let mut obs = BTreeMap::new();
    for y in ["y1", "y2", "y3"] {
        obs.insert(y.to_string(), list_real.clone());
    }
    obs.insert("a12".into(), Type::Prob);
    obs.insert("a13".into(), Type::Prob);
    let mut inv = BTreeMap::new();
    for m in ["mu1", "mu2", "mu3"] {
        inv.insert(m.to_string(), Type::Real);
    }
    let mut tests = BTreeMap::new();
    tests.insert(
        "za12".to_string(),
        TestDecl {
            id: "za12".into(),
            tail: Tail::Two,
            kind: TestKind::Z {
                sigma: 1.0,
                means: ("mu1".into(), "mu2".into()),
            },
        },
    );
    tests.insert(
        "za13".to_string(),
        TestDecl {
            id: "za13".into(),
            tail: Tail::Two,
            kind: TestKind::Z {
                sigma: 1.0,
                means: ("mu1".into(), "mu3".into()),
            },
        },
    );
    let pair12 = (
        Dataset::Tuple(vec![Dataset::Var("y1".into()), Dataset::Var("y2".into())]),
        TestRef::Atomic("za12".into()),
    );
    let pair13 = (
        Dataset::Tuple(vec![Dataset::Var("y1".into()), Dataset::Var("y3".into())]),
        TestRef::Atomic("za13".into()),
    );
    Decls {
        obs,
        inv,
        tests,
        pairs: vec![pair12, pair13],
        int_bound: None,
    }
}
