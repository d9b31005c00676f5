//! Simultaneous capture-free substitution of terms for program and history
//! variables. Binders only ever range over integer variables and substituted
//! terms never contain bound int-vars, so no renaming is needed.

use std::collections::BTreeMap;

use super::ast::*;
use super::sugar::{expand_belief, list_tests};
use super::SynError;

#[derive(Clone, Debug, Default)]
pub struct Subst {
    pub vars: BTreeMap<Name, Term>,
    pub hists: BTreeMap<(Dataset, TestRef), Term>,
}

impl Subst {
    /// Substitution for `v := e`.
    pub fn assign(v: &str, e: &Term) -> Subst {
        let mut s = Subst::default();
        s.vars.insert(v.to_string(), e.clone());
        s
    }

    /// Substitution for `v := f_A(y)`: maps v to the p-value term and bumps
    /// the history variable h_{y,A}.
    pub fn test_call(v: &str, test: &TestRef, args: &[Name]) -> Subst {
        let mut s = Subst::default();
        let pv = Term::App(
            FuncSym::PValue(test.clone()),
            args.iter().cloned().map(Term::Var).collect(),
        );
        s.vars.insert(v.to_string(), pv);
        let key = (Dataset::from_vars(args), test.clone());
        let bumped = Term::App(
            FuncSym::Add,
            vec![Term::Hist(key.0.clone(), key.1.clone()), Term::Int(1)],
        );
        s.hists.insert(key, bumped);
        s
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.hists.is_empty()
    }
}

pub fn term_subst(t: &Term, s: &Subst) -> Term {
    match t {
        Term::Var(n) => s.vars.get(n).cloned().unwrap_or_else(|| t.clone()),
        Term::Hist(d, tr) => s
            .hists
            .get(&(d.clone(), tr.clone()))
            .cloned()
            .unwrap_or_else(|| t.clone()),
        Term::IntVar(_) | Term::Int(_) | Term::Real(_) => t.clone(),
        Term::App(sym, args) => Term::App(
            sym.clone(),
            args.iter().map(|a| term_subst(a, s)).collect(),
        ),
    }
}

/// Substitute through a formula. Belief sugar whose internal κ mentions a
/// substituted history variable is expanded first (the core form exposes the
/// history equations). Substituting a non-variable term into a dataset
/// position is not representable and reported as an error.
pub fn formula_subst(decls: &Decls, f: &Formula, s: &Subst) -> Result<Formula, SynError> {
    Ok(match f {
        Formula::Bool(_) => f.clone(),
        Formula::Cmp(op, a, b) => Formula::Cmp(*op, term_subst(a, s), term_subst(b, s)),
        Formula::Sampled(a, b, c) => {
            Formula::Sampled(term_subst(a, s), term_subst(b, s), term_subst(c, s))
        }
        Formula::Followed(a, b) => Formula::Followed(term_subst(a, s), term_subst(b, s)),
        Formula::Unlikely { rel, eps, data, test } => {
            check_dataset_untouched(data, s)?;
            Formula::Unlikely {
                rel: *rel,
                eps: term_subst(eps, s),
                data: data.clone(),
                test: test.clone(),
            }
        }
        Formula::Not(a) => Formula::not(formula_subst(decls, a, s)?),
        Formula::And(a, b) => {
            Formula::and(formula_subst(decls, a, s)?, formula_subst(decls, b, s)?)
        }
        Formula::Or(a, b) => Formula::or(formula_subst(decls, a, s)?, formula_subst(decls, b, s)?),
        Formula::Implies(a, b) => {
            Formula::implies(formula_subst(decls, a, s)?, formula_subst(decls, b, s)?)
        }
        Formula::Know(a) => Formula::know(formula_subst(decls, a, s)?),
        Formula::ForallInt(i, a) => {
            Formula::ForallInt(i.clone(), Box::new(formula_subst(decls, a, s)?))
        }
        Formula::Belief { rel, eps, data, test, body } => {
            check_dataset_untouched(data, s)?;
            let touched = !s.hists.is_empty()
                && list_tests(data, test)?
                    .iter()
                    .any(|key| s.hists.contains_key(key));
            if touched {
                let expanded = expand_belief(decls, *rel, eps, data, test, body)?;
                formula_subst(decls, &expanded, s)?
            } else {
                Formula::Belief {
                    rel: *rel,
                    eps: term_subst(eps, s),
                    data: data.clone(),
                    test: test.clone(),
                    body: Box::new(formula_subst(decls, body, s)?),
                }
            }
        }
    })
}

fn check_dataset_untouched(data: &Dataset, s: &Subst) -> Result<(), SynError> {
    for v in data.vars() {
        if s.vars.contains_key(v) {
            return Err(SynError::DatasetSubstitution { var: v.to_string() });
        }
    }
    Ok(())
}
