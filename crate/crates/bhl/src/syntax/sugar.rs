//! Expansion of the assertion-language sugar (statistical belief, κ, compds,
//! test hypotheses) into the core formula language, plus free-variable
//! collection over expanded formulas.

use std::collections::BTreeSet;

use super::ast::*;
use super::SynError;

/// `ListTests(y, A)`: the multiset of (dataset, atomic test) pairs a possibly
/// combined test decomposes into. Returned as a vector; repetitions matter.
pub fn list_tests(data: &Dataset, test: &TestRef) -> Result<Vec<(Dataset, TestRef)>, SynError> {
    match test {
        TestRef::Atomic(_) => Ok(vec![(data.clone(), test.clone())]),
        TestRef::Or(a, b) | TestRef::And(a, b) => match data {
            Dataset::Tuple(ds) if ds.len() == 2 => {
                let mut out = list_tests(&ds[0], a)?;
                out.extend(list_tests(&ds[1], b)?);
                Ok(out)
            }
            _ => Err(SynError::DatasetShape {
                data: data.to_string(),
                test: test.to_string(),
            }),
        },
    }
}

/// κ_S: the history of executed tests is exactly the multiset S. Expands to
/// `h_{y,A} = n` for every declared pair, where n is the multiplicity of
/// (y,A) in S (zero for pairs outside S).
pub fn kappa_formula(decls: &Decls, s: &[(Dataset, TestRef)]) -> Result<Formula, SynError> {
    for (d, t) in s {
        if !decls.has_pair(d, t) {
            return Err(SynError::UndeclaredPair {
                data: d.to_string(),
                test: t.to_string(),
            });
        }
    }
    let conjuncts = decls
        .pairs
        .iter()
        .map(|(d, t)| {
            let n = s.iter().filter(|(sd, st)| sd == d && st == t).count() as i64;
            Formula::Cmp(CmpOp::Eq, Term::Hist(d.clone(), t.clone()), Term::Int(n))
        })
        .collect();
    Ok(Formula::and_all(conjuncts))
}

/// `compds(y, A)`: every component dataset was sampled from the population
/// the test's statistical model prescribes.
pub fn compds_formula(decls: &Decls, data: &Dataset, test: &TestRef) -> Result<Formula, SynError> {
    let mut conjuncts = Vec::new();
    for (d, t) in list_tests(data, test)? {
        let id = match &t {
            TestRef::Atomic(id) => id.clone(),
            _ => unreachable!("list_tests returns atomic tests"),
        };
        let decl = decls
            .test(&id)
            .ok_or_else(|| SynError::UnknownTest { id: id.clone() })?;
        match &decl.kind {
            TestKind::Z { sigma, means } => {
                let comps = match &d {
                    Dataset::Tuple(ds) if ds.len() == 2 => ds.clone(),
                    _ => {
                        return Err(SynError::DatasetShape {
                            data: d.to_string(),
                            test: t.to_string(),
                        })
                    }
                };
                for (comp, mean) in comps.iter().zip([&means.0, &means.1]) {
                    let yvar = match comp {
                        Dataset::Var(n) => n.clone(),
                        _ => {
                            return Err(SynError::DatasetShape {
                                data: d.to_string(),
                                test: t.to_string(),
                            })
                        }
                    };
                    conjuncts.push(Formula::Followed(
                        Term::Var(yvar),
                        Term::App(
                            FuncSym::Normal,
                            vec![Term::Var(mean.clone()), Term::Real(sigma * sigma)],
                        ),
                    ));
                }
            }
            TestKind::Lrt { param, .. } | TestKind::Bayes { param, .. } => {
                let yvar = match &d {
                    Dataset::Var(n) => n.clone(),
                    _ => {
                        return Err(SynError::DatasetShape {
                            data: d.to_string(),
                            test: t.to_string(),
                        })
                    }
                };
                conjuncts.push(Formula::Followed(
                    Term::Var(yvar),
                    Term::App(FuncSym::Model(id.clone()), vec![Term::Var(param.clone())]),
                ));
            }
        }
    }
    Ok(Formula::and_all(conjuncts))
}

/// The alternative hypothesis of a possibly combined test.
pub fn alt_formula(decls: &Decls, test: &TestRef) -> Result<Formula, SynError> {
    match test {
        TestRef::Atomic(id) => decls
            .test(id)
            .map(|d| d.alt())
            .ok_or_else(|| SynError::UnknownTest { id: id.clone() }),
        TestRef::Or(a, b) => Ok(Formula::or(alt_formula(decls, a)?, alt_formula(decls, b)?)),
        TestRef::And(a, b) => Ok(Formula::and(alt_formula(decls, a)?, alt_formula(decls, b)?)),
    }
}

/// Expand a single statistical-belief node into its core form
/// `K(φ ∨ (Neg⋈_{y,A}(ε) ∧ κ_{ListTests(y,A)}) ∨ ¬compds(y,A))`.
pub fn expand_belief(
    decls: &Decls,
    rel: RelOp,
    eps: &Term,
    data: &Dataset,
    test: &TestRef,
    body: &Formula,
) -> Result<Formula, SynError> {
    let lt = list_tests(data, test)?;
    let kappa = kappa_formula(decls, &lt)?;
    let compds = compds_formula(decls, data, test)?;
    let unlikely = Formula::Unlikely {
        rel,
        eps: eps.clone(),
        data: data.clone(),
        test: test.clone(),
    };
    Ok(Formula::know(Formula::or(
        body.clone(),
        Formula::or(Formula::and(unlikely, kappa), Formula::not(compds)),
    )))
}

/// Recursively expand every belief node; idempotent on core formulas.
pub fn expand_formula(decls: &Decls, f: &Formula) -> Result<Formula, SynError> {
    Ok(match f {
        Formula::Belief { rel, eps, data, test, body } => {
            let body = expand_formula(decls, body)?;
            expand_belief(decls, *rel, eps, data, test, &body)?
        }
        Formula::Not(a) => Formula::not(expand_formula(decls, a)?),
        Formula::And(a, b) => Formula::and(expand_formula(decls, a)?, expand_formula(decls, b)?),
        Formula::Or(a, b) => Formula::or(expand_formula(decls, a)?, expand_formula(decls, b)?),
        Formula::Implies(a, b) => {
            Formula::implies(expand_formula(decls, a)?, expand_formula(decls, b)?)
        }
        Formula::Know(a) => Formula::know(expand_formula(decls, a)?),
        Formula::ForallInt(i, a) => {
            Formula::ForallInt(i.clone(), Box::new(expand_formula(decls, a)?))
        }
        leaf => leaf.clone(),
    })
}

/// Free variables of a formula, separated by kind.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FreeVars {
    pub vars: BTreeSet<Name>,
    pub intvars: BTreeSet<Name>,
    pub hists: BTreeSet<(Dataset, TestRef)>,
}

impl FreeVars {
    /// Flat name view (history variables rendered as `hist(y; A)`).
    pub fn names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.vars.iter().cloned().collect();
        out.extend(self.intvars.iter().cloned());
        out.extend(self.hists.iter().map(|(d, t)| format!("hist({d}; {t})")));
        out
    }

    pub fn contains_var(&self, v: &str) -> bool {
        self.vars.contains(v)
    }
}

pub fn term_free_vars(t: &Term, acc: &mut FreeVars) {
    match t {
        Term::Var(n) => {
            acc.vars.insert(n.clone());
        }
        Term::IntVar(n) => {
            acc.intvars.insert(n.clone());
        }
        Term::Hist(d, tr) => {
            acc.hists.insert((d.clone(), tr.clone()));
        }
        Term::Int(_) | Term::Real(_) => {}
        Term::App(_, args) => {
            for a in args {
                term_free_vars(a, acc);
            }
        }
    }
}

/// Free variables of the *expanded* form of a formula (belief sugar
/// contributes its dataset variables, history variables, and model means).
pub fn free_vars(decls: &Decls, f: &Formula) -> Result<FreeVars, SynError> {
    let expanded = expand_formula(decls, f)?;
    let mut acc = FreeVars::default();
    collect(&expanded, &mut acc, &mut BTreeSet::new());
    return Ok(acc);

    fn leaf(terms: &[&Term], acc: &mut FreeVars, bound: &BTreeSet<Name>) {
        let mut tmp = FreeVars::default();
        for t in terms {
            term_free_vars(t, &mut tmp);
        }
        tmp.intvars.retain(|n| !bound.contains(n));
        acc.vars.extend(tmp.vars);
        acc.intvars.extend(tmp.intvars);
        acc.hists.extend(tmp.hists);
    }

    fn collect(f: &Formula, acc: &mut FreeVars, bound: &mut BTreeSet<Name>) {
        match f {
            Formula::Bool(_) => {}
            Formula::Cmp(_, a, b) => leaf(&[a, b], acc, bound),
            Formula::Sampled(a, b, c) => leaf(&[a, b, c], acc, bound),
            Formula::Followed(a, b) => leaf(&[a, b], acc, bound),
            Formula::Unlikely { eps, data, .. } => {
                leaf(&[eps], acc, bound);
                for v in data.vars() {
                    acc.vars.insert(v.to_string());
                }
            }
            Formula::Not(a) | Formula::Know(a) => collect(a, acc, bound),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                collect(a, acc, bound);
                collect(b, acc, bound);
            }
            Formula::ForallInt(i, a) => {
                let fresh = bound.insert(i.clone());
                collect(a, acc, bound);
                if fresh {
                    bound.remove(i);
                }
            }
            Formula::Belief { .. } => unreachable!("expanded before collection"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::test_decls;

    #[test]
    fn kappa_empty_sets_all_declared_counters_to_zero() {
        let decls = test_decls();
        let k = kappa_formula(&decls, &[]).unwrap();
        // two declared pairs -> conjunction of two h = 0 equations
        match k {
            Formula::And(a, b) => {
                assert!(matches!(*a, Formula::Cmp(CmpOp::Eq, Term::Hist(..), Term::Int(0))));
                assert!(matches!(*b, Formula::Cmp(CmpOp::Eq, Term::Hist(..), Term::Int(0))));
            }
            other => panic!("expected conjunction, got {other:?}"),
        }
    }

    #[test]
    fn list_tests_decomposes_combined_pairs() {
        let y = Dataset::Tuple(vec![
            Dataset::Tuple(vec![Dataset::Var("y1".into()), Dataset::Var("y2".into())]),
            Dataset::Tuple(vec![Dataset::Var("y1".into()), Dataset::Var("y3".into())]),
        ]);
        let t = TestRef::And(
            Box::new(TestRef::Atomic("za12".into())),
            Box::new(TestRef::Atomic("za13".into())),
        );
        let lt = list_tests(&y, &t).unwrap();
        assert_eq!(lt.len(), 2);
        assert_eq!(lt[0].1, TestRef::Atomic("za12".into()));
    }

    #[test]
    fn duplicate_pairs_keep_multiplicity() {
        let y = Dataset::Tuple(vec![Dataset::Var("y1".into()), Dataset::Var("y1".into())]);
        let t = TestRef::Or(
            Box::new(TestRef::Atomic("za12".into())),
            Box::new(TestRef::Atomic("za12".into())),
        );
        let lt = list_tests(&y, &t).unwrap();
        assert_eq!(lt.len(), 2);
        assert_eq!(lt[0], lt[1]);
    }

    #[test]
    fn expand_is_idempotent_on_core() {
        let decls = test_decls();
        let f = Formula::know(Formula::Cmp(
            CmpOp::Lt,
            Term::Var("mu1".into()),
            Term::Var("mu2".into()),
        ));
        let once = expand_formula(&decls, &f).unwrap();
        let twice = expand_formula(&decls, &once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn nuh_for_z_test_is_equality_shape() {
        let decls = test_decls();
        let t = decls.test("za12").unwrap();
        // nuh = !(mu2 < mu1) && !(mu1 < mu2), the Z-test's mu1 = mu2
        let nuh = t.null_hypothesis();
        match nuh {
            Formula::And(a, b) => {
                assert!(matches!(*a, Formula::Not(_)));
                assert!(matches!(*b, Formula::Not(_)));
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }
}
