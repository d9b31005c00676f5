//! Well-formedness: term typing, program checks (observable-only variables,
//! Par interference restriction), guard shape, and quantifier placement.

use std::collections::BTreeSet;

use super::ast::*;
use super::sugar::term_free_vars;
use super::SynError;

/// Infer the type of an assertion term.
pub fn type_of_term(decls: &Decls, t: &Term) -> Result<Type, SynError> {
    match t {
        Term::Var(n) => decls
            .var_type(n)
            .cloned()
            .ok_or_else(|| SynError::UnknownVar { name: n.clone() }),
        Term::IntVar(_) => Ok(Type::Int),
        Term::Hist(d, tr) => {
            if decls.has_pair(d, tr) {
                Ok(Type::Nat)
            } else {
                Err(SynError::UndeclaredPair {
                    data: d.to_string(),
                    test: tr.to_string(),
                })
            }
        }
        Term::Int(_) => Ok(Type::Int),
        Term::Real(_) => Ok(Type::Real),
        Term::App(sym, args) => {
            if let Some(n) = sym.arity() {
                if args.len() != n {
                    return Err(SynError::Arity {
                        what: format!("{sym:?}"),
                        expected: n,
                        found: args.len(),
                    });
                }
            }
            let tys: Vec<Type> = args
                .iter()
                .map(|a| type_of_term(decls, a))
                .collect::<Result<_, _>>()?;
            let numeric = |ty: &Type| matches!(ty.canonical(), Type::Int | Type::Real);
            match sym {
                FuncSym::Add | FuncSym::Sub | FuncSym::Mul | FuncSym::Div => {
                    if !tys.iter().all(numeric) {
                        return Err(SynError::Type {
                            msg: format!("arithmetic over non-numeric operands: {t:?}"),
                        });
                    }
                    if tys.iter().any(|ty| ty.canonical() == Type::Real) {
                        Ok(Type::Real)
                    } else {
                        Ok(Type::Int)
                    }
                }
                FuncSym::Neg => {
                    if !numeric(&tys[0]) {
                        return Err(SynError::Type {
                            msg: format!("negation of non-numeric operand: {t:?}"),
                        });
                    }
                    Ok(tys[0].canonical())
                }
                FuncSym::Min => {
                    if !tys.iter().all(numeric) {
                        return Err(SynError::Type {
                            msg: format!("min over non-numeric operands: {t:?}"),
                        });
                    }
                    Ok(Type::Real)
                }
                FuncSym::Mean => match tys[0].canonical() {
                    Type::List(inner) if *inner == Type::Real => Ok(Type::Real),
                    other => Err(SynError::Type {
                        msg: format!("mean expects list(real), found {other}"),
                    }),
                },
                FuncSym::Size => match tys[0].canonical() {
                    Type::List(_) => Ok(Type::Int),
                    other => Err(SynError::Type {
                        msg: format!("size expects a list, found {other}"),
                    }),
                },
                FuncSym::Normal => {
                    if !tys.iter().all(numeric) {
                        return Err(SynError::Type {
                            msg: "normal(mu, var) expects numeric arguments".into(),
                        });
                    }
                    Ok(Type::Dist)
                }
                FuncSym::PValue(tref) => {
                    let id = match tref {
                        TestRef::Atomic(id) => id,
                        _ => {
                            return Err(SynError::Type {
                                msg: "p-value terms take an atomic test".into(),
                            })
                        }
                    };
                    let decl = decls
                        .test(id)
                        .ok_or_else(|| SynError::UnknownTest { id: id.clone() })?;
                    if args.len() != decl.data_arity() {
                        return Err(SynError::Arity {
                            what: format!("test {id}"),
                            expected: decl.data_arity(),
                            found: args.len(),
                        });
                    }
                    for ty in &tys {
                        if ty.canonical() != Type::List(Box::new(Type::Real)) {
                            return Err(SynError::Type {
                                msg: format!("test {id} expects list(real) datasets"),
                            });
                        }
                    }
                    Ok(Type::Prob)
                }
                FuncSym::Model(id) => {
                    decls
                        .test(id)
                        .ok_or_else(|| SynError::UnknownTest { id: id.clone() })?;
                    Ok(Type::Dist)
                }
            }
        }
    }
}

/// upd(C): variables a program may update.
pub fn updated_vars(c: &Program) -> BTreeSet<Name> {
    match c {
        Program::Skip => BTreeSet::new(),
        Program::Assign(v, _) => BTreeSet::from([v.clone()]),
        Program::TestCall { var, .. } => BTreeSet::from([var.clone()]),
        Program::Seq(a, b) | Program::Par(a, b) => {
            let mut s = updated_vars(a);
            s.extend(updated_vars(b));
            s
        }
        Program::If(_, a, b) => {
            let mut s = updated_vars(a);
            s.extend(updated_vars(b));
            s
        }
        Program::While { body, .. } => updated_vars(body),
    }
}

fn guard_vars(g: &Formula, acc: &mut BTreeSet<Name>) {
    match g {
        Formula::Bool(_) => {}
        Formula::Cmp(_, a, b) => {
            let mut fv = super::sugar::FreeVars::default();
            term_free_vars(a, &mut fv);
            term_free_vars(b, &mut fv);
            acc.extend(fv.vars);
        }
        Formula::Not(a) => guard_vars(a, acc),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            guard_vars(a, acc);
            guard_vars(b, acc);
        }
        _ => {}
    }
}

/// Var(C): all variables occurring in a program.
pub fn program_vars(c: &Program) -> BTreeSet<Name> {
    let mut acc = BTreeSet::new();
    walk(c, &mut acc);
    return acc;

    fn walk(c: &Program, acc: &mut BTreeSet<Name>) {
        match c {
            Program::Skip => {}
            Program::Assign(v, e) => {
                acc.insert(v.clone());
                let mut fv = super::sugar::FreeVars::default();
                term_free_vars(e, &mut fv);
                acc.extend(fv.vars);
            }
            Program::TestCall { var, args, .. } => {
                acc.insert(var.clone());
                acc.extend(args.iter().cloned());
            }
            Program::Seq(a, b) | Program::Par(a, b) => {
                walk(a, acc);
                walk(b, acc);
            }
            Program::If(g, a, b) => {
                guard_vars(g, acc);
                walk(a, acc);
                walk(b, acc);
            }
            Program::While { guard, body, .. } => {
                guard_vars(guard, acc);
                walk(body, acc);
            }
        }
    }
}

/// Program guards are boolean combinations of comparisons over program terms.
pub fn check_guard(decls: &Decls, g: &Formula) -> Result<(), SynError> {
    match g {
        Formula::Bool(_) => Ok(()),
        Formula::Cmp(_, a, b) => {
            check_program_term(decls, a)?;
            check_program_term(decls, b)
        }
        Formula::Not(a) => check_guard(decls, a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            check_guard(decls, a)?;
            check_guard(decls, b)
        }
        other => Err(SynError::Type {
            msg: format!("guard must be a boolean program expression, found {other:?}"),
        }),
    }
}

/// Program terms: observable variables only, no history variables, no
/// int-vars, no test-procedure or model symbols.
pub fn check_program_term(decls: &Decls, t: &Term) -> Result<(), SynError> {
    match t {
        Term::Var(n) => {
            if decls.is_observable(n) {
                Ok(())
            } else if decls.is_invisible(n) {
                Err(SynError::NotObservable { var: n.clone() })
            } else {
                Err(SynError::UnknownVar { name: n.clone() })
            }
        }
        Term::IntVar(n) => Err(SynError::Type {
            msg: format!("int-var {n} cannot appear in a program expression"),
        }),
        Term::Hist(d, tr) => Err(SynError::Type {
            msg: format!("history variable hist({d}; {tr}) is invisible to programs"),
        }),
        Term::Int(_) | Term::Real(_) => Ok(()),
        Term::App(sym, args) => {
            match sym {
                FuncSym::PValue(_) | FuncSym::Model(_) => {
                    return Err(SynError::Type {
                        msg: "test procedures occur only as `v := A(y...)` calls".into(),
                    })
                }
                _ => {}
            }
            for a in args {
                check_program_term(decls, a)?;
            }
            Ok(())
        }
    }
}

/// Full program well-formedness: observability, typing, guard shape, test
/// call arities, and the Par interference restriction.
pub fn check_program(decls: &Decls, c: &Program) -> Result<(), SynError> {
    match c {
        Program::Skip => Ok(()),
        Program::Assign(v, e) => {
            let vty = decls
                .obs
                .get(v)
                .ok_or_else(|| {
                    if decls.is_invisible(v) {
                        SynError::NotObservable { var: v.clone() }
                    } else {
                        SynError::UnknownVar { name: v.clone() }
                    }
                })?
                .clone();
            check_program_term(decls, e)?;
            let ety = type_of_term(decls, e)?;
            // int literals may initialize real-typed variables
            let widened = if vty.canonical() == Type::Real && ety.canonical() == Type::Int {
                Type::Real
            } else {
                ety.canonical()
            };
            if !vty.compatible(&widened) {
                return Err(SynError::Type {
                    msg: format!("cannot assign {widened} expression to {v}: {vty}"),
                });
            }
            Ok(())
        }
        Program::TestCall { var, test, args } => {
            let id = match test {
                TestRef::Atomic(id) => id.clone(),
                _ => {
                    return Err(SynError::Type {
                        msg: "programs call declared atomic tests".into(),
                    })
                }
            };
            let decl = decls
                .test(&id)
                .ok_or_else(|| SynError::UnknownTest { id: id.clone() })?;
            if args.len() != decl.data_arity() {
                return Err(SynError::Arity {
                    what: format!("test {id}"),
                    expected: decl.data_arity(),
                    found: args.len(),
                });
            }
            let vty = decls
                .obs
                .get(var)
                .ok_or_else(|| SynError::NotObservable { var: var.clone() })?;
            if vty.canonical() != Type::Real {
                return Err(SynError::Type {
                    msg: format!("test result variable {var} must be prob/real, is {vty}"),
                });
            }
            for a in args {
                match decls.obs.get(a) {
                    Some(ty) if ty.canonical() == Type::List(Box::new(Type::Real)) => {}
                    Some(ty) => {
                        return Err(SynError::Type {
                            msg: format!("dataset argument {a} must be list(real), is {ty}"),
                        })
                    }
                    None => return Err(SynError::NotObservable { var: a.clone() }),
                }
            }
            Ok(())
        }
        Program::Seq(a, b) => {
            check_program(decls, a)?;
            check_program(decls, b)
        }
        Program::Par(a, b) => {
            check_program(decls, a)?;
            check_program(decls, b)?;
            let bad: Vec<Name> = updated_vars(a)
                .intersection(&program_vars(b))
                .cloned()
                .chain(updated_vars(b).intersection(&program_vars(a)).cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !bad.is_empty() {
                return Err(SynError::ParInterference { vars: bad });
            }
            Ok(())
        }
        Program::If(g, a, b) => {
            check_guard(decls, g)?;
            check_program(decls, a)?;
            check_program(decls, b)
        }
        Program::While { guard, body, .. } => {
            check_guard(decls, guard)?;
            check_program(decls, body)
        }
    }
}

/// Quantifiers never appear under K (and only bind int-vars by construction).
pub fn check_quantifier_placement(f: &Formula) -> Result<(), SynError> {
    return walk(f, false);

    fn walk(f: &Formula, under_k: bool) -> Result<(), SynError> {
        match f {
            Formula::ForallInt(i, a) => {
                if under_k {
                    return Err(SynError::QuantifierInK { var: i.clone() });
                }
                walk(a, under_k)
            }
            Formula::Know(a) => walk(a, true),
            Formula::Not(a) => walk(a, under_k),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a, under_k)?;
                walk(b, under_k)
            }
            Formula::Belief { body, .. } => walk(body, true),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::test_decls;

    #[test]
    fn upd_of_compound_programs() {
        // Seq(Assign(a,1), While(b<1, Assign(c,2))) -> {a, c}
        let c = Program::seq(
            Program::Assign("a12".into(), Term::Int(1)),
            Program::While {
                guard: Formula::Cmp(CmpOp::Lt, Term::Var("a13".into()), Term::Int(1)),
                invariant: None,
                body: Box::new(Program::Assign("a13".into(), Term::Int(2))),
            },
        );
        let upd = updated_vars(&c);
        assert_eq!(upd, BTreeSet::from(["a12".to_string(), "a13".to_string()]));
    }

    #[test]
    fn par_interference_is_reported() {
        let decls = test_decls();
        let c = Program::par(
            Program::Assign("a12".into(), Term::Int(1)),
            Program::Assign("a12".into(), Term::Int(2)),
        );
        match check_program(&decls, &c) {
            Err(SynError::ParInterference { vars }) => assert_eq!(vars, vec!["a12".to_string()]),
            other => panic!("expected interference error, got {other:?}"),
        }
    }

    #[test]
    fn programs_reject_invisible_variables() {
        let decls = test_decls();
        let c = Program::Assign("mu1".into(), Term::Int(1));
        assert!(matches!(
            check_program(&decls, &c),
            Err(SynError::NotObservable { .. })
        ));
    }
}
