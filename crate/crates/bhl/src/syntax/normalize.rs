//! Light arithmetic normalization used when comparing formulas up to the
//! rewrites the Hist axiom induces (`h+1 = n` vs `h = n-1`).

use super::ast::*;
use super::sugar::expand_formula;
use super::SynError;

pub fn normalize_term(t: &Term) -> Term {
    match t {
        Term::App(sym, args) => {
            let args: Vec<Term> = args.iter().map(normalize_term).collect();
            match (sym, args.as_slice()) {
                (FuncSym::Add, [Term::Int(a), Term::Int(b)]) => Term::Int(a + b),
                (FuncSym::Sub, [Term::Int(a), Term::Int(b)]) => Term::Int(a - b),
                (FuncSym::Add, [x, Term::Int(0)]) | (FuncSym::Sub, [x, Term::Int(0)]) => x.clone(),
                (FuncSym::Add, [Term::Int(0), x]) => x.clone(),
                _ => Term::App(sym.clone(), args),
            }
        }
        _ => t.clone(),
    }
}

fn normalize_cmp(op: CmpOp, a: Term, b: Term) -> Formula {
    let mut a = normalize_term(&a);
    let mut b = normalize_term(&b);
    // canonical order for equations: literal on the right
    if op == CmpOp::Eq {
        if matches!(a, Term::Int(_) | Term::Real(_)) && !matches!(b, Term::Int(_) | Term::Real(_))
        {
            std::mem::swap(&mut a, &mut b);
        }
        // shift integer offsets: (x + k) = n  ~>  x = n - k
        if let (Term::App(FuncSym::Add, args), Term::Int(n)) = (&a, &b) {
            if let [x, Term::Int(k)] = args.as_slice() {
                return Formula::Cmp(CmpOp::Eq, x.clone(), Term::Int(n - k));
            }
        }
    }
    Formula::Cmp(op, a, b)
}

/// Normalize a core formula (belief sugar must be expanded beforehand or via
/// [`normalized`]).
pub fn normalize_formula(f: &Formula) -> Formula {
    match f {
        Formula::Cmp(op, a, b) => normalize_cmp(*op, a.clone(), b.clone()),
        Formula::Sampled(a, b, c) => {
            Formula::Sampled(normalize_term(a), normalize_term(b), normalize_term(c))
        }
        Formula::Followed(a, b) => Formula::Followed(normalize_term(a), normalize_term(b)),
        Formula::Unlikely { rel, eps, data, test } => Formula::Unlikely {
            rel: *rel,
            eps: normalize_term(eps),
            data: data.clone(),
            test: test.clone(),
        },
        Formula::Not(a) => Formula::not(normalize_formula(a)),
        Formula::And(a, b) => Formula::and(normalize_formula(a), normalize_formula(b)),
        Formula::Or(a, b) => Formula::or(normalize_formula(a), normalize_formula(b)),
        Formula::Implies(a, b) => Formula::implies(normalize_formula(a), normalize_formula(b)),
        Formula::Know(a) => Formula::know(normalize_formula(a)),
        Formula::ForallInt(i, a) => Formula::ForallInt(i.clone(), Box::new(normalize_formula(a))),
        Formula::Bool(_) => f.clone(),
        Formula::Belief { .. } => unreachable!("expand before normalizing"),
    }
}

/// Expand sugar, then normalize.
pub fn normalized(decls: &Decls, f: &Formula) -> Result<Formula, SynError> {
    Ok(normalize_formula(&expand_formula(decls, f)?))
}

/// Structural equivalence after expansion and normalization; this is the
/// equality used by the proof checker's substitution-shape tests.
pub fn formulas_equiv(decls: &Decls, a: &Formula, b: &Formula) -> Result<bool, SynError> {
    Ok(normalized(decls, a)? == normalized(decls, b)?)
}
