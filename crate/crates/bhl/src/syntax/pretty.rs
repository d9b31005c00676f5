//! Display implementations producing re-parseable surface syntax. Floats are
//! printed with `{:?}` so round-tripping through the parser is exact.

use std::fmt;

use super::ast::*;

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmpOp::Eq => write!(f, "=="),
            CmpOp::Lt => write!(f, "<"),
            CmpOp::Le => write!(f, "<="),
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelOp::Eq => write!(f, "="),
            RelOp::Lt => write!(f, "<"),
            RelOp::Le => write!(f, "<="),
            RelOp::Gt => write!(f, ">"),
            RelOp::Ge => write!(f, ">="),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Normal { mu, var } => write!(f, "normal({mu:?}, {var:?})"),
        }
    }
}

// term precedence: 0 additive, 1 multiplicative, 2 primary
fn term_prec(t: &Term) -> u8 {
    match t {
        Term::App(FuncSym::Add | FuncSym::Sub, _) => 0,
        Term::App(FuncSym::Mul | FuncSym::Div, _) => 1,
        _ => 2,
    }
}

fn fmt_term(t: &Term, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = term_prec(t);
    if mine < prec {
        write!(f, "(")?;
    }
    match t {
        Term::Var(n) | Term::IntVar(n) => write!(f, "{n}")?,
        Term::Hist(d, tr) => write!(f, "hist({d}; {tr})")?,
        Term::Int(n) => write!(f, "{n}")?,
        Term::Real(x) => write!(f, "{x:?}")?,
        Term::App(sym, args) => match sym {
            FuncSym::Add | FuncSym::Sub | FuncSym::Mul | FuncSym::Div => {
                let op = match sym {
                    FuncSym::Add => "+",
                    FuncSym::Sub => "-",
                    FuncSym::Mul => "*",
                    _ => "/",
                };
                fmt_term(&args[0], mine, f)?;
                write!(f, " {op} ")?;
                // left-associative: right child needs the next tighter level
                fmt_term(&args[1], mine + 1, f)?;
            }
            FuncSym::Neg => {
                write!(f, "-(")?;
                fmt_term(&args[0], 0, f)?;
                write!(f, ")")?;
            }
            FuncSym::Min | FuncSym::Mean | FuncSym::Size | FuncSym::Normal => {
                let name = match sym {
                    FuncSym::Min => "min",
                    FuncSym::Mean => "mean",
                    FuncSym::Size => "size",
                    _ => "normal",
                };
                write!(f, "{name}(")?;
                fmt_args(args, f)?;
                write!(f, ")")?;
            }
            FuncSym::PValue(tr) => {
                write!(f, "{tr}(")?;
                fmt_args(args, f)?;
                write!(f, ")")?;
            }
            FuncSym::Model(id) => {
                write!(f, "model({id}, ")?;
                fmt_args(args, f)?;
                write!(f, ")")?;
            }
        },
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

fn fmt_args(args: &[Term], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        fmt_term(a, 0, f)?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, f)
    }
}

// formula precedence: 0 implication/quantifier, 1 or, 2 and, 3 unary/atom
fn formula_prec(p: &Formula) -> u8 {
    match p {
        Formula::Implies(..) | Formula::ForallInt(..) => 0,
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        _ => 3,
    }
}

fn fmt_formula(p: &Formula, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = formula_prec(p);
    if mine < prec {
        write!(f, "(")?;
    }
    match p {
        Formula::Bool(b) => write!(f, "{b}")?,
        Formula::Cmp(op, a, b) => write!(f, "{a} {op} {b}")?,
        Formula::Sampled(y, d, n) => write!(f, "sampled({y}, {d}, {n})")?,
        Formula::Followed(y, d) => write!(f, "followed({y}, {d})")?,
        Formula::Unlikely { rel, eps, data, test } => {
            write!(f, "Unlikely[{rel} {eps}; {data}; {test}]")?
        }
        Formula::Not(a) => {
            write!(f, "!(")?;
            fmt_formula(a, 0, f)?;
            write!(f, ")")?;
        }
        Formula::And(a, b) => {
            fmt_formula(a, 3, f)?;
            write!(f, " && ")?;
            fmt_formula(b, 2, f)?;
        }
        Formula::Or(a, b) => {
            fmt_formula(a, 2, f)?;
            write!(f, " || ")?;
            fmt_formula(b, 1, f)?;
        }
        Formula::Implies(a, b) => {
            fmt_formula(a, 1, f)?;
            write!(f, " -> ")?;
            fmt_formula(b, 0, f)?;
        }
        Formula::Know(a) => {
            write!(f, "K (")?;
            fmt_formula(a, 0, f)?;
            write!(f, ")")?;
        }
        Formula::ForallInt(v, a) => {
            write!(f, "forall {v}. ")?;
            fmt_formula(a, 0, f)?;
        }
        Formula::Belief { rel, eps, data, test, body } => {
            write!(f, "Belief[{rel} {eps}; {data}; {test}] (")?;
            fmt_formula(body, 0, f)?;
            write!(f, ")")?;
        }
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_formula(self, 0, f)
    }
}

// program precedence: 0 parallel, 1 sequence, 2 statement
fn program_prec(c: &Program) -> u8 {
    match c {
        Program::Par(..) => 0,
        Program::Seq(..) => 1,
        _ => 2,
    }
}

fn fmt_program(c: &Program, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = program_prec(c);
    if mine < prec {
        write!(f, "(")?;
    }
    match c {
        Program::Skip => write!(f, "skip")?,
        Program::Assign(v, e) => write!(f, "{v} := {e}")?,
        Program::TestCall { var, test, args } => {
            write!(f, "{var} := {test}({})", args.join(", "))?
        }
        Program::Seq(a, b) => {
            fmt_program(a, 1, f)?;
            write!(f, "; ")?;
            fmt_program(b, 2, f)?;
        }
        Program::Par(a, b) => {
            fmt_program(a, 1, f)?;
            write!(f, " || ")?;
            fmt_program(b, 1, f)?;
        }
        Program::If(g, a, b) => {
            write!(f, "if ")?;
            fmt_formula(g, 0, f)?;
            write!(f, " {{ ")?;
            fmt_program(a, 0, f)?;
            write!(f, " }} else {{ ")?;
            fmt_program(b, 0, f)?;
            write!(f, " }}")?;
        }
        Program::While { guard, invariant, body } => {
            write!(f, "while ")?;
            fmt_formula(guard, 0, f)?;
            if let Some(inv) = invariant {
                write!(f, " invariant (")?;
                fmt_formula(inv, 0, f)?;
                write!(f, ")")?;
            }
            write!(f, " {{ ")?;
            fmt_program(body, 0, f)?;
            write!(f, " }}")?;
        }
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_program(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use crate::syntax::parser::{parse_formula_text, parse_program_text};
    use crate::syntax::test_decls;

    #[test]
    fn formula_roundtrip() {
        let decls = test_decls();
        for src in [
            "a12 <= 0.05 && !(mu1 == mu2) -> K (a12 < 1.0)",
            "Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2))",
            "forall i. hist((y1, y2); za12) == i -> i <= 3",
            "sampled(y1, normal(mu1, 1.0), 3) || followed(y2, normal(mu2, 1.0))",
            "Unlikely[= za12(y1, y2); (y1, y2); za12]",
            "min(a12, a13) + 1.0 * 2.0 <= mean(y1) - (mu1 - mu2)",
        ] {
            let f = parse_formula_text(src, &decls).unwrap();
            let printed = f.to_string();
            let back = parse_formula_text(&printed, &decls).unwrap();
            assert_eq!(f, back, "print/reparse changed {src} -> {printed}");
        }
    }

    #[test]
    fn program_roundtrip() {
        let decls = test_decls();
        for src in [
            "a12 := za12(y1, y2); skip",
            "(a12 := za12(y1, y2)) || (a13 := za13(y1, y3))",
            "if a12 <= 0.05 { a13 := za13(y1, y3) } else { skip }",
            "while a12 <= 0.05 invariant (a12 <= 1.0) { a12 := za12(y1, y2) }",
        ] {
            let c = parse_program_text(src, &decls).unwrap();
            let printed = c.to_string();
            let back = parse_program_text(&printed, &decls).unwrap();
            assert_eq!(c, back, "print/reparse changed {src} -> {printed}");
        }
    }
}
