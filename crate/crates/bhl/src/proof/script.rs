//! Parser for proof-script files.
//!
//! A script starts with a declaration header (the same `obs` / `inv` /
//! `test` / `pair` / `int_bound` items as scenario and program files) and
//! continues with a single derivation node:
//!
//! ```text
//! rule Seq {
//!   pre  <formula>;
//!   prog { <program> }
//!   post <formula>;
//!   side { left by schema(taut); meaning by scenario; }
//!   premises { rule ... { ... } rule ... { ... } }
//! }
//! ```
//!
//! The `side` and `premises` blocks are optional. Every history pair a
//! program mentions must be declared in the header, because history
//! abbreviations in the formulas expand over the declared pairs.

use super::{Directive, Judgment, ProofNode, ProofScript, RuleId, SideSpec};
use crate::syntax::check::{check_program, check_quantifier_placement};
use crate::syntax::lexer::TokKind;
use crate::syntax::parser::Parser;
use crate::syntax::{Dataset, Decls, Program, SynError};

/// Parse a complete proof script (declarations plus one derivation tree).
pub fn parse_proof_script(src: &str) -> Result<ProofScript, SynError> {
    let mut p = Parser::new(src)?;
    let decls = p.parse_decls()?;
    let root = parse_node(&mut p, &decls)?;
    p.expect_eof()?;
    validate_node(&decls, &root)?;
    Ok(ProofScript { decls, root })
}

fn parse_node(p: &mut Parser, decls: &Decls) -> Result<ProofNode, SynError> {
    p.expect_kw("rule")?;
    let name = p.expect_ident()?;
    let Some(rule) = RuleId::from_name(&name) else {
        return p.err(format!("unknown rule name `{name}`"));
    };
    p.expect(TokKind::LBrace)?;

    p.expect_kw("pre")?;
    let pre = p.parse_formula(decls)?;
    p.expect(TokKind::Semi)?;

    p.expect_kw("prog")?;
    p.expect(TokKind::LBrace)?;
    let prog = if p.accept(TokKind::RBrace) {
        return p.err("empty program block; use `skip` for the empty program");
    } else {
        let c = p.parse_program(decls)?;
        p.expect(TokKind::RBrace)?;
        c
    };

    p.expect_kw("post")?;
    let post = p.parse_formula(decls)?;
    p.expect(TokKind::Semi)?;

    let mut sides = Vec::new();
    if p.accept_kw("side") {
        p.expect(TokKind::LBrace)?;
        while !p.accept(TokKind::RBrace) {
            let label = p.expect_ident()?;
            p.expect_kw("by")?;
            let directive = if p.accept_kw("schema") {
                p.expect(TokKind::LParen)?;
                let s = p.expect_ident()?;
                p.expect(TokKind::RParen)?;
                Directive::Schema(s)
            } else if p.accept_kw("scenario") {
                Directive::Scenario
            } else if p.accept_kw("assume") {
                Directive::Assume
            } else {
                return p.err("expected `schema(<name>)`, `scenario`, or `assume`");
            };
            if sides.iter().any(|s: &SideSpec| s.label == label) {
                return p.err(format!("duplicate side label `{label}`"));
            }
            sides.push(SideSpec { label, directive });
            p.expect(TokKind::Semi)?;
        }
    }

    let mut premises = Vec::new();
    if p.accept_kw("premises") {
        p.expect(TokKind::LBrace)?;
        while !p.accept(TokKind::RBrace) {
            premises.push(parse_node(p, decls)?);
        }
    }

    p.expect(TokKind::RBrace)?;
    Ok(ProofNode {
        rule,
        conclusion: Judgment { pre, prog, post },
        premises,
        sides,
    })
}

/// Well-formedness that does not depend on the rule being applied: programs
/// type-check, every called pair is declared, and epistemic operators contain
/// no free counter variables in quantifying position.
fn validate_node(decls: &Decls, n: &ProofNode) -> Result<(), SynError> {
    check_program(decls, &n.conclusion.prog)?;
    check_called_pairs(decls, &n.conclusion.prog)?;
    check_quantifier_placement(&n.conclusion.pre)?;
    check_quantifier_placement(&n.conclusion.post)?;
    for prem in &n.premises {
        validate_node(decls, prem)?;
    }
    Ok(())
}

fn check_called_pairs(decls: &Decls, c: &Program) -> Result<(), SynError> {
    match c {
        Program::TestCall { test, args, .. } => {
            let d = Dataset::from_vars(args);
            if !decls.has_pair(&d, test) {
                return Err(SynError::UndeclaredPair {
                    data: d.to_string(),
                    test: test.to_string(),
                });
            }
            Ok(())
        }
        Program::Seq(a, b) | Program::Par(a, b) => {
            check_called_pairs(decls, a)?;
            check_called_pairs(decls, b)
        }
        Program::If(_, a, b) => {
            check_called_pairs(decls, a)?;
            check_called_pairs(decls, b)
        }
        Program::While { body, .. } => check_called_pairs(decls, body),
        Program::Skip | Program::Assign(..) => Ok(()),
    }
}
