//! Weakest preconditions for loop-free programs and verification-condition
//! generation for invariant-annotated loops.

use thiserror::Error;

use crate::semantics::sequentialize;
use crate::syntax::subst::{formula_subst, Subst};
use crate::syntax::{Decls, Formula, Program, SynError};

#[derive(Debug, Error)]
pub enum WpError {
    #[error("weakest preconditions are defined for loop-free programs only; annotate the loop with an invariant and use verification-condition generation")]
    LoopEncountered,
    #[error("while loop lacks an invariant annotation")]
    MissingInvariant,
    #[error(transparent)]
    Syn(#[from] SynError),
}

/// Weakest precondition of a loop-free program. Substitution passes through
/// `K` unchanged: program variables are never bound by the logic.
pub fn weakest_pre(decls: &Decls, c: &Program, phi: &Formula) -> Result<Formula, WpError> {
    match c {
        Program::Skip => Ok(phi.clone()),
        Program::Assign(v, e) => Ok(formula_subst(decls, phi, &Subst::assign(v, e))?),
        Program::TestCall { var, test, args } => Ok(formula_subst(
            decls,
            phi,
            &Subst::test_call(var, test, args),
        )?),
        Program::Seq(c1, c2) => {
            let inner = weakest_pre(decls, c2, phi)?;
            weakest_pre(decls, c1, &inner)
        }
        // all interleavings of interference-free components reach the same
        // final memory and history, so the sequentialization's wp applies
        Program::Par(..) => weakest_pre(decls, &sequentialize(c), phi),
        Program::If(g, c1, c2) => {
            let w1 = weakest_pre(decls, c1, phi)?;
            let w2 = weakest_pre(decls, c2, phi)?;
            Ok(Formula::or(
                Formula::and(g.clone(), w1),
                Formula::and(Formula::not(g.clone()), w2),
            ))
        }
        Program::While { .. } => Err(WpError::LoopEncountered),
    }
}

/// A verification-condition set: named validity obligations plus the
/// residual precondition the caller's assumption must imply.
#[derive(Clone, Debug)]
pub struct VcSet {
    pub obligations: Vec<(String, Formula)>,
    pub wp: Formula,
}

/// Generate verification conditions for `{psi} c {phi}` where every loop is
/// annotated with an invariant: the residual wp plus, per loop, invariant
/// preservation and exit obligations, and finally `psi ⇒ wp`.
pub fn vc_gen(
    decls: &Decls,
    c: &Program,
    psi: &Formula,
    phi: &Formula,
) -> Result<VcSet, WpError> {
    let mut obligations = Vec::new();
    let mut counter = 0usize;
    let wp = wp_with_vcs(decls, c, phi, &mut obligations, &mut counter)?;
    obligations.push((
        "precondition".to_string(),
        Formula::implies(psi.clone(), wp.clone()),
    ));
    Ok(VcSet { obligations, wp })
}

fn wp_with_vcs(
    decls: &Decls,
    c: &Program,
    post: &Formula,
    obligations: &mut Vec<(String, Formula)>,
    counter: &mut usize,
) -> Result<Formula, WpError> {
    match c {
        Program::While {
            guard,
            invariant,
            body,
        } => {
            let inv = invariant.as_ref().ok_or(WpError::MissingInvariant)?;
            *counter += 1;
            let n = *counter;
            let body_wp = wp_with_vcs(decls, body, inv, obligations, counter)?;
            obligations.push((
                format!("loop-{n}-invariant-preserved"),
                Formula::implies(Formula::and(inv.clone(), guard.clone()), body_wp),
            ));
            obligations.push((
                format!("loop-{n}-exit"),
                Formula::implies(
                    Formula::and(inv.clone(), Formula::not(guard.clone())),
                    post.clone(),
                ),
            ));
            Ok(inv.clone())
        }
        Program::Seq(c1, c2) => {
            let mid = wp_with_vcs(decls, c2, post, obligations, counter)?;
            wp_with_vcs(decls, c1, &mid, obligations, counter)
        }
        Program::Par(..) => {
            wp_with_vcs(decls, &sequentialize(c), post, obligations, counter)
        }
        Program::If(g, c1, c2) => {
            let w1 = wp_with_vcs(decls, c1, post, obligations, counter)?;
            let w2 = wp_with_vcs(decls, c2, post, obligations, counter)?;
            Ok(Formula::or(
                Formula::and(g.clone(), w1),
                Formula::and(Formula::not(g.clone()), w2),
            ))
        }
        _ => weakest_pre(decls, c, post),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::{build_model, Model};
    use crate::scenario::parse_scenario;
    use crate::semantics::IntEnv;
    use crate::syntax::normalize::formulas_equiv;
    use crate::syntax::parser::{parse_formula_text, parse_program_text};
    use crate::syntax::test_decls;

    #[test]
    fn wp_base_cases() {
        let decls = test_decls();
        let phi = parse_formula_text("a12 <= 0.05", &decls).unwrap();
        let skip = parse_program_text("skip", &decls).unwrap();
        assert_eq!(weakest_pre(&decls, &skip, &phi).unwrap(), phi);

        let assign = parse_program_text("a12 := a13 + 0.1", &decls).unwrap();
        let want = parse_formula_text("a13 + 0.1 <= 0.05", &decls).unwrap();
        assert_eq!(weakest_pre(&decls, &assign, &phi).unwrap(), want);
    }

    #[test]
    fn wp_of_test_call_shifts_the_history_counter() {
        let decls = test_decls();
        let call = parse_program_text("a12 := za12(y1, y2)", &decls).unwrap();
        let kappa_one = parse_formula_text("kappa{ (y1, y2): za12 }", &decls).unwrap();
        let wp = weakest_pre(&decls, &call, &kappa_one).unwrap();
        // (h12+1) = 1 ∧ h13 = 0 is the empty-history formula
        let kappa_zero = parse_formula_text("kappa{}", &decls).unwrap();
        assert!(formulas_equiv(&decls, &wp, &kappa_zero).unwrap());
    }

    #[test]
    fn wp_substitutes_through_k_and_belief() {
        let decls = test_decls();
        let call = parse_program_text("a12 := za12(y1, y2)", &decls).unwrap();
        let phi = parse_formula_text(
            "Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2)) && K (a12 <= 1.0)",
            &decls,
        )
        .unwrap();
        let wp = weakest_pre(&decls, &call, &phi).unwrap();
        // the K-part must mention the p-value term in place of a12
        let printed = wp.to_string();
        assert!(printed.contains("za12(y1, y2) <= 1.0"), "{printed}");
        // the belief's κ must now require the bumped counter
        assert!(
            printed.contains("hist((y1, y2); za12) + 1 == 1"),
            "{printed}"
        );
    }

    #[test]
    fn wp_seq_composes() {
        let decls = test_decls();
        let c1 = parse_program_text("a12 := 0.5", &decls).unwrap();
        let c2 = parse_program_text("a13 := a12", &decls).unwrap();
        let seq = parse_program_text("a12 := 0.5; a13 := a12", &decls).unwrap();
        let phi = parse_formula_text("a13 <= 0.5", &decls).unwrap();
        let composed =
            weakest_pre(&decls, &c1, &weakest_pre(&decls, &c2, &phi).unwrap()).unwrap();
        assert_eq!(weakest_pre(&decls, &seq, &phi).unwrap(), composed);
    }

    fn wp_model() -> Model {
        let s = parse_scenario(
            "
            obs y1 : list(real);
            obs y2 : list(real);
            obs y3 : list(real);
            obs a12 : prob;
            obs a13 : prob;
            inv mu1 : real;
            inv mu2 : real;
            inv mu3 : real;
            test za12 = z(two, sigma = 1.0, means = (mu1, mu2));
            test za13 = z(two, sigma = 1.0, means = (mu1, mu3));
            pair (y1, y2) : za12;
            pair (y1, y3) : za13;

            grid (mu1, mu2, mu3) in { (0.0, 0.0, 0.0), (2.0, 0.0, 0.0), (0.0, 2.0, 0.0) };
            dataset y1 = [3.0, 3.0];
            dataset y2 = [0.0, 0.0];
            dataset y3 = [1.8, 1.8];
            dataset a12 = 1.0;
            dataset a13 = 1.0;
        ",
        )
        .unwrap();
        build_model(&s, 10_000).unwrap()
    }

    #[test]
    fn wp_matches_interpreter_brute_force() {
        let m = wp_model();
        let decls = &m.decls;
        let programs = [
            "skip",
            "a12 := za12(y1, y2)",
            "a12 := za12(y1, y2); a13 := za13(y1, y3)",
            "(a12 := za12(y1, y2)) || (a13 := za13(y1, y3))",
            "if a12 <= 0.05 { a13 := za13(y1, y3) } else { skip }",
            "a12 := za12(y1, y2); if a12 <= 0.05 { a13 := za13(y1, y3) } else { skip }",
        ];
        let formulas = [
            "a12 <= 0.05",
            "kappa{ (y1, y2): za12 }",
            "kappa{}",
            "K (a12 <= 1.0)",
            "Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2))",
            "hist((y1, y2); za12) == 1 || a13 <= 1.0",
        ];
        let ints = IntEnv::new();
        for psrc in &programs {
            let c = parse_program_text(psrc, decls).unwrap();
            for fsrc in &formulas {
                let phi = parse_formula_text(fsrc, decls).unwrap();
                let wp = weakest_pre(decls, &c, &phi).unwrap();
                for wi in 0..m.worlds.len() {
                    let holds_wp = m.satisfies(wi, &ints, &wp).unwrap();
                    // brute force: run and check every final inside the
                    // re-closed model
                    let r = crate::kripke::judgment_holds(
                        &m,
                        &Formula::Bool(true),
                        &c,
                        &phi,
                        10_000,
                    )
                    .unwrap();
                    // restrict the oracle to this start world
                    let finals = crate::semantics::run(decls, &c, &m.worlds[wi], 10_000)
                        .unwrap()
                        .finals;
                    let all_hold = finals.iter().all(|f| {
                        let fi = r.model.world_index(f).unwrap();
                        r.model.satisfies(fi, &ints, &phi).unwrap()
                    });
                    assert_eq!(
                        holds_wp, all_hold,
                        "wp mismatch: C = {psrc}, φ = {fsrc}, world {wi}"
                    );
                }
            }
        }
    }

    #[test]
    fn par_and_seq_wp_are_equivalid() {
        let m = wp_model();
        let decls = &m.decls;
        let par = parse_program_text(
            "(a12 := za12(y1, y2)) || (a13 := za13(y1, y3))",
            decls,
        )
        .unwrap();
        let seq = parse_program_text(
            "a12 := za12(y1, y2); a13 := za13(y1, y3)",
            decls,
        )
        .unwrap();
        let ints = IntEnv::new();
        for fsrc in ["min(a12, a13) <= 1.0", "kappa{ (y1, y2): za12, (y1, y3): za13 }"] {
            let phi = parse_formula_text(fsrc, decls).unwrap();
            let wp_par = weakest_pre(decls, &par, &phi).unwrap();
            let wp_seq = weakest_pre(decls, &seq, &phi).unwrap();
            for wi in 0..m.worlds.len() {
                assert_eq!(
                    m.satisfies(wi, &ints, &wp_par).unwrap(),
                    m.satisfies(wi, &ints, &wp_seq).unwrap()
                );
            }
        }
    }

    #[test]
    fn vc_gen_shapes() {
        let decls = test_decls();
        // loop-free: a single precondition obligation
        let c = parse_program_text("a12 := 0.5", &decls).unwrap();
        let psi = parse_formula_text("kappa{}", &decls).unwrap();
        let phi = parse_formula_text("a12 <= 0.5", &decls).unwrap();
        let vcs = vc_gen(&decls, &c, &psi, &phi).unwrap();
        assert_eq!(vcs.obligations.len(), 1);
        assert_eq!(vcs.obligations[0].0, "precondition");

        // while e invariant I { skip } with psi = I, phi = I ∧ ¬e:
        // all obligations are of the form X ⇒ X (modulo structure)
        let c = parse_program_text(
            "while a12 <= 0.05 invariant (a13 <= 1.0) { skip }",
            &decls,
        )
        .unwrap();
        let psi = parse_formula_text("a13 <= 1.0", &decls).unwrap();
        let phi = parse_formula_text("a13 <= 1.0 && !(a12 <= 0.05)", &decls).unwrap();
        let vcs = vc_gen(&decls, &c, &psi, &phi).unwrap();
        assert_eq!(vcs.obligations.len(), 3);
        for (_, ob) in &vcs.obligations {
            if let Formula::Implies(a, b) = ob {
                // each consequent's conjuncts are contained in the antecedent
                let printed_a = a.to_string();
                for part in conjuncts(b) {
                    assert!(
                        printed_a.contains(&part.to_string()),
                        "{ob} is not self-discharging"
                    );
                }
            } else {
                panic!("obligation is not an implication: {ob}");
            }
        }

        // unannotated loop is an error
        let c = parse_program_text("while a12 <= 0.05 { skip }", &decls).unwrap();
        assert!(matches!(
            vc_gen(&decls, &c, &psi, &phi),
            Err(WpError::MissingInvariant)
        ));
        assert!(matches!(
            weakest_pre(&decls, &c, &phi),
            Err(WpError::LoopEncountered)
        ));
    }

    fn conjuncts(f: &Formula) -> Vec<&Formula> {
        match f {
            Formula::And(a, b) => {
                let mut v = conjuncts(a);
                v.extend(conjuncts(b));
                v
            }
            _ => vec![f],
        }
    }
}
