use super::script::parse_proof_script;
use super::*;
use crate::kripke::build_model;
use crate::scenario::parse_scenario;

const HEADER: &str = "
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
";

fn check_src(src: &str) -> CheckReport {
    let script = parse_proof_script(&format!("{HEADER}\n{src}")).expect("script parses");
    check_proof(&script, None)
}

fn reason(report: &CheckReport) -> String {
    match &report.verdict {
        ProofVerdict::Accepted => panic!("expected rejection, got acceptance"),
        ProofVerdict::Rejected { reason, path } => format!("{path}: {reason}"),
    }
}

#[test]
fn skip_requires_equal_pre_and_post() {
    let ok = check_src("rule Skip { pre mu1 + 1 == 2; prog { skip } post mu1 == 1; }");
    assert!(ok.accepted(), "{:?}", ok.verdict);
    assert!(ok.assumed.is_empty());

    let bad = check_src("rule Skip { pre mu1 == mu2; prog { skip } post mu1 == mu3; }");
    assert!(reason(&bad).contains("Skip pre/post"));
}

#[test]
fn assignment_substitutes_backwards() {
    let ok = check_src("rule UpdVar { pre a13 <= 0.05; prog { a12 := a13 } post a12 <= 0.05; }");
    assert!(ok.accepted(), "{:?}", ok.verdict);

    let bad = check_src("rule UpdVar { pre a12 <= 0.05; prog { a12 := a13 } post a12 <= 0.05; }");
    assert!(reason(&bad).contains("UpdVar substitution"));
}

#[test]
fn history_axiom_advances_the_called_counter() {
    let ok = check_src(
        "rule Hist { pre kappa{}; prog { a12 := za12(y1, y2) } \
         post kappa{ (y1, y2): za12 }; }",
    );
    assert!(ok.accepted(), "{:?}", ok.verdict);

    // stale counter in the postcondition: the precondition would need an
    // impossible count of -1
    let bad = check_src(
        "rule Hist { pre kappa{}; prog { a12 := za12(y1, y2) } post kappa{}; }",
    );
    assert!(reason(&bad).contains("Hist substitution"));
}

#[test]
fn two_tailed_test_rule_introduces_an_exact_belief() {
    let ok = check_src(
        "rule TwoHT {
           pre  kappa{} && sampled(y1, normal(mu1, 1.0), 2)
                && sampled(y2, normal(mu2, 1.0), 2) && P(alt(za12));
           prog { a12 := za12(y1, y2) }
           post kappa{ (y1, y2): za12 } && sampled(y1, normal(mu1, 1.0), 2)
                && sampled(y2, normal(mu2, 1.0), 2) && P(alt(za12))
                && Belief[== a12; (y1, y2); za12] alt(za12);
           side { meaning by assume; }
         }",
    );
    assert!(ok.accepted(), "{:?}", ok.verdict);
    assert_eq!(ok.assumed.len(), 1, "meaningfulness is recorded as assumed");
    assert!(ok.discharged.iter().any(|d| d.contains("TwoHT expansion")));
}

#[test]
fn reported_pvalue_must_be_fresh() {
    let bad = check_src(
        "rule TwoHT {
           pre  kappa{} && sampled(y1, normal(mu1, 1.0), 2)
                && sampled(y2, normal(mu2, 1.0), 2) && a12 <= 0.5;
           prog { a12 := za12(y1, y2) }
           post kappa{ (y1, y2): za12 } && sampled(y1, normal(mu1, 1.0), 2)
                && sampled(y2, normal(mu2, 1.0), 2) && a12 <= 0.5
                && Belief[== a12; (y1, y2); za12] alt(za12);
         }",
    );
    assert!(reason(&bad).contains("freshness violation"));
}

#[test]
fn mutated_belief_shapes_are_rejected() {
    // wrong hypothesis: one tail instead of the declared two-tailed alternative
    let bad = check_src(
        "rule TwoHT {
           pre  kappa{} && P(alt(za12));
           prog { a12 := za12(y1, y2) }
           post kappa{ (y1, y2): za12 } && P(alt(za12))
                && Belief[== a12; (y1, y2); za12] (mu2 < mu1);
         }",
    );
    assert!(reason(&bad).contains("belief hypothesis"));

    // wrong relation: the rule reports the exact p-value, not a bound
    let bad = check_src(
        "rule TwoHT {
           pre  kappa{} && P(alt(za12));
           prog { a12 := za12(y1, y2) }
           post kappa{ (y1, y2): za12 } && P(alt(za12))
                && Belief[<= a12; (y1, y2); za12] alt(za12);
         }",
    );
    assert!(reason(&bad).contains("exact p-value"));

    // missing history equation for the other declared pair
    let bad = check_src(
        "rule TwoHT {
           pre  hist((y1, y2); za12) == 0 && P(alt(za12));
           prog { a12 := za12(y1, y2) }
           post hist((y1, y2); za12) == 1 && P(alt(za12))
                && Belief[== a12; (y1, y2); za12] alt(za12);
         }",
    );
    assert!(reason(&bad).contains("precondition must fix"));
}

#[test]
fn consequence_discharges_propositional_obligations() {
    let ok = check_src(
        "rule Conseq {
           pre  mu1 < mu2;
           prog { skip }
           post mu1 < mu2 || mu2 < mu1;
           side { left by schema(taut); right by schema(taut); }
           premises {
             rule Skip { pre mu1 < mu2; prog { skip } post mu1 < mu2; }
           }
         }",
    );
    assert!(ok.accepted(), "{:?}", ok.verdict);
    assert_eq!(ok.discharged.len(), 2);

    let bad = check_src(
        "rule Conseq {
           pre  mu1 < mu2;
           prog { skip }
           post mu2 < mu1;
           premises {
             rule Skip { pre mu1 < mu2; prog { skip } post mu1 < mu2; }
           }
         }",
    );
    assert!(reason(&bad).contains("schema(taut)"));
}

#[test]
fn side_labels_must_name_obligations() {
    let bad = check_src(
        "rule Skip { pre mu1 == mu2; prog { skip } post mu1 == mu2; \
         side { meaning by assume; } }",
    );
    assert!(reason(&bad).contains("not an obligation"));
}

#[test]
fn scenario_directive_requires_a_model() {
    let bad = check_src(
        "rule Conseq {
           pre  mu1 < mu2;
           prog { skip }
           post mu1 < mu2;
           side { left by scenario; }
           premises {
             rule Skip { pre mu1 < mu2; prog { skip } post mu1 < mu2; }
           }
         }",
    );
    assert!(reason(&bad).contains("no scenario was supplied"));
}

#[test]
fn meaningfulness_can_be_checked_on_a_scenario() {
    let scn = "
        obs y1 : list(real);
        obs y2 : list(real);
        obs a12 : prob;
        inv mu1 : real;
        inv mu2 : real;
        test za12 = z(two, sigma = 1.0, means = (mu1, mu2));
        pair (y1, y2) : za12;

        grid (mu1, mu2) in { (0.0, 0.0), (2.0, 0.0), (0.0, 2.0) };
        dataset y1 = [3.0, 3.0];
        dataset y2 = [0.0, 0.0];
        sampling y1 ~ normal(mu1, 1.0) ^ 2;
        sampling y2 ~ normal(mu2, 1.0) ^ 2;
    ";
    let model = build_model(&parse_scenario(scn).unwrap(), 1_000_000).unwrap();
    let script = parse_proof_script(
        "
        obs y1 : list(real);
        obs y2 : list(real);
        obs a12 : prob;
        inv mu1 : real;
        inv mu2 : real;
        test za12 = z(two, sigma = 1.0, means = (mu1, mu2));
        pair (y1, y2) : za12;

        rule TwoHT {
           pre  kappa{} && sampled(y1, normal(mu1, 1.0), 2)
                && sampled(y2, normal(mu2, 1.0), 2) && P(alt(za12));
           prog { a12 := za12(y1, y2) }
           post kappa{ (y1, y2): za12 } && sampled(y1, normal(mu1, 1.0), 2)
                && sampled(y2, normal(mu2, 1.0), 2) && P(alt(za12))
                && Belief[== a12; (y1, y2); za12] alt(za12);
           side { meaning by scenario; }
        }",
    )
    .unwrap();
    let report = check_proof(&script, Some(&model));
    assert!(report.accepted(), "{:?}", report.verdict);
    assert!(report.assumed.is_empty());
    assert_eq!(report.scenario_checked.len(), 1);
}

#[test]
fn undeclared_pairs_are_rejected_at_parse_time() {
    let err = parse_proof_script(
        "
        obs y1 : list(real);
        obs y2 : list(real);
        obs a12 : prob;
        inv mu1 : real;
        inv mu2 : real;
        test za12 = z(two, sigma = 1.0, means = (mu1, mu2));

        rule Hist { pre true; prog { a12 := za12(y1, y2) } post true; }",
    )
    .unwrap_err();
    assert!(err.to_string().contains("pair"), "{err}");
}
