//! Derivation-tree checking for belief judgments `{ψ} C {φ}`.
//!
//! A proof script is a tree of rule applications over a shared declaration
//! header. Each node carries its own judgment; the checker verifies that the
//! node's shape matches its rule (substitution equality for the axioms,
//! premise wiring for the structural rules) and routes every semantic side
//! condition to a discharge directive: a built-in schema, a finite-model
//! check, or an explicitly recorded assumption.
//!
//! The hypothesis-test rules (`TwoHT`, `LowHT`, `UpHT`, `MultOr`, `MultAnd`)
//! are not trusted as axioms: each application is validated as the expansion
//! it abbreviates — a history-substitution axiom node under a consequence
//! step whose obligation is the corresponding belief-introduction schema —
//! plus the freshness, typing and meaningfulness side conditions.

pub mod discharge;
pub mod script;

use crate::kripke::{KripkeError, Model};
use crate::semantics::{IntEnv, SemError};
use crate::syntax::check::check_program;
use crate::syntax::normalize::{formulas_equiv, normalize_term};
use crate::syntax::subst::{formula_subst, Subst};
use crate::syntax::sugar::{alt_formula, compds_formula, free_vars, list_tests};
use crate::syntax::{
    CmpOp, Dataset, Decls, Formula, Name, Program, RelOp, SynError, Tail, Term, TestRef,
};

use discharge::SchemaResult;

// ---------------------------------------------------------------------------
// types
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleId {
    Skip,
    UpdVar,
    Hist,
    Seq,
    If,
    Loop,
    Conseq,
    Par,
    TwoHt,
    LowHt,
    UpHt,
    MultOr,
    MultAnd,
}

impl RuleId {
    pub fn name(self) -> &'static str {
        match self {
            RuleId::Skip => "Skip",
            RuleId::UpdVar => "UpdVar",
            RuleId::Hist => "Hist",
            RuleId::Seq => "Seq",
            RuleId::If => "If",
            RuleId::Loop => "Loop",
            RuleId::Conseq => "Conseq",
            RuleId::Par => "Par",
            RuleId::TwoHt => "TwoHT",
            RuleId::LowHt => "LowHT",
            RuleId::UpHt => "UpHT",
            RuleId::MultOr => "MultOr",
            RuleId::MultAnd => "MultAnd",
        }
    }

    pub fn from_name(s: &str) -> Option<RuleId> {
        Some(match s {
            "Skip" => RuleId::Skip,
            "UpdVar" => RuleId::UpdVar,
            "Hist" => RuleId::Hist,
            "Seq" => RuleId::Seq,
            "If" => RuleId::If,
            "Loop" => RuleId::Loop,
            "Conseq" => RuleId::Conseq,
            "Par" => RuleId::Par,
            "TwoHT" => RuleId::TwoHt,
            "LowHT" => RuleId::LowHt,
            "UpHT" => RuleId::UpHt,
            "MultOr" => RuleId::MultOr,
            "MultAnd" => RuleId::MultAnd,
            _ => return None,
        })
    }

    pub fn is_derived(self) -> bool {
        matches!(
            self,
            RuleId::TwoHt | RuleId::LowHt | RuleId::UpHt | RuleId::MultOr | RuleId::MultAnd
        )
    }
}

/// A pre/program/post triple (the environment is the script's declaration
/// header, shared by the whole tree).
#[derive(Clone, Debug)]
pub struct Judgment {
    pub pre: Formula,
    pub prog: Program,
    pub post: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Directive {
    Schema(String),
    Scenario,
    Assume,
}

/// A labelled discharge directive attached to a node (`left`/`right` for the
/// consequence obligations, `meaning` for a test rule's meaningfulness
/// condition).
#[derive(Clone, Debug)]
pub struct SideSpec {
    pub label: String,
    pub directive: Directive,
}

#[derive(Clone, Debug)]
pub struct ProofNode {
    pub rule: RuleId,
    pub conclusion: Judgment,
    pub premises: Vec<ProofNode>,
    pub sides: Vec<SideSpec>,
}

/// A parsed `.bhl` script: declarations plus the root derivation node.
#[derive(Clone, Debug)]
pub struct ProofScript {
    pub decls: Decls,
    pub root: ProofNode,
}

#[derive(Clone, Debug)]
pub enum ProofVerdict {
    Accepted,
    Rejected { reason: String, path: String },
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub verdict: ProofVerdict,
    /// Obligations recorded without proof; non-empty means the acceptance is
    /// conditional.
    pub assumed: Vec<String>,
    /// Obligations verified on the supplied finite model.
    pub scenario_checked: Vec<String>,
    /// Obligations verified by schema instantiation or rule expansion.
    pub discharged: Vec<String>,
}

impl CheckReport {
    pub fn accepted(&self) -> bool {
        matches!(self.verdict, ProofVerdict::Accepted)
    }
}

// ---------------------------------------------------------------------------
// checker
// ---------------------------------------------------------------------------

/// Check a proof script. A model (built from a scenario with the same
/// declarations) enables `scenario` discharge directives.
pub fn check_proof(script: &ProofScript, model: Option<&Model>) -> CheckReport {
    let mut ck = Checker {
        decls: &script.decls,
        model,
        assumed: Vec::new(),
        scenario_checked: Vec::new(),
        discharged: Vec::new(),
    };
    let verdict = match ck.node(&script.root, "root") {
        Ok(()) => ProofVerdict::Accepted,
        Err((reason, path)) => ProofVerdict::Rejected { reason, path },
    };
    CheckReport {
        verdict,
        assumed: ck.assumed,
        scenario_checked: ck.scenario_checked,
        discharged: ck.discharged,
    }
}

type Fail = (String, String);

struct Checker<'a> {
    decls: &'a Decls,
    model: Option<&'a Model>,
    assumed: Vec<String>,
    scenario_checked: Vec<String>,
    discharged: Vec<String>,
}

impl<'a> Checker<'a> {
    fn fail<T>(&self, path: &str, reason: impl Into<String>) -> Result<T, Fail> {
        Err((reason.into(), path.to_string()))
    }

    fn lift<T>(&self, path: &str, r: Result<T, SynError>) -> Result<T, Fail> {
        r.map_err(|e| (e.to_string(), path.to_string()))
    }

    fn equal(&self, path: &str, a: &Formula, b: &Formula) -> Result<bool, Fail> {
        self.lift(path, formulas_equiv(self.decls, a, b))
    }

    fn require_equal(
        &self,
        path: &str,
        what: &str,
        found: &Formula,
        expected: &Formula,
    ) -> Result<(), Fail> {
        if self.equal(path, found, expected)? {
            Ok(())
        } else {
            self.fail(
                path,
                format!("{what}: expected `{expected}`, found `{found}`"),
            )
        }
    }

    fn node(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.lift(path, check_program(self.decls, &n.conclusion.prog))?;
        let mut used: Vec<&str> = Vec::new();
        match n.rule {
            RuleId::Skip => self.rule_skip(n, path)?,
            RuleId::UpdVar => self.rule_updvar(n, path)?,
            RuleId::Hist => self.rule_hist(n, path)?,
            RuleId::Seq => self.rule_seq(n, path)?,
            RuleId::If => self.rule_if(n, path)?,
            RuleId::Loop => self.rule_loop(n, path)?,
            RuleId::Conseq => {
                self.rule_conseq(n, path)?;
                used.extend(["left", "right"]);
            }
            RuleId::Par => self.rule_par(n, path)?,
            _ => {
                self.rule_derived(n, path)?;
                used.push("meaning");
            }
        }
        for s in &n.sides {
            if !used.contains(&s.label.as_str()) {
                return self.fail(
                    path,
                    format!(
                        "side label `{}` is not an obligation of rule {}",
                        s.label,
                        n.rule.name()
                    ),
                );
            }
        }
        for (i, p) in n.premises.iter().enumerate() {
            self.node(p, &format!("{path}.{}", i + 1))?;
        }
        Ok(())
    }

    fn expect_premises(&self, n: &ProofNode, path: &str, count: usize) -> Result<(), Fail> {
        if n.premises.len() != count {
            return self.fail(
                path,
                format!(
                    "rule {} takes {count} premise(s), found {}",
                    n.rule.name(),
                    n.premises.len()
                ),
            );
        }
        Ok(())
    }

    // ----- axioms ---------------------------------------------------------

    fn rule_skip(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 0)?;
        if !matches!(n.conclusion.prog, Program::Skip) {
            return self.fail(path, "rule Skip applies to the program `skip` only");
        }
        self.require_equal(path, "Skip pre/post", &n.conclusion.pre, &n.conclusion.post)
    }

    fn rule_updvar(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 0)?;
        let Program::Assign(v, e) = &n.conclusion.prog else {
            return self.fail(path, "rule UpdVar applies to a single assignment");
        };
        let expected = self.lift(
            path,
            formula_subst(self.decls, &n.conclusion.post, &Subst::assign(v, e)),
        )?;
        self.require_equal(path, "UpdVar substitution", &n.conclusion.pre, &expected)
    }

    fn rule_hist(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 0)?;
        let Program::TestCall { var, test, args } = &n.conclusion.prog else {
            return self.fail(path, "rule Hist applies to a single test call");
        };
        let pair = Dataset::from_vars(args);
        if !self.decls.has_pair(&pair, test) {
            return self.fail(
                path,
                format!("history pair ({pair}: {test}) is not declared"),
            );
        }
        let s = Subst::test_call(var, test, args);
        let expected = self.lift(path, formula_subst(self.decls, &n.conclusion.post, &s))?;
        self.require_equal(path, "Hist substitution", &n.conclusion.pre, &expected)
    }

    // ----- structural rules -----------------------------------------------

    fn rule_seq(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 2)?;
        let Program::Seq(c1, c2) = &n.conclusion.prog else {
            return self.fail(path, "rule Seq applies to a sequential composition");
        };
        let (p1, p2) = (&n.premises[0], &n.premises[1]);
        if p1.conclusion.prog != **c1 || p2.conclusion.prog != **c2 {
            return self.fail(path, "Seq premises must prove the two components in order");
        }
        self.require_equal(path, "Seq precondition", &p1.conclusion.pre, &n.conclusion.pre)?;
        self.require_equal(
            path,
            "Seq midcondition",
            &p2.conclusion.pre,
            &p1.conclusion.post,
        )?;
        self.require_equal(path, "Seq postcondition", &p2.conclusion.post, &n.conclusion.post)
    }

    fn rule_if(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 2)?;
        let Program::If(g, c1, c2) = &n.conclusion.prog else {
            return self.fail(path, "rule If applies to a conditional");
        };
        let (p1, p2) = (&n.premises[0], &n.premises[1]);
        if p1.conclusion.prog != **c1 || p2.conclusion.prog != **c2 {
            return self.fail(path, "If premises must prove the two branches in order");
        }
        let then_pre = Formula::and(n.conclusion.pre.clone(), g.clone());
        let else_pre = Formula::and(n.conclusion.pre.clone(), Formula::not(g.clone()));
        self.require_equal(path, "If then-branch precondition", &p1.conclusion.pre, &then_pre)?;
        self.require_equal(path, "If else-branch precondition", &p2.conclusion.pre, &else_pre)?;
        self.require_equal(path, "If then-branch postcondition", &p1.conclusion.post, &n.conclusion.post)?;
        self.require_equal(path, "If else-branch postcondition", &p2.conclusion.post, &n.conclusion.post)
    }

    fn rule_loop(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 1)?;
        let Program::While { guard, body, .. } = &n.conclusion.prog else {
            return self.fail(path, "rule Loop applies to a while loop");
        };
        let p = &n.premises[0];
        if p.conclusion.prog != **body {
            return self.fail(path, "Loop premise must prove the loop body");
        }
        // {I ∧ g} body {I}  ⟹  {I} while g {I ∧ ¬g}
        let body_pre = Formula::and(n.conclusion.pre.clone(), guard.clone());
        let exit = Formula::and(n.conclusion.pre.clone(), Formula::not(guard.clone()));
        self.require_equal(path, "Loop body precondition", &p.conclusion.pre, &body_pre)?;
        self.require_equal(path, "Loop invariant", &p.conclusion.post, &n.conclusion.pre)?;
        self.require_equal(path, "Loop postcondition", &n.conclusion.post, &exit)
    }

    fn rule_conseq(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 1)?;
        let p = &n.premises[0];
        if p.conclusion.prog != n.conclusion.prog {
            return self.fail(path, "Conseq premise must prove the same program");
        }
        let left = Formula::implies(n.conclusion.pre.clone(), p.conclusion.pre.clone());
        let right = Formula::implies(p.conclusion.post.clone(), n.conclusion.post.clone());
        self.obligation(n, path, "left", &left)?;
        self.obligation(n, path, "right", &right)
    }

    fn rule_par(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 1)?;
        let Program::Par(c1, c2) = &n.conclusion.prog else {
            return self.fail(path, "rule Par applies to a parallel composition");
        };
        let p = &n.premises[0];
        let seq = Program::seq((**c1).clone(), (**c2).clone());
        if p.conclusion.prog != seq {
            return self.fail(
                path,
                "Par premise must prove the left-then-right sequential composition",
            );
        }
        self.require_equal(path, "Par precondition", &p.conclusion.pre, &n.conclusion.pre)?;
        self.require_equal(path, "Par postcondition", &p.conclusion.post, &n.conclusion.post)
    }

    // ----- side-condition discharge ---------------------------------------

    fn directive(&self, n: &ProofNode, label: &str) -> Directive {
        n.sides
            .iter()
            .find(|s| s.label == label)
            .map(|s| s.directive.clone())
            .unwrap_or(match label {
                // consequence obligations default to the propositional route;
                // semantic meaningfulness defaults to an explicit assumption
                "meaning" => Directive::Assume,
                _ => Directive::Schema("taut".into()),
            })
    }

    fn obligation(
        &mut self,
        n: &ProofNode,
        path: &str,
        label: &str,
        goal: &Formula,
    ) -> Result<(), Fail> {
        match self.directive(n, label) {
            Directive::Schema(name) => {
                match self.lift(path, discharge::by_schema(self.decls, &name, goal))? {
                    SchemaResult::Entailed => {
                        self.discharged
                            .push(format!("{path}/{label} by schema({name}): {goal}"));
                        Ok(())
                    }
                    SchemaResult::NotEntailed(why) => self.fail(
                        path,
                        format!("obligation `{label}` failed schema({name}): {why}"),
                    ),
                }
            }
            Directive::Scenario => {
                let Some(model) = self.model else {
                    return self.fail(
                        path,
                        format!("obligation `{label}` requests a scenario check but no scenario was supplied"),
                    );
                };
                match scenario_valid(model, goal) {
                    Ok(None) => {
                        self.scenario_checked.push(format!("{path}/{label}: {goal}"));
                        Ok(())
                    }
                    Ok(Some(cex)) => self.fail(
                        path,
                        format!("obligation `{label}` refuted on the scenario: {cex}"),
                    ),
                    Err(e) => self.fail(path, format!("obligation `{label}`: {e}")),
                }
            }
            Directive::Assume => {
                self.assumed.push(format!("{path}/{label}: {goal}"));
                Ok(())
            }
        }
    }

    // ----- hypothesis-test rules ------------------------------------------

    fn rule_derived(&mut self, n: &ProofNode, path: &str) -> Result<(), Fail> {
        self.expect_premises(n, path, 0)?;
        let Program::TestCall { var, test, args } = &n.conclusion.prog else {
            return self.fail(
                path,
                format!("rule {} applies to a single test call", n.rule.name()),
            );
        };
        let call_data = Dataset::from_vars(args);
        if !self.decls.has_pair(&call_data, test) {
            return self.fail(
                path,
                format!("history pair ({call_data}: {test}) is not declared"),
            );
        }

        // the application must be the history-substitution expansion: the
        // postcondition is the precondition with the called pair's counter
        // advanced and a single new belief conjunct
        let pre_c = flatten_and(&n.conclusion.pre);
        let post_c = flatten_and(&n.conclusion.post);
        let (removed, added, kept) = self.conjunct_diff(path, &pre_c, &post_c)?;

        let (new_belief, added_hist) = self.split_added(path, n, &added, &call_data, test)?;
        let (old_belief, removed_hist) = match n.rule {
            RuleId::MultOr | RuleId::MultAnd => {
                let (b, h) = self.split_added(path, n, &removed, &call_data, test)?;
                (Some(b), h)
            }
            _ => {
                if removed.len() != 1 {
                    return self.fail(
                        path,
                        format!(
                            "rule {} must change exactly the called pair's history counter",
                            n.rule.name()
                        ),
                    );
                }
                (None, removed[0].clone())
            }
        };

        // counter advanced 0 → 1 for the called pair
        for (f, want) in [(&removed_hist, 0), (&added_hist, 1)] {
            match hist_eq(f) {
                Some((d, t, k)) if d == call_data && t == *test && k == want => {}
                _ => {
                    return self.fail(
                        path,
                        format!(
                            "rule {}: expected the history equation `hist({call_data}; {test}) == {want}`, found `{f}`",
                            n.rule.name()
                        ),
                    )
                }
            }
        }

        // the precondition must pin the exact history: the previous tests'
        // multiplicities for the combination rules, zero everywhere else
        let prior: Vec<(Dataset, TestRef)> = match &old_belief {
            None => Vec::new(),
            Some(b) => {
                let Formula::Belief { data, test, .. } = b else { unreachable!() };
                self.lift(path, list_tests(data, test))?
            }
        };
        for (d, t) in &self.decls.pairs {
            let want = prior.iter().filter(|(pd, pt)| pd == d && pt == t).count() as i64;
            let found = pre_c.iter().find_map(|f| match hist_eq(f) {
                Some((fd, ft, k)) if fd == *d && ft == *t => Some(k),
                _ => None,
            });
            if found != Some(want) {
                return self.fail(
                    path,
                    format!(
                        "rule {}: precondition must fix `hist(({d}); {t}) == {want}` \
                         (the exact history before the call)",
                        n.rule.name()
                    ),
                );
            }
        }
        if let (Some(b), RuleId::MultOr | RuleId::MultAnd) = (&old_belief, n.rule) {
            let Formula::Belief { data, test: t1, .. } = b else { unreachable!() };
            if self
                .lift(path, list_tests(data, t1))?
                .iter()
                .any(|(d, t)| *d == call_data && t == test)
            {
                return self.fail(
                    path,
                    "the combination rules require a test not already in the history",
                );
            }
        }

        // the new belief must match the rule's schema exactly
        self.check_new_belief(path, n, var, &call_data, test, &new_belief, old_belief.as_ref())?;

        // freshness: the result variable and the called pair's counter must
        // not occur in the frame or the hypothesis formulas
        let frame: Vec<Formula> = kept.iter().filter(|f| hist_eq(f).is_none()).cloned().collect();
        let mut fresh_scope = frame.clone();
        if let Formula::Belief { body, .. } = &new_belief {
            fresh_scope.push((**body).clone());
        }
        let mut fresh = vec![var.clone()];
        if let Some(Formula::Belief { eps, .. }) = &old_belief {
            if let Term::Var(a1) = eps {
                fresh.push(a1.clone());
            }
        }
        for f in &fresh_scope {
            let fv = self.lift(path, free_vars(self.decls, f))?;
            for v in &fresh {
                if fv.contains_var(v) {
                    return self.fail(
                        path,
                        format!(
                            "freshness violation: `{v}` occurs free in `{f}` \
                             (the reported p-value must not constrain the frame)"
                        ),
                    );
                }
            }
            if fv.hists.contains(&(call_data.clone(), test.clone())) {
                return self.fail(
                    path,
                    format!(
                        "freshness violation: `hist({call_data}; {test})` occurs free in `{f}`"
                    ),
                );
            }
        }

        // meaningfulness: the frame must guarantee the population model and
        // prior possibility of the hypotheses
        let psi = Formula::and_all(frame.clone());
        let goal = self.meaningfulness(path, n, &psi, &call_data, test, &new_belief)?;
        self.obligation(n, path, "meaning", &goal)?;

        self.discharged.push(format!(
            "{path}: {} expansion verified (history substitution + {})",
            n.rule.name(),
            match n.rule {
                RuleId::MultOr => "schema(bht_or)",
                RuleId::MultAnd => "schema(bht_and)",
                _ => "schema(bht)",
            }
        ));
        Ok(())
    }

    /// Split an added/removed conjunct set into (belief, history equation).
    fn split_added(
        &self,
        path: &str,
        n: &ProofNode,
        fs: &[Formula],
        call_data: &Dataset,
        test: &TestRef,
    ) -> Result<(Formula, Formula), Fail> {
        if fs.len() != 2 {
            return self.fail(
                path,
                format!(
                    "rule {} must exchange exactly one belief and the called pair's \
                     history equation; got {} changed conjunct(s) relative to \
                     `hist({call_data}; {test})`",
                    n.rule.name(),
                    fs.len()
                ),
            );
        }
        let belief = fs.iter().find(|f| matches!(f, Formula::Belief { .. }));
        let hist = fs.iter().find(|f| hist_eq(f).is_some());
        match (belief, hist) {
            (Some(b), Some(h)) => Ok((b.clone(), h.clone())),
            _ => self.fail(
                path,
                format!(
                    "rule {} must exchange exactly one belief and one history equation",
                    n.rule.name()
                ),
            ),
        }
    }

    fn check_new_belief(
        &self,
        path: &str,
        n: &ProofNode,
        var: &Name,
        call_data: &Dataset,
        test: &TestRef,
        new_belief: &Formula,
        old_belief: Option<&Formula>,
    ) -> Result<(), Fail> {
        let Formula::Belief { rel, eps, data, test: btest, body } = new_belief else {
            unreachable!()
        };
        let atomic = match test {
            TestRef::Atomic(id) => self.lift(
                path,
                self.decls
                    .test(id)
                    .cloned()
                    .ok_or(SynError::UnknownTest { id: id.clone() }),
            )?,
            _ => return self.fail(path, "hypothesis-test rules call an atomic test"),
        };
        match n.rule {
            RuleId::TwoHt | RuleId::LowHt | RuleId::UpHt => {
                let want_tail = match n.rule {
                    RuleId::TwoHt => Tail::Two,
                    RuleId::LowHt => Tail::Lower,
                    _ => Tail::Upper,
                };
                if atomic.tail != want_tail {
                    return self.fail(
                        path,
                        format!(
                            "rule {} requires a {want_tail}-tailed test, but `{}` is {}-tailed",
                            n.rule.name(),
                            atomic.id,
                            atomic.tail
                        ),
                    );
                }
                if data != call_data || btest != test {
                    return self.fail(path, "the new belief must be about the called test");
                }
                if *rel != RelOp::Eq || *eps != Term::Var(var.clone()) {
                    return self.fail(
                        path,
                        format!(
                            "the new belief must report the exact p-value `= {var}`, \
                             found `{} {eps}`",
                            rel_text(*rel)
                        ),
                    );
                }
                let expected_body = match n.rule {
                    RuleId::TwoHt => atomic.alt(),
                    RuleId::LowHt => atomic.phi_l(),
                    _ => atomic.phi_u(),
                };
                self.require_equal(path, "belief hypothesis", body, &expected_body)
            }
            RuleId::MultOr | RuleId::MultAnd => {
                let Some(Formula::Belief {
                    rel: r1,
                    eps: e1,
                    data: d1,
                    test: t1,
                    body: b1,
                }) = old_belief
                else {
                    unreachable!()
                };
                if !matches!(r1, RelOp::Eq | RelOp::Le) {
                    return self.fail(
                        path,
                        "the previous belief must carry an exact or upper p-value bound",
                    );
                }
                let phi1_alt = self.lift(path, alt_formula(self.decls, t1))?;
                if !self.equal(path, b1, &phi1_alt)? {
                    return self.fail(
                        path,
                        "the previous belief must be in its test's alternative hypothesis",
                    );
                }
                let (want_data, want_test) = (
                    Dataset::Tuple(vec![d1.clone(), call_data.clone()]),
                    match n.rule {
                        RuleId::MultOr => TestRef::Or(
                            Box::new(t1.clone()),
                            Box::new(test.clone()),
                        ),
                        _ => TestRef::And(Box::new(t1.clone()), Box::new(test.clone())),
                    },
                );
                if *data != want_data || *btest != want_test {
                    return self.fail(
                        path,
                        format!(
                            "the combined belief must be about `{want_data}` under `{want_test}`"
                        ),
                    );
                }
                let want_eps = match n.rule {
                    RuleId::MultOr => Term::App(
                        crate::syntax::FuncSym::Add,
                        vec![e1.clone(), Term::Var(var.clone())],
                    ),
                    _ => Term::App(
                        crate::syntax::FuncSym::Min,
                        vec![e1.clone(), Term::Var(var.clone())],
                    ),
                };
                if *rel != RelOp::Le || normalize_term(eps) != normalize_term(&want_eps) {
                    return self.fail(
                        path,
                        format!(
                            "the combined belief must carry the bound `<= {want_eps}`, \
                             found `{} {eps}`",
                            rel_text(*rel)
                        ),
                    );
                }
                let phi2 = atomic.alt();
                let expected_body = match n.rule {
                    RuleId::MultOr => Formula::or((**b1).clone(), phi2),
                    _ => Formula::and((**b1).clone(), phi2),
                };
                self.require_equal(path, "combined hypothesis", body, &expected_body)
            }
            _ => unreachable!(),
        }
    }

    fn meaningfulness(
        &self,
        path: &str,
        n: &ProofNode,
        psi: &Formula,
        call_data: &Dataset,
        test: &TestRef,
        new_belief: &Formula,
    ) -> Result<Formula, Fail> {
        let compds = self.lift(path, compds_formula(self.decls, call_data, test))?;
        let consequent = match n.rule {
            RuleId::MultOr | RuleId::MultAnd => {
                let Formula::Belief { body, .. } = new_belief else { unreachable!() };
                Formula::and(compds, Formula::possibly((**body).clone()))
            }
            _ => {
                let TestRef::Atomic(id) = test else { unreachable!() };
                let decl = self.decls.test(id).expect("checked by caller");
                let (pl, pu) = (
                    Formula::possibly(decl.phi_l()),
                    Formula::possibly(decl.phi_u()),
                );
                let tails = match n.rule {
                    RuleId::TwoHt => Formula::and(pl, pu),
                    RuleId::LowHt => Formula::and(pl, Formula::not(pu)),
                    _ => Formula::and(Formula::not(pl), pu),
                };
                Formula::and(compds, tails)
            }
        };
        Ok(Formula::implies(psi.clone(), consequent))
    }

    /// Multiset difference of conjunct lists modulo formula equivalence:
    /// (pre-only, post-only, shared-in-pre-order).
    fn conjunct_diff(
        &self,
        path: &str,
        pre: &[Formula],
        post: &[Formula],
    ) -> Result<(Vec<Formula>, Vec<Formula>, Vec<Formula>), Fail> {
        let mut used = vec![false; post.len()];
        let mut removed = Vec::new();
        let mut kept = Vec::new();
        for f in pre {
            let mut matched = false;
            for (i, g) in post.iter().enumerate() {
                if !used[i] && self.equal(path, f, g)? {
                    used[i] = true;
                    matched = true;
                    break;
                }
            }
            if matched {
                kept.push(f.clone());
            } else {
                removed.push(f.clone());
            }
        }
        let added = post
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(g, _)| g.clone())
            .collect();
        Ok((removed, added, kept))
    }
}

fn rel_text(r: RelOp) -> &'static str {
    match r {
        RelOp::Eq => "=",
        RelOp::Lt => "<",
        RelOp::Le => "<=",
        RelOp::Gt => ">",
        RelOp::Ge => ">=",
    }
}

fn flatten_and(f: &Formula) -> Vec<Formula> {
    match f {
        Formula::And(a, b) => {
            let mut v = flatten_and(a);
            v.extend(flatten_and(b));
            v
        }
        _ => vec![f.clone()],
    }
}

/// Recognize a history-counter equation `hist(d; t) == k` (after
/// normalization).
fn hist_eq(f: &Formula) -> Option<(Dataset, TestRef, i64)> {
    match crate::syntax::normalize::normalize_formula(f) {
        Formula::Cmp(CmpOp::Eq, Term::Hist(d, t), Term::Int(k)) => Some((d, t, k)),
        _ => None,
    }
}

/// Validity of a formula over a finite model, skipping worlds where the
/// formula reads an undefined value (those are outside its domain). Returns
/// `Some(description)` for a counterexample.
fn scenario_valid(model: &Model, f: &Formula) -> Result<Option<String>, String> {
    let fv = free_vars(&model.decls, f).map_err(|e| e.to_string())?;
    let ivars: Vec<Name> = fv.intvars.iter().cloned().collect();
    let mut env = IntEnv::new();
    scenario_valid_rec(model, f, &ivars, &mut env)
}

fn scenario_valid_rec(
    model: &Model,
    f: &Formula,
    ivars: &[Name],
    env: &mut IntEnv,
) -> Result<Option<String>, String> {
    match ivars.split_first() {
        None => {
            for w in 0..model.worlds.len() {
                match model.satisfies(w, env, f) {
                    Ok(true) => {}
                    Ok(false) => {
                        return Ok(Some(format!("fails at world {w} under {env:?}")));
                    }
                    Err(KripkeError::Sem(SemError::Bottom { .. })) => {}
                    Err(e) => return Err(e.to_string()),
                }
            }
            Ok(None)
        }
        Some((i, rest)) => {
            for k in 0..=model.int_bound as i64 {
                env.insert(i.clone(), k);
                if let Some(cex) = scenario_valid_rec(model, f, rest, env)? {
                    return Ok(Some(cex));
                }
            }
            env.remove(i);
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests;
