//! Discharge of validity obligations by schema instantiation.
//!
//! An obligation `⊨ φ` is checked propositionally: every maximal
//! non-propositional subformula (comparison, sampling predicate, likeliness
//! predicate, knowledge/belief modality, bounded quantifier) is treated as an
//! atom, a set of valid hypothesis instances is generated from the atoms that
//! actually occur, and `hypotheses → φ` is decided by truth-tabling. This is
//! sound but deliberately incomplete; anything deeper goes to the finite
//! model route or is recorded as an assumption.
//!
//! Hypothesis families (all instances are validities of the assertion logic):
//! - ground and pairwise arithmetic facts over comparison atoms;
//! - monotonicity of the likeliness predicate in its threshold;
//! - a sampling record implies the corresponding population record;
//! - knowledge monotonicity: `K φ → K ψ` whenever `φ` propositionally
//!   entails `ψ` (covers "knowledge is also belief" and threshold widening
//!   of beliefs);
//! - epistemic introspection: `A ↔ K A` and `¬A ↔ K ¬A` for epistemic `A`;
//! - test histories are common knowledge: `K κ ↔ κ` and `K ¬κ ↔ ¬κ`;
//! - a freshly recorded exact history justifies the statistical belief in a
//!   test's alternative hypothesis at its reported p-value (single test:
//!   exact bound; disjunctive combination: sum bound; conjunctive
//!   combination: min bound);
//! - reporting an exact p-value above a threshold refutes the belief at
//!   that threshold: `(K^{=e} φ ∧ ¬(e ≤ c)) → ¬K^{≤c} φ`.

use std::collections::BTreeMap;

use crate::syntax::normalize::{normalize_formula, normalize_term, normalized};
use crate::syntax::sugar::{alt_formula, kappa_formula, list_tests};
use crate::syntax::{
    CmpOp, Dataset, Decls, Formula, FuncSym, RelOp, SynError, Term, TestRef,
};

/// Recognized schema names for the `schema(...)` discharge directive.
pub const SCHEMAS: &[&str] = &[
    "taut", "sbk", "sb4", "sb5", "sb_lt", "bhk", "bht", "bht_or", "bht_and", "prop1",
];

pub fn known_schema(name: &str) -> bool {
    SCHEMAS.contains(&name)
}

const MAX_ATOMS: usize = 20;

#[derive(Clone, Debug)]
pub enum SchemaResult {
    Entailed,
    NotEntailed(String),
}

/// Try to discharge `⊨ goal` under the named schema. The name selects how the
/// obligation is reported; the generated hypothesis set is the full library,
/// so a discharge never depends on naming the minimal family.
pub fn by_schema(decls: &Decls, name: &str, goal: &Formula) -> Result<SchemaResult, SynError> {
    if !known_schema(name) {
        return Ok(SchemaResult::NotEntailed(format!(
            "unknown schema `{name}` (expected one of {})",
            SCHEMAS.join(", ")
        )));
    }
    entails(decls, goal, 1)
}

// ---------------------------------------------------------------------------
// atom table
// ---------------------------------------------------------------------------

struct Atoms<'a> {
    decls: &'a Decls,
    list: Vec<Formula>,
    keys: BTreeMap<String, usize>,
}

impl<'a> Atoms<'a> {
    fn new(decls: &'a Decls) -> Self {
        Atoms { decls, list: Vec::new(), keys: BTreeMap::new() }
    }

    fn key(&self, f: &Formula) -> Result<String, SynError> {
        Ok(normalized(self.decls, f)?.to_string())
    }

    fn intern(&mut self, f: &Formula) -> Result<usize, SynError> {
        let k = self.key(f)?;
        if let Some(&i) = self.keys.get(&k) {
            return Ok(i);
        }
        let i = self.list.len();
        self.list.push(f.clone());
        self.keys.insert(k, i);
        Ok(i)
    }

    /// Intern every maximal non-propositional subformula of `f`.
    fn collect(&mut self, f: &Formula) -> Result<(), SynError> {
        match f {
            Formula::Bool(_) => Ok(()),
            Formula::Not(a) => self.collect(a),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                self.collect(a)?;
                self.collect(b)
            }
            atom => self.intern(atom).map(|_| ()),
        }
    }

    fn eval(&self, f: &Formula, assign: &[bool]) -> Result<bool, SynError> {
        Ok(match f {
            Formula::Bool(b) => *b,
            Formula::Not(a) => !self.eval(a, assign)?,
            Formula::And(a, b) => self.eval(a, assign)? && self.eval(b, assign)?,
            Formula::Or(a, b) => self.eval(a, assign)? || self.eval(b, assign)?,
            Formula::Implies(a, b) => !self.eval(a, assign)? || self.eval(b, assign)?,
            atom => {
                let k = self.key(atom)?;
                match self.keys.get(&k) {
                    Some(&i) => assign[i],
                    None => {
                        return Err(SynError::Type {
                            msg: format!("internal: unregistered atom `{atom}`"),
                        })
                    }
                }
            }
        })
    }
}

// ---------------------------------------------------------------------------
// entailment
// ---------------------------------------------------------------------------

/// Decide `hypotheses(atoms of goal) → goal` by truth-tabling. `depth > 0`
/// enables the modal hypothesis families; inner entailment checks (used to
/// justify knowledge monotonicity) run at depth 0.
fn entails(decls: &Decls, goal: &Formula, depth: u32) -> Result<SchemaResult, SynError> {
    let mut at = Atoms::new(decls);
    at.collect(goal)?;
    let mut hyps: Vec<Formula> = Vec::new();
    if depth > 0 {
        hyps.extend(epistemic_hyps(&at)?);
        hyps.extend(belief_hyps(&mut at)?);
    }
    for h in hyps.clone() {
        at.collect(&h)?;
    }
    // ground/pairwise facts over the final atom set (hypotheses may have
    // introduced new comparison or likeliness atoms)
    hyps.extend(base_hyps(&at)?);
    if at.list.len() > MAX_ATOMS {
        return Ok(SchemaResult::NotEntailed(format!(
            "{} distinct atoms exceed the propositional limit of {MAX_ATOMS}",
            at.list.len()
        )));
    }
    let n = at.list.len();
    let mut assign = vec![false; n];
    for mask in 0u32..(1u32 << n) {
        for (i, a) in assign.iter_mut().enumerate() {
            *a = mask & (1 << i) != 0;
        }
        let mut all = true;
        for h in &hyps {
            if !at.eval(h, &assign)? {
                all = false;
                break;
            }
        }
        if all && !at.eval(goal, &assign)? {
            let mut desc: Vec<String> = Vec::new();
            for (i, a) in at.list.iter().enumerate() {
                desc.push(format!("{a} := {}", if assign[i] { "true" } else { "false" }));
            }
            return Ok(SchemaResult::NotEntailed(format!(
                "not entailed by the schema instances; failing valuation: {}",
                desc.join(", ")
            )));
        }
    }
    Ok(SchemaResult::Entailed)
}

/// Inner propositional entailment `a ⊨ b` used to justify `K a → K b`.
fn inner_entails(decls: &Decls, a: &Formula, b: &Formula) -> Result<bool, SynError> {
    let goal = Formula::implies(a.clone(), b.clone());
    // the inner formulas are already expanded; guard against blow-up
    let mut probe = Atoms::new(decls);
    probe.collect(&goal)?;
    if probe.list.len() > 16 {
        return Ok(false);
    }
    Ok(matches!(entails(decls, &goal, 0)?, SchemaResult::Entailed))
}

// ---------------------------------------------------------------------------
// hypothesis generators
// ---------------------------------------------------------------------------

fn ground(t: &Term) -> Option<f64> {
    match normalize_term(t) {
        Term::Int(n) => Some(n as f64),
        Term::Real(x) => Some(x),
        _ => None,
    }
}

fn term_key(t: &Term) -> String {
    normalize_term(t).to_string()
}

/// Arithmetic facts over comparison atoms, likeliness monotonicity, and
/// sampling-implies-population records.
fn base_hyps(at: &Atoms) -> Result<Vec<Formula>, SynError> {
    let mut hyps = Vec::new();
    let atoms = &at.list;
    for f in atoms {
        if let Formula::Cmp(op, a, b) = f {
            if let (Some(x), Some(y)) = (ground(a), ground(b)) {
                let truth = match op {
                    CmpOp::Eq => crate::util::real_eq(x, y),
                    CmpOp::Lt => crate::util::real_lt(x, y),
                    CmpOp::Le => crate::util::real_le(x, y),
                };
                hyps.push(if truth { f.clone() } else { Formula::not(f.clone()) });
            }
        }
    }
    for (i, f) in atoms.iter().enumerate() {
        let Formula::Cmp(op1, a1, b1) = f else { continue };
        for (j, g) in atoms.iter().enumerate() {
            if i == j {
                continue;
            }
            let Formula::Cmp(op2, a2, b2) = g else { continue };
            let same = term_key(a1) == term_key(a2) && term_key(b1) == term_key(b2);
            let flipped = term_key(a1) == term_key(b2) && term_key(b1) == term_key(a2);
            if same {
                match (op1, op2) {
                    // strict below implies non-strict, equality implies non-strict
                    (CmpOp::Lt, CmpOp::Le) | (CmpOp::Eq, CmpOp::Le) => {
                        hyps.push(Formula::implies(f.clone(), g.clone()))
                    }
                    (CmpOp::Lt, CmpOp::Eq) => {
                        hyps.push(Formula::implies(f.clone(), Formula::not(g.clone())))
                    }
                    // the same term equals two different constants: contradiction
                    (CmpOp::Eq, CmpOp::Eq) => {
                        if let (Some(x), Some(y)) = (ground(b1), ground(b2)) {
                            if !crate::util::real_eq(x, y) {
                                hyps.push(Formula::not(Formula::and(f.clone(), g.clone())));
                            }
                        }
                    }
                    _ => {}
                }
            } else if flipped {
                match (op1, op2) {
                    (CmpOp::Lt, CmpOp::Lt)
                    | (CmpOp::Lt, CmpOp::Le)
                    | (CmpOp::Eq, CmpOp::Lt) => {
                        hyps.push(Formula::implies(f.clone(), Formula::not(g.clone())))
                    }
                    (CmpOp::Eq, CmpOp::Eq) | (CmpOp::Eq, CmpOp::Le) => {
                        hyps.push(Formula::implies(f.clone(), g.clone()))
                    }
                    _ => {}
                }
            }
        }
    }
    // likeliness-threshold monotonicity
    for (i, f) in atoms.iter().enumerate() {
        let Formula::Unlikely { rel: r1, eps: e1, data: d1, test: t1 } = f else { continue };
        for (j, g) in atoms.iter().enumerate() {
            if i == j {
                continue;
            }
            let Formula::Unlikely { rel: r2, eps: e2, data: d2, test: t2 } = g else { continue };
            if d1 != d2 || t1 != t2 {
                continue;
            }
            if unlikely_implies(*r1, e1, *r2, e2) {
                hyps.push(Formula::implies(f.clone(), g.clone()));
            }
        }
    }
    // sampling record implies population record
    for f in atoms {
        let Formula::Sampled(y, d, _) = f else { continue };
        for g in atoms {
            let Formula::Followed(y2, d2) = g else { continue };
            if term_key(y) == term_key(y2) && term_key(d) == term_key(d2) {
                hyps.push(Formula::implies(f.clone(), g.clone()));
            }
        }
    }
    Ok(hyps)
}

/// Is `{p : p rel1 e1} ⊆ {p : p rel2 e2}` certain from the threshold terms?
fn unlikely_implies(r1: RelOp, e1: &Term, r2: RelOp, e2: &Term) -> bool {
    let same_eps = term_key(e1) == term_key(e2);
    if same_eps {
        return matches!(
            (r1, r2),
            (RelOp::Eq, RelOp::Le) | (RelOp::Lt, RelOp::Le) | (RelOp::Lt, RelOp::Lt)
        ) || r1 == r2;
    }
    if let (Some(x), Some(y)) = (ground(e1), ground(e2)) {
        return match (r1, r2) {
            (RelOp::Eq | RelOp::Le | RelOp::Lt, RelOp::Le) => crate::util::real_le(x, y),
            (RelOp::Eq | RelOp::Le, RelOp::Lt) => crate::util::real_lt(x, y),
            (RelOp::Lt, RelOp::Lt) => crate::util::real_le(x, y),
            (RelOp::Eq | RelOp::Ge | RelOp::Gt, RelOp::Ge) => crate::util::real_le(y, x),
            _ => false,
        };
    }
    false
}

/// Knowledge monotonicity, introspection, and common knowledge of test
/// histories, generated over the epistemic atoms present.
fn epistemic_hyps(at: &Atoms) -> Result<Vec<Formula>, SynError> {
    let decls = at.decls;
    let mut hyps = Vec::new();
    // (index, expanded body under K)
    let mut knows: Vec<(usize, Formula)> = Vec::new();
    for (i, f) in at.list.iter().enumerate() {
        if let Formula::Know(inner) = normalized(decls, f)? {
            knows.push((i, *inner));
        }
    }
    for &(i, ref bi) in &knows {
        for &(j, ref bj) in &knows {
            if i == j {
                continue;
            }
            let (fi, fj) = (&at.list[i], &at.list[j]);
            // K-monotonicity: body entailment lifts through K
            if inner_entails(decls, bi, bj)? {
                hyps.push(Formula::implies(fi.clone(), fj.clone()));
            }
            // introspection: K A ↔ A and K ¬A ↔ ¬A for epistemic A
            let exp_i = normalized(decls, fi)?;
            if *bj == exp_i {
                hyps.push(iff(fi.clone(), fj.clone()));
            }
            if *bj == normalize_formula(&Formula::not(exp_i)) {
                hyps.push(iff(Formula::not(fi.clone()), fj.clone()));
            }
        }
        // histories are part of every observation: K κ ↔ κ, K ¬κ ↔ ¬κ
        if let Some(kappa) = history_shape(bi) {
            hyps.push(iff(at.list[i].clone(), kappa));
        } else if let Formula::Not(neg) = bi {
            if let Some(kappa) = history_shape(neg) {
                hyps.push(iff(at.list[i].clone(), Formula::not(kappa)));
            }
        }
    }
    Ok(hyps)
}

fn iff(a: Formula, b: Formula) -> Formula {
    Formula::and(
        Formula::implies(a.clone(), b.clone()),
        Formula::implies(b, a),
    )
}

/// Is the formula a conjunction of history-counter equations? Returns it
/// unchanged if so (its conjuncts become atoms of the outer table).
fn history_shape(f: &Formula) -> Option<Formula> {
    fn all_hist_eqs(f: &Formula) -> bool {
        match f {
            Formula::And(a, b) => all_hist_eqs(a) && all_hist_eqs(b),
            Formula::Cmp(CmpOp::Eq, Term::Hist(..), Term::Int(_)) => true,
            _ => false,
        }
    }
    all_hist_eqs(f).then(|| f.clone())
}

/// Hypotheses about statistical-belief atoms: a fresh exact history justifies
/// the belief in a test's alternative at its reported bound, and an exact
/// p-value report above a threshold refutes the belief at that threshold.
fn belief_hyps(at: &mut Atoms) -> Result<Vec<Formula>, SynError> {
    let decls = at.decls;
    let mut hyps = Vec::new();
    let beliefs: Vec<Formula> = at
        .list
        .iter()
        .filter(|f| matches!(f, Formula::Belief { .. }))
        .cloned()
        .collect();
    for f in &beliefs {
        let Formula::Belief { rel, eps, data, test, body } = f else { unreachable!() };
        // belief in the declared alternative at the canonical p-value bound,
        // from the exact history of the involved tests
        if let Some(expected) = canonical_bound(decls, data, test)? {
            let rel_ok = match test {
                TestRef::Atomic(_) => *rel == RelOp::Eq || *rel == RelOp::Le,
                _ => *rel == RelOp::Le,
            };
            let alt = alt_formula(decls, test)?;
            if rel_ok
                && term_key(eps) == term_key(&expected)
                && crate::syntax::normalize::formulas_equiv(decls, body, &alt)?
            {
                let kappa = kappa_formula(decls, &list_tests(data, test)?)?;
                at.collect(&kappa)?;
                hyps.push(Formula::implies(kappa, f.clone()));
            }
        }
        // contrapositive refutation across thresholds
        if *rel != RelOp::Eq {
            continue;
        }
        for g in &beliefs {
            let Formula::Belief { rel: r2, eps: e2, data: d2, test: t2, body: b2 } = g else {
                unreachable!()
            };
            if !matches!(r2, RelOp::Le | RelOp::Lt)
                || d2 != data
                || t2 != test
                || !crate::syntax::normalize::formulas_equiv(decls, body, b2)?
            {
                continue;
            }
            // find a comparison atom relating the two thresholds
            for c in &at.list {
                let Formula::Cmp(op, a, b) = c else { continue };
                let above = match op {
                    // ¬(eps ≤ e2): the reported value exceeds the threshold
                    CmpOp::Le | CmpOp::Lt
                        if term_key(a) == term_key(eps) && term_key(b) == term_key(e2) =>
                    {
                        Some(Formula::not(c.clone()))
                    }
                    // e2 < eps directly
                    CmpOp::Lt if term_key(a) == term_key(e2) && term_key(b) == term_key(eps) => {
                        Some(c.clone())
                    }
                    _ => None,
                };
                if let Some(above) = above {
                    hyps.push(Formula::implies(
                        Formula::and(f.clone(), above),
                        Formula::not(g.clone()),
                    ));
                }
            }
        }
    }
    Ok(hyps)
}

/// The canonical p-value bound a combined test reports: the procedure's
/// output for an atomic test, the sum for a disjunctive combination, the min
/// for a conjunctive combination. `None` when the dataset shape mismatches.
fn canonical_bound(
    decls: &Decls,
    data: &Dataset,
    test: &TestRef,
) -> Result<Option<Term>, SynError> {
    match test {
        TestRef::Atomic(id) => {
            if decls.test(id).is_none() {
                return Err(SynError::UnknownTest { id: id.clone() });
            }
            let args: Vec<Term> = data
                .vars()
                .iter()
                .map(|v| Term::Var(v.to_string()))
                .collect();
            Ok(Some(Term::App(FuncSym::PValue(test.clone()), args)))
        }
        TestRef::Or(t1, t2) | TestRef::And(t1, t2) => {
            let Dataset::Tuple(ds) = data else { return Ok(None) };
            if ds.len() != 2 {
                return Ok(None);
            }
            let (Some(a), Some(b)) = (
                canonical_bound(decls, &ds[0], t1)?,
                canonical_bound(decls, &ds[1], t2)?,
            ) else {
                return Ok(None);
            };
            let sym = if matches!(test, TestRef::Or(..)) { FuncSym::Add } else { FuncSym::Min };
            Ok(Some(Term::App(sym, vec![a, b])))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse_formula_text;
    use crate::syntax::test_decls;

    fn check(name: &str, src: &str) -> SchemaResult {
        let decls = test_decls();
        let f = parse_formula_text(src, &decls).unwrap();
        by_schema(&decls, name, &f).unwrap()
    }

    fn entailed(name: &str, src: &str) -> bool {
        matches!(check(name, src), SchemaResult::Entailed)
    }

    #[test]
    fn propositional_tautologies() {
        assert!(entailed("taut", "a12 <= 0.05 || !(a12 <= 0.05)"));
        assert!(entailed("taut", "(mu1 < mu2 && mu2 < mu1) -> mu1 == mu2"));
        assert!(!entailed("taut", "a12 <= 0.05"));
    }

    #[test]
    fn ground_and_pairwise_arithmetic() {
        assert!(entailed("taut", "0.03 <= 0.05"));
        assert!(entailed("taut", "mu1 < mu2 -> mu1 <= mu2"));
        assert!(entailed("taut", "mu1 < mu2 -> !(mu2 < mu1)"));
        assert!(entailed("taut", "mu1 == mu2 -> !(mu1 < mu2)"));
        assert!(!entailed("taut", "mu1 <= mu2 -> mu1 < mu2"));
    }

    #[test]
    fn knowledge_is_belief() {
        assert!(entailed(
            "sbk",
            "K !(mu1 == mu2) -> Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2))"
        ));
        assert!(!entailed(
            "sbk",
            "Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2)) -> K !(mu1 == mu2)"
        ));
    }

    #[test]
    fn belief_threshold_monotonicity() {
        assert!(entailed(
            "sb_lt",
            "Belief[<= 0.01; (y1, y2); za12] (!(mu1 == mu2)) -> \
             Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2))"
        ));
        assert!(entailed(
            "sb_lt",
            "Belief[= a12; (y1, y2); za12] (!(mu1 == mu2)) -> \
             Belief[<= a12; (y1, y2); za12] (!(mu1 == mu2))"
        ));
        assert!(!entailed(
            "sb_lt",
            "Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2)) -> \
             Belief[<= 0.01; (y1, y2); za12] (!(mu1 == mu2))"
        ));
    }

    #[test]
    fn exact_report_above_threshold_refutes_belief() {
        assert!(entailed(
            "sb_lt",
            "(Belief[= a12; (y1, y2); za12] (!(mu1 == mu2)) && !(a12 <= 0.05)) -> \
             !(Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2)))"
        ));
    }

    #[test]
    fn belief_introspection() {
        assert!(entailed(
            "sb4",
            "Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2)) -> \
             K Belief[<= 0.05; (y1, y2); za12] (!(mu1 == mu2))"
        ));
    }

    #[test]
    fn histories_are_common_knowledge() {
        assert!(entailed("bhk", "kappa{ (y1, y2): za12 } -> K kappa{ (y1, y2): za12 }"));
        assert!(entailed("bhk", "K kappa{} -> kappa{}"));
        // possibility of a history implies the history
        assert!(entailed("bhk", "P kappa{ (y1, y2): za12 } -> kappa{ (y1, y2): za12 }"));
    }

    #[test]
    fn exact_history_justifies_belief_in_alternative() {
        assert!(entailed(
            "bht",
            "kappa{ (y1, y2): za12 } -> \
             Belief[= za12(y1, y2); (y1, y2); za12] (alt(za12))"
        ));
        // wrong hypothesis formula: no instance applies
        assert!(!entailed(
            "bht",
            "kappa{ (y1, y2): za12 } -> \
             Belief[= za12(y1, y2); (y1, y2); za12] (mu1 < mu2)"
        ));
    }

    #[test]
    fn combined_histories_and_bounds() {
        assert!(entailed(
            "bht_or",
            "kappa{ (y1, y2): za12, (y1, y3): za13 } -> \
             Belief[<= za12(y1, y2) + za13(y1, y3); ((y1, y2), (y1, y3)); or(za12, za13)] \
               (alt(za12) || alt(za13))"
        ));
        assert!(entailed(
            "bht_and",
            "kappa{ (y1, y2): za12, (y1, y3): za13 } -> \
             Belief[<= min(za12(y1, y2), za13(y1, y3)); ((y1, y2), (y1, y3)); and(za12, za13)] \
               (alt(za12) && alt(za13))"
        ));
    }

    #[test]
    fn tail_exclusivity_lifts_through_knowledge() {
        // knowing one tail impossible is knowing the complementary region
        assert!(entailed(
            "prop1",
            "K !(mu1 < mu2) -> K (mu2 < mu1 || (!(mu2 < mu1) && !(mu1 < mu2)))"
        ));
    }

    #[test]
    fn unknown_schema_is_reported() {
        assert!(matches!(
            check("nonsense", "a12 <= 0.05 || !(a12 <= 0.05)"),
            SchemaResult::NotEntailed(msg) if msg.contains("unknown schema")
        ));
    }
}
