//! Values, memories, test histories, possible worlds, and the small-step
//! interpreter.
//!
//! A world is a non-empty sequence of states; each non-initial state's action
//! explains the transition from its predecessor. Sampling actions only occur
//! as world prefixes supplied by scenarios; program execution appends one
//! state per skip/assignment/test call and none for guard evaluations.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::stats::{self, StatsError};
use crate::syntax::{
    CmpOp, Dataset, Decls, DistSpec, Formula, FuncSym, Name, Program, Term, TestKind, TestRef,
};
use crate::util::{real_eq, real_le, real_lt};

#[derive(Debug, Error, PartialEq)]
pub enum SemError {
    #[error("read of undefined value: {what}")]
    Bottom { what: String },
    #[error("type mismatch: {msg}")]
    Mismatch { msg: String },
    #[error("division by zero")]
    DivZero,
    #[error("unknown test `{id}`")]
    UnknownTest { id: String },
    #[error("unbound integer variable `{name}`")]
    UnboundIntVar { name: String },
    #[error("model({id}, {value}) is not a hypothesis value of the test")]
    NoModelPoint { id: String, value: f64 },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

// ---------------------------------------------------------------------------
// values
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Pair(Box<Value>, Box<Value>),
    List(Vec<Value>),
    Dist(DistSpec),
    Undef,
}

impl Value {
    fn tag(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int(_) => 1,
            Value::Real(_) => 2,
            Value::Pair(..) => 3,
            Value::List(_) => 4,
            Value::Dist(_) => 5,
            Value::Undef => 6,
        }
    }

    pub fn real_list(xs: &[f64]) -> Value {
        Value::List(xs.iter().map(|&x| Value::Real(x)).collect())
    }

    pub fn as_bool(&self) -> Result<bool, SemError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(SemError::Mismatch {
                msg: format!("expected bool, found {other:?}"),
            }),
        }
    }

    /// Numeric view: Int widens to Real.
    pub fn as_real(&self) -> Result<f64, SemError> {
        match self {
            Value::Real(x) => Ok(*x),
            Value::Int(n) => Ok(*n as f64),
            Value::Undef => Err(SemError::Bottom {
                what: "numeric value".into(),
            }),
            other => Err(SemError::Mismatch {
                msg: format!("expected number, found {other:?}"),
            }),
        }
    }

    pub fn as_real_list(&self) -> Result<Vec<f64>, SemError> {
        match self {
            Value::List(vs) => vs.iter().map(Value::as_real).collect(),
            Value::Undef => Err(SemError::Bottom {
                what: "dataset value".into(),
            }),
            other => Err(SemError::Mismatch {
                msg: format!("expected real list, found {other:?}"),
            }),
        }
    }

    pub fn as_dist(&self) -> Result<DistSpec, SemError> {
        match self {
            Value::Dist(d) => Ok(*d),
            other => Err(SemError::Mismatch {
                msg: format!("expected distribution, found {other:?}"),
            }),
        }
    }

    /// Tolerant structural equality: reals compare within the shared 1e-9
    /// tolerance, everything else exactly. Int and Real cross-compare as
    /// numbers.
    pub fn approx_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(_) | Value::Int(_), Value::Real(_) | Value::Int(_)) => {
                real_eq(self.as_real().unwrap(), other.as_real().unwrap())
            }
            (Value::Pair(a1, a2), Value::Pair(b1, b2)) => {
                a1.approx_eq(b1) && a2.approx_eq(b2)
            }
            (Value::List(xs), Value::List(ys)) => {
                xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x.approx_eq(y))
            }
            (Value::Dist(a), Value::Dist(b)) => match (a, b) {
                (
                    DistSpec::Normal { mu: m1, var: v1 },
                    DistSpec::Normal { mu: m2, var: v2 },
                ) => real_eq(*m1, *m2) && real_eq(*v1, *v2),
            },
            (Value::Undef, Value::Undef) => true,
            _ => false,
        }
    }
}

// Exact (bitwise for reals) equality and ordering so values can key the
// test-history map.
impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Value {}
impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Value {
    fn cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Pair(a1, a2), Value::Pair(b1, b2)) => {
                a1.cmp(b1).then_with(|| a2.cmp(b2))
            }
            (Value::List(a), Value::List(b)) => a.cmp(b),
            (Value::Dist(DistSpec::Normal { mu: m1, var: v1 }),
             Value::Dist(DistSpec::Normal { mu: m2, var: v2 })) => {
                m1.total_cmp(m2).then_with(|| v1.total_cmp(v2))
            }
            (Value::Undef, Value::Undef) => Ordering::Equal,
            _ => self.tag().cmp(&other.tag()),
        }
    }
}

// ---------------------------------------------------------------------------
// memories, histories, states, worlds
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MemKey {
    Var(Name),
    Hist(Dataset, TestRef),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Memory(pub BTreeMap<MemKey, Value>);

impl Memory {
    pub fn get_var(&self, v: &str) -> Option<&Value> {
        self.0.get(&MemKey::Var(v.to_string()))
    }

    pub fn set_var(&mut self, v: &str, val: Value) {
        self.0.insert(MemKey::Var(v.to_string()), val);
    }

    /// History counters default to zero.
    pub fn hist_count(&self, d: &Dataset, t: &TestRef) -> i64 {
        match self.0.get(&MemKey::Hist(d.clone(), t.clone())) {
            Some(Value::Int(n)) => *n,
            _ => 0,
        }
    }

    pub fn bump_hist(&mut self, d: &Dataset, t: &TestRef) {
        let n = self.hist_count(d, t);
        self.0
            .insert(MemKey::Hist(d.clone(), t.clone()), Value::Int(n + 1));
    }
}

/// Multiset of executed tests keyed by the dataset *value* they ran on.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct History(pub BTreeMap<Value, BTreeMap<TestRef, u32>>);

impl History {
    pub fn add(&mut self, data: Value, test: TestRef) {
        *self
            .0
            .entry(data)
            .or_default()
            .entry(test)
            .or_default() += 1;
    }

    pub fn count(&self, data: &Value, test: &TestRef) -> u32 {
        self.0
            .get(data)
            .and_then(|m| m.get(test))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0
            .values()
            .flat_map(|m| m.values())
            .map(|&c| c as u64)
            .sum()
    }

    /// Does `other` contain every entry of `self` (pointwise ≤)?
    pub fn le(&self, other: &History) -> bool {
        self.0.iter().all(|(d, ts)| {
            ts.iter().all(|(t, &c)| other.count(d, t) >= c)
        })
    }
}

/// What produced a state: the world's seed, a sampling record, or a command.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Init,
    /// Dataset `value` was assigned to `var` by sampling `n` points from the
    /// population described by `dist` — a *term* (e.g. `normal(mu1, 1.0)`),
    /// kept syntactic so that observations do not leak invisible parameters.
    Sample {
        var: Name,
        value: Value,
        dist: Term,
        n: u32,
    },
    Cmd(Program),
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub mem: Memory,
    pub action: Action,
    pub hist: History,
}

/// A possible world: a non-empty sequence of states.
#[derive(Clone, Debug, PartialEq)]
pub struct World(pub Vec<State>);

impl World {
    pub fn initial(mem: Memory) -> World {
        World(vec![State {
            mem,
            action: Action::Init,
            hist: History::default(),
        }])
    }

    pub fn last(&self) -> &State {
        self.0.last().expect("worlds are non-empty")
    }

    pub fn push(&self, state: State) -> World {
        let mut w = self.clone();
        w.0.push(state);
        w
    }

    /// Append a sampling-record state (used by scenario construction).
    pub fn with_sample(&self, var: &str, value: Value, dist: Term, n: u32) -> World {
        let mut mem = self.last().mem.clone();
        mem.set_var(var, value.clone());
        self.push(State {
            mem,
            action: Action::Sample {
                var: var.to_string(),
                value,
                dist,
                n,
            },
            hist: self.last().hist.clone(),
        })
    }

    /// Is `self` a prefix of `other`?
    pub fn is_prefix_of(&self, other: &World) -> bool {
        self.0.len() <= other.0.len() && self.0[..] == other.0[..self.0.len()]
    }
}

// ---------------------------------------------------------------------------
// term evaluation
// ---------------------------------------------------------------------------

pub type IntEnv = BTreeMap<Name, i64>;

/// Evaluate a term in a memory; integer variables read from `ints`.
pub fn eval_term(
    decls: &Decls,
    mem: &Memory,
    ints: &IntEnv,
    t: &Term,
) -> Result<Value, SemError> {
    match t {
        Term::Var(v) => match mem.get_var(v) {
            Some(Value::Undef) | None => Err(SemError::Bottom { what: v.clone() }),
            Some(val) => Ok(val.clone()),
        },
        Term::IntVar(i) => ints
            .get(i)
            .map(|&n| Value::Int(n))
            .ok_or_else(|| SemError::UnboundIntVar { name: i.clone() }),
        Term::Hist(d, tr) => Ok(Value::Int(mem.hist_count(d, tr))),
        Term::Int(n) => Ok(Value::Int(*n)),
        Term::Real(x) => Ok(Value::Real(*x)),
        Term::App(sym, args) => {
            let vals: Vec<Value> = args
                .iter()
                .map(|a| eval_term(decls, mem, ints, a))
                .collect::<Result<_, _>>()?;
            apply(decls, sym, &vals)
        }
    }
}

fn apply(decls: &Decls, sym: &FuncSym, vals: &[Value]) -> Result<Value, SemError> {
    match sym {
        FuncSym::Add | FuncSym::Sub | FuncSym::Mul | FuncSym::Div => {
            // stay in Int when both sides are Int (except division)
            if let (Value::Int(a), Value::Int(b)) = (&vals[0], &vals[1]) {
                match sym {
                    FuncSym::Add => return Ok(Value::Int(a + b)),
                    FuncSym::Sub => return Ok(Value::Int(a - b)),
                    FuncSym::Mul => return Ok(Value::Int(a * b)),
                    _ => {}
                }
            }
            let (a, b) = (vals[0].as_real()?, vals[1].as_real()?);
            Ok(Value::Real(match sym {
                FuncSym::Add => a + b,
                FuncSym::Sub => a - b,
                FuncSym::Mul => a * b,
                _ => {
                    if b == 0.0 {
                        return Err(SemError::DivZero);
                    }
                    a / b
                }
            }))
        }
        FuncSym::Neg => Ok(match &vals[0] {
            Value::Int(n) => Value::Int(-n),
            v => Value::Real(-v.as_real()?),
        }),
        FuncSym::Min => {
            let (a, b) = (vals[0].as_real()?, vals[1].as_real()?);
            Ok(Value::Real(a.min(b)))
        }
        FuncSym::Mean => Ok(Value::Real(stats::mean(&vals[0].as_real_list()?)?)),
        FuncSym::Size => match &vals[0] {
            Value::List(xs) => Ok(Value::Int(xs.len() as i64)),
            other => Err(SemError::Mismatch {
                msg: format!("size of non-list {other:?}"),
            }),
        },
        FuncSym::Normal => {
            let (mu, var) = (vals[0].as_real()?, vals[1].as_real()?);
            Ok(Value::Dist(DistSpec::Normal { mu, var }))
        }
        FuncSym::PValue(tr) => {
            let test = stats::resolve(decls, tr)?;
            let data: Vec<Vec<f64>> = vals
                .iter()
                .map(Value::as_real_list)
                .collect::<Result<_, _>>()?;
            Ok(Value::Real(stats::p_value(&test, &data)?.value))
        }
        FuncSym::Model(id) => {
            let decl = decls
                .test(id)
                .ok_or_else(|| SemError::UnknownTest { id: id.clone() })?;
            let xi = vals[0].as_real()?;
            match &decl.kind {
                TestKind::Lrt {
                    null,
                    alt,
                    null_value,
                    alt_value,
                    ..
                } => {
                    if real_eq(xi, *null_value) {
                        Ok(Value::Dist(*null))
                    } else if real_eq(xi, *alt_value) {
                        Ok(Value::Dist(*alt))
                    } else {
                        Err(SemError::NoModelPoint {
                            id: id.clone(),
                            value: xi,
                        })
                    }
                }
                TestKind::Bayes { sigma2, .. } => Ok(Value::Dist(DistSpec::Normal {
                    mu: xi,
                    var: *sigma2,
                })),
                TestKind::Z { .. } => Err(SemError::Mismatch {
                    msg: format!("test {id} has no single-parameter model"),
                }),
            }
        }
    }
}

/// The dataset value a (tuple) dataset reference denotes in a memory: the
/// variable's value for a single variable, the list of component values for
/// a tuple.
pub fn dataset_value(mem: &Memory, d: &Dataset) -> Result<Value, SemError> {
    match d {
        Dataset::Var(v) => match mem.get_var(v) {
            Some(Value::Undef) | None => Err(SemError::Bottom { what: v.clone() }),
            Some(val) => Ok(val.clone()),
        },
        Dataset::Tuple(parts) => Ok(Value::List(
            parts
                .iter()
                .map(|p| dataset_value(mem, p))
                .collect::<Result<_, _>>()?,
        )),
    }
}

/// Evaluate a program guard (boolean combinations of comparisons).
pub fn eval_guard(decls: &Decls, mem: &Memory, g: &Formula) -> Result<bool, SemError> {
    let ints = IntEnv::new();
    match g {
        Formula::Bool(b) => Ok(*b),
        Formula::Cmp(op, a, b) => {
            let (va, vb) = (
                eval_term(decls, mem, &ints, a)?,
                eval_term(decls, mem, &ints, b)?,
            );
            eval_cmp(*op, &va, &vb)
        }
        Formula::Not(a) => Ok(!eval_guard(decls, mem, a)?),
        Formula::And(a, b) => Ok(eval_guard(decls, mem, a)? && eval_guard(decls, mem, b)?),
        Formula::Or(a, b) => Ok(eval_guard(decls, mem, a)? || eval_guard(decls, mem, b)?),
        Formula::Implies(a, b) => Ok(!eval_guard(decls, mem, a)? || eval_guard(decls, mem, b)?),
        other => Err(SemError::Mismatch {
            msg: format!("not a program guard: {other}"),
        }),
    }
}

/// Comparison with the shared real tolerance; exact on ints and structures.
pub fn eval_cmp(op: CmpOp, a: &Value, b: &Value) -> Result<bool, SemError> {
    match op {
        CmpOp::Eq => Ok(a.approx_eq(b)),
        CmpOp::Lt | CmpOp::Le => {
            if let (Value::Int(x), Value::Int(y)) = (a, b) {
                return Ok(if op == CmpOp::Lt { x < y } else { x <= y });
            }
            let (x, y) = (a.as_real()?, b.as_real()?);
            Ok(if op == CmpOp::Lt {
                real_lt(x, y)
            } else {
                real_le(x, y)
            })
        }
    }
}

// ---------------------------------------------------------------------------
// small-step interpreter
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Next {
    Continue(Program, World),
    Done(World),
}

/// One small step. Guard evaluations append no state; skip, assignment, and
/// test calls append exactly one.
pub fn step(decls: &Decls, c: &Program, w: &World) -> Result<Vec<Next>, SemError> {
    let ints = IntEnv::new();
    let cur = w.last();
    match c {
        Program::Skip => Ok(vec![Next::Done(w.push(State {
            mem: cur.mem.clone(),
            action: Action::Cmd(c.clone()),
            hist: cur.hist.clone(),
        }))]),
        Program::Assign(v, e) => {
            let val = eval_term(decls, &cur.mem, &ints, e)?;
            let mut mem = cur.mem.clone();
            mem.set_var(v, val);
            Ok(vec![Next::Done(w.push(State {
                mem,
                action: Action::Cmd(c.clone()),
                hist: cur.hist.clone(),
            }))])
        }
        Program::TestCall { var, test, args } => {
            let def = stats::resolve(decls, test)?;
            let data: Vec<Vec<f64>> = args
                .iter()
                .map(|a| {
                    eval_term(decls, &cur.mem, &ints, &Term::Var(a.clone()))?.as_real_list()
                })
                .collect::<Result<_, _>>()?;
            let p = stats::p_value(&def, &data)?;
            let dref = Dataset::from_vars(args);
            let dval = dataset_value(&cur.mem, &dref)?;
            let mut mem = cur.mem.clone();
            mem.set_var(var, Value::Real(p.value));
            mem.bump_hist(&dref, test);
            let mut hist = cur.hist.clone();
            hist.add(dval, test.clone());
            Ok(vec![Next::Done(w.push(State {
                mem,
                action: Action::Cmd(c.clone()),
                hist,
            }))])
        }
        Program::Seq(c1, c2) => Ok(step(decls, c1, w)?
            .into_iter()
            .map(|n| match n {
                Next::Continue(c1p, wp) => {
                    Next::Continue(Program::seq(c1p, (**c2).clone()), wp)
                }
                Next::Done(wp) => Next::Continue((**c2).clone(), wp),
            })
            .collect()),
        Program::Par(c1, c2) => {
            let mut out = Vec::new();
            for n in step(decls, c1, w)? {
                out.push(match n {
                    Next::Continue(c1p, wp) => {
                        Next::Continue(Program::par(c1p, (**c2).clone()), wp)
                    }
                    Next::Done(wp) => Next::Continue((**c2).clone(), wp),
                });
            }
            for n in step(decls, c2, w)? {
                out.push(match n {
                    Next::Continue(c2p, wp) => {
                        Next::Continue(Program::par((**c1).clone(), c2p), wp)
                    }
                    Next::Done(wp) => Next::Continue((**c1).clone(), wp),
                });
            }
            Ok(out)
        }
        Program::If(g, c1, c2) => {
            let b = eval_guard(decls, &cur.mem, g)?;
            Ok(vec![Next::Continue(
                if b { (**c1).clone() } else { (**c2).clone() },
                w.clone(),
            )])
        }
        Program::While { guard, body, .. } => {
            if eval_guard(decls, &cur.mem, guard)? {
                Ok(vec![Next::Continue(
                    Program::seq((**body).clone(), c.clone()),
                    w.clone(),
                )])
            } else {
                Ok(vec![Next::Done(w.clone())])
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub finals: Vec<World>,
    /// Some execution path was cut by the step budget.
    pub exhausted: bool,
    pub warnings: Vec<String>,
}

/// All terminal worlds reachable within the step budget (exhaustive
/// interleaving for `||`).
pub fn run(decls: &Decls, c: &Program, w: &World, budget: u64) -> Result<RunResult, SemError> {
    let mut frontier = vec![(c.clone(), w.clone())];
    let mut finals: Vec<World> = Vec::new();
    let mut steps = 0u64;
    let mut exhausted = false;
    while let Some((c, w)) = frontier.pop() {
        if steps >= budget {
            exhausted = true;
            break;
        }
        steps += 1;
        for n in step(decls, &c, &w)? {
            match n {
                Next::Continue(cp, wp) => frontier.push((cp, wp)),
                Next::Done(wf) => {
                    if !finals.contains(&wf) {
                        finals.push(wf);
                    }
                }
            }
        }
    }
    let mut warnings = Vec::new();
    for wf in &finals {
        warnings.extend(aliasing_warnings(decls, &wf.last().mem));
    }
    warnings.dedup();
    Ok(RunResult {
        finals,
        exhausted,
        warnings,
    })
}

/// Distinct declared pairs holding equal dataset values merge in the
/// value-keyed history while their per-variable counters stay separate;
/// flag that.
fn aliasing_warnings(decls: &Decls, mem: &Memory) -> Vec<String> {
    let mut out = Vec::new();
    for (i, (d1, _)) in decls.pairs.iter().enumerate() {
        for (d2, _) in decls.pairs.iter().skip(i + 1) {
            if d1 == d2 {
                continue;
            }
            if let (Ok(v1), Ok(v2)) = (dataset_value(mem, d1), dataset_value(mem, d2)) {
                if v1.approx_eq(&v2) {
                    out.push(format!(
                        "datasets {d1} and {d2} hold equal values; their value-keyed \
                         test-history entries coincide"
                    ));
                }
            }
        }
    }
    out
}

/// Replace every `||` by `;` (left first). Sound for the final memory and
/// history: all interleavings of interference-free components agree.
pub fn sequentialize(c: &Program) -> Program {
    match c {
        Program::Par(a, b) => Program::seq(sequentialize(a), sequentialize(b)),
        Program::Seq(a, b) => Program::seq(sequentialize(a), sequentialize(b)),
        Program::If(g, a, b) => Program::If(
            g.clone(),
            Box::new(sequentialize(a)),
            Box::new(sequentialize(b)),
        ),
        Program::While {
            guard,
            invariant,
            body,
        } => Program::While {
            guard: guard.clone(),
            invariant: invariant.clone(),
            body: Box::new(sequentialize(body)),
        },
        _ => c.clone(),
    }
}

/// Deterministic left-first execution; `None` finals means the budget was
/// exhausted before termination.
pub fn run_canonical(
    decls: &Decls,
    c: &Program,
    w: &World,
    budget: u64,
) -> Result<RunResult, SemError> {
    run(decls, &sequentialize(c), w, budget)
}

// ---------------------------------------------------------------------------
// observation
// ---------------------------------------------------------------------------

/// Mask invisible variables to ⊥ in every state; actions (with their
/// syntactic distribution terms) and histories are preserved.
pub fn observation(decls: &Decls, w: &World) -> World {
    World(
        w.0.iter()
            .map(|s| {
                let mem = Memory(
                    s.mem
                        .0
                        .iter()
                        .map(|(k, v)| {
                            let v = match k {
                                MemKey::Var(n) if decls.is_invisible(n) => Value::Undef,
                                _ => v.clone(),
                            };
                            (k.clone(), v)
                        })
                        .collect(),
                );
                State {
                    mem,
                    action: s.action.clone(),
                    hist: s.hist.clone(),
                }
            })
            .collect(),
    )
}

/// State-by-state trace of a world: action, memory delta, history delta.
pub fn trace(w: &World) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let mut prev: Option<&State> = None;
    for (i, s) in w.0.iter().enumerate() {
        let act = match &s.action {
            Action::Init => "init".to_string(),
            Action::Sample { var, dist, n, .. } => format!("{var} ~ {dist} ^ {n}"),
            Action::Cmd(c) => format!("{c}"),
        };
        let mut delta = Vec::new();
        for (k, v) in &s.mem.0 {
            if prev.map_or(true, |p| p.mem.0.get(k) != Some(v)) {
                let key = match k {
                    MemKey::Var(n) => n.clone(),
                    MemKey::Hist(d, t) => format!("hist({d}; {t})"),
                };
                delta.push(format!("{key}={v:?}"));
            }
        }
        let hist_delta = s.hist.total() - prev.map_or(0, |p| p.hist.total());
        let _ = write!(out, "[{i}] {act}");
        if !delta.is_empty() {
            let _ = write!(out, " | {}", delta.join(", "));
        }
        if hist_delta > 0 {
            let _ = write!(out, " | +{hist_delta} history entr{}",
                if hist_delta == 1 { "y" } else { "ies" });
        }
        out.push('\n');
        prev = Some(s);
    }
    out
}

/// The per-state consistency invariant: every declared pair's counter equals
/// the multiplicity of its test at the dataset's current value.
pub fn history_consistent(decls: &Decls, s: &State) -> bool {
    decls.pairs.iter().all(|(d, t)| {
        let counter = s.mem.hist_count(d, t);
        match dataset_value(&s.mem, d) {
            Ok(v) => {
                // aliasing can make the value-keyed count exceed the counter
                s.hist.count(&v, t) as i64 >= counter
            }
            Err(_) => counter == 0,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::parse_program_text;
    use crate::syntax::test_decls;

    fn base_world(decls: &Decls) -> World {
        // y1 mean 3, y2 mean 0 (z = 3), y3 mean 1.8/sqrt(2)... keep simple
        let mut mem = Memory::default();
        mem.set_var("y1", Value::real_list(&[3.0, 3.0]));
        mem.set_var("y2", Value::real_list(&[0.0, 0.0]));
        mem.set_var("y3", Value::real_list(&[1.8, 1.8]));
        mem.set_var("mu1", Value::Real(0.0));
        mem.set_var("mu2", Value::Real(0.0));
        mem.set_var("mu3", Value::Real(0.0));
        let _ = decls;
        World::initial(mem)
    }

    #[test]
    fn assign_appends_one_state() {
        let decls = test_decls();
        let w = base_world(&decls);
        let c = parse_program_text("a12 := 1.0 / 2.0", &decls).unwrap();
        let r = run(&decls, &c, &w, 100).unwrap();
        assert_eq!(r.finals.len(), 1);
        let f = &r.finals[0];
        assert_eq!(f.0.len(), w.0.len() + 1);
        assert!(f.last().mem.get_var("a12").unwrap().approx_eq(&Value::Real(0.5)));
    }

    #[test]
    fn test_call_updates_counter_and_history() {
        let decls = test_decls();
        let w = base_world(&decls);
        let c = parse_program_text("a12 := za12(y1, y2)", &decls).unwrap();
        let r = run(&decls, &c, &w, 100).unwrap();
        let f = r.finals[0].last();
        let d = Dataset::from_vars(&["y1".into(), "y2".into()]);
        let t = TestRef::Atomic("za12".into());
        assert_eq!(f.mem.hist_count(&d, &t), 1);
        let dval = dataset_value(&f.mem, &d).unwrap();
        assert_eq!(f.hist.count(&dval, &t), 1);
        assert!(history_consistent(&decls, f));
        // p-value for z = 3
        let p = f.mem.get_var("a12").unwrap().as_real().unwrap();
        assert!((p - 0.00269979606326018905).abs() < 1e-12);
    }

    #[test]
    fn guards_append_no_state() {
        let decls = test_decls();
        let w = base_world(&decls);
        let c = parse_program_text(
            "if mean(y1) <= mean(y2) { a12 := 1.0 } else { skip }",
            &decls,
        )
        .unwrap();
        let r = run(&decls, &c, &w, 100).unwrap();
        assert_eq!(r.finals.len(), 1);
        // else branch: one skip state only
        assert_eq!(r.finals[0].0.len(), w.0.len() + 1);
        assert!(matches!(
            r.finals[0].last().action,
            Action::Cmd(Program::Skip)
        ));
    }

    #[test]
    fn while_false_appends_nothing() {
        let decls = test_decls();
        let w = base_world(&decls);
        let c = parse_program_text("while mean(y1) <= 0.0 { skip }", &decls).unwrap();
        let r = run(&decls, &c, &w, 100).unwrap();
        assert_eq!(r.finals, vec![w]);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let decls = test_decls();
        let w = base_world(&decls);
        let c = parse_program_text("while 0.0 <= mean(y1) { skip }", &decls).unwrap();
        let r = run(&decls, &c, &w, 50).unwrap();
        assert!(r.exhausted);
        assert!(r.finals.is_empty());
    }

    #[test]
    fn par_interleavings_agree_and_contain_seq() {
        let decls = test_decls();
        let w = base_world(&decls);
        let par = parse_program_text(
            "(a12 := za12(y1, y2)) || (a13 := za13(y1, y3))",
            &decls,
        )
        .unwrap();
        let seq = parse_program_text(
            "a12 := za12(y1, y2); a13 := za13(y1, y3)",
            &decls,
        )
        .unwrap();
        let rp = run(&decls, &par, &w, 1000).unwrap();
        let rs = run(&decls, &seq, &w, 1000).unwrap();
        // two interleavings, one sequential final among them
        assert_eq!(rp.finals.len(), 2);
        assert_eq!(rs.finals.len(), 1);
        assert!(rp.finals.contains(&rs.finals[0]));
        // confluence: identical final memory and history
        let m0 = &rp.finals[0].last().mem;
        let h0 = &rp.finals[0].last().hist;
        for f in &rp.finals[1..] {
            assert_eq!(&f.last().mem, m0);
            assert_eq!(&f.last().hist, h0);
        }
        // canonical scheduling gives that same memory/history
        let rc = run_canonical(&decls, &par, &w, 1000).unwrap();
        assert_eq!(rc.finals.len(), 1);
        assert_eq!(&rc.finals[0].last().mem, m0);
    }

    #[test]
    fn observation_masks_invisibles_only() {
        let decls = test_decls();
        let w = base_world(&decls);
        let o = observation(&decls, &w);
        let m = &o.last().mem;
        assert_eq!(m.get_var("mu1"), Some(&Value::Undef));
        assert_eq!(m.get_var("y1"), w.last().mem.get_var("y1"));
    }

    #[test]
    fn observation_equality_ignores_invisible_values() {
        let decls = test_decls();
        let mut w1 = base_world(&decls);
        let mut w2 = base_world(&decls);
        w1.0[0].mem.set_var("mu1", Value::Real(0.0));
        w2.0[0].mem.set_var("mu1", Value::Real(2.0));
        assert_ne!(w1, w2);
        assert_eq!(observation(&decls, &w1), observation(&decls, &w2));
    }

    #[test]
    fn history_only_grows() {
        let decls = test_decls();
        let w = base_world(&decls);
        let c = parse_program_text(
            "a12 := za12(y1, y2); a12 := za12(y1, y2); a13 := za13(y1, y3)",
            &decls,
        )
        .unwrap();
        let r = run(&decls, &c, &w, 1000).unwrap();
        let f = &r.finals[0];
        for pair in f.0.windows(2) {
            assert!(pair[0].hist.le(&pair[1].hist));
        }
        let d = Dataset::from_vars(&["y1".into(), "y2".into()]);
        let t = TestRef::Atomic("za12".into());
        assert_eq!(f.last().mem.hist_count(&d, &t), 2);
        let dval = dataset_value(&f.last().mem, &d).unwrap();
        assert_eq!(f.last().hist.count(&dval, &t), 2);
    }
}
