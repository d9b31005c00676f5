//! Abstract syntax for the imperative test language and the epistemic
//! assertion language, plus the declaration header shared by all input files.

use std::collections::BTreeMap;
use std::fmt;

pub type Name = String;

/// A dataset reference: a single observable variable or a tuple of them.
/// Combined tests act on tuples, e.g. `((y1,y2),(y1,y3))`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dataset {
    Var(Name),
    Tuple(Vec<Dataset>),
}

impl Dataset {
    /// All variable names appearing in the reference, left to right.
    pub fn vars(&self) -> Vec<&str> {
        match self {
            Dataset::Var(n) => vec![n.as_str()],
            Dataset::Tuple(ds) => ds.iter().flat_map(|d| d.vars()).collect(),
        }
    }

    pub fn from_vars(names: &[Name]) -> Dataset {
        if names.len() == 1 {
            Dataset::Var(names[0].clone())
        } else {
            Dataset::Tuple(names.iter().cloned().map(Dataset::Var).collect())
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataset::Var(n) => write!(f, "{n}"),
            Dataset::Tuple(ds) => {
                write!(f, "(")?;
                for (i, d) in ds.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{d}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Reference to a declared test or a combination of them.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TestRef {
    Atomic(Name),
    Or(Box<TestRef>, Box<TestRef>),
    And(Box<TestRef>, Box<TestRef>),
}

impl fmt::Display for TestRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestRef::Atomic(n) => write!(f, "{n}"),
            TestRef::Or(a, b) => write!(f, "or({a}, {b})"),
            TestRef::And(a, b) => write!(f, "and({a}, {b})"),
        }
    }
}

/// Function symbols of the term language.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FuncSym {
    Add,
    Sub,
    Mul,
    Div,
    /// Unary arithmetic negation.
    Neg,
    Min,
    Mean,
    Size,
    /// `normal(mu, var)` distribution constructor.
    Normal,
    /// Test-procedure symbol `f_A`: applied to dataset variables, evaluates
    /// to the p-value of test `A` on the current dataset values.
    PValue(TestRef),
    /// `model(A, xi)`: the population distribution test `A`'s statistical
    /// model assigns to parameter value `xi` (used by simple-vs-simple tests).
    Model(Name),
}

impl FuncSym {
    /// Expected argument count; `None` means "one or more" (datasets).
    pub fn arity(&self) -> Option<usize> {
        match self {
            FuncSym::Neg | FuncSym::Mean | FuncSym::Size => Some(1),
            FuncSym::Add | FuncSym::Sub | FuncSym::Mul | FuncSym::Div => Some(2),
            FuncSym::Min | FuncSym::Normal => Some(2),
            FuncSym::PValue(_) => None,
            FuncSym::Model(_) => Some(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub enum Term {
    Var(Name),
    IntVar(Name),
    /// History variable `h_{y,A}`: number of executions of test `A` on the
    /// dataset variable (tuple) `y`. Surface syntax `hist(y; A)`.
    Hist(Dataset, TestRef),
    Int(i64),
    Real(f64),
    App(FuncSym, Vec<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
}

/// Comparison relation used in belief and unlikeliness operators to relate
/// a p-value to a significance level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    pub fn holds(self, p: f64, eps: f64) -> bool {
        use crate::util::{real_eq, real_le, real_lt};
        match self {
            RelOp::Eq => real_eq(p, eps),
            RelOp::Lt => real_lt(p, eps),
            RelOp::Le => real_le(p, eps),
            RelOp::Gt => real_lt(eps, p),
            RelOp::Ge => real_le(eps, p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub enum Formula {
    Bool(bool),
    Cmp(CmpOp, Term, Term),
    /// `sampled(y, D, n)`: dataset y was sampled from population D, size n.
    Sampled(Term, Term, Term),
    /// `followed(y, D)`: dataset y was sampled from population D (any size).
    Followed(Term, Term),
    /// The predicate `Neg⋈_{y,A}(ε)`: the p-value of test A on dataset y
    /// stands in relation ⋈ to ε. Surface syntax `Unlikely[op eps; y; A]`.
    Unlikely {
        rel: RelOp,
        eps: Term,
        data: Dataset,
        test: TestRef,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Know(Box<Formula>),
    ForallInt(Name, Box<Formula>),
    /// Statistical belief sugar `K^{⋈ε}_{y,A}φ`; expands to
    /// `K(φ ∨ (Neg⋈_{y,A}(ε) ∧ κ_{ListTests(y,A)}) ∨ ¬compds(y,A))`.
    Belief {
        rel: RelOp,
        eps: Term,
        data: Dataset,
        test: TestRef,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }
    pub fn know(f: Formula) -> Formula {
        Formula::Know(Box::new(f))
    }
    /// Epistemic possibility `P φ ≡ ¬K¬φ`.
    pub fn possibly(f: Formula) -> Formula {
        Formula::not(Formula::know(Formula::not(f)))
    }
    /// Conjunction of a list; `true` when empty.
    pub fn and_all(fs: Vec<Formula>) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::Bool(true),
            Some(first) => it.fold(first, Formula::and),
        }
    }
}

#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub enum Program {
    Skip,
    Assign(Name, Term),
    TestCall {
        var: Name,
        test: TestRef,
        args: Vec<Name>,
    },
    Seq(Box<Program>, Box<Program>),
    Par(Box<Program>, Box<Program>),
    If(Formula, Box<Program>, Box<Program>),
    While {
        guard: Formula,
        invariant: Option<Formula>,
        body: Box<Program>,
    },
}

impl Program {
    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }
    pub fn par(a: Program, b: Program) -> Program {
        Program::Par(Box::new(a), Box::new(b))
    }

    /// The dataset tuple a test call acts on.
    pub fn call_dataset(args: &[Name]) -> Dataset {
        Dataset::from_vars(args)
    }
}

/// Types of program and assertion variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Bool,
    Int,
    /// Natural numbers; structurally an Int (range is a semantic property).
    Nat,
    Real,
    /// The unit interval [0,1]; structurally a Real.
    Prob,
    Dist,
    List(Box<Type>),
    Pair(Box<Type>, Box<Type>),
}

impl Type {
    /// Collapse the range-restricted aliases for structural compatibility.
    pub fn canonical(&self) -> Type {
        match self {
            Type::Nat => Type::Int,
            Type::Prob => Type::Real,
            Type::List(t) => Type::List(Box::new(t.canonical())),
            Type::Pair(a, b) => Type::Pair(Box::new(a.canonical()), Box::new(b.canonical())),
            t => t.clone(),
        }
    }

    pub fn compatible(&self, other: &Type) -> bool {
        self.canonical() == other.canonical()
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool => write!(f, "bool"),
            Type::Int => write!(f, "int"),
            Type::Nat => write!(f, "nat"),
            Type::Real => write!(f, "real"),
            Type::Prob => write!(f, "prob"),
            Type::Dist => write!(f, "dist"),
            Type::List(t) => write!(f, "list({t})"),
            Type::Pair(a, b) => write!(f, "pair({a}, {b})"),
        }
    }
}

/// Which tail of the null distribution a test rejects in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tail {
    Lower,
    Upper,
    Two,
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Lower => write!(f, "lower"),
            Tail::Upper => write!(f, "upper"),
            Tail::Two => write!(f, "two"),
        }
    }
}

/// A concrete population distribution (currently normal only).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum DistSpec {
    Normal { mu: f64, var: f64 },
}

/// What kind of statistic a declared test computes.
#[derive(Clone, Debug, PartialEq)]
pub enum TestKind {
    /// Two-sample Z test with known population std deviation `sigma`; the
    /// model says dataset component i follows `normal(mean_i, sigma^2)`.
    Z { sigma: f64, means: (Name, Name) },
    /// Simple-vs-simple likelihood ratio test: statistic ∏null/∏alt,
    /// lower-tailed, empirical null by sampling `n`-point datasets from the
    /// null population.
    Lrt {
        null: DistSpec,
        alt: DistSpec,
        param: Name,
        null_value: f64,
        alt_value: f64,
        n: u32,
        samples: u32,
        seed: u64,
    },
    /// Conjugate Bayesian test: statistic is the Bayes factor
    /// (null marginal / alternative marginal), lower-tailed, empirical null
    /// by sampling from the null prior predictive.
    Bayes {
        null_prior: (f64, f64),
        alt_prior: (f64, f64),
        sigma2: f64,
        param: Name,
        null_value: f64,
        alt_value: f64,
        n: u32,
        samples: u32,
        seed: u64,
    },
}

/// A declared atomic hypothesis test.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDecl {
    pub id: Name,
    pub tail: Tail,
    pub kind: TestKind,
}

impl TestDecl {
    /// Upper-side alternative hypothesis φ_U.
    pub fn phi_u(&self) -> Formula {
        match &self.kind {
            TestKind::Z { means, .. } => {
                // mu1 > mu2, normalized to mu2 < mu1
                Formula::Cmp(CmpOp::Lt, Term::Var(means.1.clone()), Term::Var(means.0.clone()))
            }
            TestKind::Lrt { param, null_value, alt_value, .. }
            | TestKind::Bayes { param, null_value, alt_value, .. } => {
                // the parameter is neither of the two simple hypotheses
                Formula::and(
                    Formula::not(Formula::Cmp(
                        CmpOp::Eq,
                        Term::Var(param.clone()),
                        Term::Real(*null_value),
                    )),
                    Formula::not(Formula::Cmp(
                        CmpOp::Eq,
                        Term::Var(param.clone()),
                        Term::Real(*alt_value),
                    )),
                )
            }
        }
    }

    /// Lower-side alternative hypothesis φ_L.
    pub fn phi_l(&self) -> Formula {
        match &self.kind {
            TestKind::Z { means, .. } => {
                Formula::Cmp(CmpOp::Lt, Term::Var(means.0.clone()), Term::Var(means.1.clone()))
            }
            TestKind::Lrt { param, alt_value, .. }
            | TestKind::Bayes { param, alt_value, .. } => Formula::Cmp(
                CmpOp::Eq,
                Term::Var(param.clone()),
                Term::Real(*alt_value),
            ),
        }
    }

    /// The alternative hypothesis this test aims to establish.
    pub fn alt(&self) -> Formula {
        match self.tail {
            Tail::Two => Formula::or(self.phi_u(), self.phi_l()),
            Tail::Upper => self.phi_u(),
            Tail::Lower => self.phi_l(),
        }
    }

    /// The null hypothesis `nuh = ¬φ_U ∧ ¬φ_L` (strictly stronger than ¬alt
    /// for one-tailed tests).
    pub fn null_hypothesis(&self) -> Formula {
        Formula::and(Formula::not(self.phi_u()), Formula::not(self.phi_l()))
    }

    /// Number of dataset components this test consumes.
    pub fn data_arity(&self) -> usize {
        match self.kind {
            TestKind::Z { .. } => 2,
            TestKind::Lrt { .. } | TestKind::Bayes { .. } => 1,
        }
    }
}

/// The declaration header shared by program, scenario and proof files:
/// observable/invisible typings, tests, and the finite set of (dataset, test)
/// pairs whose history variables exist.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decls {
    pub obs: BTreeMap<Name, Type>,
    pub inv: BTreeMap<Name, Type>,
    pub tests: BTreeMap<Name, TestDecl>,
    pub pairs: Vec<(Dataset, TestRef)>,
    pub int_bound: Option<u32>,
}

pub const DEFAULT_INT_BOUND: u32 = 8;

impl Decls {
    pub fn int_bound(&self) -> u32 {
        self.int_bound.unwrap_or(DEFAULT_INT_BOUND)
    }

    pub fn is_observable(&self, v: &str) -> bool {
        self.obs.contains_key(v)
    }

    pub fn is_invisible(&self, v: &str) -> bool {
        self.inv.contains_key(v)
    }

    pub fn var_type(&self, v: &str) -> Option<&Type> {
        self.obs.get(v).or_else(|| self.inv.get(v))
    }

    pub fn test(&self, id: &str) -> Option<&TestDecl> {
        self.tests.get(id)
    }

    pub fn has_pair(&self, d: &Dataset, t: &TestRef) -> bool {
        self.pairs.iter().any(|(pd, pt)| pd == d && pt == t)
    }

    /// Register a history pair if not present (used when collecting the
    /// pairs occurring in a program body).
    pub fn add_pair(&mut self, d: Dataset, t: TestRef) {
        if !self.has_pair(&d, &t) {
            self.pairs.push((d, t));
        }
    }
}

/// A parsed `.bhp` file: declarations plus the program body.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramFile {
    pub decls: Decls,
    pub program: Program,
}
