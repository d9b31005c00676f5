//! Seeded random generators for programs and formulas over the bundled
//! six-world scenario's declarations (variables `a12`/`a13`, tests
//! `za12`/`za13` over `(y1, y2)` and `(y1, y3)`).

use bhl::syntax::{CmpOp, Dataset, Formula, FuncSym, Program, RelOp, Term, TestRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub struct Gen {
    pub rng: ChaCha12Rng,
}

const LITS: [f64; 6] = [0.01, 0.05, 0.1, 0.23, 0.5, 1.0];

pub fn pair(i: usize) -> (Dataset, TestRef) {
    let (ys, t) = if i == 0 {
        (("y1", "y2"), "za12")
    } else {
        (("y1", "y3"), "za13")
    };
    (
        Dataset::Tuple(vec![
            Dataset::Var(ys.0.to_string()),
            Dataset::Var(ys.1.to_string()),
        ]),
        TestRef::Atomic(t.to_string()),
    )
}

fn test_call(i: usize) -> Program {
    let (var, t, args) = if i == 0 {
        ("a12", "za12", ["y1", "y2"])
    } else {
        ("a13", "za13", ["y1", "y3"])
    };
    Program::TestCall {
        var: var.to_string(),
        test: TestRef::Atomic(t.to_string()),
        args: args.iter().map(|s| s.to_string()).collect(),
    }
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    fn lit(&mut self) -> f64 {
        LITS[self.rng.gen_range(0..LITS.len())]
    }

    fn avar(&mut self) -> Term {
        Term::Var(if self.rng.gen_bool(0.5) { "a12" } else { "a13" }.to_string())
    }

    /// A program guard over the result variables and literals (both result
    /// variables are initialized in the scenario, so guards never read ⊥).
    pub fn guard(&mut self) -> Formula {
        let lhs = self.avar();
        let rhs = if self.rng.gen_bool(0.5) {
            Term::Real(self.lit())
        } else {
            self.avar()
        };
        let op = if self.rng.gen_bool(0.5) {
            CmpOp::Le
        } else {
            CmpOp::Lt
        };
        let f = Formula::Cmp(op, lhs, rhs);
        if self.rng.gen_bool(0.25) {
            Formula::not(f)
        } else {
            f
        }
    }

    /// A loop-free program of the given depth with at most `tests` test
    /// calls.
    pub fn program(&mut self, depth: u32, tests: &mut u32) -> Program {
        let max = if depth == 0 { 4 } else { 6 };
        match self.rng.gen_range(0..max) {
            0 => Program::Skip,
            1 => Program::Assign("a12".to_string(), Term::Real(self.lit())),
            2 => Program::Assign("a13".to_string(), Term::Real(self.lit())),
            3 => {
                if *tests > 0 {
                    *tests -= 1;
                    test_call(self.rng.gen_range(0..2))
                } else {
                    Program::Skip
                }
            }
            4 => Program::seq(self.program(depth - 1, tests), self.program(depth - 1, tests)),
            _ => Program::If(
                self.guard(),
                Box::new(self.program(depth - 1, tests)),
                Box::new(self.program(depth - 1, tests)),
            ),
        }
    }

    /// One side of a parallel composition: reads and writes only its own
    /// result variable and calls only its own test, so the two sides are
    /// interference-free by construction.
    pub fn par_side(&mut self, i: usize, depth: u32, tests: &mut u32) -> Program {
        let var = if i == 0 { "a12" } else { "a13" };
        let max = if depth == 0 { 3 } else { 5 };
        match self.rng.gen_range(0..max) {
            0 => Program::Skip,
            1 => Program::Assign(var.to_string(), Term::Real(self.lit())),
            2 => {
                if *tests > 0 {
                    *tests -= 1;
                    test_call(i)
                } else {
                    Program::Skip
                }
            }
            3 => Program::seq(
                self.par_side(i, depth - 1, tests),
                self.par_side(i, depth - 1, tests),
            ),
            _ => {
                let g = Formula::Cmp(
                    CmpOp::Le,
                    Term::Var(var.to_string()),
                    Term::Real(self.lit()),
                );
                Program::If(
                    g,
                    Box::new(self.par_side(i, depth - 1, tests)),
                    Box::new(self.par_side(i, depth - 1, tests)),
                )
            }
        }
    }

    fn atom(&mut self) -> Formula {
        match self.rng.gen_range(0..5) {
            0 => Formula::Cmp(
                if self.rng.gen_bool(0.5) { CmpOp::Le } else { CmpOp::Lt },
                self.avar(),
                Term::Real(self.lit()),
            ),
            1 => {
                let (d, t) = pair(self.rng.gen_range(0..2));
                Formula::Cmp(CmpOp::Eq, Term::Hist(d, t), Term::Int(self.rng.gen_range(0..3)))
            }
            2 => {
                let (m1, m2) = if self.rng.gen_bool(0.5) {
                    ("mu1", "mu2")
                } else {
                    ("mu1", "mu3")
                };
                Formula::Cmp(
                    CmpOp::Lt,
                    Term::Var(m1.to_string()),
                    Term::Var(m2.to_string()),
                )
            }
            3 => {
                let (d, t) = pair(self.rng.gen_range(0..2));
                let body = Formula::Cmp(
                    CmpOp::Lt,
                    Term::Var("mu1".to_string()),
                    Term::Var(if self.rng.gen_bool(0.5) { "mu2" } else { "mu3" }.to_string()),
                );
                Formula::Belief {
                    rel: if self.rng.gen_bool(0.5) { RelOp::Le } else { RelOp::Eq },
                    eps: if self.rng.gen_bool(0.5) {
                        Term::Real(self.lit())
                    } else {
                        self.avar()
                    },
                    data: d,
                    test: t,
                    body: Box::new(body),
                }
            }
            _ => Formula::Sampled(
                Term::Var("y1".to_string()),
                Term::App(
                    FuncSym::Normal,
                    vec![Term::Var("mu1".to_string()), Term::Real(1.0)],
                ),
                Term::Int(2),
            ),
        }
    }

    /// A random epistemic formula of the given connective depth.
    pub fn formula(&mut self, depth: u32) -> Formula {
        if depth == 0 {
            return self.atom();
        }
        match self.rng.gen_range(0..6) {
            0 => self.atom(),
            1 => Formula::not(self.formula(depth - 1)),
            2 => Formula::and(self.formula(depth - 1), self.formula(depth - 1)),
            3 => Formula::or(self.formula(depth - 1), self.formula(depth - 1)),
            4 => Formula::implies(self.formula(depth - 1), self.formula(depth - 1)),
            _ => Formula::know(self.formula(depth - 1)),
        }
    }
}
