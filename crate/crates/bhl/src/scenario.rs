//! Scenario files: a finite slice of imaginable worlds. A scenario fixes the
//! declarations, a grid of invisible-parameter values, concrete dataset
//! values, sampling provenance records, and optionally a program to execute
//! from every initial world.
//!
//! Format (each item `;`-terminated, after the usual declaration header):
//!
//! ```text
//! grid (mu1, mu2) in { (0.0, 0.0), (2.0, 0.0) };
//! dataset y1 = [3.0, 3.0];
//! dataset a12 = 0.5;              # scalars allowed
//! sampling y1 ~ normal(mu1, 1.0) ^ 2;
//! seed 42;
//! program { ... }                 # optional
//! ```
//!
//! A `sampling` line for a variable with a declared dataset value records
//! provenance for that value; without one, `n` points are drawn from the
//! distribution (deterministically from the seed).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::semantics::{eval_term, IntEnv, Memory, SemError, Value, World};
use crate::syntax::lexer::TokKind;
use crate::syntax::parser::{collect_call_pairs, Parser};
use crate::syntax::{check, Decls, Name, Program, SynError, Term};

#[derive(Clone, Debug)]
pub struct SamplingSpec {
    pub var: Name,
    pub dist: Term,
    pub n: u32,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub decls: Decls,
    pub grid_vars: Vec<Name>,
    /// One row per grid point; empty grid means a single point with no
    /// invisible bindings.
    pub grid: Vec<Vec<f64>>,
    pub datasets: Vec<(Name, Value)>,
    pub samplings: Vec<SamplingSpec>,
    pub seed: u64,
    pub program: Option<Program>,
}

pub fn parse_scenario(src: &str) -> Result<Scenario, SynError> {
    let mut p = Parser::new(src)?;
    let mut decls = p.parse_decls()?;
    let mut grid_vars = Vec::new();
    let mut grid: Vec<Vec<f64>> = Vec::new();
    let mut datasets = Vec::new();
    let mut samplings = Vec::new();
    let mut seed = 0u64;
    let mut program = None;

    loop {
        if p.accept_kw("grid") {
            grid_vars = parse_name_tuple(&mut p)?;
            p.expect_kw("in")?;
            p.expect(TokKind::LBrace)?;
            loop {
                let point = parse_number_tuple(&mut p)?;
                if point.len() != grid_vars.len() {
                    return Err(SynError::Arity {
                        what: "grid point".into(),
                        expected: grid_vars.len(),
                        found: point.len(),
                    });
                }
                grid.push(point);
                if !p.accept(TokKind::Comma) {
                    break;
                }
            }
            p.expect(TokKind::RBrace)?;
            p.expect(TokKind::Semi)?;
            for v in &grid_vars {
                if decls.var_type(v).is_none() {
                    return Err(SynError::UnknownVar { name: v.clone() });
                }
            }
        } else if p.accept_kw("dataset") {
            let var = p.expect_ident()?;
            if decls.var_type(&var).is_none() {
                return Err(SynError::UnknownVar { name: var });
            }
            p.expect(TokKind::Eq)?;
            let val = parse_value_literal(&mut p)?;
            p.expect(TokKind::Semi)?;
            datasets.push((var, val));
        } else if p.accept_kw("sampling") {
            let var = p.expect_ident()?;
            if !decls.is_observable(&var) {
                return Err(SynError::UnknownVar { name: var });
            }
            p.expect(TokKind::Tilde)?;
            let dist = p.parse_term(&decls)?;
            p.expect(TokKind::Caret)?;
            let n = p.expect_u64()? as u32;
            p.expect(TokKind::Semi)?;
            samplings.push(SamplingSpec { var, dist, n });
        } else if p.accept_kw("seed") {
            seed = p.expect_u64()?;
            p.expect(TokKind::Semi)?;
        } else if p.accept_kw("program") {
            p.expect(TokKind::LBrace)?;
            let c = p.parse_program(&decls)?;
            p.expect(TokKind::RBrace)?;
            collect_call_pairs(&mut decls, &c);
            check::check_program(&decls, &c)?;
            program = Some(c);
        } else {
            break;
        }
    }
    p.expect_eof()?;
    Ok(Scenario {
        decls,
        grid_vars,
        grid,
        datasets,
        samplings,
        seed,
        program,
    })
}

fn parse_name_tuple(p: &mut Parser) -> Result<Vec<Name>, SynError> {
    if p.accept(TokKind::LParen) {
        let mut names = vec![p.expect_ident()?];
        while p.accept(TokKind::Comma) {
            names.push(p.expect_ident()?);
        }
        p.expect(TokKind::RParen)?;
        Ok(names)
    } else {
        Ok(vec![p.expect_ident()?])
    }
}

fn parse_number_tuple(p: &mut Parser) -> Result<Vec<f64>, SynError> {
    if p.accept(TokKind::LParen) {
        let mut xs = vec![p.expect_number()?];
        while p.accept(TokKind::Comma) {
            xs.push(p.expect_number()?);
        }
        p.expect(TokKind::RParen)?;
        Ok(xs)
    } else {
        Ok(vec![p.expect_number()?])
    }
}

fn parse_value_literal(p: &mut Parser) -> Result<Value, SynError> {
    if p.accept(TokKind::LBracket) {
        let mut xs = Vec::new();
        if !p.accept(TokKind::RBracket) {
            loop {
                xs.push(p.expect_number()?);
                if !p.accept(TokKind::Comma) {
                    break;
                }
            }
            p.expect(TokKind::RBracket)?;
        }
        Ok(Value::real_list(&xs))
    } else {
        Ok(Value::Real(p.expect_number()?))
    }
}

impl Scenario {
    /// Construct the initial worlds, one per grid point, in grid order. Each
    /// starts from a memory binding the grid values and declared datasets,
    /// then appends one sampling-record state per `sampling` line.
    pub fn initial_worlds(&self) -> Result<Vec<World>, SemError> {
        let points: Vec<Vec<f64>> = if self.grid.is_empty() {
            vec![Vec::new()]
        } else {
            self.grid.clone()
        };
        let mut worlds = Vec::with_capacity(points.len());
        for (pi, point) in points.iter().enumerate() {
            let mut mem = Memory::default();
            for (v, &x) in self.grid_vars.iter().zip(point) {
                mem.set_var(v, Value::Real(x));
            }
            for (v, val) in &self.datasets {
                mem.set_var(v, val.clone());
            }
            let mut w = World::initial(mem);
            for (si, s) in self.samplings.iter().enumerate() {
                let value = match w.last().mem.get_var(&s.var) {
                    Some(v) if !matches!(v, Value::Undef) => v.clone(),
                    _ => {
                        let dist = eval_term(
                            &self.decls,
                            &w.last().mem,
                            &IntEnv::new(),
                            &s.dist,
                        )?
                        .as_dist()?;
                        let mut rng = ChaCha12Rng::seed_from_u64(
                            self.seed ^ ((pi as u64) << 32) ^ (si as u64 + 1),
                        );
                        Value::real_list(&dist.sample(&mut rng, s.n as usize))
                    }
                };
                w = w.with_sample(&s.var, value, s.dist.clone(), s.n);
            }
            worlds.push(w);
        }
        Ok(worlds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::Action;

    const SCN: &str = "
        obs y1 : list(real);
        obs y2 : list(real);
        obs a12 : prob;
        inv mu1 : real;
        inv mu2 : real;
        test za12 = z(two, sigma = 1.0, means = (mu1, mu2));
        pair (y1, y2) : za12;

        grid (mu1, mu2) in { (0.0, 0.0), (2.0, 0.0) };
        dataset y1 = [3.0, 3.0];
        dataset y2 = [0.0, 0.0];
        sampling y1 ~ normal(mu1, 1.0) ^ 2;
        sampling y2 ~ normal(mu2, 1.0) ^ 2;
        program { a12 := za12(y1, y2) }
    ";

    #[test]
    fn scenario_parses_and_builds_worlds() {
        let s = parse_scenario(SCN).unwrap();
        assert_eq!(s.grid.len(), 2);
        assert!(s.program.is_some());
        let ws = s.initial_worlds().unwrap();
        assert_eq!(ws.len(), 2);
        for w in &ws {
            // init + two sampling records
            assert_eq!(w.0.len(), 3);
            assert!(matches!(w.0[1].action, Action::Sample { .. }));
            assert!(w.last().hist.0.is_empty());
            assert!(w
                .last()
                .mem
                .get_var("y1")
                .unwrap()
                .approx_eq(&Value::real_list(&[3.0, 3.0])));
        }
        // grid value differs between the worlds
        assert!(ws[0].last().mem.get_var("mu1").unwrap().approx_eq(&Value::Real(0.0)));
        assert!(ws[1].last().mem.get_var("mu1").unwrap().approx_eq(&Value::Real(2.0)));
    }

    #[test]
    fn generated_sampling_is_deterministic() {
        let src = "
            obs y1 : list(real);
            inv mu1 : real;
            grid mu1 in { 0.0 };
            sampling y1 ~ normal(mu1, 1.0) ^ 5;
            seed 7;
        ";
        let a = parse_scenario(src).unwrap().initial_worlds().unwrap();
        let b = parse_scenario(src).unwrap().initial_worlds().unwrap();
        assert_eq!(a, b);
        let v = a[0].last().mem.get_var("y1").unwrap().as_real_list().unwrap();
        assert_eq!(v.len(), 5);
    }
}
