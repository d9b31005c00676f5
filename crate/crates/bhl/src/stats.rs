//! Hypothesis-test kernels: null distributions, test statistics, p-values,
//! and disjunctive/conjunctive test combination.
//!
//! Everything here is deterministic given inputs and seeds; Monte-Carlo
//! estimation owns its RNG locally.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::syntax::{Decls, DistSpec, SynError, Tail, TestKind, TestRef};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("sigma must be positive")]
    BadSigma,
    #[error("expected {expected} dataset component(s), found {found}")]
    DataArity { expected: usize, found: usize },
    #[error("zero density at data point {x}")]
    ZeroDensity { x: f64 },
    #[error("non-finite statistic input")]
    NonFinite,
    #[error("unknown test `{id}`")]
    UnknownTest { id: String },
}

impl From<StatsError> for SynError {
    fn from(e: StatsError) -> SynError {
        SynError::Type { msg: e.to_string() }
    }
}

// ---------------------------------------------------------------------------
// standard normal CDF
// ---------------------------------------------------------------------------

const FRAC_2_SQRT_PI: f64 = 1.128_379_167_095_512_6; // 2/sqrt(pi)

/// erf on [0, 2] by its Maclaurin series. The largest term at x = 2 is about
/// 2.2, so double precision keeps the absolute error below ~1e-15 here.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= -x2 / n as f64;
        let next = term / (2 * n + 1) as f64;
        sum += next;
        if next.abs() < 1e-18 * sum.abs().max(1.0) || n > 200 {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// erfc on (2, ∞) by the Laplace continued fraction
/// erfc(x) = exp(-x²)/√π · 1/(x + ½/(x + 1/(x + 3/2/(x + ...)))),
/// evaluated with the modified Lentz algorithm.
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x.max(tiny);
    let mut c = f;
    let mut d = 0.0;
    for k in 1..=300 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x <= 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

/// Φ(x), the standard normal CDF, with absolute error ≤ 1e-12 (series below
/// |x|/√2 = 2, continued fraction beyond; both converge well past that
/// target in f64).
pub fn std_normal_cdf(x: f64) -> f64 {
    assert!(!x.is_nan(), "std_normal_cdf: NaN input");
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// statistics
// ---------------------------------------------------------------------------

pub fn mean(y: &[f64]) -> Result<f64, StatsError> {
    if y.is_empty() {
        return Err(StatsError::EmptyDataset);
    }
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

/// Two-sample Z statistic with known common standard deviation.
pub fn z_statistic(y1: &[f64], y2: &[f64], sigma: f64) -> Result<f64, StatsError> {
    if !(sigma > 0.0) {
        return Err(StatsError::BadSigma);
    }
    let (m1, m2) = (mean(y1)?, mean(y2)?);
    let scale = sigma * (1.0 / y1.len() as f64 + 1.0 / y2.len() as f64).sqrt();
    Ok((m1 - m2) / scale)
}

impl DistSpec {
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            DistSpec::Normal { mu, var } => {
                -0.5 * ((x - mu) * (x - mu) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
        match self {
            DistSpec::Normal { mu, var } => {
                (0..n).map(|_| mu + var.sqrt() * sample_std_normal(rng)).collect()
            }
        }
    }
}

/// One standard normal draw by Box–Muller.
pub fn sample_std_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Likelihood ratio ∏ q(y_i) / ∏ p(y_i), computed in log space so that long
/// datasets do not underflow.
pub fn likelihood_ratio_statistic(
    y: &[f64],
    p: &DistSpec,
    q: &DistSpec,
) -> Result<f64, StatsError> {
    let mut log_ratio = 0.0;
    for &x in y {
        let (lp, lq) = (p.log_density(x), q.log_density(x));
        if !lp.is_finite() {
            return Err(StatsError::ZeroDensity { x });
        }
        if !lq.is_finite() {
            return Err(StatsError::ZeroDensity { x });
        }
        log_ratio += lq - lp;
    }
    Ok(log_ratio.exp())
}

/// Log marginal likelihood of data under the conjugate normal–normal model:
/// z ~ N(mu0, tau2), y_i | z ~ N(z, sigma2). Closed form; for a single
/// datum this is the log density of N(mu0, tau2 + sigma2).
pub fn log_marginal_normal(y: &[f64], mu0: f64, tau2: f64, sigma2: f64) -> Result<f64, StatsError> {
    let n = y.len() as f64;
    let ybar = mean(y)?;
    let s: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * (n - 1.0) * sigma2.ln()
        - 0.5 * (sigma2 + n * tau2).ln()
        - s / (2.0 * sigma2)
        - n * (ybar - mu0) * (ybar - mu0) / (2.0 * (sigma2 + n * tau2)))
}

/// Bayes factor: ratio of the null model's marginal likelihood to the
/// alternative model's, both conjugate normal–normal.
pub fn bayes_factor(
    y: &[f64],
    null_prior: (f64, f64),
    alt_prior: (f64, f64),
    sigma2: f64,
) -> Result<f64, StatsError> {
    let ln = log_marginal_normal(y, null_prior.0, null_prior.1, sigma2)?;
    let la = log_marginal_normal(y, alt_prior.0, alt_prior.1, sigma2)?;
    Ok((ln - la).exp())
}

// ---------------------------------------------------------------------------
// p-values
// ---------------------------------------------------------------------------

/// A p-value, with a Monte-Carlo standard error when the null distribution
/// was sampled rather than closed-form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PValue {
    pub value: f64,
    pub stderr: Option<f64>,
}

impl PValue {
    fn exact(value: f64) -> PValue {
        PValue { value, stderr: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineKind {
    Disjunctive,
    Conjunctive,
}

/// A resolved test: what to compute on concrete dataset values.
#[derive(Clone, Debug)]
pub enum TestDef {
    Z {
        sigma: f64,
        tail: Tail,
    },
    /// Simple-vs-simple likelihood ratio test: statistic ∏null/∏alt,
    /// lower-tailed under an empirical null obtained by sampling datasets
    /// from the null population.
    Lrt {
        null: DistSpec,
        alt: DistSpec,
        n: u32,
        samples: u32,
        seed: u64,
    },
    /// Bayes-factor test: statistic is the null/alt marginal-likelihood
    /// ratio, lower-tailed under the null predictive distribution.
    Bayes {
        null_prior: (f64, f64),
        alt_prior: (f64, f64),
        sigma2: f64,
        n: u32,
        samples: u32,
        seed: u64,
    },
    Combined {
        kind: CombineKind,
        left: Box<TestDef>,
        right: Box<TestDef>,
    },
}

impl TestDef {
    /// Number of dataset components the test consumes.
    pub fn arity(&self) -> usize {
        match self {
            TestDef::Z { .. } => 2,
            TestDef::Lrt { .. } | TestDef::Bayes { .. } => 1,
            TestDef::Combined { left, right, .. } => left.arity() + right.arity(),
        }
    }
}

/// Combine two tests; the null distribution is the independent product
/// coupling of the component nulls, so the composite p-value has the closed
/// forms used in [`p_value`].
pub fn combine(kind: CombineKind, left: TestDef, right: TestDef) -> TestDef {
    TestDef::Combined {
        kind,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Resolve a (possibly combined) test reference against the declarations.
pub fn resolve(decls: &Decls, test: &TestRef) -> Result<TestDef, StatsError> {
    match test {
        TestRef::Atomic(id) => {
            let decl = decls.test(id).ok_or_else(|| StatsError::UnknownTest {
                id: id.clone(),
            })?;
            Ok(match &decl.kind {
                TestKind::Z { sigma, .. } => TestDef::Z {
                    sigma: *sigma,
                    tail: decl.tail,
                },
                TestKind::Lrt {
                    null,
                    alt,
                    n,
                    samples,
                    seed,
                    ..
                } => TestDef::Lrt {
                    null: *null,
                    alt: *alt,
                    n: *n,
                    samples: *samples,
                    seed: *seed,
                },
                TestKind::Bayes {
                    null_prior,
                    alt_prior,
                    sigma2,
                    n,
                    samples,
                    seed,
                    ..
                } => TestDef::Bayes {
                    null_prior: *null_prior,
                    alt_prior: *alt_prior,
                    sigma2: *sigma2,
                    n: *n,
                    samples: *samples,
                    seed: *seed,
                },
            })
        }
        TestRef::Or(a, b) => Ok(combine(
            CombineKind::Disjunctive,
            resolve(decls, a)?,
            resolve(decls, b)?,
        )),
        TestRef::And(a, b) => Ok(combine(
            CombineKind::Conjunctive,
            resolve(decls, a)?,
            resolve(decls, b)?,
        )),
    }
}

/// Monte-Carlo lower-tail p-value: the fraction of null-sampled datasets
/// whose statistic is at most the observed one. Deterministic given the seed.
pub fn mc_null_p_value(
    statistic: impl Fn(&[f64]) -> Result<f64, StatsError>,
    sample_null: impl Fn(&mut ChaCha12Rng) -> Vec<f64>,
    samples: u32,
    seed: u64,
    observed: f64,
) -> Result<PValue, StatsError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let d = sample_null(&mut rng);
        if statistic(&d)? <= observed {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let stderr = (p * (1.0 - p) / samples as f64).sqrt();
    Ok(PValue {
        value: p,
        stderr: Some(stderr),
    })
}

/// p-value of a test on concrete dataset values: the null probability of a
/// statistic at most as likely as the observed one.
pub fn p_value(test: &TestDef, data: &[Vec<f64>]) -> Result<PValue, StatsError> {
    if data.len() != test.arity() {
        return Err(StatsError::DataArity {
            expected: test.arity(),
            found: data.len(),
        });
    }
    match test {
        TestDef::Z { sigma, tail } => {
            let t = z_statistic(&data[0], &data[1], *sigma)?;
            if !t.is_finite() {
                return Err(StatsError::NonFinite);
            }
            let p = match tail {
                Tail::Two => 2.0 * (1.0 - std_normal_cdf(t.abs())),
                Tail::Upper => 1.0 - std_normal_cdf(t),
                Tail::Lower => std_normal_cdf(t),
            };
            Ok(PValue::exact(p.clamp(0.0, 1.0)))
        }
        TestDef::Lrt {
            null,
            alt,
            n,
            samples,
            seed,
        } => {
            let observed = likelihood_ratio_statistic(&data[0], alt, null)?;
            let null = *null;
            let alt = *alt;
            let size = *n as usize;
            mc_null_p_value(
                |d| likelihood_ratio_statistic(d, &alt, &null),
                |rng| null.sample(rng, size),
                *samples,
                *seed,
                observed,
            )
        }
        TestDef::Bayes {
            null_prior,
            alt_prior,
            sigma2,
            n,
            samples,
            seed,
        } => {
            let observed = bayes_factor(&data[0], *null_prior, *alt_prior, *sigma2)?;
            let (np, ap, s2, size) = (*null_prior, *alt_prior, *sigma2, *n as usize);
            mc_null_p_value(
                |d| bayes_factor(d, np, ap, s2),
                |rng| {
                    // null predictive: z ~ N(mu0, tau2), then y_i ~ N(z, s2)
                    let z = np.0 + np.1.sqrt() * sample_std_normal(rng);
                    (0..size)
                        .map(|_| z + s2.sqrt() * sample_std_normal(rng))
                        .collect()
                },
                *samples,
                *seed,
                observed,
            )
        }
        TestDef::Combined { kind, left, right } => {
            let k = left.arity();
            let p1 = p_value(left, &data[..k])?;
            let p2 = p_value(right, &data[k..])?;
            // independent product coupling of the component nulls
            let value = match kind {
                CombineKind::Disjunctive => 1.0 - (1.0 - p1.value) * (1.0 - p2.value),
                CombineKind::Conjunctive => p1.value * p2.value,
            };
            let stderr = match (p1.stderr, p2.stderr) {
                (None, None) => None,
                (se1, se2) => {
                    let (se1, se2) = (se1.unwrap_or(0.0), se2.unwrap_or(0.0));
                    let (w1, w2) = match kind {
                        CombineKind::Disjunctive => (1.0 - p2.value, 1.0 - p1.value),
                        CombineKind::Conjunctive => (p2.value, p1.value),
                    };
                    Some(((w1 * se1).powi(2) + (w2 * se2).powi(2)).sqrt())
                }
            };
            Ok(PValue { value, stderr })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference values fixed from high-precision numerical integration of
    // the normal density.
    const PHI_3: f64 = 0.998650101968369905;
    const TWO_TAIL_196: f64 = 0.0499957902964408724;
    const TWO_TAIL_3: f64 = 0.00269979606326018905;
    const TWO_TAIL_18: f64 = 0.0718606382258516009;

    fn ztest(tail: Tail) -> TestDef {
        TestDef::Z { sigma: 1.0, tail }
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(3.0) - PHI_3).abs() < 1e-12);
        assert!((std_normal_cdf(-3.0) - (1.0 - PHI_3)).abs() < 1e-12);
        // far tail exercised through the continued fraction
        assert!((std_normal_cdf(-6.0) - 9.86587645037698141e-10).abs() < 1e-15);
    }

    #[test]
    fn two_tail_reference_points() {
        for (t, want) in [(1.96, TWO_TAIL_196), (3.0, TWO_TAIL_3), (1.8, TWO_TAIL_18)] {
            let got = 2.0 * (1.0 - std_normal_cdf(t));
            assert!((got - want).abs() < 1e-12, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn z_statistic_hand_values() {
        assert_eq!(z_statistic(&[5.0, 5.0], &[3.0, 3.0], 1.0).unwrap(), 2.0);
        assert_eq!(z_statistic(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), 0.0);
        let t = z_statistic(&[1.0], &[0.0], 1.0).unwrap();
        assert!((t - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(z_statistic(&[], &[1.0], 1.0), Err(StatsError::EmptyDataset));
        assert_eq!(z_statistic(&[1.0], &[1.0], 0.0), Err(StatsError::BadSigma));
    }

    #[test]
    fn z_p_value_through_datasets() {
        // mean 3 vs mean 0, two points each, sigma 1: statistic 3
        let p = p_value(&ztest(Tail::Two), &[vec![3.0, 3.0], vec![0.0, 0.0]]).unwrap();
        assert!((p.value - TWO_TAIL_3).abs() < 1e-12);
        assert!(p.stderr.is_none());
        let up = p_value(&ztest(Tail::Upper), &[vec![3.0, 3.0], vec![0.0, 0.0]]).unwrap();
        assert!((up.value - (1.0 - PHI_3)).abs() < 1e-12);
        let lo = p_value(&ztest(Tail::Lower), &[vec![3.0, 3.0], vec![0.0, 0.0]]).unwrap();
        assert!((lo.value - PHI_3).abs() < 1e-12);
    }

    #[test]
    fn likelihood_ratio_hand_values() {
        let p = DistSpec::Normal { mu: 0.0, var: 1.0 };
        let q = DistSpec::Normal { mu: 1.0, var: 1.0 };
        assert_eq!(likelihood_ratio_statistic(&[0.7], &p, &p).unwrap(), 1.0);
        let r = likelihood_ratio_statistic(&[0.0], &p, &q).unwrap();
        assert!((r - 0.606530659712633424).abs() < 1e-15); // e^{-1/2}
        let r2 = likelihood_ratio_statistic(&[0.0, 0.0], &p, &q).unwrap();
        assert!((r2 - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bayes_factor_hand_values() {
        // identical candidate models
        let b = bayes_factor(&[0.3, 0.7], (0.0, 1.0), (0.0, 1.0), 1.0).unwrap();
        assert_eq!(b, 1.0);
        // single datum: ratio of N(0,2) and N(1,2) densities at 0 = e^{1/4}
        let b = bayes_factor(&[0.0], (0.0, 1.0), (1.0, 1.0), 1.0).unwrap();
        assert!((b - 1.28402541668774148).abs() < 1e-14);
    }

    #[test]
    fn bayes_marginal_matches_quadrature() {
        // Simpson quadrature of ∫ N(z; mu0, tau2) ∏ N(y_i; z, s2) dz
        let (mu0, tau2, s2) = (0.5, 2.0, 1.5);
        let y = [0.2, -1.0, 0.9];
        let f = |z: f64| {
            let prior = DistSpec::Normal { mu: mu0, var: tau2 };
            let like = DistSpec::Normal { mu: z, var: s2 };
            prior.density(z) * y.iter().map(|&v| like.density(v)).product::<f64>()
        };
        let (a, b, n) = (-20.0, 20.0, 40_000usize);
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = acc * h / 3.0;
        let closed = log_marginal_normal(&y, mu0, tau2, s2).unwrap().exp();
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
    }

    #[test]
    fn mc_is_deterministic_and_centered() {
        let stat = |d: &[f64]| mean(d);
        let sampler = |rng: &mut ChaCha12Rng| {
            DistSpec::Normal { mu: 0.0, var: 1.0 }.sample(rng, 5)
        };
        let a = mc_null_p_value(stat, sampler, 4000, 7, 0.0).unwrap();
        let b = mc_null_p_value(stat, sampler, 4000, 7, 0.0).unwrap();
        assert_eq!(a, b);
        // observed value at the null median: p ≈ 0.5
        let se = a.stderr.unwrap();
        assert!((a.value - 0.5).abs() < 3.0 * se, "p={} se={se}", a.value);
    }

    #[test]
    fn mc_converges_to_closed_form() {
        // statistic = sample statistic itself, null = standard normal draws,
        // lower tail: MC estimate should approach Φ(t)
        for t in [-1.2, 0.0, 0.8] {
            let est = mc_null_p_value(
                |d| Ok(d[0]),
                |rng| vec![sample_std_normal(rng)],
                20_000,
                42,
                t,
            )
            .unwrap();
            let want = std_normal_cdf(t);
            let se = est.stderr.unwrap().max(1e-6);
            assert!((est.value - want).abs() < 4.0 * se, "t={t}");
        }
    }

    #[test]
    fn combined_closed_forms() {
        let z = ztest(Tail::Two);
        let data = vec![
            vec![3.0, 3.0],
            vec![0.0, 0.0],
            vec![1.8, 1.8],
            vec![0.0, 0.0],
        ];
        let p1 = p_value(&z, &data[..2]).unwrap().value;
        let p2 = p_value(&z, &data[2..]).unwrap().value;
        let disj = combine(CombineKind::Disjunctive, z.clone(), z.clone());
        let conj = combine(CombineKind::Conjunctive, z.clone(), z.clone());
        let pd = p_value(&disj, &data).unwrap().value;
        let pc = p_value(&conj, &data).unwrap().value;
        assert!((pd - (1.0 - (1.0 - p1) * (1.0 - p2))).abs() < 1e-15);
        assert!((pc - p1 * p2).abs() < 1e-15);
        assert!(pd <= p1 + p2 + 1e-15);
        assert!(pc <= p1.min(p2) + 1e-15);
    }

    proptest! {
        #[test]
        fn phi_symmetry(x in -8.0f64..8.0) {
            let s = std_normal_cdf(x) + std_normal_cdf(-x);
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn p_value_in_unit_interval(
            y1 in proptest::collection::vec(-50.0f64..50.0, 1..20),
            y2 in proptest::collection::vec(-50.0f64..50.0, 1..20),
            sigma in 0.1f64..10.0,
        ) {
            for tail in [Tail::Two, Tail::Upper, Tail::Lower] {
                let p = p_value(&TestDef::Z { sigma, tail }, &[y1.clone(), y2.clone()]).unwrap();
                prop_assert!((0.0..=1.0).contains(&p.value));
            }
        }

        #[test]
        fn two_tail_splits_into_tails(t in -6.0f64..6.0) {
            let two = 2.0 * (1.0 - std_normal_cdf(t.abs()));
            let upper = 1.0 - std_normal_cdf(t.abs());
            let lower = std_normal_cdf(-t.abs());
            prop_assert!((two - (upper + lower)).abs() < 1e-12);
        }

        #[test]
        fn two_tail_antitone(a in 0.0f64..6.0, b in 0.0f64..6.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let p_lo = 2.0 * (1.0 - std_normal_cdf(hi));
            let p_hi = 2.0 * (1.0 - std_normal_cdf(lo));
            prop_assert!(p_lo <= p_hi + 1e-15);
        }

        #[test]
        fn combination_bounds(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let disj = 1.0 - (1.0 - p1) * (1.0 - p2);
            let conj = p1 * p2;
            prop_assert!(disj <= p1 + p2 + 1e-15);
            prop_assert!(conj <= p1.min(p2) + 1e-15);
            prop_assert!((0.0..=1.0).contains(&disj));
            prop_assert!((0.0..=1.0).contains(&conj));
        }
    }
}
