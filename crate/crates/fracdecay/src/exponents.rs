//! Threshold exponents, Moser sequences, penalization chains, nonexistence
//! certificates and decay predictors.
//!
//! Threshold comparisons are strict inequalities, so they are done in exact
//! rational arithmetic; derived floating-point quantities (μ traces, chain
//! values) are only used after the comparison has been settled.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Exact rational from a decimal or fraction literal: `"2/5"`, `"0.4"`,
/// `"3"`, `"1.5e-3"`.
pub fn parse_rational(text: &str) -> Result<Q> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let den = parse_decimal(b)?;
        if den.is_zero() {
            return Err(Error::Config(format!("zero denominator in {text:?}")));
        }
        return Ok(parse_decimal(a)? / den);
    }
    parse_decimal(t)
}

fn parse_decimal(text: &str) -> Result<Q> {
    let bad = || Error::Config(format!("not a number: {text:?}"));
    let t = text.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(k) => (&t[..k], t[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let num: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().map_err(|_| bad())?
    };
    let scale = exp - frac_part.len() as i32;
    let ten = Q::from_integer(BigInt::from(10));
    let mut q = Q::from_integer(num) * Pow::pow(&ten, scale);
    if neg {
        q = -q;
    }
    Ok(q)
}

/// The rational a user most plausibly meant by `x`: the shortest decimal
/// that round-trips to `x` (so `0.4` becomes `2/5`).
pub fn rational(x: f64) -> Q {
    assert!(x.is_finite(), "rational() of non-finite value");
    parse_decimal(&format!("{x:e}")).expect("float formatting is a valid decimal")
}

pub fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn int(n: u32) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn q2() -> Q {
    int(2)
}

/// Decay classification of the potential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayClass {
    /// `lim (1 + r^{2s}) V = 0`.
    Fast,
    /// Two-sided `V ≍ (1 + r^ω)^{-1}` with `ω ∈ [0, 2s]`.
    Slow(Q),
    /// Only `V <= C (1 + r^ω)^{-1}`; `ω >= 0`.
    UpperSlow(Q),
    /// `inf V·log(e + r²) > 0`.
    Log,
}

fn check_admissible(n: u32, s: &Q) -> Result<()> {
    if !(s.is_positive() && s < &Q::one()) {
        return Err(Error::Inadmissible(format!("0 < s < 1 fails (s = {s})")));
    }
    if int(n) <= q2() * s {
        return Err(Error::Inadmissible(format!("N > 2s fails (N = {n}, s = {s})")));
    }
    Ok(())
}

fn check_p(n: u32, s: &Q, p: &Q) -> Result<()> {
    check_admissible(n, s)?;
    let crit = critical_exponent(n, s)?;
    if !(p > &q2() && p < &crit) {
        return Err(Error::Inadmissible(format!("2 < p < 2_s^* = {crit} fails (p = {p})")));
    }
    Ok(())
}

/// `2_s^* = 2N/(N − 2s)`.
pub fn critical_exponent(n: u32, s: &Q) -> Result<Q> {
    if int(n) <= q2() * s {
        return Err(Error::Inadmissible(format!("N > 2s fails (N = {n}, s = {s})")));
    }
    Ok(q2() * int(n) / (int(n) - q2() * s))
}

/// `q_* = 2 + 2s/(N − 2s)`.
pub fn q_star(n: u32, s: &Q) -> Result<Q> {
    check_admissible(n, s)?;
    Ok(q2() + q2() * s / (int(n) - q2() * s))
}

/// `q_ω = 2 + ω/(N + 2s − ω)`.
pub fn q_omega(n: u32, s: &Q, omega: &Q) -> Result<Q> {
    check_admissible(n, s)?;
    if omega.is_negative() || omega > &(q2() * s) {
        return Err(Error::Classification(format!(
            "q_omega needs omega in [0, 2s], got {omega}"
        )));
    }
    Ok(q2() + omega / (int(n) + q2() * s - omega))
}

/// The existence/nonexistence threshold for the decay class.
pub fn threshold_p_star(n: u32, s: &Q, class: &DecayClass) -> Result<Q> {
    check_admissible(n, s)?;
    match class {
        DecayClass::Fast => q_star(n, s),
        DecayClass::Slow(w) => {
            if w.is_negative() {
                return Err(Error::Classification(format!("omega = {w} < 0")));
            }
            if w > &(q2() * s) {
                return Err(Error::Classification(
                    "use upper-slow classification; threshold formula for existence only covers ω ∈ [0,2s]"
                        .into(),
                ));
            }
            q_omega(n, s, w)
        }
        DecayClass::UpperSlow(w) => {
            if w.is_negative() {
                return Err(Error::Classification(format!("omega = {w} < 0")));
            }
            if w > &(q2() * s) {
                q_star(n, s)
            } else {
                q_omega(n, s, w)
            }
        }
        DecayClass::Log => Ok(q2()),
    }
}

/// Threshold table for the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub critical: Q,
    pub q_star: Q,
    pub q_omega: Option<Q>,
}

pub fn thresholds(n: u32, s: &Q, omega: Option<&Q>) -> Result<Thresholds> {
    Ok(Thresholds {
        critical: critical_exponent(n, s)?,
        q_star: q_star(n, s)?,
        q_omega: omega.map(|w| q_omega(n, s, w)).transpose()?,
    })
}

/// `β_0 = 1`, `2β_{i+1} + p − 2 = β_i·2_s^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoserSequence {
    pub d: Q,
    pub betas: Vec<Q>,
    pub ratio: Q,
}

impl MoserSequence {
    /// `(2_s^*/2)^i (1 + d) − d`.
    pub fn closed_form(&self, i: usize) -> Q {
        let pow: Q = Pow::pow(&self.ratio, i as i32);
        pow * (Q::one() + &self.d) - &self.d
    }
}

pub fn moser_sequence(n: u32, s: &Q, p: &Q, i_max: usize) -> Result<MoserSequence> {
    check_p(n, s, p)?;
    if i_max < 1 {
        return Err(Error::Inadmissible("i_max >= 1 fails".into()));
    }
    let crit = critical_exponent(n, s)?;
    let d = (p - q2()) / (q2() - &crit);
    let ratio = &crit / q2();
    let mut seq = MoserSequence {
        d,
        betas: vec![Q::one()],
        ratio,
    };
    for i in 0..i_max {
        let next = (&seq.betas[i] * &crit - p + q2()) / q2();
        seq.betas.push(next);
        assert_eq!(
            seq.betas[i + 1],
            seq.closed_form(i + 1),
            "Moser closed form disagrees with the recurrence"
        );
    }
    Ok(seq)
}

/// Which inequality chain the penalization parameters satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    Q1Fast,
    Q2SlowOmegaEq2s,
    Q2SlowOmegaLt2s,
    Q3Log,
}

/// Penalization `P_ε(x) = ε^θ |x|^{-τ}` off the well, together with the
/// decay exponent `μ` of the comparison weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenalizationPlan {
    pub theta: f64,
    pub tau: f64,
    pub mu: f64,
    pub case_tag: CaseTag,
}

/// The chain of one case: `lower < τ < θ < μ(p−2) < mu_hi·(p−2)` with
/// `μ ∈ (mu_lo, mu_hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub case_tag: CaseTag,
    pub lower: Q,
    pub mu_lo: Q,
    pub mu_hi: Q,
}

impl Chain {
    pub fn for_class(n: u32, s: &Q, class: &DecayClass) -> Result<Chain> {
        let two_s = q2() * s;
        let nn = int(n);
        let (case_tag, lower, mu_lo, mu_hi) = match class {
            DecayClass::Fast => (CaseTag::Q1Fast, two_s.clone(), Q::zero(), &nn - &two_s),
            DecayClass::Slow(w) if *w == two_s => {
                (CaseTag::Q2SlowOmegaEq2s, two_s.clone(), &nn - &two_s, nn.clone())
            }
            DecayClass::Slow(w) if !w.is_negative() && *w < two_s => (
                CaseTag::Q2SlowOmegaLt2s,
                w.clone(),
                nn.clone(),
                &nn + &two_s - w,
            ),
            DecayClass::Log => (CaseTag::Q3Log, Q::zero(), nn.clone(), &nn + &two_s),
            other => {
                return Err(Error::Classification(format!(
                    "no penalization chain for {other:?}; existence needs a lower decay bound with ω ∈ [0, 2s], fast decay, or log decay"
                )))
            }
        };
        Ok(Chain {
            case_tag,
            lower,
            mu_lo,
            mu_hi,
        })
    }

    /// Admissible μ interval `(max(mu_lo, lower/(p−2)), mu_hi)`; may be empty.
    pub fn mu_interval(&self, p: &Q) -> (Q, Q) {
        let from_chain = &self.lower / (p - q2());
        let lo = if from_chain > self.mu_lo {
            from_chain
        } else {
            self.mu_lo.clone()
        };
        (lo, self.mu_hi.clone())
    }

    /// The plan with μ at the interval midpoint and (τ, θ) splitting
    /// `(lower, μ(p−2))` into thirds. Ignores feasibility.
    pub fn plan(&self, p: &Q) -> PenalizationPlan {
        let (lo, hi) = self.mu_interval(p);
        let mu = to_f64(&((lo + hi) / q2()));
        let pm2 = to_f64(&(p - q2()));
        let lower = to_f64(&self.lower);
        let top = mu * pm2;
        PenalizationPlan {
            theta: lower + 2.0 * (top - lower) / 3.0,
            tau: lower + (top - lower) / 3.0,
            mu,
            case_tag: self.case_tag,
        }
    }

    /// Smallest gap in the chain for `plan`; positive iff all strict
    /// inequalities hold.
    pub fn margin(&self, p: f64, plan: &PenalizationPlan) -> f64 {
        let lower = to_f64(&self.lower);
        let pm2 = p - 2.0;
        [
            plan.tau - lower,
            plan.theta - plan.tau,
            plan.mu * pm2 - plan.theta,
            (to_f64(&self.mu_hi) - plan.mu) * pm2,
            plan.mu - to_f64(&self.mu_lo),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

/// Result of [`select_penalization`].
#[derive(Debug, Clone, PartialEq)]
pub enum Penalization {
    Feasible(PenalizationPlan),
    Infeasible { reason: String },
}

/// Smallest admissible chain gap.
pub const CHAIN_MARGIN: f64 = 1e-9;

pub fn select_penalization(n: u32, s: &Q, p: &Q, class: &DecayClass) -> Result<Penalization> {
    check_p(n, s, p)?;
    let chain = Chain::for_class(n, s, class)?;
    let threshold = threshold_p_star(n, s, class)?;
    if *p == threshold {
        return Err(Error::OpenProblemBoundary {
            p: p.to_string(),
            threshold: threshold.to_string(),
        });
    }
    if *p < threshold {
        return Ok(Penalization::Infeasible {
            reason: format!("p = {p} <= p_* = {threshold}"),
        });
    }
    let plan = chain.plan(p);
    let margin = chain.margin(to_f64(p), &plan);
    if margin < CHAIN_MARGIN {
        return Ok(Penalization::Infeasible {
            reason: format!("chain margin {margin:e} below {CHAIN_MARGIN:e} (p too close to p_* = {threshold})"),
        });
    }
    Ok(Penalization::Feasible(plan))
}

/// Nonexistence iteration regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateRegime {
    FastQ1Prime,
    SlowEq2s,
    SlowLt2s,
}

/// The lower-bound iteration `u >= C w_{μ_i}` driven below `N/p`, where
/// `∫ w_{μ*}^p = ∞` contradicts finite energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mu_trace: Vec<f64>,
    pub terminal_mu_star: f64,
    pub steps: usize,
    pub regime: CertificateRegime,
    /// Recurrence step (`2s` or `ω`).
    pub step: f64,
    pub p: f64,
    pub n: u32,
}

impl Certificate {
    /// Human-readable divergence witness.
    pub fn witness(&self) -> String {
        format!(
            "int u^p >= C int w_{{mu*}}^p = infinity, since mu* p = {:.6} < N = {}",
            self.terminal_mu_star * self.p,
            self.n
        )
    }

    /// Checks the recurrence and ordering invariants.
    pub fn check(&self, s: f64) -> bool {
        let n = self.n as f64;
        let start = match self.regime {
            CertificateRegime::FastQ1Prime | CertificateRegime::SlowLt2s => 1,
            CertificateRegime::SlowEq2s => 0,
        };
        let rec_ok = self.mu_trace.windows(2).skip(start).all(|w| {
            (w[1] - (w[0] * (self.p - 1.0) - self.step)).abs() <= 1e-12 * w[0].abs().max(1.0)
        });
        let dec = self.mu_trace.windows(2).all(|w| w[1] < w[0]);
        let last = *self.mu_trace.last().unwrap();
        let lo = ((n - 2.0 * s) / 2.0).max(last);
        rec_ok
            && dec
            && last * self.p < n
            && self.terminal_mu_star > lo
            && self.terminal_mu_star < n / self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateOutcome {
    Certificate(Certificate),
    NotApplicable { reason: String },
}

const MAX_CERT_STEPS: usize = 100_000;

/// Runs the seed + recurrence of the nonexistence proof when `p` is below
/// the threshold of the class.
pub fn nonexistence_certificate(
    n: u32,
    s: &Q,
    p: &Q,
    class: &DecayClass,
) -> Result<CertificateOutcome> {
    check_p(n, s, p)?;
    let two_s = q2() * s;
    let (regime, threshold) = match class {
        DecayClass::Fast => (CertificateRegime::FastQ1Prime, q_star(n, s)?),
        DecayClass::Slow(w) | DecayClass::UpperSlow(w) => {
            if !w.is_positive() {
                return Ok(CertificateOutcome::NotApplicable {
                    reason: format!("omega = {w}: nonexistence needs omega > 0"),
                });
            }
            if *w > two_s {
                (CertificateRegime::FastQ1Prime, q_star(n, s)?)
            } else if *w == two_s {
                (CertificateRegime::SlowEq2s, q_omega(n, s, w)?)
            } else {
                (CertificateRegime::SlowLt2s, q_omega(n, s, w)?)
            }
        }
        DecayClass::Log => {
            return Ok(CertificateOutcome::NotApplicable {
                reason: "log decay: p_* = 2, every admissible p is above threshold".into(),
            })
        }
    };
    if *p == threshold {
        return Err(Error::OpenProblemBoundary {
            p: p.to_string(),
            threshold: threshold.to_string(),
        });
    }
    if *p > threshold {
        return Ok(CertificateOutcome::NotApplicable {
            reason: format!("p = {p} > threshold {threshold}"),
        });
    }

    let nf = n as f64;
    let sf = to_f64(s);
    let pf = to_f64(p);
    let omega = match class {
        DecayClass::Slow(w) | DecayClass::UpperSlow(w) => to_f64(w),
        _ => 2.0 * sf,
    };
    let (step, mut trace) = match regime {
        CertificateRegime::SlowEq2s => (2.0 * sf, vec![nf]),
        CertificateRegime::FastQ1Prime => {
            // μ_1 ∈ (N−2s, N) close to N−2s; μ_2 ∈ ((N−2s)/2, N−2s) with
            // N > μ_2 + 2s > μ_1(p−1).
            let (a, b) = (nf - 2.0 * sf, nf);
            let (mu1, mu2) = seed_pair(a, b, |mu1| {
                let lo = ((nf - 2.0 * sf) / 2.0).max(mu1 * (pf - 1.0) - 2.0 * sf);
                let hi = nf - 2.0 * sf;
                (lo < hi).then(|| 0.5 * (lo + hi))
            });
            (2.0 * sf, vec![mu1, mu2])
        }
        CertificateRegime::SlowLt2s => {
            // μ_1 ∈ (N+2s−ω, N+2s) close to N+2s−ω; μ_2 ∈ (N, N+2s−ω) with
            // N + 2s > μ_2 + ω > μ_1(p−1).
            let (a, b) = (nf + 2.0 * sf - omega, nf + 2.0 * sf);
            let (mu1, mu2) = seed_pair(a, b, |mu1| {
                let lo = nf.max(mu1 * (pf - 1.0) - omega);
                let hi = nf + 2.0 * sf - omega;
                (lo < hi).then(|| 0.5 * (lo + hi))
            });
            (omega, vec![mu1, mu2])
        }
    };
    let mut steps = 0;
    while trace.last().unwrap() * pf >= nf {
        let last = *trace.last().unwrap();
        trace.push(last * (pf - 1.0) - step);
        steps += 1;
        assert!(steps < MAX_CERT_STEPS, "certificate iteration did not terminate");
    }
    let last = *trace.last().unwrap();
    let lo = ((nf - 2.0 * sf) / 2.0).max(last);
    let mu_star = 0.5 * (lo + nf / pf);
    Ok(CertificateOutcome::Certificate(Certificate {
        steps: trace.len() - 1,
        mu_trace: trace,
        terminal_mu_star: mu_star,
        regime,
        step,
        p: pf,
        n,
    }))
}

/// Seeds `μ_1 = a + 10^{-3}(b − a)` and bisects toward `a` until `second`
/// admits a `μ_2`. Below the threshold the constraint holds near `a`, so the
/// bisection terminates.
fn seed_pair(a: f64, b: f64, second: impl Fn(f64) -> Option<f64>) -> (f64, f64) {
    let mut mu1 = a + 1e-3 * (b - a);
    for _ in 0..200 {
        if let Some(mu2) = second(mu1) {
            return (mu1, mu2);
        }
        mu1 = 0.5 * (a + mu1);
    }
    panic!("seed bisection failed although p is below the threshold");
}

/// One side of a decay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    /// The exponent itself is attained.
    Exact(f64),
    /// Holds for every exponent strictly above the value.
    InfimumNotAttained(f64),
    /// Holds for every exponent strictly below the value.
    AnyBelow(f64),
}

impl Bound {
    pub fn value(&self) -> f64 {
        match *self {
            Bound::Exact(v) | Bound::InfimumNotAttained(v) | Bound::AnyBelow(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayCase {
    I,
    II,
    III,
    IV,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    pub lower_exponent: Bound,
    pub upper_exponent: Bound,
    pub case_label: DecayCase,
}

/// Two-sided decay prediction for solutions. `omega = None` means compact
/// support (ω = ∞).
pub fn predict_decay(n: u32, s: &Q, p: &Q, omega: Option<&Q>) -> Result<DecayPrediction> {
    check_p(n, s, p)?;
    let two_s = q2() * s;
    let nn = int(n);
    let fast = omega.is_none_or(|w| *w > two_s);
    let threshold = match omega {
        Some(w) if !fast => {
            if w.is_negative() {
                return Err(Error::Classification(format!("omega = {w} < 0")));
            }
            q_omega(n, s, w)?
        }
        _ => q_star(n, s)?,
    };
    if *p == threshold {
        return Err(Error::OpenProblemBoundary {
            p: p.to_string(),
            threshold: threshold.to_string(),
        });
    }
    if *p < threshold {
        return Err(Error::BelowThreshold {
            p: p.to_string(),
            threshold: threshold.to_string(),
        });
    }
    let f = |q: Q| to_f64(&q);
    let pred = if fast {
        let knee = (&nn - &two_s) * (p - q2());
        let beyond_knee = omega.is_none_or(|w| *w > knee);
        if beyond_knee {
            DecayPrediction {
                lower_exponent: Bound::Exact(f(&nn - &two_s)),
                upper_exponent: Bound::AnyBelow(f(&nn - &two_s)),
                case_label: DecayCase::I,
            }
        } else {
            DecayPrediction {
                lower_exponent: Bound::InfimumNotAttained(f(&nn - &two_s)),
                upper_exponent: Bound::Exact(f(&nn - &two_s)),
                case_label: DecayCase::II,
            }
        }
    } else {
        let w = omega.unwrap();
        if *w == two_s {
            DecayPrediction {
                lower_exponent: Bound::Exact(f(nn.clone())),
                upper_exponent: Bound::AnyBelow(f(nn)),
                case_label: DecayCase::III,
            }
        } else {
            let e = f(&nn + &two_s - w);
            DecayPrediction {
                lower_exponent: Bound::Exact(e),
                upper_exponent: Bound::Exact(e),
                case_label: DecayCase::IV,
            }
        }
    };
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(t: &str) -> Q {
        parse_rational(t).unwrap()
    }

    #[test]
    fn parsing_is_exact() {
        assert_eq!(q("0.4"), q("2/5"));
        assert_eq!(q("1.5e-3"), q("3/2000"));
        assert_eq!(q("-2.50"), q("-5/2"));
        assert_eq!(rational(0.4), q("2/5"));
        assert_eq!(rational(2.2), q("11/5"));
        assert_eq!(rational(1e-9), q("1/1000000000"));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(3, &q("1/2")).unwrap(), q("3"));
        assert_eq!(critical_exponent(1, &q("2/5")).unwrap(), q("10"));
        assert_eq!(critical_exponent(4, &q("3/4")).unwrap(), q("16/5"));
        assert!(critical_exponent(1, &q("0.6")).is_err());
    }

    #[test]
    fn threshold_examples() {
        let s = q("1/2");
        assert_eq!(threshold_p_star(3, &s, &DecayClass::Fast).unwrap(), q("5/2"));
        assert_eq!(
            threshold_p_star(3, &s, &DecayClass::Slow(q("1"))).unwrap(),
            q("7/3")
        );
        assert_eq!(threshold_p_star(3, &s, &DecayClass::Log).unwrap(), q("2"));
        assert!(matches!(
            threshold_p_star(3, &s, &DecayClass::Slow(q("1.5"))),
            Err(Error::Classification(_))
        ));
        // Endpoints of the slow family.
        assert_eq!(
            threshold_p_star(3, &s, &DecayClass::Slow(q("1"))).unwrap(),
            q("2") + q("1") / q("3")
        );
        assert_eq!(threshold_p_star(3, &s, &DecayClass::Slow(q("0"))).unwrap(), q("2"));
    }

    #[test]
    fn moser_examples() {
        let m = moser_sequence(3, &q("1/2"), &q("11/4"), 4).unwrap();
        assert_eq!(m.betas[1], q("9/8"));
        assert_eq!(m.d, q("-3/4"));
        // Hand evaluation: 2β_2 = 3·(9/8) − 3/4, and (3/2)²(1/4) + 3/4.
        assert_eq!(m.betas[2], q("21/16"));
        assert_eq!(m.closed_form(2), q("9/4") * q("1/4") + q("3/4"));
        assert!(m.betas.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn penalization_examples() {
        let s = q("1/2");
        let Penalization::Feasible(plan) =
            select_penalization(3, &s, &q("2.75"), &DecayClass::Fast).unwrap()
        else {
            panic!("expected feasible")
        };
        // Oracle: check the chain 2s < τ < θ < μ(p−2) < (N−2s)(p−2) numerically.
        assert!(1.0 < plan.tau && plan.tau < plan.theta);
        assert!(plan.theta < plan.mu * 0.75 && plan.mu * 0.75 < 1.5);
        assert!(plan.mu > 0.0 && plan.mu < 2.0);

        assert!(matches!(
            select_penalization(3, &s, &q("2.4"), &DecayClass::Fast).unwrap(),
            Penalization::Infeasible { .. }
        ));
        let Penalization::Feasible(plan) =
            select_penalization(3, &s, &q("2.2"), &DecayClass::Log).unwrap()
        else {
            panic!("expected feasible")
        };
        assert!(plan.mu > 3.0 && plan.mu < 4.0);
        assert_eq!(plan.case_tag, CaseTag::Q3Log);
        assert!(matches!(
            select_penalization(3, &s, &q("2.5"), &DecayClass::Fast),
            Err(Error::OpenProblemBoundary { .. })
        ));
    }

    #[test]
    fn certificate_worked_example() {
        let out = nonexistence_certificate(3, &q("1/2"), &q("2.2"), &DecayClass::UpperSlow(q("1")))
            .unwrap();
        let CertificateOutcome::Certificate(c) = out else {
            panic!("expected certificate")
        };
        // Oracle: hand evaluation of μ_{i+1} = 1.2 μ_i − 1 from μ_1 = 3.
        let expect = [3.0, 2.6, 2.12, 1.544, 0.8528];
        assert_eq!(c.mu_trace.len(), expect.len());
        for (a, b) in c.mu_trace.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(c.terminal_mu_star > 1.0 && c.terminal_mu_star < 3.0 / 2.2);
        assert!(c.check(0.5));
        assert_eq!(c.regime, CertificateRegime::SlowEq2s);
    }

    #[test]
    fn certificate_not_applicable_above_threshold() {
        let out = nonexistence_certificate(3, &q("1/2"), &q("2.4"), &DecayClass::UpperSlow(q("1")))
            .unwrap();
        assert!(matches!(out, CertificateOutcome::NotApplicable { .. }));
    }

    #[test]
    fn certificate_near_two_terminates() {
        for p in ["2.001", "2.01", "2.1", "2.3", "2.49"] {
            let out = nonexistence_certificate(3, &q("1/2"), &q(p), &DecayClass::Fast).unwrap();
            let CertificateOutcome::Certificate(c) = out else {
                panic!("expected certificate for p = {p}")
            };
            assert!(c.check(0.5), "{c:?}");
        }
    }

    #[test]
    fn decay_examples() {
        let s = q("1/2");
        let p = q("2.75");
        let d = predict_decay(3, &s, &p, Some(&q("0"))).unwrap();
        assert_eq!(d.case_label, DecayCase::IV);
        assert_eq!(d.lower_exponent, Bound::Exact(4.0));
        assert_eq!(d.upper_exponent, Bound::Exact(4.0));
        let d = predict_decay(3, &s, &p, Some(&q("1/2"))).unwrap();
        assert_eq!(d.lower_exponent.value(), 3.5);
        let d = predict_decay(3, &s, &p, Some(&q("5"))).unwrap();
        assert_eq!(d.case_label, DecayCase::I);
        assert_eq!(d.lower_exponent, Bound::Exact(2.0));
        assert_eq!(d.upper_exponent, Bound::AnyBelow(2.0));
        let d = predict_decay(3, &s, &p, Some(&q("1.2"))).unwrap();
        assert_eq!(d.case_label, DecayCase::II);
        let d = predict_decay(3, &s, &p, Some(&q("1"))).unwrap();
        assert_eq!(d.case_label, DecayCase::III);
        assert_eq!(d.lower_exponent, Bound::Exact(3.0));
        let d = predict_decay(3, &s, &p, None).unwrap();
        assert_eq!(d.case_label, DecayCase::I);
        assert!(matches!(
            predict_decay(3, &s, &q("2.2"), Some(&q("1"))),
            Err(Error::BelowThreshold { .. })
        ));
    }

    fn admissible() -> impl Strategy<Value = (u32, Q, Q, Q)> {
        (1u32..=5, 1u32..=99, 1u32..=999, 0u32..=1000).prop_filter_map(
            "N > 2s",
            |(n, s100, pt, wt)| {
                let s = Q::new(BigInt::from(s100), BigInt::from(100));
                let crit = critical_exponent(n, &s).ok()?;
                let p = q2() + (&crit - q2()) * Q::new(BigInt::from(pt), BigInt::from(1000));
                let w = q2() * &s * Q::new(BigInt::from(wt), BigInt::from(1000));
                Some((n, s, p, w))
            },
        )
    }

    proptest! {
        #[test]
        fn duality_and_chain_margins((n, s, p, w) in admissible()) {
            for class in [DecayClass::Fast, DecayClass::Slow(w.clone())] {
                let th = threshold_p_star(n, &s, &class).unwrap();
                prop_assert!(th >= q2());
                prop_assert!(th < critical_exponent(n, &s).unwrap());
                if p == th { continue; }
                let sel = select_penalization(n, &s, &p, &class).unwrap();
                let cls_cert = match &class {
                    DecayClass::Slow(x) => DecayClass::UpperSlow(x.clone()),
                    c => c.clone(),
                };
                let cert = nonexistence_certificate(n, &s, &p, &cls_cert).unwrap();
                let feasible = matches!(sel, Penalization::Feasible(_));
                let certified = matches!(cert, CertificateOutcome::Certificate(_));
                prop_assert_eq!(feasible, p > th);
                prop_assert!(!(feasible && certified));
                if w.is_positive() || class == DecayClass::Fast {
                    prop_assert_eq!(certified, p < th);
                }
                if let Penalization::Feasible(plan) = sel {
                    let chain = Chain::for_class(n, &s, &class).unwrap();
                    prop_assert!(chain.margin(to_f64(&p), &plan) >= CHAIN_MARGIN);
                }
                if let CertificateOutcome::Certificate(c) = cert {
                    prop_assert!(c.check(to_f64(&s)));
                }
            }
        }

        #[test]
        fn moser_closed_form_matches((n, s, p, _w) in admissible()) {
            let m = moser_sequence(n, &s, &p, 24).unwrap();
            for (i, b) in m.betas.iter().enumerate() {
                prop_assert_eq!(b, &m.closed_form(i));
            }
            prop_assert!(m.betas.windows(2).all(|x| x[1] > x[0]));
        }

        #[test]
        fn case_iv_bounds_coincide((n, s, p, w) in admissible()) {
            if w < q2() * &s {
                if let Ok(d) = predict_decay(n, &s, &p, Some(&w)) {
                    prop_assert_eq!(d.case_label, DecayCase::IV);
                    prop_assert_eq!(d.lower_exponent, d.upper_exponent);
                }
            }
        }
    }
}
