//! Problem parameters, radial potential families and admissibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{self, DecayClass};

/// `(N, s, p, eps)` for `eps^{2s} (-Δ)^s u + V u = u^{p-1}` in `R^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub n: u32,
    pub s: f64,
    pub p: f64,
    pub eps: f64,
}

impl ProblemParams {
    pub fn new(n: u32, s: f64, p: f64, eps: f64) -> Self {
        ProblemParams { n, s, p, eps }
    }

    /// `2_s^* = 2N/(N-2s)`, or infinity when `N <= 2s`.
    pub fn critical_exponent(&self) -> f64 {
        let n = self.n as f64;
        if n > 2.0 * self.s {
            2.0 * n / (n - 2.0 * self.s)
        } else {
            f64::INFINITY
        }
    }
}

/// Radial potential families. Every family except `Constant` and
/// `Tabulated` carries the well factor `1 + delta·min((r/R_Λ)², 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    Constant { value: f64 },
    /// `(1 + delta·min((r/R_Λ)², 1))·(1 + r²)^{-ω/2}`.
    PowerDecay { delta: f64 },
    /// `(1 + delta·min((r/R_Λ)², 1)) / ln(e + r²)`.
    LogDecay { delta: f64 },
    /// Well factor times a smooth cutoff falling from 1 at `0.9·r_cut` to 0 at `r_cut`.
    CompactSupport { delta: f64, r_cut: f64 },
    /// Piecewise-linear table with strictly increasing radii; beyond the last
    /// radius the value is continued by the power law `r^{-ω}`.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Decay rate; `f64::INFINITY` for compact support.
    pub omega: f64,
    /// Bounds for `(1 + r^ω)·V(r)` on `r >= R_Λ` (power-decay kind).
    pub c_low: f64,
    pub c_high: f64,
    /// Radius of the well `Λ = B_{R_Λ}`.
    pub well_radius: f64,
}

/// A potential value and whether it came from table extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    pub extrapolated: bool,
}

fn smootherstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

impl Potential {
    pub fn constant(value: f64) -> Self {
        Potential {
            kind: PotentialKind::Constant { value },
            omega: 0.0,
            c_low: value,
            c_high: 2.0 * value,
            well_radius: 1.0,
        }
    }

    /// The built-in well family with `Λ = B_{well_radius}`; `c_low`/`c_high`
    /// are measured on a dense logarithmic sample of `[R_Λ, 10^8]`.
    pub fn power_decay(omega: f64, delta: f64, well_radius: f64) -> Self {
        let mut pot = Potential {
            kind: PotentialKind::PowerDecay { delta },
            omega,
            c_low: 0.0,
            c_high: 0.0,
            well_radius,
        };
        let (lo, hi) = pot.sampled_decay_bounds();
        pot.c_low = lo;
        pot.c_high = hi;
        pot
    }

    pub fn log_decay(delta: f64, well_radius: f64) -> Self {
        Potential {
            kind: PotentialKind::LogDecay { delta },
            omega: 0.0,
            c_low: 0.0,
            c_high: 0.0,
            well_radius,
        }
    }

    pub fn compact_support(delta: f64, well_radius: f64, r_cut: f64) -> Self {
        Potential {
            kind: PotentialKind::CompactSupport { delta, r_cut },
            omega: f64::INFINITY,
            c_low: 0.0,
            c_high: 0.0,
            well_radius,
        }
    }

    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>, omega: f64, well_radius: f64) -> Self {
        Potential {
            kind: PotentialKind::Tabulated { radii, values },
            omega,
            c_low: 0.0,
            c_high: 0.0,
            well_radius,
        }
    }

    /// Smallest `delta` for which the well family satisfies the well condition
    /// with `Λ = B_{R_Λ}`: `(1 + delta)(1 + R_Λ²)^{-ω/2} > 1`.
    pub fn minimal_delta(omega: f64, well_radius: f64) -> f64 {
        (1.0 + well_radius * well_radius).powf(omega / 2.0) - 1.0
    }

    fn well_factor(&self, delta: f64, r: f64) -> f64 {
        let x = r / self.well_radius;
        1.0 + delta * (x * x).min(1.0)
    }

    pub fn eval(&self, r: f64) -> PotentialValue {
        let plain = |value| PotentialValue {
            value,
            extrapolated: false,
        };
        match &self.kind {
            PotentialKind::Constant { value } => plain(*value),
            PotentialKind::PowerDecay { delta } => {
                plain(self.well_factor(*delta, r) * (1.0 + r * r).powf(-self.omega / 2.0))
            }
            PotentialKind::LogDecay { delta } => {
                plain(self.well_factor(*delta, r) / (std::f64::consts::E + r * r).ln())
            }
            PotentialKind::CompactSupport { delta, r_cut } => {
                let x = (r - 0.9 * r_cut) / (0.1 * r_cut);
                plain(self.well_factor(*delta, r) * (1.0 - smootherstep(x)))
            }
            PotentialKind::Tabulated { radii, values } => {
                let last = radii.len() - 1;
                if r > radii[last] {
                    return PotentialValue {
                        value: values[last] * (r / radii[last]).powf(-self.omega),
                        extrapolated: true,
                    };
                }
                if r <= radii[0] {
                    return plain(values[0]);
                }
                let k = radii.partition_point(|&x| x <= r).min(last);
                let (r0, r1) = (radii[k - 1], radii[k]);
                let t = (r - r0) / (r1 - r0);
                plain(values[k - 1] * (1.0 - t) + values[k] * t)
            }
        }
    }

    fn sampled_decay_bounds(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let a = self.well_radius.ln();
        let b = 1e8f64.ln();
        for k in 0..=4000 {
            let r = (a + (b - a) * k as f64 / 4000.0).exp();
            let v = (1.0 + r.powf(self.omega)) * self.eval(r).value;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// The decay class used by the exponent algebra. `omega` is taken as an
    /// exact decimal rational.
    pub fn decay_class(&self, s: f64) -> DecayClass {
        match &self.kind {
            PotentialKind::LogDecay { .. } => DecayClass::Log,
            PotentialKind::CompactSupport { .. } => DecayClass::Fast,
            _ if self.omega > 2.0 * s => DecayClass::Fast,
            _ => DecayClass::Slow(exponents::rational(self.omega)),
        }
    }
}

/// Free function form of [`Potential::eval`].
pub fn eval_potential(pot: &Potential, r: f64) -> PotentialValue {
    pot.eval(r)
}

/// Outcome of the well condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub holds: bool,
    /// Sampled infimum of `V` over `[0, R_Λ)`.
    pub v0: f64,
    pub argmin: f64,
    pub boundary_value: f64,
}

/// Checks `0 < inf_{[0,R_Λ)} V < V(R_Λ)` on `sample_count` equispaced radii.
pub fn verify_condition_v(pot: &Potential, sample_count: usize) -> Result<ConditionReport> {
    if sample_count < 16 {
        return Err(Error::Inadmissible(format!(
            "sample_count {sample_count} < 16"
        )));
    }
    let rl = pot.well_radius;
    let (mut v0, mut argmin) = (f64::INFINITY, 0.0);
    for k in 0..sample_count {
        let r = rl * k as f64 / sample_count as f64;
        let v = pot.eval(r).value;
        if !v.is_finite() {
            return Err(Error::NonFinitePotential(r));
        }
        if v < v0 {
            v0 = v;
            argmin = r;
        }
    }
    let boundary_value = pot.eval(rl).value;
    if !boundary_value.is_finite() {
        return Err(Error::NonFinitePotential(rl));
    }
    let holds = v0 > 0.0 && v0 < boundary_value * (1.0 - 1e-12);
    Ok(ConditionReport {
        holds,
        v0,
        argmin,
        boundary_value,
    })
}

/// List of violated standing assumptions; empty means admissible.
/// The well condition is reported under `warnings`: a potential without a well
/// (e.g. a constant) is still a legitimate problem, it just does not pin
/// a concentration point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(params: &ProblemParams, pot: &Potential) -> ValidationReport {
    let mut v = Vec::new();
    let mut warnings = Vec::new();
    let n = params.n as f64;
    let s = params.s;
    if params.n < 1 {
        v.push("N >= 1 fails".to_string());
    }
    if !(s > 0.0 && s < 1.0) {
        v.push(format!("0 < s < 1 fails (s = {s})"));
    }
    if !(n > 2.0 * s) {
        v.push(format!("N > 2s fails ({} <= {})", params.n, 2.0 * s));
    } else {
        let crit = params.critical_exponent();
        if !(params.p > 2.0) {
            v.push(format!("p > 2 fails (p = {})", params.p));
        }
        if !(params.p < crit) {
            v.push(format!("p < 2_s^* = {crit} fails (p = {})", params.p));
        }
    }
    if !(params.eps > 0.0) {
        v.push(format!("eps > 0 fails (eps = {})", params.eps));
    }

    if let PotentialKind::Tabulated { radii, values } = &pot.kind {
        if radii.len() < 2 || radii.len() != values.len() {
            v.push("tabulated potential needs >= 2 matching (radius, value) rows".into());
            return ValidationReport { violations: v, warnings };
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            v.push("tabulated radii must be strictly increasing".into());
        }
    }
    if !(pot.well_radius > 0.0) {
        v.push("well radius R_Λ > 0 fails".into());
        return ValidationReport { violations: v, warnings };
    }

    let probe: Vec<f64> = (0..=400)
        .map(|k| pot.well_radius * 1e-3 * 1e9f64.powf(k as f64 / 400.0))
        .chain(std::iter::once(0.0))
        .collect();
    if probe.iter().any(|&r| {
        let x = pot.eval(r).value;
        !x.is_finite() || x < 0.0
    }) {
        v.push("V continuous, nonnegative and finite fails".into());
    }

    match verify_condition_v(pot, 4096) {
        Ok(rep) if !rep.holds => warnings.push(format!(
            "condition (V) fails: inf over [0,R_Λ) = {} not strictly between 0 and V(R_Λ) = {}",
            rep.v0, rep.boundary_value
        )),
        Err(e) => v.push(format!("condition (V) check failed: {e}")),
        _ => {}
    }

    match &pot.kind {
        PotentialKind::PowerDecay { .. } => {
            let rel = 1e-9;
            for &r in probe.iter().filter(|&&r| r >= pot.well_radius) {
                let x = (1.0 + r.powf(pot.omega)) * pot.eval(r).value;
                if x < pot.c_low * (1.0 - rel) || x > pot.c_high * (1.0 + rel) {
                    v.push(format!(
                        "(1+r^ω)V(r) = {x} outside [{}, {}] at r = {r}",
                        pot.c_low, pot.c_high
                    ));
                    break;
                }
            }
        }
        PotentialKind::LogDecay { .. } => {
            let inf = probe
                .iter()
                .map(|&r| pot.eval(r).value * (std::f64::consts::E + r * r).ln())
                .fold(f64::INFINITY, f64::min);
            if !(inf > 0.0) {
                v.push("inf V(r)·log(e + r²) > 0 fails".into());
            }
        }
        PotentialKind::CompactSupport { r_cut, .. } if *r_cut <= pot.well_radius => {
            v.push("compact support needs r_cut > R_Λ".into());
        }
        _ => {}
    }
    ValidationReport {
        violations: v,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well(omega: f64) -> Potential {
        Potential::power_decay(omega, 1.5, 1.0)
    }

    #[test]
    fn admissible_examples() {
        let rep = validate(&ProblemParams::new(3, 0.5, 2.5, 0.1), &well(0.5));
        assert!(rep.is_admissible(), "{:?}", rep.violations);
        assert!(rep.warnings.is_empty());
        let rep = validate(
            &ProblemParams::new(3, 0.5, 2.5, 0.1),
            &Potential::constant(1.0),
        );
        assert!(rep.is_admissible(), "{:?}", rep.violations);
    }

    #[test]
    fn constant_potential_fails_condition_v() {
        let rep = validate(
            &ProblemParams::new(3, 0.5, 2.5, 0.1),
            &Potential::constant(1.0),
        );
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.warnings[0].contains("condition (V)"));
        let cv = verify_condition_v(&Potential::constant(1.0), 64).unwrap();
        assert!(!cv.holds);
    }

    #[test]
    fn dimension_and_exponent_violations() {
        let pot = well(0.5);
        let rep = validate(&ProblemParams::new(1, 0.6, 3.0, 0.1), &pot);
        assert!(rep.violations.iter().any(|m| m.starts_with("N > 2s fails")));
        let rep = validate(&ProblemParams::new(3, 0.5, 3.2, 0.1), &pot);
        assert!(rep.violations.iter().any(|m| m.starts_with("p < 2_s^* = 3 fails")));
    }

    #[test]
    fn validate_is_idempotent() {
        let pot = well(0.3);
        let p = ProblemParams::new(2, 0.9, 2.1, 0.0);
        assert_eq!(validate(&p, &pot), validate(&p, &pot));
    }

    #[test]
    fn power_decay_closed_form() {
        let pot = Potential::power_decay(1.0, 0.0, 1.0);
        assert_eq!(pot.eval(0.0).value, 1.0);
        let r = 1e7;
        assert!((pot.eval(r).value * r - 1.0).abs() < 1e-9);
        assert_eq!(Potential::constant(1.0).eval(7.0).value, 1.0);
    }

    #[test]
    fn condition_v_for_the_well_family() {
        let pot = well(0.5);
        let rep = verify_condition_v(&pot, 1000).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.v0, 1.0);
        assert_eq!(rep.argmin, 0.0);
        // Oracle: V(1) = 2.5 / 2^{1/4}
        assert!((rep.boundary_value - 2.5 / 2f64.powf(0.25)).abs() < 1e-12);
        assert!(Potential::minimal_delta(0.5, 1.0) < 1.5);
    }

    #[test]
    fn condition_v_witness_locates_off_center_well() {
        let radii: Vec<f64> = (0..=200).map(|k| k as f64 / 100.0).collect();
        let values: Vec<f64> = radii.iter().map(|r| 1.0 + 4.0 * (r - 0.5) * (r - 0.5)).collect();
        let pot = Potential::tabulated(radii, values, 1.0, 1.0);
        let rep = verify_condition_v(&pot, 1024).unwrap();
        assert!(rep.holds);
        assert!((rep.argmin - 0.5).abs() < 2e-3);
        // Oracle: brute-force dense scan of the same interpolant.
        let dense = (0..100_000)
            .map(|k| pot.eval(k as f64 / 100_000.0).value)
            .fold(f64::INFINITY, f64::min);
        assert!((dense - rep.v0).abs() < 1e-5);
    }

    #[test]
    fn tabulated_extrapolates_with_flag() {
        let pot = Potential::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 2.0], 2.0, 1.0);
        let v = pot.eval(4.0);
        assert!(v.extrapolated);
        assert!((v.value - 0.5).abs() < 1e-15);
        assert!(!pot.eval(1.5).extrapolated);
        assert!((pot.eval(1.5).value - 2.5).abs() < 1e-15);
    }

    #[test]
    fn decay_bounds_hold_on_samples() {
        for omega in [0.0, 0.4, 1.0, 3.0] {
            let pot = well(omega);
            for k in 0..200 {
                let r = 1.0 + k as f64 * 7.3;
                let x = (1.0 + r.powf(omega)) * pot.eval(r).value;
                assert!(x >= pot.c_low * (1.0 - 1e-9) && x <= pot.c_high * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn compact_support_is_continuous_and_vanishes() {
        let pot = Potential::compact_support(1.0, 1.0, 10.0);
        assert_eq!(pot.eval(10.0).value, 0.0);
        assert_eq!(pot.eval(20.0).value, 0.0);
        assert!((pot.eval(9.0).value - 2.0).abs() < 1e-15);
        let jump = (pot.eval(9.5 + 1e-9).value - pot.eval(9.5).value).abs();
        assert!(jump < 1e-7);
    }
}
