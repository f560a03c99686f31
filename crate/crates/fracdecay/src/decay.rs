//! Tail-exponent measurement, regime verdicts and the comparison-function
//! inequalities behind the decay estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{Bound, DecayCase, DecayPrediction, PenalizationPlan};
use crate::fraclap;
use crate::model::{Potential, ProblemParams};
use crate::solver::RadialProfile;

/// Exponent tolerance for end-to-end runs.
pub const END_TO_END_TOL: f64 = 0.15;
/// Exponent tolerance for pure-kernel slope checks.
pub const KERNEL_TOL: f64 = 0.05;
/// Fits with a lower coefficient of determination are not judged.
pub const MIN_R_SQUARED: f64 = 0.995;

/// `[max(4 R_Λ, 20), R_max/2]`.
pub fn default_window(well_radius: f64, r_max: f64) -> (f64, f64) {
    ((4.0 * well_radius).max(20.0), 0.5 * r_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    MatchesCaseI,
    MatchesCaseIi,
    MatchesCaseIii,
    MatchesCaseIv,
    Mismatch,
    UnresolvedTail,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::MatchesCaseI => "matches_case_i",
            Verdict::MatchesCaseIi => "matches_case_ii",
            Verdict::MatchesCaseIii => "matches_case_iii",
            Verdict::MatchesCaseIv => "matches_case_iv",
            Verdict::Mismatch => "mismatch",
            Verdict::UnresolvedTail => "unresolved_tail",
        }
    }
}

/// Least-squares fit of `log u` against `log r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub fitted_gamma: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub fitted_gamma: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub predicted: DecayPrediction,
    pub verdict: Verdict,
}

/// Fits `u ≈ C r^{−γ}` on the grid nodes inside `window`.
pub fn fit_tail(profile: &RadialProfile, window: (f64, f64)) -> Result<TailFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi <= 0.5 * profile.grid.r_max) {
        return Err(Error::Inadmissible(format!(
            "fit window ({lo}, {hi}) must satisfy 0 < r_lo < r_hi <= R_max/2 = {}",
            0.5 * profile.grid.r_max
        )));
    }
    let mut pts = Vec::new();
    for (&r, &u) in profile.grid.nodes.iter().zip(&profile.values) {
        if r >= lo && r <= hi {
            if !(u > 0.0) {
                return Err(Error::NonPositive);
            }
            pts.push((r.ln(), u.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::Inadmissible(format!(
            "fit window ({lo}, {hi}) holds {} nodes; need 3",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    Ok(TailFit {
        fitted_gamma: -slope,
        fit_window: window,
        r_squared,
        samples: pts.len(),
    })
}

/// Reference exponent of a prediction and whether its band is one-sided.
fn reference(pred: &DecayPrediction) -> (f64, bool) {
    let one_sided = matches!(pred.upper_exponent, Bound::AnyBelow(_));
    (pred.upper_exponent.value(), one_sided)
}

/// Verdict for a fitted exponent: two-sided cases need `|γ − e| ≤ tol`,
/// one-sided cases need `γ ∈ [e − tol, e]`.
pub fn compare_regimes(fitted_gamma: f64, r_squared: f64, pred: &DecayPrediction, tol: f64) -> Verdict {
    if !(r_squared >= MIN_R_SQUARED) {
        return Verdict::UnresolvedTail;
    }
    let (e, one_sided) = reference(pred);
    let ok = if one_sided {
        fitted_gamma >= e - tol && fitted_gamma <= e
    } else {
        (fitted_gamma - e).abs() <= tol
    };
    if !ok {
        return Verdict::Mismatch;
    }
    match pred.case_label {
        DecayCase::I => Verdict::MatchesCaseI,
        DecayCase::II => Verdict::MatchesCaseIi,
        DecayCase::III => Verdict::MatchesCaseIii,
        DecayCase::IV => Verdict::MatchesCaseIv,
    }
}

/// Tail fit plus verdict.
pub fn report(profile: &RadialProfile, pred: &DecayPrediction, window: (f64, f64), tol: f64) -> Result<DecayReport> {
    let fit = fit_tail(profile, window)?;
    Ok(DecayReport {
        fitted_gamma: fit.fitted_gamma,
        fit_window: fit.fit_window,
        r_squared: fit.r_squared,
        predicted: *pred,
        verdict: compare_regimes(fit.fitted_gamma, fit.r_squared, pred, tol),
    })
}

/// Lower-bound exponents to test: the exact one, or the two nearest
/// members `e + 0.1`, `e + 0.5` when the infimum is not attained.
pub fn lower_bound_exponents(pred: &DecayPrediction) -> Vec<f64> {
    match pred.lower_exponent {
        Bound::Exact(e) => vec![e],
        Bound::InfimumNotAttained(e) => vec![e + 0.1, e + 0.5],
        Bound::AnyBelow(e) => vec![e],
    }
}

/// `min` and `max` of `u / w_μ` over the nodes in `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub mu: f64,
    pub c: f64,
    pub c_max: f64,
}

pub fn verify_lower_bound(profile: &RadialProfile, mu: f64, window: (f64, f64)) -> LowerBoundReport {
    let (mut c, mut c_max) = (f64::INFINITY, 0.0f64);
    for (&r, &u) in profile.grid.nodes.iter().zip(&profile.values) {
        if r >= window.0 && r <= window.1 {
            let ratio = u / (1.0 + r * r).powf(-mu / 2.0);
            c = c.min(ratio);
            c_max = c_max.max(ratio);
        }
    }
    LowerBoundReport { mu, c, c_max }
}

/// Normalized super-solution margins in original variables,
/// `m(y) = [F(y/ε) + ½V(y) w_μ(y/ε) − P_ε(y) w_μ(y/ε)] / (ε^θ y^{−τ} w_μ(y/ε))`
/// with `F = (−Δ)^s w_μ` and `P_ε = ε^θ y^{−τ}` off the well. The sign of
/// `m` is the sign of the inequality's left side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub eps: f64,
    pub margins: Vec<(f64, f64)>,
    /// Smallest sampled radius beyond which every margin is nonnegative.
    pub onset: Option<f64>,
    /// Minimum margin at radii `≥ onset` (`NaN` without an onset).
    pub min_margin: f64,
    /// Radius of the most negative margin overall, if any is negative.
    pub worst: Option<(f64, f64)>,
}

impl SupersolutionReport {
    pub fn holds_beyond_onset(&self) -> bool {
        self.onset.is_some() && self.min_margin >= 0.0
    }

    /// Minimum margin over sampled radii `≥ r`.
    pub fn min_from(&self, r: f64) -> f64 {
        self.margins
            .iter()
            .filter(|(y, _)| *y >= r)
            .fold(f64::INFINITY, |a, &(_, m)| a.min(m))
    }
}

pub fn verify_supersolution(
    plan: &PenalizationPlan,
    params: &ProblemParams,
    pot: &Potential,
    radii: &[f64],
) -> Result<SupersolutionReport> {
    let eps = params.eps;
    let mu = plan.mu;
    let margins: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|&y| {
            let x = y / eps;
            let f = fraclap::fraclap_w_pointwise(params.n, params.s, mu, x)?;
            let w = (1.0 + x * x).powf(-mu / 2.0);
            let pen = eps.powf(plan.theta) * y.powf(-plan.tau);
            let active = if y >= pot.well_radius { pen } else { 0.0 };
            let lhs = f + 0.5 * pot.eval(y).value * w - active * w;
            Ok((y, lhs / (pen * w)))
        })
        .collect::<Result<_>>()?;
    let mut onset = None;
    for &(y, m) in margins.iter().rev() {
        if m < 0.0 {
            break;
        }
        onset = Some(y);
    }
    let min_margin = match onset {
        Some(r) => margins.iter().filter(|(y, _)| *y >= r).fold(f64::INFINITY, |a, &(_, m)| a.min(m)),
        None => f64::NAN,
    };
    let worst = margins
        .iter()
        .copied()
        .filter(|&(_, m)| m < 0.0)
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(SupersolutionReport {
        eps,
        margins,
        onset,
        min_margin,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::RadialGrid;

    fn grid() -> RadialGrid {
        RadialGrid::new(512, 2.0, 1e3).unwrap()
    }

    fn pred(lower: Bound, upper: Bound, case_label: DecayCase) -> DecayPrediction {
        DecayPrediction {
            lower_exponent: lower,
            upper_exponent: upper,
            case_label,
        }
    }

    #[test]
    fn exact_powers_are_recovered() {
        for &g in &[0.5, 1.3, 2.0, 4.7, 6.0] {
            let p = RadialProfile::from_fn(&grid(), |r| r.powf(-g), g);
            let fit = fit_tail(&p, (20.0, 500.0)).unwrap();
            assert!((fit.fitted_gamma - g).abs() < 1e-10);
            assert!((fit.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_and_perturbed_powers() {
        let w = RadialProfile::from_fn(&grid(), |r| (1.0 + r * r).powf(-0.9), 1.8);
        assert!((fit_tail(&w, (50.0, 500.0)).unwrap().fitted_gamma - 1.8).abs() < 0.01);
        let p = RadialProfile::from_fn(&grid(), |r| r.powi(-2) * (1.0 + 0.1 * r.ln().sin()), 2.0);
        let fit = fit_tail(&p, (20.0, 500.0)).unwrap();
        assert!(fit.r_squared < 1.0);
        assert!((fit.fitted_gamma - 2.0).abs() < 0.1);
    }

    #[test]
    fn nonpositive_window_is_rejected() {
        let p = RadialProfile::from_fn(&grid(), |r| 1.0 - r / 100.0, 1.0);
        assert_eq!(fit_tail(&p, (20.0, 500.0)), Err(Error::NonPositive));
    }

    #[test]
    fn regime_bands() {
        let iv = pred(Bound::Exact(1.4), Bound::Exact(1.4), DecayCase::IV);
        assert_eq!(compare_regimes(1.41, 1.0, &iv, 0.15), Verdict::MatchesCaseIv);
        assert_eq!(compare_regimes(3.0, 1.0, &iv, 0.15), Verdict::Mismatch);
        let i = pred(Bound::Exact(2.0), Bound::AnyBelow(2.0), DecayCase::I);
        assert_eq!(compare_regimes(1.95, 1.0, &i, 0.15), Verdict::MatchesCaseI);
        assert_eq!(compare_regimes(2.05, 1.0, &i, 0.15), Verdict::Mismatch);
        assert_eq!(compare_regimes(1.95, 0.9, &i, 0.15), Verdict::UnresolvedTail);
    }

    #[test]
    fn critical_weight_lands_in_case_i_band() {
        // N = 3, s = 1/2: the critical weight decays like r^{-(N-2s)} = r^{-2}.
        let p = RadialProfile::from_fn(&grid(), |r| (1.0 + r * r).powf(-1.0), 2.0);
        let rep = report(
            &p,
            &pred(Bound::Exact(2.0), Bound::AnyBelow(2.0), DecayCase::I),
            (20.0, 500.0),
            KERNEL_TOL,
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::MatchesCaseI);
    }

    #[test]
    fn lower_bound_constants() {
        let w2 = RadialProfile::from_fn(&grid(), |r| (1.0 + r * r).powf(-1.0), 2.0);
        let c = verify_lower_bound(&w2, 2.0, (20.0, 500.0));
        assert!((c.c - 1.0).abs() < 1e-12 && (c.c_max - 1.0).abs() < 1e-12);
        let w3 = RadialProfile::from_fn(&grid(), |r| (1.0 + r * r).powf(-1.5), 3.0);
        let small = verify_lower_bound(&w3, 2.0, (20.0, 100.0)).c;
        let smaller = verify_lower_bound(&w3, 2.0, (20.0, 500.0)).c;
        assert!(smaller < small && smaller < 0.01);
    }
}
