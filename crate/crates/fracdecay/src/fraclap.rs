//! The fractional Laplacian `(−Δ)^s u(x) = 2 P.V.∫(u(x) − u(y))|x − y|^{−N−2s} dy`
//! on radial functions, the power-weight constant `A_μ`, far-field regimes
//! and the Gagliardo seminorm of `w_μ = (1 + |x|²)^{−μ/2}`.
//!
//! Pointwise values use spherical means: for radial `u`,
//! `(−Δ)^s u(r) = 2|S^{N−1}| ∫₀^∞ (u(r) − M_ρu(r)) ρ^{−1−2s} dρ` where `M_ρu`
//! is the mean of `u` over the sphere of radius `ρ` around a point at radius
//! `r`. Odd terms cancel exactly inside the mean, so no principal value is
//! needed; the integrand behaves like `ρ^{1−2s}` at the origin.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernel::{far_coefficient, k_gap, sphere_area};
use crate::quad::{self, Estimate, Tol};

/// A radial function `u(|x|)` on `ℝ^N`, smooth and even at the origin and
/// decaying at infinity.
pub trait RadialFunction: Sync {
    fn value(&self, r: f64) -> f64;

    /// `Δu` at radius `r` in `ℝ^n`. The default uses central differences.
    fn laplacian(&self, n: u32, r: f64) -> f64 {
        let h = 1e-3 * self.length_scale();
        let u0 = self.value(r);
        let up = self.value(r + h);
        let um = self.value((r - h).abs());
        let d2 = (up - 2.0 * u0 + um) / (h * h);
        if r < 2.0 * h {
            // u'(r)/r → u''(0) at the origin.
            return n as f64 * d2;
        }
        d2 + (n as f64 - 1.0) * (up - um) / (2.0 * h * r)
    }

    /// Scale over which the function varies near the origin.
    fn length_scale(&self) -> f64 {
        1.0
    }
}

/// `w_μ(x) = (1 + |x|²)^{−μ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerWeight {
    pub mu: f64,
}

impl RadialFunction for PowerWeight {
    fn value(&self, r: f64) -> f64 {
        (1.0 + r * r).powf(-0.5 * self.mu)
    }

    fn laplacian(&self, n: u32, r: f64) -> f64 {
        let q = 1.0 + r * r;
        let mu = self.mu;
        -mu * n as f64 * q.powf(-0.5 * mu - 1.0) + mu * (mu + 2.0) * r * r * q.powf(-0.5 * mu - 2.0)
    }
}

/// `x ↦ w_μ(λx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPowerWeight {
    pub mu: f64,
    pub lambda: f64,
}

impl RadialFunction for ScaledPowerWeight {
    fn value(&self, r: f64) -> f64 {
        PowerWeight { mu: self.mu }.value(self.lambda * r)
    }

    fn laplacian(&self, n: u32, r: f64) -> f64 {
        self.lambda * self.lambda * PowerWeight { mu: self.mu }.laplacian(n, self.lambda * r)
    }

    fn length_scale(&self) -> f64 {
        1.0 / self.lambda
    }
}

/// `e^{−|x|²/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian;

impl RadialFunction for Gaussian {
    fn value(&self, r: f64) -> f64 {
        (-0.5 * r * r).exp()
    }

    fn laplacian(&self, n: u32, r: f64) -> f64 {
        (r * r - n as f64) * (-0.5 * r * r).exp()
    }
}

/// Below `patch(s)·ℓ` the defect is replaced by its quadratic Taylor model.
/// The radius keeps roundoff amplified by `ρ^{−1−2s}` below ~1e−10 relative.
fn patch(s: f64) -> f64 {
    3e-5f64.max(10f64.powf(-3.0 / s))
}
/// Quadrature runs out to `FAR·max(r, ℓ)`; beyond that an analytic tail.
const FAR: f64 = 1e6;
/// Relative accuracy demanded of pointwise values.
const REQUESTED_REL: f64 = 1e-8;

fn inner_tol(abs: f64) -> Tol {
    Tol {
        abs,
        rel: 1e-13,
        max_panels: 400,
    }
}

/// Breakpoints on `[lo, hi]` at `ℓ·2^k`, resolving a feature of size `ℓ`
/// at the origin and geometric decay beyond it.
fn origin_breaks(lo: f64, hi: f64, ell: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    let mut x = ell * 2f64.powi(-8);
    while x < hi {
        if x > lo {
            pts.push(x);
        }
        x *= 2.0;
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts
}

/// Mean of `g(|y|)` over the sphere of radius `rho` centred at a point at
/// distance `r` from the origin, in `ℝ^n`. `gscale` bounds `|g|` and sets
/// the absolute accuracy.
pub fn spherical_mean<G: Fn(f64) -> f64>(
    n: u32,
    r: f64,
    rho: f64,
    ell: f64,
    gscale: f64,
    g: &G,
) -> f64 {
    if r == 0.0 || rho == 0.0 {
        return g(r + rho);
    }
    match n {
        1 => 0.5 * (g(r + rho) + g((r - rho).abs())),
        3 => {
            let lo = (r - rho).abs();
            let hi = r + rho;
            let h = |t: f64| g(t) * t;
            let br = origin_breaks(lo, hi, ell);
            let tol = inner_tol(1e-17 * gscale * 2.0 * r * rho);
            quad::adaptive(&h, &br, tol).value / (2.0 * r * rho)
        }
        _ => {
            let d2 = (r - rho) * (r - rho);
            let c = 4.0 * r * rho;
            let h = |phi: f64| {
                let cs = (0.5 * phi).cos();
                g((d2 + c * cs * cs).sqrt()) * phi.sin().powi(n as i32 - 2)
            };
            let w = (0.5 * ell / (r * rho).sqrt()).min(1.0);
            let br = quad::graded_breaks(0.0, std::f64::consts::PI, std::f64::consts::PI, w);
            let ratio = sphere_area(n - 1) / sphere_area(n);
            ratio * quad::adaptive(&h, &br, inner_tol(1e-17 * gscale)).value
        }
    }
}

/// `∫₀^∞ D(ρ) ρ^{−1−2s} dρ`, split at `cut` into near and far parts.
///
/// `c2` is the Taylor coefficient `D(ρ) ≈ c2·ρ²` and `d_inf = lim D`.
struct Defect<'a> {
    s: f64,
    r: f64,
    ell: f64,
    d: &'a (dyn Fn(f64) -> f64 + Sync),
    c2: f64,
    d_inf: f64,
    /// Magnitude used for the absolute tolerance.
    scale: f64,
    /// Requested relative accuracy of the final value.
    rel: f64,
}

impl Defect<'_> {
    fn integrate(&self, cut: f64) -> (Estimate, Estimate) {
        let s = self.s;
        // Away from the origin the function varies on the scale r.
        let delta = patch(s) * self.ell.max(0.25 * self.r);
        let big_t = FAR * self.r.max(self.ell);
        let patch = self.c2 * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);

        let mut br = quad::geometric_breaks(delta, big_t);
        if self.r > delta {
            br.extend(quad::graded_breaks(delta, big_t, self.r, 1e-2 * self.ell));
        }
        let cut = cut.clamp(delta, big_t);
        br.push(cut);
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup();
        let near_br: Vec<f64> = br.iter().copied().filter(|&x| x <= cut).collect();
        let far_br: Vec<f64> = br.iter().copied().filter(|&x| x >= cut).collect();

        let f = |rho: f64| (self.d)(rho) * rho.powf(-1.0 - 2.0 * s);
        let tol = Tol {
            abs: 1e-7 * self.rel * self.scale * self.ell.powf(-2.0 * s),
            rel: 1e-3 * self.rel,
            max_panels: 20_000,
        };
        let near = quad::adaptive(&f, &near_br, tol);
        let far = quad::adaptive(&f, &far_br, tol);

        // Tail: the constant part exactly, the decaying part extrapolated
        // with the power measured between T and 2T.
        let tt = big_t.powf(-2.0 * s);
        let d1 = (self.d)(big_t) - self.d_inf;
        let d2 = (self.d)(2.0 * big_t) - self.d_inf;
        let d3 = (self.d)(4.0 * big_t) - self.d_inf;
        let power = |a: f64, b: f64| {
            if a != 0.0 && b != 0.0 && a.signum() == b.signum() {
                (a / b).log2().clamp(0.0, 60.0)
            } else {
                0.0
            }
        };
        let (kappa, kappa_next) = (power(d1, d2), power(d2, d3));
        let tail = self.d_inf * tt / (2.0 * s) + d1 * tt / (kappa + 2.0 * s);
        // Uncertainty: drift of the fitted power one octave further out.
        let tail_err = (d1 * tt).abs() * (1.0 / (kappa + 2.0 * s) - 1.0 / (kappa_next + 2.0 * s)).abs()
            + 1e-12 * (d1 * tt).abs();

        (
            Estimate {
                value: near.value + patch,
                error: near.error,
            },
            Estimate {
                value: far.value + tail,
                error: far.error + tail_err,
            },
        )
    }
}

/// `(−Δ)^s u(r)` for a radial function by quadrature, with error estimate.
pub fn fractional_laplacian<F: RadialFunction + ?Sized>(
    n: u32,
    s: f64,
    f: &F,
    r: f64,
) -> Result<Estimate> {
    fractional_laplacian_rel(n, s, f, r, REQUESTED_REL)
}

/// [`fractional_laplacian`] at relative accuracy `rel`.
pub fn fractional_laplacian_rel<F: RadialFunction + ?Sized>(
    n: u32,
    s: f64,
    f: &F,
    r: f64,
    rel: f64,
) -> Result<Estimate> {
    let ell = f.length_scale();
    let ur = f.value(r);
    let d = |rho: f64| spherical_mean(n, r, rho, ell, ur, &|t| ur - f.value(t));
    let defect = Defect {
        s,
        r,
        ell,
        d: &d,
        c2: -f.laplacian(n, r) / (2.0 * n as f64),
        d_inf: ur,
        scale: ur.abs(),
        rel,
    };
    let (near, far) = defect.integrate(f64::INFINITY);
    let c = 2.0 * sphere_area(n);
    let est = Estimate {
        value: c * (near.value + far.value),
        error: c * (near.error + far.error),
    };
    let allowed = (rel * est.value.abs()).max(1e-6 * rel * ur.abs() * ell.powf(-2.0 * s));
    if !(est.error <= allowed) {
        return Err(Error::Tolerance {
            requested: allowed,
            achieved: est.error,
        });
    }
    Ok(est)
}

/// Result of [`amu`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmuResult {
    pub value: f64,
    pub quadrature_error_estimate: f64,
    pub n: u32,
    pub s: f64,
    pub mu: f64,
}

/// Default absolute tolerance for [`amu`].
pub const AMU_TOL: f64 = 1e-8;

/// `A_μ = ∫_{|y|>1}(|y|^μ − 1)(|y|^{−μ} − |y|^{2s−N})|y − e₁|^{−N−2s} dy`, so
/// that `(−Δ)^s|x|^{−μ} = 2A_μ|x|^{−μ−2s}`.
pub fn amu(n: u32, s: f64, mu: f64) -> Result<AmuResult> {
    amu_with_tol(n, s, mu, AMU_TOL)
}

pub fn amu_with_tol(n: u32, s: f64, mu: f64, tol: f64) -> Result<AmuResult> {
    check_ns(n, s)?;
    if !(mu > 0.0) {
        return Err(Error::Inadmissible(format!("mu > 0 fails (mu = {mu})")));
    }
    if mu >= n as f64 {
        return Err(Error::Divergent { mu, n });
    }
    let nf = n as f64;
    let a = nf + 2.0 * s;
    let e = mu + 2.0 * s - nf;
    // Radius ρ = 1 + x; the integrand behaves like x^{1−2s} at x = 0.
    let f = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let l = x.ln_1p();
        let rho = 1.0 + x;
        let left = (mu * l).exp_m1();
        let right = -(-mu * l).exp() * (e * l).exp_m1();
        let k = rho.powf(-a) * k_gap(n, s, x / rho);
        left * right * rho.powf(nf - 1.0) * k
    };
    let x_max = 1e8;
    let mut br = vec![0.0];
    br.extend(quad::geometric_breaks(1e-12, x_max));
    let est = quad::adaptive(
        &f,
        &br,
        Tol {
            abs: 1e-3 * tol,
            rel: 1e-13,
            max_panels: 20_000,
        },
    );
    // Tail: f = ρ^{−1−2s}(1 − ρ^e − ρ^{−μ} + ρ^{2s−N})·|S|(1 + c/ρ² + …).
    let big_r = 1.0 + x_max;
    let c = far_coefficient(n, s);
    let piece = |ex: f64| {
        let g = 2.0 * s - ex;
        big_r.powf(-g) / g + c * big_r.powf(-g - 2.0) / (g + 2.0)
    };
    let tail = sphere_area(n) * (piece(0.0) - piece(e) - piece(-mu) + piece(2.0 * s - nf));
    let result = AmuResult {
        value: est.value + tail,
        quadrature_error_estimate: est.error,
        n,
        s,
        mu,
    };
    if est.error > tol {
        return Err(Error::Tolerance {
            requested: tol,
            achieved: est.error,
        });
    }
    Ok(result)
}

fn check_ns(n: u32, s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Inadmissible(format!("0 < s < 1 fails (s = {s})")));
    }
    if !(n as f64 > 2.0 * s) {
        return Err(Error::Inadmissible(format!("N > 2s fails (N = {n}, s = {s})")));
    }
    Ok(())
}

type Key = (u32, u64, u64);

fn amu_cache() -> &'static Mutex<HashMap<Key, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Cached `A_μ` value.
pub fn amu_value(n: u32, s: f64, mu: f64) -> Result<f64> {
    let key = (n, s.to_bits(), mu.to_bits());
    if let Some(v) = amu_cache().lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = amu(n, s, mu)?.value;
    amu_cache().lock().unwrap().insert(key, v);
    Ok(v)
}

/// Beyond this radius, `(−Δ)^s w_μ` is taken from its far-field expansion
/// when the correction is negligible.
pub const FAR_FIELD_RADIUS: f64 = 1e4;

/// `(−Δ)^s w_μ(r)` in the coefficient-2 normalization.
pub fn fraclap_w_pointwise(n: u32, s: f64, mu: f64, r: f64) -> Result<f64> {
    fraclap_w_rel(n, s, mu, r, REQUESTED_REL)
}

/// [`fraclap_w_pointwise`] at relative accuracy `rel`.
pub fn fraclap_w_rel(n: u32, s: f64, mu: f64, r: f64, rel: f64) -> Result<f64> {
    check_ns(n, s)?;
    if !(mu > 0.0 && r >= 0.0) {
        return Err(Error::Inadmissible(format!("mu > 0 and r >= 0 fail (mu = {mu}, r = {r})")));
    }
    let nf = n as f64;
    let off_critical = (mu - (nf - 2.0 * s)).abs() > 1e-9;
    // Relative size of the w_μ-versus-|x|^{−μ} correction.
    let correction = r.powf(mu - nf).max(r.powf(-2.0));
    if r > FAR_FIELD_RADIUS && mu < nf && off_critical && correction < 1e-7 {
        return Ok(2.0 * amu_value(n, s, mu)? * r.powf(-mu - 2.0 * s));
    }
    Ok(fractional_laplacian_rel(n, s, &PowerWeight { mu }, r, rel)?.value)
}

/// Trichotomy of `(−Δ)^s w_μ` against `N − 2s` and `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PositivePower,
    Critical,
    NegativePower,
    NegativeLog,
    NegativeCapped,
}

/// Predicted far-field law `sign · r^{exponent} (· log r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub sign: i8,
    pub exponent: f64,
    pub log_factor: bool,
}

impl std::fmt::Display for FarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = if self.sign < 0 { "-" } else { "+" };
        if self.log_factor {
            write!(f, "{sign}C ln r / r^{}", -self.exponent)
        } else {
            write!(f, "{sign}C / r^{}", -self.exponent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub predicted_far_field: FarField,
    /// Smallest scanned radius beyond which sign and slope agree with the
    /// prediction; infinite if never.
    pub onset_radius_estimate: f64,
}

const CRIT_TOL: f64 = 1e-9;

/// Regime and far field predicted from `(N, s, μ)` alone.
pub fn regime_of(n: u32, s: f64, mu: f64) -> (Regime, FarField) {
    let nf = n as f64;
    let crit = nf - 2.0 * s;
    let capped = FarField {
        sign: -1,
        exponent: -(nf + 2.0 * s),
        log_factor: false,
    };
    if (mu - crit).abs() <= CRIT_TOL {
        (
            Regime::Critical,
            FarField {
                sign: 1,
                exponent: -(nf + 2.0 * s),
                log_factor: false,
            },
        )
    } else if mu < crit {
        (
            Regime::PositivePower,
            FarField {
                sign: 1,
                exponent: -(mu + 2.0 * s),
                log_factor: false,
            },
        )
    } else if (mu - nf).abs() <= CRIT_TOL {
        (
            Regime::NegativeLog,
            FarField {
                log_factor: true,
                ..capped
            },
        )
    } else if mu < nf {
        (
            Regime::NegativePower,
            FarField {
                sign: -1,
                exponent: -(mu + 2.0 * s),
                log_factor: false,
            },
        )
    } else {
        (Regime::NegativeCapped, capped)
    }
}

/// Classifies `μ` and locates where the computed `(−Δ)^s w_μ` settles into
/// the predicted sign and slope.
pub fn regime_classify(n: u32, s: f64, mu: f64) -> Result<RegimeReport> {
    check_ns(n, s)?;
    let (regime, far) = regime_of(n, s, mu);
    let radii: Vec<f64> = (0..=26).map(|k| 2f64.powf(0.5 * k as f64)).collect();
    let values: Vec<f64> = radii
        .par_iter()
        .map(|&r| fraclap_w_pointwise(n, s, mu, r))
        .collect::<Result<_>>()?;
    let slope_tol = if far.log_factor { 0.5 } else { 0.15 };
    let good: Vec<bool> = (0..radii.len() - 1)
        .map(|k| {
            let (v0, v1) = (values[k], values[k + 1]);
            let sign_ok = v0.signum() == far.sign as f64 && v1.signum() == far.sign as f64;
            let slope = (v1.abs() / v0.abs()).ln() / (radii[k + 1] / radii[k]).ln();
            sign_ok && (slope - far.exponent).abs() < slope_tol
        })
        .collect();
    let onset = (0..good.len())
        .find(|&k| good[k..].iter().all(|&g| g))
        .map_or(f64::INFINITY, |k| radii[k]);
    Ok(RegimeReport {
        regime,
        predicted_far_field: far,
        onset_radius_estimate: onset,
    })
}

/// Both sides of `(−Δ)^s[w_μ(λ·)](r) = λ^{2s}((−Δ)^s w_μ)(λr)`, each by
/// direct quadrature.
pub fn scaling_check(n: u32, s: f64, mu: f64, lambda: f64, r: f64) -> Result<(f64, f64, f64)> {
    check_ns(n, s)?;
    let lhs = fractional_laplacian(n, s, &ScaledPowerWeight { mu, lambda }, r)?.value;
    let rhs = lambda.powf(2.0 * s) * fractional_laplacian(n, s, &PowerWeight { mu }, lambda * r)?.value;
    let gap = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok((lhs, rhs, gap))
}

/// Kummer's `₁F₁(a; b; z)` by its power series, transformed so that the
/// series runs with positive argument.
pub fn hyp1f1(a: f64, b: f64, z: f64) -> f64 {
    if z < 0.0 {
        return z.exp() * hyp1f1(b - a, b, -z);
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..10_000 {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * z / (kf + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Standard-normalized `(−Δ)^s e^{−|x|²/2}` from the Fourier side.
pub fn gaussian_standard(n: u32, s: f64, r: f64) -> f64 {
    let h = n as f64 / 2.0;
    2f64.powf(s) * gamma(h + s) / gamma(h) * hyp1f1(h + s, h, -0.5 * r * r)
}

/// `m(r)` = coefficient-2 operator on the Gaussian over the standard one,
/// at radius `r`.
pub fn normalization_multiplier_at(n: u32, s: f64, r: f64) -> Result<f64> {
    check_ns(n, s)?;
    let ours = fractional_laplacian(n, s, &Gaussian, r)?.value;
    Ok(ours / gaussian_standard(n, s, r))
}

/// The factor `m` with coefficient-2 operator `= m·(|ξ|^{2s} multiplier)`.
/// Cached per `(N, s)`.
pub fn normalization_multiplier(n: u32, s: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (n, s.to_bits());
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let m = normalization_multiplier_at(n, s, 0.0)?;
    cache.lock().unwrap().insert(key, m);
    Ok(m)
}

/// Ḣ^s membership verdict of a truncated Gagliardo seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Convergent,
    DivergentTrend,
}

/// Partial Gagliardo seminorms `S(ρ) = ∫_{|x|<ρ}∫(w(x) − w(y))²|x−y|^{−N−2s}`
/// at `ρ = R, 2R, 4R`, split into the near-diagonal part `I₁`
/// (`|x − y| ≤ |x|/2`) and the rest `I₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GagliardoReport {
    pub radii: [f64; 3],
    pub near: [f64; 3],
    pub far: [f64; 3],
    /// `(S(4R) − S(2R)) / (S(2R) − S(R))`.
    pub increment_ratio: f64,
    /// Asymptotic ratio `2^{N−2μ−2s}`.
    pub expected_ratio: f64,
    pub verdict: Membership,
}

impl GagliardoReport {
    pub fn partial(&self, k: usize) -> f64 {
        self.near[k] + self.far[k]
    }
}

/// `(I₁, I₂)` densities at radius `r`, each including the `|S^{N−1}|` factor.
fn gagliardo_density(n: u32, s: f64, w: &PowerWeight, r: f64) -> (f64, f64) {
    let wr = w.value(r);
    let g = |t: f64| {
        let d = wr - w.value(t);
        d * d
    };
    let d = |rho: f64| spherical_mean(n, r, rho, 1.0, 1.0, &g);
    let mu = w.mu;
    let dw = -mu * r * (1.0 + r * r).powf(-0.5 * mu - 1.0);
    let defect = Defect {
        s,
        r,
        ell: 1.0,
        d: &d,
        c2: dw * dw / n as f64,
        d_inf: wr * wr,
        scale: wr * wr + dw * dw,
        rel: REQUESTED_REL,
    };
    let (near, far) = defect.integrate(0.5 * r);
    let c = sphere_area(n);
    (c * near.value, c * far.value)
}

pub fn gagliardo_tail(n: u32, s: f64, mu: f64, big_r: f64) -> Result<GagliardoReport> {
    check_ns(n, s)?;
    if !(big_r > 1.0) {
        return Err(Error::Inadmissible(format!("R > 1 fails (R = {big_r})")));
    }
    let w = PowerWeight { mu };
    // Panels: [0, 1/4] then octaves up to 4R, four GL10 pieces per panel.
    let mut edges = vec![0.0, 0.25];
    while *edges.last().unwrap() < 4.0 * big_r {
        let next = (edges.last().unwrap() * 2.0).min(4.0 * big_r);
        for cand in [big_r, 2.0 * big_r] {
            let last = *edges.last().unwrap();
            if cand > last && cand < next {
                edges.push(cand);
            }
        }
        edges.push(next);
    }
    let mut nodes = Vec::new();
    for e in edges.windows(2) {
        for j in 0..4 {
            let a = e[0] + (e[1] - e[0]) * j as f64 / 4.0;
            let b = e[0] + (e[1] - e[0]) * (j + 1) as f64 / 4.0;
            nodes.extend(quad::gl10_nodes(a, b));
        }
    }
    let sn = sphere_area(n);
    let dens: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&(r, wt)| {
            let (i1, i2) = gagliardo_density(n, s, &w, r);
            let vol = sn * r.powi(n as i32 - 1) * wt;
            (vol * i1, vol * i2)
        })
        .collect();
    let radii = [big_r, 2.0 * big_r, 4.0 * big_r];
    let mut near = [0.0; 3];
    let mut far = [0.0; 3];
    for (&(r, _), &(a, b)) in nodes.iter().zip(&dens) {
        for k in 0..3 {
            if r < radii[k] {
                near[k] += a;
                far[k] += b;
            }
        }
    }
    let total = |k: usize| near[k] + far[k];
    let ratio = (total(2) - total(1)) / (total(1) - total(0));
    let verdict = if ratio < 1.0 {
        Membership::Convergent
    } else {
        Membership::DivergentTrend
    };
    Ok(GagliardoReport {
        radii,
        near,
        far,
        increment_ratio: ratio,
        expected_ratio: 2f64.powf(n as f64 - 2.0 * mu - 2.0 * s),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Oracles from the Fourier side: C_{N,s} is the constant of the standard
    // kernel normalization, so the coefficient-2 operator is (2/C_{N,s})
    // times the |ξ|^{2s} multiplier.
    fn c_ns(n: u32, s: f64) -> f64 {
        let h = n as f64 / 2.0;
        4f64.powf(s) * gamma(h + s) / (PI.powf(h) * gamma(-s).abs())
    }

    /// Riesz-potential identity (−Δ)^s|x|^{−μ} = c|x|^{−μ−2s} for the
    /// standard operator, rescaled to A_μ.
    fn amu_oracle(n: u32, s: f64, mu: f64) -> f64 {
        let nf = n as f64;
        let std = 4f64.powf(s) * gamma((nf - mu) / 2.0) * gamma((mu + 2.0 * s) / 2.0)
            / (gamma(mu / 2.0) * gamma((nf - mu - 2.0 * s) / 2.0));
        std / c_ns(n, s)
    }

    fn critical_oracle(n: u32, s: f64) -> f64 {
        let nf = n as f64;
        2.0 / c_ns(n, s) * 4f64.powf(s) * gamma((nf + 2.0 * s) / 2.0) / gamma((nf - 2.0 * s) / 2.0)
    }

    #[test]
    fn amu_matches_riesz_oracle() {
        for &(n, s, mu) in &[(3, 0.5, 1.0), (3, 0.5, 2.5), (1, 0.4, 0.1), (1, 0.4, 0.5), (2, 0.25, 0.7), (4, 0.75, 3.2)] {
            let a = amu(n, s, mu).unwrap().value;
            let o = amu_oracle(n, s, mu);
            assert!((a - o).abs() < 1e-7 * o.abs().max(1e-3), "({n},{s},{mu}): {a} vs {o}");
        }
    }

    #[test]
    fn amu_zero_at_critical_and_divergent_beyond_n() {
        assert!(amu(3, 0.5, 2.0).unwrap().value.abs() < 1e-12);
        assert!(matches!(amu(3, 0.5, 3.0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn critical_ratio_matches_closed_form() {
        for &(n, s) in &[(3u32, 0.5), (1, 0.4), (2, 0.3)] {
            let mu = n as f64 - 2.0 * s;
            let p = 2.0 * n as f64 / mu;
            let want = critical_oracle(n, s);
            for &r in &[0.0, 0.3, 1.0, 4.0] {
                let v = fraclap_w_pointwise(n, s, mu, r).unwrap();
                let ratio = v / PowerWeight { mu }.value(r).powf(p - 1.0);
                assert!((ratio - want).abs() < 1e-7 * want, "N={n} r={r}: {ratio} vs {want}");
            }
        }
    }

    #[test]
    fn gaussian_multiplier_matches_closed_form() {
        for &(n, s) in &[(1u32, 0.4), (3, 0.5), (2, 0.75)] {
            let want = 2.0 / c_ns(n, s);
            let m0 = normalization_multiplier(n, s).unwrap();
            let m1 = normalization_multiplier_at(n, s, 1.0).unwrap();
            assert!((m0 - want).abs() < 1e-7 * want, "{m0} vs {want}");
            assert!((m1 - m0).abs() < 1e-7 * m0);
        }
    }

    #[test]
    fn hyp1f1_values() {
        // 1F1(a; a; z) = e^z and 1F1(1; 2; z) = (e^z − 1)/z.
        assert!((hyp1f1(1.3, 1.3, -2.0) - (-2f64).exp()).abs() < 1e-15);
        assert!((hyp1f1(1.0, 2.0, -3.0) - ((-3f64).exp() - 1.0) / -3.0).abs() < 1e-14);
    }

    #[test]
    fn far_field_constant() {
        let (n, s, mu) = (3, 0.5, 1.0);
        let r = 1e3;
        let v = fraclap_w_pointwise(n, s, mu, r).unwrap();
        let lim = 2.0 * amu_oracle(n, s, mu);
        assert!((v * r.powf(mu + 2.0 * s) / lim - 1.0).abs() < 0.02);
    }

    #[test]
    fn scaling_identity() {
        for &(mu, lambda, r) in &[(1.0, 2.0, 0.7), (3.5, 0.5, 3.0), (2.0, 1.0, 1.5)] {
            let (_, _, gap) = scaling_check(3, 0.5, mu, lambda, r).unwrap();
            assert!(gap < 1e-6, "gap {gap}");
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(regime_of(3, 0.5, 1.5).0, Regime::PositivePower);
        assert_eq!(regime_of(3, 0.5, 1.5).1.exponent, -2.5);
        assert_eq!(regime_of(3, 0.5, 3.0).0, Regime::NegativeLog);
        assert_eq!(regime_of(3, 0.5, 2.0).0, Regime::Critical);
        assert_eq!(regime_of(3, 0.5, 4.0).0, Regime::NegativeCapped);
        let rep = regime_classify(3, 0.5, 1.5).unwrap();
        assert!(rep.onset_radius_estimate.is_finite());
    }

    #[test]
    fn gagliardo_verdicts() {
        let conv = gagliardo_tail(3, 0.5, 2.0, 32.0).unwrap();
        assert_eq!(conv.verdict, Membership::Convergent);
        let div = gagliardo_tail(3, 0.5, 0.9, 32.0).unwrap();
        assert_eq!(div.verdict, Membership::DivergentTrend);
    }
}
