//! Radial reduction of the kernel `|x − y|^{−N−2s}`.
//!
//! For radial integrands everything reduces to the spherical average
//! `k(t) = ∫_{S^{N−1}} |e₁ − tσ|^{−N−2s} dσ`, which has closed forms for
//! N = 1 and N = 3 and is otherwise computed by angular quadrature.

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::quad::{self, Tol};

/// Surface area of the unit sphere `S^{n−1} ⊂ ℝ^n` (`|S^0| = 2`).
pub fn sphere_area(n: u32) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// `k(t)` for `t ≥ 0`, `t ≠ 1`, computed without tables.
pub fn k_exact(n: u32, s: f64, t: f64) -> f64 {
    let a = n as f64 + 2.0 * s;
    if t > 1.0 {
        return t.powf(-a) * k_exact(n, s, 1.0 / t);
    }
    k_gap(n, s, 1.0 - t)
}

/// `k(1 − d)` for `d ∈ (0, 1]`, accurate when `d` is tiny.
pub fn k_gap(n: u32, s: f64, d: f64) -> f64 {
    let a = n as f64 + 2.0 * s;
    let t = 1.0 - d;
    if t < 1e-4 {
        // Sphere average of (1 − 2tσ₁ + t²)^{−a/2} to second order.
        return sphere_area(n) * (1.0 + far_coefficient(n, s) * t * t);
    }
    match n {
        1 => d.powf(-a) + (2.0 - d).powf(-a),
        3 => {
            let b = 1.0 + 2.0 * s;
            2.0 * std::f64::consts::PI * (d.powf(-b) - (2.0 - d).powf(-b)) / (t * b)
        }
        _ => angular(n, s, d),
    }
}

/// `c` in `k(t) = |S^{N−1}|(1 + c t² + O(t⁴))`.
pub fn far_coefficient(n: u32, s: f64) -> f64 {
    let a = n as f64 + 2.0 * s;
    a * (a + 2.0 - n as f64) / (2.0 * n as f64)
}

/// Angular quadrature for `k(1 − d)`; taking `d` directly keeps full
/// relative precision near the singularity.
fn angular(n: u32, s: f64, d: f64) -> f64 {
    let a = n as f64 + 2.0 * s;
    let t = 1.0 - d;
    let f = |th: f64| {
        let h = (0.5 * th).sin();
        let q = d * d + 4.0 * t * h * h;
        th.sin().powi(n as i32 - 2) * q.powf(-0.5 * a)
    };
    let breaks = quad::graded_breaks(0.0, std::f64::consts::PI, 0.0, 0.25 * d);
    let tol = Tol {
        abs: 0.0,
        rel: 1e-13,
        max_panels: 4000,
    };
    sphere_area(n - 1) * quad::adaptive(&f, &breaks, tol).value
}

/// Fast evaluator of `k(t)` for repeated use. N = 1 and N = 3 use the
/// closed forms; other dimensions interpolate the smooth factor
/// `g = k(t)(1 − t)^{1+2s}` on a table uniform in `−log₂(1 − t)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub n: u32,
    pub s: f64,
    table: Option<Vec<f64>>,
}

const TABLE_H: f64 = 1.0 / 256.0;
const TABLE_U_MAX: f64 = 44.0;

impl Kernel {
    pub fn new(n: u32, s: f64) -> Kernel {
        let table = if n == 1 || n == 3 {
            None
        } else {
            let count = (TABLE_U_MAX / TABLE_H) as usize + 1;
            let b = 1.0 + 2.0 * s;
            Some(
                (0..count)
                    .into_par_iter()
                    .map(|j| {
                        let d = (-(j as f64) * TABLE_H).exp2();
                        let k = if j == 0 { sphere_area(n) } else { angular(n, s, d) };
                        k * d.powf(b)
                    })
                    .collect(),
            )
        };
        Kernel { n, s, table }
    }

    /// `k(t)`; singular like `|1 − t|^{−1−2s}` at `t = 1`.
    pub fn k(&self, t: f64) -> f64 {
        let a = self.n as f64 + 2.0 * self.s;
        if t > 1.0 {
            return t.powf(-a) * self.k(1.0 / t);
        }
        self.k_gap(1.0 - t)
    }

    /// `k(1 − d)` for `d ∈ (0, 1]`.
    pub fn k_gap(&self, d: f64) -> f64 {
        let Some(table) = &self.table else {
            return k_gap(self.n, self.s, d);
        };
        if d > 1.0 - 1e-4 {
            return k_gap(self.n, self.s, d);
        }
        let u = (-d.log2()).min(TABLE_U_MAX);
        let x = u / TABLE_H;
        let last = table.len() - 1;
        let j = (x.floor() as usize).clamp(1, last - 2);
        let xi = x - j as f64;
        // Cubic Lagrange on nodes j−1..j+2.
        let (p0, p1, p2, p3) = (table[j - 1], table[j], table[j + 1], table[j + 2]);
        let g = -p0 * xi * (xi - 1.0) * (xi - 2.0) / 6.0 + p1 * (xi + 1.0) * (xi - 1.0) * (xi - 2.0) / 2.0
            - p2 * (xi + 1.0) * xi * (xi - 2.0) / 2.0
            + p3 * (xi + 1.0) * xi * (xi - 1.0) / 6.0;
        g * d.powf(-(1.0 + 2.0 * self.s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_angular_quadrature() {
        for &(s, t) in &[(0.5, 0.3), (0.25, 0.9), (0.75, 0.999), (0.5, 0.01)] {
            let q = angular(3, s, 1.0 - t);
            let c = k_exact(3, s, t);
            assert!((q - c).abs() < 1e-10 * c, "s={s} t={t}: {q} vs {c}");
        }
    }

    #[test]
    fn small_t_series_is_continuous() {
        for n in [2, 3, 4] {
            let a = k_exact(n, 0.4, 0.99e-4);
            let b = angular(n, 0.4, 1.0 - 0.99e-4);
            assert!((a - b).abs() < 1e-11 * b, "n={n} {a} {b}");
        }
    }

    #[test]
    fn table_interpolation_is_accurate() {
        for n in [2, 4] {
            let k = Kernel::new(n, 0.3);
            for &t in &[0.001, 0.2, 0.5, 0.77, 0.95, 0.9999, 1.0 - 1e-9, 1.3, 4.0] {
                let e = k_exact(n, 0.3, t);
                assert!((k.k(t) - e).abs() < 1e-8 * e, "n={n} t={t} {} {e}", k.k(t));
            }
        }
    }
}
