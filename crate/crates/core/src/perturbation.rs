//! Coefficients `C_k` of the x-expansion of the success probability and the
//! truncated surface `P(t, x) = sum_{k=0}^{K} C_k(t) x^k / k!`.
//!
//! `C_k` is assembled in exact rationals from the normalised orders `F_j`
//! and only then rounded to float polynomials. The alternating sum that
//! defines it cancels heavily, so the rounding must come last.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::Result;
use crate::recurrence::{compute_fg, normalize, NormalizedOrder};
use crate::series::{factorials, horner, Rational, TruncatedSeries};

pub const DEFAULT_ORDER: usize = 39;
pub const DEFAULT_DEGREE: usize = 40;

/// Upper end of the theta interval on which the degree-40 truncation is
/// trusted.
pub const THETA_WINDOW_MAX: f64 = PI;
/// Upper end of the certified x interval.
pub const X_WINDOW_MAX: f64 = 10.0;

/// `C_k = (-1)^k sum_{j=0}^{k} (-1/2)^j k!/(k-j)! F_j`, for `k = 0..=order`.
pub fn compute_c(f: &[TruncatedSeries], order: usize) -> Vec<TruncatedSeries> {
    assert!(f.len() > order, "need F_0..=F_{order}");
    let cap = f[..=order].iter().map(|s| s.cap()).min().unwrap();
    let half = Rational::new(BigInt::from(-1), BigInt::from(2));
    (0..=order)
        .map(|k| {
            let mut acc = TruncatedSeries::zero(cap);
            // (-1/2)^j k!/(k-j)!, built incrementally in j
            let mut weight = Rational::one();
            for (j, fj) in f.iter().enumerate().take(k + 1) {
                if j > 0 {
                    weight = weight * &half * Rational::from_integer(BigInt::from(k - j + 1));
                }
                acc = acc
                    .checked_add(&fj.truncate(cap).scale(&weight))
                    .expect("equal caps");
            }
            if k % 2 == 1 {
                acc = acc.scale(&-Rational::one());
            }
            acc
        })
        .collect()
}

/// Value of the truncated surface with a flag for inputs outside the
/// certified window `0 <= t <= pi`, `0 <= x <= 10`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub in_window: bool,
}

/// The exact coefficient series, their float truncations and the derivative
/// polynomials used by the solvers.
#[derive(Clone, Debug)]
pub struct PerturbationTable {
    order: usize,
    degree: usize,
    normalized: Vec<NormalizedOrder>,
    exact: Vec<TruncatedSeries>,
    cbar: Vec<Vec<f64>>,
    dcbar: Vec<Vec<f64>>,
    d2cbar: Vec<Vec<f64>>,
    inv_factorial: Vec<f64>,
    c_next: Vec<f64>,
    next_factorial: f64,
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

impl PerturbationTable {
    /// Order 39, degree 40.
    pub fn new() -> Result<Self> {
        Self::build(DEFAULT_ORDER, DEFAULT_DEGREE)
    }

    /// Builds `C_0..=C_order` at the given degree, plus `C_{order+1}` for the
    /// truncation-error bound.
    pub fn build(order: usize, degree: usize) -> Result<Self> {
        let pairs = compute_fg(order + 1, degree);
        let normalized = pairs.iter().map(normalize).collect::<Result<Vec<_>>>()?;
        let f: Vec<TruncatedSeries> = normalized.iter().map(|n| n.series.clone()).collect();
        let mut exact = compute_c(&f, order + 1);
        let next = exact.pop().expect("order + 2 entries");
        let cbar: Vec<Vec<f64>> = exact.iter().map(|s| s.to_f64()).collect();
        let dcbar: Vec<Vec<f64>> = cbar.iter().map(|p| derivative(p)).collect();
        let d2cbar: Vec<Vec<f64>> = dcbar.iter().map(|p| derivative(p)).collect();
        let fact = factorials(order + 1);
        let inv_factorial = fact[..=order]
            .iter()
            .map(|n| crate::series::rational_to_f64(&Rational::new(BigInt::one(), n.clone())))
            .collect();
        let next_factorial =
            crate::series::rational_to_f64(&Rational::from_integer(fact[order + 1].clone()));
        Ok(Self {
            order,
            degree,
            normalized,
            exact,
            cbar,
            dcbar,
            d2cbar,
            inv_factorial,
            c_next: next.to_f64(),
            next_factorial,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Exact `C_k` series, `k = 0..=order`.
    pub fn exact(&self) -> &[TruncatedSeries] {
        &self.exact
    }

    /// Float coefficients of `C̄_k`, ascending powers of theta.
    pub fn cbar(&self) -> &[Vec<f64>] {
        &self.cbar
    }

    /// Float coefficients of the first omitted order, `C̄_{order+1}`.
    pub fn cbar_next(&self) -> &[f64] {
        &self.c_next
    }

    /// `F_0..=F_{order+1}` with closed forms where available.
    pub fn normalized(&self) -> &[NormalizedOrder] {
        &self.normalized
    }

    pub fn in_window(theta: f64, x: f64) -> bool {
        (0.0..=THETA_WINDOW_MAX).contains(&theta) && (0.0..=X_WINDOW_MAX).contains(&x)
    }

    fn sum_over_orders(&self, polys: &[Vec<f64>], theta: f64, x: f64) -> f64 {
        polys
            .iter()
            .zip(&self.inv_factorial)
            .rev()
            .fold(0.0, |acc, (p, inv)| acc * x + horner(p, theta) * inv)
    }

    pub fn p_bar(&self, theta: f64, x: f64) -> Evaluation {
        Evaluation {
            value: self.sum_over_orders(&self.cbar, theta, x),
            in_window: Self::in_window(theta, x),
        }
    }

    /// `dP/dtheta` from the analytically differentiated polynomials.
    pub fn p_bar_dtheta(&self, theta: f64, x: f64) -> Evaluation {
        Evaluation {
            value: self.sum_over_orders(&self.dcbar, theta, x),
            in_window: Self::in_window(theta, x),
        }
    }

    pub fn p_bar_d2theta(&self, theta: f64, x: f64) -> Evaluation {
        Evaluation {
            value: self.sum_over_orders(&self.d2cbar, theta, x),
            in_window: Self::in_window(theta, x),
        }
    }

    /// `C̄_k(theta)` for a single order.
    pub fn cbar_at(&self, k: usize, theta: f64) -> f64 {
        horner(&self.cbar[k], theta)
    }

    /// Largest `|C̄_{order+1}(t) / (order+1)!|` over `0 <= t <= pi`.
    pub fn c40_bound(&self) -> TruncationBound {
        let f = |t: f64| (horner(&self.c_next, t) / self.next_factorial).abs();
        let steps = 4000usize;
        let h = THETA_WINDOW_MAX / steps as f64;
        let (mut best_t, mut best) = (0.0, f(0.0));
        for i in 1..=steps {
            let t = i as f64 * h;
            let v = f(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        // golden-section refinement inside the neighbouring grid cells
        let lo = (best_t - h).max(0.0);
        let hi = (best_t + h).min(THETA_WINDOW_MAX);
        let (t, v) = golden_max(f, lo, hi, 1e-12);
        if v > best {
            best = v;
            best_t = t;
        }
        TruncationBound {
            max: best,
            theta_at_max: best_t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationBound {
    pub max: f64,
    pub theta_at_max: f64,
}

impl TruncationBound {
    /// Bound on the first omitted term of the x-series for `x <= x_max`.
    pub fn at_x(&self, x_max: f64, order: usize) -> f64 {
        self.max * x_max.powi(order as i32)
    }
}

/// Golden-section search for a maximum of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

impl Default for PerturbationTable {
    fn default() -> Self {
        Self::new().expect("default table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{rat, taylor_trig, TrigKind};
    use num_traits::Zero;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
    use std::sync::OnceLock;

    fn table() -> &'static PerturbationTable {
        static T: OnceLock<PerturbationTable> = OnceLock::new();
        T.get_or_init(|| PerturbationTable::new().unwrap())
    }

    #[test]
    fn c0_is_f0_and_all_vanish_at_zero() {
        let t = table();
        assert_eq!(t.exact()[0], taylor_trig(TrigKind::Sin2Squared, 40));
        for (k, c) in t.exact().iter().enumerate() {
            assert!(c.coeff(0).is_zero(), "C_{k}(0) != 0");
            for (p, coeff) in c.coeffs().iter().enumerate() {
                if p % 2 == 1 {
                    assert!(coeff.is_zero(), "C_{k} has odd power {p}");
                }
            }
        }
    }

    #[test]
    fn c1_at_grover_point() {
        let t = table();
        assert!((t.cbar_at(1, FRAC_PI_4) + 5.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn compute_c_small_case() {
        // C_1 = -F_0 + F_1/2, C_2 = F_0 - F_1 + F_2/2 for constant inputs
        let f: Vec<TruncatedSeries> = [3, 5, 7]
            .iter()
            .map(|&v| TruncatedSeries::monomial(rat(v, 1), 0, 0))
            .collect();
        let c = compute_c(&f, 2);
        assert_eq!(c[0].coeff(0), rat(3, 1));
        assert_eq!(c[1].coeff(0), rat(-3, 1) + rat(5, 2));
        assert_eq!(c[2].coeff(0), rat(3, 1) - rat(5, 1) + rat(7, 2));
    }

    #[test]
    fn surface_sections() {
        let t = table();
        for i in 0..=100 {
            let theta = i as f64 * std::f64::consts::FRAC_PI_2 / 100.0;
            let v = t.p_bar(theta, 0.0).value;
            assert!(
                (v - (2.0 * theta).sin().powi(2)).abs() <= 1e-10,
                "theta {theta}"
            );
        }
        for &x in &[0.0, 1.0, 5.0, 10.0] {
            assert_eq!(t.p_bar(0.0, x).value, 0.0);
        }
        let h = 1e-6;
        let slope = (t.p_bar(FRAC_PI_4, h).value - t.p_bar(FRAC_PI_4, 0.0).value) / h;
        assert!((slope + 0.625).abs() < 1e-5);
    }

    #[test]
    fn theta_derivative() {
        let t = table();
        assert!(t.p_bar_dtheta(FRAC_PI_4, 0.0).value.abs() < 1e-10);
        assert!((t.p_bar_dtheta(FRAC_PI_8, 0.0).value - 2.0).abs() < 1e-9);
        let t_p = |theta: f64, x: f64| t.p_bar(theta, x).value;
        // Central difference with h = 1e-6 on the solver window. Elsewhere the
        // rounding noise of p_bar (growing with theta and x) divided by 1e-6
        // exceeds the tolerance, so a five-point stencil with h = 1e-3 is used.
        for i in 0..=12 {
            for j in 0..=5 {
                let theta = 0.05 + i as f64 * 0.25;
                let x = j as f64 * 2.0;
                let p = |t: f64| t_p(t, x);
                let fd = if theta <= std::f64::consts::FRAC_PI_2 && x <= 6.0 {
                    let h = 1e-6;
                    (p(theta + h) - p(theta - h)) / (2.0 * h)
                } else {
                    let h = 1e-3;
                    (p(theta - 2.0 * h) - 8.0 * p(theta - h) + 8.0 * p(theta + h)
                        - p(theta + 2.0 * h))
                        / (12.0 * h)
                };
                let an = t.p_bar_dtheta(theta, x).value;
                assert!((fd - an).abs() <= 1e-6, "({theta}, {x}): {fd} vs {an}");
            }
        }
    }

    #[test]
    fn surface_stays_a_probability() {
        let t = table();
        for i in 0..=80 {
            let theta = i as f64 * std::f64::consts::FRAC_PI_2 / 80.0;
            for j in 0..=100 {
                let v = t.p_bar(theta, j as f64 * 0.1).value;
                assert!(
                    (-1e-6..=1.0 + 1e-6).contains(&v),
                    "({theta}, {}) = {v}",
                    j as f64 * 0.1
                );
            }
        }
        for i in 0..=200 {
            let theta = i as f64 * std::f64::consts::PI / 200.0;
            let v = t.p_bar(theta, 0.0).value;
            assert!(
                (v - (2.0 * theta).sin().powi(2)).abs() <= 5e-4,
                "theta {theta}"
            );
        }
    }

    #[test]
    fn decays_with_budget_near_grover_point() {
        let t = table();
        for &theta in &[0.75, FRAC_PI_4, 0.8] {
            let mut prev = t.p_bar(theta, 0.0).value;
            for j in 1..=200 {
                let v = t.p_bar(theta, j as f64 * 0.05).value;
                assert!(v < prev, "theta {theta}, x {}", j as f64 * 0.05);
                prev = v;
            }
        }
    }

    #[test]
    fn window_flag() {
        let t = table();
        assert!(t.p_bar(1.0, 2.0).in_window);
        assert!(!t.p_bar(3.5, 2.0).in_window);
        assert!(!t.p_bar(1.0, 10.5).in_window);
        assert!(!t.p_bar(-0.1, 1.0).in_window);
    }

    #[test]
    fn bound_vanishes_at_origin() {
        let t = table();
        assert_eq!(t.cbar_next()[0], 0.0);
    }
}
