//! The pair recurrence
//!
//! ```text
//! f_k(t) = int_0^t [f_{k-1}(t-s) cos^2 2s + g_{k-1}(t-s) sin^2 2s] ds
//! g_k(t) = int_0^t [g_{k-1}(t-s) cos^2 2s + f_{k-1}(t-s) sin^2 2s] ds
//! ```
//!
//! seeded with `f_0 = sin^2 2t`, `g_0 = cos^2 2t`, and the normalised
//! k-error matrix elements `F_k = f_k / t^k`.
//!
//! Each order is carried as an exact truncated series (to degree `k + D`, so
//! that `F_k` keeps degree `D`) and, up to a crossover order, as an exact
//! closed form.

use crate::error::{Error, Result};
use crate::expoly::{ep_convolve, ExpPoly};
use crate::series::{series_convolve, taylor_trig, TrigKind, TruncatedSeries};

/// Closed forms are cheap but grow with the order; beyond this order only
/// series are produced by default.
pub const DEFAULT_CLOSED_FORM_MAX_ORDER: usize = 10;

#[derive(Clone, Debug)]
pub struct OrderPair {
    pub k: usize,
    pub f: TruncatedSeries,
    pub g: TruncatedSeries,
    pub f_closed: Option<ExpPoly>,
    pub g_closed: Option<ExpPoly>,
}

/// `f_k(t) / t^k`, with the closed form kept as numerator plus divisor power.
#[derive(Clone, Debug)]
pub struct NormalizedOrder {
    pub k: usize,
    pub series: TruncatedSeries,
    pub closed: Option<ClosedForm>,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ClosedForm {
    pub numerator: ExpPoly,
    pub divisor_power: u32,
}

impl ClosedForm {
    /// Evaluates `numerator(t) / t^divisor_power` directly in floating point.
    pub fn eval_naive(&self, theta: f64) -> Result<f64> {
        self.numerator.eval_naive(theta, self.divisor_power)
    }
}

/// `f_0 .. f_K` and `g_0 .. g_K`, with closed forms up to order 10.
pub fn compute_fg(max_order: usize, degree: usize) -> Vec<OrderPair> {
    compute_fg_with(max_order, degree, DEFAULT_CLOSED_FORM_MAX_ORDER)
}

pub fn compute_fg_with(
    max_order: usize,
    degree: usize,
    closed_form_max_order: usize,
) -> Vec<OrderPair> {
    assert!(degree >= 2, "degree must be at least 2");
    let top = max_order + degree;
    let cos2 = taylor_trig(TrigKind::Cos2Squared, top);
    let sin2 = taylor_trig(TrigKind::Sin2Squared, top);
    let cos2_closed = ExpPoly::cos2_squared();
    let sin2_closed = ExpPoly::sin2_squared();

    let mut out = Vec::with_capacity(max_order + 1);
    out.push(OrderPair {
        k: 0,
        f: sin2.truncate(degree),
        g: cos2.truncate(degree),
        f_closed: Some(sin2_closed.clone()),
        g_closed: Some(cos2_closed.clone()),
    });

    for k in 1..=max_order {
        let prev = &out[k - 1];
        let cap = k + degree;
        let (f, g) = rayon::join(
            || {
                series_convolve(&prev.f, &cos2, cap)
                    .checked_add(&series_convolve(&prev.g, &sin2, cap))
                    .expect("equal caps")
            },
            || {
                series_convolve(&prev.g, &cos2, cap)
                    .checked_add(&series_convolve(&prev.f, &sin2, cap))
                    .expect("equal caps")
            },
        );
        let (f_closed, g_closed) = match (&prev.f_closed, &prev.g_closed) {
            (Some(pf), Some(pg)) if k <= closed_form_max_order => (
                Some(&ep_convolve(pf, &cos2_closed) + &ep_convolve(pg, &sin2_closed)),
                Some(&ep_convolve(pg, &cos2_closed) + &ep_convolve(pf, &sin2_closed)),
            ),
            _ => (None, None),
        };
        out.push(OrderPair {
            k,
            f,
            g,
            f_closed,
            g_closed,
        });
    }
    out
}

/// `F_k = f_k / t^k`. The series drops to degree `cap(f_k) - k`.
pub fn normalize(pair: &OrderPair) -> Result<NormalizedOrder> {
    let series = pair
        .f
        .shift_down(pair.k)
        .map_err(|power| Error::LeadingOrder {
            order: pair.k,
            power,
        })?;
    Ok(NormalizedOrder {
        k: pair.k,
        series,
        closed: pair.f_closed.as_ref().map(|numerator| ClosedForm {
            numerator: numerator.clone(),
            divisor_power: pair.k as u32,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{factorials, rat, Rational};
    use num_traits::Zero;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn zeroth_order_series() {
        let pairs = compute_fg(0, 6);
        assert_eq!(pairs[0].f.coeff(2), rat(4, 1));
        assert_eq!(pairs[0].f.coeff(4), rat(-16, 3));
        assert_eq!(pairs[0].f.coeff(6), rat(128, 45));
        assert_eq!(pairs[0].g.coeff(0), rat(1, 1));
        assert_eq!(pairs[0].g.coeff(2), rat(-4, 1));
        assert_eq!(pairs[0].g.coeff(4), rat(16, 3));
    }

    #[test]
    fn first_order_closed_form_and_series_agree() {
        let pairs = compute_fg(1, 12);
        let f1 = pairs[1].f_closed.as_ref().unwrap();
        let t = f1.trig_coefficients(1);
        assert_eq!((t.constant, t.cos_coeff), (rat(1, 2), rat(-1, 4)));
        assert_eq!(f1.trig_coefficients(0).sin_coeff, rat(-1, 16));
        assert_eq!(f1.to_series(13).unwrap(), pairs[1].f);
    }

    #[test]
    fn trace_identity() {
        let pairs = compute_fg_with(20, 10, 6);
        let fact = factorials(20);
        for p in &pairs {
            let sum = p.f.checked_add(&p.g).unwrap();
            let expected = TruncatedSeries::monomial(
                Rational::new(1.into(), fact[p.k].clone()),
                p.k,
                p.f.cap(),
            );
            assert_eq!(sum, expected, "order {}", p.k);
            if let (Some(fc), Some(gc)) = (&p.f_closed, &p.g_closed) {
                assert_eq!(
                    &(fc + gc),
                    &ExpPoly::monomial(Rational::new(1.into(), fact[p.k].clone()), p.k as u32)
                );
            }
        }
    }

    #[test]
    fn normalized_orders() {
        let pairs = compute_fg(2, 30);
        let f0 = normalize(&pairs[0]).unwrap();
        assert_eq!(f0.series, pairs[0].f);
        let f2 = normalize(&pairs[2]).unwrap();
        assert_eq!(f2.series.cap(), 30);
        assert!(f2.series.coeff(0).is_zero() && f2.series.coeff(1).is_zero());
        assert!(!f2.series.coeff(2).is_zero());
        // 1/4 - (1/16) cos(pi) = 5/16
        let v = f2.closed.as_ref().unwrap().eval_naive(FRAC_PI_4).unwrap();
        assert!((v - 5.0 / 16.0).abs() < 1e-12);
        assert!((f2.series.eval(FRAC_PI_4) - 5.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_are_real_and_match_series() {
        let pairs = compute_fg(10, 12);
        for p in &pairs {
            for (closed, series) in [(&p.f_closed, &p.f), (&p.g_closed, &p.g)] {
                let closed = closed.as_ref().unwrap();
                assert!(closed.is_real(), "order {}", p.k);
                assert_eq!(
                    &closed.to_series(series.cap()).unwrap(),
                    series,
                    "order {}",
                    p.k
                );
            }
        }
    }

    #[test]
    fn normalized_orders_are_bounded() {
        let pairs = compute_fg(39, 40);
        let fact = factorials(39);
        for p in &pairs {
            let fk = normalize(p).unwrap();
            let top = 1.0 / crate::series::rational_to_f64(&Rational::from(fact[p.k].clone()));
            let slack = 1e-14 + 1e-9 * top;
            // the degree-40 series is accurate on the solver window; the
            // closed form takes over where cancellation is harmless
            for i in 1..=200 {
                let t = i as f64 * std::f64::consts::PI / 200.0;
                let v = if t <= std::f64::consts::FRAC_PI_2 {
                    fk.series.eval(t)
                } else if let Some(c) = &fk.closed {
                    c.eval_naive(t).unwrap()
                } else {
                    continue;
                };
                assert!(v >= -slack && v <= top + slack, "F_{}({t}) = {v}", p.k);
            }
        }
    }

    #[test]
    fn normalize_rejects_low_powers() {
        let mut pair = compute_fg(1, 4).pop().unwrap();
        pair.f = TruncatedSeries::one(pair.f.cap());
        assert!(matches!(
            normalize(&pair),
            Err(Error::LeadingOrder { order: 1, power: 0 })
        ));
    }
}
