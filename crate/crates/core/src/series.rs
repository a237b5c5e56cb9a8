//! Truncated power series in one variable with exact rational coefficients.
//!
//! A [`TruncatedSeries`] keeps every coefficient from power 0 up to and
//! including its cap. Anything above the cap is unknown, not zero, so
//! products truncate to the smaller cap and sums refuse mismatched caps.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational number, always kept in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

pub(crate) fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `0!, 1!, ..., n!` as big integers.
pub(crate) fn factorials(n: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = BigInt::one();
    out.push(acc.clone());
    for i in 1..=n {
        acc *= i;
        out.push(acc.clone());
    }
    out
}

/// Power series `sum_i c_i t^i` known exactly up to `t^cap`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SeriesRepr", into = "SeriesRepr")]
pub struct TruncatedSeries {
    coeffs: Vec<Rational>,
}

impl TruncatedSeries {
    pub fn zero(cap: usize) -> Self {
        Self {
            coeffs: vec![Rational::zero(); cap + 1],
        }
    }

    pub fn one(cap: usize) -> Self {
        Self::monomial(Rational::one(), 0, cap)
    }

    /// `c * t^power`, or the zero series when `power > cap`.
    pub fn monomial(c: Rational, power: usize, cap: usize) -> Self {
        let mut s = Self::zero(cap);
        if power <= cap {
            s.coeffs[power] = c;
        }
        s
    }

    /// Builds a series from coefficients in ascending power order; the cap is
    /// `coeffs.len() - 1`. An empty vector is treated as the zero series with
    /// cap 0.
    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(Rational::zero());
        }
        Self { coeffs }
    }

    pub fn cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `t^i`; zero for `i > cap`.
    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Lowest power with a nonzero coefficient, if any.
    pub fn leading_power(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.leading_power().is_none()
    }

    /// Same series, kept only up to `cap` (which may not exceed the current cap).
    pub fn truncate(&self, cap: usize) -> Self {
        assert!(cap <= self.cap(), "cannot extend a truncated series");
        Self {
            coeffs: self.coeffs[..=cap].to_vec(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.same_cap(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.same_cap(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Cauchy product truncated to `min(self.cap, other.cap)`.
    pub fn mul(&self, other: &Self) -> Self {
        let cap = self.cap().min(other.cap());
        let mut out = vec![Rational::zero(); cap + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(cap + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(cap + 1 - i) {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Self { coeffs: out }
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Divides by `t^k`: coefficient `i` moves to `i - k` and the cap drops
    /// by `k`. Fails if any coefficient below `t^k` is nonzero.
    pub fn shift_down(&self, k: usize) -> std::result::Result<Self, usize> {
        if let Some(p) = self.coeffs.iter().take(k).position(|c| !c.is_zero()) {
            return Err(p);
        }
        assert!(k <= self.cap(), "shift exceeds the series cap");
        Ok(Self {
            coeffs: self.coeffs[k..].to_vec(),
        })
    }

    /// Coefficients rounded to the nearest `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(rational_to_f64).collect()
    }

    /// Horner evaluation at `theta` after a single rational-to-float
    /// conversion of the coefficients.
    pub fn eval(&self, theta: f64) -> f64 {
        horner(&self.to_f64(), theta)
    }

    fn same_cap(&self, other: &Self) -> Result<()> {
        if self.cap() != other.cap() {
            return Err(Error::CapMismatch {
                left: self.cap(),
                right: other.cap(),
            });
        }
        Ok(())
    }
}

/// Two series are equal when they agree coefficient by coefficient up to the
/// smaller of the two caps. This is not transitive across different caps,
/// hence no `Eq`.
impl PartialEq for TruncatedSeries {
    fn eq(&self, other: &Self) -> bool {
        let cap = self.cap().min(other.cap());
        self.coeffs[..=cap] == other.coeffs[..=cap]
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})t^{}", c.abs(), i)?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(t^{})", self.cap() + 1)
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Only reachable for magnitudes beyond the f64 range.
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub(crate) fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Exact series of `int_0^t a(t - s) w(s) ds`, truncated at `cap`.
///
/// Each pair `(i, j)` contributes `a_i w_j i! j! / (i + j + 1)!` at power
/// `i + j + 1` (the beta integral). The sum is organised as a Cauchy product
/// of the factorial-weighted coefficients followed by one division per
/// output power.
pub fn series_convolve(a: &TruncatedSeries, w: &TruncatedSeries, cap: usize) -> TruncatedSeries {
    let fact = factorials(cap.max(a.cap()).max(w.cap()) + 1);
    let weighted = |s: &TruncatedSeries| -> Vec<Rational> {
        s.coeffs
            .iter()
            .take(cap)
            .enumerate()
            .map(|(i, c)| c * Rational::from_integer(fact[i].clone()))
            .collect()
    };
    let aw = weighted(a);
    let ww = weighted(w);

    let mut out = vec![Rational::zero(); cap + 1];
    for (i, ai) in aw.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, wj) in ww.iter().enumerate() {
            let n = i + j + 1;
            if n > cap {
                break;
            }
            if !wj.is_zero() {
                out[n] += ai * wj;
            }
        }
    }
    for (n, c) in out.iter_mut().enumerate().skip(1) {
        if !c.is_zero() {
            *c /= Rational::from_integer(fact[n].clone());
        }
    }
    TruncatedSeries { coeffs: out }
}

/// The trigonometric weights that appear in the recurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigKind {
    /// `cos^2(2t)`
    Cos2Squared,
    /// `sin^2(2t)`
    Sin2Squared,
    /// `cos(4t)`
    Cos4,
    /// `sin(4t)`
    Sin4,
}

/// Exact Maclaurin coefficients of the selected function up to `t^cap`.
pub fn taylor_trig(kind: TrigKind, cap: usize) -> TruncatedSeries {
    let fact = factorials(cap);
    let mut coeffs = vec![Rational::zero(); cap + 1];
    // cos(4t) = sum_m (-1)^m 4^(2m) t^(2m) / (2m)!,
    // sin(4t) = sum_m (-1)^m 4^(2m+1) t^(2m+1) / (2m+1)!
    let four_pow = |p: usize, sign_neg: bool| {
        let v = Rational::new(BigInt::from(4).pow(p as u32), fact[p].clone());
        if sign_neg {
            -v
        } else {
            v
        }
    };
    match kind {
        TrigKind::Cos4 | TrigKind::Cos2Squared | TrigKind::Sin2Squared => {
            for p in (0..=cap).step_by(2) {
                let c = four_pow(p, (p / 2) % 2 == 1);
                coeffs[p] = match kind {
                    TrigKind::Cos4 => c,
                    TrigKind::Cos2Squared => c / rat(2, 1),
                    _ => -c / rat(2, 1),
                };
            }
            match kind {
                TrigKind::Cos2Squared => coeffs[0] += rat(1, 2),
                TrigKind::Sin2Squared => coeffs[0] += rat(1, 2),
                _ => {}
            }
        }
        TrigKind::Sin4 => {
            for p in (1..=cap).step_by(2) {
                coeffs[p] = four_pow(p, (p / 2) % 2 == 1);
            }
        }
    }
    TruncatedSeries { coeffs }
}

#[derive(Serialize, Deserialize)]
struct SeriesRepr {
    cap: usize,
    coeffs: Vec<String>,
}

impl From<TruncatedSeries> for SeriesRepr {
    fn from(s: TruncatedSeries) -> Self {
        SeriesRepr {
            cap: s.cap(),
            coeffs: s.coeffs.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl TryFrom<SeriesRepr> for TruncatedSeries {
    type Error = String;

    fn try_from(r: SeriesRepr) -> std::result::Result<Self, String> {
        if r.coeffs.len() != r.cap + 1 {
            return Err(format!(
                "series with cap {} needs {} coefficients, got {}",
                r.cap,
                r.cap + 1,
                r.coeffs.len()
            ));
        }
        let coeffs = r
            .coeffs
            .iter()
            .map(|s| {
                s.parse::<Rational>()
                    .map_err(|e| format!("bad rational {s:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TruncatedSeries { coeffs })
    }
}
