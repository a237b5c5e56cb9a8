//! Exact closed forms in the basis `t^a e^{i w t}` with `w` in `{-4, 0, +4}`.
//!
//! Every function produced by the recurrence, starting from `sin^2 2t` and
//! `cos^2 2t`, is a finite combination of these terms with Gaussian-rational
//! coefficients. Real-valued functions satisfy `c(-w, a) = conj(c(w, a))`.

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{factorials, rat, Rational, TruncatedSeries};

/// Complex number with exact rational parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianRational {
    pub re: Rational,
    pub im: Rational,
}

impl GaussianRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        Self { re, im }
    }

    pub fn real(re: Rational) -> Self {
        Self::new(re, Rational::zero())
    }

    pub fn zero() -> Self {
        Self::real(Rational::zero())
    }

    pub fn i() -> Self {
        Self::new(Rational::zero(), Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn scale(&self, r: &Rational) -> Self {
        Self::new(&self.re * r, &self.im * r)
    }

    /// `(i w)^m` for an integer frequency `w`.
    fn i_omega_pow(omega: i64, m: usize) -> Self {
        let mag = Rational::from_integer(num_bigint::BigInt::from(omega).pow(m as u32));
        match m % 4 {
            0 => Self::real(mag),
            1 => Self::new(Rational::zero(), mag),
            2 => Self::real(-mag),
            _ => Self::new(Rational::zero(), -mag),
        }
    }
}

impl Add for &GaussianRational {
    type Output = GaussianRational;
    fn add(self, o: Self) -> GaussianRational {
        GaussianRational::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl Sub for &GaussianRational {
    type Output = GaussianRational;
    fn sub(self, o: Self) -> GaussianRational {
        GaussianRational::new(&self.re - &o.re, &self.im - &o.im)
    }
}

impl Mul for &GaussianRational {
    type Output = GaussianRational;
    fn mul(self, o: Self) -> GaussianRational {
        GaussianRational::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }
}

impl Neg for &GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> GaussianRational {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
}

/// Oscillation frequency of a basis term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Frequency {
    Minus4,
    Zero,
    Plus4,
}

impl Frequency {
    pub fn omega(self) -> i64 {
        match self {
            Frequency::Minus4 => -4,
            Frequency::Zero => 0,
            Frequency::Plus4 => 4,
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Frequency::Minus4 => Frequency::Plus4,
            Frequency::Zero => Frequency::Zero,
            Frequency::Plus4 => Frequency::Minus4,
        }
    }
}

impl TryFrom<i64> for Frequency {
    type Error = String;
    fn try_from(w: i64) -> std::result::Result<Self, String> {
        match w {
            -4 => Ok(Frequency::Minus4),
            0 => Ok(Frequency::Zero),
            4 => Ok(Frequency::Plus4),
            _ => Err(format!("frequency {w} outside {{-4, 0, 4}}")),
        }
    }
}

impl From<Frequency> for i64 {
    fn from(f: Frequency) -> i64 {
        f.omega()
    }
}

/// Finite sum `sum c(w, a) t^a e^{i w t}`; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ExpPolyRepr", into = "ExpPolyRepr")]
pub struct ExpPoly {
    terms: BTreeMap<(Frequency, u32), GaussianRational>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Frequency::Zero, 0, GaussianRational::real(c));
        p
    }

    /// `c t^power` (frequency zero).
    pub fn monomial(c: Rational, power: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(Frequency::Zero, power, GaussianRational::real(c));
        p
    }

    /// `cos(4t) = (e^{4it} + e^{-4it}) / 2`
    pub fn cos4() -> Self {
        let mut p = Self::zero();
        p.add_term(Frequency::Plus4, 0, GaussianRational::real(rat(1, 2)));
        p.add_term(Frequency::Minus4, 0, GaussianRational::real(rat(1, 2)));
        p
    }

    /// `sin(4t) = (e^{4it} - e^{-4it}) / 2i`
    pub fn sin4() -> Self {
        let mut p = Self::zero();
        p.add_term(
            Frequency::Plus4,
            0,
            GaussianRational::new(Rational::zero(), rat(-1, 2)),
        );
        p.add_term(
            Frequency::Minus4,
            0,
            GaussianRational::new(Rational::zero(), rat(1, 2)),
        );
        p
    }

    /// `sin^2(2t) = 1/2 - cos(4t)/2`
    pub fn sin2_squared() -> Self {
        &Self::constant(rat(1, 2)) - &Self::cos4().scale(&rat(1, 2))
    }

    /// `cos^2(2t) = 1/2 + cos(4t)/2`
    pub fn cos2_squared() -> Self {
        &Self::constant(rat(1, 2)) + &Self::cos4().scale(&rat(1, 2))
    }

    pub fn add_term(&mut self, freq: Frequency, power: u32, c: GaussianRational) {
        let key = (freq, power);
        let sum = match self.terms.get(&key) {
            Some(old) => old + &c,
            None => c,
        };
        if sum.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, sum);
        }
    }

    pub fn coeff(&self, freq: Frequency, power: u32) -> GaussianRational {
        self.terms
            .get(&(freq, power))
            .cloned()
            .unwrap_or_else(GaussianRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Frequency, u32, &GaussianRational)> {
        self.terms.iter().map(|(&(f, a), c)| (f, a, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_power(&self) -> Option<u32> {
        self.terms.keys().map(|&(_, a)| a).max()
    }

    pub fn scale(&self, r: &Rational) -> Self {
        let mut out = Self::zero();
        for (f, a, c) in self.terms() {
            out.add_term(f, a, c.scale(r));
        }
        out
    }

    /// True when the coefficient table is conjugate-symmetric, i.e. the
    /// function is real-valued.
    pub fn is_real(&self) -> bool {
        self.terms()
            .all(|(f, a, c)| self.coeff(f.negate(), a) == c.conj())
    }

    /// Cosine/sine view for one power: the `t^a` part of the function is
    /// `constant + cos_coeff * cos(4t) + sin_coeff * sin(4t)`.
    pub fn trig_coefficients(&self, power: u32) -> TrigTerm {
        let c = self.coeff(Frequency::Plus4, power);
        // c e^{4it} + conj(c) e^{-4it} = 2 Re c cos 4t - 2 Im c sin 4t
        TrigTerm {
            constant: self.coeff(Frequency::Zero, power).re,
            cos_coeff: &c.re * rat(2, 1),
            sin_coeff: -(&c.im * rat(2, 1)),
        }
    }

    /// Exact Maclaurin expansion truncated at `t^cap`.
    pub fn to_series(&self, cap: usize) -> Result<TruncatedSeries> {
        let fact = factorials(cap);
        let mut acc = vec![GaussianRational::zero(); cap + 1];
        for (f, a, c) in self.terms() {
            let a = a as usize;
            if a > cap {
                continue;
            }
            for m in 0..=(cap - a) {
                let w = GaussianRational::i_omega_pow(f.omega(), m)
                    .scale(&Rational::new(1.into(), fact[m].clone()));
                if w.is_zero() {
                    continue;
                }
                acc[a + m] = &acc[a + m] + &(c * &w);
            }
        }
        let mut coeffs = Vec::with_capacity(cap + 1);
        for (power, g) in acc.into_iter().enumerate() {
            if !g.im.is_zero() {
                return Err(Error::ImaginaryResidue { power });
            }
            coeffs.push(g.re);
        }
        Ok(TruncatedSeries::from_coeffs(coeffs))
    }

    /// Direct double-precision evaluation of `self(t) / t^divisor`, term by
    /// term, with no protection against cancellation between large terms.
    pub fn eval_naive(&self, theta: f64, divisor: u32) -> Result<f64> {
        if theta == 0.0 && self.terms().any(|(_, a, _)| a < divisor) {
            return Err(Error::SingularAtZero);
        }
        let mut sum = 0.0;
        for (f, a, c) in self.terms() {
            let re = crate::series::rational_to_f64(&c.re);
            let im = crate::series::rational_to_f64(&c.im);
            let phase = f.omega() as f64 * theta;
            let value = re * phase.cos() - im * phase.sin();
            sum += value * theta.powi(a as i32 - divisor as i32);
        }
        Ok(sum)
    }
}

/// One power of the real cosine/sine form of an [`ExpPoly`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrigTerm {
    pub constant: Rational,
    pub cos_coeff: Rational,
    pub sin_coeff: Rational,
}

impl Add for &ExpPoly {
    type Output = ExpPoly;
    fn add(self, o: Self) -> ExpPoly {
        let mut out = self.clone();
        for (f, a, c) in o.terms() {
            out.add_term(f, a, c.clone());
        }
        out
    }
}

impl Sub for &ExpPoly {
    type Output = ExpPoly;
    fn sub(self, o: Self) -> ExpPoly {
        let mut out = self.clone();
        for (f, a, c) in o.terms() {
            out.add_term(f, a, -c);
        }
        out
    }
}

/// Which exponential a partial result multiplies.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Side {
    /// `t^p`, later multiplied by `e^{i w1 t}`
    Outer,
    /// `t^p e^{lambda t}`, which after the outer factor oscillates at `w2`
    Inner,
}

type Partial = BTreeMap<(Side, u32), GaussianRational>;

fn partial_add(acc: &mut Partial, key: (Side, u32), c: GaussianRational) {
    let sum = match acc.get(&key) {
        Some(old) => old + &c,
        None => c,
    };
    if sum.is_zero() {
        acc.remove(&key);
    } else {
        acc.insert(key, sum);
    }
}

/// `J(i, j) = int_0^t (t - s)^i s^j e^{lambda s} ds` with `lambda = i*delta`,
/// `delta != 0`, via the integration-by-parts recursion
/// `J(i,j) = [i=0] t^j e^{lambda t}/lambda - [j=0] t^i/lambda
///           + (i/lambda) J(i-1,j) - (j/lambda) J(i,j-1)`.
struct OffDiagonal {
    inv_lambda: GaussianRational,
    memo: HashMap<(u32, u32), Partial>,
}

impl OffDiagonal {
    fn new(delta: i64) -> Self {
        // 1 / (i delta) = -i / delta
        Self {
            inv_lambda: GaussianRational::new(Rational::zero(), rat(-1, delta)),
            memo: HashMap::new(),
        }
    }

    fn get(&mut self, i: u32, j: u32) -> Partial {
        if let Some(p) = self.memo.get(&(i, j)) {
            return p.clone();
        }
        let mut out = Partial::new();
        if i == 0 {
            partial_add(&mut out, (Side::Inner, j), self.inv_lambda.clone());
        }
        if j == 0 {
            partial_add(&mut out, (Side::Outer, i), -&self.inv_lambda);
        }
        if i > 0 {
            let factor = self.inv_lambda.scale(&rat(i as i64, 1));
            for (k, c) in self.get(i - 1, j) {
                partial_add(&mut out, k, &factor * &c);
            }
        }
        if j > 0 {
            let factor = -&self.inv_lambda.scale(&rat(j as i64, 1));
            for (k, c) in self.get(i, j - 1) {
                partial_add(&mut out, k, &factor * &c);
            }
        }
        self.memo.insert((i, j), out.clone());
        out
    }
}

/// Exact `int_0^t a(t - s) w(s) ds` for closed forms `a` and `w`.
pub fn ep_convolve(a: &ExpPoly, w: &ExpPoly) -> ExpPoly {
    let max_power = a.max_power().unwrap_or(0).max(w.max_power().unwrap_or(0)) as usize;
    let fact = factorials(2 * max_power + 1);
    let mut tables: HashMap<i64, OffDiagonal> = HashMap::new();
    let mut out = ExpPoly::zero();

    for (fa, i, ca) in a.terms() {
        for (fw, j, cw) in w.terms() {
            let c = ca * cw;
            if fa == fw {
                // e^{i w t} int (t-s)^i s^j ds
                let beta = Rational::new(
                    &fact[i as usize] * &fact[j as usize],
                    fact[(i + j + 1) as usize].clone(),
                );
                out.add_term(fa, i + j + 1, c.scale(&beta));
            } else {
                // e^{i wa t} int (t-s)^i s^j e^{i (ww - wa) s} ds
                let delta = fw.omega() - fa.omega();
                let table = tables
                    .entry(delta)
                    .or_insert_with(|| OffDiagonal::new(delta));
                for ((side, p), coef) in table.get(i, j) {
                    let freq = match side {
                        Side::Outer => fa,
                        Side::Inner => fw,
                    };
                    out.add_term(freq, p, &c * &coef);
                }
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    freq: Frequency,
    power: u32,
    re: String,
    im: String,
}

#[derive(Serialize, Deserialize)]
struct ExpPolyRepr {
    terms: Vec<TermRepr>,
}

impl From<ExpPoly> for ExpPolyRepr {
    fn from(p: ExpPoly) -> Self {
        ExpPolyRepr {
            terms: p
                .terms()
                .map(|(freq, power, c)| TermRepr {
                    freq,
                    power,
                    re: c.re.to_string(),
                    im: c.im.to_string(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ExpPolyRepr> for ExpPoly {
    type Error = String;
    fn try_from(r: ExpPolyRepr) -> std::result::Result<Self, String> {
        let mut p = ExpPoly::zero();
        for t in r.terms {
            let parse = |s: &str| {
                s.parse::<Rational>()
                    .map_err(|e| format!("bad rational {s:?}: {e}"))
            };
            p.add_term(
                t.freq,
                t.power,
                GaussianRational::new(parse(&t.re)?, parse(&t.im)?),
            );
        }
        Ok(p)
    }
}

impl std::fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut powers: Vec<u32> = self.terms().map(|(_, a, _)| a).collect();
        powers.dedup();
        let mut first = true;
        for a in powers {
            let t = self.trig_coefficients(a);
            for (c, name) in [
                (&t.constant, ""),
                (&t.cos_coeff, " cos4t"),
                (&t.sin_coeff, " sin4t"),
            ] {
                if c.is_zero() {
                    continue;
                }
                let sign = if c.is_negative() { "-" } else { "+" };
                if first {
                    if c.is_negative() {
                        write!(f, "-")?;
                    }
                } else {
                    write!(f, " {sign} ")?;
                }
                first = false;
                write!(f, "({}) t^{}{}", c.abs(), a, name)?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{series_convolve, taylor_trig, TrigKind};
    use std::f64::consts::FRAC_PI_4;

    fn first_order() -> ExpPoly {
        &ep_convolve(&ExpPoly::sin2_squared(), &ExpPoly::cos2_squared())
            + &ep_convolve(&ExpPoly::cos2_squared(), &ExpPoly::sin2_squared())
    }

    #[test]
    fn constants_convolve_to_identity() {
        let one = ExpPoly::constant(rat(1, 1));
        assert_eq!(ep_convolve(&one, &one), ExpPoly::monomial(rat(1, 1), 1));
    }

    #[test]
    fn first_order_closed_form() {
        // Theta/2 - (Theta/4) cos 4Theta - (1/16) sin 4Theta
        let f1 = first_order();
        assert!(f1.is_real());
        assert_eq!(
            f1.trig_coefficients(1),
            TrigTerm {
                constant: rat(1, 2),
                cos_coeff: rat(-1, 4),
                sin_coeff: rat(0, 1)
            }
        );
        assert_eq!(
            f1.trig_coefficients(0),
            TrigTerm {
                constant: rat(0, 1),
                cos_coeff: rat(0, 1),
                sin_coeff: rat(-1, 16)
            }
        );
        assert_eq!(f1.max_power(), Some(1));
    }

    #[test]
    fn off_diagonal_pair_matches_series_route() {
        // e^{4it} convolved with 1 and with t^2 e^{-4it}; checked against the
        // Taylor-series convolution.
        let mut a = ExpPoly::zero();
        a.add_term(
            Frequency::Plus4,
            1,
            GaussianRational::new(rat(1, 3), rat(2, 5)),
        );
        a.add_term(
            Frequency::Minus4,
            1,
            GaussianRational::new(rat(1, 3), rat(-2, 5)),
        );
        let mut w = ExpPoly::constant(rat(3, 1));
        w.add_term(
            Frequency::Minus4,
            2,
            GaussianRational::new(rat(0, 1), rat(1, 1)),
        );
        w.add_term(
            Frequency::Plus4,
            2,
            GaussianRational::new(rat(0, 1), rat(-1, 1)),
        );
        let r = ep_convolve(&a, &w);
        assert!(r.is_real());
        let cap = 14;
        let expected = crate::series::series_convolve(
            &a.to_series(cap).unwrap(),
            &w.to_series(cap).unwrap(),
            cap,
        );
        assert_eq!(r.to_series(cap).unwrap(), expected);
    }

    #[test]
    fn series_of_sin2_squared_matches_taylor() {
        assert_eq!(
            ExpPoly::sin2_squared().to_series(30).unwrap(),
            taylor_trig(TrigKind::Sin2Squared, 30)
        );
    }

    #[test]
    fn non_real_closed_form_is_flagged() {
        let mut p = ExpPoly::zero();
        p.add_term(Frequency::Plus4, 0, GaussianRational::real(rat(1, 1)));
        assert!(!p.is_real());
        assert!(matches!(
            p.to_series(3),
            Err(Error::ImaginaryResidue { power: 1 })
        ));
    }

    #[test]
    fn naive_evaluation() {
        let f1 = first_order();
        // cos(pi) = -1, sin(pi) = 0 -> 1/2 + 1/4
        assert!((f1.eval_naive(FRAC_PI_4, 1).unwrap() - 0.75).abs() < 1e-12);
        for &t in &[0.1, 0.7, 2.5] {
            let f0 = ExpPoly::sin2_squared().eval_naive(t, 0).unwrap();
            assert!((f0 - (2.0 * t).sin().powi(2)).abs() < 1e-15);
        }
        assert!(matches!(f1.eval_naive(0.0, 1), Err(Error::SingularAtZero)));
        assert_eq!(ExpPoly::sin2_squared().eval_naive(0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let f1 = first_order();
        let text = serde_json::to_string(&f1).unwrap();
        let back: ExpPoly = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f1);
        assert!(serde_json::from_str::<ExpPoly>(
            r#"{"terms":[{"freq":8,"power":0,"re":"1","im":"0"}]}"#
        )
        .is_err());
    }

    fn real_expoly(parts: &[(u8, u32, i64, i64)]) -> ExpPoly {
        parts
            .iter()
            .fold(ExpPoly::zero(), |acc, &(kind, power, num, den)| {
                let c = rat(num, den);
                let t = ExpPoly::monomial(rat(1, 1), power);
                let term = match kind % 3 {
                    0 => ExpPoly::monomial(c, power),
                    1 => times(&t, &ExpPoly::cos4().scale(&c)),
                    _ => times(&t, &ExpPoly::sin4().scale(&c)),
                };
                &acc + &term
            })
    }

    /// Product with a pure power `t^a` (single term, frequency zero).
    fn times(power: &ExpPoly, p: &ExpPoly) -> ExpPoly {
        let (_, a, _) = power.terms().next().unwrap();
        let mut out = ExpPoly::zero();
        for (f, k, c) in p.terms() {
            out.add_term(f, k + a, c.clone());
        }
        out
    }

    proptest::proptest! {
        #[test]
        fn convolution_routes_agree(
            a in proptest::collection::vec((0u8..3, 0u32..4, -5i64..6, 1i64..5), 1..4),
            w in proptest::collection::vec((0u8..3, 0u32..4, -5i64..6, 1i64..5), 1..4),
        ) {
            let (a, w) = (real_expoly(&a), real_expoly(&w));
            let cap = 12;
            let conv = ep_convolve(&a, &w);
            proptest::prop_assert!(conv.is_real());
            let via_series = series_convolve(&a.to_series(cap).unwrap(), &w.to_series(cap).unwrap(), cap);
            proptest::prop_assert_eq!(conv.to_series(cap).unwrap(), via_series);
        }
    }
}
