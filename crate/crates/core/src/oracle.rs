//! Brute-force cross-checks for the recurrence and the simulator.
//!
//! * [`direct_fk_quadrature`] integrates the `2^k` squared sine/cosine
//!   products over the `k`-simplex with nested adaptive Gauss-Kronrod rules.
//! * [`finite_n_tk`] sums single-error placements on an explicit state
//!   vector at finite `n`.
//! * [`pattern_enumeration`] averages the gate-level evolution over every
//!   flip pattern.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{evolve_literal, fwht, noiseless_success};

/// Highest order handled by [`direct_fk_quadrature`].
pub const MAX_QUADRATURE_ORDER: usize = 3;
/// Qubit cap for [`finite_n_tk`].
pub const FINITE_N_MAX_QUBITS: u32 = 20;
/// Cap on `2Mn`, the number of flip opportunities enumerated.
pub const PATTERN_MAX_BITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub k: usize,
    pub theta: f64,
    /// Absolute tolerance on the normalised value.
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 30;

/// One G7K15 panel of an integrand that returns `(value, error)`; the
/// integrand's own errors are integrated with the Kronrod weights.
fn gk15(f: &impl Fn(f64) -> (f64, f64), a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (mut kron, mut gauss, mut inner) = (0.0, 0.0, 0.0);
    for i in 0..8 {
        let pts: &[f64] = if i == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for s in pts {
            let (v, e) = f(c + s * h * XGK[i]);
            kron += WGK[i] * v;
            inner += WGK[i] * e;
            if i % 2 == 1 {
                gauss += WG[i / 2] * v;
            }
        }
    }
    (kron * h, ((kron - gauss) * h).abs() + inner * h.abs())
}

fn adaptive(f: &impl Fn(f64) -> (f64, f64), a: f64, b: f64, tol: f64, depth: u32) -> (f64, f64) {
    let (v, e) = gk15(f, a, b);
    if e <= tol || depth >= MAX_DEPTH || b - a <= f64::EPSILON * a.abs().max(1.0) {
        return (v, e);
    }
    let c = 0.5 * (a + b);
    let (v1, e1) = adaptive(f, a, c, 0.5 * tol, depth + 1);
    let (v2, e2) = adaptive(f, c, b, 0.5 * tol, depth + 1);
    (v1 + v2, e1 + e2)
}

/// `int_a^b f`, adaptive to an absolute tolerance, with an error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> QuadratureResult {
    let (value, error_estimate) = adaptive(&|t| (f(t), 0.0), a, b, tol, 0);
    QuadratureResult {
        value,
        error_estimate,
    }
}

/// Squared product summed over all `2^k` labels. `phis` holds the `k`
/// integration variables; the last factor takes the remaining time.
fn diagram_sum(theta: f64, phis: &[f64]) -> f64 {
    let k = phis.len();
    let rest = theta - phis.iter().sum::<f64>();
    let mut total = 0.0;
    for labels in 0u32..1 << k {
        let mut prod = 1.0;
        for (s, phi) in phis.iter().enumerate() {
            let alpha = labels >> s & 1;
            let (sin, cos) = (2.0 * phi).sin_cos();
            // the first variable has sine and cosine swapped
            prod *= match (s == 0, alpha) {
                (true, 0) | (false, 1) => sin,
                _ => cos,
            };
        }
        let (sin, cos) = (2.0 * rest).sin_cos();
        prod *= if labels.count_ones() % 2 == 0 {
            cos
        } else {
            sin
        };
        total += prod * prod;
    }
    total
}

/// Nested integral over `phis[depth..]` with upper limits shrinking by the
/// variables already fixed.
fn nested(theta: f64, phis: &[f64], k: usize, tol: f64) -> (f64, f64) {
    if phis.len() == k {
        return (diagram_sum(theta, phis), 0.0);
    }
    let upper = theta - phis.iter().sum::<f64>();
    if upper <= 0.0 {
        return (0.0, 0.0);
    }
    let inner_tol = tol / (4.0 * upper);
    let f = |phi: f64| {
        let mut v = phis.to_vec();
        v.push(phi);
        nested(theta, &v, k, inner_tol)
    };
    adaptive(&f, 0.0, upper, 0.5 * tol, 0)
}

/// `F_k(theta)` straight from the `k`-fold integral, `k <= 3`.
pub fn direct_fk_quadrature(spec: &QuadratureSpec) -> Result<QuadratureResult> {
    if !(1..=MAX_QUADRATURE_ORDER).contains(&spec.k) {
        return Err(Error::InvalidParameter(format!(
            "quadrature order {} outside 1..={MAX_QUADRATURE_ORDER}",
            spec.k
        )));
    }
    if !(spec.theta > 0.0 && spec.theta <= std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!(
            "theta {} outside (0, pi]",
            spec.theta
        )));
    }
    if spec.tol.is_nan() || spec.tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let scale = spec.theta.powi(spec.k as i32);
    let (raw, err) = nested(spec.theta, &[], spec.k, spec.tol * scale);
    let out = QuadratureResult {
        value: raw / scale,
        error_estimate: err / scale,
    };
    if out.error_estimate > spec.tol {
        return Err(Error::Quadrature {
            value: out.value,
            estimate: out.error_estimate,
            tol: spec.tol,
        });
    }
    Ok(out)
}

/// `W` with the `1/sqrt(N)` normalisation.
fn walsh(v: &mut [f64]) {
    fwht(v);
    let s = (v.len() as f64).sqrt().recip();
    v.iter_mut().for_each(|x| *x *= s);
}

/// `(W R0)^l W|0>` for `l = 0..=rounds`.
fn forward_states(n: u32, rounds: usize) -> Vec<Vec<f64>> {
    let dim = 1usize << n;
    let mut v = vec![(dim as f64).sqrt().recip(); dim];
    let mut out = vec![v.clone()];
    for _ in 0..rounds {
        v[0] = -v[0];
        walsh(&mut v);
        out.push(v.clone());
    }
    out
}

/// `(R0 W)^r |0>` for `r = 0..=rounds`, i.e. the bras `<0|(W R0)^r`.
fn backward_states(n: u32, rounds: usize) -> Vec<Vec<f64>> {
    let dim = 1usize << n;
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    let mut out = vec![v.clone()];
    for _ in 0..rounds {
        walsh(&mut v);
        v[0] = -v[0];
        out.push(v.clone());
    }
    out
}

fn check_finite_n(n: u32, m: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} (need n >= 2)")));
    }
    if n > FINITE_N_MAX_QUBITS {
        return Err(Error::MemoryGuard {
            n: n as usize,
            cap: FINITE_N_MAX_QUBITS as usize,
            mode: "finite-n",
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    Ok(())
}

/// Contribution of each error qubit `i` to `<0|T_1|0>`, summed over the
/// `2M` error rounds.
pub fn finite_n_t1_per_qubit(n: u32, m: u32) -> Result<Vec<f64>> {
    check_finite_n(n, m)?;
    let rounds = 2 * m as usize;
    let fwd = forward_states(n, rounds);
    let bwd = backward_states(n, rounds);
    Ok((0..n)
        .into_par_iter()
        .map(|q| t1_for_qubit(&fwd, &bwd, rounds, q))
        .collect())
}

fn t1_for_qubit(fwd: &[Vec<f64>], bwd: &[Vec<f64>], rounds: usize, qubit: u32) -> f64 {
    (0..rounds)
        .map(|l| {
            let amp: f64 = fwd[l]
                .iter()
                .zip(&bwd[rounds - l])
                .enumerate()
                .map(|(idx, (a, b))| if idx >> qubit & 1 == 1 { -a * b } else { a * b })
                .sum();
            amp * amp
        })
        .sum()
}

/// `<0|T_k|0> / (Mn)^k` at finite `n`, for `k` in {0, 1}. The sum over the
/// error qubit is replaced by `n` times qubit 0, since every qubit enters
/// `W` and `R0` the same way.
pub fn finite_n_tk(n: u32, m: u32, k: usize) -> Result<f64> {
    match k {
        0 => Ok(noiseless_success(n, m)),
        1 => {
            check_finite_n(n, m)?;
            let rounds = 2 * m as usize;
            let fwd = forward_states(n, rounds);
            let bwd = backward_states(n, rounds);
            Ok(t1_for_qubit(&fwd, &bwd, rounds, 0) / m as f64)
        }
        _ => Err(Error::InvalidParameter(format!(
            "finite-n order {k} not in {{0, 1}}"
        ))),
    }
}

/// Success probabilities averaged over every flip pattern, weighted by
/// `p^k (1-p)^(2Mn-k)`.
pub fn pattern_enumeration(n: u32, m: u32, p: f64) -> Result<Vec<f64>> {
    if n < 2 || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("n = {n}, p = {p}")));
    }
    let bits = 2 * m * n;
    if bits > PATTERN_MAX_BITS {
        return Err(Error::MemoryGuard {
            n: bits as usize,
            cap: PATTERN_MAX_BITS as usize,
            mode: "pattern",
        });
    }
    let mask = (1u64 << n) - 1;
    let steps = m as usize + 1;
    let partial: Vec<Vec<f64>> = (0u64..1 << bits)
        .into_par_iter()
        .map(|code| {
            let pattern: Vec<(u64, u64)> = (0..m as u64)
                .map(|j| {
                    let a = code >> (2 * j * n as u64) & mask;
                    let b = code >> ((2 * j + 1) * n as u64) & mask;
                    (a, b)
                })
                .collect();
            // later rounds do not affect earlier steps; summing them out
            // with their weights leaves each step correctly averaged
            let w = weight(code, bits, p);
            evolve_literal(n, &pattern)
                .into_iter()
                .map(|v| v * w)
                .collect()
        })
        .collect();
    let mut out = vec![0.0; steps];
    for row in &partial {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Ok(out)
}

fn weight(code: u64, bits: u32, p: f64) -> f64 {
    let k = code.count_ones() as i32;
    p.powi(k) * (1.0 - p).powi(bits as i32 - k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::PerturbationTable;
    use crate::recurrence::{compute_fg, normalize};
    use crate::sim::{map_finite_n, run_exact_channel, SimConfig};
    use std::f64::consts::FRAC_PI_4;

    fn spec(k: usize, theta: f64, tol: f64) -> QuadratureSpec {
        QuadratureSpec { k, theta, tol }
    }

    #[test]
    fn plain_integration() {
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!(r.error_estimate < 1e-12);
    }

    #[test]
    fn low_orders_at_quarter_period() {
        let r1 = direct_fk_quadrature(&spec(1, FRAC_PI_4, 1e-8)).unwrap();
        assert!((r1.value - 0.75).abs() < 1e-8, "{r1:?}");
        let r2 = direct_fk_quadrature(&spec(2, FRAC_PI_4, 1e-8)).unwrap();
        assert!((r2.value - 5.0 / 16.0).abs() < 1e-8, "{r2:?}");
    }

    #[test]
    fn agrees_with_recurrence() {
        let pairs = compute_fg(3, 40);
        for (k, pair) in pairs.iter().enumerate().skip(1) {
            let fk = normalize(pair).unwrap();
            for &t in &[0.3, FRAC_PI_4, 1.0] {
                let q = direct_fk_quadrature(&spec(k, t, 1e-9)).unwrap().value;
                assert!((q - fk.series.eval(t)).abs() < 1e-7, "k={k} t={t}");
                let closed = fk.closed.as_ref().unwrap().eval_naive(t).unwrap();
                assert!((q - closed).abs() < 1e-7, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn error_estimate_is_honest() {
        for k in 1..=3 {
            let mut tol = 1e-4;
            let mut prev = direct_fk_quadrature(&spec(k, 1.0, tol)).unwrap();
            for _ in 0..4 {
                tol *= 0.5;
                let next = direct_fk_quadrature(&spec(k, 1.0, tol)).unwrap();
                assert!((next.value - prev.value).abs() <= prev.error_estimate + 1e-15);
                prev = next;
            }
        }
    }

    #[test]
    fn quadrature_rejects_bad_specs() {
        assert!(direct_fk_quadrature(&spec(4, 1.0, 1e-6)).is_err());
        assert!(direct_fk_quadrature(&spec(1, 0.0, 1e-6)).is_err());
        assert!(direct_fk_quadrature(&spec(1, 4.0, 1e-6)).is_err());
    }

    #[test]
    fn qubits_contribute_equally() {
        let per = finite_n_t1_per_qubit(4, 3).unwrap();
        for v in &per {
            assert!((v - per[0]).abs() < 1e-14, "{per:?}");
        }
        let t1 = finite_n_tk(4, 3, 1).unwrap();
        assert!((t1 - per.iter().sum::<f64>() / 12.0).abs() < 1e-14);
    }

    #[test]
    fn single_error_sum_matches_patterns() {
        // <0|T_1|0> is the total success probability over one-flip patterns
        let (n, m) = (3u32, 2u32);
        let mut direct = 0.0;
        for round in 0..2 * m as usize {
            for q in 0..n {
                let mut pat = vec![(0u64, 0u64); m as usize];
                let slot = &mut pat[round / 2];
                if round % 2 == 0 {
                    slot.0 = 1 << q;
                } else {
                    slot.1 = 1 << q;
                }
                direct += evolve_literal(n, &pat)[m as usize];
            }
        }
        let t1 = finite_n_tk(n, m, 1).unwrap() * (m * n) as f64;
        assert!((t1 - direct).abs() < 1e-13);
    }

    #[test]
    fn finite_n_zeroth_order() {
        assert_eq!(finite_n_tk(9, 17, 0).unwrap(), noiseless_success(9, 17));
        assert!(finite_n_tk(9, 17, 2).is_err());
        assert!(matches!(
            finite_n_tk(21, 1, 1),
            Err(Error::MemoryGuard { .. })
        ));
    }

    #[test]
    fn first_order_approaches_large_n_limit() {
        let f1 = normalize(&compute_fg(1, 40)[1]).unwrap().series;
        let mut prev_gap = f64::INFINITY;
        for n in [6u32, 8, 10, 12] {
            let th = 0.5f64.powf(n as f64 / 2.0).asin();
            let m = (FRAC_PI_4 / th).round() as u32;
            let gap = (finite_n_tk(n, m, 1).unwrap() - f1.eval(m as f64 * th)).abs();
            assert!(gap < prev_gap, "n={n}: {gap} vs {prev_gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.02);
    }

    #[test]
    fn first_order_at_simulation_size() {
        let table = PerturbationTable::new().unwrap();
        let (theta, _) = map_finite_n(17, 9, 0.0).unwrap();
        let finite = finite_n_tk(9, 17, 1).unwrap();
        assert!((finite - 0.708_099_399_227).abs() < 1e-10, "{finite}");
        let limit = table.normalized()[1].series.eval(theta);
        let gap = (finite - limit).abs();
        assert!(gap < 0.05 && (gap - 0.0378).abs() < 1e-3, "{gap}");
    }

    #[test]
    fn patterns_match_exact_channel() {
        for &p in &[0.1, 0.3] {
            let enumerated = pattern_enumeration(2, 1, p).unwrap();
            let exact = run_exact_channel(&SimConfig::new(2, 1, p, 1, 0)).unwrap();
            for (a, b) in enumerated.iter().zip(&exact.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let enumerated = pattern_enumeration(2, 2, 0.2).unwrap();
        let exact = run_exact_channel(&SimConfig::new(2, 2, 0.2, 1, 0)).unwrap();
        for (a, b) in enumerated.iter().zip(&exact.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
