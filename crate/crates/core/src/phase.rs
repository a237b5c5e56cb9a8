//! Threshold crossings, maxima and the critical error budget of the
//! truncated success-probability surface.
//!
//! `x_c(P_th)` is the largest `x` in `[0, 10]` at which `max_theta P(theta, x)`
//! still reaches `P_th`. It is found by bisection on `x`, with the maximum
//! over theta located by a grid scan, golden-section search and a Newton
//! polish on `dP/dtheta`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturbation::{golden_max, PerturbationTable, X_WINDOW_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Residual tolerance on `|P - P_th|`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Absolute tolerance on `x_c`.
    pub bisection_tol_x: f64,
    /// Theta search interval, open at the lower end.
    pub theta_window: (f64, f64),
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            bisection_tol_x: 1e-6,
            theta_window: (0.0, FRAC_PI_2),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.theta_window;
        if !(self.newton_tol > 0.0 && self.bisection_tol_x > 0.0 && self.newton_max_iter > 0) {
            return Err(Error::InvalidParameter(
                "solver tolerances and iteration cap must be positive".into(),
            ));
        }
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta window ({lo}, {hi}] is empty"
            )));
        }
        Ok(())
    }
}

/// Maximiser and maximum of `P(., x)` over the theta window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub theta: f64,
    pub p: f64,
}

/// Result of one critical-budget solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Largest bracketed x at which the threshold is attainable.
    pub x_c: f64,
    /// Smallest bracketed x at which it is not (equal to `x_c` when
    /// saturated or when `P_th = 1`).
    pub x_upper: f64,
    /// Maximiser of `P(., x_c)`, where the threshold is last reached.
    pub theta_at_threshold: f64,
    /// The threshold is still attainable at the edge of the certified window.
    pub saturated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurvePoint {
    pub p_th: f64,
    pub x_c: f64,
    pub theta_at_threshold: f64,
    pub saturated: bool,
}

const SCAN_POINTS: usize = 256;

fn p(table: &PerturbationTable, theta: f64, x: f64) -> f64 {
    table.p_bar(theta, x).value
}

/// Newton on `dP/dtheta = 0` from `theta`, kept inside `[lo, hi]`. Returns
/// `None` if it leaves the bracket, meets non-negative curvature or stalls.
fn newton_on_slope(
    table: &PerturbationTable,
    x: f64,
    mut theta: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    for _ in 0..30 {
        let d1 = table.p_bar_dtheta(theta, x).value;
        let d2 = table.p_bar_d2theta(theta, x).value;
        if d2 >= 0.0 {
            return None;
        }
        let step = d1 / d2;
        let next = theta - step;
        if !(lo..=hi).contains(&next) {
            return None;
        }
        theta = next;
        if step.abs() <= 1e-11 {
            return Some(theta);
        }
    }
    None
}

/// Maximum of `P(., x)` over the theta window from a fresh grid scan.
pub fn p_max(table: &PerturbationTable, x: f64, settings: &SolverSettings) -> Maximum {
    let (lo, hi) = settings.theta_window;
    let h = (hi - lo) / SCAN_POINTS as f64;
    let (mut best_i, mut best) = (1, f64::NEG_INFINITY);
    for i in 1..=SCAN_POINTS {
        let v = p(table, lo + i as f64 * h, x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + (best_i as f64 - 1.0) * h;
    let b = (lo + (best_i as f64 + 1.0) * h).min(hi);
    let (g_theta, g_p) = golden_max(|t| p(table, t, x), a, b, 1e-7);
    let (theta, value) = match newton_on_slope(table, x, g_theta, a, b) {
        Some(t) => {
            let v = p(table, t, x);
            if v >= g_p {
                (t, v)
            } else {
                (g_theta, g_p)
            }
        }
        None => (g_theta, g_p),
    };
    if best > value {
        Maximum {
            theta: lo + best_i as f64 * h,
            p: best,
        }
    } else {
        Maximum { theta, p: value }
    }
}

/// Like [`p_max`], but tries Newton from `guess` first and only scans when
/// that fails.
pub fn p_max_from(
    table: &PerturbationTable,
    x: f64,
    settings: &SolverSettings,
    guess: f64,
) -> Maximum {
    let (lo, hi) = settings.theta_window;
    match newton_on_slope(table, x, guess, lo.max(1e-9), hi) {
        Some(theta) => Maximum {
            theta,
            p: p(table, theta, x),
        },
        None => p_max(table, x, settings),
    }
}

fn check_threshold(p_th: f64) -> Result<()> {
    if !(p_th > 0.0 && p_th <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {p_th} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Smallest theta in the window with `P(theta, x) = P_th`, or `None` when the
/// threshold is out of reach at this `x`.
///
/// A threshold that only touches the maximum (within `newton_tol`) returns
/// the maximiser itself.
pub fn theta_th(
    table: &PerturbationTable,
    x: f64,
    p_th: f64,
    settings: &SolverSettings,
) -> Result<Option<f64>> {
    check_threshold(p_th)?;
    settings.validate()?;
    let tol = settings.newton_tol;
    let top = p_max(table, x, settings);
    if top.p < p_th - tol {
        return Ok(None);
    }
    if top.p <= p_th + tol {
        return Ok(Some(top.theta));
    }

    // First upward crossing between the lower window edge and the maximiser.
    let lo_edge = settings.theta_window.0;
    let n = 64;
    let h = (top.theta - lo_edge) / n as f64;
    let mut a = lo_edge;
    let mut b = top.theta;
    for i in 1..=n {
        let t = lo_edge + i as f64 * h;
        if p(table, t, x) >= p_th {
            b = t;
            break;
        }
        a = t;
    }

    let f = |t: f64| p(table, t, x) - p_th;
    let mut trace = Vec::new();
    let mut theta = 0.5 * (a + b);
    for _ in 0..settings.newton_max_iter {
        let r = f(theta);
        trace.push((theta, r));
        if r.abs() <= tol {
            return Ok(Some(theta));
        }
        if r < 0.0 {
            a = theta;
        } else {
            b = theta;
        }
        let d = table.p_bar_dtheta(theta, x).value;
        let newton = theta - r / d;
        theta = if d > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Err(Error::NoConvergence {
        reason: format!(
            "threshold {p_th} at x = {x}: no root within {} iterations",
            settings.newton_max_iter
        ),
        trace,
    })
}

/// Critical budget `x_c(P_th)` by bisection on `[0, 10]`.
pub fn x_c(
    table: &PerturbationTable,
    p_th: f64,
    settings: &SolverSettings,
) -> Result<CriticalPoint> {
    check_threshold(p_th)?;
    settings.validate()?;
    let attainable = |m: &Maximum| m.p >= p_th - settings.newton_tol;
    let at_zero = p_max(table, 0.0, settings);
    if p_th == 1.0 || !attainable(&at_zero) {
        return Ok(CriticalPoint {
            x_c: 0.0,
            x_upper: 0.0,
            theta_at_threshold: at_zero.theta,
            saturated: false,
        });
    }
    let at_edge = p_max(table, X_WINDOW_MAX, settings);
    if attainable(&at_edge) {
        return Ok(saturated(at_edge.theta));
    }
    let (lo, hi, theta) = bisect(
        p_th,
        settings,
        (0.0, at_zero.theta),
        X_WINDOW_MAX,
        |x, guess| p_max_from(table, x, settings, guess),
    );
    Ok(CriticalPoint {
        x_c: lo,
        x_upper: hi,
        theta_at_threshold: theta,
        saturated: false,
    })
}

fn saturated(theta: f64) -> CriticalPoint {
    CriticalPoint {
        x_c: X_WINDOW_MAX,
        x_upper: X_WINDOW_MAX,
        theta_at_threshold: theta,
        saturated: true,
    }
}

/// Bisection keeping `p_max(lo) >= P_th - tol > p_max(hi)`.
fn bisect(
    p_th: f64,
    settings: &SolverSettings,
    (mut lo, mut theta_lo): (f64, f64),
    mut hi: f64,
    mut max_at: impl FnMut(f64, f64) -> Maximum,
) -> (f64, f64, f64) {
    while hi - lo > settings.bisection_tol_x {
        let mid = 0.5 * (lo + hi);
        let m = max_at(mid, theta_lo);
        if m.p >= p_th - settings.newton_tol {
            lo = mid;
            theta_lo = m.theta;
        } else {
            hi = mid;
        }
    }
    (lo, hi, theta_lo)
}

/// `x_c(P_th)` warm-started from the solution at a larger threshold: the
/// previous `x_c` is a valid lower bracket because `x_c` cannot decrease as
/// the threshold drops.
pub fn x_c_from(
    table: &PerturbationTable,
    p_th: f64,
    settings: &SolverSettings,
    previous: &CriticalPoint,
    initial_width: f64,
) -> Result<CriticalPoint> {
    check_threshold(p_th)?;
    if previous.saturated {
        return Ok(saturated(previous.theta_at_threshold));
    }
    let attainable = |m: &Maximum| m.p >= p_th - settings.newton_tol;
    let warm = |x: f64, guess: f64| p_max_from(table, x, settings, guess);

    let lo = previous.x_c;
    let theta_lo = previous.theta_at_threshold;
    let mut width = initial_width.max(4.0 * settings.bisection_tol_x);
    let mut lo_b = (lo, theta_lo);
    let hi = loop {
        let hi = (lo_b.0 + width).min(X_WINDOW_MAX);
        let m = warm(hi, lo_b.1);
        if !attainable(&m) {
            break hi;
        }
        if hi >= X_WINDOW_MAX {
            return Ok(saturated(m.theta));
        }
        lo_b = (hi, m.theta);
        width *= 2.0;
    };
    let (lo, hi, theta) = bisect(p_th, settings, lo_b, hi, warm);
    Ok(CriticalPoint {
        x_c: lo,
        x_upper: hi,
        theta_at_threshold: theta,
        saturated: false,
    })
}

/// How the threshold is stepped down from its starting value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Uniform {
        step: f64,
    },
    /// `step(P) = step_at_one * P^g`, with `g` chosen so that the step is
    /// `step_at_anchor` at `P = anchor`; never below `step_at_anchor`.
    Graded {
        step_at_one: f64,
        step_at_anchor: f64,
        anchor: f64,
    },
}

impl StepSchedule {
    /// 5e-4 near `P_th = 1`, refining to 5e-7 around `P_th = 3.7e-3`.
    pub fn fig2() -> Self {
        StepSchedule::Graded {
            step_at_one: 5e-4,
            step_at_anchor: 5e-7,
            anchor: 3.7e-3,
        }
    }

    pub fn step_at(&self, p_th: f64) -> f64 {
        match *self {
            StepSchedule::Uniform { step } => step,
            StepSchedule::Graded {
                step_at_one,
                step_at_anchor,
                anchor,
            } => {
                let g = (step_at_one / step_at_anchor).ln() / (1.0 / anchor).ln();
                (step_at_one * p_th.powf(g)).clamp(step_at_anchor, step_at_one)
            }
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            StepSchedule::Uniform { step } => step > 0.0,
            StepSchedule::Graded {
                step_at_one,
                step_at_anchor,
                anchor,
            } => {
                step_at_anchor > 0.0 && step_at_one > step_at_anchor && anchor > 0.0 && anchor < 1.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub p_th_start: f64,
    pub p_th_end: f64,
    pub schedule: StepSchedule,
}

impl PhaseSweep {
    /// `p_th_start`, then one schedule step at a time, ending exactly at
    /// `p_th_end`.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out = vec![self.p_th_start];
        let mut p = self.p_th_start;
        while p > self.p_th_end {
            p = (p - self.schedule.step_at(p)).max(self.p_th_end);
            out.push(p);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold(self.p_th_start)?;
        check_threshold(self.p_th_end)?;
        if self.p_th_end > self.p_th_start {
            return Err(Error::InvalidParameter(format!(
                "sweep must run downward, got {} -> {}",
                self.p_th_start, self.p_th_end
            )));
        }
        let ok = self.schedule.is_valid();
        if !ok {
            return Err(Error::InvalidParameter(
                "step schedule must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sequential sweep over [`PhaseSweep::thresholds`], each solve warm
/// started from the previous point. Stops after the first saturated point.
pub fn phase_curve(
    table: &PerturbationTable,
    sweep: &PhaseSweep,
    settings: &SolverSettings,
) -> Result<Vec<PhaseCurvePoint>> {
    sweep.validate()?;
    settings.validate()?;
    let mut out: Vec<PhaseCurvePoint> = Vec::new();
    let mut prev: Option<CriticalPoint> = None;
    let mut width = 1e-3;
    for p_th in sweep.thresholds() {
        let cp = match &prev {
            None => x_c(table, p_th, settings)?,
            Some(last) => {
                let cp = x_c_from(table, p_th, settings, last, width)?;
                width = 2.0 * (cp.x_c - last.x_c);
                cp
            }
        };
        out.push(PhaseCurvePoint {
            p_th,
            x_c: cp.x_c,
            theta_at_threshold: cp.theta_at_threshold,
            saturated: cp.saturated,
        });
        if cp.saturated {
            break;
        }
        prev = Some(cp);
    }
    Ok(out)
}

/// Independent solves for each threshold, each from a fresh bracket. Unlike
/// [`phase_curve`] this does not stop at saturation.
pub fn phase_curve_parallel(
    table: &PerturbationTable,
    thresholds: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<PhaseCurvePoint>> {
    settings.validate()?;
    thresholds
        .par_iter()
        .map(|&p_th| {
            x_c(table, p_th, settings).map(|cp| PhaseCurvePoint {
                p_th,
                x_c: cp.x_c,
                theta_at_threshold: cp.theta_at_threshold,
                saturated: cp.saturated,
            })
        })
        .collect()
}

/// Least-squares slope of `x_c` against `P_th` over the given points.
pub fn fitted_slope(points: &[PhaseCurvePoint]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|q| q.p_th).sum::<f64>() / n;
    let my = points.iter().map(|q| q.x_c).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|q| (q.p_th - mx) * (q.x_c - my)).sum();
    let sxx: f64 = points.iter().map(|q| (q.p_th - mx).powi(2)).sum();
    sxy / sxx
}
