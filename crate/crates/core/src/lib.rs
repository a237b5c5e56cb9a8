//! Higher-order perturbation theory for Grover search under independent
//! per-qubit phase-flip noise.
//!
//! The success probability after `M` iterations on `n` qubits with flip
//! rate `p` is expanded in the error budget `x = 2Mnp` and evaluated in the
//! large-`n` limit as a function of the rescaled time `theta = lim M asin(2^{-n/2})`:
//!
//! * [`series`] and [`expoly`]: exact rational series and closed forms;
//! * [`recurrence`]: the `f_k`/`g_k` recurrence and `F_k = f_k / theta^k`;
//! * [`perturbation`]: the `C_k` coefficients and the truncated surface;
//! * [`phase`]: thresholds, maxima and the critical budget `x_c(P_th)`;
//! * [`sim`]: finite-`n` state-vector and density-matrix reference runs;
//! * [`oracle`]: brute-force cross-checks.

pub mod error;
pub mod expoly;
pub mod oracle;
pub mod perturbation;
pub mod phase;
pub mod recurrence;
pub mod series;
pub mod sim;

pub use error::{Error, Result};
pub use expoly::{ep_convolve, ExpPoly, Frequency, GaussianRational};
pub use oracle::{
    direct_fk_quadrature, finite_n_t1_per_qubit, finite_n_tk, integrate, pattern_enumeration,
    QuadratureResult, QuadratureSpec,
};
pub use perturbation::{compute_c, Evaluation, PerturbationTable, TruncationBound};
pub use phase::{
    fitted_slope, p_max, p_max_from, phase_curve, phase_curve_parallel, theta_th, x_c, x_c_from,
    CriticalPoint, Maximum, PhaseCurvePoint, PhaseSweep, SolverSettings, StepSchedule,
};
pub use recurrence::{
    compute_fg, compute_fg_with, normalize, ClosedForm, NormalizedOrder, OrderPair,
};
pub use series::{
    rational_to_f64, series_convolve, taylor_trig, Rational, TrigKind, TruncatedSeries,
};
pub use sim::{
    evolve_fast, evolve_literal, map_finite_n, mc_estimate, noiseless_success, run_exact_channel,
    run_trajectory, sample_pattern, DensityMatrix, ErrorPattern, MemoryCaps, SimConfig,
    StateVector, StepProbabilities,
};
