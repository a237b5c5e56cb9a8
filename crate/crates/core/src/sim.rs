//! Finite-`n` Grover search with independent phase flips before every `R0`.
//!
//! One Grover iteration is `W R0 W R0`, applied to the uniform superposition
//! `W|0>`, with a round of per-qubit `sigma_z` flips (each with probability
//! `p`) before each `R0`. Qubit `i` is bit `i` of the basis index and the
//! marked item is index 0.
//!
//! Trajectories use the identity
//!
//! ```text
//! W R0 Z_b W R0 Z_a = (I - 2|s><s|) X_b R0 Z_a
//! ```
//!
//! so no Hadamard transform is needed; [`evolve_literal`] applies the gates
//! one by one and is kept as a cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` accepted by each mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryCaps {
    /// `2^n` amplitudes per trajectory.
    pub trajectory_qubits: u32,
    /// `4^n` density-matrix entries.
    pub exact_qubits: u32,
}

impl Default for MemoryCaps {
    fn default() -> Self {
        Self {
            trajectory_qubits: 20,
            exact_qubits: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: u32,
    pub m_max: u32,
    pub p: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub caps: MemoryCaps,
}

impl SimConfig {
    pub fn new(n: u32, m_max: u32, p: f64, trials: u64, seed: u64) -> Self {
        Self {
            n,
            m_max,
            p,
            trials,
            seed,
            caps: MemoryCaps::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "n = {} (need n >= 2)",
                self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "flip probability {} outside [0, 1]",
                self.p
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }

    fn guard(&self, mode: &'static str) -> Result<()> {
        let cap = match mode {
            "exact" => self.caps.exact_qubits,
            _ => self.caps.trajectory_qubits,
        };
        // masks are held in a u64
        if self.n > cap.min(63) {
            return Err(Error::MemoryGuard {
                n: self.n as usize,
                cap: cap as usize,
                mode,
            });
        }
        Ok(())
    }
}

/// Probability of finding index 0 after `0..=m_max` iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProbabilities {
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

/// Flip masks `(a, b)` for the two rounds of each iteration.
pub type ErrorPattern = Vec<(u64, u64)>;

/// `sin^2((2M+1) theta)` with `sin theta = 2^{-n/2}`.
pub fn noiseless_success(n: u32, m: u32) -> f64 {
    let theta = (0.5f64).powf(n as f64 / 2.0).asin();
    ((2 * m + 1) as f64 * theta).sin().powi(2)
}

/// Large-`n` coordinates of a finite run: `Theta = (2M+1) theta / 2` and
/// `x = 2Mnp`.
pub fn map_finite_n(m: u32, n: u32, p: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} (need n >= 2)")));
    }
    let theta = (0.5f64).powf(n as f64 / 2.0).asin();
    Ok((
        0.5 * (2 * m + 1) as f64 * theta,
        2.0 * m as f64 * n as f64 * p,
    ))
}

fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

fn sample_mask(rng: &mut ChaCha8Rng, n: u32, p: f64) -> u64 {
    (0..n).fold(0, |mask, i| {
        if rng.random_bool(p) {
            mask | 1 << i
        } else {
            mask
        }
    })
}

/// Flip masks for trajectory `t`: ChaCha8 seeded from `cfg.seed` on stream
/// `t`, one Bernoulli draw per qubit, round `a` before round `b`.
pub fn sample_pattern(cfg: &SimConfig, trajectory: u64) -> ErrorPattern {
    let mut rng = trajectory_rng(cfg.seed, trajectory);
    (0..cfg.m_max)
        .map(|_| {
            let a = sample_mask(&mut rng, cfg.n, cfg.p);
            let b = sample_mask(&mut rng, cfg.n, cfg.p);
            (a, b)
        })
        .collect()
}

fn parity(x: u64) -> bool {
    x.count_ones() & 1 == 1
}

/// Amplitude of index 0, squared, after each iteration of `pattern`.
pub fn evolve_fast(n: u32, pattern: &[(u64, u64)]) -> Vec<f64> {
    let dim = 1usize << n;
    let mut v = vec![(dim as f64).sqrt().recip(); dim];
    let mut scratch = vec![0.0; dim];
    let mut out = Vec::with_capacity(pattern.len() + 1);
    out.push(v[0] * v[0]);
    for &(a, b) in pattern {
        if a != 0 {
            for (i, x) in v.iter_mut().enumerate() {
                if parity(i as u64 & a) {
                    *x = -*x;
                }
            }
        }
        v[0] = -v[0];
        let src: &[f64] = if b != 0 {
            for (i, x) in scratch.iter_mut().enumerate() {
                *x = v[i ^ b as usize];
            }
            &scratch
        } else {
            &v
        };
        let shift = 2.0 * src.iter().sum::<f64>() / dim as f64;
        let next: Vec<f64> = src.iter().map(|x| x - shift).collect();
        v = next;
        out.push(v[0] * v[0]);
    }
    out
}

/// Real state vector with the individual gates.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: u32,
    amps: Vec<f64>,
}

impl StateVector {
    pub fn zero(n: u32) -> Self {
        let mut amps = vec![0.0; 1 << n];
        amps[0] = 1.0;
        Self { n, amps }
    }

    pub fn qubits(&self) -> u32 {
        self.n
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// `H` on every qubit.
    pub fn hadamard_all(&mut self) {
        fwht(&mut self.amps);
        let s = (self.amps.len() as f64).sqrt().recip();
        self.amps.iter_mut().for_each(|a| *a *= s);
    }

    pub fn sigma_z(&mut self, qubit: u32) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i >> qubit & 1 == 1 {
                *a = -*a;
            }
        }
    }

    pub fn flip_marked(&mut self) {
        self.amps[0] = -self.amps[0];
    }

    pub fn success(&self) -> f64 {
        self.amps[0] * self.amps[0]
    }
}

/// Unnormalised in-place Walsh-Hadamard transform.
pub(crate) fn fwht(a: &mut [f64]) {
    let mut h = 1;
    while h < a.len() {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// Gate-by-gate evolution of `pattern`; calls `inspect` after every gate.
pub fn evolve_literal_with(
    n: u32,
    pattern: &[(u64, u64)],
    mut inspect: impl FnMut(&StateVector),
) -> Vec<f64> {
    let mut psi = StateVector::zero(n);
    psi.hadamard_all();
    inspect(&psi);
    let mut out = vec![psi.success()];
    for &(a, b) in pattern {
        for mask in [a, b] {
            for q in 0..n {
                if mask >> q & 1 == 1 {
                    psi.sigma_z(q);
                    inspect(&psi);
                }
            }
            psi.flip_marked();
            inspect(&psi);
            psi.hadamard_all();
            inspect(&psi);
        }
        out.push(psi.success());
    }
    out
}

pub fn evolve_literal(n: u32, pattern: &[(u64, u64)]) -> Vec<f64> {
    evolve_literal_with(n, pattern, |_| {})
}

/// One trajectory with seed stream `trajectory`.
pub fn run_trajectory(cfg: &SimConfig, trajectory: u64) -> Result<StepProbabilities> {
    cfg.validate()?;
    cfg.guard("trajectory")?;
    Ok(StepProbabilities {
        values: evolve_fast(cfg.n, &sample_pattern(cfg, trajectory)),
        stderr: None,
    })
}

/// Trajectories are summed in fixed blocks, reduced in block order, so the
/// result does not depend on the thread count.
const BLOCK: u64 = 256;

/// Mean and standard error over `cfg.trials` trajectories `0..trials`.
pub fn mc_estimate(cfg: &SimConfig) -> Result<StepProbabilities> {
    cfg.validate()?;
    cfg.guard("trajectory")?;
    let steps = cfg.m_max as usize + 1;
    let blocks: Vec<Moments> = (0..cfg.trials.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::new(steps);
            for t in b * BLOCK..((b + 1) * BLOCK).min(cfg.trials) {
                acc.push(&evolve_fast(cfg.n, &sample_pattern(cfg, t)));
            }
            acc
        })
        .collect();
    let total = blocks
        .into_iter()
        .fold(Moments::new(steps), |acc, b| acc.merge(&b));
    let n = total.count;
    let values = total.mean;
    let stderr = total.m2.iter().map(|m2| (m2 / n / n).sqrt()).collect();
    Ok(StepProbabilities {
        values,
        stderr: Some(stderr),
    })
}

/// Running mean and sum of squared deviations per step.
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(steps: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; steps],
            m2: vec![0.0; steps],
        }
    }

    fn push(&mut self, values: &[f64]) {
        self.count += 1.0;
        for ((mean, m2), v) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let d = v - *mean;
            *mean += d / self.count;
            *m2 += d * (v - *mean);
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        let n = self.count + other.count;
        if other.count == 0.0 {
            return self;
        }
        for m in 0..self.mean.len() {
            let d = other.mean[m] - self.mean[m];
            self.m2[m] += other.m2[m] + d * d * self.count * other.count / n;
            self.mean[m] += d * other.count / n;
        }
        self.count = n;
        self
    }
}

/// Real symmetric density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: u32,
    entries: Vec<f64>,
}

impl DensityMatrix {
    /// `W|0><0|W`.
    pub fn uniform(n: u32) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            entries: vec![(dim as f64).recip(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim() + c]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// Phase-flip channel with probability `p` on every qubit: entry `(r, c)`
    /// picks up `(1 - 2p)` for each qubit where `r` and `c` differ.
    pub fn dephase_all(&mut self, p: f64) {
        let dim = self.dim();
        let damp: Vec<f64> = (0..=self.n)
            .map(|k| (1.0 - 2.0 * p).powi(k as i32))
            .collect();
        self.entries
            .par_chunks_mut(dim)
            .enumerate()
            .for_each(|(r, row)| {
                for (c, e) in row.iter_mut().enumerate() {
                    *e *= damp[(r ^ c).count_ones() as usize];
                }
            });
    }

    pub fn flip_marked(&mut self) {
        let dim = self.dim();
        for c in 1..dim {
            self.entries[c] = -self.entries[c];
            self.entries[c * dim] = -self.entries[c * dim];
        }
    }

    pub fn hadamard_all(&mut self) {
        let dim = self.dim();
        let scale = (dim as f64).recip();
        self.entries.par_chunks_mut(dim).for_each(fwht);
        // symmetric: transform rows of the transpose
        transpose(&mut self.entries, dim);
        self.entries.par_chunks_mut(dim).for_each(|row| {
            fwht(row);
            row.iter_mut().for_each(|e| *e *= scale);
        });
        transpose(&mut self.entries, dim);
    }

    pub fn success(&self) -> f64 {
        self.entries[0]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.dim())
            .map(|r| r.to_vec())
            .collect()
    }
}

fn transpose(a: &mut [f64], dim: usize) {
    for r in 0..dim {
        for c in r + 1..dim {
            a.swap(r * dim + c, c * dim + r);
        }
    }
}

/// Exact evolution of the averaged density matrix; calls `inspect` after
/// every iteration.
pub fn run_exact_channel_with(
    cfg: &SimConfig,
    mut inspect: impl FnMut(&DensityMatrix),
) -> Result<StepProbabilities> {
    cfg.validate()?;
    cfg.guard("exact")?;
    let mut rho = DensityMatrix::uniform(cfg.n);
    let mut values = vec![rho.success()];
    for _ in 0..cfg.m_max {
        for _ in 0..2 {
            rho.dephase_all(cfg.p);
            rho.flip_marked();
            rho.hadamard_all();
        }
        inspect(&rho);
        values.push(rho.success());
    }
    Ok(StepProbabilities {
        values,
        stderr: None,
    })
}

pub fn run_exact_channel(cfg: &SimConfig) -> Result<StepProbabilities> {
    run_exact_channel_with(cfg, |_| {})
}
