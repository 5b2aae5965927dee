//! Batch Monte Carlo over independent paths, and the estimators built on the
//! per-path summaries.
//!
//! Path `p` of a batch seeded with `base_seed` uses
//! `NoiseStream::new(base_seed, base_seed + p)`: its initial condition comes
//! from the reserved [`INITIAL_LANE`] and particle `i` reads lane `i`. Paths
//! run in parallel but results are collected in path order, so a batch is a
//! pure function of its inputs regardless of thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{DistanceMode, MinDistances, Sign, SignedConfiguration, SystemParams, Vec2};
use crate::noise::{standard_normal, NoiseStream, INITIAL_LANE};
use crate::sde::Integrator;
use crate::stats::{binomial_estimate, mean_estimate, Estimate};

/// Named initial-condition samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `+` at `(−s/2, 0)`, `−` at `(s/2, 0)`.
    TwoOpposite { separation: f64 },
    /// `+` at `(±r, 0)`, `−` at `(0, ±r)`.
    #[serde(rename = "cross-pattern-4")]
    CrossPattern4 { radius: f64 },
    /// `n/2` positive particles i.i.d. `N((−offset, 0), std²·I)` and `n/2`
    /// negative ones i.i.d. `N((offset, 0), std²·I)`; `n` must be even.
    IidGaussianNeutral { n: usize, std: f64, offset: f64 },
    DeterministicList { positions: Vec<[f64; 2]>, signs: Vec<i8> },
}

impl InitialCondition {
    pub fn n_particles(&self) -> usize {
        match self {
            InitialCondition::TwoOpposite { .. } => 2,
            InitialCondition::CrossPattern4 { .. } => 4,
            InitialCondition::IidGaussianNeutral { n, .. } => *n,
            InitialCondition::DeterministicList { positions, .. } => positions.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::TwoOpposite { separation } if !(*separation > 0.0) => {
                Err(param("separation", "must be > 0"))
            }
            InitialCondition::CrossPattern4 { radius } if !(*radius > 0.0) => {
                Err(param("radius", "must be > 0"))
            }
            InitialCondition::IidGaussianNeutral { n, std, .. } => {
                if *n < 2 || n % 2 != 0 {
                    Err(param("n", format!("must be even and >= 2, got {n}")))
                } else if !(*std > 0.0) {
                    Err(param("std", "must be > 0"))
                } else {
                    Ok(())
                }
            }
            InitialCondition::DeterministicList { positions, signs } => {
                let c = SignedConfiguration::from_raw(positions, signs)?;
                c.ensure_distinct()
            }
            _ => Ok(()),
        }
    }

    /// Configuration for one path; deterministic samplers ignore `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SignedConfiguration> {
        match self {
            InitialCondition::TwoOpposite { separation } => {
                let h = 0.5 * separation;
                SignedConfiguration::from_raw(&[[-h, 0.0], [h, 0.0]], &[1, -1])
            }
            InitialCondition::CrossPattern4 { radius: r } => SignedConfiguration::from_raw(
                &[[*r, 0.0], [-r, 0.0], [0.0, *r], [0.0, -r]],
                &[1, 1, -1, -1],
            ),
            InitialCondition::IidGaussianNeutral { n, std, offset } => {
                let half = n / 2;
                let mut positions = Vec::with_capacity(*n);
                let mut signs = Vec::with_capacity(*n);
                for k in 0..*n {
                    let (cx, sign) = if k < half { (-offset, Sign::Plus) } else { (*offset, Sign::Minus) };
                    let x = cx + std * standard_normal(rng);
                    let y = std * standard_normal(rng);
                    positions.push(Vec2::new(x, y));
                    signs.push(sign);
                }
                SignedConfiguration::new(positions, signs)
            }
            InitialCondition::DeterministicList { positions, signs } => {
                SignedConfiguration::from_raw(positions, signs)
            }
        }
    }
}

/// What [`run_batch`] records beyond distance infima.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    /// Exponents `α` of the pair moments `|X^i − X^j|^{α−2}`.
    pub alphas: Vec<f64>,
    /// Times at which `φ(x) = √(1+|x|²)` is averaged over particles.
    pub phi_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub initial_min: MinDistances,
    /// Infimum over all steps (full time resolution) per mode.
    pub min: MinDistances,
    /// `1/(N(N−1)) Σ_{i≠j} ∫₀ᵀ |X^i − X^j|^{α−2} dt`, one per recorded `α`.
    pub moment_integrals: Vec<f64>,
    /// `φ(X_t^i)` per recorded time, per particle.
    pub phi_by_particle: Vec<Vec<f64>>,
    pub terminal_mean_abs: f64,
    pub singular_events: usize,
    pub drift_integral: f64,
}

impl PathSummary {
    pub fn phi_mean(&self, time_index: usize) -> f64 {
        let v = &self.phi_by_particle[time_index];
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub n_paths: usize,
    pub params: SystemParams,
    pub options: BatchOptions,
    pub signs: Vec<Sign>,
    pub summaries: Vec<PathSummary>,
}

#[inline]
pub fn phi(x: Vec2) -> f64 {
    (1.0 + x.norm_sq()).sqrt()
}

/// Runs `f(path_index, initial, noise)` for every path in parallel and
/// returns the results in path order.
pub fn map_paths<T, F>(
    initial: &InitialCondition,
    n_paths: usize,
    base_seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, SignedConfiguration, NoiseStream) -> Result<T> + Sync,
{
    if n_paths == 0 {
        return Err(param("n_paths", "must be >= 1"));
    }
    initial.validate()?;
    (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let noise = NoiseStream::new(base_seed, base_seed.wrapping_add(p as u64));
            let start = initial.sample(&mut noise.lane(INITIAL_LANE))?;
            f(p, start, noise).map_err(|e| Error::PathFailed {
                path: p,
                source: Box::new(e),
            })
        })
        .collect()
}

fn time_indices(times: &[f64], dt: f64, n_steps: usize) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if t < 0.0 || (k * dt - t).abs() > 1e-9 * t.max(dt) || k as usize > n_steps {
                Err(Error::UnrecordedTime(t))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

pub fn run_batch(
    initial: &InitialCondition,
    params: &SystemParams,
    n_paths: usize,
    base_seed: u64,
    options: &BatchOptions,
) -> Result<BatchResult> {
    params.validate()?;
    if initial.n_particles() != params.n_particles {
        return Err(param(
            "n_particles",
            format!("sampler yields {}, params say {}", initial.n_particles(), params.n_particles),
        ));
    }
    let phi_steps = time_indices(&options.phi_times, params.dt, params.n_steps())?;
    let n = params.n_particles as f64;
    let pair_norm = if params.n_particles > 1 { 1.0 / (n * (n - 1.0)) } else { 0.0 };

    let summaries = map_paths(initial, n_paths, base_seed, |_, start, noise| {
        let mut integ = Integrator::new(start, params, &noise, &options.alphas)?;
        let initial_min = integ.scan().min;
        let mut min = initial_min;
        let mut phi_by_particle = vec![Vec::new(); phi_steps.len()];
        let record_phi = |integ: &Integrator, out: &mut Vec<Vec<f64>>| {
            for (slot, &k) in out.iter_mut().zip(&phi_steps) {
                if k == integ.step_index() {
                    *slot = integ.config().positions().iter().map(|&x| phi(x)).collect();
                }
            }
        };
        record_phi(&integ, &mut phi_by_particle);
        while !integ.finished() {
            integ.advance()?;
            min.min_with(&integ.scan().min);
            record_phi(&integ, &mut phi_by_particle);
        }
        let pos = integ.config().positions();
        Ok(PathSummary {
            initial_min,
            min,
            moment_integrals: integ.moment_integrals().iter().map(|m| m * pair_norm).collect(),
            phi_by_particle,
            terminal_mean_abs: pos.iter().map(|x| x.norm()).sum::<f64>() / n,
            singular_events: integ.singular_events(),
            drift_integral: integ.drift_integral(),
        })
    })?;
    // every sampler fixes the sign list, only positions are random
    let signs = initial
        .sample(&mut NoiseStream::new(base_seed, base_seed).lane(INITIAL_LANE))?
        .signs()
        .to_vec();
    Ok(BatchResult {
        n_paths,
        params: *params,
        options: options.clone(),
        signs,
        summaries,
    })
}

fn estimate_of(samples: &[f64]) -> Result<Estimate> {
    match samples.len() {
        0 => Err(Error::Degenerate(0)),
        1 => Ok(Estimate {
            value: samples[0],
            lo: samples[0],
            hi: samples[0],
            n: 1,
        }),
        _ => mean_estimate(samples),
    }
}

impl BatchResult {
    /// Estimate of `1/(N(N−1)) Σ_{i≠j} E ∫₀ᵀ |X^i − X^j|^{α−2} dt`.
    pub fn pairwise_moment(&self, alpha: f64) -> Result<Estimate> {
        let idx = self
            .options
            .alphas
            .iter()
            .position(|&a| a == alpha)
            .ok_or(Error::UnrecordedAlpha(alpha))?;
        let v: Vec<f64> = self.summaries.iter().map(|s| s.moment_integrals[idx]).collect();
        estimate_of(&v)
    }

    /// Fraction of paths whose mode distance came within `threshold`.
    pub fn collision_probability(&self, mode: DistanceMode, threshold: f64) -> Result<Estimate> {
        if !(threshold > 0.0) {
            return Err(param("threshold", "must be > 0"));
        }
        if threshold <= self.params.epsilon {
            log::warn!(
                "collision threshold {threshold} is below the regularization scale {}",
                self.params.epsilon
            );
        }
        let mut hits = 0;
        for s in &self.summaries {
            let d = s.min.get(mode).ok_or(Error::NoPair(mode))?;
            if d <= threshold {
                hits += 1;
            }
        }
        Ok(binomial_estimate(hits, self.n_paths))
    }

    fn phi_index(&self, t: f64) -> Result<usize> {
        self.options
            .phi_times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(Error::UnrecordedTime(t))
    }

    /// Estimate of `E φ(X_t^1)` with `φ(x) = √(1+|x|²)`, averaged over
    /// particles (the system is exchangeable).
    pub fn mean_abs_position(&self, t: f64) -> Result<Estimate> {
        let k = self.phi_index(t)?;
        let v: Vec<f64> = self.summaries.iter().map(|s| s.phi_mean(k)).collect();
        estimate_of(&v)
    }

    /// Estimate of `E φ(X_t^i)` for one particle.
    pub fn particle_phi(&self, t: f64, particle: usize) -> Result<Estimate> {
        let k = self.phi_index(t)?;
        let v: Vec<f64> = self.summaries.iter().map(|s| s.phi_by_particle[k][particle]).collect();
        estimate_of(&v)
    }
}

pub fn n_plus_minus(signs: &[Sign]) -> (usize, usize) {
    let p = signs.iter().filter(|&&s| s == Sign::Plus).count();
    (p, signs.len() - p)
}

/// Inputs of the pair-moment bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundInputs {
    pub alpha: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub beta0: f64,
    pub horizon: f64,
    /// `(1/N) Σ_i E|X_0^i|`, or an upper bound for it.
    pub mean_abs_x0: f64,
}

/// Right-hand side `2√2/(αδβ₀)·(1 + 5σ²T/4 + (1/N)Σ E|X_0^i|)` with
/// `δ = ασ² − 2γ(N−1)`, or `None` when the bound does not apply
/// (`γ ≥ σ²/(2(N−1))`, `α ∉ (2γ(N−1)/σ², 1)` or `β₀N > min(N₊, N₋)`).
pub fn moment_bound_rhs(b: &MomentBoundInputs) -> Option<f64> {
    let n = (b.n_plus + b.n_minus) as f64;
    let s2 = b.sigma * b.sigma;
    let delta = b.alpha * s2 - 2.0 * b.gamma * (n - 1.0);
    let applies = n >= 2.0
        && b.gamma > 0.0
        && b.gamma < s2 / (2.0 * (n - 1.0))
        && b.alpha > 2.0 * b.gamma * (n - 1.0) / s2
        && b.alpha < 1.0
        && b.beta0 > 0.0
        && b.beta0 * n <= b.n_plus.min(b.n_minus) as f64
        && delta > 0.0;
    applies.then(|| {
        2.0 * std::f64::consts::SQRT_2 / (b.alpha * delta * b.beta0)
            * (1.0 + 1.25 * s2 * b.horizon + b.mean_abs_x0)
    })
}

/// `(1/N₋) Σ_j E φ(X_0^j) + (N/N₋)(σ² + γ(N−1)/2)·t`, with `N₋` the smaller
/// sign count and `mean_phi0 = (1/N) Σ_j E φ(X_0^j)`.
pub fn phi_moment_bound(
    mean_phi0: f64,
    n_plus: usize,
    n_minus: usize,
    sigma: f64,
    gamma: f64,
    t: f64,
) -> f64 {
    let n = (n_plus + n_minus) as f64;
    let nm = n_plus.min(n_minus).max(1) as f64;
    n / nm * mean_phi0 + n / nm * (sigma * sigma + gamma * (n - 1.0) / 2.0) * t
}
