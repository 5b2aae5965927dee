//! Squared Bessel processes `dR = 2√R dβ + δ dt` of arbitrary real dimension,
//! and the reduction of an opposite-sign pair to one of them.
//!
//! For two particles with `γ > 0` (opposite signs) and noise `σ`, the rescaled
//! squared separation `R = |X¹ − X²|²/(2σ²)` is BESQ(δ) with
//! `δ = 2(1 − γ/σ²)`, while the sum `X¹ + X²` is a Brownian motion with
//! variance `2σ²` per coordinate, so only `R` needs simulating.
//!
//! Thresholds and levels below are always in units of `R`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::Vec2;
use crate::noise::{standard_normal, NoiseStream};
use crate::stats::{binomial_estimate, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselSpec {
    pub dimension: f64,
    pub start: f64,
}

impl BesselSpec {
    pub fn new(dimension: f64, start: f64) -> Result<Self> {
        if !(start >= 0.0 && start.is_finite()) {
            return Err(param("start", format!("must be finite and >= 0, got {start}")));
        }
        if !dimension.is_finite() {
            return Err(param("dimension", "must be finite"));
        }
        Ok(Self { dimension, start })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// First time the path reached zero, for `δ ≤ 0` only.
    pub frozen_at: Option<f64>,
}

impl BesselPath {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Behaviour of an opposite-sign pair in terms of `γ/σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoParticleRegime {
    /// `γ < σ²/2`: the drift is integrable and the pair is a weak solution.
    WeakSolution,
    /// `σ²/2 ≤ γ < σ²`: collisions separate instantly, but the drift is not integrable.
    BesselOnly,
    /// `γ ≥ σ²`: a colliding pair stays together.
    Sticky,
}

impl TwoParticleRegime {
    pub fn name(self) -> &'static str {
        match self {
            TwoParticleRegime::WeakSolution => "weak-solution",
            TwoParticleRegime::BesselOnly => "bessel-only",
            TwoParticleRegime::Sticky => "sticky",
        }
    }
}

/// `δ = 2(1 − γ/σ²)`.
pub fn dimension_from_params(sigma: f64, gamma: f64) -> f64 {
    2.0 * (1.0 - gamma / (sigma * sigma))
}

pub fn classify_regime(sigma: f64, gamma: f64) -> TwoParticleRegime {
    let s2 = sigma * sigma;
    if gamma < 0.5 * s2 {
        TwoParticleRegime::WeakSolution
    } else if gamma < s2 {
        TwoParticleRegime::BesselOnly
    } else {
        TwoParticleRegime::Sticky
    }
}

/// `E R_t = x + δt`, `Var R_t = 4xt + 2δt²` (valid for `δ ≥ 0`).
pub fn besq_mean_var(spec: &BesselSpec, t: f64) -> (f64, f64) {
    let (x, d) = (spec.start, spec.dimension);
    (x + d * t, 4.0 * x * t + 2.0 * d * t * t)
}

/// Exact draw of `R_t` given `R_0 = x`: the noncentral chi-square as a Poisson
/// mixture, `J ~ Poisson(x/2t)`, `G ~ Gamma((δ + 2J)/2, 2)`, `R_t = t·G`.
pub fn sample_besq_exact<R: Rng + ?Sized>(spec: &BesselSpec, t: f64, rng: &mut R) -> Result<f64> {
    if !(spec.dimension > 0.0) {
        return Err(Error::Dimension(spec.dimension));
    }
    if !(t > 0.0) {
        return Err(param("t", "must be > 0"));
    }
    let lambda = spec.start / (2.0 * t);
    let j = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| param("start", e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    let shape = 0.5 * (spec.dimension + 2.0 * j);
    let g = Gamma::new(shape, 2.0)
        .map_err(|e| param("dimension", e.to_string()))?
        .sample(rng);
    Ok(t * g)
}

/// Euler–Maruyama walker for BESQ(δ), clamped at zero after each step and
/// frozen at the first zero when `δ ≤ 0`.
#[derive(Debug, Clone)]
pub struct BesqWalker {
    delta: f64,
    dt: f64,
    sqrt_dt: f64,
    value: f64,
    frozen: bool,
}

impl BesqWalker {
    pub fn new(spec: &BesselSpec, dt: f64) -> Self {
        Self {
            delta: spec.dimension,
            dt,
            sqrt_dt: dt.sqrt(),
            value: spec.start,
            frozen: spec.dimension <= 0.0 && spec.start == 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if self.frozen {
            return 0.0;
        }
        let xi = standard_normal(rng);
        let next = self.value + 2.0 * self.value.sqrt() * self.sqrt_dt * xi + self.delta * self.dt;
        self.value = next.max(0.0);
        if self.value == 0.0 && self.delta <= 0.0 {
            self.frozen = true;
        }
        self.value
    }
}

fn steps_for(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(param("dt", "must be > 0"));
    }
    if !(horizon > 0.0) {
        return Err(param("horizon", "must be > 0"));
    }
    Ok(((horizon / dt).round() as usize).max(1))
}

pub fn sample_besq_em<R: Rng + ?Sized>(
    spec: &BesselSpec,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<BesselPath> {
    let n = steps_for(dt, horizon)?;
    let mut walker = BesqWalker::new(spec, dt);
    let mut path = BesselPath {
        times: Vec::with_capacity(n + 1),
        values: Vec::with_capacity(n + 1),
        frozen_at: walker.frozen().then_some(0.0),
    };
    path.times.push(0.0);
    path.values.push(spec.start);
    for k in 1..=n {
        let was_frozen = walker.frozen();
        let v = walker.step(rng);
        let t = k as f64 * dt;
        if walker.frozen() && !was_frozen {
            path.frozen_at = Some(t);
        }
        path.times.push(t);
        path.values.push(v);
    }
    Ok(path)
}

/// Fraction of EM paths whose running minimum drops to `threshold` or below
/// on `[0, horizon]`, with a 95% binomial interval. Path `p` reads lane `p`.
pub fn zero_hit_probability(
    spec: &BesselSpec,
    horizon: f64,
    threshold: f64,
    dt: f64,
    n_paths: usize,
    noise: &NoiseStream,
) -> Result<Estimate> {
    if n_paths == 0 {
        return Err(param("n_paths", "must be >= 1"));
    }
    if !(threshold > 0.0) {
        return Err(param("threshold", "must be > 0"));
    }
    let n = steps_for(dt, horizon)?;
    let hits = (0..n_paths)
        .into_par_iter()
        .filter(|&p| {
            if spec.start <= threshold {
                return true;
            }
            let mut rng = noise.lane(p as u64);
            let mut w = BesqWalker::new(spec, dt);
            (0..n).any(|_| w.step(&mut rng) <= threshold)
        })
        .count();
    Ok(binomial_estimate(hits, n_paths))
}

/// Simulates `R` for an opposite-sign pair with initial separation `x0_diff`.
pub fn two_particle_reference<R: Rng + ?Sized>(
    sigma: f64,
    gamma: f64,
    x0_diff: Vec2,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(BesselPath, TwoParticleRegime)> {
    if !(sigma > 0.0) {
        return Err(param("sigma", "must be > 0"));
    }
    if x0_diff.norm_sq() == 0.0 {
        return Err(param("x0_diff", "initial separation must be nonzero"));
    }
    let spec = BesselSpec::new(
        dimension_from_params(sigma, gamma),
        x0_diff.norm_sq() / (2.0 * sigma * sigma),
    )?;
    let path = sample_besq_em(&spec, dt, horizon, rng)?;
    Ok((path, classify_regime(sigma, gamma)))
}

/// Summary of many two-particle reference paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeStatistics {
    pub gamma_over_sigma2: f64,
    pub delta: f64,
    pub regime: TwoParticleRegime,
    pub n_paths: usize,
    /// Paths whose minimum reached the hit threshold.
    pub hit: Estimate,
    /// Paths frozen at zero by the horizon.
    pub frozen: Estimate,
    /// Among hit paths: those that afterwards climbed back to the separation level.
    pub separation: Option<Estimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeScan {
    pub sigma: f64,
    pub x0_diff: Vec2,
    pub horizon: f64,
    pub dt: f64,
    pub hit_threshold: f64,
    pub separation_level: f64,
    pub n_paths: usize,
}

pub fn regime_statistics(
    scan: &RegimeScan,
    gamma: f64,
    noise: &NoiseStream,
) -> Result<RegimeStatistics> {
    if scan.n_paths == 0 {
        return Err(param("n_paths", "must be >= 1"));
    }
    if !(scan.separation_level > scan.hit_threshold) {
        return Err(param("separation_level", "must exceed the hit threshold"));
    }
    let sigma = scan.sigma;
    let delta = dimension_from_params(sigma, gamma);
    let r0 = scan.x0_diff.norm_sq() / (2.0 * sigma * sigma);
    let spec = BesselSpec::new(delta, r0)?;
    let n = steps_for(scan.dt, scan.horizon)?;

    let outcomes: Vec<(bool, bool, bool)> = (0..scan.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = noise.lane(p as u64);
            let mut w = BesqWalker::new(&spec, scan.dt);
            let mut hit = r0 <= scan.hit_threshold;
            let mut separated = false;
            for _ in 0..n {
                let v = w.step(&mut rng);
                if hit {
                    if v >= scan.separation_level {
                        separated = true;
                    }
                } else if v <= scan.hit_threshold {
                    hit = true;
                }
                if w.frozen() || separated {
                    break;
                }
            }
            (hit, w.frozen(), separated)
        })
        .collect();

    let hits = outcomes.iter().filter(|o| o.0).count();
    let frozen = outcomes.iter().filter(|o| o.1).count();
    let separated = outcomes.iter().filter(|o| o.2).count();
    Ok(RegimeStatistics {
        gamma_over_sigma2: gamma / (sigma * sigma),
        delta,
        regime: classify_regime(sigma, gamma),
        n_paths: scan.n_paths,
        hit: binomial_estimate(hits, scan.n_paths),
        frozen: binomial_estimate(frozen, scan.n_paths),
        separation: (hits > 0).then(|| binomial_estimate(separated, hits)),
    })
}
