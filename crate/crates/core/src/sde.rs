//! Euler–Maruyama integration of the regularized signed system
//!
//! `dX^i = σ dB^i + γ Φ_ℓ(X) Σ_j b^i b^j K_ε(X^i − X^j) dt`
//!
//! with reproducible per-particle noise and per-step diagnostics.

use std::sync::Once;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{
    check_permutation, cutoff_from_distance, MinDistances, PairScan, PairScanner,
    SignedConfiguration, SystemParams, Vec2,
};
use crate::noise::{standard_normal, NoiseRng, NoiseStream};

/// One explicit step `x_i ↦ x_i + σ√dt·ξ_i + drift_i·dt` from standard normal `ξ`.
pub fn step_em(
    config: &SignedConfiguration,
    params: &SystemParams,
    increments: &[Vec2],
) -> Result<SignedConfiguration> {
    if increments.len() != config.len() {
        return Err(param(
            "increments",
            format!("expected {} increments, got {}", config.len(), increments.len()),
        ));
    }
    let scan = PairScanner::default().scan(config, params.epsilon, &[]);
    let scale = params.gamma * cutoff_from_distance(scan.min.same, params.ell);
    let mut next = config.clone();
    advance_positions(next.positions_mut(), &scan.interaction, increments, scale, params);
    Ok(next)
}

#[inline]
fn advance_positions(
    positions: &mut [Vec2],
    interaction: &[Vec2],
    increments: &[Vec2],
    drift_scale: f64,
    params: &SystemParams,
) {
    let sd = params.sigma * params.dt.sqrt();
    for ((x, &f), &xi) in positions.iter_mut().zip(interaction).zip(increments) {
        let drift = f * drift_scale;
        *x = *x + xi * sd + drift * params.dt;
    }
}

/// Diagnostics of one recorded state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub min: MinDistances,
    pub phi: f64,
    /// `Σ_i |drift_i|`.
    pub drift_l1: f64,
    /// Two distinct particles occupy the same point.
    pub singular_event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SignedConfiguration>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Trapezoidal `∫₀ᵀ Σ_i |Σ_j b^i b^j K_ε(X^i − X^j)| dt` at full step resolution.
    pub drift_integral: f64,
    /// Number of steps (of all, not only recorded) flagged as singular.
    pub singular_events: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &SignedConfiguration {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Stepper that exposes the state and pair scan after every step, so
/// observers can accumulate quantities at full time resolution.
pub struct Integrator {
    params: SystemParams,
    config: SignedConfiguration,
    lanes: Vec<NoiseRng>,
    scanner: PairScanner,
    scan: PairScan,
    alphas: Vec<f64>,
    increments: Vec<Vec2>,
    step: usize,
    n_steps: usize,
    drift_integral: f64,
    moment_integrals: Vec<f64>,
    singular_events: usize,
}

impl Integrator {
    /// Particle `i` draws its noise from lane `i` of `noise`.
    pub fn new(
        initial: SignedConfiguration,
        params: &SystemParams,
        noise: &NoiseStream,
        alphas: &[f64],
    ) -> Result<Self> {
        let lanes: Vec<u64> = (0..initial.len() as u64).collect();
        Self::with_lanes(initial, params, noise, &lanes, alphas)
    }

    /// Particle `i` draws its noise from lane `lanes[i]`.
    pub fn with_lanes(
        initial: SignedConfiguration,
        params: &SystemParams,
        noise: &NoiseStream,
        lanes: &[u64],
        alphas: &[f64],
    ) -> Result<Self> {
        params.validate()?;
        if initial.len() != params.n_particles {
            return Err(param(
                "n_particles",
                format!("params say {}, configuration has {}", params.n_particles, initial.len()),
            ));
        }
        if lanes.len() != initial.len() {
            return Err(param("lanes", "need one noise lane per particle"));
        }
        if params.dt > params.recommended_dt() {
            static WARNED: Once = Once::new();
            WARNED.call_once(|| {
                log::warn!(
                    "dt = {} exceeds the recommended eps^2/(4 gamma N) = {:.3e}",
                    params.dt,
                    params.recommended_dt()
                )
            });
        }
        let mut scanner = PairScanner::default();
        let mut scan = PairScan::default();
        scanner.scan_into(&initial, params.epsilon, alphas, &mut scan);
        let n = initial.len();
        Ok(Self {
            params: *params,
            lanes: lanes.iter().map(|&l| noise.lane(l)).collect(),
            config: initial,
            scanner,
            singular_events: usize::from(scan.coincident),
            scan,
            alphas: alphas.to_vec(),
            increments: vec![Vec2::ZERO; n],
            step: 0,
            n_steps: params.n_steps(),
            drift_integral: 0.0,
            moment_integrals: vec![0.0; alphas.len()],
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn finished(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.dt
    }

    pub fn config(&self) -> &SignedConfiguration {
        &self.config
    }

    /// Pair scan of the current state.
    pub fn scan(&self) -> &PairScan {
        &self.scan
    }

    pub fn cutoff(&self) -> f64 {
        cutoff_from_distance(self.scan.min.same, self.params.ell)
    }

    pub fn diagnostics(&self) -> StepDiagnostics {
        let phi = self.cutoff();
        StepDiagnostics {
            t: self.time(),
            min: self.scan.min,
            phi,
            drift_l1: self.params.gamma * phi * l1(&self.scan.interaction),
            singular_event: self.scan.coincident,
        }
    }

    pub fn drift_integral(&self) -> f64 {
        self.drift_integral
    }

    /// Trapezoidal `∫ Σ_{i≠j} |X^i − X^j|^{α−2} dt` so far, per recorded `α`.
    pub fn moment_integrals(&self) -> &[f64] {
        &self.moment_integrals
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn singular_events(&self) -> usize {
        self.singular_events
    }

    /// Performs one Euler–Maruyama step and rescans the new state.
    pub fn advance(&mut self) -> Result<()> {
        for (inc, rng) in self.increments.iter_mut().zip(self.lanes.iter_mut()) {
            let x = standard_normal(rng);
            let y = standard_normal(rng);
            *inc = Vec2::new(x, y);
        }
        let scale = self.params.gamma * self.cutoff();
        let before_l1 = l1(&self.scan.interaction);
        let before_moments = self.scan.moment_sums.clone();
        advance_positions(
            self.config.positions_mut(),
            &self.scan.interaction,
            &self.increments,
            scale,
            &self.params,
        );
        self.step += 1;
        if let Some(particle) = self.config.positions().iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteState {
                step: self.step,
                particle,
            });
        }
        self.scanner
            .scan_into(&self.config, self.params.epsilon, &self.alphas, &mut self.scan);
        let half_dt = 0.5 * self.params.dt;
        self.drift_integral += half_dt * (before_l1 + l1(&self.scan.interaction));
        for ((acc, a), b) in self
            .moment_integrals
            .iter_mut()
            .zip(&before_moments)
            .zip(&self.scan.moment_sums)
        {
            *acc += half_dt * (a + b);
        }
        if self.scan.coincident {
            self.singular_events += 1;
        }
        Ok(())
    }
}

fn l1(v: &[Vec2]) -> f64 {
    v.iter().map(|f| f.norm()).sum()
}

/// Simulates `[0, horizon]`, recording every `record_every`-th step and the final one.
pub fn simulate(
    initial: &SignedConfiguration,
    params: &SystemParams,
    noise: &NoiseStream,
    record_every: usize,
) -> Result<Trajectory> {
    let lanes: Vec<u64> = (0..initial.len() as u64).collect();
    simulate_with_lanes(initial, params, noise, &lanes, record_every)
}

pub fn simulate_with_lanes(
    initial: &SignedConfiguration,
    params: &SystemParams,
    noise: &NoiseStream,
    lanes: &[u64],
    record_every: usize,
) -> Result<Trajectory> {
    if record_every == 0 {
        return Err(param("record_every", "must be >= 1"));
    }
    initial.ensure_distinct()?;
    let mut integ = Integrator::with_lanes(initial.clone(), params, noise, lanes, &[])?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![initial.clone()],
        diagnostics: vec![integ.diagnostics()],
        drift_integral: 0.0,
        singular_events: 0,
    };
    while !integ.finished() {
        integ.advance()?;
        if integ.step_index() % record_every == 0 || integ.finished() {
            traj.times.push(integ.time());
            traj.states.push(integ.config().clone());
            traj.diagnostics.push(integ.diagnostics());
        }
    }
    traj.drift_integral = integ.drift_integral();
    traj.singular_events = integ.singular_events();
    Ok(traj)
}

/// Runs the system and its relabelling by `perm`, where particle `i` of the
/// second run is particle `perm[i]` of the first and reads the same noise lane.
/// The second trajectory equals the first with every state permuted.
pub fn permute_and_rerun(
    initial: &SignedConfiguration,
    params: &SystemParams,
    noise: &NoiseStream,
    perm: &[usize],
) -> Result<(Trajectory, Trajectory)> {
    check_permutation(perm, initial.len())?;
    let first = simulate(initial, params, noise, 1)?;
    let lanes: Vec<u64> = perm.iter().map(|&p| p as u64).collect();
    let second = simulate_with_lanes(&initial.permuted(perm)?, params, noise, &lanes, 1)?;
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{drift, Sign};
    use approx::assert_relative_eq;

    fn params(sigma: f64, gamma: f64, n: usize) -> SystemParams {
        SystemParams {
            sigma,
            gamma,
            n_particles: n,
            epsilon: 0.0,
            ell: None,
            dt: 0.1,
            horizon: 1.0,
        }
    }

    fn pair() -> SignedConfiguration {
        SignedConfiguration::from_raw(&[[-1.0, 0.0], [1.0, 0.0]], &[1, -1]).unwrap()
    }

    #[test]
    fn step_examples() {
        let single = SignedConfiguration::from_raw(&[[0.3, -0.2]], &[1]).unwrap();
        let p = params(1.5, 1.0, 1);
        assert_eq!(step_em(&single, &p, &[Vec2::ZERO]).unwrap(), single);
        let xi = Vec2::new(0.7, -1.1);
        let next = step_em(&single, &p, &[xi]).unwrap();
        let sd = 1.5 * 0.1f64.sqrt();
        assert_eq!(next.positions()[0], Vec2::new(0.3 + 0.7 * sd, -0.2 - 1.1 * sd));

        let next = step_em(&pair(), &params(0.0, 1.0, 2), &[Vec2::ZERO; 2]).unwrap();
        assert_relative_eq!(next.positions()[0].x, -0.95, max_relative = 1e-15);
        assert_relative_eq!(next.positions()[1].x, 0.95, max_relative = 1e-15);
        assert_eq!(next.positions()[0].y, 0.0);
        assert!(step_em(&pair(), &params(0.0, 1.0, 2), &[Vec2::ZERO]).is_err());
    }

    #[test]
    fn frozen_without_noise_or_interaction() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], &[1, -1, 1])
            .unwrap();
        let t = simulate(&c, &params(0.0, 0.0, 3), &NoiseStream::new(1, 1), 1).unwrap();
        assert_eq!(t.states.len(), 11);
        assert!(t.states.iter().all(|s| *s == c));
        assert_eq!(t.times[0], 0.0);
        assert_relative_eq!(*t.times.last().unwrap(), 1.0, max_relative = 1e-12);
    }

    /// σ = 0, opposite pair on the axis: compares with an RK4 solution of
    /// `d'(t) = −2γ d/(d² + ε²)` for the separation `d`.
    #[test]
    fn deterministic_pair_matches_ode() {
        let eps = 0.05;
        let p = SystemParams {
            epsilon: eps,
            dt: 1e-4,
            horizon: 0.2,
            ..params(0.0, 1.0, 2)
        };
        let t = simulate(&pair(), &p, &NoiseStream::new(0, 0), 100).unwrap();
        let f = |d: f64| -2.0 * d / (d * d + eps * eps);
        let (mut d, h) = (2.0f64, 1e-5);
        let mut ode = vec![d];
        for k in 1..=20_000 {
            let k1 = f(d);
            let k2 = f(d + 0.5 * h * k1);
            let k3 = f(d + 0.5 * h * k2);
            let k4 = f(d + h * k3);
            d += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if k % 1000 == 0 {
                ode.push(d);
            }
        }
        let sep: Vec<f64> = t.states.iter().map(|s| s.positions()[1].x - s.positions()[0].x).collect();
        assert_eq!(sep.len(), ode.len());
        for w in sep.windows(2) {
            assert!(w[1] < w[0]);
        }
        for (a, b) in sep.iter().zip(&ode) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn deterministic_reruns() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]], &[1, -1, 1])
            .unwrap();
        let p = SystemParams { epsilon: 0.01, ..params(1.0, 0.3, 3) };
        let a = simulate(&c, &p, &NoiseStream::new(5, 2), 3).unwrap();
        let b = simulate(&c, &p, &NoiseStream::new(5, 2), 3).unwrap();
        assert_eq!(a, b);
        let other = simulate(&c, &p, &NoiseStream::new(5, 3), 3).unwrap();
        assert_ne!(a.states, other.states);
    }

    #[test]
    fn permutations_and_sign_flip() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [0.5, 0.1], [-0.3, 0.6]], &[1, 1, -1])
            .unwrap();
        let p = SystemParams { epsilon: 0.02, ell: Some(10.0), dt: 1e-3, horizon: 0.2, ..params(1.0, 0.3, 3) };
        let noise = NoiseStream::new(9, 9);
        let (a, b) = permute_and_rerun(&c, &p, &noise, &[0, 1, 2]).unwrap();
        assert_eq!(a, b);
        let perm = [1, 0, 2];
        let (a, b) = permute_and_rerun(&c, &p, &noise, &perm).unwrap();
        for (s1, s2) in a.states.iter().zip(&b.states) {
            assert_eq!(&s1.permuted(&perm).unwrap(), s2);
        }
        let flipped = simulate(&c.with_flipped_signs(), &p, &noise, 1).unwrap();
        for (s1, s2) in a.states.iter().zip(&flipped.states) {
            assert_eq!(s1.positions(), s2.positions());
            assert!(s2.signs().iter().zip(s1.signs()).all(|(x, y)| *x == y.flipped()));
        }
    }

    #[test]
    fn diagnostics_are_consistent() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [0.4, 0.0], [0.0, 0.9]], &[1, 1, -1])
            .unwrap();
        let p = SystemParams { epsilon: 0.01, ell: Some(2.0), ..params(0.5, 0.2, 3) };
        let t = simulate(&c, &p, &NoiseStream::new(1, 0), 2).unwrap();
        for (s, d) in t.states.iter().zip(&t.diagnostics) {
            let dr = drift(s, &p);
            let l1: f64 = dr.iter().map(|v| v.norm()).sum();
            assert_relative_eq!(d.drift_l1, l1, max_relative = 1e-12, epsilon = 1e-300);
            assert!(s.signs() == c.signs());
        }
        assert!(t.drift_integral > 0.0);
        assert_eq!(t.singular_events, 0);
        assert_eq!(c.signs()[2], Sign::Minus);
    }

    #[test]
    fn non_finite_states_are_reported() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [1e-160, 0.0]], &[1, 1]).unwrap();
        let p = SystemParams { dt: 1.0, ..params(0.0, 1.0, 2) };
        let err = simulate(&c, &p, &NoiseStream::new(0, 0), 1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { step: 1, .. }));
    }
}
