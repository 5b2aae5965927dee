use serde::{Deserialize, Serialize};

use super::density::{empirical_density, gaussian_density, GridDensityPair};
use super::grid::Grid2D;
use super::pde::{AdvectionScheme, PdeParams, PdeSolver};
use super::testfn::standard_family;
use super::weakform::{bl_distance, MeasureSnapshot, WeakFormAccumulator};
use crate::error::{param, Result};
use crate::estimators::{map_paths, InitialCondition};
use crate::model::{SystemParams, Vec2};
use crate::sde::Integrator;
use crate::stats::{mean_estimate, Estimate};

/// Particles versus PDE from the same Gaussian start: `N/2` positives around
/// `(−offset, 0)` and `N/2` negatives around `(offset, 0)`, both with
/// per-coordinate standard deviation `std`, pair coupling `γ_N = γ̄/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSetup {
    pub sigma: f64,
    pub gammabar: f64,
    /// Defaults to `σ²/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub std: f64,
    pub offset: f64,
    pub horizon: f64,
    pub particle_dt: f64,
    pub epsilon: f64,
    pub pde_dt: f64,
    pub grid: Grid2D,
    pub bandwidth: f64,
    pub n_paths: usize,
    #[serde(default)]
    pub scheme: AdvectionScheme,
}

impl MeanFieldSetup {
    pub fn nu(&self) -> f64 {
        self.nu.unwrap_or(0.5 * self.sigma * self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(param("sigma", "must be > 0"));
        }
        if !(self.sigma * self.sigma > 2.0 * self.gammabar) {
            return Err(param("gammabar", "need sigma^2 > 2 gammabar"));
        }
        if !(self.std > 0.0 && self.horizon > 0.0 && self.particle_dt > 0.0 && self.pde_dt > 0.0) {
            return Err(param("std/horizon/dt", "must be > 0"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(param("bandwidth", "must be > 0"));
        }
        if self.n_paths == 0 {
            return Err(param("n_paths", "must be >= 1"));
        }
        Grid2D::new(self.grid.half_width, self.grid.resolution)?;
        Ok(())
    }

    pub fn initial_density(&self) -> Result<GridDensityPair> {
        let v = self.std * self.std;
        GridDensityPair::new(
            self.grid,
            gaussian_density(&self.grid, Vec2::new(-self.offset, 0.0), v, 0.5)?,
            gaussian_density(&self.grid, Vec2::new(self.offset, 0.0), v, 0.5)?,
        )
    }

    /// PDE states at `t = k·pde_dt`, `k = 0..=round(T/pde_dt)`.
    pub fn solve_pde(&self) -> Result<Vec<GridDensityPair>> {
        let steps = (self.horizon / self.pde_dt).round().max(1.0) as usize;
        let dt = self.horizon / steps as f64;
        let mut solver = PdeSolver::new(
            self.grid,
            PdeParams { gammabar: self.gammabar, nu: self.nu(), scheme: self.scheme },
        )?;
        solver.run(&self.initial_density()?, dt, steps)
    }

    pub fn system(&self, n: usize) -> SystemParams {
        SystemParams {
            sigma: self.sigma,
            gamma: self.gammabar / n as f64,
            n_particles: n,
            epsilon: self.epsilon,
            ell: None,
            dt: self.particle_dt,
            horizon: self.horizon,
        }
    }
}

/// Per-path outcome at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConvergence {
    /// Against the PDE target, when one was given.
    pub bl_distance: Option<f64>,
    /// `𝒲[T, φ](L^N)` per family member.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub bl: Option<Estimate>,
    /// Mean over paths and family of `|𝒲|`.
    pub w_abs: Estimate,
    /// Mean over paths of `|𝒲[T, φ]|` per family member.
    pub w_abs_by_phi: Vec<f64>,
    pub paths: Vec<PathConvergence>,
}

/// Runs `setup.n_paths` particle systems of size `n`, evaluating the weak-form
/// residual and, if `target` is given, the BL distance to it at the horizon.
pub fn convergence_point(
    setup: &MeanFieldSetup,
    n: usize,
    target: Option<&GridDensityPair>,
    base_seed: u64,
) -> Result<ConvergencePoint> {
    setup.validate()?;
    let params = setup.system(n);
    let initial = InitialCondition::IidGaussianNeutral { n, std: setup.std, offset: setup.offset };
    initial.validate()?;
    let nu = setup.nu();
    let paths = map_paths(&initial, setup.n_paths, base_seed, |_, start, noise| {
        let mut acc = WeakFormAccumulator::standard(setup.gammabar, nu);
        let mut integ = Integrator::new(start, &params, &noise, &[])?;
        fn snap(integ: &Integrator) -> MeasureSnapshot<'_> {
            MeasureSnapshot::Atoms {
                config: integ.config(),
                interaction: Some(&integ.scan().interaction),
                epsilon: integ.params().epsilon,
            }
        }
        acc.push(integ.time(), snap(&integ))?;
        while !integ.finished() {
            integ.advance()?;
            acc.push(integ.time(), snap(&integ))?;
        }
        let bl = match target {
            Some(t) => {
                let density = empirical_density(integ.config(), &setup.grid, setup.bandwidth)?;
                Some(bl_distance(&density, t, &setup.grid)?)
            }
            None => None,
        };
        Ok(PathConvergence { bl_distance: bl, residuals: acc.residuals() })
    })?;
    let family = standard_family().len();
    let bl: Option<Vec<f64>> = paths.iter().map(|p| p.bl_distance).collect();
    let w: Vec<f64> = paths.iter().map(|p| p.residuals.iter().map(|r| r.abs()).sum::<f64>() / family as f64).collect();
    let w_abs_by_phi = (0..family)
        .map(|k| paths.iter().map(|p| p.residuals[k].abs()).sum::<f64>() / paths.len() as f64)
        .collect();
    Ok(ConvergencePoint {
        n,
        bl: bl.map(|v| mean_or_point(&v)).transpose()?,
        w_abs: mean_or_point(&w)?,
        w_abs_by_phi,
        paths,
    })
}

fn mean_or_point(v: &[f64]) -> Result<Estimate> {
    if v.len() == 1 {
        return Ok(Estimate { value: v[0], lo: v[0], hi: v[0], n: 1 });
    }
    mean_estimate(v)
}

/// Seed of the `k`-th point of a scan; the path seeds of different points are disjoint.
pub fn seed_for(base_seed: u64, k: usize) -> u64 {
    base_seed.wrapping_add((k as u64) << 32)
}

/// Solves the PDE once and runs [`convergence_point`] for every `N`, the
/// `k`-th with seed [`seed_for`]`(base_seed, k)`.
pub fn convergence_scan(setup: &MeanFieldSetup, ns: &[usize], base_seed: u64) -> Result<(Vec<GridDensityPair>, Vec<ConvergencePoint>)> {
    setup.validate()?;
    let pde = setup.solve_pde()?;
    let target = pde.last().expect("solver returns the initial state");
    let mut out = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let seed = seed_for(base_seed, k);
        out.push(convergence_point(setup, n, Some(target), seed)?);
    }
    Ok((pde, out))
}
