use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::GridDensityPair;
use super::fft::Fft2;
use super::grid::Grid2D;
use crate::error::{param, Error, Result};
use crate::model::{Sign, Vec2};

/// Largest admissible `dt · max|u| / h`.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    /// Minmod-limited linear reconstruction.
    Muscl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    pub gammabar: f64,
    pub nu: f64,
    #[serde(default)]
    pub scheme: AdvectionScheme,
}

impl PdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gammabar >= 0.0 && self.gammabar.is_finite()) {
            return Err(param("gammabar", "must be finite and >= 0"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(param("nu", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Strang-split solver holding FFT plans and work buffers for one grid.
#[derive(Debug, Clone)]
pub struct PdeSolver {
    grid: Grid2D,
    params: PdeParams,
    fft: Fft2,
    buf: Vec<Complex64>,
    bx: Vec<Complex64>,
    by: Vec<Complex64>,
    flux: Vec<f64>,
}

impl PdeSolver {
    pub fn new(grid: Grid2D, params: PdeParams) -> Result<Self> {
        params.validate()?;
        let n = grid.len();
        Ok(Self {
            grid,
            params,
            fft: Fft2::new(grid.resolution),
            buf: vec![Complex64::default(); n],
            bx: vec![Complex64::default(); n],
            by: vec![Complex64::default(); n],
            flux: vec![0.0; n],
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn params(&self) -> &PdeParams {
        &self.params
    }

    /// `K * f` for a signed node array `f`.
    pub fn velocity(&mut self, diff: &[f64]) -> Vec<Vec2> {
        let m = self.grid.resolution;
        assert_eq!(diff.len(), m * m);
        for (z, &v) in self.buf.iter_mut().zip(diff) {
            *z = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut self.buf);
        let two_pi = 2.0 * std::f64::consts::PI;
        for iy in 0..m {
            let ky = if iy == m / 2 { 0.0 } else { self.grid.wavenumber(iy) };
            for ix in 0..m {
                let kx = if ix == m / 2 { 0.0 } else { self.grid.wavenumber(ix) };
                let k = iy * m + ix;
                let k2 = kx * kx + ky * ky;
                let f = self.buf[k];
                if k2 == 0.0 {
                    self.bx[k] = Complex64::default();
                    self.by[k] = Complex64::default();
                } else {
                    // K̂(k) = −2πi k/|k|²
                    let c = f * Complex64::new(0.0, -two_pi / k2);
                    self.bx[k] = c * kx;
                    self.by[k] = c * ky;
                }
            }
        }
        self.fft.inverse(&mut self.bx);
        self.fft.inverse(&mut self.by);
        self.bx.iter().zip(&self.by).map(|(a, b)| Vec2::new(a.re, b.re)).collect()
    }

    fn diffuse(&mut self, data: &mut [f64], tau: f64) {
        if self.params.nu == 0.0 || tau == 0.0 {
            return;
        }
        let m = self.grid.resolution;
        for (z, &v) in self.buf.iter_mut().zip(data.iter()) {
            *z = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut self.buf);
        for iy in 0..m {
            let ky = self.grid.wavenumber(iy);
            for ix in 0..m {
                let kx = self.grid.wavenumber(ix);
                self.buf[iy * m + ix] *= (-self.params.nu * (kx * kx + ky * ky) * tau).exp();
            }
        }
        self.fft.inverse(&mut self.buf);
        for (v, z) in data.iter_mut().zip(&self.buf) {
            *v = z.re;
        }
    }

    /// Finite-volume update `ρ ← ρ − dt/h · div F` with face velocities
    /// averaged from the nodes. `scale` is `±γ̄`.
    fn advect(&mut self, data: &mut [f64], u: &[Vec2], scale: f64, dt: f64) {
        let m = self.grid.resolution;
        let r = dt / self.grid.spacing();
        let scheme = self.params.scheme;
        let at = |ix: isize, iy: isize| -> usize {
            (iy.rem_euclid(m as isize) as usize) * m + ix.rem_euclid(m as isize) as usize
        };
        // flux through the face between node (ix, iy) and its +axis neighbour
        let face = |data: &[f64], ix: isize, iy: isize, axis: usize| -> f64 {
            let (sx, sy) = if axis == 0 { (1, 0) } else { (0, 1) };
            let i0 = at(ix, iy);
            let i1 = at(ix + sx, iy + sy);
            let comp = |v: Vec2| if axis == 0 { v.x } else { v.y };
            let uf = 0.5 * scale * (comp(u[i0]) + comp(u[i1]));
            let (left, right) = match scheme {
                AdvectionScheme::Upwind => (data[i0], data[i1]),
                AdvectionScheme::Muscl => {
                    let im = at(ix - sx, iy - sy);
                    let i2 = at(ix + 2 * sx, iy + 2 * sy);
                    let sl = minmod(data[i0] - data[im], data[i1] - data[i0]);
                    let sr = minmod(data[i1] - data[i0], data[i2] - data[i1]);
                    (data[i0] + 0.5 * sl, data[i1] - 0.5 * sr)
                }
            };
            if uf > 0.0 {
                uf * left
            } else {
                uf * right
            }
        };
        let mut fx = std::mem::take(&mut self.flux);
        let mut fy = vec![0.0; m * m];
        for iy in 0..m as isize {
            for ix in 0..m as isize {
                let k = at(ix, iy);
                fx[k] = face(data, ix, iy, 0);
                fy[k] = face(data, ix, iy, 1);
            }
        }
        for iy in 0..m as isize {
            for ix in 0..m as isize {
                let k = at(ix, iy);
                data[k] -= r * (fx[k] - fx[at(ix - 1, iy)] + fy[k] - fy[at(ix, iy - 1)]);
            }
        }
        self.flux = fx;
    }

    /// One Strang step: half diffusion, advection, half diffusion, then
    /// clamping of negative values with per-species mass renormalization.
    pub fn step(&mut self, state: &GridDensityPair, dt: f64) -> Result<GridDensityPair> {
        if state.grid != self.grid {
            return Err(Error::GridMismatch("state grid differs from solver grid".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(param("dt", "must be > 0"));
        }
        let mut next = state.clone();
        let masses = [state.mass(Sign::Plus), state.mass(Sign::Minus)];
        self.diffuse(&mut next.plus, 0.5 * dt);
        self.diffuse(&mut next.minus, 0.5 * dt);
        if self.params.gammabar != 0.0 {
            let u = self.velocity(&next.difference());
            let umax = u.iter().map(|v| v.x.abs().max(v.y.abs())).fold(0.0, f64::max);
            let courant = dt * self.params.gammabar * umax / self.grid.spacing();
            if courant > CFL_LIMIT {
                return Err(Error::Cfl { courant, limit: CFL_LIMIT });
            }
            let g = self.params.gammabar;
            self.advect(&mut next.plus, &u, g, dt);
            self.advect(&mut next.minus, &u, -g, dt);
        }
        self.diffuse(&mut next.plus, 0.5 * dt);
        self.diffuse(&mut next.minus, 0.5 * dt);
        for (data, mass) in [(&mut next.plus, masses[0]), (&mut next.minus, masses[1])] {
            clamp_renormalize(data, mass, self.grid.cell_area());
        }
        Ok(next)
    }

    /// Advances `steps` times and returns every state including the first.
    pub fn run(&mut self, initial: &GridDensityPair, dt: f64, steps: usize) -> Result<Vec<GridDensityPair>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(initial.clone());
        for _ in 0..steps {
            let next = self.step(out.last().expect("non-empty"), dt)?;
            out.push(next);
        }
        Ok(out)
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

fn clamp_renormalize(data: &mut [f64], mass: f64, area: f64) {
    if data.iter().any(|&v| v < 0.0) {
        data.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let now = data.iter().sum::<f64>() * area;
    if now > 0.0 && mass > 0.0 {
        let s = mass / now;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// `K * f` on the grid via the Fourier multiplier `−2πi k/|k|²`, zero mode
/// and Nyquist components dropped.
pub fn kernel_velocity(density_diff: &[f64], grid: &Grid2D) -> Result<Vec<Vec2>> {
    if density_diff.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "array of length {} on a grid of {} nodes",
            density_diff.len(),
            grid.len()
        )));
    }
    let mut solver = PdeSolver::new(*grid, PdeParams { gammabar: 0.0, nu: 0.0, scheme: AdvectionScheme::Upwind })?;
    Ok(solver.velocity(density_diff))
}

pub fn pde_step(state: &GridDensityPair, gammabar: f64, nu: f64, dt: f64, grid: &Grid2D) -> Result<GridDensityPair> {
    if state.grid != *grid {
        return Err(Error::GridMismatch("state grid differs from the requested grid".into()));
    }
    let mut solver = PdeSolver::new(*grid, PdeParams { gammabar, nu, scheme: AdvectionScheme::Upwind })?;
    solver.step(state, dt)
}

#[cfg(test)]
mod tests {
    use super::super::density::gaussian_density;
    use super::*;

    fn neutral_pair(grid: Grid2D, offset: f64) -> GridDensityPair {
        let p = gaussian_density(&grid, Vec2::new(-offset, 0.0), 0.25, 0.5).unwrap();
        let q = gaussian_density(&grid, Vec2::new(offset, 0.0), 0.25, 0.5).unwrap();
        GridDensityPair::new(grid, p, q).unwrap()
    }

    #[test]
    fn zero_difference_zero_field() {
        let g = Grid2D::new(4.0, 32).unwrap();
        let u = kernel_velocity(&vec![0.0; g.len()], &g).unwrap();
        assert!(u.iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn field_flips_exactly_with_sign() {
        let g = Grid2D::new(4.0, 64).unwrap();
        let s = neutral_pair(g, 0.7);
        let a = kernel_velocity(&s.difference(), &g).unwrap();
        let b = kernel_velocity(&s.swapped().difference(), &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn masses_conserved_and_positive() {
        let g = Grid2D::new(6.0, 64).unwrap();
        let mut s = neutral_pair(g, 0.5);
        let mut solver = PdeSolver::new(g, PdeParams { gammabar: 0.5, nu: 0.5, scheme: AdvectionScheme::Upwind }).unwrap();
        for _ in 0..20 {
            s = solver.step(&s, 0.01).unwrap();
            assert!((s.mass_plus() - 0.5).abs() < 1e-12);
            assert!((s.mass_minus() - 0.5).abs() < 1e-12);
            assert!(s.min_value() >= 0.0);
        }
    }

    #[test]
    fn species_exchange_is_exact() {
        let g = Grid2D::new(6.0, 64).unwrap();
        let s = neutral_pair(g, 0.5);
        for scheme in [AdvectionScheme::Upwind, AdvectionScheme::Muscl] {
            let mut solver = PdeSolver::new(g, PdeParams { gammabar: 0.3, nu: 0.5, scheme }).unwrap();
            let a = solver.step(&s, 0.01).unwrap();
            let b = solver.step(&s.swapped(), 0.01).unwrap();
            assert_eq!(a.swapped(), b);
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = Grid2D::new(2.0, 32).unwrap();
        let s = neutral_pair(g, 0.3);
        let err = pde_step(&s, 10.0, 0.0, 1.0, &g).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
    }

    #[test]
    fn heat_flow_variance() {
        let g = Grid2D::new(8.0, 128).unwrap();
        let p = gaussian_density(&g, Vec2::ZERO, 0.3, 1.0).unwrap();
        let s = GridDensityPair::new(g, p, vec![0.0; g.len()]).unwrap();
        let mut solver = PdeSolver::new(g, PdeParams { gammabar: 0.0, nu: 0.5, scheme: AdvectionScheme::Upwind }).unwrap();
        let out = solver.run(&s, 0.05, 5).unwrap();
        let var = out.last().unwrap().integrate_species(Sign::Plus, |p| p.x * p.x);
        assert!((var - (0.3 + 2.0 * 0.5 * 0.25)).abs() < 1e-9);
    }

    #[test]
    fn self_repulsion_spreads() {
        let g = Grid2D::new(8.0, 64).unwrap();
        let p = gaussian_density(&g, Vec2::ZERO, 0.25, 1.0).unwrap();
        let mut s = GridDensityPair::new(g, p, vec![0.0; g.len()]).unwrap();
        let mut solver = PdeSolver::new(g, PdeParams { gammabar: 0.5, nu: 0.0, scheme: AdvectionScheme::Upwind }).unwrap();
        let mut last = s.second_moment();
        for _ in 0..10 {
            s = solver.step(&s, 0.01).unwrap();
            let now = s.second_moment();
            assert!(now > last);
            last = now;
        }
    }
}
