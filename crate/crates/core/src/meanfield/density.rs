use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use crate::error::{param, Error, Result};
use crate::model::{Sign, SignedConfiguration, Vec2};

/// Discretized `(ρ⁺, ρ⁻)`, mass densities per unit area on the nodes of `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensityPair {
    pub grid: Grid2D,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl GridDensityPair {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, plus: vec![0.0; grid.len()], minus: vec![0.0; grid.len()] }
    }

    pub fn new(grid: Grid2D, plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "arrays of length {} and {} on a grid of {} nodes",
                plus.len(),
                minus.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, plus, minus })
    }

    pub fn species(&self, sign: Sign) -> &[f64] {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn species_mut(&mut self, sign: Sign) -> &mut Vec<f64> {
        match sign {
            Sign::Plus => &mut self.plus,
            Sign::Minus => &mut self.minus,
        }
    }

    fn integral(&self, data: &[f64], f: impl Fn(Vec2) -> f64) -> f64 {
        self.grid.nodes().map(|(k, p)| f(p) * data[k]).sum::<f64>() * self.grid.cell_area()
    }

    pub fn mass(&self, sign: Sign) -> f64 {
        self.species(sign).iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mass_plus(&self) -> f64 {
        self.mass(Sign::Plus)
    }

    pub fn mass_minus(&self) -> f64 {
        self.mass(Sign::Minus)
    }

    /// `∫ f d(ρ⁺ + ρ⁻)`.
    pub fn integrate(&self, f: impl Fn(Vec2) -> f64 + Copy) -> f64 {
        self.integral(&self.plus, f) + self.integral(&self.minus, f)
    }

    pub fn integrate_species(&self, sign: Sign, f: impl Fn(Vec2) -> f64) -> f64 {
        self.integral(self.species(sign), f)
    }

    /// `∫ |x|² d(ρ⁺ + ρ⁻)`.
    pub fn second_moment(&self) -> f64 {
        self.integrate(|p| p.norm_sq())
    }

    /// Mass in the outer band where `max(|x|, |y|) ≥ 0.9 L`.
    pub fn boundary_mass(&self) -> f64 {
        let edge = 0.9 * self.grid.half_width;
        self.integrate(|p| if p.x.abs().max(p.y.abs()) >= edge { 1.0 } else { 0.0 })
    }

    /// `ρ⁺ − ρ⁻` node by node.
    pub fn difference(&self) -> Vec<f64> {
        self.plus.iter().zip(&self.minus).map(|(a, b)| a - b).collect()
    }

    pub fn swapped(&self) -> Self {
        Self { grid: self.grid, plus: self.minus.clone(), minus: self.plus.clone() }
    }

    pub fn min_value(&self) -> f64 {
        self.plus.iter().chain(&self.minus).copied().fold(f64::INFINITY, f64::min)
    }
}

/// Isotropic Gaussian of variance `variance` per coordinate, sampled at the
/// nodes and rescaled so that the discrete mass is exactly `mass`.
pub fn gaussian_density(grid: &Grid2D, center: Vec2, variance: f64, mass: f64) -> Result<Vec<f64>> {
    if !(variance > 0.0) {
        return Err(param("variance", "must be > 0"));
    }
    let mut out: Vec<f64> = grid
        .nodes()
        .map(|(_, p)| (-(p - center).norm_sq() / (2.0 * variance)).exp())
        .collect();
    let total = out.iter().sum::<f64>() * grid.cell_area();
    if total > 0.0 {
        let s = mass / total;
        out.iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

/// Smooths `L^{N,±} = (1/N) Σ_{b_i = ±} δ_{X_i}` with a Gaussian of standard
/// deviation `bandwidth`. Each particle's stencil is normalized on the grid
/// (periodic wrap), so the species masses are exactly `N±/N`.
pub fn empirical_density(config: &SignedConfiguration, grid: &Grid2D, bandwidth: f64) -> Result<GridDensityPair> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(param("bandwidth", "must be > 0"));
    }
    let outside: Vec<usize> = config
        .positions()
        .iter()
        .enumerate()
        .filter(|(_, p)| !grid.contains(**p))
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutOfDomain(outside));
    }
    let m = grid.resolution;
    let h = grid.spacing();
    let l = grid.half_width;
    let atom = 1.0 / (config.len() as f64 * grid.cell_area());
    let reach = ((6.0 * bandwidth / h).ceil() as isize).min(m as isize / 2 - 1);
    let width = (2 * reach + 1) as usize;
    let mut out = GridDensityPair::zeros(*grid);
    let mut wx = vec![0.0; width];
    let mut wy = vec![0.0; width];
    for (p, &s) in config.positions().iter().zip(config.signs()) {
        let cx = ((p.x + l) / h).round() as isize;
        let cy = ((p.y + l) / h).round() as isize;
        // the Gaussian factorizes, so the stencil is an outer product
        for d in 0..width {
            let off = d as isize - reach;
            let dx = (cx + off) as f64 * h - l - p.x;
            let dy = (cy + off) as f64 * h - l - p.y;
            wx[d] = (-dx * dx / (2.0 * bandwidth * bandwidth)).exp();
            wy[d] = (-dy * dy / (2.0 * bandwidth * bandwidth)).exp();
        }
        let sx: f64 = wx.iter().sum();
        let sy: f64 = wy.iter().sum();
        let target = out.species_mut(s);
        let wrap = |i: isize| i.rem_euclid(m as isize) as usize;
        if !(sx > 0.0 && sy > 0.0) {
            target[wrap(cy) * m + wrap(cx)] += atom;
            continue;
        }
        for (a, &vy) in wy.iter().enumerate() {
            if vy == 0.0 {
                continue;
            }
            let row = wrap(cy + a as isize - reach) * m;
            for (b, &vx) in wx.iter().enumerate() {
                target[row + wrap(cx + b as isize - reach)] += atom * (vx / sx) * (vy / sy);
            }
        }
    }
    Ok(out)
}
