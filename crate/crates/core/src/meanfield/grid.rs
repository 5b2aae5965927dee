use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::model::Vec2;

/// Uniform `M × M` grid of nodes `−L + i·h`, `h = 2L/M`, on the periodic
/// square `[−L, L)²`. Arrays are row-major: index `iy·M + ix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2D {
    pub half_width: f64,
    pub resolution: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, resolution: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(param("half_width", "must be > 0"));
        }
        if resolution < 32 || !resolution.is_power_of_two() {
            return Err(param("resolution", format!("must be a power of two >= 32, got {resolution}")));
        }
        Ok(Self { half_width, resolution })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    #[inline]
    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(self.coord(ix), self.coord(iy))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.half_width;
        p.x >= -l && p.x < l && p.y >= -l && p.y < l
    }

    /// Angular wavenumber of FFT bin `n`.
    #[inline]
    pub fn wavenumber(&self, n: usize) -> f64 {
        let m = self.resolution as isize;
        let n = n as isize;
        let signed = if n < m / 2 { n } else { n - m };
        std::f64::consts::PI * signed as f64 / self.half_width
    }

    /// Iterates `(flat index, node)` over the grid.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, Vec2)> + '_ {
        let m = self.resolution;
        (0..m * m).map(move |k| (k, self.node(k % m, k / m)))
    }
}
