use super::density::GridDensityPair;
use super::grid::Grid2D;
use super::pde::{AdvectionScheme, PdeParams, PdeSolver};
use super::testfn::{standard_family, TestFunction};
use crate::error::{param, Error, Result};
use crate::model::{PairScanner, Sign, SignedConfiguration, Vec2};

/// One time slice of a path: either the atoms of `L^N` or a grid density pair.
#[derive(Debug, Clone, Copy)]
pub enum MeasureSnapshot<'a> {
    Atoms {
        config: &'a SignedConfiguration,
        /// `Σ_j b_i b_j K_ε(X_i − X_j)` per particle if already known.
        interaction: Option<&'a [Vec2]>,
        /// Kernel regularization used when `interaction` is absent.
        epsilon: f64,
    },
    Density(&'a GridDensityPair),
}

/// Per test function: `(∫φ dμ, ∬ bb′K(x−x′)·∇φ(x) μμ, ∫Δφ dμ)`.
type Terms = (f64, f64, f64);

/// Running evaluation of
///
/// `𝒲[T,φ] = ∫φ d(μ_T − μ_0) − γ̄∫₀ᵀ∬ bb′K(x−x′)·∇φ(x,b) μ_t μ_t dt − ν∫₀ᵀ∫Δφ dμ_t dt`
///
/// for a whole test-function family, time integrals by trapezoid.
#[derive(Debug, Clone)]
pub struct WeakFormAccumulator {
    family: Vec<TestFunction>,
    gammabar: f64,
    nu: f64,
    last_t: Option<f64>,
    initial: Vec<f64>,
    current: Vec<f64>,
    last_rate: Vec<f64>,
    integral: Vec<f64>,
    samples: usize,
    solver: Option<PdeSolver>,
    scanner: PairScanner,
}

impl WeakFormAccumulator {
    pub fn new(family: Vec<TestFunction>, gammabar: f64, nu: f64) -> Self {
        let n = family.len();
        Self {
            family,
            gammabar,
            nu,
            last_t: None,
            initial: vec![0.0; n],
            current: vec![0.0; n],
            last_rate: vec![0.0; n],
            integral: vec![0.0; n],
            samples: 0,
            solver: None,
            scanner: PairScanner::default(),
        }
    }

    pub fn standard(gammabar: f64, nu: f64) -> Self {
        Self::new(standard_family(), gammabar, nu)
    }

    pub fn family(&self) -> &[TestFunction] {
        &self.family
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn terms(&mut self, snapshot: MeasureSnapshot<'_>) -> Result<Vec<Terms>> {
        match snapshot {
            MeasureSnapshot::Atoms { config, interaction, epsilon } => {
                let owned;
                let inter = match interaction {
                    Some(v) => v,
                    None => {
                        owned = self.scanner.scan(config, epsilon, &[]).interaction;
                        &owned[..]
                    }
                };
                if inter.len() != config.len() {
                    return Err(param("interaction", "length differs from particle count"));
                }
                let n = config.len() as f64;
                Ok(self
                    .family
                    .iter()
                    .map(|f| {
                        let mut t = (0.0, 0.0, 0.0);
                        for ((p, &s), u) in config.positions().iter().zip(config.signs()).zip(inter) {
                            t.0 += f.value(*p, s);
                            t.1 += u.dot(f.gradient(*p, s));
                            t.2 += f.laplacian(*p, s);
                        }
                        (t.0 / n, t.1 / (n * n), t.2 / n)
                    })
                    .collect())
            }
            MeasureSnapshot::Density(d) => {
                let rebuild = self.solver.as_ref().is_none_or(|s| *s.grid() != d.grid);
                if rebuild {
                    let params = PdeParams { gammabar: 0.0, nu: 0.0, scheme: AdvectionScheme::Upwind };
                    self.solver = Some(PdeSolver::new(d.grid, params)?);
                }
                let solver = self.solver.as_mut().expect("solver built above");
                let u = solver.velocity(&d.difference());
                let area = d.grid.cell_area();
                Ok(self
                    .family
                    .iter()
                    .map(|f| {
                        let mut t = (0.0, 0.0, 0.0);
                        for (k, p) in d.grid.nodes() {
                            for (sign, rho) in [(Sign::Plus, d.plus[k]), (Sign::Minus, d.minus[k])] {
                                if rho == 0.0 {
                                    continue;
                                }
                                t.0 += f.value(p, sign) * rho;
                                t.1 += sign.value() * u[k].dot(f.gradient(p, sign)) * rho;
                                t.2 += f.laplacian(p, sign) * rho;
                            }
                        }
                        (t.0 * area, t.1 * area, t.2 * area)
                    })
                    .collect())
            }
        }
    }

    /// Adds the slice at time `t`, which must exceed the previous one.
    pub fn push(&mut self, t: f64, snapshot: MeasureSnapshot<'_>) -> Result<()> {
        if let Some(prev) = self.last_t {
            if !(t > prev) {
                return Err(param("t", format!("times must increase, got {t} after {prev}")));
            }
        }
        let terms = self.terms(snapshot)?;
        for (k, (v, inter, lap)) in terms.into_iter().enumerate() {
            let rate = self.gammabar * inter + self.nu * lap;
            match self.last_t {
                None => self.initial[k] = v,
                Some(prev) => self.integral[k] += 0.5 * (t - prev) * (rate + self.last_rate[k]),
            }
            self.current[k] = v;
            self.last_rate[k] = rate;
        }
        self.last_t = Some(t);
        self.samples += 1;
        Ok(())
    }

    /// `𝒲` per test function for the slices pushed so far.
    pub fn residuals(&self) -> Vec<f64> {
        (0..self.family.len())
            .map(|k| self.current[k] - self.initial[k] - self.integral[k])
            .collect()
    }
}

/// `𝒲[T,φ]` along `path`, using the slices with `t ≤ T`. Time steps must be uniform.
pub fn weak_form_residual(
    path: &[(f64, MeasureSnapshot<'_>)],
    horizon: f64,
    phi: &TestFunction,
    gammabar: f64,
    nu: f64,
) -> Result<f64> {
    let used: Vec<_> = path.iter().filter(|(t, _)| *t <= horizon * (1.0 + 1e-12)).collect();
    if used.len() >= 3 {
        let dt = used[1].0 - used[0].0;
        for w in used.windows(2) {
            if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(param("path", "time grid is not uniform"));
            }
        }
    }
    let mut acc = WeakFormAccumulator::new(vec![phi.clone()], gammabar, nu);
    for (t, snap) in used {
        acc.push(*t, *snap)?;
    }
    Ok(acc.residuals()[0])
}

/// Bounded-Lipschitz distance restricted to the standard family: per species,
/// `max_φ |∫φ d(a − b)|` over normalized profiles, summed over species. This
/// is a lower bound on the full BL distance.
pub fn bl_distance(a: &GridDensityPair, b: &GridDensityPair, grid: &Grid2D) -> Result<f64> {
    if a.grid != *grid || b.grid != *grid {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?} against {:?}",
            a.grid, b.grid, grid
        )));
    }
    let family = standard_family();
    let area = grid.cell_area();
    let mut total = 0.0;
    for sign in [Sign::Plus, Sign::Minus] {
        let (da, db) = (a.species(sign), b.species(sign));
        let mut best: f64 = 0.0;
        for f in &family {
            let lip = f.profile.sup_norm() + f.profile.lipschitz();
            let s: f64 = grid.nodes().map(|(k, p)| f.profile.value(p) * (da[k] - db[k])).sum();
            best = best.max((s * area).abs() / lip);
        }
        total += best;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::super::density::{empirical_density, gaussian_density};
    use super::*;

    #[test]
    fn constant_measure_zero_residual() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [1.0, 0.5]], &[1, -1]).unwrap();
        let snap = MeasureSnapshot::Atoms { config: &c, interaction: None, epsilon: 0.0 };
        let path: Vec<_> = (0..5).map(|k| (k as f64 * 0.1, snap)).collect();
        for f in standard_family() {
            assert_eq!(weak_form_residual(&path, 0.4, &f, 0.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn atoms_interaction_term() {
        // + at 0, − at (1,0): Σ b_i b_j K(X_i − X_j) = (1,0) on the + atom, (−1,0) on the − atom.
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0], [1.0, 0.0]], &[1, -1]).unwrap();
        let f = TestFunction::new("x", super::super::Profile::Sine { k: 1.0 }, 1.0, 1.0);
        let mut acc = WeakFormAccumulator::new(vec![f], 1.0, 0.0);
        let snap = MeasureSnapshot::Atoms { config: &c, interaction: None, epsilon: 0.0 };
        acc.push(0.0, snap).unwrap();
        acc.push(1.0, snap).unwrap();
        // ∇φ = (cos x, 0): (1·1 + (−1)·cos 1)/4
        let expect = -(1.0 - 1f64.cos()) / 4.0;
        assert!((acc.residuals()[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn times_must_increase() {
        let c = SignedConfiguration::from_raw(&[[0.0, 0.0]], &[1]).unwrap();
        let snap = MeasureSnapshot::Atoms { config: &c, interaction: None, epsilon: 0.0 };
        let mut acc = WeakFormAccumulator::standard(0.0, 0.0);
        acc.push(0.0, snap).unwrap();
        assert!(acc.push(0.0, snap).is_err());
    }

    #[test]
    fn bl_basic_properties() {
        let g = Grid2D::new(4.0, 64).unwrap();
        let a = GridDensityPair::new(
            g,
            gaussian_density(&g, Vec2::ZERO, 0.2, 0.5).unwrap(),
            gaussian_density(&g, Vec2::new(0.5, 0.0), 0.2, 0.5).unwrap(),
        )
        .unwrap();
        let b = a.swapped();
        assert_eq!(bl_distance(&a, &a, &g).unwrap(), 0.0);
        let ab = bl_distance(&a, &b, &g).unwrap();
        assert!(ab > 0.0);
        assert_eq!(ab, bl_distance(&b, &a, &g).unwrap());
        let other = Grid2D::new(4.0, 32).unwrap();
        assert!(matches!(
            bl_distance(&a, &GridDensityPair::zeros(other), &g),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn bl_grows_linearly_with_translation() {
        let g = Grid2D::new(4.0, 128).unwrap();
        let base = SignedConfiguration::from_raw(&[[0.1, 0.0]], &[1]).unwrap();
        let a = empirical_density(&base, &g, 0.3).unwrap();
        let mut last = 0.0;
        for h in [0.02, 0.04, 0.08] {
            let moved = SignedConfiguration::from_raw(&[[0.1 + h, 0.0]], &[1]).unwrap();
            let b = empirical_density(&moved, &g, 0.3).unwrap();
            let d = bl_distance(&a, &b, &g).unwrap();
            // g1 has slope e^{-1/2}/0.75 · x e^{..} near its flank; c = 0.1 is a safe floor
            assert!(d >= 0.1 * h, "{h} {d}");
            assert!(d > last);
            last = d;
        }
    }
}
