use std::collections::HashSet;
use std::path::{Path, PathBuf};

use coulomb_core::bessel::{regime_statistics, zero_hit_probability, BesselSpec, RegimeScan};
use coulomb_core::estimators::{
    moment_bound_rhs, n_plus_minus, phi, phi_moment_bound, run_batch, BatchOptions, BatchResult,
    InitialCondition, MomentBoundInputs,
};
use coulomb_core::io::{
    diagnostics_rows, trajectory_rows, write_csv, CollisionRow, ConvergenceRow, CsvRecord,
    DensitySnapshot, DensitySummaryRow, EstimateRow, HitRow, PathRow, RegimeRow, ResidualRow,
};
use coulomb_core::meanfield::{convergence_point, convergence_scan, seed_for, standard_family, ConvergencePoint};
use coulomb_core::noise::INITIAL_LANE;
use coulomb_core::sde::simulate;
use coulomb_core::stats::{mean_estimate, Estimate};
use coulomb_core::{DistanceMode, Error as CoreError, NoiseStream, Sign, SignedConfiguration, GENERATOR_VERSION};

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    BesselScan,
    CollisionScan,
    DriftBound,
    Meanfield,
    Weakform,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::BesselScan => "bessel-scan",
            Command::CollisionScan => "collision-scan",
            Command::DriftBound => "drift-bound",
            Command::Meanfield => "meanfield",
            Command::Weakform => "weakform",
        }
    }
}

/// A resolved run: configuration after command-line overrides, and where
/// the files go.
pub struct Run {
    pub command: Command,
    pub config: ExperimentConfig,
    pub out: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: Command, config: ExperimentConfig, out: PathBuf) -> Result<Self, CliError> {
        if let Some(name) = &config.command {
            if name != command.name() {
                return Err(CliError::config("command", format!("config is for `{name}`, not `{}`", command.name())));
            }
        }
        let hash = config.hash();
        Ok(Self { command, config, out, hash, written: Vec::new() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn header(&self) -> Vec<String> {
        vec![
            format!("config_hash={}", self.hash),
            format!("generator={GENERATOR_VERSION}"),
            format!("command={}", self.command.name()),
            format!("seed={}", self.config.seed),
        ]
    }

    fn csv<T: CsvRecord>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_csv(&path, &self.header(), rows)?;
        self.written.push(path);
        Ok(())
    }

    fn snapshot(&mut self, name: &str, s: &DensitySnapshot) -> Result<(), CliError> {
        let path = self.out.join(name);
        s.write(&path)?;
        self.written.push(path);
        Ok(())
    }

    /// Validates the sections the command needs, then writes its outputs and
    /// the resolved configuration. Returns the written paths.
    pub fn execute(mut self) -> Result<Vec<PathBuf>, CliError> {
        // configuration problems surface before any work or output
        self.check()?;
        std::fs::create_dir_all(&self.out)?;
        match self.command {
            Command::Simulate => self.simulate()?,
            Command::BesselScan => self.bessel_scan()?,
            Command::CollisionScan => self.collision_scan()?,
            Command::DriftBound => self.drift_bound()?,
            Command::Meanfield => self.meanfield()?,
            Command::Weakform => self.weakform()?,
        }
        let path = self.out.join("config.toml");
        std::fs::write(&path, self.config.to_toml())?;
        self.written.push(path);
        Ok(self.written)
    }

    /// Validates the configuration for this command without running it.
    pub fn check(&self) -> Result<(), CliError> {
        let c = &self.config;
        match self.command {
            Command::Simulate => {
                c.particles()?;
                if let Some(e) = &c.estimators {
                    if e.record_every == 0 {
                        return Err(CliError::config("estimators.record_every", "must be >= 1"));
                    }
                }
            }
            Command::BesselScan => {
                c.bessel()?;
            }
            Command::CollisionScan => {
                c.particles()?;
                c.collision()?;
            }
            Command::DriftBound => {
                c.particles()?;
                c.estimators()?;
            }
            Command::Meanfield | Command::Weakform => {
                c.meanfield()?;
            }
        }
        Ok(())
    }

    fn start(&self, initial: &InitialCondition) -> Result<SignedConfiguration, CliError> {
        let seed = self.config.seed;
        Ok(initial.sample(&mut NoiseStream::new(seed, seed).lane(INITIAL_LANE))?)
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let (p, initial) = self.config.particles()?;
        let every = self.config.estimators.as_ref().map_or(1, |e| e.record_every);
        let start = self.start(initial)?;
        let seed = self.config.seed;
        let traj = simulate(&start, &p, &NoiseStream::new(seed, seed), every)?;
        self.csv("trajectory.csv", &trajectory_rows(&traj))?;
        self.csv("diagnostics.csv", &diagnostics_rows(&traj))
    }

    fn bessel_scan(&mut self) -> Result<(), CliError> {
        let b = self.config.bessel()?.clone();
        let mut points = Vec::new();
        for &d in &b.deltas {
            for &x in &b.starts {
                for &thr in &b.thresholds {
                    points.push([d, x, thr]);
                }
            }
        }
        let points = dedup(points, "bessel-scan");
        let mut rows = Vec::with_capacity(points.len());
        for (k, [delta, x, threshold]) in points.into_iter().enumerate() {
            let spec = BesselSpec::new(delta, x).map_err(|e| CliError::from_core("bessel", e))?;
            let noise = NoiseStream::new(self.config.seed, k as u64);
            let e = zero_hit_probability(&spec, b.horizon, threshold, b.dt, b.n_paths, &noise)?;
            log::info!("delta={delta} x={x} threshold={threshold}: {:.4}", e.value);
            rows.push(HitRow { delta, x, threshold, estimate: e.value, ci: e.halfwidth() });
        }
        self.csv("bessel_scan.csv", &rows)
    }

    fn collision_scan(&mut self) -> Result<(), CliError> {
        let (p, initial) = self.config.particles()?;
        let initial = initial.clone();
        let c = self.config.collision()?.clone();
        let gammas: Vec<f64> = dedup(c.gamma_over_sigma2.iter().map(|&g| [g]).collect(), "gamma_over_sigma2")
            .into_iter()
            .map(|[g]| g)
            .collect();
        let thresholds: Vec<f64> = dedup(c.thresholds.iter().map(|&t| [t]).collect(), "thresholds")
            .into_iter()
            .map(|[t]| t)
            .collect();
        let mut modes: Vec<DistanceMode> = Vec::new();
        for m in &c.modes {
            if modes.contains(m) {
                log::warn!("collision-scan: duplicate mode {} dropped", m.name());
            } else {
                modes.push(*m);
            }
        }
        let start = self.start(&initial)?;
        let reference = match &c.reference {
            Some(r) => {
                let opposite = start.len() == 2 && start.signs()[0] != start.signs()[1];
                if !opposite {
                    return Err(CliError::config("collision.reference", "needs exactly two opposite charges"));
                }
                let d = start.positions()[0] - start.positions()[1];
                Some(RegimeScan {
                    sigma: p.sigma,
                    x0_diff: d,
                    horizon: p.horizon,
                    dt: r.dt,
                    hit_threshold: r.hit_threshold,
                    separation_level: r.separation_level,
                    n_paths: c.n_paths,
                })
            }
            None => None,
        };

        let mut rows = Vec::new();
        let mut regimes = Vec::new();
        let s2 = p.sigma * p.sigma;
        for (k, &g) in gammas.iter().enumerate() {
            let params = coulomb_core::SystemParams { gamma: g * s2, ..p };
            params.validate().map_err(|e| CliError::from_core("system", e))?;
            let batch = run_batch(&initial, &params, c.n_paths, seed_for(self.config.seed, k), &BatchOptions::default())?;
            for &mode in &modes {
                for &threshold in &thresholds {
                    match batch.collision_probability(mode, threshold) {
                        Ok(e) => rows.push(CollisionRow {
                            gamma_over_sigma2: g,
                            mode: mode.name().to_string(),
                            threshold,
                            estimate: e.value,
                            ci_lo: e.lo,
                            ci_hi: e.hi,
                            n_paths: e.n,
                        }),
                        Err(CoreError::NoPair(_)) => {
                            log::warn!("collision-scan: no {} pair, skipped", mode.name());
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            if let Some(scan) = &reference {
                let noise = NoiseStream::new(self.config.seed, (1u64 << 48) + k as u64);
                regimes.push(RegimeRow::from(&regime_statistics(scan, g * s2, &noise)?));
            }
        }
        self.csv("collision.csv", &rows)?;
        if reference.is_some() {
            self.csv("regime.csv", &regimes)?;
        }
        Ok(())
    }

    fn drift_bound(&mut self) -> Result<(), CliError> {
        let (p, initial) = self.config.particles()?;
        let initial = initial.clone();
        let est = self.config.estimators()?.clone();
        let seed = self.config.seed;
        let options = BatchOptions { alphas: est.alphas.clone(), phi_times: est.phi_times.clone() };
        let batch = run_batch(&initial, &p, est.n_paths, seed, &options)?;

        // the starts of the batch, redrawn from the same lanes
        let mut abs0 = Vec::with_capacity(est.n_paths);
        let mut phi0 = Vec::with_capacity(est.n_paths);
        for k in 0..est.n_paths as u64 {
            let c = initial.sample(&mut NoiseStream::new(seed, seed + k).lane(INITIAL_LANE))?;
            let n = c.len() as f64;
            abs0.push(c.positions().iter().map(|x| x.norm()).sum::<f64>() / n);
            phi0.push(c.positions().iter().map(|&x| phi(x)).sum::<f64>() / n);
        }
        let mean_abs0 = abs0.iter().sum::<f64>() / abs0.len() as f64;
        let mean_phi0 = phi0.iter().sum::<f64>() / phi0.len() as f64;
        let (np, nm) = n_plus_minus(&batch.signs);

        let mut rows = Vec::new();
        let hash = self.hash.clone();
        let mut push = |name: String, e: Estimate| {
            rows.push(EstimateRow { name, estimate: e.value, ci_lo: e.lo, ci_hi: e.hi, n_paths: e.n, params_hash: hash.clone() });
        };
        let exact = |v: f64| Estimate { value: v, lo: v, hi: v, n: 0 };
        for &alpha in &est.alphas {
            push(format!("pair_moment[alpha={alpha}]"), batch.pairwise_moment(alpha)?);
            let inputs = MomentBoundInputs {
                alpha,
                sigma: p.sigma,
                gamma: p.gamma,
                n_plus: np,
                n_minus: nm,
                beta0: est.beta0.unwrap_or(np.min(nm) as f64 / p.n_particles as f64),
                horizon: p.horizon,
                mean_abs_x0: est.mean_abs_x0.unwrap_or(mean_abs0),
            };
            match moment_bound_rhs(&inputs) {
                Some(b) => push(format!("pair_moment_bound[alpha={alpha}]"), exact(b)),
                None => log::warn!("drift-bound: the pair-moment bound does not apply at alpha={alpha}"),
            }
        }
        for &t in &est.phi_times {
            push(format!("phi[t={t}]"), batch.mean_abs_position(t)?);
            push(format!("phi_bound[t={t}]"), exact(phi_moment_bound(mean_phi0, np, nm, p.sigma, p.gamma, t)));
        }
        push("drift_integral".into(), summary_estimate(&batch, |s| s.drift_integral)?);
        push("terminal_mean_abs".into(), summary_estimate(&batch, |s| s.terminal_mean_abs)?);
        self.csv("estimates.csv", &rows)?;
        let paths: Vec<PathRow> = batch
            .summaries
            .iter()
            .enumerate()
            .map(|(k, s)| PathRow {
                path: k,
                min_all: s.min.all,
                min_same: s.min.same,
                min_opp: s.min.opposite,
                terminal_mean_abs: s.terminal_mean_abs,
                drift_integral: s.drift_integral,
                singular_events: s.singular_events,
            })
            .collect();
        self.csv("paths.csv", &paths)
    }

    fn meanfield(&mut self) -> Result<(), CliError> {
        let (m, setup) = self.config.meanfield()?;
        let (m, ns) = (m.clone(), m.n_schedule.clone());
        let (pde, points) = convergence_scan(&setup, &ns, self.config.seed)?;
        let rows: Vec<ConvergenceRow> = points
            .iter()
            .map(|p| ConvergenceRow {
                n: p.n,
                bl_distance: p.bl.map_or(f64::NAN, |e| e.value),
                w_residual: p.w_abs.value,
            })
            .collect();
        self.csv("convergence.csv", &rows)?;
        self.csv("residuals.csv", &residual_rows(&points, setup.horizon))?;
        let dt = setup.horizon / (pde.len() - 1) as f64;
        let summary: Vec<DensitySummaryRow> = pde
            .iter()
            .enumerate()
            .filter(|(k, _)| k % m.summary_every == 0 || *k == pde.len() - 1)
            .map(|(k, d)| DensitySummaryRow::of(k as f64 * dt, d))
            .collect();
        if let Some(worst) = summary.iter().map(|r| r.boundary_mass).reduce(f64::max) {
            if worst >= 1e-4 {
                log::warn!("meanfield: boundary mass {worst:.2e} exceeds 1e-4, enlarge half_width");
            }
        }
        self.csv("density_summary.csv", &summary)?;
        let (first, last) = (&pde[0], pde.last().expect("non-empty"));
        for (tag, t, d) in [("initial", 0.0, first), ("final", setup.horizon, last)] {
            for sign in [Sign::Plus, Sign::Minus] {
                let name = format!("density_{tag}_{}.bin", if sign == Sign::Plus { "plus" } else { "minus" });
                self.snapshot(&name, &DensitySnapshot::of(d, t, sign))?;
            }
        }
        Ok(())
    }

    fn weakform(&mut self) -> Result<(), CliError> {
        let (_, setup) = self.config.meanfield()?;
        let ns = self.config.meanfield.as_ref().expect("checked").n_schedule.clone();
        let mut points = Vec::with_capacity(ns.len());
        for (k, &n) in ns.iter().enumerate() {
            points.push(convergence_point(&setup, n, None, seed_for(self.config.seed, k))?);
        }
        self.csv("residuals.csv", &residual_rows(&points, setup.horizon))
    }
}

fn residual_rows(points: &[ConvergencePoint], horizon: f64) -> Vec<ResidualRow> {
    let family = standard_family();
    let mut rows = Vec::new();
    for p in points {
        for (f, r) in family.iter().zip(&p.w_abs_by_phi) {
            rows.push(ResidualRow { n: p.n, phi_id: f.id.clone(), horizon, residual: *r });
        }
    }
    rows
}

fn summary_estimate(
    batch: &BatchResult,
    f: impl Fn(&coulomb_core::estimators::PathSummary) -> f64,
) -> Result<Estimate, CliError> {
    let v: Vec<f64> = batch.summaries.iter().map(f).collect();
    if v.len() == 1 {
        return Ok(Estimate { value: v[0], lo: v[0], hi: v[0], n: 1 });
    }
    Ok(mean_estimate(&v)?)
}

/// Drops repeated scan points (bitwise equal), keeping the first, with a warning.
fn dedup<const K: usize>(points: Vec<[f64; K]>, what: &str) -> Vec<[f64; K]> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        if seen.insert(p.map(f64::to_bits)) {
            out.push(p);
        } else {
            log::warn!("{what}: duplicate scan point {p:?} dropped");
        }
    }
    out
}

/// Default output directory for a command.
pub fn default_out(command: Command) -> PathBuf {
    Path::new("out").join(command.name())
}
