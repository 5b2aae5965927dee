//! Domain types, interaction kernels, the same-sign cutoff and the drift field.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(p: [f64; 2]) -> Self {
        Vec2::new(p[0], p[1])
    }
}

/// Fixed sign of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Positions and signs of `N` particles at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedConfiguration {
    positions: Vec<Vec2>,
    signs: Vec<Sign>,
}

impl SignedConfiguration {
    pub fn new(positions: Vec<Vec2>, signs: Vec<Sign>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidConfiguration("need at least one particle".into()));
        }
        if positions.len() != signs.len() {
            return Err(Error::InvalidConfiguration(format!(
                "{} positions but {} signs",
                positions.len(),
                signs.len()
            )));
        }
        Ok(Self { positions, signs })
    }

    /// Builds a configuration from raw `±1` integers.
    pub fn from_raw(positions: &[[f64; 2]], signs: &[i8]) -> Result<Self> {
        let signs = signs
            .iter()
            .map(|&s| Sign::try_from(s).map_err(Error::InvalidConfiguration))
            .collect::<Result<Vec<_>>>()?;
        Self::new(positions.iter().map(|&p| p.into()).collect(), signs)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    #[inline]
    pub fn positions_mut(&mut self) -> &mut [Vec2] {
        &mut self.positions
    }

    #[inline]
    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn n_plus(&self) -> usize {
        self.signs.iter().filter(|&&s| s == Sign::Plus).count()
    }

    pub fn n_minus(&self) -> usize {
        self.len() - self.n_plus()
    }

    /// Fails if two particles share a position.
    pub fn ensure_distinct(&self) -> Result<()> {
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if self.positions[i] == self.positions[j] {
                    return Err(Error::InvalidConfiguration(format!(
                        "particles {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Relabels particles: particle `i` of the result is particle `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        Ok(Self {
            positions: perm.iter().map(|&p| self.positions[p]).collect(),
            signs: perm.iter().map(|&p| self.signs[p]).collect(),
        })
    }

    /// Same positions with every sign reversed.
    pub fn with_flipped_signs(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            signs: self.signs.iter().map(|s| s.flipped()).collect(),
        }
    }

    /// All positions multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|&p| p * factor).collect(),
            signs: self.signs.clone(),
        }
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidConfiguration(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidConfiguration(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Parameters of one regularized simulation.
///
/// `ell` is the cutoff level; `None` switches the cutoff off. It is kept real
/// valued so that spatial rescaling (which maps `ℓ ↦ ℓL`) stays closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub sigma: f64,
    pub gamma: f64,
    pub n_particles: usize,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    pub dt: f64,
    pub horizon: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(param("sigma", format!("must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(param("gamma", format!("must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(param("epsilon", format!("must be >= 0, got {}", self.epsilon)));
        }
        if let Some(ell) = self.ell {
            if !(ell > 0.0 && ell.is_finite()) {
                return Err(param("ell", format!("must be > 0, got {ell}")));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(param("horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if self.n_particles == 0 {
            return Err(param("n_particles", "must be >= 1"));
        }
        Ok(())
    }

    /// Number of Euler steps covering `[0, horizon]`.
    pub fn n_steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }

    /// `γ/σ²`, the only ratio that survives rescaling.
    pub fn coupling(&self) -> f64 {
        self.gamma / (self.sigma * self.sigma)
    }

    /// Largest step for which the per-step drift displacement stays below `ε/8`.
    pub fn recommended_dt(&self) -> f64 {
        if self.gamma == 0.0 || self.n_particles < 2 {
            f64::INFINITY
        } else {
            self.epsilon * self.epsilon / (4.0 * self.gamma * self.n_particles as f64)
        }
    }
}

/// Which particle pairs a distance diagnostic ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    All,
    SameSign,
    OppositeSign,
}

impl DistanceMode {
    pub const ALL: [DistanceMode; 3] = [
        DistanceMode::All,
        DistanceMode::SameSign,
        DistanceMode::OppositeSign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMode::All => "all",
            DistanceMode::SameSign => "same-sign",
            DistanceMode::OppositeSign => "opposite-sign",
        }
    }
}

impl std::str::FromStr for DistanceMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(DistanceMode::All),
            "same-sign" | "same" => Ok(DistanceMode::SameSign),
            "opposite-sign" | "opposite" | "opp" => Ok(DistanceMode::OppositeSign),
            other => Err(format!("unknown distance mode `{other}`")),
        }
    }
}

/// The repulsive Coulomb force `x/|x|²`, with `K(0) = 0`.
#[inline]
pub fn coulomb_kernel(x: Vec2) -> Vec2 {
    let r2 = x.norm_sq();
    if r2 == 0.0 {
        Vec2::ZERO
    } else {
        Vec2::new(x.x / r2, x.y / r2)
    }
}

/// `x/(|x|² + ε²)`; coincides with [`coulomb_kernel`] for `ε = 0`.
#[inline]
pub fn regularized_kernel(x: Vec2, epsilon: f64) -> Vec2 {
    let d = x.norm_sq() + epsilon * epsilon;
    if d == 0.0 {
        Vec2::ZERO
    } else {
        Vec2::new(x.x / d, x.y / d)
    }
}

/// Minimum pair distances by mode; `None` where no pair of that kind exists.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MinDistances {
    pub all: Option<f64>,
    pub same: Option<f64>,
    pub opposite: Option<f64>,
}

impl MinDistances {
    pub fn get(&self, mode: DistanceMode) -> Option<f64> {
        match mode {
            DistanceMode::All => self.all,
            DistanceMode::SameSign => self.same,
            DistanceMode::OppositeSign => self.opposite,
        }
    }

    /// Pointwise minimum, used to track infima over time.
    pub fn min_with(&mut self, other: &MinDistances) {
        fn m(a: &mut Option<f64>, b: Option<f64>) {
            *a = match (*a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, None) => x,
                (None, y) => y,
            };
        }
        m(&mut self.all, other.all);
        m(&mut self.same, other.same);
        m(&mut self.opposite, other.opposite);
    }
}

/// Minimum Euclidean distance over pairs matching `mode`.
pub fn min_distance(config: &SignedConfiguration, mode: DistanceMode) -> Result<f64> {
    min_distances(config).get(mode).ok_or(Error::NoPair(mode))
}

pub fn min_distances(config: &SignedConfiguration) -> MinDistances {
    let pos = config.positions();
    let signs = config.signs();
    let mut same = f64::INFINITY;
    let mut opp = f64::INFINITY;
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            let d2 = (pos[i] - pos[j]).norm_sq();
            if signs[i] == signs[j] {
                same = same.min(d2);
            } else {
                opp = opp.min(d2);
            }
        }
    }
    finish_min(same, opp)
}

fn finish_min(same_sq: f64, opp_sq: f64) -> MinDistances {
    let f = |v: f64| v.is_finite().then(|| v.sqrt());
    MinDistances {
        all: f(same_sq.min(opp_sq)),
        same: f(same_sq),
        opposite: f(opp_sq),
    }
}

/// `clamp(2ℓ·d − 1, 0, 1)` as a function of the same-sign minimum distance.
/// With no same-sign pair the cutoff is inactive.
#[inline]
pub fn cutoff_from_distance(same_min: Option<f64>, ell: Option<f64>) -> f64 {
    match (same_min, ell) {
        (Some(d), Some(ell)) => (2.0 * ell * d - 1.0).clamp(0.0, 1.0),
        _ => 1.0,
    }
}

/// The Lipschitz cutoff `Φ_ℓ`: 1 when the nearest same-sign pair is at least
/// `1/ℓ` apart, 0 below `1/(2ℓ)`, linear in between.
pub fn cutoff(config: &SignedConfiguration, ell: f64) -> f64 {
    cutoff_from_distance(min_distances(config).same, Some(ell))
}

/// Drift `γ Φ_ℓ Σ_j b^i b^j K_ε(x_i − x_j)` of every particle.
pub fn drift(config: &SignedConfiguration, params: &SystemParams) -> Vec<Vec2> {
    let scan = PairScanner::default().scan(config, params.epsilon, &[]);
    let scale = params.gamma * cutoff_from_distance(scan.min.same, params.ell);
    scan.interaction.iter().map(|&v| v * scale).collect()
}

/// Rescales space by `L` and time by `α`: `σ ↦ σ/√(αL²)`, `γ ↦ γ/(αL²)`,
/// `T ↦ αT`, `dt ↦ α·dt`, `ε ↦ ε/L`, `ℓ ↦ ℓL`.
pub fn rescale_params(params: &SystemParams, length: f64, alpha: f64) -> Result<SystemParams> {
    if !(length > 0.0) {
        return Err(param("L", "must be > 0"));
    }
    if !(alpha > 0.0) {
        return Err(param("alpha", "must be > 0"));
    }
    if length == 1.0 && alpha == 1.0 {
        return Ok(*params);
    }
    let s = alpha * length * length;
    Ok(SystemParams {
        sigma: params.sigma / s.sqrt(),
        gamma: params.gamma / s,
        n_particles: params.n_particles,
        epsilon: params.epsilon / length,
        ell: params.ell.map(|l| l * length),
        dt: params.dt * alpha,
        horizon: params.horizon * alpha,
    })
}

/// Everything one pass over all particle pairs yields.
#[derive(Debug, Clone, Default)]
pub struct PairScan {
    /// `Σ_j b^i b^j K_ε(x_i − x_j)` per particle (no `γ`, no cutoff).
    pub interaction: Vec<Vec2>,
    pub min: MinDistances,
    /// Some pair of distinct particles sits at exactly the same point.
    pub coincident: bool,
    /// For each requested `α`: `Σ_{i≠j} |x_i − x_j|^{α−2}` over ordered pairs.
    /// Coincident pairs are skipped.
    pub moment_sums: Vec<f64>,
}

/// Reusable buffers for [`PairScan`].
///
/// Pairs are visited in the lexicographic order of `(x, y, sign)`, so the
/// floating-point summation order depends only on where particles are, not on
/// how they are labelled. Relabelling the particles therefore permutes the
/// result bit for bit.
#[derive(Debug, Clone, Default)]
pub struct PairScanner {
    order: Vec<usize>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    bs: Vec<f64>,
    acc: Vec<Vec2>,
}

impl PairScanner {
    pub fn scan(&mut self, config: &SignedConfiguration, epsilon: f64, alphas: &[f64]) -> PairScan {
        let mut out = PairScan::default();
        self.scan_into(config, epsilon, alphas, &mut out);
        out
    }

    pub fn scan_into(
        &mut self,
        config: &SignedConfiguration,
        epsilon: f64,
        alphas: &[f64],
        out: &mut PairScan,
    ) {
        let pos = config.positions();
        let signs = config.signs();
        let n = pos.len();

        self.order.clear();
        self.order.extend(0..n);
        self.order.sort_unstable_by(|&a, &b| {
            pos[a]
                .x
                .total_cmp(&pos[b].x)
                .then(pos[a].y.total_cmp(&pos[b].y))
                .then(signs[a].cmp(&signs[b]))
                .then(Ordering::Equal)
        });
        self.xs.clear();
        self.ys.clear();
        self.bs.clear();
        for &k in &self.order {
            self.xs.push(pos[k].x);
            self.ys.push(pos[k].y);
            self.bs.push(signs[k].value());
        }
        self.acc.clear();
        self.acc.resize(n, Vec2::ZERO);

        let eps2 = epsilon * epsilon;
        let mut same_sq = f64::INFINITY;
        let mut opp_sq = f64::INFINITY;
        let mut coincident = false;
        out.moment_sums.clear();
        out.moment_sums.resize(alphas.len(), 0.0);
        let half_exponents: Vec<f64> = alphas.iter().map(|a| 0.5 * (a - 2.0)).collect();

        for a in 0..n {
            let (xa, ya, ba) = (self.xs[a], self.ys[a], self.bs[a]);
            let mut fa = Vec2::ZERO;
            for b in (a + 1)..n {
                let dx = xa - self.xs[b];
                let dy = ya - self.ys[b];
                let r2 = dx * dx + dy * dy;
                let bb = ba * self.bs[b];
                if bb > 0.0 {
                    same_sq = same_sq.min(r2);
                } else {
                    opp_sq = opp_sq.min(r2);
                }
                if r2 == 0.0 {
                    coincident = true;
                    continue;
                }
                let w = bb / (r2 + eps2);
                let f = Vec2::new(dx * w, dy * w);
                fa += f;
                self.acc[b] -= f;
                for (s, &h) in out.moment_sums.iter_mut().zip(&half_exponents) {
                    *s += 2.0 * r2.powf(h);
                }
            }
            self.acc[a] += fa;
        }

        out.interaction.clear();
        out.interaction.resize(n, Vec2::ZERO);
        for (slot, &k) in self.order.iter().enumerate() {
            out.interaction[k] = self.acc[slot];
        }
        out.min = finish_min(same_sq, opp_sq);
        out.coincident = coincident;
    }
}
