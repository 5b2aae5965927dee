//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! sigma = 1.0
//! gamma = 0.25
//! n_particles = 2
//! epsilon = 1e-3
//! dt = 1e-4
//! horizon = 1.0
//!
//! [initial]
//! kind = "two-opposite"
//! separation = 1.0
//!
//! [estimators]
//! n_paths = 1000
//! ```
//!
//! Each command reads only the sections it needs.

use std::path::{Path, PathBuf};

use coulomb_core::estimators::InitialCondition;
use coulomb_core::meanfield::{AdvectionScheme, Grid2D, MeanFieldSetup};
use coulomb_core::{DistanceMode, SystemParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

fn default_seed() -> u64 {
    1
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must match the subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bessel: Option<BesselScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meanfield: Option<MeanFieldConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub n_paths: usize,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub phi_times: Vec<f64>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub modes: Vec<DistanceMode>,
    /// Trajectory CSVs keep every `record_every`-th step.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// `β₀` of the pair-moment bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    /// Bound on `(1/N) Σ E|X_0^i|` used in the pair-moment bound; estimated
    /// from the batch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_abs_x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesselScanConfig {
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub starts: Vec<f64>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionScanConfig {
    pub gamma_over_sigma2: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub modes: Vec<DistanceMode>,
    pub n_paths: usize,
    /// Squared-Bessel reference, only for two opposite charges: hit and
    /// separation levels in units of `R = |X¹ − X²|²/(2σ²)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub dt: f64,
    pub hit_threshold: f64,
    pub separation_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldConfig {
    pub sigma: f64,
    pub gammabar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub std: f64,
    pub offset: f64,
    pub horizon: f64,
    pub particle_dt: f64,
    pub epsilon: f64,
    pub pde_dt: f64,
    pub half_width: f64,
    pub resolution: usize,
    pub bandwidth: f64,
    pub n_schedule: Vec<usize>,
    pub n_paths: usize,
    #[serde(default)]
    pub scheme: AdvectionScheme,
    /// Density summary rows every this many PDE steps.
    #[serde(default = "default_record_every")]
    pub summary_every: usize,
}

impl MeanFieldConfig {
    pub fn setup(&self) -> Result<MeanFieldSetup, CliError> {
        let grid = Grid2D::new(self.half_width, self.resolution).map_err(|e| CliError::from_core("meanfield", e))?;
        let setup = MeanFieldSetup {
            sigma: self.sigma,
            gammabar: self.gammabar,
            nu: self.nu,
            std: self.std,
            offset: self.offset,
            horizon: self.horizon,
            particle_dt: self.particle_dt,
            epsilon: self.epsilon,
            pde_dt: self.pde_dt,
            grid,
            bandwidth: self.bandwidth,
            n_paths: self.n_paths,
            scheme: self.scheme,
        };
        setup.validate().map_err(|e| CliError::from_core("meanfield", e))?;
        if self.n_schedule.is_empty() {
            return Err(CliError::config("meanfield.n_schedule", "must not be empty"));
        }
        if self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("meanfield.n_schedule", "must be strictly increasing"));
        }
        if self.n_schedule.iter().any(|n| n % 2 != 0 || *n < 2) {
            return Err(CliError::config("meanfield.n_schedule", "sizes must be even and >= 2"));
        }
        if self.summary_every == 0 {
            return Err(CliError::config("meanfield.summary_every", "must be >= 1"));
        }
        Ok(setup)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { String::new() } else { path };
            CliError::config(key, e.into_inner().message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// SHA-256 of the canonical TOML without the output directory, which
    /// does not influence results.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { output_dir: None, ..self.clone() };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn system(&self) -> Result<SystemParams, CliError> {
        let p = self.system.ok_or_else(|| CliError::config("system", "missing section"))?;
        p.validate().map_err(|e| CliError::from_core("system", e))?;
        Ok(p)
    }

    pub fn initial(&self) -> Result<&InitialCondition, CliError> {
        let i = self.initial.as_ref().ok_or_else(|| CliError::config("initial", "missing section"))?;
        i.validate().map_err(|e| CliError::from_core("initial", e))?;
        Ok(i)
    }

    pub fn estimators(&self) -> Result<&EstimatorConfig, CliError> {
        let e = self.estimators.as_ref().ok_or_else(|| CliError::config("estimators", "missing section"))?;
        if e.n_paths == 0 {
            return Err(CliError::config("estimators.n_paths", "must be >= 1"));
        }
        if e.record_every == 0 {
            return Err(CliError::config("estimators.record_every", "must be >= 1"));
        }
        Ok(e)
    }

    /// System and sampler together, checked for a matching particle count.
    pub fn particles(&self) -> Result<(SystemParams, &InitialCondition), CliError> {
        let p = self.system()?;
        let i = self.initial()?;
        if i.n_particles() != p.n_particles {
            return Err(CliError::config(
                "system.n_particles",
                format!("initial condition has {} particles", i.n_particles()),
            ));
        }
        Ok((p, i))
    }

    pub fn bessel(&self) -> Result<&BesselScanConfig, CliError> {
        let b = self.bessel.as_ref().ok_or_else(|| CliError::config("bessel", "missing section"))?;
        if b.n_paths == 0 {
            return Err(CliError::config("bessel.n_paths", "must be >= 1"));
        }
        if !(b.dt > 0.0 && b.horizon > 0.0) {
            return Err(CliError::config("bessel.dt", "dt and horizon must be > 0"));
        }
        if b.starts.iter().any(|&x| !(x >= 0.0)) {
            return Err(CliError::config("bessel.starts", "must be >= 0"));
        }
        if b.thresholds.iter().any(|&x| !(x > 0.0)) {
            return Err(CliError::config("bessel.thresholds", "must be > 0"));
        }
        Ok(b)
    }

    pub fn collision(&self) -> Result<&CollisionScanConfig, CliError> {
        let c = self.collision.as_ref().ok_or_else(|| CliError::config("collision", "missing section"))?;
        if c.n_paths == 0 {
            return Err(CliError::config("collision.n_paths", "must be >= 1"));
        }
        if c.gamma_over_sigma2.iter().any(|&g| !(g >= 0.0)) {
            return Err(CliError::config("collision.gamma_over_sigma2", "must be >= 0"));
        }
        if c.thresholds.iter().any(|&x| !(x > 0.0)) {
            return Err(CliError::config("collision.thresholds", "must be > 0"));
        }
        Ok(c)
    }

    pub fn meanfield(&self) -> Result<(&MeanFieldConfig, MeanFieldSetup), CliError> {
        let m = self.meanfield.as_ref().ok_or_else(|| CliError::config("meanfield", "missing section"))?;
        Ok((m, m.setup()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 11
command = "meanfield"

[system]
sigma = 1.0
gamma = 0.25
n_particles = 4
epsilon = 0.001
ell = 50.0
dt = 0.0001
horizon = 1.0

[initial]
kind = "cross-pattern-4"
radius = 0.5

[estimators]
n_paths = 100
alphas = [0.5]
phi_times = [0.5, 1.0]
thresholds = [0.01]
modes = ["same-sign", "opposite-sign"]

[bessel]
deltas = [-1.0, 2.5]
starts = [1.0]
thresholds = [0.001]
horizon = 1.0
dt = 0.001
n_paths = 100

[collision]
gamma_over_sigma2 = [0.25, 1.25]
thresholds = [0.01]
modes = ["all"]
n_paths = 100

[collision.reference]
dt = 0.0001
hit_threshold = 0.0001
separation_level = 0.005

[meanfield]
sigma = 1.0
gammabar = 0.3
std = 0.5
offset = 0.5
horizon = 0.5
particle_dt = 0.002
epsilon = 0.01
pde_dt = 0.002
half_width = 12.0
resolution = 256
bandwidth = 0.15
n_schedule = [32, 128, 512]
n_paths = 200
scheme = "muscl"
"#;

    #[test]
    fn round_trip_is_identity() {
        let a = ExperimentConfig::parse(FULL).unwrap();
        let b = ExperimentConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = FULL.replace("sigma = 1.0\ngamma", "sigmaa = 1.0\ngamma");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let CliError::Config { key, message } = err else { panic!() };
        assert!(key.starts_with("system"), "{key}");
        assert!(message.contains("sigmaa"), "{message}");
    }

    #[test]
    fn wrong_type_is_named() {
        let text = FULL.replace("n_paths = 100\nalphas", "n_paths = \"many\"\nalphas");
        let CliError::Config { key, .. } = ExperimentConfig::parse(&text).unwrap_err() else { panic!() };
        assert_eq!(key, "estimators.n_paths");
    }

    #[test]
    fn semantic_checks() {
        let mut c = ExperimentConfig::parse(FULL).unwrap();
        c.meanfield.as_mut().unwrap().gammabar = 0.6;
        assert!(matches!(c.meanfield(), Err(CliError::Config { .. })));
        let mut c = ExperimentConfig::parse(FULL).unwrap();
        c.bessel.as_mut().unwrap().n_paths = 0;
        let Err(CliError::Config { key, .. }) = c.bessel() else { panic!() };
        assert_eq!(key, "bessel.n_paths");
        let mut c = ExperimentConfig::parse(FULL).unwrap();
        c.system.as_mut().unwrap().n_particles = 3;
        assert!(c.particles().is_err());
    }

    #[test]
    fn output_dir_does_not_change_hash() {
        let a = ExperimentConfig::parse(FULL).unwrap();
        let b = ExperimentConfig { output_dir: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 12, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }
}
