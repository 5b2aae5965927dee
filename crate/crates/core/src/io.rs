//! CSV tables and binary density snapshots.
//!
//! CSV files may start with `#` comment lines (run metadata such as the
//! configuration hash); readers skip them and return them separately.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bessel::{BesselPath, RegimeStatistics};
use crate::error::{Error, Result};
use crate::meanfield::{Grid2D, GridDensityPair};
use crate::model::Sign;
use crate::sde::Trajectory;

/// A row type with a fixed column list.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

macro_rules! record {
    ($ty:ident, [$($col:literal),* $(,)?]) => {
        impl CsvRecord for $ty {
            const HEADER: &'static [&'static str] = &[$($col),*];
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub particle: usize,
    pub sign: i8,
    pub x: f64,
    pub y: f64,
}
record!(TrajectoryRow, ["t", "particle", "sign", "x", "y"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub d_all: Option<f64>,
    pub d_same: Option<f64>,
    pub d_opp: Option<f64>,
    pub phi: f64,
    pub drift_l1: f64,
    pub singular_event: u8,
}
record!(DiagnosticsRow, ["t", "d_all", "d_same", "d_opp", "phi", "drift_l1", "singular_event"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselRow {
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
}
record!(BesselRow, ["t", "R"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRow {
    pub delta: f64,
    pub x: f64,
    pub threshold: f64,
    pub estimate: f64,
    pub ci: f64,
}
record!(HitRow, ["delta", "x", "threshold", "estimate", "ci"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub name: String,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_paths: usize,
    pub params_hash: String,
}
record!(EstimateRow, ["name", "estimate", "ci_lo", "ci_hi", "n_paths", "params_hash"]);

/// One row per path of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path: usize,
    pub min_all: Option<f64>,
    pub min_same: Option<f64>,
    pub min_opp: Option<f64>,
    pub terminal_mean_abs: f64,
    pub drift_integral: f64,
    pub singular_events: usize,
}
record!(PathRow, ["path", "min_all", "min_same", "min_opp", "terminal_mean_abs", "drift_integral", "singular_events"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummaryRow {
    pub t: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
    pub second_moment: f64,
    pub boundary_mass: f64,
}
record!(DensitySummaryRow, ["t", "mass_plus", "mass_minus", "second_moment", "boundary_mass"]);

impl DensitySummaryRow {
    pub fn of(t: f64, d: &GridDensityPair) -> Self {
        Self {
            t,
            mass_plus: d.mass_plus(),
            mass_minus: d.mass_minus(),
            second_moment: d.second_moment(),
            boundary_mass: d.boundary_mass(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub phi_id: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub residual: f64,
}
record!(ResidualRow, ["N", "phi_id", "T", "residual"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub bl_distance: f64,
    pub w_residual: f64,
}
record!(ConvergenceRow, ["N", "bl_distance", "w_residual"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRow {
    pub gamma_over_sigma2: f64,
    pub mode: String,
    pub threshold: f64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_paths: usize,
}
record!(CollisionRow, ["gamma_over_sigma2", "mode", "threshold", "estimate", "ci_lo", "ci_hi", "n_paths"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub gamma_over_sigma2: f64,
    pub delta: f64,
    pub regime: String,
    pub hit_fraction: f64,
    pub frozen_fraction: f64,
    pub separation_fraction: Option<f64>,
    pub n_paths: usize,
}
record!(RegimeRow, ["gamma_over_sigma2", "delta", "regime", "hit_fraction", "frozen_fraction", "separation_fraction", "n_paths"]);

impl From<&RegimeStatistics> for RegimeRow {
    fn from(s: &RegimeStatistics) -> Self {
        Self {
            gamma_over_sigma2: s.gamma_over_sigma2,
            delta: s.delta,
            regime: s.regime.name().to_string(),
            hit_fraction: s.hit.value,
            frozen_fraction: s.frozen.value,
            separation_fraction: s.separation.map(|e| e.value),
            n_paths: s.n_paths,
        }
    }
}

pub fn trajectory_rows(traj: &Trajectory) -> Vec<TrajectoryRow> {
    let mut out = Vec::new();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for (i, (p, s)) in state.positions().iter().zip(state.signs()).enumerate() {
            out.push(TrajectoryRow { t: *t, particle: i, sign: s.value() as i8, x: p.x, y: p.y });
        }
    }
    out
}

pub fn diagnostics_rows(traj: &Trajectory) -> Vec<DiagnosticsRow> {
    traj.diagnostics
        .iter()
        .map(|d| DiagnosticsRow {
            t: d.t,
            d_all: d.min.all,
            d_same: d.min.same,
            d_opp: d.min.opposite,
            phi: d.phi,
            drift_l1: d.drift_l1,
            singular_event: d.singular_event as u8,
        })
        .collect()
}

pub fn bessel_rows(path: &BesselPath) -> Vec<BesselRow> {
    path.times.iter().zip(&path.values).map(|(&t, &r)| BesselRow { t, r }).collect()
}

/// Writes `# line` comments, the header, then the rows. An empty `rows`
/// still yields the header.
pub fn write_csv_to<W: Write, T: CsvRecord>(mut w: W, comments: &[String], rows: &[T]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(T::HEADER)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv<T: CsvRecord>(path: &Path, comments: &[String], rows: &[T]) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    write_csv_to(f, comments, rows)
}

/// Reads rows, returning the leading comments (without `# `) alongside.
pub fn read_csv_from<R: Read, T: CsvRecord>(r: R) -> Result<(Vec<String>, Vec<T>)> {
    let mut reader = BufReader::new(r);
    let mut comments = Vec::new();
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else {
            body.push_str(&line);
            reader.read_to_string(&mut body)?;
            break;
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != T::HEADER {
        return Err(Error::Io(format!("unexpected columns {header:?}, wanted {:?}", T::HEADER)));
    }
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((comments, rows))
}

pub fn read_csv<T: CsvRecord>(path: &Path) -> Result<(Vec<String>, Vec<T>)> {
    read_csv_from(File::open(path)?)
}

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"CLDS";
pub const SNAPSHOT_VERSION: u32 = 1;

/// One species of a density on a grid at time `t`.
///
/// Layout, little endian: magic `CLDS`, `u32` version, `u32` M, `f64` L,
/// `f64` t, `i8` species, then `M²` `f64` values row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub grid: Grid2D,
    pub t: f64,
    pub species: Sign,
    pub data: Vec<f64>,
}

impl DensitySnapshot {
    pub fn of(d: &GridDensityPair, t: f64, species: Sign) -> Self {
        Self { grid: d.grid, t, species, data: d.species(species).to_vec() }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.resolution as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&[self.species.value() as i8 as u8])?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::Io("not a density snapshot".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Io(format!("unsupported snapshot version {version}")));
        }
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let half_width = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let t = f64::from_le_bytes(b8);
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let species = match b1[0] as i8 {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            s => return Err(Error::Io(format!("bad species byte {s}"))),
        };
        let grid = Grid2D::new(half_width, m).map_err(|e| Error::Io(e.to_string()))?;
        let mut data = Vec::with_capacity(m * m);
        for _ in 0..m * m {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        Ok(Self { grid, t, species, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
