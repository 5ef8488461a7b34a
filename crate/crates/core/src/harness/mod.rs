//! Named experiments, their configuration and the run manifest they emit.
//!
//! Every experiment returns a [`RunManifest`] holding per-ε records, rate
//! fits, CSV tables and the outcome of its assertions. Nothing is written to
//! disk until [`write_outputs`] is called.

mod atlas;
mod concentration;
mod harmonic;
mod l2rate;
mod probe;
mod random_family;
mod weak;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classical::{liouville_with, Interpolation, LiouvilleConfig};
use crate::error::{config, Error, Result};
use crate::grid::{PhaseGrid, PositionGrid};
use crate::initial_data::SamplingLaw;
use crate::metrics::RateFit;
use crate::phase_space::{DensityKind, PhaseSpaceDensity};
use crate::potential::PotentialSpec;

pub use atlas::run_branch_atlas;
pub use concentration::run_concentration_split;
pub use harmonic::run_harmonic_exact;
pub use l2rate::run_l2_mollified_rate;
pub use probe::run_conjecture_probe;
pub use random_family::run_random_family;
pub use weak::run_weak_convergence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    HarmonicExact,
    WeakConvergence,
    L2MollifiedRate,
    ConcentrationSplit,
    RandomFamily,
    ConjectureProbe,
    BranchAtlas,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::HarmonicExact,
        Self::WeakConvergence,
        Self::L2MollifiedRate,
        Self::ConcentrationSplit,
        Self::RandomFamily,
        Self::ConjectureProbe,
        Self::BranchAtlas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::HarmonicExact => "harmonic_exact",
            Self::WeakConvergence => "weak_convergence",
            Self::L2MollifiedRate => "l2_mollified_rate",
            Self::ConcentrationSplit => "concentration_split",
            Self::RandomFamily => "random_family",
            Self::ConjectureProbe => "conjecture_probe",
            Self::BranchAtlas => "branch_atlas",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown experiment '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

/// Which potentials the weak-convergence experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Smooth,
    RoughAway,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Strictly decreasing, inside `(0, 1)`.
    pub eps_ladder: Vec<f64>,
    pub theta: f64,
    /// Points on the `x` axis.
    pub grid_points: usize,
    /// Points on the `p` axis of phase grids.
    pub momentum_points: usize,
    /// The `x` box is `[-half_width, half_width)`.
    pub half_width: f64,
    pub momentum_half_width: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Number of equal segments of `[0, t_final]` at which distances are
    /// sampled.
    pub sample_times: usize,
    /// Mollification times for the classical side; empty means `ε` itself.
    pub eps_mollify_ladder: Vec<f64>,
    /// Only reported.
    pub delta_growth: f64,
    pub seed: u64,
    pub samples: usize,
    pub potential: Option<PotentialSpec>,
    pub scenario: Scenario,
    pub datum_center: [f64; 2],
    pub datum_width: f64,
    /// Bump radii of the concentrating profile.
    pub bump_radii: [f64; 2],
    /// Right-half-plane mass of the shifted concentrating profile.
    pub right_mass: f64,
    pub check_times: Vec<f64>,
    pub law: SamplingLaw,
    pub thetas: Vec<f64>,
    pub delays: Vec<f64>,
    pub output_dir: Option<String>,
    pub dump_grids: bool,
}

const STANDARD_LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

impl ExperimentConfig {
    /// Defaults for one experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            eps_ladder: STANDARD_LADDER.to_vec(),
            theta: 0.5,
            grid_points: 256,
            momentum_points: 256,
            half_width: 4.0,
            momentum_half_width: 4.0,
            t_final: 1.0,
            dt: 0.01,
            sample_times: 10,
            eps_mollify_ladder: Vec::new(),
            delta_growth: 0.1,
            seed: 20240611,
            samples: 64,
            potential: None,
            scenario: Scenario::Both,
            datum_center: [1.0, 0.0],
            datum_width: 0.3,
            bump_radii: [0.5, 0.2],
            right_mass: 0.7,
            check_times: Vec::new(),
            law: SamplingLaw::Gaussian {
                mean: [0.0, 0.0],
                std: [1.5, 1.5],
            },
            thetas: vec![0.5],
            delays: vec![0.0, 0.5, 1.0],
            output_dir: None,
            dump_grids: false,
        };
        match kind {
            ExperimentKind::HarmonicExact => {
                c.eps_ladder = vec![0.05];
                c.grid_points = 1024;
                c.half_width = 8.0;
                c.t_final = std::f64::consts::FRAC_PI_2;
                c.dt = 1e-3;
                c.sample_times = 8;
                c.datum_center = [1.0, 0.5];
                c.potential = Some(PotentialSpec::Harmonic);
            }
            ExperimentKind::WeakConvergence => {
                c.eps_mollify_ladder = vec![0.0];
            }
            ExperimentKind::L2MollifiedRate => {
                c.datum_center = [-0.5, 1.2];
                c.datum_width = 0.4;
                c.dt = 0.005;
                c.potential = Some(PotentialSpec::rough_power(0.5));
            }
            ExperimentKind::ConcentrationSplit => {
                c.eps_ladder = vec![1e-2, 1e-3, 1e-4];
                c.grid_points = 512;
                c.momentum_points = 512;
                c.half_width = 2.5;
                c.momentum_half_width = 2.0;
                c.check_times = vec![0.5, 1.0];
            }
            ExperimentKind::RandomFamily => {
                c.dt = 2e-3;
                c.sample_times = 5;
                c.potential = Some(PotentialSpec::Anharmonic {
                    quadratic: 1.0,
                    quartic: 0.05,
                });
            }
            ExperimentKind::ConjectureProbe => {
                c.half_width = 1.0;
            }
            ExperimentKind::BranchAtlas => {
                c.eps_ladder = Vec::new();
                c.thetas = vec![0.1, 0.3, 0.5, 0.7];
                c.t_final = 1.5;
                c.dt = 1e-5;
            }
        }
        c
    }

    /// Parses JSON, filling unspecified fields with the defaults of the
    /// named experiment.
    pub fn from_json(text: &str) -> Result<Self> {
        let overlay: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(fields) = overlay else {
            return Err(Error::Format("configuration must be a JSON object".into()));
        };
        let kind: ExperimentKind = match fields.get("experiment") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => return Err(Error::Config("configuration lacks the 'experiment' field".into())),
        };
        Self::defaults(kind).overlay(fields)
    }

    /// Replaces fields with those present in `fields`.
    pub fn overlay(&self, fields: serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        let obj = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in fields {
            obj.insert(k, v);
        }
        Ok(serde_json::from_value(base)?)
    }

    pub fn validate(&self) -> Result<()> {
        let needs_ladder = !matches!(self.experiment, ExperimentKind::BranchAtlas);
        if needs_ladder && self.eps_ladder.is_empty() {
            return config("ε ladder is empty");
        }
        if self.eps_ladder.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return config(format!("ε ladder values must lie in (0, 1): {:?}", self.eps_ladder));
        }
        if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return config(format!("ε ladder must be strictly decreasing: {:?}", self.eps_ladder));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return config(format!("time horizon must be positive, got {}", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return config(format!("dt must lie in (0, T], got {}", self.dt));
        }
        if self.sample_times == 0 {
            return config("sample_times must be at least 1");
        }
        if self.eps_mollify_ladder.iter().any(|e| !(*e >= 0.0)) {
            return config("mollification times must be non-negative");
        }
        for (n, what) in [(self.grid_points, "grid_points"), (self.momentum_points, "momentum_points")] {
            if n < 16 {
                return config(format!("{what} must be at least 16, got {n}"));
            }
        }
        if !(self.half_width > 0.0 && self.momentum_half_width > 0.0) {
            return config("box half-widths must be positive");
        }
        if let Some(p) = &self.potential {
            p.validate()?;
        }
        self.law.validate()?;
        Ok(())
    }

    /// Hash of everything that determines the numbers, i.e. all fields but
    /// the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.dump_grids = false;
        crate::hash_json(&c)
    }

    pub(crate) fn potential_or(&self, fallback: PotentialSpec) -> PotentialSpec {
        self.potential.clone().unwrap_or(fallback)
    }

    pub(crate) fn phase_grid(&self) -> Result<PhaseGrid> {
        Ok(PhaseGrid::new(
            PositionGrid::centered(self.grid_points, self.half_width)?,
            PositionGrid::centered(self.momentum_points, self.momentum_half_width)?,
        ))
    }

    /// Sampling instants `T k / sample_times`, `k = 0..=sample_times`.
    pub(crate) fn times(&self) -> Vec<f64> {
        (0..=self.sample_times)
            .map(|k| self.t_final * k as f64 / self.sample_times as f64)
            .collect()
    }
}

/// A named numeric table, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Numbers recorded for one ladder point (or one branch, one family...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub label: String,
    pub eps: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

impl Record {
    pub fn new(label: impl Into<String>, eps: Option<f64>) -> Self {
        Self {
            label: label.into(),
            eps,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub fits: BTreeMap<String, RateFit>,
    pub tables: Vec<String>,
    pub warnings: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub table_data: Vec<Table>,
    #[serde(skip)]
    pub snapshots: Vec<(String, Array2<f64>)>,
}

impl RunManifest {
    pub(crate) fn start(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: cfg.experiment,
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            records: Vec::new(),
            fits: BTreeMap::new(),
            tables: Vec::new(),
            warnings: Vec::new(),
            assertions: Vec::new(),
            wall_clock_seconds: 0.0,
            table_data: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        if !passed {
            log::error!("assertion '{name}' failed: {detail}");
        }
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail,
        });
    }

    /// Records a warning unless one differing only in its numbers is
    /// already present.
    pub(crate) fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        let shape = |s: &str| s.chars().filter(|c| !c.is_ascii_digit()).collect::<String>();
        let key = shape(&w);
        if self.warnings.iter().any(|x| shape(x) == key) {
            return;
        }
        log::warn!("{w}");
        self.warnings.push(w);
    }

    pub(crate) fn add_table(&mut self, t: Table) {
        self.tables.push(format!("{}.csv", t.name));
        self.table_data.push(t);
    }

    pub(crate) fn snapshot(&mut self, name: String, density: &PhaseSpaceDensity) {
        if self.config.dump_grids {
            if let Some(v) = density.values() {
                self.snapshots.push((name, v.clone()));
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.table_data.iter().find(|t| t.name == name)
    }

    pub fn record(&self, label: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.label == label)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

/// Validates `cfg` and runs the experiment it names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut manifest = match cfg.experiment {
        ExperimentKind::HarmonicExact => run_harmonic_exact(cfg),
        ExperimentKind::WeakConvergence => run_weak_convergence(cfg),
        ExperimentKind::L2MollifiedRate => run_l2_mollified_rate(cfg),
        ExperimentKind::ConcentrationSplit => run_concentration_split(cfg),
        ExperimentKind::RandomFamily => run_random_family(cfg),
        ExperimentKind::ConjectureProbe => run_conjecture_probe(cfg),
        ExperimentKind::BranchAtlas => run_branch_atlas(cfg),
    }?;
    manifest.wall_clock_seconds = clock.elapsed().as_secs_f64();
    Ok(manifest)
}

/// Writes `manifest.json`, one CSV per table and requested grid snapshots.
pub fn write_outputs(manifest: &RunManifest, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for t in &manifest.table_data {
        std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
    }
    for (name, values) in &manifest.snapshots {
        crate::gridio::save_grid(dir.join(format!("{name}.grid")), values)?;
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Normalized Gaussian `N((x0, p0), s² I)` sampled on `grid`.
pub(crate) fn gaussian_density(grid: &PhaseGrid, center: [f64; 2], s: f64) -> Result<PhaseSpaceDensity> {
    let (x, p) = (grid.x.nodes(), grid.p.nodes());
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s * s);
    let v = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        norm * (-((x[i] - center[0]).powi(2) + (p[j] - center[1]).powi(2)) / (2.0 * s * s)).exp()
    });
    PhaseSpaceDensity::from_grid(grid.clone(), v, DensityKind::Classical)
}

/// Densities at `times` (increasing, from 0) under the Moyal evolution.
pub(crate) fn moyal_snapshots(
    w0: &PhaseSpaceDensity,
    eps: f64,
    pot: &PotentialSpec,
    dt: f64,
    times: &[f64],
    warnings: &mut Vec<String>,
) -> Result<Vec<PhaseSpaceDensity>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut w, mut now) = (w0.clone(), 0.0);
    for &t in times {
        if t > now {
            let step = crate::quantum::propagate_wigner(&w, eps, pot, &crate::quantum::PropagatorConfig::new(dt, t - now))?;
            warnings.extend(step.warnings);
            w = step.state;
            now = t;
        }
        out.push(w.clone());
    }
    Ok(out)
}

/// Densities at `times` under the (mollified) Liouville flow.
pub(crate) fn liouville_snapshots(
    f0: &PhaseSpaceDensity,
    pot: &PotentialSpec,
    eps_mollify: f64,
    dt: f64,
    interpolation: Interpolation,
    times: &[f64],
    warnings: &mut Vec<String>,
) -> Result<Vec<PhaseSpaceDensity>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut f, mut now) = (f0.clone(), 0.0);
    for &t in times {
        if t > now {
            let lc = LiouvilleConfig::new(eps_mollify, dt, t - now).with_interpolation(interpolation);
            let step = liouville_with(&f, pot, &lc)?;
            warnings.extend(step.warnings);
            f = step.state;
            now = t;
        }
        out.push(f.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_in_both_spellings() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(k.name().replace('_', "-").parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn partial_json_overlays_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "concentration_split", "seed": 3}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.eps_ladder, vec![1e-2, 1e-3, 1e-4]);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "random_family", "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json("[1]").is_err());
    }

    #[test]
    fn validation_rejects_bad_ladders() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::WeakConvergence);
        assert!(c.validate().is_ok());
        c.eps_ladder = vec![0.1, 0.2];
        assert!(c.validate().is_err());
        c.eps_ladder = vec![1.5, 0.1];
        assert!(c.validate().is_err());
        c.eps_ladder = vec![0.1];
        c.t_final = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::defaults(ExperimentKind::BranchAtlas);
        let mut b = a.clone();
        b.output_dir = Some("/tmp/x".into());
        b.dump_grids = true;
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn csv_is_plain_and_round_trips() {
        let mut t = Table::new("demo", &["eps", "d"]);
        t.push(vec![0.1, 2.5e-3]);
        t.push(vec![0.05, 1.0 / 3.0]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "eps,d");
        let back: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(back, vec![0.05, 1.0 / 3.0]);
        assert_eq!(t.column("d").unwrap(), vec![2.5e-3, 1.0 / 3.0]);
    }
}
