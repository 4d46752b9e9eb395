//! Experiment configuration: one TOML file with dotted sections, one
//! experiment. Every section rejects unknown keys. After loading, defaults
//! are materialised so the echoed config is the complete input.
//!
//! ```toml
//! [model]
//! n = 3
//! m1 = 1.0
//! m2 = 2.0
//! chi = 1.0
//! alpha = 1.0
//!
//! [domain]
//! geometry = "ball"        # interval | ball | general
//! measure = 1.0            # or radius = ...
//!
//! [exponents]
//! mode = "explicit"        # explicit | search
//! p = 4.0
//! q = 4.0
//!
//! [gn]
//! mode = "supplied"        # supplied | estimate
//! c1 = 1.0
//! c2 = 1.0
//!
//! [initial_data]
//! kind = "constant"        # constant | gaussian | cosine | from_file
//! u = 1.0
//! ```

use std::path::{Path, PathBuf};

use chemobound_core::constants::{GnConstants, GnProvenance};
use chemobound_core::exponents::{resolve_eta, search_admissible, DomainSpec, ExponentConfig, ModelParams, ScanRange};
use chemobound_core::field::{Grid, State};
use chemobound_core::solver::{InitialData, Profile, SolverConfig};
use chemobound_core::verify::{estimate_gn_constant, GnNorms};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

type Result<T> = std::result::Result<T, HarnessError>;

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub domain: DomainSection,
    pub exponents: ExponentsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gn: Option<GnSection>,
    #[serde(default)]
    pub bound: BoundSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverConfig,
    pub initial_data: InitialSpec,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: u32,
    pub m1: f64,
    pub m2: f64,
    pub chi: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSection {
    Interval {
        length: f64,
    },
    /// exactly one of `radius`, `measure`
    Ball {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        measure: Option<f64>,
    },
    /// measure and convexity only; cannot be simulated
    General {
        measure: f64,
        convex: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExponentsSection {
    Explicit {
        p: f64,
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
    /// uniform scan; the admissible pair with the smallest `f(η, r)` wins
    Search {
        p_min: f64,
        p_max: f64,
        q_min: f64,
        q_max: f64,
        step: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GnSection {
    Supplied {
        c1: f64,
        c2: f64,
    },
    /// empirical lower bound on each constant times `safety_factor`
    Estimate {
        budget: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_gn_cells")]
        cells: usize,
        #[serde(default = "default_safety")]
        safety_factor: f64,
    },
}

fn default_gn_cells() -> usize {
    256
}

fn default_safety() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// boundary constant; required iff the domain is non-convex
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_delta: Option<f64>,
}

impl Default for BoundSection {
    fn default() -> Self {
        BoundSection { tol: chemobound_core::bound::DEFAULT_TOL, delta: None, d_delta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        u: f64,
        #[serde(default)]
        v: f64,
        #[serde(default)]
        noise: f64,
    },
    /// `u = base + amplitude·exp(-((x - center)/width)²)`, `v` constant
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        base: f64,
        #[serde(default)]
        v: f64,
        #[serde(default)]
        noise: f64,
    },
    /// `u = mean + amplitude·cos(kπx/L)`, `v` constant
    Cosine {
        mean: f64,
        amplitude: f64,
        k: f64,
        #[serde(default)]
        v: f64,
        #[serde(default)]
        noise: f64,
    },
    /// CSV with header `x,u,v`, one row per cell (the snapshot format);
    /// relative paths resolve against the config file's directory
    FromFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { tol: chemobound_core::verify::DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub m1: Vec<f64>,
    pub simulate: bool,
    pub frozen_constants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// not echoed: where results go does not change what they are
    #[serde(skip_serializing)]
    pub dir: Option<PathBuf>,
    pub plots: bool,
    /// snapshot CSVs per run, evenly spaced over the samples
    pub snapshots: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: None, plots: true, snapshots: 5 }
    }
}

/// A parsed config plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

pub fn parse(text: &str, origin: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| cfg_err(format!("{origin}: {e}")))
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    let mut config = parse(&text, &path.display().to_string())?;
    config.materialize()?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base_dir })
}

impl ExperimentConfig {
    /// Fills every optional default and validates the cheap invariants, so
    /// that the echoed config is complete and nothing runs on bad input.
    pub fn materialize(&mut self) -> Result<()> {
        let n = self.model.n;
        let eta = match &mut self.exponents {
            ExponentsSection::Explicit { eta, .. } | ExponentsSection::Search { eta, .. } => eta,
        };
        *eta = Some(resolve_eta(n, *eta).map_err(|e| cfg_err(e.to_string()))?);
        if let DomainSection::Ball { radius, measure } = self.domain {
            if radius.is_some() == measure.is_some() {
                return Err(cfg_err("domain: a ball needs exactly one of `radius`, `measure`"));
            }
        }
        self.params()?;
        self.solver.validate().map_err(|e| cfg_err(format!("solver: {e}")))?;
        if !(self.bound.tol > 0.0) {
            return Err(cfg_err(format!("bound.tol must be > 0, got {}", self.bound.tol)));
        }
        if !(self.verify.tol > 0.0) {
            return Err(cfg_err(format!("verify.tol must be > 0, got {}", self.verify.tol)));
        }
        if let Some(GnSection::Estimate { budget, safety_factor, .. }) = self.gn {
            if budget == 0 || !(safety_factor >= 1.0) {
                return Err(cfg_err("gn: estimate needs budget >= 1 and safety_factor >= 1"));
            }
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        let n = self.model.n;
        let spec = match self.domain {
            DomainSection::Interval { length } => {
                if n != 1 {
                    return Err(cfg_err(format!("domain: an interval needs n = 1, got n = {n}")));
                }
                DomainSpec::interval(length)
            }
            DomainSection::Ball { radius: Some(r), .. } => DomainSpec::ball(r, n),
            DomainSection::Ball { measure: Some(m), .. } => DomainSpec::ball_with_measure(m, n),
            DomainSection::Ball { .. } => return Err(cfg_err("domain: a ball needs `radius` or `measure`")),
            DomainSection::General { measure, convex } => DomainSpec::general(measure, convex),
        };
        spec.map_err(|e| cfg_err(format!("domain: {e}")))
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.params_with_m1(self.model.m1)
    }

    pub fn params_with_m1(&self, m1: f64) -> Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.n, m1, m.m2, m.chi, m.alpha, self.domain_spec()?).map_err(|e| cfg_err(format!("model: {e}")))
    }

    pub fn eta(&self) -> f64 {
        match self.exponents {
            ExponentsSection::Explicit { eta, .. } | ExponentsSection::Search { eta, .. } => {
                eta.expect("materialized")
            }
        }
    }

    /// Explicit exponents as given (possibly inadmissible), or the best
    /// admissible pair of the scan. `Ok(None)` means the scan found nothing.
    pub fn exponents_for(&self, params: &ModelParams) -> Result<Option<ExponentConfig>> {
        let eta = self.eta();
        match self.exponents {
            ExponentsSection::Explicit { p, q, .. } => ExponentConfig::derive(params, p, q, eta)
                .map(Some)
                .map_err(|e| HarnessError::Inadmissible(e.to_string())),
            ExponentsSection::Search { p_min, p_max, q_min, q_max, step, .. } => {
                let found = search_admissible(params, eta, ScanRange::new(p_min, p_max), ScanRange::new(q_min, q_max), step)
                    .map_err(|e| cfg_err(format!("exponents: {e}")))?;
                Ok(found.into_iter().next())
            }
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain_spec()?, self.grid.cells).map_err(|e| cfg_err(format!("grid: {e}")))
    }

    pub fn initial_data(&self, base_dir: &Path, grid: &Grid) -> Result<InitialData> {
        let constant = |value: f64| Profile::Constant { value };
        let data = match &self.initial_data {
            InitialSpec::Constant { u, v, noise } => InitialData { u: constant(*u), v: constant(*v), noise: *noise },
            InitialSpec::Gaussian { amplitude, width, center, base, v, noise } => InitialData {
                u: Profile::Gaussian { amplitude: *amplitude, width: *width, center: *center, base: *base },
                v: constant(*v),
                noise: *noise,
            },
            InitialSpec::Cosine { mean, amplitude, k, v, noise } => InitialData {
                u: Profile::Cosine { mean: *mean, amplitude: *amplitude, k: *k },
                v: constant(*v),
                noise: *noise,
            },
            InitialSpec::FromFile { path } => {
                let (u, v) = read_profile(&base_dir.join(path), grid)?;
                InitialData { u: Profile::Values { values: u }, v: Profile::Values { values: v }, noise: 0.0 }
            }
        };
        Ok(data)
    }

    pub fn initial_state(&self, base_dir: &Path, grid: &Grid) -> Result<State> {
        self.initial_data(base_dir, grid)?
            .build(grid, self.solver.seed)
            .map_err(|e| cfg_err(format!("initial_data: {e}")))
    }

    /// `Φ(0)` for the given exponents. A general domain has no grid, so
    /// only constant data (zero gradient) is accepted there.
    pub fn phi0(&self, base_dir: &Path, cfg: &ExponentConfig) -> Result<f64> {
        let alpha = self.model.alpha;
        if let DomainSection::General { measure, .. } = self.domain {
            return match self.initial_data {
                InitialSpec::Constant { u, noise: 0.0, .. } => Ok((u + alpha).powf(cfg.p) * measure / cfg.p),
                _ => Err(cfg_err("initial_data: a general domain only supports constant data without noise")),
            };
        }
        let grid = self.grid()?;
        let state = self.initial_state(base_dir, &grid)?;
        Ok(chemobound_core::field::phi_measure(&state, cfg.p, cfg.q, alpha, &grid))
    }

    /// Resolves the GN section. Estimation runs on this experiment's
    /// geometry with its own grid size.
    pub fn gn_constants(&self, cfg: &ExponentConfig) -> Result<GnConstants> {
        match self.gn {
            None => Err(cfg_err("gn: section required for bounds")),
            Some(GnSection::Supplied { c1, c2 }) => GnConstants::supplied(c1, c2).map_err(|e| cfg_err(format!("gn: {e}"))),
            Some(GnSection::Estimate { budget, seed, cells, safety_factor }) => {
                let spec = self.domain_spec()?;
                let grid = Grid::new(spec, cells).map_err(|e| cfg_err(format!("gn: {e}")))?;
                let est = |norms: GnNorms| {
                    estimate_gn_constant(&norms, &grid, budget, seed)
                        .map(|e| e.c_est * safety_factor)
                        .map_err(|e| cfg_err(format!("gn: {e}")))
                };
                let c1 = est(GnNorms::density(cfg))?;
                let c2 = est(GnNorms::signal(cfg.eta))?;
                GnConstants::new(c1, c2, GnProvenance::Estimated { budget, safety_factor })
                    .map_err(|e| cfg_err(format!("gn: {e}")))
            }
        }
    }

    /// Canonical TOML of the resolved config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn read_profile(path: &Path, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    let fail = |m: String| cfg_err(format!("initial_data {}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "u", "v"] {
        return Err(fail(format!("expected header x,u,v, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| fail(format!("row {}: `{}` is not a number", line + 2, &rec[i])))
        };
        u.push(num(1)?);
        v.push(num(2)?);
    }
    if u.len() != grid.cells() {
        return Err(fail(format!("{} rows for a grid of {} cells", u.len(), grid.cells())));
    }
    Ok((u, v))
}
