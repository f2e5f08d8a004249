//! Experiment configuration. Precedence: command-line flags over the config
//! file over the defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use monge_core::gaussian::{CovarianceMode, CovarianceSpec};
use monge_core::selection::geometric_ladder;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Selection,
    Entropy,
    Diagnostics,
    Ratio,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Selection => "selection",
            Suite::Entropy => "entropy",
            Suite::Diagnostics => "diagnostics",
            Suite::Ratio => "ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceConfig {
    pub c1: f64,
    pub alpha: f64,
    pub dim_max: usize,
    /// Explicit variances; the equality sequence from `c1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<Vec<f64>>,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self { c1: 1.0, alpha: 3.0, dim_max: 8, custom: None }
    }
}

impl CovarianceConfig {
    pub fn build(&self) -> monge_core::Result<CovarianceSpec> {
        let mode = match &self.custom {
            Some(c) => CovarianceMode::Custom(c.clone()),
            None => CovarianceMode::Equality,
        };
        CovarianceSpec::build(self.c1, self.alpha, self.dim_max, mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Cell masses on a symmetric grid.
    Grid,
    /// Uniform weights on Gaussian samples.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    /// Fixture name, see `fixtures::catalog`.
    pub fixture: String,
    pub sampling: Sampling,
    /// Cells per axis for grid sampling and for entropy readings.
    pub cells: usize,
    /// Grid half width in standard deviations.
    pub half_width: f64,
    /// Atoms per side for empirical sampling.
    pub atoms: usize,
    /// Largest atom count per side handed to the exact solver.
    pub max_atoms: usize,
    /// Measure files for the `files` fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<MeasureFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFiles {
    pub source: PathBuf,
    pub target: PathBuf,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            fixture: "book-shift".into(),
            sampling: Sampling::Empirical,
            cells: 64,
            half_width: 5.0,
            atoms: 32,
            max_atoms: 4096,
            files: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioConfig {
    pub radius: f64,
    pub deltas: Vec<f64>,
    pub mc_samples: usize,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self { radius: 0.25, deltas: vec![0.5, 0.25, 0.1], mc_samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub covariance: CovarianceConfig,
    pub dims: Vec<usize>,
    pub measures: MeasureConfig,
    pub epsilons: Vec<f64>,
    pub ts: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub suites: Vec<Suite>,
    pub workers: usize,
    pub face_tol: f64,
    /// `eps` of the perturbed cost in the entropy suite.
    pub convexity_epsilon: f64,
    pub ratio: RatioConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            covariance: CovarianceConfig::default(),
            dims: vec![1],
            measures: MeasureConfig::default(),
            epsilons: monge_core::selection::default_ladder(),
            ts: vec![0.25, 0.5, 0.75],
            seeds: vec![0],
            output_dir: PathBuf::from("monge-out"),
            suites: vec![Suite::Selection, Suite::Entropy, Suite::Diagnostics, Suite::Ratio],
            workers: 1,
            face_tol: monge_core::selection::DEFAULT_FACE_TOL,
            convexity_epsilon: 1e-2,
            ratio: RatioConfig::default(),
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub epsilons: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub dim: Option<usize>,
    pub fixture: Option<String>,
    pub files: Option<MeasureFiles>,
    pub suites: Option<Vec<Suite>>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigError(format!("{}: {e}", path.display())))
    }

    /// Defaults, then `file`, then `overrides`; validated.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seeds = vec![v];
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.epsilons {
            self.epsilons = v.clone();
        }
        if let Some(v) = o.grid {
            self.measures.cells = v;
        }
        if let Some(v) = o.dim {
            self.dims = vec![v];
        }
        if let Some(v) = &o.fixture {
            self.measures.fixture = v.clone();
        }
        if let Some(v) = &o.files {
            self.measures.files = Some(v.clone());
            self.measures.fixture = crate::fixtures::FILES.into();
        }
        if let Some(v) = &o.suites {
            self.suites = v.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigError(m));
        let spec = self.covariance.build().map_err(|e| Error::ConfigError(format!("covariance: {e}")))?;
        if self.dims.is_empty() || self.dims.iter().any(|&d| d == 0 || d > spec.dim_max()) {
            return bad(format!("dims must lie in 1..={}", spec.dim_max()));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.epsilons.is_empty()
            || self.epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite())
            || self.epsilons.windows(2).any(|w| !(w[0] > w[1]))
        {
            return bad("epsilons must be positive and strictly decreasing".into());
        }
        if self.ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("interpolation times must lie in [0, 1]".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.measures.cells < 2 || self.measures.atoms == 0 || self.measures.max_atoms == 0 {
            return bad("cells must be at least 2 and atom counts positive".into());
        }
        if !(self.measures.half_width > 0.0) {
            return bad("half_width must be positive".into());
        }
        if self.measures.fixture == crate::fixtures::FILES {
            if self.measures.files.is_none() {
                return bad("the files fixture needs source and target paths".into());
            }
        } else if !crate::fixtures::catalog().iter().any(|f| f.name == self.measures.fixture) {
            return bad(format!("unknown fixture {:?}", self.measures.fixture));
        }
        if !(self.convexity_epsilon > 0.0) || !self.convexity_epsilon.is_finite() {
            return bad("convexity_epsilon must be positive".into());
        }
        if !(self.face_tol >= 0.0) {
            return bad("face_tol must be nonnegative".into());
        }
        if !(self.ratio.radius >= 0.0) || self.ratio.mc_samples == 0 {
            return bad("ratio radius must be nonnegative and mc_samples positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of every field that affects results;
    /// the output directory and worker count are left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.workers = 0;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Parses `start:end:geometric[:per_decade]` (two steps per decade by
/// default) or a comma-separated list.
pub fn parse_epsilons(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::ConfigError(format!("epsilon spec {spec:?}: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, end, kind] | [start, end, kind, _] if kind.trim() == "geometric" => {
            let per = match parts.get(3) {
                Some(p) => p.trim().parse::<usize>().map_err(|_| bad("steps per decade must be an integer"))?,
                None => 2,
            };
            geometric_ladder(num(start)?, num(end)?, per).map_err(|e| bad(&e.to_string()))
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad("expected start:end:geometric[:per_decade] or a comma list")),
    }
}
