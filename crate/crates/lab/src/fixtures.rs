//! Built-in instances.

use monge_core::gaussian::TruncatedGaussian;
use monge_core::transport::{PlanEntry, TransportPlan};
use monge_core::{AtomMeasure, CostSpec, DiscreteMeasure, Grid};

use crate::config::{ExperimentConfig, Sampling};
use crate::error::{Error, Result};
use crate::formats::load_measure;

/// Name of the fixture that reads measures from files.
pub const FILES: &str = "files";
/// Shift of the gaussian-pair target along the first axis, in units of the
/// first standard deviation.
pub const PAIR_SHIFT: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// Whether the instance changes with the configured dimension.
    pub uses_dim: bool,
}

pub fn catalog() -> [FixtureInfo; 4] {
    [
        FixtureInfo {
            name: "book-shift",
            description: "uniform {0,1,2,3} to uniform {1,2,3,4} on the line; degenerate for the distance cost",
            uses_dim: false,
        },
        FixtureInfo {
            name: "gaussian-pair",
            description: "N(0, C) against N(1.25 sqrt(c1) e1, C), discretized on a grid or sampled",
            uses_dim: true,
        },
        FixtureInfo {
            name: "split-witness",
            description: "one source atom split evenly between two targets",
            uses_dim: false,
        },
        FixtureInfo { name: "identity", description: "a sampled Gaussian measure against itself", uses_dim: true },
    ]
}

pub fn info(name: &str) -> Option<FixtureInfo> {
    catalog().into_iter().find(|f| f.name == name)
}

/// A transport instance with the Gaussian it lives under.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub dim: usize,
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    /// Fixed plan for fixtures that come with one.
    pub plan: Option<TransportPlan>,
    pub gaussian: TruncatedGaussian,
    /// Selected plans must be induced by maps.
    pub expect_graph: bool,
    /// The fixture plan must be detected as split.
    pub expect_split: bool,
}

fn line(xs: &[f64]) -> AtomMeasure {
    AtomMeasure::uniform(xs.iter().map(|x| vec![*x]).collect()).expect("valid line measure")
}

pub fn build(cfg: &ExperimentConfig, name: &str, dim: usize, seed: u64) -> Result<Instance> {
    let spec = cfg.covariance.build().map_err(|e| Error::ConfigError(e.to_string()))?;
    let gaussian_of = |d: usize| TruncatedGaussian::new(spec.clone(), d);
    let m = &cfg.measures;
    let instance = match name {
        "book-shift" => Instance {
            name: name.into(),
            dim: 1,
            source: line(&[0.0, 1.0, 2.0, 3.0]).into(),
            target: line(&[1.0, 2.0, 3.0, 4.0]).into(),
            plan: None,
            gaussian: gaussian_of(1)?,
            expect_graph: true,
            expect_split: false,
        },
        "split-witness" => {
            let source = AtomMeasure::new(vec![vec![0.0]], vec![1.0])?;
            let target = line(&[-1.0, 1.0]);
            let entries =
                vec![PlanEntry { source: 0, target: 0, mass: 0.5 }, PlanEntry { source: 0, target: 1, mass: 0.5 }];
            let plan = TransportPlan::new(source.clone(), target.clone(), entries, CostSpec::Distance)?;
            Instance {
                name: name.into(),
                dim: 1,
                source: source.into(),
                target: target.into(),
                plan: Some(plan),
                gaussian: gaussian_of(1)?,
                expect_graph: false,
                expect_split: true,
            }
        }
        "gaussian-pair" => {
            let g = gaussian_of(dim)?;
            let (source, target) = match m.sampling {
                Sampling::Grid => gaussian_pair_grid(&g, m.cells, m.half_width, m.max_atoms)?,
                Sampling::Empirical => gaussian_pair_empirical(&g, m.atoms, seed)?,
            };
            Instance {
                name: name.into(),
                dim,
                source,
                target,
                plan: None,
                gaussian: g,
                expect_graph: m.sampling == Sampling::Empirical,
                expect_split: false,
            }
        }
        "identity" => {
            let g = gaussian_of(dim)?;
            let a = AtomMeasure::uniform(g.sample(m.atoms, seed)?)?;
            Instance {
                name: name.into(),
                dim,
                source: a.clone().into(),
                target: a.into(),
                plan: None,
                gaussian: g,
                expect_graph: true,
                expect_split: false,
            }
        }
        FILES => {
            let files = m.files.as_ref().ok_or_else(|| Error::ConfigError("no measure files given".into()))?;
            let source = load_measure(&files.source)?;
            let target = load_measure(&files.target)?;
            let dim = source.dim();
            Instance {
                name: name.into(),
                dim,
                source,
                target,
                plan: None,
                gaussian: gaussian_of(dim.min(spec.dim_max()))?,
                expect_graph: false,
                expect_split: false,
            }
        }
        other => return Err(Error::ConfigError(format!("unknown fixture {other:?}"))),
    };
    Ok(instance)
}

/// The grid both halves of the gaussian-pair live on.
pub fn pair_grid(g: &TruncatedGaussian, cells: usize, half_width: f64) -> Result<Grid> {
    Ok(g.symmetric_grid(cells, half_width)?)
}

fn pair_shift(g: &TruncatedGaussian) -> Vec<f64> {
    let mut mean = vec![0.0; g.dim()];
    mean[0] = PAIR_SHIFT * g.std_devs()[0];
    mean
}

/// Cell masses of `N(0, C)` and of its shifted copy on a common grid.
pub fn gaussian_pair_grid(
    g: &TruncatedGaussian,
    cells: usize,
    half_width: f64,
    max_atoms: usize,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let grid = pair_grid(g, cells, half_width)?;
    let source = g.discretize_on(&grid, None, max_atoms)?;
    let target = g.discretize_on(&grid, Some(&pair_shift(g)), max_atoms)?;
    Ok((source.into(), target.into()))
}

/// `atoms` samples of each, uniform weights; the target draws from the
/// seed's second stream.
pub fn gaussian_pair_empirical(
    g: &TruncatedGaussian,
    atoms: usize,
    seed: u64,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let shift = pair_shift(g);
    let source = AtomMeasure::uniform(g.sample(atoms, seed)?)?;
    let target_points = g
        .sample(atoms, seed ^ 0x9e37_79b9_7f4a_7c15)?
        .into_iter()
        .map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect())
        .collect();
    let target = AtomMeasure::uniform(target_points)?;
    Ok((source.into(), target.into()))
}
