//! On-disk formats. Every JSON report is `{"header": .., "payload": ..}`;
//! CSV tables start with one `#` header line. Only the header carries the
//! timestamp.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use monge_core::gaussian::CovarianceSpec;
use monge_core::transport::{KantorovichPotential, PlanEntry, TransportPlan};
use monge_core::{AtomMeasure, CostSpec, DiscreteMeasure, Grid, GridMeasure};

use crate::error::{io_err, Error, Result};

pub const SCHEMA: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub generated_at: String,
}

impl Header {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { schema: SCHEMA.into(), config_hash: config_hash.into(), seed, generated_at: format!("unix:{secs}") }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub header: Header,
    pub payload: T,
}

pub fn write_report<T: Serialize>(path: &Path, header: &Header, payload: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(&Report { header: header.clone(), payload })
        .map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
    fs::write(path, body + "\n").map_err(io_err(path))
}

pub fn read_report<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Report<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
}

/// Writes a CSV table after a `# schema=.. config_hash=.. seed=.. generated_at=..` line.
pub fn write_csv(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(
        out,
        "# schema={} config_hash={} seed={} generated_at={}",
        header.schema, header.config_hash, header.seed, header.generated_at
    )
    .expect("write to memory");
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let fail = |e: csv::Error| Error::Format { path: path.into(), message: e.to_string() };
        w.write_record(columns).map_err(fail)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(fail)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Reads a CSV table written by [`write_csv`], skipping the header line.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let fail = |message: String| Error::Format { path: path.into(), message };
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| fail(e.to_string()))?;
    let columns = r.headers().map_err(|e| fail(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        rows.push(rec.iter().map(|v| v.parse::<f64>().map_err(|e| fail(e.to_string()))).collect::<Result<_>>()?);
    }
    Ok((columns, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceFile {
    pub c: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEntry {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    /// Cell edges per axis.
    pub axes: Vec<Vec<f64>>,
    /// Row-major cell masses, first axis slowest.
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureForm {
    Atoms,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub schema: String,
    pub form: MeasureForm,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MeasureFile {
    pub fn from_measure(m: &DiscreteMeasure, covariance: Option<&CovarianceSpec>, seed: Option<u64>) -> Self {
        let covariance = covariance.map(|c| CovarianceFile { c: c.variances().to_vec(), alpha: c.alpha_decay() });
        match m {
            DiscreteMeasure::Atoms(a) => Self {
                schema: SCHEMA.into(),
                form: MeasureForm::Atoms,
                dim: a.dim(),
                atoms: Some(
                    a.points().iter().zip(a.masses()).map(|(p, w)| AtomEntry { point: p.clone(), mass: *w }).collect(),
                ),
                grid: None,
                covariance,
                seed,
            },
            DiscreteMeasure::Grid(g) => Self {
                schema: SCHEMA.into(),
                form: MeasureForm::Grid,
                dim: g.dim(),
                atoms: None,
                grid: Some(GridFile { axes: g.grid().axes().to_vec(), masses: g.masses().to_vec() }),
                covariance,
                seed,
            },
        }
    }

    pub fn to_measure(&self) -> std::result::Result<DiscreteMeasure, String> {
        if self.schema != SCHEMA {
            return Err(format!("unsupported schema {:?}", self.schema));
        }
        let m: DiscreteMeasure = match self.form {
            MeasureForm::Atoms => {
                let atoms = self.atoms.as_ref().ok_or("atoms form without atoms")?;
                let (points, masses) = atoms.iter().map(|a| (a.point.clone(), a.mass)).unzip();
                AtomMeasure::new(points, masses).map_err(|e| e.to_string())?.into()
            }
            MeasureForm::Grid => {
                let g = self.grid.as_ref().ok_or("grid form without grid")?;
                let grid = Grid::new(g.axes.clone()).map_err(|e| e.to_string())?;
                GridMeasure::new(grid, g.masses.clone()).map_err(|e| e.to_string())?.into()
            }
        };
        if m.dim() != self.dim {
            return Err(format!("declared dimension {} but data has {}", self.dim, m.dim()));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
        fs::write(path, body + "\n").map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
    }
}

/// Reads a measure file into a measure.
pub fn load_measure(path: &Path) -> Result<DiscreteMeasure> {
    MeasureFile::read(path)?.to_measure().map_err(|message| Error::Format { path: PathBuf::from(path), message })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFile {
    pub u_source: Vec<f64>,
    pub u_target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema: String,
    pub cost_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub value: f64,
    /// `[source, target, mass]`
    pub entries: Vec<(usize, usize, f64)>,
    pub source: Vec<AtomEntry>,
    pub target: Vec<AtomEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialFile>,
}

fn atom_entries(a: &AtomMeasure) -> Vec<AtomEntry> {
    a.points().iter().zip(a.masses()).map(|(p, w)| AtomEntry { point: p.clone(), mass: *w }).collect()
}

impl PlanFile {
    pub fn from_plan(plan: &TransportPlan, potential: Option<&KantorovichPotential>) -> Self {
        Self {
            schema: SCHEMA.into(),
            cost_kind: plan.cost().kind_name().into(),
            epsilon: plan.cost().epsilon(),
            value: plan.cost_value(),
            entries: plan.entries().iter().map(|e| (e.source, e.target, e.mass)).collect(),
            source: atom_entries(plan.source()),
            target: atom_entries(plan.target()),
            potential: potential.map(|u| PotentialFile { u_source: u.u_source.clone(), u_target: u.u_target.clone() }),
        }
    }

    pub fn to_plan(&self) -> std::result::Result<(TransportPlan, Option<KantorovichPotential>), String> {
        let cost = match (self.cost_kind.as_str(), self.epsilon) {
            ("distance", _) => CostSpec::Distance,
            ("alpha", _) => CostSpec::Alpha,
            ("c_epsilon", Some(e)) => CostSpec::c_epsilon(e).map_err(|e| e.to_string())?,
            ("beta_restricted", _) => CostSpec::beta_restricted(),
            (other, _) => return Err(format!("unknown cost kind {other:?}")),
        };
        let measure = |atoms: &[AtomEntry]| {
            let (points, masses) = atoms.iter().map(|a| (a.point.clone(), a.mass)).unzip();
            AtomMeasure::new(points, masses).map_err(|e| e.to_string())
        };
        let entries = self.entries.iter().map(|&(source, target, mass)| PlanEntry { source, target, mass }).collect();
        let plan = TransportPlan::new(measure(&self.source)?, measure(&self.target)?, entries, cost)
            .map_err(|e| e.to_string())?;
        let potential = self
            .potential
            .as_ref()
            .map(|p| KantorovichPotential { u_source: p.u_source.clone(), u_target: p.u_target.clone() });
        Ok((plan, potential))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format { path: path.into(), message: e.to_string() })?;
        fs::write(path, body + "\n").map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
    }
}

/// Plan entries as CSV rows `source, target, mass`.
pub fn plan_rows(plan: &TransportPlan) -> Vec<Vec<f64>> {
    plan.entries().iter().map(|e| vec![e.source as f64, e.target as f64, e.mass]).collect()
}
