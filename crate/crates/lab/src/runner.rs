//! Suites and the cell scheduler.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use monge_core::entropy::{check_convexity, ConvexityMode, ConvexityReport, DECOMPOSITION_TOL, MIN_SLACK};
use monge_core::gaussian::TruncatedGaussian;
use monge_core::interpolation::{geodesic_check, InterpolationPath, GEODESIC_TOL};
use monge_core::selection::{select, two_stage_oracle, CERTIFICATE_TOL, STABILITY_TOL};
use monge_core::support::{
    check_cyclical_monotonicity, check_hsupopt, check_potential, gamma_inverse_query, graphness,
    lebesgue_ratio_estimate, RatioPoint, RatioSurrogate, SupportSet, HSUPOPT_TOL, POTENTIAL_EQ_TOL,
};
use monge_core::transport::{optimal_face_dimension, solve_exact, TransportPlan, FACE_MAX_ATOMS};
use monge_core::CostSpec;

use crate::config::{ExperimentConfig, Suite};
use crate::error::{io_err, Error, Result};
use crate::fixtures::{self, Instance};
use crate::formats::{plan_rows, write_csv, write_report, Header, PlanFile};

/// Pairs `(t, s)` of the geodesic check.
pub const GEODESIC_PAIRS: [(f64, f64); 4] = [(0.0, 1.0), (0.0, 0.5), (0.5, 1.0), (0.25, 0.75)];
/// Sources closer than this count as one point in the graph-ness check.
pub const MERGE_TOL: f64 = 1e-12;
/// Ratio radii at or below this are held to the half-space check.
pub const HALF_SPACE_DELTA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub suite: Suite,
    pub fixture: String,
    pub dim: usize,
    pub seed: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub passed: bool,
    pub cells: Vec<CellOutcome>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    header: Header,
    stem: String,
    checks: Vec<Check>,
    files: Vec<String>,
    skipped: Option<String>,
}

impl Cell<'_> {
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check { name: name.into(), passed: value <= limit, value, limit });
    }

    fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check { name: name.into(), passed: value >= limit, value, limit });
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.checks.push(Check { name: name.into(), passed: ok, value: ok as u8 as f64, limit: 1.0 });
    }

    fn report(&mut self, payload: &Value) -> Result<()> {
        let name = format!("{}.json", self.stem);
        write_report(&self.dir.join(&name), &self.header, payload)?;
        self.files.push(name);
        Ok(())
    }

    fn csv(&mut self, suffix: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let name = format!("{}_{suffix}.csv", self.stem);
        write_csv(&self.dir.join(&name), &self.header, columns, rows)?;
        self.files.push(name);
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Task {
    suite: Suite,
    fixture: String,
    dim: usize,
    seed: u64,
}

fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let fixture = cfg.measures.fixture.clone();
    let uses_dim = fixtures::info(&fixture).is_some_and(|f| f.uses_dim);
    let mut dims = cfg.dims.clone();
    dims.dedup();
    let mut out = Vec::new();
    for &suite in &cfg.suites {
        // Entropy always runs on the gaussian pair; other fixed fixtures
        // have one dimension of their own.
        let suite_dims = if suite == Suite::Entropy || uses_dim {
            dims.clone()
        } else if fixture == fixtures::FILES {
            vec![0]
        } else {
            vec![1]
        };
        let name = if suite == Suite::Entropy { "gaussian-pair".to_string() } else { fixture.clone() };
        for &dim in &suite_dims {
            for &seed in &cfg.seeds {
                out.push(Task { suite, fixture: name.clone(), dim, seed });
            }
        }
    }
    out
}

/// The recorded configuration: everything but where and how wide it ran.
pub fn config_echo(cfg: &ExperimentConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(map) = &mut v {
        map.remove("output_dir");
        map.remove("workers");
    }
    v
}

/// Runs every (suite, dim, seed) cell and writes all artifacts. Cell failures
/// are collected; only configuration and output-directory problems abort.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let hash = cfg.hash();
    let first_seed = cfg.seeds[0];
    write_report(&dir.join("config.json"), &Header::new(&hash, first_seed), &config_echo(cfg))?;
    let tasks = tasks(cfg);
    if tasks.is_empty() {
        return Ok(RunSummary { config_hash: hash, passed: true, cells: Vec::new() });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::ConfigError(format!("worker pool: {e}")))?;
    let cells: Vec<CellOutcome> = pool.install(|| tasks.par_iter().map(|t| run_cell(cfg, dir, &hash, t)).collect());
    let summary = RunSummary { config_hash: hash.clone(), passed: cells.iter().all(|c| c.passed), cells };
    write_report(&dir.join("summary.json"), &Header::new(&hash, first_seed), &summary)?;
    Ok(summary)
}

fn run_cell(cfg: &ExperimentConfig, dir: &Path, hash: &str, task: &Task) -> CellOutcome {
    let mut cell = Cell {
        cfg,
        dir,
        header: Header::new(hash, task.seed),
        stem: format!("{}_{}_d{}_s{}", task.suite.name(), task.fixture, task.dim, task.seed),
        checks: Vec::new(),
        files: Vec::new(),
        skipped: None,
    };
    let result = match task.suite {
        Suite::Entropy => entropy_suite(&mut cell, task.dim),
        suite => fixtures::build(cfg, &task.fixture, task.dim.max(1), task.seed).and_then(|inst| match suite {
            Suite::Selection => selection_suite(&mut cell, &inst),
            Suite::Diagnostics => diagnostics_suite(&mut cell, &inst),
            _ => ratio_suite(&mut cell, &inst, task.seed),
        }),
    };
    let error = result.err().map(|e| e.to_string());
    CellOutcome {
        suite: task.suite,
        fixture: task.fixture.clone(),
        dim: task.dim,
        seed: task.seed,
        passed: error.is_none() && cell.checks.iter().all(|c| c.passed),
        skipped: cell.skipped,
        error,
        checks: cell.checks,
        files: cell.files,
    }
}

fn too_large(cell: &Cell, inst: &Instance) -> bool {
    let cap = cell.cfg.measures.max_atoms;
    inst.source.to_atoms().len() > cap || inst.target.to_atoms().len() > cap
}

fn selection_suite(cell: &mut Cell, inst: &Instance) -> Result<()> {
    if too_large(cell, inst) {
        cell.skipped = Some("instance exceeds max_atoms".into());
        return Ok(());
    }
    let cfg = cell.cfg;
    let (ladder, oracle, cert) = select(&inst.source, &inst.target, &cfg.epsilons, cfg.face_tol)?;
    let (dw, da) = ladder.monotonicity_violation();
    let scale = 1f64.max(oracle.w1_opt).max(oracle.alpha_opt);
    cell.at_most("w1_gap", cert.gaps[0].abs(), CERTIFICATE_TOL);
    cell.at_most("alpha_gap", cert.gaps[1].abs(), CERTIFICATE_TOL);
    cell.at_most("w1_monotone", dw, 1e-12 * scale);
    cell.at_most("alpha_monotone", da, 1e-12 * scale);
    let (a, b) = (inst.source.to_atoms(), inst.target.to_atoms());
    let face = if a.len() <= FACE_MAX_ATOMS && b.len() <= FACE_MAX_ATOMS {
        let f = optimal_face_dimension(&inst.source, &inst.target, &CostSpec::Distance, cfg.face_tol)?;
        Some(json!({"dimension": f.dimension, "tight_pairs": f.tight_pairs, "usable_pairs": f.usable_pairs}))
    } else {
        None
    };
    let limit = ladder.plans.last().expect("nonempty ladder");
    cell.csv("plan", &["source", "target", "mass"], &plan_rows(limit))?;
    let payload = json!({
        "fixture": inst.name,
        "dim": inst.dim,
        "epsilons": ladder.epsilons,
        "w1_values": ladder.w1_values,
        "alpha_values": ladder.alpha_values,
        "monotonicity_violation": [dw, da],
        "certificate": {
            "stabilized": cert.stabilized,
            "w1_limit": cert.w1_limit,
            "alpha_limit": cert.alpha_limit,
            "w1_opt": cert.w1_opt,
            "alpha_opt": cert.alpha_opt,
            "gaps": cert.gaps,
            "same_plan": cert.same_plan,
            "tol": cert.tol,
            "passed": cert.passed(),
        },
        "optimal_face": face,
        "limit_plan": PlanFile::from_plan(limit, None),
        "two_stage_plan": PlanFile::from_plan(&oracle.plan, Some(&oracle.stage_one.potential)),
        "checks": cell.checks,
    });
    cell.report(&payload)
}

fn mode_name(mode: ConvexityMode) -> &'static str {
    match mode {
        ConvexityMode::W1 => "w1",
        ConvexityMode::CEpsilon(_) => "c_epsilon",
    }
}

fn entropy_suite(cell: &mut Cell, dim: usize) -> Result<()> {
    let cfg = cell.cfg;
    let spec = cfg.covariance.build()?;
    let g = TruncatedGaussian::new(spec, dim)?;
    let finest = cfg.measures.cells;
    if finest.checked_pow(dim as u32).map_or(true, |n| n > cfg.measures.max_atoms) {
        cell.skipped = Some(format!("{finest}^{dim} cells exceed max_atoms"));
        return Ok(());
    }
    let eps = cfg.convexity_epsilon;
    let modes = [ConvexityMode::W1, ConvexityMode::CEpsilon(eps)];
    let levels: Vec<usize> = if finest / 2 >= 2 { vec![finest / 2, finest] } else { vec![finest] };
    let mut per_level: Vec<Vec<ConvexityReport>> = Vec::new();
    let mut level_json = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut self_entropy: f64 = 0.0;
    for &cells in &levels {
        let (src, tgt) = fixtures::gaussian_pair_grid(&g, cells, cfg.measures.half_width, cfg.measures.max_atoms)?;
        let grid = fixtures::pair_grid(&g, cells, cfg.measures.half_width)?;
        let selected = two_stage_oracle(&src, &tgt, cfg.face_tol)?.plan;
        let perturbed = solve_exact(&src, &tgt, &CostSpec::c_epsilon(eps)?)?.plan;
        let mut reports = Vec::new();
        let mut modes_json = Vec::new();
        for (mode, plan) in modes.iter().zip([&selected, &perturbed]) {
            let path = InterpolationPath::new(plan, &cfg.ts)?.with_entropy(&g, &grid)?;
            for r in &path.readings {
                worst_residual = worst_residual.max(r.decomposition_residual().abs());
            }
            self_entropy = self_entropy.max(path.readings[0].ent_gamma.abs());
            let report = check_convexity(&path, *mode, 0.0)?;
            modes_json.push(json!({
                "mode": mode_name(*mode),
                "w_value": report.w_value,
                "clamped": report.clamped,
                "min_margin": report.min_margin(),
                "rows": report.rows.iter().map(|r| json!({"t": r.t, "ent_gamma": r.ent_gamma, "bound": r.bound, "margin": r.margin})).collect::<Vec<_>>(),
                "readings": path.ts.iter().zip(&path.readings).map(|(t, r)| json!({
                    "t": t,
                    "ent_gamma": r.ent_gamma,
                    "ent_lebesgue": r.ent_lebesgue,
                    "v": r.second_moment_half,
                    "v_midpoint": r.second_moment_half_midpoint,
                })).collect::<Vec<_>>(),
            }));
            if cells == finest {
                let rows: Vec<Vec<f64>> = path
                    .ts
                    .iter()
                    .zip(&path.readings)
                    .map(|(&t, r)| {
                        let row = report.rows.iter().find(|row| row.t == t);
                        vec![
                            t,
                            r.ent_gamma,
                            r.ent_lebesgue,
                            r.second_moment_half,
                            row.map_or(f64::NAN, |x| x.bound),
                            row.map_or(f64::NAN, |x| x.margin),
                        ]
                    })
                    .collect();
                cell.csv(mode_name(*mode), &["t", "ent_gamma", "ent_lebesgue", "v", "bound", "margin"], &rows)?;
            }
            reports.push(report);
        }
        level_json.push(json!({"cells": cells, "modes": modes_json}));
        per_level.push(reports);
    }
    cell.at_most("decomposition_residual", worst_residual, DECOMPOSITION_TOL);
    cell.at_most("gaussian_self_entropy", self_entropy, 1e-12);
    let mut slack_json = Vec::new();
    for (k, mode) in modes.iter().enumerate() {
        let fine = per_level.last().expect("one level")[k].min_margin();
        let coarse = per_level.first().expect("one level")[k].min_margin();
        let delta = (fine - coarse).abs();
        let slack = delta.max(MIN_SLACK);
        cell.at_least(&format!("{}_margin", mode_name(*mode)), fine, -slack);
        if levels.len() > 1 {
            cell.at_least(&format!("{}_refinement", mode_name(*mode)), fine, coarse);
        }
        slack_json
            .push(json!({"mode": mode_name(*mode), "refinement_delta": delta, "slack": slack, "min_margin": fine}));
    }
    let payload = json!({
        "dim": dim,
        "epsilon": eps,
        "half_width": cfg.measures.half_width,
        "shift": fixtures::PAIR_SHIFT,
        "levels": level_json,
        "slack": slack_json,
        "checks": cell.checks,
    });
    cell.report(&payload)
}

/// The two-stage plan, the exact small-epsilon selection; the second value
/// says whether a stabilized ladder reached the same plan.
fn selected_plan(cfg: &ExperimentConfig, inst: &Instance) -> Result<(TransportPlan, Option<bool>)> {
    if let Some(p) = &inst.plan {
        return Ok((p.clone(), None));
    }
    let (ladder, oracle, _) = select(&inst.source, &inst.target, &cfg.epsilons, cfg.face_tol)?;
    let agrees = ladder.limit().map(|p| p.same_as(&oracle.plan, STABILITY_TOL));
    Ok((oracle.plan, agrees))
}

fn diagnostics_suite(cell: &mut Cell, inst: &Instance) -> Result<()> {
    if too_large(cell, inst) {
        cell.skipped = Some("instance exceeds max_atoms".into());
        return Ok(());
    }
    let cfg = cell.cfg;
    let stage_one = solve_exact(&inst.source, &inst.target, &CostSpec::Distance)?;
    let support = SupportSet::from_plan(&stage_one.plan);
    let cycles2 = check_cyclical_monotonicity(&support, &CostSpec::Distance, 2, None)?;
    let cycles3 = check_cyclical_monotonicity(&support, &CostSpec::Distance, 3, None)?;
    let potential = check_potential(&support, &stage_one.potential, POTENTIAL_EQ_TOL)?;
    cell.at_most("cycles_2", cycles2.worst_violation, cycles2.tol);
    cell.at_most("cycles_3", cycles3.worst_violation, cycles3.tol);
    cell.at_most("potential_equality", potential.worst_equality_gap, potential.tol);
    cell.at_most("potential_lipschitz", potential.worst_lipschitz_excess, potential.lipschitz_tol);
    let path = InterpolationPath::new(&stage_one.plan, &[0.25, 0.5, 0.75])?;
    let geodesic = geodesic_check(&path, &GEODESIC_PAIRS, GEODESIC_TOL)?;
    cell.flag("geodesic", geodesic.passed);

    let (selected, ladder_agrees) = selected_plan(cfg, inst)?;
    let sel = SupportSet::from_plan(&selected);
    let hsup = check_hsupopt(&sel, HSUPOPT_TOL);
    cell.flag("hsupopt", hsup.passed);
    let graph = graphness(&sel, MERGE_TOL);
    if inst.expect_graph {
        cell.at_most("split_sources", graph.split_sources as f64, 0.0);
    }
    if inst.expect_split {
        cell.at_least("split_detected", graph.split_sources as f64, 1.0);
    }
    let query = sel.pairs.first().map(|p| gamma_inverse_query(&sel, &p.y, cfg.ratio.radius));
    cell.csv("plan", &["source", "target", "mass"], &plan_rows(&selected))?;
    let payload = json!({
        "fixture": inst.name,
        "dim": inst.dim,
        "stage_one": {
            "value": stage_one.primal_value,
            "cycles": [
                {"max_cycle": 2, "exhaustive": cycles2.exhaustive, "checked": cycles2.cycles_checked, "worst": cycles2.worst_violation, "witness": cycles2.worst_cycle, "tol": cycles2.tol},
                {"max_cycle": 3, "exhaustive": cycles3.exhaustive, "checked": cycles3.cycles_checked, "worst": cycles3.worst_violation, "witness": cycles3.worst_cycle, "tol": cycles3.tol},
            ],
            "potential": {
                "worst_equality_gap": potential.worst_equality_gap,
                "worst_pair": potential.worst_pair,
                "worst_lipschitz_excess": potential.worst_lipschitz_excess,
                "lipschitz_witness": potential.lipschitz_witness,
            },
            "geodesic": geodesic.rows.iter().map(|r| json!({"t": r.t, "s": r.s, "w1": r.w1, "expected": r.expected})).collect::<Vec<_>>(),
        },
        "selected": {
            "by": if inst.plan.is_some() { "fixture" } else { "two_stage" },
            "ladder_agrees": ladder_agrees,
            "plan": PlanFile::from_plan(&selected, None),
            "hsupopt": {
                "premises": hsup.premises,
                "trivial_premises": hsup.trivial_premises,
                "vacuous": hsup.vacuous,
                "min_value": hsup.min_value,
                "witness": hsup.witness,
                "violations": hsup.violations,
                "tol": hsup.tol,
            },
            "graphness": {
                "split_sources": graph.split_sources,
                "max_target_spread": graph.max_target_spread,
                "witness": graph.witness,
                "splitting_inner": graph.splitting_inner,
                "gradient_gap": graph.gradient_gap,
            },
            "gamma_inverse": query.map(|q| json!({"radius": cfg.ratio.radius, "sources": q})),
        },
        "checks": cell.checks,
    });
    cell.report(&payload)
}

fn curve_json(points: &[RatioPoint]) -> Value {
    json!(points
        .iter()
        .map(|p| json!({"delta": p.delta, "ratio": p.ratio, "stderr": p.stderr, "accepted": p.accepted, "proposals": p.proposals}))
        .collect::<Vec<_>>())
}

fn ratio_suite(cell: &mut Cell, inst: &Instance, seed: u64) -> Result<()> {
    if too_large(cell, inst) {
        cell.skipped = Some("instance exceeds max_atoms".into());
        return Ok(());
    }
    let cfg = cell.cfg;
    let (selected, _) = selected_plan(cfg, inst)?;
    let sel = SupportSet::from_plan(&selected);
    // Anchor at the most central source along e1, where the Gaussian tilt
    // across the ball vanishes to first order.
    let c1 = inst.gaussian.variances()[0];
    let pair = sel
        .pairs
        .iter()
        .min_by(|a, b| (a.x[0].abs() / c1).total_cmp(&(b.x[0].abs() / c1)))
        .ok_or_else(|| Error::ConfigError("empty support".into()))?;
    let (x, y) = (pair.x.clone(), pair.y.clone());
    let mut normal = vec![0.0; inst.dim];
    normal[0] = 1.0;
    let surrogates = [
        ("full", RatioSurrogate::Full),
        ("half_space", RatioSurrogate::HalfSpace { normal }),
        ("nearest_source", RatioSurrogate::NearestSource),
    ];
    let r = cfg.ratio.radius;
    let mut curves = serde_json::Map::new();
    for (name, sur) in &surrogates {
        let curve = lebesgue_ratio_estimate(
            &sel,
            &inst.gaussian,
            &x,
            &y,
            r,
            &cfg.ratio.deltas,
            cfg.ratio.mc_samples,
            seed,
            sur,
        )?;
        cell.flag(&format!("{name}_in_unit_interval"), curve.iter().all(|p| (0.0..=1.0).contains(&p.ratio)));
        match *name {
            "full" => cell.flag("full_is_one", curve.iter().all(|p| p.ratio == 1.0)),
            "half_space" => {
                for p in curve.iter().filter(|p| p.delta <= HALF_SPACE_DELTA) {
                    cell.at_most(&format!("half_space_delta_{}", p.delta), (p.ratio - 0.5).abs(), 3.0 * p.stderr);
                }
            }
            _ => {}
        }
        let rows: Vec<Vec<f64>> = curve.iter().map(|p| vec![p.delta, p.ratio, p.stderr]).collect();
        cell.csv(name, &["delta", "ratio", "stderr"], &rows)?;
        curves.insert((*name).into(), curve_json(&curve));
    }
    let payload = json!({
        "fixture": inst.name,
        "dim": inst.dim,
        "x": x,
        "y": y,
        "radius": r,
        "mc_samples": cfg.ratio.mc_samples,
        "anchor_rule": "support source minimizing |x_1|",
        "surrogate_rule": "nearest support source decides membership",
        "curves": curves,
        "checks": cell.checks,
    });
    cell.report(&payload)
}
