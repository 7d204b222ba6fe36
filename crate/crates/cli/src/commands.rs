//! One function per subcommand. Each returns its tables or JSON documents
//! and leaves writing to the caller.

use crate::config::ExperimentConfig;
use crate::output::{num, Table};
use crate::study::{cell_rng, Study};
use crate::CliError;
use noisyctl_core::consistency::{build, ellipse_polyline};
use noisyctl_core::datagen::example1_dataset;
use noisyctl_core::overapprox::{compute_overapprox, OverapproxResult, OverapproxSettings};
use noisyctl_core::sdp::SolveStatus;
use noisyctl_core::synthesis::{design, Approach, SynthesisResult, SynthesisSettings};
use noisyctl_core::{ConsistencySets, DataSet, Exact};
use rayon::prelude::*;
use std::time::Instant;

pub const EXAMPLE1_COLUMNS: [&str; 7] = ["T", "aa", "ab", "bb", "a", "b", "c"];

/// Exact aggregate inequalities of the example data in coordinates centred
/// at `(1/2, 1/2)`, and the boundaries of the bounded sets.
pub fn example1(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let mut coeffs = Table::new("example1_coefficients.csv", &EXAMPLE1_COLUMNS);
    let mut bounds = Table::new("example1_boundaries.csv", &["T", "a", "b"]);
    let half = Exact::new(1, 2);
    for t in 1..=3 {
        let cs = build(&example1_dataset::<Exact>(t)?);
        let q = cs.shifted_conic(half, half)?;
        coeffs.push([q.aa, q.ab, q.bb, q.a, q.b, q.c].iter().fold(vec![t.to_string()], |mut r, v| {
            r.push(v.to_string());
            r
        }));
        let csf = build(&example1_dataset::<f64>(t)?);
        if csf.is_bounded(noisyctl_core::consistency::BOUNDED_REL_TOL) {
            for (a, b) in csf.boundary_polyline(cfg.polyline_points)? {
                bounds.push(vec![t.to_string(), num(a), num(b)]);
            }
        }
    }
    Ok(vec![coeffs, bounds])
}

fn solver_failure(what: &str, status: SolveStatus) -> CliError {
    CliError::SolverFailure(format!("{what}: {}", noisyctl_core::synthesis::status_name(status)))
}

fn overapprox_of(cs: &ConsistencySets, cfg: &ExperimentConfig) -> Result<OverapproxResult, CliError> {
    let r = compute_overapprox(cs, &OverapproxSettings { solver: cfg.solver(), delta: None })?;
    if !r.is_solved() {
        return Err(solver_failure(&format!("over-approximation at T={}", cs.data.len()), r.status));
    }
    Ok(r)
}

/// Prefixes of one trajectory, one per horizon, for the first bound.
fn prefix_data(cfg: &ExperimentConfig) -> Result<Vec<DataSet>, CliError> {
    let study = Study::from_config(cfg)?;
    let longest = *cfg.horizons.iter().max().expect("validated grid");
    let full = study.generate(cfg.epsilons[0], longest, &mut cell_rng(cfg.seed, 0, 0, 0))?;
    cfg.horizons.iter().map(|&t| Ok(full.prefix(t)?)).collect()
}

/// Aggregate and over-approximated boundaries plus a per-sample membership
/// map for a scalar study, one block per horizon.
pub fn ellipse_sweep(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let sys = cfg.system()?;
    if sys.n() != 1 || sys.m() != 1 {
        return Err(CliError::Config(crate::config::ConfigError::Invalid("ellipse-sweep needs a scalar system".into())));
    }
    let sets: Vec<ConsistencySets> = prefix_data(cfg)?.iter().map(build).collect();
    let per_t = sets
        .par_iter()
        .map(|cs| {
            let c = cs.boundary_polyline(cfg.polyline_points)?;
            let ibar = overapprox_of(cs, cfg)?.ellipsoid()?.to_center()?;
            Ok((c, ellipse_polyline(&ibar, cfg.polyline_points)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut bounds = Table::new("sweep_boundaries.csv", &["T", "set", "a", "b"]);
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    let lines: Vec<[Vec<(f64, f64)>; 2]> = per_t.into_iter().map(|(c, ibar)| [c, ibar]).collect();
    for (cs, [c, ibar]) in sets.iter().zip(&lines) {
        let t = cs.data.len().to_string();
        for (name, line) in [("C", c), ("Ibar", ibar)] {
            for &(a, b) in line {
                lo = (lo.0.min(a), lo.1.min(b));
                hi = (hi.0.max(a), hi.1.max(b));
                bounds.push(vec![t.clone(), name.into(), num(a), num(b)]);
            }
        }
    }
    let pad = |l: f64, h: f64| (l - 0.05 * (h - l), h + 0.05 * (h - l));
    let (ra, rb) = (pad(lo.0, hi.0), pad(lo.1, hi.1));
    let grids = sets
        .par_iter()
        .map(|cs| {
            let t = cs.data.len().to_string();
            Ok(cs
                .membership_grid(ra, rb, cfg.grid_steps)?
                .into_iter()
                .map(|g| vec![t.clone(), num(g.a), num(g.b), num(g.slack)])
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut grid = Table::new("sweep_membership.csv", &["T", "a", "b", "slack"]);
    grid.rows = grids.into_iter().flatten().collect();
    let mut drift = Table::new("sweep_drift.csv", &DRIFT_COLUMNS);
    for (k, name) in [(0, "C"), (1, "Ibar")] {
        for w in sets.iter().zip(&lines).collect::<Vec<_>>().windows(2) {
            let (prev, next) = (w[0].1[k].as_slice(), w[1].1[k].as_slice());
            let d = hausdorff(prev, next);
            drift.push(vec![
                w[0].0.data.len().to_string(),
                w[1].0.data.len().to_string(),
                name.into(),
                num(d),
                num(d / diameter(next)),
            ]);
        }
    }
    Ok(vec![bounds, grid, drift])
}

pub const DRIFT_COLUMNS: [&str; 5] = ["T_from", "T_to", "set", "hausdorff", "relative"];

/// Hausdorff distance between two point sets.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let d = |p: &(f64, f64), q: &(f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);
    let one_way = |x: &[(f64, f64)], y: &[(f64, f64)]| {
        x.iter().map(|p| y.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn diameter(a: &[(f64, f64)]) -> f64 {
    a.iter().flat_map(|p| a.iter().map(move |q| (p.0 - q.0).hypot(p.1 - q.1))).fold(0.0, f64::max)
}

pub const SIZE_RATIO_COLUMNS: [&str; 4] = ["T", "size_C", "size_Ibar", "ratio"];

/// Size of the aggregate set against the over-approximated per-sample
/// intersection along one trajectory.
pub fn size_ratio(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let data = prefix_data(cfg)?;
    let rows = data
        .par_iter()
        .map(|ds| {
            let cs = build(ds);
            let size_c = cs.aggregate_ellipsoid()?.size()?;
            let size_ibar = overapprox_of(&cs, cfg)?.size;
            Ok(vec![ds.len().to_string(), num(size_c), num(size_ibar), num(size_c / size_ibar)])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Table::new("size_ratio.csv", &SIZE_RATIO_COLUMNS);
    t.rows = rows;
    Ok(vec![t])
}

pub const TIMING_COLUMNS: [&str; 4] = ["T", "median_seconds_energy", "median_seconds_instantaneous", "repeats"];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Median wall-clock design time per horizon. Runs sequentially.
pub fn timing(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let study = Study::from_config(cfg)?;
    let settings = SynthesisSettings { solver: cfg.solver(), delta: None };
    let mut t = Table::new("timing.csv", &TIMING_COLUMNS);
    for (ti, &horizon) in cfg.horizons.iter().enumerate() {
        let ds = study.generate(cfg.epsilons[0], horizon, &mut cell_rng(cfg.seed, 0, ti, 0))?;
        let mut secs = [Vec::new(), Vec::new()];
        for _ in 0..cfg.repeats {
            for (k, approach) in [Approach::Energy, Approach::Instantaneous].into_iter().enumerate() {
                let clock = Instant::now();
                design(&ds, approach, &settings)?;
                secs[k].push(clock.elapsed().as_secs_f64());
            }
        }
        let [e, i] = secs;
        t.push(vec![horizon.to_string(), num(median(e)), num(median(i)), cfg.repeats.to_string()]);
    }
    Ok(vec![t])
}

pub const HEATMAP_COLUMNS: [&str; 4] = ["epsilon", "T", "approach", "fraction"];

/// Outcome of one heatmap cell: how many of the batch designs solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub epsilon: f64,
    pub t: usize,
    pub approach: Approach,
    pub solved: usize,
    pub batch: usize,
}

impl Cell {
    pub fn fraction(&self) -> f64 {
        self.solved as f64 / self.batch as f64
    }
}

/// Counts solved designs per `(epsilon, T, approach)` over independent
/// datasets. Solver errors count as not solved.
pub fn heatmap_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>, CliError> {
    let study = Study::from_config(cfg)?;
    let settings = SynthesisSettings { solver: cfg.solver(), delta: None };
    let mut jobs = Vec::new();
    for ei in 0..cfg.epsilons.len() {
        for ti in 0..cfg.horizons.len() {
            for bi in 0..cfg.batch {
                jobs.push((ei, ti, bi));
            }
        }
    }
    let outcomes = jobs
        .par_iter()
        .map(|&(ei, ti, bi)| {
            let ds = study.generate(cfg.epsilons[ei], cfg.horizons[ti], &mut cell_rng(cfg.seed, ei, ti, bi))?;
            let ok = |a| design(&ds, a, &settings).is_ok_and(|r| r.is_solved());
            Ok([ok(Approach::Energy), ok(Approach::Instantaneous)])
        })
        .collect::<Result<Vec<[bool; 2]>, CliError>>()?;
    let mut cells = Vec::new();
    for (ei, &epsilon) in cfg.epsilons.iter().enumerate() {
        for (ti, &t) in cfg.horizons.iter().enumerate() {
            for (k, approach) in [Approach::Energy, Approach::Instantaneous].into_iter().enumerate() {
                let base = (ei * cfg.horizons.len() + ti) * cfg.batch;
                let solved = outcomes[base..base + cfg.batch].iter().filter(|o| o[k]).count();
                cells.push(Cell { epsilon, t, approach, solved, batch: cfg.batch });
            }
        }
    }
    Ok(cells)
}

pub fn heatmap(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new("heatmap.csv", &HEATMAP_COLUMNS);
    for c in heatmap_cells(cfg)? {
        t.push(vec![num(c.epsilon), c.t.to_string(), c.approach.name().into(), num(c.fraction())]);
    }
    Ok(vec![t])
}

/// Dataset for the first grid cell of a single-run command.
pub fn first_cell_data(cfg: &ExperimentConfig) -> Result<DataSet, CliError> {
    let study = Study::from_config(cfg)?;
    Ok(study.generate(cfg.epsilons[0], cfg.horizons[0], &mut cell_rng(cfg.seed, 0, 0, 0))?)
}

/// Both designs on the first cell. Fails when a solve neither succeeds nor
/// proves infeasibility.
pub fn design_both(cfg: &ExperimentConfig) -> Result<Vec<SynthesisResult>, CliError> {
    let ds = first_cell_data(cfg)?;
    let settings = SynthesisSettings { solver: cfg.solver(), delta: None };
    let mut out = Vec::new();
    for a in [Approach::Energy, Approach::Instantaneous] {
        let r = design(&ds, a, &settings)?;
        if r.status == SolveStatus::NumericalFailure {
            return Err(solver_failure(&format!("{} design", a.name()), r.status));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn overapprox(cfg: &ExperimentConfig) -> Result<(OverapproxResult, f64), CliError> {
    let cs = build(&first_cell_data(cfg)?);
    let r = overapprox_of(&cs, cfg)?;
    let ratio = noisyctl_core::overapprox::size_ratio(&cs, &r)?;
    Ok((r, ratio))
}
