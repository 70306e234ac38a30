//! Seeded experiment harness: the standard survey setups, the bundled
//! scenarios, single scored runs and repeated-seed table cells.
//!
//! Every repeat is driven by one seed. It fixes the source layout (for the
//! randomized table cells), the Poisson noise of every sweep and the filter's
//! own stream, so a cell is reproducible from its base seed alone.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Clusterer, DEFAULT_MIN_SUPPORT};
use crate::eval::{aggregate_runs, match_sources, AggregateRow, RunSummary};
use crate::filter::{Filter, FilterConfig, UpdateMode, DEFAULT_PARTICLES, DEFAULT_STEPS_PER_ESTIMATE};
use crate::labeler::{Evidence, LabelConfig, LocalizationResult, Localizer, DEFAULT_K, DEFAULT_MAX_ITERATIONS};
use crate::model::SourceParams;
use crate::rng::stream_rng;
use crate::scalar::{dist2, Scalar};
use crate::scenario::{
    lawnmower_trajectory, parse_scenario, trajectory_pitch, Environment, PriorPointSet, Scenario, SweepSource,
    DEFAULT_HEIGHT_CM,
};

/// Edge of the square survey area used by the comparative table (cm).
pub const TABLE_EDGE_CM: f64 = 2000.0;
pub const TABLE_GRID: usize = 10;
pub const TABLE_STRENGTHS: [f64; 2] = [50.0, 150.0];
/// Minimum distance between randomly placed sources (cm).
pub const TABLE_MIN_SEPARATION_CM: f64 = 400.0;
/// Keep random sources this far from the walls (cm).
pub const TABLE_MARGIN_CM: f64 = 100.0;
/// True-positive radius as a fraction of the longest axis.
pub const MATCH_RADIUS_FRACTION: f64 = 0.05;

/// Survey preset used by the comparative table (see [`RunOptions::survey`]).
pub const SURVEY_K: usize = 5;
pub const SURVEY_CONFIDENCE_THRESH: f64 = 0.45;
pub const SURVEY_TIME_STEPS: usize = 5;
/// Fusion range as a multiple of the trajectory pitch.
pub const SURVEY_FUSION_PITCHES: f64 = 1.5;
/// Strength floor for candidates (μCi).
pub const SURVEY_SOURCE_THRESH: f64 = 20.0;

/// Bulk-source preset (see [`RunOptions::bulk`]): largest dipole component
/// (μCi·cm), fusion range (cm), sweeps per estimate, mean-shift bandwidth and
/// confidence threshold.
pub const BULK_DIPOLE_MAX: f64 = 10_000.0;
pub const BULK_FUSION_RANGE_CM: f64 = 250.0;
pub const BULK_TIME_STEPS: usize = 10;
pub const BULK_BANDWIDTH: f64 = 0.15;
pub const BULK_CONFIDENCE_THRESH: f64 = 0.3;

const PLACEMENT_STREAM: u64 = 0x50_1ACE;

/// Bundled scenario files, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("fig5_3src", include_str!("../scenarios/fig5_3src.json")),
    ("fig6_weak", include_str!("../scenarios/fig6_weak.json")),
    ("wall_dipole", include_str!("../scenarios/wall_dipole.json")),
    ("room3d", include_str!("../scenarios/room3d.json")),
];

/// Loads one of [`BUNDLED`] with its seed replaced.
pub fn bundled<T: Scalar>(name: &str, seed: u64) -> Result<Scenario<T>> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("no bundled scenario named {name:?}")))?;
    let mut scn: Scenario<T> = parse_scenario(text, Path::new(name))?;
    scn.seed = seed;
    Ok(scn)
}

/// The comparative-table survey: a 20 m square, 10×10 lawnmower at 1 m.
pub fn table_environment<T: Scalar>() -> Environment<T> {
    Environment::square(T::lit(TABLE_EDGE_CM))
}

/// `n` sources placed uniformly (away from the walls and from each other)
/// with strengths uniform in [`TABLE_STRENGTHS`]. Rejection sampling with a
/// bounded number of attempts; placement is a pure function of `seed`.
pub fn random_sources<T: Scalar>(env: &Environment<T>, n: usize, seed: u64) -> Result<Vec<SourceParams<T>>> {
    let mut rng = stream_rng(seed, PLACEMENT_STREAM);
    let margin = T::lit(TABLE_MARGIN_CM);
    let sep2 = T::lit(TABLE_MIN_SEPARATION_CM * TABLE_MIN_SEPARATION_CM);
    let mut out: Vec<SourceParams<T>> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Scenario(format!("could not place {n} separated sources")));
        }
        let position: Vec<T> = env
            .bounds
            .iter()
            .map(|&[lo, hi]| {
                let (lo, hi) = (lo + margin, hi - margin);
                lo + (hi - lo) * T::lit(rng.random::<f64>())
            })
            .collect();
        if out.iter().any(|s| dist2(&s.position, &position) < sep2) {
            continue;
        }
        let [a, b] = TABLE_STRENGTHS;
        out.push(SourceParams::new(position, T::lit(rng.random_range(a..b)))?);
    }
    Ok(out)
}

/// A comparative-table scenario with `n_sources` random sources.
pub fn table_scenario<T: Scalar>(n_sources: usize, seed: u64) -> Result<Scenario<T>> {
    let env = table_environment();
    let trajectory = lawnmower_trajectory(&env, TABLE_GRID, TABLE_GRID, T::lit(DEFAULT_HEIGHT_CM))?;
    let sources = random_sources(&env, n_sources, seed)?;
    Scenario::new(env, sources, trajectory, seed)
}

/// A synthetic scene point cloud for the bundled 3-D room: the floor and two
/// table tops, sampled on a regular lattice. Under-sample it before use.
pub fn room_point_cloud<T: Scalar>(env: &Environment<T>) -> Result<PriorPointSet<T>> {
    let [x0, x1] = env.bounds[0];
    let [y0, y1] = env.bounds[1];
    let z0 = env.bounds[2][0];
    let step = T::lit(10.0);
    let mut points = Vec::new();
    let mut plane = |xs: [T; 2], ys: [T; 2], z: T| {
        let mut x = xs[0];
        while x <= xs[1] {
            let mut y = ys[0];
            while y <= ys[1] {
                points.push(vec![x, y, z]);
                y = y + step;
            }
            x = x + step;
        }
    };
    plane([x0, x1], [y0, y1], z0);
    let lit = |v: f64| T::lit(v);
    plane([lit(150.0), lit(350.0)], [lit(150.0), lit(300.0)], lit(75.0));
    plane([lit(600.0), lit(850.0)], [lit(450.0), lit(650.0)], lit(75.0));
    PriorPointSet::new(points, None)
}

/// Knobs shared by the CLI and the acceptance harness. Unset fields take the
/// library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub n_particles: usize,
    pub time_steps: usize,
    pub max_iterations: usize,
    /// Fusion range in cm; takes precedence over `fusion_pitches`.
    pub fusion_range: Option<f64>,
    /// Fusion range as a multiple of the trajectory pitch.
    pub fusion_pitches: Option<f64>,
    pub clusterer: Clusterer<f64>,
    pub confidence_thresh: Option<f64>,
    /// Candidate strength floor (μCi); the labeler default when unset.
    pub source_thresh: Option<f64>,
    pub k: usize,
    /// Estimate a dipole moment with components in `[-max, max]`.
    pub dipole_max: Option<f64>,
    pub min_support: f64,
    pub update_mode: UpdateMode,
    pub evidence: Evidence,
    pub warm_start: bool,
    /// Replay the time-step-0 sweep instead of redrawing noise each step.
    pub frozen: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            n_particles: DEFAULT_PARTICLES,
            time_steps: DEFAULT_STEPS_PER_ESTIMATE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            fusion_range: None,
            fusion_pitches: None,
            clusterer: Clusterer::default(),
            confidence_thresh: None,
            source_thresh: None,
            k: DEFAULT_K,
            dipole_max: None,
            min_support: DEFAULT_MIN_SUPPORT,
            update_mode: UpdateMode::PerMeasurement,
            evidence: Evidence::LatestSweep,
            warm_start: false,
            frozen: false,
        }
    }
}

impl RunOptions {
    /// The preset used for the randomized survey table: five nearest sensors
    /// per confidence score, a threshold matched to single-sweep Poisson
    /// scatter, five sweeps per estimate, a fusion range of 1.5 pitches and a
    /// 20 μCi candidate floor.
    pub fn survey() -> Self {
        Self {
            fusion_pitches: Some(SURVEY_FUSION_PITCHES),
            time_steps: SURVEY_TIME_STEPS,
            confidence_thresh: Some(SURVEY_CONFIDENCE_THRESH),
            source_thresh: Some(SURVEY_SOURCE_THRESH),
            k: SURVEY_K,
            ..Self::default()
        }
    }

    /// The survey preset extended with dipole estimation for extended
    /// sources: a tighter fusion range, ten sweeps per estimate, a wider
    /// kernel for the five-dimensional feature space and confidence scored
    /// against the per-pose mean of every sweep so far. Counts near a bulk
    /// source run to thousands per second, where a percent of model error is
    /// already a standard deviation, so the acceptance threshold is lower.
    pub fn bulk() -> Self {
        Self {
            dipole_max: Some(BULK_DIPOLE_MAX),
            fusion_range: Some(BULK_FUSION_RANGE_CM),
            time_steps: BULK_TIME_STEPS,
            clusterer: Clusterer::MeanShift {
                bandwidth: BULK_BANDWIDTH,
            },
            evidence: Evidence::History,
            confidence_thresh: Some(BULK_CONFIDENCE_THRESH),
            ..Self::survey()
        }
    }

    pub fn localizer<T: Scalar>(&self, scn: &Scenario<T>, prior: Option<PriorPointSet<T>>) -> Result<Localizer<T>> {
        let env = scn.environment.clone();
        let pitch = trajectory_pitch(&scn.trajectory).unwrap_or_else(|| env.longest_axis() / T::lit(10.0));
        let mut cfg = FilterConfig::for_environment(&env, pitch);
        cfg.n_particles = self.n_particles;
        cfg.steps_per_estimate = self.time_steps;
        cfg.update_mode = self.update_mode;
        if let Some(d) = self.fusion_range {
            cfg.fusion_range = T::lit(d);
        } else if let Some(m) = self.fusion_pitches {
            cfg.fusion_range = T::lit(m) * pitch;
        }
        if let Some(m) = self.dipole_max {
            cfg = cfg.with_dipole(T::lit(m));
        }
        let mut label = LabelConfig::new(self.k, cfg.strength_window[1]);
        label.max_iterations = self.max_iterations;
        label.warm_start = self.warm_start;
        label.evidence = self.evidence;
        if let Some(c) = self.confidence_thresh {
            label.confidence_thresh = T::lit(c);
        }
        if let Some(s) = self.source_thresh {
            label.source_thresh = T::lit(s);
        }
        let clusterer = match self.clusterer {
            Clusterer::MeanShift { bandwidth } => Clusterer::MeanShift {
                bandwidth: T::lit(bandwidth),
            },
            Clusterer::Ahc { merge_distance } => Clusterer::Ahc {
                merge_distance: T::lit(merge_distance),
            },
            Clusterer::Id => Clusterer::Id,
        };
        Ok(Localizer {
            filter: Filter::new(env, cfg, prior)?,
            label,
            clusterer,
            min_support: T::lit(self.min_support),
        })
    }

    pub fn sweeps<T: Scalar>(&self, scn: &Scenario<T>) -> Result<SweepSource<T>> {
        if self.frozen {
            SweepSource::frozen(scn)
        } else {
            Ok(SweepSource::Synthetic(scn.clone()))
        }
    }
}

/// Scores a result against the scenario's truth.
pub fn score<T: Scalar>(scn: &Scenario<T>, result: &LocalizationResult<T>, window_width: T) -> RunSummary {
    let estimates: Vec<SourceParams<T>> = result.resolved.iter().map(|r| r.params.clone()).collect();
    let longest = scn.environment.longest_axis();
    let report = match_sources(&estimates, &scn.truth_sources, longest * T::lit(MATCH_RADIUS_FRACTION));
    RunSummary::from_match(
        &report,
        &estimates,
        &scn.truth_sources,
        (longest, window_width),
        result.iterations_used,
        result.time_steps_used,
        result.timings.total_s,
    )
}

/// Localizes one scenario and scores the outcome.
pub fn run_scored<T: Scalar>(
    scn: &Scenario<T>,
    opts: &RunOptions,
    prior: Option<PriorPointSet<T>>,
) -> Result<(LocalizationResult<T>, RunSummary)> {
    let started = Instant::now();
    let localizer = opts.localizer(scn, prior)?;
    let result = localizer.run(&opts.sweeps(scn)?, scn.seed, None)?;
    let [lo, hi] = localizer.filter.cfg.strength_window;
    let mut summary = score(scn, &result, hi - lo);
    summary.wall_seconds = started.elapsed().as_secs_f64();
    Ok((result, summary))
}

/// One row of a comparative table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n_sources: usize,
    pub time_steps: usize,
    pub outer_loop: bool,
}

impl Cell {
    pub fn label(&self) -> String {
        let mode = if self.outer_loop { "proposed" } else { "naive" };
        format!("{}src_{mode}", self.n_sources)
    }

    pub fn options(&self, base: &RunOptions) -> RunOptions {
        let mut o = base.clone();
        o.time_steps = self.time_steps;
        if !self.outer_loop {
            o.max_iterations = 1;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: Cell,
    /// Per-repeat results in seed order; `None` marks a failed repeat.
    pub runs: Vec<Option<RunSummary>>,
    pub aggregate: Option<AggregateRow>,
}

impl CellOutcome {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.is_none()).count()
    }
}

/// Runs `repeats` table scenarios for a cell with seeds `base_seed + i`,
/// in parallel. Results are collected in seed order, so the outcome does not
/// depend on the thread count. A failing repeat is recorded, not propagated.
pub fn run_cell(cell: &Cell, base: &RunOptions, repeats: usize, base_seed: u64) -> CellOutcome {
    let opts = cell.options(base);
    let runs: Vec<Option<RunSummary>> = (0..repeats as u64)
        .into_par_iter()
        .map(|i| {
            let scn = table_scenario::<f64>(cell.n_sources, base_seed.wrapping_add(i)).ok()?;
            run_scored(&scn, &opts, None).ok().map(|(_, s)| s)
        })
        .collect();
    let ok: Vec<RunSummary> = runs.iter().flatten().copied().collect();
    CellOutcome {
        cell: cell.clone(),
        aggregate: aggregate_runs(&ok),
        runs,
    }
}

/// Table rows `(config, time_steps, aggregate, failed)` for [`crate::eval::write_table`].
pub fn table_rows(outcomes: &[CellOutcome]) -> Vec<(String, usize, Option<AggregateRow>, usize)> {
    outcomes
        .iter()
        .map(|o| (o.cell.label(), o.cell.time_steps, o.aggregate.clone(), o.failed()))
        .collect()
}
