//! Environments, ground-truth layouts, trajectories and the file formats that
//! carry them.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expected_intensity, sample_count, Measurement, SensorPose, SourceParams};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

pub const DEFAULT_BACKGROUND_CPS: f64 = 2.0;
pub const DEFAULT_EFFICIENCY: f64 = 1.0;
pub const DEFAULT_HEIGHT_CM: f64 = 100.0;

/// Axis-aligned survey volume (cm) with default detector properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment<T> {
    pub dimension: usize,
    pub bounds: Vec<[T; 2]>,
    pub background: T,
    pub efficiency: T,
}

impl<T: Scalar> Environment<T> {
    pub fn new(bounds: Vec<[T; 2]>) -> Result<Self> {
        let env = Self {
            dimension: bounds.len(),
            bounds,
            background: T::lit(DEFAULT_BACKGROUND_CPS),
            efficiency: T::lit(DEFAULT_EFFICIENCY),
        };
        env.validate()?;
        Ok(env)
    }

    /// Square 2-D grid `[0, edge]²`.
    pub fn square(edge_cm: T) -> Self {
        Self::new(vec![[T::zero(), edge_cm]; 2]).expect("positive edge")
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dimension) {
            return Err(Error::Scenario(format!(
                "dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        if self.bounds.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: self.bounds.len(),
                context: "bounds",
            });
        }
        for (axis, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::Scenario(format!(
                    "bounds[{axis}]: min {lo} must be below max {hi}"
                )));
            }
        }
        if !(self.efficiency > T::zero()) {
            return Err(Error::NonPositiveEfficiency(self.efficiency.as_f64()));
        }
        if !(self.background >= T::zero()) {
            return Err(Error::NegativeRate(self.background.as_f64()));
        }
        Ok(())
    }

    pub fn extent(&self, axis: usize) -> T {
        self.bounds[axis][1] - self.bounds[axis][0]
    }

    pub fn center(&self) -> Vec<T> {
        self.bounds.iter().map(|[lo, hi]| (*lo + *hi) / T::lit(2.0)).collect()
    }

    pub fn longest_axis(&self) -> T {
        (0..self.dimension).map(|a| self.extent(a)).fold(T::zero(), T::max)
    }

    pub fn diagonal(&self) -> T {
        (0..self.dimension)
            .map(|a| self.extent(a) * self.extent(a))
            .sum::<T>()
            .sqrt()
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.len() == self.dimension && p.iter().zip(&self.bounds).all(|(&x, [lo, hi])| x >= *lo && x <= *hi)
    }

    pub fn clamp(&self, p: &mut [T]) {
        for (x, [lo, hi]) in p.iter_mut().zip(&self.bounds) {
            *x = x.max(*lo).min(*hi);
        }
    }

    pub fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.bounds
            .iter()
            .map(|[lo, hi]| *lo + (*hi - *lo) * T::lit(rng.random::<f64>()))
            .collect()
    }

    fn pose_at(&self, position: Vec<T>, height: T) -> Result<SensorPose<T>> {
        SensorPose::new(position, height, self.efficiency, self.background)
    }
}

/// Ground truth, the survey path and the seed that drives its noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub environment: Environment<T>,
    pub truth_sources: Vec<SourceParams<T>>,
    pub trajectory: Vec<SensorPose<T>>,
    pub seed: u64,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        environment: Environment<T>,
        truth_sources: Vec<SourceParams<T>>,
        trajectory: Vec<SensorPose<T>>,
        seed: u64,
    ) -> Result<Self> {
        let scn = Self {
            environment,
            truth_sources,
            trajectory,
            seed,
        };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.environment;
        env.validate()?;
        if self.trajectory.is_empty() {
            return Err(Error::Scenario("trajectory is empty".into()));
        }
        for (i, s) in self.truth_sources.iter().enumerate() {
            s.validate()?;
            if !env.contains(&s.position) {
                return Err(Error::Scenario(format!("sources[{i}] lies outside bounds")));
            }
        }
        for (i, p) in self.trajectory.iter().enumerate() {
            p.validate()?;
            if !env.contains(&p.position) {
                return Err(Error::Scenario(format!("trajectory[{i}] lies outside bounds")));
            }
        }
        Ok(())
    }

    /// Time-step-0 sweep.
    pub fn generate_measurements(&self) -> Result<Vec<Measurement<T>>> {
        self.sweep(0)
    }

    /// Counts for one full pass over the trajectory. Each time step draws from
    /// its own stream derived from `(seed, time_step)`.
    pub fn sweep(&self, time_step: u32) -> Result<Vec<Measurement<T>>> {
        let mut rng = stream_rng(self.seed, u64::from(time_step));
        self.trajectory
            .iter()
            .map(|pose| {
                let rate = expected_intensity(pose, &self.truth_sources)?;
                Ok(Measurement {
                    pose: pose.clone(),
                    count: sample_count(rate, &mut rng)?,
                    time_step,
                })
            })
            .collect()
    }
}

/// Serpentine coverage path: `rows × cols` cell-centred poses, alternate rows
/// reversed. Rows advance along the second axis. In 3-D the path is flown at
/// mid-height of the third axis and `height` is the detector standoff.
pub fn lawnmower_trajectory<T: Scalar>(
    env: &Environment<T>,
    rows: usize,
    cols: usize,
    height: T,
) -> Result<Vec<SensorPose<T>>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!(
            "lawnmower needs at least one row and column, got {rows}x{cols}"
        )));
    }
    let [x0, _] = env.bounds[0];
    let [y0, _] = env.bounds[1];
    let dx = env.extent(0) / T::lit(cols as f64);
    let dy = env.extent(1) / T::lit(rows as f64);
    let half = T::lit(0.5);
    let mut poses = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let y = y0 + dy * (T::lit(r as f64) + half);
        for c in 0..cols {
            let c = if r % 2 == 0 { c } else { cols - 1 - c };
            let x = x0 + dx * (T::lit(c as f64) + half);
            let mut position = vec![x, y];
            if env.dimension == 3 {
                position.push(env.center()[2]);
            }
            poses.push(env.pose_at(position, height)?);
        }
    }
    Ok(poses)
}

/// Spacing of a lawnmower grid: the larger of the two cell edges.
pub fn lawnmower_pitch<T: Scalar>(env: &Environment<T>, rows: usize, cols: usize) -> T {
    let dx = env.extent(0) / T::lit(cols.max(1) as f64);
    let dy = env.extent(1) / T::lit(rows.max(1) as f64);
    dx.max(dy)
}

/// Mean spacing between consecutive poses of a path, used to size the
/// fusion range when the path came from a file.
pub fn trajectory_pitch<T: Scalar>(poses: &[SensorPose<T>]) -> Option<T> {
    if poses.len() < 2 {
        return None;
    }
    let mut steps: Vec<T> = poses
        .windows(2)
        .map(|w| crate::scalar::planar_dist2(&w[0].position, &w[1].position).sqrt())
        .filter(|d| *d > T::zero())
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(steps[steps.len() / 2])
}

/// Point set used to seed particles, e.g. an under-sampled scene point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPointSet<T> {
    pub points: Vec<Vec<T>>,
    pub weights: Option<Vec<T>>,
}

impl<T: Scalar> PriorPointSet<T> {
    pub fn new(points: Vec<Vec<T>>, weights: Option<Vec<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("prior point set is empty".into()));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
                context: "prior point",
            });
        }
        if let Some(w) = &weights {
            if w.len() != points.len() {
                return Err(Error::Config("prior weights do not match point count".into()));
            }
            if w.iter().any(|x| !(*x >= T::zero())) {
                return Err(Error::Config("prior weights must be non-negative".into()));
            }
        }
        Ok(Self { points, weights })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Uniform subset of `target` points chosen with a seeded stream. Returns
    /// the set unchanged when it already has at most `target` points.
    pub fn undersample(&self, target: usize, seed: u64) -> Result<Self> {
        if target == 0 {
            return Err(Error::Config("under-sampling target must be positive".into()));
        }
        if self.points.len() <= target {
            return Ok(self.clone());
        }
        let mut rng = stream_rng(seed, 0x5052_494f);
        let mut picked = sample(&mut rng, self.points.len(), target).into_vec();
        picked.sort_unstable();
        let points = picked.iter().map(|&i| self.points[i].clone()).collect();
        let weights = self.weights.as_ref().map(|w| picked.iter().map(|&i| w[i]).collect());
        Self::new(points, weights)
    }

    /// Index of a point drawn proportionally to weight (uniformly when unweighted).
    pub fn draw_index(&self, rng: &mut ChaCha8Rng) -> usize {
        match &self.weights {
            None => rng.random_range(0..self.points.len()),
            Some(w) => {
                let total: f64 = w.iter().map(|x| x.as_f64()).sum();
                if !(total > 0.0) {
                    return rng.random_range(0..self.points.len());
                }
                let mut u = rng.random::<f64>() * total;
                for (i, x) in w.iter().enumerate() {
                    u -= x.as_f64();
                    if u < 0.0 {
                        return i;
                    }
                }
                w.len() - 1
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Files

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Cm,
    M,
}

impl Units {
    fn to_cm(self) -> f64 {
        match self {
            Units::Cm => 1.0,
            Units::M => 100.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    position: Vec<f64>,
    #[serde(rename = "strength_uCi")]
    strength_uci: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dipole: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background_cps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum TrajectoryFile {
    Lawnmower {
        rows: usize,
        cols: usize,
        #[serde(default = "default_height")]
        height_cm: f64,
    },
    Explicit {
        poses: Vec<PoseFile>,
    },
}

fn default_height() -> f64 {
    DEFAULT_HEIGHT_CM
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    dimension: usize,
    bounds: Vec<[f64; 2]>,
    #[serde(default)]
    units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background_cps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    efficiency: Option<f64>,
    sources: Vec<SourceFile>,
    trajectory: TrajectoryFile,
    seed: u64,
}

fn scaled<T: Scalar>(v: &[f64], k: f64) -> Vec<T> {
    v.iter().map(|x| T::lit(x * k)).collect()
}

impl ScenarioFile {
    fn into_scenario<T: Scalar>(self) -> Result<Scenario<T>> {
        let k = self.units.to_cm();
        let mut env = Environment {
            dimension: self.dimension,
            bounds: self
                .bounds
                .iter()
                .map(|[lo, hi]| [T::lit(lo * k), T::lit(hi * k)])
                .collect(),
            background: T::lit(DEFAULT_BACKGROUND_CPS),
            efficiency: T::lit(DEFAULT_EFFICIENCY),
        };
        if let Some(b) = self.background_cps {
            env.background = T::lit(b);
        }
        if let Some(e) = self.efficiency {
            env.efficiency = T::lit(e);
        }
        env.validate()?;
        let sources = self
            .sources
            .iter()
            .map(|s| SourceParams {
                position: scaled(&s.position, k),
                strength: T::lit(s.strength_uci),
                dipole: s.dipole.as_ref().map(|d| scaled(d, k)),
            })
            .collect::<Vec<_>>();
        for (i, s) in sources.iter().enumerate() {
            if s.dim() != env.dimension {
                return Err(Error::Scenario(format!(
                    "sources[{i}].position has {} coordinates, expected {}",
                    s.dim(),
                    env.dimension
                )));
            }
        }
        let trajectory = match self.trajectory {
            TrajectoryFile::Lawnmower { rows, cols, height_cm } => {
                lawnmower_trajectory(&env, rows, cols, T::lit(height_cm))?
            }
            TrajectoryFile::Explicit { poses } => poses
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if p.position.len() != env.dimension {
                        return Err(Error::Scenario(format!(
                            "trajectory.poses[{i}].position has {} coordinates, expected {}",
                            p.position.len(),
                            env.dimension
                        )));
                    }
                    SensorPose::new(
                        scaled(&p.position, k),
                        T::lit(p.height_cm.unwrap_or(DEFAULT_HEIGHT_CM)),
                        p.efficiency.map(T::lit).unwrap_or(env.efficiency),
                        p.background_cps.map(T::lit).unwrap_or(env.background),
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Scenario::new(env, sources, trajectory, self.seed)
    }

    fn from_scenario<T: Scalar>(scn: &Scenario<T>) -> Self {
        let v = |xs: &[T]| xs.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let env = &scn.environment;
        Self {
            dimension: env.dimension,
            bounds: env.bounds.iter().map(|[lo, hi]| [lo.as_f64(), hi.as_f64()]).collect(),
            units: Units::Cm,
            background_cps: Some(env.background.as_f64()),
            efficiency: Some(env.efficiency.as_f64()),
            sources: scn
                .truth_sources
                .iter()
                .map(|s| SourceFile {
                    position: v(&s.position),
                    strength_uci: s.strength.as_f64(),
                    dipole: s.dipole.as_deref().map(v),
                })
                .collect(),
            trajectory: TrajectoryFile::Explicit {
                poses: scn
                    .trajectory
                    .iter()
                    .map(|p| PoseFile {
                        position: v(&p.position),
                        height_cm: Some(p.height.as_f64()),
                        efficiency: Some(p.efficiency.as_f64()),
                        background_cps: Some(p.background.as_f64()),
                    })
                    .collect(),
            },
            seed: scn.seed,
        }
    }
}

/// Parses scenario JSON. Errors carry the offending field and line.
pub fn parse_scenario<T: Scalar>(text: &str, origin: &Path) -> Result<Scenario<T>> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: origin.to_path_buf(),
        source,
    })?;
    file.into_scenario()
}

pub fn load_scenario<T: Scalar>(path: impl AsRef<Path>) -> Result<Scenario<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path)
}

/// Writes the scenario in cm with the trajectory expanded to explicit poses.
pub fn save_scenario<T: Scalar>(scn: &Scenario<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&ScenarioFile::from_scenario(scn)).expect("scenario serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads `x_cm, y_cm[, z_cm][, weight]` with a header row. The point
/// dimension must equal `dimension`.
pub fn load_prior_points<T: Scalar>(path: impl AsRef<Path>, dimension: usize) -> Result<PriorPointSet<T>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let coords: Vec<usize> = ["x_cm", "y_cm", "z_cm"]
        .iter()
        .filter_map(|n| names.iter().position(|h| h == n))
        .collect();
    if coords.len() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            found: coords.len(),
            context: "prior point columns",
        });
    }
    let weight_col = names.iter().position(|h| *h == "weight");
    let mut points = Vec::new();
    let mut weights = weight_col.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let field = |col: usize| -> Result<T> {
            record
                .get(col)
                .and_then(|s| s.parse::<f64>().ok())
                .map(T::lit)
                .ok_or_else(|| csv_err(path, format!("row {}: bad value in column {}", row + 2, names[col])))
        };
        points.push(coords.iter().map(|&c| field(c)).collect::<Result<Vec<_>>>()?);
        if let (Some(col), Some(w)) = (weight_col, weights.as_mut()) {
            w.push(field(col)?);
        }
    }
    if points.is_empty() {
        return Err(csv_err(path, "no prior points"));
    }
    PriorPointSet::new(points, weights)
}

pub fn save_prior_points<T: Scalar>(prior: &PriorPointSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<&str> = ["x_cm", "y_cm", "z_cm"][..prior.dim()].to_vec();
    if prior.weights.is_some() {
        header.push("weight");
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, p) in prior.points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|x| x.as_f64().to_string()).collect();
        if let Some(ws) = &prior.weights {
            row.push(ws[i].as_f64().to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// Measurement CSV header for the given dimension.
pub fn measurement_header(dimension: usize) -> Vec<&'static str> {
    let mut h = vec!["time_step", "x_cm", "y_cm"];
    if dimension == 3 {
        h.push("z_cm");
    }
    h.extend(["height_cm", "efficiency", "background_cps", "count_cps"]);
    h
}

pub fn write_measurements<T: Scalar, W: Write>(out: W, measurements: &[Measurement<T>]) -> Result<()> {
    let path = Path::new("<measurements>");
    let dimension = measurements.first().map_or(2, |m| m.pose.position.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(measurement_header(dimension))
        .map_err(|e| csv_err(path, e))?;
    for m in measurements {
        let mut row = vec![m.time_step.to_string()];
        row.extend(m.pose.position.iter().map(|x| x.as_f64().to_string()));
        row.push(m.pose.height.as_f64().to_string());
        row.push(m.pose.efficiency.as_f64().to_string());
        row.push(m.pose.background.as_f64().to_string());
        row.push(m.count.to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

pub fn save_measurements<T: Scalar>(measurements: &[Measurement<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_measurements(std::io::BufWriter::new(file), measurements).map_err(|e| match e {
        Error::Csv { message, .. } => csv_err(path, message),
        other => other,
    })
}

pub fn load_measurements<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Measurement<T>>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let dimension = if headers.iter().any(|h| h == "z_cm") { 3 } else { 2 };
    let expected = measurement_header(dimension);
    if headers.iter().ne(expected.iter().copied()) {
        return Err(csv_err(path, format!("expected header {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let bad = |col: &str| csv_err(path, format!("row {}: bad value in column {col}", row + 2));
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| bad(expected[i]))
        };
        let time_step = record
            .get(0)
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| bad("time_step"))?;
        let position = (1..=dimension)
            .map(|i| num(i).map(T::lit))
            .collect::<Result<Vec<_>>>()?;
        let base = dimension + 1;
        let pose = SensorPose::new(
            position,
            T::lit(num(base)?),
            T::lit(num(base + 1)?),
            T::lit(num(base + 2)?),
        )?;
        let count = record
            .get(base + 3)
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| bad("count_cps"))?;
        out.push(Measurement { pose, count, time_step });
    }
    if out.is_empty() {
        return Err(csv_err(path, "no measurements"));
    }
    Ok(out)
}

/// Supplies the sweep processed at each global time step.
#[derive(Debug, Clone)]
pub enum SweepSource<T> {
    /// Fresh Poisson counts per time step.
    Synthetic(Scenario<T>),
    /// The time-step-0 sweep of a scenario, replayed unchanged.
    Frozen(Vec<Measurement<T>>),
    /// Recorded sweeps, cycled in order.
    Recorded(Vec<Vec<Measurement<T>>>),
}

impl<T: Scalar> SweepSource<T> {
    pub fn frozen(scn: &Scenario<T>) -> Result<Self> {
        Ok(Self::Frozen(scn.generate_measurements()?))
    }

    /// Groups a flat measurement list by `time_step`, preserving row order.
    pub fn recorded(measurements: Vec<Measurement<T>>) -> Result<Self> {
        let mut sweeps: Vec<Vec<Measurement<T>>> = Vec::new();
        let mut steps: Vec<u32> = Vec::new();
        for m in measurements {
            match steps.iter().position(|&t| t == m.time_step) {
                Some(i) => sweeps[i].push(m),
                None => {
                    steps.push(m.time_step);
                    sweeps.push(vec![m]);
                }
            }
        }
        if sweeps.is_empty() {
            return Err(Error::Config("no measurements".into()));
        }
        Ok(Self::Recorded(sweeps))
    }

    pub fn sweep(&self, time_step: u32) -> Result<Vec<Measurement<T>>> {
        match self {
            SweepSource::Synthetic(scn) => scn.sweep(time_step),
            SweepSource::Frozen(ms) => Ok(ms.iter().map(|m| Measurement { time_step, ..m.clone() }).collect()),
            SweepSource::Recorded(sweeps) => {
                let idx = time_step as usize % sweeps.len();
                Ok(sweeps[idx].clone())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SweepSource::Synthetic(scn) => scn.environment.dimension,
            SweepSource::Frozen(ms) => ms[0].pose.position.len(),
            SweepSource::Recorded(s) => s[0][0].pose.position.len(),
        }
    }
}
