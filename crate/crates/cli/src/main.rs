use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use radloc::estimate::Clusterer;
use radloc::estimate::{DEFAULT_BANDWIDTH, DEFAULT_MERGE_DISTANCE};
use radloc::experiment::{room_point_cloud, run_cell, score, table_rows, Cell, RunOptions, BULK_DIPOLE_MAX, BUNDLED};
use radloc::filter::ParticleSet;
use radloc::labeler::{Evidence, LocalizationResult, Termination};
use radloc::scenario::{
    load_measurements, load_prior_points, parse_scenario, save_prior_points, write_measurements, Scenario, SweepSource,
};
use radloc::{PriorPointSet64, Scenario64};

/// Exit status when a run stopped at the iteration cap instead of the checksum.
const EXIT_MAX_ITERATIONS: u8 = 2;
const EXIT_USAGE: u8 = 1;

/// Multi-source radiation localization from particle-flux survey readings.
#[derive(Parser, Debug)]
#[command(name = "radloc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one sweep of Poisson readings along a scenario's trajectory.
    Simulate(SimulateArgs),
    /// Localize the sources of a scenario (or of recorded readings).
    Localize(LocalizeArgs),
    /// Run the randomized comparative table: sources × time steps × outer loop.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON file, or the name of a bundled scenario
    #[arg(long)]
    scenario: String,

    /// Noise seed; defaults to the scenario's own seed
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; the CSV goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,

    /// Points kept from the synthetic scene cloud written for 3-D scenarios
    #[arg(long, default_value_t = 2000)]
    prior_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ClustererArg {
    /// Weighted mean-shift mode seeking
    Meanshift,
    /// Single-linkage agglomerative clustering
    Ahc,
    /// Groups particles by the lineage id they inherit through resampling
    Id,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    /// Tuned for lawnmower surveys with single-sweep evidence
    Survey,
    /// Survey preset plus dipole estimation, for extended sources
    Bulk,
    /// Library defaults (stricter confidence threshold, wider fusion range)
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EvidenceArg {
    /// Score candidates against the latest sweep
    Latest,
    /// Score candidates against the per-pose mean of every sweep so far
    History,
}

/// Filter, clustering and labeling knobs shared by `localize` and `sweep`.
#[derive(Args, Debug)]
struct TuningArgs {
    /// Starting point for every other knob
    #[arg(long, value_enum, default_value_t = PresetArg::Survey)]
    preset: PresetArg,

    /// Particles in the filter
    #[arg(long)]
    particles: Option<usize>,

    /// Fusion range in cm (default: a multiple of the trajectory pitch)
    #[arg(long)]
    fusion_range: Option<f64>,

    /// Sweeps processed before each clustering pass
    #[arg(long)]
    time_steps: Option<usize>,

    /// Outer-loop iteration cap; 1 disables the outer loop
    #[arg(long)]
    max_iterations: Option<usize>,

    /// Clustering backend that turns the particle cloud into candidates
    #[arg(long, value_enum)]
    clusterer: Option<ClustererArg>,

    /// Mean-shift bandwidth, or the AHC merge distance, in normalized units
    #[arg(long)]
    bandwidth: Option<f64>,

    /// Minimum confidence for accepting a candidate
    #[arg(long)]
    confidence_thresh: Option<f64>,

    /// Minimum candidate strength in μCi
    #[arg(long)]
    source_thresh: Option<f64>,

    /// Nearest readings combined into a candidate's confidence
    #[arg(long)]
    k: Option<usize>,

    /// Readings a candidate's confidence is scored against
    #[arg(long, value_enum)]
    evidence: Option<EvidenceArg>,

    /// Estimate a dipole moment alongside position and strength
    #[arg(long)]
    dipole: bool,

    /// Largest dipole component considered, in μCi·cm
    #[arg(long, default_value_t = BULK_DIPOLE_MAX)]
    dipole_max: f64,
}

impl TuningArgs {
    fn options(&self) -> Result<RunOptions> {
        let mut o = match self.preset {
            PresetArg::Default => RunOptions::default(),
            PresetArg::Survey => RunOptions::survey(),
            PresetArg::Bulk => RunOptions::bulk(),
        };
        if let Some(n) = self.particles {
            o.n_particles = n;
        }
        if let Some(d) = self.fusion_range {
            o.fusion_range = Some(d);
        }
        if let Some(s) = self.time_steps {
            o.time_steps = s;
        }
        if let Some(m) = self.max_iterations {
            o.max_iterations = m;
        }
        let preset_bandwidth = match o.clusterer {
            Clusterer::MeanShift { bandwidth } => bandwidth,
            _ => DEFAULT_BANDWIDTH,
        };
        o.clusterer = match (self.clusterer, self.bandwidth) {
            (None | Some(ClustererArg::Meanshift), bw) => Clusterer::MeanShift {
                bandwidth: bw.unwrap_or(preset_bandwidth),
            },
            (Some(ClustererArg::Ahc), d) => Clusterer::Ahc {
                merge_distance: d.unwrap_or(DEFAULT_MERGE_DISTANCE),
            },
            (Some(ClustererArg::Id), Some(_)) => {
                bail!("--bandwidth has no effect with --clusterer id")
            }
            (Some(ClustererArg::Id), None) => Clusterer::Id,
        };
        if let Some(c) = self.confidence_thresh {
            o.confidence_thresh = Some(c);
        }
        if let Some(s) = self.source_thresh {
            o.source_thresh = Some(s);
        }
        if let Some(k) = self.k {
            o.k = k;
        }
        if let Some(e) = self.evidence {
            o.evidence = match e {
                EvidenceArg::Latest => Evidence::LatestSweep,
                EvidenceArg::History => Evidence::History,
            };
        }
        if self.dipole || o.dipole_max.is_some() {
            o.dipole_max = Some(self.dipole_max);
        }
        Ok(o)
    }
}

#[derive(Args, Debug)]
struct LocalizeArgs {
    /// Scenario JSON file, or the name of a bundled scenario
    #[arg(long)]
    scenario: String,

    /// Recorded readings (CSV); replaces simulated sweeps
    #[arg(long)]
    measurements: Option<PathBuf>,

    /// Seed of the first repeat; defaults to the scenario's own seed
    #[arg(long)]
    seed: Option<u64>,

    /// Independent repeats, seeded `seed + i`
    #[arg(long, default_value_t = 1)]
    repeats: usize,

    /// Prior point cloud (CSV) that seeds particle positions
    #[arg(long)]
    prior: Option<PathBuf>,

    /// Write the particle cloud after every time step
    #[arg(long)]
    dump_particles: bool,

    /// Output directory
    #[arg(long, default_value = "radloc-out")]
    out: PathBuf,

    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Source counts, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    sources: Vec<usize>,

    /// Outer-loop settings to compare
    #[arg(long, value_enum, default_value_t = OuterArg::Both)]
    outer: OuterArg,

    /// Time steps per clustering pass, comma separated (default: the preset's)
    #[arg(long = "steps", value_delimiter = ',')]
    steps: Vec<usize>,

    /// Repeats per cell, seeded `seed + i`
    #[arg(long, default_value_t = 100)]
    repeats: usize,

    /// Base seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory; the table goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OuterArg {
    On,
    Off,
    Both,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(&args).map(|_| ExitCode::SUCCESS),
        Command::Localize(args) => localize(&args),
        Command::Sweep(args) => sweep(&args).map(|_| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_USAGE)
    })
}

/// Caps the rayon pool at `RADLOC_THREADS` when it is set.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("RADLOC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("RADLOC_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("RADLOC_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")
}

/// Loads a scenario file, falling back to the bundled scenarios by name.
fn load_scenario(spec: &str, seed: Option<u64>) -> Result<Scenario64> {
    let path = Path::new(spec);
    let mut scn = if path.exists() {
        radloc::scenario::load_scenario(path)?
    } else if let Some((name, text)) = BUNDLED.iter().find(|(n, _)| *n == spec) {
        parse_scenario(text, Path::new(name))?
    } else {
        let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
        bail!(
            "{spec}: no such file, and not a bundled scenario ({})",
            names.join(", ")
        );
    };
    if let Some(seed) = seed {
        scn.seed = seed;
    }
    Ok(scn)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let scn = load_scenario(&args.scenario, args.seed)?;
    let measurements = scn.generate_measurements()?;
    let total: u64 = measurements.iter().map(|m| m.count).sum();
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join("measurements.csv");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_measurements(io::BufWriter::new(file), &measurements)
                .with_context(|| format!("writing {}", path.display()))?;
            if scn.environment.dimension == 3 {
                let prior = room_point_cloud(&scn.environment)?.undersample(args.prior_points, scn.seed)?;
                save_prior_points(&prior, dir.join("prior.csv"))?;
            }
        }
        None => write_measurements(io::stdout().lock(), &measurements)?,
    }
    eprintln!(
        "simulated {} poses, {} total counts (seed {})",
        measurements.len(),
        total,
        scn.seed
    );
    Ok(())
}

/// One particle cloud snapshot per row group: `time_step, measurement, id, ...`.
struct ParticleDump {
    rows: Vec<Vec<String>>,
}

impl ParticleDump {
    fn header(dimension: usize, dipole: bool) -> Vec<String> {
        let mut h: Vec<String> = ["time_step", "measurement", "id", "x_cm", "y_cm"]
            .map(String::from)
            .to_vec();
        if dimension == 3 {
            h.push("z_cm".into());
        }
        h.push("strength_uci".into());
        if dipole {
            h.extend(["px".into(), "py".into()]);
        }
        h.push("weight".into());
        h
    }

    fn record(&mut self, time_step: u32, measurement: usize, set: &ParticleSet<f64>) {
        let weights = set.weights();
        for (p, w) in set.particles.iter().zip(weights) {
            let mut row = vec![time_step.to_string(), measurement.to_string(), p.id.to_string()];
            row.extend(p.params.position.iter().map(|x| x.to_string()));
            row.push(p.params.strength.to_string());
            if let Some(d) = &p.params.dipole {
                row.extend(d.iter().map(|x| x.to_string()));
            }
            row.push(w.to_string());
            self.rows.push(row);
        }
    }

    fn save(&self, path: &Path, dimension: usize, dipole: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(Self::header(dimension, dipole))?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))
    }
}

fn strip_key(value: &mut serde_json::Value, key: &str) {
    if let Some(map) = value.as_object_mut() {
        map.remove(key);
    }
}

struct Repeat {
    seed: u64,
    result: LocalizationResult<f64>,
    report: serde_json::Value,
    dump: Option<ParticleDump>,
}

fn localize(args: &LocalizeArgs) -> Result<ExitCode> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let opts = args.tuning.options()?;
    let base = load_scenario(&args.scenario, args.seed)?;
    let prior: Option<PriorPointSet64> = match &args.prior {
        Some(p) => Some(load_prior_points(p, base.environment.dimension)?),
        None => None,
    };
    let recorded = match &args.measurements {
        Some(p) => Some(SweepSource::recorded(load_measurements(p)?)?),
        None => None,
    };
    // Build once up front so a bad configuration fails before any compute.
    let localizer = opts.localizer(&base, prior.clone())?;
    let readings = match &recorded {
        Some(r) => r.sweep(0)?.len(),
        None => base.trajectory.len(),
    };
    localizer.label.validate(readings)?;
    let window = localizer.filter.cfg.strength_window;

    let runs: Vec<Result<Repeat>> = (0..args.repeats as u64)
        .into_par_iter()
        .map(|i| {
            let mut scn: Scenario<f64> = base.clone();
            scn.seed = base.seed.wrapping_add(i);
            let sweeps = match &recorded {
                Some(r) => r.clone(),
                None => opts.sweeps(&scn)?,
            };
            let mut dump = args.dump_particles.then(|| ParticleDump { rows: Vec::new() });
            let result = match dump.as_mut() {
                Some(d) => {
                    let mut observe = |t: u32, m: usize, set: &ParticleSet<f64>| d.record(t, m, set);
                    localizer.run(&sweeps, scn.seed, Some(&mut observe))?
                }
                None => localizer.run(&sweeps, scn.seed, None)?,
            };
            let summary = (!scn.truth_sources.is_empty() || recorded.is_none())
                .then(|| score(&scn, &result, window[1] - window[0]));
            // Wall-clock figures go to timings.json so the report itself is
            // a pure function of the inputs.
            let mut result_json = serde_json::to_value(&result)?;
            strip_key(&mut result_json, "timings");
            let mut score_json = serde_json::to_value(summary)?;
            strip_key(&mut score_json, "wall_seconds");
            let report = json!({
                "scenario": args.scenario,
                "seed": scn.seed,
                "options": opts,
                "result": result_json,
                "score": score_json,
            });
            Ok(Repeat {
                seed: scn.seed,
                result,
                report,
                dump,
            })
        })
        .collect();

    let runs = runs.into_iter().collect::<Result<Vec<Repeat>>>()?;
    create_dir(&args.out)?;
    let mut hit_cap = false;
    let mut timings = Vec::new();
    for run in runs {
        let stem = if args.repeats == 1 {
            String::new()
        } else {
            format!("_{}", run.seed)
        };
        let path = args.out.join(format!("result{stem}.json"));
        write_file(&path, serde_json::to_string_pretty(&run.report)?.as_bytes())?;
        if let Some(dump) = &run.dump {
            dump.save(
                &args.out.join(format!("particles{stem}.csv")),
                base.environment.dimension,
                opts.dipole_max.is_some(),
            )?;
        }
        timings.push(json!({ "seed": run.seed, "timings": run.result.timings }));
        hit_cap |= run.result.terminated_by == Termination::MaxIterations;
        let f1 = run.report["score"]["f1"].as_f64();
        println!(
            "seed {}: {} resolved after {} iteration(s), terminated by {}{}",
            run.seed,
            run.result.resolved.len(),
            run.result.iterations_used,
            match run.result.terminated_by {
                Termination::Checksum => "checksum",
                Termination::MaxIterations => "max_iterations",
            },
            f1.map(|f| format!(", f1 {f:.3}")).unwrap_or_default()
        );
    }
    write_file(
        &args.out.join("timings.json"),
        serde_json::to_string_pretty(&timings)?.as_bytes(),
    )?;
    Ok(if hit_cap {
        ExitCode::from(EXIT_MAX_ITERATIONS)
    } else {
        ExitCode::SUCCESS
    })
}

fn sweep(args: &SweepArgs) -> Result<()> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    if args.sources.is_empty() {
        bail!("--sources must list at least one source count");
    }
    let opts = args.tuning.options()?;
    // Surface configuration errors before the first cell starts.
    opts.localizer(
        &radloc::experiment::table_scenario::<f64>(args.sources[0], args.seed)?,
        None,
    )?;
    let steps = if args.steps.is_empty() {
        vec![opts.time_steps]
    } else {
        args.steps.clone()
    };
    let outer: &[bool] = match args.outer {
        OuterArg::On => &[true],
        OuterArg::Off => &[false],
        OuterArg::Both => &[true, false],
    };
    let mut outcomes = Vec::new();
    for &n_sources in &args.sources {
        for &time_steps in &steps {
            for &outer_loop in outer {
                let cell = Cell {
                    n_sources,
                    time_steps,
                    outer_loop,
                };
                let outcome = run_cell(&cell, &opts, args.repeats, args.seed);
                eprintln!(
                    "{} s={}: f1 {}",
                    cell.label(),
                    time_steps,
                    outcome
                        .aggregate
                        .as_ref()
                        .map(|a| format!("{:.3}", a.f1.mean))
                        .unwrap_or_else(|| "n/a".into())
                );
                outcomes.push(outcome);
            }
        }
    }
    let rows = table_rows(&outcomes);
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join("table.csv");
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            radloc::eval::write_table(io::BufWriter::new(file), &rows)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let mut out = io::stdout().lock();
            radloc::eval::write_table(&mut out, &rows)?;
            out.flush()?;
        }
    }
    Ok(())
}
