//! Outer loop: confidence screening of candidates, accumulation of resolved
//! sources and the checksum end-point test.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{extract_candidates, CandidateSource, Clusterer, FeatureScale};
use crate::filter::{checksum, Filter, StepDiagnostics, StepObserver};
use crate::model::{expected_intensity, log_poisson_ratio, Measurement, SourceParams};
use crate::rng::stream_rng;
use crate::scalar::{planar_dist2, Scalar};
use crate::scenario::SweepSource;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_CONFIDENCE_THRESH: f64 = 0.80;
/// Strength floor as a fraction of the strength window's upper bound.
pub const SOURCE_THRESH_FRACTION: f64 = 0.05;
pub const DEFAULT_MAX_ITERATIONS: usize = 5;
/// `bg_thresh = BG_THRESH_SIGMAS · √(Σ background)` unless set explicitly.
pub const BG_THRESH_SIGMAS: f64 = 4.0;

const FILTER_STREAM: u64 = 0xF117_E600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSource<T> {
    pub params: SourceParams<T>,
    pub confidence: T,
    pub iteration_found: usize,
}

/// Which counts the confidence score and the checksum look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// The most recent sweep only.
    #[default]
    LatestSweep,
    /// Per-pose mean count over every sweep processed so far, rounded.
    History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig<T> {
    pub k: usize,
    pub omegas: Vec<T>,
    pub confidence_thresh: T,
    /// Candidates weaker than this (μCi) are never scored.
    pub source_thresh: T,
    /// Rerun while the checksum is at least this. `None` derives it from the
    /// background of the evidence sweep.
    pub bg_thresh: Option<T>,
    pub max_iterations: usize,
    /// Continue from the surviving cloud instead of re-initializing on rerun.
    pub warm_start: bool,
    pub evidence: Evidence,
}

impl<T: Scalar> LabelConfig<T> {
    pub fn new(k: usize, strength_window_max: T) -> Self {
        Self {
            k,
            omegas: vec![T::one() / T::lit(k as f64); k],
            confidence_thresh: T::lit(DEFAULT_CONFIDENCE_THRESH),
            source_thresh: strength_window_max * T::lit(SOURCE_THRESH_FRACTION),
            bg_thresh: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            warm_start: false,
            evidence: Evidence::LatestSweep,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self.omegas = vec![T::one() / T::lit(k as f64); k];
        self
    }

    pub fn validate(&self, n_measurements: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 || self.omegas.len() != self.k {
            return bad(format!(
                "need k ≥ 1 weights, got k={} with {}",
                self.k,
                self.omegas.len()
            ));
        }
        if self.k > n_measurements {
            return bad(format!("k={} exceeds {} measurements", self.k, n_measurements));
        }
        let sum: T = self.omegas.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0))
            || self.omegas.iter().any(|w| !(*w >= T::zero()))
        {
            return bad(format!(
                "confidence weights must be non-negative and sum to 1, got {sum}"
            ));
        }
        if !(self.confidence_thresh > T::zero() && self.confidence_thresh < T::one()) {
            return bad(format!(
                "confidence threshold must lie in (0, 1), got {}",
                self.confidence_thresh
            ));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        Ok(())
    }

    pub fn bg_thresh_for(&self, measurements: &[Measurement<T>]) -> T {
        self.bg_thresh.unwrap_or_else(|| {
            let bg: T = measurements.iter().map(|m| m.pose.background).sum();
            T::lit(BG_THRESH_SIGMAS) * bg.sqrt()
        })
    }
}

/// `c_k = Σ ω_i p*(m(S_i) | I(S_i, {candidate} ∪ resolved))` over the `k`
/// readings nearest (ground plane) to the candidate, ties in reading order.
pub fn confidence<T: Scalar>(
    candidate: &SourceParams<T>,
    measurements: &[Measurement<T>],
    resolved: &[ResolvedSource<T>],
    cfg: &LabelConfig<T>,
) -> Result<T> {
    if cfg.k > measurements.len() {
        return Err(Error::Config(format!(
            "k={} exceeds {} measurements",
            cfg.k,
            measurements.len()
        )));
    }
    let mut order: Vec<(T, usize)> = measurements
        .iter()
        .enumerate()
        .map(|(i, m)| (planar_dist2(&m.pose.position, &candidate.position), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut c = T::zero();
    for (&(_, i), w) in order.iter().zip(&cfg.omegas) {
        let m = &measurements[i];
        let rate = expected_intensity(
            &m.pose,
            std::iter::once(candidate).chain(resolved.iter().map(|r| &r.params)),
        )?;
        c = c + *w * log_poisson_ratio(m.count, rate)?.exp();
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome<T> {
    pub newly_resolved: Vec<ResolvedSource<T>>,
    pub rerun: bool,
    pub checksum: T,
}

/// Scores candidates strongest-support first against the growing resolved
/// set, appends the accepted ones, then decides whether another pass is
/// needed from the checksum. Each candidate's score is written back.
pub fn label_sources<T: Scalar>(
    candidates: &mut [CandidateSource<T>],
    measurements: &[Measurement<T>],
    resolved: &mut Vec<ResolvedSource<T>>,
    cfg: &LabelConfig<T>,
    iteration: usize,
) -> Result<LabelOutcome<T>> {
    let start = resolved.len();
    for cand in candidates.iter_mut() {
        if cand.params.strength < cfg.source_thresh {
            continue;
        }
        let c = confidence(&cand.params, measurements, resolved, cfg)?;
        cand.confidence = Some(c);
        if c >= cfg.confidence_thresh {
            resolved.push(ResolvedSource {
                params: cand.params.clone(),
                confidence: c,
                iteration_found: iteration,
            });
        }
    }
    let residual = checksum(measurements, resolved)?;
    Ok(LabelOutcome {
        newly_resolved: resolved[start..].to_vec(),
        rerun: residual >= cfg.bg_thresh_for(measurements),
        checksum: residual,
    })
}

/// Accumulates sweeps into the evidence the labeler sees.
#[derive(Debug, Clone)]
pub struct EvidenceLog<T> {
    mode: Evidence,
    latest: Vec<Measurement<T>>,
    sums: Vec<u64>,
    sweeps: u64,
}

impl<T: Scalar> EvidenceLog<T> {
    pub fn new(mode: Evidence) -> Self {
        Self {
            mode,
            latest: Vec::new(),
            sums: Vec::new(),
            sweeps: 0,
        }
    }

    pub fn push(&mut self, sweep: Vec<Measurement<T>>) -> Result<()> {
        if self.sweeps > 0 && sweep.len() != self.sums.len() {
            return Err(Error::Config(format!(
                "sweep length changed from {} to {}",
                self.sums.len(),
                sweep.len()
            )));
        }
        if self.sweeps == 0 {
            self.sums = vec![0; sweep.len()];
        }
        for (s, m) in self.sums.iter_mut().zip(&sweep) {
            *s += m.count;
        }
        self.sweeps += 1;
        self.latest = sweep;
        Ok(())
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn current(&self) -> Vec<Measurement<T>> {
        match self.mode {
            Evidence::LatestSweep => self.latest.clone(),
            Evidence::History => self
                .latest
                .iter()
                .zip(&self.sums)
                .map(|(m, &s)| Measurement {
                    count: (s as f64 / self.sweeps as f64).round() as u64,
                    ..m.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Checksum,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace<T> {
    pub iteration: usize,
    pub first_time_step: u32,
    pub time_steps: usize,
    pub candidates: Vec<CandidateSource<T>>,
    pub accepted: usize,
    pub checksum: T,
    pub diagnostics: Vec<StepDiagnostics<T>>,
}

/// Wall-clock seconds spent per stage, summed over iterations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub filter_s: f64,
    pub clustering_s: f64,
    pub labeling_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult<T> {
    pub resolved: Vec<ResolvedSource<T>>,
    pub iterations_used: usize,
    pub time_steps_used: usize,
    pub checksum_history: Vec<T>,
    pub bg_thresh: T,
    pub terminated_by: Termination,
    pub iterations: Vec<IterationTrace<T>>,
    /// Not serialized with the result so result files stay reproducible.
    #[serde(skip)]
    pub timings: StageTimings,
}

impl<T> LocalizationResult<T> {
    /// Resolved sources found in iterations `1..=iteration`.
    pub fn resolved_by(&self, iteration: usize) -> impl Iterator<Item = &ResolvedSource<T>> {
        self.resolved.iter().filter(move |r| r.iteration_found <= iteration)
    }
}

/// The complete two-loop localizer.
#[derive(Debug, Clone)]
pub struct Localizer<T> {
    pub filter: Filter<T>,
    pub label: LabelConfig<T>,
    pub clusterer: Clusterer<T>,
    pub min_support: T,
}

impl<T: Scalar> Localizer<T> {
    /// Runs iterations of {initialize → inner loop → cluster → label} until
    /// the checksum falls below `bg_thresh` or `max_iterations` is spent.
    /// The filter's random stream is derived from `seed`.
    pub fn run(
        &self,
        sweeps: &SweepSource<T>,
        seed: u64,
        mut observer: Option<&mut StepObserver<'_, T>>,
    ) -> Result<LocalizationResult<T>> {
        let steps = self.filter.cfg.steps_per_estimate;
        if steps == 0 {
            return Err(Error::Config("steps per estimate must be at least 1".into()));
        }
        if sweeps.dimension() != self.filter.env.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.filter.env.dimension,
                found: sweeps.dimension(),
                context: "measurements vs environment",
            });
        }
        self.label.validate(sweeps.sweep(0)?.len())?;
        let mut rng: ChaCha8Rng = stream_rng(seed, FILTER_STREAM);
        let scale = FeatureScale::new(&self.filter.env, &self.filter.cfg);
        let mut evidence = EvidenceLog::new(self.label.evidence);
        let mut resolved: Vec<ResolvedSource<T>> = Vec::new();
        let mut traces = Vec::new();
        let mut checksums = Vec::new();
        let mut timings = StageTimings::default();
        let started = Instant::now();
        let mut set = None;
        let mut t = 0u32;
        let mut terminated_by = Termination::MaxIterations;
        let mut bg_thresh = T::zero();

        for iteration in 1..=self.label.max_iterations {
            let clock = Instant::now();
            let mut particles = match (set.take(), self.label.warm_start) {
                (Some(s), true) => s,
                _ => self.filter.init_particles(&mut rng),
            };
            let diagnostics = self.filter.run_inner_loop(
                &mut particles,
                sweeps,
                t,
                steps,
                &resolved,
                &mut rng,
                observer.as_deref_mut(),
            )?;
            for k in 0..steps {
                evidence.push(sweeps.sweep(t + k as u32)?)?;
            }
            let first = t;
            t += steps as u32;
            timings.filter_s += clock.elapsed().as_secs_f64();

            let clock = Instant::now();
            let clusters = self.clusterer.cluster(&particles, &scale);
            let mut candidates = extract_candidates(&clusters, self.min_support);
            timings.clustering_s += clock.elapsed().as_secs_f64();

            let clock = Instant::now();
            let measurements = evidence.current();
            bg_thresh = self.label.bg_thresh_for(&measurements);
            let outcome = label_sources(&mut candidates, &measurements, &mut resolved, &self.label, iteration)?;
            timings.labeling_s += clock.elapsed().as_secs_f64();

            checksums.push(outcome.checksum);
            traces.push(IterationTrace {
                iteration,
                first_time_step: first,
                time_steps: steps,
                candidates,
                accepted: outcome.newly_resolved.len(),
                checksum: outcome.checksum,
                diagnostics,
            });
            set = Some(particles);
            if !outcome.rerun {
                terminated_by = Termination::Checksum;
                break;
            }
        }
        timings.total_s = started.elapsed().as_secs_f64();
        Ok(LocalizationResult {
            resolved,
            iterations_used: traces.len(),
            time_steps_used: t as usize,
            checksum_history: checksums,
            bg_thresh,
            terminated_by,
            iterations: traces,
            timings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SensorPose, SourceParams};
    use crate::scenario::{lawnmower_trajectory, Environment, Scenario};

    fn grid(sources: Vec<SourceParams<f64>>) -> (Vec<Measurement<f64>>, Scenario<f64>) {
        let env = Environment::square(2000.0);
        let traj = lawnmower_trajectory(&env, 10, 10, 100.0).unwrap();
        let scn = Scenario::new(env, sources, traj, 3).unwrap();
        (scn.generate_measurements().unwrap(), scn)
    }

    /// Counts replaced by the floor of their expected rate.
    fn noiseless(ms: &[Measurement<f64>], truth: &[SourceParams<f64>]) -> Vec<Measurement<f64>> {
        ms.iter()
            .map(|m| Measurement {
                count: expected_intensity(&m.pose, truth).unwrap().floor() as u64,
                ..m.clone()
            })
            .collect()
    }

    fn cfg() -> LabelConfig<f64> {
        LabelConfig::new(3, 200.0)
    }

    #[test]
    fn exact_candidate_scores_one() {
        let truth = SourceParams::new(vec![830.0, 1210.0], 110.0).unwrap();
        let (ms, _) = grid(vec![truth.clone()]);
        let ms = noiseless(&ms, std::slice::from_ref(&truth));
        assert_eq!(confidence(&truth, &ms, &[], &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn empty_space_candidate_scores_near_zero() {
        let truth = SourceParams::new(vec![500.0, 500.0], 150.0).unwrap();
        let (ms, _) = grid(vec![truth.clone()]);
        let ms = noiseless(&ms, &[truth]);
        let ghost = SourceParams::new(vec![1700.0, 1700.0], 150.0).unwrap();
        let c = confidence(&ghost, &ms, &[], &cfg()).unwrap();
        assert!(c > 0.0 && c < 1e-6, "{c}");
    }

    #[test]
    fn nearest_readings_break_ties_in_order() {
        let pose = |x: f64| SensorPose::new(vec![x, 0.0], 100.0, 1.0, 2.0).unwrap();
        let cand = SourceParams::new(vec![0.0, 0.0], 10.0).unwrap();
        let lam = expected_intensity(&pose(10.0), [&cand]).unwrap();
        // Two readings at equal distance; the earlier one is correct.
        let ms = vec![
            Measurement {
                pose: pose(-10.0),
                count: lam.floor() as u64,
                time_step: 0,
            },
            Measurement {
                pose: pose(10.0),
                count: 0,
                time_step: 0,
            },
        ];
        let c = confidence(&cand, &ms, &[], &LabelConfig::new(1, 200.0)).unwrap();
        assert_eq!(c, 1.0);
        assert!(confidence(&cand, &ms, &[], &LabelConfig::new(3, 200.0)).is_err());
    }

    #[test]
    fn validation_catches_bad_weights() {
        let mut c = cfg();
        c.omegas = vec![0.5, 0.5, 0.5];
        assert!(c.validate(100).is_err());
        assert!(cfg().validate(2).is_err());
        assert!(cfg().validate(100).is_ok());
    }

    #[test]
    fn no_candidates_and_quiet_residual_ends() {
        let (ms, _) = grid(vec![]);
        let mut resolved = Vec::new();
        let out = label_sources(&mut [], &ms, &mut resolved, &cfg(), 1).unwrap();
        assert!(!out.rerun);
        assert!(out.newly_resolved.is_empty());
    }

    #[test]
    fn resolving_the_truth_ends_the_loop() {
        let truth = SourceParams::new(vec![1100.0, 900.0], 120.0).unwrap();
        let mut ends = 0;
        for seed in 0..50 {
            let env = Environment::square(2000.0);
            let traj = lawnmower_trajectory(&env, 10, 10, 100.0).unwrap();
            let scn = Scenario::new(env, vec![truth.clone()], traj, seed).unwrap();
            // Evidence as the localizer sees it after one default iteration.
            let mut log = EvidenceLog::new(Evidence::History);
            for t in 0..3 {
                log.push(scn.sweep(t).unwrap()).unwrap();
            }
            let ms = log.current();
            let mut resolved = vec![ResolvedSource {
                params: truth.clone(),
                confidence: 1.0,
                iteration_found: 1,
            }];
            if !label_sources(&mut [], &ms, &mut resolved, &cfg(), 2).unwrap().rerun {
                ends += 1;
            }
        }
        assert!(ends >= 45, "{ends}/50");
    }

    #[test]
    fn duplicate_candidate_is_rejected_once_its_twin_is_accepted() {
        let truth = SourceParams::new(vec![1000.0, 1000.0], 100.0).unwrap();
        let (ms, _) = grid(vec![truth.clone()]);
        let ms = noiseless(&ms, std::slice::from_ref(&truth));
        let mut cands = vec![
            CandidateSource {
                params: truth.clone(),
                support: 0.3,
                confidence: None,
            },
            CandidateSource {
                params: truth.clone(),
                support: 0.2,
                confidence: None,
            },
        ];
        let mut resolved = Vec::new();
        let out = label_sources(&mut cands, &ms, &mut resolved, &cfg(), 1).unwrap();
        assert_eq!(out.newly_resolved.len(), 1);
        assert!(cands[1].confidence.unwrap() < 0.5);
        assert!(!out.rerun);
    }

    #[test]
    fn weak_candidates_are_skipped() {
        let truth = SourceParams::new(vec![1000.0, 1000.0], 3.0).unwrap();
        let (ms, _) = grid(vec![truth.clone()]);
        let mut cands = vec![CandidateSource {
            params: truth,
            support: 0.5,
            confidence: None,
        }];
        let mut resolved = Vec::new();
        label_sources(&mut cands, &ms, &mut resolved, &cfg(), 1).unwrap();
        assert!(cands[0].confidence.is_none());
        assert!(resolved.is_empty());
    }

    #[test]
    fn history_evidence_averages_counts() {
        let pose = SensorPose::new(vec![0.0, 0.0], 100.0, 1.0, 2.0).unwrap();
        let m = |c| {
            vec![Measurement {
                pose: pose.clone(),
                count: c,
                time_step: 0,
            }]
        };
        let mut log = EvidenceLog::new(Evidence::History);
        log.push(m(10)).unwrap();
        log.push(m(13)).unwrap();
        assert_eq!(log.current()[0].count, 12);
        let mut latest = EvidenceLog::new(Evidence::LatestSweep);
        latest.push(m(10)).unwrap();
        latest.push(m(13)).unwrap();
        assert_eq!(latest.current()[0].count, 13);
    }
}
