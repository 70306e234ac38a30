//! Inner loop: a particle filter over single-source hypotheses with
//! fusion-range selective updates.
//!
//! Every particle hypothesizes one source. A reading at pose `S` only touches
//! the particles whose ground-plane distance to `S` is at most the fusion
//! range `d`; their log-weights gain the mode-normalized Poisson log-likelihood
//! of the reading (floored), with already resolved sources folded into the
//! expected rate. The same subset is then resampled in place, keeping its total
//! mass, and every child is jittered. A small fraction of the whole set is
//! replaced by fresh uniform particles once per sweep so unexplored regions
//! keep a chance of being rediscovered.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::ResolvedSource;
use crate::model::{expected_intensity, log_poisson_ratio, Measurement, SensorPose, SourceParams};
use crate::scalar::{log_sum_exp, planar_dist2, Scalar};
use crate::scenario::{Environment, PriorPointSet, SweepSource};

pub const DEFAULT_PARTICLES: usize = 1000;
pub const DEFAULT_STRENGTH_WINDOW: [f64; 2] = [0.0, 200.0];
pub const DEFAULT_REPLACE_FRACTION: f64 = 0.05;
pub const DEFAULT_LOG_LIKELIHOOD_FLOOR: f64 = -50.0;
pub const DEFAULT_STEPS_PER_ESTIMATE: usize = 3;
/// Jitter standard deviation as a fraction of each parameter's range.
pub const JITTER_FRACTION: f64 = 0.02;
/// Smallest adaptive jitter as a fraction of the configured sigma.
pub const DEFAULT_JITTER_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterSigmas<T> {
    /// Per-axis position standard deviation (cm).
    pub position: Vec<T>,
    pub strength: T,
    pub dipole: T,
}

/// How resampled children are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum JitterMode<T> {
    /// Always the configured sigmas.
    Fixed,
    /// Kernel-smoothing jitter: per parameter, the spread of the drawn parents
    /// times the rule-of-thumb bandwidth factor, capped by the configured
    /// sigma and floored at `floor` times it.
    Adaptive { floor: T },
}

/// When the reweight/resample cycle runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Reweight and resample the fusion set of each reading as it arrives.
    #[default]
    PerMeasurement,
    /// Reweight with every reading of a sweep, then resample once over the
    /// union of the touched particles.
    PerSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig<T> {
    pub n_particles: usize,
    pub fusion_range: T,
    pub jitter: JitterSigmas<T>,
    pub replace_fraction: T,
    pub strength_window: [T; 2],
    /// Particles carry a dipole moment with components in `[-max, max]` when set.
    pub dipole_max: Option<T>,
    pub steps_per_estimate: usize,
    pub update_mode: UpdateMode,
    pub jitter_mode: JitterMode<T>,
    pub log_likelihood_floor: T,
}

impl<T: Scalar> FilterConfig<T> {
    /// Defaults scaled to an environment surveyed at the given pose spacing.
    pub fn for_environment(env: &Environment<T>, pitch: T) -> Self {
        let window = [T::lit(DEFAULT_STRENGTH_WINDOW[0]), T::lit(DEFAULT_STRENGTH_WINDOW[1])];
        let frac = T::lit(JITTER_FRACTION);
        Self {
            n_particles: DEFAULT_PARTICLES,
            fusion_range: T::lit(2.0) * pitch,
            jitter: JitterSigmas {
                position: (0..env.dimension).map(|a| env.extent(a) * frac).collect(),
                strength: (window[1] - window[0]) * frac,
                dipole: T::zero(),
            },
            replace_fraction: T::lit(DEFAULT_REPLACE_FRACTION),
            strength_window: window,
            dipole_max: None,
            steps_per_estimate: DEFAULT_STEPS_PER_ESTIMATE,
            update_mode: UpdateMode::PerMeasurement,
            jitter_mode: JitterMode::Adaptive {
                floor: T::lit(DEFAULT_JITTER_FLOOR),
            },
            log_likelihood_floor: T::lit(DEFAULT_LOG_LIKELIHOOD_FLOOR),
        }
    }

    /// Enables dipole estimation with components in `[-max, max]`.
    pub fn with_dipole(mut self, max: T) -> Self {
        self.dipole_max = Some(max);
        self.jitter.dipole = T::lit(2.0) * max * T::lit(JITTER_FRACTION);
        self
    }

    pub fn validate(&self, env: &Environment<T>) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_particles < 100 {
            return bad(format!("n_particles must be at least 100, got {}", self.n_particles));
        }
        if !(self.fusion_range > T::zero()) {
            return bad(format!("fusion range must be positive, got {}", self.fusion_range));
        }
        if !(self.replace_fraction >= T::zero() && self.replace_fraction <= T::lit(0.2)) {
            return bad(format!(
                "replace fraction must lie in [0, 0.2], got {}",
                self.replace_fraction
            ));
        }
        let [lo, hi] = self.strength_window;
        if !(lo >= T::zero() && lo < hi) {
            return bad(format!("strength window [{lo}, {hi}] is invalid"));
        }
        if self.jitter.position.len() != env.dimension {
            return Err(Error::DimensionMismatch {
                expected: env.dimension,
                found: self.jitter.position.len(),
                context: "position jitter",
            });
        }
        let sigmas = self
            .jitter
            .position
            .iter()
            .chain([&self.jitter.strength, &self.jitter.dipole]);
        if sigmas.into_iter().any(|s| !(*s >= T::zero())) {
            return bad("jitter sigmas must be non-negative".into());
        }
        if let Some(m) = self.dipole_max {
            if !(m > T::zero()) {
                return bad(format!("dipole window must be positive, got {m}"));
            }
        }
        if !(self.log_likelihood_floor < T::zero()) {
            return bad("log-likelihood floor must be negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    pub params: SourceParams<T>,
    /// Lineage tag; resampled children inherit it.
    pub id: u64,
    pub log_weight: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet<T> {
    pub particles: Vec<Particle<T>>,
    pub next_id: u64,
}

impl<T: Scalar> ParticleSet<T> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Rescales log-weights so the linear weights sum to one.
    pub fn normalize(&mut self) {
        let total = log_sum_exp(self.particles.iter().map(|p| p.log_weight));
        if total.is_finite() {
            for p in &mut self.particles {
                p.log_weight = p.log_weight - total;
            }
        } else {
            let uniform = -T::lit(self.particles.len() as f64).ln();
            for p in &mut self.particles {
                p.log_weight = uniform;
            }
        }
    }

    /// Linear weights normalized to unit sum. The normalizer is summed in
    /// sorted order so the result does not depend on particle order.
    pub fn weights(&self) -> Vec<T> {
        let mut logs: Vec<T> = self.particles.iter().map(|p| p.log_weight).collect();
        logs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let total = log_sum_exp(logs);
        self.particles.iter().map(|p| (p.log_weight - total).exp()).collect()
    }

    pub fn effective_sample_size(&self) -> T {
        let w = self.weights();
        T::one() / w.iter().map(|x| *x * *x).sum::<T>()
    }

    /// Shannon entropy of the normalized weights (nats).
    pub fn entropy(&self) -> T {
        self.weights()
            .iter()
            .filter(|w| **w > T::zero())
            .map(|w| -*w * w.ln())
            .sum()
    }

    pub fn weighted_mean_position(&self) -> Vec<T> {
        let w = self.weights();
        let dim = self.particles[0].params.dim();
        (0..dim)
            .map(|a| {
                self.particles
                    .iter()
                    .zip(&w)
                    .map(|(p, w)| p.params.position[a] * *w)
                    .sum()
            })
            .collect()
    }
}

/// Indices of particles within ground-plane distance `d` of the pose (closed ball).
pub fn fusion_set<T: Scalar>(set: &ParticleSet<T>, pose: &SensorPose<T>, d: T) -> Vec<usize> {
    let d2 = d * d;
    set.particles
        .iter()
        .enumerate()
        .filter(|(_, p)| planar_dist2(&pose.position, &p.params.position) <= d2)
        .map(|(i, _)| i)
        .collect()
}

/// Log of the total linear weight held by `subset`.
pub fn subset_log_mass<T: Scalar>(set: &ParticleSet<T>, subset: &[usize]) -> T {
    log_sum_exp(subset.iter().map(|&i| set.particles[i].log_weight).collect::<Vec<_>>())
}

/// A reweighted fusion set and the log-mass it held beforehand. Resampling
/// hands that mass back to the subset, so a reading redistributes weight among
/// the hypotheses it can see but never moves weight across the rest of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionUpdate<T> {
    pub subset: Vec<usize>,
    pub prior_log_mass: T,
}

/// Residual count mass: `Σ_i m(S_i) − I(S_i, resolved)`.
pub fn checksum<T: Scalar>(measurements: &[Measurement<T>], resolved: &[ResolvedSource<T>]) -> Result<T> {
    let mut total = T::zero();
    for m in measurements {
        let rate = expected_intensity(&m.pose, resolved.iter().map(|r| &r.params))?;
        total = total + T::lit(m.count as f64) - rate;
    }
    Ok(total)
}

/// Per-time-step health of the particle cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics<T> {
    pub time_step: u32,
    pub effective_sample_size: T,
    pub entropy: T,
}

/// Called after each processed time step with `(time_step, last measurement
/// index, particles)`.
pub type StepObserver<'a, T> = dyn FnMut(u32, usize, &ParticleSet<T>) + 'a;

/// Particle filter bound to one environment and configuration.
#[derive(Debug, Clone)]
pub struct Filter<T> {
    pub env: Environment<T>,
    pub cfg: FilterConfig<T>,
    pub prior: Option<PriorPointSet<T>>,
}

fn gauss<T: Scalar, R: Rng + ?Sized>(rng: &mut R, sigma: T) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z) * sigma
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: T, hi: T) -> T {
    lo + (hi - lo) * T::lit(rng.random::<f64>())
}

impl<T: Scalar> Filter<T> {
    pub fn new(env: Environment<T>, cfg: FilterConfig<T>, prior: Option<PriorPointSet<T>>) -> Result<Self> {
        env.validate()?;
        cfg.validate(&env)?;
        if let Some(p) = &prior {
            if p.dim() != env.dimension {
                return Err(Error::DimensionMismatch {
                    expected: env.dimension,
                    found: p.dim(),
                    context: "prior points vs environment",
                });
            }
        }
        Ok(Self { env, cfg, prior })
    }

    /// One draw from the initialization distribution.
    fn random_params(&self, rng: &mut ChaCha8Rng) -> SourceParams<T> {
        let position = match &self.prior {
            Some(prior) => {
                let mut p = prior.points[prior.draw_index(rng)].clone();
                for (x, s) in p.iter_mut().zip(&self.cfg.jitter.position) {
                    *x = *x + gauss(rng, *s);
                }
                self.env.clamp(&mut p);
                p
            }
            None => self.env.uniform_point(rng),
        };
        let [lo, hi] = self.cfg.strength_window;
        let strength = uniform(rng, lo, hi);
        let dipole = self
            .cfg
            .dipole_max
            .map(|m| (0..self.env.dimension).map(|_| uniform(rng, -m, m)).collect());
        SourceParams {
            position,
            strength,
            dipole,
        }
    }

    /// `n_particles` equally weighted particles with ids `0..n`. Positions come
    /// from the prior point set (plus positional jitter) when one is attached,
    /// otherwise uniformly from the bounds; strengths are uniform in the window.
    pub fn init_particles(&self, rng: &mut ChaCha8Rng) -> ParticleSet<T> {
        let n = self.cfg.n_particles;
        let w = -T::lit(n as f64).ln();
        let particles = (0..n)
            .map(|i| Particle {
                params: self.random_params(rng),
                id: i as u64,
                log_weight: w,
            })
            .collect();
        ParticleSet {
            particles,
            next_id: n as u64,
        }
    }

    fn log_factor(&self, particle: &SourceParams<T>, m: &Measurement<T>, resolved: &[ResolvedSource<T>]) -> Result<T> {
        let rate = expected_intensity(
            &m.pose,
            std::iter::once(particle).chain(resolved.iter().map(|r| &r.params)),
        )?;
        Ok(log_poisson_ratio(m.count, rate)?.max(self.cfg.log_likelihood_floor))
    }

    /// Multiplies the weights of `subset` by the floored likelihood of `m`.
    /// Particles outside `subset` are left untouched; nothing is normalized.
    pub fn reweight_subset(
        &self,
        set: &mut ParticleSet<T>,
        subset: &[usize],
        m: &Measurement<T>,
        resolved: &[ResolvedSource<T>],
    ) -> Result<()> {
        for &i in subset {
            let p = &mut set.particles[i];
            p.log_weight = p.log_weight + self.log_factor(&p.params, m, resolved)?;
        }
        Ok(())
    }

    /// Reweights the fusion set of `m` and returns it with the log-mass it
    /// held before the update.
    pub fn reweight(
        &self,
        set: &mut ParticleSet<T>,
        m: &Measurement<T>,
        resolved: &[ResolvedSource<T>],
    ) -> Result<FusionUpdate<T>> {
        let subset = fusion_set(set, &m.pose, self.cfg.fusion_range);
        let prior_log_mass = subset_log_mass(set, &subset);
        self.reweight_subset(set, &subset, m, resolved)?;
        Ok(FusionUpdate { subset, prior_log_mass })
    }

    fn jitter(&self, params: &mut SourceParams<T>, sigmas: &JitterSigmas<T>, rng: &mut ChaCha8Rng) {
        for (x, s) in params.position.iter_mut().zip(&sigmas.position) {
            *x = *x + gauss(rng, *s);
        }
        self.env.clamp(&mut params.position);
        params.strength = (params.strength + gauss(rng, sigmas.strength)).max(T::zero());
        if let Some(d) = params.dipole.as_mut() {
            for x in d.iter_mut() {
                *x = *x + gauss(rng, sigmas.dipole);
            }
        }
    }

    /// Systematic resampling inside `subset`, parents drawn in proportion to
    /// their current weights. Children take the subset's slots, inherit their
    /// parent's id, share `log_mass` equally and are jittered. The rest of the
    /// set is not touched and no global normalization happens here.
    pub fn resample_subset(&self, set: &mut ParticleSet<T>, subset: &[usize], log_mass: T, rng: &mut ChaCha8Rng) {
        if subset.is_empty() {
            return;
        }
        let logs: Vec<T> = subset.iter().map(|&i| set.particles[i].log_weight).collect();
        let mass = log_sum_exp(logs.iter().copied());
        let n = subset.len();
        if !mass.is_finite() || !log_mass.is_finite() {
            // Degenerate subset: start it over from scratch.
            let w = -T::lit(set.len() as f64).ln();
            for &i in subset {
                let id = set.next_id;
                set.next_id += 1;
                set.particles[i] = Particle {
                    params: self.random_params(rng),
                    id,
                    log_weight: w,
                };
            }
            return;
        }
        let parents: Vec<Particle<T>> = subset.iter().map(|&i| set.particles[i].clone()).collect();
        let child_weight = log_mass - T::lit(n as f64).ln();
        let step = 1.0 / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cumulative = 0.0f64;
        let mut parent = 0usize;
        let probs: Vec<f64> = logs.iter().map(|l| (*l - mass).as_f64().exp()).collect();
        let mut drawn = Vec::with_capacity(n);
        for _ in 0..n {
            while parent + 1 < n && cumulative + probs[parent] < u {
                cumulative += probs[parent];
                parent += 1;
            }
            drawn.push(parent);
            u += step;
        }
        let sigmas = self.jitter_for(&parents, &drawn);
        for (&slot, &p) in subset.iter().zip(&drawn) {
            let mut child = parents[p].clone();
            self.jitter(&mut child.params, &sigmas, rng);
            child.log_weight = child_weight;
            set.particles[slot] = child;
        }
    }

    /// Jitter sigmas for children drawn from `parents[drawn[..]]`.
    fn jitter_for(&self, parents: &[Particle<T>], drawn: &[usize]) -> JitterSigmas<T> {
        let cfg = &self.cfg.jitter;
        let JitterMode::Adaptive { floor } = self.cfg.jitter_mode else {
            return cfg.clone();
        };
        let n = drawn.len();
        let first = &parents[drawn[0]].params;
        let d = first.dim() + 1 + first.dipole.as_ref().map_or(0, |v| v.len());
        // Silverman's rule-of-thumb factor for a Gaussian kernel in d dimensions.
        let factor = T::lit((4.0 / (n as f64 * (d as f64 + 2.0))).powf(1.0 / (d as f64 + 4.0)));
        let spread = |get: &dyn Fn(&SourceParams<T>) -> T| -> T {
            let nn = T::lit(n as f64);
            let mean = drawn.iter().map(|&i| get(&parents[i].params)).sum::<T>() / nn;
            let var = drawn
                .iter()
                .map(|&i| {
                    let e = get(&parents[i].params) - mean;
                    e * e
                })
                .sum::<T>()
                / nn;
            var.sqrt()
        };
        let pick = |sd: T, cap: T| (factor * sd).min(cap).max(floor * cap);
        JitterSigmas {
            position: cfg
                .position
                .iter()
                .enumerate()
                .map(|(a, &cap)| pick(spread(&|p| p.position[a]), cap))
                .collect(),
            strength: pick(spread(&|p| p.strength), cfg.strength),
            dipole: match &first.dipole {
                Some(v) => {
                    // One shared sigma: the largest component spread.
                    let sd = (0..v.len())
                        .map(|a| spread(&|p| p.dipole.as_ref().map_or(T::zero(), |v| v[a])))
                        .fold(T::zero(), |m, x| m.max(x));
                    pick(sd, cfg.dipole)
                }
                None => cfg.dipole,
            },
        }
    }

    /// Replaces `round(fraction · N)` uniformly chosen particles with fresh
    /// draws from the initialization distribution (uniform, or the prior when
    /// one is attached), with new ids and weight `1/N`. Returns how many were
    /// replaced.
    pub fn replace_random(&self, set: &mut ParticleSet<T>, fraction: T, rng: &mut ChaCha8Rng) -> usize {
        let n = set.len();
        let count = ((fraction * T::lit(n as f64)).round().as_f64() as usize).min(n);
        if count == 0 {
            return 0;
        }
        let w = -T::lit(n as f64).ln();
        let mut picked = sample(rng, n, count).into_vec();
        picked.sort_unstable();
        for i in picked {
            let id = set.next_id;
            set.next_id += 1;
            set.particles[i] = Particle {
                params: self.random_params(rng),
                id,
                log_weight: w,
            };
        }
        count
    }

    /// Full resampling step: subset resampling back to the subset's
    /// pre-update mass, random replacement of `replace_fraction` of the set,
    /// then global renormalization.
    pub fn resample(&self, set: &mut ParticleSet<T>, update: &FusionUpdate<T>, rng: &mut ChaCha8Rng) -> Result<()> {
        if update.subset.is_empty() {
            return Err(Error::Config("cannot resample an empty subset".into()));
        }
        self.resample_subset(set, &update.subset, update.prior_log_mass, rng);
        self.replace_random(set, self.cfg.replace_fraction, rng);
        set.normalize();
        Ok(())
    }

    /// Processes `steps` sweeps starting at global time step `first_step`.
    ///
    /// Within a sweep, readings are visited in trajectory order. Random
    /// replacement happens at the start of every sweep but the very first of a
    /// fresh run, so the final sweep always refines the replacements.
    #[allow(clippy::too_many_arguments)]
    pub fn run_inner_loop(
        &self,
        set: &mut ParticleSet<T>,
        sweeps: &SweepSource<T>,
        first_step: u32,
        steps: usize,
        resolved: &[ResolvedSource<T>],
        rng: &mut ChaCha8Rng,
        mut observer: Option<&mut StepObserver<'_, T>>,
    ) -> Result<Vec<StepDiagnostics<T>>> {
        let mut diagnostics = Vec::with_capacity(steps);
        for k in 0..steps {
            let t = first_step + k as u32;
            if k > 0 {
                self.replace_random(set, self.cfg.replace_fraction, rng);
                set.normalize();
            }
            let sweep = sweeps.sweep(t)?;
            match self.cfg.update_mode {
                UpdateMode::PerMeasurement => {
                    for m in &sweep {
                        let update = self.reweight(set, m, resolved)?;
                        if !update.subset.is_empty() {
                            self.resample_subset(set, &update.subset, update.prior_log_mass, rng);
                            set.normalize();
                        }
                    }
                }
                UpdateMode::PerSweep => {
                    let mut touched = vec![false; set.len()];
                    for m in &sweep {
                        for i in fusion_set(set, &m.pose, self.cfg.fusion_range) {
                            touched[i] = true;
                        }
                    }
                    let union: Vec<usize> = (0..set.len()).filter(|&i| touched[i]).collect();
                    let prior = subset_log_mass(set, &union);
                    for m in &sweep {
                        self.reweight(set, m, resolved)?;
                    }
                    self.resample_subset(set, &union, prior, rng);
                    set.normalize();
                }
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs(t, sweep.len().saturating_sub(1), set);
            }
            diagnostics.push(StepDiagnostics {
                time_step: t,
                effective_sample_size: set.effective_sample_size(),
                entropy: set.entropy(),
            });
        }
        Ok(diagnostics)
    }
}
