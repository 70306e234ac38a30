//! Scoring estimates against ground truth.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{expected_intensity, log_poisson_ratio, Measurement, SourceParams};
use crate::scalar::{dist2, Scalar};
use crate::scenario::Environment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport<T> {
    /// `(estimate index, truth index, distance)`, ordered by estimate index.
    pub pairs: Vec<(usize, usize, T)>,
    pub unmatched_estimates: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
    pub match_radius: T,
    pub n_estimates: usize,
    pub n_truths: usize,
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// row/column potentials). Returns `assignment[row] = column`.
pub fn hungarian<T: Scalar>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is the virtual start.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = inf;
            let mut col1 = 0usize;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let reduced = cost[r - 1][c - 1] - u[r] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] = u[owner[c]] + delta;
                    v[c] = v[c] - delta;
                } else {
                    minv[c] = minv[c] - delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for c in 1..=n {
        if owner[c] > 0 {
            assignment[owner[c] - 1] = c - 1;
        }
    }
    assignment
}

/// One-to-one matching of estimates to truths by position. Among all
/// matchings that only use pairs within `match_radius`, picks one with the
/// most pairs and, among those, the smallest total distance.
pub fn match_sources<T: Scalar>(
    estimates: &[SourceParams<T>],
    truth: &[SourceParams<T>],
    match_radius: T,
) -> MatchReport<T> {
    let (ne, nt) = (estimates.len(), truth.len());
    let n = ne.max(nt);
    let dist: Vec<Vec<T>> = estimates
        .iter()
        .map(|e| truth.iter().map(|t| dist2(&e.position, &t.position).sqrt()).collect())
        .collect();
    let feasible = |i: usize, j: usize| i < ne && j < nt && dist[i][j] <= match_radius;
    // Any infeasible slot must cost more than every feasible assignment combined.
    let total: T = (0..ne)
        .flat_map(|i| (0..nt).map(move |j| (i, j)))
        .filter(|&(i, j)| feasible(i, j))
        .map(|(i, j)| dist[i][j])
        .sum();
    let big = T::lit(2.0) * total + T::one();
    let cost: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if feasible(i, j) { dist[i][j] } else { big }).collect())
        .collect();
    let assignment = hungarian(&cost);
    let mut pairs = Vec::new();
    let mut matched_truth = vec![false; nt];
    let mut unmatched_estimates = Vec::new();
    for i in 0..ne {
        let j = assignment[i];
        if feasible(i, j) {
            pairs.push((i, j, dist[i][j]));
            matched_truth[j] = true;
        } else {
            unmatched_estimates.push(i);
        }
    }
    MatchReport {
        pairs,
        unmatched_estimates,
        unmatched_truths: (0..nt).filter(|&j| !matched_truth[j]).collect(),
        match_radius,
        n_estimates: ne,
        n_truths: nt,
    }
}

/// Precision, recall and F1 of a matching. Both empty counts as perfect.
pub fn prf1<T: Scalar>(report: &MatchReport<T>) -> (f64, f64, f64) {
    let tp = report.pairs.len() as f64;
    let precision = match report.n_estimates {
        0 if report.n_truths == 0 => 1.0,
        0 => 0.0,
        n => tp / n as f64,
    };
    let recall = match report.n_truths {
        0 if report.n_estimates == 0 => 1.0,
        0 => 0.0,
        n => tp / n as f64,
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Mean over matched pairs of `√(|Δpos|² + Δstr²)`. With `scales = (position,
/// strength)` each difference is divided by its scale first. `None` when
/// nothing matched.
pub fn localization_error<T: Scalar>(
    report: &MatchReport<T>,
    estimates: &[SourceParams<T>],
    truth: &[SourceParams<T>],
    scales: Option<(T, T)>,
) -> Option<T> {
    if report.pairs.is_empty() {
        return None;
    }
    let (ps, ss) = scales.unwrap_or((T::one(), T::one()));
    let sum: T = report
        .pairs
        .iter()
        .map(|&(i, j, _)| {
            let dp2 = dist2(&estimates[i].position, &truth[j].position) / (ps * ps);
            let ds = (estimates[i].strength - truth[j].strength) / ss;
            (dp2 + ds * ds).sqrt()
        })
        .sum();
    Some(sum / T::lit(report.pairs.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub eps_l: Option<f64>,
    pub eps_l_normalized: Option<f64>,
    pub iterations: f64,
    pub time_steps: usize,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn from_match<T: Scalar>(
        report: &MatchReport<T>,
        estimates: &[SourceParams<T>],
        truth: &[SourceParams<T>],
        scales: (T, T),
        iterations: usize,
        time_steps: usize,
        wall_seconds: f64,
    ) -> Self {
        let (precision, recall, f1) = prf1(report);
        Self {
            precision,
            recall,
            f1,
            eps_l: localization_error(report, estimates, truth, None).map(Scalar::as_f64),
            eps_l_normalized: localization_error(report, estimates, truth, Some(scales)).map(Scalar::as_f64),
            iterations: iterations as f64,
            time_steps,
            wall_seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

/// Mean and population standard deviation of every summary field.
/// Localization errors average only the runs that produced one and are
/// absent when none did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub runs: usize,
    pub precision: Stat,
    pub recall: Stat,
    pub f1: Stat,
    pub eps_l: Option<Stat>,
    pub eps_l_normalized: Option<Stat>,
    pub iterations: Stat,
    pub time_steps: Stat,
    pub wall_seconds: Stat,
}

pub fn aggregate_runs(summaries: &[RunSummary]) -> Option<AggregateRow> {
    if summaries.is_empty() {
        return None;
    }
    let col =
        |f: &dyn Fn(&RunSummary) -> f64| -> Stat { Stat::of(&summaries.iter().map(f).collect::<Vec<_>>()).unwrap() };
    let opt = |f: &dyn Fn(&RunSummary) -> Option<f64>| -> Option<Stat> {
        Stat::of(&summaries.iter().filter_map(f).collect::<Vec<_>>())
    };
    Some(AggregateRow {
        runs: summaries.len(),
        precision: col(&|s| s.precision),
        recall: col(&|s| s.recall),
        f1: col(&|s| s.f1),
        eps_l: opt(&|s| s.eps_l),
        eps_l_normalized: opt(&|s| s.eps_l_normalized),
        iterations: col(&|s| s.iterations),
        time_steps: col(&|s| s.time_steps as f64),
        wall_seconds: col(&|s| s.wall_seconds),
    })
}

pub const TABLE_HEADER: [&str; 11] = [
    "config",
    "time_steps",
    "mean_iterations",
    "loc_error",
    "precision",
    "recall",
    "f1",
    "loc_error_normalized",
    "f1_std",
    "runs",
    "failed_runs",
];

/// Writes Table-I-shaped rows. Absent localization errors are left empty.
pub fn write_table<W: Write>(out: W, rows: &[(String, usize, Option<AggregateRow>, usize)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    let f = |x: f64| format!("{x:.4}");
    for (config, steps, row, failed) in rows {
        let mut rec = vec![config.clone(), steps.to_string()];
        match row {
            Some(r) => {
                rec.push(f(r.iterations.mean));
                rec.push(r.eps_l.map(|s| f(s.mean)).unwrap_or_default());
                rec.push(f(r.precision.mean));
                rec.push(f(r.recall.mean));
                rec.push(f(r.f1.mean));
                rec.push(r.eps_l_normalized.map(|s| f(s.mean)).unwrap_or_default());
                rec.push(f(r.f1.std));
                rec.push(r.runs.to_string());
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 7).chain([String::from("0")])),
        }
        rec.push(failed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A regular grid over single-source hypotheses: `n` cell centres per
/// position axis and `n` over the strength window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisGrid<T> {
    pub bounds: Vec<[T; 2]>,
    pub strength_window: [T; 2],
    pub n: usize,
}

/// Best grid hypothesis and its cell indices (position axes, then strength).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum<T> {
    pub params: SourceParams<T>,
    pub cell: Vec<usize>,
    pub log_likelihood: T,
}

impl<T: Scalar> HypothesisGrid<T> {
    pub fn new(env: &Environment<T>, strength_window: [T; 2], n: usize) -> Self {
        Self {
            bounds: env.bounds.clone(),
            strength_window,
            n,
        }
    }

    fn axes(&self) -> Vec<[T; 2]> {
        let mut axes = self.bounds.clone();
        axes.push(self.strength_window);
        axes
    }

    fn centre(&self, axis: [T; 2], i: usize) -> T {
        let width = (axis[1] - axis[0]) / T::lit(self.n as f64);
        axis[0] + width * (T::lit(i as f64) + T::lit(0.5))
    }

    /// Cell indices containing `params`; coordinates outside the grid land in
    /// the nearest edge cell.
    pub fn cell_of(&self, params: &SourceParams<T>) -> Vec<usize> {
        let coords = params.position.iter().copied().chain(std::iter::once(params.strength));
        self.axes()
            .into_iter()
            .zip(coords)
            .map(|(axis, x)| {
                let width = (axis[1] - axis[0]) / T::lit(self.n as f64);
                let i = ((x - axis[0]) / width).floor().as_f64();
                i.clamp(0.0, (self.n - 1) as f64) as usize
            })
            .collect()
    }

    /// Exhaustive maximum-likelihood search: every cell centre is scored by
    /// the unfloored sum of mode-normalized Poisson log-likelihoods over all
    /// measurements. Ties keep the first cell in row-major order.
    pub fn map_estimate(&self, measurements: &[Measurement<T>]) -> Result<GridOptimum<T>> {
        let axes = self.axes();
        let total = self.n.pow(axes.len() as u32);
        let mut best: Option<GridOptimum<T>> = None;
        for flat in 0..total {
            let mut rest = flat;
            let mut cell = vec![0; axes.len()];
            for slot in cell.iter_mut().rev() {
                *slot = rest % self.n;
                rest /= self.n;
            }
            let coords: Vec<T> = axes.iter().zip(&cell).map(|(&a, &i)| self.centre(a, i)).collect();
            let (strength, position) = coords.split_last().expect("grid has a strength axis");
            let params = SourceParams {
                position: position.to_vec(),
                strength: *strength,
                dipole: None,
            };
            let mut ll = T::zero();
            for m in measurements {
                ll = ll + log_poisson_ratio(m.count, expected_intensity(&m.pose, std::iter::once(&params))?)?;
            }
            if best.as_ref().is_none_or(|b| ll > b.log_likelihood) {
                best = Some(GridOptimum {
                    params,
                    cell,
                    log_likelihood: ll,
                });
            }
        }
        Ok(best.expect("grid is nonempty"))
    }
}

/// Largest per-axis index difference between two cells.
pub fn cell_distance(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn at(x: f64, y: f64) -> SourceParams<f64> {
        SourceParams::new(vec![x, y], 50.0).unwrap()
    }

    /// Exhaustive search over injections: maximize pairs, then minimize distance.
    fn brute_force(est: &[SourceParams<f64>], truth: &[SourceParams<f64>], r: f64) -> (usize, f64) {
        #[allow(clippy::too_many_arguments)]
        fn go(
            i: usize,
            est: &[SourceParams<f64>],
            truth: &[SourceParams<f64>],
            r: f64,
            used: &mut Vec<bool>,
            pairs: usize,
            cost: f64,
            best: &mut (usize, f64),
        ) {
            if i == est.len() {
                if pairs > best.0 || (pairs == best.0 && cost < best.1) {
                    *best = (pairs, cost);
                }
                return;
            }
            go(i + 1, est, truth, r, used, pairs, cost, best);
            for j in 0..truth.len() {
                let d = dist2(&est[i].position, &truth[j].position).sqrt();
                if !used[j] && d <= r {
                    used[j] = true;
                    go(i + 1, est, truth, r, used, pairs + 1, cost + d, best);
                    used[j] = false;
                }
            }
        }
        let mut best = (0, f64::INFINITY);
        go(0, est, truth, r, &mut vec![false; truth.len()], 0, 0.0, &mut best);
        if best.0 == 0 {
            best.1 = 0.0;
        }
        best
    }

    #[test]
    fn identical_sets_match_at_zero() {
        let t = vec![at(0.0, 0.0), at(100.0, 0.0), at(0.0, 300.0)];
        let r = match_sources(&t, &t, 50.0);
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pairs.iter().all(|p| p.0 == p.1 && p.2 == 0.0));
        assert_eq!(prf1(&r), (1.0, 1.0, 1.0));
        assert_eq!(localization_error(&r, &t, &t, None), Some(0.0));
    }

    #[test]
    fn nothing_within_radius() {
        let r = match_sources(&[at(0.0, 0.0)], &[at(500.0, 0.0)], 100.0);
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_estimates, vec![0]);
        assert_eq!(r.unmatched_truths, vec![0]);
        assert_eq!(localization_error(&r, &[at(0.0, 0.0)], &[at(500.0, 0.0)], None), None);
        assert_eq!(prf1(&r), (0.0, 0.0, 0.0));
    }

    #[test]
    fn crossing_distances_pick_global_optimum() {
        // Greedy nearest-first would pair e0-t0 (dist 1) and strand e1.
        let est = vec![at(10.0, 0.0), at(0.0, 0.0), at(500.0, 500.0)];
        let truth = vec![at(11.0, 0.0), at(-8.0, 0.0)];
        let r = match_sources(&est, &truth, 10.0);
        assert_eq!(r.pairs.len(), 2);
        let cost: f64 = r.pairs.iter().map(|p| p.2).sum();
        assert_eq!((r.pairs.len(), cost), brute_force(&est, &truth, 10.0));
        assert_eq!(r.unmatched_estimates, vec![2]);
    }

    #[test]
    fn two_of_three_found() {
        let truth = vec![at(0.0, 0.0), at(100.0, 0.0), at(200.0, 0.0)];
        let est = vec![at(0.0, 0.0), at(100.0, 0.0)];
        let (p, r, f) = prf1(&match_sources(&est, &truth, 10.0));
        assert_eq!(p, 1.0);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!((f - 0.8).abs() < 1e-12);
    }

    #[test]
    fn empty_sets() {
        let r = match_sources::<f64>(&[], &[], 10.0);
        assert_eq!(prf1(&r), (1.0, 1.0, 1.0));
        let r = match_sources(&[at(0.0, 0.0)], &[], 10.0);
        assert_eq!(prf1(&r), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pythagorean_error() {
        let est = vec![at(3.0, 4.0)];
        let truth = vec![at(0.0, 0.0)];
        let r = match_sources(&est, &truth, 10.0);
        assert_eq!(localization_error(&r, &est, &truth, None), Some(5.0));
        assert_eq!(localization_error(&r, &est, &truth, Some((5.0, 1.0))), Some(1.0));
    }

    #[test]
    fn aggregation() {
        let s = RunSummary {
            precision: 1.0,
            recall: 0.5,
            f1: 2.0 / 3.0,
            eps_l: Some(2.0),
            eps_l_normalized: None,
            iterations: 1.0,
            time_steps: 3,
            wall_seconds: 0.1,
        };
        let row = aggregate_runs(&[s, s, s]).unwrap();
        assert_eq!(row.f1.mean, s.f1);
        assert_eq!(row.f1.std, 0.0);
        assert_eq!(row.eps_l.unwrap().mean, 2.0);
        assert!(row.eps_l_normalized.is_none());
        let mut two = s;
        two.iterations = 2.0;
        let row = aggregate_runs(&[s, s, two]).unwrap();
        assert!((row.iterations.mean - 4.0 / 3.0).abs() < 1e-12);
        assert!(aggregate_runs(&[]).is_none());
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn brute_force_agreement_on_random_instances() {
        let mut rng = stream_rng(99, 0);
        for _ in 0..1000 {
            let ne = rng.random_range(0..=6);
            let nt = rng.random_range(0..=6);
            let mut pt = || at(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
            let est: Vec<_> = (0..ne).map(|_| pt()).collect();
            let truth: Vec<_> = (0..nt).map(|_| pt()).collect();
            let radius = 300.0;
            let r = match_sources(&est, &truth, radius);
            let (pairs, cost) = brute_force(&est, &truth, radius);
            assert_eq!(r.pairs.len(), pairs);
            let got: f64 = r.pairs.iter().map(|p| p.2).sum();
            assert!((got - cost).abs() < 1e-9, "{got} vs {cost}");
            assert!(r.pairs.iter().all(|p| p.2 <= radius));
        }
    }

    fn grid_env() -> Environment<f64> {
        Environment::square(2000.0)
    }

    #[test]
    fn grid_cells_cover_the_box() {
        let g = HypothesisGrid::new(&grid_env(), [0.0, 200.0], 5);
        let p = SourceParams::new(vec![0.0, 1999.0], 200.0).unwrap();
        assert_eq!(g.cell_of(&p), vec![0, 4, 4]);
        let p = SourceParams::new(vec![799.9, 800.0], 40.0).unwrap();
        assert_eq!(g.cell_of(&p), vec![1, 2, 1]);
        assert_eq!(cell_distance(&[0, 4, 2], &[1, 2, 2]), 2);
    }

    #[test]
    fn grid_map_recovers_a_source_on_a_cell_centre() {
        let env = grid_env();
        let g = HypothesisGrid::new(&env, [0.0, 200.0], 5);
        let truth = SourceParams::new(vec![1000.0, 600.0], 100.0).unwrap();
        let traj = crate::scenario::lawnmower_trajectory(&env, 10, 10, 100.0).unwrap();
        let ms: Vec<Measurement<f64>> = traj
            .into_iter()
            .map(|pose| {
                let count = expected_intensity(&pose, std::iter::once(&truth)).unwrap().floor() as u64;
                Measurement {
                    pose,
                    count,
                    time_step: 0,
                }
            })
            .collect();
        let best = g.map_estimate(&ms).unwrap();
        assert_eq!(best.cell, vec![2, 1, 2]);
        assert_eq!(best.params.position, vec![1000.0, 600.0]);
        assert_eq!(best.log_likelihood, 0.0);
    }

    proptest! {
        #[test]
        fn swapping_roles_swaps_precision_and_recall(
            est in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 0..6),
            truth in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 0..6),
        ) {
            let e: Vec<_> = est.iter().map(|&(x, y)| at(x, y)).collect();
            let t: Vec<_> = truth.iter().map(|&(x, y)| at(x, y)).collect();
            let (p1, r1, f1) = prf1(&match_sources(&e, &t, 250.0));
            let (p2, r2, f2) = prf1(&match_sources(&t, &e, 250.0));
            prop_assert_eq!(p1, r2);
            prop_assert_eq!(r1, p2);
            prop_assert_eq!(f1, f2);
        }

        #[test]
        fn f1_invariant_under_relabeling(
            est in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 0..6),
            truth in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 0..6),
        ) {
            let e: Vec<_> = est.iter().map(|&(x, y)| at(x, y)).collect();
            let t: Vec<_> = truth.iter().map(|&(x, y)| at(x, y)).collect();
            let mut er = e.clone();
            er.reverse();
            let mut tr = t.clone();
            tr.rotate_left(t.len().min(1));
            let a = prf1(&match_sources(&e, &t, 250.0));
            let b = prf1(&match_sources(&er, &tr, 250.0));
            prop_assert_eq!(a, b);
        }
    }
}
