//! Candidate sources from the particle cloud.
//!
//! Particles are mapped to a unit-free feature space (each parameter divided by
//! its range) and grouped by one of three backends: weighted mean-shift,
//! single-linkage agglomeration, or lineage id. Each group becomes a candidate
//! at its weighted centroid.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::filter::{FilterConfig, ParticleSet};
use crate::model::SourceParams;
use crate::scalar::Scalar;
use crate::scenario::Environment;

pub const DEFAULT_BANDWIDTH: f64 = 0.05;
pub const DEFAULT_MERGE_DISTANCE: f64 = 0.08;
pub const DEFAULT_MIN_SUPPORT: f64 = 0.02;
pub const MEAN_SHIFT_TOL: f64 = 1e-4;
pub const MEAN_SHIFT_MAX_ITER: usize = 300;
/// The mean-shift kernel is cut off beyond this many bandwidths, where its
/// weight has fallen below e⁻⁸.
pub const KERNEL_CUTOFF: f64 = 4.0;

/// Divisors mapping source parameters to features: position axes, then
/// strength, then dipole components.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScale<T> {
    pub position: Vec<T>,
    pub strength: T,
    pub dipole: T,
}

impl<T: Scalar> FeatureScale<T> {
    pub fn new(env: &Environment<T>, cfg: &FilterConfig<T>) -> Self {
        let [lo, hi] = cfg.strength_window;
        Self {
            position: (0..env.dimension).map(|a| env.extent(a)).collect(),
            strength: hi - lo,
            dipole: cfg.dipole_max.map_or(T::one(), |m| T::lit(2.0) * m),
        }
    }

    pub fn features(&self, p: &SourceParams<T>) -> Vec<T> {
        let mut f: Vec<T> = p.position.iter().zip(&self.position).map(|(x, s)| *x / *s).collect();
        f.push(p.strength / self.strength);
        if let Some(d) = &p.dipole {
            f.extend(d.iter().map(|x| *x / self.dipole));
        }
        f
    }

    /// Number of feature dimensions for the given parameter layout.
    pub fn dims(&self, with_dipole: bool) -> usize {
        let d = self.position.len();
        d + 1 + if with_dipole { d } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<T> {
    /// Indices into the particle set, ascending.
    pub members: Vec<usize>,
    pub centroid: SourceParams<T>,
    pub total_weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSource<T> {
    pub params: SourceParams<T>,
    pub support: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<T>,
}

/// Weighted centroid of the given members, summed in the given order. Falls
/// back to the plain mean when every weight underflowed.
fn centroid<T: Scalar>(set: &ParticleSet<T>, weights: &[T], members: &[usize]) -> (SourceParams<T>, T) {
    let total: T = members.iter().map(|&i| weights[i]).sum();
    let uniform = !(total > T::zero());
    let norm = if uniform { T::lit(members.len() as f64) } else { total };
    let w = |i: usize| if uniform { T::one() } else { weights[i] };
    let first = &set.particles[members[0]].params;
    let avg = |get: &dyn Fn(&SourceParams<T>) -> T| -> T {
        members.iter().map(|&i| get(&set.particles[i].params) * w(i)).sum::<T>() / norm
    };
    let position = (0..first.dim()).map(|a| avg(&|p| p.position[a])).collect();
    let strength = avg(&|p| p.strength);
    let dipole = first.dipole.as_ref().map(|d| {
        (0..d.len())
            .map(|a| avg(&|p| p.dipole.as_ref().map_or(T::zero(), |v| v[a])))
            .collect()
    });
    (
        SourceParams {
            position,
            strength,
            dipole,
        },
        total,
    )
}

fn make_cluster<T: Scalar>(set: &ParticleSet<T>, weights: &[T], order: &[usize]) -> Cluster<T> {
    let (centroid, total_weight) = centroid(set, weights, order);
    let mut members = order.to_vec();
    members.sort_unstable();
    Cluster {
        members,
        centroid,
        total_weight,
    }
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Weighted mean-shift with a Gaussian kernel of per-dimension `bandwidths`
/// (in feature units). Every particle climbs to its mode; modes closer than
/// one bandwidth are merged. Particles are processed in a canonical order, so
/// the result does not depend on how the set is permuted.
pub fn mean_shift<T: Scalar>(
    set: &ParticleSet<T>,
    scale: &FeatureScale<T>,
    bandwidths: &[T],
    max_iter: usize,
    tol: T,
) -> Vec<Cluster<T>> {
    if set.is_empty() {
        return Vec::new();
    }
    let weights = set.weights();
    let feats: Vec<Vec<T>> = set.particles.iter().map(|p| scale.features(&p.params)).collect();
    let dims = feats[0].len();
    assert_eq!(bandwidths.len(), dims, "one bandwidth per feature dimension");

    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| {
        lex_cmp(&feats[a], &feats[b]).then(weights[a].partial_cmp(&weights[b]).unwrap_or(Ordering::Equal))
    });
    // Points pre-divided by the bandwidth so the kernel is isotropic.
    let pts: Vec<Vec<T>> = order
        .iter()
        .map(|&i| feats[i].iter().zip(bandwidths).map(|(x, h)| *x / *h).collect())
        .collect();
    let w: Vec<T> = order.iter().map(|&i| weights[i]).collect();
    let tol_scaled: Vec<T> = bandwidths.to_vec();
    let half = T::lit(0.5);

    // Bucket points on a grid of cutoff-sized cells over the leading feature
    // dimensions; a kernel evaluation only needs the adjacent cells.
    let cutoff = T::lit(KERNEL_CUTOFF);
    let cut2 = cutoff * cutoff;
    let gdims = dims.min(3);
    let cell_of = |p: &[T]| -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..gdims {
            c[a] = (p[a] / cutoff).floor().to_i64().unwrap_or(0);
        }
        c
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in pts.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }
    let mut offsets: Vec<[i64; 3]> = vec![[0; 3]];
    for a in 0..gdims {
        offsets = offsets
            .iter()
            .flat_map(|o| {
                (-1..=1).map(move |d| {
                    let mut o = *o;
                    o[a] = d;
                    o
                })
            })
            .collect();
    }

    let modes: Vec<Vec<T>> = pts
        .par_iter()
        .map(|start| {
            let mut x = start.clone();
            let mut next = vec![T::zero(); dims];
            for _ in 0..max_iter {
                next.iter_mut().for_each(|v| *v = T::zero());
                let mut denom = T::zero();
                let home = cell_of(&x);
                for off in &offsets {
                    let key = [home[0] + off[0], home[1] + off[1], home[2] + off[2]];
                    let Some(bucket) = grid.get(&key) else { continue };
                    for &j in bucket {
                        let p = &pts[j];
                        let d2: T = p.iter().zip(&x).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                        if d2 > cut2 {
                            continue;
                        }
                        let k = w[j] * (-half * d2).exp();
                        if k > T::zero() {
                            denom = denom + k;
                            for (n, a) in next.iter_mut().zip(p) {
                                *n = *n + k * *a;
                            }
                        }
                    }
                }
                if !(denom > T::zero()) {
                    break;
                }
                let mut shift2 = T::zero();
                for ((xi, ni), h) in x.iter_mut().zip(&next).zip(&tol_scaled) {
                    let v = *ni / denom;
                    let step = (v - *xi) * *h;
                    shift2 = shift2 + step * step;
                    *xi = v;
                }
                if shift2.sqrt() < tol {
                    break;
                }
            }
            x
        })
        .collect();

    // Greedy merge in canonical order; distances are in bandwidth units.
    let mut centers: Vec<Vec<T>> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, m) in modes.iter().enumerate() {
        let hit = centers
            .iter()
            .position(|c| c.iter().zip(m).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() <= T::one());
        match hit {
            Some(g) => groups[g].push(order[k]),
            None => {
                centers.push(m.clone());
                groups.push(vec![order[k]]);
            }
        }
    }
    groups.iter().map(|g| make_cluster(set, &weights, g)).collect()
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage agglomeration in feature space, stopped once no two clusters
/// are within `merge_distance`. Equivalent to the connected components of the
/// `≤ merge_distance` neighbour graph, found here with an all-pairs sweep.
pub fn ahc_cluster<T: Scalar>(set: &ParticleSet<T>, scale: &FeatureScale<T>, merge_distance: T) -> Vec<Cluster<T>> {
    let n = set.len();
    if n == 0 {
        return Vec::new();
    }
    let weights = set.weights();
    let feats: Vec<Vec<T>> = set.particles.iter().map(|p| scale.features(&p.params)).collect();
    let r2 = merge_distance * merge_distance;
    let mut ds = DisjointSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: T = feats[i].iter().zip(&feats[j]).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            if d2 <= r2 {
                ds.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = ds.find(i);
        groups.entry(root).or_default().push(i);
    }
    groups.values().map(|g| make_cluster(set, &weights, g)).collect()
}

/// One cluster per surviving lineage id, in ascending id order.
pub fn id_cluster<T: Scalar>(set: &ParticleSet<T>) -> Vec<Cluster<T>> {
    let weights = set.weights();
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, p) in set.particles.iter().enumerate() {
        groups.entry(p.id).or_default().push(i);
    }
    groups.values().map(|g| make_cluster(set, &weights, g)).collect()
}

/// Candidates from clusters with at least `min_support` weight, strongest first.
pub fn extract_candidates<T: Scalar>(clusters: &[Cluster<T>], min_support: T) -> Vec<CandidateSource<T>> {
    let mut out: Vec<CandidateSource<T>> = clusters
        .iter()
        .filter(|c| c.total_weight >= min_support && c.total_weight > T::zero())
        .map(|c| CandidateSource {
            params: c.centroid.clone(),
            support: c.total_weight,
            confidence: None,
        })
        .collect();
    out.sort_by(|a, b| b.support.partial_cmp(&a.support).unwrap_or(Ordering::Equal));
    out
}

/// Clustering backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clusterer<T> {
    MeanShift { bandwidth: T },
    Ahc { merge_distance: T },
    Id,
}

impl<T: Scalar> Default for Clusterer<T> {
    fn default() -> Self {
        Clusterer::MeanShift {
            bandwidth: T::lit(DEFAULT_BANDWIDTH),
        }
    }
}

impl<T: Scalar> Clusterer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Clusterer::MeanShift { .. } => "meanshift",
            Clusterer::Ahc { .. } => "ahc",
            Clusterer::Id => "id",
        }
    }

    pub fn cluster(&self, set: &ParticleSet<T>, scale: &FeatureScale<T>) -> Vec<Cluster<T>> {
        match *self {
            Clusterer::MeanShift { bandwidth } => {
                let with_dipole = set.particles.first().is_some_and(|p| p.params.dipole.is_some());
                let bw = vec![bandwidth; scale.dims(with_dipole)];
                mean_shift(set, scale, &bw, MEAN_SHIFT_MAX_ITER, T::lit(MEAN_SHIFT_TOL))
            }
            Clusterer::Ahc { merge_distance } => ahc_cluster(set, scale, merge_distance),
            Clusterer::Id => id_cluster(set),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::Particle;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn unit_scale() -> FeatureScale<f64> {
        FeatureScale {
            position: vec![1.0, 1.0],
            strength: 1.0,
            dipole: 1.0,
        }
    }

    fn make_set(points: &[[f64; 3]], weights: Option<&[f64]>) -> ParticleSet<f64> {
        ParticleSet {
            particles: points
                .iter()
                .enumerate()
                .map(|(i, p)| Particle {
                    params: SourceParams {
                        position: vec![p[0], p[1]],
                        strength: p[2],
                        dipole: None,
                    },
                    id: i as u64,
                    log_weight: weights.map_or(0.0, |w| w[i].ln()),
                })
                .collect(),
            next_id: points.len() as u64,
        }
    }

    fn blobs(seed: u64, n: usize, centers: &[[f64; 3]], sigma: f64) -> Vec<[f64; 3]> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|i| {
                let c = centers[i % centers.len()];
                let mut g = || sigma * rng.sample::<f64, _>(StandardNormal);
                [c[0] + g(), c[1] + g(), c[2] + g()]
            })
            .collect()
    }

    fn partition_ok(clusters: &[Cluster<f64>], n: usize) -> bool {
        let mut seen = vec![0usize; n];
        for c in clusters {
            for &m in &c.members {
                seen[m] += 1;
            }
        }
        seen.iter().all(|&s| s == 1)
    }

    #[test]
    fn single_atom_gives_one_cluster() {
        let set = make_set(&[[0.3, 0.4, 0.5]; 20], None);
        let c = mean_shift(&set, &unit_scale(), &[0.05; 3], 300, 1e-4);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members.len(), 20);
        assert!((c[0].centroid.position[0] - 0.3).abs() < 1e-12);
        assert!((c[0].total_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_separated_blobs() {
        let h = 0.05;
        let centers = [[0.2, 0.2, 0.3], [0.7, 0.2, 0.3]];
        let pts = blobs(1, 400, &centers, 0.01);
        let set = make_set(&pts, None);
        let clusters = mean_shift(&set, &unit_scale(), &[h; 3], 300, 1e-4);
        assert_eq!(clusters.len(), 2);
        assert!(partition_ok(&clusters, pts.len()));
        for c in &clusters {
            let truth = centers
                .iter()
                .find(|m| (m[0] - c.centroid.position[0]).abs() < 0.1)
                .unwrap();
            let mean = |k: usize| c.members.iter().map(|&i| pts[i][k]).sum::<f64>() / c.members.len() as f64;
            assert!((c.centroid.position[0] - truth[0]).abs() < h / 2.0);
            assert!((c.centroid.position[1] - truth[1]).abs() < h / 2.0);
            assert!((mean(0) - truth[0]).abs() < h / 2.0);
        }
    }

    #[test]
    fn ahc_extremes() {
        let pts = [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.6, 0.0], [2.0, 2.0, 2.0]];
        let set = make_set(&pts, None);
        assert_eq!(ahc_cluster(&set, &unit_scale(), 0.1).len(), 4);
        assert_eq!(ahc_cluster(&set, &unit_scale(), 10.0).len(), 1);
        let mid = ahc_cluster(&set, &unit_scale(), 0.6);
        assert_eq!(mid.len(), 2);
        assert_eq!(mid[0].members, vec![0, 1, 2]);
    }

    /// Components by breadth-first search over the `≤ r` adjacency graph.
    #[allow(clippy::needless_range_loop)]
    fn components_oracle(pts: &[[f64; 3]], r: f64) -> Vec<Vec<usize>> {
        let n = pts.len();
        let adj = |i: usize, j: usize| {
            let d2: f64 = (0..3).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum();
            d2 <= r * r
        };
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut queue = vec![s];
            label[s] = comps.len();
            let mut comp = Vec::new();
            while let Some(i) = queue.pop() {
                comp.push(i);
                for j in 0..n {
                    if label[j] == usize::MAX && adj(i, j) {
                        label[j] = comps.len();
                        queue.push(j);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort();
        comps
    }

    #[test]
    fn id_clusters_follow_lineage() {
        let mut set = make_set(&[[0.0, 0.0, 1.0]; 6], None);
        assert_eq!(id_cluster(&set).len(), 6);
        for (i, p) in set.particles.iter_mut().enumerate() {
            p.id = (i % 2) as u64 * 7;
        }
        let c = id_cluster(&set);
        assert_eq!(c.len(), 2);
        assert!(partition_ok(&c, 6));
    }

    #[test]
    fn candidates_filter_and_sort() {
        let set = make_set(
            &[[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [5.0, 5.0, 1.0]],
            Some(&[0.1, 0.2, 0.3, 0.4]),
        );
        let clusters = id_cluster(&set);
        assert_eq!(extract_candidates(&clusters, 0.0).len(), 4);
        let c = extract_candidates(&clusters, 0.25);
        assert_eq!(c.len(), 2);
        assert!(c[0].support > c[1].support);
        let all = ahc_cluster(&set, &unit_scale(), 100.0);
        let one = extract_candidates(&all, 0.02);
        assert_eq!(one.len(), 1);
        assert!((one[0].support - 1.0).abs() < 1e-12);
    }

    fn canonical(mut cs: Vec<Cluster<f64>>, perm: &[usize]) -> Vec<(Vec<usize>, Vec<u64>)> {
        let mut out: Vec<(Vec<usize>, Vec<u64>)> = cs
            .drain(..)
            .map(|c| {
                let mut m: Vec<usize> = c.members.iter().map(|&i| perm[i]).collect();
                m.sort_unstable();
                let mut bits: Vec<u64> = c.centroid.position.iter().map(|x| x.to_bits()).collect();
                bits.push(c.centroid.strength.to_bits());
                bits.push(c.total_weight.to_bits());
                (m, bits)
            })
            .collect();
        out.sort();
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn backends_partition_the_index_set(seed in 0u64..1000, n in 1usize..120) {
            let pts = blobs(seed, n, &[[0.1, 0.1, 0.1], [0.6, 0.5, 0.2], [0.3, 0.9, 0.8]], 0.05);
            let mut set = make_set(&pts, None);
            for (i, p) in set.particles.iter_mut().enumerate() {
                p.id = (i % 7) as u64;
            }
            let s = unit_scale();
            prop_assert!(partition_ok(&mean_shift(&set, &s, &[0.05; 3], 300, 1e-4), n));
            prop_assert!(partition_ok(&ahc_cluster(&set, &s, 0.08), n));
            prop_assert!(partition_ok(&id_cluster(&set), n));
        }

        #[test]
        fn ahc_matches_graph_components(seed in 0u64..1000, n in 1usize..200, r in 0.01f64..0.3) {
            let pts = blobs(seed, n, &[[0.2, 0.2, 0.2], [0.8, 0.8, 0.2]], 0.1);
            let set = make_set(&pts, None);
            let mut got: Vec<Vec<usize>> = ahc_cluster(&set, &unit_scale(), r)
                .into_iter()
                .map(|c| c.members)
                .collect();
            got.sort();
            prop_assert_eq!(got, components_oracle(&pts, r));
        }

        #[test]
        fn mean_shift_is_permutation_invariant(seed in 0u64..1000) {
            let pts = blobs(seed, 90, &[[0.2, 0.3, 0.4], [0.5, 0.5, 0.5], [0.55, 0.45, 0.5]], 0.03);
            let mut rng = stream_rng(seed, 1);
            let weights: Vec<f64> = (0..pts.len()).map(|_| rng.random::<f64>() + 0.01).collect();
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let a = make_set(&pts, Some(&weights));
            let shuffled: Vec<[f64; 3]> = perm.iter().map(|&i| pts[i]).collect();
            let sw: Vec<f64> = perm.iter().map(|&i| weights[i]).collect();
            let b = make_set(&shuffled, Some(&sw));
            let s = unit_scale();
            let ident: Vec<usize> = (0..pts.len()).collect();
            let ca = canonical(mean_shift(&a, &s, &[0.05; 3], 300, 1e-4), &ident);
            let cb = canonical(mean_shift(&b, &s, &[0.05; 3], 300, 1e-4), &perm);
            prop_assert_eq!(ca, cb);
        }

        #[test]
        fn centroids_inside_member_hull(seed in 0u64..1000) {
            let pts = blobs(seed, 80, &[[0.2, 0.3, 0.4], [0.7, 0.1, 0.5]], 0.04);
            let mut rng = stream_rng(seed, 2);
            let weights: Vec<f64> = (0..pts.len()).map(|_| rng.random::<f64>() + 1e-3).collect();
            let set = make_set(&pts, Some(&weights));
            let s = unit_scale();
            for c in mean_shift(&set, &s, &[0.05; 3], 300, 1e-4)
                .into_iter()
                .chain(ahc_cluster(&set, &s, 0.08))
                .chain(id_cluster(&set))
            {
                for (k, &x) in c.centroid.position.iter().enumerate() {
                    let lo = c.members.iter().map(|&i| pts[i][k]).fold(f64::INFINITY, f64::min);
                    let hi = c.members.iter().map(|&i| pts[i][k]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn doubling_strength_and_its_bandwidth_keeps_modes(seed in 0u64..1000) {
            let pts = blobs(seed, 60, &[[0.2, 0.3, 0.4], [0.6, 0.6, 0.2]], 0.04);
            let doubled: Vec<[f64; 3]> = pts.iter().map(|p| [p[0], p[1], 2.0 * p[2]]).collect();
            let s = unit_scale();
            let a = mean_shift(&make_set(&pts, None), &s, &[0.05, 0.05, 0.05], 300, 1e-6);
            let b = mean_shift(&make_set(&doubled, None), &s, &[0.05, 0.05, 0.1], 300, 1e-6);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(&x.members, &y.members);
                for k in 0..2 {
                    prop_assert!((x.centroid.position[k] - y.centroid.position[k]).abs() < 1e-9);
                }
            }
        }
    }
}
