//! Grouping of free-text value phrases into abstract value concepts.
//!
//! Stages: embed, reduce with PCA, density clustering (DBSCAN with `eps`
//! taken from the elbow of the sorted k-distance curve), dissolution of
//! clusters below the minimum size, threshold assignment of leftovers to the
//! nearest density-cluster centroid, and k-means over whatever remains.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Pca;
use crate::providers::{euclidean, Embedder};
use crate::util::parallel_map;

use super::conflicts::normalize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    /// Leftover phrases closer than this (Euclidean, reduced space) to a
    /// centroid join that cluster.
    pub assign_threshold: f64,
    /// Dimension requested from the embedding provider.
    pub embed_dim: usize,
    /// PCA components used for density clustering.
    pub reduce_dim: usize,
    pub seed: u64,
    pub kmeans_max_iter: usize,
    pub max_parallel: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_cluster_size: 100,
            assign_threshold: 0.95,
            embed_dim: 256,
            reduce_dim: 5,
            seed: 0,
            kmeans_max_iter: 100,
            max_parallel: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterOrigin {
    Density,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCluster {
    pub cluster_id: usize,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub descriptor: String,
    /// Member phrases; the same phrase may occur more than once.
    pub members: Vec<String>,
    /// Positions of the members in the clustered input list.
    pub member_ids: Vec<usize>,
    #[serde(default)]
    pub exemplar_ids: Vec<usize>,
    pub origin: ClusterOrigin,
}

/// Persisted cluster table with phrase lookup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub clusters: Vec<ValueCluster>,
}

impl ClusterTable {
    pub fn new(clusters: Vec<ValueCluster>) -> Self {
        ClusterTable { clusters }
    }

    /// Phrase (normalized) to cluster index. First assignment wins.
    pub fn phrase_index(&self) -> HashMap<String, usize> {
        let mut map = HashMap::new();
        for (ci, c) in self.clusters.iter().enumerate() {
            for m in &c.members {
                map.entry(normalize(m)).or_insert(ci);
            }
        }
        map
    }

    pub fn label(&self, index: usize) -> String {
        let c = &self.clusters[index];
        if c.name.is_empty() {
            format!("cluster {}", c.cluster_id)
        } else {
            c.name.clone()
        }
    }
}

/// Sorted distances from each point to its `k`-th nearest point, the point
/// itself counting as the first.
pub fn k_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let k = k.clamp(1, n);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(&points[i], q)).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Knee of an ascending curve: the point furthest below the chord joining
/// its (normalized) endpoints.
pub fn elbow(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if n < 3 || hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return hi;
    }
    let mut best = (f64::NEG_INFINITY, n - 1);
    for (i, &y) in sorted.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let yn = (y - lo) / (hi - lo);
        let gap = x - yn;
        if gap > best.0 {
            best = (gap, i);
        }
    }
    sorted[best.1]
}

/// Classic DBSCAN. A point is core when at least `min_samples` points
/// (itself included) lie within `eps`. Returns a label per point, `None` for noise.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| euclidean(&points[i], &points[j]) <= eps)
            .collect()
    };
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next_label = 0;
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let seeds = neighbors(start);
        if seeds.len() < min_samples {
            continue;
        }
        let label = next_label;
        next_label += 1;
        labels[start] = Some(label);
        let mut queue: VecDeque<usize> = seeds.into_iter().collect();
        while let Some(p) = queue.pop_front() {
            if labels[p].is_none() {
                labels[p] = Some(label);
            }
            if visited[p] {
                continue;
            }
            visited[p] = true;
            let nb = neighbors(p);
            if nb.len() >= min_samples {
                queue.extend(nb.into_iter().filter(|&q| labels[q].is_none() || !visited[q]));
            }
        }
    }
    labels
}

/// Lloyd's k-means with k-means++ seeding. Returns a label per point and
/// never produces an empty cluster label (labels are compacted).
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| euclidean(p, c).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break; // fewer distinct points than k
        }
        let mut target = rng.gen_range(0.0..total);
        let mut pick = n - 1;
        for (i, w) in d2.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        centers.push(points[pick].clone());
    }

    let nearest = |p: &Vec<f64>, centers: &[Vec<f64>]| -> usize {
        let mut best = (f64::INFINITY, 0);
        for (ci, c) in centers.iter().enumerate() {
            let d = euclidean(p, c);
            if d < best.0 {
                best = (d, ci);
            }
        }
        best.1
    };
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (ci, c) in centers.iter_mut().enumerate() {
            if counts[ci] > 0 {
                for (cv, s) in c.iter_mut().zip(&sums[ci]) {
                    *cv = s / counts[ci] as f64;
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut remap = BTreeMap::new();
    for &l in &labels {
        let len = remap.len();
        remap.entry(l).or_insert(len);
    }
    labels.iter().map(|l| remap[l]).collect()
}

fn centroid(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let dim = points[0].len();
    let mut c = vec![0.0; dim];
    for &i in idx {
        for (cv, x) in c.iter_mut().zip(&points[i]) {
            *cv += x;
        }
    }
    c.iter_mut().for_each(|x| *x /= idx.len() as f64);
    c
}

/// Cluster assignment over already-reduced points. Returns, per cluster, its
/// member indices and origin; every index appears exactly once.
pub fn cluster_points(points: &[Vec<f64>], params: &ClusterParams) -> Vec<(Vec<usize>, ClusterOrigin)> {
    let n = points.len();
    let min_size = params.min_cluster_size.max(1);
    let eps = elbow(&k_distances(points, min_size));
    let labels = dbscan(points, eps, min_size);

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut leftovers = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(l) => groups.entry(*l).or_default().push(i),
            None => leftovers.push(i),
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (_, members) in groups {
        if members.len() >= min_size {
            clusters.push(members);
        } else {
            leftovers.extend(members);
        }
    }
    leftovers.sort_unstable();

    let centroids: Vec<Vec<f64>> = clusters.iter().map(|m| centroid(points, m)).collect();
    let choices = parallel_map(&leftovers, params.max_parallel, |&i| {
        centroids
            .iter()
            .enumerate()
            .map(|(ci, c)| (euclidean(&points[i], c), ci))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .filter(|(d, _)| *d < params.assign_threshold)
            .map(|(_, ci)| ci)
    });
    let mut unassigned = Vec::new();
    for (&i, choice) in leftovers.iter().zip(choices) {
        match choice {
            Some(ci) => clusters[ci].push(i),
            None => unassigned.push(i),
        }
    }
    let mut out: Vec<(Vec<usize>, ClusterOrigin)> = clusters
        .into_iter()
        .map(|mut m| {
            m.sort_unstable();
            (m, ClusterOrigin::Density)
        })
        .collect();

    if !unassigned.is_empty() {
        let k = unassigned.len().div_ceil(min_size);
        let sub: Vec<Vec<f64>> = unassigned.iter().map(|&i| points[i].clone()).collect();
        let labels = kmeans(&sub, k, params.seed, params.kmeans_max_iter);
        let mut fallback: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (&i, l) in unassigned.iter().zip(labels) {
            fallback.entry(l).or_default().push(i);
        }
        out.extend(fallback.into_values().map(|m| (m, ClusterOrigin::Fallback)));
    }
    debug_assert_eq!(out.iter().map(|(m, _)| m.len()).sum::<usize>(), n);
    out
}

/// Clusters value phrases into abstract concepts. Names and descriptors are
/// left empty; see [`super::name_clusters`].
pub fn cluster_values(
    phrases: &[String],
    embedder: &dyn Embedder,
    params: &ClusterParams,
) -> Result<Vec<ValueCluster>> {
    if params.min_cluster_size == 0 {
        return Err(Error::InvalidInput("min_cluster_size must be positive".into()));
    }
    if phrases.len() < 2 * params.min_cluster_size || phrases.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "clustering needs at least {} phrases, got {}",
            2 * params.min_cluster_size,
            phrases.len()
        )));
    }
    if embedder.dim() != params.embed_dim {
        return Err(Error::DimensionMismatch {
            expected: params.embed_dim,
            actual: embedder.dim(),
        });
    }

    let mut unique: Vec<String> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut which = Vec::with_capacity(phrases.len());
    for p in phrases {
        let idx = *slot.entry(p.as_str()).or_insert_with(|| {
            unique.push(p.clone());
            unique.len() - 1
        });
        which.push(idx);
    }
    let vectors = embedder.embed_batch(&unique)?;
    if vectors.iter().any(|v| v.dim() != params.embed_dim) {
        return Err(Error::DimensionMismatch {
            expected: params.embed_dim,
            actual: vectors.iter().map(|v| v.dim()).find(|d| *d != params.embed_dim).unwrap_or(0),
        });
    }
    if vectors.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Degenerate("all phrase embeddings are identical".into()));
    }

    let rows: Vec<Vec<f64>> = which.iter().map(|&u| vectors[u].as_slice().to_vec()).collect();
    let pca = Pca::fit(&rows, params.reduce_dim)?;
    let reduced: Vec<Vec<f64>> = rows.iter().map(|r| pca.transform(r)).collect();

    let groups = cluster_points(&reduced, params);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(cid, (ids, origin))| ValueCluster {
            cluster_id: cid,
            name: String::new(),
            descriptor: String::new(),
            members: ids.iter().map(|&i| phrases[i].clone()).collect(),
            member_ids: ids,
            exemplar_ids: Vec::new(),
            origin,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{EmbeddingVector, MockEmbedder};

    /// Looks phrases up in a fixed table.
    pub(crate) struct TableEmbedder {
        pub dim: usize,
        pub table: HashMap<String, Vec<f64>>,
    }

    impl Embedder for TableEmbedder {
        fn model_name(&self) -> &str {
            "table"
        }
        fn dim(&self) -> usize {
            self.dim
        }
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
            texts
                .iter()
                .map(|t| EmbeddingVector::new(self.table[t].clone()))
                .collect()
        }
    }

    #[test]
    fn elbow_of_flat_curve_is_its_value() {
        assert_eq!(elbow(&[0.0; 10]), 0.0);
        assert_eq!(elbow(&[1.0, 1.0, 1.0, 1.0, 10.0]), 1.0);
    }

    #[test]
    fn dbscan_two_blobs_and_noise() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(vec![i as f64 * 0.1, 0.0]);
        }
        for i in 0..5 {
            pts.push(vec![10.0 + i as f64 * 0.1, 0.0]);
        }
        pts.push(vec![5.0, 5.0]);
        let labels = dbscan(&pts, 0.25, 3);
        assert!(labels[..5].iter().all(|l| *l == Some(0)));
        assert!(labels[5..10].iter().all(|l| *l == Some(1)));
        assert_eq!(labels[10], None);
    }

    #[test]
    fn kmeans_separates_and_handles_duplicates() {
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let l = kmeans(&pts, 2, 3, 50);
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
        let same = vec![vec![1.0]; 4];
        assert_eq!(kmeans(&same, 3, 0, 10), vec![0; 4]);
    }

    #[test]
    fn copies_of_three_phrases_make_three_clusters() {
        let base = [
            "respect for family traditions",
            "honesty in close friendships",
            "financial independence from parents",
        ];
        let phrases: Vec<String> = (0..300).map(|i| base[i % 3].to_string()).collect();
        let emb = MockEmbedder::new("mock", 256).unwrap();
        let params = ClusterParams::default();
        let clusters = cluster_values(&phrases, &emb, &params).unwrap();
        assert_eq!(clusters.len(), 3);
        for c in &clusters {
            assert_eq!(c.members.len(), 100);
            assert_eq!(c.origin, ClusterOrigin::Density);
            assert!(c.members.iter().all(|m| m == &c.members[0]));
        }
    }

    #[test]
    fn precondition_errors() {
        let emb = MockEmbedder::new("mock", 256).unwrap();
        let two = vec!["a b c".to_string(), "d e f".to_string()];
        assert!(matches!(
            cluster_values(&two, &emb, &ClusterParams::default()),
            Err(Error::InvalidInput(_))
        ));
        let same = vec!["a b c".to_string(); 10];
        let params = ClusterParams {
            min_cluster_size: 2,
            ..Default::default()
        };
        assert!(matches!(cluster_values(&same, &emb, &params), Err(Error::Degenerate(_))));
        let small = MockEmbedder::new("mock", 64).unwrap();
        assert!(matches!(
            cluster_values(&two, &small, &ClusterParams { min_cluster_size: 1, ..Default::default() }),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partition_and_min_size_hold_on_noisy_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 16;
        let mut table = HashMap::new();
        let mut phrases = Vec::new();
        for blob in 0..3 {
            let center: Vec<f64> = (0..dim).map(|d| if d == blob { 3.0 } else { 0.0 }).collect();
            for i in 0..40 {
                let p = format!("blob {blob} item {i}");
                table.insert(p.clone(), center.iter().map(|c| c + rng.gen_range(-0.05..0.05)).collect());
                phrases.push(p);
            }
        }
        for i in 0..7 {
            let p = format!("stray {i}");
            table.insert(p.clone(), (0..dim).map(|_| rng.gen_range(-6.0..6.0)).collect());
            phrases.push(p);
        }
        let emb = TableEmbedder { dim, table };
        let params = ClusterParams {
            min_cluster_size: 20,
            embed_dim: dim,
            reduce_dim: 4,
            ..Default::default()
        };
        let clusters = cluster_values(&phrases, &emb, &params).unwrap();
        let mut seen: Vec<usize> = clusters.iter().flat_map(|c| c.member_ids.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..phrases.len()).collect::<Vec<_>>());
        for c in &clusters {
            if c.origin == ClusterOrigin::Density {
                assert!(c.members.len() >= params.min_cluster_size);
            }
        }
        assert!(clusters.iter().filter(|c| c.origin == ClusterOrigin::Density).count() >= 3);
    }
}
