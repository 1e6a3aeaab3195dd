//! Post-solution analysis: k-means on weight frontiers, the elbow rule,
//! cluster validity indices, one-way ANOVA and sensitivity flags.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

/// Rows are units, columns the aggregated variable weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFrontierMatrix {
    pub dmu_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Score of each unit, used to pick cluster benchmarks.
    pub scores: Vec<f64>,
}

impl WeightFrontierMatrix {
    pub fn new(
        dmu_ids: Vec<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("weight matrix has no rows"));
        }
        if dmu_ids.len() != rows.len() || scores.len() != rows.len() {
            return Err(Error::validation("weight matrix ids, rows and scores differ in length"));
        }
        for (id, row) in dmu_ids.iter().zip(&rows) {
            if row.len() != feature_names.len() {
                return Err(Error::validation(format!(
                    "row '{id}' has {} features, expected {}",
                    row.len(),
                    feature_names.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("row '{id}' has a non-finite weight")));
            }
        }
        Ok(WeightFrontierMatrix {
            dmu_ids,
            feature_names,
            rows,
            scores,
        })
    }

    /// Rows whose weights do not sum to one within `tol`.
    pub fn off_simplex_rows(&self, tol: f64) -> Vec<String> {
        self.dmu_ids
            .iter()
            .zip(&self.rows)
            .filter(|(_, r)| (r.iter().sum::<f64>() - 1.0).abs() > tol)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Columns scaled to zero mean and unit population variance; constant
    /// columns become zero.
    pub fn standardized(&self) -> Self {
        let n = self.rows.len() as f64;
        let d = self.feature_names.len();
        let mut out = self.clone();
        for j in 0..d {
            let mean = self.rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (self.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
            for row in out.rows.iter_mut() {
                row[j] = if sd > 0.0 { (row[j] - mean) / sd } else { 0.0 };
            }
        }
        out
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Value that may be undefined for the data at hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub value: Option<f64>,
    pub note: Option<String>,
}

impl Index {
    fn some(v: f64) -> Self {
        Index {
            value: Some(v),
            note: None,
        }
    }

    fn na(note: &str) -> Self {
        Index {
            value: None,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    /// Mean and population std per cluster.
    pub cluster_mean: Vec<f64>,
    pub cluster_std: Vec<f64>,
    pub anova: Option<AnovaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub silhouette: Index,
    pub davies_bouldin: Index,
    pub calinski_harabasz: Index,
    pub features: Vec<FeatureSummary>,
    /// Unit with the highest score in each cluster (ties: smallest id).
    pub benchmarks: Vec<Option<String>>,
    pub mean_score: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

fn farthest_first(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| dist2(r, &centers[0])).collect();
    while centers.len() < k {
        // First maximum wins, so the choice depends only on the data order.
        let (far, _) = nearest.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc },
        );
        centers.push(rows[far].clone());
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(dist2(r, &rows[far]));
        }
    }
    centers
}

fn assign(rows: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(r, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

struct Lloyd {
    assignments: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    iterations: usize,
    reseeded: usize,
}

fn lloyd(rows: &[Vec<f64>], k: usize, seed: u64) -> Lloyd {
    const MAX_ITER: usize = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rows[0].len();
    let mut centroids = farthest_first(rows, k, &mut rng);
    let mut assignments = assign(rows, &centroids);
    let mut iterations = 0;
    let mut reseeded = 0;
    loop {
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in rows.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let settled = assignments.clone();
        // An empty cluster moves to the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..rows.len())
                    .max_by(|&a, &b| {
                        let da = dist2(&rows[a], &centroids[assignments[a]]);
                        let db = dist2(&rows[b], &centroids[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("rows not empty");
                centroids[c] = rows[far].clone();
                assignments[far] = c;
                reseeded += 1;
            }
        }
        let next = assign(rows, &centroids);
        // Returning to the pre-reseed labels means the reseed cannot hold.
        if next == assignments || next == settled || iterations >= MAX_ITER {
            assignments = next;
            break;
        }
        assignments = next;
    }
    let inertia = rows
        .iter()
        .zip(&assignments)
        .map(|(r, &a)| dist2(r, &centroids[a]))
        .sum();
    Lloyd {
        assignments,
        centroids,
        inertia,
        iterations,
        reseeded,
    }
}

fn silhouette(rows: &[Vec<f64>], labels: &[usize], k: usize) -> Index {
    if k < 2 {
        return Index::na("undefined for a single cluster");
    }
    let sizes = (0..k)
        .map(|c| labels.iter().filter(|l| **l == c).count())
        .collect::<Vec<_>>();
    if sizes.iter().filter(|s| **s > 0).count() < 2 {
        return Index::na("fewer than two non-empty clusters");
    }
    let n = rows.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut sum = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sum[labels[j]] += dist2(&rows[i], &rows[j]).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sum[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|c| *c != own && sizes[*c] > 0)
            .map(|c| sum[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        total += if m > 0.0 { (b - a) / m } else { 0.0 };
    }
    Index::some(total / n as f64)
}

fn davies_bouldin(rows: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> Index {
    let k = centroids.len();
    if k < 2 {
        return Index::na("undefined for a single cluster");
    }
    let scatter: Vec<f64> = (0..k)
        .map(|c| {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == c)
                .map(|(r, _)| r)
                .collect();
            members.iter().map(|r| dist2(r, &centroids[c]).sqrt()).sum::<f64>() / members.len().max(1) as f64
        })
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist2(&centroids[i], &centroids[j]).sqrt();
            if sep == 0.0 {
                return Index::na("two clusters share a centroid");
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Index::some(total / k as f64)
}

fn calinski_harabasz(rows: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> Index {
    let n = rows.len();
    let k = centroids.len();
    if k < 2 {
        return Index::na("undefined for a single cluster");
    }
    if n <= k {
        return Index::na("needs more units than clusters");
    }
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut between = 0.0;
    for (c, center) in centroids.iter().enumerate() {
        let size = labels.iter().filter(|l| **l == c).count() as f64;
        between += size * dist2(center, &mean);
    }
    let within: f64 = rows.iter().zip(labels).map(|(r, l)| dist2(r, &centroids[*l])).sum();
    if within == 0.0 {
        return Index::na("zero within-cluster dispersion");
    }
    Index::some((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Clusters the rows of `matrix` into `k` groups. Initial centres are chosen
/// farthest-first from a seeded random start, so the result depends only on
/// the matrix, `k` and `seed`.
pub fn kmeans(matrix: &WeightFrontierMatrix, k: usize, seed: u64) -> Result<ClusterReport> {
    let n = matrix.rows.len();
    if k == 0 || k > n {
        return Err(Error::validation(format!("k = {k} must lie in 1..={n}")));
    }
    let rows = &matrix.rows;
    let fit = lloyd(rows, k, seed);
    let labels = &fit.assignments;
    let mut warnings = Vec::new();
    if fit.reseeded > 0 {
        warnings.push(format!(
            "{} empty cluster(s) re-seeded at the farthest point",
            fit.reseeded
        ));
    }
    let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|l| **l == c).count()).collect();
    let zero_spread = rows.iter().all(|r| dist2(r, &rows[0]) == 0.0);
    let (silhouette, davies_bouldin, calinski_harabasz) = if zero_spread && k > 1 {
        warnings.push("all rows are identical; validity indices are not applicable".into());
        let na = Index::na("zero dispersion");
        (na.clone(), na.clone(), na)
    } else {
        (
            silhouette(rows, labels, k),
            davies_bouldin(rows, labels, &fit.centroids),
            calinski_harabasz(rows, labels, &fit.centroids),
        )
    };

    let features = matrix
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mut cluster_mean = Vec::with_capacity(k);
            let mut cluster_std = Vec::with_capacity(k);
            for c in 0..k {
                let vals: Vec<f64> = col
                    .iter()
                    .zip(labels)
                    .filter(|(_, l)| **l == c)
                    .map(|(v, _)| *v)
                    .collect();
                let m = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len().max(1) as f64;
                cluster_mean.push(m);
                cluster_std.push(var.sqrt());
            }
            FeatureSummary {
                feature: name.clone(),
                cluster_mean,
                cluster_std,
                anova: anova_f(&col, labels).ok(),
            }
        })
        .collect();

    let mut benchmarks = vec![None; k];
    let mut mean_score = vec![None; k];
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|i| labels[*i] == c).collect();
        let finite: Vec<usize> = members
            .iter()
            .copied()
            .filter(|i| matrix.scores[*i].is_finite())
            .collect();
        if !finite.is_empty() {
            mean_score[c] = Some(finite.iter().map(|i| matrix.scores[*i]).sum::<f64>() / finite.len() as f64);
        }
        benchmarks[c] = finite
            .iter()
            .copied()
            .max_by(|&a, &b| {
                matrix.scores[a]
                    .total_cmp(&matrix.scores[b])
                    .then_with(|| matrix.dmu_ids[b].cmp(&matrix.dmu_ids[a]))
            })
            .map(|i| matrix.dmu_ids[i].clone());
    }

    Ok(ClusterReport {
        k,
        seed,
        assignments: fit.assignments.clone(),
        centroids: fit.centroids,
        sizes,
        inertia: fit.inertia,
        iterations: fit.iterations,
        silhouette,
        davies_bouldin,
        calinski_harabasz,
        features,
        benchmarks,
        mean_score,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowReport {
    pub ks: Vec<usize>,
    pub inertia: Vec<f64>,
    pub suggested_k: usize,
    /// The curve has no clear bend; treat the suggestion with care.
    pub low_confidence: bool,
}

/// Inertia for every `k` in `range` and the `k` with the largest discrete
/// second difference. Suggestions are advisory.
pub fn elbow(matrix: &WeightFrontierMatrix, range: std::ops::RangeInclusive<usize>, seed: u64) -> Result<ElbowReport> {
    let n = matrix.rows.len();
    let (lo, hi) = (*range.start(), *range.end());
    if lo == 0 || lo > hi {
        return Err(Error::validation(format!("k range {lo}..={hi} is empty")));
    }
    if hi > n {
        return Err(Error::validation(format!("k range {lo}..={hi} exceeds the {n} units")));
    }
    let ks: Vec<usize> = range.collect();
    let inertia: Vec<f64> = ks.iter().map(|&k| lloyd(&matrix.rows, k, seed).inertia).collect();
    if ks.len() < 3 {
        return Ok(ElbowReport {
            suggested_k: ks[0],
            low_confidence: ks.len() > 1,
            ks,
            inertia,
        });
    }
    let mut best = (1, f64::NEG_INFINITY);
    for i in 1..ks.len() - 1 {
        let second = inertia[i - 1] - 2.0 * inertia[i] + inertia[i + 1];
        if second > best.1 {
            best = (i, second);
        }
    }
    // A real bend removes most of the remaining inertia at the elbow.
    let drop_before = inertia[best.0 - 1] - inertia[best.0];
    let total = inertia[0] - inertia[ks.len() - 1];
    let low_confidence = total <= 1e-12 * inertia[0].max(1e-300) || drop_before < 0.5 * total;
    Ok(ElbowReport {
        suggested_k: ks[best.0],
        low_confidence,
        ks,
        inertia,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `None` when the within-group variance is zero and groups differ.
    pub f: Option<f64>,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    /// F is infinite and reported as `None`.
    pub capped: bool,
}

/// One-way ANOVA of `values` grouped by `labels` (labels `0..k`, all used).
pub fn anova_f(values: &[f64], labels: &[usize]) -> Result<AnovaResult> {
    if values.len() != labels.len() || values.is_empty() {
        return Err(Error::validation(
            "values and labels must be equally long and non-empty",
        ));
    }
    let k = labels.iter().max().unwrap() + 1;
    let n = values.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (v, &l) in values.iter().zip(labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|c| *c == 0) {
        return Err(Error::validation(format!("group {c} is empty")));
    }
    if k < 2 {
        return Err(Error::validation("ANOVA needs at least two groups"));
    }
    if n <= k {
        return Err(Error::validation("ANOVA needs more observations than groups"));
    }
    let grand = values.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
    let ssb: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, c)| *c as f64 * (m - grand).powi(2))
        .sum();
    let ssw: f64 = values.iter().zip(labels).map(|(v, l)| (v - means[*l]).powi(2)).sum();
    let (d1, d2) = (k - 1, n - k);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let negligible = |x: f64| x <= 1e-24 * scale * scale * n as f64;
    if negligible(ssb) {
        return Ok(AnovaResult {
            f: Some(0.0),
            p: 1.0,
            df_between: d1,
            df_within: d2,
            capped: false,
        });
    }
    if negligible(ssw) {
        return Ok(AnovaResult {
            f: None,
            p: 0.0,
            df_between: d1,
            df_within: d2,
            capped: true,
        });
    }
    let f = (ssb / d1 as f64) / (ssw / d2 as f64);
    let dist = FisherSnedecor::new(d1 as f64, d2 as f64).expect("positive degrees of freedom");
    Ok(AnovaResult {
        f: Some(f),
        p: dist.sf(f).clamp(0.0, 1.0),
        df_between: d1,
        df_within: d2,
        capped: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub threshold: f64,
    /// Indices with `eta > mean + 2 * std`.
    pub flagged: Vec<usize>,
}

/// Mean, population std and the units strictly above `mean + 2 std`.
/// Non-finite values are skipped for the statistics but flagged.
pub fn sensitivity_stats(etas: &[f64]) -> Result<SensitivitySummary> {
    if etas.is_empty() {
        return Err(Error::validation("no sensitivities to summarise"));
    }
    let finite: Vec<f64> = etas.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len().max(1) as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let std_dev = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let threshold = mean + 2.0 * std_dev;
    // Rounding in mean and std must not push a value sitting exactly on the
    // threshold over it.
    let tol = 1e-12 * threshold.abs().max(1.0);
    let flagged = etas
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite() || **v > threshold + tol)
        .map(|(i, _)| i)
        .collect();
    Ok(SensitivitySummary {
        mean,
        std_dev,
        threshold,
        flagged,
    })
}
