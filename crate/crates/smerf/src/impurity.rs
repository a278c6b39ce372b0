//! Impurity functionals and the exhaustive threshold scan used to grow trees.
//!
//! The scan enumerates candidate thresholds at midpoints between consecutive
//! distinct sorted projected values and keeps the threshold with the largest
//! gain, preferring the smaller threshold on ties. Pairwise sums are updated
//! incrementally (one O(n_s) pass per point moved left), so a full projection
//! costs O(n_s^2) instead of the O(n_s^3) of recomputing every candidate.

use crate::error::{Error, Result};
use crate::types::DistanceMatrix;

/// Indices of the training rows sitting in one tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSample {
    indices: Vec<usize>,
}

impl NodeSample {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("empty node sample".into()));
        }
        let mut seen = indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate node indices".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Best threshold found by scanning one projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScanResult {
    pub threshold: f64,
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Compensated (Kahan) accumulator. The pairwise scan adds O(n^2) possibly
/// cancelling terms, which plain summation handles poorly.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Average pairwise distance of a node: the mean of z_ij over all ordered
/// pairs of node points, diagonal included.
pub fn avg_pairwise_distance(z: &DistanceMatrix, s: &NodeSample) -> Result<f64> {
    check_indices(s.indices(), z.n())?;
    let n_s = s.len() as f64;
    Ok(pairwise_total(z, s.indices()) / (n_s * n_s))
}

/// Full ordered-pair sum of z over `rows`, diagonal included. Rows may repeat
/// (bootstrap bags).
pub(crate) fn pairwise_total(z: &DistanceMatrix, rows: &[usize]) -> f64 {
    let mut acc = Kahan::default();
    for &i in rows {
        let row = z.row(i);
        for &j in rows {
            acc.add(row[j]);
        }
    }
    acc.value()
}

/// Gini impurity 1 - sum_k f_k^2 of the labels in a node.
pub fn gini_impurity(labels: &[usize], s: &NodeSample) -> Result<f64> {
    check_indices(s.indices(), labels.len())?;
    let k_max = s.indices().iter().map(|&i| labels[i]).max().unwrap_or(0);
    let mut counts = vec![0usize; k_max + 1];
    for &i in s.indices() {
        counts[labels[i]] += 1;
    }
    let n_s = s.len() as f64;
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    Ok(1.0 - sum_sq / (n_s * n_s))
}

/// Biased (divide-by-n_s) sample variance of the responses in a node.
pub fn sample_variance(y: &[f64], s: &NodeSample) -> Result<f64> {
    check_indices(s.indices(), y.len())?;
    let n_s = s.len() as f64;
    let mean = s.indices().iter().map(|&i| y[i]).sum::<f64>() / n_s;
    let ss = s
        .indices()
        .iter()
        .map(|&i| {
            let d = y[i] - mean;
            d * d
        })
        .sum::<f64>();
    Ok(ss / n_s)
}

/// Split objective n_s I_D(S) - n_L I_D(S_L) - n_R I_D(S_R). May be negative.
pub fn split_gain(
    z: &DistanceMatrix,
    s: &NodeSample,
    left: &NodeSample,
    right: &NodeSample,
) -> Result<f64> {
    check_indices(s.indices(), z.n())?;
    let mut union: Vec<usize> = left.indices().iter().chain(right.indices()).copied().collect();
    union.sort_unstable();
    let mut parent: Vec<usize> = s.indices().to_vec();
    parent.sort_unstable();
    if union != parent {
        return Err(Error::NotAPartition);
    }
    let n_s = s.len() as f64;
    let n_l = left.len() as f64;
    let n_r = right.len() as f64;
    Ok(pairwise_total(z, s.indices()) / n_s
        - pairwise_total(z, left.indices()) / n_l
        - pairwise_total(z, right.indices()) / n_r)
}

/// Incremental gain state for one criterion while points move right-to-left.
pub(crate) trait GainTracker {
    fn move_left(&mut self, row: usize);
    fn gain(&self, n_left: usize, n_right: usize) -> f64;
}

/// Pairwise-distance criterion. Maintains the full ordered-pair sums of
/// the left and right children; moving row t left transfers 2 * sum(z[t, .])
/// over the points already on each side, plus the diagonal term z_tt.
pub(crate) struct PairwiseTracker<'a> {
    z: &'a DistanceMatrix,
    rows: &'a [usize],
    n_left: usize,
    total: f64,
    left_sum: Kahan,
    right_sum: Kahan,
}

impl<'a> PairwiseTracker<'a> {
    pub fn new(z: &'a DistanceMatrix, rows_sorted: &'a [usize]) -> Self {
        let total = pairwise_total(z, rows_sorted);
        let mut right_sum = Kahan::default();
        right_sum.add(total);
        Self {
            z,
            rows: rows_sorted,
            n_left: 0,
            total,
            left_sum: Kahan::default(),
            right_sum,
        }
    }
}

impl GainTracker for PairwiseTracker<'_> {
    fn move_left(&mut self, row: usize) {
        let zrow = self.z.row(row);
        let diag = zrow[row];
        let mut cross_left = Kahan::default();
        for &i in &self.rows[..self.n_left] {
            cross_left.add(zrow[i]);
        }
        self.n_left += 1;
        let mut cross_right = Kahan::default();
        for &i in &self.rows[self.n_left..] {
            cross_right.add(zrow[i]);
        }
        self.left_sum.add(2.0 * cross_left.value() + diag);
        self.right_sum.add(-(2.0 * cross_right.value() + diag));
    }

    fn gain(&self, n_left: usize, n_right: usize) -> f64 {
        let n_s = (n_left + n_right) as f64;
        self.total / n_s
            - self.left_sum.value() / n_left as f64
            - self.right_sum.value() / n_right as f64
    }
}

/// Gini criterion, tracked with per-class counts. The gain is
/// evaluated through the same (n^2 - sum n_k^2)/n expression the pairwise
/// tracker produces under an indicator distance, so both routes compare
/// bit-identically on integer data.
pub(crate) struct GiniTracker<'a> {
    labels: &'a [usize],
    left: Vec<usize>,
    right: Vec<usize>,
    total_mismatch: f64,
}

impl<'a> GiniTracker<'a> {
    pub fn new(labels: &'a [usize], rows: &[usize], n_classes: usize) -> Self {
        let mut right = vec![0usize; n_classes];
        for &r in rows {
            right[labels[r]] += 1;
        }
        let n = rows.len();
        let sum_sq: usize = right.iter().map(|&c| c * c).sum();
        Self {
            labels,
            left: vec![0; n_classes],
            right,
            total_mismatch: (n * n - sum_sq) as f64,
        }
    }

    fn mismatch(counts: &[usize], n: usize) -> f64 {
        let sum_sq: usize = counts.iter().map(|&c| c * c).sum();
        (n * n - sum_sq) as f64
    }
}

impl GainTracker for GiniTracker<'_> {
    fn move_left(&mut self, row: usize) {
        let k = self.labels[row];
        self.left[k] += 1;
        self.right[k] -= 1;
    }

    fn gain(&self, n_left: usize, n_right: usize) -> f64 {
        let n_s = (n_left + n_right) as f64;
        self.total_mismatch / n_s
            - Self::mismatch(&self.left, n_left) / n_left as f64
            - Self::mismatch(&self.right, n_right) / n_right as f64
    }
}

/// Variance criterion. The gain is accumulated through the identical
/// sequence of operations `PairwiseTracker` performs under the half-squared
/// distance (z computed on the fly), so both routes stay bit-identical and
/// exact gain ties across projections resolve the same way in both growers.
pub(crate) struct VarianceTracker<'a> {
    y: &'a [f64],
    rows: &'a [usize],
    n_left: usize,
    total: f64,
    left_sum: Kahan,
    right_sum: Kahan,
}

#[inline]
fn half_squared(a: f64, b: f64) -> f64 {
    // (a - b)^2 and (b - a)^2 are bit-equal, so symmetry is exact.
    0.5 * (a - b) * (a - b)
}

impl<'a> VarianceTracker<'a> {
    pub fn new(y: &'a [f64], rows_sorted: &'a [usize]) -> Self {
        let mut acc = Kahan::default();
        for &i in rows_sorted {
            for &j in rows_sorted {
                acc.add(half_squared(y[i], y[j]));
            }
        }
        let total = acc.value();
        let mut right_sum = Kahan::default();
        right_sum.add(total);
        Self {
            y,
            rows: rows_sorted,
            n_left: 0,
            total,
            left_sum: Kahan::default(),
            right_sum,
        }
    }
}

impl GainTracker for VarianceTracker<'_> {
    fn move_left(&mut self, row: usize) {
        let v = self.y[row];
        let diag = half_squared(v, v);
        let mut cross_left = Kahan::default();
        for &i in &self.rows[..self.n_left] {
            cross_left.add(half_squared(v, self.y[i]));
        }
        self.n_left += 1;
        let mut cross_right = Kahan::default();
        for &i in &self.rows[self.n_left..] {
            cross_right.add(half_squared(v, self.y[i]));
        }
        self.left_sum.add(2.0 * cross_left.value() + diag);
        self.right_sum.add(-(2.0 * cross_right.value() + diag));
    }

    fn gain(&self, n_left: usize, n_right: usize) -> f64 {
        let n_s = (n_left + n_right) as f64;
        self.total / n_s
            - self.left_sum.value() / n_left as f64
            - self.right_sum.value() / n_right as f64
    }
}

/// Sorts node positions by projected value (stable, so equal values keep the
/// node order both growers share).
pub(crate) fn sort_by_value(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    order
}

/// Drives a tracker across all candidate midpoints of `sorted_values`,
/// moving `sorted_rows` left one at a time. Returns the best candidate, or
/// None when all values are identical.
pub(crate) fn scan_sorted<T: GainTracker>(
    sorted_values: &[f64],
    sorted_rows: &[usize],
    tracker: &mut T,
) -> Option<SplitScanResult> {
    let n = sorted_values.len();
    let mut best: Option<SplitScanResult> = None;
    for k in 1..n {
        tracker.move_left(sorted_rows[k - 1]);
        if sorted_values[k] > sorted_values[k - 1] {
            let gain = tracker.gain(k, n - k);
            let better = best.map_or(true, |b| gain > b.gain);
            if better {
                // The midpoint of two values a few ulps apart can round up to
                // the upper value; fall back to the lower value so the
                // `<= threshold` partition reproduces the scanned left count.
                let mid = 0.5 * (sorted_values[k - 1] + sorted_values[k]);
                let threshold = if mid < sorted_values[k] {
                    mid
                } else {
                    sorted_values[k - 1]
                };
                best = Some(SplitScanResult {
                    threshold,
                    gain,
                    left_count: k,
                    right_count: n - k,
                });
            }
        }
    }
    best
}

/// Exhaustive 1-D scan for one candidate projection over a node sample.
/// `projected_values` is aligned with `s.indices()`. Returns None when no
/// threshold separates the values.
pub fn best_split_scan(
    z: &DistanceMatrix,
    s: &NodeSample,
    projected_values: &[f64],
) -> Result<Option<SplitScanResult>> {
    check_indices(s.indices(), z.n())?;
    if projected_values.len() != s.len() {
        return Err(Error::ShapeMismatch(
            "projected values not aligned with node sample".into(),
        ));
    }
    let order = sort_by_value(projected_values);
    let sorted_values: Vec<f64> = order.iter().map(|&k| projected_values[k]).collect();
    let sorted_rows: Vec<usize> = order.iter().map(|&k| s.indices()[k]).collect();
    let mut tracker = PairwiseTracker::new(z, &sorted_rows);
    Ok(scan_sorted(&sorted_values, &sorted_rows, &mut tracker))
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
    }
    Ok(())
}
