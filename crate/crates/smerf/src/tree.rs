//! Growing a single randomized tree and evaluating its leaf-pair distances.

use dashmap::DashMap;
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::impurity::{
    scan_sorted, sort_by_value, GiniTracker, Kahan, PairwiseTracker, SplitScanResult,
    VarianceTracker,
};
use crate::rng::RngStream;
use crate::types::{
    DistanceMatrix, FeatureMatrix, Hyperparams, ProjectionMode, Sampling, SparseProjection,
    SplitParams,
};

/// What the split objective is computed against. `Pairwise` is the native
/// distance criterion; `Gini` and `Variance` grow the reference CART trees
/// used as structural oracles.
#[derive(Clone, Copy)]
pub enum SplitObjective<'a> {
    Pairwise(&'a DistanceMatrix),
    Gini {
        labels: &'a [usize],
        n_classes: usize,
    },
    Variance(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        params: SplitParams,
        /// Realized split objective value, kept for feature importance.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
        /// Original training-row indices, with multiplicity under bootstrap.
        rows: Vec<usize>,
    },
}

#[derive(Debug)]
pub struct SmerfTree {
    pub nodes: Vec<TreeNode>,
    /// Per-tree training multiset (bootstrap) or subset (subsample),
    /// as original row indices.
    pub bag: Vec<usize>,
    pub depth: usize,
    /// leaf_id -> node index.
    pub leaf_nodes: Vec<usize>,
    /// Memoized leaf-pair distances, keyed by (min, max) leaf id.
    memo: DashMap<(usize, usize), f64>,
}

impl Clone for SmerfTree {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            bag: self.bag.clone(),
            depth: self.depth,
            leaf_nodes: self.leaf_nodes.clone(),
            memo: DashMap::new(),
        }
    }
}

impl PartialEq for SmerfTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.bag == other.bag && self.depth == other.depth
    }
}

/// Draws the d candidate projections for one split node.
///
/// Axis-aligned: d distinct features without replacement (capped at p).
/// Sparse-binary: each projection draws its nonzero count from
/// Binomial(p, lambda/p) conditioned on >= 1, picks that many distinct
/// features, and assigns each a +-1 weight uniformly.
pub fn sample_projections(
    p: usize,
    hp: &Hyperparams,
    rng: &mut RngStream,
) -> Vec<SparseProjection> {
    match hp.projection_mode {
        ProjectionMode::AxisAligned => {
            let d = hp.d.min(p);
            index_sample(rng, p, d)
                .into_iter()
                .map(SparseProjection::axis)
                .collect()
        }
        ProjectionMode::SparseBinary { lambda } => {
            let binom = Binomial::new(p as u64, (lambda / p as f64).min(1.0)).unwrap();
            (0..hp.d)
                .map(|_| {
                    let mut k = 0;
                    while k == 0 {
                        k = binom.sample(rng) as usize;
                    }
                    let terms = index_sample(rng, p, k)
                        .into_iter()
                        .map(|f| (f, if rng.random_bool(0.5) { 1i8 } else { -1i8 }))
                        .collect();
                    SparseProjection { terms }
                })
                .collect()
        }
    }
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    objective: SplitObjective<'a>,
    hp: &'a Hyperparams,
    nodes: Vec<TreeNode>,
    leaf_nodes: Vec<usize>,
    depth: usize,
}

impl<'a> Grower<'a> {
    /// Best (projection index, scan result) over candidates; earlier
    /// candidates win ties via the strict comparison inside the scan and
    /// here across projections.
    fn best_candidate(
        &self,
        rows: &[usize],
        projections: &[SparseProjection],
    ) -> Option<(usize, SplitScanResult)> {
        let mut best: Option<(usize, SplitScanResult)> = None;
        for (ci, proj) in projections.iter().enumerate() {
            let values: Vec<f64> = rows.iter().map(|&r| proj.project(self.x.row(r))).collect();
            let order = sort_by_value(&values);
            let sorted_values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
            let sorted_rows: Vec<usize> = order.iter().map(|&k| rows[k]).collect();
            let result = match self.objective {
                SplitObjective::Pairwise(z) => {
                    let mut t = PairwiseTracker::new(z, &sorted_rows);
                    scan_sorted(&sorted_values, &sorted_rows, &mut t)
                }
                SplitObjective::Gini { labels, n_classes } => {
                    let mut t = GiniTracker::new(labels, &sorted_rows, n_classes);
                    scan_sorted(&sorted_values, &sorted_rows, &mut t)
                }
                SplitObjective::Variance(y) => {
                    let mut t = VarianceTracker::new(y, &sorted_rows);
                    scan_sorted(&sorted_values, &sorted_rows, &mut t)
                }
            };
            if let Some(r) = result {
                if best.as_ref().map_or(true, |(_, b)| r.gain > b.gain) {
                    best = Some((ci, r));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut RngStream) -> usize {
        self.depth = self.depth.max(depth);
        let stop = rows.len() < self.hp.min_parent
            || self.hp.max_depth.is_some_and(|d| depth >= d);
        if !stop {
            let projections = sample_projections(self.x.p(), self.hp, rng);
            if let Some((ci, scan)) = self.best_candidate(&rows, &projections) {
                if scan.gain > 0.0 {
                    let proj = projections[ci].clone();
                    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                        .iter()
                        .partition(|&&r| proj.project(self.x.row(r)) <= scan.threshold);
                    debug_assert_eq!(left_rows.len(), scan.left_count);
                    let id = self.nodes.len();
                    self.nodes.push(TreeNode::Leaf {
                        leaf_id: usize::MAX,
                        rows: Vec::new(),
                    });
                    let left = self.build(left_rows, depth + 1, rng);
                    let right = self.build(right_rows, depth + 1, rng);
                    self.nodes[id] = TreeNode::Split {
                        params: SplitParams {
                            projection: proj,
                            threshold: scan.threshold,
                        },
                        gain: scan.gain,
                        left,
                        right,
                    };
                    return id;
                }
            }
        }
        let leaf_id = self.leaf_nodes.len();
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { leaf_id, rows });
        self.leaf_nodes.push(id);
        id
    }
}

fn draw_bag(n: usize, sampling: Sampling, rng: &mut RngStream) -> Vec<usize> {
    match sampling {
        Sampling::Bootstrap => (0..n).map(|_| rng.random_range(0..n)).collect(),
        Sampling::Subsample(a) => {
            let mut idx: Vec<usize> = index_sample(rng, n, a.min(n)).into_iter().collect();
            idx.sort_unstable();
            idx
        }
    }
}

/// Grows one randomized tree under the given split objective. The reference
/// CART growers reuse this exact procedure (same bag draw, projection draws,
/// threshold candidates, and tie-breaking), differing only in the objective.
pub fn grow_tree_with_objective(
    x: &FeatureMatrix,
    objective: SplitObjective<'_>,
    hp: &Hyperparams,
    rng: &mut RngStream,
) -> SmerfTree {
    let bag = draw_bag(x.n(), hp.sampling, rng);
    let mut grower = Grower {
        x,
        objective,
        hp,
        nodes: Vec::new(),
        leaf_nodes: Vec::new(),
        depth: 0,
    };
    grower.build(bag.clone(), 0, rng);
    SmerfTree {
        nodes: grower.nodes,
        bag,
        depth: grower.depth,
        leaf_nodes: grower.leaf_nodes,
        memo: DashMap::new(),
    }
}

/// Grows one tree against an observed distance matrix (pairwise-distance
/// impurity objective).
pub fn grow_tree(
    x: &FeatureMatrix,
    z: &DistanceMatrix,
    hp: &Hyperparams,
    rng: &mut RngStream,
) -> Result<SmerfTree> {
    if x.n() != z.n() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} rows, distances have {}",
            x.n(),
            z.n()
        )));
    }
    Ok(grow_tree_with_objective(x, SplitObjective::Pairwise(z), hp, rng))
}

impl SmerfTree {
    /// Reassembles a tree from stored parts (model deserialization).
    /// `leaf_nodes[k]` must be the node index of the leaf with id k.
    pub fn from_parts(
        nodes: Vec<TreeNode>,
        bag: Vec<usize>,
        depth: usize,
        leaf_nodes: Vec<usize>,
    ) -> Result<Self> {
        for (leaf_id, &node) in leaf_nodes.iter().enumerate() {
            match nodes.get(node) {
                Some(TreeNode::Leaf { leaf_id: id, .. }) if *id == leaf_id => {}
                _ => return Err(Error::UnknownLeaf(leaf_id)),
            }
        }
        Ok(Self {
            nodes,
            bag,
            depth,
            leaf_nodes,
            memo: DashMap::new(),
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    /// Routes a feature vector to its leaf id (<= threshold goes left).
    pub fn leaf_of(&self, p: usize, x: &[f64]) -> Result<usize> {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { leaf_id, .. } => return Ok(*leaf_id),
                TreeNode::Split {
                    params, left, right, ..
                } => {
                    node = if params.projection.project(x) <= params.threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn leaf_rows(&self, leaf_id: usize) -> Result<&[usize]> {
        let node = *self
            .leaf_nodes
            .get(leaf_id)
            .ok_or(Error::UnknownLeaf(leaf_id))?;
        match &self.nodes[node] {
            TreeNode::Leaf { rows, .. } => Ok(rows),
            TreeNode::Split { .. } => Err(Error::UnknownLeaf(leaf_id)),
        }
    }

    /// Cross-average of training distances between two leaves.
    /// Memoized per (a, a') pair; the fill is idempotent so concurrent
    /// readers may race benignly.
    pub fn leaf_distance(&self, z: &DistanceMatrix, a: usize, b: usize) -> Result<f64> {
        let key = (a.min(b), a.max(b));
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let rows_a = self.leaf_rows(key.0)?;
        let rows_b = self.leaf_rows(key.1)?;
        let mut acc = Kahan::default();
        for &i in rows_a {
            let row = z.row(i);
            for &j in rows_b {
                acc.add(row[j]);
            }
        }
        let v = acc.value() / (rows_a.len() as f64 * rows_b.len() as f64);
        self.memo.insert(key, v);
        Ok(v)
    }

    /// Per-tree distance prediction g_b(x, x') = h(l_b(x), l_b(x')).
    pub fn predict_pair(
        &self,
        z: &DistanceMatrix,
        p: usize,
        x: &[f64],
        x_prime: &[f64],
    ) -> Result<f64> {
        let a = self.leaf_of(p, x)?;
        let b = self.leaf_of(p, x_prime)?;
        self.leaf_distance(z, a, b)
    }

    /// Regression-tree response: mean of the responses in the leaf x falls
    /// into (with bag multiplicity). Used by the reduction-mode identities.
    pub fn predict_response(&self, y: &[f64], p: usize, x: &[f64]) -> Result<f64> {
        let leaf = self.leaf_of(p, x)?;
        let rows = self.leaf_rows(leaf)?;
        let sum: f64 = rows.iter().map(|&r| y[r]).sum();
        Ok(sum / rows.len() as f64)
    }
}
