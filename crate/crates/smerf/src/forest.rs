//! Ensemble training, prediction, out-of-bag evaluation, and the per-pair
//! tree-variance diagnostic.
//!
//! Trees are trained in parallel (rayon, behind the `parallel` feature) but
//! every tree's randomness comes from its own derived stream and reductions
//! run in fixed tree order, so results are bit-identical for any worker
//! count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reductions::{self, LabeledData};
use crate::rng::derive_stream;
use crate::tree::{grow_tree_with_objective, SmerfTree, SplitObjective};
use crate::types::{DistanceMatrix, FeatureMatrix, Hyperparams, ProjectionMode};

/// Which reduction, if any, a forest was trained under.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedOn {
    /// Observed distance matrix.
    Distances,
    /// Indicator distance built from class labels.
    Classification { labels: Vec<usize> },
    /// Regression reduction; per-tree signed responses are available.
    Regression { responses: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SmerfForest {
    pub trees: Vec<SmerfTree>,
    pub hp: Hyperparams,
    /// Training distances needed for leaf cross-average evaluation. Absent only for
    /// regression-reduction forests trained without materializing Z.
    pub train_z: Option<DistanceMatrix>,
    pub trained_on: TrainedOn,
    pub n: usize,
    pub p: usize,
}

/// Out-of-bag evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct OobReport {
    pub rmse: f64,
    pub covered_pairs: usize,
    pub total_pairs: usize,
}

fn grow_all<F>(num_trees: usize, seed: u64, grow: F) -> Vec<SmerfTree>
where
    F: Fn(u64) -> SmerfTree + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        let _ = seed;
        (0..num_trees as u64)
            .into_par_iter()
            .map(grow)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = seed;
        (0..num_trees as u64).map(grow).collect()
    }
}

/// Trains a forest on an observed distance matrix. Tree b draws from the
/// stream derived for (hp.seed, b).
pub fn train_forest(x: &FeatureMatrix, z: &DistanceMatrix, hp: &Hyperparams) -> Result<SmerfForest> {
    hp.check()?;
    if x.n() != z.n() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} rows, distances have {}",
            x.n(),
            z.n()
        )));
    }
    let trees = grow_all(hp.num_trees, hp.seed, |b| {
        let mut rng = derive_stream(hp.seed, b);
        grow_tree_with_objective(x, SplitObjective::Pairwise(z), hp, &mut rng)
    });
    Ok(SmerfForest {
        trees,
        hp: hp.clone(),
        train_z: Some(z.clone()),
        trained_on: TrainedOn::Distances,
        n: x.n(),
        p: x.p(),
    })
}

/// Trains a reduction-mode forest with the reference CART objective.
///
/// By the reduction identities these trees match the ones `train_forest`
/// grows on the materialized distance matrix, without the O(n^2) memory;
/// `materialize_z` controls whether that matrix is stored for distance
/// prediction.
pub fn train_reduction_forest(
    x: &FeatureMatrix,
    labeled: &LabeledData,
    hp: &Hyperparams,
    materialize_z: bool,
) -> Result<SmerfForest> {
    hp.check()?;
    if labeled.len() != x.n() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} rows, labels have {}",
            x.n(),
            labeled.len()
        )));
    }
    let trees = grow_all(hp.num_trees, hp.seed, |b| {
        let mut rng = derive_stream(hp.seed, b);
        let objective = match labeled {
            LabeledData::Classes { labels, n_classes } => SplitObjective::Gini {
                labels,
                n_classes: *n_classes,
            },
            LabeledData::Responses(y) => SplitObjective::Variance(y),
        };
        grow_tree_with_objective(x, objective, hp, &mut rng)
    });
    let (train_z, trained_on) = match labeled {
        LabeledData::Classes { labels, .. } => (
            materialize_z
                .then(|| reductions::indicator_distance(labels))
                .transpose()?,
            TrainedOn::Classification {
                labels: labels.clone(),
            },
        ),
        LabeledData::Responses(y) => (
            materialize_z
                .then(|| reductions::squared_half_distance(y))
                .transpose()?,
            TrainedOn::Regression {
                responses: y.clone(),
            },
        ),
    };
    Ok(SmerfForest {
        trees,
        hp: hp.clone(),
        train_z,
        trained_on,
        n: x.n(),
        p: x.p(),
    })
}

impl SmerfForest {
    fn z(&self) -> Result<&DistanceMatrix> {
        self.train_z.as_ref().ok_or(Error::MissingTrainingDistances)
    }

    /// Ensemble prediction: mean of per-tree leaf distances, summed in
    /// tree order.
    pub fn predict_pair(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let z = self.z()?;
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict_pair(z, self.p, x, x_prime)?;
        }
        Ok(sum / self.trees.len() as f64)
    }

    /// Batch prediction: one leaf-routing pass per point per tree, then
    /// memoized leaf-distance lookups per pair.
    pub fn predict_matrix(&self, x_test: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        if x_test.p() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x_test.p(),
            });
        }
        let z = self.z()?;
        let leaves = self.assign_leaves(x_test)?;
        let m = x_test.n();
        let mut out = vec![vec![0.0; m]; m];
        let b = self.trees.len() as f64;
        for i in 0..m {
            for j in i..m {
                let mut sum = 0.0;
                for (t, tree) in self.trees.iter().enumerate() {
                    sum += tree.leaf_distance(z, leaves[t][i], leaves[t][j])?;
                }
                let v = sum / b;
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        Ok(out)
    }

    /// leaves[t][i] = leaf of test point i in tree t.
    fn assign_leaves(&self, x_test: &FeatureMatrix) -> Result<Vec<Vec<usize>>> {
        let route = |tree: &SmerfTree| -> Result<Vec<usize>> {
            (0..x_test.n())
                .map(|i| tree.leaf_of(self.p, x_test.row(i)))
                .collect()
        };
        #[cfg(feature = "parallel")]
        {
            self.trees.par_iter().map(route).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.trees.iter().map(route).collect()
        }
    }

    /// Out-of-bag RMSE over unordered training pairs whose both endpoints
    /// are absent from a tree's bag; uncoverable pairs are excluded and
    /// counted.
    pub fn oob_rmse(&self, x: &FeatureMatrix, z_true: &DistanceMatrix) -> Result<OobReport> {
        if x.n() != self.n || z_true.n() != self.n {
            return Err(Error::ShapeMismatch("OOB inputs must be the training data".into()));
        }
        let z = self.z()?;
        let leaves = self.assign_leaves(x)?;
        let in_bag: Vec<Vec<bool>> = self
            .trees
            .iter()
            .map(|t| {
                let mut flags = vec![false; self.n];
                for &r in &t.bag {
                    flags[r] = true;
                }
                flags
            })
            .collect();
        let n = self.n;
        let total_pairs = n * (n - 1) / 2;
        let mut covered = 0usize;
        let mut sq_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut sum = 0.0;
                let mut count = 0usize;
                for (t, tree) in self.trees.iter().enumerate() {
                    if !in_bag[t][i] && !in_bag[t][j] {
                        sum += tree.leaf_distance(z, leaves[t][i], leaves[t][j])?;
                        count += 1;
                    }
                }
                if count > 0 {
                    let err = sum / count as f64 - z_true.get(i, j);
                    sq_sum += err * err;
                    covered += 1;
                }
            }
        }
        if covered == 0 {
            return Err(Error::NoCoveredPairs);
        }
        Ok(OobReport {
            rmse: (sq_sum / covered as f64).sqrt(),
            covered_pairs: covered,
            total_pairs,
        })
    }

    /// Convergence diagnostic: average over unordered test pairs of half
    /// the biased variance (over trees) of the signed per-tree regression
    /// difference. Defined only for regression-reduction forests.
    pub fn tree_variance_term(&self, x_test: &FeatureMatrix) -> Result<f64> {
        let responses = match &self.trained_on {
            TrainedOn::Regression { responses } => responses,
            _ => return Err(Error::NotInReductionMode),
        };
        if x_test.p() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x_test.p(),
            });
        }
        let m = self.per_tree_responses(x_test, responses)?;
        let b = self.trees.len();
        let n_test = x_test.n();
        let mut acc = 0.0;
        let mut pairs = 0usize;
        for i in 0..n_test {
            for j in i + 1..n_test {
                let mut sum = 0.0;
                for t in 0..b {
                    sum += m[t][i] - m[t][j];
                }
                let mean = sum / b as f64;
                let mut var = 0.0;
                for t in 0..b {
                    let d = (m[t][i] - m[t][j]) - mean;
                    var += d * d;
                }
                acc += 0.5 * var / b as f64;
                pairs += 1;
            }
        }
        Ok(acc / pairs as f64)
    }

    /// m[t][i] = per-tree regression prediction for test point i.
    pub fn per_tree_responses(
        &self,
        x_test: &FeatureMatrix,
        responses: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        let predict = |tree: &SmerfTree| -> Result<Vec<f64>> {
            (0..x_test.n())
                .map(|i| tree.predict_response(responses, self.p, x_test.row(i)))
                .collect()
        };
        #[cfg(feature = "parallel")]
        {
            self.trees.par_iter().map(predict).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.trees.iter().map(predict).collect()
        }
    }
}

/// Default tuning grid: d in round(p^alpha) for alpha in {1/4, 1/2, 3/4, 1,
/// 3/2}, crossed with min_parent in {2, 4, 8}. Axis-aligned mode drops the
/// p^{3/2} entry (d is capped at p there).
pub fn default_grid(p: usize, base: &Hyperparams) -> Vec<Hyperparams> {
    let axis = matches!(base.projection_mode, ProjectionMode::AxisAligned);
    let exponents: &[f64] = if axis {
        &[0.25, 0.5, 0.75, 1.0]
    } else {
        &[0.25, 0.5, 0.75, 1.0, 1.5]
    };
    let mut ds: Vec<usize> = exponents
        .iter()
        .map(|&a| {
            let d = (p as f64).powf(a).round() as usize;
            let d = d.max(1);
            if axis {
                d.min(p)
            } else {
                d
            }
        })
        .collect();
    ds.dedup();
    let mut grid = Vec::new();
    for &d in &ds {
        for &min_parent in &[2usize, 4, 8] {
            grid.push(Hyperparams {
                d,
                min_parent,
                ..base.clone()
            });
        }
    }
    grid
}

/// Trains one forest per grid entry and returns the one with the smallest
/// out-of-bag RMSE (earlier entries win ties) together with every report.
pub fn tune(
    x: &FeatureMatrix,
    z: &DistanceMatrix,
    grid: &[Hyperparams],
    seed: u64,
) -> Result<(Hyperparams, Vec<OobReport>)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut reports = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (k, entry) in grid.iter().enumerate() {
        let hp = Hyperparams {
            seed,
            ..entry.clone()
        };
        let forest = train_forest(x, z, &hp)?;
        let report = forest.oob_rmse(x, z)?;
        if best.map_or(true, |(_, r)| report.rmse < r) {
            best = Some((k, report.rmse));
        }
        reports.push(report);
    }
    let (k, _) = best.unwrap();
    Ok((
        Hyperparams {
            seed,
            ..grid[k].clone()
        },
        reports,
    ))
}
