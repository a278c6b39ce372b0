//! Label/response adapters and reference CART growers.
//!
//! The adapters materialize the distance matrices under which the pairwise
//! objective collapses to Gini (indicator distance) or biased variance (half
//! squared difference). The reference growers run the same scan machinery
//! with the classical objectives and serve as structural oracles.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tree::{grow_tree_with_objective, SmerfTree, SplitObjective, TreeNode};
use crate::types::{DistanceMatrix, FeatureMatrix, Hyperparams};

/// Labeled training data for the reduction adapters.
#[derive(Debug, Clone)]
pub enum LabeledData {
    /// Class ids in 0..n_classes.
    Classes { labels: Vec<usize>, n_classes: usize },
    Responses(Vec<f64>),
}

impl LabeledData {
    pub fn classes(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty labels".into()));
        }
        let n_classes = labels.iter().max().unwrap() + 1;
        Ok(Self::Classes { labels, n_classes })
    }

    pub fn responses(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("responses must be finite and nonempty".into()));
        }
        Ok(Self::Responses(y))
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Classes { labels, .. } => labels.len(),
            Self::Responses(y) => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// z_ij = 1 if the labels differ, else 0.
pub fn indicator_distance(labels: &[usize]) -> Result<DistanceMatrix> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty labels".into()));
    }
    let n = labels.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = if labels[i] != labels[j] { 1.0 } else { 0.0 };
        }
    }
    DistanceMatrix::from_flat(n, values)
}

/// z_ij = (y_i - y_j)^2 / 2.
pub fn squared_half_distance(y: &[f64]) -> Result<DistanceMatrix> {
    build_response_distance(y, |a, b| 0.5 * (a - b) * (a - b))
}

/// z_ij = |y_i - y_j|, the robust-regression variant.
pub fn absolute_distance(y: &[f64]) -> Result<DistanceMatrix> {
    build_response_distance(y, |a, b| (a - b).abs())
}

fn build_response_distance(y: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<DistanceMatrix> {
    if y.is_empty() {
        return Err(Error::InvalidInput("empty responses".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { i, j: i });
    }
    let n = y.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = f(y[i], y[j]);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    DistanceMatrix::from_flat(n, values)
}

/// Grows the reference CART tree (Gini for classes, variance for responses)
/// with the same randomization stream, candidate thresholds, and tie-breaks
/// as `tree::grow_tree`.
pub fn grow_reference_tree(
    x: &FeatureMatrix,
    labeled: &LabeledData,
    hp: &Hyperparams,
    rng: &mut RngStream,
) -> Result<SmerfTree> {
    if labeled.len() != x.n() {
        return Err(Error::ShapeMismatch(format!(
            "features have {} rows, labels have {}",
            x.n(),
            labeled.len()
        )));
    }
    let objective = match labeled {
        LabeledData::Classes { labels, n_classes } => SplitObjective::Gini {
            labels,
            n_classes: *n_classes,
        },
        LabeledData::Responses(y) => SplitObjective::Variance(y),
    };
    Ok(grow_tree_with_objective(x, objective, hp, rng))
}

/// Outcome of a structural tree comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeComparison {
    pub equivalent: bool,
    /// Root-to-node path of the first divergence ("L"/"R" steps), with a
    /// short description.
    pub divergence: Option<String>,
}

/// Structural equivalence: identical topology and projections, thresholds
/// within 1e-12, identical leaf row multisets.
pub fn assert_tree_equivalence(t1: &SmerfTree, t2: &SmerfTree) -> TreeComparison {
    fn walk(t1: &SmerfTree, t2: &SmerfTree, n1: usize, n2: usize, path: &str) -> Option<String> {
        match (&t1.nodes[n1], &t2.nodes[n2]) {
            (
                TreeNode::Split {
                    params: p1,
                    left: l1,
                    right: r1,
                    ..
                },
                TreeNode::Split {
                    params: p2,
                    left: l2,
                    right: r2,
                    ..
                },
            ) => {
                if p1.projection != p2.projection {
                    return Some(format!("at [{path}]: projections differ"));
                }
                if (p1.threshold - p2.threshold).abs() > 1e-12 {
                    return Some(format!(
                        "at [{path}]: thresholds {} vs {}",
                        p1.threshold, p2.threshold
                    ));
                }
                walk(t1, t2, *l1, *l2, &format!("{path}L"))
                    .or_else(|| walk(t1, t2, *r1, *r2, &format!("{path}R")))
            }
            (TreeNode::Leaf { rows: a, .. }, TreeNode::Leaf { rows: b, .. }) => {
                let mut a = a.clone();
                let mut b = b.clone();
                a.sort_unstable();
                b.sort_unstable();
                (a != b).then(|| format!("at [{path}]: leaf row sets differ"))
            }
            _ => Some(format!("at [{path}]: split vs leaf")),
        }
    }
    match walk(t1, t2, 0, 0, "") {
        None => TreeComparison {
            equivalent: true,
            divergence: None,
        },
        Some(d) => TreeComparison {
            equivalent: false,
            divergence: Some(d),
        },
    }
}
