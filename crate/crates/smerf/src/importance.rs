//! Feature importance: the summed split objective over all splits touching a
//! feature, generalizing Gini importance. Oblique splits credit the full gain
//! to every participating feature.

use crate::forest::SmerfForest;
use crate::tree::TreeNode;

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    /// Summed realized gains per feature.
    pub raw: Vec<f64>,
    /// raw / max(raw), or all zeros when no split was made.
    pub normalized: Vec<f64>,
}

pub fn feature_importance(forest: &SmerfForest) -> ImportanceVector {
    let mut raw = vec![0.0; forest.p];
    for tree in &forest.trees {
        for node in &tree.nodes {
            if let TreeNode::Split { params, gain, .. } = node {
                for &(feature, _) in &params.projection.terms {
                    raw[feature] += gain;
                }
            }
        }
    }
    let max = raw.iter().cloned().fold(0.0_f64, f64::max);
    let normalized = if max > 0.0 {
        raw.iter().map(|&v| v / max).collect()
    } else {
        vec![0.0; forest.p]
    };
    ImportanceVector { raw, normalized }
}
