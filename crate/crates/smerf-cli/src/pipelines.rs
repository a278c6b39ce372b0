//! Experiment pipelines shared by the binary and the acceptance suite:
//! dataset simulation to disk, the attributed-network link-prediction loop,
//! and the s_n convergence sweep.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::RngCore;

use smerf::forest::train_reduction_forest;
use smerf::metrics::{auc_pr, auc_roc};
use smerf::reductions::LabeledData;
use smerf::simdata::{
    gen_additive_theory, gen_bilinear_distance, gen_radial_distance, gen_regression_distance,
    gen_sbm_network, replicate_stream,
};
use smerf::train_forest;
use smerf::types::{DistanceMatrix, FeatureMatrix, Hyperparams};

use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimFamily {
    Regression,
    Bilinear,
    Radial,
    /// Additive model with Gaussian noise; `p` pads with irrelevant features.
    Theory { p: usize },
    Sbm {
        blocks: usize,
        p_in: f64,
        p_out: f64,
        attr_noise: f64,
    },
}

/// Writes a simulated dataset into `out` and returns the created file paths.
pub fn simulate(family: SimFamily, n: usize, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: &str| -> PathBuf {
        let p = out.join(name);
        written.push(p.clone());
        p
    };
    match family {
        SimFamily::Regression | SimFamily::Bilinear | SimFamily::Radial => {
            let set = match family {
                SimFamily::Regression => gen_regression_distance(n, seed)?,
                SimFamily::Bilinear => gen_bilinear_distance(n, seed)?,
                _ => gen_radial_distance(n, seed)?,
            };
            io::write_features(&put("features.csv"), &set.x)?;
            io::write_distance_matrix(&put("dist.csv"), &set.z_true)?;
            let q = set.q_true.expect("these families define a similarity Q");
            io::write_distance_matrix(&put("sim.csv"), &q)?;
        }
        SimFamily::Theory { p } => {
            let set = gen_additive_theory(n, p, seed)?;
            io::write_features(&put("features.csv"), &set.x)?;
            io::write_distance_matrix(&put("dist.csv"), &set.z_true)?;
            io::write_column(&put("responses.csv"), "y", set.y.as_deref().unwrap())?;
        }
        SimFamily::Sbm {
            blocks,
            p_in,
            p_out,
            attr_noise,
        } => {
            let (adj, attrs) = gen_sbm_network(n, blocks, p_in, p_out, attr_noise, seed)?;
            io::write_distance_matrix(&put("adjacency.csv"), &adj)?;
            io::write_features(&put("features.csv"), &attrs)?;
        }
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct LinkpredConfig {
    /// Fraction of nodes used for training.
    pub tp: f64,
    pub replicates: u64,
    pub seed: u64,
    pub hp: Hyperparams,
    /// Force z_ii = 0 in the training distance; otherwise Z = 1 - A leaves
    /// the diagonal at 1.
    pub zero_diagonal: bool,
    /// Also score train-test node pairs, not just test-test.
    pub include_cross_pairs: bool,
}

#[derive(Debug, Clone)]
pub struct LinkpredReplicate {
    pub auc_roc: f64,
    pub auc_pr: f64,
    /// Fraction of scored pairs that are edges.
    pub prevalence: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone)]
pub struct LinkpredSummary {
    pub replicates: Vec<LinkpredReplicate>,
    pub mean_auc_roc: f64,
    pub std_auc_roc: f64,
    pub mean_auc_pr: f64,
    pub std_auc_pr: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Node-wise link prediction: split the nodes, train on Z = 1 - A restricted
/// to training nodes, score held-out pairs by predicted similarity 1 - g.
pub fn linkpred(
    adj: &DistanceMatrix,
    attrs: &FeatureMatrix,
    cfg: &LinkpredConfig,
) -> Result<LinkpredSummary> {
    let n = adj.n();
    if attrs.n() != n {
        return Err(CliError::Data(format!(
            "adjacency has {n} nodes but attributes have {} rows",
            attrs.n()
        )));
    }
    if !(0.0 < cfg.tp && cfg.tp < 1.0) {
        return Err(CliError::Usage("train proportion must be in (0, 1)".into()));
    }
    if cfg.replicates == 0 {
        return Err(CliError::Usage("need at least one replicate".into()));
    }
    let n_train = ((cfg.tp * n as f64).round() as usize).clamp(2, n - 2);
    let mut replicates = Vec::with_capacity(cfg.replicates as usize);
    for r in 0..cfg.replicates {
        let mut rng = replicate_stream(cfg.seed, r);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let forest_seed = rng.next_u64();
        let mut train_nodes = order[..n_train].to_vec();
        let mut test_nodes = order[n_train..].to_vec();
        train_nodes.sort_unstable();
        test_nodes.sort_unstable();

        let m = train_nodes.len();
        let mut z_values = vec![0.0; m * m];
        for (a, &i) in train_nodes.iter().enumerate() {
            for (b, &j) in train_nodes.iter().enumerate() {
                z_values[a * m + b] = if a == b && cfg.zero_diagonal {
                    0.0
                } else {
                    1.0 - adj.get(i, j)
                };
            }
        }
        let z_train = DistanceMatrix::from_flat(m, z_values)?;
        let x_train = FeatureMatrix::from_rows(
            &train_nodes
                .iter()
                .map(|&i| attrs.row(i).to_vec())
                .collect::<Vec<_>>(),
        )?;
        let hp = Hyperparams {
            seed: forest_seed,
            ..cfg.hp.clone()
        };
        let forest = train_forest(&x_train, &z_train, &hp)?;

        // score over test nodes, plus the training nodes when cross pairs
        // are requested; pairs within the training set are never scored
        let scored_nodes: Vec<usize> = if cfg.include_cross_pairs {
            let mut all = test_nodes.clone();
            all.extend(&train_nodes);
            all
        } else {
            test_nodes.clone()
        };
        let x_eval = FeatureMatrix::from_rows(
            &scored_nodes
                .iter()
                .map(|&i| attrs.row(i).to_vec())
                .collect::<Vec<_>>(),
        )?;
        let g = forest.predict_matrix(&x_eval)?;
        let n_test = test_nodes.len();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for a in 0..n_test {
            for b in a + 1..scored_nodes.len() {
                scores.push(1.0 - g[a][b]);
                labels.push(adj.get(scored_nodes[a], scored_nodes[b]) == 1.0);
            }
        }
        let positives = labels.iter().filter(|&&l| l).count();
        replicates.push(LinkpredReplicate {
            auc_roc: auc_roc(&scores, &labels)?,
            auc_pr: auc_pr(&scores, &labels)?,
            prevalence: positives as f64 / labels.len() as f64,
            n_train,
            n_test,
        });
    }
    let (mean_auc_roc, std_auc_roc) =
        mean_std(&replicates.iter().map(|r| r.auc_roc).collect::<Vec<_>>());
    let (mean_auc_pr, std_auc_pr) =
        mean_std(&replicates.iter().map(|r| r.auc_pr).collect::<Vec<_>>());
    Ok(LinkpredSummary {
        replicates,
        mean_auc_roc,
        std_auc_roc,
        mean_auc_pr,
        std_auc_pr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    pub n: usize,
    pub s_n: f64,
}

/// s_n sweep: for each n, train a fully grown regression forest on fresh
/// additive-model data and average the tree-variance term over a fixed-size
/// test sample.
pub fn theory_check(
    ns: &[usize],
    trees: usize,
    test_points: usize,
    p: usize,
    d: usize,
    seed: u64,
) -> Result<Vec<TheoryPoint>> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut rng = replicate_stream(seed, n as u64);
        let train_seed = rng.next_u64();
        let test_seed = rng.next_u64();
        let forest_seed = rng.next_u64();
        let train = gen_additive_theory(n, p, train_seed)?;
        let test = gen_additive_theory(test_points, p, test_seed)?;
        let hp = Hyperparams {
            num_trees: trees,
            d,
            min_parent: 2,
            seed: forest_seed,
            ..Hyperparams::default()
        };
        let labeled = LabeledData::responses(train.y.clone().unwrap())?;
        let forest = train_reduction_forest(&train.x, &labeled, &hp, false)?;
        out.push(TheoryPoint {
            n,
            s_n: forest.tree_variance_term(&test.x)?,
        });
    }
    Ok(out)
}
