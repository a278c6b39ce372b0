//! Evaluation metrics for distance prediction and link prediction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::DistanceMatrix;

/// Named metric values plus evaluation counts for one experiment run.
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub metrics: BTreeMap<String, f64>,
    pub evaluated_points: usize,
    pub skipped_points: usize,
}

fn check_shapes(pred: &DistanceMatrix, truth: &DistanceMatrix, min_n: usize) -> Result<usize> {
    let n = truth.n();
    if pred.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "pred is {}x{0}, truth is {n}x{n}",
            pred.n()
        )));
    }
    if n < min_n {
        return Err(Error::TooFewPoints { needed: min_n, got: n });
    }
    Ok(n)
}

/// RMSE over unordered distinct pairs i < j.
pub fn rmse_pairs(pred: &DistanceMatrix, truth: &DistanceMatrix) -> Result<f64> {
    let n = check_shapes(pred, truth, 2)?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let e = pred.get(i, j) - truth.get(i, j);
            acc += e * e;
            count += 1;
        }
    }
    Ok((acc / count as f64).sqrt())
}

/// Average ranks with midrank tie handling.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut m = k;
        while m + 1 < order.len() && values[order[m + 1]] == values[order[k]] {
            m += 1;
        }
        let rank = (k + m) as f64 / 2.0 + 1.0;
        for &idx in &order[k..=m] {
            ranks[idx] = rank;
        }
        k = m + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Mean over points q of the Spearman rank correlation between the predicted
/// and true distance rows of q (q itself excluded). Points whose true row is
/// constant are skipped and counted in the report.
pub fn spearman_per_point(pred: &DistanceMatrix, truth: &DistanceMatrix) -> Result<(f64, usize)> {
    let n = check_shapes(pred, truth, 3)?;
    let mut acc = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for q in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != q).collect();
        let t: Vec<f64> = others.iter().map(|&i| truth.get(q, i)).collect();
        if t.iter().all(|&v| v == t[0]) {
            skipped += 1;
            continue;
        }
        let p: Vec<f64> = others.iter().map(|&i| pred.get(q, i)).collect();
        acc += pearson(&average_ranks(&p), &average_ranks(&t));
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidInput("every point has a constant truth row".into()));
    }
    Ok((acc / used as f64, skipped))
}

/// Mean average precision with each point's 10 truth-nearest neighbors as the
/// relevant items. Ranking is by (predicted distance, index) ascending;
/// relevance ties also break by index.
pub fn map_at_10(pred: &DistanceMatrix, truth: &DistanceMatrix) -> Result<f64> {
    let n = check_shapes(pred, truth, 11)?;
    let k_rel = 10;
    let mut acc = 0.0;
    for q in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != q).collect();
        let mut by_truth = others.clone();
        by_truth.sort_by(|&a, &b| {
            truth
                .get(q, a)
                .partial_cmp(&truth.get(q, b))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut relevant = vec![false; n];
        for &i in &by_truth[..k_rel] {
            relevant[i] = true;
        }
        let mut by_pred = others;
        by_pred.sort_by(|&a, &b| {
            pred.get(q, a)
                .partial_cmp(&pred.get(q, b))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (rank0, &i) in by_pred.iter().enumerate() {
            if relevant[i] {
                hits += 1;
                ap += hits as f64 / (rank0 + 1) as f64;
            }
        }
        acc += ap / k_rel as f64;
    }
    Ok(acc / n as f64)
}

/// AUC-ROC via the Mann-Whitney statistic with half credit for ties.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// AUC-PR in average-precision form: sum over descending unique thresholds of
/// (R_k - R_{k-1}) * P_k, with tied scores grouped at one threshold.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut m = k;
        while m + 1 < order.len() && scores[order[m + 1]] == scores[order[k]] {
            m += 1;
        }
        for &idx in &order[k..=m] {
            seen += 1;
            if labels[idx] {
                tp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        k = m + 1;
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix::validate(rows, 0.0).unwrap()
    }

    fn random_symmetric(n: usize, seed: u64) -> DistanceMatrix {
        use rand::Rng;
        let mut rng = crate::rng::derive_stream(seed, 0);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(0.0..1.0);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        mat(rows)
    }

    #[test]
    fn rmse_zero_when_equal() {
        let z = random_symmetric(6, 1);
        assert_eq!(rmse_pairs(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn rmse_two_points() {
        let pred = mat(vec![vec![0.0, 1.5], vec![1.5, 0.0]]);
        let truth = mat(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!((rmse_pairs(&pred, &truth).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rmse_matches_brute_force() {
        let pred = random_symmetric(8, 2);
        let truth = random_symmetric(8, 3);
        let mut acc = 0.0;
        for i in 0..8 {
            for j in i + 1..8 {
                let e = pred.get(i, j) - truth.get(i, j);
                acc += e * e;
            }
        }
        let expected = (acc / 28.0).sqrt();
        assert!((rmse_pairs(&pred, &truth).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn spearman_perfect_and_reversed() {
        let truth = random_symmetric(10, 4);
        assert!((spearman_per_point(&truth, &truth).unwrap().0 - 1.0).abs() < 1e-12);
        let neg = mat((0..10)
            .map(|i| (0..10).map(|j| -truth.get(i, j)).collect())
            .collect());
        assert!((spearman_per_point(&neg, &truth).unwrap().0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_matches_rank_then_pearson_oracle() {
        let pred = random_symmetric(10, 5);
        let truth = random_symmetric(10, 6);
        let (got, skipped) = spearman_per_point(&pred, &truth).unwrap();
        assert_eq!(skipped, 0);
        let mut acc = 0.0;
        for q in 0..10 {
            let others: Vec<usize> = (0..10).filter(|&i| i != q).collect();
            let p: Vec<f64> = others.iter().map(|&i| pred.get(q, i)).collect();
            let t: Vec<f64> = others.iter().map(|&i| truth.get(q, i)).collect();
            acc += pearson(&average_ranks(&p), &average_ranks(&t));
        }
        assert!((got - acc / 10.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_skips_constant_truth_rows() {
        let mut rows = vec![vec![0.3; 4]; 4];
        for r in 0..4 {
            rows[r][r] = 0.0;
        }
        rows[0][1] = 0.1;
        rows[1][0] = 0.1;
        // rows 2 and 3 still have constant off-diagonal truth 0.3
        let truth = mat(rows);
        let pred = random_symmetric(4, 7);
        let (_, skipped) = spearman_per_point(&pred, &truth).unwrap();
        assert_eq!(skipped, 2);
    }

    #[test]
    fn map_is_one_for_perfect_prediction() {
        let truth = random_symmetric(15, 8);
        assert!((map_at_10(&truth, &truth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_hand_evaluated_shifted_ranking() {
        // Build truth where points 1..=10 are nearest to point 0, and a
        // prediction that ranks one irrelevant point first; relevant items
        // then occupy ranks 2..=11 and AP = (1/10) sum_{k=2}^{11} (k-1)/k.
        let n = 12;
        let mut t = vec![vec![0.0; n]; n];
        let mut p = vec![vec![0.0; n]; n];
        for j in 1..n {
            let tv = j as f64; // nearest 10 by truth: 1..=10
            let pv = if j == 11 { 0.5 } else { j as f64 + 1.0 };
            t[0][j] = tv;
            t[j][0] = tv;
            p[0][j] = pv;
            p[j][0] = pv;
        }
        // fill the rest symmetric and informative enough not to matter
        for i in 1..n {
            for j in i + 1..n {
                let v = (i * n + j) as f64;
                t[i][j] = v;
                t[j][i] = v;
                p[i][j] = v;
                p[j][i] = v;
            }
        }
        let expected_q0: f64 = (2..=11).map(|k| (k - 1) as f64 / k as f64).sum::<f64>() / 10.0;
        let got = map_at_10(&mat(p), &mat(t)).unwrap();
        // every other point has perfect prediction (AP = 1)
        let expected = (expected_q0 + (n - 1) as f64) / n as f64;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn map_matches_brute_force_oracle() {
        let pred = random_symmetric(15, 9);
        let truth = random_symmetric(15, 10);
        let got = map_at_10(&pred, &truth).unwrap();
        // independent AP oracle: precision@k sum over relevant ranks
        let n = 15;
        let mut acc = 0.0;
        for q in 0..n {
            let mut others: Vec<usize> = (0..n).filter(|&i| i != q).collect();
            let mut by_truth = others.clone();
            by_truth.sort_by(|&a, &b| truth.get(q, a).partial_cmp(&truth.get(q, b)).unwrap());
            let rel: Vec<usize> = by_truth[..10].to_vec();
            others.sort_by(|&a, &b| pred.get(q, a).partial_cmp(&pred.get(q, b)).unwrap());
            let mut ap = 0.0;
            let mut hits = 0;
            for (k, &i) in others.iter().enumerate() {
                if rel.contains(&i) {
                    hits += 1;
                    ap += hits as f64 / (k + 1) as f64;
                }
            }
            acc += ap / 10.0;
        }
        assert!((got - acc / n as f64).abs() < 1e-12);
    }

    #[test]
    fn auc_roc_perfect_and_ties() {
        let labels = [true, true, false, false];
        assert_eq!(auc_roc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.1; 4], &[true; 4]).unwrap_err(), Error::SingleClass);
    }

    #[test]
    fn auc_roc_matches_trapezoidal_integration() {
        use rand::Rng;
        let mut rng = crate::rng::derive_stream(11, 0);
        let scores: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..30).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            return;
        }
        let got = auc_roc(&scores, &labels).unwrap();
        // trapezoidal sweep over descending thresholds
        let mut order: Vec<usize> = (0..30).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = 30.0 - n_pos;
        let (mut tp, mut fp) = (0.0, 0.0);
        let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
        let mut area = 0.0;
        let mut k = 0;
        while k < 30 {
            let mut m = k;
            while m + 1 < 30 && scores[order[m + 1]] == scores[order[k]] {
                m += 1;
            }
            for &i in &order[k..=m] {
                if labels[i] {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
            let tpr = tp / n_pos;
            let fpr = fp / n_neg;
            area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
            prev_tpr = tpr;
            prev_fpr = fpr;
            k = m + 1;
        }
        assert!((got - area).abs() < 1e-12, "{got} vs {area}");
    }

    #[test]
    fn auc_roc_invariant_under_monotone_transform() {
        let scores = [0.1, 0.7, 0.3, 0.9, 0.5];
        let labels = [false, true, false, true, true];
        let a = auc_roc(&scores, &labels).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (5.0 * s).exp()).collect();
        assert_eq!(a, auc_roc(&transformed, &labels).unwrap());
    }

    #[test]
    fn auc_pr_perfect_and_all_tied() {
        let labels = [true, true, false, false];
        assert_eq!(auc_pr(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 1.0);
        // all tied: single threshold, precision = prevalence
        assert_eq!(auc_pr(&[0.5; 4], &labels).unwrap(), 0.5);
        assert_eq!(auc_pr(&[0.1; 4], &[false; 4]).unwrap_err(), Error::NoPositives);
    }

    #[test]
    fn auc_pr_matches_threshold_sweep() {
        use rand::Rng;
        let mut rng = crate::rng::derive_stream(13, 0);
        let scores: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..25).map(|_| rng.random_bool(0.3)).collect();
        if !labels.iter().any(|&l| l) {
            return;
        }
        let got = auc_pr(&scores, &labels).unwrap();
        let mut thresholds: Vec<f64> = scores.clone();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let mut prev_recall = 0.0;
        let mut area = 0.0;
        for &t in &thresholds {
            let tp = scores
                .iter()
                .zip(&labels)
                .filter(|(s, &l)| **s >= t && l)
                .count() as f64;
            let selected = scores.iter().filter(|&&s| s >= t).count() as f64;
            let recall = tp / n_pos;
            area += (recall - prev_recall) * (tp / selected);
            prev_recall = recall;
        }
        assert!((got - area).abs() < 1e-12, "{got} vs {area}");
    }

    #[test]
    fn metrics_invariant_to_point_relabeling() {
        let pred = random_symmetric(12, 14);
        let truth = random_symmetric(12, 15);
        let perm: Vec<usize> = vec![4, 7, 0, 11, 2, 9, 1, 10, 3, 8, 5, 6];
        let permute = |m: &DistanceMatrix| {
            mat(perm
                .iter()
                .map(|&i| perm.iter().map(|&j| m.get(i, j)).collect())
                .collect())
        };
        let (pp, tt) = (permute(&pred), permute(&truth));
        assert!((rmse_pairs(&pred, &truth).unwrap() - rmse_pairs(&pp, &tt).unwrap()).abs() < 1e-12);
        assert!(
            (spearman_per_point(&pred, &truth).unwrap().0
                - spearman_per_point(&pp, &tt).unwrap().0)
                .abs()
                < 1e-12
        );
        assert!((map_at_10(&pred, &truth).unwrap() - map_at_10(&pp, &tt).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn map_and_spearman_shift_invariant() {
        let pred = random_symmetric(12, 16);
        let truth = random_symmetric(12, 17);
        let shifted = mat((0..12)
            .map(|i| {
                (0..12)
                    .map(|j| if i == j { 0.0 } else { pred.get(i, j) + 5.0 })
                    .collect()
            })
            .collect());
        assert!(
            (map_at_10(&pred, &truth).unwrap() - map_at_10(&shifted, &truth).unwrap()).abs()
                < 1e-12
        );
        assert!(
            (spearman_per_point(&pred, &truth).unwrap().0
                - spearman_per_point(&shifted, &truth).unwrap().0)
                .abs()
                < 1e-12
        );
    }
}
