//! Shared domain types: feature and distance matrices, split projections,
//! and ensemble hyperparameters.

use crate::error::{Error, Result};

/// Dense row-major n x p matrix of feature coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(
                "feature matrix needs n >= 1 and p >= 1".into(),
            ));
        }
        if values.len() != n * p {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {n}x{p}, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { i: k / p, j: k % p });
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Symmetric n x n matrix of observed pairwise distances. Entries may be
/// negative; the diagonal is stored as given.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a distance matrix, averaging near-symmetric entry pairs.
    ///
    /// Entry pairs differing by at most `tolerance` are replaced by their
    /// mean so the stored matrix is bit-exactly symmetric.
    pub fn validate(values: Vec<Vec<f64>>, tolerance: f64) -> Result<Self> {
        let n = values.len();
        if values.iter().any(|r| r.len() != n) {
            let cols = values.iter().map(|r| r.len()).max().unwrap_or(0);
            return Err(Error::NonSquare { rows: n, cols });
        }
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = values[i][j];
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry { i, j });
                }
                flat[i * n + j] = v;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let a = flat[i * n + j];
                let b = flat[j * n + i];
                if a != b {
                    if (a - b).abs() > tolerance {
                        return Err(Error::AsymmetryExceedsTolerance { i, j });
                    }
                    let m = 0.5 * (a + b);
                    flat[i * n + j] = m;
                    flat[j * n + i] = m;
                }
            }
        }
        Ok(Self { n, values: flat })
    }

    /// Default tolerance: 1e-9 relative to the largest magnitude entry.
    pub fn validate_default(values: Vec<Vec<f64>>) -> Result<Self> {
        let max = values
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::validate(values, 1e-9 * max.max(1.0))
    }

    /// Wraps an already-symmetric flat matrix without averaging.
    pub fn from_flat(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::NonSquare {
                rows: n,
                cols: values.len() / n.max(1),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { i: k / n, j: k % n });
        }
        for i in 0..n {
            for j in i + 1..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::AsymmetryExceedsTolerance { i, j });
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Restriction to the given rows/columns, in the given order.
    pub fn submatrix(&self, keep: &[usize]) -> DistanceMatrix {
        let m = keep.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in keep {
            for &j in keep {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix { n: m, values }
    }
}

/// How split orientations are drawn at each node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionMode {
    /// Single-feature splits; d distinct features per node.
    AxisAligned,
    /// Sparse +-1 projections with `lambda` expected nonzeros each.
    SparseBinary { lambda: f64 },
}

/// A sparse linear combination of features defining a split orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProjection {
    /// (feature index, weight) pairs; weights are +-1.
    pub terms: Vec<(usize, i8)>,
}

impl SparseProjection {
    pub fn axis(feature: usize) -> Self {
        Self {
            terms: vec![(feature, 1)],
        }
    }

    #[inline]
    pub fn project(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for &(f, w) in &self.terms {
            v += f64::from(w) * x[f];
        }
        v
    }
}

/// Split orientation plus threshold; points route left iff projection <= threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParams {
    pub projection: SparseProjection,
    pub threshold: f64,
}

/// Per-tree sampling of the training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    Bootstrap,
    /// Without-replacement subsample of the given size.
    Subsample(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub num_trees: usize,
    /// Candidate projections per split node.
    pub d: usize,
    /// Minimum node size to attempt a split.
    pub min_parent: usize,
    pub max_depth: Option<usize>,
    pub sampling: Sampling,
    pub projection_mode: ProjectionMode,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            num_trees: 500,
            d: 1,
            min_parent: 2,
            max_depth: None,
            sampling: Sampling::Bootstrap,
            projection_mode: ProjectionMode::AxisAligned,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn check(&self) -> Result<()> {
        if self.num_trees == 0 || self.d == 0 || self.min_parent < 2 {
            return Err(Error::InvalidInput(
                "need num_trees >= 1, d >= 1, min_parent >= 2".into(),
            ));
        }
        if let ProjectionMode::SparseBinary { lambda } = self.projection_mode {
            if !(lambda >= 1.0) {
                return Err(Error::InvalidInput("lambda must be >= 1".into()));
            }
        }
        if let Sampling::Subsample(a) = self.sampling {
            if a == 0 {
                return Err(Error::InvalidInput("subsample size must be >= 1".into()));
            }
        }
        Ok(())
    }
}
