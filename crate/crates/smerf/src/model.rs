//! Versioned binary model format with an explicit little-endian layout, so
//! saved forests round-trip bit-exactly.

use crate::error::{Error, Result};
use crate::forest::{SmerfForest, TrainedOn};
use crate::tree::{SmerfTree, TreeNode};
use crate::types::{
    DistanceMatrix, Hyperparams, ProjectionMode, Sampling, SparseProjection, SplitParams,
};

const MAGIC: &[u8; 4] = b"SMRF";
const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::InvalidInput("truncated model file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn write_hp(w: &mut Writer, hp: &Hyperparams) {
    w.u64(hp.num_trees as u64);
    w.u64(hp.d as u64);
    w.u64(hp.min_parent as u64);
    w.u64(hp.max_depth.map_or(u64::MAX, |d| d as u64));
    match hp.sampling {
        Sampling::Bootstrap => {
            w.u8(0);
            w.u64(0);
        }
        Sampling::Subsample(a) => {
            w.u8(1);
            w.u64(a as u64);
        }
    }
    match hp.projection_mode {
        ProjectionMode::AxisAligned => {
            w.u8(0);
            w.f64(0.0);
        }
        ProjectionMode::SparseBinary { lambda } => {
            w.u8(1);
            w.f64(lambda);
        }
    }
    w.u64(hp.seed);
}

fn read_hp(r: &mut Reader) -> Result<Hyperparams> {
    let num_trees = r.u64()? as usize;
    let d = r.u64()? as usize;
    let min_parent = r.u64()? as usize;
    let max_depth = match r.u64()? {
        u64::MAX => None,
        v => Some(v as usize),
    };
    let sampling = match (r.u8()?, r.u64()?) {
        (0, _) => Sampling::Bootstrap,
        (1, a) => Sampling::Subsample(a as usize),
        _ => return Err(Error::InvalidInput("bad sampling tag".into())),
    };
    let projection_mode = match (r.u8()?, r.f64()?) {
        (0, _) => ProjectionMode::AxisAligned,
        (1, lambda) => ProjectionMode::SparseBinary { lambda },
        _ => return Err(Error::InvalidInput("bad projection tag".into())),
    };
    let seed = r.u64()?;
    Ok(Hyperparams {
        num_trees,
        d,
        min_parent,
        max_depth,
        sampling,
        projection_mode,
        seed,
    })
}

fn write_tree(w: &mut Writer, tree: &SmerfTree) {
    w.u64(tree.bag.len() as u64);
    for &r in &tree.bag {
        w.u64(r as u64);
    }
    w.u64(tree.depth as u64);
    w.u64(tree.nodes.len() as u64);
    for node in &tree.nodes {
        match node {
            TreeNode::Split {
                params,
                gain,
                left,
                right,
            } => {
                w.u8(0);
                w.u64(params.projection.terms.len() as u64);
                for &(f, weight) in &params.projection.terms {
                    w.u64(f as u64);
                    w.u8(weight as u8);
                }
                w.f64(params.threshold);
                w.f64(*gain);
                w.u64(*left as u64);
                w.u64(*right as u64);
            }
            TreeNode::Leaf { leaf_id, rows } => {
                w.u8(1);
                w.u64(*leaf_id as u64);
                w.u64(rows.len() as u64);
                for &r in rows {
                    w.u64(r as u64);
                }
            }
        }
    }
}

fn read_tree(r: &mut Reader) -> Result<SmerfTree> {
    let bag_len = r.u64()? as usize;
    let bag: Vec<usize> = (0..bag_len)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<_>>()?;
    let depth = r.u64()? as usize;
    let node_count = r.u64()? as usize;
    let mut nodes = Vec::with_capacity(node_count);
    let mut leaf_nodes: Vec<(usize, usize)> = Vec::new();
    for idx in 0..node_count {
        match r.u8()? {
            0 => {
                let n_terms = r.u64()? as usize;
                let mut terms = Vec::with_capacity(n_terms);
                for _ in 0..n_terms {
                    let f = r.u64()? as usize;
                    let weight = r.u8()? as i8;
                    terms.push((f, weight));
                }
                let threshold = r.f64()?;
                let gain = r.f64()?;
                let left = r.u64()? as usize;
                let right = r.u64()? as usize;
                nodes.push(TreeNode::Split {
                    params: SplitParams {
                        projection: SparseProjection { terms },
                        threshold,
                    },
                    gain,
                    left,
                    right,
                });
            }
            1 => {
                let leaf_id = r.u64()? as usize;
                let n_rows = r.u64()? as usize;
                let rows: Vec<usize> = (0..n_rows)
                    .map(|_| r.u64().map(|v| v as usize))
                    .collect::<Result<_>>()?;
                leaf_nodes.push((leaf_id, idx));
                nodes.push(TreeNode::Leaf { leaf_id, rows });
            }
            _ => return Err(Error::InvalidInput("bad node tag".into())),
        }
    }
    leaf_nodes.sort_unstable();
    SmerfTree::from_parts(nodes, bag, depth, leaf_nodes.into_iter().map(|(_, i)| i).collect())
}

/// Serializes a forest to the versioned binary layout.
pub fn serialize_forest(forest: &SmerfForest) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u64(forest.n as u64);
    w.u64(forest.p as u64);
    w.u64(forest.trees.len() as u64);
    write_hp(&mut w, &forest.hp);
    let flags = match (&forest.train_z, &forest.trained_on) {
        (Some(_), TrainedOn::Distances) => 0b001u8,
        (None, TrainedOn::Distances) => 0b000,
        (Some(_), TrainedOn::Classification { .. }) => 0b011,
        (None, TrainedOn::Classification { .. }) => 0b010,
        (Some(_), TrainedOn::Regression { .. }) => 0b101,
        (None, TrainedOn::Regression { .. }) => 0b100,
    };
    w.u8(flags);
    for tree in &forest.trees {
        write_tree(&mut w, tree);
    }
    if let Some(z) = &forest.train_z {
        for &v in z.values() {
            w.f64(v);
        }
    }
    match &forest.trained_on {
        TrainedOn::Distances => {}
        TrainedOn::Classification { labels } => {
            for &l in labels {
                w.u64(l as u64);
            }
        }
        TrainedOn::Regression { responses } => {
            for &v in responses {
                w.f64(v);
            }
        }
    }
    w.buf
}

/// Parses a forest from bytes written by `serialize_forest`.
pub fn deserialize_forest(bytes: &[u8]) -> Result<SmerfForest> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::InvalidInput("not a model file".into()));
    }
    if r.u32()? != VERSION {
        return Err(Error::InvalidInput("unsupported model version".into()));
    }
    let n = r.u64()? as usize;
    let p = r.u64()? as usize;
    let num_trees = r.u64()? as usize;
    let hp = read_hp(&mut r)?;
    let flags = r.u8()?;
    let trees: Vec<SmerfTree> = (0..num_trees)
        .map(|_| read_tree(&mut r))
        .collect::<Result<_>>()?;
    let train_z = if flags & 0b001 != 0 {
        let values: Vec<f64> = (0..n * n).map(|_| r.f64()).collect::<Result<_>>()?;
        Some(DistanceMatrix::from_flat(n, values)?)
    } else {
        None
    };
    let trained_on = match flags >> 1 {
        0 => TrainedOn::Distances,
        1 => {
            let labels: Vec<usize> = (0..n)
                .map(|_| r.u64().map(|v| v as usize))
                .collect::<Result<_>>()?;
            TrainedOn::Classification { labels }
        }
        2 => {
            let responses: Vec<f64> = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
            TrainedOn::Regression { responses }
        }
        _ => return Err(Error::InvalidInput("bad mode flags".into())),
    };
    if r.pos != bytes.len() {
        return Err(Error::InvalidInput("trailing bytes in model file".into()));
    }
    Ok(SmerfForest {
        trees,
        hp,
        train_z,
        trained_on,
        n,
        p,
    })
}
