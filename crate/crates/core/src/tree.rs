//! Dyadic multi-resolution tree of `(S, F)` operator pairs.
//!
//! Level 1 composes frame pairs `(2t−1, 2t)`; level `ℓ ≥ 2` composes the
//! `S` operators of its two children, with `F` taken at the first child.
//! Node `(ℓ, t)` summarizes frames `(t−1)·2^ℓ + 1 ..= t·2^ℓ` (1-based).

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::composite::{self, ComposeOptions, Embedding, FOperator, Route, Routing, SOperator, Selection};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg::SymmetricMatrix;
use crate::spd::GeodesicParam;

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub level: usize,
    pub t: usize,
    pub s: SOperator,
    pub f: FOperator,
}

impl TreeNode {
    pub fn covered_range(&self) -> (usize, usize) {
        covered_range(self.level, self.t)
    }
}

#[derive(Clone, Debug)]
pub struct OperatorTree {
    n: usize,
    len: usize,
    p: GeodesicParam,
    route: Route,
    levels: Vec<Vec<TreeNode>>,
}

/// Frames covered by node `(level, t)`, 1-based and inclusive.
pub fn covered_range(level: usize, t: usize) -> (usize, usize) {
    let w = 1usize << level;
    ((t - 1) * w + 1, t * w)
}

fn check_sequence(ops: &[SymmetricMatrix]) -> Result<usize> {
    let len = ops.len();
    if len < 2 || !len.is_power_of_two() {
        let suggestion = if len < 2 { 2 } else { 1usize << len.ilog2() };
        return Err(Error::NotPowerOfTwo { len, suggestion });
    }
    let n = ops[0].dim();
    for w in &ops[1..] {
        if w.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: w.dim(),
            });
        }
    }
    Ok(n)
}

/// One level: pairs `(2t−1, 2t)` composed independently.
fn compose_level(inputs: &[SOperator], p: GeodesicParam) -> Result<Vec<(SOperator, FOperator)>> {
    inputs
        .par_chunks(2)
        .map(|pair| composite::compose_operators(&pair[0], &pair[1], p))
        .collect()
}

fn lift(ops: &[SymmetricMatrix], route: Route) -> Result<Vec<SOperator>> {
    ops.par_iter().map(|w| SOperator::from_symmetric(w, route)).collect()
}

/// Builds the whole tree in memory (`T − 1` nodes).
///
/// Routing is decided once for the whole sequence. Nodes of one level are
/// computed on the current rayon pool; the result does not depend on the
/// number of threads.
pub fn build_tree(ops: &[SymmetricMatrix], opts: &ComposeOptions) -> Result<OperatorTree> {
    let n = check_sequence(ops)?;
    let route = composite::choose_route(ops, opts.routing)?;
    let mut current = lift(ops, route)?;
    let mut levels = Vec::new();
    let mut level = 1;
    while current.len() > 1 {
        let composed = compose_level(&current, opts.p)?;
        current = composed.iter().map(|(s, _)| s.clone()).collect();
        levels.push(
            composed
                .into_iter()
                .enumerate()
                .map(|(i, (s, f))| TreeNode { level, t: i + 1, s, f })
                .collect(),
        );
        level += 1;
    }
    Ok(OperatorTree {
        n,
        len: ops.len(),
        p: opts.p,
        route,
        levels,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NodeEntry {
    pub level: usize,
    pub t: usize,
    pub covered: (usize, usize),
    pub s_file: String,
    pub f_file: String,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeManifest {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: f64,
    pub routing: Route,
    pub levels: usize,
    pub nodes: Vec<NodeEntry>,
}

impl TreeManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self> {
        io::read_json(&dir.join(Self::FILE))
    }

    pub fn entry(&self, level: usize, t: usize) -> Result<&NodeEntry> {
        self.nodes
            .iter()
            .find(|e| e.level == level && e.t == t)
            .ok_or_else(|| Error::OutOfBounds(format!("node (level {level}, t {t}) not in manifest")))
    }

    /// Dense `S` of one stored node.
    pub fn read_s(&self, dir: &Path, level: usize, t: usize) -> Result<SymmetricMatrix> {
        SymmetricMatrix::new(io::read_matrix(&dir.join(&self.entry(level, t)?.s_file))?)
    }

    pub fn read_f(&self, dir: &Path, level: usize, t: usize) -> Result<SymmetricMatrix> {
        SymmetricMatrix::new(io::read_matrix(&dir.join(&self.entry(level, t)?.f_file))?)
    }
}

fn node_files(level: usize, t: usize) -> (String, String) {
    (format!("S_L{level}_t{t}.rmra"), format!("F_L{level}_t{t}.rmra"))
}

fn write_node(dir: &Path, level: usize, t: usize, s: &SOperator, f: &FOperator) -> Result<NodeEntry> {
    let (s_file, f_file) = node_files(level, t);
    io::write_matrix(&dir.join(&s_file), s.to_dense()?.as_matrix())?;
    io::write_matrix(&dir.join(&f_file), f.to_dense()?.as_matrix())?;
    Ok(NodeEntry {
        level,
        t,
        covered: covered_range(level, t),
        s_file,
        f_file,
    })
}

/// Builds the tree level by level, writing every node to `dir` as soon as
/// its level is done. Only the `S` operators of the current level are kept
/// in memory.
pub fn build_tree_streaming(ops: &[SymmetricMatrix], opts: &ComposeOptions, dir: &Path) -> Result<TreeManifest> {
    let n = check_sequence(ops)?;
    let route = composite::choose_route(ops, opts.routing)?;
    std::fs::create_dir_all(dir)?;
    let mut current = lift(ops, route)?;
    let mut nodes = Vec::new();
    let mut level = 1;
    while current.len() > 1 {
        let composed = compose_level(&current, opts.p)?;
        for (i, (s, f)) in composed.iter().enumerate() {
            nodes.push(write_node(dir, level, i + 1, s, f)?);
        }
        current = composed.into_iter().map(|(s, _)| s).collect();
        level += 1;
    }
    let manifest = TreeManifest {
        n,
        t: ops.len(),
        p: opts.p.value(),
        routing: route,
        levels: level - 1,
        nodes,
    };
    io::write_json(&dir.join(TreeManifest::FILE), &manifest)?;
    Ok(manifest)
}

impl OperatorTree {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Sequence length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn p(&self) -> GeodesicParam {
        self.p
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, level: usize) -> Result<&[TreeNode]> {
        if level == 0 || level > self.depth() {
            return Err(Error::OutOfBounds(format!("level {level} outside 1..={}", self.depth())));
        }
        Ok(&self.levels[level - 1])
    }

    pub fn node(&self, level: usize, t: usize) -> Result<&TreeNode> {
        let nodes = self.level(level)?;
        if t == 0 || t > nodes.len() {
            return Err(Error::OutOfBounds(format!(
                "frame {t} outside 1..={} at level {level}",
                nodes.len()
            )));
        }
        Ok(&nodes[t - 1])
    }

    pub fn root(&self) -> &TreeNode {
        &self.levels[self.depth() - 1][0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.levels.iter().flatten()
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Writes every node and the manifest to `dir`.
    pub fn save(&self, dir: &Path) -> Result<TreeManifest> {
        std::fs::create_dir_all(dir)?;
        let nodes = self
            .nodes()
            .map(|nd| write_node(dir, nd.level, nd.t, &nd.s, &nd.f))
            .collect::<Result<Vec<_>>>()?;
        let manifest = TreeManifest {
            n: self.n,
            t: self.len,
            p: self.p.value(),
            routing: self.route,
            levels: self.depth(),
            nodes,
        };
        io::write_json(&dir.join(TreeManifest::FILE), &manifest)?;
        Ok(manifest)
    }
}

#[derive(Clone, Debug)]
pub struct NodeEmbeddings {
    pub level: usize,
    pub t: usize,
    pub s: Embedding,
    pub f: Embedding,
}

/// Embeddings of one node.
pub fn node_embeddings(node: &TreeNode, m: usize, s_sel: Selection, f_sel: Selection) -> Result<NodeEmbeddings> {
    if m > node.s.dim() {
        return Err(Error::InvalidParameter(format!("embedding dimension {m} exceeds N = {}", node.s.dim())));
    }
    Ok(NodeEmbeddings {
        level: node.level,
        t: node.t,
        s: composite::embed_eigen(&node.s.eig(), m, s_sel)?,
        f: composite::embed_eigen(&node.f.eig()?, m, f_sel)?,
    })
}

/// Embeddings of every node, in level order.
pub fn tree_embeddings(tree: &OperatorTree, m: usize, s_sel: Selection, f_sel: Selection) -> Result<Vec<NodeEmbeddings>> {
    let nodes: Vec<&TreeNode> = tree.nodes().collect();
    nodes.par_iter().map(|nd| node_embeddings(nd, m, s_sel, f_sel)).collect()
}

/// Default composition options with a routing override.
pub fn options(p: GeodesicParam, routing: Routing) -> ComposeOptions {
    ComposeOptions { p, routing }
}

/// Paths of a stored node's files.
pub fn node_paths(dir: &Path, level: usize, t: usize) -> (PathBuf, PathBuf) {
    let (s, f) = node_files(level, t);
    (dir.join(s), dir.join(f))
}
