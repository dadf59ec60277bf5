//! Regular `(k, m)` aggregation trees and the bottom-up Monte-Carlo
//! aggregation engine.
//!
//! Levels run from `0` (the root `Z`) to `m` (the `N = k^m` leaves); level `p`
//! holds `k^p` nodes indexed `1..=k^p`. Each internal node re-couples the
//! scenario vectors of its children by rank reordering against a fresh copula
//! block and sums them row by row.

use std::collections::{BTreeMap, BTreeSet};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::CopulaSpec;
use crate::error::{Error, Result};
use crate::marginals::MarginalSpec;
use crate::rank::{apply_permutation, reorder_permutation};
use crate::rng::{Purpose, Stream, BLOCK_ROWS};

/// Default cap on the estimated peak scenario memory of one simulation.
pub const DEFAULT_MAX_BYTES: usize = 4 << 30;

/// A regular aggregation tree with identical leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub k: usize,
    pub m: usize,
    pub leaf: MarginalSpec,
    pub copula: CopulaSpec,
    /// Optional copula per internal level `0..m`, overriding `copula`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_copulas: Option<Vec<CopulaSpec>>,
}

impl TreeSpec {
    pub fn new(k: usize, m: usize, leaf: MarginalSpec, copula: CopulaSpec) -> Result<Self> {
        let t = TreeSpec { k, m, leaf, copula, level_copulas: None };
        t.validate()?;
        Ok(t)
    }

    pub fn with_level_copulas(mut self, per_level: Vec<CopulaSpec>) -> Result<Self> {
        self.level_copulas = Some(per_level);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Parameter(format!("branching factor k must be >= 2, got {}", self.k)));
        }
        if self.m < 1 {
            return Err(Error::Parameter("tree depth m must be >= 1".into()));
        }
        if self.k.checked_pow(self.m as u32).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::Resource(format!("tree ({}, {}) has too many leaves", self.k, self.m)));
        }
        self.leaf.validate()?;
        let check = |c: &CopulaSpec| -> Result<()> {
            if c.dim() != self.k {
                return Err(Error::Parameter(format!(
                    "copula dimension {} does not match branching factor {}",
                    c.dim(),
                    self.k
                )));
            }
            c.validate()
        };
        check(&self.copula)?;
        if let Some(levels) = &self.level_copulas {
            if levels.len() != self.m {
                return Err(Error::Parameter(format!(
                    "per-level copula list has length {}, expected m = {}",
                    levels.len(),
                    self.m
                )));
            }
            levels.iter().try_for_each(check)?;
        }
        Ok(())
    }

    /// Number of leaves `N = k^m`.
    pub fn n_leaves(&self) -> usize {
        self.k.pow(self.m as u32)
    }

    pub fn nodes_at(&self, level: usize) -> usize {
        self.k.pow(level as u32)
    }

    pub fn n_nodes(&self) -> usize {
        (0..=self.m).map(|p| self.nodes_at(p)).sum()
    }

    /// Copula coupling the children of nodes at `level` (`0 ≤ level < m`).
    pub fn copula_at(&self, level: usize) -> &CopulaSpec {
        self.level_copulas.as_ref().map_or(&self.copula, |l| &l[level])
    }

    /// The same tree with every copula replaced by independence.
    pub fn independent(&self) -> TreeSpec {
        TreeSpec {
            copula: CopulaSpec::Independence { k: self.k },
            level_copulas: None,
            ..self.clone()
        }
    }
}

/// Position of a node: `level ∈ [0, m]`, `index ∈ [1, k^level]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { level: 0, index: 1 };

    pub fn new(level: usize, index: usize) -> Self {
        NodeId { level, index }
    }

    pub fn parent(&self, k: usize) -> Option<NodeId> {
        (self.level > 0).then(|| NodeId::new(self.level - 1, self.index.div_ceil(k)))
    }

    pub fn children(&self, k: usize) -> impl Iterator<Item = NodeId> + '_ {
        let first = (self.index - 1) * k + 1;
        (first..first + k).map(move |i| NodeId::new(self.level + 1, i))
    }
}

/// Simulated outcomes for a subset of tree nodes, all of length `n_sims`.
/// Row `r` of every stored vector belongs to the same joint scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub seed: u64,
    pub n_sims: usize,
    nodes: BTreeMap<NodeId, Vec<f64>>,
}

impl ScenarioSet {
    pub(crate) fn from_nodes(seed: u64, n_sims: usize, nodes: BTreeMap<NodeId, Vec<f64>>) -> Self {
        ScenarioSet { seed, n_sims, nodes }
    }

    pub fn root(&self) -> &[f64] {
        self.nodes.get(&NodeId::ROOT).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes.get(&id).map(Vec::as_slice)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.nodes.iter().map(|(id, v)| (*id, v.as_slice()))
    }

    pub fn level(&self, level: usize) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.nodes().filter(move |(id, _)| id.level == level)
    }

    /// Row-wise sum over the stored nodes of `level`.
    pub fn level_sum(&self, level: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_sims];
        for (_, v) in self.level(level) {
            acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        }
        acc
    }
}

/// Retention and memory settings for [`aggregate_mc_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOptions {
    /// Levels whose node vectors are returned besides the root.
    pub keep_levels: BTreeSet<usize>,
    pub max_bytes: usize,
}

impl AggregationOptions {
    pub fn root_only() -> Self {
        AggregationOptions { keep_levels: BTreeSet::new(), max_bytes: DEFAULT_MAX_BYTES }
    }

    pub fn keep(levels: impl IntoIterator<Item = usize>) -> Self {
        AggregationOptions { keep_levels: levels.into_iter().collect(), max_bytes: DEFAULT_MAX_BYTES }
    }
}

/// Keeps the root and the leaves.
impl Default for AggregationOptions {
    fn default() -> Self {
        AggregationOptions::keep([usize::MAX])
    }
}

struct Subtree {
    values: Vec<f64>,
    kept: Vec<(NodeId, Vec<f64>)>,
}

struct Engine<'a> {
    tree: &'a TreeSpec,
    n: usize,
    seed: u64,
    keep: BTreeSet<usize>,
}

impl Engine<'_> {
    fn leaf(&self, id: NodeId) -> Vec<f64> {
        // Keyed by leaf index only: trees with equal N see identical leaves.
        let stream = Stream::new(self.seed, Purpose::Leaf, id.index as u64, 0);
        let leaf = self.tree.leaf;
        let mut out = vec![0.0; self.n];
        out.par_chunks_mut(BLOCK_ROWS).enumerate().for_each(|(b, chunk)| {
            let mut rng = stream.block_rng(b as u64);
            for v in chunk.iter_mut() {
                *v = leaf.value_at_score(StandardNormal.sample(&mut rng));
            }
        });
        out
    }

    fn node(&self, id: NodeId) -> Result<Subtree> {
        if id.level == self.tree.m {
            return Ok(Subtree { values: self.leaf(id), kept: Vec::new() });
        }
        let k = self.tree.k;
        let child_ids: Vec<NodeId> = id.children(k).collect();
        let mut children = child_ids
            .par_iter()
            .map(|&c| self.node(c))
            .collect::<Result<Vec<_>>>()?;

        let copula = self.tree.copula_at(id.level);
        if !copula.is_independent() {
            let stream = Stream::new(self.seed, Purpose::Copula, id.level as u64, id.index as u64);
            let scores = copula.sample_scores(self.n, &stream)?;
            children.par_iter_mut().zip(scores.par_iter()).for_each(|(child, col)| {
                let source = reorder_permutation(&child.values, col);
                child.values = apply_permutation(&child.values, &source);
                for (_, v) in child.kept.iter_mut() {
                    *v = apply_permutation(v, &source);
                }
            });
        }

        let mut values = vec![0.0; self.n];
        let keep_children = self.keep.contains(&(id.level + 1));
        let mut kept = Vec::new();
        for (cid, child) in child_ids.into_iter().zip(children) {
            values.iter_mut().zip(&child.values).for_each(|(a, x)| *a += x);
            kept.extend(child.kept);
            if keep_children {
                kept.push((cid, child.values));
            }
        }
        Ok(Subtree { values, kept })
    }
}

fn estimate_bytes(tree: &TreeSpec, n: usize, keep: &BTreeSet<usize>) -> u128 {
    let kept_nodes: u128 = keep.iter().filter(|&&p| p <= tree.m).map(|&p| tree.nodes_at(p) as u128).sum();
    let threads = rayon::current_num_threads() as u128;
    let path = (tree.k as u128) * (tree.m as u128 + 1) + 1;
    // value vectors along the live recursion paths, a copula block and the
    // radix-sort scratch per child being re-coupled
    let per_row = 8 * (kept_nodes + threads * path) + 8 * tree.k as u128 + 32 * threads;
    per_row * n as u128
}

/// Simulates the tree bottom-up and returns the root plus every node on the
/// levels listed in `keep_levels` (`usize::MAX` is read as the leaf level).
pub fn aggregate_mc(tree: &TreeSpec, n_sims: usize, seed: u64, keep_levels: &[usize]) -> Result<ScenarioSet> {
    aggregate_mc_with(tree, n_sims, seed, &AggregationOptions::keep(keep_levels.iter().copied()))
}

pub fn aggregate_mc_with(
    tree: &TreeSpec,
    n_sims: usize,
    seed: u64,
    options: &AggregationOptions,
) -> Result<ScenarioSet> {
    tree.validate()?;
    if n_sims < 2 {
        return Err(Error::Parameter(format!("n_sims must be >= 2, got {n_sims}")));
    }
    if n_sims > u32::MAX as usize {
        return Err(Error::Resource(format!("n_sims {n_sims} exceeds 2^32 - 1")));
    }
    let keep: BTreeSet<usize> = options
        .keep_levels
        .iter()
        .map(|&p| if p == usize::MAX { tree.m } else { p })
        .collect();
    if let Some(&bad) = keep.iter().find(|&&p| p > tree.m) {
        return Err(Error::Parameter(format!("keep level {bad} exceeds tree depth {}", tree.m)));
    }
    let needed = estimate_bytes(tree, n_sims, &keep);
    if needed > options.max_bytes as u128 {
        return Err(Error::Resource(format!(
            "simulation needs about {needed} bytes, budget is {} bytes",
            options.max_bytes
        )));
    }

    let engine = Engine { tree, n: n_sims, seed, keep };
    let root = engine.node(NodeId::ROOT)?;
    let mut nodes: BTreeMap<NodeId, Vec<f64>> = root.kept.into_iter().collect();
    nodes.insert(NodeId::ROOT, root.values);
    Ok(ScenarioSet::from_nodes(seed, n_sims, nodes))
}

/// The same simulation with independence at every node. Leaves are identical
/// to those of [`aggregate_mc`] under the same seed.
pub fn independent_baseline(tree: &TreeSpec, n_sims: usize, seed: u64) -> Result<ScenarioSet> {
    aggregate_mc_with(&tree.independent(), n_sims, seed, &AggregationOptions::root_only())
}

/// `N × xTVaR_α(leaf)`: the sum at risk under full dependence.
pub fn standalone_sum_at_risk(tree: &TreeSpec, alpha: f64) -> Result<f64> {
    tree.validate()?;
    Ok(tree.n_leaves() as f64 * tree.leaf.exact_xtvar(alpha)?)
}
