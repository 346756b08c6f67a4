//! CART regression trees with per-node random feature subsets.
//!
//! Splits maximize the decrease in the sum of squared deviations. Thresholds
//! sit at midpoints between consecutive distinct values and rows with
//! `x[feature] <= threshold` go left. Equal scores resolve to the lowest
//! feature index, then the lowest threshold.
//!
//! Bags with repeated rows are grown on unique rows carrying integer
//! weights; a weighted node is indistinguishable from the node holding the
//! repeated rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, tag};

/// Two scores closer than this (relative) are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;
/// Scores below this fraction of the parent's sum of squares count as zero.
pub const ZERO_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl TreeParams {
    /// Regression defaults for `p` descriptors: `mtry = max(1, p / 3)`,
    /// `min_node_size = 5`, unlimited depth.
    pub fn for_features(p: usize, seed: u64) -> Self {
        TreeParams {
            mtry: (p / 3).max(1),
            min_node_size: 5,
            max_depth: None,
            seed,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::invalid(format!("mtry = {} outside 1..={p}", self.mtry)));
        }
        if self.min_node_size < 2 {
            return Err(Error::invalid("min_node_size must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// `SS(parent) - SS(left) - SS(right)`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        prediction: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeFile", into = "TreeFile")]
pub struct RegressionTree {
    nodes: Vec<Node>,
    root: usize,
}

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TreeFile {
    version: u32,
    root: usize,
    nodes: Vec<Node>,
}

impl From<RegressionTree> for TreeFile {
    fn from(t: RegressionTree) -> Self {
        TreeFile {
            version: TREE_FORMAT_VERSION,
            root: t.root,
            nodes: t.nodes,
        }
    }
}

impl TryFrom<TreeFile> for RegressionTree {
    type Error = Error;

    fn try_from(f: TreeFile) -> Result<Self> {
        if f.version != TREE_FORMAT_VERSION {
            return Err(Error::MalformedTree(format!("unsupported tree version {}", f.version)));
        }
        RegressionTree::from_nodes(f.nodes, f.root)
    }
}

impl RegressionTree {
    /// Assembles a tree, checking that the node graph is a proper binary tree.
    pub fn from_nodes(nodes: Vec<Node>, root: usize) -> Result<Self> {
        let t = RegressionTree { nodes, root };
        t.validate()?;
        Ok(t)
    }

    pub fn leaf(prediction: f64, count: usize) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { prediction, count }],
            root: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(Error::MalformedTree("root out of range".into()));
        }
        let mut visited = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= n {
                return Err(Error::MalformedTree(format!("child id {id} out of range")));
            }
            if std::mem::replace(&mut visited[id], true) {
                return Err(Error::MalformedTree(format!("node {id} reachable twice")));
            }
            if let Node::Split { left, right, threshold, .. } = self.nodes[id] {
                if !threshold.is_finite() {
                    return Err(Error::MalformedTree(format!("node {id} has non-finite threshold")));
                }
                stack.push(left);
                stack.push(right);
            }
        }
        if let Some(id) = visited.iter().position(|v| !v) {
            return Err(Error::MalformedTree(format!("node {id} unreachable")));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, id: usize) -> usize {
            match t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, self.root)
    }

    /// Ascending, duplicate-free list of features used by some split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Id of the leaf reached by the feature accessor `value`.
    #[inline]
    pub(crate) fn leaf_with(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split { feature, threshold, left, right } => {
                    id = if value(feature) <= threshold { left } else { right };
                }
            }
        }
    }

    #[inline]
    pub(crate) fn predict_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        match self.nodes[self.leaf_with(value)] {
            Node::Leaf { prediction, .. } => prediction,
            Node::Split { .. } => unreachable!("leaf_with returns leaves"),
        }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        match self.used_features().last() {
            Some(&f) if f >= width => Err(Error::MalformedTree(format!(
                "split on feature {f} but input has {width} values"
            ))),
            _ => Ok(()),
        }
    }

    /// Routes `x` down the tree and returns the leaf mean.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_width(x.len())?;
        Ok(self.predict_with(|f| x[f]))
    }

    /// Leaf id reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        self.check_width(x.len())?;
        Ok(self.leaf_with(|f| x[f]))
    }

    pub fn predict_row(&self, d: &Dataset, row: usize) -> f64 {
        self.predict_with(|f| d.value(row, f))
    }
}

/// Per-column value ranks and sorted row orders, shared by every tree grown
/// on one dataset.
pub(crate) struct RankTable {
    n: usize,
    ranks: Vec<u32>,
    order: Vec<u32>,
}

impl RankTable {
    pub(crate) fn new(d: &Dataset) -> Self {
        let n = d.n_rows();
        let p = d.n_features();
        let mut ranks = vec![0u32; n * p];
        let mut order = vec![0u32; n * p];
        for j in 0..p {
            let col = d.column(j);
            let ord = &mut order[j * n..(j + 1) * n];
            for (k, o) in ord.iter_mut().enumerate() {
                *o = k as u32;
            }
            ord.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            let out = &mut ranks[j * n..(j + 1) * n];
            let mut r = 0u32;
            for k in 0..n {
                if k > 0 && col[ord[k] as usize] != col[ord[k - 1] as usize] {
                    r += 1;
                }
                out[ord[k] as usize] = r;
            }
        }
        RankTable { n, ranks, order }
    }

    #[inline]
    fn ranks(&self, j: usize) -> &[u32] {
        &self.ranks[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    fn order(&self, j: usize) -> &[u32] {
        &self.order[j * self.n..(j + 1) * self.n]
    }
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Entry of a presorted list: a row index together with the rank of that
/// row's value, so that a sweep never looks the rank up.
trait Entry: Copy + Default {
    fn pack(row: u32, rank: u32) -> Self;
    fn row(self) -> usize;
    fn rank(self) -> u32;
}

/// 16-bit row and rank; datasets of at most 65 536 rows.
impl Entry for u32 {
    #[inline]
    fn pack(row: u32, rank: u32) -> Self {
        (rank << 16) | row
    }
    #[inline]
    fn row(self) -> usize {
        (self & 0xFFFF) as usize
    }
    #[inline]
    fn rank(self) -> u32 {
        self >> 16
    }
}

impl Entry for u64 {
    #[inline]
    fn pack(row: u32, rank: u32) -> Self {
        ((rank as u64) << 32) | row as u64
    }
    #[inline]
    fn row(self) -> usize {
        (self & 0xFFFF_FFFF) as usize
    }
    #[inline]
    fn rank(self) -> u32 {
        (self >> 32) as u32
    }
}

/// Largest row count served by the compact `u32` entries.
const COMPACT_ROWS: usize = 1 << 16;

/// Presorted split search.
///
/// Every feature keeps the in-bag rows sorted by value; a node owns the same
/// `[start, end)` range in every feature's list. Searching a node is a
/// contiguous sweep, and splitting it stably partitions each list's range
/// into left rows followed by right rows.
struct NodeSearch<'a, E> {
    d: &'a Dataset,
    weight: Vec<f64>,
    lists: Vec<E>,
    m: usize,
    centered: Vec<f64>,
    goes_left: Vec<bool>,
    scratch: Vec<E>,
}

/// Summary of the rows in one node.
struct NodeStats {
    weight: f64,
    mean: f64,
    sum: f64,
    ss: f64,
    constant: bool,
}

impl<'a, E: Entry> NodeSearch<'a, E> {
    fn new(d: &'a Dataset, ranks: &'a RankTable, bag_rows: &[usize]) -> Self {
        let n = d.n_rows();
        let p = d.n_features();
        let mut weight = vec![0.0; n];
        for &r in bag_rows {
            weight[r] += 1.0;
        }
        let m = weight.iter().filter(|&&w| w > 0.0).count();
        let mut lists = vec![E::default(); m * p + 1];
        let mut w = 0;
        for j in 0..p {
            let rank = ranks.ranks(j);
            for &r in ranks.order(j) {
                lists[w] = E::pack(r, rank[r as usize]);
                w += (weight[r as usize] > 0.0) as usize;
            }
        }
        lists.truncate(m * p);
        NodeSearch {
            d,
            weight,
            lists,
            m,
            centered: vec![0.0; n],
            goes_left: vec![false; n],
            scratch: vec![E::default(); m + 1],
        }
    }

    #[inline]
    fn segment(&self, f: usize, start: usize, end: usize) -> &[E] {
        &self.lists[f * self.m + start..f * self.m + end]
    }

    /// Stats of rows `[start, end)`; also refreshes their centered responses.
    fn stats(&mut self, start: usize, end: usize) -> NodeStats {
        let y = self.d.response();
        let rows = &self.lists[start..end];
        let first = y[rows[0].row()];
        let mut weight = 0.0;
        let mut raw = 0.0;
        let mut constant = true;
        for &e in rows {
            let r = e.row();
            weight += self.weight[r];
            raw += self.weight[r] * y[r];
            constant &= y[r] == first;
        }
        let mean = raw / weight;
        let mut sum = 0.0;
        let mut ss = 0.0;
        for &e in rows {
            let r = e.row();
            let c = y[r] - mean;
            self.centered[r] = c;
            sum += self.weight[r] * c;
            ss += self.weight[r] * c * c;
        }
        NodeStats {
            weight,
            mean,
            sum,
            ss,
            constant,
        }
    }

    /// Best split of rows `[start, end)` over ascending `features`.
    fn best(&self, start: usize, end: usize, node: &NodeStats, features: &[usize]) -> Option<SplitCandidate> {
        if node.constant || end - start < 2 {
            return None;
        }
        let base = node.sum * node.sum / node.weight;
        // a candidate wins when  num / den - base > target
        let mut target = ZERO_GAIN * node.ss;
        let mut best: Option<(usize, usize)> = None;
        for &f in features {
            let seg = self.segment(f, start, end);
            let mut wl = 0.0;
            let mut sl = 0.0;
            let mut prev_rank = seg[0].rank();
            if prev_rank == seg[seg.len() - 1].rank() {
                continue;
            }
            for k in 0..seg.len() - 1 {
                let r = seg[k].row();
                wl += self.weight[r];
                sl += self.weight[r] * self.centered[r];
                let next_rank = seg[k + 1].rank();
                if next_rank == prev_rank {
                    continue;
                }
                prev_rank = next_rank;
                let wr = node.weight - wl;
                let sr = node.sum - sl;
                let num = sl * sl * wr + sr * sr * wl;
                let den = wl * wr;
                if num > (target + base) * den {
                    let score = num / den - base;
                    target = score + TIE_TOLERANCE * score.abs();
                    best = Some((f, k));
                }
            }
        }
        best.map(|(f, k)| {
            let seg = self.segment(f, start, end);
            let col = self.d.column(f);
            let (mut wl, mut sl) = (0.0, 0.0);
            for &e in &seg[..=k] {
                wl += self.weight[e.row()];
                sl += self.weight[e.row()] * self.centered[e.row()];
            }
            let wr = node.weight - wl;
            let sr = node.sum - sl;
            SplitCandidate {
                feature: f,
                threshold: midpoint(col[seg[k].row()], col[seg[k + 1].row()]),
                score: (sl * sl * wr + sr * sr * wl) / (wl * wr) - base,
            }
        })
    }

    /// Partitions `[start, end)` of every list by the split; returns the
    /// size of the left block.
    ///
    /// `terminal(left_weight, left_rows)` tells whether a child will be a
    /// leaf; when both are, only the row list (feature 0) is partitioned.
    fn partition(
        &mut self,
        start: usize,
        end: usize,
        split: &SplitCandidate,
        terminal: impl Fn(f64, usize) -> bool,
    ) -> usize {
        let col = self.d.column(split.feature);
        let (mut wl, mut nl, mut wr) = (0.0, 0, 0.0);
        for &e in &self.lists[start..end] {
            let r = e.row();
            let left = col[r] <= split.threshold;
            self.goes_left[r] = left;
            if left {
                wl += self.weight[r];
                nl += 1;
            } else {
                wr += self.weight[r];
            }
        }
        let lists_needed = if terminal(wl, nl) && terminal(wr, end - start - nl) {
            1
        } else {
            self.d.n_features()
        };
        let mut n_left = 0;
        for f in 0..lists_needed {
            let seg = &mut self.lists[f * self.m + start..f * self.m + end];
            let mut l = 0;
            let mut rc = 0;
            for k in 0..seg.len() {
                let r = seg[k];
                let g = self.goes_left[r.row()] as usize;
                // l <= k, so the write never clobbers an unread entry
                seg[l] = r;
                self.scratch[rc] = r;
                l += g;
                rc += 1 - g;
            }
            seg[l..].copy_from_slice(&self.scratch[..rc]);
            n_left = l;
        }
        n_left
    }
}

/// Best variance-reduction split of `rows` over `candidate_features`.
///
/// `rows` may repeat indices (a bag). Returns `None` when no candidate
/// feature has two distinct values among the rows or no split reduces the
/// sum of squares.
pub fn best_split(d: &Dataset, rows: &[usize], candidate_features: &[usize]) -> Option<SplitCandidate> {
    if rows.is_empty() || d.n_features() == 0 {
        return None;
    }
    let ranks = RankTable::new(d);
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    if d.n_rows() <= COMPACT_ROWS {
        root_split::<u32>(d, &ranks, rows, &features)
    } else {
        root_split::<u64>(d, &ranks, rows, &features)
    }
}

fn root_split<E: Entry>(d: &Dataset, ranks: &RankTable, rows: &[usize], features: &[usize]) -> Option<SplitCandidate> {
    let mut search = NodeSearch::<E>::new(d, ranks, rows);
    let m = search.m;
    let stats = search.stats(0, m);
    search.best(0, m, &stats, features)
}

/// Grows a tree on the (possibly repeated) `rows` of `d`.
pub fn fit_tree(d: &Dataset, rows: &[usize], params: &TreeParams) -> Result<RegressionTree> {
    let ranks = RankTable::new(d);
    grow(d, &ranks, rows, params)
}

/// Uniform `k`-subset of `0..p` in ascending order (Floyd's algorithm on a
/// bitset). `bits` must hold `p` zeroed bits and is left zeroed.
fn sample_features<R: Rng>(rng: &mut R, p: usize, k: usize, bits: &mut [u64], out: &mut Vec<usize>) {
    for j in p - k..p {
        let t = rng.random_range(0..=j);
        let pick = if bits[t / 64] >> (t % 64) & 1 == 1 { j } else { t };
        bits[pick / 64] |= 1 << (pick % 64);
    }
    out.clear();
    for (w, word) in bits.iter_mut().enumerate() {
        let mut b = *word;
        while b != 0 {
            out.push(w * 64 + b.trailing_zeros() as usize);
            b &= b - 1;
        }
        *word = 0;
    }
}

pub(crate) fn grow(d: &Dataset, ranks: &RankTable, rows: &[usize], params: &TreeParams) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot grow a tree on zero rows"));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= d.n_rows()) {
        return Err(Error::invalid(format!("row {bad} out of range")));
    }
    params.validate(d.n_features())?;
    Ok(if d.n_rows() <= COMPACT_ROWS {
        grow_with::<u32>(d, ranks, rows, params)
    } else {
        grow_with::<u64>(d, ranks, rows, params)
    })
}

fn grow_with<E: Entry>(d: &Dataset, ranks: &RankTable, rows: &[usize], params: &TreeParams) -> RegressionTree {
    let p = d.n_features();

    struct Task {
        id: usize,
        start: usize,
        end: usize,
        depth: usize,
        path: u64,
    }

    let mut search = NodeSearch::<E>::new(d, ranks, rows);
    let mut nodes: Vec<Node> = vec![Node::Leaf { prediction: 0.0, count: 0 }];
    let mut stack = vec![Task {
        id: 0,
        start: 0,
        end: search.m,
        depth: 0,
        path: 1,
    }];
    let mut features = Vec::with_capacity(params.mtry);
    let mut chosen = vec![0u64; p.div_ceil(64)];

    while let Some(task) = stack.pop() {
        let stats = search.stats(task.start, task.end);
        let leaf = Node::Leaf {
            prediction: stats.mean,
            count: stats.weight as usize,
        };
        let can_split = stats.weight >= params.min_node_size as f64
            && task.end - task.start >= 2
            && !stats.constant
            && params.max_depth.is_none_or(|m| task.depth < m);
        if !can_split {
            nodes[task.id] = leaf;
            continue;
        }
        sample_features(&mut stream(params.seed, &[tag::NODE, task.path]), p, params.mtry, &mut chosen, &mut features);
        let Some(split) = search.best(task.start, task.end, &stats, &features) else {
            nodes[task.id] = leaf;
            continue;
        };
        let child_depth = task.depth + 1;
        let terminal = |weight: f64, rows: usize| {
            weight < params.min_node_size as f64
                || rows < 2
                || params.max_depth.is_some_and(|m| child_depth >= m)
        };
        let mid = task.start + search.partition(task.start, task.end, &split, terminal);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { prediction: 0.0, count: 0 });
        nodes.push(Node::Leaf { prediction: 0.0, count: 0 });
        nodes[task.id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push(Task {
            id: right,
            start: mid,
            end: task.end,
            depth: task.depth + 1,
            path: derive_seed(task.path, &[1]),
        });
        stack.push(Task {
            id: left,
            start: task.start,
            end: mid,
            depth: task.depth + 1,
            path: derive_seed(task.path, &[0]),
        });
    }
    RegressionTree { nodes, root: 0 }
}
