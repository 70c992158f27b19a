//! Single trees: split search and recursive partitioning.
//!
//! Both criteria reduce to the same scan. For a node with target rows `t_i`
//! (basis values for `cde`, the rescaled response for `mse`) sorted by a
//! candidate covariate, a split after position `k` scores
//!
//! ```text
//! sum_j S_{L,j}^2 / n_L + sum_j S_{R,j}^2 / n_R
//! ```
//!
//! where `S_L`/`S_R` are the per-column sums over each child. For the cosine
//! basis this is `n` times the negated orthogonal-series loss of the two
//! children; for a scalar response it is the total sum of squares minus the
//! within-child SSE. Larger is better in both cases.

use std::borrow::Cow;

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Orthogonal-series conditional density loss.
    #[default]
    Cde,
    /// Mean squared error of the response; univariate responses only.
    Mse,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::Cde => f.write_str("cde"),
            Criterion::Mse => f.write_str("mse"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cde" => Ok(Criterion::Cde),
            "mse" => Ok(Criterion::Mse),
            other => Err(Error::arg("criterion", format!("unknown criterion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Minimum leaf size, counted with bootstrap multiplicity.
    pub node_size: usize,
    /// Covariates sampled per node.
    pub mtry: usize,
    pub criterion: Criterion,
    pub n_basis: usize,
}

/// `x[feature] <= threshold` goes left, everything else right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule<T> {
    pub feature: usize,
    pub threshold: T,
}

impl<T: Scalar> SplitRule<T> {
    #[inline]
    pub fn goes_left(&self, x: &[T]) -> bool {
        x[self.feature] <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node<T> {
    Split {
        rule: SplitRule<T>,
        left: usize,
        right: usize,
    },
    /// In-bag training rows reaching this leaf, sorted, repeated by bootstrap multiplicity.
    Leaf { members: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafId(pub usize);

/// A fitted tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    /// Rebuilds a tree from its node list, checking that it forms a single rooted binary tree.
    pub fn from_nodes(nodes: Vec<Node<T>>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::arg("nodes", "a tree needs at least one node"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *node {
                for child in [left, right] {
                    // Children are always allocated after their parent.
                    if child <= id || child >= nodes.len() {
                        return Err(Error::arg(
                            "nodes",
                            format!("node {id} has invalid child index {child}"),
                        ));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&c| c != 1) {
            return Err(Error::arg("nodes", "node list is not a single rooted tree"));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn leaf_of(&self, x: &[T]) -> LeafId {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { rule, left, right } => {
                    id = if rule.goes_left(x) { *left } else { *right };
                }
                Node::Leaf { .. } => return LeafId(id),
            }
        }
    }

    /// Members of a leaf; empty if `leaf` is not a leaf of this tree.
    pub fn leaf_members(&self, leaf: LeafId) -> &[usize] {
        match self.nodes.get(leaf.0) {
            Some(Node::Leaf { members }) => members,
            _ => &[],
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (LeafId, &[usize])> + '_ {
        self.nodes.iter().enumerate().filter_map(|(id, n)| match n {
            Node::Leaf { members } => Some((LeafId(id), members.as_slice())),
            Node::Split { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    pub fn root_rule(&self) -> Option<SplitRule<T>> {
        match self.nodes[0] {
            Node::Split { rule, .. } => Some(rule),
            Node::Leaf { .. } => None,
        }
    }
}

#[inline]
fn two_child_score<T: Scalar>(left: &[T], total: &[T], n_left: usize, n: usize) -> T {
    let mut sl = T::zero();
    let mut sr = T::zero();
    for (&l, &t) in left.iter().zip(total) {
        let r = t - l;
        sl += l * l;
        sr += r * r;
    }
    sl / T::of_usize(n_left) + sr / T::of_usize(n - n_left)
}

/// CDE split score for rows already sorted by the candidate covariate, split after position `k`.
///
/// `sorted_rows` holds the non-constant basis values, one row per observation.
/// Panics unless `1 <= k < n`.
pub fn split_score_cde<T: Scalar>(sorted_rows: ArrayView2<T>, k: usize) -> T {
    let n = sorted_rows.nrows();
    assert!(k >= 1 && k < n, "split position {k} outside 1..{n}");
    let m = sorted_rows.ncols();
    let mut left = vec![T::zero(); m];
    let mut total = vec![T::zero(); m];
    for (i, row) in sorted_rows.rows().into_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i < k {
                left[j] += v;
            }
            total[j] += v;
        }
    }
    two_child_score(&left, &total, k, n)
}

/// Scores of every split position `k = 1..n` of `sorted_rows`, by running sums.
///
/// Same arithmetic as the split search: O(m) per position.
pub fn prefix_split_scores<T: Scalar>(sorted_rows: ArrayView2<T>) -> Vec<T> {
    let n = sorted_rows.nrows();
    let m = sorted_rows.ncols();
    let mut total = vec![T::zero(); m];
    for row in sorted_rows.rows() {
        for (t, &v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    let mut left = vec![T::zero(); m];
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for (k, row) in sorted_rows.rows().into_iter().enumerate().take(n.saturating_sub(1)) {
        for (l, &v) in left.iter_mut().zip(row) {
            *l += v;
        }
        out.push(two_child_score(&left, &total, k + 1, n));
    }
    out
}

/// MSE split score `n_L mean_L^2 + n_R mean_R^2`, split after position `k`.
pub fn split_score_mse<T: Scalar>(sorted_z: &[T], k: usize) -> T {
    let n = sorted_z.len();
    assert!(k >= 1 && k < n, "split position {k} outside 1..{n}");
    let left: T = sorted_z[..k].iter().copied().sum();
    let total = left + sorted_z[k..].iter().copied().sum::<T>();
    two_child_score(&[left], &[total], k, n)
}

/// Split search over one node. `targets` is row-major with `m` columns.
struct Splitter<'a, T> {
    x: ArrayView2<'a, T>,
    targets: &'a [T],
    m: usize,
    node_size: usize,
    mtry: usize,
    // Scratch buffers reused across nodes.
    order: Vec<(T, usize)>,
    left: Vec<T>,
    total: Vec<T>,
}

impl<'a, T: Scalar> Splitter<'a, T> {
    fn new(x: ArrayView2<'a, T>, targets: &'a [T], m: usize, params: &TreeParams) -> Self {
        Splitter {
            x,
            targets,
            m,
            node_size: params.node_size.max(1),
            mtry: params.mtry.clamp(1, x.ncols()),
            order: Vec::new(),
            left: vec![T::zero(); m],
            total: vec![T::zero(); m],
        }
    }

    fn best<R: Rng + ?Sized>(&mut self, members: &[usize], rng: &mut R) -> Option<(SplitRule<T>, T)> {
        let n = members.len();
        if n < 2 * self.node_size {
            return None;
        }
        let mut features = rand::seq::index::sample(rng, self.x.ncols(), self.mtry).into_vec();
        features.sort_unstable();

        let mut best: Option<(SplitRule<T>, T)> = None;
        for &f in &features {
            self.order.clear();
            self.order.extend(members.iter().map(|&i| (self.x[[i, f]], i)));
            self.order.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("covariates are finite")
                    .then(a.1.cmp(&b.1))
            });
            if self.order[0].0 == self.order[n - 1].0 {
                continue;
            }

            // Totals accumulated in sorted order so they do not depend on member order.
            self.total.iter_mut().for_each(|v| *v = T::zero());
            for idx in 0..n {
                let i = self.order[idx].1;
                let row = &self.targets[i * self.m..(i + 1) * self.m];
                for (t, &v) in self.total.iter_mut().zip(row) {
                    *t += v;
                }
            }
            self.left.iter_mut().for_each(|v| *v = T::zero());

            let last = n - self.node_size;
            for k in 1..=last {
                let (value, i) = self.order[k - 1];
                let row = &self.targets[i * self.m..(i + 1) * self.m];
                for (l, &v) in self.left.iter_mut().zip(row) {
                    *l += v;
                }
                if k < self.node_size {
                    continue;
                }
                let next = self.order[k].0;
                if !(value < next) {
                    continue;
                }
                let score = two_child_score(&self.left, &self.total, k, n);
                if best.as_ref().is_none_or(|(_, s)| score > *s) {
                    best = Some((
                        SplitRule {
                            feature: f,
                            threshold: midpoint(value, next),
                        },
                        score,
                    ));
                }
            }
        }
        best
    }
}

// Midpoint that never rounds up onto `hi`, so `lo` routes left and `hi` right.
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::of(2.0);
    if mid < hi {
        mid
    } else {
        lo
    }
}

fn contiguous<'a, T: Scalar>(targets: &'a ArrayView2<'a, T>) -> Cow<'a, [T]> {
    match targets.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(targets.iter().copied().collect()),
    }
}

/// Best split of `members` over `mtry` randomly sampled covariates.
///
/// `targets` has one row per training observation (basis values without the
/// constant column for `cde`, the rescaled response for `mse`). Candidate
/// thresholds are midpoints between consecutive distinct covariate values
/// whose children both hold at least `node_size` members. Ties go to the
/// lowest feature index, then the lowest threshold. Returns `None` when no
/// candidate exists.
pub fn best_split<T: Scalar, R: Rng + ?Sized>(
    x: ArrayView2<T>,
    targets: ArrayView2<T>,
    members: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Option<(SplitRule<T>, T)> {
    let flat = contiguous(&targets);
    let mut splitter = Splitter::new(x, &flat, targets.ncols(), params);
    splitter.best(members, rng)
}

/// Grows a tree on the in-bag multiset `bootstrap` (row indices, repeats allowed).
///
/// Nodes with fewer than `2 * node_size` members become leaves; otherwise the
/// best split is always taken when one exists.
pub fn build_tree<T: Scalar, R: Rng + ?Sized>(
    x: ArrayView2<T>,
    targets: ArrayView2<T>,
    params: &TreeParams,
    bootstrap: Vec<usize>,
    rng: &mut R,
) -> Tree<T> {
    let flat = contiguous(&targets);
    let mut splitter = Splitter::new(x, &flat, targets.ncols(), params);

    let mut nodes: Vec<Node<T>> = vec![Node::Leaf { members: Vec::new() }];
    // Depth-first, left child first: fixes the order random draws are consumed.
    let mut pending = vec![(0usize, bootstrap)];
    while let Some((id, mut members)) = pending.pop() {
        match splitter.best(&members, rng) {
            Some((rule, _)) => {
                let (left, right): (Vec<usize>, Vec<usize>) = members
                    .iter()
                    .partition(|&&i| x[[i, rule.feature]] <= rule.threshold);
                let l = nodes.len();
                nodes.push(Node::Leaf { members: Vec::new() });
                nodes.push(Node::Leaf { members: Vec::new() });
                nodes[id] = Node::Split {
                    rule,
                    left: l,
                    right: l + 1,
                };
                pending.push((l + 1, right));
                pending.push((l, left));
            }
            None => {
                members.sort_unstable();
                nodes[id] = Node::Leaf { members };
            }
        }
    }
    Tree { nodes }
}
