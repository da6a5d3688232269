//! Cross-ratio degrees by counting trivalent leaf-labeled trees.
//!
//! Each 4-set is split as `{a, b} ⊔ {c, d}`. A tree survives a quadruple if
//! the leaf paths `a–b` and `c–d` are vertex-disjoint and joined by an edge;
//! that edge is then contracted and the next quadruple is tested on the
//! contracted tree. The degree is the number of trees surviving every step.

use rayon::prelude::*;

use super::OracleError;
use crate::system::{Label, MarkSet};

/// Default largest leaf count accepted by [`tree_count`] (2027025 trees).
pub const TREE_CAP: usize = 10;

/// A 4-set split into two pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitQuadruple {
    pub first: [Label; 2],
    pub second: [Label; 2],
}

impl SplitQuadruple {
    /// Two smallest marks against the two largest.
    pub fn default_split(set: MarkSet) -> Result<Self, OracleError> {
        let v = set.to_vec();
        if v.len() != 4 {
            return Err(OracleError::NotQuadruple {
                set,
                n: set.max().unwrap_or(0) as usize,
            });
        }
        Ok(SplitQuadruple {
            first: [v[0], v[1]],
            second: [v[2], v[3]],
        })
    }

    pub fn new(set: MarkSet, first: [Label; 2], second: [Label; 2]) -> Result<Self, OracleError> {
        let union: MarkSet = first.iter().chain(&second).copied().collect();
        if set.len() != 4 || union != set {
            return Err(OracleError::BadSplit {
                set,
                split: [first, second],
            });
        }
        Ok(SplitQuadruple { first, second })
    }

    pub fn set(&self) -> MarkSet {
        self.first.iter().chain(&self.second).copied().collect()
    }
}

/// Unrooted tree on at most 64 vertices. Leaf `l` is vertex `l - 1`; internal
/// vertices follow the leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafTree {
    adj: Vec<u64>,
    alive: u64,
    leaves: usize,
}

impl LeafTree {
    /// Three leaves on one internal vertex.
    fn tripod(leaves: usize) -> Self {
        let vertices = 2 * leaves - 2;
        assert!(vertices <= 64, "too many vertices for the bitset tree");
        let hub = leaves;
        let mut tree = LeafTree {
            adj: vec![0; vertices],
            alive: 0b111 | (1u64 << hub),
            leaves,
        };
        for leaf in 0..3 {
            tree.link(leaf, hub);
        }
        tree
    }

    fn link(&mut self, u: usize, v: usize) {
        self.adj[u] |= 1 << v;
        self.adj[v] |= 1 << u;
    }

    fn unlink(&mut self, u: usize, v: usize) {
        self.adj[u] &= !(1 << v);
        self.adj[v] &= !(1 << u);
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v < self.leaves
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    pub fn vertex_count(&self) -> usize {
        self.alive.count_ones() as usize
    }

    /// Edges `(u, v)` with `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in iter_bits(self.alive) {
            for v in iter_bits(self.adj[u]) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Adds leaf vertex `leaf` by subdividing edge `(u, v)` with the internal
    /// vertex `hub`.
    fn graft(&mut self, leaf: usize, hub: usize, (u, v): (usize, usize)) {
        self.unlink(u, v);
        self.link(u, hub);
        self.link(hub, v);
        self.link(hub, leaf);
        self.alive |= (1 << leaf) | (1 << hub);
    }

    /// Vertices of the unique path between `from` and `to`, as a bitset.
    pub fn path(&self, from: usize, to: usize) -> u64 {
        let mut parent = [usize::MAX; 64];
        let mut stack = vec![from];
        parent[from] = from;
        while let Some(u) = stack.pop() {
            if u == to {
                break;
            }
            for v in iter_bits(self.adj[u]) {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        assert_ne!(parent[to], usize::MAX, "tree is connected");
        let mut mask = 1u64 << to;
        let mut v = to;
        while v != from {
            v = parent[v];
            mask |= 1 << v;
        }
        mask
    }

    /// Merges `v` into `u`.
    pub fn contract(&mut self, u: usize, v: usize) {
        assert!(
            !self.is_leaf(u) && !self.is_leaf(v),
            "contraction never touches a leaf"
        );
        self.unlink(u, v);
        for w in iter_bits(self.adj[v]) {
            self.unlink(v, w);
            self.link(u, w);
        }
        self.alive &= !(1 << v);
    }

    /// Tests one split quadruple and contracts the separating edge on
    /// success.
    pub fn separate_and_contract(&mut self, quad: &SplitQuadruple) -> bool {
        let [a, b] = quad.first.map(|l| l as usize - 1);
        let [c, d] = quad.second.map(|l| l as usize - 1);
        let left = self.path(a, b);
        let right = self.path(c, d);
        if left & right != 0 {
            return false;
        }
        let mut found = None;
        for u in iter_bits(left) {
            for v in iter_bits(self.adj[u] & right) {
                assert!(found.is_none(), "separating edge is unique in a tree");
                found = Some((u, v));
            }
        }
        match found {
            Some((u, v)) => {
                self.contract(u, v);
                true
            }
            None => false,
        }
    }
}

fn iter_bits(mut bits: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if bits == 0 {
            return None;
        }
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        Some(v)
    })
}

/// Visits every trivalent tree with leaves `1..=n` exactly once, by inserting
/// leaf `k + 1` on each of the `2k - 3` edges of every tree on `k` leaves.
pub fn for_each_trivalent_tree(n: usize, mut visit: impl FnMut(&LeafTree)) {
    assert!(n >= 3, "trees need at least 3 leaves");
    grow_from(&LeafTree::tripod(n), 3, &mut visit);
}

/// `(2n - 5)!!`, the number of trivalent trees on `n ≥ 3` leaves.
pub fn trivalent_tree_total(n: usize) -> u64 {
    (1..=(2 * n as u64).saturating_sub(5)).step_by(2).product()
}

fn count_surviving(tree: &LeafTree, quads: &[SplitQuadruple]) -> bool {
    let mut work = tree.clone();
    quads.iter().all(|q| work.separate_and_contract(q))
}

/// Number of trees surviving the quadruples in order, for `n - 3` split
/// 4-subsets of `{1..n}`.
pub fn tree_count(quads: &[SplitQuadruple], n: usize) -> Result<u64, OracleError> {
    tree_count_with_cap(quads, n, TREE_CAP)
}

pub fn tree_count_with_cap(
    quads: &[SplitQuadruple],
    n: usize,
    cap: usize,
) -> Result<u64, OracleError> {
    if n < 3 {
        return Err(OracleError::TooFewMarks { min: 3, n });
    }
    if quads.len() + 3 != n {
        return Err(OracleError::WrongLength {
            expected: n - 3,
            got: quads.len(),
        });
    }
    let ambient = MarkSet::range(n);
    for q in quads {
        let set = q.set();
        if set.len() != 4 || !set.is_subset(ambient) {
            return Err(OracleError::NotQuadruple { set, n });
        }
    }
    if n > cap {
        return Err(OracleError::OverTreeCap { n, cap });
    }
    if n == 3 {
        return Ok(1);
    }
    // The three placements of leaf 4 are independent subtrees of the search.
    let tripod = LeafTree::tripod(n);
    let hub = n + 1;
    let count = tripod
        .edges()
        .into_par_iter()
        .map(|edge| {
            let mut first = tripod.clone();
            first.graft(3, hub, edge);
            let mut local = 0u64;
            let mut rest = |tree: &LeafTree| {
                if count_surviving(tree, quads) {
                    local += 1;
                }
            };
            grow_from(&first, 4, &mut rest);
            local
        })
        .sum();
    Ok(count)
}

fn grow_from(tree: &LeafTree, next: usize, visit: &mut dyn FnMut(&LeafTree)) {
    if next == tree.leaves {
        visit(tree);
        return;
    }
    let hub = tree.leaves + next - 2;
    for edge in tree.edges() {
        let mut child = tree.clone();
        child.graft(next, hub, edge);
        grow_from(&child, next + 1, visit);
    }
}

/// Default splits for a list of 4-sets.
pub fn default_splits(sets: &[MarkSet]) -> Result<Vec<SplitQuadruple>, OracleError> {
    sets.iter()
        .map(|&s| SplitQuadruple::default_split(s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn set(labels: &[Label]) -> MarkSet {
        labels.iter().copied().collect()
    }

    /// Canonical description of a tree: the set of leaf splits of its edges.
    fn splits(tree: &LeafTree) -> Vec<u64> {
        let leaves_mask = (1u64 << tree.leaves) - 1;
        let mut out: Vec<u64> = tree
            .edges()
            .into_iter()
            .map(|(u, v)| {
                let mut t = tree.clone();
                t.unlink(u, v);
                let mut seen = 1u64 << u;
                let mut stack = vec![u];
                while let Some(x) = stack.pop() {
                    for y in iter_bits(t.adj[x]) {
                        if seen & (1 << y) == 0 {
                            seen |= 1 << y;
                            stack.push(y);
                        }
                    }
                }
                let side = seen & leaves_mask;
                if side & 1 == 0 {
                    leaves_mask & !side
                } else {
                    side
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn enumeration_counts_and_distinctness() {
        for n in 3..=7 {
            let mut seen = HashSet::new();
            let mut count = 0u64;
            for_each_trivalent_tree(n, |t| {
                count += 1;
                assert_eq!(t.vertex_count(), 2 * n - 2);
                for v in 0..2 * n - 2 {
                    let expected = if t.is_leaf(v) { 1 } else { 3 };
                    assert_eq!(t.degree(v), expected);
                }
                seen.insert(splits(t));
            });
            assert_eq!(count, trivalent_tree_total(n));
            assert_eq!(seen.len() as u64, count, "n = {n}");
        }
        assert_eq!(trivalent_tree_total(9), 135135);
        assert_eq!(trivalent_tree_total(10), 2027025);
    }

    #[test]
    fn single_quadruple_on_four_leaves() {
        let q = SplitQuadruple::new(set(&[1, 2, 3, 4]), [1, 2], [3, 4]).unwrap();
        assert_eq!(tree_count(&[q], 4).unwrap(), 1);
    }

    #[test]
    fn fig1_trees() {
        let sets = [
            set(&[1, 2, 3, 4]),
            set(&[1, 2, 3, 5]),
            set(&[4, 5, 6, 7]),
            set(&[1, 2, 6, 7]),
        ];
        assert_eq!(tree_count(&default_splits(&sets).unwrap(), 7).unwrap(), 2);
        let other = [
            SplitQuadruple::new(sets[0], [1, 3], [2, 4]).unwrap(),
            SplitQuadruple::new(sets[1], [1, 5], [2, 3]).unwrap(),
            SplitQuadruple::new(sets[2], [4, 7], [5, 6]).unwrap(),
            SplitQuadruple::new(sets[3], [1, 6], [2, 7]).unwrap(),
        ];
        assert_eq!(tree_count(&other, 7).unwrap(), 2);
    }

    #[test]
    fn chain_on_five_leaves() {
        let sets = [set(&[1, 2, 3, 4]), set(&[2, 3, 4, 5])];
        assert_eq!(tree_count(&default_splits(&sets).unwrap(), 5).unwrap(), 1);
    }

    #[test]
    fn errors() {
        let q = SplitQuadruple::default_split(set(&[1, 2, 3, 4])).unwrap();
        assert!(matches!(
            tree_count(&[q, q], 4),
            Err(OracleError::WrongLength { .. })
        ));
        assert!(matches!(
            tree_count_with_cap(&[q; 8], 11, 10),
            Err(OracleError::OverTreeCap { n: 11, cap: 10 })
        ));
        assert!(SplitQuadruple::new(set(&[1, 2, 3, 4]), [1, 2], [2, 4]).is_err());
        assert!(SplitQuadruple::default_split(set(&[1, 2, 3])).is_err());
        let outside = SplitQuadruple::default_split(set(&[1, 2, 3, 9])).unwrap();
        assert!(matches!(
            tree_count(&[outside], 4),
            Err(OracleError::NotQuadruple { .. })
        ));
    }
}
