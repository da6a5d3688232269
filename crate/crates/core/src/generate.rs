//! Instance generators, random and exhaustive.

use rand::seq::index::sample;
use rand::Rng;

use crate::oracles::transversals::TransversalInstance;
use crate::system::{Label, MarkSet, Pair, PairSystem};

/// A uniformly random `k`-subset of `{1, ..., n}`.
pub fn random_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> MarkSet {
    sample(rng, n, k)
        .into_iter()
        .map(|x| (x + 1) as Label)
        .collect()
}

/// A random element of a nonempty set.
pub fn random_member<R: Rng>(rng: &mut R, set: MarkSet) -> Label {
    let labels = set.to_vec();
    labels[rng.gen_range(0..labels.len())]
}

/// `n - 3` pairs on `{1, ..., n}` with set sizes drawn from
/// `min_size..=max_size` and uniformly random marked points.
pub fn random_square_system<R: Rng>(
    rng: &mut R,
    n: usize,
    min_size: usize,
    max_size: usize,
) -> PairSystem {
    let pairs = (0..n - 3)
        .map(|_| {
            let k = rng.gen_range(min_size..=max_size.min(n));
            let set = random_subset(rng, n, k);
            Pair::new(set, random_member(rng, set))
        })
        .collect();
    PairSystem::on_range(n, pairs)
}

/// A random relabeling of the system by a permutation of its ambient set.
pub fn random_relabeling<R: Rng>(rng: &mut R, system: &PairSystem) -> PairSystem {
    use rand::seq::SliceRandom;
    let labels = system.ambient.to_vec();
    let mut image = labels.clone();
    image.shuffle(rng);
    system.relabel(|l| image[labels.iter().position(|&x| x == l).expect("ambient label")])
}

/// Adds each mark outside `S_j` to `S_j` with probability `p`.
pub fn random_enlargement<R: Rng>(rng: &mut R, system: &PairSystem, p: f64) -> PairSystem {
    let pairs = system
        .pairs
        .iter()
        .map(|pair| {
            let extra: MarkSet = (system.ambient - pair.set)
                .iter()
                .filter(|_| rng.gen_bool(p))
                .collect();
            Pair::new(pair.set | extra, pair.psi)
        })
        .collect();
    PairSystem::new(system.ambient, pairs)
}

pub fn random_transversal_instance<R: Rng>(
    rng: &mut R,
    n: usize,
    full: bool,
) -> TransversalInstance {
    let base = MarkSet::range(n - 3);
    let items = (0..n - 3)
        .map(|_| {
            let t = if full {
                base
            } else {
                base.iter().filter(|_| rng.gen_bool(0.5)).collect()
            };
            (t, rng.gen_range(n - 2..=n) as Label)
        })
        .collect();
    TransversalInstance::new(n, items).expect("generated instance is valid")
}

/// All `k`-subsets of `ambient` in lexicographic order.
pub fn subsets_of_size(ambient: MarkSet, k: usize) -> Vec<MarkSet> {
    fn go(labels: &[Label], k: usize, start: usize, acc: MarkSet, out: &mut Vec<MarkSet>) {
        if acc.len() == k {
            out.push(acc);
            return;
        }
        for idx in start..labels.len() {
            go(labels, k, idx + 1, acc.with(labels[idx]), out);
        }
    }
    let mut out = Vec::new();
    go(&ambient.to_vec(), k, 0, MarkSet::EMPTY, &mut out);
    out
}

/// All multisets of size `k` drawn from `items`, as nondecreasing index
/// sequences.
pub fn multisets<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    fn go<T: Copy>(items: &[T], k: usize, start: usize, acc: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for idx in start..items.len() {
            acc.push(items[idx]);
            go(items, k, idx, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Every square system of 4-element sets on `{1, ..., n}` up to reordering
/// of the pairs. The marked point of each set is its smallest mark.
pub fn size4_systems(n: usize) -> Vec<PairSystem> {
    let quads = subsets_of_size(MarkSet::range(n), 4);
    multisets(&quads, n.saturating_sub(3))
        .into_iter()
        .map(|sets| {
            let pairs = sets
                .into_iter()
                .map(|s| Pair::new(s, s.min().expect("nonempty")))
                .collect();
            PairSystem::on_range(n, pairs)
        })
        .collect()
}

/// Visits every `rows × cols` 0/1 matrix whose rows and whose columns are
/// both lexicographically nondecreasing. Every 0/1 matrix can be brought to
/// this form by permuting rows and columns. Rows are passed as bitsets with
/// bit `j` for column `j`.
pub fn for_each_doubly_lexical(rows: usize, cols: usize, mut visit: impl FnMut(&[u64])) {
    assert!(cols <= 63, "column count exceeds bitset width");

    struct Walk<'a> {
        rows: usize,
        cols: usize,
        matrix: Vec<u64>,
        visit: &'a mut dyn FnMut(&[u64]),
    }

    impl Walk<'_> {
        // Lexicographic order on rows reads column 0 first.
        fn key(&self, row: u64) -> u64 {
            (0..self.cols).fold(0, |acc, j| (acc << 1) | ((row >> j) & 1))
        }

        fn go(&mut self, tied: u64, prev_key: u64) {
            if self.matrix.len() == self.rows {
                (self.visit)(&self.matrix);
                return;
            }
            for row in 0..(1u64 << self.cols) {
                // Tied adjacent columns j, j+1 need row[j] <= row[j+1].
                if tied & row & !(row >> 1) != 0 {
                    continue;
                }
                let key = self.key(row);
                if !self.matrix.is_empty() && key < prev_key {
                    continue;
                }
                self.matrix.push(row);
                self.go(tied & !(row ^ (row >> 1)), key);
                self.matrix.pop();
            }
        }
    }

    let all_tied = if cols == 0 {
        0
    } else {
        (1u64 << (cols - 1)) - 1
    };
    let mut walk = Walk {
        rows,
        cols,
        matrix: Vec::with_capacity(rows),
        visit: &mut visit,
    };
    walk.go(all_tied, 0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn enumeration_counts() {
        assert_eq!(subsets_of_size(MarkSet::range(6), 4).len(), 15);
        assert_eq!(size4_systems(4).len(), 1);
        assert_eq!(size4_systems(5).len(), 15);
        assert_eq!(size4_systems(6).len(), 680);
        assert_eq!(multisets(&[1, 2, 3], 0), vec![Vec::<i32>::new()]);
    }

    #[test]
    fn random_systems_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(4..=9);
            let sys = random_square_system(&mut rng, n, 3, n);
            assert!(crate::system::validate(&sys).unwrap().square);
            let relabeled = random_relabeling(&mut rng, &sys);
            assert!(crate::system::validate(&relabeled).is_ok());
            let big = random_enlargement(&mut rng, &sys, 0.3);
            assert!(sys
                .pairs
                .iter()
                .zip(&big.pairs)
                .all(|(a, b)| a.set.is_subset(b.set) && a.psi == b.psi));
        }
    }

    fn canonical(matrix: &[u64], rows: usize, cols: usize) -> Vec<u64> {
        // Minimum over column permutations of the sorted row list.
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut best: Option<Vec<u64>> = None;
        permute(&mut perm, 0, &mut |p| {
            let mut image: Vec<u64> = matrix[..rows]
                .iter()
                .map(|&r| (0..cols).fold(0, |acc, j| acc | (((r >> p[j]) & 1) << j)))
                .collect();
            image.sort_unstable();
            if best.as_ref().is_none_or(|b| image < *b) {
                best = Some(image);
            }
        });
        best.expect("at least one permutation")
    }

    fn permute(perm: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute(perm, k + 1, f);
            perm.swap(k, i);
        }
    }

    #[test]
    fn doubly_lexical_forms_cover_every_class() {
        for (rows, cols) in [(1, 1), (2, 3), (3, 4), (4, 4), (3, 5)] {
            let mut seen = HashSet::new();
            for_each_doubly_lexical(rows, cols, |m| {
                seen.insert(canonical(m, rows, cols));
            });
            let mut all = HashSet::new();
            for code in 0..(1u64 << (rows * cols)) {
                let m: Vec<u64> = (0..rows)
                    .map(|r| (code >> (r * cols)) & ((1 << cols) - 1))
                    .collect();
                all.insert(canonical(&m, rows, cols));
            }
            assert_eq!(seen, all, "{rows}x{cols}");
        }
    }
}
