//! Counting 3-transversals.
//!
//! An instance on `n` marks is a list of `n - 3` pairs `(T, j)` with
//! `T ⊆ [n-3]` and `j ∈ {n-2, n-1, n}`; its intersection product is that of
//! the pairs `(T ∪ {n-2, n-1, n}, j)`.

use num_bigint::BigUint;

use super::OracleError;
use crate::combinatorics::sdr;
use crate::system::{Label, MarkSet, Pair, PairSystem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransversalInstance {
    pub n: usize,
    pub items: Vec<(MarkSet, Label)>,
}

impl TransversalInstance {
    pub fn new(n: usize, items: Vec<(MarkSet, Label)>) -> Result<Self, OracleError> {
        if n < 4 {
            return Err(OracleError::TooFewMarks { min: 4, n });
        }
        if n > crate::system::MAX_LABEL as usize {
            return Err(OracleError::WrongLength {
                expected: crate::system::MAX_LABEL as usize,
                got: n,
            });
        }
        if items.len() != n - 3 {
            return Err(OracleError::WrongLength {
                expected: n - 3,
                got: items.len(),
            });
        }
        let base = MarkSet::range(n - 3);
        for (index, &(t, j)) in items.iter().enumerate() {
            if !t.is_subset(base) {
                return Err(OracleError::BadTransversal {
                    index,
                    reason: format!("{t} is not contained in [{}]", n - 3),
                });
            }
            if (j as usize) < n - 2 || j as usize > n {
                return Err(OracleError::BadTransversal {
                    index,
                    reason: format!("{j} is not one of the last three marks"),
                });
            }
        }
        Ok(TransversalInstance { n, items })
    }

    fn tail(&self) -> MarkSet {
        MarkSet::range(self.n) - MarkSet::range(self.n - 3)
    }

    pub fn to_pair_system(&self) -> PairSystem {
        let tail = self.tail();
        PairSystem::on_range(
            self.n,
            self.items
                .iter()
                .map(|&(t, j)| Pair::new(t | tail, j))
                .collect(),
        )
    }

    /// Recognizes systems in which every set contains the last three marks
    /// and every marked point is one of them.
    pub fn from_pair_system(system: &PairSystem) -> Option<Self> {
        let n = system.ambient.len();
        if n < 4 || system.ambient != MarkSet::range(n) {
            return None;
        }
        let tail = MarkSet::range(n) - MarkSet::range(n - 3);
        let items = system
            .pairs
            .iter()
            .map(|p| (tail.is_subset(p.set) && tail.contains(p.psi)).then(|| (p.set - tail, p.psi)))
            .collect::<Option<Vec<_>>>()?;
        TransversalInstance::new(n, items).ok()
    }
}

/// Number of maps `t: [n-3] → {n-2, n-1, n}` for which some bijection `m`
/// has `m(i) ∈ T_i` and `t(m(i)) = j_i` for all `i`.
pub fn count_3_transversals(inst: &TransversalInstance) -> BigUint {
    let k = inst.n - 3;
    if inst.items.iter().any(|(t, _)| t.is_empty()) {
        return BigUint::default();
    }
    let targets = [
        (inst.n - 2) as Label,
        (inst.n - 1) as Label,
        inst.n as Label,
    ];
    let mut count = 0u64;
    let total = 3u64.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let mut fibres = [MarkSet::EMPTY; 3];
        for label in 1..=k as Label {
            fibres[(c % 3) as usize] = fibres[(c % 3) as usize].with(label);
            c /= 3;
        }
        let allowed: Vec<MarkSet> = inst
            .items
            .iter()
            .map(|&(t, j)| {
                let slot = targets.iter().position(|&x| x == j).expect("validated");
                t & fibres[slot]
            })
            .collect();
        if sdr(&allowed, MarkSet::range(k)).is_ok() {
            count += 1;
        }
    }
    BigUint::from(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::witten::multinomial;
    use crate::system::Label;

    fn set(labels: &[Label]) -> MarkSet {
        labels.iter().copied().collect()
    }

    #[test]
    fn full_sets_give_multinomial() {
        let n = 7;
        let full = MarkSet::range(4);
        let inst =
            TransversalInstance::new(n, vec![(full, 5), (full, 5), (full, 6), (full, 7)]).unwrap();
        assert_eq!(count_3_transversals(&inst), multinomial(&[2, 1, 1]));
    }

    #[test]
    fn single_item() {
        let inst = TransversalInstance::new(4, vec![(set(&[1]), 3)]).unwrap();
        assert_eq!(count_3_transversals(&inst), BigUint::from(1u32));
    }

    #[test]
    fn empty_support_is_zero() {
        let inst =
            TransversalInstance::new(5, vec![(set(&[1, 2]), 3), (MarkSet::EMPTY, 4)]).unwrap();
        assert_eq!(count_3_transversals(&inst), BigUint::default());
    }

    #[test]
    fn round_trip_through_pair_system() {
        let inst = TransversalInstance::new(
            6,
            vec![(set(&[1]), 4), (set(&[2, 3]), 5), (set(&[1, 3]), 6)],
        )
        .unwrap();
        let system = inst.to_pair_system();
        assert_eq!(system.pairs[1].set, set(&[2, 3, 4, 5, 6]));
        assert_eq!(TransversalInstance::from_pair_system(&system), Some(inst));
        let other = PairSystem::on_range(5, vec![crate::system::pair(&[1, 2, 3], 1); 2]);
        assert_eq!(TransversalInstance::from_pair_system(&other), None);
    }

    #[test]
    fn rejects_bad_items() {
        assert!(TransversalInstance::new(5, vec![(set(&[1]), 3)]).is_err());
        assert!(TransversalInstance::new(5, vec![(set(&[3]), 4), (set(&[1]), 4)]).is_err());
        assert!(TransversalInstance::new(5, vec![(set(&[1]), 2), (set(&[1]), 4)]).is_err());
    }
}
