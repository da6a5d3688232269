//! Matching-theoretic side of the degree theory: the union-size (Cerberus)
//! condition, distinct representatives, dragon marriage, the weighted
//! matching upper bound, and the reduction of a positive system to one made
//! of 4-element sets.

use num_bigint::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::system::{Label, MarkSet, Pair, PairSystem};

/// Largest list length the exhaustive union check enumerates by default.
pub const EXHAUSTIVE_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinatoricsError {
    #[error("{len} sets exceed the exhaustive cap of {cap}; enable matching mode")]
    OverExhaustiveCap { len: usize, cap: usize },
    #[error("system has {pairs} pairs on {marks} marks; a square system is required")]
    NotSquare { pairs: usize, marks: usize },
    #[error("{pqr} is not a 3-subset of the ambient marks {ambient}")]
    BadTriple { pqr: MarkSet, ambient: MarkSet },
    #[error("pair {index}: set {set} has fewer than 4 marks")]
    SetTooSmall { index: usize, set: MarkSet },
}

/// Sets over `{1, ..., n}` with their marked points forgotten.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    pub n: usize,
    pub sets: Vec<MarkSet>,
}

impl SetSystem {
    pub fn new(n: usize, sets: Vec<MarkSet>) -> Self {
        SetSystem { n, sets }
    }
}

impl From<&PairSystem> for SetSystem {
    fn from(system: &PairSystem) -> Self {
        SetSystem::new(system.size(), system.sets())
    }
}

/// Smallest value of `|∪_{j∈J} S_j| - |J|` over nonempty `J`, with the first
/// index set (in enumeration order) attaining it. `None` for an empty list.
pub fn min_union_slack(sets: &[MarkSet]) -> Option<(i64, Vec<usize>)> {
    fn visit(
        sets: &[MarkSet],
        start: usize,
        union: MarkSet,
        chosen: &mut Vec<usize>,
        best: &mut Option<(i64, Vec<usize>)>,
    ) {
        for idx in start..sets.len() {
            let u = union | sets[idx];
            chosen.push(idx);
            let slack = u.len() as i64 - chosen.len() as i64;
            if best.as_ref().is_none_or(|(b, _)| slack < *b) {
                *best = Some((slack, chosen.clone()));
            }
            visit(sets, idx + 1, u, chosen, best);
            chosen.pop();
        }
    }
    let mut best = None;
    visit(sets, 0, MarkSet::EMPTY, &mut Vec::new(), &mut best);
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CerberusReport {
    pub holds: bool,
    /// Zero-based indices of a violating `J`. In exhaustive mode this `J`
    /// minimizes `|∪_J| - |J|`.
    pub witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
pub struct CerberusOptions {
    pub exhaustive_cap: usize,
    /// Beyond the cap, decide through distinct representatives avoiding
    /// every 3-subset instead of failing.
    pub matching_fallback: bool,
}

impl Default for CerberusOptions {
    fn default() -> Self {
        CerberusOptions {
            exhaustive_cap: EXHAUSTIVE_CAP,
            matching_fallback: false,
        }
    }
}

/// `|∪_{j∈J} S_j| ≥ |J| + 3` for every nonempty `J`.
pub fn cerberus_check(sets: &SetSystem) -> Result<CerberusReport, CombinatoricsError> {
    cerberus_check_with(sets, CerberusOptions::default())
}

pub fn cerberus_check_with(
    sets: &SetSystem,
    options: CerberusOptions,
) -> Result<CerberusReport, CombinatoricsError> {
    let len = sets.sets.len();
    if len <= options.exhaustive_cap {
        return Ok(match min_union_slack(&sets.sets) {
            Some((slack, witness)) if slack < 3 => CerberusReport {
                holds: false,
                witness: Some(witness),
            },
            _ => CerberusReport {
                holds: true,
                witness: None,
            },
        });
    }
    if !options.matching_fallback {
        return Err(CombinatoricsError::OverExhaustiveCap {
            len,
            cap: options.exhaustive_cap,
        });
    }
    let ambient = sets
        .sets
        .iter()
        .fold(MarkSet::range(sets.n), |acc, s| acc | *s);
    for r in triples(ambient) {
        if let Err(violation) = sdr(&sets.sets, ambient - r) {
            return Ok(CerberusReport {
                holds: false,
                witness: Some(violation.rows),
            });
        }
    }
    Ok(CerberusReport {
        holds: true,
        witness: None,
    })
}

/// Exhaustive check when small, matching fallback otherwise.
pub fn cerberus_holds(sets: &[MarkSet]) -> bool {
    let n = sets
        .iter()
        .fold(MarkSet::EMPTY, |a, s| a | *s)
        .max()
        .unwrap_or(0) as usize;
    let options = CerberusOptions {
        matching_fallback: true,
        ..CerberusOptions::default()
    };
    cerberus_check_with(&SetSystem::new(n, sets.to_vec()), options)
        .expect("matching fallback never errors")
        .holds
}

/// Rows that cannot all be matched: their neighbourhood inside the allowed
/// marks is smaller than their number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HallViolation {
    pub rows: Vec<usize>,
    pub neighbourhood: MarkSet,
}

/// A system of distinct representatives drawn from `allowed`, by augmenting
/// paths. On failure, returns a Hall violator.
pub fn sdr(sets: &[MarkSet], allowed: MarkSet) -> Result<Vec<Label>, HallViolation> {
    struct Matcher<'a> {
        sets: &'a [MarkSet],
        allowed: MarkSet,
        owner: [Option<usize>; 65],
        seen_rows: Vec<bool>,
    }

    impl Matcher<'_> {
        fn augment(&mut self, row: usize) -> bool {
            if self.seen_rows[row] {
                return false;
            }
            self.seen_rows[row] = true;
            for col in (self.sets[row] & self.allowed).iter() {
                let col_idx = col as usize;
                match self.owner[col_idx] {
                    None => {
                        self.owner[col_idx] = Some(row);
                        return true;
                    }
                    Some(other) => {
                        if self.augment(other) {
                            self.owner[col_idx] = Some(row);
                            return true;
                        }
                    }
                }
            }
            false
        }
    }

    let mut m = Matcher {
        sets,
        allowed,
        owner: [None; 65],
        seen_rows: vec![false; sets.len()],
    };
    for row in 0..sets.len() {
        m.seen_rows.iter_mut().for_each(|s| *s = false);
        if !m.augment(row) {
            let rows: Vec<usize> = (0..sets.len()).filter(|&r| m.seen_rows[r]).collect();
            let neighbourhood = rows.iter().fold(MarkSet::EMPTY, |acc, &r| acc | sets[r]) & allowed;
            return Err(HallViolation {
                rows,
                neighbourhood,
            });
        }
    }
    let mut reps = vec![0 as Label; sets.len()];
    for (col, owner) in m.owner.iter().enumerate() {
        if let Some(row) = owner {
            reps[*row] = col as Label;
        }
    }
    Ok(reps)
}

/// Distinct representatives of `sets` avoiding the 3-subset `avoid`.
pub fn has_sdr_avoiding(sets: &SetSystem, avoid: MarkSet) -> Option<Vec<Label>> {
    debug_assert_eq!(avoid.len(), 3);
    let ambient = MarkSet::range(sets.n);
    sdr(&sets.sets, ambient - avoid).ok()
}

/// `sets.len() == |ground| - 1` and `|∪_U S_j| ≥ |U| + 1` for every nonempty
/// index set `U`. Marks outside `ground` are ignored.
pub fn dragon_marriage_check(ground: MarkSet, sets: &[MarkSet]) -> bool {
    if sets.len() + 1 != ground.len() {
        return false;
    }
    let local: Vec<MarkSet> = sets.iter().map(|s| *s & ground).collect();
    min_union_slack(&local).is_none_or(|(slack, _)| slack >= 1)
}

/// For every `i` in `ground`, a bijection from the sets onto `ground ∖ i`
/// choosing an element of each set.
pub fn bijections_avoiding_each(ground: MarkSet, sets: &[MarkSet]) -> bool {
    sets.len() + 1 == ground.len() && ground.iter().all(|i| sdr(sets, ground.without(i)).is_ok())
}

/// All 3-subsets of `ambient`, in lexicographic order.
pub fn triples(ambient: MarkSet) -> impl Iterator<Item = MarkSet> {
    let labels = ambient.to_vec();
    let n = labels.len();
    (0..n).flat_map(move |a| {
        let labels = labels.clone();
        (a + 1..n).flat_map(move |b| {
            let labels = labels.clone();
            (b + 1..n).map(move |c| MarkSet::from_iter([labels[a], labels[b], labels[c]]))
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundReport {
    pub pqr: [Label; 3],
    pub bound: BigUint,
    /// Set when the bound is known to equal the degree (a zero bound).
    pub tight_hint: Option<bool>,
}

fn require_square(system: &PairSystem) -> Result<(), CombinatoricsError> {
    if !system.is_square() {
        return Err(CombinatoricsError::NotSquare {
            pairs: system.pairs.len(),
            marks: system.size(),
        });
    }
    Ok(())
}

fn triple_array(pqr: MarkSet) -> [Label; 3] {
    let v = pqr.to_vec();
    [v[0], v[1], v[2]]
}

/// Weighted matching count: the permanent of the matrix with entry
/// `|S_j| - 3` at column `i_j`, `1` at the other columns of `S_j`, `0`
/// elsewhere, over the columns outside `pqr`.
pub fn matching_bound(
    system: &PairSystem,
    pqr: MarkSet,
) -> Result<BoundReport, CombinatoricsError> {
    require_square(system)?;
    if pqr.len() != 3 || !pqr.is_subset(system.ambient) {
        return Err(CombinatoricsError::BadTriple {
            pqr,
            ambient: system.ambient,
        });
    }
    let columns = (system.ambient - pqr).to_vec();
    let weights: Vec<Vec<u32>> = system
        .pairs
        .iter()
        .map(|p| columns.iter().map(|&c| matching_weight(p, c)).collect())
        .collect();
    let bound = permanent(&weights);
    let tight_hint = (bound == BigUint::ZERO).then_some(true);
    Ok(BoundReport {
        pqr: triple_array(pqr),
        bound,
        tight_hint,
    })
}

fn matching_weight(pair: &Pair, column: Label) -> u32 {
    if column == pair.psi {
        pair.set.len() as u32 - 3
    } else if pair.set.contains(column) {
        1
    } else {
        0
    }
}

/// Permanent of a square nonnegative matrix by dynamic programming over
/// column subsets: `dp[mask]` sums the weights of partial matchings of the
/// first `|mask|` rows onto `mask`.
pub fn permanent(matrix: &[Vec<u32>]) -> BigUint {
    let k = matrix.len();
    assert!(k <= 30, "permanent of a {k}x{k} matrix is out of reach");
    assert!(
        matrix.iter().all(|row| row.len() == k),
        "matrix must be square"
    );
    if k == 0 {
        return BigUint::from(1u32);
    }
    // The product of row sums bounds every partial sum.
    let fits_u128 = matrix
        .iter()
        .map(|row| row.iter().map(|&w| w as u128).sum::<u128>())
        .try_fold(1u128, |acc, s| acc.checked_mul(s.max(1)))
        .is_some();
    if fits_u128 {
        BigUint::from(permanent_dp::<u128>(matrix))
    } else {
        permanent_dp::<BigUint>(matrix)
    }
}

fn permanent_dp<T>(matrix: &[Vec<u32>]) -> T
where
    T: Clone + num_traits::Zero + num_traits::One + for<'a> std::ops::AddAssign<&'a T>,
    T: std::ops::Mul<T, Output = T> + From<u32>,
{
    let k = matrix.len();
    let full = (1usize << k) - 1;
    let mut dp = vec![T::zero(); 1 << k];
    dp[0] = T::one();
    for mask in 0..full {
        if dp[mask].is_zero() {
            continue;
        }
        let row = mask.count_ones() as usize;
        for (col, &w) in matrix[row].iter().enumerate() {
            if w == 0 || mask & (1 << col) != 0 {
                continue;
            }
            let term = dp[mask].clone() * T::from(w);
            dp[mask | (1 << col)] += &term;
        }
    }
    dp[full].clone()
}

/// Minimum of [`matching_bound`] over every 3-subset; ties go to the
/// lexicographically smallest triple.
pub fn best_matching_bound(system: &PairSystem) -> Result<BoundReport, CombinatoricsError> {
    require_square(system)?;
    let all: Vec<MarkSet> = triples(system.ambient).collect();
    let reports: Vec<BoundReport> = all
        .par_iter()
        .map(|&pqr| matching_bound(system, pqr))
        .collect::<Result<_, _>>()?;
    Ok(reports
        .into_iter()
        .reduce(|best, r| if r.bound < best.bound { r } else { best })
        .expect("a system on at least 3 marks has a triple"))
}

/// Replaces every `S_j` by a 4-subset containing `i_j` so that the union
/// condition still holds. `Ok(None)` when the input already violates it.
pub fn shrink_to_quadruples(system: &PairSystem) -> Result<Option<PairSystem>, CombinatoricsError> {
    require_square(system)?;
    for (index, p) in system.pairs.iter().enumerate() {
        if p.set.len() < 4 {
            return Err(CombinatoricsError::SetTooSmall { index, set: p.set });
        }
    }
    if !cerberus_holds(&system.sets()) {
        return Ok(None);
    }

    let candidates: Vec<Vec<MarkSet>> = system
        .pairs
        .iter()
        .map(|p| {
            let others = p.set.without(p.psi);
            triples(others).map(|t| t.with(p.psi)).collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..system.pairs.len()).collect();
    order.sort_by_key(|&j| candidates[j].len());

    // unions[mask] is the union over the assigned prefix selected by mask.
    let mut unions = vec![MarkSet::EMPTY];
    let mut chosen = vec![MarkSet::EMPTY; system.pairs.len()];
    if !assign(&order, &candidates, 0, &mut unions, &mut chosen) {
        unreachable!("a system satisfying the union condition always shrinks");
    }
    let pairs = system
        .pairs
        .iter()
        .zip(&chosen)
        .map(|(p, &s)| Pair::new(s, p.psi))
        .collect();
    Ok(Some(PairSystem::new(system.ambient, pairs)))
}

fn assign(
    order: &[usize],
    candidates: &[Vec<MarkSet>],
    depth: usize,
    unions: &mut Vec<MarkSet>,
    chosen: &mut [MarkSet],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let j = order[depth];
    let prefix = unions.len();
    for &cand in &candidates[j] {
        // Every index set containing the new one: |J'| + 1 + 3 marks needed.
        let ok =
            (0..prefix).all(|mask| (unions[mask] | cand).len() >= (mask.count_ones() as usize) + 4);
        if !ok {
            continue;
        }
        for mask in 0..prefix {
            let u = unions[mask] | cand;
            unions.push(u);
        }
        chosen[j] = cand;
        if assign(order, candidates, depth + 1, unions, chosen) {
            return true;
        }
        unions.truncate(prefix);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::pair;

    fn set(labels: &[Label]) -> MarkSet {
        labels.iter().copied().collect()
    }

    fn fig1() -> PairSystem {
        PairSystem::on_range(
            7,
            vec![
                pair(&[1, 2, 3, 4], 1),
                pair(&[1, 2, 3, 5], 1),
                pair(&[4, 5, 6, 7], 4),
                pair(&[1, 2, 6, 7], 1),
            ],
        )
    }

    #[test]
    fn cerberus_examples() {
        let report = cerberus_check(&SetSystem::from(&fig1())).unwrap();
        assert!(report.holds);
        assert_eq!(report.witness, None);

        let copies = SetSystem::new(6, vec![set(&[1, 2, 3, 4]); 3]);
        let report = cerberus_check(&copies).unwrap();
        assert!(!report.holds);
        assert_eq!(report.witness, Some(vec![0, 1, 2]));

        let single = SetSystem::new(4, vec![set(&[1, 2, 3])]);
        let report = cerberus_check(&single).unwrap();
        assert!(!report.holds);
        assert_eq!(report.witness, Some(vec![0]));

        assert!(cerberus_check(&SetSystem::new(3, vec![])).unwrap().holds);
    }

    #[test]
    fn cerberus_cap_and_fallback() {
        let sets = SetSystem::new(30, vec![MarkSet::range(30); 27]);
        assert_eq!(
            cerberus_check(&sets),
            Err(CombinatoricsError::OverExhaustiveCap { len: 27, cap: 24 })
        );
        let opts = CerberusOptions {
            matching_fallback: true,
            ..Default::default()
        };
        assert!(cerberus_check_with(&sets, opts).unwrap().holds);

        let mut bad = vec![MarkSet::range(30); 25];
        bad.extend([set(&[1, 2, 3, 4]); 2]);
        let report = cerberus_check_with(&SetSystem::new(30, bad.clone()), opts).unwrap();
        assert!(!report.holds);
        let witness = report.witness.unwrap();
        let union = witness.iter().fold(MarkSet::EMPTY, |a, &j| a | bad[j]);
        assert!(union.len() < witness.len() + 3);
    }

    #[test]
    fn sdr_examples() {
        let sys = SetSystem::from(&fig1());
        let reps = has_sdr_avoiding(&sys, set(&[5, 6, 7])).unwrap();
        for (s, r) in sys.sets.iter().zip(&reps) {
            assert!(s.contains(*r) && !set(&[5, 6, 7]).contains(*r));
        }
        let mut sorted = reps.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), reps.len());

        let copies = SetSystem::new(6, vec![set(&[1, 2, 3, 4]); 3]);
        assert_eq!(has_sdr_avoiding(&copies, set(&[1, 2, 3])), None);
        assert_eq!(
            has_sdr_avoiding(&SetSystem::new(4, vec![]), set(&[1, 2, 3])),
            Some(vec![])
        );
    }

    #[test]
    fn sdr_failure_is_a_hall_violator() {
        let sets = vec![set(&[1, 2]), set(&[1, 2]), set(&[1, 2]), set(&[3, 4])];
        let v = sdr(&sets, MarkSet::range(4)).unwrap_err();
        assert!(v.neighbourhood.len() < v.rows.len());
    }

    #[test]
    fn dragon_examples() {
        let t = set(&[1, 2, 3]);
        assert!(dragon_marriage_check(t, &[set(&[1, 2]), set(&[2, 3])]));
        assert!(!dragon_marriage_check(t, &[set(&[2]), set(&[2])]));
        assert!(!dragon_marriage_check(t, &[set(&[1, 2, 3])]));
        assert!(bijections_avoiding_each(t, &[set(&[1, 2]), set(&[2, 3])]));
        assert!(!bijections_avoiding_each(t, &[set(&[2]), set(&[2])]));
    }

    #[test]
    fn triples_are_lexicographic() {
        let all: Vec<_> = triples(MarkSet::range(5)).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], set(&[1, 2, 3]));
        assert_eq!(all[9], set(&[3, 4, 5]));
    }

    #[test]
    fn matching_bound_examples() {
        let sys = PairSystem::on_range(4, vec![pair(&[1, 2, 3, 4], 4)]);
        let r = matching_bound(&sys, set(&[1, 2, 3])).unwrap();
        assert_eq!(r.bound, BigUint::from(1u32));
        assert_eq!(r.pqr, [1, 2, 3]);

        let copies = PairSystem::on_range(6, vec![pair(&[1, 2, 3, 4], 1); 3]);
        assert_eq!(
            matching_bound(&copies, set(&[2, 3, 4])).unwrap().bound,
            BigUint::ZERO
        );
        assert_eq!(
            matching_bound(&copies, set(&[4, 5, 6])).unwrap().bound,
            BigUint::from(6u32)
        );

        assert!(matches!(
            matching_bound(&copies, set(&[1, 2])),
            Err(CombinatoricsError::BadTriple { .. })
        ));
        assert!(matches!(
            matching_bound(&PairSystem::on_range(6, vec![]), set(&[1, 2, 3])),
            Err(CombinatoricsError::NotSquare { .. })
        ));
    }

    #[test]
    fn fig1_best_bound_is_two() {
        let r = best_matching_bound(&fig1()).unwrap();
        assert_eq!(r.bound, BigUint::from(2u32));
    }

    #[test]
    fn failing_system_has_zero_best_bound() {
        let copies = PairSystem::on_range(6, vec![pair(&[1, 2, 3, 4], 1); 3]);
        let r = best_matching_bound(&copies).unwrap();
        assert_eq!(r.bound, BigUint::ZERO);
        assert_eq!(r.pqr, [1, 2, 3]);
        assert_eq!(r.tight_hint, Some(true));
    }

    #[test]
    fn permanent_small() {
        assert_eq!(permanent(&[]), BigUint::from(1u32));
        assert_eq!(permanent(&[vec![1, 1], vec![1, 1]]), BigUint::from(2u32));
        assert_eq!(permanent(&[vec![2, 0], vec![0, 3]]), BigUint::from(6u32));
        // 3x3 all ones: 3! = 6.
        assert_eq!(permanent(&vec![vec![1; 3]; 3]), BigUint::from(6u32));
    }

    #[test]
    fn permanent_falls_back_to_bigint() {
        // The product of row sums, 20000^20, does not fit in u128.
        let big = vec![vec![1000u32; 20]; 20];
        let p = permanent(&big);
        let mut expected = BigUint::from(1u32);
        for k in 1..=20u32 {
            expected *= BigUint::from(k) * BigUint::from(1000u32);
        }
        assert_eq!(p, expected);
    }

    #[test]
    fn shrink_examples() {
        let fig = fig1();
        assert_eq!(shrink_to_quadruples(&fig).unwrap(), Some(fig.clone()));

        let sys = PairSystem::on_range(
            6,
            vec![
                pair(&[1, 2, 3, 4, 5, 6], 1),
                pair(&[1, 2, 3, 4, 5, 6], 2),
                pair(&[1, 2, 3, 4, 5, 6], 3),
            ],
        );
        let shrunk = shrink_to_quadruples(&sys).unwrap().unwrap();
        for (orig, new) in sys.pairs.iter().zip(&shrunk.pairs) {
            assert_eq!(new.set.len(), 4);
            assert!(new.set.is_subset(orig.set));
            assert_eq!(new.psi, orig.psi);
            assert!(new.set.contains(new.psi));
        }
        assert!(cerberus_check(&SetSystem::from(&shrunk)).unwrap().holds);

        let failing = PairSystem::on_range(6, vec![pair(&[1, 2, 3, 4], 1); 3]);
        assert_eq!(shrink_to_quadruples(&failing).unwrap(), None);

        let small = PairSystem::on_range(5, vec![pair(&[1, 2, 3], 1), pair(&[1, 2, 3, 4, 5], 1)]);
        assert!(matches!(
            shrink_to_quadruples(&small),
            Err(CombinatoricsError::SetTooSmall { index: 0, .. })
        ));
    }
}
