//! Exact degrees by boundary recursion.
//!
//! For a designated pair `(S, i)` and a pivot `a ∈ S ∖ i`, the degree equals
//! the degree with `S` shrunk to `S ∖ a`, plus, for every bipartition
//! `P | Q` with `{a, i} ⊆ P` and `S ∖ {a, i} ⊆ Q`, the product of the degrees
//! of the residue systems on `P ∪ ⋆` and `Q ∪ ⋆`. Subproblems are normalized
//! before evaluation so that they can be memoized in a [`DegreeStore`].

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::cerberus_holds;
use crate::oracles::witten::multinomial;
use crate::store::{DegreeKey, DegreeStore, StoreError};
use crate::system::{
    enumerate_bipartitions, normalize_system, residue, validate, Label, MarkSet, Pair, PairSystem,
    Residue, Violation,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Invalid(#[from] Violation),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(
        "pushforward value for {pair} on {n} marks: closed form {closed}, recursion {recursion}"
    )]
    PushforwardMismatch {
        pair: Pair,
        n: usize,
        closed: BigUint,
        recursion: BigUint,
    },
    #[error("pushforward case needs 4 <= |S| <= n and i in S, got {pair} on {n} marks")]
    BadPushforwardInput { pair: Pair, n: usize },
}

/// How the designated pair and pivot are picked at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Choice {
    /// Largest set (first in normalized order), smallest pivot.
    #[default]
    Canonical,
    /// Pseudo-random but reproducible choices derived from the seed and the
    /// subproblem itself.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DegreeOptions<'a> {
    pub fast_paths: bool,
    pub cache: Option<&'a DegreeStore>,
    pub choice: Choice,
    /// Evaluate the top levels of the bipartition sum on the rayon pool.
    pub parallel: bool,
}

#[derive(Debug, Default)]
pub struct RecursionStats {
    memo_hits: AtomicU64,
    memo_misses: AtomicU64,
    max_depth: AtomicU64,
    pruned_terms: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StatsSnapshot {
    pub memo_hits: u64,
    pub memo_misses: u64,
    pub max_depth: u64,
    pub pruned_terms: u64,
}

impl RecursionStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            memo_hits: self.memo_hits.load(Ordering::Relaxed),
            memo_misses: self.memo_misses.load(Ordering::Relaxed),
            max_depth: self.max_depth.load(Ordering::Relaxed),
            pruned_terms: self.pruned_terms.load(Ordering::Relaxed),
        }
    }
}

const PARALLEL_DEPTH: u32 = 2;

pub struct Engine<'a> {
    options: DegreeOptions<'a>,
    stats: RecursionStats,
}

impl<'a> Engine<'a> {
    pub fn new(options: DegreeOptions<'a>) -> Self {
        Engine {
            options,
            stats: RecursionStats::default(),
        }
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn degree(&self, system: &PairSystem) -> Result<BigUint, EngineError> {
        validate(system)?;
        self.eval(&normalize_system(system), 0)
    }

    fn eval(&self, sys: &PairSystem, depth: u32) -> Result<BigUint, EngineError> {
        self.stats
            .max_depth
            .fetch_max(u64::from(depth), Ordering::Relaxed);
        if let Some(value) = trivial_degree(sys) {
            return Ok(value);
        }
        if self.options.fast_paths {
            if let Some(value) = fast_path_witten(sys).or_else(|| fast_path_equal_psi(sys)) {
                return Ok(value);
            }
        }
        let Some(cache) = self.options.cache else {
            return self.expand(sys, depth);
        };
        let key = DegreeKey::from_normalized(sys);
        if let Some(value) = cache.get_degree(&key) {
            self.stats.memo_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(value);
        }
        self.stats.memo_misses.fetch_add(1, Ordering::Relaxed);
        let value = self.expand(sys, depth)?;
        Ok(cache.insert_or_get(key, value)?)
    }

    fn choose(&self, sys: &PairSystem) -> (usize, Label) {
        match self.options.choice {
            Choice::Canonical => {
                let p = &sys.pairs[0];
                let a = p
                    .set
                    .without(p.psi)
                    .min()
                    .expect("set has at least 4 marks");
                (0, a)
            }
            Choice::Seeded(seed) => {
                let mut h = DefaultHasher::new();
                seed.hash(&mut h);
                sys.hash(&mut h);
                let bits = h.finish();
                let idx = (bits % sys.pairs.len() as u64) as usize;
                let p = &sys.pairs[idx];
                let pivots = p.set.without(p.psi).to_vec();
                let a = pivots[((bits >> 32) % pivots.len() as u64) as usize];
                (idx, a)
            }
        }
    }

    fn expand(&self, sys: &PairSystem, depth: u32) -> Result<BigUint, EngineError> {
        let (idx, a) = self.choose(sys);
        let designated = sys.pairs[idx];

        let mut shrunk = sys.clone();
        shrunk.pairs[idx].set = designated.set.without(a);
        let mut total = self.eval(&normalize_system(&shrunk), depth + 1)?;

        let others: Vec<Pair> = sys
            .pairs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != idx)
            .map(|(_, p)| *p)
            .collect();
        let star = sys.size() as Label + 1;
        let bips = enumerate_bipartitions(sys, idx, a).expect("designated pair is admissible");

        let term = |p_side: MarkSet, q_side: MarkSet| -> Result<BigUint, EngineError> {
            let Some((left, right)) = split_residues(&others, p_side, q_side, star) else {
                self.stats.pruned_terms.fetch_add(1, Ordering::Relaxed);
                return Ok(BigUint::zero());
            };
            let left_value = self.eval(&left, depth + 1)?;
            if left_value.is_zero() {
                return Ok(left_value);
            }
            Ok(left_value * self.eval(&right, depth + 1)?)
        };

        if self.options.parallel && depth < PARALLEL_DEPTH {
            let bips: Vec<_> = bips.collect();
            let parts: Vec<BigUint> = bips
                .par_iter()
                .map(|b| term(b.p, b.q))
                .collect::<Result<_, _>>()?;
            for part in parts {
                total += part;
            }
        } else {
            for b in bips {
                total += term(b.p, b.q)?;
            }
        }
        Ok(total)
    }
}

/// Values fixed without recursion: dimension mismatch, the point `M_{0,3}`,
/// a psi class on three marks, and sets that miss part of the ambient marks
/// (the product is then pulled back from a lower-dimensional space).
fn trivial_degree(sys: &PairSystem) -> Option<BigUint> {
    if !sys.is_square() {
        return Some(BigUint::zero());
    }
    if sys.pairs.is_empty() {
        return Some(BigUint::one());
    }
    if sys.pairs.iter().any(|p| p.set.len() == 3) {
        return Some(BigUint::zero());
    }
    let union = sys.pairs.iter().fold(MarkSet::EMPTY, |acc, p| acc | p.set);
    if union != sys.ambient {
        return Some(BigUint::zero());
    }
    None
}

/// Residue systems on both sides, normalized, or `None` when the term
/// vanishes for dimension reasons or through a psi class on three marks.
fn split_residues(
    others: &[Pair],
    p_side: MarkSet,
    q_side: MarkSet,
    star: Label,
) -> Option<(PairSystem, PairSystem)> {
    let need_p = p_side.len() - 2;
    let need_q = q_side.len() - 2;
    let mut left = Vec::with_capacity(need_p);
    let mut right = Vec::with_capacity(need_q);
    for pair in others {
        let (res, bucket, need) = match residue(pair, p_side, star) {
            Residue::Trivial => (residue(pair, q_side, star), &mut right, need_q),
            res => (res, &mut left, need_p),
        };
        let Residue::Class(class) = res else {
            unreachable!("exactly one side of a bipartition carries the class");
        };
        if class.set.len() == 3 || bucket.len() == need {
            return None;
        }
        bucket.push(class);
    }
    if left.len() != need_p || right.len() != need_q {
        return None;
    }
    let glued = MarkSet::singleton(star);
    Some((
        normalize_system(&PairSystem::new(p_side | glued, left)),
        normalize_system(&PairSystem::new(q_side | glued, right)),
    ))
}

/// Degree with default options except the given cache.
pub fn degree(system: &PairSystem, options: &DegreeOptions) -> Result<BigUint, EngineError> {
    Engine::new(*options).degree(system)
}

/// Psi monomial: every set is the whole ambient set. The degree is the
/// multinomial coefficient of the psi exponents.
pub fn fast_path_witten(system: &PairSystem) -> Option<BigUint> {
    if system.pairs.is_empty() || system.pairs.iter().any(|p| p.set != system.ambient) {
        return None;
    }
    if !system.is_square() {
        return Some(BigUint::zero());
    }
    let mut exponents = vec![0usize; system.size()];
    for p in &system.pairs {
        let rank = MarkSet::singleton(p.psi).compress(system.ambient).min()? as usize;
        exponents[rank - 1] += 1;
    }
    Some(multinomial(&exponents))
}

/// All marked points equal: the degree is 1 exactly when the union
/// condition holds, 0 otherwise.
pub fn fast_path_equal_psi(system: &PairSystem) -> Option<BigUint> {
    let first = system.pairs.first()?.psi;
    if system.pairs.iter().any(|p| p.psi != first) {
        return None;
    }
    if !system.is_square() {
        return Some(BigUint::zero());
    }
    let holds = cerberus_holds(&system.sets());
    Some(if holds {
        BigUint::one()
    } else {
        BigUint::zero()
    })
}

/// `∫ X_{S,i} · X_{T_2} ⋯ X_{T_{n-3}}` with `T_j = {j, n-2, n-1, n}`:
/// `|S| - 3` if `i = 1`, `1` if `1 ∈ S ∖ i`, `0` if `1 ∉ S`. The closed form
/// is checked against the recursion before it is returned.
pub fn degree_pushforward_case(
    set: MarkSet,
    psi: Label,
    n: usize,
    options: &DegreeOptions,
) -> Result<BigUint, EngineError> {
    let first = Pair::new(set, psi);
    if set.len() < 4 || !set.is_subset(MarkSet::range(n)) || !set.contains(psi) {
        return Err(EngineError::BadPushforwardInput { pair: first, n });
    }
    let closed = if psi == 1 {
        BigUint::from(set.len() - 3)
    } else if set.contains(1) {
        BigUint::one()
    } else {
        BigUint::zero()
    };
    let system = pushforward_system(set, psi, n);
    let recursion = degree(&system, options)?;
    if recursion != closed {
        return Err(EngineError::PushforwardMismatch {
            pair: first,
            n,
            closed,
            recursion,
        });
    }
    Ok(closed)
}

/// The system `(S, i), T_2, ..., T_{n-3}` used by [`degree_pushforward_case`].
pub fn pushforward_system(set: MarkSet, psi: Label, n: usize) -> PairSystem {
    let tail = MarkSet::from_iter([n as Label - 2, n as Label - 1, n as Label]);
    let mut pairs = vec![Pair::new(set, psi)];
    for j in 2..=(n as Label).saturating_sub(3) {
        pairs.push(Pair::new(tail.with(j), j));
    }
    PairSystem::on_range(n, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::pair;

    fn plain() -> DegreeOptions<'static> {
        DegreeOptions::default()
    }

    fn fig1(psis: [Label; 4]) -> PairSystem {
        PairSystem::on_range(
            7,
            vec![
                pair(&[1, 2, 3, 4], psis[0]),
                pair(&[1, 2, 3, 5], psis[1]),
                pair(&[4, 5, 6, 7], psis[2]),
                pair(&[1, 2, 6, 7], psis[3]),
            ],
        )
    }

    #[test]
    fn fig1_is_two() {
        assert_eq!(
            degree(&fig1([1, 1, 4, 1]), &plain()).unwrap(),
            BigUint::from(2u32)
        );
        assert_eq!(
            degree(&fig1([4, 5, 7, 6]), &plain()).unwrap(),
            BigUint::from(2u32)
        );
    }

    #[test]
    fn psi1_psi2_on_five_marks() {
        let sys = PairSystem::on_range(
            5,
            vec![pair(&[1, 2, 3, 4, 5], 1), pair(&[1, 2, 3, 4, 5], 2)],
        );
        assert_eq!(degree(&sys, &plain()).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn copies_vanish() {
        let sys = PairSystem::on_range(6, vec![pair(&[1, 2, 3, 4], 1); 3]);
        assert_eq!(degree(&sys, &plain()).unwrap(), BigUint::ZERO);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(
            degree(&PairSystem::on_range(3, vec![]), &plain()).unwrap(),
            BigUint::one()
        );
        let non_square = PairSystem::on_range(5, vec![pair(&[1, 2, 3, 4], 1)]);
        assert_eq!(degree(&non_square, &plain()).unwrap(), BigUint::ZERO);
        let three = PairSystem::on_range(4, vec![pair(&[1, 2, 3], 1)]);
        assert_eq!(degree(&three, &plain()).unwrap(), BigUint::ZERO);
        let psi_n = PairSystem::on_range(4, vec![pair(&[1, 2, 3, 4], 4)]);
        assert_eq!(degree(&psi_n, &plain()).unwrap(), BigUint::one());
        let invalid = PairSystem::on_range(4, vec![Pair::new(MarkSet::from_iter([1, 2, 3]), 4)]);
        assert!(matches!(
            degree(&invalid, &plain()),
            Err(EngineError::Invalid(_))
        ));
    }

    #[test]
    fn mixed_system_agrees_across_modes() {
        // Frozen from the plain recursion; the other modes must agree.
        let sys = PairSystem::on_range(
            6,
            vec![
                pair(&[1, 2, 3, 4, 5], 1),
                pair(&[2, 4, 5, 6], 2),
                pair(&[3, 4, 5, 6], 3),
            ],
        );
        let base = degree(&sys, &plain()).unwrap();
        assert_eq!(base, BigUint::from(2u32));
        let store = DegreeStore::new();
        let cached = DegreeOptions {
            cache: Some(&store),
            fast_paths: true,
            ..plain()
        };
        assert_eq!(degree(&sys, &cached).unwrap(), base);
        for seed in 0..10 {
            let o = DegreeOptions {
                choice: Choice::Seeded(seed),
                ..plain()
            };
            assert_eq!(degree(&sys, &o).unwrap(), base);
        }
    }

    #[test]
    fn pushforward_examples() {
        let s = |l: &[Label]| l.iter().copied().collect::<MarkSet>();
        assert_eq!(
            degree_pushforward_case(s(&[1, 2, 3, 4, 5]), 1, 6, &plain()).unwrap(),
            BigUint::from(2u32)
        );
        assert_eq!(
            degree_pushforward_case(s(&[1, 2, 4, 5]), 2, 6, &plain()).unwrap(),
            BigUint::one()
        );
        assert_eq!(
            degree_pushforward_case(s(&[2, 3, 4, 5]), 2, 6, &plain()).unwrap(),
            BigUint::ZERO
        );
        assert!(matches!(
            degree_pushforward_case(s(&[1, 2, 3]), 1, 6, &plain()),
            Err(EngineError::BadPushforwardInput { .. })
        ));
    }

    #[test]
    fn witten_fast_path() {
        let full = MarkSet::range(6);
        let sys = |psis: &[Label]| {
            PairSystem::on_range(6, psis.iter().map(|&i| Pair::new(full, i)).collect())
        };
        assert_eq!(fast_path_witten(&sys(&[6, 6, 6])), Some(BigUint::one()));
        assert_eq!(
            fast_path_witten(&sys(&[4, 5, 6])),
            Some(BigUint::from(6u32))
        );
        let full7 = MarkSet::range(7);
        let sys7 = PairSystem::on_range(
            7,
            [5, 5, 6, 7].iter().map(|&i| Pair::new(full7, i)).collect(),
        );
        assert_eq!(fast_path_witten(&sys7), Some(BigUint::from(12u32)));
        assert_eq!(degree(&sys7, &plain()).unwrap(), BigUint::from(12u32));
        assert_eq!(fast_path_witten(&fig1([1, 1, 4, 1])), None);
    }

    #[test]
    fn equal_psi_fast_path() {
        let chain = PairSystem::on_range(5, vec![pair(&[1, 2, 3, 5], 5), pair(&[2, 3, 4, 5], 5)]);
        assert_eq!(fast_path_equal_psi(&chain), Some(BigUint::one()));
        assert_eq!(degree(&chain, &plain()).unwrap(), BigUint::one());

        let copies = PairSystem::on_range(6, vec![pair(&[1, 2, 3, 6], 6); 3]);
        assert_eq!(fast_path_equal_psi(&copies), Some(BigUint::ZERO));

        let spread = PairSystem::on_range(
            6,
            vec![
                pair(&[1, 2, 3, 6], 6),
                pair(&[1, 4, 5, 6], 6),
                pair(&[2, 4, 5, 6], 6),
            ],
        );
        assert_eq!(fast_path_equal_psi(&spread), Some(BigUint::one()));
        assert_eq!(degree(&spread, &plain()).unwrap(), BigUint::one());
        assert_eq!(fast_path_equal_psi(&fig1([1, 1, 4, 1])), None);
    }

    #[test]
    fn stats_count_memo_traffic() {
        let store = DegreeStore::new();
        let engine = Engine::new(DegreeOptions {
            cache: Some(&store),
            ..plain()
        });
        engine.degree(&fig1([1, 1, 4, 1])).unwrap();
        let first = engine.stats();
        assert!(first.memo_misses > 0);
        assert!(first.max_depth > 0);
        engine.degree(&fig1([1, 1, 4, 1])).unwrap();
        assert!(engine.stats().memo_hits > first.memo_hits);
    }

    #[test]
    fn parallel_matches_sequential() {
        let sys = PairSystem::on_range(
            8,
            vec![
                pair(&[1, 2, 3, 4, 5, 6, 7, 8], 1),
                pair(&[1, 2, 3, 4, 5, 6, 7, 8], 2),
                pair(&[2, 3, 4, 5, 6], 3),
                pair(&[1, 5, 6, 7, 8], 8),
                pair(&[3, 4, 7, 8], 4),
            ],
        );
        let seq = degree(&sys, &plain()).unwrap();
        let store = DegreeStore::new();
        let par = degree(
            &sys,
            &DegreeOptions {
                parallel: true,
                cache: Some(&store),
                ..plain()
            },
        )
        .unwrap();
        assert_eq!(seq, par);
    }
}
