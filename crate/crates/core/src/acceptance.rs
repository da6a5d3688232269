//! The acceptance suite: twelve end-to-end checks of the engine against the
//! closed forms and oracles, with pinned sizes and time limits.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::{
    best_matching_bound, bijections_avoiding_each, cerberus_check, dragon_marriage_check,
    matching_bound, shrink_to_quadruples, triples, SetSystem,
};
use crate::engine::{degree, degree_pushforward_case, Choice, DegreeOptions};
use crate::generate::{
    for_each_doubly_lexical, multisets, random_enlargement, random_relabeling,
    random_square_system, random_subset, random_transversal_instance, size4_systems,
    subsets_of_size,
};
use crate::oracles::field::DEFAULT_PRIME;
use crate::oracles::jacobian::jacobian_rank_probe;
use crate::oracles::transversals::count_3_transversals;
use crate::oracles::trees::{tree_count, SplitQuadruple};
use crate::oracles::witten::witten_multinomial;
use crate::store::DegreeStore;
use crate::system::{Label, MarkSet, Pair, PairSystem};

pub const DEFAULT_SEED: u64 = 0x5eed_ca11;

#[derive(Debug, Clone, Copy)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub limit: Option<Duration>,
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        title: "figure-1 value over all 256 marked-point choices",
        limit: secs(5),
    },
    Criterion {
        id: 2,
        title: "psi monomials equal multinomials, n = 4..8",
        limit: secs(60),
    },
    Criterion {
        id: 3,
        title: "positivity iff union condition",
        limit: secs(600),
    },
    Criterion {
        id: 4,
        title: "tree oracle equivalence",
        limit: secs(600),
    },
    Criterion {
        id: 5,
        title: "3-transversal equivalence, n = 6..9",
        limit: secs(300),
    },
    Criterion {
        id: 6,
        title: "matching upper bound and tightness at zero",
        limit: secs(600),
    },
    Criterion {
        id: 7,
        title: "pushforward values, n = 6, 7, 8",
        limit: secs(120),
    },
    Criterion {
        id: 8,
        title: "recursion-choice, relabeling and cache invariance",
        limit: None,
    },
    Criterion {
        id: 9,
        title: "monotonicity under enlargement",
        limit: None,
    },
    Criterion {
        id: 10,
        title: "jacobian rank probe iff union condition",
        limit: None,
    },
    Criterion {
        id: 11,
        title: "dragon marriage equivalences, |T| <= 7",
        limit: None,
    },
    Criterion {
        id: 12,
        title: "shrinking to quadruples",
        limit: None,
    },
];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub criterion: Criterion,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = match self.criterion.limit {
            Some(l) => format!(" / limit {} s", l.as_secs()),
            None => String::new(),
        };
        write!(
            f,
            "{} criterion {:>2} {}: {} [{:.2} s{}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion.id,
            self.criterion.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            limit
        )
    }
}

type Check = Result<String, String>;

fn options(store: &DegreeStore) -> DegreeOptions<'_> {
    DegreeOptions {
        fast_paths: false,
        cache: Some(store),
        choice: Choice::Canonical,
        parallel: false,
    }
}

fn deg(system: &PairSystem, store: &DegreeStore) -> Result<BigUint, String> {
    degree(system, &options(store)).map_err(|e| format!("engine error on {}: {e}", show(system)))
}

/// Compact rendering for failure messages.
pub fn show(system: &PairSystem) -> String {
    let pairs: Vec<String> = system
        .pairs
        .iter()
        .map(|p| format!("({},{})", p.set, p.psi))
        .collect();
    format!("n={} {}", system.size(), pairs.join(" "))
}

fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (u64::from(id) << 56))
}

/// Runs one criterion by number (1 to 12).
pub fn run_criterion(id: u8, seed: u64) -> Outcome {
    let criterion = CRITERIA[usize::from(id) - 1];
    let start = Instant::now();
    let result = match id {
        1 => figure_one(),
        2 => witten(),
        3 => positivity(seed),
        4 => tree_oracle(seed),
        5 => transversals(seed),
        6 => upper_bound(seed),
        7 => pushforward(),
        8 => invariance(seed),
        9 => monotonicity(seed),
        10 => jacobian(seed),
        11 => dragon(),
        12 => shrinking(seed),
        _ => unreachable!("criterion ids are 1..=12"),
    };
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = criterion.limit {
        if elapsed > limit {
            passed = false;
            detail = format!("{detail}; exceeded time limit");
        }
    }
    Outcome {
        criterion,
        passed,
        detail,
        elapsed,
    }
}

pub fn run_all(seed: u64) -> Vec<Outcome> {
    CRITERIA.iter().map(|c| run_criterion(c.id, seed)).collect()
}

fn fig1_sets() -> [MarkSet; 4] {
    let s = |l: &[Label]| l.iter().copied().collect::<MarkSet>();
    [
        s(&[1, 2, 3, 4]),
        s(&[1, 2, 3, 5]),
        s(&[4, 5, 6, 7]),
        s(&[1, 2, 6, 7]),
    ]
}

fn figure_one() -> Check {
    let sets = fig1_sets();
    let members: Vec<Vec<Label>> = sets.iter().map(|s| s.to_vec()).collect();
    let store = DegreeStore::new();
    let mut runs = 0;
    for code in 0..256usize {
        let pairs = (0..4)
            .map(|j| Pair::new(sets[j], members[j][(code >> (2 * j)) & 3]))
            .collect();
        let system = PairSystem::on_range(7, pairs);
        let d = deg(&system, &store)?;
        if d != BigUint::from(2u32) {
            return Err(format!("{} has degree {d}, expected 2", show(&system)));
        }
        runs += 1;
    }
    Ok(format!("{runs}/256 runs equal 2"))
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn witten() -> Check {
    let store = DegreeStore::new();
    let mut cases = 0;
    for n in 4..=8 {
        let full = MarkSet::range(n);
        for exps in compositions(n - 3, n) {
            let pairs = exps
                .iter()
                .enumerate()
                .flat_map(|(k, &a)| std::iter::repeat_n(Pair::new(full, (k + 1) as Label), a))
                .collect();
            let system = PairSystem::on_range(n, pairs);
            let d = deg(&system, &store)?;
            let expected = witten_multinomial(n, &exps);
            if d != expected {
                return Err(format!(
                    "exponents {exps:?}: engine {d}, multinomial {expected}"
                ));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} exponent vectors match"))
}

fn cerberus(system: &PairSystem) -> Result<bool, String> {
    cerberus_check(&SetSystem::from(system))
        .map(|r| r.holds)
        .map_err(|e| e.to_string())
}

fn positivity_agrees(system: &PairSystem, store: &DegreeStore) -> Result<bool, String> {
    let positive = !deg(system, store)?.is_zero();
    let holds = cerberus(system)?;
    if positive != holds {
        return Err(format!(
            "{}: degree positive = {positive}, union condition = {holds}",
            show(system)
        ));
    }
    Ok(positive)
}

fn positivity(seed: u64) -> Check {
    let store = DegreeStore::new();
    let exhaustive = size4_systems(6);
    let mut positive = 0;
    for system in &exhaustive {
        positive += usize::from(positivity_agrees(system, &store)?);
    }
    let mut rng = rng_for(seed, 3);
    let random: Vec<PairSystem> = (0..2000)
        .map(|_| {
            let n = rng.gen_range(4..=8);
            random_square_system(&mut rng, n, 4, n)
        })
        .collect();
    let flags = random
        .par_iter()
        .map(|s| positivity_agrees(s, &store))
        .collect::<Result<Vec<bool>, String>>()?;
    let random_positive = flags.iter().filter(|&&p| p).count();
    Ok(format!(
        "{} exhaustive n=6 ({positive} positive) and {} random ({random_positive} positive) agree",
        exhaustive.len(),
        random.len()
    ))
}

fn random_split<R: Rng>(rng: &mut R, set: MarkSet) -> SplitQuadruple {
    let marks = set.to_vec();
    let partner = rng.gen_range(1..4);
    let rest: Vec<Label> = (1..4).filter(|&k| k != partner).map(|k| marks[k]).collect();
    SplitQuadruple::new(set, [marks[0], marks[partner]], [rest[0], rest[1]])
        .expect("a split of the set itself")
}

fn trees_agree<R: Rng>(
    system: &PairSystem,
    store: &DegreeStore,
    rng: &mut R,
) -> Result<(), String> {
    let d = deg(system, store)?;
    for _ in 0..3 {
        let quads: Vec<SplitQuadruple> = system
            .pairs
            .iter()
            .map(|p| random_split(rng, p.set))
            .collect();
        let count = tree_count(&quads, system.size()).map_err(|e| e.to_string())?;
        if BigUint::from(count) != d {
            return Err(format!("{}: engine {d}, tree count {count}", show(system)));
        }
    }
    Ok(())
}

fn tree_oracle(seed: u64) -> Check {
    let store = DegreeStore::new();
    let mut rng = rng_for(seed, 4);
    let exhaustive = size4_systems(6);
    for system in &exhaustive {
        trees_agree(system, &store, &mut rng)?;
    }
    for _ in 0..200 {
        let system = random_square_system(&mut rng, 7, 4, 4);
        trees_agree(&system, &store, &mut rng)?;
    }
    Ok(format!(
        "{} n=6 systems and 200 random n=7 systems, 3 splits each",
        exhaustive.len()
    ))
}

fn transversals(seed: u64) -> Check {
    let store = DegreeStore::new();
    let mut rng = rng_for(seed, 5);
    let mut full = 0;
    for k in 0..200 {
        let n = 6 + k % 4;
        let is_full = k % 5 == 0;
        full += usize::from(is_full);
        let inst = random_transversal_instance(&mut rng, n, is_full);
        let system = inst.to_pair_system();
        let d = deg(&system, &store)?;
        let count = count_3_transversals(&inst);
        if d != count {
            return Err(format!(
                "{}: engine {d}, 3-transversals {count}",
                show(&system)
            ));
        }
    }
    Ok(format!("200 instances agree ({full} with every T = [n-3])"))
}

fn upper_bound(seed: u64) -> Check {
    let store = DegreeStore::new();
    let mut rng = rng_for(seed, 6);
    let systems: Vec<PairSystem> = (0..300)
        .map(|_| {
            let n = rng.gen_range(4..=8);
            random_square_system(&mut rng, n, 4, n)
        })
        .collect();
    let zeros = systems
        .par_iter()
        .map(|system| -> Result<bool, String> {
            let d = deg(system, &store)?;
            for pqr in triples(system.ambient) {
                let b = matching_bound(system, pqr)
                    .map_err(|e| e.to_string())?
                    .bound;
                if d > b {
                    return Err(format!(
                        "{}: degree {d} exceeds bound {b} at {pqr}",
                        show(system)
                    ));
                }
            }
            if d.is_zero() {
                let best = best_matching_bound(system).map_err(|e| e.to_string())?;
                if !best.bound.is_zero() {
                    return Err(format!(
                        "{}: degree 0 but best bound {}",
                        show(system),
                        best.bound
                    ));
                }
            }
            Ok(d.is_zero())
        })
        .collect::<Result<Vec<bool>, String>>()?;
    let zero = zeros.iter().filter(|&&z| z).count();
    Ok(format!(
        "300 systems bounded at every triple ({zero} of degree 0, all with best bound 0)"
    ))
}

fn pushforward() -> Check {
    let store = DegreeStore::new();
    let opts = options(&store);
    let mut cases = 0;
    for n in 6..=8 {
        for k in 4..=n {
            for set in subsets_of_size(MarkSet::range(n), k) {
                for psi in set.iter() {
                    degree_pushforward_case(set, psi, n, &opts).map_err(|e| e.to_string())?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} pairs match the closed form"))
}

fn invariance(seed: u64) -> Check {
    let mut rng = rng_for(seed, 8);
    for _ in 0..100 {
        let n = rng.gen_range(4..=7);
        let system = random_square_system(&mut rng, n, 3, n);
        let plain = DegreeOptions::default();
        let base = degree(&system, &plain).map_err(|e| e.to_string())?;
        let store = DegreeStore::new();
        let cached = degree(&system, &options(&store)).map_err(|e| e.to_string())?;
        if cached != base {
            return Err(format!(
                "{}: cache on {cached}, cache off {base}",
                show(&system)
            ));
        }
        for _ in 0..3 {
            let relabeled = random_relabeling(&mut rng, &system);
            let seeded = DegreeOptions {
                choice: Choice::Seeded(rng.gen()),
                ..plain
            };
            let d = degree(&relabeled, &seeded).map_err(|e| e.to_string())?;
            if d != base {
                return Err(format!(
                    "{}: relabeled with random choices gives {d}, expected {base}",
                    show(&system)
                ));
            }
        }
    }
    Ok("100 systems, 3 random relabelings and choice seeds each, cache on = off".into())
}

fn monotonicity(seed: u64) -> Check {
    let store = DegreeStore::new();
    let mut rng = rng_for(seed, 9);
    let mut strict = 0;
    for _ in 0..100 {
        let n = rng.gen_range(4..=8);
        let system = random_square_system(&mut rng, n, 3, n);
        let bigger = random_enlargement(&mut rng, &system, 0.35);
        let (a, b) = (deg(&system, &store)?, deg(&bigger, &store)?);
        if a > b {
            return Err(format!(
                "{} has degree {a}, enlargement {} has {b}",
                show(&system),
                show(&bigger)
            ));
        }
        strict += usize::from(a < b);
    }
    Ok(format!(
        "100 enlargements never decrease the degree ({strict} strictly increase)"
    ))
}

fn jacobian(seed: u64) -> Check {
    let mut rng = rng_for(seed, 10);
    let mut full = 0;
    for _ in 0..100 {
        let n = rng.gen_range(5..=9);
        let system = random_square_system(&mut rng, n, 4, 4);
        let rank = jacobian_rank_probe(&system.sets(), n, DEFAULT_PRIME, 3, &mut rng)
            .map_err(|e| e.to_string())?;
        let holds = cerberus(&system)?;
        if (rank == n - 3) != holds {
            return Err(format!(
                "{}: rank {rank}, union condition {holds}",
                show(&system)
            ));
        }
        full += usize::from(holds);
    }
    Ok(format!("100 systems agree ({full} of full rank)"))
}

/// Dragon marriage on `[t]` against the union condition of the sets with
/// two marks adjoined, and against the bijection criterion.
fn dragon_case(t: usize, sets: &[MarkSet]) -> Result<(), String> {
    let ground = MarkSet::range(t);
    let dm = dragon_marriage_check(ground, sets);
    let bij = bijections_avoiding_each(ground, sets);
    let n = t + 2;
    let tail = MarkSet::from_iter([(n - 1) as Label, n as Label]);
    let augmented = SetSystem::new(n, sets.iter().map(|s| *s | tail).collect());
    let cer = cerberus_check(&augmented).map_err(|e| e.to_string())?.holds;
    if dm != bij || dm != cer {
        return Err(format!(
            "sets {:?} on [{t}]: dragon {dm}, bijections {bij}, augmented union {cer}",
            sets.iter().map(|s| s.to_string()).collect::<Vec<_>>()
        ));
    }
    Ok(())
}

fn dragon() -> Check {
    let mut checked = 0u64;
    let mut first_error = None;
    for t in 1..=7usize {
        if t <= 5 {
            let all: Vec<MarkSet> = (0..(1u64 << t)).map(MarkSet::from_bits).collect();
            for sets in multisets(&all, t - 1) {
                dragon_case(t, &sets)?;
                checked += 1;
            }
        } else {
            for_each_doubly_lexical(t - 1, t, |rows| {
                if first_error.is_some() {
                    return;
                }
                // Column j is mark j + 1.
                let sets: Vec<MarkSet> = rows.iter().map(|&r| MarkSet::from_bits(r)).collect();
                if let Err(e) = dragon_case(t, &sets) {
                    first_error = Some(e);
                }
                checked += 1;
            });
            if let Some(e) = first_error.take() {
                return Err(e);
            }
        }
    }
    Ok(format!(
        "{checked} systems: every multiset for |T| <= 5, every doubly lexical incidence matrix for |T| = 6, 7"
    ))
}

fn shrinking(seed: u64) -> Check {
    let store = DegreeStore::new();
    let mut rng = rng_for(seed, 12);
    let mut done = 0;
    while done < 100 {
        let n = rng.gen_range(5..=8);
        let mut system = random_square_system(&mut rng, n, 4, n);
        if system.pairs.iter().all(|p| p.set.len() == 4) {
            let j = rng.gen_range(0..system.pairs.len());
            let p = system.pairs[j];
            let k = rng.gen_range(5..=n);
            let extra = random_subset(&mut rng, n, k) - p.set;
            system.pairs[j] = Pair::new(p.set | extra, p.psi);
        }
        if !cerberus(&system)? || system.pairs.iter().all(|p| p.set.len() == 4) {
            continue;
        }
        let shrunk = shrink_to_quadruples(&system)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("{}: no refinement found", show(&system)))?;
        let valid = shrunk.pairs.iter().zip(&system.pairs).all(|(new, old)| {
            new.set.len() == 4 && new.set.is_subset(old.set) && new.psi == old.psi
        });
        if !valid {
            return Err(format!(
                "{}: invalid refinement {}",
                show(&system),
                show(&shrunk)
            ));
        }
        if !cerberus(&shrunk)? {
            return Err(format!(
                "{}: refinement {} loses the union condition",
                show(&system),
                show(&shrunk)
            ));
        }
        let (before, after) = (deg(&system, &store)?, deg(&shrunk, &store)?);
        if after.is_zero() || after > before {
            return Err(format!(
                "{}: refinement degree {after}, original {before}",
                show(&system)
            ));
        }
        done += 1;
    }
    Ok("100 oversized systems refine to positive quadruple systems of no larger degree".into())
}
