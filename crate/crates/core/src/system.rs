//! Mark sets, pairs and pair systems: the vocabulary shared by the engine,
//! the combinatorial checks and the oracles.
//!
//! A mark set is a subset of `1..=MAX_LABEL` stored as a single machine word,
//! bit `l - 1` standing for label `l`. The glued point of a boundary
//! component is always an ordinary label (one past the largest label of the
//! ambient set), so residues are plain [`Pair`]s and the same bitset type
//! serves every level of the recursion.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{BitAnd, BitOr, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mark label. Labels are `1..=MAX_LABEL`.
pub type Label = u8;

/// Largest label accepted anywhere. One bit of the word stays free for the
/// glued point of a bipartition.
pub const MAX_LABEL: Label = 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MarkSet(u64);

impl MarkSet {
    pub const EMPTY: MarkSet = MarkSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        MarkSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// `{1, ..., n}`.
    pub fn range(n: usize) -> Self {
        assert!(n <= 64, "mark set range {n} exceeds the word size");
        if n == 64 {
            MarkSet(u64::MAX)
        } else {
            MarkSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(label: Label) -> Self {
        debug_assert!((1..=64).contains(&label));
        MarkSet(1u64 << (label - 1))
    }

    /// Builds a set from a label list, rejecting duplicates and labels
    /// outside `1..=MAX_LABEL`.
    pub fn from_labels<I>(labels: I) -> Result<Self, Violation>
    where
        I: IntoIterator,
        I::Item: Into<u64>,
    {
        let mut set = MarkSet::EMPTY;
        for label in labels {
            let label = label.into();
            if label == 0 || label > u64::from(MAX_LABEL) {
                return Err(Violation::LabelOutOfRange { label });
            }
            let label = label as Label;
            if set.contains(label) {
                return Err(Violation::DuplicateLabel { label });
            }
            set = set.with(label);
        }
        Ok(set)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, label: Label) -> bool {
        (1..=64).contains(&label) && self.0 & (1u64 << (label - 1)) != 0
    }

    pub fn with(self, label: Label) -> Self {
        self | MarkSet::singleton(label)
    }

    pub fn without(self, label: Label) -> Self {
        MarkSet(self.0 & !MarkSet::singleton(label).0)
    }

    pub fn is_subset(self, other: MarkSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn min(self) -> Option<Label> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as Label + 1)
    }

    pub fn max(self) -> Option<Label> {
        (self.0 != 0).then(|| 64 - self.0.leading_zeros() as Label)
    }

    pub fn iter(self) -> Labels {
        Labels(self.0)
    }

    pub fn to_vec(self) -> Vec<Label> {
        self.iter().collect()
    }

    /// Lexicographic comparison of the ascending label sequences.
    pub fn lex_cmp(self, other: MarkSet) -> Ordering {
        self.iter().cmp(other.iter())
    }

    /// Relabels `self` (a subset of `ambient`) order-preservingly onto
    /// `{1, ..., |ambient|}`.
    pub fn compress(self, ambient: MarkSet) -> MarkSet {
        debug_assert!(self.is_subset(ambient));
        let mut out = 0u64;
        let mut rank = 0u32;
        let mut rest = ambient.0;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            if self.0 & bit != 0 {
                out |= 1u64 << rank;
            }
            rank += 1;
            rest &= rest - 1;
        }
        MarkSet(out)
    }

    /// Inverse of [`MarkSet::compress`]: scatters the low bits of `self` onto
    /// the labels of `ambient`.
    pub fn expand(self, ambient: MarkSet) -> MarkSet {
        let mut out = 0u64;
        let mut src = self.0;
        let mut rest = ambient.0;
        while rest != 0 && src != 0 {
            let bit = rest & rest.wrapping_neg();
            if src & 1 != 0 {
                out |= bit;
            }
            src >>= 1;
            rest &= rest - 1;
        }
        MarkSet(out)
    }
}

impl BitOr for MarkSet {
    type Output = MarkSet;
    fn bitor(self, rhs: MarkSet) -> MarkSet {
        MarkSet(self.0 | rhs.0)
    }
}

impl BitAnd for MarkSet {
    type Output = MarkSet;
    fn bitand(self, rhs: MarkSet) -> MarkSet {
        MarkSet(self.0 & rhs.0)
    }
}

impl Sub for MarkSet {
    type Output = MarkSet;
    fn sub(self, rhs: MarkSet) -> MarkSet {
        MarkSet(self.0 & !rhs.0)
    }
}

impl FromIterator<Label> for MarkSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        iter.into_iter().fold(MarkSet::EMPTY, MarkSet::with)
    }
}

impl fmt::Display for MarkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, label) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{label}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for MarkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Ascending iterator over the labels of a [`MarkSet`].
#[derive(Clone)]
pub struct Labels(u64);

impl Iterator for Labels {
    type Item = Label;

    fn next(&mut self) -> Option<Label> {
        if self.0 == 0 {
            return None;
        }
        let label = self.0.trailing_zeros() as Label + 1;
        self.0 &= self.0 - 1;
        Some(label)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Labels {}

/// A pair `(S, i)`: the class pulled back from the psi class at `psi` on the
/// moduli space marked by `set`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pair {
    pub set: MarkSet,
    pub psi: Label,
}

impl Pair {
    pub fn new(set: MarkSet, psi: Label) -> Self {
        Pair { set, psi }
    }

    /// Fixed total order used by normalization: larger sets first, then
    /// lexicographic on the sorted set, then the psi label.
    pub fn normal_cmp(&self, other: &Pair) -> Ordering {
        other
            .set
            .len()
            .cmp(&self.set.len())
            .then_with(|| self.set.lex_cmp(other.set))
            .then_with(|| self.psi.cmp(&other.psi))
    }
}

impl fmt::Debug for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.set, self.psi)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PairSystem {
    pub ambient: MarkSet,
    pub pairs: Vec<Pair>,
}

impl fmt::Debug for PairSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.ambient, self.pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("label {label} appears twice")]
    DuplicateLabel { label: Label },
    #[error("label {label} is outside 1..={MAX_LABEL}")]
    LabelOutOfRange { label: u64 },
    #[error("ambient mark set has {size} marks, at least 3 are required")]
    AmbientTooSmall { size: usize },
    #[error("pair {index}: marked point {psi} is not in its set")]
    PsiNotInSet { index: usize, psi: Label },
    #[error("pair {index}: set has {size} marks, at least 3 are required")]
    SetTooSmall { index: usize, size: usize },
    #[error("pair {index}: set {set} is not contained in the ambient marks")]
    SetOutsideAmbient { index: usize, set: MarkSet },
}

/// Outcome of a successful [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validated {
    /// Exactly `|ambient| - 3` pairs.
    pub square: bool,
}

/// Checks every invariant of a pair system and reports the first violation.
pub fn validate(system: &PairSystem) -> Result<Validated, Violation> {
    if let Some(max) = system.ambient.max() {
        if max > MAX_LABEL {
            return Err(Violation::LabelOutOfRange { label: max.into() });
        }
    }
    let size = system.ambient.len();
    if size < 3 {
        return Err(Violation::AmbientTooSmall { size });
    }
    for (index, pair) in system.pairs.iter().enumerate() {
        if !pair.set.is_subset(system.ambient) {
            return Err(Violation::SetOutsideAmbient {
                index,
                set: pair.set,
            });
        }
        if !pair.set.contains(pair.psi) {
            return Err(Violation::PsiNotInSet {
                index,
                psi: pair.psi,
            });
        }
        if pair.set.len() < 3 {
            return Err(Violation::SetTooSmall {
                index,
                size: pair.set.len(),
            });
        }
    }
    Ok(Validated {
        square: system.pairs.len() + 3 == size,
    })
}

impl PairSystem {
    pub fn new(ambient: MarkSet, pairs: Vec<Pair>) -> Self {
        PairSystem { ambient, pairs }
    }

    /// System on `{1, ..., n}`.
    pub fn on_range(n: usize, pairs: Vec<Pair>) -> Self {
        PairSystem::new(MarkSet::range(n), pairs)
    }

    pub fn size(&self) -> usize {
        self.ambient.len()
    }

    pub fn is_square(&self) -> bool {
        self.pairs.len() + 3 == self.ambient.len()
    }

    /// Applies a label map to every set, psi label and the ambient set.
    pub fn relabel(&self, map: impl Fn(Label) -> Label) -> PairSystem {
        let set_map = |s: MarkSet| s.iter().map(&map).collect::<MarkSet>();
        PairSystem {
            ambient: set_map(self.ambient),
            pairs: self
                .pairs
                .iter()
                .map(|p| Pair::new(set_map(p.set), map(p.psi)))
                .collect(),
        }
    }

    pub fn sets(&self) -> Vec<MarkSet> {
        self.pairs.iter().map(|p| p.set).collect()
    }
}

/// Order-preserving relabeling produced by [`normalize`]: new label `k`
/// stands for `old[k - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relabeling {
    pub old: Vec<Label>,
}

impl Relabeling {
    pub fn to_old(&self, new: Label) -> Label {
        self.old[new as usize - 1]
    }

    pub fn to_new(&self, old: Label) -> Option<Label> {
        self.old
            .iter()
            .position(|&l| l == old)
            .map(|k| k as Label + 1)
    }
}

/// Relabels the ambient set onto `{1, ..., m}` preserving order and sorts the
/// pairs by [`Pair::normal_cmp`].
pub fn normalize(system: &PairSystem) -> (PairSystem, Relabeling) {
    let normalized = normalize_system(system);
    let relabeling = Relabeling {
        old: system.ambient.to_vec(),
    };
    (normalized, relabeling)
}

/// [`normalize`] without materialising the relabeling.
pub(crate) fn normalize_system(system: &PairSystem) -> PairSystem {
    let ambient = system.ambient;
    let mut pairs: Vec<Pair> = system
        .pairs
        .iter()
        .map(|p| {
            let psi = (MarkSet::singleton(p.psi).compress(ambient))
                .min()
                .expect("psi label inside the ambient set");
            Pair::new(p.set.compress(ambient), psi)
        })
        .collect();
    pairs.sort_by(Pair::normal_cmp);
    PairSystem {
        ambient: MarkSet::range(ambient.len()),
        pairs,
    }
}

/// Result of restricting a pair to one side of a bipartition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residue {
    /// A pair on `side ∪ {star}`.
    Class(Pair),
    /// The unit class.
    Trivial,
}

impl Residue {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Residue::Trivial)
    }
}

/// Restriction of `pair` to the component marked by `side ∪ {star}`.
///
/// The four cases are tried in order and the first match wins, so a set
/// contained in `side` is returned unchanged even though it also meets the
/// hypothesis of the third case.
pub fn residue(pair: &Pair, side: MarkSet, star: Label) -> Residue {
    let set = pair.set;
    let meet = set & side;
    if set.is_subset(side) {
        Residue::Class(*pair)
    } else if meet == set.without(pair.psi) {
        Residue::Class(Pair::new(meet.with(star), star))
    } else if meet.contains(pair.psi) && meet.len() >= 2 {
        Residue::Class(Pair::new(meet.with(star), pair.psi))
    } else {
        Residue::Trivial
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BipartitionError {
    #[error("blocks {p} and {q} overlap")]
    Overlap { p: MarkSet, q: MarkSet },
    #[error("both blocks need at least 2 marks, got {p} | {q}")]
    BlockTooSmall { p: MarkSet, q: MarkSet },
    #[error("no free label for the glued point")]
    NoRoomForStar,
    #[error("pair index {index} out of range")]
    NoSuchPair { index: usize },
    #[error("designated set {set} needs at least 4 marks")]
    DesignatedTooSmall { set: MarkSet },
    #[error("mark {a} must lie in {set} and differ from {psi}")]
    BadPivot { a: Label, set: MarkSet, psi: Label },
}

/// Ordered two-block partition `P | Q` of an ambient mark set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bipartition {
    pub p: MarkSet,
    pub q: MarkSet,
}

impl Bipartition {
    pub fn new(p: MarkSet, q: MarkSet) -> Result<Self, BipartitionError> {
        if !(p & q).is_empty() {
            return Err(BipartitionError::Overlap { p, q });
        }
        if p.len() < 2 || q.len() < 2 {
            return Err(BipartitionError::BlockTooSmall { p, q });
        }
        if (p | q).max().unwrap_or(0) >= 64 {
            return Err(BipartitionError::NoRoomForStar);
        }
        Ok(Bipartition { p, q })
    }

    pub fn ambient(&self) -> MarkSet {
        self.p | self.q
    }

    /// Label of the glued point: one past the largest ambient label.
    pub fn star(&self) -> Label {
        self.ambient().max().unwrap_or(0) + 1
    }

    pub fn residue_p(&self, pair: &Pair) -> Residue {
        residue(pair, self.p, self.star())
    }

    pub fn residue_q(&self, pair: &Pair) -> Residue {
        residue(pair, self.q, self.star())
    }
}

/// The bipartitions indexing the boundary sum for the designated pair
/// `system.pairs[index]` and pivot `a`: `{a, i} ⊆ P`, `S ∖ {a, i} ⊆ Q`, and
/// each mark outside `S` placed freely.
pub fn enumerate_bipartitions(
    system: &PairSystem,
    index: usize,
    a: Label,
) -> Result<Bipartitions, BipartitionError> {
    let pair = system
        .pairs
        .get(index)
        .ok_or(BipartitionError::NoSuchPair { index })?;
    if a == pair.psi || !pair.set.contains(a) {
        return Err(BipartitionError::BadPivot {
            a,
            set: pair.set,
            psi: pair.psi,
        });
    }
    if pair.set.len() < 4 {
        return Err(BipartitionError::DesignatedTooSmall { set: pair.set });
    }
    if system.ambient.max().unwrap_or(0) >= 64 {
        return Err(BipartitionError::NoRoomForStar);
    }
    let base_p = MarkSet::singleton(a).with(pair.psi);
    let base_q = pair.set - base_p;
    let free = system.ambient - pair.set;
    Ok(Bipartitions {
        base_p,
        base_q,
        free,
        next: 0,
        end: 1u64 << free.len(),
    })
}

/// Iterator returned by [`enumerate_bipartitions`].
#[derive(Debug, Clone)]
pub struct Bipartitions {
    base_p: MarkSet,
    base_q: MarkSet,
    free: MarkSet,
    next: u64,
    end: u64,
}

impl Iterator for Bipartitions {
    type Item = Bipartition;

    fn next(&mut self) -> Option<Bipartition> {
        if self.next == self.end {
            return None;
        }
        let to_p = MarkSet::from_bits(self.next).expand(self.free);
        self.next += 1;
        Some(Bipartition {
            p: self.base_p | to_p,
            q: self.base_q | (self.free - to_p),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Bipartitions {}

/// One pair of the JSON input schema. `split` is only read by the tree
/// oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJson {
    #[serde(rename = "S")]
    pub set: Vec<u64>,
    pub i: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<[[u64; 2]; 2]>,
}

/// `{"n": <int>, "pairs": [{"S": [...], "i": <int>}, ...]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSystemJson {
    pub n: u64,
    pub pairs: Vec<PairJson>,
}

#[derive(Debug, Error)]
pub enum InputError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid pair system: {0}")]
    Invalid(#[from] Violation),
}

impl From<serde_json::Error> for InputError {
    fn from(err: serde_json::Error) -> Self {
        InputError::Json {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

impl PairSystemJson {
    pub fn parse(text: &str) -> Result<Self, InputError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Converts to a validated [`PairSystem`] on `{1, ..., n}`.
    pub fn to_system(&self) -> Result<PairSystem, InputError> {
        if self.n > u64::from(MAX_LABEL) {
            return Err(Violation::LabelOutOfRange { label: self.n }.into());
        }
        let ambient = MarkSet::range(self.n as usize);
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for (index, p) in self.pairs.iter().enumerate() {
            let set = MarkSet::from_labels(p.set.iter().copied())?;
            if p.i == 0 || p.i > u64::from(MAX_LABEL) {
                return Err(Violation::LabelOutOfRange { label: p.i }.into());
            }
            let psi = p.i as Label;
            if !set.is_subset(ambient) {
                return Err(Violation::SetOutsideAmbient { index, set }.into());
            }
            pairs.push(Pair::new(set, psi));
        }
        let system = PairSystem::new(ambient, pairs);
        validate(&system)?;
        Ok(system)
    }
}

impl From<&PairSystem> for PairSystemJson {
    /// Emits the system on `{1, ..., n}` after order-preserving relabeling of
    /// the ambient set.
    fn from(system: &PairSystem) -> Self {
        let ambient = system.ambient;
        PairSystemJson {
            n: ambient.len() as u64,
            pairs: system
                .pairs
                .iter()
                .map(|p| PairJson {
                    set: p.set.compress(ambient).iter().map(u64::from).collect(),
                    i: u64::from(
                        MarkSet::singleton(p.psi)
                            .compress(ambient)
                            .min()
                            .unwrap_or(0),
                    ),
                    split: None,
                })
                .collect(),
        }
    }
}

/// Shorthand used throughout tests and examples: `pair(&[1, 2, 3, 4], 1)`.
pub fn pair(set: &[Label], psi: Label) -> Pair {
    Pair::new(set.iter().copied().collect(), psi)
}
