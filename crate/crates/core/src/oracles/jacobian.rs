//! Rank of the matrix of cross-ratio differentials at random points.
//!
//! For `S = {s_1 < s_2 < s_3 < s_4}`, the row of `d cr_S` with denominators
//! cleared has entry `(-1)^(l+1) ∏ (x_a - x_b)` at column `s_l`, the product
//! running over pairs `a < b` of `S ∖ s_l`. Full rank `n - 3` certifies that
//! the cross-ratios are algebraically independent, hence a positive degree.

use rand::Rng;

use super::field::{FieldMatrix, PrimeField};
use super::OracleError;
use crate::system::MarkSet;

/// Fills the `(n - 3) × n` differential matrix at `points` (`points[j - 1]`
/// is the coordinate of mark `j`).
pub fn differential_matrix(quads: &[MarkSet], points: &[u64], field: PrimeField) -> FieldMatrix {
    let n = points.len();
    let mut m = FieldMatrix::zeros(field, quads.len(), n);
    for (row, quad) in quads.iter().enumerate() {
        let marks = quad.to_vec();
        for (l, &col) in marks.iter().enumerate() {
            let rest: Vec<usize> = marks
                .iter()
                .filter(|&&x| x != col)
                .map(|&x| x as usize - 1)
                .collect();
            let mut value = 1u64;
            for a in 0..rest.len() {
                for b in a + 1..rest.len() {
                    value = field.mul(value, field.sub(points[rest[a]], points[rest[b]]));
                }
            }
            // l is zero-based, so (-1)^(l+1) with one-based l is + for even l.
            if l % 2 == 1 {
                value = field.neg(value);
            }
            m.set(row, col as usize - 1, value);
        }
    }
    m
}

/// Distinct uniformly random field elements.
pub fn sample_distinct_points<R: Rng>(n: usize, field: PrimeField, rng: &mut R) -> Vec<u64> {
    loop {
        let points: Vec<u64> = (0..n).map(|_| rng.gen_range(0..field.modulus())).collect();
        let mut sorted = points.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() == n {
            return points;
        }
    }
}

/// Maximum rank of the differential matrix over `trials` random points.
pub fn jacobian_rank_probe<R: Rng>(
    quads: &[MarkSet],
    n: usize,
    prime: u64,
    trials: usize,
    rng: &mut R,
) -> Result<usize, OracleError> {
    let field = PrimeField::new(prime)?;
    if n < 3 || quads.len() + 3 != n {
        return Err(OracleError::WrongLength {
            expected: n.saturating_sub(3),
            got: quads.len(),
        });
    }
    if (n as u64) > field.modulus() {
        return Err(OracleError::RepeatedPoints);
    }
    let ambient = MarkSet::range(n);
    for &q in quads {
        if q.len() != 4 || !q.is_subset(ambient) {
            return Err(OracleError::NotQuadruple { set: q, n });
        }
    }
    let mut best = 0;
    for _ in 0..trials.max(1) {
        let points = sample_distinct_points(n, field, rng);
        best = best.max(differential_matrix(quads, &points, field).rank());
        if best == quads.len() {
            break;
        }
    }
    Ok(best)
}
