//! The explicit generator matrix for supports of size `n - m + 1`.
//!
//! Row `i` of `G` holds the coefficients of `∏_{j ∉ T_i} (t - x_j)`, so row
//! `i` of `G·M` (with `M` the `m × n` Vandermonde matrix) evaluates that
//! polynomial at every point.

use super::field::{FieldMatrix, PrimeField};
use super::OracleError;
use crate::system::MarkSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GmMds {
    pub g: FieldMatrix,
    pub gm: FieldMatrix,
    pub invertible: bool,
}

/// Coefficients of `∏ (t - r)` over `roots`, lowest degree first.
fn poly_from_roots(roots: &[u64], field: PrimeField) -> Vec<u64> {
    let mut coeffs = vec![1u64];
    for &r in roots {
        let mut next = vec![0u64; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] = field.add(next[k + 1], c);
            next[k] = field.sub(next[k], field.mul(c, r));
        }
        coeffs = next;
    }
    coeffs
}

pub fn vandermonde(rows: usize, points: &[u64], field: PrimeField) -> FieldMatrix {
    let mut m = FieldMatrix::zeros(field, rows, points.len());
    for (j, &x) in points.iter().enumerate() {
        let mut power = 1 % field.modulus();
        for l in 0..rows {
            m.set(l, j, power);
            power = field.mul(power, x);
        }
    }
    m
}

/// Builds `G` and `G·M`, checks the product against the closed form and
/// the zero pattern, and reports whether `G` is invertible.
pub fn gm_mds_matrix(
    supports: &[MarkSet],
    n: usize,
    field: PrimeField,
    points: &[u64],
) -> Result<GmMds, OracleError> {
    let m = supports.len();
    if points.len() != n {
        return Err(OracleError::WrongLength {
            expected: n,
            got: points.len(),
        });
    }
    if m == 0 || m > n {
        return Err(OracleError::WrongLength {
            expected: n,
            got: m,
        });
    }
    let mut reduced: Vec<u64> = points.iter().map(|&x| field.reduce(x)).collect();
    reduced.sort_unstable();
    reduced.dedup();
    if reduced.len() != n {
        return Err(OracleError::RepeatedPoints);
    }
    let ambient = MarkSet::range(n);
    let expected = n - m + 1;
    for (index, &t) in supports.iter().enumerate() {
        if t.len() != expected || !t.is_subset(ambient) {
            return Err(OracleError::SupportSize {
                index,
                expected,
                got: (t & ambient).len(),
            });
        }
    }

    let mut g = FieldMatrix::zeros(field, m, m);
    for (i, &t) in supports.iter().enumerate() {
        let roots: Vec<u64> = (ambient - t)
            .iter()
            .map(|j| points[j as usize - 1])
            .collect();
        for (l, c) in poly_from_roots(&roots, field).into_iter().enumerate() {
            g.set(i, l, c);
        }
    }
    let gm = g.mul(&vandermonde(m, points, field));

    for (i, &t) in supports.iter().enumerate() {
        for j in 0..n {
            let mut closed = 1u64;
            for k in (ambient - t).iter() {
                closed = field.mul(closed, field.sub(points[j], points[k as usize - 1]));
            }
            let label = (j + 1) as u8;
            if gm.get(i, j) != field.reduce(closed) || (!t.contains(label) && gm.get(i, j) != 0) {
                return Err(OracleError::GeneratorIdentity { row: i, col: j });
            }
        }
    }
    let invertible = g.rank() == m;
    Ok(GmMds { g, gm, invertible })
}
