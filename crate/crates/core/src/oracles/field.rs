//! Arithmetic in a prime field with a word-size modulus, and matrix rank.

use super::OracleError;

/// `2^61 - 1`.
pub const DEFAULT_PRIME: u64 = (1 << 61) - 1;

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            exp >>= 1;
        }
        acc
    };
    'bases: for &a in &BASES {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, OracleError> {
        if !is_prime(p) {
            return Err(OracleError::NotPrime { p });
        }
        Ok(PrimeField { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn reduce(&self, x: u64) -> u64 {
        x % self.p
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.p as u128) as u64
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.p - (b - a)
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.p as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse of a nonzero element.
    pub fn inv(&self, a: u64) -> u64 {
        assert!(!a.is_multiple_of(self.p), "zero has no inverse");
        self.pow(a, self.p - 2)
    }
}

/// Dense row-major matrix over a [`PrimeField`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    pub field: PrimeField,
    pub rows: usize,
    pub cols: usize,
    data: Vec<u64>,
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: u64) {
        self.data[r * self.cols + c] = self.field.reduce(value);
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, other: &FieldMatrix) -> FieldMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let f = self.field;
        let mut out = FieldMatrix::zeros(f, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    out.data[idx] = f.add(out.data[idx], f.mul(a, other.get(k, c)));
                }
            }
        }
        out
    }

    /// Rank by Gaussian elimination.
    pub fn rank(&self) -> usize {
        let f = self.field;
        let mut m = self.data.clone();
        let cols = self.cols;
        let mut rank = 0;
        for col in 0..cols {
            let Some(pivot) = (rank..self.rows).find(|&r| m[r * cols + col] != 0) else {
                continue;
            };
            for c in 0..cols {
                m.swap(pivot * cols + c, rank * cols + c);
            }
            let inv = f.inv(m[rank * cols + col]);
            for r in 0..self.rows {
                if r == rank || m[r * cols + col] == 0 {
                    continue;
                }
                let factor = f.mul(m[r * cols + col], inv);
                for c in col..cols {
                    let sub = f.mul(factor, m[rank * cols + c]);
                    m[r * cols + c] = f.sub(m[r * cols + c], sub);
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality() {
        assert!(is_prime(DEFAULT_PRIME));
        assert!(is_prime(2) && is_prime(3) && is_prime(97));
        assert!(!is_prime(1) && !is_prime(91) && !is_prime(DEFAULT_PRIME - 2));
        // Strong pseudoprime to several small bases.
        assert!(!is_prime(3_215_031_751));
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(PrimeField::new(15).is_err());
    }

    #[test]
    fn field_ops() {
        let f = PrimeField::new(101).unwrap();
        assert_eq!(f.add(100, 5), 4);
        assert_eq!(f.sub(3, 5), 99);
        assert_eq!(f.neg(0), 0);
        assert_eq!(f.mul(f.inv(7), 7), 1);
        assert_eq!(f.pow(2, 100), 1);
        let big = PrimeField::new(DEFAULT_PRIME).unwrap();
        let x = DEFAULT_PRIME - 3;
        assert_eq!(big.mul(x, big.inv(x)), 1);
    }

    #[test]
    fn rank_examples() {
        let f = PrimeField::new(7).unwrap();
        let mut m = FieldMatrix::zeros(f, 3, 3);
        for (r, row) in [[1, 2, 3], [2, 4, 6], [0, 1, 1]].iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        assert_eq!(m.rank(), 2);
        assert_eq!(FieldMatrix::zeros(f, 2, 5).rank(), 0);
        let mut id = FieldMatrix::zeros(f, 3, 3);
        for k in 0..3 {
            id.set(k, k, 1);
        }
        assert_eq!(id.rank(), 3);
        assert_eq!(m.mul(&id), m);
    }
}
