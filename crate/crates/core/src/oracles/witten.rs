//! Psi-class intersection numbers in genus zero: multinomial coefficients.

use num_bigint::BigUint;
use num_traits::One;

/// `(Σ parts)! / ∏ parts!`, as a product of binomial coefficients.
pub fn multinomial(parts: &[usize]) -> BigUint {
    let mut total = 0usize;
    let mut acc = BigUint::one();
    for &part in parts {
        for k in 1..=part {
            acc *= BigUint::from(total + k);
            acc /= BigUint::from(k);
        }
        total += part;
    }
    acc
}

/// `∫ ψ_1^{a_1} ⋯ ψ_n^{a_n}` on `n` marks: the multinomial
/// `(n-3; a_1, ..., a_n)`, or 0 if the exponents do not sum to `n - 3`.
pub fn witten_multinomial(n: usize, exponents: &[usize]) -> BigUint {
    if n < 3 || exponents.len() != n || exponents.iter().sum::<usize>() != n - 3 {
        return BigUint::ZERO;
    }
    multinomial(exponents)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: usize) -> BigUint {
        (1..=k).fold(BigUint::one(), |acc, j| acc * BigUint::from(j))
    }

    #[test]
    fn examples() {
        assert_eq!(witten_multinomial(4, &[0, 0, 0, 1]), BigUint::one());
        assert_eq!(
            witten_multinomial(6, &[1, 1, 1, 0, 0, 0]),
            BigUint::from(6u32)
        );
        assert_eq!(
            witten_multinomial(8, &[2, 2, 1, 0, 0, 0, 0, 0]),
            BigUint::from(30u32)
        );
        assert_eq!(witten_multinomial(5, &[1, 0, 0, 0, 0]), BigUint::ZERO);
        assert_eq!(witten_multinomial(5, &[1, 1, 0, 0]), BigUint::ZERO);
    }

    #[test]
    fn matches_factorial_ratio() {
        let parts = [3usize, 0, 5, 2, 7];
        let expected = factorial(17) / (factorial(3) * factorial(5) * factorial(2) * factorial(7));
        assert_eq!(multinomial(&parts), expected);
    }

    #[test]
    fn exceeds_u64() {
        let parts = [5usize; 8];
        assert!(multinomial(&parts) > BigUint::from(u64::MAX));
    }
}
